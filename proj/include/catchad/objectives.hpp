#pragma once

#include "catchad/tensor.hpp"

namespace catchad {

struct LossWeights {
  double rec_time = 1.0;    // lambda1
  double rec_freq = 1.0;    // lambda2
  double clustering = 0.1;  // lambda3
  double regular = 0.1;     // lambda4
  double tau = 1.0;         // clustering temperature

  void validate() const;
};

struct LossComponents {
  double rec_time = 0.0;
  double rec_freq = 0.0;
  double clustering = 0.0;
  double regular = 0.0;
};

/// Mean squared residual over all entries. Optional gradient w.r.t. `recon`.
double rec_loss_time(const Matrix& target, const Matrix& recon, Matrix* grad_recon = nullptr);

/// Mean absolute residual of the real part plus that of the imaginary part.
double rec_loss_freq(const Matrix& target_real, const Matrix& target_imag, const Matrix& recon_real,
                     const Matrix& recon_imag, Matrix* grad_real = nullptr,
                     Matrix* grad_imag = nullptr);

/// -1/N sum_k log( sum_m m_km exp(S_km / tau) / sum_l exp(T_km / tau) ).
///
/// `masked_scores` must equal `raw_scores` wherever `mask` is non-zero; the
/// gradient written to `grad_raw` treats it as that function of the raw
/// scores. `grad_mask` is the gradient w.r.t. a continuous mask.
double clustering_loss(const Matrix& raw_scores, const Matrix& masked_scores, const Matrix& mask,
                       double tau, Matrix* grad_raw = nullptr, Matrix* grad_mask = nullptr);

/// ||I - M||_F / N. The gradient at M = I is taken as zero.
double regular_loss(const Matrix& mask, Matrix* grad_mask = nullptr);

/// Weighted sum; throws std::domain_error on a non-finite component.
double total_loss(const LossComponents& components, const LossWeights& weights);

}  // namespace catchad
