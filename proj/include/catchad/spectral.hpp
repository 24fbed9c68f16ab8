#pragma once

#include "catchad/tensor.hpp"

#include <vector>

namespace catchad {

/// One-sided spectrum of a real N x T block. F = T/2 + 1 bins.
struct Spectrum {
  Matrix real_part;  // N x F
  Matrix imag_part;  // N x F
  Eigen::Index time_length = 0;
};

struct FrequencyPatch {
  Matrix real_patch;  // N x p
  Matrix imag_patch;  // N x p
  Matrix joint;       // N x 2p, real columns first
  Eigen::Index patch_index = 0;
};

inline Eigen::Index rfft_bins(Eigen::Index time_length) { return time_length / 2 + 1; }

/// Dense real-DFT plan for a fixed length. Forward is unnormalized, inverse
/// carries the 1/T factor, so inverse(forward(x)) == x.
///
/// The transforms are plain matrix products, which makes their adjoints (used
/// by the model's backward pass) simple transposes.
class DftPlan {
 public:
  explicit DftPlan(Eigen::Index time_length);

  Eigen::Index time_length() const { return t_; }
  Eigen::Index bins() const { return f_; }

  /// rows x T -> (rows x F, rows x F)
  void forward(const Matrix& x, Matrix& re, Matrix& im) const;
  /// (rows x F, rows x F) -> rows x T. The imaginary parts of the DC and
  /// Nyquist bins do not contribute.
  Matrix inverse(const Matrix& re, const Matrix& im) const;

  const Matrix& forward_cos() const { return fwd_cos_; }  // T x F
  const Matrix& forward_sin() const { return fwd_sin_; }  // T x F
  const Matrix& inverse_cos() const { return inv_cos_; }  // F x T
  const Matrix& inverse_sin() const { return inv_sin_; }  // F x T

 private:
  Eigen::Index t_;
  Eigen::Index f_;
  Matrix fwd_cos_, fwd_sin_, inv_cos_, inv_sin_;
};

Spectrum rfft(const Matrix& window);
Matrix irfft(const Spectrum& spectrum, Eigen::Index time_length);

/// Number of patches of width p at stride s over `bins` columns.
Eigen::Index patch_count(Eigen::Index bins, Eigen::Index patch, Eigen::Index stride);

/// Contiguous column blocks [i*s, i*s+p).
std::vector<Matrix> patchify(const Matrix& array, Eigen::Index patch, Eigen::Index stride);

FrequencyPatch concat_real_imag(const Matrix& real_patch, const Matrix& imag_patch,
                                Eigen::Index patch_index = 0);

}  // namespace catchad
