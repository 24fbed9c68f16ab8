#include "catchad/objectives.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace catchad {

void LossWeights::validate() const {
  if (rec_time < 0 || rec_freq < 0 || clustering < 0 || regular < 0)
    throw std::invalid_argument("loss weights must be non-negative");
  if (!(tau > 0.0)) throw std::invalid_argument("loss temperature must be > 0");
}

double rec_loss_time(const Matrix& target, const Matrix& recon, Matrix* grad_recon) {
  if (target.rows() != recon.rows() || target.cols() != recon.cols())
    throw std::invalid_argument("rec_loss_time: shape mismatch");
  const double count = static_cast<double>(target.size());
  const Matrix diff = recon - target;
  if (grad_recon) *grad_recon = diff * (2.0 / count);
  return diff.squaredNorm() / count;
}

double rec_loss_freq(const Matrix& target_real, const Matrix& target_imag, const Matrix& recon_real,
                     const Matrix& recon_imag, Matrix* grad_real, Matrix* grad_imag) {
  if (target_real.rows() != recon_real.rows() || target_real.cols() != recon_real.cols() ||
      target_imag.rows() != recon_imag.rows() || target_imag.cols() != recon_imag.cols() ||
      target_real.rows() != target_imag.rows() || target_real.cols() != target_imag.cols())
    throw std::invalid_argument("rec_loss_freq: shape mismatch");
  const double count = static_cast<double>(target_real.size());
  const Matrix dr = recon_real - target_real;
  const Matrix di = recon_imag - target_imag;
  auto sign = [](double v) { return static_cast<double>((v > 0.0) - (v < 0.0)); };
  if (grad_real) *grad_real = dr.unaryExpr(sign) / count;
  if (grad_imag) *grad_imag = di.unaryExpr(sign) / count;
  return dr.cwiseAbs().sum() / count + di.cwiseAbs().sum() / count;
}

double clustering_loss(const Matrix& raw_scores, const Matrix& masked_scores, const Matrix& mask,
                       double tau, Matrix* grad_raw, Matrix* grad_mask) {
  const auto n = raw_scores.rows();
  if (raw_scores.cols() != n || masked_scores.rows() != n || masked_scores.cols() != n ||
      mask.rows() != n || mask.cols() != n)
    throw std::invalid_argument("clustering_loss: score and mask shapes must be N x N");
  if (!(tau > 0.0)) throw std::invalid_argument("clustering_loss: tau must be > 0");
  if (grad_raw) grad_raw->setZero(n, n);
  if (grad_mask) grad_mask->setZero(n, n);
  const double inv_n = 1.0 / static_cast<double>(n);
  double total = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    const double mx = raw_scores.row(k).maxCoeff() / tau;
    double den = 0.0;
    double num = 0.0;
    for (Eigen::Index l = 0; l < n; ++l) den += std::exp(raw_scores(k, l) / tau - mx);
    for (Eigen::Index m = 0; m < n; ++m)
      if (mask(k, m) > 0.0) num += mask(k, m) * std::exp(masked_scores(k, m) / tau - mx);
    if (!(num > 0.0)) throw std::domain_error("clustering_loss: row has no unmasked entry");
    total += std::log(den) - std::log(num);
    if (grad_raw || grad_mask) {
      for (Eigen::Index l = 0; l < n; ++l) {
        const double e = std::exp(raw_scores(k, l) / tau - mx);
        if (grad_raw) {
          double g = e / den;
          if (mask(k, l) > 0.0) g -= mask(k, l) * e / num;
          (*grad_raw)(k, l) = g * inv_n / tau;
        }
        if (grad_mask) (*grad_mask)(k, l) = -e / num * inv_n;
      }
    }
  }
  return total * inv_n;
}

double regular_loss(const Matrix& mask, Matrix* grad_mask) {
  const auto n = mask.rows();
  if (mask.cols() != n) throw std::invalid_argument("regular_loss: mask must be square");
  const Matrix diff = Matrix::Identity(n, n) - mask;
  const double norm = diff.norm();
  const double inv_n = 1.0 / static_cast<double>(n);
  if (grad_mask) {
    if (norm > 0.0)
      *grad_mask = -diff / (norm * static_cast<double>(n));
    else
      grad_mask->setZero(n, n);
  }
  return norm * inv_n;
}

double total_loss(const LossComponents& c, const LossWeights& w) {
  const double parts[] = {c.rec_time, c.rec_freq, c.clustering, c.regular};
  const char* names[] = {"rec_time", "rec_freq", "clustering", "regular"};
  for (int i = 0; i < 4; ++i)
    if (!std::isfinite(parts[i]))
      throw std::domain_error(std::string("non-finite loss component: ") + names[i]);
  return w.rec_time * c.rec_time + w.rec_freq * c.rec_freq + w.clustering * c.clustering +
         w.regular * c.regular;
}

}  // namespace catchad
