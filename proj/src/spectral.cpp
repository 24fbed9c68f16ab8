#include "catchad/spectral.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace catchad {

DftPlan::DftPlan(Eigen::Index time_length) : t_(time_length), f_(rfft_bins(time_length)) {
  if (t_ < 2) throw std::invalid_argument("DFT length must be at least 2");
  fwd_cos_.resize(t_, f_);
  fwd_sin_.resize(t_, f_);
  inv_cos_.resize(f_, t_);
  inv_sin_.resize(f_, t_);
  const double inv_t = 1.0 / static_cast<double>(t_);
  for (Eigen::Index k = 0; k < f_; ++k) {
    const bool edge = (k == 0) || (t_ % 2 == 0 && k == t_ / 2);
    const double weight = (edge ? 1.0 : 2.0) * inv_t;
    for (Eigen::Index t = 0; t < t_; ++t) {
      // reduce k*t mod T first so the angle is exact for large products
      const auto m = (k * t) % t_;
      const double angle = 2.0 * std::numbers::pi * static_cast<double>(m) * inv_t;
      const double c = std::cos(angle);
      const double s = std::sin(angle);
      fwd_cos_(t, k) = c;
      fwd_sin_(t, k) = -s;
      inv_cos_(k, t) = weight * c;
      inv_sin_(k, t) = edge ? 0.0 : -weight * s;
    }
  }
}

void DftPlan::forward(const Matrix& x, Matrix& re, Matrix& im) const {
  if (x.cols() != t_) {
    throw std::invalid_argument("rfft: expected " + std::to_string(t_) + " samples, got " +
                                std::to_string(x.cols()));
  }
  re.noalias() = x * fwd_cos_;
  im.noalias() = x * fwd_sin_;
  im.col(0).setZero();
  if (t_ % 2 == 0) im.col(f_ - 1).setZero();
}

Matrix DftPlan::inverse(const Matrix& re, const Matrix& im) const {
  if (re.cols() != f_ || im.cols() != f_ || re.rows() != im.rows())
    throw std::invalid_argument("irfft: spectrum shape does not match plan");
  Matrix out = re * inv_cos_;
  out.noalias() += im * inv_sin_;
  return out;
}

Spectrum rfft(const Matrix& window) {
  DftPlan plan(window.cols());
  Spectrum s;
  s.time_length = window.cols();
  plan.forward(window, s.real_part, s.imag_part);
  return s;
}

Matrix irfft(const Spectrum& spectrum, Eigen::Index time_length) {
  if (spectrum.time_length != time_length) {
    throw std::invalid_argument("irfft: spectrum was computed for length " +
                                std::to_string(spectrum.time_length) + ", requested " +
                                std::to_string(time_length));
  }
  DftPlan plan(time_length);
  return plan.inverse(spectrum.real_part, spectrum.imag_part);
}

Eigen::Index patch_count(Eigen::Index bins, Eigen::Index patch, Eigen::Index stride) {
  if (patch < 1 || stride < 1) throw std::invalid_argument("patch size and stride must be positive");
  if (patch > bins) {
    throw std::invalid_argument("patch size " + std::to_string(patch) + " exceeds " +
                                std::to_string(bins) + " columns");
  }
  return (bins - patch) / stride + 1;
}

std::vector<Matrix> patchify(const Matrix& array, Eigen::Index patch, Eigen::Index stride) {
  const auto count = patch_count(array.cols(), patch, stride);
  std::vector<Matrix> out;
  out.reserve(static_cast<std::size_t>(count));
  for (Eigen::Index i = 0; i < count; ++i) out.emplace_back(array.middleCols(i * stride, patch));
  return out;
}

FrequencyPatch concat_real_imag(const Matrix& real_patch, const Matrix& imag_patch,
                                Eigen::Index patch_index) {
  if (real_patch.rows() != imag_patch.rows() || real_patch.cols() != imag_patch.cols())
    throw std::invalid_argument("concat_real_imag: real and imaginary patch shapes differ");
  FrequencyPatch fp;
  fp.real_patch = real_patch;
  fp.imag_patch = imag_patch;
  fp.joint.resize(real_patch.rows(), 2 * real_patch.cols());
  fp.joint << real_patch, imag_patch;
  fp.patch_index = patch_index;
  return fp;
}

}  // namespace catchad
