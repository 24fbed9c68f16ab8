#include "catchad/tensor.hpp"

#include <cstring>
#include <stdexcept>

namespace catchad {

Matrix& ParamSet::add(std::string name, Matrix value, ParamGroup group) {
  if (contains(name)) throw std::invalid_argument("duplicate parameter tensor: " + name);
  tensors_.push_back({std::move(name), std::move(value), group});
  return tensors_.back().value;
}

std::size_t ParamSet::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < tensors_.size(); ++i)
    if (tensors_[i].name == name) return i;
  throw std::out_of_range("unknown parameter tensor: " + name);
}

Matrix& ParamSet::at(const std::string& name) { return tensors_[index_of(name)].value; }

const Matrix& ParamSet::at(const std::string& name) const {
  return tensors_[index_of(name)].value;
}

bool ParamSet::contains(const std::string& name) const {
  for (const auto& t : tensors_)
    if (t.name == name) return true;
  return false;
}

ParamSet ParamSet::zeros_like() const {
  ParamSet out;
  for (const auto& t : tensors_)
    out.add(t.name, Matrix::Zero(t.value.rows(), t.value.cols()), t.group);
  return out;
}

void ParamSet::set_zero() {
  for (auto& t : tensors_) t.value.setZero();
}

std::size_t ParamSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += static_cast<std::size_t>(t.value.size());
  return n;
}

bool ParamSet::all_finite() const {
  for (const auto& t : tensors_)
    if (!t.value.allFinite()) return false;
  return true;
}

bool bitwise_equal(const ParamSet& a, const ParamSet& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& x = a.tensors()[i];
    const auto& y = b.tensors()[i];
    if (x.name != y.name || x.group != y.group) return false;
    if (x.value.rows() != y.value.rows() || x.value.cols() != y.value.cols()) return false;
    if (std::memcmp(x.value.data(), y.value.data(), sizeof(double) * x.value.size()) != 0)
      return false;
  }
  return true;
}

}  // namespace catchad
