#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace catchad {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

/// Deterministic engine used by every seeded component.
using Rng = std::mt19937_64;

/// Which optimizer phase owns a parameter tensor.
enum class ParamGroup { Mask, Model };

struct NamedTensor {
  std::string name;
  Matrix value;
  ParamGroup group = ParamGroup::Model;
};

/// Ordered collection of named parameter tensors. Order is stable and
/// defines the checkpoint layout.
class ParamSet {
 public:
  Matrix& add(std::string name, Matrix value, ParamGroup group = ParamGroup::Model);

  Matrix& at(const std::string& name);
  const Matrix& at(const std::string& name) const;
  bool contains(const std::string& name) const;

  std::vector<NamedTensor>& tensors() { return tensors_; }
  const std::vector<NamedTensor>& tensors() const { return tensors_; }
  std::size_t size() const { return tensors_.size(); }

  /// Same names and shapes, all zeros.
  ParamSet zeros_like() const;

  void set_zero();

  std::size_t scalar_count() const;

  bool all_finite() const;

 private:
  std::size_t index_of(const std::string& name) const;

  std::vector<NamedTensor> tensors_;
};

/// Bitwise equality of names, groups, shapes and values.
bool bitwise_equal(const ParamSet& a, const ParamSet& b);

}  // namespace catchad
