#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <string>

#include "eqt/tape.hpp"

namespace eqt {

/// Flat registry of named parameter arrays. Initialization is seeded per
/// name, so the draw for one parameter does not depend on registration
/// order.
class ParameterStore {
 public:
  explicit ParameterStore(std::uint64_t seed = 0) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }

  /// Fetch an existing array or create it with the given initializer.
  Eigen::MatrixXd& uniform_fan_in(const std::string& name, int rows, int cols, int fan_in);
  Eigen::MatrixXd& normal(const std::string& name, int rows, int cols, double stddev);
  Eigen::MatrixXd& zeros(const std::string& name, int rows, int cols);
  Eigen::MatrixXd& ones(const std::string& name, int rows, int cols);

  bool has(const std::string& name) const { return values_.count(name) != 0; }
  Eigen::MatrixXd& at(const std::string& name);
  const Eigen::MatrixXd& at(const std::string& name) const;
  std::map<std::string, Eigen::MatrixXd>& all() { return values_; }
  const std::map<std::string, Eigen::MatrixXd>& all() const { return values_; }

  long parameter_count() const;

 private:
  std::uint64_t seed_ = 0;
  std::map<std::string, Eigen::MatrixXd> values_;

  Eigen::MatrixXd& ensure(const std::string& name, int rows, int cols, int kind, double arg);
};

using LeafMap = std::map<std::string, Slot>;

/// Emit every stored parameter as a tape leaf, in name order.
LeafMap emit_leaves(Tape& tape, const ParameterStore& store, bool requires_grad = true);

}  // namespace eqt
