#include "eqt/params.hpp"

#include <random>
#include <stdexcept>

namespace eqt {

namespace {

// FNV-1a, mixed with the store seed: initialization is per-name
// deterministic and independent of registration order.
std::uint64_t name_seed(std::uint64_t base, const std::string& name) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : name) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h ^ (base * 0x9e3779b97f4a7c15ull + 0x2545f4914f6cdd1dull);
}

}  // namespace

Eigen::MatrixXd& ParameterStore::ensure(const std::string& name, int rows, int cols, int kind,
                                        double arg) {
  auto it = values_.find(name);
  if (it != values_.end()) {
    if (it->second.rows() != rows || it->second.cols() != cols)
      throw std::invalid_argument("parameter '" + name + "' shape mismatch");
    return it->second;
  }
  Eigen::MatrixXd m(rows, cols);
  std::mt19937_64 rng(name_seed(seed_, name));
  switch (kind) {
    case 0: {
      std::uniform_real_distribution<double> u(-arg, arg);
      for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = u(rng);
      break;
    }
    case 1: {
      std::normal_distribution<double> dist(0.0, arg);
      for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = dist(rng);
      break;
    }
    case 2:
      m.setZero();
      break;
    case 3:
      m.setOnes();
      break;
  }
  return values_.emplace(name, std::move(m)).first->second;
}

Eigen::MatrixXd& ParameterStore::uniform_fan_in(const std::string& name, int rows, int cols,
                                                int fan_in) {
  return ensure(name, rows, cols, 0, 1.0 / std::sqrt(static_cast<double>(std::max(fan_in, 1))));
}

Eigen::MatrixXd& ParameterStore::normal(const std::string& name, int rows, int cols,
                                        double stddev) {
  return ensure(name, rows, cols, 1, stddev);
}

Eigen::MatrixXd& ParameterStore::zeros(const std::string& name, int rows, int cols) {
  return ensure(name, rows, cols, 2, 0.0);
}

Eigen::MatrixXd& ParameterStore::ones(const std::string& name, int rows, int cols) {
  return ensure(name, rows, cols, 3, 0.0);
}

Eigen::MatrixXd& ParameterStore::at(const std::string& name) {
  auto it = values_.find(name);
  if (it == values_.end()) throw std::invalid_argument("unknown parameter '" + name + "'");
  return it->second;
}

const Eigen::MatrixXd& ParameterStore::at(const std::string& name) const {
  auto it = values_.find(name);
  if (it == values_.end()) throw std::invalid_argument("unknown parameter '" + name + "'");
  return it->second;
}

long ParameterStore::parameter_count() const {
  long n = 0;
  for (const auto& [name, m] : values_) n += static_cast<long>(m.size());
  return n;
}

LeafMap emit_leaves(Tape& tape, const ParameterStore& store, bool requires_grad) {
  LeafMap leaves;
  for (const auto& [name, m] : store.all()) leaves[name] = tape.leaf(m, requires_grad);
  return leaves;
}

}  // namespace eqt
