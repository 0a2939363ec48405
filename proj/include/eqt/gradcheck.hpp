#pragma once

#include <functional>
#include <map>
#include <string>

#include "eqt/params.hpp"
#include "eqt/tape.hpp"

namespace eqt {

/// Builds a scalar-valued computation from named leaves.
using TapeBuilder = std::function<Slot(Tape&, const LeafMap&)>;

struct GradCheckItem {
  std::string leaf;
  double max_rel_err = 0.0;
  int checked = 0;
};

struct GradCheckReport {
  std::vector<GradCheckItem> items;
  double worst = 0.0;
  double tol = 0.0;

  bool pass() const { return worst <= tol; }
  std::string text() const;
};

/// Compare tape gradients against central finite differences, per leaf.
/// With max_components >= 0 a seeded random subset of entries per leaf is
/// probed instead of every entry. The relative error uses a small floor so
/// near-zero gradients compare by absolute size.
GradCheckReport grad_check(const std::map<std::string, Eigen::MatrixXd>& leaves,
                           const TapeBuilder& build, double h, double tol,
                           int max_components = -1, std::uint64_t seed = 0);

}  // namespace eqt
