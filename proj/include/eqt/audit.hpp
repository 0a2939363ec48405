#pragma once

#include <string>
#include <vector>

#include "eqt/model.hpp"

namespace eqt {

struct AuditItem {
  std::string name;
  double err = 0.0;
  double tol = 0.0;
  bool pass() const { return err <= tol; }
};

struct AuditReport {
  std::vector<AuditItem> items;
  bool all_pass() const;
  std::string text() const;
};

/// Random well-separated cluster for audit runs; species drawn below the
/// configured table size, coordinates on a dyadic grid so that grid-aligned
/// translations stay exact in floating point.
AtomisticGraph audit_graph(const ModelConfig& cfg, int n_atoms, std::uint64_t seed);

/// Rotation (and, in E(3) mode, inversion) equivariance of every point-wise
/// operation, the attention block, and the end-to-end model; exact
/// translation invariance; permutation invariance; force equivariance.
AuditReport audit_equivariance(const ModelConfig& cfg, std::uint64_t seed, int rotations = 20);

/// Tape gradients of the end-to-end energy against central finite
/// differences over every parameter leaf and the positions.
AuditReport audit_gradcheck(const ModelConfig& cfg, std::uint64_t seed,
                            int max_components_per_leaf = 8);

/// Human-readable dump of every tensor-product plan the model builds.
std::string audit_paths(const ModelConfig& cfg);

/// Forces against central finite differences of the energy, plus the net
/// force (translation invariance makes it vanish).
AuditReport audit_forces(const ModelConfig& cfg, std::uint64_t seed);

}  // namespace eqt
