#pragma once

#include <Eigen/Dense>

#include <memory>
#include <string>
#include <vector>

#include "eqt/ops.hpp"

namespace eqt {

/// 3D atomistic graph: species codes, positions (Angstrom) and a directed
/// edge list i <- j with r_ij = r_j - r_i. Edge geometry is derived from the
/// current positions on demand, never cached.
struct AtomisticGraph {
  std::vector<int> species;
  Eigen::MatrixXd positions;  // N x 3
  std::vector<int> edge_dst;  // i of each edge i <- j
  std::vector<int> edge_src;  // j
  double cutoff = 0.0;

  int num_nodes() const { return static_cast<int>(species.size()); }
  int num_edges() const { return static_cast<int>(edge_dst.size()); }
  Eigen::MatrixXd edge_vectors() const;
  Eigen::VectorXd edge_lengths() const;
};

/// All ordered pairs with 0 < |r_ij| <= cutoff, sorted by (i, j). Throws
/// std::domain_error when two atoms coincide and std::invalid_argument on an
/// empty input.
AtomisticGraph radius_graph(const std::vector<int>& species, const Eigen::MatrixXd& positions,
                            double cutoff);

enum class RadialBasisKind { Gaussian, Bessel };

RadialBasisKind radial_kind_from_string(const std::string& s);
std::string to_string(RadialBasisKind k);

struct RadialBasisSpec {
  RadialBasisKind kind = RadialBasisKind::Gaussian;
  int count = 32;
  double cutoff = 5.0;
};

/// Gaussian: exp(-(d-c_k)^2 / (2 sigma^2)) with centers evenly spaced on
/// [0, cutoff] and sigma equal to the spacing. Bessel:
/// sqrt(2/cutoff) sin(k pi d / cutoff) / d for k = 1..count.
Eigen::VectorXd radial_basis(double d, const RadialBasisSpec& spec);
Slot emit_radial_basis(Tape& tape, Slot d, const RadialBasisSpec& spec);

/// Radial function turning basis values into tensor-product weights: two
/// linear layers each followed by layer norm and SiLU, then a final linear.
class RadialMlp {
 public:
  RadialMlp() = default;
  RadialMlp(ParameterStore& store, std::string name, int in_dim, int hidden, int out_dim);

  Slot emit(Tape& tape, const LeafMap& leaves, Slot basis) const;
  int out_dim() const { return out_dim_; }

 private:
  int in_dim_ = 0, hidden_ = 0, out_dim_ = 0;
  EquivariantLinear lin0_, lin1_, lin2_;
  EquivariantLayerNorm norm0_, norm1_;
};

}  // namespace eqt
