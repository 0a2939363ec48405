#include "eqt/graph.hpp"

#include <cmath>
#include <stdexcept>

namespace eqt {

Eigen::MatrixXd AtomisticGraph::edge_vectors() const {
  Eigen::MatrixXd v(num_edges(), 3);
  for (int e = 0; e < num_edges(); ++e)
    v.row(e) = positions.row(edge_src[e]) - positions.row(edge_dst[e]);
  return v;
}

Eigen::VectorXd AtomisticGraph::edge_lengths() const {
  return edge_vectors().rowwise().norm();
}

AtomisticGraph radius_graph(const std::vector<int>& species, const Eigen::MatrixXd& positions,
                            double cutoff) {
  const int n = static_cast<int>(species.size());
  if (n < 1) throw std::invalid_argument("radius_graph: need at least one atom");
  if (positions.rows() != n || positions.cols() != 3)
    throw std::invalid_argument("radius_graph: positions must be N x 3");
  AtomisticGraph g;
  g.species = species;
  g.positions = positions;
  g.cutoff = cutoff;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const double d = (positions.row(j) - positions.row(i)).norm();
      if (d < 1e-12)
        throw std::domain_error("radius_graph: atoms " + std::to_string(i) + " and " +
                                std::to_string(j) + " coincide");
      if (d <= cutoff) {
        g.edge_dst.push_back(i);
        g.edge_src.push_back(j);
      }
    }
  }
  return g;
}

RadialBasisKind radial_kind_from_string(const std::string& s) {
  if (s == "gaussian") return RadialBasisKind::Gaussian;
  if (s == "bessel") return RadialBasisKind::Bessel;
  throw std::invalid_argument("unknown radial basis kind '" + s + "'");
}

std::string to_string(RadialBasisKind k) {
  return k == RadialBasisKind::Gaussian ? "gaussian" : "bessel";
}

Eigen::VectorXd radial_basis(double d, const RadialBasisSpec& spec) {
  if (d <= 0.0) throw std::domain_error("radial_basis: distance must be positive");
  if (spec.count < 2) throw std::invalid_argument("radial basis: need at least two functions");
  Eigen::VectorXd out(spec.count);
  if (spec.kind == RadialBasisKind::Gaussian) {
    const double spacing = spec.cutoff / (spec.count - 1);
    for (int k = 0; k < spec.count; ++k) {
      const double c = k * spacing;
      out[k] = std::exp(-(d - c) * (d - c) / (2.0 * spacing * spacing));
    }
  } else {
    const double f = std::sqrt(2.0 / spec.cutoff);
    for (int k = 1; k <= spec.count; ++k)
      out[k - 1] = f * std::sin(k * M_PI * d / spec.cutoff) / d;
  }
  return out;
}

Slot emit_radial_basis(Tape& tape, Slot d, const RadialBasisSpec& spec) {
  if (tape.val(d).cols() != 1) throw std::invalid_argument("radial basis: distances must be N x 1");
  if (spec.count < 2) throw std::invalid_argument("radial basis: need at least two functions");
  if (spec.kind == RadialBasisKind::Gaussian) {
    const double spacing = spec.cutoff / (spec.count - 1);
    Eigen::MatrixXd centers(1, spec.count);
    for (int k = 0; k < spec.count; ++k) centers(0, k) = k * spacing;
    Slot spread = tape.sub(tape.repeat_cols(d, spec.count),
                           tape.row_repeat(tape.constant(centers), static_cast<int>(tape.val(d).rows())));
    return tape.exp(tape.scale(tape.mul(spread, spread), -1.0 / (2.0 * spacing * spacing)));
  }
  Eigen::MatrixXd freq(1, spec.count);
  for (int k = 1; k <= spec.count; ++k) freq(0, k - 1) = k * M_PI / spec.cutoff;
  Slot phases = tape.mul_row_bcast(tape.repeat_cols(d, spec.count), tape.constant(freq));
  Slot ring = tape.sin(phases);
  return tape.scale(tape.mul_bcast(ring, tape.recip(d)), std::sqrt(2.0 / spec.cutoff));
}

RadialMlp::RadialMlp(ParameterStore& store, std::string name, int in_dim, int hidden, int out_dim)
    : in_dim_(in_dim), hidden_(hidden), out_dim_(out_dim) {
  const Irreps in = Irreps({{in_dim, 0, std::nullopt}});
  const Irreps mid = Irreps({{hidden, 0, std::nullopt}});
  const Irreps out = Irreps({{out_dim, 0, std::nullopt}});
  lin0_ = EquivariantLinear(store, name + ".l0", in, mid);
  norm0_ = EquivariantLayerNorm(store, name + ".n0", mid);
  lin1_ = EquivariantLinear(store, name + ".l1", mid, mid);
  norm1_ = EquivariantLayerNorm(store, name + ".n1", mid);
  lin2_ = EquivariantLinear(store, name + ".l2", mid, out);
}

Slot RadialMlp::emit(Tape& tape, const LeafMap& leaves, Slot basis) const {
  if (tape.val(basis).cols() != in_dim_)
    throw std::invalid_argument("radial mlp: basis width mismatch");
  Slot h = tape.silu(norm0_.emit(tape, leaves, lin0_.emit(tape, leaves, basis)));
  h = tape.silu(norm1_.emit(tape, leaves, lin1_.emit(tape, leaves, h)));
  return lin2_.emit(tape, leaves, h);
}

}  // namespace eqt
