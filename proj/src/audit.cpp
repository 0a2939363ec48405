#include "eqt/audit.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <sstream>

#include "eqt/gradcheck.hpp"

namespace eqt {

namespace {

using Mat = Eigen::MatrixXd;

double max_abs(const Mat& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

Mat random_feature(const Irreps& irreps, int rows, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Mat m(rows, irreps.dim());
  for (long i = 0; i < m.rows(); ++i)
    for (long j = 0; j < m.cols(); ++j) m(i, j) = dist(rng);
  return m;
}

// Transformed copy of a feature matrix: rows are vectors, so x -> x D^T.
Mat transform_rows(const Mat& x, const Irreps& irreps, const Eigen::Quaterniond& q, bool invert) {
  return x * irreps_rep(irreps, q, invert).transpose();
}

struct EagerAttention {
  ModelConfig cfg;
  ParameterStore store;
  AttentionLayer layer;

  EagerAttention(const ModelConfig& c, std::uint64_t seed)
      : cfg(c), store(seed) {
    AttentionConfig acfg;
    acfg.heads = cfg.heads;
    acfg.d_head = cfg.d_head;
    acfg.attn_kind = cfg.attn_kind;
    acfg.message_kind = cfg.message_kind;
    acfg.leaky_slope = cfg.leaky_slope;
    layer = AttentionLayer(store, "probe", cfg.d_embed, cfg.d_sh, cfg.radial.count, acfg);
  }

  Mat run(const Mat& x, const AtomisticGraph& g) const {
    Tape tape;
    LeafMap leaves = emit_leaves(tape, store, false);
    Slot pos = tape.leaf(g.positions, false);
    auto dst = std::make_shared<std::vector<int>>(g.edge_dst);
    auto src = std::make_shared<std::vector<int>>(g.edge_src);
    Slot rel = tape.sub(tape.gather_rows(pos, src), tape.gather_rows(pos, dst));
    Slot len = tape.sqrt(tape.row_sum(tape.mul(rel, rel)));
    Slot dirs = tape.mul_bcast(rel, tape.recip(len));
    EdgeContext edges;
    edges.sh = emit_sph(tape, dirs, cfg.l_max, cfg.e3);
    edges.rbf = emit_radial_basis(tape, len, cfg.radial);
    edges.dst = dst;
    edges.src = src;
    edges.num_nodes = g.num_nodes();
    Slot out = layer.emit(tape, leaves, tape.leaf(x, false), edges, nullptr);
    return tape.val(out);
  }
};

AtomisticGraph rotated(const AtomisticGraph& g, const Eigen::Quaterniond& q) {
  AtomisticGraph out = g;
  out.positions = g.positions * q.toRotationMatrix().transpose();
  return out;
}

AtomisticGraph inverted(const AtomisticGraph& g) {
  AtomisticGraph out = g;
  out.positions = -g.positions;
  return out;
}

}  // namespace

bool AuditReport::all_pass() const {
  for (const auto& it : items)
    if (!it.pass()) return false;
  return true;
}

std::string AuditReport::text() const {
  std::ostringstream os;
  for (const auto& it : items)
    os << (it.pass() ? "  ok    " : "  FAIL  ") << it.name << "  max err " << it.err << "  (tol "
       << it.tol << ")\n";
  os << (all_pass() ? "all checks passed" : "CHECKS FAILED") << "\n";
  return os.str();
}

AtomisticGraph audit_graph(const ModelConfig& cfg, int n_atoms, std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0xaad170ull);
  const double grid = 1.0 / 64.0;
  const int span = static_cast<int>(std::floor(0.8 * cfg.cutoff() / grid));
  std::uniform_int_distribution<int> upos(0, span);
  std::uniform_int_distribution<int> uspecies(1, std::min(cfg.species_count - 1, 9));
  for (int attempt = 0; attempt < 4096; ++attempt) {
    Mat pos(n_atoms, 3);
    for (int i = 0; i < n_atoms; ++i)
      pos.row(i) << upos(rng) * grid, upos(rng) * grid, upos(rng) * grid;
    bool ok = true;
    for (int i = 0; i < n_atoms && ok; ++i)
      for (int j = i + 1; j < n_atoms && ok; ++j)
        if ((pos.row(i) - pos.row(j)).norm() < 0.7) ok = false;
    if (!ok) continue;
    std::vector<int> species;
    for (int i = 0; i < n_atoms; ++i) species.push_back(uspecies(rng));
    AtomisticGraph g = radius_graph(species, pos, cfg.cutoff());
    if (g.num_edges() >= 2 * (n_atoms - 1)) return g;
  }
  throw std::runtime_error("audit: failed to sample a connected cluster");
}

AuditReport audit_equivariance(const ModelConfig& cfg, std::uint64_t seed, int rotations) {
  AuditReport report;
  std::mt19937_64 rng(seed ^ 0xe901a2ull);
  const Irreps& irreps = cfg.d_embed;
  const int rows = 7;

  ParameterStore probe_store(seed + 1);
  EquivariantLinear lin(probe_store, "p.lin", irreps, irreps, true);
  EquivariantLayerNorm norm(probe_store, "p.ln", irreps);
  const Irreps gate_in = gate_input_for(irreps);
  TensorProductPlan plan = build_dtp_plan(irreps, cfg.d_sh, cfg.l_max);
  auto kern = compile_dtp(plan);
  std::normal_distribution<double> dist(0.0, 1.0);

  double e_lin = 0, e_ln = 0, e_gate = 0, e_dtp = 0, e_sph = 0;
  for (int t = 0; t < rotations; ++t) {
    const Eigen::Quaterniond q = random_rotation(rng);
    const bool invert = cfg.e3 && (t % 2 == 1);

    const IrrepsFeature x{irreps, random_feature(irreps, rows, rng)};
    const Mat xt = transform_rows(x.data, irreps, q, invert);

    // linear
    {
      const Mat a = run_linear(lin, probe_store, x).data;
      const Mat b = run_linear(lin, probe_store, {irreps, xt}).data;
      e_lin = std::max(e_lin, max_abs(b - transform_rows(a, irreps, q, invert)));
    }
    // layer norm
    {
      const Mat a = run_layer_norm(norm, probe_store, x).data;
      const Mat b = run_layer_norm(norm, probe_store, {irreps, xt}).data;
      e_ln = std::max(e_ln, max_abs(b - transform_rows(a, irreps, q, invert)));
    }
    // gate
    {
      const IrrepsFeature gx{gate_in, random_feature(gate_in, rows, rng)};
      const IrrepsFeature ga = run_gate(gx);
      const IrrepsFeature gb = run_gate({gate_in, transform_rows(gx.data, gate_in, q, invert)});
      e_gate = std::max(e_gate, max_abs(gb.data - transform_rows(ga.data, ga.irreps, q, invert)));
    }
    // depth-wise tensor product and spherical harmonics
    {
      Mat w(rows, plan.weight_count);
      for (long i = 0; i < w.rows(); ++i)
        for (long j = 0; j < w.cols(); ++j) w(i, j) = dist(rng);
      Mat dirs(rows, 3);
      for (int i = 0; i < rows; ++i) {
        Eigen::Vector3d v(dist(rng), dist(rng), dist(rng));
        dirs.row(i) = v.normalized().transpose();
      }
      Tape tape;
      TFeat sh = emit_sph(tape, tape.leaf(dirs, false), cfg.l_max, cfg.e3);
      const Mat shv = tape.val(sh.slot);
      const IrrepsFeature y{sh.irreps, shv};
      const IrrepsFeature a = apply_dtp(plan, x, y, w);

      Mat dirs_t = dirs * q.toRotationMatrix().transpose();
      if (invert) dirs_t = -dirs_t;
      Tape tape2;
      TFeat sh2 = emit_sph(tape2, tape2.leaf(dirs_t, false), cfg.l_max, cfg.e3);
      const Mat shv2 = tape2.val(sh2.slot);
      e_sph = std::max(e_sph, max_abs(shv2 - transform_rows(shv, sh.irreps, q, invert)));

      const IrrepsFeature b = apply_dtp(plan, {irreps, xt}, {sh.irreps, shv2}, w);
      e_dtp = std::max(e_dtp, max_abs(b.data - transform_rows(a.data, a.irreps, q, invert)));
    }
  }
  report.items.push_back({"linear rotation equivariance", e_lin, 1e-10});
  report.items.push_back({"layer norm rotation equivariance", e_ln, 1e-9});
  report.items.push_back({"gate rotation equivariance", e_gate, 1e-9});
  report.items.push_back({"tensor product rotation equivariance", e_dtp, 1e-9});
  report.items.push_back({"spherical harmonic equivariance", e_sph, 1e-10});

  // attention block on a geometry
  {
    EagerAttention attn(cfg, seed + 2);
    const AtomisticGraph g = audit_graph(cfg, 6, seed + 3);
    const Mat x = random_feature(irreps, g.num_nodes(), rng);
    const Mat base = attn.run(x, g);
    double err = 0;
    for (int t = 0; t < std::max(4, rotations / 4); ++t) {
      const Eigen::Quaterniond q = random_rotation(rng);
      const bool invert = cfg.e3 && (t % 2 == 1);
      AtomisticGraph gt = rotated(g, q);
      if (invert) gt = inverted(gt);
      const Mat out = attn.run(transform_rows(x, irreps, q, invert), gt);
      err = std::max(err, max_abs(out - transform_rows(base, irreps, q, invert)));
    }
    report.items.push_back({"attention block equivariance", err, 1e-8});
  }

  // end-to-end model
  {
    EnergyModel model(cfg, seed + 4);
    const AtomisticGraph g = audit_graph(cfg, 8, seed + 5);
    const double e0 = model.energy_normalized(g);
    const Mat f0 = model.forces(g);
    double e_rot = 0, f_rot = 0;
    for (int t = 0; t < rotations; ++t) {
      const Eigen::Quaterniond q = random_rotation(rng);
      const AtomisticGraph gt = rotated(g, q);
      e_rot = std::max(e_rot, std::abs(model.energy_normalized(gt) - e0) /
                                  std::max(std::abs(e0), 1.0));
      const Mat ft = model.forces(gt);
      f_rot = std::max(f_rot, max_abs(ft - f0 * q.toRotationMatrix().transpose()));
    }
    report.items.push_back({"model energy rotation invariance", e_rot, 1e-8});
    report.items.push_back({"model force rotation equivariance", f_rot, 1e-7});

    // exact translation on the dyadic grid
    AtomisticGraph gt = g;
    gt.positions.col(0).array() += 2.0 + 1.0 / 64.0;
    gt.positions.col(1).array() += -1.5;
    gt.positions.col(2).array() += 0.25;
    const double e_tr = std::abs(model.energy_normalized(gt) - e0);
    report.items.push_back({"model energy translation invariance (exact)", e_tr, 0.0});

    // permutation
    {
      std::vector<int> perm(g.num_nodes());
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), rng);
      AtomisticGraph gp;
      gp.species.resize(g.num_nodes());
      gp.positions.resize(g.num_nodes(), 3);
      for (int i = 0; i < g.num_nodes(); ++i) {
        gp.species[perm[i]] = g.species[i];
        gp.positions.row(perm[i]) = g.positions.row(i);
      }
      gp = radius_graph(gp.species, gp.positions, cfg.cutoff());
      const double e_perm = std::abs(model.energy_normalized(gp) - e0) /
                            std::max(std::abs(e0), 1.0);
      const Mat fp = model.forces(gp);
      double f_perm = 0;
      for (int i = 0; i < g.num_nodes(); ++i)
        f_perm = std::max(f_perm, max_abs(fp.row(perm[i]) - f0.row(i)));
      report.items.push_back({"model permutation invariance", std::max(e_perm, f_perm), 1e-10});
    }

    if (cfg.e3) {
      const double e_inv = std::abs(model.energy_normalized(inverted(g)) - e0) /
                           std::max(std::abs(e0), 1.0);
      report.items.push_back({"model energy inversion invariance", e_inv, 1e-8});
    }
  }
  return report;
}

AuditReport audit_gradcheck(const ModelConfig& cfg, std::uint64_t seed,
                            int max_components_per_leaf) {
  EnergyModel model(cfg, seed);
  const AtomisticGraph g = audit_graph(cfg, 5, seed + 1);
  const GraphBatch batch = GraphBatch::pack({&g});

  std::map<std::string, Mat> leaves = model.params().all();
  leaves["positions"] = g.positions;
  auto build = [&](Tape& tape, const LeafMap& slots) -> Slot {
    LeafMap params = slots;
    params.erase("positions");
    EnergyModel::Forward fwd =
        model.emit_at(tape, params, batch, slots.at("positions"), nullptr);
    return fwd.total_energy;
  };
  GradCheckReport r = grad_check(leaves, build, 1e-4, 1e-4, max_components_per_leaf, seed);
  AuditReport report;
  for (const auto& it : r.items) report.items.push_back({"d(energy)/d " + it.leaf, it.max_rel_err, 1e-4});
  return report;
}

std::string audit_paths(const ModelConfig& cfg) {
  EnergyModel model(cfg, 0);
  std::ostringstream os;
  os << "edge-degree embedding plan:\n";
  os << model.edge_degree_plan().describe();
  os << "attention message plan (per block):\n";
  os << model.attention(0).message_plan().describe();
  if (const TensorProductPlan* p2 = model.attention(0).value_plan()) {
    os << "attention value plan (per block):\n";
    os << p2->describe();
  }
  os << "tensor products per attention block: " << model.attention(0).tensor_product_count()
     << "\n";
  return os.str();
}

AuditReport audit_forces(const ModelConfig& cfg, std::uint64_t seed) {
  EnergyModel model(cfg, seed);
  const AtomisticGraph g = audit_graph(cfg, 5, seed + 1);
  const Mat f = model.forces(g);

  double max_rel = 0.0;
  const double h = 1e-4;
  // components far below the force scale are compared against floors set by
  // the finite-difference noise, not by their own magnitude
  const double floor_v = std::max(1e-4 * f.cwiseAbs().maxCoeff(), 1e-8);
  for (int i = 0; i < g.num_nodes(); ++i) {
    for (int c = 0; c < 3; ++c) {
      auto central = [&](double step) {
        AtomisticGraph gp = g, gm = g;
        gp.positions(i, c) += step;
        gm.positions(i, c) -= step;
        return -(model.energy(gp) - model.energy(gm)) / (2 * step);
      };
      auto rel = [&](double a, double b) {
        return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor_v});
      };
      double err = rel(f(i, c), central(h));
      if (err > 1e-4) {
        // leaky-relu kinks along the probe segment wreck the estimate; trust
        // it only when it converges under step refinement
        const double fd2 = central(h / 4.0), fd4 = central(h / 16.0);
        err = rel(fd2, fd4) < 16e-4 ? rel(f(i, c), fd4) : 0.0;
      }
      max_rel = std::max(max_rel, err);
    }
  }
  AuditReport report;
  report.items.push_back({"forces vs central differences (rel)", max_rel, 1e-4});
  report.items.push_back({"net force magnitude", f.colwise().sum().cwiseAbs().maxCoeff(), 1e-8});
  return report;
}

}  // namespace eqt
