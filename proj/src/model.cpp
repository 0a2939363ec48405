#include "eqt/model.hpp"

#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace eqt {

namespace {

using nlohmann::json;

Irreps sh_irreps_for(int l_max, bool e3) {
  std::vector<IrrepBlock> blocks;
  for (int l = 0; l <= l_max; ++l) {
    IrrepBlock b{1, l, std::nullopt};
    if (e3) b.p = sh_parity(l);
    blocks.push_back(b);
  }
  return Irreps(blocks);
}

int scalar_mul(const Irreps& irreps) {
  return irreps.multiplicity(0, irreps.has_parity() ? std::optional<Parity>(Parity::Even)
                                                    : std::nullopt);
}

}  // namespace

void ModelConfig::validate() const {
  if (blocks < 1) throw std::invalid_argument("config: need at least one block");
  if (d_embed.has_parity() != e3 || d_head.has_parity() != e3 || d_ffn.has_parity() != e3 ||
      d_feature.has_parity() != e3 || d_sh.has_parity() != e3)
    throw std::invalid_argument("config: parity tagging must match the symmetry mode");
  if (!(d_embed.is_canonical() && d_head.is_canonical() && d_ffn.is_canonical() &&
        d_feature.is_canonical()))
    throw std::invalid_argument("config: irreps must be in canonical (sorted, merged) form");
  if (!(sh_irreps_for(l_max, e3) == d_sh))
    throw std::invalid_argument("config: d_sh must hold one vector per degree 0..l_max");
  if (d_embed.max_degree() > l_max)
    throw std::invalid_argument("config: d_embed degree exceeds l_max");
  if (scalar_mul(d_embed) == 0) throw std::invalid_argument("config: d_embed needs scalars");
  if (scalar_mul(d_feature) == 0) throw std::invalid_argument("config: d_feature needs scalars");
  for (const auto& b : d_head.blocks()) {
    const int full = d_embed.multiplicity(b.l, b.p);
    if (heads * b.mul > 0 && full == 0)
      throw std::invalid_argument("config: head block kind missing from d_embed");
  }
  if (radial.count < 2) throw std::invalid_argument("config: radial basis too small");
  if (!(radial.cutoff > 0)) throw std::invalid_argument("config: cutoff must be positive");
  if (!(avg_degree > 0) || !(avg_atom_count > 0))
    throw std::invalid_argument("config: average degree and atom count must be positive");
  if (species_count < 1) throw std::invalid_argument("config: species count must be positive");
  if (!(energy_std > 0)) throw std::invalid_argument("config: energy std must be positive");
}

std::string ModelConfig::to_json() const {
  json j;
  j["blocks"] = blocks;
  j["d_embed"] = d_embed.str();
  j["d_sh"] = d_sh.str();
  j["d_head"] = d_head.str();
  j["d_ffn"] = d_ffn.str();
  j["d_feature"] = d_feature.str();
  j["heads"] = heads;
  j["l_max"] = l_max;
  j["mode"] = e3 ? "e3" : "se3";
  j["attn_kind"] = to_string(attn_kind);
  j["message_kind"] = to_string(message_kind);
  j["radial_kind"] = to_string(radial.kind);
  j["radial_count"] = radial.count;
  j["cutoff"] = radial.cutoff;
  j["avg_degree"] = avg_degree;
  j["avg_atom_count"] = avg_atom_count;
  j["species_count"] = species_count;
  j["leaky_slope"] = leaky_slope;
  j["attn_dropout"] = attn_dropout;
  j["energy_mean"] = energy_mean;
  j["energy_std"] = energy_std;
  return j.dump(2);
}

ModelConfig ModelConfig::from_json(const std::string& text) {
  json j = json::parse(text);
  ModelConfig c;
  if (j.contains("preset")) c = model_preset(j.at("preset").get<std::string>());
  auto set_irreps = [&](const char* key, Irreps& out) {
    if (j.contains(key)) out = Irreps::parse(j.at(key).get<std::string>());
  };
  if (j.contains("blocks")) c.blocks = j.at("blocks").get<int>();
  set_irreps("d_embed", c.d_embed);
  set_irreps("d_sh", c.d_sh);
  set_irreps("d_head", c.d_head);
  set_irreps("d_ffn", c.d_ffn);
  set_irreps("d_feature", c.d_feature);
  if (j.contains("heads")) c.heads = j.at("heads").get<int>();
  if (j.contains("l_max")) c.l_max = j.at("l_max").get<int>();
  if (j.contains("mode")) c.e3 = j.at("mode").get<std::string>() == "e3";
  if (j.contains("attn_kind")) c.attn_kind = attn_kind_from_string(j.at("attn_kind"));
  if (j.contains("message_kind")) c.message_kind = message_kind_from_string(j.at("message_kind"));
  if (j.contains("radial_kind")) c.radial.kind = radial_kind_from_string(j.at("radial_kind"));
  if (j.contains("radial_count")) c.radial.count = j.at("radial_count").get<int>();
  if (j.contains("cutoff")) c.radial.cutoff = j.at("cutoff").get<double>();
  if (j.contains("avg_degree")) c.avg_degree = j.at("avg_degree").get<double>();
  if (j.contains("avg_atom_count")) c.avg_atom_count = j.at("avg_atom_count").get<double>();
  if (j.contains("species_count")) c.species_count = j.at("species_count").get<int>();
  if (j.contains("leaky_slope")) c.leaky_slope = j.at("leaky_slope").get<double>();
  if (j.contains("attn_dropout")) c.attn_dropout = j.at("attn_dropout").get<double>();
  if (j.contains("energy_mean")) c.energy_mean = j.at("energy_mean").get<double>();
  if (j.contains("energy_std")) c.energy_std = j.at("energy_std").get<double>();
  return c;
}

ModelConfig model_preset(const std::string& name) {
  ModelConfig c;
  auto se3 = [&](const char* embed, const char* head, const char* ffn, const char* feature) {
    c.d_embed = Irreps::parse(embed);
    c.d_head = Irreps::parse(head);
    c.d_ffn = Irreps::parse(ffn);
    c.d_feature = Irreps::parse(feature);
    c.e3 = false;
  };
  if (name == "qm9") {
    c.blocks = 6;
    c.heads = 4;
    c.l_max = 2;
    se3("[(128,0),(64,1),(32,2)]", "[(32,0),(16,1),(8,2)]", "[(384,0),(192,1),(96,2)]",
        "[(512,0)]");
    c.radial = {RadialBasisKind::Gaussian, 128, 5.0};
  } else if (name == "qm9_e3") {
    c.blocks = 6;
    c.heads = 4;
    c.l_max = 2;
    c.e3 = true;
    c.d_embed = Irreps::parse("[(128,0,e),(32,0,o),(32,1,e),(32,1,o),(16,2,e),(16,2,o)]");
    c.d_head = Irreps::parse("[(32,0,e),(8,0,o),(8,1,e),(8,1,o),(4,2,e),(4,2,o)]");
    c.d_ffn = Irreps::parse("[(384,0,e),(96,0,o),(96,1,e),(96,1,o),(48,2,e),(48,2,o)]");
    c.d_feature = Irreps::parse("[(512,0,e)]");
    c.radial = {RadialBasisKind::Gaussian, 128, 5.0};
  } else if (name == "md17") {
    c.blocks = 6;
    c.heads = 4;
    c.l_max = 2;
    se3("[(128,0),(64,1),(32,2)]", "[(32,0),(16,1),(8,2)]", "[(384,0),(192,1),(96,2)]",
        "[(512,0)]");
    c.radial = {RadialBasisKind::Gaussian, 32, 5.0};
  } else if (name == "md17_l3") {
    c.blocks = 6;
    c.heads = 4;
    c.l_max = 3;
    se3("[(128,0),(64,1),(64,2),(32,3)]", "[(32,0),(16,1),(16,2),(8,3)]",
        "[(384,0),(192,1),(192,2),(96,3)]", "[(512,0)]");
    c.radial = {RadialBasisKind::Gaussian, 32, 5.0};
  } else if (name == "oc20") {
    c.blocks = 6;
    c.heads = 8;
    c.l_max = 1;
    se3("[(256,0),(128,1)]", "[(32,0),(16,1)]", "[(768,0),(384,1)]", "[(512,0)]");
    c.radial = {RadialBasisKind::Gaussian, 128, 5.0};
    c.attn_dropout = 0.2;
    c.species_count = 84;
  } else if (name == "oc20_e3") {
    c.blocks = 6;
    c.heads = 8;
    c.l_max = 1;
    c.e3 = true;
    c.d_embed = Irreps::parse("[(256,0,e),(64,0,o),(64,1,e),(64,1,o)]");
    c.d_head = Irreps::parse("[(32,0,e),(8,0,o),(8,1,e),(8,1,o)]");
    c.d_ffn = Irreps::parse("[(768,0,e),(192,0,o),(192,1,e),(192,1,o)]");
    c.d_feature = Irreps::parse("[(512,0,e)]");
    c.radial = {RadialBasisKind::Gaussian, 128, 5.0};
    c.attn_dropout = 0.2;
    c.species_count = 84;
  } else if (name == "toy") {
    c.blocks = 2;
    c.heads = 2;
    c.l_max = 1;
    se3("[(32,0),(16,1)]", "[(16,0),(8,1)]", "[(64,0),(32,1)]", "[(64,0)]");
    c.radial = {RadialBasisKind::Gaussian, 16, 6.0};
  } else if (name == "toy_e3") {
    c.blocks = 2;
    c.heads = 2;
    c.l_max = 1;
    c.e3 = true;
    c.d_embed = Irreps::parse("[(32,0,e),(8,0,o),(8,1,e),(8,1,o)]");
    c.d_head = Irreps::parse("[(16,0,e),(4,0,o),(4,1,e),(4,1,o)]");
    c.d_ffn = Irreps::parse("[(64,0,e),(16,0,o),(16,1,e),(16,1,o)]");
    c.d_feature = Irreps::parse("[(64,0,e)]");
    c.radial = {RadialBasisKind::Gaussian, 16, 6.0};
  } else if (name == "micro") {
    c.blocks = 2;
    c.heads = 2;
    c.l_max = 1;
    se3("[(8,0),(4,1)]", "[(4,0),(2,1)]", "[(8,0),(4,1)]", "[(8,0)]");
    c.radial = {RadialBasisKind::Gaussian, 8, 6.0};
  } else {
    throw std::invalid_argument("unknown model preset '" + name + "'");
  }
  c.d_sh = sh_irreps_for(c.l_max, c.e3);
  c.validate();
  return c;
}

std::vector<std::string> model_preset_names() {
  return {"qm9", "qm9_e3", "md17", "md17_l3", "oc20", "oc20_e3", "toy", "toy_e3", "micro"};
}

GraphBatch GraphBatch::pack(const std::vector<const AtomisticGraph*>& graphs) {
  GraphBatch b;
  b.edge_dst = std::make_shared<std::vector<int>>();
  b.edge_src = std::make_shared<std::vector<int>>();
  b.num_graphs = static_cast<int>(graphs.size());
  int total_nodes = 0;
  for (const auto* g : graphs) total_nodes += g->num_nodes();
  b.positions.resize(total_nodes, 3);
  int off = 0;
  for (int gi = 0; gi < b.num_graphs; ++gi) {
    const AtomisticGraph& g = *graphs[gi];
    for (int i = 0; i < g.num_nodes(); ++i) {
      b.species.push_back(g.species[i]);
      b.graph_of_node.push_back(gi);
      b.positions.row(off + i) = g.positions.row(i);
    }
    for (int e = 0; e < g.num_edges(); ++e) {
      b.edge_dst->push_back(off + g.edge_dst[e]);
      b.edge_src->push_back(off + g.edge_src[e]);
    }
    off += g.num_nodes();
  }
  return b;
}

EnergyModel::Ffn EnergyModel::make_ffn(const std::string& name, const Irreps& in,
                                       const Irreps& hidden, const Irreps& out) {
  Ffn f;
  f.hidden_in = gate_input_for(hidden);
  f.lin1 = EquivariantLinear(store_, name + ".l1", in, f.hidden_in, true);
  f.lin2 = EquivariantLinear(store_, name + ".l2", hidden, out, true);
  return f;
}

Slot EnergyModel::emit_ffn(Tape& tape, const LeafMap& leaves, const Ffn& f, Slot x) const {
  Slot h = f.lin1.emit(tape, leaves, x);
  TFeat gated = emit_gate(tape, f.hidden_in, h);
  return f.lin2.emit(tape, leaves, gated.slot);
}

EnergyModel::EnergyModel(ModelConfig cfg, std::uint64_t seed)
    : cfg_(std::move(cfg)), seed_(seed), store_(seed) {
  cfg_.validate();
  const Irreps& embed = cfg_.d_embed;
  const Irreps sh = cfg_.d_sh;
  const std::optional<Parity> sp = cfg_.e3 ? std::optional<Parity>(Parity::Even) : std::nullopt;
  const int c0 = scalar_mul(embed);

  embed_name_ = "atom_embed";
  store_.uniform_fan_in(embed_name_, cfg_.species_count, c0, 1);

  const Irreps deg_in({{c0, 0, sp}});
  deg_lin_in_ = EquivariantLinear(store_, "deg.in", Irreps({{1, 0, sp}}), deg_in, true);
  deg_plan_ = build_dtp_plan(deg_in, sh, cfg_.l_max);
  deg_kern_ = compile_dtp(deg_plan_);
  deg_radial_ = RadialMlp(store_, "deg.rad", cfg_.radial.count, 64, deg_plan_.weight_count);
  // scalar-seeded products reach only a subset of the embedding kinds (in
  // E(3) mode); the remaining blocks stay zero
  {
    std::vector<IrrepBlock> avail;
    for (const auto& b : embed.blocks())
      if (deg_plan_.irreps_out.find(b.l, b.p) >= 0) avail.push_back(b);
    deg_out_ = Irreps(avail);
  }
  deg_lin_out_ = EquivariantLinear(store_, "deg.out", deg_plan_.irreps_out, deg_out_, true);

  AttentionConfig acfg;
  acfg.heads = cfg_.heads;
  acfg.d_head = cfg_.d_head;
  acfg.attn_kind = cfg_.attn_kind;
  acfg.message_kind = cfg_.message_kind;
  acfg.leaky_slope = cfg_.leaky_slope;
  acfg.attn_dropout = cfg_.attn_dropout;

  for (int b = 0; b < cfg_.blocks; ++b) {
    const std::string base = "block" + std::to_string(b);
    ln_attn_.emplace_back(store_, base + ".ln1", embed);
    attn_.emplace_back(store_, base + ".attn", embed, sh, cfg_.radial.count, acfg);
    ln_ffn_.emplace_back(store_, base + ".ln2", embed);
    const Irreps out = (b + 1 == cfg_.blocks) ? cfg_.d_feature : embed;
    ffn_.push_back(make_ffn(base + ".ffn", embed, cfg_.d_ffn, out));
  }
  if (!(cfg_.d_feature == embed))
    residual_proj_ = EquivariantLinear(store_, "res_proj", embed, cfg_.d_feature, true);

  ln_head_ = EquivariantLayerNorm(store_, "head.ln", cfg_.d_feature);
  head_ = make_ffn("head.ffn", cfg_.d_feature, cfg_.d_feature, Irreps({{1, 0, sp}}));
}

EnergyModel::Forward EnergyModel::emit(Tape& tape, const LeafMap& leaves, const GraphBatch& batch,
                                       const std::vector<Eigen::MatrixXd>* dropout,
                                       bool positions_require_grad) const {
  return emit_at(tape, leaves, batch, tape.leaf(batch.positions, positions_require_grad), dropout);
}

EnergyModel::Forward EnergyModel::emit_at(Tape& tape, const LeafMap& leaves,
                                          const GraphBatch& batch, Slot positions,
                                          const std::vector<Eigen::MatrixXd>* dropout) const {
  const int n_nodes = batch.num_nodes();
  const int n_edges = static_cast<int>(batch.edge_dst->size());
  if (tape.val(positions).rows() != n_nodes || tape.val(positions).cols() != 3)
    throw std::invalid_argument("model: positions slot must be nodes x 3");
  for (int sp : batch.species)
    if (sp < 0 || sp >= cfg_.species_count)
      throw std::invalid_argument("model: species code " + std::to_string(sp) +
                                  " outside the configured table");

  if (dropout && static_cast<int>(dropout->size()) != cfg_.blocks)
    throw std::invalid_argument("model: need one dropout mask per block");

  Forward fwd;
  fwd.positions = positions;

  // Edge geometry from positions: r_ij = r_j - r_i, its length and direction.
  Slot rel = tape.sub(tape.gather_rows(fwd.positions, batch.edge_src),
                      tape.gather_rows(fwd.positions, batch.edge_dst));
  Slot len = tape.sqrt(tape.row_sum(tape.mul(rel, rel)));
  Slot dirs = tape.mul_bcast(rel, tape.recip(len));

  EdgeContext edges;
  edges.sh = emit_sph(tape, dirs, cfg_.l_max, cfg_.e3);
  edges.rbf = emit_radial_basis(tape, len, cfg_.radial);
  edges.dst = batch.edge_dst;
  edges.src = batch.edge_src;
  edges.num_nodes = n_nodes;

  // Atom embedding: one-hot species row lookup into the scalar block.
  auto species_idx = std::make_shared<std::vector<int>>(batch.species.begin(), batch.species.end());
  Slot scal = tape.gather_rows(leaves.at(embed_name_), species_idx);
  const std::optional<Parity> sp = cfg_.e3 ? std::optional<Parity>(Parity::Even) : std::nullopt;
  const int scalar_block = cfg_.d_embed.find(0, sp);
  Slot x = tape.pad_cols(scal, cfg_.d_embed.offset(scalar_block), cfg_.d_embed.dim());

  // Edge-degree embedding: constant scalar -> linear -> weighted tensor
  // product with SH -> linear -> neighbor sum, scaled by 1/sqrt(avg degree).
  {
    Slot one = tape.constant(Eigen::MatrixXd::Ones(n_edges, 1));
    Slot a = deg_lin_in_.emit(tape, leaves, one);
    Slot w = deg_radial_.emit(tape, leaves, edges.rbf);
    TFeat mixed = emit_dtp(tape, deg_plan_, deg_kern_, a, edges.sh.slot, w);
    Slot per_edge = deg_lin_out_.emit(tape, leaves, mixed.slot);
    if (!(deg_out_ == cfg_.d_embed)) {
      std::vector<Slot> parts;
      for (const auto& b : cfg_.d_embed.blocks()) {
        const int src_block = deg_out_.find(b.l, b.p);
        if (src_block >= 0)
          parts.push_back(tape.slice_cols(per_edge, deg_out_.offset(src_block), b.dim()));
        else
          parts.push_back(tape.constant(Eigen::MatrixXd::Zero(n_edges, b.dim())));
      }
      per_edge = tape.concat_cols(parts);
    }
    Slot agg = tape.scatter_rows(per_edge, batch.edge_dst, n_nodes);
    x = tape.add(x, tape.scale(agg, 1.0 / std::sqrt(cfg_.avg_degree)));
  }

  // Pre-norm transformer blocks with additive skips.
  for (int b = 0; b < cfg_.blocks; ++b) {
    const Eigen::MatrixXd* mask = dropout ? &(*dropout)[b] : nullptr;
    Slot a = attn_[b].emit(tape, leaves, ln_attn_[b].emit(tape, leaves, x), edges, mask);
    x = tape.add(x, a);
    Slot f = emit_ffn(tape, leaves, ffn_[b], ln_ffn_[b].emit(tape, leaves, x));
    Slot res = x;
    if (b + 1 == cfg_.blocks && !(cfg_.d_feature == cfg_.d_embed))
      res = residual_proj_.emit(tape, leaves, x);
    x = tape.add(res, f);
  }

  // Head: layer norm, feed-forward to one scalar per node, per-graph sum.
  Slot scalars = emit_ffn(tape, leaves, head_, ln_head_.emit(tape, leaves, x));
  auto graph_idx = std::make_shared<std::vector<int>>(batch.graph_of_node);
  Slot per_graph = tape.scatter_rows(scalars, graph_idx, batch.num_graphs);
  fwd.graph_energy = tape.scale(per_graph, 1.0 / std::sqrt(cfg_.avg_atom_count));
  fwd.total_energy = tape.sum_all(fwd.graph_energy);
  return fwd;
}

double EnergyModel::energy_normalized(const AtomisticGraph& g) const {
  Tape tape;
  LeafMap leaves = emit_leaves(tape, store_, false);
  Forward fwd = emit(tape, leaves, GraphBatch::pack({&g}), nullptr, false);
  return tape.val(fwd.graph_energy)(0, 0);
}

double EnergyModel::energy(const AtomisticGraph& g) const {
  return cfg_.energy_mean + cfg_.energy_std * energy_normalized(g);
}

Eigen::MatrixXd EnergyModel::forces(const AtomisticGraph& g) const {
  return energy_and_forces(g).second;
}

std::pair<double, Eigen::MatrixXd> EnergyModel::energy_and_forces(const AtomisticGraph& g) const {
  Tape tape;
  LeafMap leaves = emit_leaves(tape, store_, false);
  Forward fwd = emit(tape, leaves, GraphBatch::pack({&g}), nullptr, true);
  std::vector<Slot> grads = tape.backward(fwd.total_energy, {fwd.positions});
  const double e = cfg_.energy_mean + cfg_.energy_std * tape.val(fwd.graph_energy)(0, 0);
  return {e, -cfg_.energy_std * tape.val(grads[0])};
}

void EnergyModel::save(const std::string& path) const {
  json j;
  j["format"] = "eqt-params-v1";
  j["seed"] = seed_;
  j["config"] = json::parse(cfg_.to_json());
  json arrays = json::object();
  for (const auto& [name, m] : store_.all()) {
    json a;
    a["rows"] = m.rows();
    a["cols"] = m.cols();
    std::vector<double> flat(m.size());
    for (long i = 0; i < m.rows(); ++i)
      for (long k = 0; k < m.cols(); ++k) flat[i * m.cols() + k] = m(i, k);
    a["data"] = flat;
    arrays[name] = std::move(a);
  }
  j["arrays"] = std::move(arrays);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << j.dump();
}

EnergyModel EnergyModel::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read '" + path + "'");
  json j = json::parse(in);
  if (j.at("format").get<std::string>() != "eqt-params-v1")
    throw std::runtime_error("unrecognized parameter file format");
  ModelConfig cfg = ModelConfig::from_json(j.at("config").dump());
  EnergyModel model(cfg, j.at("seed").get<std::uint64_t>());
  for (auto& [name, a] : j.at("arrays").items()) {
    Eigen::MatrixXd& m = model.store_.at(name);
    const long rows = a.at("rows").get<long>(), cols = a.at("cols").get<long>();
    if (m.rows() != rows || m.cols() != cols)
      throw std::runtime_error("parameter '" + name + "' shape mismatch in file");
    const auto flat = a.at("data").get<std::vector<double>>();
    for (long i = 0; i < rows; ++i)
      for (long k = 0; k < cols; ++k) m(i, k) = flat[i * cols + k];
  }
  return model;
}

}  // namespace eqt
