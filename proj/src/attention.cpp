#include "eqt/attention.hpp"

#include <cmath>
#include <stdexcept>

namespace eqt {

namespace {

Irreps scale_muls(const Irreps& irreps, int factor) {
  std::vector<IrrepBlock> blocks = irreps.blocks();
  for (auto& b : blocks) b.mul *= factor;
  return Irreps(blocks);
}

// Channel-wise union of two canonical layouts; per kind, the first channels
// belong to `a`.
Irreps merge_channelwise(const Irreps& a, const Irreps& b) {
  std::vector<IrrepBlock> blocks;
  for (const auto& blk : a.blocks()) blocks.push_back(blk);
  for (const auto& blk : b.blocks()) blocks.push_back(blk);
  return Irreps(blocks).canonical();
}

// Slices the `a` (first = true) or `b` part back out of a merged feature.
Slot split_part(Tape& tape, const Irreps& merged, const Irreps& a, const Irreps& b, Slot x,
                bool first) {
  const Irreps& want = first ? a : b;
  std::vector<Slot> parts;
  for (const auto& blk : want.blocks()) {
    const int bm = merged.find(blk.l, blk.p);
    const int a_mul = a.multiplicity(blk.l, blk.p);
    const int skip = first ? 0 : a_mul * blk.rep_dim();
    parts.push_back(tape.slice_cols(x, merged.offset(bm) + skip, blk.dim()));
  }
  return tape.concat_cols(parts);
}

}  // namespace

AttnKind attn_kind_from_string(const std::string& s) {
  if (s == "mlp") return AttnKind::Mlp;
  if (s == "dot") return AttnKind::Dot;
  throw std::invalid_argument("unknown attention kind '" + s + "'");
}

MessageKind message_kind_from_string(const std::string& s) {
  if (s == "linear") return MessageKind::Linear;
  if (s == "nonlinear") return MessageKind::NonLinear;
  throw std::invalid_argument("unknown message kind '" + s + "'");
}

std::string to_string(AttnKind k) { return k == AttnKind::Mlp ? "mlp" : "dot"; }
std::string to_string(MessageKind k) { return k == MessageKind::Linear ? "linear" : "nonlinear"; }

void AttentionConfig::validate() const {
  if (heads < 1) throw std::invalid_argument("attention: need at least one head");
  if (d_head.block_count() == 0) throw std::invalid_argument("attention: empty head layout");
  if (!(leaky_slope > 0.0 && leaky_slope < 1.0))
    throw std::invalid_argument("attention: leaky slope must lie in (0,1)");
  if (!(attn_dropout >= 0.0 && attn_dropout < 1.0))
    throw std::invalid_argument("attention: dropout must lie in [0,1)");
}

AttentionLayer::AttentionLayer(ParameterStore& store, std::string name, Irreps node_irreps,
                               Irreps sh_irreps, int rbf_dim, AttentionConfig cfg)
    : name_(std::move(name)), node_(std::move(node_irreps)), sh_(std::move(sh_irreps)),
      cfg_(std::move(cfg)) {
  cfg_.validate();
  heads_irreps_ = scale_muls(cfg_.d_head, cfg_.heads).canonical();
  const int l_max = node_.max_degree();

  const std::optional<Parity> scalar_p =
      node_.has_parity() ? std::optional<Parity>(Parity::Even) : std::nullopt;
  mul_alpha_ = heads_irreps_.multiplicity(0, scalar_p);
  if (mul_alpha_ == 0 || mul_alpha_ % cfg_.heads != 0)
    throw std::invalid_argument("attention: head layout needs scalar channels divisible by heads");

  lin_dst_ = EquivariantLinear(store, name_ + ".dst", node_, node_, true);
  lin_src_ = EquivariantLinear(store, name_ + ".src", node_, node_, false);

  plan1_ = build_dtp_plan(node_, sh_, l_max);
  kern1_ = compile_dtp(plan1_);
  radial_ = RadialMlp(store, name_ + ".rad", rbf_dim, 64, plan1_.weight_count);

  msg_part_ = cfg_.message_kind == MessageKind::NonLinear ? gate_input_for(heads_irreps_)
                                                          : heads_irreps_;
  attn_part_ = cfg_.attn_kind == AttnKind::Mlp ? Irreps({{mul_alpha_, 0, scalar_p}})
                                               : heads_irreps_;
  f_irreps_ = merge_channelwise(attn_part_, msg_part_);
  lin_f_ = EquivariantLinear(store, name_ + ".f", plan1_.irreps_out, f_irreps_, true);

  if (cfg_.attn_kind == AttnKind::Dot) {
    lin_q_ = EquivariantLinear(store, name_ + ".q", node_, heads_irreps_, false);
  } else {
    alpha_name_ = name_ + ".a";
    store.uniform_fan_in(alpha_name_, mul_alpha_ / cfg_.heads, cfg_.heads,
                         mul_alpha_ / cfg_.heads);
  }

  if (cfg_.message_kind == MessageKind::NonLinear) {
    plan2_ = build_dtp_plan(heads_irreps_, sh_, l_max);
    kern2_ = compile_dtp(plan2_);
    // one path per output channel: unit variance per the depth-wise counting
    w2_name_ = name_ + ".w2";
    store.normal(w2_name_, 1, plan2_.weight_count, 1.0);
    lin_v_ = EquivariantLinear(store, name_ + ".v", plan2_.irreps_out, heads_irreps_, true);
  }

  lin_out_ = EquivariantLinear(store, name_ + ".out", heads_irreps_, node_, true);
}

Slot AttentionLayer::emit(Tape& tape, const LeafMap& leaves, Slot x, const EdgeContext& edges,
                          const Eigen::MatrixXd* dropout_mask, Slot* attn_out) const {
  const int n_nodes = edges.num_nodes;
  const int n_edges = edges.num_edges();
  if (tape.val(x).rows() != n_nodes)
    throw std::invalid_argument("attention: node feature row count mismatch");

  // x_ij = Linear_dst(x_i) + Linear_src(x_j), evaluated per node then
  // gathered to edges.
  Slot xd = tape.gather_rows(lin_dst_.emit(tape, leaves, x), edges.dst);
  Slot xs = tape.gather_rows(lin_src_.emit(tape, leaves, x), edges.src);
  Slot xij = tape.add(xd, xs);

  // x'_ij = x_ij (x)_{w(|r|)} SH(r_ij); f_ij = Linear(x'_ij)
  Slot w1 = radial_.emit(tape, leaves, edges.rbf);
  TFeat xprime = emit_dtp(tape, plan1_, kern1_, xij, edges.sh.slot, w1);
  Slot f = lin_f_.emit(tape, leaves, xprime.slot);

  Slot attn_feat = split_part(tape, f_irreps_, attn_part_, msg_part_, f, true);
  Slot msg_feat = split_part(tape, f_irreps_, attn_part_, msg_part_, f, false);

  // Per-head attention logits, edges x heads.
  Slot z = -1;
  if (cfg_.attn_kind == AttnKind::Mlp) {
    const int mah = mul_alpha_ / cfg_.heads;
    Slot act = tape.leaky_relu(attn_feat, cfg_.leaky_slope);
    std::vector<Slot> zs;
    for (int h = 0; h < cfg_.heads; ++h) {
      Slot head = tape.slice_cols(act, h * mah, mah);
      Slot a_h = tape.slice_cols(leaves.at(alpha_name_), h, 1);
      zs.push_back(tape.matmul(head, a_h));
    }
    z = tape.concat_cols(zs);
  } else {
    const auto perm = head_split_perm(heads_irreps_, cfg_.heads);
    Slot q = tape.permute_cols(
        tape.gather_rows(lin_q_.emit(tape, leaves, x), edges.dst), perm);
    Slot k = tape.permute_cols(attn_feat, perm);
    const int dh = cfg_.d_head.dim();
    std::vector<Slot> zs;
    for (int h = 0; h < cfg_.heads; ++h) {
      Slot qh = tape.slice_cols(q, h * dh, dh);
      Slot kh = tape.slice_cols(k, h * dh, dh);
      zs.push_back(tape.scale(tape.row_sum(tape.mul(qh, kh)), 1.0 / std::sqrt(double(dh))));
    }
    z = tape.concat_cols(zs);
  }

  // Softmax over the neighbors of each destination node, per head, with a
  // detached per-segment max for overflow safety.
  Eigen::MatrixXd seg_max = Eigen::MatrixXd::Zero(n_nodes, cfg_.heads);
  {
    const Eigen::MatrixXd& zv = tape.val(z);
    Eigen::MatrixXd lowest =
        Eigen::MatrixXd::Constant(n_nodes, cfg_.heads, -std::numeric_limits<double>::infinity());
    for (int e = 0; e < n_edges; ++e)
      for (int h = 0; h < cfg_.heads; ++h)
        lowest((*edges.dst)[e], h) = std::max(lowest((*edges.dst)[e], h), zv(e, h));
    for (int i = 0; i < n_nodes; ++i)
      for (int h = 0; h < cfg_.heads; ++h)
        seg_max(i, h) = std::isfinite(lowest(i, h)) ? lowest(i, h) : 0.0;
  }
  Slot ez = tape.exp(tape.sub(z, tape.gather_rows(tape.constant(seg_max), edges.dst)));
  Slot sums = tape.scatter_rows(ez, edges.dst, n_nodes);
  // max-shifted exponentials make every occupied segment sum >= 1, so the
  // epsilon only guards empty segments and cancels exactly elsewhere
  Slot attn = tape.mul(ez, tape.gather_rows(tape.recip(tape.add_const(sums, 1e-30)), edges.dst));
  if (attn_out) *attn_out = attn;
  if (dropout_mask != nullptr) {
    if (dropout_mask->rows() != n_edges || dropout_mask->cols() != cfg_.heads)
      throw std::invalid_argument("attention: dropout mask shape mismatch");
    attn = tape.mul(attn, tape.constant(*dropout_mask));
  }

  // Values: linear messages use f directly; non-linear messages gate f and
  // mix through a second, input-independent tensor product.
  Slot v = msg_feat;
  if (cfg_.message_kind == MessageKind::NonLinear) {
    TFeat mu = emit_gate(tape, msg_part_, msg_feat);
    TFeat mixed = emit_dtp(tape, plan2_, kern2_, mu.slot, edges.sh.slot, leaves.at(w2_name_));
    v = lin_v_.emit(tape, leaves, mixed.slot);
  }

  // Weighted neighbor sum per head, then heads merged back to block layout.
  const auto perm = head_split_perm(heads_irreps_, cfg_.heads);
  Slot v_heads = tape.permute_cols(v, perm);
  const int dh = cfg_.d_head.dim();
  std::vector<Slot> weighted;
  for (int h = 0; h < cfg_.heads; ++h) {
    Slot vh = tape.slice_cols(v_heads, h * dh, dh);
    Slot ah = tape.slice_cols(attn, h, 1);
    weighted.push_back(tape.mul_bcast(vh, ah));
  }
  Slot msg = tape.scatter_rows(tape.concat_cols(weighted), edges.dst, n_nodes);
  auto inv = std::make_shared<std::vector<int>>(perm->size());
  for (std::size_t i = 0; i < perm->size(); ++i) (*inv)[(*perm)[i]] = static_cast<int>(i);
  Slot merged = tape.permute_cols(msg, inv);

  return lin_out_.emit(tape, leaves, merged);
}

Eigen::MatrixXd draw_dropout_mask(int rows, int cols, double p, std::mt19937_64& rng) {
  Eigen::MatrixXd mask = Eigen::MatrixXd::Constant(rows, cols, 1.0);
  if (p <= 0.0) return mask;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double keep = 1.0 / (1.0 - p);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) mask(i, j) = u(rng) < p ? 0.0 : keep;
  return mask;
}

}  // namespace eqt
