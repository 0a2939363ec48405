#include "eqt/ops.hpp"

#include <map>
#include <sstream>
#include <stdexcept>

namespace eqt {

namespace {

std::string kind_str(int l, std::optional<Parity> p) {
  std::string s = std::to_string(l);
  if (p) s += parity_char(*p);
  return s;
}

bool is_scalar_kind(int l, std::optional<Parity> p) {
  return l == 0 && (!p || *p == Parity::Even);
}

// Global channel index -> (block, channel within block).
std::vector<std::pair<int, int>> channel_table(const Irreps& irreps) {
  std::vector<std::pair<int, int>> table;
  table.reserve(irreps.channel_count());
  for (int b = 0; b < irreps.block_count(); ++b)
    for (int c = 0; c < irreps.block(b).mul; ++c) table.emplace_back(b, c);
  return table;
}

}  // namespace

// ---------------------------------------------------------------------------
// Plans

TensorProductPlan build_dtp_plan(const Irreps& in1, const Irreps& in2, int l_max) {
  if (in1.has_parity() != in2.has_parity())
    throw std::invalid_argument("dtp plan: inputs disagree about parity tracking");
  const bool e3 = in1.has_parity();

  TensorProductPlan plan;
  plan.irreps_in1 = in1;
  plan.irreps_in2 = in2;

  std::map<std::pair<int, int>, int> kind_counts;  // (l3, parity rank) -> mul
  for (int b1 = 0; b1 < in1.block_count(); ++b1) {
    const IrrepBlock& blk1 = in1.block(b1);
    for (int c1 = 0; c1 < blk1.mul; ++c1) {
      const int gc1 = [&] {
        int n = 0;
        for (int b = 0; b < b1; ++b) n += in1.block(b).mul;
        return n + c1;
      }();
      for (int b2 = 0; b2 < in2.block_count(); ++b2) {
        const IrrepBlock& blk2 = in2.block(b2);
        for (int c2 = 0; c2 < blk2.mul; ++c2) {
          const int gc2 = [&] {
            int n = 0;
            for (int b = 0; b < b2; ++b) n += in2.block(b).mul;
            return n + c2;
          }();
          for (int l3 = std::abs(blk1.l - blk2.l); l3 <= blk1.l + blk2.l; ++l3) {
            if (l3 > l_max) break;
            DtpPath p;
            p.c1 = gc1;
            p.l1 = blk1.l;
            p.c2 = gc2;
            p.l2 = blk2.l;
            p.l3 = l3;
            if (e3) p.p3 = parity_mul(*blk1.p, *blk2.p);
            p.weight = plan.weight_count++;
            auto key = std::make_pair(l3, p.p3 ? (*p.p3 == Parity::Even ? 1 : 2) : 0);
            p.c3 = kind_counts[key]++;
            plan.paths.push_back(p);
          }
        }
      }
    }
  }

  std::vector<IrrepBlock> out_blocks;
  for (const auto& [key, mul] : kind_counts) {
    IrrepBlock b;
    b.mul = mul;
    b.l = key.first;
    if (key.second) b.p = key.second == 1 ? Parity::Even : Parity::Odd;
    out_blocks.push_back(b);
  }
  plan.irreps_out = Irreps(out_blocks);
  return plan;
}

std::string TensorProductPlan::describe() const {
  std::ostringstream os;
  os << irreps_in1.str() << " (x) " << irreps_in2.str() << " -> " << irreps_out.str() << ", "
     << weight_count << " weighted paths\n";
  for (const auto& p : paths) {
    os << "  w" << p.weight << ": (c" << p.c1 << ", l=" << p.l1 << ") x (c" << p.c2
       << ", l=" << p.l2 << ") -> l=" << p.l3;
    if (p.p3) os << parity_char(*p.p3);
    os << '\n';
  }
  return os.str();
}

std::shared_ptr<const DtpKernel> compile_dtp(const TensorProductPlan& plan) {
  const int l_needed = std::max(
      {plan.irreps_in1.max_degree(), plan.irreps_in2.max_degree(), plan.irreps_out.max_degree(), 1});
  const So3Tables& tables = so3_tables(l_needed);

  auto kernel = std::make_shared<DtpKernel>();
  kernel->dim1 = plan.irreps_in1.dim();
  kernel->dim2 = plan.irreps_in2.dim();
  kernel->dim3 = plan.irreps_out.dim();
  kernel->n_weights = plan.weight_count;

  const auto chan1 = channel_table(plan.irreps_in1);
  const auto chan2 = channel_table(plan.irreps_in2);
  std::map<std::tuple<int, int, int>, std::shared_ptr<const std::vector<CgEntry>>> cg_cache;

  kernel->paths.reserve(plan.paths.size());
  for (const auto& p : plan.paths) {
    DtpKernel::Path kp;
    const auto [b1, c1] = chan1[p.c1];
    const auto [b2, c2] = chan2[p.c2];
    kp.off1 = plan.irreps_in1.offset(b1) + c1 * plan.irreps_in1.block(b1).rep_dim();
    kp.off2 = plan.irreps_in2.offset(b2) + c2 * plan.irreps_in2.block(b2).rep_dim();
    const int b3 = plan.irreps_out.find(p.l3, p.p3);
    kp.off3 = plan.irreps_out.offset(b3) + p.c3 * (2 * p.l3 + 1);
    kp.l1 = p.l1;
    kp.l2 = p.l2;
    kp.l3 = p.l3;
    kp.w = p.weight;
    auto key = std::make_tuple(p.l1, p.l2, p.l3);
    auto it = cg_cache.find(key);
    if (it == cg_cache.end()) {
      const CgTensor& t = tables.cg(p.l1, p.l2, p.l3);
      auto entries = std::make_shared<std::vector<CgEntry>>();
      for (int i1 = 0; i1 < t.d1(); ++i1)
        for (int i2 = 0; i2 < t.d2(); ++i2)
          for (int i3 = 0; i3 < t.d3(); ++i3) {
            const double v = t(i1, i2, i3);
            if (std::abs(v) > 1e-12) entries->push_back({i1, i2, i3, v});
          }
      it = cg_cache.emplace(key, std::move(entries)).first;
    }
    kp.cg = it->second;
    kernel->paths.push_back(std::move(kp));
  }
  return kernel;
}

TFeat emit_dtp(Tape& tape, const TensorProductPlan& plan,
               const std::shared_ptr<const DtpKernel>& kernel, Slot x, Slot y, Slot w) {
  if (tape.val(x).cols() != plan.irreps_in1.dim() || tape.val(y).cols() != plan.irreps_in2.dim())
    throw std::invalid_argument("dtp: feature width does not match plan layout");
  if (tape.val(w).cols() != plan.weight_count)
    throw std::invalid_argument("dtp: weight count does not match plan");
  if (tape.val(w).rows() != 1 && tape.val(w).rows() != tape.val(x).rows())
    throw std::invalid_argument("dtp: weight rows must be 1 or match feature rows");
  return {plan.irreps_out, tape.dtp(DtpMode::Out, kernel, x, y, w)};
}

IrrepsFeature apply_dtp(const TensorProductPlan& plan, const IrrepsFeature& x,
                        const IrrepsFeature& y, const Eigen::MatrixXd& weights) {
  if (!(x.irreps == plan.irreps_in1) || !(y.irreps == plan.irreps_in2))
    throw std::invalid_argument("dtp: operand layouts do not match plan");
  if (x.rows() != y.rows()) throw std::invalid_argument("dtp: operand row counts differ");
  Tape tape;
  Slot xs = tape.leaf(x.data, false);
  Slot ys = tape.leaf(y.data, false);
  Slot ws = tape.leaf(weights, false);
  TFeat out = emit_dtp(tape, plan, compile_dtp(plan), xs, ys, ws);
  return {out.irreps, tape.val(out.slot)};
}

// ---------------------------------------------------------------------------
// Linear

EquivariantLinear::EquivariantLinear(ParameterStore& store, std::string name, Irreps in,
                                     Irreps out, bool bias)
    : name_(std::move(name)), in_(std::move(in)), out_(std::move(out)), bias_(bias) {
  for (int bo = 0; bo < out_.block_count(); ++bo) {
    const IrrepBlock& ob = out_.block(bo);
    const int bi = in_.find(ob.l, ob.p);
    if (bi < 0)
      throw std::invalid_argument("linear '" + name_ + "': no input block of kind " +
                                  kind_str(ob.l, ob.p));
    KindWire wire;
    wire.block_in = bi;
    wire.block_out = bo;
    wire.pname = name_ + ".w" + kind_str(ob.l, ob.p);
    store.uniform_fan_in(wire.pname, in_.block(bi).mul, ob.mul, in_.block(bi).mul);
    wires_.push_back(std::move(wire));
    if (bias_ && is_scalar_kind(ob.l, ob.p)) {
      bias_name_ = name_ + ".b";
      store.zeros(bias_name_, 1, ob.mul);
    }
  }
}

Slot EquivariantLinear::emit(Tape& tape, const LeafMap& leaves, Slot x) const {
  if (tape.val(x).cols() != in_.dim())
    throw std::invalid_argument("linear '" + name_ + "': input width mismatch");
  const int n = static_cast<int>(tape.val(x).rows());
  std::vector<Slot> parts;
  parts.reserve(wires_.size());
  for (const auto& w : wires_) {
    const IrrepBlock& ib = in_.block(w.block_in);
    const IrrepBlock& ob = out_.block(w.block_out);
    Slot xin = tape.slice_cols(x, in_.offset(w.block_in), ib.dim());
    Slot y = tape.rep_matmul(xin, leaves.at(w.pname), ib.rep_dim());
    if (!bias_name_.empty() && is_scalar_kind(ob.l, ob.p))
      y = tape.add(y, tape.row_repeat(leaves.at(bias_name_), n));
    parts.push_back(y);
  }
  return tape.concat_cols(parts);
}

// ---------------------------------------------------------------------------
// Layer norm

EquivariantLayerNorm::EquivariantLayerNorm(ParameterStore& store, std::string name, Irreps irreps)
    : name_(std::move(name)), irreps_(std::move(irreps)) {
  for (int b = 0; b < irreps_.block_count(); ++b) {
    const IrrepBlock& blk = irreps_.block(b);
    gamma_names_.push_back(name_ + ".g" + kind_str(blk.l, blk.p));
    store.ones(gamma_names_.back(), 1, blk.mul);
    if (is_scalar_kind(blk.l, blk.p)) {
      beta_name_ = name_ + ".b";
      store.zeros(beta_name_, 1, blk.mul);
    }
  }
}

Slot EquivariantLayerNorm::emit(Tape& tape, const LeafMap& leaves, Slot x) const {
  if (tape.val(x).cols() != irreps_.dim())
    throw std::invalid_argument("layer norm '" + name_ + "': input width mismatch");
  const int n = static_cast<int>(tape.val(x).rows());
  std::vector<Slot> parts;
  for (int b = 0; b < irreps_.block_count(); ++b) {
    const IrrepBlock& blk = irreps_.block(b);
    Slot xb = tape.slice_cols(x, irreps_.offset(b), blk.dim());
    Slot gamma = leaves.at(gamma_names_[b]);
    if (is_scalar_kind(blk.l, blk.p)) {
      // (x - mean) / max(std, 1e-12) * gamma + beta
      Slot mean = tape.scale(tape.row_sum(xb), 1.0 / blk.mul);
      Slot centered = tape.sub(xb, tape.repeat_cols(mean, blk.mul));
      Slot var = tape.scale(tape.row_sum(tape.mul(centered, centered)), 1.0 / blk.mul);
      Slot sd = tape.sqrt(tape.max_const(var, 1e-24));
      Slot normed = tape.mul_bcast(centered, tape.recip(sd));
      Slot y = tape.mul_row_bcast(normed, gamma);
      parts.push_back(tape.add(y, tape.row_repeat(leaves.at(beta_name_), n)));
    } else {
      // x / max(RMS_c |x_c|, 1e-12) * gamma
      Slot sq = tape.fold_sum(tape.mul(xb, xb), blk.rep_dim());
      Slot msq = tape.scale(tape.row_sum(sq), 1.0 / blk.mul);
      Slot rms = tape.sqrt(tape.max_const(msq, 1e-24));
      Slot normed = tape.mul_bcast(xb, tape.recip(rms));
      parts.push_back(tape.mul_row_bcast(normed, tape.repeat_cols(gamma, blk.rep_dim())));
    }
  }
  return tape.concat_cols(parts);
}

// ---------------------------------------------------------------------------
// Gate

GateInfo gate_info(const Irreps& in) {
  GateInfo info;
  info.in = in;
  int scalar_block = -1, scalar_mul = 0, gated_channels = 0;
  for (int b = 0; b < in.block_count(); ++b) {
    const IrrepBlock& blk = in.block(b);
    if (is_scalar_kind(blk.l, blk.p)) {
      if (scalar_block >= 0) throw std::invalid_argument("gate: duplicate scalar blocks");
      scalar_block = b;
      scalar_mul = blk.mul;
    } else {
      gated_channels += blk.mul;
    }
  }
  if (scalar_block < 0 && gated_channels > 0)
    throw std::invalid_argument("gate: no scalar block to draw gates from");
  info.gate_scalars = gated_channels;
  info.kept_scalars = scalar_mul - gated_channels;
  if (info.kept_scalars < 0)
    throw std::invalid_argument("gate: scalar channel count " + std::to_string(scalar_mul) +
                                " is smaller than the " + std::to_string(gated_channels) +
                                " gated channels");
  std::vector<IrrepBlock> out_blocks;
  for (int b = 0; b < in.block_count(); ++b) {
    const IrrepBlock& blk = in.block(b);
    if (is_scalar_kind(blk.l, blk.p)) {
      if (info.kept_scalars > 0)
        out_blocks.push_back({info.kept_scalars, blk.l, blk.p});
    } else {
      out_blocks.push_back(blk);
    }
  }
  info.out = Irreps(out_blocks);
  return info;
}

Irreps gate_input_for(const Irreps& out) {
  int kept = 0, gated = 0;
  std::optional<Parity> scalar_p = out.has_parity() ? std::optional<Parity>(Parity::Even)
                                                    : std::optional<Parity>();
  std::vector<IrrepBlock> blocks;
  bool scalar_written = false;
  for (const auto& b : out.blocks()) {
    if (is_scalar_kind(b.l, b.p))
      kept += b.mul;
    else
      gated += b.mul;
  }
  for (const auto& b : out.blocks()) {
    if (is_scalar_kind(b.l, b.p)) {
      blocks.push_back({kept + gated, b.l, b.p});
      scalar_written = true;
    } else {
      blocks.push_back(b);
    }
  }
  if (!scalar_written) {
    blocks.insert(blocks.begin(), {gated, 0, scalar_p});
  }
  return Irreps(blocks);
}

TFeat emit_gate(Tape& tape, const Irreps& in, Slot x) {
  if (tape.val(x).cols() != in.dim()) throw std::invalid_argument("gate: input width mismatch");
  const GateInfo info = gate_info(in);
  std::vector<Slot> parts;
  Slot gates = -1;
  int scalar_off = -1;
  for (int b = 0; b < in.block_count(); ++b) {
    const IrrepBlock& blk = in.block(b);
    if (is_scalar_kind(blk.l, blk.p)) {
      scalar_off = in.offset(b);
      if (info.gate_scalars > 0)
        gates = tape.sigmoid(
            tape.slice_cols(x, scalar_off + info.kept_scalars, info.gate_scalars));
      break;
    }
  }
  int gate_used = 0;
  for (int b = 0; b < in.block_count(); ++b) {
    const IrrepBlock& blk = in.block(b);
    if (is_scalar_kind(blk.l, blk.p)) {
      if (info.kept_scalars > 0)
        parts.push_back(tape.silu(tape.slice_cols(x, in.offset(b), info.kept_scalars)));
    } else {
      Slot xb = tape.slice_cols(x, in.offset(b), blk.dim());
      Slot gb = tape.slice_cols(gates, gate_used, blk.mul);
      gate_used += blk.mul;
      parts.push_back(tape.mul(xb, tape.repeat_cols(gb, blk.rep_dim())));
    }
  }
  return {info.out, tape.concat_cols(parts)};
}

// ---------------------------------------------------------------------------
// Spherical harmonics on the tape

TFeat emit_sph(Tape& tape, Slot dirs, int l_max, bool with_parity) {
  if (tape.val(dirs).cols() != 3) throw std::invalid_argument("sph: directions must be rows x 3");
  const So3Tables& tables = so3_tables(std::max(l_max, 1));
  const long n = tape.val(dirs).rows();

  std::vector<Slot> parts;
  parts.push_back(tape.constant(Eigen::MatrixXd::Ones(n, 1)));
  Slot shared_one = tape.constant(Eigen::MatrixXd::Ones(1, 1));
  if (l_max >= 1) {
    Eigen::Matrix3d p = Eigen::Matrix3d::Zero();
    p(0, 1) = p(1, 2) = p(2, 0) = 1.0;
    Slot y1 = tape.matmul(dirs, tape.constant(std::sqrt(3.0) * p.transpose()));
    parts.push_back(y1);
    Slot prev = y1;
    for (int l = 2; l <= l_max; ++l) {
      auto kernel = std::make_shared<DtpKernel>();
      kernel->dim1 = 2 * l - 1;
      kernel->dim2 = 3;
      kernel->dim3 = 2 * l + 1;
      kernel->n_weights = 1;
      DtpKernel::Path path;
      path.l1 = l - 1;
      path.l2 = 1;
      path.l3 = l;
      auto entries = std::make_shared<std::vector<CgEntry>>();
      const Eigen::MatrixXd& m = tables.sh_coupler(l);
      const double s = tables.sh_scale(l);
      for (int i3 = 0; i3 < 2 * l + 1; ++i3)
        for (int i1 = 0; i1 < 2 * l - 1; ++i1)
          for (int i2 = 0; i2 < 3; ++i2) {
            const double v = s * m(i3, i1 * 3 + i2);
            if (std::abs(v) > 1e-14) entries->push_back({i1, i2, i3, v});
          }
      path.cg = std::move(entries);
      kernel->paths.push_back(std::move(path));
      prev = tape.dtp(DtpMode::Out, kernel, prev, y1, shared_one);
      parts.push_back(prev);
    }
  }
  std::vector<IrrepBlock> blocks;
  for (int l = 0; l <= l_max; ++l) {
    IrrepBlock b{1, l, std::nullopt};
    if (with_parity) b.p = sh_parity(l);
    blocks.push_back(b);
  }
  return {Irreps(blocks), tape.concat_cols(parts)};
}

// ---------------------------------------------------------------------------
// Eager wrappers

IrrepsFeature run_linear(const EquivariantLinear& layer, const ParameterStore& store,
                         const IrrepsFeature& x) {
  Tape tape;
  LeafMap leaves = emit_leaves(tape, store, false);
  Slot s = layer.emit(tape, leaves, tape.leaf(x.data, false));
  return {layer.irreps_out(), tape.val(s)};
}

IrrepsFeature run_layer_norm(const EquivariantLayerNorm& layer, const ParameterStore& store,
                             const IrrepsFeature& x) {
  Tape tape;
  LeafMap leaves = emit_leaves(tape, store, false);
  Slot s = layer.emit(tape, leaves, tape.leaf(x.data, false));
  return {layer.irreps(), tape.val(s)};
}

IrrepsFeature run_gate(const IrrepsFeature& x) {
  Tape tape;
  TFeat out = emit_gate(tape, x.irreps, tape.leaf(x.data, false));
  return {out.irreps, tape.val(out.slot)};
}

std::shared_ptr<const std::vector<int>> head_split_perm(const Irreps& irreps, int heads) {
  auto perm = std::make_shared<std::vector<int>>();
  perm->reserve(irreps.dim());
  for (const auto& b : irreps.blocks())
    if (b.mul % heads != 0)
      throw std::invalid_argument("head split: multiplicity " + std::to_string(b.mul) +
                                  " not divisible by " + std::to_string(heads) + " heads");
  for (int h = 0; h < heads; ++h) {
    for (int b = 0; b < irreps.block_count(); ++b) {
      const IrrepBlock& blk = irreps.block(b);
      const int mul_h = blk.mul / heads;
      for (int c = 0; c < mul_h; ++c)
        for (int m = 0; m < blk.rep_dim(); ++m)
          perm->push_back(irreps.offset(b) + (h * mul_h + c) * blk.rep_dim() + m);
    }
  }
  return perm;
}

}  // namespace eqt
