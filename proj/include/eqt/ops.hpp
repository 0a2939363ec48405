#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "eqt/irreps.hpp"
#include "eqt/params.hpp"
#include "eqt/tape.hpp"

namespace eqt {

/// A feature living on the tape: layout descriptor plus value slot.
struct TFeat {
  Irreps irreps;
  Slot slot = -1;
};

// ---------------------------------------------------------------------------
// Depth-wise tensor product plans

/// One weighted path (c1,l1) x (c2,l2) -> l3. Channel indices are global
/// (counted across blocks in layout order); each path owns one output
/// channel and one weight slot.
struct DtpPath {
  int c1 = 0, l1 = 0;
  int c2 = 0, l2 = 0;
  int l3 = 0;
  std::optional<Parity> p3;
  int weight = 0;
  int c3 = 0;  // output channel within the (l3,p3) kind
};

struct TensorProductPlan {
  Irreps irreps_in1, irreps_in2, irreps_out;
  std::vector<DtpPath> paths;
  int weight_count = 0;

  std::string describe() const;  // one line per path, for the paths audit
};

/// Enumerate all selection-rule-legal depth-wise paths with l3 <= l_max,
/// ordered lexicographically by (c1, c2, l3). With parity-tagged inputs the
/// output parity is p1*p2.
TensorProductPlan build_dtp_plan(const Irreps& in1, const Irreps& in2, int l_max);

/// Resolve a plan against the coupling tables into column offsets and sparse
/// coefficients consumable by the tape.
std::shared_ptr<const DtpKernel> compile_dtp(const TensorProductPlan& plan);

/// Apply a plan on the tape. Weights: weight_count columns, one row per
/// feature row (radially conditioned) or a single shared row.
TFeat emit_dtp(Tape& tape, const TensorProductPlan& plan,
               const std::shared_ptr<const DtpKernel>& kernel, Slot x, Slot y, Slot w);

/// Eager wrapper over emit_dtp.
IrrepsFeature apply_dtp(const TensorProductPlan& plan, const IrrepsFeature& x,
                        const IrrepsFeature& y, const Eigen::MatrixXd& weights);

// ---------------------------------------------------------------------------
// Point-wise equivariant layers

/// Per-degree linear map: each output type-L vector is a weighted sum of the
/// input type-L vectors of the same kind, identical weights across the 2L+1
/// orders; bias on scalar channels only.
class EquivariantLinear {
 public:
  EquivariantLinear() = default;
  EquivariantLinear(ParameterStore& store, std::string name, Irreps in, Irreps out,
                    bool bias = true);

  Slot emit(Tape& tape, const LeafMap& leaves, Slot x) const;
  const Irreps& irreps_in() const { return in_; }
  const Irreps& irreps_out() const { return out_; }

 private:
  std::string name_;
  Irreps in_, out_;
  bool bias_ = true;
  struct KindWire {
    int block_in, block_out;
    std::string pname;
  };
  std::vector<KindWire> wires_;
  std::string bias_name_;  // empty when no scalar bias
};

/// Scalar channels: standard layer norm (mean and variance across channels,
/// gamma and beta). Non-scalar blocks: divide each vector by the RMS over
/// channels of the per-channel L2 norms, scale by gamma; no mean, no bias.
class EquivariantLayerNorm {
 public:
  EquivariantLayerNorm() = default;
  EquivariantLayerNorm(ParameterStore& store, std::string name, Irreps irreps);

  Slot emit(Tape& tape, const LeafMap& leaves, Slot x) const;
  const Irreps& irreps() const { return irreps_; }

 private:
  std::string name_;
  Irreps irreps_;
  std::vector<std::string> gamma_names_;  // per block
  std::string beta_name_;                 // scalar block only
};

/// Gate activation: SiLU on the first C0 scalars (kept), sigmoid on the
/// remaining scalars producing one gate per non-scalar channel; every
/// non-scalar vector is multiplied by its gate. Pseudo-scalar (0,o) blocks
/// are gated like higher degrees.
struct GateInfo {
  Irreps in, out;
  int kept_scalars = 0;
  int gate_scalars = 0;
};

/// Layout arithmetic only; throws on scalar-count mismatch.
GateInfo gate_info(const Irreps& in);
/// Input irreps whose gate output equals `out` (adds the gate scalars).
Irreps gate_input_for(const Irreps& out);
TFeat emit_gate(Tape& tape, const Irreps& in, Slot x);

// ---------------------------------------------------------------------------
// Geometry features

/// Spherical harmonics of all degrees 0..l_max of per-row directions
/// (rows x 3, unit length), concatenated as [(1,0),(1,1),...]; with
/// `with_parity` the blocks carry the natural parity (-1)^l.
TFeat emit_sph(Tape& tape, Slot dirs, int l_max, bool with_parity);

// ---------------------------------------------------------------------------
// Eager wrappers (tests and audits)

IrrepsFeature run_linear(const EquivariantLinear& layer, const ParameterStore& store,
                         const IrrepsFeature& x);
IrrepsFeature run_layer_norm(const EquivariantLayerNorm& layer, const ParameterStore& store,
                             const IrrepsFeature& x);
IrrepsFeature run_gate(const IrrepsFeature& x);

/// Head-major column permutation: perm[j] = source column of output column
/// j, where the output groups each block's channels by head.
std::shared_ptr<const std::vector<int>> head_split_perm(const Irreps& irreps, int heads);

}  // namespace eqt
