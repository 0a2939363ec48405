#pragma once

#include <memory>
#include <string>

#include "eqt/graph.hpp"
#include "eqt/ops.hpp"

namespace eqt {

enum class AttnKind { Mlp, Dot };
enum class MessageKind { Linear, NonLinear };

AttnKind attn_kind_from_string(const std::string& s);
MessageKind message_kind_from_string(const std::string& s);
std::string to_string(AttnKind k);
std::string to_string(MessageKind k);

struct AttentionConfig {
  int heads = 4;
  Irreps d_head;
  AttnKind attn_kind = AttnKind::Mlp;
  MessageKind message_kind = MessageKind::NonLinear;
  double leaky_slope = 0.2;
  double attn_dropout = 0.0;

  void validate() const;
};

/// Per-evaluation edge quantities shared by every attention layer: spherical
/// harmonics of edge directions, radial basis of edge lengths, endpoints.
struct EdgeContext {
  TFeat sh;
  Slot rbf = -1;
  std::shared_ptr<const std::vector<int>> dst, src;
  int num_nodes = 0;
  int num_edges() const { return static_cast<int>(dst->size()); }
};

/// Equivariant graph attention: messages from a radially-weighted tensor
/// product of node features with edge direction harmonics; attention weights
/// from invariant scalars (MLP kind) or a scaled irreps dot product between
/// query and key (dot kind); values taken linearly or through a gate plus a
/// second tensor product (non-linear messages); multi-head throughout.
class AttentionLayer {
 public:
  AttentionLayer() = default;
  AttentionLayer(ParameterStore& store, std::string name, Irreps node_irreps, Irreps sh_irreps,
                 int rbf_dim, AttentionConfig cfg);

  /// dropout_mask: per-edge-per-head entries 0 or 1/(1-p); null in
  /// evaluation mode. attn_out, when given, receives the edges x heads
  /// softmax weights (before dropout).
  Slot emit(Tape& tape, const LeafMap& leaves, Slot x, const EdgeContext& edges,
            const Eigen::MatrixXd* dropout_mask = nullptr, Slot* attn_out = nullptr) const;

  int tensor_product_count() const { return cfg_.message_kind == MessageKind::NonLinear ? 2 : 1; }
  const TensorProductPlan& message_plan() const { return plan1_; }
  const TensorProductPlan* value_plan() const {
    return cfg_.message_kind == MessageKind::NonLinear ? &plan2_ : nullptr;
  }
  const Irreps& node_irreps() const { return node_; }

 private:
  std::string name_;
  Irreps node_, sh_;
  AttentionConfig cfg_;
  Irreps heads_irreps_;  // heads x d_head
  Irreps attn_part_;     // scalar alpha channels (mlp) or key irreps (dot)
  Irreps msg_part_;      // value channels before gating
  Irreps f_irreps_;      // channel-wise merge of the two parts
  int mul_alpha_ = 0;

  EquivariantLinear lin_dst_, lin_src_, lin_f_, lin_q_, lin_v_, lin_out_;
  TensorProductPlan plan1_, plan2_;
  std::shared_ptr<const DtpKernel> kern1_, kern2_;
  RadialMlp radial_;
  std::string w2_name_;  // shared weights of the second tensor product
  std::string alpha_name_;
};

/// Scale surviving attention weights by 1/(1-p); entries are zeroed with
/// probability p. Identity when p == 0.
Eigen::MatrixXd draw_dropout_mask(int rows, int cols, double p, std::mt19937_64& rng);

}  // namespace eqt
