#pragma once

#include <optional>
#include <string>
#include <vector>

#include "eqt/attention.hpp"
#include "eqt/graph.hpp"

namespace eqt {

struct ModelConfig {
  int blocks = 6;
  Irreps d_embed, d_sh, d_head, d_ffn, d_feature;
  int heads = 4;
  int l_max = 2;
  bool e3 = false;
  AttnKind attn_kind = AttnKind::Mlp;
  MessageKind message_kind = MessageKind::NonLinear;
  RadialBasisSpec radial;
  double avg_degree = 1.0;
  double avg_atom_count = 1.0;
  int species_count = 10;
  double leaky_slope = 0.2;
  double attn_dropout = 0.0;
  // energy normalization, frozen from the training split
  double energy_mean = 0.0;
  double energy_std = 1.0;

  double cutoff() const { return radial.cutoff; }
  void validate() const;
  std::string to_json() const;
  static ModelConfig from_json(const std::string& text);
};

/// Named presets: qm9, qm9_e3, md17, md17_l3, oc20, oc20_e3, toy, toy_e3,
/// micro (a tiny two-block model for exhaustive gradient checks).
ModelConfig model_preset(const std::string& name);
std::vector<std::string> model_preset_names();

/// Several graphs packed into one disjoint super-graph; edges never cross
/// member graphs.
struct GraphBatch {
  std::vector<int> species;
  Eigen::MatrixXd positions;
  std::shared_ptr<std::vector<int>> edge_dst, edge_src;
  std::vector<int> graph_of_node;
  int num_graphs = 0;

  int num_nodes() const { return static_cast<int>(species.size()); }
  static GraphBatch pack(const std::vector<const AtomisticGraph*>& graphs);
};

/// Full model: atom + edge-degree embeddings, pre-norm transformer blocks
/// (attention and feed-forward with additive skips), final layer norm and a
/// summed scalar output head. Forces come from reverse-mode differentiation
/// of the energy with respect to positions.
class EnergyModel {
 public:
  EnergyModel(ModelConfig cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  std::uint64_t seed() const { return seed_; }
  ParameterStore& params() { return store_; }
  const ParameterStore& params() const { return store_; }

  struct Forward {
    Slot positions = -1;      // batch positions leaf
    Slot graph_energy = -1;   // num_graphs x 1, normalized units
    Slot total_energy = -1;   // 1 x 1 sum over graphs
  };

  /// Assemble the normalized-energy computation on a caller-owned tape.
  /// dropout draws one mask per block when training; null for evaluation.
  Forward emit(Tape& tape, const LeafMap& leaves, const GraphBatch& batch,
               const std::vector<Eigen::MatrixXd>* dropout = nullptr,
               bool positions_require_grad = true) const;

  /// Same, but reading atom positions from an existing tape slot.
  Forward emit_at(Tape& tape, const LeafMap& leaves, const GraphBatch& batch, Slot positions,
                  const std::vector<Eigen::MatrixXd>* dropout = nullptr) const;

  const TensorProductPlan& edge_degree_plan() const { return deg_plan_; }

  /// Normalized model output for a single graph (no denormalization).
  double energy_normalized(const AtomisticGraph& g) const;
  /// Energy in eV (denormalized with the stored statistics).
  double energy(const AtomisticGraph& g) const;
  /// Forces in eV/Angstrom: negative position gradient of the energy.
  Eigen::MatrixXd forces(const AtomisticGraph& g) const;
  std::pair<double, Eigen::MatrixXd> energy_and_forces(const AtomisticGraph& g) const;

  const AttentionLayer& attention(int block) const { return attn_[block]; }

  /// Freeze harness-level energy normalization into the config; the model
  /// emits normalized energies, reports denormalize with these.
  void set_energy_normalization(double mean, double stddev) {
    cfg_.energy_mean = mean;
    cfg_.energy_std = stddev;
  }

  void save(const std::string& path) const;
  static EnergyModel load_file(const std::string& path);

 private:
  ModelConfig cfg_;
  std::uint64_t seed_ = 0;
  ParameterStore store_;

  std::string embed_name_;
  EquivariantLinear deg_lin_in_, deg_lin_out_;
  Irreps deg_out_;
  TensorProductPlan deg_plan_;
  std::shared_ptr<const DtpKernel> deg_kern_;
  RadialMlp deg_radial_;

  struct Ffn {
    EquivariantLinear lin1, lin2;
    Irreps hidden_in;
  };
  std::vector<EquivariantLayerNorm> ln_attn_, ln_ffn_;
  std::vector<AttentionLayer> attn_;
  std::vector<Ffn> ffn_;
  EquivariantLinear residual_proj_;  // last block, d_embed -> d_feature
  EquivariantLayerNorm ln_head_;
  Ffn head_;

  Ffn make_ffn(const std::string& name, const Irreps& in, const Irreps& hidden,
               const Irreps& out);
  Slot emit_ffn(Tape& tape, const LeafMap& leaves, const Ffn& f, Slot x) const;
};

}  // namespace eqt
