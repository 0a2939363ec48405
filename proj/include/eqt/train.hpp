#pragma once

#include <string>
#include <vector>

#include "eqt/data.hpp"
#include "eqt/model.hpp"

namespace eqt {

struct TrainConfig {
  std::string preset = "toy";
  int epochs = 200;
  int batch_size = 10;
  double lr = 5e-3;
  double weight_decay = 0.0;
  int warmup_epochs = 5;
  double energy_weight = 1.0;
  double force_weight = 0.0;
  std::uint64_t seed = 0;

  std::string to_json() const;
  static TrainConfig from_json(const std::string& text);
};

/// Optimizer and schedule presets matching the model presets: qm9 and oc20
/// train on energy only, md17 and toy add the force term at weight 80.
TrainConfig train_preset(const std::string& name);

struct EpochLog {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double train_energy_mae = 0.0;  // eV
  double train_force_mae = 0.0;   // eV/A, 0 when unused
  double val_energy_mae = 0.0;
  double val_force_mae = 0.0;
};

struct TrainResult {
  std::vector<EpochLog> log;
};

/// Linear warmup to the peak rate, then cosine decay to zero.
double scheduled_lr(const TrainConfig& cfg, int epoch);

/// AdamW with decoupled weight decay.
class AdamW {
 public:
  AdamW(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(ParameterStore& store, const GradientSet& grads, double lr, double weight_decay);

 private:
  double beta1_, beta2_, eps_;
  long t_ = 0;
  std::map<std::string, Eigen::MatrixXd> m_, v_;
};

/// Minimize the MAE between predictions and normalized targets (plus the
/// weighted force MAE when configured). The model's stored normalization is
/// set from the training split before the first step.
TrainResult train(EnergyModel& model, const Dataset& train_set, const Dataset& val_set,
                  const TrainConfig& cfg, std::ostream* log_stream = nullptr);

struct Metrics {
  double energy_mae = 0.0;   // eV
  double force_mae = 0.0;    // eV/A; NaN when the set has no forces
  double ewt = 0.0;          // fraction with |error| <= 0.02 eV
  int count = 0;
};

Metrics evaluate(const EnergyModel& model, const Dataset& data);

struct Prediction {
  double energy_true = 0.0, energy_pred = 0.0;
  Eigen::MatrixXd forces_pred;  // empty unless requested
};

std::vector<Prediction> predict_all(const EnergyModel& model, const Dataset& data,
                                    bool with_forces);

}  // namespace eqt
