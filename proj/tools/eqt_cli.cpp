// Command-line harness: training, evaluation, prediction dumps and the
// invariant audit suites. Exit code 0 means every requested check passed.

#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "eqt/audit.hpp"
#include "eqt/train.hpp"

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

struct CommonOpts {
  std::string config_path;
  std::string preset;
  std::string mode;  // "se3" | "e3" | ""
  std::uint64_t seed = 0;
};

// Precedence: an explicit --preset flag wins, otherwise the config file
// (which may itself name a preset to start from), otherwise the fallback.
eqt::ModelConfig resolve_model_config(const CommonOpts& o, const std::string& fallback) {
  eqt::ModelConfig cfg;
  if (o.preset.empty() && !o.config_path.empty()) {
    cfg = eqt::ModelConfig::from_json(read_file(o.config_path));
  } else {
    std::string preset = o.preset.empty() ? fallback : o.preset;
    if (o.mode == "e3" && preset.find("_e3") == std::string::npos) preset += "_e3";
    cfg = eqt::model_preset(preset);
  }
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"equivariant graph attention networks for atomistic energies and forces"};
  app.require_subcommand(1);

  CommonOpts opts;

  // ---- train ----
  auto* train_cmd = app.add_subcommand("train", "fit a model on a dataset");
  std::string data_path, val_path, out_params = "params.json", metrics_path;
  std::string toy_kind = "pairwise-morse";
  int toy_frames = 50, toy_atoms = 5;
  train_cmd->add_option("--config", opts.config_path, "JSON config file");
  train_cmd->add_option("--preset", opts.preset, "model/train preset name");
  train_cmd->add_option("--mode", opts.mode, "se3 or e3");
  train_cmd->add_option("--seed", opts.seed, "random seed");
  train_cmd->add_option("--data", data_path, "training set (extended XYZ)");
  train_cmd->add_option("--val", val_path, "validation set (extended XYZ)");
  train_cmd->add_option("--toy-kind", toy_kind, "toy dataset kind when no --data");
  train_cmd->add_option("--toy-frames", toy_frames, "toy dataset size");
  train_cmd->add_option("--toy-atoms", toy_atoms, "atoms per toy frame");
  train_cmd->add_option("--out", out_params, "output parameter file");
  train_cmd->add_option("--metrics", metrics_path, "CSV metric log");
  int epochs_override = -1;
  train_cmd->add_option("--epochs", epochs_override, "override epoch count");

  // ---- eval ----
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a trained model");
  std::string params_path, eval_data;
  eval_cmd->add_option("--params", params_path, "parameter file")->required();
  eval_cmd->add_option("--data", eval_data, "dataset (extended XYZ)")->required();

  // ---- dump-preds ----
  auto* dump_cmd = app.add_subcommand("dump-preds", "write per-frame predictions");
  std::string dump_params, dump_data, dump_out = "preds.csv";
  dump_cmd->add_option("--params", dump_params, "parameter file")->required();
  dump_cmd->add_option("--data", dump_data, "dataset (extended XYZ)")->required();
  dump_cmd->add_option("--out", dump_out, "output CSV");

  // ---- audit ----
  auto* audit_cmd = app.add_subcommand("audit", "run invariant suites");
  std::string audit_what;
  audit_cmd->add_option("suite", audit_what, "equivariance|gradcheck|paths|forces")->required();
  audit_cmd->add_option("--config", opts.config_path, "JSON config file");
  audit_cmd->add_option("--preset", opts.preset, "model preset name");
  audit_cmd->add_option("--mode", opts.mode, "se3 or e3");
  audit_cmd->add_option("--seed", opts.seed, "random seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) {
      eqt::TrainConfig tcfg;
      if (!opts.config_path.empty()) tcfg = eqt::TrainConfig::from_json(read_file(opts.config_path));
      if (!opts.preset.empty()) tcfg = eqt::train_preset(opts.preset);
      if (train_cmd->count("--seed")) tcfg.seed = opts.seed;
      if (epochs_override >= 0) tcfg.epochs = epochs_override;

      eqt::ModelConfig mcfg =
          resolve_model_config({opts.config_path, opts.preset, opts.mode, 0}, tcfg.preset);

      eqt::Dataset train_set, val_set;
      if (!data_path.empty()) {
        train_set = eqt::load_xyz(data_path, tcfg.force_weight > 0);
        if (!val_path.empty()) val_set = eqt::load_xyz(val_path, false);
      } else {
        eqt::Dataset all = eqt::make_toy_dataset(toy_kind, toy_frames + toy_frames / 5,
                                                 tcfg.seed, toy_atoms);
        train_set.frames.assign(all.frames.begin(), all.frames.begin() + toy_frames);
        val_set.frames.assign(all.frames.begin() + toy_frames, all.frames.end());
      }

      const eqt::DatasetStats stats = eqt::compute_stats(train_set, mcfg.cutoff());
      mcfg.avg_degree = stats.avg_degree;
      mcfg.avg_atom_count = stats.avg_atom_count;
      mcfg.energy_mean = stats.energy_mean;
      mcfg.energy_std = stats.energy_std;

      eqt::EnergyModel model(mcfg, tcfg.seed);
      std::cout << "training " << model.params().parameter_count() << " parameters for "
                << tcfg.epochs << " epochs\n";
      const eqt::TrainResult res = eqt::train(model, train_set, val_set, tcfg, &std::cout);
      model.save(out_params);
      std::cout << "saved parameters to " << out_params << "\n";
      if (!metrics_path.empty()) {
        std::ofstream mf(metrics_path);
        mf << "epoch,lr,train_loss,train_energy_mae,train_force_mae,val_energy_mae,val_force_mae\n";
        mf.precision(17);
        for (const auto& l : res.log)
          mf << l.epoch << ',' << l.lr << ',' << l.train_loss << ',' << l.train_energy_mae << ','
             << l.train_force_mae << ',' << l.val_energy_mae << ',' << l.val_force_mae << "\n";
      }
      return 0;
    }

    if (*eval_cmd) {
      eqt::EnergyModel model = eqt::EnergyModel::load_file(params_path);
      eqt::Dataset data = eqt::load_xyz(eval_data, false);
      const eqt::Metrics m = eqt::evaluate(model, data);
      std::cout << "frames " << m.count << "\n";
      std::cout << "energy MAE (eV) " << m.energy_mae << "\n";
      if (!std::isnan(m.force_mae)) std::cout << "force MAE (eV/A) " << m.force_mae << "\n";
      std::cout << "EwT@0.02eV " << 100.0 * m.ewt << "%\n";
      return 0;
    }

    if (*dump_cmd) {
      eqt::EnergyModel model = eqt::EnergyModel::load_file(dump_params);
      eqt::Dataset data = eqt::load_xyz(dump_data, false);
      const auto preds = eqt::predict_all(model, data, false);
      std::ofstream out(dump_out);
      if (!out) throw std::runtime_error("cannot write '" + dump_out + "'");
      out.precision(17);
      out << "frame,energy_true,energy_pred\n";
      for (std::size_t i = 0; i < preds.size(); ++i)
        out << i << ',' << preds[i].energy_true << ',' << preds[i].energy_pred << "\n";
      std::cout << "wrote " << preds.size() << " predictions to " << dump_out << "\n";
      return 0;
    }

    if (*audit_cmd) {
      const eqt::ModelConfig cfg = resolve_model_config(opts, "toy");
      if (audit_what == "equivariance") {
        const eqt::AuditReport r = eqt::audit_equivariance(cfg, opts.seed);
        std::cout << r.text();
        return r.all_pass() ? 0 : 1;
      }
      if (audit_what == "gradcheck") {
        const eqt::AuditReport r = eqt::audit_gradcheck(cfg, opts.seed);
        std::cout << r.text();
        return r.all_pass() ? 0 : 1;
      }
      if (audit_what == "paths") {
        std::cout << eqt::audit_paths(cfg);
        return 0;
      }
      if (audit_what == "forces") {
        const eqt::AuditReport r = eqt::audit_forces(cfg, opts.seed);
        std::cout << r.text();
        return r.all_pass() ? 0 : 1;
      }
      throw std::runtime_error("unknown audit suite '" + audit_what + "'");
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
