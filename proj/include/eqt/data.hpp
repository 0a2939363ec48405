#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace eqt {

struct Frame {
  std::vector<int> species;   // atomic numbers
  Eigen::MatrixXd positions;  // N x 3, Angstrom
  double energy = 0.0;        // eV
  std::optional<Eigen::MatrixXd> forces;  // N x 3, eV/Angstrom
};

/// Normalization statistics, computed on the training split only. Forces are
/// scaled by the energy standard deviation.
struct DatasetStats {
  double energy_mean = 0.0;
  double energy_std = 1.0;
  double avg_degree = 1.0;
  double avg_atom_count = 1.0;
};

struct Dataset {
  std::vector<Frame> frames;
  DatasetStats stats;

  int size() const { return static_cast<int>(frames.size()); }
  bool has_forces() const;
};

/// Extended XYZ: per frame, an atom-count line, a key=value comment line
/// carrying energy=<eV>, then one line per atom: element x y z [fx fy fz].
/// Parse errors report the offending line number.
Dataset load_xyz(const std::string& path, bool need_forces = false);
void save_xyz(const Dataset& data, const std::string& path);

/// Synthetic configurations with closed-form energies and forces:
/// "pairwise-morse" draws compact clusters under a Morse pair potential,
/// "random-cluster" uses a harmonic pair potential on box-uniform positions.
Dataset make_toy_dataset(const std::string& kind, int n_frames, std::uint64_t seed,
                         int n_atoms = 5);

/// The closed-form potentials behind the toy datasets, exposed so tests can
/// probe chosen geometries (equilibrium distances, finite differences).
double toy_potential_energy(const std::string& kind, const Eigen::MatrixXd& positions);
Eigen::MatrixXd toy_potential_forces(const std::string& kind, const Eigen::MatrixXd& positions);
/// Equilibrium pair distance of the named potential.
double toy_potential_r0(const std::string& kind);

/// Mean/std of energy plus graph statistics at the given cutoff.
DatasetStats compute_stats(const Dataset& data, double cutoff);

int atomic_number(const std::string& symbol);
std::string element_symbol(int z);

}  // namespace eqt
