#include "eqt/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>

#include "eqt/graph.hpp"

namespace eqt {

namespace {

const char* kSymbols[] = {"X",  "H",  "He", "Li", "Be", "B",  "C",  "N",  "O",  "F",  "Ne",
                          "Na", "Mg", "Al", "Si", "P",  "S",  "Cl", "Ar", "K",  "Ca", "Sc",
                          "Ti", "V",  "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge",
                          "As", "Se", "Br", "Kr"};
constexpr int kMaxZ = 36;

[[noreturn]] void parse_fail(int line, const std::string& msg) {
  throw std::runtime_error("xyz parse error at line " + std::to_string(line) + ": " + msg);
}

// Morse pair potential and its radial derivative.
struct Morse {
  double depth = 0.5, width = 1.5, r0 = 2.0;
  double value(double d) const {
    const double q = 1.0 - std::exp(-width * (d - r0));
    return depth * q * q;
  }
  double deriv(double d) const {
    const double e = std::exp(-width * (d - r0));
    return 2.0 * depth * width * (1.0 - e) * e;
  }
};

struct Harmonic {
  double k = 0.3, r0 = 2.5;
  double value(double d) const { return 0.5 * k * (d - r0) * (d - r0); }
  double deriv(double d) const { return k * (d - r0); }
};

template <class Pot>
void fill_energy_forces(Frame& f, const Pot& pot) {
  const int n = static_cast<int>(f.species.size());
  f.energy = 0.0;
  Eigen::MatrixXd forces = Eigen::MatrixXd::Zero(n, 3);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const Eigen::Vector3d rij = f.positions.row(j) - f.positions.row(i);
      const double d = rij.norm();
      f.energy += pot.value(d);
      const Eigen::Vector3d pull = pot.deriv(d) * rij / d;  // dV/dr_i = -pull
      forces.row(i) += pull.transpose();
      forces.row(j) -= pull.transpose();
    }
  }
  f.forces = forces;
}

Eigen::MatrixXd sample_cluster(int n_atoms, double box, double min_dist, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, box);
  Eigen::MatrixXd pos(n_atoms, 3);
  for (int i = 0; i < n_atoms; ++i) {
    for (int attempt = 0;; ++attempt) {
      Eigen::Vector3d p(u(rng), u(rng), u(rng));
      bool ok = true;
      for (int j = 0; j < i && ok; ++j)
        if ((pos.row(j).transpose() - p).norm() < min_dist) ok = false;
      if (ok) {
        pos.row(i) = p;
        break;
      }
      if (attempt > 8192) throw std::runtime_error("toy dataset: packing failed");
    }
  }
  return pos;
}

}  // namespace

bool Dataset::has_forces() const {
  return !frames.empty() &&
         std::all_of(frames.begin(), frames.end(), [](const Frame& f) { return f.forces.has_value(); });
}

int atomic_number(const std::string& symbol) {
  for (int z = 1; z <= kMaxZ; ++z)
    if (symbol == kSymbols[z]) return z;
  try {
    return std::stoi(symbol);
  } catch (...) {
    throw std::runtime_error("unknown element symbol '" + symbol + "'");
  }
}

std::string element_symbol(int z) {
  if (z >= 1 && z <= kMaxZ) return kSymbols[z];
  return std::to_string(z);
}

Dataset load_xyz(const std::string& path, bool need_forces) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  Dataset data;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    int n_atoms = 0;
    try {
      n_atoms = std::stoi(line);
    } catch (...) {
      parse_fail(lineno, "expected atom count, got '" + line + "'");
    }
    if (n_atoms < 1) parse_fail(lineno, "atom count must be positive");

    if (!std::getline(in, line)) parse_fail(lineno + 1, "missing comment line");
    ++lineno;
    Frame frame;
    bool have_energy = false;
    {
      std::istringstream cs(line);
      std::string token;
      while (cs >> token) {
        const auto eq = token.find('=');
        if (eq == std::string::npos) continue;
        if (token.substr(0, eq) == "energy") {
          try {
            frame.energy = std::stod(token.substr(eq + 1));
            have_energy = true;
          } catch (...) {
            parse_fail(lineno, "bad energy value '" + token + "'");
          }
        }
      }
    }
    if (!have_energy) parse_fail(lineno, "comment line lacks energy=<value>");

    frame.positions.resize(n_atoms, 3);
    Eigen::MatrixXd forces(n_atoms, 3);
    int atoms_with_forces = 0;
    for (int i = 0; i < n_atoms; ++i) {
      if (!std::getline(in, line)) parse_fail(lineno + 1, "truncated frame");
      ++lineno;
      std::istringstream as(line);
      std::string sym;
      double x, y, z;
      if (!(as >> sym >> x >> y >> z)) parse_fail(lineno, "expected: element x y z");
      frame.species.push_back(atomic_number(sym));
      frame.positions.row(i) << x, y, z;
      double fx, fy, fz;
      if (as >> fx >> fy >> fz) {
        forces.row(i) << fx, fy, fz;
        ++atoms_with_forces;
      }
    }
    if (atoms_with_forces == n_atoms)
      frame.forces = forces;
    else if (atoms_with_forces != 0)
      parse_fail(lineno, "force columns present on some atoms only");
    else if (need_forces)
      parse_fail(lineno, "frame lacks force columns but forces were requested");
    data.frames.push_back(std::move(frame));
  }
  if (data.frames.empty()) throw std::runtime_error("'" + path + "' holds no frames");
  return data;
}

void save_xyz(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out.precision(17);
  for (const Frame& f : data.frames) {
    out << f.species.size() << "\n";
    out << "energy=" << f.energy << "\n";
    for (std::size_t i = 0; i < f.species.size(); ++i) {
      out << element_symbol(f.species[i]) << ' ' << f.positions(i, 0) << ' ' << f.positions(i, 1)
          << ' ' << f.positions(i, 2);
      if (f.forces)
        out << ' ' << (*f.forces)(i, 0) << ' ' << (*f.forces)(i, 1) << ' ' << (*f.forces)(i, 2);
      out << "\n";
    }
  }
}

double toy_potential_energy(const std::string& kind, const Eigen::MatrixXd& positions) {
  Frame f;
  f.species.assign(positions.rows(), 1);
  f.positions = positions;
  if (kind == "pairwise-morse")
    fill_energy_forces(f, Morse{});
  else if (kind == "random-cluster")
    fill_energy_forces(f, Harmonic{});
  else
    throw std::invalid_argument("unknown toy dataset kind '" + kind + "'");
  return f.energy;
}

Eigen::MatrixXd toy_potential_forces(const std::string& kind, const Eigen::MatrixXd& positions) {
  Frame f;
  f.species.assign(positions.rows(), 1);
  f.positions = positions;
  if (kind == "pairwise-morse")
    fill_energy_forces(f, Morse{});
  else if (kind == "random-cluster")
    fill_energy_forces(f, Harmonic{});
  else
    throw std::invalid_argument("unknown toy dataset kind '" + kind + "'");
  return *f.forces;
}

double toy_potential_r0(const std::string& kind) {
  if (kind == "pairwise-morse") return Morse{}.r0;
  if (kind == "random-cluster") return Harmonic{}.r0;
  throw std::invalid_argument("unknown toy dataset kind '" + kind + "'");
}

Dataset make_toy_dataset(const std::string& kind, int n_frames, std::uint64_t seed, int n_atoms) {
  Dataset data;
  std::mt19937_64 rng(seed ^ 0x70edda7aull);
  for (int k = 0; k < n_frames; ++k) {
    Frame f;
    for (int i = 0; i < n_atoms; ++i) f.species.push_back(i % 2 == 0 ? 6 : 1);
    if (kind == "pairwise-morse") {
      f.positions = sample_cluster(n_atoms, 3.5, 1.4, rng);
      fill_energy_forces(f, Morse{});
    } else if (kind == "random-cluster") {
      f.positions = sample_cluster(n_atoms, 4.0, 1.0, rng);
      fill_energy_forces(f, Harmonic{});
    } else {
      throw std::invalid_argument("unknown toy dataset kind '" + kind + "'");
    }
    data.frames.push_back(std::move(f));
  }
  return data;
}

DatasetStats compute_stats(const Dataset& data, double cutoff) {
  DatasetStats s;
  if (data.frames.empty()) return s;
  double sum = 0, sq = 0, degree_sum = 0, atom_sum = 0;
  long node_total = 0;
  for (const Frame& f : data.frames) {
    sum += f.energy;
    sq += f.energy * f.energy;
    atom_sum += static_cast<double>(f.species.size());
    const AtomisticGraph g = radius_graph(f.species, f.positions, cutoff);
    degree_sum += g.num_edges();
    node_total += g.num_nodes();
  }
  const double n = static_cast<double>(data.frames.size());
  s.energy_mean = sum / n;
  const double var = std::max(sq / n - s.energy_mean * s.energy_mean, 0.0);
  s.energy_std = std::max(std::sqrt(var), 1e-12);
  s.avg_atom_count = atom_sum / n;
  s.avg_degree = std::max(degree_sum / static_cast<double>(node_total), 1.0);
  return s;
}

}  // namespace eqt
