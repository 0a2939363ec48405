#include "eqt/so3.hpp"

#include <memory>
#include <mutex>
#include <stdexcept>

namespace eqt {

namespace {

// Kronecker product, row-major index convention (right factor fastest).
Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

// so(3) generators for degree 1 in the (y, z, x) component order:
// J_a = P G_a P^T with P the axis permutation and G_a = dR_a/dtheta at 0.
std::array<Eigen::MatrixXd, 3> degree_one_generators() {
  Eigen::Matrix3d p = Eigen::Matrix3d::Zero();
  p(0, 1) = p(1, 2) = p(2, 0) = 1.0;
  std::array<Eigen::Matrix3d, 3> g;
  g[0] << 0, 0, 0, 0, 0, -1, 0, 1, 0;   // about x
  g[1] << 0, 0, 1, 0, 0, 0, -1, 0, 0;   // about y
  g[2] << 0, -1, 0, 1, 0, 0, 0, 0, 0;   // about z
  std::array<Eigen::MatrixXd, 3> out;
  for (int a = 0; a < 3; ++a) out[a] = p * g[a] * p.transpose();
  return out;
}

Eigen::Matrix3d axis_permutation() {
  Eigen::Matrix3d p = Eigen::Matrix3d::Zero();
  p(0, 1) = p(1, 2) = p(2, 0) = 1.0;
  return p;
}

}  // namespace

char parity_char(Parity p) { return p == Parity::Even ? 'e' : 'o'; }

Parity parity_from_char(char c) {
  if (c == 'e') return Parity::Even;
  if (c == 'o') return Parity::Odd;
  throw std::invalid_argument(std::string("invalid parity character '") + c + "'");
}

So3Tables::So3Tables(int l_max) : l_max_(l_max) {
  if (l_max < 0) throw std::invalid_argument("l_max must be non-negative");
  coupler_.resize(l_max_ + 1);
  sh_scale_.assign(l_max_ + 1, 1.0);
  gen_.resize(l_max_ + 1);

  for (int a = 0; a < 3; ++a) gen_[0][a] = Eigen::MatrixXd::Zero(1, 1);
  if (l_max_ >= 1) gen_[1] = degree_one_generators();

  // Basis vectors at the reference directions used to fix recursion scales.
  const Eigen::Vector3d n_ref = Eigen::Vector3d(0.3, -0.4, 0.85).normalized();
  const Eigen::Vector3d n_z(0.0, 0.0, 1.0);
  std::vector<Eigen::VectorXd> y_ref(l_max_ + 1), y_z(l_max_ + 1);
  y_ref[0] = y_z[0] = Eigen::VectorXd::Ones(1);
  const Eigen::Matrix3d p = axis_permutation();
  const double sqrt3 = std::sqrt(3.0);
  if (l_max_ >= 1) {
    y_ref[1] = sqrt3 * (p * n_ref);
    y_z[1] = sqrt3 * (p * n_z);
  }

  for (int l = 2; l <= l_max_; ++l) {
    const int d_prev = 2 * l - 1;
    const int d_prod = d_prev * 3;
    const int d_cur = 2 * l + 1;

    // Quadratic Casimir on the (l-1) x 1 product space; its l(l+1)
    // eigenspace is the degree-l component.
    std::array<Eigen::MatrixXd, 3> k;
    Eigen::MatrixXd casimir = Eigen::MatrixXd::Zero(d_prod, d_prod);
    const Eigen::MatrixXd eye_prev = Eigen::MatrixXd::Identity(d_prev, d_prev);
    const Eigen::MatrixXd eye3 = Eigen::MatrixXd::Identity(3, 3);
    for (int a = 0; a < 3; ++a) {
      k[a] = kron(gen_[l - 1][a], eye3) + kron(eye_prev, gen_[1][a]);
      casimir -= k[a] * k[a];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(casimir);
    const double target = static_cast<double>(l) * (l + 1);
    Eigen::MatrixXd m(d_cur, d_prod);
    int found = 0;
    for (int i = 0; i < d_prod; ++i) {
      if (std::abs(es.eigenvalues()[i] - target) < 0.5) {
        if (found == d_cur) throw std::runtime_error("casimir eigenspace too large");
        m.row(found++) = es.eigenvectors().col(i).transpose();
      }
    }
    if (found != d_cur) throw std::runtime_error("casimir eigenspace not found");
    coupler_[l] = m;

    for (int a = 0; a < 3; ++a) gen_[l][a] = m * k[a] * m.transpose();

    // Scale so |y_l|^2 = 2l+1 (the product norm is direction-independent),
    // with the sign fixed by the dominant component at the +z direction.
    Eigen::VectorXd prod_ref = kron(y_ref[l - 1], y_ref[1]);
    Eigen::VectorXd v = m * prod_ref;
    const double norm = v.norm();
    if (norm < 1e-8) throw std::runtime_error("degenerate coupling at reference direction");
    double scale = std::sqrt(static_cast<double>(d_cur)) / norm;
    Eigen::VectorXd vz = scale * (m * kron(y_z[l - 1], y_z[1]));
    int imax = 0;
    vz.cwiseAbs().maxCoeff(&imax);
    if (vz[imax] < 0) scale = -scale;
    sh_scale_[l] = scale;
    y_ref[l] = scale * v;
    y_z[l] = scale * (m * kron(y_z[l - 1], y_z[1]));
  }

  // Coupling tensors: unit vector spanning the rotation-invariant subspace
  // of V_l1 (x) V_l2 (x) V_l3, found as the null space of averaged
  // intertwiner constraints over a few random rotations.
  cg_.resize((l_max_ + 1) * (l_max_ + 1) * (l_max_ + 1));
  std::mt19937_64 rng(0x5eed50e3u);
  for (int l1 = 0; l1 <= l_max_; ++l1) {
    for (int l2 = 0; l2 <= l_max_; ++l2) {
      for (int l3 = 0; l3 <= l_max_; ++l3) {
        CgTensor& t = cg_[cg_index(l1, l2, l3)];
        t.l1 = l1;
        t.l2 = l2;
        t.l3 = l3;
        if (l3 < std::abs(l1 - l2) || l3 > l1 + l2) continue;  // zero tensor
        const int dim = (2 * l1 + 1) * (2 * l2 + 1) * (2 * l3 + 1);
        Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(dim, dim);
        for (int s = 0; s < 3; ++s) {
          Eigen::Quaterniond q = random_rotation(rng);
          const Eigen::Matrix3d rot = q.toRotationMatrix();
          Eigen::MatrixXd big =
              kron(kron(wigner_rec(l1, rot), wigner_rec(l2, rot)), wigner_rec(l3, rot)) -
              Eigen::MatrixXd::Identity(dim, dim);
          gram.noalias() += big.transpose() * big;
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
        // invariant vector: eigenvalue at the solver noise floor, all other
        // eigenvalues order one
        if (es.eigenvalues()[0] > 1e-10)
          throw std::runtime_error("coupling null space not found");
        if (dim > 1 && es.eigenvalues()[1] < 1e-4)
          throw std::runtime_error("coupling null space not one-dimensional");
        Eigen::VectorXd c = es.eigenvectors().col(0);
        const double max_abs = c.cwiseAbs().maxCoeff();
        for (int i = 0; i < dim; ++i) {
          if (std::abs(c[i]) > 0.5 * max_abs) {
            if (c[i] < 0) c = -c;
            break;
          }
        }
        t.c = c;
      }
    }
  }
}

Eigen::MatrixXd So3Tables::wigner_rec(int l, const Eigen::Matrix3d& rot) const {
  if (l == 0) return Eigen::MatrixXd::Ones(1, 1);
  const Eigen::Matrix3d p = axis_permutation();
  Eigen::MatrixXd d = p * rot * p.transpose();
  const Eigen::MatrixXd d1 = d;
  for (int k = 2; k <= l; ++k) d = coupler_[k] * kron(d, d1) * coupler_[k].transpose();
  return d;
}

Eigen::MatrixXd So3Tables::wigner(int l, const Eigen::Quaterniond& q) const {
  if (l < 0 || l > l_max_) throw std::invalid_argument("wigner: degree out of table range");
  return wigner_rec(l, q.normalized().toRotationMatrix());
}

Eigen::VectorXd So3Tables::sph(int l, const Eigen::Vector3d& r) const {
  if (l < 0 || l > l_max_) throw std::invalid_argument("sph: degree out of table range");
  const double norm = r.norm();
  if (norm < 1e-12) throw std::domain_error("sph: zero-length direction");
  const Eigen::Vector3d n = r / norm;
  Eigen::VectorXd y = Eigen::VectorXd::Ones(1);
  if (l == 0) return y;
  const Eigen::VectorXd y1 = std::sqrt(3.0) * (axis_permutation() * n);
  y = y1;
  for (int k = 2; k <= l; ++k) y = sh_scale_[k] * (coupler_[k] * kron(y, y1));
  return y;
}

const CgTensor& So3Tables::cg(int l1, int l2, int l3) const {
  if (l1 < 0 || l2 < 0 || l3 < 0 || l1 > l_max_ || l2 > l_max_ || l3 > l_max_)
    throw std::invalid_argument("cg: degree out of table range");
  return cg_[cg_index(l1, l2, l3)];
}

const So3Tables& so3_tables(int l_max) {
  static std::mutex mu;
  static std::vector<std::unique_ptr<So3Tables>> tables;
  std::lock_guard<std::mutex> lock(mu);
  for (const auto& t : tables)
    if (t->l_max() >= l_max) return *t;
  tables.push_back(std::make_unique<So3Tables>(l_max));
  return *tables.back();
}

Eigen::MatrixXd wigner_d(int l, const Eigen::Quaterniond& q) {
  return so3_tables(l).wigner(l, q);
}

Eigen::MatrixXd wigner_d(int l, double alpha, double beta, double gamma) {
  Eigen::Quaterniond q = Eigen::AngleAxisd(alpha, Eigen::Vector3d::UnitZ()) *
                         Eigen::AngleAxisd(beta, Eigen::Vector3d::UnitY()) *
                         Eigen::AngleAxisd(gamma, Eigen::Vector3d::UnitZ());
  return so3_tables(l).wigner(l, q);
}

Eigen::VectorXd real_sph_harm(int l, const Eigen::Vector3d& r) {
  return so3_tables(l).sph(l, r);
}

const CgTensor& clebsch_gordan(int l1, int l2, int l3) {
  return so3_tables(std::max({l1, l2, l3})).cg(l1, l2, l3);
}

Eigen::Quaterniond random_rotation(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double u1 = u(rng), u2 = u(rng), u3 = u(rng);
  const double a = std::sqrt(1.0 - u1), b = std::sqrt(u1);
  const double t2 = 2.0 * M_PI * u2, t3 = 2.0 * M_PI * u3;
  return Eigen::Quaterniond(a * std::sin(t2), a * std::cos(t2), b * std::sin(t3),
                            b * std::cos(t3));
}

}  // namespace eqt
