#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <cstdint>
#include <random>
#include <vector>

namespace eqt {

/// Behavior under spatial inversion: even vectors keep their sign, odd
/// vectors flip it.
enum class Parity : std::uint8_t { Even, Odd };

constexpr Parity parity_mul(Parity a, Parity b) {
  return a == b ? Parity::Even : Parity::Odd;
}

/// Parity of the degree-L spherical harmonic: even L -> even, odd L -> odd.
constexpr Parity sh_parity(int l) {
  return (l % 2 == 0) ? Parity::Even : Parity::Odd;
}

char parity_char(Parity p);
Parity parity_from_char(char c);

/// Coupling tensor combining a degree-l1 and a degree-l2 vector into a
/// degree-l3 vector, in the same real basis as real_sph_harm / wigner_d.
/// Normalized to unit Frobenius norm; identically zero outside the
/// selection rule |l1-l2| <= l3 <= l1+l2.
struct CgTensor {
  int l1 = 0, l2 = 0, l3 = 0;
  Eigen::VectorXd c;  // flat [i1][i2][i3], i3 fastest; empty => zero tensor

  bool is_zero() const { return c.size() == 0; }
  int d1() const { return 2 * l1 + 1; }
  int d2() const { return 2 * l2 + 1; }
  int d3() const { return 2 * l3 + 1; }
  double operator()(int i1, int i2, int i3) const {
    return is_zero() ? 0.0 : c[(i1 * d2() + i2) * d3() + i3];
  }
};

/// Precomputed rotation-group tables up to a maximum degree.
///
/// Basis convention: degree-0 basis is the constant 1; the degree-1 basis is
/// sqrt(3) * (y, z, x). Bases for L >= 2 are defined recursively through the
/// orthonormal coupler of the (L-1) x 1 product space, so every table here is
/// consistent with every other by construction. All tables are immutable
/// after the constructor returns; reads are thread-safe.
class So3Tables {
 public:
  explicit So3Tables(int l_max);

  int l_max() const { return l_max_; }

  /// Wigner matrix of degree l for a unit quaternion, acting on basis
  /// coefficients so that sph(l, R n) = wigner(l, R) * sph(l, n).
  Eigen::MatrixXd wigner(int l, const Eigen::Quaterniond& q) const;

  /// Real spherical harmonics of one degree, component-normalized so that
  /// the squared norm is 2l+1 for every direction. Throws std::domain_error
  /// for a zero-length input; non-unit inputs are normalized.
  Eigen::VectorXd sph(int l, const Eigen::Vector3d& r) const;

  /// Coupling tensor for (l1,l2,l3); zero tensor outside the selection rule.
  const CgTensor& cg(int l1, int l2, int l3) const;

  /// Orthonormal-row coupler M_l mapping the (2l-1)*3 product space onto the
  /// degree-l subspace, and the scale making sph(l) = sh_scale(l) * M_l *
  /// (sph(l-1) (x) sph(1)). Defined for 2 <= l <= l_max.
  const Eigen::MatrixXd& sh_coupler(int l) const { return coupler_[l]; }
  double sh_scale(int l) const { return sh_scale_[l]; }

 private:
  int l_max_;
  std::vector<Eigen::MatrixXd> coupler_;              // [l] : (2l+1) x (2l-1)*3
  std::vector<double> sh_scale_;                      // [l]
  std::vector<std::array<Eigen::MatrixXd, 3>> gen_;   // so(3) generators per l
  mutable std::vector<CgTensor> cg_;                  // dense (l1,l2,l3) cache

  int cg_index(int l1, int l2, int l3) const {
    return (l1 * (l_max_ + 1) + l2) * (l_max_ + 1) + l3;
  }
  Eigen::MatrixXd wigner_rec(int l, const Eigen::Matrix3d& rot) const;
};

/// Shared table instance covering at least degree l_max. Construction is
/// serialized; returned references stay valid for the program lifetime.
const So3Tables& so3_tables(int l_max);

Eigen::MatrixXd wigner_d(int l, const Eigen::Quaterniond& q);
/// Euler-angle overload, z-y-z convention: R = Rz(alpha) Ry(beta) Rz(gamma).
Eigen::MatrixXd wigner_d(int l, double alpha, double beta, double gamma);

Eigen::VectorXd real_sph_harm(int l, const Eigen::Vector3d& r);

const CgTensor& clebsch_gordan(int l1, int l2, int l3);

/// Uniform random rotation (Shoemake's method) from a caller-owned engine.
Eigen::Quaterniond random_rotation(std::mt19937_64& rng);

}  // namespace eqt
