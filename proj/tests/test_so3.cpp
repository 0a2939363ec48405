#include "eqt/so3.hpp"

#include <random>

#include "doctest.h"
#include "oracles.hpp"

using namespace eqt;
using Eigen::MatrixXd;
using Eigen::Quaterniond;
using Eigen::Vector3d;

namespace {

Vector3d random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> d(0.0, 1.0);
  Vector3d v(d(rng), d(rng), d(rng));
  return v.normalized();
}

}  // namespace

TEST_SUITE("parity") {
  TEST_CASE("multiplication table") {
    CHECK(parity_mul(Parity::Even, Parity::Even) == Parity::Even);
    CHECK(parity_mul(Parity::Odd, Parity::Odd) == Parity::Even);
    CHECK(parity_mul(Parity::Even, Parity::Odd) == Parity::Odd);
    CHECK(parity_mul(Parity::Odd, Parity::Even) == Parity::Odd);
  }

  TEST_CASE("spherical harmonic parity alternates") {
    CHECK(sh_parity(0) == Parity::Even);
    CHECK(sh_parity(1) == Parity::Odd);
    CHECK(sh_parity(2) == Parity::Even);
    CHECK(sh_parity(3) == Parity::Odd);
  }

  TEST_CASE("round trip through characters") {
    CHECK(parity_from_char(parity_char(Parity::Even)) == Parity::Even);
    CHECK(parity_from_char(parity_char(Parity::Odd)) == Parity::Odd);
    CHECK_THROWS_AS(parity_from_char('x'), std::invalid_argument);
  }
}

TEST_SUITE("wigner") {
  TEST_CASE("identity rotation gives the identity matrix") {
    for (int l = 0; l <= 4; ++l) {
      MatrixXd d = wigner_d(l, Quaterniond::Identity());
      CHECK((d - MatrixXd::Identity(2 * l + 1, 2 * l + 1)).cwiseAbs().maxCoeff() < 1e-12);
    }
  }

  TEST_CASE("degree one equals the permuted rotation matrix") {
    std::mt19937_64 rng(7);
    Eigen::Matrix3d p = Eigen::Matrix3d::Zero();
    p(0, 1) = p(1, 2) = p(2, 0) = 1.0;  // degree-1 basis order (y, z, x)
    for (int t = 0; t < 20; ++t) {
      Quaterniond q = random_rotation(rng);
      MatrixXd d = wigner_d(1, q);
      MatrixXd expect = p * q.toRotationMatrix() * p.transpose();
      CHECK((d - expect).cwiseAbs().maxCoeff() < 1e-13);
    }
  }

  TEST_CASE("orthogonality over random rotations up to degree four") {
    std::mt19937_64 rng(11);
    for (int t = 0; t < 100; ++t) {
      Quaterniond q = random_rotation(rng);
      for (int l = 0; l <= 4; ++l) {
        MatrixXd d = wigner_d(l, q);
        const double err =
            (d.transpose() * d - MatrixXd::Identity(d.rows(), d.cols())).cwiseAbs().maxCoeff();
        CHECK(err <= 1e-10);
        CHECK(d.determinant() == doctest::Approx(1.0).epsilon(1e-9));
      }
    }
  }

  TEST_CASE("composition matches quaternion products") {
    std::mt19937_64 rng(13);
    for (int t = 0; t < 100; ++t) {
      Quaterniond a = random_rotation(rng), b = random_rotation(rng);
      Quaterniond ab = a * b;
      for (int l = 1; l <= 3; ++l) {
        const double err = (wigner_d(l, a) * wigner_d(l, b) - wigner_d(l, ab)).cwiseAbs().maxCoeff();
        CHECK(err <= 1e-10);
      }
    }
  }

  TEST_CASE("euler overload composes z-y-z") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int t = 0; t < 5; ++t) {
      const double a = u(rng), b = u(rng), c = u(rng);
      Quaterniond q = Eigen::AngleAxisd(a, Vector3d::UnitZ()) *
                      Eigen::AngleAxisd(b, Vector3d::UnitY()) *
                      Eigen::AngleAxisd(c, Vector3d::UnitZ());
      CHECK((wigner_d(2, a, b, c) - wigner_d(2, q)).cwiseAbs().maxCoeff() < 1e-13);
    }
  }
}

TEST_SUITE("spherical harmonics") {
  TEST_CASE("degree zero is one") {
    std::mt19937_64 rng(19);
    for (int t = 0; t < 5; ++t) {
      Eigen::VectorXd y = real_sph_harm(0, random_unit(rng));
      REQUIRE(y.size() == 1);
      CHECK(y[0] == doctest::Approx(1.0).epsilon(1e-15));
    }
  }

  TEST_CASE("degree one at +z: single component sqrt(3) in the (y,z,x) order") {
    Eigen::VectorXd y = real_sph_harm(1, Vector3d(0, 0, 1));
    REQUIRE(y.size() == 3);
    CHECK(y[0] == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(y[1] == doctest::Approx(std::sqrt(3.0)));
    CHECK(y[2] == doctest::Approx(0.0).epsilon(1e-14));
  }

  TEST_CASE("component normalization: mean square over the sphere is one") {
    // oracle: quadrature of each squared component over the sphere
    for (int l = 0; l <= 4; ++l) {
      for (int m = 0; m < 2 * l + 1; ++m) {
        const double integral = oracle::sphere_integral(
            [&](const Vector3d& n) { return real_sph_harm(l, n)[m] * real_sph_harm(l, n)[m]; });
        CHECK(integral / (4.0 * M_PI) == doctest::Approx(1.0).epsilon(1e-10));
      }
    }
  }

  TEST_CASE("squared norm is 2l+1 for random directions") {
    std::mt19937_64 rng(23);
    for (int t = 0; t < 50; ++t) {
      Vector3d n = random_unit(rng);
      for (int l = 0; l <= 4; ++l) {
        const double err = std::abs(real_sph_harm(l, n).squaredNorm() - (2.0 * l + 1.0));
        CHECK(err <= 1e-10);
      }
    }
  }

  TEST_CASE("rotation equivariance") {
    std::mt19937_64 rng(29);
    for (int t = 0; t < 100; ++t) {
      Quaterniond q = random_rotation(rng);
      Vector3d n = random_unit(rng);
      for (int l = 1; l <= 4; ++l) {
        Eigen::VectorXd lhs = wigner_d(l, q) * real_sph_harm(l, n);
        Eigen::VectorXd rhs = real_sph_harm(l, q.toRotationMatrix() * n);
        CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-10);
      }
    }
  }

  TEST_CASE("inversion flips sign for odd degrees") {
    std::mt19937_64 rng(31);
    for (int t = 0; t < 20; ++t) {
      Vector3d n = random_unit(rng);
      for (int l = 0; l <= 4; ++l) {
        Eigen::VectorXd a = real_sph_harm(l, Vector3d(-n));
        Eigen::VectorXd b = real_sph_harm(l, n) * (l % 2 == 0 ? 1.0 : -1.0);
        CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-12);
      }
    }
  }

  TEST_CASE("zero-length direction is a domain error") {
    CHECK_THROWS_AS(real_sph_harm(1, Vector3d::Zero()), std::domain_error);
  }
}

TEST_SUITE("clebsch-gordan") {
  TEST_CASE("scalar times scalar is plain multiplication") {
    const CgTensor& c = clebsch_gordan(0, 0, 0);
    REQUIRE(!c.is_zero());
    CHECK(c(0, 0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  }

  TEST_CASE("selection rule violations give the zero tensor") {
    CHECK(clebsch_gordan(1, 1, 3).is_zero());
    CHECK(clebsch_gordan(0, 1, 0).is_zero());
    CHECK(clebsch_gordan(2, 0, 1).is_zero());
  }

  TEST_CASE("1x1->0 contraction is the dot product over sqrt(3)") {
    const CgTensor& c = clebsch_gordan(1, 1, 0);
    std::mt19937_64 rng(37);
    std::normal_distribution<double> d(0.0, 1.0);
    for (int t = 0; t < 10; ++t) {
      Vector3d a(d(rng), d(rng), d(rng)), b(d(rng), d(rng), d(rng));
      double out = 0;
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) out += c(i, j, 0) * a[i] * b[j];
      CHECK(std::abs(std::abs(out) - std::abs(a.dot(b)) / std::sqrt(3.0)) < 1e-12);
    }
  }

  TEST_CASE("orthogonality: sum over (m1,m2) is identity over 2l3+1") {
    for (int l1 = 0; l1 <= 3; ++l1)
      for (int l2 = 0; l2 <= 3; ++l2)
        for (int l3 = std::abs(l1 - l2); l3 <= std::min(l1 + l2, 3); ++l3) {
          const CgTensor& c = clebsch_gordan(l1, l2, l3);
          const double expect = 1.0 / (2.0 * l3 + 1.0);
          for (int m3 = 0; m3 < c.d3(); ++m3)
            for (int m3p = 0; m3p < c.d3(); ++m3p) {
              double s = 0;
              for (int m1 = 0; m1 < c.d1(); ++m1)
                for (int m2 = 0; m2 < c.d2(); ++m2) s += c(m1, m2, m3) * c(m1, m2, m3p);
              CHECK(std::abs(s - (m3 == m3p ? expect : 0.0)) < 1e-12);
            }
        }
  }

  TEST_CASE("intertwiner identity for all degree triples up to three") {
    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 5; ++trial) {
      Quaterniond q = random_rotation(rng);
      for (int l1 = 0; l1 <= 3; ++l1)
        for (int l2 = 0; l2 <= 3; ++l2)
          for (int l3 = std::abs(l1 - l2); l3 <= std::min(l1 + l2, 3); ++l3) {
            const CgTensor& c = clebsch_gordan(l1, l2, l3);
            MatrixXd d1 = wigner_d(l1, q), d2 = wigner_d(l2, q), d3 = wigner_d(l3, q);
            // contract CG with D1 (x) D2 on the input side, compare with D3
            // applied on the output side
            double err = 0;
            for (int m1 = 0; m1 < c.d1(); ++m1)
              for (int m2 = 0; m2 < c.d2(); ++m2)
                for (int m3 = 0; m3 < c.d3(); ++m3) {
                  double lhs = 0, rhs = 0;
                  for (int a = 0; a < c.d1(); ++a)
                    for (int b = 0; b < c.d2(); ++b) lhs += c(a, b, m3) * d1(a, m1) * d2(b, m2);
                  for (int k = 0; k < c.d3(); ++k) rhs += d3(m3, k) * c(m1, m2, k);
                  err = std::max(err, std::abs(lhs - rhs));
                }
            CHECK(err <= 1e-9);
          }
    }
  }

  TEST_CASE("proportional to the quadrature triple-product tensor") {
    // independent oracle: C[m1,m2,m3] ~ integral of Y1 Y2 Y3 over the sphere
    for (auto [l1, l2, l3] : std::vector<std::array<int, 3>>{{1, 1, 2}, {2, 1, 1}, {2, 2, 2}}) {
      const CgTensor& c = clebsch_gordan(l1, l2, l3);
      Eigen::VectorXd gaunt(c.d1() * c.d2() * c.d3());
      int idx = 0;
      for (int m1 = 0; m1 < c.d1(); ++m1)
        for (int m2 = 0; m2 < c.d2(); ++m2)
          for (int m3 = 0; m3 < c.d3(); ++m3)
            gaunt[idx++] = oracle::sphere_integral([&](const Vector3d& n) {
              return real_sph_harm(l1, n)[m1] * real_sph_harm(l2, n)[m2] * real_sph_harm(l3, n)[m3];
            });
      const double cs = std::abs(gaunt.normalized().dot(c.c));
      CHECK(cs == doctest::Approx(1.0).epsilon(1e-9));
    }
  }

  TEST_CASE("tables are reproducible across constructions") {
    So3Tables a(3), b(3);
    for (int l1 = 0; l1 <= 3; ++l1)
      for (int l2 = 0; l2 <= 3; ++l2)
        for (int l3 = 0; l3 <= 3; ++l3) {
          const CgTensor &ca = a.cg(l1, l2, l3), &cb = b.cg(l1, l2, l3);
          REQUIRE(ca.is_zero() == cb.is_zero());
          if (!ca.is_zero()) CHECK((ca.c - cb.c).cwiseAbs().maxCoeff() == 0.0);
        }
  }
}
