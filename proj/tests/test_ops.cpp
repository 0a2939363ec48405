#include "eqt/ops.hpp"

#include <random>

#include "doctest.h"
#include "oracles.hpp"

using namespace eqt;
using Mat = Eigen::MatrixXd;

namespace {

Mat randn(int r, int c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, 1.0);
  Mat m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = d(rng);
  return m;
}

Mat rot_rows(const Mat& x, const Irreps& irreps, const Eigen::Quaterniond& q, bool inv = false) {
  return x * irreps_rep(irreps, q, inv).transpose();
}

std::vector<std::pair<int, int>> as_pairs(const Irreps& irreps) {
  std::vector<std::pair<int, int>> out;
  for (const auto& b : irreps.blocks()) out.emplace_back(b.mul, b.l);
  return out;
}

}  // namespace

TEST_SUITE("equivariant linear") {
  TEST_CASE("identity weights pass the input through") {
    Irreps ir = Irreps::parse("[(2,0),(2,1)]");
    ParameterStore store(1);
    EquivariantLinear lin(store, "lin", ir, ir, true);
    store.at("lin.w0") = Mat::Identity(2, 2);
    store.at("lin.w1") = Mat::Identity(2, 2);
    IrrepsFeature x{ir, randn(3, ir.dim(), 10)};
    IrrepsFeature y = run_linear(lin, store, x);
    CHECK((y.data - x.data).cwiseAbs().maxCoeff() == 0.0);
  }

  TEST_CASE("averaging weights on a scalar pair") {
    Irreps in = Irreps::parse("[(2,0)]"), out = Irreps::parse("[(1,0)]");
    ParameterStore store(2);
    EquivariantLinear lin(store, "lin", in, out, true);
    store.at("lin.w0") << 0.5, 0.5;
    Mat x(1, 2);
    x << 1.0, 3.0;
    IrrepsFeature y = run_linear(lin, store, {in, x});
    CHECK(y.data(0, 0) == doctest::Approx(2.0).epsilon(1e-15));
  }

  TEST_CASE("missing input block kind is a layout error") {
    ParameterStore store(3);
    CHECK_THROWS_AS(EquivariantLinear(store, "lin", Irreps::parse("[(4,0)]"),
                                      Irreps::parse("[(2,0),(2,1)]"), true),
                    std::invalid_argument);
  }

  TEST_CASE("commutes with rotations") {
    Irreps ir = Irreps::parse("[(3,0),(2,1),(1,2)]");
    ParameterStore store(4);
    EquivariantLinear lin(store, "lin", ir, Irreps::parse("[(2,0),(1,1),(2,2)]"), true);
    std::mt19937_64 rng(5);
    IrrepsFeature x{ir, randn(4, ir.dim(), 11)};
    IrrepsFeature y = run_linear(lin, store, x);
    for (int t = 0; t < 20; ++t) {
      Eigen::Quaterniond q = random_rotation(rng);
      IrrepsFeature yr = run_linear(lin, store, {ir, rot_rows(x.data, ir, q)});
      CHECK((yr.data - rot_rows(y.data, y.irreps, q)).cwiseAbs().maxCoeff() <= 1e-10);
    }
  }

  TEST_CASE("exactly linear in its input") {
    Irreps ir = Irreps::parse("[(2,0),(2,1)]");
    ParameterStore store(6);
    EquivariantLinear lin(store, "lin", ir, ir, true);  // zero-initialized bias
    IrrepsFeature x{ir, randn(3, ir.dim(), 12)}, y{ir, randn(3, ir.dim(), 13)};
    const double a = 0.7, b = -1.3;
    Mat lhs = run_linear(lin, store, {ir, a * x.data + b * y.data}).data;
    Mat rhs = a * run_linear(lin, store, x).data + b * run_linear(lin, store, y).data;
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_SUITE("equivariant layer norm") {
  TEST_CASE("uniform scalars collapse to beta") {
    Irreps ir = Irreps::parse("[(4,0)]");
    ParameterStore store(7);
    EquivariantLayerNorm ln(store, "ln", ir);
    store.at("ln.b") << 0.1, 0.2, 0.3, 0.4;
    IrrepsFeature x{ir, Mat::Constant(2, 4, 5.5)};
    IrrepsFeature y = run_layer_norm(ln, store, x);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 4; ++j)
        CHECK(y.data(i, j) == doctest::Approx(store.at("ln.b")(0, j)).epsilon(1e-12));
  }

  TEST_CASE("single vector channel is normalized to unit length") {
    Irreps ir = Irreps::parse("[(1,1)]");
    ParameterStore store(8);
    EquivariantLayerNorm ln(store, "ln", ir);
    Mat v(1, 3);
    v << 3.0, 0.0, 4.0;
    IrrepsFeature y = run_layer_norm(ln, store, {ir, v});
    Mat expect = v / 5.0;
    CHECK((y.data - expect).cwiseAbs().maxCoeff() <= 1e-12);
  }

  TEST_CASE("all-zero features stay finite") {
    Irreps ir = Irreps::parse("[(2,0),(2,1)]");
    ParameterStore store(9);
    EquivariantLayerNorm ln(store, "ln", ir);
    IrrepsFeature y = run_layer_norm(ln, store, {ir, Mat::Zero(3, ir.dim())});
    CHECK(y.data.allFinite());
  }

  TEST_CASE("commutes with rotations") {
    Irreps ir = Irreps::parse("[(3,0),(2,1),(2,2)]");
    ParameterStore store(10);
    EquivariantLayerNorm ln(store, "ln", ir);
    store.at("ln.b") = randn(1, 3, 20);  // exercise the scalar shift too
    std::mt19937_64 rng(21);
    IrrepsFeature x{ir, randn(5, ir.dim(), 22)};
    IrrepsFeature y = run_layer_norm(ln, store, x);
    for (int t = 0; t < 20; ++t) {
      Eigen::Quaterniond q = random_rotation(rng);
      IrrepsFeature yr = run_layer_norm(ln, store, {ir, rot_rows(x.data, ir, q)});
      CHECK((yr.data - rot_rows(y.data, ir, q)).cwiseAbs().maxCoeff() <= 1e-9);
    }
  }
}

TEST_SUITE("gate") {
  TEST_CASE("zero gate scalars halve every vector") {
    Irreps in = Irreps::parse("[(2,0),(1,1)]");
    Mat x(1, in.dim());
    x << 0.8, 0.0, 1.0, 2.0, 3.0;  // scalars [s, 0], vector (1,2,3)
    IrrepsFeature y = run_gate({in, x});
    CHECK(y.irreps.str() == "[(1,0),(1,1)]");
    const double s = 0.8;
    CHECK(y.data(0, 0) == doctest::Approx(s / (1.0 + std::exp(-s))).epsilon(1e-14));
    CHECK(y.data(0, 1) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(y.data(0, 2) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(y.data(0, 3) == doctest::Approx(1.5).epsilon(1e-14));
  }

  TEST_CASE("channel bookkeeping: scalars shrink, vectors survive") {
    Irreps in = Irreps::parse("[(7,0),(3,1),(2,2)]");
    GateInfo info = gate_info(in);
    CHECK(info.kept_scalars == 2);
    CHECK(info.gate_scalars == 5);
    CHECK(info.out.str() == "[(2,0),(3,1),(2,2)]");
    CHECK(gate_input_for(info.out).str() == in.str());
  }

  TEST_CASE("scalar shortage is a layout error") {
    CHECK_THROWS_AS(gate_info(Irreps::parse("[(2,0),(3,1)]")), std::invalid_argument);
  }

  TEST_CASE("a gate that keeps every scalar no longer matches the contract") {
    // negative control: a corrupted gate applying SiLU to all scalars would
    // emit [(7,0),(3,1)]; any consumer expecting the contracted layout
    // rejects it by dimension
    Irreps in = Irreps::parse("[(7,0),(3,1)]");
    GateInfo info = gate_info(in);
    Irreps corrupted({{7, 0, std::nullopt}, {3, 1, std::nullopt}});
    CHECK(info.out.dim() != corrupted.dim());
    ParameterStore store(11);
    EquivariantLinear consumer(store, "after", info.out, info.out, true);
    Tape t;
    LeafMap leaves = emit_leaves(t, store, false);
    Slot bad = t.leaf(Mat::Zero(2, corrupted.dim()), false);
    CHECK_THROWS_AS(consumer.emit(t, leaves, bad), std::invalid_argument);
  }

  TEST_CASE("equivariant under rotation and inversion") {
    Irreps out = Irreps::parse("[(2,0,e),(1,0,o),(2,1,e),(1,1,o)]");
    Irreps in = gate_input_for(out);
    std::mt19937_64 rng(23);
    IrrepsFeature x{in, randn(4, in.dim(), 24)};
    IrrepsFeature y = run_gate(x);
    for (int t = 0; t < 20; ++t) {
      Eigen::Quaterniond q = random_rotation(rng);
      const bool inv = t % 2 == 1;
      IrrepsFeature yr = run_gate({in, rot_rows(x.data, in, q, inv)});
      CHECK((yr.data - rot_rows(y.data, y.irreps, q, inv)).cwiseAbs().maxCoeff() <= 1e-9);
    }
  }
}

TEST_SUITE("tensor product plans") {
  TEST_CASE("worked example: ten paths") {
    TensorProductPlan plan =
        build_dtp_plan(Irreps::parse("[(2,0),(2,1)]"), Irreps::parse("[(1,0),(1,1)]"), 1);
    CHECK(plan.weight_count == 10);
    CHECK(static_cast<int>(plan.paths.size()) == 10);
    // per l=0 channel: 0x0->0 and 0x1->1; per l=1 channel: 1x0->1, 1x1->0, 1x1->1
    CHECK(plan.irreps_out.multiplicity(0, std::nullopt) == 2 + 2);
    CHECK(plan.irreps_out.multiplicity(1, std::nullopt) == 2 + 2 + 2);
  }

  TEST_CASE("single scalar pair gives one path") {
    TensorProductPlan plan =
        build_dtp_plan(Irreps::parse("[(1,0)]"), Irreps::parse("[(1,0)]"), 3);
    CHECK(plan.weight_count == 1);
    CHECK(plan.irreps_out.str() == "[(1,0)]");
  }

  TEST_CASE("parities multiply along each path") {
    TensorProductPlan plan =
        build_dtp_plan(Irreps::parse("[(1,1,o)]"), Irreps::parse("[(1,1,o)]"), 2);
    for (const auto& p : plan.paths) {
      REQUIRE(p.p3.has_value());
      CHECK(*p.p3 == Parity::Even);  // o x o = e
    }
    CHECK(plan.irreps_out.str() == "[(1,0,e),(1,1,e),(1,2,e)]");
  }

  TEST_CASE("ordering is lexicographic by (c1, c2, l3)") {
    TensorProductPlan plan =
        build_dtp_plan(Irreps::parse("[(1,0),(1,1)]"), Irreps::parse("[(1,0),(1,1)]"), 2);
    for (std::size_t i = 1; i < plan.paths.size(); ++i) {
      const auto &a = plan.paths[i - 1], &b = plan.paths[i];
      CHECK(std::make_tuple(a.c1, a.c2, a.l3) < std::make_tuple(b.c1, b.c2, b.l3));
      CHECK(a.weight == static_cast<int>(i - 1));
    }
  }

  TEST_CASE("path counts match brute-force enumeration on random layouts") {
    std::mt19937_64 rng(31);
    std::uniform_int_distribution<int> mul(1, 3), deg(0, 3), nblocks(1, 3), lmax(0, 3);
    for (int t = 0; t < 50; ++t) {
      auto sample = [&] {
        std::vector<IrrepBlock> blocks;
        std::vector<bool> used(4, false);
        const int n = nblocks(rng);
        for (int i = 0; i < n; ++i) {
          int l = deg(rng);
          if (used[l]) continue;
          used[l] = true;
          blocks.push_back({mul(rng), l, std::nullopt});
        }
        if (blocks.empty()) blocks.push_back({1, 0, std::nullopt});
        return Irreps(blocks);
      };
      Irreps in1 = sample().canonical(), in2 = sample().canonical();
      const int cap = lmax(rng);
      TensorProductPlan plan = build_dtp_plan(in1, in2, cap);
      CHECK(plan.weight_count == oracle::count_dtp_paths(as_pairs(in1), as_pairs(in2), cap));
    }
  }
}

TEST_SUITE("tensor product application") {
  TEST_CASE("scalar path is plain multiplication") {
    TensorProductPlan plan =
        build_dtp_plan(Irreps::parse("[(1,0)]"), Irreps::parse("[(1,0)]"), 0);
    IrrepsFeature x{plan.irreps_in1, Mat::Constant(1, 1, 2.0)};
    IrrepsFeature y{plan.irreps_in2, Mat::Constant(1, 1, 3.0)};
    IrrepsFeature out = apply_dtp(plan, x, y, Mat::Ones(1, 1));
    CHECK(out.data(0, 0) == doctest::Approx(6.0).epsilon(1e-15));
  }

  TEST_CASE("vector pair to scalar matches the dense contraction") {
    TensorProductPlan plan =
        build_dtp_plan(Irreps::parse("[(1,1)]"), Irreps::parse("[(1,1)]"), 0);
    REQUIRE(plan.weight_count == 1);
    IrrepsFeature x{plan.irreps_in1, randn(4, 3, 30)};
    IrrepsFeature y{plan.irreps_in2, randn(4, 3, 31)};
    Mat w = Mat::Constant(4, 1, 1.25);
    IrrepsFeature out = apply_dtp(plan, x, y, w);
    const CgTensor& c = clebsch_gordan(1, 1, 0);
    for (int r = 0; r < 4; ++r) {
      double dense = 0;  // direct dense triple loop, independent of the path machinery
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) dense += c(i, j, 0) * x.data(r, i) * y.data(r, j);
      CHECK(out.data(r, 0) == doctest::Approx(1.25 * dense).epsilon(1e-13));
    }
  }

  TEST_CASE("equivariant for rotated operands") {
    Irreps in1 = Irreps::parse("[(2,0),(2,1),(1,2)]"), in2 = Irreps::parse("[(1,0),(1,1)]");
    TensorProductPlan plan = build_dtp_plan(in1, in2, 2);
    std::mt19937_64 rng(33);
    IrrepsFeature x{in1, randn(3, in1.dim(), 34)};
    IrrepsFeature y{in2, randn(3, in2.dim(), 35)};
    Mat w = randn(3, plan.weight_count, 36);
    IrrepsFeature out = apply_dtp(plan, x, y, w);
    for (int t = 0; t < 20; ++t) {
      Eigen::Quaterniond q = random_rotation(rng);
      IrrepsFeature outr = apply_dtp(plan, {in1, rot_rows(x.data, in1, q)},
                                     {in2, rot_rows(y.data, in2, q)}, w);
      CHECK((outr.data - rot_rows(out.data, out.irreps, q)).cwiseAbs().maxCoeff() <= 1e-9);
    }
  }

  TEST_CASE("linear in the weights") {
    Irreps in1 = Irreps::parse("[(2,0),(1,1)]"), in2 = Irreps::parse("[(1,0),(1,1)]");
    TensorProductPlan plan = build_dtp_plan(in1, in2, 1);
    IrrepsFeature x{in1, randn(3, in1.dim(), 37)};
    IrrepsFeature y{in2, randn(3, in2.dim(), 38)};
    Mat w1 = randn(3, plan.weight_count, 39), w2 = randn(3, plan.weight_count, 40);
    Mat sum = apply_dtp(plan, x, y, w1 + w2).data;
    Mat parts = apply_dtp(plan, x, y, w1).data + apply_dtp(plan, x, y, w2).data;
    CHECK((sum - parts).cwiseAbs().maxCoeff() <= 1e-12);
  }

  TEST_CASE("dimension mismatches are layout errors") {
    TensorProductPlan plan =
        build_dtp_plan(Irreps::parse("[(1,0)]"), Irreps::parse("[(1,0)]"), 0);
    IrrepsFeature x{plan.irreps_in1, Mat::Ones(1, 1)};
    IrrepsFeature bad{Irreps::parse("[(1,1)]"), Mat::Ones(1, 3)};
    CHECK_THROWS_AS(apply_dtp(plan, x, bad, Mat::Ones(1, 1)), std::invalid_argument);
    CHECK_THROWS_AS(apply_dtp(plan, x, x, Mat::Ones(1, 5)), std::invalid_argument);
  }
}

TEST_SUITE("randomized layout properties") {
  // every point-wise op stays equivariant on arbitrary canonical layouts,
  // with and without parity tracking
  TEST_CASE("linear, norm, gate and tensor product on random layouts") {
    std::mt19937_64 rng(77);
    std::uniform_int_distribution<int> mul(1, 5), deg(0, 3), coin(0, 1);
    auto sample_irreps = [&](bool e3, bool need_scalars) {
      std::vector<IrrepBlock> blocks;
      for (int l = 0; l <= 3; ++l) {
        for (int pe = 0; pe < (e3 ? 2 : 1); ++pe) {
          if (coin(rng) == 0 && !(need_scalars && l == 0 && pe == 0)) continue;
          IrrepBlock b{mul(rng), l, std::nullopt};
          if (e3) b.p = pe == 0 ? Parity::Even : Parity::Odd;
          blocks.push_back(b);
        }
      }
      return Irreps(blocks);
    };

    for (int trial = 0; trial < 25; ++trial) {
      const bool e3 = trial % 2 == 1;
      const Irreps in = sample_irreps(e3, true);
      const Irreps out = sample_irreps(e3, true);
      ParameterStore store(1000 + trial);

      // an output layout restricted to kinds the input can feed
      std::vector<IrrepBlock> feasible;
      for (const auto& b : out.blocks())
        if (in.find(b.l, b.p) >= 0) feasible.push_back(b);
      if (feasible.empty()) feasible.push_back(in.block(0));
      const Irreps lin_out = Irreps(feasible);

      EquivariantLinear lin(store, "p.lin", in, lin_out, true);
      EquivariantLayerNorm norm(store, "p.ln", in);
      const Irreps gate_in = gate_input_for(in);
      TensorProductPlan plan = build_dtp_plan(in, sample_irreps(e3, false), 3);

      const Eigen::Quaterniond q = random_rotation(rng);
      const bool inv = e3 && coin(rng) == 1;
      IrrepsFeature x{in, randn(3, in.dim(), 2000 + trial)};
      const Mat xt = rot_rows(x.data, in, q, inv);

      Mat a = run_linear(lin, store, x).data;
      CHECK((run_linear(lin, store, {in, xt}).data - rot_rows(a, lin_out, q, inv))
                .cwiseAbs()
                .maxCoeff() <= 1e-10);

      a = run_layer_norm(norm, store, x).data;
      CHECK((run_layer_norm(norm, store, {in, xt}).data - rot_rows(a, in, q, inv))
                .cwiseAbs()
                .maxCoeff() <= 1e-9);

      IrrepsFeature gx{gate_in, randn(3, gate_in.dim(), 3000 + trial)};
      IrrepsFeature ga = run_gate(gx);
      CHECK((run_gate({gate_in, rot_rows(gx.data, gate_in, q, inv)}).data -
             rot_rows(ga.data, ga.irreps, q, inv))
                .cwiseAbs()
                .maxCoeff() <= 1e-9);

      if (plan.weight_count > 0) {
        IrrepsFeature y{plan.irreps_in2, randn(3, plan.irreps_in2.dim(), 4000 + trial)};
        Mat w = randn(3, plan.weight_count, 5000 + trial);
        IrrepsFeature d = apply_dtp(plan, x, y, w);
        IrrepsFeature dr = apply_dtp(plan, {in, xt},
                                     {y.irreps, rot_rows(y.data, y.irreps, q, inv)}, w);
        CHECK((dr.data - rot_rows(d.data, d.irreps, q, inv)).cwiseAbs().maxCoeff() <= 1e-9);
      }
    }
  }

  TEST_CASE("gate handles layouts without kept scalars") {
    // all scalars consumed as gates
    Irreps out = Irreps::parse("[(3,1),(2,2)]");
    Irreps in = gate_input_for(out);
    CHECK(in.str() == "[(5,0),(3,1),(2,2)]");
    IrrepsFeature x{in, Eigen::MatrixXd::Random(2, in.dim())};
    IrrepsFeature y = run_gate(x);
    CHECK(y.irreps.str() == out.str());
  }
}

TEST_SUITE("taped spherical harmonics") {
  TEST_CASE("matches the table evaluation per degree") {
    std::mt19937_64 rng(41);
    std::normal_distribution<double> d(0.0, 1.0);
    Mat dirs(6, 3);
    for (int i = 0; i < 6; ++i) {
      Eigen::Vector3d v(d(rng), d(rng), d(rng));
      dirs.row(i) = v.normalized().transpose();
    }
    Tape t;
    TFeat sh = emit_sph(t, t.leaf(dirs, false), 3, false);
    const Mat& out = t.val(sh.slot);
    for (int i = 0; i < 6; ++i) {
      int off = 0;
      for (int l = 0; l <= 3; ++l) {
        Eigen::VectorXd y = real_sph_harm(l, dirs.row(i).transpose());
        CHECK((out.row(i).segment(off, 2 * l + 1).transpose() - y).cwiseAbs().maxCoeff() < 1e-12);
        off += 2 * l + 1;
      }
    }
  }
}

TEST_SUITE("head splitting") {
  TEST_CASE("permutation groups channels by head") {
    Irreps ir = Irreps::parse("[(4,0),(2,1)]");
    auto perm = head_split_perm(ir, 2);
    REQUIRE(static_cast<int>(perm->size()) == ir.dim());
    // head 0: scalar channels 0,1 then vector channel 0
    std::vector<int> expect = {0, 1, 4, 5, 6, 2, 3, 7, 8, 9};
    CHECK(*perm == expect);
    CHECK_THROWS_AS(head_split_perm(Irreps::parse("[(3,0)]"), 2), std::invalid_argument);
  }
}
