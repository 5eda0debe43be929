#include "test_util.hpp"

#include <gtest/gtest.h>

#include <chrono>

using namespace mcan;
using testutil::random_mat;

namespace {

std::vector<double> window(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::vector<double> v(static_cast<std::size_t>(n));
  for (auto& x : v) x = u(rng);
  return v;
}

}  // namespace

TEST(Embedding, PositionExamples) {
  EXPECT_EQ(embedding_positions(6, 12), (std::vector<int>{0, 2, 4, 6, 8, 10}));
  EXPECT_EQ(embedding_positions(3, 12), (std::vector<int>{0, 5, 10}));
  EXPECT_EQ(embedding_positions(12, 12), (std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11}));
  EXPECT_EQ(embedding_positions(1, 12), (std::vector<int>{0}));
  EXPECT_THROW(embedding_positions(13, 12), std::invalid_argument);
  EXPECT_THROW(embedding_positions(0, 12), std::invalid_argument);
}

TEST(Embedding, CpaFillsTheGaps) {
  ad::ParamSet ps;
  std::mt19937_64 rng(1);
  const auto cpa = CpaParams::create(ps, "cpa", 5, rng);
  ad::Tape tape;
  ForwardContext ctx{tape, ps};
  const std::vector<double> x{3.0, -1.0, 7.5};
  const auto e = embed_series(ctx, tape.constant(ad::column(x)), 12, cpa);
  EXPECT_EQ(std::count(e.filled_mask.begin(), e.filled_mask.end(), true), 3);
  const Mat& v = ps[cpa.coefficients].value;
  for (int j = 0; j < 12; ++j) {
    if (e.filled_mask[static_cast<std::size_t>(j)]) continue;
    const auto t = chebyshev_basis(2.0 * j / 12.0 - 1.0, 5);
    double expect = 0.0;
    for (int l = 0; l < 5; ++l) expect += v(l, 0) * t[static_cast<std::size_t>(l)];
    EXPECT_NEAR(e.values.value()(j, 0), expect, 1e-12) << "position " << j;
  }
  EXPECT_EQ(e.values.value()(5, 0), -1.0);
}

TEST(Embedding, FullWidthInputIsIdentity) {
  ad::ParamSet ps;
  std::mt19937_64 rng(2);
  const auto cpa = CpaParams::create(ps, "cpa", 5, rng);
  ad::Tape tape;
  ForwardContext ctx{tape, ps};
  const auto x = window(rng, 12);
  const auto e = embed_series(ctx, tape.constant(ad::column(x)), 12, cpa);
  EXPECT_EQ(ad::to_vector(e.values.value()), x);
  EXPECT_TRUE(std::all_of(e.filled_mask.begin(), e.filled_mask.end(), [](bool b) { return b; }));
}

TEST(Embedding, ExhaustiveRawPositionsAndRoundTrip) {
  ad::ParamSet ps;
  std::mt19937_64 rng(3);
  const auto cpa = CpaParams::create(ps, "cpa", 5, rng);
  const auto start = std::chrono::steady_clock::now();
  for (int c = 1; c <= 24; ++c) {
    for (int len = 1; len <= c; ++len) {
      ad::Tape tape;
      ForwardContext ctx{tape, ps};
      const auto x = window(rng, len);
      const auto e = embed_series(ctx, tape.constant(ad::column(x)), c, cpa);
      const int sn = len == 1 ? 0 : (c - len) / (len - 1);
      ASSERT_EQ(static_cast<int>(e.raw_positions.size()), len);
      ASSERT_EQ(std::count(e.filled_mask.begin(), e.filled_mask.end(), true), len);
      for (int m = 0; m < len; ++m) {
        const int j = e.raw_positions[static_cast<std::size_t>(m)];
        ASSERT_EQ(j, m * (sn + 1)) << "L=" << len << " c=" << c;
        ASSERT_LT(j, c);
        if (m > 0) {
          ASSERT_GT(j, e.raw_positions[static_cast<std::size_t>(m - 1)]);
        }
        ASSERT_TRUE(e.filled_mask[static_cast<std::size_t>(j)]);
        ASSERT_EQ(e.values.value()(j, 0), x[static_cast<std::size_t>(m)]);
      }
    }
  }
  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(), 1.0);
}

TEST(Embedding, TimeConsistencyAcrossIntervals) {
  // Over one hour a road sampled every `a` minutes and one sampled every `b`
  // minutes land observations of the same wall-clock instant close together.
  const int c = 12;
  for (int a : {5, 10, 15, 20, 30, 60}) {
    for (int b : {5, 10, 15, 20, 30, 60}) {
      if (b < a) continue;
      const auto fine = embedding_positions(60 / a, c);
      const auto coarse = embedding_positions(60 / b, c);
      const int sn = embedding_gap(60 / b, c);
      for (int m = 0; m < 60 / b; ++m) {
        const int tau = m * b;
        const int fine_pos = fine[static_cast<std::size_t>(tau / a)];
        EXPECT_LE(std::abs(coarse[static_cast<std::size_t>(m)] - fine_pos), sn + 1) << a << " vs " << b;
      }
    }
  }
}

TEST(Embedding, NearestCopyAblation) {
  ad::ParamSet ps;
  ad::Tape tape;
  ForwardContext ctx{tape, ps};
  const std::vector<double> x{1.0, 2.0, 3.0};
  const auto e = embed_nearest(ctx, tape.constant(ad::column(x)), 12);
  const auto v = ad::to_vector(e.values.value());
  EXPECT_EQ(v, (std::vector<double>{1, 1, 2, 2, 2, 2, 3, 3, 3, 3, 3, 3}));
  EXPECT_THROW(embed_nearest(ctx, tape.constant(ad::column(std::vector<double>(13, 0.0))), 12), std::invalid_argument);
}

namespace {

struct GcnFixture {
  ad::ParamSet ps;
  GcnParams gcn;
  std::mt19937_64 rng{11};
  GcnFixture(int width, int filters, int order, int hops) {
    gcn = GcnParams::create(ps, "gcn", width, filters, order, hops, rng);
  }
};

}  // namespace

TEST(Gcn, ZeroCorrelationSingleNeighbour) {
  GcnFixture f(4, 1, 5, 1);
  f.ps[f.gcn.correlation].value.setZero();
  f.ps[f.gcn.coefficients].value << 1, 0, 0, 0, 0;
  ad::Tape tape;
  ForwardContext ctx{tape, f.ps};
  Var target = tape.constant(random_mat(4, 1, f.rng));
  Var nb = tape.constant(random_mat(4, 1, f.rng));
  const auto h = gcn_hop_features(ctx, f.gcn, target, {{nb}});
  ASSERT_EQ(h.size(), 1u);
  EXPECT_EQ(h[0].value()(0, 0), 0.0);  // T_1(2 * 0.5 - 1)

  f.ps[f.gcn.coefficients].value << 0, 1, 0, 0, 0;
  ad::Tape t2;
  ForwardContext ctx2{t2, f.ps};
  const auto h2 = gcn_hop_features(ctx2, f.gcn, t2.constant(target.value()), {{t2.constant(nb.value())}});
  EXPECT_DOUBLE_EQ(h2[0].value()(0, 0), -1.0);  // T_2(0)
}

TEST(Gcn, HandEvaluatedKernel) {
  GcnFixture f(2, 1, 3, 1);
  f.ps[f.gcn.correlation].value << 1, 0, 0, 1;
  f.ps[f.gcn.coefficients].value << 0.5, -1.0, 2.0;
  ad::Tape tape;
  ForwardContext ctx{tape, f.ps};
  Mat ei(2, 1), ej(2, 1);
  ei << 1.0, 2.0;
  ej << 0.5, 0.25;
  const auto h = gcn_hop_features(ctx, f.gcn, tape.constant(ei), {{tape.constant(ej)}});
  const double u = 1.0 / (1.0 + std::exp(-1.0));
  const double a = 2.0 * u - 1.0;
  EXPECT_NEAR(h[0].value()(0, 0), 0.5 * a - (2 * a * a - 1) + 2.0 * (4 * a * a * a - 3 * a), 1e-14);
}

TEST(Gcn, EmptyHopsGiveZeros) {
  GcnFixture f(4, 3, 5, 2);
  ad::Tape tape;
  ForwardContext ctx{tape, f.ps};
  const auto h = gcn_hop_features(ctx, f.gcn, tape.constant(random_mat(4, 1, f.rng)), {{}, {}});
  ASSERT_EQ(h.size(), 2u);
  for (const auto& v : h) {
    EXPECT_EQ(v.rows(), 3);
    EXPECT_TRUE(v.value().isZero(0.0));
  }
}

TEST(Gcn, DuplicateNeighbourDoublesFeature) {
  GcnFixture f(5, 2, 5, 1);
  ad::Tape tape;
  ForwardContext ctx{tape, f.ps};
  Var target = tape.constant(random_mat(5, 1, f.rng));
  Var nb = tape.constant(random_mat(5, 1, f.rng));
  const auto one = gcn_hop_features(ctx, f.gcn, target, {{nb}});
  const auto two = gcn_hop_features(ctx, f.gcn, target, {{nb, nb}});
  EXPECT_TRUE(two[0].value().isApprox(2.0 * one[0].value(), 1e-14));
}

TEST(Gcn, PermutationInvariantWithinHop) {
  GcnFixture f(6, 3, 5, 2);
  ad::Tape tape;
  ForwardContext ctx{tape, f.ps};
  Var target = tape.constant(random_mat(6, 1, f.rng));
  std::vector<Var> ring;
  for (int i = 0; i < 5; ++i) ring.push_back(tape.constant(random_mat(6, 1, f.rng)));
  Var far = tape.constant(random_mat(6, 1, f.rng));
  const auto base = gcn_hop_features(ctx, f.gcn, target, {ring, {far}});
  for (int trial = 0; trial < 10; ++trial) {
    std::shuffle(ring.begin(), ring.end(), f.rng);
    const auto perm = gcn_hop_features(ctx, f.gcn, target, {ring, {far}});
    EXPECT_TRUE(perm[0].value().isApprox(base[0].value(), 1e-12));
    EXPECT_EQ(perm[1].value(), base[1].value());
  }
}

TEST(Gcn, ChebyshevArgumentStaysInsideDomain) {
  GcnFixture f(8, 4, 5, 1);
  for (int trial = 0; trial < 200; ++trial) {
    f.ps[f.gcn.correlation].value = random_mat(8, 32, f.rng, 0.5);
    const Mat& m = f.ps[f.gcn.correlation].value;
    const Mat& z = f.ps[f.gcn.coefficients].value;
    const Mat ei = random_mat(8, 1, f.rng), ej = random_mat(8, 1, f.rng);
    ad::Tape tape;
    ForwardContext ctx{tape, f.ps};
    const auto h = gcn_hop_features(ctx, f.gcn, tape.constant(ei), {{tape.constant(ej)}});
    for (int filter = 0; filter < 4; ++filter) {
      const double s = (ei.transpose() * m.middleCols(filter * 8, 8) * ej)(0, 0);
      const double arg = 2.0 * ad::sigmoid_scalar(s) - 1.0;
      ASSERT_GT(arg, -1.0);
      ASSERT_LT(arg, 1.0);
      double expect = 0.0;
      for (int l = 1; l <= 5; ++l) expect += z(filter, l - 1) * std::cos(l * std::acos(arg));
      EXPECT_NEAR(h[0].value()(filter, 0), expect, 1e-9);
    }
  }
}

TEST(Gcn, GraphWrapperNeedsEveryEmbedding) {
  GcnFixture f(4, 1, 3, 2);
  const auto g = testutil::star4();
  ad::Tape tape;
  ForwardContext ctx{tape, f.ps};
  std::map<int, Var> emb;
  for (int r : {0, 1, 2}) emb.emplace(r, tape.constant(random_mat(4, 1, f.rng)));
  EXPECT_THROW(gcn_aggregate(ctx, f.gcn, g, emb, 0), std::out_of_range);
  emb.emplace(3, tape.constant(random_mat(4, 1, f.rng)));
  const auto h = gcn_aggregate(ctx, f.gcn, g, emb, 0);
  const auto direct = gcn_hop_features(ctx, f.gcn, emb.at(0), {{emb.at(1)}, {emb.at(2), emb.at(3)}});
  EXPECT_EQ(h[1].value(), direct[1].value());
  EXPECT_THROW(gcn_hop_features(ctx, f.gcn, tape.constant(Mat::Zero(3, 1)), {{}, {}}), ad::ShapeError);
}

namespace {

HscConfig small_hsc(int hops = 2) {
  HscConfig c;
  c.width = 4;
  c.hops = hops;
  c.filters = 2;
  c.cpa_order = 3;
  c.gcn_order = 3;
  c.hidden = 3;
  c.lstm_layers = 2;
  c.fnn_layers = 2;
  c.horizon = 2;
  return c;
}

HscInputs three_node_inputs(std::mt19937_64& rng) {
  HscInputs in;
  in.target = 0;
  in.rings = {{1}, {2}};
  in.windows[0] = window(rng, 4);
  in.windows[1] = window(rng, 2);
  in.windows[2] = window(rng, 1);
  return in;
}

}  // namespace

TEST(Hsc, ZeroNetworkOutputsZero) {
  ad::ParamSet ps;
  std::mt19937_64 rng(5);
  const auto p = HscParams::create(ps, "hsc", Channel::Speed, small_hsc(), rng);
  testutil::zero_params(ps);
  for (int trial = 0; trial < 5; ++trial) {
    ad::Tape tape;
    ForwardContext ctx{tape, ps};
    const auto out = hsc_forward(ctx, p, three_node_inputs(rng));
    EXPECT_TRUE(out.prediction.value().isZero(0.0));
    EXPECT_EQ(out.prediction.rows(), 2);
  }
}

TEST(Hsc, IsolatedTargetDependsOnlyOnSelfWindow) {
  ad::ParamSet ps;
  std::mt19937_64 rng(6);
  const auto p = HscParams::create(ps, "hsc", Channel::Trend, small_hsc(1), rng);
  HscInputs in;
  in.target = 0;
  in.rings = {{}};
  in.windows[0] = window(rng, 3);
  in.windows[1] = window(rng, 3);
  ad::Tape t1;
  ForwardContext c1{t1, ps};
  const auto a = hsc_forward(c1, p, in);
  EXPECT_TRUE(a.hop_features[0].value().isZero(0.0));
  in.windows[1] = window(rng, 3);
  ad::Tape t2;
  ForwardContext c2{t2, ps};
  EXPECT_EQ(hsc_forward(c2, p, in).prediction.value(), a.prediction.value());
  in.windows[0][1] += 0.5;
  ad::Tape t3;
  ForwardContext c3{t3, ps};
  EXPECT_NE(hsc_forward(c3, p, in).prediction.value(), a.prediction.value());
}

TEST(Hsc, RingCountAndMissingWindowAreErrors) {
  ad::ParamSet ps;
  std::mt19937_64 rng(7);
  const auto p = HscParams::create(ps, "hsc", Channel::Speed, small_hsc(2), rng);
  auto in = three_node_inputs(rng);
  in.rings = {{1}};
  ad::Tape tape;
  ForwardContext ctx{tape, ps};
  EXPECT_THROW(hsc_forward(ctx, p, in), std::invalid_argument);
  in = three_node_inputs(rng);
  in.windows.erase(2);
  EXPECT_THROW(hsc_forward(ctx, p, in), std::out_of_range);
}

TEST(Hsc, ParameterGroupsPerChannelAreDistinct) {
  ad::ParamSet ps;
  std::mt19937_64 rng(8);
  const auto a = HscParams::create(ps, "hsc_speed", Channel::Speed, small_hsc(), rng);
  const auto b = HscParams::create(ps, "hsc_trend", Channel::Trend, small_hsc(), rng);
  EXPECT_NE(a.gcn.correlation, b.gcn.correlation);
  EXPECT_NE(a.cpa->coefficients, b.cpa->coefficients);
  EXPECT_EQ(ps[a.gcn.correlation].value.rows(), 4);
  EXPECT_EQ(ps[a.gcn.correlation].value.cols(), 8);
  EXPECT_EQ(ps[a.gcn.coefficients].value.rows(), 2);
  EXPECT_EQ(ps[a.gcn.coefficients].value.cols(), 3);
}

TEST(Hsc, FiniteDifferenceOnThreeNodes) {
  ad::ParamSet ps;
  std::mt19937_64 rng(9);
  const auto p = HscParams::create(ps, "hsc", Channel::Deviation, small_hsc(), rng);
  const auto in = three_node_inputs(rng);
  const auto r = testutil::check_param_gradients(ps, [&](ad::Tape& tape) {
    ForwardContext ctx{tape, ps};
    const auto out = hsc_forward(ctx, p, in);
    return ad::sum(ad::square(ad::add_scalar(out.prediction, -0.3)));
  });
  EXPECT_LT(r.worst, 1e-4) << r.where;
  EXPECT_EQ(r.checked, static_cast<std::size_t>([&] {
              Eigen::Index n = 0;
              for (const auto& q : ps) n += q.value.size();
              return n;
            }()));
}
