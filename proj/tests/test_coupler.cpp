#include <gwcouple/coupler.hpp>

#include <gtest/gtest.h>

#include <memory>

using namespace gwcouple;

namespace {

Rational R(long long a, long long b = 1) { return Rational(a, b); }

std::shared_ptr<const ChainPlans> plans7() {
  static auto p = std::make_shared<const ChainPlans>(7, std::nullopt);
  return p;
}

CouplerConfig config7(bool tiny = false) {
  CouplerConfig c;
  c.exact_cap = 7;
  c.exact_tiny = tiny;
  return c;
}

}  // namespace

TEST(Containment, NegativeControl) {
  std::vector<TruncatedTree> trees{decode_truncated("[[]*,[]]", 1), decode_truncated("[[]*]", 1)};
  auto v = verify_containment(trees);
  EXPECT_FALSE(v.all_nested());
  ASSERT_TRUE(v.first_violation.has_value());
  EXPECT_EQ(v.first_violation->inner, 0U);
  EXPECT_EQ(v.first_violation->outer, 1U);
  EXPECT_EQ(v.first_violation->witness, (VertexAddress{2}));
  EXPECT_EQ(v.matrix[0][1], false);
  EXPECT_EQ(v.matrix[0][0], true);
  EXPECT_FALSE(v.matrix[1][0].has_value());
}

TEST(Coupler, RejectsBadGrids) {
  EXPECT_THROW(Coupler({}, config7(), plans7()), std::domain_error);
  EXPECT_THROW(Coupler({R(3, 4), R(1, 2)}, config7(), plans7()), std::domain_error);
  EXPECT_THROW(Coupler({R(1, 2), R(1)}, config7(), plans7()), std::domain_error);
  EXPECT_THROW(Coupler({R(2, 5)}, config7(), plans7()), std::domain_error);
  EXPECT_THROW(Coupler({R(1, 2)}, CouplerConfig{}, plans7()), std::domain_error);  // exact_cap 9 > 7
  Coupler c({R(1, 2)}, config7(), plans7());
  EXPECT_THROW(c.sample(0, Rng(1)), std::domain_error);
}

TEST(Coupler, NestedOnEveryGrid) {
  const std::vector<std::vector<Rational>> grids{{R(1, 2), R(3, 4)}, {R(3, 4), R(9, 10)}, {R(1, 2), R(3, 5), R(9, 10)}};
  for (const auto& g : grids) {
    Coupler c(g, config7(), plans7());
    for (std::uint32_t depth = 1; depth <= 3; ++depth)
      for (std::uint64_t i = 0; i < 1500; ++i) {
        auto s = c.sample(depth, 77, i);
        ASSERT_TRUE(s.verdict.all_nested()) << depth << " " << i;
        ASSERT_EQ(s.trees.size(), g.size());
        for (const auto& t : s.trees) ASSERT_GE(t.frontier_count(), 1U);
      }
  }
}

TEST(Coupler, TinyModeNested) {
  Coupler c({R(1, 2), R(3, 4)}, config7(true), plans7());
  std::uint64_t mixed = 0;
  for (std::uint64_t i = 0; i < 3000; ++i) {
    auto s = c.sample(2, 5, i);
    ASSERT_TRUE(s.verdict.all_nested());
    mixed += s.mode_counts[static_cast<std::size_t>(CouplingMode::MixedExact)];
  }
  EXPECT_GT(mixed, 0U);
}

TEST(Coupler, Reproducible) {
  Coupler c({R(1, 2), R(3, 4)}, config7(), plans7());
  for (std::uint64_t i = 0; i < 200; ++i) {
    auto a = c.sample(3, 9, i), b = c.sample(3, 9, i);
    EXPECT_EQ(a.trees, b.trees);
    EXPECT_EQ(coupled_sample_json(a).dump(), coupled_sample_json(b).dump());
  }
}

TEST(Coupler, ComponentsAtHalfHaveOneLine) {
  Coupler c({R(1, 2), R(9, 10)}, config7(), plans7());
  for (std::uint64_t i = 0; i < 2000; ++i) ASSERT_EQ(c.sample(3, 4, i).trees[0].frontier_count(), 1U);
}

TEST(Coupler, SingleParameterMatchesConditionedSampler) {
  // With one parameter there is nothing to couple, so the depth-1 prefix is the
  // conditioned sampler's prefix on the same substreams.
  Coupler c({R(3, 4)}, config7(), plans7());
  ConditionedSampler s(0.75);
  for (std::uint64_t i = 0; i < 500; ++i) {
    const Rng base = Rng::keyed(3, {i});
    EXPECT_EQ(c.sample(1, base).trees[0].degree_vector(), s.sample(1, base).tree.degree_vector());
  }
}

TEST(RootTransport, MarginalsAndOrder) {
  const auto& plans = *plans7();
  for (const Rational& p : {R(1, 2), R(3, 4)}) {
    for (unsigned k = 2; k <= 4; ++k) {
      auto t = RootDegreeTransport::build(k, p, plans.trees(k));
      ASSERT_TRUE(t.has_value()) << k;
      std::vector<Rational> deg(k);
      for (const auto& tr : plans.trees(k)) deg[tr.root_degree()] += Rational(1, static_cast<long long>(plans.trees(k).size()));
      Rational tail = 1;
      for (unsigned c = 1; c <= t->cells(); ++c) {
        const Rational want = c < t->cells() ? root_degree_probability(p, c) : tail;
        tail -= want;
        EXPECT_EQ(t->cell_mass(c), want) << k << " " << c;
        Rational col = 0;
        for (unsigned d = 0; d < k; ++d) {
          col += t->weight(d, c);
          if (t->weight(d, c) > 0) {
            EXPECT_LE(d, c);
          }
        }
        EXPECT_EQ(col, want);
      }
      for (unsigned d = 0; d < k; ++d) {
        Rational row = 0;
        for (unsigned c = 1; c <= t->cells(); ++c) row += t->weight(d, c);
        EXPECT_EQ(row, deg[d]) << k << " " << d;
        EXPECT_EQ(t->degree_mass(d), deg[d]);
      }
    }
  }
}

TEST(Corollary, SmallRun) {
  auto r = corollary_check(5, R(3, 5), 2, 500, 1, config7(), 1, plans7());
  EXPECT_EQ(r.samples, 500U);
  EXPECT_EQ(r.contained, 500U);
  std::uint64_t total = 0;
  for (const auto& [s, n] : r.shape_counts) total += n;
  EXPECT_EQ(total, 500U);
  EXPECT_THROW(corollary_check(8, R(3, 5), 2, 10, 1, config7(), 1, plans7()), std::domain_error);
}

TEST(NaiveDemo, Rows) {
  auto a = naive_failure_demo(R(6, 10), R(7, 10));
  EXPECT_EQ(a.threshold, R(4, 10));
  EXPECT_TRUE(a.fails);
  auto b = naive_failure_demo(R(6, 10), R(9, 10));
  EXPECT_EQ(b.threshold, R(8, 10));
  EXPECT_FALSE(b.fails);
  auto c = naive_failure_demo(R(51, 100), R(52, 100));
  EXPECT_EQ(c.threshold, R(4, 100));
  EXPECT_TRUE(c.fails);
  EXPECT_THROW(naive_failure_demo(R(7, 10), R(6, 10)), std::domain_error);
  EXPECT_THROW(naive_failure_demo(R(1, 2), R(6, 10)), std::domain_error);
}
