#include <gwcouple/numerics.hpp>
#include <gwcouple/unif_sampling.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <map>

using namespace gwcouple;

namespace {

// |freq - q| within three binomial standard deviations.
void expect_3sigma(std::uint64_t hits, std::uint64_t n, double q, const char* what) {
  const double f = static_cast<double>(hits) / static_cast<double>(n);
  const double sd = std::sqrt(q * (1 - q) / static_cast<double>(n));
  EXPECT_LE(std::abs(f - q), 3 * sd) << what << ": freq " << f << " vs " << q;
}

}  // namespace

TEST(Rng, Reproducible) {
  Rng a(7), b(7);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next(), b.next());
  EXPECT_NE(Rng::keyed(1, {2}).next(), Rng::keyed(1, {3}).next());
  EXPECT_EQ(Rng::keyed(1, {2, 3}).next(), Rng::keyed(1, {2, 3}).next());
}

TEST(Rng, BelowInRange) {
  Rng r(3);
  std::vector<int> hits(7, 0);
  for (int i = 0; i < 70000; ++i) ++hits[r.below(7)];
  for (int h : hits) expect_3sigma(h, 70000, 1.0 / 7, "below(7)");
}

TEST(Uniform, TinySizesAreDeterministic) {
  Rng r(1);
  for (int i = 0; i < 100; ++i) {
    EXPECT_EQ(sample_uniform_tree(1, r), OrderedTree());
    EXPECT_EQ(encode(sample_uniform_tree(2, r)), "[[]]");
  }
  EXPECT_THROW(sample_uniform_tree(0, r), std::domain_error);
}

TEST(Uniform, SizeThreeBalanced) {
  Rng r(11);
  const std::uint64_t n = 100000;
  std::uint64_t path = 0;
  for (std::uint64_t i = 0; i < n; ++i)
    if (encode(sample_uniform_tree(3, r)) == "[[[]]]") ++path;
  expect_3sigma(path, n, 0.5, "path shape");
}

TEST(Uniform, SizeFiveCoversAllShapes) {
  Rng r(12);
  std::map<std::string, std::uint64_t> counts;
  const std::uint64_t n = 140000;
  for (std::uint64_t i = 0; i < n; ++i) ++counts[encode(sample_uniform_tree(5, r))];
  ASSERT_EQ(counts.size(), 14U);
  for (const auto& [shape, c] : counts) expect_3sigma(c, n, 1.0 / 14, shape.c_str());
}

TEST(Uniform, LargeSizeIsValid) {
  Rng r(5);
  auto t = sample_uniform_tree(100000, r);
  EXPECT_EQ(t.size(), 100000U);
}

TEST(GaltonWatson, SingletonFrequency) {
  Rng r(21);
  const std::uint64_t n = 100000;
  std::uint64_t single = 0, three = 0;
  for (std::uint64_t i = 0; i < n; ++i) {
    auto t = sample_gw(0.5, r);
    if (t.size() == 1) ++single;
    if (t.size() == 3 && t.status().clean()) ++three;
  }
  expect_3sigma(single, n, 0.5, "singleton");
  expect_3sigma(three, n, 1.0 / 16, "size 3");
}

TEST(GaltonWatson, ShapeUniformGivenSize) {
  Rng r(22);
  std::uint64_t path = 0, size3 = 0;
  for (int i = 0; i < 400000; ++i) {
    auto t = sample_gw(0.5, r);
    if (t.size() != 3) continue;
    ++size3;
    if (t.root_degree() == 1) ++path;
  }
  expect_3sigma(path, size3, 0.5, "path given size 3");
}

TEST(GaltonWatson, CapsAreFlagged) {
  Rng r(23);
  bool seen_cap = false;
  for (int i = 0; i < 200 && !seen_cap; ++i) {
    auto t = sample_gw(0.75, r, Caps{8, 1000});
    if (!t.status().clean()) {
      seen_cap = true;
      EXPECT_TRUE(t.status().has(TruncationReason::DepthCap) || t.status().has(TruncationReason::SizeCap));
      EXPECT_LE(t.size(), 1000U);
    }
  }
  EXPECT_TRUE(seen_cap);
  EXPECT_THROW(sample_gw(1.0, r), std::domain_error);
  EXPECT_THROW(sample_gw(0.0, r), std::domain_error);
}

TEST(GaltonWatson, GeometricMean) {
  Rng r(24);
  double sum = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) sum += static_cast<double>(draw_geometric(0.75, r));
  // Mean p/(1-p) = 3, variance p/(1-p)^2 = 12.
  EXPECT_NEAR(sum / n, 3.0, 3 * std::sqrt(12.0 / n));
}

TEST(Naive, FirstSlotInfiniteWithProbabilityP) {
  Rng r(31);
  const std::uint64_t n = 100000;
  std::uint64_t first_inf = 0, after_inf = 0, after_inf_n = 0, after_fin = 0, after_fin_n = 0;
  const NaiveSampler naive(0.75, Caps{1, 1U << 20});
  for (std::uint64_t i = 0; i < n; ++i) {
    auto s = naive.sample(r);
    const auto& pat = s.root_pattern;
    ASSERT_FALSE(pat.empty());
    if (pat[0].is_infinite()) {
      ++first_inf;
      ++after_inf_n;
      if (pat.size() > 1 && pat[1].is_infinite()) ++after_inf;
    } else {
      ++after_fin_n;
      if (pat[1].is_infinite()) ++after_fin;
    }
  }
  expect_3sigma(first_inf, n, 0.75, "first infinite");
  expect_3sigma(after_inf, after_inf_n, 0.5, "second infinite after an infinite");
  expect_3sigma(after_fin, after_fin_n, 0.75, "second infinite after a finite");
}

TEST(Naive, EveryRootHasAnInfiniteChild) {
  Rng r(32);
  for (int i = 0; i < 2000; ++i) {
    auto s = sample_naive_conditioned(0.6, r, Caps{2, 1U << 20});
    EXPECT_TRUE(std::any_of(s.root_pattern.begin(), s.root_pattern.end(), [](auto o) { return o.is_infinite(); }));
    EXPECT_GE(s.tree.frontier_count(), 1U);
  }
  EXPECT_THROW(sample_naive_conditioned(0.5, r), std::domain_error);
}
