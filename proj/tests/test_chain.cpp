#include <gwcouple/chain.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <map>
#include <sstream>

using namespace gwcouple;

namespace {

Rational plan_weight(const TransportPlan& plan, const std::vector<OrderedTree>& small,
                     const std::vector<OrderedTree>& large, std::string_view a, std::string_view b) {
  for (const auto& e : plan.entries)
    if (encode(small[e.from]) == a && encode(large[e.to]) == b) return plan.weight(e);
  return 0;
}

const ChainPlans& shared_plans() {
  static const ChainPlans plans(7, std::nullopt);
  return plans;
}

}  // namespace

TEST(Transport, SizeOne) {
  auto plan = build_transport(1);
  ASSERT_EQ(plan.entries.size(), 1U);
  EXPECT_EQ(plan.weight(plan.entries[0]), 1);
}

TEST(Transport, SizeTwo) {
  auto plan = build_transport(2);
  auto s = enumerate_trees(2), l = enumerate_trees(3);
  EXPECT_EQ(plan_weight(plan, s, l, "[[]]", "[[[]]]"), Rational(1, 2));
  EXPECT_EQ(plan_weight(plan, s, l, "[[]]", "[[],[]]"), Rational(1, 2));
}

TEST(Transport, SizeThreeMarginalsAndSupport) {
  auto plan = build_transport(3);
  auto s = enumerate_trees(3), l = enumerate_trees(4);
  EXPECT_TRUE(check_plan(plan, s, l).exact());
  // The tree with a root of degree two and a grandchild under the first child
  // is reachable from both size-3 trees and receives 1/5 in total.
  EXPECT_EQ(plan_weight(plan, s, l, "[[[]]]", "[[[]],[]]") + plan_weight(plan, s, l, "[[],[]]", "[[[]],[]]"),
            Rational(1, 5));
  // Each size-4 tree has mass 1/5, each size-3 tree 1/2.
  std::map<std::string, Rational> from, to;
  for (const auto& e : plan.entries) {
    from[encode(s[e.from])] += plan.weight(e);
    to[encode(l[e.to])] += plan.weight(e);
    EXPECT_TRUE(subset_of(s[e.from], l[e.to]));
  }
  for (const auto& [t, w] : from) EXPECT_EQ(w, Rational(1, 2)) << t;
  ASSERT_EQ(to.size(), 5U);
  for (const auto& [t, w] : to) EXPECT_EQ(w, Rational(1, 5)) << t;
}

TEST(Transport, FeasibleUpToNine) {
  for (unsigned k = 1; k <= 9; ++k) {
    auto s = enumerate_trees(k), l = enumerate_trees(k + 1);
    auto plan = build_transport(k, s, l);
    EXPECT_TRUE(check_plan(plan, s, l).exact()) << k;
  }
}

TEST(Transport, CheckPlanCatchesBrokenMarginal) {
  auto s = enumerate_trees(3), l = enumerate_trees(4);
  auto plan = build_transport(3, s, l);
  plan.entries[0].units += 1;
  EXPECT_FALSE(check_plan(plan, s, l).exact());
}

TEST(Transport, CsvFormat) {
  auto s = enumerate_trees(2), l = enumerate_trees(3);
  std::ostringstream os;
  write_plan_csv(os, build_transport(2, s, l), s, l);
  EXPECT_EQ(os.str(),
            "tree_k,tree_k1,weight_numerator,weight_denominator\n"
            "\"[[]]\",\"[[[]]]\",1,2\n"
            "\"[[]]\",\"[[],[]]\",1,2\n");
}

TEST(Transport, CacheRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "gwcouple_plan_cache_test";
  std::filesystem::remove_all(dir);
  ChainPlans first(5, dir);
  ASSERT_TRUE(std::filesystem::exists(dir / "plan_k5.csv"));
  ChainPlans second(5, dir);
  for (unsigned k = 1; k <= 5; ++k) {
    const auto& a = first.plan(k);
    const auto& b = second.plan(k);
    ASSERT_EQ(a.entries.size(), b.entries.size());
    for (std::size_t e = 0; e < a.entries.size(); ++e) {
      EXPECT_EQ(a.entries[e].from, b.entries[e].from);
      EXPECT_EQ(a.entries[e].to, b.entries[e].to);
      EXPECT_EQ(a.entries[e].units, b.entries[e].units);
    }
  }
  // A corrupted cache file is rebuilt rather than trusted.
  { std::ofstream(dir / "plan_k3.csv") << "tree_k,tree_k1,weight_numerator,weight_denominator\n\"[[]]\",\"[]\",1,1\n"; }
  ChainPlans third(5, dir);
  EXPECT_TRUE(check_plan(third.plan(3), third.trees(3), third.trees(4)).exact());
  std::filesystem::remove_all(dir);
}

TEST(ChainStep, FromSizeTwoIsBalanced) {
  const auto& plans = shared_plans();
  Rng r(1);
  const auto start = decode("[[]]");
  const int n = 100000;
  int path = 0;
  for (int i = 0; i < n; ++i) {
    auto t = chain_step_exact(start, plans, r);
    ASSERT_TRUE(subset_of(start, t));
    path += encode(t) == "[[[]]]";
  }
  EXPECT_NEAR(path / double(n), 0.5, 3 * std::sqrt(0.25 / n));
}

TEST(ChainStep, RejectsUnknownSize) {
  const auto& plans = shared_plans();
  Rng r(1);
  EXPECT_THROW(chain_step_exact(enumerate_trees(8)[0], plans, r), std::out_of_range);
}

TEST(Heuristic, Examples) {
  Rng r(2);
  EXPECT_EQ(encode(heuristic_grow(OrderedTree(), r)), "[[]]");
  const int n = 100000;
  int path = 0;
  for (int i = 0; i < n; ++i) path += encode(heuristic_grow(decode("[[]]"), r)) == "[[[]]]";
  EXPECT_NEAR(path / double(n), 0.5, 3 * std::sqrt(0.25 / n));
  for (const auto& t : enumerate_trees(6)) {
    auto g = heuristic_grow(t, r);
    EXPECT_EQ(g.size(), t.size() + 1);
    EXPECT_TRUE(subset_of(t, g));
  }
}

TEST(Chain, NestedAndFlagged) {
  const auto& plans = shared_plans();
  Rng r(3);
  for (int i = 0; i < 300; ++i) {
    auto c = sample_chain(20, 7, plans, r);
    ASSERT_EQ(c.size(), 20U);
    EXPECT_EQ(c.exact_upto(), 8U);
    for (std::uint64_t j = 1; j <= 20; ++j) {
      auto tj = c.tree(j);
      ASSERT_EQ(tj.size(), j);
      if (j > 1) {
        ASSERT_TRUE(subset_of(c.tree(j - 1), tj));
      }
    }
    for (std::size_t s = 0; s < c.modes().size(); ++s)
      EXPECT_EQ(c.modes()[s], s + 1 <= 7 ? StepMode::Exact : StepMode::Heuristic);
  }
}

TEST(Chain, AllExactWithinCap) {
  const auto& plans = shared_plans();
  Rng r(4);
  auto c = sample_chain(7, 7, plans, r);
  for (auto m : c.modes()) EXPECT_EQ(m, StepMode::Exact);
}

TEST(Chain, SizeFiveUniform) {
  const auto& plans = shared_plans();
  Rng r(5);
  std::map<std::string, int> counts;
  const int n = 140000;
  for (int i = 0; i < n; ++i) ++counts[encode(sample_chain(5, 7, plans, r).tree(5))];
  ASSERT_EQ(counts.size(), 14U);
  for (const auto& [t, c] : counts) EXPECT_NEAR(c / double(n), 1.0 / 14, 3 * std::sqrt((1.0 / 14) * (13.0 / 14) / n)) << t;
}

TEST(Chain, TruncatedMatchesTreeTruncation) {
  const auto& plans = shared_plans();
  Rng r(6);
  auto c = sample_chain(30, 7, plans, r);
  for (std::uint32_t h = 0; h < 5; ++h)
    EXPECT_EQ(c.truncated(30, h), TruncatedTree::from_tree(c.tree(30), h).degree_vector()) << h;
}
