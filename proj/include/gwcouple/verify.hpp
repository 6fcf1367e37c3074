#pragma once

// Test harness: chi-square machinery, the nine verification suites and their
// reports. Every suite is a deterministic function of its configuration.

#include "gwcouple/chain.hpp"
#include "gwcouple/coupler.hpp"
#include "gwcouple/infinite.hpp"
#include "gwcouple/ladder.hpp"
#include "gwcouple/numerics.hpp"
#include "gwcouple/parallel.hpp"
#include "gwcouple/rational.hpp"
#include "gwcouple/rng.hpp"
#include "gwcouple/trees.hpp"
#include "gwcouple/unif_sampling.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace gwcouple {

using CountMap = std::map<std::string, std::uint64_t>;
using ProbMap = std::map<std::string, double>;

struct ChiSquareResult {
  double statistic = 0;
  unsigned dof = 0;
  double p_value = 1;
  std::size_t cells = 0;  // after merging
  std::uint64_t n = 0;
};

namespace detail {

struct Cell {
  double observed = 0;
  double expected = 0;
};

/// Pools cells with expected count below the minimum, then folds the pool into
/// the smallest remaining cell while it is still too small.
inline std::vector<Cell> merge_cells(std::vector<Cell> cells, Cell pool, double min_expected) {
  std::vector<Cell> keep;
  for (const auto& c : cells) {
    if (c.expected < min_expected) {
      pool.observed += c.observed;
      pool.expected += c.expected;
    } else {
      keep.push_back(c);
    }
  }
  std::sort(keep.begin(), keep.end(), [](const Cell& a, const Cell& b) { return a.expected < b.expected; });
  while (pool.expected > 0 && pool.expected < min_expected && !keep.empty()) {
    pool.observed += keep.front().observed;
    pool.expected += keep.front().expected;
    keep.erase(keep.begin());
  }
  if (pool.expected > 0 || pool.observed > 0) keep.push_back(pool);
  return keep;
}

inline double chi_square_upper_tail(double statistic, unsigned dof) {
  if (!std::isfinite(statistic)) return 0.0;
  boost::math::chi_squared dist(dof);
  return boost::math::cdf(boost::math::complement(dist, statistic));
}

}  // namespace detail

/// Goodness of fit of observed counts to expected probabilities. Keys missing
/// from `expected` and the mass 1 - sum(expected) form an "other" cell; cells
/// with expected count below min_expected are merged into it.
inline ChiSquareResult chi_square(const CountMap& observed, const ProbMap& expected, double min_expected = 5) {
  ChiSquareResult r;
  for (const auto& [k, n] : observed) r.n += n;
  const double n = static_cast<double>(r.n);
  std::vector<detail::Cell> cells;
  double listed = 0;
  for (const auto& [key, q] : expected) {
    auto it = observed.find(key);
    cells.push_back({it == observed.end() ? 0.0 : static_cast<double>(it->second), n * q});
    listed += q;
  }
  detail::Cell other;
  for (const auto& [key, count] : observed)
    if (!expected.contains(key)) other.observed += static_cast<double>(count);
  const double rest = 1.0 - listed;
  other.expected = rest > 1e-12 ? n * rest : 0.0;
  auto merged = detail::merge_cells(std::move(cells), other, min_expected);
  if (merged.size() < 2) throw std::domain_error("chi_square: fewer than 2 cells after merging");
  for (const auto& c : merged) {
    if (c.expected <= 0) {
      if (c.observed > 0) r.statistic = std::numeric_limits<double>::infinity();
      continue;
    }
    r.statistic += (c.observed - c.expected) * (c.observed - c.expected) / c.expected;
  }
  r.cells = merged.size();
  r.dof = static_cast<unsigned>(merged.size() - 1);
  r.p_value = detail::chi_square_upper_tail(r.statistic, r.dof);
  return r;
}

inline ProbMap to_prob_map(const std::map<std::string, Rational>& law) {
  ProbMap out;
  for (const auto& [k, q] : law) out[k] = to_double(q);
  return out;
}

/// Homogeneity of two samples over the same categories (2 x C table).
inline ChiSquareResult chi_square_two_sample(const CountMap& a, const CountMap& b, double min_expected = 5) {
  ChiSquareResult r;
  double na = 0, nb = 0;
  for (const auto& [k, n] : a) na += static_cast<double>(n);
  for (const auto& [k, n] : b) nb += static_cast<double>(n);
  r.n = static_cast<std::uint64_t>(na + nb);
  if (na == 0 || nb == 0) throw std::domain_error("chi_square_two_sample: empty sample");
  std::map<std::string, std::pair<double, double>> cols;
  for (const auto& [k, n] : a) cols[k].first += static_cast<double>(n);
  for (const auto& [k, n] : b) cols[k].second += static_cast<double>(n);
  const double smaller = std::min(na, nb) / (na + nb);

  // Merge on the smaller row's expected count so both rows meet the minimum.
  std::vector<std::pair<double, double>> keep;
  std::pair<double, double> pool{0, 0};
  for (const auto& [k, c] : cols) {
    if ((c.first + c.second) * smaller < min_expected) {
      pool.first += c.first;
      pool.second += c.second;
    } else {
      keep.push_back(c);
    }
  }
  std::sort(keep.begin(), keep.end(), [](const auto& x, const auto& y) { return x.first + x.second < y.first + y.second; });
  while (pool.first + pool.second > 0 && (pool.first + pool.second) * smaller < min_expected && !keep.empty()) {
    pool.first += keep.front().first;
    pool.second += keep.front().second;
    keep.erase(keep.begin());
  }
  if (pool.first + pool.second > 0) keep.push_back(pool);
  if (keep.size() < 2) throw std::domain_error("chi_square_two_sample: fewer than 2 cells after merging");
  const double total = na + nb;
  for (const auto& [x, y] : keep) {
    const double col = x + y;
    const double ea = na * col / total, eb = nb * col / total;
    r.statistic += (x - ea) * (x - ea) / ea + (y - eb) * (y - eb) / eb;
  }
  r.cells = keep.size();
  r.dof = static_cast<unsigned>(keep.size() - 1);
  r.p_value = detail::chi_square_upper_tail(r.statistic, r.dof);
  return r;
}

enum class CaseMode { Exact, Statistical, Report };

inline const char* to_string(CaseMode m) {
  switch (m) {
    case CaseMode::Exact: return "exact";
    case CaseMode::Statistical: return "statistical";
    case CaseMode::Report: return "report";
  }
  return "?";
}

struct TestCase {
  std::string description;
  CaseMode mode = CaseMode::Exact;
  double statistic = 0;  // residual or violation count (Exact), chi-square statistic otherwise
  double threshold = 0;  // allowed value (Exact) or corrected significance level
  double p_value = 1;
  std::uint64_t n = 0;
  unsigned dof = 0;
  bool pass = true;
  std::string detail;
};

enum class Suite { Identities, Monotonicity, Transport, Uniformity, Duality, PatternMarginals, Coupling, Corollary, NaiveDemo };

inline constexpr std::array<Suite, 9> kAllSuites = {Suite::Identities,       Suite::Monotonicity, Suite::Transport,
                                                    Suite::Uniformity,       Suite::Duality,      Suite::PatternMarginals,
                                                    Suite::Coupling,         Suite::Corollary,    Suite::NaiveDemo};

inline const char* to_string(Suite s) {
  switch (s) {
    case Suite::Identities: return "identities";
    case Suite::Monotonicity: return "monotonicity";
    case Suite::Transport: return "transport";
    case Suite::Uniformity: return "uniformity";
    case Suite::Duality: return "duality";
    case Suite::PatternMarginals: return "pattern_marginals";
    case Suite::Coupling: return "coupling";
    case Suite::Corollary: return "corollary";
    case Suite::NaiveDemo: return "naive_demo";
  }
  return "?";
}

inline std::optional<Suite> parse_suite(std::string_view name) {
  for (auto s : kAllSuites)
    if (name == to_string(s)) return s;
  return std::nullopt;
}

namespace detail {
inline std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}
}  // namespace detail

struct TestReport {
  std::string suite;
  std::uint64_t seed = 0;
  std::vector<TestCase> cases;
  double runtime_seconds = 0;  // not part of the serialized bytes unless asked for

  bool passed() const {
    return std::all_of(cases.begin(), cases.end(), [](const TestCase& c) { return c.pass; });
  }

  /// Applies the significance level with Bonferroni correction across the
  /// suite's statistical cases.
  void finalize(double significance) {
    const auto m = std::count_if(cases.begin(), cases.end(), [](const TestCase& c) { return c.mode == CaseMode::Statistical; });
    for (auto& c : cases) {
      if (c.mode == CaseMode::Statistical) {
        c.threshold = significance / static_cast<double>(std::max<std::ptrdiff_t>(m, 1));
        c.pass = c.p_value >= c.threshold;
      } else if (c.mode == CaseMode::Report) {
        c.pass = true;
      }
    }
  }

  std::string text(bool with_runtime = false) const {
    std::ostringstream os;
    os << "suite " << suite << " seed " << seed << (passed() ? " PASS" : " FAIL") << '\n';
    for (const auto& c : cases) {
      os << "  [" << (c.mode == CaseMode::Report ? "INFO" : c.pass ? "PASS" : "FAIL") << "] " << to_string(c.mode) << "  "
         << c.description;
      if (c.mode == CaseMode::Exact) {
        os << "  value=" << detail::fmt(c.statistic) << " allowed=" << detail::fmt(c.threshold);
      } else {
        os << "  chi2=" << detail::fmt(c.statistic) << " dof=" << c.dof << " p=" << detail::fmt(c.p_value);
        if (c.mode == CaseMode::Statistical) os << " alpha=" << detail::fmt(c.threshold);
        os << " N=" << c.n;
      }
      if (!c.detail.empty()) os << "  (" << c.detail << ')';
      os << '\n';
    }
    if (with_runtime) os << "  runtime " << detail::fmt(runtime_seconds) << " s\n";
    return os.str();
  }

  nlohmann::json json(bool with_runtime = false) const {
    nlohmann::json cs = nlohmann::json::array();
    for (const auto& c : cases) {
      nlohmann::json j{{"description", c.description}, {"mode", to_string(c.mode)}, {"statistic", c.statistic},
                       {"threshold", c.threshold},     {"pass", c.pass}};
      if (c.mode != CaseMode::Exact) {
        j["p_value"] = c.p_value;
        j["n"] = c.n;
        j["dof"] = c.dof;
      }
      if (!c.detail.empty()) j["detail"] = c.detail;
      cs.push_back(j);
    }
    nlohmann::json out{{"suite", suite}, {"seed", seed}, {"passed", passed()}, {"cases", cs}};
    if (with_runtime) out["runtime_seconds"] = runtime_seconds;
    return out;
  }
};

struct SuiteConfig {
  std::uint64_t seed = 20240601;
  unsigned threads = 0;  // 0: hardware concurrency
  double scale = 1.0;    // multiplies every Monte Carlo sample count
  double significance = 1e-3;
  double min_expected = 5;
  unsigned exact_cap = 9;
  std::shared_ptr<const ChainPlans> plans;  // shared plans; built on demand when empty
};

namespace detail {

inline std::uint64_t scaled(const SuiteConfig& cfg, std::uint64_t n) {
  return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::llround(static_cast<double>(n) * cfg.scale)));
}

inline std::shared_ptr<const ChainPlans> plans_for(const SuiteConfig& cfg) {
  if (cfg.plans && cfg.plans->exact_cap() >= cfg.exact_cap) return cfg.plans;
  return std::make_shared<const ChainPlans>(cfg.exact_cap);
}

struct Counts {
  CountMap counts;
  void merge(const Counts& o) {
    for (const auto& [k, n] : o.counts) counts[k] += n;
  }
};

inline TestCase statistical(std::string description, const ChiSquareResult& r, std::string detail = {}) {
  TestCase c;
  c.description = std::move(description);
  c.mode = CaseMode::Statistical;
  c.statistic = r.statistic;
  c.p_value = r.p_value;
  c.n = r.n;
  c.dof = r.dof;
  c.detail = std::move(detail);
  return c;
}

inline TestCase exact(std::string description, double value, std::string detail = {}, double allowed = 0) {
  TestCase c;
  c.description = std::move(description);
  c.mode = CaseMode::Exact;
  c.statistic = value;
  c.threshold = allowed;
  c.pass = value <= allowed;
  c.detail = std::move(detail);
  return c;
}

inline std::string pstr(const Rational& p) { return to_string(p); }

// --- suites ------------------------------------------------------------------

inline void suite_identities(TestReport& rep) {
  std::vector<Rational> grid;
  for (int i = 50; i <= 99; ++i) grid.emplace_back(i, 100);
  std::uint64_t bad_partition = 0, bad_induction = 0, bad_fixed = 0, checks = 0;
  for (const auto& p : grid) {
    for (unsigned n = 0; n <= 30; ++n) {
      ++checks;
      if (check_partition_identity(p, n, 4).residual != 0) ++bad_partition;
    }
    for (unsigned I = 1; I <= 30; ++I)
      if (check_induction_identity(p, I) != 0) ++bad_induction;
    if (check_fixed_point(p) != 0) ++bad_fixed;
  }
  rep.cases.push_back(exact("partition identities, p in {50/100..99/100}, n = 0..30", static_cast<double>(bad_partition),
                            std::to_string(checks) + " residuals, nonzero counted"));
  rep.cases.push_back(exact("induction identity, p in {50/100..99/100}, I = 1..30", static_cast<double>(bad_induction),
                            std::to_string(grid.size() * 30) + " residuals, nonzero counted"));
  rep.cases.push_back(exact("survival fixed point, p in {50/100..99/100}", static_cast<double>(bad_fixed)));
}

inline void suite_monotonicity(TestReport& rep) {
  std::vector<Rational> grid;
  for (int i = 0; i < 50; ++i) grid.push_back(Rational(1, 2) + Rational(i, 98));
  auto v = monotonicity_report(grid, 20, 20);
  std::uint64_t in_p = 0, in_n = 0;
  for (const auto& x : v) (x.part == MonotonicityViolation::Part::ZeroMassInN ? in_n : in_p)++;
  rep.cases.push_back(exact("p eta_k(p) and zero_mass(n, p) non-increasing in p, 50-point grid on [1/2, 1], k, n <= 20",
                            static_cast<double>(in_p)));
  rep.cases.push_back(exact("zero_mass(n, p) non-increasing in n, n <= 20", static_cast<double>(in_n)));
}

inline void suite_transport(TestReport& rep, const SuiteConfig& cfg) {
  auto plans = plans_for(cfg);
  for (unsigned k = 1; k <= cfg.exact_cap; ++k) {
    const auto& plan = plans->plan(k);
    auto chk = check_plan(plan, plans->trees(k), plans->trees(k + 1));
    std::string detail = "c_k=" + std::to_string(plan.c_small) + " c_k+1=" + std::to_string(plan.c_large) +
                         " support=" + std::to_string(plan.entries.size()) +
                         " row_residual=" + to_string(chk.max_row_residual) +
                         " col_residual=" + to_string(chk.max_col_residual) + (chk.containment ? "" : " non-containment entry");
    rep.cases.push_back(exact("transport plan size " + std::to_string(k) + " -> " + std::to_string(k + 1) +
                                  " feasible with uniform marginals",
                              chk.exact() ? 0.0 : 1.0, detail));
  }
}

inline ProbMap uniform_shapes(unsigned k) {
  ProbMap m;
  auto trees = enumerate_trees(k);
  for (const auto& t : trees) m[encode(t)] = 1.0 / static_cast<double>(trees.size());
  return m;
}

inline void suite_uniformity(TestReport& rep, const SuiteConfig& cfg) {
  const auto n = scaled(cfg, 200000);
  for (unsigned k = 3; k <= 7; ++k) {
    auto c = parallel_accumulate<Counts>(n, cfg.threads, [&](Counts& acc, std::uint64_t i) {
      Rng rng = Rng::keyed(cfg.seed, {1, k, i});
      ++acc.counts[encode(sample_uniform_tree(k, rng))];
    });
    rep.cases.push_back(statistical("uniform tree sampler, k=" + std::to_string(k) + " vs uniform over enumeration",
                                    chi_square(c.counts, uniform_shapes(k), cfg.min_expected)));
  }
  {
    auto plans = plans_for(cfg);
    const unsigned k = std::min(7U, cfg.exact_cap + 1);
    auto c = parallel_accumulate<Counts>(n, cfg.threads, [&](Counts& acc, std::uint64_t i) {
      Rng rng = Rng::keyed(cfg.seed, {2, i});
      auto chain = sample_chain(k, cfg.exact_cap, *plans, rng);
      ++acc.counts[encode(chain.tree(k))];
    });
    rep.cases.push_back(statistical("exact chain, T_" + std::to_string(k) + " vs uniform over enumeration",
                                    chi_square(c.counts, uniform_shapes(k), cfg.min_expected)));
  }
  // The size cap only needs to exceed the largest size tested; larger trees
  // land in the pooled cell either way.
  const Caps caps{64, 16};
  for (const auto& p : {Rational(3, 10), Rational(1, 2), Rational(3, 4)}) {
    const double pd = to_double(p);
    auto c = parallel_accumulate<Counts>(n, cfg.threads, [&](Counts& acc, std::uint64_t i) {
      Rng rng = Rng::keyed(cfg.seed, {3, static_cast<std::uint64_t>(pd * 1000), i});
      auto t = sample_gw(pd, rng, caps);
      if (t.status().clean() && t.size() <= 8) ++acc.counts[std::to_string(t.size())];
      else ++acc.counts["large"];
    });
    ProbMap expected;
    for (unsigned k = 1; k <= 8; ++k) expected[std::to_string(k)] = to_double(eta(k, p));
    rep.cases.push_back(statistical("Galton-Watson size law, p=" + pstr(p) + ", sizes <= 8 vs eta_k(p)",
                                    chi_square(c.counts, expected, cfg.min_expected)));
  }
}

inline void suite_duality(TestReport& rep, const SuiteConfig& cfg) {
  const auto n = scaled(cfg, 200000);
  const Caps caps{64, 16};
  struct Pair {
    CountMap sizes, shapes;
    void merge(const Pair& o) {
      for (const auto& [k, v] : o.sizes) sizes[k] += v;
      for (const auto& [k, v] : o.shapes) shapes[k] += v;
    }
  };
  auto run = [&](double p, std::uint64_t tag) {
    return parallel_accumulate<Pair>(n, cfg.threads, [&](Pair& acc, std::uint64_t i) {
      Rng rng = Rng::keyed(cfg.seed, {4, tag, i});
      auto t = sample_gw(p, rng, caps);
      if (!t.status().clean() || t.size() > 8) return;
      ++acc.sizes[std::to_string(t.size())];
      if (t.size() <= 5) ++acc.shapes[encode(t)];
    });
  };
  const auto hi = run(0.7, 7), lo = run(0.3, 3);

  Rational ratio_spread = 0;
  {
    const Rational r1 = eta(1, Rational(7, 10)) / eta(1, Rational(3, 10));
    for (unsigned k = 2; k <= 8; ++k) {
      const Rational r = eta(k, Rational(7, 10)) / eta(k, Rational(3, 10));
      ratio_spread = std::max<Rational>(ratio_spread, abs(r - r1));
    }
  }
  rep.cases.push_back(exact("eta_k(7/10) / eta_k(3/10) constant in k <= 8", to_double(ratio_spread),
                            "so the laws given |T| <= 8 coincide"));

  Rational z = 0, z5 = 0;
  for (unsigned k = 1; k <= 8; ++k) z += eta(k, Rational(3, 10));
  for (unsigned k = 1; k <= 5; ++k) z5 += eta(k, Rational(3, 10));
  ProbMap size_law, shape_law;
  for (unsigned k = 1; k <= 8; ++k) size_law[std::to_string(k)] = to_double(eta(k, Rational(3, 10)) / z);
  for (unsigned k = 1; k <= 5; ++k) {
    auto trees = enumerate_trees(k);
    for (const auto& t : trees)
      shape_law[encode(t)] = to_double(eta(k, Rational(3, 10)) / z5 / Rational(static_cast<long long>(trees.size())));
  }
  rep.cases.push_back(statistical("p=0.7 given |T| <= 8: sizes vs eta_k(0.3) normalized",
                                  chi_square(hi.sizes, size_law, cfg.min_expected)));
  rep.cases.push_back(statistical("p=0.7 given |T| <= 5: shapes vs eta_k(0.3)/c_k normalized",
                                  chi_square(hi.shapes, shape_law, cfg.min_expected)));
  rep.cases.push_back(statistical("sizes <= 8: p=0.7 vs p=0.3 two-sample",
                                  chi_square_two_sample(hi.sizes, lo.sizes, cfg.min_expected)));
  rep.cases.push_back(statistical("shapes at size <= 5: p=0.7 vs p=0.3 two-sample",
                                  chi_square_two_sample(hi.shapes, lo.shapes, cfg.min_expected)));
}

/// Canonical text of the subtree at the first root child carrying a frontier mark.
inline std::optional<std::string> first_infinite_child_text(const TruncatedTree& t, std::uint32_t horizon) {
  const auto deg = t.degrees();
  const auto ends = subtree_ends(deg);
  for (std::uint32_t c = 0, x = 1; c < deg[0]; ++c, x = ends[x]) {
    const auto& fr = t.frontier();
    if (std::find(fr.begin() + x, fr.begin() + ends[x], std::uint8_t{1}) == fr.begin() + ends[x]) continue;
    DegreeSeq sub(deg.begin() + x, deg.begin() + ends[x]);
    std::vector<std::uint8_t> sfr(fr.begin() + x, fr.begin() + ends[x]);
    return encode(TruncatedTree::unchecked(std::move(sub), std::move(sfr), horizon));
  }
  return std::nullopt;
}

inline void suite_pattern_marginals(TestReport& rep, const SuiteConfig& cfg) {
  const auto n = scaled(cfg, 200000);
  rep.cases.push_back(exact("pattern (inf) at p=3/4 has mass 3/16",
                            to_double(abs(pattern_probability(Rational(3, 4), {SlotOutcome::infinite()}) - Rational(3, 16)))));
  rep.cases.push_back(exact("pattern (inf) at p=1/2 has mass 1/4",
                            to_double(abs(pattern_probability(Rational(1, 2), {SlotOutcome::infinite()}) - Rational(1, 4)))));
  for (const auto& p : {Rational(1, 2), Rational(3, 4)}) {
    ConditionedSampler sampler(to_double(p));
    struct Acc {
      CountMap counts;
      std::uint64_t not_single = 0;
      void merge(const Acc& o) {
        for (const auto& [k, v] : o.counts) counts[k] += v;
        not_single += o.not_single;
      }
    };
    const auto tag = static_cast<std::uint64_t>(to_double(p) * 100);
    auto acc = parallel_accumulate<Acc>(n, cfg.threads, [&](Acc& a, std::uint64_t i) {
      auto s = sampler.sample(1, Rng::keyed(cfg.seed, {5, tag, i}));
      ++a.counts[encode(s.tree)];
      if (s.tree.frontier_count() != 1) ++a.not_single;
    });
    rep.cases.push_back(statistical("conditioned sampler depth 1, p=" + pstr(p) + " vs exact pattern law",
                                    chi_square(acc.counts, to_prob_map(depth1_law(p, 16)), cfg.min_expected)));
    if (p == Rational(1, 2))
      rep.cases.push_back(exact("p=1/2: exactly one infinite child in every sample", static_cast<double>(acc.not_single),
                                std::to_string(n) + " samples"));
  }
  {
    const Rational p(1, 2);
    ConditionedSampler sampler(0.5);
    const auto m = scaled(cfg, 100000);
    auto acc = parallel_accumulate<Counts>(m, cfg.threads, [&](Counts& a, std::uint64_t i) {
      ++a.counts[encode(sampler.sample(2, Rng::keyed(cfg.seed, {6, i})).tree)];
    });
    auto law = prefix_law(p, 2, 3, 0);
    rep.cases.push_back(statistical("conditioned sampler depth 2, p=1/2 vs exact prefix law (breadth <= 3)",
                                    chi_square(acc.counts, to_prob_map(law.law), cfg.min_expected),
                                    "escaped mass " + detail::fmt(to_double(law.escaped))));
  }
  {
    const Rational p(3, 4);
    ConditionedSampler sampler(0.75);
    const auto m = scaled(cfg, 100000);
    auto acc = parallel_accumulate<Counts>(m, cfg.threads, [&](Counts& a, std::uint64_t i) {
      auto s = sampler.sample(2, Rng::keyed(cfg.seed, {7, i}));
      if (auto text = first_infinite_child_text(s.tree, 1)) ++a.counts[*text];
    });
    rep.cases.push_back(statistical("p=3/4: subtree at the first infinite child vs depth-1 pattern law",
                                    chi_square(acc.counts, to_prob_map(depth1_law(p, 16)), cfg.min_expected)));
  }
  {
    const Rational p(3, 4);
    const auto m = scaled(cfg, 100000);
    const NaiveSampler naive(0.75, Caps{1, 1U << 20});
    auto acc = parallel_accumulate<Counts>(m, cfg.threads, [&](Counts& a, std::uint64_t i) {
      Rng rng = Rng::keyed(cfg.seed, {8, i});
      ++a.counts[encode(naive.sample(rng).tree)];
    });
    rep.cases.push_back(statistical("sequential sampler depth 1, p=3/4 vs exact pattern law",
                                    chi_square(acc.counts, to_prob_map(depth1_law(p, 16)), cfg.min_expected)));
  }
}

struct CouplingTally {
  std::uint64_t samples = 0;
  std::uint64_t containment_failures = 0;
  std::uint64_t order_failures = 0;  // ladder monotonicity raised
  std::uint64_t compromised = 0;
  std::uint64_t root_approx = 0;
  std::uint64_t repairs_changed = 0;
  std::array<std::uint64_t, kCouplingModes> modes{};
  std::vector<CountMap> depth1;  // per parameter, canonical text of the depth-1 prefix

  void merge(const CouplingTally& o) {
    samples += o.samples;
    containment_failures += o.containment_failures;
    order_failures += o.order_failures;
    compromised += o.compromised;
    root_approx += o.root_approx;
    repairs_changed += o.repairs_changed;
    for (std::size_t m = 0; m < kCouplingModes; ++m) modes[m] += o.modes[m];
    if (depth1.size() < o.depth1.size()) depth1.resize(o.depth1.size());
    for (std::size_t i = 0; i < o.depth1.size(); ++i)
      for (const auto& [k, v] : o.depth1[i]) depth1[i][k] += v;
  }
};

inline std::string grid_name(const std::vector<Rational>& g) {
  std::string s = "(";
  for (std::size_t i = 0; i < g.size(); ++i) s += (i ? ", " : "") + detail::fmt(to_double(g[i]));
  return s + ")";
}

inline CouplingTally run_coupling(const Coupler& coupler, std::uint32_t depth, std::uint64_t n, std::uint64_t seed,
                                  unsigned threads) {
  return parallel_accumulate<CouplingTally>(n, threads, [&](CouplingTally& t, std::uint64_t i) {
    ++t.samples;
    CoupledSample s;
    try {
      s = coupler.sample(depth, seed, i);
    } catch (const std::logic_error&) {
      ++t.order_failures;
      return;
    }
    if (!s.verdict.all_nested()) ++t.containment_failures;
    if (s.compromised()) ++t.compromised;
    if (s.root_approx) ++t.root_approx;
    t.repairs_changed += s.repairs_changed;
    for (std::size_t m = 0; m < kCouplingModes; ++m) t.modes[m] += s.mode_counts[m];
    if (depth == 1) {
      t.depth1.resize(s.trees.size());
      for (std::size_t j = 0; j < s.trees.size(); ++j) ++t.depth1[j][encode(s.trees[j])];
    }
  });
}

inline void suite_coupling(TestReport& rep, const SuiteConfig& cfg) {
  auto plans = plans_for(cfg);
  const auto n = scaled(cfg, 100000);
  const std::vector<std::vector<Rational>> grids{
      {Rational(1, 2), Rational(3, 4)}, {Rational(3, 4), Rational(9, 10)}, {Rational(1, 2), Rational(3, 5), Rational(9, 10)}};
  CouplerConfig cc;
  cc.exact_cap = cfg.exact_cap;
  for (std::size_t g = 0; g < grids.size(); ++g) {
    Coupler coupler(grids[g], cc, plans);
    for (std::uint32_t depth = 1; depth <= 4; ++depth) {
      auto t = run_coupling(coupler, depth, n, Rng::keyed(cfg.seed, {9, g, depth}).next(), cfg.threads);
      const double slots = static_cast<double>(std::accumulate(t.modes.begin(), t.modes.end(), std::uint64_t{0}));
      std::string detail = "samples=" + std::to_string(t.samples) + " ladder-order failures=" +
                           std::to_string(t.order_failures) + " compromised=" + std::to_string(t.compromised) +
                           " root-repair rate=" + detail::fmt(static_cast<double>(t.root_approx) / static_cast<double>(n));
      for (std::size_t m = 0; m < kCouplingModes; ++m)
        detail += std::string(" ") + to_string(static_cast<CouplingMode>(m)) + "=" +
                  detail::fmt(slots > 0 ? static_cast<double>(t.modes[m]) / slots : 0.0);
      rep.cases.push_back(exact("grid " + grid_name(grids[g]) + " depth " + std::to_string(depth) +
                                    ": containment and ladder-order failures",
                                static_cast<double>(t.containment_failures + t.order_failures), detail));
      if (depth == 1)
        for (std::size_t j = 0; j < grids[g].size(); ++j)
          rep.cases.push_back(statistical("grid " + grid_name(grids[g]) + " depth 1: p=" + pstr(grids[g][j]) +
                                              " component vs exact pattern law",
                                          chi_square(t.depth1[j], to_prob_map(depth1_law(grids[g][j], 16)), cfg.min_expected)));
    }
  }

  // Coupling does not alter any parameter's root ladder.
  {
    Coupler coupler(grids[2], cc, plans);
    std::vector<LadderParam> params;
    for (const auto& p : grids[2]) params.emplace_back(to_double(p));
    const auto m = scaled(cfg, 20000);
    struct Mismatch {
      std::uint64_t bad = 0;
      void merge(const Mismatch& o) { bad += o.bad; }
    };
    const std::uint64_t seed = Rng::keyed(cfg.seed, {10}).next();
    auto mm = parallel_accumulate<Mismatch>(m, cfg.threads, [&](Mismatch& acc, std::uint64_t i) {
      const Rng base = Rng::keyed(seed, {i});
      auto s = coupler.sample(1, base);
      for (std::size_t j = 0; j < params.size(); ++j) {
        Rng lr = node_stream(base, {}, StreamPurpose::Ladder);
        const auto X = draw_X(lr);
        auto single = run_ladder(params[j], X, [&] { return lr.uniform(); });
        const auto& pt = s.root_trace.params[j];
        if (single.params[0].outcomes != pt.outcomes || single.params[0].m0 != pt.m0) ++acc.bad;
      }
    });
    rep.cases.push_back(exact("grid (0.5, 0.6, 0.9): root ladders equal single-parameter ladders on the same seed",
                              static_cast<double>(mm.bad), std::to_string(m) + " samples"));
  }

  // Tiny mode: joint law of (finite root degree, infinite root degree cell) at mixed root slots.
  {
    CouplerConfig tc = cc;
    tc.exact_tiny = true;
    const std::vector<Rational> grid{Rational(1, 2), Rational(3, 4)};
    Coupler coupler(grid, tc, plans);
    const auto m = scaled(cfg, 100000);
    const std::uint64_t seed = Rng::keyed(cfg.seed, {11}).next();
    struct Joint {
      std::map<unsigned, CountMap> by_size;
      std::uint64_t mixed_exact = 0, approx = 0, failures = 0;
      void merge(const Joint& o) {
        for (const auto& [k, c] : o.by_size)
          for (const auto& [key, v] : c) by_size[k][key] += v;
        mixed_exact += o.mixed_exact;
        approx += o.approx;
        failures += o.failures;
      }
    };
    auto joint = parallel_accumulate<Joint>(m, cfg.threads, [&](Joint& acc, std::uint64_t i) {
      auto s = coupler.sample(2, seed, i);
      if (!s.verdict.all_nested()) ++acc.failures;
      acc.mixed_exact += s.mode_counts[static_cast<std::size_t>(CouplingMode::MixedExact)];
      acc.approx += s.mode_counts[static_cast<std::size_t>(CouplingMode::FiniteInfiniteApprox)];
      const auto& lo = s.root_trace.params[0];
      const auto& hi = s.root_trace.params[1];
      const auto d0 = s.trees[0].degrees();
      const auto d1 = s.trees[1].degrees();
      const auto e0 = subtree_ends(d0);
      const auto e1 = subtree_ends(d1);
      std::uint32_t x0 = 1, x1 = 1;
      for (std::uint32_t slot = 1; slot <= hi.children(); ++slot) {
        if (slot <= lo.children()) {
          const auto k = lo.outcomes[slot - 1];
          if (k.is_finite() && hi.outcomes[slot - 1].is_infinite() && k.value >= 3 && k.value <= tc.tiny_max_size) {
            const auto* tr = coupler.tiny_transport(1, static_cast<unsigned>(k.value));
            acc.by_size[static_cast<unsigned>(k.value)][std::to_string(d0[x0]) + "," + std::to_string(tr->cell_of(d1[x1]))]++;
          }
          x0 = e0[x0];
        }
        x1 = e1[x1];
      }
    });
    rep.cases.push_back(exact("tiny mode grid (0.5, 0.75) depth 2: containment failures", static_cast<double>(joint.failures),
                              "MixedExact slots=" + std::to_string(joint.mixed_exact) +
                                  " FiniteInfiniteApprox slots=" + std::to_string(joint.approx)));
    for (unsigned k = 3; k <= tc.tiny_max_size; ++k) {
      const auto* tr = coupler.tiny_transport(1, k);
      ProbMap oracle;
      for (unsigned d = 0; d < k; ++d)
        for (unsigned c = 1; c <= tr->cells(); ++c)
          if (tr->weight(d, c) > 0) oracle[std::to_string(d) + "," + std::to_string(c)] = to_double(tr->weight(d, c));
      rep.cases.push_back(statistical("tiny mode: mixed root slots of size " + std::to_string(k) +
                                          ", joint root degrees vs transport oracle",
                                      chi_square(joint.by_size[k], oracle, cfg.min_expected)));
    }
  }

  // Depth-2 component marginals against the exact prefix law. Mixed slots in
  // repair mode perturb the infinite side, so these are measurements.
  for (bool tiny : {false, true}) {
    CouplerConfig tc = cc;
    tc.exact_tiny = tiny;
    const std::vector<Rational> grid{Rational(1, 2), Rational(3, 4)};
    Coupler coupler(grid, tc, plans);
    const auto m = scaled(cfg, 100000);
    const std::uint64_t seed = Rng::keyed(cfg.seed, {12, tiny ? 1U : 0U}).next();
    struct Acc {
      std::vector<CountMap> counts = std::vector<CountMap>(2);
      std::uint64_t changed = 0;
      void merge(const Acc& o) {
        for (std::size_t j = 0; j < 2; ++j)
          for (const auto& [k, v] : o.counts[j]) counts[j][k] += v;
        changed += o.changed;
      }
    };
    auto acc = parallel_accumulate<Acc>(m, cfg.threads, [&](Acc& a, std::uint64_t i) {
      auto s = coupler.sample(2, seed, i);
      for (std::size_t j = 0; j < 2; ++j) ++a.counts[j][encode(s.trees[j])];
      if (s.repairs_changed) ++a.changed;
    });
    for (std::size_t j = 0; j < 2; ++j) {
      auto law = prefix_law(grid[j], 2, 3, 0);
      auto c = statistical(std::string(tiny ? "tiny mode" : "repair mode") + " grid (0.5, 0.75) depth 2: p=" +
                               pstr(grid[j]) + " component vs exact prefix law",
                           chi_square(acc.counts[j], to_prob_map(law.law), cfg.min_expected),
                           "samples with a changing repair=" + std::to_string(acc.changed));
      c.mode = CaseMode::Report;
      rep.cases.push_back(c);
    }
  }
}

inline void suite_corollary(TestReport& rep, const SuiteConfig& cfg) {
  auto plans = plans_for(cfg);
  const auto n = scaled(cfg, 10000);
  CouplerConfig cc;
  cc.exact_cap = cfg.exact_cap;
  const unsigned kmax = std::min(7U, cfg.exact_cap);
  for (const auto& p : {Rational(3, 5), Rational(9, 10)}) {
    for (unsigned k = 1; k <= kmax; ++k) {
      const std::uint64_t seed = Rng::keyed(cfg.seed, {13, k, static_cast<std::uint64_t>(to_double(p) * 100)}).next();
      auto r = corollary_check(k, p, 3, n, seed, cc, cfg.threads, plans);
      rep.cases.push_back(exact("k=" + std::to_string(k) + " p=" + pstr(p) + " depth 3: T_k inside both coupled trees",
                                static_cast<double>(r.samples - r.contained),
                                "samples=" + std::to_string(r.samples) + " repaired=" + std::to_string(r.repaired)));
      if (k >= 3) {
        CountMap counts;
        for (const auto& [shape, c] : r.shape_counts) counts[encode(plans->trees(k)[shape])] = c;
        rep.cases.push_back(statistical("k=" + std::to_string(k) + " p=" + pstr(p) + ": T_k vs uniform",
                                        chi_square(counts, uniform_shapes(k), cfg.min_expected)));
      }
    }
  }
}

inline void suite_naive_demo(TestReport& rep) {
  struct Row {
    Rational p1, p2, threshold;
    bool fails;
  };
  const Row rows[] = {{Rational(6, 10), Rational(7, 10), Rational(4, 10), true},
                      {Rational(6, 10), Rational(9, 10), Rational(8, 10), false},
                      {Rational(51, 100), Rational(52, 100), Rational(4, 100), true}};
  for (const auto& r : rows) {
    auto d = naive_failure_demo(r.p1, r.p2);
    const bool ok = d.threshold == r.threshold && d.fails == r.fails;
    rep.cases.push_back(exact("p1=" + detail::fmt(to_double(r.p1)) + " p2=" + detail::fmt(to_double(r.p2)) + ": " +
                                  detail::fmt(to_double(d.p1)) + (d.fails ? " > " : " < ") +
                                  detail::fmt(to_double(d.threshold)),
                              ok ? 0.0 : 1.0));
  }
}

}  // namespace detail

inline TestReport run_suite(Suite suite, const SuiteConfig& cfg = {}) {
  const auto start = std::chrono::steady_clock::now();
  TestReport rep;
  rep.suite = to_string(suite);
  rep.seed = cfg.seed;
  switch (suite) {
    case Suite::Identities: detail::suite_identities(rep); break;
    case Suite::Monotonicity: detail::suite_monotonicity(rep); break;
    case Suite::Transport: detail::suite_transport(rep, cfg); break;
    case Suite::Uniformity: detail::suite_uniformity(rep, cfg); break;
    case Suite::Duality: detail::suite_duality(rep, cfg); break;
    case Suite::PatternMarginals: detail::suite_pattern_marginals(rep, cfg); break;
    case Suite::Coupling: detail::suite_coupling(rep, cfg); break;
    case Suite::Corollary: detail::suite_corollary(rep, cfg); break;
    case Suite::NaiveDemo: detail::suite_naive_demo(rep); break;
  }
  rep.finalize(cfg.significance);
  rep.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

}  // namespace gwcouple
