#pragma once

// Tree conditioned to be infinite, truncated at a depth. At each vertex the
// ladder decides the subtree size of every child slot; finite slots receive a
// uniform tree of that size and infinite slots recurse.
//
// Randomness is drawn from substreams keyed by the vertex address and a purpose
// tag, so a draw at one vertex never depends on how much randomness was used
// elsewhere.

#include "gwcouple/ladder.hpp"
#include "gwcouple/numerics.hpp"
#include "gwcouple/rational.hpp"
#include "gwcouple/rng.hpp"
#include "gwcouple/trees.hpp"
#include "gwcouple/unif_sampling.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gwcouple {

/// Purpose tags for per-vertex substreams.
enum class StreamPurpose : std::uint64_t { Ladder = 1, FiniteTree = 2, Chain = 3, Transport = 4 };

inline Rng node_stream(const Rng& base, std::span<const std::uint32_t> path, StreamPurpose purpose) {
  return base.substream(path).substream(static_cast<std::uint64_t>(purpose));
}

/// Subtree sizes of the root's children in order; the terminating 0 is implicit.
using PatternSpec = std::vector<SlotOutcome>;

/// Probability that the root's children have exactly these subtree sizes:
///   p (1-p) (p eta_inf)^(I-1) prod_{finite slots} p eta_k
/// with I the number of infinite slots. Zero when I = 0.
template <Scalar Real>
Real pattern_probability(const Real& p, const PatternSpec& pattern) {
  if (p < Real(1) / 2 || p >= 1) throw std::domain_error("pattern_probability: p must lie in [1/2, 1)");
  unsigned infinite = 0;
  Real prod = 1;
  for (const auto& slot : pattern) {
    if (slot.is_zero()) throw std::invalid_argument("pattern_probability: slot of size 0 inside a pattern");
    if (slot.is_infinite())
      ++infinite;
    else
      prod *= p_eta(static_cast<unsigned>(slot.value), p);
  }
  if (infinite == 0) return Real(0);
  return p * (1 - p) * detail::ipow<Real>(p * eta_inf(p), infinite - 1) * prod;
}

/// P(root has j children): p (1-p) (p^j - (1-p)^j) / (2p - 1), or j / 2^(j+1) at p = 1/2.
template <Scalar Real>
Real root_degree_probability(const Real& p, unsigned j) {
  if (p < Real(1) / 2 || p >= 1) throw std::domain_error("root_degree_probability: p must lie in [1/2, 1)");
  if (j == 0) return Real(0);
  if (p == Real(1) / 2) return Real(j) / detail::ipow<Real>(Real(2), j + 1);
  return p * (1 - p) * (detail::ipow<Real>(p, j) - detail::ipow<Real>(1 - p, j)) / (2 * p - 1);
}

struct InfiniteSample {
  TruncatedTree tree;
  LadderTrace root;  // ladder at the root; empty for depth 0
};

/// Reusable sampler for one parameter; holds the float ladder tables.
class ConditionedSampler {
 public:
  explicit ConditionedSampler(double p, LadderCaps caps = {}) : param_(check(p), caps.table_size), caps_(caps) {}

  double p() const { return param_.p(); }

  InfiniteSample sample(std::uint32_t depth, const Rng& base) const {
    State s{base, {}, {}, {}, {}};
    InfiniteSample out;
    build(s, depth, &out.root);
    out.tree = TruncatedTree::unchecked(std::move(s.deg), std::move(s.frontier), depth, s.status);
    return out;
  }

 private:
  static double check(double p) {
    if (p == 1.0) throw std::domain_error("sample_conditioned_infinite: p = 1 has unbounded breadth and is not sampled");
    if (!(p >= 0.5 && p < 1.0)) throw std::domain_error("sample_conditioned_infinite: p must lie in [1/2, 1)");
    return p;
  }

  struct State {
    Rng base;
    std::vector<std::uint32_t> path;
    DegreeSeq deg;
    std::vector<std::uint8_t> frontier;
    TreeStatus status;
  };

  void build(State& s, std::uint32_t remaining, LadderTrace* record) const {
    if (remaining == 0) {
      s.deg.push_back(0);
      s.frontier.push_back(1);
      return;
    }
    Rng lr = node_stream(s.base, s.path, StreamPurpose::Ladder);
    const auto X = draw_X(lr);
    auto trace = run_ladder(param_, X, [&] { return lr.uniform(); }, caps_);
    const auto& pt = trace.params[0];
    if (pt.beyond_size_cap) s.status.add(TruncationReason::SizeCap);
    if (pt.slot_cap_hit) s.status.add(TruncationReason::LadderCap);
    const auto kids = pt.children();
    s.deg.push_back(kids);
    s.frontier.push_back(0);
    for (std::uint32_t m = 1; m <= kids; ++m) {
      const auto out = pt.outcomes[m - 1];
      s.path.push_back(m);
      if (out.is_infinite()) {
        build(s, remaining - 1, nullptr);
      } else if (remaining == 1) {
        s.deg.push_back(0);
        s.frontier.push_back(0);
      } else {
        Rng tr = node_stream(s.base, s.path, StreamPurpose::FiniteTree);
        auto t = detail::truncate(sample_uniform_degrees(out.value, tr), remaining - 1);
        s.deg.insert(s.deg.end(), t.begin(), t.end());
        s.frontier.resize(s.deg.size(), 0);
      }
      s.path.pop_back();
    }
    if (record) *record = std::move(trace);
  }

  LadderParam param_;
  LadderCaps caps_;
};

inline InfiniteSample sample_conditioned_infinite(double p, std::uint32_t depth, const LadderCaps& caps,
                                                  const Rng& base) {
  return ConditionedSampler(p, caps).sample(depth, base);
}

/// Exact law of the depth-1 prefix for root degrees up to breadth_cap, keyed by
/// canonical text ("[[]*,[]]" etc.). Finite sizes are summed in closed form, so
/// the only missing mass is from root degrees above the cap.
inline std::map<std::string, Rational> depth1_law(const Rational& p, unsigned breadth_cap) {
  if (p < Rational(1, 2) || p >= 1) throw std::domain_error("depth1_law: p must lie in [1/2, 1)");
  std::map<std::string, Rational> out;
  const Rational fin = 1 - p;  // sum over k of p eta_k
  const Rational later = p * eta_inf(p);
  for (unsigned j = 1; j <= breadth_cap; ++j) {
    std::vector<Rational> by_count(j + 1);  // weight given the number of infinite slots
    for (unsigned inf = 1; inf <= j; ++inf)
      by_count[inf] = p * (1 - p) * detail::ipow<Rational>(later, inf - 1) * detail::ipow<Rational>(fin, j - inf);
    for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << j); ++mask) {
      const Rational& w = by_count[static_cast<unsigned>(std::popcount(mask))];
      if (w == 0) continue;
      std::string text = "[";
      for (unsigned m = 0; m < j; ++m) {
        if (m) text += ',';
        text += (mask >> m) & 1U ? "[]*" : "[]";
      }
      out[text + "]"] += w;
    }
  }
  return out;
}

/// Exact law of the depth-d prefix, restricted to prefixes whose every vertex
/// with an infinite subtree has at most breadth_cap children and whose finite
/// subtrees have at most size_cap vertices. Keys are canonical texts with
/// frontier markers; `escaped` is the mass outside the enumerated support.
struct PrefixLaw {
  std::map<std::string, Rational> law;
  Rational escaped;
};

namespace detail {

using TextLaw = std::map<std::string, Rational>;

inline void check_budget(const TextLaw& law, std::size_t budget) {
  if (law.size() > budget)
    throw std::length_error("prefix_law: support exceeds budget of " + std::to_string(budget) + " prefixes");
}

inline TextLaw prefix_law_rec(const Rational& p, std::uint32_t depth, unsigned breadth_cap,
                              const std::vector<TextLaw>& finite_at_depth, std::size_t budget) {
  if (depth == 0) return {{"[]*", Rational(1)}};
  const TextLaw inf_child = prefix_law_rec(p, depth - 1, breadth_cap, finite_at_depth, budget);
  const TextLaw& fin_child = finite_at_depth[depth - 1];  // already weighted by p eta_k

  // Weight of a pattern factorizes over slots once the first infinite slot is
  // given p (1-p) and every later one p eta_inf.
  const Rational first_inf = p * (1 - p);
  const Rational later_inf = p * eta_inf(p);
  TextLaw out;
  std::array<TextLaw, 2> cur;  // index: whether an infinite slot has been placed
  cur[0][""] = 1;
  for (unsigned slots = 1; slots <= breadth_cap; ++slots) {
    std::array<TextLaw, 2> next;
    for (int seen = 0; seen < 2; ++seen) {
      for (const auto& [prefix, w] : cur[seen]) {
        const std::string sep = prefix.empty() ? "" : ",";
        for (const auto& [text, q] : fin_child) next[seen][prefix + sep + text] += w * q;
        const Rational& wi = seen ? later_inf : first_inf;
        if (wi != 0)
          for (const auto& [text, q] : inf_child) next[1][prefix + sep + text] += w * wi * q;
      }
    }
    for (const auto& [prefix, w] : next[1]) out["[" + prefix + "]"] += w;
    check_budget(next[0], budget);
    check_budget(next[1], budget);
    check_budget(out, budget);
    cur = std::move(next);
  }
  return out;
}

}  // namespace detail

namespace detail {

/// Law of a finite Geometric(p) subtree truncated h levels below its root,
/// jointly with the event that it is finite: every vertex above the horizon
/// with d children contributes (1-p) p^d, every vertex on it 1 - eta_inf.
/// Degrees above breadth_cap are left out.
inline TextLaw finite_truncated_law(const Rational& p, std::uint32_t h, unsigned breadth_cap, std::size_t budget) {
  if (h == 0) return {{"[]", 1 - eta_inf(p)}};
  const TextLaw child = finite_truncated_law(p, h - 1, breadth_cap, budget);
  TextLaw out;
  TextLaw row{{"", Rational(1)}};  // sibling lists of the current length
  Rational pd = 1;
  for (unsigned d = 0; d <= breadth_cap; ++d) {
    if (d > 0) {
      TextLaw next;
      for (const auto& [prefix, w] : row)
        for (const auto& [text, q] : child) next[prefix + (prefix.empty() ? "" : ",") + text] += w * q;
      check_budget(next, budget);
      row = std::move(next);
      pd *= p;
    }
    for (const auto& [prefix, w] : row) out["[" + prefix + "]"] += (1 - p) * pd * w;
  }
  return out;
}

}  // namespace detail

/// size_cap > 0 restricts finite subtrees to at most size_cap vertices (by
/// enumeration); size_cap = 0 admits every finite size and restricts only
/// their degrees by breadth_cap.
inline PrefixLaw prefix_law(const Rational& p, std::uint32_t depth, unsigned breadth_cap, unsigned size_cap,
                            std::size_t support_budget = 200000) {
  if (p < Rational(1, 2) || p >= 1) throw std::domain_error("prefix_law: p must lie in [1/2, 1)");
  if (size_cap > 12) throw std::length_error("prefix_law: size_cap above the enumeration cap");
  // finite[h]: law of a finite slot's subtree truncated at h, times its slot weight.
  std::vector<detail::TextLaw> finite(depth);
  if (size_cap == 0) {
    for (std::uint32_t h = 0; h < depth; ++h) {
      finite[h] = detail::finite_truncated_law(p, h, breadth_cap, support_budget);
      for (auto& [text, w] : finite[h]) w *= p;
    }
  }
  for (unsigned k = 1; k <= size_cap; ++k) {
    const auto trees = enumerate_trees(k);
    const Rational w = p_eta(k, p) / Rational(static_cast<long long>(trees.size()));
    for (std::uint32_t h = 0; h < depth; ++h)
      for (const auto& t : trees) finite[h][encode(TruncatedTree::from_tree(t, h))] += w;
  }
  PrefixLaw out;
  out.law = detail::prefix_law_rec(p, depth, breadth_cap, finite, support_budget);
  Rational captured = 0;
  for (const auto& [text, q] : out.law) captured += q;
  out.escaped = 1 - captured;
  return out;
}

}  // namespace gwcouple
