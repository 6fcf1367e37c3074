#pragma once

// Baseline samplers: uniform plane tree of fixed size, the plain geometric
// Galton-Watson tree, and the naive sequential sampler for the tree
// conditioned to survive.

#include "gwcouple/ladder.hpp"
#include "gwcouple/numerics.hpp"
#include "gwcouple/rng.hpp"
#include "gwcouple/trees.hpp"

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace gwcouple {

struct Caps {
  std::uint32_t depth = 64;
  std::uint64_t total_size = 1ULL << 20;
};

/// Uniform over the c_k plane trees with k vertices. A uniformly shuffled word
/// of k-1 up-steps and k down-steps has exactly one rotation whose proper
/// prefixes stay nonnegative (cycle lemma); that rotation, minus its final
/// down-step, is the contour of the tree.
inline DegreeSeq sample_uniform_degrees(std::uint64_t k, Rng& rng) {
  if (k == 0) throw std::domain_error("sample_uniform_tree: k must be >= 1");
  const std::uint64_t n = 2 * k - 1;
  std::vector<std::uint8_t> steps(n, 0);
  std::fill(steps.begin(), steps.begin() + static_cast<std::ptrdiff_t>(k - 1), std::uint8_t{1});
  for (std::uint64_t i = n - 1; i > 0; --i) std::swap(steps[i], steps[rng.below(i + 1)]);

  // Start right after the first position where the prefix sum is minimal.
  std::int64_t level = 0, best = 0;
  std::uint64_t start = 0;
  for (std::uint64_t i = 0; i < n; ++i) {
    level += steps[i] ? 1 : -1;
    if (level < best) {
      best = level;
      start = i + 1;
    }
  }

  DegreeSeq deg;
  deg.reserve(k);
  deg.push_back(0);
  std::vector<std::uint32_t> stack{0};
  for (std::uint64_t t = 0; t + 1 < n; ++t) {
    if (steps[(start + t) % n]) {
      ++deg[stack.back()];
      stack.push_back(static_cast<std::uint32_t>(deg.size()));
      deg.push_back(0);
    } else {
      stack.pop_back();
    }
  }
  return deg;
}

inline OrderedTree sample_uniform_tree(std::uint64_t k, Rng& rng) {
  return OrderedTree::from_degrees(sample_uniform_degrees(k, rng));
}

/// Number of children with P(k) = p^k (1 - p), from a single draw.
inline std::uint64_t draw_geometric(double p, Rng& rng) {
  if (p == 0.0) return 0;
  const double x = std::floor(std::log(rng.uniform_pos()) / std::log(p));
  return x >= 1.8e19 ? std::uint64_t{1} << 63 : static_cast<std::uint64_t>(x);
}

/// Geometric(p) Galton-Watson tree, generated breadth-first. Hitting either cap
/// stops generation and marks the result compromised.
inline TruncatedTree sample_gw(double p, Rng& rng, const Caps& caps = {}) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("sample_gw: p must lie in (0, 1)");
  std::vector<std::uint32_t> bfs_deg{0};
  std::vector<std::uint32_t> bfs_depth{0};
  TreeStatus status;
  for (std::size_t i = 0; i < bfs_deg.size(); ++i) {
    const std::uint64_t x = draw_geometric(p, rng);
    if (x == 0) continue;
    if (bfs_depth[i] >= caps.depth) {
      status.add(TruncationReason::DepthCap);
      break;
    }
    if (bfs_deg.size() + x > caps.total_size) {
      status.add(TruncationReason::SizeCap);
      break;
    }
    bfs_deg[i] = static_cast<std::uint32_t>(x);
    bfs_deg.resize(bfs_deg.size() + x, 0);
    bfs_depth.resize(bfs_depth.size() + x, bfs_depth[i] + 1);
  }

  // Children of a breadth-first vertex are contiguous; walk them depth-first.
  std::vector<std::uint32_t> first_child(bfs_deg.size());
  std::uint32_t next = 1;
  for (std::size_t i = 0; i < bfs_deg.size(); ++i) {
    first_child[i] = next;
    next += bfs_deg[i];
  }
  DegreeSeq deg;
  deg.reserve(bfs_deg.size());
  std::vector<std::uint32_t> stack{0};
  while (!stack.empty()) {
    const auto v = stack.back();
    stack.pop_back();
    deg.push_back(bfs_deg[v]);
    for (std::uint32_t c = bfs_deg[v]; c-- > 0;) stack.push_back(first_child[v] + c);
  }
  std::vector<std::uint8_t> fr(deg.size(), 0);
  return TruncatedTree::unchecked(std::move(deg), std::move(fr), caps.depth, status);
}

struct NaiveSample {
  TruncatedTree tree;
  std::vector<SlotOutcome> root_pattern;  // subtree size per root child, in order
};

namespace detail {

struct NaiveState {
  double p;
  double p_eta_inf;
  const SizeTable* sizes;
  const Caps* caps;
  std::uint32_t max_slots;
  Rng* rng;
  DegreeSeq deg;
  std::vector<std::uint8_t> frontier;
  TreeStatus status;
};

/// Sibling list of a vertex whose subtree is infinite: before the first infinite
/// child, infinite with mass p and finite k with mass p eta_k; afterwards,
/// infinite with mass p eta_inf, finite k with mass p eta_k, and stop with the
/// remaining mass 1 - p.
inline std::vector<SlotOutcome> naive_children(NaiveState& s) {
  std::vector<SlotOutcome> out;
  bool seen_infinite = false;
  for (;;) {
    if (out.size() >= s.max_slots) {
      s.status.add(TruncationReason::BreadthCap);
      break;
    }
    const double u = s.rng->uniform();
    const double inf_mass = seen_infinite ? s.p_eta_inf : s.p;
    if (u < inf_mass) {
      out.push_back(SlotOutcome::infinite());
      seen_infinite = true;
      continue;
    }
    if (seen_infinite && u >= inf_mass + (1 - s.p)) break;
    auto k = s.sizes->finite_outcome(u, inf_mass, 1.0, s.caps->total_size);
    if (!k) {
      s.status.add(TruncationReason::SizeCap);
      k = s.caps->total_size + 1;
    }
    out.push_back(SlotOutcome::finite(*k));
  }
  return out;
}

inline void naive_subtree(NaiveState& s, std::uint32_t remaining, std::vector<SlotOutcome>* record) {
  if (remaining == 0) {
    s.deg.push_back(0);
    s.frontier.push_back(1);
    return;
  }
  auto kids = naive_children(s);
  if (record) *record = kids;
  s.deg.push_back(static_cast<std::uint32_t>(kids.size()));
  s.frontier.push_back(0);
  for (auto kid : kids) {
    if (kid.is_infinite()) {
      naive_subtree(s, remaining - 1, nullptr);
    } else {
      auto t = truncate(sample_uniform_degrees(kid.value, *s.rng), remaining - 1);
      s.deg.insert(s.deg.end(), t.begin(), t.end());
      s.frontier.resize(s.deg.size(), 0);
    }
  }
}

}  // namespace detail

/// The sequential sampler for the tree conditioned to survive, built from
/// conditional child-subtree probabilities. Its law is the conditioned
/// tree's law; it is kept because it cannot be run on a shared random source
/// for two parameters without breaking containment.
/// The result is truncated at caps.depth.
class NaiveSampler {
 public:
  explicit NaiveSampler(double p, Caps caps = {}, std::uint32_t max_slots = 1U << 16)
      : p_(check(p)), sizes_(p, 4096), caps_(caps), max_slots_(max_slots) {}

  NaiveSample sample(Rng& rng) const {
    detail::NaiveState s{p_, p_ * eta_inf(p_), &sizes_, &caps_, max_slots_, &rng, {}, {}, {}};
    NaiveSample out;
    detail::naive_subtree(s, caps_.depth, &out.root_pattern);
    out.tree = TruncatedTree::unchecked(std::move(s.deg), std::move(s.frontier), caps_.depth, s.status);
    return out;
  }

 private:
  static double check(double p) {
    if (!(p > 0.5 && p < 1.0)) throw std::domain_error("sample_naive_conditioned: p must lie in (1/2, 1)");
    return p;
  }

  double p_;
  SizeTable sizes_;
  Caps caps_;
  std::uint32_t max_slots_;
};

inline NaiveSample sample_naive_conditioned(double p, Rng& rng, const Caps& caps = {}, std::uint32_t max_slots = 1U << 16) {
  return NaiveSampler(p, caps, max_slots).sample(rng);
}

}  // namespace gwcouple
