#pragma once

// Nested trees for a grid p_1 < ... < p_r, truncated at a common depth, all
// driven by one source of randomness.
//
// At every vertex one ladder is run for the whole sub-grid. For child slot m
// the outcome vector is non-decreasing in p, and the slot is filled by case:
//   all finite   one chain T_1 ⊂ T_2 ⊂ ...; parameter i takes T_{k_i}
//   all infinite recursion on the same sub-grid
//   mixed        chain for the finite part, recursion for the infinite part,
//                then the infinite sides absorb the largest finite tree
//                (FiniteInfiniteApprox), or, in tiny mode, an exact transport
//                between the finite tree's root degree and the infinite
//                side's root degree (MixedExact)

#include "gwcouple/chain.hpp"
#include "gwcouple/flow.hpp"
#include "gwcouple/infinite.hpp"
#include "gwcouple/ladder.hpp"
#include "gwcouple/numerics.hpp"
#include "gwcouple/parallel.hpp"
#include "gwcouple/rational.hpp"
#include "gwcouple/rng.hpp"
#include "gwcouple/trees.hpp"
#include "gwcouple/unif_sampling.hpp"

#include <boost/container/small_vector.hpp>
#include <json.hpp>

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gwcouple {

enum class CouplingMode : std::uint8_t { ExactChain, ChainHeuristic, FiniteInfiniteApprox, MixedExact };
inline constexpr std::size_t kCouplingModes = 4;

inline const char* to_string(CouplingMode m) {
  switch (m) {
    case CouplingMode::ExactChain: return "ExactChain";
    case CouplingMode::ChainHeuristic: return "ChainHeuristic";
    case CouplingMode::FiniteInfiniteApprox: return "FiniteInfiniteApprox";
    case CouplingMode::MixedExact: return "MixedExact";
  }
  return "?";
}

struct CouplerConfig {
  unsigned exact_cap = 9;
  LadderCaps ladder;
  bool exact_tiny = false;         // exact mixed slots when the infinite side has depth <= 1
  unsigned tiny_max_size = 4;      // largest finite size handled by the tiny transport
  bool record_traces = false;      // keep the ladder of every vertex, not only the root
  bool record_flags = false;       // keep one entry per flagged slot
};

struct SlotFlag {
  VertexAddress slot;
  CouplingMode mode;
  bool changed = false;  // repair altered at least one infinite-side tree
};

struct NodeTrace {
  VertexAddress vertex;
  std::size_t first_param = 0;  // grid index of trace.params[0]
  LadderTrace trace;
};

struct ContainmentVerdict {
  struct Violation {
    std::size_t inner = 0, outer = 0;
    VertexAddress witness;
  };
  /// matrix[i][j] for i <= j is trees[i] ⊆ trees[j]; entries below the diagonal are unset.
  std::vector<std::vector<std::optional<bool>>> matrix;
  std::optional<Violation> first_violation;

  bool all_nested() const { return !first_violation.has_value(); }
};

struct CoupledSample {
  std::vector<double> params;
  std::uint32_t depth = 0;
  std::vector<TruncatedTree> trees;
  LadderTrace root_trace;
  std::vector<NodeTrace> node_traces;
  std::array<std::uint64_t, kCouplingModes> mode_counts{};
  std::vector<SlotFlag> flags;
  bool root_approx = false;          // a root slot went through the containment repair
  std::uint64_t repairs_changed = 0;  // repairs that added vertices to an infinite side
  ContainmentVerdict verdict;

  bool compromised() const {
    for (const auto& t : trees)
      if (!t.status().clean()) return true;
    return false;
  }
};

/// Independent re-check of pairwise containment, by address-set comparison.
inline ContainmentVerdict verify_containment(const std::vector<TruncatedTree>& trees) {
  ContainmentVerdict v;
  const auto r = trees.size();
  v.matrix.assign(r, std::vector<std::optional<bool>>(r));
  for (std::size_t i = 0; i < r; ++i) {
    v.matrix[i][i] = true;
    for (std::size_t j = i + 1; j < r; ++j) {
      auto res = check_subset(trees[i], trees[j]);
      v.matrix[i][j] = res.contained;
      if (!res.contained && !v.first_violation) v.first_violation = ContainmentVerdict::Violation{i, j, *res.witness};
    }
  }
  return v;
}

inline ContainmentVerdict verify_containment(const CoupledSample& s) { return verify_containment(s.trees); }

/// Exact coupling of the root degree d of a uniform size-k tree with the root
/// degree D of the conditioned-infinite tree at p, such that d <= D. D is
/// observed only through cell min(D, cells), cells = max(1, k - 1).
class RootDegreeTransport {
 public:
  static std::optional<RootDegreeTransport> build(unsigned k, const Rational& p, const std::vector<OrderedTree>& trees) {
    RootDegreeTransport t;
    t.k_ = k;
    t.cells_ = std::max(1U, k - 1);
    t.degree_mass_.assign(k, 0);
    for (const auto& tree : trees) t.degree_mass_.at(tree.root_degree()) += Rational(1, static_cast<long long>(trees.size()));
    t.cell_mass_.assign(t.cells_, 0);
    Rational below_last = 0;
    for (unsigned c = 1; c < t.cells_; ++c) {
      t.cell_mass_[c - 1] = root_degree_probability(p, c);
      below_last += t.cell_mass_[c - 1];
    }
    t.cell_mass_[t.cells_ - 1] = 1 - below_last;

    const std::size_t source = k + t.cells_, sink = source + 1;
    MaxFlow<Rational> net(sink + 1);
    for (unsigned d = 0; d < k; ++d)
      if (t.degree_mass_[d] > 0) net.add_edge(source, d, t.degree_mass_[d]);
    std::vector<std::vector<std::optional<std::size_t>>> ids(k, std::vector<std::optional<std::size_t>>(t.cells_));
    for (unsigned d = 0; d < k; ++d)
      for (unsigned c = std::max(1U, d); c <= t.cells_; ++c) ids[d][c - 1] = net.add_edge(d, k + c - 1, Rational(1));
    for (unsigned c = 1; c <= t.cells_; ++c) net.add_edge(k + c - 1, sink, t.cell_mass_[c - 1]);
    if (net.max_flow(source, sink) != 1) return std::nullopt;

    t.weight_.assign(k, std::vector<Rational>(t.cells_, 0));
    for (unsigned d = 0; d < k; ++d)
      for (unsigned c = 1; c <= t.cells_; ++c)
        if (ids[d][c - 1]) t.weight_[d][c - 1] = net.flow(*ids[d][c - 1]);
    t.prepare_draws();
    return t;
  }

  unsigned k() const { return k_; }
  unsigned cells() const { return cells_; }
  unsigned cell_of(std::uint32_t D) const { return std::min<unsigned>(std::max<unsigned>(D, 1), cells_); }
  const Rational& weight(unsigned d, unsigned cell) const { return weight_.at(d).at(cell - 1); }
  const Rational& cell_mass(unsigned cell) const { return cell_mass_.at(cell - 1); }
  const Rational& degree_mass(unsigned d) const { return degree_mass_.at(d); }

  /// d given the cell, with probability weight(d, cell) / cell_mass(cell).
  std::uint32_t draw(unsigned cell, Rng& rng) const {
    const auto& units = units_[cell - 1];
    std::uint64_t r = rng.below(denominators_[cell - 1]);
    for (std::uint32_t d = 0; d < units.size(); ++d) {
      if (r < units[d]) return d;
      r -= units[d];
    }
    throw std::logic_error("RootDegreeTransport: conditional law does not sum to one");
  }

 private:
  // Conditional laws share a denominator per cell so draws are exact.
  void prepare_draws() {
    units_.assign(cells_, {});
    denominators_.assign(cells_, 1);
    for (unsigned c = 1; c <= cells_; ++c) {
      BigInt lcm = 1;
      for (unsigned d = 0; d < k_; ++d) {
        const Rational q = weight_[d][c - 1] / cell_mass_[c - 1];
        lcm = boost::multiprecision::lcm(lcm, denominator(q));
      }
      if (lcm > BigInt(std::numeric_limits<std::uint64_t>::max() / 2))
        throw std::overflow_error("RootDegreeTransport: denominator too large for exact draws");
      denominators_[c - 1] = lcm.convert_to<std::uint64_t>();
      for (unsigned d = 0; d < k_; ++d) {
        const Rational q = weight_[d][c - 1] / cell_mass_[c - 1] * Rational(lcm);
        units_[c - 1].push_back(numerator(q).convert_to<std::uint64_t>());
      }
    }
  }

  unsigned k_ = 0, cells_ = 0;
  std::vector<Rational> degree_mass_, cell_mass_;
  std::vector<std::vector<Rational>> weight_;
  std::vector<std::vector<std::uint64_t>> units_;
  std::vector<std::uint64_t> denominators_;
};

class Coupler {
 public:
  Coupler(std::vector<Rational> grid, CouplerConfig config = {}, std::shared_ptr<const ChainPlans> plans = nullptr)
      : grid_(std::move(grid)), config_(config), plans_(std::move(plans)) {
    if (grid_.empty()) throw std::domain_error("sample_coupled: empty grid");
    for (std::size_t i = 0; i < grid_.size(); ++i) {
      if (grid_[i] < Rational(1, 2)) throw std::domain_error("sample_coupled: grid values must be >= 1/2");
      if (grid_[i] >= 1) throw std::domain_error("sample_coupled: p = 1 has unbounded breadth and is not sampled");
      if (i && !(grid_[i - 1] < grid_[i])) throw std::domain_error("sample_coupled: grid must be strictly increasing");
    }
    if (!plans_) plans_ = std::make_shared<const ChainPlans>(config_.exact_cap);
    if (config_.exact_cap > plans_->exact_cap()) throw std::domain_error("sample_coupled: exact_cap exceeds the plans");
    for (const auto& p : grid_) {
      params_.emplace_back(to_double(p), config_.ladder.table_size);
      grid_double_.push_back(to_double(p));
    }
    if (config_.exact_tiny) {
      const unsigned kmax = std::min(config_.tiny_max_size, plans_->exact_upto());
      tiny_.resize(grid_.size());
      for (std::size_t i = 0; i < grid_.size(); ++i) {
        tiny_[i].resize(kmax + 1);
        for (unsigned k = 1; k <= kmax; ++k) tiny_[i][k] = RootDegreeTransport::build(k, grid_[i], plans_->trees(k));
      }
      by_root_degree_.resize(kmax + 1);
      for (unsigned k = 1; k <= kmax; ++k) {
        by_root_degree_[k].resize(k);
        const auto& ts = plans_->trees(k);
        for (std::uint32_t i = 0; i < ts.size(); ++i) by_root_degree_[k][ts[i].root_degree()].push_back(i);
      }
    }
  }

  const std::vector<Rational>& grid() const { return grid_; }
  const std::vector<double>& grid_double() const { return grid_double_; }
  const CouplerConfig& config() const { return config_; }
  const ChainPlans& plans() const { return *plans_; }
  std::shared_ptr<const ChainPlans> shared_plans() const { return plans_; }

  /// Tiny-mode transport for grid index i and size k, if feasible.
  const RootDegreeTransport* tiny_transport(std::size_t i, unsigned k) const {
    if (i >= tiny_.size() || k >= tiny_[i].size() || !tiny_[i][k]) return nullptr;
    return &*tiny_[i][k];
  }

  CoupledSample sample(std::uint32_t depth, const Rng& base) const {
    if (depth == 0) throw std::domain_error("sample_coupled: depth must be >= 1");
    CoupledSample out;
    out.params = grid_double_;
    out.depth = depth;
    Ctx ctx{base, {}, &out, {}, {}};
    std::vector<Buf> bufs(grid_.size());
    for (auto& b : bufs) {
      b.deg.reserve(256);
      b.fr.reserve(256);
    }
    node(ctx, 0, grid_.size(), depth, std::span<Buf>(bufs));
    for (auto& b : bufs) out.trees.push_back(TruncatedTree::unchecked(std::move(b.deg), std::move(b.fr), depth, ctx.status));
    out.verdict = verify_containment(out.trees);
    return out;
  }

  /// Sample `index` of a batch keyed by `seed`.
  CoupledSample sample(std::uint32_t depth, std::uint64_t seed, std::uint64_t index) const {
    return sample(depth, Rng::keyed(seed, {index}));
  }

  /// Uniform size-k tree (k <= tiny size) with root degree d, then smaller chain
  /// members by reverse exact steps. Returns shape indices, largest first.
  std::vector<std::uint32_t> tiny_finite_shapes(std::span<const std::uint64_t> sizes_desc, std::uint32_t d, Rng& rng) const {
    const auto k = static_cast<unsigned>(sizes_desc.front());
    const auto& pool = by_root_degree_.at(k).at(d);
    std::uint32_t shape = pool[rng.below(pool.size())];
    std::vector<std::uint32_t> out;
    unsigned cur = k;
    for (auto target : sizes_desc) {
      while (cur > target) {
        shape = plans_->step_backward(cur - 1, shape, rng).from;
        --cur;
      }
      out.push_back(shape);
    }
    return out;
  }

 private:
  struct Buf {
    DegreeSeq deg;
    std::vector<std::uint8_t> fr;
  };

  struct Ctx {
    Rng base;
    std::vector<std::uint32_t> path;
    CoupledSample* out;
    TreeStatus status;
    std::vector<LadderTrace> scratch;
  };

  static void append(Buf& b, std::span<const std::uint32_t> deg, const std::vector<std::uint8_t>* fr) {
    b.deg.insert(b.deg.end(), deg.begin(), deg.end());
    if (fr)
      b.fr.insert(b.fr.end(), fr->begin(), fr->end());
    else
      b.fr.resize(b.deg.size(), 0);
  }

  void flag(Ctx& c, CouplingMode m, bool changed = false) const {
    ++c.out->mode_counts[static_cast<std::size_t>(m)];
    if (config_.record_flags) c.out->flags.push_back({VertexAddress(c.path), m, changed});
  }

  static void append_finite(Buf& b, std::span<const std::uint32_t> deg, std::uint32_t remaining) {
    detail::truncate_into(deg, remaining, b.deg);
    b.fr.resize(b.deg.size(), 0);
  }

  /// Finite sizes (non-decreasing) for one slot, truncated at `remaining` and
  /// appended to out[0..sizes.size()).
  void finite_group(Ctx& c, std::span<const std::uint64_t> sizes, std::uint32_t remaining, std::span<Buf> out) const {
    if (remaining == 0) {
      for (std::size_t i = 0; i < sizes.size(); ++i) {
        out[i].deg.push_back(0);
        out[i].fr.push_back(0);
      }
      return;
    }
    Rng rng = node_stream(c.base, c.path, StreamPurpose::Chain);
    const std::uint64_t K = sizes.back();
    if (K <= plans_->exact_upto()) {
      std::uint32_t shape = 0;
      std::uint64_t k = 1;
      for (std::size_t i = 0; i < sizes.size(); ++i) {
        for (; k < sizes[i]; ++k) shape = plans_->step_forward(static_cast<unsigned>(k), shape, rng).to;
        append_finite(out[i], plans_->trees(static_cast<unsigned>(k))[shape].degrees(), remaining);
      }
      flag(c, CouplingMode::ExactChain);
    } else if (sizes.front() == K) {
      const auto t = sample_uniform_degrees(K, rng);
      for (std::size_t i = 0; i < sizes.size(); ++i) append_finite(out[i], t, remaining);
      flag(c, CouplingMode::ExactChain);
    } else {
      auto chain = sample_chain(K, config_.exact_cap, *plans_, rng);
      for (std::size_t i = 0; i < sizes.size(); ++i) append(out[i], chain.truncated(sizes[i], remaining), nullptr);
      flag(c, CouplingMode::ChainHeuristic);
    }
  }

  /// Appends the subtree of the current vertex for grid indices [lo, hi) to out[0..hi-lo).
  void node(Ctx& c, std::size_t lo, std::size_t hi, std::uint32_t remaining, std::span<Buf> out) const {
    if (remaining == 0) {
      for (std::size_t i = lo; i < hi; ++i) {
        out[i - lo].deg.push_back(0);
        out[i - lo].fr.push_back(1);
      }
      return;
    }
    Rng lr = node_stream(c.base, c.path, StreamPurpose::Ladder);
    const auto X = draw_X(lr);
    // One scratch trace per level; children recurse one level down.
    if (c.scratch.size() <= remaining) c.scratch.resize(remaining + 1);
    auto& trace = c.scratch[remaining];
    run_ladder_grid_into(std::span<const LadderParam>(params_).subspan(lo, hi - lo), X, [&] { return lr.uniform(); },
                         config_.ladder, trace);
    std::uint32_t max_children = 0;
    for (std::size_t i = lo; i < hi; ++i) {
      const auto& pt = trace.params[i - lo];
      if (pt.beyond_size_cap) c.status.add(TruncationReason::SizeCap);
      if (pt.slot_cap_hit) c.status.add(TruncationReason::LadderCap);
      out[i - lo].deg.push_back(pt.children());
      out[i - lo].fr.push_back(0);
      max_children = std::max(max_children, pt.children());
    }

    const bool at_root = c.path.empty();
    boost::container::small_vector<std::uint64_t, 8> sizes;
    for (std::uint32_t m = 1; m <= max_children; ++m) {
      std::size_t a = lo;
      while (trace.params[a - lo].children() < m) ++a;
      std::size_t s = a;
      sizes.clear();
      for (; s < hi && trace.params[s - lo].outcomes[m - 1].is_finite(); ++s)
        sizes.push_back(trace.params[s - lo].outcomes[m - 1].value);

      c.path.push_back(m);
      const std::uint32_t below = remaining - 1;
      if (s == a)
        node(c, a, hi, below, out.subspan(a - lo));
      else if (s == hi)
        finite_group(c, {sizes.data(), sizes.size()}, below, out.subspan(a - lo));
      else
        mixed_slot(c, a, s, hi, below, {sizes.data(), sizes.size()}, out.subspan(a - lo), at_root);
      c.path.pop_back();
    }
    if (at_root) c.out->root_trace = trace;
    if (config_.record_traces) c.out->node_traces.push_back({VertexAddress(c.path), lo, trace});
  }

  /// Slot where grid indices [a, s) are finite and [s, hi) infinite; out[0] belongs to index a.
  void mixed_slot(Ctx& c, std::size_t a, std::size_t s, std::size_t hi, std::uint32_t below,
                  std::span<const std::uint64_t> sizes, std::span<Buf> out, bool at_root) const {
    const std::size_t nf = s - a;
    const std::uint64_t top = sizes.back();
    const RootDegreeTransport* tiny =
        below == 1 && top <= config_.tiny_max_size ? tiny_transport(s, static_cast<unsigned>(top)) : nullptr;
    if (below == 0) {
      node(c, s, hi, below, out.subspan(nf));
      finite_group(c, sizes, below, out);
    } else if (tiny) {
      const std::size_t start = out[nf].deg.size();
      node(c, s, hi, below, out.subspan(nf));
      Rng rng = node_stream(c.base, c.path, StreamPurpose::Transport);
      const auto D = out[nf].deg[start];
      const auto d = tiny->draw(tiny->cell_of(D), rng);
      boost::container::small_vector<std::uint64_t, 8> desc(sizes.rbegin(), sizes.rend());
      auto shapes = tiny_finite_shapes({desc.data(), desc.size()}, d, rng);
      for (std::size_t i = 0; i < nf; ++i) {
        const auto j = nf - 1 - i;  // position in the descending list
        append_finite(out[i], plans_->trees(static_cast<unsigned>(desc[j]))[shapes[j]].degrees(), below);
      }
      flag(c, CouplingMode::MixedExact);
    } else {
      std::vector<Buf> sub(hi - s);
      node(c, s, hi, below, sub);
      const std::size_t start = out[nf - 1].deg.size();
      finite_group(c, sizes, below, out);
      DegreeSeq top_deg(out[nf - 1].deg.begin() + static_cast<std::ptrdiff_t>(start), out[nf - 1].deg.end());
      const auto top_tree = TruncatedTree::unchecked(std::move(top_deg), std::vector<std::uint8_t>(out[nf - 1].deg.size() - start, 0), below);
      bool changed = false;
      for (std::size_t i = 0; i < sub.size(); ++i) {
        auto merged = merge_union(TruncatedTree::unchecked(std::move(sub[i].deg), std::move(sub[i].fr), below), top_tree);
        changed = changed || merged.changed;
        append(out[nf + i], merged.tree.degrees(), &merged.tree.frontier());
      }
      if (changed) ++c.out->repairs_changed;
      if (at_root) c.out->root_approx = true;
      flag(c, CouplingMode::FiniteInfiniteApprox, changed);
    }
  }

  std::vector<Rational> grid_;
  std::vector<double> grid_double_;
  std::vector<LadderParam> params_;
  CouplerConfig config_;
  std::shared_ptr<const ChainPlans> plans_;
  std::vector<std::vector<std::optional<RootDegreeTransport>>> tiny_;
  std::vector<std::vector<std::vector<std::uint32_t>>> by_root_degree_;
};

inline CoupledSample sample_coupled(const std::vector<Rational>& grid, std::uint32_t depth, const CouplerConfig& config,
                                    const Rng& base) {
  return Coupler(grid, config).sample(depth, base);
}

/// Chain member T_k set against a coupled pair on the grid (1/2, p).
struct CorollaryReport {
  unsigned k = 0;
  double p = 0;
  std::uint32_t depth = 0;
  std::uint64_t samples = 0;
  std::uint64_t contained = 0;   // T_k ⊆ (1/2)-side ⊆ p-side after repair
  std::uint64_t repaired = 0;    // T_k had to be merged into the coupled trees
  std::uint64_t exact_transport = 0;
  std::uint64_t compromised = 0;
  std::array<std::uint64_t, kCouplingModes> mode_counts{};
  std::map<std::uint32_t, std::uint64_t> shape_counts;  // canonical index among size-k trees

  void merge(const CorollaryReport& o) {
    samples += o.samples;
    contained += o.contained;
    repaired += o.repaired;
    exact_transport += o.exact_transport;
    compromised += o.compromised;
    for (std::size_t i = 0; i < kCouplingModes; ++i) mode_counts[i] += o.mode_counts[i];
    for (const auto& [s, n] : o.shape_counts) shape_counts[s] += n;
  }
};

/// Samples T_k from the exact chain and a coupled pair at (1/2, p), then makes
/// T_k ⊆ T(1/2) ⊆ T(p) hold at the given depth: in tiny mode (depth 1, k within
/// the tiny size) by the exact root-degree transport, otherwise by merging T_k
/// into both coupled trees when it is not already contained.
inline CorollaryReport corollary_check(unsigned k, const Rational& p, std::uint32_t depth, std::uint64_t n,
                                       std::uint64_t seed, const CouplerConfig& config = {}, unsigned threads = 1,
                                       std::shared_ptr<const ChainPlans> plans = nullptr) {
  if (k == 0 || k > config.exact_cap) throw std::domain_error("corollary_check: k must lie in [1, exact_cap]");
  std::vector<Rational> grid{Rational(1, 2)};
  if (p != Rational(1, 2)) grid.push_back(p);
  Coupler coupler(grid, config, std::move(plans));
  const auto& chain_plans = coupler.plans();

  CorollaryReport init;
  init.k = k;
  init.p = to_double(p);
  init.depth = depth;
  auto report = parallel_accumulate<CorollaryReport>(
      n, threads,
      [&](CorollaryReport& acc, std::uint64_t i) {
        const Rng base = Rng::keyed(seed, {i});
        auto s = coupler.sample(depth, base.substream(1));
        Rng chain_rng = base.substream(2);
        ++acc.samples;
        for (std::size_t m = 0; m < kCouplingModes; ++m) acc.mode_counts[m] += s.mode_counts[m];
        if (s.compromised()) ++acc.compromised;

        std::uint32_t shape = 0;
        const RootDegreeTransport* tiny = depth == 1 ? coupler.tiny_transport(0, k) : nullptr;
        if (tiny) {
          const auto d = tiny->draw(tiny->cell_of(s.trees[0].root_degree()), chain_rng);
          const std::uint64_t desc[] = {k};
          shape = coupler.tiny_finite_shapes(desc, d, chain_rng)[0];
          ++acc.exact_transport;
        } else {
          for (unsigned j = 1; j < k; ++j) shape = chain_plans.step_forward(j, shape, chain_rng).to;
        }
        ++acc.shape_counts[shape];

        const auto tk = TruncatedTree::from_tree(chain_plans.trees(k)[shape], depth);
        if (!subset_of(tk, s.trees[0])) {
          ++acc.repaired;
          for (auto& t : s.trees) t = merge_union(t, tk).tree;
        }
        bool ok = subset_of(tk, s.trees[0]);
        for (std::size_t j = 1; j < s.trees.size(); ++j) ok = ok && subset_of(s.trees[j - 1], s.trees[j]);
        if (ok) ++acc.contained;
      },
      init);
  report.k = k;
  report.p = to_double(p);
  report.depth = depth;
  return report;
}

struct NaiveComparison {
  Rational p1;
  Rational threshold;  // p2 * eta_inf(p2) = 2 p2 - 1
  bool fails = false;  // p1 > threshold: the sequential samplers cannot be nested
};

/// Before any infinite subtree the sequential sampler declares a slot infinite
/// with probability p; after one, with probability p eta_inf(p). Driving both
/// parameters with the same uniform breaks containment whenever
/// p1 > p2 eta_inf(p2).
inline NaiveComparison naive_failure_demo(const Rational& p1, const Rational& p2) {
  if (!(Rational(1, 2) < p1 && p1 < p2 && p2 <= 1))
    throw std::domain_error("naive_failure_demo: need 1/2 < p1 < p2 <= 1");
  NaiveComparison out{p1, p2 * eta_inf(p2), false};
  out.fails = out.p1 > out.threshold;
  return out;
}

// --- JSON export -----------------------------------------------------------

inline nlohmann::json ladder_trace_json(const LadderTrace& t) {
  nlohmann::json params = nlohmann::json::array();
  for (const auto& pt : t.params) {
    nlohmann::json L = nlohmann::json::array();
    for (auto o : pt.outcomes) {
      if (o.is_infinite())
        L.push_back("inf");
      else
        L.push_back(o.value);
    }
    nlohmann::json entry{{"p", pt.p}, {"L", L}, {"m0", pt.m0}};
    if (pt.compromised()) entry["compromised"] = true;
    params.push_back(entry);
  }
  return {{"X", t.X}, {"U", t.U}, {"params", params}};
}

inline nlohmann::json coupled_sample_json(const CoupledSample& s) {
  nlohmann::json j;
  j["params"] = s.params;
  j["depth"] = s.depth;
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : s.trees) trees.push_back(encode(t));
  j["trees"] = trees;
  j["status"] = s.trees.empty() ? "clean" : s.trees.front().status().describe();
  nlohmann::json modes;
  for (std::size_t m = 0; m < kCouplingModes; ++m) modes[to_string(static_cast<CouplingMode>(m))] = s.mode_counts[m];
  j["mode_counts"] = modes;
  j["root_approx"] = s.root_approx;
  if (!s.flags.empty()) {
    nlohmann::json flags = nlohmann::json::array();
    for (const auto& f : s.flags)
      flags.push_back({{"slot", f.slot.to_string()}, {"mode", to_string(f.mode)}, {"changed", f.changed}});
    j["flags"] = flags;
  }
  nlohmann::json matrix = nlohmann::json::array();
  for (const auto& row : s.verdict.matrix) {
    nlohmann::json r = nlohmann::json::array();
    for (const auto& e : row) r.push_back(e ? nlohmann::json(*e) : nlohmann::json(nullptr));
    matrix.push_back(r);
  }
  j["verdict"] = {{"matrix", matrix}, {"all_nested", s.verdict.all_nested()}};
  if (s.verdict.first_violation) {
    const auto& v = *s.verdict.first_violation;
    j["verdict"]["violation"] = {{"inner", v.inner}, {"outer", v.outer}, {"witness", v.witness.to_string()}};
  }
  j["trace"] = ladder_trace_json(s.root_trace);
  if (!s.node_traces.empty()) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : s.node_traces)
      nodes.push_back({{"vertex", n.vertex.to_string()}, {"first_param", n.first_param}, {"ladder", ladder_trace_json(n.trace)}});
    j["node_traces"] = nodes;
  }
  return j;
}

}  // namespace gwcouple
