#pragma once

// Increasing chain T_1 ⊂ T_2 ⊂ ... of uniform plane trees. For small sizes each
// step follows an exact transport plan between the uniform laws on sizes k and
// k+1, supported on containment pairs and found by integer max-flow. Past the
// exact range the chain grows by attaching a new last child to a uniformly
// chosen vertex, which keeps containment but not uniformity (flagged Heuristic).

#include "gwcouple/flow.hpp"
#include "gwcouple/numerics.hpp"
#include "gwcouple/rational.hpp"
#include "gwcouple/rng.hpp"
#include "gwcouple/trees.hpp"

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace gwcouple {

/// Joint law of (T_k, T_{k+1}) with uniform marginals. The weight of an entry is
/// units / (c_k * c_{k+1}); the new vertex is the last child of the vertex at
/// preorder position `parent_pos` in the smaller tree.
struct TransportPlan {
  struct Entry {
    std::uint32_t from = 0;
    std::uint32_t to = 0;
    std::uint64_t units = 0;
    std::uint32_t parent_pos = 0;
  };

  unsigned k = 0;
  std::uint64_t c_small = 0;
  std::uint64_t c_large = 0;
  std::vector<Entry> entries;  // sorted by (from, to); zero-weight pairs omitted

  Rational weight(const Entry& e) const { return Rational(BigInt(e.units), BigInt(c_small) * c_large); }
};

namespace detail {

struct Removal {
  DegreeSeq smaller;
  std::uint32_t parent_pos;
};

/// Every tree obtained by deleting one vertex that is a leaf and the last child
/// of its parent; these are exactly the size-(n-1) subtrees in the class.
inline std::vector<Removal> removals(std::span<const std::uint32_t> deg) {
  std::vector<Removal> out;
  const auto ends = subtree_ends(deg);
  std::vector<std::uint32_t> parent(deg.size(), 0);
  for (std::uint32_t v = 0; v < deg.size(); ++v)
    for (std::uint32_t c = 0, x = v + 1; c < deg[v]; ++c, x = ends[x]) parent[x] = v;
  for (std::uint32_t x = 1; x < deg.size(); ++x) {
    const auto y = parent[x];
    if (deg[x] != 0 || ends[y] != x + 1) continue;
    DegreeSeq s(deg.begin(), deg.end());
    s.erase(s.begin() + x);
    --s[y];
    out.push_back({std::move(s), y});
  }
  return out;
}

struct PlanEdge {
  std::uint32_t from, to, parent_pos;
};

inline std::vector<PlanEdge> containment_edges(const std::vector<OrderedTree>& small,
                                               const std::vector<OrderedTree>& large) {
  std::map<DegreeSeq, std::uint32_t> index;
  for (std::uint32_t i = 0; i < small.size(); ++i) index.emplace(small[i].degree_vector(), i);
  std::vector<PlanEdge> edges;
  for (std::uint32_t j = 0; j < large.size(); ++j)
    for (auto& r : removals(large[j].degrees())) edges.push_back({index.at(r.smaller), j, r.parent_pos});
  std::sort(edges.begin(), edges.end(),
            [](const PlanEdge& a, const PlanEdge& b) { return std::tie(a.from, a.to) < std::tie(b.from, b.to); });
  return edges;
}

}  // namespace detail

/// Plan between two enumerated size classes (canonical order). Throws if the
/// flow does not saturate, i.e. no containment coupling exists.
inline TransportPlan build_transport(unsigned k, const std::vector<OrderedTree>& small,
                                     const std::vector<OrderedTree>& large) {
  const auto edges = detail::containment_edges(small, large);
  const std::size_t ns = small.size(), nl = large.size();
  const std::size_t source = ns + nl, sink = source + 1;
  MaxFlow<std::int64_t> net(ns + nl + 2);
  const auto cs = static_cast<std::int64_t>(ns), cl = static_cast<std::int64_t>(nl);
  for (std::size_t i = 0; i < ns; ++i) net.add_edge(source, i, cl);
  std::vector<std::size_t> ids;
  ids.reserve(edges.size());
  for (const auto& e : edges) ids.push_back(net.add_edge(e.from, ns + e.to, cl));
  for (std::size_t j = 0; j < nl; ++j) net.add_edge(ns + j, sink, cs);
  const auto total = net.max_flow(source, sink);
  if (total != cs * cl)
    throw std::runtime_error("build_transport: no containment coupling between sizes " + std::to_string(k) + " and " +
                             std::to_string(k + 1) + " (flow " + std::to_string(total) + " of " +
                             std::to_string(cs * cl) + ")");
  TransportPlan plan;
  plan.k = k;
  plan.c_small = ns;
  plan.c_large = nl;
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto f = net.flow(ids[e]);
    if (f > 0) plan.entries.push_back({edges[e].from, edges[e].to, static_cast<std::uint64_t>(f), edges[e].parent_pos});
  }
  return plan;
}

inline TransportPlan build_transport(unsigned k) {
  if (k == 0) throw std::domain_error("build_transport: k must be >= 1");
  return build_transport(k, enumerate_trees(k), enumerate_trees(k + 1));
}

struct PlanCheck {
  bool containment = true;  // every entry is a containment pair
  Rational max_row_residual = 0;
  Rational max_col_residual = 0;
  bool exact() const { return containment && max_row_residual == 0 && max_col_residual == 0; }
};

/// Re-checks a plan in exact arithmetic against the enumerated classes.
inline PlanCheck check_plan(const TransportPlan& plan, const std::vector<OrderedTree>& small,
                            const std::vector<OrderedTree>& large) {
  PlanCheck out;
  std::vector<Rational> row(small.size()), col(large.size());
  for (const auto& e : plan.entries) {
    if (!subset_of(small.at(e.from), large.at(e.to))) out.containment = false;
    const auto w = plan.weight(e);
    row[e.from] += w;
    col[e.to] += w;
  }
  const Rational rs(1, static_cast<long long>(small.size())), cs(1, static_cast<long long>(large.size()));
  for (const auto& r : row) out.max_row_residual = std::max<Rational>(out.max_row_residual, abs(r - rs));
  for (const auto& c : col) out.max_col_residual = std::max<Rational>(out.max_col_residual, abs(c - cs));
  return out;
}

/// CSV with one row per positive-weight pair: canonical texts and the weight.
inline void write_plan_csv(std::ostream& os, const TransportPlan& plan, const std::vector<OrderedTree>& small,
                           const std::vector<OrderedTree>& large) {
  os << "tree_k,tree_k1,weight_numerator,weight_denominator\n";
  for (const auto& e : plan.entries) {
    const auto w = plan.weight(e);
    os << '"' << encode(small[e.from]) << "\",\"" << encode(large[e.to]) << "\"," << numerator(w) << ','
       << denominator(w) << '\n';
  }
}

/// Enumerations and transport plans for sizes 1..exact_cap+1, built once and
/// shared read-only. Plans are cached on disk when a cache directory is given
/// (default: $GWCOUPLE_CACHE_DIR).
class ChainPlans {
 public:
  static constexpr unsigned kEnumerationCap = 12;

  explicit ChainPlans(unsigned exact_cap = 9, std::optional<std::filesystem::path> cache_dir = default_cache_dir())
      : exact_cap_(exact_cap) {
    if (exact_cap + 1 > kEnumerationCap)
      throw std::domain_error("ChainPlans: exact_cap must be <= " + std::to_string(kEnumerationCap - 1));
    trees_.resize(exact_cap + 2);
    index_.resize(exact_cap + 2);
    for (unsigned k = 1; k <= exact_cap + 1; ++k) {
      trees_[k] = enumerate_trees(k, kEnumerationCap);
      for (std::uint32_t i = 0; i < trees_[k].size(); ++i) index_[k].emplace(trees_[k][i].degree_vector(), i);
    }
    plans_.resize(exact_cap + 1);
    rows_.resize(exact_cap + 1);
    cols_.resize(exact_cap + 1);
    for (unsigned k = 1; k <= exact_cap; ++k) {
      plans_[k] = load_or_build(k, cache_dir);
      index_plan(k);
    }
  }

  static std::optional<std::filesystem::path> default_cache_dir() {
    if (const char* dir = std::getenv("GWCOUPLE_CACHE_DIR"); dir && *dir) return std::filesystem::path(dir);
    return std::nullopt;
  }

  unsigned exact_cap() const { return exact_cap_; }
  /// Largest size reached by exact steps alone.
  unsigned exact_upto() const { return exact_cap_ + 1; }

  const std::vector<OrderedTree>& trees(unsigned k) const { return trees_.at(k); }
  const TransportPlan& plan(unsigned k) const {
    if (k == 0 || k > exact_cap_) throw std::out_of_range("ChainPlans: no plan for size " + std::to_string(k));
    return plans_[k];
  }

  std::optional<std::uint32_t> index_of(const OrderedTree& t) const {
    if (t.size() > exact_upto()) return std::nullopt;
    const auto& m = index_[t.size()];
    auto it = m.find(t.degree_vector());
    if (it == m.end()) return std::nullopt;
    return it->second;
  }

  /// Draws the size-(k+1) partner of size-k tree i from its plan row.
  const TransportPlan::Entry& step_forward(unsigned k, std::uint32_t i, Rng& rng) const {
    const auto& p = plan(k);
    std::uint64_t r = rng.below(p.c_large);
    for (std::uint32_t e = rows_[k][i]; e < rows_[k][i + 1]; ++e) {
      if (r < p.entries[e].units) return p.entries[e];
      r -= p.entries[e].units;
    }
    throw std::logic_error("ChainPlans: plan row does not sum to its marginal");
  }

  /// Draws the size-k partner of size-(k+1) tree j from its plan column.
  const TransportPlan::Entry& step_backward(unsigned k, std::uint32_t j, Rng& rng) const {
    const auto& p = plan(k);
    std::uint64_t r = rng.below(p.c_small);
    for (std::uint32_t c = cols_[k].start[j]; c < cols_[k].start[j + 1]; ++c) {
      const auto& e = p.entries[cols_[k].order[c]];
      if (r < e.units) return e;
      r -= e.units;
    }
    throw std::logic_error("ChainPlans: plan column does not sum to its marginal");
  }

  /// One exact chain step from an enumerated tree of size k <= exact_cap.
  OrderedTree step_exact(const OrderedTree& t, Rng& rng) const {
    const auto k = static_cast<unsigned>(t.size());
    if (k > exact_cap_) throw std::out_of_range("chain_step_exact: no plan for size " + std::to_string(k));
    auto i = index_of(t);
    if (!i) throw std::invalid_argument("chain_step_exact: tree not enumerated");
    return trees_[k + 1][step_forward(k, *i, rng).to];
  }

 private:
  struct Columns {
    std::vector<std::uint32_t> start;
    std::vector<std::uint32_t> order;
  };

  TransportPlan load_or_build(unsigned k, const std::optional<std::filesystem::path>& dir) {
    std::filesystem::path file;
    if (dir) {
      file = *dir / ("plan_k" + std::to_string(k) + ".csv");
      if (auto cached = load(k, file)) return *cached;
    }
    auto plan = build_transport(k, trees_[k], trees_[k + 1]);
    if (dir) {
      std::error_code ec;
      std::filesystem::create_directories(*dir, ec);
      const auto tmp = file.string() + ".tmp";
      {
        std::ofstream os(tmp);
        write_plan_csv(os, plan, trees_[k], trees_[k + 1]);
      }
      std::filesystem::rename(tmp, file, ec);
    }
    return plan;
  }

  // A cache file that fails to parse or to reproduce exact marginals is ignored.
  std::optional<TransportPlan> load(unsigned k, const std::filesystem::path& file) const {
    std::ifstream is(file);
    if (!is) return std::nullopt;
    TransportPlan plan;
    plan.k = k;
    plan.c_small = trees_[k].size();
    plan.c_large = trees_[k + 1].size();
    const Rational scale = Rational(BigInt(plan.c_small) * plan.c_large);
    std::string line;
    std::getline(is, line);
    try {
      while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto q1 = line.find('"', 1);
        const auto q2 = line.find('"', q1 + 2);
        const auto q3 = line.find('"', q2 + 1);
        const auto comma = line.rfind(',');
        if (q1 == std::string::npos || q2 == std::string::npos || q3 == std::string::npos) return std::nullopt;
        const auto small = decode(std::string_view(line).substr(1, q1 - 1));
        const auto large = decode(std::string_view(line).substr(q2 + 1, q3 - q2 - 1));
        const Rational w = parse_rational(line.substr(q3 + 2, comma - q3 - 2)) / parse_rational(line.substr(comma + 1));
        const Rational units = w * scale;
        auto i = index_[k].find(small.degree_vector());
        auto j = index_[k + 1].find(large.degree_vector());
        if (i == index_[k].end() || j == index_[k + 1].end() || denominator(units) != 1) return std::nullopt;
        auto rem = detail::removals(large.degrees());
        std::optional<std::uint32_t> parent_pos;
        for (auto& r : rem)
          if (r.smaller == small.degree_vector()) parent_pos = r.parent_pos;
        if (!parent_pos) return std::nullopt;
        plan.entries.push_back({i->second, j->second, numerator(units).convert_to<std::uint64_t>(), *parent_pos});
      }
    } catch (const std::exception&) {
      return std::nullopt;
    }
    std::sort(plan.entries.begin(), plan.entries.end(), [](const auto& a, const auto& b) {
      return std::tie(a.from, a.to) < std::tie(b.from, b.to);
    });
    if (!check_plan(plan, trees_[k], trees_[k + 1]).exact()) return std::nullopt;
    return plan;
  }

  void index_plan(unsigned k) {
    const auto& p = plans_[k];
    auto& row = rows_[k];
    row.assign(p.c_small + 1, 0);
    for (const auto& e : p.entries) ++row[e.from + 1];
    for (std::size_t i = 1; i < row.size(); ++i) row[i] += row[i - 1];

    auto& col = cols_[k];
    col.start.assign(p.c_large + 1, 0);
    for (const auto& e : p.entries) ++col.start[e.to + 1];
    for (std::size_t j = 1; j < col.start.size(); ++j) col.start[j] += col.start[j - 1];
    col.order.assign(p.entries.size(), 0);
    auto fill = col.start;
    for (std::uint32_t e = 0; e < p.entries.size(); ++e) col.order[fill[p.entries[e].to]++] = e;
  }

  unsigned exact_cap_;
  std::vector<std::vector<OrderedTree>> trees_;
  std::vector<std::map<DegreeSeq, std::uint32_t>> index_;
  std::vector<TransportPlan> plans_;
  std::vector<std::vector<std::uint32_t>> rows_;
  std::vector<Columns> cols_;
};

inline OrderedTree chain_step_exact(const OrderedTree& t, const ChainPlans& plans, Rng& rng) {
  return plans.step_exact(t, rng);
}

/// Adds a new last child to a uniformly chosen vertex.
inline OrderedTree heuristic_grow(const OrderedTree& t, Rng& rng) {
  const auto v = static_cast<std::uint32_t>(rng.below(t.size()));
  const auto ends = detail::subtree_ends(t.degrees());
  DegreeSeq deg = t.degree_vector();
  deg.insert(deg.begin() + ends[v], 0);
  ++deg[v];
  return OrderedTree::from_degrees(std::move(deg));
}

enum class StepMode : std::uint8_t { Exact, Heuristic };

/// T_1 ⊂ ... ⊂ T_K stored as insertion order: vertex id 0 is the root, vertex id
/// j (j >= 1) was added by step j and is the last child of parent(j) at that
/// time. T_j consists of ids 0..j-1, so every prefix is nested by construction.
class ChainSample {
 public:
  ChainSample() = default;
  ChainSample(std::vector<std::uint32_t> parents, std::vector<StepMode> modes, std::uint64_t exact_upto)
      : parent_(std::move(parents)), modes_(std::move(modes)), exact_upto_(exact_upto) {}

  std::uint64_t size() const { return parent_.size() + 1; }
  std::uint64_t exact_upto() const { return exact_upto_; }
  /// modes()[j-1] is the mode of the step from T_j to T_{j+1}.
  const std::vector<StepMode>& modes() const { return modes_; }
  /// parents()[j-1] is the parent id of vertex id j.
  const std::vector<std::uint32_t>& parents() const { return parent_; }

  /// Preorder child counts of T_j restricted to depth <= horizon.
  DegreeSeq truncated(std::uint64_t j, std::uint32_t horizon = UINT32_MAX) const {
    if (j == 0 || j > size()) throw std::out_of_range("ChainSample: index out of range");
    std::vector<std::uint32_t> start(j + 1, 0);
    for (std::uint64_t id = 1; id < j; ++id) ++start[parent_[id - 1] + 1];
    for (std::uint64_t v = 1; v <= j; ++v) start[v] += start[v - 1];
    std::vector<std::uint32_t> kids(j > 0 ? j - 1 : 0);
    auto fill = start;
    for (std::uint64_t id = 1; id < j; ++id) kids[fill[parent_[id - 1]]++] = static_cast<std::uint32_t>(id);

    DegreeSeq deg;
    deg.reserve(j);
    std::vector<std::pair<std::uint32_t, std::uint32_t>> stack{{0, 0}};
    while (!stack.empty()) {
      auto [v, d] = stack.back();
      stack.pop_back();
      if (d >= horizon) {
        deg.push_back(0);
        continue;
      }
      deg.push_back(start[v + 1] - start[v]);
      for (auto c = start[v + 1]; c-- > start[v];) stack.push_back({kids[c], d + 1});
    }
    return deg;
  }

  OrderedTree tree(std::uint64_t j) const { return OrderedTree::from_degrees(truncated(j)); }

 private:
  std::vector<std::uint32_t> parent_;
  std::vector<StepMode> modes_;
  std::uint64_t exact_upto_ = 1;
};

/// Chain up to size K: exact steps while the plans allow (sizes up to
/// exact_cap + 1), uniform-vertex growth afterwards.
inline ChainSample sample_chain(std::uint64_t K, unsigned exact_cap, const ChainPlans& plans, Rng& rng) {
  if (K == 0) throw std::domain_error("sample_chain: K must be >= 1");
  if (exact_cap > plans.exact_cap()) throw std::domain_error("sample_chain: exact_cap exceeds the prepared plans");
  std::vector<std::uint32_t> parent;
  std::vector<StepMode> modes;
  parent.reserve(K - 1);
  modes.reserve(K - 1);

  // Preorder position -> vertex id for the current exact tree.
  std::vector<std::uint32_t> ids{0};
  std::uint32_t shape = 0;
  std::uint64_t k = 1;
  for (; k < K && k <= exact_cap; ++k) {
    const auto& small = plans.trees(static_cast<unsigned>(k))[shape];
    const auto& e = plans.step_forward(static_cast<unsigned>(k), shape, rng);
    const auto ends = detail::subtree_ends(small.degrees());
    const auto new_id = static_cast<std::uint32_t>(k);
    parent.push_back(ids[e.parent_pos]);
    ids.insert(ids.begin() + ends[e.parent_pos], new_id);
    modes.push_back(StepMode::Exact);
    shape = e.to;
  }
  const std::uint64_t exact_upto = k;
  for (; k < K; ++k) {
    parent.push_back(static_cast<std::uint32_t>(rng.below(k)));
    modes.push_back(StepMode::Heuristic);
  }
  return ChainSample(std::move(parent), std::move(modes), exact_upto);
}

}  // namespace gwcouple
