#pragma once

// Ordered (plane) trees as address sets closed under parent and elder sibling.
//
// A tree is stored as its preorder child-count sequence; because children of v
// are exactly (v,1), ..., (v,c_v), the sequence determines the address set and
// is its canonical form. Address-set views are available for checks that
// should not rely on the compact encoding.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace gwcouple {

using DegreeSeq = std::vector<std::uint32_t>;

class VertexAddress {
 public:
  VertexAddress() = default;
  explicit VertexAddress(std::vector<std::uint32_t> path) : path_(std::move(path)) {
    for (auto c : path_)
      if (c == 0) throw std::invalid_argument("VertexAddress: components must be >= 1");
  }
  VertexAddress(std::initializer_list<std::uint32_t> path) : VertexAddress(std::vector<std::uint32_t>(path)) {}

  static VertexAddress root() { return {}; }

  bool is_root() const { return path_.empty(); }
  std::size_t depth() const { return path_.size(); }
  const std::vector<std::uint32_t>& path() const { return path_; }

  VertexAddress child(std::uint32_t i) const {
    auto p = path_;
    p.push_back(i);
    return VertexAddress(std::move(p));
  }

  std::string to_string() const {
    if (path_.empty()) return "o";
    std::string s = "(";
    for (std::size_t i = 0; i < path_.size(); ++i) {
      if (i) s += ',';
      s += std::to_string(path_[i]);
    }
    return s + ")";
  }

  auto operator<=>(const VertexAddress&) const = default;

 private:
  std::vector<std::uint32_t> path_;
};

/// v^-; the parent of a depth-1 vertex is the root.
inline VertexAddress parent(const VertexAddress& v) {
  if (v.is_root()) throw std::domain_error("parent: the root has no parent");
  auto p = v.path();
  p.pop_back();
  return VertexAddress(std::move(p));
}

/// v' (youngest older sibling), undefined for first children.
inline std::optional<VertexAddress> elder_sibling(const VertexAddress& v) {
  if (v.is_root()) throw std::domain_error("elder_sibling: the root has no siblings");
  if (v.path().back() < 2) return std::nullopt;
  auto p = v.path();
  --p.back();
  return VertexAddress(std::move(p));
}

/// (u, v); the root is the identity on both sides.
inline VertexAddress concat(const VertexAddress& u, const VertexAddress& v) {
  auto p = u.path();
  p.insert(p.end(), v.path().begin(), v.path().end());
  return VertexAddress(std::move(p));
}

struct ParseError : std::runtime_error {
  ParseError(const std::string& what, std::size_t pos)
      : std::runtime_error(what + " at position " + std::to_string(pos)), position(pos) {}
  std::size_t position;
};

namespace detail {

/// Łukasiewicz condition: a nonempty preorder child-count sequence is a tree
/// iff the open-slot count stays positive until the very last vertex.
inline bool is_tree_sequence(std::span<const std::uint32_t> deg) {
  if (deg.empty()) return false;
  std::int64_t open = 1;
  for (std::size_t i = 0; i < deg.size(); ++i) {
    if (open <= 0) return false;
    open += static_cast<std::int64_t>(deg[i]) - 1;
  }
  return open == 0;
}

/// end[i] is one past the last preorder index of the subtree rooted at i.
inline std::vector<std::uint32_t> subtree_ends(std::span<const std::uint32_t> deg) {
  const auto n = static_cast<std::uint32_t>(deg.size());
  std::vector<std::uint32_t> end(n);
  for (std::uint32_t i = n; i-- > 0;) {
    std::uint32_t e = i + 1;
    for (std::uint32_t c = 0; c < deg[i]; ++c) e = end[e];
    end[i] = e;
  }
  return end;
}

inline std::vector<std::uint32_t> depths(std::span<const std::uint32_t> deg) {
  std::vector<std::uint32_t> out(deg.size());
  std::vector<std::uint32_t> open;
  for (std::size_t i = 0; i < deg.size(); ++i) {
    while (!open.empty() && open.back() == 0) open.pop_back();
    out[i] = static_cast<std::uint32_t>(open.size());
    if (!open.empty()) --open.back();
    if (deg[i] > 0) open.push_back(deg[i]);
  }
  return out;
}

/// Preorder addresses of every vertex.
inline std::vector<VertexAddress> addresses(std::span<const std::uint32_t> deg) {
  std::vector<VertexAddress> out;
  out.reserve(deg.size());
  struct Frame {
    std::uint32_t remaining;
    std::uint32_t next_child;
    std::size_t node;
  };
  std::vector<Frame> open;
  for (std::size_t i = 0; i < deg.size(); ++i) {
    while (!open.empty() && open.back().remaining == 0) open.pop_back();
    if (open.empty()) {
      out.emplace_back();
    } else {
      auto& f = open.back();
      out.push_back(out[f.node].child(f.next_child++));
      --f.remaining;
    }
    if (deg[i] > 0) open.push_back({deg[i], 1, i});
  }
  return out;
}

/// Appends the vertices at depth <= horizon to `out`; vertices on the horizon
/// lose their children.
inline void truncate_into(std::span<const std::uint32_t> deg, std::uint32_t horizon, DegreeSeq& out) {
  if (horizon == 0) {
    out.push_back(0);
    return;
  }
  if (deg.size() <= std::size_t{horizon} + 1) {  // too small to reach past the horizon
    out.insert(out.end(), deg.begin(), deg.end());
    return;
  }
  std::vector<std::uint32_t> open;
  for (std::size_t i = 0; i < deg.size(); ++i) {
    while (!open.empty() && open.back() == 0) open.pop_back();
    const auto d = static_cast<std::uint32_t>(open.size());
    if (!open.empty()) --open.back();
    if (deg[i] > 0) open.push_back(deg[i]);
    if (d < horizon)
      out.push_back(deg[i]);
    else if (d == horizon)
      out.push_back(0);
  }
}

/// Keeps vertices at depth <= horizon; vertices on the horizon lose their children.
inline DegreeSeq truncate(std::span<const std::uint32_t> deg, std::uint32_t horizon) {
  DegreeSeq out;
  out.reserve(deg.size());
  truncate_into(deg, horizon, out);
  return out;
}

inline std::uint32_t height(std::span<const std::uint32_t> deg) {
  auto d = depths(deg);
  return d.empty() ? 0 : *std::max_element(d.begin(), d.end());
}

inline std::string encode(std::span<const std::uint32_t> deg, const std::vector<std::uint8_t>* frontier) {
  std::string out;
  out.reserve(deg.size() * 3);
  struct Frame {
    std::uint32_t remaining;
    std::size_t node;
    bool first;
  };
  std::vector<Frame> open;
  std::size_t i = 0;
  out += '[';
  open.push_back({deg[0], 0, true});
  while (!open.empty()) {
    auto& top = open.back();
    if (top.remaining == 0) {
      out += ']';
      if (frontier && (*frontier)[top.node]) out += '*';
      open.pop_back();
      continue;
    }
    --top.remaining;
    if (!top.first) out += ',';
    top.first = false;
    ++i;
    out += '[';
    open.push_back({deg[i], i, true});
  }
  return out;
}

struct Decoded {
  DegreeSeq degrees;
  std::vector<std::uint8_t> frontier;
  bool any_frontier = false;
};

inline Decoded decode(std::string_view text) {
  Decoded d;
  std::vector<std::size_t> open;
  enum class Expect { Open, OpenOrClose, SepOrClose, End } expect = Expect::Open;
  for (std::size_t pos = 0; pos < text.size(); ++pos) {
    const char c = text[pos];
    if (c == ' ' || c == '\n' || c == '\t' || c == '\r') continue;
    switch (c) {
      case '[':
        if (expect != Expect::Open && expect != Expect::OpenOrClose) throw ParseError("unexpected '['", pos);
        if (!open.empty()) ++d.degrees[open.back()];
        open.push_back(d.degrees.size());
        d.degrees.push_back(0);
        d.frontier.push_back(0);
        expect = Expect::OpenOrClose;
        break;
      case ']':
        if (expect != Expect::OpenOrClose && expect != Expect::SepOrClose) throw ParseError("unexpected ']'", pos);
        {
          const std::size_t node = open.back();
          open.pop_back();
          expect = open.empty() ? Expect::End : Expect::SepOrClose;
          if (pos + 1 < text.size() && text[pos + 1] == '*') {
            d.frontier[node] = 1;
            d.any_frontier = true;
            ++pos;
          }
        }
        break;
      case ',':
        if (expect != Expect::SepOrClose) throw ParseError("unexpected ','", pos);
        expect = Expect::Open;
        break;
      default:
        throw ParseError(std::string("unexpected character '") + c + "'", pos);
    }
  }
  if (expect != Expect::End) throw ParseError(d.degrees.empty() ? "empty input" : "unterminated tree", text.size());
  return d;
}

}  // namespace detail

class OrderedTree {
 public:
  /// The single-vertex tree {o}.
  OrderedTree() : degrees_{0} {}

  static OrderedTree from_degrees(DegreeSeq deg) {
    if (!detail::is_tree_sequence(deg)) throw std::invalid_argument("OrderedTree: not a preorder child-count sequence");
    OrderedTree t;
    t.degrees_ = std::move(deg);
    return t;
  }

  /// Builds a tree from an address set, checking membership in the class:
  /// root present, closed under parent and under elder sibling.
  static OrderedTree from_addresses(const std::set<VertexAddress>& vertices) {
    if (!vertices.contains(VertexAddress::root())) throw std::invalid_argument("OrderedTree: root missing");
    for (const auto& v : vertices) {
      if (v.is_root()) continue;
      if (!vertices.contains(parent(v)))
        throw std::invalid_argument("OrderedTree: parent of " + v.to_string() + " missing");
      if (auto s = elder_sibling(v); s && !vertices.contains(*s))
        throw std::invalid_argument("OrderedTree: elder sibling of " + v.to_string() + " missing");
    }
    DegreeSeq deg;
    deg.reserve(vertices.size());
    // std::set orders addresses lexicographically, which is preorder.
    for (const auto& v : vertices) {
      std::uint32_t c = 0;
      while (vertices.contains(v.child(c + 1))) ++c;
      deg.push_back(c);
    }
    return from_degrees(std::move(deg));
  }

  std::size_t size() const { return degrees_.size(); }
  std::span<const std::uint32_t> degrees() const { return degrees_; }
  const DegreeSeq& degree_vector() const { return degrees_; }
  std::uint32_t root_degree() const { return degrees_[0]; }
  std::uint32_t height() const { return detail::height(degrees_); }

  std::vector<VertexAddress> addresses() const { return detail::addresses(degrees_); }
  std::set<VertexAddress> address_set() const {
    auto a = addresses();
    return {a.begin(), a.end()};
  }

  /// Preorder index of v, if present.
  std::optional<std::size_t> find(const VertexAddress& v) const {
    std::vector<std::uint32_t> ends;
    std::size_t node = 0;
    for (auto c : v.path()) {
      if (c > degrees_[node]) return std::nullopt;
      if (ends.empty()) ends = detail::subtree_ends(degrees_);
      std::size_t child = node + 1;
      for (std::uint32_t i = 1; i < c; ++i) child = ends[child];
      node = child;
    }
    return node;
  }
  bool has_vertex(const VertexAddress& v) const { return find(v).has_value(); }

  friend bool operator==(const OrderedTree&, const OrderedTree&) = default;
  /// Canonical order: lexicographic on the preorder child-count sequence.
  friend auto operator<=>(const OrderedTree& a, const OrderedTree& b) { return a.degrees_ <=> b.degrees_; }

 private:
  DegreeSeq degrees_;
};

enum class TruncationReason : std::uint32_t {
  DepthCap = 1U << 0,
  SizeCap = 1U << 1,
  LadderCap = 1U << 2,
  BreadthCap = 1U << 3,
};

struct TreeStatus {
  std::uint32_t reasons = 0;

  bool clean() const { return reasons == 0; }
  void add(TruncationReason r) { reasons |= static_cast<std::uint32_t>(r); }
  void merge(const TreeStatus& other) { reasons |= other.reasons; }
  bool has(TruncationReason r) const { return reasons & static_cast<std::uint32_t>(r); }

  std::string describe() const {
    if (clean()) return "clean";
    std::string s = "compromised:";
    if (has(TruncationReason::DepthCap)) s += " depth-cap";
    if (has(TruncationReason::SizeCap)) s += " size-cap";
    if (has(TruncationReason::LadderCap)) s += " ladder-cap";
    if (has(TruncationReason::BreadthCap)) s += " breadth-cap";
    return s;
  }

  friend bool operator==(const TreeStatus&, const TreeStatus&) = default;
};

/// Depth-limited view of a possibly infinite tree. Vertices on the horizon carry
/// no children; `frontier` marks those that root an unexplored infinite subtree.
class TruncatedTree {
 public:
  TruncatedTree() : degrees_{0}, frontier_{0} {}

  static TruncatedTree from_parts(DegreeSeq deg, std::vector<std::uint8_t> frontier, std::uint32_t horizon,
                                  TreeStatus status = {}) {
    if (!detail::is_tree_sequence(deg)) throw std::invalid_argument("TruncatedTree: not a preorder child-count sequence");
    if (frontier.size() != deg.size()) throw std::invalid_argument("TruncatedTree: frontier flags size mismatch");
    auto dep = detail::depths(deg);
    for (std::size_t i = 0; i < deg.size(); ++i) {
      if (dep[i] > horizon) throw std::invalid_argument("TruncatedTree: vertex beyond horizon");
      if (frontier[i] && dep[i] != horizon) throw std::invalid_argument("TruncatedTree: frontier vertex off the horizon");
    }
    return unchecked(std::move(deg), std::move(frontier), horizon, status);
  }

  static TruncatedTree unchecked(DegreeSeq deg, std::vector<std::uint8_t> frontier, std::uint32_t horizon,
                                 TreeStatus status = {}) {
    TruncatedTree t;
    t.degrees_ = std::move(deg);
    t.frontier_ = std::move(frontier);
    t.horizon_ = horizon;
    t.status_ = status;
    return t;
  }

  /// Truncation of a finite tree; no frontier marks.
  static TruncatedTree from_tree(const OrderedTree& tree, std::uint32_t horizon) {
    auto deg = detail::truncate(tree.degrees(), horizon);
    std::vector<std::uint8_t> fr(deg.size(), 0);
    return unchecked(std::move(deg), std::move(fr), horizon);
  }

  /// A single vertex on a horizon of 0, marked as an unexplored infinite subtree.
  static TruncatedTree infinite_stub() {
    TruncatedTree t;
    t.frontier_[0] = 1;
    return t;
  }

  std::size_t size() const { return degrees_.size(); }
  std::span<const std::uint32_t> degrees() const { return degrees_; }
  const DegreeSeq& degree_vector() const { return degrees_; }
  const std::vector<std::uint8_t>& frontier() const { return frontier_; }
  std::uint32_t horizon() const { return horizon_; }
  const TreeStatus& status() const { return status_; }
  TreeStatus& status() { return status_; }
  std::uint32_t root_degree() const { return degrees_[0]; }

  std::size_t frontier_count() const {
    return static_cast<std::size_t>(std::count(frontier_.begin(), frontier_.end(), std::uint8_t{1}));
  }

  std::vector<VertexAddress> addresses() const { return detail::addresses(degrees_); }
  std::vector<VertexAddress> frontier_addresses() const {
    auto all = addresses();
    std::vector<VertexAddress> out;
    for (std::size_t i = 0; i < all.size(); ++i)
      if (frontier_[i]) out.push_back(all[i]);
    return out;
  }

  friend bool operator==(const TruncatedTree&, const TruncatedTree&) = default;

 private:
  DegreeSeq degrees_;
  std::vector<std::uint8_t> frontier_;
  std::uint32_t horizon_ = 0;
  TreeStatus status_;
};

struct ContainmentResult {
  bool contained = true;
  std::optional<VertexAddress> witness;  // a vertex of the inner tree missing from the outer one
};

namespace detail {

/// One past the last preorder index of the subtree rooted at i.
inline std::uint32_t skip_subtree(std::span<const std::uint32_t> deg, std::uint32_t i) {
  std::int64_t open = 1;
  while (open > 0) open += static_cast<std::int64_t>(deg[i++]) - 1;
  return i;
}

/// Walks both preorders in step: the children of a matched vertex in `a` are
/// matched to the first children in `b`, and b's extra children are skipped.
inline ContainmentResult check_subset(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b,
                                      std::uint32_t horizon) {
  struct Frame {
    std::uint32_t left_a, left_b, depth;
  };
  std::vector<Frame> stack;
  std::uint32_t x = 0, y = 0, d = 0;
  bool visit = true;
  for (;;) {
    if (visit) {
      if (d >= horizon) {
        x = skip_subtree(a, x);
        y = skip_subtree(b, y);
      } else {
        if (a[x] > b[y]) return {false, addresses(a.first(x + 1))[x].child(b[y] + 1)};
        stack.push_back({a[x], b[y] - a[x], d});
        ++x;
        ++y;
      }
      visit = false;
    }
    if (stack.empty()) break;
    auto& f = stack.back();
    if (f.left_a > 0) {
      --f.left_a;
      d = f.depth + 1;
      visit = true;
      continue;
    }
    for (; f.left_b > 0; --f.left_b) y = skip_subtree(b, y);
    stack.pop_back();
  }
  return {};
}

}  // namespace detail

/// inner ⊆ outer as address sets.
inline ContainmentResult check_subset(const OrderedTree& inner, const OrderedTree& outer) {
  return detail::check_subset(inner.degrees(), outer.degrees(), UINT32_MAX);
}

/// inner ⊆ outer, compared on the vertices within both horizons.
inline ContainmentResult check_subset(const TruncatedTree& inner, const TruncatedTree& outer) {
  return detail::check_subset(inner.degrees(), outer.degrees(), std::min(inner.horizon(), outer.horizon()));
}

template <class A, class B>
bool subset_of(const A& inner, const B& outer) {
  return check_subset(inner, outer).contained;
}

/// H(T^v): the subtree at v shifted so that v becomes the root; nullopt when v ∉ T.
inline std::optional<OrderedTree> subtree(const OrderedTree& tree, const VertexAddress& v) {
  auto at = tree.find(v);
  if (!at) return std::nullopt;
  auto ends = detail::subtree_ends(tree.degrees());
  auto deg = tree.degrees();
  return OrderedTree::from_degrees(DegreeSeq(deg.begin() + static_cast<std::ptrdiff_t>(*at),
                                             deg.begin() + static_cast<std::ptrdiff_t>(ends[*at])));
}

/// Union of two truncated trees on a common horizon. Frontier marks are kept
/// from either side. `changed` reports whether the result differs from `base`.
struct MergeResult {
  TruncatedTree tree;
  bool changed = false;
};

inline MergeResult merge_union(const TruncatedTree& base, const TruncatedTree& extra) {
  if (base.horizon() != extra.horizon()) throw std::invalid_argument("merge_union: horizons differ");
  const auto horizon = base.horizon();
  auto a = base.degrees();
  auto b = extra.degrees();
  const auto end_a = detail::subtree_ends(a);
  const auto end_b = detail::subtree_ends(b);
  constexpr std::uint32_t kNone = UINT32_MAX;

  DegreeSeq deg;
  std::vector<std::uint8_t> fr;
  deg.reserve(a.size() + b.size());
  fr.reserve(a.size() + b.size());
  bool changed = false;

  struct Item {
    std::uint32_t x, y, depth;
  };
  std::vector<Item> stack{{0, 0, 0}};
  std::vector<std::uint32_t> kids_a, kids_b;
  while (!stack.empty()) {
    auto [x, y, d] = stack.back();
    stack.pop_back();
    const std::uint32_t da = x == kNone ? 0 : a[x];
    const std::uint32_t db = (y == kNone || d >= horizon) ? 0 : b[y];
    const std::uint32_t dout = std::max(da, db);
    if (x == kNone || dout != da) changed = true;
    deg.push_back(dout);
    const bool frontier = (x != kNone && base.frontier()[x]) || (y != kNone && extra.frontier()[y]);
    fr.push_back(frontier ? 1 : 0);
    kids_a.clear();
    kids_b.clear();
    for (std::uint32_t i = 0, c = x + 1; i < da; ++i, c = end_a[c]) kids_a.push_back(c);
    for (std::uint32_t i = 0, c = y + 1; i < db; ++i, c = end_b[c]) kids_b.push_back(c);
    for (std::uint32_t i = dout; i-- > 0;)
      stack.push_back({i < da ? kids_a[i] : kNone, i < db ? kids_b[i] : kNone, d + 1});
  }
  TreeStatus st = base.status();
  st.merge(extra.status());
  return {TruncatedTree::unchecked(std::move(deg), std::move(fr), horizon, st), changed};
}

/// All trees with k vertices in canonical (lexicographic preorder) order.
inline std::vector<OrderedTree> enumerate_trees(unsigned k, unsigned cap = 12) {
  if (k == 0) throw std::domain_error("enumerate_trees: k must be >= 1");
  if (k > cap) throw std::length_error("enumerate_trees: k=" + std::to_string(k) + " exceeds cap " + std::to_string(cap));
  std::vector<OrderedTree> out;
  DegreeSeq cur(k);
  // open = number of vertices announced but not yet placed.
  auto rec = [&](auto&& self, unsigned pos, unsigned open) -> void {
    if (pos == k) {
      if (open == 0) out.push_back(OrderedTree::from_degrees(cur));
      return;
    }
    const unsigned remaining_after = k - pos - 1;
    for (unsigned d = 0; open - 1 + d <= remaining_after; ++d) {
      const unsigned next_open = open - 1 + d;
      if (next_open == 0 && remaining_after > 0) continue;
      cur[pos] = d;
      self(self, pos + 1, next_open);
    }
  };
  rec(rec, 0, 1);
  return out;
}

inline std::string encode(const OrderedTree& t) { return detail::encode(t.degrees(), nullptr); }

/// Canonical text with a '*' after every frontier vertex.
inline std::string encode(const TruncatedTree& t) { return detail::encode(t.degrees(), &t.frontier()); }

inline OrderedTree decode(std::string_view text) {
  auto d = detail::decode(text);
  if (d.any_frontier) throw ParseError("frontier marker in a finite tree", text.find('*'));
  return OrderedTree::from_degrees(std::move(d.degrees));
}

/// Parses the frontier-marked form. The horizon defaults to the tree height.
inline TruncatedTree decode_truncated(std::string_view text, std::optional<std::uint32_t> horizon = std::nullopt) {
  auto d = detail::decode(text);
  const auto h = horizon.value_or(detail::height(d.degrees));
  return TruncatedTree::from_parts(std::move(d.degrees), std::move(d.frontier), h);
}

namespace detail {
inline std::string to_dot(std::span<const std::uint32_t> deg, const std::vector<std::uint8_t>* frontier,
                          std::string_view name) {
  auto addr = addresses(deg);
  std::ostringstream os;
  os << "digraph " << name << " {\n";
  for (std::size_t i = 0; i < addr.size(); ++i) {
    os << "  \"" << addr[i].to_string() << '"';
    if (frontier && (*frontier)[i]) os << " [shape=doublecircle]";
    os << ";\n";
  }
  for (std::size_t i = 1; i < addr.size(); ++i)
    os << "  \"" << parent(addr[i]).to_string() << "\" -> \"" << addr[i].to_string() << "\";\n";
  os << "}\n";
  return os.str();
}
}  // namespace detail

inline std::string to_dot(const OrderedTree& t, std::string_view name = "T") {
  return detail::to_dot(t.degrees(), nullptr, name);
}
inline std::string to_dot(const TruncatedTree& t, std::string_view name = "T") {
  return detail::to_dot(t.degrees(), &t.frontier(), name);
}

}  // namespace gwcouple
