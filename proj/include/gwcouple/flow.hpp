#pragma once

// Dinic max-flow over an arbitrary ordered capacity type (integers or exact
// rationals). Edges are scanned in insertion order, so the resulting flow is a
// deterministic function of the input graph.

#include <cstdint>
#include <limits>
#include <optional>
#include <queue>
#include <stdexcept>
#include <vector>

namespace gwcouple {

template <class Cap>
class MaxFlow {
 public:
  explicit MaxFlow(std::size_t nodes) : adj_(nodes) {}

  /// Returns an id usable with flow().
  std::size_t add_edge(std::size_t from, std::size_t to, Cap cap) {
    if (from >= adj_.size() || to >= adj_.size()) throw std::out_of_range("MaxFlow: node out of range");
    const std::size_t id = edges_.size();
    edges_.push_back({to, cap, Cap(0)});
    adj_[from].push_back(id);
    edges_.push_back({from, Cap(0), Cap(0)});
    adj_[to].push_back(id + 1);
    return id;
  }

  Cap max_flow(std::size_t s, std::size_t t) {
    Cap total = 0;
    while (bfs(s, t)) {
      iter_.assign(adj_.size(), 0);
      for (;;) {
        Cap pushed = dfs(s, t, std::nullopt);
        if (pushed == 0) break;
        total += pushed;
      }
    }
    return total;
  }

  const Cap& flow(std::size_t edge_id) const { return edges_.at(edge_id).flow; }

 private:
  struct Edge {
    std::size_t to;
    Cap cap;
    Cap flow;
  };

  Cap residual(const Edge& e) const { return e.cap - e.flow; }

  bool bfs(std::size_t s, std::size_t t) {
    level_.assign(adj_.size(), -1);
    level_[s] = 0;
    std::queue<std::size_t> q;
    q.push(s);
    while (!q.empty()) {
      auto v = q.front();
      q.pop();
      for (auto id : adj_[v]) {
        const auto& e = edges_[id];
        if (level_[e.to] < 0 && residual(e) > 0) {
          level_[e.to] = level_[v] + 1;
          q.push(e.to);
        }
      }
    }
    return level_[t] >= 0;
  }

  // `limit` empty means unbounded (the source has no incoming bottleneck).
  Cap dfs(std::size_t v, std::size_t t, const std::optional<Cap>& limit) {
    if (v == t) return limit ? *limit : Cap(0);
    for (auto& i = iter_[v]; i < adj_[v].size(); ++i) {
      const auto id = adj_[v][i];
      auto& e = edges_[id];
      if (level_[e.to] != level_[v] + 1 || !(residual(e) > 0)) continue;
      Cap room = residual(e);
      if (limit && *limit < room) room = *limit;
      Cap got = dfs(e.to, t, room);
      if (got > 0) {
        e.flow += got;
        edges_[id ^ 1].flow -= got;
        return got;
      }
    }
    return Cap(0);
  }

  std::vector<std::vector<std::size_t>> adj_;
  std::vector<Edge> edges_;
  std::vector<int> level_;
  std::vector<std::size_t> iter_;
};

}  // namespace gwcouple
