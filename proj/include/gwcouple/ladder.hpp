#pragma once

// Ladder process: subtree sizes L_1(p), L_2(p), ... for the children of one
// vertex, driven by a position variable X (P(X = l) = 2^-l) and a stream of
// unit-interval numbers shared by every parameter.
//
//   m <  X : size k with mass 2 p eta_k(p), infinite with the remainder
//   m == X : infinite, no number consumed
//   m >  X : 0 (stop) with mass zero_mass(n_inf, p), size k with mass
//            p eta_k(p), infinite with the remainder
//
// Outcomes are ordered 0 < 1 < 2 < ... < infinity. For a sorted parameter
// grid evaluated on the same numbers, outcomes are non-decreasing in p at every
// slot; run_ladder_grid checks this on each call.

#include "gwcouple/numerics.hpp"
#include "gwcouple/rng.hpp"

#include <boost/container/small_vector.hpp>

#include <array>
#include <bit>
#include <compare>
#include <concepts>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gwcouple {

/// Size of the subtree in one child slot: 0 (absent), finite k, or infinite.
struct SlotOutcome {
  static constexpr std::uint64_t kInfinite = std::numeric_limits<std::uint64_t>::max();
  std::uint64_t value = 0;

  static constexpr SlotOutcome infinite() { return {kInfinite}; }
  static constexpr SlotOutcome finite(std::uint64_t k) { return {k}; }

  constexpr bool is_infinite() const { return value == kInfinite; }
  constexpr bool is_zero() const { return value == 0; }
  constexpr bool is_finite() const { return !is_infinite(); }

  std::string to_string() const { return is_infinite() ? "inf" : std::to_string(value); }

  friend constexpr auto operator<=>(SlotOutcome, SlotOutcome) = default;
};

struct LadderCaps {
  std::uint64_t size_cap = 1ULL << 20;  // largest finite size resolved exactly
  std::uint32_t max_slots = 1U << 16;   // ladder abandoned (compromised) past this many slots
  std::uint32_t table_size = 4096;      // sizes held in the precomputed table
};

/// Precomputed float thresholds for one parameter.
class LadderParam {
 public:
  LadderParam(double p, std::uint32_t table_size = 4096) : sizes_(p, table_size) {
    for (unsigned n = 0; n < zero_.size(); ++n) zero_[n] = zero_mass(n, p);
  }

  double p() const { return sizes_.p(); }
  const SizeTable& sizes() const { return sizes_; }

  /// Outcome for a slot before X. `beyond_cap` is set when the finite size
  /// exceeds the cap; the returned value is then size_cap + 1.
  SlotOutcome pre_x(double u, std::uint64_t size_cap, bool& beyond_cap) const {
    const double p = sizes_.p();
    if (u >= 2.0 * (1.0 - p)) return SlotOutcome::infinite();
    return finite(u, 0.0, 2.0, size_cap, beyond_cap);
  }

  /// Outcome for a slot after X with n_inf infinite slots so far.
  SlotOutcome post_x(double u, std::uint32_t n_inf, std::uint64_t size_cap, bool& beyond_cap) const {
    const double p = sizes_.p();
    const double z = n_inf < zero_.size() ? zero_[n_inf] : zero_mass(n_inf, p);
    if (u < z) return SlotOutcome::finite(0);
    if (u >= z + (1.0 - p)) return SlotOutcome::infinite();
    return finite(u, z, 1.0, size_cap, beyond_cap);
  }

 private:
  SlotOutcome finite(double u, double offset, double scale, std::uint64_t size_cap, bool& beyond_cap) const {
    if (auto k = sizes_.finite_outcome(u, offset, scale, size_cap)) return SlotOutcome::finite(*k);
    beyond_cap = true;
    return SlotOutcome::finite(size_cap + 1);
  }

  SizeTable sizes_;
  std::array<double, 64> zero_{};
};

struct ParamTrace {
  double p = 0;
  std::vector<SlotOutcome> outcomes;  // L_1 .. L_{m0}; the last one is 0 unless compromised
  std::uint32_t m0 = 0;               // first slot with outcome 0; 0 when never reached
  bool beyond_size_cap = false;
  bool slot_cap_hit = false;

  bool compromised() const { return beyond_size_cap || slot_cap_hit; }
  std::uint32_t children() const { return m0 == 0 ? static_cast<std::uint32_t>(outcomes.size()) : m0 - 1; }

  /// Entry m-1 is the number of infinite outcomes among L_1 .. L_{m-1}.
  std::vector<std::uint32_t> n_inf() const {
    std::vector<std::uint32_t> out;
    out.reserve(outcomes.size());
    std::uint32_t n = 0;
    for (auto o : outcomes) {
      out.push_back(n);
      if (o.is_infinite()) ++n;
    }
    return out;
  }
};

struct LadderTrace {
  std::uint32_t X = 0;
  std::vector<double> U;
  std::vector<ParamTrace> params;
};

/// P(X = l) = 2^-l, l >= 1: one plus the number of trailing zero bits.
inline std::uint32_t draw_X(Rng& rng) {
  std::uint32_t base = 1;
  for (;;) {
    const std::uint64_t w = rng.next();
    if (w != 0) return base + static_cast<std::uint32_t>(std::countr_zero(w));
    base += 64;
  }
}

/// Evaluates a sorted grid on shared (X, U) into `trace`, reusing its storage.
/// Each slot other than X consumes exactly one number while any parameter is
/// still running.
template <std::invocable UStream>
void run_ladder_grid_into(std::span<const LadderParam> grid, std::uint32_t X, UStream&& next_u, const LadderCaps& caps,
                          LadderTrace& trace) {
  if (X == 0) throw std::domain_error("run_ladder: X must be >= 1");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i - 1].p() < grid[i].p())) throw std::domain_error("run_ladder_grid: parameters must be strictly increasing");

  const std::size_t r = grid.size();
  trace.X = X;
  trace.U.clear();
  trace.params.resize(r);
  boost::container::small_vector<std::uint32_t, 8> n_inf(r, 0);
  for (std::size_t i = 0; i < r; ++i) {
    auto& pt = trace.params[i];
    pt.p = grid[i].p();
    pt.outcomes.clear();
    pt.m0 = 0;
    pt.beyond_size_cap = false;
    pt.slot_cap_hit = false;
  }

  std::size_t first_alive = 0;  // parameters below this index have stopped
  for (std::uint32_t m = 1; first_alive < r; ++m) {
    if (m > caps.max_slots) {
      for (std::size_t i = first_alive; i < r; ++i) trace.params[i].slot_cap_hit = true;
      break;
    }
    const bool at_x = m == X;
    double u = 0;
    if (!at_x) {
      u = next_u();
      trace.U.push_back(u);
    }
    SlotOutcome prev = SlotOutcome::finite(0);
    for (std::size_t i = first_alive; i < r; ++i) {
      auto& pt = trace.params[i];
      SlotOutcome out;
      if (at_x) {
        out = SlotOutcome::infinite();
      } else if (m < X) {
        out = grid[i].pre_x(u, caps.size_cap, pt.beyond_size_cap);
      } else {
        out = grid[i].post_x(u, n_inf[i], caps.size_cap, pt.beyond_size_cap);
      }
      if (out < prev)
        throw std::logic_error("ladder monotonicity violated at slot " + std::to_string(m) + " between p=" +
                               std::to_string(grid[i - 1].p()) + " and p=" + std::to_string(grid[i].p()));
      prev = out;
      pt.outcomes.push_back(out);
      if (out.is_infinite()) ++n_inf[i];
      if (out.is_zero()) pt.m0 = m;
    }
    while (first_alive < r && trace.params[first_alive].m0 != 0) ++first_alive;
  }
}

template <std::invocable UStream>
LadderTrace run_ladder_grid(std::span<const LadderParam> grid, std::uint32_t X, UStream&& next_u,
                            const LadderCaps& caps = {}) {
  LadderTrace trace;
  run_ladder_grid_into(grid, X, std::forward<UStream>(next_u), caps, trace);
  return trace;
}

template <std::invocable UStream>
LadderTrace run_ladder(const LadderParam& param, std::uint32_t X, UStream&& next_u, const LadderCaps& caps = {}) {
  return run_ladder_grid(std::span<const LadderParam>(&param, 1), X, std::forward<UStream>(next_u), caps);
}

}  // namespace gwcouple
