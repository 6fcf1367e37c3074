#pragma once

// Closed-form quantities for Geometric(p) Galton-Watson trees, where a vertex
// has k children with probability p^k (1 - p).
//
// Every quantity is available in two numeric modes selected by the scalar
// type: `Rational` (exact, used to certify identities) and `double` (used on
// sampling paths; large-k terms are evaluated in log space).

#include "gwcouple/rational.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

namespace gwcouple {

template <class Real>
concept Scalar = std::is_same_v<Real, double> || std::is_same_v<Real, Rational>;

namespace detail {

template <Scalar Real>
Real ipow(Real base, unsigned e) {
  Real acc = 1;
  while (e) {
    if (e & 1U) acc *= base;
    base *= base;
    e >>= 1U;
  }
  return acc;
}

inline void require_open_unit(double p, const char* what) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error(std::string(what) + ": p must lie in (0, 1)");
}

template <Scalar Real>
void require_ladder_range(const Real& p, const char* what) {
  if (p < Real(1) / 2 || p > 1) throw std::domain_error(std::string(what) + ": p must lie in [1/2, 1]");
}

}  // namespace detail

/// c_k, the number of ordered trees with k vertices (= Catalan(k - 1)).
inline BigInt catalan(unsigned k) {
  if (k == 0) throw std::domain_error("catalan: k must be >= 1");
  // Catalan(n) = C(2n, n) / (n + 1), accumulated so every step stays integral.
  const unsigned n = k - 1;
  BigInt c = 1;
  for (unsigned i = 0; i < n; ++i) c = c * 2 * (2 * i + 1) / (i + 2);
  return c;
}

/// c_1 .. c_K, grown once by the ratio recurrence.
class CatalanTable {
 public:
  explicit CatalanTable(unsigned k_max) : counts_(k_max + 1) {
    if (k_max == 0) return;
    counts_[1] = 1;
    for (unsigned k = 2; k <= k_max; ++k) counts_[k] = counts_[k - 1] * 2 * (2 * k - 3) / k;
  }
  const BigInt& operator[](unsigned k) const { return counts_.at(k); }
  unsigned max_size() const { return static_cast<unsigned>(counts_.size()) - 1; }

 private:
  std::vector<BigInt> counts_;
};

inline double log_catalan(unsigned k) {
  const double n = k - 1.0;
  return std::lgamma(2 * n + 1) - std::lgamma(n + 1) - std::lgamma(n + 2);
}

/// eta_k(p) = P(|T(p)| = k) = c_k p^(k-1) (1-p)^k.
template <Scalar Real>
Real eta(unsigned k, const Real& p) {
  if (k == 0) throw std::domain_error("eta: k must be >= 1");
  if (p < 0 || p > 1) throw std::domain_error("eta: p must lie in [0, 1]");
  if constexpr (std::is_same_v<Real, Rational>) {
    return Rational(catalan(k)) * detail::ipow<Rational>(p, k - 1) * detail::ipow<Rational>(1 - p, k);
  } else {
    if (p == 1.0) return 0.0;
    if (p == 0.0) return k == 1 ? 1.0 : 0.0;
    const double log_eta = log_catalan(k) + (k - 1.0) * std::log(p) + k * std::log1p(-p);
    const double v = std::exp(log_eta);
    if (std::isnan(v)) throw std::range_error("eta: NaN for k=" + std::to_string(k));
    return v;
  }
}

/// Survival probability: 0 for p <= 1/2, (2p - 1)/p above.
template <Scalar Real>
Real eta_inf(const Real& p) {
  if (p <= 0 || p > 1) throw std::domain_error("eta_inf: p must lie in (0, 1]");
  if (p <= Real(1) / 2) return Real(0);
  return (2 * p - 1) / p;
}

/// p * eta_k(p) = c_k p^k (1-p)^k; non-increasing in p on [1/2, 1].
template <Scalar Real>
Real p_eta(unsigned k, const Real& p) {
  return p * eta(k, p);
}

/// 2^n p(1-p) / ((2^n - 2) p + 1): mass of the terminating outcome once n
/// infinite subtrees have been placed.
template <Scalar Real>
Real zero_mass(unsigned n, const Real& p) {
  if constexpr (std::is_same_v<Real, Rational>) {
    const Rational two_n = Rational(BigInt(1) << n);
    return two_n * p * (1 - p) / ((two_n - 2) * p + 1);
  } else {
    // Divide through by 2^n so large n cannot overflow.
    const double inv = std::ldexp(1.0, -static_cast<int>(std::min(n, 2000U)));
    return p * (1 - p) / (p - 2 * inv * p + inv);
  }
}

/// (2^n - 1) p / ((2^n - 2) p + 1) * p eta_inf(p): mass of an infinite outcome
/// after n infinite subtrees.
template <Scalar Real>
Real post_infinite_mass(unsigned n, const Real& p) {
  if constexpr (std::is_same_v<Real, Rational>) {
    const Rational two_n = Rational(BigInt(1) << n);
    return (two_n - 1) * p / ((two_n - 2) * p + 1) * p * eta_inf(p);
  } else {
    const double inv = std::ldexp(1.0, -static_cast<int>(std::min(n, 2000U)));
    return (1 - inv) * p / (p - 2 * inv * p + inv) * p * eta_inf(p);
  }
}

enum class LadderStage { PreX, PostX };

/// Partition of [0, 1] into ladder outcomes for one stage.
///
/// PreX:      [cut_0=0, cut_1) -> 1, [cut_1, cut_2) -> 2, ..., then finite sizes
///            beyond the table, then infinity.
/// PostX(n):  [0, zero_mass) -> 0, then sizes 1, 2, ... as above.
///
/// `cut_points` holds the right end of every listed interval in order (the
/// zero interval first for PostX). Mass not covered by listed intervals is split
/// exactly into `finite_tail` (sizes > size cap) and `infinite_mass`.
template <Scalar Real>
struct ThresholdTable {
  LadderStage stage = LadderStage::PreX;
  unsigned n_inf = 0;
  Real zero = 0;
  std::vector<Real> cut_points;
  Real finite_tail = 0;
  Real infinite_mass = 0;

  unsigned size_cap() const {
    return static_cast<unsigned>(cut_points.size()) - (stage == LadderStage::PostX ? 1U : 0U);
  }
  Real listed_mass() const { return cut_points.empty() ? Real(0) : cut_points.back(); }
  Real total_mass() const { return listed_mass() + finite_tail + infinite_mass; }
};

template <Scalar Real>
ThresholdTable<Real> ladder_thresholds(const Real& p, LadderStage stage, unsigned n_inf, unsigned size_cap) {
  detail::require_ladder_range(p, "ladder_thresholds");
  ThresholdTable<Real> t;
  t.stage = stage;
  t.n_inf = stage == LadderStage::PostX ? n_inf : 0;
  const Real scale = stage == LadderStage::PreX ? Real(2) : Real(1);
  Real acc = 0;
  if (stage == LadderStage::PostX) {
    t.zero = zero_mass(n_inf, p);
    acc = t.zero;
    t.cut_points.push_back(acc);
  }
  Real finite_listed = 0;
  for (unsigned k = 1; k <= size_cap; ++k) {
    const Real m = scale * p_eta(k, p);
    finite_listed += m;
    acc += m;
    t.cut_points.push_back(acc);
  }
  // Sum over all finite k of p eta_k(p) is p (1 - eta_inf(p)) = 1 - p.
  const Real finite_total = scale * (1 - p);
  t.finite_tail = finite_total - finite_listed;
  if constexpr (std::is_same_v<Real, double>) t.finite_tail = std::max(0.0, t.finite_tail);
  t.infinite_mass = stage == LadderStage::PreX ? p * eta_inf(p) : post_infinite_mass(n_inf, p);
  return t;
}

struct PartitionCheck {
  Rational residual;   // closed-form total minus one; zero when the partition is exact
  Rational tail_mass;  // finite mass beyond tail_cap, always positive for p < 1
};

/// The two partition identities behind the ladder's well-definedness.
/// n = 0 checks the pre-X stage, n >= 1 the post-X stage with n infinite
/// subtrees already placed. Finite masses enter through the closed form
/// sum_k eta_k(p) = 1 - eta_inf(p); tail_cap reports how much of that sum lies
/// beyond the first tail_cap sizes.
inline PartitionCheck check_partition_identity(const Rational& p, unsigned n, unsigned tail_cap) {
  if (p < Rational(1, 2) || p >= 1) throw std::domain_error("check_partition_identity: p must lie in [1/2, 1)");
  const Rational ei = eta_inf(p);
  const Rational finite_sum = 1 - ei;
  Rational partial = 0;
  for (unsigned k = 1; k <= tail_cap; ++k) partial += eta(k, p);

  PartitionCheck out;
  if (n == 0) {
    out.residual = p * ei + 2 * p * finite_sum - 1;
    out.tail_mass = 2 * p * (finite_sum - partial);
  } else {
    const Rational two_n = Rational(BigInt(1) << n);
    const Rational denom = (two_n - 2) * p + 1;
    out.residual = two_n * p * (1 - p) / denom + (two_n - 1) * p / denom * p * ei + p * finite_sum - 1;
    out.tail_mass = p * (finite_sum - partial);
  }
  return out;
}

/// Left side of the induction identity
///   sum_{l=1}^{I} 2^{-l} (prod_{m=l}^{I-1} (2^m - 1)p / ((2^m - 2)p + 1)) * 2^I / ((2^I - 2)p + 1)
/// minus one. The empty product (l = I) is 1.
inline Rational check_induction_identity(const Rational& p, unsigned I) {
  if (I == 0) throw std::domain_error("check_induction_identity: I must be >= 1");
  if (p < Rational(1, 2) || p > 1) throw std::domain_error("check_induction_identity: p must lie in [1/2, 1]");
  auto factor = [&](unsigned m) -> Rational {
    const Rational two_m = Rational(BigInt(1) << m);
    return (two_m - 1) * p / ((two_m - 2) * p + 1);
  };
  // Walk l downward so the product over m = l..I-1 grows one factor at a time.
  Rational sum = 0;
  Rational prod = 1;
  for (unsigned l = I; l >= 1; --l) {
    if (l < I) prod *= factor(l);
    sum += prod / Rational(BigInt(1) << l);
  }
  const Rational two_i = Rational(BigInt(1) << I);
  return sum * two_i / ((two_i - 2) * p + 1) - 1;
}

/// Residual of the survival fixed point 1 - eta = (1 - p) / (1 - p (1 - eta)).
inline Rational check_fixed_point(const Rational& p) {
  const Rational e = eta_inf(p);
  return (1 - e) - (1 - p) / (1 - p * (1 - e));
}

struct MonotonicityViolation {
  enum class Part { PEtaInP, ZeroMassInP, ZeroMassInN } part;
  unsigned index;  // k for PEtaInP, n otherwise (the smaller n for ZeroMassInN)
  Rational p_low, p_high;
  Rational value_low, value_high;
};

/// Checks on a sorted grid that p eta_k(p) and zero_mass(n, p) are non-increasing
/// in p, and that zero_mass(n, p) is non-increasing in n >= 1 for p < 1.
inline std::vector<MonotonicityViolation> monotonicity_report(const std::vector<Rational>& grid, unsigned k_max,
                                                              unsigned n_max) {
  for (const auto& p : grid)
    if (p < Rational(1, 2) || p > 1) throw std::domain_error("monotonicity_report: grid must lie in [1/2, 1]");
  if (!std::is_sorted(grid.begin(), grid.end())) throw std::domain_error("monotonicity_report: grid must be sorted");

  using Part = MonotonicityViolation::Part;
  std::vector<MonotonicityViolation> out;
  for (unsigned k = 1; k <= k_max; ++k) {
    for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
      Rational a = p_eta(k, grid[i]);
      Rational b = p_eta(k, grid[i + 1]);
      if (b > a) out.push_back({Part::PEtaInP, k, grid[i], grid[i + 1], a, b});
    }
  }
  for (unsigned n = 1; n <= n_max; ++n) {
    for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
      Rational a = zero_mass(n, grid[i]);
      Rational b = zero_mass(n, grid[i + 1]);
      if (b > a) out.push_back({Part::ZeroMassInP, n, grid[i], grid[i + 1], a, b});
    }
  }
  for (const auto& p : grid) {
    if (p >= 1) continue;
    for (unsigned n = 1; n < n_max; ++n) {
      Rational a = zero_mass(n, p);
      Rational b = zero_mass(n + 1, p);
      if (b > a) out.push_back({Part::ZeroMassInN, n, p, p, a, b});
    }
  }
  return out;
}

/// Float cumulative table of p eta_k(p), k = 1..K, used on sampling paths.
/// Sizes past the table are resolved by continuing the sum with the ratio
/// eta_{k+1} / eta_k = 2(2k - 1) / (k + 1) * p (1 - p), up to a size cap.
class SizeTable {
 public:
  SizeTable(double p, unsigned k_table) : p_(p) {
    detail::require_ladder_range(p, "SizeTable");
    if (k_table == 0) throw std::domain_error("SizeTable: table must hold at least one size");
    cumulative_.reserve(k_table);
    double acc = 0;
    for (unsigned k = 1; k <= k_table; ++k) {
      last_term_ = p_eta(k, p);
      acc += last_term_;
      cumulative_.push_back(acc);
    }
  }

  double p() const { return p_; }
  double finite_total() const { return 1.0 - p_; }
  unsigned table_size() const { return static_cast<unsigned>(cumulative_.size()); }
  double cumulative(unsigned k) const { return cumulative_.at(k - 1); }

  /// Smallest k >= 1 with offset + scale * cum(k) > u. Returns nullopt when the
  /// answer exceeds size_cap (the caller flags the draw as beyond the cap).
  std::optional<std::uint64_t> finite_outcome(double u, double offset, double scale, std::uint64_t size_cap) const {
    const double target = (u - offset) / scale;
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), target);
    if (it != cumulative_.end()) {
      auto k = static_cast<std::uint64_t>(it - cumulative_.begin()) + 1;
      if (k > size_cap) return std::nullopt;
      return k;
    }
    double acc = cumulative_.back();
    double term = last_term_;
    const double q = p_ * (1 - p_);
    for (std::uint64_t k = cumulative_.size() + 1; k <= size_cap; ++k) {
      term *= 2.0 * (2.0 * static_cast<double>(k) - 3.0) / static_cast<double>(k) * q;
      const double next = acc + term;
      if (next > target) return k;
      if (next == acc) break;  // float sum has converged; remaining mass is below resolution
      acc = next;
    }
    return std::nullopt;
  }

 private:
  double p_;
  double last_term_ = 0;
  std::vector<double> cumulative_;
};

}  // namespace gwcouple
