#pragma once

// Majorization preorder on sorted probability vectors (Schmidt vectors).
//
// a ⪯ b holds when every prefix sum of a is bounded by the matching prefix
// sum of b. For bipartite pure states this decides deterministic LOCC
// convertibility |a> -> |b>. Everything here is a pure function on values.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "entcat/error.hpp"

namespace entcat {

/// Slack used by every prefix-sum inequality and normalization check.
struct Tolerance {
  double eps = 1e-9;
};

/// Sorted (non-increasing) probability vector.
class ProbVector {
 public:
  ProbVector() = default;

  /// Adopts entries that already satisfy the invariants; throws otherwise.
  static ProbVector from_sorted(std::vector<double> entries, Tolerance tol = {}) {
    validate(entries, tol);
    ProbVector v;
    v.entries_ = std::move(entries);
    return v;
  }

  std::size_t dim() const noexcept { return entries_.size(); }
  std::span<const double> entries() const noexcept { return entries_; }
  double operator[](std::size_t i) const { return entries_[i]; }
  auto begin() const noexcept { return entries_.begin(); }
  auto end() const noexcept { return entries_.end(); }

  friend bool operator==(const ProbVector&, const ProbVector&) = default;

 private:
  static void validate(const std::vector<double>& e, Tolerance tol) {
    if (e.empty()) throw Error(ErrorCode::InvalidArgument, "probability vector is empty");
    double sum = 0.0;
    for (std::size_t i = 0; i < e.size(); ++i) {
      if (!std::isfinite(e[i])) throw Error(ErrorCode::InvalidArgument, "non-finite entry");
      if (e[i] < -tol.eps) throw Error(ErrorCode::NegativeEntry, "entry below zero");
      if (e[i] > 1.0 + tol.eps) throw Error(ErrorCode::InvalidArgument, "entry above one");
      if (i > 0 && e[i] > e[i - 1])
        throw Error(ErrorCode::InvalidArgument, "entries not sorted non-increasing");
      sum += e[i];
    }
    if (std::abs(sum - 1.0) > tol.eps)
      throw Error(ErrorCode::InvalidArgument, "entries do not sum to one");
  }

  std::vector<double> entries_;
};

enum class Comparability { APrecedesB, BPrecedesA, Equivalent, Incomparable };

constexpr std::string_view to_string(Comparability c) {
  switch (c) {
    case Comparability::APrecedesB: return "A_PRECEDES_B";
    case Comparability::BPrecedesA: return "B_PRECEDES_A";
    case Comparability::Equivalent: return "EQUIVALENT";
    case Comparability::Incomparable: return "INCOMPARABLE";
  }
  return "UNKNOWN";
}

/// Scales raw non-negative weights onto the simplex and sorts them.
inline ProbVector normalize_and_sort(std::span<const double> raw, Tolerance tol = {}) {
  if (raw.empty()) throw Error(ErrorCode::InvalidArgument, "empty input");
  double sum = 0.0;
  for (double x : raw) {
    if (!std::isfinite(x)) throw Error(ErrorCode::InvalidArgument, "non-finite entry");
    if (x < 0.0) throw Error(ErrorCode::NegativeEntry, "negative weight");
    sum += x;
  }
  if (sum <= 0.0) throw Error(ErrorCode::AllZero, "all weights are zero");
  std::vector<double> out(raw.begin(), raw.end());
  for (double& x : out) x /= sum;
  std::sort(out.begin(), out.end(), std::greater<>());
  return ProbVector::from_sorted(std::move(out), tol);
}

inline ProbVector normalize_and_sort(std::initializer_list<double> raw, Tolerance tol = {}) {
  return normalize_and_sort(std::span<const double>(raw.begin(), raw.size()), tol);
}

/// (1/d, ..., 1/d): the minimal element, Schmidt vector of a maximally entangled state.
inline ProbVector uniform(std::size_t d) {
  if (d == 0) throw Error(ErrorCode::InvalidArgument, "dimension must be positive");
  return ProbVector::from_sorted(std::vector<double>(d, 1.0 / static_cast<double>(d)));
}

/// (1, 0, ..., 0): the maximal element, Schmidt vector of a product state.
inline ProbVector product_state(std::size_t d) {
  if (d == 0) throw Error(ErrorCode::InvalidArgument, "dimension must be positive");
  std::vector<double> e(d, 0.0);
  e[0] = 1.0;
  return ProbVector::from_sorted(std::move(e));
}

inline std::vector<double> prefix_sums(const ProbVector& v) {
  std::vector<double> out(v.dim());
  double acc = 0.0;
  for (std::size_t i = 0; i < v.dim(); ++i) {
    acc += v[i];
    out[i] = acc;
  }
  return out;
}

/// Decides a ⪯ b. Dimensions must already agree; see pad().
inline bool precedes(const ProbVector& a, const ProbVector& b, Tolerance tol = {}) {
  if (a.dim() != b.dim())
    throw Error(ErrorCode::DimMismatch,
                "dims " + std::to_string(a.dim()) + " and " + std::to_string(b.dim()));
  double sa = 0.0;
  double sb = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) {
    sa += a[i];
    sb += b[i];
    if (sa > sb + tol.eps) return false;
  }
  return true;
}

inline Comparability compare(const ProbVector& a, const ProbVector& b, Tolerance tol = {}) {
  const bool ab = precedes(a, b, tol);
  const bool ba = precedes(b, a, tol);
  if (ab && ba) return Comparability::Equivalent;
  if (ab) return Comparability::APrecedesB;
  if (ba) return Comparability::BPrecedesA;
  return Comparability::Incomparable;
}

/// Schmidt vector of the tensor product: all pairwise products, re-sorted.
inline ProbVector kron(const ProbVector& a, const ProbVector& b) {
  std::vector<double> out;
  out.reserve(a.dim() * b.dim());
  for (double x : a)
    for (double y : b) out.push_back(x * y);
  std::sort(out.begin(), out.end(), std::greater<>());
  // Products of two normalized vectors drift from 1 by a few ulps at most;
  // a loose check keeps long kron chains from tripping validation.
  return ProbVector::from_sorted(std::move(out), Tolerance{1e-7});
}

/// a^{⊗k}; k = 0 yields the trivial vector (1).
inline ProbVector kron_power(const ProbVector& a, std::size_t k) {
  ProbVector out = ProbVector::from_sorted({1.0});
  for (std::size_t i = 0; i < k; ++i) out = kron(out, a);
  return out;
}

/// Appends zeros up to dimension d.
inline ProbVector pad(const ProbVector& v, std::size_t d) {
  if (d < v.dim())
    throw Error(ErrorCode::TargetTooSmall,
                "cannot pad dim " + std::to_string(v.dim()) + " down to " + std::to_string(d));
  std::vector<double> e(v.begin(), v.end());
  e.resize(d, 0.0);
  return ProbVector::from_sorted(std::move(e), Tolerance{1e-7});
}

/// True when a -> b is forbidden on its own but a⊗c -> b⊗c is allowed.
inline bool is_catalyst(const ProbVector& c, const ProbVector& a, const ProbVector& b,
                        Tolerance tol = {}) {
  if (a.dim() != b.dim())
    throw Error(ErrorCode::DimMismatch, "source and target dims differ");
  if (precedes(a, b, tol)) return false;
  return precedes(kron(a, c), kron(b, c), tol);
}

struct SelfCatalysisSearch {
  std::optional<std::size_t> order;
  std::size_t k_max = 0;
  // Set when no order was found: the search stopped at k_max rather than
  // proving that none exists.
  bool k_max_exceeded = false;
};

/// Smallest k in 1..k_max with a^{⊗(k+1)} ⪯ b ⊗ a^{⊗k}.
inline SelfCatalysisSearch self_catalysis_search(const ProbVector& a, const ProbVector& b,
                                                 std::size_t k_max, Tolerance tol = {}) {
  if (a.dim() != b.dim())
    throw Error(ErrorCode::DimMismatch, "source and target dims differ; pad first");
  if (k_max == 0) throw Error(ErrorCode::InvalidArgument, "k_max must be positive");
  if (compare(a, b, tol) != Comparability::Incomparable)
    throw Error(ErrorCode::NotIncomparable,
                std::string("pair is already ordered: ") + std::string(to_string(compare(a, b, tol))));
  SelfCatalysisSearch result;
  result.k_max = k_max;
  ProbVector copies = a;  // a^{⊗k}
  for (std::size_t k = 1; k <= k_max; ++k) {
    if (precedes(kron(copies, a), kron(b, copies), tol)) {
      result.order = k;
      return result;
    }
    if (k < k_max) copies = kron(copies, a);
  }
  result.k_max_exceeded = true;
  return result;
}

inline std::optional<std::size_t> self_catalysis_order(const ProbVector& a, const ProbVector& b,
                                                       std::size_t k_max, Tolerance tol = {}) {
  return self_catalysis_search(a, b, k_max, tol).order;
}

}  // namespace entcat
