#pragma once

// Pinned worked examples: extremality of uniform/product vectors, an
// incomparable pair, a catalysed pair, and two self-catalytic pairs of
// orders 1 and 6. Every expected value was re-derived with a literal
// prefix-sum oracle before being pinned.

#include <cmath>
#include <string>
#include <vector>

#include "entcat/datagen.hpp"
#include "entcat/majorization.hpp"
#include "entcat/random.hpp"

namespace entcat::golden {

struct Check {
  std::string anchor;
  std::string description;
  bool passed = false;
  std::string detail;
};

inline ProbVector incomparable_a() { return ProbVector::from_sorted({0.5, 0.25, 0.25, 0.0}); }
inline ProbVector incomparable_b() { return ProbVector::from_sorted({0.4, 0.4, 0.1, 0.1}); }
inline ProbVector catalyst() { return ProbVector::from_sorted({0.6, 0.4}); }
inline ProbVector selfcat_alpha1() { return ProbVector::from_sorted({0.900, 0.081, 0.010, 0.009}); }
inline ProbVector selfcat_beta1() { return ProbVector::from_sorted({0.950, 0.030, 0.020, 0.0}); }
inline ProbVector selfcat_alpha2() { return ProbVector::from_sorted({0.928, 0.060, 0.006, 0.006}); }
// Given with three entries; compared after padding to four.
inline ProbVector selfcat_beta2_short() { return ProbVector::from_sorted({0.950, 0.030, 0.020}); }

inline bool near(std::span<const double> x, std::span<const double> y, double tol) {
  if (x.size() != y.size()) return false;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (std::abs(x[i] - y[i]) > tol) return false;
  return true;
}

inline std::vector<Check> run_checks(Tolerance tol = {}) {
  std::vector<Check> out;
  auto guarded = [&](std::string anchor, std::string description, auto&& fn) {
    Check c{std::move(anchor), std::move(description), false, {}};
    try {
      c.passed = fn(c.detail);
    } catch (const std::exception& e) {
      c.passed = false;
      c.detail = e.what();
    }
    out.push_back(std::move(c));
  };

  guarded("example-1", "uniform vector is minimal and (1,0,...,0) maximal for d = 2..10", [&](std::string& detail) {
    Rng rng = make_rng(2024, 1);
    for (std::size_t d = 2; d <= 10; ++d) {
      const auto u = uniform(d);
      const auto top = product_state(d);
      if (!precedes(u, top, tol) || precedes(top, u, tol)) {
        detail = "uniform/product order fails at d=" + std::to_string(d);
        return false;
      }
      for (int k = 0; k < 50; ++k) {
        const auto v = sample_simplex_vector(d, rng);
        if (!precedes(u, v, tol) || !precedes(v, top, tol)) {
          detail = "random vector escapes the extremes at d=" + std::to_string(d);
          return false;
        }
      }
    }
    detail = "450 random vectors bracketed";
    return true;
  });

  guarded("example-2", "(1/2,1/4,1/4,0) and (2/5,2/5,1/10,1/10) are incomparable", [&](std::string& detail) {
    const auto c = compare(incomparable_a(), incomparable_b(), tol);
    detail = std::string(to_string(c));
    return c == Comparability::Incomparable;
  });

  guarded("example-3", "catalyst (0.6,0.4): product vectors and catalysis verdict", [&](std::string& detail) {
    const auto a = incomparable_a();
    const auto b = incomparable_b();
    const auto g = catalyst();
    const std::vector<double> ag{0.30, 0.20, 0.15, 0.15, 0.10, 0.10, 0.0, 0.0};
    const std::vector<double> bg{0.24, 0.24, 0.16, 0.16, 0.06, 0.06, 0.04, 0.04};
    if (!near(kron(a, g).entries(), ag, 1e-12) || !near(kron(b, g).entries(), bg, 1e-12)) {
      detail = "product vectors differ from pairwise products";
      return false;
    }
    // The (24,24,16,...) product belongs to (2/5,2/5,1/10,1/10), so the
    // catalysed direction is (2/5,...) -> (1/2,...), not the reverse.
    const bool forward = is_catalyst(g, b, a, tol);
    const bool reverse = is_catalyst(g, a, b, tol);
    detail = "catalysed (2/5,2/5,1/10,1/10)->(1/2,1/4,1/4,0): " + std::string(forward ? "yes" : "no") +
             "; reverse: " + (reverse ? "yes" : "no") + " (product labels in the source example are swapped)";
    return forward && !reverse;
  });

  guarded("example-4a", "(0.900,0.081,0.010,0.009) -> (0.950,0.030,0.020,0) self-catalysis order 1",
          [&](std::string& detail) {
            const auto k = self_catalysis_order(selfcat_alpha1(), selfcat_beta1(), 8, tol);
            detail = k ? "order " + std::to_string(*k) : "no order up to 8";
            return k == 1u;
          });

  guarded("example-4b", "(0.928,0.060,0.006,0.006) -> (0.950,0.030,0.020) self-catalysis order 6",
          [&](std::string& detail) {
            const auto a = selfcat_alpha2();
            const auto b = pad(selfcat_beta2_short(), a.dim());
            const auto k = self_catalysis_order(a, b, 8, tol);
            detail = k ? "order " + std::to_string(*k) : "no order up to 8";
            return k == 6u;
          });
  return out;
}

}  // namespace entcat::golden
