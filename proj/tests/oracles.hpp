#pragma once

// Independent reference computations for tests. Nothing here calls into the
// routines it is used to check.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "entcat/majorization.hpp"
#include "entcat/mlp.hpp"
#include "entcat/random.hpp"

namespace oracle {

/// a ⪯ b straight from the definition: for each l, recompute both partial
/// sums from scratch.
inline bool majorized_by(const std::vector<double>& a, const std::vector<double>& b, double eps = 1e-9) {
  std::vector<double> sa(a), sb(b);
  std::sort(sa.begin(), sa.end(), std::greater<>());
  std::sort(sb.begin(), sb.end(), std::greater<>());
  for (std::size_t l = 1; l <= sa.size(); ++l) {
    double left = 0.0, right = 0.0;
    for (std::size_t i = 0; i < l; ++i) {
      left += sa[i];
      right += sb[i];
    }
    if (!(left <= right + eps)) return false;
  }
  return true;
}

inline std::vector<double> to_vec(const entcat::ProbVector& v) { return {v.begin(), v.end()}; }

inline std::vector<double> pairwise_products(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> out;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) out.push_back(a[i] * b[j]);
  std::sort(out.begin(), out.end(), std::greater<>());
  return out;
}

/// Exhaustive self-catalysis order: builds a^{⊗(k+1)} and b⊗a^{⊗k} by
/// plain products for each k.
inline int self_catalysis_order(const std::vector<double>& a, const std::vector<double>& b, int k_max) {
  std::vector<double> copies = a;
  for (int k = 1; k <= k_max; ++k) {
    if (majorized_by(pairwise_products(copies, a), pairwise_products(b, copies))) return k;
    copies = pairwise_products(copies, a);
  }
  return 0;
}

/// Uniform simplex-ish random vector (independent of the library sampler).
inline std::vector<double> random_prob(std::size_t d, std::mt19937_64& rng) {
  std::exponential_distribution<double> ex(1.0);
  std::vector<double> v(d);
  double s = 0.0;
  for (auto& x : v) s += (x = ex(rng));
  for (auto& x : v) x /= s;
  std::sort(v.begin(), v.end(), std::greater<>());
  return v;
}

/// Mean cross-entropy of a model over a batch, computed with a scalar
/// forward pass written out loop by loop.
inline double batch_loss(const entcat::MlpModel& m, const Eigen::MatrixXd& x, const std::vector<std::uint8_t>& y) {
  double total = 0.0;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    std::vector<double> h(x.col(j).data(), x.col(j).data() + x.rows());
    for (const auto& l : m.layers()) {
      std::vector<double> z(static_cast<std::size_t>(l.weights.rows()));
      for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
        double s = l.bias(r, 0);
        for (Eigen::Index c = 0; c < l.weights.cols(); ++c) s += l.weights(r, c) * h[static_cast<std::size_t>(c)];
        z[static_cast<std::size_t>(r)] =
            l.activation == entcat::Activation::Relu ? std::max(0.0, s) : 1.0 / (1.0 + std::exp(-s));
      }
      h = std::move(z);
    }
    const double p = h[0];
    total += y[static_cast<std::size_t>(j)] ? -std::log(p) : -std::log(1.0 - p);
  }
  return total / static_cast<double>(x.cols());
}

struct FdErrors {
  double max_relative = 0.0;
  double max_absolute = 0.0;
};

/// Central differences of batch_loss w.r.t. every parameter against `grads`.
/// Relative error uses max(|a|,|b|,1e-8) as scale.
inline FdErrors fd_errors(entcat::MlpModel m, const Eigen::MatrixXd& x, const std::vector<std::uint8_t>& y,
                          const entcat::Gradients& grads, double h = 1e-5) {
  FdErrors out;
  auto params = m.parameters();
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (Eigen::Index i = 0; i < params[p]->size(); ++i) {
      double& w = params[p]->data()[i];
      const double keep = w;
      w = keep + h;
      const double up = batch_loss(m, x, y);
      w = keep - h;
      const double down = batch_loss(m, x, y);
      w = keep;
      const double fd = (up - down) / (2.0 * h);
      const double an = grads[p].data()[i];
      const double scale = std::max({std::abs(fd), std::abs(an), 1e-8});
      out.max_absolute = std::max(out.max_absolute, std::abs(fd - an));
      // Absolute floor for components that are zero analytically and
      // numerically up to roundoff.
      if (std::abs(fd - an) < 1e-9) continue;
      out.max_relative = std::max(out.max_relative, std::abs(fd - an) / scale);
    }
  }
  return out;
}

inline double max_fd_relative_error(entcat::MlpModel m, const Eigen::MatrixXd& x, const std::vector<std::uint8_t>& y,
                                    const entcat::Gradients& grads, double h = 1e-5) {
  return fd_errors(std::move(m), x, y, grads, h).max_relative;
}

}  // namespace oracle
