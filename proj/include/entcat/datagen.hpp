#pragma once

// Random Schmidt-vector pairs labeled by the exact majorization oracle,
// their CSV persistence, and the entry histograms that expose the
// sampler's bias toward small entries.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "entcat/error.hpp"
#include "entcat/majorization.hpp"
#include "entcat/random.hpp"

namespace entcat {

struct DatasetRow {
  ProbVector alpha;
  ProbVector beta;
  bool maj_ab = false;  // alpha ⪯ beta
  bool maj_ba = false;  // beta ⪯ alpha

  friend bool operator==(const DatasetRow&, const DatasetRow&) = default;
};

enum class Mode { Paired, AllPairs };

constexpr std::string_view to_string(Mode m) {
  return m == Mode::Paired ? "paired" : "all_pairs";
}

inline Mode parse_mode(std::string_view s) {
  if (s == "paired") return Mode::Paired;
  if (s == "all_pairs") return Mode::AllPairs;
  throw Error(ErrorCode::InvalidArgument, "unknown mode '" + std::string(s) + "'");
}

struct Dataset {
  std::size_t dim = 0;
  std::vector<DatasetRow> rows;
  std::uint64_t seed = 0;
  Mode mode = Mode::Paired;

  std::size_t size() const noexcept { return rows.size(); }
  friend bool operator==(const Dataset&, const Dataset&) = default;
};

struct Histogram {
  std::vector<double> bin_edges;  // bins + 1 edges spanning [0, 1]
  std::vector<std::uint64_t> counts;

  std::size_t bins() const noexcept { return counts.size(); }
  std::uint64_t total() const {
    std::uint64_t t = 0;
    for (auto c : counts) t += c;
    return t;
  }
};

inline DatasetRow label_pair(ProbVector a, ProbVector b, Tolerance tol = {}) {
  DatasetRow row;
  row.maj_ab = precedes(a, b, tol);
  row.maj_ba = precedes(b, a, tol);
  row.alpha = std::move(a);
  row.beta = std::move(b);
  return row;
}

enum class SimplexSampler {
  FlatDirichlet,      // uniform on the simplex: normalized Exp(1) draws
  NormalizedUniform,  // i.i.d. uniform(0,1) draws divided by their sum
};

constexpr std::string_view to_string(SimplexSampler s) {
  return s == SimplexSampler::FlatDirichlet ? "dirichlet" : "normalized_uniform";
}

inline SimplexSampler parse_sampler(std::string_view s) {
  if (s == "dirichlet") return SimplexSampler::FlatDirichlet;
  if (s == "normalized_uniform") return SimplexSampler::NormalizedUniform;
  throw Error(ErrorCode::InvalidArgument, "unknown sampler '" + std::string(s) + "'");
}

/// Random sorted probability vector. The default draws uniformly from the
/// simplex, whose entry marginals pile up near zero.
inline ProbVector sample_simplex_vector(std::size_t dim, Rng& rng,
                                        SimplexSampler kind = SimplexSampler::FlatDirichlet) {
  if (dim < 2) throw Error(ErrorCode::DimTooSmall, "dim must be at least 2");
  std::vector<double> raw(dim);
  double sum = 0.0;
  do {
    sum = 0.0;
    for (double& x : raw) {
      const double u = uniform01(rng);
      x = kind == SimplexSampler::FlatDirichlet ? -std::log1p(-u) : u;
      sum += x;
    }
  } while (sum <= 0.0);
  return normalize_and_sort(raw);
}

struct GenerateOptions {
  std::size_t jobs = 1;
  SimplexSampler sampler = SimplexSampler::FlatDirichlet;
  std::size_t all_pairs_cap = 10'000'000;
};

namespace detail {

// Rows are produced in fixed-size chunks, each with its own sub-stream, so
// the output does not depend on how many workers split the chunks.
inline constexpr std::size_t kChunk = 1024;

template <typename Fn>
void for_each_chunk(std::size_t n, std::size_t jobs, Fn&& fn) {
  const std::size_t chunks = (n + kChunk - 1) / kChunk;
  jobs = std::max<std::size_t>(1, std::min(jobs, chunks));
  if (jobs == 1) {
    for (std::size_t c = 0; c < chunks; ++c) fn(c, c * kChunk, std::min(n, (c + 1) * kChunk));
    return;
  }
  std::vector<std::thread> workers;
  for (std::size_t w = 0; w < jobs; ++w) {
    workers.emplace_back([&, w] {
      for (std::size_t c = w; c < chunks; c += jobs) fn(c, c * kChunk, std::min(n, (c + 1) * kChunk));
    });
  }
  for (auto& t : workers) t.join();
}

inline std::vector<ProbVector> sample_vectors(std::size_t dim, std::size_t n, std::uint64_t seed,
                                              std::uint64_t tag, std::size_t jobs,
                                              SimplexSampler sampler = SimplexSampler::FlatDirichlet) {
  std::vector<ProbVector> out(n);
  for_each_chunk(n, jobs, [&](std::size_t c, std::size_t lo, std::size_t hi) {
    Rng rng = make_rng(seed, (tag << 40) ^ c);
    for (std::size_t i = lo; i < hi; ++i) out[i] = sample_simplex_vector(dim, rng, sampler);
  });
  return out;
}

}  // namespace detail

/// PAIRED: n rows (alpha_i, beta_i). ALL_PAIRS: n^2 rows (alpha_i, beta_j), i-major.
inline Dataset generate_dataset(std::size_t dim, std::size_t n, Mode mode, std::uint64_t seed,
                                GenerateOptions opts = {}) {
  if (dim < 2) throw Error(ErrorCode::DimTooSmall, "dim must be at least 2");
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "n must be positive");
  if (mode == Mode::AllPairs && (n > opts.all_pairs_cap / n))
    throw Error(ErrorCode::Overflow, std::to_string(n) + "^2 rows exceed the configured cap of " +
                                         std::to_string(opts.all_pairs_cap));
  Dataset ds;
  ds.dim = dim;
  ds.seed = seed;
  ds.mode = mode;
  const auto alphas = detail::sample_vectors(dim, n, seed, 1, opts.jobs, opts.sampler);
  const auto betas = detail::sample_vectors(dim, n, seed, 2, opts.jobs, opts.sampler);
  if (mode == Mode::Paired) {
    ds.rows.resize(n);
    detail::for_each_chunk(n, opts.jobs, [&](std::size_t, std::size_t lo, std::size_t hi) {
      for (std::size_t i = lo; i < hi; ++i) ds.rows[i] = label_pair(alphas[i], betas[i]);
    });
  } else {
    ds.rows.resize(n * n);
    detail::for_each_chunk(n, opts.jobs, [&](std::size_t, std::size_t lo, std::size_t hi) {
      for (std::size_t i = lo; i < hi; ++i)
        for (std::size_t j = 0; j < n; ++j) ds.rows[i * n + j] = label_pair(alphas[i], betas[j]);
    });
  }
  return ds;
}

/// Seeded shuffle, then the first floor(f * N) rows train and the rest test.
inline std::pair<Dataset, Dataset> split(const Dataset& ds, double train_fraction,
                                         std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw Error(ErrorCode::InvalidArgument, "train fraction must lie in (0, 1)");
  const std::size_t n = ds.size();
  const auto n_train = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(n)));
  if (n_train == 0 || n_train == n)
    throw Error(ErrorCode::EmptySplit, "split of " + std::to_string(n) + " rows leaves a side empty");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng = make_rng(seed, 0x5b11);
  shuffle(std::span<std::size_t>(order), rng);
  Dataset train{ds.dim, {}, ds.seed, ds.mode};
  Dataset test{ds.dim, {}, ds.seed, ds.mode};
  train.rows.reserve(n_train);
  test.rows.reserve(n - n_train);
  for (std::size_t i = 0; i < n; ++i) (i < n_train ? train : test).rows.push_back(ds.rows[order[i]]);
  return {std::move(train), std::move(test)};
}

// ---------------------------------------------------------------------------
// CSV: header "dim=<d>;mode=<m>;seed=<s>", then one row per line:
//   a1;...;ad;b1;...;bd;maj_ab;maj_ba
// Reals are written with 17 significant digits so they read back bit-equal.

inline std::string format_real(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline void write_csv(const Dataset& ds, std::ostream& out) {
  out << "dim=" << ds.dim << ";mode=" << to_string(ds.mode) << ";seed=" << ds.seed << '\n';
  for (const auto& r : ds.rows) {
    for (double x : r.alpha) out << format_real(x) << ';';
    for (double x : r.beta) out << format_real(x) << ';';
    out << (r.maj_ab ? '1' : '0') << ';' << (r.maj_ba ? '1' : '0') << '\n';
  }
}

inline void write_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot open '" + path + "' for writing");
  write_csv(ds, out);
  if (!out) throw Error(ErrorCode::Io, "write to '" + path + "' failed");
}

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <typename T>
std::optional<T> parse_number(std::string_view s) {
  T value{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

}  // namespace detail

inline Dataset read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::MalformedRow, "missing header line");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  Dataset ds;
  bool have_dim = false;
  for (auto field : detail::split_fields(line, ';')) {
    const auto eq = field.find('=');
    if (eq == std::string_view::npos) throw Error(ErrorCode::MalformedRow, "bad header field");
    const auto key = field.substr(0, eq);
    const auto val = field.substr(eq + 1);
    if (key == "dim") {
      auto d = detail::parse_number<std::size_t>(val);
      if (!d || *d == 0) throw Error(ErrorCode::MalformedRow, "bad dim in header");
      ds.dim = *d;
      have_dim = true;
    } else if (key == "mode") {
      try {
        ds.mode = parse_mode(val);
      } catch (const Error&) {
        throw Error(ErrorCode::MalformedRow, "bad mode in header");
      }
    } else if (key == "seed") {
      auto s = detail::parse_number<std::uint64_t>(val);
      if (!s) throw Error(ErrorCode::MalformedRow, "bad seed in header");
      ds.seed = *s;
    }
  }
  if (!have_dim) throw Error(ErrorCode::MalformedRow, "header lacks dim");

  const std::size_t d = ds.dim;
  std::size_t line_no = 1;
  std::vector<double> a(d), b(d);
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = detail::split_fields(line, ';');
    const std::string where = "line " + std::to_string(line_no);
    if (fields.size() != 2 * d + 2) {
      if (fields.size() >= 4 && fields.size() % 2 == 0)
        throw Error(ErrorCode::DimInconsistent,
                    where + ": row has dim " + std::to_string(fields.size() / 2 - 1) +
                        ", header says " + std::to_string(d));
      throw Error(ErrorCode::MalformedRow,
                  where + ": expected " + std::to_string(2 * d + 2) + " fields, got " +
                      std::to_string(fields.size()));
    }
    for (std::size_t i = 0; i < 2 * d; ++i) {
      auto x = detail::parse_number<double>(fields[i]);
      if (!x) throw Error(ErrorCode::MalformedRow, where + ": non-numeric entry");
      (i < d ? a[i] : b[i - d]) = *x;
    }
    auto label = [&](std::string_view f) {
      if (f == "1") return true;
      if (f == "0") return false;
      throw Error(ErrorCode::MalformedRow, where + ": label not in {0,1}");
    };
    DatasetRow row;
    row.maj_ab = label(fields[2 * d]);
    row.maj_ba = label(fields[2 * d + 1]);
    try {
      row.alpha = ProbVector::from_sorted(a, Tolerance{1e-7});
      row.beta = ProbVector::from_sorted(b, Tolerance{1e-7});
    } catch (const Error& e) {
      throw Error(ErrorCode::MalformedRow, where + ": " + e.what());
    }
    ds.rows.push_back(std::move(row));
  }
  return ds;
}

inline Dataset read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open '" + path + "'");
  return read_csv(in);
}

// ---------------------------------------------------------------------------
// Histograms.

inline Histogram empty_histogram(std::size_t bins) {
  if (bins < 2) throw Error(ErrorCode::InvalidArgument, "need at least 2 bins");
  Histogram h;
  h.counts.assign(bins, 0);
  h.bin_edges.resize(bins + 1);
  for (std::size_t i = 0; i <= bins; ++i)
    h.bin_edges[i] = static_cast<double>(i) / static_cast<double>(bins);
  return h;
}

inline void add_entries(Histogram& h, const ProbVector& v) {
  const auto bins = h.bins();
  for (double x : v) {
    auto idx = static_cast<std::size_t>(std::clamp(x, 0.0, 1.0) * static_cast<double>(bins));
    h.counts[std::min(idx, bins - 1)]++;
  }
}

/// Histogram over every entry of both alpha and beta columns.
inline Histogram entry_histogram(const Dataset& ds, std::size_t bins) {
  Histogram h = empty_histogram(bins);
  for (const auto& r : ds.rows) {
    add_entries(h, r.alpha);
    add_entries(h, r.beta);
  }
  return h;
}

/// Histogram of n freshly sampled vectors, no labeling.
inline Histogram sample_histogram(std::size_t dim, std::size_t n, std::size_t bins, std::uint64_t seed,
                                  SimplexSampler sampler = SimplexSampler::FlatDirichlet) {
  Histogram h = empty_histogram(bins);
  for (const auto& v : detail::sample_vectors(dim, n, seed, 1, 1, sampler)) add_entries(h, v);
  return h;
}

inline void write_histogram_csv(const Histogram& h, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot open '" + path + "' for writing");
  out << "bin_left_edge,count\n";
  for (std::size_t i = 0; i < h.bins(); ++i) out << format_real(h.bin_edges[i]) << ',' << h.counts[i] << '\n';
  if (!out) throw Error(ErrorCode::Io, "write to '" + path + "' failed");
}

// ---------------------------------------------------------------------------
// Self-catalysis evaluation sets.

using BasePair = std::pair<ProbVector, ProbVector>;

/// One-copy self-catalysis instance of an incomparable pair (a, b): the row
/// compares a⊗a with b⊗a at dimension dim^2.
inline DatasetRow selfcat_row(const ProbVector& a, const ProbVector& b) {
  if (compare(a, b) != Comparability::Incomparable)
    throw Error(ErrorCode::NotIncomparable, "self-catalysis needs an incomparable pair");
  return label_pair(kron(a, a), kron(b, a));
}

struct SelfCatSet {
  Dataset products;              // rows at dim^2
  std::vector<BasePair> base;    // the incomparable pairs they came from
};

inline SelfCatSet build_selfcat_eval_set(std::size_t dim, std::size_t n, std::uint64_t seed,
                                         std::span<const BasePair> injected = {},
                                         std::size_t budget = 0) {
  if (dim < 3) throw Error(ErrorCode::DimTooSmall, "self-catalysis set needs dim >= 3");
  if (budget == 0) budget = 1000 * std::max<std::size_t>(n, 1);
  SelfCatSet out;
  out.products.dim = dim * dim;
  out.products.seed = seed;
  for (const auto& [a, b] : injected) {
    if (a.dim() != dim || b.dim() != dim)
      throw Error(ErrorCode::DimMismatch, "injected pair has wrong dimension");
    out.products.rows.push_back(selfcat_row(a, b));
    out.base.emplace_back(a, b);
  }
  Rng rng = make_rng(seed, 0x5e1fca7);
  std::size_t draws = 0;
  while (out.base.size() < n) {
    if (draws++ >= budget)
      throw Error(ErrorCode::Underfull, "found " + std::to_string(out.base.size()) + " of " +
                                            std::to_string(n) + " incomparable pairs");
    auto a = sample_simplex_vector(dim, rng);
    auto b = sample_simplex_vector(dim, rng);
    if (compare(a, b) != Comparability::Incomparable) continue;
    out.products.rows.push_back(selfcat_row(a, b));
    out.base.emplace_back(std::move(a), std::move(b));
  }
  return out;
}

inline constexpr std::size_t kHigherOrderBaseDim = 4;

/// One incomparable base pair at d=4 and its first- and second-order
/// self-catalysis products (d=16: a⊗a vs b⊗a; d=64: a⊗a⊗a vs b⊗a⊗a).
struct HigherOrderRow {
  DatasetRow base;
  DatasetRow first;
  DatasetRow second;
};

inline HigherOrderRow higher_order_row(const ProbVector& a, const ProbVector& b) {
  HigherOrderRow row;
  row.base = label_pair(a, b);
  if (row.base.maj_ab || row.base.maj_ba)
    throw Error(ErrorCode::NotIncomparable, "higher-order rows need an incomparable pair");
  const auto aa = kron(a, a);
  row.first = label_pair(aa, kron(b, a));
  row.second = label_pair(kron(aa, a), kron(row.first.beta, a));
  return row;
}

inline std::vector<HigherOrderRow> build_higher_order_set(std::size_t n, std::uint64_t seed,
                                                          std::size_t budget = 0) {
  if (budget == 0) budget = 1000 * std::max<std::size_t>(n, 1);
  std::vector<HigherOrderRow> rows;
  rows.reserve(n);
  Rng rng = make_rng(seed, 0x41e0);
  std::size_t draws = 0;
  while (rows.size() < n) {
    if (draws++ >= budget)
      throw Error(ErrorCode::Underfull, "found " + std::to_string(rows.size()) + " of " +
                                            std::to_string(n) + " incomparable pairs");
    auto a = sample_simplex_vector(kHigherOrderBaseDim, rng);
    auto b = sample_simplex_vector(kHigherOrderBaseDim, rng);
    if (compare(a, b) != Comparability::Incomparable) continue;
    rows.push_back(higher_order_row(a, b));
  }
  return rows;
}

/// Indices of rows whose first-order transformation a⊗a -> b⊗a fails
/// exactly; only these go on to the d=64 stage.
inline std::vector<std::size_t> second_stage_candidates(std::span<const HigherOrderRow> rows) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (!rows[i].first.maj_ab) out.push_back(i);
  return out;
}

inline Dataset higher_order_level(std::span<const HigherOrderRow> rows, int level, std::uint64_t seed) {
  Dataset ds;
  ds.seed = seed;
  ds.dim = level == 0 ? kHigherOrderBaseDim : level == 1 ? 16 : 64;
  for (const auto& r : rows) ds.rows.push_back(level == 0 ? r.base : level == 1 ? r.first : r.second);
  return ds;
}

}  // namespace entcat
