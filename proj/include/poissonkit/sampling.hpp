#pragma once

// Deterministic sampling of a box domain and the residual report every
// sample-based check produces.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "poissonkit/errors.hpp"
#include "poissonkit/expr.hpp"

namespace poissonkit {

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
};

/// One kept sample; index is its position in the seeded draw sequence, so
/// (seed, index) reproduces it.
struct Sample {
  std::size_t index = 0;
  std::vector<double> x;
};

/// A box with seeded uniform sampling and an optional exclusion predicate that
/// must be nonzero (and evaluable) at kept samples.
class SampleDomain {
 public:
  SampleDomain() = default;
  SampleDomain(std::vector<Interval> box, std::size_t count, std::uint64_t seed,
               std::optional<Expr> exclusion = std::nullopt)
      : box_(std::move(box)), count_(count), seed_(seed), exclusion_(std::move(exclusion)) {
    if (box_.empty()) throw Error("SampleDomain: empty box");
    for (const Interval& iv : box_)
      if (!(std::isfinite(iv.lo) && std::isfinite(iv.hi) && iv.lo < iv.hi))
        throw Error("SampleDomain: every interval needs finite lo < hi");
    if (count_ < 1) throw Error("SampleDomain: sample count must be at least 1");
  }

  static SampleDomain cube(std::size_t n, double lo, double hi, std::size_t count = 200, std::uint64_t seed = 42) {
    return SampleDomain(std::vector<Interval>(n, Interval{lo, hi}), count, seed);
  }

  std::size_t dim() const noexcept { return box_.size(); }
  const std::vector<Interval>& box() const noexcept { return box_; }
  std::size_t count() const noexcept { return count_; }
  std::uint64_t seed() const noexcept { return seed_; }
  const std::optional<Expr>& exclusion() const noexcept { return exclusion_; }

  SampleDomain with_sampling(std::size_t count, std::uint64_t seed) const {
    return SampleDomain(box_, count, seed, exclusion_);
  }

  bool in_box(std::span<const double> x) const {
    if (x.size() != box_.size()) return false;
    for (std::size_t i = 0; i < x.size(); ++i)
      if (!(x[i] >= box_[i].lo && x[i] <= box_[i].hi)) return false;
    return true;
  }

  bool passes_exclusion(std::span<const double> x) const {
    if (!exclusion_) return true;
    try {
      return evaluate(*exclusion_, x) != 0.0;
    } catch (const DomainError&) {
      return false;
    }
  }

  bool contains(std::span<const double> x) const { return in_box(x) && passes_exclusion(x); }

  /// Kept samples in draw order. Throws EmptyDomainError when the exclusion
  /// predicate rejects every draw.
  std::vector<Sample> samples() const {
    std::mt19937_64 rng(seed_);
    std::vector<Sample> kept;
    kept.reserve(count_);
    for (std::size_t s = 0; s < count_; ++s) {
      Sample smp{s, std::vector<double>(box_.size())};
      for (std::size_t i = 0; i < box_.size(); ++i) {
        // 53 random bits -> [0, 1); independent of the library's distributions.
        const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        smp.x[i] = box_[i].lo + u * (box_[i].hi - box_[i].lo);
      }
      if (passes_exclusion(smp.x)) kept.push_back(std::move(smp));
    }
    if (kept.empty()) throw EmptyDomainError("exclusion predicate rejected all " + std::to_string(count_) + " samples");
    return kept;
  }

 private:
  std::vector<Interval> box_;
  std::size_t count_ = 200;
  std::uint64_t seed_ = 42;
  std::optional<Expr> exclusion_;
};

struct Witness {
  std::size_t sample_index = 0;
  std::vector<double> point;
  std::vector<std::size_t> indices;  // 0-based
  double value = 0.0;
};

struct IndexStat {
  std::vector<std::size_t> indices;  // 0-based
  double max_abs = 0.0;
  double sum_abs = 0.0;
  std::size_t count = 0;

  double mean_abs() const { return count == 0 ? 0.0 : sum_abs / static_cast<double>(count); }
};

/// Worst-case summary of a residual over samples (and index tuples). Reports
/// over disjoint sample sets merge associatively.
struct ResidualReport {
  std::string check;
  double tolerance = 0.0;
  double max_abs = 0.0;
  std::optional<Witness> worst;
  std::vector<IndexStat> per_index;
  std::size_t samples_checked = 0;
  bool pass = true;

  ResidualReport() = default;
  ResidualReport(std::string name, double tol) : check(std::move(name)), tolerance(tol) {}

  void record(const Sample& s, std::span<const std::size_t> indices, double value) {
    const double a = std::abs(value);
    if (!worst || a > max_abs || std::isnan(value)) {
      max_abs = std::isnan(value) ? INFINITY : std::max(max_abs, a);
      worst = Witness{s.index, s.x, std::vector<std::size_t>(indices.begin(), indices.end()), value};
    }
    IndexStat& stat = stat_for(indices);
    stat.max_abs = std::max(stat.max_abs, a);
    stat.sum_abs += a;
    ++stat.count;
  }

  void merge(const ResidualReport& other) {
    if (other.worst && (!worst || other.max_abs > max_abs)) {
      max_abs = other.max_abs;
      worst = other.worst;
    }
    for (const IndexStat& o : other.per_index) {
      IndexStat& stat = stat_for(o.indices);
      stat.max_abs = std::max(stat.max_abs, o.max_abs);
      stat.sum_abs += o.sum_abs;
      stat.count += o.count;
    }
    samples_checked += other.samples_checked;
    finalize();
  }

  void finalize() { pass = max_abs <= tolerance; }

 private:
  IndexStat& stat_for(std::span<const std::size_t> indices) {
    for (IndexStat& s : per_index)
      if (std::equal(s.indices.begin(), s.indices.end(), indices.begin(), indices.end())) return s;
    per_index.push_back(IndexStat{std::vector<std::size_t>(indices.begin(), indices.end()), 0.0, 0.0, 0});
    return per_index.back();
  }
};

}  // namespace poissonkit
