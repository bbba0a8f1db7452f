#pragma once

// Sparse feature vectors, dense weights and capped eligibility traces.
//
// Every learner update in this library reduces to a handful of kernels over
// these three types: a dot product of dense weights with a binary feature
// vector, a scaled add of a feature vector (or a trace) into dense weights,
// and a decay-then-accumulate step on a trace. The kernels are free functions
// templated on the scalar type; `Weights` and `Trace` are the double aliases
// used throughout the rest of the code.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "gvf/errors.hpp"

namespace gvf {

template <typename Scalar>
using DenseVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Weights = DenseVector<double>;

/// Set of active indices in a binary feature space of fixed dimension.
/// Indices are kept sorted and unique.
class SparseBinaryVector {
 public:
  SparseBinaryVector() = default;

  SparseBinaryVector(std::size_t dimension, std::vector<std::size_t> indices)
      : dimension_(dimension), active_(std::move(indices)) {
    require(dimension_ > 0, "SparseBinaryVector: dimension must be positive");
    if (!std::is_sorted(active_.begin(), active_.end())) std::sort(active_.begin(), active_.end());
    active_.erase(std::unique(active_.begin(), active_.end()), active_.end());
    require(active_.empty() || active_.back() < dimension_,
            "SparseBinaryVector: index out of range");
  }

  std::size_t dimension() const noexcept { return dimension_; }
  std::size_t size() const noexcept { return active_.size(); }
  bool empty() const noexcept { return active_.empty(); }
  std::span<const std::size_t> indices() const noexcept { return active_; }

  bool contains(std::size_t index) const {
    return std::binary_search(active_.begin(), active_.end(), index);
  }

  auto begin() const noexcept { return active_.begin(); }
  auto end() const noexcept { return active_.end(); }

  friend bool operator==(const SparseBinaryVector&, const SparseBinaryVector&) = default;

 private:
  std::size_t dimension_ = 0;
  std::vector<std::size_t> active_;
};

template <typename Scalar>
struct SparseEntry {
  std::size_t index;
  Scalar value;
  friend bool operator==(const SparseEntry&, const SparseEntry&) = default;
};

/// Real-valued sparse vector with entries sorted by index.
template <typename Scalar>
class SparseVector {
 public:
  using Entry = SparseEntry<Scalar>;

  SparseVector() = default;
  explicit SparseVector(std::size_t dimension) : dimension_(dimension) {}

  /// Builds from unordered (index, value) pairs; duplicate indices are summed.
  SparseVector(std::size_t dimension, std::vector<Entry> entries)
      : dimension_(dimension), entries_(std::move(entries)) {
    std::sort(entries_.begin(), entries_.end(),
              [](const Entry& a, const Entry& b) { return a.index < b.index; });
    std::vector<Entry> merged;
    merged.reserve(entries_.size());
    for (const auto& e : entries_) {
      require(e.index < dimension_, "SparseVector: index out of range");
      if (!merged.empty() && merged.back().index == e.index)
        merged.back().value += e.value;
      else
        merged.push_back(e);
    }
    entries_ = std::move(merged);
  }

  std::size_t dimension() const noexcept { return dimension_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  std::span<const Entry> entries() const noexcept { return entries_; }

  Scalar value(std::size_t index) const {
    auto it = std::lower_bound(entries_.begin(), entries_.end(), index,
                               [](const Entry& e, std::size_t i) { return e.index < i; });
    return (it != entries_.end() && it->index == index) ? it->value : Scalar(0);
  }

  /// Dense column-vector view, for small dimensions.
  DenseVector<Scalar> to_dense() const {
    DenseVector<Scalar> d = DenseVector<Scalar>::Zero(static_cast<Eigen::Index>(dimension_));
    for (const auto& e : entries_) d[static_cast<Eigen::Index>(e.index)] = e.value;
    return d;
  }

  /// Nonzero entries of a dense vector.
  static SparseVector from_dense(const DenseVector<Scalar>& d) {
    std::vector<Entry> entries;
    for (Eigen::Index i = 0; i < d.size(); ++i)
      if (d[i] != Scalar(0)) entries.push_back({static_cast<std::size_t>(i), d[i]});
    return SparseVector(static_cast<std::size_t>(d.size()), std::move(entries));
  }

  friend bool operator==(const SparseVector&, const SparseVector&) = default;

 private:
  std::size_t dimension_ = 0;
  std::vector<Entry> entries_;
};

// Uniform entry iteration over binary and real sparse vectors: f(index, value).
template <typename F>
void for_each_nonzero(const SparseBinaryVector& x, F&& f) {
  for (std::size_t i : x) f(i, 1.0);
}

template <typename Scalar, typename F>
void for_each_nonzero(const SparseVector<Scalar>& x, F&& f) {
  for (const auto& e : x.entries()) f(e.index, e.value);
}

/// Accumulating eligibility trace stored as a sorted sparse map with a hard
/// entry cap. After every update no entry has magnitude below the prune
/// threshold and the entry count never exceeds capacity; overflow evicts the
/// smallest magnitudes first, lower index first on ties.
template <typename Scalar>
class EligibilityTrace {
 public:
  using Entry = SparseEntry<Scalar>;

  static constexpr std::size_t kDefaultCapacity = 2000;

  explicit EligibilityTrace(std::size_t dimension = 1, std::size_t capacity = kDefaultCapacity,
                            Scalar prune_threshold = Scalar(1e-8))
      : dimension_(dimension), capacity_(capacity), prune_threshold_(prune_threshold) {
    require(dimension_ > 0, "EligibilityTrace: dimension must be positive");
    require(capacity_ > 0, "EligibilityTrace: capacity must be positive");
    require(prune_threshold_ >= 0, "EligibilityTrace: prune threshold must be nonnegative");
  }

  std::size_t dimension() const noexcept { return dimension_; }
  std::size_t capacity() const noexcept { return capacity_; }
  Scalar prune_threshold() const noexcept { return prune_threshold_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  std::span<const Entry> entries() const noexcept { return entries_; }

  void clear() noexcept { entries_.clear(); }

  Scalar value(std::size_t index) const {
    auto it = std::lower_bound(entries_.begin(), entries_.end(), index,
                               [](const Entry& e, std::size_t i) { return e.index < i; });
    return (it != entries_.end() && it->index == index) ? it->value : Scalar(0);
  }

  /// e <- factor * e + scale * x. `factor` may exceed one (importance-weighted
  /// recurrences); it must be finite and nonnegative.
  void rescale_add(Scalar factor, Scalar scale, const SparseBinaryVector& x) {
    require(x.dimension() == dimension_, "EligibilityTrace: dimension mismatch");
    rescale(factor, scale);
    merge(x.indices(), [&](std::size_t) { return scale; });
    finish();
  }

  void rescale_add(Scalar factor, Scalar scale, const SparseVector<Scalar>& x) {
    require(x.dimension() == dimension_, "EligibilityTrace: dimension mismatch");
    rescale(factor, scale);
    auto src = x.entries();
    std::vector<std::size_t> idx(src.size());
    for (std::size_t k = 0; k < src.size(); ++k) idx[k] = src[k].index;
    merge(std::span<const std::size_t>(idx), [&](std::size_t k) { return scale * src[k].value; });
    finish();
  }

 private:
  void rescale(Scalar factor, Scalar scale) {
    require(std::isfinite(factor) && factor >= 0, "EligibilityTrace: decay must be finite and >= 0");
    require(std::isfinite(scale), "EligibilityTrace: scale must be finite");
    if (factor == Scalar(0)) {
      entries_.clear();
    } else if (factor != Scalar(1)) {
      for (auto& e : entries_) e.value *= factor;
    }
  }

  // Two-pointer merge of sorted additions into the sorted entry list.
  template <typename ValueAt>
  void merge(std::span<const std::size_t> indices, ValueAt value_at) {
    scratch_.clear();
    scratch_.reserve(entries_.size() + indices.size());
    std::size_t i = 0, k = 0;
    while (i < entries_.size() || k < indices.size()) {
      if (k == indices.size() || (i < entries_.size() && entries_[i].index < indices[k])) {
        scratch_.push_back(entries_[i++]);
      } else if (i == entries_.size() || indices[k] < entries_[i].index) {
        scratch_.push_back({indices[k], value_at(k)});
        ++k;
      } else {
        scratch_.push_back({indices[k], entries_[i].value + value_at(k)});
        ++i;
        ++k;
      }
    }
    entries_.swap(scratch_);
  }

  void finish() {
    std::erase_if(entries_, [&](const Entry& e) {
      return e.value == Scalar(0) || std::abs(e.value) < prune_threshold_;
    });
    if (entries_.size() <= capacity_) return;

    // Find the weakest entry that survives, then keep everything at or above it.
    auto weaker = [](const Entry& a, const Entry& b) {
      const Scalar ma = std::abs(a.value), mb = std::abs(b.value);
      return ma < mb || (ma == mb && a.index < b.index);
    };
    scratch_ = entries_;
    const std::size_t evict = entries_.size() - capacity_;
    std::nth_element(scratch_.begin(), scratch_.begin() + evict, scratch_.end(), weaker);
    const Entry weakest_kept = scratch_[evict];
    std::erase_if(entries_, [&](const Entry& e) { return weaker(e, weakest_kept); });
  }

  std::size_t dimension_;
  std::size_t capacity_;
  Scalar prune_threshold_;
  std::vector<Entry> entries_;
  std::vector<Entry> scratch_;
};

using Trace = EligibilityTrace<double>;

// ---------------------------------------------------------------------------
// Kernels

template <typename Scalar>
Scalar dot(const DenseVector<Scalar>& w, const SparseBinaryVector& phi) {
  require(static_cast<std::size_t>(w.size()) == phi.dimension(), "dot: dimension mismatch");
  Scalar sum(0);
  for (std::size_t i : phi) sum += w[static_cast<Eigen::Index>(i)];
  return sum;
}

template <typename Scalar>
Scalar dot(const DenseVector<Scalar>& w, const SparseVector<Scalar>& x) {
  require(static_cast<std::size_t>(w.size()) == x.dimension(), "dot: dimension mismatch");
  Scalar sum(0);
  for (const auto& e : x.entries()) sum += e.value * w[static_cast<Eigen::Index>(e.index)];
  return sum;
}

/// w[i] += scale for every active i. Returns the change in ||w||^2.
template <typename Scalar>
Scalar axpy_sparse(DenseVector<Scalar>& w, Scalar scale, const SparseBinaryVector& phi) {
  require(static_cast<std::size_t>(w.size()) == phi.dimension(), "axpy_sparse: dimension mismatch");
  require(std::isfinite(scale), "axpy_sparse: scale must be finite");
  Scalar dsq(0);
  if (scale == Scalar(0)) return dsq;
  for (std::size_t i : phi) {
    Scalar& wi = w[static_cast<Eigen::Index>(i)];
    const Scalar old = wi;
    wi += scale;
    dsq += wi * wi - old * old;
  }
  return dsq;
}

/// w[i] += scale * x[i] over the nonzeros of x. Returns the change in ||w||^2.
template <typename Scalar>
Scalar axpy_sparse(DenseVector<Scalar>& w, Scalar scale, const SparseVector<Scalar>& x) {
  require(static_cast<std::size_t>(w.size()) == x.dimension(), "axpy_sparse: dimension mismatch");
  require(std::isfinite(scale), "axpy_sparse: scale must be finite");
  Scalar dsq(0);
  if (scale == Scalar(0)) return dsq;
  for (const auto& e : x.entries()) {
    Scalar& wi = w[static_cast<Eigen::Index>(e.index)];
    const Scalar old = wi;
    wi += scale * e.value;
    dsq += wi * wi - old * old;
  }
  return dsq;
}

/// w[i] += scale * e[i] over stored trace entries. Returns the change in ||w||^2.
template <typename Scalar>
Scalar axpy_trace(DenseVector<Scalar>& w, Scalar scale, const EligibilityTrace<Scalar>& e) {
  require(static_cast<std::size_t>(w.size()) == e.dimension(), "axpy_trace: dimension mismatch");
  require(std::isfinite(scale), "axpy_trace: scale must be finite");
  Scalar dsq(0);
  if (scale == Scalar(0)) return dsq;
  for (const auto& entry : e.entries()) {
    Scalar& wi = w[static_cast<Eigen::Index>(entry.index)];
    const Scalar old = wi;
    wi += scale * entry.value;
    dsq += wi * wi - old * old;
  }
  return dsq;
}

/// e <- decay * e + scale * phi, then prune and cap.
template <typename Scalar>
void trace_decay_add(EligibilityTrace<Scalar>& e, Scalar decay, Scalar scale,
                     const SparseBinaryVector& phi) {
  require(decay >= Scalar(0) && decay <= Scalar(1), "trace_decay_add: decay must lie in [0, 1]");
  e.rescale_add(decay, scale, phi);
}

template <typename Scalar>
Scalar trace_dot(const EligibilityTrace<Scalar>& e, const DenseVector<Scalar>& w) {
  require(static_cast<std::size_t>(w.size()) == e.dimension(), "trace_dot: dimension mismatch");
  Scalar sum(0);
  for (const auto& entry : e.entries()) sum += entry.value * w[static_cast<Eigen::Index>(entry.index)];
  return sum;
}

template <typename Scalar>
bool all_finite(const DenseVector<Scalar>& w) {
  return w.allFinite();
}

}  // namespace gvf
