#pragma once
// Discrete measures, lazily evaluated transport costs and sparse transport plans.
//
// Plans use the row-sum convention throughout: summing a plan over target
// indices gives the source measure, summing over source indices gives the
// target measure.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fastot/kernels.hpp"

namespace fastot {

inline constexpr double kMassTolerance = 1e-9;

// D-dimensional points, stored coordinate-major for the kernels.
class PointCloud {
 public:
  // row_major holds n * dim values, point after point.
  PointCloud(std::size_t dim, std::span<const double> row_major);
  static PointCloud from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t size() const { return n_; }
  std::size_t dim() const { return dim_; }
  double coord(std::size_t i, std::size_t d) const { return coords_[d * n_ + i]; }
  std::vector<double> point(std::size_t i) const;
  void copy_point(std::size_t i, std::span<double> out) const;
  kernels::CloudView view() const { return {coords_.data(), n_, dim_}; }

 private:
  std::size_t dim_;
  std::size_t n_;
  std::vector<double> coords_;
};

class DiscreteMeasure {
 public:
  // Validates nonnegativity, matching length and unit total mass.
  DiscreteMeasure(PointCloud cloud, std::vector<double> masses);

  const PointCloud& cloud() const { return cloud_; }
  std::span<const double> masses() const { return masses_; }
  std::size_t size() const { return masses_.size(); }

 private:
  PointCloud cloud_;
  std::vector<double> masses_;
};

DiscreteMeasure uniform_measure(PointCloud cloud);

enum class Metric { SquaredEuclidean };

// Evaluates C_ij on demand; never materializes the cost matrix. Holds
// references, so both clouds must outlive the oracle.
class CostOracle {
 public:
  CostOracle(const PointCloud& source, const PointCloud& target,
             Metric metric = Metric::SquaredEuclidean);

  std::size_t n_source() const { return source_->size(); }
  std::size_t n_target() const { return target_->size(); }
  const PointCloud& source() const { return *source_; }
  const PointCloud& target() const { return *target_; }
  Metric metric() const { return metric_; }

  // Bounds-checked; throws IndexError.
  double operator()(std::size_t i, std::size_t j) const;
  double unchecked(std::size_t i, std::size_t j) const;

  CostOracle transposed() const { return CostOracle(*target_, *source_, metric_); }

 private:
  const PointCloud* source_;
  const PointCloud* target_;
  Metric metric_;
};

inline double cost_entry(const CostOracle& oracle, std::size_t i, std::size_t j) {
  return oracle(i, j);
}

struct PlanEntry {
  std::uint32_t i;
  std::uint32_t j;
  double mass;

  friend bool operator==(const PlanEntry&, const PlanEntry&) = default;
};

// Sparse coupling in coordinate form, sorted by (i, j).
class TransportPlan {
 public:
  // Sorts the entries and validates: positive masses, unique in-range pairs,
  // unit total mass.
  TransportPlan(std::size_t n_source, std::size_t n_target, std::vector<PlanEntry> entries);

  std::size_t n_source() const { return n_source_; }
  std::size_t n_target() const { return n_target_; }
  std::span<const PlanEntry> entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  double total_mass() const;
  std::size_t bytes() const { return entries_.size() * sizeof(PlanEntry); }

  TransportPlan transposed() const;

 private:
  std::size_t n_source_;
  std::size_t n_target_;
  std::vector<PlanEntry> entries_;
};

// sum of mass * C_ij over the given entries, without any plan validation.
double raw_plan_cost(std::span<const PlanEntry> entries, const CostOracle& oracle);
double plan_cost(const TransportPlan& plan, const CostOracle& oracle);

struct Marginals {
  std::vector<double> source;
  std::vector<double> target;
};

Marginals marginals(const TransportPlan& plan);

}  // namespace fastot
