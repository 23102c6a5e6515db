#include "fastot/measures.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fastot/errors.hpp"

namespace fastot {

PointCloud::PointCloud(std::size_t dim, std::span<const double> row_major) : dim_(dim), n_(0) {
  if (dim == 0) throw InvalidInput("point cloud dimension must be at least 1");
  if (row_major.empty()) throw InvalidInput("point cloud must contain at least one point");
  if (row_major.size() % dim != 0) {
    throw InvalidInput("coordinate count is not a multiple of the dimension");
  }
  n_ = row_major.size() / dim;
  coords_.resize(row_major.size());
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t d = 0; d < dim_; ++d) {
      const double x = row_major[i * dim_ + d];
      if (!std::isfinite(x)) throw InvalidInput("point coordinates must be finite");
      coords_[d * n_ + i] = x;
    }
  }
}

PointCloud PointCloud::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw InvalidInput("point cloud must contain at least one point");
  const std::size_t dim = rows.front().size();
  std::vector<double> flat;
  flat.reserve(rows.size() * dim);
  for (const auto& r : rows) {
    if (r.size() != dim) throw InvalidInput("all points must have the same dimension");
    flat.insert(flat.end(), r.begin(), r.end());
  }
  return PointCloud(dim, flat);
}

std::vector<double> PointCloud::point(std::size_t i) const {
  std::vector<double> p(dim_);
  copy_point(i, p);
  return p;
}

void PointCloud::copy_point(std::size_t i, std::span<double> out) const {
  for (std::size_t d = 0; d < dim_; ++d) out[d] = coords_[d * n_ + i];
}

DiscreteMeasure::DiscreteMeasure(PointCloud cloud, std::vector<double> masses)
    : cloud_(std::move(cloud)), masses_(std::move(masses)) {
  if (masses_.size() != cloud_.size()) {
    throw InvalidInput("mass vector length does not match the number of points");
  }
  double total = 0.0;
  for (double m : masses_) {
    if (!(m >= 0.0) || !std::isfinite(m)) throw InvalidInput("masses must be finite and >= 0");
    total += m;
  }
  if (std::abs(total - 1.0) > kMassTolerance) {
    throw InvalidInput("masses must sum to 1 (got " + std::to_string(total) + ")");
  }
}

DiscreteMeasure uniform_measure(PointCloud cloud) {
  const std::size_t n = cloud.size();
  std::vector<double> masses(n, 1.0 / static_cast<double>(n));
  return DiscreteMeasure(std::move(cloud), std::move(masses));
}

CostOracle::CostOracle(const PointCloud& source, const PointCloud& target, Metric metric)
    : source_(&source), target_(&target), metric_(metric) {
  if (source.dim() != target.dim()) {
    throw InvalidInput("source and target clouds have different dimensions");
  }
}

double CostOracle::operator()(std::size_t i, std::size_t j) const {
  if (i >= source_->size() || j >= target_->size()) {
    throw IndexError("cost index (" + std::to_string(i) + ", " + std::to_string(j) +
                     ") out of bounds");
  }
  return unchecked(i, j);
}

double CostOracle::unchecked(std::size_t i, std::size_t j) const {
  // Same operation order as the kernels, so values agree bit for bit.
  double acc = 0.0;
  for (std::size_t d = 0; d < source_->dim(); ++d) {
    const double diff = target_->coord(j, d) - source_->coord(i, d);
    acc = acc + diff * diff;
  }
  return acc;
}

TransportPlan::TransportPlan(std::size_t n_source, std::size_t n_target,
                             std::vector<PlanEntry> entries)
    : n_source_(n_source), n_target_(n_target), entries_(std::move(entries)) {
  std::sort(entries_.begin(), entries_.end(), [](const PlanEntry& a, const PlanEntry& b) {
    return a.i != b.i ? a.i < b.i : a.j < b.j;
  });
  double total = 0.0;
  for (std::size_t k = 0; k < entries_.size(); ++k) {
    const PlanEntry& e = entries_[k];
    if (e.i >= n_source_ || e.j >= n_target_) throw InvalidInput("plan entry index out of bounds");
    if (!(e.mass > 0.0) || !std::isfinite(e.mass)) {
      throw InvalidInput("plan entries must carry positive finite mass");
    }
    if (k > 0 && entries_[k - 1].i == e.i && entries_[k - 1].j == e.j) {
      throw InvalidInput("duplicate plan entry");
    }
    total += e.mass;
  }
  if (std::abs(total - 1.0) > kMassTolerance) {
    throw InvalidInput("plan masses must sum to 1 (got " + std::to_string(total) + ")");
  }
}

double TransportPlan::total_mass() const {
  double total = 0.0;
  for (const auto& e : entries_) total += e.mass;
  return total;
}

TransportPlan TransportPlan::transposed() const {
  std::vector<PlanEntry> t;
  t.reserve(entries_.size());
  for (const auto& e : entries_) t.push_back({e.j, e.i, e.mass});
  return TransportPlan(n_target_, n_source_, std::move(t));
}

double raw_plan_cost(std::span<const PlanEntry> entries, const CostOracle& oracle) {
  double total = 0.0;
  for (const auto& e : entries) total += e.mass * oracle(e.i, e.j);
  return total;
}

double plan_cost(const TransportPlan& plan, const CostOracle& oracle) {
  if (plan.n_source() != oracle.n_source() || plan.n_target() != oracle.n_target()) {
    throw InvalidInput("plan dimensions do not match the cost oracle");
  }
  return raw_plan_cost(plan.entries(), oracle);
}

Marginals marginals(const TransportPlan& plan) {
  Marginals m{std::vector<double>(plan.n_source(), 0.0),
              std::vector<double>(plan.n_target(), 0.0)};
  for (const auto& e : plan.entries()) {
    m.source[e.i] += e.mass;
    m.target[e.j] += e.mass;
  }
  return m;
}

}  // namespace fastot
