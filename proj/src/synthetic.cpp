#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "fastot/adapt.hpp"
#include "fastot/errors.hpp"

namespace fastot::adapt {
namespace {

constexpr double kClassOffset = 1.5;
constexpr double kClassSpread = 0.6;
constexpr double kRotationDegrees = 30.0;
constexpr double kShiftX = 1.0;
constexpr double kShiftY = 0.5;

// Balanced classes centered at (-offset, 0) and (+offset, 0), in random order.
LabeledBatch draw_domain(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> noise(0.0, kClassSpread);
  std::vector<int> labels(n);
  for (std::size_t r = 0; r < n; ++r) labels[r] = static_cast<int>(r % 2);
  std::shuffle(labels.begin(), labels.end(), rng);
  LabeledBatch b;
  b.inputs.resize(static_cast<Eigen::Index>(n), 2);
  for (std::size_t r = 0; r < n; ++r) {
    const double cx = labels[r] == 0 ? -kClassOffset : kClassOffset;
    b.inputs(static_cast<Eigen::Index>(r), 0) = cx + noise(rng);
    b.inputs(static_cast<Eigen::Index>(r), 1) = noise(rng);
  }
  b.labels = std::move(labels);
  return b;
}

}  // namespace

SyntheticTask make_synthetic_task(std::uint64_t seed, std::size_t samples_per_domain, bool shifted) {
  if (samples_per_domain < 2) throw InvalidInput("need at least 2 samples per domain");
  std::mt19937_64 rng(seed);
  SyntheticTask task{draw_domain(rng, samples_per_domain), draw_domain(rng, samples_per_domain)};
  if (shifted) {
    const double a = kRotationDegrees * std::numbers::pi / 180.0;
    Eigen::Matrix2d rot;
    rot << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
    task.target.inputs = task.target.inputs * rot.transpose();
    task.target.inputs.col(0).array() += kShiftX;
    task.target.inputs.col(1).array() += kShiftY;
  }
  return task;
}

}  // namespace fastot::adapt
