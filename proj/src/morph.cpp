#include "fastot/morph.hpp"

#include <charconv>
#include <cmath>
#include <numbers>
#include <ostream>
#include <string>

#include "fastot/errors.hpp"
#include "fastot/io.hpp"

namespace fastot {
namespace {

void append_circle(std::vector<double>& out, std::array<double, 2> c, double r, std::size_t n) {
  for (std::size_t k = 0; k < n; ++k) {
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
    out.push_back(c[0] + r * std::cos(angle));
    out.push_back(c[1] + r * std::sin(angle));
  }
}

void append_square(std::vector<double>& out, std::array<double, 2> c, double h, std::size_t n) {
  const double side = 2.0 * h;
  for (std::size_t k = 0; k < n; ++k) {
    const double s = 4.0 * side * static_cast<double>(k) / static_cast<double>(n);
    const int edge = std::min(3, static_cast<int>(s / side));
    const double u = s - side * edge;
    double x = 0.0;
    double y = 0.0;
    switch (edge) {
      case 0: x = -h + u; y = -h; break;
      case 1: x = h; y = -h + u; break;
      case 2: x = h - u; y = h; break;
      default: x = -h; y = h - u; break;
    }
    out.push_back(c[0] + x);
    out.push_back(c[1] + y);
  }
}

}  // namespace

ShapeSpec ShapeSpec::circle(std::size_t n, double radius) {
  ShapeSpec s;
  s.kind = ShapeKind::Circle;
  s.n_points = n;
  s.size = radius;
  return s;
}

ShapeSpec ShapeSpec::square(std::size_t n, double side) {
  ShapeSpec s;
  s.kind = ShapeKind::Square;
  s.n_points = n;
  s.size = side / 2.0;
  return s;
}

ShapeSpec ShapeSpec::two_circles(std::size_t n, double radius) {
  ShapeSpec s;
  s.kind = ShapeKind::TwoCircles;
  s.n_points = n;
  s.center = {-1.0, 0.0};
  s.second_center = {1.0, 0.0};
  s.size = radius;
  return s;
}

void ShapeSpec::validate() const {
  if (n_points < 2) throw InvalidInput("a shape needs at least 2 points");
  if (!(size > 0.0) || !std::isfinite(size)) throw InvalidInput("shape size must be positive");
  if (!std::isfinite(center[0]) || !std::isfinite(center[1]) || !std::isfinite(second_center[0]) ||
      !std::isfinite(second_center[1])) {
    throw InvalidInput("shape centers must be finite");
  }
  if (kind == ShapeKind::TwoCircles && center == second_center) {
    throw InvalidInput("the two circles need distinct centers");
  }
}

ShapeSpec parse_shape_spec(std::string_view text) {
  const auto colon = text.find(':');
  const auto name = text.substr(0, colon);
  std::size_t n = 64;
  if (colon != std::string_view::npos) {
    const auto digits = text.substr(colon + 1);
    const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), n);
    if (ec != std::errc() || ptr != digits.data() + digits.size()) {
      throw InvalidInput("bad point count in shape '" + std::string(text) + "'");
    }
  }
  ShapeSpec spec;
  if (name == "circle") {
    spec = ShapeSpec::circle(n);
  } else if (name == "square") {
    spec = ShapeSpec::square(n);
  } else if (name == "two_circles") {
    spec = ShapeSpec::two_circles(n);
  } else {
    throw InvalidInput("unknown shape '" + std::string(name) +
                       "' (expected circle, square or two_circles)");
  }
  spec.validate();
  return spec;
}

PointCloud sample_shape(const ShapeSpec& spec) {
  spec.validate();
  std::vector<double> flat;
  flat.reserve(2 * spec.n_points);
  switch (spec.kind) {
    case ShapeKind::Circle:
      append_circle(flat, spec.center, spec.size, spec.n_points);
      break;
    case ShapeKind::Square:
      append_square(flat, spec.center, spec.size, spec.n_points);
      break;
    case ShapeKind::TwoCircles: {
      const std::size_t first = (spec.n_points + 1) / 2;
      append_circle(flat, spec.center, spec.size, first);
      append_circle(flat, spec.second_center, spec.size, spec.n_points - first);
      break;
    }
  }
  return PointCloud(2, flat);
}

MorphFrame interpolate(const TransportPlan& plan, const PointCloud& source,
                       const PointCloud& target, double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw InvalidInput("interpolation parameter must lie in [0, 1]");
  if (source.dim() != 2 || target.dim() != 2) throw InvalidInput("morphing needs 2-D clouds");
  if (plan.n_source() != source.size() || plan.n_target() != target.size()) {
    throw InvalidInput("plan dimensions do not match the clouds");
  }
  MorphFrame frame;
  frame.t = t;
  frame.points.reserve(plan.size());
  for (const auto& e : plan.entries()) {
    frame.points.push_back({(1.0 - t) * source.coord(e.i, 0) + t * target.coord(e.j, 0),
                            (1.0 - t) * source.coord(e.i, 1) + t * target.coord(e.j, 1), e.mass});
  }
  return frame;
}

MorphResult morph_sequence(const ShapeSpec& source, const ShapeSpec& target, std::size_t n_frames,
                           const SolverConfig& cfg) {
  if (n_frames < 2) throw InvalidInput("a morph needs at least 2 frames");
  const auto mu_s = uniform_measure(sample_shape(source));
  const auto mu_t = uniform_measure(sample_shape(target));
  const CostOracle oracle(mu_s.cloud(), mu_t.cloud());
  MorphResult result{solve(mu_s, mu_t, oracle, cfg), {}};
  result.frames.reserve(n_frames);
  for (std::size_t k = 0; k < n_frames; ++k) {
    const double t = static_cast<double>(k) / static_cast<double>(n_frames - 1);
    result.frames.push_back(interpolate(result.solution.plan, mu_s.cloud(), mu_t.cloud(), t));
  }
  return result;
}

void write_frame_csv(std::ostream& out, const MorphFrame& frame) {
  out << "t,x,y,mass\n";
  const std::string t = io::format_double(frame.t);
  for (const auto& p : frame.points) {
    out << t << ',' << io::format_double(p.x) << ',' << io::format_double(p.y) << ','
        << io::format_double(p.mass) << '\n';
  }
}

}  // namespace fastot
