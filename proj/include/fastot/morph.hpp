#pragma once
// Shape morphing between 2-D boundary curves by displacement along a
// transport plan.

#include <array>
#include <cstddef>
#include <iosfwd>
#include <string_view>
#include <vector>

#include "fastot/dual_solver.hpp"
#include "fastot/measures.hpp"

namespace fastot {

enum class ShapeKind { Circle, Square, TwoCircles };

struct ShapeSpec {
  ShapeKind kind = ShapeKind::Circle;
  std::size_t n_points = 64;
  // Circle and Square use the first center; TwoCircles uses both.
  std::array<double, 2> center{0.0, 0.0};
  std::array<double, 2> second_center{1.0, 0.0};
  // Circle radius, half the side for Square, radius of each circle for
  // TwoCircles.
  double size = 1.0;

  static ShapeSpec circle(std::size_t n, double radius = 1.0);
  static ShapeSpec square(std::size_t n, double side = 2.0);
  static ShapeSpec two_circles(std::size_t n, double radius = 0.5);

  // Throws InvalidInput.
  void validate() const;
};

// "circle:N", "square:N" or "two_circles:N" with default geometry.
ShapeSpec parse_shape_spec(std::string_view text);

// Circle: equally spaced angles starting at angle 0, counterclockwise.
// Square: equally spaced perimeter positions starting at the lower-left
// corner, counterclockwise. TwoCircles: the first circle gets ceil(n/2)
// points.
PointCloud sample_shape(const ShapeSpec& spec);

struct MorphPoint {
  double x;
  double y;
  double mass;
};

struct MorphFrame {
  double t = 0.0;
  std::vector<MorphPoint> points;  // one per plan entry, in plan order
};

// Point (1 - t) x_s + t x_t with mass gamma_ij for every plan entry. Both
// clouds must be 2-D.
MorphFrame interpolate(const TransportPlan& plan, const PointCloud& source,
                       const PointCloud& target, double t);

struct MorphResult {
  OTSolution solution;
  std::vector<MorphFrame> frames;
};

// One OT solve, then frames at t = k / (n_frames - 1).
MorphResult morph_sequence(const ShapeSpec& source, const ShapeSpec& target, std::size_t n_frames,
                           const SolverConfig& cfg = {});

// "t,x,y,mass" header and one line per point.
void write_frame_csv(std::ostream& out, const MorphFrame& frame);

}  // namespace fastot
