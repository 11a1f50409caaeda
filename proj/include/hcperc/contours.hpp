#pragma once

// Equipotential extraction (marching squares) and box-counting dimension.

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "hcperc/field.hpp"
#include "hcperc/solver.hpp"

namespace hcperc {

struct Polyline {
  std::vector<Point> points;  // closed polylines repeat the first point at the end
  bool closed = false;
};

struct ContourLevel {
  double level = 0.0;
  std::vector<Polyline> polylines;
};

struct ContourSet {
  Box box;
  std::vector<ContourLevel> levels;  // sorted by level
};

/// Marching squares over the lattice of cell centers with linear
/// interpolation along lattice edges. Saddle squares are split according to
/// whether the mean of the four corners lies above the level. Segments are
/// chained into maximal polylines; open polylines end on the outer ring of
/// cell centers and are extended along the edge normal to the box boundary.
/// Levels must be strictly increasing inside (0, u0); a level outside the
/// field's range yields no polylines.
ContourSet extract_contours(const PotentialField& u, std::span<const double> levels);

/// u0 * {step, 2 step, ...} strictly below u0.
std::vector<double> uniform_levels(double u0, double step);

double arclength(const Polyline& line);
double total_arclength(const ContourLevel& level);

/// Fraction of contour vertices lying in occupied cells whose eight
/// neighbours are also occupied.
double interior_vertex_fraction(const ContourSet& contours, const OccupancyGrid& occ);

struct FractalEstimate {
  double dimension = 0.0;
  std::vector<double> box_sizes;    // strictly decreasing, box-coordinate lengths
  std::vector<std::size_t> counts;  // occupied boxes per size
  double fit_r2 = 0.0;
  bool degenerate = false;          // geometry collapsed to a point; dimension forced to 0
};

/// Square region the box grid is anchored to.
struct CountingDomain {
  Point origin;  // lower-left corner
  double side = 1.0;
};

/// Counts boxes of each size touched by any segment (exact grid traversal),
/// then least-squares fits log N against log(1/s). Requires at least four
/// sizes in geometric progression spanning at least 1.5 decades.
FractalEstimate box_counting_dimension(std::span<const Polyline> lines,
                                       std::span<const double> box_sizes,
                                       const CountingDomain& domain);

/// Box sizes of dims/4, dims/8, ... down to 4 cells, as lengths.
std::vector<double> power_of_two_box_sizes(GridDims dims, const Box& box);

struct ContourDimension {
  FractalEstimate aggregate;           // every level counted together; the reported value
  std::vector<FractalEstimate> per_level;
  double mean_per_level = 0.0;         // average over non-degenerate levels
};

ContourDimension contour_dimension(const ContourSet& contours, std::span<const double> box_sizes);

/// CSV "level,polyline_id,vertex_index,x,y".
void write_contours_csv(std::ostream& out, const ContourSet& contours);
std::string fractal_to_json(const FractalEstimate& f);

}  // namespace hcperc
