#pragma once

// Poisson-Boolean disk configurations in a square box, nested volume-fraction
// paths and occupied/vacant connectivity classification.

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace hcperc {

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

/// Square domain [-half_width, half_width]^2 populated by disks of one radius.
struct Box {
  double half_width = 1.0;
  double disk_radius = 0.25;

  double side() const { return 2.0 * half_width; }
  double area() const { return side() * side(); }
  bool contains(Point p) const {
    return p.x >= -half_width && p.x <= half_width && p.y >= -half_width &&
           p.y <= half_width;
  }

  /// Throws std::domain_error unless half_width > 0 and disk_radius > 0.
  void check_positive() const;
  /// Additionally requires half_width / disk_radius >= 4.
  void check_simulation_box() const;

  friend bool operator==(const Box&, const Box&) = default;
};

/// Cell counts of a raster over the box.
struct GridDims {
  std::size_t nx = 0;
  std::size_t ny = 0;

  std::size_t cells() const { return nx * ny; }
  friend bool operator==(const GridDims&, const GridDims&) = default;
};

/// Identifier of the pseudo-random generator that produced the centers.
/// It is written into snapshot files; changing it breaks reproducibility.
inline constexpr const char* kRngName = "mt19937_64";

/// Uniform double in [0, 1) from the top 53 bits of one mt19937_64 draw.
/// Portable, unlike std::uniform_real_distribution.
double unit_uniform(std::uint64_t draw);

struct DiskConfiguration {
  Box box;
  std::vector<Point> centers;  // insertion order
  std::uint64_t seed = 0;

  std::size_t size() const { return centers.size(); }
  /// The first `count` disks; itself a valid configuration.
  DiskConfiguration prefix(std::size_t count) const;
};

struct Checkpoint {
  double p_target = 0.0;
  std::size_t prefix_length = 0;
  double p_achieved = 0.0;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

struct NestedPath {
  std::uint64_t seed = 0;
  Box box;
  GridDims dims;
  std::vector<Checkpoint> checkpoints;
};

struct GeneratedPath {
  NestedPath path;
  DiskConfiguration config;  // holds every disk up to the last checkpoint

  DiskConfiguration at(std::size_t checkpoint_index) const {
    return config.prefix(path.checkpoints.at(checkpoint_index).prefix_length);
  }
};

/// Marks every cell whose center lies within disk_radius of `center`.
/// Returns the number of cells that were vacant before.
std::size_t stamp_disk(std::vector<std::uint8_t>& cells, GridDims dims,
                       const Box& box, Point center);

/// Hard cap on disks placed by generate_path.
inline constexpr std::size_t kMaxDisksPerPath = 10'000'000;

/// 1 - exp(-pi * lambda * r^2).
double expected_coverage(double lambda, double r);
/// Inverse of expected_coverage in lambda; p must lie in [0, 1).
double intensity_for_fraction(double p, double r);

/// Drops disks uniformly in the box one at a time, monitoring coverage on a
/// `dims` raster (cell occupied iff its center lies in some disk). For each
/// target p the checkpoint is the first prefix whose coverage exceeds p; the
/// target p = 0 maps to the empty prefix.
GeneratedPath generate_path(std::uint64_t seed, const Box& box,
                            const std::vector<double>& p_targets,
                            GridDims dims);

enum class Verdict { OccupiedDominates, VacantDominates, Neither };

const char* to_string(Verdict v);

struct DominationReport {
  bool occupied_totally_connected = false;
  bool vacant_totally_connected = false;
  Verdict verdict = Verdict::Neither;
};

enum class Edge : std::size_t { Top = 0, Bottom = 1, Left = 2, Right = 3 };

/// connected[a][b] is true when one component of the chosen phase touches
/// both edge a and edge b (diagonal: touches edge a at all).
using EdgeConnectivity = std::array<std::array<bool, 4>, 4>;

/// Row-major boolean raster, row 0 at the bottom edge. Occupied cells use
/// 8-neighbour adjacency, vacant cells 4-neighbour adjacency.
EdgeConnectivity occupied_edge_connectivity(const std::vector<std::uint8_t>& cells,
                                            GridDims dims);
EdgeConnectivity vacant_edge_connectivity(const std::vector<std::uint8_t>& cells,
                                          GridDims dims);

DominationReport classify_domination(const std::vector<std::uint8_t>& cells,
                                     GridDims dims);

/// Occupied cluster (8-adjacency) joining the bottom and top rows.
bool occupied_crosses_vertically(const std::vector<std::uint8_t>& cells,
                                 GridDims dims);

// Snapshot files.
//
//   hcperc-config 1
//   rng mt19937_64
//   seed <u64>
//   half_width <double>
//   disk_radius <double>
//   count <n>
//   <x> <y>            (n lines, %.17g)
void write_snapshot(std::ostream& out, const DiskConfiguration& config);
DiskConfiguration read_snapshot(std::istream& in);
/// CSV with header "index,x,y".
void write_centers_csv(std::ostream& out, const DiskConfiguration& config);
/// CSV with header "p_target,prefix_length,p_achieved".
void write_checkpoints_csv(std::ostream& out, const NestedPath& path);

}  // namespace hcperc
