#pragma once

// Rasterized occupancy and binary conductivity fields.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "hcperc/geometry.hpp"

namespace hcperc {

/// Cell-centered raster; row 0 is the bottom edge (y = -L), column 0 the
/// left edge (x = -L).
struct OccupancyGrid {
  GridDims dims;
  Box box;
  std::vector<std::uint8_t> cells;  // 1 = inside the occupied set

  bool occupied(std::size_t i, std::size_t j) const { return cells[j * dims.nx + i] != 0; }
  std::size_t occupied_count() const;
  double coverage() const;
  double cell_width() const { return box.side() / static_cast<double>(dims.nx); }
  double cell_height() const { return box.side() / static_cast<double>(dims.ny); }
  Point cell_center(std::size_t i, std::size_t j) const;
};

/// OS: occupied set conducts. VS ("Swiss cheese"): occupied set insulates.
enum class ProblemType { OS, VS };

const char* to_string(ProblemType t);
ProblemType parse_problem_type(const std::string& text);

struct ConductivityGrid {
  GridDims dims;
  Box box;
  std::vector<double> gamma;  // row-major, one value per cell
  double gamma0 = 1e-4;       // insulating phase
  double gamma1 = 1.0;        // conducting phase

  double at(std::size_t i, std::size_t j) const { return gamma[j * dims.nx + i]; }
  double cell_width() const { return box.side() / static_cast<double>(dims.nx); }
  double cell_height() const { return box.side() / static_cast<double>(dims.ny); }
};

/// Cell (i, j) is occupied iff its center lies within the disk radius of a
/// disk center. Requires dims of at least 2x2.
OccupancyGrid rasterize(const DiskConfiguration& config, GridDims dims);

/// OS maps occupied -> gamma1, vacant -> gamma0; VS the reverse.
ConductivityGrid conductivity_field(const OccupancyGrid& occ, ProblemType type,
                                    double gamma0, double gamma1);

/// Binary 8-bit PGM (P5), occupied = 255, top image row = top box edge.
void write_occupancy_pgm(std::ostream& out, const OccupancyGrid& occ);

// Raw field dump: a single text header line
//   hcperc-field 1 <kind> <nx> <ny> <half_width> <disk_radius> <extra...>\n
// followed by nx*ny little-endian IEEE-754 float64 values, row-major from
// the bottom row.
void write_raw_field(std::ostream& out, const std::string& kind, GridDims dims,
                     const Box& box, const std::vector<double>& values,
                     const std::string& extra = "");

struct RawField {
  std::string kind;
  GridDims dims;
  Box box;
  std::string extra;
  std::vector<double> values;
};

RawField read_raw_field(std::istream& in);

}  // namespace hcperc
