#include "hcperc/field.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "hcperc/io.hpp"

namespace hcperc {

std::size_t OccupancyGrid::occupied_count() const {
  return static_cast<std::size_t>(std::count(cells.begin(), cells.end(), std::uint8_t{1}));
}

double OccupancyGrid::coverage() const {
  return cells.empty() ? 0.0
                       : static_cast<double>(occupied_count()) / static_cast<double>(cells.size());
}

Point OccupancyGrid::cell_center(std::size_t i, std::size_t j) const {
  return {-box.half_width + (static_cast<double>(i) + 0.5) * cell_width(),
          -box.half_width + (static_cast<double>(j) + 0.5) * cell_height()};
}

const char* to_string(ProblemType t) { return t == ProblemType::OS ? "OS" : "VS"; }

ProblemType parse_problem_type(const std::string& text) {
  if (text == "OS" || text == "os") return ProblemType::OS;
  if (text == "VS" || text == "vs") return ProblemType::VS;
  throw std::invalid_argument("unknown problem type '" + text + "' (expected OS or VS)");
}

OccupancyGrid rasterize(const DiskConfiguration& config, GridDims dims) {
  if (dims.nx < 2 || dims.ny < 2) throw std::invalid_argument("grid must be at least 2x2");
  config.box.check_positive();
  OccupancyGrid occ{dims, config.box, std::vector<std::uint8_t>(dims.cells(), 0)};
  for (const auto& c : config.centers) stamp_disk(occ.cells, dims, config.box, c);
  return occ;
}

ConductivityGrid conductivity_field(const OccupancyGrid& occ, ProblemType type,
                                    double gamma0, double gamma1) {
  if (!(gamma0 > 0.0) || !(gamma1 > 0.0)) throw std::domain_error("conductivities must be positive");
  if (gamma0 > gamma1) throw std::domain_error("gamma0 must not exceed gamma1");
  const double in_set = type == ProblemType::OS ? gamma1 : gamma0;
  const double outside = type == ProblemType::OS ? gamma0 : gamma1;
  ConductivityGrid g{occ.dims, occ.box, std::vector<double>(occ.cells.size()), gamma0, gamma1};
  std::transform(occ.cells.begin(), occ.cells.end(), g.gamma.begin(),
                 [&](std::uint8_t c) { return c ? in_set : outside; });
  return g;
}

void write_occupancy_pgm(std::ostream& out, const OccupancyGrid& occ) {
  out << "P5\n# hcperc occupancy, center-in-disk rule\n"
      << occ.dims.nx << ' ' << occ.dims.ny << "\n255\n";
  std::vector<char> row(occ.dims.nx);
  for (std::size_t jj = occ.dims.ny; jj-- > 0;) {
    for (std::size_t i = 0; i < occ.dims.nx; ++i) {
      row[i] = static_cast<char>(occ.occupied(i, jj) ? 255 : 0);
    }
    out.write(row.data(), static_cast<std::streamsize>(row.size()));
  }
}

namespace {

static_assert(std::endian::native == std::endian::little,
              "raw dumps assume a little-endian host");

}  // namespace

void write_raw_field(std::ostream& out, const std::string& kind, GridDims dims,
                     const Box& box, const std::vector<double>& values,
                     const std::string& extra) {
  if (values.size() != dims.cells()) throw std::invalid_argument("field size does not match dims");
  out << "hcperc-field 1 " << kind << ' ' << dims.nx << ' ' << dims.ny << ' '
      << format_double(box.half_width) << ' ' << format_double(box.disk_radius);
  if (!extra.empty()) out << ' ' << extra;
  out << '\n';
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(double)));
}

RawField read_raw_field(std::istream& in) {
  std::string header;
  if (!std::getline(in, header)) throw std::runtime_error("empty field dump");
  std::istringstream hs(header);
  std::string magic, version, nx, ny, L, r;
  RawField f;
  hs >> magic >> version >> f.kind >> nx >> ny >> L >> r;
  if (magic != "hcperc-field" || version != "1") throw std::runtime_error("not an hcperc-field v1 dump");
  f.dims = {parse_u64(nx), parse_u64(ny)};
  f.box = {parse_double(L), parse_double(r)};
  std::getline(hs >> std::ws, f.extra);
  f.values.resize(f.dims.cells());
  in.read(reinterpret_cast<char*>(f.values.data()),
          static_cast<std::streamsize>(f.values.size() * sizeof(double)));
  if (!in) throw std::runtime_error("field dump truncated");
  return f;
}

}  // namespace hcperc
