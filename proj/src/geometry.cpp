#include "hcperc/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "hcperc/io.hpp"
#include "hcperc/union_find.hpp"

namespace hcperc {

void Box::check_positive() const {
  if (!(half_width > 0.0) || !(disk_radius > 0.0)) {
    throw std::domain_error("box half-width and disk radius must be positive");
  }
}

void Box::check_simulation_box() const {
  check_positive();
  if (half_width / disk_radius < 4.0) {
    throw std::domain_error("box half-width must be at least 4 disk radii");
  }
}

double unit_uniform(std::uint64_t draw) {
  return static_cast<double>(draw >> 11) * 0x1.0p-53;
}

DiskConfiguration DiskConfiguration::prefix(std::size_t count) const {
  if (count > centers.size()) throw std::out_of_range("prefix longer than configuration");
  DiskConfiguration out{box, {}, seed};
  out.centers.assign(centers.begin(), centers.begin() + static_cast<std::ptrdiff_t>(count));
  return out;
}

double expected_coverage(double lambda, double r) {
  if (!(lambda >= 0.0)) throw std::domain_error("intensity must be non-negative");
  if (!(r > 0.0)) throw std::domain_error("radius must be positive");
  return -std::expm1(-std::numbers::pi * lambda * r * r);
}

double intensity_for_fraction(double p, double r) {
  if (!(p >= 0.0) || !(p < 1.0)) throw std::domain_error("fraction must lie in [0, 1)");
  if (!(r > 0.0)) throw std::domain_error("radius must be positive");
  return -std::log1p(-p) / (std::numbers::pi * r * r);
}

std::size_t stamp_disk(std::vector<std::uint8_t>& cells, GridDims dims,
                       const Box& box, Point c) {
  const double L = box.half_width;
  const double r = box.disk_radius;
  const double hx = box.side() / static_cast<double>(dims.nx);
  const double hy = box.side() / static_cast<double>(dims.ny);
  // Cell i has center -L + (i + 0.5) h.
  auto lo_index = [](double v, double h) { return std::ceil(v / h - 0.5); };
  auto hi_index = [](double v, double h) { return std::floor(v / h - 0.5); };
  const double i0 = std::max(0.0, lo_index(c.x - r + L, hx));
  const double i1 = std::min(static_cast<double>(dims.nx) - 1.0, hi_index(c.x + r + L, hx));
  const double j0 = std::max(0.0, lo_index(c.y - r + L, hy));
  const double j1 = std::min(static_cast<double>(dims.ny) - 1.0, hi_index(c.y + r + L, hy));
  std::size_t added = 0;
  const double r2 = r * r;
  for (double jd = j0; jd <= j1; jd += 1.0) {
    const auto j = static_cast<std::size_t>(jd);
    const double dy = -L + (jd + 0.5) * hy - c.y;
    for (double id = i0; id <= i1; id += 1.0) {
      const auto i = static_cast<std::size_t>(id);
      const double dx = -L + (id + 0.5) * hx - c.x;
      if (dx * dx + dy * dy <= r2) {
        auto& cell = cells[j * dims.nx + i];
        if (!cell) {
          cell = 1;
          ++added;
        }
      }
    }
  }
  return added;
}

GeneratedPath generate_path(std::uint64_t seed, const Box& box,
                            const std::vector<double>& p_targets, GridDims dims) {
  box.check_simulation_box();
  if (dims.nx < 2 || dims.ny < 2) throw std::invalid_argument("grid must be at least 2x2");
  for (std::size_t k = 0; k < p_targets.size(); ++k) {
    const double p = p_targets[k];
    if (!(p >= 0.0 && p < 1.0)) throw std::domain_error("target fraction outside [0, 1)");
    if (k > 0 && !(p > p_targets[k - 1])) {
      throw std::invalid_argument("target fractions must be strictly increasing");
    }
  }

  GeneratedPath out;
  out.path.seed = seed;
  out.path.box = box;
  out.path.dims = dims;
  out.config.box = box;
  out.config.seed = seed;

  std::mt19937_64 rng(seed);
  std::vector<std::uint8_t> cells(dims.cells(), 0);
  const double total = static_cast<double>(dims.cells());
  std::size_t covered = 0;
  for (double p : p_targets) {
    if (p > 0.0) {
      while (static_cast<double>(covered) / total <= p) {
        if (out.config.centers.size() >= kMaxDisksPerPath) {
          throw std::runtime_error("disk cap reached while filling nested path");
        }
        const double x = (2.0 * unit_uniform(rng()) - 1.0) * box.half_width;
        const double y = (2.0 * unit_uniform(rng()) - 1.0) * box.half_width;
        out.config.centers.push_back({x, y});
        covered += stamp_disk(cells, dims, box, {x, y});
      }
    }
    out.path.checkpoints.push_back(
        {p, out.config.centers.size(), static_cast<double>(covered) / total});
  }
  return out;
}

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::OccupiedDominates: return "OccupiedDominates";
    case Verdict::VacantDominates: return "VacantDominates";
    case Verdict::Neither: return "Neither";
  }
  return "?";
}

namespace {

EdgeConnectivity edge_connectivity(const std::vector<std::uint8_t>& cells, GridDims dims,
                                   bool phase, bool diagonal) {
  const std::size_t nx = dims.nx, ny = dims.ny, n = dims.cells();
  if (nx == 0 || ny == 0 || cells.size() != n) {
    throw std::invalid_argument("occupancy raster does not match its dimensions");
  }
  UnionFind uf(n);
  auto in_phase = [&](std::size_t i, std::size_t j) { return (cells[j * nx + i] != 0) == phase; };
  for (std::size_t j = 0; j < ny; ++j) {
    for (std::size_t i = 0; i < nx; ++i) {
      if (!in_phase(i, j)) continue;
      const std::size_t id = j * nx + i;
      if (i + 1 < nx && in_phase(i + 1, j)) uf.unite(id, id + 1);
      if (j + 1 < ny && in_phase(i, j + 1)) uf.unite(id, id + nx);
      if (diagonal && j + 1 < ny) {
        if (i + 1 < nx && in_phase(i + 1, j + 1)) uf.unite(id, id + nx + 1);
        if (i > 0 && in_phase(i - 1, j + 1)) uf.unite(id, id + nx - 1);
      }
    }
  }
  // Edges touched by each component, as a bit mask on its root.
  std::vector<std::uint8_t> mask(n, 0);
  for (std::size_t j = 0; j < ny; ++j) {
    for (std::size_t i = 0; i < nx; ++i) {
      if (!in_phase(i, j)) continue;
      std::uint8_t m = 0;
      if (j == ny - 1) m |= 1u << static_cast<std::size_t>(Edge::Top);
      if (j == 0) m |= 1u << static_cast<std::size_t>(Edge::Bottom);
      if (i == 0) m |= 1u << static_cast<std::size_t>(Edge::Left);
      if (i == nx - 1) m |= 1u << static_cast<std::size_t>(Edge::Right);
      if (m) mask[uf.find(j * nx + i)] |= m;
    }
  }
  EdgeConnectivity out{};
  for (std::uint8_t m : mask) {
    for (std::size_t a = 0; a < 4; ++a) {
      for (std::size_t b = 0; b < 4; ++b) {
        out[a][b] = out[a][b] || (((m >> a) & 1u) && ((m >> b) & 1u));
      }
    }
  }
  return out;
}

bool all_connected(const EdgeConnectivity& c) {
  for (std::size_t a = 0; a < 4; ++a) {
    for (std::size_t b = 0; b < 4; ++b) {
      if (!c[a][b]) return false;
    }
  }
  return true;
}

bool any_pair_connected(const EdgeConnectivity& c) {
  for (std::size_t a = 0; a < 4; ++a) {
    for (std::size_t b = a + 1; b < 4; ++b) {
      if (c[a][b]) return true;
    }
  }
  return false;
}

}  // namespace

EdgeConnectivity occupied_edge_connectivity(const std::vector<std::uint8_t>& cells,
                                            GridDims dims) {
  return edge_connectivity(cells, dims, true, true);
}

EdgeConnectivity vacant_edge_connectivity(const std::vector<std::uint8_t>& cells,
                                          GridDims dims) {
  return edge_connectivity(cells, dims, false, false);
}

DominationReport classify_domination(const std::vector<std::uint8_t>& cells, GridDims dims) {
  const auto occ = occupied_edge_connectivity(cells, dims);
  const auto vac = vacant_edge_connectivity(cells, dims);
  DominationReport r;
  r.occupied_totally_connected = all_connected(occ);
  r.vacant_totally_connected = all_connected(vac);
  if (r.occupied_totally_connected && !any_pair_connected(vac)) {
    r.verdict = Verdict::OccupiedDominates;
  } else if (r.vacant_totally_connected && !any_pair_connected(occ)) {
    r.verdict = Verdict::VacantDominates;
  } else {
    r.verdict = Verdict::Neither;
  }
  return r;
}

bool occupied_crosses_vertically(const std::vector<std::uint8_t>& cells, GridDims dims) {
  const auto occ = occupied_edge_connectivity(cells, dims);
  return occ[static_cast<std::size_t>(Edge::Top)][static_cast<std::size_t>(Edge::Bottom)];
}

void write_snapshot(std::ostream& out, const DiskConfiguration& config) {
  out << "hcperc-config 1\n"
      << "rng " << kRngName << '\n'
      << "seed " << config.seed << '\n'
      << "half_width " << format_double(config.box.half_width) << '\n'
      << "disk_radius " << format_double(config.box.disk_radius) << '\n'
      << "count " << config.centers.size() << '\n';
  for (const auto& c : config.centers) {
    out << format_double(c.x) << ' ' << format_double(c.y) << '\n';
  }
}

namespace {

std::string expect_field(std::istream& in, const char* key) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(std::string("snapshot truncated before ") + key);
  std::istringstream ls(line);
  std::string k, v;
  ls >> k >> v;
  if (k != key) throw std::runtime_error(std::string("snapshot: expected '") + key + "', got '" + k + "'");
  return v;
}

}  // namespace

DiskConfiguration read_snapshot(std::istream& in) {
  std::string header;
  std::getline(in, header);
  if (trim(header) != "hcperc-config 1") throw std::runtime_error("not an hcperc-config v1 snapshot");
  if (expect_field(in, "rng") != kRngName) throw std::runtime_error("snapshot produced by a different generator");
  DiskConfiguration config;
  config.seed = parse_u64(expect_field(in, "seed"));
  config.box.half_width = parse_double(expect_field(in, "half_width"));
  config.box.disk_radius = parse_double(expect_field(in, "disk_radius"));
  config.box.check_positive();
  const auto count = parse_u64(expect_field(in, "count"));
  config.centers.reserve(count);
  std::string line;
  for (std::uint64_t k = 0; k < count; ++k) {
    if (!std::getline(in, line)) throw std::runtime_error("snapshot truncated in center list");
    auto parts = split(trim(line), ' ');
    if (parts.size() != 2) throw std::runtime_error("malformed center line: " + line);
    Point p{parse_double(parts[0]), parse_double(parts[1])};
    if (!config.box.contains(p)) throw std::runtime_error("center outside the box: " + line);
    config.centers.push_back(p);
  }
  return config;
}

void write_centers_csv(std::ostream& out, const DiskConfiguration& config) {
  out << "index,x,y\n";
  for (std::size_t k = 0; k < config.centers.size(); ++k) {
    out << k << ',' << format_double(config.centers[k].x) << ','
        << format_double(config.centers[k].y) << '\n';
  }
}

void write_checkpoints_csv(std::ostream& out, const NestedPath& path) {
  out << "p_target,prefix_length,p_achieved\n";
  for (const auto& c : path.checkpoints) {
    out << format_double(c.p_target) << ',' << c.prefix_length << ','
        << format_double(c.p_achieved) << '\n';
  }
}

}  // namespace hcperc
