#include "hcperc/contours.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <unordered_map>
#include <limits>
#include <optional>
#include <unordered_set>

#include <json.hpp>

#include "hcperc/io.hpp"

namespace hcperc {

namespace {

// Lattice edges between cell centers. Key 2*(j*nx+i) is the horizontal edge
// (i,j)-(i+1,j); key 2*(j*nx+i)+1 is the vertical edge (i,j)-(i,j+1).
struct Segment {
  std::uint64_t a;
  std::uint64_t b;
};

enum SquareEdge { kBottom, kRight, kTop, kLeft };

class LevelTracer {
 public:
  LevelTracer(const PotentialField& u, double level) : u_(u), level_(level) {
    hx_ = u.box.side() / static_cast<double>(u.dims.nx);
    hy_ = u.box.side() / static_cast<double>(u.dims.ny);
  }

  std::vector<Polyline> trace() {
    collect_segments();
    return chain();
  }

 private:
  bool above(std::size_t i, std::size_t j) const { return u_.at(i, j) >= level_; }

  std::uint64_t edge_key(std::size_t i, std::size_t j, SquareEdge e) const {
    const std::size_t nx = u_.dims.nx;
    switch (e) {
      case kBottom: return 2 * (j * nx + i);
      case kTop: return 2 * ((j + 1) * nx + i);
      case kLeft: return 2 * (j * nx + i) + 1;
      case kRight: return 2 * (j * nx + i + 1) + 1;
    }
    return 0;
  }

  Point center(std::size_t i, std::size_t j) const {
    const double L = u_.box.half_width;
    return {-L + (static_cast<double>(i) + 0.5) * hx_, -L + (static_cast<double>(j) + 0.5) * hy_};
  }

  Point edge_point(std::uint64_t key) const {
    const std::size_t nx = u_.dims.nx;
    const std::size_t node = key / 2;
    const std::size_t i = node % nx;
    const std::size_t j = node / nx;
    const std::size_t i2 = (key % 2 == 0) ? i + 1 : i;
    const std::size_t j2 = (key % 2 == 0) ? j : j + 1;
    const double a = u_.at(i, j);
    const double b = u_.at(i2, j2);
    const double t = std::clamp((level_ - a) / (b - a), 0.0, 1.0);
    const Point pa = center(i, j);
    const Point pb = center(i2, j2);
    return {pa.x + t * (pb.x - pa.x), pa.y + t * (pb.y - pa.y)};
  }

  void add(std::size_t i, std::size_t j, SquareEdge e1, SquareEdge e2) {
    segments_.push_back({edge_key(i, j, e1), edge_key(i, j, e2)});
  }

  void collect_segments() {
    const std::size_t nx = u_.dims.nx;
    const std::size_t ny = u_.dims.ny;
    for (std::size_t j = 0; j + 1 < ny; ++j) {
      for (std::size_t i = 0; i + 1 < nx; ++i) {
        const int c = (above(i, j) ? 1 : 0) | (above(i + 1, j) ? 2 : 0) |
                      (above(i + 1, j + 1) ? 4 : 0) | (above(i, j + 1) ? 8 : 0);
        switch (c) {
          case 0:
          case 15: break;
          case 1:
          case 14: add(i, j, kLeft, kBottom); break;
          case 2:
          case 13: add(i, j, kBottom, kRight); break;
          case 3:
          case 12: add(i, j, kLeft, kRight); break;
          case 4:
          case 11: add(i, j, kRight, kTop); break;
          case 6:
          case 9: add(i, j, kBottom, kTop); break;
          case 7:
          case 8: add(i, j, kLeft, kTop); break;
          case 5:
          case 10: {
            const double mean =
                0.25 * (u_.at(i, j) + u_.at(i + 1, j) + u_.at(i + 1, j + 1) + u_.at(i, j + 1));
            // Keep the corners that agree with the center connected.
            const bool center_above = mean >= level_;
            const bool isolate_bl_tr = (c == 5) != center_above;
            if (isolate_bl_tr) {
              add(i, j, kLeft, kBottom);
              add(i, j, kRight, kTop);
            } else {
              add(i, j, kBottom, kRight);
              add(i, j, kLeft, kTop);
            }
            break;
          }
          default: break;
        }
      }
    }
  }

  // Extension of an open end to the box boundary, along the edge normal.
  std::optional<Point> boundary_extension(std::uint64_t key, Point p) const {
    const std::size_t nx = u_.dims.nx;
    const std::size_t ny = u_.dims.ny;
    const std::size_t node = key / 2;
    const std::size_t i = node % nx;
    const std::size_t j = node / nx;
    const double L = u_.box.half_width;
    if (key % 2 == 0) {  // horizontal edge
      if (j == 0) return Point{p.x, -L};
      if (j == ny - 1) return Point{p.x, L};
    } else {
      if (i == 0) return Point{-L, p.y};
      if (i == nx - 1) return Point{L, p.y};
    }
    return std::nullopt;
  }

  std::vector<Polyline> chain() {
    std::unordered_map<std::uint64_t, std::array<std::int64_t, 2>> incident;
    incident.reserve(segments_.size() * 2);
    for (std::size_t s = 0; s < segments_.size(); ++s) {
      for (std::uint64_t k : {segments_[s].a, segments_[s].b}) {
        auto [it, fresh] = incident.try_emplace(k, std::array<std::int64_t, 2>{-1, -1});
        auto& slot = it->second;
        (slot[0] < 0 ? slot[0] : slot[1]) = static_cast<std::int64_t>(s);
      }
    }
    std::vector<std::uint8_t> used(segments_.size(), 0);
    std::vector<Polyline> out;

    auto walk = [&](std::size_t first, std::uint64_t start_key) {
      std::vector<std::uint64_t> keys{start_key};
      std::uint64_t key = start_key;
      std::int64_t seg = static_cast<std::int64_t>(first);
      while (seg >= 0 && !used[seg]) {
        used[seg] = 1;
        const Segment& s = segments_[seg];
        key = (s.a == key) ? s.b : s.a;
        keys.push_back(key);
        const auto& slot = incident.at(key);
        seg = (slot[0] == seg) ? slot[1] : slot[0];
      }
      return keys;
    };

    // Open chains first: they start at keys touched by a single segment.
    // Iterate segments in order so the output does not depend on hashing.
    for (std::size_t s = 0; s < segments_.size(); ++s) {
      if (used[s]) continue;
      for (std::uint64_t k : {segments_[s].a, segments_[s].b}) {
        if (used[s]) break;
        const auto& slot = incident.at(k);
        if (slot[1] >= 0) continue;
        auto keys = walk(s, k);
        Polyline line;
        line.points.reserve(keys.size() + 2);
        const Point first = edge_point(keys.front());
        if (auto e = boundary_extension(keys.front(), first)) line.points.push_back(*e);
        for (std::uint64_t key : keys) line.points.push_back(edge_point(key));
        if (auto e = boundary_extension(keys.back(), line.points.back())) {
          line.points.push_back(*e);
        }
        out.push_back(std::move(line));
      }
    }
    for (std::size_t s = 0; s < segments_.size(); ++s) {
      if (used[s]) continue;
      auto keys = walk(s, segments_[s].a);
      Polyline line;
      line.closed = true;
      line.points.reserve(keys.size());
      for (std::uint64_t key : keys) line.points.push_back(edge_point(key));
      out.push_back(std::move(line));
    }
    return out;
  }

  const PotentialField& u_;
  double level_;
  double hx_ = 0.0;
  double hy_ = 0.0;
  std::vector<Segment> segments_;
};

}  // namespace

ContourSet extract_contours(const PotentialField& u, std::span<const double> levels) {
  if (u.dims.nx < 2 || u.dims.ny < 2 || u.values.size() != u.dims.cells()) {
    throw std::invalid_argument("potential field must be at least 2x2");
  }
  for (std::size_t k = 0; k < levels.size(); ++k) {
    if (!(levels[k] > 0.0 && levels[k] < u.bc.u0)) {
      throw std::invalid_argument("contour levels must lie strictly inside (0, u0)");
    }
    if (k > 0 && !(levels[k] > levels[k - 1])) {
      throw std::invalid_argument("contour levels must be strictly increasing");
    }
  }
  ContourSet out;
  out.box = u.box;
  for (double level : levels) {
    out.levels.push_back({level, LevelTracer(u, level).trace()});
  }
  return out;
}

std::vector<double> uniform_levels(double u0, double step) {
  if (!(step > 0.0 && step < 1.0)) throw std::invalid_argument("level step must be in (0, 1)");
  std::vector<double> out;
  for (int k = 1;; ++k) {
    const double f = k * step;
    if (f >= 1.0 - 1e-12) break;
    out.push_back(u0 * f);
  }
  return out;
}

double arclength(const Polyline& line) {
  double s = 0.0;
  for (std::size_t k = 1; k < line.points.size(); ++k) {
    s += std::hypot(line.points[k].x - line.points[k - 1].x,
                    line.points[k].y - line.points[k - 1].y);
  }
  return s;
}

double total_arclength(const ContourLevel& level) {
  double s = 0.0;
  for (const auto& l : level.polylines) s += arclength(l);
  return s;
}

double interior_vertex_fraction(const ContourSet& contours, const OccupancyGrid& occ) {
  const double L = occ.box.half_width;
  const double hx = occ.cell_width();
  const double hy = occ.cell_height();
  const auto nx = static_cast<std::ptrdiff_t>(occ.dims.nx);
  const auto ny = static_cast<std::ptrdiff_t>(occ.dims.ny);
  std::size_t total = 0;
  std::size_t interior = 0;
  for (const auto& level : contours.levels) {
    for (const auto& line : level.polylines) {
      for (const Point& p : line.points) {
        ++total;
        auto i = static_cast<std::ptrdiff_t>(std::floor((p.x + L) / hx));
        auto j = static_cast<std::ptrdiff_t>(std::floor((p.y + L) / hy));
        i = std::clamp<std::ptrdiff_t>(i, 0, nx - 1);
        j = std::clamp<std::ptrdiff_t>(j, 0, ny - 1);
        bool inside = true;
        for (std::ptrdiff_t dj = -1; dj <= 1 && inside; ++dj) {
          for (std::ptrdiff_t di = -1; di <= 1; ++di) {
            const auto a = i + di;
            const auto b = j + dj;
            if (a < 0 || b < 0 || a >= nx || b >= ny || !occ.occupied(a, b)) {
              inside = false;
              break;
            }
          }
        }
        if (inside) ++interior;
      }
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(interior) / static_cast<double>(total);
}

namespace {

void validate_box_sizes(std::span<const double> sizes) {
  if (sizes.size() < 4) throw std::invalid_argument("box counting needs at least 4 box sizes");
  for (double s : sizes) {
    if (!(s > 0.0) || !std::isfinite(s)) throw std::invalid_argument("box sizes must be positive");
  }
  const double ratio = sizes[0] / sizes[1];
  if (!(ratio > 1.0)) throw std::invalid_argument("box sizes must be strictly decreasing");
  for (std::size_t k = 1; k + 1 < sizes.size(); ++k) {
    const double r = sizes[k] / sizes[k + 1];
    if (std::abs(r - ratio) > 1e-6 * ratio) {
      throw std::invalid_argument("box sizes must form a geometric progression");
    }
  }
  if (std::log10(sizes.front() / sizes.back()) < 1.5 - 1e-9) {
    throw std::invalid_argument("box sizes must span at least 1.5 decades");
  }
}

// Marks every box of an m x m grid crossed by the segment a-b.
void mark_segment(std::unordered_set<std::uint64_t>& boxes, Point a, Point b,
                  const CountingDomain& d, double s, std::int64_t m) {
  auto cell = [&](double v, double o) {
    auto c = static_cast<std::int64_t>(std::floor((v - o) / s));
    return std::clamp<std::int64_t>(c, 0, m - 1);
  };
  std::int64_t ix = cell(a.x, d.origin.x);
  std::int64_t iy = cell(a.y, d.origin.y);
  const std::int64_t ex = cell(b.x, d.origin.x);
  const std::int64_t ey = cell(b.y, d.origin.y);
  const auto key = [m](std::int64_t x, std::int64_t y) {
    return static_cast<std::uint64_t>(y * m + x);
  };
  boxes.insert(key(ix, iy));
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  const std::int64_t sx = dx > 0 ? 1 : (dx < 0 ? -1 : 0);
  const std::int64_t sy = dy > 0 ? 1 : (dy < 0 ? -1 : 0);
  const double inf = std::numeric_limits<double>::infinity();
  auto next_boundary = [&](std::int64_t c, std::int64_t step, double o) {
    return o + static_cast<double>(c + (step > 0 ? 1 : 0)) * s;
  };
  double tmx = sx != 0 ? (next_boundary(ix, sx, d.origin.x) - a.x) / dx : inf;
  double tmy = sy != 0 ? (next_boundary(iy, sy, d.origin.y) - a.y) / dy : inf;
  const double tdx = sx != 0 ? s / std::abs(dx) : inf;
  const double tdy = sy != 0 ? s / std::abs(dy) : inf;
  std::int64_t guard = std::abs(ex - ix) + std::abs(ey - iy) + 2;
  while ((ix != ex || iy != ey) && guard-- > 0) {
    if (tmx < tmy) {
      if (tmx > 1.0) break;
      ix += sx;
      tmx += tdx;
    } else {
      if (tmy > 1.0) break;
      iy += sy;
      tmy += tdy;
    }
    ix = std::clamp<std::int64_t>(ix, 0, m - 1);
    iy = std::clamp<std::int64_t>(iy, 0, m - 1);
    boxes.insert(key(ix, iy));
  }
  boxes.insert(key(ex, ey));
}

}  // namespace

FractalEstimate box_counting_dimension(std::span<const Polyline> lines,
                                       std::span<const double> box_sizes,
                                       const CountingDomain& domain) {
  validate_box_sizes(box_sizes);
  if (!(domain.side > 0.0)) throw std::invalid_argument("counting domain side must be positive");

  FractalEstimate est;
  est.box_sizes.assign(box_sizes.begin(), box_sizes.end());

  bool any = false;
  bool spread = false;
  Point ref{};
  for (const auto& l : lines) {
    for (const Point& p : l.points) {
      if (!any) {
        ref = p;
        any = true;
      } else if (p.x != ref.x || p.y != ref.y) {
        spread = true;
      }
    }
  }
  if (!spread) {
    est.degenerate = true;
    est.counts.assign(box_sizes.size(), any ? 1 : 0);
    return est;
  }

  for (double s : box_sizes) {
    const auto m = static_cast<std::int64_t>(std::ceil(domain.side / s - 1e-9));
    if (m <= 0 || static_cast<double>(m) * static_cast<double>(m) > 4e18) {
      throw std::invalid_argument("box size too small for the counting domain");
    }
    std::unordered_set<std::uint64_t> boxes;
    for (const auto& l : lines) {
      if (l.points.size() == 1) {
        mark_segment(boxes, l.points[0], l.points[0], domain, s, m);
      }
      for (std::size_t k = 1; k < l.points.size(); ++k) {
        mark_segment(boxes, l.points[k - 1], l.points[k], domain, s, m);
      }
    }
    est.counts.push_back(boxes.size());
  }

  const auto n = static_cast<double>(box_sizes.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  for (std::size_t k = 0; k < box_sizes.size(); ++k) {
    const double x = std::log(1.0 / box_sizes[k]);
    const double y = std::log(static_cast<double>(est.counts[k]));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    syy += y * y;
  }
  const double cxx = sxx - sx * sx / n;
  const double cxy = sxy - sx * sy / n;
  const double cyy = syy - sy * sy / n;
  est.dimension = cxy / cxx;
  est.fit_r2 = cyy > 0.0 ? (cxy * cxy) / (cxx * cyy) : 1.0;
  return est;
}

std::vector<double> power_of_two_box_sizes(GridDims dims, const Box& box) {
  const std::size_t n = std::min(dims.nx, dims.ny);
  const double h = box.side() / static_cast<double>(n);
  std::vector<double> out;
  for (std::size_t cells = n / 4; cells >= 4; cells /= 2) {
    out.push_back(static_cast<double>(cells) * h);
  }
  return out;
}

ContourDimension contour_dimension(const ContourSet& contours, std::span<const double> box_sizes) {
  const CountingDomain domain{{-contours.box.half_width, -contours.box.half_width},
                              contours.box.side()};
  ContourDimension out;
  std::vector<Polyline> all;
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& level : contours.levels) {
    out.per_level.push_back(box_counting_dimension(level.polylines, box_sizes, domain));
    if (!out.per_level.back().degenerate) {
      sum += out.per_level.back().dimension;
      ++n;
    }
    all.insert(all.end(), level.polylines.begin(), level.polylines.end());
  }
  out.mean_per_level = n > 0 ? sum / static_cast<double>(n) : 0.0;
  out.aggregate = box_counting_dimension(all, box_sizes, domain);
  return out;
}

void write_contours_csv(std::ostream& out, const ContourSet& contours) {
  out << "level,polyline_id,vertex_index,x,y\n";
  for (const auto& level : contours.levels) {
    for (std::size_t id = 0; id < level.polylines.size(); ++id) {
      const auto& pts = level.polylines[id].points;
      for (std::size_t k = 0; k < pts.size(); ++k) {
        out << format_double(level.level) << ',' << id << ',' << k << ','
            << format_double(pts[k].x) << ',' << format_double(pts[k].y) << '\n';
      }
    }
  }
}

std::string fractal_to_json(const FractalEstimate& f) {
  nlohmann::ordered_json j;
  j["dimension"] = f.dimension;
  j["fit_r2"] = f.fit_r2;
  j["degenerate"] = f.degenerate;
  j["box_sizes"] = f.box_sizes;
  j["counts"] = f.counts;
  return j.dump(2);
}

}  // namespace hcperc
