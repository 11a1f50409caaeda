#include "hcperc/observables.hpp"

#include <cmath>
#include <istream>
#include <json.hpp>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "hcperc/io.hpp"

namespace hcperc {

namespace {

void check_match(const PotentialField& u, const ConductivityGrid& grid) {
  if (!(u.dims == grid.dims) || u.values.size() != grid.gamma.size()) {
    throw std::invalid_argument("potential and conductivity grids differ in size");
  }
}

}  // namespace

double ConductanceMeasurement::conservation_gap() const {
  return gamma_total != 0.0 ? std::abs(gamma_in - gamma_out) / gamma_total : 0.0;
}

ConductanceMeasurement total_conductivity(const PotentialField& u, const ConductivityGrid& grid) {
  check_match(u, grid);
  if (!(u.bc.u0 > 0.0)) throw std::domain_error("total conductivity needs u0 > 0");
  const std::size_t nx = grid.dims.nx, ny = grid.dims.ny;
  const double u0 = u.bc.u0;
  double in = 0.0, out = 0.0;
  if (u.bc.type == ProblemType::OS) {
    const double ey = grid.cell_width() / grid.cell_height();
    for (std::size_t i = 0; i < nx; ++i) {
      in += 2.0 * grid.at(i, ny - 1) * ey * (u0 - u.at(i, ny - 1));
      out += 2.0 * grid.at(i, 0) * ey * u.at(i, 0);
    }
  } else {
    const double ex = grid.cell_height() / grid.cell_width();
    for (std::size_t j = 0; j < ny; ++j) {
      in += 2.0 * grid.at(nx - 1, j) * ex * (u0 - u.at(nx - 1, j));
      out += 2.0 * grid.at(0, j) * ex * u.at(0, j);
    }
  }
  ConductanceMeasurement m;
  m.gamma_in = in / u0;
  m.gamma_out = out / u0;
  m.gamma_total = 0.5 * (m.gamma_in + m.gamma_out);
  return m;
}

double energy(const PotentialField& u, const ConductivityGrid& grid) {
  check_match(u, grid);
  const std::size_t nx = grid.dims.nx, ny = grid.dims.ny;
  const double ex = grid.cell_height() / grid.cell_width();
  const double ey = grid.cell_width() / grid.cell_height();
  const double u0 = u.bc.u0;
  const bool os = u.bc.type == ProblemType::OS;
  double e = 0.0;
  for (std::size_t j = 0; j < ny; ++j) {
    for (std::size_t i = 0; i < nx; ++i) {
      const double g = grid.at(i, j);
      const double v = u.at(i, j);
      if (i + 1 < nx) {
        const double d = u.at(i + 1, j) - v;
        e += ex * face_conductance(u.face_rule, u.bc.type, g, grid.at(i + 1, j)) * d * d;
      }
      if (j + 1 < ny) {
        const double d = u.at(i, j + 1) - v;
        e += ey * face_conductance(u.face_rule, u.bc.type, g, grid.at(i, j + 1)) * d * d;
      }
      if (os && j == ny - 1) e += 2.0 * g * ey * (u0 - v) * (u0 - v);
      if (os && j == 0) e += 2.0 * g * ey * v * v;
      if (!os && i == nx - 1) e += 2.0 * g * ex * (u0 - v) * (u0 - v);
      if (!os && i == 0) e += 2.0 * g * ex * v * v;
    }
  }
  return e;
}

double ConductivitySample::h() const { return gamma_total / std::sqrt(gamma0 * gamma1); }

ConductivitySample measure_sample(const OccupancyGrid& occ, ProblemType type, double gamma0,
                                  double gamma1, const SolverSettings& settings,
                                  std::uint64_t seed, double p_target, double u0) {
  const auto grid = conductivity_field(occ, type, gamma0, gamma1);
  const auto u = solve(grid, {type, u0}, settings);
  const auto m = total_conductivity(u, grid);
  ConductivitySample s;
  s.seed = seed;
  s.type = type;
  s.dims = occ.dims;
  s.r_cells = occ.box.disk_radius / occ.cell_width();
  s.p_target = p_target;
  s.p_achieved = occ.coverage();
  s.gamma0 = gamma0;
  s.gamma1 = gamma1;
  s.gamma_total = m.gamma_total;
  s.gamma_in = m.gamma_in;
  s.gamma_out = m.gamma_out;
  s.energy = energy(u, grid);
  s.iterations = u.stats.iterations;
  s.residual = u.stats.final_residual;
  return s;
}

void write_sample_csv_row(std::ostream& out, const ConductivitySample& s) {
  out << s.seed << ',' << to_string(s.type) << ',' << s.dims.nx << ',' << s.dims.ny << ','
      << format_double(s.r_cells) << ',' << format_double(s.p_target) << ','
      << format_double(s.p_achieved) << ',' << format_double(s.gamma0) << ','
      << format_double(s.gamma1) << ',' << format_double(s.gamma_total) << ','
      << format_double(s.gamma_in) << ',' << format_double(s.gamma_out) << ','
      << format_double(s.energy) << ',' << s.iterations << ',' << format_double(s.residual);
}

ConductivitySample parse_sample_csv_row(const std::string& line) {
  const auto f = split(trim(line), ',');
  if (f.size() < 15) throw std::runtime_error("sample row has too few columns: " + line);
  ConductivitySample s;
  s.seed = parse_u64(f[0]);
  s.type = parse_problem_type(std::string(trim(f[1])));
  s.dims = {parse_u64(f[2]), parse_u64(f[3])};
  s.r_cells = parse_double(f[4]);
  s.p_target = parse_double(f[5]);
  s.p_achieved = parse_double(f[6]);
  s.gamma0 = parse_double(f[7]);
  s.gamma1 = parse_double(f[8]);
  s.gamma_total = parse_double(f[9]);
  s.gamma_in = parse_double(f[10]);
  s.gamma_out = parse_double(f[11]);
  s.energy = parse_double(f[12]);
  s.iterations = parse_u64(f[13]);
  s.residual = parse_double(f[14]);
  return s;
}

std::vector<ConductivitySample> read_samples_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) return {};
  if (trim(line).substr(0, std::string_view(kSampleCsvHeader).size()) != kSampleCsvHeader) {
    throw std::runtime_error("unexpected sample CSV header: " + line);
  }
  std::vector<ConductivitySample> out;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    out.push_back(parse_sample_csv_row(line));
  }
  return out;
}

std::string sample_to_json(const ConductivitySample& s) {
  nlohmann::ordered_json j;
  j["seed"] = s.seed;
  j["type"] = to_string(s.type);
  j["dims_x"] = s.dims.nx;
  j["dims_y"] = s.dims.ny;
  j["r_cells"] = s.r_cells;
  j["p_target"] = s.p_target;
  j["p_achieved"] = s.p_achieved;
  j["gamma0"] = s.gamma0;
  j["gamma1"] = s.gamma1;
  j["gamma_total"] = s.gamma_total;
  j["gamma_in"] = s.gamma_in;
  j["gamma_out"] = s.gamma_out;
  j["energy"] = s.energy;
  j["iterations"] = s.iterations;
  j["residual"] = s.residual;
  return j.dump();
}

Reciprocity reciprocity(const OccupancyGrid& occ, double gamma0, double gamma1,
                        const SolverSettings& settings) {
  Reciprocity r;
  r.gamma_plus = measure_sample(occ, ProblemType::OS, gamma0, gamma1, settings).gamma_total;
  r.gamma_minus = measure_sample(occ, ProblemType::VS, gamma0, gamma1, settings).gamma_total;
  r.defect = r.gamma_plus * r.gamma_minus / (gamma0 * gamma1) - 1.0;
  return r;
}

double reciprocity_defect(const OccupancyGrid& occ, double gamma0, double gamma1,
                          const SolverSettings& settings) {
  return reciprocity(occ, gamma0, gamma1, settings).defect;
}

std::vector<Vec2> centered_gradient(const PotentialField& u) {
  const std::size_t nx = u.dims.nx, ny = u.dims.ny;
  const double hx = u.box.side() / static_cast<double>(nx);
  const double hy = u.box.side() / static_cast<double>(ny);
  std::vector<Vec2> g(u.values.size());
  for (std::size_t j = 0; j < ny; ++j) {
    const std::size_t jd = j > 0 ? j - 1 : 0, ju = j + 1 < ny ? j + 1 : j;
    for (std::size_t i = 0; i < nx; ++i) {
      const std::size_t il = i > 0 ? i - 1 : 0, ir = i + 1 < nx ? i + 1 : i;
      g[j * nx + i] = {(u.at(ir, j) - u.at(il, j)) / (static_cast<double>(ir - il) * hx),
                       (u.at(i, ju) - u.at(i, jd)) / (static_cast<double>(ju - jd) * hy)};
    }
  }
  return g;
}

double gradient_orthogonality(const PotentialField& u_os, const PotentialField& u_vs) {
  if (!(u_os.dims == u_vs.dims)) throw std::invalid_argument("potentials differ in size");
  const auto gp = centered_gradient(u_os);
  const auto gm = centered_gradient(u_vs);
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < gp.size(); ++k) {
    const double dot = gp[k].x * gm[k].x + gp[k].y * gm[k].y;
    num += dot * dot;
    den += (gp[k].x * gp[k].x + gp[k].y * gp[k].y) * (gm[k].x * gm[k].x + gm[k].y * gm[k].y);
  }
  return den > 0.0 ? std::sqrt(num / den) : 0.0;
}

BeltramiNormalization conjugate_normalization(double alpha, double gamma_plus, double u0_os,
                                              double u0_vs) {
  if (!(alpha > 0.0) || !(gamma_plus > 0.0) || !(u0_os > 0.0) || !(u0_vs > 0.0)) {
    throw std::domain_error("normalization constants must be positive");
  }
  return {alpha, alpha * gamma_plus * u0_os / u0_vs};
}

BeltramiNormalization plus_normalization(double gamma_plus, double gamma0, double u0_os,
                                         double u0_vs) {
  return conjugate_normalization(1.0 / gamma0, gamma_plus, u0_os, u0_vs);
}

BeltramiNormalization minus_normalization(double gamma_plus, double gamma1, double u0_os,
                                          double u0_vs) {
  return conjugate_normalization(1.0 / gamma1, gamma_plus, u0_os, u0_vs);
}

BeltramiField beltrami_field(const PotentialField& u_os, const PotentialField& u_vs,
                             BeltramiNormalization normalization) {
  if (!(u_os.dims == u_vs.dims)) throw std::invalid_argument("potentials differ in size");
  const auto gp = centered_gradient(u_os);
  const auto gm = centered_gradient(u_vs);
  const double h = std::min(u_os.box.side() / static_cast<double>(u_os.dims.nx),
                            u_os.box.side() / static_cast<double>(u_os.dims.ny));
  const double floor = 1e-12 * u_os.bc.u0 / h;
  BeltramiField f;
  f.dims = u_os.dims;
  f.normalization = normalization;
  f.mu.resize(gp.size());
  f.valid.resize(gp.size());
  const double s = normalization.vs_scale;
  for (std::size_t k = 0; k < gp.size(); ++k) {
    const std::complex<double> psi_x(s * gm[k].x, gp[k].x);
    const std::complex<double> psi_y(s * gm[k].y, gp[k].y);
    const std::complex<double> i(0.0, 1.0);
    const std::complex<double> d = 0.5 * (psi_x - i * psi_y);
    const std::complex<double> dbar = 0.5 * (psi_x + i * psi_y);
    if (std::abs(d) < floor) {
      f.valid[k] = 0;
      continue;
    }
    f.valid[k] = 1;
    f.mu[k] = dbar / std::conj(d);
  }
  return f;
}

PhaseStatistics beltrami_statistics(const BeltramiField& field, const OccupancyGrid& occ) {
  if (!(field.dims == occ.dims)) throw std::invalid_argument("field and occupancy differ in size");
  PhaseStatistics st;
  double sum_occ = 0.0, sum_vac = 0.0;
  for (std::size_t k = 0; k < field.mu.size(); ++k) {
    if (!field.valid[k]) {
      ++st.excluded_cells;
      continue;
    }
    const double a = std::abs(field.mu[k]);
    st.max_abs = std::max(st.max_abs, a);
    if (occ.cells[k]) {
      sum_occ += a;
      ++st.occupied_cells;
    } else {
      sum_vac += a;
      ++st.vacant_cells;
    }
  }
  if (st.occupied_cells) st.mean_abs_occupied = sum_occ / static_cast<double>(st.occupied_cells);
  if (st.vacant_cells) st.mean_abs_vacant = sum_vac / static_cast<double>(st.vacant_cells);
  return st;
}

ConjugateResidual conjugate_residual(const PotentialField& u_os, const PotentialField& u_vs,
                                     const ConductivityGrid& os_grid,
                                     BeltramiNormalization normalization) {
  check_match(u_os, os_grid);
  const auto gp = centered_gradient(u_os);
  const auto gm = centered_gradient(u_vs);
  double res[2] = {0.0, 0.0}, ref[2] = {0.0, 0.0};
  for (std::size_t k = 0; k < gp.size(); ++k) {
    const double g = normalization.alpha * os_grid.gamma[k];
    const double ax = normalization.vs_scale * gm[k].x, ay = normalization.vs_scale * gm[k].y;
    const double bx = g * gp[k].y, by = -g * gp[k].x;
    const int phase = os_grid.gamma[k] == os_grid.gamma1 ? 0 : 1;
    res[phase] += (ax - bx) * (ax - bx) + (ay - by) * (ay - by);
    ref[phase] += ax * ax + ay * ay + bx * bx + by * by;
  }
  return {ref[0] > 0.0 ? std::sqrt(2.0 * res[0] / ref[0]) : 0.0,
          ref[1] > 0.0 ? std::sqrt(2.0 * res[1] / ref[1]) : 0.0};
}

std::complex<double> cylinder_flow(std::complex<double> z,
                                   std::span<const std::complex<double>> centers, double rho,
                                   double u0, double half_width) {
  if (!(half_width > 0.0)) throw std::domain_error("half-width must be positive");
  std::complex<double> w = z;
  for (const auto& c : centers) {
    if (z == c) throw std::domain_error("cylinder flow evaluated at a cylinder center");
    w += rho * rho / (z - c);
  }
  return (u0 / half_width) * w;
}

}  // namespace hcperc
