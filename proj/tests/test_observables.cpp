#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "hcperc/observables.hpp"

using namespace hcperc;

namespace {

SolverSettings tight(double tol = 1e-10) {
  SolverSettings s;
  s.rel_tolerance = tol;
  return s;
}

OccupancyGrid random_occupancy(std::uint64_t seed, GridDims d, double p, double half_width) {
  const auto gp = generate_path(seed, Box{half_width, 1.0}, {p}, d);
  return rasterize(gp.at(0), d);
}

OccupancyGrid filled(GridDims d, std::uint8_t v) {
  OccupancyGrid occ;
  occ.dims = d;
  occ.box = {8.0, 1.0};
  occ.cells.assign(d.cells(), v);
  return occ;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

TEST_CASE("homogeneous medium") {
  for (auto type : {ProblemType::OS, ProblemType::VS}) {
    const auto occ = filled({64, 64}, 1);
    const auto g = conductivity_field(occ, type, 0.25, 0.25);
    const auto u = solve(g, {type, 1.0}, tight(1e-12));
    const auto m = total_conductivity(u, g);
    CHECK(m.gamma_total == doctest::Approx(0.25).epsilon(1e-10));
    CHECK(m.conservation_gap() < 1e-10);
    CHECK(energy(u, g) == doctest::Approx(0.25).epsilon(1e-10));

    const auto one = conductivity_field(occ, type, 1.0, 1.0);
    const auto u1 = solve(one, {type, 1.0}, tight(1e-12));
    CHECK(energy(u1, one) == doctest::Approx(1.0).epsilon(1e-10));

    const auto zero = solve(one, {type, 0.0}, tight());
    CHECK(energy(zero, one) == 0.0);
    CHECK_THROWS_AS(total_conductivity(zero, one), std::domain_error);
  }
}

TEST_CASE("mismatched grids are rejected") {
  const auto g = conductivity_field(filled({16, 16}, 0), ProblemType::OS, 1e-4, 1.0);
  const auto h = conductivity_field(filled({8, 16}, 0), ProblemType::OS, 1e-4, 1.0);
  const auto u = solve(g, {ProblemType::OS, 1.0});
  CHECK_THROWS_AS(total_conductivity(u, h), std::invalid_argument);
}

TEST_CASE("energy equals u0^2 Gamma and Gamma stays within the phase bounds") {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    const auto occ = random_occupancy(seed, {96, 96}, 0.15 * static_cast<double>(seed), 6.0);
    for (auto type : {ProblemType::OS, ProblemType::VS}) {
      const double tol = 1e-9;
      const auto s = measure_sample(occ, type, 1e-4, 1.0, tight(tol), seed, 0.0, 2.0);
      CHECK(std::abs(s.energy / (4.0 * s.gamma_total) - 1.0) < 1e-6);
      CHECK(s.gamma_total >= 1e-4);
      CHECK(s.gamma_total <= 1.0);
      CHECK(std::abs(s.gamma_in - s.gamma_out) <= 10.0 * tol * s.gamma_total);
      CHECK(s.h() == doctest::Approx(s.gamma_total / 1e-2));
    }
  }
}

TEST_CASE("reciprocity") {
  SUBCASE("homogeneous grids") {
    for (std::uint8_t v : {0, 1}) {
      const auto r = reciprocity(filled({32, 32}, v), 1e-4, 1.0, tight(1e-12));
      CHECK(std::abs(r.defect) < 1e-6);
    }
  }
  SUBCASE("random configuration at p = 0.5, r = 8 cells") {
    const auto occ = random_occupancy(1, {256, 256}, 0.5, 16.0);
    const auto r = reciprocity(occ, 1e-4, 1.0, tight(1e-9));
    CHECK(std::abs(r.defect) <= 0.15);
    CHECK(r.defect == doctest::Approx(reciprocity_defect(occ, 1e-4, 1.0, tight(1e-9))));
  }
  SUBCASE("the median defect shrinks under refinement") {
    // Same configurations rasterized at r = 4, 8 and 16 cells.
    std::vector<double> med;
    for (std::size_t n : {64u, 128u, 256u}) {
      std::vector<double> defects;
      for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto gp = generate_path(seed, Box{8.0, 1.0}, {0.55}, {64, 64});
        const auto occ = rasterize(gp.at(0), {n, n});
        defects.push_back(std::abs(reciprocity_defect(occ, 1e-4, 1.0, tight(1e-9))));
      }
      med.push_back(median(defects));
    }
    MESSAGE("median |defect| at r = 4, 8, 16 cells: " << med[0] << " " << med[1] << " " << med[2]);
    CHECK(med[1] < med[0]);
    CHECK(med[2] < med[1]);
  }
}

TEST_CASE("gradient orthogonality") {
  const auto occ = filled({48, 48}, 1);
  const auto os = conductivity_field(occ, ProblemType::OS, 1.0, 1.0);
  const auto vs = conductivity_field(occ, ProblemType::VS, 1.0, 1.0);
  const auto a = solve(os, {ProblemType::OS, 1.0}, tight(1e-12));
  const auto b = solve(vs, {ProblemType::VS, 1.0}, tight(1e-12));
  CHECK(gradient_orthogonality(a, b) < 1e-12);

  // Random media: the cellwise defect concentrates on the phase interfaces
  // and decreases with resolution.
  std::vector<double> measure;
  for (std::size_t n : {64u, 128u, 256u}) {
    const auto gp = generate_path(2, Box{16.0, 1.0}, {0.5}, {64, 64});
    const auto o = rasterize(gp.at(0), {n, n});
    const auto gos = conductivity_field(o, ProblemType::OS, 1e-4, 1.0);
    const auto gvs = conductivity_field(o, ProblemType::VS, 1e-4, 1.0);
    measure.push_back(gradient_orthogonality(solve(gos, {ProblemType::OS, 1.0}, tight(1e-9)),
                                             solve(gvs, {ProblemType::VS, 1.0}, tight(1e-9))));
  }
  MESSAGE("orthogonality at 64, 128, 256: " << measure[0] << " " << measure[1] << " " << measure[2]);
  CHECK(measure[2] < measure[0]);
  CHECK(measure[2] < 0.2);
}

TEST_CASE("Beltrami coefficient") {
  SUBCASE("uniform medium is conformal") {
    const auto occ = filled({32, 32}, 0);
    const auto os = conductivity_field(occ, ProblemType::OS, 0.5, 2.0);
    const auto vs = conductivity_field(occ, ProblemType::VS, 0.5, 2.0);
    const auto a = solve(os, {ProblemType::OS, 1.0}, tight(1e-12));
    const auto b = solve(vs, {ProblemType::VS, 1.0}, tight(1e-12));
    const double gp = total_conductivity(a, os).gamma_total;
    const auto norm = plus_normalization(gp, 0.5);
    CHECK(norm.vs_scale == doctest::Approx(1.0).epsilon(1e-9));
    const auto f = beltrami_field(a, b, norm);
    const auto st = beltrami_statistics(f, occ);
    CHECK(st.max_abs < 1e-8);
    CHECK(st.excluded_cells == 0);
    const auto res = conjugate_residual(a, b, os, norm);
    CHECK(res.vacant < 1e-8);
  }
  SUBCASE("plus normalization on a non-percolating configuration") {
    const GridDims d{128, 128};
    const auto occ = random_occupancy(3, d, 0.3, 8.0);
    REQUIRE_FALSE(occupied_crosses_vertically(occ.cells, d));
    const auto os = conductivity_field(occ, ProblemType::OS, 1e-4, 1.0);
    const auto vs = conductivity_field(occ, ProblemType::VS, 1e-4, 1.0);
    const auto a = solve(os, {ProblemType::OS, 1.0}, tight(1e-10));
    const auto b = solve(vs, {ProblemType::VS, 1.0}, tight(1e-10));
    const double gp = total_conductivity(a, os).gamma_total;
    const auto f = beltrami_field(a, b, plus_normalization(gp, 1e-4));
    const auto st = beltrami_statistics(f, occ);
    MESSAGE("mean |mu| vacant " << st.mean_abs_vacant << " occupied " << st.mean_abs_occupied);
    CHECK(st.mean_abs_vacant <= 0.1);
    CHECK(5.0 * st.mean_abs_vacant <= st.mean_abs_occupied);
    // Centered differences straddling an interface can flip orientation in
    // isolated cells; elsewhere |mu| < 1.
    std::size_t above = 0;
    for (std::size_t k = 0; k < f.mu.size(); ++k) above += f.valid[k] && std::abs(f.mu[k]) > 1.0 + 1e-6;
    CHECK(static_cast<double>(above) < 0.01 * static_cast<double>(d.cells()));

    const auto res = conjugate_residual(a, b, os, plus_normalization(gp, 1e-4));
    MESSAGE("conjugate residual vacant " << res.vacant << " occupied " << res.occupied);
    CHECK(res.vacant < 0.5);
  }
  CHECK_THROWS_AS(conjugate_normalization(0.0, 1.0, 1.0, 1.0), std::domain_error);
  CHECK(minus_normalization(0.02, 1.0).alpha == 1.0);
  CHECK(minus_normalization(0.02, 1.0).vs_scale == doctest::Approx(0.02));
}

TEST_CASE("dilute cylinder flow") {
  using C = std::complex<double>;
  const double u0 = 2.0, L = 5.0, rho = 0.3;
  const C z(1.1, -0.4);
  CHECK(std::abs(cylinder_flow(z, {}, rho, u0, L) - (u0 / L) * z) < 1e-15);

  const std::vector<C> one{C(0.0, 0.0)};
  for (int k = 0; k < 16; ++k) {
    const C w = std::polar(rho, 0.39 * k + 0.1);
    CHECK(std::abs(cylinder_flow(w, one, rho, u0, L).imag()) < 1e-14);
  }

  const std::vector<C> a{C(1.0, 1.0)}, b{C(-2.0, 0.5)}, ab{C(1.0, 1.0), C(-2.0, 0.5)};
  const C uniform = (u0 / L) * z;
  const C sum = cylinder_flow(z, a, rho, u0, L) + cylinder_flow(z, b, rho, u0, L) - uniform;
  CHECK(std::abs(cylinder_flow(z, ab, rho, u0, L) - sum) < 1e-14);
  CHECK_THROWS_AS(cylinder_flow(C(1.0, 1.0), a, rho, u0, L), std::domain_error);
}

TEST_CASE("sample CSV and JSON") {
  const auto occ = random_occupancy(4, {32, 32}, 0.5, 4.0);
  const auto s = measure_sample(occ, ProblemType::VS, 1e-4, 1.0, tight(), 4, 0.5);
  CHECK(s.r_cells == doctest::Approx(4.0));
  std::ostringstream row;
  write_sample_csv_row(row, s);
  CHECK(row.str().find('\n') == std::string::npos);
  const auto back = parse_sample_csv_row(row.str());
  CHECK(back.gamma_total == s.gamma_total);
  CHECK(back.type == ProblemType::VS);
  CHECK(back.dims == s.dims);
  CHECK(back.iterations == s.iterations);

  std::istringstream csv(std::string(kSampleCsvHeader) + "\n" + row.str() + "\n");
  const auto rows = read_samples_csv(csv);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].energy == s.energy);

  const auto j = nlohmann::json::parse(sample_to_json(s));
  std::vector<std::string> keys;
  for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
  std::vector<std::string> cols;
  std::istringstream hs(kSampleCsvHeader);
  for (std::string c; std::getline(hs, c, ',');) cols.push_back(c);
  std::sort(keys.begin(), keys.end());
  std::sort(cols.begin(), cols.end());
  CHECK(keys == cols);
  CHECK(j["type"] == "VS");
}

TEST_CASE("monotone along a nested path") {
  const GridDims d{128, 128};
  std::vector<double> targets;
  for (int k = 0; k <= 12; ++k) targets.push_back(0.3 + 0.05 * k);
  for (std::uint64_t seed = 1; seed <= 2; ++seed) {
    const auto gp = generate_path(seed, Box{8.0, 1.0}, targets, d);
    double prev_plus = 0.0, prev_minus = 2.0;
    for (std::size_t k = 0; k < targets.size(); ++k) {
      const auto occ = rasterize(gp.at(k), d);
      const auto r = reciprocity(occ, 1e-4, 1.0, tight(1e-10));
      CHECK(r.gamma_plus >= prev_plus * (1.0 - 1e-6));
      CHECK(r.gamma_minus <= prev_minus * (1.0 + 1e-6));
      prev_plus = r.gamma_plus;
      prev_minus = r.gamma_minus;
    }
  }
}

TEST_CASE("threshold dichotomy") {
  const GridDims d{128, 128};
  const auto gp = generate_path(5, Box{8.0, 1.0}, {0.4, 0.85}, d);
  const auto low = rasterize(gp.at(0), d);
  const auto high = rasterize(gp.at(1), d);
  // Below threshold: log-log slope of Gamma+ against gamma0.
  std::vector<double> x, y;
  for (double g0 : {1e-3, 1e-4, 1e-5}) {
    const auto s = measure_sample(low, ProblemType::OS, g0, 1.0, tight(1e-10));
    x.push_back(std::log(g0));
    y.push_back(std::log(s.gamma_total));
  }
  const double mx = (x[0] + x[1] + x[2]) / 3.0, my = (y[0] + y[1] + y[2]) / 3.0;
  double sxy = 0.0, sxx = 0.0;
  for (int k = 0; k < 3; ++k) {
    sxy += (x[k] - mx) * (y[k] - my);
    sxx += (x[k] - mx) * (x[k] - mx);
  }
  const double slope = sxy / sxx;
  MESSAGE("log-log slope below threshold: " << slope);
  CHECK(slope == doctest::Approx(1.0).epsilon(0.2));

  const double a = measure_sample(high, ProblemType::OS, 1e-3, 1.0, tight(1e-10)).gamma_total;
  const double b = measure_sample(high, ProblemType::OS, 1e-5, 1.0, tight(1e-10)).gamma_total;
  CHECK(std::abs(a - b) / a < 0.1);
}
