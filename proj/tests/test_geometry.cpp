#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <queue>
#include <random>
#include <sstream>

#include "hcperc/field.hpp"
#include "hcperc/geometry.hpp"

using namespace hcperc;

namespace {

// Brute-force edge connectivity: BFS per component.
EdgeConnectivity bfs_connectivity(const std::vector<std::uint8_t>& cells, GridDims d, bool occupied) {
  const int nx = static_cast<int>(d.nx), ny = static_cast<int>(d.ny);
  std::vector<int> label(cells.size(), -1);
  EdgeConnectivity out{};
  auto phase = [&](int i, int j) { return (cells[j * nx + i] != 0) == occupied; };
  for (int j0 = 0; j0 < ny; ++j0) {
    for (int i0 = 0; i0 < nx; ++i0) {
      if (!phase(i0, j0) || label[j0 * nx + i0] >= 0) continue;
      std::array<bool, 4> touch{};
      std::queue<std::pair<int, int>> q;
      q.push({i0, j0});
      label[j0 * nx + i0] = 1;
      while (!q.empty()) {
        auto [i, j] = q.front();
        q.pop();
        if (j == ny - 1) touch[0] = true;
        if (j == 0) touch[1] = true;
        if (i == 0) touch[2] = true;
        if (i == nx - 1) touch[3] = true;
        for (int dj = -1; dj <= 1; ++dj) {
          for (int di = -1; di <= 1; ++di) {
            if (di == 0 && dj == 0) continue;
            if (!occupied && di != 0 && dj != 0) continue;
            const int a = i + di, b = j + dj;
            if (a < 0 || b < 0 || a >= nx || b >= ny) continue;
            if (!phase(a, b) || label[b * nx + a] >= 0) continue;
            label[b * nx + a] = 1;
            q.push({a, b});
          }
        }
      }
      for (int a = 0; a < 4; ++a) {
        for (int b = 0; b < 4; ++b) out[a][b] = out[a][b] || (touch[a] && touch[b]);
      }
    }
  }
  return out;
}

}  // namespace

TEST_CASE("expected coverage and its inverse") {
  CHECK(expected_coverage(0.0, 1.0) == 0.0);
  const double lambda = std::log(2.0) / std::numbers::pi;
  CHECK(expected_coverage(lambda, 1.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(intensity_for_fraction(0.0, 2.0) == 0.0);
  CHECK(intensity_for_fraction(0.5, 1.0) == doctest::Approx(lambda).epsilon(1e-15));
  for (int k = 1; k <= 9; ++k) {
    const double p = 0.1 * k;
    CHECK(std::abs(expected_coverage(intensity_for_fraction(p, 0.7), 0.7) - p) < 1e-12);
  }
  CHECK_THROWS_AS(expected_coverage(-1.0, 1.0), std::domain_error);
  CHECK_THROWS_AS(expected_coverage(1.0, 0.0), std::domain_error);
  CHECK_THROWS_AS(intensity_for_fraction(1.0, 1.0), std::domain_error);
}

TEST_CASE("box validation") {
  CHECK_NOTHROW((Box{4.0, 1.0}).check_simulation_box());
  CHECK_THROWS_AS((Box{3.9, 1.0}).check_simulation_box(), std::domain_error);
  CHECK_THROWS_AS((Box{0.0, 1.0}).check_positive(), std::domain_error);
  CHECK_THROWS_AS((Box{1.0, -1.0}).check_positive(), std::domain_error);
}

TEST_CASE("empty target gives the empty prefix") {
  const auto gp = generate_path(3, Box{8.0, 1.0}, {0.0}, {64, 64});
  REQUIRE(gp.path.checkpoints.size() == 1);
  CHECK(gp.path.checkpoints[0].prefix_length == 0);
  CHECK(gp.path.checkpoints[0].p_achieved == 0.0);
}

TEST_CASE("generation is deterministic and nested") {
  const Box box{8.0, 1.0};
  const GridDims dims{128, 128};
  const std::vector<double> targets{0.1, 0.3, 0.5, 0.7, 0.9};
  const auto a = generate_path(42, box, targets, dims);
  const auto b = generate_path(42, box, targets, dims);
  CHECK(a.config.centers == b.config.centers);
  CHECK(a.path.checkpoints == b.path.checkpoints);
  std::ostringstream sa, sb;
  write_snapshot(sa, a.config);
  write_snapshot(sb, b.config);
  CHECK(sa.str() == sb.str());

  const auto c = generate_path(43, box, targets, dims);
  CHECK(!(c.config.centers == a.config.centers));

  for (std::size_t k = 0; k < targets.size(); ++k) {
    const auto& cp = a.path.checkpoints[k];
    if (k > 0) {
      CHECK(cp.prefix_length >= a.path.checkpoints[k - 1].prefix_length);
      CHECK(cp.p_achieved >= a.path.checkpoints[k - 1].p_achieved);
    }
    // First prefix whose coverage exceeds the target.
    const double with = rasterize(a.config.prefix(cp.prefix_length), dims).coverage();
    const double without = rasterize(a.config.prefix(cp.prefix_length - 1), dims).coverage();
    CHECK(with == cp.p_achieved);
    CHECK(with > cp.p_target);
    CHECK(without <= cp.p_target);
  }
  for (const auto& p : a.config.centers) CHECK(box.contains(p));
}

TEST_CASE("per-disk coverage increment at the large lattice") {
  // Side 40.96 r with r = 25 cells on 1024^2.
  const Box box{20.48, 1.0};
  const GridDims dims{1024, 1024};
  const double h = box.side() / 1024.0;
  CHECK(box.disk_radius / h == doctest::Approx(25.0).epsilon(1e-12));
  const double analytic = std::numbers::pi * 625.0 / (1024.0 * 1024.0);
  CHECK(analytic == doctest::Approx(1.87e-3).epsilon(2e-3));
  std::mt19937_64 rng(5);
  std::size_t worst = 0;
  for (int k = 0; k < 50; ++k) {
    std::vector<std::uint8_t> cells(dims.cells(), 0);
    const Point c{-10.0 + 20.0 * unit_uniform(rng()), -10.0 + 20.0 * unit_uniform(rng())};
    worst = std::max(worst, stamp_disk(cells, dims, box, c));
  }
  const double inc = static_cast<double>(worst) / static_cast<double>(dims.cells());
  CHECK(inc <= 1.9e-3);
  CHECK(inc == doctest::Approx(analytic).epsilon(0.02));
}

TEST_CASE("coverage statistics match the Boolean model away from the edges") {
  // Fixed intensity: the first N disks of each path. Cells farther than r
  // from the boundary see the full disk area, so their covered fraction has
  // mean 1 - (1 - pi r^2 / A)^N ~ expected_coverage(N / A, r).
  const Box box{16.0, 1.0};
  const GridDims dims{128, 128};
  const std::size_t n = 226;
  const double lambda = static_cast<double>(n) / box.area();
  std::vector<double> fractions;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const auto gp = generate_path(seed, box, {0.9}, dims);
    REQUIRE(gp.config.size() >= n);
    const auto occ = rasterize(gp.config.prefix(n), dims);
    std::size_t covered = 0, total = 0;
    for (std::size_t j = 0; j < dims.ny; ++j) {
      for (std::size_t i = 0; i < dims.nx; ++i) {
        const Point c = occ.cell_center(i, j);
        if (std::abs(c.x) > box.half_width - box.disk_radius ||
            std::abs(c.y) > box.half_width - box.disk_radius) {
          continue;
        }
        ++total;
        covered += occ.occupied(i, j) ? 1 : 0;
      }
    }
    fractions.push_back(static_cast<double>(covered) / static_cast<double>(total));
  }
  double mean = 0.0;
  for (double f : fractions) mean += f;
  mean /= static_cast<double>(fractions.size());
  double var = 0.0;
  for (double f : fractions) var += (f - mean) * (f - mean);
  var /= static_cast<double>(fractions.size() - 1);
  const double se = std::sqrt(var / static_cast<double>(fractions.size()));
  CHECK(std::abs(mean - expected_coverage(lambda, box.disk_radius)) <= 3.0 * se);
}

TEST_CASE("domination verdicts on simple grids") {
  const GridDims d{10, 10};
  std::vector<std::uint8_t> full(d.cells(), 1), empty(d.cells(), 0);
  CHECK(classify_domination(full, d).verdict == Verdict::OccupiedDominates);
  CHECK(classify_domination(empty, d).verdict == Verdict::VacantDominates);

  std::vector<std::uint8_t> column(d.cells(), 0);
  for (std::size_t j = 0; j < d.ny; ++j) column[j * d.nx + 4] = 1;
  const auto rep = classify_domination(column, d);
  CHECK(rep.verdict == Verdict::Neither);
  CHECK_FALSE(rep.occupied_totally_connected);
  CHECK_FALSE(rep.vacant_totally_connected);
  const auto occ = occupied_edge_connectivity(column, d);
  CHECK(occ[0][1]);
  CHECK_FALSE(occ[2][3]);
  CHECK_FALSE(vacant_edge_connectivity(column, d)[2][3]);
  CHECK(occupied_crosses_vertically(column, d));
  CHECK(occ == bfs_connectivity(column, d, true));
}

TEST_CASE("union-find connectivity agrees with breadth-first search") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    const GridDims d{static_cast<std::size_t>(2 + trial % 9), static_cast<std::size_t>(2 + (trial / 9) % 9)};
    const double density = 0.2 + 0.6 * unit_uniform(rng());
    std::vector<std::uint8_t> cells(d.cells());
    for (auto& c : cells) c = unit_uniform(rng()) < density ? 1 : 0;
    const auto occ = bfs_connectivity(cells, d, true);
    const auto vac = bfs_connectivity(cells, d, false);
    CHECK(occupied_edge_connectivity(cells, d) == occ);
    CHECK(vacant_edge_connectivity(cells, d) == vac);
    CHECK(occupied_crosses_vertically(cells, d) == occ[0][1]);

    const auto rep = classify_domination(cells, d);
    bool all_occ = true, any_vac = false;
    for (int a = 0; a < 4; ++a) {
      for (int b = 0; b < 4; ++b) {
        all_occ = all_occ && occ[a][b];
        if (a != b) any_vac = any_vac || vac[a][b];
      }
    }
    CHECK((rep.verdict == Verdict::OccupiedDominates) == (all_occ && !any_vac));
    CHECK(rep.occupied_totally_connected == all_occ);
  }
}

TEST_CASE("occupied domination persists along a nested path") {
  // Small vacant pockets in a corner touch two edges, so strict domination
  // only appears close to full coverage on small grids.
  const Box box{8.0, 1.0};
  const GridDims dims{128, 128};
  std::vector<double> targets;
  for (int k = 1; k <= 19; ++k) targets.push_back(0.05 * k);
  targets.push_back(0.98);
  targets.push_back(0.99);
  int reached = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto gp = generate_path(seed, box, targets, dims);
    bool dominated = false;
    for (std::size_t k = 0; k < targets.size(); ++k) {
      const auto v = classify_domination(rasterize(gp.at(k), dims).cells, dims).verdict;
      if (dominated) CHECK(v == Verdict::OccupiedDominates);
      dominated = dominated || v == Verdict::OccupiedDominates;
    }
    reached += dominated ? 1 : 0;
  }
  CHECK(reached >= 3);
}

TEST_CASE("snapshot and CSV round trips") {
  const auto gp = generate_path(9, Box{6.0, 1.0}, {0.2, 0.4}, {64, 64});
  std::stringstream ss;
  write_snapshot(ss, gp.config);
  const auto back = read_snapshot(ss);
  CHECK(back.centers == gp.config.centers);
  CHECK(back.seed == 9);
  CHECK(back.box == gp.config.box);

  std::ostringstream csv;
  write_centers_csv(csv, gp.config);
  CHECK(csv.str().rfind("index,x,y\n", 0) == 0);
  std::ostringstream cps;
  write_checkpoints_csv(cps, gp.path);
  CHECK(cps.str().rfind("p_target,prefix_length,p_achieved\n", 0) == 0);

  std::istringstream bad("hcperc-config 1\nrng minstd\n");
  CHECK_THROWS(read_snapshot(bad));
}
