// hcperc: command-line front end.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hcperc/analysis.hpp"
#include "hcperc/contours.hpp"
#include "hcperc/field.hpp"
#include "hcperc/geometry.hpp"
#include "hcperc/io.hpp"
#include "hcperc/observables.hpp"
#include "hcperc/solver.hpp"
#include "hcperc/sweep.hpp"

namespace fs = std::filesystem;
using namespace hcperc;

namespace {

// Failures that map to exit code 2.
bool is_numeric_failure(const std::exception& e) {
  return dynamic_cast<const SolveError*>(&e) || dynamic_cast<const FitError*>(&e) ||
         dynamic_cast<const CrossingRangeError*>(&e);
}

fs::path default_output_dir() {
  if (const char* env = std::getenv("HCPERC_OUTPUT_DIR"); env && *env) return env;
  return ".";
}

struct Physics {
  double gamma0 = 1e-4;
  double gamma1 = 1.0;
  double u0 = 1.0;
  double tol = 1e-8;
  std::size_t max_iter = 0;
  std::string face_rule = "dual-consistent";
  std::string preconditioner = "multigrid";

  void add(CLI::App* app) {
    app->add_option("--gamma0", gamma0, "conductivity of the insulating phase (dimensionless)")
        ->capture_default_str();
    app->add_option("--gamma1", gamma1, "conductivity of the conducting phase (dimensionless)")
        ->capture_default_str();
    app->add_option("--u0", u0, "applied boundary potential (potential units)")->capture_default_str();
    app->add_option("--tol", tol, "relative residual tolerance of the solver")->capture_default_str();
    app->add_option("--max-iter", max_iter, "solver iteration cap; 0 = 50*max(nx,ny)")
        ->capture_default_str();
    app->add_option("--face-rule", face_rule, "face conductance rule")
        ->check(CLI::IsMember({"dual-consistent", "harmonic"}))
        ->capture_default_str();
    app->add_option("--preconditioner", preconditioner, "CG preconditioner")
        ->check(CLI::IsMember({"multigrid", "jacobi"}))
        ->capture_default_str();
  }

  SolverSettings settings() const {
    SolverSettings s;
    s.rel_tolerance = tol;
    s.max_iterations = max_iter;
    s.face_rule = parse_face_rule(face_rule);
    s.preconditioner = parse_preconditioner(preconditioner);
    s.validate();
    return s;
  }

  void validate() const {
    if (!(gamma0 > 0.0 && gamma0 <= gamma1)) {
      throw std::invalid_argument("conductivities must satisfy 0 < gamma0 <= gamma1");
    }
    if (!(u0 > 0.0)) throw std::invalid_argument("u0 must be positive");
    settings();
  }
};

// Grid and box shared by the single-configuration subcommands.
struct Scene {
  std::string dims_text = "256";
  double r_cells = 8.0;
  bool paper_scale = false;
  std::uint64_t seed = 1;
  double p = 0.5;
  std::string config_path;

  void add(CLI::App* app, bool with_p) {
    app->add_option("--dims", dims_text, "raster size N or NxM (cells)")->capture_default_str();
    app->add_option("--r-cells", r_cells, "disk radius in cells; sets the box half-width to nx/(2 r)")
        ->capture_default_str();
    app->add_flag("--paper-scale", paper_scale, "1024x1024 raster with r = 25 cells");
    app->add_option("--seed", seed, "random seed of the disk configuration")->capture_default_str();
    if (with_p) {
      app->add_option("--p", p, "target volume fraction in [0, 1)")->capture_default_str();
    }
    app->add_option("--config", config_path,
                    "snapshot file from `generate`; all of its disks are used instead of --seed/--p");
  }

  GridDims dims() const {
    if (paper_scale) return {1024, 1024};
    return parse_dims(dims_text);
  }
  double radius_cells() const { return paper_scale ? 25.0 : r_cells; }

  Box box() const {
    const GridDims d = dims();
    if (!(radius_cells() > 0.0)) throw std::invalid_argument("--r-cells must be positive");
    Box b{static_cast<double>(d.nx) / (2.0 * radius_cells()), 1.0};
    b.check_simulation_box();
    return b;
  }

  DiskConfiguration configuration() const {
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw std::invalid_argument("cannot open snapshot " + config_path);
      return read_snapshot(in);
    }
    const GeneratedPath gp = generate_path(seed, box(), {p}, dims());
    return gp.at(0);
  }

  OccupancyGrid occupancy() const { return rasterize(configuration(), dims()); }

  void validate() const {
    const GridDims d = dims();
    if (d.nx < 2 || d.ny < 2) throw std::invalid_argument("--dims must be at least 2");
    if (config_path.empty()) {
      box();
      if (!(p >= 0.0 && p < 1.0)) throw std::invalid_argument("--p must lie in [0, 1)");
    }
  }
};

std::vector<ProblemType> parse_types(const std::string& text) {
  if (text == "both") return {ProblemType::OS, ProblemType::VS};
  std::vector<ProblemType> out;
  for (const auto& s : split(text, ',')) out.push_back(parse_problem_type(std::string(trim(s))));
  return out;
}

PotentialField solve_scene(const OccupancyGrid& occ, ProblemType type, const Physics& ph) {
  const auto grid = conductivity_field(occ, type, ph.gamma0, ph.gamma1);
  return solve(grid, {type, ph.u0}, ph.settings());
}

void write_text(const fs::path& path, const std::string& text) {
  write_file_atomic(path, [&](std::ostream& out) { out << text; });
}

// Occupancy in gray, contours in red, top row first.
void write_overlay_ppm(std::ostream& out, const OccupancyGrid& occ, const ContourSet& contours) {
  const std::size_t nx = occ.dims.nx, ny = occ.dims.ny;
  std::vector<unsigned char> rgb(3 * nx * ny);
  for (std::size_t j = 0; j < ny; ++j) {
    for (std::size_t i = 0; i < nx; ++i) {
      const unsigned char v = occ.occupied(i, j) ? 150 : 255;
      const std::size_t k = 3 * ((ny - 1 - j) * nx + i);
      rgb[k] = rgb[k + 1] = rgb[k + 2] = v;
    }
  }
  const double L = occ.box.half_width, hx = occ.cell_width(), hy = occ.cell_height();
  auto plot = [&](Point p) {
    const auto i = static_cast<long>(std::floor((p.x + L) / hx));
    const auto j = static_cast<long>(std::floor((p.y + L) / hy));
    if (i < 0 || j < 0 || i >= static_cast<long>(nx) || j >= static_cast<long>(ny)) return;
    const std::size_t k = 3 * ((ny - 1 - static_cast<std::size_t>(j)) * nx + static_cast<std::size_t>(i));
    rgb[k] = 220;
    rgb[k + 1] = 20;
    rgb[k + 2] = 20;
  };
  for (const auto& level : contours.levels) {
    for (const auto& line : level.polylines) {
      for (std::size_t k = 1; k < line.points.size(); ++k) {
        const Point a = line.points[k - 1], b = line.points[k];
        const double len = std::hypot(b.x - a.x, b.y - a.y);
        const int steps = std::max(1, static_cast<int>(std::ceil(2.0 * len / std::min(hx, hy))));
        for (int s = 0; s <= steps; ++s) {
          const double t = static_cast<double>(s) / steps;
          plot({a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)});
        }
      }
    }
  }
  out << "P6\n" << nx << ' ' << ny << "\n255\n";
  out.write(reinterpret_cast<const char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
}

std::vector<double> contour_levels(const std::string& list, double step, double u0) {
  if (!list.empty()) {
    std::vector<double> out;
    for (const auto& s : split(list, ',')) out.push_back(parse_double(s) * u0);
    return out;
  }
  return uniform_levels(u0, step);
}

CurveSamples read_curve(const std::string& path, ProblemType type, const std::string& dims_filter) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open " + path);
  std::string header;
  std::getline(in, header);
  CurveSamples cs;
  cs.type = type;
  if (trim(header) == "p,gamma") {
    std::string line;
    while (std::getline(in, line)) {
      if (trim(line).empty()) continue;
      const auto f = split(line, ',');
      if (f.size() != 2) throw std::invalid_argument("malformed curve row: " + line);
      cs.points.push_back({parse_double(f[0]), parse_double(f[1])});
    }
    return cs;
  }
  std::stringstream rest;
  rest << header << '\n' << in.rdbuf();
  const auto samples = read_samples_csv(rest);
  std::optional<GridDims> want;
  if (!dims_filter.empty()) want = parse_dims(dims_filter);
  const AggregatedCurve* chosen = nullptr;
  const auto curves = aggregate(samples);
  for (const auto& c : curves) {
    if (c.type != type || (want && !(c.dims == *want))) continue;
    if (chosen) throw std::invalid_argument("input holds several grid sizes; select one with --dims");
    chosen = &c;
  }
  if (!chosen) throw std::invalid_argument("no samples of the requested type in " + path);
  double g0 = 1e-4, g1 = 1.0;
  for (const auto& s : samples) {
    if (s.type == type) {
      g0 = s.gamma0;
      g1 = s.gamma1;
      break;
    }
  }
  return chosen->mean_curve(g0, g1);
}

}  // namespace

int run(int argc, char** argv, bool& error_json) {
  CLI::App app{"Conductivity of random two-phase disk media: generation, solving, sweeps, "
               "fits, equipotentials and closed-form approximations."};
  app.require_subcommand(1);
  app.add_flag("--error-json", error_json, "print failures as a JSON object on stderr");

  // generate
  auto* gen = app.add_subcommand("generate", "nested disk path with volume-fraction checkpoints");
  Scene gen_scene;
  std::string gen_p = "0.3:0.9:0.05";
  fs::path gen_out = default_output_dir();
  bool gen_pgm = false;
  gen_scene.add(gen, false);
  gen->add_option("--p", gen_p, "target fractions: list a,b,c or range start:stop:step")
      ->capture_default_str();
  gen->add_option("--out", gen_out, "output directory (default $HCPERC_OUTPUT_DIR or .)");
  gen->add_flag("--pgm", gen_pgm, "also write an occupancy PGM per checkpoint");

  // solve
  auto* sol = app.add_subcommand("solve", "solve one configuration and print sample CSV rows");
  Scene sol_scene;
  Physics sol_phys;
  std::string sol_types = "both";
  bool sol_json = false;
  std::string sol_save;
  sol_scene.add(sol, true);
  sol_phys.add(sol);
  sol->add_option("--type", sol_types, "OS, VS or both")->capture_default_str();
  sol->add_flag("--json", sol_json, "print JSON objects instead of CSV");
  sol->add_option("--save-potential", sol_save, "directory for raw and PGM potential dumps");

  // sweep
  auto* swp = app.add_subcommand("sweep", "run a seed x p x type x dims matrix");
  std::string swp_plan;
  std::size_t swp_seeds = 3;
  std::string swp_seed_list;
  std::string swp_dims = "256";
  std::string swp_p = "0.3:0.9:0.05";
  std::string swp_types = "both";
  double swp_r = 8.0;
  bool swp_paper = false;
  unsigned swp_jobs = 0;
  fs::path swp_out = default_output_dir();
  std::string swp_write_plan;
  Physics swp_phys;
  swp->add_option("--plan", swp_plan, "plan file; replaces the matrix flags");
  swp->add_option("--seeds", swp_seeds, "number of seeds, numbered 1..N")->capture_default_str();
  swp->add_option("--seed-list", swp_seed_list, "explicit comma-separated seeds");
  swp->add_option("--dims", swp_dims, "comma-separated raster sizes N or NxM (cells)")
      ->capture_default_str();
  swp->add_option("--p", swp_p, "target fractions: list or start:stop:step")->capture_default_str();
  swp->add_option("--type", swp_types, "OS, VS or both")->capture_default_str();
  swp->add_option("--r-cells", swp_r, "disk radius in cells of the first --dims entry")
      ->capture_default_str();
  swp->add_flag("--paper-scale", swp_paper, "1024^2, r = 25 cells, 6 seeds");
  swp->add_option("--jobs", swp_jobs, "worker threads; 0 = available cores")->capture_default_str();
  swp->add_option("--out", swp_out, "output directory (default $HCPERC_OUTPUT_DIR or .)");
  swp->add_option("--write-plan", swp_write_plan, "write the plan file and exit");
  swp_phys.add(swp);

  // fit
  auto* fit = app.add_subcommand("fit", "fit the critical power law to a conductivity curve");
  std::string fit_input, fit_type = "OS", fit_window, fit_dims;
  bool fit_log = false;
  double fit_step = 0.001;
  fit->add_option("--input", fit_input, "sample CSV or 'p,gamma' curve CSV")->required();
  fit->add_option("--type", fit_type, "OS or VS")->capture_default_str();
  fit->add_option("--window", fit_window, "p window min:max (default: the data range)");
  fit->add_option("--dims", fit_dims, "grid size to select from a multi-size sample CSV");
  fit->add_option("--pc-step", fit_step, "threshold grid step")->capture_default_str();
  fit->add_flag("--log-scale", fit_log, "fit log Gamma (diagnostics only)");

  // contour
  auto* con = app.add_subcommand("contour", "equipotential polylines as CSV");
  Scene con_scene;
  Physics con_phys;
  std::string con_type = "OS", con_levels, con_output;
  double con_step = 0.1;
  bool con_summary = false;
  con_scene.add(con, true);
  con_phys.add(con);
  con->add_option("--type", con_type, "OS or VS")->capture_default_str();
  con->add_option("--step", con_step, "level spacing as a fraction of u0")->capture_default_str();
  con->add_option("--levels", con_levels, "explicit comma-separated levels as fractions of u0");
  con->add_option("--output", con_output, "CSV file (default: stdout)");
  con->add_flag("--summary", con_summary, "print level, polyline count and arclength instead");

  // fractal
  auto* frc = app.add_subcommand("fractal", "box-counting dimension of the equipotentials");
  Scene frc_scene;
  Physics frc_phys;
  std::string frc_type = "OS", frc_levels;
  double frc_step = 0.1;
  frc_scene.add(frc, true);
  frc_phys.add(frc);
  frc->add_option("--type", frc_type, "OS or VS")->capture_default_str();
  frc->add_option("--step", frc_step, "level spacing as a fraction of u0")->capture_default_str();
  frc->add_option("--levels", frc_levels, "explicit comma-separated levels as fractions of u0");

  // formula
  auto* fml = app.add_subcommand("formula", "closed-form conductivity approximations");
  int fml_dim = 2;
  FormulaParams fp;
  std::string fml_side = "plus", fml_model = "approx";
  std::optional<double> fml_p;
  std::size_t fml_curve = 0;
  fml->add_option("--dim", fml_dim, "2 or 3")->check(CLI::IsMember({2, 3}))->capture_default_str();
  fml->add_option("--pc", fp.p_c, "threshold volume fraction")->capture_default_str();
  fml->add_option("--t", fp.t, "critical exponent")->capture_default_str();
  fml->add_option("--tprime", fp.t_prime, "second exponent of the 3D formula")->capture_default_str();
  fml->add_option("--gamma0", fp.gamma0, "conductivity of the insulating phase")->capture_default_str();
  fml->add_option("--gamma1", fp.gamma1, "conductivity of the conducting phase")->capture_default_str();
  fml->add_option("--side", fml_side, "plus (OS) or minus (VS)")
      ->check(CLI::IsMember({"plus", "minus"}))
      ->capture_default_str();
  fml->add_option("--model", fml_model, "approx: gamma0 > 0 formula; power: pure power law")
      ->check(CLI::IsMember({"approx", "power"}))
      ->capture_default_str();
  fml->add_option("--p", fml_p, "volume fraction to evaluate");
  fml->add_option("--emit-curve", fml_curve, "print a 'p,gamma' CSV with N+1 points on [0,1]");

  // render
  auto* ren = app.add_subcommand("render", "PGM potential map and PPM occupancy/contour overlay");
  Scene ren_scene;
  Physics ren_phys;
  std::string ren_type = "OS";
  double ren_step = 0.1;
  fs::path ren_out = default_output_dir();
  ren_scene.add(ren, true);
  ren_phys.add(ren);
  ren->add_option("--type", ren_type, "OS or VS")->capture_default_str();
  ren->add_option("--step", ren_step, "contour spacing as a fraction of u0")->capture_default_str();
  ren->add_option("--out", ren_out, "output directory (default $HCPERC_OUTPUT_DIR or .)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    throw;
  }

  if (*gen) {
    gen_scene.validate();
    const auto targets = parse_p_list(gen_p);
    const GridDims dims = gen_scene.dims();
    const GeneratedPath gp = generate_path(gen_scene.seed, gen_scene.box(), targets, dims);
    fs::create_directories(gen_out);
    write_file_atomic(gen_out / "config.snap", [&](std::ostream& o) { write_snapshot(o, gp.config); });
    write_file_atomic(gen_out / "centers.csv", [&](std::ostream& o) { write_centers_csv(o, gp.config); });
    write_file_atomic(gen_out / "checkpoints.csv",
                      [&](std::ostream& o) { write_checkpoints_csv(o, gp.path); });
    if (gen_pgm) {
      for (std::size_t k = 0; k < targets.size(); ++k) {
        const auto occ = rasterize(gp.at(k), dims);
        write_file_atomic(gen_out / ("occupancy_" + std::to_string(k) + ".pgm"),
                          [&](std::ostream& o) { write_occupancy_pgm(o, occ); }, true);
      }
    }
    write_checkpoints_csv(std::cout, gp.path);
    return 0;
  }

  if (*sol) {
    sol_scene.validate();
    sol_phys.validate();
    const auto types = parse_types(sol_types);
    const auto config = sol_scene.configuration();
    const auto occ = rasterize(config, sol_scene.dims());
    if (!sol_json) std::cout << kSampleCsvHeader << '\n';
    for (ProblemType type : types) {
      const auto grid = conductivity_field(occ, type, sol_phys.gamma0, sol_phys.gamma1);
      const auto u = solve(grid, {type, sol_phys.u0}, sol_phys.settings());
      const auto m = total_conductivity(u, grid);
      ConductivitySample s;
      s.seed = config.seed;
      s.type = type;
      s.dims = occ.dims;
      s.r_cells = occ.box.disk_radius / occ.cell_width();
      s.p_target = sol_scene.config_path.empty() ? sol_scene.p : occ.coverage();
      s.p_achieved = occ.coverage();
      s.gamma0 = sol_phys.gamma0;
      s.gamma1 = sol_phys.gamma1;
      s.gamma_total = m.gamma_total;
      s.gamma_in = m.gamma_in;
      s.gamma_out = m.gamma_out;
      s.energy = energy(u, grid);
      s.iterations = u.stats.iterations;
      s.residual = u.stats.final_residual;
      if (sol_json) {
        std::cout << sample_to_json(s) << '\n';
      } else {
        write_sample_csv_row(std::cout, s);
        std::cout << '\n';
      }
      if (!sol_save.empty()) {
        const fs::path dir = sol_save;
        fs::create_directories(dir);
        const std::string stem = std::string("potential_") + to_string(type);
        write_file_atomic(dir / (stem + ".raw"), [&](std::ostream& o) { write_potential_raw(o, u); }, true);
        write_file_atomic(dir / (stem + ".pgm"), [&](std::ostream& o) { write_potential_pgm(o, u); }, true);
      }
    }
    return 0;
  }

  if (*swp) {
    ExperimentPlan plan;
    if (!swp_plan.empty()) {
      std::ifstream in(swp_plan);
      if (!in) throw std::invalid_argument("cannot open plan " + swp_plan);
      plan = parse_plan(in);
      if (swp->count("--out")) plan.output_dir = swp_out;
    } else {
      if (swp_paper) {
        swp_dims = "1024";
        swp_r = 25.0;
        if (!swp->count("--seeds")) swp_seeds = 6;
      }
      if (!swp_seed_list.empty()) {
        for (const auto& s : split(swp_seed_list, ',')) plan.seeds.push_back(parse_u64(s));
      } else {
        for (std::size_t k = 1; k <= swp_seeds; ++k) plan.seeds.push_back(k);
      }
      plan.p_targets = parse_p_list(swp_p);
      for (const auto& d : split(swp_dims, ',')) plan.dims.push_back(parse_dims(d));
      if (!(swp_r > 0.0)) throw std::invalid_argument("--r-cells must be positive");
      plan.box = {static_cast<double>(plan.dims.front().nx) / (2.0 * swp_r), 1.0};
      plan.types = parse_types(swp_types);
      plan.gamma0 = swp_phys.gamma0;
      plan.gamma1 = swp_phys.gamma1;
      plan.u0 = swp_phys.u0;
      plan.solver = swp_phys.settings();
      plan.output_dir = swp_out;
    }
    plan.validate();
    if (!swp_write_plan.empty()) {
      write_file_atomic(swp_write_plan, [&](std::ostream& o) { write_plan(o, plan); });
      return 0;
    }
    RunOptions opts;
    opts.jobs = swp_jobs;
    const auto result = run_plan(plan, opts);
    std::cout << "plan_hash " << result.plan_hash << "\nsamples " << result.samples.size()
              << "\nfailures " << result.failures.size() << "\nsolves " << result.solves_performed
              << "\noutput " << (plan.output_dir / "samples.csv").string() << '\n';
    return result.failures.empty() ? 0 : 2;
  }

  if (*fit) {
    const ProblemType type = parse_problem_type(fit_type);
    const CurveSamples cs = read_curve(fit_input, type, fit_dims);
    FitOptions opts;
    opts.pc_step = fit_step;
    opts.scale = fit_log ? FitScale::Log : FitScale::Linear;
    if (!fit_window.empty()) {
      const auto f = split(fit_window, ':');
      if (f.size() != 2) throw std::invalid_argument("--window must be min:max");
      opts.window = {parse_double(f[0]), parse_double(f[1])};
    } else {
      if (cs.points.empty()) throw FitError("no samples to fit");
      double lo = 1.0, hi = 0.0;
      for (const auto& pt : cs.points) {
        lo = std::min(lo, pt.p);
        hi = std::max(hi, pt.p);
      }
      opts.window = {lo, hi};
    }
    std::cout << fit_to_json(fit_power_law(cs, opts), type) << '\n';
    return 0;
  }

  if (*con) {
    con_scene.validate();
    con_phys.validate();
    const auto occ = con_scene.occupancy();
    const auto u = solve_scene(occ, parse_problem_type(con_type), con_phys);
    const auto levels = contour_levels(con_levels, con_step, con_phys.u0);
    const auto cs = extract_contours(u, levels);
    std::ostringstream text;
    if (con_summary) {
      text << "level,polylines,arclength\n";
      for (const auto& lv : cs.levels) {
        text << format_double(lv.level) << ',' << lv.polylines.size() << ','
             << format_double(total_arclength(lv)) << '\n';
      }
    } else {
      write_contours_csv(text, cs);
    }
    if (con_output.empty()) {
      std::cout << text.str();
    } else {
      write_text(con_output, text.str());
    }
    return 0;
  }

  if (*frc) {
    frc_scene.validate();
    frc_phys.validate();
    const auto occ = frc_scene.occupancy();
    const auto u = solve_scene(occ, parse_problem_type(frc_type), frc_phys);
    const auto cs = extract_contours(u, contour_levels(frc_levels, frc_step, frc_phys.u0));
    const auto sizes = power_of_two_box_sizes(occ.dims, occ.box);
    const auto cd = contour_dimension(cs, sizes);
    nlohmann::ordered_json j;
    j["aggregate"] = nlohmann::ordered_json::parse(fractal_to_json(cd.aggregate));
    j["mean_per_level"] = cd.mean_per_level;
    j["per_level"] = nlohmann::ordered_json::array();
    for (std::size_t k = 0; k < cd.per_level.size(); ++k) {
      auto e = nlohmann::ordered_json::parse(fractal_to_json(cd.per_level[k]));
      e["level"] = cs.levels[k].level;
      j["per_level"].push_back(e);
    }
    std::cout << j.dump(2) << '\n';
    return 0;
  }

  if (*fml) {
    fp.validate();
    const bool plus = fml_side == "plus";
    auto eval = [&](double p) {
      if (fml_model == "power") {
        return fp.gamma1 * power_law_shape(plus ? ProblemType::OS : ProblemType::VS, p, fp.p_c, fp.t);
      }
      if (fml_dim == 3) {
        if (!plus) throw std::invalid_argument("the 3D formula has only the plus side");
        return gamma_3d(p, fp);
      }
      return plus ? gamma0_plus(p, fp) : gamma0_minus(p, fp);
    };
    if (fml_curve > 0) {
      std::cout << "p,gamma\n";
      for (std::size_t k = 0; k <= fml_curve; ++k) {
        const double p = static_cast<double>(k) / static_cast<double>(fml_curve);
        std::cout << format_double(p) << ',' << format_double(eval(p)) << '\n';
      }
      return 0;
    }
    if (!fml_p) throw std::invalid_argument("formula needs --p or --emit-curve");
    if (!(*fml_p >= 0.0 && *fml_p <= 1.0)) throw std::invalid_argument("--p must lie in [0, 1]");
    std::cout << format_double(eval(*fml_p)) << '\n';
    return 0;
  }

  if (*ren) {
    ren_scene.validate();
    ren_phys.validate();
    const ProblemType type = parse_problem_type(ren_type);
    const auto occ = ren_scene.occupancy();
    const auto u = solve_scene(occ, type, ren_phys);
    const auto cs = extract_contours(u, uniform_levels(ren_phys.u0, ren_step));
    fs::create_directories(ren_out);
    const std::string suffix = std::string("_") + to_string(type);
    write_file_atomic(ren_out / ("potential" + suffix + ".pgm"),
                      [&](std::ostream& o) { write_potential_pgm(o, u); }, true);
    write_file_atomic(ren_out / "occupancy.pgm", [&](std::ostream& o) { write_occupancy_pgm(o, occ); },
                      true);
    write_file_atomic(ren_out / ("overlay" + suffix + ".ppm"),
                      [&](std::ostream& o) { write_overlay_ppm(o, occ, cs); }, true);
    std::cout << (ren_out / ("overlay" + suffix + ".ppm")).string() << '\n';
    return 0;
  }
  return 1;
}

int main(int argc, char** argv) {
  // --error-json is accepted anywhere on the command line.
  bool error_json = false;
  std::vector<char*> args;
  for (int k = 0; k < argc; ++k) {
    if (k > 0 && std::string(argv[k]) == "--error-json") {
      error_json = true;
    } else {
      args.push_back(argv[k]);
    }
  }
  auto report = [&](const char* kind, const std::string& message) {
    if (error_json) {
      nlohmann::ordered_json j{{"error", kind}, {"message", message}};
      std::cerr << j.dump() << '\n';
    } else {
      std::cerr << "hcperc: " << message << '\n';
    }
  };
  try {
    return run(static_cast<int>(args.size()), args.data(), error_json);
  } catch (const CLI::ParseError& e) {
    report("usage", e.what());
    return 1;
  } catch (const std::exception& e) {
    if (is_numeric_failure(e)) {
      report("numeric", e.what());
      return 2;
    }
    report("usage", e.what());
    return 1;
  }
}
