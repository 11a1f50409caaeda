#include "hcperc/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <istream>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include <json.hpp>

#include "hcperc/io.hpp"

namespace hcperc {

namespace {

std::string dims_text(GridDims d) { return std::to_string(d.nx) + "x" + std::to_string(d.ny); }

template <class T, class F>
std::string join(const std::vector<T>& v, F f) {
  std::string out;
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (k) out += ',';
    out += f(v[k]);
  }
  return out;
}

void write_plan_body(std::ostream& out, const ExperimentPlan& plan, bool with_output) {
  out << "format = " << kPlanFormat << '\n';
  out << "seeds = " << join(plan.seeds, [](std::uint64_t s) { return std::to_string(s); }) << '\n';
  out << "p_targets = " << join(plan.p_targets, format_double) << '\n';
  out << "dims = " << join(plan.dims, dims_text) << '\n';
  out << "gamma0 = " << format_double(plan.gamma0) << '\n';
  out << "gamma1 = " << format_double(plan.gamma1) << '\n';
  out << "half_width = " << format_double(plan.box.half_width) << '\n';
  out << "disk_radius = " << format_double(plan.box.disk_radius) << '\n';
  out << "types = " << join(plan.types, [](ProblemType t) { return std::string(to_string(t)); })
      << '\n';
  out << "u0 = " << format_double(plan.u0) << '\n';
  out << "rel_tolerance = " << format_double(plan.solver.rel_tolerance) << '\n';
  out << "max_iterations = " << plan.solver.max_iterations << '\n';
  out << "preconditioner = " << to_string(plan.solver.preconditioner) << '\n';
  out << "face_rule = " << to_string(plan.solver.face_rule) << '\n';
  if (with_output) out << "output_dir = " << plan.output_dir.string() << '\n';
}

}  // namespace

void ExperimentPlan::validate() const {
  if (seeds.empty()) throw std::invalid_argument("plan needs at least one seed");
  if (p_targets.empty()) throw std::invalid_argument("plan needs at least one p target");
  if (dims.empty()) throw std::invalid_argument("plan needs at least one grid size");
  if (types.empty()) throw std::invalid_argument("plan needs at least one problem type");
  for (std::size_t k = 0; k < p_targets.size(); ++k) {
    if (!(p_targets[k] >= 0.0 && p_targets[k] < 1.0)) {
      throw std::invalid_argument("p targets must lie in [0, 1)");
    }
    if (k > 0 && !(p_targets[k] > p_targets[k - 1])) {
      throw std::invalid_argument("p targets must be strictly increasing");
    }
  }
  std::set<std::uint64_t> unique_seeds(seeds.begin(), seeds.end());
  if (unique_seeds.size() != seeds.size()) throw std::invalid_argument("duplicate seeds in plan");
  for (GridDims d : dims) {
    if (d.nx < 2 || d.ny < 2) throw std::invalid_argument("grid sizes must be at least 2x2");
  }
  if (!(gamma0 > 0.0 && gamma0 <= gamma1)) {
    throw std::invalid_argument("conductivities must satisfy 0 < gamma0 <= gamma1");
  }
  if (!(u0 > 0.0)) throw std::invalid_argument("u0 must be positive");
  box.check_simulation_box();
  solver.validate();
}

std::vector<double> parse_p_list(const std::string& text) {
  std::vector<double> out;
  if (text.find(':') != std::string::npos) {
    const auto f = split(text, ':');
    if (f.size() != 3) throw std::invalid_argument("p range must be start:stop:step");
    const double a = parse_double(f[0]), b = parse_double(f[1]), step = parse_double(f[2]);
    if (!(step > 0.0) || b < a) throw std::invalid_argument("p range needs step > 0 and stop >= start");
    const auto n = static_cast<long>(std::floor((b - a) / step + 1e-6));
    for (long k = 0; k <= n; ++k) {
      out.push_back(std::round((a + static_cast<double>(k) * step) * 1e9) / 1e9);
    }
    return out;
  }
  for (const auto& s : split(text, ',')) out.push_back(parse_double(s));
  return out;
}

GridDims parse_dims(const std::string& text) {
  const auto t = std::string(trim(text));
  const auto x = t.find('x');
  if (x == std::string::npos) {
    const auto n = parse_u64(t);
    return {n, n};
  }
  return {parse_u64(t.substr(0, x)), parse_u64(t.substr(x + 1))};
}

ExperimentPlan parse_plan(std::istream& in) {
  ExperimentPlan plan;
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t lineno = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const auto body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) {
      throw std::invalid_argument("plan line " + std::to_string(lineno) + ": expected key = value");
    }
    std::string key(trim(body.substr(0, eq)));
    std::string value(trim(body.substr(eq + 1)));
    if (first && (key != "format" || value != kPlanFormat)) {
      throw std::invalid_argument(std::string("plan must start with 'format = ") + kPlanFormat + "'");
    }
    first = false;
    if (!kv.emplace(key, value).second) throw std::invalid_argument("duplicate plan key '" + key + "'");
  }
  if (first) throw std::invalid_argument("empty plan file");

  for (const auto& [key, value] : kv) {
    if (key == "format") {
    } else if (key == "seeds") {
      plan.seeds.clear();
      for (const auto& s : split(value, ',')) plan.seeds.push_back(parse_u64(s));
    } else if (key == "p_targets") {
      plan.p_targets = parse_p_list(value);
    } else if (key == "dims") {
      plan.dims.clear();
      for (const auto& s : split(value, ',')) plan.dims.push_back(parse_dims(s));
    } else if (key == "gamma0") {
      plan.gamma0 = parse_double(value);
    } else if (key == "gamma1") {
      plan.gamma1 = parse_double(value);
    } else if (key == "half_width") {
      plan.box.half_width = parse_double(value);
    } else if (key == "disk_radius") {
      plan.box.disk_radius = parse_double(value);
    } else if (key == "types") {
      plan.types.clear();
      for (const auto& s : split(value, ',')) plan.types.push_back(parse_problem_type(std::string(trim(s))));
    } else if (key == "u0") {
      plan.u0 = parse_double(value);
    } else if (key == "rel_tolerance") {
      plan.solver.rel_tolerance = parse_double(value);
    } else if (key == "max_iterations") {
      plan.solver.max_iterations = parse_u64(value);
    } else if (key == "preconditioner") {
      plan.solver.preconditioner = parse_preconditioner(value);
    } else if (key == "face_rule") {
      plan.solver.face_rule = parse_face_rule(value);
    } else if (key == "output_dir") {
      plan.output_dir = value;
    } else {
      throw std::invalid_argument("unknown plan key '" + key + "'");
    }
  }
  plan.validate();
  return plan;
}

void write_plan(std::ostream& out, const ExperimentPlan& plan) {
  out << "# hcperc experiment plan\n";
  write_plan_body(out, plan, true);
}

std::string plan_hash(const ExperimentPlan& plan) {
  std::ostringstream ss;
  write_plan_body(ss, plan, false);
  return hex64(fnv1a64(ss.str()));
}

namespace {


struct Key {
  std::size_t nx, ny;
  std::uint64_t seed;
  std::string p;  // exact text of p_target
  int type;
  auto operator<=>(const Key&) const = default;
};

Key key_of(GridDims d, std::uint64_t seed, double p, ProblemType t) {
  return {d.nx, d.ny, seed, format_double(p), static_cast<int>(t)};
}

constexpr const char* kJournalName = "samples.journal.csv";

struct JournalEntry {
  bool ok = true;
  ConductivitySample sample;
  std::string message;
};

std::string journal_header() {
  return std::string("plan_hash,status,") + kSampleCsvHeader + ",message";
}

std::string sanitize(std::string s) {
  for (char& c : s) {
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  }
  return s;
}

std::map<Key, JournalEntry> read_journal(const std::filesystem::path& path, const std::string& hash) {
  std::map<Key, JournalEntry> out;
  std::ifstream in(path);
  if (!in) return out;
  std::string line;
  if (!std::getline(in, line)) return out;
  if (trim(line) != journal_header()) throw std::runtime_error("unexpected journal header in " + path.string());
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos) continue;  // torn final line
    if (line.substr(0, c1) != hash) {
      throw std::runtime_error("output directory holds results of a different plan (hash " +
                               line.substr(0, c1) + ", expected " + hash + ")");
    }
    const auto rest = line.substr(c2 + 1);
    const auto last = rest.rfind(',');
    JournalEntry e;
    e.ok = line.substr(c1 + 1, c2 - c1 - 1) == "ok";
    try {
      e.sample = parse_sample_csv_row(rest.substr(0, last));
    } catch (const std::exception&) {
      continue;  // torn final line from an interrupted run
    }
    e.message = rest.substr(last + 1);
    out[key_of(e.sample.dims, e.sample.seed, e.sample.p_target, e.sample.type)] = e;
  }
  return out;
}

}  // namespace

SweepResult run_plan(const ExperimentPlan& plan, const RunOptions& options) {
  plan.validate();
  SweepResult result;
  result.plan_hash = plan_hash(plan);
  std::filesystem::create_directories(plan.output_dir);
  const auto journal_path = plan.output_dir / kJournalName;

  auto done = read_journal(journal_path, result.plan_hash);
  if (!std::filesystem::exists(journal_path) || std::filesystem::file_size(journal_path) == 0) {
    std::ofstream(journal_path) << journal_header() << '\n';
  } else {
    // Drop a torn final line so appended rows start on a fresh line.
    const auto text = read_file(journal_path);
    if (!text.empty() && text.back() != '\n') {
      std::ofstream(journal_path, std::ios::app) << '\n';
    }
  }

  struct Task {
    GridDims dims;
    std::uint64_t seed;
  };
  std::vector<Task> tasks;
  for (GridDims d : plan.dims) {
    for (std::uint64_t s : plan.seeds) tasks.push_back({d, s});
  }

  std::mutex mu;
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> solves{0};
  std::exception_ptr first_error;

  auto record = [&](const JournalEntry& e) {
    std::lock_guard lock(mu);
    std::ofstream out(journal_path, std::ios::app);
    out << result.plan_hash << ',' << (e.ok ? "ok" : "failed") << ',';
    write_sample_csv_row(out, e.sample);
    out << ',' << sanitize(e.message) << '\n';
    out.flush();
    if (!out) throw std::runtime_error("cannot append to " + journal_path.string());
    done[key_of(e.sample.dims, e.sample.seed, e.sample.p_target, e.sample.type)] = e;
    if (e.ok && options.on_sample) options.on_sample(e.sample);
  };

  auto missing = [&](const Task& t, double p, ProblemType type) {
    std::lock_guard lock(mu);
    return done.find(key_of(t.dims, t.seed, p, type)) == done.end();
  };

  auto run_task = [&](const Task& t) {
    bool any = false;
    for (double p : plan.p_targets) {
      for (ProblemType type : plan.types) any = any || missing(t, p, type);
    }
    if (!any) return;
    const GeneratedPath gp = generate_path(t.seed, plan.box, plan.p_targets, t.dims);
    for (std::size_t k = 0; k < plan.p_targets.size(); ++k) {
      const double p = plan.p_targets[k];
      std::optional<OccupancyGrid> occ;
      for (ProblemType type : plan.types) {
        if (!missing(t, p, type)) continue;
        if (!occ) occ = rasterize(gp.at(k), t.dims);
        JournalEntry e;
        try {
          e.sample = measure_sample(*occ, type, plan.gamma0, plan.gamma1, plan.solver, t.seed, p,
                                    plan.u0);
        } catch (const SolveError& err) {
          e.ok = false;
          e.message = err.what();
          const double nan = std::nan("");
          e.sample.seed = t.seed;
          e.sample.type = type;
          e.sample.dims = t.dims;
          e.sample.r_cells = plan.box.disk_radius / occ->cell_width();
          e.sample.p_target = p;
          e.sample.p_achieved = occ->coverage();
          e.sample.gamma0 = plan.gamma0;
          e.sample.gamma1 = plan.gamma1;
          e.sample.gamma_total = e.sample.gamma_in = e.sample.gamma_out = e.sample.energy = nan;
          e.sample.iterations = err.residual_history().empty() ? 0 : err.residual_history().size() - 1;
          e.sample.residual = err.residual_history().empty() ? nan : err.residual_history().back();
        }
        ++solves;
        record(e);
      }
    }
  };

  unsigned jobs = options.jobs != 0 ? options.jobs : std::max(1u, std::thread::hardware_concurrency());
  jobs = static_cast<unsigned>(std::min<std::size_t>(jobs, tasks.size()));
  auto worker = [&]() {
    while (true) {
      const std::size_t i = next++;
      if (i >= tasks.size()) return;
      try {
        run_task(tasks[i]);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!first_error) first_error = std::current_exception();
        next = tasks.size();
        return;
      }
    }
  };
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned k = 0; k < jobs; ++k) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  // Deterministic fold in key order: dims, seed, p, type as listed in the plan.
  for (GridDims d : plan.dims) {
    for (std::uint64_t s : plan.seeds) {
      for (double p : plan.p_targets) {
        for (ProblemType type : plan.types) {
          const auto& e = done.at(key_of(d, s, p, type));
          if (e.ok) {
            result.samples.push_back(e.sample);
          } else {
            result.failures.push_back({s, type, d, p, e.message});
          }
        }
      }
    }
  }
  result.solves_performed = solves;

  write_file_atomic(plan.output_dir / "samples.csv", [&](std::ostream& out) {
    out << kSampleCsvHeader << '\n';
    for (const auto& s : result.samples) {
      write_sample_csv_row(out, s);
      out << '\n';
    }
  });
  write_file_atomic(plan.output_dir / "summary.json",
                    [&](std::ostream& out) { out << summary_json(plan, result) << '\n'; });
  return result;
}

CurveSamples AggregatedCurve::mean_curve(double gamma0, double gamma1) const {
  CurveSamples c;
  c.type = type;
  c.dims = dims;
  c.gamma0 = gamma0;
  c.gamma1 = gamma1;
  for (const auto& pt : points) c.points.push_back({pt.p_target, pt.mean});
  return c;
}

std::vector<AggregatedCurve> aggregate(const std::vector<ConductivitySample>& samples) {
  // (type, nx, ny) -> p text -> accumulated values, in first-seen order.
  std::vector<AggregatedCurve> curves;
  std::vector<std::vector<std::vector<const ConductivitySample*>>> members;
  std::vector<std::vector<std::string>> p_keys;
  for (const auto& s : samples) {
    if (!std::isfinite(s.gamma_total)) continue;
    std::size_t c = 0;
    while (c < curves.size() && !(curves[c].type == s.type && curves[c].dims == s.dims)) ++c;
    if (c == curves.size()) {
      curves.push_back({s.type, s.dims, {}});
      members.emplace_back();
      p_keys.emplace_back();
    }
    const std::string pk = format_double(s.p_target);
    std::size_t k = 0;
    while (k < p_keys[c].size() && p_keys[c][k] != pk) ++k;
    if (k == p_keys[c].size()) {
      p_keys[c].push_back(pk);
      members[c].emplace_back();
    }
    members[c][k].push_back(&s);
  }
  for (std::size_t c = 0; c < curves.size(); ++c) {
    for (const auto& group : members[c]) {
      AggregatePoint pt;
      pt.p_target = group.front()->p_target;
      pt.min = pt.max = group.front()->gamma_total;
      double sum = 0.0, psum = 0.0;
      for (const auto* s : group) {
        sum += s->gamma_total;
        psum += s->p_achieved;
        pt.min = std::min(pt.min, s->gamma_total);
        pt.max = std::max(pt.max, s->gamma_total);
      }
      pt.count = group.size();
      pt.mean = sum / static_cast<double>(group.size());
      pt.p_achieved_mean = psum / static_cast<double>(group.size());
      curves[c].points.push_back(pt);
    }
    std::stable_sort(curves[c].points.begin(), curves[c].points.end(),
                     [](const AggregatePoint& a, const AggregatePoint& b) { return a.p_target < b.p_target; });
  }
  std::stable_sort(curves.begin(), curves.end(), [](const AggregatedCurve& a, const AggregatedCurve& b) {
    return std::tie(a.dims.nx, a.dims.ny, a.type) < std::tie(b.dims.nx, b.dims.ny, b.type);
  });
  return curves;
}

namespace {

nlohmann::ordered_json fit_json(const CurveSamples& c, const FitOptions& opts) {
  try {
    const auto f = fit_power_law(c, opts);
    nlohmann::ordered_json j;
    j["p_c"] = f.p_c;
    j["t"] = f.t;
    j["amplitude"] = f.amplitude;
    j["rss"] = f.rss;
    j["window"] = {f.window.p_min, f.window.p_max};
    j["points_used"] = f.points_used;
    return j;
  } catch (const FitError& e) {
    return {{"error", e.what()}};
  }
}

double median(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

std::string summary_json(const ExperimentPlan& plan, const SweepResult& result) {
  nlohmann::ordered_json j;
  j["format"] = "hcperc-summary 1";
  j["code_version"] = result.code_version;
  j["plan_hash"] = result.plan_hash;
  {
    std::ostringstream ss;
    write_plan_body(ss, plan, false);
    j["plan"] = ss.str();
  }
  j["samples"] = result.samples.size();
  j["failures"] = nlohmann::ordered_json::array();
  for (const auto& f : result.failures) {
    j["failures"].push_back({{"seed", f.seed}, {"type", to_string(f.type)}, {"dims_x", f.dims.nx},
                             {"dims_y", f.dims.ny}, {"p_target", f.p_target}, {"message", f.message}});
  }

  FitOptions opts;
  opts.window = {plan.p_targets.front(), plan.p_targets.back()};
  j["curves"] = nlohmann::ordered_json::array();
  for (const auto& curve : aggregate(result.samples)) {
    nlohmann::ordered_json c;
    c["type"] = to_string(curve.type);
    c["dims_x"] = curve.dims.nx;
    c["dims_y"] = curve.dims.ny;
    c["points"] = nlohmann::ordered_json::array();
    for (const auto& pt : curve.points) {
      c["points"].push_back({{"p_target", pt.p_target}, {"p_achieved_mean", pt.p_achieved_mean},
                             {"mean", pt.mean}, {"min", pt.min}, {"max", pt.max}, {"count", pt.count}});
    }
    c["fit"] = fit_json(curve.mean_curve(plan.gamma0, plan.gamma1), opts);

    std::vector<double> pcs, ts;
    nlohmann::ordered_json per_seed = nlohmann::ordered_json::array();
    for (std::uint64_t seed : plan.seeds) {
      CurveSamples cs;
      cs.type = curve.type;
      cs.dims = curve.dims;
      for (const auto& s : result.samples) {
        if (s.seed == seed && s.type == curve.type && s.dims == curve.dims) {
          cs.points.push_back({s.p_target, s.gamma_total});
        }
      }
      auto fj = fit_json(cs, opts);
      if (fj.contains("p_c")) {
        pcs.push_back(fj["p_c"].get<double>());
        ts.push_back(fj["t"].get<double>());
      }
      per_seed.push_back({{"seed", seed}, {"fit", fj}});
    }
    c["per_seed_fits"] = per_seed;
    if (!pcs.empty()) {
      auto mean = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x;
        return s / static_cast<double>(v.size());
      };
      auto spread = [](const std::vector<double>& v) {
        const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
        return *hi - *lo;
      };
      c["per_seed_average"] = {{"p_c", mean(pcs)}, {"t", mean(ts)}};
      c["per_seed_max_minus_min"] = {{"p_c", spread(pcs)}, {"t", spread(ts)}};
    }
    j["curves"].push_back(c);
  }

  j["reciprocity"] = nlohmann::ordered_json::array();
  for (GridDims d : plan.dims) {
    std::map<std::pair<std::uint64_t, std::string>, std::pair<double, double>> pairs;
    for (const auto& s : result.samples) {
      if (!(s.dims == d)) continue;
      auto& slot = pairs.try_emplace({s.seed, format_double(s.p_target)}, std::nan(""), std::nan("")).first->second;
      (s.type == ProblemType::OS ? slot.first : slot.second) = s.gamma_total;
    }
    std::vector<double> defects;
    for (const auto& [key, g] : pairs) {
      if (std::isfinite(g.first) && std::isfinite(g.second)) {
        defects.push_back(std::abs(g.first * g.second / (plan.gamma0 * plan.gamma1) - 1.0));
      }
    }
    if (defects.empty()) continue;
    j["reciprocity"].push_back({{"dims_x", d.nx}, {"dims_y", d.ny}, {"pairs", defects.size()},
                                {"median_abs_defect", median(defects)},
                                {"max_abs_defect", *std::max_element(defects.begin(), defects.end())}});
  }
  return j.dump(2);
}

}  // namespace hcperc
