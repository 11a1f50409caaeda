#pragma once

// Experiment plans over (dims x seed x p x type), resumable execution and
// aggregation of the resulting conductivity samples.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "hcperc/analysis.hpp"
#include "hcperc/observables.hpp"
#include "hcperc/solver.hpp"

namespace hcperc {

inline constexpr const char* kCodeVersion = "hcperc 1.0.0";

// Plan files are "key = value" lines; '#' starts a comment. Keys:
//   format          hcperc-plan 1 (required, first key)
//   seeds           comma-separated unsigned integers
//   p_targets       comma-separated fractions, or start:stop:step
//   dims            comma-separated NxM or N (square)
//   gamma0, gamma1  conductivities
//   half_width      box half-width (units of the disk radius when disk_radius = 1)
//   disk_radius     disk radius
//   types           comma-separated OS / VS
//   u0              applied potential
//   rel_tolerance, max_iterations, preconditioner (multigrid|jacobi),
//   face_rule (dual-consistent|harmonic)
//   output_dir      results directory
// The box is shared by every entry of `dims`, so dims refine one geometry.
struct ExperimentPlan {
  std::vector<std::uint64_t> seeds;
  std::vector<double> p_targets;
  std::vector<GridDims> dims;
  double gamma0 = 1e-4;
  double gamma1 = 1.0;
  Box box;
  std::vector<ProblemType> types{ProblemType::OS, ProblemType::VS};
  double u0 = 1.0;
  SolverSettings solver;
  std::filesystem::path output_dir = ".";

  void validate() const;
};

inline constexpr const char* kPlanFormat = "hcperc-plan 1";

ExperimentPlan parse_plan(std::istream& in);
void write_plan(std::ostream& out, const ExperimentPlan& plan);
/// Hash of everything that affects results (the output directory excluded).
std::string plan_hash(const ExperimentPlan& plan);

/// "a:b:step" (inclusive of b within step/1e6) or a comma list.
std::vector<double> parse_p_list(const std::string& text);
GridDims parse_dims(const std::string& text);

struct CellFailure {
  std::uint64_t seed = 0;
  ProblemType type = ProblemType::OS;
  GridDims dims;
  double p_target = 0.0;
  std::string message;
};

struct SweepResult {
  std::vector<ConductivitySample> samples;  // key order: dims, seed, p, type
  std::vector<CellFailure> failures;
  std::string plan_hash;
  std::string code_version = kCodeVersion;
  std::size_t solves_performed = 0;  // solves run by this invocation
};

struct RunOptions {
  unsigned jobs = 0;  // 0 = hardware concurrency
  std::function<void(const ConductivitySample&)> on_sample;
};

/// Runs every missing cell and consolidates. Completed cells are journaled
/// to output_dir/samples.journal.csv as they finish, so an interrupted run
/// resumes where it stopped. Writes samples.csv and summary.json.
SweepResult run_plan(const ExperimentPlan& plan, const RunOptions& options = {});

struct AggregatePoint {
  double p_target = 0.0;
  double p_achieved_mean = 0.0;
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
  std::size_t count = 0;
};

struct AggregatedCurve {
  ProblemType type = ProblemType::OS;
  GridDims dims;
  std::vector<AggregatePoint> points;

  /// Mean curve as fit input, using p_target as the abscissa.
  CurveSamples mean_curve(double gamma0, double gamma1) const;
};

/// Mean and min/max band over seeds per (type, dims, p), in key order.
std::vector<AggregatedCurve> aggregate(const std::vector<ConductivitySample>& samples);

/// Summary JSON: provenance, aggregated curves, fits over the full p range,
/// per-seed fits and reciprocity statistics. Deterministic.
std::string summary_json(const ExperimentPlan& plan, const SweepResult& result);

}  // namespace hcperc
