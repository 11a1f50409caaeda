#pragma once

// Power-law fits of conductivity curves, the closed-form approximation
// formulae and the crossing-probability threshold estimate.

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hcperc/field.hpp"
#include "hcperc/geometry.hpp"

namespace hcperc {

struct CurvePoint {
  double p = 0.0;
  double gamma = 0.0;
};

struct CurveSamples {
  ProblemType type = ProblemType::OS;
  std::vector<CurvePoint> points;
  GridDims dims;
  double gamma0 = 1e-4;
  double gamma1 = 1.0;
  std::vector<std::uint64_t> seeds;
};

struct FitWindow {
  double p_min = 0.0;
  double p_max = 1.0;
};

enum class FitScale { Linear, Log };

struct FitOptions {
  FitWindow window;
  double pc_step = 0.001;
  FitScale scale = FitScale::Linear;
};

struct FitResult {
  double p_c = 0.0;
  double t = 0.0;
  double amplitude = 0.0;  // multiplies the normalized power law; about gamma1
  double rss = 0.0;
  FitWindow window;
  std::size_t points_used = 0;
};

/// No candidate threshold separates the samples.
class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Normalized power law without amplitude:
/// OS: ((p - pc) / (1 - pc))^t for p >= pc, else 0;
/// VS: ((pc - p) / pc)^t for p <= pc, else 0.
double power_law_shape(ProblemType type, double p, double p_c, double t);

/// Least squares in linear scale of Gamma ~ A * shape(p; pc, t) over the
/// samples inside the window: grid search over pc, golden-section search
/// over log t, closed-form A. Needs at least 8 samples in the window.
FitResult fit_power_law(const CurveSamples& samples, const FitOptions& options);

std::string fit_to_json(const FitResult& fit, ProblemType type);

struct FormulaParams {
  double p_c = 0.656;
  double t = 1.451;
  double t_prime = 1.2;
  double gamma0 = 1e-4;
  double gamma1 = 1.0;

  void validate() const;
};

/// Heaviside step with theta(0) = 1.
inline double heaviside(double x) { return x >= 0.0 ? 1.0 : 0.0; }

double gamma0_plus(double p, const FormulaParams& params);
double gamma0_minus(double p, const FormulaParams& params);

enum class Side { Plus, Minus };

/// |formula - sqrt(g0 g1) (1 +- sqrt(g1/g0) (p - pc)/pc)| / sqrt(g0 g1).
double expansion_defect(double p, const FormulaParams& params, Side side);

double gamma_3d(double p, const FormulaParams& params);

struct CrossingEstimate {
  double threshold = 0.0;
  std::vector<double> p_grid;
  std::vector<double> fractions;
};

/// No crossing of probability 1/2 inside the p grid.
class CrossingRangeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Fraction of seeds whose occupied set connects the top and bottom edges,
/// per p (p grid strictly increasing).
std::vector<double> crossing_fractions(std::span<const std::uint64_t> seeds,
                                       std::span<const double> p_grid, GridDims dims,
                                       const Box& box);

/// Linear interpolation of the first crossing of probability 1/2.
/// Requires at least five seeds.
CrossingEstimate threshold_from_crossing(std::span<const std::uint64_t> seeds,
                                         std::span<const double> p_grid, GridDims dims,
                                         const Box& box);

}  // namespace hcperc
