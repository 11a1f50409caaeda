#include "hcperc/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

namespace hcperc {

double power_law_shape(ProblemType type, double p, double p_c, double t) {
  if (type == ProblemType::OS) {
    if (p < p_c) return 0.0;
    return std::pow((p - p_c) / (1.0 - p_c), t);
  }
  if (p > p_c) return 0.0;
  return std::pow((p_c - p) / p_c, t);
}

namespace {

struct Candidate {
  double t = 0.0;
  double amplitude = 0.0;
  double rss = std::numeric_limits<double>::infinity();
};

class Objective {
 public:
  Objective(ProblemType type, std::span<const CurvePoint> pts, FitScale scale)
      : type_(type), pts_(pts), scale_(scale) {}

  // Residual at fixed (pc, t) with the amplitude eliminated.
  Candidate evaluate(double p_c, double t) const {
    Candidate c;
    c.t = t;
    if (scale_ == FitScale::Linear) {
      double sff = 0.0, syf = 0.0;
      for (const auto& pt : pts_) {
        const double f = power_law_shape(type_, pt.p, p_c, t);
        sff += f * f;
        syf += pt.gamma * f;
      }
      if (!(sff > 0.0)) return c;
      c.amplitude = syf / sff;
      double rss = 0.0;
      for (const auto& pt : pts_) {
        const double r = pt.gamma - c.amplitude * power_law_shape(type_, pt.p, p_c, t);
        rss += r * r;
      }
      c.rss = rss;
      return c;
    }
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& pt : pts_) {
      const double f = power_law_shape(type_, pt.p, p_c, t);
      if (f > 0.0 && pt.gamma > 0.0) {
        sum += std::log(pt.gamma) - std::log(f);
        ++n;
      }
    }
    if (n < 2) return c;
    const double log_a = sum / static_cast<double>(n);
    double rss = 0.0;
    for (const auto& pt : pts_) {
      const double f = power_law_shape(type_, pt.p, p_c, t);
      if (f > 0.0 && pt.gamma > 0.0) {
        const double r = std::log(pt.gamma) - log_a - std::log(f);
        rss += r * r;
      }
    }
    c.amplitude = std::exp(log_a);
    c.rss = rss;
    return c;
  }

  // Coarse scan then golden-section refinement in log t.
  Candidate best_t(double p_c) const {
    constexpr double kLogMin = -2.302585092994046;  // log 0.1
    constexpr double kLogMax = 1.6094379124341003;  // log 5
    constexpr int kScan = 64;
    const double step = (kLogMax - kLogMin) / kScan;
    Candidate best;
    int best_k = -1;
    for (int k = 0; k <= kScan; ++k) {
      Candidate c = evaluate(p_c, std::exp(kLogMin + k * step));
      if (c.rss < best.rss) {
        best = c;
        best_k = k;
      }
    }
    if (best_k < 0) return best;
    double a = kLogMin + std::max(best_k - 1, 0) * step;
    double b = kLogMin + std::min(best_k + 1, kScan) * step;
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = b - g * (b - a);
    double x2 = a + g * (b - a);
    Candidate f1 = evaluate(p_c, std::exp(x1));
    Candidate f2 = evaluate(p_c, std::exp(x2));
    for (int it = 0; it < 80 && b - a > 1e-12; ++it) {
      if (f1.rss <= f2.rss) {
        b = x2;
        x2 = x1;
        f2 = f1;
        x1 = b - g * (b - a);
        f1 = evaluate(p_c, std::exp(x1));
      } else {
        a = x1;
        x1 = x2;
        f1 = f2;
        x2 = a + g * (b - a);
        f2 = evaluate(p_c, std::exp(x2));
      }
    }
    const Candidate& inner = f1.rss <= f2.rss ? f1 : f2;
    return inner.rss < best.rss ? inner : best;
  }

 private:
  ProblemType type_;
  std::span<const CurvePoint> pts_;
  FitScale scale_;
};

}  // namespace

FitResult fit_power_law(const CurveSamples& samples, const FitOptions& options) {
  const FitWindow w = options.window;
  if (!(w.p_min >= 0.0 && w.p_max <= 1.0 && w.p_min < w.p_max)) {
    throw std::invalid_argument("fit window must satisfy 0 <= p_min < p_max <= 1");
  }
  if (!(options.pc_step > 0.0)) throw std::invalid_argument("threshold step must be positive");

  std::vector<CurvePoint> pts;
  for (const auto& pt : samples.points) {
    if (!std::isfinite(pt.p) || !std::isfinite(pt.gamma)) continue;
    if (pt.p >= w.p_min && pt.p <= w.p_max) pts.push_back(pt);
  }
  std::sort(pts.begin(), pts.end(), [](const CurvePoint& a, const CurvePoint& b) { return a.p < b.p; });
  if (pts.size() < 8) throw FitError("fit needs at least 8 samples inside the window");

  const Objective objective(samples.type, pts, options.scale);
  const double lo = std::max(pts.front().p, options.pc_step);
  const double hi = std::min(pts.back().p, 1.0 - options.pc_step);
  const auto k0 = static_cast<long>(std::ceil(lo / options.pc_step - 1e-9));
  const auto k1 = static_cast<long>(std::floor(hi / options.pc_step + 1e-9));

  FitResult best;
  best.rss = std::numeric_limits<double>::infinity();
  for (long k = k0; k <= k1; ++k) {
    const double p_c = static_cast<double>(k) * options.pc_step;
    std::size_t below = 0, above = 0;
    for (const auto& pt : pts) {
      if (pt.p < p_c) ++below;
      if (pt.p > p_c) ++above;
    }
    const std::size_t active = samples.type == ProblemType::OS ? above : below;
    if (below == 0 || above == 0 || active < 2) continue;
    const Candidate c = objective.best_t(p_c);
    if (c.rss < best.rss) {
      best.p_c = p_c;
      best.t = c.t;
      best.amplitude = c.amplitude;
      best.rss = c.rss;
    }
  }
  if (!std::isfinite(best.rss)) {
    throw FitError("no candidate threshold has samples on both sides");
  }
  best.window = w;
  best.points_used = pts.size();
  return best;
}

std::string fit_to_json(const FitResult& fit, ProblemType type) {
  nlohmann::ordered_json j;
  j["type"] = to_string(type);
  j["p_c"] = fit.p_c;
  j["t"] = fit.t;
  j["amplitude"] = fit.amplitude;
  j["rss"] = fit.rss;
  j["window"] = {fit.window.p_min, fit.window.p_max};
  j["points_used"] = fit.points_used;
  return j.dump(2);
}

void FormulaParams::validate() const {
  if (!(p_c > 0.0 && p_c < 1.0)) throw std::domain_error("p_c must lie in (0, 1)");
  if (!(t > 0.0) || !(t_prime > 0.0)) throw std::domain_error("exponents must be positive");
  if (!(gamma0 > 0.0 && gamma0 <= gamma1)) {
    throw std::domain_error("conductivities must satisfy 0 < gamma0 <= gamma1");
  }
}

namespace {

void check_p(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::domain_error("volume fraction must lie in [0, 1]");
}

}  // namespace

double gamma0_plus(double p, const FormulaParams& q) {
  q.validate();
  check_p(p);
  const double s = std::sqrt(q.gamma0 * q.gamma1);
  const double pct = std::pow(q.p_c, q.t);
  double v = 0.0;
  double denom = pct;
  if (heaviside(p - q.p_c) > 0.0) v += q.gamma1 * std::pow((p - q.p_c) / (1.0 - q.p_c), q.t);
  if (heaviside(q.p_c - p) > 0.0) {
    denom += std::pow(q.p_c - p, q.t) * std::sqrt(q.gamma1 / q.gamma0);
  }
  return v + s * (pct / denom);
}

double gamma0_minus(double p, const FormulaParams& q) {
  q.validate();
  check_p(p);
  const double s = std::sqrt(q.gamma0 * q.gamma1);
  const double qct = std::pow(1.0 - q.p_c, q.t);
  double v = 0.0;
  double denom = qct;
  if (heaviside(q.p_c - p) > 0.0) v += q.gamma1 * std::pow((q.p_c - p) / q.p_c, q.t);
  if (heaviside(p - q.p_c) > 0.0) {
    denom += std::pow(p - q.p_c, q.t) * std::sqrt(q.gamma1 / q.gamma0);
  }
  return v + s * (qct / denom);
}

double expansion_defect(double p, const FormulaParams& q, Side side) {
  const double s = std::sqrt(q.gamma0 * q.gamma1);
  const double first = std::sqrt(q.gamma1 / q.gamma0) * (p - q.p_c) / q.p_c;
  if (side == Side::Plus) return std::abs(gamma0_plus(p, q) - s * (1.0 + first)) / s;
  return std::abs(gamma0_minus(p, q) - s * (1.0 - first)) / s;
}

double gamma_3d(double p, const FormulaParams& q) {
  q.validate();
  check_p(p);
  const double c = std::cbrt(q.gamma1 * q.gamma0 * q.gamma0);
  const double pct = std::pow(q.p_c, q.t_prime);
  double v = 0.0;
  double denom = pct;
  if (heaviside(p - q.p_c) > 0.0) v += q.gamma1 * std::pow((p - q.p_c) / (1.0 - q.p_c), q.t);
  if (heaviside(q.p_c - p) > 0.0) {
    denom += std::pow(q.p_c - p, q.t_prime) * std::cbrt(q.gamma1 / q.gamma0);
  }
  return v + c * (pct / denom);
}

std::vector<double> crossing_fractions(std::span<const std::uint64_t> seeds,
                                       std::span<const double> p_grid, GridDims dims,
                                       const Box& box) {
  if (seeds.empty()) throw std::invalid_argument("crossing fractions need at least one seed");
  for (std::size_t k = 1; k < p_grid.size(); ++k) {
    if (!(p_grid[k] > p_grid[k - 1])) throw std::invalid_argument("p grid must be increasing");
  }
  const std::vector<double> targets(p_grid.begin(), p_grid.end());
  std::vector<double> counts(p_grid.size(), 0.0);
  for (std::uint64_t seed : seeds) {
    const GeneratedPath gp = generate_path(seed, box, targets, dims);
    for (std::size_t k = 0; k < targets.size(); ++k) {
      const OccupancyGrid occ = rasterize(gp.at(k), dims);
      if (occupied_crosses_vertically(occ.cells, dims)) counts[k] += 1.0;
    }
  }
  for (double& c : counts) c /= static_cast<double>(seeds.size());
  return counts;
}

CrossingEstimate threshold_from_crossing(std::span<const std::uint64_t> seeds,
                                         std::span<const double> p_grid, GridDims dims,
                                         const Box& box) {
  if (seeds.size() < 5) throw std::invalid_argument("crossing threshold needs at least 5 seeds");
  CrossingEstimate est;
  est.p_grid.assign(p_grid.begin(), p_grid.end());
  est.fractions = crossing_fractions(seeds, p_grid, dims, box);
  const auto& f = est.fractions;
  if (f.empty() || f.front() >= 0.5) {
    throw CrossingRangeError("crossing probability is not below 1/2 at the start of the grid");
  }
  for (std::size_t k = 1; k < f.size(); ++k) {
    if (f[k] >= 0.5) {
      const double w = (0.5 - f[k - 1]) / (f[k] - f[k - 1]);
      est.threshold = p_grid[k - 1] + w * (p_grid[k] - p_grid[k - 1]);
      return est;
    }
  }
  throw CrossingRangeError("crossing probability never reaches 1/2 in the grid");
}

}  // namespace hcperc
