#pragma once

// Quantities measured on solved potentials: total conductivity, energy,
// duality diagnostics, the complex potential's Beltrami coefficient and the
// dilute-cylinder flow.

#include <complex>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hcperc/field.hpp"
#include "hcperc/solver.hpp"

namespace hcperc {

/// Boundary fluxes per unit applied potential. `inflow` is measured on the
/// u0 edge (top for OS, right for VS), `outflow` on the grounded edge.
struct ConductanceMeasurement {
  double gamma_total = 0.0;  // mean of inflow and outflow
  double gamma_in = 0.0;
  double gamma_out = 0.0;

  /// |in - out| / mean: vanishes for an exactly converged solve.
  double conservation_gap() const;
};

ConductanceMeasurement total_conductivity(const PotentialField& u, const ConductivityGrid& grid);

/// Face-conductance-weighted sum of squared potential differences, ghost
/// faces included. Equals u0^2 * Gamma at convergence.
double energy(const PotentialField& u, const ConductivityGrid& grid);

struct ConductivitySample {
  std::uint64_t seed = 0;
  ProblemType type = ProblemType::OS;
  GridDims dims;
  double r_cells = 0.0;
  double p_target = 0.0;
  double p_achieved = 0.0;
  double gamma0 = 0.0;
  double gamma1 = 0.0;
  double gamma_total = 0.0;
  double gamma_in = 0.0;
  double gamma_out = 0.0;
  double energy = 0.0;
  std::size_t iterations = 0;
  double residual = 0.0;

  /// h = Gamma / sqrt(gamma0 gamma1).
  double h() const;
};

/// Rasterize -> conductivity field -> solve -> measure.
ConductivitySample measure_sample(const OccupancyGrid& occ, ProblemType type, double gamma0,
                                  double gamma1, const SolverSettings& settings,
                                  std::uint64_t seed = 0, double p_target = 0.0,
                                  double u0 = 1.0);

/// Fixed column order of the sample CSV.
inline constexpr const char* kSampleCsvHeader =
    "seed,type,dims_x,dims_y,r_cells,p_target,p_achieved,gamma0,gamma1,gamma_total,"
    "gamma_in,gamma_out,energy,iterations,residual";

/// One row in kSampleCsvHeader order, without the line terminator.
void write_sample_csv_row(std::ostream& out, const ConductivitySample& s);
/// Parses one row in kSampleCsvHeader order.
ConductivitySample parse_sample_csv_row(const std::string& line);
std::vector<ConductivitySample> read_samples_csv(std::istream& in);
/// JSON object with the CSV column names as keys.
std::string sample_to_json(const ConductivitySample& s);

struct Reciprocity {
  double gamma_plus = 0.0;   // OS
  double gamma_minus = 0.0;  // VS
  double defect = 0.0;       // gamma_plus * gamma_minus / (gamma0 gamma1) - 1
};

Reciprocity reciprocity(const OccupancyGrid& occ, double gamma0, double gamma1,
                        const SolverSettings& settings);
double reciprocity_defect(const OccupancyGrid& occ, double gamma0, double gamma1,
                          const SolverSettings& settings);

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

/// Cell-centered gradient of u by centered differences (one-sided on the
/// outermost cells).
std::vector<Vec2> centered_gradient(const PotentialField& u);

/// sqrt(sum (g+ . g-)^2) / sqrt(sum |g+|^2 |g-|^2) over all cells, with g+
/// and g- the centered gradients of the OS and VS potentials. Zero when the
/// two gradient fields are orthogonal everywhere.
double gradient_orthogonality(const PotentialField& u_os, const PotentialField& u_vs);

/// psi = vs_scale * u_VS + i u_OS and the conjugation weight
/// gamma~ = alpha * gamma_OS it is meant to satisfy:
///   d/dx (vs_scale u_VS) = gamma~ d/dy u_OS,
///   d/dy (vs_scale u_VS) = -gamma~ d/dx u_OS.
struct BeltramiNormalization {
  double alpha = 1.0;
  double vs_scale = 1.0;
};

/// The unique vs_scale making the rescaled pair conjugate for a given alpha:
/// alpha * Gamma+ * u0_os / u0_vs.
BeltramiNormalization conjugate_normalization(double alpha, double gamma_plus, double u0_os,
                                              double u0_vs);
/// alpha = 1/gamma0: the Beltrami coefficient vanishes off the occupied set.
BeltramiNormalization plus_normalization(double gamma_plus, double gamma0, double u0_os = 1.0,
                                         double u0_vs = 1.0);
/// alpha = 1/gamma1: the Beltrami coefficient vanishes on the occupied set.
BeltramiNormalization minus_normalization(double gamma_plus, double gamma1, double u0_os = 1.0,
                                          double u0_vs = 1.0);

struct BeltramiField {
  GridDims dims;
  std::vector<std::complex<double>> mu;  // dbar(psi) / conj(d psi)
  std::vector<std::uint8_t> valid;       // 0 where |d psi| is negligible
  BeltramiNormalization normalization;
};

BeltramiField beltrami_field(const PotentialField& u_os, const PotentialField& u_vs,
                             BeltramiNormalization normalization);

struct PhaseStatistics {
  double mean_abs_occupied = 0.0;
  double mean_abs_vacant = 0.0;
  double max_abs = 0.0;
  std::size_t occupied_cells = 0;
  std::size_t vacant_cells = 0;
  std::size_t excluded_cells = 0;
};

PhaseStatistics beltrami_statistics(const BeltramiField& field, const OccupancyGrid& occ);

/// Relative L2 residual of the conjugate relations, split by phase.
struct ConjugateResidual {
  double occupied = 0.0;
  double vacant = 0.0;
};

ConjugateResidual conjugate_residual(const PotentialField& u_os, const PotentialField& u_vs,
                                     const ConductivityGrid& os_grid,
                                     BeltramiNormalization normalization);

/// (u0 / L) (z + sum rho^2 / (z - z_i)): uniform flow past dilute cylinders.
/// Throws std::domain_error when z coincides with a center.
std::complex<double> cylinder_flow(std::complex<double> z,
                                   std::span<const std::complex<double>> centers, double rho,
                                   double u0, double half_width);

}  // namespace hcperc
