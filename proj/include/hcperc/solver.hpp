#pragma once

// Finite-volume discretization of div(gamma grad u) = 0 on the cell grid and
// a preconditioned conjugate-gradient solve (multigrid V-cycle by default,
// diagonal scaling on request).
//
// Face conductance between neighbouring cells is a mean of their gamma
// values (see FaceRule), scaled by face length over center spacing. Dirichlet edges
// couple each boundary cell to a ghost value half a cell away (conductance
// 2 * gamma_cell * face / spacing). Neumann edges have no exterior coupling.
//
//   OS: u = u0 on the top edge, u = 0 on the bottom edge, left/right insulated.
//   VS: u = u0 on the right edge, u = 0 on the left edge, top/bottom insulated.

#include <cstddef>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <vector>

#include "hcperc/field.hpp"

namespace hcperc {

struct BoundarySpec {
  ProblemType type = ProblemType::OS;
  double u0 = 1.0;
};

enum class Preconditioner { Multigrid, Jacobi };

/// How a face conductance is formed from the two adjacent cell values.
///
/// DualConsistent: harmonic mean for OS and arithmetic mean for VS. Since
/// the VS cell values are gamma0*gamma1 / (OS values), every face satisfies
/// sigma_OS * sigma_VS = gamma0 * gamma1, the discrete counterpart of the
/// pointwise duality between the two problems.
/// Harmonic: harmonic mean for both types.
enum class FaceRule { DualConsistent, Harmonic };

const char* to_string(FaceRule r);
const char* to_string(Preconditioner p);
/// "dual-consistent" or "harmonic".
FaceRule parse_face_rule(const std::string& text);
/// "multigrid" or "jacobi".
Preconditioner parse_preconditioner(const std::string& text);

struct SolverSettings {
  /// Stop when sqrt(r' D^-1 r) <= rel_tolerance * sqrt(b' D^-1 b).
  double rel_tolerance = 1e-8;
  /// 0 selects 50 * max(nx, ny).
  std::size_t max_iterations = 0;
  Preconditioner preconditioner = Preconditioner::Multigrid;
  FaceRule face_rule = FaceRule::DualConsistent;

  std::size_t iteration_limit(GridDims dims) const;
  void validate() const;
};

struct SolverStats {
  std::size_t iterations = 0;
  double final_residual = 0.0;  // relative preconditioned residual
};

struct PotentialField {
  GridDims dims;
  Box box;
  std::vector<double> values;  // row-major from the bottom row
  BoundarySpec bc;
  SolverStats stats;
  FaceRule face_rule = FaceRule::DualConsistent;

  double at(std::size_t i, std::size_t j) const { return values[j * dims.nx + i]; }
};

/// Non-convergence within the iteration limit.
class SolveError : public std::runtime_error {
 public:
  SolveError(const std::string& what, std::vector<double> history)
      : std::runtime_error(what), residual_history_(std::move(history)) {}
  const std::vector<double>& residual_history() const { return residual_history_; }

 private:
  std::vector<double> residual_history_;
};

/// Harmonic mean 2ab/(a+b).
inline double face_conductance(double a, double b) { return 2.0 * a * b / (a + b); }

inline double face_conductance(FaceRule rule, ProblemType type, double a, double b) {
  if (rule == FaceRule::DualConsistent && type == ProblemType::VS) return 0.5 * (a + b);
  return face_conductance(a, b);
}

/// Symmetric positive definite system A u = b of the discretization.
struct LinearSystem {
  GridDims dims;
  double u0 = 1.0;
  std::vector<double> east;        // coupling (i,j)-(i+1,j); zero in the last column
  std::vector<double> north;       // coupling (i,j)-(i,j+1); zero in the top row
  std::vector<double> ghost_high;  // coupling to the u0 ghost; zero off that edge
  std::vector<double> ghost_low;   // coupling to the 0 ghost; zero off that edge
  std::vector<double> diag;
  std::vector<double> rhs;

  void apply(std::span<const double> x, std::span<double> y) const;
  /// u'Au - 2 b'u + sum(ghost_high) u0^2: the discrete energy of u with the
  /// ghost values attached.
  double quadratic_energy(std::span<const double> u) const;
  /// Same energy as a sum of non-negative face terms (no cancellation).
  double face_energy(std::span<const double> u) const;
};

LinearSystem assemble(const ConductivityGrid& grid, const BoundarySpec& bc,
                      FaceRule rule = FaceRule::DualConsistent);

/// Solves from the linear Dirichlet-to-Dirichlet profile unless
/// `initial_guess` is non-empty. Converged means the scaled residual is below
/// the tolerance and, in addition, the inflow/outflow fluxes and the energy
/// u'Au - 2b'u + c agree with each other to the same relative tolerance.
/// Throws SolveError on non-convergence.
PotentialField solve(const ConductivityGrid& grid, const BoundarySpec& bc,
                     const SolverSettings& settings = {},
                     std::span<const double> initial_guess = {});

/// Raw dump (see write_raw_field) with kind "potential" and the boundary
/// type, u0 and solver statistics in the header.
void write_potential_raw(std::ostream& out, const PotentialField& u);
/// 16-bit binary PGM (P5, maxval 65535) of u scaled from [0, u0].
void write_potential_pgm(std::ostream& out, const PotentialField& u);

}  // namespace hcperc
