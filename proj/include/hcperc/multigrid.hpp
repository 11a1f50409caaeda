#pragma once

#include <span>
#include <vector>

#include "hcperc/solver.hpp"

namespace hcperc {

// Symmetric V-cycle used as a conjugate-gradient preconditioner. Coarse
// levels aggregate 2x2 blocks of cells; the coarse operator is the Galerkin
// product P'AP for piecewise-constant P, which keeps the 5-point structure
// (coarse face coupling = sum of the fine couplings crossing it). One forward
// Gauss-Seidel sweep before and one backward sweep after the coarse
// correction make the cycle symmetric; the coarse correction is scaled by a
// fixed weight. The coarsest level is factored
// densely.
class MultigridPreconditioner {
 public:
  explicit MultigridPreconditioner(const LinearSystem& fine);

  /// z = M^-1 r.
  void apply(std::span<const double> r, std::span<double> z) const;

  std::size_t levels() const { return levels_.size(); }

 private:
  struct Level {
    GridDims dims;
    std::vector<double> east, north, diag, inv_diag;
    mutable std::vector<double> x, b, r;
  };

  void cycle(std::size_t l) const;
  void smooth_forward(const Level& lv) const;
  void smooth_backward(const Level& lv) const;
  void residual(const Level& lv) const;
  void coarse_solve(const Level& lv) const;

  std::vector<Level> levels_;
  std::vector<double> chol_;  // dense Cholesky factor of the coarsest level
};

}  // namespace hcperc
