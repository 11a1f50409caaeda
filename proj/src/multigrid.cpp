#include "hcperc/multigrid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hcperc {

namespace {

constexpr std::size_t kCoarsestCells = 64;
// Piecewise-constant prolongation under-corrects smooth error; scaling the
// coarse correction compensates (tuned on gamma0 = 1e-4 Boolean fields).
constexpr double kCoarseCorrectionWeight = 1.8;

}  // namespace

MultigridPreconditioner::MultigridPreconditioner(const LinearSystem& fine) {
  Level top;
  top.dims = fine.dims;
  top.east = fine.east;
  top.north = fine.north;
  top.diag = fine.diag;
  levels_.push_back(std::move(top));

  while (levels_.back().dims.cells() > kCoarsestCells &&
         levels_.back().dims.nx > 1 && levels_.back().dims.ny > 1) {
    const Level& f = levels_.back();
    const std::size_t fnx = f.dims.nx, fny = f.dims.ny;
    Level c;
    c.dims = {(fnx + 1) / 2, (fny + 1) / 2};
    const std::size_t cnx = c.dims.nx, n = c.dims.cells();
    c.east.assign(n, 0.0);
    c.north.assign(n, 0.0);
    c.diag.assign(n, 0.0);
    // Fine diagonal minus internal couplings leaves each aggregate's
    // external coupling plus its Dirichlet ghosts.
    for (std::size_t j = 0; j < fny; ++j) {
      for (std::size_t i = 0; i < fnx; ++i) {
        const std::size_t k = j * fnx + i;
        const std::size_t K = (j / 2) * cnx + i / 2;
        c.diag[K] += f.diag[k];
        if (i + 1 < fnx) {
          if ((i + 1) / 2 == i / 2) {
            c.diag[K] -= 2.0 * f.east[k];
          } else {
            c.east[K] += f.east[k];
          }
        }
        if (j + 1 < fny) {
          if ((j + 1) / 2 == j / 2) {
            c.diag[K] -= 2.0 * f.north[k];
          } else {
            c.north[K] += f.north[k];
          }
        }
      }
    }
    levels_.push_back(std::move(c));
  }
  for (auto& lv : levels_) {
    lv.inv_diag.resize(lv.diag.size());
    for (std::size_t k = 0; k < lv.diag.size(); ++k) lv.inv_diag[k] = 1.0 / lv.diag[k];
    lv.x.assign(lv.dims.cells(), 0.0);
    lv.b.assign(lv.dims.cells(), 0.0);
    lv.r.assign(lv.dims.cells(), 0.0);
  }

  // Dense Cholesky of the coarsest operator.
  const Level& c = levels_.back();
  const std::size_t n = c.dims.cells(), nx = c.dims.nx;
  chol_.assign(n * n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    chol_[k * n + k] = c.diag[k];
    if ((k % nx) + 1 < nx) {
      chol_[k * n + k + 1] = chol_[(k + 1) * n + k] = -c.east[k];
    }
    if (k + nx < n) {
      chol_[k * n + k + nx] = chol_[(k + nx) * n + k] = -c.north[k];
    }
  }
  for (std::size_t j = 0; j < n; ++j) {
    double d = chol_[j * n + j];
    for (std::size_t m = 0; m < j; ++m) d -= chol_[j * n + m] * chol_[j * n + m];
    if (!(d > 0.0)) throw std::runtime_error("coarse operator is not positive definite");
    d = std::sqrt(d);
    chol_[j * n + j] = d;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = chol_[i * n + j];
      for (std::size_t m = 0; m < j; ++m) s -= chol_[i * n + m] * chol_[j * n + m];
      chol_[i * n + j] = s / d;
    }
  }
}

void MultigridPreconditioner::apply(std::span<const double> r, std::span<double> z) const {
  const Level& top = levels_.front();
  std::copy(r.begin(), r.end(), top.b.begin());
  cycle(0);
  std::copy(top.x.begin(), top.x.end(), z.begin());
}

namespace {

// Pointers into one grid row and its vertical neighbours.
struct RowView {
  const double* east;
  const double* north_up;    // couplings to the row above, or null
  const double* north_down;  // couplings from the row below, or null
  const double* x_up;
  const double* x_down;
};

inline RowView row_view(const std::vector<double>& east, const std::vector<double>& north,
                        const std::vector<double>& x, std::size_t nx, std::size_t ny,
                        std::size_t j) {
  const std::size_t row = j * nx;
  return {east.data() + row,
          j + 1 < ny ? north.data() + row : nullptr,
          j > 0 ? north.data() + row - nx : nullptr,
          j + 1 < ny ? x.data() + row + nx : nullptr,
          j > 0 ? x.data() + row - nx : nullptr};
}

}  // namespace

void MultigridPreconditioner::smooth_forward(const Level& lv) const {
  const std::size_t nx = lv.dims.nx, ny = lv.dims.ny;
  for (std::size_t j = 0; j < ny; ++j) {
    const RowView v = row_view(lv.east, lv.north, lv.x, nx, ny, j);
    double* x = lv.x.data() + j * nx;
    const double* b = lv.b.data() + j * nx;
    const double* d = lv.inv_diag.data() + j * nx;
    const double* e = v.east;
    // Vertical contributions first (rows above/below are not touched here).
    double* t = lv.r.data() + j * nx;
    for (std::size_t i = 0; i < nx; ++i) t[i] = b[i];
    if (v.north_up) for (std::size_t i = 0; i < nx; ++i) t[i] += v.north_up[i] * v.x_up[i];
    if (v.north_down) for (std::size_t i = 0; i < nx; ++i) t[i] += v.north_down[i] * v.x_down[i];
    double left = 0.0;  // e[i-1] * x[i-1] with the updated value
    for (std::size_t i = 0; i + 1 < nx; ++i) {
      const double xi = (t[i] + left + e[i] * x[i + 1]) * d[i];
      x[i] = xi;
      left = e[i] * xi;
    }
    x[nx - 1] = (t[nx - 1] + left) * d[nx - 1];
  }
}

void MultigridPreconditioner::smooth_backward(const Level& lv) const {
  const std::size_t nx = lv.dims.nx, ny = lv.dims.ny;
  for (std::size_t j = ny; j-- > 0;) {
    const RowView v = row_view(lv.east, lv.north, lv.x, nx, ny, j);
    double* x = lv.x.data() + j * nx;
    const double* b = lv.b.data() + j * nx;
    const double* d = lv.inv_diag.data() + j * nx;
    const double* e = v.east;
    double* t = lv.r.data() + j * nx;
    for (std::size_t i = 0; i < nx; ++i) t[i] = b[i];
    if (v.north_up) for (std::size_t i = 0; i < nx; ++i) t[i] += v.north_up[i] * v.x_up[i];
    if (v.north_down) for (std::size_t i = 0; i < nx; ++i) t[i] += v.north_down[i] * v.x_down[i];
    double right = 0.0;  // e[i] * x[i+1] with the updated value
    for (std::size_t i = nx - 1; i > 0; --i) {
      const double xi = (t[i] + right + e[i - 1] * x[i - 1]) * d[i];
      x[i] = xi;
      right = e[i - 1] * xi;
    }
    x[0] = (t[0] + right) * d[0];
  }
}

void MultigridPreconditioner::residual(const Level& lv) const {
  const std::size_t nx = lv.dims.nx, ny = lv.dims.ny;
  for (std::size_t j = 0; j < ny; ++j) {
    const RowView v = row_view(lv.east, lv.north, lv.x, nx, ny, j);
    const double* x = lv.x.data() + j * nx;
    const double* b = lv.b.data() + j * nx;
    const double* d = lv.diag.data() + j * nx;
    const double* e = v.east;
    double* r = lv.r.data() + j * nx;
    for (std::size_t i = 0; i < nx; ++i) r[i] = b[i] - d[i] * x[i];
    for (std::size_t i = 0; i + 1 < nx; ++i) r[i] += e[i] * x[i + 1];
    for (std::size_t i = 1; i < nx; ++i) r[i] += e[i - 1] * x[i - 1];
    if (v.north_up) for (std::size_t i = 0; i < nx; ++i) r[i] += v.north_up[i] * v.x_up[i];
    if (v.north_down) for (std::size_t i = 0; i < nx; ++i) r[i] += v.north_down[i] * v.x_down[i];
  }
}

void MultigridPreconditioner::coarse_solve(const Level& lv) const {
  const std::size_t n = lv.dims.cells();
  auto& x = lv.x;
  for (std::size_t i = 0; i < n; ++i) {
    double s = lv.b[i];
    for (std::size_t m = 0; m < i; ++m) s -= chol_[i * n + m] * x[m];
    x[i] = s / chol_[i * n + i];
  }
  for (std::size_t i = n; i-- > 0;) {
    double s = x[i];
    for (std::size_t m = i + 1; m < n; ++m) s -= chol_[m * n + i] * x[m];
    x[i] = s / chol_[i * n + i];
  }
}

void MultigridPreconditioner::cycle(std::size_t l) const {
  const Level& lv = levels_[l];
  if (l + 1 == levels_.size()) {
    coarse_solve(lv);
    return;
  }
  std::fill(lv.x.begin(), lv.x.end(), 0.0);
  smooth_forward(lv);
  residual(lv);

  const Level& c = levels_[l + 1];
  const std::size_t nx = lv.dims.nx, ny = lv.dims.ny, cnx = c.dims.nx;
  std::fill(c.b.begin(), c.b.end(), 0.0);
  for (std::size_t j = 0; j < ny; ++j) {
    for (std::size_t i = 0; i < nx; ++i) c.b[(j / 2) * cnx + i / 2] += lv.r[j * nx + i];
  }
  cycle(l + 1);
  for (std::size_t j = 0; j < ny; ++j) {
    for (std::size_t i = 0; i < nx; ++i) {
      lv.x[j * nx + i] += kCoarseCorrectionWeight * c.x[(j / 2) * cnx + i / 2];
    }
  }
  smooth_backward(lv);
}

}  // namespace hcperc
