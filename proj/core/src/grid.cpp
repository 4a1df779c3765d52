#include "dvdflow/grid.hpp"

#include <algorithm>
#include <cmath>

namespace dvdflow {

namespace {

void check_grid(int dim, int nx, int ny, double lx, double ly) {
  if (nx < 2 || (dim == 2 && ny < 2))
    throw GridError("grids need at least two cells per axis");
  if (!(lx > 0.0) || (dim == 2 && !(ly > 0.0)))
    throw GridError("domain lengths must be positive");
}

void check_same_grid(const Field& a, const Field& b) {
  if (!(a.grid == b.grid))
    throw GridError("fields live on different grids");
}

// Neighbor index along one axis: wrap for periodic, clamp for Neumann
// reflection (the clamped ghost value equals the boundary cell, which is
// exactly the reflection rule for cell-centered grids).
inline int neighbor(int i, int delta, int n, BoundaryKind bc) {
  int j = i + delta;
  if (bc == BoundaryKind::Periodic) {
    if (j < 0) j += n;
    if (j >= n) j -= n;
  } else {
    j = std::clamp(j, 0, n - 1);
  }
  return j;
}

}  // namespace

UniformGrid make_grid_1d(int nx, double lx, BoundaryKind bc) {
  check_grid(1, nx, 1, lx, 0.0);
  UniformGrid g;
  g.dim = 1;
  g.nx = nx;
  g.ny = 1;
  g.lx = lx;
  g.ly = 0.0;
  g.bc = bc;
  return g;
}

UniformGrid make_grid_2d(int nx, int ny, double lx, double ly,
                         BoundaryKind bc) {
  check_grid(2, nx, ny, lx, ly);
  UniformGrid g;
  g.dim = 2;
  g.nx = nx;
  g.ny = ny;
  g.lx = lx;
  g.ly = ly;
  g.bc = bc;
  return g;
}

void laplacian(const Field& f, Field& out) {
  const UniformGrid& g = f.grid;
  if (!(out.grid == g)) out = Field(g);
  const double inv_dx2 = 1.0 / (g.dx() * g.dx());
  if (g.dim == 1) {
    for (int i = 0; i < g.nx; ++i) {
      const double fm = f[neighbor(i, -1, g.nx, g.bc)];
      const double fp = f[neighbor(i, +1, g.nx, g.bc)];
      out[i] = (fm - 2.0 * f[i] + fp) * inv_dx2;
    }
    return;
  }
  const double inv_dy2 = 1.0 / (g.dy() * g.dy());
  for (int iy = 0; iy < g.ny; ++iy) {
    const int ym = neighbor(iy, -1, g.ny, g.bc);
    const int yp = neighbor(iy, +1, g.ny, g.bc);
    for (int ix = 0; ix < g.nx; ++ix) {
      const int xm = neighbor(ix, -1, g.nx, g.bc);
      const int xp = neighbor(ix, +1, g.nx, g.bc);
      const int c = g.index(ix, iy);
      out[c] = (f[g.index(xm, iy)] - 2.0 * f[c] + f[g.index(xp, iy)]) * inv_dx2 +
               (f[g.index(ix, ym)] - 2.0 * f[c] + f[g.index(ix, yp)]) * inv_dy2;
    }
  }
}

Field laplacian(const Field& f) {
  Field out(f.grid);
  laplacian(f, out);
  return out;
}

double inner_product(const Field& a, const Field& b) {
  check_same_grid(a, b);
  const double w = a.grid.cell_weight();
  double acc = 0.0;
  for (int i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return w * acc;
}

double mass(const Field& f) {
  const double w = f.grid.cell_weight();
  double acc = 0.0;
  for (int i = 0; i < f.size(); ++i) acc += f[i];
  return w * acc;
}

Field gradient_energy_density(const Field& f) {
  const UniformGrid& g = f.grid;
  Field out(g);
  const double inv_dx = 1.0 / g.dx();
  if (g.dim == 1) {
    for (int i = 0; i < g.nx; ++i) {
      const double dp = (f[neighbor(i, +1, g.nx, g.bc)] - f[i]) * inv_dx;
      const double dm = (f[i] - f[neighbor(i, -1, g.nx, g.bc)]) * inv_dx;
      out[i] = 0.5 * (dp * dp + dm * dm);
    }
    return out;
  }
  const double inv_dy = 1.0 / g.dy();
  for (int iy = 0; iy < g.ny; ++iy) {
    const int ym = neighbor(iy, -1, g.ny, g.bc);
    const int yp = neighbor(iy, +1, g.ny, g.bc);
    for (int ix = 0; ix < g.nx; ++ix) {
      const int xm = neighbor(ix, -1, g.nx, g.bc);
      const int xp = neighbor(ix, +1, g.nx, g.bc);
      const int c = g.index(ix, iy);
      const double dpx = (f[g.index(xp, iy)] - f[c]) * inv_dx;
      const double dmx = (f[c] - f[g.index(xm, iy)]) * inv_dx;
      const double dpy = (f[g.index(ix, yp)] - f[c]) * inv_dy;
      const double dmy = (f[c] - f[g.index(ix, ym)]) * inv_dy;
      out[c] = 0.5 * (dpx * dpx + dmx * dmx + dpy * dpy + dmy * dmy);
    }
  }
  return out;
}

double discrete_energy(const Field& f, const FreeEnergy& fe) {
  const Field ged = gradient_energy_density(f);
  const double w = f.grid.cell_weight();
  double acc = 0.0;
  for (int i = 0; i < f.size(); ++i)
    acc += 0.5 * fe.gamma * ged[i] + fe.e1_density(f[i]);
  return w * acc;
}

double sbp_check(const Field& g, const Field& f) {
  check_same_grid(g, f);
  const UniformGrid& gr = f.grid;
  const Field lap = laplacian(f);
  const double w = gr.cell_weight();
  const double inv_dx = 1.0 / gr.dx();

  double bulk = 0.0;
  for (int i = 0; i < f.size(); ++i) bulk += g[i] * lap[i];

  double diff = 0.0;
  if (gr.dim == 1) {
    for (int i = 0; i < gr.nx; ++i) {
      const int xm = neighbor(i, -1, gr.nx, gr.bc);
      const int xp = neighbor(i, +1, gr.nx, gr.bc);
      const double dpf = (f[xp] - f[i]) * inv_dx;
      const double dmf = (f[i] - f[xm]) * inv_dx;
      const double dpg = (g[xp] - g[i]) * inv_dx;
      const double dmg = (g[i] - g[xm]) * inv_dx;
      diff += 0.5 * (dpg * dpf + dmg * dmf);
    }
  } else {
    const double inv_dy = 1.0 / gr.dy();
    for (int iy = 0; iy < gr.ny; ++iy) {
      const int ym = neighbor(iy, -1, gr.ny, gr.bc);
      const int yp = neighbor(iy, +1, gr.ny, gr.bc);
      for (int ix = 0; ix < gr.nx; ++ix) {
        const int xm = neighbor(ix, -1, gr.nx, gr.bc);
        const int xp = neighbor(ix, +1, gr.nx, gr.bc);
        const int c = gr.index(ix, iy);
        const double dpfx = (f[gr.index(xp, iy)] - f[c]) * inv_dx;
        const double dmfx = (f[c] - f[gr.index(xm, iy)]) * inv_dx;
        const double dpgx = (g[gr.index(xp, iy)] - g[c]) * inv_dx;
        const double dmgx = (g[c] - g[gr.index(xm, iy)]) * inv_dx;
        const double dpfy = (f[gr.index(ix, yp)] - f[c]) * inv_dy;
        const double dmfy = (f[c] - f[gr.index(ix, ym)]) * inv_dy;
        const double dpgy = (g[gr.index(ix, yp)] - g[c]) * inv_dy;
        const double dmgy = (g[c] - g[gr.index(ix, ym)]) * inv_dy;
        diff += 0.5 * (dpgx * dpfx + dmgx * dmfx + dpgy * dpfy + dmgy * dmfy);
      }
    }
  }
  return w * (bulk + diff);
}

double weighted_l2_norm(const Field& f) {
  const double w = f.grid.cell_weight();
  double acc = 0.0;
  for (int i = 0; i < f.size(); ++i) acc += f[i] * f[i];
  return std::sqrt(w * acc);
}

double max_norm(const Field& f) {
  double m = 0.0;
  for (int i = 0; i < f.size(); ++i) m = std::max(m, std::abs(f[i]));
  return m;
}

}  // namespace dvdflow
