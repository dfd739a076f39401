//! Viscosity solutions of `u_t = v(grad u)`.
//!
//! Fields are stored as an affine background plus a periodic part on one
//! cell, stepped with a monotone Lax–Friedrichs scheme. A Hopf–Lax formula
//! gives an independent answer for data that depend on `y` only.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equilibrium::{speed, Slope};
use crate::error::{Error, Result};
use crate::lattice::ContinuousProfile;

/// Artificial viscosities and CFL number.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SchemeParams {
    pub sigma_x: f64,
    pub sigma_y: f64,
    pub cfl: f64,
}

impl Default for SchemeParams {
    fn default() -> Self {
        SchemeParams {
            sigma_x: 1.0,
            sigma_y: 2.0,
            cfl: 0.4,
        }
    }
}

/// Lax–Friedrichs flux for `u_t = v(p, q)`. Consistent with `v`, and for
/// `sigma_x >= 1`, `sigma_y >= 2` non-increasing in the backward differences
/// and non-decreasing in the forward ones, so that the explicit update is
/// monotone in the grid values.
pub fn numerical_hamiltonian(pm: f64, pp: f64, qm: f64, qp: f64, s: &SchemeParams) -> f64 {
    speed([0.5 * (pm + pp), 0.5 * (qm + qp)])
        + 0.5 * s.sigma_x * (pp - pm)
        + 0.5 * s.sigma_y * (qp - qm)
}

/// A periodic cell `[x0, x0 + lx) x [y0, y0 + ly)` with `nx x ny` nodes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub x0: f64,
    pub y0: f64,
    pub lx: f64,
    pub ly: f64,
}

impl Grid {
    /// Square-cell grid on `[-l/2, l/2)^2`.
    pub fn centered(n: usize, l: f64) -> Self {
        Grid {
            nx: n,
            ny: n,
            x0: -l / 2.0,
            y0: -l / 2.0,
            lx: l,
            ly: l,
        }
    }

    pub fn dx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        self.ly / self.ny as f64
    }

    fn check(&self) -> Result<()> {
        if self.nx < 3 || self.ny < 3 || !(self.lx > 0.0) || !(self.ly > 0.0) {
            return Err(Error::InvalidArgument(format!("degenerate grid {self:?}")));
        }
        Ok(())
    }
}

/// `u(x, y) = rho . (x, y) + w(x, y)` with `w` periodic on the grid cell.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSolution {
    pub background: Slope,
    pub grid: Grid,
    pub t: f64,
    w: Vec<f64>,
    /// Largest excursion of the discrete `u_y` outside `[-1, 0]` seen so far.
    pub slope_excess: f64,
}

impl GridSolution {
    pub fn periodic_part(&self) -> &[f64] {
        &self.w
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.w[j * self.grid.nx + i]
    }

    /// Value at node `(i, j)`.
    pub fn node(&self, i: usize, j: usize) -> f64 {
        let g = &self.grid;
        let (x, y) = (g.x0 + i as f64 * g.dx(), g.y0 + j as f64 * g.dy());
        self.background.rho1 * x + self.background.rho2 * y + self.at(i, j)
    }

    /// Bilinear interpolation of the periodic part, exact background.
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let g = &self.grid;
        let fx = ((x - g.x0) / g.dx()).rem_euclid(g.nx as f64);
        let fy = ((y - g.y0) / g.dy()).rem_euclid(g.ny as f64);
        let (i, j) = (fx.floor() as usize % g.nx, fy.floor() as usize % g.ny);
        let (a, b) = (fx - fx.floor(), fy - fy.floor());
        let (i1, j1) = ((i + 1) % g.nx, (j + 1) % g.ny);
        let w = (1.0 - a) * (1.0 - b) * self.at(i, j)
            + a * (1.0 - b) * self.at(i1, j)
            + (1.0 - a) * b * self.at(i, j1)
            + a * b * self.at(i1, j1);
        self.background.rho1 * x + self.background.rho2 * y + w
    }

    /// The same solution raised by `c`.
    pub fn shifted(&self, c: f64) -> GridSolution {
        GridSolution {
            w: self.w.iter().map(|v| v + c).collect(),
            ..self.clone()
        }
    }

    /// Replaces the periodic part, e.g. to perturb initial data.
    pub fn with_periodic_part(&self, w: Vec<f64>) -> Result<GridSolution> {
        if w.len() != self.w.len() {
            return Err(Error::InvalidArgument(
                "periodic part has the wrong size".into(),
            ));
        }
        Ok(GridSolution { w, ..self.clone() })
    }
}

/// Samples `f` on the grid cell and extends it with the background slope
/// read off the cell edges. The edge increments must not vary along the
/// edges, otherwise the extension would be discontinuous.
pub fn initial_grid(f: &ContinuousProfile, grid: Grid) -> Result<GridSolution> {
    grid.check()?;
    f.check_admissible()?;
    let (x0, y0, lx, ly) = (grid.x0, grid.y0, grid.lx, grid.ly);
    let rho1 = (f.eval(x0 + lx, y0) - f.eval(x0, y0)) / lx;
    let rho2 = (f.eval(x0, y0 + ly) - f.eval(x0, y0)) / ly;
    for k in 0..=16 {
        let s = k as f64 / 16.0;
        let (x, y) = (x0 + s * lx, y0 + s * ly);
        let ex = f.eval(x0 + lx, y) - f.eval(x0, y) - rho1 * lx;
        let ey = f.eval(x, y0 + ly) - f.eval(x, y0) - rho2 * ly;
        if ex.abs() > 1e-9 * (1.0 + lx) || ey.abs() > 1e-9 * (1.0 + ly) {
            return Err(Error::TorusMismatch(format!(
                "initial datum does not close up on the {lx} x {ly} cell (defect {ex:.3e}, {ey:.3e})"
            )));
        }
    }
    let mut w = Vec::with_capacity(grid.nx * grid.ny);
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let (x, y) = (x0 + i as f64 * grid.dx(), y0 + j as f64 * grid.dy());
            w.push(f.eval(x, y) - rho1 * x - rho2 * y);
        }
    }
    let mut sol = GridSolution {
        background: Slope::new(rho1, rho2),
        grid,
        t: 0.0,
        w,
        slope_excess: 0.0,
    };
    sol.slope_excess = slope_excess(&sol.w, &grid, rho2);
    Ok(sol)
}

fn slope_excess(w: &[f64], g: &Grid, rho2: f64) -> f64 {
    let (nx, ny, dy) = (g.nx, g.ny, g.dy());
    let mut ex: f64 = 0.0;
    for j in 0..ny {
        for i in 0..nx {
            let q = rho2 + (w[(j + 1) % ny * nx + i] - w[j * nx + i]) / dy;
            ex = ex.max(q).max(-1.0 - q);
        }
    }
    ex
}

/// Time step used for `grid`: the CFL step, shortened so that whole steps
/// land on `t`.
pub fn time_step(grid: &Grid, t: f64, p: &SchemeParams) -> Result<(f64, usize)> {
    let (dx, dy) = (grid.dx(), grid.dy());
    let dt = p.cfl * dx.min(dy) / (p.sigma_x + p.sigma_y);
    if !(dt > 0.0) || dt * (p.sigma_x / dx + p.sigma_y / dy) > 1.0 {
        return Err(Error::InvalidArgument(format!(
            "CFL condition violated by scheme {p:?}"
        )));
    }
    if p.sigma_x < 1.0 || p.sigma_y < 2.0 {
        return Err(Error::InvalidArgument(format!(
            "viscosities {p:?} are below the Lipschitz bounds (1, 2) of the speed"
        )));
    }
    let steps = (t / dt).ceil().max(1.0) as usize;
    Ok((t / steps as f64, steps))
}

/// Evolves `sol` for an additional time `t`.
pub fn advance(sol: &GridSolution, t: f64, p: &SchemeParams) -> Result<GridSolution> {
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "time must be >= 0, got {t}"
        )));
    }
    if t == 0.0 {
        return Ok(sol.clone());
    }
    let g = sol.grid;
    let (dt, steps) = time_step(&g, t, p)?;
    let (nx, ny, dx, dy) = (g.nx, g.ny, g.dx(), g.dy());
    let Slope { rho1, rho2 } = sol.background;
    let mut cur = sol.w.clone();
    let mut next = vec![0.0; cur.len()];
    let mut out = sol.clone();
    for _ in 0..steps {
        next.par_chunks_mut(nx).enumerate().for_each(|(j, row)| {
            let (jm, jp) = ((j + ny - 1) % ny, (j + 1) % ny);
            for (i, o) in row.iter_mut().enumerate() {
                let (im, ip) = ((i + nx - 1) % nx, (i + 1) % nx);
                let c = cur[j * nx + i];
                let pm = rho1 + (c - cur[j * nx + im]) / dx;
                let pp = rho1 + (cur[j * nx + ip] - c) / dx;
                let qm = rho2 + (c - cur[jm * nx + i]) / dy;
                let qp = rho2 + (cur[jp * nx + i] - c) / dy;
                *o = c + dt * numerical_hamiltonian(pm, pp, qm, qp, p);
            }
        });
        std::mem::swap(&mut cur, &mut next);
        out.slope_excess = out.slope_excess.max(slope_excess(&cur, &g, rho2));
    }
    out.w = cur;
    out.t = sol.t + t;
    Ok(out)
}

/// `u(., ., t)` for the initial datum `f` on `grid`.
pub fn solve(f: &ContinuousProfile, t: f64, grid: Grid, p: &SchemeParams) -> Result<GridSolution> {
    advance(&initial_grid(f, grid)?, t, p)
}

/// The `rho1 = 0` slice of the speed, `(2/pi) |sin(pi q)|`, concave on
/// `[-1, 0]`.
pub fn slice_speed(q: f64) -> f64 {
    speed([0.0, q])
}

const GOLD: f64 = 0.618_033_988_749_894_9;

/// Maximizer of a unimodal `f` on `[a, b]` by golden-section search.
fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let mut c = b - GOLD * (b - a);
    let mut d = a + GOLD * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - GOLD * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + GOLD * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// `L(w) = max_{q in [-1, 0]} (w q + vhat(q))`, the conjugate that enters the
/// Hopf–Lax formula.
pub fn lagrangian(w: f64) -> f64 {
    // The objective is concave on [-1, 0], so golden section finds the max.
    let h = |q: f64| w * q + slice_speed(q);
    let q = golden_max(h, -1.0, 0.0, 1e-12);
    h(q).max(h(-1.0)).max(h(0.0))
}

/// Hopf–Lax value `inf_z { g(z) + t L((y - z) / t) }` for data `g` that
/// depend on `y` only.
pub fn hopf_lax_1d(g: &ContinuousProfile, y: f64, t: f64) -> Result<f64> {
    if !g.is_y_only() {
        return Err(Error::InvalidArgument(
            "Hopf-Lax oracle needs data that depend on y only".into(),
        ));
    }
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "time must be >= 0, got {t}"
        )));
    }
    let gy = |z: f64| g.eval(0.0, z);
    if t == 0.0 {
        return Ok(gy(y));
    }
    // Minimizers satisfy |y - z| <= t sup|vhat'| = 2t.
    let obj = |z: f64| gy(z) + t * lagrangian((y - z) / t);
    const N: usize = 400;
    let (lo, hi) = (y - 2.0 * t, y + 2.0 * t);
    let h = (hi - lo) / N as f64;
    let (mut best, mut zb) = (f64::INFINITY, y);
    for k in 0..=N {
        let z = lo + k as f64 * h;
        let v = obj(z);
        if v < best {
            best = v;
            zb = z;
        }
    }
    let z = golden_max(|z| -obj(z), (zb - h).max(lo), (zb + h).min(hi), 1e-10);
    Ok(obj(z).min(best))
}
