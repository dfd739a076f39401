//! Stationary measures: the speed function, the infinite-volume kernel and
//! structure functions, and Monte Carlo estimates on burned-in torus fields.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{evolve_seeded, EvolveOptions};
use crate::error::{Error, Result};
use crate::lattice::{gradient_stats, linear_field, HeightField, Region, Winding};
use crate::quad::{integrate, Tolerance};
use crate::seed;

/// A macroscopic slope `(rho1, rho2)` with `rho2` in `[-1, 0]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Slope {
    pub rho1: f64,
    pub rho2: f64,
}

impl Slope {
    pub fn new(rho1: f64, rho2: f64) -> Self {
        Slope { rho1, rho2 }
    }

    pub fn check(&self) -> Result<()> {
        if !self.rho1.is_finite() || !(-1.0..=0.0).contains(&self.rho2) {
            return Err(Error::InvalidArgument(format!(
                "slope {self:?} outside R x [-1, 0]"
            )));
        }
        Ok(())
    }
}

impl From<[f64; 2]> for Slope {
    fn from(r: [f64; 2]) -> Self {
        Slope {
            rho1: r[0],
            rho2: r[1],
        }
    }
}

/// `v(rho) = sqrt(pi^2 rho1^2 + 4 sin^2(pi rho2)) / pi`.
pub fn speed(rho: impl Into<Slope>) -> f64 {
    let r = rho.into();
    let s = (PI * r.rho2).sin();
    (PI * PI * r.rho1 * r.rho1 + 4.0 * s * s).sqrt() / PI
}

/// Parameters of the infinite-volume kernel. The map from the slope to
/// `eta_s`, `eta_a` is not known here, so they are inputs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub eta_s: f64,
    pub eta_a: f64,
    pub rho2: f64,
    pub eta_plus: f64,
    pub eta_minus: f64,
}

impl KernelParams {
    pub fn check(&self) -> Result<()> {
        let ok = self.eta_s > 0.0
            && self.eta_a.is_finite()
            && self.rho2 > -1.0
            && self.rho2 < 0.0
            && self.eta_plus > 0.0
            && self.eta_minus > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "invalid kernel parameters {self:?}"
            )))
        }
    }

    /// Half-width `pi |rho2|` of the occupied band of wavenumbers.
    fn band(&self) -> f64 {
        PI * self.rho2.abs()
    }
}

/// `eps(k) = -eta_s cos k + i eta_a sin k`.
pub fn dispersion(k: f64, p: &KernelParams) -> Complex64 {
    Complex64::new(-p.eta_s * k.cos(), p.eta_a * k.sin())
}

/// Panels so that each carries at most about half an oscillation.
fn panels(len: f64, freq: f64) -> usize {
    ((len * freq / PI).ceil() as usize).clamp(1, 4096)
}

/// `int_a^b exp(x eps(k) + i m k) dk`.
fn branch(x: f64, m: f64, a: f64, b: f64, p: &KernelParams) -> Result<Complex64> {
    let freq = m.abs() + x.abs() * (p.eta_s + p.eta_a.abs()) + 1.0;
    let f = |k: f64| (dispersion(k, p) * x + Complex64::new(0.0, m * k)).exp();
    Ok(integrate(f, a, b, panels(b - a, freq), Tolerance::default())?.0)
}

/// Limit kernel between `(xp, yp)` and `(x, y)`.
pub fn kernel(xp: f64, yp: i64, x: f64, y: i64, p: &KernelParams) -> Result<Complex64> {
    p.check()?;
    let (dx, dy) = (xp - x, (yp - y) as f64);
    let w = p.band();
    if dx >= 0.0 {
        Ok(branch(dx, dy, -w, w, p)? / (2.0 * PI))
    } else {
        Ok(-branch(dx, dy, w, 2.0 * PI - w, p)? / (2.0 * PI))
    }
}

/// Which structure function: antikink pairs (`Plus`) or kink pairs (`Minus`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

/// `S^±(x, y)`, the covariance of step indicators at displacement `(x, y)`.
/// `x = 0` is read as the limit `x -> 0+`.
pub fn structure_function(x: f64, y: i64, p: &KernelParams, sign: Sign) -> Result<f64> {
    Ok(structure_function_complex(x, y, p, sign)?.re)
}

/// The product of the two band integrals before taking the real part; the
/// imaginary part vanishes up to quadrature error.
pub fn structure_function_complex(
    x: f64,
    y: i64,
    p: &KernelParams,
    sign: Sign,
) -> Result<Complex64> {
    p.check()?;
    if x == 0.0 && y == 0 {
        return Err(Error::InvalidArgument(
            "structure function is not defined at the origin".into(),
        ));
    }
    let s = if x < 0.0 { -1.0 } else { 1.0 };
    let (eta, pm) = match sign {
        Sign::Plus => (p.eta_plus, 1.0),
        Sign::Minus => (p.eta_minus, -1.0),
    };
    let m = s * y as f64 + pm;
    let w = p.band();
    let a = branch(x.abs(), m, -w, w, p)?;
    let b = branch(-x.abs(), m, w, 2.0 * PI - w, p)?;
    Ok(a * b * (eta * eta / (4.0 * PI * PI)))
}

/// Burned-in torus fields sharing one slope.
#[derive(Clone, Debug)]
pub struct Ensemble {
    pub requested: [f64; 2],
    pub realized: [f64; 2],
    pub winding: Winding,
    pub torus: (i64, i64),
    pub burn: f64,
    pub fields: Vec<HeightField>,
    /// Step densities (per unit area) at half the burn-in and at its end,
    /// averaged over replicas.
    pub plateau: (f64, f64),
}

/// Evolves the linear field of slope `rho` on the torus for `t_burn`.
pub fn burn_in_stationary(
    rho: [f64; 2],
    torus: (i64, i64),
    t_burn: f64,
    seed: u64,
) -> Result<HeightField> {
    Ok(burn_in(rho, torus, t_burn, seed)?.0)
}

fn step_density(f: &HeightField) -> Result<f64> {
    let st = gradient_stats(f, Region::full(f.domain()))?;
    let (m, n) = match *f.domain() {
        crate::lattice::DomainSpec::Torus { m, n } => (m, n),
        _ => unreachable!("ensembles live on a torus"),
    };
    Ok((st.kinks + st.antikinks) as f64 / (4 * m * n) as f64)
}

fn burn_in(rho: [f64; 2], torus: (i64, i64), t_burn: f64, seed: u64) -> Result<(HeightField, f64)> {
    if !(t_burn >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "burn-in time must be >= 0, got {t_burn}"
        )));
    }
    let lf = linear_field(rho, 1, torus)?;
    if t_burn == 0.0 {
        let d = step_density(&lf.field)?;
        return Ok((lf.field, d));
    }
    let opts = EvolveOptions {
        snapshot_times: vec![t_burn / 2.0],
        record_events: false,
    };
    let tr = evolve_seeded(&lf.field, seed, t_burn, &opts)?;
    let mid = step_density(&tr.snapshots[1].1)?;
    Ok((tr.final_field().clone(), mid))
}

/// Independent burn-ins, replica `r` seeded with `replica_seed(seed, r)`.
pub fn stationary_ensemble(
    rho: [f64; 2],
    torus: (i64, i64),
    t_burn: f64,
    replicas: usize,
    seed: u64,
) -> Result<Ensemble> {
    if replicas == 0 {
        return Err(Error::InvalidArgument("replicas must be positive".into()));
    }
    let lf = linear_field(rho, 1, torus)?;
    let runs: Vec<(HeightField, f64)> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            burn_in(rho, torus, t_burn, seed::replica_seed(seed, r as u64)).map_err(|e| {
                Error::Replica {
                    replica: r,
                    source: Box::new(e),
                }
            })
        })
        .collect::<Result<_>>()?;
    let end: f64 = runs
        .iter()
        .map(|(f, _)| step_density(f))
        .sum::<Result<f64>>()?
        / replicas as f64;
    let mid = runs.iter().map(|(_, d)| d).sum::<f64>() / replicas as f64;
    Ok(Ensemble {
        requested: rho,
        realized: lf.realized,
        winding: lf.field.winding().unwrap(),
        torus,
        burn: t_burn,
        fields: runs.into_iter().map(|(f, _)| f).collect(),
        plateau: (mid, end),
    })
}

/// Height growth at the origin across an ensemble.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GrowthStats {
    pub speed_estimate: f64,
    pub speed_stderr: f64,
    /// Ascending times `T 2^-k`.
    pub times: Vec<f64>,
    pub mean_h: Vec<f64>,
    pub var_h: Vec<f64>,
    pub replicas: usize,
}

/// Number of points in the log time grid of [`measure_growth`].
pub const LOG_GRID: usize = 6;

/// Runs every ensemble field for time `t` with fresh creations and records
/// `h(0, 0, s) - h(0, 0, 0)` on the grid `s = t 2^-k`, `k < LOG_GRID`.
pub fn measure_growth(ens: &Ensemble, t: f64, seed: u64) -> Result<GrowthStats> {
    let n = ens.fields.len();
    if n < 10 {
        return Err(Error::InvalidArgument(format!(
            "growth statistics need at least 10 replicas, got {n}; raise `replicas`"
        )));
    }
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "time must be positive, got {t}"
        )));
    }
    let times: Vec<f64> = (0..LOG_GRID)
        .rev()
        .map(|k| t / f64::powi(2.0, k as i32))
        .collect();
    let opts = EvolveOptions {
        snapshot_times: times[..LOG_GRID - 1].to_vec(),
        record_events: false,
    };
    let rows: Vec<Vec<f64>> = ens
        .fields
        .par_iter()
        .enumerate()
        .map(|(r, f)| {
            let tr = evolve_seeded(
                f,
                seed::child_seed(seed::replica_seed(seed, r as u64), 1),
                t,
                &opts,
            )
            .map_err(|e| Error::Replica {
                replica: r,
                source: Box::new(e),
            })?;
            let h0 = f.eval_ticks(0, 0)?;
            tr.snapshots[1..]
                .iter()
                .map(|(_, s)| Ok((s.eval_ticks(0, 0)? - h0) as f64))
                .collect()
        })
        .collect::<Result<_>>()?;
    let mut mean_h = vec![0.0; LOG_GRID];
    let mut var_h = vec![0.0; LOG_GRID];
    for i in 0..LOG_GRID {
        let (m, v) = mean_var(rows.iter().map(|r| r[i]));
        mean_h[i] = m;
        var_h[i] = v;
    }
    let speed_estimate = mean_h[LOG_GRID - 1] / t;
    let speed_stderr = (var_h[LOG_GRID - 1] / n as f64).sqrt() / t;
    Ok(GrowthStats {
        speed_estimate,
        speed_stderr,
        times,
        mean_h,
        var_h,
        replicas: n,
    })
}

/// Sample mean and unbiased variance.
fn mean_var(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count() as f64;
    let m = xs.clone().sum::<f64>() / n;
    let v = if n > 1.0 {
        xs.map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (m, v)
}

/// Step densities per unit area, averaged over an ensemble.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Densities {
    pub kink: f64,
    pub antikink: f64,
    pub occupation: f64,
}

impl Densities {
    pub fn sum(&self) -> f64 {
        self.kink + self.antikink
    }

    pub fn diff(&self) -> f64 {
        self.antikink - self.kink
    }
}

pub fn densities(ens: &Ensemble) -> Result<Densities> {
    let area = (4 * ens.torus.0 * ens.torus.1) as f64;
    let stats: Vec<_> = ens
        .fields
        .iter()
        .map(|f| gradient_stats(f, Region::full(f.domain())))
        .collect::<Result<_>>()?;
    let n = stats.len() as f64;
    Ok(Densities {
        kink: stats.iter().map(|s| s.kinks as f64).sum::<f64>() / (n * area),
        antikink: stats.iter().map(|s| s.antikinks as f64).sum::<f64>() / (n * area),
        occupation: stats.iter().map(|s| s.occupation).sum::<f64>() / n,
    })
}

/// Step counts in boxes `[x0, x0 + 2R) x {y0, ..., y0 + 2R}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CountStats {
    pub r: i64,
    pub mean_kinks: f64,
    pub var_kinks: f64,
    pub mean_antikinks: f64,
    pub var_antikinks: f64,
    pub samples: usize,
}

/// Mean and variance of kink and antikink counts in boxes of half-size `r`.
/// Every replica contributes all disjoint boxes that fit in its torus cell.
pub fn kink_count_variance(ens: &Ensemble, r: i64) -> Result<CountStats> {
    let (m, n) = ens.torus;
    if r < 1 || 2 * r > 2 * m || 2 * r + 1 > 2 * n {
        return Err(Error::InvalidArgument(format!(
            "box half-size {r} does not fit the torus ({m}, {n})"
        )));
    }
    let mut regions = Vec::new();
    let mut y0 = -n;
    while y0 + 2 * r < n {
        let mut x0 = -m;
        while x0 + 2 * r <= m {
            regions.push(Region {
                x0: x0 as f64,
                x1: (x0 + 2 * r) as f64,
                y0,
                y1: y0 + 2 * r,
            });
            x0 += 2 * r;
        }
        y0 += 2 * r + 1;
    }
    let mut k = Vec::new();
    let mut a = Vec::new();
    for f in &ens.fields {
        for reg in &regions {
            let s = gradient_stats(f, *reg)?;
            k.push(s.kinks as f64);
            a.push(s.antikinks as f64);
        }
    }
    let (mean_kinks, var_kinks) = mean_var(k.iter().copied());
    let (mean_antikinks, var_antikinks) = mean_var(a.iter().copied());
    Ok(CountStats {
        r,
        mean_kinks,
        var_kinks,
        mean_antikinks,
        var_antikinks,
        samples: k.len(),
    })
}

/// Relative spread `(max - min) / max` of the block maxima of `values`,
/// cut into `blocks` consecutive blocks of equal length (a ragged tail is
/// dropped). Used on `|S(x, 0)| x^2`, which oscillates, to compare its
/// envelope across the range.
pub fn envelope_spread(values: &[f64], blocks: usize) -> Result<f64> {
    if blocks == 0 || values.len() < blocks {
        return Err(Error::InvalidArgument(format!(
            "cannot cut {} values into {blocks} blocks",
            values.len()
        )));
    }
    let w = values.len() / blocks;
    let maxima: Vec<f64> = values
        .chunks_exact(w)
        .take(blocks)
        .map(|c| c.iter().copied().fold(0.0, f64::max))
        .collect();
    let hi = maxima.iter().copied().fold(f64::MIN, f64::max);
    let lo = maxima.iter().copied().fold(f64::MAX, f64::min);
    Ok(if hi > 0.0 { (hi - lo) / hi } else { 0.0 })
}
