//! Directed-polymer view of the dynamics.
//!
//! Heights can be recomputed from the initial row and the effective creations
//! alone: `h(x, y, t)` is the best value of `phi(z) + L(z)` over the backward
//! light cone, where `L(z)` is the longest light chain of effective creations
//! inside the light rectangle spanned by `(z, 0)` and `(x, t)`. This module
//! evaluates that formula exactly on tick coordinates and provides the chain
//! tail bounds together with Monte Carlo checks for them.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::lattice::{DomainSpec, HeightField};
use crate::seed;
use crate::ticks::{self, Tick};

/// A finite set of space-time points `(x, t)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PlanarPointSet {
    points: Vec<(f64, f64)>,
}

impl PlanarPointSet {
    /// Duplicates are dropped.
    pub fn new(mut points: Vec<(f64, f64)>) -> Self {
        points.sort_by(|a, b| a.partial_cmp(b).unwrap());
        points.dedup();
        PlanarPointSet { points }
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Points that lie in `r`.
    pub fn restrict(&self, r: &LightRectangle) -> PlanarPointSet {
        PlanarPointSet {
            points: self
                .points
                .iter()
                .copied()
                .filter(|&(x, t)| r.contains(x, t))
                .collect(),
        }
    }
}

/// Longest non-decreasing subsequence in the second coordinate after sorting
/// by `(a, b)`.
fn lis_rotated<T: PartialOrd + Copy>(ab: &mut [(T, T)]) -> usize {
    ab.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let mut tails: Vec<T> = Vec::with_capacity(ab.len());
    for &(_, b) in ab.iter() {
        let i = tails.partition_point(|&e| e <= b);
        if i == tails.len() {
            tails.push(b);
        } else {
            tails[i] = b;
        }
    }
    tails.len()
}

/// Maximal number of points on one light path (`t' - t >= |x' - x|`
/// between consecutive points).
pub fn longest_light_chain(a: &PlanarPointSet) -> usize {
    let mut ab: Vec<(f64, f64)> = a.points.iter().map(|&(x, t)| (t - x, t + x)).collect();
    lis_rotated(&mut ab)
}

/// Same as [`longest_light_chain`] on exact tick coordinates. Duplicates
/// count once.
pub fn longest_light_chain_ticks(points: &[(Tick, Tick)]) -> usize {
    let mut ab: Vec<(Tick, Tick)> = points.iter().map(|&(x, t)| (t - x, t + x)).collect();
    ab.sort_unstable();
    ab.dedup();
    lis_rotated(&mut ab)
}

/// Exponential-time reference used by tests.
pub fn longest_light_chain_brute(a: &PlanarPointSet) -> usize {
    let p = &a.points;
    assert!(p.len() <= 20, "brute force is limited to 20 points");
    let le = |i: usize, j: usize| p[j].1 - p[i].1 >= (p[j].0 - p[i].0).abs();
    let mut best = 0;
    for mask in 0u32..(1 << p.len()) {
        let mut idx: Vec<usize> = (0..p.len()).filter(|&i| mask >> i & 1 == 1).collect();
        idx.sort_by(|&i, &j| {
            p[i].1
                .partial_cmp(&p[j].1)
                .unwrap()
                .then(p[i].0.partial_cmp(&p[j].0).unwrap())
        });
        // Along a light path time is non-decreasing, so sorting by time is the
        // only candidate order up to ties at equal times, which are never
        // comparable unless the points coincide.
        if idx.windows(2).all(|w| le(w[0], w[1])) {
            best = best.max(idx.len());
        }
    }
    best
}

/// The light rectangle with diagonal from `(z, s)` to `(x, t)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LightRectangle {
    pub bottom: (f64, f64),
    pub top: (f64, f64),
}

impl LightRectangle {
    pub fn new(bottom: (f64, f64), top: (f64, f64)) -> Result<Self> {
        let (z, s) = bottom;
        let (x, t) = top;
        if !((x - z).abs() <= t - s) {
            return Err(Error::InvalidArgument(format!(
                "diagonal ({z}, {s}) -> ({x}, {t}) is not timelike"
            )));
        }
        Ok(LightRectangle { bottom, top })
    }

    pub fn contains(&self, u: f64, r: f64) -> bool {
        let (z, s) = self.bottom;
        let (x, t) = self.top;
        (u - x).abs() <= t - r && (u - z).abs() <= r - s
    }

    pub fn area(&self) -> f64 {
        let (z, s) = self.bottom;
        let (x, t) = self.top;
        ((t - s).powi(2) - (x - z).powi(2)) / 2.0
    }

    /// The four corners: bottom, right, top, left.
    pub fn corners(&self) -> [(f64, f64); 4] {
        let (z, s) = self.bottom;
        let (x, t) = self.top;
        // Bottom-right side runs along t = x, bottom-left along t = -x.
        let u = ((t - s) + (x - z)) / 2.0;
        let v = ((t - s) - (x - z)) / 2.0;
        [(z, s), (z + u, s + u), (x, t), (z - v, s + v)]
    }

    /// Longest vertical segment inside the rectangle.
    pub fn vertical_diameter(&self) -> f64 {
        (self.top.1 - self.bottom.1) - (self.top.0 - self.bottom.0).abs()
    }
}

pub fn light_rectangle(p: (f64, f64), q: (f64, f64)) -> Result<LightRectangle> {
    LightRectangle::new(p, q)
}

/// The values and breakpoints of one row, lifted periodically on a torus.
struct RowLift<'a> {
    field: &'a HeightField,
    y: i64,
    period: Option<Tick>,
}

impl<'a> RowLift<'a> {
    fn new(field: &'a HeightField, y: i64) -> Result<Self> {
        let (y0, y1) = field.domain().y_range();
        if y < y0 || y > y1 {
            return Err(Error::OutOfDomain { x: 0.0, y });
        }
        let period = field.domain().is_torus().then(|| {
            let (lo, hi) = field.domain().x_range();
            hi - lo
        });
        Ok(RowLift { field, y, period })
    }

    fn value(&self, z: Tick) -> Result<i64> {
        self.field.eval_ticks(z, self.y)
    }

    /// Images in `[lo, hi]` of a position taken in the fundamental cell.
    fn images(&self, x: Tick, lo: Tick, hi: Tick, out: &mut Vec<Tick>) {
        match self.period {
            Some(p) => {
                let k0 = (lo - x).div_euclid(p);
                let mut k = k0;
                while x + k * p <= hi {
                    if x + k * p >= lo {
                        out.push(x + k * p);
                    }
                    k += 1;
                }
            }
            None => {
                if x >= lo && x <= hi {
                    out.push(x)
                }
            }
        }
    }

    fn steps_in(&self, lo: Tick, hi: Tick) -> Vec<Tick> {
        let mut out = Vec::new();
        for s in self.field.row(self.y).unwrap().steps() {
            self.images(s.x, lo, hi, &mut out);
        }
        out
    }
}

/// Exact polymer height on tick coordinates.
///
/// `effective` holds `(x, t)` pairs of the effective creations of row `y`,
/// positions in the fundamental cell for a torus. Points outside the
/// backward cone of `(x, t)` are ignored.
pub fn variational_height_ticks(
    initial: &HeightField,
    y: i64,
    effective: &[(Tick, Tick)],
    x: Tick,
    t: Tick,
) -> Result<i64> {
    if t < 0 {
        return Err(Error::InvalidArgument(format!(
            "negative time {}",
            ticks::to_f64(t)
        )));
    }
    let row = RowLift::new(initial, y)?;
    let (lo, hi) = (x - t, x + t);
    // Lifted effective points inside the backward cone.
    let mut pts = Vec::new();
    let mut imgs = Vec::new();
    for &(u, r) in effective {
        if r < 0 || r > t {
            continue;
        }
        imgs.clear();
        row.images(u, x - (t - r), x + (t - r), &mut imgs);
        pts.extend(imgs.iter().map(|&v| (v, r)));
    }
    let mut cand = vec![lo, hi];
    cand.extend(row.steps_in(lo, hi));
    for &(u, r) in &pts {
        cand.push((u - r).max(lo));
        cand.push((u + r).min(hi));
    }
    cand.sort_unstable();
    cand.dedup();
    // Both terms are upper semicontinuous and piecewise constant in z with
    // closed plateaus at breakpoints, so the max is attained on `cand`.
    let mut best = i64::MIN;
    let mut inside = Vec::with_capacity(pts.len());
    for &z in &cand {
        inside.clear();
        inside.extend(pts.iter().copied().filter(|&(u, r)| (u - z).abs() <= r));
        let v = row.value(z)? + longest_light_chain_ticks(&inside) as i64;
        best = best.max(v);
    }
    Ok(best)
}

/// Polymer height at a real query point, using the effective creations
/// logged in `traj`.
pub fn variational_height(traj: &Trajectory, x: f64, y: i64, t: f64) -> Result<i64> {
    let t = ticks::to_ticks(t);
    variational_height_ticks(
        &traj.initial,
        y,
        &traj.effective_points(y, t),
        ticks::to_ticks(x),
        t,
    )
}

/// `(x, y, t, simulated, polymer)` with `x`, `t` in ticks.
pub type Mismatch = (Tick, i64, Tick, i64, i64);

/// Compares the simulator with the polymer formula at `queries` uniform
/// random points of a recorded torus trajectory and returns the mismatches.
pub fn oracle_mismatches(traj: &Trajectory, queries: usize, seed: u64) -> Result<Vec<Mismatch>> {
    let (x0, x1) = traj.initial.domain().x_range();
    let (y0, y1) = traj.initial.domain().y_range();
    let mut rng = seed::rng(seed, 0x0ac1e);
    let mut out = Vec::new();
    for _ in 0..queries {
        let x = rng.random_range(x0..x1);
        let y = rng.random_range(y0..=y1);
        let t = rng.random_range(0..=traj.t_end);
        let h = crate::dynamics::height_at_ticks(traj, x, y, t)?;
        let v = variational_height_ticks(&traj.initial, y, &traj.effective_points(y, t), x, t)?;
        if h != v {
            out.push((x, y, t, h, v));
        }
    }
    Ok(out)
}

/// Upper bound on `P(L(omega_y on R) >= k)` for a light rectangle of the
/// given area: `(2 e^2 area / k^2)^k`.
pub fn chain_tail_bound(area: f64, k: u32) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    if !(area >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "area must be >= 0, got {area}"
        )));
    }
    let e2 = std::f64::consts::E.powi(2);
    let k = k as f64;
    Ok((2.0 * e2 * area / (k * k)).powf(k))
}

/// Bound for a chain through `k + 1` prescribed rows in a general domain with
/// area `leb` and vertical diameter `v`: `2 leb (4 e^2 v^2 / k^2)^k`.
pub fn corollary_bound(leb: f64, v: f64, k: u32) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    if !(leb >= 0.0 && v >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need leb, v >= 0, got {leb}, {v}"
        )));
    }
    let e2 = std::f64::consts::E.powi(2);
    let k = k as f64;
    Ok(2.0 * leb * (4.0 * e2 * v * v / (k * k)).powf(k))
}

/// Bounded space-time regions used for chain probabilities.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ChainDomain {
    /// `{(x, s): 0 <= s <= t, |x| <= r + t - s}`.
    Trapezoid {
        r: f64,
        t: f64,
    },
    Light(LightRectangle),
    /// `[x0, x1] x [t0, t1]`.
    Box {
        x0: f64,
        x1: f64,
        t0: f64,
        t1: f64,
    },
}

impl ChainDomain {
    pub fn contains(&self, x: f64, s: f64) -> bool {
        match *self {
            ChainDomain::Trapezoid { r, t } => (0.0..=t).contains(&s) && x.abs() <= r + t - s,
            ChainDomain::Light(l) => l.contains(x, s),
            ChainDomain::Box { x0, x1, t0, t1 } => (x0..=x1).contains(&x) && (t0..=t1).contains(&s),
        }
    }

    pub fn area(&self) -> f64 {
        match *self {
            ChainDomain::Trapezoid { r, t } => 2.0 * r * t + t * t,
            ChainDomain::Light(l) => l.area(),
            ChainDomain::Box { x0, x1, t0, t1 } => (x1 - x0) * (t1 - t0),
        }
    }

    pub fn vertical_diameter(&self) -> f64 {
        match *self {
            ChainDomain::Trapezoid { t, .. } => t,
            ChainDomain::Light(l) => l.vertical_diameter(),
            ChainDomain::Box { t0, t1, .. } => t1 - t0,
        }
    }

    /// `[x0, x1] x [t0, t1]` containing the domain.
    fn bounding_box(&self) -> (f64, f64, f64, f64) {
        match *self {
            ChainDomain::Trapezoid { r, t } => (-(r + t), r + t, 0.0, t),
            ChainDomain::Light(l) => {
                let c = l.corners();
                (c[3].0, c[1].0, c[0].1, c[2].1)
            }
            ChainDomain::Box { x0, x1, t0, t1 } => (x0, x1, t0, t1),
        }
    }

    fn check(&self) -> Result<()> {
        let ok = match *self {
            ChainDomain::Trapezoid { r, t } => r >= 0.0 && t >= 0.0,
            ChainDomain::Light(_) => true,
            ChainDomain::Box { x0, x1, t0, t1 } => x0 <= x1 && t0 <= t1,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "degenerate domain {self:?}"
            )))
        }
    }
}

/// Monte Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub p: f64,
    pub stderr: f64,
    pub replicas: usize,
}

impl Estimate {
    fn from_hits(hits: usize, replicas: usize) -> Self {
        let p = hits as f64 / replicas as f64;
        Estimate {
            p,
            stderr: (p * (1.0 - p) / replicas as f64).sqrt(),
            replicas,
        }
    }
}

/// Poisson points of intensity 2 in `dom`.
fn sample_domain<R: Rng>(dom: &ChainDomain, rng: &mut R) -> Vec<(f64, f64)> {
    let (x0, x1, t0, t1) = dom.bounding_box();
    let mean = 2.0 * (x1 - x0) * (t1 - t0);
    if mean <= 0.0 {
        return Vec::new();
    }
    let n = Poisson::new(mean).unwrap().sample(rng) as usize;
    (0..n)
        .map(|_| {
            (
                x0 + (x1 - x0) * rng.random::<f64>(),
                t0 + (t1 - t0) * rng.random::<f64>(),
            )
        })
        .filter(|&(x, s)| dom.contains(x, s))
        .collect()
}

/// Whether one light path meets the rows in order, taking one distinct point
/// per entry of `rows`.
fn chain_exists(rows: &[i64], sets: &std::collections::HashMap<i64, Vec<(f64, f64)>>) -> bool {
    // reach[j]: point j of the current row's set ends a valid prefix.
    let mut prev: Option<(i64, Vec<bool>)> = None;
    for &y in rows {
        let pts = &sets[&y];
        let reach: Vec<bool> = match &prev {
            None => vec![true; pts.len()],
            Some((py, pr)) => {
                let ppts = &sets[py];
                pts.iter()
                    .enumerate()
                    .map(|(j, &(x, t))| {
                        ppts.iter().enumerate().any(|(i, &(u, r))| {
                            pr[i] && !(*py == y && i == j) && t - r >= (x - u).abs()
                        })
                    })
                    .collect()
            }
        };
        if !reach.iter().any(|&b| b) {
            return false;
        }
        prev = Some((y, reach));
    }
    true
}

/// Monte Carlo estimate of the probability that a light path collects one
/// creation from each row of `rows`, in order, inside `dom`.
pub fn estimate_chain_probability(
    dom: &ChainDomain,
    rows: &[i64],
    replicas: usize,
    seed: u64,
) -> Result<Estimate> {
    if rows.is_empty() {
        return Err(Error::InvalidArgument("row sequence is empty".into()));
    }
    if replicas == 0 {
        return Err(Error::InvalidArgument("replicas must be positive".into()));
    }
    dom.check()?;
    let mut distinct = rows.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    let hits = (0..replicas)
        .into_par_iter()
        .filter(|&r| {
            let mut sets = std::collections::HashMap::new();
            for &y in &distinct {
                let mut rng = seed::row_rng(seed::replica_seed(seed, r as u64), y);
                sets.insert(y, sample_domain(dom, &mut rng));
            }
            chain_exists(rows, &sets)
        })
        .count();
    Ok(Estimate::from_hits(hits, replicas))
}

/// Longest light chain of one Poisson sample (intensity 2) in a light square
/// of the given area.
pub fn sample_lis_light_square<R: Rng>(area: f64, rng: &mut R) -> usize {
    // In rotated coordinates the square is [0, s]^2 with unit density.
    let s = (2.0 * area).sqrt();
    if s <= 0.0 {
        return 0;
    }
    let n = Poisson::new(s * s).unwrap().sample(rng) as usize;
    let mut ab: Vec<(f64, f64)> = (0..n)
        .map(|_| (s * rng.random::<f64>(), s * rng.random::<f64>()))
        .collect();
    lis_rotated(&mut ab)
}

/// One row of a tail table.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TailRow {
    pub k: u32,
    pub empirical: f64,
    pub stderr: f64,
    pub bound: f64,
}

/// Empirical `P(L >= k)` for `k = 1..=kmax` in a light square of area
/// `area`, next to [`chain_tail_bound`].
pub fn lis_tail_table(area: f64, kmax: u32, replicas: usize, seed: u64) -> Result<Vec<TailRow>> {
    if replicas == 0 || !(area >= 0.0) {
        return Err(Error::InvalidArgument(
            "need replicas > 0 and area >= 0".into(),
        ));
    }
    let lens = lis_samples(area, replicas, seed);
    (1..=kmax)
        .map(|k| {
            let e =
                Estimate::from_hits(lens.iter().filter(|&&l| l >= k as usize).count(), replicas);
            Ok(TailRow {
                k,
                empirical: e.p,
                stderr: e.stderr,
                bound: chain_tail_bound(area, k)?,
            })
        })
        .collect()
}

/// Independent longest-chain samples in a light square of area `area`.
pub fn lis_samples(area: f64, replicas: usize, seed: u64) -> Vec<usize> {
    (0..replicas)
        .into_par_iter()
        .map(|r| sample_lis_light_square(area, &mut seed::rng(seed, r as u64)))
        .collect()
}

/// The right-hand side of the rectangle control on height differences in one
/// row: the oscillation of the initial row over windows of width `x2 - x1`
/// plus the longer chain of `creations` (all creations of the row, not only
/// effective ones) in the two side rectangles.
pub fn rectangle_control_bound(
    initial: &HeightField,
    y: i64,
    creations: &[(Tick, Tick)],
    x1: Tick,
    x2: Tick,
    t: Tick,
) -> Result<i64> {
    if x2 < x1 || t < 0 {
        return Err(Error::InvalidArgument("need x1 <= x2 and t >= 0".into()));
    }
    let row = RowLift::new(initial, y)?;
    let (lo, hi) = (x1 - t, x2 + t);
    let w = x2 - x1;
    let steps = row.steps_in(lo, hi);
    // Oscillation over [z, z + w]: enough to start windows at lo and at each
    // step (earlier starts see a subset of the same values).
    let mut osc = 0;
    let mut starts = vec![lo];
    starts.extend(steps.iter().map(|&s| (s - w).max(lo)));
    starts.extend(steps.iter().copied());
    for &z in &starts {
        let end = (z + w).min(hi);
        let mut mn = row.value(z)?;
        let mut mx = mn;
        for &s in steps.iter().filter(|&&s| s > z && s <= end) {
            for v in [
                row.value(s)?,
                row.value(s - 1)?,
                row.value((s + 1).min(end))?,
            ] {
                mn = mn.min(v);
                mx = mx.max(v);
            }
        }
        osc = osc.max(mx - mn);
    }
    let half = w / 2;
    let mid = x1 + half;
    let rect = |bx: Tick, tx: Tick| -> usize {
        // Rectangle from (bx, -half) to (tx, t), with membership in ticks.
        let inside: Vec<(Tick, Tick)> = lifted(&row, creations, lo - half, hi + half)
            .into_iter()
            .filter(|&(u, r)| (u - tx).abs() <= t - r && (u - bx).abs() <= r + half)
            .collect();
        longest_light_chain_ticks(&inside)
    };
    let l1 = rect(mid - t, x1);
    let l2 = rect(mid + t, x2);
    Ok(osc + l1.max(l2) as i64)
}

fn lifted(row: &RowLift, pts: &[(Tick, Tick)], lo: Tick, hi: Tick) -> Vec<(Tick, Tick)> {
    let mut out = Vec::new();
    let mut imgs = Vec::new();
    for &(u, r) in pts {
        imgs.clear();
        row.images(u, lo, hi, &mut imgs);
        out.extend(imgs.iter().map(|&v| (v, r)));
    }
    out
}

/// All creations of row `y` up to time `t` from a recorded trajectory.
pub fn row_creations(traj: &Trajectory, y: i64, t: Tick) -> Vec<(Tick, Tick)> {
    traj.creations()
        .filter(|(c, _)| c.y == y && c.t <= t)
        .map(|(c, _)| (c.x, c.t))
        .collect()
}

/// Torus-or-window sanity check for oracle queries.
pub fn query_in_domain(domain: &DomainSpec, x: f64, y: i64) -> bool {
    let (y0, y1) = domain.y_range();
    if y < y0 || y > y1 {
        return false;
    }
    let (lo, hi) = domain.x_range();
    domain.is_torus() || (lo..hi).contains(&ticks::to_ticks(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{evolve, height_at_ticks, sample_creations, EvolveOptions};
    use crate::lattice::{linear_field, Row, Window};
    use crate::ticks::units;
    use rand::SeedableRng;

    fn set(p: &[(f64, f64)]) -> PlanarPointSet {
        PlanarPointSet::new(p.to_vec())
    }

    #[test]
    fn chain_examples() {
        assert_eq!(longest_light_chain(&set(&[])), 0);
        assert_eq!(longest_light_chain(&set(&[(0.0, 0.0)])), 1);
        assert_eq!(
            longest_light_chain(&set(&[(0.0, 0.0), (0.5, 1.0), (-0.2, 2.0)])),
            3
        );
        assert_eq!(longest_light_chain(&set(&[(0.0, 0.0), (5.0, 1.0)])), 1);
        // Closed cone: light-like separation chains.
        assert_eq!(
            longest_light_chain(&set(&[(0.0, 0.0), (1.0, 1.0), (0.0, 2.0)])),
            3
        );
        assert_eq!(longest_light_chain(&set(&[(0.0, 0.0), (0.0, 0.0)])), 1);
    }

    #[test]
    fn chain_matches_brute_force() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..300 {
            let n = rng.random_range(0..=12);
            let p: Vec<(f64, f64)> = (0..n)
                .map(|_| {
                    (
                        rng.random_range(-4..=4) as f64,
                        rng.random_range(0..=6) as f64,
                    )
                })
                .collect();
            let s = set(&p);
            assert_eq!(
                longest_light_chain(&s),
                longest_light_chain_brute(&s),
                "{p:?}"
            );
        }
    }

    #[test]
    fn rectangle_geometry() {
        let r = light_rectangle((0.0, 0.0), (0.0, 3.0)).unwrap();
        assert_eq!(r.area(), 4.5);
        assert_eq!(r.vertical_diameter(), 3.0);
        assert_eq!(light_rectangle((0.0, 0.0), (2.0, 2.0)).unwrap().area(), 0.0);
        assert!(light_rectangle((0.0, 0.0), (3.0, 2.0)).is_err());
        let r = light_rectangle((1.0, 0.0), (2.0, 3.0)).unwrap();
        let c = r.corners();
        for (u, t) in c {
            assert!(r.contains(u, t));
        }
        assert!(!r.contains(1.0, 3.0));
        assert_eq!(r.vertical_diameter(), 2.0);
    }

    #[test]
    fn rectangle_nesting() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let inner = light_rectangle((0.3, 0.5), (1.0, 3.0)).unwrap();
        let outer = light_rectangle((0.0, 0.0), (1.0, 3.0)).unwrap();
        let top = light_rectangle((0.3, 0.5), (1.5, 4.0)).unwrap();
        for _ in 0..20000 {
            let (u, t) = (rng.random_range(-3.0..4.0), rng.random_range(-1.0..5.0));
            if inner.contains(u, t) {
                assert!(outer.contains(u, t) && top.contains(u, t));
            }
        }
    }

    #[test]
    fn tail_bound_values() {
        assert_eq!(chain_tail_bound(0.0, 3).unwrap(), 0.0);
        let b = chain_tail_bound(1.0, 10).unwrap();
        assert!((b - 4.968091600996245e-9).abs() < 1e-20, "{b}");
        assert!(chain_tail_bound(1.0, 0).is_err());
        let c = corollary_bound(2.0, 1.0, 2).unwrap();
        let e2 = std::f64::consts::E.powi(2);
        assert!((c - 4.0 * e2 * e2).abs() < 1e-9);
    }

    #[test]
    fn flat_row_polymer() {
        let d = DomainSpec::torus(4, 2);
        let f = HeightField::flat(d, 3).unwrap();
        assert_eq!(
            variational_height_ticks(&f, 0, &[], units(1), units(2)).unwrap(),
            3
        );
        let eff = [(units(1), units(1))];
        assert_eq!(
            variational_height_ticks(&f, 0, &eff, units(1) + units(1) / 2, units(2)).unwrap(),
            4
        );
        assert_eq!(
            variational_height_ticks(&f, 0, &eff, units(3), units(2)).unwrap(),
            3
        );
        // A periodic image is seen across the seam.
        assert_eq!(
            variational_height_ticks(&f, 0, &[(-units(4), 0)], units(3), units(2)).unwrap(),
            4
        );
    }

    #[test]
    fn oracle_matches_simulation() {
        for seed in 0..3 {
            let d = DomainSpec::torus(6, 4);
            let f = linear_field([0.25, -0.5], 1, (6, 4)).unwrap().field;
            let w = sample_creations(seed, &d, 4.0).unwrap();
            let tr = evolve(&f, &w, 4.0, &EvolveOptions::recorded(4.0)).unwrap();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..60 {
                let x = rng.random_range(-units(6)..units(6));
                let y = rng.random_range(-4..4);
                let t = rng.random_range(0..=units(4));
                let h = height_at_ticks(&tr, x, y, t).unwrap();
                let v = variational_height_ticks(&f, y, &tr.effective_points(y, t), x, t).unwrap();
                assert_eq!(h, v, "seed {seed} at ({x}, {y}, {t})");
            }
        }
    }

    #[test]
    fn oracle_in_window() {
        let win = Window {
            a: -4.0,
            b: 4.0,
            c: -2,
            d: 2,
            margin: 3.0,
            buffer: 2,
        };
        let d = DomainSpec::Window(win);
        let (y0, y1) = d.y_range();
        let rows = (y0..=y1).map(|y| Row::flat(-y)).collect();
        let f = HeightField::new(d, None, rows).unwrap();
        let w = sample_creations(5, &d, 3.0).unwrap();
        let tr = evolve(&f, &w, 3.0, &EvolveOptions::recorded(3.0)).unwrap();
        for y in -2..=2 {
            for i in 0..20 {
                let x = -units(4) + i * units(8) / 20 + 7;
                let t = units(3) * (i % 4 + 1) / 4;
                let h = height_at_ticks(&tr, x, y, t).unwrap();
                assert_eq!(
                    h,
                    variational_height_ticks(&f, y, &tr.effective_points(y, t), x, t).unwrap()
                );
            }
        }
    }

    #[test]
    fn single_row_void_probability() {
        let dom = ChainDomain::Box {
            x0: 0.0,
            x1: 0.5,
            t0: 0.0,
            t1: 0.5,
        };
        let e = estimate_chain_probability(&dom, &[0], 20000, 1).unwrap();
        let exact = 1.0 - (-0.5f64).exp();
        assert!((e.p - exact).abs() < 4.0 * e.stderr, "{e:?} vs {exact}");
        let zero = ChainDomain::Trapezoid { r: 1.0, t: 0.0 };
        assert_eq!(
            estimate_chain_probability(&zero, &[0, 1], 100, 1)
                .unwrap()
                .p,
            0.0
        );
        assert!(estimate_chain_probability(&dom, &[], 10, 1).is_err());
    }

    #[test]
    fn repeated_row_matches_lis() {
        // Same row k times is the event L >= k.
        let r = light_rectangle((0.0, 0.0), (0.0, 2.0)).unwrap();
        let e = estimate_chain_probability(&ChainDomain::Light(r), &[0, 0, 0], 4000, 2).unwrap();
        let lens = lis_samples(r.area(), 4000, 77);
        let p = lens.iter().filter(|&&l| l >= 3).count() as f64 / 4000.0;
        assert!((e.p - p).abs() < 0.05, "{} vs {p}", e.p);
    }

    #[test]
    fn tail_table_below_bound() {
        let rows = lis_tail_table(1.0, 8, 20000, 4).unwrap();
        for r in rows {
            assert!(r.empirical <= r.bound + 3.0 * r.stderr, "{r:?}");
        }
    }

    #[test]
    fn control_bound_holds() {
        let d = DomainSpec::torus(6, 3);
        let f = linear_field([0.3, -0.5], 1, (6, 3)).unwrap().field;
        let w = sample_creations(21, &d, 3.0).unwrap();
        let tr = evolve(&f, &w, 3.0, &EvolveOptions::recorded(3.0)).unwrap();
        let t = units(3);
        for y in -3..3 {
            let c = row_creations(&tr, y, t);
            for (x1, x2) in [
                (0, units(1)),
                (-units(5), units(2)),
                (units(1), units(1) + 4),
            ] {
                let diff = (height_at_ticks(&tr, x2, y, t).unwrap()
                    - height_at_ticks(&tr, x1, y, t).unwrap())
                .abs();
                assert!(diff <= rectangle_control_bound(&f, y, &c, x1, x2, t).unwrap());
            }
        }
    }
}
