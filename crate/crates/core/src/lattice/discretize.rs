//! From continuous profiles to lattice fields.
//!
//! Each row runs an integer "play" operator on `g(x) = n f(x/n, y/n)`: the
//! value stays put until `g` reaches the current value plus or minus one,
//! then jumps to `g` there. On a window the construction starts at `x = 0`
//! from `floor(g(0))` and is mirrored for `x < 0`. On a torus it starts at the
//! first point where `g` is an integer; the play operator is pinned to `g`
//! at such points, so this is the periodic orbit of the same construction.

use super::{validate, DomainSpec, HeightField, Row, Step, StepKind, Winding};
use crate::error::{Error, Result};
use crate::lattice::ContinuousProfile;
use crate::ticks::{self, Tick};

/// Smallest marching step in microscopic units.
const H_MIN: f64 = 1e-7;

/// First `x` in `(x0, x_end]` with `g(x) <= lo` or `g(x) >= hi`, assuming
/// `lo < g(x0) < hi` and `|g'| <= lip`.
fn first_exit(
    g: &dyn Fn(f64) -> f64,
    lip: f64,
    x0: f64,
    x_end: f64,
    lo: f64,
    hi: f64,
) -> Option<f64> {
    if lip <= 0.0 || x0 >= x_end {
        return None;
    }
    let outside = |v: f64| v <= lo || v >= hi;
    let mut x = x0;
    loop {
        let v = g(x);
        let d = (v - lo).min(hi - v);
        let mut next = x + (d / lip).max(H_MIN);
        if next >= x_end {
            next = x_end;
        }
        if outside(g(next)) {
            let (mut a, mut b) = (x, next);
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if m <= a || m >= b {
                    break;
                }
                if outside(g(m)) {
                    b = m;
                } else {
                    a = m;
                }
            }
            return Some(b);
        }
        if next >= x_end {
            return None;
        }
        x = next;
    }
}

/// Jumps of the play operator on `(x0, x_end]`, starting from `phi`.
fn play(g: &dyn Fn(f64) -> f64, lip: f64, x0: f64, mut phi: i64, x_end: f64) -> Vec<(f64, bool)> {
    let mut out = Vec::new();
    let mut x = x0;
    while let Some(xn) = first_exit(g, lip, x, x_end, phi as f64 - 1.0, phi as f64 + 1.0) {
        let up = g(xn) > phi as f64;
        phi += if up { 1 } else { -1 };
        out.push((xn, up));
        x = xn;
    }
    out
}

/// Quantizes positions and resolves ties created by rounding: an antikink
/// followed by a kink on the same tick is a one-point terrace; a kink
/// followed by an antikink cancels.
fn to_steps(raw: &mut [(Tick, StepKind)]) -> Vec<Step> {
    raw.sort_by_key(|s| s.0);
    let mut out: Vec<Step> = Vec::with_capacity(raw.len());
    for &(x, kind) in raw.iter() {
        if let Some(last) = out.last() {
            if last.x == x && last.kind == StepKind::Kink && kind == StepKind::Antikink {
                out.pop();
                continue;
            }
        }
        out.push(Step { x, kind });
    }
    out.sort();
    out
}

fn window_row(g: &dyn Fn(f64) -> f64, lip: f64, lo: Tick, hi: Tick) -> Row {
    let g0 = g(0.0);
    let phi0 = g0.floor() as i64;
    let mut raw: Vec<(Tick, StepKind)> = Vec::new();
    let (xlo, xhi) = (ticks::to_f64(lo), ticks::to_f64(hi));
    if xhi > 0.0 {
        for (x, up) in play(g, lip, 0.0, phi0, xhi) {
            raw.push((
                ticks::to_even_ticks(x),
                if up {
                    StepKind::Antikink
                } else {
                    StepKind::Kink
                },
            ));
        }
    }
    if xlo < 0.0 {
        let gm = |s: f64| g(-s);
        for (s, up) in play(&gm, lip, 0.0, phi0, -xlo) {
            // Moving left the value rises, so going right it drops: a kink.
            raw.push((
                ticks::to_even_ticks(-s),
                if up {
                    StepKind::Kink
                } else {
                    StepKind::Antikink
                },
            ));
        }
    }
    let all = to_steps(&mut raw);
    let anchor = if lo <= 0 {
        phi0 - all
            .iter()
            .filter(|s| s.x >= lo && s.x < 0)
            .map(|s| s.kind.delta())
            .sum::<i64>()
    } else {
        phi0 + all
            .iter()
            .filter(|s| s.x >= 0 && s.x < lo)
            .map(|s| s.kind.delta())
            .sum::<i64>()
    };
    Row::new(
        all.into_iter().filter(|s| s.x >= lo && s.x < hi).collect(),
        anchor,
    )
}

fn near_int(v: f64, tol: f64) -> Option<i64> {
    let r = v.round();
    ((v - r).abs() <= tol).then_some(r as i64)
}

fn torus_row(g: &dyn Fn(f64) -> f64, lip: f64, m: i64, p: i64) -> Result<Row> {
    let mf = m as f64;
    let c0 = g(-mf);
    let start = match near_int(c0, 1e-12) {
        Some(k) => Some((-mf, k)),
        None => {
            first_exit(g, lip, -mf, mf, c0.floor(), c0.ceil()).map(|x| (x, g(x).round() as i64))
        }
    };
    let Some((xs, phis)) = start else {
        if p != 0 {
            return Err(Error::TorusMismatch(
                "row with nonzero winding never reaches an integer".into(),
            ));
        }
        return Ok(Row::flat(c0.floor() as i64));
    };
    // The state is pinned at xs. Run two periods and read one full period
    // off [M, 3M), which lies strictly after xs and so is fully determined.
    let (lo, hi) = (ticks::units(m), ticks::units(3 * m));
    let period = ticks::units(2 * m);
    let mut raw = Vec::new();
    let mut state = phis;
    for (x, up) in play(g, lip, xs, phis, xs + 4.0 * mf) {
        let kind = if up {
            StepKind::Antikink
        } else {
            StepKind::Kink
        };
        let t = ticks::to_even_ticks(x);
        if t >= hi {
            break;
        }
        state += kind.delta();
        if t >= lo {
            raw.push((t - period, kind));
        }
    }
    let steps = to_steps(&mut raw);
    // `state` is now the left limit at 3M, which sits two periods above -M.
    Ok(Row::new(steps, state - 2 * p))
}

/// Lattice field approximating `f` at scale `n`: `h(x, y) ~ n f(x/n, y/n)`
/// within 2 in sup norm. On a torus `f` is read on the cell
/// `[-M/n, M/n) x [-N/n, N/n)` and extended periodically; it must gain an
/// integer `p/n` across the cell horizontally and lose an integer `q/n`
/// vertically.
pub fn discretize(f: &ContinuousProfile, n: u32, domain: DomainSpec) -> Result<HeightField> {
    f.check_admissible()?;
    domain.check()?;
    if n == 0 {
        return Err(Error::InvalidArgument("scale n must be positive".into()));
    }
    let nf = n as f64;
    let lip = f.lipschitz_x();
    let (y0, y1) = domain.y_range();
    let (field, winding) = match domain {
        DomainSpec::Torus { m, n: nn } => {
            let (mf, nnf) = (m as f64, nn as f64);
            let tol = 1e-9 * nf.max(1.0);
            let row_gain =
                |y: i64| nf * (f.eval(mf / nf, y as f64 / nf) - f.eval(-mf / nf, y as f64 / nf));
            let p = near_int(row_gain(y0), tol).ok_or_else(|| {
                Error::TorusMismatch(format!(
                    "horizontal gain {} is not an integer",
                    row_gain(y0)
                ))
            })?;
            for y in y0..=y1 {
                if near_int(row_gain(y), tol) != Some(p) {
                    return Err(Error::TorusMismatch(format!(
                        "row {y} gains {} across the cell, expected {p}",
                        row_gain(y)
                    )));
                }
            }
            let col_loss = |x: f64| nf * (f.eval(x / nf, -nnf / nf) - f.eval(x / nf, nnf / nf));
            let q = near_int(col_loss(-mf), tol).ok_or_else(|| {
                Error::TorusMismatch(format!("vertical loss {} is not an integer", col_loss(-mf)))
            })?;
            for i in 0..=32 {
                let x = -mf + 2.0 * mf * i as f64 / 32.0;
                if near_int(col_loss(x), tol) != Some(q) {
                    return Err(Error::TorusMismatch(format!(
                        "vertical loss at x={x} differs from {q}"
                    )));
                }
            }
            let rows = (y0..=y1)
                .map(|y| {
                    let yf = y as f64 / nf;
                    let g = move |x: f64| {
                        let k = ((x + mf) / (2.0 * mf)).floor();
                        nf * f.eval((x - 2.0 * mf * k) / nf, yf) + k * p as f64
                    };
                    torus_row(&g, lip, m, p)
                })
                .collect::<Result<Vec<_>>>()?;
            (rows, Some(Winding { p, q }))
        }
        DomainSpec::Window(_) => {
            let (lo, hi) = domain.x_range();
            let rows = (y0..=y1)
                .map(|y| {
                    let yf = y as f64 / nf;
                    let g = move |x: f64| nf * f.eval(x / nf, yf);
                    window_row(&g, lip, lo, hi)
                })
                .collect();
            (rows, None)
        }
    };
    let field = HeightField::new(domain, winding, field)?;
    let rep = validate(&field);
    if !rep.is_ok() {
        return Err(Error::NotAdmissible(format!(
            "discretized field fails validation: {}",
            rep.violations[0]
        )));
    }
    Ok(field)
}

/// Sup over a `samples x samples` grid of `|h(nx, floor(ny))/n - f(x, y)|`
/// on the macroscopic extent of `field`.
pub fn sup_error(
    f: &ContinuousProfile,
    n: u32,
    field: &HeightField,
    samples: usize,
) -> Result<f64> {
    let nf = n as f64;
    let (lo, hi) = field.domain().x_range();
    let (y0, y1) = field.domain().y_range();
    let (xa, xb) = (ticks::to_f64(lo) / nf, ticks::to_f64(hi) / nf);
    let (ya, yb) = (y0 as f64 / nf, (y1 + 1) as f64 / nf);
    let mut worst: f64 = 0.0;
    for i in 0..samples {
        let x = xa + (xb - xa) * i as f64 / samples as f64;
        for j in 0..samples {
            let y = ya + (yb - ya) * j as f64 / samples as f64;
            let row = ((y * nf).floor() as i64).clamp(y0, y1);
            let h = field.eval_height(x * nf, row)? as f64 / nf;
            worst = worst.max((h - f.eval(x, y)).abs());
        }
    }
    Ok(worst)
}

/// Quantized torus slope: windings `(p, q)` on the microscopic torus
/// `(M n, N n)` and the realized slope `(p / (2Mn), -q / (2Nn))`.
pub fn quantize_slope(rho: [f64; 2], n: u32, m: i64, nn: i64) -> Result<(Winding, [f64; 2])> {
    if !(-1.0..=0.0).contains(&rho[1]) || !rho[0].is_finite() {
        return Err(Error::InvalidArgument(format!(
            "slope {rho:?} needs rho2 in [-1, 0]"
        )));
    }
    let (mm, nnn) = (m * n as i64, nn * n as i64);
    let p = (2.0 * mm as f64 * rho[0]).round() as i64;
    let q = (-2.0 * nnn as f64 * rho[1]).round() as i64;
    let interior = rho[1] > -1.0 && rho[1] < 0.0;
    if interior && (q == 0 || q == 2 * nnn) {
        return Err(Error::InvalidArgument(format!(
            "torus ({m}, {nn}) at scale {n} is too small to realize rho2 = {} strictly inside (-1, 0)",
            rho[1]
        )));
    }
    Ok((
        Winding { p, q },
        [p as f64 / (2 * mm) as f64, -(q as f64) / (2 * nnn) as f64],
    ))
}

/// A linear field of slope `rho` on the torus `(M n, N n)`: evenly spaced
/// steps, identical in every row, and evenly spaced occupied lines.
#[derive(Clone, Debug)]
pub struct LinearField {
    pub field: HeightField,
    pub realized: [f64; 2],
}

pub fn linear_field(rho: [f64; 2], n: u32, torus: (i64, i64)) -> Result<LinearField> {
    let (m, nn) = torus;
    if m < 1 || nn < 1 || n == 0 {
        return Err(Error::InvalidArgument(format!(
            "torus ({m}, {nn}) and scale {n} must be positive"
        )));
    }
    let (w, realized) = quantize_slope(rho, n, m, nn)?;
    let (mm, nnn) = (m * n as i64, nn * n as i64);
    let count = w.p.unsigned_abs() as i64;
    let kind = if w.p > 0 {
        StepKind::Antikink
    } else {
        StepKind::Kink
    };
    let span = 2.0 * mm as f64;
    let steps: Vec<Step> = (0..count)
        .map(|j| Step {
            x: ticks::to_even_ticks(-(mm as f64) + (j as f64 + 0.5) * span / count as f64),
            kind,
        })
        .collect();
    let left_of_zero: i64 = steps
        .iter()
        .filter(|s| s.x < 0)
        .map(|s| s.kind.delta())
        .sum();
    let b = |y: i64| -((y + nnn) * w.q).div_euclid(2 * nnn);
    let c = -(b(0) + left_of_zero);
    let rows = (-nnn..nnn)
        .map(|y| Row::new(steps.clone(), b(y) + c))
        .collect();
    let field = HeightField::new(DomainSpec::torus(mm, nnn), Some(w), rows)?;
    debug_assert!(validate(&field).is_ok());
    Ok(LinearField { field, realized })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{gradient_stats, Region, Window};

    fn win(a: f64, b: f64, c: i64, d: i64) -> DomainSpec {
        DomainSpec::Window(Window {
            a,
            b,
            c,
            d,
            margin: 0.0,
            buffer: 0,
        })
    }

    #[test]
    fn zero_profile_is_flat() {
        let f = ContinuousProfile::affine(0.0, 0.0);
        for n in [1, 7, 50] {
            let h = discretize(&f, n, win(-5.0, 5.0, -3, 3)).unwrap();
            assert_eq!(h.step_count(), 0);
            assert!(h.rows().iter().all(|r| r.anchor() == 0));
        }
    }

    #[test]
    fn half_slope_jumps_at_even_integers() {
        let f = ContinuousProfile::affine(0.5, 0.0);
        let h = discretize(&f, 1, win(0.0, 7.0, 0, 0)).unwrap();
        let xs: Vec<f64> = h.rows()[0]
            .steps()
            .iter()
            .map(|s| ticks::to_f64(s.x))
            .collect();
        assert_eq!(xs, vec![2.0, 4.0, 6.0]);
        assert!(h.rows()[0]
            .steps()
            .iter()
            .all(|s| s.kind == StepKind::Antikink));
        for (x, v) in [(1.0, 0), (2.0, 1), (3.0, 1), (4.0, 2), (6.5, 3)] {
            assert_eq!(h.eval_height(x, 0).unwrap(), v, "x={x}");
        }
    }

    #[test]
    fn mirrored_side_uses_kinks_for_rising_left() {
        let f = ContinuousProfile::affine(-0.5, 0.0);
        let h = discretize(&f, 1, win(-7.0, 0.5, 0, 0)).unwrap();
        for (x, v) in [(-6.5, 3), (-4.0, 2), (-3.0, 1), (-1.0, 0), (0.25, 0)] {
            assert_eq!(h.eval_height(x, 0).unwrap(), v, "x={x}");
        }
    }

    #[test]
    fn sup_error_bound_sinusoid() {
        let f = ContinuousProfile::AffinePlusSinusoid {
            rho: [0.3, -0.5],
            offset: 0.1,
            amplitude: 0.2,
            wavevector: [2.0, 0.8],
        };
        for n in [3, 10, 40] {
            let h = discretize(
                &f,
                n,
                win(-2.0 * n as f64, 2.0 * n as f64, -2 * n as i64, 2 * n as i64),
            )
            .unwrap();
            let e = sup_error(&f, n, &h, 120).unwrap();
            assert!(e <= 2.0 / n as f64, "n={n} e={e}");
        }
    }

    #[test]
    fn torus_discretization_of_wedge() {
        let f = ContinuousProfile::wedge();
        let n = 10;
        let h = discretize(&f, n, DomainSpec::torus(20, 40)).unwrap();
        assert_eq!(h.winding(), Some(Winding { p: 0, q: 30 }));
        assert!(sup_error(&f, n, &h, 100).unwrap() <= 0.2);
    }

    #[test]
    fn torus_sinusoid_with_winding() {
        let l = 2.0;
        let f = ContinuousProfile::AffinePlusSinusoid {
            rho: [0.25, -0.5],
            offset: 0.0,
            amplitude: 0.1,
            wavevector: [std::f64::consts::PI / l * 2.0 / 2.0, 0.0],
        };
        let n = 8;
        let h = discretize(&f, n, DomainSpec::torus(16, 16)).unwrap();
        assert_eq!(h.winding(), Some(Winding { p: 8, q: 16 }));
        assert!(sup_error(&f, n, &h, 100).unwrap() <= 2.0 / n as f64);
    }

    #[test]
    fn torus_rejects_incompatible_slope() {
        let f = ContinuousProfile::affine(0.3, -0.5);
        assert!(matches!(
            discretize(&f, 1, DomainSpec::torus(3, 3)),
            Err(Error::TorusMismatch(_))
        ));
    }

    #[test]
    fn linear_field_examples() {
        let lf = linear_field([0.0, -0.5], 1, (10, 10)).unwrap();
        assert_eq!(lf.realized, [0.0, -0.5]);
        assert_eq!(lf.field.step_count(), 0);
        let occupied: Vec<bool> = (-10..9)
            .map(|y| {
                lf.field.eval_height(0.3, y + 1).unwrap() - lf.field.eval_height(0.3, y).unwrap()
                    == -1
            })
            .collect();
        assert!(occupied.windows(2).all(|w| w[0] != w[1]));

        let lf = linear_field([0.3, -0.5], 1, (10, 10)).unwrap();
        let s = gradient_stats(&lf.field, Region::full(lf.field.domain())).unwrap();
        assert_eq!((s.kinks, s.antikinks), (0, 120));
        assert!((s.occupation - 0.5).abs() < 1e-12);
        assert!((lf.realized[0] - 0.3).abs() < 1e-12);

        let lf = linear_field([-0.3, -0.5], 1, (10, 10)).unwrap();
        let s = gradient_stats(&lf.field, Region::full(lf.field.domain())).unwrap();
        assert_eq!((s.kinks, s.antikinks), (120, 0));
    }

    #[test]
    fn linear_field_too_small() {
        assert!(linear_field([0.0, -0.01], 1, (2, 2)).is_err());
        assert!(linear_field([0.0, 0.5], 1, (2, 2)).is_err());
    }
}
