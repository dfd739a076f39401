//! Admissible height functions `h: R x Z -> Z`.
//!
//! Each row is piecewise constant with unit jumps. A [`StepKind::Kink`] is a
//! drop by one going right, an [`StepKind::Antikink`] a rise by one. Values at
//! jumps are upper semi-continuous. Adjacent rows satisfy
//! `h(x, y+1) - h(x, y)` in `{-1, 0}`.
//!
//! Rows store their steps in a flat sorted array plus the left limit of the
//! height at the left edge of the domain (the *anchor*); heights are rebuilt
//! from prefix sums on demand.

mod discretize;
mod profile;
pub mod snapshot;

pub use discretize::{discretize, linear_field, quantize_slope, sup_error, LinearField};
pub use profile::{AffinePiece, Combine, ContinuousProfile};

use crate::error::{Error, Result};
use crate::ticks::{self, Tick};
use serde::{Deserialize, Serialize};
use std::fmt;

/// Type of a unit jump in a row.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StepKind {
    /// Rise by one going right. Sorts first so that a co-located pair reads
    /// as antikink then kink, i.e. a one-point terrace.
    Antikink,
    /// Drop by one going right.
    Kink,
}

impl StepKind {
    /// Height change when crossing the step left to right.
    pub fn delta(self) -> i64 {
        match self {
            StepKind::Antikink => 1,
            StepKind::Kink => -1,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            StepKind::Antikink => "A",
            StepKind::Kink => "K",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Step {
    pub x: Tick,
    pub kind: StepKind,
}

/// One row `h(., y)` on the horizontal extent of its field.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Row {
    steps: Vec<Step>,
    anchor: i64,
    prefix: Vec<i64>,
}

impl Row {
    /// Builds a row from steps and the left limit of the height at the left
    /// edge of the domain. The steps are kept in the given order; use
    /// [`validate`] to check them.
    pub fn new(steps: Vec<Step>, anchor: i64) -> Self {
        let mut prefix = Vec::with_capacity(steps.len() + 1);
        let mut acc = 0;
        prefix.push(0);
        for s in &steps {
            acc += s.kind.delta();
            prefix.push(acc);
        }
        Row {
            steps,
            anchor,
            prefix,
        }
    }

    pub fn flat(value: i64) -> Self {
        Row::new(Vec::new(), value)
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn anchor(&self) -> i64 {
        self.anchor
    }

    /// Sum of all step deltas (antikinks minus kinks).
    pub fn net(&self) -> i64 {
        *self.prefix.last().unwrap()
    }

    pub fn counts(&self) -> (usize, usize) {
        let k = self
            .steps
            .iter()
            .filter(|s| s.kind == StepKind::Kink)
            .count();
        (k, self.steps.len() - k)
    }

    /// Upper semi-continuous value at `x`.
    pub fn value_at(&self, x: Tick) -> i64 {
        let i = self.steps.partition_point(|s| s.x < x);
        let mut v = self.anchor + self.prefix[i];
        let mut j = i;
        while j < self.steps.len() && self.steps[j].x == x {
            if self.steps[j].kind == StepKind::Antikink {
                v += 1;
            }
            j += 1;
        }
        v
    }

    /// Limit from the left at `x`.
    pub fn left_value(&self, x: Tick) -> i64 {
        self.anchor + self.prefix[self.steps.partition_point(|s| s.x < x)]
    }

    /// Limit from the right at `x`.
    pub fn right_value(&self, x: Tick) -> i64 {
        self.anchor + self.prefix[self.steps.partition_point(|s| s.x <= x)]
    }

    /// The same row raised by `m`.
    pub fn shifted(&self, m: i64) -> Row {
        Row {
            steps: self.steps.clone(),
            anchor: self.anchor + m,
            prefix: self.prefix.clone(),
        }
    }

    /// Rebuild a row from point values and one-sided limits at a sorted list
    /// of breakpoints. Fails if some breakpoint cannot be written as unit steps.
    fn from_breakpoints(anchor: i64, pts: &[(Tick, i64, i64, i64)]) -> Result<Row> {
        let mut steps = Vec::new();
        for &(x, left, point, right) in pts {
            match (point - left, point - right) {
                (0, 0) => {}
                (0, 1) => steps.push(Step {
                    x,
                    kind: StepKind::Kink,
                }),
                (1, 0) => steps.push(Step {
                    x,
                    kind: StepKind::Antikink,
                }),
                (1, 1) => {
                    steps.push(Step {
                        x,
                        kind: StepKind::Antikink,
                    });
                    steps.push(Step {
                        x,
                        kind: StepKind::Kink,
                    });
                }
                _ => {
                    return Err(Error::InvalidField(format!(
                        "values ({left}, {point}, {right}) at x={} are not unit steps",
                        ticks::to_f64(x)
                    )))
                }
            }
        }
        Ok(Row::new(steps, anchor))
    }
}

/// A window `[a, b] x [c, d]` of interest with its simulation padding.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Window {
    pub a: f64,
    pub b: f64,
    pub c: i64,
    pub d: i64,
    /// Horizontal padding on each side. Must be at least the time horizon.
    #[serde(default)]
    pub margin: f64,
    /// Extra rows above and below, scanned for creation-free barriers.
    #[serde(default)]
    pub buffer: i64,
}

/// Geometry of a height field.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainSpec {
    /// `[-m, m) x {-n, ..., n-1}` with periodic wrap in both directions.
    Torus {
        m: i64,
        n: i64,
    },
    Window(Window),
}

impl DomainSpec {
    pub fn torus(m: i64, n: i64) -> Self {
        DomainSpec::Torus { m, n }
    }

    /// Horizontal extent in ticks, half-open.
    pub fn x_range(&self) -> (Tick, Tick) {
        match *self {
            DomainSpec::Torus { m, .. } => (-ticks::units(m), ticks::units(m)),
            DomainSpec::Window(w) => (
                ticks::to_ticks(w.a - w.margin),
                ticks::to_ticks(w.b + w.margin),
            ),
        }
    }

    /// Inclusive row range.
    pub fn y_range(&self) -> (i64, i64) {
        match *self {
            DomainSpec::Torus { n, .. } => (-n, n - 1),
            DomainSpec::Window(w) => (w.c - w.buffer, w.d + w.buffer),
        }
    }

    pub fn is_torus(&self) -> bool {
        matches!(self, DomainSpec::Torus { .. })
    }

    pub fn check(&self) -> Result<()> {
        match *self {
            DomainSpec::Torus { m, n } if m >= 1 && n >= 1 => Ok(()),
            DomainSpec::Torus { m, n } => Err(Error::InvalidArgument(format!(
                "torus half-sizes must be >= 1, got ({m}, {n})"
            ))),
            DomainSpec::Window(w) => {
                if !(w.a < w.b) || w.c > w.d || w.margin < 0.0 || w.buffer < 0 {
                    Err(Error::InvalidArgument(format!("degenerate window {w:?}")))
                } else {
                    Ok(())
                }
            }
        }
    }
}

/// Torus winding numbers: every row gains `p` per horizontal period, and the
/// field drops by `q` per vertical period.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Winding {
    pub p: i64,
    pub q: i64,
}

/// A height function on a torus or a window.
#[derive(Clone, Debug, PartialEq)]
pub struct HeightField {
    domain: DomainSpec,
    winding: Option<Winding>,
    rows: Vec<Row>,
}

impl HeightField {
    /// Rows must cover `domain.y_range()` in increasing order. Torus fields
    /// need a winding.
    pub fn new(domain: DomainSpec, winding: Option<Winding>, rows: Vec<Row>) -> Result<Self> {
        domain.check()?;
        let (y0, y1) = domain.y_range();
        if rows.len() as i64 != y1 - y0 + 1 {
            return Err(Error::InvalidField(format!(
                "expected {} rows, got {}",
                y1 - y0 + 1,
                rows.len()
            )));
        }
        if domain.is_torus() != winding.is_some() {
            return Err(Error::InvalidField(
                "winding must be given exactly for torus fields".into(),
            ));
        }
        Ok(HeightField {
            domain,
            winding,
            rows,
        })
    }

    /// The constant field.
    pub fn flat(domain: DomainSpec, value: i64) -> Result<Self> {
        let (y0, y1) = domain.y_range();
        let winding = domain.is_torus().then_some(Winding { p: 0, q: 0 });
        HeightField::new(
            domain,
            winding,
            (y0..=y1).map(|_| Row::flat(value)).collect(),
        )
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn winding(&self) -> Option<Winding> {
        self.winding
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn y_min(&self) -> i64 {
        self.domain.y_range().0
    }

    pub fn row(&self, y: i64) -> Option<&Row> {
        let i = y - self.y_min();
        (i >= 0).then(|| self.rows.get(i as usize)).flatten()
    }

    /// Height at tick position `x` in row `y`. Torus fields are evaluated on
    /// their periodic lift, so every `(x, y)` is in range.
    pub fn eval_ticks(&self, x: Tick, y: i64) -> Result<i64> {
        let (lo, hi) = self.domain.x_range();
        match (self.domain, self.winding) {
            (DomainSpec::Torus { n, .. }, Some(w)) => {
                let (xw, kx) = ticks::wrap(x, lo, hi - lo);
                let (yw, ky) = ticks::wrap(y, -n, 2 * n);
                Ok(self.row(yw).unwrap().value_at(xw) + kx * w.p - ky * w.q)
            }
            _ => {
                if x < lo || x >= hi {
                    return Err(Error::OutOfDomain {
                        x: ticks::to_f64(x),
                        y,
                    });
                }
                let row = self.row(y).ok_or(Error::OutOfDomain {
                    x: ticks::to_f64(x),
                    y,
                })?;
                Ok(row.value_at(x))
            }
        }
    }

    /// Height at real position `x` (rounded to the nearest tick) in row `y`.
    pub fn eval_height(&self, x: f64, y: i64) -> Result<i64> {
        self.eval_ticks(ticks::to_ticks(x), y)
    }

    /// Row `y + 1` with the vertical wrap applied, as (row, additive shift).
    fn row_above(&self, y: i64) -> Option<(&Row, i64)> {
        match (self.domain, self.winding) {
            (DomainSpec::Torus { n, .. }, Some(w)) if y == n - 1 => Some((self.row(-n)?, -w.q)),
            _ => self.row(y + 1).map(|r| (r, 0)),
        }
    }

    /// The field raised by `m` everywhere.
    pub fn shifted(&self, m: i64) -> HeightField {
        HeightField {
            domain: self.domain,
            winding: self.winding,
            rows: self.rows.iter().map(|r| r.shifted(m)).collect(),
        }
    }

    /// Pointwise maximum of two fields on the same domain.
    pub fn pointwise_max(&self, other: &HeightField) -> Result<HeightField> {
        self.combine(other, i64::max)
    }

    /// Pointwise minimum of two fields on the same domain.
    pub fn pointwise_min(&self, other: &HeightField) -> Result<HeightField> {
        self.combine(other, i64::min)
    }

    fn combine(&self, other: &HeightField, op: fn(i64, i64) -> i64) -> Result<HeightField> {
        if self.domain != other.domain || self.winding != other.winding {
            return Err(Error::InvalidArgument(
                "fields live on different domains".into(),
            ));
        }
        let rows = self
            .rows
            .iter()
            .zip(&other.rows)
            .map(|(a, b)| {
                let mut xs: Vec<Tick> = a.steps.iter().chain(&b.steps).map(|s| s.x).collect();
                xs.sort_unstable();
                xs.dedup();
                let pts: Vec<_> = xs
                    .iter()
                    .map(|&x| {
                        (
                            x,
                            op(a.left_value(x), b.left_value(x)),
                            op(a.value_at(x), b.value_at(x)),
                            op(a.right_value(x), b.right_value(x)),
                        )
                    })
                    .collect();
                Row::from_breakpoints(op(a.anchor, b.anchor), &pts)
            })
            .collect::<Result<Vec<_>>>()?;
        HeightField::new(self.domain, self.winding, rows)
    }

    /// True if `self <= other` everywhere.
    pub fn le(&self, other: &HeightField) -> bool {
        self.domain == other.domain
            && self.rows.iter().zip(&other.rows).all(|(a, b)| {
                a.anchor <= b.anchor
                    && a.steps.iter().chain(&b.steps).all(|s| {
                        a.value_at(s.x) <= b.value_at(s.x)
                            && a.right_value(s.x) <= b.right_value(s.x)
                    })
            })
    }

    /// Total number of steps.
    pub fn step_count(&self) -> usize {
        self.rows.iter().map(|r| r.steps.len()).sum()
    }
}

/// One broken invariant.
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    UnsortedSteps { y: i64, index: usize },
    CoLocated { y: i64, x: f64 },
    OutOfRange { y: i64, x: f64 },
    VerticalGradient { x: f64, y: i64, diff: i64 },
    HorizontalWinding { y: i64, expected: i64, found: i64 },
    VerticalWinding { x: f64, expected: i64, found: i64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::UnsortedSteps { y, index } => {
                write!(f, "row {y}: steps unsorted at index {index}")
            }
            Violation::CoLocated { y, x } => {
                write!(f, "row {y}: invalid co-located steps at x={x}")
            }
            Violation::OutOfRange { y, x } => {
                write!(f, "row {y}: step at x={x} outside the domain")
            }
            Violation::VerticalGradient { x, y, diff } => {
                write!(f, "h({x}, {}) - h({x}, {y}) = {diff}", y + 1)
            }
            Violation::HorizontalWinding { y, expected, found } => {
                write!(f, "row {y}: step sum {found}, expected winding {expected}")
            }
            Violation::VerticalWinding { x, expected, found } => {
                write!(
                    f,
                    "x={x}: {found} occupied lines, expected winding {expected}"
                )
            }
        }
    }
}

/// Result of [`validate`]. Empty iff the field is admissible.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    /// Set when the list was cut short.
    pub truncated: bool,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, v: Violation) {
        if self.violations.len() < 1000 {
            self.violations.push(v);
        } else {
            self.truncated = true;
        }
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_ok() {
            Ok(())
        } else {
            let msg: Vec<String> = self
                .violations
                .iter()
                .take(5)
                .map(|v| v.to_string())
                .collect();
            Err(Error::InvalidField(format!(
                "{} violation(s): {}",
                self.violations.len(),
                msg.join("; ")
            )))
        }
    }
}

/// Calls `f(x, v0, v1)` at every point where the pair of rows may change:
/// point values at all breakpoints and the constant values on every open
/// interval, represented by its left end. `v1` includes `shift`.
fn scan_pair(
    r0: &Row,
    r1: &Row,
    shift: i64,
    lo: Tick,
    hi: Tick,
    mut f: impl FnMut(Tick, Tick, i64, i64),
) {
    let mut xs: Vec<Tick> = r0
        .steps
        .iter()
        .chain(&r1.steps)
        .map(|s| s.x)
        .filter(|&x| x >= lo && x < hi)
        .collect();
    xs.sort_unstable();
    xs.dedup();
    // Interval [lo, first breakpoint).
    let first = xs.first().copied().unwrap_or(hi);
    if first > lo {
        f(lo, first, r0.value_at(lo), r1.value_at(lo) + shift);
    }
    for (i, &x) in xs.iter().enumerate() {
        f(x, x, r0.value_at(x), r1.value_at(x) + shift);
        let next = xs.get(i + 1).copied().unwrap_or(hi);
        if next > x {
            f(x, next, r0.right_value(x), r1.right_value(x) + shift);
        }
    }
}

/// Checks every invariant of the state space on the field's domain.
pub fn validate(field: &HeightField) -> ValidationReport {
    let mut rep = ValidationReport::default();
    let (lo, hi) = field.domain.x_range();
    let y0 = field.y_min();
    let mut sorted = vec![true; field.rows.len()];
    for (i, row) in field.rows.iter().enumerate() {
        let y = y0 + i as i64;
        for (j, w) in row.steps.windows(2).enumerate() {
            if w[0].x == w[1].x {
                if !(w[0].kind == StepKind::Antikink && w[1].kind == StepKind::Kink) {
                    rep.push(Violation::CoLocated {
                        y,
                        x: ticks::to_f64(w[0].x),
                    });
                    sorted[i] = false;
                }
                if j + 2 < row.steps.len() && row.steps[j + 2].x == w[0].x {
                    rep.push(Violation::CoLocated {
                        y,
                        x: ticks::to_f64(w[0].x),
                    });
                    sorted[i] = false;
                }
            } else if w[0].x > w[1].x {
                rep.push(Violation::UnsortedSteps { y, index: j + 1 });
                sorted[i] = false;
            }
        }
        for s in &row.steps {
            if s.x < lo || s.x >= hi {
                rep.push(Violation::OutOfRange {
                    y,
                    x: ticks::to_f64(s.x),
                });
            }
        }
        if let Some(w) = field.winding {
            if row.net() != w.p {
                rep.push(Violation::HorizontalWinding {
                    y,
                    expected: w.p,
                    found: row.net(),
                });
            }
        }
    }
    let (ya, yb) = field.domain.y_range();
    for y in ya..=yb {
        let i = (y - y0) as usize;
        let Some((above, shift)) = field.row_above(y) else {
            continue;
        };
        let j = (if y == yb { ya } else { y + 1 } - y0) as usize;
        if !sorted[i] || !sorted[j] {
            continue;
        }
        let seam = field.domain.is_torus() && y == yb;
        scan_pair(&field.rows[i], above, shift, lo, hi, |x, _, v0, v1| {
            let diff = v1 - v0;
            if diff != 0 && diff != -1 {
                let xf = ticks::to_f64(x);
                if seam {
                    let q = field.winding.map(|w| w.q).unwrap_or(0);
                    rep.push(Violation::VerticalWinding {
                        x: xf,
                        expected: q,
                        found: q - diff - 1,
                    });
                } else {
                    rep.push(Violation::VerticalGradient { x: xf, y, diff });
                }
            }
        });
    }
    rep
}

/// Axis-aligned region `[x0, x1) x {y0, ..., y1}` in field coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Region {
    pub x0: f64,
    pub x1: f64,
    pub y0: i64,
    pub y1: i64,
}

impl Region {
    /// The whole torus cell, or the full extent of a window field.
    pub fn full(domain: &DomainSpec) -> Region {
        let (lo, hi) = domain.x_range();
        let (y0, mut y1) = domain.y_range();
        if !domain.is_torus() {
            y1 -= 1;
        }
        Region {
            x0: ticks::to_f64(lo),
            x1: ticks::to_f64(hi),
            y0,
            y1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradientStats {
    pub kinks: usize,
    pub antikinks: usize,
    /// Length-weighted fraction of `(x, y)` with `h(x, y+1) - h(x, y) = -1`.
    pub occupation: f64,
}

/// Step counts and occupied-line fraction over `region`.
pub fn gradient_stats(field: &HeightField, region: Region) -> Result<GradientStats> {
    let (lo, hi) = field.domain.x_range();
    let (x0, x1) = (ticks::to_ticks(region.x0), ticks::to_ticks(region.x1));
    if x0 < lo || x1 > hi || x0 >= x1 || region.y0 > region.y1 {
        return Err(Error::InvalidArgument(format!(
            "region {region:?} is not inside the domain"
        )));
    }
    let (mut kinks, mut antikinks) = (0, 0);
    let mut occupied: i128 = 0;
    for y in region.y0..=region.y1 {
        let row = field.row(y).ok_or(Error::OutOfDomain { x: region.x0, y })?;
        for s in row.steps.iter().filter(|s| s.x >= x0 && s.x < x1) {
            match s.kind {
                StepKind::Kink => kinks += 1,
                StepKind::Antikink => antikinks += 1,
            }
        }
        let (above, shift) = field.row_above(y).ok_or(Error::OutOfDomain {
            x: region.x0,
            y: y + 1,
        })?;
        scan_pair(row, above, shift, x0, x1, |a, b, v0, v1| {
            if v1 - v0 == -1 {
                occupied += (b - a) as i128;
            }
        });
    }
    let total = (x1 - x0) as i128 * (region.y1 - region.y0 + 1) as i128;
    Ok(GradientStats {
        kinks,
        antikinks,
        occupation: occupied as f64 / total as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ticks::units;

    fn window(x0: f64, x1: f64, rows: i64) -> DomainSpec {
        DomainSpec::Window(Window {
            a: x0,
            b: x1,
            c: 0,
            d: rows - 1,
            margin: 0.0,
            buffer: 0,
        })
    }

    fn step(x: f64, kind: StepKind) -> Step {
        Step {
            x: ticks::to_ticks(x),
            kind,
        }
    }

    #[test]
    fn eval_single_kink() {
        let f = HeightField::new(
            window(0.0, 10.0, 1),
            None,
            vec![Row::new(vec![step(1.0, StepKind::Kink)], 5)],
        )
        .unwrap();
        assert_eq!(f.eval_height(0.5, 0).unwrap(), 5);
        assert_eq!(f.eval_height(1.0, 0).unwrap(), 5);
        assert_eq!(f.eval_height(1.5, 0).unwrap(), 4);
    }

    #[test]
    fn eval_single_antikink() {
        let f = HeightField::new(
            window(0.0, 10.0, 1),
            None,
            vec![Row::new(vec![step(1.0, StepKind::Antikink)], 5)],
        )
        .unwrap();
        assert_eq!(f.eval_height(0.5, 0).unwrap(), 5);
        assert_eq!(f.eval_height(1.0, 0).unwrap(), 6);
        assert_eq!(f.eval_height(1.5, 0).unwrap(), 6);
    }

    #[test]
    fn eval_pair_takes_upper_value() {
        let r = Row::new(
            vec![step(2.0, StepKind::Antikink), step(2.0, StepKind::Kink)],
            0,
        );
        assert_eq!(r.value_at(ticks::to_ticks(2.0)), 1);
        assert_eq!(r.left_value(ticks::to_ticks(2.0)), 0);
        assert_eq!(r.right_value(ticks::to_ticks(2.0)), 0);
    }

    #[test]
    fn out_of_domain_query() {
        let f = HeightField::flat(window(0.0, 1.0, 1), 0).unwrap();
        assert!(matches!(
            f.eval_height(2.0, 0),
            Err(Error::OutOfDomain { .. })
        ));
        assert!(matches!(
            f.eval_height(0.5, 3),
            Err(Error::OutOfDomain { .. })
        ));
    }

    #[test]
    fn flat_is_valid() {
        let f = HeightField::flat(DomainSpec::torus(3, 2), 0).unwrap();
        assert!(validate(&f).is_ok());
        assert_eq!(f.eval_height(123.4, -17).unwrap(), 0);
    }

    #[test]
    fn upward_gradient_detected() {
        let rows = vec![
            Row::flat(0),
            Row::new(vec![step(0.5, StepKind::Antikink)], 0),
        ];
        let f = HeightField::new(window(0.0, 1.0, 2), None, rows).unwrap();
        let rep = validate(&f);
        assert_eq!(rep.violations.len(), 2, "{:?}", rep.violations);
        assert!(matches!(
            rep.violations[0],
            Violation::VerticalGradient { y: 0, diff: 1, .. }
        ));
    }

    #[test]
    fn winding_mismatch_on_third_row() {
        let r = |n: usize| {
            Row::new(
                (0..n)
                    .map(|i| step(-1.5 + i as f64 * 0.5, StepKind::Antikink))
                    .collect(),
                0,
            )
        };
        // Three rows need a torus with an even row count, so use a 4-row torus
        // whose last row repeats the first.
        let rows = vec![r(3), r(3), r(2), r(3)];
        let f =
            HeightField::new(DomainSpec::torus(2, 2), Some(Winding { p: 3, q: 0 }), rows).unwrap();
        let rep = validate(&f);
        assert!(rep.violations.iter().any(|v| matches!(
            v,
            Violation::HorizontalWinding {
                y: 0,
                expected: 3,
                found: 2
            }
        )));
    }

    #[test]
    fn unsorted_and_colocated() {
        let rows = vec![Row::new(
            vec![step(0.7, StepKind::Kink), step(0.2, StepKind::Kink)],
            0,
        )];
        let rep = validate(&HeightField::new(window(0.0, 1.0, 1), None, rows).unwrap());
        assert!(matches!(
            rep.violations[0],
            Violation::UnsortedSteps { y: 0, index: 1 }
        ));
        let rows = vec![Row::new(
            vec![step(0.2, StepKind::Kink), step(0.2, StepKind::Kink)],
            0,
        )];
        let rep = validate(&HeightField::new(window(0.0, 1.0, 1), None, rows).unwrap());
        assert!(matches!(rep.violations[0], Violation::CoLocated { .. }));
    }

    #[test]
    fn torus_lift() {
        let rows = vec![
            Row::new(vec![step(0.0, StepKind::Antikink)], 0),
            Row::new(vec![step(0.0, StepKind::Antikink)], 0),
        ];
        let f =
            HeightField::new(DomainSpec::torus(1, 1), Some(Winding { p: 1, q: 1 }), rows).unwrap();
        assert_eq!(f.eval_height(0.5, 0).unwrap(), 1);
        assert_eq!(f.eval_height(2.5, 0).unwrap(), 2);
        assert_eq!(f.eval_height(0.5, 2).unwrap(), 0);
        assert_eq!(f.eval_ticks(units(-2) + 7, -2).unwrap(), 1);
    }

    #[test]
    fn stats_single_kink() {
        let f = HeightField::new(
            window(0.0, 2.0, 1),
            None,
            vec![Row::new(vec![step(1.0, StepKind::Kink)], 0)],
        )
        .unwrap();
        let s = gradient_stats(
            &f,
            Region {
                x0: 0.0,
                x1: 2.0,
                y0: 0,
                y1: 0,
            },
        );
        // A one-row window has no pair above, so the occupation query fails.
        assert!(s.is_err());
        let rows = vec![Row::new(vec![step(1.0, StepKind::Kink)], 0), Row::flat(-1)];
        let f = HeightField::new(window(0.0, 2.0, 2), None, rows).unwrap();
        let s = gradient_stats(
            &f,
            Region {
                x0: 0.0,
                x1: 2.0,
                y0: 0,
                y1: 0,
            },
        )
        .unwrap();
        assert_eq!((s.kinks, s.antikinks), (1, 0));
        assert!((s.occupation - 0.5).abs() < 1e-12);
    }

    #[test]
    fn max_of_fields() {
        let d = window(0.0, 4.0, 1);
        let a = HeightField::new(
            d,
            None,
            vec![Row::new(
                vec![step(1.0, StepKind::Antikink), step(3.0, StepKind::Kink)],
                0,
            )],
        )
        .unwrap();
        let b = HeightField::new(
            d,
            None,
            vec![Row::new(vec![step(2.0, StepKind::Antikink)], 0)],
        )
        .unwrap();
        let m = a.pointwise_max(&b).unwrap();
        assert!(validate(&m).is_ok());
        for x in [0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5] {
            let e = a
                .eval_height(x, 0)
                .unwrap()
                .max(b.eval_height(x, 0).unwrap());
            assert_eq!(m.eval_height(x, 0).unwrap(), e, "x={x}");
        }
        assert!(a.le(&m) && b.le(&m));
    }
}
