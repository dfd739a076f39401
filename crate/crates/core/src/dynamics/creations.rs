use crate::error::{Error, Result};
use crate::lattice::DomainSpec;
use crate::seed;
use crate::ticks::{self, Tick};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use std::cmp::Reverse;
use std::collections::BinaryHeap;

/// Creation intensity per unit length, per row, per unit time.
pub const INTENSITY: f64 = 2.0;

/// A marked space-time point. Field order gives the event order `(t, y, x)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CreationPoint {
    pub t: Tick,
    pub y: i64,
    pub x: Tick,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CreationStatus {
    Pending,
    Effective,
    Rejected,
}

/// A sampled creation process on a domain, sorted by `(t, y, x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CreationSet {
    pub points: Vec<CreationPoint>,
    pub intensity: f64,
    pub domain: DomainSpec,
    pub seed: u64,
    /// Points cover `[0, horizon]`.
    pub horizon: Tick,
}

impl CreationSet {
    pub fn empty(domain: DomainSpec, horizon: Tick) -> Self {
        CreationSet {
            points: Vec::new(),
            intensity: INTENSITY,
            domain,
            seed: 0,
            horizon,
        }
    }

    /// The time-shifted process: points with `t >= s`, moved to `t - s`.
    pub fn shifted(&self, s: Tick) -> CreationSet {
        let start = self.points.partition_point(|p| p.t < s);
        CreationSet {
            points: self.points[start..]
                .iter()
                .map(|p| CreationPoint { t: p.t - s, ..*p })
                .collect(),
            horizon: self.horizon - s,
            ..self.clone()
        }
    }

    /// Points in row `y` as `(x, t)` pairs.
    pub fn row_points(&self, y: i64) -> Vec<(Tick, Tick)> {
        self.points
            .iter()
            .filter(|p| p.y == y)
            .map(|p| (p.x, p.t))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

struct RowSource {
    rng: ChaCha8Rng,
    exp: Exp<f64>,
    t: f64,
    y: i64,
}

/// Lazily merged per-row Poisson streams in `(t, y, x)` order.
///
/// Row `y` draws from its own counter-based generator, so every row is
/// reproducible on its own and a longer horizon extends a shorter one.
pub struct CreationStream {
    rows: Vec<RowSource>,
    heap: BinaryHeap<Reverse<(CreationPoint, usize)>>,
    lo: Tick,
    half_len: i64,
    horizon: Tick,
}

impl CreationStream {
    pub fn new(seed: u64, domain: &DomainSpec, horizon: f64) -> Result<Self> {
        domain.check()?;
        let (lo, hi) = domain.x_range();
        if hi - lo < 2 {
            return Err(Error::InvalidArgument(
                "creation domain has zero length".into(),
            ));
        }
        if !(horizon >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "horizon {horizon} must be non-negative"
            )));
        }
        let rate = INTENSITY * ticks::to_f64(hi - lo);
        let (y0, y1) = domain.y_range();
        let mut s = CreationStream {
            rows: (y0..=y1)
                .map(|y| RowSource {
                    rng: seed::row_rng(seed, y),
                    exp: Exp::new(rate).unwrap(),
                    t: 0.0,
                    y,
                })
                .collect(),
            heap: BinaryHeap::new(),
            lo,
            half_len: (hi - lo) / 2,
            horizon: ticks::to_ticks(horizon),
        };
        for i in 0..s.rows.len() {
            s.advance(i);
        }
        Ok(s)
    }

    fn advance(&mut self, i: usize) {
        let r = &mut self.rows[i];
        r.t += r.exp.sample(&mut r.rng);
        let x = self.lo + 2 * r.rng.random_range(0..self.half_len);
        let t = ticks::to_even_ticks(r.t);
        if t <= self.horizon {
            self.heap.push(Reverse((CreationPoint { t, y: r.y, x }, i)));
        }
    }
}

impl Iterator for CreationStream {
    type Item = CreationPoint;

    fn next(&mut self) -> Option<CreationPoint> {
        let Reverse((p, i)) = self.heap.pop()?;
        self.advance(i);
        Some(p)
    }
}

/// Poisson creations of intensity 2 on `domain x [0, horizon]`.
pub fn sample_creations(seed: u64, domain: &DomainSpec, horizon: f64) -> Result<CreationSet> {
    let points: Vec<CreationPoint> = CreationStream::new(seed, domain, horizon)?.collect();
    Ok(CreationSet {
        points,
        intensity: INTENSITY,
        domain: *domain,
        seed,
        horizon: ticks::to_ticks(horizon),
    })
}

/// Wraps every point into the torus cell `[-M, M) x {-N, ..., N-1}`.
pub fn periodize(omega: &CreationSet, m: i64, n: i64) -> Result<CreationSet> {
    if m < 1 || n < 1 {
        return Err(Error::InvalidArgument(format!(
            "torus ({m}, {n}) must be positive"
        )));
    }
    let (lo, period) = (-ticks::units(m), ticks::units(2 * m));
    let mut points: Vec<CreationPoint> = omega
        .points
        .iter()
        .map(|p| CreationPoint {
            t: p.t,
            y: ticks::wrap(p.y, -n, 2 * n).0,
            x: ticks::wrap(p.x, lo, period).0,
        })
        .collect();
    points.sort_unstable();
    Ok(CreationSet {
        points,
        domain: DomainSpec::torus(m, n),
        ..omega.clone()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_horizon_is_empty() {
        assert!(sample_creations(1, &DomainSpec::torus(3, 3), 0.0)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn deterministic_and_sorted() {
        let d = DomainSpec::torus(5, 2);
        let a = sample_creations(9, &d, 2.0).unwrap();
        let b = sample_creations(9, &d, 2.0).unwrap();
        assert_eq!(a, b);
        assert!(a.points.windows(2).all(|w| w[0] <= w[1]));
        assert!(a.points.iter().all(|p| p.t % 2 == 0 && p.x % 2 == 0));
    }

    #[test]
    fn longer_horizon_extends_shorter() {
        let d = DomainSpec::torus(4, 2);
        let a = sample_creations(3, &d, 1.0).unwrap();
        let b = sample_creations(3, &d, 2.0).unwrap();
        let cut: Vec<_> = b
            .points
            .iter()
            .copied()
            .filter(|p| p.t <= a.horizon)
            .collect();
        assert_eq!(a.points, cut);
    }

    #[test]
    fn mean_count_within_three_sigma() {
        let d = DomainSpec::torus(100, 5);
        let total: usize = (0..200)
            .map(|s| sample_creations(s, &d, 1.0).unwrap().len())
            .sum();
        let mean = total as f64 / 200.0;
        // Standard error of the mean is sqrt(4000 / 200).
        assert!(
            (mean - 4000.0).abs() < 3.0 * (4000.0f64 / 200.0).sqrt(),
            "mean {mean}"
        );
    }

    #[test]
    fn periodize_examples() {
        let d = DomainSpec::Window(crate::lattice::Window {
            a: -10.0,
            b: 10.0,
            c: -5,
            d: 5,
            margin: 0.0,
            buffer: 0,
        });
        let mut w = CreationSet::empty(d, ticks::units(1));
        let (m, n) = (3, 2);
        w.points = vec![
            CreationPoint {
                t: 5,
                y: 0,
                x: ticks::to_ticks(3.5),
            },
            CreationPoint {
                t: 6,
                y: 1,
                x: ticks::to_ticks(-1.0),
            },
            CreationPoint { t: 7, y: 2, x: 0 },
        ];
        let p = periodize(&w, m, n).unwrap();
        assert_eq!(
            p.points[0],
            CreationPoint {
                t: 5,
                y: 0,
                x: ticks::to_ticks(-2.5)
            }
        );
        assert_eq!(
            p.points[1],
            CreationPoint {
                t: 6,
                y: 1,
                x: ticks::to_ticks(-1.0)
            }
        );
        assert_eq!(p.points[2], CreationPoint { t: 7, y: -2, x: 0 });
    }
}
