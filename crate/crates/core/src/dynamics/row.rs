//! Mutable row state for the simulator.
//!
//! Kinks and antikinks are kept in separate sorted deques of their
//! *reference positions*: `pos - t` for kinks and `pos + t` for antikinks.
//! All steps of one kind move together, so these keys never change between
//! events and counting steps left of a point is two binary searches.

use crate::lattice::{Row, Step, StepKind};
use crate::ticks::{self, Tick};
use std::collections::VecDeque;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Bounds {
    /// Positions live in `[lo, lo + period)` and wrap.
    Periodic { lo: Tick, period: Tick },
    /// Steps leaving `[lo, hi)` are dropped.
    Open { lo: Tick, hi: Tick },
}

impl Bounds {
    pub fn wrap(&self, x: Tick) -> Tick {
        match *self {
            Bounds::Periodic { lo, period } => ticks::wrap(x, lo, period).0,
            Bounds::Open { .. } => x,
        }
    }
}

/// A pending kink-antikink meeting, ordered by `(t, y, kink position)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub(crate) struct Collision {
    pub t: Tick,
    pub y: i64,
    /// Kink position at `t`.
    pub x: Tick,
    /// Antikink position at `t` (equal to `x`, or one tick right of it).
    pub xa: Tick,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub(crate) struct RowState {
    pub kinks: VecDeque<Tick>,
    pub anti: VecDeque<Tick>,
    /// Left limit of the height at the left edge of the domain.
    pub anchor: i64,
}

impl RowState {
    pub fn from_row(row: &Row, t0: Tick) -> Self {
        let mut s = RowState {
            anchor: row.anchor(),
            ..Default::default()
        };
        for st in row.steps() {
            match st.kind {
                StepKind::Kink => s.kinks.push_back(st.x - t0),
                StepKind::Antikink => s.anti.push_back(st.x + t0),
            }
        }
        s
    }

    pub fn to_row(&self, t: Tick) -> Row {
        let mut steps: Vec<Step> = self
            .kinks
            .iter()
            .map(|&k| Step {
                x: k + t,
                kind: StepKind::Kink,
            })
            .chain(self.anti.iter().map(|&a| Step {
                x: a - t,
                kind: StepKind::Antikink,
            }))
            .collect();
        steps.sort_unstable();
        Row::new(steps, self.anchor)
    }

    /// Brings every step back into the domain at time `t`.
    pub fn normalize(&mut self, t: Tick, b: &Bounds) {
        match *b {
            Bounds::Periodic { lo, period } => {
                let hi = lo + period;
                while let Some(&k) = self.kinks.back() {
                    if k + t < hi {
                        break;
                    }
                    self.kinks.pop_back();
                    self.kinks.push_front(k - period);
                    self.anchor += 1;
                }
                while let Some(&a) = self.anti.front() {
                    if a - t >= lo {
                        break;
                    }
                    self.anti.pop_front();
                    self.anti.push_back(a + period);
                    self.anchor += 1;
                }
            }
            Bounds::Open { lo, hi } => {
                while self.kinks.back().is_some_and(|&k| k + t >= hi) {
                    self.kinks.pop_back();
                }
                while self.anti.front().is_some_and(|&a| a - t < lo) {
                    self.anti.pop_front();
                    self.anchor += 1;
                }
            }
        }
    }

    /// Upper semi-continuous height at `x` (state normalized at `t`).
    pub fn value_at(&self, x: Tick, t: Tick) -> i64 {
        let a = self.anti.partition_point(|&a| a <= x + t) as i64;
        let k = self.kinks.partition_point(|&k| k < x - t) as i64;
        self.anchor + a - k
    }

    pub fn has_step_at(&self, x: Tick, t: Tick) -> bool {
        self.kinks.binary_search(&(x - t)).is_ok() || self.anti.binary_search(&(x + t)).is_ok()
    }

    pub fn is_empty(&self) -> bool {
        self.kinks.is_empty() && self.anti.is_empty()
    }

    pub fn insert_pair(&mut self, x: Tick, t: Tick) {
        let i = self.kinks.partition_point(|&k| k < x - t);
        self.kinks.insert(i, x - t);
        let j = self.anti.partition_point(|&a| a < x + t);
        self.anti.insert(j, x + t);
    }

    /// Removes the kink at `xk` and the antikink at `xa` if both are present.
    pub fn remove_pair(&mut self, xk: Tick, xa: Tick, t: Tick) -> bool {
        match (
            self.kinks.binary_search(&(xk - t)),
            self.anti.binary_search(&(xa + t)),
        ) {
            (Ok(i), Ok(j)) => {
                self.kinks.remove(i);
                self.anti.remove(j);
                true
            }
            _ => false,
        }
    }

    /// Nearest step strictly left of `x`, cyclically on a periodic row. The
    /// position is unwrapped so that it is below `x`.
    pub fn prev_step(&self, x: Tick, t: Tick, b: &Bounds) -> Option<(StepKind, Tick)> {
        let i = self.kinks.partition_point(|&k| k < x - t);
        let j = self.anti.partition_point(|&a| a < x + t);
        let k = (i > 0).then(|| self.kinks[i - 1] + t);
        let a = (j > 0).then(|| self.anti[j - 1] - t);
        if let Some(r) = pick_max(k, a) {
            return Some(r);
        }
        match *b {
            Bounds::Periodic { period, .. } => pick_max(
                self.kinks.back().map(|&k| k + t),
                self.anti.back().map(|&a| a - t),
            )
            .map(|(kind, p)| (kind, p - period)),
            Bounds::Open { .. } => None,
        }
    }

    /// Nearest step strictly right of `x`, cyclically on a periodic row.
    pub fn next_step(&self, x: Tick, t: Tick, b: &Bounds) -> Option<(StepKind, Tick)> {
        let i = self.kinks.partition_point(|&k| k <= x - t);
        let j = self.anti.partition_point(|&a| a <= x + t);
        let k = self.kinks.get(i).map(|&k| k + t);
        let a = self.anti.get(j).map(|&a| a - t);
        if let Some(r) = pick_min(k, a) {
            return Some(r);
        }
        match *b {
            Bounds::Periodic { period, .. } => pick_min(
                self.kinks.front().map(|&k| k + t),
                self.anti.front().map(|&a| a - t),
            )
            .map(|(kind, p)| (kind, p + period)),
            Bounds::Open { .. } => None,
        }
    }
}

/// Rightmost of two candidates; on a tie the kink is to the right.
fn pick_max(k: Option<Tick>, a: Option<Tick>) -> Option<(StepKind, Tick)> {
    match (k, a) {
        (Some(k), Some(a)) if a > k => Some((StepKind::Antikink, a)),
        (Some(k), _) => Some((StepKind::Kink, k)),
        (None, Some(a)) => Some((StepKind::Antikink, a)),
        (None, None) => None,
    }
}

/// Leftmost of two candidates; on a tie the antikink is to the left.
fn pick_min(k: Option<Tick>, a: Option<Tick>) -> Option<(StepKind, Tick)> {
    match (k, a) {
        (Some(k), Some(a)) if k < a => Some((StepKind::Kink, k)),
        (_, Some(a)) => Some((StepKind::Antikink, a)),
        (Some(k), None) => Some((StepKind::Kink, k)),
        (None, None) => None,
    }
}

/// Meeting of a kink at `xk` and an antikink at `xa >= xk` (unwrapped
/// positions at time `t`).
pub(crate) fn collision(xk: Tick, xa: Tick, t: Tick, y: i64, b: &Bounds) -> Collision {
    let dt = (xa - xk).div_euclid(2);
    Collision {
        t: t + dt,
        y,
        x: b.wrap(xk + dt),
        xa: b.wrap(xa - dt),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ticks::units;

    fn periodic(m: i64) -> Bounds {
        Bounds::Periodic {
            lo: -units(m),
            period: units(2 * m),
        }
    }

    #[test]
    fn wrap_kink_raises_anchor() {
        let b = periodic(1);
        let mut r = RowState {
            kinks: VecDeque::from(vec![units(1) / 2]),
            anti: VecDeque::from(vec![0]),
            anchor: 0,
        };
        // Kink at 0.5, antikink at 0: h(-1^-) = 0, p = 0.
        let t = units(1);
        r.normalize(t, &b);
        // Kink now at 1.5 -> -0.5; antikink at -1 -> wraps? -1 is in range.
        assert_eq!(r.kinks[0] + t, -units(1) / 2);
        assert_eq!(r.anchor, 1);
        assert_eq!(r.value_at(-units(1), t), 1 + 1);
        assert_eq!(r.value_at(0, t), 1);
    }

    #[test]
    fn neighbors_wrap_around() {
        let b = periodic(2);
        let mut r = RowState::default();
        r.insert_pair(0, 0);
        let (k, p) = r.prev_step(-units(1), 0, &b).unwrap();
        assert_eq!((k, p), (StepKind::Kink, -units(4)));
        let (k, p) = r.next_step(units(1), 0, &b).unwrap();
        assert_eq!((k, p), (StepKind::Antikink, units(4)));
        let c = collision(0, units(4), 0, 0, &b);
        assert_eq!(c.t, units(2));
        assert_eq!((c.x, c.xa), (-units(2), -units(2)));
    }

    #[test]
    fn open_bounds_drop_steps() {
        let b = Bounds::Open {
            lo: 0,
            hi: units(2),
        };
        let mut r = RowState::default();
        r.insert_pair(units(1), 0);
        r.normalize(units(3) / 2, &b);
        assert!(r.is_empty());
        assert_eq!(r.anchor, 1);
    }
}
