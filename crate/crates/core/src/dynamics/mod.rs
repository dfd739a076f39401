//! Exact event-driven simulation.
//!
//! Kinks move right at speed one, antikinks left. A kink meeting an antikink
//! annihilates with it. A creation at `(x, y, t)` inserts an antikink-kink
//! pair at `x` iff, just before `t`, `h(x, y-1) - h(x, y) = 1`,
//! `h(x, y) - h(x, y+1) = 0` and row `y` has no step at `x`.
//!
//! Events are processed in `(t, y, x)` order; on an exact tie a collision
//! goes before a creation. Collision predictions live in a lazily
//! invalidated heap: an entry is acted on only if both of its steps are
//! still present when it is popped.

mod creations;
mod row;

pub use creations::{
    periodize, sample_creations, CreationPoint, CreationSet, CreationStatus, CreationStream,
    INTENSITY,
};

use crate::error::{Error, Result};
use crate::lattice::{validate, DomainSpec, HeightField, StepKind};
use crate::ticks::{self, fmt17, Tick};
use row::{collision, Bounds, Collision, RowState};
use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};
use std::io::Write;

/// What happened at one event.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EventKind {
    Creation { effective: bool },
    Annihilation,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LogEvent {
    pub t: Tick,
    pub y: i64,
    pub x: Tick,
    pub kind: EventKind,
}

#[derive(Clone, Debug, Default)]
pub struct EvolveOptions {
    /// Extra snapshot times in `(0, t_end)`. The initial and final fields
    /// are always kept.
    pub snapshot_times: Vec<f64>,
    /// Keep the full event log. Needed by [`height_at`] between snapshots.
    pub record_events: bool,
}

impl EvolveOptions {
    /// Eight evenly spaced snapshots and a full log.
    pub fn recorded(t_end: f64) -> Self {
        EvolveOptions {
            snapshot_times: (1..8).map(|k| t_end * k as f64 / 8.0).collect(),
            record_events: true,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EvolveStats {
    pub creations: u64,
    pub effective: u64,
    pub annihilations: u64,
}

/// Outcome of [`evolve`].
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub initial: HeightField,
    pub t_end: Tick,
    /// Snapshots in time order, starting at `0` and ending at `t_end`.
    pub snapshots: Vec<(Tick, HeightField)>,
    /// All events in processing order; empty unless recorded.
    pub events: Vec<LogEvent>,
    pub stats: EvolveStats,
    recorded: bool,
    effective_by_row: BTreeMap<i64, Vec<(Tick, Tick)>>,
}

impl Trajectory {
    pub fn final_field(&self) -> &HeightField {
        &self.snapshots.last().unwrap().1
    }

    pub fn is_recorded(&self) -> bool {
        self.recorded
    }

    /// Effective creations of row `y` as `(x, t)` with `t <= t_max`.
    pub fn effective_points(&self, y: i64, t_max: Tick) -> Vec<(Tick, Tick)> {
        self.effective_by_row
            .get(&y)
            .map(|v| {
                v.iter()
                    .filter(|&&(t, _)| t <= t_max)
                    .map(|&(t, x)| (x, t))
                    .collect()
            })
            .unwrap_or_default()
    }

    /// Creation flags in event order.
    pub fn creations(&self) -> impl Iterator<Item = (CreationPoint, CreationStatus)> + '_ {
        self.events.iter().filter_map(|e| match e.kind {
            EventKind::Creation { effective } => Some((
                CreationPoint {
                    t: e.t,
                    y: e.y,
                    x: e.x,
                },
                if effective {
                    CreationStatus::Effective
                } else {
                    CreationStatus::Rejected
                },
            )),
            EventKind::Annihilation => None,
        })
    }

    /// Annihilations as `(x, y, t)`.
    pub fn annihilations(&self) -> impl Iterator<Item = (Tick, i64, Tick)> + '_ {
        self.events
            .iter()
            .filter(|e| e.kind == EventKind::Annihilation)
            .map(|e| (e.x, e.y, e.t))
    }

    /// Writes the event log as NDJSON, one event per line in `(t, y, x)` order.
    pub fn write_events<W: Write>(&self, mut out: W) -> Result<()> {
        for e in &self.events {
            let (kind, eff) = match e.kind {
                EventKind::Creation { effective } => ("creation", effective),
                EventKind::Annihilation => ("annihilation", true),
            };
            writeln!(
                out,
                "{{\"t\":{},\"kind\":\"{kind}\",\"x\":{},\"y\":{},\"effective\":{eff}}}",
                fmt17(ticks::to_f64(e.t)),
                fmt17(ticks::to_f64(e.x)),
                e.y
            )?;
        }
        Ok(())
    }
}

struct Engine {
    rows: Vec<RowState>,
    bounds: Bounds,
    y_min: i64,
    /// Vertical winding on a torus.
    torus_q: Option<i64>,
    /// Creations are accepted only in rows strictly between these.
    active: (i64, i64),
    heap: BinaryHeap<Reverse<Collision>>,
    record: bool,
    events: Vec<LogEvent>,
    stats: EvolveStats,
}

impl Engine {
    fn new(initial: &HeightField, active: (i64, i64)) -> Self {
        let (lo, hi) = initial.domain().x_range();
        let bounds = match initial.domain() {
            DomainSpec::Torus { .. } => Bounds::Periodic {
                lo,
                period: hi - lo,
            },
            DomainSpec::Window(_) => Bounds::Open { lo, hi },
        };
        let mut e = Engine {
            rows: initial
                .rows()
                .iter()
                .map(|r| RowState::from_row(r, 0))
                .collect(),
            bounds,
            y_min: initial.y_min(),
            torus_q: initial.winding().map(|w| w.q),
            active,
            heap: BinaryHeap::new(),
            record: false,
            events: Vec::new(),
            stats: EvolveStats::default(),
        };
        for i in 0..e.rows.len() {
            let y = e.y_min + i as i64;
            let r = &e.rows[i];
            let mut found = Vec::new();
            for &k in &r.kinks {
                if let Some((StepKind::Antikink, xa)) = r.next_step(k, 0, &bounds) {
                    found.push(collision(k, xa, 0, y, &bounds));
                }
            }
            e.heap.extend(found.into_iter().map(Reverse));
        }
        e
    }

    fn idx(&self, y: i64) -> usize {
        (y - self.y_min) as usize
    }

    /// Height of row `y` (with the vertical wrap on a torus), normalizing it first.
    fn height(&mut self, x: Tick, y: i64, t: Tick) -> Option<i64> {
        let n_rows = self.rows.len() as i64;
        let (yy, shift) = match self.torus_q {
            Some(q) => {
                let (w, k) = ticks::wrap(y, self.y_min, n_rows);
                (w, -k * q)
            }
            None if y < self.y_min || y >= self.y_min + n_rows => return None,
            None => (y, 0),
        };
        let i = self.idx(yy);
        let b = self.bounds;
        self.rows[i].normalize(t, &b);
        Some(self.rows[i].value_at(x, t) + shift)
    }

    fn creation(&mut self, c: CreationPoint) {
        self.stats.creations += 1;
        let effective = self.accepts(c);
        if effective {
            self.stats.effective += 1;
            let b = self.bounds;
            let i = self.idx(c.y);
            let r = &mut self.rows[i];
            let prev = r.prev_step(c.x, c.t, &b);
            let next = r.next_step(c.x, c.t, &b);
            r.insert_pair(c.x, c.t);
            match (prev, next) {
                (None, None) => {
                    if let Bounds::Periodic { period, .. } = b {
                        self.heap
                            .push(Reverse(collision(c.x, c.x + period, c.t, c.y, &b)));
                    }
                }
                _ => {
                    if let Some((StepKind::Kink, xk)) = prev {
                        self.heap.push(Reverse(collision(xk, c.x, c.t, c.y, &b)));
                    }
                    if let Some((StepKind::Antikink, xa)) = next {
                        self.heap.push(Reverse(collision(c.x, xa, c.t, c.y, &b)));
                    }
                }
            }
        }
        if self.record {
            self.events.push(LogEvent {
                t: c.t,
                y: c.y,
                x: c.x,
                kind: EventKind::Creation { effective },
            });
        }
    }

    fn accepts(&mut self, c: CreationPoint) -> bool {
        if c.y <= self.active.0 || c.y >= self.active.1 {
            return false;
        }
        let Some(h) = self.height(c.x, c.y, c.t) else {
            return false;
        };
        let i = self.idx(c.y);
        if self.rows[i].has_step_at(c.x, c.t) {
            return false;
        }
        let below = self.height(c.x, c.y - 1, c.t);
        let above = self.height(c.x, c.y + 1, c.t);
        matches!((below, above), (Some(b), Some(a)) if b - h == 1 && h == a)
    }

    fn collide(&mut self, c: Collision) {
        let i = self.idx(c.y);
        let b = self.bounds;
        let r = &mut self.rows[i];
        r.normalize(c.t, &b);
        if !r.remove_pair(c.x, c.xa, c.t) {
            return;
        }
        self.stats.annihilations += 1;
        if self.record {
            self.events.push(LogEvent {
                t: c.t,
                y: c.y,
                x: c.x,
                kind: EventKind::Annihilation,
            });
        }
        if r.is_empty() {
            return;
        }
        if let (Some((StepKind::Kink, xk)), Some((StepKind::Antikink, xa))) =
            (r.prev_step(c.x, c.t, &b), r.next_step(c.xa, c.t, &b))
        {
            self.heap.push(Reverse(collision(xk, xa, c.t, c.y, &b)));
        }
    }

    fn snapshot(&mut self, t: Tick, like: &HeightField) -> Result<HeightField> {
        let b = self.bounds;
        let rows = self
            .rows
            .iter_mut()
            .map(|r| {
                r.normalize(t, &b);
                r.to_row(t)
            })
            .collect();
        HeightField::new(*like.domain(), like.winding(), rows)
    }

    /// Processes every event with time `<= t_end`, taking snapshots on the way.
    fn run(
        &mut self,
        initial: &HeightField,
        creations: &mut dyn Iterator<Item = CreationPoint>,
        t_end: Tick,
        snap_times: &[Tick],
    ) -> Result<Vec<(Tick, HeightField)>> {
        let mut snaps = vec![(0, initial.clone())];
        let mut si = 0;
        let mut pending = creations.next();
        loop {
            let nc = pending.filter(|p| p.t <= t_end);
            let nk = self.heap.peek().map(|r| r.0).filter(|k| k.t <= t_end);
            let next_t = match (nc, nk) {
                (None, None) => None,
                (Some(c), None) => Some(c.t),
                (None, Some(k)) => Some(k.t),
                (Some(c), Some(k)) => Some(c.t.min(k.t)),
            };
            while si < snap_times.len() && next_t.is_none_or(|t| snap_times[si] < t) {
                let s = self.snapshot(snap_times[si], initial)?;
                snaps.push((snap_times[si], s));
                si += 1;
            }
            match (nc, nk) {
                (None, None) => break,
                (Some(c), Some(k)) if (k.t, k.y, k.x) <= (c.t, c.y, c.x) => {
                    self.heap.pop();
                    self.collide(k);
                }
                (Some(c), _) => {
                    self.creation(c);
                    pending = creations.next();
                }
                (None, Some(k)) => {
                    self.heap.pop();
                    self.collide(k);
                }
            }
        }
        if snaps.last().map(|s| s.0) != Some(t_end) {
            let s = self.snapshot(t_end, initial)?;
            snaps.push((t_end, s));
        }
        Ok(snaps)
    }
}

/// Rows strictly between the returned pair may accept creations. On a torus
/// every row does. In a window the outermost creation-free rows inside the
/// vertical buffer act as barriers: a row without creations evolves on its
/// own, which decouples the window from everything beyond it.
fn active_rows(initial: &HeightField, omega: Option<&CreationSet>) -> (i64, i64) {
    let (y0, y1) = initial.domain().y_range();
    let DomainSpec::Window(w) = initial.domain() else {
        return (y0 - 1, y1 + 1);
    };
    let Some(omega) = omega else { return (y0, y1) };
    let busy: std::collections::BTreeSet<i64> = omega.points.iter().map(|p| p.y).collect();
    let lower = (y0..w.c).rev().find(|y| !busy.contains(y));
    let upper = (w.d + 1..=y1).find(|y| !busy.contains(y));
    if lower.is_none() || upper.is_none() {
        log::warn!(
            "no creation-free barrier row within the vertical buffer of {} rows; freezing the outermost rows",
            w.buffer
        );
    }
    (lower.unwrap_or(y0), upper.unwrap_or(y1))
}

fn snapshot_ticks(opts: &EvolveOptions, t_end: Tick) -> Vec<Tick> {
    let mut v: Vec<Tick> = opts
        .snapshot_times
        .iter()
        .map(|&s| ticks::to_ticks(s))
        .filter(|&s| s > 0 && s < t_end)
        .collect();
    v.sort_unstable();
    v.dedup();
    v
}

fn check_window_margin(initial: &HeightField, t_end: Tick) {
    if let DomainSpec::Window(w) = initial.domain() {
        if w.margin < ticks::to_f64(t_end) {
            log::warn!(
                "window margin {} is smaller than the horizon {}",
                w.margin,
                ticks::to_f64(t_end)
            );
        }
    }
}

fn finish(
    initial: &HeightField,
    t_end: Tick,
    engine: Engine,
    snapshots: Vec<(Tick, HeightField)>,
) -> Trajectory {
    let mut effective_by_row: BTreeMap<i64, Vec<(Tick, Tick)>> = BTreeMap::new();
    for e in &engine.events {
        if e.kind == (EventKind::Creation { effective: true }) {
            effective_by_row.entry(e.y).or_default().push((e.t, e.x));
        }
    }
    Trajectory {
        initial: initial.clone(),
        t_end,
        snapshots,
        recorded: engine.record,
        events: engine.events,
        stats: engine.stats,
        effective_by_row,
    }
}

/// Runs the dynamics from `initial` with creations `omega` up to `t_end`
/// (in ticks).
pub fn evolve_ticks(
    initial: &HeightField,
    omega: &CreationSet,
    t_end: Tick,
    opts: &EvolveOptions,
) -> Result<Trajectory> {
    validate(initial).into_result()?;
    if t_end < 0 {
        return Err(Error::InvalidArgument("t_end must be non-negative".into()));
    }
    if omega.horizon < t_end {
        return Err(Error::HorizonTooShort {
            horizon: ticks::to_f64(omega.horizon),
            t_end: ticks::to_f64(t_end),
        });
    }
    check_window_margin(initial, t_end);
    let mut engine = Engine::new(initial, active_rows(initial, Some(omega)));
    engine.record = opts.record_events;
    let (lo, hi) = initial.domain().x_range();
    let (y0, y1) = initial.domain().y_range();
    let mut it = omega
        .points
        .iter()
        .copied()
        .filter(|p| p.x >= lo && p.x < hi && p.y >= y0 && p.y <= y1);
    let snaps = engine.run(initial, &mut it, t_end, &snapshot_ticks(opts, t_end))?;
    Ok(finish(initial, t_end, engine, snaps))
}

/// Runs the dynamics from `initial` with creations `omega` up to `t_end`.
pub fn evolve(
    initial: &HeightField,
    omega: &CreationSet,
    t_end: f64,
    opts: &EvolveOptions,
) -> Result<Trajectory> {
    evolve_ticks(initial, omega, ticks::to_ticks(t_end), opts)
}

/// Like [`evolve`], with creations drawn lazily from `seed` instead of a
/// materialized set. Produces exactly the run of
/// `evolve(initial, &sample_creations(seed, domain, t_end), ..)` without
/// holding the creations in memory. Window domains freeze their outermost
/// rows.
pub fn evolve_seeded(
    initial: &HeightField,
    seed: u64,
    t_end: f64,
    opts: &EvolveOptions,
) -> Result<Trajectory> {
    validate(initial).into_result()?;
    let te = ticks::to_ticks(t_end);
    check_window_margin(initial, te);
    let mut stream = CreationStream::new(seed, initial.domain(), t_end)?;
    let mut engine = Engine::new(initial, active_rows(initial, None));
    engine.record = opts.record_events;
    let snaps = engine.run(initial, &mut stream, te, &snapshot_ticks(opts, te))?;
    Ok(finish(initial, te, engine, snaps))
}

/// Exact height `h(x, y, t)` (ticks) by replaying row `y` from the latest
/// snapshot at or before `t` with its logged effective creations.
pub fn height_at_ticks(traj: &Trajectory, x: Tick, y: i64, t: Tick) -> Result<i64> {
    if t < 0 || t > traj.t_end {
        return Err(Error::InvalidArgument(format!(
            "time {} outside [0, t_end]",
            ticks::to_f64(t)
        )));
    }
    let si = traj.snapshots.partition_point(|s| s.0 <= t) - 1;
    let (ts, snap) = &traj.snapshots[si];
    if *ts == t {
        return snap.eval_ticks(x, y);
    }
    if !traj.recorded {
        return Err(Error::InvalidArgument(
            "trajectory has no event log; query a snapshot time".into(),
        ));
    }
    let domain = *snap.domain();
    let (lo, hi) = domain.x_range();
    let (mut yy, mut xx, mut shift) = (y, x, 0);
    if let (DomainSpec::Torus { n, .. }, Some(w)) = (domain, snap.winding()) {
        let (xw, kx) = ticks::wrap(x, lo, hi - lo);
        let (yw, ky) = ticks::wrap(y, -n, 2 * n);
        (yy, xx, shift) = (yw, xw, kx * w.p - ky * w.q);
    } else if x < lo || x >= hi {
        return Err(Error::OutOfDomain {
            x: ticks::to_f64(x),
            y,
        });
    }
    let row = snap.row(yy).ok_or(Error::OutOfDomain {
        x: ticks::to_f64(x),
        y,
    })?;
    let b = match domain {
        DomainSpec::Torus { .. } => Bounds::Periodic {
            lo,
            period: hi - lo,
        },
        DomainSpec::Window(_) => Bounds::Open { lo, hi },
    };
    let mut st = RowState::from_row(row, *ts);
    let mut heap: BinaryHeap<Reverse<Collision>> = BinaryHeap::new();
    for &k in &st.kinks {
        if let Some((StepKind::Antikink, xa)) = st.next_step(k + ts, *ts, &b) {
            heap.push(Reverse(collision(k + ts, xa, *ts, yy, &b)));
        }
    }
    let empty = Vec::new();
    let creations = traj.effective_by_row.get(&yy).unwrap_or(&empty);
    let start = creations.partition_point(|c| c.0 <= *ts);
    let mut ci = start;
    loop {
        let nc = creations.get(ci).copied().filter(|c| c.0 <= t);
        let nk = heap.peek().map(|r| r.0).filter(|k| k.t <= t);
        match (nc, nk) {
            (None, None) => break,
            (Some((tc, xc)), nk) if nk.is_none_or(|k| (k.t, k.x) > (tc, xc)) => {
                st.normalize(tc, &b);
                let prev = st.prev_step(xc, tc, &b);
                let next = st.next_step(xc, tc, &b);
                st.insert_pair(xc, tc);
                match (prev, next) {
                    (None, None) => {
                        if let Bounds::Periodic { period, .. } = b {
                            heap.push(Reverse(collision(xc, xc + period, tc, yy, &b)));
                        }
                    }
                    _ => {
                        if let Some((StepKind::Kink, xk)) = prev {
                            heap.push(Reverse(collision(xk, xc, tc, yy, &b)));
                        }
                        if let Some((StepKind::Antikink, xa)) = next {
                            heap.push(Reverse(collision(xc, xa, tc, yy, &b)));
                        }
                    }
                }
                ci += 1;
            }
            (_, Some(k)) => {
                heap.pop();
                st.normalize(k.t, &b);
                if st.remove_pair(k.x, k.xa, k.t) && !st.is_empty() {
                    if let (Some((StepKind::Kink, xk)), Some((StepKind::Antikink, xa))) =
                        (st.prev_step(k.x, k.t, &b), st.next_step(k.xa, k.t, &b))
                    {
                        heap.push(Reverse(collision(xk, xa, k.t, yy, &b)));
                    }
                }
            }
            (Some(_), None) => unreachable!(),
        }
    }
    st.normalize(t, &b);
    Ok(st.value_at(xx, t) + shift)
}

/// Exact height `h(x, y, t)`; `x` and `t` are rounded to ticks.
pub fn height_at(traj: &Trajectory, x: f64, y: i64, t: f64) -> Result<i64> {
    height_at_ticks(traj, ticks::to_ticks(x), y, ticks::to_ticks(t))
}

/// Runs to `t` in one go and, separately, to `s` followed by a restart from
/// that field with the time-shifted creations. Both final fields are
/// returned; the dynamics is Markov, so they coincide.
pub fn run_markov_split(
    initial: &HeightField,
    omega: &CreationSet,
    s: f64,
    t: f64,
) -> Result<(HeightField, HeightField)> {
    let (st, tt) = (ticks::to_ticks(s), ticks::to_ticks(t));
    if !(0 <= st && st <= tt) {
        return Err(Error::InvalidArgument(format!(
            "need 0 <= s <= t, got s={s}, t={t}"
        )));
    }
    let opts = EvolveOptions::default();
    let one = evolve_ticks(initial, omega, tt, &opts)?;
    let mid = evolve_ticks(initial, omega, st, &opts)?;
    let two = evolve_ticks(mid.final_field(), &omega.shifted(st), tt - st, &opts)?;
    Ok((one.final_field().clone(), two.final_field().clone()))
}
