//! Fixed-point space and time coordinates.
//!
//! Positions and times live on a grid of `2^-32` units. Sampled creations and
//! initial step positions are placed on even ticks, so collision times
//! `(x0_antikink - x0_kink) / 2` stay on the grid and every replay is
//! bit-identical regardless of where it restarts.

/// A coordinate measured in ticks.
pub type Tick = i64;

pub const TICK_SHIFT: u32 = 32;
pub const TICKS_PER_UNIT: i64 = 1 << TICK_SHIFT;
const SCALE: f64 = TICKS_PER_UNIT as f64;

/// Nearest tick to `x`.
pub fn to_ticks(x: f64) -> Tick {
    (x * SCALE).round() as i64
}

/// Nearest even tick to `x`.
pub fn to_even_ticks(x: f64) -> Tick {
    ((x * SCALE * 0.5).round() as i64) * 2
}

/// Exact conversion back to real units (ticks below 2^53 convert exactly).
pub fn to_f64(t: Tick) -> f64 {
    t as f64 / SCALE
}

/// Whole units as ticks.
pub fn units(n: i64) -> Tick {
    n * TICKS_PER_UNIT
}

/// Representative of `x` in `[lo, lo + period)`, with the number of periods removed.
pub fn wrap(x: Tick, lo: Tick, period: Tick) -> (Tick, i64) {
    let k = (x - lo).div_euclid(period);
    (x - k * period, k)
}

/// Format a float with 17 significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}
