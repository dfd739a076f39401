use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// An affine function `rho . (x, y) + offset`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffinePiece {
    pub rho: [f64; 2],
    #[serde(default)]
    pub offset: f64,
}

impl AffinePiece {
    fn eval(&self, x: f64, y: f64) -> f64 {
        self.rho[0] * x + self.rho[1] * y + self.offset
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Combine {
    Min,
    Max,
}

/// Continuous macroscopic profiles `f(x, y)` supported by the discretizer and
/// the PDE solver.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ContinuousProfile {
    Affine {
        rho: [f64; 2],
        #[serde(default)]
        offset: f64,
    },
    /// `rho . (x, y) + offset + amplitude * sin(k . (x, y))`.
    AffinePlusSinusoid {
        rho: [f64; 2],
        #[serde(default)]
        offset: f64,
        amplitude: f64,
        wavevector: [f64; 2],
    },
    /// Pointwise min or max of affine pieces.
    PiecewiseLinear {
        pieces: Vec<AffinePiece>,
        combine: Combine,
    },
}

impl ContinuousProfile {
    pub fn affine(rho1: f64, rho2: f64) -> Self {
        ContinuousProfile::Affine {
            rho: [rho1, rho2],
            offset: 0.0,
        }
    }

    /// The y-only wedge `max(-y/4, -y/2)`.
    pub fn wedge() -> Self {
        ContinuousProfile::PiecewiseLinear {
            pieces: vec![
                AffinePiece {
                    rho: [0.0, -0.25],
                    offset: 0.0,
                },
                AffinePiece {
                    rho: [0.0, -0.5],
                    offset: 0.0,
                },
            ],
            combine: Combine::Max,
        }
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            ContinuousProfile::Affine { rho, offset } => rho[0] * x + rho[1] * y + offset,
            ContinuousProfile::AffinePlusSinusoid {
                rho,
                offset,
                amplitude,
                wavevector,
            } => {
                rho[0] * x
                    + rho[1] * y
                    + offset
                    + amplitude * (wavevector[0] * x + wavevector[1] * y).sin()
            }
            ContinuousProfile::PiecewiseLinear { pieces, combine } => {
                let it = pieces.iter().map(|p| p.eval(x, y));
                match combine {
                    Combine::Max => it.fold(f64::NEG_INFINITY, f64::max),
                    Combine::Min => it.fold(f64::INFINITY, f64::min),
                }
            }
        }
    }

    /// Bound on `|df/dx|`.
    pub fn lipschitz_x(&self) -> f64 {
        match self {
            ContinuousProfile::Affine { rho, .. } => rho[0].abs(),
            ContinuousProfile::AffinePlusSinusoid {
                rho,
                amplitude,
                wavevector,
                ..
            } => rho[0].abs() + (amplitude * wavevector[0]).abs(),
            ContinuousProfile::PiecewiseLinear { pieces, .. } => {
                pieces.iter().map(|p| p.rho[0].abs()).fold(0.0, f64::max)
            }
        }
    }

    /// Bounds on `df/dy` over the plane.
    pub fn slope_y_bounds(&self) -> (f64, f64) {
        match self {
            ContinuousProfile::Affine { rho, .. } => (rho[1], rho[1]),
            ContinuousProfile::AffinePlusSinusoid {
                rho,
                amplitude,
                wavevector,
                ..
            } => {
                let a = (amplitude * wavevector[1]).abs();
                (rho[1] - a, rho[1] + a)
            }
            ContinuousProfile::PiecewiseLinear { pieces, .. } => pieces
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                    (lo.min(p.rho[1]), hi.max(p.rho[1]))
                }),
        }
    }

    /// True if the profile ignores `x`.
    pub fn is_y_only(&self) -> bool {
        self.lipschitz_x() == 0.0
    }

    /// Checks `f(x, y2) - f(x, y1)` in `[-(y2 - y1), 0]` for `y1 <= y2`.
    pub fn check_admissible(&self) -> Result<()> {
        let finite = |v: &[f64]| v.iter().all(|a| a.is_finite());
        let ok_finite = match self {
            ContinuousProfile::Affine { rho, offset } => finite(rho) && offset.is_finite(),
            ContinuousProfile::AffinePlusSinusoid {
                rho,
                offset,
                amplitude,
                wavevector,
            } => finite(rho) && finite(wavevector) && offset.is_finite() && amplitude.is_finite(),
            ContinuousProfile::PiecewiseLinear { pieces, .. } => {
                !pieces.is_empty()
                    && pieces
                        .iter()
                        .all(|p| finite(&p.rho) && p.offset.is_finite())
            }
        };
        if !ok_finite {
            return Err(Error::NotAdmissible("non-finite or empty profile".into()));
        }
        let (lo, hi) = self.slope_y_bounds();
        if lo < -1.0 - 1e-12 || hi > 1e-12 {
            return Err(Error::NotAdmissible(format!(
                "df/dy ranges over [{lo}, {hi}], outside [-1, 0]"
            )));
        }
        Ok(())
    }

    /// The profile plus a constant.
    pub fn plus(&self, c: f64) -> Self {
        let mut p = self.clone();
        match &mut p {
            ContinuousProfile::Affine { offset, .. }
            | ContinuousProfile::AffinePlusSinusoid { offset, .. } => *offset += c,
            ContinuousProfile::PiecewiseLinear { pieces, .. } => {
                pieces.iter_mut().for_each(|q| q.offset += c)
            }
        }
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wedge_values() {
        let w = ContinuousProfile::wedge();
        assert_eq!(w.eval(3.0, 4.0), -1.0);
        assert_eq!(w.eval(3.0, -4.0), 2.0);
        assert!(w.check_admissible().is_ok());
        assert!(w.is_y_only());
    }

    #[test]
    fn rejects_upward_slope() {
        assert!(ContinuousProfile::affine(0.0, 0.5)
            .check_admissible()
            .is_err());
        let s = ContinuousProfile::AffinePlusSinusoid {
            rho: [0.0, -0.5],
            offset: 0.0,
            amplitude: 1.0,
            wavevector: [0.0, 1.0],
        };
        assert!(s.check_admissible().is_err());
    }

    #[test]
    fn toml_round_trip() {
        let p = ContinuousProfile::AffinePlusSinusoid {
            rho: [0.1, -0.5],
            offset: 0.0,
            amplitude: 0.1,
            wavevector: [1.5, 0.0],
        };
        let s = toml::to_string(&p).unwrap();
        assert_eq!(toml::from_str::<ContinuousProfile>(&s).unwrap(), p);
    }
}
