//! Adaptive Gauss–Kronrod (7/15) quadrature for complex integrands.

// Nodes and weights are quoted in full from the standard tables.
#![allow(clippy::excessive_precision)]

use std::collections::BinaryHeap;

use num_complex::Complex64;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
// Gauss weights for the odd Kronrod nodes 1, 3, 5 and the centre.
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// Stopping rule: accept when the estimated error is below
/// `max(abs, rel * |I|)`.
#[derive(Clone, Copy, Debug)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_panels: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            abs: 1e-10,
            rel: 1e-12,
            max_panels: 20_000,
        }
    }
}

/// One 15-point rule on `[a, b]`: (Kronrod value, error estimate).
fn gk15<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64) -> (Complex64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let d = h * XGK[j];
        let s = f(c - d) + f(c + d);
        k += s * WGK[j];
        if j % 2 == 1 {
            g += s * WG[j / 2];
        }
    }
    (k * h, ((k - g) * h).norm())
}

struct Panel {
    a: f64,
    b: f64,
    val: Complex64,
    err: f64,
}

impl PartialEq for Panel {
    fn eq(&self, o: &Self) -> bool {
        self.err == o.err
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Panel {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&o.err)
    }
}

/// Integral and error estimate of `f` over `[a, b]`, starting from `panels`
/// equal pieces (useful for oscillatory integrands) and bisecting the worst
/// piece until the tolerance is met.
pub fn integrate<F: Fn(f64) -> Complex64>(
    f: F,
    a: f64,
    b: f64,
    panels: usize,
    tol: Tolerance,
) -> Result<(Complex64, f64)> {
    if a == b {
        return Ok((Complex64::new(0.0, 0.0), 0.0));
    }
    let n = panels.max(1);
    let mut heap = BinaryHeap::with_capacity(2 * n);
    let (mut total, mut err) = (Complex64::new(0.0, 0.0), 0.0);
    for i in 0..n {
        let pa = a + (b - a) * i as f64 / n as f64;
        let pb = if i + 1 == n {
            b
        } else {
            a + (b - a) * (i + 1) as f64 / n as f64
        };
        let (val, e) = gk15(&f, pa, pb);
        total += val;
        err += e;
        heap.push(Panel {
            a: pa,
            b: pb,
            val,
            err: e,
        });
    }
    while err > tol.abs.max(tol.rel * total.norm()) {
        if heap.len() >= tol.max_panels {
            return Err(Error::Quadrature { a, b, err });
        }
        let p = heap.pop().unwrap();
        let m = 0.5 * (p.a + p.b);
        if m <= p.a || m >= p.b {
            return Err(Error::Quadrature { a, b, err });
        }
        let (v1, e1) = gk15(&f, p.a, m);
        let (v2, e2) = gk15(&f, m, p.b);
        total += v1 + v2 - p.val;
        err += e1 + e2 - p.err;
        heap.push(Panel {
            a: p.a,
            b: m,
            val: v1,
            err: e1,
        });
        heap.push(Panel {
            a: m,
            b: p.b,
            val: v2,
            err: e2,
        });
    }
    // Re-sum to shed the drift of incremental updates.
    let total = heap.iter().fold(Complex64::new(0.0, 0.0), |s, p| s + p.val);
    let err = heap.iter().map(|p| p.err).sum();
    Ok((total, err))
}
