//! Instance generators and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use dfrelay_core::matrix::Square;
use dfrelay_core::rate_model::{build_rate_matrix, LinkCapacityMatrix, RelaySubset};
use rand::Rng;

/// Capacities drawn i.i.d. from Exp(1) on every ordered pair.
pub fn exp_caps(rng: &mut impl Rng, n_relays: usize) -> LinkCapacityMatrix {
    let n = n_relays + 2;
    let caps = Square::from_fn(n, |_, _| -(1.0 - rng.gen::<f64>()).ln());
    LinkCapacityMatrix::from_capacities(caps, None).unwrap()
}

/// Calls `visit` with every point of the simplex `sum(t) = 1, t >= 0` whose
/// coordinates are multiples of `1 / steps`.
pub fn simplex_grid(dim: usize, steps: usize, mut visit: impl FnMut(&[f64])) {
    fn rec(t: &mut Vec<f64>, dim: usize, left: usize, steps: usize, visit: &mut dyn FnMut(&[f64])) {
        if t.len() + 1 == dim {
            t.push(left as f64 / steps as f64);
            visit(t);
            t.pop();
            return;
        }
        for k in 0..=left {
            t.push(k as f64 / steps as f64);
            rec(t, dim, left - k, steps, visit);
            t.pop();
        }
    }
    rec(&mut Vec::with_capacity(dim), dim, steps, steps, &mut visit);
}

/// Largest min-over-receivers mutual information found on the simplex grid
/// for one subset.
pub fn grid_max_min(caps: &LinkCapacityMatrix, subset: &RelaySubset, steps: usize) -> f64 {
    let rm = build_rate_matrix(caps, subset).unwrap();
    let d = rm.dim();
    let mut best = f64::NEG_INFINITY;
    simplex_grid(d, steps, |t| {
        let mut worst = f64::INFINITY;
        for r in 0..d {
            let info: f64 = (0..=r).map(|c| rm.get(r, c) * t[c]).sum();
            worst = worst.min(info);
        }
        best = best.max(worst);
    });
    best
}

/// All permutations of `1..=n`.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, n: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == n {
            out.push(prefix.clone());
            return;
        }
        for r in 1..=n {
            if !prefix.contains(&r) {
                prefix.push(r);
                rec(prefix, n, out);
                prefix.pop();
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), n, &mut out);
    out
}
