//! Equalizing time allocation for one relay subset.
//!
//! With every receiver's mutual information set equal, the unnormalized
//! slot durations solve `L u = 1`; normalizing gives `t = u / sum(u)` and
//! the common rate `R = 1 / sum(u)`. The subset is accepted only when
//! `R > 0` and every slot is strictly positive.

use serde::{Deserialize, Serialize};

use crate::rate_model::{mutual_informations, RateMatrix, RelaySubset};
use crate::{Error, Result};

/// Slots at or below this are treated as non-positive.
pub const FEASIBILITY_TOL: f64 = 1e-12;

/// Diagonal entries with magnitude at or below this make a rate matrix singular.
pub const SINGULARITY_TOL: f64 = 1e-300;

/// Slot durations as fractions of the unit block, source slot first.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TimeAllocation(pub Vec<f64>);

impl TimeAllocation {
    pub fn uniform(slots: usize) -> Self {
        Self(vec![1.0 / slots as f64; slots])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    /// First slot (0-based) at or below [`FEASIBILITY_TOL`].
    pub fn first_nonpositive(&self) -> Option<usize> {
        self.0.iter().position(|&t| !(t > FEASIBILITY_TOL))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "slot")]
pub enum RejectReason {
    None,
    Singular,
    NegativeRate,
    /// The 0-based slot that came out non-positive.
    NonpositiveTime(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationResult {
    pub subset: RelaySubset,
    pub times: TimeAllocation,
    /// Achievable rate in bits/channel use; meaningful only when `feasible`.
    pub rate: f64,
    pub feasible: bool,
    pub reject_reason: RejectReason,
}

impl AllocationResult {
    pub(crate) fn rejected(subset: RelaySubset, times: TimeAllocation, rate: f64, reason: RejectReason) -> Self {
        Self {
            subset,
            times,
            rate,
            feasible: false,
            reject_reason: reason,
        }
    }

    /// Applies the feasibility checks to an already computed `(t, R)` pair.
    /// `rate` is `1 / sum(u)` and may be non-positive or infinite.
    pub(crate) fn judge(subset: RelaySubset, times: TimeAllocation, rate: f64) -> Self {
        if !(rate > 0.0 && rate.is_finite()) {
            return Self::rejected(subset, times, rate, RejectReason::NegativeRate);
        }
        if let Some(slot) = times.first_nonpositive() {
            return Self::rejected(subset, times, rate, RejectReason::NonpositiveTime(slot));
        }
        Self {
            subset,
            times,
            rate,
            feasible: true,
            reject_reason: RejectReason::None,
        }
    }
}

/// Forward substitution for a lower-triangular rate matrix.
pub fn solve_lower_triangular(rm: &RateMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    let n = rm.dim();
    if rhs.len() != n {
        return Err(Error::invalid(format!("rhs has length {}, matrix is {n}x{n}", rhs.len())));
    }
    let mut x = Vec::with_capacity(n);
    for r in 0..n {
        let diag = rm.get(r, r);
        if !(diag.abs() > SINGULARITY_TOL) {
            return Err(Error::SingularMatrix { row: r });
        }
        let acc: f64 = (0..r).map(|c| rm.get(r, c) * x[c]).sum();
        x.push((rhs[r] - acc) / diag);
    }
    Ok(x)
}

/// Equalizing allocation and feasibility verdict for the subset behind `rm`.
pub fn allocate(rm: &RateMatrix) -> AllocationResult {
    let subset = rm.subset().clone();
    let u = match solve_lower_triangular(rm, &vec![1.0; rm.dim()]) {
        Ok(u) => u,
        Err(_) => {
            return AllocationResult::rejected(subset, TimeAllocation::default(), 0.0, RejectReason::Singular)
        }
    };
    let total: f64 = u.iter().sum();
    let rate = 1.0 / total;
    let times = TimeAllocation(u.into_iter().map(|x| x * rate).collect());
    AllocationResult::judge(subset, times, rate)
}

/// Largest `|I_k - R|` over all receivers for the allocation in `result`.
pub fn verify_equalization(rm: &RateMatrix, result: &AllocationResult) -> Result<f64> {
    let info = mutual_informations(rm, result.times.as_slice())?;
    Ok(info.iter().map(|i| (i - result.rate).abs()).fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Square;
    use crate::rate_model::{build_rate_matrix, LinkCapacityMatrix};
    use proptest::prelude::*;

    /// Single-relay instance with the given source-relay, source-destination
    /// and relay-destination capacities.
    fn one_relay(l_sr: f64, l_sd: f64, l_rd: f64) -> RateMatrix {
        let caps = Square::from_rows(&[vec![0.0, l_sr, l_sd], vec![l_sr, 0.0, l_rd], vec![l_sd, l_rd, 0.0]]).unwrap();
        let caps = LinkCapacityMatrix::from_capacities(caps, None).unwrap();
        build_rate_matrix(&caps, &RelaySubset::new(vec![1], 1).unwrap()).unwrap()
    }

    fn direct(l_sd: f64) -> RateMatrix {
        let caps = Square::from_rows(&[vec![0.0, l_sd], vec![l_sd, 0.0]]).unwrap();
        let caps = LinkCapacityMatrix::from_capacities(caps, None).unwrap();
        build_rate_matrix(&caps, &RelaySubset::empty()).unwrap()
    }

    /// Max-min over t0 in (0, 1) for the single-relay case, by grid search.
    fn grid_max_min(rm: &RateMatrix, steps: usize) -> f64 {
        (1..steps)
            .map(|k| {
                let t0 = k as f64 / steps as f64;
                let i = mutual_informations(rm, &[t0, 1.0 - t0]).unwrap();
                i[0].min(i[1])
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    #[test]
    fn forward_substitution_examples() {
        let rm = one_relay(2.0, 1.0, 2.0);
        assert_eq!(solve_lower_triangular(&rm, &[1.0, 1.0]).unwrap(), vec![0.5, 0.25]);

        let caps = LinkCapacityMatrix::from_capacities(Square::filled(4, 1.0), None).unwrap();
        let mut mask = crate::rate_model::full_mask(4);
        let full = build_rate_matrix(&caps, &RelaySubset::new(vec![1, 2], 2).unwrap()).unwrap();
        let v = [0.3, -1.0, 2.5];
        let x = solve_lower_triangular(&full, &v).unwrap();
        let back = full.entries().mul_vec(&x);
        for (a, b) in back.iter().zip(&v) {
            assert!((a - b).abs() < 1e-15);
        }

        mask[(1, 2)] = false;
        let caps = LinkCapacityMatrix::from_capacities(Square::filled(4, 1.0), Some(mask)).unwrap();
        let rm = build_rate_matrix(&caps, &RelaySubset::new(vec![1, 2], 2).unwrap()).unwrap();
        assert_eq!(solve_lower_triangular(&rm, &[1.0; 3]), Err(Error::SingularMatrix { row: 1 }));
        assert!(solve_lower_triangular(&rm, &[1.0]).is_err());
    }

    #[test]
    fn identity_solve() {
        // Relay row [1, 0], destination row [0, 1].
        let caps = Square::from_rows(&[vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![0.0; 3]]).unwrap();
        let caps = LinkCapacityMatrix::from_capacities(caps, None).unwrap();
        let rm = build_rate_matrix(&caps, &RelaySubset::new(vec![1], 1).unwrap()).unwrap();
        assert_eq!(rm.entries(), &Square::identity(2));
        assert_eq!(solve_lower_triangular(&rm, &[0.7, -3.0]).unwrap(), vec![0.7, -3.0]);
    }

    #[test]
    fn allocate_feasible_single_relay() {
        let rm = one_relay(2.0, 1.0, 2.0);
        let res = allocate(&rm);
        assert!(res.feasible);
        assert_eq!(res.reject_reason, RejectReason::None);
        assert!((res.rate - 4.0 / 3.0).abs() < 1e-15);
        assert!((res.times.0[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((res.times.0[1] - 1.0 / 3.0).abs() < 1e-15);
        assert!(verify_equalization(&rm, &res).unwrap() < 1e-15);
        // Grid search over t0 agrees with the equalizing point.
        assert!((grid_max_min(&rm, 3000) - 4.0 / 3.0).abs() < 1e-3);
    }

    #[test]
    fn allocate_rejects_relay_dominated_by_direct_link() {
        let rm = one_relay(1.0, 2.0, 2.0);
        let res = allocate(&rm);
        assert!(!res.feasible);
        assert_eq!(res.reject_reason, RejectReason::NonpositiveTime(1));
    }

    #[test]
    fn allocate_direct_transmission() {
        let res = allocate(&direct(3.0));
        assert!(res.feasible);
        assert_eq!(res.rate, 3.0);
        assert_eq!(res.times.0, vec![1.0]);
        assert_eq!(verify_equalization(&direct(3.0), &res).unwrap(), 0.0);

        let res = allocate(&direct(0.0));
        assert!(!res.feasible);
        assert_eq!(res.reject_reason, RejectReason::Singular);
    }

    #[test]
    fn perturbed_allocation_is_not_equalized() {
        let rm = one_relay(2.0, 1.0, 2.0);
        let mut res = allocate(&rm);
        res.times = TimeAllocation(vec![0.7, 0.3]);
        let info = mutual_informations(&rm, res.times.as_slice()).unwrap();
        assert!((info[0] - 1.4).abs() < 1e-15 && (info[1] - 1.3).abs() < 1e-15);
        assert!(verify_equalization(&rm, &res).unwrap() > 0.05);
    }

    #[test]
    fn negative_total_is_rejected_as_negative_rate() {
        // u = (1, -3): sum -2, so R < 0.
        let caps = Square::from_rows(&[vec![0.0, 1.0, 4.0], vec![0.0, 0.0, 1.0], vec![0.0; 3]]).unwrap();
        let caps = LinkCapacityMatrix::from_capacities(caps, None).unwrap();
        let rm = build_rate_matrix(&caps, &RelaySubset::new(vec![1], 1).unwrap()).unwrap();
        let res = allocate(&rm);
        assert_eq!(res.reject_reason, RejectReason::NegativeRate);
        assert!(res.rate < 0.0);
    }

    fn random_caps(m: usize) -> impl Strategy<Value = (LinkCapacityMatrix, RelaySubset)> {
        proptest::collection::vec(0.05..6.0f64, (m + 2) * (m + 2)).prop_map(move |c| {
            let caps = LinkCapacityMatrix::from_capacities(Square::from_row_major(m + 2, c).unwrap(), None).unwrap();
            (caps, RelaySubset::new((1..=m).collect(), m).unwrap())
        })
    }

    fn scaled(caps: &LinkCapacityMatrix, c: f64) -> LinkCapacityMatrix {
        let n = caps.n_nodes();
        LinkCapacityMatrix::from_capacities(Square::from_fn(n, |i, j| caps.get(i, j) * c), None).unwrap()
    }

    proptest! {
        #[test]
        fn feasible_allocations_equalize((caps, subset) in (0usize..7).prop_flat_map(random_caps)) {
            let rm = build_rate_matrix(&caps, &subset).unwrap();
            let res = allocate(&rm);
            if res.feasible {
                prop_assert!(verify_equalization(&rm, &res).unwrap() <= 1e-9 * res.rate);
                prop_assert!((res.times.sum() - 1.0).abs() <= 1e-12);
                prop_assert!(res.times.0.iter().all(|&t| t > FEASIBILITY_TOL));
            }
        }

        #[test]
        fn allocation_is_scale_covariant((caps, subset) in (0usize..6).prop_flat_map(random_caps), c in 0.01..100.0f64) {
            let a = allocate(&build_rate_matrix(&caps, &subset).unwrap());
            let b = allocate(&build_rate_matrix(&scaled(&caps, c), &subset).unwrap());
            prop_assert_eq!(a.feasible, b.feasible);
            prop_assert!((b.rate - c * a.rate).abs() <= 1e-9 * (c * a.rate).abs().max(1.0));
            for (x, y) in a.times.0.iter().zip(&b.times.0) {
                prop_assert!((x - y).abs() <= 1e-9);
            }
        }
    }
}
