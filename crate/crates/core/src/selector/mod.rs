//! Choosing the relay subset with the highest achievable rate.
//!
//! Three searches share one tie-break rule ([`prefer`]):
//!
//! * [`brute_force_select`] solves every subset from scratch and serves as
//!   the reference.
//! * [`recursive_select`] walks the subset tree depth-first, growing the
//!   inverse of each rate matrix from its parent's in `O(p^2)` and skipping
//!   subtrees whose shared slot prefix is already non-positive.
//! * [`equal_time_select`] is the non-optimized baseline: uniform slots,
//!   rate equal to the smallest mutual information.

mod recursive;

use serde::{Deserialize, Serialize};

use crate::allocator::{allocate, AllocationResult, RejectReason, TimeAllocation};
use crate::rate_model::{build_rate_matrix, LinkCapacityMatrix, RelaySubset};
use crate::{Error, Result};

pub use recursive::{
    extend_inverse, extend_solution, recursive_select, recursive_select_observed, InverseCache, OpTally,
    SearchObserver,
};

/// Relative tolerance for treating two rates as equal, scaled by `max(1, R)`.
pub const RATE_TIE_TOL: f64 = 1e-9;

/// Tally of rejected candidates by reason.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectCounts {
    pub singular: u64,
    pub negative_rate: u64,
    pub nonpositive_time: u64,
}

impl RejectCounts {
    pub(crate) fn record(&mut self, reason: RejectReason) {
        match reason {
            RejectReason::None => {}
            RejectReason::Singular => self.singular += 1,
            RejectReason::NegativeRate => self.negative_rate += 1,
            RejectReason::NonpositiveTime(_) => self.nonpositive_time += 1,
        }
    }

    pub fn add(&mut self, other: &RejectCounts) {
        self.singular += other.singular;
        self.negative_rate += other.negative_rate;
        self.nonpositive_time += other.nonpositive_time;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationOutcome {
    pub best: AllocationResult,
    pub candidates_evaluated: u64,
    pub candidates_pruned: u64,
    /// Sum of [`op_count`] over the evaluated non-empty subsets.
    pub op_count_reported: u64,
    pub rejects: RejectCounts,
}

/// Whether a candidate with `rate` over `subset` should replace the incumbent.
///
/// Higher rate wins; rates within `RATE_TIE_TOL * max(1, R)` tie, and ties go
/// to fewer relays, then to the lexicographically smaller subset.
pub fn prefer(rate: f64, subset: &RelaySubset, best_rate: f64, best_subset: &RelaySubset) -> bool {
    let tol = RATE_TIE_TOL * best_rate.abs().max(1.0);
    if rate > best_rate + tol {
        true
    } else if rate >= best_rate - tol {
        (subset.len(), subset.indices()) < (best_subset.len(), best_subset.indices())
    } else {
        false
    }
}

pub(crate) struct Incumbent(Option<AllocationResult>);

impl Incumbent {
    pub(crate) fn new() -> Self {
        Self(None)
    }

    pub(crate) fn would_take(&self, rate: f64, subset: &RelaySubset) -> bool {
        match &self.0 {
            None => true,
            Some(b) => prefer(rate, subset, b.rate, &b.subset),
        }
    }

    pub(crate) fn offer(&mut self, candidate: AllocationResult) {
        if candidate.feasible && self.would_take(candidate.rate, &candidate.subset) {
            self.0 = Some(candidate);
        }
    }

    pub(crate) fn into_inner(self) -> Option<AllocationResult> {
        self.0
    }
}

fn check_pool_size(n: usize) -> Result<()> {
    if n >= 63 {
        return Err(Error::invalid(format!("{n} potential relays is too many to enumerate")));
    }
    Ok(())
}

/// Solves every subset of the relay pool independently and keeps the best.
pub fn brute_force_select(caps: &LinkCapacityMatrix) -> Result<OptimizationOutcome> {
    let n = caps.n_relays();
    check_pool_size(n)?;
    let mut best = Incumbent::new();
    let mut rejects = RejectCounts::default();
    let mut op_count_reported = 0;
    for bits in 0..1u64 << n {
        let subset = RelaySubset::from_bits(bits, n);
        if !subset.is_empty() {
            op_count_reported += op_count(subset.len())?;
        }
        let result = allocate(&build_rate_matrix(caps, &subset)?);
        rejects.record(result.reject_reason);
        best.offer(result);
    }
    Ok(OptimizationOutcome {
        best: best.into_inner().ok_or(Error::NoFeasibleSolution)?,
        candidates_evaluated: 1 << n,
        candidates_pruned: 0,
        op_count_reported,
        rejects,
    })
}

/// Every subset with uniform slots `1/(m+1)`; rate is the smallest mutual
/// information. Row sums are carried down a depth-first walk, so each subset
/// costs `O(m)`.
pub fn equal_time_select(caps: &LinkCapacityMatrix) -> Result<OptimizationOutcome> {
    let n = caps.n_relays();
    check_pool_size(n)?;
    let mut walk = EqualTimeWalk {
        caps,
        path: Vec::with_capacity(n),
        best_rate: caps.direct(),
        best_subset: RelaySubset::empty(),
        evaluated: 1,
    };
    walk.descend(1, f64::INFINITY, caps.direct());
    let m = walk.best_subset.len();
    Ok(OptimizationOutcome {
        best: AllocationResult {
            subset: walk.best_subset,
            times: TimeAllocation::uniform(m + 1),
            rate: walk.best_rate,
            feasible: true,
            reject_reason: RejectReason::None,
        },
        candidates_evaluated: walk.evaluated,
        candidates_pruned: 0,
        op_count_reported: 0,
        rejects: RejectCounts::default(),
    })
}

struct EqualTimeWalk<'a> {
    caps: &'a LinkCapacityMatrix,
    path: Vec<usize>,
    best_rate: f64,
    best_subset: RelaySubset,
    evaluated: u64,
}

impl EqualTimeWalk<'_> {
    /// `relay_min` is the smallest relay row sum on the path so far,
    /// `dest_sum` the destination row sum.
    fn descend(&mut self, start: usize, relay_min: f64, dest_sum: f64) {
        let d = self.caps.destination();
        for j in start..=self.caps.n_relays() {
            let row: f64 = self.caps.get(0, j) + self.path.iter().map(|&r| self.caps.get(r, j)).sum::<f64>();
            let relay_min = relay_min.min(row);
            let dest_sum = dest_sum + self.caps.get(j, d);
            self.path.push(j);
            self.evaluated += 1;
            let rate = relay_min.min(dest_sum) / self.path.len().saturating_add(1) as f64;
            let subset = RelaySubset::from_sorted_unchecked(self.path.clone());
            if prefer(rate, &subset, self.best_rate, &self.best_subset) {
                self.best_rate = rate;
                self.best_subset = subset;
            }
            self.descend(j + 1, relay_min, dest_sum);
            self.path.pop();
        }
    }
}

/// Operations for one step of the recursive allocation with `q` relays:
/// `3q^2 + 6q + 8`.
pub fn op_count(q: usize) -> Result<u64> {
    if q < 1 {
        return Err(Error::invalid("op_count needs at least one relay"));
    }
    let q = u64::try_from(q).map_err(|_| Error::Overflow(format!("q = {q}")))?;
    q.checked_mul(q)
        .and_then(|q2| q2.checked_mul(3))
        .and_then(|x| x.checked_add(q.checked_mul(6)?))
        .and_then(|x| x.checked_add(8))
        .ok_or_else(|| Error::Overflow(format!("op_count({q})")))
}

/// Worst-case total `sum_{q=1}^{N} C(N, q) * op_count(q)`.
pub fn worst_case_ops(n: usize) -> Result<u128> {
    if n < 1 {
        return Err(Error::invalid("worst_case_ops needs at least one relay"));
    }
    let overflow = || Error::Overflow(format!("worst_case_ops({n})"));
    let n128 = n as u128;
    let mut binom: u128 = 1;
    let mut total: u128 = 0;
    for q in 1..=n {
        // C(n, q) = C(n, q-1) * (n - q + 1) / q, exact at every step.
        binom = binom.checked_mul(n128 - q as u128 + 1).ok_or_else(overflow)? / q as u128;
        let ops = u128::from(op_count(q)?);
        total = binom
            .checked_mul(ops)
            .and_then(|x| total.checked_add(x))
            .ok_or_else(overflow)?;
    }
    Ok(total)
}
