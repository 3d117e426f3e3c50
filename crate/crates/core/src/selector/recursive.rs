//! Depth-first subset search with incremental inverses.
//!
//! For a relay path `P = (r_1, ..., r_p)` the rate matrix splits as
//!
//! ```text
//! L_{P'} = [ K_P   0  ]      L_{P'}^{-1} = [ K_P^{-1}              0       ]
//!          [ F     T2 ]                    [ -T2^{-1} F K_P^{-1}   T2^{-1} ]
//! ```
//!
//! where `K_P` holds the relay rows of `L_P` without its last column, `F` is
//! the 2 x p block of capacities from `s, r_1, ..., r_{p-1}` into the new
//! relay and the destination, and `T2` is the 2 x 2 lower-triangular block
//! of the last two transmitters. Only `K^{-1}` is kept on the path; each
//! extension appends one relay row and computes a destination row.
//!
//! Because every descendant of `P` shares the first rows of the inverse,
//! the unnormalized slot durations of those rows are common to the whole
//! subtree. A non-positive value among the first `p - 1` of them therefore
//! rules out every descendant.

use crate::allocator::{AllocationResult, RejectReason, TimeAllocation, SINGULARITY_TOL};
use crate::matrix::Square;
use crate::rate_model::{LinkCapacityMatrix, RelaySubset};
use crate::{Error, Result};

use super::{op_count, Incumbent, OptimizationOutcome, RejectCounts};

/// Scalar multiply/add/divide counts, split by phase.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpTally {
    /// Building the new inverse rows.
    pub inverse: u64,
    /// Row sums, rate and time vector.
    pub solution: u64,
}

#[derive(Debug, Clone, PartialEq)]
struct DestinationRow {
    /// Last row of the full inverse: `[-C_1, (T2^{-1})_{10}, (T2^{-1})_{11}]`.
    row: Vec<f64>,
    parent_block_sum: f64,
    correction_sum: f64,
    t2_inv_sum: f64,
}

/// Inverse blocks of the rate matrix along one root-to-node path.
#[derive(Debug, Clone, PartialEq)]
pub struct InverseCache {
    path: Vec<usize>,
    /// Rows of `K^{-1}`, packed lower-triangular: row `k` has `k + 1` entries.
    relay_inv: Vec<f64>,
    /// Row sums of `K^{-1}`; scaled by the rate these are the slot durations.
    relay_row_sums: Vec<f64>,
    /// `block_sums[k]` is the sum of the first `k` rows of `K^{-1}`.
    block_sums: Vec<f64>,
    destination: Option<DestinationRow>,
}

fn packed_start(row: usize) -> usize {
    row * (row + 1) / 2
}

impl InverseCache {
    /// The empty subset: `L = [L_sd]`.
    pub fn new(caps: &LinkCapacityMatrix) -> Self {
        let l_sd = caps.direct();
        let destination = (l_sd.abs() > SINGULARITY_TOL).then(|| DestinationRow {
            row: vec![1.0 / l_sd],
            parent_block_sum: 0.0,
            correction_sum: 0.0,
            t2_inv_sum: 1.0 / l_sd,
        });
        Self {
            path: Vec::with_capacity(caps.n_relays()),
            relay_inv: Vec::new(),
            relay_row_sums: Vec::new(),
            block_sums: vec![0.0],
            destination,
        }
    }

    pub fn path(&self) -> &[usize] {
        &self.path
    }

    pub fn subset(&self) -> RelaySubset {
        RelaySubset::from_sorted_unchecked(self.path.clone())
    }

    fn relay_row(&self, k: usize) -> &[f64] {
        &self.relay_inv[packed_start(k)..packed_start(k + 1)]
    }

    /// `out[j] = sum_i coeffs[i] * K^{-1}[i][j]` over the first `p` rows.
    fn times_relay_inverse(&self, coeffs: &[f64], tally: &mut OpTally) -> Vec<f64> {
        let p = coeffs.len();
        let mut out = vec![0.0; p];
        for (i, &a) in coeffs.iter().enumerate() {
            for (o, &k) in out.iter_mut().zip(self.relay_row(i)) {
                *o += a * k;
            }
        }
        // p(p+1)/2 products and p(p-1)/2 additions.
        tally.inverse += (p * p) as u64;
        out
    }

    /// Appends `new_relay` to the path. Fails without modifying the cache
    /// when the new relay's diagonal entry is zero; that subset and every
    /// extension of it are singular. A zero destination diagonal leaves the
    /// cache extended but without a destination row.
    pub fn extend(&mut self, caps: &LinkCapacityMatrix, new_relay: usize, tally: &mut OpTally) -> Result<()> {
        let p = self.path.len();
        if new_relay <= self.path.last().copied().unwrap_or(0) || new_relay > caps.n_relays() {
            return Err(Error::invalid(format!(
                "relay {new_relay} cannot extend path {:?} over {} relays",
                self.path,
                caps.n_relays()
            )));
        }
        let d = caps.destination();
        let last = self.path.last().copied().unwrap_or(caps.source());
        let tx = |k: usize| if k == 0 { caps.source() } else { self.path[k - 1] };

        // T2 = [[a, 0], [c, b]].
        let a = caps.get(last, new_relay);
        let c = caps.get(last, d);
        let b = caps.get(new_relay, d);
        if !(a.abs() > SINGULARITY_TOL) {
            return Err(Error::SingularMatrix { row: p });
        }
        let inv_a = 1.0 / a;
        tally.inverse += 1;

        // First row of T2^{-1} F is F_0 / a.
        let a0: Vec<f64> = (0..p).map(|k| caps.get(tx(k), new_relay) * inv_a).collect();
        tally.inverse += p as u64;
        let c0 = self.times_relay_inverse(&a0, tally);

        let destination = if b.abs() > SINGULARITY_TOL {
            let inv_b = 1.0 / b;
            let t10 = -c * inv_a * inv_b;
            tally.inverse += 3;
            // Second row of T2^{-1} F: t10 * F_0 + F_1 / b.
            let a1: Vec<f64> = (0..p)
                .map(|k| t10 * caps.get(tx(k), new_relay) + inv_b * caps.get(tx(k), d))
                .collect();
            tally.inverse += 3 * p as u64;
            let c1 = self.times_relay_inverse(&a1, tally);

            let mut row: Vec<f64> = c1.iter().map(|x| -x).collect();
            row.push(t10);
            row.push(inv_b);
            let correction_sum = c0.iter().chain(&c1).sum::<f64>();
            tally.solution += (2 * p).saturating_sub(1) as u64 + 2;
            Some(DestinationRow {
                row,
                parent_block_sum: self.block_sums[p],
                correction_sum,
                t2_inv_sum: inv_a + t10 + inv_b,
            })
        } else {
            None
        };

        let start = self.relay_inv.len();
        self.relay_inv.extend(c0.iter().map(|x| -x));
        self.relay_inv.push(inv_a);
        let row_sum: f64 = self.relay_inv[start..].iter().sum();
        tally.solution += p as u64 + 1;
        self.relay_row_sums.push(row_sum);
        self.block_sums.push(self.block_sums[p] + row_sum);
        self.path.push(new_relay);
        self.destination = destination;
        Ok(())
    }

    /// Drops the last relay from the path. The parent's destination row is
    /// not restored.
    pub fn retract(&mut self) {
        if self.path.pop().is_some() {
            let p = self.path.len();
            self.relay_inv.truncate(packed_start(p));
            self.relay_row_sums.pop();
            self.block_sums.pop();
            self.destination = None;
        }
    }

    /// True when one of the slots shared by every descendant is non-positive.
    pub fn prefix_violates(&self) -> bool {
        let p = self.path.len();
        self.relay_row_sums[..p.saturating_sub(1)].iter().any(|&u| !(u > 0.0))
    }

    /// The full inverse of the current rate matrix, if it exists.
    pub fn full_inverse(&self) -> Option<Square<f64>> {
        let dest = self.destination.as_ref()?;
        let p = self.path.len();
        let mut inv = Square::filled(p + 1, 0.0);
        for r in 0..p {
            for (c, &x) in self.relay_row(r).iter().enumerate() {
                inv[(r, c)] = x;
            }
        }
        for (c, &x) in dest.row.iter().enumerate() {
            inv[(p, c)] = x;
        }
        Some(inv)
    }

    /// Time allocation and rate of the current path.
    pub fn solution(&self, tally: &mut OpTally) -> Result<(TimeAllocation, f64)> {
        let dest = self
            .destination
            .as_ref()
            .ok_or(Error::SingularMatrix { row: self.path.len() })?;
        let total = dest.parent_block_sum - dest.correction_sum + dest.t2_inv_sum;
        let rate = 1.0 / total;
        let dest_sum: f64 = dest.row.iter().sum();
        let mut times = Vec::with_capacity(self.path.len() + 1);
        times.extend(self.relay_row_sums.iter().map(|u| u * rate));
        times.push(dest_sum * rate);
        tally.solution += 3 + dest.row.len() as u64 + times.len() as u64;
        Ok((TimeAllocation(times), rate))
    }
}

/// Inverse blocks for `parent` extended by `new_relay`.
pub fn extend_inverse(parent: &InverseCache, caps: &LinkCapacityMatrix, new_relay: usize) -> Result<InverseCache> {
    let mut child = parent.clone();
    child.extend(caps, new_relay, &mut OpTally::default())?;
    Ok(child)
}

/// Slot durations and rate of the subset held by `blocks`. The first `p`
/// slots are the parent's, rescaled by the ratio of the new rate to the
/// parent's; the last two come from the new inverse rows.
pub fn extend_solution(blocks: &InverseCache) -> Result<(TimeAllocation, f64)> {
    blocks.solution(&mut OpTally::default())
}

/// Hooks into [`recursive_select_observed`].
pub trait SearchObserver {
    /// Called for every evaluated subset. `cache` is `None` when the subset's
    /// new relay row was singular and the cache could not be extended.
    fn visited(&mut self, _cache: Option<&InverseCache>, _result: &AllocationResult) {}

    /// Called when every proper extension of `subset` is skipped.
    fn pruned(&mut self, _subset: &RelaySubset, _skipped: u64) {}
}

impl SearchObserver for () {}

/// Recursive search without observation.
pub fn recursive_select(caps: &LinkCapacityMatrix) -> Result<OptimizationOutcome> {
    recursive_select_observed(caps, &mut ())
}

pub fn recursive_select_observed(
    caps: &LinkCapacityMatrix,
    observer: &mut dyn SearchObserver,
) -> Result<OptimizationOutcome> {
    super::check_pool_size(caps.n_relays())?;
    let mut search = Search {
        caps,
        cache: InverseCache::new(caps),
        best: Incumbent::new(),
        evaluated: 0,
        pruned: 0,
        op_count_reported: 0,
        rejects: RejectCounts::default(),
        tally: OpTally::default(),
        observer,
    };
    search.evaluate_current()?;
    search.descend(1)?;
    Ok(OptimizationOutcome {
        best: search.best.into_inner().ok_or(Error::NoFeasibleSolution)?,
        candidates_evaluated: search.evaluated,
        candidates_pruned: search.pruned,
        op_count_reported: search.op_count_reported,
        rejects: search.rejects,
    })
}

struct Search<'a> {
    caps: &'a LinkCapacityMatrix,
    cache: InverseCache,
    best: Incumbent,
    evaluated: u64,
    pruned: u64,
    op_count_reported: u64,
    rejects: RejectCounts,
    tally: OpTally,
    observer: &'a mut dyn SearchObserver,
}

impl Search<'_> {
    fn evaluate_current(&mut self) -> Result<()> {
        let subset = self.cache.subset();
        if !subset.is_empty() {
            self.op_count_reported += op_count(subset.len())?;
        }
        let result = match self.cache.solution(&mut self.tally) {
            Ok((times, rate)) => AllocationResult::judge(subset, times, rate),
            Err(_) => AllocationResult::rejected(subset, TimeAllocation::default(), 0.0, RejectReason::Singular),
        };
        self.evaluated += 1;
        self.rejects.record(result.reject_reason);
        self.observer.visited(Some(&self.cache), &result);
        self.best.offer(result);
        Ok(())
    }

    fn skip_descendants(&mut self, subset: &RelaySubset) {
        // Proper extensions of a subset whose largest relay is j: 2^(N-j) - 1.
        let skipped = (1u64 << (self.caps.n_relays() - subset.max_index())) - 1;
        if skipped > 0 {
            self.pruned += skipped;
            self.observer.pruned(subset, skipped);
        }
    }

    fn descend(&mut self, start: usize) -> Result<()> {
        for j in start..=self.caps.n_relays() {
            match self.cache.extend(self.caps, j, &mut self.tally) {
                Ok(()) => {}
                Err(Error::SingularMatrix { .. }) => {
                    let mut path = self.cache.path().to_vec();
                    path.push(j);
                    let subset = RelaySubset::from_sorted_unchecked(path);
                    self.op_count_reported += op_count(subset.len())?;
                    let result = AllocationResult::rejected(
                        subset.clone(),
                        TimeAllocation::default(),
                        0.0,
                        RejectReason::Singular,
                    );
                    self.evaluated += 1;
                    self.rejects.record(result.reject_reason);
                    self.observer.visited(None, &result);
                    self.skip_descendants(&subset);
                    continue;
                }
                Err(e) => return Err(e),
            }
            self.evaluate_current()?;
            if self.cache.prefix_violates() {
                let subset = self.cache.subset();
                self.skip_descendants(&subset);
            } else {
                self.descend(j + 1)?;
            }
            self.cache.retract();
        }
        Ok(())
    }
}
