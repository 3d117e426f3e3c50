//! Link capacities and subset rate matrices.
//!
//! Nodes are indexed with the source at 0, relays at `1..=N` and the
//! destination at `N + 1`. Capacities are `log2(1 + snr * |a|^2)` in
//! bits/symbol, always on a linear SNR scale.

use serde::{Deserialize, Serialize};

use crate::matrix::Square;
use crate::{Error, Result};

/// Composite transmit SNR `P / (N0 W)` on a linear scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct SnrConfig(f64);

impl SnrConfig {
    pub fn new(linear: f64) -> Result<Self> {
        if !(linear.is_finite() && linear > 0.0) {
            return Err(Error::invalid(format!("SNR must be positive and finite, got {linear}")));
        }
        Ok(Self(linear))
    }

    pub fn from_db(db: f64) -> Result<Self> {
        Self::new(10f64.powf(db / 10.0))
    }

    pub fn linear(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for SnrConfig {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Self::new(value)
    }
}

impl From<SnrConfig> for f64 {
    fn from(value: SnrConfig) -> f64 {
        value.0
    }
}

/// Shannon capacity of one link, `log2(1 + snr * channel_power)`.
pub fn link_capacity(snr: SnrConfig, channel_power: f64) -> Result<f64> {
    if !(channel_power >= 0.0) || !channel_power.is_finite() {
        return Err(Error::invalid(format!(
            "channel power must be finite and non-negative, got {channel_power}"
        )));
    }
    Ok((snr.linear() * channel_power).ln_1p() / std::f64::consts::LN_2)
}

/// Per-link capacities of one fading realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkCapacityMatrix {
    n_relays: usize,
    caps: Square<f64>,
    mask: Square<bool>,
}

impl LinkCapacityMatrix {
    /// Wraps precomputed capacities. Masked-out links are forced to zero and
    /// the diagonal is cleared.
    pub fn from_capacities(caps: Square<f64>, mask: Option<Square<bool>>) -> Result<Self> {
        let n = caps.size();
        if n < 2 {
            return Err(Error::invalid("need at least a source and a destination"));
        }
        let mask = match mask {
            Some(m) if m.size() != n => {
                return Err(Error::invalid(format!(
                    "mask is {}x{} but capacities are {n}x{n}",
                    m.size(),
                    m.size()
                )))
            }
            Some(m) => m,
            None => Square::from_fn(n, |i, j| i != j),
        };
        let mut out = Square::filled(n, 0.0);
        for i in 0..n {
            for j in 0..n {
                let c = caps[(i, j)];
                if !(c >= 0.0) || !c.is_finite() {
                    return Err(Error::invalid(format!(
                        "capacity ({i},{j}) must be finite and non-negative, got {c}"
                    )));
                }
                if i != j && mask[(i, j)] {
                    out[(i, j)] = c;
                }
            }
        }
        Ok(Self {
            n_relays: n - 2,
            caps: out,
            mask,
        })
    }

    pub fn n_relays(&self) -> usize {
        self.n_relays
    }

    pub fn n_nodes(&self) -> usize {
        self.n_relays + 2
    }

    pub fn source(&self) -> usize {
        0
    }

    pub fn destination(&self) -> usize {
        self.n_relays + 1
    }

    /// Capacity of the link from node `from` to node `to`.
    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.caps[(from, to)]
    }

    pub fn is_linked(&self, from: usize, to: usize) -> bool {
        self.mask[(from, to)]
    }

    pub fn capacities(&self) -> &Square<f64> {
        &self.caps
    }

    pub fn mask(&self) -> &Square<bool> {
        &self.mask
    }

    /// Direct source-destination capacity.
    pub fn direct(&self) -> f64 {
        self.get(self.source(), self.destination())
    }

    /// Relabels relays so that new relay `k` (1-based) is old relay `order[k - 1]`.
    pub fn renumbered(&self, order: &[usize]) -> Result<Self> {
        let map = node_map(self.n_relays, order)?;
        let n = self.n_nodes();
        Ok(Self {
            n_relays: self.n_relays,
            caps: Square::from_fn(n, |i, j| self.caps[(map[i], map[j])]),
            mask: Square::from_fn(n, |i, j| self.mask[(map[i], map[j])]),
        })
    }

    /// Keeps only the listed relays (in the given order), dropping the rest.
    pub fn restricted(&self, relays: &[usize]) -> Result<Self> {
        for &r in relays {
            if r == 0 || r > self.n_relays {
                return Err(Error::invalid(format!("relay {r} out of range 1..={}", self.n_relays)));
            }
        }
        let mut map = Vec::with_capacity(relays.len() + 2);
        map.push(0);
        map.extend_from_slice(relays);
        map.push(self.destination());
        let n = map.len();
        Ok(Self {
            n_relays: relays.len(),
            caps: Square::from_fn(n, |i, j| self.caps[(map[i], map[j])]),
            mask: Square::from_fn(n, |i, j| self.mask[(map[i], map[j])]),
        })
    }
}

/// Maps new node index to old node index for a relay permutation.
pub(crate) fn node_map(n_relays: usize, order: &[usize]) -> Result<Vec<usize>> {
    if order.len() != n_relays {
        return Err(Error::invalid(format!(
            "permutation has {} entries for {n_relays} relays",
            order.len()
        )));
    }
    let mut seen = vec![false; n_relays + 1];
    for &r in order {
        if r == 0 || r > n_relays || std::mem::replace(&mut seen[r], true) {
            return Err(Error::invalid(format!("{order:?} is not a permutation of 1..={n_relays}")));
        }
    }
    let mut map = Vec::with_capacity(n_relays + 2);
    map.push(0);
    map.extend_from_slice(order);
    map.push(n_relays + 1);
    Ok(map)
}

/// Applies [`link_capacity`] to every linked pair, leaving masked links at zero.
pub fn build_capacity_matrix(
    channel_powers: &Square<f64>,
    mask: &Square<bool>,
    snr: SnrConfig,
) -> Result<LinkCapacityMatrix> {
    let n = channel_powers.size();
    if mask.size() != n {
        return Err(Error::invalid(format!(
            "power matrix is {n}x{n} but mask is {}x{}",
            mask.size(),
            mask.size()
        )));
    }
    if n < 2 {
        return Err(Error::invalid("need at least a source and a destination"));
    }
    let mut caps = Square::filled(n, 0.0);
    for i in 0..n {
        for j in 0..n {
            if i != j && mask[(i, j)] {
                caps[(i, j)] = link_capacity(snr, channel_powers[(i, j)])?;
            }
        }
    }
    LinkCapacityMatrix::from_capacities(caps, Some(mask.clone()))
}

/// Full mask over `n` nodes (every off-diagonal link present).
pub fn full_mask(n: usize) -> Square<bool> {
    Square::from_fn(n, |i, j| i != j)
}

/// Active relays, strictly ascending. The ascending order is the
/// transmission order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RelaySubset(Vec<usize>);

impl RelaySubset {
    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn new(indices: Vec<usize>, n_relays: usize) -> Result<Self> {
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid(format!("relay subset {indices:?} is not strictly ascending")));
        }
        if indices.iter().any(|&r| r == 0 || r > n_relays) {
            return Err(Error::invalid(format!(
                "relay subset {indices:?} has an index outside 1..={n_relays}"
            )));
        }
        Ok(Self(indices))
    }

    /// Subset encoded by the low `n_relays` bits of `mask` (bit `k` is relay `k + 1`).
    pub fn from_bits(mask: u64, n_relays: usize) -> Self {
        Self((0..n_relays).filter(|k| mask >> k & 1 == 1).map(|k| k + 1).collect())
    }

    pub(crate) fn from_sorted_unchecked(indices: Vec<usize>) -> Self {
        debug_assert!(indices.windows(2).all(|w| w[0] < w[1]));
        Self(indices)
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max_index(&self) -> usize {
        self.0.last().copied().unwrap_or(0)
    }

    /// The subset with the relay at 0-based position `k` removed.
    pub fn without_position(&self, k: usize) -> Self {
        let mut v = self.0.clone();
        v.remove(k);
        Self(v)
    }
}

/// Lower-triangular `(m+1) x (m+1)` matrix of one relay subset. Row `k < m`
/// is the `k`-th active relay as a receiver, row `m` is the destination;
/// column `0` is the source slot and column `c` the slot of relay `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateMatrix {
    subset: RelaySubset,
    entries: Square<f64>,
}

impl RateMatrix {
    pub fn subset(&self) -> &RelaySubset {
        &self.subset
    }

    pub fn entries(&self) -> &Square<f64> {
        &self.entries
    }

    /// Number of active relays `m`.
    pub fn m(&self) -> usize {
        self.subset.len()
    }

    pub fn dim(&self) -> usize {
        self.entries.size()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[(row, col)]
    }

    /// Removes row `row` and column `col`.
    pub fn minor(&self, row: usize, col: usize) -> Square<f64> {
        let n = self.dim();
        let keep_r: Vec<usize> = (0..n).filter(|&i| i != row).collect();
        let keep_c: Vec<usize> = (0..n).filter(|&j| j != col).collect();
        Square::from_fn(n - 1, |i, j| self.entries[(keep_r[i], keep_c[j])])
    }
}

/// Rate matrix of `subset` under `caps`.
pub fn build_rate_matrix(caps: &LinkCapacityMatrix, subset: &RelaySubset) -> Result<RateMatrix> {
    if subset.max_index() > caps.n_relays() {
        return Err(Error::invalid(format!(
            "subset {:?} references relays beyond the {} available",
            subset.indices(),
            caps.n_relays()
        )));
    }
    let m = subset.len();
    // Transmitter of column c: source, then the active relays in order.
    let tx = |c: usize| if c == 0 { caps.source() } else { subset.indices()[c - 1] };
    let rx = |r: usize| if r < m { subset.indices()[r] } else { caps.destination() };
    let entries = Square::from_fn(m + 1, |r, c| if c <= r { caps.get(tx(c), rx(r)) } else { 0.0 });
    Ok(RateMatrix {
        subset: subset.clone(),
        entries,
    })
}

/// Mutual information accumulated at each receiver (relays in order, then
/// the destination) under slot durations `t`.
pub fn mutual_informations(rm: &RateMatrix, t: &[f64]) -> Result<Vec<f64>> {
    if t.len() != rm.dim() {
        return Err(Error::invalid(format!(
            "time vector has {} slots, rate matrix needs {}",
            t.len(),
            rm.dim()
        )));
    }
    if t.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("time vector has non-finite entries"));
    }
    Ok((0..rm.dim())
        .map(|r| (0..=r).map(|c| rm.get(r, c) * t[c]).sum())
        .collect())
}
