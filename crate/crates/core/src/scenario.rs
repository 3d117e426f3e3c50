//! Network geometry, path-loss fading and relay numbering.
//!
//! Distances are normalized so that the source sits at `(0, 0)` and the
//! destination at `(1, 0)`. Every link's channel power is exponential with
//! rate `lambda = d^{p_a}`, i.e. mean power `d^{-p_a}`.

use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::matrix::Square;
use crate::rate_model::LinkCapacityMatrix;
use crate::{Error, Result};

pub const DEFAULT_PATH_LOSS_EXPONENT: f64 = 2.5;

/// How a topology was laid out; numbering by average channel conditions
/// needs a regular layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Layout {
    Linear,
    Grid { side: usize, spacing: f64 },
    Random { seed: u64 },
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    /// Source first, then relays, then the destination.
    positions: Vec<[f64; 2]>,
    path_loss_exponent: f64,
    layout: Layout,
}

impl Topology {
    pub fn new(positions: Vec<[f64; 2]>, path_loss_exponent: f64, layout: Layout) -> Result<Self> {
        if positions.len() < 2 {
            return Err(Error::invalid("a topology needs at least a source and a destination"));
        }
        if !(path_loss_exponent > 0.0 && path_loss_exponent.is_finite()) {
            return Err(Error::invalid(format!(
                "path-loss exponent must be positive, got {path_loss_exponent}"
            )));
        }
        if positions.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::invalid("node positions must be finite"));
        }
        Ok(Self {
            positions,
            path_loss_exponent,
            layout,
        })
    }

    pub fn with_path_loss_exponent(self, p_a: f64) -> Result<Self> {
        Self::new(self.positions, p_a, self.layout)
    }

    pub fn positions(&self) -> &[[f64; 2]] {
        &self.positions
    }

    pub fn n_relays(&self) -> usize {
        self.positions.len() - 2
    }

    pub fn path_loss_exponent(&self) -> f64 {
        self.path_loss_exponent
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn relay_position(&self, relay: usize) -> [f64; 2] {
        self.positions[relay]
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let [xi, yi] = self.positions[i];
        let [xj, yj] = self.positions[j];
        (xi - xj).hypot(yi - yj)
    }
}

fn with_endpoints(relays: impl IntoIterator<Item = [f64; 2]>) -> Vec<[f64; 2]> {
    let mut positions = vec![[0.0, 0.0]];
    positions.extend(relays);
    positions.push([1.0, 0.0]);
    positions
}

/// Relays equispaced on the source-destination segment.
pub fn linear_topology(n_relays: usize) -> Topology {
    let step = 1.0 / (n_relays + 1) as f64;
    let positions = with_endpoints((1..=n_relays).map(|k| [k as f64 * step, 0.0]));
    Topology::new(positions, DEFAULT_PATH_LOSS_EXPONENT, Layout::Linear).expect("valid linear layout")
}

/// Default grid pitch: columns equispaced across the unit gap.
pub fn default_grid_spacing(side: usize) -> f64 {
    1.0 / (side + 1) as f64
}

/// `side x side` relays on a square grid centred at `(0.5, 0)`, with the
/// default pitch.
pub fn grid_topology(side: usize) -> Result<Topology> {
    grid_topology_with_spacing(side, default_grid_spacing(side))
}

/// Relays are stored column by column toward the destination, top to
/// bottom within a column.
pub fn grid_topology_with_spacing(side: usize, spacing: f64) -> Result<Topology> {
    if side < 1 {
        return Err(Error::invalid("grid side must be at least 1"));
    }
    if !(spacing > 0.0) || spacing * (side - 1) as f64 >= 1.0 {
        return Err(Error::invalid(format!(
            "grid spacing {spacing} must be positive and fit between source and destination"
        )));
    }
    let offset = |k: usize| (k as f64 - (side - 1) as f64 / 2.0) * spacing;
    let relays = (0..side).flat_map(|c| (0..side).map(move |r| [0.5 + offset(c), -offset(r)]));
    Topology::new(
        with_endpoints(relays),
        DEFAULT_PATH_LOSS_EXPONENT,
        Layout::Grid { side, spacing },
    )
}

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]` spanned by the relays of
/// the grid that would hold `n_relays` at the default pitch.
pub fn random_area(n_relays: usize) -> ([f64; 2], [f64; 2]) {
    let side = (1..).find(|k| k * k >= n_relays).unwrap_or(1);
    let half = (side - 1) as f64 / 2.0 * default_grid_spacing(side);
    ([0.5 - half, 0.5 + half], [-half, half])
}

/// Relays drawn uniformly from [`random_area`], fixed by `seed`.
pub fn random_topology(n_relays: usize, seed: u64) -> Result<Topology> {
    if n_relays < 1 {
        return Err(Error::invalid("random topology needs at least one relay"));
    }
    let ([x0, x1], [y0, y1]) = random_area(n_relays);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coord = |lo: f64, hi: f64| if hi > lo { rng.gen_range(lo..=hi) } else { lo };
    let relays: Vec<[f64; 2]> = (0..n_relays).map(|_| [coord(x0, x1), coord(y0, y1)]).collect();
    Topology::new(
        with_endpoints(relays),
        DEFAULT_PATH_LOSS_EXPONENT,
        Layout::Random { seed },
    )
}

/// Exponential rate parameters `lambda_ij = d_ij^{p_a}` for every node pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FadingParams {
    lambda: Square<f64>,
}

impl FadingParams {
    pub fn lambda(&self) -> &Square<f64> {
        &self.lambda
    }

    pub fn n_nodes(&self) -> usize {
        self.lambda.size()
    }
}

pub fn fading_params(topology: &Topology) -> Result<FadingParams> {
    let n = topology.positions().len();
    let mut lambda = Square::filled(n, 0.0);
    for i in 0..n {
        for j in i + 1..n {
            let d = topology.distance(i, j);
            if !(d > 0.0) {
                return Err(Error::invalid(format!("nodes {i} and {j} coincide")));
            }
            let l = d.powf(topology.path_loss_exponent());
            lambda[(i, j)] = l;
            lambda[(j, i)] = l;
        }
    }
    Ok(FadingParams { lambda })
}

/// Random streams for one trial. Each node pair reads its own fixed
/// position of a counter-based stream keyed by `(base_seed, trial)`, so a
/// link's draw does not depend on how many other links exist or on which
/// worker runs the trial.
#[derive(Debug, Clone)]
pub struct TrialRng {
    base_seed: u64,
    trial: u64,
}

impl TrialRng {
    pub fn new(base_seed: u64, trial: u64) -> Self {
        Self { base_seed, trial }
    }

    fn stream(&self, lane: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.base_seed);
        rng.set_stream(self.trial.wrapping_mul(2).wrapping_add(lane));
        rng
    }

    /// Generator for per-trial choices other than channel draws (random numbering).
    pub fn auxiliary(&self) -> ChaCha8Rng {
        self.stream(1)
    }

    /// Uniform in the open interval `(0, 1)` for the link between two stable
    /// node keys.
    fn link_uniform(&self, links: &mut ChaCha8Rng, key_a: u64, key_b: u64) -> f64 {
        let (lo, hi) = if key_a < key_b { (key_a, key_b) } else { (key_b, key_a) };
        let pair = hi * (hi - 1) / 2 + lo;
        links.set_word_pos(u128::from(pair) * 2);
        ((links.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }
}

/// Stable key of a node: source 0, destination 1, relay `k` is `k + 1`.
/// Adding relays to a pool leaves the keys of existing links unchanged.
fn node_key(index: usize, n_nodes: usize) -> u64 {
    if index == 0 {
        0
    } else if index == n_nodes - 1 {
        1
    } else {
        index as u64 + 1
    }
}

/// One symmetric realization of channel powers, `power_ij ~ Exp(lambda_ij)`
/// drawn by inverse CDF.
pub fn draw_channel_powers(params: &FadingParams, rng: &TrialRng) -> Square<f64> {
    let n = params.n_nodes();
    let mut links = rng.stream(0);
    let mut power = Square::filled(n, 0.0);
    for i in 0..n {
        for j in i + 1..n {
            let u = rng.link_uniform(&mut links, node_key(i, n), node_key(j, n));
            let p = -u.ln() / params.lambda()[(i, j)];
            power[(i, j)] = p;
            power[(j, i)] = p;
        }
    }
    power
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NumberingScheme {
    AverageDescending,
    AverageLinear,
    InstantaneousSourceRelay,
    InstantaneousRelayRelay,
    Random,
}

impl NumberingScheme {
    pub const ALL: [NumberingScheme; 5] = [
        NumberingScheme::AverageDescending,
        NumberingScheme::AverageLinear,
        NumberingScheme::InstantaneousSourceRelay,
        NumberingScheme::InstantaneousRelayRelay,
        NumberingScheme::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            NumberingScheme::AverageDescending => "average_descending",
            NumberingScheme::AverageLinear => "average_linear",
            NumberingScheme::InstantaneousSourceRelay => "instantaneous_source_relay",
            NumberingScheme::InstantaneousRelayRelay => "instantaneous_relay_relay",
            NumberingScheme::Random => "random",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|s| s.name() == name)
            .ok_or_else(|| Error::invalid(format!("unknown numbering scheme {name:?}")))
    }

    /// Whether the scheme can number relays of this topology.
    pub fn supports(self, topology: &Topology) -> bool {
        match self {
            NumberingScheme::AverageDescending | NumberingScheme::AverageLinear => {
                matches!(topology.layout(), Layout::Linear | Layout::Grid { .. })
            }
            _ => true,
        }
    }
}

/// Transmission order of the relays: `order[k]` is the relay that transmits
/// `(k+1)`-th. Average-channel schemes read positions; instantaneous schemes
/// read the realized capacities.
pub fn renumber(
    scheme: NumberingScheme,
    topology: &Topology,
    caps: &LinkCapacityMatrix,
    rng: &mut impl Rng,
) -> Result<Vec<usize>> {
    let n = caps.n_relays();
    if topology.n_relays() != n {
        return Err(Error::invalid(format!(
            "topology has {} relays but the capacity matrix has {n}",
            topology.n_relays()
        )));
    }
    if !scheme.supports(topology) {
        return Err(Error::invalid(format!(
            "{} numbering needs a linear or grid layout, got {:?}",
            scheme.name(),
            topology.layout()
        )));
    }
    let mut order: Vec<usize> = (1..=n).collect();
    match scheme {
        NumberingScheme::AverageDescending => {
            order.sort_by(|&a, &b| by_column(topology, a, b).then_with(|| by_height_desc(topology, a, b)));
        }
        NumberingScheme::AverageLinear => {
            order.sort_by(|&a, &b| by_column(topology, a, b).then_with(|| by_height_desc(topology, a, b)));
            // Reverse every other column so consecutive numbers stay neighbours.
            let mut start = 0;
            let mut column = 0;
            while start < order.len() {
                let x = topology.relay_position(order[start])[0];
                let len = order[start..]
                    .iter()
                    .take_while(|&&r| topology.relay_position(r)[0] == x)
                    .count();
                if column % 2 == 1 {
                    order[start..start + len].reverse();
                }
                start += len;
                column += 1;
            }
        }
        NumberingScheme::InstantaneousSourceRelay => {
            order.sort_by(|&a, &b| caps.get(0, b).total_cmp(&caps.get(0, a)));
        }
        NumberingScheme::InstantaneousRelayRelay => {
            let mut remaining = order;
            order = Vec::with_capacity(n);
            let mut from = caps.source();
            while !remaining.is_empty() {
                let (pos, _) = remaining
                    .iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |(bp, bc), (i, &r)| {
                        let c = caps.get(from, r);
                        if c > bc {
                            (i, c)
                        } else {
                            (bp, bc)
                        }
                    });
                from = remaining.remove(pos);
                order.push(from);
            }
        }
        NumberingScheme::Random => order.shuffle(rng),
    }
    Ok(order)
}

fn by_column(topology: &Topology, a: usize, b: usize) -> Ordering {
    topology.relay_position(a)[0].total_cmp(&topology.relay_position(b)[0])
}

fn by_height_desc(topology: &Topology, a: usize, b: usize) -> Ordering {
    topology.relay_position(b)[1].total_cmp(&topology.relay_position(a)[1])
}
