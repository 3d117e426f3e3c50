//! Instance and experiment files.

use std::fs;
use std::path::Path;

use dfrelay_core::matrix::Square;
use dfrelay_core::montecarlo::Mode;
use dfrelay_core::rate_model::{build_capacity_matrix, full_mask, LinkCapacityMatrix, SnrConfig};
use dfrelay_core::scenario::{
    default_grid_spacing, draw_channel_powers, fading_params, grid_topology_with_spacing, linear_topology,
    random_topology, renumber, Layout, NumberingScheme, Topology, TrialRng, DEFAULT_PATH_LOSS_EXPONENT,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_owned(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| CliError::Parse {
        path: path.to_owned(),
        source,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TopologySpec {
    Linear {
        n_relays: usize,
    },
    Grid {
        side: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        spacing: Option<f64>,
    },
    Random {
        n_relays: usize,
        seed: u64,
    },
    /// Source first, then the relays, then the destination.
    Custom {
        positions: Vec<[f64; 2]>,
    },
}

impl TopologySpec {
    /// Fills in defaults so the echoed spec pins the geometry.
    pub fn resolved(&self) -> Self {
        match *self {
            TopologySpec::Grid { side, spacing: None } => TopologySpec::Grid {
                side,
                spacing: Some(default_grid_spacing(side)),
            },
            _ => self.clone(),
        }
    }

    pub fn build(&self, path_loss_exponent: f64) -> Result<Topology> {
        let topology = match self {
            TopologySpec::Linear { n_relays } => linear_topology(*n_relays),
            TopologySpec::Grid { side, spacing } => {
                grid_topology_with_spacing(*side, spacing.unwrap_or_else(|| default_grid_spacing(*side)))?
            }
            TopologySpec::Random { n_relays, seed } => random_topology(*n_relays, *seed)?,
            TopologySpec::Custom { positions } => {
                Topology::new(positions.clone(), path_loss_exponent, Layout::Custom)?
            }
        };
        Ok(topology.with_path_loss_exponent(path_loss_exponent)?)
    }

    pub fn label(&self) -> String {
        match self {
            TopologySpec::Linear { n_relays } => format!("linear{n_relays}"),
            TopologySpec::Grid { side, .. } => format!("grid{side}x{side}"),
            TopologySpec::Random { n_relays, seed } => format!("random{n_relays}_seed{seed}"),
            TopologySpec::Custom { positions } => format!("custom{}", positions.len().saturating_sub(2)),
        }
    }
}

/// Schemes that read positions need a regular layout; other layouts fall
/// back to ordering by the instantaneous source links.
pub fn default_scheme(topology: &Topology) -> NumberingScheme {
    if NumberingScheme::AverageDescending.supports(topology) {
        NumberingScheme::AverageDescending
    } else {
        NumberingScheme::InstantaneousSourceRelay
    }
}

/// Raw instance document; exactly one of `capacities` and `topology` is set.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    n_relays: Option<usize>,
    capacities: Option<Vec<f64>>,
    mask: Option<Vec<bool>>,
    topology: Option<TopologySpec>,
    snr_db: Option<f64>,
    seed: Option<u64>,
    path_loss_exponent: Option<f64>,
    scheme: Option<NumberingScheme>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum InstanceEcho {
    Capacities {
        n_relays: usize,
        capacities: Vec<f64>,
        #[serde(skip_serializing_if = "Option::is_none")]
        mask: Option<Vec<bool>>,
    },
    Drawn {
        topology: TopologySpec,
        snr_db: f64,
        seed: u64,
        path_loss_exponent: f64,
        scheme: NumberingScheme,
    },
}

#[derive(Debug)]
pub struct Instance {
    pub echo: InstanceEcho,
    pub caps: LinkCapacityMatrix,
    /// Transmission order chosen by the numbering scheme, for drawn instances.
    pub relay_order: Option<Vec<usize>>,
}

pub fn load_instance(path: &Path) -> Result<Instance> {
    let raw: InstanceFile = read_json(path)?;
    let config = |msg: &str| CliError::Config(format!("{}: {msg}", path.display()));
    match (raw.capacities, raw.topology) {
        (Some(capacities), None) => {
            if raw.snr_db.is_some() || raw.seed.is_some() || raw.scheme.is_some() || raw.path_loss_exponent.is_some() {
                return Err(config("snr_db, seed, scheme and path_loss_exponent apply only to topology instances"));
            }
            let n_relays = raw.n_relays.ok_or_else(|| config("n_relays is required with capacities"))?;
            let n = n_relays + 2;
            if capacities.len() != n * n {
                return Err(config(&format!(
                    "expected {} capacities for {n_relays} relays, found {}",
                    n * n,
                    capacities.len()
                )));
            }
            let mask_matrix = match &raw.mask {
                Some(m) if m.len() != n * n => {
                    return Err(config(&format!("expected {} mask entries, found {}", n * n, m.len())))
                }
                Some(m) => Some(Square::from_row_major(n, m.clone())?),
                None => None,
            };
            let caps = LinkCapacityMatrix::from_capacities(Square::from_row_major(n, capacities.clone())?, mask_matrix)?;
            Ok(Instance {
                echo: InstanceEcho::Capacities {
                    n_relays,
                    capacities,
                    mask: raw.mask,
                },
                caps,
                relay_order: None,
            })
        }
        (None, Some(spec)) => {
            if raw.n_relays.is_some() || raw.mask.is_some() {
                return Err(config("n_relays and mask apply only to capacity instances"));
            }
            let snr_db = raw.snr_db.ok_or_else(|| config("snr_db is required with topology"))?;
            let seed = raw.seed.ok_or_else(|| config("seed is required with topology"))?;
            let p_a = raw.path_loss_exponent.unwrap_or(DEFAULT_PATH_LOSS_EXPONENT);
            let topology = spec.build(p_a)?;
            let scheme = raw.scheme.unwrap_or_else(|| default_scheme(&topology));
            let rng = TrialRng::new(seed, 0);
            let powers = draw_channel_powers(&fading_params(&topology)?, &rng);
            let caps = build_capacity_matrix(&powers, &full_mask(powers.size()), SnrConfig::from_db(snr_db)?)?;
            let order = renumber(scheme, &topology, &caps, &mut rng.auxiliary())?;
            Ok(Instance {
                echo: InstanceEcho::Drawn {
                    topology: spec.resolved(),
                    snr_db,
                    seed,
                    path_loss_exponent: p_a,
                    scheme,
                },
                caps: caps.renumbered(&order)?,
                relay_order: Some(order),
            })
        }
        (Some(_), Some(_)) => Err(config("give either capacities or topology, not both")),
        (None, None) => Err(config("one of capacities or topology is required")),
    }
}

fn default_path_loss_exponent() -> f64 {
    DEFAULT_PATH_LOSS_EXPONENT
}

fn default_snr_db() -> Vec<f64> {
    vec![0.0, 5.0, 10.0, 15.0, 20.0]
}

fn default_n_trials() -> usize {
    10_000
}

fn default_epsilon() -> f64 {
    1e-2
}

fn default_base_seed() -> u64 {
    1
}

fn default_mode() -> Mode {
    Mode::Both
}

fn default_out() -> String {
    "dfrelay".to_string()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub topologies: Vec<TopologySpec>,
    #[serde(default = "default_path_loss_exponent")]
    pub path_loss_exponent: f64,
    #[serde(default)]
    pub scheme: Option<NumberingScheme>,
    #[serde(default = "default_snr_db")]
    pub snr_db: Vec<f64>,
    #[serde(default = "default_n_trials")]
    pub n_trials: usize,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_base_seed")]
    pub base_seed: u64,
    #[serde(default = "default_mode")]
    pub mode: Mode,
    /// Output path prefix.
    #[serde(default = "default_out")]
    pub out: String,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<String>,
    pub trials: Option<usize>,
    pub epsilon: Option<f64>,
    pub seed: Option<u64>,
    pub mode: Option<Mode>,
    pub scheme: Option<NumberingScheme>,
}

/// One topology of an experiment with every setting resolved. This is what
/// output files echo.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub label: String,
    pub topology: TopologySpec,
    pub path_loss_exponent: f64,
    pub scheme: NumberingScheme,
    pub snr_db: Vec<f64>,
    pub n_trials: usize,
    pub epsilon: f64,
    pub base_seed: u64,
    pub mode: Mode,
    #[serde(skip)]
    pub built: Topology,
}

impl ExperimentConfig {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self> {
        let mut cfg: Self = read_json(path)?;
        if let Some(out) = &overrides.out {
            cfg.out = out.clone();
        }
        if let Some(n) = overrides.trials {
            cfg.n_trials = n;
        }
        if let Some(e) = overrides.epsilon {
            cfg.epsilon = e;
        }
        if let Some(s) = overrides.seed {
            cfg.base_seed = s;
        }
        if let Some(m) = overrides.mode {
            cfg.mode = m;
        }
        if let Some(s) = overrides.scheme {
            cfg.scheme = Some(s);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.topologies.is_empty() {
            return bad("topologies must not be empty".into());
        }
        if self.snr_db.is_empty() || self.snr_db.iter().any(|x| !x.is_finite()) {
            return bad("snr_db must be a non-empty list of finite values".into());
        }
        if self.n_trials < 1 {
            return bad("n_trials must be at least 1".into());
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad(format!("epsilon must lie in (0, 1), got {}", self.epsilon));
        }
        if self.out.is_empty() {
            return bad("out prefix must not be empty".into());
        }
        let mut labels: Vec<String> = self.topologies.iter().map(TopologySpec::label).collect();
        labels.sort();
        if let Some(w) = labels.windows(2).find(|w| w[0] == w[1]) {
            return bad(format!("topology {} appears twice", w[0]));
        }
        Ok(())
    }

    pub fn runs(&self) -> Result<Vec<RunConfig>> {
        self.topologies
            .iter()
            .map(|spec| {
                let topology = spec.build(self.path_loss_exponent)?;
                let scheme = self.scheme.unwrap_or_else(|| default_scheme(&topology));
                if !scheme.supports(&topology) {
                    return Err(CliError::Config(format!(
                        "{} numbering needs a linear or grid layout, not {}",
                        scheme.name(),
                        spec.label()
                    )));
                }
                Ok(RunConfig {
                    label: spec.label(),
                    topology: spec.resolved(),
                    path_loss_exponent: self.path_loss_exponent,
                    scheme,
                    snr_db: self.snr_db.clone(),
                    n_trials: self.n_trials,
                    epsilon: self.epsilon,
                    base_seed: self.base_seed,
                    mode: self.mode,
                    built: topology,
                })
            })
            .collect()
    }
}
