use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use dfrelay_core::allocator::{allocate, AllocationResult};
use dfrelay_core::montecarlo::report::{write_csv_table, write_sweep_csv, write_sweep_json};
use dfrelay_core::montecarlo::{sweep, Mode, Parallelism, TrialSetup};
use dfrelay_core::rate_model::{build_rate_matrix, RelaySubset};
use dfrelay_core::scenario::NumberingScheme;
use dfrelay_core::selector::{op_count, recursive_select, worst_case_ops, RejectCounts};
use serde::Serialize;

use crate::config::{load_instance, ExperimentConfig, InstanceEcho, Overrides, RunConfig, TopologySpec};
use crate::error::{CliError, Result};

/// Largest pool for which `--verbose` lists every subset.
pub const VERBOSE_MAX_RELAYS: usize = 12;

pub const COMPLEXITY_MAX_RELAYS: usize = 30;

#[derive(Serialize)]
struct Best<'a> {
    subset: &'a RelaySubset,
    times: &'a [f64],
    rate: f64,
}

#[derive(Serialize)]
struct OpReport {
    per_extension: Vec<u64>,
    evaluated_total: u64,
    worst_case_total: u128,
}

#[derive(Serialize)]
struct OptimizeReport<'a> {
    instance: &'a InstanceEcho,
    n_relays: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    relay_order: Option<&'a [usize]>,
    /// Row-major capacities the search ran on, after renumbering.
    capacities: &'a [f64],
    best: Best<'a>,
    candidates_evaluated: u64,
    candidates_pruned: u64,
    rejects: &'a RejectCounts,
    op_count: OpReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    subsets: Option<Vec<AllocationResult>>,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| CliError::Write {
            path: dir.to_owned(),
            source,
        })?;
    }
    File::create(path).map(BufWriter::new).map_err(|source| CliError::Write {
        path: path.to_owned(),
        source,
    })
}

fn write_file(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>) -> Result<()> {
    let mut out = create(path)?;
    body(&mut out)
        .and_then(|()| out.flush())
        .map_err(|source| CliError::Write {
            path: path.to_owned(),
            source,
        })
}

fn all_subsets(caps: &dfrelay_core::rate_model::LinkCapacityMatrix) -> Result<Vec<AllocationResult>> {
    let n = caps.n_relays();
    let mut subsets: Vec<RelaySubset> = (0..1u64 << n).map(|bits| RelaySubset::from_bits(bits, n)).collect();
    subsets.sort_by(|a, b| (a.len(), a).cmp(&(b.len(), b)));
    subsets
        .iter()
        .map(|s| Ok(allocate(&build_rate_matrix(caps, s)?)))
        .collect()
}

pub fn optimize(instance: &Path, out: Option<&str>, verbose: bool) -> Result<()> {
    let inst = load_instance(instance)?;
    let caps = &inst.caps;
    let n = caps.n_relays();
    let outcome = recursive_select(caps)?;
    let per_extension = (1..=n).map(op_count).collect::<dfrelay_core::Result<Vec<_>>>()?;
    let subsets = match (verbose, n <= VERBOSE_MAX_RELAYS) {
        (true, true) => Some(all_subsets(caps)?),
        (true, false) => {
            eprintln!("warning: per-subset table omitted for more than {VERBOSE_MAX_RELAYS} relays");
            None
        }
        (false, _) => None,
    };
    let report = OptimizeReport {
        instance: &inst.echo,
        n_relays: n,
        relay_order: inst.relay_order.as_deref(),
        capacities: caps.capacities().as_slice(),
        best: Best {
            subset: &outcome.best.subset,
            times: outcome.best.times.as_slice(),
            rate: outcome.best.rate,
        },
        candidates_evaluated: outcome.candidates_evaluated,
        candidates_pruned: outcome.candidates_pruned,
        rejects: &outcome.rejects,
        op_count: OpReport {
            per_extension,
            evaluated_total: outcome.op_count_reported,
            worst_case_total: if n == 0 { 0 } else { worst_case_ops(n)? },
        },
        subsets,
    };
    let body = |w: &mut dyn Write| -> io::Result<()> {
        serde_json::to_writer_pretty(&mut *w, &report).map_err(io::Error::from)?;
        writeln!(w)
    };
    match out {
        Some(prefix) => {
            let path = PathBuf::from(format!("{prefix}.json"));
            write_file(&path, |w| body(w))?;
            println!("{}", path.display());
            Ok(())
        }
        None => body(&mut io::stdout().lock()).map_err(|source| CliError::Write {
            path: PathBuf::from("<stdout>"),
            source,
        }),
    }
}

fn setup_for(run: &RunConfig, scheme: NumberingScheme, mode: Mode) -> TrialSetup {
    TrialSetup {
        topology: run.built.clone(),
        scheme,
        n_trials: run.n_trials,
        base_seed: run.base_seed,
        mode,
    }
}

pub fn simulate(config: &Path, overrides: &Overrides, parallel: usize) -> Result<()> {
    let cfg = ExperimentConfig::load(config, overrides)?;
    for run in cfg.runs()? {
        let result = sweep(
            &setup_for(&run, run.scheme, run.mode),
            &run.snr_db,
            run.epsilon,
            Parallelism(parallel),
        )?;
        let csv = PathBuf::from(format!("{}_{}.csv", cfg.out, run.label));
        let json = PathBuf::from(format!("{}_{}.json", cfg.out, run.label));
        write_file(&csv, |w| write_sweep_csv(w, &run, &result))?;
        write_file(&json, |w| write_sweep_json(w, &run, &result))?;
        println!("{}", csv.display());
        println!("{}", json.display());
    }
    Ok(())
}

/// Echo for a numbering comparison: one topology, every applicable scheme.
#[derive(Serialize)]
struct NumberingConfig<'a> {
    label: &'a str,
    topology: &'a TopologySpec,
    path_loss_exponent: f64,
    schemes: Vec<NumberingScheme>,
    snr_db: &'a [f64],
    n_trials: usize,
    epsilon: f64,
    base_seed: u64,
    mode: Mode,
}

pub fn numbering(config: &Path, overrides: &Overrides, parallel: usize) -> Result<()> {
    let mut cfg = ExperimentConfig::load(config, overrides)?;
    // Each run picks its own scheme below; the default only has to be valid.
    cfg.scheme = Some(NumberingScheme::InstantaneousSourceRelay);
    for run in cfg.runs()? {
        let schemes: Vec<NumberingScheme> = NumberingScheme::ALL
            .into_iter()
            .filter(|s| {
                let ok = s.supports(&run.built);
                if !ok {
                    eprintln!("warning: skipping {} numbering for {}", s.name(), run.label);
                }
                ok
            })
            .collect();
        let mut columns = Vec::with_capacity(schemes.len());
        for &scheme in &schemes {
            let result = sweep(
                &setup_for(&run, scheme, Mode::Optimized),
                &run.snr_db,
                run.epsilon,
                Parallelism(parallel),
            )?;
            columns.push(result.optimized.expect("optimized mode yields an optimized curve").outage_rate);
        }
        let header: Vec<String> = std::iter::once("snr_db".to_string())
            .chain(schemes.iter().map(|s| format!("outage_rate_{}", s.name())))
            .collect();
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        let rows: Vec<Vec<Option<f64>>> = run
            .snr_db
            .iter()
            .enumerate()
            .map(|(i, &db)| std::iter::once(Some(db)).chain(columns.iter().map(|c| Some(c[i]))).collect())
            .collect();
        let echo = NumberingConfig {
            label: &run.label,
            topology: &run.topology,
            path_loss_exponent: run.path_loss_exponent,
            schemes,
            snr_db: &run.snr_db,
            n_trials: run.n_trials,
            epsilon: run.epsilon,
            base_seed: run.base_seed,
            mode: Mode::Optimized,
        };
        let path = PathBuf::from(format!("{}_{}_numbering.csv", cfg.out, run.label));
        write_file(&path, |w| write_csv_table(w, &echo, &header, &rows))?;
        println!("{}", path.display());
    }
    Ok(())
}

pub fn complexity(n: usize) -> Result<()> {
    if !(1..=COMPLEXITY_MAX_RELAYS).contains(&n) {
        return Err(CliError::Config(format!(
            "complexity needs 1 <= N <= {COMPLEXITY_MAX_RELAYS}, got {n}"
        )));
    }
    let mut out = io::stdout().lock();
    let mut emit = || -> io::Result<()> {
        writeln!(out, "q,op_count")?;
        for q in 1..=n {
            writeln!(out, "{q},{}", op_count(q).map_err(io::Error::other)?)?;
        }
        writeln!(out, "total,{}", worst_case_ops(n).map_err(io::Error::other)?)
    };
    emit().map_err(|source| CliError::Write {
        path: PathBuf::from("<stdout>"),
        source,
    })
}
