//! Commands behind the `tasknet` binary.
//!
//! Each command takes parsed inputs and returns a value with a `render`
//! method, so the binary only handles argument parsing, file I/O, and exit
//! codes.

pub mod format;

use std::fmt::Write as _;

use num_complex::Complex64;
use tasknet::circuits::{generate_gbs, random_qudit_circuit, BasisState, CircuitError, GbsConfig};
use tasknet::executor::{run, ExecConfig, ExecError};
use tasknet::fixtures;
use tasknet::network::{
    close_amplitude, from_circuit, AmplitudeClosure, NetworkError, TensorNetwork,
};
use tasknet::pathtree::{
    build_tree, cost_report, estimate_seconds, greedy_path_by_components, greedy_shared_slices,
    slice_all, slice_tree, ContractionTree, CostReport, PathError, SliceSet,
};
use tasknet::taskgraph::{compile_multi, compile_single, Dedup, TaskError, TaskGraph};
use tasknet::{Precision, Scalar};
use thiserror::Error;

pub use format::{CircuitFile, FormatError, NetworkFile};

/// LINPACK rate of Fugaku, the default for `estimate`.
pub const DEFAULT_RATE: f64 = 442e15;

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "TASKNET_WORKERS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Resource(String),
}

impl CliError {
    /// 2 usage, 3 validation, 4 resource abort.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => 2,
            CliError::Validation(_) => 3,
            CliError::Resource(_) => 4,
        }
    }
}

macro_rules! validation_from {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Validation(e.to_string())
            }
        }
    )*};
}
validation_from!(
    FormatError,
    PathError,
    TaskError,
    NetworkError,
    CircuitError
);

impl From<ExecError> for CliError {
    fn from(e: ExecError) -> Self {
        match e {
            ExecError::MemoryLimit { .. } => CliError::Resource(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

/// The file's path, or a greedy one when it has none.
fn tree_of(file: &NetworkFile) -> Result<ContractionTree, CliError> {
    let path = match &file.path {
        Some(p) => p.clone(),
        None => greedy_path_by_components(&file.network)?,
    };
    Ok(build_tree(&file.network, &path)?)
}

fn slice_set(tree: &ContractionTree, labels: &[String]) -> Result<SliceSet, CliError> {
    Ok(SliceSet::new(tree, labels)?)
}

/// Task graph of the file's path and slice set.
pub fn compile_file(file: &NetworkFile, share: bool) -> Result<(TaskGraph, SliceSet), CliError> {
    let tree = tree_of(file)?;
    let set = slice_set(&tree, &file.slices)?;
    let g = if set.is_empty() {
        compile_single(&tree)
    } else {
        let dedup = if share { Dedup::On } else { Dedup::Off };
        compile_multi(&slice_all(&tree, &set)?, dedup)?
    };
    Ok((g, set))
}

#[derive(Debug, Clone)]
pub struct ContractOptions {
    pub workers: usize,
    /// Overrides the file's precision.
    pub precision: Option<Precision>,
    pub delete: bool,
    pub share: bool,
    pub memory_limit: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContractOutcome {
    pub amplitude: Complex64,
    pub precision: Precision,
    pub slices: u64,
    pub tasks: usize,
    pub flop: u64,
    pub peak_bytes: u64,
    pub seconds: f64,
}

impl ContractOutcome {
    pub fn render(&self) -> String {
        let a = match self.precision {
            Precision::Single => format!(
                "{:.8e} {:+.8e}i",
                self.amplitude.re as f32, self.amplitude.im as f32
            ),
            Precision::Double => format!("{:.16e} {:+.16e}i", self.amplitude.re, self.amplitude.im),
        };
        format!(
            "amplitude {a}\nprecision {}\nslices {}\ntasks {}\nflop {}\npeak_bytes {}\nseconds {:.6}\n",
            self.precision, self.slices, self.tasks, self.flop, self.peak_bytes, self.seconds
        )
    }
}

pub fn cmd_contract(
    file: &NetworkFile,
    opts: &ContractOptions,
) -> Result<ContractOutcome, CliError> {
    let precision = opts.precision.unwrap_or(file.precision);
    match precision {
        Precision::Single => contract_as::<num_complex::Complex32>(file, opts),
        Precision::Double => contract_as::<Complex64>(file, opts),
    }
}

fn contract_as<T: Scalar>(
    file: &NetworkFile,
    opts: &ContractOptions,
) -> Result<ContractOutcome, CliError> {
    if !file.network.is_closed() {
        return Err(CliError::Validation(
            "network has open labels; close it onto a basis state first".into(),
        ));
    }
    let (g, set) = compile_file(file, opts.share)?;
    let cfg = ExecConfig {
        workers: opts.workers,
        deletion: opts.delete,
        memory_limit: opts.memory_limit,
        schedule_seed: None,
    };
    let net: TensorNetwork<T> = file.network_as();
    let report = run(&g, &net, &cfg)?;
    let amplitude = report
        .result
        .scalar_value()
        .expect("closed network contracts to a scalar")
        .to_c64();
    Ok(ContractOutcome {
        amplitude,
        precision: T::PRECISION,
        slices: set.count(),
        tasks: report.executed_tasks,
        flop: report.flop,
        peak_bytes: report.peak_bytes,
        seconds: report.wall.as_secs_f64(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateOutcome {
    pub report: Option<CostReport>,
    pub flop: u128,
    pub rate: f64,
    pub seconds: f64,
}

impl EstimateOutcome {
    pub fn render(&self) -> String {
        let mut s = String::new();
        if let Some(r) = &self.report {
            let f = r.shared_fraction();
            let _ = writeln!(s, "flop_per_slice {}", r.flop_per_slice);
            let _ = writeln!(s, "slices {}", r.slices);
            let _ = writeln!(
                s,
                "shared_fraction {}/{} ({:.6})",
                f.numer(),
                f.denom(),
                r.shared_fraction_f64()
            );
            let _ = writeln!(s, "flop_amp_unshared {}", r.flop_without_sharing());
            let _ = writeln!(s, "flop_amp_shared {}", r.flop_with_sharing());
        }
        let _ = writeln!(s, "flop_amp {}", self.flop);
        let _ = writeln!(s, "rate {:e}", self.rate);
        let _ = writeln!(s, "seconds {:e}", self.seconds);
        s
    }
}

/// Cost of the file's slicing, or of a given FLOP total when `flop` is set.
pub fn cmd_estimate(
    file: Option<&NetworkFile>,
    rate: f64,
    flop: Option<u128>,
    share: bool,
) -> Result<EstimateOutcome, CliError> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(CliError::Usage(format!(
            "rate must be positive, got {rate}"
        )));
    }
    let report = match (file, flop) {
        (_, Some(_)) => None,
        (Some(file), None) => {
            let path = file.path.as_ref().ok_or_else(|| {
                CliError::Validation("network file has no contraction path".into())
            })?;
            let tree = build_tree(&file.network, path)?;
            let set = slice_set(&tree, &file.slices)?;
            Some(cost_report(&tree, &set, share)?)
        }
        (None, None) => return Err(CliError::Usage("give a network file or --flop".into())),
    };
    let total = flop.unwrap_or_else(|| report.expect("report present").flop_amp());
    Ok(EstimateOutcome {
        report,
        flop: total,
        rate,
        seconds: estimate_seconds(total, rate),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum GenerateSpec {
    Gbs(GbsConfig),
    Random {
        wires: usize,
        depth: usize,
        dim: usize,
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub circuit: CircuitFile,
    pub network: Option<NetworkFile>,
}

/// Parses `0,1,2` or `zeros` into a basis state for `wires` wires.
pub fn parse_basis(s: &str, wires: usize) -> Result<BasisState, CliError> {
    if s == "zeros" {
        return Ok(BasisState::new(vec![0; wires]));
    }
    let values = s
        .split(',')
        .map(|v| v.trim().parse::<usize>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| CliError::Usage(format!("bad basis '{s}'")))?;
    if values.len() != wires {
        return Err(CliError::Validation(format!(
            "basis has {} values for {wires} wires",
            values.len()
        )));
    }
    Ok(BasisState::new(values))
}

pub fn cmd_generate(
    spec: &GenerateSpec,
    basis: Option<&str>,
    precision: Precision,
) -> Result<Generated, CliError> {
    let (circuit, name) = match spec {
        GenerateSpec::Gbs(cfg) => (
            generate_gbs(cfg)?,
            format!(
                "gbs-d{}-w{}-c{}-D{}-s{}",
                cfg.dim, cfg.width, cfg.cycles, cfg.cutoff, cfg.seed
            ),
        ),
        GenerateSpec::Random {
            wires,
            depth,
            dim,
            seed,
        } => {
            if *wires < 1 || *dim < 2 {
                return Err(CliError::Validation(
                    "need at least one wire of dimension >= 2".into(),
                ));
            }
            (
                random_qudit_circuit(*wires, *depth, *dim, *seed),
                format!("random-n{wires}-m{depth}-D{dim}-s{seed}"),
            )
        }
    };
    let network = match basis {
        None => None,
        Some(b) => {
            let basis = parse_basis(b, circuit.wires)?;
            let net = close_amplitude(
                &from_circuit::<Complex64>(&circuit)?,
                &AmplitudeClosure::for_circuit(&circuit, &basis),
            )?;
            let path = greedy_path_by_components(&net)?;
            Some(NetworkFile::new(
                name,
                precision,
                &net,
                Some(path),
                Vec::new(),
            ))
        }
    };
    Ok(Generated {
        circuit: CircuitFile { circuit },
        network,
    })
}

/// The bundled two-wire example network with its reference path.
pub fn example_file(
    d: usize,
    basis: [usize; 2],
    precision: Precision,
) -> Result<NetworkFile, CliError> {
    if d < 2 || basis.iter().any(|&b| b >= d) {
        return Err(CliError::Validation(format!(
            "need dim >= 2 and basis values below {d}"
        )));
    }
    let net = fixtures::example_network::<Complex64>(d, basis);
    Ok(NetworkFile::new(
        format!("example-D{d}"),
        precision,
        &net,
        Some(fixtures::example_path()),
        Vec::new(),
    ))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SliceSpec {
    /// Greedy selection until the largest intermediate has at most this rank.
    MaxRank {
        rank: usize,
        max_labels: Option<usize>,
    },
    Labels(Vec<String>),
}

pub fn cmd_slice(
    file: &NetworkFile,
    spec: &SliceSpec,
) -> Result<(NetworkFile, CostReport), CliError> {
    let path = file
        .path
        .clone()
        .ok_or_else(|| CliError::Validation("network file has no contraction path".into()))?;
    let tree = build_tree(&file.network, &path)?;
    let set = match spec {
        SliceSpec::Labels(labels) => slice_set(&tree, labels)?,
        SliceSpec::MaxRank { rank, max_labels } => {
            let k = max_labels.unwrap_or_else(|| tree.contracted_labels().len());
            let set = if tree.max_rank() <= *rank {
                SliceSet::empty()
            } else {
                greedy_shared_slices(&tree, *rank, k)?
            };
            let reached = slice_tree(&tree, &set, &vec![0; set.len()])?.max_rank();
            if reached > *rank {
                return Err(CliError::Validation(format!(
                    "cannot reach max rank {rank} with {k} sliced labels (best {reached})"
                )));
            }
            set
        }
    };
    let report = cost_report(&tree, &set, true)?;
    let mut out = file.clone();
    out.path = Some(path);
    out.slices = set.labels().iter().map(|i| i.label.clone()).collect();
    Ok((out, report))
}

pub fn cmd_export_dot(file: &NetworkFile, share: bool, delete: bool) -> Result<String, CliError> {
    let (g, _) = compile_file(file, share)?;
    let g = if delete { g.insert_deletions() } else { g };
    Ok(g.to_dot())
}

#[cfg(test)]
mod tests {
    use super::*;
    use tasknet::network::full_sum;

    fn opts() -> ContractOptions {
        ContractOptions {
            workers: 2,
            precision: None,
            delete: true,
            share: true,
            memory_limit: None,
        }
    }

    #[test]
    fn example_contracts_to_full_sum() {
        let f = example_file(3, [1, 2], Precision::Double).unwrap();
        let out = cmd_contract(&f, &opts()).unwrap();
        assert!((out.amplitude - full_sum(&f.network).unwrap()).norm() < 1e-12);
        assert_eq!(out.slices, 1);
        assert!(out.render().starts_with("amplitude "));
    }

    #[test]
    fn share_flag_changes_flop_not_amplitude() {
        let f = example_file(2, [0, 0], Precision::Double).unwrap();
        let (sliced, report) = cmd_slice(&f, &SliceSpec::Labels(vec!["e".into()])).unwrap();
        assert_eq!(report.slices, 2);
        let on = cmd_contract(&sliced, &opts()).unwrap();
        let off = cmd_contract(
            &sliced,
            &ContractOptions {
                share: false,
                ..opts()
            },
        )
        .unwrap();
        assert_eq!(on.amplitude, off.amplitude);
        assert_eq!(on.flop as u128, report.flop_with_sharing());
        assert_eq!(off.flop as u128, report.flop_without_sharing());
    }

    #[test]
    fn estimate_rates() {
        let f = example_file(2, [0, 0], Precision::Single).unwrap();
        let (sliced, _) = cmd_slice(&f, &SliceSpec::Labels(vec!["e".into()])).unwrap();
        let one = cmd_estimate(Some(&sliced), 1.0, None, true).unwrap();
        assert_eq!(one.seconds, one.flop as f64);
        assert_eq!(one.report.unwrap().slices, 2);
        let two = cmd_estimate(Some(&sliced), 2.0, None, true).unwrap();
        assert_eq!(two.seconds * 2.0, one.seconds);
        let synth = cmd_estimate(None, DEFAULT_RATE, Some(884_000_000_000_000_000), true).unwrap();
        assert_eq!(synth.seconds, 2.0);
        assert!(matches!(
            cmd_estimate(None, 1.0, None, true),
            Err(CliError::Usage(_))
        ));
        let mut nopath = f.clone();
        nopath.path = None;
        assert_eq!(
            cmd_estimate(Some(&nopath), 1.0, None, true)
                .unwrap_err()
                .exit_code(),
            3
        );
    }

    #[test]
    fn slice_by_rank() {
        let f = example_file(2, [0, 0], Precision::Double).unwrap();
        let (same, _) = cmd_slice(
            &f,
            &SliceSpec::MaxRank {
                rank: 3,
                max_labels: None,
            },
        )
        .unwrap();
        assert!(same.slices.is_empty());
        let (s, r) = cmd_slice(
            &f,
            &SliceSpec::MaxRank {
                rank: 2,
                max_labels: None,
            },
        )
        .unwrap();
        assert_eq!(s.slices.len(), 1);
        assert!(r.shared_flop > 0);
        let e = cmd_slice(
            &f,
            &SliceSpec::MaxRank {
                rank: 0,
                max_labels: Some(1),
            },
        )
        .unwrap_err();
        assert_eq!(e.exit_code(), 3);
        let bad = cmd_slice(&f, &SliceSpec::Labels(vec!["zz".into()])).unwrap_err();
        assert_eq!(bad.exit_code(), 3);
    }

    #[test]
    fn memory_limit_is_resource_error() {
        let f = example_file(2, [0, 0], Precision::Double).unwrap();
        let e = cmd_contract(
            &f,
            &ContractOptions {
                memory_limit: Some(1),
                ..opts()
            },
        )
        .unwrap_err();
        assert_eq!(e.exit_code(), 4);
    }

    #[test]
    fn dot_export() {
        let f = example_file(2, [0, 0], Precision::Double).unwrap();
        let dot = cmd_export_dot(&f, true, false).unwrap();
        assert_eq!(dot.matches("kind=transpose").count(), 1);
        let (g, _) = compile_file(&f, true).unwrap();
        assert_eq!(dot.matches("shape=").count(), g.len());
        let (sliced, _) = cmd_slice(&f, &SliceSpec::Labels(vec!["e".into()])).unwrap();
        let dot = cmd_export_dot(&sliced, true, false).unwrap();
        assert_eq!(dot.matches("shared=true").count(), 2);
    }

    #[test]
    fn generate_counts_and_determinism() {
        let spec = GenerateSpec::Gbs(GbsConfig::new(3, 4, 1, 0.5, 2, 3));
        let g = cmd_generate(&spec, None, Precision::Single).unwrap();
        assert_eq!(g.circuit.circuit.count("S"), 64);
        assert_eq!(g.circuit.circuit.count("BS"), 171);
        assert_eq!(
            cmd_generate(&spec, None, Precision::Single)
                .unwrap()
                .circuit
                .to_text(),
            g.circuit.to_text()
        );
        let sq = cmd_generate(
            &GenerateSpec::Gbs(GbsConfig::new(1, 2, 0, 0.5, 3, 1)),
            Some("zeros"),
            Precision::Double,
        )
        .unwrap();
        assert_eq!(sq.circuit.circuit.gates.len(), 2);
        assert!(sq.circuit.circuit.gates.iter().all(|g| g.name == "S"));
        let amp = cmd_contract(sq.network.as_ref().unwrap(), &opts())
            .unwrap()
            .amplitude;
        let s = tasknet::circuits::squeezer_matrix(0.5, 3).matrix[0];
        assert!((amp - s * s).norm() < 1e-12);
    }

    #[test]
    fn basis_parsing() {
        assert_eq!(parse_basis("0,2,1", 3).unwrap().values, vec![0, 2, 1]);
        assert_eq!(parse_basis("zeros", 2).unwrap().values, vec![0, 0]);
        assert!(parse_basis("0,x", 2).is_err());
        assert!(parse_basis("0", 2).is_err());
    }
}
