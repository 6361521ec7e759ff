use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tasknet::circuits::GbsConfig;
use tasknet::Precision;
use tasknet_cli::{
    cmd_contract, cmd_estimate, cmd_export_dot, cmd_generate, cmd_slice, example_file, parse_basis,
    CliError, ContractOptions, GenerateSpec, NetworkFile, SliceSpec, DEFAULT_RATE, WORKERS_ENV,
};

#[derive(Parser)]
#[command(
    name = "tasknet",
    version,
    about = "Sliced tensor-network contraction with a task-graph executor"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

impl Switch {
    fn on(self) -> bool {
        matches!(self, Switch::On)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Prec {
    Single,
    Double,
}

impl From<Prec> for Precision {
    fn from(p: Prec) -> Self {
        match p {
            Prec::Single => Precision::Single,
            Prec::Double => Precision::Double,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Contract a closed network and print its amplitude and run report.
    Contract {
        file: PathBuf,
        #[arg(long, env = WORKERS_ENV)]
        workers: Option<usize>,
        /// Override the precision declared in the file.
        #[arg(long, value_enum)]
        precision: Option<Prec>,
        #[arg(long, value_enum, default_value = "on")]
        delete: Switch,
        #[arg(long, value_enum, default_value = "on")]
        share: Switch,
        /// Abort when live tensors would exceed this many bytes.
        #[arg(long)]
        memory_limit: Option<u64>,
    },
    /// Print the FLOP cost and estimated runtime of a network's slicing.
    Estimate {
        file: Option<PathBuf>,
        /// Sustained FLOP/s.
        #[arg(long, default_value_t = DEFAULT_RATE)]
        rate: f64,
        /// Use this FLOP total instead of a network file.
        #[arg(long)]
        flop: Option<u128>,
        #[arg(long, value_enum, default_value = "on")]
        share: Switch,
    },
    /// Write a seeded circuit, and optionally its closed network.
    Generate {
        #[command(subcommand)]
        kind: GenerateKind,
    },
    /// Add a slice set to a network file.
    Slice {
        file: PathBuf,
        /// Slice greedily until no intermediate exceeds this rank.
        #[arg(long, conflicts_with = "labels", required_unless_present = "labels")]
        max_rank: Option<usize>,
        /// Upper bound on the number of labels chosen by --max-rank.
        #[arg(long, requires = "max_rank")]
        max_labels: Option<usize>,
        /// Explicit labels to slice.
        #[arg(long, value_delimiter = ',')]
        labels: Option<Vec<String>>,
        /// Output file; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the task graph in Graphviz DOT format.
    ExportDot {
        file: PathBuf,
        #[arg(long, value_enum, default_value = "on")]
        share: Switch,
        /// Include delete tasks.
        #[arg(long)]
        delete: bool,
    },
}

#[derive(Args)]
struct Outputs {
    /// Circuit output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the network closed onto --basis, with a greedy path.
    #[arg(long, requires = "basis")]
    emit_network: Option<PathBuf>,
    /// Output basis state: comma-separated values or `zeros`.
    #[arg(long)]
    basis: Option<String>,
    #[arg(long, value_enum, default_value = "single")]
    precision: Prec,
}

#[derive(Subcommand)]
enum GenerateKind {
    /// Random lattice Gaussian boson sampling circuit.
    Gbs {
        /// Lattice dimension.
        #[arg(long)]
        dim: usize,
        /// Modes per lattice direction.
        #[arg(long)]
        width: usize,
        #[arg(long, default_value_t = 1)]
        cycles: usize,
        /// Squeezing parameter.
        #[arg(long, visible_alias = "r", default_value_t = 0.5)]
        squeeze: f64,
        /// Fock cutoff per mode.
        #[arg(long, default_value_t = 3)]
        cutoff: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        outputs: Outputs,
    },
    /// Random brickwork qudit circuit.
    Random {
        #[arg(long)]
        wires: usize,
        #[arg(long)]
        depth: usize,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        outputs: Outputs,
    },
    /// The two-wire example network with its reference path.
    Example {
        #[arg(long, default_value_t = 2)]
        dim: usize,
        /// Output values of the two wires.
        #[arg(long, default_value = "0,0")]
        basis: String,
        #[arg(long, value_enum, default_value = "double")]
        precision: Prec,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn read_network(path: &Path) -> Result<NetworkFile, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    NetworkFile::parse(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

fn write_out(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => {
            std::fs::write(p, text).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn network_text(f: &NetworkFile) -> Result<String, CliError> {
    f.to_text().map_err(CliError::Validation)
}

fn generate(spec: GenerateSpec, outputs: Outputs) -> Result<(), CliError> {
    let g = cmd_generate(&spec, outputs.basis.as_deref(), outputs.precision.into())?;
    write_out(outputs.out.as_deref(), &g.circuit.to_text())?;
    if let (Some(path), Some(net)) = (outputs.emit_network.as_deref(), g.network.as_ref()) {
        write_out(Some(path), &network_text(net)?)?;
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Contract {
            file,
            workers,
            precision,
            delete,
            share,
            memory_limit,
        } => {
            let f = read_network(&file)?;
            let workers = workers
                .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            if workers == 0 {
                return Err(CliError::Usage("--workers must be at least 1".into()));
            }
            let opts = ContractOptions {
                workers,
                precision: precision.map(Into::into),
                delete: delete.on(),
                share: share.on(),
                memory_limit,
            };
            print!("{}", cmd_contract(&f, &opts)?.render());
        }
        Command::Estimate {
            file,
            rate,
            flop,
            share,
        } => {
            let f = file.as_deref().map(read_network).transpose()?;
            print!(
                "{}",
                cmd_estimate(f.as_ref(), rate, flop, share.on())?.render()
            );
        }
        Command::Generate { kind } => match kind {
            GenerateKind::Gbs {
                dim,
                width,
                cycles,
                squeeze,
                cutoff,
                seed,
                outputs,
            } => generate(
                GenerateSpec::Gbs(GbsConfig::new(dim, width, cycles, squeeze, cutoff, seed)),
                outputs,
            )?,
            GenerateKind::Random {
                wires,
                depth,
                dim,
                seed,
                outputs,
            } => generate(
                GenerateSpec::Random {
                    wires,
                    depth,
                    dim,
                    seed,
                },
                outputs,
            )?,
            GenerateKind::Example {
                dim,
                basis,
                precision,
                out,
            } => {
                let b = parse_basis(&basis, 2)?.values;
                let f = example_file(dim, [b[0], b[1]], precision.into())?;
                write_out(out.as_deref(), &network_text(&f)?)?;
            }
        },
        Command::Slice {
            file,
            max_rank,
            max_labels,
            labels,
            out,
        } => {
            let f = read_network(&file)?;
            let spec = match (labels, max_rank) {
                (Some(l), _) => SliceSpec::Labels(l),
                (None, Some(rank)) => SliceSpec::MaxRank { rank, max_labels },
                (None, None) => return Err(CliError::Usage("give --labels or --max-rank".into())),
            };
            let (sliced, report) = cmd_slice(&f, &spec)?;
            let summary = format!(
                "sliced {}\nslices {}\nflop_per_slice {}\nshared_fraction {:.6}\nflop_amp {}\n",
                sliced.slices.join(","),
                report.slices,
                report.flop_per_slice,
                report.shared_fraction_f64(),
                report.flop_amp()
            );
            match out {
                Some(p) => {
                    write_out(Some(&p), &network_text(&sliced)?)?;
                    print!("{summary}");
                }
                None => {
                    print!("{}", network_text(&sliced)?);
                    eprint!("{summary}");
                }
            }
        }
        Command::ExportDot {
            file,
            share,
            delete,
        } => {
            let f = read_network(&file)?;
            print!("{}", cmd_export_dot(&f, share.on(), delete)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tasknet: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
