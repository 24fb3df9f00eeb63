//! `shg`: command-line drivers for the sinh-Gordon checks.
//!
//! Every run resolves a [`config::RunConfig`], writes its records as JSON
//! lines to stdout and `records.jsonl`, its data files and a
//! `manifest.json` to the output directory. Exit codes: 0 when every check
//! passes, 1 on a failed check or numerical error, 2 on malformed input.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;
use output::{write_manifest, CliError, CliResult, Run, EXIT_NUMERIC, EXIT_PASS};

#[derive(Parser, Debug)]
#[command(name = "shg", version, about = "Periodic sinh-Gordon solutions: monodromy, spectral curves and symplectic checks")]
struct Cli {
    /// TOML file with configuration keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set grid=128`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    /// Output directory.
    #[arg(long, global = true, default_value = "shg-out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

/// Source of Cauchy data.
#[derive(Args, Debug, Default)]
struct DataArgs {
    /// Use `u ≡ 0, u_y ≡ 0`.
    #[arg(long)]
    vacuum: bool,
    /// CSV with columns x, u, uy.
    #[arg(long)]
    input: Option<String>,
    /// Seed of the random generator.
    #[arg(long)]
    seed: Option<u64>,
    /// Grid size.
    #[arg(long)]
    grid: Option<usize>,
}

/// Killing-field seed.
#[derive(Args, Debug, Default)]
struct SeedArgs {
    #[arg(long)]
    genus: Option<usize>,
    #[arg(long)]
    period: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Monodromy and ln μ at spectral parameters.
    Monodromy {
        #[command(flatten)]
        data: DataArgs,
        /// Spectral parameter; repeatable.
        #[arg(long)]
        lambda: Vec<f64>,
    },
    /// Coefficients of the small-λ expansion of ln μ.
    Expand {
        #[command(flatten)]
        data: DataArgs,
        /// Number of coefficients after the leading one; powers of √λ run
        /// from -1 to order - 1.
        #[arg(long)]
        order: Option<usize>,
    },
    /// Pinkall-Sterling iteration of Jacobi fields.
    PsIterate {
        #[arg(long)]
        levels: Option<usize>,
    },
    /// Killing-field flow along x.
    FlowX {
        #[command(flatten)]
        seed: SeedArgs,
        #[arg(long)]
        span: Option<f64>,
    },
    /// Killing-field flow along y.
    FlowY {
        #[command(flatten)]
        seed: SeedArgs,
        #[arg(long)]
        span: Option<f64>,
    },
    /// Spectral curve recovered from a Killing field.
    Curve {
        #[command(flatten)]
        seed: SeedArgs,
    },
    /// Closing conditions of the recovered curve.
    Closing {
        #[command(flatten)]
        seed: SeedArgs,
    },
    /// Isoperiodic Whitham flow.
    Whitham {
        #[command(flatten)]
        seed: SeedArgs,
        #[arg(long)]
        t_end: Option<f64>,
    },
    /// Gradient theorem on random directions.
    Gradients {
        #[command(flatten)]
        data: DataArgs,
        /// Highest Hamiltonian index.
        #[arg(long)]
        n: Option<usize>,
        /// Number of random directions.
        #[arg(long)]
        dirs: Option<usize>,
    },
    /// Poisson brackets of the Hamiltonians.
    Involution {
        #[command(flatten)]
        data: DataArgs,
        /// Highest Hamiltonian index.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Pairing equation between isospectral and Whitham tangents.
    Pairing {
        #[command(flatten)]
        seed: SeedArgs,
    },
    /// Sym-Bobenko surface as an OBJ mesh.
    Surface {
        #[command(flatten)]
        seed: SeedArgs,
        #[arg(long)]
        nx: Option<usize>,
        #[arg(long)]
        ny: Option<usize>,
    },
}

type Flags = Vec<(&'static str, toml::Value)>;

fn push<T: Into<toml::Value>>(flags: &mut Flags, key: &'static str, v: Option<T>) {
    if let Some(v) = v {
        flags.push((key, v.into()));
    }
}

fn int(v: Option<impl TryInto<i64>>) -> Option<i64> {
    v.and_then(|x| x.try_into().ok())
}

fn data_flags(flags: &mut Flags, d: &DataArgs) {
    if d.vacuum {
        flags.push(("vacuum", true.into()));
    }
    push(flags, "input", d.input.clone());
    push(flags, "seed", int(d.seed));
    push(flags, "grid", int(d.grid));
}

fn seed_flags(flags: &mut Flags, s: &SeedArgs) {
    push(flags, "genus", int(s.genus));
    push(flags, "period", s.period);
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Monodromy { .. } => "monodromy",
            Command::Expand { .. } => "expand",
            Command::PsIterate { .. } => "ps-iterate",
            Command::FlowX { .. } => "flow-x",
            Command::FlowY { .. } => "flow-y",
            Command::Curve { .. } => "curve",
            Command::Closing { .. } => "closing",
            Command::Whitham { .. } => "whitham",
            Command::Gradients { .. } => "gradients",
            Command::Involution { .. } => "involution",
            Command::Pairing { .. } => "pairing",
            Command::Surface { .. } => "surface",
        }
    }

    fn flags(&self) -> Flags {
        let mut f = Flags::new();
        match self {
            Command::Monodromy { data, lambda } => {
                data_flags(&mut f, data);
                if !lambda.is_empty() {
                    f.push(("lambda", toml::Value::Array(lambda.iter().map(|&l| l.into()).collect())));
                }
            }
            Command::Expand { data, order } => {
                data_flags(&mut f, data);
                push(&mut f, "order", int(*order));
            }
            Command::PsIterate { levels } => push(&mut f, "levels", int(*levels)),
            Command::FlowX { seed, span } | Command::FlowY { seed, span } => {
                seed_flags(&mut f, seed);
                push(&mut f, "span", *span);
            }
            Command::Curve { seed } | Command::Closing { seed } | Command::Pairing { seed } => seed_flags(&mut f, seed),
            Command::Whitham { seed, t_end } => {
                seed_flags(&mut f, seed);
                push(&mut f, "t_end", *t_end);
            }
            Command::Gradients { data, n, dirs } => {
                data_flags(&mut f, data);
                push(&mut f, "n_max", int(*n));
                push(&mut f, "dirs", int(*dirs));
            }
            Command::Involution { data, n } => {
                data_flags(&mut f, data);
                push(&mut f, "n_max", int(*n));
            }
            Command::Surface { seed, nx, ny } => {
                seed_flags(&mut f, seed);
                push(&mut f, "nx", int(*nx));
                push(&mut f, "ny", int(*ny));
            }
        }
        f
    }

    fn run(&self, cfg: &RunConfig, run: &mut Run) -> CliResult<()> {
        match self {
            Command::Monodromy { .. } => commands::monodromy(cfg, run),
            Command::Expand { .. } => commands::expand(cfg, run),
            Command::PsIterate { .. } => commands::ps_iterate(cfg, run),
            Command::FlowX { .. } => commands::flow_x(cfg, run),
            Command::FlowY { .. } => commands::flow_y(cfg, run),
            Command::Curve { .. } => commands::curve(cfg, run),
            Command::Closing { .. } => commands::closing(cfg, run),
            Command::Whitham { .. } => commands::whitham(cfg, run),
            Command::Gradients { .. } => commands::gradients(cfg, run),
            Command::Involution { .. } => commands::involution(cfg, run),
            Command::Pairing { .. } => commands::pairing(cfg, run),
            Command::Surface { .. } => commands::surface(cfg, run),
        }
    }
}

fn fail(e: &CliError) -> ExitCode {
    eprintln!("{}", e.record());
    ExitCode::from(e.code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            if !e.use_stderr() {
                // --help and --version
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            return fail(&CliError::malformed(e.to_string().trim().to_string()));
        }
    };
    let start = Instant::now();
    let cfg = match config::resolve(cli.config.as_deref(), &cli.set, cli.command.flags()) {
        Ok(c) => c,
        Err(m) => return fail(&CliError::malformed(m)),
    };
    let mut run = match Run::new(&cli.out, &cfg) {
        Ok(r) => r,
        Err(e) => return fail(&e),
    };
    let outcome = cli.command.run(&cfg, &mut run).and_then(|()| {
        let jsonl = run.jsonl();
        print!("{jsonl}");
        run.write("records.jsonl", &jsonl)?;
        let text = toml::to_string(&cfg).map_err(|e| CliError::io(e.to_string()))?;
        run.write("config.toml", &text)
    });
    let code = match &outcome {
        Ok(()) if run.all_pass() => EXIT_PASS,
        Ok(()) => EXIT_NUMERIC,
        Err(e) => e.code,
    };
    let name = cli.command.name();
    if let Err(e) = &outcome {
        eprintln!("{}", e.record());
        let _ = std::fs::write(cli.out.join("error.json"), e.record().to_string() + "\n");
        run.files.push("error.json".into());
    }
    if let Err(e) = write_manifest(&cli.out, name, &cfg, &run.files, code, start.elapsed().as_secs_f64()) {
        return fail(&e);
    }
    ExitCode::from(code)
}
