use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use halfmap::bubbles::{BubbleComponent, BubbleParams};
use halfmap::commands::{exit_code, run};
use halfmap::nonlocal::TailModel;
use halfmap::report::{Command, Report, RunConfig};
use halfmap::Error;

/// Numerical checks for half-harmonic maps from the line to the circle.
#[derive(Debug, Parser)]
#[command(name = "halfmap", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Kernel of the linearized operator from the mode system.
    VerifyKernel {
        /// Band limit N (at least 3).
        #[arg(long, default_value_t = 8)]
        modes: usize,
        #[arg(long, default_value_t = halfmap::linearization::DEFAULT_ZERO_THRESHOLD)]
        zero_threshold: f64,
        #[command(flatten)]
        line: LineArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Degree, energy and Euler-Lagrange residual of a bubble.
    VerifyBubble {
        /// Spectral energy band.
        #[arg(long, default_value_t = 256)]
        modes: usize,
        /// Signed degree of a random bubble drawn from the seed.
        #[arg(long, default_value_t = 1, allow_hyphen_values = true, conflicts_with = "components")]
        degree: i64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Explicit bubble as `scale:center,scale:center,...`.
        #[arg(long, value_parser = parse_components)]
        components: Option<Components>,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true, requires = "components")]
        theta: f64,
        #[arg(long, requires = "components")]
        conjugate: bool,
        #[command(flatten)]
        line: LineArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Potential, chordal, intertwining, oracle and linearized-operator identities.
    VerifyOperators {
        /// Band of the random circle fields.
        #[arg(long, default_value_t = 8)]
        modes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        line: LineArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Projected gradient descent of the energy within a degree class.
    Minimize {
        /// Band limit N of the circle grid (2N+1 nodes).
        #[arg(long, default_value_t = 64)]
        modes: usize,
        #[arg(long, default_value_t = 1, allow_hyphen_values = true)]
        degree: i64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Initial step; defaults to 1/N.
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long, default_value_t = 20_000)]
        max_iters: usize,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        /// Energy trace CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Run a serialized configuration, such as the `config` object of a report.
    Replay {
        config: PathBuf,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Debug, Args)]
struct LineArgs {
    /// Innermost panel width of the principal-value quadrature.
    #[arg(long, default_value_t = 0.05)]
    pv_step: f64,
    /// Truncation radius T of the principal-value integral.
    #[arg(long, default_value_t = 900.0)]
    truncation: f64,
    #[arg(long, value_enum, default_value_t = Tail::InverseSquare)]
    tail: Tail,
    /// Odd node count of the line grid.
    #[arg(long, default_value_t = 2001)]
    line_nodes: usize,
    #[arg(long, default_value_t = 1000.0)]
    line_radius: f64,
}

#[derive(Debug, Args)]
struct OutArgs {
    /// Write the report to `path.json` or `path.csv` and print a summary instead.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Tail {
    None,
    InverseSquare,
}

#[derive(Debug, Clone)]
struct Components(Vec<BubbleComponent>);

fn parse_components(s: &str) -> Result<Components, String> {
    s.split(',')
        .map(|pair| {
            let (scale, center) = pair
                .split_once(':')
                .ok_or_else(|| format!("expected scale:center, got `{pair}`"))?;
            let scale = scale.trim().parse::<f64>().map_err(|e| format!("scale `{scale}`: {e}"))?;
            let center = center.trim().parse::<f64>().map_err(|e| format!("center `{center}`: {e}"))?;
            Ok(BubbleComponent { scale, center })
        })
        .collect::<Result<Vec<_>, String>>()
        .map(Components)
}

impl LineArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        cfg.quadrature.step = self.pv_step;
        cfg.quadrature.truncation = self.truncation;
        cfg.quadrature.tail = match self.tail {
            Tail::None => TailModel::None,
            Tail::InverseSquare => TailModel::InverseSquare,
        };
        cfg.line.nodes = self.line_nodes;
        cfg.line.radius = self.line_radius;
    }
}

fn with_modes(command: Command, modes: usize) -> RunConfig {
    let mut cfg = RunConfig::new(command);
    cfg.modes = modes;
    cfg.minimizer.band = modes;
    cfg.minimizer.eta = 1.0 / modes.max(1) as f64;
    cfg
}

fn build(cmd: Cmd) -> halfmap::Result<(RunConfig, Option<PathBuf>)> {
    let (mut cfg, out) = match cmd {
        Cmd::VerifyKernel {
            modes,
            zero_threshold,
            line,
            out,
        } => {
            let mut cfg = with_modes(Command::VerifyKernel, modes);
            cfg.zero_threshold = zero_threshold;
            line.apply(&mut cfg);
            (cfg, out.out)
        }
        Cmd::VerifyBubble {
            modes,
            degree,
            seed,
            components,
            theta,
            conjugate,
            line,
            out,
        } => {
            let mut cfg = with_modes(Command::VerifyBubble, modes);
            cfg.seed = seed;
            cfg.degree = degree;
            if let Some(Components(c)) = components {
                let p = BubbleParams::new(theta, c, conjugate)?;
                cfg.degree = p.degree();
                cfg.bubble = Some(p);
            }
            line.apply(&mut cfg);
            (cfg, out.out)
        }
        Cmd::VerifyOperators { modes, seed, line, out } => {
            let mut cfg = with_modes(Command::VerifyOperators, modes);
            cfg.seed = seed;
            line.apply(&mut cfg);
            (cfg, out.out)
        }
        Cmd::Minimize {
            modes,
            degree,
            seed,
            eta,
            max_iters,
            tol,
            trace,
            out,
        } => {
            let mut cfg = with_modes(Command::Minimize, modes);
            cfg.degree = degree;
            cfg.seed = seed;
            if let Some(eta) = eta {
                cfg.minimizer.eta = eta;
            }
            cfg.minimizer.max_iters = max_iters;
            cfg.minimizer.tol = tol;
            cfg.trace = trace;
            (cfg, out.out)
        }
        Cmd::Replay { config, out } => {
            let text = fs::read_to_string(&config)
                .map_err(|e| Error::InvalidParameter(format!("{}: {e}", config.display())))?;
            let cfg = RunConfig::from_json(&text)?;
            (cfg, out.out)
        }
    };
    if out.is_some() {
        cfg.output = out.clone();
    }
    let out = cfg.output.clone();
    Ok((cfg, out))
}

fn summary(report: &Report) -> String {
    let mut s = String::new();
    for c in &report.checks {
        let mark = if c.pass { "PASS" } else { "FAIL" };
        s.push_str(&format!(
            "{mark} {:<34} measured {:<12.4e} tolerance {:.1e} margin {:.3e}\n",
            c.name, c.measured, c.tolerance, c.margin
        ));
    }
    s.push_str(&format!(
        "{} {} in {:.2}s\n",
        report.config.command.name(),
        if report.passed { "passed" } else { "failed" },
        report.wall_time_s
    ));
    s
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = build(cli.command).and_then(|(cfg, out)| run(&cfg).map(|r| (r, out)));
    match &outcome {
        Ok((report, Some(path))) => {
            print!("{}", summary(report));
            println!("report written to {}", path.display());
        }
        Ok((report, None)) => match report.to_json() {
            Ok(json) => println!("{json}"),
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(1);
            }
        },
        Err(e) => eprintln!("error: {e}"),
    }
    let code = exit_code(&outcome.map(|(r, _)| r));
    ExitCode::from(code as u8)
}
