use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use timoshenko_core::evolution::energy_ledger;
use timoshenko_core::harness::{self, initial_data, EvolveConfig, ExperimentConfig, Mode};
use timoshenko_core::io as files;
use timoshenko_core::littlewood_paley::{parse_exponent, BesovSpec, DyadicFilterBank};
use timoshenko_core::symbol::{dissipative_fit, logspace, EtaKind};
use timoshenko_core::{Component, ModelParams};

#[derive(Parser)]
#[command(name = "timoshenko", version, about = "Spectral laboratory for the dissipative Timoshenko system")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Besov norm of one component of a field file, with its block table.
    Besov {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        component: Component,
        #[arg(long, allow_hyphen_values = true)]
        s: f64,
        #[arg(long, default_value = "2", value_parser = exponent)]
        p: f64,
        #[arg(long, default_value = "1", value_parser = exponent)]
        r: f64,
        #[arg(long, default_value_t = false, action = clap::ArgAction::Set)]
        homogeneous: bool,
    },
    /// Eigenvalue sweep of the Fourier symbol and the dissipative ratio fit.
    Symbol {
        #[arg(long, default_value_t = 1.0)]
        a: f64,
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        #[arg(long, default_value_t = 1e-3)]
        xi_min: f64,
        #[arg(long, default_value_t = 1e3)]
        xi_max: f64,
        #[arg(long, default_value_t = 2000)]
        points: usize,
        #[arg(long, value_enum, default_value_t = EtaArg::Auto)]
        eta: EtaArg,
        #[arg(long)]
        out: PathBuf,
        /// Also dump `xi,max_re_lambda,ratio` rows.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Evolves initial data and writes a trajectory directory.
    Evolve {
        #[arg(long, value_enum, default_value_t = ModeArg::Linear)]
        mode: ModeArg,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        energies: Option<PathBuf>,
    },
    /// Runs a decay experiment; exits non-zero unless every fit passes.
    Decay {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum EtaArg {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
    Auto,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Linear,
    Nonlinear,
    Duhamel,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Linear => Mode::Linear,
            ModeArg::Nonlinear => Mode::Nonlinear,
            ModeArg::Duhamel => Mode::Duhamel,
        }
    }
}

fn exponent(s: &str) -> std::result::Result<f64, String> {
    parse_exponent(s).map_err(|e| e.to_string())
}

fn besov(
    input: PathBuf,
    component: Component,
    s: f64,
    p: f64,
    r: f64,
    homogeneous: bool,
) -> Result<()> {
    let field = files::load_field(&input).with_context(|| format!("reading {}", input.display()))?;
    let spec = BesovSpec::new(s, p, r, homogeneous)?;
    let bank = DyadicFilterBank::new(field.grid())?;
    let data = field.component(component);
    let norm = bank.besov_norm(data, &spec)?;
    let blocks = bank.besov_blocks(data, &spec)?;
    let mut out = io::stdout().lock();
    writeln!(out, "norm,{norm}")?;
    writeln!(out, "q,weighted_block_norm")?;
    for (q, w) in blocks {
        writeln!(out, "{q},{w}")?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn symbol(
    a: f64,
    gamma: f64,
    xi_min: f64,
    xi_max: f64,
    points: usize,
    eta: EtaArg,
    out: PathBuf,
    csv: Option<PathBuf>,
) -> Result<()> {
    if !(xi_min > 0.0 && xi_max > xi_min) {
        bail!("need 0 < xi-min < xi-max, got [{xi_min}, {xi_max}]");
    }
    let params = ModelParams::linear(a, gamma)?;
    let kind = match eta {
        EtaArg::One => EtaKind::One,
        EtaArg::Two => EtaKind::Two,
        EtaArg::Auto => EtaKind::auto(&params),
    };
    let report = dissipative_fit(&params, &logspace(xi_min, xi_max, points), kind)?;
    fs::write(&out, serde_json::to_string_pretty(&report)?)
        .with_context(|| format!("writing {}", out.display()))?;
    if let Some(path) = csv {
        let mut f = BufWriter::new(fs::File::create(&path)?);
        writeln!(f, "xi,max_re_lambda,ratio")?;
        for ((x, m), r) in report.xi.iter().zip(&report.max_re_lambda).zip(&report.ratio) {
            writeln!(f, "{x},{m},{r}")?;
        }
        f.flush()?;
    }
    println!("c_best = {} ({})", report.c_best, if report.pass { "pass" } else { "fail" });
    Ok(())
}

fn evolve(mode: Mode, config: PathBuf, out: PathBuf, energies: Option<PathBuf>) -> Result<()> {
    let text = fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
    let cfg = EvolveConfig::from_json(&text)?;
    let grid = cfg.grid.build()?;
    let u0 = initial_data(&cfg.data, &grid)?;
    let traj = harness::evolve(mode, &cfg.params, &u0.state, &cfg.times_from_zero()?, cfg.dt)?;
    let label = match mode {
        Mode::Linear => "linear",
        Mode::Nonlinear => "nonlinear",
        Mode::Duhamel => "duhamel",
    };
    files::write_trajectory(&out, &traj, Some(label))?;
    if let Some(path) = energies {
        let ledger = energy_ledger(&traj)?;
        files::write_ledger_csv(fs::File::create(&path)?, &ledger)?;
    }
    println!("{} snapshots written to {}", traj.states.len(), out.display());
    Ok(())
}

fn decay(config: PathBuf, out: PathBuf) -> Result<bool> {
    let text = fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
    let cfg = ExperimentConfig::from_json(&text)?;
    let outcome = harness::run_suite(&cfg)?;
    files::write_report_csv(fs::File::create(&out)?, &outcome.reports)?;
    for r in &outcome.reports {
        println!(
            "{} ell={}: slope {:.4} predicted {:.4} +/- {} {}",
            r.norm,
            r.ell,
            r.slope,
            r.predicted,
            r.tolerance,
            if r.pass { "pass" } else { "FAIL" }
        );
    }
    if let Some(trend) = &outcome.regularity_loss {
        for s in trend {
            match s.slope {
                Some(k) => println!("shell q={} xi={}: slope {k:.4}", s.q, s.xi),
                None => println!("shell q={} xi={}: below round-off", s.q, s.xi),
            }
        }
    }
    Ok(outcome.all_pass())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Besov {
            input,
            component,
            s,
            p,
            r,
            homogeneous,
        } => besov(input, component, s, p, r, homogeneous).map(|_| true),
        Command::Symbol {
            a,
            gamma,
            xi_min,
            xi_max,
            points,
            eta,
            out,
            csv,
        } => symbol(a, gamma, xi_min, xi_max, points, eta, out, csv).map(|_| true),
        Command::Evolve {
            mode,
            config,
            out,
            energies,
        } => evolve(mode.into(), config, out, energies).map(|_| true),
        Command::Decay { config, out } => decay(config, out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
