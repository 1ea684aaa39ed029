use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use ellpar::barriers::{verify_subsolution_margin, BarrierRegistry};
use ellpar::config::Config;
use ellpar::harness::{compare_pair, make_comparison_pair, run_acceptance, Fault, Scenario};
use ellpar::io::{read_field_csv, write_field_csv, write_json, write_run};
use ellpar::nonlinearity::{BSpec, Nonlinearity};
use ellpar::operators::OperatorContext;
use ellpar::regularize::{convolve, first_crossing, ConvolutionKind};
use ellpar::solver::{run, singular_limit_study};
use ellpar::Error;

#[derive(Parser)]
#[command(
    name = "ellpar",
    version,
    about = "Elliptic-parabolic phase-transition solver and checks"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Integrate the configured problem; writes field.csv, front.csv, summary.json.
    Solve {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Convergence in n; writes convergence.json.
    SweepN {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        n: Option<Vec<u32>>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Sample a barrier's validity window and print the margin report.
    VerifyBarrier {
        #[arg(long)]
        family: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sup- or inf-convolution of a field.csv.
    Envelope {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        r: f64,
        #[arg(long, default_value = "sup")]
        kind: ConvolutionKind,
        #[arg(long)]
        out: PathBuf,
    },
    /// First time level where W - Z <= 0 somewhere.
    Crossing {
        #[arg(long)]
        z: PathBuf,
        #[arg(long)]
        w: PathBuf,
    },
    /// Run an ordered pair built from the configured class-p datum.
    Compare {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        gap: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the acceptance suite.
    Accept {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Comma-separated criterion ids.
        #[arg(long, value_delimiter = ',')]
        only: Option<Vec<u32>>,
        #[arg(long)]
        fault: Option<Fault>,
        #[arg(long, default_value = "acceptance_report.json")]
        report: PathBuf,
    },
}

/// 2 for anything wrong with the inputs, 1 for a failed check or run.
struct Exit(u8, String);

impl From<Error> for Exit {
    fn from(e: Error) -> Self {
        let code = if e.is_config() { 2 } else { 1 };
        Exit(code, e.to_string())
    }
}

fn input<T>(r: ellpar::Result<T>) -> Result<T, Exit> {
    r.map_err(|e| Exit(2, e.to_string()))
}

fn load(path: Option<&Path>) -> Result<Config, Exit> {
    input(match path {
        Some(p) => Config::load(p),
        None => Ok(Config::default()),
    })
}

/// Stdout writes ignore a closed pipe (`ellpar crossing … | head`).
fn out_line(s: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{s}");
}

fn print<T: Serialize>(v: &T) -> Result<(), Exit> {
    out_line(&serde_json::to_string_pretty(v).map_err(Error::from)?);
    Ok(())
}

fn verdict(passed: bool) -> Result<(), Exit> {
    if passed {
        Ok(())
    } else {
        Err(Exit(1, "check failed".into()))
    }
}

fn exec(cmd: Cmd) -> Result<(), Exit> {
    match cmd {
        Cmd::Solve { config, out } => {
            let cfg = load(config.as_deref())?;
            let p = input(cfg.problem())?;
            let f = run(&p, &cfg.policy)?;
            write_run(&out, &f)?;
            log::info!("extinction at {:?}", f.extinction_time);
            Ok(())
        }
        Cmd::SweepN { config, n, out } => {
            let cfg = load(config.as_deref())?;
            let spec = input(cfg.problem_spec())?;
            let n_list = n.unwrap_or(cfg.sweep.n_list.clone());
            let r = input(singular_limit_study(
                &spec,
                &n_list,
                &cfg.sweep.probe_times,
                &cfg.policy,
            ))?;
            std::fs::create_dir_all(&out).map_err(Error::from)?;
            write_json(&out.join("convergence.json"), &r)?;
            verdict(r.distances_decreasing && r.extinction_cauchy)
        }
        Cmd::VerifyBarrier {
            family,
            config,
            out,
        } => {
            let cfg = load(config.as_deref())?;
            let mut bc = cfg.barrier.clone().unwrap_or_default();
            bc.family = family;
            let nl = match (cfg.b.n, &cfg.b.spec) {
                (Some(n), _) => Some(Nonlinearity::Smooth(input(
                    ellpar::nonlinearity::BnFamily::new(n),
                )?)),
                (None, BSpec::PositivePart) => None,
                (None, spec) => Some(Nonlinearity::Exact(spec.clone())),
            };
            let ctx = OperatorContext {
                b: nl
                    .clone()
                    .unwrap_or(Nonlinearity::Exact(BSpec::PositivePart)),
                psi: cfg.psi.clone(),
            };
            let bar = input(BarrierRegistry::global().build(&bc, &cfg.op, &ctx))?;
            let op = input(cfg.op.build(&ctx))?;
            let r = verify_subsolution_margin(
                bar.as_ref(),
                op.as_ref(),
                nl.as_ref(),
                bc.samples.unwrap_or(1000),
                bc.seed.unwrap_or(cfg.seed),
            )?;
            if let Some(path) = out {
                write_json(&path, &r)?;
            }
            print(&r)?;
            verdict(r.passed)
        }
        Cmd::Envelope {
            input: path,
            r,
            kind,
            out,
        } => {
            let f = input(read_field_csv(&path))?;
            let c = input(convolve(&f, r, kind))?;
            write_field_csv(&out, &c.field)?;
            Ok(())
        }
        Cmd::Crossing { z, w } => {
            let (z, w) = (input(read_field_csv(&z))?, input(read_field_csv(&w))?);
            let c = input(first_crossing(&z, &w))?;
            print(&c)
        }
        Cmd::Compare { config, gap, out } => {
            let cfg = load(config.as_deref())?;
            let base = Scenario {
                name: "config".into(),
                spec: input(cfg.problem_spec())?,
                expectations: Vec::new(),
            };
            let pair = input(make_comparison_pair(&base, gap.unwrap_or(cfg.compare.gap)))?;
            let r = compare_pair(&pair, cfg.compare.r, &cfg.policy)?;
            if let Some(path) = out {
                write_json(&path, &r)?;
            }
            print(&r)?;
            verdict(r.passed())
        }
        Cmd::Accept {
            config,
            only,
            fault,
            report,
        } => {
            let cfg = load(config.as_deref())?;
            let mut opts = cfg.accept.clone();
            if let Some(only) = only {
                opts.only = only;
            }
            if fault.is_some() {
                opts.fault = fault;
            }
            let r = input(run_acceptance(&opts))?;
            for line in r.lines() {
                out_line(&line);
            }
            write_json(&report, &r)?;
            verdict(r.passed)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match exec(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Exit(code, msg)) => {
            eprintln!("ellpar: {msg}");
            ExitCode::from(code)
        }
    }
}
