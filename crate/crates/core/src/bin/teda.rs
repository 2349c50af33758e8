use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sha2::{Digest, Sha256};

use teda_core::compressor::{quantize, unify_tensor, ContainerFile, Layout, Tensor, TensorPayload};
use teda_core::config::RunConfig;
use teda_core::oracle::teda_trajectory;
use teda_core::sim::{compare, run_realtime, simulate};
use teda_core::{derive_schedule, Error, Mode};

#[derive(Parser)]
#[command(
    name = "teda",
    version,
    about = "Temporal ensembling with dropped actions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one episode and write its trace and metrics.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        mode: Option<Mode>,
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        metrics: Option<PathBuf>,
        /// Run against the host clock with a predictor thread.
        #[arg(long)]
        realtime: bool,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run all three modes and report the deltas.
    Compare {
        #[arg(long)]
        config: PathBuf,
        /// Where to write the JSON report (stdout gets the table either way).
        #[arg(long, alias = "metrics")]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Convert float tensors to int16.
    Quantize {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Unify float tensors to NCHW first, reading their shape with this layout.
        #[arg(long)]
        layout: Option<Layout>,
    },
    /// Convert int16 tensors back to float.
    Dequantize {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print shape, dtype, scale, range and checksum of every tensor.
    Inspect {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Write the brute-force TEDA trajectory for cross-checking.
    Oracle {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, alias = "trace")]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Regenerate the reference network and evaluation data.
    Fixtures {
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_infeasible() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<RunConfig, Error> {
    let mut cfg = RunConfig::load(path)
        .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, Error> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_json<T: serde::Serialize>(path: Option<&Path>, value: &T) -> Result<(), Error> {
    let mut out = output(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Simulate {
            config,
            mode,
            trace,
            metrics,
            realtime,
            seed,
        } => {
            let cfg = load_config(&config, seed)?;
            let mode = mode.unwrap_or(cfg.mode);
            let host = cfg.policy_host()?;
            let sched = cfg.scheduler_config();
            let tm = cfg.timing()?;
            let (tr, m) = if realtime {
                run_realtime(&sched, &tm, mode, &host.policy, &*host.observations)?
            } else {
                simulate(&sched, &tm, mode, &host.policy, &*host.observations)?
            };

            let trace = trace.or_else(|| cfg.trace.as_ref().map(|p| cfg.resolve(p)));
            if let Some(p) = trace {
                let mut w = BufWriter::new(File::create(p)?);
                tr.write_csv(&mut w)?;
                w.flush()?;
            }
            let metrics = metrics.or_else(|| cfg.metrics.as_ref().map(|p| cfg.resolve(p)));
            write_json(metrics.as_deref(), &m)
        }
        Command::Compare { config, out, seed } => {
            let cfg = load_config(&config, seed)?;
            let host = cfg.policy_host()?;
            let report = compare(
                &cfg.scheduler_config(),
                &cfg.timing()?,
                &host.policy,
                &*host.observations,
            )?;
            print!("{}", report.table());
            if let Some(p) = out {
                write_json(Some(&p), &report)?;
            }
            Ok(())
        }
        Command::Quantize { input, out, layout } => {
            let file = ContainerFile::read(&input)?;
            let q = file.map(|t| match t {
                TensorPayload::Float(f) => {
                    let f = match layout {
                        Some(l) => unify(&f, l)?,
                        None => f,
                    };
                    Ok(TensorPayload::Quantized(quantize(&f)?))
                }
                already => Ok(already),
            })?;
            q.write(&out)
        }
        Command::Dequantize { input, out } => {
            let file = ContainerFile::read(&input)?;
            file.map(|t| Ok(TensorPayload::Float(t.to_float())))?
                .write(&out)
        }
        Command::Inspect { input } => {
            let bytes = std::fs::read(&input)?;
            let file = ContainerFile::from_bytes(&bytes)?;
            let mut out = io::stdout().lock();
            writeln!(
                out,
                "file {} sha256 {}",
                input.display(),
                hex(&Sha256::digest(&bytes))
            )?;
            for (name, t) in file.tensors() {
                let f = t.to_float();
                let (lo, hi) = f
                    .data()
                    .iter()
                    .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| {
                        (lo.min(v), hi.max(v))
                    });
                let payload = teda_core::compressor::container::to_bytes(t)?;
                writeln!(
                    out,
                    "{} shape {:?} dtype {} scale {:e} min {} max {} sha256 {}",
                    if name.is_empty() { "<tensor>" } else { name },
                    t.shape(),
                    t.dtype().name(),
                    t.scale(),
                    lo,
                    hi,
                    hex(&Sha256::digest(&payload))
                )?;
            }
            Ok(())
        }
        Command::Oracle { config, out, seed } => {
            let cfg = load_config(&config, seed)?;
            let host = cfg.policy_host()?;
            let sched = cfg.scheduler_config();
            let d = derive_schedule(&sched, &cfg.timing()?)?.drop_count;
            let o = teda_trajectory(&sched, d, &host.policy, &*host.observations)?;
            let mut w = output(out.as_deref())?;
            write!(w, "step,ensemble_size")?;
            for i in 0..sched.action_dim {
                write!(w, ",a{i}")?;
            }
            writeln!(w)?;
            for (i, (a, n)) in o.actions.iter().zip(&o.ensemble_sizes).enumerate() {
                write!(w, "{},{}", i + 1, n)?;
                for v in a.values() {
                    write!(w, ",{v}")?;
                }
                writeln!(w)?;
            }
            w.flush()?;
            Ok(())
        }
        Command::Fixtures { out } => teda_core::fixtures::write_fixture_files(&out),
    }
}

/// Reads the stored 4-d shape as the raw shape with leading unit axes
/// removed, then unifies it under `layout`.
fn unify(t: &Tensor, layout: Layout) -> Result<Tensor, Error> {
    let shape = t.shape();
    let first = shape.iter().position(|&d| d != 1).unwrap_or(3);
    unify_tensor(&shape[first..], layout, t.data())
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
