mod format;
mod report;
mod runner;

use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use quadsub::instance::{random_diversity_instance, validate_instance, BaseKind};
use quadsub::sketch::EnsembleParams;
use quadsub::Instance;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use format::InstanceFile;
use report::{Report, Row};
use runner::{Algo, Backend, Settings};

#[derive(Parser)]
#[command(name = "quadsub-bench", version, about = "Generate, solve and audit quadratic-form diversity instances")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a random instance file.
    Gen {
        #[command(flatten)]
        shape: Shape,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one algorithm on an instance and emit CSV.
    Run {
        #[command(flatten)]
        source: Source,
        #[arg(long, value_enum, default_value = "naive")]
        algo: Algo,
        #[command(flatten)]
        params: Params,
    },
    /// Check monotonicity, submodularity and norm bounds of an instance.
    Audit {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
    },
    /// Run several algorithms over a grid of generated instances.
    Sweep {
        #[arg(long, value_delimiter = ',', default_value = "100,1000")]
        ns: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "4,8")]
        ds: Vec<usize>,
        #[arg(long, value_enum, value_delimiter = ',', default_value = "naive,batch")]
        algos: Vec<Algo>,
        #[arg(long, default_value_t = 0.5)]
        lambda_scale: f64,
        #[arg(long, value_enum, default_value = "identity")]
        base: Base,
        #[command(flatten)]
        params: Params,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Base {
    Identity,
    Diag,
}

#[derive(Args, Debug, Clone)]
struct Shape {
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 8)]
    d: usize,
    /// Norm bound `D` on every vector.
    #[arg(long, default_value_t = 1.0)]
    norm_bound: f64,
    /// Fraction of the largest `λ` that keeps the instance monotone.
    #[arg(long, default_value_t = 0.5)]
    lambda_scale: f64,
    #[arg(long, value_enum, default_value = "identity")]
    base: Base,
    #[arg(long = "instance-seed", default_value_t = 0)]
    instance_seed: u64,
}

/// Either an instance file or generation flags.
#[derive(Args, Debug, Clone)]
struct Source {
    #[arg(long, conflicts_with_all = ["n", "d", "norm_bound", "lambda_scale", "base", "instance_seed"])]
    input: Option<PathBuf>,
    #[command(flatten)]
    shape: Shape,
}

#[derive(Args, Debug, Clone)]
struct Params {
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// LSH approximation factor.
    #[arg(long, default_value_t = 0.9)]
    c: f64,
    /// LSH inner-product threshold.
    #[arg(long, default_value_t = 0.8)]
    tau: f64,
    /// Search backend inside matroid, knapsack and online runs.
    #[arg(long, value_enum)]
    backend: Option<Backend>,
    /// Partition blocks for `matroid` (capacity one each); defaults to k.
    #[arg(long)]
    blocks: Option<usize>,
    /// Knapsack budget; weights are drawn from `--seed`.
    #[arg(long, default_value_t = 2.0)]
    budget: f64,
    /// Noise level of the random adversary in `online`.
    #[arg(long, default_value_t = 0.1)]
    sigma: f64,
    /// Override the sketch ensemble as `L,r,m`.
    #[arg(long, value_delimiter = ',')]
    ensemble: Option<Vec<usize>>,
    /// Sketch storage limit in MiB.
    #[arg(long)]
    memory_limit_mib: Option<u64>,
}

impl Params {
    fn settings(&self) -> Result<Settings> {
        let ensemble = match self.ensemble.as_deref() {
            Some(&[l, r, m]) => Some(EnsembleParams::custom(l, r, m)?),
            Some(other) => bail!("--ensemble takes L,r,m; got {} values", other.len()),
            None => None,
        };
        Ok(Settings {
            k: self.k,
            eps: self.eps,
            delta: self.delta,
            c: self.c,
            tau: self.tau,
            backend: self.backend,
            blocks: self.blocks,
            budget: self.budget,
            sigma: self.sigma,
            ensemble,
            memory_limit: self.memory_limit_mib.map(|m| u128::from(m) << 20),
        })
    }
}

fn generate(shape: &Shape) -> Result<InstanceFile> {
    let mut rng = ChaCha8Rng::seed_from_u64(shape.instance_seed);
    let base = match shape.base {
        Base::Identity => BaseKind::Identity,
        Base::Diag => BaseKind::RandomDiagonal,
    };
    let (vectors, family) =
        random_diversity_instance(shape.n, shape.d, shape.norm_bound, shape.lambda_scale, base, &mut rng)?;
    Ok(InstanceFile { vectors, family })
}

fn load(source: &Source) -> Result<InstanceFile> {
    match &source.input {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            format::parse(&text).with_context(|| format!("parsing {}", path.display()))
        }
        None => generate(&source.shape),
    }
}

fn sink(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(io::stdout().lock()),
    })
}

fn ms(d: std::time::Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

fn measure(inst: &Instance, algo: Algo, p: &Params, s: &Settings) -> Result<Vec<Row>> {
    let opt = runner::optimum(inst, algo, s, p.seed)?;
    (0..p.repeats.max(1) as u64)
        .map(|r| {
            let seed = p.seed.wrapping_add(r);
            let run = runner::run_once(inst, algo, s, p.seed, seed)?;
            let mut steps = run.timings.clone();
            steps.sort();
            Ok(Row {
                seed,
                algo: algo.name(),
                n: inst.n(),
                d: inst.d(),
                k: s.k,
                eps: s.eps,
                delta: s.delta,
                f: run.value,
                opt,
                step_ms: steps.get(steps.len() / 2).map_or(0.0, |&t| ms(t)),
                total_ms: ms(run.total_time()),
                chain_len: run.chain.len(),
                fallbacks: run.stats.fallbacks,
                deletes: run.stats.deletes,
                queries: run.stats.queries,
            })
        })
        .collect()
}

enum Outcome {
    Done,
    AuditFailed,
}

fn execute(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Gen { shape, out } => {
            let text = format::write(&generate(&shape)?);
            sink(&out)?.write_all(text.as_bytes())?;
        }
        Command::Run { source, algo, params } => {
            let inst = load(&source)?.instance()?;
            let settings = params.settings()?;
            let rows = measure(&inst, algo, &params, &settings)?;
            let mut report = Report::new(sink(&params.out)?)?;
            report.group(&rows)?;
            report.finish()?;
        }
        Command::Audit { source, samples } => {
            let file = load(&source)?;
            let gv = &file.vectors;
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            let rep = validate_instance(gv, &file.family, samples, &mut rng);
            println!("n={} d={} bound={} max_norm={}", gv.n(), gv.d(), gv.norm_bound(), gv.max_norm());
            println!(
                "samples={} monotonicity={} submodularity={} psd={} frobenius={} worst_gain={}",
                rep.samples,
                rep.monotonicity_violations,
                rep.submodularity_violations,
                rep.psd_violations,
                rep.frobenius_violations,
                rep.worst_gain
            );
            if !rep.is_clean() {
                println!("audit FAILED");
                return Ok(Outcome::AuditFailed);
            }
            println!("audit ok");
        }
        Command::Sweep {
            ns,
            ds,
            algos,
            lambda_scale,
            base,
            params,
        } => {
            let settings = params.settings()?;
            let mut report = Report::new(sink(&params.out)?)?;
            for &n in &ns {
                for &d in &ds {
                    let shape = Shape {
                        n,
                        d,
                        norm_bound: 1.0,
                        lambda_scale,
                        base,
                        instance_seed: params.seed,
                    };
                    let inst = generate(&shape)?.instance()?;
                    let s = Settings {
                        k: settings.k.min(n),
                        ..settings.clone()
                    };
                    for &algo in &algos {
                        report.group(&measure(&inst, algo, &params, &s)?)?;
                    }
                }
            }
            report.finish()?;
        }
    }
    Ok(Outcome::Done)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::AuditFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
