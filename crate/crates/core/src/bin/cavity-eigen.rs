use std::fs;
use std::io::BufReader;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use cavity_eigen::cavity::{self, RecoveryOptions};
use cavity_eigen::ensemble::CouplingLaw;
use cavity_eigen::experiment::{
    self, candidate_grid, ArtifactWriter, ExperimentConfig, SweepRecord,
};
use cavity_eigen::oracle;
use cavity_eigen::population::{self, Kernel};
use cavity_eigen::rng::{self, Domain};
use cavity_eigen::{Error, Result, SparseSymmetricInstance};

#[derive(Debug, Parser)]
#[command(name = "cavity-eigen", version, about = "First eigenvalue experiments on sparse random matrices")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the master seed of the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Overrides the convergence tolerance of the configuration.
    #[arg(long, global = true)]
    tol: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw one instance and write its edge list.
    Generate {
        /// Size; defaults to the first configured size.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Power iteration on one instance.
    Oracle(InstanceArgs),
    /// Cavity message passing on one instance.
    Cavity(InstanceArgs),
    /// Population dynamics: detect the eigenvalue, or run at a fixed lambda.
    Population {
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// Run the configured method over the grid and sizes.
    Sweep,
    /// Finite-size scaling collapse of sweep records.
    Collapse {
        /// Sweep records (JSON) from a previous run; runs the sweep if absent.
        #[arg(long)]
        records: Option<PathBuf>,
        /// Score a single critical point instead of scanning.
        #[arg(long)]
        delta_c: Option<f64>,
        #[arg(long, num_args = 3, value_names = ["LO", "HI", "STEP"], default_values_t = [0.40, 0.80, 0.01])]
        scan: Vec<f64>,
    },
    /// Pooled oracle histogram of eigenvector elements and its prediction.
    Histogram {
        #[arg(long)]
        delta: f64,
    },
    /// Cavity against oracle on random trees.
    TreeCheck {
        #[arg(long, default_value_t = 50)]
        n: usize,
        #[arg(long, default_value_t = 20)]
        replicates: usize,
    },
}

#[derive(Debug, Args)]
struct InstanceArgs {
    /// Edge list to load instead of generating one.
    #[arg(long)]
    instance: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
}

struct Context {
    config: Option<ExperimentConfig>,
    config_bytes: Vec<u8>,
    seed: u64,
    out: PathBuf,
}

impl Context {
    fn load(common: &Common) -> Result<Self> {
        let (config, config_bytes) = match &common.config {
            Some(path) => {
                let bytes = fs::read(path)?;
                let mut config = ExperimentConfig::from_json(std::str::from_utf8(&bytes).map_err(|e| {
                    Error::InvalidConfig(format!("{}: {e}", path.display()))
                })?)?;
                if let Some(seed) = common.seed {
                    config.seed = seed;
                }
                if common.tol.is_some() {
                    config.tol = common.tol;
                }
                (Some(config), bytes)
            }
            None => (None, Vec::new()),
        };
        let seed = common
            .seed
            .or(config.as_ref().map(|c| c.seed))
            .unwrap_or(0);
        let out = config
            .as_ref()
            .and_then(|c| c.output.clone())
            .filter(|_| common.out == PathBuf::from("out"))
            .unwrap_or_else(|| common.out.clone());
        Ok(Self {
            config,
            config_bytes,
            seed,
            out,
        })
    }

    fn config(&self) -> Result<&ExperimentConfig> {
        self.config
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig("this command needs --config".into()))
    }

    fn size(&self, n: Option<usize>) -> Result<usize> {
        n.or_else(|| self.config.as_ref()?.sizes.first().copied())
            .ok_or_else(|| Error::InvalidConfig("no size given (--n or sizes)".into()))
    }

    fn instance(&self, args: &InstanceArgs) -> Result<SparseSymmetricInstance> {
        match &args.instance {
            Some(path) => SparseSymmetricInstance::read_edge_list(BufReader::new(fs::File::open(path)?)),
            None => {
                let ensemble = self.config()?.ensemble.resolve()?;
                experiment::replicate_instance(&ensemble, self.size(args.n)?, self.seed)
            }
        }
    }
}

fn vector_csv(v: &[f64]) -> impl FnOnce(&mut Vec<u8>) -> Result<()> + '_ {
    move |buf| {
        use std::io::Write;
        writeln!(buf, "i,v")?;
        for (i, x) in v.iter().enumerate() {
            writeln!(buf, "{i},{x}")?;
        }
        Ok(())
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(threads) = cli.common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    }
    let ctx = Context::load(&cli.common)?;
    let mut w = ArtifactWriter::new(&ctx.out)?;
    let name = match &cli.command {
        Command::Generate { n } => {
            let ensemble = ctx.config()?.ensemble.resolve()?;
            let g = experiment::replicate_instance(&ensemble, ctx.size(*n)?, ctx.seed)?;
            w.write_with("instance.txt", |buf| g.write_edge_list(buf))?;
            "generate"
        }
        Command::Oracle(args) => {
            let g = ctx.instance(args)?;
            let opts = ctx.config.as_ref().map(|c| c.power_options()).unwrap_or_default();
            let opts = oracle::PowerIterationOptions {
                tol: cli.common.tol.unwrap_or(opts.tol),
                ..opts
            };
            let s = oracle::power_iterate(&g, &opts, ctx.seed)?;
            w.write_json("oracle.json", &s.record())?;
            w.write_with("eigenvector.csv", vector_csv(&s.v))?;
            println!("lambda {} M {} iterations {}", s.lambda, s.m_statistic, s.iterations);
            "oracle"
        }
        Command::Cavity(args) => {
            let g = ctx.instance(args)?;
            let mut bisection = ctx.config.as_ref().map(|c| c.bisection_options()).unwrap_or_default();
            if let Some(tol) = cli.common.tol {
                bisection.tol = tol;
            }
            let s = cavity::solve(&g, &bisection, &RecoveryOptions::default(), ctx.seed)?;
            let messages = match cavity::positive_fixed_point(&g, s.eigenvector.lambda, bisection.message_tol, bisection.max_sweeps) {
                cavity::FixedPoint::ConvergedPositive { messages, .. } => messages,
                _ => cavity::MessageSet::initial(&g, s.eigenvector.lambda),
            };
            w.write_json(
                "cavity.json",
                &json!({
                    "lambda": s.lambda,
                    "lo": s.threshold.lo,
                    "hi": s.threshold.hi,
                    "operating_lambda": s.eigenvector.lambda,
                    "exact": s.eigenvector.exact,
                    "m": oracle::m_statistic(&s.eigenvector.v),
                }),
            )?;
            w.write_with("messages.csv", |buf| messages.write_csv(&g, buf))?;
            w.write_with("eigenvector.csv", vector_csv(&s.eigenvector.v))?;
            println!("lambda {} exact {}", s.lambda, s.eigenvector.exact);
            "cavity"
        }
        Command::Population { lambda } => {
            let config = ctx.config()?;
            let ensemble = config.ensemble.resolve()?;
            let mut opts = config.population.clone();
            opts.seed = rng::derive_seed(ctx.seed, &[Domain::Population as u64]);
            let at = match lambda {
                Some(l) => *l,
                None => {
                    let d = population::detect_eigenvalue(&ensemble, &opts)?;
                    println!("lambda {} mode {:?} bracket [{}, {}]", d.lambda, d.mode, d.lo, d.hi);
                    w.write_json("detection.json", &d)?;
                    d.hi
                }
            };
            let (probe, pop) = population::probe(&Kernel::for_ensemble(&ensemble)?, at, &opts)?;
            w.write_json("probe.json", &probe)?;
            w.write_with("population.csv", |buf| pop.write_snapshot(buf))?;
            w.write_with("rates.csv", |buf| pop.write_rate_trace(buf))?;
            let pairs = population::full_distribution(
                &pop,
                &ensemble.degrees,
                &ensemble.coupling,
                rng::derive_seed(opts.seed, &[Domain::FullDistribution as u64]),
                opts.pop_size,
            )?;
            match population::eigenvector_density(&pairs, 1.0, config.binning) {
                Ok(d) => {
                    w.write_with("density.csv", |buf| d.histogram.write_csv(buf))?;
                }
                Err(Error::TrivialField) => eprintln!("H population vanished; no density written"),
                Err(e) => return Err(e),
            }
            println!(
                "lambda {} h_rate {} m1_rate {} frac_negative_A {}",
                at, probe.h_rate, probe.m1_rate, probe.frac_negative_a
            );
            "population"
        }
        Command::Sweep => {
            let records = experiment::run_sweep(ctx.config()?)?;
            w.write_with("sweep.csv", |buf| experiment::write_records_csv(&records, buf))?;
            w.write_json("sweep.json", &records)?;
            "sweep"
        }
        Command::Collapse { records, delta_c, scan } => {
            let records: Vec<SweepRecord> = match records {
                Some(path) => serde_json::from_slice(&fs::read(path)?)?,
                None => experiment::run_sweep(ctx.config()?)?,
            };
            let report = match delta_c {
                Some(c) => json!({ "collapse": experiment::scaling_collapse(&records, *c)? }),
                None => {
                    let s = experiment::scan_critical_point(&records, &candidate_grid(scan[0], scan[1], scan[2]))?;
                    let best = s.best.map(|c| experiment::scaling_collapse(&records, c)).transpose()?;
                    println!("best delta_c {:?}", s.best);
                    json!({ "scan": s, "collapse": best })
                }
            };
            if let Some(points) = report["collapse"]["points"].as_array() {
                w.write_with("collapse.csv", |buf| {
                    use std::io::Write;
                    writeln!(buf, "n,delta,x,y")?;
                    for p in points {
                        writeln!(buf, "{},{},{},{}", p["n"], p["delta"], p["x"], p["y"])?;
                    }
                    Ok(())
                })?;
            }
            w.write_json("collapse.json", &report)?;
            "collapse"
        }
        Command::Histogram { delta } => {
            let report = experiment::histogram_report(ctx.config()?, *delta)?;
            w.write_with("experiment.csv", |buf| report.experiment.write_csv(buf))?;
            if let Some(p) = &report.prediction {
                w.write_with("prediction.csv", |buf| p.write_csv(buf))?;
            }
            w.write_json(
                "histogram.json",
                &json!({
                    "delta": report.delta,
                    "n": report.n,
                    "l1": report.l1,
                    "sign_convention": report.sign_convention,
                    "failures": report.failures,
                    "flag": report.flag,
                    "detection": report.detection,
                }),
            )?;
            match report.l1 {
                Some(l1) => println!("L1 {l1}"),
                None => println!("no prediction: {}", report.flag.as_deref().unwrap_or("")),
            }
            "histogram"
        }
        Command::TreeCheck { n, replicates } => {
            let law = match &ctx.config {
                Some(c) => c.ensemble.resolve()?.coupling,
                None => CouplingLaw::binary(0.5, 1.0)?,
            };
            let report = experiment::validate_tree_exactness(*n, *replicates, &law, ctx.seed)?;
            w.write_with("tree_check.csv", |buf| {
                use std::io::Write;
                writeln!(buf, "replicate,seed,attempts,lambda_oracle,lambda_cavity,abs_error,cosine")?;
                for r in &report.rows {
                    writeln!(
                        buf,
                        "{},{},{},{},{},{},{}",
                        r.replicate, r.seed, r.attempts, r.lambda_oracle, r.lambda_cavity, r.abs_error, r.cosine
                    )?;
                }
                Ok(())
            })?;
            w.write_json("tree_check.json", &report)?;
            println!("max |dLambda| {} min cosine {}", report.max_error, report.min_cosine);
            "tree-check"
        }
    };
    w.finish(&ctx.config_bytes, ctx.seed, name)?;
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
