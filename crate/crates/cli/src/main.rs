//! `ratebench`: train, sweep and compare rating predictors from the shell.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical
//! divergence.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use ratebench_core::data::{write_predictions_csv, write_ratings_csv};
use ratebench_core::harness::{
    compare_methods, format_table, parse_sweep, run_on, write_results_csv, CvMode, DataSource, ExperimentConfig,
    Method, MethodParams,
};
use ratebench_core::imf::sweep_rank_iterations;
use ratebench_core::integrated::{self, write_params, NeighborInit};
use ratebench_core::synthetic::{generate, SyntheticSpec};
use ratebench_core::{predict_all, Error, Metric, RatingDataset, RatingScale};

#[derive(Parser)]
#[command(name = "ratebench", version, about = "Rating prediction benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// User-based collaborative filtering.
    Ubcf {
        #[command(flatten)]
        run: RunArgs,
        /// Similarity metric: pearson or cosine.
        #[arg(long)]
        metric: Option<Metric>,
        /// Neighbors per prediction.
        #[arg(long)]
        neighbors: Option<usize>,
        /// Shrinkage constant applied to similarities (off by default).
        #[arg(long)]
        shrink: Option<f64>,
    },
    /// Iterative low-rank completion by truncated SVD.
    Imf {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        rank: Option<usize>,
        #[arg(long)]
        iterations: Option<usize>,
        /// Write `rank,iteration,rmse` for every iteration of the first fold.
        #[arg(long, value_name = "PATH")]
        curve: Option<PathBuf>,
    },
    /// Integrated neighborhood + latent-factor model.
    Integrated {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        hyper: IntegratedArgs,
        /// Write the parameters trained on the first fold.
        #[arg(long, value_name = "PATH")]
        dump: Option<PathBuf>,
    },
    /// All three methods at their defaults on one shared split.
    Compare {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the rows as results CSV.
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
        #[arg(long)]
        no_clamp: bool,
    },
    /// Write a synthetic ratings CSV.
    Generate {
        /// e.g. `users=500,items=100,rank=3,noise=0.3,density=0.2,seed=1`
        #[arg(long, value_name = "SPEC")]
        synthetic: String,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false, id = "source")]
struct Source {
    /// Ratings CSV with header `user_id,item_id,rating`.
    #[arg(long, value_name = "PATH")]
    data: Option<PathBuf>,
    /// Synthetic dataset spec, e.g. `users=500,items=100,rank=3,noise=0.3,density=0.2,seed=1`.
    #[arg(long, value_name = "SPEC")]
    synthetic: Option<String>,
}

#[derive(Args)]
struct DataArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long, default_value_t = 1.0)]
    min_rating: f64,
    #[arg(long, default_value_t = 5.0)]
    max_rating: f64,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Training fraction of each split.
    #[arg(long, default_value_t = 0.9)]
    split: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Results CSV (stdout when omitted).
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Sweep axis `name=v1,v2,...`; repeat for a grid, first is outermost.
    #[arg(long, value_name = "AXIS")]
    sweep: Vec<String>,
    #[arg(long, default_value_t = 1)]
    folds: usize,
    /// Disjoint k-fold validation instead of independent resplits.
    #[arg(long)]
    kfold: bool,
    /// Score raw predictions instead of clamping them to the scale.
    #[arg(long)]
    no_clamp: bool,
    /// Record wall-clock milliseconds per row (breaks byte-reproducibility).
    #[arg(long)]
    timing: bool,
    /// Write validation predictions of the first fold.
    #[arg(long, value_name = "PATH")]
    predictions: Option<PathBuf>,
}

#[derive(Args)]
struct IntegratedArgs {
    /// Item neighbors per item.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    factors: Option<usize>,
    #[arg(long)]
    lambda1: Option<f64>,
    #[arg(long)]
    lambda2: Option<f64>,
    #[arg(long)]
    lambda3: Option<f64>,
    #[arg(long)]
    lambda4: Option<f64>,
    #[arg(long)]
    gamma1: Option<f64>,
    #[arg(long)]
    gamma2: Option<f64>,
    #[arg(long)]
    gamma3: Option<f64>,
    /// Per-epoch learning-rate multiplier.
    #[arg(long)]
    decay: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Starting neighborhood weights: similarity or zero.
    #[arg(long)]
    init: Option<String>,
}

impl DataArgs {
    fn source(&self) -> Result<DataSource<f64>, Error> {
        match (&self.source.data, &self.source.synthetic) {
            (Some(p), _) => Ok(DataSource::Path(p.clone())),
            (None, Some(s)) => Ok(DataSource::Synthetic(s.parse()?)),
            (None, None) => Err(Error::InvalidParameter("one of --data or --synthetic is required".into())),
        }
    }

    fn scale(&self) -> Result<RatingScale<f64>, Error> {
        RatingScale::new(self.min_rating, self.max_rating)
    }
}

fn output(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|source| Error::Io {
                path: p.to_path_buf(),
                source,
            })?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn create(path: &Path) -> Result<BufWriter<File>, Error> {
    File::create(path).map(BufWriter::new).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn flush(mut w: impl Write, path: &Path) -> Result<(), Error> {
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn experiment(run: &RunArgs, params: MethodParams<f64>) -> anyhow::Result<ExperimentConfig<f64>> {
    let mut config = ExperimentConfig::new(params.method(), run.data.source()?);
    config.params = params;
    config.scale = run.data.scale()?;
    config.fraction = run.split;
    config.seed = run.seed;
    config.folds = run.folds;
    config.cv = if run.kfold { CvMode::KFold } else { CvMode::Subsample };
    config.clamp = !run.no_clamp;
    config.timing = run.timing;
    config.sweep = run.sweep.iter().map(|s| parse_sweep(s)).collect::<Result<_, _>>()?;
    config.validate()?;
    Ok(config)
}

/// Runs the configured grid and writes results, plus first-fold
/// predictions when asked.
fn run_experiment(run: &RunArgs, config: &ExperimentConfig<f64>) -> anyhow::Result<RatingDataset<f64>> {
    let dataset = config.data.load(config.scale).context("loading ratings")?;
    let rows = run_on(config, &dataset)?;
    let mut out = output(run.out.as_deref())?;
    write_results_csv(&rows, Some(&config.header_comment()), &mut out)?;
    out.flush().context("writing results")?;

    if let Some(path) = &run.predictions {
        let s = &config.splits(&dataset)?[0];
        let model = config.params.fit(&s.train, s.seed)?;
        let (preds, _) = predict_all(model.as_ref(), &s.validation, config.clamp);
        let triples: Vec<_> = s
            .validation
            .ratings()
            .iter()
            .zip(preds)
            .map(|(r, p)| (r.user, r.item, p))
            .collect();
        let mut w = create(path)?;
        write_predictions_csv(&s.validation, &triples, &mut w)?;
        flush(w, path)?;
    }
    Ok(dataset)
}

fn integrated_params(h: &IntegratedArgs) -> anyhow::Result<MethodParams<f64>> {
    let mut params = MethodParams::<f64>::defaults(Method::Integrated);
    if let MethodParams::Integrated(hp) = &mut params {
        macro_rules! apply {
            ($($field:ident => $target:ident),* $(,)?) => {
                $(if let Some(v) = h.$field { hp.$target = v; })*
            };
        }
        apply!(
            k => k,
            factors => factors,
            lambda1 => lambda1,
            lambda2 => lambda2,
            lambda3 => lambda3,
            lambda4 => lambda4,
            gamma1 => gamma1,
            gamma2 => gamma2,
            gamma3 => gamma3,
            decay => gamma_decay,
            epochs => epochs,
        );
        if let Some(init) = &h.init {
            hp.neighbor_init = match init.as_str() {
                "similarity" => NeighborInit::Similarity,
                "zero" => NeighborInit::Zero,
                other => {
                    return Err(Error::InvalidParameter(format!(
                        "unknown --init `{other}` (expected similarity or zero)"
                    ))
                    .into())
                }
            };
        }
    }
    Ok(params)
}

fn execute(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Ubcf {
            run,
            metric,
            neighbors,
            shrink,
        } => {
            let mut params = MethodParams::<f64>::defaults(Method::Ubcf);
            if let MethodParams::Ubcf(c) = &mut params {
                if let Some(m) = metric {
                    c.metric = m;
                }
                if let Some(k) = neighbors {
                    c.k = k;
                }
                c.shrink = shrink.or(c.shrink);
            }
            let config = experiment(&run, params)?;
            run_experiment(&run, &config)?;
        }
        Command::Imf {
            run,
            rank,
            iterations,
            curve,
        } => {
            let mut params = MethodParams::<f64>::defaults(Method::Imf);
            if let MethodParams::Imf(c) = &mut params {
                if let Some(r) = rank {
                    c.rank = r;
                }
                if let Some(n) = iterations {
                    c.iterations = n;
                }
            }
            let config = experiment(&run, params)?;
            let dataset = run_experiment(&run, &config)?;
            if let Some(path) = curve {
                let cells = config.cells()?;
                let ranks: Vec<usize> = cells
                    .iter()
                    .filter_map(|c| match c {
                        MethodParams::Imf(c) => Some(c.rank),
                        _ => None,
                    })
                    .fold(Vec::new(), |mut acc, r| {
                        if !acc.contains(&r) {
                            acc.push(r);
                        }
                        acc
                    });
                let iterations = cells
                    .iter()
                    .filter_map(|c| match c {
                        MethodParams::Imf(c) => Some(c.iterations),
                        _ => None,
                    })
                    .max()
                    .unwrap_or(0);
                let s = &config.splits(&dataset)?[0];
                let rows = sweep_rank_iterations(&s.train, &s.validation, &ranks, iterations, config.clamp)?;
                let mut w = create(&path)?;
                writeln!(w, "rank,iteration,rmse").context("writing curve")?;
                for r in rows {
                    writeln!(w, "{},{},{}", r.rank, r.iteration, r.report.rmse).context("writing curve")?;
                }
                flush(w, &path)?;
            }
        }
        Command::Integrated { run, hyper, dump } => {
            let params = integrated_params(&hyper)?;
            let config = experiment(&run, params)?;
            let dataset = run_experiment(&run, &config)?;
            if let (Some(path), MethodParams::Integrated(hp)) = (dump, &config.params) {
                let s = &config.splits(&dataset)?[0];
                let model = integrated::train(&s.train, hp, s.seed)?;
                let mut w = create(&path)?;
                write_params(&model, &mut w)?;
                flush(w, &path)?;
            }
        }
        Command::Compare {
            data,
            seed,
            out,
            no_clamp,
        } => {
            let dataset = data.source()?.load(data.scale()?).context("loading ratings")?;
            let rows = compare_methods(&dataset, seed, !no_clamp)?;
            print!("{}", format_table(&rows));
            if let Some(path) = out {
                let comment = format!("# compare fraction=0.9 seed={seed} clamp={}", !no_clamp);
                let mut w = create(&path)?;
                write_results_csv(&rows, Some(&comment), &mut w)?;
                flush(w, &path)?;
            }
        }
        Command::Generate { synthetic, out } => {
            let spec: SyntheticSpec<f64> = synthetic.parse()?;
            let data = generate(&spec)?;
            let mut w = output(out.as_deref())?;
            write_ratings_csv(&data.dataset, &mut w)?;
            w.flush().context("writing ratings")?;
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.chain().find_map(|e| e.downcast_ref::<Error>()) {
        Some(e) if e.is_divergence() => 3,
        Some(e) if e.is_usage() => 1,
        _ => 2,
    }
}

/// Context chain down to the first library error, whose message already
/// embeds its own causes.
fn describe(err: &anyhow::Error) -> String {
    let mut parts = Vec::new();
    for cause in err.chain() {
        parts.push(cause.to_string());
        if cause.downcast_ref::<Error>().is_some() {
            break;
        }
    }
    parts.join(": ")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}
