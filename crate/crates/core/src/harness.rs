//! Experiment configuration, sweeps, cross-validation and CSV results.

use std::fmt;
use std::io::{Read, Write};
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use crate::data::{kfold, load_csv, split, RatingDataset, RatingScale, TrainValSplit};
use crate::error::{Error, Result};
use crate::imf::{ImfConfig, LowRankState};
use crate::integrated::{self, HyperParams, NeighborInit};
use crate::scalar::Scalar;
use crate::synthetic::{generate, SyntheticSpec};
use crate::ubcf::{UbcfConfig, UbcfModel};
use crate::{evaluate, Predictor};

pub const RESULTS_HEADER: [&str; 5] = ["method", "params", "fold", "rmse", "wall_time_ms"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    Ubcf,
    Imf,
    Integrated,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Ubcf => "ubcf",
            Method::Imf => "imf",
            Method::Integrated => "integrated",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ubcf" => Ok(Method::Ubcf),
            "imf" => Ok(Method::Imf),
            "integrated" => Ok(Method::Integrated),
            _ => Err(Error::InvalidParameter(format!("unknown method `{s}`"))),
        }
    }
}

/// Hyperparameters of one method.
#[derive(Clone, Debug, PartialEq)]
pub enum MethodParams<T> {
    Ubcf(UbcfConfig<T>),
    Imf(ImfConfig),
    Integrated(HyperParams<T>),
}

fn parse_value<V: FromStr>(key: &str, value: &str) -> Result<V> {
    value
        .parse()
        .map_err(|_| Error::InvalidParameter(format!("invalid value `{value}` for `{key}`")))
}

impl<T: Scalar> MethodParams<T> {
    pub fn defaults(method: Method) -> Self {
        match method {
            Method::Ubcf => MethodParams::Ubcf(UbcfConfig::default()),
            Method::Imf => MethodParams::Imf(ImfConfig::default()),
            Method::Integrated => MethodParams::Integrated(HyperParams::default()),
        }
    }

    pub fn method(&self) -> Method {
        match self {
            MethodParams::Ubcf(_) => Method::Ubcf,
            MethodParams::Imf(_) => Method::Imf,
            MethodParams::Integrated(_) => Method::Integrated,
        }
    }

    /// Parameter names accepted by [`MethodParams::set`].
    pub fn keys(method: Method) -> &'static [&'static str] {
        match method {
            Method::Ubcf => &["metric", "neighbors", "shrink"],
            Method::Imf => &["rank", "iterations"],
            Method::Integrated => &[
                "k", "factors", "lambda1", "lambda2", "lambda3", "lambda4", "gamma1", "gamma2", "gamma3", "decay",
                "epochs", "init",
            ],
        }
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match self {
            MethodParams::Ubcf(c) => match key {
                "metric" => c.metric = value.parse()?,
                "neighbors" | "k" => c.k = parse_value(key, value)?,
                "shrink" => c.shrink = if value == "none" { None } else { Some(parse_value(key, value)?) },
                _ => return Err(unknown_key(Method::Ubcf, key)),
            },
            MethodParams::Imf(c) => match key {
                "rank" => c.rank = parse_value(key, value)?,
                "iterations" => c.iterations = parse_value(key, value)?,
                _ => return Err(unknown_key(Method::Imf, key)),
            },
            MethodParams::Integrated(h) => match key {
                "k" => h.k = parse_value(key, value)?,
                "factors" => h.factors = parse_value(key, value)?,
                "lambda1" => h.lambda1 = parse_value(key, value)?,
                "lambda2" => h.lambda2 = parse_value(key, value)?,
                "lambda3" => h.lambda3 = parse_value(key, value)?,
                "lambda4" => h.lambda4 = parse_value(key, value)?,
                "gamma1" => h.gamma1 = parse_value(key, value)?,
                "gamma2" => h.gamma2 = parse_value(key, value)?,
                "gamma3" => h.gamma3 = parse_value(key, value)?,
                "decay" => h.gamma_decay = parse_value(key, value)?,
                "epochs" => h.epochs = parse_value(key, value)?,
                "init" => {
                    h.neighbor_init = match value {
                        "similarity" => NeighborInit::Similarity,
                        "zero" => NeighborInit::Zero,
                        _ => return Err(Error::InvalidParameter(format!("unknown init `{value}`"))),
                    }
                }
                _ => return Err(unknown_key(Method::Integrated, key)),
            },
        }
        Ok(())
    }

    /// `key=value;key=value` in a fixed per-method order.
    pub fn canonical(&self) -> String {
        match self {
            MethodParams::Ubcf(c) => {
                let mut s = format!("metric={};neighbors={}", c.metric, c.k);
                if let Some(l) = c.shrink {
                    s.push_str(&format!(";shrink={l}"));
                }
                s
            }
            MethodParams::Imf(c) => format!("rank={};iterations={}", c.rank, c.iterations),
            MethodParams::Integrated(h) => format!(
                "k={};factors={};lambda1={};lambda2={};lambda3={};lambda4={};gamma1={};gamma2={};gamma3={};decay={};epochs={};init={}",
                h.k,
                h.factors,
                h.lambda1,
                h.lambda2,
                h.lambda3,
                h.lambda4,
                h.gamma1,
                h.gamma2,
                h.gamma3,
                h.gamma_decay,
                h.epochs,
                match h.neighbor_init {
                    NeighborInit::Similarity => "similarity",
                    NeighborInit::Zero => "zero",
                }
            ),
        }
    }

    /// Trains on `train`; `seed` drives the integrated model's SGD order.
    pub fn fit(&self, train: &RatingDataset<T>, seed: u64) -> Result<Box<dyn Predictor<T> + Send + Sync>> {
        Ok(match self {
            MethodParams::Ubcf(c) => Box::new(UbcfModel::fit(train, *c)?),
            MethodParams::Imf(c) => Box::new(LowRankState::fit(train, *c)?),
            MethodParams::Integrated(h) => Box::new(integrated::train(train, h, seed)?),
        })
    }
}

fn unknown_key(method: Method, key: &str) -> Error {
    Error::InvalidParameter(format!(
        "`{key}` is not a {method} parameter (expected one of {})",
        MethodParams::<f64>::keys(method).join(", ")
    ))
}

#[derive(Clone, Debug, PartialEq)]
pub enum DataSource<T> {
    Path(PathBuf),
    Synthetic(SyntheticSpec<T>),
}

impl<T: Scalar> DataSource<T> {
    pub fn load(&self, scale: RatingScale<T>) -> Result<RatingDataset<T>> {
        match self {
            DataSource::Path(p) => load_csv(p, scale),
            DataSource::Synthetic(spec) => Ok(generate(spec)?.dataset),
        }
    }
}

/// How validation folds are drawn.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CvMode {
    /// Independent random splits with seeds `seed + fold`.
    Subsample,
    /// One permutation under `seed`, cut into `folds` disjoint chunks.
    KFold,
}

impl CvMode {
    pub fn name(self) -> &'static str {
        match self {
            CvMode::Subsample => "subsample",
            CvMode::KFold => "kfold",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig<T> {
    pub params: MethodParams<T>,
    pub data: DataSource<T>,
    pub scale: RatingScale<T>,
    pub fraction: f64,
    pub seed: u64,
    /// Swept parameters in nesting order (first is outermost).
    pub sweep: Vec<(String, Vec<String>)>,
    pub folds: usize,
    pub cv: CvMode,
    pub clamp: bool,
    /// Record wall-clock time per row; off keeps output byte-reproducible.
    pub timing: bool,
}

impl<T: Scalar> ExperimentConfig<T> {
    pub fn new(method: Method, data: DataSource<T>) -> Self {
        ExperimentConfig {
            params: MethodParams::defaults(method),
            data,
            scale: RatingScale::stars(),
            fraction: 0.9,
            seed: 0,
            sweep: Vec::new(),
            folds: 1,
            cv: CvMode::Subsample,
            clamp: true,
            timing: false,
        }
    }

    pub fn method(&self) -> Method {
        self.params.method()
    }

    pub fn validate(&self) -> Result<()> {
        if self.folds == 0 {
            return Err(Error::InvalidParameter("folds must be >= 1".into()));
        }
        if self.cv == CvMode::KFold && self.folds < 2 {
            return Err(Error::InvalidParameter("k-fold mode needs folds >= 2".into()));
        }
        if !(self.fraction > 0.0 && self.fraction < 1.0) {
            return Err(Error::InvalidFraction(self.fraction));
        }
        let keys = MethodParams::<T>::keys(self.method());
        for (key, values) in &self.sweep {
            if !keys.contains(&key.as_str()) {
                return Err(unknown_key(self.method(), key));
            }
            if values.is_empty() {
                return Err(Error::InvalidParameter(format!("sweep axis `{key}` has no values")));
            }
        }
        self.cells().map(|_| ())
    }

    /// Parameter sets for every sweep cell, first axis outermost.
    pub fn cells(&self) -> Result<Vec<MethodParams<T>>> {
        let mut cells = vec![self.params.clone()];
        for (key, values) in &self.sweep {
            let mut next = Vec::with_capacity(cells.len() * values.len());
            for cell in &cells {
                for v in values {
                    let mut c = cell.clone();
                    c.set(key, v)?;
                    next.push(c);
                }
            }
            cells = next;
        }
        Ok(cells)
    }

    /// Comment line written above the CSV header.
    pub fn header_comment(&self) -> String {
        format!(
            "# cv={} folds={} fraction={} seed={} clamp={}",
            self.cv.name(),
            self.folds,
            self.fraction,
            self.seed,
            self.clamp
        )
    }

    pub fn splits(&self, dataset: &RatingDataset<T>) -> Result<Vec<TrainValSplit<T>>> {
        match self.cv {
            CvMode::Subsample => (0..self.folds)
                .map(|f| split(dataset, self.fraction, self.seed.wrapping_add(f as u64)))
                .collect(),
            CvMode::KFold => kfold(dataset, self.folds, self.seed),
        }
    }
}

/// Parses `name=v1,v2,...`.
pub fn parse_sweep(s: &str) -> Result<(String, Vec<String>)> {
    let (key, values) = s
        .split_once('=')
        .ok_or_else(|| Error::InvalidParameter(format!("sweep `{s}` is not name=v1,v2,...")))?;
    let values: Vec<String> = values
        .split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(String::from)
        .collect();
    if values.is_empty() {
        return Err(Error::InvalidParameter(format!("sweep `{s}` has no values")));
    }
    Ok((key.trim().to_string(), values))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow<T> {
    pub method: Method,
    pub params: String,
    pub fold: usize,
    pub rmse: T,
    pub wall_time_ms: u128,
}

/// Loads the configured data and runs every sweep cell on every fold.
pub fn run<T: Scalar>(config: &ExperimentConfig<T>) -> Result<Vec<ResultRow<T>>> {
    config.validate()?;
    let dataset = config.data.load(config.scale)?;
    run_on(config, &dataset)
}

/// Rows are ordered by cell, then fold.
pub fn run_on<T: Scalar>(config: &ExperimentConfig<T>, dataset: &RatingDataset<T>) -> Result<Vec<ResultRow<T>>> {
    config.validate()?;
    let splits = config.splits(dataset)?;
    let mut rows = Vec::new();
    for cell in config.cells()? {
        let params = cell.canonical();
        for (fold, s) in splits.iter().enumerate() {
            let started = Instant::now();
            let rmse = run_cell(&cell, s)
                .map_err(|e| e.with_context(format!("{} [{params}] fold {fold}", cell.method())))?;
            rows.push(ResultRow {
                method: cell.method(),
                params: params.clone(),
                fold,
                rmse,
                wall_time_ms: if config.timing { started.elapsed().as_millis() } else { 0 },
            });
        }
    }
    Ok(rows)
}

/// Trains one parameter set on one split and returns validation RMSE.
pub fn run_cell<T: Scalar>(params: &MethodParams<T>, s: &TrainValSplit<T>) -> Result<T> {
    run_cell_clamped(params, s, true)
}

pub fn run_cell_clamped<T: Scalar>(params: &MethodParams<T>, s: &TrainValSplit<T>, clamp: bool) -> Result<T> {
    let model = params.fit(&s.train, s.seed)?;
    Ok(evaluate(model.as_ref(), &s.validation, clamp)?.rmse)
}

pub fn write_results_csv<T: Scalar>(rows: &[ResultRow<T>], comment: Option<&str>, mut writer: impl Write) -> Result<()> {
    let io_err = |source| Error::Io {
        path: "<writer>".into(),
        source,
    };
    if let Some(c) = comment {
        writeln!(writer, "{c}").map_err(io_err)?;
    }
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(RESULTS_HEADER)?;
    for r in rows {
        w.write_record([
            r.method.name().to_string(),
            r.params.clone(),
            r.fold.to_string(),
            r.rmse.to_string(),
            r.wall_time_ms.to_string(),
        ])?;
    }
    w.flush().map_err(io_err)
}

pub fn read_results_csv<T: Scalar>(reader: impl Read) -> Result<Vec<ResultRow<T>>> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(reader);
    if rdr.headers()?.iter().ne(RESULTS_HEADER) {
        return Err(Error::Format("unexpected results header".into()));
    }
    rdr.records()
        .map(|rec| {
            let rec = rec?;
            let bad = |what: &str| Error::Format(format!("bad {what} in results row"));
            Ok(ResultRow {
                method: rec[0].parse()?,
                params: rec[1].to_string(),
                fold: rec[2].parse().map_err(|_| bad("fold"))?,
                rmse: rec[3].parse().map_err(|_| bad("rmse"))?,
                wall_time_ms: rec[4].parse().map_err(|_| bad("wall_time_ms"))?,
            })
        })
        .collect()
}

/// The default settings for each method, with the neighbor count and
/// factor/rank dimension capped to what the dataset can support.
pub fn default_params_for<T: Scalar>(dataset: &RatingDataset<T>) -> [MethodParams<T>; 3] {
    let (m, n) = (dataset.num_users(), dataset.num_items());
    let imf = ImfConfig::default();
    let hp = HyperParams::<T>::default();
    [
        MethodParams::Ubcf(UbcfConfig::default()),
        MethodParams::Imf(ImfConfig {
            rank: imf.rank.min(m.min(n)),
            ..imf
        }),
        MethodParams::Integrated(HyperParams {
            k: hp.k.min(n.saturating_sub(1)),
            factors: hp.factors.min(m.min(n)),
            ..hp
        }),
    ]
}

/// The documented synthetic benchmark used for the method comparison.
pub const BENCHMARK_SPEC: &str = "users=2000,items=300,rank=3,noise=0.8,density=0.12,boost=1.0,seed=7";

/// Split seed paired with [`BENCHMARK_SPEC`].
pub const BENCHMARK_SEED: u64 = 7;

/// All three methods at their defaults on one shared 90/10 split.
pub fn compare_methods<T: Scalar>(dataset: &RatingDataset<T>, seed: u64, clamp: bool) -> Result<Vec<ResultRow<T>>> {
    let s = split(dataset, 0.9, seed)?;
    default_params_for(dataset)
        .iter()
        .map(|p| {
            let rmse = run_cell_clamped(p, &s, clamp).map_err(|e| e.with_context(p.method().name()))?;
            Ok(ResultRow {
                method: p.method(),
                params: p.canonical(),
                fold: 0,
                rmse,
                wall_time_ms: 0,
            })
        })
        .collect()
}

/// Table-style summary: one `method  rmse` line per row, five decimals.
pub fn format_table<T: Scalar>(rows: &[ResultRow<T>]) -> String {
    let mut out = format!("{:<12} {:>8}\n", "method", "rmse");
    for r in rows {
        out.push_str(&format!("{:<12} {:>8.5}\n", r.method.name(), r.rmse.to_f64_lossy()));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Rating;

    fn synthetic() -> DataSource<f64> {
        DataSource::Synthetic("users=40,items=15,rank=2,noise=0.3,density=0.5,seed=9".parse().unwrap())
    }

    #[test]
    fn canonical_params() {
        let p = MethodParams::<f64>::defaults(Method::Ubcf);
        assert_eq!(p.canonical(), "metric=cosine;neighbors=100");
        let p = MethodParams::<f64>::defaults(Method::Imf);
        assert_eq!(p.canonical(), "rank=3;iterations=20");
        let p = MethodParams::<f64>::defaults(Method::Integrated);
        assert_eq!(
            p.canonical(),
            "k=300;factors=10;lambda1=600;lambda2=0.005;lambda3=0.015;lambda4=0.015;gamma1=0.007;gamma2=0.007;gamma3=0.001;decay=0.9;epochs=6;init=similarity"
        );
    }

    #[test]
    fn sweep_cells_nest_first_axis_outermost() {
        let mut c = ExperimentConfig::new(Method::Ubcf, synthetic());
        c.sweep = vec![parse_sweep("metric=pearson,cosine").unwrap(), parse_sweep("neighbors=5,10,25,50,100").unwrap()];
        let cells = c.cells().unwrap();
        assert_eq!(cells.len(), 10);
        assert_eq!(cells[0].canonical(), "metric=pearson;neighbors=5");
        assert_eq!(cells[9].canonical(), "metric=cosine;neighbors=100");
        c.sweep = vec![parse_sweep("rank=1,2").unwrap()];
        assert!(c.validate().is_err());
        assert!(parse_sweep("rank").is_err());
    }

    #[test]
    fn run_rows_and_round_trip() {
        let mut c = ExperimentConfig::new(Method::Imf, synthetic());
        c.params.set("iterations", "3").unwrap();
        c.sweep = vec![parse_sweep("rank=1,2").unwrap()];
        c.folds = 2;
        let rows = run(&c).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!((rows[1].params.as_str(), rows[1].fold), ("rank=1;iterations=3", 1));
        let mut buf = Vec::new();
        write_results_csv(&rows, Some(&c.header_comment()), &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# cv=subsample folds=2"));
        assert!(text.lines().nth(1).unwrap() == "method,params,fold,rmse,wall_time_ms");
        let back: Vec<ResultRow<f64>> = read_results_csv(buf.as_slice()).unwrap();
        assert_eq!(back, rows);

        // a single cell reproduces in isolation
        let splits = c.splits(&c.data.load(c.scale).unwrap()).unwrap();
        let mut cell = c.params.clone();
        cell.set("rank", "2").unwrap();
        assert_eq!(run_cell(&cell, &splits[1]).unwrap(), rows[3].rmse);
    }

    #[test]
    fn kfold_mode_partitions_validation() {
        let mut c = ExperimentConfig::new(Method::Imf, synthetic());
        c.cv = CvMode::KFold;
        c.folds = 3;
        let d = c.data.load(c.scale).unwrap();
        let splits = c.splits(&d).unwrap();
        let total: usize = splits.iter().map(|s| s.validation.len()).sum();
        assert_eq!(total, d.len());
        c.folds = 1;
        assert!(c.validate().is_err());
    }

    #[test]
    fn identical_ratings_give_zero_rmse_everywhere() {
        let ratings = (0..12)
            .flat_map(|u| (0..6).filter(move |i| (u + i) % 3 != 0).map(move |i| Rating::new(u, i, 4.0)))
            .collect();
        let d = RatingDataset::new(12, 6, ratings, RatingScale::stars()).unwrap();
        for row in compare_methods(&d, 1, true).unwrap() {
            assert_eq!(row.rmse, 0.0, "{}", row.method);
        }
    }

    #[test]
    fn table_format() {
        let rows = vec![ResultRow {
            method: Method::Imf,
            params: String::new(),
            fold: 0,
            rmse: 0.988931,
            wall_time_ms: 0,
        }];
        assert!(format_table(&rows).contains("imf           0.98893"));
    }
}
