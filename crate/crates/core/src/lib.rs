//! Rating prediction benchmark library.
//!
//! Three predictors over a sparse user × item rating matrix:
//!
//! * [`ubcf`]: user-based collaborative filtering with Pearson or cosine
//!   similarity and mean-centered aggregation of neighbor deviations.
//! * [`imf`]: iterative low-rank completion by repeated truncated SVD with
//!   reimposition of the known entries.
//! * [`integrated`]: baseline + latent factors with implicit feedback +
//!   item-neighborhood offsets, trained by stochastic gradient descent.
//!
//! [`harness`] runs seeded splits, sweeps and cross-validation and writes
//! CSV results; [`synthetic`] generates datasets with a known ground truth.
//!
//! All numeric code is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the common `f64` instantiations.

// `!(x > 0)` style checks are used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod harness;
pub mod imf;
pub mod integrated;
pub mod linalg;
pub mod metrics;
pub mod rng;
pub mod scalar;
pub mod similarity;
pub mod synthetic;
pub mod ubcf;

pub use data::{
    baseline_stats, clamp_prediction, kfold, load_csv, read_csv, split, BaselineStats, IdMap, Rating,
    RatingDataset, RatingScale, TrainValSplit,
};
pub use error::{Error, Result};
pub use metrics::{rmse, MetricReport};
pub use scalar::Scalar;
pub use similarity::{Axis, Metric};

/// Anything that predicts a rating for a `(user, item)` pair.
pub trait Predictor<T: Scalar> {
    /// Unclamped prediction.
    fn predict(&self, user: usize, item: usize) -> T;

    fn predict_clamped(&self, user: usize, item: usize, scale: RatingScale<T>) -> T {
        clamp_prediction(self.predict(user, item), scale)
    }
}

/// Predicts every validation triple and scores it.
pub fn evaluate<T: Scalar, P: Predictor<T> + ?Sized>(
    model: &P,
    validation: &RatingDataset<T>,
    clamp: bool,
) -> Result<MetricReport<T>> {
    let (preds, truths) = predict_all(model, validation, clamp);
    rmse(&preds, &truths)
}

/// Predictions and truths for every triple in `dataset`, in its order.
pub fn predict_all<T: Scalar, P: Predictor<T> + ?Sized>(
    model: &P,
    dataset: &RatingDataset<T>,
    clamp: bool,
) -> (Vec<T>, Vec<T>) {
    let scale = dataset.scale();
    dataset
        .ratings()
        .iter()
        .map(|r| {
            let p = if clamp {
                model.predict_clamped(r.user, r.item, scale)
            } else {
                model.predict(r.user, r.item)
            };
            (p, r.value)
        })
        .unzip()
}

pub type RatingDatasetF64 = RatingDataset<f64>;
pub type RatingDatasetF32 = RatingDataset<f32>;
pub type BaselineStatsF64 = BaselineStats<f64>;
pub type UbcfModelF64 = ubcf::UbcfModel<f64>;
pub type UbcfModelF32 = ubcf::UbcfModel<f32>;
pub type LowRankStateF64 = imf::LowRankState<f64>;
pub type LowRankStateF32 = imf::LowRankState<f32>;
pub type HyperParamsF64 = integrated::HyperParams<f64>;
pub type IntegratedParamsF64 = integrated::IntegratedParams<f64>;
pub type IntegratedParamsF32 = integrated::IntegratedParams<f32>;
pub type DenseMatrixF64 = linalg::DenseMatrix<f64>;
pub type SyntheticSpecF64 = synthetic::SyntheticSpec<f64>;
pub type ExperimentConfigF64 = harness::ExperimentConfig<f64>;
