//! User-based collaborative filtering.
//!
//! The prediction for `(u, m)` is `r̄_u + Σ sim(u,b)(r_b(m) − r̄_b) / Σ |sim(u,b)|`,
//! where `b` ranges over the `k` users most similar to `u` among those who
//! rated `m`. Means are over each user's full training ratings.

use std::cmp::Ordering;

use crate::data::{baseline_stats, BaselineStats, RatingDataset};
use crate::error::{Error, Result};
use crate::metrics::MetricReport;
use crate::scalar::Scalar;
use crate::similarity::{shrunk_similarity, Axis, Metric, SimilarityMatrix};
use crate::{evaluate, Predictor};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UbcfConfig<T> {
    pub metric: Metric,
    pub k: usize,
    /// Optional similarity shrinkage `λ₁`; off by default.
    pub shrink: Option<T>,
}

impl<T> Default for UbcfConfig<T> {
    fn default() -> Self {
        UbcfConfig {
            metric: Metric::Cosine,
            k: 100,
            shrink: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct UbcfModel<T> {
    config: UbcfConfig<T>,
    stats: BaselineStats<T>,
    train: RatingDataset<T>,
    sims: SimilarityMatrix<T>,
}

impl<T: Scalar> UbcfModel<T> {
    pub fn fit(train: &RatingDataset<T>, config: UbcfConfig<T>) -> Result<Self> {
        if config.k == 0 {
            return Err(Error::InvalidParameter("ubcf needs k >= 1 neighbors".into()));
        }
        Ok(UbcfModel {
            stats: baseline_stats(train)?,
            sims: SimilarityMatrix::compute(train, Axis::User, config.metric),
            train: train.clone(),
            config,
        })
    }

    pub fn config(&self) -> &UbcfConfig<T> {
        &self.config
    }

    pub fn stats(&self) -> &BaselineStats<T> {
        &self.stats
    }

    pub fn similarities(&self) -> &SimilarityMatrix<T> {
        &self.sims
    }

    fn weight(&self, a: usize, b: usize) -> Option<T> {
        let s = self.sims.get(a, b);
        if s.support == 0 {
            return None;
        }
        Some(match self.config.shrink {
            Some(l) => shrunk_similarity(s.value, s.support, l),
            None => s.value,
        })
    }

    /// The neighbors used for `(user, item)`: `(neighbor, weight, rating)`
    /// sorted by weight descending, ties by id.
    pub fn neighbors_for(&self, user: usize, item: usize, k: usize) -> Vec<(usize, T, T)> {
        let mut cands: Vec<(usize, T, T)> = self
            .train
            .item_ratings(item)
            .iter()
            .filter(|&&(b, _)| b != user)
            .filter_map(|&(b, r)| self.weight(user, b).map(|w| (b, w, r)))
            .collect();
        let order = |x: &(usize, T, T), y: &(usize, T, T)| {
            y.1.partial_cmp(&x.1).unwrap_or(Ordering::Equal).then(x.0.cmp(&y.0))
        };
        if cands.len() > k && k > 0 {
            cands.select_nth_unstable_by(k - 1, order);
            cands.truncate(k);
        }
        cands.sort_unstable_by(order);
        cands
    }

    /// Aggregated prediction with an explicit neighbor count.
    pub fn predict_with_k(&self, user: usize, item: usize, k: usize) -> T {
        if self.stats.user_counts[user] == 0 {
            // cold-start user: item mean, which is itself the global mean for unrated items
            return self.stats.item_means[item];
        }
        let user_mean = self.stats.user_means[user];
        let mut num = T::zero();
        let mut den = T::zero();
        for (b, w, r) in self.neighbors_for(user, item, k) {
            num += w * (r - self.stats.user_means[b]);
            den += w.abs();
        }
        if den == T::zero() {
            user_mean
        } else {
            user_mean + num / den
        }
    }
}

impl<T: Scalar> Predictor<T> for UbcfModel<T> {
    fn predict(&self, user: usize, item: usize) -> T {
        self.predict_with_k(user, item, self.config.k)
    }
}

struct WithK<'a, T> {
    model: &'a UbcfModel<T>,
    k: usize,
}

impl<T: Scalar> Predictor<T> for WithK<'_, T> {
    fn predict(&self, user: usize, item: usize) -> T {
        self.model.predict_with_k(user, item, self.k)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NeighborSweepRow<T> {
    pub metric: Metric,
    pub k: usize,
    pub report: MetricReport<T>,
}

/// Validation RMSE for every `(metric, k)` cell, metrics outermost.
pub fn sweep_neighbors<T: Scalar>(
    train: &RatingDataset<T>,
    validation: &RatingDataset<T>,
    metrics: &[Metric],
    ks: &[usize],
    clamp: bool,
) -> Result<Vec<NeighborSweepRow<T>>> {
    if ks.is_empty() || metrics.is_empty() {
        return Err(Error::InvalidParameter("neighbor sweep needs at least one k and one metric".into()));
    }
    let mut rows = Vec::with_capacity(ks.len() * metrics.len());
    for &metric in metrics {
        let model = UbcfModel::fit(
            train,
            UbcfConfig {
                metric,
                k: ks[0].max(1),
                shrink: None,
            },
        )?;
        for &k in ks {
            if k == 0 {
                return Err(Error::InvalidParameter("ubcf needs k >= 1 neighbors".into()));
            }
            let report = evaluate(&WithK { model: &model, k }, validation, clamp)?;
            rows.push(NeighborSweepRow { metric, k, report });
        }
    }
    Ok(rows)
}
