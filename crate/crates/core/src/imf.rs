//! Iterative low-rank matrix completion.
//!
//! Ratings are centered by their item mean and unknown cells start at zero.
//! Each iteration replaces the matrix by its rank-`r` SVD truncation and then
//! writes the centered training values back into their cells. Predictions
//! add the item mean back.
//!
//! The matrix is dense (`users × items`): after the first truncation every
//! cell is filled anyway. At 10⁴ users × 10³ items this is 80 MB in `f64`.

use crate::data::{baseline_stats, RatingDataset};
use crate::error::{Error, Result};
use crate::linalg::{truncated_svd, DenseMatrix};
use crate::metrics::MetricReport;
use crate::scalar::Scalar;
use crate::{evaluate, Predictor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ImfConfig {
    pub rank: usize,
    pub iterations: usize,
}

impl Default for ImfConfig {
    fn default() -> Self {
        ImfConfig {
            rank: 3,
            iterations: 20,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LowRankState<T> {
    x: DenseMatrix<T>,
    item_means: Vec<T>,
    rank: usize,
    iteration: usize,
    known: Vec<(usize, usize, T)>,
}

impl<T: Scalar> LowRankState<T> {
    /// Item-mean-centered, zero-filled starting point. Items without
    /// training ratings are centered on the global mean.
    pub fn center(train: &RatingDataset<T>, rank: usize) -> Result<Self> {
        let stats = baseline_stats(train)?;
        let (m, n) = (train.num_users(), train.num_items());
        if rank == 0 || rank > m.min(n) {
            return Err(Error::InvalidParameter(format!(
                "rank {rank} outside 1..={} for {m} users x {n} items",
                m.min(n)
            )));
        }
        let mut x = DenseMatrix::zeros(m, n);
        let known: Vec<(usize, usize, T)> = train
            .ratings()
            .iter()
            .map(|r| (r.user, r.item, r.value - stats.item_means[r.item]))
            .collect();
        for &(u, i, v) in &known {
            x[(u, i)] = v;
        }
        Ok(LowRankState {
            x,
            item_means: stats.item_means,
            rank,
            iteration: 0,
            known,
        })
    }

    pub fn matrix(&self) -> &DenseMatrix<T> {
        &self.x
    }

    pub fn item_means(&self) -> &[T] {
        &self.item_means
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    /// Centered training entries `(user, item, value)`.
    pub fn known(&self) -> &[(usize, usize, T)] {
        &self.known
    }

    /// One truncation + reimposition step. Returns the rank-`r`
    /// reconstruction before reimposition.
    pub fn step(&mut self) -> Result<DenseMatrix<T>> {
        let factors = truncated_svd(&self.x, self.rank)?;
        let approx = factors.reconstruct();
        self.x = approx.clone();
        for &(u, i, v) in &self.known {
            self.x[(u, i)] = v;
        }
        self.iteration += 1;
        Ok(approx)
    }

    pub fn iterate(&mut self, iterations: usize) -> Result<()> {
        self.iterate_with(iterations, |_| Ok(()))
    }

    /// Runs `iterations` steps, calling `observe` after each.
    pub fn iterate_with(&mut self, iterations: usize, mut observe: impl FnMut(&Self) -> Result<()>) -> Result<()> {
        for _ in 0..iterations {
            self.step()?;
            observe(self)?;
        }
        Ok(())
    }

    pub fn fit(train: &RatingDataset<T>, config: ImfConfig) -> Result<Self> {
        let mut state = Self::center(train, config.rank)?;
        state.iterate(config.iterations)?;
        Ok(state)
    }
}

impl<T: Scalar> Predictor<T> for LowRankState<T> {
    fn predict(&self, user: usize, item: usize) -> T {
        self.x[(user, item)] + self.item_means[item]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RankSweepRow<T> {
    pub rank: usize,
    pub iteration: usize,
    pub report: MetricReport<T>,
}

/// Validation RMSE after every iteration `1..=max_iterations` for each rank.
pub fn sweep_rank_iterations<T: Scalar>(
    train: &RatingDataset<T>,
    validation: &RatingDataset<T>,
    ranks: &[usize],
    max_iterations: usize,
    clamp: bool,
) -> Result<Vec<RankSweepRow<T>>> {
    if ranks.is_empty() {
        return Err(Error::InvalidParameter("rank sweep needs at least one rank".into()));
    }
    let mut rows = Vec::with_capacity(ranks.len() * max_iterations);
    for &rank in ranks {
        let mut state = LowRankState::center(train, rank)?;
        state.iterate_with(max_iterations, |s| {
            rows.push(RankSweepRow {
                rank,
                iteration: s.iteration(),
                report: evaluate(s, validation, clamp)?,
            });
            Ok(())
        })?;
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Rating, RatingScale};

    fn ds(nu: usize, ni: usize, t: &[(usize, usize, f64)]) -> RatingDataset<f64> {
        let r = t.iter().map(|&(u, i, v)| Rating::new(u, i, v)).collect();
        RatingDataset::new(nu, ni, r, RatingScale::stars()).unwrap()
    }

    #[test]
    fn centering() {
        let d = ds(3, 2, &[(0, 0, 2.0), (1, 0, 4.0), (2, 1, 5.0)]);
        let s = LowRankState::center(&d, 1).unwrap();
        assert_eq!(s.matrix()[(0, 0)], -1.0);
        assert_eq!(s.matrix()[(1, 0)], 1.0);
        assert_eq!(s.matrix()[(2, 1)], 0.0);
        assert_eq!(s.matrix()[(0, 1)], 0.0);
        let flat = ds(2, 2, &[(0, 0, 3.0), (1, 0, 3.0), (0, 1, 4.0)]);
        let s = LowRankState::center(&flat, 1).unwrap();
        assert!(s.matrix().as_slice().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn unrated_item_uses_global_mean() {
        let d = ds(2, 3, &[(0, 0, 2.0), (1, 1, 4.0)]);
        let s = LowRankState::center(&d, 1).unwrap();
        assert_eq!(s.item_means()[2], 3.0);
        assert_eq!(s.predict(0, 2), 3.0);
    }

    #[test]
    fn reimposition_is_exact() {
        let mut t = Vec::new();
        for u in 0..6 {
            for i in 0..5 {
                if (u + 2 * i) % 3 != 0 {
                    t.push((u, i, 1.0 + ((u * i + u) % 5) as f64));
                }
            }
        }
        let d = ds(6, 5, &t);
        let mut s = LowRankState::center(&d, 2).unwrap();
        s.iterate_with(5, |st| {
            for &(u, i, v) in st.known() {
                assert_eq!(st.matrix()[(u, i)].to_bits(), v.to_bits());
            }
            Ok(())
        })
        .unwrap();
        assert_eq!(s.iteration(), 5);
        for r in d.ratings() {
            assert!((s.predict(r.user, r.item) - r.value).abs() < 1e-12);
        }
    }

    #[test]
    fn consistent_low_rank_is_a_fixed_point() {
        // centered matrix (item means 0 after centering) of exact rank 1, fully observed
        let a = [1.0, -1.0, 0.5];
        let b = [1.0, 2.0];
        let mut t = Vec::new();
        for (u, &au) in a.iter().enumerate() {
            for (i, &bi) in b.iter().enumerate() {
                t.push((u, i, 3.0 + au * bi));
            }
        }
        let d = ds(3, 2, &t);
        let mut s = LowRankState::center(&d, 1).unwrap();
        let before = s.matrix().clone();
        s.iterate(3).unwrap();
        assert!(s.matrix().sub(&before).frobenius_norm() < 1e-8);
    }

    #[test]
    fn rank_validation() {
        let d = ds(2, 2, &[(0, 0, 3.0)]);
        assert!(LowRankState::center(&d, 0).is_err());
        assert!(LowRankState::center(&d, 3).is_err());
    }

    #[test]
    fn sweep_table_shape() {
        let mut t = Vec::new();
        for u in 0..8 {
            for i in 0..6 {
                if (u + i) % 3 != 1 {
                    t.push((u, i, 1.0 + ((u + 3 * i) % 5) as f64));
                }
            }
        }
        let d = ds(8, 6, &t);
        let s = crate::data::split(&d, 0.8, 1).unwrap();
        let rows = sweep_rank_iterations(&s.train, &s.validation, &[1, 2, 3, 4, 5], 20, true).unwrap();
        assert_eq!(rows.len(), 100);
        assert_eq!((rows[0].rank, rows[0].iteration), (1, 1));
        assert_eq!((rows[99].rank, rows[99].iteration), (5, 20));
    }
}
