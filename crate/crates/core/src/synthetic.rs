//! Synthetic rating matrices with a known ground truth.
//!
//! The noiseless signal for cell `(u, i)` is
//!
//! ```text
//! offset + b_u + b_i + U_u · V_i + boost · a[u][cluster(i)]
//! ```
//!
//! with Gaussian item and user biases, a rank-`r*` factor product whose entries have
//! standard deviation 0.8, and per-user affinities `a` to item clusters
//! (a block effect that item neighborhoods pick up). Each cell is observed
//! independently with probability `density`; observed values get Gaussian
//! noise, are clamped to the scale and, in integer mode, rounded.
//!
//! Draw order from the seeded stream: item biases, user biases, user
//! factors, item factors, item clusters, user affinities, then cells in
//! row-major order (mask draw, and a noise draw for observed cells).
//!
//! User biases default to zero, so with `boost = 0` the item-centered
//! noiseless signal has rank exactly `r*`.

use std::fmt;
use std::str::FromStr;

use rand_distr::{Distribution, StandardNormal};

use crate::data::{Rating, RatingDataset, RatingScale};
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::rng::{bounded, rng_from_seed, unit_f64, Rng};
use crate::scalar::Scalar;

const OFFSET: f64 = 3.6;
const FACTOR_SD: f64 = 0.8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Quantization {
    /// Round to the nearest integer star.
    Integer,
    /// Keep real values (after clamping).
    Continuous,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec<T> {
    pub num_users: usize,
    pub num_items: usize,
    pub true_rank: usize,
    pub noise_std: T,
    pub density: T,
    pub neighborhood_boost: T,
    pub clusters: usize,
    /// Standard deviation of item biases.
    pub bias_std: T,
    pub user_bias_std: T,
    pub quantization: Quantization,
    pub scale: RatingScale<T>,
    pub seed: u64,
}

impl<T: Scalar> Default for SyntheticSpec<T> {
    fn default() -> Self {
        SyntheticSpec {
            num_users: 100,
            num_items: 50,
            true_rank: 3,
            noise_std: T::lit(0.5),
            density: T::lit(0.2),
            neighborhood_boost: T::zero(),
            clusters: 10,
            bias_std: T::lit(0.3),
            user_bias_std: T::zero(),
            quantization: Quantization::Integer,
            scale: RatingScale::stars(),
            seed: 0,
        }
    }
}

impl<T: Scalar> SyntheticSpec<T> {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.num_users == 0 || self.num_items == 0 {
            return bad("synthetic dataset needs at least one user and one item".into());
        }
        if self.true_rank == 0 {
            return bad("synthetic rank must be >= 1".into());
        }
        if self.clusters == 0 {
            return bad("synthetic clusters must be >= 1".into());
        }
        if !(self.noise_std >= T::zero()) || !(self.neighborhood_boost >= T::zero()) || !(self.bias_std >= T::zero()) || !(self.user_bias_std >= T::zero()) {
            return bad("noise, boost and bias must be >= 0".into());
        }
        if !(self.density > T::zero() && self.density <= T::one()) {
            return bad(format!("density {} must lie in (0, 1]", self.density));
        }
        if self.density.to_f64_lossy() * ((self.num_users * self.num_items) as f64) < 1.0 {
            return bad("density too low to produce at least one rating".into());
        }
        Ok(())
    }
}

impl<T: Scalar> fmt::Display for SyntheticSpec<T> {
    /// Canonical spec string, parseable by [`FromStr`].
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "users={},items={},rank={},noise={},density={},seed={},boost={},clusters={},bias={},user_bias={},mode={}",
            self.num_users,
            self.num_items,
            self.true_rank,
            self.noise_std,
            self.density,
            self.seed,
            self.neighborhood_boost,
            self.clusters,
            self.bias_std,
            self.user_bias_std,
            match self.quantization {
                Quantization::Integer => "integer",
                Quantization::Continuous => "continuous",
            }
        )
    }
}

impl<T: Scalar> FromStr for SyntheticSpec<T> {
    type Err = Error;

    /// Parses `users=U,items=I,rank=R,noise=σ,density=d,seed=s` with
    /// optional `boost=`, `clusters=`, `bias=`, `user_bias=` and `mode=integer|continuous`.
    fn from_str(s: &str) -> Result<Self> {
        let mut spec = SyntheticSpec::default();
        let mut required = ["users", "items", "rank", "noise", "density", "seed"].map(|k| (k, false));
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| Error::InvalidParameter(format!("synthetic spec entry `{part}` is not key=value")))?;
            let int = || {
                value
                    .parse::<usize>()
                    .map_err(|_| Error::InvalidParameter(format!("synthetic `{key}` expects an integer, got `{value}`")))
            };
            let real = || {
                value
                    .parse::<T>()
                    .map_err(|_| Error::InvalidParameter(format!("synthetic `{key}` expects a number, got `{value}`")))
            };
            match key {
                "users" => spec.num_users = int()?,
                "items" => spec.num_items = int()?,
                "rank" => spec.true_rank = int()?,
                "noise" => spec.noise_std = real()?,
                "density" => spec.density = real()?,
                "seed" => {
                    spec.seed = value
                        .parse()
                        .map_err(|_| Error::InvalidParameter(format!("synthetic seed `{value}` is not a u64")))?
                }
                "boost" => spec.neighborhood_boost = real()?,
                "clusters" => spec.clusters = int()?,
                "bias" => spec.bias_std = real()?,
                "user_bias" => spec.user_bias_std = real()?,
                "mode" => {
                    spec.quantization = match value {
                        "integer" => Quantization::Integer,
                        "continuous" => Quantization::Continuous,
                        _ => return Err(Error::InvalidParameter(format!("unknown synthetic mode `{value}`"))),
                    }
                }
                _ => return Err(Error::InvalidParameter(format!("unknown synthetic spec key `{key}`"))),
            }
            if let Some(slot) = required.iter_mut().find(|(k, _)| *k == key) {
                slot.1 = true;
            }
        }
        if let Some((missing, _)) = required.iter().find(|(_, seen)| !seen) {
            return Err(Error::InvalidParameter(format!("synthetic spec is missing `{missing}`")));
        }
        spec.validate()?;
        Ok(spec)
    }
}

/// A generated dataset and the noiseless signal it was sampled from.
#[derive(Clone, Debug)]
pub struct SyntheticData<T> {
    pub dataset: RatingDataset<T>,
    pub truth: DenseMatrix<T>,
}

fn normal(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn generate<T: Scalar>(spec: &SyntheticSpec<T>) -> Result<SyntheticData<T>> {
    spec.validate()?;
    let (m, n, r) = (spec.num_users, spec.num_items, spec.true_rank);
    let mut rng = rng_from_seed(spec.seed);
    let bias = spec.bias_std.to_f64_lossy();
    let item_bias: Vec<f64> = (0..n).map(|_| bias * normal(&mut rng)).collect();
    let user_sd = spec.user_bias_std.to_f64_lossy();
    let user_bias: Vec<f64> = (0..m).map(|_| user_sd * normal(&mut rng)).collect();
    let factor_sd = (FACTOR_SD * FACTOR_SD / r as f64).powf(0.25);
    let uf: Vec<f64> = (0..m * r).map(|_| factor_sd * normal(&mut rng)).collect();
    let vf: Vec<f64> = (0..n * r).map(|_| factor_sd * normal(&mut rng)).collect();
    let cluster: Vec<usize> = (0..n).map(|_| bounded(&mut rng, spec.clusters)).collect();
    let affinity: Vec<f64> = (0..m * spec.clusters).map(|_| normal(&mut rng)).collect();

    let boost = spec.neighborhood_boost.to_f64_lossy();
    let signal = |u: usize, i: usize| -> f64 {
        let f: f64 = (0..r).map(|k| uf[u * r + k] * vf[i * r + k]).sum();
        OFFSET + user_bias[u] + item_bias[i] + f + boost * affinity[u * spec.clusters + cluster[i]]
    };
    let truth = DenseMatrix::from_fn(m, n, |u, i| T::lit(signal(u, i)));

    let density = spec.density.to_f64_lossy();
    let noise = spec.noise_std.to_f64_lossy();
    let (lo, hi) = (spec.scale.min.to_f64_lossy(), spec.scale.max.to_f64_lossy());
    let mut ratings = Vec::new();
    for u in 0..m {
        for i in 0..n {
            if unit_f64(&mut rng) >= density {
                continue;
            }
            let mut v = (signal(u, i) + noise * normal(&mut rng)).clamp(lo, hi);
            if spec.quantization == Quantization::Integer {
                v = v.round().clamp(lo, hi);
            }
            ratings.push(Rating::new(u, i, T::lit(v)));
        }
    }
    if ratings.is_empty() {
        return Err(Error::InvalidParameter("density too low: no ratings were sampled".into()));
    }
    let dataset = RatingDataset::new(m, n, ratings, spec.scale)?;
    Ok(SyntheticData { dataset, truth })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::truncated_svd;

    #[test]
    fn parse_and_display_round_trip() {
        let s: SyntheticSpec<f64> = "users=20,items=10,rank=2,noise=0.1,density=0.5,seed=7".parse().unwrap();
        assert_eq!((s.num_users, s.num_items, s.true_rank, s.seed), (20, 10, 2, 7));
        let again: SyntheticSpec<f64> = s.to_string().parse().unwrap();
        assert_eq!(again, s);
        assert!("users=20,items=10".parse::<SyntheticSpec<f64>>().is_err());
        assert!("users=20,items=10,rank=2,noise=0.1,density=0,seed=1".parse::<SyntheticSpec<f64>>().is_err());
        assert!("users=2,items=2,rank=1,noise=0,density=0.1,seed=1".parse::<SyntheticSpec<f64>>().is_err());
        assert!("users=2,items=2,rank=1,noise=0,density=1,seed=1,colour=red".parse::<SyntheticSpec<f64>>().is_err());
    }

    #[test]
    fn same_seed_same_data() {
        let s: SyntheticSpec<f64> = "users=30,items=12,rank=2,noise=0.3,density=0.4,seed=3,boost=0.5".parse().unwrap();
        let a = generate(&s).unwrap();
        let b = generate(&s).unwrap();
        assert_eq!(a.dataset.ratings(), b.dataset.ratings());
        assert_eq!(a.truth, b.truth);
        assert!(a.dataset.ratings().iter().all(|r| r.value.fract() == 0.0 && s.scale.contains(r.value)));
    }

    #[test]
    fn noiseless_rank_one_has_low_numerical_rank() {
        let s: SyntheticSpec<f64> = "users=25,items=15,rank=1,noise=0,density=1,seed=4,mode=continuous,bias=0.1,user_bias=0.2".parse().unwrap();
        let d = generate(&s).unwrap();
        assert_eq!(d.dataset.len(), 25 * 15);
        let f = truncated_svd(&d.truth, 15).unwrap();
        let big = f.s.iter().filter(|&&x| x > 1e-9 * f.s[0]).count();
        assert!(big <= 1 + 3, "numerical rank {big}");
        // without noise, observations are the clamped truth
        let sc = s.scale;
        assert!(d.dataset.ratings().iter().all(|r| r.value == sc.clamp(d.truth[(r.user, r.item)])));
    }
}
