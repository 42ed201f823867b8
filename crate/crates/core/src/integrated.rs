//! Integrated neighborhood + latent-factor model trained by SGD.
//!
//! ```text
//! r̂_ui = μ + b_u + b_i
//!      + q_iᵀ (p_u + |N(u)|^-½ Σ_{j∈N(u)} y_j)
//!      + |R^k(i;u)|^-½ Σ_{t∈R^k(i;u)} (r_ut − b_ut) w_it
//!      + |N^k(i;u)|^-½ Σ_{t∈N^k(i;u)} c_it
//! ```
//!
//! `N(u)` is the set of items `u` rated (implicit feedback is "has rated"),
//! so `N(u) = R(u)` and `R^k(i;u) = N^k(i;u)` = the `k` nearest item
//! neighbors of `i` that `u` rated. A sum over an empty set contributes 0.
//! `b_ut = μ + b_u + b_t` uses the baseline frozen at initialisation.

use std::io::{Read, Write};

use crate::data::{baseline_stats, RatingDataset};
use crate::error::{Error, Result};
use crate::imf::LowRankState;
use crate::linalg::truncated_svd;
use crate::rng::{permutation, rng_from_seed};
use crate::scalar::{dot, squared_norm, Scalar};
use crate::similarity::{build_neighbor_sets, Axis, Metric, NeighborSets};
use crate::Predictor;

/// How `w_it` and `c_it` start.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NeighborInit {
    /// Both start at the shrunk similarity `s_it`.
    Similarity,
    Zero,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HyperParams<T> {
    /// Similarity shrinkage for neighbor selection.
    pub lambda1: T,
    /// Bias regularization.
    pub lambda2: T,
    /// Factor regularization.
    pub lambda3: T,
    /// Neighborhood weight regularization.
    pub lambda4: T,
    pub gamma1: T,
    pub gamma2: T,
    pub gamma3: T,
    /// Per-epoch multiplier applied to all learning rates.
    pub gamma_decay: T,
    /// Item neighbors per item; 0 disables the neighborhood terms.
    pub k: usize,
    /// Latent dimension; 0 disables the factor term.
    pub factors: usize,
    pub epochs: usize,
    pub neighbor_init: NeighborInit,
}

impl<T: Scalar> Default for HyperParams<T> {
    fn default() -> Self {
        HyperParams {
            lambda1: T::lit(600.0),
            lambda2: T::lit(0.005),
            lambda3: T::lit(0.015),
            lambda4: T::lit(0.015),
            gamma1: T::lit(0.007),
            gamma2: T::lit(0.007),
            gamma3: T::lit(0.001),
            gamma_decay: T::lit(0.9),
            k: 300,
            factors: 10,
            epochs: 6,
            neighbor_init: NeighborInit::Similarity,
        }
    }
}

impl<T: Scalar> HyperParams<T> {
    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("lambda3", self.lambda3),
            ("lambda4", self.lambda4),
        ];
        for (name, v) in nonneg {
            if !(v >= T::zero()) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be >= 0, got {v}")));
            }
        }
        for (name, v) in [("gamma1", self.gamma1), ("gamma2", self.gamma2), ("gamma3", self.gamma3)] {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(self.gamma_decay > T::zero() && self.gamma_decay <= T::one()) {
            return Err(Error::InvalidParameter(format!(
                "gamma_decay must lie in (0, 1], got {}",
                self.gamma_decay
            )));
        }
        Ok(())
    }

    pub fn initial_rates(&self) -> LearningRates<T> {
        LearningRates {
            gamma1: self.gamma1,
            gamma2: self.gamma2,
            gamma3: self.gamma3,
        }
    }

    /// Rates used during epoch `epoch` (0-based): `γ · decay^epoch`.
    pub fn rates_at_epoch(&self, epoch: usize) -> LearningRates<T> {
        let f = self.gamma_decay.powi(epoch as i32);
        LearningRates {
            gamma1: self.gamma1 * f,
            gamma2: self.gamma2 * f,
            gamma3: self.gamma3 * f,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LearningRates<T> {
    pub gamma1: T,
    pub gamma2: T,
    pub gamma3: T,
}

/// Full parameter set of the integrated model.
#[derive(Clone, Debug, PartialEq)]
pub struct IntegratedParams<T> {
    num_users: usize,
    num_items: usize,
    factors: usize,
    pub mu: T,
    pub b_user: Vec<T>,
    pub b_item: Vec<T>,
    /// Frozen offsets used inside `b_ut`.
    base_user: Vec<T>,
    base_item: Vec<T>,
    /// users × factors, row-major
    pub p: Vec<T>,
    /// items × factors
    pub q: Vec<T>,
    /// items × factors
    pub y: Vec<T>,
    neighbors: NeighborSets<T>,
    /// Aligned with the flat pair layout of `neighbors`.
    pub w: Vec<T>,
    pub c: Vec<T>,
    /// `N(u) = R(u)`: `(item, rating)` sorted by item.
    user_rated: Vec<Vec<(usize, T)>>,
}

/// Quantities shared by prediction, loss and update for one `(u, i)`.
struct Terms<T> {
    /// `|N(u)|^-½`, 0 for an empty set.
    norm_implicit: T,
    /// `p_u + |N(u)|^-½ Σ y_j`
    user_vector: Vec<T>,
    /// `(pair position, r_ut − b_ut)` for `t ∈ R^k(i;u)`.
    neighborhood: Vec<(usize, T)>,
    /// `|R^k(i;u)|^-½`, 0 for an empty set.
    norm_neighbors: T,
}

fn inv_sqrt_len<T: Scalar>(n: usize) -> T {
    if n == 0 {
        T::zero()
    } else {
        T::one() / T::from_count(n).sqrt()
    }
}

impl<T: Scalar> IntegratedParams<T> {
    /// Baseline from training means, factors from the rank-`K` SVD of the
    /// item-centered zero-filled matrix split as `U√S`, `V√S`, `y = 0`,
    /// item neighbors by shrunk Pearson, and `w = c = s` (or 0).
    pub fn init(train: &RatingDataset<T>, hp: &HyperParams<T>) -> Result<Self> {
        hp.validate()?;
        let (m, n) = (train.num_users(), train.num_items());
        if hp.k > n.saturating_sub(1) {
            return Err(Error::InvalidParameter(format!(
                "k = {} item neighbors exceeds the {} other items available",
                hp.k,
                n.saturating_sub(1)
            )));
        }
        if hp.factors > m.min(n) {
            return Err(Error::InvalidParameter(format!(
                "{} factors exceed min(users, items) = {}",
                hp.factors,
                m.min(n)
            )));
        }
        let stats = baseline_stats(train)?;
        let neighbors = build_neighbor_sets(train, Axis::Item, Metric::Pearson, Some(hp.lambda1), hp.k);

        let kf = hp.factors;
        let (p, q) = if kf == 0 {
            (Vec::new(), Vec::new())
        } else {
            let centered = LowRankState::center(train, kf)?;
            let (pu, qi) = truncated_svd(centered.matrix(), kf)?.balanced_factors();
            (pu.as_slice().to_vec(), qi.as_slice().to_vec())
        };
        let (w, c) = match hp.neighbor_init {
            NeighborInit::Similarity => (neighbors.all_weights().to_vec(), neighbors.all_weights().to_vec()),
            NeighborInit::Zero => (vec![T::zero(); neighbors.num_pairs()], vec![T::zero(); neighbors.num_pairs()]),
        };
        Ok(IntegratedParams {
            num_users: m,
            num_items: n,
            factors: kf,
            mu: stats.global_mean,
            b_user: stats.user_offsets.clone(),
            b_item: stats.item_offsets.clone(),
            base_user: stats.user_offsets,
            base_item: stats.item_offsets,
            p,
            q,
            y: vec![T::zero(); n * kf],
            neighbors,
            w,
            c,
            user_rated: train.by_user().to_vec(),
        })
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_items(&self) -> usize {
        self.num_items
    }

    pub fn factors(&self) -> usize {
        self.factors
    }

    pub fn neighbors(&self) -> &NeighborSets<T> {
        &self.neighbors
    }

    pub fn user_rated(&self, user: usize) -> &[(usize, T)] {
        &self.user_rated[user]
    }

    /// Frozen `μ + b_u + b_t` used in the neighborhood deviation.
    pub fn frozen_baseline(&self, user: usize, item: usize) -> T {
        self.mu + self.base_user[user] + self.base_item[item]
    }

    pub fn p_row(&self, user: usize) -> &[T] {
        &self.p[user * self.factors..(user + 1) * self.factors]
    }

    pub fn q_row(&self, item: usize) -> &[T] {
        &self.q[item * self.factors..(item + 1) * self.factors]
    }

    pub fn y_row(&self, item: usize) -> &[T] {
        &self.y[item * self.factors..(item + 1) * self.factors]
    }

    fn terms(&self, user: usize, item: usize) -> Terms<T> {
        let kf = self.factors;
        let rated = &self.user_rated[user];
        let norm_implicit = inv_sqrt_len(rated.len());
        let mut user_vector = self.p_row(user).to_vec();
        if kf > 0 && !rated.is_empty() {
            let mut sum = vec![T::zero(); kf];
            for &(j, _) in rated {
                for (s, &yv) in sum.iter_mut().zip(self.y_row(j)) {
                    *s += yv;
                }
            }
            for (uv, s) in user_vector.iter_mut().zip(sum) {
                *uv += norm_implicit * s;
            }
        }
        let mut neighborhood = Vec::new();
        if !rated.is_empty() {
            let range = self.neighbors.range(item);
            for (pos, &t) in range.clone().zip(self.neighbors.neighbors(item)) {
                if let Ok(k) = rated.binary_search_by_key(&t, |&(j, _)| j) {
                    neighborhood.push((pos, rated[k].1 - self.frozen_baseline(user, t)));
                }
            }
        }
        let norm_neighbors = inv_sqrt_len(neighborhood.len());
        Terms {
            norm_implicit,
            user_vector,
            neighborhood,
            norm_neighbors,
        }
    }

    fn predict_from(&self, user: usize, item: usize, terms: &Terms<T>) -> T {
        let mut pred = self.mu + self.b_user[user] + self.b_item[item];
        if self.factors > 0 {
            pred += dot(self.q_row(item), &terms.user_vector);
        }
        if !terms.neighborhood.is_empty() {
            let explicit = terms
                .neighborhood
                .iter()
                .fold(T::zero(), |acc, &(pos, dev)| acc + dev * self.w[pos]);
            let implicit = terms.neighborhood.iter().fold(T::zero(), |acc, &(pos, _)| acc + self.c[pos]);
            pred += terms.norm_neighbors * explicit + terms.norm_neighbors * implicit;
        }
        pred
    }

    /// Regularized squared error of one training triple, over the
    /// parameters that triple touches.
    pub fn sample_loss(&self, user: usize, item: usize, rating: T, hp: &HyperParams<T>) -> T {
        let terms = self.terms(user, item);
        let e = rating - self.predict_from(user, item, &terms);
        let biases = self.b_user[user] * self.b_user[user] + self.b_item[item] * self.b_item[item];
        let mut factors = squared_norm(self.q_row(item)) + squared_norm(self.p_row(user));
        for &(j, _) in &self.user_rated[user] {
            factors += squared_norm(self.y_row(j));
        }
        let weights = terms
            .neighborhood
            .iter()
            .fold(T::zero(), |acc, &(pos, _)| acc + self.w[pos] * self.w[pos] + self.c[pos] * self.c[pos]);
        e * e + hp.lambda2 * biases + hp.lambda3 * factors + hp.lambda4 * weights
    }

    /// One stochastic update for a training triple. The error is computed
    /// once and every rule reads pre-update values. Returns the error.
    pub fn sgd_step(&mut self, user: usize, item: usize, rating: T, hp: &HyperParams<T>, rates: LearningRates<T>) -> Result<T> {
        let terms = self.terms(user, item);
        let e = rating - self.predict_from(user, item, &terms);
        if !e.is_finite() {
            return Err(Error::Divergence(format!(
                "non-finite error at user {user}, item {item}"
            )));
        }
        let LearningRates { gamma1, gamma2, gamma3 } = rates;

        let (bu, bi) = (self.b_user[user], self.b_item[item]);
        self.b_user[user] = bu + gamma1 * (e - hp.lambda2 * bu);
        self.b_item[item] = bi + gamma1 * (e - hp.lambda2 * bi);

        let kf = self.factors;
        if kf > 0 {
            let q_old = self.q_row(item).to_vec();
            let p_old = self.p_row(user).to_vec();
            {
                let q = &mut self.q[item * kf..(item + 1) * kf];
                for ((qv, &uv), &qo) in q.iter_mut().zip(&terms.user_vector).zip(&q_old) {
                    *qv += gamma2 * (e * uv - hp.lambda3 * qo);
                }
            }
            {
                let p = &mut self.p[user * kf..(user + 1) * kf];
                for ((pv, &qo), &po) in p.iter_mut().zip(&q_old).zip(&p_old) {
                    *pv += gamma2 * (e * qo - hp.lambda3 * po);
                }
            }
            let scale = e * terms.norm_implicit;
            for &(j, _) in &self.user_rated[user] {
                let y = &mut self.y[j * kf..(j + 1) * kf];
                for (yv, &qo) in y.iter_mut().zip(&q_old) {
                    *yv += gamma2 * (scale * qo - hp.lambda3 * *yv);
                }
            }
        }

        let norm = terms.norm_neighbors;
        for &(pos, dev) in &terms.neighborhood {
            let (w, c) = (self.w[pos], self.c[pos]);
            self.w[pos] = w + gamma3 * (norm * e * dev - hp.lambda4 * w);
            self.c[pos] = c + gamma3 * (norm * e - hp.lambda4 * c);
        }

        if !(self.b_user[user].is_finite() && self.b_item[item].is_finite())
            || (kf > 0 && !(self.q_row(item).iter().chain(self.p_row(user)).all(|x| x.is_finite())))
        {
            return Err(Error::Divergence(format!(
                "non-finite parameters after update at user {user}, item {item}"
            )));
        }
        Ok(e)
    }

    pub fn all_finite(&self) -> bool {
        self.mu.is_finite()
            && [&self.b_user, &self.b_item, &self.p, &self.q, &self.y, &self.w, &self.c]
                .iter()
                .all(|v| v.iter().all(|x| x.is_finite()))
    }
}

impl<T: Scalar> Predictor<T> for IntegratedParams<T> {
    fn predict(&self, user: usize, item: usize) -> T {
        let terms = self.terms(user, item);
        self.predict_from(user, item, &terms)
    }
}

/// What the training loop reports after each epoch.
pub struct EpochInfo<'a, T> {
    pub epoch: usize,
    /// Rates used during this epoch.
    pub rates: LearningRates<T>,
    /// Indices into the training ratings, in visiting order.
    pub order: &'a [usize],
    /// Root mean of squared errors seen during the epoch (pre-update).
    pub train_rmse: T,
    pub params: &'a IntegratedParams<T>,
}

pub fn train<T: Scalar>(train: &RatingDataset<T>, hp: &HyperParams<T>, seed: u64) -> Result<IntegratedParams<T>> {
    train_with(train, hp, seed, |_| {})
}

/// [`IntegratedParams::init`], then `hp.epochs` passes over a freshly
/// shuffled order of the training triples, decaying the rates after each.
pub fn train_with<T: Scalar>(
    train: &RatingDataset<T>,
    hp: &HyperParams<T>,
    seed: u64,
    mut observe: impl FnMut(&EpochInfo<'_, T>),
) -> Result<IntegratedParams<T>> {
    let mut params = IntegratedParams::init(train, hp)?;
    let mut rng = rng_from_seed(seed);
    let ratings = train.ratings();
    let mut rates = hp.initial_rates();
    for epoch in 0..hp.epochs {
        let order = permutation(ratings.len(), &mut rng);
        let mut sse = T::zero();
        for &idx in &order {
            let r = ratings[idx];
            let e = params
                .sgd_step(r.user, r.item, r.value, hp, rates)
                .map_err(|err| err.with_context(format!("epoch {epoch}")))?;
            sse += e * e;
        }
        observe(&EpochInfo {
            epoch,
            rates,
            order: &order,
            train_rmse: (sse / T::from_count(order.len().max(1))).sqrt(),
            params: &params,
        });
        rates = hp.rates_at_epoch(epoch + 1);
    }
    if !params.all_finite() {
        return Err(Error::Divergence("non-finite parameters after training".into()));
    }
    Ok(params)
}

const DUMP_MAGIC: &str = "ratebench-integrated";
const DUMP_VERSION: &str = "1";

/// Writes parameters as flexible CSV records:
///
/// ```text
/// ratebench-integrated,1
/// dims,<users>,<items>,<factors>,<pairs>
/// mu,<μ>
/// user,<u>,<b_u>,<frozen b_u>,<p_u…>
/// item,<i>,<b_i>,<frozen b_i>,<q_i…>,<y_i…>
/// pair,<i>,<t>,<s_it>,<w_it>,<c_it>
/// rated,<u>,<i>,<r_ui>
/// ```
///
/// Values use shortest round-trip formatting, so a reload is bit-exact.
pub fn write_params<T: Scalar>(params: &IntegratedParams<T>, writer: impl Write) -> Result<()> {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(writer);
    w.write_record([DUMP_MAGIC, DUMP_VERSION])?;
    let ns = &params.neighbors;
    w.write_record([
        "dims".to_string(),
        params.num_users.to_string(),
        params.num_items.to_string(),
        params.factors.to_string(),
        ns.num_pairs().to_string(),
    ])?;
    w.write_record(["mu".to_string(), params.mu.to_string()])?;
    for u in 0..params.num_users {
        let mut rec = vec!["user".to_string(), u.to_string(), params.b_user[u].to_string(), params.base_user[u].to_string()];
        rec.extend(params.p_row(u).iter().map(T::to_string));
        w.write_record(&rec)?;
    }
    for i in 0..params.num_items {
        let mut rec = vec!["item".to_string(), i.to_string(), params.b_item[i].to_string(), params.base_item[i].to_string()];
        rec.extend(params.q_row(i).iter().map(T::to_string));
        rec.extend(params.y_row(i).iter().map(T::to_string));
        w.write_record(&rec)?;
    }
    for i in 0..params.num_items {
        for pos in ns.range(i) {
            w.write_record([
                "pair".to_string(),
                i.to_string(),
                ns.all_ids()[pos].to_string(),
                ns.all_weights()[pos].to_string(),
                params.w[pos].to_string(),
                params.c[pos].to_string(),
            ])?;
        }
    }
    for (u, row) in params.user_rated.iter().enumerate() {
        for &(i, r) in row {
            w.write_record(["rated".to_string(), u.to_string(), i.to_string(), r.to_string()])?;
        }
    }
    w.flush().map_err(|source| Error::Io {
        path: "<writer>".into(),
        source,
    })
}

pub fn read_params<T: Scalar>(reader: impl Read) -> Result<IntegratedParams<T>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(reader);
    let mut records = rdr.records();
    let mut next = || -> Result<Option<csv::StringRecord>> { records.next().transpose().map_err(Error::from) };
    let bad = |msg: &str| Error::Format(msg.to_string());

    let head = next()?.ok_or_else(|| bad("empty file"))?;
    if head.len() != 2 || &head[0] != DUMP_MAGIC || &head[1] != DUMP_VERSION {
        return Err(bad("missing or unsupported version header"));
    }
    let dims = next()?.ok_or_else(|| bad("missing dims"))?;
    if dims.len() != 5 || &dims[0] != "dims" {
        return Err(bad("malformed dims record"));
    }
    let int = |s: &str| s.parse::<usize>().map_err(|_| Error::Format(format!("bad integer `{s}`")));
    let num = |s: &str| s.parse::<T>().map_err(|_| Error::Format(format!("bad number `{s}`")));
    let (m, n, kf, pairs) = (int(&dims[1])?, int(&dims[2])?, int(&dims[3])?, int(&dims[4])?);

    let mu_rec = next()?.ok_or_else(|| bad("missing mu"))?;
    if mu_rec.len() != 2 || &mu_rec[0] != "mu" {
        return Err(bad("malformed mu record"));
    }
    let mu = num(&mu_rec[1])?;

    let mut b_user = vec![T::zero(); m];
    let mut base_user = vec![T::zero(); m];
    let mut p = vec![T::zero(); m * kf];
    for u in 0..m {
        let rec = next()?.ok_or_else(|| bad("missing user record"))?;
        if rec.len() != 4 + kf || &rec[0] != "user" || int(&rec[1])? != u {
            return Err(Error::Format(format!("malformed user record {u}")));
        }
        b_user[u] = num(&rec[2])?;
        base_user[u] = num(&rec[3])?;
        for f in 0..kf {
            p[u * kf + f] = num(&rec[4 + f])?;
        }
    }
    let mut b_item = vec![T::zero(); n];
    let mut base_item = vec![T::zero(); n];
    let mut q = vec![T::zero(); n * kf];
    let mut y = vec![T::zero(); n * kf];
    for i in 0..n {
        let rec = next()?.ok_or_else(|| bad("missing item record"))?;
        if rec.len() != 4 + 2 * kf || &rec[0] != "item" || int(&rec[1])? != i {
            return Err(Error::Format(format!("malformed item record {i}")));
        }
        b_item[i] = num(&rec[2])?;
        base_item[i] = num(&rec[3])?;
        for f in 0..kf {
            q[i * kf + f] = num(&rec[4 + f])?;
            y[i * kf + f] = num(&rec[4 + kf + f])?;
        }
    }
    let mut lists: Vec<Vec<(usize, T)>> = vec![Vec::new(); n];
    let mut w = Vec::with_capacity(pairs);
    let mut c = Vec::with_capacity(pairs);
    let mut max_len = 0;
    for _ in 0..pairs {
        let rec = next()?.ok_or_else(|| bad("missing pair record"))?;
        if rec.len() != 6 || &rec[0] != "pair" {
            return Err(bad("malformed pair record"));
        }
        let (i, t) = (int(&rec[1])?, int(&rec[2])?);
        if i >= n || t >= n {
            return Err(bad("pair index out of range"));
        }
        if lists.iter().skip(i + 1).any(|l| !l.is_empty()) {
            return Err(bad("pair records out of order"));
        }
        lists[i].push((t, num(&rec[3])?));
        max_len = max_len.max(lists[i].len());
        w.push(num(&rec[4])?);
        c.push(num(&rec[5])?);
    }
    let mut user_rated = vec![Vec::new(); m];
    while let Some(rec) = next()? {
        if rec.len() != 4 || &rec[0] != "rated" {
            return Err(bad("malformed rated record"));
        }
        let (u, i) = (int(&rec[1])?, int(&rec[2])?);
        if u >= m || i >= n {
            return Err(bad("rated index out of range"));
        }
        user_rated[u].push((i, num(&rec[3])?));
    }
    for row in &mut user_rated {
        row.sort_unstable_by_key(|&(i, _)| i);
    }
    Ok(IntegratedParams {
        num_users: m,
        num_items: n,
        factors: kf,
        mu,
        b_user,
        b_item,
        base_user,
        base_item,
        p,
        q,
        y,
        neighbors: NeighborSets::from_lists(lists, max_len),
        w,
        c,
        user_rated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Rating, RatingScale};
    use approx::assert_abs_diff_eq;

    fn ds(nu: usize, ni: usize, t: &[(usize, usize, f64)]) -> RatingDataset<f64> {
        let r = t.iter().map(|&(u, i, v)| Rating::new(u, i, v)).collect();
        RatingDataset::new(nu, ni, r, RatingScale::stars()).unwrap()
    }

    fn small() -> RatingDataset<f64> {
        let mut t = Vec::new();
        for u in 0..9 {
            for i in 0..7 {
                if (u * 5 + i * 3) % 4 != 0 {
                    t.push((u, i, 1.0 + ((u * 3 + i * i) % 5) as f64));
                }
            }
        }
        ds(9, 7, &t)
    }

    fn hp(k: usize, factors: usize) -> HyperParams<f64> {
        HyperParams {
            k,
            factors,
            lambda1: 10.0,
            ..HyperParams::default()
        }
    }

    #[test]
    fn defaults_are_the_tuned_values() {
        let h = HyperParams::<f64>::default();
        assert_eq!((h.k, h.factors, h.epochs), (300, 10, 6));
        assert_eq!((h.lambda1, h.lambda2, h.lambda3, h.lambda4), (600.0, 0.005, 0.015, 0.015));
        assert_eq!((h.gamma1, h.gamma2, h.gamma3, h.gamma_decay), (0.007, 0.007, 0.001, 0.9));
    }

    #[test]
    fn init_single_rating() {
        let d = ds(1, 1, &[(0, 0, 4.0)]);
        let p = IntegratedParams::init(&d, &hp(0, 1)).unwrap();
        assert_eq!(p.mu, 4.0);
        assert_eq!((p.b_user[0], p.b_item[0]), (0.0, 0.0));
    }

    #[test]
    fn init_factors_and_zero_y() {
        let d = small();
        let p = IntegratedParams::init(&d, &hp(3, 2)).unwrap();
        assert!(p.y.iter().all(|&v| v == 0.0));
        let centered = LowRankState::center(&d, 2).unwrap();
        let trunc = truncated_svd(centered.matrix(), 2).unwrap().reconstruct();
        for u in 0..d.num_users() {
            for i in 0..d.num_items() {
                assert_abs_diff_eq!(dot(p.p_row(u), p.q_row(i)), trunc[(u, i)], epsilon = 1e-8);
            }
        }
        assert_eq!(p.w, p.neighbors().all_weights());
        assert_eq!(p.c, p.neighbors().all_weights());
        let z = IntegratedParams::init(&d, &HyperParams { neighbor_init: NeighborInit::Zero, ..hp(3, 2) }).unwrap();
        assert!(z.w.iter().chain(&z.c).all(|&v| v == 0.0));
    }

    #[test]
    fn init_rejects_oversized_k_and_factors() {
        let d = small();
        assert!(IntegratedParams::init(&d, &hp(7, 2)).is_err());
        assert!(IntegratedParams::init(&d, &hp(6, 8)).is_err());
        assert!(IntegratedParams::init(&d, &HyperParams { gamma_decay: 1.5, ..hp(2, 2) }).is_err());
        assert!(IntegratedParams::init(&d, &HyperParams { gamma1: 0.0, ..hp(2, 2) }).is_err());
    }

    #[test]
    fn predict_reduces_to_baseline() {
        let d = small();
        let mut p = IntegratedParams::init(&d, &hp(3, 2)).unwrap();
        p.q.iter_mut().chain(p.y.iter_mut()).chain(p.w.iter_mut()).chain(p.c.iter_mut()).for_each(|x| *x = 0.0);
        for u in 0..9 {
            for i in 0..7 {
                assert_eq!(p.predict(u, i), p.mu + p.b_user[u] + p.b_item[i]);
            }
        }
        p.b_user.iter_mut().chain(p.b_item.iter_mut()).for_each(|x| *x = 0.0);
        assert_eq!(p.predict(2, 3), p.mu);
    }

    #[test]
    fn zero_error_step_keeps_zero_parameters() {
        let d = ds(2, 2, &[(0, 0, 3.0), (0, 1, 3.0), (1, 0, 3.0), (1, 1, 3.0)]);
        let h = hp(1, 1);
        let mut p = IntegratedParams::init(&d, &h).unwrap();
        assert!(p.p.iter().chain(&p.q).chain(&p.w).all(|&v| v == 0.0));
        let before = p.clone();
        let e = p.sgd_step(0, 1, 3.0, &h, h.initial_rates()).unwrap();
        assert_eq!(e, 0.0);
        assert_eq!(p, before);
    }

    #[test]
    fn divergence_is_reported() {
        let d = small();
        let h = hp(2, 2);
        let mut p = IntegratedParams::init(&d, &h).unwrap();
        p.b_user[0] = f64::INFINITY;
        let err = p.sgd_step(0, 1, 3.0, &h, h.initial_rates()).unwrap_err();
        assert!(err.is_divergence());
    }

    #[test]
    fn epochs_zero_returns_init() {
        let d = small();
        let h = HyperParams { epochs: 0, ..hp(3, 2) };
        assert_eq!(train(&d, &h, 1).unwrap(), IntegratedParams::init(&d, &h).unwrap());
    }

    #[test]
    fn training_is_deterministic_and_fits() {
        let d = small();
        let h = hp(3, 2);
        let a = train(&d, &h, 42).unwrap();
        let b = train(&d, &h, 42).unwrap();
        assert_eq!(a, b);
        let init = IntegratedParams::init(&d, &h).unwrap();
        let fit = |m: &IntegratedParams<f64>| crate::evaluate(m, &d, false).unwrap().rmse;
        assert!(fit(&a) < fit(&init), "{} vs {}", fit(&a), fit(&init));
    }

    #[test]
    fn dump_round_trip_is_bit_exact() {
        let d = small();
        let p = train(&d, &hp(3, 2), 5).unwrap();
        let mut buf = Vec::new();
        write_params(&p, &mut buf).unwrap();
        let back: IntegratedParams<f64> = read_params(buf.as_slice()).unwrap();
        for u in 0..9 {
            for i in 0..7 {
                assert_eq!(back.predict(u, i).to_bits(), p.predict(u, i).to_bits());
            }
        }
        assert_eq!(back.w, p.w);
        assert!(read_params::<f64>("nonsense,9\n".as_bytes()).is_err());
    }
}
