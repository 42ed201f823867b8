//! Sparse rating data: ingestion, indexing, splitting and baseline statistics.

use std::collections::HashMap;
use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::rng::{permutation, rng_from_seed};
use crate::scalar::Scalar;

/// One observed `(user, item, value)` triple with dense 0-based indices.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rating<T> {
    pub user: usize,
    pub item: usize,
    pub value: T,
}

impl<T> Rating<T> {
    pub fn new(user: usize, item: usize, value: T) -> Self {
        Rating { user, item, value }
    }
}

/// Closed rating interval `[min, max]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RatingScale<T> {
    pub min: T,
    pub max: T,
}

impl<T: Scalar> RatingScale<T> {
    pub fn new(min: T, max: T) -> Result<Self> {
        if !(min < max) {
            return Err(Error::InvalidParameter(format!(
                "rating scale [{min}, {max}] is empty"
            )));
        }
        Ok(RatingScale { min, max })
    }

    /// The 1–5 star scale.
    pub fn stars() -> Self {
        RatingScale {
            min: T::one(),
            max: T::lit(5.0),
        }
    }

    pub fn contains(&self, x: T) -> bool {
        x >= self.min && x <= self.max
    }

    pub fn clamp(&self, x: T) -> T {
        clamp_prediction(x, *self)
    }
}

impl<T: Scalar> Default for RatingScale<T> {
    fn default() -> Self {
        Self::stars()
    }
}

/// `min(max(x, r_min), r_max)`.
#[inline]
pub fn clamp_prediction<T: Scalar>(x: T, scale: RatingScale<T>) -> T {
    x.max(scale.min).min(scale.max)
}

/// Bidirectional mapping between external string ids and dense indices,
/// in order of first appearance.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct IdMap {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl IdMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Names `0..n` as their decimal representation.
    pub fn sequential(n: usize) -> Self {
        let mut map = IdMap::new();
        for i in 0..n {
            map.intern(&i.to_string());
        }
        map
    }

    pub fn intern(&mut self, name: &str) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        let i = self.names.len();
        self.names.push(name.to_owned());
        self.index.insert(name.to_owned(), i);
        i
    }

    pub fn get(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// A sparse user × item rating matrix with row and column indexes.
///
/// `by_user[u]` lists `(item, value)` sorted by item, `by_item[i]` lists
/// `(user, value)` sorted by user. Both are rebuilt from `ratings` on
/// construction, so they never disagree with it.
#[derive(Clone, Debug)]
pub struct RatingDataset<T> {
    num_users: usize,
    num_items: usize,
    ratings: Vec<Rating<T>>,
    by_user: Vec<Vec<(usize, T)>>,
    by_item: Vec<Vec<(usize, T)>>,
    scale: RatingScale<T>,
    user_ids: Arc<IdMap>,
    item_ids: Arc<IdMap>,
}

impl<T: Scalar> RatingDataset<T> {
    /// Builds a dataset with sequential external ids. Fails on out-of-range
    /// indices, duplicate `(user, item)` keys or out-of-scale values.
    pub fn new(
        num_users: usize,
        num_items: usize,
        ratings: Vec<Rating<T>>,
        scale: RatingScale<T>,
    ) -> Result<Self> {
        Self::with_ids(
            ratings,
            scale,
            Arc::new(IdMap::sequential(num_users)),
            Arc::new(IdMap::sequential(num_items)),
        )
    }

    /// Like [`RatingDataset::new`] but without the scale check, for fixtures
    /// that need off-scale values.
    pub fn new_unchecked_scale(
        num_users: usize,
        num_items: usize,
        ratings: Vec<Rating<T>>,
        scale: RatingScale<T>,
    ) -> Result<Self> {
        Self::build(
            ratings,
            scale,
            Arc::new(IdMap::sequential(num_users)),
            Arc::new(IdMap::sequential(num_items)),
            false,
        )
    }

    pub fn with_ids(
        ratings: Vec<Rating<T>>,
        scale: RatingScale<T>,
        user_ids: Arc<IdMap>,
        item_ids: Arc<IdMap>,
    ) -> Result<Self> {
        Self::build(ratings, scale, user_ids, item_ids, true)
    }

    fn build(
        ratings: Vec<Rating<T>>,
        scale: RatingScale<T>,
        user_ids: Arc<IdMap>,
        item_ids: Arc<IdMap>,
        check_scale: bool,
    ) -> Result<Self> {
        let num_users = user_ids.len();
        let num_items = item_ids.len();
        let mut seen = HashSet::with_capacity(ratings.len());
        for (pos, r) in ratings.iter().enumerate() {
            if r.user >= num_users || r.item >= num_items {
                return Err(Error::IndexOutOfRange {
                    user: r.user,
                    item: r.item,
                    num_users,
                    num_items,
                });
            }
            if !r.value.is_finite() || (check_scale && !scale.contains(r.value)) {
                return Err(Error::OutOfScale {
                    line: pos as u64 + 1,
                    value: r.value.to_f64_lossy(),
                    min: scale.min.to_f64_lossy(),
                    max: scale.max.to_f64_lossy(),
                });
            }
            if !seen.insert((r.user, r.item)) {
                return Err(Error::DuplicateRating {
                    line: pos as u64 + 1,
                    user: user_ids.name(r.user).to_owned(),
                    item: item_ids.name(r.item).to_owned(),
                });
            }
        }
        let (by_user, by_item) = build_indexes(num_users, num_items, &ratings);
        Ok(RatingDataset {
            num_users,
            num_items,
            ratings,
            by_user,
            by_item,
            scale,
            user_ids,
            item_ids,
        })
    }

    /// A dataset over the same users, items and scale holding `ratings`.
    /// The caller guarantees the triples come from a valid dataset.
    fn sibling(&self, ratings: Vec<Rating<T>>) -> Self {
        let (by_user, by_item) = build_indexes(self.num_users, self.num_items, &ratings);
        RatingDataset {
            num_users: self.num_users,
            num_items: self.num_items,
            ratings,
            by_user,
            by_item,
            scale: self.scale,
            user_ids: Arc::clone(&self.user_ids),
            item_ids: Arc::clone(&self.item_ids),
        }
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_items(&self) -> usize {
        self.num_items
    }

    pub fn len(&self) -> usize {
        self.ratings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ratings.is_empty()
    }

    pub fn ratings(&self) -> &[Rating<T>] {
        &self.ratings
    }

    /// `(item, value)` pairs rated by `user`, sorted by item.
    pub fn user_ratings(&self, user: usize) -> &[(usize, T)] {
        &self.by_user[user]
    }

    /// `(user, value)` pairs for `item`, sorted by user.
    pub fn item_ratings(&self, item: usize) -> &[(usize, T)] {
        &self.by_item[item]
    }

    pub fn by_user(&self) -> &[Vec<(usize, T)>] {
        &self.by_user
    }

    pub fn by_item(&self) -> &[Vec<(usize, T)>] {
        &self.by_item
    }

    pub fn get(&self, user: usize, item: usize) -> Option<T> {
        let row = &self.by_user[user];
        row.binary_search_by_key(&item, |&(i, _)| i)
            .ok()
            .map(|k| row[k].1)
    }

    pub fn scale(&self) -> RatingScale<T> {
        self.scale
    }

    pub fn user_ids(&self) -> &IdMap {
        &self.user_ids
    }

    pub fn item_ids(&self) -> &IdMap {
        &self.item_ids
    }

    pub fn values(&self) -> Vec<T> {
        self.ratings.iter().map(|r| r.value).collect()
    }
}

type Row<T> = Vec<(usize, T)>;

fn build_indexes<T: Scalar>(
    num_users: usize,
    num_items: usize,
    ratings: &[Rating<T>],
) -> (Vec<Row<T>>, Vec<Row<T>>) {
    let mut by_user = vec![Vec::new(); num_users];
    let mut by_item = vec![Vec::new(); num_items];
    for r in ratings {
        by_user[r.user].push((r.item, r.value));
        by_item[r.item].push((r.user, r.value));
    }
    for row in by_user.iter_mut().chain(by_item.iter_mut()) {
        row.sort_unstable_by_key(|&(k, _)| k);
    }
    (by_user, by_item)
}

/// Loads a ratings CSV with header `user_id,item_id,rating`.
///
/// External ids are reindexed to contiguous 0-based indices in order of
/// first appearance.
pub fn load_csv<T: Scalar>(path: impl AsRef<Path>, scale: RatingScale<T>) -> Result<RatingDataset<T>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    read_csv(file, scale)
}

pub fn read_csv<T: Scalar>(reader: impl Read, scale: RatingScale<T>) -> Result<RatingDataset<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    let expected = ["user_id", "item_id", "rating"];
    if header.len() != 3 || header.iter().zip(expected).any(|(h, e)| h != e) {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header `user_id,item_id,rating`, found `{}`", header.iter().collect::<Vec<_>>().join(",")),
        });
    }

    let mut users = IdMap::new();
    let mut items = IdMap::new();
    let mut ratings = Vec::new();
    let mut seen = HashSet::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 3 {
            return Err(Error::Parse {
                line,
                message: format!("expected 3 fields, found {}", record.len()),
            });
        }
        let (user, item, raw) = (&record[0], &record[1], &record[2]);
        if user.is_empty() || item.is_empty() {
            return Err(Error::Parse {
                line,
                message: "empty id field".into(),
            });
        }
        let value: T = raw.parse().map_err(|_| Error::Parse {
            line,
            message: format!("invalid rating `{raw}`"),
        })?;
        if !value.is_finite() || !scale.contains(value) {
            return Err(Error::OutOfScale {
                line,
                value: value.to_f64_lossy(),
                min: scale.min.to_f64_lossy(),
                max: scale.max.to_f64_lossy(),
            });
        }
        let u = users.intern(user);
        let i = items.intern(item);
        if !seen.insert((u, i)) {
            return Err(Error::DuplicateRating {
                line,
                user: user.to_owned(),
                item: item.to_owned(),
            });
        }
        ratings.push(Rating::new(u, i, value));
    }
    if ratings.is_empty() {
        return Err(Error::NoRatings);
    }
    RatingDataset::with_ids(ratings, scale, Arc::new(users), Arc::new(items))
}

/// Writes `user_id,item_id,rating` using the dataset's external ids.
pub fn write_ratings_csv<T: Scalar>(dataset: &RatingDataset<T>, writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["user_id", "item_id", "rating"])?;
    for r in dataset.ratings() {
        w.write_record([
            dataset.user_ids().name(r.user),
            dataset.item_ids().name(r.item),
            &r.value.to_string(),
        ])?;
    }
    w.flush().map_err(|source| Error::Io {
        path: "<writer>".into(),
        source,
    })
}

/// Writes `user_id,item_id,prediction` rows with six decimals.
pub fn write_predictions_csv<T: Scalar>(
    dataset: &RatingDataset<T>,
    predictions: &[(usize, usize, T)],
    writer: impl Write,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["user_id", "item_id", "prediction"])?;
    for &(u, i, p) in predictions {
        w.write_record([
            dataset.user_ids().name(u),
            dataset.item_ids().name(i),
            &format!("{:.6}", p.to_f64_lossy()),
        ])?;
    }
    w.flush().map_err(|source| Error::Io {
        path: "<writer>".into(),
        source,
    })
}

/// Disjoint train/validation partition of a dataset.
#[derive(Clone, Debug)]
pub struct TrainValSplit<T> {
    pub train: RatingDataset<T>,
    pub validation: RatingDataset<T>,
    pub seed: u64,
    pub fraction: f64,
}

/// Number of training triples: `floor(fraction * n + 0.5)`.
pub fn train_size(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64) + 0.5).floor() as usize
}

/// Seeded random split. The triples are permuted with
/// [`crate::rng::shuffle`] under `seed`; the first `train_size` go to train.
pub fn split<T: Scalar>(dataset: &RatingDataset<T>, fraction: f64, seed: u64) -> Result<TrainValSplit<T>> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidFraction(fraction));
    }
    if dataset.is_empty() {
        return Err(Error::NoRatings);
    }
    let order = permutation(dataset.len(), &mut rng_from_seed(seed));
    let n_train = train_size(fraction, dataset.len());
    let pick = |idx: &[usize]| idx.iter().map(|&k| dataset.ratings[k]).collect::<Vec<_>>();
    Ok(TrainValSplit {
        train: dataset.sibling(pick(&order[..n_train])),
        validation: dataset.sibling(pick(&order[n_train..])),
        seed,
        fraction,
    })
}

/// Strict k-fold partition: one permutation under `seed`, cut into `folds`
/// contiguous chunks; fold `f` validates on chunk `f`.
pub fn kfold<T: Scalar>(dataset: &RatingDataset<T>, folds: usize, seed: u64) -> Result<Vec<TrainValSplit<T>>> {
    if folds < 2 {
        return Err(Error::InvalidParameter(format!(
            "k-fold needs at least 2 folds, got {folds}"
        )));
    }
    if dataset.len() < folds {
        return Err(Error::InvalidParameter(format!(
            "{} ratings cannot fill {folds} folds",
            dataset.len()
        )));
    }
    let n = dataset.len();
    let order = permutation(n, &mut rng_from_seed(seed));
    let bounds: Vec<usize> = (0..=folds).map(|f| f * n / folds).collect();
    Ok((0..folds)
        .map(|f| {
            let (lo, hi) = (bounds[f], bounds[f + 1]);
            let val = order[lo..hi].iter().map(|&k| dataset.ratings[k]).collect();
            let train = order[..lo]
                .iter()
                .chain(&order[hi..])
                .map(|&k| dataset.ratings[k])
                .collect();
            TrainValSplit {
                train: dataset.sibling(train),
                validation: dataset.sibling(val),
                seed,
                fraction: (n - (hi - lo)) as f64 / n as f64,
            }
        })
        .collect())
}

/// Global, per-user and per-item means of a training set.
///
/// Users and items with no training ratings get the global mean, so their
/// offsets are zero.
#[derive(Clone, Debug, PartialEq)]
pub struct BaselineStats<T> {
    pub global_mean: T,
    pub user_means: Vec<T>,
    pub item_means: Vec<T>,
    pub user_offsets: Vec<T>,
    pub item_offsets: Vec<T>,
    pub user_counts: Vec<usize>,
    pub item_counts: Vec<usize>,
}

impl<T: Scalar> BaselineStats<T> {
    /// `μ + b_u + b_i`.
    pub fn baseline(&self, user: usize, item: usize) -> T {
        self.global_mean + self.user_offsets[user] + self.item_offsets[item]
    }
}

pub fn baseline_stats<T: Scalar>(train: &RatingDataset<T>) -> Result<BaselineStats<T>> {
    if train.is_empty() {
        return Err(Error::NoRatings);
    }
    let total: T = train.ratings().iter().map(|r| r.value).sum();
    let global_mean = total / T::from_count(train.len());
    let means = |rows: &[Vec<(usize, T)>]| -> (Vec<T>, Vec<usize>) {
        rows.iter()
            .map(|row| {
                if row.is_empty() {
                    (global_mean, 0)
                } else {
                    let s: T = row.iter().map(|&(_, v)| v).sum();
                    (s / T::from_count(row.len()), row.len())
                }
            })
            .unzip()
    };
    let (user_means, user_counts) = means(train.by_user());
    let (item_means, item_counts) = means(train.by_item());
    let offsets = |m: &[T], counts: &[usize]| -> Vec<T> {
        m.iter()
            .zip(counts)
            .map(|(&x, &c)| if c == 0 { T::zero() } else { x - global_mean })
            .collect()
    };
    Ok(BaselineStats {
        user_offsets: offsets(&user_means, &user_counts),
        item_offsets: offsets(&item_means, &item_counts),
        global_mean,
        user_means,
        item_means,
        user_counts,
        item_counts,
    })
}
