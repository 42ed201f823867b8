//! Pairwise similarity over co-rated supports and top-k neighbor sets.
//!
//! Both metrics sum over the co-rated support only. Pearson centers each
//! entity by the mean of *all* its training ratings, not just the co-rated
//! ones. Degenerate pairs (Pearson support below 2, cosine support 0, or a
//! zero norm on either side) have similarity 0.

use std::cmp::Ordering;
use std::io::Write;

use rayon::prelude::*;

use crate::data::RatingDataset;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Axis {
    User,
    Item,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Metric {
    Pearson,
    Cosine,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Pearson => "pearson",
            Metric::Cosine => "cosine",
        }
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pearson" => Ok(Metric::Pearson),
            "cosine" => Ok(Metric::Cosine),
            other => Err(Error::InvalidParameter(format!(
                "unknown similarity metric `{other}` (expected pearson or cosine)"
            ))),
        }
    }
}

/// A similarity together with the number of co-rating entities behind it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimilarityValue<T> {
    pub value: T,
    pub support: usize,
}

impl<T: Scalar> SimilarityValue<T> {
    fn zero(support: usize) -> Self {
        SimilarityValue {
            value: T::zero(),
            support,
        }
    }
}

/// Running sums for one entity pair.
#[derive(Clone, Copy, Debug, Default)]
struct PairSums<T> {
    cross: T,
    norm_a: T,
    norm_b: T,
    support: usize,
}

impl<T: Scalar> PairSums<T> {
    #[inline]
    fn add(&mut self, xa: T, xb: T) {
        self.cross += xa * xb;
        self.norm_a += xa * xa;
        self.norm_b += xb * xb;
        self.support += 1;
    }

    #[inline]
    fn finish(self, metric: Metric) -> SimilarityValue<T> {
        let min_support = match metric {
            Metric::Pearson => 2,
            Metric::Cosine => 1,
        };
        if self.support < min_support {
            return SimilarityValue::zero(self.support);
        }
        let denom = (self.norm_a * self.norm_b).sqrt();
        if denom == T::zero() {
            return SimilarityValue::zero(self.support);
        }
        SimilarityValue {
            value: self.cross / denom,
            support: self.support,
        }
    }
}

/// Per-entity rating vectors along one axis, transformed for a metric
/// (mean-centered for Pearson, raw for cosine), plus their transposition.
pub(crate) struct Profiles<T> {
    rows: Vec<Vec<(usize, T)>>,
    cols: Vec<Vec<(usize, T)>>,
    metric: Metric,
}

impl<T: Scalar> Profiles<T> {
    pub(crate) fn new(train: &RatingDataset<T>, axis: Axis, metric: Metric) -> Self {
        let (source, n_keys) = match axis {
            Axis::User => (train.by_user(), train.num_items()),
            Axis::Item => (train.by_item(), train.num_users()),
        };
        let rows: Vec<Vec<(usize, T)>> = source
            .iter()
            .map(|row| match metric {
                Metric::Cosine => row.clone(),
                Metric::Pearson => {
                    if row.is_empty() {
                        return Vec::new();
                    }
                    let mean = row.iter().map(|&(_, v)| v).sum::<T>() / T::from_count(row.len());
                    row.iter().map(|&(k, v)| (k, v - mean)).collect()
                }
            })
            .collect();
        let mut cols = vec![Vec::new(); n_keys];
        for (e, row) in rows.iter().enumerate() {
            for &(k, x) in row {
                cols[k].push((e, x));
            }
        }
        Profiles { rows, cols, metric }
    }

    pub(crate) fn len(&self) -> usize {
        self.rows.len()
    }

    /// Sorted-merge evaluation for one pair.
    fn pair(&self, a: usize, b: usize) -> SimilarityValue<T> {
        let (ra, rb) = (&self.rows[a], &self.rows[b]);
        let mut sums = PairSums::default();
        let (mut i, mut j) = (0, 0);
        while i < ra.len() && j < rb.len() {
            match ra[i].0.cmp(&rb[j].0) {
                Ordering::Less => i += 1,
                Ordering::Greater => j += 1,
                Ordering::Equal => {
                    sums.add(ra[i].1, rb[j].1);
                    i += 1;
                    j += 1;
                }
            }
        }
        sums.finish(self.metric)
    }

    /// Similarities from `a` to every entity with co-rating support ≥ 1,
    /// restricted to `b > a` when `upper_only`. Accumulation order matches
    /// [`Profiles::pair`], so values are bit-identical to it.
    fn row(&self, a: usize, upper_only: bool, scratch: &mut Vec<PairSums<T>>, touched: &mut Vec<usize>) -> Vec<(usize, SimilarityValue<T>)> {
        scratch.resize(self.rows.len(), PairSums::default());
        touched.clear();
        for &(k, xa) in &self.rows[a] {
            for &(b, xb) in &self.cols[k] {
                if b == a || (upper_only && b < a) {
                    continue;
                }
                let s = &mut scratch[b];
                if s.support == 0 {
                    touched.push(b);
                }
                s.add(xa, xb);
            }
        }
        touched.sort_unstable();
        touched
            .iter()
            .map(|&b| {
                let v = std::mem::take(&mut scratch[b]).finish(self.metric);
                (b, v)
            })
            .collect()
    }
}

fn check_pair(train_len: usize, a: usize, b: usize) {
    assert_ne!(a, b, "similarity of an entity with itself");
    assert!(a < train_len && b < train_len, "entity index out of range");
}

/// Pearson correlation over the co-rated support of `a` and `b`.
pub fn pearson<T: Scalar>(a: usize, b: usize, train: &RatingDataset<T>, axis: Axis) -> SimilarityValue<T> {
    pair_similarity(a, b, train, axis, Metric::Pearson)
}

/// Raw-rating cosine over the co-rated support of `a` and `b`.
pub fn cosine<T: Scalar>(a: usize, b: usize, train: &RatingDataset<T>, axis: Axis) -> SimilarityValue<T> {
    pair_similarity(a, b, train, axis, Metric::Cosine)
}

pub fn pair_similarity<T: Scalar>(a: usize, b: usize, train: &RatingDataset<T>, axis: Axis, metric: Metric) -> SimilarityValue<T> {
    let rows = match axis {
        Axis::User => train.by_user(),
        Axis::Item => train.by_item(),
    };
    check_pair(rows.len(), a, b);
    let centered = |e: usize| -> Vec<(usize, T)> {
        let row = &rows[e];
        match metric {
            Metric::Cosine => row.clone(),
            Metric::Pearson => {
                if row.is_empty() {
                    return Vec::new();
                }
                let mean = row.iter().map(|&(_, v)| v).sum::<T>() / T::from_count(row.len());
                row.iter().map(|&(k, v)| (k, v - mean)).collect()
            }
        }
    };
    let p = Profiles {
        rows: vec![centered(a), centered(b)],
        cols: Vec::new(),
        metric,
    };
    p.pair(0, 1)
}

/// `n / (n + λ₁) · ρ`; zero when `n = 0`.
pub fn shrunk_similarity<T: Scalar>(rho: T, n: usize, lambda1: T) -> T {
    if n == 0 {
        return T::zero();
    }
    let n = T::from_count(n);
    n / (n + lambda1) * rho
}

/// Descending weight, ascending id.
fn by_weight_then_id<T: Scalar>(a: &(usize, T), b: &(usize, T)) -> Ordering {
    b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then(a.0.cmp(&b.0))
}

/// Per-entity top-k neighbor lists in compressed row layout.
#[derive(Clone, Debug, PartialEq)]
pub struct NeighborSets<T> {
    offsets: Vec<usize>,
    ids: Vec<usize>,
    weights: Vec<T>,
    k: usize,
}

impl<T: Scalar> NeighborSets<T> {
    /// Builds from per-entity lists that are already sorted and truncated.
    pub fn from_lists(lists: Vec<Vec<(usize, T)>>, k: usize) -> Self {
        let mut offsets = Vec::with_capacity(lists.len() + 1);
        offsets.push(0);
        let mut ids = Vec::new();
        let mut weights = Vec::new();
        for list in lists {
            for (id, w) in list {
                ids.push(id);
                weights.push(w);
            }
            offsets.push(ids.len());
        }
        NeighborSets {
            offsets,
            ids,
            weights,
            k,
        }
    }

    pub fn num_entities(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Total number of (entity, neighbor) pairs.
    pub fn num_pairs(&self) -> usize {
        self.ids.len()
    }

    /// Position range of `e`'s list inside the flat pair arrays.
    pub fn range(&self, e: usize) -> std::ops::Range<usize> {
        self.offsets[e]..self.offsets[e + 1]
    }

    pub fn neighbors(&self, e: usize) -> &[usize] {
        &self.ids[self.range(e)]
    }

    pub fn weights(&self, e: usize) -> &[T] {
        &self.weights[self.range(e)]
    }

    pub fn all_ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn all_weights(&self) -> &[T] {
        &self.weights
    }

    pub fn list(&self, e: usize) -> Vec<(usize, T)> {
        self.neighbors(e)
            .iter()
            .copied()
            .zip(self.weights(e).iter().copied())
            .collect()
    }
}

/// Top-`k` neighbors of every entity along `axis`, ranked by (optionally
/// shrunk) similarity. Candidates need co-rating support ≥ 1; ties go to
/// the lower id. `k = 0` yields empty lists.
pub fn build_neighbor_sets<T: Scalar>(
    train: &RatingDataset<T>,
    axis: Axis,
    metric: Metric,
    shrink: Option<T>,
    k: usize,
) -> NeighborSets<T> {
    let profiles = Profiles::new(train, axis, metric);
    let lists: Vec<Vec<(usize, T)>> = (0..profiles.len())
        .into_par_iter()
        .map_init(
            || (Vec::new(), Vec::new()),
            |(scratch, touched), a| {
                if k == 0 {
                    return Vec::new();
                }
                let mut cands: Vec<(usize, T)> = profiles
                    .row(a, false, scratch, touched)
                    .into_iter()
                    .map(|(b, s)| {
                        let w = match shrink {
                            Some(l) => shrunk_similarity(s.value, s.support, l),
                            None => s.value,
                        };
                        (b, w)
                    })
                    .collect();
                if cands.len() > k {
                    cands.select_nth_unstable_by(k - 1, by_weight_then_id);
                    cands.truncate(k);
                }
                cands.sort_unstable_by(by_weight_then_id);
                cands
            },
        )
        .collect();
    NeighborSets::from_lists(lists, k)
}

/// All-pairs similarities stored as a packed upper triangle.
#[derive(Clone, Debug)]
pub struct SimilarityMatrix<T> {
    n: usize,
    values: Vec<T>,
    supports: Vec<u32>,
    metric: Metric,
}

impl<T: Scalar> SimilarityMatrix<T> {
    pub fn compute(train: &RatingDataset<T>, axis: Axis, metric: Metric) -> Self {
        let profiles = Profiles::new(train, axis, metric);
        let n = profiles.len();
        let rows: Vec<(Vec<T>, Vec<u32>)> = (0..n)
            .into_par_iter()
            .map_init(
                || (Vec::new(), Vec::new()),
                |(scratch, touched), a| {
                    let width = n - a - 1;
                    let mut vals = vec![T::zero(); width];
                    let mut sups = vec![0u32; width];
                    for (b, s) in profiles.row(a, true, scratch, touched) {
                        vals[b - a - 1] = s.value;
                        sups[b - a - 1] = s.support as u32;
                    }
                    (vals, sups)
                },
            )
            .collect();
        let mut values = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        let mut supports = Vec::with_capacity(values.capacity());
        for (v, s) in rows {
            values.extend(v);
            supports.extend(s);
        }
        SimilarityMatrix {
            n,
            values,
            supports,
            metric,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    #[inline]
    fn index(&self, a: usize, b: usize) -> usize {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        // rows 0..lo hold (n-1) + (n-2) + ... + (n-lo) entries
        lo * (2 * self.n - lo - 1) / 2 + (hi - lo - 1)
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> SimilarityValue<T> {
        assert_ne!(a, b, "similarity of an entity with itself");
        let k = self.index(a, b);
        SimilarityValue {
            value: self.values[k],
            support: self.supports[k] as usize,
        }
    }

    /// Writes `entity_a,entity_b,similarity,support` for pairs with support ≥ 1.
    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["entity_a", "entity_b", "similarity", "support"])?;
        for a in 0..self.n {
            for b in a + 1..self.n {
                let s = self.get(a, b);
                if s.support > 0 {
                    w.write_record([a.to_string(), b.to_string(), s.value.to_string(), s.support.to_string()])?;
                }
            }
        }
        w.flush().map_err(|source| Error::Io {
            path: "<writer>".into(),
            source,
        })
    }
}
