//! Fixtures and brute-force reference implementations shared by the
//! integration tests. Nothing here calls into the library's similarity or
//! prediction code.

#![allow(dead_code)]

use ratebench_core::rng::{bounded, rng_from_seed, unit_f64, Rng};
use ratebench_core::{Metric, Rating, RatingDataset, RatingScale};

/// Dense `Option` grid: `grid[u][i]`.
pub type Grid = Vec<Vec<Option<f64>>>;

/// Random integer-star ratings with each cell observed with probability
/// `density`.
pub fn random_grid(rng: &mut Rng, users: usize, items: usize, density: f64) -> Grid {
    (0..users)
        .map(|_| {
            (0..items)
                .map(|_| (unit_f64(rng) < density).then(|| (1 + bounded(rng, 5)) as f64))
                .collect()
        })
        .collect()
}

pub fn grid_to_dataset(grid: &Grid) -> RatingDataset<f64> {
    let users = grid.len();
    let items = grid.first().map_or(0, Vec::len);
    let mut ratings = Vec::new();
    for (u, row) in grid.iter().enumerate() {
        for (i, v) in row.iter().enumerate() {
            if let Some(v) = v {
                ratings.push(Rating::new(u, i, *v));
            }
        }
    }
    RatingDataset::new(users, items, ratings, RatingScale::stars()).unwrap()
}

pub fn transpose(grid: &Grid) -> Grid {
    let items = grid.first().map_or(0, Vec::len);
    (0..items).map(|i| grid.iter().map(|row| row[i]).collect()).collect()
}

pub fn seeded(seed: u64) -> Rng {
    rng_from_seed(seed)
}

pub fn row_mean(row: &[Option<f64>]) -> Option<f64> {
    let mut sum = 0.0;
    let mut n = 0;
    for v in row.iter().flatten() {
        sum += v;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

/// Double loop over all columns: similarity and co-rating support of rows
/// `a` and `b`.
pub fn naive_similarity(grid: &Grid, a: usize, b: usize, metric: Metric) -> (f64, usize) {
    let (ma, mb) = match metric {
        Metric::Pearson => (row_mean(&grid[a]).unwrap_or(0.0), row_mean(&grid[b]).unwrap_or(0.0)),
        Metric::Cosine => (0.0, 0.0),
    };
    let mut cross = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    let mut support = 0;
    for (&xa, &xb) in grid[a].iter().zip(&grid[b]) {
        if let (Some(x), Some(y)) = (xa, xb) {
            let (x, y) = (x - ma, y - mb);
            cross += x * y;
            na += x * x;
            nb += y * y;
            support += 1;
        }
    }
    let min_support = if metric == Metric::Pearson { 2 } else { 1 };
    if support < min_support || na == 0.0 || nb == 0.0 {
        return (0.0, support);
    }
    (cross / (na * nb).sqrt(), support)
}

/// User-based prediction written directly from its definition.
pub fn naive_ubcf(grid: &Grid, user: usize, item: usize, metric: Metric, k: usize) -> f64 {
    let all: Vec<f64> = grid.iter().flatten().flatten().copied().collect();
    let global = all.iter().sum::<f64>() / all.len() as f64;
    let column: Vec<Option<f64>> = grid.iter().map(|row| row[item]).collect();
    let item_mean = row_mean(&column).unwrap_or(global);
    let Some(user_mean) = row_mean(&grid[user]) else {
        return item_mean;
    };
    let mut cands = Vec::new();
    for b in 0..grid.len() {
        if b == user {
            continue;
        }
        if let Some(r) = grid[b][item] {
            let (w, support) = naive_similarity(grid, user, b, metric);
            if support >= 1 {
                cands.push((b, w, r));
            }
        }
    }
    cands.sort_by(|x, y| y.1.partial_cmp(&x.1).unwrap().then(x.0.cmp(&y.0)));
    cands.truncate(k);
    let mut num = 0.0;
    let mut den = 0.0;
    for (b, w, r) in cands {
        num += w * (r - row_mean(&grid[b]).unwrap());
        den += w.abs();
    }
    if den == 0.0 {
        user_mean
    } else {
        user_mean + num / den
    }
}
