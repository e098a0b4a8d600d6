//! Feature importance from an ensemble of extremely randomized regression trees.
//!
//! Each split draws a random subset of candidate features and one uniform
//! random threshold per candidate; the best candidate by variance reduction
//! wins. Importance is the mean decrease in impurity, normalised per tree and
//! then over the ensemble.
//!
//! Randomness is keyed by a content fingerprint of each feature column rather
//! than by its position, so permuting the columns permutes the scores.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::ensure_finite;
use crate::features::LabeledDataset;
use crate::seed::{derive, splitmix64};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeParams {
    pub n_trees: usize,
    /// Candidate features per split; `None` means `floor(sqrt(n_features))`.
    pub max_features: Option<usize>,
    pub min_samples_leaf: usize,
    pub max_depth: Option<usize>,
    pub seed: u64,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_features: None,
            min_samples_leaf: 2,
            max_depth: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Importance {
    pub scores: Vec<f64>,
    /// Set when no split was possible, e.g. for a constant target.
    pub warning: Option<String>,
}

pub fn compute_feature_importance(
    ds: &LabeledDataset,
    quality: usize,
    params: &TreeParams,
) -> Result<Importance> {
    if ds.is_empty() {
        return Err(Error::Domain("importance on an empty dataset".into()));
    }
    let y = ds.quality_column(quality)?;
    let rows: Vec<&[f64]> = ds.features.iter().map(|f| &f[..]).collect();
    importance_from_rows(&rows, &y, params)
}

/// Column-major view used by the tree builder.
struct Columns {
    cols: Vec<Vec<f64>>,
    fingerprints: Vec<u64>,
}

impl Columns {
    fn new(rows: &[&[f64]]) -> Self {
        let nf = rows.first().map_or(0, |r| r.len());
        let cols: Vec<Vec<f64>> = (0..nf)
            .map(|j| rows.iter().map(|r| r[j]).collect())
            .collect();
        let fingerprints = cols
            .iter()
            .map(|c| {
                c.iter()
                    .fold(0x5EED_u64, |h, v| splitmix64(h ^ v.to_bits()))
            })
            .collect();
        Self { cols, fingerprints }
    }
}

pub fn importance_from_rows(rows: &[&[f64]], y: &[f64], params: &TreeParams) -> Result<Importance> {
    if rows.is_empty() || rows.len() != y.len() {
        return Err(Error::Contract(format!(
            "importance needs aligned non-empty rows ({} rows, {} targets)",
            rows.len(),
            y.len()
        )));
    }
    let nf = rows[0].len();
    if rows.iter().any(|r| r.len() != nf) {
        return Err(Error::Contract("ragged feature rows".into()));
    }
    for r in rows {
        ensure_finite("importance features", r)?;
    }
    ensure_finite("importance target", y)?;
    if params.n_trees == 0 || params.min_samples_leaf == 0 {
        return Err(Error::Config(
            "n_trees and min_samples_leaf must be positive".into(),
        ));
    }

    let y0 = y[0];
    if y.iter().all(|&v| v == y0) {
        return Ok(Importance {
            scores: vec![0.0; nf],
            warning: Some("constant target: no split possible".into()),
        });
    }

    let data = Columns::new(rows);
    let k = params
        .max_features
        .unwrap_or_else(|| (nf as f64).sqrt().floor() as usize)
        .clamp(1, nf.max(1));

    let per_tree: Vec<Vec<f64>> = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            grow_tree(
                &data,
                y,
                k,
                params,
                derive(params.seed, "extra-tree", t as u64),
            )
        })
        .collect();

    let mut scores = vec![0.0; nf];
    for tree in &per_tree {
        let s: f64 = tree.iter().sum();
        if s > 0.0 {
            for (a, v) in scores.iter_mut().zip(tree) {
                *a += v / s;
            }
        }
    }
    let total: f64 = scores.iter().sum();
    if total <= 0.0 {
        return Ok(Importance {
            scores,
            warning: Some("no tree produced a split".into()),
        });
    }
    for s in &mut scores {
        *s /= total;
    }
    Ok(Importance {
        scores,
        warning: None,
    })
}

fn unit_interval(h: u64) -> f64 {
    (h >> 11) as f64 / (1u64 << 53) as f64
}

fn grow_tree(data: &Columns, y: &[f64], k: usize, params: &TreeParams, seed: u64) -> Vec<f64> {
    let nf = data.cols.len();
    let n = y.len() as f64;
    let mut imp = vec![0.0; nf];
    let mut idx: Vec<usize> = (0..y.len()).collect();
    // (start, end, depth, node seed) over `idx`.
    let mut stack = vec![(0usize, idx.len(), 0usize, seed)];
    let min_leaf = params.min_samples_leaf;
    let mut order: Vec<(u64, usize)> = Vec::with_capacity(nf);

    while let Some((lo, hi, depth, node_seed)) = stack.pop() {
        let m = hi - lo;
        if m < 2 * min_leaf || params.max_depth.is_some_and(|d| depth >= d) {
            continue;
        }
        let node = &idx[lo..hi];
        let (s, ss) = node
            .iter()
            .fold((0.0, 0.0), |(s, ss), &i| (s + y[i], ss + y[i] * y[i]));
        let node_sse = ss - s * s / m as f64;
        if node_sse <= 1e-12 * ss.abs().max(1e-300) {
            continue;
        }

        order.clear();
        order.extend((0..nf).map(|f| (splitmix64(node_seed ^ data.fingerprints[f]), f)));
        order.sort_unstable();

        let mut visited = 0;
        let mut best: Option<(f64, usize, f64)> = None;
        for &(key, f) in &order {
            if visited == k {
                break;
            }
            let col = &data.cols[f];
            let (fmin, fmax) = node
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &i| {
                    (a.min(col[i]), b.max(col[i]))
                });
            if fmax <= fmin {
                continue;
            }
            visited += 1;
            let thr = fmin + unit_interval(splitmix64(key)) * (fmax - fmin);
            let thr = if thr >= fmax { fmin } else { thr };
            let (mut nl, mut sl, mut ssl) = (0usize, 0.0, 0.0);
            for &i in node {
                if col[i] <= thr {
                    nl += 1;
                    sl += y[i];
                    ssl += y[i] * y[i];
                }
            }
            let nr = m - nl;
            if nl < min_leaf || nr < min_leaf {
                continue;
            }
            let (sr, ssr) = (s - sl, ss - ssl);
            let sse_l = ssl - sl * sl / nl as f64;
            let sse_r = ssr - sr * sr / nr as f64;
            let gain = node_sse - sse_l - sse_r;
            if best.is_none_or(|(g, _, _)| gain > g) {
                best = Some((gain, f, thr));
            }
        }

        let Some((gain, f, thr)) = best else { continue };
        imp[f] += gain.max(0.0) / n;
        let col = &data.cols[f];
        let slice = &mut idx[lo..hi];
        let mut split = 0;
        for j in 0..slice.len() {
            if col[slice[j]] <= thr {
                slice.swap(j, split);
                split += 1;
            }
        }
        let mid = lo + split;
        stack.push((
            lo,
            mid,
            depth + 1,
            splitmix64(node_seed ^ 0xA5A5_0000_0000_0001),
        ));
        stack.push((
            mid,
            hi,
            depth + 1,
            splitmix64(node_seed ^ 0x5A5A_0000_0000_0002),
        ));
    }
    imp
}
