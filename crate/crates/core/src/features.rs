//! Feature composition, selection and scaling.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::{AdaptationSpace, FeatureVector, QualityVector, UncertaintyVector};
use crate::error::ensure_finite;
use crate::{Error, Result};

/// One vector per option: the option's configuration followed by the
/// shared uncertainty readings.
pub fn compose_features(space: &AdaptationSpace, u: &UncertaintyVector) -> Vec<FeatureVector> {
    let tail = u.values();
    space
        .options()
        .iter()
        .map(|o| {
            let mut v = Vec::with_capacity(o.config.len() + tail.len());
            v.extend_from_slice(&o.config);
            v.extend_from_slice(&tail);
            FeatureVector(v)
        })
        .collect()
}

/// Sorted set of retained raw-feature indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureMask {
    indices: Vec<usize>,
}

impl FeatureMask {
    /// Builds a mask over vectors of length `len`. Duplicates are merged.
    pub fn new(mut indices: Vec<usize>, len: usize) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        if indices.is_empty() {
            return Err(Error::Domain("feature mask is empty".into()));
        }
        if let Some(&i) = indices.iter().find(|&&i| i >= len) {
            return Err(Error::Domain(format!(
                "mask index {i} out of range for {len} features"
            )));
        }
        Ok(Self { indices })
    }

    pub fn full(len: usize) -> Self {
        Self {
            indices: (0..len).collect(),
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn check(&self, len: usize) -> Result<()> {
        match self.indices.last() {
            Some(&i) if i >= len => Err(Error::Domain(format!(
                "mask index {i} out of range for {len} features"
            ))),
            _ => Ok(()),
        }
    }

    pub fn apply(&self, raw: &[f64]) -> Result<FeatureVector> {
        self.check(raw.len())?;
        Ok(FeatureVector(
            self.indices.iter().map(|&i| raw[i]).collect(),
        ))
    }
}

pub fn select_features(
    lambdas: &[FeatureVector],
    mask: &FeatureMask,
) -> Result<Vec<FeatureVector>> {
    lambdas.iter().map(|l| mask.apply(l)).collect()
}

/// Indices whose importance reaches `threshold` for at least one score list.
pub fn mask_from_importance(
    scores: &[Vec<f64>],
    threshold: f64,
    len: usize,
) -> Result<FeatureMask> {
    let keep: Vec<usize> = (0..len)
        .filter(|&i| {
            scores
                .iter()
                .any(|s| s.get(i).is_some_and(|&v| v >= threshold))
        })
        .collect();
    FeatureMask::new(keep, len)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScalerKind {
    None,
    MinMax,
    MaxAbs,
    Standard,
}

impl std::str::FromStr for ScalerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "min-max" => Ok(Self::MinMax),
            "max-abs" => Ok(Self::MaxAbs),
            "standard" => Ok(Self::Standard),
            _ => Err(Error::Config(format!("unknown scaler kind '{s}'"))),
        }
    }
}

/// Running per-feature statistics: count, Welford mean and M2, min, max.
/// `min` and `max` are 0 until the first sample.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
    pub min: f64,
    pub max: f64,
}

impl FeatureStats {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
        if self.count == 1 {
            (self.min, self.max) = (x, x);
        } else {
            self.min = self.min.min(x);
            self.max = self.max.max(x);
        }
    }

    /// Population variance.
    pub fn variance(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.m2 / self.count as f64).max(0.0)
        }
    }

    pub fn max_abs(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.min.abs().max(self.max.abs())
        }
    }
}

/// A fitted feature transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub kind: ScalerKind,
    pub stats: Vec<FeatureStats>,
}

impl Scaler {
    pub fn unfitted(kind: ScalerKind, dim: usize) -> Self {
        Self {
            kind,
            stats: vec![FeatureStats::default(); dim],
        }
    }

    pub fn fit(kind: ScalerKind, lambdas: &[FeatureVector]) -> Result<Self> {
        let first = lambdas
            .first()
            .ok_or_else(|| Error::Domain("cannot fit a scaler on no data".into()))?;
        let mut s = Self::unfitted(kind, first.len());
        for l in lambdas {
            s.update(l)?;
        }
        Ok(s)
    }

    pub fn dim(&self) -> usize {
        self.stats.len()
    }

    /// Folds one more sample into the running statistics.
    pub fn update(&mut self, lambda: &[f64]) -> Result<()> {
        self.check_dim(lambda.len())?;
        ensure_finite("scaler sample", lambda)?;
        for (st, &x) in self.stats.iter_mut().zip(lambda) {
            st.push(x);
        }
        Ok(())
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(Error::Contract(format!(
                "scaler fitted on {} features, got {len}",
                self.dim()
            )));
        }
        Ok(())
    }

    /// Offset and divisor for feature `i`, or `None` when it passes through.
    fn affine(&self, i: usize) -> Option<(f64, f64)> {
        let st = &self.stats[i];
        if st.count == 0 {
            return None;
        }
        let (offset, div) = match self.kind {
            ScalerKind::None => return None,
            ScalerKind::MinMax => (st.min, st.max - st.min),
            ScalerKind::MaxAbs => (0.0, st.max_abs()),
            ScalerKind::Standard => (st.mean, st.variance().sqrt()),
        };
        (div > 0.0 && div.is_finite()).then_some((offset, div))
    }

    /// Features left unscaled because their range or spread is zero.
    pub fn passthrough(&self) -> Vec<usize> {
        if self.kind == ScalerKind::None {
            return Vec::new();
        }
        (0..self.dim())
            .filter(|&i| self.affine(i).is_none())
            .collect()
    }

    pub fn apply(&self, lambda: &[f64]) -> Result<FeatureVector> {
        let mut v = lambda.to_vec();
        self.apply_in_place(&mut v)?;
        Ok(FeatureVector(v))
    }

    pub fn apply_in_place(&self, x: &mut [f64]) -> Result<()> {
        self.check_dim(x.len())?;
        if self.kind == ScalerKind::None {
            return Ok(());
        }
        for (i, xi) in x.iter_mut().enumerate() {
            if let Some((o, d)) = self.affine(i) {
                *xi = (*xi - o) / d;
            }
        }
        Ok(())
    }
}

/// Paired feature and quality rows, tagged with the cycle and option that
/// produced them.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabeledDataset {
    pub feature_names: Vec<String>,
    pub quality_names: Vec<String>,
    pub cycles: Vec<usize>,
    pub options: Vec<usize>,
    pub features: Vec<FeatureVector>,
    pub qualities: Vec<QualityVector>,
}

impl LabeledDataset {
    pub fn new(feature_names: Vec<String>, quality_names: Vec<String>) -> Self {
        Self {
            feature_names,
            quality_names,
            ..Default::default()
        }
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn push(
        &mut self,
        cycle: usize,
        option: usize,
        f: FeatureVector,
        q: QualityVector,
    ) -> Result<()> {
        if f.len() != self.feature_names.len() || q.len() != self.quality_names.len() {
            return Err(Error::Contract(format!(
                "row has {} features and {} qualities, dataset expects {} and {}",
                f.len(),
                q.len(),
                self.feature_names.len(),
                self.quality_names.len()
            )));
        }
        self.cycles.push(cycle);
        self.options.push(option);
        self.features.push(f);
        self.qualities.push(q);
        Ok(())
    }

    pub fn quality_column(&self, j: usize) -> Result<Vec<f64>> {
        if j >= self.quality_names.len() {
            return Err(Error::Domain(format!("quality index {j} out of range")));
        }
        Ok(self.qualities.iter().map(|q| q[j]).collect())
    }

    /// Rows at `rows`, in that order.
    pub fn subset(&self, rows: &[usize]) -> Self {
        Self {
            feature_names: self.feature_names.clone(),
            quality_names: self.quality_names.clone(),
            cycles: rows.iter().map(|&i| self.cycles[i]).collect(),
            options: rows.iter().map(|&i| self.options[i]).collect(),
            features: rows.iter().map(|&i| self.features[i].clone()).collect(),
            qualities: rows.iter().map(|&i| self.qualities[i].clone()).collect(),
        }
    }

    /// Keeps only the masked feature columns.
    pub fn masked(&self, mask: &FeatureMask) -> Result<Self> {
        mask.check(self.feature_names.len())?;
        Ok(Self {
            feature_names: mask
                .indices()
                .iter()
                .map(|&i| self.feature_names[i].clone())
                .collect(),
            quality_names: self.quality_names.clone(),
            cycles: self.cycles.clone(),
            options: self.options.clone(),
            features: select_features(&self.features, mask)?,
            qualities: self.qualities.clone(),
        })
    }

    /// Number of distinct cycles present.
    pub fn n_cycles(&self) -> usize {
        let mut c = self.cycles.clone();
        c.sort_unstable();
        c.dedup();
        c.len()
    }

    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["cycle".to_string(), "option".to_string()];
        h.extend(self.feature_names.iter().map(|n| format!("f_{n}")));
        h.extend(self.quality_names.iter().map(|n| format!("q_{n}")));
        h
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(self.header())?;
        let mut rec = Vec::with_capacity(2 + self.feature_names.len() + self.quality_names.len());
        for i in 0..self.len() {
            rec.clear();
            rec.push(self.cycles[i].to_string());
            rec.push(self.options[i].to_string());
            rec.extend(self.features[i].iter().map(|v| v.to_string()));
            rec.extend(self.qualities[i].iter().map(|v| v.to_string()));
            wr.write_record(&rec)?;
        }
        wr.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let header = rd.headers()?.clone();
        let mut fcols = Vec::new();
        let mut qcols = Vec::new();
        let (mut ccol, mut ocol) = (None, None);
        let mut ds = LabeledDataset::default();
        for (i, h) in header.iter().enumerate() {
            if let Some(n) = h.strip_prefix("f_") {
                fcols.push(i);
                ds.feature_names.push(n.to_string());
            } else if let Some(n) = h.strip_prefix("q_") {
                qcols.push(i);
                ds.quality_names.push(n.to_string());
            } else if h == "cycle" {
                ccol = Some(i);
            } else if h == "option" {
                ocol = Some(i);
            }
        }
        let num = |rec: &csv::StringRecord, i: usize| -> Result<f64> {
            rec[i]
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::Domain(format!("column '{}': {e}", &header[i])))
        };
        for (row, rec) in rd.records().enumerate() {
            let rec = rec?;
            let f = fcols
                .iter()
                .map(|&i| num(&rec, i))
                .collect::<Result<Vec<_>>>()?;
            let q = qcols
                .iter()
                .map(|&i| num(&rec, i))
                .collect::<Result<Vec<_>>>()?;
            let cycle = match ccol {
                Some(i) => num(&rec, i)? as usize,
                None => 0,
            };
            let option = match ocol {
                Some(i) => num(&rec, i)? as usize,
                None => row,
            };
            ds.push(cycle, option, FeatureVector(f), QualityVector(q))?;
        }
        Ok(ds)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(std::io::BufReader::new(f))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Dimension;
    use proptest::prelude::*;

    fn fv(v: &[f64]) -> FeatureVector {
        FeatureVector(v.to_vec())
    }

    #[test]
    fn compose_puts_config_before_uncertainties() {
        let space = AdaptationSpace::enumerate(vec![Dimension::new("d", vec![0.0, 20.0])]).unwrap();
        let mut u = UncertaintyVector::new();
        u.push("snr", "dB", -3.0);
        let f = compose_features(&space, &u);
        assert_eq!(f, vec![fv(&[0.0, -3.0]), fv(&[20.0, -3.0])]);
    }

    #[test]
    fn compose_degenerate_space() {
        let space = AdaptationSpace::enumerate(vec![Dimension::new("d", vec![4.0])]).unwrap();
        let f = compose_features(&space, &UncertaintyVector::new());
        assert_eq!(f, vec![fv(&[4.0])]);
    }

    #[test]
    fn select_drops_unmasked_columns() {
        let rows = vec![fv(&[0.1, 0.2, 0.3, 0.4, 0.5])];
        let mask = FeatureMask::new(vec![0, 1, 2, 3], 5).unwrap();
        assert_eq!(
            select_features(&rows, &mask).unwrap(),
            vec![fv(&[0.1, 0.2, 0.3, 0.4])]
        );
        assert_eq!(select_features(&rows, &FeatureMask::full(5)).unwrap(), rows);
        assert!(FeatureMask::new(vec![5], 5).is_err());
        assert!(FeatureMask::new(vec![1, 2], 3)
            .unwrap()
            .apply(&[1.0, 2.0])
            .is_err());
    }

    #[test]
    fn mask_serialises_as_index_array() {
        let m = FeatureMask::new(vec![3, 1], 4).unwrap();
        assert_eq!(serde_json::to_string(&m).unwrap(), "[1,3]");
    }

    #[test]
    fn scaler_examples() {
        let data = vec![fv(&[0.0]), fv(&[5.0]), fv(&[10.0])];
        let s = Scaler::fit(ScalerKind::MinMax, &data).unwrap();
        let out: Vec<f64> = data.iter().map(|d| s.apply(d).unwrap()[0]).collect();
        assert_eq!(out, vec![0.0, 0.5, 1.0]);

        let s = Scaler::fit(ScalerKind::Standard, &[fv(&[1.0]), fv(&[2.0]), fv(&[3.0])]).unwrap();
        assert_eq!(s.apply(&[2.0]).unwrap()[0], 0.0);

        let s = Scaler::fit(ScalerKind::MinMax, &[fv(&[0.0]), fv(&[100.0])]).unwrap();
        assert_eq!(s.apply(&[75.0]).unwrap()[0], 0.75);

        let s = Scaler::fit(ScalerKind::MaxAbs, &[fv(&[-4.0]), fv(&[2.0])]).unwrap();
        assert_eq!(s.apply(&[-2.0]).unwrap()[0], -0.5);

        let s = Scaler::fit(ScalerKind::None, &[fv(&[3.0])]).unwrap();
        assert_eq!(s.apply(&[7.0]).unwrap()[0], 7.0);
    }

    #[test]
    fn zero_spread_passes_through_and_is_flagged() {
        let s = Scaler::fit(ScalerKind::Standard, &[fv(&[1.0, 5.0]), fv(&[3.0, 5.0])]).unwrap();
        assert_eq!(s.passthrough(), vec![1]);
        assert_eq!(s.apply(&[2.0, 9.0]).unwrap().0, vec![0.0, 9.0]);
    }

    #[test]
    fn scaler_json_round_trip() {
        let s = Scaler::fit(ScalerKind::MinMax, &[fv(&[1.0, 2.0]), fv(&[3.0, -1.0])]).unwrap();
        let json = serde_json::to_string(&s).unwrap();
        assert!(json.contains(r#""kind":"min-max""#));
        let back: Scaler = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn dataset_csv_round_trip() {
        let mut ds = LabeledDataset::new(vec!["a".into(), "b".into()], vec!["loss".into()]);
        ds.push(0, 0, fv(&[1.5, -2.0]), QualityVector(vec![0.125]))
            .unwrap();
        ds.push(1, 3, fv(&[0.1, 1e-12]), QualityVector(vec![7.0]))
            .unwrap();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("cycle,option,f_a,f_b,q_loss\n"));
        assert_eq!(LabeledDataset::read_csv(&buf[..]).unwrap(), ds);
        assert!(ds.push(0, 0, fv(&[1.0]), QualityVector(vec![1.0])).is_err());
    }

    proptest! {
        #[test]
        fn running_stats_match_two_pass(xs in prop::collection::vec(-1e6..1e6f64, 2..2000)) {
            let mut st = FeatureStats::default();
            for &x in &xs { st.push(x); }
            let n = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            let scale = xs.iter().fold(0.0f64, |a, x| a.max(x.abs()));
            prop_assert!((st.mean - mean).abs() <= 1e-9 * scale.max(1.0));
            prop_assert!((st.variance() - var).abs() <= 1e-9 * var.max(1e-300) + 1e-9 * scale.max(1.0));
        }

        #[test]
        fn scaled_values_stay_in_range(xs in prop::collection::vec(-1e3..1e3f64, 2..200), t in 0.0..1.0f64) {
            let rows: Vec<FeatureVector> = xs.iter().map(|&x| fv(&[x])).collect();
            let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let inside = lo + t * (hi - lo);
            let mm = Scaler::fit(ScalerKind::MinMax, &rows).unwrap();
            let ma = Scaler::fit(ScalerKind::MaxAbs, &rows).unwrap();
            if hi > lo {
                let v = mm.apply(&[inside]).unwrap()[0];
                prop_assert!((-1e-12..=1.0 + 1e-12).contains(&v));
            }
            let v = ma.apply(&[inside]).unwrap()[0];
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&v));
        }

        #[test]
        fn selection_is_a_subsequence(raw in prop::collection::vec(-5.0..5.0f64, 1..30), picks in prop::collection::vec(any::<prop::sample::Index>(), 1..30)) {
            let idx: Vec<usize> = picks.iter().map(|p| p.index(raw.len())).collect();
            let mask = FeatureMask::new(idx, raw.len()).unwrap();
            let out = mask.apply(&raw).unwrap();
            prop_assert_eq!(out.len(), mask.len());
            let mut it = raw.iter();
            for v in out.iter() {
                prop_assert!(it.any(|r| r.to_bits() == v.to_bits()));
            }
        }

        #[test]
        fn pipeline_is_bitwise_deterministic(levels in prop::collection::vec(-10.0..10.0f64, 1..5), u in -50.0..50.0f64) {
            let space = AdaptationSpace::enumerate(vec![Dimension::new("d", levels)]).unwrap();
            let mut uv = UncertaintyVector::new();
            uv.push("u", "", u);
            let run = || {
                let raw = compose_features(&space, &uv);
                let sel = select_features(&raw, &FeatureMask::full(2)).unwrap();
                let s = Scaler::fit(ScalerKind::Standard, &sel).unwrap();
                sel.iter().map(|l| s.apply(l).unwrap()).collect::<Vec<_>>()
            };
            let (a, b) = (run(), run());
            for (x, y) in a.iter().zip(&b) {
                prop_assert!(x.iter().zip(y.iter()).all(|(p, q)| p.to_bits() == q.to_bits()));
            }
        }
    }
}
