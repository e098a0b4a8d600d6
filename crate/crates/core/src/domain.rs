//! Shared domain vocabulary: adaptation options, spaces and the vectors
//! that flow between the loop components.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One configurable dimension of the managed system with a finite domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dimension {
    pub name: String,
    pub levels: Vec<f64>,
}

impl Dimension {
    pub fn new(name: impl Into<String>, levels: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            levels,
        }
    }
}

/// A single reachable configuration. `config[d]` is one of the levels
/// declared by dimension `d` of the owning space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptationOption {
    pub id: usize,
    pub config: Vec<f64>,
    /// Level index per dimension, aligned with `config`.
    pub levels: Vec<usize>,
}

/// The full cartesian enumeration of all dimension domains.
///
/// Options are ordered lexicographically by level index with the last
/// dimension varying fastest; `options[i].id == i`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptationSpace {
    dimensions: Vec<Dimension>,
    options: Vec<AdaptationOption>,
}

impl AdaptationSpace {
    pub fn enumerate(dimensions: Vec<Dimension>) -> Result<Self> {
        for d in &dimensions {
            if d.levels.is_empty() {
                return Err(Error::Domain(format!(
                    "dimension '{}' has no levels",
                    d.name
                )));
            }
            if d.levels.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "levels of dimension '{}'",
                    d.name
                )));
            }
        }
        let total: usize = dimensions.iter().map(|d| d.levels.len()).product();
        let mut options = Vec::with_capacity(total);
        let mut idx = vec![0usize; dimensions.len()];
        for id in 0..total {
            options.push(AdaptationOption {
                id,
                config: idx
                    .iter()
                    .zip(&dimensions)
                    .map(|(&i, d)| d.levels[i])
                    .collect(),
                levels: idx.clone(),
            });
            for d in (0..dimensions.len()).rev() {
                idx[d] += 1;
                if idx[d] < dimensions[d].levels.len() {
                    break;
                }
                idx[d] = 0;
            }
        }
        Ok(Self {
            dimensions,
            options,
        })
    }

    pub fn dimensions(&self) -> &[Dimension] {
        &self.dimensions
    }

    pub fn options(&self) -> &[AdaptationOption] {
        &self.options
    }

    pub fn len(&self) -> usize {
        self.options.len()
    }

    pub fn is_empty(&self) -> bool {
        self.options.is_empty()
    }

    pub fn option(&self, id: usize) -> Result<&AdaptationOption> {
        self.options
            .get(id)
            .ok_or_else(|| Error::Domain(format!("option id {id} outside space of {}", self.len())))
    }

    pub fn contains(&self, id: usize) -> bool {
        id < self.options.len()
    }
}

/// A named scalar reading taken by the monitor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reading {
    pub name: String,
    pub unit: String,
    pub value: f64,
}

/// The monitored uncertainties of one cycle, in a fixed order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyVector {
    pub readings: Vec<Reading>,
}

impl UncertaintyVector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, unit: impl Into<String>, value: f64) {
        self.readings.push(Reading {
            name: name.into(),
            unit: unit.into(),
            value,
        });
    }

    pub fn values(&self) -> Vec<f64> {
        self.readings.iter().map(|r| r.value).collect()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.readings
            .iter()
            .find(|r| r.name == name)
            .map(|r| r.value)
    }

    pub fn len(&self) -> usize {
        self.readings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.readings.is_empty()
    }
}

macro_rules! scalar_vector {
    ($(#[$m:meta])* $name:ident) => {
        $(#[$m])*
        #[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub Vec<f64>);

        impl Deref for $name {
            type Target = [f64];
            fn deref(&self) -> &[f64] {
                &self.0
            }
        }

        impl From<Vec<f64>> for $name {
            fn from(v: Vec<f64>) -> Self {
                Self(v)
            }
        }
    };
}

scalar_vector!(
    /// Configuration and uncertainty features of one option.
    FeatureVector
);
scalar_vector!(
    /// One value per quality property of one option.
    QualityVector
);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumeration_is_full_cartesian_product() {
        let space = AdaptationSpace::enumerate(vec![
            Dimension::new("a", vec![0.0, 1.0]),
            Dimension::new("b", vec![10.0, 20.0, 30.0]),
        ])
        .unwrap();
        assert_eq!(space.len(), 6);
        assert_eq!(space.options()[0].config, vec![0.0, 10.0]);
        assert_eq!(space.options()[1].config, vec![0.0, 20.0]);
        assert_eq!(space.options()[5].config, vec![1.0, 30.0]);
        for (i, o) in space.options().iter().enumerate() {
            assert_eq!(o.id, i);
        }
    }

    #[test]
    fn empty_dimension_list_yields_single_option() {
        let space = AdaptationSpace::enumerate(vec![]).unwrap();
        assert_eq!(space.len(), 1);
        assert!(space.options()[0].config.is_empty());
    }

    #[test]
    fn empty_domain_is_rejected() {
        assert!(AdaptationSpace::enumerate(vec![Dimension::new("a", vec![])]).is_err());
    }
}
