//! Playback of recorded uncertainty values.
//!
//! A profile is a CSV with columns `cycle,kind,id,value`, e.g.
//! `3,snr,7-3,-12.5` or `3,load,12,6`.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use asr_core::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub cycle: usize,
    pub kind: String,
    pub id: String,
    pub value: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Profile {
    values: BTreeMap<(usize, String, String), f64>,
}

impl Profile {
    pub fn from_rows(rows: impl IntoIterator<Item = ProfileRow>) -> Result<Self> {
        let mut values = BTreeMap::new();
        for r in rows {
            if !r.value.is_finite() {
                return Err(Error::NonFinite(format!(
                    "profile row {} {} {}",
                    r.cycle, r.kind, r.id
                )));
            }
            values.insert((r.cycle, r.kind, r.id), r.value);
        }
        Ok(Self { values })
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let rows = rd
            .deserialize()
            .collect::<std::result::Result<Vec<ProfileRow>, _>>()?;
        Self::from_rows(rows)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(std::io::BufReader::new(f))
    }

    /// Recorded value, if any, for one cycle.
    pub fn value(&self, cycle: usize, kind: &str, id: &str) -> Option<f64> {
        self.values
            .get(&(cycle, kind.to_string(), id.to_string()))
            .copied()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}
