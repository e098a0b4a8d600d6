//! A 15-mote LoRa-style mesh network in the spirit of DeltaIoT.
//!
//! Motes forward packets towards the gateway (mote 1) along a fixed DAG.
//! Three motes have two parents; the share of traffic sent to the first
//! parent is the adaptable setting, giving 6^3 = 216 options. Each cycle
//! the transmission power of every link is set to the smallest value that
//! lifts the link's SNR to at least 0 dB, clamped at 15.

use std::collections::BTreeMap;
use std::path::Path;

use asr_core::domain::{
    AdaptationOption, AdaptationSpace, Dimension, FeatureVector, QualityVector, UncertaintyVector,
};
use asr_core::mape::ManagedSystem;
use asr_core::seed::derived_rng;
use asr_core::verifier::GroundTruth;
use asr_core::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::profile::Profile;
use crate::walk::Walk;

pub const GATEWAY: u32 = 1;
pub const SNR_RANGE: (f64, f64) = (-40.0, 15.0);
pub const LOAD_RANGE: (f64, f64) = (0.0, 10.0);
pub const MAX_POWER: u32 = 15;
pub const DISTRIBUTION_LEVELS: [f64; 6] = [0.0, 20.0, 40.0, 60.0, 80.0, 100.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkSpec {
    pub from: u32,
    pub to: u32,
    /// Long-run mean SNR in dB.
    pub snr_mean: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoteSpec {
    pub id: u32,
    /// Long-run mean packets generated per cycle.
    pub load_mean: f64,
    /// Constant-load motes never change their load.
    #[serde(default)]
    pub constant_load: bool,
}

/// Quality-model constants of the mesh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RadioConstants {
    /// Delivery slope per dB of negative effective SNR.
    pub k: f64,
    /// Power setting at which effective SNR equals measured SNR.
    pub base_power: f64,
    /// Effective SNR gain per power step in dB.
    pub db_per_step: f64,
    /// Packets a link can carry per cycle.
    pub slot_capacity: f64,
    /// Loss fraction at 0 dB effective SNR.
    pub floor_loss: f64,
    /// dB over which the floor loss decays by a factor e.
    pub loss_decay: f64,
    /// Collision loss fraction of a fully used link.
    pub collision: f64,
    /// Exponent of link utilization in the collision loss.
    pub collision_exp: f64,
    /// Energy per transmitted packet at power 0, mC.
    pub c0: f64,
    /// Extra energy per packet per power step, mC.
    pub c1: f64,
    /// Idle energy of the network per cycle, mC.
    pub idle: f64,
}

impl Default for RadioConstants {
    fn default() -> Self {
        Self {
            k: 0.04,
            base_power: 5.0,
            db_per_step: 2.0,
            slot_capacity: 30.0,
            floor_loss: 0.01,
            loss_decay: 2.0,
            collision: 0.09,
            collision_exp: 3.0,
            c0: 0.008,
            c1: 0.0012,
            idle: 10.0,
        }
    }
}

/// Mean-reverting bounded random walks of the uncertainties.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IoTDynamics {
    pub snr: Walk,
    pub load: Walk,
    /// Per-cycle probability that an interference burst hits a link.
    pub burst_probability: f64,
    /// SNR drop of a burst in dB.
    pub burst_depth: f64,
}

impl Default for IoTDynamics {
    fn default() -> Self {
        Self {
            snr: Walk {
                std: 1.5,
                reversion: 0.15,
            },
            load: Walk {
                std: 0.8,
                reversion: 0.2,
            },
            burst_probability: 0.04,
            burst_depth: 14.0,
        }
    }
}

impl IoTDynamics {
    pub fn frozen() -> Self {
        Self {
            snr: Walk::frozen(),
            load: Walk::frozen(),
            burst_probability: 0.0,
            burst_depth: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IoTConfig {
    pub links: Vec<LinkSpec>,
    pub motes: Vec<MoteSpec>,
    #[serde(default)]
    pub radio: RadioConstants,
    #[serde(default)]
    pub dynamics: IoTDynamics,
}

impl Default for IoTConfig {
    fn default() -> Self {
        let l = |from, to, snr_mean| LinkSpec { from, to, snr_mean };
        let links = vec![
            l(2, 4, 4.0),
            l(3, 1, 6.0),
            l(4, 1, 5.0),
            l(5, 9, 3.0),
            l(6, 4, 2.0),
            l(7, 2, -2.0),
            l(7, 3, -17.0),
            l(8, 1, 7.0),
            l(9, 1, 4.0),
            l(10, 6, -19.0),
            l(10, 5, 1.0),
            l(11, 7, 3.0),
            l(12, 7, -18.0),
            l(12, 3, 0.0),
            l(13, 11, 5.0),
            l(14, 12, 2.0),
            l(15, 12, 4.0),
        ];
        let m = |id, load_mean, constant_load| MoteSpec {
            id,
            load_mean,
            constant_load,
        };
        let motes = vec![
            m(2, 4.0, false),
            m(3, 5.0, false),
            m(4, 3.0, true),
            m(5, 4.0, false),
            m(6, 5.0, true),
            m(7, 6.0, false),
            m(8, 3.0, true),
            m(9, 4.0, false),
            m(10, 7.0, false),
            m(11, 5.0, false),
            m(12, 6.0, false),
            m(13, 8.0, false),
            m(14, 7.0, false),
            m(15, 6.0, true),
        ];
        Self {
            links,
            motes,
            radio: RadioConstants::default(),
            dynamics: IoTDynamics::default(),
        }
    }
}

/// Static structure derived from the configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct IoTTopology {
    pub links: Vec<LinkSpec>,
    pub motes: Vec<MoteSpec>,
    /// Outgoing link indices per mote position.
    out: Vec<Vec<usize>>,
    /// Mote positions ordered leaves first.
    order: Vec<usize>,
    /// Mote positions with two parents, ascending by id.
    pub two_parent: Vec<usize>,
    /// Position of each mote id.
    pos: BTreeMap<u32, usize>,
}

impl IoTTopology {
    pub fn new(links: Vec<LinkSpec>, motes: Vec<MoteSpec>) -> Result<Self> {
        let mut pos = BTreeMap::new();
        for (i, m) in motes.iter().enumerate() {
            if m.id == GATEWAY || pos.insert(m.id, i).is_some() {
                return Err(Error::Config(format!(
                    "duplicate or reserved mote id {}",
                    m.id
                )));
            }
        }
        let mut out = vec![Vec::new(); motes.len()];
        for (li, l) in links.iter().enumerate() {
            let p = *pos
                .get(&l.from)
                .ok_or_else(|| Error::Config(format!("link from unknown mote {}", l.from)))?;
            if l.to != GATEWAY && !pos.contains_key(&l.to) {
                return Err(Error::Config(format!("link to unknown mote {}", l.to)));
            }
            out[p].push(li);
        }
        let mut two_parent = Vec::new();
        for (i, o) in out.iter().enumerate() {
            match o.len() {
                1 => {}
                2 => two_parent.push(i),
                k => {
                    return Err(Error::Config(format!(
                        "mote {} has {k} parents; one or two are supported",
                        motes[i].id
                    )))
                }
            }
        }
        // Kahn's algorithm on child -> parent edges, leaves first.
        let mut indeg = vec![0usize; motes.len()];
        for l in &links {
            if l.to != GATEWAY {
                indeg[pos[&l.to]] += 1;
            }
        }
        let mut ready: Vec<usize> = (0..motes.len()).filter(|&i| indeg[i] == 0).collect();
        let mut order = Vec::new();
        while let Some(i) = ready.pop() {
            order.push(i);
            for &li in &out[i] {
                let to = links[li].to;
                if to != GATEWAY {
                    let p = pos[&to];
                    indeg[p] -= 1;
                    if indeg[p] == 0 {
                        ready.push(p);
                    }
                }
            }
        }
        if order.len() != motes.len() {
            return Err(Error::Config("topology contains a cycle".into()));
        }
        Ok(Self {
            links,
            motes,
            out,
            order,
            two_parent,
            pos,
        })
    }

    pub fn mote_position(&self, id: u32) -> Option<usize> {
        self.pos.get(&id).copied()
    }

    pub fn enumerate_space(&self) -> AdaptationSpace {
        let dims = self
            .two_parent
            .iter()
            .map(|&i| {
                let l = self.links[self.out[i][0]];
                Dimension::new(
                    format!("dist_{}_{}", l.from, l.to),
                    DISTRIBUTION_LEVELS.to_vec(),
                )
            })
            .collect();
        AdaptationSpace::enumerate(dims).expect("levels are finite and non-empty")
    }

    /// Traffic share per link for an option's distribution settings.
    pub fn shares(&self, config: &[f64]) -> Vec<f64> {
        let mut s = vec![1.0; self.links.len()];
        for (d, &i) in self.two_parent.iter().enumerate() {
            let first = config[d] / 100.0;
            s[self.out[i][0]] = first;
            s[self.out[i][1]] = 1.0 - first;
        }
        s
    }
}

/// Measured state of the network in one cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IoTState {
    pub snr: Vec<f64>,
    pub load: Vec<f64>,
    pub power: Vec<u32>,
    /// Links whose power hit the maximum without reaching 0 dB.
    pub clamped: Vec<usize>,
}

impl RadioConstants {
    /// Smallest power lifting `snr` to a non-negative effective SNR,
    /// and whether it had to be clamped at the maximum.
    pub fn power_for(&self, snr: f64) -> (u32, bool) {
        let need = (self.base_power - snr / self.db_per_step).ceil();
        if need > f64::from(MAX_POWER) {
            (MAX_POWER, true)
        } else {
            (need.max(0.0) as u32, false)
        }
    }

    pub fn effective_snr(&self, snr: f64, power: f64) -> f64 {
        snr + self.db_per_step * (power - self.base_power)
    }

    /// Delivered fraction of the packets sent over a link with the given
    /// effective SNR and utilization (sent / capacity).
    pub fn delivery(&self, eff_snr: f64, utilization: f64) -> f64 {
        let radio = if eff_snr >= 0.0 {
            self.floor_loss * (-eff_snr / self.loss_decay).exp()
        } else {
            self.floor_loss - self.k * eff_snr
        };
        let collisions = self.collision * utilization.clamp(0.0, 1.0).powf(self.collision_exp);
        (1.0 - radio - collisions).clamp(0.0, 1.0)
    }
}

/// Packet loss %, latency % and energy (mC) of routing `shares` under the
/// given SNR, load and power per link.
pub fn estimate_qualities(
    topo: &IoTTopology,
    radio: &RadioConstants,
    shares: &[f64],
    snr: &[f64],
    load: &[f64],
    power: &[f64],
) -> QualityVector {
    let mut inflow: Vec<f64> = load.to_vec();
    let generated: f64 = load.iter().sum();
    let (mut lost, mut delayed, mut energy) = (0.0, 0.0, radio.idle);
    for &m in &topo.order {
        for &li in &topo.out[m] {
            let offered = inflow[m] * shares[li];
            let sent = offered.min(radio.slot_capacity);
            delayed += offered - sent;
            let d = radio.delivery(
                radio.effective_snr(snr[li], power[li]),
                sent / radio.slot_capacity,
            );
            lost += sent * (1.0 - d);
            energy += sent * (radio.c0 + radio.c1 * power[li]);
            let to = topo.links[li].to;
            if to != GATEWAY {
                inflow[topo.pos[&to]] += sent * d;
            }
        }
    }
    let pct = |x: f64| {
        if generated > 0.0 {
            (x / generated * 100.0).clamp(0.0, 100.0)
        } else {
            0.0
        }
    };
    QualityVector(vec![pct(lost), pct(delayed), energy])
}

/// The simulated network as a managed system.
#[derive(Debug)]
pub struct DeltaIoT {
    pub topo: IoTTopology,
    pub radio: RadioConstants,
    pub dynamics: IoTDynamics,
    space: AdaptationSpace,
    state: IoTState,
    profile: Option<Profile>,
    seed: u64,
    cycle: usize,
    applied: Option<usize>,
}

impl DeltaIoT {
    pub fn new(cfg: &IoTConfig, seed: u64) -> Result<Self> {
        let topo = IoTTopology::new(cfg.links.clone(), cfg.motes.clone())?;
        let space = topo.enumerate_space();
        let snr = topo
            .links
            .iter()
            .map(|l| l.snr_mean.clamp(SNR_RANGE.0, SNR_RANGE.1))
            .collect();
        let load = topo
            .motes
            .iter()
            .map(|m| m.load_mean.clamp(LOAD_RANGE.0, LOAD_RANGE.1))
            .collect();
        let mut sys = Self {
            topo,
            radio: cfg.radio,
            dynamics: cfg.dynamics,
            space,
            state: IoTState {
                snr,
                load,
                power: Vec::new(),
                clamped: Vec::new(),
            },
            profile: None,
            seed,
            cycle: 0,
            applied: None,
        };
        sys.set_powers();
        Ok(sys)
    }

    /// Replaces the random walks with recorded values.
    pub fn with_profile(mut self, profile: Profile) -> Result<Self> {
        self.profile = Some(profile);
        self.apply_profile()?;
        Ok(self)
    }

    pub fn load_config(path: &Path) -> Result<IoTConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn state(&self) -> &IoTState {
        &self.state
    }

    pub fn cycle(&self) -> usize {
        self.cycle
    }

    pub fn applied(&self) -> Option<usize> {
        self.applied
    }

    fn set_powers(&mut self) {
        let mut clamped = Vec::new();
        self.state.power = self
            .state
            .snr
            .iter()
            .enumerate()
            .map(|(i, &s)| {
                let (p, c) = self.radio.power_for(s);
                if c {
                    clamped.push(i);
                }
                p
            })
            .collect();
        self.state.clamped = clamped;
    }

    fn link_key(&self, li: usize) -> String {
        let l = self.topo.links[li];
        format!("{}-{}", l.from, l.to)
    }

    fn apply_profile(&mut self) -> Result<()> {
        let Some(p) = &self.profile else {
            return Ok(());
        };
        for li in 0..self.topo.links.len() {
            if let Some(v) = p.value(self.cycle, "snr", &self.link_key(li)) {
                self.state.snr[li] = v.clamp(SNR_RANGE.0, SNR_RANGE.1);
            }
        }
        for (mi, m) in self.topo.motes.iter().enumerate() {
            if let Some(v) = p.value(self.cycle, "load", &m.id.to_string()) {
                self.state.load[mi] = v.clamp(LOAD_RANGE.0, LOAD_RANGE.1);
            }
        }
        self.set_powers();
        Ok(())
    }

    /// One seeded step of the uncertainty walks.
    pub fn step_uncertainties(&mut self) {
        use rand::Rng;
        let mut rng = derived_rng(self.seed, "deltaiot-step", self.cycle as u64);
        let d = self.dynamics;
        for (li, l) in self.topo.links.iter().enumerate() {
            let mut target = l.snr_mean;
            if d.burst_probability > 0.0 && rng.random::<f64>() < d.burst_probability {
                target -= d.burst_depth;
            }
            self.state.snr[li] = d.snr.step(self.state.snr[li], target, SNR_RANGE, &mut rng);
        }
        for (mi, m) in self.topo.motes.iter().enumerate() {
            if !m.constant_load {
                self.state.load[mi] =
                    d.load
                        .step(self.state.load[mi], m.load_mean, LOAD_RANGE, &mut rng);
            }
        }
        self.set_powers();
    }

    fn split_u(&self, u: &UncertaintyVector) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let v = u.values();
        let nl = self.topo.links.len();
        let nm = self.topo.motes.len();
        (
            v[..nl].to_vec(),
            v[nl..2 * nl].to_vec(),
            v[2 * nl..2 * nl + nm].to_vec(),
        )
    }
}

impl GroundTruth for DeltaIoT {
    fn n_qualities(&self) -> usize {
        3
    }

    fn qualities(&self, option: &AdaptationOption, u: &UncertaintyVector) -> QualityVector {
        let (snr, power, load) = self.split_u(u);
        estimate_qualities(
            &self.topo,
            &self.radio,
            &self.topo.shares(&option.config),
            &snr,
            &load,
            &power,
        )
    }
}

impl ManagedSystem for DeltaIoT {
    fn space(&self) -> &AdaptationSpace {
        &self.space
    }

    fn quality_names(&self) -> Vec<String> {
        vec!["packet_loss".into(), "latency".into(), "energy".into()]
    }

    /// Link distributions, link powers, link SNRs and mote loads.
    fn feature_names(&self) -> Vec<String> {
        let keys: Vec<String> = (0..self.topo.links.len())
            .map(|i| self.link_key(i))
            .collect();
        let mut n: Vec<String> = keys.iter().map(|k| format!("dist_{k}")).collect();
        n.extend(keys.iter().map(|k| format!("power_{k}")));
        n.extend(keys.iter().map(|k| format!("snr_{k}")));
        n.extend(self.topo.motes.iter().map(|m| format!("load_{}", m.id)));
        n
    }

    /// SNR per link, power per link, then load per mote.
    fn uncertainties(&self) -> UncertaintyVector {
        let mut u = UncertaintyVector::new();
        for (i, &s) in self.state.snr.iter().enumerate() {
            u.push(format!("snr_{}", self.link_key(i)), "dB", s);
        }
        for (i, &p) in self.state.power.iter().enumerate() {
            u.push(format!("power_{}", self.link_key(i)), "level", f64::from(p));
        }
        for (m, &l) in self.topo.motes.iter().zip(&self.state.load) {
            u.push(format!("load_{}", m.id), "packets", l);
        }
        u
    }

    fn features(&self, u: &UncertaintyVector) -> Vec<FeatureVector> {
        let tail = u.values();
        self.space
            .options()
            .iter()
            .map(|o| {
                let mut v: Vec<f64> = self
                    .topo
                    .shares(&o.config)
                    .iter()
                    .map(|s| s * 100.0)
                    .collect();
                v.extend_from_slice(&tail);
                FeatureVector(v)
            })
            .collect()
    }

    fn apply_option(&mut self, id: usize) -> Result<()> {
        self.space.option(id)?;
        self.applied = Some(id);
        Ok(())
    }

    fn advance(&mut self) {
        self.cycle += 1;
        if self.profile.is_some() {
            self.apply_profile()
                .expect("profile values were validated on load");
        } else {
            self.step_uncertainties();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sys() -> DeltaIoT {
        DeltaIoT::new(&IoTConfig::default(), 1).unwrap()
    }

    #[test]
    fn default_space_has_216_options() {
        let s = sys();
        assert_eq!(s.space().len(), 216);
        assert!(s.space().options().iter().all(|o| o.config.len() == 3));
        assert_eq!(s.topo.two_parent.len(), 3);
    }

    #[test]
    fn one_two_parent_mote_gives_six_options() {
        let cfg = IoTConfig::default();
        let links: Vec<LinkSpec> = cfg
            .links
            .iter()
            .copied()
            .filter(|l| !matches!((l.from, l.to), (7, 3) | (12, 3)))
            .collect();
        let topo = IoTTopology::new(links, cfg.motes).unwrap();
        assert_eq!(topo.enumerate_space().len(), 6);
    }

    #[test]
    fn feature_layout_has_65_columns() {
        let s = sys();
        let f = s.features(&s.uncertainties());
        assert_eq!(s.feature_names().len(), 65);
        assert_eq!(f.len(), 216);
        assert!(f.iter().all(|v| v.len() == 65));
    }

    #[test]
    fn power_procedure() {
        let r = RadioConstants::default();
        assert_eq!(r.power_for(10.0), (0, false));
        assert_eq!(r.power_for(-3.0), (7, false));
        assert!(r.effective_snr(-3.0, 7.0) >= 0.0);
        assert_eq!(r.power_for(-30.0), (15, true));
    }
}
