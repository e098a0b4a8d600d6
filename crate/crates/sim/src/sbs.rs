//! Service-based health-monitoring workflow.
//!
//! Every request first hits the data-analysis service. With probability
//! `p` the patient is asleep and the request continues to the sleep
//! service; otherwise it goes either through the exercise and diet
//! services in turn (share `alpha`) or through the combined exercise-diet
//! service. Each service has several instances run by three providers
//! whose load and bandwidth drift over time and scale the instance
//! qualities along piecewise-linear curves.

use std::path::Path;

use asr_core::domain::{
    AdaptationOption, AdaptationSpace, Dimension, FeatureVector, QualityVector, UncertaintyVector,
};
use asr_core::mape::ManagedSystem;
use asr_core::seed::derived_rng;
use asr_core::verifier::GroundTruth;
use asr_core::{Error, Result};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::profile::Profile;

pub const N_PROVIDERS: usize = 3;
pub const ALPHA_LEVELS: [f64; 5] = [0.0, 25.0, 50.0, 75.0, 100.0];

/// Splits over three instances, in thirds, lexicographic from 0/0/3.
pub const SPLITS3: [[f64; 3]; 10] = [
    [0.0, 0.0, 3.0],
    [0.0, 1.0, 2.0],
    [0.0, 2.0, 1.0],
    [0.0, 3.0, 0.0],
    [1.0, 0.0, 2.0],
    [1.0, 1.0, 1.0],
    [1.0, 2.0, 0.0],
    [2.0, 0.0, 1.0],
    [2.0, 1.0, 0.0],
    [3.0, 0.0, 0.0],
];

pub const SPLITS2: [[f64; 2]; 3] = [[0.0, 1.0], [0.5, 0.5], [1.0, 0.0]];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QualityKind {
    Failure,
    Response,
    Cost,
}

const FAILURE_CURVES: [&[(f64, f64)]; 3] = [
    &[(0.0, 60.0), (100.0, 120.0)],
    &[(0.0, 75.0), (100.0, 125.0)],
    &[(0.0, 75.0), (100.0, 150.0)],
];
const RESPONSE_CURVES: [&[(f64, f64)]; 3] = [
    &[(0.0, 110.0), (100.0, 80.0)],
    &[(0.0, 125.0), (100.0, 85.0)],
    &[(0.0, 130.0), (100.0, 90.0)],
];
const COST_CURVES: [&[(f64, f64)]; 3] = [
    &[(0.0, 100.0), (70.0, 100.0), (100.0, 200.0)],
    &[(0.0, 100.0), (60.0, 100.0), (100.0, 250.0)],
    &[(0.0, 100.0), (50.0, 100.0), (100.0, 300.0)],
];

pub fn curve(provider: u8, kind: QualityKind) -> &'static [(f64, f64)] {
    let i = usize::from(provider.clamp(1, 3) - 1);
    match kind {
        QualityKind::Failure => FAILURE_CURVES[i],
        QualityKind::Response => RESPONSE_CURVES[i],
        QualityKind::Cost => COST_CURVES[i],
    }
}

/// Scaling multiplier in percent for a provider at load (failure, cost) or
/// bandwidth (response) `x`. The flag is set when `x` had to be clamped.
pub fn scaling(provider: u8, kind: QualityKind, x: f64) -> (f64, bool) {
    let clamped = !(0.0..=100.0).contains(&x);
    let x = x.clamp(0.0, 100.0);
    let pts = curve(provider, kind);
    for w in pts.windows(2) {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        if x <= x1 {
            return (y0 + (y1 - y0) * (x - x0) / (x1 - x0), clamped);
        }
    }
    (pts[pts.len() - 1].1, clamped)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    /// 1, 2 or 3.
    pub provider: u8,
    /// Failure rate in percent.
    pub failure: f64,
    /// Response time in ms.
    pub response: f64,
    /// Cost in cents.
    pub cost: f64,
}

/// Scaled qualities of one instance: failure as a probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstanceQos {
    pub failure: f64,
    pub response: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProviderState {
    pub load: [f64; N_PROVIDERS],
    pub bandwidth: [f64; N_PROVIDERS],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SbsState {
    pub providers: ProviderState,
    /// Probability of the sleep branch in percent.
    pub p: f64,
}

/// Workflow and environment defaults. The base qualities are tuned values,
/// not measurements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SbsConfig {
    pub analysis: Vec<Instance>,
    pub exercise_diet: Vec<Instance>,
    pub sleep: Vec<Instance>,
    pub exercise: Vec<Instance>,
    pub diet: Vec<Instance>,
    pub initial: SbsState,
    /// Std of the per-cycle Gaussian steps, percentage points.
    pub step_std: f64,
    /// Requests between two adaptations.
    pub requests_per_cycle: usize,
}

impl Default for SbsConfig {
    fn default() -> Self {
        let i = |provider, failure, response, cost| Instance {
            provider,
            failure,
            response,
            cost,
        };
        Self {
            analysis: vec![
                i(1, 5.3, 4.2, 3.0),
                i(2, 2.1, 4.0, 10.0),
                i(3, 4.7, 3.4, 6.2),
            ],
            exercise_diet: vec![
                i(1, 6.4, 4.6, 1.7),
                i(2, 4.3, 3.8, 6.4),
                i(3, 2.5, 2.2, 9.2),
            ],
            sleep: vec![i(1, 1.5, 2.5, 9.5), i(2, 4.3, 3.4, 5.7)],
            exercise: vec![i(2, 5.4, 2.8, 7.5), i(3, 6.4, 5.6, 3.5)],
            diet: vec![i(1, 1.8, 4.7, 10.6), i(3, 3.1, 2.3, 8.3)],
            initial: SbsState {
                providers: ProviderState {
                    load: [40.0, 55.0, 30.0],
                    bandwidth: [60.0, 45.0, 70.0],
                },
                p: 50.0,
            },
            step_std: 1.7,
            requests_per_cycle: 100,
        }
    }
}

impl SbsConfig {
    pub fn validate(&self) -> Result<()> {
        let groups: [(&str, &Vec<Instance>, usize); 5] = [
            ("analysis", &self.analysis, 3),
            ("exercise_diet", &self.exercise_diet, 3),
            ("sleep", &self.sleep, 2),
            ("exercise", &self.exercise, 2),
            ("diet", &self.diet, 2),
        ];
        for (name, insts, n) in groups {
            if insts.len() != n {
                return Err(Error::Config(format!(
                    "service '{name}' needs {n} instances, got {}",
                    insts.len()
                )));
            }
            for it in insts {
                if !(1..=3).contains(&it.provider) {
                    return Err(Error::Config(format!(
                        "service '{name}': provider {} not in 1..=3",
                        it.provider
                    )));
                }
                let ok = [it.failure, it.response, it.cost]
                    .iter()
                    .all(|v| v.is_finite() && *v >= 0.0);
                if !ok || it.failure > 100.0 {
                    return Err(Error::Config(format!(
                        "service '{name}': invalid base qualities"
                    )));
                }
            }
        }
        if !(self.step_std.is_finite() && self.step_std >= 0.0) {
            return Err(Error::Config(
                "step_std must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// The five services in workflow order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Service {
    Analysis,
    ExerciseDiet,
    Sleep,
    Exercise,
    Diet,
}

/// Decoded adaptation option: alpha as a fraction and instance weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Setting {
    pub alpha: f64,
    pub analysis: [f64; 3],
    pub exercise_diet: [f64; 3],
    pub sleep: [f64; 2],
    pub exercise: [f64; 2],
    pub diet: [f64; 2],
}

impl Setting {
    /// Decodes `[alpha %, split codes...]`.
    pub fn from_config(config: &[f64]) -> Self {
        let s3 = |c: f64| SPLITS3[(c as usize).min(9)].map(|x| x / 3.0);
        let s2 = |c: f64| SPLITS2[(c as usize).min(2)];
        Self {
            alpha: config[0] / 100.0,
            analysis: s3(config[1]),
            exercise_diet: s3(config[2]),
            sleep: s2(config[3]),
            exercise: s2(config[4]),
            diet: s2(config[5]),
        }
    }

    fn weights(&self, s: Service) -> &[f64] {
        match s {
            Service::Analysis => &self.analysis,
            Service::ExerciseDiet => &self.exercise_diet,
            Service::Sleep => &self.sleep,
            Service::Exercise => &self.exercise,
            Service::Diet => &self.diet,
        }
    }
}

/// Path probabilities for sleep, exercise-then-diet and combined routes.
fn paths(p: f64, alpha: f64) -> [(f64, &'static [Service]); 3] {
    use Service::*;
    [
        (p, &[Analysis, Sleep]),
        ((1.0 - p) * alpha, &[Analysis, Exercise, Diet]),
        ((1.0 - p) * (1.0 - alpha), &[Analysis, ExerciseDiet]),
    ]
}

/// Failure of a path whose steps fail independently with the given
/// probabilities.
pub fn compose_failure(step_failures: &[f64]) -> f64 {
    1.0 - step_failures.iter().map(|f| 1.0 - f).product::<f64>()
}

/// Scaled instance qualities for every service under one provider state.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledWorkflow {
    pub analysis: Vec<InstanceQos>,
    pub exercise_diet: Vec<InstanceQos>,
    pub sleep: Vec<InstanceQos>,
    pub exercise: Vec<InstanceQos>,
    pub diet: Vec<InstanceQos>,
    providers: Vec<Vec<u8>>,
    /// Set when a load or bandwidth value was outside [0, 100].
    pub clamped: bool,
}

impl ScaledWorkflow {
    pub fn new(cfg: &SbsConfig, st: &ProviderState) -> Self {
        let mut clamped = false;
        let mut scale = |insts: &[Instance]| -> Vec<InstanceQos> {
            insts
                .iter()
                .map(|it| {
                    let k = usize::from(it.provider - 1);
                    let (f, c1) = scaling(it.provider, QualityKind::Failure, st.load[k]);
                    let (r, c2) = scaling(it.provider, QualityKind::Response, st.bandwidth[k]);
                    let (c, c3) = scaling(it.provider, QualityKind::Cost, st.load[k]);
                    clamped |= c1 || c2 || c3;
                    InstanceQos {
                        failure: (it.failure * f / 1e4).min(1.0),
                        response: it.response * r / 100.0,
                        cost: it.cost * c / 100.0,
                    }
                })
                .collect()
        };
        let analysis = scale(&cfg.analysis);
        let exercise_diet = scale(&cfg.exercise_diet);
        let sleep = scale(&cfg.sleep);
        let exercise = scale(&cfg.exercise);
        let diet = scale(&cfg.diet);
        let prov = |v: &[Instance]| v.iter().map(|i| i.provider).collect::<Vec<_>>();
        let providers = vec![
            prov(&cfg.analysis),
            prov(&cfg.exercise_diet),
            prov(&cfg.sleep),
            prov(&cfg.exercise),
            prov(&cfg.diet),
        ];
        Self {
            analysis,
            exercise_diet,
            sleep,
            exercise,
            diet,
            providers,
            clamped,
        }
    }

    fn service(&self, s: Service) -> (&[InstanceQos], &[u8]) {
        let i = s as usize;
        let q = match s {
            Service::Analysis => &self.analysis,
            Service::ExerciseDiet => &self.exercise_diet,
            Service::Sleep => &self.sleep,
            Service::Exercise => &self.exercise,
            Service::Diet => &self.diet,
        };
        (q, &self.providers[i])
    }

    /// Weighted mean qualities of one service.
    fn mix(&self, s: Service, w: &[f64]) -> InstanceQos {
        let (q, _) = self.service(s);
        let mut m = InstanceQos {
            failure: 0.0,
            response: 0.0,
            cost: 0.0,
        };
        for (wi, qi) in w.iter().zip(q) {
            m.failure += wi * qi.failure;
            m.response += wi * qi.response;
            m.cost += wi * qi.cost;
        }
        m
    }
}

/// Expected failure rate (%), response time (ms) and cost (c) per request.
pub fn estimate_qualities(wf: &ScaledWorkflow, set: &Setting, p: f64) -> QualityVector {
    let (mut fr, mut rt, mut cost) = (0.0, 0.0, 0.0);
    for (prob, services) in paths(p, set.alpha) {
        if prob <= 0.0 {
            continue;
        }
        let mixes: Vec<InstanceQos> = services
            .iter()
            .map(|&s| wf.mix(s, set.weights(s)))
            .collect();
        let f: Vec<f64> = mixes.iter().map(|m| m.failure).collect();
        fr += prob * compose_failure(&f);
        rt += prob * mixes.iter().map(|m| m.response).sum::<f64>();
        cost += prob * mixes.iter().map(|m| m.cost).sum::<f64>();
    }
    QualityVector(vec![(fr * 100.0).clamp(0.0, 100.0), rt, cost])
}

/// Expected failure, response and cost contributed by each provider,
/// laid out as `[fr_1, rt_1, cost_1, fr_2, ...]`.
pub fn provider_contributions(
    wf: &ScaledWorkflow,
    set: &Setting,
    p: f64,
) -> [f64; 3 * N_PROVIDERS] {
    let mut out = [0.0; 3 * N_PROVIDERS];
    for (prob, services) in paths(p, set.alpha) {
        for &s in services {
            let (q, prov) = wf.service(s);
            for ((w, qi), &k) in set.weights(s).iter().zip(q).zip(prov) {
                let b = 3 * usize::from(k - 1);
                let share = prob * w;
                out[b] += share * qi.failure * 100.0;
                out[b + 1] += share * qi.response;
                out[b + 2] += share * qi.cost;
            }
        }
    }
    out
}

/// Sampled per-request qualities. Failure uses the exact conditional
/// probability of each sampled request, so only routing is random.
pub fn monte_carlo<R: Rng + ?Sized>(
    wf: &ScaledWorkflow,
    set: &Setting,
    p: f64,
    requests: usize,
    rng: &mut R,
) -> QualityVector {
    let pick = |w: &[f64], rng: &mut R| {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, wi) in w.iter().enumerate() {
            acc += wi;
            if u < acc {
                return i;
            }
        }
        w.iter().rposition(|&x| x > 0.0).unwrap_or(0)
    };
    let (mut fr, mut rt, mut cost) = (0.0, 0.0, 0.0);
    for _ in 0..requests {
        let r: f64 = rng.random();
        let ps = paths(p, set.alpha);
        let path = if r < ps[0].0 {
            ps[0].1
        } else if r < ps[0].0 + ps[1].0 {
            ps[1].1
        } else {
            ps[2].1
        };
        let mut survive = 1.0;
        for &s in path {
            let (q, _) = wf.service(s);
            let qi = q[pick(set.weights(s), rng)];
            survive *= 1.0 - qi.failure;
            rt += qi.response;
            cost += qi.cost;
        }
        fr += 1.0 - survive;
    }
    let n = requests.max(1) as f64;
    QualityVector(vec![fr / n * 100.0, rt / n, cost / n])
}

pub fn enumerate_space() -> AdaptationSpace {
    let codes = |n: usize| (0..n).map(|c| c as f64).collect::<Vec<_>>();
    let dims = vec![
        Dimension::new("alpha", ALPHA_LEVELS.to_vec()),
        Dimension::new("dist_analysis", codes(SPLITS3.len())),
        Dimension::new("dist_exercise_diet", codes(SPLITS3.len())),
        Dimension::new("dist_sleep", codes(SPLITS2.len())),
        Dimension::new("dist_exercise", codes(SPLITS2.len())),
        Dimension::new("dist_diet", codes(SPLITS2.len())),
    ];
    AdaptationSpace::enumerate(dims).expect("levels are finite and non-empty")
}

/// The simulated service system as a managed system.
#[derive(Debug)]
pub struct Sbs {
    pub cfg: SbsConfig,
    space: AdaptationSpace,
    state: SbsState,
    profile: Option<Profile>,
    seed: u64,
    cycle: usize,
    applied: Option<usize>,
}

impl Sbs {
    pub fn new(cfg: &SbsConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut state = cfg.initial;
        clamp_state(&mut state);
        Ok(Self {
            cfg: cfg.clone(),
            space: enumerate_space(),
            state,
            profile: None,
            seed,
            cycle: 0,
            applied: None,
        })
    }

    /// Replaces the random walks with recorded values, kinds `load`,
    /// `bandwidth` (ids 1..=3) and `p` (id `sleep`).
    pub fn with_profile(mut self, profile: Profile) -> Self {
        self.profile = Some(profile);
        self.apply_profile();
        self
    }

    pub fn load_config(path: &Path) -> Result<SbsConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: SbsConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn state(&self) -> &SbsState {
        &self.state
    }

    pub fn cycle(&self) -> usize {
        self.cycle
    }

    pub fn applied(&self) -> Option<usize> {
        self.applied
    }

    fn apply_profile(&mut self) {
        let Some(pr) = &self.profile else { return };
        for k in 0..N_PROVIDERS {
            let id = (k + 1).to_string();
            if let Some(v) = pr.value(self.cycle, "load", &id) {
                self.state.providers.load[k] = v;
            }
            if let Some(v) = pr.value(self.cycle, "bandwidth", &id) {
                self.state.providers.bandwidth[k] = v;
            }
        }
        if let Some(v) = pr.value(self.cycle, "p", "sleep") {
            self.state.p = v;
        }
        clamp_state(&mut self.state);
    }

    /// One seeded Gaussian step of every load, bandwidth and `p`.
    pub fn step_uncertainties(&mut self) {
        if self.cfg.step_std <= 0.0 {
            return;
        }
        let mut rng = derived_rng(self.seed, "sbs-step", self.cycle as u64);
        let n = Normal::new(0.0, self.cfg.step_std).expect("std validated");
        let st = &mut self.state;
        for x in st
            .providers
            .load
            .iter_mut()
            .chain(st.providers.bandwidth.iter_mut())
        {
            *x += n.sample(&mut rng);
        }
        st.p += n.sample(&mut rng);
        clamp_state(st);
    }

    fn decode(&self, u: &UncertaintyVector) -> (ScaledWorkflow, f64) {
        let v = u.values();
        let st = ProviderState {
            load: [v[0], v[1], v[2]],
            bandwidth: [v[3], v[4], v[5]],
        };
        (ScaledWorkflow::new(&self.cfg, &st), v[6] / 100.0)
    }
}

fn clamp_state(st: &mut SbsState) {
    for x in st
        .providers
        .load
        .iter_mut()
        .chain(st.providers.bandwidth.iter_mut())
    {
        *x = x.clamp(0.0, 100.0);
    }
    st.p = st.p.clamp(0.0, 100.0);
}

impl GroundTruth for Sbs {
    fn n_qualities(&self) -> usize {
        3
    }

    fn qualities(&self, option: &AdaptationOption, u: &UncertaintyVector) -> QualityVector {
        let (wf, p) = self.decode(u);
        estimate_qualities(&wf, &Setting::from_config(&option.config), p)
    }
}

impl ManagedSystem for Sbs {
    fn space(&self) -> &AdaptationSpace {
        &self.space
    }

    fn quality_names(&self) -> Vec<String> {
        vec!["failure_rate".into(), "response_time".into(), "cost".into()]
    }

    /// Six option codes, seven uncertainties, then the expected failure,
    /// response and cost contributed by each provider.
    fn feature_names(&self) -> Vec<String> {
        let mut n: Vec<String> = self
            .space
            .dimensions()
            .iter()
            .map(|d| d.name.clone())
            .collect();
        n.extend(self.uncertainties().readings.iter().map(|r| r.name.clone()));
        for k in 1..=N_PROVIDERS {
            n.extend([
                format!("fr_sp{k}"),
                format!("rt_sp{k}"),
                format!("cost_sp{k}"),
            ]);
        }
        n
    }

    fn uncertainties(&self) -> UncertaintyVector {
        let mut u = UncertaintyVector::new();
        for (k, l) in self.state.providers.load.iter().enumerate() {
            u.push(format!("load_sp{}", k + 1), "%", *l);
        }
        for (k, b) in self.state.providers.bandwidth.iter().enumerate() {
            u.push(format!("bandwidth_sp{}", k + 1), "%", *b);
        }
        u.push("p_sleep", "%", self.state.p);
        u
    }

    fn features(&self, u: &UncertaintyVector) -> Vec<FeatureVector> {
        let tail = u.values();
        let (wf, p) = self.decode(u);
        self.space
            .options()
            .iter()
            .map(|o| {
                let mut v = o.config.clone();
                v.extend_from_slice(&tail);
                v.extend(provider_contributions(
                    &wf,
                    &Setting::from_config(&o.config),
                    p,
                ));
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
            self.apply_profile();
        } else {
            self.step_uncertainties();
        }
    }
}
