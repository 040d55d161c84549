//! Binary-search initial design.
//!
//! The search is a resumable state machine: [`SearchState::next_level`] says
//! where to measure, [`SearchState::apply_response`] records the reply. Stages:
//!
//! 1. measure both ends of `[x_min, x_max]`; stop if MLEs already exist;
//! 2. bisect until a midpoint shows both responses (the anchor `x`);
//! 3. set `|eps| = (x_u - x_l) / 4` pointing away from the majority response;
//! 4. probe `x + eps`, then `x - eps`, checking existence after each;
//! 5. halve `eps` and repeat 4 until MLEs exist on all data so far.
//!
//! If the bisection bracket closes without a mixed stage (an all-1 stage
//! below all-0 ones), probing starts once from the closing point with `|eps|`
//! half the distance to the nearer end of the interval.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::likelihood::{fit_mle, mle_exists, FitOptions, FitResult, Observation, ObservationSet};
use crate::oracle::ResponseOracle;
use crate::response_models::{canonical_to_factor, d_optimal_canonical, LinkParams, ModelKind};
use crate::rng::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageRole {
    EndpointCheck,
    Bisection,
    EpsilonProbe,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    /// 1-based.
    pub stage: usize,
    pub x: f64,
    pub n: u64,
    pub k: u64,
    pub role: StageRole,
}

impl StageRecord {
    fn observation(&self) -> Observation {
        Observation { x: self.x, n: self.n, k: self.k }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    EndpointCheck,
    Bisection,
    Probing,
    Done,
    Failed,
}

impl Phase {
    pub fn is_terminal(self) -> bool {
        matches!(self, Phase::Done | Phase::Failed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeSide {
    Plus,
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    InvalidInterval,
    DegenerateResponse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub kind: FailureKind,
    pub message: String,
}

impl Failure {
    pub fn to_error(&self) -> Error {
        match self.kind {
            FailureKind::InvalidInterval => Error::InvalidInterval(self.message.clone()),
            FailureKind::DegenerateResponse => Error::DegenerateResponse(self.message.clone()),
        }
    }
}

/// Safety caps for responses that never mix (e.g. a deterministic threshold).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Limits {
    pub max_stages: usize,
    /// Smallest bisection width or `|eps|`, relative to the initial width.
    pub min_width_ratio: f64,
}

impl Default for Limits {
    fn default() -> Self {
        Self { max_stages: 200, min_width_ratio: 1e-9 }
    }
}

/// Which probe stages feed the reduced (method II) data set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeSubset {
    /// Only the probe that completed the existence condition.
    #[default]
    FinalProbe,
    /// Every probe measured before the condition was met.
    AllProbes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// All cumulated data.
    I,
    /// Endpoints, anchor and the completing probe(s).
    II,
}

/// Serializable snapshot of a search in progress.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchState {
    pub x_min: f64,
    pub x_max: f64,
    pub stage_size: u64,
    pub lower: f64,
    pub upper: f64,
    pub epsilon: Option<f64>,
    pub anchor: Option<f64>,
    pub next_probe: ProbeSide,
    pub phase: Phase,
    pub history: Vec<StageRecord>,
    pub limits: Limits,
    pub tie_seed: u64,
    pub tie_draws: u64,
    /// Set once the bisection has collapsed and probing restarted from the
    /// collapse point; a second collapse is a failure.
    #[serde(default)]
    pub recovered: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<Failure>,
}

impl SearchState {
    pub fn new(x_min: f64, x_max: f64, stage_size: u64, limits: Limits, tie_seed: u64) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite()) || x_min >= x_max {
            return invalid(format!("interval must satisfy x_min < x_max, got [{x_min}, {x_max}]"));
        }
        if stage_size < 2 {
            return invalid(format!("stage size must be at least 2, got {stage_size}"));
        }
        if limits.max_stages < 2 || !(limits.min_width_ratio > 0.0) {
            return invalid("limits must allow at least two stages and a positive width");
        }
        Ok(Self {
            x_min,
            x_max,
            stage_size,
            lower: x_min,
            upper: x_max,
            epsilon: None,
            anchor: None,
            next_probe: ProbeSide::Plus,
            phase: Phase::EndpointCheck,
            history: Vec::new(),
            limits,
            tie_seed,
            tie_draws: 0,
            recovered: false,
            failure: None,
        })
    }

    pub fn stages(&self) -> usize {
        self.history.len()
    }

    fn min_width(&self) -> f64 {
        self.limits.min_width_ratio * (self.x_max - self.x_min)
    }

    /// Level of the next stage.
    pub fn next_level(&self) -> Result<f64> {
        match self.phase {
            Phase::EndpointCheck => Ok(if self.history.is_empty() { self.x_min } else { self.x_max }),
            Phase::Bisection => Ok(0.5 * (self.lower + self.upper)),
            Phase::Probing => {
                let (anchor, eps) = self.anchor.zip(self.epsilon).ok_or_else(|| {
                    Error::Precondition("probing state without anchor or epsilon".into())
                })?;
                Ok(match self.next_probe {
                    ProbeSide::Plus => anchor + eps,
                    ProbeSide::Minus => anchor - eps,
                })
            }
            Phase::Done | Phase::Failed => {
                Err(Error::Precondition(format!("search already finished ({:?})", self.phase)))
            }
        }
    }

    fn role(&self) -> StageRole {
        match self.phase {
            Phase::Bisection => StageRole::Bisection,
            Phase::Probing => StageRole::EpsilonProbe,
            _ => StageRole::EndpointCheck,
        }
    }

    /// Cumulated data of every stage so far.
    pub fn observations(&self) -> ObservationSet {
        self.history.iter().map(StageRecord::observation).collect()
    }

    fn fail(&mut self, kind: FailureKind, message: String) {
        self.phase = Phase::Failed;
        self.failure = Some(Failure { kind, message });
    }

    fn tie_sign(&mut self) -> f64 {
        let bit = derive_seed(self.tie_seed, &[self.tie_draws]) & 1;
        self.tie_draws += 1;
        if bit == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// Records `k` successes out of `stage_size` at [`Self::next_level`] and
    /// advances the machine.
    pub fn apply_response(&mut self, k: u64) -> Result<Phase> {
        let x = self.next_level()?;
        let n = self.stage_size;
        if k > n {
            return invalid(format!("{k} successes reported for a stage of {n}"));
        }
        let record = StageRecord { stage: self.history.len() + 1, x, n, k, role: self.role() };
        self.history.push(record);

        match self.phase {
            Phase::EndpointCheck => {
                if self.history.len() == 2 {
                    let (lo, hi) = (self.history[0], self.history[1]);
                    if mle_exists(&self.observations()) {
                        self.phase = Phase::Done;
                    } else if lo.k == lo.n || hi.k == 0 {
                        let msg = format!(
                            "endpoint check contradicts an increasing curve: {}/{} at x_min={}, {}/{} at x_max={}",
                            lo.k, lo.n, self.x_min, hi.k, hi.n, self.x_max
                        );
                        self.fail(FailureKind::InvalidInterval, msg);
                    } else {
                        self.phase = Phase::Bisection;
                    }
                }
            }
            Phase::Bisection => {
                if k == 0 {
                    self.lower = x;
                } else if k == n {
                    self.upper = x;
                } else {
                    let sign = match (2 * k).cmp(&n) {
                        std::cmp::Ordering::Less => 1.0,
                        std::cmp::Ordering::Greater => -1.0,
                        std::cmp::Ordering::Equal => self.tie_sign(),
                    };
                    self.anchor = Some(x);
                    self.epsilon = Some(sign * (self.upper - self.lower) / 4.0);
                    self.next_probe = ProbeSide::Plus;
                    self.phase = Phase::Probing;
                }
                if self.phase == Phase::Bisection
                    && self.upper - self.lower < self.min_width()
                    && !self.recovered
                {
                    // an unlucky stage can put all-1 responses below all-0
                    // ones; probe outward from where the bracket closed
                    self.recovered = true;
                    let sign = self.tie_sign();
                    let anchor = 0.5 * (self.lower + self.upper);
                    let room = (anchor - self.x_min).min(self.x_max - anchor);
                    self.anchor = Some(anchor);
                    self.epsilon = Some(sign * room / 2.0);
                    self.next_probe = ProbeSide::Plus;
                    self.phase = Phase::Probing;
                } else if self.phase == Phase::Bisection && self.upper - self.lower < self.min_width() {
                    let msg = format!(
                        "bisection interval [{}, {}] shrank below {} without a mixed response",
                        self.lower,
                        self.upper,
                        self.min_width()
                    );
                    self.fail(FailureKind::DegenerateResponse, msg);
                }
            }
            Phase::Probing => {
                if mle_exists(&self.observations()) {
                    self.phase = Phase::Done;
                } else {
                    match self.next_probe {
                        ProbeSide::Plus => self.next_probe = ProbeSide::Minus,
                        ProbeSide::Minus => {
                            let eps = self.epsilon.unwrap_or(0.0) / 2.0;
                            self.epsilon = Some(eps);
                            self.next_probe = ProbeSide::Plus;
                            if eps.abs() < self.min_width() {
                                let msg = format!(
                                    "probe offset shrank below {} without satisfying the existence condition",
                                    self.min_width()
                                );
                                self.fail(FailureKind::DegenerateResponse, msg);
                            }
                        }
                    }
                }
            }
            Phase::Done | Phase::Failed => unreachable!("next_level rejects terminal phases"),
        }

        if !self.phase.is_terminal() && self.history.len() >= self.limits.max_stages {
            let msg = format!("stage cap of {} reached", self.limits.max_stages);
            self.fail(FailureKind::DegenerateResponse, msg);
        }
        Ok(self.phase)
    }

    /// Runs stages against `oracle` until the search finishes. Oracle errors
    /// leave the state as it was before the failing stage.
    pub fn drive<O: ResponseOracle + ?Sized>(&mut self, oracle: &mut O) -> Result<Phase> {
        while !self.phase.is_terminal() {
            let x = self.next_level()?;
            let k = oracle.measure(x, self.stage_size)?;
            self.apply_response(k)?;
        }
        Ok(self.phase)
    }

    /// Data used by the chosen estimation method.
    pub fn select_data(&self, method: Method, subset: ProbeSubset) -> Result<ObservationSet> {
        if self.phase != Phase::Done {
            return Err(Error::Precondition(format!(
                "data selection needs a finished search, phase is {:?}",
                self.phase
            )));
        }
        let records: Vec<&StageRecord> = match method {
            Method::I => self.history.iter().collect(),
            Method::II => {
                let anchor_stage = self
                    .history
                    .iter()
                    .rev()
                    .find(|r| r.role == StageRole::Bisection)
                    .map(|r| r.stage);
                let last_probe = self
                    .history
                    .iter()
                    .rev()
                    .find(|r| r.role == StageRole::EpsilonProbe)
                    .map(|r| r.stage);
                self.history
                    .iter()
                    .filter(|r| match r.role {
                        StageRole::EndpointCheck => true,
                        StageRole::Bisection => Some(r.stage) == anchor_stage,
                        StageRole::EpsilonProbe => {
                            subset == ProbeSubset::AllProbes || Some(r.stage) == last_probe
                        }
                    })
                    .collect()
            }
        };
        Ok(records.into_iter().map(StageRecord::observation).collect::<ObservationSet>().merged())
    }

    /// Checks the structural invariants of a (possibly deserialized) snapshot.
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidArgument(format!("malformed search state: {m}")));
        if !(self.x_min.is_finite() && self.x_max.is_finite() && self.x_min < self.x_max) {
            return fail("interval bounds out of order".into());
        }
        if self.stage_size < 2 {
            return fail("stage size below 2".into());
        }
        if !(self.lower < self.upper && self.lower >= self.x_min && self.upper <= self.x_max) {
            return fail(format!("current interval [{}, {}] is invalid", self.lower, self.upper));
        }
        for (i, r) in self.history.iter().enumerate() {
            if r.stage != i + 1 || r.k > r.n || !r.x.is_finite() {
                return fail(format!("history row {} is inconsistent", i + 1));
            }
        }
        match self.phase {
            Phase::EndpointCheck if self.history.len() >= 2 => {
                return fail("endpoint check already has two stages".into())
            }
            Phase::Probing => match (self.anchor, self.epsilon) {
                (Some(a), Some(e)) if a.is_finite() && e != 0.0 && e.is_finite() => {}
                _ => return fail("probing without anchor or with zero epsilon".into()),
            },
            Phase::Failed if self.failure.is_none() => {
                return fail("failed phase without diagnostic".into())
            }
            _ => {}
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let state: SearchState = serde_json::from_str(s)?;
        state.validate()?;
        Ok(state)
    }
}

/// Everything the search needs besides the oracle and the interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchConfig {
    pub stage_size: u64,
    pub limits: Limits,
    pub tie_seed: u64,
    pub probe_subset: ProbeSubset,
    pub fit: FitOptions,
}

impl SearchConfig {
    pub fn new(stage_size: u64) -> Self {
        Self {
            stage_size,
            limits: Limits::default(),
            tie_seed: 0,
            probe_subset: ProbeSubset::default(),
            fit: FitOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct InitialDesignResult {
    pub history: Vec<StageRecord>,
    /// Number of stages, endpoint checks included.
    pub stages: usize,
    pub data_method_i: ObservationSet,
    pub data_method_ii: ObservationSet,
    pub fit_i: FitResult,
    pub fit_ii: FitResult,
}

impl InitialDesignResult {
    /// Builds the result from a finished search.
    pub fn from_state(
        state: &SearchState,
        model: ModelKind,
        subset: ProbeSubset,
        fit: &FitOptions,
    ) -> Result<Self> {
        if let Some(f) = &state.failure {
            return Err(f.to_error());
        }
        let data_method_i = state.select_data(Method::I, subset)?;
        let data_method_ii = state.select_data(Method::II, subset)?;
        let fit_i = fit_mle(model, &data_method_i, fit)?;
        let fit_ii = fit_mle(model, &data_method_ii, fit)?;
        Ok(Self {
            history: state.history.clone(),
            stages: state.history.len(),
            data_method_i,
            data_method_ii,
            fit_i,
            fit_ii,
        })
    }

    pub fn data(&self, method: Method) -> &ObservationSet {
        match method {
            Method::I => &self.data_method_i,
            Method::II => &self.data_method_ii,
        }
    }

    pub fn fit(&self, method: Method) -> &FitResult {
        match method {
            Method::I => &self.fit_i,
            Method::II => &self.fit_ii,
        }
    }
}

/// Runs the whole initial design against `oracle` and fits both methods.
pub fn run_initial_design<O: ResponseOracle + ?Sized>(
    oracle: &mut O,
    model: ModelKind,
    interval: (f64, f64),
    config: &SearchConfig,
) -> Result<InitialDesignResult> {
    let mut state =
        SearchState::new(interval.0, interval.1, config.stage_size, config.limits, config.tie_seed)?;
    state.drive(oracle)?;
    InitialDesignResult::from_state(&state, model, config.probe_subset, &config.fit)
}

/// Factor levels of the locally D-optimal design at the estimated parameters.
pub fn recommended_next_levels(model: ModelKind, params: &LinkParams) -> Result<(f64, f64)> {
    let pts = d_optimal_canonical(model)?;
    Ok((canonical_to_factor(pts.z1, params)?, canonical_to_factor(pts.z2, params)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{ScriptedOracle, SimulatedOracle};

    fn alternating() -> impl FnMut(f64, u64) -> Result<u64> {
        let mut next = false;
        move |_x, n| {
            let mut k = 0;
            for _ in 0..n {
                if next {
                    k += 1;
                }
                next = !next;
            }
            Ok(k)
        }
    }

    #[test]
    fn alternating_oracle_stops_after_endpoint_check() {
        let mut oracle = alternating();
        let res =
            run_initial_design(&mut oracle, ModelKind::Logit, (0.0, 1.0), &SearchConfig::new(2))
                .unwrap();
        assert_eq!(res.stages, 2);
        assert_eq!(res.data_method_i, res.data_method_ii);
        assert!(res.history.iter().all(|r| r.role == StageRole::EndpointCheck));
    }

    #[test]
    fn deterministic_threshold_is_degenerate() {
        let mut oracle = |x: f64, n: u64| Ok(if x > 0.3 { n } else { 0 });
        let err =
            run_initial_design(&mut oracle, ModelKind::Logit, (0.0, 1.0), &SearchConfig::new(2))
                .unwrap_err();
        assert!(matches!(err, Error::DegenerateResponse(_)), "{err}");

        let mut state = SearchState::new(0.0, 1.0, 2, Limits::default(), 0).unwrap();
        state.drive(&mut oracle).unwrap();
        assert_eq!(state.phase, Phase::Failed);
        assert!(state.stages() <= Limits::default().max_stages);
    }

    #[test]
    fn stage_cap_stops_long_searches() {
        let mut oracle = |x: f64, n: u64| Ok(if x > 0.3 { n } else { 0 });
        let limits = Limits { max_stages: 10, min_width_ratio: 1e-12 };
        let mut state = SearchState::new(0.0, 1.0, 2, limits, 0).unwrap();
        state.drive(&mut oracle).unwrap();
        assert_eq!(state.stages(), 10);
        assert_eq!(state.failure.as_ref().unwrap().kind, FailureKind::DegenerateResponse);
    }

    #[test]
    fn collapsed_bracket_restarts_probing_once() {
        // all-1 at 8 with all-0 just below it; responses above 8 are mixed
        let mut oracle = |x: f64, n: u64| Ok(if x < 8.0 { 0 } else if x == 8.0 { n } else { n / 2 });
        let mut state = SearchState::new(0.0, 16.0, 2, Limits::default(), 5).unwrap();
        assert_eq!(state.drive(&mut oracle).unwrap(), Phase::Done);
        assert!(state.recovered);
        let probes: Vec<f64> = state
            .history
            .iter()
            .filter(|r| r.role == StageRole::EpsilonProbe)
            .map(|r| r.x)
            .collect();
        assert!(probes.iter().all(|&x| (0.0..=16.0).contains(&x)));
        assert!((probes[0] - 8.0).abs() > 3.9, "{probes:?}");
        assert!(mle_exists(&state.observations()));
    }

    #[test]
    fn invalid_interval_is_reported() {
        // everything succeeds: the lower endpoint is already saturated
        let mut oracle = |_x: f64, n: u64| Ok(n);
        let err =
            run_initial_design(&mut oracle, ModelKind::Logit, (0.0, 1.0), &SearchConfig::new(3))
                .unwrap_err();
        assert!(matches!(err, Error::InvalidInterval(_)));
        let mut oracle = |_x: f64, _n: u64| Ok(0);
        let err =
            run_initial_design(&mut oracle, ModelKind::Logit, (0.0, 1.0), &SearchConfig::new(3))
                .unwrap_err();
        assert!(matches!(err, Error::InvalidInterval(_)));
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(SearchState::new(1.0, 1.0, 2, Limits::default(), 0).is_err());
        assert!(SearchState::new(0.0, 1.0, 1, Limits::default(), 0).is_err());
        let mut s = SearchState::new(0.0, 1.0, 4, Limits::default(), 0).unwrap();
        assert!(s.apply_response(5).is_err());
        assert!(s.history.is_empty());
    }

    #[test]
    fn next_level_examples() {
        let fresh = SearchState::new(0.0, 8.0, 5, Limits::default(), 0).unwrap();
        assert_eq!(fresh.next_level().unwrap(), 0.0);

        let mut bis = fresh.clone();
        bis.phase = Phase::Bisection;
        bis.lower = 2.0;
        bis.upper = 6.0;
        assert_eq!(bis.next_level().unwrap(), 4.0);

        // anchor 4 found on [2, 6] with 1/5 successes: |eps| = 4/4, pointing up
        let mut p = SearchState::new(0.0, 8.0, 5, Limits::default(), 0).unwrap();
        p.apply_response(0).unwrap();
        p.apply_response(5).unwrap();
        p.lower = 2.0;
        p.upper = 6.0;
        p.apply_response(1).unwrap();
        assert_eq!(p.phase, Phase::Probing);
        assert_eq!(p.anchor, Some(4.0));
        assert_eq!(p.next_level().unwrap(), 5.0);

        let mut done = fresh;
        done.phase = Phase::Done;
        assert!(matches!(done.next_level(), Err(Error::Precondition(_))));
    }

    #[test]
    fn probe_alternates_and_halves() {
        let mut s = SearchState::new(-8.0, 8.0, 4, Limits::default(), 0).unwrap();
        s.apply_response(0).unwrap();
        s.apply_response(4).unwrap();
        s.apply_response(3).unwrap(); // anchor at 0, ybar = .75 -> eps = -4
        assert_eq!(s.epsilon, Some(-4.0));
        assert_eq!(s.next_level().unwrap(), -4.0);
        s.apply_response(0).unwrap(); // all zeros below the anchor: no reversal
        assert_eq!(s.next_level().unwrap(), 4.0);
        s.apply_response(4).unwrap(); // all ones above: still separated
        assert_eq!(s.epsilon, Some(-2.0));
        assert_eq!(s.next_level().unwrap(), -2.0);
        s.apply_response(1).unwrap(); // mixed below the anchor: done
        assert_eq!(s.phase, Phase::Done);
        let ii = s.select_data(Method::II, ProbeSubset::FinalProbe).unwrap();
        assert_eq!(ii.len(), 4);
        let all = s.select_data(Method::II, ProbeSubset::AllProbes).unwrap();
        assert_eq!(all.len(), 6);
        assert_eq!(s.select_data(Method::I, ProbeSubset::FinalProbe).unwrap().len(), 6);
    }

    #[test]
    fn tie_sign_comes_from_the_run_stream() {
        let signs: Vec<f64> = (0..64)
            .map(|seed| {
                let mut s = SearchState::new(-1.0, 1.0, 2, Limits::default(), seed).unwrap();
                s.apply_response(0).unwrap();
                s.apply_response(2).unwrap();
                s.apply_response(1).unwrap();
                s.epsilon.unwrap().signum()
            })
            .collect();
        assert!(signs.contains(&1.0) && signs.contains(&-1.0));
        let again: Vec<f64> = (0..64)
            .map(|seed| {
                let mut s = SearchState::new(-1.0, 1.0, 2, Limits::default(), seed).unwrap();
                s.apply_response(0).unwrap();
                s.apply_response(2).unwrap();
                s.apply_response(1).unwrap();
                s.epsilon.unwrap().signum()
            })
            .collect();
        assert_eq!(signs, again);
    }

    #[test]
    fn select_data_requires_done() {
        let s = SearchState::new(0.0, 1.0, 2, Limits::default(), 0).unwrap();
        assert!(s.select_data(Method::I, ProbeSubset::FinalProbe).is_err());
    }

    #[test]
    fn simulated_run_succeeds_and_is_consistent() {
        let params = LinkParams::canonical();
        for seed in 0..50 {
            let mut oracle = SimulatedOracle::new(ModelKind::Cloglog, params, seed);
            let mut cfg = SearchConfig::new(5);
            cfg.tie_seed = seed;
            let res = run_initial_design(&mut oracle, ModelKind::Cloglog, (-5.7, 14.3), &cfg).unwrap();
            assert_eq!(res.stages, res.history.len());
            assert!(mle_exists(&res.data_method_i));
            assert!(mle_exists(&res.data_method_ii));
            for r in res.data_method_ii.records() {
                assert!(res.data_method_i.records().iter().any(|q| q.x == r.x && q.n >= r.n));
            }
        }
    }

    #[test]
    fn json_snapshot_round_trips_and_validates() {
        let mut oracle = ScriptedOracle::parse("0/3 3/3 3/3 1/3").unwrap();
        let mut s = SearchState::new(0.0, 10.0, 3, Limits::default(), 5).unwrap();
        for _ in 0..4 {
            let x = s.next_level().unwrap();
            let k = oracle.measure(x, 3).unwrap();
            s.apply_response(k).unwrap();
        }
        let json = s.to_json().unwrap();
        let back = SearchState::from_json(&json).unwrap();
        assert_eq!(back, s);
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["phase"], "probing");
        assert_eq!(v["history"][2]["role"], "bisection");
        assert_eq!(v["history"][0]["stage"], 1);

        let broken = json.replace("\"stage\": 2", "\"stage\": 7");
        assert!(SearchState::from_json(&broken).is_err());
        assert!(SearchState::from_json("{\"phase\": 3}").is_err());
    }

    #[test]
    fn recommended_levels_map_canonical_points() {
        let p = LinkParams::new(0.240, -60.628).unwrap();
        let (x1, x2) = recommended_next_levels(ModelKind::Cloglog, &p).unwrap();
        assert!((x2 - 256.7).abs() < 0.1);
        assert!(x1 < x2);
    }
}
