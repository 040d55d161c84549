//! Aggregated binomial data, the MLE existence condition, maximum-likelihood
//! fitting of `(a, b)`, Fisher information and the D criterion.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::response_models::{quantile, LinkParams, ModelKind};

/// `k` successes out of `n` trials at factor level `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub x: f64,
    pub n: u64,
    pub k: u64,
}

impl Observation {
    pub fn new(x: f64, n: u64, k: u64) -> Result<Self> {
        if !x.is_finite() {
            return invalid(format!("factor level must be finite, got {x}"));
        }
        if n == 0 {
            return invalid("trial count must be at least 1");
        }
        if k > n {
            return invalid(format!("success count {k} exceeds trial count {n}"));
        }
        Ok(Self { x, n, k })
    }

    #[inline]
    pub fn has_success(&self) -> bool {
        self.k >= 1
    }

    #[inline]
    pub fn has_failure(&self) -> bool {
        self.k < self.n
    }
}

/// A bag of aggregated binary-response records.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObservationSet {
    records: Vec<Observation>,
}

impl ObservationSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_records(records: impl IntoIterator<Item = Observation>) -> Self {
        Self { records: records.into_iter().collect() }
    }

    /// Builds a set from `(x, n, k)` triples, validating each.
    pub fn from_triples(triples: &[(f64, u64, u64)]) -> Result<Self> {
        triples
            .iter()
            .map(|&(x, n, k)| Observation::new(x, n, k))
            .collect::<Result<Vec<_>>>()
            .map(|records| Self { records })
    }

    pub fn push(&mut self, obs: Observation) {
        self.records.push(obs);
    }

    pub fn records(&self) -> &[Observation] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn total_trials(&self) -> u64 {
        self.records.iter().map(|r| r.n).sum()
    }

    pub fn total_successes(&self) -> u64 {
        self.records.iter().map(|r| r.k).sum()
    }

    /// Records with identical `x` summed, sorted by level.
    pub fn merged(&self) -> ObservationSet {
        let mut sorted = self.records.clone();
        sorted.sort_by(|a, b| a.x.total_cmp(&b.x));
        let mut out: Vec<Observation> = Vec::with_capacity(sorted.len());
        for r in sorted {
            match out.last_mut() {
                Some(last) if last.x == r.x => {
                    last.n += r.n;
                    last.k += r.k;
                }
                _ => out.push(r),
            }
        }
        ObservationSet { records: out }
    }

    /// Applies `x -> f(x)` to every level.
    pub fn map_levels(&self, f: impl Fn(f64) -> f64) -> ObservationSet {
        ObservationSet {
            records: self.records.iter().map(|r| Observation { x: f(r.x), ..*r }).collect(),
        }
    }

    /// Multiplies every trial and success count by `factor`.
    pub fn scale_counts(&self, factor: u64) -> ObservationSet {
        ObservationSet {
            records: self
                .records
                .iter()
                .map(|r| Observation { x: r.x, n: r.n * factor, k: r.k * factor })
                .collect(),
        }
    }
}

impl FromIterator<Observation> for ObservationSet {
    fn from_iter<I: IntoIterator<Item = Observation>>(iter: I) -> Self {
        Self::from_records(iter)
    }
}

/// Finite MLEs exist iff some failure lies strictly above some success and
/// some success lies strictly above some failure.
pub fn mle_exists(data: &ObservationSet) -> bool {
    let mut max_fail = f64::NEG_INFINITY;
    let mut min_fail = f64::INFINITY;
    let mut max_succ = f64::NEG_INFINITY;
    let mut min_succ = f64::INFINITY;
    let mut any_fail = false;
    let mut any_succ = false;
    for r in data.records() {
        if r.has_failure() {
            any_fail = true;
            max_fail = max_fail.max(r.x);
            min_fail = min_fail.min(r.x);
        }
        if r.has_success() {
            any_succ = true;
            max_succ = max_succ.max(r.x);
            min_succ = min_succ.min(r.x);
        }
    }
    any_fail && any_succ && max_fail > min_succ && max_succ > min_fail
}

/// Symmetric 2x2 information matrix, ordered (slope, intercept).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct InformationMatrix {
    pub aa: f64,
    pub ab: f64,
    pub bb: f64,
}

impl InformationMatrix {
    pub fn identity() -> Self {
        Self { aa: 1.0, ab: 0.0, bb: 1.0 }
    }

    pub fn det(&self) -> f64 {
        self.aa * self.bb - self.ab * self.ab
    }

    /// Inverse, or `None` when the matrix is numerically singular.
    pub fn inverse(&self) -> Option<InformationMatrix> {
        let det = self.det();
        let scale = self.aa.abs().max(self.bb.abs()).max(self.ab.abs());
        if !(det > 1e-14 * scale * scale) {
            return None;
        }
        Some(InformationMatrix { aa: self.bb / det, ab: -self.ab / det, bb: self.aa / det })
    }

    fn solve(&self, g: [f64; 2]) -> Option<[f64; 2]> {
        let inv = self.inverse()?;
        Some([inv.aa * g[0] + inv.ab * g[1], inv.ab * g[0] + inv.bb * g[1]])
    }
}

fn information_at(model: ModelKind, a: f64, b: f64, data: &ObservationSet) -> InformationMatrix {
    let mut j = InformationMatrix::default();
    for r in data.records() {
        let w = r.n as f64 * model.fisher_weight(a * r.x + b);
        j.aa += w * r.x * r.x;
        j.ab += w * r.x;
        j.bb += w;
    }
    j
}

/// Expected Fisher information `sum n_i w(eta_i) [x^2 x; x 1]` with
/// `w = f^2 / (F (1 - F))`. Tail contributions whose `F (1 - F)` underflows
/// count as zero.
pub fn fisher_information(
    model: ModelKind,
    params: &LinkParams,
    data: &ObservationSet,
) -> Result<InformationMatrix> {
    if !(params.a > 0.0 && params.a.is_finite() && params.b.is_finite()) {
        return invalid(format!("invalid link parameters a={}, b={}", params.a, params.b));
    }
    Ok(information_at(model, params.a, params.b, data))
}

/// Square root of the determinant, floored at zero.
pub fn d_criterion(j: &InformationMatrix) -> f64 {
    j.det().max(0.0).sqrt()
}

/// Binomial log-likelihood (without the combinatorial constant).
pub fn log_likelihood(model: ModelKind, a: f64, b: f64, data: &ObservationSet) -> f64 {
    data.records()
        .iter()
        .map(|r| {
            let eta = a * r.x + b;
            let mut ll = 0.0;
            if r.k > 0 {
                ll += r.k as f64 * model.ln_prob(eta);
            }
            if r.k < r.n {
                ll += (r.n - r.k) as f64 * model.ln_complement(eta);
            }
            ll
        })
        .sum()
}

/// Gradient of [`log_likelihood`] with respect to `(a, b)`.
pub fn score(model: ModelKind, a: f64, b: f64, data: &ObservationSet) -> [f64; 2] {
    let mut g = [0.0; 2];
    for r in data.records() {
        let eta = a * r.x + b;
        let resid = r.k as f64 - r.n as f64 * model.prob(eta);
        let s = resid * model.score_ratio(eta);
        g[0] += s * r.x;
        g[1] += s;
    }
    g
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Convergence threshold on the max-norm of the score.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub max_halvings: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { tolerance: 1e-8, max_iterations: 100, max_halvings: 20 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub a_hat: f64,
    pub b_hat: f64,
    pub se_a: f64,
    pub se_b: f64,
    /// Expected information at the estimate.
    pub info: InformationMatrix,
    pub log_likelihood: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl FitResult {
    pub fn params(&self) -> Result<LinkParams> {
        LinkParams::new(self.a_hat, self.b_hat)
    }
}

fn starting_point(model: ModelKind, data: &ObservationSet) -> (f64, f64) {
    let n_total = data.total_trials() as f64;
    let mean = data.records().iter().map(|r| r.n as f64 * r.x).sum::<f64>() / n_total;
    let var = data
        .records()
        .iter()
        .map(|r| r.n as f64 * (r.x - mean) * (r.x - mean))
        .sum::<f64>()
        / n_total;
    let a0 = if var > 0.0 { 1.0 / var.sqrt() } else { 1.0 };
    let p = (data.total_successes() as f64 / n_total).clamp(0.01, 0.99);
    let b0 = quantile(model, p).unwrap_or(0.0) - a0 * mean;
    (a0, b0)
}

/// Fisher-scoring maximization of the binomial log-likelihood.
///
/// Requires [`mle_exists`]; a fit that fails to reach the score tolerance is
/// returned with `converged = false` rather than as an error.
pub fn fit_mle(model: ModelKind, data: &ObservationSet, options: &FitOptions) -> Result<FitResult> {
    if data.is_empty() || !mle_exists(data) {
        return Err(Error::Precondition(
            "maximum-likelihood estimates do not exist for this data".into(),
        ));
    }
    let data = data.merged();
    let (mut a, mut b) = starting_point(model, &data);
    let mut ll = log_likelihood(model, a, b, &data);
    let mut converged = false;
    let mut iterations = 0;

    while iterations < options.max_iterations {
        let g = score(model, a, b, &data);
        if !(g[0].is_finite() && g[1].is_finite()) {
            break;
        }
        if g[0].abs().max(g[1].abs()) <= options.tolerance {
            converged = true;
            break;
        }
        iterations += 1;
        let info = information_at(model, a, b, &data);
        let Some(step) = info.solve(g) else { break };

        // Accept steps that do not lose more than rounding noise.
        let slack = 1e-12 * (1.0 + ll.abs());
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..=options.max_halvings {
            let (na, nb) = (a + t * step[0], b + t * step[1]);
            let nll = log_likelihood(model, na, nb, &data);
            if na.is_finite() && nb.is_finite() && nll.is_finite() && nll >= ll - slack {
                a = na;
                b = nb;
                ll = nll;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }

    let info = information_at(model, a, b, &data);
    let (se_a, se_b) = match info.inverse() {
        Some(inv) => (inv.aa.max(0.0).sqrt(), inv.bb.max(0.0).sqrt()),
        None => (f64::NAN, f64::NAN),
    };
    Ok(FitResult {
        a_hat: a,
        b_hat: b,
        se_a,
        se_b,
        info,
        log_likelihood: ll,
        converged: converged && se_a > 0.0 && se_b > 0.0,
        iterations,
    })
}
