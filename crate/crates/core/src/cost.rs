//! Cost of the initial design and the log-linear rule for choosing the stage
//! size from the interval length and the per-stage cost.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::report::{Cell, Table};
use crate::response_models::ModelKind;
use crate::simulation::{simulate_binary_search_with_progress, CellResult, SimConfig};

/// Number of stage costs in the default grid.
pub const STAGE_COST_POINTS: usize = 39;

/// Total cost of `stages` stages of `stage_size` measurements each, with unit
/// cost per measurement and `stage_cost` per stage.
pub fn total_cost(stages: f64, stage_size: f64, stage_cost: f64) -> f64 {
    stages * stage_cost + stages * stage_size
}

/// `points` values spaced evenly in log between `lo` and `hi`, both included.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..points)
        .map(|i| {
            if i + 1 == points {
                hi
            } else {
                (a + (b - a) * i as f64 / (points - 1) as f64).exp()
            }
        })
        .collect()
}

/// The default grid: 39 log-spaced stage costs in `[0.001, 1000]`.
pub fn default_stage_costs() -> Vec<f64> {
    log_grid(1e-3, 1e3, STAGE_COST_POINTS)
}

/// Mean stage count of one `(d, n_k)` cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStages {
    pub d: f64,
    pub n_k: u64,
    pub mean_k: f64,
}

impl MeanStages {
    pub fn from_cells(cells: &[CellResult]) -> Vec<MeanStages> {
        cells
            .iter()
            .filter_map(|c| c.mean_stages().map(|mean_k| MeanStages { d: c.d, n_k: c.n_k, mean_k }))
            .collect()
    }
}

/// Stage size with the smallest expected total cost at interval length `d`.
/// Ties go to the smaller stage size.
pub fn optimal_stage_size(summaries: &[MeanStages], d: f64, stage_cost: f64) -> Result<u64> {
    let mut candidates: Vec<&MeanStages> = summaries.iter().filter(|s| s.d == d).collect();
    if candidates.len() < 2 {
        return invalid(format!("need at least two stage sizes for d = {d}, found {}", candidates.len()));
    }
    candidates.sort_by_key(|s| s.n_k);
    let mut best = candidates[0];
    let mut best_cost = total_cost(best.mean_k, best.n_k as f64, stage_cost);
    for s in &candidates[1..] {
        let c = total_cost(s.mean_k, s.n_k as f64, stage_cost);
        if c < best_cost {
            best = s;
            best_cost = c;
        }
    }
    Ok(best.n_k)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostFitCoeffs {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub r_squared: f64,
    pub se_alpha: f64,
    pub se_beta: f64,
    pub se_gamma: f64,
}

impl CostFitCoeffs {
    /// Published coefficients for each model.
    pub fn published(model: ModelKind) -> Self {
        let (alpha, beta, gamma, r_squared, se_alpha, se_beta, se_gamma) = match model {
            ModelKind::Logit => (-0.964, -0.200, 0.839, 0.9613, 0.069, 0.013, 0.012),
            ModelKind::Probit => (-1.27, -0.223, 0.892, 0.9765, 0.058, 0.011, 0.010),
            ModelKind::Cloglog => (-1.063, -0.214, 0.850, 0.9753, 0.057, 0.010, 0.010),
        };
        Self { alpha, beta, gamma, r_squared, se_alpha, se_beta, se_gamma }
    }

    /// Continuous optimum `exp(alpha + beta log d + gamma log C_S)`.
    pub fn predict_raw(&self, d: f64, stage_cost: f64) -> f64 {
        (self.alpha + self.beta * d.ln() + self.gamma * stage_cost.ln()).exp()
    }
}

/// One `(d, C_S, optimal n_k)` observation for the log-linear fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimalPoint {
    pub d: f64,
    pub stage_cost: f64,
    pub n_k: u64,
}

fn count_distinct(values: impl Iterator<Item = f64>) -> usize {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v.len()
}

/// Least squares of `log n_k` on `(1, log d, log C_S)`.
pub fn fit_log_model(points: &[OptimalPoint]) -> Result<CostFitCoeffs> {
    let n = points.len();
    if n < 4 {
        return invalid(format!("need at least 4 points, got {n}"));
    }
    if count_distinct(points.iter().map(|p| p.d)) < 2
        || count_distinct(points.iter().map(|p| p.stage_cost)) < 2
    {
        return invalid("need at least two distinct interval lengths and two distinct stage costs");
    }
    if points.iter().any(|p| !(p.d > 0.0 && p.stage_cost > 0.0 && p.n_k > 0)) {
        return invalid("interval lengths, stage costs and stage sizes must be positive");
    }
    let x = DMatrix::from_fn(n, 3, |i, j| match j {
        0 => 1.0,
        1 => points[i].d.ln(),
        _ => points[i].stage_cost.ln(),
    });
    let y = DVector::from_iterator(n, points.iter().map(|p| (p.n_k as f64).ln()));
    let xtx = x.transpose() * &x;
    let Some(xtx_inv) = xtx.clone().try_inverse() else {
        return invalid("design matrix is rank deficient");
    };
    // reject near-singular designs that still invert numerically
    let scale = xtx.diagonal().max();
    if xtx.determinant().abs() <= 1e-12 * scale.powi(3) {
        return invalid("design matrix is rank deficient");
    }
    let coef = &xtx_inv * x.transpose() * &y;
    let resid = &y - &x * &coef;
    let sse = resid.norm_squared();
    let mean = y.mean();
    let sst: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let r_squared = if sst > 0.0 { (1.0 - sse / sst).clamp(0.0, 1.0) } else { 1.0 };
    let sigma2 = if n > 3 { sse / (n - 3) as f64 } else { 0.0 };
    let se = |j: usize| (sigma2 * xtx_inv[(j, j)]).sqrt();
    Ok(CostFitCoeffs {
        alpha: coef[0],
        beta: coef[1],
        gamma: coef[2],
        r_squared,
        se_alpha: se(0),
        se_beta: se(1),
        se_gamma: se(2),
    })
}

/// Recommended stage size: the fitted optimum rounded half up, at least 2.
pub fn predict_stage_size(coeffs: &CostFitCoeffs, d: f64, stage_cost: f64) -> Result<u64> {
    if !(d > 0.0 && d.is_finite()) {
        return invalid(format!("interval length must be positive, got {d}"));
    }
    if !(stage_cost > 0.0 && stage_cost.is_finite()) {
        return invalid(format!("stage cost must be positive, got {stage_cost}"));
    }
    let raw = coeffs.predict_raw(d, stage_cost);
    let rounded = (raw + 0.5).floor();
    Ok(if rounded.is_finite() { (rounded as u64).max(2) } else { u64::MAX })
}

/// Everything produced by the cost study.
#[derive(Debug, Clone, PartialEq)]
pub struct CostStudy {
    pub summaries: Vec<MeanStages>,
    pub points: Vec<OptimalPoint>,
    pub coeffs: CostFitCoeffs,
}

/// Optimal stage size for every interval length in `summaries` and every
/// stage cost, then the log-linear fit.
pub fn cost_study_from_summaries(summaries: Vec<MeanStages>, stage_costs: &[f64]) -> Result<CostStudy> {
    let mut ds: Vec<f64> = Vec::new();
    for s in &summaries {
        if !ds.contains(&s.d) {
            ds.push(s.d);
        }
    }
    let mut points = Vec::with_capacity(ds.len() * stage_costs.len());
    for &d in &ds {
        for &c in stage_costs {
            points.push(OptimalPoint { d, stage_cost: c, n_k: optimal_stage_size(&summaries, d, c)? });
        }
    }
    let coeffs = fit_log_model(&points)?;
    Ok(CostStudy { summaries, points, coeffs })
}

/// Simulates stage counts over `config` (fits skipped) and runs the cost study.
pub fn cost_study(
    config: &SimConfig,
    stage_costs: &[f64],
    progress: impl Fn(&CellResult, usize, usize) + Sync,
) -> Result<CostStudy> {
    let mut config = config.clone();
    config.fit = false;
    let cells = simulate_binary_search_with_progress(&config, progress)?;
    cost_study_from_summaries(MeanStages::from_cells(&cells), stage_costs)
}

/// `d, C_S, optimal, predicted` per point, predictions from `coeffs`.
pub fn points_table(points: &[OptimalPoint], coeffs: &CostFitCoeffs) -> Table {
    let mut t = Table::new(
        "Cost-optimal stage sizes",
        &["d", "C_S", "optimal_n_k", "predicted_n_k"],
        6,
    );
    for p in points {
        let predicted = predict_stage_size(coeffs, p.d, p.stage_cost).map(|v| Cell::Int(v as i64));
        t.push_row(vec![
            Cell::Num(p.d),
            Cell::Num(p.stage_cost),
            Cell::Int(p.n_k as i64),
            predicted.unwrap_or(Cell::Empty),
        ]);
    }
    t
}

/// Coefficient summary: estimate and standard error per term, then R^2.
pub fn coeffs_table(model: ModelKind, coeffs: &CostFitCoeffs) -> Table {
    let mut t = Table::new(
        format!("Fitted model log n_k = alpha + beta log d + gamma log C_S ({model})"),
        &["term", "estimate", "std_error"],
        4,
    );
    for (term, est, se) in [
        ("alpha", coeffs.alpha, coeffs.se_alpha),
        ("beta", coeffs.beta, coeffs.se_beta),
        ("gamma", coeffs.gamma, coeffs.se_gamma),
    ] {
        t.push_row(vec![term.into(), Cell::Num(est), Cell::Num(se)]);
    }
    t.push_row(vec!["r_squared".into(), Cell::Num(coeffs.r_squared), Cell::Empty]);
    t
}
