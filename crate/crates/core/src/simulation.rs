//! Monte Carlo study of the binary search: random interval placement around
//! a canonical curve, repeated searches, and percentile summaries.
//!
//! True parameters are fixed at `a = 1`, `b = 0`. For interval length `d`
//! each run draws `h ~ Uniform(4, d - 4)` and searches `[h - d, h]`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::likelihood::{d_criterion, fisher_information, fit_mle, FitOptions, FitResult, ObservationSet};
use crate::oracle::SimulatedOracle;
use crate::report::{Cell, Table};
use crate::response_models::{LinkParams, ModelKind};
use crate::rng::{derive_seed, stream};
use crate::search::{Limits, Method, ProbeSubset, SearchState};

/// Stage sizes of the reduced (desk-scale) grid.
pub const DESK_STAGE_SIZES: [u64; 7] = [2, 3, 4, 5, 10, 100, 1000];
/// Interval lengths shown in the summary tables.
pub const TABLE_LENGTHS: [f64; 3] = [10.0, 100.0, 1000.0];
/// The full 23-value stage-size grid.
pub const FULL_STAGE_SIZES: [u64; 23] =
    [2, 3, 4, 5, 6, 7, 8, 9, 10, 15, 20, 30, 40, 50, 60, 70, 80, 90, 100, 150, 200, 500, 1000];
/// The full interval-length grid.
pub const FULL_LENGTHS: [f64; 7] = [10.0, 15.0, 20.0, 50.0, 100.0, 200.0, 1000.0];

// Stream purposes inside one run's key.
const KEY_PLACEMENT: u64 = 0;
const KEY_ORACLE: u64 = 1;
const KEY_TIE: u64 = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub model: ModelKind,
    pub d_list: Vec<f64>,
    pub nk_list: Vec<u64>,
    pub runs: usize,
    pub seed: u64,
    /// Fit both estimation methods (skip for stage-count-only studies).
    pub fit: bool,
    pub probe_subset: ProbeSubset,
    pub fit_options: FitOptions,
    pub limits: Limits,
}

impl SimConfig {
    /// Desk-scale preset: 1000 runs over the seven table stage sizes.
    pub fn desk(model: ModelKind) -> Self {
        Self {
            model,
            d_list: TABLE_LENGTHS.to_vec(),
            nk_list: DESK_STAGE_SIZES.to_vec(),
            runs: 1000,
            seed: 2007,
            fit: true,
            probe_subset: ProbeSubset::default(),
            fit_options: FitOptions { max_iterations: 200, ..FitOptions::default() },
            limits: Limits::default(),
        }
    }

    /// Full grid: 23 stage sizes, 7 interval lengths, 5000 runs.
    pub fn full(model: ModelKind) -> Self {
        Self {
            d_list: FULL_LENGTHS.to_vec(),
            nk_list: FULL_STAGE_SIZES.to_vec(),
            runs: 5000,
            ..Self::desk(model)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return invalid("runs must be at least 1");
        }
        if self.d_list.is_empty() || self.nk_list.is_empty() {
            return invalid("need at least one interval length and one stage size");
        }
        if let Some(d) = self.d_list.iter().find(|&&d| !(d > 8.0 && d.is_finite())) {
            return invalid(format!("interval length must exceed 8, got {d}"));
        }
        if let Some(n) = self.nk_list.iter().find(|&&n| n < 2) {
            return invalid(format!("stage size must be at least 2, got {n}"));
        }
        Ok(())
    }
}

/// Outcome of one simulated search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub d: f64,
    pub n_k: u64,
    pub run: usize,
    /// Upper end of the interval `[h - d, h]`.
    pub h: f64,
    /// Stages used, endpoint checks included.
    pub stages: usize,
    pub failed: bool,
    /// D criterion at the method I / II estimates (present when the fit converged).
    pub d_i: Option<f64>,
    pub d_ii: Option<f64>,
    /// D criterion of the same designs at the true parameters.
    pub d_true_i: Option<f64>,
    pub d_true_ii: Option<f64>,
    pub a_hat_i: Option<f64>,
    pub b_hat_i: Option<f64>,
    pub a_hat_ii: Option<f64>,
    pub b_hat_ii: Option<f64>,
}

impl RunRecord {
    pub fn a_hat(&self, method: Method) -> Option<f64> {
        match method {
            Method::I => self.a_hat_i,
            Method::II => self.a_hat_ii,
        }
    }

    pub fn b_hat(&self, method: Method) -> Option<f64> {
        match method {
            Method::I => self.b_hat_i,
            Method::II => self.b_hat_ii,
        }
    }

    pub fn d_stat(&self, method: Method) -> Option<f64> {
        match method {
            Method::I => self.d_i,
            Method::II => self.d_ii,
        }
    }
}

/// All runs of one `(d, n_k)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub d: f64,
    pub n_k: u64,
    pub runs: Vec<RunRecord>,
}

impl CellResult {
    pub fn failures(&self) -> usize {
        self.runs.iter().filter(|r| r.failed).count()
    }

    pub fn stage_counts(&self) -> Vec<f64> {
        self.runs.iter().filter(|r| !r.failed).map(|r| r.stages as f64).collect()
    }

    pub fn mean_stages(&self) -> Option<f64> {
        summarize(&self.stage_counts()).ok().map(|s| s.mean)
    }

    fn collect(&self, f: impl Fn(&RunRecord) -> Option<f64>) -> Vec<f64> {
        self.runs.iter().filter_map(f).collect()
    }

    pub fn slope_estimates(&self, method: Method) -> Vec<f64> {
        self.collect(|r| r.a_hat(method))
    }

    pub fn intercept_estimates(&self, method: Method) -> Vec<f64> {
        self.collect(|r| r.b_hat(method))
    }

    pub fn d_statistics(&self, method: Method) -> Vec<f64> {
        self.collect(|r| r.d_stat(method))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub mean: f64,
    pub p5: f64,
    pub p95: f64,
    pub count: usize,
}

/// Nearest-rank percentile of an ascending slice: the value at 1-based rank
/// `ceil(p/100 * N)`.
pub fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let rank = ((p / 100.0) * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

/// Mean with nearest-rank 5th and 95th percentiles.
pub fn summarize(values: &[f64]) -> Result<SummaryStats> {
    if values.is_empty() {
        return invalid("cannot summarize an empty sample");
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(SummaryStats {
        mean: values.iter().sum::<f64>() / values.len() as f64,
        p5: nearest_rank(&sorted, 5.0),
        p95: nearest_rank(&sorted, 95.0),
        count: values.len(),
    })
}

fn converged(fit: &FitResult) -> bool {
    fit.converged && fit.a_hat.is_finite() && fit.b_hat.is_finite()
}

/// One run of the study, keyed by `(seed, d index, n_k index, run)`.
pub fn simulate_run(config: &SimConfig, d_index: usize, nk_index: usize, run: usize) -> RunRecord {
    let d = config.d_list[d_index];
    let n_k = config.nk_list[nk_index];
    let key = [d_index as u64, nk_index as u64, run as u64];
    let h = stream(config.seed, &[key[0], key[1], key[2], KEY_PLACEMENT]).random_range(4.0..d - 4.0);
    let truth = LinkParams::canonical();
    let mut oracle = SimulatedOracle::new(
        config.model,
        truth,
        derive_seed(config.seed, &[key[0], key[1], key[2], KEY_ORACLE]),
    );
    let tie_seed = derive_seed(config.seed, &[key[0], key[1], key[2], KEY_TIE]);

    let mut record = RunRecord {
        d,
        n_k,
        run,
        h,
        stages: 0,
        failed: true,
        d_i: None,
        d_ii: None,
        d_true_i: None,
        d_true_ii: None,
        a_hat_i: None,
        b_hat_i: None,
        a_hat_ii: None,
        b_hat_ii: None,
    };
    let Ok(mut state) = SearchState::new(h - d, h, n_k, config.limits, tie_seed) else {
        return record;
    };
    let outcome = state.drive(&mut oracle);
    record.stages = state.stages();
    if outcome.is_err() || state.failure.is_some() {
        return record;
    }
    record.failed = false;
    if !config.fit {
        return record;
    }
    let truth_d = |data: &ObservationSet| {
        fisher_information(config.model, &truth, data).ok().map(|j| d_criterion(&j))
    };
    for method in [Method::I, Method::II] {
        let Ok(data) = state.select_data(method, config.probe_subset) else {
            continue;
        };
        let d_true = truth_d(&data);
        let fit = fit_mle(config.model, &data, &config.fit_options).ok().filter(converged);
        let (a_hat, b_hat, d_hat) = match fit {
            Some(f) => (Some(f.a_hat), Some(f.b_hat), Some(d_criterion(&f.info))),
            None => (None, None, None),
        };
        match method {
            Method::I => {
                (record.d_true_i, record.a_hat_i, record.b_hat_i, record.d_i) = (d_true, a_hat, b_hat, d_hat)
            }
            Method::II => {
                (record.d_true_ii, record.a_hat_ii, record.b_hat_ii, record.d_ii) =
                    (d_true, a_hat, b_hat, d_hat)
            }
        }
    }
    record
}

/// Runs every `(d, n_k)` cell. Runs within a cell execute in parallel; the
/// result does not depend on scheduling. `progress` is called once per
/// finished cell.
pub fn simulate_binary_search_with_progress(
    config: &SimConfig,
    progress: impl Fn(&CellResult, usize, usize) + Sync,
) -> Result<Vec<CellResult>> {
    config.validate()?;
    let total = config.d_list.len() * config.nk_list.len();
    let mut cells = Vec::with_capacity(total);
    for (di, &d) in config.d_list.iter().enumerate() {
        for (ni, &n_k) in config.nk_list.iter().enumerate() {
            let runs: Vec<RunRecord> =
                (0..config.runs).into_par_iter().map(|r| simulate_run(config, di, ni, r)).collect();
            let cell = CellResult { d, n_k, runs };
            progress(&cell, cells.len() + 1, total);
            cells.push(cell);
        }
    }
    Ok(cells)
}

pub fn simulate_binary_search(config: &SimConfig) -> Result<Vec<CellResult>> {
    simulate_binary_search_with_progress(config, |_, _, _| {})
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableId {
    /// Stage counts.
    Stages,
    /// Estimates and D under method I.
    MethodI,
    /// Estimates and D under method II.
    MethodII,
}

impl TableId {
    pub fn from_number(n: u32) -> Result<Self> {
        match n {
            3 => Ok(TableId::Stages),
            4 => Ok(TableId::MethodI),
            5 => Ok(TableId::MethodII),
            _ => invalid(format!("simulation tables are 3, 4 and 5, got {n}")),
        }
    }
}

fn fmt_d(d: f64) -> String {
    if d.fract() == 0.0 {
        format!("{}", d as i64)
    } else {
        format!("{d}")
    }
}

fn distinct<T: PartialEq + Copy>(it: impl Iterator<Item = T>) -> Vec<T> {
    let mut out = Vec::new();
    for v in it {
        if !out.contains(&v) {
            out.push(v);
        }
    }
    out
}

fn find_cell(cells: &[CellResult], d: f64, n_k: u64) -> Option<&CellResult> {
    cells.iter().find(|c| c.d == d && c.n_k == n_k)
}

fn summary_cells(values: &[f64]) -> [Cell; 3] {
    match summarize(values) {
        Ok(s) => [Cell::Num(s.mean), Cell::Num(s.p5), Cell::Num(s.p95)],
        Err(_) => [Cell::Empty, Cell::Empty, Cell::Empty],
    }
}

fn wide_headers(lead: &[&str], ds: &[f64]) -> Vec<String> {
    let mut h: Vec<String> = lead.iter().map(|s| s.to_string()).collect();
    for &d in ds {
        for stat in ["mean", "p5", "p95"] {
            h.push(format!("{stat}_d{}", fmt_d(d)));
        }
    }
    h
}

/// Lays simulated cells out as a summary table: rows are stage sizes, column
/// groups are interval lengths, each with mean, 5th and 95th percentile.
pub fn render_table(id: TableId, model: ModelKind, cells: &[CellResult]) -> Table {
    let ds = distinct(cells.iter().map(|c| c.d));
    let nks = distinct(cells.iter().map(|c| c.n_k));
    match id {
        TableId::Stages => {
            let headers = wide_headers(&["n_k"], &ds);
            let mut t = Table {
                title: format!("Stages needed by the binary search ({model})"),
                headers,
                rows: Vec::new(),
                decimals: 2,
            };
            for &nk in &nks {
                let mut row = vec![Cell::Int(nk as i64)];
                for &d in &ds {
                    let vals = find_cell(cells, d, nk).map(CellResult::stage_counts).unwrap_or_default();
                    row.extend(summary_cells(&vals));
                }
                t.push_row(row);
            }
            t
        }
        TableId::MethodI | TableId::MethodII => {
            let method = if id == TableId::MethodI { Method::I } else { Method::II };
            let label = if method == Method::I { "I (all data)" } else { "II (endpoints, anchor, probe)" };
            let headers = wide_headers(&["panel", "n_k"], &ds);
            let mut t = Table {
                title: format!("Estimates after the binary search, method {label} ({model})"),
                headers,
                rows: Vec::new(),
                decimals: 2,
            };
            let panels: [(&str, fn(&CellResult, Method) -> Vec<f64>); 3] = [
                ("a_hat", CellResult::slope_estimates),
                ("b_hat", CellResult::intercept_estimates),
                ("D", CellResult::d_statistics),
            ];
            for (name, extract) in panels {
                for &nk in &nks {
                    // the method I intercept panel has no n_k = 2 row
                    if method == Method::I && name == "b_hat" && nk == 2 {
                        continue;
                    }
                    let mut row = vec![Cell::from(name), Cell::Int(nk as i64)];
                    for &d in &ds {
                        let vals =
                            find_cell(cells, d, nk).map(|c| extract(c, method)).unwrap_or_default();
                        row.extend(summary_cells(&vals));
                    }
                    t.push_row(row);
                }
            }
            t
        }
    }
}

/// Simulates and renders one of the summary tables.
pub fn reproduce_table(id: TableId, config: &SimConfig) -> Result<Table> {
    let mut config = config.clone();
    config.fit = config.fit || id != TableId::Stages;
    let cells = simulate_binary_search(&config)?;
    Ok(render_table(id, config.model, &cells))
}
