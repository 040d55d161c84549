//! Comparison design: `M` equally spaced levels with `n_m` measurements each,
//! and the empirical rate at which it fails to identify the MLE.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::likelihood::{mle_exists, Observation, ObservationSet};
use crate::report::{Cell, Table};
use crate::response_models::{LinkParams, ModelKind};
use crate::rng::{derive_seed, stream};

/// `(M, n_m)` rows of the reference grid.
pub const DEFAULT_GRID: [(usize, u64); 20] = [
    (5, 1),
    (5, 2),
    (5, 10),
    (5, 20),
    (5, 100),
    (5, 1000),
    (10, 1),
    (10, 2),
    (10, 5),
    (10, 10),
    (10, 50),
    (10, 500),
    (50, 1),
    (50, 2),
    (50, 20),
    (100, 1),
    (100, 2),
    (100, 10),
    (1000, 1),
    (1000, 2),
];

/// `(M, n_m, d)` entries of the reference table that contradict their
/// neighbours under any monotone model.
pub const SUSPECT_CELLS: [(usize, u64, f64); 2] = [(10, 50, 100.0), (10, 500, 100.0)];

pub fn is_suspect(m: usize, n_m: u64, d: f64) -> bool {
    SUSPECT_CELLS.contains(&(m, n_m, d))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridDesign {
    pub levels: usize,
    pub per_level: u64,
    pub x_min: f64,
    pub x_max: f64,
}

impl GridDesign {
    pub fn new(levels: usize, per_level: u64, x_min: f64, x_max: f64) -> Result<Self> {
        if levels < 2 {
            return invalid(format!("need at least 2 levels, got {levels}"));
        }
        if per_level < 1 {
            return invalid("need at least one measurement per level");
        }
        if !(x_min.is_finite() && x_max.is_finite() && x_min < x_max) {
            return invalid(format!("bad interval [{x_min}, {x_max}]"));
        }
        Ok(Self { levels, per_level, x_min, x_max })
    }

    /// Level `j` of `0..M`, endpoints included.
    pub fn level(&self, j: usize) -> f64 {
        if j + 1 == self.levels {
            return self.x_max;
        }
        self.x_min + j as f64 * (self.x_max - self.x_min) / (self.levels - 1) as f64
    }

    pub fn levels(&self) -> Vec<f64> {
        (0..self.levels).map(|j| self.level(j)).collect()
    }
}

/// Measures every level of `design`. Level `j` draws from its own stream
/// `(seed, j)`, so designs that differ only in `n_m` share their first
/// responses.
pub fn run_grid(
    model: ModelKind,
    params: &LinkParams,
    design: &GridDesign,
    seed: u64,
) -> (ObservationSet, bool) {
    let mut data = ObservationSet::new();
    for j in 0..design.levels {
        let x = design.level(j);
        let p = model.prob(params.eta(x));
        let k = if p <= 0.0 {
            0
        } else if p >= 1.0 {
            design.per_level
        } else {
            let mut rng = stream(seed, &[j as u64]);
            (0..design.per_level).filter(|_| rng.random::<f64>() < p).count() as u64
        };
        data.push(Observation { x, n: design.per_level, k });
    }
    let exists = mle_exists(&data);
    (data, exists)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub levels: usize,
    pub per_level: u64,
    pub d: f64,
    pub runs: usize,
    pub no_mle: usize,
}

impl GridCell {
    pub fn p_no_mle(&self) -> f64 {
        self.no_mle as f64 / self.runs as f64
    }
}

/// Monte Carlo rate of MLE non-existence for every `(d, M, n_m)`, with the
/// interval placed as in the binary-search study: `h ~ Uniform(4, d - 4)`,
/// interval `[h - d, h]`, true parameters `a = 1`, `b = 0`.
///
/// Run `r` of length index `i` uses the same placement and response streams
/// for every `(M, n_m)`.
pub fn simulate_grid_nonexistence(
    model: ModelKind,
    d_list: &[f64],
    grid: &[(usize, u64)],
    runs: usize,
    seed: u64,
) -> Result<Vec<GridCell>> {
    if runs == 0 {
        return invalid("runs must be at least 1");
    }
    if let Some(d) = d_list.iter().find(|&&d| !(d > 8.0 && d.is_finite())) {
        return invalid(format!("interval length must exceed 8, got {d}"));
    }
    for &(m, n_m) in grid {
        GridDesign::new(m, n_m, 0.0, 1.0)?;
    }
    let truth = LinkParams::canonical();
    let mut cells = Vec::with_capacity(d_list.len() * grid.len());
    for (di, &d) in d_list.iter().enumerate() {
        for &(m, n_m) in grid {
            let no_mle = (0..runs)
                .into_par_iter()
                .filter(|&r| {
                    let h = stream(seed, &[di as u64, r as u64, 0]).random_range(4.0..d - 4.0);
                    let design = GridDesign { levels: m, per_level: n_m, x_min: h - d, x_max: h };
                    let run_seed = derive_seed(seed, &[di as u64, r as u64, 1]);
                    !run_grid(model, &truth, &design, run_seed).1
                })
                .count();
            cells.push(GridCell { levels: m, per_level: n_m, d, runs, no_mle });
        }
    }
    Ok(cells)
}

/// Long format, one row per cell: `M, n_m, d, runs, p_no_mle`.
pub fn grid_table(model: ModelKind, cells: &[GridCell]) -> Table {
    let mut t = Table::new(
        format!("Empirical probability of MLE non-existence, equally spaced levels ({model})"),
        &["M", "n_m", "d", "runs", "p_no_mle"],
        4,
    );
    for c in cells {
        t.push_row(vec![
            Cell::Int(c.levels as i64),
            Cell::Int(c.per_level as i64),
            Cell::Num(c.d),
            Cell::Int(c.runs as i64),
            Cell::Num(c.p_no_mle()),
        ]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn levels_include_endpoints() {
        let g = GridDesign::new(5, 1, -2.0, 2.0).unwrap();
        assert_eq!(g.levels(), [-2.0, -1.0, 0.0, 1.0, 2.0]);
        let g = GridDesign::new(7, 1, -5.7, 4.3).unwrap();
        assert_eq!(g.level(6), 4.3);
        assert!(GridDesign::new(1, 1, 0.0, 1.0).is_err());
        assert!(GridDesign::new(2, 0, 0.0, 1.0).is_err());
        assert!(GridDesign::new(2, 1, 1.0, 1.0).is_err());
    }

    #[test]
    fn two_single_measurements_never_identify() {
        let g = GridDesign::new(2, 1, -1.0, 1.0).unwrap();
        for seed in 0..500 {
            let (data, exists) = run_grid(ModelKind::Logit, &LinkParams::canonical(), &g, seed);
            assert!(!exists);
            assert_eq!(data.total_trials(), 2);
        }
    }

    #[test]
    fn more_measurements_never_hurt() {
        let truth = LinkParams::canonical();
        for seed in 0..300 {
            let mut prev = false;
            for n_m in [1, 2, 5, 10, 50] {
                let g = GridDesign::new(6, n_m, -3.0, 2.0).unwrap();
                let exists = run_grid(ModelKind::Cloglog, &truth, &g, seed).1;
                assert!(exists || !prev, "seed {seed}, n_m {n_m}");
                prev = exists;
            }
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(simulate_grid_nonexistence(ModelKind::Cloglog, &[8.0], &[(5, 1)], 10, 0).is_err());
        assert!(simulate_grid_nonexistence(ModelKind::Cloglog, &[10.0], &[(5, 1)], 0, 0).is_err());
        assert!(simulate_grid_nonexistence(ModelKind::Cloglog, &[10.0], &[(1, 1)], 10, 0).is_err());
    }

    #[test]
    fn report_layout_and_suspects() {
        let cells =
            simulate_grid_nonexistence(ModelKind::Cloglog, &[10.0], &[(5, 1), (100, 1)], 200, 3).unwrap();
        let t = grid_table(ModelKind::Cloglog, &cells);
        assert_eq!(t.headers, ["M", "n_m", "d", "runs", "p_no_mle"]);
        assert!(cells[0].p_no_mle() > 0.8);
        assert!(cells[1].p_no_mle() < 0.05);
        assert!(is_suspect(10, 500, 100.0));
        assert!(!is_suspect(10, 10, 100.0));
    }
}
