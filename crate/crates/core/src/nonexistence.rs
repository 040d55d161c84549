//! Probability that no finite MLE exists when an even sample is split
//! equally between the two D-optimal levels.

use crate::error::{invalid, Result};
use crate::report::{Cell, Table};
use crate::response_models::{d_optimal_canonical, ModelKind};

/// Sample sizes of the reference table.
pub const DEFAULT_SIZES: [u64; 6] = [4, 10, 20, 40, 100, 200];

/// Inputs of the closed form: response probabilities at the two levels and
/// `s = n / 2` measurements per level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoMleInputs {
    pub p1: f64,
    pub p2: f64,
    pub s: u64,
    pub n: u64,
}

impl NoMleInputs {
    pub fn new(p1: f64, p2: f64, n: u64) -> Result<Self> {
        if n < 2 || n % 2 != 0 {
            return invalid(format!("sample size must be even and at least 2, got {n}"));
        }
        if !(0.0 < p1 && p1 < p2 && p2 < 1.0) {
            return invalid(format!("need 0 < p1 < p2 < 1, got p1={p1}, p2={p2}"));
        }
        Ok(Self { p1, p2, s: n / 2, n })
    }

    /// No MLE exists iff the responses are constant at either level.
    pub fn probability(&self) -> f64 {
        let s = self.s as i32;
        // chance that a level shows only one kind of response
        let constant = |p: f64| p.powi(s) + (1.0 - p).powi(s);
        let (u1, u2) = (constant(self.p1), constant(self.p2));
        let p = if u1.max(u2) < 0.5 {
            u1 + u2 - u1 * u2
        } else {
            let mixed = |p: f64| (1.0 - p.powi(s)) - (1.0 - p).powi(s);
            1.0 - mixed(self.p1) * mixed(self.p2)
        };
        p.clamp(0.0, 1.0)
    }
}

/// Probability of MLE non-existence under the D-optimal design with `n` total
/// measurements, using freshly optimized canonical levels.
pub fn prob_no_mle(model: ModelKind, n: u64) -> Result<f64> {
    if n < 2 || n % 2 != 0 {
        return invalid(format!("sample size must be even and at least 2, got {n}"));
    }
    let pts = d_optimal_canonical(model)?;
    Ok(NoMleInputs::new(pts.p1, pts.p2, n)?.probability())
}

/// One row per model: canonical levels and the response probabilities there.
pub fn design_points_table(models: &[ModelKind]) -> Result<Table> {
    let mut table = Table::new("D-optimal canonical factor levels", &["model", "z1", "z2", "F(z1)", "F(z2)"], 3);
    for &m in models {
        let p = d_optimal_canonical(m)?;
        table.push_row(vec![m.name().into(), p.z1.into(), p.z2.into(), p.p1.into(), p.p2.into()]);
    }
    Ok(table)
}

/// Rows are sample sizes, columns are models.
pub fn no_mle_table(models: &[ModelKind], sizes: &[u64]) -> Result<Table> {
    let mut headers = vec!["n"];
    headers.extend(models.iter().map(|m| m.name()));
    let mut table = Table::new(
        "Probability that MLEs do not exist under the D-optimal design",
        &headers,
        8,
    );
    let points = models
        .iter()
        .map(|&m| d_optimal_canonical(m))
        .collect::<Result<Vec<_>>>()?;
    for &n in sizes {
        let mut row = vec![Cell::Int(n as i64)];
        for pts in &points {
            row.push(Cell::Num(NoMleInputs::new(pts.p1, pts.p2, n)?.probability()));
        }
        table.push_row(row);
    }
    Ok(table)
}
