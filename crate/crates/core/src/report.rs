//! Per-run statistics shared by every reducer.

use serde::{Deserialize, Serialize};

use crate::linalg::{Basis, GramSchmidt};

/// Statistics of one reduction run. Serializes to a flat JSON object.
///
/// The orthogonality defects of large dual bases overflow `f64`; the
/// `log_od_*` fields carry the natural logarithm, which always stays finite
/// (`od_*` then serializes as `null`).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReductionReport {
    pub accepted_updates: u64,
    pub ineffective_attempts: u64,
    pub cvp_calls: u64,
    pub vector_comparisons: u64,
    pub od_before: f64,
    pub od_after: f64,
    pub wall_rounds: u64,
    pub log_od_before: f64,
    pub log_od_after: f64,
    /// Largest `||b_i - s_i|| / ||b_i||` over accepted updates.
    pub max_residual_ratio: f64,
    /// True when the run stopped on the `max_updates` safety cap.
    pub hit_update_cap: bool,
    pub seed: Option<u64>,
    #[serde(skip)]
    pub trace: ReductionTrace,
}

/// Basis size after the start and after every accepted update. LLL leaves
/// it at the starting point only, since its size reductions and swaps do not
/// shrink the basis step by step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReductionTrace {
    /// `sum_i ||b_i||^2`
    pub frobenius_sq: Vec<f64>,
    /// `sum_i ln ||b_i||`; differs from `ln od` by the constant log volume.
    pub log_norm_product: Vec<f64>,
    /// Seysen's measure `sum_i ||b_i||^2 ||d_i||^2`, recorded only by the
    /// Seysen reducer.
    pub measure: Vec<f64>,
}

impl ReductionTrace {
    pub fn record(&mut self, basis: &Basis) {
        let norms = basis.column_norms_sq();
        self.frobenius_sq.push(norms.iter().sum());
        self.log_norm_product.push(norms.iter().map(|v| 0.5 * v.ln()).sum());
    }

    /// Each recorded step strictly shrinks `sum ||b_i||^2` and never grows
    /// the norm product (hence the orthogonality defect).
    pub fn is_monotone(&self) -> bool {
        let frob = self.frobenius_sq.windows(2).all(|w| w[1] < w[0]);
        let od = self
            .log_norm_product
            .windows(2)
            .all(|w| w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0));
        let measure = self.measure.windows(2).all(|w| w[1] < w[0]);
        frob && od && measure
    }
}

impl ReductionReport {
    pub(crate) fn start(basis: &Basis, gs: &GramSchmidt) -> Self {
        let log_od = crate::linalg::log_od_with(basis, gs);
        let mut report = ReductionReport {
            od_before: log_od.exp(),
            log_od_before: log_od,
            od_after: log_od.exp(),
            log_od_after: log_od,
            ..Default::default()
        };
        report.trace.record(basis);
        report
    }

    pub(crate) fn finish(&mut self, basis: &Basis) {
        // A basis reachable by unimodular steps is never degenerate; if
        // rounding makes it look so, keep the previous value.
        if let Ok(log_od) = crate::linalg::log_orthogonality_defect(basis) {
            self.log_od_after = log_od;
            self.od_after = log_od.exp();
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
