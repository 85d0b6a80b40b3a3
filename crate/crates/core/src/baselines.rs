//! LLL and Seysen reduction.

use serde::{Deserialize, Serialize};

use crate::error::{LatticeError, Result};
use crate::linalg::{dot, dual_basis, gram_schmidt, norm_sq, round_to_i64, Basis, ReductionState, UnimodularTransform};
use crate::report::{ReductionReport, ReductionTrace};

/// Slack allowed on the size-reduction and Lovász postconditions.
const POST_TOL: f64 = 1e-9;
/// Fresh passes attempted when rounding drift breaks the postconditions.
const MAX_LLL_PASSES: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LllConfig {
    pub delta: f64,
}

impl Default for LllConfig {
    fn default() -> Self {
        LllConfig { delta: 0.75 }
    }
}

impl LllConfig {
    pub fn validate(&self) -> Result<()> {
        if self.delta > 0.25 && self.delta <= 1.0 {
            Ok(())
        } else {
            Err(LatticeError::InvalidParameter(format!(
                "LLL delta must lie in (1/4, 1], got {}",
                self.delta
            )))
        }
    }
}

/// Working Gram-Schmidt data of one LLL pass.
struct LllState {
    state: ReductionState,
    mu: Vec<Vec<f64>>,
    bstar: Vec<f64>,
}

impl LllState {
    fn new(state: ReductionState) -> Result<Self> {
        let gs = gram_schmidt(&state.basis)?;
        Ok(LllState {
            state,
            mu: gs.mu,
            bstar: gs.norms_sq,
        })
    }

    /// Size-reduces `b_k` against `b_l`. Returns whether it changed.
    fn reduce(&mut self, k: usize, l: usize) -> Result<bool> {
        if self.mu[k][l].abs() <= 0.5 {
            return Ok(false);
        }
        let q = round_to_i64(self.mu[k][l])?;
        self.state.sub_multiple(k, l, q)?;
        let qf = q as f64;
        self.mu[k][l] -= qf;
        for j in 0..l {
            self.mu[k][j] -= qf * self.mu[l][j];
        }
        Ok(true)
    }

    fn swap(&mut self, k: usize) {
        let n = self.bstar.len();
        self.state.swap(k, k - 1);
        for j in 0..k - 1 {
            let t = self.mu[k][j];
            self.mu[k][j] = self.mu[k - 1][j];
            self.mu[k - 1][j] = t;
        }
        let m = self.mu[k][k - 1];
        let b = self.bstar[k] + m * m * self.bstar[k - 1];
        self.mu[k][k - 1] = m * self.bstar[k - 1] / b;
        self.bstar[k] = self.bstar[k - 1] * self.bstar[k] / b;
        self.bstar[k - 1] = b;
        for i in k + 1..n {
            let t = self.mu[i][k];
            self.mu[i][k] = self.mu[i][k - 1] - m * t;
            self.mu[i][k - 1] = t + self.mu[k][k - 1] * self.mu[i][k];
        }
    }
}

/// True when `basis` is size-reduced and satisfies the Lovász condition.
pub fn is_lll_reduced(basis: &Basis, delta: f64) -> Result<bool> {
    let gs = gram_schmidt(basis)?;
    let n = basis.rank();
    for i in 1..n {
        if (0..i).any(|j| gs.mu[i][j].abs() > 0.5 + POST_TOL) {
            return Ok(false);
        }
        let m = gs.mu[i][i - 1];
        if gs.norms_sq[i] < (delta - m * m) * gs.norms_sq[i - 1] * (1.0 - POST_TOL) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Textbook LLL. `vector_comparisons` counts size-reduction candidates
/// examined (one per `(k, l)` pair), `accepted_updates` the size reductions
/// that changed a column, and `wall_rounds` the passes over fresh
/// Gram-Schmidt data (normally 1).
pub fn lll_reduce(basis: &Basis, config: &LllConfig) -> Result<(Basis, UnimodularTransform, ReductionReport)> {
    config.validate()?;
    let gs = gram_schmidt(basis)?;
    let mut report = ReductionReport::start(basis, &gs);
    let mut state = ReductionState::new(basis.clone());
    let n = basis.rank();
    for _ in 0..MAX_LLL_PASSES {
        report.wall_rounds += 1;
        let mut lll = LllState::new(state)?;
        let mut k = 1;
        while k < n {
            for l in (0..k).rev() {
                report.vector_comparisons += 1;
                if lll.reduce(k, l)? {
                    report.accepted_updates += 1;
                } else {
                    report.ineffective_attempts += 1;
                }
            }
            let m = lll.mu[k][k - 1];
            if lll.bstar[k] < (config.delta - m * m) * lll.bstar[k - 1] {
                lll.swap(k);
                k = (k - 1).max(1);
            } else {
                k += 1;
            }
        }
        state = lll.state;
        if is_lll_reduced(&state.basis, config.delta)? {
            break;
        }
    }
    report.finish(&state.basis);
    let (b, u) = state.into_parts();
    Ok((b, u, report))
}

/// `sum_i ||b_i||^2 ||d_i||^2` with `D` the dual of `basis`.
pub fn seysen_measure(basis: &Basis) -> Result<f64> {
    let d = dual_basis(basis)?;
    Ok(measure(&basis.column_norms_sq(), &d.column_norms_sq()))
}

fn measure(primal: &[f64], dual: &[f64]) -> f64 {
    primal.iter().zip(dual).map(|(a, b)| a * b).sum()
}

/// Safety cap on accepted pairwise updates.
const MAX_SEYSEN_UPDATES: u64 = 1_000_000;

/// Seysen reduction: sweep all ordered pairs `(i, j)`, `i != j`, applying
/// `b_j <- b_j + c b_i`, `d_i <- d_i - c d_j` with the integer `c` that
/// minimizes Seysen's measure, until a full sweep changes nothing. An update
/// is kept only if the measure strictly drops. The dual is recomputed from
/// the primal at the start of every sweep.
pub fn seysen_reduce(basis: &Basis) -> Result<(Basis, UnimodularTransform, ReductionReport)> {
    let gs = gram_schmidt(basis)?;
    let mut report = ReductionReport::start(basis, &gs);
    let mut state = ReductionState::new(basis.clone());
    let n = basis.rank();
    let mut dual = dual_basis(basis)?.into_columns();
    report.trace = ReductionTrace::default();
    report.trace.measure.push(measure(&basis.column_norms_sq(), &column_norms_sq(&dual)));
    loop {
        report.wall_rounds += 1;
        let mut changed = false;
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                report.vector_comparisons += 1;
                if seysen_step(&mut state, &mut dual, i, j)? {
                    changed = true;
                    report.accepted_updates += 1;
                    let s = measure(&state.basis.column_norms_sq(), &column_norms_sq(&dual));
                    report.trace.measure.push(s);
                } else {
                    report.ineffective_attempts += 1;
                }
            }
        }
        if !changed {
            break;
        }
        if report.accepted_updates >= MAX_SEYSEN_UPDATES {
            report.hit_update_cap = true;
            break;
        }
        dual = dual_basis(&state.basis)?.into_columns();
    }
    report.finish(&state.basis);
    let (b, u) = state.into_parts();
    Ok((b, u, report))
}

fn column_norms_sq(columns: &[Vec<f64>]) -> Vec<f64> {
    columns.iter().map(|c| norm_sq(c)).collect()
}

/// One pairwise Seysen update on `(i, j)`; returns whether it was applied.
fn seysen_step(state: &mut ReductionState, dual: &mut [Vec<f64>], i: usize, j: usize) -> Result<bool> {
    let bi = state.basis.column(i);
    let bj = state.basis.column(j);
    let (nbi, nbj) = (norm_sq(bi), norm_sq(bj));
    let (ndi, ndj) = (norm_sq(&dual[i]), norm_sq(&dual[j]));
    let bij = dot(bi, bj);
    let dij = dot(&dual[i], &dual[j]);
    let c = round_to_i64(0.5 * (dij / ndj - bij / nbi))?;
    if c == 0 {
        return Ok(false);
    }
    let cf = c as f64;
    let new_bj = nbj + 2.0 * cf * bij + cf * cf * nbi;
    let new_di = ndi - 2.0 * cf * dij + cf * cf * ndj;
    let before = nbj * ndj + nbi * ndi;
    let after = new_bj * ndj + nbi * new_di;
    if !(after < before && before - after > 1e-12 * before) {
        return Ok(false);
    }
    state.sub_multiple(j, i, -c)?;
    let dj = dual[j].clone();
    for (x, y) in dual[i].iter_mut().zip(&dj) {
        *x -= cf * y;
    }
    Ok(true)
}
