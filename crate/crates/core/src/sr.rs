//! Sequential reduction: a round-robin cursor reduces each column against
//! the sublattice spanned by all other columns, accepting an update only
//! when it shortens the column by the factor `tau`.
//!
//! The approximate-CVP step is pluggable:
//! * [`Subroutine::ExactCvp`] solves the sublattice CVP exactly (SR-CVP),
//! * [`Subroutine::Pair`] subtracts the best single rounded column (SR-Pair),
//! * [`Subroutine::Hash`] does the same over angular-LSH candidates (SR-Hash),
//! * [`Subroutine::Greedy`] only ever reduces the longest column.

use serde::Serialize;

use crate::cvp::{enumerate_cvp_with, DEFAULT_ENUMERATION_CAP};
use crate::error::{LatticeError, Result};
use crate::linalg::{dot, dual_basis, gram_schmidt, norm_sq, round_to_i64, Basis, ReductionState, UnimodularTransform};
use crate::lsh::LshParams;
use crate::report::ReductionReport;

/// Relative change below which a candidate is treated as norm-preserving.
pub const NORM_TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum Subroutine {
    ExactCvp,
    Pair,
    Hash(LshParams),
    Greedy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SrConfig {
    /// Acceptance threshold in `(0, 1]`.
    pub tau: f64,
    pub subroutine: Subroutine,
    /// Stop after this many accepted updates.
    pub max_updates: Option<u64>,
    /// Column visited first by the cursor.
    pub start_index: usize,
    pub enumeration_cap: usize,
}

impl SrConfig {
    pub fn new(subroutine: Subroutine) -> Self {
        SrConfig {
            tau: 1.0,
            subroutine,
            max_updates: None,
            start_index: 0,
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
        }
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    pub fn validate(&self) -> Result<()> {
        validate_tau(self.tau)?;
        if let Subroutine::Hash(p) = &self.subroutine {
            p.validate()?;
        }
        Ok(())
    }
}

pub(crate) fn validate_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau <= 1.0 {
        Ok(())
    } else {
        Err(LatticeError::InvalidParameter(format!(
            "tau must lie in (0, 1], got {tau}"
        )))
    }
}

/// Acceptance rule: strictly shorter under `tau`, and not a norm tie.
#[inline]
pub(crate) fn accepts(new_norm_sq: f64, old_norm_sq: f64, tau: f64) -> bool {
    new_norm_sq < tau * old_norm_sq && old_norm_sq - new_norm_sq > NORM_TIE_TOL * old_norm_sq
}

/// A candidate reduction `s_i` for the column under the cursor.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Proposal {
    /// `s_i = c * b_source`
    Pair { source: usize, c: i64, new_norm_sq: f64 },
    /// `s_i = sum_k c_k b_k`
    Combination { coeffs: Vec<i64>, new_norm_sq: f64 },
}

impl Proposal {
    fn new_norm_sq(&self) -> f64 {
        match self {
            Proposal::Pair { new_norm_sq, .. } | Proposal::Combination { new_norm_sq, .. } => *new_norm_sq,
        }
    }

    fn apply(&self, state: &mut ReductionState, target: usize) -> Result<()> {
        match self {
            Proposal::Pair { source, c, .. } => state.sub_multiple(target, *source, *c),
            Proposal::Combination { coeffs, .. } => state.update(target, coeffs),
        }
    }
}

/// The approximate-CVP slot of the engine.
pub(crate) trait Proposer {
    fn propose(&mut self, basis: &Basis, i: usize, report: &mut ReductionReport) -> Result<Option<Proposal>>;

    /// Called after column `i` changed; `old` is its previous value.
    fn updated(&mut self, _basis: &Basis, _i: usize, _old: &[f64]) {}
}

/// Best single-column cancellation of `b_i` over `candidates` (visited in
/// the given order; ties keep the earliest). Returns `None` when every
/// rounding coefficient is zero.
pub(crate) fn best_pair<I>(basis: &Basis, i: usize, candidates: I) -> Result<Option<Proposal>>
where
    I: IntoIterator<Item = usize>,
{
    let bi = basis.column(i);
    let ni = norm_sq(bi);
    let mut best: Option<Proposal> = None;
    for j in candidates {
        debug_assert_ne!(i, j);
        let bj = basis.column(j);
        let nj = norm_sq(bj);
        let d = dot(bi, bj);
        let c = round_to_i64(d / nj)?;
        if c == 0 {
            continue;
        }
        let cf = c as f64;
        let cand = ni - 2.0 * cf * d + cf * cf * nj;
        if best.as_ref().is_none_or(|b| cand < b.new_norm_sq()) {
            best = Some(Proposal::Pair {
                source: j,
                c,
                new_norm_sq: cand,
            });
        }
    }
    Ok(best)
}

struct PairProposer;

impl Proposer for PairProposer {
    fn propose(&mut self, basis: &Basis, i: usize, report: &mut ReductionReport) -> Result<Option<Proposal>> {
        let n = basis.rank();
        report.vector_comparisons += n.saturating_sub(1) as u64;
        best_pair(basis, i, (0..n).filter(|&j| j != i))
    }
}

struct CvpProposer {
    cap: usize,
}

/// Exact CVP of `b_i` in the lattice of the other columns.
fn sublattice_cvp(basis: &Basis, i: usize, cap: usize) -> Result<Option<Proposal>> {
    let n = basis.rank();
    if n < 2 {
        return Ok(None);
    }
    if n - 1 > cap {
        return Err(LatticeError::EnumerationCap { rank: n - 1, cap });
    }
    let others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
    let sub = basis.permuted(&others);
    let gs = gram_schmidt(&sub)?;
    let r = enumerate_cvp_with(&gs, &sub, basis.column(i))?;
    if r.coefficients.iter().all(|&c| c == 0) {
        return Ok(None);
    }
    let mut coeffs = vec![0i64; n];
    for (k, &j) in others.iter().enumerate() {
        coeffs[j] = r.coefficients[k];
    }
    Ok(Some(Proposal::Combination {
        coeffs,
        new_norm_sq: r.residual_norm_sq,
    }))
}

impl Proposer for CvpProposer {
    fn propose(&mut self, basis: &Basis, i: usize, report: &mut ReductionReport) -> Result<Option<Proposal>> {
        report.cvp_calls += 1;
        report.vector_comparisons += basis.rank().saturating_sub(1) as u64;
        sublattice_cvp(basis, i, self.cap)
    }
}

/// Outcome of offering one proposal to the engine.
fn try_accept(
    state: &mut ReductionState,
    i: usize,
    proposal: Option<Proposal>,
    tau: f64,
    report: &mut ReductionReport,
) -> Result<Option<Vec<f64>>> {
    let old_norm_sq = norm_sq(state.basis.column(i));
    let Some(p) = proposal else {
        report.ineffective_attempts += 1;
        return Ok(None);
    };
    if !accepts(p.new_norm_sq(), old_norm_sq, tau) {
        report.ineffective_attempts += 1;
        return Ok(None);
    }
    let old = state.basis.column(i).to_vec();
    p.apply(state, i)?;
    let new_norm_sq = norm_sq(state.basis.column(i));
    report.accepted_updates += 1;
    report.max_residual_ratio = report.max_residual_ratio.max((new_norm_sq / old_norm_sq).sqrt());
    report.trace.record(&state.basis);
    Ok(Some(old))
}

/// The round-robin loop: terminates once `n` consecutive attempts were
/// ineffective.
pub(crate) fn run_sequential<P: Proposer>(
    basis: &Basis,
    tau: f64,
    max_updates: Option<u64>,
    start_index: usize,
    proposer: &mut P,
) -> Result<(Basis, UnimodularTransform, ReductionReport)> {
    validate_tau(tau)?;
    let gs = gram_schmidt(basis)?;
    let mut report = ReductionReport::start(basis, &gs);
    let mut state = ReductionState::new(basis.clone());
    run_loop(&mut state, &mut report, tau, max_updates, start_index, proposer)?;
    report.finish(&state.basis);
    let (b, u) = state.into_parts();
    Ok((b, u, report))
}

fn run_loop<P: Proposer>(
    state: &mut ReductionState,
    report: &mut ReductionReport,
    tau: f64,
    max_updates: Option<u64>,
    start_index: usize,
    proposer: &mut P,
) -> Result<()> {
    let n = state.basis.rank();
    let start = start_index % n;
    let mut i = start;
    let mut first = true;
    let mut misses = 1usize;
    while misses <= n {
        if first {
            first = false;
        } else {
            i = (i + 1) % n;
        }
        if i == start {
            report.wall_rounds += 1;
        }
        if max_updates.is_some_and(|cap| report.accepted_updates >= cap) {
            report.hit_update_cap = true;
            break;
        }
        let proposal = proposer.propose(&state.basis, i, report)?;
        match try_accept(state, i, proposal, tau, report)? {
            Some(old) => {
                proposer.updated(&state.basis, i, &old);
                misses = 1;
            }
            None => misses += 1,
        }
    }
    Ok(())
}

/// Sequential reduction with the configured subroutine.
pub fn sr_reduce(basis: &Basis, config: &SrConfig) -> Result<(Basis, UnimodularTransform, ReductionReport)> {
    config.validate()?;
    match &config.subroutine {
        Subroutine::Pair => run_sequential(basis, config.tau, config.max_updates, config.start_index, &mut PairProposer),
        Subroutine::ExactCvp => run_sequential(
            basis,
            config.tau,
            config.max_updates,
            config.start_index,
            &mut CvpProposer {
                cap: config.enumeration_cap,
            },
        ),
        Subroutine::Hash(params) => crate::lsh::sr_hash_reduce_with(basis, config.tau, params, config.max_updates, config.start_index),
        Subroutine::Greedy => greedy_reduce_capped(basis, config.tau, config.enumeration_cap, config.max_updates),
    }
}

/// Column indices by descending norm, ties by lower index.
fn by_descending_norm(basis: &Basis) -> Vec<usize> {
    let norms = basis.column_norms_sq();
    let mut idx: Vec<usize> = (0..basis.rank()).collect();
    idx.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]).then(a.cmp(&b)));
    idx
}

/// SR-CVP with the longest-first schedule: reduce the longest column, then
/// the remaining columns in descending norm order (`n - 1` more CVP calls),
/// then iterate plain SR-CVP until no column can be shortened.
pub fn sr_cvp_heuristic(basis: &Basis, tau: f64) -> Result<(Basis, UnimodularTransform, ReductionReport)> {
    validate_tau(tau)?;
    let gs = gram_schmidt(basis)?;
    let mut report = ReductionReport::start(basis, &gs);
    let mut state = ReductionState::new(basis.clone());
    let cap = DEFAULT_ENUMERATION_CAP;
    let mut proposer = CvpProposer { cap };

    let longest = by_descending_norm(&state.basis)[0];
    let p = proposer.propose(&state.basis, longest, &mut report)?;
    try_accept(&mut state, longest, p, tau, &mut report)?;
    for i in by_descending_norm(&state.basis).into_iter().filter(|&i| i != longest) {
        let p = proposer.propose(&state.basis, i, &mut report)?;
        try_accept(&mut state, i, p, tau, &mut report)?;
    }
    report.wall_rounds = 1;

    run_loop(&mut state, &mut report, tau, None, 0, &mut proposer)?;
    report.finish(&state.basis);
    let (b, u) = state.into_parts();
    Ok((b, u, report))
}

/// eta-Greedy: only the currently longest column is ever CVP-reduced.
pub fn greedy_reduce(basis: &Basis, tau: f64) -> Result<(Basis, UnimodularTransform, ReductionReport)> {
    greedy_reduce_capped(basis, tau, DEFAULT_ENUMERATION_CAP, None)
}

fn greedy_reduce_capped(
    basis: &Basis,
    tau: f64,
    cap: usize,
    max_updates: Option<u64>,
) -> Result<(Basis, UnimodularTransform, ReductionReport)> {
    validate_tau(tau)?;
    let gs = gram_schmidt(basis)?;
    let mut report = ReductionReport::start(basis, &gs);
    let mut state = ReductionState::new(basis.clone());
    let mut proposer = CvpProposer { cap };
    loop {
        if max_updates.is_some_and(|m| report.accepted_updates >= m) {
            report.hit_update_cap = true;
            break;
        }
        report.wall_rounds += 1;
        let longest = by_descending_norm(&state.basis)[0];
        let p = proposer.propose(&state.basis, longest, &mut report)?;
        if try_accept(&mut state, longest, p, tau, &mut report)?.is_none() {
            break;
        }
    }
    report.finish(&state.basis);
    let (b, u) = state.into_parts();
    Ok((b, u, report))
}

/// Outcome of checking the SR-CVP length, defect and angle bounds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsReport {
    pub n: usize,
    pub tau: f64,
    pub successive_minima: Vec<f64>,
    pub basis_length: f64,
    pub length_bound: f64,
    pub length_ok: bool,
    pub od: f64,
    pub od_bound: f64,
    pub od_ok: bool,
    pub cos2_theta_max: f64,
    pub angle_bound: f64,
    pub angle_ok: bool,
}

impl BoundsReport {
    pub fn all_ok(&self) -> bool {
        self.length_ok && self.od_ok && self.angle_ok
    }
}

/// The `4 tau - n + 1` denominator of the length bound; positive exactly
/// when the bound applies.
fn bound_denominator(n: usize, tau: f64) -> f64 {
    4.0 * tau - n as f64 + 1.0
}

/// Checks an SR-CVP-stationary basis against
/// `l(B) <= sqrt(4n / (4 tau - n + 1)) lambda_n`,
/// `od <= (4 / (4 tau - n + 1))^{n/2} (lambda_n / lambda_1)^n` and
/// `cos^2 theta_max <= (n - 1) / 4 + (1 - tau)`, where `theta_i` is the
/// angle between `b_i` and the span of the other columns. At `tau = 1`
/// these are the `n <= 4` bounds with denominator `5 - n`.
pub fn check_srcvp_bounds(basis: &Basis, tau: f64) -> Result<BoundsReport> {
    validate_tau(tau)?;
    let n = basis.rank();
    let denom = bound_denominator(n, tau);
    if n < 1 || denom <= 0.0 {
        return Err(LatticeError::InvalidParameter(format!(
            "SR-CVP bounds need n < 4*tau + 1; got n = {n}, tau = {tau}"
        )));
    }
    let minima = crate::cvp::successive_minima(basis, n)?;
    let (l1, ln) = (minima[0], minima[n - 1]);
    let nf = n as f64;
    let metrics = crate::linalg::quality_metrics(basis)?;
    let length_bound = (4.0 * nf / denom).sqrt() * ln;
    let od_bound = (4.0 / denom).powf(nf / 2.0) * (ln / l1).powi(n as i32);

    let cos2_theta_max = if n == 1 {
        0.0
    } else {
        let dual = dual_basis(basis)?;
        basis
            .column_norms_sq()
            .iter()
            .zip(dual.column_norms_sq())
            .map(|(b, d)| 1.0 - 1.0 / (b * d))
            .fold(f64::INFINITY, f64::min)
            .max(0.0)
    };
    let angle_bound = (nf - 1.0) / 4.0 + (1.0 - tau);
    let slack = 1.0 + 1e-9;
    Ok(BoundsReport {
        n,
        tau,
        successive_minima: minima,
        basis_length: metrics.basis_length,
        length_bound,
        length_ok: metrics.basis_length <= length_bound * slack,
        od: metrics.od,
        od_bound,
        od_ok: metrics.od <= od_bound * slack,
        cos2_theta_max,
        angle_bound,
        angle_ok: cos2_theta_max <= angle_bound + 1e-9,
    })
}

/// True when no single rounded column cancellation changes any column:
/// `round(<b_i, b_j> / <b_j, b_j>) = 0` for all `i != j`.
pub fn is_pair_stationary(basis: &Basis) -> bool {
    let n = basis.rank();
    (0..n).all(|i| {
        (0..n).filter(|&j| j != i).all(|j| {
            let r = dot(basis.column(i), basis.column(j)) / norm_sq(basis.column(j));
            crate::linalg::round_half_away(r) == 0.0
        })
    })
}

/// True when no exact sublattice CVP step would be accepted.
pub fn is_cvp_stationary(basis: &Basis, tau: f64) -> Result<bool> {
    for i in 0..basis.rank() {
        if let Some(p) = sublattice_cvp(basis, i, DEFAULT_ENUMERATION_CAP)? {
            if accepts(p.new_norm_sq(), norm_sq(basis.column(i)), tau) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}
