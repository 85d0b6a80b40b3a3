//! Closest-vector solvers: Babai's nearest plane and an exact
//! Schnorr-Euchner enumeration, plus shortest vector and successive minima
//! built on the same search.

use crate::error::{LatticeError, Result};
use crate::linalg::{axpy, dot, gram_schmidt, norm_sq, round_to_i64, Basis, GramSchmidt};

/// Default largest rank accepted by the enumeration-based solvers.
pub const DEFAULT_ENUMERATION_CAP: usize = 24;

/// Upper bound on points collected by [`successive_minima`].
const MAX_COLLECTED_POINTS: usize = 2_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct CvpResult {
    /// The lattice point `s = B c`.
    pub lattice_vector: Vec<f64>,
    pub coefficients: Vec<i64>,
    /// `||target - s||^2`
    pub residual_norm_sq: f64,
}

impl CvpResult {
    fn from_coefficients(basis: &Basis, target: &[f64], coefficients: Vec<i64>) -> Self {
        let lattice_vector = basis.combine_int(&coefficients);
        let residual_norm_sq = target
            .iter()
            .zip(&lattice_vector)
            .map(|(t, s)| (t - s) * (t - s))
            .sum();
        CvpResult {
            lattice_vector,
            coefficients,
            residual_norm_sq,
        }
    }
}

fn check_target(basis: &Basis, target: &[f64]) -> Result<()> {
    if target.len() != basis.dim() {
        return Err(LatticeError::DimensionMismatch {
            expected: basis.dim(),
            found: target.len(),
        });
    }
    if target.iter().any(|x| !x.is_finite()) {
        return Err(LatticeError::NonFinite);
    }
    Ok(())
}

fn check_cap(basis: &Basis, cap: usize) -> Result<()> {
    if basis.rank() > cap {
        return Err(LatticeError::EnumerationCap {
            rank: basis.rank(),
            cap,
        });
    }
    Ok(())
}

/// Babai's nearest plane: successive rounding of the Gram-Schmidt
/// coordinates from the last column to the first.
pub fn babai_nearest_plane(gs: &GramSchmidt, basis: &Basis, target: &[f64]) -> Result<CvpResult> {
    check_target(basis, target)?;
    let n = basis.rank();
    if gs.rank() != n {
        return Err(LatticeError::DimensionMismatch {
            expected: n,
            found: gs.rank(),
        });
    }
    if let Some(i) = gs.norms_sq.iter().position(|&v| !(v > 0.0)) {
        return Err(LatticeError::DegenerateBasis { index: i, ratio: 0.0 });
    }
    let mut residual = target.to_vec();
    let mut coefficients = vec![0i64; n];
    for i in (0..n).rev() {
        let c = round_to_i64(dot(&residual, &gs.orthogonal[i]) / gs.norms_sq[i])?;
        if c != 0 {
            axpy(&mut residual, -(c as f64), basis.column(i));
        }
        coefficients[i] = c;
    }
    Ok(CvpResult::from_coefficients(basis, target, coefficients))
}

/// Depth-first Schnorr-Euchner search over Gram-Schmidt coordinates.
///
/// `centers[k]` is the coordinate of the target on `b*_k`. The callback is
/// invoked at each leaf whose partial distance is below the current bound
/// and returns the bound to continue with.
struct Enumerator<'a> {
    gs: &'a GramSchmidt,
    centers: Vec<f64>,
    x: Vec<i64>,
    nodes: u64,
}

impl<'a> Enumerator<'a> {
    fn new(gs: &'a GramSchmidt, centers: Vec<f64>) -> Self {
        let n = gs.rank();
        Enumerator {
            gs,
            centers,
            x: vec![0; n],
            nodes: 0,
        }
    }

    /// Visits every coefficient vector with partial distance `< bound`
    /// (or `<= bound` when `inclusive`).
    fn run<F>(&mut self, bound: f64, inclusive: bool, on_leaf: &mut F) -> Result<()>
    where
        F: FnMut(&[i64], f64) -> Result<f64>,
    {
        let n = self.gs.rank();
        if n == 0 {
            return Ok(());
        }
        let mut bound = bound;
        self.descend(n - 1, 0.0, &mut bound, inclusive, on_leaf)
    }

    fn descend<F>(&mut self, level: usize, partial: f64, bound: &mut f64, inclusive: bool, on_leaf: &mut F) -> Result<()>
    where
        F: FnMut(&[i64], f64) -> Result<f64>,
    {
        let n = self.gs.rank();
        let mut center = self.centers[level];
        for j in level + 1..n {
            center -= self.gs.mu[j][level] * self.x[j] as f64;
        }
        let weight = self.gs.norms_sq[level];
        let within = |d: f64, b: f64| if inclusive { d <= b } else { d < b };

        let first = round_to_i64(center)?;
        let mut up = first + 1;
        let mut down = first - 1;
        let mut next = first;
        loop {
            self.nodes += 1;
            let diff = center - next as f64;
            let dist = partial + weight * diff * diff;
            if !within(dist, *bound) {
                break;
            }
            self.x[level] = next;
            if level == 0 {
                *bound = on_leaf(&self.x, dist)?;
            } else {
                self.descend(level - 1, dist, bound, inclusive, on_leaf)?;
            }
            // Zig-zag: take whichever unexplored neighbour is closer.
            let du = (up as f64 - center).abs();
            let dd = (center - down as f64).abs();
            if du <= dd {
                next = up;
                up += 1;
            } else {
                next = down;
                down -= 1;
            }
        }
        self.x[level] = 0;
        Ok(())
    }
}

/// Target coordinates on each `b*_k` and the squared distance from the
/// target to `span(B)`.
fn project_target(gs: &GramSchmidt, target: &[f64]) -> (Vec<f64>, f64) {
    let mut r = target.to_vec();
    let mut centers = vec![0.0; gs.rank()];
    for k in (0..gs.rank()).rev() {
        let c = dot(&r, &gs.orthogonal[k]) / gs.norms_sq[k];
        centers[k] = c;
        axpy(&mut r, -c, &gs.orthogonal[k]);
    }
    (centers, norm_sq(&r))
}

/// Exact closest vector with the default enumeration cap.
pub fn enumerate_cvp(basis: &Basis, target: &[f64]) -> Result<CvpResult> {
    enumerate_cvp_capped(basis, target, DEFAULT_ENUMERATION_CAP)
}

/// Exact closest vector by pruned enumeration, starting from Babai's
/// residual. Among equidistant points the first one found wins, with the
/// Babai point found first.
pub fn enumerate_cvp_capped(basis: &Basis, target: &[f64], cap: usize) -> Result<CvpResult> {
    check_cap(basis, cap)?;
    check_target(basis, target)?;
    let gs = gram_schmidt(basis)?;
    enumerate_cvp_with(&gs, basis, target)
}

pub(crate) fn enumerate_cvp_with(gs: &GramSchmidt, basis: &Basis, target: &[f64]) -> Result<CvpResult> {
    let babai = babai_nearest_plane(gs, basis, target)?;
    let (centers, _) = project_target(gs, target);
    // Distance measured inside span(B): the orthogonal part is constant.
    let in_span = |x: &[i64]| -> f64 {
        let mut total = 0.0;
        let n = gs.rank();
        for k in 0..n {
            let mut v = centers[k] - x[k] as f64;
            for j in k + 1..n {
                v -= gs.mu[j][k] * x[j] as f64;
            }
            total += gs.norms_sq[k] * v * v;
        }
        total
    };
    let mut best = babai.coefficients.clone();
    let start = in_span(&best);
    let mut en = Enumerator::new(gs, centers.clone());
    en.run(start, false, &mut |x, dist| {
        best.copy_from_slice(x);
        Ok(dist)
    })?;
    Ok(CvpResult::from_coefficients(basis, target, best))
}

/// Shortest nonzero lattice vector with the default cap.
pub fn shortest_vector(basis: &Basis) -> Result<CvpResult> {
    shortest_vector_capped(basis, DEFAULT_ENUMERATION_CAP)
}

pub fn shortest_vector_capped(basis: &Basis, cap: usize) -> Result<CvpResult> {
    check_cap(basis, cap)?;
    let gs = gram_schmidt(basis)?;
    let n = basis.rank();
    let norms = basis.column_norms_sq();
    let (shortest_col, &bound) = norms
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty basis");
    let mut best = vec![0i64; n];
    best[shortest_col] = 1;
    let mut en = Enumerator::new(&gs, vec![0.0; n]);
    let mut current = bound;
    en.run(bound, false, &mut |x, dist| {
        if x.iter().all(|&c| c == 0) {
            return Ok(current);
        }
        best.copy_from_slice(x);
        current = dist;
        Ok(dist)
    })?;
    let zero = vec![0.0; basis.dim()];
    let mut r = CvpResult::from_coefficients(basis, &zero, best);
    // residual to the origin is the vector length itself
    r.residual_norm_sq = norm_sq(&r.lattice_vector);
    Ok(r)
}

/// Successive minima `lambda_1 <= ... <= lambda_k` for `k = up_to`.
///
/// An LLL-reduced copy supplies `k` independent lattice vectors, so the
/// `k`-th shortest of its columns bounds `lambda_k`. Every lattice point in
/// that ball is enumerated and independent representatives are picked
/// greedily in order of length.
pub fn successive_minima(basis: &Basis, up_to: usize) -> Result<Vec<f64>> {
    successive_minima_capped(basis, up_to, DEFAULT_ENUMERATION_CAP)
}

pub fn successive_minima_capped(basis: &Basis, up_to: usize, cap: usize) -> Result<Vec<f64>> {
    check_cap(basis, cap)?;
    let n = basis.rank();
    if up_to > n {
        return Err(LatticeError::InvalidParameter(format!(
            "requested {up_to} minima of a rank-{n} lattice"
        )));
    }
    if up_to == 0 {
        return Ok(Vec::new());
    }
    let (reduced, _, _) = crate::baselines::lll_reduce(basis, &crate::baselines::LllConfig { delta: 0.99 })?;
    let mut norms = reduced.column_norms_sq();
    norms.sort_by(f64::total_cmp);
    let radius_sq = norms[up_to - 1] * (1.0 + 1e-9);

    let gs = gram_schmidt(&reduced)?;
    let mut points: Vec<(f64, Vec<i64>)> = Vec::new();
    let mut en = Enumerator::new(&gs, vec![0.0; n]);
    en.run(radius_sq, true, &mut |x, dist| {
        if x.iter().any(|&c| c != 0) {
            if points.len() >= MAX_COLLECTED_POINTS {
                return Err(LatticeError::InvalidParameter(
                    "too many lattice points inside the successive-minima radius".into(),
                ));
            }
            points.push((dist, x.to_vec()));
        }
        Ok(radius_sq)
    })?;
    points.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut chosen: Vec<Vec<f64>> = Vec::new();
    let mut minima = Vec::with_capacity(up_to);
    for (_, coeffs) in &points {
        let v = reduced.combine_int(coeffs);
        let len_sq = norm_sq(&v);
        let mut r = v.clone();
        for q in &chosen {
            let c = dot(&r, q);
            axpy(&mut r, -c, q);
        }
        let rest = norm_sq(&r);
        if rest > 1e-9 * len_sq {
            let s = rest.sqrt();
            chosen.push(r.iter().map(|x| x / s).collect());
            minima.push(len_sq.sqrt());
            if minima.len() == up_to {
                break;
            }
        }
    }
    if minima.len() < up_to {
        return Err(LatticeError::InvalidParameter(
            "enumeration radius did not capture enough independent vectors".into(),
        ));
    }
    Ok(minima)
}

/// Brute-force closest vector over the coefficient box `[-r, r]^n`. Only
/// meant as an independent check for small instances.
pub fn brute_force_cvp(basis: &Basis, target: &[f64], r: i64) -> CvpResult {
    let n = basis.rank();
    let mut x = vec![-r; n];
    let mut best: Option<CvpResult> = None;
    loop {
        let cand = CvpResult::from_coefficients(basis, target, x.clone());
        if best.as_ref().is_none_or(|b| cand.residual_norm_sq < b.residual_norm_sq) {
            best = Some(cand);
        }
        // odometer increment
        let mut k = 0;
        loop {
            if k == n {
                return best.expect("box is nonempty");
            }
            if x[k] < r {
                x[k] += 1;
                break;
            }
            x[k] = -r;
            k += 1;
        }
    }
}
