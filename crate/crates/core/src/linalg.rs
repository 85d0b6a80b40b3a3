//! Lattice bases and the dense linear algebra shared by every reducer.
//!
//! A [`Basis`] is an ordered list of `n` real column vectors living in
//! `R^m` (`m >= n`). The column index is the identity of a basis vector
//! across updates; reducers never reorder columns unless the algorithm
//! itself swaps (LLL).

use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{LatticeError, Result};

/// Relative threshold below which a Gram-Schmidt norm marks the basis as
/// rank deficient: `||b*_i||^2 < RANK_TOL * ||b_i||^2`.
pub const RANK_TOL: f64 = 1e-12;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

/// `y += alpha * x`
#[inline]
pub fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Nearest-integer rounding used throughout the crate: halves go away from
/// zero (`0.5 -> 1`, `-0.5 -> -1`).
#[inline]
pub fn round_half_away(x: f64) -> f64 {
    x.round()
}

/// Rounds to the nearest integer and converts, failing when the value does
/// not fit comfortably in an `i64`.
pub fn round_to_i64(x: f64) -> Result<i64> {
    if !x.is_finite() {
        return Err(LatticeError::NonFinite);
    }
    let r = round_half_away(x);
    if r.abs() > 4.0e18 {
        return Err(LatticeError::Overflow);
    }
    Ok(r as i64)
}

/// Real lattice basis stored as columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Basis {
    dim: usize,
    columns: Vec<Vec<f64>>,
}

impl Basis {
    /// Builds a basis from columns. All columns must share one length `m`,
    /// there must be at most `m` of them and every entry must be finite.
    /// Linear independence is checked lazily by [`gram_schmidt`].
    pub fn from_columns(columns: Vec<Vec<f64>>) -> Result<Self> {
        let Some(first) = columns.first() else {
            return Err(LatticeError::InvalidParameter("basis has no columns".into()));
        };
        let dim = first.len();
        for c in &columns {
            if c.len() != dim {
                return Err(LatticeError::DimensionMismatch {
                    expected: dim,
                    found: c.len(),
                });
            }
            if c.iter().any(|x| !x.is_finite()) {
                return Err(LatticeError::NonFinite);
            }
        }
        if columns.len() > dim {
            return Err(LatticeError::InvalidParameter(format!(
                "{} columns in ambient dimension {dim}",
                columns.len()
            )));
        }
        Ok(Basis { dim, columns })
    }

    /// Builds a basis from a row-major `m x n` matrix.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let Some(first) = rows.first() else {
            return Err(LatticeError::InvalidParameter("matrix has no rows".into()));
        };
        let n = first.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(LatticeError::DimensionMismatch {
                expected: n,
                found: bad.len(),
            });
        }
        let columns = (0..n).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
        Basis::from_columns(columns)
    }

    pub fn identity(n: usize) -> Self {
        let columns = (0..n)
            .map(|j| (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Basis { dim: n, columns }
    }

    /// Ambient dimension `m`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of columns `n`.
    pub fn rank(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, i: usize) -> &[f64] {
        &self.columns[i]
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn into_columns(self) -> Vec<Vec<f64>> {
        self.columns
    }

    pub(crate) fn column_mut(&mut self, i: usize) -> &mut Vec<f64> {
        &mut self.columns[i]
    }

    /// Entry at `(row, col)`.
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.columns[col][row]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim)
            .map(|r| self.columns.iter().map(|c| c[r]).collect())
            .collect()
    }

    pub fn column_norms_sq(&self) -> Vec<f64> {
        self.columns.iter().map(|c| norm_sq(c)).collect()
    }

    pub fn column_norms(&self) -> Vec<f64> {
        self.columns.iter().map(|c| norm_sq(c).sqrt()).collect()
    }

    /// `sum_i ||b_i||^2`, the squared Frobenius norm.
    pub fn frobenius_sq(&self) -> f64 {
        self.columns.iter().map(|c| norm_sq(c)).sum()
    }

    /// Matrix-vector product `B * coeffs`.
    pub fn combine(&self, coeffs: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (c, col) in coeffs.iter().zip(&self.columns) {
            if *c != 0.0 {
                axpy(&mut out, *c, col);
            }
        }
        out
    }

    /// Integer combination `B * coeffs`.
    pub fn combine_int(&self, coeffs: &[i64]) -> Vec<f64> {
        let f: Vec<f64> = coeffs.iter().map(|&c| c as f64).collect();
        self.combine(&f)
    }

    /// `B^T v`
    pub fn transpose_mul(&self, v: &[f64]) -> Vec<f64> {
        self.columns.iter().map(|c| dot(c, v)).collect()
    }

    /// Product `B * U` in floating point.
    pub fn mul_transform(&self, u: &UnimodularTransform) -> Basis {
        let columns = (0..u.size()).map(|j| self.combine_int(u.column(j))).collect();
        Basis {
            dim: self.dim,
            columns,
        }
    }

    /// Basis with columns reordered so that column `k` of the result is
    /// column `perm[k]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Basis {
        Basis {
            dim: self.dim,
            columns: perm.iter().map(|&p| self.columns[p].clone()).collect(),
        }
    }

    /// Appends `scale * I_n` below the basis (the MMSE extension).
    pub fn stack_scaled_identity(&self, scale: f64) -> Basis {
        let n = self.rank();
        let columns = self
            .columns
            .iter()
            .enumerate()
            .map(|(j, c)| {
                let mut v = c.clone();
                v.extend((0..n).map(|i| if i == j { scale } else { 0.0 }));
                v
            })
            .collect();
        Basis {
            dim: self.dim + n,
            columns,
        }
    }

    /// Serializes to the plain-text basis format: `m n` followed by `m`
    /// rows of `n` floats.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} {}", self.dim, self.rank());
        for row in self.rows() {
            let line: Vec<String> = row.iter().map(|x| format!("{x:?}")).collect();
            let _ = writeln!(s, "{}", line.join(" "));
        }
        s
    }
}

/// Non-comment, non-blank lines of a matrix text file.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_header(line: Option<(usize, &str)>) -> Result<(usize, usize)> {
    let (_, line) = line.ok_or_else(|| LatticeError::Parse("empty input".into()))?;
    let dims: Vec<&str> = line.split_whitespace().collect();
    if dims.len() != 2 {
        return Err(LatticeError::Parse(format!("expected header `m n`, got `{line}`")));
    }
    let m = dims[0]
        .parse()
        .map_err(|_| LatticeError::Parse(format!("bad row count `{}`", dims[0])))?;
    let n = dims[1]
        .parse()
        .map_err(|_| LatticeError::Parse(format!("bad column count `{}`", dims[1])))?;
    Ok((m, n))
}

fn parse_rows<T: FromStr>(text: &str) -> Result<(usize, usize, Vec<Vec<T>>)> {
    let mut lines = content_lines(text);
    let (m, n) = parse_header(lines.next())?;
    let mut rows = Vec::with_capacity(m);
    for (lineno, line) in lines {
        let row: Vec<T> = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<T>()
                    .map_err(|_| LatticeError::Parse(format!("line {lineno}: bad number `{tok}`")))
            })
            .collect::<Result<_>>()?;
        if row.len() != n {
            return Err(LatticeError::Parse(format!(
                "line {lineno}: expected {n} entries, found {}",
                row.len()
            )));
        }
        rows.push(row);
    }
    if rows.len() != m {
        return Err(LatticeError::Parse(format!("expected {m} rows, found {}", rows.len())));
    }
    Ok((m, n, rows))
}

impl FromStr for Basis {
    type Err = LatticeError;

    fn from_str(text: &str) -> Result<Self> {
        let (_, _, rows) = parse_rows::<f64>(text)?;
        Basis::from_rows(&rows)
    }
}

/// Gram-Schmidt data of a basis: `b_i = b*_i + sum_{j<i} mu_ij b*_j`.
#[derive(Debug, Clone)]
pub struct GramSchmidt {
    /// The orthogonal vectors `b*_i`.
    pub orthogonal: Vec<Vec<f64>>,
    /// Row `i` holds `mu_ij` for `j < i`; the diagonal is 1 and entries
    /// above it are 0.
    pub mu: Vec<Vec<f64>>,
    /// `||b*_i||^2`
    pub norms_sq: Vec<f64>,
}

impl GramSchmidt {
    pub fn rank(&self) -> usize {
        self.norms_sq.len()
    }

    /// Coordinates of the least-squares solution `argmin_z ||t - B z||`.
    pub fn least_squares(&self, target: &[f64]) -> Vec<f64> {
        let n = self.rank();
        let mut z = vec![0.0; n];
        for i in (0..n).rev() {
            let mut zi = dot(target, &self.orthogonal[i]) / self.norms_sq[i];
            for j in i + 1..n {
                zi -= self.mu[j][i] * z[j];
            }
            z[i] = zi;
        }
        z
    }

    /// `log sqrt(det(B^T B))`
    pub fn log_volume(&self) -> f64 {
        self.norms_sq.iter().map(|v| 0.5 * v.ln()).sum()
    }
}

/// Modified Gram-Schmidt orthogonalization.
pub fn gram_schmidt(basis: &Basis) -> Result<GramSchmidt> {
    let n = basis.rank();
    let mut orthogonal: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut norms_sq = Vec::with_capacity(n);
    let mut mu = vec![vec![0.0; n]; n];
    for i in 0..n {
        let b = basis.column(i);
        let len_sq = norm_sq(b);
        if len_sq == 0.0 {
            return Err(LatticeError::DegenerateBasis { index: i, ratio: 0.0 });
        }
        let mut v = b.to_vec();
        for j in 0..i {
            let m = dot(&v, &orthogonal[j]) / norms_sq[j];
            mu[i][j] = m;
            axpy(&mut v, -m, &orthogonal[j]);
        }
        mu[i][i] = 1.0;
        let ns = norm_sq(&v);
        if !(ns >= RANK_TOL * len_sq) {
            return Err(LatticeError::DegenerateBasis {
                index: i,
                ratio: (ns / len_sq).sqrt(),
            });
        }
        orthogonal.push(v);
        norms_sq.push(ns);
    }
    Ok(GramSchmidt {
        orthogonal,
        mu,
        norms_sq,
    })
}

/// Natural log of the orthogonality defect. Stays finite where the defect
/// itself overflows (duals of large Gaussian bases).
pub fn log_orthogonality_defect(basis: &Basis) -> Result<f64> {
    let gs = gram_schmidt(basis)?;
    Ok(log_od_with(basis, &gs))
}

pub(crate) fn log_od_with(basis: &Basis, gs: &GramSchmidt) -> f64 {
    let log_norms: f64 = basis.column_norms_sq().iter().map(|v| 0.5 * v.ln()).sum();
    // Hadamard: clamp the rounding noise below zero.
    (log_norms - gs.log_volume()).max(0.0)
}

/// Orthogonality defect `prod ||b_i|| / sqrt(det(B^T B))`.
pub fn orthogonality_defect(basis: &Basis) -> Result<f64> {
    Ok(log_orthogonality_defect(basis)?.exp())
}

/// Orthogonality defect, basis length and column norms in one pass.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct QualityMetrics {
    pub od: f64,
    pub log_od: f64,
    pub basis_length: f64,
    pub column_norms: Vec<f64>,
}

pub fn quality_metrics(basis: &Basis) -> Result<QualityMetrics> {
    let log_od = log_orthogonality_defect(basis)?;
    let column_norms = basis.column_norms();
    let basis_length = column_norms.iter().cloned().fold(0.0, f64::max);
    Ok(QualityMetrics {
        od: log_od.exp(),
        log_od,
        basis_length,
        column_norms,
    })
}

/// Dual basis `D = B (B^T B)^{-1}`, equal to `B^{-T}` for square bases.
///
/// Computed from the Gram-Schmidt factorization `B = B* L^T` as
/// `D = B* diag(1/||b*_k||^2) L^{-1}`, which avoids forming `B^T B`.
pub fn dual_basis(basis: &Basis) -> Result<Basis> {
    let gs = gram_schmidt(basis).map_err(|e| match e {
        LatticeError::DegenerateBasis { ratio, .. } => LatticeError::NearSingular {
            condition: if ratio > 0.0 { 1.0 / (ratio * ratio) } else { f64::INFINITY },
        },
        other => other,
    })?;
    let n = basis.rank();
    // inv holds L^{-1} (unit lower triangular), row-major.
    let mut inv = vec![vec![0.0; n]; n];
    for j in 0..n {
        inv[j][j] = 1.0;
        for i in j + 1..n {
            let mut s = 0.0;
            for k in j..i {
                s += gs.mu[i][k] * inv[k][j];
            }
            inv[i][j] = -s;
        }
    }
    let m = basis.dim();
    let columns = (0..n)
        .map(|j| {
            let mut d = vec![0.0; m];
            for k in j..n {
                let coef = inv[k][j] / gs.norms_sq[k];
                if coef != 0.0 {
                    axpy(&mut d, coef, &gs.orthogonal[k]);
                }
            }
            d
        })
        .collect();
    Basis::from_columns(columns)
}

/// Symmetric matrix of pairwise angles `arccos(|<b_i,b_j>| / (||b_i|| ||b_j||))`
/// in `[0, pi/2]`, with zeros on the diagonal.
pub fn pairwise_angles(basis: &Basis) -> Result<Vec<Vec<f64>>> {
    let norms = basis.column_norms();
    if let Some(i) = norms.iter().position(|&v| v == 0.0) {
        return Err(LatticeError::ZeroColumn(i));
    }
    let n = basis.rank();
    let mut angles = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let c = dot(basis.column(i), basis.column(j)).abs() / (norms[i] * norms[j]);
            let theta = c.min(1.0).acos();
            angles[i][j] = theta;
            angles[j][i] = theta;
        }
    }
    Ok(angles)
}

/// Integer `n x n` matrix tracked alongside a reduction, together with its
/// exact inverse. Both are stored column-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnimodularTransform {
    columns: Vec<Vec<i64>>,
    inverse: Vec<Vec<i64>>,
}

fn identity_int(n: usize) -> Vec<Vec<i64>> {
    (0..n)
        .map(|j| (0..n).map(|i| i64::from(i == j)).collect())
        .collect()
}

impl UnimodularTransform {
    pub fn identity(n: usize) -> Self {
        UnimodularTransform {
            columns: identity_int(n),
            inverse: identity_int(n),
        }
    }

    pub fn size(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, j: usize) -> &[i64] {
        &self.columns[j]
    }

    /// Entry `(row, col)`.
    pub fn get(&self, row: usize, col: usize) -> i64 {
        self.columns[col][row]
    }

    pub fn rows(&self) -> Vec<Vec<i64>> {
        let n = self.size();
        (0..n).map(|r| (0..n).map(|c| self.columns[c][r]).collect()).collect()
    }

    pub fn is_identity(&self) -> bool {
        self.columns == identity_int(self.size())
    }

    /// The exact inverse, maintained incrementally.
    pub fn inverse(&self) -> UnimodularTransform {
        UnimodularTransform {
            columns: self.inverse.clone(),
            inverse: self.columns.clone(),
        }
    }

    /// `U^{-T}`; maps a dual-basis transform to the primal one.
    pub fn inverse_transpose(&self) -> UnimodularTransform {
        UnimodularTransform {
            columns: transpose(&self.inverse),
            inverse: transpose(&self.columns),
        }
    }

    /// Right-multiplies by `T` where `T` is the identity with `-c_k` at
    /// `(k, target)`: column `target` becomes `u_target - sum_k c_k u_k`.
    pub fn apply_column_update(&mut self, target: usize, coeffs: &[i64]) -> Result<()> {
        let n = self.size();
        if coeffs.len() != n {
            return Err(LatticeError::DimensionMismatch {
                expected: n,
                found: coeffs.len(),
            });
        }
        if coeffs[target] != 0 {
            return Err(LatticeError::InvalidParameter(
                "update coefficient at the target index must be zero".into(),
            ));
        }
        let mut col = self.columns[target].clone();
        for (k, &c) in coeffs.iter().enumerate() {
            if c != 0 {
                for (dst, &src) in col.iter_mut().zip(&self.columns[k]) {
                    *dst = checked_mul_sub(*dst, c, src)?;
                }
            }
        }
        // T^{-1} = I + C, so row k of the inverse gains c_k * row target.
        let mut inverse = self.inverse.clone();
        for invcol in inverse.iter_mut() {
            let pivot = invcol[target];
            if pivot == 0 {
                continue;
            }
            for (k, &c) in coeffs.iter().enumerate() {
                if c != 0 {
                    invcol[k] = checked_mul_sub(invcol[k], -c, pivot)?;
                }
            }
        }
        self.columns[target] = col;
        self.inverse = inverse;
        Ok(())
    }

    /// Column `target` -= `c` * column `source`.
    pub fn sub_multiple(&mut self, target: usize, source: usize, c: i64) -> Result<()> {
        if c == 0 {
            return Ok(());
        }
        let n = self.size();
        let mut col = self.columns[target].clone();
        for r in 0..n {
            col[r] = checked_mul_sub(col[r], c, self.columns[source][r])?;
        }
        let mut rows_k = Vec::with_capacity(n);
        for invcol in &self.inverse {
            rows_k.push(checked_mul_sub(invcol[source], -c, invcol[target])?);
        }
        self.columns[target] = col;
        for (invcol, v) in self.inverse.iter_mut().zip(rows_k) {
            invcol[source] = v;
        }
        Ok(())
    }

    pub fn swap(&mut self, a: usize, b: usize) {
        self.columns.swap(a, b);
        for invcol in self.inverse.iter_mut() {
            invcol.swap(a, b);
        }
    }

    /// Exact determinant by fraction-free (Bareiss) elimination.
    pub fn determinant(&self) -> num_bigint::BigInt {
        exact_determinant(&self.rows())
    }

    pub fn is_unimodular(&self) -> bool {
        use num_traits::Signed;
        let d = self.determinant();
        d.abs() == num_bigint::BigInt::from(1)
    }

    /// Plain-text integer matrix in the same layout as the basis format.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let n = self.size();
        let _ = writeln!(s, "{n} {n}");
        for row in self.rows() {
            let line: Vec<String> = row.iter().map(|x| x.to_string()).collect();
            let _ = writeln!(s, "{}", line.join(" "));
        }
        s
    }

    /// Builds a transform from an integer matrix given row-major. The
    /// inverse is computed exactly; non-unimodular input is rejected.
    pub fn from_rows(rows: &[Vec<i64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(LatticeError::InvalidParameter("transform must be square".into()));
        }
        let inverse_rows = exact_inverse(rows)
            .ok_or_else(|| LatticeError::InvalidParameter("matrix is not unimodular".into()))?;
        Ok(UnimodularTransform {
            columns: transpose(rows),
            inverse: transpose(&inverse_rows),
        })
    }
}

impl FromStr for UnimodularTransform {
    type Err = LatticeError;

    fn from_str(text: &str) -> Result<Self> {
        let (m, n, rows) = parse_rows::<i64>(text)?;
        if m != n {
            return Err(LatticeError::Parse(format!("transform must be square, got {m}x{n}")));
        }
        UnimodularTransform::from_rows(&rows)
    }
}

fn checked_mul_sub(acc: i64, c: i64, x: i64) -> Result<i64> {
    c.checked_mul(x)
        .and_then(|p| acc.checked_sub(p))
        .ok_or(LatticeError::Overflow)
}

fn transpose(m: &[Vec<i64>]) -> Vec<Vec<i64>> {
    let n = m.len();
    (0..n).map(|i| (0..n).map(|j| m[j][i]).collect()).collect()
}

/// Bareiss fraction-free determinant over big integers.
pub fn exact_determinant(rows: &[Vec<i64>]) -> num_bigint::BigInt {
    use num_bigint::BigInt;
    use num_traits::{One, Zero};

    let n = rows.len();
    if n == 0 {
        return BigInt::one();
    }
    let mut a: Vec<Vec<BigInt>> = rows
        .iter()
        .map(|r| r.iter().map(|&x| BigInt::from(x)).collect())
        .collect();
    let mut sign = BigInt::one();
    let mut prev = BigInt::one();
    for k in 0..n - 1 {
        if a[k][k].is_zero() {
            match (k + 1..n).find(|&r| !a[r][k].is_zero()) {
                Some(r) => {
                    a.swap(k, r);
                    sign = -sign;
                }
                None => return BigInt::zero(),
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let v = &a[i][j] * &a[k][k] - &a[i][k] * &a[k][j];
                a[i][j] = v / &prev;
            }
        }
        prev = a[k][k].clone();
    }
    sign * &a[n - 1][n - 1]
}

/// Exact integer inverse of a unimodular matrix (row-major), or `None`
/// when the determinant is not `+-1` or an entry does not fit in `i64`.
fn exact_inverse(rows: &[Vec<i64>]) -> Option<Vec<Vec<i64>>> {
    use num_bigint::BigInt;
    use num_traits::{One, Signed, ToPrimitive, Zero};

    let n = rows.len();
    // Integer Gauss-Jordan via the extended Euclidean algorithm on columns
    // of [A | I]: unimodular row operations only.
    let mut a: Vec<Vec<BigInt>> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut v: Vec<BigInt> = r.iter().map(|&x| BigInt::from(x)).collect();
            v.extend((0..n).map(|j| if i == j { BigInt::one() } else { BigInt::zero() }));
            v
        })
        .collect();
    for k in 0..n {
        // Euclid down column k until a single nonzero remains at row k.
        loop {
            let pivot = (k..n)
                .filter(|&r| !a[r][k].is_zero())
                .min_by(|&x, &y| a[x][k].abs().cmp(&a[y][k].abs()))?;
            a.swap(k, pivot);
            let mut done = true;
            for r in k + 1..n {
                if a[r][k].is_zero() {
                    continue;
                }
                let q = &a[r][k] / &a[k][k];
                for c in 0..2 * n {
                    let v = &a[r][c] - &q * &a[k][c];
                    a[r][c] = v;
                }
                if !a[r][k].is_zero() {
                    done = false;
                }
            }
            if done {
                break;
            }
        }
        if !a[k][k].abs().is_one() {
            return None;
        }
    }
    // Back substitution.
    for k in (0..n).rev() {
        if a[k][k].is_negative() {
            for c in 0..2 * n {
                a[k][c] = -a[k][c].clone();
            }
        }
        for r in 0..k {
            if a[r][k].is_zero() {
                continue;
            }
            let q = a[r][k].clone();
            for c in 0..2 * n {
                let v = &a[r][c] - &q * &a[k][c];
                a[r][c] = v;
            }
        }
    }
    a.iter()
        .map(|r| r[n..].iter().map(|x| x.to_i64()).collect::<Option<Vec<i64>>>())
        .collect()
}

/// Reduction state: the working basis together with the accumulated
/// transform, kept in lockstep.
#[derive(Debug, Clone)]
pub struct ReductionState {
    pub basis: Basis,
    pub transform: UnimodularTransform,
}

impl ReductionState {
    pub fn new(basis: Basis) -> Self {
        let n = basis.rank();
        ReductionState {
            basis,
            transform: UnimodularTransform::identity(n),
        }
    }

    /// `b_target <- b_target - c * b_source`, mirrored in the transform.
    pub fn sub_multiple(&mut self, target: usize, source: usize, c: i64) -> Result<()> {
        if c == 0 {
            return Ok(());
        }
        self.transform.sub_multiple(target, source, c)?;
        let src = self.basis.column(source).to_vec();
        axpy(self.basis.column_mut(target), -(c as f64), &src);
        Ok(())
    }

    /// `b_target <- b_target - sum_k c_k b_k`, mirrored in the transform.
    pub fn update(&mut self, target: usize, coeffs: &[i64]) -> Result<()> {
        self.transform.apply_column_update(target, coeffs)?;
        let s = self.basis.combine_int(coeffs);
        axpy(self.basis.column_mut(target), -1.0, &s);
        Ok(())
    }

    pub fn swap(&mut self, a: usize, b: usize) {
        self.basis.columns.swap(a, b);
        self.transform.swap(a, b);
    }

    pub fn into_parts(self) -> (Basis, UnimodularTransform) {
        (self.basis, self.transform)
    }
}

/// Pure form of one SR update: returns the basis with column `target`
/// replaced by `b_target - sum_k c_k b_k` and the transform right-multiplied
/// by the matching elementary matrix.
pub fn apply_update(
    basis: &Basis,
    transform: &UnimodularTransform,
    target: usize,
    coeffs: &[i64],
) -> Result<(Basis, UnimodularTransform)> {
    if coeffs.len() != basis.rank() {
        return Err(LatticeError::DimensionMismatch {
            expected: basis.rank(),
            found: coeffs.len(),
        });
    }
    let mut state = ReductionState {
        basis: basis.clone(),
        transform: transform.clone(),
    };
    state.update(target, coeffs)?;
    Ok(state.into_parts())
}

/// `||B U - B_out||_F / ||B_out||_F`
pub fn reconstruction_error(input: &Basis, transform: &UnimodularTransform, output: &Basis) -> f64 {
    let product = input.mul_transform(transform);
    let mut num = 0.0;
    for (p, o) in product.columns().iter().zip(output.columns()) {
        num += p.iter().zip(o).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    }
    (num / output.frobenius_sq()).sqrt()
}
