//! Angular (random-hyperplane) locality-sensitive hashing and the SR-Hash
//! reducer built on it.
//!
//! Each of the `t` tables owns `k` random unit normals; a vector's key in a
//! table is the `k`-bit word of signs `<a_j, v> >= 0`. A query for `b_i`
//! unions the buckets of both `b_i` and `-b_i` across all tables, since a
//! column close to `-b_i` cancels `b_i` just as well.

use std::collections::{BTreeSet, HashMap};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{LatticeError, Result};
use crate::linalg::{dot, norm_sq, Basis, UnimodularTransform};
use crate::random::stream_rng;
use crate::report::ReductionReport;
use crate::sr::{best_pair, run_sequential, Proposal, Proposer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LshParams {
    /// Bits per key (AND-compositions).
    pub k: usize,
    /// Number of tables (OR-compositions).
    pub t: usize,
    pub seed: u64,
}

impl LshParams {
    /// `t = round(n^0.585)`, `k = round(log2 n)`; gives `t = 11, k = 6` at
    /// `n = 60`.
    pub fn defaults_for(n: usize, seed: u64) -> Self {
        let nf = n.max(1) as f64;
        LshParams {
            k: nf.log2().round() as usize,
            t: (nf.powf(0.585).round() as usize).max(1),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.t == 0 {
            return Err(LatticeError::InvalidParameter("LSH needs at least one table".into()));
        }
        if self.k > 64 {
            return Err(LatticeError::InvalidParameter(format!(
                "at most 64 bits per key, got k = {}",
                self.k
            )));
        }
        Ok(())
    }
}

/// Sign sketch: bit `j` is set iff `<a_j, v> >= 0`.
pub fn sketch(hyperplanes: &[Vec<f64>], v: &[f64]) -> u64 {
    hyperplanes
        .iter()
        .enumerate()
        .fold(0u64, |key, (j, a)| if dot(a, v) >= 0.0 { key | (1 << j) } else { key })
}

fn negated_sketch(hyperplanes: &[Vec<f64>], v: &[f64]) -> u64 {
    hyperplanes
        .iter()
        .enumerate()
        .fold(0u64, |key, (j, a)| if -dot(a, v) >= 0.0 { key | (1 << j) } else { key })
}

/// `t` hash tables over column indices.
#[derive(Debug, Clone)]
pub struct HashTableSet {
    hyperplanes: Vec<Vec<Vec<f64>>>,
    buckets: Vec<HashMap<u64, BTreeSet<usize>>>,
    /// Keys each stored column was inserted under, one per table.
    stored: HashMap<usize, Vec<u64>>,
}

impl HashTableSet {
    /// Empty tables with normalized Gaussian hyperplanes; table `l` draws
    /// from its own RNG stream of `params.seed`.
    pub fn new(dim: usize, params: &LshParams) -> Result<Self> {
        params.validate()?;
        let hyperplanes = (0..params.t)
            .map(|l| {
                let mut rng = stream_rng(params.seed, l as u64);
                (0..params.k)
                    .map(|_| random_unit_vector(dim, &mut rng))
                    .collect()
            })
            .collect();
        Ok(HashTableSet {
            hyperplanes,
            buckets: vec![HashMap::new(); params.t],
            stored: HashMap::new(),
        })
    }

    pub fn tables(&self) -> usize {
        self.hyperplanes.len()
    }

    pub fn bits(&self) -> usize {
        self.hyperplanes.first().map_or(0, |h| h.len())
    }

    pub fn hyperplanes(&self, table: usize) -> &[Vec<f64>] {
        &self.hyperplanes[table]
    }

    pub fn bucket(&self, table: usize, key: u64) -> Option<&BTreeSet<usize>> {
        self.buckets[table].get(&key)
    }

    /// Indices stored in table `table`, across all of its buckets.
    pub fn indices_in_table(&self, table: usize) -> BTreeSet<usize> {
        self.buckets[table].values().flatten().copied().collect()
    }

    /// Number of buckets of `table` that contain `index`.
    pub fn occurrences(&self, table: usize, index: usize) -> usize {
        self.buckets[table].values().filter(|b| b.contains(&index)).count()
    }

    pub fn insert(&mut self, index: usize, v: &[f64]) {
        if self.stored.contains_key(&index) {
            self.remove(index);
        }
        let keys: Vec<u64> = self.hyperplanes.iter().map(|h| sketch(h, v)).collect();
        for (table, &key) in self.buckets.iter_mut().zip(&keys) {
            table.entry(key).or_default().insert(index);
        }
        self.stored.insert(index, keys);
    }

    /// Removes `index` using the keys it was inserted under. Returns false
    /// if it was not stored.
    pub fn remove(&mut self, index: usize) -> bool {
        let Some(keys) = self.stored.remove(&index) else {
            return false;
        };
        for (table, key) in self.buckets.iter_mut().zip(keys) {
            if let Some(bucket) = table.get_mut(&key) {
                bucket.remove(&index);
                if bucket.is_empty() {
                    table.remove(&key);
                }
            }
        }
        true
    }

    /// Union over all tables of the buckets of `v` and `-v`, without `i`.
    pub fn query(&self, i: usize, v: &[f64]) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        for (h, table) in self.hyperplanes.iter().zip(&self.buckets) {
            for key in [sketch(h, v), negated_sketch(h, v)] {
                if let Some(bucket) = table.get(&key) {
                    out.extend(bucket.iter().copied().filter(|&j| j != i));
                }
            }
        }
        out
    }
}

fn random_unit_vector<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = norm_sq(&v).sqrt();
        if n > 0.0 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Hashes every column of `basis` into fresh tables.
pub fn build_tables(basis: &Basis, params: &LshParams) -> Result<HashTableSet> {
    let mut tables = HashTableSet::new(basis.dim(), params)?;
    for (i, col) in basis.columns().iter().enumerate() {
        tables.insert(i, col);
    }
    Ok(tables)
}

/// Candidate set for column `i`: every index sharing a bucket with `b_i` or
/// `-b_i` in some table.
pub fn query_candidates(tables: &HashTableSet, i: usize, b_i: &[f64]) -> BTreeSet<usize> {
    tables.query(i, b_i)
}

struct HashProposer {
    tables: HashTableSet,
}

impl Proposer for HashProposer {
    fn propose(&mut self, basis: &Basis, i: usize, report: &mut ReductionReport) -> Result<Option<Proposal>> {
        let candidates = self.tables.query(i, basis.column(i));
        report.vector_comparisons += candidates.len() as u64;
        best_pair(basis, i, candidates)
    }

    fn updated(&mut self, basis: &Basis, i: usize, _old: &[f64]) {
        self.tables.remove(i);
        self.tables.insert(i, basis.column(i));
    }
}

/// SR-Hash: SR-Pair whose candidate columns come from the LSH tables.
pub fn sr_hash_reduce(basis: &Basis, tau: f64, params: &LshParams) -> Result<(Basis, UnimodularTransform, ReductionReport)> {
    sr_hash_reduce_with(basis, tau, params, None, 0)
}

pub(crate) fn sr_hash_reduce_with(
    basis: &Basis,
    tau: f64,
    params: &LshParams,
    max_updates: Option<u64>,
    start_index: usize,
) -> Result<(Basis, UnimodularTransform, ReductionReport)> {
    let mut proposer = HashProposer {
        tables: build_tables(basis, params)?,
    };
    let (b, u, mut report) = run_sequential(basis, tau, max_updates, start_index, &mut proposer)?;
    report.seed = Some(params.seed);
    Ok((b, u, report))
}

/// True when no candidate returned by `tables` would be accepted for any
/// column.
pub fn is_hash_stationary(basis: &Basis, tables: &HashTableSet, tau: f64) -> Result<bool> {
    for i in 0..basis.rank() {
        let candidates = tables.query(i, basis.column(i));
        if let Some(Proposal::Pair { new_norm_sq, .. }) = best_pair(basis, i, candidates)? {
            if crate::sr::accepts(new_norm_sq, norm_sq(basis.column(i)), tau) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Parameters balancing `k` AND- and `t` OR-compositions for a list of
/// size `n_items` and an `(r1, r2, p1, p2)`-sensitive family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LshBalance {
    pub rho: f64,
    pub k: usize,
    pub t: usize,
}

/// `rho = ln(1/p1) / ln(1/p2)`, `k = ceil(ln N / ln(1/p2))`, `t = ceil(N^rho)`.
pub fn lsh_parameter_helper(p1: f64, p2: f64, n_items: usize) -> Result<LshBalance> {
    if !(p2 > 0.0 && p2 < p1 && p1 < 1.0) {
        return Err(LatticeError::InvalidParameter(format!(
            "need 0 < p2 < p1 < 1, got p1 = {p1}, p2 = {p2}"
        )));
    }
    if n_items == 0 {
        return Err(LatticeError::InvalidParameter("list size must be positive".into()));
    }
    let rho = p1.recip().ln() / p2.recip().ln();
    let nf = n_items as f64;
    let k = ceil_tol(nf.ln() / p2.recip().ln()) as usize;
    let t = (ceil_tol(nf.powf(rho)) as usize).max(1);
    Ok(LshBalance { rho, k, t })
}

/// Ceiling that ignores rounding noise just above an integer, so that e.g.
/// `log2 64` gives 6 rather than 7.
fn ceil_tol(x: f64) -> f64 {
    (x - 1e-9 * x.abs().max(1.0)).ceil()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::dual_gaussian_basis;
    use crate::sr::{sr_reduce, SrConfig, Subroutine};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn sketch_sign_rule() {
        assert_eq!(sketch(&[vec![0.0, 1.0]], &[3.0, -2.0]), 0);
        assert_eq!(sketch(&[vec![0.0, 1.0]], &[3.0, 2.0]), 1);
        // boundary goes to 1
        assert_eq!(sketch(&[vec![0.0, 1.0]], &[3.0, 0.0]), 1);
    }

    #[test]
    fn negation_complements_sketch() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h: Vec<Vec<f64>> = (0..10).map(|_| random_unit_vector(5, &mut rng)).collect();
        let v = random_unit_vector(5, &mut rng);
        let neg: Vec<f64> = v.iter().map(|x| -x).collect();
        assert_eq!(sketch(&h, &v) ^ sketch(&h, &neg), (1 << 10) - 1);
        assert_eq!(negated_sketch(&h, &v), sketch(&h, &neg));
    }

    #[test]
    fn collision_probability_tracks_angle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let samples = 100_000;
        for theta in [0.3, PI / 3.0, PI / 2.0, 2.0] {
            let u = [1.0, 0.0, 0.0];
            let v = [theta.cos(), theta.sin(), 0.0];
            let hits = (0..samples)
                .filter(|_| {
                    let a = [random_unit_vector(3, &mut rng)];
                    sketch(&a, &u) == sketch(&a, &v)
                })
                .count();
            let p = hits as f64 / samples as f64;
            assert!((p - (1.0 - theta / PI)).abs() < 0.02, "theta {theta}: {p}");
        }
    }

    #[test]
    fn zero_bits_one_table_is_one_bucket() {
        let params = LshParams { k: 0, t: 1, seed: 0 };
        let tables = build_tables(&Basis::identity(2), &params).unwrap();
        assert_eq!(tables.bucket(0, 0).unwrap().len(), 2);
        assert_eq!(query_candidates(&tables, 0, &[1.0, 0.0]), BTreeSet::from([1]));
    }

    #[test]
    fn defaults_at_sixty() {
        let p = LshParams::defaults_for(60, 0);
        assert_eq!((p.t, p.k), (11, 6));
        let tables = HashTableSet::new(60, &p).unwrap();
        assert_eq!((tables.tables(), tables.bits()), (11, 6));
        for l in 0..11 {
            for a in tables.hyperplanes(l) {
                assert!((norm_sq(a) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn insert_remove_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = dual_gaussian_basis(8, &mut rng);
        let params = LshParams { k: 3, t: 4, seed: 9 };
        let mut tables = build_tables(&b, &params).unwrap();
        for l in 0..4 {
            for i in 0..8 {
                assert_eq!(tables.occurrences(l, i), 1);
            }
        }
        assert!(tables.remove(5));
        assert!(!tables.remove(5));
        for l in 0..4 {
            assert_eq!(tables.occurrences(l, 5), 0);
        }
    }

    #[test]
    fn candidates_never_contain_query() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let b = dual_gaussian_basis(12, &mut rng);
        let tables = build_tables(&b, &LshParams { k: 2, t: 3, seed: 1 }).unwrap();
        for i in 0..12 {
            assert!(!query_candidates(&tables, i, b.column(i)).contains(&i));
        }
    }

    #[test]
    fn orthogonal_basis_rarely_collides() {
        let params = LshParams { k: 12, t: 1, seed: 5 };
        let b = Basis::identity(32);
        let tables = build_tables(&b, &params).unwrap();
        let total: usize = (0..32).map(|i| query_candidates(&tables, i, b.column(i)).len()).sum();
        // expected pairwise collision rate (1/2)^12 per key, two keys per query
        assert!(total < 10, "{total}");
    }

    #[test]
    fn identity_basis_is_unchanged() {
        let (b, u, r) = sr_hash_reduce(&Basis::identity(5), 1.0, &LshParams { k: 0, t: 1, seed: 0 }).unwrap();
        assert_eq!(b, Basis::identity(5));
        assert!(u.is_identity());
        assert_eq!(r.accepted_updates, 0);
        assert_eq!(r.seed, Some(0));
    }

    #[test]
    fn degenerate_params_match_pair() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..10 {
            let b = dual_gaussian_basis(10, &mut rng);
            let (hb, hu, hr) = sr_hash_reduce(&b, 1.0, &LshParams { k: 0, t: 1, seed: 3 }).unwrap();
            let (pb, pu, pr) = sr_reduce(&b, &SrConfig::new(Subroutine::Pair)).unwrap();
            assert_eq!(hb, pb);
            assert_eq!(hu, pu);
            assert_eq!(hr.accepted_updates, pr.accepted_updates);
            assert_eq!(hr.vector_comparisons, pr.vector_comparisons);
        }
    }

    #[test]
    fn hash_output_is_stationary_for_its_tables() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let b = dual_gaussian_basis(20, &mut rng);
            let params = LshParams::defaults_for(20, 11);
            let (out, u, _) = sr_hash_reduce(&b, 1.0, &params).unwrap();
            assert!(u.is_unimodular());
            let tables = build_tables(&out, &params).unwrap();
            assert!(is_hash_stationary(&out, &tables, 1.0).unwrap());
            for l in 0..tables.tables() {
                assert_eq!(tables.indices_in_table(l), (0..20).collect());
            }
        }
    }

    #[test]
    fn parameter_helper_values() {
        let r = lsh_parameter_helper(2.0 / 3.0, 1.0 / 3.0, 100).unwrap();
        assert!((r.rho - (1.5f64).ln() / 3f64.ln()).abs() < 1e-12);
        assert!((r.rho - 0.369).abs() < 1e-3);
        let r = lsh_parameter_helper(0.75, 0.5, 60).unwrap();
        assert_eq!(r.k, 6);
        assert_eq!(lsh_parameter_helper(0.75, 0.5, 64).unwrap().k, 6);
        let r = lsh_parameter_helper(1.0 - 1e-12, 0.5, 60).unwrap();
        assert!(r.rho < 1e-10);
        assert_eq!(r.t, 1);
        assert!(lsh_parameter_helper(0.3, 0.5, 10).is_err());
        assert!(lsh_parameter_helper(0.5, 0.5, 10).is_err());
    }
}
