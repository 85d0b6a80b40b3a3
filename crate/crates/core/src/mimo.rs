//! Uplink MIMO model, lattice-reduction-aided ZF/SIC detection and the
//! Monte-Carlo BER harness.
//!
//! The complex model `y = H x + w` is converted to its real form
//! `[[Re H, -Im H], [Im H, Re H]]`. Symbols use odd-integer PAM levels per
//! real dimension, so `x' = (x + 1) / 2` lives on consecutive integers and
//! `y' = (y + B 1) / 2 = B x' + w / 2` is a lattice decoding problem.
//!
//! SNR convention: `snr_db = 10 log10(n_t sigma_s^2 / sigma_w^2)` with
//! `sigma_s^2` the mean energy of the complex constellation.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{lll_reduce, seysen_reduce, LllConfig};
use crate::cvp::babai_nearest_plane;
use crate::error::{LatticeError, Result};
use crate::linalg::{dual_basis, gram_schmidt, orthogonality_defect, round_to_i64, Basis, UnimodularTransform};
use crate::lsh::{sr_hash_reduce, LshParams};
use crate::random::stream_rng;
use crate::report::ReductionReport;
use crate::sr::{sr_cvp_heuristic, sr_reduce, SrConfig, Subroutine};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Detector {
    Zf,
    Sic,
}

impl Detector {
    pub fn name(self) -> &'static str {
        match self {
            Detector::Zf => "zf",
            Detector::Sic => "sic",
        }
    }
}

impl FromStr for Detector {
    type Err = LatticeError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zf" => Ok(Detector::Zf),
            "sic" => Ok(Detector::Sic),
            other => Err(LatticeError::InvalidParameter(format!("unknown detector `{other}`"))),
        }
    }
}

/// Reduction applied to the dual of the detection basis.
///
/// In JSON, every reducer is a plain string (`"none"`, `"lll"`, `"seysen"`,
/// `"sr-pair"`, `"sr-hash"`, `"sr-cvp"`); `"sr-hash"` takes default LSH
/// parameters for the basis rank, or an object
/// `{"sr-hash": {"k": 6, "t": 11, "seed": 1}}` fixes them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ReducerSpec", into = "ReducerSpec")]
pub enum Reducer {
    None,
    Lll,
    Seysen,
    SrPair,
    SrHash(Option<LshParams>),
    SrCvp,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ReducerSpec {
    Name(String),
    Hash {
        #[serde(rename = "sr-hash")]
        params: LshParams,
    },
}

impl TryFrom<ReducerSpec> for Reducer {
    type Error = LatticeError;

    fn try_from(spec: ReducerSpec) -> Result<Self> {
        match spec {
            ReducerSpec::Name(name) => name.parse(),
            ReducerSpec::Hash { params } => Ok(Reducer::SrHash(Some(params))),
        }
    }
}

impl From<Reducer> for ReducerSpec {
    fn from(r: Reducer) -> Self {
        match r {
            Reducer::SrHash(Some(params)) => ReducerSpec::Hash { params },
            other => ReducerSpec::Name(other.name().to_string()),
        }
    }
}

impl Reducer {
    pub fn name(self) -> &'static str {
        match self {
            Reducer::None => "none",
            Reducer::Lll => "lll",
            Reducer::Seysen => "seysen",
            Reducer::SrPair => "sr-pair",
            Reducer::SrHash(_) => "sr-hash",
            Reducer::SrCvp => "sr-cvp",
        }
    }

    /// Reduces `basis`. `stream` decorrelates the LSH hyperplanes of
    /// different trials.
    pub fn reduce(self, basis: &Basis, stream: u64) -> Result<(Basis, UnimodularTransform, ReductionReport)> {
        match self {
            Reducer::None => {
                let log_od = crate::linalg::log_orthogonality_defect(basis)?;
                let report = ReductionReport {
                    od_before: log_od.exp(),
                    od_after: log_od.exp(),
                    log_od_before: log_od,
                    log_od_after: log_od,
                    ..Default::default()
                };
                Ok((basis.clone(), UnimodularTransform::identity(basis.rank()), report))
            }
            Reducer::Lll => lll_reduce(basis, &LllConfig::default()),
            Reducer::Seysen => seysen_reduce(basis),
            Reducer::SrPair => sr_reduce(basis, &SrConfig::new(Subroutine::Pair)),
            Reducer::SrHash(params) => {
                let mut p = params.unwrap_or_else(|| LshParams::defaults_for(basis.rank(), 0));
                p.seed = p.seed.wrapping_add(stream);
                sr_hash_reduce(basis, 1.0, &p)
            }
            Reducer::SrCvp => sr_cvp_heuristic(basis, 1.0),
        }
    }
}

impl fmt::Display for Reducer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Reducer {
    type Err = LatticeError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Reducer::None),
            "lll" => Ok(Reducer::Lll),
            "seysen" => Ok(Reducer::Seysen),
            "sr-pair" => Ok(Reducer::SrPair),
            "sr-hash" => Ok(Reducer::SrHash(None)),
            "sr-cvp" => Ok(Reducer::SrCvp),
            other => Err(LatticeError::InvalidParameter(format!("unknown reducer `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MimoConfig {
    pub n_t: usize,
    pub n_r: usize,
    pub qam_order: u32,
    pub snr_db: f64,
    #[serde(default)]
    pub correlation_rho: f64,
    #[serde(default)]
    pub mmse: bool,
    pub detector: Detector,
    pub reducer: Reducer,
    #[serde(default = "default_trials")]
    pub trials: usize,
    pub seed: u64,
}

/// Desk-scale Monte-Carlo count; pass `trials` for more.
pub const DEFAULT_TRIALS: usize = 2000;

fn default_trials() -> usize {
    DEFAULT_TRIALS
}

impl MimoConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(LatticeError::InvalidParameter(msg));
        if !matches!(self.qam_order, 4 | 16 | 64) {
            return bad(format!("qam_order must be 4, 16 or 64, got {}", self.qam_order));
        }
        if !(0.0..1.0).contains(&self.correlation_rho) {
            return bad(format!("correlation_rho must lie in [0, 1), got {}", self.correlation_rho));
        }
        if self.n_t == 0 || self.n_r < self.n_t {
            return bad(format!("need 1 <= n_t <= n_r, got n_t = {}, n_r = {}", self.n_t, self.n_r));
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if !self.snr_db.is_finite() {
            return bad("snr_db must be finite".into());
        }
        Ok(())
    }

    pub fn constellation(&self) -> Constellation {
        Constellation::new(self.qam_order)
    }

    /// Complex noise variance `sigma_w^2` at `snr_db`.
    pub fn noise_variance(&self, snr_db: f64) -> f64 {
        self.n_t as f64 * self.constellation().symbol_energy() / 10f64.powf(snr_db / 10.0)
    }

    /// Label used in sweep output, e.g. `mmse-sic`.
    pub fn detector_label(&self) -> String {
        if self.mmse {
            format!("mmse-{}", self.detector.name())
        } else {
            self.detector.name().to_string()
        }
    }
}

/// Square QAM as a product of two Gray-coded PAM alphabets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Constellation {
    /// Levels per real dimension.
    pub levels: usize,
    pub bits_per_dim: u32,
}

impl Constellation {
    pub fn new(order: u32) -> Self {
        let levels = (order as f64).sqrt().round() as usize;
        Constellation {
            levels,
            bits_per_dim: levels.trailing_zeros(),
        }
    }

    /// Odd-integer amplitude of PAM index `i`: `2i - (L - 1)`.
    pub fn amplitude(&self, i: usize) -> f64 {
        2.0 * i as f64 - (self.levels as f64 - 1.0)
    }

    /// Integer coordinate of index `i` after `x' = (x + 1) / 2`.
    pub fn shifted(&self, i: usize) -> i64 {
        i as i64 + 1 - (self.levels / 2) as i64
    }

    /// Inverse of [`shifted`](Self::shifted), clipping to the alphabet.
    pub fn index_of_shifted(&self, v: i64) -> usize {
        let lo = 1 - (self.levels / 2) as i64;
        (v.clamp(lo, lo + self.levels as i64 - 1) - lo) as usize
    }

    pub fn gray(i: usize) -> u64 {
        (i ^ (i >> 1)) as u64
    }

    /// Mean energy of a complex symbol, `2 (M - 1) / 3`.
    pub fn symbol_energy(&self) -> f64 {
        let m = (self.levels * self.levels) as f64;
        2.0 * (m - 1.0) / 3.0
    }

    /// Bits of the Gray label of index `i`, most significant first.
    pub fn bits(&self, i: usize) -> Vec<u8> {
        let g = Self::gray(i);
        (0..self.bits_per_dim).rev().map(|b| ((g >> b) & 1) as u8).collect()
    }
}

/// One channel draw.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    /// `n_r x n_t`, row-major.
    pub complex_channel: Vec<Vec<Complex64>>,
    /// `2 n_r x 2 n_t`
    pub real_basis: Basis,
    /// Noise standard deviation per real dimension, `sigma_w / sqrt 2`.
    pub noise_sigma: f64,
}

/// `[[Re H, -Im H], [Im H, Re H]]` for a row-major complex matrix with at
/// least as many rows as columns.
pub fn complex_to_real(channel: &[Vec<Complex64>]) -> Basis {
    let nr = channel.len();
    let nt = channel.first().map_or(0, |r| r.len());
    let mut columns = vec![vec![0.0; 2 * nr]; 2 * nt];
    for (i, row) in channel.iter().enumerate() {
        for (j, h) in row.iter().enumerate() {
            columns[j][i] = h.re;
            columns[j][nr + i] = h.im;
            columns[nt + j][i] = -h.im;
            columns[nt + j][nr + i] = h.re;
        }
    }
    Basis::from_columns(columns).expect("finite channel")
}

/// `Psi_ij = rho^|i - j|`.
pub fn correlation_matrix(n: usize, rho: f64) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| rho.powi((i as i32 - j as i32).abs())).collect())
        .collect()
}

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// i.i.d. `CN(0, 1)` channel, left-multiplied by `Psi(rho)` when
/// `correlation_rho > 0`.
pub fn generate_channel<R: Rng + ?Sized>(config: &MimoConfig, snr_db: f64, rng: &mut R) -> ChannelRealization {
    let mut h: Vec<Vec<Complex64>> = (0..config.n_r)
        .map(|_| (0..config.n_t).map(|_| complex_gaussian(rng, 1.0)).collect())
        .collect();
    if config.correlation_rho > 0.0 {
        let psi = correlation_matrix(config.n_r, config.correlation_rho);
        h = psi
            .iter()
            .map(|prow| {
                (0..config.n_t)
                    .map(|j| prow.iter().zip(&h).map(|(p, hrow)| hrow[j] * p).sum())
                    .collect()
            })
            .collect();
    }
    ChannelRealization {
        real_basis: complex_to_real(&h),
        complex_channel: h,
        noise_sigma: (config.noise_variance(snr_db) / 2.0).sqrt(),
    }
}

/// The basis detection runs on: the real channel, extended by
/// `(sigma_w / sigma_s) I` below it in MMSE mode.
pub fn detection_basis(channel: &ChannelRealization, config: &MimoConfig) -> Basis {
    if config.mmse {
        let ratio = channel.noise_sigma * std::f64::consts::SQRT_2 / config.constellation().symbol_energy().sqrt();
        channel.real_basis.stack_scaled_identity(ratio)
    } else {
        channel.real_basis.clone()
    }
}

/// Shifted observation `(y_ext + B_ext 1) / 2`, with `y_ext = [y; 0]` in
/// MMSE mode.
pub fn shifted_observation(y: &[f64], basis: &Basis) -> Vec<f64> {
    let mut ext = y.to_vec();
    ext.resize(basis.dim(), 0.0);
    let ones = vec![1i64; basis.rank()];
    let b1 = basis.combine_int(&ones);
    ext.iter().zip(&b1).map(|(a, b)| 0.5 * (a + b)).collect()
}

/// Per-trial decisions and their bit errors.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    pub decided_bits: Vec<u8>,
    pub transmitted_bits: Vec<u8>,
    pub bit_errors: u64,
    pub symbol_errors: u64,
    pub comparisons_used: u64,
}

impl DetectionResult {
    /// `decided` and `sent` hold PAM indices per real dimension.
    pub fn new(constellation: &Constellation, decided: &[usize], sent: &[usize], comparisons_used: u64) -> Self {
        let decided_bits: Vec<u8> = decided.iter().flat_map(|&i| constellation.bits(i)).collect();
        let transmitted_bits: Vec<u8> = sent.iter().flat_map(|&i| constellation.bits(i)).collect();
        let bit_errors = decided_bits.iter().zip(&transmitted_bits).filter(|(a, b)| a != b).count() as u64;
        let half = sent.len() / 2;
        let symbol_errors = (0..half)
            .filter(|&u| decided[u] != sent[u] || decided[u + half] != sent[u + half])
            .count() as u64;
        DetectionResult {
            decided_bits,
            transmitted_bits,
            bit_errors,
            symbol_errors,
            comparisons_used,
        }
    }
}

/// Lattice-reduction-aided detection. `reduced = B_ext U`, where `B_ext` is
/// [`detection_basis`]. Returns the decided PAM index per real dimension.
pub fn lr_aided_detect(
    y: &[f64],
    reduced: &Basis,
    transform: &UnimodularTransform,
    config: &MimoConfig,
) -> Result<Vec<usize>> {
    let n = reduced.rank();
    if transform.size() != n || n != 2 * config.n_t {
        return Err(LatticeError::DimensionMismatch {
            expected: 2 * config.n_t,
            found: n,
        });
    }
    let expected_dim = if config.mmse { 2 * config.n_r + n } else { 2 * config.n_r };
    if y.len() != 2 * config.n_r || reduced.dim() != expected_dim {
        return Err(LatticeError::DimensionMismatch {
            expected: 2 * config.n_r,
            found: y.len(),
        });
    }
    // (y_ext + B_ext 1) / 2 with B_ext 1 = B~ U^-1 1
    let inv = transform.inverse();
    let ones_tilde: Vec<i64> = (0..n).map(|i| (0..n).map(|j| inv.get(i, j)).sum()).collect();
    let b1 = reduced.combine_int(&ones_tilde);
    let mut ext = y.to_vec();
    ext.resize(reduced.dim(), 0.0);
    let target: Vec<f64> = ext.iter().zip(&b1).map(|(a, b)| 0.5 * (a + b)).collect();

    let gs = gram_schmidt(reduced)?;
    let z: Vec<i64> = match config.detector {
        Detector::Zf => gs
            .least_squares(&target)
            .into_iter()
            .map(round_to_i64)
            .collect::<Result<_>>()?,
        Detector::Sic => babai_nearest_plane(&gs, reduced, &target)?.coefficients,
    };
    let constellation = config.constellation();
    (0..n)
        .map(|i| {
            let v = (0..n).try_fold(0i64, |acc, j| {
                transform
                    .get(i, j)
                    .checked_mul(z[j])
                    .and_then(|p| acc.checked_add(p))
                    .ok_or(LatticeError::Overflow)
            })?;
            Ok(constellation.index_of_shifted(v))
        })
        .collect()
}

/// `1 - prod_i erf(1 / (2 sqrt 2 sigma ||d_i||))`
pub fn pe_bound(dual_norms: &[f64], sigma: f64) -> f64 {
    let p: f64 = dual_norms
        .iter()
        .map(|&d| libm::erf(1.0 / (2.0 * std::f64::consts::SQRT_2 * sigma * d)))
        .product();
    1.0 - p
}

/// Everything one Monte-Carlo trial produces.
#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub detection: DetectionResult,
    /// Orthogonality defect of the reduced dual.
    pub od: f64,
    pub log_od: f64,
    pub report: ReductionReport,
    /// Primal transform used for detection; exactly unimodular.
    pub transform: UnimodularTransform,
    pub reconstruction_error: f64,
}

/// Runs trial `trial` at SNR point `snr_index`. The RNG stream depends only
/// on `(config.seed, snr_index, trial)`.
pub fn run_trial(config: &MimoConfig, snr_db: f64, snr_index: usize, trial: usize) -> Result<TrialOutcome> {
    let stream = ((snr_index as u64) << 32) | trial as u64;
    let mut rng = stream_rng(config.seed, stream);
    let constellation = config.constellation();
    let channel = generate_channel(config, snr_db, &mut rng);
    let n = 2 * config.n_t;
    let sent: Vec<usize> = (0..n).map(|_| rng.random_range(0..constellation.levels)).collect();
    let x: Vec<f64> = sent.iter().map(|&i| constellation.amplitude(i)).collect();
    let clean = channel.real_basis.combine(&x);
    let y: Vec<f64> = clean
        .iter()
        .map(|v| v + channel.noise_sigma * rng.sample::<f64, _>(StandardNormal))
        .collect();

    let ext = detection_basis(&channel, config);
    let dual = dual_basis(&ext)?;
    let (reduced_dual, v, report) = config.reducer.reduce(&dual, stream)?;
    let u = v.inverse_transpose();
    let reduced = ext.mul_transform(&u);
    let reconstruction_error = crate::linalg::reconstruction_error(&dual, &v, &reduced_dual);
    let decided = lr_aided_detect(&y, &reduced, &u, config)?;
    let od = orthogonality_defect(&reduced_dual).unwrap_or(report.od_after);
    Ok(TrialOutcome {
        detection: DetectionResult::new(&constellation, &decided, &sent, report.vector_comparisons),
        od,
        log_od: report.log_od_after,
        report,
        transform: u,
        reconstruction_error,
    })
}

/// One row of a BER/complexity sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub snr_db: f64,
    pub detector: String,
    pub reducer: String,
    pub ber: f64,
    pub ser: f64,
    pub mean_comparisons: f64,
    pub mean_od: f64,
    pub trials: usize,
    pub seed: u64,
}

/// Monte-Carlo BER sweep: fresh channel and noise per trial, reduction of
/// the dual of the detection basis, detection through `U = V^-T`. Trials
/// run in parallel and are aggregated in trial order.
pub fn run_ber_sweep(config: &MimoConfig, snr_points: &[f64]) -> Result<Vec<SweepRow>> {
    config.validate()?;
    let constellation = config.constellation();
    let bits_per_trial = (2 * config.n_t) as f64 * constellation.bits_per_dim as f64;
    let symbols_per_trial = config.n_t as f64;
    snr_points
        .iter()
        .enumerate()
        .map(|(s, &snr_db)| {
            let outcomes: Vec<TrialOutcome> = (0..config.trials)
                .into_par_iter()
                .map(|t| run_trial(config, snr_db, s, t))
                .collect::<Result<_>>()?;
            let trials = config.trials as f64;
            let bit_errors: u64 = outcomes.iter().map(|o| o.detection.bit_errors).sum();
            let symbol_errors: u64 = outcomes.iter().map(|o| o.detection.symbol_errors).sum();
            let comparisons: u64 = outcomes.iter().map(|o| o.detection.comparisons_used).sum();
            let od: f64 = outcomes.iter().map(|o| o.od).sum();
            Ok(SweepRow {
                snr_db,
                detector: config.detector_label(),
                reducer: config.reducer.name().to_string(),
                ber: bit_errors as f64 / (trials * bits_per_trial),
                ser: symbol_errors as f64 / (trials * symbols_per_trial),
                mean_comparisons: comparisons as f64 / trials,
                mean_od: od / trials,
                trials: config.trials,
                seed: config.seed,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn config(detector: Detector, reducer: Reducer) -> MimoConfig {
        MimoConfig {
            n_t: 4,
            n_r: 4,
            qam_order: 16,
            snr_db: 30.0,
            correlation_rho: 0.0,
            mmse: false,
            detector,
            reducer,
            trials: 100,
            seed: 1,
        }
    }

    #[test]
    fn real_form_of_one_by_one() {
        let b = complex_to_real(&[vec![Complex64::new(1.0, 1.0)]]);
        assert_eq!(b.rows(), vec![vec![1.0, -1.0], vec![1.0, 1.0]]);
    }

    #[test]
    fn real_channel_is_block_diagonal() {
        let h = vec![vec![Complex64::new(2.0, 0.0)], vec![Complex64::new(3.0, 0.0)]];
        let b = complex_to_real(&h);
        assert_eq!(
            b.rows(),
            vec![vec![2.0, 0.0], vec![3.0, 0.0], vec![0.0, 2.0], vec![0.0, 3.0]]
        );
    }

    #[test]
    fn real_model_matches_complex_model() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let h: Vec<Vec<Complex64>> = (0..3).map(|_| (0..2).map(|_| complex_gaussian(&mut rng, 1.0)).collect()).collect();
            let x: Vec<Complex64> = (0..2).map(|_| complex_gaussian(&mut rng, 1.0)).collect();
            let w: Vec<Complex64> = (0..3).map(|_| complex_gaussian(&mut rng, 0.1)).collect();
            let yc: Vec<Complex64> = h
                .iter()
                .zip(&w)
                .map(|(row, wi)| row.iter().zip(&x).map(|(a, b)| a * b).sum::<Complex64>() + wi)
                .collect();
            let xr: Vec<f64> = x.iter().map(|c| c.re).chain(x.iter().map(|c| c.im)).collect();
            let b = complex_to_real(&h);
            let yr = b.combine(&xr);
            for i in 0..3 {
                assert!((yr[i] + w[i].re - yc[i].re).abs() < 1e-12);
                assert!((yr[3 + i] + w[i].im - yc[i].im).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn correlation_examples() {
        assert_eq!(correlation_matrix(2, 0.3), vec![vec![1.0, 0.3], vec![0.3, 1.0]]);
        let id = correlation_matrix(3, 0.0);
        assert_eq!(id, vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]);
    }

    #[test]
    fn channel_entry_statistics() {
        let mut cfg = config(Detector::Sic, Reducer::None);
        cfg.n_r = 10;
        cfg.n_t = 10;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut entries = Vec::new();
        for _ in 0..1000 {
            let ch = generate_channel(&cfg, 10.0, &mut rng);
            entries.extend(ch.complex_channel.into_iter().flatten());
        }
        let n = entries.len() as f64;
        let mean: Complex64 = entries.iter().sum::<Complex64>() / n;
        let var = entries.iter().map(|c| c.norm_sqr()).sum::<f64>() / n;
        // 3 sigma bands: mean of re part has sd sqrt(0.5 / n)
        assert!(mean.norm() < 3.0 * (1.0 / n).sqrt());
        // |h|^2 ~ Exp(1): sd 1 / sqrt(n)
        assert!((var - 1.0).abs() < 3.0 / n.sqrt());
    }

    #[test]
    fn gray_labels_differ_in_one_bit() {
        let c = Constellation::new(64);
        assert_eq!((c.levels, c.bits_per_dim), (8, 3));
        for i in 0..7 {
            assert_eq!((Constellation::gray(i) ^ Constellation::gray(i + 1)).count_ones(), 1);
        }
        assert_eq!(Constellation::new(16).symbol_energy(), 10.0);
        assert_eq!(Constellation::new(4).symbol_energy(), 2.0);
    }

    #[test]
    fn shift_maps_to_consecutive_integers() {
        let c = Constellation::new(16);
        let shifted: Vec<i64> = (0..4).map(|i| c.shifted(i)).collect();
        assert_eq!(shifted, vec![-1, 0, 1, 2]);
        for i in 0..4 {
            assert_eq!((c.amplitude(i) + 1.0) / 2.0, c.shifted(i) as f64);
            assert_eq!(c.index_of_shifted(c.shifted(i)), i);
        }
        assert_eq!(c.index_of_shifted(-7), 0);
        assert_eq!(c.index_of_shifted(9), 3);
    }

    #[test]
    fn noiseless_identity_channel_recovers_symbols() {
        for detector in [Detector::Zf, Detector::Sic] {
            let cfg = MimoConfig {
                n_t: 2,
                n_r: 2,
                ..config(detector, Reducer::None)
            };
            let c = cfg.constellation();
            let b = Basis::identity(4);
            let u = UnimodularTransform::identity(4);
            for sent in [[0usize, 1, 2, 3], [3, 3, 0, 0]] {
                let y: Vec<f64> = sent.iter().map(|&i| c.amplitude(i)).collect();
                assert_eq!(lr_aided_detect(&y, &b, &u, &cfg).unwrap(), sent.to_vec());
            }
        }
    }

    #[test]
    fn noiseless_random_channel_recovers_symbols_with_reduction() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for reducer in [Reducer::None, Reducer::Lll, Reducer::SrPair, Reducer::Seysen] {
            for detector in [Detector::Zf, Detector::Sic] {
                let cfg = config(detector, reducer);
                let c = cfg.constellation();
                for _ in 0..10 {
                    let ch = generate_channel(&cfg, 30.0, &mut rng);
                    let sent: Vec<usize> = (0..8).map(|_| rng.random_range(0..4)).collect();
                    let x: Vec<f64> = sent.iter().map(|&i| c.amplitude(i)).collect();
                    let y = ch.real_basis.combine(&x);
                    let (_, v, _) = reducer.reduce(&dual_basis(&ch.real_basis).unwrap(), 0).unwrap();
                    let u = v.inverse_transpose();
                    let reduced = ch.real_basis.mul_transform(&u);
                    assert_eq!(lr_aided_detect(&y, &reduced, &u, &cfg).unwrap(), sent);
                }
            }
        }
    }

    #[test]
    fn shifted_observation_matches_shifted_symbols() {
        let b = Basis::from_columns(vec![vec![1.0, 0.5], vec![0.2, 2.0]]).unwrap();
        let c = Constellation::new(16);
        let sent = [0usize, 3];
        let x: Vec<f64> = sent.iter().map(|&i| c.amplitude(i)).collect();
        let xs: Vec<f64> = sent.iter().map(|&i| c.shifted(i) as f64).collect();
        let y = shifted_observation(&b.combine(&x), &b);
        let expect = b.combine(&xs);
        for (a, e) in y.iter().zip(&expect) {
            assert!((a - e).abs() < 1e-12);
        }
    }

    #[test]
    fn mmse_extension_shape() {
        let mut cfg = config(Detector::Sic, Reducer::None);
        cfg.mmse = true;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ch = generate_channel(&cfg, 10.0, &mut rng);
        let ext = detection_basis(&ch, &cfg);
        assert_eq!((ext.dim(), ext.rank()), (2 * 4 + 2 * 4, 8));
        assert!(gram_schmidt(&ext).is_ok());
        let ratio = (cfg.noise_variance(10.0) / cfg.constellation().symbol_energy()).sqrt();
        assert!((ext.get(8, 0) - ratio).abs() < 1e-12);
    }

    #[test]
    fn snr_definition() {
        let cfg = config(Detector::Sic, Reducer::None);
        // n_t sigma_s^2 / sigma_w^2 = 10^(snr/10)
        let sw2 = cfg.noise_variance(20.0);
        assert!((4.0 * 10.0 / sw2 - 100.0).abs() < 1e-9);
    }

    #[test]
    fn pe_bound_examples() {
        assert!(pe_bound(&[1.0, 1.0], 1e-6) < 1e-12);
        let v = pe_bound(&[1.0], 1.0 / (2.0 * std::f64::consts::SQRT_2));
        assert!((v - (1.0 - libm::erf(1.0))).abs() < 1e-15);
        assert!((v - 0.157299).abs() < 1e-6);
        assert!(pe_bound(&[1.0, 2.0], 0.3) > pe_bound(&[1.0, 1.5], 0.3));
        assert!(pe_bound(&[1.0, 2.0], 0.4) > pe_bound(&[1.0, 2.0], 0.3));
    }

    #[test]
    fn pe_bound_shrinks_under_reduction() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cfg = config(Detector::Sic, Reducer::SrPair);
        for _ in 0..50 {
            let ch = generate_channel(&cfg, 20.0, &mut rng);
            let dual = dual_basis(&ch.real_basis).unwrap();
            let (red, _, _) = sr_reduce(&dual, &SrConfig::new(Subroutine::Pair)).unwrap();
            let before = dual.column_norms();
            let after = red.column_norms();
            let max = |v: &[f64]| v.iter().cloned().fold(0.0, f64::max);
            if max(&after) <= max(&before) {
                let mut sorted_b = before.clone();
                let mut sorted_a = after.clone();
                sorted_b.sort_by(f64::total_cmp);
                sorted_a.sort_by(f64::total_cmp);
                if sorted_a.iter().zip(&sorted_b).all(|(a, b)| a <= b) {
                    assert!(pe_bound(&after, ch.noise_sigma) <= pe_bound(&before, ch.noise_sigma) + 1e-15);
                }
            }
        }
    }

    #[test]
    fn config_json_round_trip() {
        let text = r#"{"n_t": 8, "n_r": 8, "qam_order": 16, "snr_db": 20, "mmse": true,
            "detector": "sic", "reducer": {"sr-hash": {"k": 3, "t": 4, "seed": 9}}, "trials": 10, "seed": 5}"#;
        let cfg: MimoConfig = serde_json::from_str(text).unwrap();
        assert_eq!(cfg.reducer, Reducer::SrHash(Some(LshParams { k: 3, t: 4, seed: 9 })));
        assert_eq!(cfg.correlation_rho, 0.0);
        let back: MimoConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
        let plain: MimoConfig = serde_json::from_str(&text.replace(r#"{"sr-hash": {"k": 3, "t": 4, "seed": 9}}"#, r#""lll""#)).unwrap();
        assert_eq!(plain.reducer, Reducer::Lll);
        assert!(serde_json::from_str::<MimoConfig>(&text.replace("\"sic\"", "\"ml\"")).is_err());
        let short: MimoConfig = serde_json::from_str(&text.replace(r#""trials": 10, "#, "")).unwrap();
        assert_eq!(short.trials, DEFAULT_TRIALS);
    }

    #[test]
    fn validation() {
        let mut cfg = config(Detector::Sic, Reducer::None);
        cfg.trials = 0;
        assert!(run_ber_sweep(&cfg, &[10.0]).is_err());
        let mut cfg = config(Detector::Sic, Reducer::None);
        cfg.qam_order = 8;
        assert!(cfg.validate().is_err());
        cfg.qam_order = 16;
        cfg.correlation_rho = 1.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn sweep_is_deterministic_and_unimodular() {
        let mut cfg = config(Detector::Sic, Reducer::SrHash(None));
        cfg.trials = 30;
        cfg.mmse = true;
        let a = run_ber_sweep(&cfg, &[15.0, 25.0]).unwrap();
        let b = run_ber_sweep(&cfg, &[15.0, 25.0]).unwrap();
        assert_eq!(a, b);
        for t in 0..10 {
            let o = run_trial(&cfg, 15.0, 0, t).unwrap();
            assert!(o.transform.is_unimodular());
            assert!(o.reconstruction_error < 1e-9);
            let again = run_trial(&cfg, 15.0, 0, t).unwrap();
            assert_eq!(o.detection, again.detection);
        }
    }

    #[test]
    fn reduction_helps_sic_at_high_snr() {
        let base = MimoConfig {
            trials: 2000,
            ..config(Detector::Sic, Reducer::None)
        };
        let plain = run_ber_sweep(&base, &[30.0]).unwrap()[0].ser;
        let pair = run_ber_sweep(&MimoConfig { reducer: Reducer::SrPair, ..base.clone() }, &[30.0]).unwrap()[0].ser;
        assert!(pair < plain, "sr-pair {pair} vs plain {plain}");
    }
}
