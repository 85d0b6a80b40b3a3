//! Experiment drivers behind the `srlat` command line: the two
//! counter-example bases, orthogonality-defect sweeps, pairwise-angle
//! histograms, the SR-CVP bound check and BER/complexity sweeps. Every
//! driver returns plain rows; [`write_csv`] renders them with a metadata
//! header.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_3};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{lll_reduce, seysen_reduce, LllConfig};
use crate::error::{LatticeError, Result};
use crate::linalg::{log_orthogonality_defect, pairwise_angles, Basis, UnimodularTransform};
use crate::lsh::{sr_hash_reduce, LshParams};
use crate::mimo::{run_ber_sweep, MimoConfig, Reducer, SweepRow};
use crate::random::{stream_rng, BasisKind};
use crate::report::ReductionReport;
use crate::sr::{check_srcvp_bounds, greedy_reduce, sr_cvp_heuristic, sr_reduce, SrConfig, Subroutine};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Lll,
    Seysen,
    SrPair,
    SrHash,
    SrCvp,
    Greedy,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::Lll,
        Algorithm::Seysen,
        Algorithm::SrPair,
        Algorithm::SrHash,
        Algorithm::SrCvp,
        Algorithm::Greedy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Lll => "lll",
            Algorithm::Seysen => "seysen",
            Algorithm::SrPair => "sr-pair",
            Algorithm::SrHash => "sr-hash",
            Algorithm::SrCvp => "sr-cvp",
            Algorithm::Greedy => "greedy",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = LatticeError;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| LatticeError::InvalidParameter(format!("unknown algorithm `{s}`")))
    }
}

/// Knobs shared by every algorithm; each one reads what applies to it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlgorithmParams {
    pub tau: f64,
    /// LSH bits per key; defaults to `round(log2 n)`.
    pub k: Option<usize>,
    /// LSH tables; defaults to `round(n^0.585)`.
    pub t: Option<usize>,
    pub seed: u64,
    pub delta: f64,
}

impl Default for AlgorithmParams {
    fn default() -> Self {
        AlgorithmParams {
            tau: 1.0,
            k: None,
            t: None,
            seed: 0,
            delta: LllConfig::default().delta,
        }
    }
}

impl AlgorithmParams {
    pub fn lsh(&self, n: usize) -> LshParams {
        let d = LshParams::defaults_for(n, self.seed);
        LshParams {
            k: self.k.unwrap_or(d.k),
            t: self.t.unwrap_or(d.t),
            seed: self.seed,
        }
    }
}

/// Runs one reducer.
pub fn reduce(basis: &Basis, algorithm: Algorithm, params: &AlgorithmParams) -> Result<(Basis, UnimodularTransform, ReductionReport)> {
    match algorithm {
        Algorithm::Lll => lll_reduce(basis, &LllConfig { delta: params.delta }),
        Algorithm::Seysen => seysen_reduce(basis),
        Algorithm::SrPair => sr_reduce(basis, &SrConfig::new(Subroutine::Pair).with_tau(params.tau)),
        Algorithm::SrHash => sr_hash_reduce(basis, params.tau, &params.lsh(basis.rank())),
        Algorithm::SrCvp => sr_cvp_heuristic(basis, params.tau),
        Algorithm::Greedy => greedy_reduce(basis, params.tau),
    }
}

/// The 5x5 basis on which greedy reduction stalls: `2 I_4` next to
/// `(1, 1, 1, 1, eps)`. Its shortest vector is `(0, 0, 0, 0, 2 eps)`.
pub fn greedy_counterexample(eps: f64) -> Basis {
    let mut columns: Vec<Vec<f64>> = (0..4)
        .map(|i| (0..5).map(|r| if r == i { 2.0 } else { 0.0 }).collect())
        .collect();
    columns.push(vec![1.0, 1.0, 1.0, 1.0, eps]);
    Basis::from_columns(columns).expect("finite entries")
}

/// The 3x3 basis SR-Pair cannot reduce: unit columns at polar angle `phi`
/// and azimuth `+-pi/3`, plus `e_1`. Pairwise rounding coefficients are all
/// zero while the orthogonality defect grows without bound as
/// `phi -> pi/2`.
pub fn pair_counterexample(phi: f64) -> Basis {
    let (s, c) = phi.sin_cos();
    let (s3, c3) = FRAC_PI_3.sin_cos();
    Basis::from_columns(vec![
        vec![s * c3, s * s3, c],
        vec![-s * c3, s * s3, -c],
        vec![1.0, 0.0, 0.0],
    ])
    .expect("finite entries")
}

/// `sqrt(4 cos^2 phi + sin^2 phi - 2 sin phi + 1) / (sqrt 3 sin phi cos phi)`,
/// the orthogonality defect SR-CVP reaches on [`pair_counterexample`].
pub fn pair_counterexample_reduced_od(phi: f64) -> f64 {
    let (s, c) = phi.sin_cos();
    (4.0 * c * c + s * s - 2.0 * s + 1.0).sqrt() / (3f64.sqrt() * s * c)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GreedyCase {
    pub eps: f64,
    pub greedy_unchanged: bool,
    pub greedy_min_norm: f64,
    pub sr_cvp_min_norm: f64,
    pub shortest_norm: f64,
    pub greedy_report: ReductionReport,
    pub sr_cvp_report: ReductionReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairCase {
    pub phi: f64,
    pub nu: f64,
    pub input_od: f64,
    pub sr_pair_unchanged: bool,
    pub sr_pair_od: f64,
    pub sr_cvp_od: f64,
    pub expected_sr_cvp_od: f64,
    pub sr_pair_report: ReductionReport,
    pub sr_cvp_report: ReductionReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CounterexampleReport {
    pub greedy: GreedyCase,
    pub pair: PairCase,
}

fn min_norm(b: &Basis) -> f64 {
    b.column_norms().into_iter().fold(f64::INFINITY, f64::min)
}

fn od(b: &Basis) -> Result<f64> {
    Ok(log_orthogonality_defect(b)?.exp())
}

/// Builds both counter-examples and runs the reducers that separate them.
pub fn counterexamples(eps: f64, phi: f64) -> Result<CounterexampleReport> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(LatticeError::InvalidParameter(format!("eps must lie in (0, 1), got {eps}")));
    }
    if !(phi > 0.0 && phi < FRAC_PI_2) {
        return Err(LatticeError::InvalidParameter(format!("phi must lie in (0, pi/2), got {phi}")));
    }
    let g = greedy_counterexample(eps);
    let (g_out, _, g_report) = greedy_reduce(&g, 1.0)?;
    let (c_out, _, c_report) = sr_cvp_heuristic(&g, 1.0)?;
    let shortest = crate::cvp::shortest_vector(&g)?;
    let greedy = GreedyCase {
        eps,
        greedy_unchanged: g_out == g,
        greedy_min_norm: min_norm(&g_out),
        sr_cvp_min_norm: min_norm(&c_out),
        shortest_norm: shortest.residual_norm_sq.sqrt(),
        greedy_report: g_report,
        sr_cvp_report: c_report,
    };

    let a = pair_counterexample(phi);
    let (p_out, _, p_report) = sr_reduce(&a, &SrConfig::new(Subroutine::Pair))?;
    let (c_out, _, c_report) = sr_cvp_heuristic(&a, 1.0)?;
    let pair = PairCase {
        phi,
        nu: FRAC_PI_2 - phi,
        input_od: od(&a)?,
        sr_pair_unchanged: p_out == a,
        sr_pair_od: od(&p_out)?,
        sr_cvp_od: od(&c_out)?,
        expected_sr_cvp_od: pair_counterexample_reduced_od(phi),
        sr_pair_report: p_report,
        sr_cvp_report: c_report,
    };
    Ok(CounterexampleReport { greedy, pair })
}

/// Independent stream for trial `trial` at dimension `dim`.
fn trial_stream(dim: usize, trial: usize) -> u64 {
    ((dim as u64) << 32) | trial as u64
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OdRow {
    pub dim: usize,
    pub algorithm: String,
    pub basis: String,
    /// `None` when the mean overflows `f64`.
    pub mean_od: Option<f64>,
    pub mean_log_od: f64,
    pub mean_input_log_od: f64,
    pub mean_comparisons: f64,
    pub trials: usize,
    pub status: String,
}

/// Mean orthogonality defect per `(dimension, algorithm)` over Gaussian
/// bases. Trial `t` at dimension `n` draws the same basis for every
/// algorithm. Failures (e.g. SR-CVP above the enumeration cap) become a row
/// whose `status` carries the error.
pub fn od_sweep(
    dims: &[usize],
    trials: usize,
    algorithms: &[Algorithm],
    kind: BasisKind,
    seed: u64,
    params: &AlgorithmParams,
) -> Result<Vec<OdRow>> {
    if trials == 0 {
        return Err(LatticeError::InvalidParameter("trials must be at least 1".into()));
    }
    if let Some(&n) = dims.iter().find(|&&n| n < 2) {
        return Err(LatticeError::InvalidParameter(format!("dimensions must be at least 2, got {n}")));
    }
    let mut rows = Vec::new();
    for &n in dims {
        let bases: Vec<Basis> = (0..trials)
            .map(|t| kind.sample(n, &mut stream_rng(seed, trial_stream(n, t))))
            .collect();
        for &algorithm in algorithms {
            let runs: Result<Vec<(f64, f64, u64)>> = bases
                .par_iter()
                .enumerate()
                .map(|(t, b)| {
                    let p = AlgorithmParams {
                        seed: params.seed.wrapping_add(t as u64),
                        ..*params
                    };
                    let (_, _, r) = reduce(b, algorithm, &p)?;
                    Ok((r.log_od_after, r.log_od_before, r.vector_comparisons))
                })
                .collect();
            let row = match runs {
                Ok(runs) => {
                    let tf = trials as f64;
                    let mean_od = runs.iter().map(|r| r.0.exp()).sum::<f64>() / tf;
                    OdRow {
                        dim: n,
                        algorithm: algorithm.name().into(),
                        basis: kind.name().into(),
                        mean_od: mean_od.is_finite().then_some(mean_od),
                        mean_log_od: runs.iter().map(|r| r.0).sum::<f64>() / tf,
                        mean_input_log_od: runs.iter().map(|r| r.1).sum::<f64>() / tf,
                        mean_comparisons: runs.iter().map(|r| r.2 as f64).sum::<f64>() / tf,
                        trials,
                        status: "ok".into(),
                    }
                }
                Err(e) => OdRow {
                    dim: n,
                    algorithm: algorithm.name().into(),
                    basis: kind.name().into(),
                    mean_od: None,
                    mean_log_od: f64::NAN,
                    mean_input_log_od: f64::NAN,
                    mean_comparisons: f64::NAN,
                    trials,
                    status: format!("error: {e}"),
                },
            };
            rows.push(row);
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistogramRow {
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub count: u64,
    pub fraction: f64,
}

/// Pooled histogram of pairwise angles (in `[0, pi/2]`) over `trials`
/// Gaussian bases.
pub fn angle_histogram(n: usize, trials: usize, kind: BasisKind, bins: usize, seed: u64) -> Result<Vec<HistogramRow>> {
    if n < 2 || bins == 0 || trials == 0 {
        return Err(LatticeError::InvalidParameter(
            "angle histogram needs n >= 2, bins >= 1 and trials >= 1".into(),
        ));
    }
    let mut angles = Vec::new();
    for t in 0..trials {
        let b = kind.sample(n, &mut stream_rng(seed, trial_stream(n, t)));
        angles.extend(upper_triangle(&pairwise_angles(&b)?));
    }
    Ok(histogram(&angles, bins))
}

pub(crate) fn upper_triangle(m: &[Vec<f64>]) -> Vec<f64> {
    m.iter()
        .enumerate()
        .flat_map(|(i, row)| row[i + 1..].iter().copied())
        .collect()
}

/// Histogram of angles over `[0, pi/2]`; `pi/2` itself lands in the last
/// bin.
pub fn histogram(angles: &[f64], bins: usize) -> Vec<HistogramRow> {
    let width = FRAC_PI_2 / bins as f64;
    let mut counts = vec![0u64; bins];
    for &a in angles {
        let k = ((a / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    let total = angles.len().max(1) as f64;
    counts
        .into_iter()
        .enumerate()
        .map(|(k, count)| HistogramRow {
            bin_lo: k as f64 * width,
            bin_hi: (k + 1) as f64 * width,
            count,
            fraction: count as f64 / total,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsRow {
    pub dim: usize,
    pub tau: f64,
    pub trials: usize,
    pub length_violations: usize,
    pub od_violations: usize,
    pub angle_violations: usize,
    pub unimodular_violations: usize,
}

impl BoundsRow {
    pub fn violations(&self) -> usize {
        self.length_violations + self.od_violations + self.angle_violations + self.unimodular_violations
    }
}

/// Runs the longest-first SR-CVP on Gaussian bases and checks the length,
/// orthogonality-defect and angle bounds against enumerated successive
/// minima. Dimensions outside `n < 4 tau + 1` are refused up front.
pub fn bounds_check(dims: &[usize], trials: usize, tau: f64, seed: u64) -> Result<Vec<BoundsRow>> {
    crate::sr::validate_tau(tau)?;
    if let Some(&n) = dims.iter().find(|&&n| n < 2 || (n as f64) >= 4.0 * tau + 1.0) {
        return Err(LatticeError::InvalidParameter(format!(
            "the SR-CVP bounds hold only for 2 <= n < 4*tau + 1 (n <= 4 at tau = 1); got n = {n}"
        )));
    }
    dims.iter()
        .map(|&n| {
            let checks: Vec<(bool, bool, bool, bool)> = (0..trials)
                .into_par_iter()
                .map(|t| {
                    let b = BasisKind::Primal.sample(n, &mut stream_rng(seed, trial_stream(n, t)));
                    let (out, u, _) = sr_cvp_heuristic(&b, tau)?;
                    let r = check_srcvp_bounds(&out, tau)?;
                    let unimodular =
                        u.is_unimodular() && crate::linalg::reconstruction_error(&b, &u, &out) < 1e-9;
                    Ok((r.length_ok, r.od_ok, r.angle_ok, unimodular))
                })
                .collect::<Result<_>>()?;
            let count = |f: fn(&(bool, bool, bool, bool)) -> bool| checks.iter().filter(|c| !f(c)).count();
            Ok(BoundsRow {
                dim: n,
                tau,
                trials,
                length_violations: count(|c| c.0),
                od_violations: count(|c| c.1),
                angle_violations: count(|c| c.2),
                unimodular_violations: count(|c| c.3),
            })
        })
        .collect()
}

/// A BER or complexity sweep: one [`MimoConfig`] plus the SNR points and
/// the reducers to compare. Missing lists fall back to the config's own
/// `snr_db` and `reducer`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    #[serde(flatten)]
    pub config: MimoConfig,
    #[serde(default)]
    pub snr_points: Vec<f64>,
    #[serde(default)]
    pub reducers: Vec<Reducer>,
}

impl SweepSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| LatticeError::Parse(format!("sweep config: {e}")))
    }

    pub fn run(&self) -> Result<Vec<SweepRow>> {
        let snr = if self.snr_points.is_empty() {
            vec![self.config.snr_db]
        } else {
            self.snr_points.clone()
        };
        let reducers = if self.reducers.is_empty() {
            vec![self.config.reducer]
        } else {
            self.reducers.clone()
        };
        let mut rows = Vec::new();
        for reducer in reducers {
            let cfg = MimoConfig {
                reducer,
                ..self.config.clone()
            };
            rows.extend(run_ber_sweep(&cfg, &snr)?);
        }
        Ok(rows)
    }
}

pub const BER_COLUMNS: [&str; 8] = [
    "snr_db",
    "detector",
    "reducer",
    "ber",
    "mean_comparisons",
    "mean_od",
    "trials",
    "seed",
];
pub const COMPLEXITY_COLUMNS: [&str; 7] = [
    "snr_db",
    "detector",
    "reducer",
    "mean_comparisons",
    "mean_od",
    "trials",
    "seed",
];

/// Values of `row` for `columns`, formatted for CSV.
pub fn sweep_fields(row: &SweepRow, columns: &[&str]) -> Vec<String> {
    columns
        .iter()
        .map(|&c| match c {
            "snr_db" => row.snr_db.to_string(),
            "detector" => row.detector.clone(),
            "reducer" => row.reducer.clone(),
            "ber" => format!("{:e}", row.ber),
            "ser" => format!("{:e}", row.ser),
            "mean_comparisons" => row.mean_comparisons.to_string(),
            "mean_od" => row.mean_od.to_string(),
            "trials" => row.trials.to_string(),
            "seed" => row.seed.to_string(),
            other => panic!("unknown sweep column {other}"),
        })
        .collect()
}

/// Metadata written as `#` lines above every CSV artifact.
#[derive(Debug, Clone, Serialize)]
pub struct Metadata {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub params: serde_json::Value,
}

impl Metadata {
    pub fn new(command: &str, seed: u64, params: serde_json::Value) -> Self {
        Metadata {
            command: command.into(),
            version: VERSION.into(),
            seed,
            params,
        }
    }
}

/// CSV text: metadata comment lines, a header row, then `rows`.
pub fn write_csv(meta: &Metadata, header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = format!(
        "# srlat {} {}\n# seed: {}\n# params: {}\n",
        meta.version, meta.command, meta.seed, meta.params
    );
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    out.push_str(&String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields"));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const PHI: f64 = FRAC_PI_2 - 1e-4;

    #[test]
    fn algorithm_names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
        assert!("bkz".parse::<Algorithm>().is_err());
    }

    #[test]
    fn identity_is_fixed_by_every_algorithm() {
        let id = Basis::identity(4);
        for a in Algorithm::ALL {
            let (b, u, _) = reduce(&id, a, &AlgorithmParams::default()).unwrap();
            assert_eq!(b, id, "{a}");
            assert!(u.is_identity());
        }
    }

    #[test]
    fn greedy_case_values() {
        let r = counterexamples(0.5, PHI).unwrap();
        assert!(r.greedy.greedy_unchanged);
        assert_eq!(r.greedy.greedy_min_norm, 2.0);
        assert!((r.greedy.sr_cvp_min_norm - 1.0).abs() < 1e-12);
        assert!((r.greedy.shortest_norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pair_case_values() {
        let r = counterexamples(0.5, PHI).unwrap();
        assert!(r.pair.sr_pair_unchanged);
        assert!((r.pair.sr_pair_od - r.pair.input_od).abs() < 1e-9 * r.pair.input_od);
        assert!((r.pair.sr_cvp_od - 1.1547).abs() < 1e-3, "{}", r.pair.sr_cvp_od);
        assert!((r.pair.expected_sr_cvp_od - 2.0 / 3f64.sqrt()).abs() < 1e-3);
        assert!(r.pair.input_od > 1e3);
    }

    #[test]
    fn pair_counterexample_geometry() {
        let a = pair_counterexample(PHI);
        for n in a.column_norms() {
            assert!((n - 1.0).abs() < 1e-15);
        }
        // |det| = sqrt 3 sin phi cos phi
        let od = od(&a).unwrap();
        assert!((od - 1.0 / (3f64.sqrt() * PHI.sin() * PHI.cos())).abs() < 1e-6 * od);
    }

    #[test]
    fn counterexample_parameters_checked() {
        assert!(counterexamples(1.5, PHI).is_err());
        assert!(counterexamples(0.5, 2.0).is_err());
    }

    #[test]
    fn od_sweep_marks_cap_errors() {
        let params = AlgorithmParams::default();
        let rows = od_sweep(&[3], 2, &[Algorithm::SrCvp, Algorithm::Greedy], BasisKind::Primal, 1, &params).unwrap();
        assert!(rows.iter().all(|r| r.status == "ok"));
        let rows = od_sweep(&[26], 1, &[Algorithm::SrCvp], BasisKind::Primal, 1, &params).unwrap();
        assert!(rows[0].status.starts_with("error"));
    }

    #[test]
    fn od_sweep_is_reproducible() {
        let params = AlgorithmParams::default();
        let a = od_sweep(&[6], 3, &[Algorithm::SrHash, Algorithm::Lll], BasisKind::Dual, 9, &params).unwrap();
        let b = od_sweep(&[6], 3, &[Algorithm::SrHash, Algorithm::Lll], BasisKind::Dual, 9, &params).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn identity_histogram_mass_at_right_angle() {
        let rows = histogram(&upper_triangle(&pairwise_angles(&Basis::identity(5)).unwrap()), 6);
        assert_eq!(rows[5].count, 10);
        assert_eq!(rows.iter().map(|r| r.count).sum::<u64>(), 10);
    }

    #[test]
    fn bounds_check_small_and_refusal() {
        let rows = bounds_check(&[2, 3], 10, 1.0, 4).unwrap();
        assert!(rows.iter().all(|r| r.violations() == 0));
        assert!(bounds_check(&[5], 1, 1.0, 0).is_err());
        assert!(bounds_check(&[3], 1, 0.5, 0).is_err());
    }

    #[test]
    fn sweep_spec_defaults() {
        let spec = SweepSpec::from_json(
            r#"{"n_t": 2, "n_r": 2, "qam_order": 4, "snr_db": 10, "detector": "zf",
                "reducer": "lll", "trials": 5, "seed": 1}"#,
        )
        .unwrap();
        let rows = spec.run().unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].reducer, "lll");
        assert!(SweepSpec::from_json("{").is_err());
    }

    #[test]
    fn csv_layout() {
        let meta = Metadata::new("ber-sweep", 7, serde_json::json!({"trials": 3}));
        let text = write_csv(&meta, &BER_COLUMNS, &[vec!["1".into(); 8]]);
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("# srlat"));
        assert_eq!(lines[1], "# seed: 7");
        assert_eq!(lines[3], "snr_db,detector,reducer,ber,mean_comparisons,mean_od,trials,seed");
        assert_eq!(lines.len(), 5);
    }
}
