//! Seeded random instances used by experiments and tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{dual_basis, Basis};

/// Independent RNG for one (experiment, index) pair. Streams derived from
/// the same master seed never overlap, so trials can run in any order.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `m x n` basis with i.i.d. `N(0, 1)` entries. Resamples in the
/// probability-zero event of a rank-deficient draw.
pub fn gaussian_basis<R: Rng + ?Sized>(m: usize, n: usize, rng: &mut R) -> Basis {
    loop {
        let columns = (0..n)
            .map(|_| (0..m).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
            .collect();
        let basis = Basis::from_columns(columns).expect("finite gaussian entries");
        if crate::linalg::gram_schmidt(&basis).is_ok() {
            return basis;
        }
    }
}

/// Dual of a square Gaussian basis.
pub fn dual_gaussian_basis<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Basis {
    loop {
        let b = gaussian_basis(n, n, rng);
        if let Ok(d) = dual_basis(&b) {
            return d;
        }
    }
}

/// Which side of a Gaussian basis an experiment reduces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisKind {
    Primal,
    Dual,
}

impl BasisKind {
    pub fn sample<R: Rng + ?Sized>(self, n: usize, rng: &mut R) -> Basis {
        match self {
            BasisKind::Primal => gaussian_basis(n, n, rng),
            BasisKind::Dual => dual_gaussian_basis(n, rng),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BasisKind::Primal => "primal",
            BasisKind::Dual => "dual",
        }
    }
}

impl std::str::FromStr for BasisKind {
    type Err = crate::LatticeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "primal" => Ok(BasisKind::Primal),
            "dual" => Ok(BasisKind::Dual),
            other => Err(crate::LatticeError::InvalidParameter(format!(
                "basis kind must be `primal` or `dual`, got `{other}`"
            ))),
        }
    }
}
