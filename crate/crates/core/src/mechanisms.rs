//! Gaussian, Laplace and randomized-response primitives.

use rand::distr::Open01;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::rng::{label, stream};

/// An `(ε, δ)` privacy level with `ε > 0` and `0 ≤ δ ≤ 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrivacyParams {
    eps: f64,
    delta: f64,
}

impl PrivacyParams {
    pub fn new(eps: f64, delta: f64) -> Result<Self> {
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(param(format!("eps must be positive and finite, got {eps}")));
        }
        if !(0.0..=1.0).contains(&delta) {
            return Err(param(format!("delta must lie in [0, 1], got {delta}")));
        }
        Ok(PrivacyParams { eps, delta })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// `c = √ln(1/δ) / ε`; infinite when `δ = 0`.
    pub fn c(&self) -> f64 {
        (1.0 / self.delta).ln().sqrt() / self.eps
    }
}

/// Whether an estimator adds its calibrated noise.
///
/// `Noiseless` runs are for debugging only and are not private.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseMode {
    #[default]
    Private,
    Noiseless,
}

impl NoiseMode {
    pub fn is_private(self) -> bool {
        self == NoiseMode::Private
    }
}

/// Standard deviation of the Gaussian mechanism for ℓ2-sensitivity `delta2`:
/// `Δ₂·√(2 ln(1.25/δ))/ε`.
pub fn gaussian_sigma(delta2: f64, params: PrivacyParams) -> Result<f64> {
    if !(delta2 >= 0.0) || !delta2.is_finite() {
        return Err(param(format!("sensitivity must be finite and nonnegative, got {delta2}")));
    }
    let delta = params.delta();
    if delta <= 0.0 {
        return Err(Error::Calibration(
            "the Gaussian mechanism needs delta > 0".into(),
        ));
    }
    if delta >= 1.0 {
        return Err(Error::Calibration(format!(
            "the Gaussian mechanism needs delta < 1, got {delta}"
        )));
    }
    Ok(delta2 * (2.0 * (1.25 / delta).ln()).sqrt() / params.eps())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    Gaussian,
    Laplace,
}

/// A noise distribution: Gaussian with standard deviation `scale`, or
/// Laplace with scale parameter `scale`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    kind: NoiseKind,
    scale: f64,
}

impl NoiseSpec {
    pub fn new(kind: NoiseKind, scale: f64) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(param(format!("noise scale must be positive, got {scale}")));
        }
        Ok(NoiseSpec { kind, scale })
    }

    pub fn kind(&self) -> NoiseKind {
        self.kind
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Draws one sample.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.kind {
            NoiseKind::Gaussian => self.scale * rng.sample::<f64, _>(StandardNormal),
            NoiseKind::Laplace => laplace(rng, self.scale),
        }
    }
}

/// One draw from `Lap(b)` by inverting the CDF.
pub fn laplace<R: Rng + ?Sized>(rng: &mut R, b: f64) -> f64 {
    let u: f64 = rng.sample::<f64, _>(Open01) - 0.5;
    -b * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

/// `count` i.i.d. samples from `spec`.
pub fn sample_noise(spec: NoiseSpec, count: usize, seed: u64) -> Vec<f64> {
    let mut rng = stream(seed, &[label::SAMPLE]);
    (0..count).map(|_| spec.sample(&mut rng)).collect()
}

/// Probability that randomized response keeps its input bit.
pub fn rr_keep_probability(eps: f64) -> f64 {
    1.0 / (1.0 + (-eps).exp())
}

/// Randomized response drawing from `rng`.
pub fn randomized_response_with<R: Rng + ?Sized>(rng: &mut R, b: bool, eps: f64) -> bool {
    if rng.random::<f64>() < rr_keep_probability(eps) {
        b
    } else {
        !b
    }
}

/// Keeps `b` with probability `e^ε/(e^ε + 1)` and flips it otherwise.
pub fn randomized_response(b: bool, eps: f64, seed: u64) -> bool {
    randomized_response_with(&mut stream(seed, &[label::FLIP]), b, eps)
}

/// Output distribution of leaky randomized response on input `b`, over the
/// outcomes `{0, 1, 2, 3}`. Outcomes 2 and 3 reveal the input and carry
/// probability `δ`.
pub fn leaky_rr_pmf(b: bool, eps: f64, delta: f64) -> Result<[f64; 4]> {
    if !(eps >= 0.0) {
        return Err(param(format!("eps must be nonnegative, got {eps}")));
    }
    if !(0.0..=1.0).contains(&delta) {
        return Err(param(format!("delta must lie in [0, 1], got {delta}")));
    }
    let alpha = 1.0 - delta;
    let keep = rr_keep_probability(eps);
    let flip = rr_keep_probability(-eps);
    Ok(if b {
        [alpha * flip, alpha * keep, 0.0, delta]
    } else {
        [alpha * keep, alpha * flip, delta, 0.0]
    })
}
