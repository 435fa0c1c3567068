//! Edge counts, Erdős–Rényi parameters, clique sizes, and the
//! Laplace/randomized-response baselines.
//!
//! Every estimator takes a [`NoiseMode`]; `NoiseMode::Noiseless` skips all
//! noise and is for debugging only.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::blur::nu;
use crate::error::{param, Result};
use crate::graph::Graph;
use crate::linquery::{anslin, sigma_coord, Matrix};
use crate::mechanisms::{gaussian_sigma, laplace, NoiseMode, PrivacyParams};
use crate::rng::{label, stream};

/// The ramp `st_{ℓ,u}`: 0 below `ℓ`, 1 above `u`, linear in between.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SoftThreshold {
    lower: f64,
    upper: f64,
}

impl SoftThreshold {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower < upper) || !lower.is_finite() || !upper.is_finite() {
            return Err(param(format!(
                "soft threshold needs finite lower < upper, got ({lower}, {upper})"
            )));
        }
        Ok(SoftThreshold { lower, upper })
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn value(&self, d: f64) -> f64 {
        ((d - self.lower) / (self.upper - self.lower)).clamp(0.0, 1.0)
    }
}

/// Free-function form of [`SoftThreshold::value`].
pub fn soft_threshold_value(d: f64, spec: SoftThreshold) -> f64 {
    spec.value(d)
}

/// Noise standard deviation of [`est_soft_threshold`] on `n` nodes.
pub fn soft_threshold_sigma(n: usize, spec: SoftThreshold, params: PrivacyParams) -> Result<f64> {
    let width = spec.upper - spec.lower;
    gaussian_sigma((1.0 + n as f64 / (width * width)).sqrt(), params)
}

/// `Σ_i (st(d_i) + Z_i)`, an unbiased estimate of `Σ_i st(d_i)`.
pub fn est_soft_threshold(
    g: &Graph,
    spec: SoftThreshold,
    params: PrivacyParams,
    seed: u64,
    mode: NoiseMode,
) -> Result<f64> {
    let sigma = soft_threshold_sigma(g.n(), spec, params)?;
    let mut total = 0.0;
    for i in 0..g.n() {
        total += spec.value(g.degree(i) as f64);
        if mode.is_private() {
            let mut rng = stream(seed, &[label::NOISE, i as u64]);
            total += sigma * rng.sample::<f64, _>(StandardNormal);
        }
    }
    Ok(total)
}

/// Edge count estimate `y·u/2` with `u = max(D, √n)`, exact without noise
/// on graphs whose degrees are all at most `u`.
pub fn est_edges(
    g: &Graph,
    degree_bound: usize,
    params: PrivacyParams,
    seed: u64,
    mode: NoiseMode,
) -> Result<f64> {
    if degree_bound == 0 {
        return Err(param("degree bound D must be at least 1"));
    }
    let u = (degree_bound as f64).max((g.n() as f64).sqrt());
    let y = est_soft_threshold(g, SoftThreshold::new(0.0, u)?, params, seed, mode)?;
    Ok(y * u / 2.0)
}

/// Output of [`conc_deg`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConcDegResult {
    /// Left end `s(ĵ − 2)` of the window.
    pub x_hat: f64,
    /// Mass-weighted offset `Σ_{i=1..4} i·s·v̂_{ĵ−2+i}`.
    pub v_hat: f64,
    /// Selected index `ĵ`.
    pub j_hat: usize,
}

/// Selection threshold `σ_coord·√(2 ln(40ν))`.
pub fn conc_deg_threshold(n: usize, s: usize, params: PrivacyParams) -> Result<f64> {
    Ok(sigma_coord(n, s, params)? * (2.0 * (40.0 * nu(n, s) as f64).ln()).sqrt())
}

fn ceil_sqrt(n: usize) -> usize {
    let mut r = (n as f64).sqrt() as usize;
    while r * r < n {
        r += 1;
    }
    while r > 0 && (r - 1) * (r - 1) >= n {
        r -= 1;
    }
    r
}

/// Average-degree statistics for graphs whose nonzero degrees sit in a
/// window of width about `s`.
///
/// `ĵ` is the largest entry of `v̂_1..v̂_{ν−1}` (lowest index on ties), kept
/// only if it is positive and at least the threshold; otherwise `ĵ = 0`.
/// Without noise the threshold is zero.
pub fn conc_deg(
    g: &Graph,
    params: PrivacyParams,
    s: usize,
    seed: u64,
    mode: NoiseMode,
) -> Result<ConcDegResult> {
    let n = g.n();
    if s < ceil_sqrt(n) {
        return Err(param(format!("width s = {s} must be at least ⌈√n⌉ = {}", ceil_sqrt(n))));
    }
    let k = nu(n, s);
    let v = anslin(g, &Matrix::identity(k), params, s, seed, mode)?;
    let theta = match mode {
        NoiseMode::Private => conc_deg_threshold(n, s, params)?,
        NoiseMode::Noiseless => 0.0,
    };
    let mut j_nz = 1;
    for j in 2..k {
        if v[j] > v[j_nz] {
            j_nz = j;
        }
    }
    let j_hat = if v[j_nz] > 0.0 && v[j_nz] >= theta { j_nz } else { 0 };
    let at = |j: isize| -> f64 {
        if j < 0 || j as usize >= k {
            0.0
        } else {
            v[j as usize]
        }
    };
    let sf = s as f64;
    let v_hat = (1..=4)
        .map(|i| i as f64 * sf * at(j_hat as isize - 2 + i))
        .sum();
    Ok(ConcDegResult {
        x_hat: sf * (j_hat as f64 - 2.0),
        v_hat,
        j_hat,
    })
}

/// Width `⌈2√(3n ln(10n))⌉` used by [`est_er_p`].
pub fn er_width(n: usize) -> usize {
    let n = n as f64;
    (2.0 * (3.0 * n * (10.0 * n).ln()).sqrt()).ceil() as usize
}

/// Estimate of `p` for `G ~ G(n, p)`: `(x̂ + v̂)/n`.
pub fn est_er_p(g: &Graph, params: PrivacyParams, seed: u64, mode: NoiseMode) -> Result<f64> {
    let n = g.n();
    let s = er_width(n).max(ceil_sqrt(n));
    let r = conc_deg(g, params, s, seed, mode)?;
    Ok((r.x_hat + r.v_hat) / n as f64)
}

/// Estimate of the size of the clique in a clique-plus-isolated graph.
pub fn est_clique(g: &Graph, params: PrivacyParams, seed: u64, mode: NoiseMode) -> Result<f64> {
    let n = g.n();
    let r = conc_deg(g, params, ceil_sqrt(n), seed, mode)?;
    let half = (r.x_hat + 1.0) / 2.0;
    Ok(half + (half * half + n as f64 * r.v_hat).max(0.0).sqrt())
}

/// Warning when `ε < √(ln n · ln(1/δ)/n)`, the regime in which the ER and
/// clique estimators carry no accuracy guarantee.
pub fn small_eps_warning(n: usize, params: PrivacyParams) -> Option<String> {
    let floor = ((n as f64).ln() * (1.0 / params.delta()).ln() / n as f64).sqrt();
    (params.eps() < floor).then(|| {
        format!(
            "eps = {} is below √(ln n·ln(1/δ)/n) = {floor:.4}; accuracy is not guaranteed",
            params.eps()
        )
    })
}

/// Laplace baseline: `½ Σ (d_i + Z_i)` with `Z_i ~ Lap(2n/ε)`.
pub fn baseline_laplace_edges(g: &Graph, eps: f64, seed: u64, mode: NoiseMode) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(param(format!("eps must be positive, got {eps}")));
    }
    let b = 2.0 * g.n() as f64 / eps;
    let mut total = 0.0;
    for i in 0..g.n() {
        total += g.degree(i) as f64;
        if mode.is_private() {
            total += laplace(&mut stream(seed, &[label::NOISE, i as u64]), b);
        }
    }
    Ok(total / 2.0)
}

/// Per-bit privacy level `ε/√(8n ln(1/δ))` of [`baseline_rr_edges`].
pub fn rr_bit_eps(n: usize, params: PrivacyParams) -> f64 {
    params.eps() / (8.0 * n as f64 * (1.0 / params.delta()).ln()).sqrt()
}

/// Randomized-response baseline: node `i` reports each pair `(i, j)` with
/// `j > i` through randomized response and the server sums debiased bits.
///
/// In noiseless mode no bit is flipped.
pub fn baseline_rr_edges(g: &Graph, params: PrivacyParams, seed: u64, mode: NoiseMode) -> Result<f64> {
    let n = g.n();
    if !(params.delta() > 0.0 && params.delta() < 1.0) {
        return Err(param("randomized-response baseline needs 0 < delta < 1"));
    }
    if !mode.is_private() {
        return Ok(g.edge_count() as f64);
    }
    let e = rr_bit_eps(n, params).exp();
    let debias = |b: f64| (b * (e + 1.0) - 1.0) / (e - 1.0);
    let (one, zero) = (debias(1.0), debias(0.0));
    let keep = e / (e + 1.0);
    let mut total = 0.0;
    for i in 0..n {
        let mut rng = stream(seed, &[label::FLIP, i as u64]);
        let nbrs = g.neighbors(i);
        let mut next = nbrs.partition_point(|&j| (j as usize) <= i);
        for j in i + 1..n {
            let edge = next < nbrs.len() && nbrs[next] as usize == j;
            if edge {
                next += 1;
            }
            let bit = if rng.random::<f64>() < keep { edge } else { !edge };
            total += if bit { one } else { zero };
        }
    }
    Ok(total)
}
