//! The starpartite-versus-regular distinguisher and its parameter checks.
//!
//! The server publishes `s` random multisets `S_j` of `⌊n/t⌋` nodes. Node
//! `i` reports, for every `j`, whether it has a neighbor in `S_j`, plus
//! Gaussian noise. On a `t`-regular graph the column means stay inside
//! `[0, 1]` slightly more often than on a `t`-starpartite graph, and the
//! server thresholds the fraction of such columns at `τ`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::graph::Graph;
use crate::rng::{label, stream};

/// `K = 72·10⁴·π`.
pub const K: f64 = 72.0e4 * std::f64::consts::PI;

/// Upper clamp on `γ`, only reached when `σ̄` is far below 1.
pub const GAMMA_MAX: f64 = 0.05;

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// `Pr[a ≤ Z ≤ b]` for `Z ~ N(mu, sigma²)`, computed from whichever of
/// `erf`/`erfc` avoids cancellation.
pub fn gaussian_interval_prob(mu: f64, sigma: f64, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let scale = sigma * std::f64::consts::SQRT_2;
    let (za, zb) = ((a - mu) / scale, (b - mu) / scale);
    let p = if za >= 0.0 {
        0.5 * (libm::erfc(za) - libm::erfc(zb))
    } else if zb <= 0.0 {
        0.5 * (libm::erfc(-zb) - libm::erfc(-za))
    } else {
        0.5 * (libm::erf(zb) - libm::erf(za))
    };
    p.clamp(0.0, 1.0)
}

fn p_nt_real(n: f64, t: f64) -> f64 {
    -((n / t) * (-t / n).ln_1p()).exp_m1()
}

/// `p_{n,t} = 1 − (1 − t/n)^{n/t}`: the chance that a multiset of `n/t`
/// uniform nodes hits a fixed set of `t` nodes.
pub fn p_nt(n: usize, t: usize) -> Result<f64> {
    if t == 0 || t > n {
        return Err(param(format!("p_nt needs 1 ≤ t ≤ n, got t = {t}, n = {n}")));
    }
    if t == n {
        return Ok(1.0);
    }
    Ok(p_nt_real(n as f64, t as f64))
}

/// The quantities entering the threshold `τ` for given `(n, t, σ̄)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnLaw {
    pub p: f64,
    pub gamma: f64,
    pub r: f64,
    pub p_star: f64,
    pub p_reg: f64,
}

fn column_law(n: f64, t: f64, sigma_bar: f64) -> ColumnLaw {
    let p = if t >= n { 1.0 } else { p_nt_real(n, t) };
    let gamma = (1.0 / (200.0 * sigma_bar * sigma_bar)).min(GAMMA_MAX);
    let r = (3.0 * p / n * (1.0 / gamma).ln()).sqrt();
    let p_reg = (1.0 - gamma) * gaussian_interval_prob(p, sigma_bar, r, 1.0 - r);
    let p_star = (1.0 - p) * gaussian_interval_prob(t / n, sigma_bar, 0.0, 1.0)
        + p * gaussian_interval_prob(1.0, sigma_bar, 0.0, 1.0);
    ColumnLaw {
        p,
        gamma,
        r,
        p_star,
        p_reg,
    }
}

/// `(p_star, p_reg)`: the chance that a column mean lands in `[0, 1]` on a
/// starpartite input, and a lower bound on the same chance for a regular
/// input.
pub fn p_star_p_reg(n: usize, t: usize, sigma_bar: f64) -> Result<(f64, f64)> {
    if t == 0 || t > n {
        return Err(param(format!("need 1 ≤ t ≤ n, got t = {t}, n = {n}")));
    }
    if !(sigma_bar > 0.0) {
        return Err(param(format!("sigma_bar must be positive, got {sigma_bar}")));
    }
    let e = column_law(n as f64, t as f64, sigma_bar);
    Ok((e.p_star, e.p_reg))
}

/// Hyperparameters of the distinguisher, all derived from `(ε, δ, t, n)`
/// and an optional debug noise scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistinguisherParams {
    pub eps: f64,
    pub delta: f64,
    pub t: usize,
    pub n: usize,
    /// Multiplier on `σ_priv`; anything other than 1 voids the privacy claim.
    pub noise_scale: f64,
    pub c_edp: f64,
    /// Number of published multisets, `⌈3t ln(2/δ)⌉`.
    pub s: usize,
    pub sigma_priv: f64,
    /// `noise_scale·σ_priv/√n`, the noise level of one column mean.
    pub sigma_bar: f64,
    pub gamma: f64,
    pub r: f64,
    pub p_nt: f64,
    pub p_reg: f64,
    pub p_star: f64,
    pub tau: f64,
    /// Regime violations. They do not stop a run.
    pub warnings: Vec<String>,
}

impl DistinguisherParams {
    pub fn new(eps: f64, delta: f64, t: usize, n: usize) -> Result<Self> {
        Self::with_noise_scale(eps, delta, t, n, 1.0)
    }

    pub fn with_noise_scale(eps: f64, delta: f64, t: usize, n: usize, noise_scale: f64) -> Result<Self> {
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(param(format!("eps must be positive, got {eps}")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(param(format!("delta must lie in (0, 1), got {delta}")));
        }
        if t == 0 || t > n {
            return Err(param(format!("need 1 ≤ t ≤ n, got t = {t}, n = {n}")));
        }
        if !(noise_scale > 0.0) || !noise_scale.is_finite() {
            return Err(param(format!("noise scale must be positive, got {noise_scale}")));
        }
        let mut warnings = Vec::new();
        if eps >= 0.5 {
            warnings.push(format!("eps = {eps} outside (0, 1/2)"));
        }
        if delta >= 0.1 {
            warnings.push(format!("delta = {delta} outside (0, 1/10)"));
        }
        let l2 = (2.0 / delta).ln();
        let c_edp = (2.0 * (2.5 / delta).ln()).sqrt() / eps;
        let s = (3.0 * t as f64 * l2).ceil() as usize;
        let (sf, tf, nf) = (s as f64, t as f64, n as f64);
        let sigma_priv = c_edp * (sf + (sf / tf + (3.0 * sf / tf * l2).sqrt()) * nf).sqrt();
        let sigma_bar = noise_scale * sigma_priv / nf.sqrt();
        let e = column_law(nf, tf, sigma_bar);
        Ok(DistinguisherParams {
            eps,
            delta,
            t,
            n,
            noise_scale,
            c_edp,
            s,
            sigma_priv,
            sigma_bar,
            gamma: e.gamma,
            r: e.r,
            p_nt: e.p,
            p_reg: e.p_reg,
            p_star: e.p_star,
            tau: (e.p_reg + e.p_star) / 2.0,
            warnings,
        })
    }

    /// True when the noise is at full strength and the parameters lie in
    /// the regime where the privacy analysis applies.
    pub fn certified(&self) -> bool {
        self.noise_scale == 1.0 && self.warnings.is_empty()
    }

    /// Size `⌊n/t⌋` of each published multiset.
    pub fn multiset_size(&self) -> usize {
        self.n / self.t
    }
}

/// `s` multisets of `size` nodes drawn uniformly with replacement.
pub fn sample_multisets(n: usize, size: usize, s: usize, seed: u64) -> Vec<Vec<u32>> {
    let mut rng = stream(seed, &[label::MULTISET]);
    (0..s)
        .map(|_| (0..size).map(|_| rng.random_range(0..n as u32)).collect())
        .collect()
}

/// Row-major `n × s` matrix of `b_{i,j} = 1[N_i ∩ S_j ≠ ∅]`.
pub fn hit_bits(g: &Graph, sets: &[Vec<u32>]) -> Vec<bool> {
    let (n, s) = (g.n(), sets.len());
    let mut bits = vec![false; n * s];
    let mut mark = vec![false; n];
    for (j, set) in sets.iter().enumerate() {
        for &v in set {
            mark[v as usize] = true;
        }
        for i in 0..n {
            bits[i * s + j] = g.neighbors(i).iter().any(|&v| mark[v as usize]);
        }
        for &v in set {
            mark[v as usize] = false;
        }
    }
    bits
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Starpartite,
    Regular,
}

/// Result of one run of [`distinguish`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub label: Label,
    /// Fraction of columns whose noisy mean lies in `[0, 1]`.
    pub fraction: f64,
    pub tau: f64,
    pub certified: bool,
}

/// Fraction of columns whose noisy mean lies in `[0, 1]`.
pub fn column_fraction(g: &Graph, params: &DistinguisherParams, seed: u64) -> Result<f64> {
    if g.n() != params.n {
        return Err(param(format!(
            "graph has {} nodes but the parameters were built for n = {}",
            g.n(),
            params.n
        )));
    }
    let (n, s) = (params.n, params.s);
    let sets = sample_multisets(n, params.multiset_size(), s, seed);
    let bits = hit_bits(g, &sets);
    let sigma = params.noise_scale * params.sigma_priv;
    let mut sums = vec![0.0; s];
    for i in 0..n {
        let mut rng = stream(seed, &[label::NOISE, i as u64]);
        for (j, sum) in sums.iter_mut().enumerate() {
            let b = if bits[i * s + j] { 1.0 } else { 0.0 };
            *sum += b + sigma * rng.sample::<f64, _>(StandardNormal);
        }
    }
    let inside = sums
        .iter()
        .filter(|&&t| (0.0..=1.0).contains(&(t / n as f64)))
        .count();
    Ok(inside as f64 / s as f64)
}

/// Labels `g` as regular when the in-range fraction reaches `τ`.
pub fn distinguish(g: &Graph, params: &DistinguisherParams, seed: u64) -> Result<Outcome> {
    let fraction = column_fraction(g, params, seed)?;
    Ok(Outcome {
        label: if fraction >= params.tau {
            Label::Regular
        } else {
            Label::Starpartite
        },
        fraction,
        tau: params.tau,
        certified: params.certified(),
    })
}

/// A real-valued `(n, t, s)` point for [`gap_check_at`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapPoint {
    pub n: f64,
    pub t: f64,
    pub s: f64,
}

/// `t = 30K·L²·c⁶`, `s = 3t·L`, `n = (3/4)K·L⁵·c¹⁰` with `L = ln(2/δ)`
/// and `c = √(2 ln(2.5/δ))/ε`.
pub fn gap_point(eps: f64, delta: f64) -> GapPoint {
    let l2 = (2.0 / delta).ln();
    let c = (2.0 * (2.5 / delta).ln()).sqrt() / eps;
    let t = 30.0 * K * l2.powi(2) * c.powi(6);
    GapPoint {
        n: 0.75 * K * l2.powi(5) * c.powi(10),
        t,
        s: 3.0 * t * l2,
    }
}

/// Conditions (a) to (d) and the resulting gap `p_reg − p_star`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub point: GapPoint,
    pub sigma_bar: f64,
    pub column_law: ColumnLaw,
    /// `s ≥ K·σ̄⁶/3`.
    pub cond_a: bool,
    /// `σ̄ ≥ 1`.
    pub cond_b: bool,
    /// `r ≤ γ`.
    pub cond_c: bool,
    /// `n ≥ 3t`.
    pub cond_d: bool,
    pub gap: f64,
    /// `1/(100√(2π)·σ̄³)`.
    pub gap_bound: f64,
}

impl GapReport {
    pub fn conditions_hold(&self) -> bool {
        self.cond_a && self.cond_b && self.cond_c && self.cond_d
    }

    pub fn gap_holds(&self) -> bool {
        self.gap >= self.gap_bound
    }
}

/// Evaluates the conditions and the gap at an arbitrary point.
pub fn gap_check_at(eps: f64, delta: f64, point: GapPoint) -> GapReport {
    let GapPoint { n, t, s } = point;
    let l2 = (2.0 / delta).ln();
    let c = (2.0 * (2.5 / delta).ln()).sqrt() / eps;
    let sigma_bar = c * (s / n + s / t + (3.0 * s / t * l2).sqrt()).sqrt();
    let e = column_law(n, t, sigma_bar);
    let gap_bound = 1.0 / (100.0 * (2.0 * std::f64::consts::PI).sqrt() * sigma_bar.powi(3));
    GapReport {
        point,
        sigma_bar,
        column_law: e,
        cond_a: s >= K * sigma_bar.powi(6) / 3.0,
        cond_b: sigma_bar >= 1.0,
        cond_c: e.r <= e.gamma,
        cond_d: n >= 3.0 * t,
        gap: e.p_reg - e.p_star,
        gap_bound,
    }
}

/// [`gap_check_at`] at [`gap_point`].
pub fn gap_check(eps: f64, delta: f64) -> GapReport {
    gap_check_at(eps, delta, gap_point(eps, delta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_regular, generate_starpartite, starpartite};

    // Composite Simpson on the standard normal density.
    fn cdf_by_quadrature(x: f64) -> f64 {
        let pdf = |z: f64| (-z * z / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let steps = 200_000;
        let h = x / steps as f64;
        let mut acc = pdf(0.0) + pdf(x);
        for k in 1..steps {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * pdf(k as f64 * h);
        }
        0.5 + acc * h / 3.0
    }

    #[test]
    fn normal_cdf_examples() {
        assert_eq!(normal_cdf(0.0), 0.5);
        for x in [0.1, 0.7, 1.3, 2.9, 5.5, 8.0] {
            assert!((normal_cdf(x) + normal_cdf(-x) - 1.0).abs() < 1e-15);
        }
        let x = 1.959_963_985;
        assert!((normal_cdf(x) - cdf_by_quadrature(x)).abs() < 1e-12);
        assert!((normal_cdf(x) - 0.975).abs() < 1e-9);
        for x in [0.3, 1.0, 2.5, 4.0] {
            assert!((normal_cdf(x) - cdf_by_quadrature(x)).abs() < 1e-12, "x = {x}");
        }
    }

    #[test]
    fn interval_prob_matches_cdf_difference() {
        for &(mu, sigma, a, b) in &[(0.0, 1.0, -1.0, 1.0), (0.3, 2.0, 0.0, 1.0), (5.0, 0.5, 0.0, 1.0)] {
            let direct = normal_cdf((b - mu) / sigma) - normal_cdf((a - mu) / sigma);
            assert!((gaussian_interval_prob(mu, sigma, a, b) - direct).abs() < 1e-14);
        }
        assert_eq!(gaussian_interval_prob(0.0, 1.0, 1.0, 0.0), 0.0);
    }

    #[test]
    fn p_nt_examples() {
        assert_eq!(p_nt(100, 100).unwrap(), 1.0);
        assert!((p_nt(100, 10).unwrap() - 0.651_321_559_9).abs() < 1e-10);
        assert!(p_nt(100, 0).is_err());
        let mut prev = 0.0;
        for t in 1..=200 {
            let p = p_nt(200, t).unwrap();
            assert!(p >= prev);
            prev = p;
        }
    }

    #[test]
    fn p_star_p_reg_are_probabilities() {
        let (ps, pr) = p_star_p_reg(100, 10, 1e-6).unwrap();
        assert!((0.0..=1.0).contains(&ps) && (0.0..=1.0).contains(&pr));
        for sb in [0.01, 0.3, 1.0, 5.0, 40.0] {
            let e = column_law(100.0, 10.0, sb);
            assert!(e.p_reg <= 1.0 - e.gamma);
        }
        assert!(p_star_p_reg(100, 10, 0.0).is_err());
    }

    #[test]
    fn params_follow_formulas() {
        let p = DistinguisherParams::new(0.4, 0.05, 5, 500).unwrap();
        assert_eq!(p.s, 56);
        let c = (2.0 * 50f64.ln()).sqrt() / 0.4;
        assert!((p.c_edp - c).abs() < 1e-12);
        let want = c * (56.0 + (56.0 / 5.0 + (3.0 * 56.0 / 5.0 * 40f64.ln()).sqrt()) * 500.0).sqrt();
        assert!((p.sigma_priv - want).abs() < 1e-9);
        assert!((p.sigma_bar - want / 500f64.sqrt()).abs() < 1e-9);
        assert!(p.certified());
        let loud = DistinguisherParams::new(0.9, 0.2, 5, 500).unwrap();
        assert_eq!(loud.warnings.len(), 2);
        assert!(!loud.certified());
        let debug = DistinguisherParams::with_noise_scale(0.4, 0.05, 5, 500, 1e-6).unwrap();
        assert!(!debug.certified());
        assert_eq!(debug.gamma, GAMMA_MAX);
        assert!(debug.r.is_finite() && debug.tau > debug.p_star && debug.tau < debug.p_reg);
    }

    #[test]
    fn multisets_have_exact_size() {
        let sets = sample_multisets(500, 100, 56, 3);
        assert_eq!(sets.len(), 56);
        assert!(sets.iter().all(|s| s.len() == 100 && s.iter().all(|&v| v < 500)));
    }

    #[test]
    fn hit_bits_on_starpartite() {
        let g = starpartite(6, &[0]).unwrap();
        let bits = hit_bits(&g, &[vec![0], vec![3, 3]]);
        // Column 0 hits every non-center; column 1 only hits the center.
        assert_eq!(bits[..2], [false, true]);
        for i in 1..6 {
            assert_eq!(bits[i * 2..i * 2 + 2], [true, false]);
        }
    }

    #[test]
    fn debug_mode_separates_families() {
        let p = DistinguisherParams::with_noise_scale(0.4, 0.05, 5, 500, 1e-6).unwrap();
        let mut correct = (0, 0);
        for trial in 0..10 {
            let reg = generate_regular(500, 5, trial).unwrap();
            let star = generate_starpartite(500, 5, trial).unwrap();
            correct.0 += (distinguish(&reg, &p, trial).unwrap().label == Label::Regular) as usize;
            correct.1 += (distinguish(&star, &p, trial).unwrap().label == Label::Starpartite) as usize;
        }
        assert!(correct.0 >= 8 && correct.1 >= 8, "{correct:?}");
    }

    #[test]
    fn gap_check_at_reference_point() {
        let r = gap_check(0.4, 0.05);
        assert!(r.cond_a && r.cond_b && r.cond_c && r.cond_d, "{r:?}");
        assert!(r.gap_bound > 0.0);
        assert!(r.gap_holds(), "gap {} < bound {}", r.gap, r.gap_bound);
        let mut pt = r.point;
        pt.t = pt.n / 2.0;
        assert!(!gap_check_at(0.4, 0.05, pt).cond_d);
    }
}
