//! Statistical distances, privacy accounting, and exhaustive checks of
//! sensitivity and splicing inequalities.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::graph::{generate_regular, starpartite, Graph};
use crate::mechanisms::PrivacyParams;
use crate::rng::{derive, label, stream};

/// A finite distribution over labeled outcomes.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscretePmf<T> {
    support: Vec<T>,
    probs: Vec<f64>,
}

impl<T: Ord + Clone> DiscretePmf<T> {
    /// Checks distinct labels, nonnegative weights and unit mass.
    pub fn new(support: Vec<T>, probs: Vec<f64>) -> Result<Self> {
        if support.len() != probs.len() {
            return Err(param("support and probabilities differ in length"));
        }
        if probs.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(param("probabilities must be finite and nonnegative"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(param(format!("probabilities sum to {total}, not 1")));
        }
        let mut seen: Vec<&T> = support.iter().collect();
        seen.sort();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(param("support labels must be distinct"));
        }
        Ok(DiscretePmf { support, probs })
    }

    pub fn support(&self) -> &[T] {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    fn as_map(&self) -> BTreeMap<&T, f64> {
        self.support.iter().zip(self.probs.iter().copied()).collect()
    }

    /// The product distribution on pairs.
    pub fn product<U: Ord + Clone>(&self, other: &DiscretePmf<U>) -> DiscretePmf<(T, U)> {
        let mut support = Vec::new();
        let mut probs = Vec::new();
        for (a, p) in self.support.iter().zip(&self.probs) {
            for (b, q) in other.support.iter().zip(&other.probs) {
                support.push((a.clone(), b.clone()));
                probs.push(p * q);
            }
        }
        DiscretePmf { support, probs }
    }
}

impl DiscretePmf<usize> {
    /// Outcomes labeled `0..probs.len()`.
    pub fn from_probs(probs: &[f64]) -> Result<Self> {
        DiscretePmf::new((0..probs.len()).collect(), probs.to_vec())
    }
}

fn paired<T: Ord + Clone>(p: &DiscretePmf<T>, q: &DiscretePmf<T>) -> Vec<(f64, f64)> {
    let (mp, mq) = (p.as_map(), q.as_map());
    let mut keys: Vec<&T> = mp.keys().chain(mq.keys()).copied().collect();
    keys.sort();
    keys.dedup();
    keys.into_iter()
        .map(|k| (*mp.get(k).unwrap_or(&0.0), *mq.get(k).unwrap_or(&0.0)))
        .collect()
}

/// `½ Σ |p − q|` over the union of supports.
pub fn tv_distance<T: Ord + Clone>(p: &DiscretePmf<T>, q: &DiscretePmf<T>) -> f64 {
    0.5 * paired(p, q).iter().map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// A Bhattacharyya distance. Disjoint supports give `Infinite`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Bhattacharyya {
    Finite(f64),
    Infinite,
}

impl Bhattacharyya {
    /// The distance as a float, with `Infinite` mapped to `f64::INFINITY`.
    pub fn value(self) -> f64 {
        match self {
            Bhattacharyya::Finite(b) => b,
            Bhattacharyya::Infinite => f64::INFINITY,
        }
    }

    pub fn is_infinite(self) -> bool {
        self == Bhattacharyya::Infinite
    }
}

impl From<f64> for Bhattacharyya {
    fn from(b: f64) -> Self {
        if b.is_infinite() {
            Bhattacharyya::Infinite
        } else {
            Bhattacharyya::Finite(b)
        }
    }
}

/// `−ln Σ √(p·q)`.
pub fn bhattacharyya<T: Ord + Clone>(p: &DiscretePmf<T>, q: &DiscretePmf<T>) -> Bhattacharyya {
    let h: f64 = paired(p, q).iter().map(|(a, b)| (a * b).sqrt()).sum();
    if h <= 0.0 {
        Bhattacharyya::Infinite
    } else {
        Bhattacharyya::Finite((-h.ln()).max(0.0))
    }
}

/// The upper bound `√(2(1 − e^{−B}))` on total variation distance.
pub fn tv_from_bhatt(b: impl Into<Bhattacharyya>) -> f64 {
    match b.into() {
        Bhattacharyya::Infinite => std::f64::consts::SQRT_2,
        Bhattacharyya::Finite(b) => (2.0 * -(-b).exp_m1()).sqrt(),
    }
}

/// Independent Gaussians with the given means and a shared standard
/// deviation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianProduct {
    means: Vec<f64>,
    sigma: f64,
}

impl GaussianProduct {
    pub fn new(means: Vec<f64>, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(param(format!("sigma must be positive, got {sigma}")));
        }
        Ok(GaussianProduct { means, sigma })
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

/// `Σ (μ_i − ν_i)²/(8σ²)`.
pub fn bhatt_gaussian_product(a: &GaussianProduct, b: &GaussianProduct) -> Result<f64> {
    if a.means.len() != b.means.len() {
        return Err(param(format!(
            "dimensions differ: {} vs {}",
            a.means.len(),
            b.means.len()
        )));
    }
    if a.sigma != b.sigma {
        return Err(param("Gaussian products must share sigma"));
    }
    let ss: f64 = a
        .means
        .iter()
        .zip(&b.means)
        .map(|(x, y)| (x - y).powi(2))
        .sum();
    Ok(ss / (8.0 * a.sigma * a.sigma))
}

/// `ln((e^{ε/2} + e^{−ε/2})/2) + ln(1/(1−δ))`, the largest Bhattacharyya
/// distance between output distributions of an `(ε, δ)`-private
/// mechanism on neighboring inputs.
pub fn bhatt_dp_bound(params: PrivacyParams) -> Result<f64> {
    if params.delta() >= 1.0 {
        return Err(param("the bound needs delta < 1"));
    }
    Ok((params.eps() / 2.0).cosh().ln() - (-params.delta()).ln_1p())
}

/// `(kε, k·e^{kε}·δ)`, with δ capped at 1. A group of one keeps `params`.
pub fn group_privacy(params: PrivacyParams, k: usize) -> Result<PrivacyParams> {
    if k == 0 {
        return Err(param("group size k must be at least 1"));
    }
    if k == 1 {
        return Ok(params);
    }
    let kf = k as f64;
    let eps = kf * params.eps();
    PrivacyParams::new(eps, (kf * eps.exp() * params.delta()).min(1.0))
}

/// `7kε²/2 + 2ε√(6k ln(2/δ'))`.
pub fn adv_grouposition_eps(eps: f64, k: usize, delta_prime: f64) -> f64 {
    let kf = k as f64;
    3.5 * kf * eps * eps + 2.0 * eps * (6.0 * kf * (2.0 / delta_prime).ln()).sqrt()
}

/// Largest `n` accepted by [`l2_sensitivity_oracle`].
pub const ORACLE_MAX_N: usize = 6;

/// Exact ℓ2 sensitivity of `report_map` under node rewiring, by enumerating
/// every graph on `n` nodes and every rewiring of every node.
pub fn l2_sensitivity_oracle<F>(report_map: F, n: usize) -> Result<f64>
where
    F: Fn(&Graph) -> Vec<f64>,
{
    if n == 0 || n > ORACLE_MAX_N {
        return Err(param(format!("oracle enumerates n in 1..={ORACLE_MAX_N}, got {n}")));
    }
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let mut bit = vec![vec![0u32; n]; n];
    for (b, &(i, j)) in pairs.iter().enumerate() {
        bit[i][j] = 1 << b;
        bit[j][i] = 1 << b;
    }
    let incident: Vec<u32> = (0..n).map(|i| bit[i].iter().fold(0, |a, b| a | b)).collect();
    let graph_of = |mask: u32| {
        Graph::from_edges(
            n,
            pairs
                .iter()
                .enumerate()
                .filter(|(b, _)| mask & (1 << b) != 0)
                .map(|(_, &e)| e),
        )
        .expect("pairs are valid edges")
    };
    let reports: Vec<Vec<f64>> = (0..1u32 << pairs.len())
        .map(|m| report_map(&graph_of(m)))
        .collect();
    let mut worst = 0.0f64;
    for (mask, r) in reports.iter().enumerate() {
        let mask = mask as u32;
        for i in 0..n {
            let others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            for sub in 0..1u32 << others.len() {
                let mut m2 = mask & !incident[i];
                for (b, &j) in others.iter().enumerate() {
                    if sub & (1 << b) != 0 {
                        m2 |= bit[i][j];
                    }
                }
                let r2 = &reports[m2 as usize];
                if r.len() != r2.len() {
                    return Err(param("report_map returned vectors of different lengths"));
                }
                let d2: f64 = r.iter().zip(r2).map(|(a, b)| (a - b).powi(2)).sum();
                worst = worst.max(d2);
            }
        }
    }
    Ok(worst.sqrt())
}

/// Output of [`splicing_check`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplicingReport {
    /// Mean of `B(R(G), R(empty))` over `d`-regular `G`.
    pub left_mean: f64,
    pub left_se: f64,
    /// `1/(1 − d/n)` times the mean of `B(R(S_T), R(empty))` over uniform
    /// `d`-subsets `T`.
    pub right_mean: f64,
    pub right_se: f64,
    /// `n·d²/(8σ²)`.
    pub left_expected: f64,
    /// `right_mean − left_mean`.
    pub margin: f64,
    /// `√(left_se² + right_se²)`.
    pub margin_se: f64,
    /// Total variation bound implied by `left_mean`.
    pub tv_bound: f64,
}

impl SplicingReport {
    /// The inequality holds with a margin of at least three standard errors.
    pub fn holds(&self) -> bool {
        self.margin >= 3.0 * self.margin_se
    }
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let k = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / k;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

/// Monte Carlo comparison, for the randomizer that releases `d_i + N(0, σ²)`,
/// of random `d`-regular graphs against random `d`-starpartite graphs, both
/// measured in Bhattacharyya distance from the empty graph.
pub fn splicing_check(n: usize, d: usize, sigma: f64, trials: usize, seed: u64) -> Result<SplicingReport> {
    if 2 * d > n {
        return Err(param(format!("need d ≤ n/2, got d = {d}, n = {n}")));
    }
    if (n * d) % 2 != 0 {
        return Err(param("n·d must be even"));
    }
    if trials == 0 {
        return Err(param("trials must be positive"));
    }
    let empty = GaussianProduct::new(vec![0.0; n], sigma)?;
    let dist = |g: &Graph| -> Result<f64> {
        let means = g.degrees().into_iter().map(|x| x as f64).collect();
        bhatt_gaussian_product(&GaussianProduct::new(means, sigma)?, &empty)
    };
    let mut left = Vec::with_capacity(trials);
    let mut right = Vec::with_capacity(trials);
    let scale = 1.0 / (1.0 - d as f64 / n as f64);
    for trial in 0..trials as u64 {
        let g = generate_regular(n, d, derive(seed, &[label::TRIAL, trial, 0]))?;
        left.push(dist(&g)?);
        let mut rng = stream(seed, &[label::TRIAL, trial, 1]);
        let centers = rand::seq::index::sample(&mut rng, n, d).into_vec();
        right.push(scale * dist(&starpartite(n, &centers)?)?);
    }
    let (left_mean, left_se) = mean_se(&left);
    let (right_mean, right_se) = mean_se(&right);
    Ok(SplicingReport {
        left_mean,
        left_se,
        right_mean,
        right_se,
        left_expected: (n * d * d) as f64 / (8.0 * sigma * sigma),
        margin: right_mean - left_mean,
        margin_se: (left_se * left_se + right_se * right_se).sqrt(),
        tv_bound: tv_from_bhatt(left_mean),
    })
}
