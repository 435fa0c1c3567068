//! Randomized rounding, the blur matrix `A_s`, compressed blurry degree
//! distributions and the Wasserstein-∞ distance.
//!
//! Rounding a degree `d` to a multiple of `s` picks `s·⌊d/s⌋` or `s·⌈d/s⌉`
//! with probabilities that keep the mean. Applied to a whole degree
//! distribution this is the linear map `A_s`, a `ν × n` matrix with
//! `ν = ⌈n/s⌉ + 1` and at most two nonzero entries per column.

use rand::Rng;

use crate::error::{param, Result};
use crate::graph::DegreePmf;
use crate::rng::{label, stream};

/// Number of multiples of `s` that a degree in `0..n` can round to.
pub fn nu(n: usize, s: usize) -> usize {
    n.div_ceil(s) + 1
}

/// Rounds `x` to `s·⌊x/s⌋` or `s·⌈x/s⌉`, the latter with probability
/// equal to the fractional part of `x/s`.
pub fn randomized_round_with<R: Rng + ?Sized>(rng: &mut R, x: f64, s: usize) -> Result<f64> {
    if s == 0 {
        return Err(param("blur width s must be at least 1"));
    }
    if !(x >= 0.0) || !x.is_finite() {
        return Err(param(format!("randomized rounding needs finite x ≥ 0, got {x}")));
    }
    let s = s as f64;
    let q = x / s;
    let base = q.floor();
    let frac = q - base;
    let up = frac > 0.0 && rng.random::<f64>() < frac;
    Ok(s * (base + if up { 1.0 } else { 0.0 }))
}

/// Seeded form of [`randomized_round_with`].
pub fn randomized_round(x: f64, s: usize, seed: u64) -> Result<f64> {
    randomized_round_with(&mut stream(seed, &[label::ROUND]), x, s)
}

/// The blur matrix `A_s` for degrees `0..n`, stored implicitly.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlurMatrix {
    n: usize,
    s: usize,
    nu: usize,
}

/// Builds `A_s` for `n` nodes.
pub fn blur_matrix(n: usize, s: usize) -> Result<BlurMatrix> {
    if n == 0 {
        return Err(param("blur matrix needs n ≥ 1"));
    }
    if s == 0 {
        return Err(param("blur width s must be at least 1"));
    }
    Ok(BlurMatrix { n, s, nu: nu(n, s) })
}

impl BlurMatrix {
    /// Number of columns.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn s(&self) -> usize {
        self.s
    }

    /// Number of rows.
    pub fn nu(&self) -> usize {
        self.nu
    }

    /// Entry `(i, j)`: `max(1 − |j − s·i|/s, 0)`.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let s = self.s as f64;
        (1.0 - (j as f64 - s * i as f64).abs() / s).max(0.0)
    }

    /// Column `d` as `[(row, weight); 2]`. The second weight is zero when
    /// `d` is a multiple of `s`.
    pub fn column(&self, d: usize) -> [(usize, f64); 2] {
        debug_assert!(d < self.n);
        let lo = d / self.s;
        let frac = (d % self.s) as f64 / self.s as f64;
        [(lo, 1.0 - frac), (lo + 1, frac)]
    }

    /// `A_s · x` for a length-`n` vector.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n {
            return Err(param(format!(
                "vector of length {} does not match n = {}",
                x.len(),
                self.n
            )));
        }
        let mut out = vec![0.0; self.nu];
        for (d, &v) in x.iter().enumerate() {
            for (row, w) in self.column(d) {
                out[row] += w * v;
            }
        }
        Ok(out)
    }

    /// Dense row-major copy, for tests and small inspections.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.nu)
            .map(|i| (0..self.n).map(|j| self.entry(i, j)).collect())
            .collect()
    }
}

/// The compressed blurry degree distribution `D̂ = A_s·D_G`. Index `i`
/// stands for the degree value `s·i`.
#[derive(Clone, Debug, PartialEq)]
pub struct CompressedBlurryPmf {
    probs: Vec<f64>,
    s: usize,
    n: usize,
}

impl CompressedBlurryPmf {
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nu(&self) -> usize {
        self.probs.len()
    }

    /// `Σ_i s·i·D̂(i)`.
    pub fn mean(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(i, p)| (self.s * i) as f64 * p)
            .sum()
    }

    /// The uncompressed distribution on degree values `0..=s(ν−1)`.
    pub fn uncompressed(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.s * (self.nu() - 1) + 1];
        for (i, &p) in self.probs.iter().enumerate() {
            out[self.s * i] = p;
        }
        out
    }
}

/// `A_s·D`.
pub fn compressed_blurry(d: &DegreePmf, s: usize) -> Result<CompressedBlurryPmf> {
    let a = blur_matrix(d.n(), s)?;
    Ok(CompressedBlurryPmf {
        probs: a.apply(d.probs())?,
        s,
        n: d.n(),
    })
}

/// `W∞` between two pmfs on `0, 1, 2, …`, by walking the quantile coupling.
///
/// CDF levels closer than `1e-12` are treated as equal so that rounding in
/// the inputs does not pair mass across a spurious gap.
pub fn winf_distance(p: &[f64], q: &[f64]) -> f64 {
    const TOL: f64 = 1e-12;
    let support = |v: &[f64]| -> Vec<(usize, f64)> {
        v.iter()
            .enumerate()
            .filter(|(_, &m)| m > 0.0)
            .map(|(i, &m)| (i, m))
            .collect()
    };
    let (a, b) = (support(p), support(q));
    let (mut i, mut j) = (0, 0);
    let (mut ca, mut cb) = (0.0, 0.0);
    let mut worst = 0usize;
    while i < a.len() && j < b.len() {
        let (xa, ma) = a[i];
        let (xb, mb) = b[j];
        worst = worst.max(xa.abs_diff(xb));
        let (na, nb) = (ca + ma, cb + mb);
        if (na - nb).abs() <= TOL {
            ca = na;
            cb = nb;
            i += 1;
            j += 1;
        } else if na < nb {
            ca = na;
            i += 1;
        } else {
            cb = nb;
            j += 1;
        }
        if ca >= 1.0 - TOL || cb >= 1.0 - TOL {
            break;
        }
    }
    worst as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{degree_pmf, Graph};

    #[test]
    fn round_examples() {
        for seed in 0..100 {
            assert_eq!(randomized_round(6.0, 2, seed).unwrap(), 6.0);
        }
        let trials = 100_000u64;
        let ups = (0..trials)
            .filter(|&seed| randomized_round(3.0, 2, seed).unwrap() == 4.0)
            .count() as f64
            / trials as f64;
        assert!((ups - 0.5).abs() <= 0.01, "{ups}");
        let mut rng = stream(4, &[]);
        let mean = (0..1_000_000)
            .map(|_| randomized_round_with(&mut rng, 7.0, 5).unwrap())
            .sum::<f64>()
            / 1e6;
        assert!((mean - 7.0).abs() <= 0.02, "{mean}");
        assert!(randomized_round(1.0, 0, 0).is_err());
        assert!(randomized_round(-1.0, 2, 0).is_err());
    }

    #[test]
    fn round_output_is_adjacent_multiple() {
        let mut rng = stream(1, &[]);
        for k in 0..500 {
            let x = k as f64 * 0.37;
            let r = randomized_round_with(&mut rng, x, 3).unwrap();
            assert!(r == 3.0 * (x / 3.0).floor() || r == 3.0 * (x / 3.0).ceil());
        }
    }

    #[test]
    fn blur_matrix_examples() {
        let a = blur_matrix(3, 1).unwrap();
        assert_eq!(a.nu(), 4);
        let dense = a.to_dense();
        for j in 0..3 {
            for i in 0..4 {
                assert_eq!(dense[i][j], if i == j { 1.0 } else { 0.0 });
            }
        }
        let a = blur_matrix(4, 2).unwrap();
        assert_eq!(a.nu(), 3);
        let dense = a.to_dense();
        assert_eq!([dense[0][1], dense[1][1], dense[2][1]], [0.5, 0.5, 0.0]);
    }

    #[test]
    fn sparse_column_matches_dense_entries() {
        for n in 1..=50 {
            for s in 1..=10 {
                let a = blur_matrix(n, s).unwrap();
                let dense = a.to_dense();
                for d in 0..n {
                    let mut col = vec![0.0; a.nu()];
                    for (r, w) in a.column(d) {
                        col[r] += w;
                    }
                    for i in 0..a.nu() {
                        assert!((col[i] - dense[i][d]).abs() < 1e-15);
                    }
                    assert!((col.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn compressed_examples() {
        let e = compressed_blurry(&degree_pmf(&Graph::empty(5)), 2).unwrap();
        assert_eq!(e.probs(), &[1.0, 0.0, 0.0, 0.0]);
        let k = compressed_blurry(&degree_pmf(&Graph::complete(4)), 2).unwrap();
        assert_eq!(k.probs(), &[0.0, 0.5, 0.5]);
        assert_eq!(k.uncompressed(), vec![0.0, 0.0, 0.5, 0.0, 0.5]);
        assert!((k.mean() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn winf_examples() {
        let p = [0.2, 0.3, 0.5];
        assert_eq!(winf_distance(&p, &p), 0.0);
        let a = [1.0];
        let b = [0.0, 0.0, 0.0, 0.0, 0.0, 1.0];
        assert_eq!(winf_distance(&a, &b), 5.0);
        assert_eq!(winf_distance(&b, &a), 5.0);
        // Quantile coupling pairs 0↔0 on [0, 0.5] and 0↔2 on (0.5, 1].
        assert_eq!(winf_distance(&[1.0], &[0.5, 0.0, 0.5]), 2.0);
        // Rounding noise in the CDF must not create a spurious pairing.
        let c = [0.1, 0.2, 0.7];
        let d = [0.30000000000000004, 0.0, 0.7];
        assert_eq!(winf_distance(&c, &d), 1.0);
    }
}
