//! Linear queries on the compressed blurry degree distribution.
//!
//! [`anslin`] answers a workload `M·D̂` in the local model: each node sends
//! `M·A_s·e_{d_i}` plus Gaussian noise and the server averages. A
//! [`Factorization`] `W = L·R` runs [`anslin`] on `R` and post-processes the
//! answer with `L`, which is how the CDF is estimated with error that grows
//! only logarithmically in `ν`.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::blur::blur_matrix;
use crate::error::{param, Result};
use crate::graph::Graph;
use crate::mechanisms::{gaussian_sigma, NoiseMode, PrivacyParams};
use crate::rng::{label, stream};

/// Tolerance for exact factorizations.
pub const FACTORIZATION_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
enum Storage {
    Dense(Vec<f64>),
    Sparse {
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        vals: Vec<f64>,
    },
}

/// A real matrix, stored dense (row-major) or sparse (CSR).
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    storage: Storage,
}

/// A workload is a `k × ν` matrix of linear queries.
pub type Workload = Matrix;

impl Matrix {
    /// Dense matrix from row-major data.
    pub fn dense(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(param(format!(
                "{} entries given for a {rows}×{cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(param("matrix entries must be finite"));
        }
        Ok(Matrix {
            rows,
            cols,
            storage: Storage::Dense(data),
        })
    }

    /// Dense matrix from a list of equal-length rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(param("rows have different lengths"));
        }
        Matrix::dense(rows.len(), cols, rows.concat())
    }

    /// Sparse matrix from `(row, col, value)` triplets. Duplicates are
    /// summed and zeros dropped.
    pub fn sparse(rows: usize, cols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut map: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for &(r, c, v) in triplets {
            if r >= rows || c >= cols {
                return Err(param(format!("entry ({r}, {c}) outside {rows}×{cols}")));
            }
            if !v.is_finite() {
                return Err(param("matrix entries must be finite"));
            }
            *map.entry((r, c)).or_insert(0.0) += v;
        }
        let mut row_ptr = vec![0usize; rows + 1];
        let mut col_idx = Vec::with_capacity(map.len());
        let mut vals = Vec::with_capacity(map.len());
        for (&(r, c), &v) in &map {
            if v != 0.0 {
                row_ptr[r + 1] += 1;
                col_idx.push(c);
                vals.push(v);
            }
        }
        for r in 0..rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Ok(Matrix {
            rows,
            cols,
            storage: Storage::Sparse {
                row_ptr,
                col_idx,
                vals,
            },
        })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix::sparse(rows, cols, &[]).expect("empty triplet list")
    }

    pub fn identity(n: usize) -> Self {
        let t: Vec<_> = (0..n).map(|i| (i, i, 1.0)).collect();
        Matrix::sparse(n, n, &t).expect("diagonal in range")
    }

    /// The `ν × ν` lower-triangular all-ones matrix: row `k` sums the first
    /// `k + 1` coordinates.
    pub fn counting(nu: usize) -> Self {
        let data = (0..nu)
            .flat_map(|i| (0..nu).map(move |j| if j <= i { 1.0 } else { 0.0 }))
            .collect();
        Matrix::dense(nu, nu, data).expect("shape matches")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.storage, Storage::Sparse { .. })
    }

    /// Stored entries of row `i` as `(col, value)`.
    pub fn row(&self, i: usize) -> Box<dyn Iterator<Item = (usize, f64)> + '_> {
        match &self.storage {
            Storage::Dense(data) => Box::new(
                data[i * self.cols..(i + 1) * self.cols]
                    .iter()
                    .copied()
                    .enumerate()
                    .filter(|&(_, v)| v != 0.0),
            ),
            Storage::Sparse {
                row_ptr,
                col_idx,
                vals,
            } => {
                let range = row_ptr[i]..row_ptr[i + 1];
                Box::new(
                    col_idx[range.clone()]
                        .iter()
                        .copied()
                        .zip(vals[range].iter().copied()),
                )
            }
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    /// Nonzero entries of every column as `(row, value)` lists.
    pub fn column_lists(&self) -> Vec<Vec<(usize, f64)>> {
        let mut cols = vec![Vec::new(); self.cols];
        for i in 0..self.rows {
            for (j, v) in self.row(i) {
                cols[j].push((i, v));
            }
        }
        cols
    }

    pub fn to_dense_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows)
            .map(|i| {
                let mut r = vec![0.0; self.cols];
                for (j, v) in self.row(i) {
                    r[j] = v;
                }
                r
            })
            .collect()
    }

    /// `self · x`.
    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(param(format!(
                "vector of length {} for a matrix with {} columns",
                x.len(),
                self.cols
            )));
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect())
    }

    /// `self · other`, as a dense matrix.
    pub fn mul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(param(format!(
                "cannot multiply {}×{} by {}×{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut data = vec![0.0; self.rows * other.cols];
        for i in 0..self.rows {
            let out = &mut data[i * other.cols..(i + 1) * other.cols];
            for (l, a) in self.row(i) {
                for (j, b) in other.row(l) {
                    out[j] += a * b;
                }
            }
        }
        Matrix::dense(self.rows, other.cols, data)
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &Matrix) -> Option<f64> {
        if self.rows != other.rows || self.cols != other.cols {
            return None;
        }
        let (a, b) = (self.to_dense_rows(), other.to_dense_rows());
        Some(
            a.iter()
                .flatten()
                .zip(b.iter().flatten())
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max),
        )
    }
}

/// Largest ℓ2 norm of a column.
pub fn norm_1_to_2(m: &Matrix) -> f64 {
    let mut sq = vec![0.0f64; m.cols()];
    for i in 0..m.rows() {
        for (j, v) in m.row(i) {
            sq[j] += v * v;
        }
    }
    sq.into_iter().fold(0.0, f64::max).sqrt()
}

/// Largest ℓ2 norm of a row.
pub fn norm_2_to_inf(m: &Matrix) -> f64 {
    (0..m.rows())
        .map(|i| m.row(i).map(|(_, v)| v * v).sum::<f64>())
        .fold(0.0, f64::max)
        .sqrt()
}

/// Per-node, per-coordinate noise standard deviation used by [`anslin`]:
/// the Gaussian mechanism for sensitivity `2‖M‖₁→₂·√(1 + n/s²)`.
pub fn anslin_sigma(m: &Matrix, n: usize, s: usize, params: PrivacyParams) -> Result<f64> {
    let ratio = n as f64 / (s * s) as f64;
    gaussian_sigma(2.0 * norm_1_to_2(m) * (1.0 + ratio).sqrt(), params)
}

/// Standard deviation of each coordinate of the averaged output of
/// [`anslin`] with the identity workload.
pub fn sigma_coord(n: usize, s: usize, params: PrivacyParams) -> Result<f64> {
    Ok(anslin_sigma(&Matrix::identity(1), n, s, params)? / (n as f64).sqrt())
}

fn check_workload(m: &Matrix, n: usize, s: usize) -> Result<usize> {
    let nu = blur_matrix(n, s)?.nu();
    if m.cols() != nu {
        return Err(param(format!(
            "workload has {} columns but n = {n}, s = {s} gives ν = {nu}",
            m.cols()
        )));
    }
    Ok(nu)
}

/// The noiseless report `M·A_s·e_{d_i}` of every node, concatenated.
pub fn report_vector(g: &Graph, m: &Matrix, s: usize) -> Result<Vec<f64>> {
    check_workload(m, g.n(), s)?;
    let a = blur_matrix(g.n(), s)?;
    let cols = m.column_lists();
    let k = m.rows();
    let mut out = vec![0.0; k * g.n()];
    for i in 0..g.n() {
        let r = &mut out[i * k..(i + 1) * k];
        for (c, w) in a.column(g.degree(i)) {
            for &(row, v) in &cols[c] {
                r[row] += w * v;
            }
        }
    }
    Ok(out)
}

/// Answers `M·D̂` under local node privacy.
///
/// Node `i` draws its noise vector from the stream `(seed, NOISE, i)`,
/// coordinates in order, so the output depends only on the arguments.
pub fn anslin(
    g: &Graph,
    m: &Workload,
    params: PrivacyParams,
    s: usize,
    seed: u64,
    mode: NoiseMode,
) -> Result<Vec<f64>> {
    let n = g.n();
    check_workload(m, n, s)?;
    let sigma = anslin_sigma(m, n, s, params)?;
    let a = blur_matrix(n, s)?;
    let cols = m.column_lists();
    let mut total = vec![0.0; m.rows()];
    for i in 0..n {
        for (c, w) in a.column(g.degree(i)) {
            if w != 0.0 {
                for &(row, v) in &cols[c] {
                    total[row] += w * v;
                }
            }
        }
        if mode.is_private() {
            let mut rng = stream(seed, &[label::NOISE, i as u64]);
            for t in total.iter_mut() {
                *t += sigma * rng.sample::<f64, _>(StandardNormal);
            }
        }
    }
    let inv = 1.0 / n as f64;
    Ok(total.into_iter().map(|t| t * inv).collect())
}

/// An exact factorization `W = L·R`.
#[derive(Clone, Debug, PartialEq)]
pub struct Factorization {
    left: Matrix,
    right: Matrix,
}

impl Factorization {
    /// Pairs `L` and `R`, checking that their product is `target` within
    /// [`FACTORIZATION_TOL`]. Approximate factorizations are rejected.
    pub fn new(left: Matrix, right: Matrix, target: &Matrix) -> Result<Self> {
        check_product(&left, &right, (target.rows(), target.cols()), |i, row| {
            for (j, v) in target.row(i) {
                row[j] = v;
            }
        })?;
        Ok(Factorization { left, right })
    }

    /// `(I, I)`.
    pub fn identity(nu: usize) -> Self {
        Factorization {
            left: Matrix::identity(nu),
            right: Matrix::identity(nu),
        }
    }

    pub fn left(&self) -> &Matrix {
        &self.left
    }

    pub fn right(&self) -> &Matrix {
        &self.right
    }

    /// `‖L‖₂→∞ · ‖R‖₁→₂`.
    pub fn gamma(&self) -> f64 {
        norm_2_to_inf(&self.left) * norm_1_to_2(&self.right)
    }
}

// Compares L·R with a target row by row, without materializing either.
fn check_product(
    left: &Matrix,
    right: &Matrix,
    shape: (usize, usize),
    fill_target_row: impl Fn(usize, &mut [f64]),
) -> Result<()> {
    if left.cols() != right.rows() || (left.rows(), right.cols()) != shape {
        return Err(param(format!(
            "L is {}×{} and R is {}×{}, but the workload is {}×{}",
            left.rows(),
            left.cols(),
            right.rows(),
            right.cols(),
            shape.0,
            shape.1
        )));
    }
    let mut got = vec![0.0; shape.1];
    let mut want = vec![0.0; shape.1];
    for i in 0..shape.0 {
        got.iter_mut().for_each(|x| *x = 0.0);
        want.iter_mut().for_each(|x| *x = 0.0);
        for (l, a) in left.row(i) {
            for (j, b) in right.row(l) {
                got[j] += a * b;
            }
        }
        fill_target_row(i, &mut want);
        let err = got
            .iter()
            .zip(&want)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        if err > FACTORIZATION_TOL {
            return Err(param(format!(
                "L·R differs from the workload by {err:e} in row {i}; only exact factorizations are supported"
            )));
        }
    }
    Ok(())
}

// Non-adjacent form of k, least significant digit first.
fn naf(mut k: usize) -> Vec<i8> {
    let mut digits = Vec::new();
    while k > 0 {
        if k % 2 == 1 {
            let z: i8 = if k % 4 == 1 { 1 } else { -1 };
            if z == 1 {
                k -= 1;
            } else {
                k += 1;
            }
            digits.push(z);
        } else {
            digits.push(0);
        }
        k /= 2;
    }
    digits
}

/// Factorization of the `ν × ν` counting matrix over dyadic intervals.
///
/// `R` has one row per dyadic interval `[b·2^l, (b+1)·2^l) ∩ [0, ν)` that
/// is used. Row `k` of `L` writes the prefix `[0, k+1)` as a signed sum of
/// intervals read off the non-adjacent form of `k + 1`, so each prefix uses
/// at most `⌈log₂ ν⌉/2 + 1` intervals and each coordinate lies in at most
/// `⌈log₂ ν⌉ + 1` of them.
pub fn fact_counting(nu: usize) -> Result<Factorization> {
    if nu == 0 {
        return Err(param("counting workload needs ν ≥ 1"));
    }
    let mut ids: BTreeMap<(u32, usize), usize> = BTreeMap::new();
    let mut left = Vec::new();
    for k in 0..nu {
        let digits = naf(k + 1);
        let mut pos: isize = 0;
        for level in (0..digits.len()).rev() {
            let width = 1isize << level;
            let start = match digits[level] {
                1 => {
                    pos += width;
                    pos - width
                }
                -1 => {
                    pos -= width;
                    pos
                }
                _ => continue,
            };
            if start as usize >= nu {
                continue;
            }
            let key = (level as u32, start as usize >> level);
            let next = ids.len();
            let id = *ids.entry(key).or_insert(next);
            left.push((k, id, f64::from(digits[level])));
        }
    }
    // Renumber rows of R by (level, block).
    let order: BTreeMap<usize, usize> = ids
        .values()
        .enumerate()
        .map(|(rank, &id)| (id, rank))
        .collect();
    let ell = ids.len();
    let mut right = Vec::new();
    for (&(level, block), &id) in &ids {
        let lo = block << level;
        let hi = ((block + 1) << level).min(nu);
        for c in lo..hi {
            right.push((order[&id], c, 1.0));
        }
    }
    let left: Vec<_> = left.into_iter().map(|(k, id, v)| (k, order[&id], v)).collect();
    let left = Matrix::sparse(nu, ell, &left)?;
    let right = Matrix::sparse(ell, nu, &right)?;
    check_product(&left, &right, (nu, nu), |k, row| {
        row[..=k].iter_mut().for_each(|x| *x = 1.0);
    })?;
    Ok(Factorization { left, right })
}

/// `L · anslin(R)`.
pub fn factmech(
    g: &Graph,
    f: &Factorization,
    params: PrivacyParams,
    s: usize,
    seed: u64,
    mode: NoiseMode,
) -> Result<Vec<f64>> {
    let v = anslin(g, f.right(), params, s, seed, mode)?;
    f.left().mul_vec(&v)
}

/// Private estimate of `D̂` (identity workload).
pub fn pmf_estimate(
    g: &Graph,
    params: PrivacyParams,
    s: usize,
    seed: u64,
    mode: NoiseMode,
) -> Result<Vec<f64>> {
    let nu = blur_matrix(g.n(), s)?.nu();
    factmech(g, &Factorization::identity(nu), params, s, seed, mode)
}

/// Private estimate of the CDF of `D̂` through [`fact_counting`].
pub fn cdf_estimate(
    g: &Graph,
    params: PrivacyParams,
    s: usize,
    seed: u64,
    mode: NoiseMode,
) -> Result<Vec<f64>> {
    let nu = blur_matrix(g.n(), s)?.nu();
    factmech(g, &fact_counting(nu)?, params, s, seed, mode)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blur::compressed_blurry;
    use crate::graph::{degree_pmf, generate_er};

    fn pp() -> PrivacyParams {
        PrivacyParams::new(1.0, 1e-6).unwrap()
    }

    #[test]
    fn norm_examples() {
        let i5 = Matrix::identity(5);
        assert_eq!(norm_1_to_2(&i5), 1.0);
        assert_eq!(norm_2_to_inf(&i5), 1.0);
        assert!((norm_1_to_2(&Matrix::counting(5)) - 5f64.sqrt()).abs() < 1e-15);
        let ones = Matrix::dense(3, 3, vec![1.0; 9]).unwrap();
        assert!((norm_2_to_inf(&ones) - 3f64.sqrt()).abs() < 1e-15);
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert!((norm_1_to_2(&m) - 20f64.sqrt()).abs() < 1e-15);
        assert!((norm_2_to_inf(&m) - 5.0).abs() < 1e-15);
    }

    #[test]
    fn matrix_construction_checks() {
        assert!(Matrix::dense(2, 2, vec![1.0; 3]).is_err());
        assert!(Matrix::dense(1, 1, vec![f64::NAN]).is_err());
        assert!(Matrix::sparse(2, 2, &[(2, 0, 1.0)]).is_err());
        let s = Matrix::sparse(2, 3, &[(0, 1, 2.0), (0, 1, 1.0), (1, 2, 0.0)]).unwrap();
        assert_eq!(s.get(0, 1), 3.0);
        assert_eq!(s.row(1).count(), 0);
    }

    #[test]
    fn anslin_noiseless_identities() {
        let g = generate_er(40, 0.2, 3).unwrap();
        let s = 3;
        let nu = crate::blur::nu(40, s);
        let zero = anslin(&g, &Matrix::zeros(4, nu), pp(), s, 1, NoiseMode::Noiseless).unwrap();
        assert_eq!(zero, vec![0.0; 4]);
        let est = anslin(&g, &Matrix::identity(nu), pp(), s, 1, NoiseMode::Noiseless).unwrap();
        let truth = compressed_blurry(&degree_pmf(&g), s).unwrap();
        for (a, b) in est.iter().zip(truth.probs()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(anslin(&g, &Matrix::identity(nu + 1), pp(), s, 1, NoiseMode::Private).is_err());
        let no_delta = PrivacyParams::new(1.0, 0.0).unwrap();
        assert!(anslin(&g, &Matrix::identity(nu), no_delta, s, 1, NoiseMode::Private).is_err());
    }

    #[test]
    fn anslin_is_unbiased() {
        let g = generate_er(60, 0.3, 8).unwrap();
        let s = 4;
        let nu = crate::blur::nu(60, s);
        let m = Matrix::identity(nu);
        let truth = compressed_blurry(&degree_pmf(&g), s).unwrap();
        let trials = 500;
        let mut mean = vec![0.0; nu];
        for seed in 0..trials {
            let est = anslin(&g, &m, pp(), s, seed, NoiseMode::Private).unwrap();
            for (acc, e) in mean.iter_mut().zip(est) {
                *acc += e / trials as f64;
            }
        }
        let sigma = anslin_sigma(&m, 60, s, pp()).unwrap();
        let tol = 4.0 * sigma / (60f64.sqrt() * (trials as f64).sqrt());
        for (a, b) in mean.iter().zip(truth.probs()) {
            assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
        }
    }

    #[test]
    fn anslin_noise_scale_matches_sigma_coord() {
        let g = generate_er(50, 0.1, 1).unwrap();
        let s = 8;
        let nu = crate::blur::nu(50, s);
        let m = Matrix::identity(nu);
        let a = anslin(&g, &m, pp(), s, 1, NoiseMode::Noiseless).unwrap();
        let mut sq = 0.0;
        let trials = 300;
        for seed in 0..trials {
            let e = anslin(&g, &m, pp(), s, seed, NoiseMode::Private).unwrap();
            sq += e.iter().zip(&a).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
        }
        let sd = (sq / (trials * nu as u64) as f64).sqrt();
        let want = sigma_coord(50, s, pp()).unwrap();
        assert!((sd / want - 1.0).abs() < 0.05, "{sd} vs {want}");
    }

    #[test]
    fn fact_counting_examples() {
        let f1 = fact_counting(1).unwrap();
        assert_eq!(f1.left().to_dense_rows(), vec![vec![1.0]]);
        assert_eq!(f1.right().to_dense_rows(), vec![vec![1.0]]);
        assert_eq!(f1.gamma(), 1.0);

        let f4 = fact_counting(4).unwrap();
        let prod = f4.left().mul(f4.right()).unwrap().to_dense_rows();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(prod[i][j], if j <= i { 1.0 } else { 0.0 });
            }
        }
        assert!(fact_counting(1024).unwrap().gamma() <= 11.0);
    }

    #[test]
    fn fact_counting_gamma_is_logarithmic() {
        let mut prev = None;
        for p in 0..=12 {
            let nu = 1usize << p;
            for v in [nu, nu + 1, 3 * nu / 2 + 1] {
                let g = fact_counting(v).unwrap().gamma();
                let bound = (v as f64).log2().ceil() + 1.0;
                assert!(g <= bound + 1e-12, "ν = {v}: γ = {g} > {bound}");
            }
            let g = fact_counting(nu).unwrap().gamma();
            if let Some(gp) = prev {
                if nu >= 128 {
                    assert!(g / gp <= 1.5, "γ({nu})/γ({}) = {}", nu / 2, g / gp);
                }
            }
            prev = Some(g);
        }
    }

    #[test]
    fn naf_digits_are_sparse() {
        for k in 1..5000usize {
            let d = naf(k);
            let value: i64 = d
                .iter()
                .enumerate()
                .map(|(i, &z)| i64::from(z) << i)
                .sum();
            assert_eq!(value, k as i64);
            assert!(d.windows(2).all(|w| w[0] == 0 || w[1] == 0));
        }
    }

    #[test]
    fn factmech_counting_noiseless_is_cdf() {
        let g = generate_er(70, 0.15, 2).unwrap();
        let s = 2;
        let cdf = cdf_estimate(&g, pp(), s, 0, NoiseMode::Noiseless).unwrap();
        let pmf = compressed_blurry(&degree_pmf(&g), s).unwrap();
        let mut acc = 0.0;
        for (c, p) in cdf.iter().zip(pmf.probs()) {
            acc += p;
            assert!((c - acc).abs() < 1e-12);
        }
        assert!((cdf.last().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn factmech_identity_equals_anslin() {
        let g = generate_er(30, 0.3, 2).unwrap();
        let nu = crate::blur::nu(30, 2);
        let a = anslin(&g, &Matrix::identity(nu), pp(), 2, 5, NoiseMode::Private).unwrap();
        let b = pmf_estimate(&g, pp(), 2, 5, NoiseMode::Private).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn factorization_rejects_mismatch() {
        let target = Matrix::counting(3);
        assert!(Factorization::new(Matrix::identity(3), Matrix::identity(3), &target).is_err());
        assert!(Factorization::new(Matrix::counting(3), Matrix::identity(3), &target).is_ok());
    }
}
