//! Small deterministic dense kernel: row-major `f64` matrices, block-diagonal
//! operators, a seeded generator and a central-difference gradient oracle.
//!
//! All reductions run in a fixed left-to-right order so that results are
//! bit-reproducible across runs and platforms.

use rand::{Rng as _, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Row-major dense matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Argument(format!(
                "matrix data has {} entries, expected {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Argument("ragged rows".into()));
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        matmul(self, other)
    }

    /// `self · v` for a column vector `v`.
    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.cols);
        (0..self.rows).map(|r| dot(self.row(r), v)).collect()
    }

    /// `selfᵀ · v`, accumulated into `out`.
    pub fn matvec_transposed_add(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        for (r, &vr) in v.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.row(r)) {
                *o += a * vr;
            }
        }
    }

    /// `self += scale · u vᵀ`.
    pub fn add_outer(&mut self, u: &[f64], v: &[f64], scale: f64) {
        debug_assert_eq!(u.len(), self.rows);
        debug_assert_eq!(v.len(), self.cols);
        for (r, &ur) in u.iter().enumerate() {
            let s = scale * ur;
            for (x, &vc) in self.row_mut(r).iter_mut().zip(v) {
                *x += s * vc;
            }
        }
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, k: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * k).collect(),
        }
    }

    pub fn hadamard(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn squared_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }

    fn zip_with(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        if self.shape() != other.shape() {
            return Err(Error::Argument(format!(
                "shape mismatch: {:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

/// Standard product with a fixed `k`-ascending summation order per entry.
pub fn matmul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols != b.rows {
        return Err(Error::Argument(format!(
            "matmul dimension mismatch: {}x{} times {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    let mut out = Matrix::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        for j in 0..b.cols {
            let mut acc = 0.0;
            for k in 0..a.cols {
                acc += a.data[i * a.cols + k] * b.data[k * b.cols + j];
            }
            out.data[i * b.cols + j] = acc;
        }
    }
    Ok(out)
}

/// A square matrix constrained to a block-diagonal layout, stored as its
/// dense diagonal blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockDiagonal {
    blocks: Vec<Matrix>,
}

impl BlockDiagonal {
    pub fn new(blocks: Vec<Matrix>) -> Result<Self> {
        let Some(first) = blocks.first() else {
            return Err(Error::Argument("block-diagonal matrix needs at least one block".into()));
        };
        let b = first.rows();
        if blocks.iter().any(|m| m.shape() != (b, b)) {
            return Err(Error::Argument("blocks must be square and equally sized".into()));
        }
        Ok(BlockDiagonal { blocks })
    }

    pub fn zeros(dim: usize, block_size: usize) -> Self {
        BlockDiagonal {
            blocks: (0..dim / block_size)
                .map(|_| Matrix::zeros(block_size, block_size))
                .collect(),
        }
    }

    pub fn block_size(&self) -> usize {
        self.blocks[0].rows()
    }

    pub fn dim(&self) -> usize {
        self.blocks.len() * self.block_size()
    }

    pub fn blocks(&self) -> &[Matrix] {
        &self.blocks
    }

    pub fn blocks_mut(&mut self) -> &mut [Matrix] {
        &mut self.blocks
    }

    /// Number of free parameters: (dim / block_size) · block_size².
    pub fn param_count(&self) -> usize {
        self.blocks.len() * self.block_size() * self.block_size()
    }

    pub fn to_dense(&self) -> Matrix {
        let b = self.block_size();
        let n = self.dim();
        let mut m = Matrix::zeros(n, n);
        for (k, block) in self.blocks.iter().enumerate() {
            for r in 0..b {
                for c in 0..b {
                    m.set(k * b + r, k * b + c, block.get(r, c));
                }
            }
        }
        m
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        self.apply_add(v, 1.0, &mut out);
        out
    }

    /// `out += scale · (B v)`.
    pub fn apply_add(&self, v: &[f64], scale: f64, out: &mut [f64]) {
        let b = self.block_size();
        debug_assert_eq!(v.len(), self.dim());
        for (k, block) in self.blocks.iter().enumerate() {
            let vin = &v[k * b..(k + 1) * b];
            for r in 0..b {
                out[k * b + r] += scale * dot(block.row(r), vin);
            }
        }
    }

    /// `out += Bᵀ v`.
    pub fn apply_transposed_add(&self, v: &[f64], out: &mut [f64]) {
        let b = self.block_size();
        for (k, block) in self.blocks.iter().enumerate() {
            block.matvec_transposed_add(&v[k * b..(k + 1) * b], &mut out[k * b..(k + 1) * b]);
        }
    }

    /// `self += scale · u vᵀ` restricted to the diagonal blocks.
    pub fn add_outer(&mut self, u: &[f64], v: &[f64], scale: f64) {
        let b = self.block_size();
        for (k, block) in self.blocks.iter_mut().enumerate() {
            block.add_outer(&u[k * b..(k + 1) * b], &v[k * b..(k + 1) * b], scale);
        }
    }
}

/// Multiply `v` by the block-diagonal matrix whose diagonal blocks are `blocks`.
pub fn block_diag_apply(blocks: &[Matrix], v: &[f64]) -> Result<Vec<f64>> {
    let bd = BlockDiagonal::new(blocks.to_vec())?;
    if v.len() != bd.dim() {
        return Err(Error::Argument(format!(
            "vector length {} does not match block-diagonal dimension {}",
            v.len(),
            bd.dim()
        )));
    }
    Ok(bd.apply(v))
}

/// Seeded ChaCha8 stream. Integer draws go through `u64` so the sequence does
/// not depend on the platform's pointer width.
#[derive(Debug, Clone)]
pub struct Rng {
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn seed_from_u64(seed: u64) -> Self {
        Rng {
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Uniform on [0, 1) with 53 random mantissa bits.
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `0..n`. `n` must be positive.
    pub fn below(&mut self, n: usize) -> usize {
        self.inner.gen_range(0..n as u64) as usize
    }

    pub fn coin(&mut self) -> bool {
        self.inner.next_u32() & 1 == 1
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Derive an independent generator; advances `self` by one draw.
    pub fn fork(&mut self) -> Rng {
        Rng::seed_from_u64(self.next_u64())
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

/// Uniform Glorot/Xavier initialization on ±√(6 / (rows + cols)).
pub fn glorot_init(rows: usize, cols: usize, rng: &mut Rng) -> Matrix {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| rng.uniform_range(-limit, limit))
        .collect();
    Matrix { rows, cols, data }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// log σ(x) = min(x, 0) − ln(1 + e^{−|x|}).
#[inline]
pub fn log_sigmoid(x: f64) -> f64 {
    x.min(0.0) - (-x.abs()).exp().ln_1p()
}

#[inline]
pub fn relu(x: f64) -> f64 {
    x.max(0.0)
}

/// Inverted-dropout mask: each entry is 0 with probability `rate`, otherwise
/// `1 / (1 − rate)`.
pub fn dropout_mask(rows: usize, cols: usize, rate: f64, rng: &mut Rng) -> Result<Matrix> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Argument(format!("dropout rate {rate} outside [0, 1)")));
    }
    if rate == 0.0 {
        return Ok(Matrix::filled(rows, cols, 1.0));
    }
    let keep = 1.0 / (1.0 - rate);
    let data = (0..rows * cols)
        .map(|_| if rng.uniform() < rate { 0.0 } else { keep })
        .collect();
    Ok(Matrix { rows, cols, data })
}

/// Central differences `(f(x + h eᵢ) − f(x − h eᵢ)) / 2h` for every coordinate.
pub fn finite_diff_gradient<F>(mut f: F, x: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let orig = probe[i];
        probe[i] = orig + h;
        let plus = f(&probe);
        probe[i] = orig - h;
        let minus = f(&probe);
        probe[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite function value while differencing coordinate {i}"
            )));
        }
        grad.push((plus - minus) / (2.0 * h));
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_matmul(a: &Matrix, b: &Matrix) -> Matrix {
        let mut out = vec![vec![0.0; b.cols()]; a.rows()];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, x) in row.iter_mut().enumerate() {
                let mut acc = 0.0;
                for k in 0..a.cols() {
                    acc += a.get(i, k) * b.get(k, j);
                }
                *x = acc;
            }
        }
        Matrix::from_rows(&out).unwrap()
    }

    #[test]
    fn identity_times_matrix() {
        let m = Matrix::from_rows(&[vec![1.5, -2.0], vec![0.25, 7.0]]).unwrap();
        assert_eq!(Matrix::identity(2).matmul(&m).unwrap(), m);
    }

    #[test]
    fn matmul_hand_computed() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let b = Matrix::from_rows(&[vec![1.0], vec![1.0]]).unwrap();
        let c = a.matmul(&b).unwrap();
        assert_eq!(c, Matrix::from_rows(&[vec![3.0], vec![7.0]]).unwrap());
    }

    #[test]
    fn matmul_matches_triple_loop_bitwise() {
        let mut rng = Rng::seed_from_u64(3);
        let a = glorot_init(5, 4, &mut rng);
        let b = glorot_init(4, 3, &mut rng);
        let fast = a.matmul(&b).unwrap();
        let slow = naive_matmul(&a, &b);
        for (x, y) in fast.data().iter().zip(slow.data()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn matmul_rejects_mismatch() {
        let a = Matrix::zeros(2, 3);
        let b = Matrix::zeros(2, 3);
        assert!(matches!(a.matmul(&b), Err(Error::Argument(_))));
    }

    #[test]
    fn glorot_bounds_and_determinism() {
        let mut r1 = Rng::seed_from_u64(11);
        let mut r2 = Rng::seed_from_u64(11);
        let a = glorot_init(3, 3, &mut r1);
        let b = glorot_init(3, 3, &mut r2);
        assert_eq!(a, b);
        assert!(a.data().iter().all(|x| (-1.0..=1.0).contains(x)));
    }

    #[test]
    fn glorot_mean_within_three_sigma() {
        let mut rng = Rng::seed_from_u64(5);
        let m = glorot_init(100, 100, &mut rng);
        let n = m.data().len() as f64;
        let limit = (6.0f64 / 200.0).sqrt();
        // variance of U(-a, a) is a²/3
        let sigma = (limit * limit / 3.0 / n).sqrt();
        let mean = m.data().iter().sum::<f64>() / n;
        assert!(mean.abs() < 3.0 * sigma, "mean {mean} sigma {sigma}");
    }

    #[test]
    fn finite_diff_of_square() {
        let g = finite_diff_gradient(|x| x[0] * x[0], &[3.0], 1e-5).unwrap();
        assert!((g[0] - 6.0).abs() < 1e-8);
    }

    #[test]
    fn finite_diff_of_constant() {
        let g = finite_diff_gradient(|_| 4.2, &[1.0, -2.0, 0.5], 1e-5).unwrap();
        assert_eq!(g, vec![0.0; 3]);
    }

    #[test]
    fn finite_diff_reports_non_finite() {
        let err = finite_diff_gradient(|x| 1.0 / x[0], &[0.0], 0.0).unwrap_err();
        assert!(matches!(err, Error::Numeric(_)));
    }

    #[test]
    fn log_sigmoid_is_stable() {
        for x in [-700.0, -50.0, -1.0, 0.0, 1.0, 50.0, 700.0] {
            let v = log_sigmoid(x);
            assert!(v.is_finite(), "x = {x}");
            assert!(v <= 0.0);
        }
        assert!((log_sigmoid(0.0) + std::f64::consts::LN_2).abs() < 1e-15);
        assert!((log_sigmoid(-700.0) + 700.0).abs() < 1e-9);
        assert!((sigmoid(0.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn dropout_rate_zero_is_identity() {
        let mut rng = Rng::seed_from_u64(1);
        let m = dropout_mask(4, 5, 0.0, &mut rng).unwrap();
        assert!(m.data().iter().all(|&x| x == 1.0));
    }

    #[test]
    fn dropout_preserves_mean() {
        let mut rng = Rng::seed_from_u64(9);
        let m = dropout_mask(200, 100, 0.2, &mut rng).unwrap();
        let mean = m.data().iter().sum::<f64>() / m.data().len() as f64;
        // per-entry std is sqrt(rate/(1-rate)) = 0.5; 3 sigma over 2e4 samples
        assert!((mean - 1.0).abs() < 3.0 * 0.5 / (2e4f64).sqrt());
        assert!(m.data().iter().all(|&x| x == 0.0 || x == 1.25));
    }

    #[test]
    fn dropout_rejects_bad_rate() {
        let mut rng = Rng::seed_from_u64(1);
        assert!(dropout_mask(1, 1, 1.0, &mut rng).is_err());
    }

    #[test]
    fn block_diag_matches_dense() {
        let mut rng = Rng::seed_from_u64(21);
        let blocks: Vec<Matrix> = (0..3).map(|_| glorot_init(2, 2, &mut rng)).collect();
        let v: Vec<f64> = (0..6).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
        let fast = block_diag_apply(&blocks, &v).unwrap();
        let dense = BlockDiagonal::new(blocks).unwrap().to_dense();
        let slow = dense.matvec(&v);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() <= 4.0 * f64::EPSILON * b.abs().max(f64::MIN_POSITIVE));
        }
    }

    #[test]
    fn block_diag_param_count() {
        let bd = BlockDiagonal::zeros(100, 10);
        assert_eq!(bd.param_count(), 100 * 10);
        assert!(bd.param_count() < 100 * 100);
    }

    #[test]
    fn elementwise_ops() {
        let a = Matrix::from_rows(&[vec![1.0, -2.0]]).unwrap();
        let b = Matrix::from_rows(&[vec![0.5, 4.0]]).unwrap();
        assert_eq!(a.add(&b).unwrap().data(), &[1.5, 2.0]);
        assert_eq!(a.sub(&b).unwrap().data(), &[0.5, -6.0]);
        assert_eq!(a.scale(2.0).data(), &[2.0, -4.0]);
        assert_eq!(a.map(relu).data(), &[1.0, 0.0]);
        assert!(a.add(&Matrix::zeros(2, 1)).is_err());
    }

    #[test]
    fn rng_below_in_range() {
        let mut rng = Rng::seed_from_u64(0);
        for _ in 0..1000 {
            assert!(rng.below(7) < 7);
            let u = rng.uniform();
            assert!((0.0..1.0).contains(&u));
        }
    }
}
