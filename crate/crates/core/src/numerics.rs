//! Dense linear algebra and order statistics used by the trainer and the
//! selection harness.
//!
//! Everything here is a pure function of its inputs. The matrix type is a
//! plain row-major buffer; only the handful of products the Levenberg-Marquardt
//! loop needs are provided.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{Index, IndexMut};

use num_traits::{Float, FromPrimitive, ToPrimitive};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Floating-point scalar the numerical core is generic over.
///
/// Implemented for `f32` and `f64`. The rest of the crate works in `f64`
/// (see the aliases at the crate root); `f32` is supported for experiments
/// but the normal equations square the condition number, so expect trouble
/// on anything but small well-scaled problems.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericsError {
    #[error("matrix is not positive definite (pivot {pivot} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is not symmetric: |a[{row}][{col}] - a[{col}][{row}]| = {gap}")]
    NotSymmetric { row: usize, col: usize, gap: f64 },
    #[error("empty data")]
    EmptyData,
    #[error("quantile level {0} outside [0, 1]")]
    QOutOfRange(f64),
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    entries: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, entries: Vec<T>) -> Result<Self, NumericsError> {
        if entries.len() != rows * cols {
            return Err(NumericsError::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                entries.len()
            )));
        }
        Ok(Self { rows, cols, entries })
    }

    /// Builds a matrix from equal-length rows.
    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self, NumericsError> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut entries = Vec::with_capacity(rows.len() * cols);
        for (k, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(NumericsError::DimensionMismatch(format!(
                    "row {k} has {} entries, expected {cols}",
                    r.len()
                )));
            }
            entries.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            entries,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &[T] {
        &self.entries
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.entries[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [T] {
        &mut self.entries[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<T> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    /// New matrix holding the given rows, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut entries = Vec::with_capacity(indices.len() * self.cols);
        for &r in indices {
            entries.extend_from_slice(self.row(r));
        }
        Self {
            rows: indices.len(),
            cols: self.cols,
            entries,
        }
    }

    /// New matrix holding the given columns, in the given order.
    pub fn select_columns(&self, indices: &[usize]) -> Self {
        let mut entries = Vec::with_capacity(indices.len() * self.rows);
        for r in 0..self.rows {
            let row = self.row(r);
            entries.extend(indices.iter().map(|&c| row[c]));
        }
        Self {
            rows: self.rows,
            cols: indices.len(),
            entries,
        }
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> DenseMatrix<U> {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(|x| x.is_finite())
    }

    pub fn mul_vec(&self, x: &[T]) -> Result<Vec<T>, NumericsError> {
        if x.len() != self.cols {
            return Err(NumericsError::DimensionMismatch(format!(
                "vector of length {} against {} columns",
                x.len(),
                self.cols
            )));
        }
        Ok((0..self.rows)
            .map(|r| dot(self.row(r), x))
            .collect())
    }

    /// `Aᵀ·v` without materialising the transpose.
    pub fn transpose_mul_vec(&self, v: &[T]) -> Result<Vec<T>, NumericsError> {
        if v.len() != self.rows {
            return Err(NumericsError::DimensionMismatch(format!(
                "vector of length {} against {} rows",
                v.len(),
                self.rows
            )));
        }
        let mut out = vec![T::zero(); self.cols];
        for (r, &vr) in v.iter().enumerate() {
            if vr == T::zero() {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.row(r)) {
                *o = *o + a * vr;
            }
        }
        Ok(out)
    }

    /// Gram matrix `AᵀA`. The result is exactly symmetric: the upper triangle
    /// is accumulated and mirrored.
    pub fn gram(&self) -> Self {
        let n = self.cols;
        let mut g = Self::zeros(n, n);
        for r in 0..self.rows {
            let row = self.row(r);
            for i in 0..n {
                let ai = row[i];
                if ai == T::zero() {
                    continue;
                }
                let gi = &mut g.entries[i * n..(i + 1) * n];
                for j in i..n {
                    gi[j] = gi[j] + ai * row[j];
                }
            }
        }
        for i in 0..n {
            for j in 0..i {
                g.entries[i * n + j] = g.entries[j * n + i];
            }
        }
        g
    }

    /// Adds `value` to every diagonal entry in place.
    pub fn add_diagonal(&mut self, value: T) {
        for i in 0..self.rows.min(self.cols) {
            self[(i, i)] = self[(i, i)] + value;
        }
    }
}

impl<T> Index<(usize, usize)> for DenseMatrix<T> {
    type Output = T;
    fn index(&self, (r, c): (usize, usize)) -> &T {
        debug_assert!(r < self.rows && c < self.cols);
        &self.entries[r * self.cols + c]
    }
}

impl<T> IndexMut<(usize, usize)> for DenseMatrix<T> {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut T {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.entries[r * self.cols + c]
    }
}

pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Solves `A·x = b` for symmetric positive-definite `A` by Cholesky
/// factorisation.
///
/// A non-positive (or non-finite) pivot is reported as
/// [`NumericsError::NotPositiveDefinite`] rather than regularised away; the
/// LM loop reacts by raising its damping.
pub fn solve_spd<T: Scalar>(a: &DenseMatrix<T>, b: &[T]) -> Result<Vec<T>, NumericsError> {
    let n = a.rows();
    if a.cols() != n {
        return Err(NumericsError::DimensionMismatch(format!(
            "{}x{} matrix is not square",
            a.rows(),
            a.cols()
        )));
    }
    if b.len() != n {
        return Err(NumericsError::DimensionMismatch(format!(
            "right-hand side of length {} for a {n}x{n} system",
            b.len()
        )));
    }
    let tol = T::of(1e-9);
    for i in 0..n {
        for j in 0..i {
            let gap = (a[(i, j)] - a[(j, i)]).abs();
            if gap > tol || gap.is_nan() {
                return Err(NumericsError::NotSymmetric {
                    row: i,
                    col: j,
                    gap: gap.as_f64(),
                });
            }
        }
    }

    // Lower factor L, row-major, A = L·Lᵀ.
    let mut l = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..=i {
            let s = a[(i, j)] - dot(&l[i * n..i * n + j], &l[j * n..j * n + j]);
            if i == j {
                if !(s > T::zero()) || !s.is_finite() {
                    return Err(NumericsError::NotPositiveDefinite {
                        row: i,
                        pivot: s.as_f64(),
                    });
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }

    // Forward substitution L·y = b, then back substitution Lᵀ·x = y.
    let mut y = vec![T::zero(); n];
    for i in 0..n {
        let s = b[i] - dot(&l[i * n..i * n + i], &y[..i]);
        y[i] = s / l[i * n + i];
    }
    let mut x = vec![T::zero(); n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s = s - l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    Ok(x)
}

fn sorted_copy<T: Scalar>(data: &[T]) -> Vec<T> {
    let mut d = data.to_vec();
    d.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    d
}

fn quantile_sorted<T: Scalar>(sorted: &[T], q: f64) -> T {
    let n = sorted.len();
    let h = (n - 1) as f64 * q;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if frac == 0.0 || lo + 1 >= n {
        return sorted[lo.min(n - 1)];
    }
    let (a, b) = (sorted[lo], sorted[lo + 1]);
    // Equal neighbours must not pass through `inf - inf`.
    if a == b {
        return a;
    }
    a + T::of(frac) * (b - a)
}

/// Linear-interpolation quantile between order statistics: with sorted data
/// `d` and `h = (n-1)·q`, returns `d[⌊h⌋] + (h-⌊h⌋)·(d[⌊h⌋+1] - d[⌊h⌋])`.
pub fn quantile<T: Scalar>(data: &[T], q: f64) -> Result<T, NumericsError> {
    if data.is_empty() {
        return Err(NumericsError::EmptyData);
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(NumericsError::QOutOfRange(q));
    }
    Ok(quantile_sorted(&sorted_copy(data), q))
}

/// Five-number summary with Tukey whiskers at 1.5 interquartile ranges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxStats<T> {
    pub minimum: T,
    pub q1: T,
    pub median: T,
    pub q3: T,
    pub maximum: T,
    pub whisker_low: T,
    pub whisker_high: T,
    pub outliers: Vec<T>,
}

pub fn box_stats<T: Scalar>(data: &[T]) -> Result<BoxStats<T>, NumericsError> {
    if data.is_empty() {
        return Err(NumericsError::EmptyData);
    }
    let sorted = sorted_copy(data);
    let q1 = quantile_sorted(&sorted, 0.25);
    let median = quantile_sorted(&sorted, 0.5);
    let q3 = quantile_sorted(&sorted, 0.75);
    let reach = T::of(1.5) * (q3 - q1);
    let (fence_low, fence_high) = (q1 - reach, q3 + reach);
    let inside = |x: &T| *x >= fence_low && *x <= fence_high;
    // A whisker never reaches inside the box: with no datum between a fence
    // and its quartile the whisker sits on the quartile.
    let whisker_low = sorted.iter().copied().find(inside).map_or(q1, |w| w.min(q1));
    let whisker_high = sorted.iter().rev().copied().find(inside).map_or(q3, |w| w.max(q3));
    let outliers = sorted
        .iter()
        .copied()
        .filter(|x| *x < whisker_low || *x > whisker_high)
        .collect();
    Ok(BoxStats {
        minimum: sorted[0],
        q1,
        median,
        q3,
        maximum: sorted[sorted.len() - 1],
        whisker_low,
        whisker_high,
        outliers,
    })
}

/// Mixes a master seed and a stream index into a child seed.
///
/// The master is scrambled once, then offset by `(index + 1)·φ` where φ is the
/// odd 64-bit golden-ratio constant, then passed through the SplitMix64
/// finaliser. Both steps are bijections on `u64`, so for a fixed master every
/// index yields a distinct seed.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
    let base = splitmix_finalize(master ^ 0x5851_F42D_4C95_7F2D);
    splitmix_finalize(base.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN)))
}

fn splitmix_finalize(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// An addressable pseudo-random stream: `(master_seed, stream_index)` fully
/// determines the sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedStream {
    pub master_seed: u64,
    pub stream_index: u64,
}

impl SeedStream {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        Self {
            master_seed,
            stream_index,
        }
    }

    pub fn seed(&self) -> u64 {
        derive_seed(self.master_seed, self.stream_index)
    }

    pub fn rng(&self) -> ChaCha8Rng {
        seeded_rng(self.seed())
    }
}

/// The one generator used across the crate.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
