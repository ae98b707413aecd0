//! Dense complex linear algebra sized for transport problems.
//!
//! Matrices are small (dimension at most a few hundred), dense, and stored
//! row-major as [`num_complex::Complex64`]. The module provides the exact
//! kernel set the rest of the crate needs: Hermitian eigendecomposition
//! ([`eigh`]), spectral functions ([`matrix_function`]), Kronecker products,
//! partial traces over arbitrary tensor factors, and the Schatten-1 and
//! operator norms. Factor 0 of a tensor product is always the leftmost
//! (most significant) index.

mod eigh;

pub use eigh::{eigh, HermitianEig};

use crate::error::{Error, Result};
use num_complex::Complex64;

/// Maximum allowed entrywise deviation from the adjoint for Hermitian input.
pub const HERMITIAN_TOL: f64 = 1e-9;

/// Eigenvalues above this negative floor are clamped to zero by PSD spectral
/// functions; anything below is an error.
pub const NEG_EIG_TOL: f64 = 1e-9;

/// Dense complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    /// Zero matrix of the given shape.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![Complex64::new(0.0, 0.0); rows * cols] }
    }

    /// Identity matrix of dimension `n`.
    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = Complex64::new(1.0, 0.0);
        }
        m
    }

    /// Builds a matrix from a row-major entry vector.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch {
                reason: format!("{}x{} matrix needs {} entries, got {}", rows, cols, rows * cols, data.len()),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from real row-major entries.
    pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        let cx = data.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        Self::from_vec(rows, cols, cx)
    }

    /// Diagonal matrix with the given real diagonal.
    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = Complex64::new(diag[i], 0.0);
        }
        m
    }

    /// Elementary matrix with a single 1 at `(i, j)`.
    pub fn unit(dim: usize, i: usize, j: usize) -> Self {
        let mut m = Self::zeros(dim, dim);
        m.data[i * dim + j] = Complex64::new(1.0, 0.0);
        m
    }

    /// Outer product `u v^dagger`.
    pub fn outer(u: &[Complex64], v: &[Complex64]) -> Self {
        let mut m = Self::zeros(u.len(), v.len());
        for i in 0..u.len() {
            for j in 0..v.len() {
                m.data[i * v.len() + j] = u[i] * v[j].conj();
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Dimension of a square matrix.
    pub fn dim(&self) -> usize {
        debug_assert!(self.is_square());
        self.rows
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn add_at(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.cols + j] += v;
    }

    /// Entrywise sum.
    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Self { rows: self.rows, cols: self.cols, data }
    }

    /// Entrywise difference.
    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Self { rows: self.rows, cols: self.cols, data }
    }

    /// Scalar multiple.
    pub fn scale(&self, s: Complex64) -> Self {
        let data = self.data.iter().map(|a| a * s).collect();
        Self { rows: self.rows, cols: self.cols, data }
    }

    /// Real scalar multiple.
    pub fn scale_re(&self, s: f64) -> Self {
        self.scale(Complex64::new(s, 0.0))
    }

    /// Matrix product `self * other`.
    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let (n, k, m) = (self.rows, self.cols, other.cols);
        let mut out = Self::zeros(n, m);
        for i in 0..n {
            for p in 0..k {
                let a = self.data[i * k + p];
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                let row = &other.data[p * m..(p + 1) * m];
                let dst = &mut out.data[i * m..(i + 1) * m];
                for j in 0..m {
                    dst[j] += a * row[j];
                }
            }
        }
        out
    }

    /// Matrix-vector product.
    pub fn matvec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(self.cols, v.len(), "matvec shape mismatch");
        let mut out = vec![Complex64::new(0.0, 0.0); self.rows];
        for i in 0..self.rows {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..self.cols {
                acc += row[j] * v[j];
            }
            out[i] = acc;
        }
        out
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j].conj();
            }
        }
        out
    }

    /// Entrywise transpose without conjugation.
    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    /// Entrywise complex conjugate.
    pub fn conj(&self) -> Self {
        let data = self.data.iter().map(|a| a.conj()).collect();
        Self { rows: self.rows, cols: self.cols, data }
    }

    /// Trace of a square matrix.
    pub fn trace(&self) -> Complex64 {
        debug_assert!(self.is_square());
        (0..self.rows).map(|i| self.data[i * self.cols + i]).sum()
    }

    /// Real part of `tr(self * other)` for same-dimension square factors.
    pub fn trace_product_re(&self, other: &Self) -> f64 {
        assert_eq!(self.cols, other.rows);
        assert_eq!(self.rows, other.cols);
        let mut acc = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self.data[i * self.cols + j];
                let b = other.data[j * other.cols + i];
                acc += a.re * b.re - a.im * b.im;
            }
        }
        acc
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|a| a.norm()).fold(0.0, f64::max)
    }

    /// Frobenius norm.
    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest entry magnitude of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Checks Hermiticity within an entrywise tolerance.
    pub fn is_hermitian(&self, tol: f64) -> bool {
        if !self.is_square() {
            return false;
        }
        let n = self.rows;
        for i in 0..n {
            for j in i..n {
                if (self.data[i * n + j] - self.data[j * n + i].conj()).norm() > tol {
                    return false;
                }
            }
        }
        true
    }

    /// Hermitian part `(A + A^dagger) / 2`.
    pub fn hermitize(&self) -> Self {
        self.add(&self.dagger()).scale_re(0.5)
    }

    /// Kronecker product with `other`; `self` is the leftmost factor.
    pub fn kron(&self, other: &Self) -> Self {
        kron(self, other)
    }

    /// Hermitian eigendecomposition; see [`eigh`].
    pub fn eigh(&self) -> Result<HermitianEig> {
        eigh(self)
    }
}

/// Kronecker product `a (x) b`. Factor `a` is the leftmost (most significant)
/// index: entry `((i1*rb + i2), (j1*cb + j2))` equals `a[i1,j1] * b[i2,j2]`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (ra, ca) = (a.rows, a.cols);
    let (rb, cb) = (b.rows, b.cols);
    let mut out = ComplexMatrix::zeros(ra * rb, ca * cb);
    for i1 in 0..ra {
        for j1 in 0..ca {
            let av = a.data[i1 * ca + j1];
            if av.norm_sqr() == 0.0 {
                continue;
            }
            for i2 in 0..rb {
                for j2 in 0..cb {
                    out.data[(i1 * rb + i2) * (ca * cb) + (j1 * cb + j2)] = av * b.data[i2 * cb + j2];
                }
            }
        }
    }
    out
}

/// Shape of a tensor-product space: the list of factor dimensions, leftmost
/// factor first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactorShape {
    dims: Vec<usize>,
}

impl FactorShape {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() || dims.iter().any(|&d| d == 0) {
            return Err(Error::ShapeMismatch { reason: "factor dimensions must be positive".into() });
        }
        Ok(Self { dims })
    }

    /// Shape of `n` qubits.
    pub fn qubits(n: usize) -> Self {
        Self { dims: vec![2; n.max(1)] }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn n_factors(&self) -> usize {
        self.dims.len()
    }

    /// Total dimension (product of factor dimensions).
    pub fn total(&self) -> usize {
        self.dims.iter().product()
    }

    /// Shape left after removing the listed factors.
    pub fn without(&self, traced: &[usize]) -> Result<Self> {
        let kept: Vec<usize> = (0..self.dims.len()).filter(|i| !traced.contains(i)).map(|i| self.dims[i]).collect();
        if kept.is_empty() {
            Ok(Self { dims: vec![1] })
        } else {
            Self::new(kept)
        }
    }
}

/// Partial trace of `m` over the factors listed in `traced` (0-based, leftmost
/// factor 0). The result keeps the remaining factors in their original order.
pub fn partial_trace(m: &ComplexMatrix, shape: &FactorShape, traced: &[usize]) -> Result<ComplexMatrix> {
    let n = shape.n_factors();
    if !m.is_square() || m.rows() != shape.total() {
        return Err(Error::ShapeMismatch {
            reason: format!("matrix dimension {} does not match factor shape {:?}", m.rows(), shape.dims()),
        });
    }
    let mut seen = vec![false; n];
    for &t in traced {
        if t >= n {
            return Err(Error::ShapeMismatch { reason: format!("traced factor {} out of range (n = {})", t, n) });
        }
        if seen[t] {
            return Err(Error::ShapeMismatch { reason: format!("factor {} traced twice", t) });
        }
        seen[t] = true;
    }

    // Strides in the flat index, leftmost factor most significant.
    let mut strides = vec![1usize; n];
    for f in (0..n.saturating_sub(1)).rev() {
        strides[f] = strides[f + 1] * shape.dims[f + 1];
    }
    let kept: Vec<usize> = (0..n).filter(|f| !seen[*f]).collect();
    let kdim: usize = kept.iter().map(|&f| shape.dims[f]).product::<usize>().max(1);
    let tlist: Vec<usize> = (0..n).filter(|f| seen[*f]).collect();
    let tdim: usize = tlist.iter().map(|&f| shape.dims[f]).product::<usize>().max(1);

    // Base offsets contributed by each kept / traced multi-index.
    let base_offsets = |factors: &[usize], count: usize| -> Vec<usize> {
        let mut offsets = vec![0usize; count];
        for idx in 0..count {
            let mut rem = idx;
            let mut off = 0;
            for &f in factors.iter().rev() {
                let d = shape.dims[f];
                off += (rem % d) * strides[f];
                rem /= d;
            }
            offsets[idx] = off;
        }
        offsets
    };
    let koff = base_offsets(&kept, kdim);
    let toff = base_offsets(&tlist, tdim);

    let full = m.rows();
    let mut out = ComplexMatrix::zeros(kdim, kdim);
    for a in 0..kdim {
        for b in 0..kdim {
            let mut acc = Complex64::new(0.0, 0.0);
            for t in 0..tdim {
                acc += m.data[(koff[a] + toff[t]) * full + (koff[b] + toff[t])];
            }
            out.data[a * kdim + b] = acc;
        }
    }
    Ok(out)
}

/// Applies a real scalar function to the spectrum of a Hermitian matrix.
///
/// With `clamp_negative`, eigenvalues in `[-NEG_EIG_TOL, 0)` are treated as 0
/// before applying `f` (suitable for PSD functions like the square root), and
/// eigenvalues below `-NEG_EIG_TOL` are an error. Non-finite function values
/// are rejected.
pub fn matrix_function(m: &ComplexMatrix, f: impl Fn(f64) -> f64, clamp_negative: bool) -> Result<ComplexMatrix> {
    let eig = eigh(m)?;
    let n = m.dim();
    let mut mapped = Vec::with_capacity(n);
    for &lam in &eig.values {
        let x = if clamp_negative {
            if lam < -NEG_EIG_TOL {
                return Err(Error::NegativeEigenvalue { value: lam });
            }
            lam.max(0.0)
        } else {
            lam
        };
        let y = f(x);
        if !y.is_finite() {
            return Err(Error::DomainError { eigenvalue: x });
        }
        mapped.push(y);
    }
    Ok(reconstruct(&eig.vectors, &mapped))
}

/// `V diag(vals) V^dagger` for a column-eigenvector matrix `V`.
pub fn reconstruct(vectors: &ComplexMatrix, vals: &[f64]) -> ComplexMatrix {
    let n = vectors.rows();
    let mut out = ComplexMatrix::zeros(n, n);
    for (k, &lam) in vals.iter().enumerate() {
        if lam == 0.0 {
            continue;
        }
        for i in 0..n {
            let vi = vectors.get(i, k);
            if vi.norm_sqr() == 0.0 {
                continue;
            }
            for j in 0..n {
                let vj = vectors.get(j, k).conj();
                out.add_at(i, j, vi * vj * lam);
            }
        }
    }
    out
}

/// Principal square root of a positive semidefinite Hermitian matrix.
pub fn sqrt_psd(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    matrix_function(m, f64::sqrt, true)
}

/// Schatten-1 (trace) norm. Hermitian input uses its eigenvalues; general
/// square input falls back to singular values via `A^dagger A`.
pub fn trace_norm(m: &ComplexMatrix) -> Result<f64> {
    if m.is_square() && m.is_hermitian(HERMITIAN_TOL) {
        let eig = eigh(m)?;
        Ok(eig.values.iter().map(|v| v.abs()).sum())
    } else {
        let gram = m.dagger().matmul(m);
        let eig = eigh(&gram.hermitize())?;
        Ok(eig.values.iter().map(|v| v.max(0.0).sqrt()).sum())
    }
}

/// Operator norm of a Hermitian matrix: the largest eigenvalue magnitude.
pub fn operator_norm(m: &ComplexMatrix) -> Result<f64> {
    let eig = eigh(m)?;
    Ok(eig.values.iter().map(|v| v.abs()).fold(0.0, f64::max))
}

/// Orthonormal Hermitian basis of the d-dimensional matrix space
/// (d^2 elements): diagonal units, then real and imaginary off-diagonal pairs.
pub fn hermitian_basis(d: usize) -> Vec<ComplexMatrix> {
    let mut basis = Vec::with_capacity(d * d);
    for k in 0..d {
        basis.push(ComplexMatrix::unit(d, k, k));
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for k in 0..d {
        for l in (k + 1)..d {
            let mut re = ComplexMatrix::zeros(d, d);
            re.set(k, l, Complex64::new(s, 0.0));
            re.set(l, k, Complex64::new(s, 0.0));
            basis.push(re);
            let mut im = ComplexMatrix::zeros(d, d);
            im.set(k, l, Complex64::new(0.0, -s));
            im.set(l, k, Complex64::new(0.0, s));
            basis.push(im);
        }
    }
    basis
}

/// Orthonormal basis of the traceless Hermitian matrices in dimension d
/// (d^2 - 1 elements): generalized diagonal differences plus the off-diagonal
/// pairs of [`hermitian_basis`].
pub fn traceless_hermitian_basis(d: usize) -> Vec<ComplexMatrix> {
    let mut basis = Vec::with_capacity(d * d - 1);
    for k in 1..d {
        // diag(1, .., 1, -k, 0, ..) / sqrt(k + k^2): traceless, unit norm.
        let mut diag = vec![0.0; d];
        let norm = ((k + k * k) as f64).sqrt();
        for j in 0..k {
            diag[j] = 1.0 / norm;
        }
        diag[k] = -(k as f64) / norm;
        basis.push(ComplexMatrix::from_diagonal(&diag));
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for k in 0..d {
        for l in (k + 1)..d {
            let mut re = ComplexMatrix::zeros(d, d);
            re.set(k, l, Complex64::new(s, 0.0));
            re.set(l, k, Complex64::new(s, 0.0));
            basis.push(re);
            let mut im = ComplexMatrix::zeros(d, d);
            im.set(k, l, Complex64::new(0.0, -s));
            im.set(l, k, Complex64::new(0.0, s));
            basis.push(im);
        }
    }
    basis
}

/// Lifts an operator on the space with factor `site` removed to the full
/// space, acting as the identity on that factor.
pub fn lift_with_identity(op: &ComplexMatrix, shape: &FactorShape, site: usize) -> Result<ComplexMatrix> {
    let n = shape.n_factors();
    if site >= n {
        return Err(Error::ShapeMismatch { reason: format!("site {} out of range (n = {})", site, n) });
    }
    let rest = shape.without(&[site])?;
    if op.rows() != rest.total() || !op.is_square() {
        return Err(Error::ShapeMismatch {
            reason: format!("operator dimension {} does not match remaining factors {:?}", op.rows(), rest.dims()),
        });
    }
    // Build as I_pre (x) op ... requires op to factor across the gap, so do it
    // by index arithmetic instead: the full entry is op on the non-site digits
    // and a Kronecker delta on the site digit.
    let dims = shape.dims();
    let full = shape.total();
    let site_dim = dims[site];
    let below: usize = dims[site + 1..].iter().product::<usize>().max(1);
    let mut out = ComplexMatrix::zeros(full, full);
    let split = |x: usize| -> (usize, usize) {
        // digit at `site` and the flat index of the remaining digits.
        let low = x % below;
        let mid = (x / below) % site_dim;
        let high = x / (below * site_dim);
        (mid, high * below + low)
    };
    for x in 0..full {
        let (sx, rx) = split(x);
        for y in 0..full {
            let (sy, ry) = split(y);
            if sx == sy {
                let v = op.get(rx, ry);
                if v.norm_sqr() != 0.0 {
                    out.set(x, y, v);
                }
            }
        }
    }
    Ok(out)
}

/// Places an operator acting on the listed factors (in the given order) into
/// the full space, acting as the identity on every other factor. The factors
/// need not be adjacent or in ascending order.
pub fn place_on_sites(op: &ComplexMatrix, shape: &FactorShape, sites: &[usize]) -> Result<ComplexMatrix> {
    let n = shape.n_factors();
    let dims = shape.dims();
    let mut seen = vec![false; n];
    for &s in sites {
        if s >= n {
            return Err(Error::ShapeMismatch { reason: format!("site {} out of range (n = {})", s, n) });
        }
        if seen[s] {
            return Err(Error::ShapeMismatch { reason: format!("site {} listed twice", s) });
        }
        seen[s] = true;
    }
    let sub: usize = sites.iter().map(|&s| dims[s]).product();
    if op.rows() != sub || !op.is_square() {
        return Err(Error::ShapeMismatch {
            reason: format!("operator dimension {} does not match selected factors", op.rows()),
        });
    }
    // Flat-index stride of each factor in the full space, and of each listed
    // factor inside the operator's own index (which runs in `sites` order).
    let full_stride: Vec<usize> =
        (0..n).map(|f| dims[f + 1..].iter().product::<usize>().max(1)).collect();
    let sub_stride: Vec<usize> = (0..sites.len())
        .map(|t| sites[t + 1..].iter().map(|&s| dims[s]).product::<usize>().max(1))
        .collect();
    let rest: Vec<usize> = (0..n).filter(|f| !seen[*f]).collect();
    let rest_total: usize = rest.iter().map(|&f| dims[f]).product::<usize>().max(1);

    let mut out = ComplexMatrix::zeros(shape.total(), shape.total());
    for rid in 0..rest_total {
        // Scatter the rest digits into a base flat index shared by row and column.
        let mut base = 0usize;
        let mut acc = rid;
        for &f in rest.iter().rev() {
            base += (acc % dims[f]) * full_stride[f];
            acc /= dims[f];
        }
        for i in 0..sub {
            let row = base
                + sites.iter().enumerate().map(|(t, &s)| (i / sub_stride[t] % dims[s]) * full_stride[s]).sum::<usize>();
            for j in 0..sub {
                let v = op.get(i, j);
                if v.norm_sqr() == 0.0 {
                    continue;
                }
                let col = base
                    + sites.iter().enumerate().map(|(t, &s)| (j / sub_stride[t] % dims[s]) * full_stride[s]).sum::<usize>();
                out.set(row, col, v);
            }
        }
    }
    Ok(out)
}
