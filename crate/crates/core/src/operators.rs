//! Dense complex matrices, operator newtypes, and tensor-product tools.
//!
//! Everything downstream (algebra closure, simulation, pulse shaping) works
//! in terms of [`ComplexMatrix`], a row-major dense matrix over `Complex64`.
//! Hermiticity and unitarity are enforced at construction time by the
//! [`HermitianOperator`] and [`UnitaryOperator`] newtypes, so code that
//! receives one can rely on the invariant instead of re-checking.

use std::ops::{Index, IndexMut};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default tolerance on `max |A - A^dag|` for Hermitian construction.
pub const DEFAULT_HERM_TOL: f64 = 1e-10;
/// Default tolerance on `max |U^dag U - I|` for unitary construction.
pub const DEFAULT_UNIT_TOL: f64 = 1e-10;

/// Dense row-major matrix over `Complex64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixSchema", into = "MatrixSchema")]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

/// Wire format: dimensions plus `[re, im]` pairs in row-major order.
#[derive(Serialize, Deserialize)]
struct MatrixSchema {
    dim_rows: usize,
    dim_cols: usize,
    entries: Vec<[f64; 2]>,
}

impl TryFrom<MatrixSchema> for ComplexMatrix {
    type Error = Error;

    fn try_from(s: MatrixSchema) -> Result<Self> {
        if s.entries.len() != s.dim_rows * s.dim_cols {
            return Err(Error::DimensionMismatch {
                context: format!(
                    "matrix declares {}x{} but carries {} entries",
                    s.dim_rows,
                    s.dim_cols,
                    s.entries.len()
                ),
            });
        }
        let data = s
            .entries
            .iter()
            .map(|[re, im]| Complex64::new(*re, *im))
            .collect();
        ComplexMatrix::new(s.dim_rows, s.dim_cols, data)
    }
}

impl From<ComplexMatrix> for MatrixSchema {
    fn from(m: ComplexMatrix) -> Self {
        MatrixSchema {
            dim_rows: m.rows,
            dim_cols: m.cols,
            entries: m.data.iter().map(|z| [z.re, z.im]).collect(),
        }
    }
}

impl ComplexMatrix {
    /// Builds a matrix from row-major data, rejecting non-finite entries.
    pub fn new(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                context: format!("{}x{} matrix with {} entries", rows, cols, data.len()),
            });
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFiniteEntries);
        }
        Ok(ComplexMatrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        ComplexMatrix {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let data = (0..rows * cols)
            .map(|k| f(k / cols, k % cols))
            .collect();
        ComplexMatrix { rows, cols, data }
    }

    /// Builds from real entries, row-major.
    pub fn from_real(rows: usize, cols: usize, entries: &[f64]) -> Result<Self> {
        Self::new(
            rows,
            cols,
            entries.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        )
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

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn add(&self, other: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.zip_check(other, "add")?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        Ok(ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn sub(&self, other: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.zip_check(other, "sub")?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Ok(ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn scale(&self, c: Complex64) -> ComplexMatrix {
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * c).collect(),
        }
    }

    pub fn scale_re(&self, c: f64) -> ComplexMatrix {
        self.scale(Complex64::new(c, 0.0))
    }

    pub fn mul(&self, other: &ComplexMatrix) -> Result<ComplexMatrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                context: format!(
                    "mul {}x{} by {}x{}",
                    self.rows, self.cols, other.rows, other.cols
                ),
            });
        }
        let mut out = ComplexMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.data[k * other.cols + j];
                }
            }
        }
        Ok(out)
    }

    pub fn adjoint(&self) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn conj(&self) -> ComplexMatrix {
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn trace(&self) -> Result<Complex64> {
        if !self.is_square() {
            return Err(Error::DimensionMismatch {
                context: format!("trace of {}x{}", self.rows, self.cols),
            });
        }
        Ok((0..self.rows).map(|i| self[(i, i)]).sum())
    }

    /// Maximum entry magnitude.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Hilbert-Schmidt inner product `tr(self^dag other)`.
    pub fn hs_inner(&self, other: &ComplexMatrix) -> Result<Complex64> {
        self.zip_check(other, "hs_inner")?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    pub fn kron(&self, other: &ComplexMatrix) -> ComplexMatrix {
        let rows = self.rows * other.rows;
        let cols = self.cols * other.cols;
        ComplexMatrix::from_fn(rows, cols, |i, j| {
            self[(i / other.rows, j / other.cols)] * other[(i % other.rows, j % other.cols)]
        })
    }

    /// `A - (tr A / n) I`; requires a square matrix.
    pub fn traceless_part(&self) -> Result<ComplexMatrix> {
        let t = self.trace()? / self.rows as f64;
        let mut out = self.clone();
        for i in 0..self.rows {
            out[(i, i)] -= t;
        }
        Ok(out)
    }

    /// `max |A - A^dag|`; requires a square matrix.
    pub fn hermitian_deviation(&self) -> Result<f64> {
        if !self.is_square() {
            return Err(Error::DimensionMismatch {
                context: format!("hermitian check of {}x{}", self.rows, self.cols),
            });
        }
        let mut dev: f64 = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                dev = dev.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        Ok(dev)
    }

    /// `max |U^dag U - I|`; requires a square matrix.
    pub fn unitary_deviation(&self) -> Result<f64> {
        if !self.is_square() {
            return Err(Error::DimensionMismatch {
                context: format!("unitary check of {}x{}", self.rows, self.cols),
            });
        }
        let gram = self.adjoint().mul(self)?;
        gram.sub(&ComplexMatrix::identity(self.rows))
            .map(|d| d.max_abs())
    }

    /// NaN and infinity defeat threshold comparisons, so validated
    /// wrappers reject them before any tolerance check.
    pub fn ensure_finite(&self) -> Result<()> {
        if self
            .data
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::NonFiniteEntries);
        }
        Ok(())
    }

    pub fn approx_eq(&self, other: &ComplexMatrix, tol: f64) -> bool {
        self.rows == other.rows
            && self.cols == other.cols
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| (a - b).norm() <= tol)
    }

    fn zip_check(&self, other: &ComplexMatrix, op: &str) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch {
                context: format!(
                    "{} of {}x{} with {}x{}",
                    op, self.rows, self.cols, other.rows, other.cols
                ),
            });
        }
        Ok(())
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Commutator `[A, B] = AB - BA`.
pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    a.mul(b)?.sub(&b.mul(a)?)
}

/// Square matrix validated as Hermitian at construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ComplexMatrix", into = "ComplexMatrix")]
pub struct HermitianOperator(ComplexMatrix);

impl TryFrom<ComplexMatrix> for HermitianOperator {
    type Error = Error;

    fn try_from(m: ComplexMatrix) -> Result<Self> {
        HermitianOperator::new(m)
    }
}

impl From<HermitianOperator> for ComplexMatrix {
    fn from(h: HermitianOperator) -> ComplexMatrix {
        h.0
    }
}

impl HermitianOperator {
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        Self::with_tolerance(m, DEFAULT_HERM_TOL)
    }

    pub fn with_tolerance(m: ComplexMatrix, tol: f64) -> Result<Self> {
        m.ensure_finite()?;
        let deviation = m.hermitian_deviation()?;
        if deviation > tol {
            return Err(Error::NotHermitian { deviation, tol });
        }
        Ok(HermitianOperator(m))
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.rows()
    }
}

/// Square matrix validated as unitary at construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ComplexMatrix", into = "ComplexMatrix")]
pub struct UnitaryOperator(ComplexMatrix);

impl TryFrom<ComplexMatrix> for UnitaryOperator {
    type Error = Error;

    fn try_from(m: ComplexMatrix) -> Result<Self> {
        UnitaryOperator::new(m)
    }
}

impl From<UnitaryOperator> for ComplexMatrix {
    fn from(u: UnitaryOperator) -> ComplexMatrix {
        u.0
    }
}

impl UnitaryOperator {
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        Self::with_tolerance(m, DEFAULT_UNIT_TOL)
    }

    pub fn with_tolerance(m: ComplexMatrix, tol: f64) -> Result<Self> {
        m.ensure_finite()?;
        let deviation = m.unitary_deviation()?;
        if deviation > tol {
            return Err(Error::NotUnitary { deviation, tol });
        }
        Ok(UnitaryOperator(m))
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.rows()
    }
}

/// Ordered list of tensor-factor dimensions; factor 0 is the most
/// significant index in the flat basis ordering.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct TensorSpace {
    dims: Vec<usize>,
}

impl TryFrom<Vec<usize>> for TensorSpace {
    type Error = Error;

    fn try_from(dims: Vec<usize>) -> Result<Self> {
        TensorSpace::new(dims)
    }
}

impl From<TensorSpace> for Vec<usize> {
    fn from(s: TensorSpace) -> Vec<usize> {
        s.dims
    }
}

impl TensorSpace {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidSpace {
                context: "no factors".into(),
            });
        }
        if dims.iter().any(|&d| d < 2) {
            return Err(Error::InvalidSpace {
                context: format!("factor dimensions must be >= 2, got {:?}", dims),
            });
        }
        Ok(TensorSpace { dims })
    }

    /// Space of `n` qubits.
    pub fn qubits(n: usize) -> Result<Self> {
        Self::new(vec![2; n])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn n_factors(&self) -> usize {
        self.dims.len()
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn factor_dim(&self, index: usize) -> Result<usize> {
        self.dims
            .get(index)
            .copied()
            .ok_or(Error::FactorOutOfRange {
                index,
                n_factors: self.dims.len(),
            })
    }

    /// Flat index of a multi-index, factor 0 most significant.
    pub fn ravel(&self, multi: &[usize]) -> usize {
        multi
            .iter()
            .zip(&self.dims)
            .fold(0, |acc, (&i, &d)| acc * d + i)
    }

    /// Multi-index of a flat index.
    pub fn unravel(&self, mut flat: usize) -> Vec<usize> {
        let mut multi = vec![0; self.dims.len()];
        for (slot, &d) in multi.iter_mut().zip(&self.dims).rev() {
            *slot = flat % d;
            flat /= d;
        }
        multi
    }
}

/// Pauli x.
pub fn pauli_x() -> ComplexMatrix {
    ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]).expect("static entries")
}

/// Pauli y.
pub fn pauli_y() -> ComplexMatrix {
    ComplexMatrix::new(
        2,
        2,
        vec![
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, -1.0),
            Complex64::new(0.0, 1.0),
            Complex64::new(0.0, 0.0),
        ],
    )
    .expect("static entries")
}

/// Pauli z, `diag(1, -1)`: index 0 is spin-up.
pub fn pauli_z() -> ComplexMatrix {
    ComplexMatrix::from_real(2, 2, &[1.0, 0.0, 0.0, -1.0]).expect("static entries")
}

/// Embeds an operator acting on the listed factors (in the given order)
/// into the full space, identity elsewhere.
///
/// `op` must be square with dimension equal to the product of the target
/// factor dimensions taken in `targets` order.
pub fn embed_multi(
    op: &ComplexMatrix,
    space: &TensorSpace,
    targets: &[usize],
) -> Result<ComplexMatrix> {
    if targets.is_empty() {
        return Err(Error::InvalidSpace {
            context: "embed requires at least one target factor".into(),
        });
    }
    let mut seen = vec![false; space.n_factors()];
    for &t in targets {
        if t >= space.n_factors() {
            return Err(Error::FactorOutOfRange {
                index: t,
                n_factors: space.n_factors(),
            });
        }
        if seen[t] {
            return Err(Error::InvalidSpace {
                context: format!("duplicate target factor {}", t),
            });
        }
        seen[t] = true;
    }
    let target_dims: Vec<usize> = targets.iter().map(|&t| space.dims()[t]).collect();
    let d_t: usize = target_dims.iter().product();
    if op.rows() != d_t || op.cols() != d_t {
        return Err(Error::DimensionMismatch {
            context: format!(
                "operator is {}x{} but targets span dimension {}",
                op.rows(),
                op.cols(),
                d_t
            ),
        });
    }
    let target_space = TensorSpace::new(target_dims)?;
    let n = space.total_dim();
    let mut out = ComplexMatrix::zeros(n, n);
    for r in 0..n {
        let r_multi = space.unravel(r);
        let r_target: Vec<usize> = targets.iter().map(|&t| r_multi[t]).collect();
        let r_t = target_space.ravel(&r_target);
        for c_t in 0..d_t {
            let v = op[(r_t, c_t)];
            if v == Complex64::new(0.0, 0.0) {
                continue;
            }
            let c_target = target_space.unravel(c_t);
            let mut c_multi = r_multi.clone();
            for (&t, &i) in targets.iter().zip(&c_target) {
                c_multi[t] = i;
            }
            out[(r, space.ravel(&c_multi))] = v;
        }
    }
    Ok(out)
}

/// Embeds a single-factor operator into the full space.
pub fn embed(op: &ComplexMatrix, space: &TensorSpace, target: usize) -> Result<ComplexMatrix> {
    embed_multi(op, space, &[target])
}

/// Traces out all factors not in `keep`, which must be strictly
/// increasing. Returns the reduced matrix and its space.
pub fn partial_trace(
    rho: &ComplexMatrix,
    space: &TensorSpace,
    keep: &[usize],
) -> Result<(ComplexMatrix, TensorSpace)> {
    let n = space.total_dim();
    if rho.rows() != n || rho.cols() != n {
        return Err(Error::DimensionMismatch {
            context: format!(
                "density matrix is {}x{} but space has dimension {}",
                rho.rows(),
                rho.cols(),
                n
            ),
        });
    }
    if keep.is_empty() || keep.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidSpace {
            context: "kept factors must be non-empty and strictly increasing".into(),
        });
    }
    for &k in keep {
        if k >= space.n_factors() {
            return Err(Error::FactorOutOfRange {
                index: k,
                n_factors: space.n_factors(),
            });
        }
    }
    let traced: Vec<usize> = (0..space.n_factors())
        .filter(|f| !keep.contains(f))
        .collect();
    let keep_space = TensorSpace::new(keep.iter().map(|&k| space.dims()[k]).collect())?;
    if traced.is_empty() {
        return Ok((rho.clone(), keep_space));
    }
    let traced_space = TensorSpace::new(traced.iter().map(|&t| space.dims()[t]).collect())?;
    let d_keep = keep_space.total_dim();
    let d_traced = traced_space.total_dim();
    let mut out = ComplexMatrix::zeros(d_keep, d_keep);
    let mut full = vec![0usize; space.n_factors()];
    for kr in 0..d_keep {
        let kr_multi = keep_space.unravel(kr);
        for kc in 0..d_keep {
            let kc_multi = keep_space.unravel(kc);
            let mut acc = Complex64::new(0.0, 0.0);
            for t in 0..d_traced {
                let t_multi = traced_space.unravel(t);
                for (&f, &i) in keep.iter().zip(&kr_multi) {
                    full[f] = i;
                }
                for (&f, &i) in traced.iter().zip(&t_multi) {
                    full[f] = i;
                }
                let row = space.ravel(&full);
                for (&f, &i) in keep.iter().zip(&kc_multi) {
                    full[f] = i;
                }
                let col = space.ravel(&full);
                acc += rho[(row, col)];
            }
            out[(kr, kc)] = acc;
        }
    }
    Ok((out, keep_space))
}

/// Eigendecomposition of a Hermitian matrix: eigenvalues in descending
/// order with matching orthonormal eigenvector columns.
pub(crate) fn hermitian_eigen(m: &ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix)> {
    let n = m.rows();
    // Symmetrize so roundoff-level asymmetry cannot leak into the solver.
    let sym = m.add(&m.adjoint())?.scale_re(0.5);
    let na = to_na(&sym);
    let eig = nalgebra::SymmetricEigen::try_new(na, f64::EPSILON, 0).ok_or(Error::EigenFailure)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .expect("finite eigenvalues")
    });
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    Ok((values, vectors))
}

/// Thin SVD `A = U diag(s) V^dag`: returns `(U, s, V^dag)` with singular
/// values in descending order.
pub(crate) fn svd(m: &ComplexMatrix) -> Result<(ComplexMatrix, Vec<f64>, ComplexMatrix)> {
    let na = to_na(m);
    let svd = nalgebra::SVD::try_new(na, true, true, f64::EPSILON, 0).ok_or(Error::EigenFailure)?;
    let u = svd.u.ok_or(Error::EigenFailure)?;
    let v_t = svd.v_t.ok_or(Error::EigenFailure)?;
    let s: Vec<f64> = svd.singular_values.iter().copied().collect();
    Ok((from_na(&u), s, from_na(&v_t)))
}

/// Unitary `exp(-i t H)` via eigendecomposition of `H`.
pub fn expm(h: &HermitianOperator, t: f64) -> Result<UnitaryOperator> {
    let (values, vectors) = hermitian_eigen(h.matrix())?;
    let n = h.dim();
    let mut phases = ComplexMatrix::zeros(n, n);
    for (i, &lambda) in values.iter().enumerate() {
        phases[(i, i)] = Complex64::new(0.0, -lambda * t).exp();
    }
    let u = vectors.mul(&phases)?.mul(&vectors.adjoint())?;
    UnitaryOperator::new(u)
}

pub(crate) fn to_na(m: &ComplexMatrix) -> DMatrix<Complex64> {
    DMatrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)])
}

pub(crate) fn from_na(m: &DMatrix<Complex64>) -> ComplexMatrix {
    ComplexMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}
