//! Dense linear-algebra kernel.
//!
//! Everything else in the crate is built on three primitives from this
//! module: the Hermitian eigendecomposition, spectral functions of Hermitian
//! matrices, and Gauss–Legendre quadrature on the unit interval. Storage is
//! dense throughout; the target sizes are at most a few hundred rows.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dense complex matrix.
pub type CMatrix = DMatrix<Complex64>;
/// Dense real matrix.
pub type RMatrix = DMatrix<f64>;

/// Eigenvalues below `RANK_FLOOR * max_eigenvalue` mark a density operator as
/// rank deficient.
pub const RANK_FLOOR: f64 = 1e-12;

/// Absolute tolerance on `A[j][k] - conj(A[k][j])` accepted at construction.
pub const HERMITIAN_TOLERANCE: f64 = 1e-12;

const MAX_SWEEPS: usize = 10_000;

/// A square complex matrix equal to its conjugate transpose.
///
/// The constructor checks Hermiticity within [`HERMITIAN_TOLERANCE`] and then
/// stores the exact Hermitian part, so every downstream consumer sees a
/// matrix that is Hermitian to the last bit.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    entries: CMatrix,
}

impl HermitianOperator {
    pub fn new(entries: CMatrix) -> Result<Self> {
        let (rows, cols) = entries.shape();
        if rows == 0 || rows != cols {
            return Err(Error::Argument(format!(
                "Hermitian operator must be square with dimension >= 1, got {rows}x{cols}"
            )));
        }
        let mut worst = (0, 0, 0.0_f64);
        for j in 0..rows {
            for k in j..rows {
                let deviation = (entries[(j, k)] - entries[(k, j)].conj()).norm();
                if !deviation.is_finite() || deviation > worst.2 {
                    worst = (j, k, if deviation.is_finite() { deviation } else { f64::INFINITY });
                }
            }
        }
        if worst.2 > HERMITIAN_TOLERANCE {
            return Err(Error::NotHermitian {
                row: worst.0,
                col: worst.1,
                deviation: worst.2,
            });
        }
        Ok(Self::hermitian_part(entries))
    }

    /// Takes the Hermitian part `(A + A†)/2` without validation.
    pub fn hermitian_part(entries: CMatrix) -> Self {
        let adjoint = entries.adjoint();
        Self {
            entries: (entries + adjoint).scale(0.5),
        }
    }

    pub fn from_real(entries: &RMatrix) -> Result<Self> {
        Self::new(entries.map(|x| Complex64::new(x, 0.0)))
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            entries: CMatrix::identity(dim, dim),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            entries: CMatrix::zeros(dim, dim),
        }
    }

    pub fn from_diagonal(values: &[f64]) -> Self {
        let n = values.len();
        let mut entries = CMatrix::zeros(n, n);
        for (j, &v) in values.iter().enumerate() {
            entries[(j, j)] = Complex64::new(v, 0.0);
        }
        Self { entries }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.entries
    }

    pub fn into_matrix(self) -> CMatrix {
        self.entries
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.norm()
    }

    /// Real part of the trace (the imaginary part vanishes identically).
    pub fn trace(&self) -> f64 {
        self.entries.trace().re
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            entries: self.entries.scale(factor),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            entries: &self.entries + &other.entries,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            entries: &self.entries - &other.entries,
        }
    }

    /// `self + shift * I`
    pub fn shift(&self, shift: f64) -> Self {
        let mut entries = self.entries.clone();
        for j in 0..entries.nrows() {
            entries[(j, j)] += Complex64::new(shift, 0.0);
        }
        Self { entries }
    }

    /// `tr(self * other)`, real for two Hermitian operands.
    pub fn trace_product(&self, other: &Self) -> f64 {
        let n = self.dim();
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..n {
            for k in 0..n {
                acc += self.entries[(j, k)] * other.entries[(k, j)];
            }
        }
        acc.re
    }
}

/// Spectral data of a Hermitian matrix: ascending eigenvalues and the unitary
/// whose columns are the matching eigenvectors.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSystem {
    pub eigenvalues: Vec<f64>,
    pub basis: CMatrix,
}

impl EigenSystem {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `U diag(λ) U†`
    pub fn reconstruct(&self) -> CMatrix {
        self.from_diagonal_values(&self.eigenvalues)
    }

    /// `U diag(values) U†`
    pub fn from_diagonal_values(&self, values: &[f64]) -> CMatrix {
        let mut scaled = self.basis.clone();
        for (k, &v) in values.iter().enumerate() {
            scaled.column_mut(k).scale_mut(v);
        }
        &scaled * self.basis.adjoint()
    }

    /// Expresses `a` in the eigenbasis: `U† a U`.
    pub fn to_eigenbasis(&self, a: &CMatrix) -> CMatrix {
        self.basis.adjoint() * a * &self.basis
    }

    /// Inverse of [`EigenSystem::to_eigenbasis`]: `U a U†`.
    pub fn from_eigenbasis(&self, a: &CMatrix) -> CMatrix {
        &self.basis * a * self.basis.adjoint()
    }

    /// `U φ(diag(λ)) U†`, failing when φ is not finite on the spectrum.
    pub fn apply<F: Fn(f64) -> f64>(&self, phi: F) -> Result<HermitianOperator> {
        let values = self
            .eigenvalues
            .iter()
            .map(|&l| {
                let v = phi(l);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::FunctionDomain { eigenvalue: l })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(HermitianOperator::hermitian_part(
            self.from_diagonal_values(&values),
        ))
    }
}

fn sorted_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    // stable: ties keep the solver's column order
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    order
}

/// Hermitian eigendecomposition with eigenvalues sorted ascending.
pub fn eig_hermitian(a: &HermitianOperator) -> Result<EigenSystem> {
    let dim = a.dim();
    let eig = SymmetricEigen::try_new(a.matrix().clone(), f64::EPSILON, MAX_SWEEPS)
        .ok_or(Error::NoConvergence { dim })?;
    if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::NoConvergence { dim });
    }
    let order = sorted_order(eig.eigenvalues.as_slice());
    let eigenvalues = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let basis = CMatrix::from_fn(dim, dim, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(EigenSystem { eigenvalues, basis })
}

/// Real symmetric eigendecomposition with eigenvalues sorted ascending.
pub fn eig_symmetric(a: &RMatrix) -> Result<(Vec<f64>, RMatrix)> {
    let (rows, cols) = a.shape();
    if rows == 0 || rows != cols {
        return Err(Error::Argument(format!(
            "symmetric eigendecomposition needs a square matrix, got {rows}x{cols}"
        )));
    }
    let sym = (a + a.transpose()).scale(0.5);
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, MAX_SWEEPS)
        .ok_or(Error::NoConvergence { dim: rows })?;
    if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::NoConvergence { dim: rows });
    }
    let order = sorted_order(eig.eigenvalues.as_slice());
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = RMatrix::from_fn(rows, rows, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok((values, vectors))
}

/// `A ↦ U φ(diag(λ)) U†` for a Hermitian matrix.
pub fn matrix_function<F: Fn(f64) -> f64>(a: &HermitianOperator, phi: F) -> Result<HermitianOperator> {
    eig_hermitian(a)?.apply(phi)
}

/// Spectral function of a real symmetric matrix.
pub fn symmetric_function<F: Fn(f64) -> f64>(a: &RMatrix, phi: F) -> Result<RMatrix> {
    let (values, vectors) = eig_symmetric(a)?;
    let mut scaled = vectors.clone();
    for (k, &l) in values.iter().enumerate() {
        let v = phi(l);
        if !v.is_finite() {
            return Err(Error::FunctionDomain { eigenvalue: l });
        }
        scaled.column_mut(k).scale_mut(v);
    }
    let out = &scaled * vectors.transpose();
    Ok((&out + out.transpose()).scale(0.5))
}

/// Inverts `ρ = e^G`, returning the generator `G = ln ρ`.
pub fn log_density(rho: &HermitianOperator) -> Result<HermitianOperator> {
    let trace = rho.trace();
    if (trace - 1.0).abs() > 1e-10 {
        return Err(Error::NotNormalized { trace });
    }
    let eig = eig_hermitian(rho)?;
    let largest = *eig.eigenvalues.last().expect("dim >= 1");
    let floor = RANK_FLOOR * largest.max(0.0);
    let smallest = eig.eigenvalues[0];
    if smallest <= floor {
        return Err(Error::NotFullRank {
            eigenvalue: smallest,
            floor,
        });
    }
    eig.apply(f64::ln)
}

/// Matrix exponential of a Hermitian operator.
pub fn exp_hermitian(a: &HermitianOperator) -> Result<HermitianOperator> {
    matrix_function(a, f64::exp)
}

/// `exp(-i t H)` for Hermitian `H`.
pub fn unitary_exp(h: &HermitianOperator, t: f64) -> Result<CMatrix> {
    let eig = eig_hermitian(h)?;
    let mut scaled = eig.basis.clone();
    for (k, &l) in eig.eigenvalues.iter().enumerate() {
        let phase = Complex64::from_polar(1.0, -t * l);
        scaled.column_mut(k).iter_mut().for_each(|z| *z *= phase);
    }
    Ok(&scaled * eig.basis.adjoint())
}

/// `[a, b]`
pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

/// `{a, b}`
pub fn anticommutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b + b * a
}

/// Nodes and weights of an n-point Gauss–Legendre rule on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadrature {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Quadrature {
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Gauss–Legendre rule of the given order (1..=64) mapped to `[0, 1]`.
///
/// Roots of `P_n` are found by Newton iteration from the Chebyshev-like
/// initial guess; the rule integrates polynomials of degree `2n - 1` exactly.
pub fn gauss_legendre(order: usize) -> Result<Quadrature> {
    if !(1..=64).contains(&order) {
        return Err(Error::Argument(format!(
            "Gauss-Legendre order must be in 1..=64, got {order}"
        )));
    }
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d.is_finite() {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // x is the i-th largest root; mirror it onto the negative half
        nodes[i] = 0.5 * (1.0 - x);
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.5;
    }
    Ok(Quadrature { nodes, weights })
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}
