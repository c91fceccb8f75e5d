//! Symplectic structure on the quadratures `r = (x_1 … x_n, p_1 … p_n)`.
//!
//! The form is `J = [[0, I], [-I, 0]]`, so `[r_j, r_k] = i J_jk`. A matrix `S`
//! is symplectic when `S J Sᵀ = J`.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numkit::{eig_hermitian, eig_symmetric, symmetric_function, CMatrix, HermitianOperator, RMatrix};

/// Symmetry tolerance applied to covariance and generator matrices.
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;
/// Symplectic eigenvalues below `1 - UNPHYSICAL_TOLERANCE` violate `Γ + iJ ⪰ 0`.
pub const UNPHYSICAL_TOLERANCE: f64 = 1e-6;

/// The symplectic form for `n_modes` modes in block ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticForm {
    n_modes: usize,
    j: RMatrix,
}

impl SymplecticForm {
    pub fn new(n_modes: usize) -> Result<Self> {
        if n_modes == 0 {
            return Err(Error::Argument("number of modes must be positive".into()));
        }
        let n = n_modes;
        let mut j = RMatrix::zeros(2 * n, 2 * n);
        for k in 0..n {
            j[(k, k + n)] = 1.0;
            j[(k + n, k)] = -1.0;
        }
        Ok(Self { n_modes, j })
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn matrix(&self) -> &RMatrix {
        &self.j
    }
}

/// `J` for `n` modes. Panics on `n = 0`; use [`SymplecticForm::new`] for checked input.
pub fn form(n_modes: usize) -> RMatrix {
    SymplecticForm::new(n_modes).expect("n_modes >= 1").j
}

/// The unitary `V` with `a = V† r`, where `a = (a_1 … a_n, ā_1 … ā_n)`.
///
/// `V† = (1/√2) [[I, iI], [I, -iI]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LadderMap {
    v: CMatrix,
}

impl LadderMap {
    pub fn new(n_modes: usize) -> Result<Self> {
        if n_modes == 0 {
            return Err(Error::Argument("number of modes must be positive".into()));
        }
        let n = n_modes;
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mut v_dag = CMatrix::zeros(2 * n, 2 * n);
        for k in 0..n {
            v_dag[(k, k)] = Complex64::new(h, 0.0);
            v_dag[(k, k + n)] = Complex64::new(0.0, h);
            v_dag[(k + n, k)] = Complex64::new(h, 0.0);
            v_dag[(k + n, k + n)] = Complex64::new(0.0, -h);
        }
        Ok(Self { v: v_dag.adjoint() })
    }

    pub fn v(&self) -> &CMatrix {
        &self.v
    }

    pub fn v_dagger(&self) -> CMatrix {
        self.v.adjoint()
    }

    /// `V† M V` for a real quadrature-basis matrix.
    pub fn to_ladder(&self, m: &RMatrix) -> CMatrix {
        self.v.adjoint() * m.map(|x| Complex64::new(x, 0.0)) * &self.v
    }

    /// `V M V†`, the inverse of [`LadderMap::to_ladder`].
    pub fn from_ladder(&self, m: &CMatrix) -> CMatrix {
        &self.v * m * self.v.adjoint()
    }

    /// `V† u` for a real quadrature-basis vector.
    pub fn vector_to_ladder(&self, u: &DVector<f64>) -> DVector<Complex64> {
        self.v.adjoint() * u.map(|x| Complex64::new(x, 0.0))
    }

    /// `V u`, the inverse of [`LadderMap::vector_to_ladder`].
    pub fn vector_from_ladder(&self, u: &DVector<Complex64>) -> DVector<Complex64> {
        &self.v * u
    }
}

/// A symplectic `S` together with the spectrum it exposes.
///
/// For covariance input `S Γ Sᵀ = diag(Λ, Λ)` with `Λ` descending. For
/// generator input `S^{-T} Ω S^{-1} = diag(ε, ε)` with `ε` ascending, so that
/// mode `j` of a state and of its generator coincide.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticDecomposition {
    pub s: RMatrix,
    pub spectrum: Vec<f64>,
}

impl SymplecticDecomposition {
    pub fn n_modes(&self) -> usize {
        self.spectrum.len()
    }

    /// `diag(spectrum, spectrum)`
    pub fn standard_form(&self) -> RMatrix {
        let n = self.n_modes();
        RMatrix::from_fn(2 * n, 2 * n, |r, c| if r == c { self.spectrum[r % n] } else { 0.0 })
    }
}

/// Number of modes of a `2n × 2n` matrix.
pub fn modes_of(m: &RMatrix) -> Result<usize> {
    let (rows, cols) = m.shape();
    if rows != cols || rows == 0 || rows % 2 == 1 {
        return Err(Error::Argument(format!(
            "expected a square matrix of even dimension, got {rows}x{cols}"
        )));
    }
    Ok(rows / 2)
}

pub(crate) fn check_symmetric(m: &RMatrix, what: &str) -> Result<()> {
    let scale = m.norm().max(1.0);
    let dev = (m - m.transpose()).amax();
    if dev > SYMMETRY_TOLERANCE * scale {
        return Err(Error::Validation(format!(
            "{what} is not symmetric (max deviation {dev:e})"
        )));
    }
    Ok(())
}

/// `‖S J Sᵀ - J‖_F`
pub fn is_symplectic(s: &RMatrix) -> Result<f64> {
    let n = modes_of(s)?;
    let j = form(n);
    Ok((s * &j * s.transpose() - j).norm())
}

/// `S⁻¹ = J Sᵀ Jᵀ` for symplectic `S`.
pub fn symplectic_inverse(s: &RMatrix) -> Result<RMatrix> {
    let j = form(modes_of(s)?);
    Ok(&j * s.transpose() * j.transpose())
}

#[derive(Clone, Copy)]
enum Order {
    Descending,
    Ascending,
}

/// Shared core: `T` symplectic with `T M Tᵀ = diag(λ, λ)` for `M ≻ 0`.
fn diagonalize(m: &RMatrix, what: &str, order: Order) -> Result<SymplecticDecomposition> {
    let n = modes_of(m)?;
    check_symmetric(m, what)?;
    let m = (m + m.transpose()).scale(0.5);
    let (values, _) = eig_symmetric(&m)?;
    let min_eigenvalue = values[0];
    if min_eigenvalue.is_nan() || min_eigenvalue <= 0.0 || min_eigenvalue <= 1e-14 * values[2 * n - 1] {
        return Err(Error::NotPositiveDefinite { min_eigenvalue });
    }
    let root = symmetric_function(&m, f64::sqrt)?;
    let inv_root = symmetric_function(&m, |x| 1.0 / x.sqrt())?;
    let j = form(n);
    let a = &root * &j * &root;

    // iA is Hermitian with eigenvalues ±λ; the positive half carries the modes
    let ia = a.map(|x| Complex64::new(0.0, x));
    let eig = eig_hermitian(&HermitianOperator::hermitian_part(ia))?;
    let mut picks: Vec<usize> = (n..2 * n).rev().collect();
    if let Order::Ascending = order {
        picks.reverse();
    }

    let mut o = RMatrix::zeros(2 * n, 2 * n);
    let mut spectrum = Vec::with_capacity(n);
    for (mode, &col) in picks.iter().enumerate() {
        let lambda = eig.eigenvalues[col];
        let mut u = eig.basis.column(col).into_owned();
        fix_phase(&mut u);
        let s2 = std::f64::consts::SQRT_2;
        for r in 0..2 * n {
            o[(r, mode)] = s2 * u[r].re;
            o[(r, mode + n)] = -s2 * u[r].im;
        }
        spectrum.push(lambda);
    }

    let k_root = RMatrix::from_fn(2 * n, 2 * n, |r, c| {
        if r == c {
            spectrum[r % n].sqrt()
        } else {
            0.0
        }
    });
    let t = k_root * o.transpose() * inv_root;
    Ok(SymplecticDecomposition { s: t, spectrum })
}

/// Rotates `u` so that its first component of (near-)largest modulus is real positive.
fn fix_phase(u: &mut DVector<Complex64>) {
    let top = u.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if top == 0.0 {
        return;
    }
    let pivot = u
        .iter()
        .position(|z| z.norm() >= top * (1.0 - 1e-8))
        .expect("maximum exists");
    let phase = u[pivot].conj() / u[pivot].norm();
    u.iter_mut().for_each(|z| *z *= phase);
}

/// Williamson decomposition `S Γ Sᵀ = diag(Λ, Λ)` of a covariance matrix.
pub fn williamson(gamma: &RMatrix) -> Result<SymplecticDecomposition> {
    let d = diagonalize(gamma, "covariance", Order::Descending)?;
    if let Some(&low) = d.spectrum.last() {
        if low < 1.0 - UNPHYSICAL_TOLERANCE {
            return Err(Error::UnphysicalCovariance {
                symplectic_eigenvalue: low,
            });
        }
    }
    Ok(d)
}

/// Normal-mode form `S^{-T} Ω S^{-1} = diag(ε, ε)` of a generator matrix.
pub fn normal_modes(omega: &RMatrix) -> Result<SymplecticDecomposition> {
    let d = diagonalize(omega, "generator matrix", Order::Ascending)?;
    Ok(SymplecticDecomposition {
        s: d.s.transpose().try_inverse().ok_or(Error::NotPositiveDefinite {
            min_eigenvalue: 0.0,
        })?,
        spectrum: d.spectrum,
    })
}

/// Seeded random symplectic `O₁ · diag(e^r, e^{-r}) · O₂` with `O₁, O₂`
/// orthogonal-symplectic images of random unitaries.
pub fn random_symplectic(n_modes: usize, seed: u64) -> Result<RMatrix> {
    if !(1..=4).contains(&n_modes) {
        return Err(Error::Argument(format!(
            "random symplectic matrices are generated for 1..=4 modes, got {n_modes}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let o1 = random_orthosymplectic(&mut rng, n_modes)?;
    let o2 = random_orthosymplectic(&mut rng, n_modes)?;
    let r: Vec<f64> = (0..n_modes).map(|_| rng.random_range(-0.8..0.8)).collect();
    let squeeze = RMatrix::from_fn(2 * n_modes, 2 * n_modes, |a, b| {
        if a != b {
            0.0
        } else if a < n_modes {
            r[a].exp()
        } else {
            (-r[a - n_modes]).exp()
        }
    });
    Ok(o1 * squeeze * o2)
}

/// `[[Re U, -Im U], [Im U, Re U]]` for a random `n × n` unitary `U`.
fn random_orthosymplectic(rng: &mut ChaCha8Rng, n: usize) -> Result<RMatrix> {
    let h = CMatrix::from_fn(n, n, |_, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    let h = HermitianOperator::hermitian_part(h);
    let u = crate::numkit::unitary_exp(&h, 3.0)?;
    Ok(RMatrix::from_fn(2 * n, 2 * n, |r, c| {
        let z = u[(r % n, c % n)];
        match (r < n, c < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn diag(values: &[f64]) -> RMatrix {
        RMatrix::from_diagonal(&DVector::from_row_slice(values))
    }

    fn standard(values: &[f64]) -> RMatrix {
        let mut v = values.to_vec();
        v.extend_from_slice(values);
        diag(&v)
    }

    #[test]
    fn form_properties() {
        let j = form(3);
        assert_eq!(&j + j.transpose(), RMatrix::zeros(6, 6));
        assert_eq!(&j * &j, -RMatrix::identity(6, 6));
        assert!(SymplecticForm::new(0).is_err());
    }

    #[test]
    fn ladder_map_is_unitary() {
        let v = LadderMap::new(3).unwrap();
        let err = (v.v().adjoint() * v.v() - CMatrix::identity(6, 6)).norm();
        assert!(err < 1e-14);
        // a = (x + ip)/√2 in the first block
        let a = v.vector_to_ladder(&DVector::from_row_slice(&[1.0, 0.0, 0.0, 2.0, 0.0, 0.0]));
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((a[0] - Complex64::new(h, 2.0 * h)).norm() < 1e-15);
        assert!((a[3] - Complex64::new(h, -2.0 * h)).norm() < 1e-15);
    }

    #[test]
    fn williamson_thermal() {
        let d = williamson(&RMatrix::identity(2, 2).scale(3.0)).unwrap();
        assert!((d.spectrum[0] - 3.0).abs() < 1e-12);
        assert!((&d.s - RMatrix::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn williamson_pure_squeezed() {
        let e = std::f64::consts::E;
        let d = williamson(&diag(&[e, 1.0 / e])).unwrap();
        assert!((d.spectrum[0] - 1.0).abs() < 1e-12);
        let expect = diag(&[(-0.5f64).exp(), 0.5f64.exp()]);
        assert!((&d.s - expect).norm() < 1e-12);
    }

    #[test]
    fn williamson_recovers_constructed_spectrum() {
        let s = random_symplectic(2, 7).unwrap();
        let gamma = s.transpose() * standard(&[1.7, 4.2]) * &s;
        let d = williamson(&gamma).unwrap();
        assert!((d.spectrum[0] - 4.2).abs() < 1e-8);
        assert!((d.spectrum[1] - 1.7).abs() < 1e-8);
        assert!((&d.s * &gamma * d.s.transpose() - d.standard_form()).norm() < 1e-9);
        assert!(is_symplectic(&d.s).unwrap() < 1e-10);
    }

    #[test]
    fn williamson_rejects_bad_input() {
        assert!(matches!(
            williamson(&diag(&[1.0, -1.0])),
            Err(Error::NotPositiveDefinite { .. })
        ));
        assert!(matches!(
            williamson(&diag(&[0.5, 0.5])),
            Err(Error::UnphysicalCovariance { .. })
        ));
        assert!(williamson(&RMatrix::identity(3, 3)).is_err());
        let mut asym = RMatrix::identity(2, 2);
        asym[(0, 1)] = 0.1;
        assert!(matches!(williamson(&asym), Err(Error::Validation(_))));
    }

    #[test]
    fn normal_modes_examples() {
        let ln2 = 2f64.ln();
        let d = normal_modes(&RMatrix::identity(2, 2).scale(ln2)).unwrap();
        assert!((d.spectrum[0] - ln2).abs() < 1e-12);
        assert!((&d.s - RMatrix::identity(2, 2)).norm() < 1e-12);

        let omega = diag(&[4.0, 1.0]);
        let d = normal_modes(&omega).unwrap();
        assert!((d.spectrum[0] - 2.0).abs() < 1e-12);
        let s2 = 2f64.sqrt();
        assert!((&d.s - diag(&[s2, 1.0 / s2])).norm() < 1e-12);
        let s_inv = d.s.clone().try_inverse().unwrap();
        let back = s_inv.transpose() * &omega * s_inv;
        assert!((back - RMatrix::identity(2, 2).scale(2.0)).norm() < 1e-9);
    }

    #[test]
    fn normal_modes_order_matches_williamson_of_coth_image() {
        let s = random_symplectic(2, 3).unwrap();
        let eps = [0.4, 1.3];
        let omega = s.transpose() * standard(&eps) * &s;
        let d = normal_modes(&omega).unwrap();
        assert!((d.spectrum[0] - 0.4).abs() < 1e-9 && (d.spectrum[1] - 1.3).abs() < 1e-9);
        let coth: Vec<f64> = d.spectrum.iter().map(|e| 1.0 / (0.5 * e).tanh()).collect();
        let s_inv = symplectic_inverse(&d.s).unwrap();
        let gamma = &s_inv * standard(&coth) * s_inv.transpose();
        let w = williamson(&gamma).unwrap();
        assert!((w.spectrum[0] - coth[0]).abs() < 1e-9);
        // equal up to a rotation within each mode
        let r = &w.s * symplectic_inverse(&d.s).unwrap();
        assert!((&r * r.transpose() - RMatrix::identity(4, 4)).norm() < 1e-8);
        let k = standard(&coth);
        assert!((&r * &k - &k * &r).norm() < 1e-8);
    }

    #[test]
    fn symplectic_residuals() {
        assert_eq!(is_symplectic(&RMatrix::identity(4, 4)).unwrap(), 0.0);
        assert!(is_symplectic(&diag(&[2.0, 0.5])).unwrap() < 1e-15);
        let r = is_symplectic(&diag(&[2.0, 1.0])).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-15);
        assert!(matches!(is_symplectic(&RMatrix::identity(3, 3)), Err(Error::Argument(_))));
    }

    #[test]
    fn random_symplectic_is_deterministic_and_closed() {
        let a = random_symplectic(1, 11).unwrap();
        assert_eq!(a, random_symplectic(1, 11).unwrap());
        for n in 1..=4 {
            let s1 = random_symplectic(n, 100 + n as u64).unwrap();
            let s2 = random_symplectic(n, 200 + n as u64).unwrap();
            assert!(is_symplectic(&s1).unwrap() < 1e-10);
            assert!(is_symplectic(&(&s1 * &s2)).unwrap() < 1e-9);
        }
        assert!(random_symplectic(5, 0).is_err());
    }

    #[test]
    fn inverse_is_exact() {
        let s = random_symplectic(3, 9).unwrap();
        let inv = symplectic_inverse(&s).unwrap();
        assert!((&s * inv - RMatrix::identity(6, 6)).norm() < 1e-12);
    }

    fn random_covariance(n: usize, seed: u64, lambdas: &[f64]) -> RMatrix {
        let s = random_symplectic(n, seed).unwrap();
        s.transpose() * standard(lambdas) * &s
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn spectrum_is_congruence_invariant(seed in 0u64..10_000, n in 1usize..=3) {
            let lambdas: Vec<f64> = (0..n).map(|k| 1.0 + 0.7 * k as f64 + (seed % 7) as f64 * 0.1).collect();
            let gamma = random_covariance(n, seed, &lambdas);
            let t = random_symplectic(n, seed + 1).unwrap();
            let a = williamson(&gamma).unwrap();
            let b = williamson(&(&t * &gamma * t.transpose())).unwrap();
            for (x, y) in a.spectrum.iter().zip(&b.spectrum) {
                prop_assert!((x - y).abs() < 1e-8 * x.max(1.0));
            }
        }

        #[test]
        fn spectrum_matches_eigenvalues_of_j_gamma(seed in 0u64..10_000, n in 1usize..=3) {
            let lambdas: Vec<f64> = (0..n).map(|k| 1.2 + 1.1 * k as f64).collect();
            let gamma = random_covariance(n, seed, &lambdas);
            let d = williamson(&gamma).unwrap();
            let mut moduli: Vec<f64> = (form(n) * &gamma)
                .complex_eigenvalues()
                .iter()
                .filter(|z| z.im > 0.0)
                .map(|z| z.norm())
                .collect();
            moduli.sort_by(|a, b| b.partial_cmp(a).unwrap());
            prop_assert_eq!(moduli.len(), n);
            for (x, y) in d.spectrum.iter().zip(&moduli) {
                prop_assert!((x - y).abs() < 1e-9 * x.max(1.0));
            }
        }

        #[test]
        fn pure_covariance_has_unit_spectrum(seed in 0u64..10_000, n in 1usize..=4) {
            let s = random_symplectic(n, seed).unwrap();
            let d = williamson(&(s.transpose() * &s)).unwrap();
            for l in d.spectrum {
                prop_assert!((l - 1.0).abs() < 1e-9);
            }
        }

        #[test]
        fn normal_modes_reproduce_standard_form(seed in 0u64..10_000, n in 1usize..=3) {
            let eps: Vec<f64> = (0..n).map(|k| 0.3 + 0.5 * k as f64).collect();
            let s = random_symplectic(n, seed).unwrap();
            let omega = s.transpose() * standard(&eps) * &s;
            let d = normal_modes(&omega).unwrap();
            let s_inv = symplectic_inverse(&d.s).unwrap();
            let back = s_inv.transpose() * &omega * &s_inv;
            prop_assert!((back - d.standard_form()).norm() < 1e-9 * omega.norm().max(1.0));
            prop_assert!(is_symplectic(&d.s).unwrap() < 1e-10 * d.s.norm().powi(2).max(1.0));
        }
    }
}
