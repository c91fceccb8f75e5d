//! SLD and Fisher information of multimode Gaussian states.
//!
//! A state is held either through its moments `(δ, Γ)`, with
//! `Γ_jk = tr(ρ {Δr_j, Δr_k})` so that the vacuum has `Γ = I`, or through its
//! generator `ρ = exp(-½ rᵀΩr + rᵀη - ln Z)`. The SLD is the quadratic
//! operator `L = rᵀΦr + rᵀζ - ν`.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::expstate::f_scalar;
use crate::numkit::{CMatrix, RMatrix};
use crate::symplectic::{
    check_symmetric, form, modes_of, normal_modes, symplectic_inverse, williamson, LadderMap,
    SymplecticDecomposition,
};

/// Symplectic eigenvalues below `1 + PURE_FLOOR` are treated as pure modes.
pub const PURE_FLOOR: f64 = 1e-9;
/// Allowed shortfall of a symplectic eigenvalue below one.
pub const PHYSICALITY_TOLERANCE: f64 = 1e-8;
/// Relative size below which a pure-pure numerator counts as vanishing.
pub const PURE_NUMERATOR_TOLERANCE: f64 = 1e-8;
/// Tolerance of the pure-state consistency condition `Γ⁻¹Γ̇Γ⁻¹ = -JΓ̇Jᵀ`.
pub const PURE_CONSISTENCY_TOLERANCE: f64 = 1e-6;
/// Largest spread of symplectic eigenvalues accepted as degenerate.
pub const DEGENERACY_TOLERANCE: f64 = 1e-8;

/// Mean vector and covariance matrix of an `n`-mode state.
#[derive(Debug, Clone)]
pub struct GaussianMoments {
    delta: DVector<f64>,
    gamma: RMatrix,
    decomposition: SymplecticDecomposition,
}

impl GaussianMoments {
    pub fn new(delta: DVector<f64>, gamma: RMatrix) -> Result<Self> {
        let n = modes_of(&gamma)?;
        check_len(&delta, 2 * n, "mean vector")?;
        check_symmetric(&gamma, "covariance")?;
        let gamma = (&gamma + gamma.transpose()).scale(0.5);
        let decomposition = williamson(&gamma)?;
        let low = decomposition.spectrum[n - 1];
        if low < 1.0 - PHYSICALITY_TOLERANCE {
            return Err(Error::UnphysicalCovariance {
                symplectic_eigenvalue: low,
            });
        }
        Ok(Self {
            delta,
            gamma,
            decomposition,
        })
    }

    /// Zero-mean state.
    pub fn centered(gamma: RMatrix) -> Result<Self> {
        let dim = gamma.nrows();
        Self::new(DVector::zeros(dim), gamma)
    }

    pub fn n_modes(&self) -> usize {
        self.decomposition.n_modes()
    }

    pub fn delta(&self) -> &DVector<f64> {
        &self.delta
    }

    pub fn gamma(&self) -> &RMatrix {
        &self.gamma
    }

    /// Williamson form of `Γ`, spectrum descending.
    pub fn decomposition(&self) -> &SymplecticDecomposition {
        &self.decomposition
    }

    pub fn symplectic_spectrum(&self) -> &[f64] {
        &self.decomposition.spectrum
    }

    pub fn is_pure(&self) -> bool {
        self.decomposition.spectrum.iter().all(|&l| l < 1.0 + PURE_FLOOR)
    }

    fn gamma_inverse(&self) -> Result<RMatrix> {
        self.gamma.clone().try_inverse().ok_or(Error::NotPositiveDefinite {
            min_eigenvalue: 0.0,
        })
    }
}

/// Quadratic form `Ω`, linear term `η` and log-normalization of `ρ = e^G`.
#[derive(Debug, Clone)]
pub struct GaussianGenerator {
    omega: RMatrix,
    eta: DVector<f64>,
    log_z: f64,
    modes: SymplecticDecomposition,
}

impl GaussianGenerator {
    /// Builds the generator and fixes `ln Z` from its normal modes.
    pub fn new(omega: RMatrix, eta: DVector<f64>) -> Result<Self> {
        let n = modes_of(&omega)?;
        check_len(&eta, 2 * n, "linear term")?;
        check_symmetric(&omega, "generator matrix")?;
        let omega = (&omega + omega.transpose()).scale(0.5);
        let modes = normal_modes(&omega)?;
        let shift = omega.clone().lu().solve(&eta).ok_or(Error::NotPositiveDefinite {
            min_eigenvalue: 0.0,
        })?;
        let log_z = 0.5 * eta.dot(&shift)
            - modes.spectrum.iter().map(|&e| log_two_sinh_half(e)).sum::<f64>();
        Ok(Self {
            omega,
            eta,
            log_z,
            modes,
        })
    }

    pub fn n_modes(&self) -> usize {
        self.modes.n_modes()
    }

    pub fn omega(&self) -> &RMatrix {
        &self.omega
    }

    pub fn eta(&self) -> &DVector<f64> {
        &self.eta
    }

    pub fn log_z(&self) -> f64 {
        self.log_z
    }

    /// Normal-mode form of `Ω`, energies ascending.
    pub fn normal_modes(&self) -> &SymplecticDecomposition {
        &self.modes
    }

    /// Mean `δ = Ω⁻¹η`.
    pub fn mean(&self) -> DVector<f64> {
        self.omega.clone().lu().solve(&self.eta).expect("Ω is positive definite")
    }
}

/// `ln(2 sinh(ε/2))`, stable for large `ε`.
fn log_two_sinh_half(e: f64) -> f64 {
    0.5 * e + (-(-e).exp()).ln_1p()
}

fn check_len(v: &DVector<f64>, expected: usize, what: &str) -> Result<()> {
    if v.len() != expected {
        return Err(Error::Argument(format!(
            "{what} has length {}, expected {expected}",
            v.len()
        )));
    }
    Ok(())
}

/// `(δ̇, Γ̇)` at the working point.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentDerivatives {
    pub delta_dot: DVector<f64>,
    pub gamma_dot: RMatrix,
}

impl MomentDerivatives {
    pub fn new(delta_dot: DVector<f64>, gamma_dot: RMatrix) -> Result<Self> {
        let n = modes_of(&gamma_dot)?;
        check_len(&delta_dot, 2 * n, "mean derivative")?;
        let dev = (&gamma_dot - gamma_dot.transpose()).amax();
        if dev > 1e-9 * gamma_dot.norm().max(1.0) {
            return Err(Error::Validation(format!(
                "covariance derivative is not symmetric (max deviation {dev:e})"
            )));
        }
        let gamma_dot = (&gamma_dot + gamma_dot.transpose()).scale(0.5);
        Ok(Self {
            delta_dot,
            gamma_dot,
        })
    }

    /// Image under the symplectic congruence `r ↦ T r`.
    pub fn transformed(&self, t: &RMatrix) -> Self {
        Self {
            delta_dot: t * &self.delta_dot,
            gamma_dot: t * &self.gamma_dot * t.transpose(),
        }
    }
}

/// `(Ω̇, η̇)` at the working point.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorDerivatives {
    pub omega_dot: RMatrix,
    pub eta_dot: DVector<f64>,
}

impl GeneratorDerivatives {
    pub fn new(omega_dot: RMatrix, eta_dot: DVector<f64>) -> Result<Self> {
        let n = modes_of(&omega_dot)?;
        check_len(&eta_dot, 2 * n, "linear-term derivative")?;
        let dev = (&omega_dot - omega_dot.transpose()).amax();
        if dev > 1e-9 * omega_dot.norm().max(1.0) {
            return Err(Error::Validation(format!(
                "generator-matrix derivative is not symmetric (max deviation {dev:e})"
            )));
        }
        let omega_dot = (&omega_dot + omega_dot.transpose()).scale(0.5);
        Ok(Self { omega_dot, eta_dot })
    }
}

/// Coefficients of `L = rᵀΦr + rᵀζ - ν`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticSld {
    pub phi: RMatrix,
    pub zeta: DVector<f64>,
    pub nu: f64,
}

impl QuadraticSld {
    /// Fixes `ν` from `tr(ρL) = 0` for a lab-frame `(Φ, ζ)`.
    fn with_trace_condition(m: &GaussianMoments, phi: RMatrix, zeta: DVector<f64>) -> Self {
        let d = m.delta();
        let nu = 0.5 * m.gamma().component_mul(&phi).sum() + d.dot(&(&phi * d)) + d.dot(&zeta);
        Self { phi, zeta, nu }
    }

    /// Re-expresses a displaced-frame `(Φ, ζ_d)` in lab coordinates.
    fn from_displaced(m: &GaussianMoments, phi: RMatrix, zeta_displaced: DVector<f64>) -> Self {
        let zeta = zeta_displaced - (&phi * m.delta()).scale(2.0);
        Self::with_trace_condition(m, phi, zeta)
    }

    /// `ζ` in the frame centred on the mean.
    pub fn displaced_zeta(&self, delta: &DVector<f64>) -> DVector<f64> {
        &self.zeta + (&self.phi * delta).scale(2.0)
    }
}

/// Residuals of the moment defining equations for an SLD.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SldResiduals {
    /// `‖ΓΦΓ - JΦJᵀ - Γ̇‖_F`
    pub covariance: f64,
    /// `‖½Γζ_d - δ̇‖`
    pub mean: f64,
    /// `|½tr(ΓΦ) + δᵀΦδ + δᵀζ - ν|`
    pub trace: f64,
}

impl SldResiduals {
    pub fn max(&self) -> f64 {
        self.covariance.max(self.mean).max(self.trace)
    }
}

/// `Γ = S⁻¹ diag(coth(ε/2)) S^{-T}`, `δ = Ω⁻¹η`.
pub fn generator_to_moments(g: &GaussianGenerator) -> Result<GaussianMoments> {
    let modes = g.normal_modes();
    let n = modes.n_modes();
    let s_inv = symplectic_inverse(&modes.s)?;
    let coth = RMatrix::from_fn(2 * n, 2 * n, |r, c| {
        if r == c {
            1.0 / (0.5 * modes.spectrum[r % n]).tanh()
        } else {
            0.0
        }
    });
    let gamma = &s_inv * coth * s_inv.transpose();
    GaussianMoments::new(g.mean(), (&gamma + gamma.transpose()).scale(0.5))
}

/// Inverse of [`generator_to_moments`]: `ε_j = ln((Λ_j + 1)/(Λ_j - 1))`.
pub fn moments_to_generator(m: &GaussianMoments) -> Result<GaussianGenerator> {
    let d = m.decomposition();
    let n = d.n_modes();
    let low = d.spectrum[n - 1];
    if low < 1.0 + PURE_FLOOR {
        return Err(Error::PureMode {
            symplectic_eigenvalue: low,
        });
    }
    let eps: Vec<f64> = d.spectrum.iter().map(|&l| ((l + 1.0) / (l - 1.0)).ln()).collect();
    let k = RMatrix::from_fn(2 * n, 2 * n, |r, c| if r == c { eps[r % n] } else { 0.0 });
    let omega = d.s.transpose() * k * &d.s;
    let omega = (&omega + omega.transpose()).scale(0.5);
    let eta = &omega * m.delta();
    GaussianGenerator::new(omega, eta)
}

/// Ladder-basis coefficients of the generator-route SLD.
struct LadderSld {
    phi: CMatrix,
    zeta: DVector<Complex64>,
    eps: Vec<f64>,
}

fn ladder_sld(g: &GaussianGenerator, d: &GeneratorDerivatives) -> Result<(LadderSld, RMatrix)> {
    let n = g.n_modes();
    if d.omega_dot.nrows() != 2 * n {
        return Err(Error::Argument(format!(
            "derivative has dimension {}, generator has {}",
            d.omega_dot.nrows(),
            2 * n
        )));
    }
    let modes = g.normal_modes();
    let s = &modes.s;
    let s_inv = symplectic_inverse(s)?;
    let delta = g.mean();

    // displaced frame, then normal-mode frame
    let eta_dot_d = &d.eta_dot - &d.omega_dot * &delta;
    let omega_dot_s = s_inv.transpose() * &d.omega_dot * &s_inv;
    let eta_dot_s = s_inv.transpose() * eta_dot_d;

    let ladder = LadderMap::new(n)?;
    let mut phi = ladder.to_ladder(&omega_dot_s);
    let mut zeta = ladder.vector_to_ladder(&eta_dot_s);
    let eps: Vec<f64> = (0..2 * n).map(|k| modes.spectrum[k % n]).collect();
    for j in 0..2 * n {
        for k in 0..2 * n {
            let same_block = (j < n) == (k < n);
            let t = if same_block { eps[j] - eps[k] } else { eps[j] + eps[k] };
            phi[(j, k)] *= -0.5 * f_scalar(t);
        }
        zeta[j] *= f_scalar(eps[j]);
    }
    Ok((LadderSld { phi, zeta, eps }, s.clone()))
}

/// SLD from the generator form, via the normal-mode and ladder bases.
pub fn sld_from_generator(g: &GaussianGenerator, d: &GeneratorDerivatives) -> Result<QuadraticSld> {
    let (l, s) = ladder_sld(g, d)?;
    let n = g.n_modes();
    let ladder = LadderMap::new(n)?;
    let phi_s = ladder.from_ladder(&l.phi).map(|z| z.re);
    let zeta_s = ladder.vector_from_ladder(&l.zeta).map(|z| z.re);
    let phi = s.transpose() * phi_s * &s;
    let phi = (&phi + phi.transpose()).scale(0.5);
    let zeta_d = s.transpose() * zeta_s;
    let m = generator_to_moments(g)?;
    Ok(QuadraticSld::from_displaced(&m, phi, zeta_d))
}

/// Fisher information from the generator form as an explicit coth-weighted sum.
pub fn qfi_from_generator(g: &GaussianGenerator, d: &GeneratorDerivatives) -> Result<f64> {
    let (l, _) = ladder_sld(g, d)?;
    let n = g.n_modes();
    let coth: Vec<f64> = l.eps[..n].iter().map(|e| 1.0 / (0.5 * e).tanh()).collect();
    let mut qfi = 0.0;
    for j in 0..n {
        for k in 0..n {
            let a = l.phi[(j, k)].norm_sqr();
            let b = l.phi[(j, k + n)].norm_sqr();
            qfi += (a + b) * coth[j] * coth[k] + b - a;
        }
        qfi += l.zeta[j].norm_sqr() * coth[j];
    }
    Ok(qfi)
}

fn check_moment_dims(m: &GaussianMoments, d: &MomentDerivatives) -> Result<()> {
    if d.gamma_dot.nrows() != m.gamma().nrows() {
        return Err(Error::Argument(format!(
            "derivative has dimension {}, state has {}",
            d.gamma_dot.nrows(),
            m.gamma().nrows()
        )));
    }
    Ok(())
}

/// SLD from the moments by solving `Γ̇ = ΓΦΓ - JΦJᵀ` in Williamson form.
pub fn sld_from_moments(m: &GaussianMoments, d: &MomentDerivatives) -> Result<QuadraticSld> {
    check_moment_dims(m, d)?;
    let n = m.n_modes();
    let w = m.decomposition();
    let s = &w.s;
    let j = form(n);
    let lambda: Vec<f64> = (0..2 * n).map(|k| w.spectrum[k % n]).collect();
    let gd_s = s * &d.gamma_dot * s.transpose();
    let flipped = &j * &gd_s * j.transpose();
    let scale = gd_s.norm().max(1.0);

    let mut phi_s = RMatrix::zeros(2 * n, 2 * n);
    let mut worst = 0.0f64;
    for a in 0..2 * n {
        for b in 0..2 * n {
            let numerator = lambda[a] * lambda[b] * gd_s[(a, b)] + flipped[(a, b)];
            if lambda[a] < 1.0 + PURE_FLOOR && lambda[b] < 1.0 + PURE_FLOOR {
                worst = worst.max(numerator.abs());
                phi_s[(a, b)] = -0.5 * flipped[(a, b)];
            } else {
                let l2 = lambda[a] * lambda[b];
                phi_s[(a, b)] = numerator / (l2 * l2 - 1.0);
            }
        }
    }
    if worst > PURE_NUMERATOR_TOLERANCE * scale {
        return Err(Error::PurityBreaking { residual: worst });
    }
    let phi = s.transpose() * phi_s * s;
    let phi = (&phi + phi.transpose()).scale(0.5);
    let zeta_d = m.gamma_inverse()? * &d.delta_dot * 2.0;
    Ok(QuadraticSld::from_displaced(m, phi, zeta_d))
}

/// `I = ½tr(Γ̇Φ) + 2δ̇ᵀΓ⁻¹δ̇`
pub fn qfi_from_moments(m: &GaussianMoments, d: &MomentDerivatives) -> Result<f64> {
    let sld = sld_from_moments(m, d)?;
    qfi_of(m, d, &sld.phi)
}

/// `I = ½tr(Γ̇Φ) + 2δ̇ᵀΓ⁻¹δ̇` for an SLD obtained by any route.
pub fn qfi_of_sld(m: &GaussianMoments, d: &MomentDerivatives, sld: &QuadraticSld) -> Result<f64> {
    check_moment_dims(m, d)?;
    qfi_of(m, d, &sld.phi)
}

fn qfi_of(m: &GaussianMoments, d: &MomentDerivatives, phi: &RMatrix) -> Result<f64> {
    let inv = m.gamma_inverse()?;
    Ok(0.5 * d.gamma_dot.component_mul(phi).sum() + 2.0 * d.delta_dot.dot(&(inv * &d.delta_dot)))
}

/// Pure-state SLD `Φ = ½Γ⁻¹Γ̇Γ⁻¹ = -½JΓ̇Jᵀ`.
pub fn sld_pure(m: &GaussianMoments, d: &MomentDerivatives) -> Result<QuadraticSld> {
    check_moment_dims(m, d)?;
    if !m.is_pure() {
        return Err(Error::Argument(format!(
            "state is mixed (symplectic eigenvalue {}); use sld_from_moments",
            m.symplectic_spectrum()[0]
        )));
    }
    let inv = m.gamma_inverse()?;
    let j = form(m.n_modes());
    let sandwich = &inv * &d.gamma_dot * &inv;
    let flipped = &j * &d.gamma_dot * j.transpose();
    let residual = (&sandwich + &flipped).norm();
    if residual > PURE_CONSISTENCY_TOLERANCE * d.gamma_dot.norm().max(1.0) {
        return Err(Error::PurityBreaking { residual });
    }
    let phi = sandwich.scale(0.5);
    let phi = (&phi + phi.transpose()).scale(0.5);
    let zeta_d = &inv * &d.delta_dot * 2.0;
    Ok(QuadraticSld::from_displaced(m, phi, zeta_d))
}

/// `I = ¼tr((Γ̇Γ⁻¹)²) + 2δ̇ᵀΓ⁻¹δ̇` for a pure state.
pub fn qfi_pure(m: &GaussianMoments, d: &MomentDerivatives) -> Result<f64> {
    sld_pure(m, d)?;
    let inv = m.gamma_inverse()?;
    let x = &d.gamma_dot * &inv;
    Ok(0.25 * (&x * &x).trace() + 2.0 * d.delta_dot.dot(&(inv * &d.delta_dot)))
}

/// Closed form `Φ = (λ⁴Γ⁻¹Γ̇Γ⁻¹ + JΓ̇Jᵀ)/(λ⁴ - 1)` when every symplectic eigenvalue equals `λ`.
pub fn sld_degenerate(m: &GaussianMoments, d: &MomentDerivatives) -> Result<QuadraticSld> {
    check_moment_dims(m, d)?;
    let spectrum = m.symplectic_spectrum();
    let (hi, lo) = (spectrum[0], spectrum[spectrum.len() - 1]);
    if hi - lo > DEGENERACY_TOLERANCE * hi {
        return Err(Error::Argument(format!(
            "symplectic spectrum is not degenerate ({lo} .. {hi}); use sld_from_moments"
        )));
    }
    let lambda = spectrum.iter().sum::<f64>() / spectrum.len() as f64;
    if lambda < 1.0 + PURE_FLOOR {
        return Err(Error::Argument("state is pure; use sld_pure".into()));
    }
    let inv = m.gamma_inverse()?;
    let j = form(m.n_modes());
    let l4 = lambda.powi(4);
    let phi = (&inv * &d.gamma_dot * &inv).scale(l4) + &j * &d.gamma_dot * j.transpose();
    let phi = phi.scale(1.0 / (l4 - 1.0));
    let phi = (&phi + phi.transpose()).scale(0.5);
    let zeta_d = &inv * &d.delta_dot * 2.0;
    Ok(QuadraticSld::from_displaced(m, phi, zeta_d))
}

/// High-temperature approximation `½tr((Γ̇Γ⁻¹)²) + 2δ̇ᵀΓ⁻¹δ̇`.
pub fn qfi_noisy_approx(m: &GaussianMoments, d: &MomentDerivatives) -> Result<f64> {
    check_moment_dims(m, d)?;
    let inv = m.gamma_inverse()?;
    let x = &d.gamma_dot * &inv;
    Ok(0.5 * (&x * &x).trace() + 2.0 * d.delta_dot.dot(&(inv * &d.delta_dot)))
}

/// Defining-equation residuals of `sld` against the family `(m, d)`.
pub fn residuals(m: &GaussianMoments, d: &MomentDerivatives, sld: &QuadraticSld) -> SldResiduals {
    let j = form(m.n_modes());
    let g = m.gamma();
    let covariance = (g * &sld.phi * g - &j * &sld.phi * j.transpose() - &d.gamma_dot).norm();
    let zeta_d = sld.displaced_zeta(m.delta());
    let mean = ((g * zeta_d).scale(0.5) - &d.delta_dot).norm();
    let dl = m.delta();
    let expected = 0.5 * g.component_mul(&sld.phi).sum() + dl.dot(&(&sld.phi * dl)) + dl.dot(&sld.zeta);
    SldResiduals {
        covariance,
        mean,
        trace: (expected - sld.nu).abs(),
    }
}
