//! Catalog of one-parameter state families and their derivatives.
//!
//! Finite-dimensional families are held in exponential form; Gaussian
//! families through their moments, with the generator form derived on demand.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expstate::{ExponentialState, GeneratorDerivative};
use crate::fockspace::{gaussian_fock, two_mode_squeezed_fock};
use crate::gaussian::{
    moments_to_generator, GaussianGenerator, GaussianMoments, GeneratorDerivatives, MomentDerivatives,
    DEGENERACY_TOLERANCE,
};
use crate::numkit::{unitary_exp, CMatrix, HermitianOperator, RMatrix};
use crate::symplectic::form;

/// Matrix entry: a real number or an `[re, im]` pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Entry {
    Real(f64),
    Complex([f64; 2]),
}

impl Entry {
    fn value(self) -> Complex64 {
        match self {
            Entry::Real(x) => Complex64::new(x, 0.0),
            Entry::Complex([re, im]) => Complex64::new(re, im),
        }
    }
}

/// Row-major matrix as nested arrays.
pub type MatrixRows = Vec<Vec<Entry>>;

fn square_dim<T>(rows: &[Vec<T>], what: &str) -> Result<usize> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(Error::Validation(format!("{what} must be a non-empty square matrix")));
    }
    Ok(n)
}

/// Parses a Hermitian matrix, reporting the offending entry if it is not.
pub fn hermitian_from_rows(rows: &MatrixRows, what: &str) -> Result<HermitianOperator> {
    let n = square_dim(rows, what)?;
    HermitianOperator::new(CMatrix::from_fn(n, n, |r, c| rows[r][c].value()))
}

fn real_from_rows(rows: &[Vec<f64>], what: &str) -> Result<RMatrix> {
    let n = square_dim(rows, what)?;
    Ok(RMatrix::from_fn(n, n, |r, c| rows[r][c]))
}

/// Estimated parameter of [`Family::SingleModeGaussian`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SingleModeParameter {
    /// `θ = n̄`
    Nbar,
    /// `θ = ε` with `n̄ = 1/(e^ε - 1)`
    Epsilon,
    /// `θ = r`
    Squeeze,
    /// `θ = φ`
    SqueezePhase,
    /// Phase rotation `e^{-iθ a†a}` applied to the state
    Rotation,
    /// `θ = Re α`
    DisplacementX,
    /// `θ = Im α`
    DisplacementP,
}

/// Estimated parameter of [`Family::TwoModeSqueezed`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TwoModeParameter {
    Squeeze,
    Nbar,
}

/// A one-parameter family `θ ↦ ρ(θ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Family {
    /// `G(θ) ∝ (γ + γ̇θ)σ₃ + θ(τ₁σ₁ + τ₂σ₂)`, normalized.
    QubitExponential {
        #[serde(default)]
        gamma: f64,
        #[serde(default)]
        gamma_rate: f64,
        #[serde(default)]
        tau1: f64,
        #[serde(default)]
        tau2: f64,
    },
    /// `G(θ) ∝ G₀ + θG₁`, normalized.
    ExplicitExponential { g0: MatrixRows, g1: MatrixRows },
    /// `ρ(θ) = e^{-iθH} e^{G₀} e^{iθH}`, with `G₀` normalized.
    UnitaryRotation { g0: MatrixRows, h: MatrixRows },
    /// `ρ(β) = e^{-βH}/Z`, `θ = β`.
    ThermalBeta { h: MatrixRows },
    /// `D(α) S(r e^{iφ}) ρ_th(n̄) S† D†`; `θ` replaces the named parameter.
    SingleModeGaussian {
        #[serde(default)]
        nbar: f64,
        #[serde(default)]
        r: f64,
        #[serde(default)]
        phi: f64,
        #[serde(default)]
        alpha: [f64; 2],
        parameter: SingleModeParameter,
    },
    /// `S₂(r)(ρ_th(n̄) ⊗ ρ_th(n̄))S₂†`; `θ` replaces the named parameter.
    TwoModeSqueezed {
        #[serde(default)]
        r: f64,
        #[serde(default)]
        nbar: f64,
        parameter: TwoModeParameter,
    },
    /// `δ(θ) = δ₀ + θδ₁`, `Γ(θ) = Γ₀ + θΓ₁`.
    ExplicitMoments {
        delta0: Vec<f64>,
        #[serde(default)]
        delta1: Option<Vec<f64>>,
        gamma0: Vec<Vec<f64>>,
        #[serde(default)]
        gamma1: Option<Vec<Vec<f64>>>,
    },
}

/// Which state form a family is natively held in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Representation {
    Exponential,
    Moments,
}

/// How a derivative was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivativeKind {
    Analytic,
    CentralDifference,
    Richardson,
}

/// Finite-difference controls.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FdOptions {
    /// Step; `None` selects `1e-5 · max(1, |θ|)`.
    pub step: Option<f64>,
    /// Halve the step once and extrapolate.
    pub richardson: bool,
    /// Ignore analytic derivatives.
    pub numeric: bool,
}

impl FdOptions {
    pub fn step_at(&self, theta: f64) -> f64 {
        self.step.unwrap_or_else(|| default_step(theta))
    }
}

/// `1e-5 · max(1, |θ|)`
pub fn default_step(theta: f64) -> f64 {
    1e-5 * theta.abs().max(1.0)
}

/// The family state in its native representation.
#[derive(Debug, Clone)]
pub enum FamilyState {
    Exponential(ExponentialState),
    Moments(GaussianMoments),
}

/// Representation-matched derivatives at one `θ`.
#[derive(Debug, Clone)]
pub enum DerivativeBundle {
    Exponential {
        state: ExponentialState,
        gdot: GeneratorDerivative,
        kind: DerivativeKind,
        step: Option<f64>,
    },
    Moments {
        moments: GaussianMoments,
        derivatives: MomentDerivatives,
        kind: DerivativeKind,
        step: Option<f64>,
    },
    Generator {
        generator: GaussianGenerator,
        derivatives: GeneratorDerivatives,
        kind: DerivativeKind,
        step: Option<f64>,
    },
}

fn pauli(k: usize) -> CMatrix {
    let (o, l, i) = (Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0));
    match k {
        1 => CMatrix::from_row_slice(2, 2, &[o, l, l, o]),
        2 => CMatrix::from_row_slice(2, 2, &[o, -i, i, o]),
        _ => CMatrix::from_row_slice(2, 2, &[l, o, o, -l]),
    }
}

fn rotation(angle: f64) -> RMatrix {
    let (s, c) = angle.sin_cos();
    RMatrix::from_row_slice(2, 2, &[c, -s, s, c])
}

fn out_of_domain(theta: f64, reason: &str) -> Error {
    Error::OutOfDomain {
        theta,
        reason: reason.into(),
    }
}

/// Resolved single-mode parameters at one `θ`.
struct SingleMode {
    nbar: f64,
    r: f64,
    phi: f64,
    alpha: Complex64,
}

impl SingleMode {
    fn lambda(&self) -> f64 {
        2.0 * self.nbar + 1.0
    }

    /// `R(φ/2) diag(e^{-2r}, e^{2r}) R(φ/2)ᵀ`
    fn shape(&self) -> RMatrix {
        let rot = rotation(0.5 * self.phi);
        let core = RMatrix::from_row_slice(2, 2, &[(-2.0 * self.r).exp(), 0.0, 0.0, (2.0 * self.r).exp()]);
        &rot * core * rot.transpose()
    }

    fn moments(&self) -> Result<GaussianMoments> {
        let s2 = std::f64::consts::SQRT_2;
        let delta = DVector::from_row_slice(&[s2 * self.alpha.re, s2 * self.alpha.im]);
        GaussianMoments::new(delta, self.shape().scale(self.lambda()))
    }
}

fn two_mode_shape(r: f64) -> (RMatrix, RMatrix) {
    let (c, s) = ((2.0 * r).cosh(), (2.0 * r).sinh());
    let value = RMatrix::from_row_slice(4, 4, &[
        c, s, 0.0, 0.0, //
        s, c, 0.0, 0.0, //
        0.0, 0.0, c, -s, //
        0.0, 0.0, -s, c,
    ]);
    let rate = RMatrix::from_row_slice(4, 4, &[
        s, c, 0.0, 0.0, //
        c, s, 0.0, 0.0, //
        0.0, 0.0, s, -c, //
        0.0, 0.0, -c, s,
    ])
    .scale(2.0);
    (value, rate)
}

impl Family {
    pub fn kind(&self) -> &'static str {
        match self {
            Family::QubitExponential { .. } => "qubit_exponential",
            Family::ExplicitExponential { .. } => "explicit_exponential",
            Family::UnitaryRotation { .. } => "unitary_rotation",
            Family::ThermalBeta { .. } => "thermal_beta",
            Family::SingleModeGaussian { .. } => "single_mode_gaussian",
            Family::TwoModeSqueezed { .. } => "two_mode_squeezed",
            Family::ExplicitMoments { .. } => "explicit_moments",
        }
    }

    pub fn representation(&self) -> Representation {
        match self {
            Family::QubitExponential { .. }
            | Family::ExplicitExponential { .. }
            | Family::UnitaryRotation { .. }
            | Family::ThermalBeta { .. } => Representation::Exponential,
            _ => Representation::Moments,
        }
    }

    /// Name of the estimated parameter.
    pub fn parameter_name(&self) -> &'static str {
        match self {
            Family::QubitExponential { .. } | Family::ExplicitExponential { .. } => "theta",
            Family::UnitaryRotation { .. } => "angle",
            Family::ThermalBeta { .. } => "beta",
            Family::SingleModeGaussian { parameter, .. } => match parameter {
                SingleModeParameter::Nbar => "nbar",
                SingleModeParameter::Epsilon => "epsilon",
                SingleModeParameter::Squeeze => "squeeze",
                SingleModeParameter::SqueezePhase => "squeeze_phase",
                SingleModeParameter::Rotation => "rotation",
                SingleModeParameter::DisplacementX => "displacement_x",
                SingleModeParameter::DisplacementP => "displacement_p",
            },
            Family::TwoModeSqueezed { parameter, .. } => match parameter {
                TwoModeParameter::Squeeze => "squeeze",
                TwoModeParameter::Nbar => "nbar",
            },
            Family::ExplicitMoments { .. } => "theta",
        }
    }

    /// Every catalog family declares analytic derivatives in its native form.
    pub fn has_analytic_derivative(&self) -> bool {
        true
    }

    /// Number of modes of a Gaussian family, `None` for finite-dimensional ones.
    pub fn n_modes(&self) -> Option<usize> {
        match self {
            Family::SingleModeGaussian { .. } => Some(1),
            Family::TwoModeSqueezed { .. } => Some(2),
            Family::ExplicitMoments { gamma0, .. } => Some(gamma0.len() / 2),
            _ => None,
        }
    }

    /// Copy with one numeric field replaced, addressed by its JSON name.
    pub fn with_field(&self, name: &str, value: f64) -> Result<Family> {
        let mut json = serde_json::to_value(self).map_err(|e| Error::Validation(e.to_string()))?;
        let obj = json.as_object_mut().expect("families serialize to objects");
        match obj.get(name) {
            Some(v) if v.is_number() => {
                obj.insert(name.into(), serde_json::json!(value));
            }
            _ => {
                return Err(Error::Validation(format!(
                    "family {} has no numeric field {name:?}",
                    self.kind()
                )))
            }
        }
        serde_json::from_value(json).map_err(|e| Error::Validation(e.to_string()))
    }

    fn check_theta(theta: f64) -> Result<()> {
        if !theta.is_finite() {
            return Err(out_of_domain(theta, "theta must be finite"));
        }
        Ok(())
    }

    /// Un-normalized generator and its θ-derivative for exponential families.
    fn raw_generator(&self, theta: f64) -> Result<(HermitianOperator, HermitianOperator)> {
        Self::check_theta(theta)?;
        match self {
            Family::QubitExponential {
                gamma,
                gamma_rate,
                tau1,
                tau2,
            } => {
                let value = pauli(3).scale(gamma + gamma_rate * theta)
                    + (pauli(1).scale(*tau1) + pauli(2).scale(*tau2)).scale(theta);
                let rate = pauli(3).scale(*gamma_rate) + pauli(1).scale(*tau1) + pauli(2).scale(*tau2);
                Ok((HermitianOperator::hermitian_part(value), HermitianOperator::hermitian_part(rate)))
            }
            Family::ExplicitExponential { g0, g1 } => {
                let a = hermitian_from_rows(g0, "g0")?;
                let b = hermitian_from_rows(g1, "g1")?;
                check_same(&a, &b)?;
                Ok((a.add(&b.scale(theta)), b))
            }
            Family::UnitaryRotation { g0, h } => {
                let g = ExponentialState::normalized(hermitian_from_rows(g0, "g0")?)?;
                let h = hermitian_from_rows(h, "h")?;
                check_same(g.generator(), &h)?;
                let u = unitary_exp(&h, theta)?;
                let rotated = HermitianOperator::hermitian_part(&u * g.generator().matrix() * u.adjoint());
                let i = Complex64::new(0.0, 1.0);
                let rate = (rotated.matrix() * h.matrix() - h.matrix() * rotated.matrix()) * i;
                Ok((rotated, HermitianOperator::hermitian_part(rate)))
            }
            Family::ThermalBeta { h } => {
                let h = hermitian_from_rows(h, "h")?;
                Ok((h.scale(-theta), h.scale(-1.0)))
            }
            _ => Err(Error::Validation(format!(
                "{} is a Gaussian family and has no finite-dimensional generator",
                self.kind()
            ))),
        }
    }

    /// Normalized exponential state at `θ`.
    pub fn exponential(&self, theta: f64) -> Result<ExponentialState> {
        ExponentialState::normalized(self.raw_generator(theta)?.0)
    }

    fn single_mode(&self, theta: f64) -> Result<SingleMode> {
        Self::check_theta(theta)?;
        let Family::SingleModeGaussian {
            nbar,
            r,
            phi,
            alpha,
            parameter,
        } = self
        else {
            unreachable!("caller matched the variant")
        };
        let mut s = SingleMode {
            nbar: *nbar,
            r: *r,
            phi: *phi,
            alpha: Complex64::new(alpha[0], alpha[1]),
        };
        match parameter {
            SingleModeParameter::Nbar => s.nbar = theta,
            SingleModeParameter::Epsilon => {
                if theta <= 0.0 {
                    return Err(out_of_domain(theta, "mode energy must be positive"));
                }
                s.nbar = 1.0 / theta.exp_m1();
            }
            SingleModeParameter::Squeeze => s.r = theta,
            SingleModeParameter::SqueezePhase => s.phi = theta,
            SingleModeParameter::Rotation => {
                s.phi -= 2.0 * theta;
                s.alpha *= Complex64::from_polar(1.0, -theta);
            }
            SingleModeParameter::DisplacementX => s.alpha.re = theta,
            SingleModeParameter::DisplacementP => s.alpha.im = theta,
        }
        if s.nbar.is_nan() || s.nbar < 0.0 {
            return Err(out_of_domain(theta, "thermal occupation must be non-negative"));
        }
        Ok(s)
    }

    fn two_mode(&self, theta: f64) -> Result<(f64, f64)> {
        Self::check_theta(theta)?;
        let Family::TwoModeSqueezed { r, nbar, parameter } = self else {
            unreachable!("caller matched the variant")
        };
        let (r, nbar) = match parameter {
            TwoModeParameter::Squeeze => (theta, *nbar),
            TwoModeParameter::Nbar => (*r, theta),
        };
        if nbar.is_nan() || nbar < 0.0 {
            return Err(out_of_domain(theta, "thermal occupation must be non-negative"));
        }
        Ok((r, nbar))
    }

    fn explicit_moments(&self, theta: f64) -> Result<(GaussianMoments, MomentDerivatives)> {
        Self::check_theta(theta)?;
        let Family::ExplicitMoments {
            delta0,
            delta1,
            gamma0,
            gamma1,
        } = self
        else {
            unreachable!("caller matched the variant")
        };
        let g0 = real_from_rows(gamma0, "gamma0")?;
        let dim = g0.nrows();
        let g1 = match gamma1 {
            Some(g) => real_from_rows(g, "gamma1")?,
            None => RMatrix::zeros(dim, dim),
        };
        let d0 = DVector::from_column_slice(delta0);
        let d1 = match delta1 {
            Some(d) => DVector::from_column_slice(d),
            None => DVector::zeros(dim),
        };
        if g1.nrows() != dim || d0.len() != dim || d1.len() != dim {
            return Err(Error::Validation("explicit moment shapes disagree".into()));
        }
        let m = GaussianMoments::new(&d0 + d1.scale(theta), &g0 + g1.scale(theta)).map_err(|e| match e {
            Error::UnphysicalCovariance { symplectic_eigenvalue } => out_of_domain(
                theta,
                &format!("covariance is unphysical (symplectic eigenvalue {symplectic_eigenvalue})"),
            ),
            Error::NotPositiveDefinite { min_eigenvalue } => out_of_domain(
                theta,
                &format!("covariance is not positive definite (eigenvalue {min_eigenvalue})"),
            ),
            other => other,
        })?;
        Ok((m, MomentDerivatives::new(d1, g1)?))
    }

    /// Moments at `θ` together with their analytic derivative.
    fn moments_with_rate(&self, theta: f64) -> Result<(GaussianMoments, MomentDerivatives)> {
        match self {
            Family::SingleModeGaussian { parameter, .. } => {
                let s = self.single_mode(theta)?;
                let m = s.moments()?;
                let gamma = m.gamma().clone();
                let j = form(1);
                let zero = DVector::zeros(2);
                let (delta_dot, gamma_dot) = match parameter {
                    SingleModeParameter::Nbar => (zero, s.shape().scale(2.0)),
                    SingleModeParameter::Epsilon => {
                        (zero, s.shape().scale(-2.0 * s.nbar * (s.nbar + 1.0)))
                    }
                    SingleModeParameter::Squeeze => {
                        let rot = rotation(0.5 * s.phi);
                        let core = RMatrix::from_row_slice(2, 2, &[
                            -2.0 * (-2.0 * s.r).exp(),
                            0.0,
                            0.0,
                            2.0 * (2.0 * s.r).exp(),
                        ]);
                        (zero, (&rot * core * rot.transpose()).scale(s.lambda()))
                    }
                    SingleModeParameter::SqueezePhase => (zero, (&gamma * &j - &j * &gamma).scale(0.5)),
                    SingleModeParameter::Rotation => (&j * m.delta(), &j * &gamma - &gamma * &j),
                    SingleModeParameter::DisplacementX => {
                        (DVector::from_row_slice(&[std::f64::consts::SQRT_2, 0.0]), RMatrix::zeros(2, 2))
                    }
                    SingleModeParameter::DisplacementP => {
                        (DVector::from_row_slice(&[0.0, std::f64::consts::SQRT_2]), RMatrix::zeros(2, 2))
                    }
                };
                Ok((m, MomentDerivatives::new(delta_dot, gamma_dot)?))
            }
            Family::TwoModeSqueezed { parameter, .. } => {
                let (r, nbar) = self.two_mode(theta)?;
                let lambda = 2.0 * nbar + 1.0;
                let (shape, rate) = two_mode_shape(r);
                let m = GaussianMoments::centered(shape.scale(lambda))?;
                let gamma_dot = match parameter {
                    TwoModeParameter::Squeeze => rate.scale(lambda),
                    TwoModeParameter::Nbar => shape.scale(2.0),
                };
                Ok((m, MomentDerivatives::new(DVector::zeros(4), gamma_dot)?))
            }
            Family::ExplicitMoments { .. } => self.explicit_moments(theta),
            _ => Err(Error::Validation(format!(
                "{} is finite-dimensional and has no Gaussian moments",
                self.kind()
            ))),
        }
    }

    /// Gaussian moments at `θ`.
    pub fn moments(&self, theta: f64) -> Result<GaussianMoments> {
        Ok(self.moments_with_rate(theta)?.0)
    }

    /// Gaussian generator at `θ`; fails with `PureMode` for pure states.
    pub fn generator(&self, theta: f64) -> Result<GaussianGenerator> {
        moments_to_generator(&self.moments(theta)?)
    }

    /// The state in its native representation.
    pub fn evaluate(&self, theta: f64) -> Result<FamilyState> {
        match self.representation() {
            Representation::Exponential => Ok(FamilyState::Exponential(self.exponential(theta)?)),
            Representation::Moments => Ok(FamilyState::Moments(self.moments(theta)?)),
        }
    }

    /// Density matrix at `θ`: exact for finite-dimensional families, truncated
    /// to `fock_dim` levels (per mode) for Gaussian ones.
    pub fn density(&self, theta: f64, fock_dim: usize) -> Result<HermitianOperator> {
        match self {
            Family::SingleModeGaussian { .. } => {
                let s = self.single_mode(theta)?;
                gaussian_fock(s.nbar, s.r, s.phi, s.alpha, fock_dim)?.density()
            }
            Family::TwoModeSqueezed { .. } => {
                let (r, nbar) = self.two_mode(theta)?;
                two_mode_squeezed_fock(r, nbar, fock_dim)?.density()
            }
            Family::ExplicitMoments { .. } => Err(Error::Validation(
                "explicit_moments families have no Fock rendering".into(),
            )),
            _ => Ok(self.exponential(theta)?.density()),
        }
    }

    /// Whether [`Family::density`] depends on the truncation.
    pub fn is_truncated(&self) -> bool {
        matches!(self, Family::SingleModeGaussian { .. } | Family::TwoModeSqueezed { .. })
    }

    /// `(state, Ġ)` for an exponential family.
    pub fn exponential_derivative(
        &self,
        theta: f64,
        fd: FdOptions,
    ) -> Result<(ExponentialState, GeneratorDerivative, DerivativeKind, Option<f64>)> {
        let state = self.exponential(theta)?;
        if !fd.numeric {
            let rate = self.raw_generator(theta)?.1;
            let gdot = GeneratorDerivative::centered(&state, rate)?;
            return Ok((state, gdot, DerivativeKind::Analytic, None));
        }
        let h = fd.step_at(theta);
        let g = |t: f64| -> Result<CMatrix> { Ok(self.exponential(t)?.generator().matrix().clone()) };
        let (rate, kind) = difference(g, theta, h, fd.richardson)?;
        let gdot = GeneratorDerivative::centered(&state, HermitianOperator::hermitian_part(rate))?;
        Ok((state, gdot, kind, Some(h)))
    }

    /// `(moments, δ̇, Γ̇)` for a Gaussian family.
    pub fn moment_derivative(
        &self,
        theta: f64,
        fd: FdOptions,
    ) -> Result<(GaussianMoments, MomentDerivatives, DerivativeKind, Option<f64>)> {
        let (m, analytic) = self.moments_with_rate(theta)?;
        if !fd.numeric {
            return Ok((m, analytic, DerivativeKind::Analytic, None));
        }
        let h = fd.step_at(theta);
        let stack = |t: f64| -> Result<(DVector<f64>, RMatrix)> {
            let m = self.moments(t)?;
            Ok((m.delta().clone(), m.gamma().clone()))
        };
        let (delta_dot, kind) = difference(|t| Ok(stack(t)?.0), theta, h, fd.richardson)?;
        let (gamma_dot, _) = difference(|t| Ok(stack(t)?.1), theta, h, fd.richardson)?;
        Ok((m, MomentDerivatives::new(delta_dot, gamma_dot)?, kind, Some(h)))
    }

    /// `(generator, Ω̇, η̇)` for a Gaussian family.
    ///
    /// Analytic when every symplectic eigenvalue is equal along the family
    /// (all single-mode and two-mode squeezed families); otherwise by finite
    /// differences of the moment-to-generator map.
    pub fn generator_derivative(
        &self,
        theta: f64,
        fd: FdOptions,
    ) -> Result<(GaussianGenerator, GeneratorDerivatives, DerivativeKind, Option<f64>)> {
        let (m, rate) = self.moments_with_rate(theta)?;
        let generator = moments_to_generator(&m)?;
        let degenerate = !matches!(self, Family::ExplicitMoments { .. });
        if degenerate && !fd.numeric {
            let d = degenerate_generator_rate(&m, &rate)?;
            return Ok((generator, d, DerivativeKind::Analytic, None));
        }
        let h = fd.step_at(theta);
        let at = |t: f64| moments_to_generator(&self.moments(t)?);
        let (omega_dot, kind) = difference(|t| Ok(at(t)?.omega().clone()), theta, h, fd.richardson)?;
        let (eta_dot, _) = difference(|t| Ok(at(t)?.eta().clone()), theta, h, fd.richardson)?;
        Ok((generator, GeneratorDerivatives::new(omega_dot, eta_dot)?, kind, Some(h)))
    }

    /// Derivatives in the family's native representation.
    pub fn differentiate(&self, theta: f64, fd: FdOptions) -> Result<DerivativeBundle> {
        match self.representation() {
            Representation::Exponential => {
                let (state, gdot, kind, step) = self.exponential_derivative(theta, fd)?;
                Ok(DerivativeBundle::Exponential { state, gdot, kind, step })
            }
            Representation::Moments => {
                let (moments, derivatives, kind, step) = self.moment_derivative(theta, fd)?;
                Ok(DerivativeBundle::Moments {
                    moments,
                    derivatives,
                    kind,
                    step,
                })
            }
        }
    }
}

fn check_same(a: &HermitianOperator, b: &HermitianOperator) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::Validation(format!(
            "matrices have different dimensions ({} and {})",
            a.dim(),
            b.dim()
        )));
    }
    Ok(())
}

/// Central difference of a matrix-valued map, optionally Richardson-refined.
pub fn difference<T, F>(f: F, theta: f64, h: f64, richardson: bool) -> Result<(T, DerivativeKind)>
where
    F: Fn(f64) -> Result<T>,
    T: FiniteDifference,
{
    if h.is_nan() || h <= 0.0 {
        return Err(Error::Argument(format!("finite-difference step must be positive, got {h}")));
    }
    let central = |h: f64| -> Result<T> { Ok(f(theta + h)?.minus(&f(theta - h)?).scaled(0.5 / h)) };
    let coarse = central(h)?;
    if !richardson {
        return Ok((coarse, DerivativeKind::CentralDifference));
    }
    let fine = central(0.5 * h)?;
    Ok((fine.scaled(4.0).minus(&coarse).scaled(1.0 / 3.0), DerivativeKind::Richardson))
}

/// Linear operations needed by [`difference`].
pub trait FiniteDifference: Sized {
    fn minus(&self, other: &Self) -> Self;
    fn scaled(&self, factor: f64) -> Self;
}

impl FiniteDifference for RMatrix {
    fn minus(&self, other: &Self) -> Self {
        self - other
    }
    fn scaled(&self, factor: f64) -> Self {
        self.scale(factor)
    }
}

impl FiniteDifference for CMatrix {
    fn minus(&self, other: &Self) -> Self {
        self - other
    }
    fn scaled(&self, factor: f64) -> Self {
        self.scale(factor)
    }
}

impl FiniteDifference for DVector<f64> {
    fn minus(&self, other: &Self) -> Self {
        self - other
    }
    fn scaled(&self, factor: f64) -> Self {
        self.scale(factor)
    }
}

/// `(Ω̇, η̇)` for a family whose symplectic spectrum stays degenerate.
///
/// With every eigenvalue equal to `λ`, `Ω = ε(λ) λ Γ⁻¹` and
/// `ε(λ) = ln((λ+1)/(λ-1))`; `λ̇ = λ tr(Γ⁻¹Γ̇)/(2n)`.
pub fn degenerate_generator_rate(m: &GaussianMoments, d: &MomentDerivatives) -> Result<GeneratorDerivatives> {
    let spectrum = m.symplectic_spectrum();
    let (hi, lo) = (spectrum[0], spectrum[spectrum.len() - 1]);
    if hi - lo > DEGENERACY_TOLERANCE * hi {
        return Err(Error::Argument(format!(
            "symplectic spectrum is not degenerate ({lo} .. {hi})"
        )));
    }
    let n = m.n_modes() as f64;
    let lambda = spectrum.iter().sum::<f64>() / spectrum.len() as f64;
    let inv = m.gamma().clone().try_inverse().ok_or(Error::NotPositiveDefinite { min_eigenvalue: 0.0 })?;
    let lambda_dot = lambda * (&inv * &d.gamma_dot).trace() / (2.0 * n);
    let eps = ((lambda + 1.0) / (lambda - 1.0)).ln();
    let eps_dot = -2.0 * lambda_dot / (lambda * lambda - 1.0);
    let omega = inv.scale(eps * lambda);
    let omega_dot = inv.scale(eps_dot * lambda + eps * lambda_dot) - (&inv * &d.gamma_dot * &inv).scale(eps * lambda);
    let eta_dot = &omega_dot * m.delta() + &omega * &d.delta_dot;
    GeneratorDerivatives::new((&omega_dot + omega_dot.transpose()).scale(0.5), eta_dot)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expstate::sld_eigenbasis;
    use crate::gaussian::{qfi_from_generator, qfi_from_moments};

    fn qubit(gamma: f64, gamma_rate: f64, tau1: f64, tau2: f64) -> Family {
        Family::QubitExponential {
            gamma,
            gamma_rate,
            tau1,
            tau2,
        }
    }

    fn single(parameter: SingleModeParameter) -> Family {
        Family::SingleModeGaussian {
            nbar: 0.4,
            r: 0.3,
            phi: 0.7,
            alpha: [0.5, -0.2],
            parameter,
        }
    }

    const ALL_SINGLE: [SingleModeParameter; 7] = [
        SingleModeParameter::Nbar,
        SingleModeParameter::Epsilon,
        SingleModeParameter::Squeeze,
        SingleModeParameter::SqueezePhase,
        SingleModeParameter::Rotation,
        SingleModeParameter::DisplacementX,
        SingleModeParameter::DisplacementP,
    ];

    fn single_theta(p: SingleModeParameter) -> f64 {
        match p {
            SingleModeParameter::Nbar => 0.4,
            SingleModeParameter::Epsilon => 1.1,
            SingleModeParameter::Squeeze => 0.3,
            SingleModeParameter::SqueezePhase => 0.7,
            SingleModeParameter::Rotation => 0.25,
            SingleModeParameter::DisplacementX => 0.5,
            SingleModeParameter::DisplacementP => -0.2,
        }
    }

    #[test]
    fn qubit_evaluation() {
        let gamma = 0.5f64.atanh();
        let f = qubit(0.0, 1.0, 0.0, 0.0);
        let state = f.exponential(gamma).unwrap();
        let expect = pauli(3).scale(gamma) - CMatrix::identity(2, 2).scale((2.0 * gamma.cosh()).ln());
        assert!((state.generator().matrix() - expect).norm() < 1e-14);

        let (_, gdot, kind, _) = f.exponential_derivative(gamma, FdOptions::default()).unwrap();
        assert_eq!(kind, DerivativeKind::Analytic);
        let expect = pauli(3) - CMatrix::identity(2, 2).scale(gamma.tanh());
        assert!((gdot.operator().matrix() - expect).norm() < 1e-14);
    }

    #[test]
    fn gaussian_evaluation_examples() {
        let f = Family::SingleModeGaussian {
            nbar: 0.0,
            r: 0.0,
            phi: 0.0,
            alpha: [0.0, 0.0],
            parameter: SingleModeParameter::Nbar,
        };
        let m = f.moments(1.0).unwrap();
        assert!((m.gamma() - RMatrix::identity(2, 2).scale(3.0)).norm() < 1e-15);
        assert_eq!(m.delta().norm(), 0.0);
        let (_, d, _, _) = f.moment_derivative(1.0, FdOptions::default()).unwrap();
        assert!((&d.gamma_dot - RMatrix::identity(2, 2).scale(2.0)).norm() < 1e-15);

        let tms = Family::TwoModeSqueezed {
            r: 0.0,
            nbar: 0.0,
            parameter: TwoModeParameter::Squeeze,
        };
        assert!((tms.moments(0.0).unwrap().gamma() - RMatrix::identity(4, 4)).norm() < 1e-15);
    }

    #[test]
    fn thermal_finite_difference_matches_analytic() {
        let f = Family::SingleModeGaussian {
            nbar: 0.0,
            r: 0.0,
            phi: 0.0,
            alpha: [0.0, 0.0],
            parameter: SingleModeParameter::Nbar,
        };
        let (_, a, _, _) = f.moment_derivative(1.0, FdOptions::default()).unwrap();
        let fd = FdOptions {
            step: Some(1e-5),
            numeric: true,
            ..FdOptions::default()
        };
        let (_, n, kind, _) = f.moment_derivative(1.0, fd).unwrap();
        assert_eq!(kind, DerivativeKind::CentralDifference);
        assert!((a.gamma_dot - n.gamma_dot).amax() <= 1e-8);

        let beta = Family::ThermalBeta {
            h: vec![
                vec![Entry::Real(0.0), Entry::Real(0.3)],
                vec![Entry::Real(0.3), Entry::Real(1.0)],
            ],
        };
        let (_, a, _, _) = beta.exponential_derivative(0.8, FdOptions::default()).unwrap();
        let (_, n, _, _) = beta.exponential_derivative(0.8, fd).unwrap();
        assert!((a.operator().matrix() - n.operator().matrix()).norm() <= 1e-8);
    }

    fn relative_gap(a: &RMatrix, b: &RMatrix) -> f64 {
        (a - b).amax() / a.amax().max(1e-300)
    }

    #[test]
    fn analytic_moment_derivatives_match_finite_differences() {
        let fd = |h: f64| FdOptions {
            step: Some(h),
            numeric: true,
            ..FdOptions::default()
        };
        for p in ALL_SINGLE {
            let f = single(p);
            let theta = single_theta(p);
            let (_, a, _, _) = f.moment_derivative(theta, FdOptions::default()).unwrap();
            let (_, n1, _, _) = f.moment_derivative(theta, fd(1e-3)).unwrap();
            let (_, n2, _, _) = f.moment_derivative(theta, fd(5e-4)).unwrap();
            let (_, n, _, _) = f.moment_derivative(theta, fd(1e-5)).unwrap();
            let scale = a.gamma_dot.amax().max(a.delta_dot.amax()).max(1e-300);
            let gap = (&a.gamma_dot - &n.gamma_dot).amax().max((&a.delta_dot - &n.delta_dot).amax());
            assert!(gap <= 1e-7 * scale.max(1.0), "{p:?}: {gap}");
            // halving the step cuts the error by about four
            let e1 = (&a.gamma_dot - &n1.gamma_dot).amax() + (&a.delta_dot - &n1.delta_dot).amax();
            let e2 = (&a.gamma_dot - &n2.gamma_dot).amax() + (&a.delta_dot - &n2.delta_dot).amax();
            if e1 > 1e-11 {
                let ratio = e1 / e2;
                assert!((3.5..4.5).contains(&ratio), "{p:?}: ratio {ratio}");
            }
        }
        for p in [TwoModeParameter::Squeeze, TwoModeParameter::Nbar] {
            let f = Family::TwoModeSqueezed { r: 0.4, nbar: 0.3, parameter: p };
            let theta = if p == TwoModeParameter::Squeeze { 0.4 } else { 0.3 };
            let (_, a, _, _) = f.moment_derivative(theta, FdOptions::default()).unwrap();
            let (_, n, _, _) = f.moment_derivative(theta, fd(1e-5)).unwrap();
            assert!(relative_gap(&a.gamma_dot, &n.gamma_dot) < 1e-7);
        }
    }

    #[test]
    fn analytic_generator_derivatives_match_finite_differences() {
        let rich = FdOptions {
            step: Some(1e-3),
            richardson: true,
            numeric: true,
        };
        for p in ALL_SINGLE {
            let f = single(p);
            let theta = single_theta(p);
            let (g, a, kind, _) = f.generator_derivative(theta, FdOptions::default()).unwrap();
            assert_eq!(kind, DerivativeKind::Analytic);
            let (_, n, _, _) = f.generator_derivative(theta, rich).unwrap();
            let scale = a.omega_dot.amax().max(a.eta_dot.amax()).max(1.0);
            let gap = (&a.omega_dot - &n.omega_dot).amax().max((&a.eta_dot - &n.eta_dot).amax());
            assert!(gap < 1e-8 * scale, "{p:?}: {gap}");

            // and both routes give the same Fisher information
            let (m, d, _, _) = f.moment_derivative(theta, FdOptions::default()).unwrap();
            let qm = qfi_from_moments(&m, &d).unwrap();
            let qg = qfi_from_generator(&g, &a).unwrap();
            assert!((qm - qg).abs() < 1e-10 * qm.max(1.0), "{p:?}: {qm} vs {qg}");
        }
    }

    #[test]
    fn representation_coherence_two_mode() {
        for p in [TwoModeParameter::Squeeze, TwoModeParameter::Nbar] {
            let f = Family::TwoModeSqueezed { r: 0.4, nbar: 0.3, parameter: p };
            let theta = if p == TwoModeParameter::Squeeze { 0.4 } else { 0.3 };
            let (m, d, _, _) = f.moment_derivative(theta, FdOptions::default()).unwrap();
            let (g, gd, _, _) = f.generator_derivative(theta, FdOptions::default()).unwrap();
            let qm = qfi_from_moments(&m, &d).unwrap();
            let qg = qfi_from_generator(&g, &gd).unwrap();
            assert!((qm - qg).abs() < 1e-7 * qm, "{qm} vs {qg}");
        }
    }

    #[test]
    fn explicit_moments_generator_by_differences() {
        let f = Family::ExplicitMoments {
            delta0: vec![0.1, 0.0, 0.2, 0.0],
            delta1: Some(vec![0.0, 1.0, 0.0, 0.5]),
            gamma0: vec![
                vec![2.0, 0.3, 0.0, 0.0],
                vec![0.3, 3.0, 0.0, 0.0],
                vec![0.0, 0.0, 2.0, 0.1],
                vec![0.0, 0.0, 0.1, 1.5],
            ],
            gamma1: Some(vec![
                vec![1.0, 0.0, 0.0, 0.2],
                vec![0.0, 0.5, 0.0, 0.0],
                vec![0.0, 0.0, 0.3, 0.0],
                vec![0.2, 0.0, 0.0, 1.0],
            ]),
        };
        let rich = FdOptions {
            step: Some(1e-3),
            richardson: true,
            numeric: false,
        };
        let (m, d, _, _) = f.moment_derivative(0.0, FdOptions::default()).unwrap();
        let (g, gd, kind, _) = f.generator_derivative(0.0, rich).unwrap();
        assert_eq!(kind, DerivativeKind::Richardson);
        let qm = qfi_from_moments(&m, &d).unwrap();
        let qg = qfi_from_generator(&g, &gd).unwrap();
        assert!((qm - qg).abs() < 1e-8 * qm, "{qm} vs {qg}");
        assert!(matches!(f.moments(-5.0), Err(Error::OutOfDomain { .. })));
    }

    #[test]
    fn finite_dimensional_families_cross_check() {
        let h = vec![
            vec![Entry::Real(0.2), Entry::Complex([0.1, -0.3])],
            vec![Entry::Complex([0.1, 0.3]), Entry::Real(-0.4)],
        ];
        let g0 = vec![
            vec![Entry::Real(0.5), Entry::Real(0.1)],
            vec![Entry::Real(0.1), Entry::Real(-0.3)],
        ];
        let families = [
            qubit(0.4, 1.0, 0.3, -0.2),
            Family::ExplicitExponential { g0: g0.clone(), g1: h.clone() },
            Family::UnitaryRotation { g0: g0.clone(), h: h.clone() },
            Family::ThermalBeta { h: h.clone() },
        ];
        let fd = FdOptions {
            step: Some(1e-4),
            richardson: true,
            numeric: true,
        };
        for f in &families {
            let (s, a, _, _) = f.exponential_derivative(0.3, FdOptions::default()).unwrap();
            let (_, n, _, _) = f.exponential_derivative(0.3, fd).unwrap();
            let qa = sld_eigenbasis(&s, &a).unwrap().qfi;
            let qn = sld_eigenbasis(&s, &n).unwrap().qfi;
            assert!((qa - qn).abs() < 1e-9 * qa.max(1.0), "{}: {qa} vs {qn}", f.kind());
        }
    }

    #[test]
    fn domain_errors() {
        let f = single(SingleModeParameter::Nbar);
        assert!(matches!(f.moments(-0.5), Err(Error::OutOfDomain { .. })));
        assert!(matches!(single(SingleModeParameter::Epsilon).moments(0.0), Err(Error::OutOfDomain { .. })));
        assert!(matches!(f.moments(f64::NAN), Err(Error::OutOfDomain { .. })));
        assert!(matches!(f.exponential(0.1), Err(Error::Validation(_))));
        assert!(matches!(qubit(0.1, 1.0, 0.0, 0.0).moments(0.1), Err(Error::Validation(_))));
    }

    #[test]
    fn non_hermitian_input_names_the_entry() {
        let f = Family::ThermalBeta {
            h: vec![
                vec![Entry::Real(0.0), Entry::Real(1.0)],
                vec![Entry::Real(2.0), Entry::Real(0.0)],
            ],
        };
        match f.exponential(1.0) {
            Err(Error::NotHermitian { row, col, .. }) => assert_eq!((row.min(col), row.max(col)), (0, 1)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn serde_round_trip_and_field_override() {
        let f = single(SingleModeParameter::Rotation);
        let json = serde_json::to_string(&f).unwrap();
        assert!(json.contains("\"kind\":\"single_mode_gaussian\""));
        let back: Family = serde_json::from_str(&json).unwrap();
        assert_eq!(back, f);
        let g = f.with_field("r", 0.9).unwrap();
        assert!(matches!(g, Family::SingleModeGaussian { r, .. } if r == 0.9));
        assert!(f.with_field("parameter", 1.0).is_err());
        assert!(f.with_field("missing", 1.0).is_err());
        let bad = r#"{"kind": "single_mode_gaussian", "parameter": "nbar", "extra": 1}"#;
        assert!(serde_json::from_str::<Family>(bad).is_err());
    }

    #[test]
    fn fock_rendering_matches_moments() {
        let f = single(SingleModeParameter::Rotation);
        let rho = f.density(0.25, 60).unwrap();
        let op = crate::fockspace::FockOperator::clone(&crate::fockspace::gaussian_fock(
            0.4,
            0.3,
            0.7 - 0.5,
            Complex64::new(0.5, -0.2) * Complex64::from_polar(1.0, -0.25),
            60,
        )
        .unwrap());
        assert!((rho.matrix() - op.matrix()).norm() < 1e-12);
        let (delta, gamma) = crate::fockspace::measure_moments(&op).unwrap();
        let m = f.moments(0.25).unwrap();
        assert!((delta - m.delta()).norm() < 1e-6);
        assert!((gamma - m.gamma()).norm() < 1e-6);
    }
}
