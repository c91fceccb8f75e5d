//! Symmetric logarithmic derivative of a finite-dimensional state `ρ = e^G`.
//!
//! Four routes to the same operator are provided:
//!
//! * [`sld_eigenbasis`] weights the generator derivative by `f(g_j - g_k)` in
//!   the eigenbasis of `G`;
//! * [`sld_series`] sums the nested-commutator expansion term by term;
//! * [`sld_direct`] solves `ρ̇ = ½{L, ρ}` entrywise in the eigenbasis of `ρ`
//!   and serves as the reference for everything else;
//! * [`sld_unitary_family`] handles `ρ(θ) = e^{-iθH} ρ e^{iθH}` through
//!   `L = 2i tanh(C/2)(H)`.
//!
//! [`rhodot_wilcox`] evaluates `dρ/dθ` by quadrature of the Wilcox integral
//! and is used to feed the direct route independently of the weights above.

mod coefficients;

pub use coefficients::{
    f_coefficient, f_scalar, series_coefficients, SeriesCoefficients, MAX_SERIES_ORDER,
    SMALL_ARGUMENT,
};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numkit::{
    anticommutator, commutator, eig_hermitian, exp_hermitian, gauss_legendre, log_density,
    CMatrix, EigenSystem, HermitianOperator, RANK_FLOOR,
};

/// Allowed deviation of `tr e^G` from one.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;
/// Allowed magnitude of `tr(ρ Ġ)`.
pub const TRACE_PRESERVATION_TOLERANCE: f64 = 1e-8;
/// Default truncation order of the commutator series.
pub const DEFAULT_SERIES_ORDER: usize = 40;

/// A normalized full-rank state held through its generator `G = ln ρ`.
#[derive(Debug, Clone)]
pub struct ExponentialState {
    generator: HermitianOperator,
    eigen: EigenSystem,
}

impl ExponentialState {
    /// Wraps a generator that already satisfies `tr e^G = 1`.
    pub fn new(generator: HermitianOperator) -> Result<Self> {
        let eigen = eig_hermitian(&generator)?;
        let trace: f64 = eigen.eigenvalues.iter().map(|g| g.exp()).sum();
        if (trace - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::NotNormalized { trace });
        }
        Ok(Self { generator, eigen })
    }

    /// Subtracts `ln tr e^G` from an arbitrary Hermitian generator.
    pub fn normalized(generator: HermitianOperator) -> Result<Self> {
        let eigen = eig_hermitian(&generator)?;
        let top = *eigen.eigenvalues.last().expect("dim >= 1");
        let log_trace =
            top + eigen.eigenvalues.iter().map(|g| (g - top).exp()).sum::<f64>().ln();
        let generator = generator.shift(-log_trace);
        let eigen = EigenSystem {
            eigenvalues: eigen.eigenvalues.iter().map(|g| g - log_trace).collect(),
            basis: eigen.basis,
        };
        Ok(Self { generator, eigen })
    }

    /// Takes the logarithm of a full-rank density operator.
    pub fn from_density(rho: &HermitianOperator) -> Result<Self> {
        Self::new(log_density(rho)?)
    }

    pub fn generator(&self) -> &HermitianOperator {
        &self.generator
    }

    pub fn eigen(&self) -> &EigenSystem {
        &self.eigen
    }

    pub fn dim(&self) -> usize {
        self.generator.dim()
    }

    /// Eigenvalues of ρ, `e^{g_j}`, in the order of the eigenbasis of `G`.
    pub fn populations(&self) -> Vec<f64> {
        self.eigen.eigenvalues.iter().map(|g| g.exp()).collect()
    }

    pub fn density(&self) -> HermitianOperator {
        HermitianOperator::hermitian_part(
            self.eigen.from_diagonal_values(&self.populations()),
        )
    }

    /// `max g - min g`, the quantity that controls series convergence.
    pub fn spectral_spread(&self) -> f64 {
        let g = &self.eigen.eigenvalues;
        g[g.len() - 1] - g[0]
    }
}

/// `dG/dθ` at the working point, with `tr(ρ Ġ) = 0`.
#[derive(Debug, Clone)]
pub struct GeneratorDerivative {
    operator: HermitianOperator,
}

impl GeneratorDerivative {
    pub fn new(state: &ExponentialState, operator: HermitianOperator) -> Result<Self> {
        check_dims(state.dim(), operator.dim())?;
        let value = state.density().trace_product(&operator);
        if value.abs() > TRACE_PRESERVATION_TOLERANCE {
            return Err(Error::NotTracePreserving { value });
        }
        Ok(Self { operator })
    }

    /// Removes `tr(ρ Ġ)` from the diagonal so the derivative preserves trace.
    pub fn centered(state: &ExponentialState, operator: HermitianOperator) -> Result<Self> {
        check_dims(state.dim(), operator.dim())?;
        let mean = state.density().trace_product(&operator);
        Ok(Self {
            operator: operator.shift(-mean),
        })
    }

    pub fn operator(&self) -> &HermitianOperator {
        &self.operator
    }
}

fn check_dims(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Argument(format!(
            "dimension mismatch: state is {expected}-dimensional, operator is {got}-dimensional"
        )));
    }
    Ok(())
}

/// An SLD together with the Fisher information it carries.
#[derive(Debug, Clone)]
pub struct SldResult {
    pub sld: HermitianOperator,
    pub qfi: f64,
}

/// `Σ_{jk} ½(p_j + p_k)|L_jk|²` for `L` expressed in the eigenbasis of ρ.
///
/// Equal to `Σ_{jk} p_j |L_jk|²` for Hermitian `L`; the symmetric form keeps
/// every term non-negative when a tiny population is slightly negative.
fn weighted_qfi(populations: &[f64], sld_eigenbasis: &CMatrix) -> f64 {
    let n = populations.len();
    let mut acc = 0.0;
    for j in 0..n {
        for k in 0..n {
            acc += 0.5 * (populations[j] + populations[k]) * sld_eigenbasis[(j, k)].norm_sqr();
        }
    }
    acc
}

/// SLD from the generator: `L_jk = f(g_j - g_k) Ġ_jk` in the eigenbasis of `G`.
pub fn sld_eigenbasis(state: &ExponentialState, gdot: &GeneratorDerivative) -> Result<SldResult> {
    check_dims(state.dim(), gdot.operator().dim())?;
    let eig = state.eigen();
    let g = &eig.eigenvalues;
    let mut weighted = eig.to_eigenbasis(gdot.operator().matrix());
    for j in 0..g.len() {
        for k in 0..g.len() {
            weighted[(j, k)] *= f_scalar(g[j] - g[k]);
        }
    }
    let qfi = weighted_qfi(&state.populations(), &weighted);
    let sld = HermitianOperator::hermitian_part(eig.from_eigenbasis(&weighted));
    Ok(SldResult { sld, qfi })
}

/// `dρ/dθ` from the same eigen-data: `ρ̇_jk = (e^{g_j} - e^{g_k})/(g_j - g_k) Ġ_jk`.
pub fn rhodot_eigenbasis(
    state: &ExponentialState,
    gdot: &GeneratorDerivative,
) -> Result<HermitianOperator> {
    check_dims(state.dim(), gdot.operator().dim())?;
    let eig = state.eigen();
    let g = &eig.eigenvalues;
    let mut m = eig.to_eigenbasis(gdot.operator().matrix());
    for j in 0..g.len() {
        for k in 0..g.len() {
            let w = g[k].exp() * coefficients::exp_divided_difference(g[j] - g[k]);
            m[(j, k)] *= w;
        }
    }
    Ok(HermitianOperator::hermitian_part(eig.from_eigenbasis(&m)))
}

/// `‖ρ̇ - ½(Lρ + ρL)‖_F`
pub fn defining_residual(
    rho: &HermitianOperator,
    rhodot: &HermitianOperator,
    sld: &HermitianOperator,
) -> f64 {
    let sym = anticommutator(sld.matrix(), rho.matrix()).scale(0.5);
    (rhodot.matrix() - sym).norm()
}

/// Braunstein–Caves form: `L_jk = 2 ρ̇_jk / (ρ_jj + ρ_kk)` in the eigenbasis of ρ.
///
/// Requires a full-rank ρ; this is the reference oracle for every other
/// finite-dimensional route.
pub fn sld_direct(rho: &HermitianOperator, rhodot: &HermitianOperator) -> Result<SldResult> {
    check_dims(rho.dim(), rhodot.dim())?;
    let tr = rhodot.trace();
    if tr.abs() > TRACE_PRESERVATION_TOLERANCE {
        return Err(Error::NotTracePreserving { value: tr });
    }
    let eig = eig_hermitian(rho)?;
    let p = &eig.eigenvalues;
    let floor = RANK_FLOOR * p[p.len() - 1].max(0.0);
    if p[0] <= floor {
        return Err(Error::NotFullRank {
            eigenvalue: p[0],
            floor,
        });
    }
    let mut l = eig.to_eigenbasis(rhodot.matrix());
    for j in 0..p.len() {
        for k in 0..p.len() {
            l[(j, k)] *= 2.0 / (p[j] + p[k]);
        }
    }
    let qfi = weighted_qfi(p, &l);
    Ok(SldResult {
        sld: HermitianOperator::hermitian_part(eig.from_eigenbasis(&l)),
        qfi,
    })
}

/// Direct formula restricted to pairs with `p_j + p_k` above the rank floor.
///
/// Kernel–kernel pairs carry no information and are dropped; pairs with one
/// index in the support are kept, which is what a rank-deficient (for
/// example pure) state needs. Used by the truncated-Fock oracle.
pub fn sld_direct_on_support(
    rho: &HermitianOperator,
    rhodot: &HermitianOperator,
) -> Result<SldResult> {
    check_dims(rho.dim(), rhodot.dim())?;
    let eig = eig_hermitian(rho)?;
    let floor = RANK_FLOOR * eig.eigenvalues[eig.dim() - 1].max(0.0);
    Ok(direct_on_support(&eig, rhodot, floor))
}

/// Support-restricted direct formula with an absolute floor on `p_j + p_k`.
pub(crate) fn sld_direct_with_floor(
    rho: &HermitianOperator,
    rhodot: &HermitianOperator,
    floor: f64,
) -> Result<SldResult> {
    check_dims(rho.dim(), rhodot.dim())?;
    Ok(direct_on_support(&eig_hermitian(rho)?, rhodot, floor))
}

fn direct_on_support(eig: &EigenSystem, rhodot: &HermitianOperator, floor: f64) -> SldResult {
    let p = &eig.eigenvalues;
    let mut l = eig.to_eigenbasis(rhodot.matrix());
    for j in 0..p.len() {
        for k in 0..p.len() {
            let s = p[j] + p[k];
            if s > floor {
                l[(j, k)] *= 2.0 / s;
            } else {
                l[(j, k)] = Complex64::new(0.0, 0.0);
            }
        }
    }
    let qfi = weighted_qfi(p, &l);
    SldResult {
        sld: HermitianOperator::hermitian_part(eig.from_eigenbasis(&l)),
        qfi,
    }
}

/// Truncated nested-commutator series `L = Σ_{n ≤ order} f_n C^n(Ġ)`.
///
/// Converges only when the spectral spread of `G` is below π.
pub fn sld_series(
    state: &ExponentialState,
    gdot: &GeneratorDerivative,
    order: usize,
) -> Result<SldResult> {
    check_dims(state.dim(), gdot.operator().dim())?;
    if order > MAX_SERIES_ORDER {
        return Err(Error::Argument(format!(
            "series order {order} exceeds {MAX_SERIES_ORDER}"
        )));
    }
    let spread = state.spectral_spread();
    if spread >= std::f64::consts::PI {
        return Err(Error::SeriesDivergent { spread });
    }
    // commutators ignore multiples of the identity; centering keeps rounding
    // proportional to the spread rather than to ln Z
    let g = state.generator();
    let g = g.shift(-g.trace() / g.dim() as f64);
    let coeffs = series_coefficients();
    let mut term = gdot.operator().matrix().clone();
    let mut sum = term.clone();
    for n in 1..=order {
        term = commutator(g.matrix(), &term);
        if n % 2 == 0 {
            sum += term.scale(coeffs.float(n).expect("order checked"));
        }
    }
    let sld = HermitianOperator::hermitian_part(sum);
    let in_basis = state.eigen().to_eigenbasis(sld.matrix());
    let qfi = weighted_qfi(&state.populations(), &in_basis);
    Ok(SldResult { sld, qfi })
}

/// SLD of the unitary family `e^{-iθH} ρ e^{iθH}`, for which `Ġ = i[G, H]`.
///
/// In the eigenbasis of `G`: `L_jk = 2i tanh((g_j - g_k)/2) H_jk`.
pub fn sld_unitary_family(
    state: &ExponentialState,
    hamiltonian: &HermitianOperator,
) -> Result<SldResult> {
    check_dims(state.dim(), hamiltonian.dim())?;
    let eig = state.eigen();
    let g = &eig.eigenvalues;
    let mut l = eig.to_eigenbasis(hamiltonian.matrix());
    for j in 0..g.len() {
        for k in 0..g.len() {
            let w = 2.0 * (0.5 * (g[j] - g[k])).tanh();
            l[(j, k)] *= Complex64::new(0.0, w);
        }
    }
    let qfi = weighted_qfi(&state.populations(), &l);
    Ok(SldResult {
        sld: HermitianOperator::hermitian_part(eig.from_eigenbasis(&l)),
        qfi,
    })
}

/// `i[G, H]`, the generator derivative of the unitary family.
pub fn unitary_generator_derivative(
    state: &ExponentialState,
    hamiltonian: &HermitianOperator,
) -> Result<GeneratorDerivative> {
    check_dims(state.dim(), hamiltonian.dim())?;
    let c = commutator(state.generator().matrix(), hamiltonian.matrix());
    let op = HermitianOperator::hermitian_part(c.scale(1.0) * Complex64::new(0.0, 1.0));
    Ok(GeneratorDerivative { operator: op })
}

/// `dρ/dθ = ∫₀¹ e^{sG} Ġ e^{(1-s)G} ds` by Gauss–Legendre quadrature.
pub fn rhodot_wilcox(
    state: &ExponentialState,
    gdot: &GeneratorDerivative,
    quad_order: usize,
) -> Result<HermitianOperator> {
    check_dims(state.dim(), gdot.operator().dim())?;
    if !(8..=64).contains(&quad_order) {
        return Err(Error::Argument(format!(
            "Wilcox quadrature order must be in 8..=64, got {quad_order}"
        )));
    }
    let rule = gauss_legendre(quad_order)?;
    let eig = state.eigen();
    let n = state.dim();
    let mut acc = CMatrix::zeros(n, n);
    for (&s, &w) in rule.nodes.iter().zip(&rule.weights) {
        let left = eig.from_diagonal_values(
            &eig.eigenvalues.iter().map(|g| (s * g).exp()).collect::<Vec<_>>(),
        );
        let right = eig.from_diagonal_values(
            &eig.eigenvalues.iter().map(|g| ((1.0 - s) * g).exp()).collect::<Vec<_>>(),
        );
        acc += (left * gdot.operator().matrix() * right).scale(w);
    }
    Ok(HermitianOperator::hermitian_part(acc))
}

/// Quantum Cramér–Rao bound `1 / (trials · I)` on the estimator variance.
pub fn crb(qfi: f64, trials: u64) -> Result<f64> {
    if qfi.is_nan() || qfi <= 0.0 {
        return Err(Error::BoundUndefined { qfi });
    }
    if trials == 0 {
        return Err(Error::Argument("number of trials must be positive".into()));
    }
    Ok(1.0 / (trials as f64 * qfi))
}

/// Convenience: `e^G` for an arbitrary Hermitian generator, normalized.
pub fn normalized_exponential(generator: &HermitianOperator) -> Result<HermitianOperator> {
    let e = exp_hermitian(generator)?;
    let tr = e.trace();
    Ok(e.scale(1.0 / tr))
}
