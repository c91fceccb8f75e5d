//! Truncated Fock-space representations used as a brute-force oracle.
//!
//! States are built in a padded space with matrix exponentials of the
//! truncated generators, then cut back to the requested dimension. The SLD
//! comes from the direct formula on a central-difference `ρ̇`.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::expstate::{sld_direct_with_floor, SldResult};
use crate::numkit::{unitary_exp, CMatrix, HermitianOperator, RMatrix, RANK_FLOOR};

/// Largest tolerated `1 - tr ρ` after truncation.
pub const LEAKAGE_BUDGET: f64 = 1e-6;
/// Largest tolerated change of the oracle QFI when the truncation grows.
pub const CONVERGENCE_TOLERANCE: f64 = 1e-6;
/// Extra levels added for the convergence check.
pub const CONVERGENCE_STEP: usize = 20;
/// Per-mode cap of the two-mode oracle.
pub const TWO_MODE_CAP: usize = 30;

/// What a [`FockOperator`] represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FockTag {
    Density,
    Unitary,
    Generator,
}

/// A truncated operator on the lowest `N` number states.
#[derive(Debug, Clone)]
pub struct FockOperator {
    matrix: CMatrix,
    tag: FockTag,
}

impl FockOperator {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn tag(&self) -> FockTag {
        self.tag
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// The density as a Hermitian operator; fails for other tags.
    pub fn density(&self) -> Result<HermitianOperator> {
        if self.tag != FockTag::Density {
            return Err(Error::Argument(format!("{:?} operator is not a density", self.tag)));
        }
        Ok(HermitianOperator::hermitian_part(self.matrix.clone()))
    }
}

/// Annihilation and creation operators, `a|n⟩ = √n |n-1⟩`.
pub fn ladder_ops(dim: usize) -> Result<(CMatrix, CMatrix)> {
    if dim < 2 {
        return Err(Error::Argument(format!("Fock truncation must be at least 2, got {dim}")));
    }
    let mut a = CMatrix::zeros(dim, dim);
    for n in 1..dim {
        a[(n - 1, n)] = Complex64::new((n as f64).sqrt(), 0.0);
    }
    let ad = a.adjoint();
    Ok((a, ad))
}

/// `x = (a + a†)/√2`, `p = (a - a†)/(i√2)`.
pub fn quadratures(dim: usize) -> Result<(CMatrix, CMatrix)> {
    let (a, ad) = ladder_ops(dim)?;
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let x = (&a + &ad).scale(h);
    let p = (&a - &ad) * Complex64::new(0.0, -h);
    Ok((x, p))
}

/// Padding used when building states before truncation.
fn padded(dim: usize) -> usize {
    dim + dim / 2 + 20
}

fn i_times(m: CMatrix) -> CMatrix {
    m * Complex64::new(0.0, 1.0)
}

/// `e^K` for anti-Hermitian `K`, via `exp(-iH)` with `H = iK`.
fn exp_anti_hermitian(k: CMatrix) -> Result<CMatrix> {
    unitary_exp(&HermitianOperator::hermitian_part(i_times(k)), 1.0)
}

/// Displacement `D(α) = exp(α a† - α* a)` on `dim` levels.
pub fn displacement(alpha: Complex64, dim: usize) -> Result<FockOperator> {
    let (a, ad) = ladder_ops(dim)?;
    let k = &ad * alpha - &a * alpha.conj();
    Ok(FockOperator {
        matrix: exp_anti_hermitian(k)?,
        tag: FockTag::Unitary,
    })
}

/// Squeeze `S(z) = exp(½(z* a² - z a†²))` with `z = r e^{iφ}` on `dim` levels.
pub fn squeeze(r: f64, phi: f64, dim: usize) -> Result<FockOperator> {
    let (a, ad) = ladder_ops(dim)?;
    let z = Complex64::from_polar(r, phi);
    let k = (&a * &a * z.conj() - &ad * &ad * z).scale(0.5);
    Ok(FockOperator {
        matrix: exp_anti_hermitian(k)?,
        tag: FockTag::Unitary,
    })
}

/// Thermal populations `n̄ⁿ/(n̄+1)ⁿ⁺¹`.
pub fn thermal_populations(nbar: f64, dim: usize) -> Vec<f64> {
    if nbar == 0.0 {
        let mut p = vec![0.0; dim];
        p[0] = 1.0;
        return p;
    }
    let q = nbar / (nbar + 1.0);
    (0..dim).map(|n| q.powi(n as i32) / (nbar + 1.0)).collect()
}

/// Truncates a padded density to `dim` levels, checking the leakage budget.
fn truncate(rho: &CMatrix, dim: usize) -> Result<FockOperator> {
    let cut = rho.view((0, 0), (dim, dim)).into_owned();
    let trace: f64 = (0..dim).map(|k| cut[(k, k)].re).sum();
    let leakage = 1.0 - trace;
    if leakage > LEAKAGE_BUDGET {
        return Err(Error::Truncation {
            leakage,
            budget: LEAKAGE_BUDGET,
            dim,
        });
    }
    let cut = cut.scale(1.0 / trace);
    Ok(FockOperator {
        matrix: (&cut + cut.adjoint()).scale(0.5),
        tag: FockTag::Density,
    })
}

/// `D(α) S(r e^{iφ}) ρ_th(n̄) S† D†` on `dim` levels.
pub fn gaussian_fock(nbar: f64, r: f64, phi: f64, alpha: Complex64, dim: usize) -> Result<FockOperator> {
    if nbar < 0.0 || !nbar.is_finite() {
        return Err(Error::Argument(format!("thermal occupation must be >= 0, got {nbar}")));
    }
    let big = padded(dim);
    let pops = thermal_populations(nbar, big);
    let mut rho = CMatrix::from_diagonal(&DVector::from_iterator(
        big,
        pops.iter().map(|&p| Complex64::new(p, 0.0)),
    ));
    if r != 0.0 {
        let s = squeeze(r, phi, big)?.matrix;
        rho = &s * rho * s.adjoint();
    }
    if alpha != Complex64::new(0.0, 0.0) {
        let d = displacement(alpha, big)?.matrix;
        rho = &d * rho * d.adjoint();
    }
    truncate(&rho, dim)
}

/// Two-mode squeezed thermal state `S₂(r) (ρ_th ⊗ ρ_th) S₂†`,
/// `S₂(r) = exp(r(a†b† - ab))`, on `dim` levels per mode.
///
/// Basis index of `|n_a, n_b⟩` is `n_a · dim + n_b`. The generator conserves
/// `n_a - n_b`, so each sector is exponentiated on its own.
pub fn two_mode_squeezed_fock(r: f64, nbar: f64, dim: usize) -> Result<FockOperator> {
    if !(2..=TWO_MODE_CAP).contains(&dim) {
        return Err(Error::Argument(format!(
            "two-mode truncation must be in 2..={TWO_MODE_CAP} per mode, got {dim}"
        )));
    }
    let big = padded(dim);
    let pops = thermal_populations(nbar, big);
    let mut rho = CMatrix::zeros(dim * dim, dim * dim);
    let mut total = 0.0;
    for sector in -(big as i64 - 1)..(big as i64) {
        // states (n + max(k,0), n + max(-k,0)) in the padded space
        let (sa, sb) = (sector.max(0) as usize, (-sector).max(0) as usize);
        let len = big - sa.max(sb);
        let mut h = CMatrix::zeros(len, len);
        for n in 0..len - 1 {
            let amp = r * (((n + sa + 1) * (n + sb + 1)) as f64).sqrt();
            // H = i r (a†b† - ab)
            h[(n + 1, n)] = Complex64::new(0.0, amp);
            h[(n, n + 1)] = Complex64::new(0.0, -amp);
        }
        let u = unitary_exp(&HermitianOperator::hermitian_part(h), 1.0)?;
        let p = CMatrix::from_fn(len, len, |i, j| {
            if i == j {
                Complex64::new(pops[i + sa] * pops[i + sb], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        let block = &u * p * u.adjoint();
        for i in 0..len {
            let (ai, bi) = (i + sa, i + sb);
            if ai >= dim || bi >= dim {
                continue;
            }
            total += block[(i, i)].re;
            for j in 0..len {
                let (aj, bj) = (j + sa, j + sb);
                if aj < dim && bj < dim {
                    rho[(ai * dim + bi, aj * dim + bj)] = block[(i, j)];
                }
            }
        }
    }
    let leakage = 1.0 - total;
    if leakage > LEAKAGE_BUDGET {
        return Err(Error::Truncation {
            leakage,
            budget: LEAKAGE_BUDGET,
            dim,
        });
    }
    Ok(FockOperator {
        matrix: rho.scale(1.0 / total),
        tag: FockTag::Density,
    })
}

/// Single-mode `(δ, Γ)` measured from a density matrix.
pub fn measure_moments(rho: &FockOperator) -> Result<(DVector<f64>, RMatrix)> {
    let rho = rho.density()?;
    let (x, p) = quadratures(rho.dim())?;
    let expect = |m: &CMatrix| (rho.matrix() * m).trace().re;
    let (mx, mp) = (expect(&x), expect(&p));
    let xx = 2.0 * (expect(&(&x * &x)) - mx * mx);
    let pp = 2.0 * (expect(&(&p * &p)) - mp * mp);
    let xp = expect(&(&x * &p + &p * &x)) - 2.0 * mx * mp;
    Ok((
        DVector::from_row_slice(&[mx, mp]),
        RMatrix::from_row_slice(2, 2, &[xx, xp, xp, pp]),
    ))
}

/// Output of [`oracle_qfi`].
#[derive(Debug, Clone)]
pub struct OracleResult {
    pub qfi: f64,
    pub sld: HermitianOperator,
    pub dim: usize,
    /// `|I(dim + 20) - I(dim)|`
    pub shift: f64,
}

/// Direct-formula SLD on a central-difference `ρ̇`, without a convergence check.
///
/// `render(θ, dim)` must return a normalized density. Pairs whose populations
/// sum to at most `RANK_FLOOR · max p` are projected out, and the state is
/// split into blocks that share no nonzero entries before diagonalizing.
pub fn oracle_sld<F>(render: &F, theta: f64, h: f64, dim: usize) -> Result<SldResult>
where
    F: Fn(f64, usize) -> Result<HermitianOperator>,
{
    if !(1e-6..=1e-2).contains(&h) {
        return Err(Error::Argument(format!("oracle step must be in [1e-6, 1e-2], got {h}")));
    }
    let rho = render(theta, dim)?;
    let plus = render(theta + h, dim)?;
    let minus = render(theta - h, dim)?;
    let rhodot = HermitianOperator::hermitian_part((plus.matrix() - minus.matrix()).scale(0.5 / h));
    blockwise_direct(&rho, &rhodot)
}

/// [`oracle_sld`] at `dim` and `dim + 20`, failing when the two differ by
/// more than [`CONVERGENCE_TOLERANCE`].
pub fn oracle_qfi<F>(render: &F, theta: f64, h: f64, dim: usize) -> Result<OracleResult>
where
    F: Fn(f64, usize) -> Result<HermitianOperator>,
{
    oracle_qfi_between(render, theta, h, dim, dim + CONVERGENCE_STEP)
}

/// Oracle at `dim` checked against `check_dim`.
pub fn oracle_qfi_between<F>(render: &F, theta: f64, h: f64, dim: usize, check_dim: usize) -> Result<OracleResult>
where
    F: Fn(f64, usize) -> Result<HermitianOperator>,
{
    let base = oracle_sld(render, theta, h, dim)?;
    let check = oracle_sld(render, theta, h, check_dim)?;
    let shift = (check.qfi - base.qfi).abs();
    if shift >= CONVERGENCE_TOLERANCE {
        return Err(Error::NotConverged { shift, dim });
    }
    Ok(OracleResult {
        qfi: base.qfi,
        sld: base.sld,
        dim,
        shift,
    })
}

/// Connected components of the union sparsity pattern of `a` and `b`.
fn blocks(a: &CMatrix, b: &CMatrix) -> Vec<Vec<usize>> {
    let n = a.nrows();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if a[(i, j)].norm_sqr() > 0.0 || b[(i, j)].norm_sqr() > 0.0 {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut index = vec![usize::MAX; n];
    for i in 0..n {
        let root = find(&mut parent, i);
        if index[root] == usize::MAX {
            index[root] = groups.len();
            groups.push(Vec::new());
        }
        groups[index[root]].push(i);
    }
    groups
}

fn blockwise_direct(rho: &HermitianOperator, rhodot: &HermitianOperator) -> Result<SldResult> {
    let groups = blocks(rho.matrix(), rhodot.matrix());
    let top = (0..rho.dim()).map(|k| rho.matrix()[(k, k)].re).fold(0.0, f64::max);
    let floor = RANK_FLOOR * top;
    let n = rho.dim();
    let mut sld = CMatrix::zeros(n, n);
    let mut qfi = 0.0;
    for g in groups {
        let take = |m: &CMatrix| CMatrix::from_fn(g.len(), g.len(), |i, j| m[(g[i], g[j])]);
        let sub_rho = HermitianOperator::hermitian_part(take(rho.matrix()));
        let sub_dot = HermitianOperator::hermitian_part(take(rhodot.matrix()));
        let res = sld_direct_with_floor(&sub_rho, &sub_dot, floor)?;
        qfi += res.qfi;
        for (i, &gi) in g.iter().enumerate() {
            for (j, &gj) in g.iter().enumerate() {
                sld[(gi, gj)] = res.sld.matrix()[(i, j)];
            }
        }
    }
    Ok(SldResult {
        sld: HermitianOperator::hermitian_part(sld),
        qfi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expstate::{sld_eigenbasis, ExponentialState, GeneratorDerivative};
    use crate::gaussian::{generator_to_moments, GaussianGenerator};
    use crate::numkit::exp_hermitian;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn ladder_examples() {
        let (a, _) = ladder_ops(2).unwrap();
        assert_eq!(a, CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(0., 0.), c(0., 0.)]));
        let (a, ad) = ladder_ops(20).unwrap();
        let comm = &a * &ad - &ad * &a;
        let block = comm.view((0, 0), (19, 19)).into_owned();
        assert!((block - CMatrix::identity(19, 19)).norm() < 1e-12);
        let (x, _) = quadratures(20).unwrap();
        assert!(((&x * &x)[(0, 0)].re - 0.5).abs() < 1e-15);
        assert!(ladder_ops(1).is_err());
    }

    #[test]
    fn thermal_state_populations() {
        let rho = gaussian_fock(1.0, 0.0, 0.0, c(0.0, 0.0), 60).unwrap();
        for n in 0..60 {
            let expect = 0.5f64.powi(n as i32 + 1) / (1.0 - 0.5f64.powi(60));
            assert!((rho.matrix()[(n, n)].re - expect).abs() < 1e-15);
        }
        let vac = gaussian_fock(0.0, 0.0, 0.0, c(0.0, 0.0), 10).unwrap();
        assert_eq!(vac.matrix()[(0, 0)].re, 1.0);
        assert_eq!(vac.matrix().norm(), 1.0);
    }

    #[test]
    fn measured_moments_match_closed_forms() {
        let (delta, gamma) = measure_moments(&gaussian_fock(1.0, 0.0, 0.0, c(0.0, 0.0), 60).unwrap()).unwrap();
        assert!(delta.norm() < 1e-15);
        assert!((gamma - RMatrix::identity(2, 2).scale(3.0)).norm() < 1e-6);

        // Γ = (2n̄+1) R(φ/2) diag(e^{-2r}, e^{2r}) R(φ/2)ᵀ, δ = √2 (Re α, Im α)
        let (nbar, r, phi, alpha) = (0.3, 0.4, 0.7, c(0.5, -0.3));
        let (delta, gamma) = measure_moments(&gaussian_fock(nbar, r, phi, alpha, 80).unwrap()).unwrap();
        let (s, co) = (0.5 * phi).sin_cos();
        let rot = RMatrix::from_row_slice(2, 2, &[co, -s, s, co]);
        let core = RMatrix::from_row_slice(2, 2, &[(-2.0 * r).exp(), 0.0, 0.0, (2.0 * r).exp()]);
        let expect = (&rot * core * rot.transpose()).scale(2.0 * nbar + 1.0);
        assert!((gamma - expect).norm() < 1e-5);
        let s2 = 2f64.sqrt();
        assert!((delta - DVector::from_row_slice(&[s2 * 0.5, -s2 * 0.3])).norm() < 1e-5);
    }

    #[test]
    fn leakage_is_reported_and_shrinks() {
        match gaussian_fock(5.0, 0.0, 0.0, c(0.0, 0.0), 20) {
            Err(Error::Truncation { leakage, dim, .. }) => {
                assert_eq!(dim, 20);
                assert!(leakage > 1e-3);
            }
            other => panic!("unexpected {other:?}"),
        }
        let leak = |n: usize| {
            let p = thermal_populations(2.0, n);
            1.0 - p.iter().sum::<f64>()
        };
        assert!(leak(10) > leak(20) && leak(20) > leak(40));
    }

    #[test]
    fn partition_function_matches_fock_trace() {
        let omega = RMatrix::from_row_slice(2, 2, &[1.2, 0.3, 0.3, 0.8]);
        let eta = DVector::from_row_slice(&[0.2, -0.1]);
        let g = GaussianGenerator::new(omega.clone(), eta.clone()).unwrap();
        let dim = 120;
        let (x, p) = quadratures(dim).unwrap();
        let r = [&x, &p];
        let mut gen = CMatrix::zeros(dim, dim);
        for j in 0..2 {
            gen += r[j].scale(eta[j]);
            for k in 0..2 {
                gen -= (r[j] * r[k]).scale(0.5 * omega[(j, k)]);
            }
        }
        let e = exp_hermitian(&HermitianOperator::hermitian_part(gen)).unwrap();
        let trace: f64 = (0..dim).map(|k| e.matrix()[(k, k)].re).sum();
        assert!((trace.ln() - g.log_z()).abs() < 1e-8, "{} vs {}", trace.ln(), g.log_z());

        let rho = FockOperator {
            matrix: e.matrix().scale(1.0 / trace),
            tag: FockTag::Density,
        };
        let (delta, gamma) = measure_moments(&rho).unwrap();
        let m = generator_to_moments(&g).unwrap();
        assert!((delta - m.delta()).norm() < 1e-8);
        assert!((gamma - m.gamma()).norm() < 1e-8);
    }

    #[test]
    fn thermal_occupation_oracle() {
        let render = |nbar: f64, dim: usize| gaussian_fock(nbar, 0.0, 0.0, c(0.0, 0.0), dim)?.density();
        let res = oracle_qfi(&render, 1.0, 1e-4, 60).unwrap();
        assert!((res.qfi - 0.5).abs() < 1e-5, "{}", res.qfi);
        assert!(res.shift < 1e-6);
    }

    #[test]
    fn squeezed_vacuum_phase_oracle() {
        // rotation by θ maps φ to φ - 2θ
        let render = |theta: f64, dim: usize| gaussian_fock(0.0, 0.5, -2.0 * theta, c(0.0, 0.0), dim)?.density();
        let res = oracle_qfi(&render, 0.0, 1e-4, 100).unwrap();
        assert!((res.qfi - 2.0 * 1f64.sinh().powi(2)).abs() < 1e-4, "{}", res.qfi);
    }

    #[test]
    fn coherent_displacement_oracle() {
        let render = |x: f64, dim: usize| gaussian_fock(0.0, 0.0, 0.0, c(x, 0.0), dim)?.density();
        let res = oracle_qfi(&render, 0.0, 1e-4, 40).unwrap();
        assert!((res.qfi - 4.0).abs() < 1e-6, "{}", res.qfi);
    }

    #[test]
    fn embedded_qubit_matches_eigenbasis_route() {
        let sigma = |k: usize| {
            let m = match k {
                1 => [c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)],
                _ => [c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)],
            };
            HermitianOperator::new(CMatrix::from_row_slice(2, 2, &m)).unwrap()
        };
        let generator = |theta: f64| sigma(3).scale(0.5).add(&sigma(1).scale(theta));
        let render = |theta: f64, dim: usize| {
            let state = ExponentialState::normalized(generator(theta))?;
            let mut m = CMatrix::zeros(dim, dim);
            m.view_mut((0, 0), (2, 2)).copy_from(state.density().matrix());
            Ok(HermitianOperator::hermitian_part(m))
        };
        let theta = 0.2;
        let oracle = oracle_qfi(&render, theta, 1e-4, 10).unwrap();
        let state = ExponentialState::normalized(generator(theta)).unwrap();
        let gdot = GeneratorDerivative::centered(&state, sigma(1)).unwrap();
        let exact = sld_eigenbasis(&state, &gdot).unwrap();
        assert!((oracle.qfi - exact.qfi).abs() < 1e-8, "{} vs {}", oracle.qfi, exact.qfi);
    }

    #[test]
    fn two_mode_squeezed_moments_and_qfi() {
        let rho = two_mode_squeezed_fock(0.3, 0.1, 20).unwrap();
        assert!((rho.matrix().trace().re - 1.0).abs() < 1e-12);
        let render = |r: f64, dim: usize| two_mode_squeezed_fock(r, 0.1, dim)?.density();
        let res = oracle_qfi_between(&render, 0.3, 1e-4, 20, TWO_MODE_CAP).unwrap();
        // Γ̇ = 2(2n̄+1)[[sinh, cosh],[cosh, sinh]] blocks; evaluated through the moment route
        use crate::gaussian::{qfi_from_moments, GaussianMoments, MomentDerivatives};
        let (lam, r) = (1.2f64, 0.3f64);
        let (ch, sh) = ((2.0 * r).cosh(), (2.0 * r).sinh());
        let gamma = RMatrix::from_row_slice(4, 4, &[
            ch, sh, 0., 0., sh, ch, 0., 0., 0., 0., ch, -sh, 0., 0., -sh, ch,
        ]).scale(lam);
        let gdot = RMatrix::from_row_slice(4, 4, &[
            sh, ch, 0., 0., ch, sh, 0., 0., 0., 0., sh, -ch, 0., 0., -ch, sh,
        ]).scale(2.0 * lam);
        let m = GaussianMoments::centered(gamma).unwrap();
        let d = MomentDerivatives::new(DVector::zeros(4), gdot).unwrap();
        let expect = qfi_from_moments(&m, &d).unwrap();
        assert!((res.qfi - expect).abs() < 1e-5, "{} vs {expect}", res.qfi);
    }

    #[test]
    fn oracle_step_range() {
        let render = |_: f64, dim: usize| Ok(HermitianOperator::identity(dim).scale(1.0 / dim as f64));
        assert!(matches!(oracle_sld(&render, 0.0, 0.1, 4), Err(Error::Argument(_))));
    }
}
