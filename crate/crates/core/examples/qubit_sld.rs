//! SLD and Fisher information of a qubit in exponential form.

use sldkit::expstate::{crb, rhodot_eigenbasis, sld_direct, sld_eigenbasis};
use sldkit::families::{Family, FdOptions};

fn main() -> sldkit::Result<()> {
    let gamma = 0.5f64.atanh();
    for (gamma_rate, tau1) in [(1.0, 0.0), (0.0, 1.0), (0.6, 0.8)] {
        let family = Family::QubitExponential {
            gamma,
            gamma_rate,
            tau1,
            tau2: 0.0,
        };
        let (state, gdot, _, _) = family.exponential_derivative(0.0, FdOptions::default())?;
        let eig = sld_eigenbasis(&state, &gdot)?;
        let direct = sld_direct(&state.density(), &rhodot_eigenbasis(&state, &gdot)?)?;
        let closed = gamma_rate.powi(2) / gamma.cosh().powi(2) + (gamma.tanh() / gamma).powi(2) * tau1 * tau1;
        println!(
            "γ̇ = {gamma_rate}, τ₁ = {tau1}: I = {:.12} (direct {:.12}, closed form {:.12}), CRB(100) = {:.6}",
            eig.qfi,
            direct.qfi,
            closed,
            crb(eig.qfi, 100)?
        );
    }
    Ok(())
}
