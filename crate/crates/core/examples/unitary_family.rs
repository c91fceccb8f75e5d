//! Unitary families ρ(θ) = e^{-iθH} ρ e^{iθH}: closed-form SLD against the general route.

use num_complex::Complex64;
use sldkit::expstate::{sld_eigenbasis, sld_unitary_family, unitary_generator_derivative, ExponentialState};
use sldkit::numkit::{CMatrix, HermitianOperator};

fn main() -> sldkit::Result<()> {
    let c = |re: f64, im: f64| Complex64::new(re, im);
    let g = HermitianOperator::new(CMatrix::from_row_slice(3, 3, &[
        c(0.4, 0.0), c(0.1, 0.2), c(0.0, 0.0),
        c(0.1, -0.2), c(-0.3, 0.0), c(0.2, 0.0),
        c(0.0, 0.0), c(0.2, 0.0), c(1.1, 0.0),
    ]))?;
    let state = ExponentialState::normalized(g)?;
    let h = HermitianOperator::from_diagonal(&[1.0, 0.0, -1.0]);

    let closed = sld_unitary_family(&state, &h)?;
    let general = sld_eigenbasis(&state, &unitary_generator_derivative(&state, &h)?)?;
    let gap = (closed.sld.matrix() - general.sld.matrix()).norm();
    println!("I = {:.12} (closed form) vs {:.12} (eigenbasis), SLD gap {gap:.1e}", closed.qfi, general.qfi);
    Ok(())
}
