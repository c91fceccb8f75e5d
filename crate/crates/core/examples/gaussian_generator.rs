//! Gaussian states as exponentials of quadratic forms: conversion and the generator route.

use nalgebra::{DMatrix, DVector};
use sldkit::families::{Family, FdOptions, TwoModeParameter};
use sldkit::gaussian::{
    generator_to_moments, moments_to_generator, qfi_from_generator, qfi_from_moments, GaussianMoments,
};

fn main() -> sldkit::Result<()> {
    let gamma = DMatrix::from_row_slice(4, 4, &[
        2.0, 0.3, 0.0, 0.1, //
        0.3, 1.8, 0.0, 0.0, //
        0.0, 0.0, 1.6, 0.2, //
        0.1, 0.0, 0.2, 2.2,
    ]);
    let m = GaussianMoments::new(DVector::from_row_slice(&[0.5, 0.0, -0.2, 0.1]), gamma)?;
    let g = moments_to_generator(&m)?;
    let back = generator_to_moments(&g)?;
    println!("symplectic spectrum {:?}", m.symplectic_spectrum());
    println!("mode energies {:?}", g.normal_modes().spectrum);
    println!("ln Z = {:.10}", g.log_z());
    println!("round trip |ΔΓ| = {:.1e}", (back.gamma() - m.gamma()).norm());

    let family = Family::TwoModeSqueezed {
        r: 0.4,
        nbar: 0.3,
        parameter: TwoModeParameter::Squeeze,
    };
    let (g, gd, _, _) = family.generator_derivative(0.4, FdOptions::default())?;
    let (m, d, _, _) = family.moment_derivative(0.4, FdOptions::default())?;
    println!(
        "two-mode squeezing: I = {:.12} (generator) vs {:.12} (moments)",
        qfi_from_generator(&g, &gd)?,
        qfi_from_moments(&m, &d)?
    );

    let vacuum = GaussianMoments::centered(DMatrix::identity(2, 2))?;
    println!("vacuum: {}", moments_to_generator(&vacuum).unwrap_err());
    Ok(())
}
