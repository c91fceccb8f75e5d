//! Gaussian SLD from first and second moments, with its defining-equation residuals.

use sldkit::families::{Family, FdOptions, SingleModeParameter};
use sldkit::gaussian::{qfi_from_moments, qfi_noisy_approx, residuals, sld_from_moments};

fn main() -> sldkit::Result<()> {
    let cases = [
        ("thermal n̄", SingleModeParameter::Nbar, 1.0, 0.0, 0.0),
        ("thermal ε", SingleModeParameter::Epsilon, 2f64.ln(), 0.0, 0.0),
        ("displacement", SingleModeParameter::DisplacementX, 0.3, 0.0, 0.0),
        ("phase, squeezed vacuum", SingleModeParameter::Rotation, 0.0, 0.5, 0.0),
        ("phase, squeezed thermal", SingleModeParameter::Rotation, 0.0, 0.5, 2.0),
    ];
    for (name, parameter, theta, r, nbar) in cases {
        let family = Family::SingleModeGaussian {
            nbar,
            r,
            phi: 0.0,
            alpha: [0.0, 0.0],
            parameter,
        };
        let (m, d, _, _) = family.moment_derivative(theta, FdOptions::default())?;
        let sld = sld_from_moments(&m, &d)?;
        println!(
            "{name:<24} I = {:.10}  high-temperature estimate {:.10}  residual {:.1e}  ν = {:.6}",
            qfi_from_moments(&m, &d)?,
            qfi_noisy_approx(&m, &d)?,
            residuals(&m, &d, &sld).max(),
            sld.nu
        );
    }
    Ok(())
}
