//! Brute-force Fisher information from truncated Fock matrices, against the Gaussian route.

use sldkit::families::{Family, FdOptions, SingleModeParameter};
use sldkit::fockspace::oracle_qfi;
use sldkit::gaussian::qfi_from_moments;

fn main() -> sldkit::Result<()> {
    let family = Family::SingleModeGaussian {
        nbar: 0.5,
        r: 0.4,
        phi: 0.3,
        alpha: [0.6, -0.2],
        parameter: SingleModeParameter::Rotation,
    };
    let (m, d, _, _) = family.moment_derivative(0.0, FdOptions::default())?;
    let gaussian = qfi_from_moments(&m, &d)?;
    let render = |t: f64, n: usize| family.density(t, n);
    for dim in [60, 80, 100] {
        let r = oracle_qfi(&render, 0.0, 1e-4, dim)?;
        println!(
            "N = {dim}: I = {:.10}  (Gaussian {:.10}, shift at N + 20: {:.1e})",
            r.qfi, gaussian, r.shift
        );
    }
    Ok(())
}
