//! Truncated commutator series against the exact eigenbasis SLD as the spectral spread grows.

use sldkit::expstate::{sld_eigenbasis, sld_series, ExponentialState, GeneratorDerivative, DEFAULT_SERIES_ORDER};
use sldkit::numkit::HermitianOperator;

fn main() -> sldkit::Result<()> {
    let gdot_raw = HermitianOperator::from_real(&nalgebra::DMatrix::from_row_slice(3, 3, &[
        0.2, 1.0, 0.3, //
        1.0, -0.5, 0.7, //
        0.3, 0.7, 0.1,
    ]))?;
    println!("spread  order  |ΔL|_F");
    for spread in [0.5, 1.0, 1.5, 2.0, 2.5, 3.0] {
        let state = ExponentialState::normalized(HermitianOperator::from_diagonal(&[0.0, 0.4 * spread, spread]))?;
        let gdot = GeneratorDerivative::centered(&state, gdot_raw.clone())?;
        let exact = sld_eigenbasis(&state, &gdot)?;
        for order in [20, DEFAULT_SERIES_ORDER, 60] {
            let series = sld_series(&state, &gdot, order)?;
            let gap = (series.sld.matrix() - exact.sld.matrix()).norm();
            println!("{spread:>6}  {order:>5}  {gap:.2e}");
        }
    }
    let wide = ExponentialState::normalized(HermitianOperator::from_diagonal(&[0.0, 3.5]))?;
    let gdot = GeneratorDerivative::centered(&wide, HermitianOperator::from_diagonal(&[1.0, -1.0]))?;
    println!("spread 3.5: {}", sld_series(&wide, &gdot, 40).unwrap_err());
    Ok(())
}
