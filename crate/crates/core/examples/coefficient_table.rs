//! Exact series coefficients f_n of tanh(t/2)/(t/2).

use sldkit::expstate::series_coefficients;

fn main() {
    let table = series_coefficients();
    for n in (0..=20).step_by(2) {
        println!("f_{n:<2} = {:>40}  ≈ {:+.16e}", table.exact(n).unwrap().to_string(), table.float(n).unwrap());
    }
}
