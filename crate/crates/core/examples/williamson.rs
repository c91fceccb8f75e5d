//! Williamson normal form of a covariance matrix.

use nalgebra::DMatrix;
use sldkit::symplectic::{is_symplectic, random_symplectic, williamson};

fn main() -> sldkit::Result<()> {
    let s = random_symplectic(2, 7)?;
    let gamma = s.transpose() * DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&[3.0, 1.5, 3.0, 1.5])) * &s;
    let w = williamson(&gamma)?;
    println!("symplectic eigenvalues {:?}", w.spectrum);
    println!("symplecticity defect {:.1e}", is_symplectic(&w.s)?);
    let diag = &w.s * &gamma * w.s.transpose();
    println!("|SΓSᵀ - diag(Λ, Λ)| = {:.1e}", (diag - w.standard_form()).norm());
    Ok(())
}
