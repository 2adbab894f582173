// Zero-noise Jacobian of the estimator and its noise propagation factor
// for three spikes under a Gaussian PSF.

use spike_sens::bounds::min_separation;
use spike_sens::sensitivity::{jacobian_psi_zero, noise_propagation_factor};
use spike_sens::{CMatrix, Complex64, ProblemInstance, PsfSpec};

fn main() -> spike_sens::Result<()> {
    let tau = vec![0.2, 0.45, 0.8];
    let x = CMatrix::from_fn(3, 2, |i, j| Complex64::from_polar(1.0, 0.7 * (i + 2 * j) as f64));
    let inst = ProblemInstance::new(129, PsfSpec::gaussian(0.02)?, tau, x)?;

    let jac = jacobian_psi_zero(&inst)?;
    println!("separation  {:.3}", min_separation(inst.tau()));
    println!("jacobian    {} x {}", jac.jacobian_psi.nrows(), jac.jacobian_psi.ncols());
    println!("||J||       {:.6e}", jac.jacobian_norm);
    println!("npf         {:.6e}", noise_propagation_factor(&inst)?);

    // the noise direction that moves the estimate the most
    let worst = jac.worst_direction();
    let shift = &jac.jacobian_psi * &worst;
    println!("worst-case shift per unit noise {:?}", shift.as_slice());
    Ok(())
}
