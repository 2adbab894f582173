// Recover spike locations from noisy data with the variable-projection
// solver and compare the error with the first-order prediction.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spike_sens::estimator::{solve_varpro, wrapped_offset, SolverConfig};
use spike_sens::matrixops::{iota, unit_frobenius};
use spike_sens::model::synthesize;
use spike_sens::sensitivity::jacobian_psi_zero;
use spike_sens::{CMatrix, Complex64, ProblemInstance, PsfSpec};

fn main() -> spike_sens::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let tau = vec![0.1, 0.35, 0.7];
    let inst = ProblemInstance::new(101, PsfSpec::gaussian(0.03)?, tau.clone(), CMatrix::identity(3, 3))?;
    let jac = jacobian_psi_zero(&inst)?;

    for level in [1e-2, 1e-3, 1e-4] {
        let z = unit_frobenius(inst.n(), inst.l(), &mut rng) * Complex64::new(level, 0.0);
        let y = synthesize(&inst, &z)?;
        let res = solve_varpro(&inst, &y, &tau, &SolverConfig::default())?;
        let err: Vec<f64> = wrapped_offset(&res.gamma_hat, &tau);
        let predicted = &jac.jacobian_psi * iota(&z);
        println!(
            "noise {level:.0e}: {} iterations, stationary {}, error {:?}, predicted {:?}",
            res.iterations,
            res.is_stationary(),
            err.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>(),
            predicted.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>(),
        );
    }
    Ok(())
}
