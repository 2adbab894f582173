// Finite-difference self-check of the analytic derivatives.

use spike_sens::experiments::{verify_jacobian, VerifyConfig};
use spike_sens::PsfSpec;

fn main() -> spike_sens::Result<()> {
    let report = verify_jacobian(&VerifyConfig::default())?;
    println!("{report}");
    let cfg = VerifyConfig { psf: PsfSpec::gaussian(0.03)?, k: 3, seed: 21, ..VerifyConfig::default() };
    println!("{}", verify_jacobian(&cfg)?);
    Ok(())
}
