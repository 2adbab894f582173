// Noise propagation against Gaussian PSF width at a fixed separation.

use spike_sens::experiments::{run_sweep, Sweep, SweepConfig};
use spike_sens::PsfSpec;

fn main() -> spike_sens::Result<()> {
    let sweep = Sweep::Sigma { sigmas: vec![0.005, 0.01, 0.02], delta: 0.2 };
    let mut cfg = SweepConfig::new(PsfSpec::gaussian(0.01)?, sweep, 5);
    cfg.n = 128;
    cfg.trials = 4;
    for r in run_sweep(&cfg)? {
        let npf = r.empirical_npf.unwrap_or(f64::NAN);
        println!("sigma {:.3}  npf {npf:.4e}  npf/sigma {:.4}  trials {}", r.sweep_value, npf / r.sweep_value, r.trials_used);
    }
    Ok(())
}
