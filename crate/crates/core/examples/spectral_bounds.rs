// PSF band energies, flatness and the separation bounds they imply.

use spike_sens::bounds::{amplitude_stats, bound_report, separation_threshold, SpectralCharacteristics};
use spike_sens::{CMatrix, PsfSpec};

fn main() -> spike_sens::Result<()> {
    let n = 501;
    let x = CMatrix::identity(3, 3);
    let stats = amplitude_stats(&x)?;
    for psf in [PsfSpec::Dirac, PsfSpec::gaussian(0.01)?, PsfSpec::gaussian(0.02)?] {
        let chars = SpectralCharacteristics::compute(&psf, n)?;
        let threshold = separation_threshold(chars.rho, stats.kappa);
        println!("{psf}: E0 = {:.4e}, E1 = {:.4e}, rho = {:.4}, threshold = {:.4}", chars.e0, chars.e1, chars.rho, threshold);
        for delta in [0.05, 0.1, 0.3] {
            let r = bound_report(&chars, &stats, delta)?;
            match (r.theorem1, r.lemma3_s_distance) {
                (Some(t), Some(s)) => println!("  delta {delta}: ||J|| <= {t:.4e}, ||S - E1 I|| <= {s:.4e}"),
                _ => println!("  delta {delta}: below threshold"),
            }
        }
    }
    Ok(())
}
