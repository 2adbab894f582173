// Load a PSF spectrum from a CSV table and compare it with the analytic
// Gaussian it was sampled from.

use std::io::Write;

use spike_sens::bounds::SpectralCharacteristics;
use spike_sens::model::psf_spectrum;
use spike_sens::sensitivity::noise_propagation_factor;
use spike_sens::{CMatrix, ProblemInstance, PsfSpec};

fn main() -> spike_sens::Result<()> {
    let n = 101;
    let gauss = PsfSpec::gaussian(0.02)?;
    let mut file = tempfile::Builder::new().suffix(".csv").tempfile()?;
    writeln!(file, "freq,re,im")?;
    for i in 0..=400 {
        let f = -55.0 + 110.0 * i as f64 / 400.0;
        let g = psf_spectrum(&gauss, f)?;
        writeln!(file, "{f},{},{}", g.re, g.im)?;
    }
    file.flush()?;
    let table = PsfSpec::from_csv_path(file.path())?;

    let x = CMatrix::identity(2, 2);
    for psf in [gauss, table] {
        let chars = SpectralCharacteristics::compute(&psf, n)?;
        let inst = ProblemInstance::new(n, psf.clone(), vec![0.3, 0.6], x.clone())?;
        let label = if matches!(psf, PsfSpec::Tabulated { .. }) { "table" } else { "gaussian" };
        println!("{label:<9} E1 = {:.6e}  rho = {:.5}  npf = {:.6e}", chars.e1, chars.rho, noise_propagation_factor(&inst)?);
    }
    Ok(())
}
