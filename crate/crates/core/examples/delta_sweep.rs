// A small separation sweep written as CSV plus its JSON sidecar.

use spike_sens::experiments::{read_records_csv, run_sweep, write_sweep, Sweep, SweepConfig};
use spike_sens::PsfSpec;

fn main() -> spike_sens::Result<()> {
    let n = 128;
    let deltas: Vec<f64> = [2.0, 5.0, 10.0, 20.0].iter().map(|nd| nd / n as f64).collect();
    let mut cfg = SweepConfig::new(PsfSpec::gaussian(0.02)?, Sweep::Delta { deltas }, 11);
    cfg.n = n;
    cfg.trials = 4;

    let records = run_sweep(&cfg)?;
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("delta.csv");
    let sidecar = write_sweep(&path, &cfg, &records)?;
    println!("wrote {} and {}", path.display(), sidecar.display());

    for r in read_records_csv(&path)? {
        println!(
            "N*delta {:>5.1}  s_dist {:.3e}  npf {:.3e}  lemma3 {}",
            r.n_delta,
            r.empirical_s_dist.unwrap_or(f64::NAN),
            r.empirical_npf.unwrap_or(f64::NAN),
            r.bound_lemma3.map_or("vacuous".to_string(), |b| format!("{b:.3e}")),
        );
    }
    Ok(())
}
