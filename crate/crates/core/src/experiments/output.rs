use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

use super::sweeps::{SweepConfig, SweepRecord};

pub const CSV_HEADER: [&str; 9] = [
    "sweep_value",
    "n_delta",
    "empirical_s_dist",
    "empirical_m_dist",
    "empirical_npf",
    "bound_lemma3",
    "bound_corollary",
    "trials_used",
    "seed",
];

/// 17 significant digits, enough to round-trip an `f64`.
fn float(v: f64) -> String {
    format!("{v:.16e}")
}

fn optional(v: Option<f64>) -> String {
    v.map(float).unwrap_or_default()
}

pub fn records_to_csv(records: &[SweepRecord]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record([
            float(r.sweep_value),
            float(r.n_delta),
            optional(r.empirical_s_dist),
            optional(r.empirical_m_dist),
            optional(r.empirical_npf),
            optional(r.bound_lemma3),
            optional(r.bound_corollary),
            r.trials_used.to_string(),
            r.seed.to_string(),
        ])?;
    }
    w.into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}

pub fn read_records_csv(path: impl AsRef<Path>) -> Result<Vec<SweepRecord>> {
    let mut reader = csv::Reader::from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    if header != CSV_HEADER {
        return Err(Error::InvalidArgument(format!("unexpected sweep header {header:?}")));
    }
    let parse = |s: &str, name: &str| -> Result<f64> {
        s.parse().map_err(|_| Error::InvalidArgument(format!("bad {name} value {s:?}")))
    };
    let opt = |s: &str, name: &str| -> Result<Option<f64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            parse(s, name).map(Some)
        }
    };
    reader
        .records()
        .map(|row| {
            let row = row?;
            let count = |i: usize| -> Result<u64> {
                row[i].parse().map_err(|_| Error::InvalidArgument(format!("bad {} value {:?}", CSV_HEADER[i], &row[i])))
            };
            Ok(SweepRecord {
                sweep_value: parse(&row[0], CSV_HEADER[0])?,
                n_delta: parse(&row[1], CSV_HEADER[1])?,
                empirical_s_dist: opt(&row[2], CSV_HEADER[2])?,
                empirical_m_dist: opt(&row[3], CSV_HEADER[3])?,
                empirical_npf: opt(&row[4], CSV_HEADER[4])?,
                bound_lemma3: opt(&row[5], CSV_HEADER[5])?,
                bound_corollary: opt(&row[6], CSV_HEADER[6])?,
                trials_used: count(7)? as usize,
                seed: count(8)?,
            })
        })
        .collect()
}

/// Writes through a temporary file in the target directory and renames it
/// into place.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// `fig.csv` → `fig.json`.
pub fn sidecar_path(csv_path: impl AsRef<Path>) -> PathBuf {
    csv_path.as_ref().with_extension("json")
}

/// Writes the CSV table and its JSON config sidecar; returns the sidecar path.
pub fn write_sweep(csv_path: impl AsRef<Path>, config: &SweepConfig, records: &[SweepRecord]) -> Result<PathBuf> {
    let csv_path = csv_path.as_ref();
    let sidecar = sidecar_path(csv_path);
    if sidecar == csv_path {
        return Err(Error::InvalidArgument(format!(
            "output {} would collide with its JSON sidecar",
            csv_path.display()
        )));
    }
    write_atomic(csv_path, &records_to_csv(records)?)?;
    let mut json = serde_json::to_vec_pretty(config)?;
    json.push(b'\n');
    write_atomic(&sidecar, &json)?;
    Ok(sidecar)
}
