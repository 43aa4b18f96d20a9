//! File formats: spike CSV with JSON sidecar, complex matrix CSV, model
//! JSON, graph JSON and report JSON.
//!
//! - spike CSV: header `trial,channel,time`, 0-based indices, times in
//!   decimal seconds written with 9 significant digits; sidecar JSON
//!   `{"p":..,"m":..,"T":..}` next to it (extension replaced by `.json`).
//! - matrix CSV: header `q,r,re,im`, upper triangle plus diagonal only,
//!   0-based, full matrix reconstructed by conjugate symmetry on read.
//! - model JSON: `{"nu":[..],"alpha":[[..]],"beta":[[..]]}` row-major.
//! - graph JSON: `{"omega":.., "p":.., "edges":[{"q":..,"r":..,"pc":..}]}`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::hawkes::{EventData, HawkesModel};
use crate::hermitian::HermitianMatrix;
use crate::rse::PartialCoherenceGraph;

/// Whether the time column of a spike CSV is local to each trial
/// (`Separate`, the default) or already laid out on the concatenated global
/// axis (`Concatenated`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrialLayout {
    Separate,
    Concatenated,
}

/// Sidecar metadata for a spike CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpikeSidecar {
    pub p: usize,
    pub m: usize,
    #[serde(rename = "T")]
    pub horizon: f64,
}

/// Path of the JSON sidecar belonging to `path` (extension replaced).
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn parse_err(path: &Path, line: u64, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

/// Write events plus sidecar. Times are serialized with 9 significant
/// digits, so a read-back reproduces the data up to that precision.
pub fn write_spike_csv(path: &Path, data: &EventData) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "trial,channel,time").map_err(|e| io_err(path, e))?;
    for k in 0..data.m() {
        for q in 0..data.p() {
            for &t in data.times(k, q) {
                writeln!(w, "{k},{q},{t:.8e}").map_err(|e| io_err(path, e))?;
            }
        }
    }
    w.flush().map_err(|e| io_err(path, e))?;
    let sidecar = SpikeSidecar {
        p: data.p(),
        m: data.m(),
        horizon: data.horizon(),
    };
    write_json(&sidecar_path(path), &sidecar)
}

/// Read events against their sidecar. Rows may appear in any trial/channel
/// order, but times within one `(trial, channel)` must be strictly
/// increasing; violations are reported with their line number.
pub fn read_spike_csv(path: &Path, layout: TrialLayout) -> Result<EventData> {
    let sidecar: SpikeSidecar = read_json(&sidecar_path(path))?;
    if sidecar.p == 0 || sidecar.m == 0 || !(sidecar.horizon > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "invalid sidecar: p={} m={} T={}",
            sidecar.p, sidecar.m, sidecar.horizon
        )));
    }
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(file));
    {
        let headers = rdr.headers().map_err(|e| csv_err(path, e))?;
        let expect = ["trial", "channel", "time"];
        if headers.len() != 3 || headers.iter().zip(expect).any(|(h, e)| h != e) {
            return Err(parse_err(path, 1, "expected header 'trial,channel,time'"));
        }
    }
    let mut events = vec![vec![Vec::<f64>::new(); sidecar.p]; sidecar.m];
    for record in rdr.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let line = record
            .position()
            .map(|pos| pos.line())
            .unwrap_or_default();
        if record.len() != 3 {
            return Err(parse_err(path, line, "expected 3 fields"));
        }
        let trial: usize = record[0]
            .parse()
            .map_err(|_| parse_err(path, line, format!("bad trial '{}'", &record[0])))?;
        let channel: usize = record[1]
            .parse()
            .map_err(|_| parse_err(path, line, format!("bad channel '{}'", &record[1])))?;
        let mut time: f64 = record[2]
            .parse()
            .map_err(|_| parse_err(path, line, format!("bad time '{}'", &record[2])))?;
        if trial >= sidecar.m {
            return Err(parse_err(
                path,
                line,
                format!("trial {trial} >= m={}", sidecar.m),
            ));
        }
        if channel >= sidecar.p {
            return Err(parse_err(
                path,
                line,
                format!("channel {channel} >= p={}", sidecar.p),
            ));
        }
        if layout == TrialLayout::Concatenated {
            time -= trial as f64 * sidecar.horizon;
        }
        if !time.is_finite() || time <= 0.0 || time > sidecar.horizon {
            return Err(parse_err(
                path,
                line,
                format!(
                    "time {} outside (0, {}] for trial {trial}",
                    &record[2], sidecar.horizon
                ),
            ));
        }
        let cell = &mut events[trial][channel];
        if let Some(&last) = cell.last() {
            if time <= last {
                return Err(parse_err(
                    path,
                    line,
                    format!("times not strictly increasing in trial {trial}, channel {channel}"),
                ));
            }
        }
        cell.push(time);
    }
    EventData::new(sidecar.p, sidecar.horizon, events)
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let line = match e.position() {
        Some(pos) => pos.line(),
        None => 0,
    };
    parse_err(path, line, e.to_string())
}

/// Write the diagonal and upper triangle of a Hermitian matrix as
/// `q,r,re,im` rows (0-based, `q <= r`). Values round-trip exactly.
pub fn write_matrix_csv(path: &Path, h: &HermitianMatrix) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "q,r,re,im").map_err(|e| io_err(path, e))?;
    for q in 0..h.dim() {
        let entry = h.get(q, q);
        writeln!(w, "{q},{q},{},{}", entry.re, 0.0).map_err(|e| io_err(path, e))?;
        for r in (q + 1)..h.dim() {
            let entry = h.get(q, r);
            writeln!(w, "{q},{r},{},{}", entry.re, entry.im).map_err(|e| io_err(path, e))?;
        }
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Read a matrix CSV written by [`write_matrix_csv`]: all `q <= r` entries
/// must be present exactly once; the lower triangle is reconstructed by
/// conjugate symmetry.
pub fn read_matrix_csv(path: &Path) -> Result<HermitianMatrix> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(file));
    {
        let headers = rdr.headers().map_err(|e| csv_err(path, e))?;
        let expect = ["q", "r", "re", "im"];
        if headers.len() != 4 || headers.iter().zip(expect).any(|(h, e)| h != e) {
            return Err(parse_err(path, 1, "expected header 'q,r,re,im'"));
        }
    }
    let mut entries: Vec<(usize, usize, Complex64, u64)> = Vec::new();
    let mut dim = 0usize;
    for record in rdr.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let line = record
            .position()
            .map(|pos| pos.line())
            .unwrap_or_default();
        if record.len() != 4 {
            return Err(parse_err(path, line, "expected 4 fields"));
        }
        let q: usize = record[0]
            .parse()
            .map_err(|_| parse_err(path, line, format!("bad index '{}'", &record[0])))?;
        let r: usize = record[1]
            .parse()
            .map_err(|_| parse_err(path, line, format!("bad index '{}'", &record[1])))?;
        let re: f64 = record[2]
            .parse()
            .map_err(|_| parse_err(path, line, format!("bad value '{}'", &record[2])))?;
        let im: f64 = record[3]
            .parse()
            .map_err(|_| parse_err(path, line, format!("bad value '{}'", &record[3])))?;
        if q > r {
            return Err(parse_err(
                path,
                line,
                format!("row ({q},{r}) below the diagonal; only q <= r is stored"),
            ));
        }
        if q == r && im != 0.0 {
            return Err(parse_err(
                path,
                line,
                format!("diagonal entry ({q},{q}) has imaginary part {im}"),
            ));
        }
        dim = dim.max(r + 1);
        entries.push((q, r, Complex64::new(re, im), line));
    }
    if dim == 0 {
        return Err(Error::EmptyInput("matrix csv has no entries"));
    }
    let mut dense: DMatrix<Option<Complex64>> = DMatrix::from_element(dim, dim, None);
    for (q, r, z, line) in entries {
        if dense[(q, r)].is_some() {
            return Err(parse_err(path, line, format!("duplicate entry ({q},{r})")));
        }
        dense[(q, r)] = Some(z);
    }
    let mut diag = vec![0.0; dim];
    let mut upper = Vec::with_capacity(dim * (dim - 1) / 2);
    for q in 0..dim {
        match dense[(q, q)] {
            Some(z) => diag[q] = z.re,
            None => {
                return Err(parse_err(path, 0, format!("missing diagonal entry ({q},{q})")));
            }
        }
        for r in (q + 1)..dim {
            match dense[(q, r)] {
                Some(z) => upper.push(z),
                None => {
                    return Err(parse_err(path, 0, format!("missing entry ({q},{r})")));
                }
            }
        }
    }
    HermitianMatrix::from_parts(diag, upper)
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    nu: Vec<f64>,
    alpha: Vec<Vec<f64>>,
    beta: Vec<Vec<f64>>,
}

/// Read a Hawkes model from JSON (`nu` array, `alpha`/`beta` row-major
/// arrays of arrays).
pub fn read_model_json(path: &Path) -> Result<HawkesModel> {
    let raw: ModelFile = read_json(path)?;
    let p = raw.nu.len();
    let to_matrix = |rows: &[Vec<f64>], name: &str| -> Result<DMatrix<f64>> {
        if rows.len() != p || rows.iter().any(|r| r.len() != p) {
            return Err(Error::ShapeMismatch(format!(
                "{name} must be {p}x{p} to match nu"
            )));
        }
        Ok(DMatrix::from_fn(p, p, |q, r| rows[q][r]))
    };
    HawkesModel::new(
        raw.nu.clone(),
        to_matrix(&raw.alpha, "alpha")?,
        to_matrix(&raw.beta, "beta")?,
    )
}

/// Write a Hawkes model as JSON.
pub fn write_model_json(path: &Path, model: &HawkesModel) -> Result<()> {
    let p = model.dim();
    let to_rows = |m: &DMatrix<f64>| -> Vec<Vec<f64>> {
        (0..p).map(|q| (0..p).map(|r| m[(q, r)]).collect()).collect()
    };
    write_json(
        path,
        &ModelFile {
            nu: model.nu().iter().copied().collect(),
            alpha: to_rows(model.alpha()),
            beta: to_rows(model.beta()),
        },
    )
}

/// Write a partial-coherence graph as JSON.
pub fn write_graph_json(path: &Path, graph: &PartialCoherenceGraph) -> Result<()> {
    write_json(path, graph)
}

pub fn read_graph_json(path: &Path) -> Result<PartialCoherenceGraph> {
    read_json(path)
}

/// Pretty-printed JSON writer used for every report artifact.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::Json {
        path: path.display().to_string(),
        source: e,
    })?;
    w.write_all(b"\n").map_err(|e| io_err(path, e))?;
    w.flush().map_err(|e| io_err(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::Json {
        path: path.display().to_string(),
        source: e,
    })
}

/// Plot-data CSV: a panel-naming header comment, then a column header and
/// rows. Used for the figure benches.
pub fn write_plot_csv(
    path: &Path,
    panel: &str,
    columns: &[&str],
    rows: &[Vec<f64>],
) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "# panel: {panel}").map_err(|e| io_err(path, e))?;
    writeln!(w, "{}", columns.join(",")).map_err(|e| io_err(path, e))?;
    for row in rows {
        let line = row
            .iter()
            .map(|v| format!("{v}"))
            .collect::<Vec<_>>()
            .join(",");
        writeln!(w, "{line}").map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Read back a plot CSV (skipping `#` comment lines); returns (panel,
/// columns, rows).
pub fn read_plot_csv(path: &Path) -> Result<(String, Vec<String>, Vec<Vec<f64>>)> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let reader = BufReader::new(file);
    let mut panel = String::new();
    let mut columns = Vec::new();
    let mut rows = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        let lineno = idx as u64 + 1;
        if let Some(rest) = line.strip_prefix('#') {
            if let Some(p) = rest.trim().strip_prefix("panel:") {
                panel = p.trim().to_string();
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        if columns.is_empty() {
            columns = line.split(',').map(|s| s.trim().to_string()).collect();
            continue;
        }
        let row: std::result::Result<Vec<f64>, _> =
            line.split(',').map(|s| s.trim().parse::<f64>()).collect();
        rows.push(row.map_err(|_| parse_err(path, lineno, "bad numeric row"))?);
    }
    Ok((panel, columns, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hawkes::PresetId;
    use approx::assert_relative_eq;
    use std::io::Write as _;

    #[test]
    fn spike_roundtrip_simulated_preset() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ev.csv");
        let model = HawkesModel::preset(PresetId::A, 12).unwrap();
        let data = model.simulate(20.0, 3, 17).unwrap();
        write_spike_csv(&path, &data).unwrap();
        let back = read_spike_csv(&path, TrialLayout::Separate).unwrap();
        assert_eq!(back.p(), data.p());
        assert_eq!(back.m(), data.m());
        assert_eq!(back.total_events(), data.total_events());
        for k in 0..data.m() {
            for q in 0..data.p() {
                for (a, b) in data.times(k, q).iter().zip(back.times(k, q)) {
                    assert_relative_eq!(a, b, max_relative = 1e-8);
                }
            }
        }
    }

    #[test]
    fn spike_empty_file_with_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ev.csv");
        std::fs::write(&path, "trial,channel,time\n").unwrap();
        write_json(
            &sidecar_path(&path),
            &SpikeSidecar {
                p: 3,
                m: 2,
                horizon: 5.0,
            },
        )
        .unwrap();
        let data = read_spike_csv(&path, TrialLayout::Separate).unwrap();
        assert_eq!(data.total_events(), 0);
        assert_eq!(data.p(), 3);
    }

    #[test]
    fn spike_unsorted_rejected_with_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ev.csv");
        std::fs::write(&path, "trial,channel,time\n0,0,2.0\n0,0,1.0\n").unwrap();
        write_json(
            &sidecar_path(&path),
            &SpikeSidecar {
                p: 1,
                m: 1,
                horizon: 5.0,
            },
        )
        .unwrap();
        match read_spike_csv(&path, TrialLayout::Separate) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn spike_concatenated_layout_unfolds() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ev.csv");
        // trial 1 times on the global axis (5, 10]
        std::fs::write(&path, "trial,channel,time\n0,0,1.5\n1,0,6.5\n").unwrap();
        write_json(
            &sidecar_path(&path),
            &SpikeSidecar {
                p: 1,
                m: 2,
                horizon: 5.0,
            },
        )
        .unwrap();
        let data = read_spike_csv(&path, TrialLayout::Concatenated).unwrap();
        assert_relative_eq!(data.times(1, 0)[0], 1.5);
    }

    #[test]
    fn spike_out_of_range_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ev.csv");
        std::fs::write(&path, "trial,channel,time\n0,0,7.5\n").unwrap();
        write_json(
            &sidecar_path(&path),
            &SpikeSidecar {
                p: 1,
                m: 1,
                horizon: 5.0,
            },
        )
        .unwrap();
        assert!(matches!(
            read_spike_csv(&path, TrialLayout::Separate),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn matrix_roundtrip_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("theta.csv");
        let h = HermitianMatrix::from_parts(
            vec![1.25, -0.5, 3.0],
            vec![
                Complex64::new(0.1, -0.2),
                Complex64::new(1e-17, 2.5),
                Complex64::new(-4.0, 1.0 / 3.0),
            ],
        )
        .unwrap();
        write_matrix_csv(&path, &h).unwrap();
        let back = read_matrix_csv(&path).unwrap();
        assert_eq!(h, back);
    }

    #[test]
    fn matrix_rejects_lower_triangle_and_duplicates() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        std::fs::write(&path, "q,r,re,im\n1,0,1.0,0.0\n").unwrap();
        assert!(matches!(
            read_matrix_csv(&path),
            Err(Error::Parse { line: 2, .. })
        ));

        let mut f = File::create(&path).unwrap();
        writeln!(f, "q,r,re,im").unwrap();
        writeln!(f, "0,0,1.0,0.0").unwrap();
        writeln!(f, "0,0,2.0,0.0").unwrap();
        drop(f);
        assert!(matches!(
            read_matrix_csv(&path),
            Err(Error::Parse { line: 3, .. })
        ));
    }

    #[test]
    fn matrix_rejects_missing_entries() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        std::fs::write(&path, "q,r,re,im\n0,1,1.0,0.5\n1,1,2.0,0\n").unwrap();
        // (0,0) missing
        assert!(read_matrix_csv(&path).is_err());
    }

    #[test]
    fn model_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let model = HawkesModel::preset(PresetId::C, 12).unwrap();
        write_model_json(&path, &model).unwrap();
        let back = read_model_json(&path).unwrap();
        assert_eq!(&model, &back);
    }

    #[test]
    fn plot_csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("plot.csv");
        write_plot_csv(
            &path,
            "panel-name",
            &["x", "median", "lo", "hi"],
            &[vec![1.0, 2.0, 1.5, 2.5], vec![2.0, 3.0, 2.5, 3.5]],
        )
        .unwrap();
        let (panel, cols, rows) = read_plot_csv(&path).unwrap();
        assert_eq!(panel, "panel-name");
        assert_eq!(cols, vec!["x", "median", "lo", "hi"]);
        assert_eq!(rows.len(), 2);
        assert_relative_eq!(rows[1][3], 3.5);
    }
}
