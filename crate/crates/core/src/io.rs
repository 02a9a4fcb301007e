//! File formats: panel CSV, posterior-sample CSV, membership tables and JSON
//! run manifests.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frap::{BinaryPanel, PosteriorSamples, SamplerDiagnostics, ScaleStat};
use crate::longmem::TimeGrid;

pub const SAMPLES_HEADER: &str = "# frap-samples v1";

/// Reads a panel: a `t_1,…,t_n` header, then one 0/1 row per replicate.
/// Rows and columns in errors are 1-based and count data rows only.
pub fn read_panel<R: Read>(reader: R, delta: Option<f64>) -> Result<BinaryPanel> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    let n = header.len();
    if n == 0 || (n == 1 && header[0].is_empty()) {
        return Err(Error::EmptyPanel);
    }
    for (i, name) in header.iter().enumerate() {
        if name != format!("t_{}", i + 1) {
            return Err(Error::PanelEntry {
                row: 0,
                col: i + 1,
                msg: format!("header must be t_1..t_{n}, found {name:?}"),
            });
        }
    }
    let mut rows = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != n {
            return Err(Error::RaggedPanel {
                row: r + 1,
                found: rec.len(),
                expected: n,
            });
        }
        let row = rec
            .iter()
            .enumerate()
            .map(|(c, v)| match v {
                "0" => Ok(0u8),
                "1" => Ok(1u8),
                other => Err(Error::PanelEntry {
                    row: r + 1,
                    col: c + 1,
                    msg: format!("expected 0 or 1, found {other:?}"),
                }),
            })
            .collect::<Result<Vec<u8>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::EmptyPanel);
    }
    let grid = TimeGrid::new(0.0, delta.unwrap_or(1.0), n)?;
    BinaryPanel::new(rows, grid)
}

pub fn load_panel(path: &Path, delta: Option<f64>) -> Result<BinaryPanel> {
    read_panel(File::open(path)?, delta)
}

pub fn write_panel<W: Write>(writer: W, rows: &[Vec<u8>]) -> Result<()> {
    let n = rows.first().map_or(0, Vec::len);
    let mut w = csv::Writer::from_writer(writer);
    w.write_record((1..=n).map(|i| format!("t_{i}")))?;
    for row in rows {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_panel(path: &Path, panel: &BinaryPanel) -> Result<()> {
    write_panel(BufWriter::new(File::create(path)?), panel.rows())
}

/// Samples CSV: version line, a metadata comment, then one row per retained
/// draw with columns `H, tau, sigma, phi, g_1..g_n`.
pub fn write_samples<W: Write>(writer: W, s: &PosteriorSamples) -> Result<()> {
    let mut out = BufWriter::new(writer);
    writeln!(out, "{SAMPLES_HEADER}")?;
    writeln!(
        out,
        "# t0={} delta={} nu={} replicates={}",
        s.grid.t0, s.grid.delta, s.nu, s.replicates
    )?;
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["H".to_string(), "tau".into(), "sigma".into(), "phi".into()];
    header.extend((1..=s.intervals()).map(|i| format!("g_{i}")));
    w.write_record(&header)?;
    for l in 0..s.len() {
        let mut rec = vec![s.hurst[l], s.tau[l], s.sigma[l], s.phi[l]];
        rec.extend(&s.g[l]);
        w.write_record(rec.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_samples(path: &Path, s: &PosteriorSamples) -> Result<()> {
    write_samples(File::create(path)?, s)
}

fn parse_meta(line: &str) -> Result<BTreeMap<String, String>> {
    line.trim_start_matches('#')
        .split_whitespace()
        .map(|kv| {
            kv.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| Error::Config(format!("bad metadata field {kv:?}")))
        })
        .collect()
}

/// Inverse of [`write_samples`]; sampler diagnostics are not stored in the CSV
/// and come back zeroed.
pub fn read_samples<R: Read>(reader: R) -> Result<PosteriorSamples> {
    let mut buf = BufReader::new(reader);
    let mut line = String::new();
    buf.read_line(&mut line)?;
    if line.trim_end() != SAMPLES_HEADER {
        return Err(Error::Config(format!(
            "not a samples file: expected {SAMPLES_HEADER:?}, found {:?}",
            line.trim_end()
        )));
    }
    line.clear();
    buf.read_line(&mut line)?;
    let meta = parse_meta(&line)?;
    let get = |k: &str| -> Result<f64> {
        meta.get(k)
            .ok_or_else(|| Error::Config(format!("samples metadata lacks {k}")))?
            .parse::<f64>()
            .map_err(|e| Error::Config(format!("metadata {k}: {e}")))
    };
    let mut rdr = csv::Reader::from_reader(buf);
    let width = rdr.headers()?.len();
    if width < 5 {
        return Err(Error::Config(
            "samples file needs H, tau, sigma, phi and g columns".into(),
        ));
    }
    let n = width - 4;
    let grid = TimeGrid::new(get("t0")?, get("delta")?, n)?;
    let mut s = PosteriorSamples {
        grid,
        replicates: get("replicates")? as usize,
        nu: get("nu")?,
        hurst: Vec::new(),
        tau: Vec::new(),
        sigma: Vec::new(),
        phi: Vec::new(),
        g: Vec::new(),
        diagnostics: SamplerDiagnostics {
            iterations: 0,
            burn_in: 0,
            thin: 1,
            beta_acceptance: 0.0,
            eta_acceptance: 0.0,
            final_beta_scale: 0.0,
            final_eta_scale: 0.0,
        },
    };
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let vals = rec
            .iter()
            .enumerate()
            .map(|(c, v)| {
                v.parse::<f64>().map_err(|_| Error::PanelEntry {
                    row: r + 1,
                    col: c + 1,
                    msg: format!("not a number: {v:?}"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        s.hurst.push(vals[0]);
        s.tau.push(vals[1]);
        s.sigma.push(vals[2]);
        s.phi.push(vals[3]);
        s.g.push(vals[4..].to_vec());
    }
    s.diagnostics.iterations = s.len();
    s.validate()?;
    Ok(s)
}

pub fn load_samples(path: &Path) -> Result<PosteriorSamples> {
    read_samples(File::open(path)?)
}

/// Species × class table of a `K × m` membership matrix.
pub fn write_membership<W: Write>(writer: W, omega: &DMatrix<f64>) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["species".to_string()];
    header.extend((1..=omega.nrows()).map(|k| format!("class_{k}")));
    w.write_record(&header)?;
    for j in 0..omega.ncols() {
        let mut rec = vec![(j + 1).to_string()];
        rec.extend(omega.column(j).iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// One row per (label, scale).
pub fn write_scale_table<W: Write>(writer: W, rows: &[(String, ScaleStat)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["source", "scale", "marginal", "conditional"])?;
    for (label, st) in rows {
        w.write_record([
            label.clone(),
            st.scale.to_string(),
            st.marginal.to_string(),
            st.conditional.map_or_else(String::new, |c| c.to_string()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub config_hash: String,
    pub config: serde_json::Value,
    pub outputs: Vec<String>,
    /// Command-specific results (acceptance rates, ESS, DIC, …).
    pub results: serde_json::Value,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64, config: &crate::config::RunConfig) -> Result<Self> {
        Ok(RunManifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config_hash: config.hash(),
            config: serde_json::to_value(config)?,
            outputs: Vec::new(),
            results: serde_json::Value::Null,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut f, self)?;
        writeln!(f)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
    }
}

pub fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, value)?;
    writeln!(f)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_well_formed_panel() {
        let p = read_panel("t_1,t_2,t_3\n0,1,1\n1,0,0\n".as_bytes(), None).unwrap();
        assert_eq!(p.replicates(), 2);
        assert_eq!(p.intervals(), 3);
        assert_eq!(p.rows()[0], vec![0, 1, 1]);
        let p = read_panel("t_1,t_2\n0,1\n".as_bytes(), Some(0.5)).unwrap();
        assert_eq!(p.grid().delta, 0.5);
    }

    #[test]
    fn distinct_errors() {
        let e = read_panel("t_1,t_2,t_3\n0,2,1\n".as_bytes(), None).unwrap_err();
        assert!(matches!(e, Error::PanelEntry { row: 1, col: 2, .. }), "{e}");
        let e = read_panel("t_1,t_2,t_3\n0,1,1\n0,1\n".as_bytes(), None).unwrap_err();
        assert!(
            matches!(
                e,
                Error::RaggedPanel {
                    row: 2,
                    found: 2,
                    expected: 3
                }
            ),
            "{e}"
        );
        assert!(matches!(read_panel("".as_bytes(), None), Err(Error::EmptyPanel)));
        assert!(matches!(
            read_panel("t_1,t_2\n".as_bytes(), None),
            Err(Error::EmptyPanel)
        ));
        assert!(read_panel("a,b\n0,1\n".as_bytes(), None).is_err());
    }

    #[test]
    fn panel_round_trip() {
        let rows = vec![vec![0, 1, 1, 0], vec![1, 1, 0, 0]];
        let mut buf = Vec::new();
        write_panel(&mut buf, &rows).unwrap();
        let p = read_panel(buf.as_slice(), None).unwrap();
        assert_eq!(p.rows(), rows.as_slice());
    }

    #[test]
    fn samples_round_trip() {
        let s = PosteriorSamples {
            grid: TimeGrid::new(0.0, 0.5, 3).unwrap(),
            replicates: 4,
            nu: 0.001,
            hurst: vec![0.7, 0.71],
            tau: vec![0.1, 0.123_456_789_012_345_68],
            sigma: vec![1.0, 2.0],
            phi: vec![3.0, 4.0],
            g: vec![vec![0.1, -0.2, 0.3], vec![1e-17, 2.0, -3.5]],
            diagnostics: SamplerDiagnostics {
                iterations: 2,
                burn_in: 0,
                thin: 1,
                beta_acceptance: 0.0,
                eta_acceptance: 0.0,
                final_beta_scale: 0.0,
                final_eta_scale: 0.0,
            },
        };
        let mut buf = Vec::new();
        write_samples(&mut buf, &s).unwrap();
        assert!(buf.starts_with(SAMPLES_HEADER.as_bytes()));
        let back = read_samples(buf.as_slice()).unwrap();
        assert_eq!(back.hurst, s.hurst);
        assert_eq!(back.tau, s.tau);
        assert_eq!(back.g, s.g);
        assert_eq!(back.grid, s.grid);
        assert_eq!(back.replicates, 4);
        assert!(read_samples("H,tau\n".as_bytes()).is_err());
    }

    #[test]
    fn membership_table() {
        let m = DMatrix::from_column_slice(2, 2, &[0.25, 0.75, 1.0, 0.0]);
        let mut buf = Vec::new();
        write_membership(&mut buf, &m).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "species,class_1,class_2\n1,0.25,0.75\n2,1,0\n"
        );
    }
}
