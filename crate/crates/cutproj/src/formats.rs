//! CSV and JSON writers, and the comb exchange reader.
//!
//! Floats are written with Rust's shortest round-trip formatting, so output is
//! byte-stable for equal values.

use std::fmt::Write as _;

use cutproj_core::spectra::DiffractionSpectrum;
use cutproj_core::{Atom, LatticePointRef, WeightedComb};
use num_complex::Complex64;
use serde_json::{json, Value};

use crate::config::Config;
use crate::error::CliError;

fn header(prefixes: &[(&str, usize)], tail: &[&str]) -> String {
    let mut cols: Vec<String> = Vec::new();
    for (p, n) in prefixes {
        cols.extend((1..=*n).map(|i| format!("{p}{i}")));
    }
    cols.extend(tail.iter().map(|s| s.to_string()));
    cols.join(",")
}

fn push_row<I: IntoIterator<Item = String>>(out: &mut String, fields: I) {
    let row: Vec<String> = fields.into_iter().collect();
    out.push_str(&row.join(","));
    out.push('\n');
}

fn f(v: f64) -> String {
    // normalise -0 so equal spectra print identically
    if v == 0.0 {
        "0".to_string()
    } else {
        format!("{v}")
    }
}

/// `x1..xd,xstar1..xstarm,z1..zn`
pub fn modelset_csv(d: usize, m: usize, points: &[LatticePointRef]) -> String {
    let mut out = header(&[("x", d), ("xstar", m), ("z", d + m)], &[]);
    out.push('\n');
    for p in points {
        push_row(
            &mut out,
            p.x.iter()
                .chain(&p.xstar)
                .map(|v| f(*v))
                .chain(p.z.iter().map(|z| z.to_string())),
        );
    }
    out
}

/// `k1..kd,re,im,intensity`
pub fn spectrum_csv(d: usize, spec: &DiffractionSpectrum) -> String {
    let mut out = header(&[("k", d)], &["re", "im", "intensity"]);
    out.push('\n');
    for p in &spec.peaks {
        push_row(
            &mut out,
            p.k.iter().map(|v| f(*v)).chain([
                f(p.amplitude.re),
                f(p.amplitude.im),
                f(p.intensity()),
            ]),
        );
    }
    out
}

/// Metadata document for a spectrum run.
pub fn spectrum_json(cfg: &Config, spec: &DiffractionSpectrum) -> Value {
    let meta = &spec.meta;
    let max_amp = spec
        .peaks
        .iter()
        .map(|p| p.amplitude.norm())
        .fold(0.0, f64::max);
    json!({
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
        "spectrum": {
            "peaks": spec.peaks.len(),
            "candidates": meta.candidates,
            "threshold": meta.threshold,
            "scale": meta.scale,
            "sign": meta.sign,
            "max_amplitude": max_amp,
        },
        "truncation": {
            "internal_radius": meta.internal_radius,
            "omitted_amplitude_bound": meta.threshold / 10.0,
        },
        "cutoff": {
            "plateau_lo": meta.cutoff.plateau().lo,
            "plateau_hi": meta.cutoff.plateau().hi,
            "delta": meta.cutoff.axes().iter().map(|t| t.delta).collect::<Vec<_>>(),
            "admissibility_bound": meta.cutoff.admissibility_bound(),
        },
    })
}

/// One oracle comparison row.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleRow {
    pub k: Vec<f64>,
    pub oracle: Complex64,
    pub closed: Complex64,
    /// `|oracle − closed| / max |A|`
    pub rel: f64,
}

/// `k1..kd,oracle_re,oracle_im,closed_re,closed_im,rel_diff`
pub fn oracle_csv(d: usize, rows: &[OracleRow]) -> String {
    let mut out = header(
        &[("k", d)],
        &[
            "oracle_re",
            "oracle_im",
            "closed_re",
            "closed_im",
            "rel_diff",
        ],
    );
    out.push('\n');
    for r in rows {
        push_row(
            &mut out,
            r.k.iter().map(|v| f(*v)).chain([
                f(r.oracle.re),
                f(r.oracle.im),
                f(r.closed.re),
                f(r.closed.im),
                f(r.rel),
            ]),
        );
    }
    out
}

/// `t1..td,norm,accepted`
pub fn almost_period_csv(d: usize, rows: &[(Vec<f64>, f64, bool)]) -> String {
    let mut out = header(&[("t", d)], &["norm", "accepted"]);
    out.push('\n');
    for (t, norm, acc) in rows {
        push_row(
            &mut out,
            t.iter()
                .map(|v| f(*v))
                .chain([f(*norm), (*acc as u8).to_string()]),
        );
    }
    out
}

/// Comb exchange format `x1..xd,re,im`.
pub fn comb_csv(comb: &WeightedComb) -> String {
    let mut out = header(&[("x", comb.dim())], &["re", "im"]);
    out.push('\n');
    for a in comb.atoms() {
        push_row(
            &mut out,
            a.position
                .iter()
                .map(|v| f(*v))
                .chain([f(a.weight.re), f(a.weight.im)]),
        );
    }
    out
}

/// Reads the comb exchange format; dimension is taken from the header.
/// Duplicate positions are rejected.
pub fn read_comb(text: &str, path: &str) -> Result<WeightedComb, CliError> {
    let fmt = |line: usize, message: String| CliError::Format {
        path: path.to_string(),
        line,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let head = rdr.headers().map_err(|e| fmt(1, e.to_string()))?.clone();
    let n = head.len();
    let d = n.saturating_sub(2);
    let expected: Vec<String> = header(&[("x", d)], &["re", "im"])
        .split(',')
        .map(String::from)
        .collect();
    if d == 0 || head.iter().ne(expected.iter().map(String::as_str)) {
        return Err(fmt(1, format!("expected header {}", expected.join(","))));
    }
    let mut atoms = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| fmt(line, e.to_string()))?;
        let vals = rec
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|e| fmt(line, format!("`{s}`: {e}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        atoms.push(Atom {
            position: vals[..d].to_vec(),
            weight: Complex64::new(vals[d], vals[d + 1]),
        });
    }
    WeightedComb::new(d, atoms).map_err(|e| match e {
        cutproj_core::Error::DuplicatePosition { index } => {
            fmt(index + 2, "duplicate position".to_string())
        }
        other => fmt(0, other.to_string()),
    })
}

/// Human-readable `key: value` report lines.
#[derive(Debug, Default, Clone)]
pub struct Report {
    text: String,
}

impl Report {
    pub fn line(&mut self, key: &str, value: impl std::fmt::Display) {
        let _ = writeln!(self.text, "{key}: {value}");
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comb_round_trip() {
        let c = WeightedComb::new(
            2,
            vec![
                Atom {
                    position: vec![0.5, -1.0],
                    weight: Complex64::new(1.0, 0.25),
                },
                Atom {
                    position: vec![0.0, 3.0],
                    weight: Complex64::new(-2.0, 0.0),
                },
            ],
        )
        .unwrap();
        let text = comb_csv(&c);
        assert!(text.starts_with("x1,x2,re,im\n0.5,-1,1,0.25\n"));
        assert_eq!(read_comb(&text, "mem").unwrap(), c);
    }

    #[test]
    fn comb_reader_rejects_duplicates_and_bad_headers() {
        let dup = "x1,re,im\n0.5,1,0\n1,1,0\n0.5,2,0\n";
        assert!(matches!(
            read_comb(dup, "mem"),
            Err(CliError::Format { .. })
        ));
        assert!(read_comb("x,re,im\n0,1,0\n", "mem").is_err());
        assert!(read_comb("x1,re,im\n0,abc,0\n", "mem").is_err());
    }

    #[test]
    fn negative_zero_prints_as_zero() {
        assert_eq!(f(-0.0), "0");
        assert_eq!(f(0.1), "0.1");
    }
}
