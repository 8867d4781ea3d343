//! CSV and JSON artifacts: `#`-prefixed provenance header, comma-separated
//! rows, LF line endings.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::radial::{RadialProfile, SolverSettings};
use crate::variational::VariationalDiagnostics;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Provenance written ahead of every artifact.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Header {
    pub tool: String,
    pub version: String,
    pub command: String,
    #[serde(serialize_with = "as_map")]
    pub config: Vec<(String, String)>,
    #[serde(serialize_with = "as_map")]
    pub tolerances: Vec<(String, String)>,
}

fn as_map<S: serde::Serializer>(
    pairs: &[(String, String)],
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    s.collect_map(pairs.iter().map(|(k, v)| (k, v)))
}

impl Header {
    pub fn new(command: impl Into<String>, settings: &SolverSettings) -> Self {
        Self {
            tool: "liouville".into(),
            version: VERSION.into(),
            command: command.into(),
            config: Vec::new(),
            tolerances: vec![
                ("rel_tol".into(), format!("{:e}", settings.rel_tol)),
                ("abs_tol".into(), format!("{:e}", settings.abs_tol)),
                ("flux_tol".into(), format!("{:e}", settings.flux_tol)),
                ("tail_cut".into(), format!("{:e}", settings.tail_cut)),
            ],
        }
    }

    pub fn with(mut self, key: impl Into<String>, value: impl ToString) -> Self {
        self.config.push((key.into(), value.to_string()));
        self
    }

    fn write_comments<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "# {} {}", self.tool, self.version)?;
        writeln!(out, "# command: {}", self.command)?;
        for (k, v) in &self.config {
            writeln!(out, "# {k}={v}")?;
        }
        let tol: Vec<String> = self
            .tolerances
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect();
        writeln!(out, "# tolerances: {}", tol.join(" "))
    }
}

pub fn write_csv_to<W: Write, T: Serialize>(out: W, header: &Header, rows: &[T]) -> Result<()> {
    let mut out = out;
    header.write_comments(&mut out)?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv<T: Serialize>(path: &Path, header: &Header, rows: &[T]) -> Result<()> {
    write_csv_to(BufWriter::new(File::create(path)?), header, rows)
}

#[derive(Serialize)]
struct Envelope<'a, T> {
    metadata: &'a Header,
    rows: &'a [T],
}

pub fn write_json<T: Serialize>(path: &Path, header: &Header, rows: &[T]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(
        &mut out,
        &Envelope {
            metadata: header,
            rows,
        },
    )
    .map_err(|e| crate::Error::Io(e.to_string()))?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfileRow {
    pub t: f64,
    pub r: f64,
    pub u: f64,
    pub u_prime: f64,
    pub flux: f64,
}

/// Node values of a profile, with `N`, `a`, `alpha` and `beta` added to the
/// header.
pub fn profile_rows(profile: &RadialProfile, header: Header) -> (Header, Vec<ProfileRow>) {
    let header = header
        .with("N", profile.params.n)
        .with("a", profile.params.a)
        .with("alpha", profile.alpha)
        .with("beta", profile.beta);
    let rows = profile
        .trajectory
        .nodes
        .iter()
        .map(|node| {
            let r = node.t.exp();
            ProfileRow {
                t: node.t,
                r,
                u: node.y[0],
                u_prime: node.y[1] / r,
                flux: -node.y[1],
            }
        })
        .collect();
    (header, rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiagnosticsRow {
    #[serde(rename = "N")]
    pub n: f64,
    pub a: f64,
    pub alpha: f64,
    pub alpha_prime: f64,
    #[serde(rename = "J")]
    pub j: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub zero_count: usize,
    pub bounded: bool,
}

impl From<&VariationalDiagnostics> for DiagnosticsRow {
    fn from(d: &VariationalDiagnostics) -> Self {
        Self {
            n: d.params.n,
            a: d.params.a,
            alpha: d.alpha,
            alpha_prime: d.alpha_prime,
            j: d.j_value,
            k: d.k_value,
            zero_count: d.zero_count,
            bounded: d.bounded,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial::{shoot, ShootingParams};

    #[test]
    fn csv_has_comment_header_and_lf() {
        let h = Header::new("test", &SolverSettings::default()).with("N", 4);
        let mut buf = Vec::new();
        write_csv_to(
            &mut buf,
            &h,
            &[DiagnosticsRow {
                n: 4.0,
                a: 1.0,
                alpha: 6.0,
                alpha_prime: 0.0,
                j: 0.5,
                k: 1.0,
                zero_count: 2,
                bounded: true,
            }],
        )
        .unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(!text.contains('\r'));
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("# liouville "));
        assert!(lines.iter().any(|l| *l == "# N=4"));
        let data: Vec<&&str> = lines.iter().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(*data[0], "N,a,alpha,alpha_prime,J,K,zero_count,bounded");
        assert_eq!(*data[1], "4.0,1.0,6.0,0.0,0.5,1.0,2,true");
    }

    #[test]
    fn profile_rows_carry_level() {
        let p = shoot(ShootingParams::explicit(4.0), 1e-9).unwrap();
        let (h, rows) = profile_rows(&p, Header::new("profile", &SolverSettings::default()));
        assert!(h.config.iter().any(|(k, _)| k == "alpha"));
        let last = rows.last().unwrap();
        assert!((last.flux - 6.0).abs() < 1e-6);
    }
}
