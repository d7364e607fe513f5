//! JSON and CSV export, atomic file writes and small SVG line plots.
//!
//! CSV files carry a header row; complex values are written as paired
//! `_re`/`_im` columns.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::darboux::SchrodingerOp;
use crate::error::{Error, Result};
use crate::grid::{Boundary, DiffOp, ProductGrid};
use crate::lagrange::FormField;
use crate::spectral::EigenFamily;
use crate::transmute::TransmutationData;
use crate::{CMat, C64};

/// Writes `bytes` to a temporary sibling and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn csv_bytes(header: &[String], rows: impl Iterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

fn num(x: f64) -> String {
    format!("{x:e}")
}

/// Equal-length real columns under the given names.
pub fn columns_csv(names: &[&str], cols: &[Vec<f64>]) -> Result<Vec<u8>> {
    let n = cols.first().map_or(0, Vec::len);
    if names.len() != cols.len() || cols.iter().any(|c| c.len() != n) {
        return Err(Error::DimensionMismatch("CSV columns differ in length".into()));
    }
    let header = names.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    csv_bytes(&header, (0..n).map(|i| cols.iter().map(|c| num(c[i])).collect()))
}

/// Row-major matrix with `c{j}_re, c{j}_im` columns.
pub fn matrix_csv(m: &CMat) -> Result<Vec<u8>> {
    let header = (0..m.ncols()).flat_map(|j| [format!("c{j}_re"), format!("c{j}_im")]).collect::<Vec<_>>();
    csv_bytes(
        &header,
        (0..m.nrows()).map(|i| (0..m.ncols()).flat_map(|j| [num(m[(i, j)].re), num(m[(i, j)].im)]).collect()),
    )
}

/// Inverse of [`matrix_csv`].
pub fn read_matrix_csv(path: &Path) -> Result<CMat> {
    let mut r = csv::Reader::from_path(path)?;
    let mut rows: Vec<Vec<C64>> = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() % 2 != 0 {
            return Err(Error::Config(format!("{}: odd number of columns", path.display())));
        }
        let vals = rec
            .iter()
            .map(|s| s.trim().parse::<f64>().map_err(|e| Error::Config(format!("{}: {e}", path.display()))))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(vals.chunks(2).map(|p| C64::new(p[0], p[1])).collect());
    }
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(Error::Config(format!("{}: ragged rows", path.display())));
    }
    Ok(CMat::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

/// `x, q_re, q_im`.
pub fn potential_csv(op: &SchrodingerOp) -> Result<Vec<u8>> {
    let x = op.grid().points();
    let re = op.potential().iter().map(|z| z.re).collect();
    let im = op.potential().iter().map(|z| z.im).collect();
    columns_csv(&["x", "q_re", "q_im"], &[x, re, im])
}

fn grid_json(g: &ProductGrid) -> Value {
    let axes: Vec<Value> = g
        .axes()
        .iter()
        .map(|a| {
            json!({
                "start": a.point(0),
                "h": a.spacing(),
                "n": a.len(),
                "boundary": match a.boundary() { Boundary::Dirichlet => "dirichlet", Boundary::Periodic => "periodic" },
            })
        })
        .collect();
    json!({ "axes": axes, "fiber": g.fiber() })
}

fn complex_list(v: impl IntoIterator<Item = C64>) -> Value {
    Value::Array(v.into_iter().map(|z| json!([z.re, z.im])).collect())
}

/// Grid, and per multi-index the coefficient samples (row-major per node).
pub fn diffop_json(op: &DiffOp) -> Value {
    let terms: Vec<Value> = op
        .terms()
        .iter()
        .map(|(alpha, c)| json!({ "alpha": alpha, "samples": complex_list(c.samples().iter().cloned()) }))
        .collect();
    json!({ "grid": grid_json(op.grid()), "terms": terms })
}

pub fn family_json(fam: &EigenFamily) -> Value {
    json!({
        "lambdas": complex_list(fam.lambdas().iter().cloned()),
        "weights": fam.weights(),
        "biorthonormality_error": fam.biorthonormality_error(),
        "right": (0..fam.len()).map(|k| complex_list(fam.psi(k).iter().cloned())).collect::<Vec<_>>(),
        "left": (0..fam.len()).map(|k| complex_list(fam.phi(k).iter().cloned())).collect::<Vec<_>>(),
    })
}

/// Node coordinates followed by every component (`_re`/`_im` per fiber slot).
pub fn form_csv(form: &FormField) -> Result<Vec<u8>> {
    let g = form.grid();
    let nf = g.fiber();
    let mut header: Vec<String> = (0..g.dim()).map(|k| format!("t{k}")).collect();
    for s in form.subsets() {
        let name: String = if s.is_empty() { "scalar".into() } else { s.iter().map(|k| format!("d{k}")).collect() };
        for f in 0..nf {
            header.push(format!("{name}_{f}_re"));
            header.push(format!("{name}_{f}_im"));
        }
    }
    let rows = (0..g.nodes()).map(|node| {
        let mut r: Vec<String> = g.coords(node).into_iter().map(num).collect();
        for c in form.components() {
            for f in 0..nf {
                let z = c[node * nf + f];
                r.push(num(z.re));
                r.push(num(z.im));
            }
        }
        r
    });
    csv_bytes(&header, rows)
}

/// Writes `psi.csv`, `phi.csv`, `omega0.csv`, `omega0_adjoint.csv` and a JSON
/// manifest referencing them into `dir`. Returns the written paths.
pub fn write_transmutation(data: &TransmutationData, dir: &Path) -> Result<Vec<PathBuf>> {
    let files = [
        ("psi.csv", data.psi()),
        ("phi.csv", data.phi()),
        ("omega0.csv", data.omega0()),
        ("omega0_adjoint.csv", data.omega0_adj()),
    ];
    let mut out = Vec::new();
    for (name, m) in files {
        let p = dir.join(name);
        write_atomic(&p, &matrix_csv(m)?)?;
        out.push(p);
    }
    let g = data.grid();
    let manifest = json!({
        "grid": { "start": g.point(0), "h": g.spacing(), "n": g.len() },
        "fiber": data.fiber(),
        "lambdas": complex_list(data.lambdas().iter().cloned()),
        "weights": data.weights(),
        "files": files.iter().map(|(n, _)| *n).collect::<Vec<_>>(),
    });
    let p = dir.join("transmutation.json");
    write_atomic(&p, serde_json::to_string_pretty(&manifest)?.as_bytes())?;
    out.push(p);
    Ok(out)
}

/// One named polyline.
pub struct Series<'a> {
    pub name: &'a str,
    pub x: &'a [f64],
    pub y: &'a [f64],
}

const PALETTE: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// Minimal standalone SVG line plot with axes ranges in the caption.
pub fn svg_plot(title: &str, series: &[Series]) -> String {
    let (w, h, pad) = (640.0, 400.0, 40.0);
    let all_x = series.iter().flat_map(|s| s.x.iter().cloned());
    let all_y = series.iter().flat_map(|s| s.y.iter().cloned().filter(|v| v.is_finite()));
    let (x0, x1) = all_x.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let (mut y0, mut y1) = all_y.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !(y1 > y0) {
        y0 -= 1.0;
        y1 += 1.0;
    }
    let sx = |x: f64| pad + (x - x0) / (x1 - x0).max(f64::MIN_POSITIVE) * (w - 2.0 * pad);
    let sy = |y: f64| h - pad - (y - y0) / (y1 - y0) * (h - 2.0 * pad);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{pad}" y="24" font-family="sans-serif" font-size="14">{title}</text>"#);
    let _ = writeln!(
        s,
        r#"<text x="{pad}" y="{}" font-family="sans-serif" font-size="11">x: [{x0:.3}, {x1:.3}]  y: [{y0:.4e}, {y1:.4e}]</text>"#,
        h - 12.0
    );
    let _ = writeln!(
        s,
        r#"<rect x="{pad}" y="{pad}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        w - 2.0 * pad,
        h - 2.0 * pad
    );
    for (k, ser) in series.iter().enumerate() {
        let pts: Vec<String> = ser
            .x
            .iter()
            .zip(ser.y)
            .filter(|(_, y)| y.is_finite())
            .map(|(x, y)| format!("{:.2},{:.2}", sx(*x), sy(*y)))
            .collect();
        let color = PALETTE[k % PALETTE.len()];
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, pts.join(" "));
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" fill="{color}">{}</text>"#,
            w - pad - 120.0,
            pad + 16.0 * (k + 1) as f64,
            ser.name
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_csv_round_trip() {
        let m = CMat::from_fn(3, 2, |i, j| C64::new(i as f64 + 0.1, j as f64 - 1.0 / 3.0));
        let dir = std::env::temp_dir().join(format!("delsarte-io-{}", std::process::id()));
        let p = dir.join("m.csv");
        write_atomic(&p, &matrix_csv(&m).unwrap()).unwrap();
        assert_eq!(read_matrix_csv(&p).unwrap(), m);
        fs::remove_dir_all(dir).unwrap();
    }
}
