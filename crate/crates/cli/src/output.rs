//! CSV and JSON emission. Floats use 17 significant digits so tables
//! round-trip exactly.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use fgboltz::diagnostics::DiagnosticsRecord;
use fgboltz::gpc::GpcField;
use fgboltz::spectral::grid_points;
use fgboltz::{Complex64, Domain, SpectralField};
use serde::Serialize;

use crate::error::{CliError, CliResult};

pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn writer(path: &Path) -> CliResult<csv::Writer<File>> {
    Ok(csv::Writer::from_path(path)?)
}

pub const DIAGNOSTIC_COLUMNS: [&str; 9] = ["N", "t", "mass", "mass_drift", "l1", "l2", "h1", "neg_l2", "error"];

/// One row per record; `errors[i]` fills the `error` column when known.
pub fn write_diagnostics(
    path: &Path,
    n: usize,
    records: &[DiagnosticsRecord],
    errors: Option<&[f64]>,
) -> CliResult<()> {
    let mut w = writer(path)?;
    w.write_record(DIAGNOSTIC_COLUMNS)?;
    for (i, r) in records.iter().enumerate() {
        w.write_record([
            n.to_string(),
            num(r.t),
            num(r.mass),
            num(r.mass_drift),
            num(r.l1),
            num(r.l2),
            num(r.h1),
            num(r.neg_l2),
            opt(errors.map(|e| e[i])),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn mode_header(dim: usize) -> Vec<String> {
    (1..=dim).map(|i| format!("n{i}")).collect()
}

pub fn write_coefficients(path: &Path, f: &SpectralField) -> CliResult<()> {
    let mut w = writer(path)?;
    let mut header = mode_header(f.domain.dim);
    header.extend(["re".to_string(), "im".to_string()]);
    w.write_record(&header)?;
    for (n, c) in f.lattice().iter().zip(&f.coeffs) {
        let mut row: Vec<String> = n.iter().map(i64::to_string).collect();
        row.extend([num(c.re), num(c.im)]);
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_gpc_coefficients(path: &Path, f: &GpcField) -> CliResult<()> {
    let mut w = writer(path)?;
    let mut header = vec!["k".to_string()];
    header.extend(mode_header(f.domain().dim));
    header.extend(["re".to_string(), "im".to_string()]);
    w.write_record(&header)?;
    for (k, m) in f.modes.iter().enumerate() {
        for (n, c) in m.lattice().iter().zip(&m.coeffs) {
            let mut row = vec![k.to_string()];
            row.extend(n.iter().map(i64::to_string));
            row.extend([num(c.re), num(c.im)]);
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a table written by [`write_coefficients`]. Modes outside the
/// lattice of `domain` are dropped; missing modes are zero.
pub fn read_coefficients(path: &Path, domain: &Domain) -> CliResult<SpectralField> {
    let mut r = csv::Reader::from_path(path)?;
    let d = domain.dim;
    let expected: Vec<String> = mode_header(d).into_iter().chain(["re".into(), "im".into()]).collect();
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != expected {
        return Err(CliError::Usage(format!(
            "{}: expected columns {expected:?}, found {header:?}",
            path.display()
        )));
    }
    let mut f = SpectralField::zeros(*domain, true);
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let bad = |what: &str| CliError::Usage(format!("{}: row {}: bad {what}", path.display(), line + 2));
        let n: Vec<i64> = (0..d)
            .map(|i| rec[i].trim().parse().map_err(|_| bad("mode index")))
            .collect::<CliResult<_>>()?;
        let re: f64 = rec[d].trim().parse().map_err(|_| bad("real part"))?;
        let im: f64 = rec[d + 1].trim().parse().map_err(|_| bad("imaginary part"))?;
        if f.lattice().contains(&n) {
            f.set_coeff(&n, Complex64::new(re, im));
        }
    }
    if !f.is_finite() {
        return Err(CliError::Usage(format!("{}: non-finite coefficient", path.display())));
    }
    if f.hermitian_defect() > 1e-12 {
        return Err(CliError::Usage(format!(
            "{}: coefficients are not Hermitian (defect {:e}), so the field is not real",
            path.display(),
            f.hermitian_defect()
        )));
    }
    Ok(f)
}

/// Values on the `m^d` grid with their velocity coordinates.
pub fn write_grid(path: &Path, domain: &Domain, m: usize, column: &str, values: &[f64]) -> CliResult<()> {
    let mut w = writer(path)?;
    let mut header: Vec<String> = (1..=domain.dim).map(|i| format!("v{i}")).collect();
    header.push(column.to_string());
    w.write_record(&header)?;
    for (p, v) in grid_points(domain, m).iter().zip(values) {
        let mut row: Vec<String> = p.iter().map(|x| num(*x)).collect();
        row.push(num(*v));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_rows(path: &Path, header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
    let mut w = writer(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    serde_json::to_writer_pretty(BufWriter::new(File::create(path)?), value)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coefficients_round_trip_exactly() {
        let domain = Domain::new(2, 3.0, 1.0, 3).unwrap();
        let mut f = SpectralField::constant(domain, 0.1 / 3.0);
        f.set_coeff(&[1, -2], Complex64::new(0.1, 1.0 / 7.0));
        f.set_coeff(&[-1, 2], Complex64::new(0.1, -1.0 / 7.0));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        write_coefficients(&path, &f).unwrap();
        let back = read_coefficients(&path, &domain).unwrap();
        assert_eq!(back.coeffs, f.coeffs);
        let small = read_coefficients(&path, &domain.with_modes(1)).unwrap();
        assert_eq!(small.coeff(&[0, 0]), f.coeff(&[0, 0]));
    }

    #[test]
    fn rejects_non_hermitian_table() {
        let domain = Domain::new(2, 3.0, 1.0, 1).unwrap();
        let mut f = SpectralField::zeros(domain, false);
        f.set_coeff(&[1, 0], Complex64::new(1.0, 0.0));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        write_coefficients(&path, &f).unwrap();
        assert!(read_coefficients(&path, &domain).is_err());
    }

    #[test]
    fn seventeen_digits() {
        let x = 0.1 + 0.2;
        assert_eq!(num(x).parse::<f64>().unwrap(), x);
    }
}
