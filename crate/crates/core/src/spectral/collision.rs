//! Direct-sum evaluation of the Galerkin collision operator,
//! `Q(g, f)_n = sum_{l + m = n} G(l, m) f_l g_m`.
//!
//! `m` carries the partner density `g` (the `v_*` argument) and `l` the
//! density at `v`. Pairs whose sum leaves the box are dropped.

use num_complex::Complex64;
use rayon::prelude::*;

use super::field::SpectralField;
use super::lattice::Lattice;
use super::weights::WeightTable;
use crate::error::{Error, Result};

/// Maximal runs of `m` indices, contiguous in storage, with `l + m` inside
/// the box. Each run is `(first m index, length)`.
fn runs_for(lat: &Lattice, l: &[i64]) -> Vec<(usize, usize)> {
    let n = lat.modes as i64;
    let side = lat.side();
    let d = lat.dim;
    let bounds: Vec<(i64, i64)> = l.iter().map(|&c| ((-n).max(-n - c), n.min(n - c))).collect();
    let (lo_last, hi_last) = bounds[d - 1];
    let run_len = (hi_last - lo_last + 1) as usize;
    let mut runs = Vec::new();
    let mut outer: Vec<i64> = bounds[..d - 1].iter().map(|b| b.0).collect();
    loop {
        let mut idx = 0usize;
        for &c in &outer {
            idx = idx * side + (c + n) as usize;
        }
        idx = idx * side + (lo_last + n) as usize;
        runs.push((idx, run_len));
        // odometer over the outer axes
        let mut axis = d - 1;
        loop {
            if axis == 0 {
                return runs;
            }
            axis -= 1;
            if outer[axis] < bounds[axis].1 {
                outer[axis] += 1;
                break;
            }
            outer[axis] = bounds[axis].0;
        }
    }
}

fn check(table: &WeightTable, fields: &[&SpectralField]) -> Result<()> {
    for f in fields {
        if f.domain != table.domain {
            return Err(Error::Usage(format!(
                "field domain {:?} does not match weight table domain {:?}",
                f.domain, table.domain
            )));
        }
    }
    Ok(())
}

/// Accumulate `sum_l sum_m G(l, m) pair(l, m)` row by row. Rows are split
/// into fixed chunks whose partial sums are added in chunk order, so the
/// result does not depend on the thread schedule.
fn accumulate<F>(table: &WeightTable, row_kernel: F) -> Vec<Complex64>
where
    F: Fn(usize, &[Complex64], usize, usize, &mut [Complex64]) + Sync,
{
    let lat = table.lattice();
    let p = lat.len();
    let z0 = lat.zero_index();
    let chunk = lat.side().pow(lat.dim as u32 - 1);
    let partials: Vec<Vec<Complex64>> = (0..p)
        .collect::<Vec<_>>()
        .par_chunks(chunk)
        .map(|rows| {
            let mut out = vec![Complex64::new(0.0, 0.0); p];
            for &i in rows {
                let l = lat.multi_index(i);
                let row = &table.entries[i * p..(i + 1) * p];
                for (j0, len) in runs_for(&lat, &l) {
                    // index(l + m) = index(l) + index(m) - index(0)
                    let o0 = i + j0 - z0;
                    row_kernel(i, &row[j0..j0 + len], j0, len, &mut out[o0..o0 + len]);
                }
            }
            out
        })
        .collect();
    let mut total = vec![Complex64::new(0.0, 0.0); p];
    for part in &partials {
        for (t, v) in total.iter_mut().zip(part) {
            *t += v;
        }
    }
    total
}

/// `scale * Q(g, f)`.
pub fn bilinear_rhs(
    table: &WeightTable,
    g: &SpectralField,
    f: &SpectralField,
    scale: f64,
) -> Result<SpectralField> {
    check(table, &[g, f])?;
    let gc = &g.coeffs;
    let fc = &f.coeffs;
    let mut out = accumulate(table, |i, row, j0, len, dst| {
        let fl = fc[i];
        for ((d, w), gm) in dst.iter_mut().zip(row).zip(&gc[j0..j0 + len]) {
            *d += w * gm * fl;
        }
    });
    if scale != 1.0 {
        out.iter_mut().for_each(|c| *c *= scale);
    }
    Ok(SpectralField {
        domain: table.domain,
        coeffs: out,
        real_valued: f.real_valued && g.real_valued,
    })
}

/// `scale * (Q(a, b) + Q(b, a))` in one sweep.
pub fn symmetric_bilinear_rhs(
    table: &WeightTable,
    a: &SpectralField,
    b: &SpectralField,
    scale: f64,
) -> Result<SpectralField> {
    check(table, &[a, b])?;
    let ac = &a.coeffs;
    let bc = &b.coeffs;
    let mut out = accumulate(table, |i, row, j0, len, dst| {
        let (al, bl) = (ac[i], bc[i]);
        for (((d, w), am), bm) in dst
            .iter_mut()
            .zip(row)
            .zip(&ac[j0..j0 + len])
            .zip(&bc[j0..j0 + len])
        {
            *d += w * (bl * am + al * bm);
        }
    });
    if scale != 1.0 {
        out.iter_mut().for_each(|c| *c *= scale);
    }
    Ok(SpectralField {
        domain: table.domain,
        coeffs: out,
        real_valued: a.real_valued && b.real_valued,
    })
}

/// `Q(f, f)` on the lattice.
pub fn collision_rhs(table: &WeightTable, f: &SpectralField) -> Result<SpectralField> {
    bilinear_rhs(table, f, f, 1.0)
}
