//! CSV output. Floats carry 17 significant digits so every value round-trips
//! exactly; lines end in LF.

use std::io::{self, Write};

use crate::approx::FrfCurve;
use crate::equiv::RegressionFit;
use crate::response::ComparisonReport;
use crate::model::TimeSeries;

/// `v` with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".to_string()
    } else if v > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

fn flag(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

/// `t,x,valid`
pub fn write_series<W: Write>(mut out: W, x: &TimeSeries) -> io::Result<()> {
    writeln!(out, "t,x,valid")?;
    for (i, &v) in x.values().iter().enumerate() {
        writeln!(out, "{},{},{}", fmt_f64(x.grid().time(i)), fmt_f64(v), flag(x.is_valid(i)))?;
    }
    Ok(())
}

/// `t,x` with masked samples omitted.
pub fn write_solution<W: Write>(mut out: W, x: &TimeSeries) -> io::Result<()> {
    writeln!(out, "t,x")?;
    for (t, v) in x.valid_samples() {
        writeln!(out, "{},{}", fmt_f64(t), fmt_f64(v))?;
    }
    Ok(())
}

/// `t,series,approx,fdm,residual,valid`, where `residual` is
/// `series − approx` and `valid` refers to the series. Masked series rows
/// carry `nan` in `series` and `residual`. Without an FDM solution the
/// column is empty.
pub fn write_report<W: Write>(mut out: W, r: &ComparisonReport) -> io::Result<()> {
    writeln!(out, "t,series,approx,fdm,residual,valid")?;
    for i in 0..r.series.len() {
        let s = if r.series.is_valid(i) { r.series.values()[i] } else { f64::NAN };
        let a = r.approx.values()[i];
        let f = r.fdm.as_ref().map(|f| fmt_f64(f.values()[i])).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{}",
            fmt_f64(r.series.grid().time(i)),
            fmt_f64(s),
            fmt_f64(a),
            f,
            fmt_f64(s - a),
            flag(r.series.is_valid(i))
        )?;
    }
    Ok(())
}

/// `g,mag,phase`
pub fn write_frf<W: Write>(mut out: W, c: &FrfCurve) -> io::Result<()> {
    writeln!(out, "g,mag,phase")?;
    for i in 0..c.g.len() {
        writeln!(out, "{},{},{}", fmt_f64(c.g[i]), fmt_f64(c.mag[i]), fmt_f64(c.phase[i]))?;
    }
    Ok(())
}

/// `g,mag_exact,mag_approx` for two curves on the same frequency grid.
pub fn write_frf_pair<W: Write>(mut out: W, exact: &FrfCurve, approx: &FrfCurve) -> io::Result<()> {
    writeln!(out, "g,mag_exact,mag_approx")?;
    for i in 0..exact.g.len() {
        writeln!(
            out,
            "{},{},{}",
            fmt_f64(exact.g[i]),
            fmt_f64(exact.mag[i]),
            fmt_f64(approx.mag[i])
        )?;
    }
    Ok(())
}

/// `a0,a1,a0_lo,a0_hi,a1_lo,a1_hi,rmse,n`
pub fn write_fit<W: Write>(mut out: W, f: &RegressionFit) -> io::Result<()> {
    writeln!(out, "a0,a1,a0_lo,a0_hi,a1_lo,a1_hi,rmse,n")?;
    writeln!(
        out,
        "{},{},{},{},{},{},{},{}",
        fmt_f64(f.a0),
        fmt_f64(f.a1),
        fmt_f64(f.ci95_a0.0),
        fmt_f64(f.ci95_a0.1),
        fmt_f64(f.ci95_a1.0),
        fmt_f64(f.ci95_a1.1),
        fmt_f64(f.rmse),
        f.n_samples
    )
}

/// `beta,y`
pub fn write_scatter<W: Write>(mut out: W, points: &[(f64, f64)]) -> io::Result<()> {
    writeln!(out, "beta,y")?;
    for &(b, y) in points {
        writeln!(out, "{},{}", fmt_f64(b), fmt_f64(y))?;
    }
    Ok(())
}
