//! Closed-form approximate impulse response and the frequency response
//! functions, exact and approximate, in terms of `g = ω/ω_n`.

use num_complex::Complex64;

use crate::equiv::{omega_d_eq, zeta_eq};
use crate::error::{Error, Result};
use crate::model::{validate_params, OscillatorParams, Quantity, TimeGrid, TimeSeries};

/// `Ĩ(t) = e^{−ζ_eq ω_n t} sin(ω_{d,eq} t)/ω_{d,eq}`.
pub fn impulse_approx(p: &OscillatorParams, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::domain("t", "must be >= 0", t));
    }
    let wd = omega_d_eq(p)?;
    Ok((-zeta_eq(p) * p.omega_n * t).exp() * (wd * t).sin() / wd)
}

pub fn impulse_approx_on_grid(p: &OscillatorParams, grid: &TimeGrid) -> Result<TimeSeries> {
    validate_params(*p)?;
    let wd = omega_d_eq(p)?;
    let decay = zeta_eq(p) * p.omega_n;
    Ok(TimeSeries::from_fn(*grid, Quantity::Impulse, |t| {
        (-decay * t).exp() * (wd * t).sin() / wd
    }))
}

fn check_g(g: f64) -> Result<()> {
    if !(g >= 0.0 && g.is_finite()) {
        return Err(Error::domain("g", "must be finite and >= 0", g));
    }
    Ok(())
}

fn invert(d: Complex64) -> Complex64 {
    if d == Complex64::new(0.0, 0.0) {
        Complex64::new(f64::INFINITY, 0.0)
    } else {
        d.inv()
    }
}

/// `h(g) = 1/(1 − g² + 2ζ(ig)^β)`, principal branch. At `g = 0` this is 1
/// for `β > 0` and `1/(1+2ζ)` for `β = 0`. An undamped resonance returns an
/// infinite value.
pub fn frf_exact(p: &OscillatorParams, g: f64) -> Result<Complex64> {
    validate_params(*p)?;
    check_g(g)?;
    let ig_beta = if p.beta == 0.0 {
        Complex64::new(1.0, 0.0)
    } else if g == 0.0 {
        Complex64::new(0.0, 0.0)
    } else {
        Complex64::from_polar(g.powf(p.beta), p.beta * std::f64::consts::FRAC_PI_2)
    };
    Ok(invert(Complex64::new(1.0 - g * g, 0.0) + 2.0 * p.zeta * ig_beta))
}

/// `h̃(g) = 1/((ω_{d,eq}/ω_n)² + (ζ_eq + ig)²)`.
pub fn frf_approx(p: &OscillatorParams, g: f64) -> Result<Complex64> {
    validate_params(*p)?;
    check_g(g)?;
    let w = omega_d_eq(p)? / p.omega_n;
    let z = Complex64::new(zeta_eq(p), g);
    Ok(invert(w * w + z * z))
}

/// Frequency at which `|h̃|` peaks, `√(w² − ζ_eq²)`.
pub fn frf_approx_peak(p: &OscillatorParams) -> Result<f64> {
    let w = omega_d_eq(p)? / p.omega_n;
    let z = zeta_eq(p);
    Ok((w * w - z * z).max(0.0).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrfKind {
    Exact,
    Approx,
}

/// Location of a real pole when the relevant damping vanishes.
fn pole(p: &OscillatorParams, which: FrfKind) -> Result<Option<f64>> {
    Ok(match which {
        FrfKind::Exact if p.beta == 0.0 => Some((1.0 + 2.0 * p.zeta).sqrt()),
        FrfKind::Exact if p.zeta == 0.0 => Some(1.0),
        FrfKind::Approx if zeta_eq(p) == 0.0 => Some(omega_d_eq(p)? / p.omega_n),
        _ => None,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrfCurve {
    pub g: Vec<f64>,
    pub mag: Vec<f64>,
    pub phase: Vec<f64>,
    /// False where a pole lies within half a grid step of the sample.
    pub valid: Vec<bool>,
}

impl FrfCurve {
    /// `(g, |h|)` of the largest valid magnitude.
    pub fn peak(&self) -> Option<(f64, f64)> {
        self.g
            .iter()
            .zip(&self.mag)
            .zip(&self.valid)
            .filter(|(_, &ok)| ok)
            .map(|((&g, &m), _)| (g, m))
            .fold(None, |best, (g, m)| match best {
                Some((_, bm)) if bm >= m => best,
                _ => Some((g, m)),
            })
    }
}

/// Samples `|h|` and `arg h` on `n` uniform points of `[0, g_max]`.
pub fn frf_curve(p: &OscillatorParams, which: FrfKind, g_max: f64, n: usize) -> Result<FrfCurve> {
    if !(g_max > 0.0 && g_max.is_finite()) {
        return Err(Error::domain("g_max", "must be > 0", g_max));
    }
    if n < 2 {
        return Err(Error::domain("n", "must be >= 2", n as f64));
    }
    let step = g_max / (n - 1) as f64;
    let pole = pole(p, which)?;
    let mut curve = FrfCurve {
        g: Vec::with_capacity(n),
        mag: Vec::with_capacity(n),
        phase: Vec::with_capacity(n),
        valid: Vec::with_capacity(n),
    };
    for i in 0..n {
        let g = i as f64 * step;
        let h = match which {
            FrfKind::Exact => frf_exact(p, g)?,
            FrfKind::Approx => frf_approx(p, g)?,
        };
        let near_pole = pole.is_some_and(|gp| (g - gp).abs() < 0.5 * step);
        curve.g.push(g);
        curve.mag.push(h.norm());
        curve.phase.push(h.arg());
        curve.valid.push(!near_pole && h.norm().is_finite());
    }
    Ok(curve)
}

/// `max_g ||h| − |h̃|| / max_g |h|` over samples valid in both curves.
pub fn relative_magnitude_gap(exact: &FrfCurve, approx: &FrfCurve) -> f64 {
    let mut gap = 0.0f64;
    let mut peak = 0.0f64;
    for i in 0..exact.g.len().min(approx.g.len()) {
        if exact.valid[i] && approx.valid[i] {
            gap = gap.max((exact.mag[i] - approx.mag[i]).abs());
            peak = peak.max(exact.mag[i]);
        }
    }
    gap / peak
}
