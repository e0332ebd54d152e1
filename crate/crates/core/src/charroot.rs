//! Roots of the fractional characteristic equation
//! `s² + 2ζω_n^{2−β} s^β + ω_n² = 0`.
//!
//! `s^β` is taken on the principal branch. The physically relevant pair of
//! complex-conjugate roots lies off the negative real axis for `0 ≤ ζ < 1`,
//! and we always report the upper-half-plane member. The magnitude of its
//! imaginary part is the damped frequency `ω_d`.

use num_complex::Complex64;

use crate::equiv;
use crate::error::{Error, Result};
use crate::model::{validate_params, OscillatorParams};

const MAX_ITERATIONS: usize = 200;
const MAX_HALVINGS: usize = 30;
/// Required `|f(s)| / ω_n²` at convergence.
pub const RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharRoot {
    pub re: f64,
    /// Always positive.
    pub im: f64,
    /// `|f(s)|` at the returned root.
    pub residual: f64,
    pub iterations: usize,
}

impl CharRoot {
    pub fn as_complex(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

fn eval(p: &OscillatorParams, s: Complex64) -> Complex64 {
    let c = p.damping_coefficient();
    let s_beta = if p.beta == 0.0 {
        Complex64::new(1.0, 0.0)
    } else if p.beta == 1.0 {
        s
    } else {
        s.powf(p.beta)
    };
    s * s + c * s_beta + p.omega_n * p.omega_n
}

fn derivative(p: &OscillatorParams, s: Complex64) -> Complex64 {
    let c = p.damping_coefficient();
    let tail = if p.beta == 0.0 {
        Complex64::new(0.0, 0.0)
    } else if p.beta == 1.0 {
        Complex64::new(c, 0.0)
    } else {
        c * p.beta * s.powf(p.beta - 1.0)
    };
    2.0 * s + tail
}

/// Value of the characteristic function at `s` (principal branch of `s^β`).
pub fn char_residual(p: &OscillatorParams, s: Complex64) -> Result<Complex64> {
    validate_params(*p)?;
    if s == Complex64::new(0.0, 0.0) && p.beta > 0.0 && p.beta < 1.0 {
        return Err(Error::domain(
            "s",
            "must be nonzero: s^beta has a branch point at the origin",
            0.0,
        ));
    }
    Ok(eval(p, s))
}

/// Upper-half-plane root by damped Newton iteration.
///
/// The limiting orders `β ∈ {0, 1}` return their closed-form roots. Otherwise
/// the iteration starts from `−ζ_eq ω_n + i ω_{d,eq}` and halves the step
/// until the residual decreases.
pub fn solve_char_root(p: &OscillatorParams) -> Result<CharRoot> {
    validate_params(*p)?;
    if p.zeta >= 1.0 {
        return Err(Error::domain("zeta", "must be < 1 for root finding", p.zeta));
    }
    let wn = p.omega_n;
    if p.beta == 1.0 || p.beta == 0.0 {
        let s = if p.beta == 1.0 {
            Complex64::new(-p.zeta * wn, wn * (1.0 - p.zeta * p.zeta).sqrt())
        } else {
            Complex64::new(0.0, wn * (1.0 + 2.0 * p.zeta).sqrt())
        };
        return Ok(CharRoot {
            re: s.re,
            im: s.im,
            residual: eval(p, s).norm(),
            iterations: 0,
        });
    }

    let tol = RESIDUAL_TOL * wn * wn;
    let mut s = Complex64::new(-equiv::zeta_eq(p) * wn, equiv::omega_d_eq(p)?);
    let mut f = eval(p, s);
    let mut res = f.norm();
    for it in 1..=MAX_ITERATIONS {
        let step = -f / derivative(p, s);
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let trial = s + lambda * step;
            let ft = eval(p, trial);
            if ft.norm() < res {
                accepted = Some((trial, ft));
                break;
            }
            lambda *= 0.5;
        }
        let Some((trial, ft)) = accepted else {
            // No decrease possible: we are at the rounding floor.
            break;
        };
        let moved = (trial - s).norm();
        s = trial;
        f = ft;
        res = f.norm();
        if res <= tol && moved <= 4.0 * f64::EPSILON * s.norm() {
            return finish(s, res, it, tol);
        }
    }
    finish(s, res, MAX_ITERATIONS, tol)
}

fn finish(s: Complex64, residual: f64, iterations: usize, tol: f64) -> Result<CharRoot> {
    if residual > tol || !s.im.is_finite() || s.im == 0.0 {
        return Err(Error::NoConvergence {
            solver: "characteristic root",
            iterations,
            residual,
            last_re: s.re,
            last_im: s.im,
        });
    }
    let s = if s.im < 0.0 { s.conj() } else { s };
    Ok(CharRoot {
        re: s.re,
        im: s.im,
        residual,
        iterations,
    })
}

/// Damped frequency `|Im s|` of the characteristic root.
pub fn omega_d(p: &OscillatorParams) -> Result<f64> {
    Ok(solve_char_root(p)?.im.abs())
}
