//! Equivalent viscous parameters of the fractional oscillator.
//!
//! The closed forms
//!
//! ```text
//! ω_{d,eq} = ω_n √(1 + 2ζ − ζ(2+ζ) Y_β),   Y_β = β^{2.24 − 0.63β}
//! ζ_eq     = ζ β^{0.95 − 0.85β}
//! ```
//!
//! interpolate between the undamped-like `β = 0` and viscous `β = 1` limits.
//! This module also holds the estimators the constants are fitted from:
//! `Y_β` from the characteristic root, and ζ from the logarithmic decrement
//! of the impulse response.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};
use std::f64::consts::{PI, TAU};

use crate::charroot;
use crate::error::{Error, Result};
use crate::fdm;
use crate::ml_series::{self, SeriesOptions};
use crate::model::{validate_params, OscillatorParams, TimeGrid, TimeSeries, ZETA_CALIBRATED_MAX, ZETA_CALIBRATED_MIN};

/// Exponent constants `(A0, A1)` of `Y_β`.
pub const Y_BETA_CONSTANTS: (f64, f64) = (2.24, 0.63);
/// Exponent constants `(A0, A1)` of `ζ_eq / ζ`.
pub const ZETA_EQ_CONSTANTS: (f64, f64) = (0.95, 0.85);
/// Default seed for calibration-box sampling.
pub const DEFAULT_SEED: u64 = 20_240_001;
/// Smallest sample count a fit is reported for.
pub const MIN_FIT_SAMPLES: usize = 100;
/// Samples per period of `ω_{d,eq}` when extracting peaks.
pub const SAMPLES_PER_PERIOD: usize = 64;

/// `β^{a0 − a1 β}`, with `0^x = 0`.
pub fn y_beta_model(beta: f64, a0: f64, a1: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::domain("beta", "must lie in [0, 1]", beta));
    }
    if !(a0 > 0.0 && a0 - a1 > 0.0) {
        return Err(Error::domain(
            "a0 - a1*beta",
            "must stay positive on [0, 1]",
            a0.min(a0 - a1),
        ));
    }
    Ok(if beta == 0.0 {
        0.0
    } else {
        beta.powf(a0 - a1 * beta)
    })
}

fn power(beta: f64, (a0, a1): (f64, f64)) -> f64 {
    if beta == 0.0 {
        0.0
    } else {
        beta.powf(a0 - a1 * beta)
    }
}

/// Closed-form equivalent damped frequency.
pub fn omega_d_eq(p: &OscillatorParams) -> Result<f64> {
    let z = p.zeta;
    let radicand = 1.0 + 2.0 * z - z * (2.0 + z) * power(p.beta, Y_BETA_CONSTANTS);
    if !(radicand > 0.0) {
        return Err(Error::domain("omega_d_eq radicand", "must be > 0", radicand));
    }
    Ok(p.omega_n * radicand.sqrt())
}

/// Closed-form equivalent damping ratio.
pub fn zeta_eq(p: &OscillatorParams) -> f64 {
    p.zeta * power(p.beta, ZETA_EQ_CONSTANTS)
}

/// `Y_β = (M_0 − M_β)/(M_0 − M_1)` with `M_β = (ω_d/ω_n)²` from the
/// characteristic root.
pub fn y_beta_from_root(p: &OscillatorParams) -> Result<f64> {
    validate_params(*p)?;
    if p.zeta <= 0.0 {
        return Err(Error::domain("zeta", "must be > 0 for Y_beta", p.zeta));
    }
    let m_beta = (charroot::omega_d(p)? / p.omega_n).powi(2);
    let m0 = 1.0 + 2.0 * p.zeta;
    Ok((m0 - m_beta) / (p.zeta * (2.0 + p.zeta)))
}

/// Positive local maxima of a signal.
#[derive(Debug, Clone, PartialEq)]
pub struct PeakList {
    pub times: Vec<f64>,
    pub amplitudes: Vec<f64>,
}

impl PeakList {
    pub fn count(&self) -> usize {
        self.times.len()
    }
}

/// Locates up to `j_max` positive peaks in the valid part of `x`.
///
/// A peak is a sample greater than its left neighbour and not less than its
/// right one. Its time and height are refined by the parabola through the
/// three samples.
pub fn find_positive_peaks(x: &TimeSeries, j_max: usize) -> Result<PeakList> {
    if j_max < 2 {
        return Err(Error::domain("j_max", "must be >= 2", j_max as f64));
    }
    let v = x.values();
    let dt = x.grid().dt();
    let mut peaks = PeakList {
        times: Vec::new(),
        amplitudes: Vec::new(),
    };
    for i in 1..v.len().saturating_sub(1) {
        if peaks.count() == j_max {
            break;
        }
        if !(x.is_valid(i - 1) && x.is_valid(i) && x.is_valid(i + 1)) {
            continue;
        }
        let (a, b, c) = (v[i - 1], v[i], v[i + 1]);
        if !(b > a && b >= c && b > 0.0) {
            continue;
        }
        let curv = a - 2.0 * b + c;
        let offset = if curv < 0.0 { 0.5 * (a - c) / curv } else { 0.0 };
        peaks.times.push(x.grid().time(i) + offset * dt);
        peaks.amplitudes.push(b - 0.25 * (a - c) * offset);
    }
    if peaks.count() < 2 {
        return Err(Error::InsufficientPeaks {
            found: peaks.count(),
            needed: 2,
        });
    }
    Ok(peaks)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecrementEstimate {
    /// `δ = ln(x_1/x_j)/(j−1)`.
    pub delta: f64,
    /// `δ/√(δ² + 4π²)`.
    pub zeta: f64,
    /// False when `x_j ≥ x_1`; the estimate is still returned.
    pub decaying: bool,
}

/// Damping ratio from the decay between the first and `j`-th peaks.
pub fn log_decrement_zeta(peaks: &PeakList, j: usize) -> Result<DecrementEstimate> {
    if j < 2 {
        return Err(Error::domain("j", "must be >= 2", j as f64));
    }
    if peaks.count() < j {
        return Err(Error::InsufficientPeaks {
            found: peaks.count(),
            needed: j,
        });
    }
    let delta = (peaks.amplitudes[0] / peaks.amplitudes[j - 1]).ln() / (j - 1) as f64;
    Ok(DecrementEstimate {
        delta,
        zeta: delta / (delta * delta + 4.0 * PI * PI).sqrt(),
        decaying: delta > 0.0,
    })
}

/// Impulse response over `periods` periods of `ω_{d,eq}`, from the stable
/// series where it is valid and from the GL march otherwise.
pub fn decrement_signal(p: &OscillatorParams, periods: f64) -> Result<TimeSeries> {
    let period = TAU / omega_d_eq(p)?;
    let n = (periods * SAMPLES_PER_PERIOD as f64).ceil() as usize + 1;
    let grid = TimeGrid::new(0.0, period / SAMPLES_PER_PERIOD as f64, n)?;
    let series = ml_series::impulse_series_on_grid(p, &grid, &SeriesOptions::default(), true)?;
    if series.all_valid() {
        return Ok(series);
    }
    let factor = (grid.dt() * p.omega_n / 1e-3).ceil() as usize;
    let fine = grid.refined(factor.max(1));
    let x = fdm::impulse_fdm(p, &fine)?;
    let coarse: Vec<f64> = (0..n).map(|i| x.values()[i * factor.max(1)]).collect();
    TimeSeries::new(grid, coarse, crate::model::Quantity::Impulse)
}

/// `ζ_est/ζ` from the first `j` positive peaks of the impulse response.
pub fn decrement_ratio(p: &OscillatorParams, j: usize) -> Result<f64> {
    if p.zeta <= 0.0 {
        return Err(Error::domain("zeta", "must be > 0 for a damping ratio", p.zeta));
    }
    let x = decrement_signal(p, j as f64)?;
    let peaks = find_positive_peaks(&x, j.max(2))?;
    Ok(log_decrement_zeta(&peaks, j)?.zeta / p.zeta)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionFit {
    pub a0: f64,
    pub a1: f64,
    pub ci95_a0: (f64, f64),
    pub ci95_a1: (f64, f64),
    pub n_samples: usize,
    pub rmse: f64,
    pub iterations: usize,
}

const LM_MAX_ITERATIONS: usize = 500;
const LM_STEP_TOL: f64 = 1e-10;

struct Normal {
    jtj: [[f64; 2]; 2],
    jtr: [f64; 2],
    sse: f64,
}

fn normal_equations(samples: &[(f64, f64)], a0: f64, a1: f64) -> Normal {
    let mut n = Normal {
        jtj: [[0.0; 2]; 2],
        jtr: [0.0; 2],
        sse: 0.0,
    };
    for &(b, y) in samples {
        let lb = b.ln();
        let m = (lb * (a0 - a1 * b)).exp();
        let r = y - m;
        let j = [m * lb, -m * b * lb];
        for (row, jr) in j.iter().enumerate() {
            n.jtr[row] += jr * r;
            for (col, jc) in j.iter().enumerate() {
                n.jtj[row][col] += jr * jc;
            }
        }
        n.sse += r * r;
    }
    n
}

fn sse(samples: &[(f64, f64)], a0: f64, a1: f64) -> f64 {
    samples
        .iter()
        .map(|&(b, y)| {
            let r = y - b.powf(a0 - a1 * b);
            r * r
        })
        .sum()
}

fn solve2(m: [[f64; 2]; 2], r: [f64; 2]) -> Option<[f64; 2]> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let scale = m[0][0].abs() * m[1][1].abs();
    if !(det.abs() > 1e-14 * scale) || !det.is_finite() {
        return None;
    }
    Some([
        (r[0] * m[1][1] - r[1] * m[0][1]) / det,
        (m[0][0] * r[1] - m[1][0] * r[0]) / det,
    ])
}

/// Levenberg-Marquardt fit of `y = β^{a0 − a1β}` with 95% confidence
/// intervals from the linearised covariance.
pub fn fit_power_law(samples: &[(f64, f64)], init_a0: f64, init_a1: f64) -> Result<RegressionFit> {
    if samples.len() < MIN_FIT_SAMPLES {
        return Err(Error::domain(
            "samples",
            "need at least 100 points",
            samples.len() as f64,
        ));
    }
    if let Some(&(b, _)) = samples.iter().find(|(b, y)| !(*b > 0.0 && *b < 1.0) || !y.is_finite()) {
        return Err(Error::domain("beta", "samples must lie in (0, 1) with finite y", b));
    }
    let (mut a0, mut a1) = (init_a0, init_a1);
    let mut lambda = 1e-3;
    let mut current = normal_equations(samples, a0, a1);
    let mut converged_at = None;
    for it in 1..=LM_MAX_ITERATIONS {
        let mut damped = current.jtj;
        damped[0][0] *= 1.0 + lambda;
        damped[1][1] *= 1.0 + lambda;
        let step = solve2(damped, current.jtr).ok_or(Error::Singular("power-law fit"))?;
        let size = step[0].hypot(step[1]);
        let small = size <= LM_STEP_TOL * (a0.hypot(a1) + LM_STEP_TOL);
        let (t0, t1) = (a0 + step[0], a1 + step[1]);
        if sse(samples, t0, t1) <= current.sse {
            a0 = t0;
            a1 = t1;
            current = normal_equations(samples, a0, a1);
            lambda = (lambda * 0.1).max(1e-12);
        } else {
            lambda *= 10.0;
        }
        if small {
            converged_at = Some(it);
            break;
        }
    }
    let iterations = converged_at.ok_or(Error::NoConvergence {
        solver: "Levenberg-Marquardt",
        iterations: LM_MAX_ITERATIONS,
        residual: current.sse,
        last_re: a0,
        last_im: a1,
    })?;

    let n = samples.len();
    let dof = (n - 2) as f64;
    let s2 = current.sse / dof;
    let det = current.jtj[0][0] * current.jtj[1][1] - current.jtj[0][1] * current.jtj[1][0];
    if !(det > 0.0) {
        return Err(Error::Singular("power-law covariance"));
    }
    let var0 = s2 * current.jtj[1][1] / det;
    let var1 = s2 * current.jtj[0][0] / det;
    let t = StudentsT::new(0.0, 1.0, dof)
        .map_err(|_| Error::Singular("Student-t quantile"))?
        .inverse_cdf(0.975);
    let h0 = t * var0.sqrt();
    let h1 = t * var1.sqrt();
    Ok(RegressionFit {
        a0,
        a1,
        ci95_a0: (a0 - h0, a0 + h0),
        ci95_a1: (a1 - h1, a1 + h1),
        n_samples: n,
        rmse: (current.sse / n as f64).sqrt(),
        iterations,
    })
}

/// Quantity sampled over the calibration box for a regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitTarget {
    /// `Y_β` from the characteristic root.
    OmegaD,
    /// `ζ_est/ζ` from the decrement of the first two peaks.
    ZetaEq,
}

impl FitTarget {
    /// The published constants, used as reference and for comparison.
    pub fn reference_constants(self) -> (f64, f64) {
        match self {
            FitTarget::OmegaD => Y_BETA_CONSTANTS,
            FitTarget::ZetaEq => ZETA_EQ_CONSTANTS,
        }
    }

    pub fn evaluate(self, p: &OscillatorParams) -> Result<f64> {
        match self {
            FitTarget::OmegaD => y_beta_from_root(p),
            FitTarget::ZetaEq => decrement_ratio(p, 2),
        }
    }
}

/// Parameter set `index` of the calibration-box stream for `seed`:
/// `β ~ U(0,1)`, `ζ ~ U[0.001, 0.15]`, `ω_n ~ U[1, 10]`.
pub fn sample_params(seed: u64, index: u64) -> OscillatorParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let mut beta = 0.0;
    while beta == 0.0 {
        beta = rng.gen::<f64>();
    }
    let zeta = rng.gen_range(ZETA_CALIBRATED_MIN..=ZETA_CALIBRATED_MAX);
    let omega_n = rng.gen_range(1.0..=10.0);
    OscillatorParams {
        omega_n,
        zeta,
        beta,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    /// `(β, y)` for every sample that evaluated.
    pub points: Vec<(f64, f64)>,
    /// Indices whose evaluation failed, with the error.
    pub failures: Vec<(u64, Error)>,
}

impl SampleSet {
    pub fn failure_rate(&self) -> f64 {
        let total = self.points.len() + self.failures.len();
        if total == 0 {
            0.0
        } else {
            self.failures.len() as f64 / total as f64
        }
    }
}

/// Draws `n` calibration-box samples of `target`. Each index has its own
/// RNG stream, so the result does not depend on the thread count.
pub fn draw_samples(target: FitTarget, n: usize, seed: u64) -> SampleSet {
    let results: Vec<(u64, f64, Result<f64>)> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let p = sample_params(seed, i);
            (i, p.beta, target.evaluate(&p))
        })
        .collect();
    let mut set = SampleSet {
        points: Vec::with_capacity(n),
        failures: Vec::new(),
    };
    for (i, beta, r) in results {
        match r {
            Ok(y) if y.is_finite() => set.points.push((beta, y)),
            Ok(y) => set.failures.push((i, Error::domain("sample", "evaluated to a non-finite value", y))),
            Err(e) => set.failures.push((i, e)),
        }
    }
    set
}
