//! Oscillator parameters and uniformly sampled signals.
//!
//! The oscillator is `ẍ + 2ζω_n^{2−β} D^β x + ω_n² x = h(t)` with the Caputo
//! derivative `D^β`. Everything downstream is parameterised by the triple
//! `(ω_n, ζ, β)` held in [`OscillatorParams`].

use crate::error::{Error, Result};

/// Lower edge of the damping range the equivalent-parameter fits were
/// calibrated on.
pub const ZETA_CALIBRATED_MIN: f64 = 0.001;
/// Upper edge of the calibrated damping range.
pub const ZETA_CALIBRATED_MAX: f64 = 0.15;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillatorParams {
    /// Natural frequency, rad/s.
    pub omega_n: f64,
    /// Damping ratio.
    pub zeta: f64,
    /// Fractional order of the damping derivative.
    pub beta: f64,
}

impl OscillatorParams {
    /// Builds a validated parameter set.
    pub fn new(omega_n: f64, zeta: f64, beta: f64) -> Result<Self> {
        validate_params(OscillatorParams {
            omega_n,
            zeta,
            beta,
        })
    }

    /// `2ζω_n^{2−β}`, the coefficient in front of `D^β x`.
    pub fn damping_coefficient(&self) -> f64 {
        2.0 * self.zeta * self.omega_n.powf(2.0 - self.beta)
    }

    /// True when ζ lies outside the range the closed-form constants were
    /// fitted on. Such runs are allowed but flagged.
    pub fn extended_range(&self) -> bool {
        !(ZETA_CALIBRATED_MIN..=ZETA_CALIBRATED_MAX).contains(&self.zeta)
    }

    pub fn with_beta(self, beta: f64) -> Self {
        OscillatorParams { beta, ..self }
    }

    pub fn with_omega_n(self, omega_n: f64) -> Self {
        OscillatorParams { omega_n, ..self }
    }
}

/// Checks every field invariant and returns the parameters unchanged.
pub fn validate_params(p: OscillatorParams) -> Result<OscillatorParams> {
    if !p.omega_n.is_finite() {
        return Err(Error::domain("omega_n", "must be finite", p.omega_n));
    }
    if p.omega_n <= 0.0 {
        return Err(Error::domain("omega_n", "must be > 0", p.omega_n));
    }
    if !p.zeta.is_finite() {
        return Err(Error::domain("zeta", "must be finite", p.zeta));
    }
    if !(0.0..=1.0).contains(&p.zeta) {
        return Err(Error::domain("zeta", "must lie in [0, 1]", p.zeta));
    }
    if !p.beta.is_finite() {
        return Err(Error::domain("beta", "must be finite", p.beta));
    }
    if !(0.0..=1.0).contains(&p.beta) {
        return Err(Error::domain("beta", "must lie in [0, 1]", p.beta));
    }
    Ok(p)
}

/// Uniform time grid `t_i = t0 + i·dt`, `i = 0..n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t0: f64,
    dt: f64,
    n: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, dt: f64, n: usize) -> Result<Self> {
        if !t0.is_finite() {
            return Err(Error::domain("t0", "must be finite", t0));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::domain("dt", "must be > 0", dt));
        }
        if n < 2 {
            return Err(Error::domain("n", "must be >= 2", n as f64));
        }
        Ok(TimeGrid { t0, dt, n })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Sample time `i`, computed by multiplication so it never drifts.
    #[inline]
    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.n - 1)
    }

    pub fn times(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.n).map(move |i| self.time(i))
    }

    /// Same span, `factor` times more steps. Sample `i` of `self` is sample
    /// `i·factor` of the result.
    pub fn refined(&self, factor: usize) -> TimeGrid {
        let factor = factor.max(1);
        TimeGrid {
            t0: self.t0,
            dt: self.dt / factor as f64,
            n: (self.n - 1) * factor + 1,
        }
    }
}

/// `n` samples on `[0, t_end]`.
pub fn linspace_grid(t_end: f64, n: usize) -> Result<TimeGrid> {
    if !(t_end.is_finite() && t_end > 0.0) {
        return Err(Error::domain("t_end", "must be > 0", t_end));
    }
    if n < 2 {
        return Err(Error::domain("n", "must be >= 2", n as f64));
    }
    TimeGrid::new(0.0, t_end / (n - 1) as f64, n)
}

/// What a [`TimeSeries`] holds. Units are labels only.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    /// Displacement, m.
    Displacement,
    /// Impulse response, m per unit initial velocity (numerically seconds).
    Impulse,
    /// Base excitation, m/s².
    Excitation,
}

impl Quantity {
    pub fn unit(&self) -> &'static str {
        match self {
            Quantity::Displacement => "m",
            Quantity::Impulse => "s",
            Quantity::Excitation => "m/s^2",
        }
    }
}

/// Samples of a signal on a [`TimeGrid`] plus a validity mask. Masked
/// samples are ignored by every norm.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    grid: TimeGrid,
    values: Vec<f64>,
    valid: Vec<bool>,
    quantity: Quantity,
}

impl TimeSeries {
    pub fn new(grid: TimeGrid, values: Vec<f64>, quantity: Quantity) -> Result<Self> {
        let valid = vec![true; values.len()];
        Self::with_mask(grid, values, valid, quantity)
    }

    pub fn with_mask(
        grid: TimeGrid,
        values: Vec<f64>,
        valid: Vec<bool>,
        quantity: Quantity,
    ) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::domain(
                "values",
                "length must equal the grid length",
                values.len() as f64,
            ));
        }
        if valid.len() != grid.len() {
            return Err(Error::domain(
                "valid",
                "mask length must equal the grid length",
                valid.len() as f64,
            ));
        }
        Ok(TimeSeries {
            grid,
            values,
            valid,
            quantity,
        })
    }

    /// Samples `f` on every grid point.
    pub fn from_fn(grid: TimeGrid, quantity: Quantity, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.times().map(f).collect();
        TimeSeries {
            grid,
            values,
            valid: vec![true; grid.len()],
            quantity,
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mask(&self) -> &[bool] {
        &self.valid
    }

    pub fn quantity(&self) -> Quantity {
        self.quantity
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_valid(&self, i: usize) -> bool {
        self.valid[i]
    }

    pub fn all_valid(&self) -> bool {
        self.valid.iter().all(|&v| v)
    }

    /// Time of the first masked sample, if any.
    pub fn first_invalid_time(&self) -> Option<f64> {
        self.valid
            .iter()
            .position(|&v| !v)
            .map(|i| self.grid.time(i))
    }

    /// Iterates `(t, x)` over valid samples.
    pub fn valid_samples(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values
            .iter()
            .zip(&self.valid)
            .enumerate()
            .filter(|(_, (_, &ok))| ok)
            .map(move |(i, (&x, _))| (self.grid.time(i), x))
    }

    /// Largest `|x|` over valid samples (0 if none).
    pub fn max_abs(&self) -> f64 {
        self.valid_samples().fold(0.0, |m, (_, x)| m.max(x.abs()))
    }

    /// Pointwise `self − other` on a shared grid, masked where either is.
    pub fn difference(&self, other: &TimeSeries) -> Result<TimeSeries> {
        if self.grid != other.grid {
            return Err(Error::domain(
                "grid",
                "series must share a grid",
                other.grid.len() as f64,
            ));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        let valid = self
            .valid
            .iter()
            .zip(&other.valid)
            .map(|(&a, &b)| a && b)
            .collect();
        Ok(TimeSeries {
            grid: self.grid,
            values,
            valid,
            quantity: self.quantity,
        })
    }

    /// Copy with every sample at or after `t` masked.
    pub fn masked_from(&self, t: f64) -> TimeSeries {
        let mut out = self.clone();
        for (i, v) in out.valid.iter_mut().enumerate() {
            if self.grid.time(i) >= t {
                *v = false;
            }
        }
        out
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}
