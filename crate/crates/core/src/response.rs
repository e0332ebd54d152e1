//! Forced response by convolution with an impulse kernel, and the canned
//! comparison runs.
//!
//! `x(t) = ∫₀ᵗ h(t−s) I(s) ds` is evaluated with the trapezoid rule on the
//! output grid. The kernel is tabulated once per grid and reused for every
//! output time.

use rayon::prelude::*;
use std::collections::BTreeMap;

use crate::approx;
use crate::error::{Error, Result};
use crate::fdm;
use crate::ml_series::{self, SeriesOptions};
use crate::model::{linspace_grid, OscillatorParams, Quantity, TimeGrid, TimeSeries};

/// Largest `ω_n Δt` used for the FDM reference inside [`run_case`].
pub const FDM_REFERENCE_STEP: f64 = 5e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExcitationKind {
    Cosine,
    Sine,
    Constant,
    Tabulated,
}

impl ExcitationKind {
    pub fn name(self) -> &'static str {
        match self {
            ExcitationKind::Cosine => "cosine",
            ExcitationKind::Sine => "sine",
            ExcitationKind::Constant => "constant",
            ExcitationKind::Tabulated => "tabulated",
        }
    }
}

/// Base excitation `h(t)`, m/s².
#[derive(Debug, Clone, PartialEq)]
pub struct Excitation {
    kind: ExcitationKind,
    amplitude: f64,
    frequency: f64,
    table: Option<TimeSeries>,
}

impl Excitation {
    fn harmonic(kind: ExcitationKind, amplitude: f64, frequency: f64) -> Result<Self> {
        if !amplitude.is_finite() {
            return Err(Error::domain("amplitude", "must be finite", amplitude));
        }
        if !frequency.is_finite() {
            return Err(Error::domain("frequency", "must be finite", frequency));
        }
        Ok(Excitation {
            kind,
            amplitude,
            frequency,
            table: None,
        })
    }

    /// `a cos(ωt)`.
    pub fn cosine(amplitude: f64, frequency: f64) -> Result<Self> {
        Self::harmonic(ExcitationKind::Cosine, amplitude, frequency)
    }

    /// `a sin(ωt)`.
    pub fn sine(amplitude: f64, frequency: f64) -> Result<Self> {
        Self::harmonic(ExcitationKind::Sine, amplitude, frequency)
    }

    pub fn constant(amplitude: f64) -> Result<Self> {
        Self::harmonic(ExcitationKind::Constant, amplitude, 0.0)
    }

    /// Samples of `h`, linearly interpolated between grid points.
    pub fn tabulated(table: TimeSeries) -> Result<Self> {
        if let Some(bad) = table.values().iter().find(|v| !v.is_finite()) {
            return Err(Error::domain("table", "values must be finite", *bad));
        }
        Ok(Excitation {
            kind: ExcitationKind::Tabulated,
            amplitude: 1.0,
            frequency: 0.0,
            table: Some(table),
        })
    }

    pub fn kind(&self) -> ExcitationKind {
        self.kind
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn frequency(&self) -> f64 {
        self.frequency
    }

    /// Time span a tabulated excitation covers.
    pub fn covers(&self, t_end: f64) -> bool {
        match &self.table {
            Some(tab) => tab.grid().t0() <= 0.0 && tab.grid().t_end() >= t_end * (1.0 - 1e-12),
            None => true,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self.kind {
            ExcitationKind::Cosine => self.amplitude * (self.frequency * t).cos(),
            ExcitationKind::Sine => self.amplitude * (self.frequency * t).sin(),
            ExcitationKind::Constant => self.amplitude,
            ExcitationKind::Tabulated => {
                let tab = self.table.as_ref().expect("tabulated excitation has a table");
                let g = tab.grid();
                let v = tab.values();
                let u = ((t - g.t0()) / g.dt()).clamp(0.0, (v.len() - 1) as f64);
                let i = (u.floor() as usize).min(v.len() - 2);
                let f = u - i as f64;
                v[i] + f * (v[i + 1] - v[i])
            }
        }
    }
}

/// Impulse response used as the convolution kernel.
#[derive(Debug, Clone, PartialEq)]
pub enum Kernel {
    Series(OscillatorParams, SeriesOptions),
    Approx(OscillatorParams),
    /// Kernel samples on the output grid.
    Tabulated(TimeSeries),
}

impl Kernel {
    fn tabulate(&self, grid: &TimeGrid) -> Result<TimeSeries> {
        match self {
            Kernel::Series(p, opts) => ml_series::impulse_series_on_grid(p, grid, opts, true),
            Kernel::Approx(p) => approx::impulse_approx_on_grid(p, grid),
            Kernel::Tabulated(tab) => {
                if tab.grid().dt() != grid.dt() || tab.grid().t0() != 0.0 || tab.len() < grid.len() {
                    return Err(Error::domain(
                        "kernel",
                        "table must start at 0 with the output step and cover the horizon",
                        tab.len() as f64,
                    ));
                }
                let n = grid.len();
                TimeSeries::with_mask(
                    *grid,
                    tab.values()[..n].to_vec(),
                    tab.mask()[..n].to_vec(),
                    Quantity::Impulse,
                )
            }
        }
    }
}

/// Trapezoidal convolution. Output samples that need a masked kernel sample
/// are masked in turn.
pub fn convolve_masked(h: &Excitation, kernel: &Kernel, grid: &TimeGrid) -> Result<TimeSeries> {
    if grid.t0() != 0.0 {
        return Err(Error::domain("t0", "convolution grid must start at 0", grid.t0()));
    }
    if !h.covers(grid.t_end()) {
        return Err(Error::domain(
            "excitation",
            "table must cover the solve horizon",
            grid.t_end(),
        ));
    }
    let ker = kernel.tabulate(grid)?;
    let n = grid.len();
    let dt = grid.dt();
    let hv: Vec<f64> = grid.times().map(|t| h.eval(t)).collect();
    let iv = ker.values();
    let usable = ker.mask().iter().position(|&v| !v).unwrap_or(n);

    let values: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            if i == 0 || i >= usable {
                return 0.0;
            }
            let inner: f64 = (1..i).map(|j| hv[i - j] * iv[j]).sum();
            dt * (inner + 0.5 * (hv[i] * iv[0] + hv[0] * iv[i]))
        })
        .collect();
    let valid = (0..n).map(|i| i < usable).collect();
    TimeSeries::with_mask(*grid, values, valid, Quantity::Displacement)
}

/// As [`convolve_masked`], but a kernel that loses validity inside the
/// horizon is an error.
pub fn convolve(h: &Excitation, kernel: &Kernel, grid: &TimeGrid) -> Result<TimeSeries> {
    let x = convolve_masked(h, kernel, grid)?;
    match x.first_invalid_time() {
        Some(t) => Err(Error::KernelInvalid { valid_until: t }),
        None => Ok(x),
    }
}

/// `I_β − Ĩ_β`, masked where the series is.
pub fn residual_series_minus_approx(p: &OscillatorParams, grid: &TimeGrid) -> Result<TimeSeries> {
    let series = ml_series::impulse_series_on_grid(p, grid, &SeriesOptions::default(), true)?;
    series.difference(&approx::impulse_approx_on_grid(p, grid)?)
}

/// One of the canned comparison runs.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseSpec {
    pub id: &'static str,
    pub params: OscillatorParams,
    /// `None` for the impulse cases.
    pub excitation: Option<(ExcitationKind, f64, f64)>,
    pub t_end: f64,
    pub n: usize,
}

const fn case(id: &'static str, omega_n: f64, zeta: f64, beta: f64) -> CaseSpec {
    CaseSpec {
        id,
        params: OscillatorParams {
            omega_n,
            zeta,
            beta,
        },
        excitation: None,
        t_end: 40.0 / omega_n,
        n: 4001,
    }
}

/// The four impulse comparison cases and the forced "yuan" example
/// `ẍ + 0.4 D^{0.56} x + 2x = 30 cos 6t`.
pub fn case_specs() -> Vec<CaseSpec> {
    let yuan_omega = std::f64::consts::SQRT_2;
    vec![
        case("1", 1.0, 0.01, 0.1),
        case("2", 10.0, 0.15, 0.9),
        case("3", 1.0, 0.15, 0.5),
        case("4", 5.0, 0.05, 0.5),
        CaseSpec {
            id: "yuan",
            params: OscillatorParams {
                omega_n: yuan_omega,
                zeta: 0.1214,
                beta: 0.56,
            },
            excitation: Some((ExcitationKind::Cosine, 30.0, 6.0)),
            t_end: 40.0,
            n: 8001,
        },
    ]
}

/// Looks up a case by id. Roman numerals are accepted for the impulse cases.
pub fn case_spec(id: &str) -> Result<CaseSpec> {
    let key = match id.to_ascii_lowercase().as_str() {
        "i" => "1".to_string(),
        "ii" => "2".to_string(),
        "iii" => "3".to_string(),
        "iv" => "4".to_string(),
        other => other.to_string(),
    };
    case_specs()
        .into_iter()
        .find(|c| c.id == key)
        .ok_or_else(|| Error::UnknownCase(id.to_string()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub case_id: String,
    pub series: TimeSeries,
    pub approx: TimeSeries,
    pub fdm: Option<TimeSeries>,
    /// `max |series − approx|` over the series-valid window.
    pub residual_max: f64,
    /// `residual_max / max |series|` over the same window.
    pub residual_rel: f64,
    /// First masked series sample, or the horizon.
    pub valid_until: f64,
    /// `max |fdm − approx|` over the whole horizon.
    pub fdm_approx_max: Option<f64>,
    /// `max |fdm − series|` over the series-valid window.
    pub fdm_series_max: Option<f64>,
}

fn max_abs_diff(a: &TimeSeries, b: &TimeSeries) -> Result<f64> {
    Ok(a.difference(b)?.max_abs())
}

fn report(
    case_id: &str,
    series: TimeSeries,
    approx: TimeSeries,
    fdm: Option<TimeSeries>,
) -> Result<ComparisonReport> {
    let residual_max = max_abs_diff(&series, &approx)?;
    let peak = series.max_abs();
    let valid_until = series
        .first_invalid_time()
        .unwrap_or(series.grid().t_end());
    let (fdm_approx_max, fdm_series_max) = match &fdm {
        Some(f) => (Some(max_abs_diff(f, &approx)?), Some(max_abs_diff(f, &series)?)),
        None => (None, None),
    };
    Ok(ComparisonReport {
        case_id: case_id.to_string(),
        residual_max,
        residual_rel: if peak > 0.0 { residual_max / peak } else { 0.0 },
        valid_until,
        series,
        approx,
        fdm,
        fdm_approx_max,
        fdm_series_max,
    })
}

/// FDM solution on a refinement of `grid` fine enough for the reference,
/// sampled back onto `grid`. `h = None` gives the impulse response.
pub fn fdm_reference(p: &OscillatorParams, grid: &TimeGrid, h: Option<&Excitation>) -> Result<TimeSeries> {
    let factor = ((p.omega_n * grid.dt()) / FDM_REFERENCE_STEP).ceil().max(1.0) as usize;
    let fine = grid.refined(factor);
    let x = match h {
        Some(h) => fdm::fdm_solve(p, |t| h.eval(t), &fine)?,
        None => fdm::impulse_fdm(p, &fine)?,
    };
    let values = (0..grid.len()).map(|i| x.values()[i * factor]).collect();
    TimeSeries::new(*grid, values, x.quantity())
}

/// Impulse comparison: stable series, closed-form approximation and FDM.
pub fn run_impulse(case_id: &str, p: &OscillatorParams, grid: &TimeGrid) -> Result<ComparisonReport> {
    run_impulse_with(case_id, p, grid, &SeriesOptions::default())
}

pub fn run_impulse_with(
    case_id: &str,
    p: &OscillatorParams,
    grid: &TimeGrid,
    opts: &SeriesOptions,
) -> Result<ComparisonReport> {
    let series = ml_series::impulse_series_on_grid(p, grid, opts, true)?;
    let approx = approx::impulse_approx_on_grid(p, grid)?;
    let fdm = fdm_reference(p, grid, None)?;
    report(case_id, series, approx, Some(fdm))
}

/// Forced comparison: convolution with the series and approximate kernels,
/// and the direct FDM march.
pub fn run_forced(
    case_id: &str,
    p: &OscillatorParams,
    h: &Excitation,
    grid: &TimeGrid,
) -> Result<ComparisonReport> {
    let series = convolve_masked(h, &Kernel::Series(*p, SeriesOptions::default()), grid)?;
    let approx = convolve(h, &Kernel::Approx(*p), grid)?;
    let fdm = fdm_reference(p, grid, Some(h))?;
    report(case_id, series, approx, Some(fdm))
}

/// Runs a canned case on `n` samples of `[0, t_end]`.
pub fn run_case(case_id: &str, t_end: f64, n: usize) -> Result<ComparisonReport> {
    let spec = case_spec(case_id)?;
    let grid = linspace_grid(t_end, n)?;
    match spec.excitation {
        None => run_impulse(spec.id, &spec.params, &grid),
        Some((kind, a, w)) => {
            let h = match kind {
                ExcitationKind::Sine => Excitation::sine(a, w)?,
                ExcitationKind::Constant => Excitation::constant(a)?,
                _ => Excitation::cosine(a, w)?,
            };
            run_forced(spec.id, &spec.params, &h, &grid)
        }
    }
}

/// Forced-response run described by a `key = value` file.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub params: OscillatorParams,
    pub t_end: f64,
    pub n: usize,
    pub excitation: Excitation,
}

const SCENARIO_KEYS: [&str; 8] = [
    "omega_n",
    "zeta",
    "beta",
    "t_end",
    "n",
    "excitation.kind",
    "excitation.amplitude",
    "excitation.frequency",
];

impl Scenario {
    /// Parses `key = value` lines. Blank lines and `#` comments are ignored;
    /// `excitation.frequency` defaults to 0.
    pub fn parse(text: &str) -> Result<Scenario> {
        let mut map = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Scenario(format!("line {}: expected key = value", lineno + 1)))?;
            let k = k.trim();
            if !SCENARIO_KEYS.contains(&k) {
                return Err(Error::Scenario(format!("line {}: unknown key {k:?}", lineno + 1)));
            }
            if map.insert(k.to_string(), v.trim().to_string()).is_some() {
                return Err(Error::Scenario(format!("line {}: duplicate key {k:?}", lineno + 1)));
            }
        }
        let num = |k: &str| -> Result<f64> {
            let v = map
                .get(k)
                .ok_or_else(|| Error::Scenario(format!("missing key {k:?}")))?;
            v.parse::<f64>()
                .map_err(|_| Error::Scenario(format!("{k}: not a number: {v:?}")))
        };
        let params = OscillatorParams::new(num("omega_n")?, num("zeta")?, num("beta")?)?;
        let n_raw = map
            .get("n")
            .ok_or_else(|| Error::Scenario("missing key \"n\"".into()))?;
        let n = n_raw
            .parse::<usize>()
            .map_err(|_| Error::Scenario(format!("n: not a count: {n_raw:?}")))?;
        let t_end = num("t_end")?;
        linspace_grid(t_end, n)?;
        let amplitude = num("excitation.amplitude")?;
        let frequency = if map.contains_key("excitation.frequency") {
            num("excitation.frequency")?
        } else {
            0.0
        };
        let kind = map
            .get("excitation.kind")
            .ok_or_else(|| Error::Scenario("missing key \"excitation.kind\"".into()))?;
        let excitation = match kind.as_str() {
            "cosine" => Excitation::cosine(amplitude, frequency)?,
            "sine" => Excitation::sine(amplitude, frequency)?,
            "constant" => Excitation::constant(amplitude)?,
            other => {
                return Err(Error::Scenario(format!(
                    "excitation.kind must be cosine, sine or constant, got {other:?}"
                )))
            }
        };
        Ok(Scenario {
            params,
            t_end,
            n,
            excitation,
        })
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        linspace_grid(self.t_end, self.n)
    }

    pub fn run(&self, id: &str) -> Result<ComparisonReport> {
        run_forced(id, &self.params, &self.excitation, &self.grid()?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ml_series::impulse_beta1;

    fn params(omega_n: f64, zeta: f64, beta: f64) -> OscillatorParams {
        OscillatorParams::new(omega_n, zeta, beta).unwrap()
    }

    #[test]
    fn zero_excitation_gives_zero() {
        let g = linspace_grid(10.0, 201).unwrap();
        let h = Excitation::constant(0.0).unwrap();
        let x = convolve(&h, &Kernel::Approx(params(1.0, 0.1, 0.5)), &g).unwrap();
        assert!(x.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constant_load_settles_to_static_deflection() {
        let p = params(2.0, 0.1, 1.0);
        let g = linspace_grid(10.0 / (0.1 * 2.0) * 1.5, 15_001).unwrap();
        let tab = TimeSeries::from_fn(g, Quantity::Impulse, |t| impulse_beta1(&p, t).unwrap());
        let x = convolve(&Excitation::constant(3.0).unwrap(), &Kernel::Tabulated(tab), &g).unwrap();
        let last = *x.values().last().unwrap();
        assert!((last / (3.0 / 4.0) - 1.0).abs() < 1e-3, "{last}");
        assert_eq!(x.values()[0], 0.0);
    }

    #[test]
    fn convolution_is_linear() {
        let p = params(1.3, 0.08, 0.4);
        let g = linspace_grid(12.0, 601).unwrap();
        let k = Kernel::Approx(p);
        let a = convolve(&Excitation::sine(2.0, 1.1).unwrap(), &k, &g).unwrap();
        let b = convolve(&Excitation::cosine(1.0, 0.3).unwrap(), &k, &g).unwrap();
        let mixed = TimeSeries::from_fn(g, Quantity::Excitation, |t| {
            -1.5 * 2.0 * (1.1 * t).sin() + 0.5 * (0.3 * t).cos()
        });
        let c = convolve(&Excitation::tabulated(mixed).unwrap(), &k, &g).unwrap();
        let scale = c.max_abs();
        for i in 0..g.len() {
            let want = -1.5 * a.values()[i] + 0.5 * b.values()[i];
            assert!((c.values()[i] - want).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn convolution_converges_under_refinement() {
        let p = params(1.0, 0.1, 0.6);
        let h = Excitation::cosine(1.0, 2.0).unwrap();
        let coarse = convolve(&h, &Kernel::Approx(p), &linspace_grid(20.0, 1001).unwrap()).unwrap();
        let fine = convolve(&h, &Kernel::Approx(p), &linspace_grid(20.0, 2001).unwrap()).unwrap();
        let diff = (0..1001)
            .map(|i| (coarse.values()[i] - fine.values()[2 * i]).abs())
            .fold(0.0, f64::max);
        assert!(diff < 0.01 * fine.max_abs());
    }

    #[test]
    fn invalid_series_kernel_is_reported() {
        let p = params(10.0, 0.05, 0.7);
        let g = linspace_grid(5.0, 501).unwrap();
        let h = Excitation::constant(1.0).unwrap();
        let err = convolve(&h, &Kernel::Series(p, SeriesOptions::naive()), &g).unwrap_err();
        match err {
            Error::KernelInvalid { valid_until } => assert!((3.0..4.0).contains(&valid_until)),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn tabulated_excitation_must_cover_the_horizon() {
        let short = TimeSeries::from_fn(linspace_grid(1.0, 11).unwrap(), Quantity::Excitation, |t| t);
        let h = Excitation::tabulated(short).unwrap();
        assert!((h.eval(0.25) - 0.25).abs() < 1e-15);
        let g = linspace_grid(2.0, 21).unwrap();
        assert!(convolve(&h, &Kernel::Approx(params(1.0, 0.1, 0.5)), &g).is_err());
    }

    #[test]
    fn residual_vanishes_at_the_limits() {
        let g = linspace_grid(10.0, 501).unwrap();
        let r = residual_series_minus_approx(&params(1.0, 0.1, 0.0), &g).unwrap();
        assert!(r.max_abs() < 1e-10);
        let r = residual_series_minus_approx(&params(1.0, 0.1, 1.0), &g).unwrap();
        assert!(r.max_abs() < 1e-10);
    }

    #[test]
    fn case_lookup() {
        assert_eq!(case_spec("iv").unwrap().params, params(5.0, 0.05, 0.5));
        assert_eq!(case_spec("yuan").unwrap().t_end, 40.0);
        assert!(matches!(case_spec("5"), Err(Error::UnknownCase(_))));
    }

    #[test]
    fn scenario_round_trip() {
        let text = "# forced run\nomega_n = 1.4142135623730951\nzeta = 0.1214\nbeta = 0.56\n\
                    t_end = 10\nn = 2001\nexcitation.kind = cosine\nexcitation.amplitude = 30\n\
                    excitation.frequency = 6 # rad/s\n";
        let s = Scenario::parse(text).unwrap();
        assert_eq!(s.n, 2001);
        assert_eq!(s.excitation.kind(), ExcitationKind::Cosine);
        assert_eq!(s.excitation.frequency(), 6.0);
        assert!(Scenario::parse(&text.replace("zeta", "damping")).is_err());
        assert!(Scenario::parse(&text.replace("n = 2001", "n = lots")).is_err());
        assert!(Scenario::parse(&text.replace("beta = 0.56", "beta = 1.5")).is_err());
        assert!(Scenario::parse("omega_n 1").is_err());
    }

    #[test]
    fn yuan_approx_response_is_a_steady_oscillation_at_the_drive() {
        let spec = case_spec("yuan").unwrap();
        let g = linspace_grid(40.0, 8001).unwrap();
        let x = convolve(&Excitation::cosine(30.0, 6.0).unwrap(), &Kernel::Approx(spec.params), &g).unwrap();
        let tail = &x.values()[6000..];
        let amp = tail.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(amp.is_finite() && amp < 2.0);
        // Upward zero crossings in the last 10 s, spaced by 2π/6.
        let ups: Vec<usize> = (6001..8001)
            .filter(|&i| x.values()[i - 1] < 0.0 && x.values()[i] >= 0.0)
            .collect();
        let mean = (ups[ups.len() - 1] - ups[0]) as f64 * 0.005 / (ups.len() - 1) as f64;
        assert!((mean - std::f64::consts::TAU / 6.0).abs() < 0.01, "{mean}");
    }
}
