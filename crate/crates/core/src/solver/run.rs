use super::{
    functionals, step, DiffusionOperator, FunctionalSeries, PhaseGrid, SolverError, State,
    TransportScheme,
};
use crate::certificate::Certificate;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunOptions {
    pub tmax: f64,
    /// Upper bound on the step; the actual step divides `sample_dt` evenly.
    pub dt: f64,
    pub sample_dt: f64,
    pub scheme: TransportScheme,
}

/// Row-wise check of `ℰ(t) e^{λ' t}` being non-increasing, where
/// `λ' = (1 - allowance) λ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayCheck {
    pub lambda: f64,
    pub allowance: f64,
    /// `(t, ℰ(t) e^{λ' t}, previous value)` for every failing sample.
    pub violations: Vec<(f64, f64, f64)>,
}

impl DecayCheck {
    pub const ALLOWANCE: f64 = 0.1;

    pub fn evaluate(series: &FunctionalSeries, lambda: f64, allowance: f64) -> Self {
        let rate = (1.0 - allowance) * lambda;
        // states are normalised to unit mass, so ℰ below 1e-14 is round-off
        let e0 = series.emod.first().copied().unwrap_or(0.0).abs().max(1.0);
        let mut violations = Vec::new();
        for n in 1..series.len() {
            let prev = series.emod[n - 1] * (rate * series.times[n - 1]).exp();
            let cur = series.emod[n] * (rate * series.times[n]).exp();
            // relative round-off slack on top of the allowance
            if !(cur <= prev * (1.0 + 1e-9) + 1e-14 * e0) {
                violations.push((series.times[n], cur, prev));
            }
        }
        DecayCheck {
            lambda,
            allowance,
            violations,
        }
    }

    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub series: FunctionalSeries,
    pub final_state: State,
    pub dt_used: f64,
    pub decay: Option<DecayCheck>,
}

/// Advances `h_in` to `tmax`, sampling the functionals every `sample_dt`.
pub fn run(
    grid: &PhaseGrid,
    h_in: &State,
    opts: &RunOptions,
    certificate: Option<&Certificate>,
) -> Result<RunOutcome, SolverError> {
    if !(opts.tmax >= 0.0 && opts.sample_dt > 0.0 && opts.dt > 0.0) || !opts.tmax.is_finite() {
        return Err(SolverError::InvalidOptions(format!(
            "need tmax >= 0, dt > 0, sample_dt > 0; got tmax = {}, dt = {}, sample_dt = {}",
            opts.tmax, opts.dt, opts.sample_dt
        )));
    }
    if h_in.h.len() != grid.len() || h_in.h.iter().any(|v| !(*v >= 0.0)) {
        return Err(SolverError::InitialData(
            "state must be nonnegative and match the grid".into(),
        ));
    }
    let substeps = ((opts.sample_dt / opts.dt) - 1e-9).ceil().max(1.0) as usize;
    let dt = opts.sample_dt / substeps as f64;
    let samples = (opts.tmax / opts.sample_dt + 1e-9).floor() as usize;

    let op = DiffusionOperator::new(grid);
    let weights = certificate.map(|c| c.weights());
    let mut state = h_in.clone();
    let mut series = FunctionalSeries::default();
    series.push(functionals(&state, grid, weights.as_ref()));
    for n in 1..=samples {
        for _ in 0..substeps {
            step(&mut state, dt, grid, &op, opts.scheme).map_err(|e| SolverError::AtTime {
                t: state.t,
                source: Box::new(e),
            })?;
        }
        // keep the sample times free of accumulated round-off
        state.t = h_in.t + n as f64 * opts.sample_dt;
        series.push(functionals(&state, grid, weights.as_ref()));
    }
    let decay = certificate.map(|c| DecayCheck::evaluate(&series, c.lambda, DecayCheck::ALLOWANCE));
    Ok(RunOutcome {
        series,
        final_state: state,
        dt_used: dt,
        decay,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    /// Decay rate: minus the slope of `log value` against `t`.
    pub lambda: f64,
    pub r2: f64,
    pub samples: usize,
}

/// Least-squares fit of `log value = c - λ t` on the last `window` fraction
/// of the samples.
pub fn fit_rate(times: &[f64], values: &[f64], window: f64) -> Result<RateFit, SolverError> {
    assert_eq!(times.len(), values.len());
    let window = window.clamp(0.0, 1.0);
    let n = times.len();
    let start = n - ((n as f64) * window).round() as usize;
    let (t, v) = (&times[start..], &values[start..]);
    if t.len() < 10 {
        return Err(SolverError::InsufficientData(t.len()));
    }
    if let Some(k) = v.iter().position(|&x| !(x > 0.0)) {
        return Err(SolverError::NonpositiveValues {
            t: t[k],
            value: v[k],
        });
    }
    let y: Vec<f64> = v.iter().map(|x| x.ln()).collect();
    let m = t.len() as f64;
    let tm = t.iter().sum::<f64>() / m;
    let ym = y.iter().sum::<f64>() / m;
    let mut stt = 0.0;
    let mut sty = 0.0;
    let mut syy = 0.0;
    for (a, b) in t.iter().zip(&y) {
        stt += (a - tm) * (a - tm);
        sty += (a - tm) * (b - ym);
        syy += (b - ym) * (b - ym);
    }
    let slope = sty / stt;
    let r2 = if syy == 0.0 {
        1.0
    } else {
        (sty * sty) / (stt * syy)
    };
    Ok(RateFit {
        lambda: -slope,
        r2,
        samples: t.len(),
    })
}

/// [`fit_rate`] restricted to the samples before the series stops strictly
/// decreasing, so that a plateau at round-off level does not flatten the fit.
pub fn fit_decay_rate(times: &[f64], values: &[f64], window: f64) -> Result<RateFit, SolverError> {
    let end = values
        .windows(2)
        .position(|w| !(w[1] < w[0]))
        .map_or(values.len(), |k| k + 1);
    fit_rate(&times[..end], &values[..end], window)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::builtin_classical;
    use crate::solver::{build_grid, parse_initial_data};

    #[test]
    fn test_fit_exact_exponential() {
        let t: Vec<f64> = (0..50).map(|k| k as f64 * 0.1).collect();
        let v: Vec<f64> = t.iter().map(|t| 3.0 * (-2.0 * t).exp()).collect();
        let fit = fit_rate(&t, &v, 1.0).unwrap();
        assert!((fit.lambda - 2.0).abs() < 1e-10);
        assert!((fit.r2 - 1.0).abs() < 1e-12);
        let c = fit_rate(&t, &vec![0.5; 50], 0.5).unwrap();
        assert!(c.lambda.abs() < 1e-15);
    }

    #[test]
    fn test_fit_stops_at_plateau() {
        let t: Vec<f64> = (0..40).map(|k| k as f64 * 0.5).collect();
        let v: Vec<f64> = t.iter().map(|t| (-3.0 * t.min(9.5)).exp()).collect();
        let fit = fit_decay_rate(&t, &v, 1.0).unwrap();
        assert!((fit.lambda - 3.0).abs() < 1e-9, "{fit:?}");
        assert!(fit_rate(&t, &v, 1.0).unwrap().lambda < 2.0);
    }

    #[test]
    fn test_fit_errors() {
        let t: Vec<f64> = (0..12).map(|k| k as f64).collect();
        assert!(matches!(
            fit_rate(&t, &vec![1.0; 12], 0.5),
            Err(SolverError::InsufficientData(6))
        ));
        let mut v = vec![1.0; 12];
        v[11] = 0.0;
        assert!(matches!(
            fit_rate(&t, &v, 1.0),
            Err(SolverError::NonpositiveValues { .. })
        ));
    }

    #[test]
    fn test_equilibrium_run_is_flat() {
        let g = build_grid(&builtin_classical(1), 16, 32, 6.0).unwrap();
        let opts = RunOptions {
            tmax: 0.5,
            dt: 0.01,
            sample_dt: 0.1,
            scheme: TransportScheme::Upwind,
        };
        let out = run(&g, &State::equilibrium(&g), &opts, None).unwrap();
        assert_eq!(out.series.len(), 6);
        assert!(out.series.d.iter().all(|d| d.abs() < 1e-14));
        assert!(out.series.mass_drift() < 1e-14);
        assert!((out.series.times[5] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn test_entropy_decreases() {
        let g = build_grid(&builtin_classical(1), 16, 48, 6.0).unwrap();
        let s = State::from_expr(&g, &parse_initial_data("1 + 0.5*cos(2*pi*x)").unwrap()).unwrap();
        let opts = RunOptions {
            tmax: 1.0,
            dt: 0.01,
            sample_dt: 0.05,
            scheme: TransportScheme::Upwind,
        };
        let out = run(&g, &s, &opts, None).unwrap();
        assert!(out.series.d.windows(2).all(|w| w[1] < w[0]));
        assert!(out.series.mass_drift() < 1e-12);
        assert!(out.series.pinsker_violations(1e-12).is_empty());
    }

    #[test]
    fn test_step_error_has_time() {
        let g = build_grid(&builtin_classical(1), 64, 16, 6.0).unwrap();
        let opts = RunOptions {
            tmax: 1.0,
            dt: 0.5,
            sample_dt: 0.5,
            scheme: TransportScheme::Upwind,
        };
        match run(&g, &State::equilibrium(&g), &opts, None) {
            Err(SolverError::AtTime { source, .. }) => {
                assert!(matches!(*source, SolverError::CflViolation { .. }))
            }
            other => panic!("{other:?}"),
        }
    }
}
