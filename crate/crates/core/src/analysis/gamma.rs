use super::AnalysisError;
use crate::sim::Trace;

/// Disagreement below this is treated as numerically converged.
pub const NUMERIC_FLOOR: f64 = 1e-13;
/// Decades of initial decay excluded as the fast transient.
pub const TRANSIENT_DECADES: f64 = 0.5;
pub const MIN_STATIONARY_SAMPLES: usize = 10;

/// Log-linear fit `log10 δ̂(t) ≈ intercept − gamma·t` over the stationary
/// window of a trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionFit {
    pub gamma: f64,
    pub intercept: f64,
    /// Coefficient of determination of the log-linear fit.
    pub r2: f64,
    pub samples: usize,
    pub window_start: f64,
    pub window_end: f64,
}

/// Ordinary least squares of `log10 δ̂` against `t` over the points given.
/// Returns `(slope, intercept, r²)`.
pub fn fit_log_linear(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let m = points.len() as f64;
    let (st, sy) = points.iter().fold((0.0, 0.0), |(a, b), &(t, d)| (a + t, b + d.log10()));
    let (mt, my) = (st / m, sy / m);
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for &(t, d) in points {
        let (dx, dy) = (t - mt, d.log10() - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mt;
    let r2 = if syy == 0.0 {
        1.0
    } else {
        (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0)
    };
    (slope, intercept, r2)
}

/// Fits the stationary regime of `(t, δ̂)` points: from the first point at
/// least [`TRANSIENT_DECADES`] below the initial disagreement up to (not
/// including) the first point at or under [`NUMERIC_FLOOR`] relative to it.
pub fn fit_contraction_points(points: &[(f64, f64)]) -> Result<ContractionFit, AnalysisError> {
    let too_few = |found| AnalysisError::TooFewSamples {
        found,
        needed: MIN_STATIONARY_SAMPLES,
    };
    let d0 = match points.first() {
        Some(&(_, d)) if d > 0.0 => d,
        _ => return Err(too_few(0)),
    };
    let cutoff = d0 * 10f64.powf(-TRANSIENT_DECADES);
    let floor = d0 * NUMERIC_FLOOR;
    let Some(start) = points.iter().position(|&(_, d)| d < cutoff) else {
        let last = points.last().map_or(d0, |p| p.1);
        if points.len() >= MIN_STATIONARY_SAMPLES && last >= d0 {
            let (slope, _, _) = fit_log_linear(points);
            return Err(AnalysisError::NonDecreasing { slope });
        }
        return Err(too_few(0));
    };
    let end = points[start..]
        .iter()
        .position(|&(_, d)| d <= floor)
        .map_or(points.len(), |k| start + k);
    let window = &points[start..end];
    if window.len() < MIN_STATIONARY_SAMPLES {
        return Err(too_few(window.len()));
    }
    let (slope, intercept, r2) = fit_log_linear(window);
    if !(slope < 0.0) {
        return Err(AnalysisError::NonDecreasing { slope });
    }
    Ok(ContractionFit {
        gamma: -slope,
        intercept,
        r2,
        samples: window.len(),
        window_start: window[0].0,
        window_end: window[window.len() - 1].0,
    })
}

pub fn fit_contraction(trace: &Trace) -> Result<ContractionFit, AnalysisError> {
    let pts: Vec<(f64, f64)> = trace.samples.iter().map(|s| (s.t, s.delta_hat)).collect();
    fit_contraction_points(&pts)
}

/// Contraction rate: negative slope of `log10 δ̂` over the stationary window.
pub fn estimate_gamma(trace: &Trace) -> Result<f64, AnalysisError> {
    fit_contraction(trace).map(|f| f.gamma)
}
