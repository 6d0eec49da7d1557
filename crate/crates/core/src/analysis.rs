//! Fringe fitting and scan statistics.
//!
//! Fringes are modeled as `offset + amplitude·cos(2π·x/period + phase)` with
//! `x` the actuator position. The fit is linear in `(offset, a, b)` for the
//! equivalent form `offset + a·cos(kx) + b·sin(kx)`; the wavenumber `k` is
//! started from the best point of a discrete frequency scan and refined with
//! damped Gauss–Newton steps. Parameter uncertainties come from the residual
//! variance and the Jacobian at the optimum.
//!
//! Visibility is `amplitude / offset` from the fitted parameters rather than
//! raw max/min, which is biased upward by counting noise.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix3, Matrix4, Vector3, Vector4};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::coincidence::CountTable;
use crate::experiment::ScanRow;
use crate::{Error, Result};

/// Minimum number of scan points accepted by the fits.
pub const MIN_FIT_POINTS: usize = 8;
const MAX_ITERATIONS: usize = 200;
const PARAM_TOL: f64 = 1e-9;
const FREQUENCY_GRID: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FringeFit {
    pub offset: f64,
    pub amplitude: f64,
    /// Radians, wrapped to `(−π, π]`, referenced to position 0.
    pub phase: f64,
    pub period: f64,
    pub visibility: f64,
    pub residual_rms: f64,
    pub offset_sigma: f64,
    pub amplitude_sigma: f64,
    pub phase_sigma: f64,
    pub period_sigma: f64,
    pub visibility_sigma: f64,
}

impl FringeFit {
    pub fn evaluate(&self, x: f64) -> f64 {
        self.offset + self.amplitude * (2.0 * PI * x / self.period + self.phase).cos()
    }
}

/// Which coincidence column of a scan to fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CountColumn {
    Ab,
    ApB,
    ABp,
    ApBp,
    /// `n_AB + n_A'B`: signal port B summed over both idler outcomes.
    SignalB,
}

impl CountColumn {
    pub fn get(self, t: &CountTable) -> u64 {
        match self {
            CountColumn::Ab => t.n_ab,
            CountColumn::ApB => t.n_apb,
            CountColumn::ABp => t.n_abp,
            CountColumn::ApBp => t.n_apbp,
            CountColumn::SignalB => t.n_ab + t.n_apb,
        }
    }
}

/// `(actuator_um, count)` pairs of one column.
pub fn fringe_points(rows: &[ScanRow], column: CountColumn) -> Vec<(f64, f64)> {
    rows.iter()
        .map(|r| (r.actuator_um, column.get(&r.counts) as f64))
        .collect()
}

pub fn wrap_phase(phi: f64) -> f64 {
    let w = (phi + PI).rem_euclid(2.0 * PI) - PI;
    if w <= -PI {
        w + 2.0 * PI
    } else {
        w
    }
}

fn check_points(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < MIN_FIT_POINTS {
        return Err(Error::Fit {
            reason: "too few points".into(),
            diagnostics: format!("{} points, need {MIN_FIT_POINTS}", points.len()),
        });
    }
    if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(Error::Fit {
            reason: "non-finite data".into(),
            diagnostics: String::new(),
        });
    }
    let (lo, hi) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (x, _)| (lo.min(*x), hi.max(*x)));
    let span = hi - lo;
    if !(span > 0.0) {
        return Err(Error::Fit {
            reason: "degenerate span".into(),
            diagnostics: "all positions coincide".into(),
        });
    }
    Ok(span)
}

/// Linear least squares at fixed wavenumber: returns `(offset, a, b)`, the
/// residual sum of squares and the inverse normal matrix.
fn linear_fit(points: &[(f64, f64)], k: f64) -> Option<(Vector3<f64>, f64, Matrix3<f64>)> {
    let mut xtx = Matrix3::zeros();
    let mut xty = Vector3::zeros();
    for &(x, y) in points {
        let row = Vector3::new(1.0, (k * x).cos(), (k * x).sin());
        xtx += row * row.transpose();
        xty += row * y;
    }
    let inv = xtx.try_inverse()?;
    let p = inv * xty;
    let rss = points
        .iter()
        .map(|&(x, y)| {
            let m = p[0] + p[1] * (k * x).cos() + p[2] * (k * x).sin();
            (y - m).powi(2)
        })
        .sum();
    Some((p, rss, inv))
}

fn median_spacing(points: &[(f64, f64)]) -> f64 {
    let mut xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    xs.sort_by(f64::total_cmp);
    let mut gaps: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).filter(|g| *g > 0.0).collect();
    gaps.sort_by(f64::total_cmp);
    gaps[gaps.len() / 2]
}

/// Wavenumber with the smallest residual over a uniform grid between one
/// period per span and the Nyquist limit of the median spacing.
fn frequency_scan(points: &[(f64, f64)], span: f64) -> f64 {
    let k_min = 2.0 * PI / span;
    let k_max = (PI / median_spacing(points)).max(k_min * 1.5);
    let mut best = (f64::INFINITY, k_min);
    for j in 0..FREQUENCY_GRID {
        let k = k_min + (k_max - k_min) * j as f64 / (FREQUENCY_GRID - 1) as f64;
        if let Some((_, rss, _)) = linear_fit(points, k) {
            if rss < best.0 {
                best = (rss, k);
            }
        }
    }
    best.1
}

/// Derived quantities and their standard errors from `(offset, a, b)` and
/// their covariance.
fn summarize(
    params: Vector3<f64>,
    cov: Matrix3<f64>,
    k: f64,
    k_sigma: f64,
    rss: f64,
    n: usize,
) -> Result<FringeFit> {
    let (o, a, b) = (params[0], params[1], params[2]);
    if !(o > 0.0) {
        return Err(Error::Fit {
            reason: "non-positive offset".into(),
            diagnostics: format!("offset = {o}"),
        });
    }
    let amp = a.hypot(b);
    let phase = wrap_phase((-b).atan2(a));
    let var = |g: Vector3<f64>| (g.transpose() * cov * g)[(0, 0)].max(0.0).sqrt();
    let (g_amp, g_phase) = if amp > 0.0 {
        (
            Vector3::new(0.0, a / amp, b / amp),
            Vector3::new(0.0, b / (amp * amp), -a / (amp * amp)),
        )
    } else {
        (Vector3::zeros(), Vector3::zeros())
    };
    let g_vis = Vector3::new(-amp / (o * o), 0.0, 0.0) + g_amp / o;
    let period = 2.0 * PI / k;
    Ok(FringeFit {
        offset: o,
        amplitude: amp,
        phase,
        period,
        visibility: (amp / o).clamp(0.0, 1.0),
        residual_rms: (rss / n as f64).sqrt(),
        offset_sigma: cov[(0, 0)].max(0.0).sqrt(),
        amplitude_sigma: var(g_amp),
        phase_sigma: if amp > 0.0 { var(g_phase) } else { PI },
        period_sigma: 2.0 * PI * k_sigma / (k * k),
        visibility_sigma: var(g_vis),
    })
}

/// Fit with the period held fixed (linear least squares).
pub fn fit_fringe_with_period(points: &[(f64, f64)], period: f64) -> Result<FringeFit> {
    check_points(points)?;
    if !(period > 0.0) || !period.is_finite() {
        return Err(Error::Fit {
            reason: "invalid period".into(),
            diagnostics: format!("period = {period}"),
        });
    }
    let k = 2.0 * PI / period;
    let (p, rss, inv) = linear_fit(points, k).ok_or_else(|| Error::Fit {
        reason: "singular design".into(),
        diagnostics: format!("period {period} aliases with the sample spacing"),
    })?;
    let dof = (points.len() - 3) as f64;
    summarize(p, inv * (rss / dof), k, 0.0, rss, points.len())
}

/// Full four-parameter fit with the period free.
pub fn fit_fringe(points: &[(f64, f64)]) -> Result<FringeFit> {
    let span = check_points(points)?;
    let k0 = frequency_scan(points, span);
    let (p0, _, _) = linear_fit(points, k0).ok_or_else(|| Error::Fit {
        reason: "singular design at initial frequency".into(),
        diagnostics: format!("k0 = {k0}"),
    })?;
    let mut params = Vector4::new(p0[0], p0[1], p0[2], k0);

    let residuals = |p: &Vector4<f64>| -> DVector<f64> {
        DVector::from_iterator(
            points.len(),
            points
                .iter()
                .map(|&(x, y)| y - (p[0] + p[1] * (p[3] * x).cos() + p[2] * (p[3] * x).sin())),
        )
    };
    let jacobian = |p: &Vector4<f64>| -> DMatrix<f64> {
        DMatrix::from_fn(points.len(), 4, |i, j| {
            let x = points[i].0;
            let (s, c) = (p[3] * x).sin_cos();
            match j {
                0 => 1.0,
                1 => c,
                2 => s,
                _ => x * (-p[1] * s + p[2] * c),
            }
        })
    };

    let mut r = residuals(&params);
    let mut rss = r.norm_squared();
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let j = jacobian(&params);
        let jtj: Matrix4<f64> = (j.transpose() * &j).fixed_view::<4, 4>(0, 0).into_owned();
        let jtr: Vector4<f64> = (j.transpose() * &r).fixed_rows::<4>(0).into_owned();
        let scale = jtj.diagonal().max().max(f64::MIN_POSITIVE);
        let mut damped = jtj;
        for d in 0..4 {
            damped[(d, d)] += lambda * jtj[(d, d)].max(1e-12 * scale);
        }
        let Some(step) = damped.try_inverse().map(|inv| inv * jtr) else {
            lambda *= 10.0;
            continue;
        };
        let small = (0..4).all(|d| step[d].abs() <= PARAM_TOL * (1.0 + params[d].abs()));
        let trial = params + step;
        let r_trial = residuals(&trial);
        let rss_trial = r_trial.norm_squared();
        if rss_trial <= rss {
            params = trial;
            r = r_trial;
            rss = rss_trial;
            lambda = (lambda / 3.0).max(1e-12);
        } else {
            lambda *= 4.0;
        }
        if small {
            converged = true;
            break;
        }
        if lambda > 1e12 {
            break;
        }
    }
    if !converged {
        return Err(Error::Fit {
            reason: "did not converge".into(),
            diagnostics: format!("{iterations} iterations, rss = {rss:.6e}, k = {:.6e}", params[3]),
        });
    }

    let k = params[3].abs();
    if params[3] < 0.0 {
        // cos is even, sin odd: flip the sine coefficient.
        params[2] = -params[2];
        params[3] = k;
    }
    let period = 2.0 * PI / k;
    if period > span * (1.0 + 1e-9) {
        return Err(Error::Fit {
            reason: "scan spans less than one fitted period".into(),
            diagnostics: format!("period {period:.6}, span {span:.6}"),
        });
    }

    let j = jacobian(&params);
    let jtj: Matrix4<f64> = (j.transpose() * &j).fixed_view::<4, 4>(0, 0).into_owned();
    let dof = (points.len() - 4) as f64;
    let cov4 = jtj
        .try_inverse()
        .map(|inv| inv * (rss / dof))
        .unwrap_or_else(Matrix4::zeros);
    let cov3: Matrix3<f64> = cov4.fixed_view::<3, 3>(0, 0).into_owned();
    summarize(
        params.fixed_rows::<3>(0).into_owned(),
        cov3,
        k,
        cov4[(3, 3)].max(0.0).sqrt(),
        rss,
        points.len(),
    )
}

/// Path distinguishability estimated as the imbalance between the two idler
/// outcomes conditioned on signal port `B`:
/// `D = |n_AB − n_A'B| / (n_AB + n_A'B)`.
///
/// The table should come from a run whose signal analyzer is in the path
/// (HV) basis, so that `B` selects one interferometer arm.
pub fn distinguishability(table: &CountTable) -> Result<f64> {
    let total = table.n_ab + table.n_apb;
    if total == 0 {
        return Err(Error::InsufficientStatistics(
            "no coincidences on signal port B".into(),
        ));
    }
    Ok((table.n_ab as f64 - table.n_apb as f64).abs() / total as f64)
}

fn mean(ys: &[f64]) -> f64 {
    ys.iter().sum::<f64>() / ys.len() as f64
}

fn ratio_to_poisson(residual_var: f64, mean_count: f64) -> Result<f64> {
    if !(mean_count > 0.0) {
        return Err(Error::InsufficientStatistics("mean count is zero".into()));
    }
    Ok(residual_var.max(0.0).sqrt() / mean_count.sqrt())
}

/// Spread of the counts about the fitted sinusoid relative to `√⟨N⟩`.
///
/// Falls back to the best fixed-frequency sinusoid when the free-period fit
/// cannot converge (flat or noiseless data).
pub fn poisson_consistency(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 10 {
        return Err(Error::InsufficientStatistics(format!(
            "{} points, need at least 10",
            points.len()
        )));
    }
    let span = check_points(points)?;
    let (model, n_params): (Box<dyn Fn(f64) -> f64>, usize) = match fit_fringe(points) {
        Ok(fit) => (Box::new(move |x| fit.evaluate(x)), 4),
        Err(Error::Fit { .. }) => {
            let k = frequency_scan(points, span);
            let (p, _, _) = linear_fit(points, k).ok_or_else(|| Error::Fit {
                reason: "singular design".into(),
                diagnostics: String::new(),
            })?;
            (Box::new(move |x: f64| p[0] + p[1] * (k * x).cos() + p[2] * (k * x).sin()), 4)
        }
        Err(e) => return Err(e),
    };
    let rss: f64 = points.iter().map(|&(x, y)| (y - model(x)).powi(2)).sum();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    ratio_to_poisson(rss / (points.len() - n_params) as f64, mean(&ys))
}

/// Same ratio with a known fringe period.
pub fn poisson_consistency_with_period(points: &[(f64, f64)], period: f64) -> Result<f64> {
    let fit = fit_fringe_with_period(points, period)?;
    let rss: f64 = points.iter().map(|&(x, y)| (y - fit.evaluate(x)).powi(2)).sum();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    ratio_to_poisson(rss / (points.len() - 3) as f64, mean(&ys))
}

/// Sample standard deviation of the raw counts relative to `√⟨N⟩`, with no
/// detrending. Any residual fringe inflates it above 1.
pub fn raw_poisson_ratio(counts: &[f64]) -> Result<f64> {
    if counts.len() < 2 {
        return Err(Error::InsufficientStatistics("need at least 2 counts".into()));
    }
    let m = mean(counts);
    let var = counts.iter().map(|c| (c - m).powi(2)).sum::<f64>() / (counts.len() - 1) as f64;
    ratio_to_poisson(var, m)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanComparison {
    pub chi2: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson chi-square test that two scans on the same grid share the same
/// expected coincidence counts. Each of the four coincidence columns at each
/// point is one cell with variance `a + b`; empty cells are skipped.
pub fn compare_scans(a: &[ScanRow], b: &[ScanRow]) -> Result<ScanComparison> {
    if a.len() != b.len() {
        return Err(Error::domain(format!("scan lengths differ: {} vs {}", a.len(), b.len())));
    }
    let mut chi2 = 0.0;
    let mut dof = 0;
    for (ra, rb) in a.iter().zip(b) {
        if (ra.actuator_um - rb.actuator_um).abs() > 1e-9 * (1.0 + ra.actuator_um.abs()) {
            return Err(Error::domain(format!(
                "scan grids differ at {} vs {} um",
                ra.actuator_um, rb.actuator_um
            )));
        }
        for col in [CountColumn::Ab, CountColumn::ApB, CountColumn::ABp, CountColumn::ApBp] {
            let (x, y) = (col.get(&ra.counts) as f64, col.get(&rb.counts) as f64);
            if x + y > 0.0 {
                chi2 += (x - y).powi(2) / (x + y);
                dof += 1;
            }
        }
    }
    let p_value = if dof == 0 {
        1.0
    } else {
        let dist = ChiSquared::new(dof as f64).map_err(|e| Error::domain(e.to_string()))?;
        dist.sf(chi2)
    };
    Ok(ScanComparison { chi2, dof, p_value })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn synthetic(offset: f64, amp: f64, period: f64, phase: f64, n: usize, step: f64) -> Vec<(f64, f64)> {
        (0..n)
            .map(|i| {
                let x = i as f64 * step;
                (x, offset + amp * (2.0 * PI * x / period + phase).cos())
            })
            .collect()
    }

    #[test]
    fn full_visibility_noise_free() {
        let pts = synthetic(100.0, 100.0, 4.4, 0.3, 40, 0.44);
        let fit = fit_fringe(&pts).unwrap();
        assert_abs_diff_eq!(fit.visibility, 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(fit.period, 4.4, epsilon = 1e-9);
        assert_abs_diff_eq!(fit.phase, 0.3, epsilon = 1e-9);
        assert!(fit.residual_rms < 1e-8);
    }

    #[test]
    fn half_visibility() {
        let pts = synthetic(100.0, 50.0, 3.7, -1.1, 30, 0.5);
        let fit = fit_fringe(&pts).unwrap();
        assert_abs_diff_eq!(fit.visibility, 0.5, epsilon = 1e-6);
        assert_abs_diff_eq!(fit.amplitude, 50.0, epsilon = 1e-6);
        assert_abs_diff_eq!(fit.offset, 100.0, epsilon = 1e-6);
    }

    #[test]
    fn translation_only_moves_phase() {
        let pts = synthetic(200.0, 80.0, 4.4, 0.0, 40, 0.44);
        let base = fit_fringe(&pts).unwrap();
        let shifted: Vec<_> = pts.iter().map(|&(x, y)| (x + 1.3, y)).collect();
        let fit = fit_fringe(&shifted).unwrap();
        assert_abs_diff_eq!(fit.visibility, base.visibility, epsilon = 1e-6);
        let expected = wrap_phase(base.phase - 2.0 * PI * 1.3 / 4.4);
        assert_abs_diff_eq!(wrap_phase(fit.phase - expected), 0.0, epsilon = 1e-6);
    }

    #[test]
    fn visibility_is_scale_invariant() {
        let pts = synthetic(150.0, 60.0, 4.4, 0.7, 40, 0.44);
        let v = fit_fringe(&pts).unwrap().visibility;
        for k in [0.01, 3.0, 1e4] {
            let scaled: Vec<_> = pts.iter().map(|&(x, y)| (x, k * y)).collect();
            assert_abs_diff_eq!(fit_fringe(&scaled).unwrap().visibility, v, epsilon = 1e-6);
        }
    }

    #[test]
    fn fixed_period_fit_matches_free_fit() {
        let pts = synthetic(120.0, 30.0, 4.4, 2.0, 40, 0.44);
        let free = fit_fringe(&pts).unwrap();
        let fixed = fit_fringe_with_period(&pts, 4.4).unwrap();
        assert_abs_diff_eq!(free.visibility, fixed.visibility, epsilon = 1e-8);
        assert_abs_diff_eq!(free.phase, fixed.phase, epsilon = 1e-8);
    }

    #[test]
    fn fit_errors() {
        let few = synthetic(1.0, 0.5, 4.4, 0.0, 5, 0.44);
        assert!(matches!(fit_fringe(&few), Err(Error::Fit { .. })));
        let same: Vec<_> = (0..10).map(|i| (1.0, i as f64)).collect();
        assert!(matches!(fit_fringe(&same), Err(Error::Fit { .. })));
        let short = synthetic(100.0, 50.0, 40.0, 0.0, 10, 0.44);
        assert!(fit_fringe(&short).is_err());
    }

    #[test]
    fn distinguishability_extremes() {
        let mut t = CountTable {
            n_ab: 500,
            n_apb: 0,
            ..Default::default()
        };
        assert_abs_diff_eq!(distinguishability(&t).unwrap(), 1.0);
        t.n_apb = 500;
        assert_abs_diff_eq!(distinguishability(&t).unwrap(), 0.0);
        assert!(matches!(
            distinguishability(&CountTable::default()),
            Err(Error::InsufficientStatistics(_))
        ));
    }

    #[test]
    fn constant_data_has_zero_spread() {
        let pts: Vec<_> = (0..20).map(|i| (i as f64 * 0.44, 400.0)).collect();
        assert_abs_diff_eq!(poisson_consistency(&pts).unwrap(), 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(raw_poisson_ratio(&[9.0; 12]).unwrap(), 0.0);
    }

    #[test]
    fn wrap_phase_range() {
        for phi in [-7.0, -PI, 0.0, PI, 3.5, 12.0] {
            let w = wrap_phase(phi);
            assert!(w > -PI && w <= PI);
            assert_abs_diff_eq!((phi - w).rem_euclid(2.0 * PI).min(2.0 * PI - (phi - w).rem_euclid(2.0 * PI)), 0.0, epsilon = 1e-12);
        }
    }
}
