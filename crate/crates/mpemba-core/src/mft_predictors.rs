//! Closed-form asymptotics: steepest-descent initial asymmetry, low-density
//! MFT series, equilibrium Renyi-2 density and operator-spreading decay fits.
//!
//! Series are evaluated at fixed truncation orders, reported with each value.

use crate::error::{invalid, Error, Result};
use crate::fit;
use crate::prelude::*;
use crate::qudit_sim::ProductStateSpec;
use crate::trace::AsymmetryTrace;
use core::f64::consts::{LN_2, PI, SQRT_2};

const SQRT_3: f64 = 1.732_050_807_568_877_2;

/// Value of a truncated series together with its order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesValue {
    pub value: f64,
    pub order: u32,
}

/// `s2(q0) = ln 2 - ln(1 + 4 q0^2)`.
pub fn s2_density(q0: f64) -> Result<f64> {
    if !(q0.abs() <= 0.5) {
        return Err(invalid("q0", format!("charge density {q0} outside [-1/2, 1/2]")));
    }
    Ok((LN_2 - (1.0 + 4.0 * q0 * q0).ln()).max(0.0))
}

/// `1/2 ln(pi N_A) + ln sin(theta)`.
pub fn saddle_initial_asymmetry(n_a: usize, theta: f64) -> f64 {
    0.5 * (PI * n_a as f64).ln() + theta.sin().ln()
}

fn check_theta_order(order: u32) -> Result<()> {
    if !matches!(order, 2 | 4 | 6) {
        return Err(invalid("order", format!("theta order must be 2, 4 or 6, got {order}")));
    }
    Ok(())
}

/// `g(theta) = theta^2/(2 sqrt pi) + (6 sqrt2 - 5) theta^4/(12 sqrt pi)
///  + (-22 - 165 sqrt2 + 180 sqrt3) theta^6/(360 sqrt pi)`.
pub fn mft_g(theta: f64, order: u32) -> Result<SeriesValue> {
    check_theta_order(order)?;
    let t2 = theta * theta;
    let terms = [1.0 / (2.0 * SQRT_PI), (6.0 * SQRT_2 - 5.0) / (12.0 * SQRT_PI), (-22.0 - 165.0 * SQRT_2 + 180.0 * SQRT_3) / (360.0 * SQRT_PI)];
    let value = terms.iter().take(order as usize / 2).enumerate().map(|(k, c)| c * t2.powi(k as i32 + 1)).sum();
    Ok(SeriesValue { value, order })
}

/// Short-time annealed asymmetry
/// `saddle - 2 sqrt(t) g / (sqrt(pi N_A^3) sin^3 theta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShortTimePrediction {
    pub value: f64,
    pub decrement: f64,
    pub order: u32,
    /// `t < N_A`, the regime the expansion assumes.
    pub in_regime: bool,
}

pub fn short_time_asymmetry(t: f64, n_a: usize, theta: f64) -> Result<ShortTimePrediction> {
    if t < 0.0 || n_a == 0 {
        return Err(invalid("t", "need t >= 0 and N_A > 0"));
    }
    let g = mft_g(theta, 6)?;
    let na = n_a as f64;
    let decrement = 2.0 * t.sqrt() * g.value / ((PI * na * na * na).sqrt() * theta.sin().powi(3));
    Ok(ShortTimePrediction { value: saddle_initial_asymmetry(n_a, theta) - decrement, decrement, order: g.order, in_regime: t < na })
}

/// Coefficients of `mu(lambda) = mu0 + sum_k c_k lambda^k / k!` with `c1 = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MuCoefficients {
    pub c2: f64,
    pub c3: f64,
}

pub fn mu_coefficients(rho_wall: f64, rho_bulk: f64) -> MuCoefficients {
    let (w, b) = (rho_wall, rho_bulk);
    let c2 = -(4.0 / SQRT_PI) * ((SQRT_2 - 1.0) * (w * w + b * b) + (3.0 - 2.0 * SQRT_2) * w * b);
    let c3 = 4.0 * (w - b) / (3.0 * SQRT_PI) * (9.0 * (1.0 - SQRT_2) * (w + b - 2.0 * w * b) - 2.0 * (9.0 * SQRT_2 - 8.0 * SQRT_3) * (w - b) * (w - b));
    MuCoefficients { c2, c3 }
}

/// `mu0 = 2 (rho_w (e^l - 1) + rho_b (e^-l - 1)) / sqrt pi` plus the `c_k`
/// corrections up to `lambda^order`, `order` in {0, 2, 3}.
pub fn mft_mu(lambda: f64, rho_wall: f64, rho_bulk: f64, order: u32) -> Result<SeriesValue> {
    if !matches!(order, 0 | 2 | 3) {
        return Err(invalid("order", format!("lambda order must be 0, 2 or 3, got {order}")));
    }
    let mu0 = 2.0 * (rho_wall * (lambda.exp() - 1.0) + rho_bulk * ((-lambda).exp() - 1.0)) / SQRT_PI;
    let c = mu_coefficients(rho_wall, rho_bulk);
    let mut value = mu0;
    if order >= 2 {
        value += c.c2 * lambda * lambda / 2.0;
    }
    if order >= 3 {
        value += c.c3 * lambda.powi(3) / 6.0;
    }
    Ok(SeriesValue { value, order })
}

/// Purity rate `4 mu(ln cos theta; 1/2, 0)` expanded in theta:
/// `-2 theta^2/sqrt pi + (4 - 3 sqrt2) theta^4/(6 sqrt pi) + (15 sqrt2 - 10 sqrt3 - 4) theta^6/(45 sqrt pi)`.
pub fn purity_rate_series(theta: f64, order: u32) -> Result<SeriesValue> {
    check_theta_order(order)?;
    let t2 = theta * theta;
    let terms = [-2.0 / SQRT_PI, (4.0 - 3.0 * SQRT_2) / (6.0 * SQRT_PI), (15.0 * SQRT_2 - 10.0 * SQRT_3 - 4.0) / (45.0 * SQRT_PI)];
    let value = terms.iter().take(order as usize / 2).enumerate().map(|(k, c)| c * t2.powi(k as i32 + 1)).sum();
    Ok(SeriesValue { value, order })
}

/// Magnitude of the `theta^6` term of [`purity_rate_series`].
pub fn purity_rate_remainder(theta: f64) -> f64 {
    ((15.0 * SQRT_2 - 10.0 * SQRT_3 - 4.0) / (45.0 * SQRT_PI) * theta.powi(6)).abs()
}

/// Low-density coefficient table at one tilt.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MftSeries {
    pub theta: f64,
    pub order: u32,
    pub lambda: f64,
    pub mu0: f64,
    pub c2: f64,
    pub c3: f64,
    pub g: f64,
}

impl MftSeries {
    pub fn new(theta: f64, order: u32) -> Result<Self> {
        let lambda = theta.cos().ln();
        let c = mu_coefficients(0.5, 0.0);
        Ok(MftSeries { theta, order, lambda, mu0: mft_mu(lambda, 0.5, 0.0, 0)?.value, c2: c.c2, c3: c.c3, g: mft_g(theta, order)?.value })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecayModel {
    /// `A exp(-a sqrt t)`
    Diffusive,
    /// `A exp(-gamma t)`
    Ballistic,
}

impl DecayModel {
    pub fn as_str(self) -> &'static str {
        match self {
            DecayModel::Diffusive => "diffusive",
            DecayModel::Ballistic => "ballistic",
        }
    }

    fn abscissa(self, t: f64) -> f64 {
        match self {
            DecayModel::Diffusive => t.sqrt(),
            DecayModel::Ballistic => t,
        }
    }

    pub fn eval(self, amplitude: f64, rate: f64, t: f64) -> f64 {
        amplitude * (-rate * self.abscissa(t)).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub model: DecayModel,
    pub amplitude: f64,
    pub rate: f64,
    pub amplitude_se: f64,
    pub rate_se: f64,
    /// On log-values, equal weights.
    pub r2: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFitResult {
    pub best: DecayFit,
    pub diffusive: DecayFit,
    pub ballistic: DecayFit,
    /// `a / s2`, i.e. `alpha sqrt(D)` of `l_t = alpha sqrt(D t)`.
    pub alpha_sqrt_d: f64,
    /// Diffusive amplitude over `theta^2 / 2`.
    pub amplitude_ratio: f64,
}

pub const DEFAULT_TRANSIENT: usize = 2;
pub const MIN_DECAY_POINTS: usize = 8;

fn fit_model(model: DecayModel, t: &[f64], y: &[f64]) -> Result<DecayFit> {
    let x: Vec<f64> = t.iter().map(|&s| model.abscissa(s)).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let f = fit::linear(&x, &ly)?;
    let amplitude = f.intercept.exp();
    Ok(DecayFit { model, amplitude, rate: -f.slope, amplitude_se: amplitude * f.intercept_se, rate_se: f.slope_se, r2: f.r2, points: t.len() })
}

/// Fits both decay models to `trace` on `t >= t_min` and keeps the one with the
/// larger R^2 on log-values.
pub fn predict_splus_decay(trace: &AsymmetryTrace, s2: f64, t_min: usize) -> Result<DecayFitResult> {
    let (t, y): (Vec<f64>, Vec<f64>) = trace.times.iter().zip(&trace.values).filter(|(&s, _)| s >= t_min).map(|(&s, &v)| (s as f64, v)).unzip();
    if t.len() < MIN_DECAY_POINTS {
        return Err(Error::Fit(format!("need {MIN_DECAY_POINTS} points with t >= {t_min}, got {}", t.len())));
    }
    if y.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::Fit("decay fit needs positive values".into()));
    }
    let diffusive = fit_model(DecayModel::Diffusive, &t, &y)?;
    let ballistic = fit_model(DecayModel::Ballistic, &t, &y)?;
    if !(diffusive.r2.is_finite() && ballistic.r2.is_finite()) {
        return Err(Error::Fit("non-finite goodness of fit".into()));
    }
    let best = if diffusive.r2 >= ballistic.r2 { diffusive } else { ballistic };
    let theta = trace.meta.theta;
    Ok(DecayFitResult {
        best,
        diffusive,
        ballistic,
        alpha_sqrt_d: if s2 > 0.0 { diffusive.rate / s2 } else { f64::NAN },
        amplitude_ratio: diffusive.amplitude / (theta * theta / 2.0),
    })
}

fn state_s2(spec: &ProductStateSpec) -> Result<f64> {
    s2_density(spec.q0())
}

/// `N_A theta^2 exp((N_A - l_t) s2(q0))` with `l_t = alpha sqrt(D t)`.
pub fn predict_asymmetry_envelope(n_a: usize, spec: &ProductStateSpec, t: f64, alpha: f64, d: f64) -> Result<f64> {
    if !(alpha > 0.0 && d > 0.0 && t >= 0.0) {
        return Err(invalid("alpha", "need alpha > 0, D > 0 and t >= 0"));
    }
    let na = n_a as f64;
    let l = alpha * (d * t).sqrt();
    Ok(na * spec.theta * spec.theta * ((na - l) * state_s2(spec)?).exp())
}

/// Time at which the envelopes of `spec1` (smaller tilt) and `spec2` meet:
/// `(l_t - N_A)(s2(2) - s2(1)) = 2 ln(theta2/theta1)`; `None` when the
/// densities coincide or have the wrong order.
pub fn envelope_crossing_time(n_a: usize, spec1: &ProductStateSpec, spec2: &ProductStateSpec, alpha: f64, d: f64) -> Result<Option<f64>> {
    if !(alpha > 0.0 && d > 0.0) {
        return Err(invalid("alpha", "need alpha > 0 and D > 0"));
    }
    if !(0.0 < spec1.theta && spec1.theta < spec2.theta) {
        return Err(invalid("theta", "need 0 < theta1 < theta2"));
    }
    let ds = state_s2(spec2)? - state_s2(spec1)?;
    if !(ds > 1e-14) {
        return Ok(None);
    }
    let l = n_a as f64 + 2.0 * (spec2.theta / spec1.theta).ln() / ds;
    Ok(Some(l * l / (alpha * alpha * d)))
}
