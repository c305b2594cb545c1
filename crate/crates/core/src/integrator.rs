//! Explicit Runge–Kutta integration of first-order systems.
//!
//! Two methods: the Dormand–Prince 5(4) embedded pair with PI step control,
//! and the classical fixed-step fourth-order scheme for bit-stable runs.
//! Both land exactly on every requested output time.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    DormandPrince45,
    ClassicalRk4,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorSettings {
    pub method: Method,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Upper bound on |h| for the adaptive method.
    pub max_step: Option<f64>,
    /// Step for the fixed-step method.
    pub fixed_step: f64,
    pub max_steps: usize,
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        Self {
            method: Method::DormandPrince45,
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_step: None,
            fixed_step: 1e-3,
            max_steps: 10_000_000,
        }
    }
}

impl IntegratorSettings {
    pub fn adaptive(rel_tol: f64, abs_tol: f64) -> Self {
        Self {
            rel_tol,
            abs_tol,
            ..Self::default()
        }
    }

    pub fn fixed(step: f64) -> Self {
        Self {
            method: Method::ClassicalRk4,
            fixed_step: step,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.method {
            Method::DormandPrince45 => {
                if !(self.rel_tol > 0.0 && self.rel_tol.is_finite()) || !(self.abs_tol >= 0.0) {
                    return Err(Error::InvalidArgument(
                        "rel_tol must be positive and abs_tol non-negative".into(),
                    ));
                }
                if self.rel_tol < 1e-15 {
                    return Err(Error::ToleranceNotAchievable(format!(
                        "rel_tol {:e} is below double precision",
                        self.rel_tol
                    )));
                }
                if let Some(h) = self.max_step {
                    if !(h > 0.0) {
                        return Err(Error::InvalidArgument("max_step must be positive".into()));
                    }
                }
            }
            Method::ClassicalRk4 => {
                if !(self.fixed_step > 0.0 && self.fixed_step.is_finite()) {
                    return Err(Error::InvalidArgument("fixed_step must be positive".into()));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct IntegratorStats {
    pub steps: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
    /// Relative tolerance the run was asked for (0 for fixed-step runs).
    pub final_tolerance: f64,
}

/// Right-hand side `dy/dt = f(t, y)`, written into the third argument.
pub trait Rhs {
    fn eval(&mut self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()>;
}

impl<F> Rhs for F
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    fn eval(&mut self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        self(t, y, dy)
    }
}

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
// fifth-order weights minus embedded fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

// PI controller constants (Hairer & Wanner, DOPRI5 defaults).
const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const EXPO1: f64 = 0.2 - BETA * 0.75;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

/// Integrates `y' = f(t, y)` from `(t0, y0)` and returns the state at each
/// of `outputs`, which must be strictly monotone in the direction of
/// integration and lie beyond `t0`. An output equal to `t0` returns `y0`.
pub fn integrate<R: Rhs>(
    rhs: &mut R,
    t0: f64,
    y0: &[f64],
    outputs: &[f64],
    settings: &IntegratorSettings,
) -> Result<(Vec<Vec<f64>>, IntegratorStats)> {
    settings.validate()?;
    if y0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("initial state".into()));
    }
    let Some(&t_last) = outputs.last() else {
        return Ok((Vec::new(), IntegratorStats::default()));
    };
    let dir = if t_last >= t0 { 1.0 } else { -1.0 };
    let mut prev = t0;
    for &t in outputs {
        if !t.is_finite() || (t - prev) * dir < 0.0 {
            return Err(Error::InvalidArgument(
                "output times must be finite and monotone from t0".into(),
            ));
        }
        prev = t;
    }

    let mut stepper = Stepper::new(y0.len());
    let mut stats = IntegratorStats {
        final_tolerance: match settings.method {
            Method::DormandPrince45 => settings.rel_tol,
            Method::ClassicalRk4 => 0.0,
        },
        ..Default::default()
    };
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut out = Vec::with_capacity(outputs.len());

    match settings.method {
        Method::ClassicalRk4 => {
            let h_nominal = settings.fixed_step * dir;
            for &target in outputs {
                while (target - t) * dir > 0.0 {
                    let remaining = target - t;
                    // Last partial step lands exactly on the target.
                    let (h, t_next) = if (remaining - h_nominal) * dir <= 1e-12 * h_nominal.abs() {
                        (remaining, target)
                    } else {
                        (h_nominal, t + h_nominal)
                    };
                    stepper.rk4_step(rhs, t, &y, h, &mut stats)?;
                    std::mem::swap(&mut y, &mut stepper.y_new);
                    t = t_next;
                    stats.steps += 1;
                    if stats.steps > settings.max_steps {
                        return Err(Error::ToleranceNotAchievable(format!(
                            "exceeded {} steps",
                            settings.max_steps
                        )));
                    }
                    check_finite(&y, t)?;
                }
                out.push(y.clone());
            }
        }
        Method::DormandPrince45 => {
            rhs.eval(t, &y, &mut stepper.k1)?;
            stats.rhs_evals += 1;
            let span = (t_last - t0).abs();
            let max_step = settings.max_step.unwrap_or(span.max(f64::MIN_POSITIVE));
            let mut h = initial_step(rhs, t, &y, &mut stepper, settings, dir, max_step, &mut stats)?;
            let mut err_old: f64 = 1e-4;
            let mut last_rejected = false;
            for &target in outputs {
                while (target - t) * dir > 0.0 {
                    let remaining = target - t;
                    let clipped = h.abs() >= remaining.abs();
                    let h_try = if clipped { remaining } else { h };
                    if h_try.abs() < 1e-14 * t.abs().max(1.0) && !clipped {
                        return Err(Error::StepSizeUnderflow { t, h: h_try });
                    }
                    stepper.dp_step(rhs, t, &y, h_try, &mut stats)?;
                    let err = stepper.error_norm(&y, settings);
                    if !err.is_finite() {
                        // Treat a blown-up trial as a rejection with maximal shrink.
                        stats.rejected += 1;
                        h = h_try * FAC_MIN;
                        last_rejected = true;
                        continue;
                    }
                    let fac11 = err.powf(EXPO1);
                    if err <= 1.0 {
                        let mut fac = fac11 / err_old.powf(BETA);
                        fac = (fac / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
                        let mut h_new = h_try / fac;
                        if last_rejected {
                            h_new = h_new.abs().min(h_try.abs()) * dir;
                        }
                        err_old = err.max(1e-4);
                        t = if clipped { target } else { t + h_try };
                        std::mem::swap(&mut y, &mut stepper.y_new);
                        // FSAL: the last stage is the derivative at the new point.
                        std::mem::swap(&mut stepper.k1, &mut stepper.k7);
                        check_finite(&y, t)?;
                        stats.steps += 1;
                        last_rejected = false;
                        // A clipped step says nothing about the natural step size.
                        h = if clipped { h.abs().max(h_new.abs()) * dir } else { h_new };
                        h = h.abs().min(max_step) * dir;
                    } else {
                        stats.rejected += 1;
                        last_rejected = true;
                        h = h_try / (fac11 / SAFETY).min(1.0 / FAC_MIN);
                    }
                    if stats.steps + stats.rejected > settings.max_steps {
                        return Err(Error::ToleranceNotAchievable(format!(
                            "exceeded {} steps",
                            settings.max_steps
                        )));
                    }
                }
                out.push(y.clone());
            }
        }
    }
    Ok((out, stats))
}

fn check_finite(y: &[f64], t: f64) -> Result<()> {
    if y.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(format!("state at t = {t}")))
    }
}

#[allow(clippy::too_many_arguments)]
fn initial_step<R: Rhs>(
    rhs: &mut R,
    t: f64,
    y: &[f64],
    st: &mut Stepper,
    settings: &IntegratorSettings,
    dir: f64,
    max_step: f64,
    stats: &mut IntegratorStats,
) -> Result<f64> {
    let scale = |v: f64| settings.abs_tol + settings.rel_tol * v.abs();
    let rms = |xs: &mut dyn Iterator<Item = f64>, n: usize| (xs.map(|x| x * x).sum::<f64>() / n as f64).sqrt();
    let n = y.len().max(1);
    let d0 = rms(&mut y.iter().map(|&v| v / scale(v)), n);
    let d1 = rms(&mut y.iter().zip(&st.k1).map(|(&v, &f)| f / scale(v)), n);
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h0 = h0.min(max_step);
    for i in 0..y.len() {
        st.tmp[i] = y[i] + dir * h0 * st.k1[i];
    }
    rhs.eval(t + dir * h0, &st.tmp, &mut st.k2)?;
    stats.rhs_evals += 1;
    let d2 = rms(
        &mut y
            .iter()
            .enumerate()
            .map(|(i, &v)| (st.k2[i] - st.k1[i]) / scale(v)),
        n,
    ) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    Ok((100.0 * h0).min(h1).min(max_step) * dir)
}

struct Stepper {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    k5: Vec<f64>,
    k6: Vec<f64>,
    k7: Vec<f64>,
    tmp: Vec<f64>,
    y_new: Vec<f64>,
}

impl Stepper {
    fn new(n: usize) -> Self {
        let z = || vec![0.0; n];
        Self {
            k1: z(),
            k2: z(),
            k3: z(),
            k4: z(),
            k5: z(),
            k6: z(),
            k7: z(),
            tmp: z(),
            y_new: z(),
        }
    }

    fn dp_step<R: Rhs>(&mut self, rhs: &mut R, t: f64, y: &[f64], h: f64, stats: &mut IntegratorStats) -> Result<()> {
        let n = y.len();
        for i in 0..n {
            self.tmp[i] = y[i] + h * A21 * self.k1[i];
        }
        rhs.eval(t + C2 * h, &self.tmp, &mut self.k2)?;
        for i in 0..n {
            self.tmp[i] = y[i] + h * (A31 * self.k1[i] + A32 * self.k2[i]);
        }
        rhs.eval(t + C3 * h, &self.tmp, &mut self.k3)?;
        for i in 0..n {
            self.tmp[i] = y[i] + h * (A41 * self.k1[i] + A42 * self.k2[i] + A43 * self.k3[i]);
        }
        rhs.eval(t + C4 * h, &self.tmp, &mut self.k4)?;
        for i in 0..n {
            self.tmp[i] =
                y[i] + h * (A51 * self.k1[i] + A52 * self.k2[i] + A53 * self.k3[i] + A54 * self.k4[i]);
        }
        rhs.eval(t + C5 * h, &self.tmp, &mut self.k5)?;
        for i in 0..n {
            self.tmp[i] = y[i]
                + h * (A61 * self.k1[i]
                    + A62 * self.k2[i]
                    + A63 * self.k3[i]
                    + A64 * self.k4[i]
                    + A65 * self.k5[i]);
        }
        rhs.eval(t + h, &self.tmp, &mut self.k6)?;
        for i in 0..n {
            self.y_new[i] = y[i]
                + h * (A71 * self.k1[i]
                    + A73 * self.k3[i]
                    + A74 * self.k4[i]
                    + A75 * self.k5[i]
                    + A76 * self.k6[i]);
        }
        rhs.eval(t + h, &self.y_new, &mut self.k7)?;
        stats.rhs_evals += 6;
        // k2 now holds the error estimate.
        for i in 0..n {
            self.k2[i] = h
                * (E1 * self.k1[i]
                    + E3 * self.k3[i]
                    + E4 * self.k4[i]
                    + E5 * self.k5[i]
                    + E6 * self.k6[i]
                    + E7 * self.k7[i]);
        }
        Ok(())
    }

    fn error_norm(&self, y: &[f64], settings: &IntegratorSettings) -> f64 {
        let n = y.len().max(1);
        let sum: f64 = y
            .iter()
            .zip(&self.y_new)
            .zip(&self.k2)
            .map(|((&a, &b), &e)| {
                let sc = settings.abs_tol + settings.rel_tol * a.abs().max(b.abs());
                (e / sc).powi(2)
            })
            .sum();
        (sum / n as f64).sqrt()
    }

    fn rk4_step<R: Rhs>(&mut self, rhs: &mut R, t: f64, y: &[f64], h: f64, stats: &mut IntegratorStats) -> Result<()> {
        let n = y.len();
        rhs.eval(t, y, &mut self.k1)?;
        for i in 0..n {
            self.tmp[i] = y[i] + 0.5 * h * self.k1[i];
        }
        rhs.eval(t + 0.5 * h, &self.tmp, &mut self.k2)?;
        for i in 0..n {
            self.tmp[i] = y[i] + 0.5 * h * self.k2[i];
        }
        rhs.eval(t + 0.5 * h, &self.tmp, &mut self.k3)?;
        for i in 0..n {
            self.tmp[i] = y[i] + h * self.k3[i];
        }
        rhs.eval(t + h, &self.tmp, &mut self.k4)?;
        for i in 0..n {
            self.y_new[i] = y[i] + h / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
        stats.rhs_evals += 4;
        Ok(())
    }
}
