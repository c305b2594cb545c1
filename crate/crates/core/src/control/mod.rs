//! Open-loop control case studies: the kinematic Heisenberg system and the
//! falling rolling disc.
//!
//! Neither system is Hamiltonian. Both are driven by time signals and use
//! the same Runge–Kutta integrator as [`crate::propagation`].

pub mod disc;
pub mod heisenberg;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::integrator::IntegratorSettings;
use crate::{Error, Result};

/// Tolerances used for all control quadratures.
pub fn control_settings() -> IntegratorSettings {
    IntegratorSettings::adaptive(1e-12, 1e-14)
}

/// A scalar control signal `t ↦ u(t)`.
pub type Signal = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

pub fn constant_signal(c: f64) -> Signal {
    Arc::new(move |_| c)
}

/// Piecewise-linear signal through `(times[i], values[i])`, held constant
/// outside the table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tabulated {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl Tabulated {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(Error::InvalidArgument(
                "tabulated control needs matching, nonempty time and value lists".into(),
            ));
        }
        if times.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("tabulated control".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("tabulated control times must increase".into()));
        }
        Ok(Self { times, values })
    }

    pub fn eval(&self, t: f64) -> f64 {
        let ts = &self.times;
        if t <= ts[0] {
            return self.values[0];
        }
        if t >= ts[ts.len() - 1] {
            return self.values[ts.len() - 1];
        }
        let i = ts.partition_point(|&x| x <= t) - 1;
        let w = (t - ts[i]) / (ts[i + 1] - ts[i]);
        self.values[i] * (1.0 - w) + self.values[i + 1] * w
    }

    pub fn into_signal(self) -> Signal {
        Arc::new(move |t| self.eval(t))
    }
}

/// `c₀ + Σ aₖ cos(2πkt) + bₖ sin(2πkt)`, `k = 1…`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fourier {
    pub c0: f64,
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

impl Fourier {
    pub fn eval(&self, t: f64) -> f64 {
        let w = 2.0 * std::f64::consts::PI * t;
        let mut s = self.c0;
        for (k, a) in self.cos.iter().enumerate() {
            s += a * ((k + 1) as f64 * w).cos();
        }
        for (k, b) in self.sin.iter().enumerate() {
            s += b * ((k + 1) as f64 * w).sin();
        }
        s
    }

    /// Random coefficients in `[−scale, scale]` up to `modes` harmonics.
    pub fn random<R: rand::Rng + ?Sized>(rng: &mut R, modes: usize, scale: f64) -> Self {
        let mut draw = || rng.random_range(-scale..=scale);
        Self {
            c0: draw(),
            cos: (0..modes).map(|_| draw()).collect(),
            sin: (0..modes).map(|_| draw()).collect(),
        }
    }

    pub fn into_signal(self) -> Signal {
        Arc::new(move |t| self.eval(t))
    }
}
