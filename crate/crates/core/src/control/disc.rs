//! The falling rolling disc of unit radius.
//!
//! State `(x, y, φ, θ, ψ)`: contact point and Euler angles. Controls are the
//! body-axis rates `u = φ̇ sin θ`, `v = θ̇`, `w = φ̇ cos θ + ψ̇`:
//!
//! ```text
//! ẋ = (u cot θ − w) cos φ      φ̇ = u csc θ      ψ̇ = −u cot θ + w
//! ẏ = (u cot θ − w) sin φ      θ̇ = v
//! ```
//!
//! Starting from the identity, the STM keeps the pattern
//!
//! ```text
//! [1 0 A C 0]
//! [0 1 B D 0]
//! [0 0 1 E 0]
//! [0 0 0 1 0]
//! [0 0 0 F 1]
//! ```
//!
//! with `Ȧ = −(u cot θ − w) sin φ`, `Ḃ = (u cot θ − w) cos φ`,
//! `Ė = −u cot θ csc θ`, `Ḟ = u csc² θ`,
//! `Ċ = Ȧ·E − u csc² θ cos φ` and `Ḋ = Ḃ·E − u csc² θ sin φ`.
//! Controls are linearized as open-loop signals along the nominal path.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{constant_signal, control_settings, Signal};
use crate::integrator::{integrate, IntegratorStats};
use crate::propagation::SampleSpec;
use crate::{Error, Result};

/// Integration aborts once `|sin θ|` drops below this.
pub const SIN_THETA_GUARD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscState {
    pub x: f64,
    pub y: f64,
    pub phi: f64,
    pub theta: f64,
    pub psi: f64,
}

impl DiscState {
    pub fn new(x: f64, y: f64, phi: f64, theta: f64, psi: f64) -> Result<Self> {
        let s = Self { x, y, phi, theta, psi };
        if s.to_array().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("disc state".into()));
        }
        if s.theta.sin().abs() < SIN_THETA_GUARD {
            return Err(Error::ThetaSingularity {
                t: 0.0,
                sin_theta: s.theta.sin(),
            });
        }
        Ok(s)
    }

    pub fn to_array(&self) -> [f64; 5] {
        [self.x, self.y, self.phi, self.theta, self.psi]
    }

    pub fn from_slice(v: &[f64]) -> Self {
        Self {
            x: v[0],
            y: v[1],
            phi: v[2],
            theta: v[3],
            psi: v[4],
        }
    }
}

pub type DiscControlFn = Arc<dyn Fn(f64, &DiscState) -> [f64; 3] + Send + Sync>;

/// Controls `(u, v, w)` as functions of time and, for feedback laws, of
/// the nominal state.
#[derive(Clone)]
pub struct DiscControl {
    pub label: String,
    pub law: DiscControlFn,
}

impl std::fmt::Debug for DiscControl {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DiscControl").field("label", &self.label).finish_non_exhaustive()
    }
}

impl DiscControl {
    pub fn zero() -> Self {
        Self::open_loop(constant_signal(0.0), constant_signal(0.0), constant_signal(0.0)).labeled("zero")
    }

    pub fn open_loop(u: Signal, v: Signal, w: Signal) -> Self {
        Self {
            label: "open_loop".into(),
            law: Arc::new(move |t, _| [u(t), v(t), w(t)]),
        }
    }

    /// `w = u cot θ`, which keeps the contact point from rolling.
    pub fn compliant(u: Signal, v: Signal) -> Self {
        Self {
            label: "compliant".into(),
            law: Arc::new(move |t, s| {
                let ut = u(t);
                [ut, v(t), ut * s.theta.cos() / s.theta.sin()]
            }),
        }
    }

    pub fn labeled(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn eval(&self, t: f64, s: &DiscState) -> [f64; 3] {
        (self.law)(t, s)
    }
}

fn check_theta(t: f64, theta: f64) -> Result<(f64, f64)> {
    check_theta_side(t, theta, 0.0)
}

/// Also rejects a `sin θ` whose sign differs from `side`, which catches a
/// step that jumps across the singular set.
fn check_theta_side(t: f64, theta: f64, side: f64) -> Result<(f64, f64)> {
    let (s, c) = theta.sin_cos();
    if s.abs() < SIN_THETA_GUARD || !s.is_finite() || s * side < 0.0 {
        return Err(Error::ThetaSingularity { t, sin_theta: s });
    }
    Ok((s, c))
}

/// `q̇ = f(q, u)`.
pub fn disc_rhs(t: f64, s: &DiscState, [u, v, w]: [f64; 3]) -> Result<[f64; 5]> {
    let (sn, cs) = check_theta(t, s.theta)?;
    let roll = u * cs / sn - w;
    let (sp, cp) = s.phi.sin_cos();
    Ok([roll * cp, roll * sp, u / sn, v, -u * cs / sn + w])
}

/// `∂f/∂q` with the controls held fixed.
pub fn disc_jacobian(t: f64, s: &DiscState, [u, _, w]: [f64; 3]) -> Result<DMatrix<f64>> {
    let (sn, cs) = check_theta(t, s.theta)?;
    let cot = cs / sn;
    let csc2 = 1.0 / (sn * sn);
    let roll = u * cot - w;
    let (sp, cp) = s.phi.sin_cos();
    let mut j = DMatrix::zeros(5, 5);
    j[(0, 2)] = -roll * sp;
    j[(0, 3)] = -u * csc2 * cp;
    j[(1, 2)] = roll * cp;
    j[(1, 3)] = -u * csc2 * sp;
    j[(2, 3)] = -u * cot / sn;
    j[(4, 3)] = u * csc2;
    Ok(j)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DiscStmIntegrals {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    pub f: f64,
}

impl DiscStmIntegrals {
    pub fn from_slice(v: &[f64]) -> Self {
        Self {
            a: v[0],
            b: v[1],
            c: v[2],
            d: v[3],
            e: v[4],
            f: v[5],
        }
    }

    /// The STM assembled from the six integrals.
    pub fn stm(&self) -> DMatrix<f64> {
        let mut phi = DMatrix::identity(5, 5);
        phi[(0, 2)] = self.a;
        phi[(0, 3)] = self.c;
        phi[(1, 2)] = self.b;
        phi[(1, 3)] = self.d;
        phi[(2, 3)] = self.e;
        phi[(4, 3)] = self.f;
        phi
    }
}

/// `A·D − B·C`, the area factor of the `(φ, θ)` uncertainty shadow on the
/// contact plane.
pub fn disc_projection_area(k: &DiscStmIntegrals) -> f64 {
    k.a * k.d - k.b * k.c
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscSample {
    pub t: f64,
    pub state: DiscState,
    pub integrals: DiscStmIntegrals,
    /// STM from direct integration of `Φ̇ = (∂f/∂q)·Φ`.
    pub phi_direct: DMatrix<f64>,
}

impl DiscSample {
    pub fn projection_area(&self) -> f64 {
        disc_projection_area(&self.integrals)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscTrajectory {
    pub control: String,
    pub samples: Vec<DiscSample>,
    pub stats: IntegratorStats,
    pub ad_minus_bc_max: f64,
    /// `max |A|, |B|` over the samples.
    pub ab_max: f64,
    /// Max-abs difference between assembled and directly integrated STMs.
    pub assembled_mismatch: f64,
}

const N_STATE: usize = 5;
const N_INT: usize = 6;
const N_AUG: usize = N_STATE + N_INT + 25;

/// Co-integrates the state, the six STM integrals and the full STM.
pub fn disc_propagate(
    ctrl: &DiscControl,
    q0: &DiscState,
    t_span: (f64, f64),
    samples: &SampleSpec,
) -> Result<DiscTrajectory> {
    let (t0, t1) = t_span;
    if !(t1 != t0) {
        return Err(Error::InvalidArgument("disc time span has zero length".into()));
    }
    check_theta(t0, q0.theta)?;
    let times = samples.times(t0, t1)?;
    let law = ctrl.law.clone();
    let side = q0.theta.sin().signum();
    let mut rhs = move |t: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
        let s = DiscState::from_slice(&y[..N_STATE]);
        check_theta_side(t, s.theta, side)?;
        let c = law(t, &s);
        let f = disc_rhs(t, &s, c)?;
        dy[..N_STATE].copy_from_slice(&f);

        let (sn, cs) = s.theta.sin_cos();
        let [u, _, w] = c;
        let roll = u * cs / sn - w;
        let csc2 = 1.0 / (sn * sn);
        let (sp, cp) = s.phi.sin_cos();
        let e = y[N_STATE + 4];
        let da = -roll * sp;
        let db = roll * cp;
        let k = &mut dy[N_STATE..N_STATE + N_INT];
        k[0] = da;
        k[1] = db;
        k[2] = da * e - u * csc2 * cp;
        k[3] = db * e - u * csc2 * sp;
        k[4] = -u * cs / sn / sn;
        k[5] = u * csc2;

        let jac = disc_jacobian(t, &s, c)?;
        let phi = DMatrix::from_row_slice(5, 5, &y[N_STATE + N_INT..]);
        let dphi = jac * phi;
        for r in 0..5 {
            for col in 0..5 {
                dy[N_STATE + N_INT + 5 * r + col] = dphi[(r, col)];
            }
        }
        Ok(())
    };
    let mut y0 = vec![0.0; N_AUG];
    y0[..N_STATE].copy_from_slice(&q0.to_array());
    for i in 0..5 {
        y0[N_STATE + N_INT + 6 * i] = 1.0;
    }
    let mut outputs = Vec::with_capacity(times.len() + 1);
    outputs.push(t0);
    outputs.extend_from_slice(&times);
    let (ys, stats) = integrate(&mut rhs, t0, &y0, &outputs, &control_settings())?;
    let samples: Vec<DiscSample> = outputs
        .iter()
        .zip(ys)
        .map(|(&t, y)| DiscSample {
            t,
            state: DiscState::from_slice(&y[..N_STATE]),
            integrals: DiscStmIntegrals::from_slice(&y[N_STATE..N_STATE + N_INT]),
            phi_direct: DMatrix::from_row_slice(5, 5, &y[N_STATE + N_INT..]),
        })
        .collect();
    let ad_minus_bc_max = samples.iter().map(|s| s.projection_area().abs()).fold(0.0, f64::max);
    let ab_max = samples
        .iter()
        .map(|s| s.integrals.a.abs().max(s.integrals.b.abs()))
        .fold(0.0, f64::max);
    let assembled_mismatch = samples
        .iter()
        .map(|s| (s.integrals.stm() - &s.phi_direct).amax())
        .fold(0.0, f64::max);
    Ok(DiscTrajectory {
        control: ctrl.label.clone(),
        samples,
        stats,
        ad_minus_bc_max,
        ab_max,
        assembled_mismatch,
    })
}

/// Propagates the state alone, for finite-difference checks of the STM.
pub fn disc_flow(ctrl: &DiscControl, q0: &DiscState, t_span: (f64, f64)) -> Result<DiscState> {
    let law = ctrl.law.clone();
    let side = q0.theta.sin().signum();
    let mut rhs = move |t: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
        let s = DiscState::from_slice(y);
        check_theta_side(t, s.theta, side)?;
        dy.copy_from_slice(&disc_rhs(t, &s, law(t, &s))?);
        Ok(())
    };
    let (ys, _) = integrate(&mut rhs, t_span.0, &q0.to_array(), &[t_span.1], &control_settings())?;
    Ok(DiscState::from_slice(&ys[0]))
}
