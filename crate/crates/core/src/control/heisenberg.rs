//! The kinematic Heisenberg system `ẋ = u, ẏ = v, ż = y·u − x·v`.
//!
//! With `μ = ∫u`, `ν = ∫v` and `α = ∫(ν·u − μ·v)` the flow is
//! `x = X + μ`, `y = Y + ν`, `z = Y·μ − X·ν + α`, and the STM depends only
//! on the displacement `(x − X, y − Y)`.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{constant_signal, control_settings, Fourier, Signal, Tabulated};
use crate::integrator::integrate;
use crate::invariants::gram_determinant;
use crate::{Error, Result};

/// Closed-form `t ↦ (μ, ν, α)`.
pub type PathFn = Arc<dyn Fn(f64) -> [f64; 3] + Send + Sync>;

#[derive(Clone)]
pub struct HeisenbergControl {
    pub label: String,
    pub u: Signal,
    pub v: Signal,
    /// A closed-form `(μ, ν, α)` path, when one is known.
    pub stated: Option<PathFn>,
}

impl std::fmt::Debug for HeisenbergControl {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HeisenbergControl")
            .field("label", &self.label)
            .field("stated", &self.stated.is_some())
            .finish_non_exhaustive()
    }
}

/// `(μ, ν, α)` at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeisenbergIntegrals {
    pub t: f64,
    pub mu: f64,
    pub nu: f64,
    pub alpha: f64,
}

impl HeisenbergIntegrals {
    pub fn flow(&self, x0: f64, y0: f64) -> [f64; 3] {
        heisenberg_flow(x0, y0, self.mu, self.nu, self.alpha)
    }
}

impl HeisenbergControl {
    pub fn new(label: impl Into<String>, u: Signal, v: Signal) -> Self {
        Self {
            label: label.into(),
            u,
            v,
            stated: None,
        }
    }

    pub fn zero() -> Self {
        let mut c = Self::new("zero", constant_signal(0.0), constant_signal(0.0));
        c.stated = Some(Arc::new(|_| [0.0; 3]));
        c
    }

    pub fn constant(u: f64, v: f64) -> Self {
        let mut c = Self::new("constant", constant_signal(u), constant_signal(v));
        // μ = ut and ν = vt, so νu − μv vanishes identically.
        c.stated = Some(Arc::new(move |t| [u * t, v * t, 0.0]));
        c
    }

    /// `u = μ̇`, `v = ν̇` for the Bloch path
    /// `μ = sin(2πt)/√(2π)`, `ν = (1 − cos 2πt)/√(2π)`, with the quoted
    /// `α = t(1 − sin 2πt)` attached as the stated path. Integrating the
    /// signals gives `α(1) = −1` instead; see [`heisenberg_summary`].
    pub fn bloch() -> Self {
        let amp = (2.0 * PI).sqrt();
        let mut c = Self::new(
            "bloch",
            Arc::new(move |t| amp * (2.0 * PI * t).cos()),
            Arc::new(move |t| amp * (2.0 * PI * t).sin()),
        );
        c.stated = Some(Arc::new(bloch_stated));
        c
    }

    /// Closed circle traversed `turns` times in `[0, 1]`, radius
    /// `1/√(2π·turns)`, starting at the origin. Its signed area gives
    /// `α(1) = +1` when clockwise and `−1` otherwise.
    pub fn circle(turns: u32, clockwise: bool) -> Result<Self> {
        if turns == 0 {
            return Err(Error::InvalidArgument("a circle control needs at least one turn".into()));
        }
        let m = turns as f64;
        let w = 2.0 * PI * m;
        let r = 1.0 / w.sqrt();
        let s = if clockwise { -1.0 } else { 1.0 };
        let mut c = Self::new(
            format!("circle_{turns}_{}", if clockwise { "cw" } else { "ccw" }),
            Arc::new(move |t| w * r * (w * t).cos()),
            Arc::new(move |t| s * w * r * (w * t).sin()),
        );
        c.stated = Some(Arc::new(move |t| {
            let (sn, cs) = (w * t).sin_cos();
            [r * sn, s * r * (1.0 - cs), s * r * r * (sn - w * t)]
        }));
        Ok(c)
    }

    pub fn fourier(u: Fourier, v: Fourier) -> Self {
        Self::new("fourier", u.into_signal(), v.into_signal())
    }

    pub fn tabulated(u: Tabulated, v: Tabulated) -> Self {
        Self::new("tabulated", u.into_signal(), v.into_signal())
    }

    /// Random smooth control with `modes` harmonics per channel.
    pub fn random<R: rand::Rng + ?Sized>(rng: &mut R, modes: usize, scale: f64) -> Self {
        let u = Fourier::random(rng, modes, scale);
        let v = Fourier::random(rng, modes, scale);
        let mut c = Self::fourier(u, v);
        c.label = "random".into();
        c
    }

    /// `(μ, ν, α)` at each of the nondecreasing `times` in `[0, ∞)`, by
    /// integrating `μ̇ = u, ν̇ = v, α̇ = νu − μv` from 0.
    pub fn integrals(&self, times: &[f64]) -> Result<Vec<HeisenbergIntegrals>> {
        let (u, v) = (self.u.clone(), self.v.clone());
        let mut rhs = move |t: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
            let (ut, vt) = (u(t), v(t));
            dy[0] = ut;
            dy[1] = vt;
            dy[2] = y[1] * ut - y[0] * vt;
            Ok(())
        };
        let (ys, _) = integrate(&mut rhs, 0.0, &[0.0; 3], times, &control_settings())?;
        Ok(times
            .iter()
            .zip(ys)
            .map(|(&t, y)| HeisenbergIntegrals {
                t,
                mu: y[0],
                nu: y[1],
                alpha: y[2],
            })
            .collect())
    }

    pub fn integrals_at(&self, t: f64) -> Result<HeisenbergIntegrals> {
        Ok(self.integrals(&[t])?[0])
    }

    /// Point `(x, y, z)` at time `t` of the trajectory from `(X, Y, 0)`.
    pub fn flow(&self, x0: f64, y0: f64, t: f64) -> Result<[f64; 3]> {
        Ok(self.integrals_at(t)?.flow(x0, y0))
    }
}

/// The quoted Bloch path `(μ, ν, α)`.
pub fn bloch_stated(t: f64) -> [f64; 3] {
    let k = 1.0 / (2.0 * PI).sqrt();
    let (s, c) = (2.0 * PI * t).sin_cos();
    [k * s, k * (1.0 - c), t * (1.0 - s)]
}

/// `(X + μ, Y + ν, Y·μ − X·ν + α)`.
pub fn heisenberg_flow(x0: f64, y0: f64, mu: f64, nu: f64, alpha: f64) -> [f64; 3] {
    [x0 + mu, y0 + nu, y0 * mu - x0 * nu + alpha]
}

/// Closed-form STM given the displacement `(x(t) − x(0), y(t) − y(0))`.
pub fn heisenberg_stm(dx: f64, dy: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, -dy, dx, 1.0])
}

/// STM at each of `times` from integrating
/// `Φ̇ = [[0,0,0],[0,0,0],[−v,u,0]]·Φ`, `Φ(0) = I`.
pub fn heisenberg_stm_integrated(ctrl: &HeisenbergControl, times: &[f64]) -> Result<Vec<DMatrix<f64>>> {
    let (u, v) = (ctrl.u.clone(), ctrl.v.clone());
    // Row-major Φ; only the third row moves.
    let mut rhs = move |t: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
        let (ut, vt) = (u(t), v(t));
        dy.fill(0.0);
        for c in 0..3 {
            dy[6 + c] = -vt * y[c] + ut * y[3 + c];
        }
        Ok(())
    };
    let id = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
    let (ys, _) = integrate(&mut rhs, 0.0, &id, times, &control_settings())?;
    Ok(ys.into_iter().map(|y| DMatrix::from_row_slice(3, 3, &y)).collect())
}

/// `1 + (x − X)² + (y − Y)²`.
pub fn heisenberg_metric_g(x0: f64, y0: f64, x: f64, y: f64) -> f64 {
    1.0 + (x - x0).powi(2) + (y - y0).powi(2)
}

/// `(4/3)(1 + μ² + ν²)(4μ² + 4ν² + 3α² − 6α + 5)`.
pub fn heisenberg_cost(mu: f64, nu: f64, alpha: f64) -> f64 {
    let r2 = mu * mu + nu * nu;
    4.0 / 3.0 * (1.0 + r2) * (4.0 * r2 + 3.0 * alpha * alpha - 6.0 * alpha + 5.0)
}

/// Gauss–Legendre nodes and weights on `[−1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else { p1 };
            dp = n as f64 * (x * pn - p0) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// The cost `∫∫ [x(1)² + y(1)² + (1 − z(1))²]·g(1) dX dY` over `[−1, 1]²`
/// by `nodes × nodes` Gauss–Legendre quadrature.
///
/// Every node is propagated through the raw dynamics together with its
/// STM, and `g` is the Gram determinant of the first two STM columns, so
/// the result does not rely on the closed-form flow.
pub fn heisenberg_cost_quadrature(ctrl: &HeisenbergControl, nodes: usize) -> Result<f64> {
    if nodes == 0 {
        return Err(Error::InvalidArgument("quadrature needs at least one node".into()));
    }
    let (xs, ws) = gauss_legendre(nodes);
    let mut total = 0.0;
    for (&x0, &wx) in xs.iter().zip(&ws) {
        for (&y0, &wy) in xs.iter().zip(&ws) {
            let (x, y, z, phi) = heisenberg_node(ctrl, x0, y0, 1.0)?;
            let cols = phi.columns(0, 2).into_owned();
            let g = gram_determinant(&cols);
            total += wx * wy * (x * x + y * y + (1.0 - z).powi(2)) * g;
        }
    }
    if !total.is_finite() {
        return Err(Error::NonFinite("cost quadrature".into()));
    }
    Ok(total)
}

/// Raw state and STM at `t` for the trajectory starting at `(X, Y, 0)`.
fn heisenberg_node(ctrl: &HeisenbergControl, x0: f64, y0: f64, t: f64) -> Result<(f64, f64, f64, DMatrix<f64>)> {
    let (u, v) = (ctrl.u.clone(), ctrl.v.clone());
    let mut rhs = move |t: f64, s: &[f64], ds: &mut [f64]| -> Result<()> {
        let (ut, vt) = (u(t), v(t));
        ds.fill(0.0);
        ds[0] = ut;
        ds[1] = vt;
        ds[2] = s[1] * ut - s[0] * vt;
        for c in 0..3 {
            ds[9 + c] = -vt * s[3 + c] + ut * s[6 + c];
        }
        Ok(())
    };
    let mut start = vec![x0, y0, 0.0];
    start.extend_from_slice(&[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
    let (ys, _) = integrate(&mut rhs, 0.0, &start, &[t], &control_settings())?;
    let y = &ys[0];
    Ok((y[0], y[1], y[2], DMatrix::from_row_slice(3, 3, &y[3..])))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeisenbergSummary {
    pub control: String,
    pub mu1: f64,
    pub nu1: f64,
    /// `α(1)` from the stated path when the control has one, otherwise
    /// the integrated value.
    pub alpha1: f64,
    pub alpha1_integrated: f64,
    /// `|α_stated(1) − α_integrated(1)|`, zero without a stated path.
    pub alpha_consistency_residual: f64,
    pub f_closed: f64,
    /// Closed form evaluated at the integrated endpoint.
    pub f_closed_integrated: f64,
    pub f_quadrature: f64,
}

pub const DEFAULT_QUADRATURE_NODES: usize = 6;

pub fn heisenberg_summary(ctrl: &HeisenbergControl) -> Result<HeisenbergSummary> {
    let end = ctrl.integrals_at(1.0)?;
    let alpha1 = ctrl.stated.as_ref().map_or(end.alpha, |p| p(1.0)[2]);
    Ok(HeisenbergSummary {
        control: ctrl.label.clone(),
        mu1: end.mu,
        nu1: end.nu,
        alpha1,
        alpha1_integrated: end.alpha,
        alpha_consistency_residual: (alpha1 - end.alpha).abs(),
        f_closed: heisenberg_cost(end.mu, end.nu, alpha1),
        f_closed_integrated: heisenberg_cost(end.mu, end.nu, end.alpha),
        f_quadrature: heisenberg_cost_quadrature(ctrl, DEFAULT_QUADRATURE_NODES)?,
    })
}

/// One point of the evolving uncertainty surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnapshotPoint {
    pub t: f64,
    pub x0: f64,
    pub y0: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub g: f64,
}

/// The image of the `[−1, 1]²` uncertainty square at each of `times`,
/// sampled on a `resolution × resolution` lattice including the edges.
pub fn surface_snapshots(ctrl: &HeisenbergControl, times: &[f64], resolution: usize) -> Result<Vec<SnapshotPoint>> {
    if resolution < 2 {
        return Err(Error::InvalidArgument("snapshot resolution must be at least 2".into()));
    }
    let ints = ctrl.integrals(times)?;
    let axis: Vec<f64> = (0..resolution)
        .map(|i| -1.0 + 2.0 * i as f64 / (resolution - 1) as f64)
        .collect();
    let mut out = Vec::with_capacity(times.len() * resolution * resolution);
    for it in &ints {
        for &x0 in &axis {
            for &y0 in &axis {
                let [x, y, z] = it.flow(x0, y0);
                out.push(SnapshotPoint {
                    t: it.t,
                    x0,
                    y0,
                    x,
                    y,
                    z,
                    g: heisenberg_metric_g(x0, y0, x, y),
                });
            }
        }
    }
    Ok(out)
}
