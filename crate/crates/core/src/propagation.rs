//! Joint integration of a trajectory and its state transition matrix.
//!
//! The augmented state is `[x | vec(Φ)]` with `Φ` flattened column-major,
//! integrated as one first-order system with `Φ' = J·∇²H(x)·Φ`. The STM is
//! never re-symplectified; drift is measured per sample.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::hamiltonian::Hamiltonian;
use crate::integrator::{integrate, IntegratorSettings, IntegratorStats};
use crate::phase::{apply_j, j_times_matrix, symplecticity_residual, PhaseState};
use crate::{Error, Result};

/// A state transition matrix from `t0` to `t1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stm {
    pub matrix: DMatrix<f64>,
    pub t0: f64,
    pub t1: f64,
}

impl Stm {
    pub fn new(matrix: DMatrix<f64>, t0: f64, t1: f64) -> Result<Self> {
        crate::phase::check_square_even(&matrix)?;
        Ok(Self { matrix, t0, t1 })
    }

    pub fn identity(n_pairs: usize, t0: f64) -> Self {
        Self {
            matrix: DMatrix::identity(2 * n_pairs, 2 * n_pairs),
            t0,
            t1: t0,
        }
    }

    pub fn n_pairs(&self) -> usize {
        self.matrix.nrows() / 2
    }

    pub fn residual(&self) -> f64 {
        symplecticity_residual(&self.matrix).unwrap_or(f64::INFINITY)
    }
}

/// `J·∇²H(x)·Φ`.
pub fn variational_rhs(sys: &dyn Hamiltonian, x: &[f64], phi: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let dim = 2 * sys.n_pairs();
    if x.len() != dim || phi.nrows() != dim || phi.ncols() != dim {
        return Err(Error::Dimension(format!(
            "variational_rhs: system dimension {dim}, state {}, STM {}x{}",
            x.len(),
            phi.nrows(),
            phi.ncols()
        )));
    }
    let hess = sys.hessian(x);
    Ok(j_times_matrix(&(hess * phi)))
}

/// Largest asymmetry of the Hessian at `x`; the propagator warns through
/// this value rather than failing.
pub fn hessian_asymmetry(sys: &dyn Hamiltonian, x: &[f64]) -> f64 {
    let h = sys.hessian(x);
    (&h - h.transpose()).amax()
}

/// Which times a [`Trajectory`] stores. `t0` is always the first sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleSpec {
    /// Only `t0` and `t1`.
    Endpoints,
    /// `count` equally spaced samples after `t0`, the last at `t1`.
    Uniform(usize),
    /// Explicit times, strictly monotone from `t0` towards `t1`.
    Times(Vec<f64>),
}

impl SampleSpec {
    /// Resolved sample times after `t0`.
    pub fn times(&self, t0: f64, t1: f64) -> Result<Vec<f64>> {
        let times = match self {
            SampleSpec::Endpoints => vec![t1],
            SampleSpec::Uniform(0) => {
                return Err(Error::InvalidArgument("uniform sampling needs at least one sample".into()))
            }
            SampleSpec::Uniform(count) => (1..=*count)
                .map(|k| if k == *count { t1 } else { t0 + (t1 - t0) * k as f64 / *count as f64 })
                .collect(),
            SampleSpec::Times(ts) => {
                let dir = (t1 - t0).signum();
                let mut prev = t0;
                for &t in ts {
                    if !t.is_finite() || (t - prev) * dir <= 0.0 || (t - t1) * dir > 0.0 {
                        return Err(Error::InvalidArgument(format!(
                            "sample time {t} is not strictly monotone within the span"
                        )));
                    }
                    prev = t;
                }
                ts.clone()
            }
        };
        Ok(times)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub state: Vec<f64>,
    pub stm: DMatrix<f64>,
    pub sympl_residual: f64,
    pub energy_drift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub system: String,
    pub n_pairs: usize,
    pub samples: Vec<Sample>,
    pub stats: IntegratorStats,
    /// Largest symplecticity residual over the samples.
    pub max_residual: f64,
    /// Largest |H(x(t)) − H(x0)| over the samples.
    pub max_energy_drift: f64,
    /// Largest Hessian asymmetry seen at the samples.
    pub max_hessian_asymmetry: f64,
}

impl Trajectory {
    pub fn last(&self) -> &Sample {
        self.samples.last().expect("a trajectory always holds t0")
    }

    pub fn stm_at(&self, index: usize) -> Stm {
        Stm {
            matrix: self.samples[index].stm.clone(),
            t0: self.samples[0].t,
            t1: self.samples[index].t,
        }
    }

    /// True when every stored STM stays within `budget`.
    pub fn within_drift_budget(&self, budget: f64) -> bool {
        self.max_residual <= budget
    }
}

/// Co-integrates `x(t)` and `Φ(t)` from `x0` over `t_span`.
pub fn propagate(
    sys: &dyn Hamiltonian,
    x0: &PhaseState,
    t_span: (f64, f64),
    settings: &IntegratorSettings,
    samples: &SampleSpec,
) -> Result<Trajectory> {
    let (t0, t1) = t_span;
    if !t0.is_finite() || !t1.is_finite() {
        return Err(Error::NonFinite("time span".into()));
    }
    if t1 == t0 {
        return Err(Error::InvalidArgument("degenerate time span: t1 equals t0".into()));
    }
    let dim = 2 * sys.n_pairs();
    if x0.coords().len() != dim {
        return Err(Error::Dimension(format!(
            "{} expects a state of length {dim}, got {}",
            sys.name(),
            x0.coords().len()
        )));
    }
    let times = samples.times(t0, t1)?;

    let mut y0 = vec![0.0; dim + dim * dim];
    y0[..dim].copy_from_slice(x0.coords());
    for k in 0..dim {
        y0[dim + k * dim + k] = 1.0;
    }

    let mut rhs = |_t: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
        let (x, phi) = y.split_at(dim);
        let (dx, dphi) = dy.split_at_mut(dim);
        let grad = sys.gradient(x);
        apply_j(grad.as_slice(), dx);
        let hess = sys.hessian(x);
        let phi = nalgebra::DMatrixView::from_slice(phi, dim, dim);
        let hp = hess * phi;
        apply_j_columns(hp.as_slice(), dphi, dim);
        Ok(())
    };

    let (states, stats) = integrate(&mut rhs, t0, &y0, &times, settings)?;

    let h0 = sys.energy(x0.coords());
    let mut out = Vec::with_capacity(states.len() + 1);
    out.push(make_sample(sys, t0, &y0, dim, h0));
    for (t, y) in times.iter().zip(&states) {
        out.push(make_sample(sys, *t, y, dim, h0));
    }
    let max_residual = out.iter().map(|s| s.sympl_residual).fold(0.0, f64::max);
    let max_energy_drift = out.iter().map(|s| s.energy_drift.abs()).fold(0.0, f64::max);
    let max_hessian_asymmetry = out
        .iter()
        .map(|s| hessian_asymmetry(sys, &s.state))
        .fold(0.0, f64::max);
    Ok(Trajectory {
        system: sys.name().to_string(),
        n_pairs: sys.n_pairs(),
        samples: out,
        stats,
        max_residual,
        max_energy_drift,
        max_hessian_asymmetry,
    })
}

/// Propagates and returns only the final STM.
pub fn propagate_stm(
    sys: &dyn Hamiltonian,
    x0: &PhaseState,
    t_span: (f64, f64),
    settings: &IntegratorSettings,
) -> Result<Stm> {
    let traj = propagate(sys, x0, t_span, settings, &SampleSpec::Endpoints)?;
    Ok(Stm {
        matrix: traj.last().stm.clone(),
        t0: t_span.0,
        t1: t_span.1,
    })
}

fn apply_j_columns(src: &[f64], dst: &mut [f64], dim: usize) {
    for (s, d) in src.chunks_exact(dim).zip(dst.chunks_exact_mut(dim)) {
        apply_j(s, d);
    }
}

fn make_sample(sys: &dyn Hamiltonian, t: f64, y: &[f64], dim: usize, h0: f64) -> Sample {
    let stm = DMatrix::from_column_slice(dim, dim, &y[dim..]);
    let sympl_residual = symplecticity_residual(&stm).unwrap_or(f64::INFINITY);
    Sample {
        t,
        state: y[..dim].to_vec(),
        energy_drift: sys.energy(&y[..dim]) - h0,
        stm,
        sympl_residual,
    }
}
