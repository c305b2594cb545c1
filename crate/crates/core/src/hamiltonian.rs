//! Autonomous Hamiltonian systems and the built-in test systems.

use nalgebra::{DMatrix, DVector};

use crate::phase::apply_j;
use crate::{Error, Result};

/// An autonomous Hamiltonian on `R^2n` in symplectic ordering.
///
/// Implementors supply `H` and its gradient. The Hessian defaults to
/// central differences of the gradient; built-ins override it analytically.
pub trait Hamiltonian: Send + Sync {
    fn name(&self) -> &str;

    fn n_pairs(&self) -> usize;

    fn energy(&self, x: &[f64]) -> f64;

    fn gradient(&self, x: &[f64]) -> DVector<f64>;

    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        finite_difference_hessian(|y| self.gradient(y), x)
    }

    /// Closed-form STM `Φ(t)` from `x0`, when one is known.
    fn analytic_stm(&self, _t: f64, _x0: &[f64]) -> Option<DMatrix<f64>> {
        None
    }
}

/// Central-difference Hessian of a gradient map, symmetrized.
///
/// Step `h = cbrt(eps)·max(1, |x_i|)`.
pub fn finite_difference_hessian<G>(grad: G, x: &[f64]) -> DMatrix<f64>
where
    G: Fn(&[f64]) -> DVector<f64>,
{
    let n = x.len();
    let mut hess = DMatrix::zeros(n, n);
    let mut xp = x.to_vec();
    let base = f64::EPSILON.cbrt();
    for i in 0..n {
        let h = base * x[i].abs().max(1.0);
        xp[i] = x[i] + h;
        let gp = grad(&xp);
        xp[i] = x[i] - h;
        let gm = grad(&xp);
        xp[i] = x[i];
        hess.set_column(i, &((gp - gm) / (2.0 * h)));
    }
    (&hess + hess.transpose()) * 0.5
}

/// The symplectic gradient `J·∇H(x)`.
pub fn hamiltonian_vector_field(sys: &dyn Hamiltonian, x: &[f64]) -> Result<DVector<f64>> {
    if x.len() != 2 * sys.n_pairs() {
        return Err(Error::Dimension(format!(
            "{} expects a state of length {}, got {}",
            sys.name(),
            2 * sys.n_pairs(),
            x.len()
        )));
    }
    let g = sys.gradient(x);
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("gradient of {}", sys.name())));
    }
    let mut out = DVector::zeros(x.len());
    apply_j(g.as_slice(), out.as_mut_slice());
    Ok(out)
}

/// `H = (p² + q²)/2`; the flow is a rotation of the `(p, q)` plane.
#[derive(Debug, Clone, Copy, Default)]
pub struct HarmonicOscillator;

impl Hamiltonian for HarmonicOscillator {
    fn name(&self) -> &str {
        "harmonic_oscillator"
    }

    fn n_pairs(&self) -> usize {
        1
    }

    fn energy(&self, x: &[f64]) -> f64 {
        0.5 * (x[0] * x[0] + x[1] * x[1])
    }

    fn gradient(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(&x[..2])
    }

    fn hessian(&self, _x: &[f64]) -> DMatrix<f64> {
        DMatrix::identity(2, 2)
    }

    fn analytic_stm(&self, t: f64, _x0: &[f64]) -> Option<DMatrix<f64>> {
        let (s, c) = t.sin_cos();
        Some(DMatrix::from_row_slice(2, 2, &[c, -s, s, c]))
    }
}

/// `H = p²/2 − cos q`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Pendulum;

impl Hamiltonian for Pendulum {
    fn name(&self) -> &str {
        "pendulum"
    }

    fn n_pairs(&self) -> usize {
        1
    }

    fn energy(&self, x: &[f64]) -> f64 {
        0.5 * x[0] * x[0] - x[1].cos()
    }

    fn gradient(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_vec(vec![x[0], x[1].sin()])
    }

    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, x[1].cos()])
    }
}

/// Two unit oscillators with bilinear coupling `ε·q₁q₂`.
#[derive(Debug, Clone, Copy)]
pub struct CoupledOscillators {
    pub epsilon: f64,
}

impl CoupledOscillators {
    pub const DEFAULT_EPSILON: f64 = 0.25;

    pub fn new(epsilon: f64) -> Self {
        Self { epsilon }
    }
}

impl Default for CoupledOscillators {
    fn default() -> Self {
        Self::new(Self::DEFAULT_EPSILON)
    }
}

impl Hamiltonian for CoupledOscillators {
    fn name(&self) -> &str {
        "coupled_oscillators"
    }

    fn n_pairs(&self) -> usize {
        2
    }

    fn energy(&self, x: &[f64]) -> f64 {
        0.5 * x.iter().map(|v| v * v).sum::<f64>() + self.epsilon * x[1] * x[3]
    }

    fn gradient(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_vec(vec![
            x[0],
            x[1] + self.epsilon * x[3],
            x[2],
            x[3] + self.epsilon * x[1],
        ])
    }

    fn hessian(&self, _x: &[f64]) -> DMatrix<f64> {
        let mut h = DMatrix::identity(4, 4);
        h[(1, 3)] = self.epsilon;
        h[(3, 1)] = self.epsilon;
        h
    }

    fn analytic_stm(&self, t: f64, _x0: &[f64]) -> Option<DMatrix<f64>> {
        if self.epsilon != 0.0 {
            return None;
        }
        let mut phi = DMatrix::identity(4, 4);
        let r = HarmonicOscillator.analytic_stm(t, &[])?;
        phi.view_mut((0, 0), (2, 2)).copy_from(&r);
        phi.view_mut((2, 2), (2, 2)).copy_from(&r);
        Some(phi)
    }
}

/// `H = ½ xᵀ S x` for a user-supplied symmetric `S`.
///
/// The Hessian is left to the finite-difference fallback.
#[derive(Debug, Clone)]
pub struct QuadraticHamiltonian {
    matrix: DMatrix<f64>,
}

impl QuadraticHamiltonian {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        crate::phase::check_square_even(&matrix)?;
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("quadratic Hamiltonian matrix".into()));
        }
        let asym = (&matrix - matrix.transpose()).amax();
        if asym > 1e-12 * matrix.amax().max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "quadratic Hamiltonian matrix is not symmetric (max asymmetry {asym:e})"
            )));
        }
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }
}

impl Hamiltonian for QuadraticHamiltonian {
    fn name(&self) -> &str {
        "quadratic"
    }

    fn n_pairs(&self) -> usize {
        self.matrix.nrows() / 2
    }

    fn energy(&self, x: &[f64]) -> f64 {
        let v = DVector::from_column_slice(x);
        0.5 * v.dot(&(&self.matrix * &v))
    }

    fn gradient(&self, x: &[f64]) -> DVector<f64> {
        &self.matrix * DVector::from_column_slice(x)
    }

    fn analytic_stm(&self, t: f64, _x0: &[f64]) -> Option<DMatrix<f64>> {
        Some((crate::phase::j_times_matrix(&self.matrix) * t).exp())
    }
}

pub const BUILTIN_NAMES: [&str; 3] = ["harmonic_oscillator", "coupled_oscillators", "pendulum"];

/// Looks up a built-in system by name. `coupled_oscillators` uses ε = 0.25.
pub fn builtin_system(name: &str) -> Result<Box<dyn Hamiltonian>> {
    match name {
        "harmonic_oscillator" => Ok(Box::new(HarmonicOscillator)),
        "coupled_oscillators" => Ok(Box::new(CoupledOscillators::default())),
        "pendulum" => Ok(Box::new(Pendulum)),
        other => Err(Error::UnknownSystem(other.to_string())),
    }
}

/// Block-diagonal rotations, the STM of `n` uncoupled unit oscillators.
pub fn uncoupled_rotation(n_pairs: usize, t: f64) -> DMatrix<f64> {
    let mut phi = DMatrix::identity(2 * n_pairs, 2 * n_pairs);
    let (s, c) = t.sin_cos();
    for k in 0..n_pairs {
        phi[(2 * k, 2 * k)] = c;
        phi[(2 * k, 2 * k + 1)] = -s;
        phi[(2 * k + 1, 2 * k)] = s;
        phi[(2 * k + 1, 2 * k + 1)] = c;
    }
    phi
}
