//! JSON run configurations. Unknown keys are rejected everywhere, and pair
//! numbers are 1-based as in the printed reports.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::Deserialize;
use symvol::control::{Fourier, Tabulated};
use symvol::hamiltonian::{CoupledOscillators, QuadraticHamiltonian};
use symvol::io::matrix_from_rows;
use symvol::{builtin_system, Hamiltonian, IntegratorSettings, PhaseState, SampleSpec};

use crate::error::CliError;

/// Parses a config, reporting the JSON path of the first bad field.
pub fn parse<T: DeserializeOwned>(text: &str) -> Result<T, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        CliError::Config(format!("at `{path}`: {}", e.into_inner()))
    })
}

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse(&text)
}

#[derive(Debug, Clone)]
pub struct SystemConfig {
    /// A built-in name or `quadratic`.
    pub system: String,
    /// Coupling for `coupled_oscillators`.
    pub epsilon: Option<f64>,
    /// Symmetric matrix for `quadratic`.
    pub matrix: Option<Vec<Vec<f64>>>,
}

impl SystemConfig {
    pub fn build(&self) -> Result<Box<dyn Hamiltonian>, CliError> {
        match (self.system.as_str(), &self.epsilon, &self.matrix) {
            ("quadratic", None, Some(rows)) => {
                let m = DMatrix::from_row_iterator(
                    rows.len(),
                    rows.first().map_or(0, Vec::len),
                    rows.iter().flatten().copied(),
                );
                if rows.iter().any(|r| r.len() != rows.len()) {
                    return Err(CliError::Config("`matrix` must be square".into()));
                }
                Ok(Box::new(QuadraticHamiltonian::new(m)?))
            }
            ("quadratic", _, _) => Err(CliError::Config("`quadratic` needs `matrix` and no `epsilon`".into())),
            ("coupled_oscillators", Some(eps), None) => Ok(Box::new(CoupledOscillators::new(*eps))),
            (_, Some(_), _) => Err(CliError::Config("`epsilon` only applies to coupled_oscillators".into())),
            (_, _, Some(_)) => Err(CliError::Config("`matrix` only applies to quadratic".into())),
            (name, None, None) => Ok(builtin_system(name)?),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagateConfig {
    /// A built-in name or `quadratic`.
    pub system: String,
    /// Coupling for `coupled_oscillators`.
    #[serde(default)]
    pub epsilon: Option<f64>,
    /// Symmetric matrix for `quadratic`.
    #[serde(default)]
    pub matrix: Option<Vec<Vec<f64>>>,
    pub initial_state: Vec<f64>,
    pub t_span: [f64; 2],
    #[serde(default)]
    pub integrator: IntegratorSettings,
    /// Number of uniform samples after `t0` (default 100).
    #[serde(default)]
    pub samples: Option<usize>,
    /// Explicit sample times; overrides `samples`.
    #[serde(default)]
    pub sample_times: Option<Vec<f64>>,
}

impl PropagateConfig {
    pub fn build_system(&self) -> Result<Box<dyn Hamiltonian>, CliError> {
        SystemConfig {
            system: self.system.clone(),
            epsilon: self.epsilon,
            matrix: self.matrix.clone(),
        }
        .build()
    }

    pub fn sample_spec(&self) -> SampleSpec {
        match (&self.sample_times, self.samples) {
            (Some(ts), _) => SampleSpec::Times(ts.clone()),
            (None, Some(n)) => SampleSpec::Uniform(n),
            (None, None) => SampleSpec::Uniform(100),
        }
    }

    pub fn initial(&self) -> Result<PhaseState, CliError> {
        Ok(PhaseState::new(self.initial_state.clone(), self.t_span[0])?)
    }
}

/// Where an STM (or a sequence of them) comes from.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StmSource {
    Propagate(Box<PropagateConfig>),
    /// An STM JSON file, or a trajectory CSV for a sequence.
    File { path: PathBuf },
    Fixture {
        name: Fixture,
        #[serde(default)]
        n_pairs: Option<usize>,
    },
    Matrix { matrix: Vec<Vec<f64>> },
    /// `exp(J·A)` with uniform symmetric `A`, seeded by `--seed`.
    Random {
        n_pairs: usize,
        #[serde(default = "one")]
        scale: f64,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fixture {
    Identity,
    /// `diag(2, 1/2)` on one pair.
    Squeeze,
    /// `diag(2, 1/2, 1, 1)` after an equal rotation by π/4.
    SqueezeRotate,
}

impl Fixture {
    pub fn matrix(self, n_pairs: Option<usize>) -> Result<DMatrix<f64>, CliError> {
        use nalgebra::DVector;
        let fixed = |n: usize| match n_pairs {
            Some(m) if m != n => Err(CliError::Config(format!("this fixture has {n} pair(s)"))),
            _ => Ok(()),
        };
        match self {
            Fixture::Identity => {
                let n = n_pairs.unwrap_or(1);
                if n == 0 {
                    return Err(CliError::Config("`n_pairs` must be positive".into()));
                }
                Ok(DMatrix::identity(2 * n, 2 * n))
            }
            Fixture::Squeeze => {
                fixed(1)?;
                Ok(DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 0.5])))
            }
            Fixture::SqueezeRotate => {
                fixed(2)?;
                let s = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 0.5, 1.0, 1.0]));
                Ok(s * symvol::phase::pair_rotation(2, 0, 1, std::f64::consts::FRAC_PI_4))
            }
        }
    }
}

pub fn matrix_config(rows: &[Vec<f64>]) -> Result<DMatrix<f64>, CliError> {
    Ok(matrix_from_rows(rows)?)
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InvariantsConfig {
    pub stm: StmSource,
    /// Pair subsets (1-based) whose complements form the collapse splits;
    /// all splits when absent.
    #[serde(default)]
    pub splits: Option<Vec<Vec<usize>>>,
    /// Allowed deviation for every checked identity.
    #[serde(default = "default_check_tol")]
    pub tolerance: f64,
}

pub fn default_check_tol() -> f64 {
    1e-8
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SkeletonConfig {
    pub stm: StmSource,
    /// Which sample of a sequence to analyze (0-based; default the last).
    #[serde(default)]
    pub sample: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceConfig {
    pub stm: StmSource,
    /// Pair (1-based) the lamina is parallel to.
    pub pair: usize,
    #[serde(default = "default_bounds")]
    pub bounds: [[f64; 2]; 2],
    #[serde(default = "default_cells")]
    pub cells: [usize; 2],
    /// Lamina anchor; the propagation start state when omitted with a
    /// `propagate` source, otherwise the origin.
    #[serde(default)]
    pub anchor: Option<Vec<f64>>,
    /// Target planes (1-based) for density maps; all when absent.
    #[serde(default)]
    pub targets: Option<Vec<usize>>,
    /// Also propagate every cell centre on its own (`propagate` sources only).
    #[serde(default)]
    pub per_node: bool,
}

fn default_bounds() -> [[f64; 2]; 2] {
    [[-1.0, 1.0], [-1.0, 1.0]]
}

fn default_cells() -> [usize; 2] {
    [64, 64]
}

/// Scalar time signal.
#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SignalConfig {
    Constant(f64),
    Fourier(Fourier),
    Tabulated(Tabulated),
}

impl SignalConfig {
    pub fn build(&self) -> Result<symvol::control::Signal, CliError> {
        Ok(match self {
            SignalConfig::Constant(c) => symvol::control::constant_signal(*c),
            SignalConfig::Fourier(f) => f.clone().into_signal(),
            SignalConfig::Tabulated(t) => Tabulated::new(t.times.clone(), t.values.clone())?.into_signal(),
        })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum HeisenbergControlConfig {
    Zero,
    Bloch,
    Circle {
        turns: u32,
        #[serde(default)]
        clockwise: bool,
    },
    Constant {
        u: f64,
        v: f64,
    },
    Signals {
        u: SignalConfig,
        v: SignalConfig,
    },
    /// Random Fourier control seeded by `--seed`.
    Random {
        #[serde(default = "default_modes")]
        modes: usize,
        #[serde(default = "one")]
        scale: f64,
    },
}

fn default_modes() -> usize {
    3
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeisenbergConfig {
    #[serde(default = "default_heisenberg_control")]
    pub control: HeisenbergControlConfig,
    #[serde(default = "default_snapshot_times")]
    pub snapshot_times: Vec<f64>,
    #[serde(default = "default_resolution")]
    pub resolution: usize,
}

impl Default for HeisenbergConfig {
    fn default() -> Self {
        Self {
            control: default_heisenberg_control(),
            snapshot_times: default_snapshot_times(),
            resolution: default_resolution(),
        }
    }
}

fn default_heisenberg_control() -> HeisenbergControlConfig {
    HeisenbergControlConfig::Bloch
}

fn default_snapshot_times() -> Vec<f64> {
    vec![0.0, 0.25, 0.5, 0.75, 1.0]
}

fn default_resolution() -> usize {
    21
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum DiscControlConfig {
    Zero,
    /// `w = u cot θ` along the path.
    Compliant { u: SignalConfig, v: SignalConfig },
    OpenLoop {
        u: SignalConfig,
        v: SignalConfig,
        w: SignalConfig,
    },
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscStateConfig {
    pub x: f64,
    pub y: f64,
    pub phi: f64,
    pub theta: f64,
    pub psi: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscConfig {
    #[serde(default = "default_disc_control")]
    pub control: DiscControlConfig,
    #[serde(default = "default_disc_state")]
    pub initial_state: DiscStateConfig,
    #[serde(default = "default_disc_span")]
    pub t_span: [f64; 2],
    #[serde(default = "default_disc_samples")]
    pub samples: usize,
}

impl Default for DiscConfig {
    fn default() -> Self {
        Self {
            control: default_disc_control(),
            initial_state: default_disc_state(),
            t_span: default_disc_span(),
            samples: default_disc_samples(),
        }
    }
}

fn default_disc_control() -> DiscControlConfig {
    DiscControlConfig::Compliant {
        u: SignalConfig::Constant(1.0),
        v: SignalConfig::Constant(0.2),
    }
}

fn default_disc_state() -> DiscStateConfig {
    DiscStateConfig {
        x: 0.0,
        y: 0.0,
        phi: 0.0,
        theta: 1.0,
        psi: 0.0,
    }
}

fn default_disc_span() -> [f64; 2] {
    [0.0, 1.0]
}

fn default_disc_samples() -> usize {
    200
}
