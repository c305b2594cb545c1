//! Parameterized 2-surfaces and 2k-chains in phase space.
//!
//! A [`SurfaceParam`] is an embedding `u ↦ x(u)` over a rectangular
//! parameter grid together with its exact Jacobian `L(u)` (`2n×2k`). All
//! integrals use the midpoint rule on grid cells.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::hamiltonian::Hamiltonian;
use crate::integrator::IntegratorSettings;
use crate::invariants::{column_volume, signed_projection_sum};
use crate::phase::{projection_stack, PhaseState};
use crate::{Error, Result};

/// Shadow determinants below this magnitude mark a caustic cell.
pub const CAUSTIC_THRESHOLD: f64 = 1e-12;

pub type EmbedFn = Arc<dyn Fn(&[f64]) -> DVector<f64> + Send + Sync>;
pub type JacobianFn = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;

/// Rectangular lattice over a box in `R^2k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamGrid {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub cells: Vec<usize>,
}

impl ParamGrid {
    pub fn new(bounds: &[(f64, f64)], cells: &[usize]) -> Result<Self> {
        if bounds.is_empty() || bounds.len() != cells.len() {
            return Err(Error::Dimension("grid bounds and cell counts disagree".into()));
        }
        for (i, &(lo, hi)) in bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite()) || !(hi > lo) {
                return Err(Error::InvalidArgument(format!(
                    "parameter axis {i} has zero or negative extent"
                )));
            }
        }
        if cells.contains(&0) {
            return Err(Error::InvalidArgument("cell counts must be positive".into()));
        }
        Ok(Self {
            lower: bounds.iter().map(|b| b.0).collect(),
            upper: bounds.iter().map(|b| b.1).collect(),
            cells: cells.to_vec(),
        })
    }

    pub fn dims(&self) -> usize {
        self.cells.len()
    }

    pub fn spacing(&self) -> Vec<f64> {
        (0..self.dims())
            .map(|d| (self.upper[d] - self.lower[d]) / self.cells[d] as f64)
            .collect()
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().iter().product()
    }

    pub fn domain_volume(&self) -> f64 {
        (0..self.dims()).map(|d| self.upper[d] - self.lower[d]).product()
    }

    pub fn cell_count(&self) -> usize {
        self.cells.iter().product()
    }

    /// Cell centres in row-major order (last axis fastest).
    pub fn cell_centers(&self) -> Vec<Vec<f64>> {
        let h = self.spacing();
        let total = self.cell_count();
        let mut out = Vec::with_capacity(total);
        let mut idx = vec![0usize; self.dims()];
        for _ in 0..total {
            out.push(
                (0..self.dims())
                    .map(|d| self.lower[d] + (idx[d] as f64 + 0.5) * h[d])
                    .collect(),
            );
            for d in (0..self.dims()).rev() {
                idx[d] += 1;
                if idx[d] < self.cells[d] {
                    break;
                }
                idx[d] = 0;
            }
        }
        out
    }

    /// Same box with every cell count doubled.
    pub fn refined(&self) -> Self {
        Self {
            cells: self.cells.iter().map(|c| 2 * c).collect(),
            ..self.clone()
        }
    }
}

#[derive(Clone)]
pub struct SurfaceParam {
    k: usize,
    n_pairs: usize,
    grid: ParamGrid,
    anchor: Vec<f64>,
    embed: EmbedFn,
    jacobian: JacobianFn,
}

impl std::fmt::Debug for SurfaceParam {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SurfaceParam")
            .field("k", &self.k)
            .field("n_pairs", &self.n_pairs)
            .field("grid", &self.grid)
            .field("anchor", &self.anchor)
            .finish_non_exhaustive()
    }
}

impl SurfaceParam {
    /// General constructor. `embed` and `jacobian` are evaluated at
    /// parameter points of length `2k`; the Jacobian must be `2n×2k`.
    pub fn new(k: usize, grid: ParamGrid, anchor: Vec<f64>, embed: EmbedFn, jacobian: JacobianFn) -> Result<Self> {
        if k == 0 || grid.dims() != 2 * k {
            return Err(Error::Dimension(format!(
                "a 2k-chain with k = {k} needs a {}-dimensional grid, got {}",
                2 * k,
                grid.dims()
            )));
        }
        let state = PhaseState::new(anchor, 0.0)?;
        let n_pairs = state.n_pairs();
        if k > n_pairs {
            return Err(Error::InvalidArgument(format!("k = {k} exceeds n = {n_pairs}")));
        }
        let s = Self {
            k,
            n_pairs,
            grid,
            anchor: state.into_coords(),
            embed,
            jacobian,
        };
        let probe = s.grid.cell_centers().swap_remove(0);
        let l = (s.jacobian)(&probe);
        if l.shape() != (2 * n_pairs, 2 * k) || (s.embed)(&probe).len() != 2 * n_pairs {
            return Err(Error::Dimension("embedding or Jacobian has the wrong shape".into()));
        }
        Ok(s)
    }

    /// Flat 2k-chain through `anchor` parallel to the symplectic planes in
    /// `pairs`: `x(u) = anchor + Σ u_{2s} e_p + u_{2s+1} e_q`, `L ≡ [Π …]`.
    pub fn flat_chain(pairs: &[usize], bounds: &[(f64, f64)], cells: &[usize], anchor: &[f64]) -> Result<Self> {
        let n = anchor.len() / 2;
        let l = projection_stack(pairs, n)?;
        let grid = ParamGrid::new(bounds, cells)?;
        let a = DVector::from_column_slice(anchor);
        let l_embed = l.clone();
        Self::new(
            pairs.len(),
            grid,
            anchor.to_vec(),
            Arc::new(move |u| &a + &l_embed * DVector::from_column_slice(u)),
            Arc::new(move |_| l.clone()),
        )
    }

    /// Flat lamina parallel to symplectic plane `pair`, parameterized by
    /// `(u, v) = (p_pair, q_pair)` offsets from `anchor`.
    pub fn lamina(pair: usize, bounds: [(f64, f64); 2], cells: [usize; 2], anchor: &[f64]) -> Result<Self> {
        Self::flat_chain(&[pair], &bounds, &cells, anchor)
    }

    /// Graph surface over plane `pair`: `x(u, v) = anchor + u e_p + v e_q +
    /// slopes·(u, v)`, where `slopes` is `2n×2` with zero rows on `pair`.
    pub fn linear_graph(
        pair: usize,
        bounds: [(f64, f64); 2],
        cells: [usize; 2],
        anchor: &[f64],
        slopes: DMatrix<f64>,
    ) -> Result<Self> {
        let n = anchor.len() / 2;
        let pi = projection_stack(&[pair], n)?;
        if slopes.shape() != (2 * n, 2) {
            return Err(Error::Dimension("slopes must be 2n x 2".into()));
        }
        if slopes.row(2 * pair).amax() != 0.0 || slopes.row(2 * pair + 1).amax() != 0.0 {
            return Err(Error::InvalidArgument(
                "graph slopes must vanish on the parameterizing pair".into(),
            ));
        }
        let l = pi + slopes;
        let grid = ParamGrid::new(&bounds, &cells)?;
        let a = DVector::from_column_slice(anchor);
        let l_embed = l.clone();
        Self::new(
            1,
            grid,
            anchor.to_vec(),
            Arc::new(move |u| &a + &l_embed * DVector::from_column_slice(u)),
            Arc::new(move |_| l.clone()),
        )
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_pairs(&self) -> usize {
        self.n_pairs
    }

    pub fn grid(&self) -> &ParamGrid {
        &self.grid
    }

    pub fn anchor(&self) -> &[f64] {
        &self.anchor
    }

    pub fn embed(&self, u: &[f64]) -> DVector<f64> {
        (self.embed)(u)
    }

    pub fn jacobian(&self, u: &[f64]) -> DMatrix<f64> {
        (self.jacobian)(u)
    }

    /// The surface with every point pushed through the linear map `phi`
    /// (`x ↦ Φ·x`, `L ↦ Φ·L`).
    pub fn transformed(&self, phi: &DMatrix<f64>) -> Result<Self> {
        let dim = 2 * self.n_pairs;
        if phi.shape() != (dim, dim) {
            return Err(Error::Dimension("map does not act on this surface".into()));
        }
        let (e, j) = (self.embed.clone(), self.jacobian.clone());
        let (p1, p2) = (phi.clone(), phi.clone());
        let anchor = (phi * DVector::from_column_slice(&self.anchor)).as_slice().to_vec();
        Self::new(
            self.k,
            self.grid.clone(),
            anchor,
            Arc::new(move |u| &p1 * e(u)),
            Arc::new(move |u| &p2 * j(u)),
        )
    }

    /// Same surface on a grid with doubled resolution.
    pub fn refined(&self) -> Self {
        Self {
            grid: self.grid.refined(),
            ..self.clone()
        }
    }

    /// Pullback symplectic density `(1/k!)·ω^k(L)` at a parameter point.
    pub fn symplectic_density(&self, u: &[f64]) -> f64 {
        signed_projection_sum(&self.jacobian(u))
    }

    /// Node-based classification.
    pub fn classify(&self) -> SurfaceClass {
        let mut degenerate_cells = 0;
        let mut parasymplectic = true;
        let mut sign_by_pair = vec![Some(0i8); self.n_pairs];
        for c in self.grid.cell_centers() {
            let l = self.jacobian(&c);
            let scale: f64 = l.column_iter().map(|c| c.norm()).product();
            if column_volume(&l) <= 1e-14 * scale {
                degenerate_cells += 1;
            }
            if (signed_projection_sum(&l) - 1.0).abs() > 1e-10 {
                parasymplectic = false;
            }
            if self.k == 1 {
                for (pair, slot) in sign_by_pair.iter_mut().enumerate() {
                    let d = l[(2 * pair, 0)] * l[(2 * pair + 1, 1)] - l[(2 * pair, 1)] * l[(2 * pair + 1, 0)];
                    let s = if d > CAUSTIC_THRESHOLD {
                        1
                    } else if d < -CAUSTIC_THRESHOLD {
                        -1
                    } else {
                        *slot = None;
                        continue;
                    };
                    *slot = match *slot {
                        Some(0) => Some(s),
                        Some(prev) if prev == s => Some(s),
                        _ => None,
                    };
                }
            }
        }
        let regular_shadow_pairs = if self.k == 1 {
            sign_by_pair
                .iter()
                .enumerate()
                .filter_map(|(p, s)| matches!(s, Some(1) | Some(-1)).then_some(p))
                .collect()
        } else {
            Vec::new()
        };
        SurfaceClass {
            parasymplectic,
            regular_shadow_pairs,
            degenerate_cells,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceClass {
    /// Pullback symplectic density is 1 at every cell centre (to 1e−10).
    pub parasymplectic: bool,
    /// Pairs whose shadow Jacobian keeps one strict sign over the grid, the
    /// local condition for being a graph over that plane.
    pub regular_shadow_pairs: Vec<usize>,
    pub degenerate_cells: usize,
}

/// `∫ √𝔊(L)` by the midpoint rule.
pub fn surface_area(s: &SurfaceParam) -> Result<f64> {
    let vol = s.grid.cell_volume();
    let mut total = 0.0;
    let mut degenerate = 0;
    for c in s.grid.cell_centers() {
        let l = s.jacobian(&c);
        let scale: f64 = l.column_iter().map(|c| c.norm()).product();
        let g = column_volume(&l);
        if g <= 1e-14 * scale {
            degenerate += 1;
        }
        total += g * vol;
    }
    if degenerate > 0 {
        return Err(Error::DegenerateParameterization(format!(
            "{degenerate} cell(s) with rank-deficient Jacobian"
        )));
    }
    Ok(total)
}

/// `sqrt(𝔊(Φ·L(u)))`, the area ratio of the mapped element to its parameter cell.
pub fn mapped_area_factor(s: &SurfaceParam, phi: &DMatrix<f64>, u: &[f64]) -> Result<f64> {
    check_phi(s, phi)?;
    Ok(column_volume(&(phi * s.jacobian(u))))
}

/// Signed `det(Π_Tᵀ·Φ·L(u))` for a target pair set `T` of size `k`.
pub fn shadow_factor(s: &SurfaceParam, phi: &DMatrix<f64>, targets: &[usize], u: &[f64]) -> Result<f64> {
    check_phi(s, phi)?;
    if targets.len() != s.k {
        return Err(Error::Dimension(format!(
            "a 2k-chain with k = {} needs {} target pairs",
            s.k, s.k
        )));
    }
    let pt = projection_stack(targets, s.n_pairs)?;
    let m = pt.transpose() * phi * s.jacobian(u);
    Ok(small_det(&m))
}

/// `det(Π_iᵀ·Φ·L(u))` for a surface (`k = 1`).
pub fn shadow_area_factor(s: &SurfaceParam, phi: &DMatrix<f64>, target: usize, u: &[f64]) -> Result<f64> {
    shadow_factor(s, phi, &[target], u)
}

fn small_det(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 2 {
        m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]
    } else {
        m.clone().lu().determinant()
    }
}

fn check_phi(s: &SurfaceParam, phi: &DMatrix<f64>) -> Result<()> {
    let dim = 2 * s.n_pairs;
    if phi.shape() != (dim, dim) {
        return Err(Error::Dimension(format!(
            "STM is {}x{}, surface lives in R^{dim}",
            phi.nrows(),
            phi.ncols()
        )));
    }
    Ok(())
}

/// Signed and unsigned pullback integrals of `(1/k!)·ω^k` over the image
/// `Φ(s)` (midpoint rule).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoincareCartanIntegrals {
    pub signed: f64,
    pub unsigned: f64,
}

pub fn poincare_cartan_integrals(s: &SurfaceParam, phi: &DMatrix<f64>) -> Result<PoincareCartanIntegrals> {
    check_phi(s, phi)?;
    let vol = s.grid.cell_volume();
    let (mut signed, mut unsigned) = (0.0, 0.0);
    for c in s.grid.cell_centers() {
        let d = signed_projection_sum(&(phi * s.jacobian(&c)));
        signed += d * vol;
        unsigned += d.abs() * vol;
    }
    Ok(PoincareCartanIntegrals { signed, unsigned })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityCell {
    pub param_center: Vec<f64>,
    /// Image of the cell centre on the target `(P_i, Q_i)` plane.
    pub image: [f64; 2],
    /// `None` on caustic cells.
    pub sigma: Option<f64>,
    pub prob: f64,
    pub shadow: f64,
}

impl DensityCell {
    pub fn is_caustic(&self) -> bool {
        self.sigma.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityMap {
    pub target_pair: usize,
    pub cells: Vec<DensityCell>,
    /// Sum of cell probabilities.
    pub normalization: f64,
}

impl DensityMap {
    pub fn caustic_count(&self) -> usize {
        self.cells.iter().filter(|c| c.is_caustic()).count()
    }
}

/// Area probability density of a uniformly distributed surface after the
/// linearized flow, on the `target` symplectic plane.
///
/// Points map as `x ↦ image_anchor + Φ·(x − anchor)`. Cell probability is
/// `√𝔊(L)/Σ√𝔊(L)` and `σ = √𝔊(L) / (|det(Π_iᵀΦL)|·ΔA·Σ√𝔊(L))`.
pub fn density_map(s: &SurfaceParam, phi: &DMatrix<f64>, image_anchor: &[f64], target: usize) -> Result<DensityMap> {
    check_phi(s, phi)?;
    if image_anchor.len() != 2 * s.n_pairs {
        return Err(Error::Dimension("image anchor has the wrong length".into()));
    }
    let anchor = DVector::from_column_slice(&s.anchor);
    let image_anchor = DVector::from_column_slice(image_anchor);
    density_map_with(s, target, |u| {
        let x = s.embed(u);
        let img = &image_anchor + phi * (x - &anchor);
        Ok((img, phi.clone()))
    })
}

/// Density map where every cell centre is propagated on its own and uses
/// its own STM.
pub fn density_map_per_node(
    s: &SurfaceParam,
    sys: &dyn Hamiltonian,
    t_span: (f64, f64),
    settings: &IntegratorSettings,
    target: usize,
) -> Result<DensityMap> {
    density_map_with(s, target, |u| {
        let x0 = PhaseState::new(s.embed(u).as_slice().to_vec(), t_span.0)?;
        let traj = crate::propagation::propagate(
            sys,
            &x0,
            t_span,
            settings,
            &crate::propagation::SampleSpec::Endpoints,
        )?;
        let last = traj.last();
        Ok((DVector::from_column_slice(&last.state), last.stm.clone()))
    })
}

fn density_map_with<F>(s: &SurfaceParam, target: usize, mut flow: F) -> Result<DensityMap>
where
    F: FnMut(&[f64]) -> Result<(DVector<f64>, DMatrix<f64>)>,
{
    if s.k != 1 {
        return Err(Error::InvalidArgument("density maps are defined for surfaces (k = 1)".into()));
    }
    if target >= s.n_pairs {
        return Err(Error::IndexOutOfRange {
            index: target,
            limit: s.n_pairs,
        });
    }
    let cell_area = s.grid.cell_volume();
    let centers = s.grid.cell_centers();
    let weights: Vec<f64> = centers.iter().map(|c| column_volume(&s.jacobian(c))).collect();
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateParameterization("surface has zero area".into()));
    }
    let pt = projection_stack(&[target], s.n_pairs)?;
    let mut cells = Vec::with_capacity(centers.len());
    for (c, w) in centers.into_iter().zip(weights) {
        let (img, phi) = flow(&c)?;
        let shadow = small_det(&(pt.transpose() * &phi * s.jacobian(&c)));
        let sigma = (shadow.abs() >= CAUSTIC_THRESHOLD).then(|| w / (shadow.abs() * cell_area * total));
        cells.push(DensityCell {
            image: [img[2 * target], img[2 * target + 1]],
            param_center: c,
            sigma,
            prob: w / total,
            shadow,
        });
    }
    if cells.iter().all(|c| c.is_caustic()) {
        return Err(Error::AllCaustic(target));
    }
    let normalization = cells.iter().map(|c| c.prob).sum();
    Ok(DensityMap {
        target_pair: target,
        cells,
        normalization,
    })
}

/// Summary numbers for one surface under one map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceReport {
    pub area: f64,
    pub mapped_area: f64,
    pub min_expansion: f64,
    pub max_expansion: f64,
    pub caustic_count: usize,
    pub signed_invariant: f64,
    pub unsigned_invariant: f64,
    /// Change of the unsigned invariant under one grid refinement.
    pub unsigned_refinement_change: f64,
    pub parasymplectic: bool,
    pub regular_shadow_pairs: Vec<usize>,
}

pub fn surface_report(s: &SurfaceParam, phi: &DMatrix<f64>, density: Option<&DensityMap>) -> Result<SurfaceReport> {
    let area = surface_area(s)?;
    let vol = s.grid.cell_volume();
    let (mut mapped_area, mut lo, mut hi) = (0.0, f64::INFINITY, 0.0f64);
    for c in s.grid.cell_centers() {
        let f = mapped_area_factor(s, phi, &c)?;
        let g = column_volume(&s.jacobian(&c));
        mapped_area += f * vol;
        lo = lo.min(f / g);
        hi = hi.max(f / g);
    }
    let pc = poincare_cartan_integrals(s, phi)?;
    let pc_fine = poincare_cartan_integrals(&s.refined(), phi)?;
    let class = s.transformed(phi)?.classify();
    Ok(SurfaceReport {
        area,
        mapped_area,
        min_expansion: lo,
        max_expansion: hi,
        caustic_count: density.map_or(0, DensityMap::caustic_count),
        signed_invariant: pc.signed,
        unsigned_invariant: pc.unsigned,
        unsigned_refinement_change: (pc_fine.unsigned - pc.unsigned).abs(),
        parasymplectic: class.parasymplectic,
        regular_shadow_pairs: class.regular_shadow_pairs,
    })
}
