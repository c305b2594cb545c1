//! Subdeterminants, bracket sums, Poincaré–Cartan sums, Wirtinger bounds,
//! 2k-volumes, expansion factors and the collapse angle.

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::phase::{check_square_even, omega_unchecked, projection_stack, symplecticity_residual};
use crate::{Error, Result};

/// `M_ij = det(Π_iᵀ·Φ·Π_j)`, the determinant of the `(i, j)` symplectic block.
pub fn subdeterminant(phi: &DMatrix<f64>, i: usize, j: usize) -> Result<f64> {
    check_square_even(phi)?;
    let n = phi.nrows() / 2;
    for idx in [i, j] {
        if idx >= n {
            return Err(Error::IndexOutOfRange { index: idx, limit: n });
        }
    }
    Ok(block_det(phi, i, j))
}

fn block_det(phi: &DMatrix<f64>, i: usize, j: usize) -> f64 {
    let (r, c) = (2 * i, 2 * j);
    phi[(r, c)] * phi[(r + 1, c + 1)] - phi[(r, c + 1)] * phi[(r + 1, c)]
}

/// The full table of `M_ij` for one STM.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubdetTable {
    pub entries: DMatrix<f64>,
    pub phi_ref: DMatrix<f64>,
}

impl SubdetTable {
    pub fn n_pairs(&self) -> usize {
        self.entries.nrows()
    }

    /// Column sums, the Lagrange brackets `[p_j, q_j]`.
    pub fn column_sums(&self) -> Vec<f64> {
        self.entries.column_iter().map(|c| c.sum()).collect()
    }

    /// Row sums, the Poisson brackets `{P_i, Q_i}`.
    pub fn row_sums(&self) -> Vec<f64> {
        self.entries.row_iter().map(|r| r.sum()).collect()
    }

    /// Largest deviation of any row or column sum from 1.
    pub fn max_sum_deviation(&self) -> f64 {
        self.column_sums()
            .into_iter()
            .chain(self.row_sums())
            .map(|s| (s - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

pub fn subdet_table(phi: &DMatrix<f64>) -> Result<SubdetTable> {
    check_square_even(phi)?;
    let n = phi.nrows() / 2;
    Ok(SubdetTable {
        entries: DMatrix::from_fn(n, n, |i, j| block_det(phi, i, j)),
        phi_ref: phi.clone(),
    })
}

fn check_coord(phi: &DMatrix<f64>, idx: usize) -> Result<()> {
    if idx >= phi.nrows() {
        return Err(Error::IndexOutOfRange {
            index: idx,
            limit: phi.nrows(),
        });
    }
    Ok(())
}

/// Lagrange bracket `[u, v] = Σ (∂P_i/∂u ∂Q_i/∂v − ∂Q_i/∂u ∂P_i/∂v)` with the
/// partials read from columns `u` and `v` of `Φ`.
pub fn lagrange_bracket(phi: &DMatrix<f64>, u: usize, v: usize) -> Result<f64> {
    check_square_even(phi)?;
    check_coord(phi, u)?;
    check_coord(phi, v)?;
    Ok(omega_unchecked(phi.column(u).as_slice(), phi.column(v).as_slice()))
}

/// Poisson bracket `{U, V} = Σ (∂U/∂p_i ∂V/∂q_i − ∂U/∂q_i ∂V/∂p_i)` with the
/// partials read from rows `U` and `V` of `Φ`.
pub fn poisson_bracket(phi: &DMatrix<f64>, u: usize, v: usize) -> Result<f64> {
    check_square_even(phi)?;
    check_coord(phi, u)?;
    check_coord(phi, v)?;
    let ru: Vec<f64> = phi.row(u).iter().copied().collect();
    let rv: Vec<f64> = phi.row(v).iter().copied().collect();
    Ok(omega_unchecked(&ru, &rv))
}

/// `2k` vectors of `R^2n`, stored as the columns of a `2n×2k` matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorSet2k {
    vectors: DMatrix<f64>,
}

impl VectorSet2k {
    pub fn new(vectors: DMatrix<f64>) -> Result<Self> {
        let (rows, cols) = vectors.shape();
        if rows == 0 || rows % 2 != 0 || cols == 0 || cols % 2 != 0 {
            return Err(Error::Dimension(format!(
                "vector set must be 2n x 2k with n, k >= 1, got {rows}x{cols}"
            )));
        }
        if cols > rows {
            return Err(Error::InvalidArgument(format!(
                "k = {} exceeds n = {}",
                cols / 2,
                rows / 2
            )));
        }
        if vectors.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("vector set entry".into()));
        }
        Ok(Self { vectors })
    }

    pub fn from_columns(cols: &[DVector<f64>]) -> Result<Self> {
        if cols.is_empty() {
            return Err(Error::Dimension("empty vector set".into()));
        }
        Self::new(DMatrix::from_columns(cols))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    pub fn n_pairs(&self) -> usize {
        self.vectors.nrows() / 2
    }

    pub fn k(&self) -> usize {
        self.vectors.ncols() / 2
    }

    /// The image set `{Φ·X_i}`.
    pub fn mapped(&self, phi: &DMatrix<f64>) -> Result<Self> {
        if phi.ncols() != self.vectors.nrows() || phi.nrows() != self.vectors.nrows() {
            return Err(Error::Dimension("map does not act on this vector set".into()));
        }
        Self::new(phi * &self.vectors)
    }
}

/// Rows of the `2k` coordinates of a pair subset, in `(p, q)` order.
fn pair_rows(m: &DMatrix<f64>, pairs: &[usize]) -> DMatrix<f64> {
    let rows: Vec<usize> = pairs.iter().flat_map(|&p| [2 * p, 2 * p + 1]).collect();
    m.select_rows(rows.iter())
}

fn det(m: DMatrix<f64>) -> f64 {
    match m.nrows() {
        2 => m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)],
        _ => m.lu().determinant(),
    }
}

/// `(1/k!)·ω^k(X¹, …, X^{2k})`: the sum over size-`k` pair subsets of the
/// signed `2k`-volume of the projection onto those symplectic planes.
pub fn poincare_cartan_sum(vs: &VectorSet2k) -> f64 {
    signed_projection_sum(vs.matrix())
}

pub(crate) fn signed_projection_sum(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows() / 2;
    let k = m.ncols() / 2;
    (0..n)
        .combinations(k)
        .map(|subset| det(pair_rows(m, &subset)))
        .sum()
}

/// Absolute value of the signed density, the pointwise Wirtinger-type
/// invariant.
pub fn poincare_cartan_unsigned(vs: &VectorSet2k) -> f64 {
    poincare_cartan_sum(vs).abs()
}

/// `det(LᵀL)`.
pub fn gram_determinant(l: &DMatrix<f64>) -> f64 {
    let v = column_volume(l);
    v * v
}

/// Euclidean volume of the parallelepiped spanned by the columns of `m`:
/// `sqrt(det(mᵀm))`, computed as `Π|R_ii|` from a thin QR.
pub(crate) fn column_volume(m: &DMatrix<f64>) -> f64 {
    if m.ncols() == 0 {
        return 1.0;
    }
    if m.ncols() > m.nrows() {
        return 0.0;
    }
    let r = m.clone().qr().r();
    r.diagonal().iter().map(|d| d.abs()).product()
}

/// `sqrt(det(VᵀV))`; rank-deficient sets give 0.
pub fn volume_2k(vs: &VectorSet2k) -> f64 {
    column_volume(vs.matrix())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WirtingerCheck {
    pub bound: f64,
    pub volume: f64,
    pub holds: bool,
}

impl WirtingerCheck {
    pub fn margin(&self) -> f64 {
        self.volume - self.bound
    }
}

/// `|(1/k!)·ω^k| ≤ Vol_2k`.
pub fn wirtinger_check(vs: &VectorSet2k) -> WirtingerCheck {
    let bound = poincare_cartan_unsigned(vs);
    let volume = volume_2k(vs);
    WirtingerCheck {
        bound,
        volume,
        holds: bound <= volume + 1e-12,
    }
}

/// `ν_2k = sqrt(𝔊(Φ·L)) / sqrt(𝔊(L))`.
pub fn expansion_factor(phi: &DMatrix<f64>, l: &DMatrix<f64>) -> Result<f64> {
    check_square_even(phi)?;
    if l.nrows() != phi.ncols() || l.ncols() == 0 {
        return Err(Error::Dimension(format!(
            "parameterization Jacobian is {}x{}, STM is {}x{}",
            l.nrows(),
            l.ncols(),
            phi.nrows(),
            phi.ncols()
        )));
    }
    let base = column_volume(l);
    let scale: f64 = l.column_iter().map(|c| c.norm()).product();
    if !(base > 1e-14 * scale) {
        return Err(Error::DegenerateParameterization(
            "Gram determinant of the parameterization vanishes".into(),
        ));
    }
    Ok(column_volume(&(phi * l)) / base)
}

/// Expansion factor of the symplectic-plane stack `[Π_a Π_b …]`.
pub fn pair_expansion_factor(phi: &DMatrix<f64>, pairs: &[usize]) -> Result<f64> {
    check_square_even(phi)?;
    let l = projection_stack(pairs, phi.nrows() / 2)?;
    expansion_factor(phi, &l)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapseAngle {
    pub split: Vec<usize>,
    pub complement: Vec<usize>,
    pub nu_s: f64,
    pub nu_sc: f64,
    /// `arcsin(1 / (ν_S·ν_S'))`, argument clamped to `[0, 1]`.
    pub beta: f64,
    /// `sin β` from the principal angles between `span(Φ·Π_S)` and
    /// `span(Φ·Π_S')`.
    pub sin_beta_principal: f64,
    /// Set when `ν_S·ν_S' < 1 − 1e−8` forced the clamp.
    pub clamped: bool,
}

impl CollapseAngle {
    /// `|ν_S·ν_S'·sin β − 1|` with the independently computed `sin β`.
    pub fn identity_residual(&self) -> f64 {
        (self.nu_s * self.nu_sc * self.sin_beta_principal - 1.0).abs()
    }
}

/// Collapse angle between the images of the pair subset `split` and its
/// complement.
pub fn collapse_angle(phi: &DMatrix<f64>, split: &[usize]) -> Result<CollapseAngle> {
    check_square_even(phi)?;
    let n = phi.nrows() / 2;
    let mut split: Vec<usize> = split.to_vec();
    split.sort_unstable();
    split.dedup();
    if split.is_empty() || split.len() >= n {
        return Err(Error::InvalidArgument(
            "split must be a nonempty proper subset of the pairs".into(),
        ));
    }
    if let Some(&bad) = split.iter().find(|&&p| p >= n) {
        return Err(Error::IndexOutOfRange { index: bad, limit: n });
    }
    let complement: Vec<usize> = (0..n).filter(|p| !split.contains(p)).collect();
    let img_s = phi * projection_stack(&split, n)?;
    let img_c = phi * projection_stack(&complement, n)?;
    let nu_s = column_volume(&img_s);
    let nu_sc = column_volume(&img_c);
    let product = nu_s * nu_sc;
    let clamped = product < 1.0 - 1e-8;
    let beta = (1.0 / product).clamp(0.0, 1.0).asin();
    let sin_beta_principal = principal_sine_product(&img_s, &img_c);
    Ok(CollapseAngle {
        split,
        complement,
        nu_s,
        nu_sc,
        beta,
        sin_beta_principal,
        clamped,
    })
}

/// Product of the sines of the principal angles between two subspaces
/// given by spanning columns.
///
/// Sines are the singular values of `(I − Q_A Q_Aᵀ)·Q_B`, which stays
/// accurate for small angles where `sqrt(1 − cos²)` would not.
pub fn principal_sine_product(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let qa = a.clone().qr().q();
    let qb = b.clone().qr().q();
    let residual = &qb - &qa * (qa.transpose() * &qb);
    let r = residual.qr().r();
    // |det R| of the thin QR of the residual equals the product of its
    // singular values.
    r.diagonal().iter().map(|d| d.abs()).product()
}

/// Cosines of the principal angles, the singular values of `Q_Aᵀ·Q_B`.
pub fn principal_cosines(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<f64> {
    let qa = a.clone().qr().q();
    let qb = b.clone().qr().q();
    let mut s: Vec<f64> = (qa.transpose() * qb).singular_values().iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Per-sample invariant record, as exported in invariant reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantRecord {
    pub t: f64,
    pub column_sums: Vec<f64>,
    pub row_sums: Vec<f64>,
    /// Keyed by the split label, e.g. `"1|2"` with 1-based pair numbers.
    pub nu_by_split: std::collections::BTreeMap<String, [f64; 2]>,
    pub beta_by_split: std::collections::BTreeMap<String, f64>,
    pub collapse_residual_by_split: std::collections::BTreeMap<String, f64>,
    pub min_plane_expansion: f64,
    pub sympl_residual: f64,
}

pub fn split_label(split: &[usize], complement: &[usize]) -> String {
    let fmt = |s: &[usize]| s.iter().map(|p| (p + 1).to_string()).join(",");
    format!("{}|{}", fmt(split), fmt(complement))
}

/// All nonempty proper pair subsets that contain pair 0, one per
/// unordered split.
pub fn all_splits(n_pairs: usize) -> Vec<Vec<usize>> {
    (1..n_pairs)
        .flat_map(|k| (0..n_pairs).combinations(k))
        .filter(|s| s.contains(&0))
        .collect()
}

/// Builds the record for one STM at time `t` over the given splits.
pub fn invariant_record(t: f64, phi: &DMatrix<f64>, splits: &[Vec<usize>]) -> Result<InvariantRecord> {
    let table = subdet_table(phi)?;
    let n = table.n_pairs();
    let mut rec = InvariantRecord {
        t,
        column_sums: table.column_sums(),
        row_sums: table.row_sums(),
        nu_by_split: Default::default(),
        beta_by_split: Default::default(),
        collapse_residual_by_split: Default::default(),
        min_plane_expansion: f64::INFINITY,
        sympl_residual: symplecticity_residual(phi)?,
    };
    for k in 1..=n {
        for subset in (0..n).combinations(k) {
            let nu = pair_expansion_factor(phi, &subset)?;
            rec.min_plane_expansion = rec.min_plane_expansion.min(nu);
        }
    }
    for split in splits {
        let ca = collapse_angle(phi, split)?;
        let label = split_label(&ca.split, &ca.complement);
        rec.nu_by_split.insert(label.clone(), [ca.nu_s, ca.nu_sc]);
        rec.beta_by_split.insert(label.clone(), ca.beta);
        rec.collapse_residual_by_split.insert(label, ca.identity_residual());
    }
    Ok(rec)
}
