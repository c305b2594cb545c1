//! The symplectic eigenskeleton of a linear symplectic map.
//!
//! For symplectic `Φ`, `Ψ = ΦᵀΦ` is symmetric positive definite and `J`
//! maps its `λ`-eigenspace onto its `1/λ`-eigenspace. The skeleton is an
//! orthonormal eigenbasis arranged as symplectic pairs `(ξᵢ, ηᵢ = J·ξᵢ)`
//! with `λᵢ ≥ 1` on `ξᵢ`. The images `Φ·ξᵢ`, `Φ·ηᵢ` stay mutually orthogonal
//! with lengths `√λᵢ` and `1/√λᵢ`, so any subvolume spanned by whole
//! skeleton planes keeps its volume under `Φ`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::invariants::column_volume;
use crate::phase::{build_j, j_times, symplecticity_residual};
use crate::{Error, Result};

/// Input STMs must be symplectic to this max-abs residual.
pub const SYMPLECTIC_TOLERANCE: f64 = 1e-8;

/// Relative eigenvalue gap below which eigenvalues form one cluster.
pub const CLUSTER_GAP: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Eigenskeleton {
    pub xi: Vec<DVector<f64>>,
    pub eta: Vec<DVector<f64>>,
    /// `λᵢ ≥ 1`, descending; the eigenvalue of `ξᵢ` as reported by the
    /// eigensolver.
    pub lambda: Vec<f64>,
    /// Symplectic basis change with columns `(ξ₁, η₁, ξ₂, η₂, …)`.
    pub t: DMatrix<f64>,
    /// Full eigenvalue list of `Ψ`, descending.
    pub spectrum: Vec<f64>,
    pub phi_ref: DMatrix<f64>,
}

impl Eigenskeleton {
    pub fn n_pairs(&self) -> usize {
        self.xi.len()
    }

    /// Ψ = ΦᵀΦ.
    pub fn psi(&self) -> DMatrix<f64> {
        self.phi_ref.transpose() * &self.phi_ref
    }
}

/// Builds the skeleton of a symplectic `Φ`.
pub fn compute_skeleton(phi: &DMatrix<f64>) -> Result<Eigenskeleton> {
    let residual = symplecticity_residual(phi)?;
    if !(residual <= SYMPLECTIC_TOLERANCE) {
        return Err(Error::NotSymplectic {
            residual,
            tolerance: SYMPLECTIC_TOLERANCE,
        });
    }
    let dim = phi.nrows();
    let n = dim / 2;
    let psi = phi.transpose() * phi;
    let psi = (&psi + psi.transpose()) * 0.5;
    let eig = psi.clone().try_symmetric_eigen(f64::EPSILON, 10_000).ok_or_else(|| {
        Error::Eigen("symmetric eigendecomposition did not converge".into())
    })?;

    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let spectrum: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    if let Some(bad) = spectrum.iter().find(|&&l| !(l > 0.0)) {
        return Err(Error::Eigen(format!("non-positive eigenvalue {bad:e} of PhiT Phi")));
    }

    // Group the descending spectrum into clusters of near-equal eigenvalues.
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for (pos, &idx) in order.iter().enumerate() {
        let new_cluster = match clusters.last() {
            None => true,
            Some(_) => {
                let prev = spectrum[pos - 1];
                (prev - spectrum[pos]) > CLUSTER_GAP * prev.abs()
            }
        };
        if new_cluster {
            clusters.push(vec![idx]);
        } else {
            clusters.last_mut().unwrap().push(idx);
        }
    }

    // Greedy symplectic selection: within each cluster take the candidate
    // with the largest component outside the span chosen so far, set
    // η = J·ξ, and deflate.
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(dim);
    let mut pairs: Vec<(DVector<f64>, DVector<f64>)> = Vec::with_capacity(n);
    'clusters: for cluster in &clusters {
        let mut candidates: Vec<DVector<f64>> =
            cluster.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect();
        loop {
            if pairs.len() == n {
                break 'clusters;
            }
            // First candidate wins ties so the identity maps to the standard basis.
            let mut best: Option<(usize, DVector<f64>)> = None;
            for (i, c) in candidates.iter().enumerate() {
                let rest = deflate(c, &basis);
                if best.as_ref().is_none_or(|(_, b)| rest.norm() > b.norm()) {
                    best = Some((i, rest));
                }
            }
            let Some((pick, rest)) = best else { break };
            if rest.norm() < 0.5 {
                break;
            }
            candidates.remove(pick);
            let xi = deflate(&rest.normalize(), &basis).normalize();
            let eta = deflate(&j_times(&xi), &basis);
            let eta = eta.normalize();
            basis.push(xi.clone());
            basis.push(eta.clone());
            pairs.push((xi, eta));
        }
    }
    if pairs.len() != n {
        return Err(Error::Eigen(format!(
            "found {} of {} symplectic eigenpairs",
            pairs.len(),
            n
        )));
    }

    let mut xi_out = Vec::with_capacity(n);
    let mut eta_out = Vec::with_capacity(n);
    let mut lambda = Vec::with_capacity(n);
    for (mut xi, mut eta) in pairs {
        let mut l_xi = (phi * &xi).norm_squared();
        let l_eta = (phi * &eta).norm_squared();
        if l_xi < l_eta {
            // (ξ, η) → (η, −ξ) keeps the pair symplectic and puts λ ≥ 1 on ξ.
            let old_xi = xi;
            xi = eta;
            eta = -old_xi;
            l_xi = l_eta;
        }
        // Sign: largest-magnitude entry of ξ positive; η follows as J·ξ.
        let imax = xi.iamax();
        if xi[imax] < 0.0 {
            xi = -xi;
            eta = -eta;
        }
        xi_out.push(xi);
        eta_out.push(eta);
        lambda.push(l_xi);
    }

    // Order pairs by descending λ and report the solver's eigenvalue.
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| lambda[b].total_cmp(&lambda[a]));
    let xi: Vec<DVector<f64>> = idx.iter().map(|&i| xi_out[i].clone()).collect();
    let eta: Vec<DVector<f64>> = idx.iter().map(|&i| eta_out[i].clone()).collect();
    let lambda: Vec<f64> = xi.iter().map(|v| v.dot(&(&psi * v))).collect();

    let mut t = DMatrix::zeros(dim, dim);
    for i in 0..n {
        t.set_column(2 * i, &xi[i]);
        t.set_column(2 * i + 1, &eta[i]);
    }
    Ok(Eigenskeleton {
        xi,
        eta,
        lambda,
        t,
        spectrum,
        phi_ref: phi.clone(),
    })
}

fn deflate(v: &DVector<f64>, basis: &[DVector<f64>]) -> DVector<f64> {
    let mut out = v.clone();
    // Two passes of modified Gram–Schmidt.
    for _ in 0..2 {
        for b in basis {
            let c = b.dot(&out);
            out.axpy(-c, b, 1.0);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairResidual {
    pub lambda: f64,
    /// `‖Ψ·ξ − λ·ξ‖`.
    pub xi_eigen_residual: f64,
    /// `‖Ψ·(Jξ) − λ⁻¹·(Jξ)‖`.
    pub eta_eigen_residual: f64,
    /// `‖η − J·ξ‖`.
    pub j_pairing_residual: f64,
    /// `|λ·λ' − 1|` with `λ' = ‖Φη‖²`.
    pub reciprocity: f64,
    /// `|‖Φξ‖ − √λ|`.
    pub xi_image_norm_error: f64,
    /// `|‖Φη‖ − 1/√λ|`.
    pub eta_image_norm_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairingReport {
    pub pairs: Vec<PairResidual>,
    /// Max `|λ_(j)·λ_(2n+1−j) − 1|` over the raw sorted spectrum.
    pub spectrum_reciprocity: f64,
    /// Max-abs entry of `TᵀT − I`.
    pub orthonormality: f64,
    /// `symplecticity_residual(T)`.
    pub t_residual: f64,
    /// Largest off-diagonal entry of the Gram matrix of the images.
    pub image_gram_offdiag: f64,
}

impl PairingReport {
    pub fn max_pair_residual(&self) -> f64 {
        self.pairs
            .iter()
            .flat_map(|p| {
                [
                    p.xi_eigen_residual,
                    p.eta_eigen_residual,
                    p.j_pairing_residual,
                    p.reciprocity,
                    p.xi_image_norm_error,
                    p.eta_image_norm_error,
                ]
            })
            .fold(0.0, f64::max)
    }

    pub fn worst(&self) -> f64 {
        [
            self.max_pair_residual(),
            self.spectrum_reciprocity,
            self.orthonormality,
            self.t_residual,
            self.image_gram_offdiag,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

pub fn verify_pairing(sk: &Eigenskeleton) -> PairingReport {
    let psi = sk.psi();
    let phi = &sk.phi_ref;
    let pairs = sk
        .xi
        .iter()
        .zip(&sk.eta)
        .zip(&sk.lambda)
        .map(|((xi, eta), &lambda)| {
            let jxi = j_times(xi);
            let img_xi = phi * xi;
            let img_eta = phi * eta;
            PairResidual {
                lambda,
                xi_eigen_residual: (&psi * xi - xi * lambda).norm(),
                eta_eigen_residual: (&psi * &jxi - &jxi / lambda).norm(),
                j_pairing_residual: (eta - &jxi).norm(),
                reciprocity: (lambda * img_eta.norm_squared() - 1.0).abs(),
                xi_image_norm_error: (img_xi.norm() - lambda.sqrt()).abs(),
                eta_image_norm_error: (img_eta.norm() - 1.0 / lambda.sqrt()).abs(),
            }
        })
        .collect();
    let m = sk.spectrum.len();
    let spectrum_reciprocity = (0..m / 2)
        .map(|j| (sk.spectrum[j] * sk.spectrum[m - 1 - j] - 1.0).abs())
        .fold(0.0, f64::max);
    let dim = sk.t.nrows();
    let orthonormality = (sk.t.transpose() * &sk.t - DMatrix::identity(dim, dim)).amax();
    let t_residual = symplecticity_residual(&sk.t).unwrap_or(f64::INFINITY);
    let images = phi * &sk.t;
    let gram = images.transpose() * &images;
    let mut image_gram_offdiag: f64 = 0.0;
    for r in 0..dim {
        for c in 0..dim {
            if r != c {
                image_gram_offdiag = image_gram_offdiag.max(gram[(r, c)].abs());
            }
        }
    }
    PairingReport {
        pairs,
        spectrum_reciprocity,
        orthonormality,
        t_residual,
        image_gram_offdiag,
    }
}

/// `Vol({Φξᵢ, Φηᵢ : i ∈ subset}) / Vol({ξᵢ, ηᵢ : i ∈ subset})`.
pub fn skeleton_volume_ratio(sk: &Eigenskeleton, subset: &[usize]) -> Result<f64> {
    if subset.is_empty() {
        return Err(Error::InvalidArgument("pair subset must be nonempty".into()));
    }
    let n = sk.n_pairs();
    let mut cols = Vec::with_capacity(2 * subset.len());
    for &i in subset {
        if i >= n {
            return Err(Error::IndexOutOfRange { index: i, limit: n });
        }
        cols.push(sk.xi[i].clone());
        cols.push(sk.eta[i].clone());
    }
    let src = DMatrix::from_columns(&cols);
    let img = &sk.phi_ref * &src;
    Ok(column_volume(&img) / column_volume(&src))
}

/// The symplectic `J` of matching size, for callers checking `Tᵀ·J·T`.
pub fn skeleton_j(sk: &Eigenskeleton) -> DMatrix<f64> {
    build_j(sk.n_pairs()).expect("a skeleton has at least one pair")
}
