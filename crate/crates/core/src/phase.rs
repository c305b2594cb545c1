//! Phase-space conventions: the interleaved `(p1, q1, …, pN, qN)` ordering,
//! the symplectic matrix `J`, the symplectic form and the pair projections.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A point of phase space in symplectic ordering, tagged with a time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    coords: Vec<f64>,
    pub t: f64,
}

impl PhaseState {
    pub fn new(coords: Vec<f64>, t: f64) -> Result<Self> {
        if coords.len() < 2 || coords.len() % 2 != 0 {
            return Err(Error::Dimension(format!(
                "phase state needs an even length >= 2, got {}",
                coords.len()
            )));
        }
        if let Some(i) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFinite(format!("phase state coordinate {i}")));
        }
        if !t.is_finite() {
            return Err(Error::NonFinite("phase state time".into()));
        }
        Ok(Self { coords, t })
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn n_pairs(&self) -> usize {
        self.coords.len() / 2
    }

    pub fn p(&self, pair: usize) -> f64 {
        self.coords[2 * pair]
    }

    pub fn q(&self, pair: usize) -> f64 {
        self.coords[2 * pair + 1]
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }
}

/// Index of `p_pair` in the interleaved layout.
#[inline]
pub fn p_index(pair: usize) -> usize {
    2 * pair
}

/// Index of `q_pair` in the interleaved layout.
#[inline]
pub fn q_index(pair: usize) -> usize {
    2 * pair + 1
}

/// The block-diagonal symplectic matrix with `J₂ = [[0, −1], [1, 0]]` blocks.
pub fn build_j(n_pairs: usize) -> Result<DMatrix<f64>> {
    if n_pairs == 0 {
        return Err(Error::InvalidArgument("n_pairs must be at least 1".into()));
    }
    let dim = 2 * n_pairs;
    let mut j = DMatrix::zeros(dim, dim);
    for k in 0..n_pairs {
        j[(2 * k, 2 * k + 1)] = -1.0;
        j[(2 * k + 1, 2 * k)] = 1.0;
    }
    Ok(j)
}

/// `J·v` without forming `J`.
pub fn apply_j(v: &[f64], out: &mut [f64]) {
    debug_assert_eq!(v.len() % 2, 0);
    for k in 0..v.len() / 2 {
        out[2 * k] = -v[2 * k + 1];
        out[2 * k + 1] = v[2 * k];
    }
}

pub fn j_times(v: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(v.len());
    apply_j(v.as_slice(), out.as_mut_slice());
    out
}

/// `J·A` without forming `J`.
pub fn j_times_matrix(a: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows(), a.ncols());
    for k in 0..a.nrows() / 2 {
        for c in 0..a.ncols() {
            out[(2 * k, c)] = -a[(2 * k + 1, c)];
            out[(2 * k + 1, c)] = a[(2 * k, c)];
        }
    }
    out
}

/// The standard symplectic form `ω(u, v) = vᵀ·J·u = Σ (u_p v_q − u_q v_p)`.
///
/// With this pairing `ω(e_p, e_q) = +1` on each symplectic plane.
pub fn omega(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() || u.len() % 2 != 0 || u.is_empty() {
        return Err(Error::Dimension(format!(
            "omega needs two vectors of the same even length, got {} and {}",
            u.len(),
            v.len()
        )));
    }
    Ok(omega_unchecked(u, v))
}

pub(crate) fn omega_unchecked(u: &[f64], v: &[f64]) -> f64 {
    u.chunks_exact(2)
        .zip(v.chunks_exact(2))
        .map(|(a, b)| a[0] * b[1] - a[1] * b[0])
        .sum()
}

/// `Π_κ`: the `2n×2` matrix carrying `I₂` in the κ-th symplectic row block.
pub fn projection_matrix(kappa: usize, n_pairs: usize) -> Result<DMatrix<f64>> {
    if kappa >= n_pairs {
        return Err(Error::IndexOutOfRange {
            index: kappa,
            limit: n_pairs,
        });
    }
    let mut pi = DMatrix::zeros(2 * n_pairs, 2);
    pi[(2 * kappa, 0)] = 1.0;
    pi[(2 * kappa + 1, 1)] = 1.0;
    Ok(pi)
}

/// Horizontal stack `[Π_a Π_b …]` for a set of pairs.
pub fn projection_stack(pairs: &[usize], n_pairs: usize) -> Result<DMatrix<f64>> {
    let mut out = DMatrix::zeros(2 * n_pairs, 2 * pairs.len());
    for (slot, &pair) in pairs.iter().enumerate() {
        if pair >= n_pairs {
            return Err(Error::IndexOutOfRange {
                index: pair,
                limit: n_pairs,
            });
        }
        out[(2 * pair, 2 * slot)] = 1.0;
        out[(2 * pair + 1, 2 * slot + 1)] = 1.0;
    }
    Ok(out)
}

/// Max-abs-entry of `ΦᵀJΦ − J`.
pub fn symplecticity_residual(phi: &DMatrix<f64>) -> Result<f64> {
    check_square_even(phi)?;
    let jphi = j_times_matrix(phi);
    let lhs = phi.transpose() * jphi;
    let j = build_j(phi.nrows() / 2)?;
    Ok((lhs - j).amax())
}

pub(crate) fn check_square_even(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() || m.nrows() % 2 != 0 || m.nrows() == 0 {
        return Err(Error::Dimension(format!(
            "expected a square even-dimensional matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

/// A random element of the connected symplectic group, `exp(J·A)` with `A`
/// symmetric and entries uniform in `[−scale, scale]`.
pub fn random_symplectic<R: Rng + ?Sized>(rng: &mut R, n_pairs: usize, scale: f64) -> DMatrix<f64> {
    let dim = 2 * n_pairs;
    let mut a = DMatrix::zeros(dim, dim);
    for r in 0..dim {
        for c in r..dim {
            let x = rng.random_range(-scale..=scale);
            a[(r, c)] = x;
            a[(c, r)] = x;
        }
    }
    j_times_matrix(&a).exp()
}

/// Equal rotation by `theta` in the `(p_a, p_b)` and `(q_a, q_b)` planes.
///
/// This is the cotangent lift of a rotation of configuration space, hence
/// symplectic.
pub fn pair_rotation(n_pairs: usize, a: usize, b: usize, theta: f64) -> DMatrix<f64> {
    let mut r = DMatrix::identity(2 * n_pairs, 2 * n_pairs);
    let (s, c) = theta.sin_cos();
    for off in 0..2 {
        let (ia, ib) = (2 * a + off, 2 * b + off);
        r[(ia, ia)] = c;
        r[(ia, ib)] = -s;
        r[(ib, ia)] = s;
        r[(ib, ib)] = c;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn j_single_pair() {
        let j = build_j(1).unwrap();
        assert_eq!(j, DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]));
    }

    #[test]
    fn j_squares_to_minus_identity() {
        for n in 1..=4 {
            let j = build_j(n).unwrap();
            assert_eq!(&j * &j, -DMatrix::identity(2 * n, 2 * n));
            assert_eq!(j.transpose(), -&j);
            assert_eq!(j.transpose() * &j, DMatrix::identity(2 * n, 2 * n));
            assert_abs_diff_eq!(j.determinant(), 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn j_rejects_zero_pairs() {
        assert!(build_j(0).is_err());
    }

    #[test]
    fn omega_examples() {
        assert_eq!(omega(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert_eq!(
            omega(&[1.0, 0.0, 0.0, 0.0], &[0.0, 0.0, 1.0, 0.0]).unwrap(),
            0.0
        );
        // 2x2 determinant of the columns (u, v)
        assert_eq!(omega(&[1.0, 2.0], &[3.0, 4.0]).unwrap(), 1.0 * 4.0 - 2.0 * 3.0);
        assert!(omega(&[1.0, 2.0], &[3.0, 4.0, 5.0, 6.0]).is_err());
        assert!(omega(&[1.0], &[3.0]).is_err());
    }

    #[test]
    fn omega_matches_matrix_form() {
        let j = build_j(2).unwrap();
        let u = DVector::from_vec(vec![0.3, -1.2, 2.0, 0.7]);
        let v = DVector::from_vec(vec![-0.5, 0.1, 1.5, -2.2]);
        let direct = (v.transpose() * &j * &u)[(0, 0)];
        assert_abs_diff_eq!(omega(u.as_slice(), v.as_slice()).unwrap(), direct, epsilon = 1e-15);
    }

    #[test]
    fn projection_examples() {
        assert_eq!(projection_matrix(0, 1).unwrap(), DMatrix::identity(2, 2));
        let pi2 = projection_matrix(1, 2).unwrap();
        assert_eq!(pi2[(2, 0)], 1.0);
        assert_eq!(pi2[(3, 1)], 1.0);
        assert_eq!(pi2.sum(), 2.0);
        let pi1 = projection_matrix(0, 2).unwrap();
        let block = pi1.transpose() * build_j(2).unwrap() * &pi1;
        assert_eq!(block, build_j(1).unwrap());
        assert!(projection_matrix(2, 2).is_err());
    }

    #[test]
    fn projections_extract_blocks_and_reassemble() {
        let n = 3;
        let a = DMatrix::from_fn(6, 6, |r, c| (r * 7 + c * 3) as f64 - 4.0);
        let mut sum = DMatrix::zeros(6, 6);
        for k in 0..n {
            let pk = projection_matrix(k, n).unwrap();
            assert_eq!(pk.transpose() * &pk, DMatrix::identity(2, 2));
            for l in 0..n {
                let pl = projection_matrix(l, n).unwrap();
                if k != l {
                    assert_eq!(pk.transpose() * &pl, DMatrix::zeros(2, 2));
                }
                let block = pk.transpose() * &a * &pl;
                assert_eq!(block, a.view((2 * k, 2 * l), (2, 2)).clone_owned());
            }
            sum += &pk * pk.transpose();
        }
        assert_eq!(sum, DMatrix::identity(6, 6));
    }

    #[test]
    fn residual_examples() {
        assert_eq!(symplecticity_residual(&DMatrix::identity(4, 4)).unwrap(), 0.0);
        let squeeze = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 0.5]));
        assert_eq!(symplecticity_residual(&squeeze).unwrap(), 0.0);
        let stretch = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 1.0]));
        assert_eq!(symplecticity_residual(&stretch).unwrap(), 1.0);
        assert!(symplecticity_residual(&DMatrix::identity(3, 3)).is_err());
    }

    #[test]
    fn random_generator_is_symplectic() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 1..=4 {
            for _ in 0..20 {
                let phi = random_symplectic(&mut rng, n, 1.0);
                assert!(symplecticity_residual(&phi).unwrap() <= 1e-10);
            }
        }
    }

    #[test]
    fn phase_state_validation() {
        assert!(PhaseState::new(vec![1.0], 0.0).is_err());
        assert!(PhaseState::new(vec![1.0, f64::NAN], 0.0).is_err());
        let s = PhaseState::new(vec![1.0, 2.0, 3.0, 4.0], 0.5).unwrap();
        assert_eq!((s.p(1), s.q(1), s.n_pairs()), (3.0, 4.0, 2));
    }
}
