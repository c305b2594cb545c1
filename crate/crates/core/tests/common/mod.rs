//! Test-side reference computations. Nothing here calls into `symvol`, so
//! library results can be checked against them.
#![allow(dead_code)]

use itertools::Itertools;
use nalgebra::DMatrix;
use rand::Rng;

/// Block-diagonal `[[0, −1], [1, 0]]` on interleaved `(p, q)` coordinates.
pub fn j_matrix(n: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(2 * n, 2 * n);
    for k in 0..n {
        j[(2 * k, 2 * k + 1)] = -1.0;
        j[(2 * k + 1, 2 * k)] = 1.0;
    }
    j
}

pub fn sympl_defect(phi: &DMatrix<f64>) -> f64 {
    let j = j_matrix(phi.nrows() / 2);
    (phi.transpose() * &j * phi - j).amax()
}

/// Random element of the symplectic group built from alternating shears
/// `q += S·p` and `p += T·q` with symmetric `S`, `T`.
pub fn shear_symplectic<R: Rng>(rng: &mut R, n: usize, scale: f64, rounds: usize) -> DMatrix<f64> {
    let mut phi = DMatrix::identity(2 * n, 2 * n);
    for r in 0..2 * rounds {
        let mut m = DMatrix::identity(2 * n, 2 * n);
        for i in 0..n {
            for j in i..n {
                let s = rng.random_range(-scale..=scale);
                let (row, col) = if r % 2 == 0 { (2 * i + 1, 2 * j) } else { (2 * i, 2 * j + 1) };
                m[(row, col)] = s;
                if i != j {
                    let (row, col) = if r % 2 == 0 { (2 * j + 1, 2 * i) } else { (2 * j, 2 * i + 1) };
                    m[(row, col)] = s;
                }
            }
        }
        phi = m * phi;
    }
    phi
}

/// `det` of the 2×2 block at pair rows `i`, pair columns `j`.
pub fn subdet(phi: &DMatrix<f64>, i: usize, j: usize) -> f64 {
    phi[(2 * i, 2 * j)] * phi[(2 * i + 1, 2 * j + 1)] - phi[(2 * i, 2 * j + 1)] * phi[(2 * i + 1, 2 * j)]
}

pub fn column_sums(phi: &DMatrix<f64>) -> Vec<f64> {
    let n = phi.nrows() / 2;
    (0..n).map(|j| (0..n).map(|i| subdet(phi, i, j)).sum()).collect()
}

pub fn row_sums(phi: &DMatrix<f64>) -> Vec<f64> {
    let n = phi.nrows() / 2;
    (0..n).map(|i| (0..n).map(|j| subdet(phi, i, j)).sum()).collect()
}

/// `sqrt(det(VᵀV))` as the product of singular values.
pub fn gram_volume(v: &DMatrix<f64>) -> f64 {
    v.clone().singular_values().iter().product()
}

/// Columns `e_p, e_q` for each pair in `pairs`.
pub fn plane_stack(pairs: &[usize], n: usize) -> DMatrix<f64> {
    let mut l = DMatrix::zeros(2 * n, 2 * pairs.len());
    for (c, &p) in pairs.iter().enumerate() {
        l[(2 * p, 2 * c)] = 1.0;
        l[(2 * p + 1, 2 * c + 1)] = 1.0;
    }
    l
}

fn rows_of_pairs(v: &DMatrix<f64>, pairs: &[usize]) -> DMatrix<f64> {
    let rows: Vec<usize> = pairs.iter().flat_map(|&p| [2 * p, 2 * p + 1]).collect();
    v.select_rows(rows.iter())
}

/// Signed sum over `k`-subsets of pairs of the projected `2k`-volume.
pub fn projection_sum(v: &DMatrix<f64>) -> f64 {
    let n = v.nrows() / 2;
    let k = v.ncols() / 2;
    (0..n).combinations(k).map(|s| rows_of_pairs(v, &s).determinant()).sum()
}

/// Orthonormal basis for the column span (full column rank assumed).
pub fn orthonormal(v: &DMatrix<f64>) -> DMatrix<f64> {
    v.clone().qr().q()
}

/// `Π sin θᵢ` over the principal angles between two column spans.
pub fn principal_sine_product(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let m = orthonormal(a).transpose() * orthonormal(b);
    m.singular_values()
        .iter()
        .map(|c| (1.0 - c.min(1.0).powi(2)).sqrt())
        .product()
}

/// The harmonic oscillator STM, a rotation.
pub fn rotation(t: f64) -> DMatrix<f64> {
    let (s, c) = t.sin_cos();
    DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
}

/// Fixed-step RK4 on `(μ, ν, α)` with `α̇ = ν·u − μ·v`, from zero.
pub fn heisenberg_endpoint(u: &dyn Fn(f64) -> f64, v: &dyn Fn(f64) -> f64, steps: usize) -> [f64; 3] {
    let f = |t: f64, s: [f64; 3]| -> [f64; 3] {
        let (ut, vt) = (u(t), v(t));
        [ut, vt, s[1] * ut - s[0] * vt]
    };
    let h = 1.0 / steps as f64;
    let mut s = [0.0; 3];
    for i in 0..steps {
        let t = i as f64 * h;
        let add = |a: [f64; 3], b: [f64; 3], c: f64| [a[0] + c * b[0], a[1] + c * b[1], a[2] + c * b[2]];
        let k1 = f(t, s);
        let k2 = f(t + h / 2.0, add(s, k1, h / 2.0));
        let k3 = f(t + h / 2.0, add(s, k2, h / 2.0));
        let k4 = f(t + h, add(s, k3, h));
        for d in 0..3 {
            s[d] += h / 6.0 * (k1[d] + 2.0 * k2[d] + 2.0 * k3[d] + k4[d]);
        }
    }
    s
}

/// `∫∫_{[−1,1]²} [x² + y² + (1 − z)²]·g dX dY` expanded term by term with
/// `x = X + μ`, `y = Y + ν`, `z = Y·μ − X·ν + α`, `g = 1 + μ² + ν²`.
pub fn heisenberg_cost_expanded(mu: f64, nu: f64, alpha: f64) -> f64 {
    let r2 = mu * mu + nu * nu;
    let x_term = 4.0 / 3.0 + 4.0 * mu * mu;
    let y_term = 4.0 / 3.0 + 4.0 * nu * nu;
    let z_term = 4.0 * (1.0 - alpha).powi(2) + 4.0 / 3.0 * r2;
    (x_term + y_term + z_term) * (1.0 + r2)
}
