//! Fixed-size 4×4 helpers over plain `f64` and over jets.

use crate::expr::Jet;

pub type Vec4 = [f64; 4];
pub type Mat4 = [[f64; 4]; 4];
pub type JetVec = [Jet; 4];
pub type JetMat = [[Jet; 4]; 4];

pub const IDENTITY: Mat4 = [
    [1.0, 0.0, 0.0, 0.0],
    [0.0, 1.0, 0.0, 0.0],
    [0.0, 0.0, 1.0, 0.0],
    [0.0, 0.0, 0.0, 1.0],
];

pub fn mat_mul(a: &Mat4, b: &Mat4) -> Mat4 {
    std::array::from_fn(|i| std::array::from_fn(|j| (0..4).map(|k| a[i][k] * b[k][j]).sum()))
}

pub fn mat_vec(a: &Mat4, v: &Vec4) -> Vec4 {
    std::array::from_fn(|i| (0..4).map(|k| a[i][k] * v[k]).sum())
}

pub fn dot(a: &Vec4, b: &Vec4) -> f64 {
    (0..4).map(|i| a[i] * b[i]).sum()
}

pub fn max_abs_mat(a: &Mat4) -> f64 {
    a.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn max_abs_vec(a: &Vec4) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// LU factorisation with partial pivoting. Returns the packed factors, the
/// row permutation and the determinant.
fn lu(a: &Mat4) -> (Mat4, [usize; 4], f64) {
    let mut m = *a;
    let mut perm = [0, 1, 2, 3];
    let mut det = 1.0;
    for col in 0..4 {
        let pivot = (col..4)
            .max_by(|&r, &s| m[r][col].abs().total_cmp(&m[s][col].abs()))
            .unwrap();
        if pivot != col {
            m.swap(pivot, col);
            perm.swap(pivot, col);
            det = -det;
        }
        let p = m[col][col];
        det *= p;
        if p == 0.0 {
            continue;
        }
        for r in col + 1..4 {
            let f = m[r][col] / p;
            m[r][col] = f;
            for c in col + 1..4 {
                m[r][c] -= f * m[col][c];
            }
        }
    }
    (m, perm, det)
}

pub fn det(a: &Mat4) -> f64 {
    lu(a).2
}

fn lu_solve(m: &Mat4, perm: &[usize; 4], b: &Vec4) -> Vec4 {
    let mut x: Vec4 = std::array::from_fn(|i| b[perm[i]]);
    for i in 0..4 {
        for k in 0..i {
            x[i] -= m[i][k] * x[k];
        }
    }
    for i in (0..4).rev() {
        for k in i + 1..4 {
            x[i] -= m[i][k] * x[k];
        }
        x[i] /= m[i][i];
    }
    x
}

/// Solve `a x = b`; `None` if `|det a| < det_floor`.
pub fn solve(a: &Mat4, b: &Vec4, det_floor: f64) -> Option<(Vec4, f64)> {
    let (m, perm, d) = lu(a);
    if !(d.abs() >= det_floor) {
        return None;
    }
    Some((lu_solve(&m, &perm, b), d))
}

/// Inverse and determinant; `None` if `|det a| < det_floor`.
pub fn inverse(a: &Mat4, det_floor: f64) -> Option<(Mat4, f64)> {
    let (m, perm, d) = lu(a);
    if !(d.abs() >= det_floor) {
        return None;
    }
    let mut inv = [[0.0; 4]; 4];
    for j in 0..4 {
        let mut e = [0.0; 4];
        e[j] = 1.0;
        let col = lu_solve(&m, &perm, &e);
        for i in 0..4 {
            inv[i][j] = col[i];
        }
    }
    Some((inv, d))
}

/// Numbers of positive and negative eigenvalues of a symmetric matrix.
pub fn inertia(a: &Mat4) -> (usize, usize) {
    let m = nalgebra::Matrix4::from_fn(|i, j| 0.5 * (a[i][j] + a[j][i]));
    let eig = m.symmetric_eigenvalues();
    let pos = eig.iter().filter(|&&v| v > 0.0).count();
    let neg = eig.iter().filter(|&&v| v < 0.0).count();
    (pos, neg)
}

pub fn values(m: &JetMat) -> Mat4 {
    std::array::from_fn(|i| std::array::from_fn(|j| m[i][j].value()))
}

pub fn vec_values(v: &JetVec) -> Vec4 {
    std::array::from_fn(|i| v[i].value())
}

pub fn jet_mat_mul(a: &JetMat, b: &JetMat) -> JetMat {
    std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            let order = a[i][0].order().min(b[0][j].order());
            let mut acc = Jet::zero(order);
            for k in 0..4 {
                acc.add_product(&a[i][k], &b[k][j]);
            }
            acc
        })
    })
}

/// Inverse of a matrix of jets, given the inverse of its value part:
/// (A₀ + H)⁻¹ = Σₙ (−A₀⁻¹H)ⁿ A₀⁻¹, exact through the jet order since H has
/// no constant term.
pub fn jet_inverse(a: &JetMat, value_inverse: &Mat4) -> JetMat {
    let order = a[0][0].order();
    let a0inv: JetMat = std::array::from_fn(|i| std::array::from_fn(|j| Jet::constant(value_inverse[i][j], order)));
    let h: JetMat = std::array::from_fn(|i| std::array::from_fn(|j| a[i][j].add_scalar(-a[i][j].value())));
    let x = jet_mat_mul(&a0inv, &h);
    let minus_x: JetMat = std::array::from_fn(|i| std::array::from_fn(|j| -&x[i][j]));
    let mut term = a0inv.clone();
    let mut sum = a0inv;
    for _ in 0..order {
        term = jet_mat_mul(&minus_x, &term);
        for i in 0..4 {
            for j in 0..4 {
                sum[i][j] = &sum[i][j] + &term[i][j];
            }
        }
    }
    sum
}

/// Determinant of a matrix of jets by Laplace expansion along the first row.
pub fn jet_det(a: &JetMat) -> Jet {
    let minor3 = |r: [usize; 3], c: [usize; 3]| -> Jet {
        let m = |i: usize, j: usize| &a[r[i]][c[j]];
        let t1 = m(0, 0) * &(m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1));
        let t2 = m(0, 1) * &(m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0));
        let t3 = m(0, 2) * &(m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0));
        t1 - t2 + t3
    };
    let rows = [1, 2, 3];
    let cols = [[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]];
    let mut det = Jet::zero(a[0][0].order());
    for (j, c) in cols.iter().enumerate() {
        let term = &a[0][j] * &minor3(rows, *c);
        det = if j % 2 == 0 { det + term } else { det - term };
    }
    det
}
