//! Jacobi eigensolver for symmetric 3x3 matrices.
//!
//! Small enough that cyclic Jacobi sweeps converge in a handful of
//! iterations; off-diagonal entries are driven below `1e-12` relative to
//! the matrix scale.

use nalgebra::{Matrix3, Vector3};

const OFF_DIAGONAL_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 64;

/// Eigenvalues (ascending) and matching unit eigenvectors of a symmetric
/// 3x3 matrix. The input is symmetrized before iterating so tiny
/// asymmetries from accumulation order cannot leak through.
pub(crate) fn sym_eigen3(m: &Matrix3<f64>) -> ([f64; 3], [Vector3<f64>; 3]) {
    let mut a = (m + m.transpose()) * 0.5;
    let mut v = Matrix3::identity();
    let scale = a
        .iter()
        .fold(0.0f64, |acc, x| acc.max(x.abs()))
        .max(f64::MIN_POSITIVE);
    let tol = OFF_DIAGONAL_TOL * scale;

    for _ in 0..MAX_SWEEPS {
        let off = a[(0, 1)].abs().max(a[(0, 2)].abs()).max(a[(1, 2)].abs());
        if off <= tol {
            break;
        }
        for &(p, q) in &[(0usize, 1usize), (0, 2), (1, 2)] {
            let apq = a[(p, q)];
            if apq.abs() <= tol * 1e-3 {
                continue;
            }
            let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            let mut j = Matrix3::identity();
            j[(p, p)] = c;
            j[(q, q)] = c;
            j[(p, q)] = s;
            j[(q, p)] = -s;
            a = j.transpose() * a * j;
            v *= j;
        }
    }

    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]).then(i.cmp(&j)));
    let values = [
        a[(order[0], order[0])],
        a[(order[1], order[1])],
        a[(order[2], order[2])],
    ];
    let vectors = [
        v.column(order[0]).into_owned(),
        v.column(order[1]).into_owned(),
        v.column(order[2]).into_owned(),
    ];
    (values, vectors)
}
