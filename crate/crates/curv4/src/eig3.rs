//! Deterministic symmetric 3x3 eigensolver.
//!
//! Cyclic Jacobi with a fixed rotation order, so results are reproducible
//! and accurate to machine precision even for clustered spectra (the
//! closed-form Cardano route loses half the digits inside a near-degenerate
//! pair, which the plane-search oracle notices). Every quantity in a Jacobi
//! rotation flips sign coherently under conjugation by a signed diagonal,
//! so orientation flips swap the Weyl spectra bit-for-bit. Output order is
//! ascending; each eigenvector has its largest-magnitude entry positive.

use nalgebra::{Matrix3, Vector3};

/// Ascending eigenvalues with matching orthonormal eigenvectors (columns).
#[derive(Debug, Clone, Copy)]
pub struct Eig3 {
    pub values: [f64; 3],
    pub vectors: Matrix3<f64>,
}

const PAIRS: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];
const MAX_SWEEPS: usize = 32;

fn off_diagonal_norm(m: &Matrix3<f64>) -> f64 {
    (m[(0, 1)] * m[(0, 1)] + m[(0, 2)] * m[(0, 2)] + m[(1, 2)] * m[(1, 2)]).sqrt()
}

fn sign_fix(v: Vector3<f64>) -> Vector3<f64> {
    let mut idx = 0;
    for i in 1..3 {
        if v[i].abs() > v[idx].abs() {
            idx = i;
        }
    }
    if v[idx] < 0.0 {
        -v
    } else {
        v
    }
}

/// Symmetric eigendecomposition with deterministic ordering and signs.
pub fn eigen_sym3(a: &Matrix3<f64>) -> Eig3 {
    let scale = a.norm();
    if scale == 0.0 || !scale.is_finite() {
        return Eig3 {
            values: [0.0; 3],
            vectors: Matrix3::identity(),
        };
    }
    let mut m = a / scale;
    let mut v = Matrix3::identity();

    for _ in 0..MAX_SWEEPS {
        if off_diagonal_norm(&m) <= 1e-16 {
            break;
        }
        for &(p, q) in &PAIRS {
            let apq = m[(p, q)];
            if apq == 0.0 {
                continue;
            }
            let app = m[(p, p)];
            let aqq = m[(q, q)];
            // stable rotation: t = sgn(theta) / (|theta| + sqrt(theta^2+1))
            let theta = (aqq - app) / (2.0 * apq);
            let t = if theta >= 0.0 {
                1.0 / (theta + (theta * theta + 1.0).sqrt())
            } else {
                -1.0 / (-theta + (theta * theta + 1.0).sqrt())
            };
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;

            m[(p, p)] = app - t * apq;
            m[(q, q)] = aqq + t * apq;
            m[(p, q)] = 0.0;
            m[(q, p)] = 0.0;
            let r = 3 - p - q;
            let arp = m[(r, p)];
            let arq = m[(r, q)];
            m[(r, p)] = c * arp - s * arq;
            m[(p, r)] = m[(r, p)];
            m[(r, q)] = s * arp + c * arq;
            m[(q, r)] = m[(r, q)];

            for row in 0..3 {
                let vrp = v[(row, p)];
                let vrq = v[(row, q)];
                v[(row, p)] = c * vrp - s * vrq;
                v[(row, q)] = s * vrp + c * vrq;
            }
        }
    }

    let raw = [m[(0, 0)], m[(1, 1)], m[(2, 2)]];
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&i, &j| raw[i].partial_cmp(&raw[j]).unwrap().then(i.cmp(&j)));
    let mut values = [0.0; 3];
    let mut vectors = Matrix3::zeros();
    for (slot, &i) in idx.iter().enumerate() {
        values[slot] = raw[i] * scale;
        vectors.set_column(slot, &sign_fix(v.column(i).into_owned()));
    }
    Eig3 { values, vectors }
}
