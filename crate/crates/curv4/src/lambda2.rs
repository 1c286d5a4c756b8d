//! Pointwise algebra of 2-forms in an oriented orthonormal frame.
//!
//! The basis of Lambda^2 is ordered
//!
//! ```text
//! b1 = e1^e2   b2 = e1^e3   b3 = e1^e4
//! b4 = e3^e4   b5 = e4^e2   b6 = e2^e3
//! ```
//!
//! so that the self-dual basis is `phi_i = (b_i + b_{i+3})/sqrt(2)` and the
//! anti-self-dual basis `psi_i = (b_i - b_{i+3})/sqrt(2)`. With this order
//! the Hodge star swaps the two halves, the wedge pairing couples `b_i`
//! with `b_{i+3}`, and curvature-operator blocks sit on fixed index ranges.
//! Norms follow `|e^i ^ e^j| = 1`, i.e. `|a|^2 = (1/2) sum a_ij^2`.

use nalgebra::{Matrix4, Vector3, Vector4};
use thiserror::Error;

/// Index pairs of the Lambda^2 basis, in order.
pub const BASIS_PAIRS: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (2, 3), (3, 1), (1, 2)];

pub const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Relative decomposability tolerance for the wedge test.
pub const DECOMPOSABILITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Lambda2Error {
    #[error("form is not decomposable: |a^a| = {wedge_abs:.3e} exceeds {tol:.3e} * |a|^2")]
    NotDecomposable { wedge_abs: f64, tol: f64 },
    #[error("zero 2-form cannot be factored")]
    ZeroForm,
    #[error("expected a unit form, got |a| = {norm}")]
    NotUnit { norm: f64 },
    #[error("form is not self-dual: |a - *a| = {defect:.3e}")]
    NotSelfDual { defect: f64 },
    #[error("form is not anti-self-dual: |a + *a| = {defect:.3e}")]
    NotAntiSelfDual { defect: f64 },
}

/// A 2-form at a point, stored on the six basis components (antisymmetry is
/// structural, not a runtime invariant).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TwoFormPoint {
    pub c: [f64; 6],
}

impl TwoFormPoint {
    pub const ZERO: TwoFormPoint = TwoFormPoint { c: [0.0; 6] };

    pub fn new(c: [f64; 6]) -> TwoFormPoint {
        TwoFormPoint { c }
    }

    /// `u ^ v` for frame-component vectors.
    pub fn wedge_of(u: &Vector4<f64>, v: &Vector4<f64>) -> TwoFormPoint {
        let mut c = [0.0; 6];
        for (a, (i, j)) in BASIS_PAIRS.iter().enumerate() {
            c[a] = u[*i] * v[*j] - u[*j] * v[*i];
        }
        TwoFormPoint { c }
    }

    /// Reads components off an antisymmetric matrix (upper triangle wins).
    pub fn from_matrix(m: &Matrix4<f64>) -> TwoFormPoint {
        let mut c = [0.0; 6];
        for (a, (i, j)) in BASIS_PAIRS.iter().enumerate() {
            c[a] = m[(*i, *j)];
        }
        TwoFormPoint { c }
    }

    /// Full antisymmetric component matrix `a_ij`.
    pub fn to_matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::zeros();
        for (a, (i, j)) in BASIS_PAIRS.iter().enumerate() {
            m[(*i, *j)] = self.c[a];
            m[(*j, *i)] = -self.c[a];
        }
        m
    }

    pub fn component(&self, i: usize, j: usize) -> f64 {
        self.to_matrix()[(i, j)]
    }

    pub fn add(&self, other: &TwoFormPoint) -> TwoFormPoint {
        let mut c = self.c;
        for (x, y) in c.iter_mut().zip(other.c.iter()) {
            *x += y;
        }
        TwoFormPoint { c }
    }

    pub fn sub(&self, other: &TwoFormPoint) -> TwoFormPoint {
        let mut c = self.c;
        for (x, y) in c.iter_mut().zip(other.c.iter()) {
            *x -= y;
        }
        TwoFormPoint { c }
    }

    pub fn scale(&self, s: f64) -> TwoFormPoint {
        let mut c = self.c;
        for x in c.iter_mut() {
            *x *= s;
        }
        TwoFormPoint { c }
    }

    /// Lambda^2 inner product.
    pub fn inner(&self, other: &TwoFormPoint) -> f64 {
        self.c.iter().zip(other.c.iter()).map(|(a, b)| a * b).sum()
    }

    pub fn norm_squared(&self) -> f64 {
        self.inner(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    /// Coordinates on the self-dual basis `phi_1..phi_3`.
    pub fn sd_coords(&self) -> Vector3<f64> {
        Vector3::new(
            (self.c[0] + self.c[3]) / SQRT_2,
            (self.c[1] + self.c[4]) / SQRT_2,
            (self.c[2] + self.c[5]) / SQRT_2,
        )
    }

    /// Coordinates on the anti-self-dual basis `psi_1..psi_3`.
    pub fn asd_coords(&self) -> Vector3<f64> {
        Vector3::new(
            (self.c[0] - self.c[3]) / SQRT_2,
            (self.c[1] - self.c[4]) / SQRT_2,
            (self.c[2] - self.c[5]) / SQRT_2,
        )
    }

    pub fn from_sd_coords(a: &Vector3<f64>) -> TwoFormPoint {
        let s = 1.0 / SQRT_2;
        TwoFormPoint::new([a[0] * s, a[1] * s, a[2] * s, a[0] * s, a[1] * s, a[2] * s])
    }

    pub fn from_asd_coords(a: &Vector3<f64>) -> TwoFormPoint {
        let s = 1.0 / SQRT_2;
        TwoFormPoint::new([
            a[0] * s,
            a[1] * s,
            a[2] * s,
            -a[0] * s,
            -a[1] * s,
            -a[2] * s,
        ])
    }

    /// Pullback along a frame change: `(R^* a)(x, y) = a(Rx, Ry)`.
    pub fn pullback(&self, r: &Matrix4<f64>) -> TwoFormPoint {
        let m = self.to_matrix();
        TwoFormPoint::from_matrix(&(r.transpose() * m * r))
    }
}

/// Coefficient of `a ^ b` on the oriented volume form `e1^e2^e3^e4`.
pub fn wedge(a: &TwoFormPoint, b: &TwoFormPoint) -> f64 {
    let mut acc = 0.0;
    for i in 0..3 {
        acc += a.c[i] * b.c[i + 3] + a.c[i + 3] * b.c[i];
    }
    acc
}

/// Hodge star on 2-forms; in this basis it swaps the two 3-blocks.
pub fn hodge_star(a: &TwoFormPoint) -> TwoFormPoint {
    TwoFormPoint::new([a.c[3], a.c[4], a.c[5], a.c[0], a.c[1], a.c[2]])
}

/// Orthogonal splitting `a = a_plus + a_minus` with `*a_pm = +-a_pm`.
pub fn sd_asd_split(a: &TwoFormPoint) -> (TwoFormPoint, TwoFormPoint) {
    let star = hodge_star(a);
    (a.add(&star).scale(0.5), a.sub(&star).scale(0.5))
}

/// Factors a decomposable 2-form as `a = |a| f1 ^ f2` with orthonormal
/// `(f1, f2)`, deterministically: `f1` is the normalized projection of the
/// lowest-index coordinate axis that meets the plane, oriented positively
/// along that axis; the sign of `f2` makes the factorization exact.
pub fn decompose_simple(a: &TwoFormPoint) -> Result<(Vector4<f64>, Vector4<f64>), Lambda2Error> {
    let norm2 = a.norm_squared();
    if norm2 == 0.0 {
        return Err(Lambda2Error::ZeroForm);
    }
    let w = wedge(a, a);
    if w.abs() > DECOMPOSABILITY_TOL * norm2 {
        return Err(Lambda2Error::NotDecomposable {
            wedge_abs: w.abs(),
            tol: DECOMPOSABILITY_TOL,
        });
    }

    let m = a.to_matrix();
    // column of largest norm lies in the plane of the form
    let mut best = 0;
    let mut best_n = 0.0;
    for j in 0..4 {
        let n = m.column(j).norm_squared();
        if n > best_n {
            best = j;
            best_n = n;
        }
    }
    let v1 = m.column(best).into_owned() / best_n.sqrt();
    let mv1 = m * v1;
    let v2 = mv1 / mv1.norm();

    // deterministic in-plane basis
    let mut f1 = Vector4::zeros();
    for axis in 0..4 {
        let e = Vector4::ith(axis, 1.0);
        let proj = v1 * v1.dot(&e) + v2 * v2.dot(&e);
        let n = proj.norm();
        if n > 1e-8 {
            f1 = proj / n;
            break;
        }
    }
    let mut f2 = v2 - f1 * f1.dot(&v2);
    if f2.norm() < 1e-8 {
        f2 = v1 - f1 * f1.dot(&v1);
    }
    f2 /= f2.norm();
    if a.inner(&TwoFormPoint::wedge_of(&f1, &f2)) < 0.0 {
        f2 = -f2;
    }
    Ok((f1, f2))
}

/// Recovers the positively oriented orthonormal frame `(f1..f4)` with
/// `a_plus = (f1^f2 + f3^f4)/sqrt(2)` and `a_minus = (f1^f2 - f3^f4)/sqrt(2)`
/// from a unit self-dual / anti-self-dual pair.
pub fn frame_from_eigenforms(
    a_plus: &TwoFormPoint,
    a_minus: &TwoFormPoint,
) -> Result<[Vector4<f64>; 4], Lambda2Error> {
    const UNIT_TOL: f64 = 1e-9;
    let np = a_plus.norm();
    if (np - 1.0).abs() > UNIT_TOL {
        return Err(Lambda2Error::NotUnit { norm: np });
    }
    let nm = a_minus.norm();
    if (nm - 1.0).abs() > UNIT_TOL {
        return Err(Lambda2Error::NotUnit { norm: nm });
    }
    let sd_defect = a_plus.sub(&hodge_star(a_plus)).norm();
    if sd_defect > UNIT_TOL {
        return Err(Lambda2Error::NotSelfDual { defect: sd_defect });
    }
    let asd_defect = a_minus.add(&hodge_star(a_minus)).norm();
    if asd_defect > UNIT_TOL {
        return Err(Lambda2Error::NotAntiSelfDual { defect: asd_defect });
    }

    // a_plus + a_minus = sqrt(2) f1 ^ f2 is decomposable by the duality split
    let sigma = a_plus.add(a_minus);
    let (f1, f2) = decompose_simple(&sigma)?;
    let delta = a_plus.sub(a_minus).scale(1.0 / SQRT_2);
    let (g1, g2) = decompose_simple(&delta)?;

    // clean up cross terms; corrections are O(input tolerance)
    let mut f3 = g1 - f1 * f1.dot(&g1) - f2 * f2.dot(&g1);
    f3 /= f3.norm();
    let mut f4 = g2 - f1 * f1.dot(&g2) - f2 * f2.dot(&g2) - f3 * f3.dot(&g2);
    f4 /= f4.norm();

    // verify the displayed reconstruction; failure means the inputs were not
    // a genuine unit SD/ASD pair
    let rec_plus = TwoFormPoint::wedge_of(&f1, &f2)
        .add(&TwoFormPoint::wedge_of(&f3, &f4))
        .scale(1.0 / SQRT_2);
    let rec_minus = TwoFormPoint::wedge_of(&f1, &f2)
        .sub(&TwoFormPoint::wedge_of(&f3, &f4))
        .scale(1.0 / SQRT_2);
    let residual = rec_plus
        .sub(a_plus)
        .norm()
        .max(rec_minus.sub(a_minus).norm());
    if residual > 1e-7 {
        return Err(Lambda2Error::NotDecomposable {
            wedge_abs: residual,
            tol: 1e-7,
        });
    }
    Ok([f1, f2, f3, f4])
}
