//! Almost-Kahler data: pointwise symplectic checks for a 2-form, the
//! compatible almost-complex structure, and the conformal normalization
//! that gives the distinguished form constant length sqrt(2).

use nalgebra::{Matrix4, Vector4};
use thiserror::Error;

use crate::expr::Expression;
use crate::geometry::{GeometryError, MetricField};
use crate::hodgeops::{TwoFormField, COORD_PAIRS};
use crate::lambda2::{self, TwoFormPoint, SQRT_2};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AkError {
    #[error("form length is {length}, expected sqrt(2); the raw J would not square to -I")]
    NotNormalized { length: f64 },
    #[error("form is not self-dual (defect {defect:.3e})")]
    NotSelfDual { defect: f64 },
    #[error("form vanishes at {point:?} (|w| = {norm:.3e}); conformal factor degenerates")]
    VanishingForm { point: [f64; 4], norm: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Compatible almost-complex structure in frame components.
#[derive(Debug, Clone, PartialEq)]
pub struct AlmostComplexStructure {
    pub j: Matrix4<f64>,
}

impl AlmostComplexStructure {
    pub fn apply(&self, x: &Vector4<f64>) -> Vector4<f64> {
        self.j * x
    }

    /// `|J^2 + I|`.
    pub fn square_defect(&self) -> f64 {
        (self.j * self.j + Matrix4::identity()).norm()
    }

    /// Worst violation of `g(Jx, Jy) = g(x, y)` over a vector sample,
    /// with `g` the identity (frame components).
    pub fn isometry_defect(&self, samples: &[(Vector4<f64>, Vector4<f64>)]) -> f64 {
        samples
            .iter()
            .map(|(x, y)| ((self.j * x).dot(&(self.j * y)) - x.dot(y)).abs())
            .fold(0.0, f64::max)
    }
}

/// Outcome of the pointwise symplectic check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymplecticCheck {
    pub selfdual: bool,
    pub selfdual_defect: f64,
    pub length: f64,
    /// `| w^w coefficient - |w|^2 |`; vanishes exactly when the volume
    /// identity holds.
    pub volume_identity_residual: f64,
}

/// Checks self-duality and the volume identity `w ^ w = |w|^2 vol`.
pub fn check_symplectic_pointwise(w: &TwoFormPoint, tau: f64) -> SymplecticCheck {
    let defect = w.sub(&lambda2::hodge_star(w)).norm();
    let length = w.norm();
    let residual = (lambda2::wedge(w, w) - w.norm_squared()).abs();
    SymplecticCheck {
        selfdual: defect <= tau,
        selfdual_defect: defect,
        length,
        volume_identity_residual: residual,
    }
}

/// Builds `J` from `g(Jx, y) = w(x, y)`. For a self-dual `w` of length
/// sqrt(2) the raw `J` squares to `-I`, which is asserted; both
/// preconditions are checked against the supplied metric.
pub fn build_acs(g: &Matrix4<f64>, w: &TwoFormPoint) -> Result<AlmostComplexStructure, AkError> {
    let ginv = g
        .try_inverse()
        .ok_or(AkError::Geometry(GeometryError::NotPositiveDefinite {
            point: [f64::NAN; 4],
            min_eigenvalue: 0.0,
        }))?;
    let omega = w.to_matrix();

    // |w|_g^2 = (1/2) tr(Omega g^-1 Omega^T g^-1)
    let length = (0.5 * (omega * ginv * omega.transpose() * ginv).trace())
        .max(0.0)
        .sqrt();
    if (length - SQRT_2).abs() > 1e-8 {
        return Err(AkError::NotNormalized { length });
    }
    let star = hodge_star_coord(g, 1.0, &omega);
    let defect = (star - omega).norm() / SQRT_2;
    if defect > 1e-8 {
        return Err(AkError::NotSelfDual { defect });
    }

    // g(Jx, y) = w(x, y) with w(x, y) = x^T Omega y gives J = -g^-1 Omega
    let j = -(ginv * omega);
    let acs = AlmostComplexStructure { j };
    debug_assert!(acs.square_defect() < 1e-8);
    Ok(acs)
}

/// Coordinate-component Hodge star on 2-forms for an arbitrary SPD metric:
/// `(*a)_cd = (orient/2) sqrt(det g) eps_abcd g^{ae} g^{bf} a_ef`.
pub fn hodge_star_coord(g: &Matrix4<f64>, orient: f64, a: &Matrix4<f64>) -> Matrix4<f64> {
    let ginv = g.try_inverse().expect("metric must be invertible");
    let sqrt_g = g.determinant().max(0.0).sqrt();
    let up = ginv * a * ginv.transpose();
    let mut out = Matrix4::zeros();
    for (c, d) in COORD_PAIRS {
        let mut acc = 0.0;
        for x in 0..4 {
            for y in 0..4 {
                let e = eps(x, y, c, d);
                if e != 0.0 {
                    acc += 0.5 * e * up[(x, y)];
                }
            }
        }
        let v = orient * sqrt_g * acc;
        out[(c, d)] = v;
        out[(d, c)] = -v;
    }
    out
}

fn eps(a: usize, b: usize, c: usize, d: usize) -> f64 {
    let idx = [a, b, c, d];
    let mut seen = [false; 4];
    for &i in &idx {
        if seen[i] {
            return 0.0;
        }
        seen[i] = true;
    }
    let mut sign = 1.0;
    for i in 0..4 {
        for j in (i + 1)..4 {
            if idx[i] > idx[j] {
                sign = -sign;
            }
        }
    }
    sign
}

/// Conformal factor `u^2` as an expression field.
#[derive(Debug, Clone)]
pub struct ConformalFactor {
    pub expr: Expression,
}

impl ConformalFactor {
    pub fn eval(&self, p: &[f64; 4]) -> Result<f64, crate::expr::DomainError> {
        self.expr.eval(p)
    }
}

/// Symbolic squared norm `|w|_g^2 = (1/2) g^{ik} g^{jl} w_ij w_kl` as an
/// expression (the inverse metric is built through the adjugate).
pub fn norm_squared_expression(g: &MetricField, w: &TwoFormField) -> Expression {
    let comps: [[Expression; 4]; 4] =
        std::array::from_fn(|i| std::array::from_fn(|j| g.component(i, j).clone()));
    let det = det4_expr(&comps);
    let mut acc = Expression::zero();
    // sum over independent pairs (i<j), (k<l); the four sign combinations of
    // the antisymmetric components collapse to a factor of 2
    for (i, j) in COORD_PAIRS {
        for (k, l) in COORD_PAIRS {
            let ginv_ik = Expression::div(cofactor_expr(&comps, k, i), det.clone());
            let ginv_jl = Expression::div(cofactor_expr(&comps, l, j), det.clone());
            let ginv_il = Expression::div(cofactor_expr(&comps, l, i), det.clone());
            let ginv_jk = Expression::div(cofactor_expr(&comps, k, j), det.clone());
            let pairing = Expression::sub(
                Expression::mul(ginv_ik, ginv_jl),
                Expression::mul(ginv_il, ginv_jk),
            );
            let term = Expression::mul(
                pairing,
                Expression::mul(w.component(i, j), w.component(k, l)),
            );
            acc = Expression::add(acc, term);
        }
    }
    acc
}

fn det3_expr(m: &[[Expression; 4]; 4], rows: [usize; 3], cols: [usize; 3]) -> Expression {
    let e = |r: usize, c: usize| m[rows[r]][cols[c]].clone();
    let term =
        |a: Expression, b: Expression, c: Expression| Expression::mul(a, Expression::mul(b, c));
    let mut acc = term(e(0, 0), e(1, 1), e(2, 2));
    acc = Expression::add(acc, term(e(0, 1), e(1, 2), e(2, 0)));
    acc = Expression::add(acc, term(e(0, 2), e(1, 0), e(2, 1)));
    acc = Expression::sub(acc, term(e(0, 2), e(1, 1), e(2, 0)));
    acc = Expression::sub(acc, term(e(0, 0), e(1, 2), e(2, 1)));
    acc = Expression::sub(acc, term(e(0, 1), e(1, 0), e(2, 2)));
    acc
}

fn cofactor_expr(m: &[[Expression; 4]; 4], i: usize, j: usize) -> Expression {
    let rows: Vec<usize> = (0..4).filter(|&r| r != i).collect();
    let cols: Vec<usize> = (0..4).filter(|&c| c != j).collect();
    let minor = det3_expr(m, [rows[0], rows[1], rows[2]], [cols[0], cols[1], cols[2]]);
    if (i + j) % 2 == 0 {
        minor
    } else {
        Expression::neg(minor)
    }
}

fn det4_expr(m: &[[Expression; 4]; 4]) -> Expression {
    let mut acc = Expression::zero();
    for j in 0..4 {
        let c = cofactor_expr(m, 0, j);
        acc = Expression::add(acc, Expression::mul(m[0][j].clone(), c));
    }
    acc
}

/// Rescales the metric so the given form has pointwise length sqrt(2):
/// `u^2 = |w|_g / sqrt(2)` and `g' = u^2 g`, both at expression level.
/// The form must be bounded away from zero on the sampled points.
pub fn conformal_normalize(
    g: &MetricField,
    w: &TwoFormField,
    points: &[[f64; 4]],
) -> Result<(ConformalFactor, MetricField), AkError> {
    let norm2 = norm_squared_expression(g, w);
    const VANISH_TOL: f64 = 1e-9;
    for p in points {
        let v = norm2.eval(p).map_err(GeometryError::from)?;
        if v.max(0.0).sqrt() <= VANISH_TOL {
            return Err(AkError::VanishingForm {
                point: *p,
                norm: v.max(0.0).sqrt(),
            });
        }
    }
    let u2 = Expression::div(
        Expression::call(crate::expr::Func::Sqrt, norm2),
        Expression::constant(SQRT_2),
    );
    let scaled: [[Expression; 4]; 4] = std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            if i <= j {
                Expression::mul(u2.clone(), g.component(i, j).clone())
            } else {
                Expression::zero()
            }
        })
    });
    let g_prime = MetricField::new(g.domain, g.orientation, &scaled);
    Ok((ConformalFactor { expr: u2 }, g_prime))
}

/// Largest pointwise difference between the metric star and the star of the
/// conformally rescaled metric, over the sample; conformal invariance of the
/// 2-form star makes this vanish to rounding.
pub fn star_conformal_invariance(
    g: &MetricField,
    factor: &Expression,
    alpha: &TwoFormField,
    points: &[[f64; 4]],
) -> Result<f64, AkError> {
    let mut worst: f64 = 0.0;
    for p in points {
        let gp = g.metric_at(p)?;
        let f = factor.eval(p).map_err(GeometryError::from)?;
        let a = alpha.value_at(p)?;
        let s1 = hodge_star_coord(&gp, g.orientation.sign(), &a);
        let scaled = gp * f;
        if nalgebra::Cholesky::new(scaled).is_none() {
            return Err(AkError::Geometry(GeometryError::NotPositiveDefinite {
                point: *p,
                min_eigenvalue: f,
            }));
        }
        let s2 = hodge_star_coord(&scaled, g.orientation.sign(), &a);
        // norm of the component difference, with the 2-form convention
        let diff = (s1 - s2).norm() / SQRT_2;
        worst = worst.max(diff);
    }
    Ok(worst)
}

/// Pointwise norm of an expression 2-form in the geometry of `g`.
pub fn form_length_at(g: &MetricField, w: &TwoFormField, p: &[f64; 4]) -> Result<f64, AkError> {
    let gp = g.metric_at(p)?;
    let ginv = gp.try_inverse().expect("SPD metric");
    let omega = w.value_at(p)?;
    Ok((0.5 * (omega * ginv * omega.transpose() * ginv).trace())
        .max(0.0)
        .sqrt())
}
