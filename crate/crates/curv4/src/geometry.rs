//! Chart-level Riemannian geometry: metric fields with exact symbolic
//! jets, orthonormal frames, Christoffel symbols and the Riemann tensor.
//!
//! Conventions (locked by the sphere tests): the curvature of
//! `R(X,Y)Z = nabla_X nabla_Y Z - nabla_Y nabla_X Z - nabla_[X,Y] Z` is
//! paired as `R(X,Y,Z,W) = g(R(X,Y)Z, W)`, and the sectional curvature of an
//! orthonormal pair is `K(X,Y) = R(X,Y,Y,X)`, positive on round spheres.
//! All downstream modules receive curvature in the orthonormal frame `E`,
//! so the Lambda^2 machinery can use the Euclidean pairing on index pairs.

use std::sync::OnceLock;

use nalgebra::{Matrix4, Vector4};
use thiserror::Error;

use crate::expr::{DomainError, Expression};
use crate::jet::Jet2;

/// Chart domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    Box4 { lo: [f64; 4], hi: [f64; 4] },
    Ball { radius: f64 },
}

impl Domain {
    pub fn unit_box() -> Domain {
        Domain::Box4 {
            lo: [-1.0; 4],
            hi: [1.0; 4],
        }
    }

    pub fn contains(&self, p: &[f64; 4]) -> bool {
        match self {
            Domain::Box4 { lo, hi } => (0..4).all(|i| lo[i] <= p[i] && p[i] <= hi[i]),
            Domain::Ball { radius } => p.iter().map(|x| x * x).sum::<f64>() <= radius * radius,
        }
    }

    /// Axis-aligned box contained in the domain, used for grid sampling.
    /// For a ball this is the inscribed box (half-side `r/2` in R^4).
    pub fn sampling_box(&self) -> ([f64; 4], [f64; 4]) {
        match self {
            Domain::Box4 { lo, hi } => (*lo, *hi),
            Domain::Ball { radius } => {
                let h = radius / 2.0;
                ([-h; 4], [h; 4])
            }
        }
    }
}

/// Orientation of the chart, the sign attached to `dx1^dx2^dx3^dx4`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    Positive,
    Negative,
}

impl Orientation {
    pub fn sign(self) -> f64 {
        match self {
            Orientation::Positive => 1.0,
            Orientation::Negative => -1.0,
        }
    }

    pub fn flipped(self) -> Orientation {
        match self {
            Orientation::Positive => Orientation::Negative,
            Orientation::Negative => Orientation::Positive,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error(
        "metric is not positive definite at {point:?} (smallest eigenvalue {min_eigenvalue:.6e})"
    )]
    NotPositiveDefinite {
        point: [f64; 4],
        min_eigenvalue: f64,
    },
    #[error("point {point:?} lies outside the chart domain")]
    OutsideDomain { point: [f64; 4] },
    #[error(transparent)]
    Domain(#[from] DomainError),
}

type Expr4x4 = [[Expression; 4]; 4];

struct FieldJets {
    /// d1[k][i][j] = D_k g_ij
    d1: [Expr4x4; 4],
    /// d2[k][l][i][j] = D_k D_l g_ij (symmetric in k, l)
    d2: [[Expr4x4; 4]; 4],
}

/// Symmetric 4x4 matrix of expressions over a chart, plus orientation.
pub struct MetricField {
    pub domain: Domain,
    pub orientation: Orientation,
    comps: Expr4x4,
    jets: OnceLock<Box<FieldJets>>,
}

impl Clone for MetricField {
    fn clone(&self) -> Self {
        MetricField {
            domain: self.domain,
            orientation: self.orientation,
            comps: self.comps.clone(),
            jets: OnceLock::new(),
        }
    }
}

impl std::fmt::Debug for MetricField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MetricField")
            .field("domain", &self.domain)
            .field("orientation", &self.orientation)
            .finish_non_exhaustive()
    }
}

impl MetricField {
    /// Builds a field from the upper triangle (entries with `i <= j`); the
    /// lower triangle is mirrored.
    pub fn new(domain: Domain, orientation: Orientation, upper: &[[Expression; 4]; 4]) -> Self {
        let comps = std::array::from_fn(|i| {
            std::array::from_fn(|j| {
                if i <= j {
                    upper[i][j].clone()
                } else {
                    upper[j][i].clone()
                }
            })
        });
        MetricField {
            domain,
            orientation,
            comps,
            jets: OnceLock::new(),
        }
    }

    pub fn flat(domain: Domain) -> Self {
        let upper = std::array::from_fn(|i| {
            std::array::from_fn(|j| {
                if i == j {
                    Expression::one()
                } else {
                    Expression::zero()
                }
            })
        });
        MetricField::new(domain, Orientation::Positive, &upper)
    }

    pub fn component(&self, i: usize, j: usize) -> &Expression {
        &self.comps[i][j]
    }

    pub fn with_orientation(&self, orientation: Orientation) -> MetricField {
        let mut out = self.clone();
        out.orientation = orientation;
        out
    }

    fn jets(&self) -> &FieldJets {
        self.jets.get_or_init(|| {
            let d1: [Expr4x4; 4] = std::array::from_fn(|k| {
                std::array::from_fn(|i| {
                    std::array::from_fn(|j| {
                        if i <= j {
                            self.comps[i][j].differentiate(k)
                        } else {
                            Expression::zero()
                        }
                    })
                })
            });
            let d2: [[Expr4x4; 4]; 4] = std::array::from_fn(|k| {
                std::array::from_fn(|l| {
                    std::array::from_fn(|i| {
                        std::array::from_fn(|j| {
                            if i <= j && k <= l {
                                d1[k][i][j].differentiate(l)
                            } else {
                                Expression::zero()
                            }
                        })
                    })
                })
            });
            Box::new(FieldJets { d1, d2 })
        })
    }

    /// Metric value with positivity check.
    pub fn metric_at(&self, p: &[f64; 4]) -> Result<Matrix4<f64>, GeometryError> {
        if !self.domain.contains(p) {
            return Err(GeometryError::OutsideDomain { point: *p });
        }
        let mut g = Matrix4::zeros();
        for i in 0..4 {
            for j in i..4 {
                let v = self.comps[i][j].eval(p)?;
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        check_spd(&g, p)?;
        Ok(g)
    }

    /// Metric plus first and second derivatives at `p`, all exact.
    pub fn metric_jet(&self, p: &[f64; 4]) -> Result<MetricJet, GeometryError> {
        let jet = self.raw_jet(p)?;
        check_spd(&jet.g, p)?;
        Ok(jet)
    }

    /// Like [`Self::metric_jet`] but without the positivity check, for
    /// symmetric expression matrices that are not metrics (perturbation
    /// directions).
    pub fn raw_jet(&self, p: &[f64; 4]) -> Result<MetricJet, GeometryError> {
        if !self.domain.contains(p) {
            return Err(GeometryError::OutsideDomain { point: *p });
        }
        let jets = self.jets();
        let mut g = Matrix4::zeros();
        let mut dg = [Matrix4::zeros(); 4];
        let mut ddg = [[Matrix4::zeros(); 4]; 4];
        for i in 0..4 {
            for j in i..4 {
                let v = self.comps[i][j].eval(p)?;
                g[(i, j)] = v;
                g[(j, i)] = v;
                for k in 0..4 {
                    let v = jets.d1[k][i][j].eval(p)?;
                    dg[k][(i, j)] = v;
                    dg[k][(j, i)] = v;
                    for l in k..4 {
                        let v = jets.d2[k][l][i][j].eval(p)?;
                        ddg[k][l][(i, j)] = v;
                        ddg[k][l][(j, i)] = v;
                        ddg[l][k][(i, j)] = v;
                        ddg[l][k][(j, i)] = v;
                    }
                }
            }
        }
        Ok(MetricJet {
            point: *p,
            g,
            dg,
            ddg,
        })
    }

    /// Component values as second-order jets (for exterior-calculus work).
    pub fn component_jets(&self, p: &[f64; 4]) -> Result<[[Jet2; 4]; 4], GeometryError> {
        let mj = self.metric_jet(p)?;
        Ok(mj.as_jet2())
    }
}

fn check_spd(g: &Matrix4<f64>, p: &[f64; 4]) -> Result<(), GeometryError> {
    if nalgebra::Cholesky::new(*g).is_none() {
        let eig = nalgebra::SymmetricEigen::new(*g);
        let min = eig
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        return Err(GeometryError::NotPositiveDefinite {
            point: *p,
            min_eigenvalue: min,
        });
    }
    Ok(())
}

/// Pointwise 2-jet of the metric.
#[derive(Debug, Clone)]
pub struct MetricJet {
    pub point: [f64; 4],
    pub g: Matrix4<f64>,
    pub dg: [Matrix4<f64>; 4],
    pub ddg: [[Matrix4<f64>; 4]; 4],
}

impl MetricJet {
    /// Linear combination `a + t * b` of two jets at the same point
    /// (used by perturbation families, where the metric is affine in `t`).
    pub fn affine(a: &MetricJet, b: &MetricJet, t: f64) -> MetricJet {
        let mut out = a.clone();
        out.g += b.g * t;
        for k in 0..4 {
            out.dg[k] += b.dg[k] * t;
            for l in 0..4 {
                out.ddg[k][l] += b.ddg[k][l] * t;
            }
        }
        out
    }

    pub fn as_jet2(&self) -> [[Jet2; 4]; 4] {
        std::array::from_fn(|i| {
            std::array::from_fn(|j| {
                let mut jet = Jet2::constant(self.g[(i, j)]);
                for k in 0..4 {
                    jet.d[k] = self.dg[k][(i, j)];
                    for l in 0..4 {
                        jet.h[k][l] = self.ddg[k][l][(i, j)];
                    }
                }
                jet
            })
        })
    }

    /// Christoffel symbols `Gamma[k][i][j]`, symmetric in `(i, j)`.
    pub fn christoffel(&self) -> Result<Christoffel, GeometryError> {
        let ginv = invert(&self.g, &self.point)?;
        let mut gamma = [[[0.0; 4]; 4]; 4];
        for k in 0..4 {
            for i in 0..4 {
                for j in i..4 {
                    let mut acc = 0.0;
                    for l in 0..4 {
                        acc += ginv[(k, l)]
                            * (self.dg[i][(j, l)] + self.dg[j][(i, l)] - self.dg[l][(i, j)]);
                    }
                    gamma[k][i][j] = 0.5 * acc;
                    gamma[k][j][i] = gamma[k][i][j];
                }
            }
        }
        Ok(gamma)
    }

    /// Christoffel symbols together with their first derivatives
    /// `dgamma[m][k][i][j] = D_m Gamma^k_ij`.
    pub fn christoffel_jet(&self) -> Result<(Christoffel, DChristoffel), GeometryError> {
        let ginv = invert(&self.g, &self.point)?;
        let gamma = self.christoffel()?;
        // D_m g^{kl} = -(g^-1 dg[m] g^-1)
        let dginv: [Matrix4<f64>; 4] = std::array::from_fn(|m| -(ginv * self.dg[m] * ginv));
        let mut dgamma = [[[[0.0; 4]; 4]; 4]; 4];
        for m in 0..4 {
            for k in 0..4 {
                for i in 0..4 {
                    for j in i..4 {
                        let mut acc = 0.0;
                        for l in 0..4 {
                            acc += dginv[m][(k, l)]
                                * (self.dg[i][(j, l)] + self.dg[j][(i, l)] - self.dg[l][(i, j)]);
                            acc += ginv[(k, l)]
                                * (self.ddg[m][i][(j, l)] + self.ddg[m][j][(i, l)]
                                    - self.ddg[m][l][(i, j)]);
                        }
                        dgamma[m][k][i][j] = 0.5 * acc;
                        dgamma[m][k][j][i] = dgamma[m][k][i][j];
                    }
                }
            }
        }
        Ok((gamma, dgamma))
    }
}

pub type Christoffel = [[[f64; 4]; 4]; 4];
pub type DChristoffel = [[[[f64; 4]; 4]; 4]; 4];
pub type Riemann4 = [[[[f64; 4]; 4]; 4]; 4];

fn invert(g: &Matrix4<f64>, p: &[f64; 4]) -> Result<Matrix4<f64>, GeometryError> {
    g.try_inverse().ok_or(GeometryError::NotPositiveDefinite {
        point: *p,
        min_eigenvalue: 0.0,
    })
}

/// All pointwise curvature data in the orthonormal frame.
#[derive(Debug, Clone)]
pub struct CurvaturePoint {
    pub point: [f64; 4],
    pub metric: Matrix4<f64>,
    /// Columns are the frame vectors `e_a` in coordinate components.
    pub frame: Matrix4<f64>,
    pub orientation: Orientation,
    /// `riem[a][b][c][d] = R(e_a, e_b, e_c, e_d)`.
    pub riem: Riemann4,
    /// Ricci tensor in the frame, `ricci[b][c] = sum_a R(e_a, e_b, e_c, e_a)`.
    pub ricci: Matrix4<f64>,
    pub scalar: f64,
}

impl CurvaturePoint {
    /// Largest violation of the antisymmetry / pair symmetries.
    pub fn symmetry_defect(&self) -> f64 {
        let r = &self.riem;
        let mut worst: f64 = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                for k in 0..4 {
                    for l in 0..4 {
                        worst = worst.max((r[i][j][k][l] + r[j][i][k][l]).abs());
                        worst = worst.max((r[i][j][k][l] + r[i][j][l][k]).abs());
                        worst = worst.max((r[i][j][k][l] - r[k][l][i][j]).abs());
                    }
                }
            }
        }
        worst
    }

    /// Largest violation of the first Bianchi identity.
    pub fn bianchi_defect(&self) -> f64 {
        let r = &self.riem;
        let mut worst: f64 = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                for k in 0..4 {
                    for l in 0..4 {
                        worst = worst.max((r[i][j][k][l] + r[j][k][i][l] + r[k][i][j][l]).abs());
                    }
                }
            }
        }
        worst
    }

    /// `R(x, y, z, w)` for frame-component vectors.
    pub fn riemann_on(
        &self,
        x: &Vector4<f64>,
        y: &Vector4<f64>,
        z: &Vector4<f64>,
        w: &Vector4<f64>,
    ) -> f64 {
        let mut acc = 0.0;
        for i in 0..4 {
            if x[i] == 0.0 {
                continue;
            }
            for j in 0..4 {
                if y[j] == 0.0 {
                    continue;
                }
                for k in 0..4 {
                    for l in 0..4 {
                        acc += self.riem[i][j][k][l] * x[i] * y[j] * z[k] * w[l];
                    }
                }
            }
        }
        acc
    }
}

/// Positively oriented g-orthonormal frame by Gram-Schmidt on the
/// coordinate basis in fixed order; with `Orientation::Negative` the last
/// vector is flipped so the frame is positive for the opposite orientation.
pub fn orthonormal_frame(
    g: &Matrix4<f64>,
    orientation: Orientation,
) -> Result<Matrix4<f64>, GeometryError> {
    let mut cols: Vec<Vector4<f64>> = Vec::with_capacity(4);
    for i in 0..4 {
        let mut v = Vector4::ith(i, 1.0);
        for e in &cols {
            let coeff = (g * v).dot(e);
            v -= e * coeff;
        }
        let n2 = (g * v).dot(&v);
        if n2 <= 0.0 || !n2.is_finite() {
            return Err(GeometryError::NotPositiveDefinite {
                point: [f64::NAN; 4],
                min_eigenvalue: n2,
            });
        }
        cols.push(v / n2.sqrt());
    }
    let mut frame = Matrix4::from_columns(&cols);
    if orientation == Orientation::Negative {
        let flipped = -frame.column(3).into_owned();
        frame.set_column(3, &flipped);
    }
    Ok(frame)
}

/// Curvature from a pointwise metric jet. The chart expressions only enter
/// through the jet, so perturbation families can combine jets numerically.
pub fn curvature_from_jet(
    jet: &MetricJet,
    orientation: Orientation,
) -> Result<CurvaturePoint, GeometryError> {
    let (gamma, dgamma) = jet.christoffel_jet()?;

    // R(d_i, d_j) d_k = up[l][k][i][j] d_l
    let mut up = [[[[0.0; 4]; 4]; 4]; 4];
    for l in 0..4 {
        for k in 0..4 {
            for i in 0..4 {
                for j in 0..4 {
                    let mut acc = dgamma[i][l][j][k] - dgamma[j][l][i][k];
                    for m in 0..4 {
                        acc += gamma[l][i][m] * gamma[m][j][k] - gamma[l][j][m] * gamma[m][i][k];
                    }
                    up[l][k][i][j] = acc;
                }
            }
        }
    }

    // lower the last index: R_ijkl = g_lm R^m_kij
    let mut coord = [[[[0.0; 4]; 4]; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            for k in 0..4 {
                for l in 0..4 {
                    let mut acc = 0.0;
                    for m in 0..4 {
                        acc += jet.g[(l, m)] * up[m][k][i][j];
                    }
                    coord[i][j][k][l] = acc;
                }
            }
        }
    }

    let frame = orthonormal_frame(&jet.g, orientation)?;

    // convert to frame components one index at a time
    let mut t1 = [[[[0.0; 4]; 4]; 4]; 4];
    for a in 0..4 {
        for j in 0..4 {
            for k in 0..4 {
                for l in 0..4 {
                    let mut acc = 0.0;
                    for i in 0..4 {
                        acc += coord[i][j][k][l] * frame[(i, a)];
                    }
                    t1[a][j][k][l] = acc;
                }
            }
        }
    }
    let mut t2 = [[[[0.0; 4]; 4]; 4]; 4];
    for a in 0..4 {
        for b in 0..4 {
            for k in 0..4 {
                for l in 0..4 {
                    let mut acc = 0.0;
                    for j in 0..4 {
                        acc += t1[a][j][k][l] * frame[(j, b)];
                    }
                    t2[a][b][k][l] = acc;
                }
            }
        }
    }
    let mut t3 = [[[[0.0; 4]; 4]; 4]; 4];
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                for l in 0..4 {
                    let mut acc = 0.0;
                    for k in 0..4 {
                        acc += t2[a][b][k][l] * frame[(k, c)];
                    }
                    t3[a][b][c][l] = acc;
                }
            }
        }
    }
    let mut riem = [[[[0.0; 4]; 4]; 4]; 4];
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                for d in 0..4 {
                    let mut acc = 0.0;
                    for l in 0..4 {
                        acc += t3[a][b][c][l] * frame[(l, d)];
                    }
                    riem[a][b][c][d] = acc;
                }
            }
        }
    }

    let mut ricci = Matrix4::zeros();
    for b in 0..4 {
        for c in 0..4 {
            let mut acc = 0.0;
            for a in 0..4 {
                acc += riem[a][b][c][a];
            }
            ricci[(b, c)] = acc;
        }
    }
    let scalar = ricci.trace();

    Ok(CurvaturePoint {
        point: jet.point,
        metric: jet.g,
        frame,
        orientation,
        riem,
        ricci,
        scalar,
    })
}

/// Christoffel symbols of the field at `p`.
pub fn christoffel(field: &MetricField, p: &[f64; 4]) -> Result<Christoffel, GeometryError> {
    field.metric_jet(p)?.christoffel()
}

/// Full curvature data of the field at `p`.
pub fn riemann(field: &MetricField, p: &[f64; 4]) -> Result<CurvaturePoint, GeometryError> {
    curvature_from_jet(&field.metric_jet(p)?, field.orientation)
}

/// Frame components of a coordinate 2-form matrix.
pub fn two_form_to_frame(
    coord: &Matrix4<f64>,
    frame: &Matrix4<f64>,
) -> crate::lambda2::TwoFormPoint {
    crate::lambda2::TwoFormPoint::from_matrix(&(frame.transpose() * coord * frame))
}
