//! Exterior calculus on 2-form fields over a chart: d, the codifferential,
//! the Hodge Laplacian, covariant derivatives and the Weitzenboeck residual.
//!
//! Everything is evaluated pointwise through second-order jets built from
//! symbolic derivatives of the primitive fields, so the identities here are
//! checked at near machine precision; there is no grid anywhere. The
//! codifferential is `-*d*` on every degree (dimension four), a sign fixed
//! operationally by the flat-torus nonnegativity test.

use std::sync::OnceLock;

use nalgebra::Matrix4;
use thiserror::Error;

use crate::curvspec::CurvatureOperator;
use crate::expr::Expression;
use crate::geometry::{curvature_from_jet, two_form_to_frame, GeometryError, MetricField};
use crate::jet::Jet2;
use crate::lambda2::{sd_asd_split, TwoFormPoint};

/// Storage order of the independent coordinate components `w_ij`, `i < j`.
pub const COORD_PAIRS: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HodgeError {
    #[error(
        "form has mixed duality at the point (|w+| = {plus_norm:.3e}, |w-| = {minus_norm:.3e})"
    )]
    MixedDuality { plus_norm: f64, minus_norm: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

struct FormJets {
    /// d1[k][a] = D_k w_a
    d1: [[Expression; 6]; 4],
    /// d2[k][l][a] = D_k D_l w_a, stored for k <= l
    d2: [[[Expression; 6]; 4]; 4],
}

/// Antisymmetric 4x4 matrix of expressions (coordinate components).
pub struct TwoFormField {
    comps: [Expression; 6],
    jets: OnceLock<FormJets>,
}

impl Clone for TwoFormField {
    fn clone(&self) -> Self {
        TwoFormField {
            comps: self.comps.clone(),
            jets: OnceLock::new(),
        }
    }
}

impl std::fmt::Debug for TwoFormField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TwoFormField").finish_non_exhaustive()
    }
}

impl TwoFormField {
    /// Builds the field from the upper triangle of a component matrix
    /// (entries with `i < j`; the rest is implied by antisymmetry).
    pub fn new(upper: &[[Expression; 4]; 4]) -> TwoFormField {
        let comps = std::array::from_fn(|a| {
            let (i, j) = COORD_PAIRS[a];
            upper[i][j].clone()
        });
        TwoFormField {
            comps,
            jets: OnceLock::new(),
        }
    }

    pub fn zero() -> TwoFormField {
        TwoFormField {
            comps: std::array::from_fn(|_| Expression::zero()),
            jets: OnceLock::new(),
        }
    }

    pub fn component(&self, i: usize, j: usize) -> Expression {
        if i == j {
            return Expression::zero();
        }
        for (a, (pi, pj)) in COORD_PAIRS.iter().enumerate() {
            if (*pi, *pj) == (i, j) {
                return self.comps[a].clone();
            }
            if (*pi, *pj) == (j, i) {
                return Expression::neg(self.comps[a].clone());
            }
        }
        unreachable!()
    }

    pub fn scale(&self, c: f64) -> TwoFormField {
        TwoFormField {
            comps: std::array::from_fn(|a| {
                Expression::mul(Expression::constant(c), self.comps[a].clone())
            }),
            jets: OnceLock::new(),
        }
    }

    fn jets(&self) -> &FormJets {
        self.jets.get_or_init(|| {
            let d1: [[Expression; 6]; 4] =
                std::array::from_fn(|k| std::array::from_fn(|a| self.comps[a].differentiate(k)));
            let d2: [[[Expression; 6]; 4]; 4] = std::array::from_fn(|k| {
                std::array::from_fn(|l| {
                    std::array::from_fn(|a| {
                        if k <= l {
                            d1[k][a].differentiate(l)
                        } else {
                            Expression::zero()
                        }
                    })
                })
            });
            FormJets { d1, d2 }
        })
    }

    /// Coordinate component matrix at `p`.
    pub fn value_at(&self, p: &[f64; 4]) -> Result<Matrix4<f64>, GeometryError> {
        let mut m = Matrix4::zeros();
        for (a, (i, j)) in COORD_PAIRS.iter().enumerate() {
            let v = self.comps[a].eval(p)?;
            m[(*i, *j)] = v;
            m[(*j, *i)] = -v;
        }
        Ok(m)
    }

    /// Component jets at `p` (antisymmetric matrix of jets).
    pub fn jets_at(&self, p: &[f64; 4]) -> Result<[[Jet2; 4]; 4], GeometryError> {
        let jets = self.jets();
        let mut out = [[Jet2::ZERO; 4]; 4];
        for (a, (i, j)) in COORD_PAIRS.iter().enumerate() {
            let mut jet = Jet2::constant(self.comps[a].eval(p)?);
            for k in 0..4 {
                jet.d[k] = jets.d1[k][a].eval(p)?;
                for l in k..4 {
                    let v = jets.d2[k][l][a].eval(p)?;
                    jet.h[k][l] = v;
                    jet.h[l][k] = v;
                }
            }
            out[*i][*j] = jet;
            out[*j][*i] = -jet;
        }
        Ok(out)
    }
}

fn eps4(a: usize, b: usize, c: usize, d: usize) -> f64 {
    let idx = [a, b, c, d];
    let mut seen = [false; 4];
    for &i in &idx {
        if i >= 4 || seen[i] {
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

/// 4x4 determinant in jet arithmetic.
fn det4_jets(m: &[[Jet2; 4]; 4]) -> Jet2 {
    let mut acc = Jet2::ZERO;
    // cofactor expansion along the first row
    for j in 0..4 {
        let mut minor = [[Jet2::ZERO; 3]; 3];
        for (r, row) in m.iter().enumerate().skip(1) {
            let mut cc = 0;
            for (c, entry) in row.iter().enumerate() {
                if c == j {
                    continue;
                }
                minor[r - 1][cc] = *entry;
                cc += 1;
            }
        }
        let det3 = minor[0][0] * (minor[1][1] * minor[2][2] - minor[1][2] * minor[2][1])
            - minor[0][1] * (minor[1][0] * minor[2][2] - minor[1][2] * minor[2][0])
            + minor[0][2] * (minor[1][0] * minor[2][1] - minor[1][1] * minor[2][0]);
        let signed = if j % 2 == 0 { det3 } else { -det3 };
        acc = acc + m[0][j] * signed;
    }
    acc
}

/// Inverse of a symmetric 4x4 jet matrix via the adjugate.
fn inv4_jets(m: &[[Jet2; 4]; 4]) -> [[Jet2; 4]; 4] {
    let det = det4_jets(m);
    let inv_det = det.recip();
    let mut out = [[Jet2::ZERO; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            // cofactor C_ji for the (i, j) entry of the inverse
            let mut minor = [[Jet2::ZERO; 3]; 3];
            let mut rr = 0;
            for r in 0..4 {
                if r == j {
                    continue;
                }
                let mut cc = 0;
                for c in 0..4 {
                    if c == i {
                        continue;
                    }
                    minor[rr][cc] = m[r][c];
                    cc += 1;
                }
                rr += 1;
            }
            let det3 = minor[0][0] * (minor[1][1] * minor[2][2] - minor[1][2] * minor[2][1])
                - minor[0][1] * (minor[1][0] * minor[2][2] - minor[1][2] * minor[2][0])
                + minor[0][2] * (minor[1][0] * minor[2][1] - minor[1][1] * minor[2][0]);
            let signed = if (i + j) % 2 == 0 { det3 } else { -det3 };
            out[i][j] = signed * inv_det;
        }
    }
    out
}

/// Jet components of a k-form, indexed by strictly increasing multi-indices.
/// Exterior derivatives shift jet validity down one order: after one `d` the
/// Hessian slots hold stale zeros and only (value, gradient) are meaningful;
/// after two only the value is.
#[derive(Debug, Clone)]
enum FormDeg {
    One([Jet2; 4]),
    /// Indexed by [`COORD_PAIRS`].
    Two([Jet2; 6]),
    /// `t[m]` is the component on the increasing triple omitting index `m`.
    Three([Jet2; 4]),
}

fn d_form(f: &FormDeg) -> FormDeg {
    match f {
        FormDeg::One(a) => {
            let mut out = [Jet2::ZERO; 6];
            for (idx, (i, j)) in COORD_PAIRS.iter().enumerate() {
                // (da)_ij = D_i a_j - D_j a_i
                let mut jet = Jet2::ZERO;
                jet.v = a[*j].d[*i] - a[*i].d[*j];
                for m in 0..4 {
                    jet.d[m] = a[*j].h[*i][m] - a[*i].h[*j][m];
                }
                out[idx] = jet;
            }
            FormDeg::Two(out)
        }
        FormDeg::Two(w) => {
            let comp = |i: usize, j: usize| -> (usize, f64) {
                for (a, (pi, pj)) in COORD_PAIRS.iter().enumerate() {
                    if (*pi, *pj) == (i, j) {
                        return (a, 1.0);
                    }
                    if (*pi, *pj) == (j, i) {
                        return (a, -1.0);
                    }
                }
                unreachable!()
            };
            let mut out = [Jet2::ZERO; 4];
            for (m, slot) in out.iter_mut().enumerate() {
                let tri: Vec<usize> = (0..4).filter(|&x| x != m).collect();
                let (i, j, k) = (tri[0], tri[1], tri[2]);
                // (dw)_ijk = D_i w_jk + D_j w_ki + D_k w_ij
                let mut jet = Jet2::ZERO;
                for (a, b, c) in [(i, j, k), (j, k, i), (k, i, j)] {
                    let (idx, sign) = comp(b, c);
                    jet.v += sign * w[idx].d[a];
                    for n in 0..4 {
                        jet.d[n] += sign * w[idx].h[a][n];
                    }
                }
                *slot = jet;
            }
            FormDeg::Three(out)
        }
        FormDeg::Three(_) => panic!("d of a 3-form is not needed in dimension 4"),
    }
}

/// Hodge star with metric jets; `orient` is the orientation sign.
fn star_form(f: &FormDeg, ginv: &[[Jet2; 4]; 4], sqrt_g: Jet2, orient: f64) -> FormDeg {
    match f {
        // (*a)_{bcd} = sqrt(g) eps_{abcd} a^a -> store on omitted index
        FormDeg::One(a) => {
            let mut up = [Jet2::ZERO; 4];
            for i in 0..4 {
                let mut acc = Jet2::ZERO;
                for j in 0..4 {
                    acc = acc + ginv[i][j] * a[j];
                }
                up[i] = acc;
            }
            let mut out = [Jet2::ZERO; 4];
            for (m, slot) in out.iter_mut().enumerate() {
                let tri: Vec<usize> = (0..4).filter(|&x| x != m).collect();
                let mut acc = Jet2::ZERO;
                for a_idx in 0..4 {
                    let e = eps4(a_idx, tri[0], tri[1], tri[2]);
                    if e != 0.0 {
                        acc = acc + up[a_idx].scale(e);
                    }
                }
                *slot = (acc * sqrt_g).scale(orient);
            }
            FormDeg::Three(out)
        }
        FormDeg::Two(w) => {
            // raise both indices
            let full = |i: usize, j: usize| -> Jet2 {
                for (a, (pi, pj)) in COORD_PAIRS.iter().enumerate() {
                    if (*pi, *pj) == (i, j) {
                        return w[a];
                    }
                    if (*pi, *pj) == (j, i) {
                        return -w[a];
                    }
                }
                Jet2::ZERO
            };
            let mut up = [[Jet2::ZERO; 4]; 4];
            for i in 0..4 {
                for j in 0..4 {
                    let mut acc = Jet2::ZERO;
                    for e in 0..4 {
                        for f2 in 0..4 {
                            if e == f2 {
                                continue;
                            }
                            acc = acc + ginv[i][e] * ginv[j][f2] * full(e, f2);
                        }
                    }
                    up[i][j] = acc;
                }
            }
            let mut out = [Jet2::ZERO; 6];
            for (idx, (c, d)) in COORD_PAIRS.iter().enumerate() {
                let mut acc = Jet2::ZERO;
                for a_idx in 0..4 {
                    for b_idx in 0..4 {
                        let e = eps4(a_idx, b_idx, *c, *d);
                        if e != 0.0 {
                            acc = acc + up[a_idx][b_idx].scale(0.5 * e);
                        }
                    }
                }
                out[idx] = (acc * sqrt_g).scale(orient);
            }
            FormDeg::Two(out)
        }
        // (*t)_d = (1/6) sqrt(g) eps_{abcd} t^{abc}
        FormDeg::Three(t) => {
            let full3 = |i: usize, j: usize, k: usize| -> (usize, f64) {
                let m = 6 - i - j - k; // omitted index
                let tri: Vec<usize> = (0..4).filter(|&x| x != m).collect();
                (m, eps_perm3(&[i, j, k], &tri))
            };
            let mut out = [Jet2::ZERO; 4];
            for (d_idx, slot) in out.iter_mut().enumerate() {
                let mut acc = Jet2::ZERO;
                for a in 0..4 {
                    for b in 0..4 {
                        for c in 0..4 {
                            if a == b || b == c || a == c {
                                continue;
                            }
                            let e = eps4(a, b, c, d_idx);
                            if e == 0.0 {
                                continue;
                            }
                            // t^{abc} = g^{ai} g^{bj} g^{ck} t_{ijk}
                            let mut raised = Jet2::ZERO;
                            for i in 0..4 {
                                for j in 0..4 {
                                    for k in 0..4 {
                                        if i == j || j == k || i == k {
                                            continue;
                                        }
                                        let (idx, sg) = full3(i, j, k);
                                        let coeff = sg;
                                        raised = raised
                                            + (ginv[a][i] * ginv[b][j] * ginv[c][k] * t[idx])
                                                .scale(coeff);
                                    }
                                }
                            }
                            acc = acc + raised.scale(e / 6.0);
                        }
                    }
                }
                *slot = (acc * sqrt_g).scale(orient);
            }
            FormDeg::One(out)
        }
    }
}

/// Sign of the permutation taking `tri` (increasing) to `perm`.
fn eps_perm3(perm: &[usize; 3], tri: &[usize]) -> f64 {
    let mut sign = 1.0;
    let mut p = [perm[0], perm[1], perm[2]];
    for i in 0..3 {
        if p[i] != tri[i] {
            let j = (i + 1..3)
                .find(|&j| p[j] == tri[i])
                .expect("same index set");
            p.swap(i, j);
            sign = -sign;
        }
    }
    sign
}

/// Shared pointwise context for the operators below.
struct PointCtx {
    ginv: [[Jet2; 4]; 4],
    sqrt_g: Jet2,
    orient: f64,
}

impl PointCtx {
    fn new(g: &MetricField, p: &[f64; 4]) -> Result<PointCtx, GeometryError> {
        let gj = g.component_jets(p)?;
        let ginv = inv4_jets(&gj);
        let sqrt_g = det4_jets(&gj).sqrt();
        Ok(PointCtx {
            ginv,
            sqrt_g,
            orient: g.orientation.sign(),
        })
    }

    fn codiff(&self, f: &FormDeg) -> FormDeg {
        let starred = star_form(f, &self.ginv, self.sqrt_g, self.orient);
        let d = d_form(&starred);
        let ss = star_form(&d, &self.ginv, self.sqrt_g, self.orient);
        match ss {
            FormDeg::One(a) => FormDeg::One(a.map(|j| -j)),
            FormDeg::Two(a) => FormDeg::Two(a.map(|j| -j)),
            FormDeg::Three(a) => FormDeg::Three(a.map(|j| -j)),
        }
    }
}

/// `(dw)` at `p`: the four components of the 3-form on increasing triples,
/// indexed by the omitted coordinate.
pub fn exterior_d(w: &TwoFormField, p: &[f64; 4]) -> Result<[f64; 4], HodgeError> {
    let wj = w.jets_at(p)?;
    let two = FormDeg::Two(pack_two(&wj));
    match d_form(&two) {
        FormDeg::Three(t) => Ok([t[0].v, t[1].v, t[2].v, t[3].v]),
        _ => unreachable!(),
    }
}

fn pack_two(wj: &[[Jet2; 4]; 4]) -> [Jet2; 6] {
    std::array::from_fn(|a| {
        let (i, j) = COORD_PAIRS[a];
        wj[i][j]
    })
}

/// Codifferential (a 1-form) of the 2-form field at `p`.
pub fn codifferential(
    w: &TwoFormField,
    g: &MetricField,
    p: &[f64; 4],
) -> Result<[f64; 4], HodgeError> {
    let ctx = PointCtx::new(g, p)?;
    let wj = w.jets_at(p)?;
    match ctx.codiff(&FormDeg::Two(pack_two(&wj))) {
        FormDeg::One(a) => Ok([a[0].v, a[1].v, a[2].v, a[3].v]),
        _ => unreachable!(),
    }
}

/// Hodge Laplacian `d d* + d* d` at `p`, as a coordinate component matrix.
pub fn hodge_laplacian(
    w: &TwoFormField,
    g: &MetricField,
    p: &[f64; 4],
) -> Result<Matrix4<f64>, HodgeError> {
    let ctx = PointCtx::new(g, p)?;
    let wj = w.jets_at(p)?;
    let two = FormDeg::Two(pack_two(&wj));
    let d_delta = d_form(&ctx.codiff(&two));
    let delta_d = ctx.codiff(&d_form(&two));
    let (a, b) = match (d_delta, delta_d) {
        (FormDeg::Two(a), FormDeg::Two(b)) => (a, b),
        _ => unreachable!(),
    };
    let mut out = Matrix4::zeros();
    for (idx, (i, j)) in COORD_PAIRS.iter().enumerate() {
        let v = a[idx].v + b[idx].v;
        out[(*i, *j)] = v;
        out[(*j, *i)] = -v;
    }
    Ok(out)
}

/// Covariant derivative `(nabla_k w)_ij` at `p`; one matrix per direction.
pub fn covariant_derivative(
    w: &TwoFormField,
    g: &MetricField,
    p: &[f64; 4],
) -> Result<[Matrix4<f64>; 4], HodgeError> {
    let mj = g.metric_jet(p)?;
    let gamma = mj.christoffel()?;
    let wj = w.jets_at(p)?;
    let mut out = [Matrix4::zeros(); 4];
    for k in 0..4 {
        for i in 0..4 {
            for j in 0..4 {
                let mut acc = wj[i][j].d[k];
                for m in 0..4 {
                    acc -= gamma[m][k][i] * wj[m][j].v + gamma[m][k][j] * wj[i][m].v;
                }
                out[k][(i, j)] = acc;
            }
        }
    }
    Ok(out)
}

/// Second covariant derivative and the rough Laplacian `-g^{kl} nabla^2_{kl}`.
fn rough_laplacian(
    w_jets: &[[Jet2; 4]; 4],
    mj: &crate::geometry::MetricJet,
) -> Result<Matrix4<f64>, GeometryError> {
    let (gamma, dgamma) = mj.christoffel_jet()?;
    let ginv =
        mj.g.try_inverse()
            .ok_or(GeometryError::NotPositiveDefinite {
                point: mj.point,
                min_eigenvalue: 0.0,
            })?;

    // first covariant derivative with values and partials
    let mut nabla = [[[0.0; 4]; 4]; 4]; // [l][i][j]
    let mut d_nabla = [[[[0.0; 4]; 4]; 4]; 4]; // [k][l][i][j] = D_k (nabla_l w)_ij
    for l in 0..4 {
        for i in 0..4 {
            for j in 0..4 {
                let mut acc = w_jets[i][j].d[l];
                for m in 0..4 {
                    acc -= gamma[m][l][i] * w_jets[m][j].v + gamma[m][l][j] * w_jets[i][m].v;
                }
                nabla[l][i][j] = acc;
                for k in 0..4 {
                    let mut dacc = w_jets[i][j].h[k][l];
                    for m in 0..4 {
                        dacc -= dgamma[k][m][l][i] * w_jets[m][j].v
                            + gamma[m][l][i] * w_jets[m][j].d[k]
                            + dgamma[k][m][l][j] * w_jets[i][m].v
                            + gamma[m][l][j] * w_jets[i][m].d[k];
                    }
                    d_nabla[k][l][i][j] = dacc;
                }
            }
        }
    }

    // nabla^2_{k,l} w_ij = D_k (nabla_l w)_ij - Gamma^m_kl (nabla_m w)_ij
    //                      - Gamma^m_ki (nabla_l w)_mj - Gamma^m_kj (nabla_l w)_im
    let mut out = Matrix4::zeros();
    for i in 0..4 {
        for j in 0..4 {
            let mut acc = 0.0;
            for k in 0..4 {
                for l in 0..4 {
                    let mut second = d_nabla[k][l][i][j];
                    for m in 0..4 {
                        second -= gamma[m][k][l] * nabla[m][i][j]
                            + gamma[m][k][i] * nabla[l][m][j]
                            + gamma[m][k][j] * nabla[l][i][m];
                    }
                    acc += ginv[(k, l)] * second;
                }
            }
            out[(i, j)] = -acc;
        }
    }
    Ok(out)
}

/// All norms and the Weitzenboeck residual at one point.
#[derive(Debug, Clone)]
pub struct WeitzenboeckReport {
    pub point: [f64; 4],
    /// `|dw|`.
    pub d_norm: f64,
    /// `|d* w|`.
    pub codiff_norm: f64,
    /// `|Delta w|`.
    pub laplacian_norm: f64,
    /// `|nabla w|`.
    pub covariant_norm: f64,
    /// `|Delta w - (nabla*nabla w - 2 W(w,.) + (s/3) w)|`.
    pub residual: f64,
}

/// Relative tolerance deciding whether a form has definite duality.
pub const DUALITY_TOL: f64 = 1e-6;

/// Evaluates the Weitzenboeck identity for a (anti-)self-dual 2-form field.
pub fn weitzenboeck_residual(
    w: &TwoFormField,
    g: &MetricField,
    p: &[f64; 4],
) -> Result<WeitzenboeckReport, HodgeError> {
    let mj = g.metric_jet(p)?;
    let cp = curvature_from_jet(&mj, g.orientation)?;
    let op = CurvatureOperator::from_curvature_point(&cp);
    let ginv =
        mj.g.try_inverse()
            .ok_or(GeometryError::NotPositiveDefinite {
                point: mj.point,
                min_eigenvalue: 0.0,
            })?;

    let w_jets = w.jets_at(p)?;
    let w_coord = w.value_at(p)?;
    let w_frame = two_form_to_frame(&w_coord, &cp.frame);
    let (w_plus, w_minus) = sd_asd_split(&w_frame);
    let (p_norm, m_norm) = (w_plus.norm(), w_minus.norm());
    let scale = w_frame.norm().max(1e-300);
    let self_dual = if m_norm <= DUALITY_TOL * scale {
        true
    } else if p_norm <= DUALITY_TOL * scale {
        false
    } else {
        return Err(HodgeError::MixedDuality {
            plus_norm: p_norm,
            minus_norm: m_norm,
        });
    };

    let laplacian = hodge_laplacian(w, g, p)?;
    let rough = rough_laplacian(&w_jets, &mj)?;
    let lap_frame = two_form_to_frame(&laplacian, &cp.frame);
    let rough_frame = two_form_to_frame(&rough, &cp.frame);

    let weyl_w = if self_dual {
        TwoFormPoint::from_sd_coords(&(op.w_plus() * w_frame.sd_coords()))
    } else {
        TwoFormPoint::from_asd_coords(&(op.w_minus() * w_frame.asd_coords()))
    };

    let mut res = lap_frame;
    res = res.sub(&rough_frame);
    res = res.add(&weyl_w.scale(2.0));
    res = res.sub(&w_frame.scale(cp.scalar / 3.0));
    let residual = res.norm();

    // norms of the auxiliary quantities
    let d_comp = exterior_d(w, p)?;
    let d_norm = three_form_norm(&d_comp, &ginv);
    let delta = codifferential(w, g, p)?;
    let mut codiff2 = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            codiff2 += ginv[(i, j)] * delta[i] * delta[j];
        }
    }
    let nabla = covariant_derivative(w, g, p)?;
    let mut cov2 = 0.0;
    for k in 0..4 {
        for l in 0..4 {
            for i in 0..4 {
                for a in 0..4 {
                    for j in 0..4 {
                        for b in 0..4 {
                            cov2 += 0.5
                                * ginv[(k, l)]
                                * ginv[(i, a)]
                                * ginv[(j, b)]
                                * nabla[k][(i, j)]
                                * nabla[l][(a, b)];
                        }
                    }
                }
            }
        }
    }

    Ok(WeitzenboeckReport {
        point: *p,
        d_norm,
        codiff_norm: codiff2.max(0.0).sqrt(),
        laplacian_norm: lap_frame.norm(),
        covariant_norm: cov2.max(0.0).sqrt(),
        residual,
    })
}

fn three_form_norm(t: &[f64; 4], ginv: &Matrix4<f64>) -> f64 {
    // |t|^2 = (1/3!) t_{ijk} t_{lmn} g^{il} g^{jm} g^{kn}
    let full = |i: usize, j: usize, k: usize| -> f64 {
        if i == j || j == k || i == k {
            return 0.0;
        }
        let m = 6 - i - j - k;
        let tri: Vec<usize> = (0..4).filter(|&x| x != m).collect();
        t[m] * eps_perm3(&[i, j, k], &tri)
    };
    let mut acc = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            for k in 0..4 {
                for l in 0..4 {
                    for m in 0..4 {
                        for n in 0..4 {
                            acc += full(i, j, k)
                                * full(l, m, n)
                                * ginv[(i, l)]
                                * ginv[(j, m)]
                                * ginv[(k, n)];
                        }
                    }
                }
            }
        }
    }
    (acc / 6.0).max(0.0).sqrt()
}
