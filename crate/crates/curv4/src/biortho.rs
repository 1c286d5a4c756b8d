//! Biorthogonal sectional curvature: plane evaluation, the closed-form
//! extremes through the Weyl spectra, an independent plane-search oracle on
//! the Grassmannian of 2-planes, and the hypothesis checkers.

use nalgebra::{Matrix4, Vector4};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::curvspec::{CurvatureOperator, SpectralData};
use crate::lambda2::{frame_from_eigenforms, Lambda2Error, TwoFormPoint};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BiorthoError {
    #[error("plane vectors are not orthonormal (defect {defect:.3e})")]
    DegeneratePlane { defect: f64 },
    #[error("hypothesis report needs at least one sample point")]
    EmptySample,
    #[error(transparent)]
    Lambda2(#[from] Lambda2Error),
}

/// An oriented 2-plane given by two orthonormal vectors in frame components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane {
    pub u: Vector4<f64>,
    pub v: Vector4<f64>,
}

const PLANE_TOL: f64 = 1e-8;

impl Plane {
    /// Accepts an already orthonormal pair.
    pub fn from_orthonormal(u: Vector4<f64>, v: Vector4<f64>) -> Result<Plane, BiorthoError> {
        let p = Plane { u, v };
        let defect = p.orthonormality_defect();
        if defect > PLANE_TOL {
            return Err(BiorthoError::DegeneratePlane { defect });
        }
        Ok(p)
    }

    /// Gram-Schmidt from any two independent vectors.
    pub fn from_vectors(u: Vector4<f64>, v: Vector4<f64>) -> Result<Plane, BiorthoError> {
        let nu = u.norm();
        if nu < 1e-12 {
            return Err(BiorthoError::DegeneratePlane { defect: 1.0 });
        }
        let u = u / nu;
        let mut v = v - u * u.dot(&v);
        let nv = v.norm();
        if nv < 1e-12 {
            return Err(BiorthoError::DegeneratePlane { defect: 1.0 });
        }
        v /= nv;
        Ok(Plane { u, v })
    }

    pub fn orthonormality_defect(&self) -> f64 {
        (self.u.norm() - 1.0)
            .abs()
            .max((self.v.norm() - 1.0).abs())
            .max(self.u.dot(&self.v).abs())
    }

    /// Unit area form `u ^ v`.
    pub fn area_form(&self) -> TwoFormPoint {
        TwoFormPoint::wedge_of(&self.u, &self.v)
    }

    /// Distance between the spans (sin of the largest principal angle).
    pub fn span_distance(&self, other: &Plane) -> f64 {
        let proj = |w: &Vector4<f64>| other.u * other.u.dot(w) + other.v * other.v.dot(w);
        ((self.u - proj(&self.u)).norm_squared() + (self.v - proj(&self.v)).norm_squared()).sqrt()
    }
}

/// Sectional curvature `K(P) = <R(u^v), u^v>`.
pub fn sectional(op: &CurvatureOperator, plane: &Plane) -> Result<f64, BiorthoError> {
    let defect = plane.orthonormality_defect();
    if defect > PLANE_TOL {
        return Err(BiorthoError::DegeneratePlane { defect });
    }
    Ok(op.quadratic_form(&plane.area_form()))
}

/// Orthogonal complement, positively oriented after `(u, v)`.
pub fn orthogonal_plane(plane: &Plane) -> Result<Plane, BiorthoError> {
    let defect = plane.orthonormality_defect();
    if defect > PLANE_TOL {
        return Err(BiorthoError::DegeneratePlane { defect });
    }
    let mut w1 = Vector4::zeros();
    let mut best = -1.0;
    for axis in 0..4 {
        let e = Vector4::ith(axis, 1.0);
        let r = e - plane.u * plane.u.dot(&e) - plane.v * plane.v.dot(&e);
        let n2 = r.norm_squared();
        if n2 > best {
            best = n2;
            w1 = r;
        }
    }
    w1 /= w1.norm();
    let mut w2 = Vector4::zeros();
    let mut best = -1.0;
    for axis in 0..4 {
        let e = Vector4::ith(axis, 1.0);
        let r = e - plane.u * plane.u.dot(&e) - plane.v * plane.v.dot(&e) - w1 * w1.dot(&e);
        let n2 = r.norm_squared();
        if n2 > best {
            best = n2;
            w2 = r;
        }
    }
    w2 /= w2.norm();
    if Matrix4::from_columns(&[plane.u, plane.v, w1, w2]).determinant() < 0.0 {
        w2 = -w2;
    }
    Plane::from_orthonormal(w1, w2)
}

/// `K_perp(P) = (K(P) + K(P_perp)) / 2`.
pub fn biorthogonal(op: &CurvatureOperator, plane: &Plane) -> Result<f64, BiorthoError> {
    let k = sectional(op, plane)?;
    let k_perp = sectional(op, &orthogonal_plane(plane)?)?;
    Ok(0.5 * (k + k_perp))
}

/// Extremes of the biorthogonal curvature with attaining planes.
#[derive(Debug, Clone)]
pub struct KperpExtremes {
    pub kperp1: f64,
    pub kperp3: f64,
    pub argmin: Plane,
    pub argmax: Plane,
}

/// Closed-form extremes `2K1 = s/6 + l1+ + l1-`, `2K3 = s/6 + l3+ + l3-`,
/// with the attaining planes rebuilt from the eigenform pairs.
pub fn kperp_extremes_closed(sd: &SpectralData) -> Result<KperpExtremes, BiorthoError> {
    let kperp1 = 0.5 * (sd.s / 6.0 + sd.lambda_plus[0] + sd.lambda_minus[0]);
    let kperp3 = 0.5 * (sd.s / 6.0 + sd.lambda_plus[2] + sd.lambda_minus[2]);
    let fmin = frame_from_eigenforms(&sd.eigenforms_plus[0], &sd.eigenforms_minus[0])?;
    let fmax = frame_from_eigenforms(&sd.eigenforms_plus[2], &sd.eigenforms_minus[2])?;
    Ok(KperpExtremes {
        kperp1,
        kperp3,
        argmin: Plane::from_orthonormal(fmin[0], fmin[1])?,
        argmax: Plane::from_orthonormal(fmax[0], fmax[1])?,
    })
}

/// Sampling and refinement budget of the plane search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchBudget {
    pub n_samples: usize,
    pub n_refinements: usize,
    pub seed: u64,
}

pub const MIN_SAMPLES: usize = 1000;
pub const MIN_REFINEMENTS: usize = 50;

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget {
            n_samples: MIN_SAMPLES,
            n_refinements: MIN_REFINEMENTS,
            seed: 0x5eed,
        }
    }
}

impl SearchBudget {
    /// Budgets below the defaults are clamped up to them.
    pub fn new(n_samples: usize, n_refinements: usize, seed: u64) -> SearchBudget {
        SearchBudget {
            n_samples: n_samples.max(MIN_SAMPLES),
            n_refinements: n_refinements.max(MIN_REFINEMENTS),
            seed,
        }
    }
}

/// Orthonormal 4-frame carrying a plane `span(f0, f1)` and its complement
/// `span(f2, f3)` through the search.
#[derive(Debug, Clone, Copy)]
struct SearchFrame {
    f: [Vector4<f64>; 4],
}

impl SearchFrame {
    fn kperp(&self, op: &CurvatureOperator) -> f64 {
        let a = TwoFormPoint::wedge_of(&self.f[0], &self.f[1]);
        let b = TwoFormPoint::wedge_of(&self.f[2], &self.f[3]);
        0.5 * (op.quadratic_form(&a) + op.quadratic_form(&b))
    }

    fn rotated(&self, dir: &RotationDir, theta: f64) -> SearchFrame {
        let (sin, cos) = theta.sin_cos();
        let mut out = *self;
        out.f[dir.a] = self.f[dir.a] * cos + self.f[dir.b] * sin;
        out.f[dir.b] = self.f[dir.b] * cos - self.f[dir.a] * sin;
        if dir.pair_sign != 0.0 {
            let (sin2, cos2) = (dir.pair_sign * theta).sin_cos();
            out.f[dir.c] = self.f[dir.c] * cos2 + self.f[dir.d] * sin2;
            out.f[dir.d] = self.f[dir.d] * cos2 - self.f[dir.c] * sin2;
        }
        out
    }

    fn reorthonormalize(&mut self) {
        for i in 0..4 {
            let mut v = self.f[i];
            for j in 0..i {
                v -= self.f[j] * self.f[j].dot(&v);
            }
            self.f[i] = v / v.norm();
        }
    }
}

fn random_frame(rng: &mut ChaCha8Rng) -> SearchFrame {
    loop {
        let mut f = [Vector4::zeros(); 4];
        let mut ok = true;
        for i in 0..4 {
            let mut v = Vector4::from_fn(|_, _| {
                // Box-Muller standard normals keep the plane distribution
                // rotation invariant
                let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
                let u2: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                (-2.0 * u1.ln()).sqrt() * u2.cos()
            });
            for fj in f.iter().take(i) {
                v -= fj * fj.dot(&v);
            }
            let n = v.norm();
            if n < 1e-6 {
                ok = false;
                break;
            }
            f[i] = v / n;
        }
        if ok {
            return SearchFrame { f };
        }
    }
}

/// Golden-section line search for the minimum on `[lo, hi]`.
fn golden_min(mut lo: f64, mut hi: f64, mut eval: impl FnMut(f64) -> f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = eval(x1);
    let mut f2 = eval(x2);
    for _ in 0..48 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = eval(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = eval(x2);
        }
    }
    0.5 * (lo + hi)
}

/// A rotation of `f_a` toward `f_b`, optionally paired with an equal-angle
/// rotation of `f_c` toward `f_d` (`pair_sign` is its relative sense; 0 for
/// single rotations). The single rotations span the tangent space of the
/// Grassmannian; the paired ones decouple the self-dual and anti-self-dual
/// directions, which kills the coordinate-descent zig-zag near clustered
/// Weyl eigenvalues.
struct RotationDir {
    a: usize,
    b: usize,
    c: usize,
    d: usize,
    pair_sign: f64,
}

const ROTATION_DIRS: [RotationDir; 8] = [
    RotationDir {
        a: 0,
        b: 2,
        c: 0,
        d: 0,
        pair_sign: 0.0,
    },
    RotationDir {
        a: 0,
        b: 3,
        c: 0,
        d: 0,
        pair_sign: 0.0,
    },
    RotationDir {
        a: 1,
        b: 2,
        c: 0,
        d: 0,
        pair_sign: 0.0,
    },
    RotationDir {
        a: 1,
        b: 3,
        c: 0,
        d: 0,
        pair_sign: 0.0,
    },
    RotationDir {
        a: 0,
        b: 2,
        c: 1,
        d: 3,
        pair_sign: 1.0,
    },
    RotationDir {
        a: 0,
        b: 2,
        c: 1,
        d: 3,
        pair_sign: -1.0,
    },
    RotationDir {
        a: 0,
        b: 3,
        c: 1,
        d: 2,
        pair_sign: 1.0,
    },
    RotationDir {
        a: 0,
        b: 3,
        c: 1,
        d: 2,
        pair_sign: -1.0,
    },
];

// The paired rotations that move only the anti-self-dual / only the
// self-dual part of the plane form: indices into ROTATION_DIRS.
const PURE_ASD_PAIR: (usize, usize) = (4, 7);
const PURE_SD_PAIR: (usize, usize) = (5, 6);

/// Coarse scan over the half period plus golden refinement; the objective
/// is pi-periodic in each rotation angle. Returns the winning angle and
/// value (angle 0 when nothing beats the current value).
fn line_min(current: f64, mut eval: impl FnMut(f64) -> f64) -> (f64, f64) {
    let n_coarse = 16;
    let mut best_theta = 0.0;
    let mut best_val = current;
    for k in 0..n_coarse {
        let theta = -std::f64::consts::FRAC_PI_2
            + std::f64::consts::PI * (k as f64 + 0.5) / n_coarse as f64;
        let v = eval(theta);
        if v < best_val {
            best_val = v;
            best_theta = theta;
        }
    }
    let half = std::f64::consts::PI / n_coarse as f64;
    let theta = golden_min(best_theta - half, best_theta + half, &mut eval);
    let cand = eval(theta);
    if cand < current {
        (theta, cand)
    } else {
        (0.0, current)
    }
}

fn refine(
    op: &CurvatureOperator,
    start: SearchFrame,
    sweeps: usize,
    sign: f64,
) -> (f64, SearchFrame) {
    let mut frame = start;
    let mut value = sign * frame.kperp(op);
    for _ in 0..sweeps {
        for dir in &ROTATION_DIRS {
            let (theta, cand) = line_min(value, |theta| sign * frame.rotated(dir, theta).kperp(op));
            if cand < value {
                value = cand;
                frame = frame.rotated(dir, theta);
            }
        }
        frame.reorthonormalize();
        value = sign * frame.kperp(op);
    }
    // Nested 2-D polish on each duality factor. Single-circle sweeps
    // zig-zag at a rate set by the gap of a clustered Weyl pair (the
    // restricted problem is an ill-conditioned quadratic); marginal
    // minimization over both angles of one factor is exact on quadratics
    // and removes that stall.
    for _ in 0..3 {
        for (ia, ib) in [PURE_ASD_PAIR, PURE_SD_PAIR] {
            let (dir_a, dir_b) = (&ROTATION_DIRS[ia], &ROTATION_DIRS[ib]);
            let inner = |frame_a: &SearchFrame| -> (f64, f64) {
                let base = sign * frame_a.kperp(op);
                line_min(base, |theta_b| {
                    sign * frame_a.rotated(dir_b, theta_b).kperp(op)
                })
            };
            let (theta_a, _) = line_min(value, |theta_a| inner(&frame.rotated(dir_a, theta_a)).1);
            let rotated_a = frame.rotated(dir_a, theta_a);
            let (theta_b, cand) = inner(&rotated_a);
            if cand < value {
                value = cand;
                frame = rotated_a.rotated(dir_b, theta_b);
            }
        }
        frame.reorthonormalize();
        value = sign * frame.kperp(op);
    }
    (sign * value, frame)
}

/// Brute-force extremes: random plane sampling followed by deterministic
/// coordinate-rotation refinement. Independent of the spectral route.
pub fn kperp_extremes_search(op: &CurvatureOperator, budget: &SearchBudget) -> KperpExtremes {
    let mut rng = ChaCha8Rng::seed_from_u64(budget.seed);
    let first = random_frame(&mut rng);
    let v0 = first.kperp(op);
    let mut min_frame = first;
    let mut min_val = v0;
    let mut max_frame = first;
    let mut max_val = v0;
    for _ in 1..budget.n_samples {
        let f = random_frame(&mut rng);
        let v = f.kperp(op);
        if v < min_val {
            min_val = v;
            min_frame = f;
        }
        if v > max_val {
            max_val = v;
            max_frame = f;
        }
    }
    let (kperp1, fmin) = refine(op, min_frame, budget.n_refinements, 1.0);
    let (kperp3, fmax) = refine(op, max_frame, budget.n_refinements, -1.0);
    KperpExtremes {
        kperp1,
        kperp3,
        argmin: Plane {
            u: fmin.f[0],
            v: fmin.f[1],
        },
        argmax: Plane {
            u: fmax.f[0],
            v: fmax.f[1],
        },
    }
}

/// Margin for strict inequalities, scaled by the size of `s`.
pub fn default_margin(s: f64) -> f64 {
    1e-9 * s.abs().max(1.0)
}

/// Which of `s/3 - 2W_pm` is positive at every sampled point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dichotomy {
    Plus,
    Minus,
    Both,
    Neither,
}

/// Margin-tested verdicts for one sample point.
#[derive(Debug, Clone)]
pub struct PointHypotheses {
    pub s: f64,
    pub lambda_plus: [f64; 3],
    pub lambda_minus: [f64; 3],
    pub kperp1: f64,
    pub kperp3: f64,
    pub margin: f64,
    pub kperp1_positive: bool,
    pub kperp3_below_quarter_s: bool,
    /// Attained gap `s/4 - K3` (reported for boundary cases).
    pub kperp3_gap: f64,
    pub scalar_positive: bool,
    pub r_sums_positive: bool,
    pub min_r_sum: f64,
    pub w_plus_positive: bool,
    pub w_plus_smallest: f64,
    pub w_minus_positive: bool,
    pub w_minus_smallest: f64,
}

/// Aggregate over all sample points.
#[derive(Debug, Clone)]
pub struct HypothesisReport {
    pub points: Vec<PointHypotheses>,
    pub all_kperp1_positive: bool,
    pub all_kperp3_below_quarter_s: bool,
    pub all_scalar_positive: bool,
    pub all_r_sums_positive: bool,
    pub dichotomy: Dichotomy,
    /// Implication audits between the verdicts (`K1 > 0` forces `K3 < s/4`
    /// and `s > 0`; `K3 < s/4` forces `s > 0` and positive r-sums). Non-empty
    /// means the computation contradicted itself, not that a hypothesis
    /// failed.
    pub consistency_violations: Vec<String>,
}

impl HypothesisReport {
    pub fn all_satisfied(&self) -> bool {
        self.all_kperp1_positive
            && self.all_kperp3_below_quarter_s
            && self.all_scalar_positive
            && self.all_r_sums_positive
            && matches!(
                self.dichotomy,
                Dichotomy::Plus | Dichotomy::Minus | Dichotomy::Both
            )
    }
}

/// Evaluates every inequality of interest at each point and aggregates.
/// `margin_scale` is the relative strictness margin (default `1e-9`).
pub fn hypothesis_report(
    points: &[(SpectralData, KperpExtremes)],
    margin_scale: f64,
) -> Result<HypothesisReport, BiorthoError> {
    if points.is_empty() {
        return Err(BiorthoError::EmptySample);
    }
    let mut out = Vec::with_capacity(points.len());
    let mut violations = Vec::new();
    for (idx, (sd, ext)) in points.iter().enumerate() {
        let tau = margin_scale * sd.s.abs().max(1.0);
        let kperp3_gap = sd.s / 4.0 - ext.kperp3;
        let mut min_r_sum = f64::INFINITY;
        for i in 0..3 {
            for j in 0..3 {
                min_r_sum = min_r_sum.min(sd.r_plus[i] + sd.r_minus[j]);
            }
        }
        // smallest eigenvalues of s/3 - 2 W_pm are r3_pm
        let ph = PointHypotheses {
            s: sd.s,
            lambda_plus: sd.lambda_plus,
            lambda_minus: sd.lambda_minus,
            kperp1: ext.kperp1,
            kperp3: ext.kperp3,
            margin: tau,
            kperp1_positive: ext.kperp1 > tau,
            kperp3_below_quarter_s: kperp3_gap > tau,
            kperp3_gap,
            scalar_positive: sd.s > tau,
            r_sums_positive: min_r_sum > tau,
            min_r_sum,
            w_plus_positive: sd.r_plus[2] > tau,
            w_plus_smallest: sd.r_plus[2],
            w_minus_positive: sd.r_minus[2] > tau,
            w_minus_smallest: sd.r_minus[2],
        };
        if ph.kperp1_positive && !ph.kperp3_below_quarter_s {
            violations.push(format!(
                "point {idx}: K1 > 0 but K3 < s/4 fails (gap {kperp3_gap:.3e})"
            ));
        }
        if ph.kperp1_positive && !ph.scalar_positive {
            violations.push(format!("point {idx}: K1 > 0 but s <= 0 (s = {:.6e})", sd.s));
        }
        if ph.kperp3_below_quarter_s && !(ph.scalar_positive && ph.r_sums_positive) {
            violations.push(format!(
                "point {idx}: K3 < s/4 but s or an r-sum is non-positive (s = {:.6e}, min r-sum = {:.6e})",
                sd.s, min_r_sum
            ));
        }
        out.push(ph);
    }
    let all = |f: fn(&PointHypotheses) -> bool| out.iter().all(f);
    let plus_everywhere = all(|p| p.w_plus_positive);
    let minus_everywhere = all(|p| p.w_minus_positive);
    let dichotomy = match (plus_everywhere, minus_everywhere) {
        (true, true) => Dichotomy::Both,
        (true, false) => Dichotomy::Plus,
        (false, true) => Dichotomy::Minus,
        (false, false) => Dichotomy::Neither,
    };
    Ok(HypothesisReport {
        all_kperp1_positive: all(|p| p.kperp1_positive),
        all_kperp3_below_quarter_s: all(|p| p.kperp3_below_quarter_s),
        all_scalar_positive: all(|p| p.scalar_positive),
        all_r_sums_positive: all(|p| p.r_sums_positive),
        dichotomy,
        consistency_violations: violations,
        points: out,
    })
}
