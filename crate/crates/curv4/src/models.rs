//! Built-in model geometries with closed-form chart expressions and
//! machine-checkable facts, plus the positivity-persistence experiment for
//! perturbations of the Fubini-Study metric.

use nalgebra::{Matrix4, Vector4};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::akstruct;
use crate::biortho::{self, Plane};
use crate::curvspec::{spectra, CurvatureOperator};
use crate::expr::Expression;
use crate::geometry::{
    curvature_from_jet, riemann, two_form_to_frame, Domain, GeometryError, MetricField, MetricJet,
    Orientation,
};
use crate::hodgeops::{self, TwoFormField};
use crate::lambda2::SQRT_2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("unknown model `{name}`")]
    UnknownModel { name: String },
    #[error("bad model parameters: {message}")]
    BadParams { message: String },
}

/// Largest admissible perturbation amplitude for `fs_perturbed`.
pub const T_MAX: f64 = 0.1;

/// What a fact asserts and how to measure its deviation.
#[derive(Debug, Clone)]
pub enum FactKind {
    ScalarCurvature {
        expected: f64,
    },
    /// `|Ricci - c g|` in frame components.
    EinsteinConstant {
        constant: f64,
    },
    WeylPlusEigenvalues {
        expected: [f64; 3],
    },
    WeylMinusVanishes,
    WeylBothVanish,
    KperpMin {
        expected: f64,
    },
    KperpMax {
        expected: f64,
    },
    /// `K3 - s/4` (the boundary geometries sit exactly on it).
    KperpBoundaryGap,
    SectionalRange {
        lo: f64,
        hi: f64,
        planes_per_point: usize,
    },
    SectionalConstant {
        expected: f64,
        planes_per_point: usize,
    },
    /// Distinguished form: self-duality defect and `| |w| - expected |`.
    FormSelfDualLength {
        expected: f64,
    },
    /// `|dw|` of the distinguished form.
    FormClosed,
    /// `|nabla w|` of the distinguished form.
    FormParallel,
    /// Recorded for reference; global integrals are not evaluated here.
    TotalVolume {
        expected: f64,
    },
}

#[derive(Debug, Clone)]
pub struct Fact {
    pub name: &'static str,
    pub kind: FactKind,
    pub tol: f64,
    /// Where the expected value comes from.
    pub note: &'static str,
}

/// A named metric with optional distinguished 2-form and checkable facts.
#[derive(Debug, Clone)]
pub struct ModelGeometry {
    pub name: String,
    pub metric: MetricField,
    pub distinguished_form: Option<TwoFormField>,
    pub facts: Vec<Fact>,
}

#[derive(Debug, Clone)]
pub struct FactOutcome {
    pub name: &'static str,
    pub worst: f64,
    pub tol: f64,
    pub passed: bool,
    /// False for recorded-only facts.
    pub checked: bool,
    pub note: &'static str,
}

#[derive(Debug, Clone)]
pub struct FactReport {
    pub model: String,
    pub outcomes: Vec<FactOutcome>,
}

impl FactReport {
    pub fn all_passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.passed)
    }
}

/// Typed constructor arguments for the built-in models.
#[derive(Debug, Clone)]
pub enum BuiltinModel {
    Flat4,
    Sphere4 {
        r: f64,
    },
    FubiniStudy,
    S2xS2 {
        r1: f64,
        r2: f64,
    },
    FsPerturbed {
        bump: Box<[[Expression; 4]; 4]>,
        t: f64,
    },
}

fn zero_upper() -> [[Expression; 4]; 4] {
    std::array::from_fn(|_| std::array::from_fn(|_| Expression::zero()))
}

fn radius_sq(vars: std::ops::Range<usize>) -> Expression {
    let mut acc = Expression::zero();
    for i in vars {
        let x = Expression::var(i);
        acc = Expression::add(acc, Expression::mul(x.clone(), x));
    }
    acc
}

/// Stereographic conformal factor `4 r^4 / (r^2 + |x|^2)^2` over the given
/// coordinate block.
fn stereographic_factor(r: f64, vars: std::ops::Range<usize>) -> Expression {
    let num = Expression::constant(4.0 * r.powi(4));
    let den = Expression::powi(
        Expression::add(Expression::constant(r * r), radius_sq(vars)),
        2,
    );
    Expression::div(num, den)
}

/// Chart data of the Fubini-Study metric normalized to holomorphic
/// sectional curvature 4 (identity metric at the chart origin), with its
/// Kahler form: `z1 = x1 + i x2`, `z2 = x3 + i x4`.
fn fubini_study_components() -> ([[Expression; 4]; 4], [[Expression; 4]; 4]) {
    let x = |i: usize| Expression::var(i);
    let mul = Expression::mul;
    let sq = |i: usize| mul(x(i), x(i));
    let rho = Expression::add(
        Expression::one(),
        Expression::add(Expression::add(sq(0), sq(1)), Expression::add(sq(2), sq(3))),
    );
    let rho2 = mul(rho.clone(), rho);
    let one_plus_a = Expression::add(Expression::one(), Expression::add(sq(2), sq(3)));
    let one_plus_b = Expression::add(Expression::one(), Expression::add(sq(0), sq(1)));
    // u = x1 x3 + x2 x4, v = x1 x4 - x2 x3 (the hermitian cross terms)
    let u = Expression::add(mul(x(0), x(2)), mul(x(1), x(3)));
    let v = Expression::sub(mul(x(0), x(3)), mul(x(1), x(2)));
    let over = |e: Expression| Expression::div(e, rho2.clone());

    let mut g = zero_upper();
    g[0][0] = over(one_plus_a.clone());
    g[1][1] = over(one_plus_a.clone());
    g[2][2] = over(one_plus_b.clone());
    g[3][3] = over(one_plus_b.clone());
    g[0][2] = over(Expression::neg(u.clone()));
    g[0][3] = over(Expression::neg(v.clone()));
    g[1][2] = over(v.clone());
    g[1][3] = over(Expression::neg(u.clone()));

    let mut w = zero_upper();
    w[0][1] = over(one_plus_a);
    w[2][3] = over(one_plus_b);
    w[0][2] = over(v.clone());
    w[0][3] = over(Expression::neg(u.clone()));
    w[1][2] = over(u);
    w[1][3] = over(v);

    (g, w)
}

/// Constructs a built-in model.
pub fn builtin(model: &BuiltinModel) -> Result<ModelGeometry, ModelError> {
    match model {
        BuiltinModel::Flat4 => {
            let metric = MetricField::flat(Domain::unit_box());
            let mut w = zero_upper();
            w[0][1] = Expression::one();
            w[2][3] = Expression::one();
            Ok(ModelGeometry {
                name: "flat4".to_string(),
                metric,
                distinguished_form: Some(TwoFormField::new(&w)),
                facts: vec![
                    Fact {
                        name: "scalar curvature 0",
                        kind: FactKind::ScalarCurvature { expected: 0.0 },
                        tol: 1e-12,
                        note: "flat chart",
                    },
                    Fact {
                        name: "Weyl blocks vanish",
                        kind: FactKind::WeylBothVanish,
                        tol: 1e-12,
                        note: "flat chart",
                    },
                    Fact {
                        name: "sectional curvature 0",
                        kind: FactKind::SectionalConstant {
                            expected: 0.0,
                            planes_per_point: 50,
                        },
                        tol: 1e-12,
                        note: "flat chart",
                    },
                    Fact {
                        name: "biorthogonal extremes 0",
                        kind: FactKind::KperpMin { expected: 0.0 },
                        tol: 1e-12,
                        note: "flat chart",
                    },
                    Fact {
                        name: "form self-dual of length sqrt(2)",
                        kind: FactKind::FormSelfDualLength { expected: SQRT_2 },
                        tol: 1e-12,
                        note: "constant coefficients",
                    },
                    Fact {
                        name: "form closed",
                        kind: FactKind::FormClosed,
                        tol: 1e-12,
                        note: "constant coefficients",
                    },
                ],
            })
        }
        BuiltinModel::Sphere4 { r } => {
            if !(*r > 0.0) {
                return Err(ModelError::BadParams {
                    message: format!("sphere4 needs r > 0, got {r}"),
                });
            }
            let c = stereographic_factor(*r, 0..4);
            let mut g = zero_upper();
            for i in 0..4 {
                g[i][i] = c.clone();
            }
            let k = 1.0 / (r * r);
            Ok(ModelGeometry {
                name: format!("sphere4(r={r})"),
                metric: MetricField::new(
                    Domain::Ball { radius: 2.0 * r },
                    Orientation::Positive,
                    &g,
                ),
                distinguished_form: None,
                facts: vec![
                    Fact {
                        name: "scalar curvature 12/r^2",
                        kind: FactKind::ScalarCurvature { expected: 12.0 * k },
                        tol: 1e-9,
                        note: "space form, s = n(n-1) k",
                    },
                    Fact {
                        name: "Einstein constant 3/r^2",
                        kind: FactKind::EinsteinConstant { constant: 3.0 * k },
                        tol: 1e-9,
                        note: "space form",
                    },
                    Fact {
                        name: "Weyl blocks vanish",
                        kind: FactKind::WeylBothVanish,
                        tol: 1e-9,
                        note: "conformally flat and Einstein",
                    },
                    Fact {
                        name: "sectional curvature 1/r^2",
                        kind: FactKind::SectionalConstant {
                            expected: k,
                            planes_per_point: 100,
                        },
                        tol: 1e-9,
                        note: "space form",
                    },
                    Fact {
                        name: "biorthogonal min 1/r^2",
                        kind: FactKind::KperpMin { expected: k },
                        tol: 1e-8,
                        note: "constant curvature",
                    },
                    Fact {
                        name: "biorthogonal max 1/r^2",
                        kind: FactKind::KperpMax { expected: k },
                        tol: 1e-8,
                        note: "constant curvature",
                    },
                ],
            })
        }
        BuiltinModel::FubiniStudy => {
            let (g, w) = fubini_study_components();
            Ok(ModelGeometry {
                name: "fubini_study".to_string(),
                metric: MetricField::new(Domain::Ball { radius: 2.0 }, Orientation::Positive, &g),
                distinguished_form: Some(TwoFormField::new(&w)),
                facts: vec![
                    Fact {
                        name: "scalar curvature 24",
                        kind: FactKind::ScalarCurvature { expected: 24.0 },
                        tol: 1e-8,
                        note: "holomorphic sectional curvature 4",
                    },
                    Fact {
                        name: "Einstein constant 6",
                        kind: FactKind::EinsteinConstant { constant: 6.0 },
                        tol: 1e-8,
                        note: "Einstein metric",
                    },
                    Fact {
                        name: "self-dual Weyl eigenvalues (-2, -2, 4)",
                        kind: FactKind::WeylPlusEigenvalues {
                            expected: [-2.0, -2.0, 4.0],
                        },
                        tol: 1e-6,
                        note: "Kahler spectrum (s/6)(-1/2, -1/2, 1)",
                    },
                    Fact {
                        name: "anti-self-dual Weyl vanishes",
                        kind: FactKind::WeylMinusVanishes,
                        tol: 1e-8,
                        note: "self-dual metric",
                    },
                    Fact {
                        name: "sectional curvature in [1, 4]",
                        kind: FactKind::SectionalRange {
                            lo: 1.0,
                            hi: 4.0,
                            planes_per_point: 500,
                        },
                        tol: 1e-6,
                        note: "quarter-pinched",
                    },
                    Fact {
                        name: "biorthogonal min 1",
                        kind: FactKind::KperpMin { expected: 1.0 },
                        tol: 1e-5,
                        note: "closed form from the Weyl spectra",
                    },
                    Fact {
                        name: "biorthogonal max 4",
                        kind: FactKind::KperpMax { expected: 4.0 },
                        tol: 1e-5,
                        note: "closed form from the Weyl spectra",
                    },
                    Fact {
                        name: "Kahler form self-dual of length sqrt(2)",
                        kind: FactKind::FormSelfDualLength { expected: SQRT_2 },
                        tol: 1e-8,
                        note: "fundamental form of a Kahler metric",
                    },
                    Fact {
                        name: "Kahler form closed",
                        kind: FactKind::FormClosed,
                        tol: 1e-9,
                        note: "Kahler condition",
                    },
                    Fact {
                        name: "Kahler form parallel",
                        kind: FactKind::FormParallel,
                        tol: 1e-7,
                        note: "Kahler condition",
                    },
                    Fact {
                        name: "total volume pi^2/2",
                        kind: FactKind::TotalVolume {
                            expected: std::f64::consts::PI * std::f64::consts::PI / 2.0,
                        },
                        tol: 0.0,
                        note: "recorded only; global integrals out of scope",
                    },
                ],
            })
        }
        BuiltinModel::S2xS2 { r1, r2 } => {
            if !(*r1 > 0.0) || !(*r2 > 0.0) {
                return Err(ModelError::BadParams {
                    message: format!("s2xs2 needs positive radii, got ({r1}, {r2})"),
                });
            }
            let c1 = stereographic_factor(*r1, 0..2);
            let c2 = stereographic_factor(*r2, 2..4);
            let mut g = zero_upper();
            g[0][0] = c1.clone();
            g[1][1] = c1.clone();
            g[2][2] = c2.clone();
            g[3][3] = c2.clone();
            let mut w = zero_upper();
            w[0][1] = c1;
            w[2][3] = c2;
            let k1 = 1.0 / (r1 * r1);
            let k2 = 1.0 / (r2 * r2);
            let mut facts = vec![
                Fact {
                    name: "scalar curvature 2/r1^2 + 2/r2^2",
                    kind: FactKind::ScalarCurvature {
                        expected: 2.0 * k1 + 2.0 * k2,
                    },
                    tol: 1e-9,
                    note: "product of surfaces",
                },
                Fact {
                    name: "biorthogonal min 0",
                    kind: FactKind::KperpMin { expected: 0.0 },
                    tol: 1e-8,
                    note: "mixed planes and their complements are flat",
                },
                Fact {
                    name: "biorthogonal max (k1+k2)/2",
                    kind: FactKind::KperpMax {
                        expected: 0.5 * (k1 + k2),
                    },
                    tol: 1e-8,
                    note: "pair of factor planes",
                },
                Fact {
                    name: "K3 sits exactly at s/4",
                    kind: FactKind::KperpBoundaryGap,
                    tol: 1e-9,
                    note: "boundary case of the hypotheses",
                },
                Fact {
                    name: "product form self-dual of length sqrt(2)",
                    kind: FactKind::FormSelfDualLength { expected: SQRT_2 },
                    tol: 1e-9,
                    note: "sum of the factor area forms",
                },
                Fact {
                    name: "product form closed",
                    kind: FactKind::FormClosed,
                    tol: 1e-9,
                    note: "factor area forms are closed",
                },
            ];
            if (k1 - k2).abs() < 1e-15 {
                facts.push(Fact {
                    name: "Einstein constant 1/r^2",
                    kind: FactKind::EinsteinConstant { constant: k1 },
                    tol: 1e-9,
                    note: "equal radii",
                });
            }
            Ok(ModelGeometry {
                name: format!("s2xs2(r1={r1},r2={r2})"),
                metric: MetricField::new(Domain::Ball { radius: 2.0 }, Orientation::Positive, &g),
                distinguished_form: Some(TwoFormField::new(&w)),
                facts,
            })
        }
        BuiltinModel::FsPerturbed { bump, t } => {
            if !(t.abs() < T_MAX) {
                return Err(ModelError::BadParams {
                    message: format!("fs_perturbed needs |t| < {T_MAX}, got {t}"),
                });
            }
            let (g, w) = fubini_study_components();
            let perturbed: [[Expression; 4]; 4] = std::array::from_fn(|i| {
                std::array::from_fn(|j| {
                    if i <= j {
                        Expression::add(
                            g[i][j].clone(),
                            Expression::mul(Expression::constant(*t), bump[i][j].clone()),
                        )
                    } else {
                        Expression::zero()
                    }
                })
            });
            Ok(ModelGeometry {
                name: format!("fs_perturbed(t={t})"),
                metric: MetricField::new(
                    Domain::Ball { radius: 2.0 },
                    Orientation::Positive,
                    &perturbed,
                ),
                distinguished_form: Some(TwoFormField::new(&w)),
                facts: Vec::new(),
            })
        }
    }
}

/// Name-and-parameters constructor used by the command line.
#[derive(Debug, Clone)]
pub struct BuiltinParams {
    pub r: f64,
    pub r1: f64,
    pub r2: f64,
    pub t: f64,
    pub bump: Option<Box<[[Expression; 4]; 4]>>,
}

impl Default for BuiltinParams {
    fn default() -> Self {
        BuiltinParams {
            r: 1.0,
            r1: 1.0,
            r2: 1.0,
            t: 0.0,
            bump: None,
        }
    }
}

pub fn builtin_by_name(name: &str, params: BuiltinParams) -> Result<ModelGeometry, ModelError> {
    let model = match name {
        "flat4" => BuiltinModel::Flat4,
        "sphere4" => BuiltinModel::Sphere4 { r: params.r },
        "fubini_study" => BuiltinModel::FubiniStudy,
        "s2xs2" => BuiltinModel::S2xS2 {
            r1: params.r1,
            r2: params.r2,
        },
        "fs_perturbed" => BuiltinModel::FsPerturbed {
            bump: params.bump.unwrap_or_else(|| Box::new(reference_bump())),
            t: params.t,
        },
        other => {
            return Err(ModelError::UnknownModel {
                name: other.to_string(),
            })
        }
    };
    builtin(&model)
}

/// The repository's reference perturbation direction: a rapidly decaying
/// profile times a fixed symmetric pattern. The profile drops below
/// double-precision resolution outside the unit sub-box.
pub fn reference_bump() -> [[Expression; 4]; 4] {
    let profile = Expression::exp(Expression::mul(
        Expression::constant(-32.0),
        radius_sq(0..4),
    ));
    // amplitudes keep g + t h positive definite over |t| < T_MAX while the
    // second derivatives of the profile are strong enough that the scan's
    // pass/fail threshold falls inside the amplitude ladder
    let pattern = [
        [3.0, 1.0, 0.0, 0.0],
        [1.0, -2.0, 0.5, 0.0],
        [0.0, 0.5, 1.5, 0.0],
        [0.0, 0.0, 0.0, -2.5],
    ];
    std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            if i <= j && pattern[i][j] != 0.0 {
                Expression::mul(Expression::constant(pattern[i][j]), profile.clone())
            } else {
                Expression::zero()
            }
        })
    })
}

/// Deterministic cell-centered grid over the domain's sampling box.
pub fn sample_grid(domain: &Domain, n_per_axis: usize) -> Vec<[f64; 4]> {
    let (lo, hi) = domain.sampling_box();
    let mut out = Vec::with_capacity(n_per_axis.pow(4));
    let coord = |axis: usize, i: usize| {
        lo[axis] + (i as f64 + 0.5) * (hi[axis] - lo[axis]) / n_per_axis as f64
    };
    for i0 in 0..n_per_axis {
        for i1 in 0..n_per_axis {
            for i2 in 0..n_per_axis {
                for i3 in 0..n_per_axis {
                    out.push([coord(0, i0), coord(1, i1), coord(2, i2), coord(3, i3)]);
                }
            }
        }
    }
    out
}

/// Seeded uniform samples from the domain's sampling box.
pub fn sample_random(domain: &Domain, n: usize, seed: u64) -> Vec<[f64; 4]> {
    let (lo, hi) = domain.sampling_box();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| std::array::from_fn(|i| rng.gen_range(lo[i]..hi[i])))
        .collect()
}

fn random_unit4(rng: &mut ChaCha8Rng) -> Vector4<f64> {
    loop {
        let v = Vector4::from_fn(|_, _| {
            let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
            let u2: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            (-2.0 * u1.ln()).sqrt() * u2.cos()
        });
        let n = v.norm();
        if n > 1e-3 {
            return v / n;
        }
    }
}

fn random_plane(rng: &mut ChaCha8Rng) -> Plane {
    loop {
        let u = random_unit4(rng);
        let mut v = random_unit4(rng);
        v -= u * u.dot(&v);
        if v.norm() > 1e-3 {
            return Plane { u, v: v / v.norm() };
        }
    }
}

/// Evaluates all facts of a model at the sample points. Plane-sampling
/// facts draw from the given seed, which is echoed in reports.
pub fn verify_facts(
    model: &ModelGeometry,
    points: &[[f64; 4]],
    seed: u64,
) -> Result<FactReport, GeometryError> {
    let mut outcomes = Vec::with_capacity(model.facts.len());
    // curvature data once per point
    let mut cps = Vec::with_capacity(points.len());
    for p in points {
        cps.push(riemann(&model.metric, p)?);
    }
    let ops: Vec<CurvatureOperator> = cps
        .iter()
        .map(CurvatureOperator::from_curvature_point)
        .collect();

    for fact in &model.facts {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        let mut checked = true;
        match &fact.kind {
            FactKind::ScalarCurvature { expected } => {
                for cp in &cps {
                    worst = worst.max((cp.scalar - expected).abs());
                }
            }
            FactKind::EinsteinConstant { constant } => {
                for cp in &cps {
                    let defect = (cp.ricci - Matrix4::identity() * *constant).norm();
                    worst = worst.max(defect);
                }
            }
            FactKind::WeylPlusEigenvalues { expected } => {
                for op in &ops {
                    let sd = spectra(op);
                    for i in 0..3 {
                        worst = worst.max((sd.lambda_plus[i] - expected[i]).abs());
                    }
                }
            }
            FactKind::WeylMinusVanishes => {
                for op in &ops {
                    worst = worst.max(op.w_minus().norm());
                }
            }
            FactKind::WeylBothVanish => {
                for op in &ops {
                    worst = worst.max(op.w_plus().norm()).max(op.w_minus().norm());
                }
            }
            FactKind::KperpMin { expected } => {
                for op in &ops {
                    let sd = spectra(op);
                    let k1 = 0.5 * (sd.s / 6.0 + sd.lambda_plus[0] + sd.lambda_minus[0]);
                    worst = worst.max((k1 - expected).abs());
                }
            }
            FactKind::KperpMax { expected } => {
                for op in &ops {
                    let sd = spectra(op);
                    let k3 = 0.5 * (sd.s / 6.0 + sd.lambda_plus[2] + sd.lambda_minus[2]);
                    worst = worst.max((k3 - expected).abs());
                }
            }
            FactKind::KperpBoundaryGap => {
                for op in &ops {
                    let sd = spectra(op);
                    let k3 = 0.5 * (sd.s / 6.0 + sd.lambda_plus[2] + sd.lambda_minus[2]);
                    worst = worst.max((k3 - sd.s / 4.0).abs());
                }
            }
            FactKind::SectionalRange {
                lo,
                hi,
                planes_per_point,
            } => {
                for op in &ops {
                    for _ in 0..*planes_per_point {
                        let plane = random_plane(&mut rng);
                        let k = op.quadratic_form(&plane.area_form());
                        worst = worst.max(lo - k).max(k - hi);
                    }
                }
                worst = worst.max(0.0);
            }
            FactKind::SectionalConstant {
                expected,
                planes_per_point,
            } => {
                for op in &ops {
                    for _ in 0..*planes_per_point {
                        let plane = random_plane(&mut rng);
                        let k = op.quadratic_form(&plane.area_form());
                        worst = worst.max((k - expected).abs());
                    }
                }
            }
            FactKind::FormSelfDualLength { expected } => {
                let w = model
                    .distinguished_form
                    .as_ref()
                    .expect("fact requires a distinguished form");
                for (p, cp) in points.iter().zip(&cps) {
                    let coord = w.value_at(p)?;
                    let frame_form = two_form_to_frame(&coord, &cp.frame);
                    let check = akstruct::check_symplectic_pointwise(&frame_form, fact.tol);
                    worst = worst
                        .max(check.selfdual_defect)
                        .max((check.length - expected).abs());
                }
            }
            FactKind::FormClosed => {
                let w = model
                    .distinguished_form
                    .as_ref()
                    .expect("fact requires a distinguished form");
                for p in points {
                    let d = hodgeops::exterior_d(w, p).map_err(|e| match e {
                        hodgeops::HodgeError::Geometry(g) => g,
                        other => panic!("unexpected error from exterior_d: {other}"),
                    })?;
                    let norm = d.iter().map(|x| x * x).sum::<f64>().sqrt();
                    worst = worst.max(norm);
                }
            }
            FactKind::FormParallel => {
                let w = model
                    .distinguished_form
                    .as_ref()
                    .expect("fact requires a distinguished form");
                for p in points {
                    let rep = hodgeops::weitzenboeck_residual(w, &model.metric, p).map_err(
                        |e| match e {
                            hodgeops::HodgeError::Geometry(g) => g,
                            other => panic!("unexpected duality error: {other}"),
                        },
                    )?;
                    worst = worst.max(rep.covariant_norm);
                }
            }
            FactKind::TotalVolume { .. } => {
                checked = false;
            }
        }
        outcomes.push(FactOutcome {
            name: fact.name,
            worst,
            tol: fact.tol,
            passed: !checked || worst <= fact.tol,
            checked,
            note: fact.note,
        });
    }
    Ok(FactReport {
        model: model.name.clone(),
        outcomes,
    })
}

/// One amplitude rung of the perturbation ladder.
#[derive(Debug, Clone, Copy)]
pub struct LadderRung {
    pub t: f64,
    /// Minimum of the biorthogonal curvature over all sampled (point, plane)
    /// pairs and both signs of `t`.
    pub min_kperp: f64,
    pub passed: bool,
}

/// Outcome of the positivity-persistence scan.
#[derive(Debug, Clone)]
pub struct PerturbationScan {
    pub seed: u64,
    pub pairs: usize,
    pub baseline_min: f64,
    /// Pass threshold: half the unperturbed minimum.
    pub threshold: f64,
    /// Largest amplitude whose whole ladder prefix stayed above threshold.
    pub t0: f64,
    pub min_at_half_t0: f64,
    pub ladder: Vec<LadderRung>,
}

/// Scans geometrically increasing amplitudes `t` and reports the largest
/// one at which the sampled biorthogonal curvature stays above half its
/// unperturbed minimum, for both signs of the perturbation.
pub fn openness_scan(
    bump: &[[Expression; 4]; 4],
    pairs: usize,
    seed: u64,
) -> Result<PerturbationScan, GeometryError> {
    let fs = builtin(&BuiltinModel::FubiniStudy).expect("fubini_study has no parameters");
    let bump_field = MetricField::new(Domain::Ball { radius: 2.0 }, Orientation::Positive, bump);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // sample points concentrated where the bump lives
    let mut base_jets: Vec<MetricJet> = Vec::with_capacity(pairs);
    let mut bump_jets: Vec<MetricJet> = Vec::with_capacity(pairs);
    let mut coord_planes: Vec<(Vector4<f64>, Vector4<f64>)> = Vec::with_capacity(pairs);
    for _ in 0..pairs {
        let p: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-0.6..0.6));
        base_jets.push(fs.metric.metric_jet(&p)?);
        bump_jets.push(bump_field.raw_jet(&p)?);
        coord_planes.push((random_unit4(&mut rng), random_unit4(&mut rng)));
    }

    let min_kperp_at = |t: f64| -> Result<f64, GeometryError> {
        let mut min = f64::INFINITY;
        for i in 0..pairs {
            let jet = MetricJet::affine(&base_jets[i], &bump_jets[i], t);
            let cp = curvature_from_jet(&jet, Orientation::Positive)?;
            let op = CurvatureOperator::from_curvature_point(&cp);
            // express the fixed coordinate plane in the frame of g_t
            let frame_inv = cp
                .frame
                .try_inverse()
                .ok_or(GeometryError::NotPositiveDefinite {
                    point: cp.point,
                    min_eigenvalue: 0.0,
                })?;
            let (uc, vc) = coord_planes[i];
            let plane = Plane::from_vectors(frame_inv * uc, frame_inv * vc)
                .expect("sampled vectors are independent");
            let k = biortho::biorthogonal(&op, &plane).expect("plane is orthonormal");
            min = min.min(k);
        }
        Ok(min)
    };

    let baseline_min = min_kperp_at(0.0)?;
    let threshold = 0.5 * baseline_min;

    const RUNGS: usize = 12;
    let mut ladder = Vec::with_capacity(RUNGS);
    let mut t0 = 0.0;
    for k in 1..=RUNGS {
        let t = T_MAX / f64::powi(2.0, (RUNGS - k) as i32);
        let min = min_kperp_at(t)?.min(min_kperp_at(-t)?);
        let passed = min >= threshold;
        ladder.push(LadderRung {
            t,
            min_kperp: min,
            passed,
        });
        if passed {
            t0 = t;
        } else {
            break;
        }
    }
    let min_at_half_t0 = if t0 > 0.0 {
        min_kperp_at(t0 / 2.0)?.min(min_kperp_at(-t0 / 2.0)?)
    } else {
        baseline_min
    };
    Ok(PerturbationScan {
        seed,
        pairs,
        baseline_min,
        threshold,
        t0,
        min_at_half_t0,
        ladder,
    })
}
