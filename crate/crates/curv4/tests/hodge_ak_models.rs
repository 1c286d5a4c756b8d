//! Exterior-calculus and almost-Kahler checks on the model geometries:
//! harmonicity and parallelism of the Kahler form, Weitzenboeck residuals
//! with independent transport and quadrature oracles, and the conformal
//! machinery.

use curv4::akstruct::{
    build_acs, check_symplectic_pointwise, conformal_normalize, form_length_at,
    star_conformal_invariance,
};
use curv4::expr::{parse, Expression};
use curv4::geometry::{christoffel, riemann, two_form_to_frame, Domain, MetricField, Orientation};
use curv4::hodgeops::{
    codifferential, covariant_derivative, exterior_d, hodge_laplacian, weitzenboeck_residual,
    TwoFormField, COORD_PAIRS,
};
use curv4::lambda2::SQRT_2;
use curv4::models::{builtin, sample_random, BuiltinModel};
use nalgebra::{Matrix4, Vector4};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn zero_upper() -> [[Expression; 4]; 4] {
    std::array::from_fn(|_| std::array::from_fn(|_| Expression::zero()))
}

/// Random polynomial of degree two in the chart coordinates.
fn random_poly(rng: &mut StdRng) -> Expression {
    let mut acc = Expression::constant(rng.gen_range(-1.0..1.0));
    for i in 0..4 {
        acc = Expression::add(
            acc,
            Expression::mul(
                Expression::constant(rng.gen_range(-0.5..0.5)),
                Expression::var(i),
            ),
        );
    }
    for i in 0..4 {
        for j in i..4 {
            if rng.gen_bool(0.4) {
                acc = Expression::add(
                    acc,
                    Expression::mul(
                        Expression::constant(rng.gen_range(-0.3..0.3)),
                        Expression::mul(Expression::var(i), Expression::var(j)),
                    ),
                );
            }
        }
    }
    acc
}

/// Random pointwise self-dual analytic field: coefficient functions on the
/// flat self-dual patterns (conformal metrics share the flat 2-form star,
/// so these are self-dual for the stereographic sphere as well).
fn random_selfdual_field(rng: &mut StdRng) -> TwoFormField {
    let mut upper = zero_upper();
    let c1 = random_poly(rng);
    let c2 = random_poly(rng);
    let c3 = random_poly(rng);
    // pattern pairs: (01)+(23), (02)+(31), (03)+(12)
    upper[0][1] = c1.clone();
    upper[2][3] = c1;
    upper[0][2] = c2.clone();
    upper[3][1] = c2; // stored upper: (1,3) with the opposite sign
    upper[0][3] = c3.clone();
    upper[1][2] = c3;
    // fix the (3,1) entry into the upper triangle
    let mut fixed = zero_upper();
    for (i, j) in COORD_PAIRS {
        fixed[i][j] = if (i, j) == (1, 3) {
            Expression::neg(upper[3][1].clone())
        } else {
            upper[i][j].clone()
        };
    }
    TwoFormField::new(&fixed)
}

#[test]
fn fubini_study_kahler_form_is_harmonic_and_parallel() {
    let fs = builtin(&BuiltinModel::FubiniStudy).unwrap();
    let w = fs.distinguished_form.as_ref().unwrap();
    for p in sample_random(&fs.metric.domain, 20, 123) {
        let d = exterior_d(w, &p).unwrap();
        let d_norm = d.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(d_norm <= 1e-9, "|dw| = {d_norm} at {p:?}");

        let rep = weitzenboeck_residual(w, &fs.metric, &p).unwrap();
        assert!(
            rep.covariant_norm <= 1e-7,
            "|nabla w| = {}",
            rep.covariant_norm
        );
        assert!(
            rep.laplacian_norm <= 1e-7,
            "|Delta w| = {}",
            rep.laplacian_norm
        );
        assert!(rep.residual <= 1e-6, "residual = {}", rep.residual);

        // pointwise symplectic data
        let cp = riemann(&fs.metric, &p).unwrap();
        let frame_form = two_form_to_frame(&w.value_at(&p).unwrap(), &cp.frame);
        let check = check_symplectic_pointwise(&frame_form, 1e-8);
        assert!(check.selfdual);
        assert!((check.length - SQRT_2).abs() <= 1e-8);
        assert!(check.volume_identity_residual <= 1e-8);
    }
}

#[test]
fn sphere_selfdual_fields_satisfy_weitzenboeck() {
    let sphere = builtin(&BuiltinModel::Sphere4 { r: 1.0 }).unwrap();
    let mut rng = StdRng::seed_from_u64(2718);
    for _ in 0..6 {
        let w = random_selfdual_field(&mut rng);
        for p in sample_random(&sphere.metric.domain, 4, rng.gen()) {
            let rep = weitzenboeck_residual(&w, &sphere.metric, &p).unwrap();
            assert!(rep.residual <= 1e-5, "residual {} at {:?}", rep.residual, p);
        }
    }
}

#[test]
fn weitzenboeck_invariant_under_orientation_flip() {
    // flipping the orientation swaps the duality of the field and the Weyl
    // block used; the residual must not change
    let sphere = builtin(&BuiltinModel::Sphere4 { r: 1.0 }).unwrap();
    let flipped = sphere.metric.with_orientation(Orientation::Negative);
    let mut rng = StdRng::seed_from_u64(31415);
    let w = random_selfdual_field(&mut rng);
    for p in sample_random(&sphere.metric.domain, 5, 8) {
        let a = weitzenboeck_residual(&w, &sphere.metric, &p).unwrap();
        let b = weitzenboeck_residual(&w, &flipped, &p).unwrap();
        assert!((a.residual - b.residual).abs() <= 1e-10);
        assert!((a.covariant_norm - b.covariant_norm).abs() <= 1e-10);
        assert!((a.laplacian_norm - b.laplacian_norm).abs() <= 1e-10);
    }
}

/// Parallel transport oracle: compare `nabla_k w` against the covariant
/// finite difference built from RK4 transport along the coordinate line.
#[test]
fn covariant_derivative_matches_transport_oracle() {
    let sphere = builtin(&BuiltinModel::Sphere4 { r: 1.0 }).unwrap();
    // frame self-dual field: c(x) (dx1^dx2 + dx3^dx4) with the conformal factor
    let mut upper = zero_upper();
    upper[0][1] = parse("4/(1 + x1^2 + x2^2 + x3^2 + x4^2)^2").unwrap();
    upper[2][3] = upper[0][1].clone();
    let w = TwoFormField::new(&upper);

    let transport = |p: &[f64; 4], axis: usize, t: f64| -> Matrix4<f64> {
        // solve dV/ds = -Gamma(x(s))(e_axis, V) for the four basis vectors,
        // x(s) = p + s e_axis, s from 0 to t, then pull w(x(t)) back
        let n_steps = 8;
        let h = t / n_steps as f64;
        let mut v = Matrix4::<f64>::identity();
        let deriv = |s: f64, v: &Matrix4<f64>| -> Matrix4<f64> {
            let mut x = *p;
            x[axis] += s;
            let gamma = christoffel(&sphere.metric, &x).unwrap();
            let mut dv = Matrix4::zeros();
            for col in 0..4 {
                for m in 0..4 {
                    let mut acc = 0.0;
                    for j in 0..4 {
                        acc -= gamma[m][axis][j] * v[(j, col)];
                    }
                    dv[(m, col)] = acc;
                }
            }
            dv
        };
        for k in 0..n_steps {
            let s = k as f64 * h;
            let k1 = deriv(s, &v);
            let k2 = deriv(s + h / 2.0, &(v + k1 * (h / 2.0)));
            let k3 = deriv(s + h / 2.0, &(v + k2 * (h / 2.0)));
            let k4 = deriv(s + h, &(v + k3 * h));
            v += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        }
        let mut x = *p;
        x[axis] += t;
        let w_end = w.value_at(&x).unwrap();
        // (P^* w)(u, v) = w(Pu, Pv)
        v.transpose() * w_end * v
    };

    for p in sample_random(&sphere.metric.domain, 3, 5) {
        let nabla = covariant_derivative(&w, &sphere.metric, &p).unwrap();
        let h = 1e-3;
        for axis in 0..4 {
            let plus = transport(&p, axis, h);
            let minus = transport(&p, axis, -h);
            let fd = (plus - minus) / (2.0 * h);
            assert!(
                (fd - nabla[axis]).norm() <= 1e-5,
                "axis {axis}: transport fd deviates by {}",
                (fd - nabla[axis]).norm()
            );
        }
    }
}

/// L2 adjointness of d and the codifferential on the periodic flat box
/// [0, 2pi]^4, by exact trapezoid quadrature of trigonometric fields.
#[test]
fn codifferential_is_adjoint_of_d() {
    let flat = MetricField::flat(Domain::Box4 {
        lo: [-10.0; 4],
        hi: [10.0; 4],
    });
    // periodic 1-form alpha and 2-form omega, with frequencies arranged so
    // the L2 pairing does not vanish by orthogonality
    let alpha: [Expression; 4] = [
        parse("cos(x2)").unwrap(),
        parse("sin(x1)*cos(x3)").unwrap(),
        parse("sin(x2)*sin(x4)").unwrap(),
        parse("cos(x1)").unwrap(),
    ];
    let mut upper = zero_upper();
    upper[0][1] = parse("cos(x1)*cos(x3) + sin(x2)").unwrap();
    upper[0][2] = parse("sin(x1)").unwrap();
    upper[1][3] = parse("cos(x2)*cos(x4)").unwrap();
    upper[2][3] = parse("sin(x3)*cos(x1)").unwrap();
    let omega = TwoFormField::new(&upper);

    // d(alpha) components, symbolically
    let mut d_alpha: [[Expression; 4]; 4] = zero_upper();
    for (i, j) in COORD_PAIRS {
        d_alpha[i][j] = Expression::sub(alpha[j].differentiate(i), alpha[i].differentiate(j));
    }

    let n = 8;
    let step = std::f64::consts::TAU / n as f64;
    let mut lhs = 0.0; // <d alpha, omega>
    let mut rhs = 0.0; // <alpha, d* omega>
    for i0 in 0..n {
        for i1 in 0..n {
            for i2 in 0..n {
                for i3 in 0..n {
                    let p = [
                        i0 as f64 * step,
                        i1 as f64 * step,
                        i2 as f64 * step,
                        i3 as f64 * step,
                    ];
                    let w = omega.value_at(&p).unwrap();
                    for (i, j) in COORD_PAIRS {
                        lhs += d_alpha[i][j].eval(&p).unwrap() * w[(i, j)];
                    }
                    let delta = codifferential(&omega, &flat, &p).unwrap();
                    for i in 0..4 {
                        rhs += alpha[i].eval(&p).unwrap() * delta[i];
                    }
                }
            }
        }
    }
    let cell = step.powi(4);
    lhs *= cell;
    rhs *= cell;
    assert!(
        (lhs - rhs).abs() <= 1e-6 * lhs.abs().max(1.0),
        "adjointness violated: {lhs} vs {rhs}"
    );
    assert!(lhs.abs() > 1e-3, "test fields must not be orthogonal");
}

/// Integrated identity behind the Weitzenboeck argument, on the flat box:
/// int <Delta w, w> = int (1/2 Lap|w|^2 + |nabla w|^2) with the curvature
/// terms vanishing; the Laplacian-of-norm term integrates to zero over a
/// full period, which the quadrature confirms as part of the balance.
#[test]
fn integrated_weitzenboeck_sign_check() {
    let flat = MetricField::flat(Domain::Box4 {
        lo: [-10.0; 4],
        hi: [10.0; 4],
    });
    let mut upper = zero_upper();
    upper[0][1] = parse("sin(x1)*cos(x3)").unwrap();
    upper[1][2] = parse("cos(x4)").unwrap();
    upper[2][3] = parse("sin(x2)").unwrap();
    let omega = TwoFormField::new(&upper);

    // |w|^2 as an expression, for the scalar Laplacian term
    let mut norm2 = Expression::zero();
    for (i, j) in COORD_PAIRS {
        let c = omega.component(i, j);
        norm2 = Expression::add(norm2, Expression::mul(c.clone(), c));
    }
    let mut lap_norm2 = Expression::zero();
    for k in 0..4 {
        lap_norm2 = Expression::sub(lap_norm2, norm2.differentiate(k).differentiate(k));
    }

    let n = 8;
    let step = std::f64::consts::TAU / n as f64;
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for i0 in 0..n {
        for i1 in 0..n {
            for i2 in 0..n {
                for i3 in 0..n {
                    let p = [
                        i0 as f64 * step,
                        i1 as f64 * step,
                        i2 as f64 * step,
                        i3 as f64 * step,
                    ];
                    let w = omega.value_at(&p).unwrap();
                    let lap = hodge_laplacian(&omega, &flat, &p).unwrap();
                    for (i, j) in COORD_PAIRS {
                        lhs += lap[(i, j)] * w[(i, j)];
                    }
                    let nabla = covariant_derivative(&omega, &flat, &p).unwrap();
                    let mut grad2 = 0.0;
                    for k in 0..4 {
                        for (i, j) in COORD_PAIRS {
                            grad2 += nabla[k][(i, j)] * nabla[k][(i, j)];
                        }
                    }
                    rhs += 0.5 * lap_norm2.eval(&p).unwrap() + grad2;
                }
            }
        }
    }
    let cell = step.powi(4);
    lhs *= cell;
    rhs *= cell;
    assert!(lhs > 0.1, "field must not be harmonic");
    assert!(
        (lhs - rhs).abs() <= 1e-4 * lhs.max(1.0),
        "integrated identity violated: {lhs} vs {rhs}"
    );
}

#[test]
fn fubini_study_acs_matches_chart_complex_structure() {
    let fs = builtin(&BuiltinModel::FubiniStudy).unwrap();
    let w = fs.distinguished_form.as_ref().unwrap();
    // multiplication by i in the chart z1 = x1 + i x2, z2 = x3 + i x4
    let mut j_std = Matrix4::zeros();
    j_std[(1, 0)] = 1.0;
    j_std[(0, 1)] = -1.0;
    j_std[(3, 2)] = 1.0;
    j_std[(2, 3)] = -1.0;
    for p in sample_random(&fs.metric.domain, 10, 888) {
        let g = fs.metric.metric_at(&p).unwrap();
        let omega = curv4::lambda2::TwoFormPoint::from_matrix(&w.value_at(&p).unwrap());
        // build in coordinate components (the operation accepts any basis as
        // long as metric and form share it)
        let acs = build_acs(&g, &omega).unwrap();
        assert!(acs.square_defect() <= 1e-9);
        assert!(
            (acs.j - j_std).norm() <= 1e-9,
            "J deviates from the chart complex structure at {p:?}"
        );
        // compatibility in the g-geometry
        let mut rng = StdRng::seed_from_u64(5);
        for _ in 0..10 {
            let x = Vector4::from_fn(|_, _| rng.gen_range(-1.0..1.0f64));
            let y = Vector4::from_fn(|_, _| rng.gen_range(-1.0..1.0f64));
            let gx = |a: &Vector4<f64>, b: &Vector4<f64>| (g * *a).dot(b);
            assert!((gx(&(acs.j * x), &(acs.j * y)) - gx(&x, &y)).abs() <= 1e-9);
        }
    }
}

#[test]
fn fubini_study_conformal_factor_is_one() {
    let fs = builtin(&BuiltinModel::FubiniStudy).unwrap();
    let w = fs.distinguished_form.as_ref().unwrap();
    let pts = sample_random(&fs.metric.domain, 10, 99);
    let (u2, g_prime) = conformal_normalize(&fs.metric, w, &pts).unwrap();
    for p in &pts {
        assert!((u2.eval(p).unwrap() - 1.0).abs() <= 1e-10, "u^2 != 1");
        assert!((form_length_at(&g_prime, w, p).unwrap() - SQRT_2).abs() <= 1e-9);
    }
}

/// The stereographic sphere chart is conformal to the flat chart, so their
/// 2-form stars agree; this exercises the invariance on a real pair.
#[test]
fn star_invariance_sphere_versus_flat() {
    let flat = MetricField::flat(Domain::unit_box());
    let factor = parse("4/(1 + x1^2 + x2^2 + x3^2 + x4^2)^2").unwrap();
    let mut rng = StdRng::seed_from_u64(4242);
    let mut upper = zero_upper();
    for (i, j) in COORD_PAIRS {
        upper[i][j] = random_poly(&mut rng);
    }
    let alpha = TwoFormField::new(&upper);
    let pts = sample_random(&flat.domain, 10, 12);
    let res = star_conformal_invariance(&flat, &factor, &alpha, &pts).unwrap();
    assert!(res <= 1e-9, "residual {res}");
}
