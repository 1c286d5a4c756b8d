//! Acceptance suite: every criterion runs at its stated tolerance and
//! prints one pass line (run with `-- --nocapture` to see them). The
//! command-line determinism and exit-code contract live in the CLI crate's
//! own acceptance test.

mod common;

use std::time::Instant;

use curv4::akstruct::{build_acs, conformal_normalize, form_length_at, star_conformal_invariance};
use curv4::biortho::{
    biorthogonal, hypothesis_report, kperp_extremes_closed, kperp_extremes_search, Plane,
    SearchBudget,
};
use curv4::curvspec::{random_curvature, random_spectral, spectra, CurvatureOperator, RandomMode};
use curv4::expr::{parse, Expression};
use curv4::geometry::{riemann, two_form_to_frame, Domain, MetricField};
use curv4::hodgeops::{
    codifferential, exterior_d, weitzenboeck_residual, TwoFormField, COORD_PAIRS,
};
use curv4::lambda2::{TwoFormPoint, SQRT_2};
use curv4::models::{builtin, openness_scan, reference_bump, sample_random, BuiltinModel};
use nalgebra::{Matrix4, Vector4};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Criterion 1: closed-form extremes against the plane-search oracle on the
/// four model geometries (10 points each) and 200 random operators, to
/// 1e-5, within 60 s single-threaded.
#[test]
fn criterion_1_oracle_equivalence() {
    let start = Instant::now();
    let tol = 1e-5;
    let budget = |seed: u64| SearchBudget {
        n_samples: 1000,
        n_refinements: 50,
        seed,
    };
    let mut worst: f64 = 0.0;

    let models = [
        BuiltinModel::FubiniStudy,
        BuiltinModel::Sphere4 { r: 1.0 },
        BuiltinModel::S2xS2 { r1: 1.0, r2: 1.0 },
        BuiltinModel::Flat4,
    ];
    for (mi, model) in models.iter().enumerate() {
        let m = builtin(model).unwrap();
        for (pi, p) in sample_random(&m.metric.domain, 10, 1000 + mi as u64)
            .iter()
            .enumerate()
        {
            let cp = riemann(&m.metric, p).unwrap();
            let op = CurvatureOperator::from_curvature_point(&cp);
            let closed = kperp_extremes_closed(&spectra(&op)).unwrap();
            let search = kperp_extremes_search(&op, &budget((mi * 100 + pi) as u64));
            let gap = (closed.kperp1 - search.kperp1)
                .abs()
                .max((closed.kperp3 - search.kperp3).abs());
            assert!(
                gap <= tol,
                "{}: oracle gap {gap} at {p:?} (closed {} {} vs search {} {})",
                m.name,
                closed.kperp1,
                closed.kperp3,
                search.kperp1,
                search.kperp3
            );
            worst = worst.max(gap);
        }
    }
    for seed in 0..200u64 {
        let mode = match seed % 3 {
            0 => RandomMode::General,
            1 => RandomMode::Einstein,
            _ => RandomMode::SelfDualWeylOnly,
        };
        let op = random_curvature(seed, mode);
        let closed = kperp_extremes_closed(&spectra(&op)).unwrap();
        let search = kperp_extremes_search(&op, &budget(seed.wrapping_mul(7919)));
        let gap = (closed.kperp1 - search.kperp1)
            .abs()
            .max((closed.kperp3 - search.kperp3).abs());
        assert!(gap <= tol, "synthetic seed {seed}: oracle gap {gap}");
        worst = worst.max(gap);
    }

    let elapsed = start.elapsed();
    assert!(
        elapsed.as_secs_f64() <= 60.0,
        "oracle equivalence took {elapsed:?}, budget is 60 s"
    );
    println!(
        "[criterion 1] PASS - oracle equivalence: worst gap {worst:.2e} (tol 1e-5), {:.1} s",
        elapsed.as_secs_f64()
    );
}

/// Criterion 2: the Fubini-Study suite at 20 chart points.
#[test]
fn criterion_2_fubini_study_suite() {
    let fs = builtin(&BuiltinModel::FubiniStudy).unwrap();
    let form = fs.distinguished_form.as_ref().unwrap();
    let points = sample_random(&fs.metric.domain, 20, 0xF5);
    let mut rng = StdRng::seed_from_u64(0xF5F5);
    let mut sectional_count = 0usize;

    for p in &points {
        let cp = riemann(&fs.metric, p).unwrap();
        assert!((cp.scalar - 24.0).abs() <= 1e-6, "s = {}", cp.scalar);
        assert!((cp.ricci - Matrix4::identity() * 6.0).norm() <= 1e-8);

        let op = CurvatureOperator::from_curvature_point(&cp);
        let sd = spectra(&op);
        for (got, want) in sd.lambda_plus.iter().zip([-2.0, -2.0, 4.0]) {
            assert!((got - want).abs() <= 1e-6, "lambda+ {:?}", sd.lambda_plus);
        }
        for l in sd.lambda_minus {
            assert!(l.abs() <= 1e-8, "lambda- {:?}", sd.lambda_minus);
        }
        let ext = kperp_extremes_closed(&sd).unwrap();
        assert!((ext.kperp1 - 1.0).abs() <= 1e-5, "K1 = {}", ext.kperp1);
        assert!((ext.kperp3 - 4.0).abs() <= 1e-5, "K3 = {}", ext.kperp3);

        // 500 random planes per point -> 10^4 sectional curvatures
        let mut drawn = 0;
        while drawn < 500 {
            let u = random_unit(&mut rng);
            let mut v = random_unit(&mut rng);
            v -= u * u.dot(&v);
            if v.norm() < 0.2 {
                continue;
            }
            v /= v.norm();
            let k = op.quadratic_form(&TwoFormPoint::wedge_of(&u, &v));
            assert!(
                (1.0 - 1e-6..=4.0 + 1e-6).contains(&k),
                "sectional {k} out of [1,4]"
            );
            drawn += 1;
            sectional_count += 1;
        }

        // Kahler form data
        let d = exterior_d(form, p).unwrap();
        assert!(d.iter().map(|x| x * x).sum::<f64>().sqrt() <= 1e-9);
        let omega_frame = two_form_to_frame(&form.value_at(p).unwrap(), &cp.frame);
        assert!((omega_frame.norm() - SQRT_2).abs() <= 1e-8);
        let rep = weitzenboeck_residual(form, &fs.metric, p).unwrap();
        assert!(
            rep.covariant_norm <= 1e-7,
            "nabla w = {}",
            rep.covariant_norm
        );
        assert!(rep.residual <= 1e-6, "residual = {}", rep.residual);

        // kernel of s/3 - 2W+ aligns with w/sqrt(2)
        let kernel = &sd.eigenforms_plus[2];
        let alignment = kernel.inner(&omega_frame.scale(1.0 / SQRT_2)).abs();
        assert!(alignment >= 1.0 - 1e-6, "alignment {alignment}");
    }
    assert_eq!(sectional_count, 10_000);
    println!(
        "[criterion 2] PASS - Fubini-Study suite at 20 points, {sectional_count} sectional samples"
    );
}

fn random_unit(rng: &mut StdRng) -> Vector4<f64> {
    loop {
        let v = Vector4::from_fn(|_, _| rng.gen_range(-1.0..1.0f64));
        if v.norm() > 0.3 {
            return v / v.norm();
        }
    }
}

/// Criterion 3: sphere and flat baselines.
#[test]
fn criterion_3_sphere_flat_baselines() {
    let sphere = builtin(&BuiltinModel::Sphere4 { r: 1.0 }).unwrap();
    for p in sample_random(&sphere.metric.domain, 10, 0x53) {
        let cp = riemann(&sphere.metric, &p).unwrap();
        assert!((cp.scalar - 12.0).abs() <= 1e-9, "s = {}", cp.scalar);
        let op = CurvatureOperator::from_curvature_point(&cp);
        assert!(op.w_plus().norm() <= 1e-9);
        assert!(op.w_minus().norm() <= 1e-9);
        let sd = spectra(&op);
        let closed = kperp_extremes_closed(&sd).unwrap();
        assert!((closed.kperp1 - 1.0).abs() <= 1e-8);
        assert!((closed.kperp3 - 1.0).abs() <= 1e-8);
        let search = kperp_extremes_search(&op, &SearchBudget::default());
        assert!((search.kperp1 - 1.0).abs() <= 1e-8);
        assert!((search.kperp3 - 1.0).abs() <= 1e-8);
    }

    let flat = builtin(&BuiltinModel::Flat4).unwrap();
    let mut pairs = Vec::new();
    for p in sample_random(&flat.metric.domain, 10, 0x54) {
        let cp = riemann(&flat.metric, &p).unwrap();
        let mut worst: f64 = cp.scalar.abs();
        for i in 0..4 {
            for j in 0..4 {
                for k in 0..4 {
                    for l in 0..4 {
                        worst = worst.max(cp.riem[i][j][k][l].abs());
                    }
                }
            }
        }
        let op = CurvatureOperator::from_curvature_point(&cp);
        worst = worst.max(op.matrix.norm());
        let sd = spectra(&op);
        let closed = kperp_extremes_closed(&sd).unwrap();
        worst = worst.max(closed.kperp1.abs()).max(closed.kperp3.abs());
        assert!(worst <= 1e-12, "flat residue {worst}");
        pairs.push((sd, closed));
    }
    let report = hypothesis_report(&pairs, 1e-9).unwrap();
    assert!(!report.all_kperp1_positive);
    assert!(!report.all_kperp3_below_quarter_s);
    assert!(!report.all_scalar_positive);
    assert!(!report.all_r_sums_positive);
    assert_eq!(report.dichotomy, curv4::biortho::Dichotomy::Neither);
    assert!(report.consistency_violations.is_empty());
    println!("[criterion 3] PASS - sphere4(1) and flat4 baselines");
}

/// Criterion 4: the implication chain between the verdicts on 1e5 random
/// spectra with margin exactly zero, in at most 10 s.
#[test]
fn criterion_4_implication_property_suite() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0C0);
    let (mut fired1, mut fired3) = (0usize, 0usize);
    for _ in 0..100_000 {
        let sd = random_spectral(&mut rng);
        assert!(sd.invariant_defect() == 0.0, "generator must be exact");
        let two_k1 = sd.s / 6.0 + sd.lambda_plus[0] + sd.lambda_minus[0];
        let two_k3 = sd.s / 6.0 + sd.lambda_plus[2] + sd.lambda_minus[2];
        if two_k1 > 0.0 {
            fired1 += 1;
            assert!(two_k3 < sd.s / 2.0, "K1 > 0 but K3 >= s/4");
            assert!(sd.s > 0.0, "K1 > 0 but s <= 0");
        }
        if two_k3 < sd.s / 2.0 {
            fired3 += 1;
            assert!(sd.s > 0.0, "K3 < s/4 but s <= 0");
            for i in 0..3 {
                for j in 0..3 {
                    assert!(
                        sd.r_plus[i] + sd.r_minus[j] > 0.0,
                        "K3 < s/4 but an r-sum is non-positive"
                    );
                }
            }
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() <= 10.0, "took {elapsed:?}");
    assert!(fired1 > 1000 && fired3 > 1000, "premises must fire");
    println!(
        "[criterion 4] PASS - 1e5 spectra, premises fired {fired1}/{fired3}, zero counterexamples, {:.2} s",
        elapsed.as_secs_f64()
    );
}

/// Criterion 5: the constructive half of the closed form; the plane built
/// from the extremal eigenform pair attains the extreme to 1e-8.
#[test]
fn criterion_5_constructive_extremes() {
    for seed in 0..100u64 {
        let op = random_curvature(seed.wrapping_add(5000), RandomMode::General);
        let sd = spectra(&op);
        let closed = kperp_extremes_closed(&sd).unwrap();
        let at_min = biorthogonal(&op, &closed.argmin).unwrap();
        let at_max = biorthogonal(&op, &closed.argmax).unwrap();
        assert!(
            (at_min - closed.kperp1).abs() <= 1e-8,
            "seed {seed}: argmin attains {at_min} vs {}",
            closed.kperp1
        );
        assert!(
            (at_max - closed.kperp3).abs() <= 1e-8,
            "seed {seed}: argmax attains {at_max} vs {}",
            closed.kperp3
        );
    }
    println!("[criterion 5] PASS - constructive extremes on 100 operators (1e-8)");
}

/// Criterion 6: the Weitzenboeck convention lock on the round sphere, plus
/// the L2 adjointness oracle for the codifferential on a periodic flat box.
#[test]
fn criterion_6_weitzenboeck_convention_lock() {
    let sphere = builtin(&BuiltinModel::Sphere4 { r: 1.0 }).unwrap();
    let mut rng = StdRng::seed_from_u64(0x6EED);
    let mut worst: f64 = 0.0;
    for field_idx in 0..20 {
        let w = common::random_selfdual_field(&mut rng);
        for p in sample_random(&sphere.metric.domain, 10, 600 + field_idx) {
            let rep = weitzenboeck_residual(&w, &sphere.metric, &p).unwrap();
            assert!(
                rep.residual <= 1e-5,
                "field {field_idx}: residual {} at {:?}",
                rep.residual,
                p
            );
            worst = worst.max(rep.residual);
        }
    }

    // adjointness by exact trapezoid quadrature of trigonometric fields
    let flat = MetricField::flat(Domain::Box4 {
        lo: [-10.0; 4],
        hi: [10.0; 4],
    });
    let alpha: [Expression; 4] = [
        parse("cos(x2)").unwrap(),
        parse("sin(x1)*cos(x3)").unwrap(),
        parse("sin(x4)").unwrap(),
        parse("cos(x1)*sin(x3)").unwrap(),
    ];
    let mut upper = common::zero_upper();
    upper[0][1] = parse("cos(x1)*cos(x3) + sin(x2)").unwrap();
    upper[1][2] = parse("sin(x2)*cos(x4)").unwrap();
    upper[2][3] = parse("cos(x3)").unwrap();
    let omega = TwoFormField::new(&upper);
    let mut d_alpha = common::zero_upper();
    for (i, j) in COORD_PAIRS {
        d_alpha[i][j] = Expression::sub(alpha[j].differentiate(i), alpha[i].differentiate(j));
    }
    let n = 8;
    let step = std::f64::consts::TAU / n as f64;
    let (mut lhs, mut rhs) = (0.0, 0.0);
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
                    let wv = omega.value_at(&p).unwrap();
                    for (i, j) in COORD_PAIRS {
                        lhs += d_alpha[i][j].eval(&p).unwrap() * wv[(i, j)];
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
    assert!(lhs.abs() > 1e-3, "pairing must not vanish");
    assert!(
        (lhs - rhs).abs() <= 1e-6 * lhs.abs().max(1.0),
        "adjointness: {lhs} vs {rhs}"
    );
    println!(
        "[criterion 6] PASS - Weitzenboeck residual worst {worst:.2e} (tol 1e-5), adjointness gap {:.2e}",
        (lhs - rhs).abs()
    );
}

/// Criterion 7: the almost-Kahler pipeline on the flat and Fubini-Study
/// distinguished forms.
#[test]
fn criterion_7_almost_kahler_pipeline() {
    let mut rng = StdRng::seed_from_u64(0x7A);
    for model in [BuiltinModel::Flat4, BuiltinModel::FubiniStudy] {
        let m = builtin(&model).unwrap();
        let w = m.distinguished_form.as_ref().unwrap();
        let points = sample_random(&m.metric.domain, 10, 0x77);
        for p in &points {
            let cp = riemann(&m.metric, p).unwrap();
            let omega = two_form_to_frame(&w.value_at(p).unwrap(), &cp.frame);
            let acs = build_acs(&Matrix4::identity(), &omega).unwrap();
            assert!(acs.square_defect() <= 1e-9);
            for _ in 0..20 {
                let x = random_unit(&mut rng);
                let y = random_unit(&mut rng);
                assert!(((acs.j * x).dot(&(acs.j * y)) - x.dot(&y)).abs() <= 1e-9);
                assert!(x.dot(&(acs.j * x)).abs() <= 1e-9);
                let o = omega.to_matrix();
                let w_xjx = (x.transpose() * o * (acs.j * x))[(0, 0)];
                assert!(w_xjx > 0.0, "w(x, Jx) must be positive");
                // w(Jx, Jy) = w(x, y)
                let w_j = ((acs.j * x).transpose() * o * (acs.j * y))[(0, 0)];
                let w_xy = (x.transpose() * o * y)[(0, 0)];
                assert!((w_j - w_xy).abs() <= 1e-9);
            }
        }

        // conformal normalization brings a scaled form back to sqrt(2)
        let scaled = w.scale(2.0);
        let (u2, g_prime) = conformal_normalize(&m.metric, &scaled, &points).unwrap();
        for p in &points {
            assert!((u2.eval(p).unwrap() - 2.0).abs() <= 1e-9);
            let len = form_length_at(&g_prime, &scaled, p).unwrap();
            assert!((len - SQRT_2).abs() <= 1e-9, "{}: |w|_g' = {len}", m.name);
        }
    }

    // conformal invariance of the 2-form star
    let flat = MetricField::flat(Domain::unit_box());
    let factor = parse("exp(x1 - 0.3*x2)").unwrap();
    let mut upper = common::zero_upper();
    for (i, j) in COORD_PAIRS {
        upper[i][j] = common::random_poly(&mut rng);
    }
    let alpha = TwoFormField::new(&upper);
    let pts = sample_random(&flat.domain, 12, 0x78);
    let res = star_conformal_invariance(&flat, &factor, &alpha, &pts).unwrap();
    assert!(res <= 1e-9, "star residual {res}");
    println!("[criterion 7] PASS - almost-Kahler pipeline (J, conformal factor, star invariance)");
}

/// Criterion 8: positivity persistence under the reference perturbation.
#[test]
fn criterion_8_perturbation_openness() {
    let bump = reference_bump();
    let scan = openness_scan(&bump, 500, 0x8888).unwrap();
    assert!(scan.t0 > 0.0, "no admissible amplitude found");
    assert!(
        scan.min_at_half_t0 >= 0.5,
        "min K_perp at t0/2 is {}",
        scan.min_at_half_t0
    );
    assert!(
        scan.baseline_min >= 1.0 - 1e-6,
        "baseline {}",
        scan.baseline_min
    );
    // deterministic given the seed
    let again = openness_scan(&bump, 500, 0x8888).unwrap();
    assert_eq!(scan.t0, again.t0);
    assert_eq!(scan.min_at_half_t0, again.min_at_half_t0);
    assert_eq!(scan.baseline_min, again.baseline_min);
    println!(
        "[criterion 8] PASS - openness scan: t0 = {:.3e}, min K_perp at t0/2 = {:.3} (baseline {:.3})",
        scan.t0, scan.min_at_half_t0, scan.baseline_min
    );
}

/// Criterion 9: the product of round spheres sits exactly on the boundary
/// of the hypotheses.
#[test]
fn criterion_9_boundary_geometry() {
    let m = builtin(&BuiltinModel::S2xS2 { r1: 1.0, r2: 1.0 }).unwrap();
    let mut pairs = Vec::new();
    for p in sample_random(&m.metric.domain, 10, 0x99) {
        let cp = riemann(&m.metric, &p).unwrap();
        let op = CurvatureOperator::from_curvature_point(&cp);
        let sd = spectra(&op);
        let closed = kperp_extremes_closed(&sd).unwrap();
        assert!(
            (closed.kperp3 - sd.s / 4.0).abs() <= 1e-9,
            "K3 - s/4 = {}",
            closed.kperp3 - sd.s / 4.0
        );
        pairs.push((sd, closed));
    }
    let report = hypothesis_report(&pairs, 1e-9).unwrap();
    assert!(!report.all_kperp1_positive, "K1 > 0 must fail at margin");
    assert!(
        !report.all_kperp3_below_quarter_s,
        "K3 < s/4 must fail at margin"
    );
    assert!(report.consistency_violations.is_empty());
    // the attained gap is reported and is numerically zero
    for ph in &report.points {
        assert!(ph.kperp3_gap.abs() <= 1e-9);
    }
    println!("[criterion 9] PASS - s2xs2(1,1) boundary case (gap <= 1e-9, hypotheses false)");
}

/// The plane type used in criterion helpers is re-exported; keep a smoke
/// check that orthonormal planes round-trip through the API.
#[test]
fn plane_api_smoke() {
    let p = Plane::from_orthonormal(Vector4::ith(0, 1.0), Vector4::ith(1, 1.0)).unwrap();
    assert!(p.orthonormality_defect() <= 1e-12);
}
