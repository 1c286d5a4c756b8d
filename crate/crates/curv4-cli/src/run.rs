//! Analysis driver: samples the chart, runs the selected checks per point,
//! aggregates verdicts, and serializes a deterministic report.

use std::collections::BTreeMap;

use curv4::akstruct::{build_acs, check_symplectic_pointwise, form_length_at};
use curv4::biortho::{
    hypothesis_report, kperp_extremes_closed, kperp_extremes_search, Dichotomy, KperpExtremes,
    SearchBudget,
};
use curv4::curvspec::{spectra, CurvatureOperator, SpectralData};
use curv4::geometry::{riemann, two_form_to_frame, MetricField};
use curv4::hodgeops::{exterior_d, weitzenboeck_residual, TwoFormField};
use curv4::lambda2::SQRT_2;
use curv4::models::{
    openness_scan, reference_bump, sample_grid, sample_random, verify_facts, ModelGeometry,
};
use curv4::nalgebra::Matrix4;
use rayon::prelude::*;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Check {
    Spectra,
    Kperp,
    Hypotheses,
    Ak,
    Weitzenboeck,
    Perturb,
}

impl Check {
    pub fn parse(name: &str) -> Option<Check> {
        Some(match name {
            "spectra" => Check::Spectra,
            "kperp" => Check::Kperp,
            "hypotheses" => Check::Hypotheses,
            "ak" => Check::Ak,
            "weitzenboeck" => Check::Weitzenboeck,
            "perturb" => Check::Perturb,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplingSpec {
    Grid { n_per_axis: usize },
    Random { count: usize },
}

#[derive(Debug)]
pub struct RunConfig {
    pub model: ModelGeometry,
    pub model_params: BTreeMap<String, f64>,
    pub source_kind: String,
    pub sampling: SamplingSpec,
    pub seed: u64,
    pub checks: Vec<Check>,
    pub margin_scale: f64,
    pub agree_tol: f64,
    pub weitz_tol: f64,
    pub search_samples: usize,
    pub search_sweeps: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct PointVerdictsOut {
    pub kperp1_positive: bool,
    pub kperp3_below_quarter_s: bool,
    pub kperp3_gap: f64,
    pub scalar_positive: bool,
    pub r_sums_positive: bool,
    pub min_r_sum: f64,
    pub w_plus_positive: bool,
    pub w_minus_positive: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct AkOut {
    pub selfdual: bool,
    pub selfdual_defect: f64,
    pub length: f64,
    pub volume_identity_residual: f64,
    /// Pointwise conformal factor `u^2 = |w|_g / sqrt(2)`.
    pub u2: f64,
    /// |J^2 + I| of the structure built in the normalized metric `u^2 g`.
    pub j_square_defect: f64,
    /// Form length in the normalized metric (sqrt(2) when the pipeline works).
    pub normalized_length: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct WeitzOut {
    pub d_norm: f64,
    pub codiff_norm: f64,
    pub laplacian_norm: f64,
    pub covariant_norm: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PointRecord {
    pub point: [f64; 4],
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_plus: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_minus: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_plus: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_minus: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kperp1_closed: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kperp3_closed: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kperp1_search: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kperp3_search: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_gap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdicts: Option<PointVerdictsOut>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ak: Option<AkOut>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weitzenboeck: Option<WeitzOut>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FactOut {
    pub name: String,
    pub worst: f64,
    pub tol: f64,
    pub passed: bool,
    pub checked: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct HypothesesOut {
    pub all_kperp1_positive: bool,
    pub all_kperp3_below_quarter_s: bool,
    pub all_scalar_positive: bool,
    pub all_r_sums_positive: bool,
    pub dichotomy: String,
    pub satisfied: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct PerturbOut {
    pub t0: f64,
    pub baseline_min: f64,
    pub threshold: f64,
    pub min_at_half_t0: f64,
    pub pairs: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Aggregate {
    pub points_total: usize,
    pub points_ok: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hypotheses: Option<HypothesesOut>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_max_gap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_mean_gap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_spectra_defect: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_weitzenboeck_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<PerturbOut>,
    pub facts: Vec<FactOut>,
    pub consistency_violations: Vec<String>,
    pub checks_passed: BTreeMap<String, bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema: u32,
    pub source: String,
    pub model: String,
    pub model_params: BTreeMap<String, f64>,
    pub sampling: SamplingSpec,
    pub seed: u64,
    pub margin_scale: f64,
    pub agree_tol: f64,
    pub checks: Vec<Check>,
    pub points: Vec<PointRecord>,
    pub aggregate: Aggregate,
    pub exit_code: i32,
}

struct PointOutcome {
    record: PointRecord,
    pair: Option<(SpectralData, KperpExtremes)>,
}

fn check_name(c: Check) -> &'static str {
    match c {
        Check::Spectra => "spectra",
        Check::Kperp => "kperp",
        Check::Hypotheses => "hypotheses",
        Check::Ak => "ak",
        Check::Weitzenboeck => "weitzenboeck",
        Check::Perturb => "perturb",
    }
}

fn analyze_point(
    cfg: &RunConfig,
    metric: &MetricField,
    form: Option<&TwoFormField>,
    index: usize,
    p: [f64; 4],
) -> PointOutcome {
    let mut record = PointRecord {
        point: p,
        status: "ok".to_string(),
        error: None,
        s: None,
        lambda_plus: None,
        lambda_minus: None,
        r_plus: None,
        r_minus: None,
        kperp1_closed: None,
        kperp3_closed: None,
        kperp1_search: None,
        kperp3_search: None,
        oracle_gap: None,
        verdicts: None,
        ak: None,
        weitzenboeck: None,
    };
    let fail = |record: &mut PointRecord, msg: String| {
        record.status = "error".to_string();
        record.error = Some(msg);
    };

    let cp = match riemann(metric, &p) {
        Ok(cp) => cp,
        Err(e) => {
            fail(&mut record, e.to_string());
            return PointOutcome { record, pair: None };
        }
    };
    let op = CurvatureOperator::from_curvature_point(&cp);
    let sd = spectra(&op);
    record.s = Some(sd.s);
    record.lambda_plus = Some(sd.lambda_plus);
    record.lambda_minus = Some(sd.lambda_minus);
    record.r_plus = Some(sd.r_plus);
    record.r_minus = Some(sd.r_minus);

    let closed = match kperp_extremes_closed(&sd) {
        Ok(c) => c,
        Err(e) => {
            fail(&mut record, format!("closed-form extremes failed: {e}"));
            return PointOutcome { record, pair: None };
        }
    };
    record.kperp1_closed = Some(closed.kperp1);
    record.kperp3_closed = Some(closed.kperp3);

    if cfg.checks.contains(&Check::Kperp) {
        let budget = SearchBudget::new(
            cfg.search_samples,
            cfg.search_sweeps,
            cfg.seed ^ (index as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15),
        );
        let search = kperp_extremes_search(&op, &budget);
        record.kperp1_search = Some(search.kperp1);
        record.kperp3_search = Some(search.kperp3);
        record.oracle_gap = Some(
            (closed.kperp1 - search.kperp1)
                .abs()
                .max((closed.kperp3 - search.kperp3).abs()),
        );
    }

    if let (Some(w), true) = (form, cfg.checks.contains(&Check::Ak)) {
        let ak = w.value_at(&p).map_err(|e| e.to_string()).and_then(|coord| {
            let frame_form = two_form_to_frame(&coord, &cp.frame);
            let check = check_symplectic_pointwise(&frame_form, 1e-8);
            // conformal normalization, pointwise: u^2 g gives the form
            // length sqrt(2), and the structure J is built in its frame
            let length_g = form_length_at(metric, w, &p).map_err(|e| e.to_string())?;
            let u2 = length_g / SQRT_2;
            if u2 <= 1e-12 {
                return Err(format!("form vanishes at {p:?}"));
            }
            let g_prime = cp.metric * u2;
            let frame_prime = curv4::geometry::orthonormal_frame(&g_prime, metric.orientation)
                .map_err(|e| e.to_string())?;
            let nf = two_form_to_frame(&coord, &frame_prime);
            let normalized_length = nf.norm();
            let j_square_defect = build_acs(&Matrix4::identity(), &nf)
                .map(|acs| acs.square_defect())
                .map_err(|e| e.to_string())?;
            Ok(AkOut {
                selfdual: check.selfdual,
                selfdual_defect: check.selfdual_defect,
                length: check.length,
                volume_identity_residual: check.volume_identity_residual,
                u2,
                j_square_defect,
                normalized_length,
            })
        });
        match ak {
            Ok(ak) => record.ak = Some(ak),
            Err(e) => fail(&mut record, e),
        }
    }

    if let (Some(w), true) = (form, cfg.checks.contains(&Check::Weitzenboeck)) {
        match weitzenboeck_residual(w, metric, &p) {
            Ok(rep) => {
                let d = exterior_d(w, &p)
                    .map(|d| d.iter().map(|x| x * x).sum::<f64>().sqrt())
                    .unwrap_or(f64::NAN);
                record.weitzenboeck = Some(WeitzOut {
                    d_norm: d,
                    codiff_norm: rep.codiff_norm,
                    laplacian_norm: rep.laplacian_norm,
                    covariant_norm: rep.covariant_norm,
                    residual: rep.residual,
                });
            }
            Err(e) => fail(&mut record, e.to_string()),
        }
    }

    PointOutcome {
        record,
        pair: Some((sd, closed)),
    }
}

/// Runs the configured analyses; the returned report embeds the exit code.
pub fn run(cfg: &RunConfig) -> Report {
    let metric = &cfg.model.metric;
    let form = cfg.model.distinguished_form.as_ref();

    let points = match cfg.sampling {
        SamplingSpec::Grid { n_per_axis } => sample_grid(&metric.domain, n_per_axis),
        SamplingSpec::Random { count } => sample_random(&metric.domain, count, cfg.seed),
    };

    let outcomes: Vec<PointOutcome> = points
        .par_iter()
        .enumerate()
        .map(|(i, p)| analyze_point(cfg, metric, form, i, *p))
        .collect();

    let points_total = outcomes.len();
    let ok_pairs: Vec<(SpectralData, KperpExtremes)> = outcomes
        .iter()
        .filter(|o| o.record.status == "ok")
        .filter_map(|o| o.pair.clone())
        .collect();
    let points_ok = outcomes.iter().filter(|o| o.record.status == "ok").count();
    let all_ok = points_ok == points_total;

    let mut consistency_violations = Vec::new();
    let mut records: Vec<PointRecord> = outcomes.into_iter().map(|o| o.record).collect();

    // hypotheses aggregate (also fills per-point verdicts)
    let hypotheses = if cfg.checks.contains(&Check::Hypotheses) && !ok_pairs.is_empty() {
        match hypothesis_report(&ok_pairs, cfg.margin_scale) {
            Ok(rep) => {
                let mut verdict_iter = rep.points.iter();
                for record in records.iter_mut().filter(|r| r.status == "ok") {
                    if let Some(ph) = verdict_iter.next() {
                        record.verdicts = Some(PointVerdictsOut {
                            kperp1_positive: ph.kperp1_positive,
                            kperp3_below_quarter_s: ph.kperp3_below_quarter_s,
                            kperp3_gap: ph.kperp3_gap,
                            scalar_positive: ph.scalar_positive,
                            r_sums_positive: ph.r_sums_positive,
                            min_r_sum: ph.min_r_sum,
                            w_plus_positive: ph.w_plus_positive,
                            w_minus_positive: ph.w_minus_positive,
                        });
                    }
                }
                consistency_violations.extend(rep.consistency_violations.clone());
                Some(HypothesesOut {
                    all_kperp1_positive: rep.all_kperp1_positive,
                    all_kperp3_below_quarter_s: rep.all_kperp3_below_quarter_s,
                    all_scalar_positive: rep.all_scalar_positive,
                    all_r_sums_positive: rep.all_r_sums_positive,
                    dichotomy: match rep.dichotomy {
                        Dichotomy::Plus => "plus",
                        Dichotomy::Minus => "minus",
                        Dichotomy::Both => "both",
                        Dichotomy::Neither => "neither",
                    }
                    .to_string(),
                    satisfied: rep.all_satisfied(),
                })
            }
            Err(e) => {
                consistency_violations.push(e.to_string());
                None
            }
        }
    } else {
        None
    };

    // model facts are verified on every run of a built-in geometry
    let facts = verify_facts(&cfg.model, &points, cfg.seed)
        .map(|rep| {
            rep.outcomes
                .into_iter()
                .map(|o| FactOut {
                    name: o.name.to_string(),
                    worst: o.worst,
                    tol: o.tol,
                    passed: o.passed,
                    checked: o.checked,
                })
                .collect::<Vec<_>>()
        })
        .unwrap_or_default();

    let perturbation = if cfg.checks.contains(&Check::Perturb) {
        openness_scan(&reference_bump(), 500, cfg.seed)
            .ok()
            .map(|scan| PerturbOut {
                t0: scan.t0,
                baseline_min: scan.baseline_min,
                threshold: scan.threshold,
                min_at_half_t0: scan.min_at_half_t0,
                pairs: scan.pairs,
                seed: scan.seed,
            })
    } else {
        None
    };

    // spectra invariant defect over ok points
    let max_spectra_defect = if cfg.checks.contains(&Check::Spectra) {
        Some(
            ok_pairs
                .iter()
                .map(|(sd, _)| sd.invariant_defect())
                .fold(0.0, f64::max),
        )
    } else {
        None
    };

    let gaps: Vec<f64> = records.iter().filter_map(|r| r.oracle_gap).collect();
    let oracle_max_gap = gaps.iter().cloned().fold(None, |acc: Option<f64>, g| {
        Some(acc.map_or(g, |a| a.max(g)))
    });
    let oracle_mean_gap = if gaps.is_empty() {
        None
    } else {
        Some(gaps.iter().sum::<f64>() / gaps.len() as f64)
    };
    let max_weitz = records
        .iter()
        .filter_map(|r| r.weitzenboeck.as_ref().map(|w| w.residual))
        .fold(None, |acc: Option<f64>, g| {
            Some(acc.map_or(g, |a| a.max(g)))
        });

    // per-check pass verdicts; errored points fail every selected check
    let mut checks_passed = BTreeMap::new();
    for check in &cfg.checks {
        let passed = all_ok
            && match check {
                Check::Spectra => max_spectra_defect.map_or(false, |d| d <= 1e-9),
                Check::Kperp => oracle_max_gap.map_or(false, |g| g <= cfg.agree_tol),
                Check::Hypotheses => hypotheses.as_ref().map_or(false, |h| h.satisfied),
                Check::Ak => records.iter().all(|r| {
                    r.ak.as_ref().map_or(false, |a| {
                        a.selfdual
                            && a.j_square_defect <= 1e-9
                            && (a.normalized_length - SQRT_2).abs() <= 1e-9
                    })
                }),
                Check::Weitzenboeck => max_weitz.map_or(false, |w| w <= cfg.weitz_tol),
                Check::Perturb => perturbation
                    .as_ref()
                    .map_or(false, |s| s.t0 > 0.0 && s.min_at_half_t0 >= s.threshold),
            };
        checks_passed.insert(check_name(*check).to_string(), passed);
    }

    let exit_code = if !consistency_violations.is_empty() {
        3
    } else if checks_passed.values().any(|ok| !ok) {
        2
    } else {
        0
    };

    Report {
        schema: 1,
        source: cfg.source_kind.clone(),
        model: cfg.model.name.clone(),
        model_params: cfg.model_params.clone(),
        sampling: cfg.sampling.clone(),
        seed: cfg.seed,
        margin_scale: cfg.margin_scale,
        agree_tol: cfg.agree_tol,
        checks: cfg.checks.clone(),
        points: records,
        aggregate: Aggregate {
            points_total,
            points_ok,
            hypotheses,
            oracle_max_gap,
            oracle_mean_gap,
            max_spectra_defect,
            max_weitzenboeck_residual: max_weitz,
            perturbation,
            facts,
            consistency_violations,
            checks_passed,
        },
        exit_code,
    }
}

/// Canonical JSON: object keys sorted (serde_json's default map is ordered),
/// two-space indentation, one trailing newline.
pub fn to_canonical_json(report: &Report) -> String {
    let value = serde_json::to_value(report).expect("report serializes");
    let mut s = serde_json::to_string_pretty(&value).expect("value serializes");
    s.push('\n');
    s
}

/// Flat per-point CSV projection (aggregate verdicts do not fit rows).
pub fn to_csv(report: &Report) -> String {
    let mut out = String::new();
    out.push_str(
        "x1,x2,x3,x4,status,error,s,lambda1_plus,lambda2_plus,lambda3_plus,\
         lambda1_minus,lambda2_minus,lambda3_minus,kperp1_closed,kperp3_closed,\
         kperp1_search,kperp3_search,oracle_gap,kperp1_positive,\
         kperp3_below_quarter_s,scalar_positive,r_sums_positive\n",
    );
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x}"));
    let optb = |v: Option<bool>| v.map_or(String::new(), |x| format!("{x}"));
    for r in &report.points {
        let l = |a: Option<[f64; 3]>, i: usize| opt(a.map(|v| v[i]));
        let verdict = r.verdicts.as_ref();
        let row = [
            format!("{}", r.point[0]),
            format!("{}", r.point[1]),
            format!("{}", r.point[2]),
            format!("{}", r.point[3]),
            r.status.clone(),
            format!(
                "\"{}\"",
                r.error.clone().unwrap_or_default().replace('"', "'")
            ),
            opt(r.s),
            l(r.lambda_plus, 0),
            l(r.lambda_plus, 1),
            l(r.lambda_plus, 2),
            l(r.lambda_minus, 0),
            l(r.lambda_minus, 1),
            l(r.lambda_minus, 2),
            opt(r.kperp1_closed),
            opt(r.kperp3_closed),
            opt(r.kperp1_search),
            opt(r.kperp3_search),
            opt(r.oracle_gap),
            optb(verdict.map(|v| v.kperp1_positive)),
            optb(verdict.map(|v| v.kperp3_below_quarter_s)),
            optb(verdict.map(|v| v.scalar_positive)),
            optb(verdict.map(|v| v.r_sums_positive)),
        ];
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}
