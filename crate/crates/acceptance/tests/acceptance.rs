//! One PASS/FAIL line per acceptance criterion.
//!
//! The process exits successfully even when a criterion fails so that the
//! rest of the workspace's tests still run; set `ACCEPTANCE_STRICT=1` to turn
//! any failure into a non-zero exit. `ACCEPTANCE_FULL_TRAINING=1` trains the
//! network for the full 150,000 steps instead of 20,000.

use std::process::ExitCode;
use std::time::Instant;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use pragsynth::eval::{self, CurvePoint, EvalConfig};
use pragsynth::neural::{self, ListenerNet, Predictor, TrainConfig};
use pragsynth::search::{self, SearchConfig, SearchResult};
use pragsynth::speaker::{self, SpeakerKind};
use pragsynth::{factored, joint, reduced};
use pragsynth::{FactoredDistribution, Listener, ListenerKind, Program, ProgramSpace, UttId};
use pragsynth_service::{router, AppState, ServiceConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use tower::ServiceExt;

const MARGINAL_TOL: f64 = 1e-9;
const MARGINAL_TARGETS: usize = 50;
const MARGINAL_PREFIXES: [usize; 4] = [1, 3, 7, 15];

const KL_JOINTS: usize = 100;
const KL_PERTURBATIONS: usize = 200;
const KL_SLACK: f64 = 1e-12;

const RSA_TOL: f64 = 1e-9;

const SEARCH_BUDGET: usize = search::DEFAULT_BUDGET;

const CURVE_TRIALS: usize = 200;
const CURVE_SEED: u64 = 2024;
const CURVE_MIN_ACCURACY: f64 = 0.90;
/// S_M0 counts as substantially lower than S_M1 when it never exceeds it and
/// trails by at least this much wherever S_M1 has reached one half.
const CURVE_MIN_GAP: f64 = 0.20;
const CURVE_PAIR_TOL: f64 = 0.05;

const GRAD_RTOL: f64 = 1e-4;
const GRAD_EPS: f64 = 1e-5;
/// Gradients smaller than this are compared on an absolute scale, below it
/// central differences are mostly round-off.
const GRAD_FLOOR: f64 = 1e-6;
const HELD_OUT_SPECS: usize = 500;
const PLUGIN_TOL: f64 = 1e-6;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome {
            pass,
            detail: detail.into(),
        }
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn marginal_equivalence(space: &ProgramSpace) -> Outcome {
    let mut r = rng(1);
    let mut worst: f64 = 0.0;
    let mut comparisons = 0;
    for _ in 0..MARGINAL_TARGETS {
        let h = r.gen_range(0..space.len());
        let specs = [
            speaker::speak_literal_with(space, h, 15, &mut r),
            speaker::speak_pragmatic(space, h, 15),
        ];
        for spec in &specs {
            for &n in &MARGINAL_PREFIXES {
                let prefix = &spec[..n.min(spec.len())];
                let exact = joint::literal(space, prefix).expect("true spec").marginals(space);
                let fact = factored::literal(space, prefix).expect("true spec");
                worst = worst.max(exact.max_abs_diff(&fact));
                comparisons += 1;
            }
        }
    }
    Outcome::new(
        worst <= MARGINAL_TOL,
        format!("{comparisons} comparisons, max |diff| = {worst:.2e} (tol {MARGINAL_TOL:.0e})"),
    )
}

fn normalize(v: &mut [f64]) {
    let z: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= z);
}

fn kl_property() -> Outcome {
    let mut r = rng(2);
    let mut violations = 0;
    let mut min_margin = f64::INFINITY;
    for _ in 0..KL_JOINTS {
        let (a, b) = (r.gen_range(1..=7), r.gen_range(1..=7));
        let mut flat: Vec<f64> = (0..a * b)
            .map(|_| if r.gen_bool(0.15) { 0.0 } else { r.gen::<f64>().powi(3) })
            .collect();
        if flat.iter().all(|&x| x == 0.0) {
            flat[0] = 1.0;
        }
        normalize(&mut flat);
        let table: Vec<Vec<f64>> = flat.chunks(b).map(|c| c.to_vec()).collect();
        let first: Vec<f64> = table.iter().map(|row| row.iter().sum()).collect();
        let second: Vec<f64> = (0..b).map(|j| table.iter().map(|row| row[j]).sum()).collect();
        let best = factored::forward_kl(&table, &first, &second);
        for _ in 0..KL_PERTURBATIONS {
            let scale = 10f64.powf(r.gen_range(-4.0..0.5));
            let mut perturb = |m: &[f64]| {
                let mut p: Vec<f64> = m.iter().map(|&x| (x + scale * r.gen::<f64>()).max(0.0)).collect();
                normalize(&mut p);
                p
            };
            let (p, q) = (perturb(&first), perturb(&second));
            let kl = factored::forward_kl(&table, &p, &q);
            min_margin = min_margin.min(kl - best);
            if kl < best - KL_SLACK {
                violations += 1;
            }
        }
    }
    Outcome::new(
        violations == 0,
        format!(
            "{} perturbations, {violations} below the marginal factorization, min margin {min_margin:.2e} (slack {KL_SLACK:.0e})",
            KL_JOINTS * KL_PERTURBATIONS
        ),
    )
}

struct RsaTable {
    spec: &'static [UttId],
    joint: [f64; 18],
    factored: [[f64; 2]; 5],
}

const NINTH: f64 = 1.0 / 9.0;

// Exact values from oracles/reduced_rsa.py.
const RSA_TABLES: [RsaTable; 5] = [
    RsaTable {
        spec: &[0],
        joint: [
            4.0 * NINTH,
            0.0,
            2.0 * NINTH,
            0.0,
            0.0,
            0.0,
            2.0 * NINTH,
            0.0,
            NINTH,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
        ],
        factored: [[1.0, 0.0], [0.75, 0.25], [1.0, 0.0], [0.75, 0.25], [1.0, 0.0]],
    },
    RsaTable {
        spec: &[0, 2],
        joint: [
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            8.0 * NINTH,
            0.0,
            NINTH,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
        ],
        factored: [[1.0, 0.0], [0.0, 1.0], [1.0, 0.0], [0.9375, 0.0625], [1.0, 0.0]],
    },
    RsaTable {
        spec: &[7, 5],
        joint: [
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            NINTH,
            0.0,
            8.0 * NINTH,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
        ],
        factored: [[1.0, 0.0], [0.0, 1.0], [0.0625, 0.9375], [0.0, 1.0], [0.0, 1.0]],
    },
    RsaTable {
        spec: &[4, 0],
        joint: [
            0.0,
            0.0,
            8.0 * NINTH,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            NINTH,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
        ],
        factored: [[1.0, 0.0], [0.9375, 0.0625], [1.0, 0.0], [0.0, 1.0], [1.0, 0.0]],
    },
    RsaTable {
        spec: &[1, 7, 5],
        joint: [
            0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
        ],
        factored: [[1.0, 0.0], [0.0, 1.0], [1.0, 0.0], [0.0, 1.0], [0.0, 1.0]],
    },
];

fn reduced_rsa() -> Outcome {
    let space = reduced::box_2x2();
    let mut worst: f64 = 0.0;
    for t in &RSA_TABLES {
        let j = joint::pragmatic(&space, t.spec).expect("true spec");
        for (a, b) in j.probs().iter().zip(&t.joint) {
            worst = worst.max((a - b).abs());
        }
        let f = factored::pragmatic(&space, t.spec).expect("true spec");
        for (fa, fb) in f.factors().iter().zip(&t.factored) {
            for (a, b) in fa.iter().zip(fb) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    Outcome::new(
        worst <= RSA_TOL,
        format!(
            "{} specs, joint and factored, max |diff| = {worst:.2e} (tol {RSA_TOL:.0e})",
            RSA_TABLES.len()
        ),
    )
}

fn brute_sort(space: &ProgramSpace, q: &FactoredDistribution) -> Vec<usize> {
    let mut all: Vec<usize> = (0..space.len())
        .filter(|&h| q.program_probability(space.choices(h)) > 0.0)
        .collect();
    all.sort_by(|&a, &b| {
        q.log_probability(space.choices(b))
            .total_cmp(&q.log_probability(space.choices(a)))
            .then_with(|| space.choices(a).cmp(space.choices(b)))
    });
    all
}

fn search_checks(space: &ProgramSpace) -> Outcome {
    let mut failures = Vec::new();
    let cfg = SearchConfig::new(SEARCH_BUDGET);
    let mut r = rng(3);

    let mut found = 0;
    for _ in 0..100 {
        let h = r.gen_range(0..space.len());
        let n = r.gen_range(1..=15);
        let spec = speaker::speak_literal_with(space, h, n, &mut r);
        for q in [factored::literal(space, &spec), factored::pragmatic(space, &spec)]
            .into_iter()
            .flatten()
        {
            match search::best_first_search(space, &spec, &q, cfg) {
                SearchResult::Found { program, rank } => {
                    found += 1;
                    if !space.is_consistent(program, &spec) || rank > SEARCH_BUDGET {
                        failures.push(format!("unsound result for target {h}"));
                    }
                }
                SearchResult::Exhausted { explored } if explored > SEARCH_BUDGET => {
                    failures.push(format!("budget exceeded: {explored}"));
                }
                SearchResult::Exhausted { .. } => {}
            }
        }
    }

    let small = reduced::box_2x2();
    let mut dists = vec![FactoredDistribution::uniform(small.arities())];
    for _ in 0..30 {
        let factors = (0..5)
            .map(|_| {
                let a = if r.gen_bool(0.3) {
                    0.5
                } else {
                    (r.gen_range(0..5) as f64) / 4.0
                };
                vec![a, 1.0 - a]
            })
            .collect();
        dists.push(FactoredDistribution::normalized(factors).unwrap());
    }
    for q in &dists {
        if search::ranked_stream(&small, q, usize::MAX) != brute_sort(&small, q) {
            failures.push(format!("stream differs from brute-force sort for {:?}", q.factors()));
        }
    }

    for _ in 0..50 {
        let h = r.gen_range(0..space.len());
        let q = FactoredDistribution::point_mass(space.arities(), space.choices(h));
        let spec = &space.truths(h)[..1];
        if search::best_first_search(space, spec, &q, cfg) != (SearchResult::Found { program: h, rank: 1 }) {
            failures.push(format!("point mass at {h} not found at rank 1"));
        }
    }

    // a spec whose first consistent program sits past the budget
    let uniform = FactoredDistribution::uniform(space.arities());
    let stream = search::ranked_stream(space, &uniform, 5000);
    let late = (0..space.len()).find_map(|h| {
        let spec = space.truths(h).to_vec();
        let pos = stream.iter().position(|&g| space.is_consistent(g, &spec))?;
        (pos > SEARCH_BUDGET).then_some((spec, pos + 1))
    });
    match late {
        Some((spec, pos)) => {
            if search::best_first_search(space, &spec, &uniform, cfg)
                != (SearchResult::Exhausted {
                    explored: SEARCH_BUDGET,
                })
            {
                failures.push("budget not honored".into());
            }
            if search::best_first_search(space, &spec, &uniform, SearchConfig::new(pos))
                .found()
                .is_none()
            {
                failures.push("larger budget should succeed".into());
            }
        }
        None => failures.push("no late-ranked spec found".into()),
    }

    Outcome::new(
        failures.is_empty(),
        if failures.is_empty() {
            format!("{found} found results consistent, {} reduced sorts exact, 50 point masses at rank 1, budget {SEARCH_BUDGET} honored", dists.len())
        } else {
            failures.join("; ")
        },
    )
}

fn series<'a>(points: &'a [CurvePoint], listener: &str, speaker: &str) -> Vec<&'a CurvePoint> {
    points
        .iter()
        .filter(|p| p.listener == listener && p.speaker == speaker)
        .collect()
}

fn accuracy_curves(space: &ProgramSpace, net: Option<&ListenerNet>) -> Outcome {
    let sets = vec![
        (
            "S_M0".to_string(),
            eval::generate_trials(space, SpeakerKind::Literal, CURVE_TRIALS, 15, CURVE_SEED),
        ),
        (
            "S_M1".to_string(),
            eval::generate_trials(space, SpeakerKind::Pragmatic, CURVE_TRIALS, 15, CURVE_SEED),
        ),
    ];
    let kinds: Vec<ListenerKind> = ListenerKind::ALL
        .into_iter()
        .filter(|k| !k.is_neural() || net.is_some())
        .collect();
    let listeners: Vec<Listener> = kinds.iter().map(|&k| Listener::new(k, space, net).unwrap()).collect();
    let points = eval::run_matrix(&listeners, &sets, &EvalConfig::default());

    for (speaker, _) in &sets {
        for k in &kinds {
            let acc: Vec<String> = series(&points, k.name(), speaker)
                .iter()
                .map(|p| format!("{:.3}", p.accuracy))
                .collect();
            println!("    {speaker} -> {k}: {}", acc.join(" "));
        }
    }

    let mut a_notes = Vec::new();
    for l in ["J0", "F0"] {
        let m1 = series(&points, l, "S_M1");
        let m0 = series(&points, l, "S_M0");
        let last = m1.last().unwrap().accuracy;
        if last < CURVE_MIN_ACCURACY {
            a_notes.push(format!("S_M1->{l} {last:.3} at n=15 < {CURVE_MIN_ACCURACY}"));
        }
        for (p1, p0) in m1.iter().zip(&m0) {
            let gap = p1.accuracy - p0.accuracy;
            if gap < 0.0 || (p1.accuracy >= 0.5 && gap < CURVE_MIN_GAP) {
                a_notes.push(format!(
                    "S_M0->{l} not substantially lower at n={} ({:.3} vs {:.3})",
                    p0.n, p0.accuracy, p1.accuracy
                ));
                break;
            }
        }
    }
    let f1 = series(&points, "F1", "S_M1");
    let j1 = series(&points, "J1", "S_M1");
    let worst_pair = f1
        .iter()
        .zip(&j1)
        .map(|(f, j)| ((f.accuracy - j.accuracy).abs(), f.n))
        .fold((0.0, 0), |a, b| if b.0 > a.0 { b } else { a });
    let b_ok = worst_pair.0 <= CURVE_PAIR_TOL;
    let c_ok = points
        .chunks(15)
        .all(|c| c.windows(2).all(|w| w[0].accuracy <= w[1].accuracy));
    let a_ok = a_notes.is_empty();
    let detail = format!(
        "(a) {}{}; (b) {} max |F1-J1| = {:.3} at n={} (tol {CURVE_PAIR_TOL}); (c) {} monotone curves",
        if a_ok { "PASS" } else { "FAIL: " },
        a_notes.join(", "),
        if b_ok { "PASS" } else { "FAIL" },
        worst_pair.0,
        worst_pair.1,
        if c_ok { "PASS" } else { "FAIL" },
    );
    Outcome::new(a_ok && b_ok && c_ok, detail)
}

/// Literal factors computed by enumeration, standing in for a network.
struct ExactPredictor<'a>(&'a ProgramSpace);

impl Predictor for ExactPredictor<'_> {
    fn predict_slots(&self, specs: &[Vec<UttId>]) -> Vec<Vec<f64>> {
        specs
            .iter()
            .map(|s| match factored::literal(self.0, s) {
                Ok(q) => q.factors().concat(),
                Err(_) => vec![0.0; self.0.num_slots()],
            })
            .collect()
    }
}

fn gradient_check(space: &ProgramSpace) -> (bool, String) {
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for (seed, hidden) in [(0u64, [5, 4]), (1, [8, 3]), (2, [3, 6])] {
        let mut net = ListenerNet::new(TrainConfig {
            hidden,
            seed,
            ..Default::default()
        });
        let mut r = rng(100 + seed);
        // zero biases can park a ReLU exactly on its kink, where the two
        // one-sided derivatives disagree; jitter every parameter off it
        for i in 0..net.num_params() {
            *net.param_mut(i) += r.gen_range(-0.3..0.3);
        }
        let examples = neural::held_out_examples(
            space,
            &TrainConfig {
                seed,
                ..Default::default()
            },
            4,
            r.gen(),
        );
        let inputs: Vec<Vec<usize>> = examples.iter().map(|e| neural::encode_indices(&e.spec)).collect();
        let targets: Vec<Vec<f64>> = examples.iter().map(|e| neural::target_matrix(&e.target)).collect();
        let analytic = net.loss_and_gradients(&inputs, &targets).1.flatten();
        for i in 0..net.num_params() {
            let orig = *net.param_mut(i);
            *net.param_mut(i) = orig + GRAD_EPS;
            let up = net.loss_and_gradients(&inputs, &targets).0;
            *net.param_mut(i) = orig - GRAD_EPS;
            let down = net.loss_and_gradients(&inputs, &targets).0;
            *net.param_mut(i) = orig;
            let numeric = (up - down) / (2.0 * GRAD_EPS);
            let scale = analytic[i].abs().max(numeric.abs()).max(GRAD_FLOOR);
            worst = worst.max((analytic[i] - numeric).abs() / scale);
            checked += 1;
        }
    }
    (
        worst <= GRAD_RTOL,
        format!("gradcheck {checked} params max rel err {worst:.1e}"),
    )
}

fn neural_suite(space: &ProgramSpace) -> (Outcome, ListenerNet) {
    let (grad_ok, grad_note) = gradient_check(space);

    let full = std::env::var("ACCEPTANCE_FULL_TRAINING").is_ok_and(|v| v == "1");
    let cfg = if full {
        TrainConfig::full_scale()
    } else {
        TrainConfig::default()
    };
    let start = Instant::now();
    let net = neural::train(space, &cfg).expect("valid config");
    let train_secs = start.elapsed().as_secs_f64();
    let examples = neural::held_out_examples(space, &cfg, HELD_OUT_SPECS, 99);
    let model_ce = neural::factor_cross_entropy(&examples, |s| net.predict(s));
    let uniform = FactoredDistribution::uniform(space.arities());
    let uniform_ce = neural::factor_cross_entropy(&examples, |_| uniform.clone());
    let mut beaten = 0;
    let mut train_ok = true;
    for (i, (&m, &u)) in model_ce.iter().zip(&uniform_ce).enumerate() {
        let ok = if space.arities()[i] == 1 {
            m == 0.0 && u == 0.0
        } else {
            m < u
        };
        train_ok &= ok;
        beaten += usize::from(ok && space.arities()[i] > 1);
        println!("    {:<9} model CE {m:.4}  uniform CE {u:.4}", space.factor_names()[i]);
    }

    let mut r = rng(4);
    let mut worst: f64 = 0.0;
    let oracle = ExactPredictor(space);
    for k in 0..10 {
        let h = r.gen_range(0..space.len());
        let spec = if k % 2 == 0 {
            speaker::speak_literal_with(space, h, 15, &mut r)
        } else {
            speaker::speak_pragmatic(space, h, 15)
        };
        let plugged = neural::neural_pragmatic_by_prefix(&oracle, space, &spec);
        let exact = factored::pragmatic_by_prefix(space, &spec);
        for (p, e) in plugged.into_iter().zip(exact) {
            match (p, e) {
                (Ok(p), Ok(e)) => worst = worst.max(p.max_abs_diff(&e)),
                (Err(_), Err(_)) => {}
                _ => worst = f64::INFINITY,
            }
        }
    }
    let plug_ok = worst <= PLUGIN_TOL;

    let detail = format!(
        "{grad_note} ({}); {} steps in {train_secs:.0}s, beats uniform on {beaten}/9 multi-rule factors, single-rule factors exact ({}); plug-in oracle max |diff| {worst:.1e} (tol {PLUGIN_TOL:.0e}, {})",
        if grad_ok { "ok" } else { "FAIL" },
        cfg.steps,
        if train_ok { "ok" } else { "FAIL" },
        if plug_ok { "ok" } else { "FAIL" },
    );
    (Outcome::new(grad_ok && train_ok && plug_ok, detail), net)
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(b) => {
            req = req.header("content-type", "application/json");
            Body::from(b.to_string())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

async fn service_contract() -> Outcome {
    let app = router(AppState::new(ServiceConfig::default()).unwrap());
    let mut failures: Vec<String> = Vec::new();
    let mut expect = |what: &str, ok: bool| {
        if !ok {
            failures.push(what.to_string());
        }
    };

    let (status, created) = call(&app, "POST", "/games", Some(json!({"listener": "J0", "seed": 7}))).await;
    expect("create -> 201", status == StatusCode::CREATED);
    expect("create hides target", created.get("target").is_none());
    expect("create carries v=1", created["v"] == 1);
    let id = created["id"].as_str().unwrap_or_default().to_string();

    let (status, _) = call(&app, "GET", &format!("/games/{id}/export"), None).await;
    expect("export of active game -> 409", status == StatusCode::CONFLICT);

    let mut hits = Vec::new();
    let mut empty_seen = false;
    for y in 0..7u8 {
        for x in 0..7u8 {
            let (status, r) = call(
                &app,
                "POST",
                &format!("/games/{id}/reveals"),
                Some(json!({"x": x, "y": y})),
            )
            .await;
            match status {
                StatusCode::OK => {
                    expect("reveal hides target", r.get("target").is_none());
                    hits.push((x, y));
                }
                StatusCode::UNPROCESSABLE_ENTITY => {
                    expect("empty cell error code", r["error"]["code"] == "empty_cell");
                    empty_seen = true;
                }
                StatusCode::CONFLICT => {}
                other => expect(&format!("unexpected reveal status {other}"), false),
            }
            if hits.len() == 2 {
                break;
            }
        }
        if hits.len() == 2 {
            break;
        }
    }
    expect("an empty cell was rejected", empty_seen || hits.len() == 2);
    let (_, s) = call(&app, "GET", &format!("/games/{id}"), None).await;
    let active = s["status"] == "active";
    if active {
        expect("summary hides target", s.get("target").is_none());
        let (x, y) = hits[0];
        let (status, r) = call(
            &app,
            "POST",
            &format!("/games/{id}/reveals"),
            Some(json!({"x": x, "y": y})),
        )
        .await;
        expect(
            "duplicate -> 422 duplicate_cell",
            status == StatusCode::UNPROCESSABLE_ENTITY && r["error"]["code"] == "duplicate_cell",
        );
        let (status, g) = call(&app, "POST", &format!("/games/{id}/giveup"), None).await;
        expect(
            "giveup discloses target",
            status == StatusCode::OK && g.get("target").is_some(),
        );
    }
    let (status, _) = call(
        &app,
        "POST",
        &format!("/games/{id}/reveals"),
        Some(json!({"x": 3, "y": 3})),
    )
    .await;
    expect("reveal on finished game -> 409", status == StatusCode::CONFLICT);

    for (method, uri, body) in [
        ("GET", "/games/missing".to_string(), None),
        (
            "POST",
            "/games/missing/reveals".to_string(),
            Some(json!({"x": 0, "y": 0})),
        ),
        ("POST", "/games/missing/giveup".to_string(), None),
        ("GET", "/games/missing/export".to_string(), None),
    ] {
        let (status, _) = call(&app, method, &uri, body).await;
        expect(&format!("{method} {uri} -> 404"), status == StatusCode::NOT_FOUND);
    }
    let (status, _) = call(&app, "POST", "/games", Some(json!({"listener": "N0"}))).await;
    expect("N0 without model -> 409", status == StatusCode::CONFLICT);

    let (status, export) = call(&app, "GET", &format!("/games/{id}/export"), None).await;
    expect("export -> 200", status == StatusCode::OK);
    match eval::read_trials(format!("{export}\n").as_bytes()) {
        Ok(trials) => {
            let cells: Vec<(u8, u8)> = trials[0].utterances.iter().map(|u| (u.x, u.y)).collect();
            expect("export keeps reveal order", cells == hits);
            expect("export source", trials[0].source == eval::TrialSource::HumanLiteral);
            let target: Program = serde_json::from_value(export["target"].clone()).unwrap();
            expect("export target parses", trials[0].target == target);
        }
        Err(e) => expect(&format!("export ingests: {e}"), false),
    }

    Outcome::new(
        failures.is_empty(),
        if failures.is_empty() {
            "secrecy, 404/409/422 paths and export/ingest round trip".to_string()
        } else {
            failures.join("; ")
        },
    )
}

fn main() -> ExitCode {
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let space = ProgramSpace::dsl();
    let mut results: Vec<(&str, Outcome, f64)> = Vec::new();
    let mut run = |name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        println!(
            "{} {name}: {} [{secs:.1}s]",
            if outcome.pass { "PASS" } else { "FAIL" },
            outcome.detail
        );
        results.push((name, outcome, secs));
    };

    run("marginal-equivalence", &mut || marginal_equivalence(space));
    run("kl-property", &mut kl_property);
    run("reduced-rsa-oracle", &mut reduced_rsa);
    run("search-soundness-order-budget", &mut || search_checks(space));
    let mut net = None;
    run("neural-suite", &mut || {
        let (outcome, trained) = neural_suite(space);
        net = Some(trained);
        outcome
    });
    let trained = net.as_ref();
    run("accuracy-curves", &mut || accuracy_curves(space, trained));
    run("service-contract", &mut || {
        tokio::runtime::Runtime::new().unwrap().block_on(service_contract())
    });

    let failed: Vec<&str> = results.iter().filter(|r| !r.1.pass).map(|r| r.0).collect();
    println!(
        "acceptance: {}/{} criteria passed{}",
        results.len() - failed.len(),
        results.len(),
        if failed.is_empty() {
            String::new()
        } else {
            format!("; failed: {}", failed.join(", "))
        }
    );
    if strict && !failed.is_empty() {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
