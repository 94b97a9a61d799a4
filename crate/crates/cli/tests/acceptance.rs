//! Release acceptance suite: end-to-end checks of the simulator and the
//! verification harness at committed scales and tolerances.
//!
//! All nine gates run even when an earlier one fails; each prints a single
//! PASS/FAIL line and the test asserts at the end that every gating check
//! passed. Run `cargo test --test acceptance -- --nocapture` to watch the
//! lines appear as the gates complete (total runtime is a few minutes; the
//! naive-sampler baseline in gate 9 dominates).
//!
//! Two gates are currently expected to fail, and are left failing on
//! purpose rather than loosened: at the committed scale n = 1e5 with
//! gamma = 0.3, the candidate-sample size d_n = n^0.3 is only 32, and the
//! max-of-d attachment keeps promoting vertices out of their birth class
//! long past any practical horizon. The resulting deficit in the top birth
//! class (and the matching excess in total attachment weight) is a
//! deterministic finite-size bias roughly twice gate 1's tolerance and
//! eight times gate 2's; replicate scatter is ~1e-3, so averaging cannot
//! close the gap. Gates 3-7 confirm the same engine matches every
//! closed-form limit that is reachable at these scales, and gate 6 checks
//! the attachment law exactly, so the misses are a property of the
//! committed (scale, tolerance) pairs, not of the implementation.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use growchoice::harness::{
    cross_validate_samplers, fit_growth_exponent, run_replicates, EnsembleSpec,
};
use growchoice_core::engine::{run, sample_target_naive, RunTrace, TraceSpec};
use growchoice_core::params::{MDistribution, ModelParams, SamplerMode};
use growchoice_core::stats::{chi_square_gof, mean, median, pool_low_expected};
use growchoice_core::theory::{attachment_class_pmf, predict, predict_rho_star};
use growchoice_core::DegreeClassIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Gate {
    number: usize,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn report(gate: &Gate) {
    println!(
        "[gate {}] {}  {:<32} {}",
        gate.number,
        if gate.pass { "PASS" } else { "FAIL" },
        gate.name,
        gate.detail
    );
}

fn mixed_m() -> MDistribution {
    MDistribution::finite_pmf(&[(1, 0.5), (2, 0.3), (3, 0.2)]).unwrap()
}

fn unit_m() -> MDistribution {
    MDistribution::deterministic(1).unwrap()
}

fn params(alpha: f64, gamma: f64, m_dist: MDistribution, horizon: u64) -> ModelParams {
    let mut p = ModelParams::new(alpha, gamma, 1.0, m_dist);
    p.horizon = horizon;
    p
}

/// Runs `replicates` streams in parallel and unwraps every run; the
/// acceptance configurations are all well inside the engine's limits.
fn ensemble(p: &ModelParams, replicates: usize) -> Vec<RunTrace> {
    let spec = EnsembleSpec {
        params: p.clone(),
        trace: TraceSpec::default(),
        replicates,
    };
    run_replicates(&spec, 0)
        .unwrap()
        .into_iter()
        .map(|r| r.expect("replicate completed"))
        .collect()
}

fn final_max_over_n(traces: &[RunTrace]) -> Vec<f64> {
    traces
        .iter()
        .map(|t| {
            let last = t.rows.last().unwrap();
            last.max_degree as f64 / last.n as f64
        })
        .collect()
}

/// Gates 1 and 2 share one 20-replicate ensemble: mixed edge-count law
/// m ~ {1: 0.5, 2: 0.3, 3: 0.2}, alpha = 0.5, gamma = 0.3, horizon 1e5.
fn gates_1_2(traces: &[RunTrace], elapsed: Duration) -> (Gate, Gate) {
    const TARGET_FRACTIONS: [f64; 3] = [0.5, 0.3, 0.2];
    // E m^(1/2) = 0.5 + 0.3 sqrt(2) + 0.2 sqrt(3).
    const EM_ALPHA: f64 = 1.270_674_230_225_704;
    let budget_ok = elapsed <= Duration::from_secs(120);

    let mut mean_fracs = [0.0f64; 3];
    for t in traces {
        let last = t.rows.last().unwrap();
        for (i, &c) in last.class_counts.iter().enumerate() {
            mean_fracs[i] += c as f64 / last.n as f64 / traces.len() as f64;
        }
    }
    let max_dev = mean_fracs
        .iter()
        .zip(TARGET_FRACTIONS)
        .map(|(&f, t)| (f - t).abs())
        .fold(0.0, f64::max);
    // Expected to fail: the measured deviation is ~0.039, concentrated in
    // the k = 3 class (see the module comment). The tolerance stays pinned.
    let gate1 = Gate {
        number: 1,
        name: "class_fractions_mixed_law",
        pass: max_dev <= 0.02 && budget_ok,
        detail: format!(
            "max_k |mean N_k/n - Pr(m=k)| = {max_dev:.4} (tolerance 0.02); \
             mean fractions [{:.4}, {:.4}, {:.4}] vs [0.5, 0.3, 0.2]; \
             20 runs to n = 1e5 in {:.1?} (budget 120s)",
            mean_fracs[0], mean_fracs[1], mean_fracs[2], elapsed
        ),
    };

    let ratios: Vec<f64> = traces
        .iter()
        .map(|t| {
            let last = t.rows.last().unwrap();
            last.total_weight / last.n as f64
        })
        .collect();
    let mean_ratio = mean(&ratios);
    let rel_err = (mean_ratio - EM_ALPHA).abs() / EM_ALPHA;
    // Expected to fail: measured relative error is ~0.08 at this scale, the
    // weight-side image of the same slow class-fraction convergence.
    let gate2 = Gate {
        number: 2,
        name: "weight_ratio_mixed_law",
        pass: rel_err <= 0.01 && budget_ok,
        detail: format!(
            "|mean D/n - E m^a| / E m^a = {rel_err:.4} (tolerance 0.01); \
             mean D/n = {mean_ratio:.4} vs {EM_ALPHA:.10} (same ensemble as gate 1)"
        ),
    };
    (gate1, gate2)
}

/// Subcritical growth: alpha = 0.5, gamma = 0.25, m = 1. The max degree
/// should grow like x* n^{1/2} with x* = 4; the exponent is gating, the
/// constant is informational because its convergence is far slower.
fn gate_3() -> Gate {
    let t0 = Instant::now();
    let p = params(0.5, 0.25, unit_m(), 1_000_000);
    let pred = predict(&p).unwrap();
    assert!((pred.exponent - 0.5).abs() <= 1e-12, "exponent {}", pred.exponent);
    assert!((pred.constant - 4.0).abs() <= 1e-12, "constant {}", pred.constant);
    let traces = ensemble(&p, 10);
    let refs: Vec<&RunTrace> = traces.iter().collect();
    let fit = fit_growth_exponent(&refs, [10_000, 1_000_000]).unwrap();
    let slope_ok = (fit.slope - 0.5).abs() <= 0.05;
    let med = median(
        &traces
            .iter()
            .map(|t| {
                let last = t.rows.last().unwrap();
                last.max_degree as f64 / (last.n as f64).sqrt()
            })
            .collect::<Vec<f64>>(),
    );
    let constant_note = if (med - 4.0).abs() <= 2.0 { "within" } else { "outside" };
    let elapsed = t0.elapsed();
    let budget_ok = elapsed <= Duration::from_secs(600);
    Gate {
        number: 3,
        name: "subcritical_growth_exponent",
        pass: slope_ok && budget_ok,
        detail: format!(
            "pooled log-log slope over [1e4, 1e6] = {:.4} vs 0.5 +/- 0.05; \
             median M/sqrt(n) at 1e6 = {med:.3}, {constant_note} informational +/-50% of x* = 4; \
             10 runs in {elapsed:.1?} (budget 600s)",
            fit.slope
        ),
    }
}

/// Critical line alpha + gamma = 1: M(n)/n converges to the root of
/// 1 - exp(-x^alpha / E m^alpha) = x. For alpha = 0.5, m = 1 that root is
/// 0.5105908269770001 (frozen from an independent bisection). The ensemble
/// is run by the caller because gate 8 reuses its checkpoint rows.
fn gate_4(traces: &[RunTrace]) -> Gate {
    const RHO_STAR: f64 = 0.510_590_826_977_000_1;
    let p = params(0.5, 0.5, unit_m(), 1_000_000);
    let rho = predict_rho_star(&p).unwrap();
    assert!((rho - RHO_STAR).abs() <= 1e-9, "rho* = {rho}");
    let med = median(&final_max_over_n(traces));
    Gate {
        number: 4,
        name: "critical_max_fraction",
        pass: (med - RHO_STAR).abs() <= 0.05,
        detail: format!(
            "median M/n at 1e6 = {med:.4} vs rho* = {RHO_STAR:.10} +/- 0.05 (10 runs)"
        ),
    }
}

/// Above the critical line the hub absorbs nearly every edge: with
/// alpha = 0.7, gamma = 0.5, m = 1 the max-degree fraction should reach at
/// least 90% of its limit E m = 1 by n = 1e6.
fn gate_5() -> Gate {
    let p = params(0.7, 0.5, unit_m(), 1_000_000);
    let traces = ensemble(&p, 10);
    let med = median(&final_max_over_n(&traces));
    Gate {
        number: 5,
        name: "supercritical_max_fraction",
        pass: med >= 0.9,
        detail: format!("median M/n at 1e6 = {med:.4}, require >= 0.9 (10 runs)"),
    }
}

/// Probability that the maximum of `d` weight-proportional class draws
/// lands in each class, by literally enumerating every d-tuple. Independent
/// of the prefix-power formula under test.
fn enumerate_max_class(classes: &[(usize, u64)], alpha: f64, d: u32) -> Vec<(usize, f64)> {
    let weights: Vec<f64> = classes
        .iter()
        .map(|&(k, c)| c as f64 * (k as f64).powf(alpha))
        .collect();
    let total: f64 = weights.iter().sum();
    let probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
    let mut out = vec![0.0; classes.len()];
    let n = classes.len();
    for code in 0..(n as u64).pow(d) {
        let mut rest = code;
        let mut p = 1.0;
        let mut max_ix = 0;
        for _ in 0..d {
            let ix = (rest % n as u64) as usize;
            rest /= n as u64;
            p *= probs[ix];
            max_ix = max_ix.max(ix);
        }
        out[max_ix] += p;
    }
    classes.iter().zip(out).map(|(&(k, _), p)| (k, p)).collect()
}

/// Exactness of the closed-form attachment-class law: brute-force
/// enumeration agreement to 1e-12 on small states, the hand-computable
/// degrees-{1,2} value, and chi-square consistency of 1e5 literal max-of-d
/// draws on five frozen states.
fn gate_6() -> Gate {
    let configs: &[&[(usize, u64)]] = &[
        &[(1, 1), (2, 1)],
        &[(1, 3), (2, 2), (5, 1)],
        &[(1, 10), (4, 5), (9, 2)],
        &[(2, 4), (3, 4)],
        &[(7, 1)],
        &[(1, 1), (6, 1), (13, 3)],
    ];
    let mut max_err = 0.0f64;
    for &classes in configs {
        for alpha in [0.25, 0.5, 0.9] {
            for d in 1u32..=3 {
                let index =
                    DegreeClassIndex::from_class_counts(alpha, classes.iter().copied()).unwrap();
                let formula = attachment_class_pmf(&index, d as f64);
                let brute = enumerate_max_class(classes, alpha, d);
                for (&(_, p_f), &(_, p_b)) in formula.iter().zip(brute.iter()) {
                    max_err = max_err.max((p_f - p_b).abs());
                }
            }
        }
    }
    let enum_ok = max_err <= 1e-12;

    // Degrees {1, 2}, alpha = 0.5, d = 2: the heavier class wins with
    // probability 1 - (1/(1+sqrt 2))^2 = 2 sqrt(2) - 2.
    const HAND_VALUE: f64 = 0.828_427_124_746_190_3;
    let index = DegreeClassIndex::from_class_counts(0.5, [(1, 1), (2, 1)]).unwrap();
    let p2 = attachment_class_pmf(&index, 2.0)
        .iter()
        .find(|&&(k, _)| k == 2)
        .unwrap()
        .1;
    let hand_ok = (p2 - HAND_VALUE).abs() <= 1e-12;

    const DRAWS: usize = 100_000;
    let frozen: &[(&[(usize, u64)], f64, u64)] = &[
        (&[(1, 1), (2, 1)], 0.5, 2),
        (&[(1, 3), (2, 2), (5, 1)], 0.5, 3),
        (&[(1, 10), (4, 5), (9, 2)], 0.25, 2),
        (&[(2, 4), (3, 4)], 0.75, 1),
        (&[(1, 5), (2, 3), (3, 2), (7, 1)], 0.5, 4),
    ];
    let mut min_p = f64::INFINITY;
    for (seed, &(classes, alpha, d)) in frozen.iter().enumerate() {
        let index = DegreeClassIndex::from_class_counts(alpha, classes.iter().copied()).unwrap();
        let pmf = attachment_class_pmf(&index, d as f64);
        let mut rng = ChaCha8Rng::seed_from_u64(600 + seed as u64);
        let mut observed = vec![0.0f64; pmf.len()];
        for _ in 0..DRAWS {
            let id = sample_target_naive(&index, d, &mut rng);
            let degree = index.degree_of(id).unwrap();
            let slot = pmf.iter().position(|&(k, _)| k == degree).unwrap();
            observed[slot] += 1.0;
        }
        let expected: Vec<f64> = pmf.iter().map(|&(_, p)| p * DRAWS as f64).collect();
        let (obs, exp) = pool_low_expected(&observed, &expected, 5.0);
        if obs.len() >= 2 {
            min_p = min_p.min(chi_square_gof(&obs, &exp).unwrap().p);
        }
    }
    let chi_ok = min_p > 0.001;

    Gate {
        number: 6,
        name: "class_law_exactness",
        pass: enum_ok && hand_ok && chi_ok,
        detail: format!(
            "enumeration max |err| = {max_err:.2e} (tolerance 1e-12); \
             degrees-{{1,2}} value {p2:.10} vs {HAND_VALUE:.10}; \
             chi-square min p over 5 frozen states x 1e5 draws = {min_p:.4} (require > 0.001)"
        ),
    }
}

/// Distribution-level agreement of the two samplers: two-sample KS between
/// the final M(n)/n of 50 naive and 50 fast runs to n = 1e4 at
/// alpha = 0.5, gamma = 0.3.
fn gate_7() -> Gate {
    let p = params(0.5, 0.3, unit_m(), 10_000);
    let cv = cross_validate_samplers(&p, 10_000, 50, 0).unwrap();
    Gate {
        number: 7,
        name: "sampler_ensemble_agreement",
        pass: cv.ks_p > 0.01,
        detail: format!(
            "two-sample KS naive-vs-fast final M/n (50 + 50 runs to 1e4): \
             stat = {:.4}, p = {:.4} (require > 0.01); \
             frozen-state chi-square min p = {:.4} over {} states",
            cv.ks_stat, cv.ks_p, cv.chi_square_min_p, cv.chi_square_states
        ),
    }
}

/// All files under a directory as relative-path -> bytes.
fn collect_files(root: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for entry in fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_str().unwrap().to_string();
                out.insert(rel, fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

/// Structural invariants and reproducibility:
/// (a) the degree-sum handshake holds exactly at every recorded checkpoint;
/// (b) the incrementally maintained total attachment weight stays within
///     1e-9 relative of a from-scratch recomputation after 1e6 mixed
///     index operations;
/// (c) the binary produces bit-identical artifacts across repeat
///     invocations and across --jobs 1 vs --jobs 8.
fn gate_8(mixed: &[RunTrace], critical: &[RunTrace]) -> Gate {
    let mut rows_checked = 0usize;
    let mut handshake_ok = true;
    for trace in mixed.iter().chain(critical.iter()) {
        for row in &trace.rows {
            rows_checked += 1;
            if row.degree_sum != 2 * row.edge_count {
                handshake_ok = false;
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(4242);
    let mut index = DegreeClassIndex::new(0.5);
    let mut next_id: u32 = 0;
    for _ in 0..1_000_000u32 {
        if next_id == 0 || rng.random_range(0..3u32) == 0 {
            let degree = rng.random_range(1..=4u32) as usize;
            index.add_vertex(next_id, degree).unwrap();
            next_id += 1;
        } else {
            index.increment_degree(rng.random_range(0..next_id)).unwrap();
        }
    }
    let recomputed = index.recomputed_total_weight();
    let drift = (index.total_weight() - recomputed).abs() / recomputed;
    let drift_ok = drift <= 1e-9;

    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("config.toml");
    fs::write(
        &config_path,
        "[model]\nalpha = 0.5\ngamma = 0.3\nc_d = 1.0\nseed = 11\nhorizon = 20000\n\n\
         [m_dist]\nkind = \"pmf\"\nvalues = [1, 2, 3]\nprobs = [0.5, 0.3, 0.2]\n\n\
         [run]\nreplicates = 4\n",
    )
    .unwrap();
    let invoke = |out: &Path, jobs: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_growchoice"));
        cmd.arg("simulate")
            .arg("--config")
            .arg(&config_path)
            .arg("--out")
            .arg(out)
            .arg("--quiet");
        if let Some(j) = jobs {
            cmd.arg("--jobs").arg(j);
        }
        let status = cmd.status().unwrap();
        assert!(status.success(), "simulate exited with {status}");
        collect_files(out)
    };
    let base = invoke(&dir.path().join("a"), None);
    let repeat = invoke(&dir.path().join("b"), None);
    let jobs1 = invoke(&dir.path().join("j1"), Some("1"));
    let jobs8 = invoke(&dir.path().join("j8"), Some("8"));
    let repeat_ok = base == repeat;
    let jobs_ok = jobs1 == jobs8 && base == jobs1;

    Gate {
        number: 8,
        name: "invariants_and_determinism",
        pass: handshake_ok && drift_ok && repeat_ok && jobs_ok,
        detail: format!(
            "handshake sum(deg) = 2|E| exact on {rows_checked} checkpoint rows: {handshake_ok}; \
             weight drift after 1e6 index ops = {drift:.2e} (tolerance 1e-9); \
             bit-identical artifacts: repeat {repeat_ok}, --jobs 1 vs 8 {jobs_ok}"
        ),
    }
}

/// Throughput: the order-statistics sampler must finish a 1e6-vertex run in
/// at most 10 seconds. The naive max-of-d baseline at the same scale is
/// measured and reported for documentation: it needs sum(d_n) ~ (2/3) n^{3/2}
/// candidate draws instead of one per edge, which at n = 1e6 is tens of
/// seconds against ~1s. The exact ratio (46-84x observed here) depends on
/// hardware and concurrent load, so it is reported but not gated.
fn gate_9() -> Gate {
    let mut p = params(0.5, 0.5, unit_m(), 1_000_000);
    let t0 = Instant::now();
    let fast_trace = run(&p, &TraceSpec::default(), 0).unwrap();
    let fast = t0.elapsed();
    p.sampler_mode = SamplerMode::Naive;
    let t1 = Instant::now();
    let naive_trace = run(&p, &TraceSpec::default(), 0).unwrap();
    let naive = t1.elapsed();
    assert_eq!(fast_trace.rows.last().unwrap().n, 1_000_000);
    assert_eq!(naive_trace.rows.last().unwrap().n, 1_000_000);
    let ratio = naive.as_secs_f64() / fast.as_secs_f64();
    Gate {
        number: 9,
        name: "fast_sampler_throughput",
        pass: fast <= Duration::from_secs(10),
        detail: format!(
            "fast 1e6-vertex run in {:.2}s (limit 10s); \
             naive baseline {:.1}s = {ratio:.0}x slower (measured, not gated)",
            fast.as_secs_f64(),
            naive.as_secs_f64()
        ),
    }
}

#[test]
fn release_gates() {
    let mut gates: Vec<Gate> = Vec::new();
    let mut push = |g: Gate| {
        report(&g);
        gates.push(g);
    };

    let t0 = Instant::now();
    let mixed = ensemble(&params(0.5, 0.3, mixed_m(), 100_000), 20);
    let (g1, g2) = gates_1_2(&mixed, t0.elapsed());
    push(g1);
    push(g2);
    push(gate_3());
    let critical = ensemble(&params(0.5, 0.5, unit_m(), 1_000_000), 10);
    push(gate_4(&critical));
    push(gate_5());
    push(gate_6());
    push(gate_7());
    push(gate_8(&mixed, &critical));
    push(gate_9());

    let passed = gates.iter().filter(|g| g.pass).count();
    println!("acceptance: {passed}/{} gates passed", gates.len());
    let failed: Vec<String> = gates
        .iter()
        .filter(|g| !g.pass)
        .map(|g| format!("[gate {}] {}", g.number, g.name))
        .collect();
    assert!(
        failed.is_empty(),
        "failed acceptance gates: {} (see the printed lines above; the \
         module comment documents why gates 1-2 cannot pass at the \
         committed scale)",
        failed.join(", ")
    );
}
