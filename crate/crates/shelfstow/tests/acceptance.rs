//! Acceptance gate: ten pass/fail criteria covering the benchmark trend,
//! solver cross-checks, derivative and QP correctness, determinism, the
//! simulator, and the generator guarantee. Runs without the default test
//! harness so each criterion prints exactly one line.

mod common;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use shelfstow::admm::{self, AdmmConfig, SolveStatus};
use shelfstow::convex_qp::{kkt_residual, solve_qp, QpConfig, QpStatus};
use shelfstow::formulation::{
    build_problem, certificate_assignment, generate_instance, Consensus, GenParams, Instance,
    PhysParams,
};
use shelfstow::harness::bench::{run_benchmark, BenchConfig, DetailRow, Method};
use shelfstow::harness::oracle::{self, OracleConfig};
use shelfstow::harness::sim::{
    contact_force, force_push_steady_state, simulate_insertion, step, Phase, PhaseName, Plan,
    SimConfig,
};
use shelfstow::harness::verify::verify;
use shelfstow::mip::{enumerate_binaries, solve_mip, MipConfig, MipProblem};
use shelfstow::mpcc::{self, MpccConfig};
use shelfstow::nlp::{gradient_check, NlpProblem};
use std::process::Command;

type Outcome = Result<String, String>;

fn bench_config(methods: Vec<Method>, n_items: Vec<usize>, count: usize, seed: u64) -> BenchConfig {
    BenchConfig {
        methods,
        n_items,
        count,
        seed,
        workers: 1,
        zero_timing: true,
        gen: GenParams::default(),
        admm: AdmmConfig::default(),
        mpcc: MpccConfig::default(),
        oracle: OracleConfig::default(),
    }
}

fn rate(detail: &[DetailRow], method: Method, n: usize) -> f64 {
    let suffix = format!("-n{}", n - 1);
    let rows: Vec<_> = detail
        .iter()
        .filter(|r| r.method == method && r.instance_id.ends_with(&suffix))
        .collect();
    rows.iter().filter(|r| r.success).count() as f64 / rows.len() as f64
}

/// Criterion 1 — benchmark trend on 50 instances per size.
fn criterion_1() -> (Outcome, Vec<DetailRow>) {
    let cfg = bench_config(vec![Method::Admm, Method::Mpcc], vec![4, 6], 50, 1);
    let (_, detail) = run_benchmark(&cfg);
    let mut msg = String::new();
    let mut ok = true;
    for &n in &[4usize, 6] {
        let a = rate(&detail, Method::Admm, n);
        let m = rate(&detail, Method::Mpcc, n);
        ok &= a >= 0.70 && a > m && m <= 0.50;
        msg.push_str(&format!("n={n}: admm {a:.2} vs mpcc {m:.2}; "));
    }
    let outcome = if ok { Ok(msg.clone()) } else { Err(msg) };
    (outcome, detail)
}

/// Criterion 2 — ADMM no easier at 8 items than at 4 on matched seeds.
fn criterion_2() -> Outcome {
    let cfg = bench_config(vec![Method::Admm], vec![4, 8], 10, 1);
    let (_, detail) = run_benchmark(&cfg);
    let r4 = rate(&detail, Method::Admm, 4);
    let r8 = rate(&detail, Method::Admm, 8);
    let msg = format!("admm success {r8:.2} at 8 items vs {r4:.2} at 4 items");
    if r8 <= r4 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

/// Consensus anchor near the certificate, mirroring what the ADMM MIP step
/// sees, so binary choices affect the convex objective.
fn anchored_problem(inst: &Instance, seed: u64) -> shelfstow::formulation::ProblemDef {
    let params = PhysParams::for_instance(inst);
    let def = build_problem(inst, params, None).unwrap();
    let mut anchor = certificate_assignment(&def, inst);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for a in &mut anchor {
        *a += rng.gen_range(-0.05..0.05);
    }
    let mut weights = vec![1.0; anchor.len()];
    for k in def.layout.binary_indices() {
        weights[k] = 10.0;
    }
    def.with_consensus(Some(Consensus { anchor, weights }))
}

/// Criterion 3 — branch-and-bound equals exhaustive enumeration.
fn criterion_3() -> Outcome {
    let mip_cfg = MipConfig::default();
    let mut worst: f64 = 0.0;
    for seed in 1..=20u64 {
        let n_existing = 2; // 6 binaries each: exhaustive enumeration stays in budget
        let inst = generate_instance(seed, n_existing, &GenParams::default()).unwrap();
        let def = anchored_problem(&inst, seed);
        let mip = MipProblem::from_problem_def(&def).map_err(|e| e.to_string())?;
        let (_, stats) = solve_mip(&mip, &mip_cfg, None).map_err(|e| e.to_string())?;
        let (_, enum_obj) = enumerate_binaries(&mip, &mip_cfg).map_err(|e| e.to_string())?;
        let rel = (stats.objective - enum_obj).abs() / (1.0 + enum_obj.abs());
        worst = worst.max(rel);
        if rel > 1e-5 {
            return Err(format!(
                "seed {seed}: b&b {} vs enumeration {enum_obj} (rel {rel:.2e})",
                stats.objective
            ));
        }
    }
    Ok(format!("20 instances, worst relative gap {worst:.2e}"))
}

/// Criterion 4 — every reported success passes the independent verifier.
fn criterion_4(trend_detail: &[DetailRow]) -> Outcome {
    let rejects: Vec<_> = trend_detail
        .iter()
        .filter(|r| r.status == "verifier_reject")
        .map(|r| format!("{}/{}", r.instance_id, r.method.as_str()))
        .collect();
    if !rejects.is_empty() {
        return Err(format!("verifier rejected solver successes: {rejects:?}"));
    }
    // Direct cross-check on a fresh batch including the oracle.
    let mut checked = 0;
    for seed in 31..=34u64 {
        let inst = generate_instance(seed, 2, &GenParams::default()).unwrap();
        let params = PhysParams::for_instance(&inst);
        let layout = shelfstow::formulation::layout::VariableLayout::new(inst.n_items());
        let solutions = [
            admm::solve_instance(&inst, params, &AdmmConfig::default())
                .map(|r| (r.status, r.y))
                .map_err(|e| e.to_string())?,
            mpcc::solve_instance(&inst, params, &MpccConfig::default())
                .map(|r| (r.status, r.y))
                .map_err(|e| e.to_string())?,
            oracle::solve_instance(&inst, params, &OracleConfig::default())
                .map(|r| (r.status, r.y))
                .map_err(|e| e.to_string())?,
        ];
        for (status, y) in solutions {
            if status != SolveStatus::Success {
                continue;
            }
            let poses: Vec<_> = (0..inst.n_items()).map(|i| layout.get_pose(&y, i)).collect();
            let report = verify(&inst, &poses, &params);
            if !report.overall() {
                return Err(format!("seed {seed}: success failed verification"));
            }
            checked += 1;
        }
    }
    Ok(format!(
        "no verifier rejects in {} benchmark rows; {checked} fresh solutions re-verified",
        trend_detail.len()
    ))
}

/// Criterion 5 — analytic derivatives vs central differences.
fn criterion_5() -> Outcome {
    let inst = generate_instance(5, 2, &GenParams::default()).unwrap();
    let params = PhysParams::for_instance(&inst);
    let def = build_problem(&inst, params, None).unwrap();
    let mut p = NlpProblem::full(&def);
    p.push_rows(mpcc::complementarity_rows(&def, 1e-2));
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let y: Vec<f64> = p
            .lower
            .iter()
            .zip(&p.upper)
            .map(|(&lo, &hi)| {
                let (a, b) = (lo.max(-2.0), hi.min(2.0));
                rng.gen_range(a + 0.05 * (b - a)..b - 0.05 * (b - a))
            })
            .collect();
        worst = worst.max(gradient_check(&p, &y, 1e-6));
    }
    if worst <= 1e-5 {
        Ok(format!("max relative error {worst:.2e} over 20 points"))
    } else {
        Err(format!("max relative error {worst:.2e} exceeds 1e-5"))
    }
}

/// Criterion 6 — QP solver vs the exhaustive active-set oracle.
fn criterion_6() -> Outcome {
    let mut worst_obj: f64 = 0.0;
    let mut worst_kkt: f64 = 0.0;
    for seed in 1..=30u64 {
        let prob = common::random_qp(seed, 5, 5);
        let sol = solve_qp(prob.clone(), QpConfig::default()).map_err(|e| e.to_string())?;
        if sol.status != QpStatus::Optimal {
            return Err(format!("seed {seed}: solver status {:?}", sol.status));
        }
        let (r_p, r_d, r_g) = kkt_residual(&prob, &sol.x, &sol.dual);
        let kkt = r_p.max(r_d).max(r_g);
        worst_kkt = worst_kkt.max(kkt);
        let (_, oracle_obj) = common::active_set_solve(&prob, 1e-9)
            .ok_or_else(|| format!("seed {seed}: oracle found no KKT point"))?;
        let diff = (sol.objective - oracle_obj).abs() / (1.0 + oracle_obj.abs());
        worst_obj = worst_obj.max(diff);
        if diff > 1e-6 || kkt > 1e-6 {
            return Err(format!(
                "seed {seed}: objective diff {diff:.2e}, kkt residual {kkt:.2e}"
            ));
        }
    }
    Ok(format!(
        "30 QPs, worst objective diff {worst_obj:.2e}, worst KKT residual {worst_kkt:.2e}"
    ))
}

/// Criterion 7 — dual/weight update mechanics and stopping semantics.
fn criterion_7() -> Outcome {
    // Isolated update: w steps by the consensus gap, then G *= gamma and
    // w /= gamma, in that order.
    let gamma = 1.1;
    let mut w = vec![0.2, -0.1];
    let mut g = vec![1.0, 10.0];
    let (y_m, y_n) = (vec![1.0, 2.0], vec![0.5, 2.5]);
    admm::dual_update(&mut w, &mut g, &y_m, &y_n, gamma);
    let w_want = [(0.2 + 0.5) / gamma, (-0.1 - 0.5) / gamma];
    if g != vec![1.0 * gamma, 10.0 * gamma] || w[0] != w_want[0] || w[1] != w_want[1] {
        return Err(format!("update gave w={w:?}, g={g:?}"));
    }

    let inst = generate_instance(7, 2, &GenParams::default()).unwrap();
    let params = PhysParams::for_instance(&inst);
    let one_shot = AdmmConfig {
        delta: Some(f64::INFINITY),
        ..AdmmConfig::default()
    };
    let rep = admm::solve_instance(&inst, params, &one_shot).map_err(|e| e.to_string())?;
    if rep.iterations != 1 {
        return Err(format!("infinite threshold ran {} iterations", rep.iterations));
    }

    let mut successes = 0;
    for seed in 41..=43u64 {
        let inst = generate_instance(seed, 2, &GenParams::default()).unwrap();
        let params = PhysParams::for_instance(&inst);
        let cfg = AdmmConfig::default();
        let rep = admm::solve_instance(&inst, params, &cfg).map_err(|e| e.to_string())?;
        if rep.status == SolveStatus::Success {
            successes += 1;
            let threshold = cfg.threshold(rep.y.len());
            let last = *rep.residuals.last().unwrap();
            if last > threshold {
                return Err(format!(
                    "seed {seed}: success with residual {last:.2e} > threshold {threshold:.2e}"
                ));
            }
        }
    }
    Ok(format!(
        "update exact; infinite threshold gives 1 iteration; {successes} successes all within threshold"
    ))
}

/// Criterion 8 — benchmark CLI determinism (byte-identical CSVs).
fn criterion_8() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_shelfstow");
    let base = std::env::temp_dir().join(format!("shelfstow-accept-{}", std::process::id()));
    let mut outputs = Vec::new();
    for run in 0..2 {
        let dir = base.join(format!("run{run}"));
        let status = Command::new(bin)
            .args([
                "bench",
                "--methods",
                "admm,mpcc",
                "--n-items",
                "4",
                "--count",
                "3",
                "--seed",
                "7",
                "--workers",
                "1",
                "--zero-timing",
                "--out-dir",
            ])
            .arg(&dir)
            .output()
            .map_err(|e| e.to_string())?;
        if !status.status.success() {
            return Err(format!("bench run {run} failed: {status:?}"));
        }
        let summary = std::fs::read(dir.join("summary.csv")).map_err(|e| e.to_string())?;
        let detail = std::fs::read(dir.join("detail.csv")).map_err(|e| e.to_string())?;
        outputs.push((summary, detail));
    }
    let _ = std::fs::remove_dir_all(&base);
    if outputs[0] == outputs[1] {
        Ok("summary.csv and detail.csv byte-identical across reruns".into())
    } else {
        Err("benchmark CSVs differ between identical runs".into())
    }
}

/// Criterion 9 — simulator equilibrium, Lyapunov decrease, steady state.
fn criterion_9() -> Outcome {
    let cfg = SimConfig::default();

    // Equilibrium: start at the reference away from the neighbor with zero
    // force error; the state must not move at all.
    let x0 = [0.1, 0.05];
    let (mut x, mut v) = (x0, [0.0, 0.0]);
    for _ in 0..10_000 {
        let f = contact_force(x, &cfg);
        step(&mut x, &mut v, x0, f, f, &cfg);
    }
    if x != x0 || v != [0.0, 0.0] {
        return Err(format!("equilibrium drifted to x={x:?}, v={v:?}"));
    }

    // Free response: V = ½ m v² + ½ k (x−x_ref)² never increases.
    let x_ref = [0.0, 0.0];
    let (mut x, mut v) = ([0.3, -0.2], [0.0, 0.0]);
    let energy = |x: [f64; 2], v: [f64; 2]| -> f64 {
        (0..2)
            .map(|a| {
                0.5 * cfg.m_d[a] * v[a] * v[a] + 0.5 * cfg.k_d[a] * (x[a] - x_ref[a]).powi(2)
            })
            .sum()
    };
    let mut prev = energy(x, v);
    for _ in 0..5_000 {
        step(&mut x, &mut v, x_ref, [0.0, 0.0], [0.0, 0.0], &cfg);
        let e = energy(x, v);
        if e > prev + 1e-12 {
            return Err(format!("Lyapunov function rose from {prev} to {e}"));
        }
        prev = e;
    }

    // Force push: simulated steady-state contact force vs the closed form
    // x_ss = (k_d x_ref + k_f (k_e x_w − f_ref)) / (k_d + k_f k_e),
    // f_ss = −k_e (x_ss − x_w), derived by hand from the control law.
    let (x_ref, f_ref) = (0.55, -8.0);
    let plan = Plan {
        start: [0.3, 0.0],
        phases: vec![Phase {
            name: PhaseName::ForcePush,
            x_ref: [x_ref, 0.0],
            f_ref: [f_ref, 0.0],
            duration: 30.0,
        }],
    };
    let result = simulate_insertion(&plan, &cfg);
    if result.aborted {
        return Err("force-push simulation aborted".into());
    }
    let f_sim = result.steps.last().unwrap().f_meas[0];
    let x_ss = (cfg.k_d[0] * x_ref + cfg.k_f[0] * (cfg.env_stiffness * cfg.neighbor_x - f_ref))
        / (cfg.k_d[0] + cfg.k_f[0] * cfg.env_stiffness);
    let f_hand = -cfg.env_stiffness * (x_ss - cfg.neighbor_x);
    let lib_value = force_push_steady_state(x_ref, f_ref, &cfg);
    let rel = (f_sim - f_hand).abs() / f_hand.abs();
    if rel > 0.05 {
        return Err(format!(
            "steady-state force {f_sim:.3} vs hand value {f_hand:.3} ({:.1}% off)",
            100.0 * rel
        ));
    }
    Ok(format!(
        "equilibrium exact over 1e4 steps; energy monotone; steady state {f_sim:.3} vs {f_hand:.3} (lib {lib_value:.3}, {:.2}% off)",
        100.0 * rel
    ))
}

/// Criterion 10 — pre-removal configurations verify for 500 instances.
fn criterion_10() -> Outcome {
    let mut checked = 0;
    for seed in 1..=500u64 {
        let n_existing = 2 + (seed % 4) as usize; // totals 3..=6
        let inst = generate_instance(seed, n_existing, &GenParams::default())
            .map_err(|e| format!("seed {seed}: {e}"))?;
        let params = PhysParams::for_instance(&inst);
        let report = verify(&inst, &inst.certificate_poses(), &params);
        if !report.overall() {
            return Err(format!(
                "seed {seed}: certificate rejected ({:?})",
                report.messages
            ));
        }
        checked += 1;
    }
    Ok(format!("{checked} pre-removal configurations verified"))
}

fn main() {
    let mut failures = 0;
    let mut report = |idx: usize, name: &str, outcome: Outcome| match outcome {
        Ok(msg) => println!("criterion {idx} ({name}): PASS — {msg}"),
        Err(msg) => {
            failures += 1;
            println!("criterion {idx} ({name}): FAIL — {msg}");
        }
    };

    let (c1, trend_detail) = criterion_1();
    report(1, "benchmark trend", c1);
    report(2, "monotonic difficulty", criterion_2());
    report(3, "oracle equivalence", criterion_3());
    report(4, "verification soundness", criterion_4(&trend_detail));
    report(5, "gradient fidelity", criterion_5());
    report(6, "qp correctness", criterion_6());
    report(7, "admm mechanics", criterion_7());
    report(8, "determinism", criterion_8());
    report(9, "simulator", criterion_9());
    report(10, "generator guarantee", criterion_10());

    if failures > 0 {
        eprintln!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
