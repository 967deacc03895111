//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.
//!
//! Runs as a plain binary (no libtest harness) so the verdict lines are always
//! printed by `cargo test`.

#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use coopgame_core::controllers::{cgt_aggregate, shared_reference};
use coopgame_core::dynamics::{State, StateSpace};
use coopgame_core::linalg::{self, Vector};
use coopgame_core::riccati::{solve_care, solve_coupled_care, CareProblem, CoupledOptions};
use coopgame_core::simulation::{
    agent_cost, effort_error, run_closed_loop, run_impedance_equivalent, run_with_solution, Agent, Trajectory,
};
use coopgame_core::{ControllerRegistry, Scenario};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::{desk_scenario, desk_scenario_with, diag, exact_care_residual, hamiltonian_care, quadratic_minimizer, random_care, random_matrix, scalar};

type Verdict = Result<String, String>;

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn are_correctness() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_residual = 0.0f64;
    let mut worst_gap = 0.0f64;
    let mut failures = Vec::new();
    for case in 0..1000 {
        let (a, b, q, r) = random_care(&mut rng, 4);
        let verdict = (|| {
            let sol = solve_care(&CareProblem { a: a.clone(), b: b.clone(), q: q.clone(), r: r.clone() })
                .map_err(|e| e.to_string())?;
            let rel = exact_care_residual(&a, &b, &q, &r, &sol.p) / (1.0 + q.norm());
            worst_residual = worst_residual.max(rel);
            check(rel <= 1e-9, || format!("residual {rel:.2e} x (1 + |Q|)"))?;
            check(linalg::is_hurwitz(&(&a - &b * &sol.gain), 1e-10), || "closed loop not Hurwitz".into())?;
            let oracle = hamiltonian_care(&a, &b, &q, &r);
            let gap = (&sol.p - &oracle).norm() / (1.0 + oracle.norm());
            worst_gap = worst_gap.max(gap);
            check(gap <= 1e-6, || format!("Hamiltonian oracle gap {gap:.2e}"))
        })();
        if let Err(why) = verdict {
            failures.push(format!("case {case} ({} states, |P| ~ {:.1e}): {why}", a.nrows(), hamiltonian_care(&a, &b, &q, &r).norm()));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(failures.is_empty(), || format!("{} of 1000 problems failed; {}", failures.len(), failures.join("; ")))?;
    check(secs <= 60.0, || format!("1000 problems took {secs:.1} s"))?;
    Ok(format!("1000 problems, worst residual {worst_residual:.1e}(1+|Q|), worst oracle gap {worst_gap:.1e}, {secs:.1} s"))
}

fn nash_fixed_point() -> Verdict {
    let ss = StateSpace::new(scalar(0.0), scalar(1.0), scalar(1.0)).unwrap();
    let one = scalar(1.0);
    let sym = solve_coupled_care(&ss, &one, &one, &one, &one, &CoupledOptions::default()).map_err(|e| e.to_string())?;
    let target = 1.0 / 3f64.sqrt();
    for p in [sym.human.p[(0, 0)], sym.robot.p[(0, 0)], sym.human.gain[(0, 0)], sym.robot.gain[(0, 0)]] {
        check((p - target).abs() <= 1e-9, || format!("symmetric game gave {p}, expected {target}"))?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let (mut converged, mut worst) = (0, 0.0f64);
    for _ in 0..200 {
        let n = rng.random_range(1..=2);
        let ss = StateSpace::new(
            random_matrix(&mut rng, n, n, 1.0),
            random_matrix(&mut rng, n, 1, 1.0),
            random_matrix(&mut rng, n, 1, 1.0),
        )
        .unwrap();
        let c_h = random_matrix(&mut rng, n, n, 1.0);
        let c_r = random_matrix(&mut rng, n, n, 1.0);
        let (q_h, q_r) = (c_h.transpose() * &c_h, c_r.transpose() * &c_r);
        let (r_h, r_r) = (scalar(rng.random_range(0.1..2.0)), scalar(rng.random_range(0.1..2.0)));
        let Ok(sol) = solve_coupled_care(&ss, &q_h, &q_r, &r_h, &r_r, &CoupledOptions::default()) else { continue };
        converged += 1;
        let human = solve_care(&CareProblem { a: &ss.a - &ss.b_r * &sol.robot.gain, b: ss.b_h.clone(), q: q_h, r: r_h })
            .map_err(|e| format!("human best response: {e}"))?;
        let robot = solve_care(&CareProblem { a: &ss.a - &ss.b_h * &sol.human.gain, b: ss.b_r.clone(), q: q_r, r: r_r })
            .map_err(|e| format!("robot best response: {e}"))?;
        let dev = (human.gain - &sol.human.gain).amax().max((robot.gain - &sol.robot.gain).amax());
        worst = worst.max(dev);
        check(dev <= 1e-6, || format!("best response moved a gain by {dev:e}"))?;
    }
    check(converged > 0, || "no random game converged".into())?;
    Ok(format!("P = 1/sqrt(3) to 1e-9; {converged}/200 random games converged, worst deviation {worst:.1e}"))
}

fn shared_reference_values() -> Verdict {
    for (alpha, expected) in [(0.5, 0.75), (0.9, 0.95), (0.2, 0.6)] {
        let s = desk_scenario("cgt", alpha);
        let z = shared_reference(&cgt_aggregate(alpha, &s.human, &s.robot).map_err(|e| e.to_string())?, &s.refs)
            .map_err(|e| e.to_string())?
            .z_ref;
        check((z[0] - expected).abs() <= 1e-12, || format!("alpha {alpha}: z_ref {} != {expected}", z[0]))?;
    }
    let s = desk_scenario_with("cgt", 0.1, diag(&[0.1, 1e-4]), 5e-4);
    let agg = cgt_aggregate(0.1, &s.human, &s.robot).map_err(|e| e.to_string())?;
    let z = shared_reference(&agg, &s.refs).map_err(|e| e.to_string())?.z_ref;
    let oracle = quadratic_minimizer(&agg.q_h_agg, &s.refs.human, &agg.q_r_agg, &s.refs.robot);
    check((z[0] - oracle[0]).abs() <= 1e-9, || format!("low robot weight: {} vs minimizer {}", z[0], oracle[0]))?;
    Ok(format!("0.75 / 0.95 / 0.6 exact; low robot weight at alpha 0.1 gives {:.5}", z[0]))
}

fn run(s: &Scenario) -> Result<Trajectory, String> {
    run_closed_loop(s, &ControllerRegistry::builtin(), None).map_err(|e| format!("{} alpha {}: {e}", s.controller, s.alpha))
}

fn final_efforts(t: &Trajectory) -> (f64, f64) {
    (t.u_h.last().unwrap().norm(), t.u_r.last().unwrap().norm())
}

fn cgt_zero_effort() -> Verdict {
    let mut worst = (0.0f64, 0.0f64);
    for (alpha, z_ref) in [(0.2, 0.6), (0.5, 0.75), (0.9, 0.95)] {
        let t = run(&desk_scenario("cgt", alpha))?;
        let (u_h, u_r) = final_efforts(&t);
        let gap = (t.last_state().pos[0] - z_ref).abs();
        check(u_h <= 1e-3 && u_r <= 1e-3, || format!("alpha {alpha}: final efforts {u_h:e}, {u_r:e}"))?;
        check(gap <= 1e-3, || format!("alpha {alpha}: final position off z_ref by {gap:e}"))?;
        worst = (worst.0.max(u_h.max(u_r)), worst.1.max(gap));
    }
    Ok(format!("final |u| <= {:.1e} N, |pos - z_ref| <= {:.1e} m", worst.0, worst.1))
}

fn persistent_effort() -> Verdict {
    let registry = ControllerRegistry::builtin();
    let mut notes = Vec::new();
    for name in ["lqr", "ncgt"] {
        for alpha in [0.2, 0.5, 0.9] {
            let s = desk_scenario(name, alpha);
            let (ss, sol) = s.synthesize(&registry).map_err(|e| e.to_string())?;
            let z_star = sol.steady_state(&ss).map_err(|e| e.to_string())?;
            let t = run_with_solution(&s, ss, sol, None).map_err(|e| e.to_string())?;
            let (u_h, u_r) = final_efforts(&t);
            let pos = t.last_state().pos[0];
            check(u_h >= 1e-2 && u_r >= 1e-2, || format!("{name} alpha {alpha}: efforts {u_h:e}, {u_r:e}"))?;
            check(pos > 0.5 && pos < 1.0, || format!("{name} alpha {alpha}: equilibrium {pos}"))?;
            let tail = (t.last_state().stacked() - &z_star).amax();
            check(tail <= 1e-4, || format!("{name} alpha {alpha}: tail off steady state by {tail:e}"))?;
            notes.push(format!("{pos:.3}"));
        }
    }
    Ok(format!("equilibria lqr {} / ncgt {}", notes[..3].join(","), notes[3..].join(",")))
}

fn simulation_three() -> Verdict {
    let values = [5e-5, 1e-4, 1e-3];
    let runs = |name: &str| -> Result<Vec<Trajectory>, String> {
        values.iter().map(|r| run(&desk_scenario_with(name, 0.5, diag(&[1.0, 1e-4]), *r))).collect()
    };
    let spread = |ts: &[Trajectory]| {
        let p: Vec<f64> = ts.iter().map(|t| t.last_state().pos[0]).collect();
        p.iter().cloned().fold(f64::MIN, f64::max) - p.iter().cloned().fold(f64::MAX, f64::min)
    };
    let cgt = runs("cgt")?;
    let cgt_spread = spread(&cgt);
    check(cgt_spread <= 1e-6, || format!("cgt equilibrium spread {cgt_spread:e}"))?;
    let peaks: Vec<f64> = cgt.iter().map(|t| Trajectory::peak_norm(&t.u_r)).collect();
    check(peaks[0] > peaks[1] && peaks[1] > peaks[2], || format!("peak robot effort not decreasing: {peaks:?}"))?;
    let mut others = Vec::new();
    for name in ["lqr", "ncgt"] {
        let sp = spread(&runs(name)?);
        check(sp >= 1e-3, || format!("{name} equilibrium spread only {sp:e}"))?;
        others.push(sp);
    }
    Ok(format!(
        "cgt spread {cgt_spread:.1e}, peak u_r {:.1}/{:.1}/{:.1} N; spreads lqr {:.3} ncgt {:.3}",
        peaks[0], peaks[1], peaks[2], others[0], others[1]
    ))
}

fn fig4_trend() -> Verdict {
    let alphas: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
    let human_cost = |name: &str, alpha: f64| -> Result<f64, String> {
        let s = desk_scenario(name, alpha);
        let t = run(&s)?;
        agent_cost(&t, &s.human, &s.refs, (0.0, 3.5), Agent::Human).map_err(|e| e.to_string())
    };
    let mut cgt = Vec::new();
    let mut below = Vec::new();
    for &a in &alphas {
        let c = human_cost("cgt", a)?;
        below.push(c < human_cost("lqr", a)? && c < human_cost("ncgt", a)?);
        cgt.push(c);
    }
    check(cgt.windows(2).all(|w| w[1] <= w[0]), || format!("cgt human cost not non-increasing: {cgt:?}"))?;
    let first = below.iter().position(|b| *b).ok_or("cgt human cost never below both baselines")?;
    check(below[first..].iter().all(|b| *b), || format!("cgt advantage is not an upper range of alpha: {below:?}"))?;
    check(first > 0, || "cgt is cheaper for the human at every alpha, no crossover".to_string())?;
    Ok(format!("cgt human cost {:.3} -> {:.3}; below lqr and ncgt for alpha >= {}", cgt[0], cgt[8], alphas[first]))
}

fn impedance_equivalence() -> Verdict {
    let s = desk_scenario("cgt", 0.5);
    let (ss, sol) = s.synthesize(&ControllerRegistry::builtin()).map_err(|e| e.to_string())?;
    let explicit = run_with_solution(&s, ss, sol.clone(), None).map_err(|e| e.to_string())?;
    let folded = run_impedance_equivalent(&s, &sol).map_err(|e| e.to_string())?;
    let worst = explicit
        .states
        .iter()
        .zip(&folded.states)
        .map(|(a, b)| (a.stacked() - b.stacked()).amax())
        .fold(0.0, f64::max);
    check(worst <= 1e-9, || format!("max state deviation {worst:e}"))?;
    Ok(format!("max state deviation {worst:.1e} over {} s", s.duration))
}

fn constant_trajectory(u_h: f64, u_n: f64, duration: f64, dt: f64) -> Trajectory {
    let n = (duration / dt).round() as usize + 1;
    Trajectory {
        controller: "cgt".into(),
        times: (0..n).map(|i| i as f64 * dt).collect(),
        states: vec![State::zeros(1); n],
        u_h: vec![Vector::from_element(1, u_h); n],
        u_r: vec![Vector::zeros(1); n],
        u_h_nominal: vec![Vector::from_element(1, u_n); n],
        human_target: Vector::zeros(2),
        robot_target: Vector::zeros(2),
        z_ref: None,
    }
}

fn effort_error_metric() -> Verdict {
    let same = constant_trajectory(2.0, 2.0, 2.0, 1e-3);
    let e = effort_error(&same, (0.0, 2.0)).map_err(|e| e.to_string())?;
    check(e == 0.0, || format!("identity case gave {e}"))?;
    let offset = constant_trajectory(1.5, 1.0, 2.0, 1e-3);
    let e = effort_error(&offset, (0.0, 2.0)).map_err(|e| e.to_string())?;
    check((e - 1.0).abs() <= 1e-12, || format!("constant offset gave {e}, expected 1.0"))?;

    let mut s = desk_scenario("cgt", 0.5);
    s.duration = 3.5;
    let mut push = |k: usize, _: f64, _: &State| Some(Vector::from_element(1, 10.0 * ((k / 500) % 2) as f64));
    let live = run_closed_loop(&s, &ControllerRegistry::builtin(), Some(&mut push)).map_err(|e| e.to_string())?;
    let base = effort_error(&live, (0.0, 3.5)).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let k: f64 = 10f64.powf(rng.random_range(-3.0..3.0));
        let mut scaled = live.clone();
        for u in scaled.u_h.iter_mut().chain(scaled.u_h_nominal.iter_mut()) {
            *u *= k;
        }
        let e = effort_error(&scaled, (0.0, 3.5)).map_err(|e| e.to_string())?;
        check((e - base).abs() <= 1e-12 * (1.0 + base), || format!("scaling by {k} changed {base} to {e}"))?;
    }
    Ok(format!("identity 0, offset 1.0, 100 random scalings invariant (base {base:.4})"))
}

fn csv_outputs(scenario: &Path, dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let sim = dir.join("simulate");
    let swp = dir.join("sweep");
    for args in [
        vec!["coopgame", "simulate", "--scenario", scenario.to_str().unwrap(), "--out", sim.to_str().unwrap()],
        vec!["coopgame", "sweep", "--scenario", scenario.to_str().unwrap(), "--out", swp.to_str().unwrap()],
    ] {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = coopgame_cli::run(&args, &mut out, &mut err);
        check(code == 0, || format!("{} exited {code}: {}", args[1], String::from_utf8_lossy(&err)))?;
    }
    let mut files = Vec::new();
    for d in [&sim, &swp] {
        let mut paths: Vec<PathBuf> = std::fs::read_dir(d).map_err(|e| e.to_string())?.map(|e| e.unwrap().path()).collect();
        paths.sort();
        for p in paths {
            files.push((p.strip_prefix(dir).unwrap().display().to_string(), std::fs::read(&p).map_err(|e| e.to_string())?));
        }
    }
    Ok(files)
}

fn csv_determinism() -> Verdict {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut scenarios: Vec<PathBuf> = std::fs::read_dir(&dir).map_err(|e| e.to_string())?.map(|e| e.unwrap().path()).collect();
    scenarios.sort();
    let mut compared = 0;
    for s in &scenarios {
        let a = tempfile::tempdir().map_err(|e| e.to_string())?;
        let b = tempfile::tempdir().map_err(|e| e.to_string())?;
        let first = csv_outputs(s, a.path())?;
        let second = csv_outputs(s, b.path())?;
        check(first == second, || format!("{} produced different bytes", s.display()))?;
        compared += first.len();
    }
    Ok(format!("{} scenario files, {compared} CSV files byte-identical across two runs", scenarios.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 10] = [
        ("ARE correctness", are_correctness),
        ("coupled-ARE Nash fixed point", nash_fixed_point),
        ("shared reference", shared_reference_values),
        ("CGT zero-effort equilibrium", cgt_zero_effort),
        ("LQR/NCGT persistent effort", persistent_effort),
        ("robot effort weight sweep", simulation_three),
        ("human cost trend in alpha", fig4_trend),
        ("impedance equivalence", impedance_equivalence),
        ("normalized effort error", effort_error_metric),
        ("CSV determinism", csv_determinism),
    ];
    // keep panics from individual criteria on one line
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, f) in criteria {
        let verdict = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or(p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or("panic".into()))
        });
        match verdict {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
