use std::path::PathBuf;

use coopgame_core::dynamics::State;
use coopgame_core::linalg::Vector;
use coopgame_core::scenario::load_scenario;
use coopgame_core::simulation::{run_closed_loop, run_with_solution};
use coopgame_core::{ControllerRegistry, Scenario};
use coopgame_live::{EngineConfig, Mode, SessionEngine, SessionError, Telemetry};

fn scenario(name: &str) -> Scenario {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(format!("{name}.toml"));
    load_scenario(&path).unwrap().scenario
}

fn start(name: &str) -> SessionEngine {
    SessionEngine::start(scenario(name), ControllerRegistry::builtin(), EngineConfig::default()).unwrap().0
}

fn run_ticks(e: &mut SessionEngine, ticks: usize) -> Vec<Telemetry> {
    (0..ticks).filter_map(|_| e.step().unwrap()).collect()
}

#[test]
fn first_frames_show_origin_and_agreed_reference() {
    let (mut e, gains) =
        SessionEngine::start(scenario("sim1_cgt"), ControllerRegistry::builtin(), EngineConfig::default()).unwrap();
    assert_eq!(gains.z_ref.as_ref().unwrap()[0], 0.75);
    let t = e.step().unwrap().unwrap();
    assert_eq!((t.tick, t.time, t.pos[0]), (0, 0.0, 0.0));
    assert_eq!(t.z_ref.unwrap()[0], 0.75);
    assert_eq!(t.mode, Mode::ModeledHuman);
}

#[test]
fn bad_alpha_in_scenario_starts_nothing() {
    let mut s = scenario("sim1_cgt");
    s.alpha = 1.2;
    assert!(SessionEngine::start(s, ControllerRegistry::builtin(), EngineConfig::default()).is_err());
}

#[test]
fn modeled_session_matches_batch_run() {
    for name in ["sim1_cgt", "sim1_lqr", "sim1_ncgt"] {
        let mut e = start(name);
        let frames = run_ticks(&mut e, 1000);
        let mut s = scenario(name);
        s.dt = 0.004;
        s.duration = 4.0;
        let traj = run_closed_loop(&s, &ControllerRegistry::builtin(), None).unwrap();
        assert_eq!(frames.len(), 200);
        for f in &frames {
            let k = f.tick as usize;
            assert_eq!(f.time, traj.times[k]);
            let close = |a: &[f64], b: &Vector| a.iter().zip(b.iter()).all(|(x, y)| (x - y).abs() <= 1e-12);
            assert!(close(&f.pos, &traj.states[k].pos), "{name} tick {k}");
            assert!(close(&f.vel, &traj.states[k].vel));
            assert!(close(&f.u_h, &traj.u_h[k]));
            assert!(close(&f.u_r, &traj.u_r[k]));
            assert!(close(&f.u_h_nominal, &traj.u_h_nominal[k]));
        }
    }
}

/// A recorded trace: (tick, force) pairs delivered just before that tick.
fn replay(trace: &[(u64, f64)], alpha_at: Option<(u64, f64)>) -> Vec<Telemetry> {
    let mut e = start("sim1_cgt");
    let mut out = Vec::new();
    for tick in 0..600u64 {
        for (_, f) in trace.iter().filter(|(t, _)| *t == tick) {
            e.apply_force(&[*f]).unwrap();
        }
        if let Some((t, a)) = alpha_at {
            if t == tick {
                e.set_alpha(a).unwrap();
            }
        }
        out.extend(e.step().unwrap());
    }
    out
}

#[test]
fn replaying_a_trace_reproduces_the_stream() {
    let trace = [(10, 4.0), (40, -2.5), (41, 60.0), (300, 1.0)];
    assert_eq!(replay(&trace, Some((200, 0.8))), replay(&trace, Some((200, 0.8))));
    assert_ne!(replay(&trace, None), replay(&trace, Some((200, 0.8))));
}

#[test]
fn feeding_back_the_model_force_matches_a_held_model_run() {
    let mut e = start("sim1_cgt");
    let mut s = scenario("sim1_cgt");
    s.dt = 0.004;
    s.duration = 2.0;
    let registry = ControllerRegistry::builtin();
    let (ss, sol) = s.synthesize(&registry).unwrap();
    let mut zoh = |_: usize, _: f64, z: &State| Some(sol.human_action(&z.stacked()));
    let held = run_with_solution(&s, ss, sol.clone(), Some(&mut zoh)).unwrap();
    let modeled = run_closed_loop(&s, &registry, None).unwrap();

    let mut worst_vs_modeled = 0.0f64;
    for k in 0..held.len() {
        let nominal = e.snapshot().unwrap().u_h_nominal;
        e.apply_force(&nominal).unwrap();
        let t = e.step().unwrap();
        let pos = e.snapshot().unwrap().pos[0];
        if k + 1 < held.len() {
            assert!((pos - held.states[k + 1].pos[0]).abs() <= 1e-12, "tick {k}");
            worst_vs_modeled = worst_vs_modeled.max((pos - modeled.states[k + 1].pos[0]).abs());
        }
        if let Some(t) = t {
            assert_eq!(t.mode, Mode::LiveHuman);
        }
    }
    // zero-order-held human force versus continuous feedback: O(dt) gap
    assert!(worst_vs_modeled <= 1e-2, "{worst_vs_modeled}");
}

#[test]
fn silent_human_leaves_robot_feedback_alone() {
    let mut e = start("sim1_cgt");
    e.apply_force(&[0.0]).unwrap();
    run_ticks(&mut e, 2500);
    let t = e.snapshot().unwrap();
    assert_eq!(t.u_h, vec![0.0]);
    assert!((t.pos[0] - 0.75).abs() <= 1e-4);
    assert!(t.u_h_nominal[0].abs() <= 1e-2);
}

#[test]
fn alpha_change_moves_the_agreed_reference_without_a_jump() {
    let mut e = start("sim1_cgt");
    run_ticks(&mut e, 123);
    let before = e.snapshot().unwrap();
    let g = e.set_alpha(0.9).unwrap();
    assert!((g.z_ref.as_ref().unwrap()[0] - 0.95).abs() <= 1e-12);
    let after = e.snapshot().unwrap();
    assert_eq!((before.tick, before.pos.clone(), before.vel.clone()), (after.tick, after.pos, after.vel));
    assert_eq!(e.set_alpha(0.9).unwrap(), g);
}

#[test]
fn failed_changes_keep_previous_gains() {
    let mut e = start("sim1_cgt");
    let g = e.gains();
    assert!(matches!(e.set_alpha(1.0), Err(SessionError::Simulation(_))));
    assert!(e.set_controller("pid").is_err());
    assert_eq!(e.gains(), g);
    assert_eq!(e.scenario().alpha, 0.5);
}

#[test]
fn switching_to_nash_keeps_the_robot_pushing() {
    let mut e = start("sim1_cgt");
    run_ticks(&mut e, 2500);
    assert!(e.snapshot().unwrap().u_r[0].abs() <= 1e-3);
    let g = e.set_controller("ncgt").unwrap();
    assert!(g.z_ref.is_none());
    run_ticks(&mut e, 2500);
    let t = e.snapshot().unwrap();
    // symmetric weights: the Nash equilibrium is also at 0.75, yet both keep pushing
    assert!((t.pos[0] - 0.75).abs() <= 1e-3);
    assert!(t.u_r[0].abs() >= 1e-2, "{:?}", t.u_r);
}

#[test]
fn reset_restarts_the_clock() {
    let mut e = start("sim1_cgt");
    let first = run_ticks(&mut e, 50);
    e.reset().unwrap();
    assert_eq!(run_ticks(&mut e, 50), first);
}
