//! CSV serializers. Column order is fixed; every number is written with 17
//! significant digits so files round-trip to the same doubles.
//!
//! * `trajectory.csv`: `time,pos_0..,vel_0..,u_h_0..,u_r_0..,u_h_nominal_0..`
//! * `costs.csv`: `j_h,j_r,window_start,window_end`
//! * `summary.csv`: `value,status,trajectory,equilibrium_0..,peak_u_h,peak_u_r,j_h,j_r`

use coopgame_core::linalg::Vector;
use coopgame_core::simulation::{CostReport, SweepEntry};
use coopgame_core::Trajectory;

pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn indexed(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (0..n).map(move |i| format!("{prefix}_{i}"))
}

fn finish(w: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("ascii output")
}

fn push_vec(row: &mut Vec<String>, v: &Vector) {
    row.extend(v.iter().map(|x| num(*x)));
}

pub fn trajectory_csv(traj: &Trajectory) -> String {
    let dof = traj.states.first().map_or(0, |s| s.dof());
    let inputs = traj.u_h.first().map_or(0, |u| u.len());
    let mut w = csv::Writer::from_writer(Vec::new());
    let header: Vec<String> = std::iter::once("time".to_string())
        .chain(indexed("pos", dof))
        .chain(indexed("vel", dof))
        .chain(indexed("u_h", inputs))
        .chain(indexed("u_r", inputs))
        .chain(indexed("u_h_nominal", inputs))
        .collect();
    w.write_record(&header).expect("in-memory write");
    for i in 0..traj.len() {
        let mut row = vec![num(traj.times[i])];
        push_vec(&mut row, &traj.states[i].pos);
        push_vec(&mut row, &traj.states[i].vel);
        push_vec(&mut row, &traj.u_h[i]);
        push_vec(&mut row, &traj.u_r[i]);
        push_vec(&mut row, &traj.u_h_nominal[i]);
        w.write_record(&row).expect("in-memory write");
    }
    finish(w)
}

pub fn costs_csv(c: &CostReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["j_h", "j_r", "window_start", "window_end"]).expect("in-memory write");
    w.write_record([num(c.j_h), num(c.j_r), num(c.window.0), num(c.window.1)]).expect("in-memory write");
    finish(w)
}

/// File name used for the `index`-th run of a sweep.
pub fn sweep_file(index: usize) -> String {
    format!("trajectory_{index:03}.csv")
}

pub fn summary_csv(entries: &[SweepEntry], dof: usize) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let header: Vec<String> = ["value", "status", "trajectory"]
        .into_iter()
        .map(String::from)
        .chain(indexed("equilibrium", dof))
        .chain(["peak_u_h", "peak_u_r", "j_h", "j_r"].into_iter().map(String::from))
        .collect();
    w.write_record(&header).expect("in-memory write");
    for (i, e) in entries.iter().enumerate() {
        let mut row = vec![num(e.value)];
        match &e.outcome {
            Ok(run) => {
                let t = &run.trajectory;
                row.push("ok".into());
                row.push(sweep_file(i));
                push_vec(&mut row, &t.last_state().pos);
                row.push(num(Trajectory::peak_norm(&t.u_h)));
                row.push(num(Trajectory::peak_norm(&t.u_r)));
                row.push(num(run.costs.j_h));
                row.push(num(run.costs.j_r));
            }
            Err(_) => {
                row.push("failed".into());
                row.extend(std::iter::repeat_n(String::new(), 1 + dof + 4));
            }
        }
        w.write_record(&row).expect("in-memory write");
    }
    finish(w)
}
