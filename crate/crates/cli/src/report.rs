//! Plain-text gains report.

use std::fmt::Write;

use coopgame_core::controllers::impedance_equivalent;
use coopgame_core::linalg::Matrix;
use coopgame_core::{GameController, GameSolution, Scenario, StateSpace};

use crate::error::CliError;

fn matrix(m: &Matrix) -> String {
    let rows: Vec<String> = m
        .row_iter()
        .map(|r| format!("[{}]", r.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(", ")))
        .collect();
    if rows.len() == 1 {
        rows[0].clone()
    } else {
        format!("[{}]", rows.join(", "))
    }
}

fn vector<'a>(v: impl IntoIterator<Item = &'a f64>) -> String {
    format!("[{}]", v.into_iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(", "))
}

pub fn gains_report(
    scenario: &Scenario,
    ss: &StateSpace,
    solution: &GameSolution,
    controller: &dyn GameController,
) -> Result<String, CliError> {
    let mut out = String::new();
    let w = &mut out;
    let _ = writeln!(w, "controller  {} ({})", controller.name(), controller.description());
    let _ = writeln!(w, "alpha       {}", scenario.alpha);
    let _ = writeln!(w, "K_h         {}", matrix(&solution.k_h));
    let _ = writeln!(w, "K_r         {}", matrix(&solution.k_r));
    if let Some(z) = &solution.z_ref {
        let _ = writeln!(w, "z_ref       {}", vector(z.iter()));
    } else {
        let _ = writeln!(w, "targets     human {}  robot {}", vector(solution.human_target.iter()), vector(solution.robot_target.iter()));
    }

    let (params, forcing) = impedance_equivalent(&scenario.plant, &solution.k_r, &solution.robot_target)?;
    let _ = writeln!(w, "\nequivalent impedance (robot feedback folded into the plant)");
    let _ = writeln!(w, "  M'        {}", matrix(params.inertia()));
    let _ = writeln!(w, "  D'        {}", matrix(params.damping()));
    let _ = writeln!(w, "  K'        {}", matrix(params.stiffness()));
    let _ = writeln!(w, "  forcing   {}", vector(forcing.iter()));

    let _ = writeln!(w, "\nRiccati residuals (Frobenius)");
    for r in &solution.riccati {
        let _ = writeln!(w, "  {:<9} {:.3e}", r.label, r.residual);
    }

    let _ = writeln!(w, "\nclosed-loop eigenvalues");
    let mut eig = solution.closed_loop_eigenvalues(ss);
    eig.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    for l in eig {
        if l.im == 0.0 {
            let _ = writeln!(w, "  {}", l.re);
        } else {
            let _ = writeln!(w, "  {} {} {}i", l.re, if l.im < 0.0 { '-' } else { '+' }, l.im.abs());
        }
    }
    Ok(out)
}
