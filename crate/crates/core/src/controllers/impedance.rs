//! Robot feedback folded into the impedance parameters.

use crate::dynamics::ImpedanceParams;
use crate::linalg::{Matrix, Vector};

use super::ControllerError;

/// Rewrites the plant driven by robot feedback `u_r = -K_r (z - ref)` as an
/// impedance with extra damping and stiffness under a constant external force:
/// `D' = D + K_rv`, `K' = K + K_rp`, force `K_rp x_ref + K_rv v_ref`.
///
/// `reference` is the full state reference; for set points the velocity part is
/// zero and the force reduces to `K_rp x_ref`.
pub fn impedance_equivalent(
    params: &ImpedanceParams,
    k_r: &Matrix,
    reference: &Vector,
) -> Result<(ImpedanceParams, Vector), ControllerError> {
    let n = params.dof();
    if k_r.shape() != (n, 2 * n) || reference.len() != 2 * n {
        return Err(ControllerError::Dimension(format!(
            "robot gain must be {n}x{} and reference {} long",
            2 * n,
            2 * n
        )));
    }
    let k_p = k_r.columns(0, n);
    let k_v = k_r.columns(n, n);
    let damping = params.damping() + k_v;
    let stiffness = params.stiffness() + k_p;
    let force = k_p * reference.rows(0, n) + k_v * reference.rows(n, n);
    let modified = ImpedanceParams::new(params.inertia().clone(), damping, stiffness)?;
    Ok((modified, force))
}
