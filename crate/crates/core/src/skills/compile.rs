//! Derived skills compiled to base-skill steps.
//!
//! Command-level lengths are centimetres and orientations are XYZ Euler angles
//! in degrees, absolute in the world frame relative to the tool-down pose
//! (identity). Compilation never reads the world: object positions are looked
//! up by PERCEPTION steps at execution time.

use nalgebra::{UnitQuaternion, Vector3};

use super::{SkillError, TaskStep, WaitFor};
use crate::sim::euler_xyz_deg;

const CM: f64 = 0.01;

fn finite3(name: &'static str, v: [f64; 3]) -> Result<Vector3<f64>, SkillError> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(Vector3::from(v))
    } else {
        Err(SkillError::InvalidArgument {
            name,
            reason: format!("{v:?} is not finite"),
        })
    }
}

/// Perceive, hover `offset` cm above the top affordance, descend onto it,
/// grasp until locked, and lift back to the hover point.
pub fn compile_pickup_brick(color: &str, offset_cm: f64) -> Result<Vec<TaskStep>, SkillError> {
    if !(offset_cm.is_finite() && offset_cm > 0.0) {
        return Err(SkillError::InvalidArgument {
            name: "offset",
            reason: format!("must be positive, got {offset_cm}"),
        });
    }
    let above = Vector3::new(0.0, 0.0, offset_cm * CM);
    let down = Some(UnitQuaternion::identity());
    Ok(vec![
        TaskStep::perceive(color),
        TaskStep::move_anchored(color, above, down),
        TaskStep::move_anchored(color, Vector3::zeros(), down),
        TaskStep::gripper(true, Some(WaitFor::Locked)),
        TaskStep::move_anchored(color, above, down),
    ])
}

/// Lower the held brick to `offset` cm above the table at the current (x, y),
/// release it, and back off upwards by the same offset.
pub fn compile_drop_brick(orientation_deg: [f64; 3], offset_cm: f64) -> Result<Vec<TaskStep>, SkillError> {
    if !(offset_cm.is_finite() && offset_cm >= 0.0) {
        return Err(SkillError::InvalidArgument {
            name: "offset",
            reason: format!("must be non-negative, got {offset_cm}"),
        });
    }
    let orientation = euler_xyz_deg(finite3("orientation", orientation_deg)?.into());
    Ok(vec![
        TaskStep::place(offset_cm * CM, Some(orientation)),
        TaskStep::gripper(false, Some(WaitFor::Free)),
        TaskStep::move_relative(Vector3::new(0.0, 0.0, offset_cm * CM), None),
    ])
}

/// Relative translation, absolute orientation.
pub fn compile_move_hand(orientation_deg: [f64; 3], translation_cm: [f64; 3]) -> Result<Vec<TaskStep>, SkillError> {
    let orientation = euler_xyz_deg(finite3("orientation", orientation_deg)?.into());
    let delta = finite3("translation", translation_cm)? * CM;
    Ok(vec![TaskStep::move_relative(delta, Some(orientation))])
}

/// Tip to the object's top affordance plus a world-frame displacement.
pub fn compile_move_by_object(color: &str, translation_cm: [f64; 3]) -> Result<Vec<TaskStep>, SkillError> {
    let offset = finite3("translation", translation_cm)? * CM;
    Ok(vec![
        TaskStep::perceive(color),
        TaskStep::move_anchored(color, offset, Some(UnitQuaternion::identity())),
    ])
}
