use super::{DynamicsError, LimbConfig, Vec2};

/// Mass-weighted average of point masses: `sum(m_i * x_i) / sum(m_i)`.
///
/// Zero masses are allowed and simply do not contribute; negative or
/// non-finite masses, or a non-positive total, are rejected.
pub fn weighted_com(points: &[(f64, Vec2)]) -> Result<Vec2, DynamicsError> {
    let mut total = 0.0;
    let mut moment = Vec2::zeros();
    for &(m, x) in points {
        if !m.is_finite() || m < 0.0 {
            return Err(DynamicsError::InvalidParameter(format!("mass {m} is not >= 0")));
        }
        total += m;
        moment += m * x;
    }
    if !(total > 0.0) {
        return Err(DynamicsError::InvalidParameter(format!(
            "total mass {total} is not > 0"
        )));
    }
    Ok(moment / total)
}

/// Whole-body CoM from the two arms, two legs, the control box and, when
/// `carrying`, the carried box.
pub fn estimate_com(
    limbs: &LimbConfig,
    control_mass: f64,
    control_pos: Vec2,
    carrying: bool,
) -> Result<Vec2, DynamicsError> {
    let m = &limbs.masses;
    let mut points = vec![
        (m.arms[0], limbs.arm_com[0]),
        (m.arms[1], limbs.arm_com[1]),
        (m.legs[0], limbs.leg_com[0]),
        (m.legs[1], limbs.leg_com[1]),
        (control_mass, control_pos),
    ];
    if carrying {
        points.push((m.carried_box, limbs.box_com));
    }
    weighted_com(&points)
}
