use nalgebra::{Matrix2, SMatrix, Vector6};

use super::IbvsError;

pub type Mat2x6 = SMatrix<f64, 2, 6>;
pub type Mat6x2 = SMatrix<f64, 6, 2>;
/// Camera twist `(v_x, v_y, v_z, w_x, w_y, w_z)` in the camera frame.
pub type Twist = Vector6<f64>;

/// Image Jacobian of a point feature: maps the camera twist to the velocity
/// of the normalized image point `(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InteractionMatrix {
    pub x: f64,
    pub y: f64,
    pub depth: f64,
    pub matrix: Mat2x6,
}

pub fn interaction_matrix(x: f64, y: f64, depth: f64) -> Result<InteractionMatrix, IbvsError> {
    if !(depth > 0.0) || !depth.is_finite() {
        return Err(IbvsError::InvalidDepth(depth));
    }
    let iz = 1.0 / depth;
    #[rustfmt::skip]
    let matrix = Mat2x6::new(
        -iz, 0.0, x * iz, x * y,         -(1.0 + x * x), y,
        0.0, -iz, y * iz, 1.0 + y * y,   -x * y,         -x,
    );
    Ok(InteractionMatrix { x, y, depth, matrix })
}

/// Moore-Penrose inverse of a full-row-rank 2x6 matrix.
///
/// `L^T = Q R` by modified Gram-Schmidt (with one re-orthogonalization
/// pass), so `L = R^T Q^T` and `L+ = Q R^-T`. The product `L^T L` is never
/// formed.
pub fn pseudo_inverse(l: &Mat2x6) -> Result<Mat6x2, IbvsError> {
    if l.iter().any(|v| !v.is_finite()) {
        return Err(IbvsError::Degenerate);
    }
    let a = l.transpose();
    let scale = a.abs().max();
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(IbvsError::Degenerate);
    }
    let mut q0 = a.column(0).into_owned();
    let r00 = q0.norm();
    if r00 <= 1e-12 * scale {
        return Err(IbvsError::Degenerate);
    }
    q0 /= r00;

    let mut q1 = a.column(1).into_owned();
    let mut r01 = 0.0;
    for _ in 0..2 {
        let c = q0.dot(&q1);
        r01 += c;
        q1 -= q0 * c;
    }
    let r11 = q1.norm();
    if r11 <= 1e-10 * r00.max(a.column(1).norm()) {
        return Err(IbvsError::Degenerate);
    }
    q1 /= r11;

    // R^-T for upper-triangular R = [[r00, r01], [0, r11]].
    let r_inv_t = Matrix2::new(1.0 / r00, 0.0, -r01 / (r00 * r11), 1.0 / r11);
    let mut q = Mat6x2::zeros();
    q.set_column(0, &q0);
    q.set_column(1, &q1);
    Ok(q * r_inv_t)
}
