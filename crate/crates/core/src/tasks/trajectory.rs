use crate::dynamics::{wrap_angle, Pose};

use super::{TaskError, TaskKind, TaskSpec};

/// Reference pose on the task's trajectory at time `t` (seconds).
///
/// Roll and pitch references are zero; yaw follows the horizontal tangent of
/// the path.
pub fn trajectory_point(spec: &TaskSpec, t: f64) -> Result<Pose, TaskError> {
    let tr = &spec.trajectory;
    let [cx, cy] = tr.center;
    let w = tr.angular_rate;
    let (s, c) = (w * t).sin_cos();
    let (x, y, z, dx, dy) = match spec.kind {
        TaskKind::StationKeeping => return Err(TaskError::NotTracking),
        TaskKind::Circle | TaskKind::Helix => {
            let r = tr.radius;
            let z = match spec.kind {
                TaskKind::Helix => tr.depth + tr.climb_rate * t,
                _ => tr.depth,
            };
            (cx + r * c, cy + r * s, z, -r * w * s, r * w * c)
        }
        TaskKind::Lemniscate => {
            // Gerono: (S cos ωt, S sin ωt cos ωt)
            let k = tr.scale;
            let c2 = (2.0 * w * t).cos();
            (cx + k * c, cy + k * s * c, tr.depth, -k * w * s, k * w * c2)
        }
    };
    let psi = wrap_angle(dy.atan2(dx));
    Ok(Pose::new(x, y, z, 0.0, 0.0, psi))
}
