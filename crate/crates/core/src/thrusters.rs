//! Thruster geometry and the map from per-thruster throttle to body wrench.
//!
//! An action is one throttle per thruster in `[-1, 1]`. Each throttle goes
//! through the thruster's curve to a force along its direction; the
//! allocation matrix then sums forces and their moments about the body
//! origin.

use nalgebra::{DMatrix, Matrix6xX, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::dynamics::Wrench;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ThrustCurve {
    Linear,
    #[default]
    QuadraticSigned,
}

impl ThrustCurve {
    /// Normalized force `F / max_thrust` for a throttle already in `[-1, 1]`.
    #[inline]
    fn shape(self, throttle: f64) -> f64 {
        match self {
            ThrustCurve::Linear => throttle,
            ThrustCurve::QuadraticSigned => throttle * throttle.abs(),
        }
    }

    /// Throttle producing the normalized force `ratio` (clamped to `[-1, 1]`).
    pub fn inverse(self, ratio: f64) -> f64 {
        let ratio = ratio.clamp(-1.0, 1.0);
        match self {
            ThrustCurve::Linear => ratio,
            ThrustCurve::QuadraticSigned => ratio.signum() * ratio.abs().sqrt(),
        }
    }
}

/// One row of the thruster table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thruster {
    /// Mounting point in the body frame, m.
    pub position: [f64; 3],
    /// Unit thrust direction in the body frame.
    pub direction: [f64; 3],
    /// Force at full throttle, N.
    pub max_thrust: f64,
    #[serde(default)]
    pub curve: ThrustCurve,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LayoutError {
    #[error("a thruster layout needs at least one thruster")]
    Empty,
    #[error("thruster {index}: direction norm is {norm}, expected 1")]
    NotUnit { index: usize, norm: f64 },
    #[error("thruster {index}: max_thrust must be positive, got {value}")]
    NonPositiveThrust { index: usize, value: f64 },
    #[error("thruster {index}: non-finite geometry")]
    NonFinite { index: usize },
}

/// Force produced by one thruster. The throttle is clamped to `[-1, 1]`.
#[inline]
pub fn thrust_force(throttle: f64, max_thrust: f64, curve: ThrustCurve) -> f64 {
    max_thrust * curve.shape(throttle.clamp(-1.0, 1.0))
}

/// Validated thruster table with its allocation columns precomputed.
#[derive(Debug, Clone, PartialEq)]
pub struct ThrusterLayout {
    thrusters: Vec<Thruster>,
    columns: Vec<Vector6<f64>>,
}

impl ThrusterLayout {
    pub fn new(thrusters: Vec<Thruster>) -> Result<Self, LayoutError> {
        if thrusters.is_empty() {
            return Err(LayoutError::Empty);
        }
        let mut columns = Vec::with_capacity(thrusters.len());
        for (index, t) in thrusters.iter().enumerate() {
            let finite = t.position.iter().chain(&t.direction).all(|c| c.is_finite());
            if !finite || !t.max_thrust.is_finite() {
                return Err(LayoutError::NonFinite { index });
            }
            let d = Vector3::from(t.direction);
            let norm = d.norm();
            if (norm - 1.0).abs() > 1e-9 {
                return Err(LayoutError::NotUnit { index, norm });
            }
            if t.max_thrust <= 0.0 {
                return Err(LayoutError::NonPositiveThrust { index, value: t.max_thrust });
            }
            let r = Vector3::from(t.position);
            let m = r.cross(&d);
            columns.push(Vector6::new(d.x, d.y, d.z, m.x, m.y, m.z));
        }
        Ok(Self { thrusters, columns })
    }

    pub fn len(&self) -> usize {
        self.thrusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thrusters.is_empty()
    }

    pub fn thrusters(&self) -> &[Thruster] {
        &self.thrusters
    }

    /// 6×N matrix whose column i is `[d_i ; r_i × d_i]`.
    pub fn allocation_matrix(&self) -> Matrix6xX<f64> {
        Matrix6xX::from_columns(&self.columns)
    }

    /// Moore-Penrose pseudo-inverse of the allocation matrix (N×6).
    pub fn allocation_pseudo_inverse(&self) -> DMatrix<f64> {
        let a = DMatrix::from_iterator(6, self.len(), self.columns.iter().flat_map(|c| c.iter().copied()));
        a.pseudo_inverse(1e-12).expect("SVD of a finite allocation matrix converges")
    }

    /// Body wrench produced by `action`. Out-of-range throttles are clamped.
    ///
    /// Panics if `action.len()` differs from the number of thrusters.
    pub fn actuate(&self, action: &[f64]) -> Wrench {
        assert_eq!(action.len(), self.len(), "action length must equal the thruster count");
        let mut acc = Vector6::zeros();
        for ((t, col), &f) in self.thrusters.iter().zip(&self.columns).zip(action) {
            let force = thrust_force(f, t.max_thrust, t.curve);
            acc += col * force;
        }
        Wrench::from_vector(&acc)
    }

    /// Returns a copy with every thruster switched to `curve`.
    pub fn with_curve(&self, curve: ThrustCurve) -> Self {
        let thrusters = self
            .thrusters
            .iter()
            .map(|t| Thruster { curve, ..t.clone() })
            .collect();
        Self::new(thrusters).expect("geometry unchanged")
    }
}

/// Eight-thruster vectored layout of a BlueROV2 Heavy class vehicle: four
/// horizontal thrusters at ±45° in the body plane and four vertical ones.
///
/// Body axes: x forward, y starboard, z down. Positions are engineering
/// estimates, not manufacturer data.
pub fn heavy_layout() -> Vec<Thruster> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let max = 40.0;
    let curve = ThrustCurve::QuadraticSigned;
    let t = |position: [f64; 3], direction: [f64; 3]| Thruster { position, direction, max_thrust: max, curve };
    vec![
        // horizontal, z slightly below the origin
        t([0.156, 0.111, 0.085], [h, -h, 0.0]),
        t([0.156, -0.111, 0.085], [h, h, 0.0]),
        t([-0.156, 0.111, 0.085], [h, h, 0.0]),
        t([-0.156, -0.111, 0.085], [h, -h, 0.0]),
        // vertical
        t([0.120, 0.218, 0.0], [0.0, 0.0, 1.0]),
        t([0.120, -0.218, 0.0], [0.0, 0.0, 1.0]),
        t([-0.120, 0.218, 0.0], [0.0, 0.0, 1.0]),
        t([-0.120, -0.218, 0.0], [0.0, 0.0, 1.0]),
    ]
}
