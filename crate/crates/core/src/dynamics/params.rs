use std::path::Path;

use nalgebra::{Cholesky, Matrix3, Matrix6, Vector3, Vector6, U6};
use serde::{Deserialize, Serialize};

use crate::thrusters::{heavy_layout, LayoutError, Thruster, ThrusterLayout};

/// Standard gravity, m/s².
pub const GRAVITY: f64 = 9.81;

/// Physical coefficients of the vehicle. This is the on-disk schema of the
/// vehicle parameter file; matrices are row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleParams {
    /// Dry mass, kg.
    pub mass: f64,
    /// Inertia tensor about the body origin, kg·m².
    pub inertia: [[f64; 3]; 3],
    /// Center of gravity in the body frame, m.
    pub r_g: [f64; 3],
    /// Center of buoyancy in the body frame, m.
    pub r_b: [f64; 3],
    /// Weight W, N.
    pub weight: f64,
    /// Buoyancy B, N.
    pub buoyancy: f64,
    /// Added mass M_A (positive-definite convention).
    pub added_mass: [[f64; 6]; 6],
    /// Linear damping matrix.
    pub damping_linear: [[f64; 6]; 6],
    /// Per-axis quadratic damping coefficients.
    pub damping_quadratic: [f64; 6],
    pub thrusters: Vec<Thruster>,
}

#[derive(Debug, thiserror::Error)]
pub enum ParamsError {
    #[error("parameter `{0}` is not finite")]
    NonFinite(&'static str),
    #[error("mass must be positive, got {0}")]
    NonPositiveMass(f64),
    #[error("weight and buoyancy must be non-negative")]
    NegativeLoad,
    #[error("`{0}` must be symmetric")]
    NotSymmetric(&'static str),
    #[error("`{0}` must be positive definite")]
    NotPositiveDefinite(&'static str),
    #[error("linear damping must be positive semidefinite (min eigenvalue of symmetric part {0})")]
    DampingNotPsd(f64),
    #[error("quadratic damping coefficients must be non-negative")]
    NegativeQuadraticDamping,
    #[error(transparent)]
    Layout(#[from] LayoutError),
    #[error("cannot read vehicle parameter file: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse vehicle parameter file: {0}")]
    Parse(#[from] toml::de::Error),
}

fn diag6(d: [f64; 6]) -> [[f64; 6]; 6] {
    let mut m = [[0.0; 6]; 6];
    for i in 0..6 {
        m[i][i] = d[i];
    }
    m
}

impl VehicleParams {
    /// BlueROV2 Heavy class defaults. Hydrodynamic coefficients follow
    /// published identification results for this vehicle family; buoyancy is
    /// slightly positive as on the real vehicle. Engineering defaults only.
    pub fn bluerov2_heavy() -> Self {
        let mass = 13.5;
        Self {
            mass,
            inertia: [[0.26, 0.0, 0.0], [0.0, 0.23, 0.0], [0.0, 0.0, 0.37]],
            r_g: [0.0, 0.0, 0.02],
            r_b: [0.0, 0.0, 0.0],
            weight: mass * GRAVITY,
            buoyancy: mass * GRAVITY + 1.5,
            added_mass: diag6([6.36, 7.12, 18.68, 0.189, 0.135, 0.222]),
            damping_linear: diag6([13.7, 0.0, 33.0, 0.0, 0.8, 0.0]),
            damping_quadratic: [141.0, 217.0, 190.0, 1.19, 0.47, 1.5],
            thrusters: heavy_layout(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ParamsError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ParamsError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("vehicle params always serialize")
    }

    /// Rigid-body mass matrix M_RB about the body origin.
    pub fn rigid_body_mass(&self) -> Matrix6<f64> {
        let m = self.mass;
        let sg = skew(&Vector3::from(self.r_g));
        let inertia = Matrix3::from_fn(|i, j| self.inertia[i][j]);
        let mut out = Matrix6::zeros();
        out.fixed_view_mut::<3, 3>(0, 0).copy_from(&(Matrix3::identity() * m));
        out.fixed_view_mut::<3, 3>(0, 3).copy_from(&(-sg * m));
        out.fixed_view_mut::<3, 3>(3, 0).copy_from(&(sg * m));
        out.fixed_view_mut::<3, 3>(3, 3).copy_from(&inertia);
        out
    }

    pub fn added_mass_matrix(&self) -> Matrix6<f64> {
        Matrix6::from_fn(|i, j| self.added_mass[i][j])
    }

    /// Checks every invariant and returns the simulation-ready model.
    pub fn validate(self) -> Result<Vehicle, ParamsError> {
        Vehicle::new(self)
    }
}

/// Skew-symmetric cross-product matrix: `skew(a) * b == a × b`.
pub(crate) fn skew(a: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -a.z, a.y, a.z, 0.0, -a.x, -a.y, a.x, 0.0)
}

fn is_symmetric<const N: usize>(m: &[[f64; N]; N]) -> bool {
    let scale = m.iter().flatten().fold(0.0f64, |acc, x| acc.max(x.abs())).max(1.0);
    (0..N).all(|i| (0..N).all(|j| (m[i][j] - m[j][i]).abs() <= 1e-9 * scale))
}

fn all_finite<'a>(name: &'static str, mut values: impl Iterator<Item = &'a f64>) -> Result<(), ParamsError> {
    if values.all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(ParamsError::NonFinite(name))
    }
}

/// Validated vehicle with the total mass matrix factored once.
#[derive(Debug, Clone)]
pub struct Vehicle {
    params: VehicleParams,
    pub(crate) mass: Matrix6<f64>,
    pub(crate) mass_factor: Cholesky<f64, U6>,
    pub(crate) damping_linear: Matrix6<f64>,
    pub(crate) damping_quadratic: Vector6<f64>,
    pub(crate) r_g: Vector3<f64>,
    pub(crate) r_b: Vector3<f64>,
    layout: ThrusterLayout,
}

impl Vehicle {
    pub fn new(params: VehicleParams) -> Result<Self, ParamsError> {
        let p = &params;
        let scalars = [("mass", p.mass), ("weight", p.weight), ("buoyancy", p.buoyancy)];
        for (name, v) in scalars {
            if !v.is_finite() {
                return Err(ParamsError::NonFinite(name));
            }
        }
        all_finite("inertia", p.inertia.iter().flatten())?;
        all_finite("r_g", p.r_g.iter())?;
        all_finite("r_b", p.r_b.iter())?;
        all_finite("added_mass", p.added_mass.iter().flatten())?;
        all_finite("damping_linear", p.damping_linear.iter().flatten())?;
        all_finite("damping_quadratic", p.damping_quadratic.iter())?;

        if p.mass <= 0.0 {
            return Err(ParamsError::NonPositiveMass(p.mass));
        }
        if p.weight < 0.0 || p.buoyancy < 0.0 {
            return Err(ParamsError::NegativeLoad);
        }
        if !is_symmetric(&p.inertia) {
            return Err(ParamsError::NotSymmetric("inertia"));
        }
        if Cholesky::new(Matrix3::from_fn(|i, j| p.inertia[i][j])).is_none() {
            return Err(ParamsError::NotPositiveDefinite("inertia"));
        }
        if !is_symmetric(&p.added_mass) {
            return Err(ParamsError::NotSymmetric("added_mass"));
        }
        if p.damping_quadratic.iter().any(|d| *d < 0.0) {
            return Err(ParamsError::NegativeQuadraticDamping);
        }
        let damping_linear = Matrix6::from_fn(|i, j| p.damping_linear[i][j]);
        let sym = (damping_linear + damping_linear.transpose()) * 0.5;
        let min_eig = sym.symmetric_eigenvalues().min();
        if min_eig < -1e-9 * sym.amax().max(1.0) {
            return Err(ParamsError::DampingNotPsd(min_eig));
        }

        let mass = p.rigid_body_mass() + p.added_mass_matrix();
        // Symmetrize away round-off so the Coriolis construction stays skew.
        let mass = (mass + mass.transpose()) * 0.5;
        let mass_factor = Cholesky::new(mass).ok_or(ParamsError::NotPositiveDefinite("M_RB + M_A"))?;
        let layout = ThrusterLayout::new(p.thrusters.clone())?;

        Ok(Self {
            mass,
            mass_factor,
            damping_linear,
            damping_quadratic: Vector6::from(p.damping_quadratic),
            r_g: Vector3::from(p.r_g),
            r_b: Vector3::from(p.r_b),
            layout,
            params,
        })
    }

    pub fn params(&self) -> &VehicleParams {
        &self.params
    }

    /// Total mass matrix M_RB + M_A.
    pub fn mass_matrix(&self) -> &Matrix6<f64> {
        &self.mass
    }

    pub fn thrusters(&self) -> &ThrusterLayout {
        &self.layout
    }

    pub fn n_thrusters(&self) -> usize {
        self.layout.len()
    }
}

impl PartialEq for Vehicle {
    fn eq(&self, other: &Self) -> bool {
        self.params == other.params
    }
}
