//! Planar two-link arm: closed-form kinematics and inverse dynamics.
//!
//! Joint angles are measured at the shoulder (`q1`, from the writing plane's
//! x-axis) and elbow (`q2`, relative to the first link). Torques follow
//! `tau = D(q) qdd + H(q, qd) + C(q)` with gravity acting along -x of the
//! writing plane when the plane is vertical.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use crate::error::{Error, Result};
use crate::features::differentiate;
use crate::ingest::TrajectorySI;

/// Tolerance for accepting `|cos q2|` marginally above 1 before clamping.
pub const REACH_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GravityMode {
    /// Writing plane horizontal: gravity does no work, C(q) = 0.
    Horizontal,
    /// Writing plane vertical: gravity acts in-plane (the default).
    Vertical,
}

impl GravityMode {
    pub fn as_str(self) -> &'static str {
        match self {
            GravityMode::Horizontal => "horizontal",
            GravityMode::Vertical => "vertical",
        }
    }
}

/// Two-link arm parameters. Defaults model a human writing arm: link 1 is
/// the forearm (elbow to wrist), link 2 the hand (wrist to pen tip).
#[derive(Debug, Clone, PartialEq)]
pub struct Arm2d {
    pub l1: f64,
    pub l2: f64,
    /// Center-of-mass distances from each joint.
    pub lc1: f64,
    pub lc2: f64,
    pub m1: f64,
    pub m2: f64,
    /// Moments of inertia about each link's center of mass.
    pub i1: f64,
    pub i2: f64,
    pub g: f64,
    pub gravity: GravityMode,
}

impl Default for Arm2d {
    fn default() -> Self {
        Arm2d {
            l1: 0.2820,
            l2: 0.2643,
            lc1: 0.1447,
            lc2: 0.1090,
            m1: 1.8425,
            m2: 1.1132,
            i1: 0.0133,
            i2: 0.0021,
            g: 9.81,
            gravity: GravityMode::Vertical,
        }
    }
}

/// Joint-space trajectory with finite-difference velocities and
/// accelerations.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTrajectory2d {
    pub q1: Vec<f64>,
    pub q2: Vec<f64>,
    pub dq1: Vec<f64>,
    pub dq2: Vec<f64>,
    pub ddq1: Vec<f64>,
    pub ddq2: Vec<f64>,
    pub dt: f64,
}

impl JointTrajectory2d {
    /// Builds the trajectory from angle series, deriving velocities and
    /// accelerations by finite differences.
    pub fn from_angles(q1: Vec<f64>, q2: Vec<f64>, dt: f64) -> Result<Self> {
        if q1.len() != q2.len() {
            return Err(Error::contract(format!(
                "q1 has {} samples, q2 has {}",
                q1.len(),
                q2.len()
            )));
        }
        let dq1 = differentiate(&q1, dt, 1)?;
        let dq2 = differentiate(&q2, dt, 1)?;
        let ddq1 = differentiate(&q1, dt, 2)?;
        let ddq2 = differentiate(&q2, dt, 2)?;
        Ok(JointTrajectory2d {
            q1,
            q2,
            dq1,
            dq2,
            ddq1,
            ddq2,
            dt,
        })
    }

    /// Builds the trajectory from explicitly known state series (for example
    /// an analytic reference trajectory).
    pub fn from_states(
        q1: Vec<f64>,
        q2: Vec<f64>,
        dq1: Vec<f64>,
        dq2: Vec<f64>,
        ddq1: Vec<f64>,
        ddq2: Vec<f64>,
        dt: f64,
    ) -> Result<Self> {
        let n = q1.len();
        for (name, v) in [
            ("q2", &q2),
            ("dq1", &dq1),
            ("dq2", &dq2),
            ("ddq1", &ddq1),
            ("ddq2", &ddq2),
        ] {
            if v.len() != n {
                return Err(Error::contract(format!("{name} has {} samples, expected {n}", v.len())));
            }
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::contract(format!("dt must be positive, got {dt}")));
        }
        Ok(JointTrajectory2d {
            q1,
            q2,
            dq1,
            dq2,
            ddq1,
            ddq2,
            dt,
        })
    }

    pub fn len(&self) -> usize {
        self.q1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q1.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TorqueTrajectory2d {
    pub tau1: Vec<f64>,
    pub tau2: Vec<f64>,
    pub dt: f64,
}

impl TorqueTrajectory2d {
    pub fn len(&self) -> usize {
        self.tau1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau1.is_empty()
    }
}

impl Arm2d {
    pub fn new(
        l1: f64,
        l2: f64,
        lc1: f64,
        lc2: f64,
        m1: f64,
        m2: f64,
        i1: f64,
        i2: f64,
        g: f64,
        gravity: GravityMode,
    ) -> Result<Self> {
        for (name, v) in [
            ("l1", l1),
            ("l2", l2),
            ("lc1", lc1),
            ("lc2", lc2),
            ("m1", m1),
            ("m2", m2),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::contract(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("i1", i1), ("i2", i2), ("g", g)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::contract(format!("{name} must be non-negative, got {v}")));
            }
        }
        Ok(Arm2d {
            l1,
            l2,
            lc1,
            lc2,
            m1,
            m2,
            i1,
            i2,
            g,
            gravity,
        })
    }

    pub fn with_gravity(mut self, gravity: GravityMode) -> Self {
        self.gravity = gravity;
        self
    }

    /// Pen-tip position for given joint angles.
    pub fn fk(&self, q1: f64, q2: f64) -> (f64, f64) {
        let x = self.l1 * q1.cos() + self.l2 * (q1 + q2).cos();
        let y = self.l1 * q1.sin() + self.l2 * (q1 + q2).sin();
        (x, y)
    }

    fn cos_elbow(&self, x: f64, y: f64) -> f64 {
        (x * x + y * y - self.l1 * self.l1 - self.l2 * self.l2) / (2.0 * self.l1 * self.l2)
    }

    /// Closed-form inverse kinematics, elbow-up branch (`q2` in `[0, pi]`).
    /// Targets outside the reachable annulus are rejected; the reported
    /// sample index is 0 and gets rewritten by trajectory-level callers.
    pub fn ik(&self, x: f64, y: f64) -> Result<(f64, f64)> {
        let c2 = self.cos_elbow(x, y);
        if c2 > 1.0 + REACH_TOL || c2 < -1.0 - REACH_TOL {
            return Err(Error::Workspace {
                index: 0,
                x,
                y,
                z: None,
            });
        }
        let c2 = c2.clamp(-1.0, 1.0);
        let s2 = (1.0 - c2 * c2).sqrt();
        let q2 = s2.atan2(c2);
        let q1 = y.atan2(x) - (self.l2 * s2).atan2(self.l1 + self.l2 * c2);
        Ok((q1, q2))
    }

    /// Nominal writing pose used as the placement anchor.
    pub fn anchor(&self) -> (f64, f64) {
        self.fk(FRAC_PI_4, FRAC_PI_2)
    }

    /// Rigidly translates a signature so its first sample lands on the
    /// anchor, and verifies every point is reachable.
    pub fn place(&self, traj: &TrajectorySI) -> Result<TrajectorySI> {
        if traj.is_empty() {
            return Err(Error::contract("cannot place an empty trajectory".to_string()));
        }
        let (ax, ay) = self.anchor();
        let placed = traj.translated(ax - traj.x()[0], ay - traj.y()[0]);
        for k in 0..placed.len() {
            let (x, y) = (placed.x()[k], placed.y()[k]);
            let c2 = self.cos_elbow(x, y);
            if c2 > 1.0 + REACH_TOL || c2 < -1.0 - REACH_TOL {
                return Err(Error::Workspace {
                    index: k,
                    x,
                    y,
                    z: None,
                });
            }
        }
        Ok(placed)
    }

    /// Per-sample inverse kinematics plus finite-difference joint velocities
    /// and accelerations.
    pub fn ik_trajectory(&self, traj: &TrajectorySI) -> Result<JointTrajectory2d> {
        let mut q1 = Vec::with_capacity(traj.len());
        let mut q2 = Vec::with_capacity(traj.len());
        for k in 0..traj.len() {
            let (a, b) = self.ik(traj.x()[k], traj.y()[k]).map_err(|e| match e {
                Error::Workspace { x, y, z, .. } => Error::Workspace { index: k, x, y, z },
                other => other,
            })?;
            q1.push(a);
            q2.push(b);
        }
        JointTrajectory2d::from_angles(q1, q2, traj.dt())
    }

    /// Inertia matrix `D(q)`; depends on the elbow angle only.
    pub fn inertia_matrix(&self, q2: f64) -> [[f64; 2]; 2] {
        let c2 = q2.cos();
        let d11 = self.m1 * self.lc1 * self.lc1
            + self.i1
            + self.m2 * (self.l1 * self.l1 + self.lc2 * self.lc2 + 2.0 * self.l1 * self.lc2 * c2)
            + self.i2;
        let d12 = self.m2 * (self.lc2 * self.lc2 + self.l1 * self.lc2 * c2) + self.i2;
        let d22 = self.m2 * self.lc2 * self.lc2 + self.i2;
        [[d11, d12], [d12, d22]]
    }

    /// Coriolis and centrifugal torques `H(q, qd)`.
    pub fn coriolis_vector(&self, q2: f64, dq1: f64, dq2: f64) -> [f64; 2] {
        let k = self.m2 * self.l1 * self.lc2 * q2.sin();
        [-k * (2.0 * dq1 * dq2 + dq2 * dq2), k * dq1 * dq1]
    }

    /// Gravity torques `C(q)`. Zero when the writing plane is horizontal.
    pub fn gravity_vector(&self, q1: f64, q2: f64) -> [f64; 2] {
        match self.gravity {
            GravityMode::Horizontal => [0.0, 0.0],
            GravityMode::Vertical => {
                let distal = self.m2 * self.lc2 * self.g * (q1 + q2).sin();
                [
                    -(self.m1 * self.lc1 + self.m2 * self.l1) * self.g * q1.sin() - distal,
                    -distal,
                ]
            }
        }
    }

    /// Torque for a single joint state.
    pub fn torque(&self, q: [f64; 2], dq: [f64; 2], ddq: [f64; 2]) -> [f64; 2] {
        let d = self.inertia_matrix(q[1]);
        let h = self.coriolis_vector(q[1], dq[0], dq[1]);
        let c = self.gravity_vector(q[0], q[1]);
        [
            d[0][0] * ddq[0] + d[0][1] * ddq[1] + h[0] + c[0],
            d[1][0] * ddq[0] + d[1][1] * ddq[1] + h[1] + c[1],
        ]
    }

    pub fn inverse_dynamics(&self, jt: &JointTrajectory2d) -> Result<TorqueTrajectory2d> {
        if jt.is_empty() {
            return Err(Error::contract("empty joint trajectory".to_string()));
        }
        let mut tau1 = Vec::with_capacity(jt.len());
        let mut tau2 = Vec::with_capacity(jt.len());
        for k in 0..jt.len() {
            let t = self.torque(
                [jt.q1[k], jt.q2[k]],
                [jt.dq1[k], jt.dq2[k]],
                [jt.ddq1[k], jt.ddq2[k]],
            );
            tau1.push(t[0]);
            tau2.push(t[1]);
        }
        Ok(TorqueTrajectory2d {
            tau1,
            tau2,
            dt: jt.dt,
        })
    }
}
