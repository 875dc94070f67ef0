//! Three-link spatial arm: DH kinematics and trace-form Lagrangian dynamics.
//!
//! The torque engine works for any number of revolute joints described by
//! standard DH rows and per-link pseudoinertia matrices; the writing arm
//! instantiates it with three links (vertical torso-to-shoulder link, upper
//! arm, forearm-plus-pen). Gravity always acts along -z of the base frame;
//! the writing plane is horizontal at a fixed height.

use nalgebra::{Matrix4, RowVector4, Vector3, Vector4};

use crate::error::{Error, Result};
use crate::features::differentiate;
use crate::ingest::TrajectorySI;
use crate::robot2d::REACH_TOL;

/// Standard DH row for a revolute joint; the joint angle is the variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DhRow {
    /// Offset along the previous z-axis.
    pub d: f64,
    /// Offset along the new x-axis.
    pub a: f64,
    /// Twist about the new x-axis.
    pub alpha: f64,
}

/// Homogeneous transform of one DH row:
/// `Rot_z(theta) * Trans_z(d) * Trans_x(a) * Rot_x(alpha)`.
pub fn dh_transform(theta: f64, row: &DhRow) -> Matrix4<f64> {
    let (st, ct) = theta.sin_cos();
    let (sa, ca) = row.alpha.sin_cos();
    Matrix4::new(
        ct, -st * ca, st * sa, row.a * ct, //
        st, ct * ca, -ct * sa, row.a * st, //
        0.0, sa, ca, row.d, //
        0.0, 0.0, 0.0, 1.0,
    )
}

/// Pseudoinertia (4x4 second-moment matrix) of a thin uniform rod in its own
/// link frame: mass `m`, length `len`, direction `axis`, center of mass at
/// `com`. The rod has transverse moment `m len^2 / 12` about its center and
/// zero longitudinal moment.
pub fn rod_pseudo_inertia(m: f64, len: f64, axis: Vector3<f64>, com: Vector3<f64>) -> Matrix4<f64> {
    let u = axis.normalize();
    let second = m * len * len / 12.0 * u * u.transpose() + m * com * com.transpose();
    let mut j = Matrix4::zeros();
    j.fixed_view_mut::<3, 3>(0, 0).copy_from(&second);
    j.fixed_view_mut::<3, 1>(0, 3).copy_from(&(m * com));
    j.fixed_view_mut::<1, 3>(3, 0).copy_from(&(m * com.transpose()));
    j[(3, 3)] = m;
    j
}

/// Generic revolute-joint arm in the trace formulation: torques come from
/// first and second partials of the link frames with respect to the joint
/// angles, contracted against the link pseudoinertias.
#[derive(Debug, Clone)]
pub struct LagrangianArm {
    rows: Vec<DhRow>,
    pseudo: Vec<Matrix4<f64>>,
    com: Vec<Vector4<f64>>,
    masses: Vec<f64>,
    /// Gravity acceleration as a row vector `[gx, gy, gz, 0]`.
    gravity: RowVector4<f64>,
}

/// Generator of a rotation about the local z-axis, applied on the left of a
/// joint's DH transform to differentiate it.
fn rot_z_generator() -> Matrix4<f64> {
    let mut q = Matrix4::zeros();
    q[(0, 1)] = -1.0;
    q[(1, 0)] = 1.0;
    q
}

/// Per-pose products of link transforms: `seg[a][b]` maps frame `b` into
/// frame `a` coordinates (`a <= b`, both 0-based frame indices).
struct FrameTable {
    seg: Vec<Vec<Matrix4<f64>>>,
    n: usize,
}

impl FrameTable {
    fn new(rows: &[DhRow], q: &[f64]) -> Self {
        let n = rows.len();
        let links: Vec<Matrix4<f64>> = (0..n).map(|j| dh_transform(q[j], &rows[j])).collect();
        let mut seg = vec![vec![Matrix4::identity(); n + 1]; n + 1];
        for a in 0..=n {
            for b in a + 1..=n {
                seg[a][b] = seg[a][b - 1] * links[b - 1];
            }
        }
        FrameTable { seg, n }
    }

    /// `0 T i` for 1-based frame `i`.
    fn frame(&self, i: usize) -> &Matrix4<f64> {
        &self.seg[0][i]
    }

    /// First partial of frame `i` with respect to joint `j` (1-based).
    fn partial(&self, i: usize, j: usize) -> Matrix4<f64> {
        if j > i || i > self.n {
            return Matrix4::zeros();
        }
        self.seg[0][j - 1] * rot_z_generator() * self.seg[j - 1][i]
    }

    /// Second partial of frame `i` with respect to joints `j` and `k`.
    fn second_partial(&self, i: usize, j: usize, k: usize) -> Matrix4<f64> {
        let (a, b) = (j.min(k), j.max(k));
        if b > i || i > self.n {
            return Matrix4::zeros();
        }
        let g = rot_z_generator();
        self.seg[0][a - 1] * g * self.seg[a - 1][b - 1] * g * self.seg[b - 1][i]
    }
}

impl LagrangianArm {
    pub fn new(
        rows: Vec<DhRow>,
        pseudo: Vec<Matrix4<f64>>,
        com: Vec<Vector3<f64>>,
        masses: Vec<f64>,
        gravity: Vector3<f64>,
    ) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::contract("arm needs at least one joint".to_string()));
        }
        if pseudo.len() != n || com.len() != n || masses.len() != n {
            return Err(Error::contract(format!(
                "expected {n} pseudoinertias, COMs and masses, got {}, {} and {}",
                pseudo.len(),
                com.len(),
                masses.len()
            )));
        }
        Ok(LagrangianArm {
            rows,
            pseudo,
            com: com.iter().map(|c| Vector4::new(c.x, c.y, c.z, 1.0)).collect(),
            masses,
            gravity: RowVector4::new(gravity.x, gravity.y, gravity.z, 0.0),
        })
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[DhRow] {
        &self.rows
    }

    pub fn pseudo_inertia(&self, link: usize) -> &Matrix4<f64> {
        &self.pseudo[link]
    }

    /// Cumulative frames `0 T 1 .. 0 T n`.
    pub fn frames(&self, q: &[f64]) -> Vec<Matrix4<f64>> {
        let table = FrameTable::new(&self.rows, q);
        (1..=self.n()).map(|i| *table.frame(i)).collect()
    }

    /// `d (0 T i) / d q_j`, 1-based indices.
    pub fn frame_partial(&self, q: &[f64], i: usize, j: usize) -> Matrix4<f64> {
        FrameTable::new(&self.rows, q).partial(i, j)
    }

    /// `d^2 (0 T i) / (d q_j d q_k)`, 1-based indices.
    pub fn frame_second_partial(&self, q: &[f64], i: usize, j: usize, k: usize) -> Matrix4<f64> {
        FrameTable::new(&self.rows, q).second_partial(i, j, k)
    }

    pub fn inertia_matrix(&self, q: &[f64]) -> Vec<Vec<f64>> {
        let table = FrameTable::new(&self.rows, q);
        self.inertia_with(&table)
    }

    fn inertia_with(&self, table: &FrameTable) -> Vec<Vec<f64>> {
        let n = self.n();
        let partials: Vec<Vec<Matrix4<f64>>> = (1..=n)
            .map(|k| (1..=n).map(|j| table.partial(k, j)).collect())
            .collect();
        let mut d = vec![vec![0.0; n]; n];
        for i in 1..=n {
            for j in i..=n {
                let mut sum = 0.0;
                for k in j.max(i)..=n {
                    let uj = &partials[k - 1][j - 1];
                    let ui = &partials[k - 1][i - 1];
                    sum += (uj * self.pseudo[k - 1] * ui.transpose()).trace();
                }
                d[i - 1][j - 1] = sum;
                d[j - 1][i - 1] = sum;
            }
        }
        d
    }

    pub fn coriolis_vector(&self, q: &[f64], dq: &[f64]) -> Vec<f64> {
        let table = FrameTable::new(&self.rows, q);
        self.coriolis_with(&table, dq)
    }

    fn coriolis_with(&self, table: &FrameTable, dq: &[f64]) -> Vec<f64> {
        let n = self.n();
        let mut h = vec![0.0; n];
        for i in 1..=n {
            let mut sum = 0.0;
            for k in 1..=n {
                for m in 1..=n {
                    let weight = dq[k - 1] * dq[m - 1];
                    if weight == 0.0 {
                        continue;
                    }
                    let mut hikm = 0.0;
                    for j in i.max(k).max(m)..=n {
                        let u2 = table.second_partial(j, k, m);
                        let ui = table.partial(j, i);
                        hikm += (u2 * self.pseudo[j - 1] * ui.transpose()).trace();
                    }
                    sum += hikm * weight;
                }
            }
            h[i - 1] = sum;
        }
        h
    }

    pub fn gravity_vector(&self, q: &[f64]) -> Vec<f64> {
        let table = FrameTable::new(&self.rows, q);
        self.gravity_with(&table)
    }

    fn gravity_with(&self, table: &FrameTable) -> Vec<f64> {
        let n = self.n();
        let mut c = vec![0.0; n];
        for i in 1..=n {
            let mut sum = 0.0;
            for j in i..=n {
                let u = table.partial(j, i);
                sum += -self.masses[j - 1] * (self.gravity * u * self.com[j - 1])[(0, 0)];
            }
            c[i - 1] = sum;
        }
        c
    }

    /// Inverse dynamics for one joint state:
    /// `tau = D(q) qdd + H(q, qd) + C(q)`.
    pub fn torque(&self, q: &[f64], dq: &[f64], ddq: &[f64]) -> Vec<f64> {
        let n = self.n();
        debug_assert!(q.len() == n && dq.len() == n && ddq.len() == n);
        let table = FrameTable::new(&self.rows, q);
        let d = self.inertia_with(&table);
        let h = self.coriolis_with(&table, dq);
        let c = self.gravity_with(&table);
        (0..n)
            .map(|i| (0..n).map(|j| d[i][j] * ddq[j]).sum::<f64>() + h[i] + c[i])
            .collect()
    }
}

/// Placement of the horizontal writing plane inside the arm's workspace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Placement3d {
    /// Writing height above the base.
    pub z: f64,
    /// Innermost horizontal reach at that height.
    pub min_reach: f64,
    /// Outermost horizontal reach at that height.
    pub max_reach: f64,
    /// Anchor radius: first signature sample lands at `(offset_x, 0, z)`.
    pub offset_x: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Arm3d {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
    pub g: f64,
}

impl Default for Arm3d {
    fn default() -> Self {
        Arm3d {
            l1: 0.6644,
            l2: 0.2820,
            l3: 0.2643,
            m1: 33.9458,
            m2: 1.8425,
            m3: 1.1132,
            g: 9.81,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Path3d {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub dt: f64,
}

impl Path3d {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointTrajectory3d {
    pub q: [Vec<f64>; 3],
    pub dq: [Vec<f64>; 3],
    pub ddq: [Vec<f64>; 3],
    pub dt: f64,
}

impl JointTrajectory3d {
    pub fn from_angles(q: [Vec<f64>; 3], dt: f64) -> Result<Self> {
        if q[1].len() != q[0].len() || q[2].len() != q[0].len() {
            return Err(Error::contract("joint angle series must have equal lengths".to_string()));
        }
        let diff = |v: &Vec<f64>, order| differentiate(v, dt, order);
        let dq = [diff(&q[0], 1)?, diff(&q[1], 1)?, diff(&q[2], 1)?];
        let ddq = [diff(&q[0], 2)?, diff(&q[1], 2)?, diff(&q[2], 2)?];
        Ok(JointTrajectory3d { q, dq, ddq, dt })
    }

    pub fn from_states(q: [Vec<f64>; 3], dq: [Vec<f64>; 3], ddq: [Vec<f64>; 3], dt: f64) -> Result<Self> {
        let n = q[0].len();
        for series in q.iter().chain(&dq).chain(&ddq) {
            if series.len() != n {
                return Err(Error::contract("state series must have equal lengths".to_string()));
            }
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::contract(format!("dt must be positive, got {dt}")));
        }
        Ok(JointTrajectory3d { q, dq, ddq, dt })
    }

    pub fn len(&self) -> usize {
        self.q[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.q[0].is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TorqueTrajectory3d {
    pub tau: [Vec<f64>; 3],
    pub dt: f64,
}

impl TorqueTrajectory3d {
    pub fn len(&self) -> usize {
        self.tau[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau[0].is_empty()
    }
}

impl Arm3d {
    pub fn new(l1: f64, l2: f64, l3: f64, m1: f64, m2: f64, m3: f64, g: f64) -> Result<Self> {
        for (name, v) in [("l1", l1), ("l2", l2), ("l3", l3)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::contract(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("m1", m1), ("m2", m2), ("m3", m3), ("g", g)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::contract(format!("{name} must be non-negative, got {v}")));
            }
        }
        Ok(Arm3d {
            l1,
            l2,
            l3,
            m1,
            m2,
            m3,
            g,
        })
    }

    pub fn dh_rows(&self) -> [DhRow; 3] {
        [
            DhRow {
                d: self.l1,
                a: 0.0,
                alpha: std::f64::consts::FRAC_PI_2,
            },
            DhRow {
                d: 0.0,
                a: self.l2,
                alpha: 0.0,
            },
            DhRow {
                d: 0.0,
                a: self.l3,
                alpha: 0.0,
            },
        ]
    }

    /// Dynamics model with thin-rod links. Link 1 lies along its frame's
    /// y-axis (the base z-axis after the pi/2 twist); links 2 and 3 lie along
    /// their x-axes, reaching back from the frame origin at the distal joint.
    pub fn model(&self) -> LagrangianArm {
        let coms = [
            Vector3::new(0.0, -self.l1 / 2.0, 0.0),
            Vector3::new(-self.l2 / 2.0, 0.0, 0.0),
            Vector3::new(-self.l3 / 2.0, 0.0, 0.0),
        ];
        let axes = [Vector3::y(), Vector3::x(), Vector3::x()];
        let lens = [self.l1, self.l2, self.l3];
        let masses = [self.m1, self.m2, self.m3];
        let pseudo = (0..3)
            .map(|k| rod_pseudo_inertia(masses[k], lens[k], axes[k], coms[k]))
            .collect();
        LagrangianArm::new(
            self.dh_rows().to_vec(),
            pseudo,
            coms.to_vec(),
            masses.to_vec(),
            Vector3::new(0.0, 0.0, -self.g),
        )
        .expect("three consistent links")
    }

    /// Pen-tip position from the DH chain.
    pub fn fk(&self, q: [f64; 3]) -> [f64; 3] {
        let rows = self.dh_rows();
        let mut t = Matrix4::identity();
        for (k, row) in rows.iter().enumerate() {
            t *= dh_transform(q[k], row);
        }
        [t[(0, 3)], t[(1, 3)], t[(2, 3)]]
    }

    fn cos_elbow(&self, r2: f64) -> f64 {
        (r2 - self.l2 * self.l2 - self.l3 * self.l3) / (2.0 * self.l2 * self.l3)
    }

    /// Closed-form inverse kinematics, elbow-up branch (`q3` in `[0, pi]`).
    pub fn ik(&self, p: [f64; 3]) -> Result<[f64; 3]> {
        let [x, y, z] = p;
        if x == 0.0 && y == 0.0 {
            return Err(Error::SingularAxis { index: 0 });
        }
        let q1 = y.atan2(x);
        let r = x.hypot(y);
        let s = z - self.l1;
        let c3 = self.cos_elbow(r * r + s * s);
        if c3 > 1.0 + REACH_TOL || c3 < -1.0 - REACH_TOL {
            return Err(Error::Workspace {
                index: 0,
                x,
                y,
                z: Some(z),
            });
        }
        let c3 = c3.clamp(-1.0, 1.0);
        let s3 = (1.0 - c3 * c3).sqrt();
        let q3 = s3.atan2(c3);
        let q2 = s.atan2(r) - (self.l3 * s3).atan2(self.l2 + self.l3 * c3);
        Ok([q1, q2, q3])
    }

    /// Writing-plane placement: height `0.3 * l1`, anchor radius 35% of the
    /// way from the innermost to the outermost reach at that height.
    pub fn placement(&self) -> Result<Placement3d> {
        let z = 0.3 * self.l1;
        let fold = (self.l1 - z - self.l2) / self.l3;
        if !(-1.0..=1.0).contains(&fold) {
            return Err(Error::contract(format!(
                "writing height {z} is outside the elbow fold range"
            )));
        }
        let min_reach = self.l3 * fold.acos().sin();
        let radicand = (self.l2 + self.l3).powi(2) - (self.l1 - z).powi(2);
        if radicand <= 0.0 {
            return Err(Error::contract(format!("no reachable ring at writing height {z}")));
        }
        let max_reach = radicand.sqrt();
        Ok(Placement3d {
            z,
            min_reach,
            max_reach,
            offset_x: min_reach + 0.35 * (max_reach - min_reach),
        })
    }

    /// Lifts a planar signature onto the horizontal writing plane, first
    /// sample at `(offset_x, 0, z)`, and verifies every point is reachable.
    pub fn place(&self, traj: &TrajectorySI) -> Result<Path3d> {
        if traj.is_empty() {
            return Err(Error::contract("cannot place an empty trajectory".to_string()));
        }
        let placement = self.placement()?;
        let dx = placement.offset_x - traj.x()[0];
        let dy = -traj.y()[0];
        let z = placement.z;
        let s = z - self.l1;
        let mut x = Vec::with_capacity(traj.len());
        let mut y = Vec::with_capacity(traj.len());
        for k in 0..traj.len() {
            let px = traj.x()[k] + dx;
            let py = traj.y()[k] + dy;
            if px == 0.0 && py == 0.0 {
                return Err(Error::SingularAxis { index: k });
            }
            let c3 = self.cos_elbow(px * px + py * py + s * s);
            if c3 > 1.0 + REACH_TOL || c3 < -1.0 - REACH_TOL {
                return Err(Error::Workspace {
                    index: k,
                    x: px,
                    y: py,
                    z: Some(z),
                });
            }
            x.push(px);
            y.push(py);
        }
        Ok(Path3d {
            z: vec![z; x.len()],
            x,
            y,
            dt: traj.dt(),
        })
    }

    /// Per-sample inverse kinematics plus finite-difference joint velocities
    /// and accelerations.
    pub fn ik_trajectory(&self, path: &Path3d) -> Result<JointTrajectory3d> {
        let mut q = [Vec::new(), Vec::new(), Vec::new()];
        for k in 0..path.len() {
            let angles = self.ik([path.x[k], path.y[k], path.z[k]]).map_err(|e| match e {
                Error::Workspace { x, y, z, .. } => Error::Workspace { index: k, x, y, z },
                Error::SingularAxis { .. } => Error::SingularAxis { index: k },
                other => other,
            })?;
            for j in 0..3 {
                q[j].push(angles[j]);
            }
        }
        JointTrajectory3d::from_angles(q, path.dt)
    }

    /// Torque for a single joint state.
    pub fn torque(&self, q: [f64; 3], dq: [f64; 3], ddq: [f64; 3]) -> [f64; 3] {
        let t = self.model().torque(&q, &dq, &ddq);
        [t[0], t[1], t[2]]
    }

    pub fn inverse_dynamics(&self, jt: &JointTrajectory3d) -> Result<TorqueTrajectory3d> {
        if jt.is_empty() {
            return Err(Error::contract("empty joint trajectory".to_string()));
        }
        let model = self.model();
        let mut tau = [
            Vec::with_capacity(jt.len()),
            Vec::with_capacity(jt.len()),
            Vec::with_capacity(jt.len()),
        ];
        for k in 0..jt.len() {
            let t = model.torque(
                &[jt.q[0][k], jt.q[1][k], jt.q[2][k]],
                &[jt.dq[0][k], jt.dq[1][k], jt.dq[2][k]],
                &[jt.ddq[0][k], jt.ddq[1][k], jt.ddq[2][k]],
            );
            for j in 0..3 {
                tau[j].push(t[j]);
            }
        }
        Ok(TorqueTrajectory3d { tau, dt: jt.dt })
    }
}
