//! Independent oracles for the acceptance suite.
//!
//! Nothing here reuses the library's dynamics algebra. Torques come from
//! numerically differentiating a Lagrangian assembled from first principles:
//! center-of-mass and joint positions by plain trigonometry, their
//! velocities by the product rule on those expressions, and rod kinetic
//! energy as the line integral over the rod's endpoint velocities. The
//! elastic-matcher oracle enumerates every monotone alignment outright.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use sigdyn::robot2d::{Arm2d, GravityMode};
use sigdyn::robot3d::Arm3d;

/// Coordinate step for partial derivatives of the Lagrangian. The
/// Lagrangian is exactly quadratic in the joint velocities, so the
/// velocity partials have no truncation error and a relatively wide step
/// keeps rounding noise down.
const H: f64 = 3e-4;
/// Time step for the outer d/dt in the Euler-Lagrange form.
const DT: f64 = 1e-4;

pub struct Harmonic {
    pub amp: f64,
    pub omega: f64,
    pub phase: f64,
}

pub struct SmoothJoint {
    pub mean: f64,
    pub harmonics: Vec<Harmonic>,
}

impl SmoothJoint {
    fn q(&self, t: f64) -> f64 {
        self.mean
            + self
                .harmonics
                .iter()
                .map(|h| h.amp * (h.omega * t + h.phase).sin())
                .sum::<f64>()
    }

    fn dq(&self, t: f64) -> f64 {
        self.harmonics
            .iter()
            .map(|h| h.amp * h.omega * (h.omega * t + h.phase).cos())
            .sum()
    }

    fn ddq(&self, t: f64) -> f64 {
        -self
            .harmonics
            .iter()
            .map(|h| h.amp * h.omega * h.omega * (h.omega * t + h.phase).sin())
            .sum::<f64>()
    }
}

/// A joint trajectory that is smooth by construction, with exact
/// velocities and accelerations at any instant.
pub struct SmoothTraj {
    pub joints: Vec<SmoothJoint>,
}

impl SmoothTraj {
    pub fn random(rng: &mut ChaCha8Rng, n_joints: usize) -> SmoothTraj {
        let joints = (0..n_joints)
            .map(|_| SmoothJoint {
                mean: rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
                harmonics: (0..2)
                    .map(|_| Harmonic {
                        amp: rng.gen_range(0.2..0.6),
                        omega: std::f64::consts::TAU * rng.gen_range(0.5..1.5),
                        phase: rng.gen_range(0.0..std::f64::consts::TAU),
                    })
                    .collect(),
            })
            .collect();
        SmoothTraj { joints }
    }

    pub fn state(&self, t: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        (
            self.joints.iter().map(|j| j.q(t)).collect(),
            self.joints.iter().map(|j| j.dq(t)).collect(),
            self.joints.iter().map(|j| j.ddq(t)).collect(),
        )
    }
}

/// Torques from the Euler-Lagrange equations with the remaining derivatives
/// taken numerically: tau_i = d/dt (dL/dqd_i) - dL/dq_i.
pub fn euler_lagrange_torque<L>(lagrangian: &L, traj: &SmoothTraj, t: f64) -> Vec<f64>
where
    L: Fn(&[f64], &[f64]) -> f64,
{
    let n = traj.joints.len();
    let (q, dq, _) = traj.state(t);
    (0..n)
        .map(|i| {
            let mut qp = q.clone();
            let mut qm = q.clone();
            qp[i] += H;
            qm[i] -= H;
            let dl_dq = (lagrangian(&qp, &dq) - lagrangian(&qm, &dq)) / (2.0 * H);

            let momentum = |tt: f64| {
                let (qq, dqq, _) = traj.state(tt);
                let mut dp = dqq.clone();
                let mut dm = dqq;
                dp[i] += H;
                dm[i] -= H;
                (lagrangian(&qq, &dp) - lagrangian(&qq, &dm)) / (2.0 * H)
            };
            (momentum(t + DT) - momentum(t - DT)) / (2.0 * DT) - dl_dq
        })
        .collect()
}

/// Planar centers of mass and their velocities, by the product rule on
/// `c1 = lc1 (cos q1, sin q1)` and
/// `c2 = l1 (cos q1, sin q1) + lc2 (cos(q1+q2), sin(q1+q2))`.
fn com_motion_2d(arm: &Arm2d, q: &[f64], dq: &[f64]) -> ([f64; 2], [f64; 2], [f64; 2], [f64; 2]) {
    let (s1, c1) = q[0].sin_cos();
    let (s12, c12) = (q[0] + q[1]).sin_cos();
    let w12 = dq[0] + dq[1];
    let p1 = [arm.lc1 * c1, arm.lc1 * s1];
    let v1 = [-arm.lc1 * dq[0] * s1, arm.lc1 * dq[0] * c1];
    let p2 = [arm.l1 * c1 + arm.lc2 * c12, arm.l1 * s1 + arm.lc2 * s12];
    let v2 = [
        -arm.l1 * dq[0] * s1 - arm.lc2 * w12 * s12,
        arm.l1 * dq[0] * c1 + arm.lc2 * w12 * c12,
    ];
    (p1, v1, p2, v2)
}

pub fn kinetic_2d(arm: &Arm2d, q: &[f64], dq: &[f64]) -> f64 {
    let (_, v1, _, v2) = com_motion_2d(arm, q, dq);
    0.5 * arm.m1 * (v1[0] * v1[0] + v1[1] * v1[1])
        + 0.5 * arm.i1 * dq[0] * dq[0]
        + 0.5 * arm.m2 * (v2[0] * v2[0] + v2[1] * v2[1])
        + 0.5 * arm.i2 * (dq[0] + dq[1]) * (dq[0] + dq[1])
}

/// In the vertical writing mode gravity pulls along the plane's -x axis, so
/// potential energy is g times the x coordinate of each mass.
pub fn potential_2d(arm: &Arm2d, q: &[f64]) -> f64 {
    match arm.gravity {
        GravityMode::Horizontal => 0.0,
        GravityMode::Vertical => {
            let (p1, _, p2, _) = com_motion_2d(arm, q, &[0.0, 0.0]);
            arm.g * (arm.m1 * p1[0] + arm.m2 * p2[0])
        }
    }
}

pub fn lagrangian_2d(arm: &Arm2d) -> impl Fn(&[f64], &[f64]) -> f64 + '_ {
    |q: &[f64], dq: &[f64]| kinetic_2d(arm, q, dq) - potential_2d(arm, q)
}

pub fn energy_2d(arm: &Arm2d, q: &[f64], dq: &[f64]) -> f64 {
    kinetic_2d(arm, q, dq) + potential_2d(arm, q)
}

/// Elbow and wrist velocities of the spatial arm, by the product rule on
/// `E = (l2 c1 c2, l2 s1 c2, l1 + l2 s2)` and `W = E + l3 (c1 c23, s1 c23,
/// s23)` with the shoulder fixed at `(0, 0, l1)`.
fn joint_motion_3d(arm: &Arm3d, q: &[f64], dq: &[f64]) -> ([f64; 3], [f64; 3]) {
    let (s1, c1) = q[0].sin_cos();
    let (s2, c2) = q[1].sin_cos();
    let (s23, c23) = (q[1] + q[2]).sin_cos();
    let w23 = dq[1] + dq[2];
    let ve = [
        arm.l2 * (-s1 * dq[0] * c2 - c1 * s2 * dq[1]),
        arm.l2 * (c1 * dq[0] * c2 - s1 * s2 * dq[1]),
        arm.l2 * c2 * dq[1],
    ];
    let vw = [
        ve[0] + arm.l3 * (-s1 * dq[0] * c23 - c1 * s23 * w23),
        ve[1] + arm.l3 * (c1 * dq[0] * c23 - s1 * s23 * w23),
        ve[2] + arm.l3 * c23 * w23,
    ];
    (ve, vw)
}

/// Kinetic energy of the spatial arm as line integrals over its two moving
/// rods: a uniform rod with endpoint velocities va, vb carries
/// `m/6 (va.va + va.vb + vb.vb)`. The shoulder is stationary and the base
/// link only spins about its own axis, so neither adds kinetic energy.
pub fn kinetic_3d(arm: &Arm3d, q: &[f64], dq: &[f64]) -> f64 {
    let (ve, vw) = joint_motion_3d(arm, q, dq);
    let dot = |a: &[f64; 3], b: &[f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    arm.m2 / 6.0 * dot(&ve, &ve) + arm.m3 / 6.0 * (dot(&ve, &ve) + dot(&ve, &vw) + dot(&vw, &vw))
}

/// Gravity acts along -z; the constant base-link term is omitted since only
/// derivatives of the potential matter.
pub fn potential_3d(arm: &Arm3d, q: &[f64]) -> f64 {
    let s2 = q[1].sin();
    let s23 = (q[1] + q[2]).sin();
    arm.g
        * (arm.m2 * (arm.l1 + 0.5 * arm.l2 * s2)
            + arm.m3 * (arm.l1 + arm.l2 * s2 + 0.5 * arm.l3 * s23))
}

pub fn lagrangian_3d(arm: &Arm3d) -> impl Fn(&[f64], &[f64]) -> f64 + '_ {
    |q: &[f64], dq: &[f64]| kinetic_3d(arm, q, dq) - potential_3d(arm, q)
}

pub fn energy_3d(arm: &Arm3d, q: &[f64], dq: &[f64]) -> f64 {
    kinetic_3d(arm, q, dq) + potential_3d(arm, q)
}

/// Every monotone alignment between sequences of the given lengths, as
/// index pairs from `(0, 0)` to `(la-1, lb-1)` with steps that advance one
/// side or both.
pub fn monotone_paths(la: usize, lb: usize) -> Vec<Vec<(usize, usize)>> {
    let mut all = Vec::new();
    let mut current = vec![(0usize, 0usize)];
    grow(&mut all, &mut current, la - 1, lb - 1);
    all
}

fn grow(all: &mut Vec<Vec<(usize, usize)>>, current: &mut Vec<(usize, usize)>, ti: usize, tj: usize) {
    let &(i, j) = current.last().expect("path starts at the origin");
    if i == ti && j == tj {
        all.push(current.clone());
        return;
    }
    if i < ti {
        current.push((i + 1, j));
        grow(all, current, ti, tj);
        current.pop();
    }
    if j < tj {
        current.push((i, j + 1));
        grow(all, current, ti, tj);
        current.pop();
    }
    if i < ti && j < tj {
        current.push((i + 1, j + 1));
        grow(all, current, ti, tj);
        current.pop();
    }
}

/// Alignment-enumeration oracle: minimum total cost over all monotone
/// paths, shortest path among cost ties, normalized by that path length.
pub fn dtw_brute(a: &[f64], b: &[f64], paths: &[Vec<(usize, usize)>]) -> f64 {
    let mut best_cost = f64::INFINITY;
    let mut best_len = usize::MAX;
    for path in paths {
        let cost: f64 = path.iter().map(|&(i, j)| (a[i] - b[j]).abs()).sum();
        if cost < best_cost || (cost == best_cost && path.len() < best_len) {
            best_cost = cost;
            best_len = path.len();
        }
    }
    best_cost / best_len as f64
}
