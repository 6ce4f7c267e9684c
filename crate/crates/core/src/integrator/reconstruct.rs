//! Centreline and director-frame reconstruction from the strains.
//!
//! The orientation is carried as a quaternion with `q' = ½ q ⊗ (0, u)`, which
//! is `d_i' = u × d_i` for `d_i = R(q) e_i`, and the centreline follows
//! `r' = d3`.

use nalgebra::{Quaternion, UnitQuaternion, Vector3};

use super::{Flow, IntegratorOptions, Trajectory};
use crate::error::Result;
use crate::model::{rhs, strains, RodParams};
use crate::so3::Triple;
use crate::state::FieldState;

/// Quaternion `(w, x, y, z)` then `r`.
const FRAME_DIM: usize = 7;

fn frame_rhs(y: &[f64], u: &Triple, dy: &mut [f64]) {
    let q = Quaternion::new(y[0], y[1], y[2], y[3]);
    let dq = q * Quaternion::new(0.0, u[0], u[1], u[2]) * 0.5;
    dy[0] = dq.w;
    dy[1] = dq.i;
    dy[2] = dq.j;
    dy[3] = dq.k;
    let d3 = q.normalize() * Quaternion::new(0.0, 0.0, 0.0, 1.0) * q.normalize().conjugate();
    dy[4] = d3.i;
    dy[5] = d3.j;
    dy[6] = d3.k;
}

fn normalize_frame(y: &mut [f64]) {
    let norm = y[..4].iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 && norm.is_finite() {
        y[..4].iter_mut().for_each(|v| *v /= norm);
    }
}

fn pack_frame(frame0: &UnitQuaternion<f64>, r0: &Vector3<f64>) -> Vec<f64> {
    let q = frame0.quaternion();
    vec![q.w, q.i, q.j, q.k, r0[0], r0[1], r0[2]]
}

struct StrainDriven<U> {
    strain: U,
}

impl<U: Fn(f64) -> Triple> Flow for StrainDriven<U> {
    fn dim(&self) -> usize {
        FRAME_DIM
    }

    fn eval(&self, s: f64, y: &[f64], dy: &mut [f64]) {
        frame_rhs(y, &(self.strain)(s), dy);
    }

    fn project(&self, y: &mut [f64]) {
        normalize_frame(y);
    }
}

/// Frame and body state integrated together: `(q, r, m, n, ...)`.
struct Coupled {
    level: crate::state::HierarchyLevel,
    params: RodParams,
}

impl Flow for Coupled {
    fn dim(&self) -> usize {
        FRAME_DIM + self.level.dim()
    }

    fn eval(&self, _s: f64, y: &[f64], dy: &mut [f64]) {
        let Ok(state) = FieldState::from_slice(self.level, &y[FRAME_DIM..]) else {
            dy.fill(f64::NAN);
            return;
        };
        frame_rhs(y, &strains(&state.m(), &self.params), dy);
        rhs(&state, &self.params).write_into(&mut dy[FRAME_DIM..]);
    }

    fn project(&self, y: &mut [f64]) {
        normalize_frame(y);
    }
}

/// A reconstructed rod: centreline `r(s)` and orientation `q(s)`.
#[derive(Debug, Clone)]
pub struct FramedCurve {
    trajectory: Trajectory,
}

impl FramedCurve {
    pub fn trajectory(&self) -> &Trajectory {
        &self.trajectory
    }

    pub fn grid(&self) -> &[f64] {
        self.trajectory.grid()
    }

    fn raw(&self, s: f64) -> Vec<f64> {
        self.trajectory
            .interpolate(s)
            .unwrap_or_else(|| panic!("s = {s} outside the reconstructed range"))
    }

    pub fn position(&self, s: f64) -> Vector3<f64> {
        let y = self.raw(s);
        Vector3::new(y[4], y[5], y[6])
    }

    pub fn orientation(&self, s: f64) -> UnitQuaternion<f64> {
        let y = self.raw(s);
        UnitQuaternion::from_quaternion(Quaternion::new(y[0], y[1], y[2], y[3]))
    }

    /// Directors `d1, d2, d3` in the fixed frame.
    pub fn directors(&self, s: f64) -> [Vector3<f64>; 3] {
        let r = self.orientation(s).to_rotation_matrix();
        [0, 1, 2].map(|i| r.matrix().column(i).into_owned())
    }

    pub fn positions(&self) -> Vec<Vector3<f64>> {
        self.trajectory
            .states()
            .iter()
            .map(|y| Vector3::new(y[4], y[5], y[6]))
            .collect()
    }

    /// Body state at `s` for curves built by [`integrate_framed`].
    pub fn body_state(&self, level: crate::state::HierarchyLevel, s: f64) -> Option<FieldState> {
        let y = self.raw(s);
        FieldState::from_slice(level, y.get(FRAME_DIM..)?).ok()
    }

    /// `max ||q| − 1|` over the snapshots.
    pub fn quaternion_norm_defect(&self) -> f64 {
        self.trajectory
            .states()
            .iter()
            .map(|y| (y[..4].iter().map(|v| v * v).sum::<f64>().sqrt() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// `max |DᵀD − I|` for the director matrix built from the stored,
    /// unnormalised quaternions at the snapshots.
    pub fn orthonormality_defect(&self) -> f64 {
        self.trajectory
            .states()
            .iter()
            .map(|y| {
                let q = Quaternion::new(y[0], y[1], y[2], y[3]);
                let d = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]].map(|e| {
                    let v = q * Quaternion::new(0.0, e[0], e[1], e[2]) * q.conjugate();
                    Vector3::new(v.i, v.j, v.k)
                });
                let mut worst: f64 = 0.0;
                for i in 0..3 {
                    for j in 0..3 {
                        let target = if i == j { 1.0 } else { 0.0 };
                        worst = worst.max((d[i].dot(&d[j]) - target).abs());
                    }
                }
                worst
            })
            .fold(0.0, f64::max)
    }

    /// Largest distance of a snapshot point from the chord through the end points.
    pub fn collinearity_defect(&self) -> f64 {
        let pts = self.positions();
        let (a, b) = (pts[0], pts[pts.len() - 1]);
        let axis = b - a;
        if axis.norm() == 0.0 {
            return pts.iter().map(|p| (p - a).norm()).fold(0.0, f64::max);
        }
        let axis = axis.normalize();
        pts.iter()
            .map(|p| (p - a).cross(&axis).norm())
            .fold(0.0, f64::max)
    }

    /// Derivatives `r', r'', r'''` at `s` from fourth-order central differences.
    pub fn centreline_derivatives(&self, s: f64, h: f64) -> [Vector3<f64>; 3] {
        let r = |k: f64| self.position(s + k * h);
        let (m3, m2, m1, p1, p2, p3) = (r(-3.0), r(-2.0), r(-1.0), r(1.0), r(2.0), r(3.0));
        let r0 = self.position(s);
        let d1 = (-p2 + 8.0 * p1 - 8.0 * m1 + m2) / (12.0 * h);
        let d2 = (-p2 + 16.0 * p1 - 30.0 * r0 + 16.0 * m1 - m2) / (12.0 * h * h);
        let d3 = (-p3 + 8.0 * p2 - 13.0 * p1 + 13.0 * m1 - 8.0 * m2 + m3) / (8.0 * h * h * h);
        [d1, d2, d3]
    }

    /// Curvature `|r' × r''| / |r'|³` and torsion `(r' × r'') · r''' / |r' × r''|²`.
    pub fn curvature_torsion(&self, s: f64, h: f64) -> (f64, f64) {
        let [d1, d2, d3] = self.centreline_derivatives(s, h);
        let c = d1.cross(&d2);
        (c.norm() / d1.norm().powi(3), c.dot(&d3) / c.norm_squared())
    }

    /// Strains recovered from the frame: `u_k = ½ ε_kij d_j' · d_i` by central
    /// differences of the directors.
    pub fn frame_strains(&self, s: f64, h: f64) -> Triple {
        let dp = self.directors(s + h);
        let dm = self.directors(s - h);
        let d = self.directors(s);
        let der: Vec<Vector3<f64>> = (0..3).map(|i| (dp[i] - dm[i]) / (2.0 * h)).collect();
        Triple::new(der[1].dot(&d[2]), der[2].dot(&d[0]), der[0].dot(&d[1]))
    }
}

/// Integrates the frame for a prescribed strain history `u(s)`.
pub fn reconstruct_with<U: Fn(f64) -> Triple>(
    strain: U,
    frame0: UnitQuaternion<f64>,
    r0: Vector3<f64>,
    span: (f64, f64),
    opts: &IntegratorOptions,
) -> Result<FramedCurve> {
    let opts = IntegratorOptions { project: true, ..*opts };
    let flow = StrainDriven { strain };
    let trajectory = Trajectory::integrate(&flow, &pack_frame(&frame0, &r0), span, &opts)?;
    Ok(FramedCurve { trajectory })
}

/// Reconstructs the rod from a solved hierarchy trajectory.
pub fn reconstruct(
    traj: &super::RodTrajectory,
    frame0: UnitQuaternion<f64>,
    r0: Vector3<f64>,
    opts: &IntegratorOptions,
) -> Result<FramedCurve> {
    let (a, b) = (traj.trajectory.s_start(), traj.trajectory.s_end());
    let (lo, hi) = (a.min(b), a.max(b));
    let params = traj.params;
    reconstruct_with(
        |s| {
            let state = traj.state_at(s.clamp(lo, hi)).expect("inside range");
            strains(&state.m(), &params)
        },
        frame0,
        r0,
        (a, b),
        opts,
    )
}

/// Integrates body state, frame and centreline as one system.
pub fn integrate_framed(
    state0: &FieldState,
    params: &RodParams,
    frame0: UnitQuaternion<f64>,
    r0: Vector3<f64>,
    span: (f64, f64),
    opts: &IntegratorOptions,
) -> Result<FramedCurve> {
    let opts = IntegratorOptions { project: true, ..*opts };
    let flow = Coupled {
        level: state0.level(),
        params: *params,
    };
    let mut y0 = pack_frame(&frame0, &r0);
    y0.extend(state0.as_vec());
    let trajectory = Trajectory::integrate(&flow, &y0, span, &opts)?;
    Ok(FramedCurve { trajectory })
}
