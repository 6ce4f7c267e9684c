//! Canonical Euler-angle coordinates for the magnetic rod.
//!
//! On a non-aligned level set of the Casimirs `(C1, C2, C3)` the nine body
//! components reduce to `q = (θ, ψ, φ)` and `p = (p_θ, p_ψ, p_φ)` with
//!
//! ```text
//! B = √C3 (−sinθ cosφ, sinθ sinφ, cosθ)
//! m = L(θ, φ) p
//! n = (C2/√C3) B̂ + v⊥ (cosθ cosφ cosψ − sinφ sinψ, −cosθ sinφ cosψ − cosφ sinψ, sinθ cosψ)
//! v⊥ = √(2C1 − C2²/C3 − 2√C3 p_ψ)
//! ```
//!
//! Arrays of canonical variables are ordered `(θ, ψ, φ, p_θ, p_ψ, p_φ)`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Result, RodError};
use crate::integrator::{integrate_with, Control, FnFlow, Flow, IntegratorOptions};
use crate::model::RodParams;
use crate::poisson::structure_matrix;
use crate::so3::Triple;
use crate::state::{FieldState, HierarchyLevel};

/// Below this `|sin θ|` the Euler-angle chart is treated as singular.
pub const GIMBAL_TOL: f64 = 1e-8;

/// Below this `|n × B|` the force and field count as aligned.
pub const ALIGNMENT_TOL: f64 = 1e-10;

/// Step of the finite-difference Jacobian in [`verify_canonical`].
pub const JACOBIAN_STEP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CanonicalState {
    pub theta: f64,
    pub psi: f64,
    pub phi: f64,
    pub p_theta: f64,
    pub p_psi: f64,
    pub p_phi: f64,
}

impl CanonicalState {
    pub fn to_array(&self) -> [f64; 6] {
        [self.theta, self.psi, self.phi, self.p_theta, self.p_psi, self.p_phi]
    }

    pub fn from_array(a: &[f64]) -> Self {
        CanonicalState {
            theta: a[0],
            psi: a[1],
            phi: a[2],
            p_theta: a[3],
            p_psi: a[4],
            p_phi: a[5],
        }
    }
}

/// Casimirs of the magnetic rod, `C3 > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CasimirTriple {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

impl CasimirTriple {
    pub fn new(c1: f64, c2: f64, c3: f64) -> Result<Self> {
        if !(c3 > 0.0 && c3.is_finite()) {
            return Err(RodError::DegenerateField { c3 });
        }
        Ok(CasimirTriple { c1, c2, c3 })
    }

    pub fn of(state: &FieldState) -> Result<Self> {
        let (m, n, b) = (state.m(), state.n(), state.b());
        Self::new(0.5 * n.dot(&n) + m.dot(&b), b.dot(&n), b.dot(&b))
    }

    /// `2C1 − C2²/C3`, the value of `v⊥² + 2√C3 p_ψ`.
    pub fn reduced_energy(&self) -> f64 {
        2.0 * self.c1 - self.c2 * self.c2 / self.c3
    }

    /// `v⊥² = 2C1 − C2²/C3 − 2√C3 p_ψ`, unchecked.
    pub fn radicand(&self, p_psi: f64) -> f64 {
        self.reduced_energy() - 2.0 * self.c3.sqrt() * p_psi
    }

    /// `v⊥`, failing when the radicand is negative.
    pub fn v_perp(&self, p_psi: f64) -> Result<f64> {
        let r = self.radicand(p_psi);
        if r < 0.0 {
            Err(RodError::NegativeRadicand { value: r })
        } else {
            Ok(r.sqrt())
        }
    }
}

fn require_magnetic(state: &FieldState) -> Result<()> {
    if state.level() != HierarchyLevel::Magnetic {
        return Err(RodError::LevelMismatch {
            required: HierarchyLevel::Magnetic,
            found: state.level(),
        });
    }
    Ok(())
}

/// Body state to canonical variables, Casimirs taken from the state.
pub fn to_canonical(state: &FieldState) -> Result<(CanonicalState, CasimirTriple)> {
    require_magnetic(state)?;
    let cas = CasimirTriple::of(state)?;
    Ok((to_canonical_on(state, &cas)?, cas))
}

/// Body state to canonical variables on the prescribed Casimir level set.
pub fn to_canonical_on(state: &FieldState, cas: &CasimirTriple) -> Result<CanonicalState> {
    require_magnetic(state)?;
    let (m, n, b) = (state.m(), state.n(), state.b());
    let defect = n.cross(&b).norm();
    if defect < ALIGNMENT_TOL {
        return Err(RodError::AlignedState { defect });
    }
    let root = cas.c3.sqrt();
    let theta = (b[2] / root).clamp(-1.0, 1.0).acos();
    let sin_theta = (b[0] * b[0] + b[1] * b[1]).sqrt() / root;
    if sin_theta < GIMBAL_TOL {
        return Err(RodError::GimbalSingular { sin_theta });
    }
    let phi = b[1].atan2(-b[0]);
    let (sp, cp) = phi.sin_cos();
    let w = n - (cas.c2 / cas.c3) * b;
    let a = Triple::new(theta.cos() * cp, -theta.cos() * sp, theta.sin());
    let e = Triple::new(-sp, -cp, 0.0);
    let psi = w.dot(&e).atan2(w.dot(&a));
    Ok(CanonicalState {
        theta,
        psi,
        phi,
        p_theta: (m[0] * b[1] - m[1] * b[0]) / (cas.c3 - b[2] * b[2]).sqrt(),
        p_psi: m.dot(&b) / root,
        p_phi: m[2],
    })
}

/// `m = L(θ, φ) p`.
fn moment(c: &CanonicalState) -> Triple {
    let (st, ct) = c.theta.sin_cos();
    let (sp, cp) = c.phi.sin_cos();
    let a = (c.p_psi - c.p_phi * ct) / st;
    Triple::new(c.p_theta * sp - cp * a, c.p_theta * cp + sp * a, c.p_phi)
}

/// Canonical variables to the level-2 body state.
pub fn from_canonical(c: &CanonicalState, cas: &CasimirTriple) -> Result<FieldState> {
    let v_perp = cas.v_perp(c.p_psi)?;
    let (st, ct) = c.theta.sin_cos();
    if st.abs() < GIMBAL_TOL {
        return Err(RodError::GimbalSingular { sin_theta: st.abs() });
    }
    let (sp, cp) = c.phi.sin_cos();
    let (ss, cs) = c.psi.sin_cos();
    let root = cas.c3.sqrt();
    let b_hat = Triple::new(-st * cp, st * sp, ct);
    let perp = Triple::new(ct * cp * cs - sp * ss, -ct * sp * cs - cp * ss, st * cs);
    let n = (cas.c2 / root) * b_hat + v_perp * perp;
    FieldState::from_fields(&[moment(c), n, root * b_hat])
}

/// Hamiltonian in canonical variables, general stiffnesses.
pub fn reduced_hamiltonian(c: &CanonicalState, cas: &CasimirTriple, params: &RodParams) -> Result<f64> {
    let v_perp = cas.v_perp(c.p_psi)?;
    let [k1, k2, k3] = params.stiffness();
    let (st, ct) = c.theta.sin_cos();
    let (sp, cp) = c.phi.sin_cos();
    let (pt, pp, pf) = (c.p_theta, c.p_psi, c.p_phi);
    let mix = k1 * sp * sp + k2 * cp * cp;
    let bracket = pt * pt * st * st * (k2 - (k2 - k1) * cp * cp)
        + pp * pp * mix
        + pf * pf * (ct * ct * mix + (k1 * k2 / k3) * st * st)
        + 2.0 * (k2 - k1) * pt * pf * st * ct * sp * cp
        - 2.0 * (k2 - k1) * pt * pp * st * sp * cp
        - 2.0 * pp * pf * ct * mix;
    Ok(bracket / (2.0 * k1 * k2 * st * st) + cas.c2 / cas.c3.sqrt() * ct + st * c.psi.cos() * v_perp)
}

/// Isotropic Hamiltonian, independent of `φ`.
pub fn reduced_hamiltonian_isotropic(c: &CanonicalState, cas: &CasimirTriple, params: &RodParams) -> Result<f64> {
    let k = params.bending()?;
    let v_perp = cas.v_perp(c.p_psi)?;
    let (st, ct) = c.theta.sin_cos();
    let a = c.p_psi - c.p_phi * ct;
    Ok(c.p_theta * c.p_theta / (2.0 * k)
        + a * a / (2.0 * k * st * st)
        + c.p_phi * c.p_phi / (2.0 * params.k3())
        + cas.c2 / cas.c3.sqrt() * ct
        + st * c.psi.cos() * v_perp)
}

/// Hamilton's equations of the isotropic reduced system, returned in array
/// order; `φ'` is `∂H/∂p_φ` and `p_φ' = 0`.
pub fn reduced_rhs(c: &CanonicalState, cas: &CasimirTriple, params: &RodParams) -> Result<[f64; 6]> {
    let k = params.bending()?;
    let v_perp = cas.v_perp(c.p_psi)?;
    let (st, ct) = c.theta.sin_cos();
    if st.abs() < GIMBAL_TOL {
        return Err(RodError::GimbalSingular { sin_theta: st.abs() });
    }
    let (ss, cs) = c.psi.sin_cos();
    let root = cas.c3.sqrt();
    let a = c.p_psi - c.p_phi * ct;
    let s2 = st * st;
    Ok([
        c.p_theta / k,
        a / (k * s2) - root * cs * st / v_perp,
        -ct * a / (k * s2) + c.p_phi / params.k3(),
        (c.p_psi * ct - c.p_phi) * a / (k * s2 * st) + cas.c2 / root * st - ct * cs * v_perp,
        st * ss * v_perp,
        0.0,
    ])
}

/// The extra integral `𝓘` of the isotropic reduced system, the canonical form
/// of `n · m + K B3`.
pub fn integral_i(c: &CanonicalState, cas: &CasimirTriple, params: &RodParams) -> Result<f64> {
    let k = params.bending()?;
    let v_perp = cas.v_perp(c.p_psi)?;
    let (st, ct) = c.theta.sin_cos();
    let root = cas.c3.sqrt();
    let (ss, cs) = c.psi.sin_cos();
    Ok(root * k * ct + cas.c2 / root * c.p_psi - v_perp * (c.p_theta * ss - cs * (c.p_phi - c.p_psi * ct) / st))
}

/// The isotropic reduced system as a [`Flow`] on `(θ, ψ, φ, p_θ, p_ψ, p_φ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedFlow {
    pub cas: CasimirTriple,
    pub params: RodParams,
}

impl ReducedFlow {
    pub fn new(cas: CasimirTriple, params: RodParams) -> Result<Self> {
        params.bending()?;
        Ok(ReducedFlow { cas, params })
    }
}

impl Flow for ReducedFlow {
    fn dim(&self) -> usize {
        6
    }

    fn eval(&self, _s: f64, y: &[f64], dy: &mut [f64]) {
        match reduced_rhs(&CanonicalState::from_array(y), &self.cas, &self.params) {
            Ok(d) => dy.copy_from_slice(&d),
            Err(_) => dy.fill(f64::NAN),
        }
    }
}

/// The standard canonical structure matrix `[[0, I], [−I, 0]]`.
pub fn canonical_structure() -> SMatrix<f64, 6, 6> {
    let mut j = SMatrix::<f64, 6, 6>::zeros();
    for i in 0..3 {
        j[(i, i + 3)] = 1.0;
        j[(i + 3, i)] = -1.0;
    }
    j
}

fn wrap_angle(x: f64) -> f64 {
    (x + PI).rem_euclid(2.0 * PI) - PI
}

/// `cos ψ = (n3 − C2 B3/C3) / √((1 − B3²/C3)(2C1 − C2²/C3 − 2 m·B))`.
pub fn psi_cosine(state: &FieldState, cas: &CasimirTriple) -> f64 {
    let (m, n, b) = (state.m(), state.n(), state.b());
    let w3 = n[2] - cas.c2 * b[2] / cas.c3;
    let s = 1.0 - b[2] * b[2] / cas.c3;
    w3 / (s * (cas.reduced_energy() - 2.0 * m.dot(&b))).sqrt()
}

/// Jacobian `∂(q, p)/∂(m, n, B)` by central differences of the map.
///
/// With `frozen` the Casimirs stay at their values at `state` and `ψ` is
/// taken from [`psi_cosine`] on the branch of `state`; otherwise the
/// Casimirs are re-evaluated at every probe. `G J Gᵀ` is the same either way
/// since Casimir gradients lie in the kernel of `J`.
pub fn canonical_jacobian_fd(state: &FieldState, step: f64, frozen: bool) -> Result<SMatrix<f64, 6, 9>> {
    let (c0, cas) = to_canonical(state)?;
    let x = state.as_vec();
    let branch = c0.psi.sin().signum();
    let map = |y: &[f64]| -> Result<[f64; 6]> {
        let s = FieldState::from_slice(HierarchyLevel::Magnetic, y)?;
        if frozen {
            let mut c = to_canonical_on(&s, &cas)?;
            c.psi = branch * psi_cosine(&s, &cas).clamp(-1.0, 1.0).acos();
            Ok(c.to_array())
        } else {
            Ok(to_canonical(&s)?.0.to_array())
        }
    };
    let mut g = SMatrix::<f64, 6, 9>::zeros();
    let mut probe = x.clone();
    for j in 0..9 {
        probe[j] = x[j] + step;
        let plus = map(&probe)?;
        probe[j] = x[j] - step;
        let minus = map(&probe)?;
        probe[j] = x[j];
        for i in 0..6 {
            let mut d = plus[i] - minus[i];
            if i == 1 || i == 2 {
                d = wrap_angle(d);
            }
            g[(i, j)] = d / (2.0 * step);
        }
    }
    Ok(g)
}

/// Analytic Jacobian of the map with the Casimirs held fixed.
pub fn canonical_jacobian(state: &FieldState) -> Result<SMatrix<f64, 6, 9>> {
    let (c, cas) = to_canonical(state)?;
    let (m, n, b) = (state.m(), state.n(), state.b());
    let c3 = cas.c3;
    let root = c3.sqrt();
    let rho2 = b[0] * b[0] + b[1] * b[1];
    let q = c3 - b[2] * b[2];
    let mut g = SMatrix::<f64, 6, 9>::zeros();

    g[(0, 8)] = -1.0 / q.sqrt();

    let s = 1.0 - b[2] * b[2] / c3;
    let r = cas.radicand(c.p_psi);
    let w3 = n[2] - cas.c2 * b[2] / c3;
    let sr = s * r;
    let sr32 = sr * sr.sqrt();
    let mut dx = [0.0; 9];
    for i in 0..3 {
        dx[i] = w3 * s * b[i] / sr32;
    }
    dx[5] = 1.0 / sr.sqrt();
    dx[6] = w3 * s * m[0] / sr32;
    dx[7] = w3 * s * m[1] / sr32;
    dx[8] = -cas.c2 / (c3 * sr.sqrt()) + w3 * (r * b[2] / c3 + s * m[2]) / sr32;
    let sin_psi = c.psi.sin();
    for j in 0..9 {
        g[(1, j)] = -dx[j] / sin_psi;
    }

    g[(2, 6)] = b[1] / rho2;
    g[(2, 7)] = -b[0] / rho2;

    let qs = q.sqrt();
    g[(3, 0)] = b[1] / qs;
    g[(3, 1)] = -b[0] / qs;
    g[(3, 6)] = -m[1] / qs;
    g[(3, 7)] = m[0] / qs;
    g[(3, 8)] = (m[0] * b[1] - m[1] * b[0]) * b[2] / (q * qs);

    for i in 0..3 {
        g[(4, i)] = b[i] / root;
        g[(4, 6 + i)] = m[i] / root;
    }

    g[(5, 2)] = 1.0;
    Ok(g)
}

/// The closed-form transformation matrix as commonly printed, rows
/// reordered to `(θ, ψ, φ, p_θ, p_ψ, p_φ)`.
///
/// Several entries carry misprints; compare with [`canonical_jacobian`].
pub fn canonical_jacobian_printed(state: &FieldState) -> Result<SMatrix<f64, 6, 9>> {
    let (_, cas) = to_canonical(state)?;
    let (m, n, b) = (state.m(), state.n(), state.b());
    let (c1, c2, c3) = (cas.c1, cas.c2, cas.c3);
    let root = c3.sqrt();
    let rho2 = b[0] * b[0] + b[1] * b[1];
    let q = c3 - b[2] * b[2];
    let r = 2.0 * c1 - c2 * c2 / c3 - 2.0 * m.dot(&b);
    let w3 = n[2] - c2 * b[2] / c3;
    let delta = r * ((1.0 - b[2] * b[2] / c3) * r - w3 * w3).sqrt();
    let mut g = SMatrix::<f64, 6, 9>::zeros();

    g[(0, 8)] = -(c3 / (1.0 - c3 * b[2] * b[2])).sqrt();

    g[(1, 0)] = -b[0] * w3 / delta;
    g[(1, 1)] = -b[1] * w3 / delta;
    g[(1, 2)] = -b[2] * w3 / delta;
    g[(1, 5)] = -1.0 / delta;
    g[(1, 6)] = -m[0] * w3 / delta;
    g[(1, 7)] = -m[1] * w3 / delta;
    g[(1, 8)] = c2 * r / c3 / delta - w3 * (b[2] * r - m[2] * (1.0 - b[2] / c2)) / delta;

    g[(2, 6)] = b[1] / rho2;
    g[(2, 7)] = -b[0] / rho2;

    g[(3, 0)] = b[1] / (c3 - b[2]).sqrt();
    g[(3, 1)] = -b[0] / q.sqrt();
    g[(3, 6)] = -m[1] / q.sqrt();
    g[(3, 7)] = m[0] / q.sqrt();
    g[(3, 8)] = (m[0] * b[1] - m[1] * b[0]) * b[2] / q.powf(1.5);

    for i in 0..3 {
        g[(4, i)] = b[i] / root;
        g[(4, 6 + i)] = m[i] / root;
    }

    g[(5, 2)] = 1.0;
    Ok(g)
}

/// Entries of the closed-form transformation matrix that disagree with the
/// derivative of the map, as `(row, col)`.
pub const PRINTED_MISPRINTS: [(usize, usize); 4] = [(0, 8), (1, 5), (1, 8), (3, 0)];

/// Entries `(row, col, finite difference, printed)` where the printed
/// transformation matrix differs from the finite-difference Jacobian by more
/// than `tol`. The printed `ψ` row belongs to the `arccos` branch
/// `sin ψ > 0`; it is compared as `d cos ψ = −|sin ψ| × row` against
/// differences of [`psi_cosine`], which stay accurate near `sin ψ = 0`.
pub fn printed_jacobian_mismatches(state: &FieldState, tol: f64) -> Result<Vec<(usize, usize, f64, f64)>> {
    let mut fd = canonical_jacobian_fd(state, JACOBIAN_STEP, true)?;
    let mut printed = canonical_jacobian_printed(state)?;
    let (c, cas) = to_canonical(state)?;
    let x = state.as_vec();
    let mut probe = x.clone();
    let sin_psi = c.psi.sin().abs();
    for j in 0..9 {
        probe[j] = x[j] + JACOBIAN_STEP;
        let plus = psi_cosine(&FieldState::from_slice(HierarchyLevel::Magnetic, &probe)?, &cas);
        probe[j] = x[j] - JACOBIAN_STEP;
        let minus = psi_cosine(&FieldState::from_slice(HierarchyLevel::Magnetic, &probe)?, &cas);
        probe[j] = x[j];
        fd[(1, j)] = (plus - minus) / (2.0 * JACOBIAN_STEP);
        printed[(1, j)] *= -sin_psi;
    }
    let mut out = Vec::new();
    for i in 0..6 {
        for j in 0..9 {
            if (fd[(i, j)] - printed[(i, j)]).abs() > tol {
                out.push((i, j, fd[(i, j)], printed[(i, j)]));
            }
        }
    }
    Ok(out)
}

/// `max |G J Gᵀ − J̄|` with `G` from central differences of [`to_canonical`].
pub fn verify_canonical(state: &FieldState) -> Result<f64> {
    let g = canonical_jacobian_fd(state, JACOBIAN_STEP, false)?;
    symplectic_defect(state, &g)
}

/// `max |G J Gᵀ − J̄|` for a given Jacobian.
pub fn symplectic_defect(state: &FieldState, g: &SMatrix<f64, 6, 9>) -> Result<f64> {
    let j = structure_matrix(state, HierarchyLevel::Magnetic)?.into_matrix();
    let g = DMatrix::from_column_slice(6, 9, g.as_slice());
    let gjg = &g * j * g.transpose();
    let jbar = canonical_structure();
    Ok((0..6)
        .flat_map(|i| (0..6).map(move |k| (i, k)))
        .map(|(i, k)| (gjg[(i, k)] - jbar[(i, k)]).abs())
        .fold(0.0, f64::max))
}

/// How far the helix ansatz `θ = const`, `ψ' = ω` is from solving the
/// `ψ'` and `p_ψ'` equations.
///
/// With `p_θ = 0`, `p_ψ' = sinθ sinψ v⊥` is integrated along `ψ = ψ0 + ω s`
/// over `[0, length]` and the residual is `max_s |ψ'(θ, ψ, p_ψ) − ω|`,
/// minimised over `ω`. Returns `+∞` if the radicand turns negative for
/// every `ω` tried.
pub fn helix_ansatz_residual(
    theta: f64,
    psi0: f64,
    p_psi0: f64,
    p_phi: f64,
    cas: &CasimirTriple,
    params: &RodParams,
    length: f64,
) -> Result<f64> {
    let k = params.bending()?;
    cas.v_perp(p_psi0)?;
    let psi_rate = |psi: f64, p_psi: f64| -> f64 {
        let probe = CanonicalState {
            theta,
            psi,
            phi: 0.0,
            p_theta: 0.0,
            p_psi,
            p_phi,
        };
        reduced_rhs(&probe, cas, params).map(|d| d[1]).unwrap_or(f64::NAN)
    };
    let residual = |omega: f64| -> f64 {
        let flow = FnFlow::new(1, |s: f64, y: &[f64], dy: &mut [f64]| {
            let r = cas.radicand(y[0]);
            dy[0] = if r < 0.0 {
                f64::NAN
            } else {
                theta.sin() * (psi0 + omega * s).sin() * r.sqrt()
            };
        });
        let mut worst: f64 = 0.0;
        let opts = IntegratorOptions {
            max_step: 0.05,
            ..IntegratorOptions::with_tol(1e-10)
        };
        let run = integrate_with(&flow, &[p_psi0], (0.0, length), &opts, |step| {
            for i in 0..=4 {
                let s = step.s0 + step.h * i as f64 / 4.0;
                let p = step.at(s)[0];
                worst = worst.max((psi_rate(psi0 + omega * s, p) - omega).abs());
            }
            Control::Continue
        });
        match run {
            Ok(_) if worst.is_finite() => worst,
            _ => f64::INFINITY,
        }
    };
    let omega0 = psi_rate(psi0, p_psi0);
    if !omega0.is_finite() {
        return Ok(f64::INFINITY);
    }
    let width = 1.0 + omega0.abs() + 1.0 / k;
    let samples = 41;
    let grid: Vec<f64> = (0..samples)
        .map(|i| omega0 - width + 2.0 * width * i as f64 / (samples - 1) as f64)
        .collect();
    let values: Vec<f64> = grid.iter().map(|&w| residual(w)).collect();
    let best = (0..samples)
        .min_by(|&a, &b| values[a].total_cmp(&values[b]))
        .unwrap();
    if !values[best].is_finite() {
        return Ok(f64::INFINITY);
    }
    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(samples - 1)];
    let refined = crate::roots::golden_section_min(&residual, lo, hi, 1e-10, 80);
    Ok(refined.1.min(values[best]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_state(rng: &mut ChaCha8Rng) -> FieldState {
        let mut t = || Triple::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        FieldState::magnetic(t(), t(), t())
    }

    #[test]
    fn gimbal_pole_is_rejected() {
        let state = FieldState::magnetic(Triple::new(0.1, 0.2, 0.3), Triple::new(1.0, 0.0, 0.0), Triple::new(0.0, 0.0, 1.0));
        assert!(matches!(to_canonical(&state), Err(RodError::GimbalSingular { .. })));
    }

    #[test]
    fn aligned_state_is_rejected() {
        let state = FieldState::magnetic(Triple::new(0.1, 0.2, 0.3), Triple::new(0.2, 0.4, 0.6), Triple::new(1.0, 2.0, 3.0));
        assert!(matches!(to_canonical(&state), Err(RodError::AlignedState { .. })));
    }

    #[test]
    fn p_phi_is_m3() {
        let state = FieldState::magnetic(Triple::new(0.0, 0.0, 0.7), Triple::new(0.3, -0.5, 0.2), Triple::new(0.6, 0.1, -0.4));
        let (c, _) = to_canonical(&state).unwrap();
        assert_eq!(c.p_phi, 0.7);
    }

    #[test]
    fn round_trip_body_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let x = random_state(&mut rng);
            let (c, cas) = to_canonical(&x).unwrap();
            let y = from_canonical(&c, &cas).unwrap();
            assert!((0..3).all(|i| (x.field(i) - y.field(i)).amax() < 1e-10), "{x:?} {y:?}");
        }
    }

    #[test]
    fn from_canonical_preserves_casimirs() {
        let cas = CasimirTriple::new(1.02, 1.0, 1.0).unwrap();
        let c = CanonicalState {
            theta: 1.1,
            psi: -0.4,
            phi: 2.0,
            p_theta: 0.3,
            p_psi: -0.2,
            p_phi: 1.0,
        };
        let x = from_canonical(&c, &cas).unwrap();
        let back = CasimirTriple::of(&x).unwrap();
        assert!((back.c1 - 1.02).abs() < 1e-14 && (back.c2 - 1.0).abs() < 1e-14 && (back.c3 - 1.0).abs() < 1e-14);
        assert!((x.b().norm_squared() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_v_perp_gives_aligned_force() {
        let cas = CasimirTriple::new(1.3, 0.8, 2.0).unwrap();
        let p_psi = cas.reduced_energy() / (2.0 * cas.c3.sqrt());
        let c = CanonicalState {
            theta: 0.9,
            psi: 0.3,
            phi: -1.0,
            p_theta: 0.2,
            p_psi,
            p_phi: 0.5,
        };
        let x = from_canonical(&c, &cas).unwrap();
        let expected = (cas.c2 / cas.c3) * x.b();
        assert!((x.n() - expected).amax() < 1e-15);
    }

    #[test]
    fn negative_radicand_is_reported() {
        let cas = CasimirTriple::new(1.0, 0.0, 1.0).unwrap();
        let c = CanonicalState {
            theta: 1.0,
            psi: 0.0,
            phi: 0.0,
            p_theta: 0.0,
            p_psi: 2.0,
            p_phi: 0.0,
        };
        assert!(matches!(from_canonical(&c, &cas), Err(RodError::NegativeRadicand { .. })));
    }

    #[test]
    fn momentum_free_slice() {
        let cas = CasimirTriple::new(1.02, 1.0, 1.0).unwrap();
        let params = RodParams::isotropic(1.0, 0.75).unwrap();
        let psi: f64 = 0.7;
        let c = CanonicalState {
            theta: PI / 2.0,
            psi,
            phi: 0.3,
            p_theta: 0.0,
            p_psi: 0.0,
            p_phi: 0.0,
        };
        let h = reduced_hamiltonian_isotropic(&c, &cas, &params).unwrap();
        let expected = psi.cos() * (2.0 * 1.02 - 1.0f64).sqrt();
        assert!((h - expected).abs() < 1e-15);
    }

    #[test]
    fn reduced_hamiltonian_matches_body_hamiltonian() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for params in [RodParams::new(1.0, 1.6, 0.7).unwrap(), RodParams::isotropic(1.3, 0.9).unwrap()] {
            for _ in 0..100 {
                let x = random_state(&mut rng);
                let (c, cas) = to_canonical(&x).unwrap();
                let h = crate::model::hamiltonian(&x, &params);
                assert!((reduced_hamiltonian(&c, &cas, &params).unwrap() - h).abs() < 1e-10);
                if params.is_isotropic() {
                    assert!((reduced_hamiltonian_isotropic(&c, &cas, &params).unwrap() - h).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn isotropic_hamiltonian_ignores_phi() {
        let cas = CasimirTriple::new(1.02, 1.0, 1.0).unwrap();
        let params = RodParams::isotropic(1.0, 0.75).unwrap();
        let mut c = CanonicalState {
            theta: 1.2,
            psi: 0.4,
            phi: 0.0,
            p_theta: 0.3,
            p_psi: -0.1,
            p_phi: 1.0,
        };
        let h0 = reduced_hamiltonian(&c, &cas, &params).unwrap();
        for phi in [0.5, 1.7, -2.9] {
            c.phi = phi;
            assert!((reduced_hamiltonian(&c, &cas, &params).unwrap() - h0).abs() < 1e-14);
        }
    }

    #[test]
    fn reduced_rhs_is_hamiltonian_gradient_flow() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let params = RodParams::isotropic(1.0, 0.75).unwrap();
        let jbar = canonical_structure();
        for _ in 0..20 {
            let x = random_state(&mut rng);
            let (c, cas) = to_canonical(&x).unwrap();
            let h = |y: &[f64]| reduced_hamiltonian_isotropic(&CanonicalState::from_array(y), &cas, &params).unwrap();
            let grad = crate::poisson::central_gradient(&h, &c.to_array(), 1e-5);
            let flow = jbar * nalgebra::SVector::<f64, 6>::from_column_slice(&grad);
            let d = reduced_rhs(&c, &cas, &params).unwrap();
            for i in 0..6 {
                assert!((flow[i] - d[i]).abs() < 1e-8 * (1.0 + d[i].abs()), "{i}: {} {}", flow[i], d[i]);
            }
        }
    }

    #[test]
    fn integral_matches_force_moment() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let params = RodParams::isotropic(1.4, 0.75).unwrap();
        for _ in 0..100 {
            let x = random_state(&mut rng);
            let (c, cas) = to_canonical(&x).unwrap();
            let body = crate::model::force_moment_integral(&x, &params);
            assert!((integral_i(&c, &cas, &params).unwrap() - body).abs() < 1e-10);
        }
    }

    #[test]
    fn integral_on_zero_radicand() {
        let cas = CasimirTriple::new(1.3, 0.8, 2.0).unwrap();
        let params = RodParams::isotropic(1.2, 0.75).unwrap();
        let p_psi = cas.reduced_energy() / (2.0 * cas.c3.sqrt());
        let c = CanonicalState {
            theta: 0.9,
            psi: 0.3,
            phi: 0.0,
            p_theta: 5.0,
            p_psi,
            p_phi: 0.5,
        };
        let expected = cas.c3.sqrt() * 1.2 * 0.9f64.cos() + cas.c2 * p_psi / cas.c3.sqrt();
        assert!((integral_i(&c, &cas, &params).unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn canonicality_at_random_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let x = random_state(&mut rng);
            assert!(verify_canonical(&x).unwrap() < 1e-6);
        }
    }

    #[test]
    fn analytic_jacobian_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let x = random_state(&mut rng);
            let fd = canonical_jacobian_fd(&x, JACOBIAN_STEP, true).unwrap();
            let an = canonical_jacobian(&x).unwrap();
            let scale = fd.amax().max(1.0);
            assert!((fd - an).amax() < 1e-6 * scale, "{}", (fd - an).amax());
            assert!(symplectic_defect(&x, &an).unwrap() < 1e-9);
        }
    }

    #[test]
    fn printed_jacobian_agrees_except_misprints() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = random_state(&mut rng);
        let fd = canonical_jacobian_fd(&x, JACOBIAN_STEP, true).unwrap();
        let printed = canonical_jacobian_printed(&x).unwrap();
        for row in [2, 4, 5] {
            assert!((fd.row(row) - printed.row(row)).amax() < 1e-6);
        }
        let bad: Vec<(usize, usize)> = printed_jacobian_mismatches(&x, 1e-6)
            .unwrap()
            .into_iter()
            .map(|(i, j, _, _)| (i, j))
            .collect();
        assert_eq!(bad, PRINTED_MISPRINTS);
    }

    #[test]
    fn helix_ansatz_fails_off_alignment() {
        let cas = CasimirTriple::new(1.02, 1.0, 1.0).unwrap();
        let params = RodParams::isotropic(1.0, 0.75).unwrap();
        let r = helix_ansatz_residual(1.0, 0.6, 0.0, 1.0, &cas, &params, 10.0).unwrap();
        assert!(r > 1e-6, "{r}");
    }
}
