//! The four rod models: Hamiltonian, equations of motion, Casimirs and the
//! stiffness-dependent first integrals.

use serde::{Deserialize, Serialize};

use crate::error::{Result, RodError};
use crate::so3::{Triple, D3};
use crate::state::{FieldState, HierarchyLevel};

/// Relative tolerance for the algebraic stiffness conditions and for `m · n = 0`.
pub const CONDITION_TOL: f64 = 1e-12;

fn nearly_equal(a: f64, b: f64) -> bool {
    (a - b).abs() <= CONDITION_TOL * a.abs().max(b.abs())
}

/// Bending stiffnesses `K1`, `K2` and torsional stiffness `K3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct RodParams {
    k: [f64; 3],
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    k1: f64,
    k2: f64,
    k3: f64,
}

impl TryFrom<RawParams> for RodParams {
    type Error = RodError;

    fn try_from(raw: RawParams) -> Result<Self> {
        RodParams::new(raw.k1, raw.k2, raw.k3)
    }
}

impl From<RodParams> for RawParams {
    fn from(p: RodParams) -> RawParams {
        RawParams {
            k1: p.k[0],
            k2: p.k[1],
            k3: p.k[2],
        }
    }
}

impl RodParams {
    pub fn new(k1: f64, k2: f64, k3: f64) -> Result<Self> {
        for (i, k) in [k1, k2, k3].iter().enumerate() {
            if !(k.is_finite() && *k > 0.0) {
                return Err(RodError::InvalidParams(format!("K{} = {k} must be finite and positive", i + 1)));
            }
        }
        Ok(RodParams { k: [k1, k2, k3] })
    }

    /// Transversely isotropic rod, `K1 = K2 = k`.
    pub fn isotropic(k: f64, k3: f64) -> Result<Self> {
        Self::new(k, k, k3)
    }

    pub fn k1(&self) -> f64 {
        self.k[0]
    }

    pub fn k2(&self) -> f64 {
        self.k[1]
    }

    pub fn k3(&self) -> f64 {
        self.k[2]
    }

    pub fn stiffness(&self) -> [f64; 3] {
        self.k
    }

    /// `K1 = K2`: the Lagrange condition.
    pub fn is_isotropic(&self) -> bool {
        nearly_equal(self.k[0], self.k[1])
    }

    /// `K1 = K2 = K3`.
    pub fn is_fully_isotropic(&self) -> bool {
        self.is_isotropic() && nearly_equal(self.k[0], self.k[2])
    }

    /// `K1 = K3 = 2 K2`.
    pub fn is_kovalevskaya(&self) -> bool {
        nearly_equal(self.k[0], self.k[2]) && nearly_equal(self.k[0], 2.0 * self.k[1])
    }

    /// `K1 = 4 K2 = K3`.
    pub fn is_chaplygin(&self) -> bool {
        nearly_equal(self.k[0], self.k[2]) && nearly_equal(self.k[0], 4.0 * self.k[1])
    }

    /// Common bending stiffness of an isotropic rod.
    pub fn bending(&self) -> Result<f64> {
        if self.is_isotropic() {
            Ok(self.k[0])
        } else {
            Err(RodError::NotIsotropic)
        }
    }
}

/// Hooke's law inverted: `u_i = m_i / K_i`.
pub fn strains(m: &Triple, params: &RodParams) -> Triple {
    Triple::new(m[0] / params.k[0], m[1] / params.k[1], m[2] / params.k[2])
}

/// `H = ½ m · u`, plus `n3` from level 1 on. Independent of `B` and `D`.
pub fn hamiltonian(state: &FieldState, params: &RodParams) -> f64 {
    let m = state.m();
    let bending = 0.5 * m.dot(&strains(&m, params));
    if state.level() >= HierarchyLevel::Kirchhoff {
        bending + state.n()[2]
    } else {
        bending
    }
}

/// `∇H = (u, d3, 0, 0)` truncated at the state's level.
pub fn hamiltonian_gradient(state: &FieldState, params: &RodParams) -> FieldState {
    let mut grad = FieldState::zeros(state.level());
    let fields = grad.fields_mut();
    fields[0] = strains(&state.m(), params);
    if fields.len() > 1 {
        fields[1] = D3;
    }
    grad
}

/// Equations of motion: `f_i' = f_i × u + f_{i+1} × d3`, the top field
/// evolving by `× u` alone.
pub fn rhs(state: &FieldState, params: &RodParams) -> FieldState {
    let u = strains(&state.m(), params);
    let top = state.level().index();
    let mut out = FieldState::zeros(state.level());
    for (i, d) in out.fields_mut().iter_mut().enumerate() {
        *d = state.field(i).cross(&u);
        if i < top {
            *d += state.field(i + 1).cross(&D3);
        }
    }
    out
}

/// Casimirs in the order `C1, C2, ...` of the level.
pub fn casimirs(state: &FieldState) -> Vec<f64> {
    let (m, n, b, d) = (state.m(), state.n(), state.b(), state.d());
    match state.level() {
        HierarchyLevel::ForceFree => vec![m.dot(&m)],
        HierarchyLevel::Kirchhoff => vec![n.dot(&m), n.dot(&n)],
        HierarchyLevel::Magnetic => vec![0.5 * n.dot(&n) + m.dot(&b), b.dot(&n), b.dot(&b)],
        HierarchyLevel::Hypermagnetic => vec![
            m.dot(&d) + n.dot(&b),
            0.5 * b.dot(&b) + n.dot(&d),
            b.dot(&d),
            d.dot(&d),
        ],
    }
}

/// Analytic Casimir gradients, packed like the state.
pub fn casimir_gradients(state: &FieldState) -> Vec<FieldState> {
    let (m, n, b, d) = (state.m(), state.n(), state.b(), state.d());
    let z = Triple::zeros();
    let pack = |fields: &[Triple]| FieldState::from_fields(fields).expect("finite gradient");
    match state.level() {
        HierarchyLevel::ForceFree => vec![pack(&[2.0 * m])],
        HierarchyLevel::Kirchhoff => vec![pack(&[n, m]), pack(&[z, 2.0 * n])],
        HierarchyLevel::Magnetic => vec![pack(&[b, n, m]), pack(&[z, b, n]), pack(&[z, z, 2.0 * b])],
        HierarchyLevel::Hypermagnetic => vec![
            pack(&[d, b, n, m]),
            pack(&[z, d, b, n]),
            pack(&[z, z, d, b]),
            pack(&[z, z, z, 2.0 * d]),
        ],
    }
}

/// Stiffness-conditional first integrals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegralKind {
    /// Twist `K m3`, `K1 = K2`.
    Lagrange,
    /// `n · m + K B3`, `K1 = K2`, levels 2 and 3.
    ForceMoment,
    /// `½ n · n + m · B + K D3`, `K1 = K2`, level 3.
    FieldMoment,
    /// Kovalevskaya integral in scale-consistent form, `K1 = K3 = 2 K2`.
    Kovalevskaya,
    /// Kovalevskaya integral with the prefactors `K1², K3², 2 K1 K3` as
    /// commonly printed; conserved only when `K2³ = 1/16`.
    KovalevskayaPrinted,
    /// Chaplygin-Goryachev integral, `K1 = 4 K2 = K3` on `m · n = 0`.
    ChaplyginGoryachev,
    /// Chaplygin-Goryachev integral with the commonly printed prefactors.
    ChaplyginGoryachevPrinted,
}

impl IntegralKind {
    pub fn name(self) -> &'static str {
        match self {
            IntegralKind::Lagrange => "I1_lagrange",
            IntegralKind::ForceMoment => "I2_force_moment",
            IntegralKind::FieldMoment => "I3_field_moment",
            IntegralKind::Kovalevskaya => "kovalevskaya",
            IntegralKind::KovalevskayaPrinted => "kovalevskaya_printed",
            IntegralKind::ChaplyginGoryachev => "chaplygin_goryachev",
            IntegralKind::ChaplyginGoryachevPrinted => "chaplygin_goryachev_printed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegralEntry {
    pub kind: IntegralKind,
    pub value: f64,
    /// Whether the quantity is a first integral of this level's flow.
    pub active: bool,
}

/// `K m3`, with `K = K1`.
pub fn lagrange_integral(state: &FieldState, params: &RodParams) -> f64 {
    params.k1() * state.m()[2]
}

/// `n · m + K B3`.
pub fn force_moment_integral(state: &FieldState, params: &RodParams) -> f64 {
    state.n().dot(&state.m()) + params.k1() * state.b()[2]
}

/// `½ n · n + m · B + K D3`.
pub fn field_moment_integral(state: &FieldState, params: &RodParams) -> f64 {
    let (m, n) = (state.m(), state.n());
    0.5 * n.dot(&n) + m.dot(&state.b()) + params.k1() * state.d()[2]
}

/// `(m1² − m3² + 2 K1 n3)² + (2 m1 m3 − 2 K1 n1)²`.
///
/// With `K1 = K3 = 2 K2` the complex quantity `(u3 + i u1)² − (n3 + i n1)/K2`
/// is multiplied along the flow by a unimodular factor, and this is its squared
/// modulus rescaled by `K1⁴`.
pub fn kovalevskaya_integral(state: &FieldState, params: &RodParams) -> f64 {
    let (m, n) = (state.m(), state.n());
    let k1 = params.k1();
    (m[0] * m[0] - m[2] * m[2] + 2.0 * k1 * n[2]).powi(2) + (2.0 * m[0] * m[2] - 2.0 * k1 * n[0]).powi(2)
}

/// `(K1² m1² − K3² m3² + n3)² + (2 K1 K3 m1 m3 − n1)²`, verbatim.
pub fn kovalevskaya_integral_printed(state: &FieldState, params: &RodParams) -> f64 {
    let (m, n) = (state.m(), state.n());
    let (k1, k3) = (params.k1(), params.k3());
    (k1 * k1 * m[0] * m[0] - k3 * k3 * m[2] * m[2] + n[2]).powi(2) + (2.0 * k1 * k3 * m[0] * m[2] - n[0]).powi(2)
}

/// `m2 (m1² + m3²) − K1 m3 n2`.
pub fn chaplygin_integral(state: &FieldState, params: &RodParams) -> f64 {
    let (m, n) = (state.m(), state.n());
    m[1] * (m[0] * m[0] + m[2] * m[2]) - params.k1() * m[2] * n[1]
}

/// `K2 m2 (K1² m1² + K2² m2²) − K3 m3 n2`, verbatim.
pub fn chaplygin_integral_printed(state: &FieldState, params: &RodParams) -> f64 {
    let (m, n) = (state.m(), state.n());
    let [k1, k2, k3] = params.stiffness();
    k2 * m[1] * (k1 * k1 * m[0] * m[0] + k2 * k2 * m[1] * m[1]) - k3 * m[2] * n[1]
}

/// Whether `m · n = 0` within the relative condition tolerance.
pub fn moment_force_orthogonal(state: &FieldState) -> bool {
    let (m, n) = (state.m(), state.n());
    m.dot(&n).abs() <= CONDITION_TOL * (m.norm() * n.norm()).max(1.0)
}

/// Evaluates every integral whose stiffness condition holds.
pub fn first_integrals(state: &FieldState, params: &RodParams) -> Vec<IntegralEntry> {
    let level = state.level();
    let mut out = Vec::new();
    let mut push = |kind, value, active| out.push(IntegralEntry { kind, value, active });
    if params.is_isotropic() {
        push(IntegralKind::Lagrange, lagrange_integral(state, params), true);
        if level >= HierarchyLevel::Magnetic {
            push(IntegralKind::ForceMoment, force_moment_integral(state, params), true);
        }
        if level == HierarchyLevel::Hypermagnetic {
            push(IntegralKind::FieldMoment, field_moment_integral(state, params), true);
        }
    }
    if level >= HierarchyLevel::Kirchhoff && params.is_kovalevskaya() {
        let active = level == HierarchyLevel::Kirchhoff;
        push(IntegralKind::Kovalevskaya, kovalevskaya_integral(state, params), active);
        push(
            IntegralKind::KovalevskayaPrinted,
            kovalevskaya_integral_printed(state, params),
            active && nearly_equal(params.k2().powi(3), 1.0 / 16.0),
        );
    }
    if level >= HierarchyLevel::Kirchhoff && params.is_chaplygin() {
        let active = level == HierarchyLevel::Kirchhoff && moment_force_orthogonal(state);
        push(IntegralKind::ChaplyginGoryachev, chaplygin_integral(state, params), active);
        push(
            IntegralKind::ChaplyginGoryachevPrinted,
            chaplygin_integral_printed(state, params),
            false,
        );
    }
    out
}

/// Hamiltonian, Casimirs and conditional integrals at one phase point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantLedger {
    pub hamiltonian: f64,
    pub casimirs: Vec<f64>,
    pub integrals: Vec<IntegralEntry>,
}

impl InvariantLedger {
    pub fn evaluate(state: &FieldState, params: &RodParams) -> Self {
        InvariantLedger {
            hamiltonian: hamiltonian(state, params),
            casimirs: casimirs(state),
            integrals: first_integrals(state, params),
        }
    }

    pub fn integral(&self, kind: IntegralKind) -> Option<&IntegralEntry> {
        self.integrals.iter().find(|e| e.kind == kind)
    }

    /// `(name, value)` pairs in column order: `H`, `C1..`, then integrals.
    pub fn columns(&self) -> Vec<(String, f64)> {
        let mut cols = vec![("H".to_string(), self.hamiltonian)];
        cols.extend(self.casimirs.iter().enumerate().map(|(i, c)| (format!("C{}", i + 1), *c)));
        cols.extend(self.integrals.iter().map(|e| (e.kind.name().to_string(), e.value)));
        cols
    }
}

/// `|n × B|` at level 2, `|B × D|` at level 3.
pub fn alignment_defect(state: &FieldState) -> Result<f64> {
    match state.level() {
        HierarchyLevel::Magnetic => Ok(state.n().cross(&state.b()).norm()),
        HierarchyLevel::Hypermagnetic => Ok(state.b().cross(&state.d()).norm()),
        found => Err(RodError::LevelMismatch {
            required: HierarchyLevel::Magnetic,
            found,
        }),
    }
}

/// `max_i |f_i × d3|`: zero exactly on the twisted-straight-rod fixed points.
pub fn straight_rod_defect(state: &FieldState) -> f64 {
    state.fields().iter().map(|f| f.cross(&D3).norm()).fold(0.0, f64::max)
}
