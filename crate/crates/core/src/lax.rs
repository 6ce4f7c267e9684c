//! Parametrised Lax pair of the isotropic hierarchy.
//!
//! `Γ(μ) = K d̂3 μ + Γ0 + Γ1 μ⁻¹ + … + Γn μ⁻ⁿ` with `Γ0 = m̂`, `Γ1 = n̂`,
//! `Γ2 = B̂`, `Γ3 = D̂`, evolving by `Γ' = [Γ, d̂3 μ + û]`.

use nalgebra::Matrix3;
use serde::Serialize;

use crate::error::{Result, RodError};
use crate::integrator::Flow;
use crate::model::{strains, RodParams};
use crate::so3::{hat, SkewMatrix3, Triple, D3};
use crate::state::{FieldState, HierarchyLevel};

/// Spectral parameters used for the isospectrality checks.
pub const MU_SAMPLES: [f64; 10] = [0.5, -0.5, 1.0, -1.0, 2.0, -2.0, 4.0, -4.0, 8.0, 1.0 / 3.0];

#[derive(Debug, Clone, PartialEq)]
pub struct LaxOperator {
    /// Bending stiffness multiplying `d̂3 μ`.
    pub k: f64,
    /// `Γ0, …, Γn`.
    pub coeffs: Vec<SkewMatrix3>,
}

impl LaxOperator {
    pub fn from_state(state: &FieldState, k: f64) -> Self {
        LaxOperator {
            k,
            coeffs: state.fields().iter().map(hat).collect(),
        }
    }

    pub fn level(&self) -> HierarchyLevel {
        HierarchyLevel::from_index(self.coeffs.len() - 1).expect("one to four coefficients")
    }

    pub fn to_state(&self) -> FieldState {
        let fields: Vec<Triple> = self.coeffs.iter().map(SkewMatrix3::vee).collect();
        FieldState::from_fields(&fields).expect("finite coefficients")
    }

    /// Axial vectors `f_j` of the Laurent coefficients of `μ⁻ʲ`, `j = −1..=n`.
    fn laurent_vectors(&self) -> Vec<Triple> {
        std::iter::once(self.k * D3)
            .chain(self.coeffs.iter().map(SkewMatrix3::vee))
            .collect()
    }

    /// `Γ(μ)` as a dense matrix.
    pub fn eval(&self, mu: f64) -> Matrix3<f64> {
        let mut g = hat(&(self.k * D3)).to_matrix() * mu;
        let mut power = 1.0;
        for c in &self.coeffs {
            g += c.to_matrix() * power;
            power /= mu;
        }
        g
    }

    /// Imaginary parts of the eigenvalues of `Γ(μ)`, sorted ascending.
    ///
    /// `Γ(μ)` is real antisymmetric of odd size, so its spectrum is
    /// `{0, ±iω}` with `ω²` the double eigenvalue of the symmetric `−Γ(μ)²`.
    pub fn spectrum(&self, mu: f64) -> [f64; 3] {
        let g = self.eval(mu);
        let mut lambda: Vec<f64> = (-(g * g)).symmetric_eigenvalues().iter().copied().collect();
        lambda.sort_by(f64::total_cmp);
        let omega = (0.5 * (lambda[1] + lambda[2])).max(0.0).sqrt();
        [-omega, 0.0, omega]
    }

    /// Coefficients `t_p` of `trace Γ(μ)² = Σ t_p μ^p`, `p = 2, 1, …, −2n`,
    /// from matrix products.
    pub fn trace_square(&self) -> LaurentSeries {
        let f: Vec<Matrix3<f64>> = self.laurent_vectors().iter().map(|v| hat(v).to_matrix()).collect();
        let n = self.coeffs.len() - 1;
        let mut coeffs = vec![0.0; 2 * n + 3];
        for (a, fa) in f.iter().enumerate() {
            for (b, fb) in f.iter().enumerate() {
                // f[a] multiplies μ^{1−a}.
                let power = 2 - (a + b) as i32;
                coeffs[(2 - power) as usize] += (fa * fb).trace();
            }
        }
        LaurentSeries { top: 2, coeffs }
    }
}

/// `Σ c_k μ^{top − k}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaurentSeries {
    pub top: i32,
    pub coeffs: Vec<f64>,
}

impl LaurentSeries {
    pub fn coeff(&self, power: i32) -> f64 {
        let k = self.top - power;
        if k < 0 {
            return 0.0;
        }
        self.coeffs.get(k as usize).copied().unwrap_or(0.0)
    }

    /// `residue_{μ=0}(μ^shift · series)`.
    pub fn residue(&self, shift: i32) -> f64 {
        self.coeff(-1 - shift)
    }
}

/// Laurent coefficients of `[Γ(μ), d̂3 μ + û]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaxDerivative {
    /// Coefficient of `μ²`; vanishes identically.
    pub mu2: SkewMatrix3,
    /// Coefficient of `μ`; vanishes iff `K u⊥ = m⊥`, i.e. for isotropic rods.
    pub mu1: SkewMatrix3,
    /// Coefficients of `μ⁰, …, μ⁻ⁿ`: the equations of motion of `Γ0..Γn`.
    pub coeffs: Vec<SkewMatrix3>,
}

/// Expands `[Γ(μ), d̂3 μ + û]` in powers of `μ`.
pub fn lax_rhs(gamma: &LaxOperator, u: &Triple) -> LaxDerivative {
    let d3 = hat(&D3);
    let u = hat(u);
    let f: Vec<SkewMatrix3> = gamma.laurent_vectors().iter().map(hat).collect();
    let n = gamma.coeffs.len();
    // f[t] multiplies μ^{1−t}; the coefficient of μ^{2−t} is
    // [f[t], d̂3] + [f[t−1], û].
    let coeff = |t: usize| -> SkewMatrix3 {
        let mut c = SkewMatrix3::zero();
        if t <= n {
            c = c + f[t].commutator(&d3);
        }
        if t >= 1 {
            c = c + f[t - 1].commutator(&u);
        }
        c
    };
    LaxDerivative {
        mu2: coeff(0),
        mu1: coeff(1),
        coeffs: (2..=n + 1).map(coeff).collect(),
    }
}

/// Residue-generated quantities `I_i`, `i = −1..n−1`, and `C_i`, `i = n..2n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidueInvariants {
    pub level: HierarchyLevel,
    pub integrals: Vec<(i32, f64)>,
    pub casimirs: Vec<(i32, f64)>,
    /// `I_0`, also when `n = 0` places index 0 among the Casimirs.
    pub i0: f64,
}

impl ResidueInvariants {
    pub fn integral(&self, i: i32) -> Option<f64> {
        self.integrals.iter().find(|(k, _)| *k == i).map(|(_, v)| *v)
    }

    pub fn values(&self) -> Vec<f64> {
        self.integrals.iter().chain(&self.casimirs).map(|(_, v)| *v).collect()
    }
}

/// `−¼ residue(μ^{i−1} trace Γ(μ)²)` over the index ranges of the level.
pub fn residue_invariants(gamma: &LaxOperator) -> ResidueInvariants {
    let series = gamma.trace_square();
    let n = gamma.coeffs.len() as i32 - 1;
    let at = |i: i32| -0.25 * series.residue(i - 1);
    ResidueInvariants {
        level: gamma.level(),
        integrals: (-1..n).map(|i| (i, at(i))).collect(),
        casimirs: (n..=2 * n).map(|i| (i, at(i))).collect(),
        i0: at(0),
    }
}

/// Factors `c_k` with residue Casimir `k` equal to `c_k` times the `k`-th
/// entry of [`crate::model::casimirs`]: the top one is halved.
pub fn residue_casimir_factors(level: HierarchyLevel) -> Vec<f64> {
    let mut f = vec![1.0; level.field_count()];
    *f.last_mut().unwrap() = 0.5;
    f
}

/// `H = I0/K + (K − K3)/(2 K K3) (I_{−1}/K)²`.
pub fn lax_hamiltonian(inv: &ResidueInvariants, params: &RodParams) -> Result<f64> {
    let k = params.bending()?;
    let k3 = params.k3();
    let i_m1 = inv.integral(-1).ok_or(RodError::InvalidParams("missing I_-1".into()))?;
    Ok(inv.i0 / k + (k - k3) / (2.0 * k * k3) * (i_m1 / k).powi(2))
}

/// The Lax equations for `Γ0..Γn` as a flow on packed axial vectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaxFlow {
    pub level: HierarchyLevel,
    pub params: RodParams,
}

impl LaxFlow {
    pub fn new(level: HierarchyLevel, params: RodParams) -> Result<Self> {
        params.bending()?;
        Ok(LaxFlow { level, params })
    }
}

impl Flow for LaxFlow {
    fn dim(&self) -> usize {
        self.level.dim()
    }

    fn eval(&self, _s: f64, y: &[f64], dy: &mut [f64]) {
        let Ok(state) = FieldState::from_slice(self.level, y) else {
            dy.fill(f64::NAN);
            return;
        };
        let gamma = LaxOperator::from_state(&state, self.params.k1());
        let d = lax_rhs(&gamma, &strains(&state.m(), &self.params));
        for (chunk, c) in dy.chunks_exact_mut(3).zip(&d.coeffs) {
            chunk.copy_from_slice(c.vee().as_slice());
        }
    }
}
