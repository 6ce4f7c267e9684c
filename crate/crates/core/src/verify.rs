//! Self-checks of the structural properties, each reported as a list of
//! measured defects against thresholds.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::integrator::hierarchy::relative_drift;
use crate::integrator::{integrate_framed, simulate, IntegratorOptions, Trajectory};
use crate::lax::{lax_hamiltonian, lax_rhs, residue_invariants, LaxFlow, LaxOperator, MU_SAMPLES};
use crate::model::{alignment_defect, casimir_gradients, casimirs, hamiltonian, hamiltonian_gradient, rhs, strains, RodParams};
use crate::poisson::{central_gradient, lie_poisson_bracket, structure_matrix, ScalarField};
use crate::reduction::{
    canonical_jacobian, canonical_jacobian_fd, from_canonical, printed_jacobian_mismatches, to_canonical,
    verify_canonical, CanonicalState, CasimirTriple, JACOBIAN_STEP, PRINTED_MISPRINTS,
};
use crate::so3::{Triple, D3};
use crate::state::{FieldState, HierarchyLevel};

/// Seed of every suite's random states.
pub const VERIFY_SEED: u64 = 20_240_601;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Canonical,
    Lax,
    Align,
    Jacobi,
    Casimir,
    Roundtrip,
}

impl Suite {
    pub const ALL: [Suite; 6] = [
        Suite::Canonical,
        Suite::Lax,
        Suite::Align,
        Suite::Jacobi,
        Suite::Casimir,
        Suite::Roundtrip,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Canonical => "canonical",
            Suite::Lax => "lax",
            Suite::Align => "align",
            Suite::Jacobi => "jacobi",
            Suite::Casimir => "casimir",
            Suite::Roundtrip => "roundtrip",
        }
    }

    pub fn run(self) -> Result<SuiteReport> {
        let mut rng = ChaCha8Rng::seed_from_u64(VERIFY_SEED);
        let checks = match self {
            Suite::Canonical => canonical_checks(&mut rng)?,
            Suite::Lax => lax_checks(&mut rng)?,
            Suite::Align => align_checks(&mut rng)?,
            Suite::Jacobi => jacobi_checks(&mut rng)?,
            Suite::Casimir => casimir_checks(&mut rng)?,
            Suite::Roundtrip => roundtrip_checks(&mut rng)?,
        };
        Ok(SuiteReport::new(self, checks))
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownSuite(pub String);

impl fmt::Display for UnknownSuite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = Suite::ALL.iter().map(|s| s.name()).collect();
        write!(f, "unknown suite `{}` (expected one of {})", self.0, names.join(", "))
    }
}

impl std::error::Error for UnknownSuite {}

impl FromStr for Suite {
    type Err = UnknownSuite;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.name() == s)
            .ok_or_else(|| UnknownSuite(s.to_string()))
    }
}

/// One measured defect; passes when `measured < threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub threshold: f64,
    pub samples: usize,
    pub passed: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, measured: f64, threshold: f64, samples: usize) -> Self {
        Check {
            name: name.into(),
            measured,
            threshold,
            samples,
            passed: measured < threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub passed: bool,
    pub rng_seed: u64,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    fn new(suite: Suite, checks: Vec<Check>) -> Self {
        SuiteReport {
            suite,
            passed: checks.iter().all(|c| c.passed),
            rng_seed: VERIFY_SEED,
            checks,
        }
    }
}

fn random_triple(rng: &mut ChaCha8Rng) -> Triple {
    Triple::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

fn random_state(rng: &mut ChaCha8Rng, level: HierarchyLevel) -> FieldState {
    let fields: Vec<Triple> = (0..level.field_count()).map(|_| random_triple(rng)).collect();
    FieldState::from_fields(&fields).expect("field count matches level")
}

/// A level-2 state comfortably away from alignment and the chart poles.
fn random_generic_magnetic(rng: &mut ChaCha8Rng) -> FieldState {
    loop {
        let x = random_state(rng, HierarchyLevel::Magnetic);
        let b = x.b();
        let sin_theta = (b[0] * b[0] + b[1] * b[1]).sqrt() / b.norm();
        if x.n().cross(&b).norm() > 0.05 && sin_theta > 0.05 {
            return x;
        }
    }
}

fn canonical_checks(rng: &mut ChaCha8Rng) -> Result<Vec<Check>> {
    let samples = 50;
    let (mut gjg, mut analytic, mut unexpected) = (0.0f64, 0.0f64, 0usize);
    for _ in 0..samples {
        let x = random_generic_magnetic(rng);
        gjg = gjg.max(verify_canonical(&x)?);
        let fd = canonical_jacobian_fd(&x, JACOBIAN_STEP, true)?;
        let an = canonical_jacobian(&x)?;
        analytic = analytic.max((fd - an).amax() / an.amax().max(1.0));
        unexpected += printed_jacobian_mismatches(&x, 1e-6)?
            .iter()
            .filter(|(i, j, _, _)| !PRINTED_MISPRINTS.contains(&(*i, *j)))
            .count();
    }
    Ok(vec![
        Check::new("max |G J G^T - Jbar|, finite-difference G", gjg, 1e-6, samples),
        Check::new("analytic vs finite-difference Jacobian", analytic, 1e-6, samples),
        Check::new("printed transformation entries off beyond known misprints", unexpected as f64, 0.5, samples),
    ])
}

fn lax_checks(rng: &mut ChaCha8Rng) -> Result<Vec<Check>> {
    let params = RodParams::isotropic(1.3, 0.8)?;
    let mut checks = Vec::new();
    for level in HierarchyLevel::ALL {
        let samples = 100;
        let mut defect = 0.0f64;
        for _ in 0..samples {
            let x = random_state(rng, level);
            let gamma = LaxOperator::from_state(&x, params.k1());
            let d = lax_rhs(&gamma, &strains(&x.m(), &params));
            defect = defect.max(d.mu2.vee().amax()).max(d.mu1.vee().amax());
            for (c, f) in d.coeffs.iter().zip(rhs(&x, &params).fields()) {
                defect = defect.max((c.vee() - f).amax());
            }
        }
        checks.push(Check::new(format!("level {level}: Lax coefficients vs rhs"), defect, 1e-13, samples));

        let x = random_state(rng, level);
        let flow = LaxFlow::new(level, params)?;
        let traj = Trajectory::integrate(&flow, &x.as_vec(), (0.0, 20.0), &IntegratorOptions::with_tol(1e-12))?;
        let states: Vec<FieldState> = traj
            .states()
            .iter()
            .map(|y| FieldState::from_slice(level, y))
            .collect::<Result<_>>()?;
        let gammas: Vec<LaxOperator> = states.iter().map(|s| LaxOperator::from_state(s, params.k1())).collect();
        let invariants: Vec<_> = gammas.iter().map(residue_invariants).collect();
        let mut drift = 0.0f64;
        for k in 0..invariants[0].values().len() {
            drift = drift.max(relative_drift(invariants.iter().map(|inv| inv.values()[k])));
        }
        let energies: Vec<f64> = invariants.iter().map(|inv| lax_hamiltonian(inv, &params)).collect::<Result<_>>()?;
        drift = drift.max(relative_drift(energies.iter().copied()));
        drift = drift.max(relative_drift(states.iter().map(|s| hamiltonian(s, &params))));
        checks.push(Check::new(format!("level {level}: residue invariants along the Lax flow"), drift, 1e-9, traj.len()));

        let (first, last) = (&gammas[0], &gammas[gammas.len() - 1]);
        let spectral = MU_SAMPLES
            .iter()
            .map(|&mu| {
                let (a, b) = (first.spectrum(mu), last.spectrum(mu));
                (0..3).map(|i| (a[i] - b[i]).abs() / a[i].abs().max(1.0)).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        checks.push(Check::new(format!("level {level}: relative isospectral drift"), spectral, 1e-8, MU_SAMPLES.len()));
    }
    Ok(checks)
}

fn align_checks(rng: &mut ChaCha8Rng) -> Result<Vec<Check>> {
    let params = RodParams::new(1.0, 1.3, 0.7)?;
    let opts = IntegratorOptions::with_tol(1e-11);
    let samples = 10;
    let mut checks = Vec::new();
    for level in [HierarchyLevel::Magnetic, HierarchyLevel::Hypermagnetic] {
        let (mut defect, mut straight) = (0.0f64, 0.0f64);
        for _ in 0..samples {
            let fields: Vec<Triple> = (0..level.field_count()).map(|_| rng.gen_range(-1.0..1.0) * D3).collect();
            let x = FieldState::from_fields(&fields)?;
            let traj = simulate(&x, &params, (0.0, 100.0), &opts)?;
            defect = defect.max(traj.max_over(|s| alignment_defect(s).unwrap_or(f64::INFINITY)));
            let curve = integrate_framed(&x, &params, UnitQuaternion::identity(), Vector3::zeros(), (0.0, 100.0), &opts)?;
            straight = straight.max(curve.collinearity_defect());
        }
        checks.push(Check::new(format!("level {level}: alignment defect over [0, 100]"), defect, 1e-9, samples));
        checks.push(Check::new(format!("level {level}: centreline collinearity"), straight, 1e-8, samples));
    }
    Ok(checks)
}

/// `a·x + ½ xᵀ Q x` with analytic gradient.
struct Quadratic {
    a: DVector<f64>,
    q: DMatrix<f64>,
}

impl Quadratic {
    fn random(rng: &mut ChaCha8Rng, dim: usize) -> Self {
        let a = DVector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0));
        let m = DMatrix::from_fn(dim, dim, |_, _| rng.gen_range(-1.0..1.0));
        Quadratic {
            a,
            q: 0.5 * (&m + m.transpose()),
        }
    }
}

impl ScalarField for Quadratic {
    fn value(&self, x: &[f64]) -> f64 {
        let x = DVector::from_column_slice(x);
        self.a.dot(&x) + 0.5 * x.dot(&(&self.q * &x))
    }

    fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        let x = DVector::from_column_slice(x);
        Some((&self.a + &self.q * x).as_slice().to_vec())
    }
}

/// `{f, {g, h}} + {g, {h, f}} + {h, {f, g}}`, inner brackets with analytic
/// gradients and the outer gradient by central differences (exact for the
/// cubic inner brackets up to rounding).
fn jacobiator(f: &Quadratic, g: &Quadratic, h: &Quadratic, x: &FieldState) -> Result<f64> {
    let level = x.level();
    let j = structure_matrix(x, level)?;
    fn inner<'a>(a: &'a Quadratic, b: &'a Quadratic, level: HierarchyLevel) -> impl Fn(&[f64]) -> f64 + 'a {
        move |y: &[f64]| -> f64 {
            let s = FieldState::from_slice(level, y).expect("packed state");
            lie_poisson_bracket(a, b, &s, level).expect("level matches")
        }
    }
    let v = x.as_vec();
    let mut total = 0.0;
    for (outer, (a, b)) in [(f, (g, h)), (g, (h, f)), (h, (f, g))] {
        let grad_inner = central_gradient(&inner(a, b, level), &v, 1e-3);
        total += j.pair(&outer.gradient(&v).expect("analytic"), &grad_inner);
    }
    Ok(total.abs())
}

fn jacobi_checks(rng: &mut ChaCha8Rng) -> Result<Vec<Check>> {
    let samples = 20;
    let mut checks = Vec::new();
    for level in HierarchyLevel::ALL {
        let mut worst = 0.0f64;
        for _ in 0..samples {
            let x = random_state(rng, level);
            let (f, g, h) = (
                Quadratic::random(rng, level.dim()),
                Quadratic::random(rng, level.dim()),
                Quadratic::random(rng, level.dim()),
            );
            worst = worst.max(jacobiator(&f, &g, &h, &x)?);
        }
        checks.push(Check::new(format!("level {level}: Jacobi identity"), worst, 1e-8, samples));

        let x = random_state(rng, level);
        let antisym = {
            let (f, g) = (Quadratic::random(rng, level.dim()), Quadratic::random(rng, level.dim()));
            (lie_poisson_bracket(&f, &g, &x, level)? + lie_poisson_bracket(&g, &f, &x, level)?).abs()
        };
        checks.push(Check::new(format!("level {level}: antisymmetry"), antisym, 1e-12, 1));
    }
    Ok(checks)
}

fn casimir_checks(rng: &mut ChaCha8Rng) -> Result<Vec<Check>> {
    let params = RodParams::new(1.0, 1.3, 0.7)?;
    let opts = IntegratorOptions::with_tol(1e-11);
    let mut checks = Vec::new();
    for level in HierarchyLevel::ALL {
        let samples = 20;
        let (mut kernel, mut poisson) = (0.0f64, 0.0f64);
        for _ in 0..samples {
            let x = random_state(rng, level);
            let j = structure_matrix(&x, level)?;
            let grad_h = hamiltonian_gradient(&x, &params).as_vec();
            for c in casimir_gradients(&x) {
                kernel = kernel.max(j.apply(&c.as_vec()).iter().fold(0.0, |acc, v| acc.max(v.abs())));
                poisson = poisson.max(j.pair(&c.as_vec(), &grad_h).abs());
            }
        }
        checks.push(Check::new(format!("level {level}: J grad C"), kernel, 1e-12, samples));
        checks.push(Check::new(format!("level {level}: {{C, H}}"), poisson, 1e-12, samples));

        let mut drift = 0.0f64;
        for _ in 0..5 {
            let x = random_state(rng, level);
            let traj = simulate(&x, &params, (0.0, 100.0), &opts)?;
            let states = traj.states();
            drift = drift.max(relative_drift(states.iter().map(|s| hamiltonian(s, &params))));
            for k in 0..level.field_count() {
                drift = drift.max(relative_drift(states.iter().map(|s| casimirs(s)[k])));
            }
        }
        checks.push(Check::new(format!("level {level}: H and Casimir drift over [0, 100]"), drift, 1e-9, 5));
    }
    Ok(checks)
}

fn roundtrip_checks(rng: &mut ChaCha8Rng) -> Result<Vec<Check>> {
    let samples = 50;
    let mut body = 0.0f64;
    for _ in 0..samples {
        let x = random_generic_magnetic(rng);
        let (c, cas) = to_canonical(&x)?;
        let y = from_canonical(&c, &cas)?;
        body = body.max((0..3).map(|i| (x.field(i) - y.field(i)).amax()).fold(0.0, f64::max));
    }
    let cas = CasimirTriple::new(1.02, 1.0, 1.0)?;
    let mut canonical = 0.0f64;
    let mut count = 0;
    while count < samples {
        let c = CanonicalState {
            theta: rng.gen_range(0.2..std::f64::consts::PI - 0.2),
            psi: rng.gen_range(-3.0..3.0),
            phi: rng.gen_range(-3.0..3.0),
            p_theta: rng.gen_range(-1.0..1.0),
            p_psi: rng.gen_range(-1.0..1.0),
            p_phi: rng.gen_range(-1.0..1.0),
        };
        if cas.radicand(c.p_psi) < 0.05 {
            continue;
        }
        count += 1;
        let x = from_canonical(&c, &cas)?;
        let (back, cas_back) = to_canonical(&x)?;
        let diff = c
            .to_array()
            .iter()
            .zip(back.to_array())
            .map(|(a, b)| (a - b).abs())
            .chain([
                (cas.c1 - cas_back.c1).abs(),
                (cas.c2 - cas_back.c2).abs(),
                (cas.c3 - cas_back.c3).abs(),
            ])
            .fold(0.0, f64::max);
        canonical = canonical.max(diff);
    }
    Ok(vec![
        Check::new("body -> canonical -> body", body, 1e-10, samples),
        Check::new("canonical -> body -> canonical", canonical, 1e-10, samples),
    ])
}

/// Runs every suite in order.
pub fn run_all() -> Result<Vec<SuiteReport>> {
    Suite::ALL.iter().map(|s| s.run()).collect()
}

