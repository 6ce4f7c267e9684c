//! Poincaré sections `cos ψ = α` of the isotropic magnetic rod.
//!
//! Orbits can be followed either in the reduced canonical variables or in the
//! nine body components; the latter has no chart singularity and is mapped to
//! `(θ, p_θ)` only at the crossings.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, RodError};
use crate::integrator::{integrate_with, single_step, Control, DenseStep, Flow, HierarchyFlow, IntegratorOptions, Trajectory};
use crate::model::{force_moment_integral, hamiltonian, RodParams};
use crate::reduction::{
    from_canonical, integral_i, reduced_hamiltonian_isotropic, to_canonical_on, CanonicalState, CasimirTriple,
    ReducedFlow,
};
use crate::roots::{bisect, bracketed_root};
use crate::state::{FieldState, HierarchyLevel};

/// Bisection steps on the dense output before the exact refinement.
pub const BISECTION_STEPS: usize = 30;

/// Sub-intervals per step probed for sign changes.
const PROBES_PER_STEP: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Increasing,
    Decreasing,
    Both,
}

impl Direction {
    fn admits(self, increasing: bool) -> bool {
        match self {
            Direction::Increasing => increasing,
            Direction::Decreasing => !increasing,
            Direction::Both => true,
        }
    }
}

/// The plane `cos ψ = α` and the stopping rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectionSpec {
    pub alpha: f64,
    pub direction: Direction,
    pub max_crossings: usize,
    pub max_arclength: f64,
}

impl SectionSpec {
    pub fn new(alpha: f64, direction: Direction, max_crossings: usize, max_arclength: f64) -> Result<Self> {
        let spec = SectionSpec {
            alpha,
            direction,
            max_crossings,
            max_arclength,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.abs() < 1.0) {
            return Err(RodError::InvalidSection(format!("|alpha| = {} must be below 1", self.alpha.abs())));
        }
        if !(self.max_arclength.is_finite() && self.max_arclength > 0.0) {
            return Err(RodError::InvalidSection(format!(
                "max_arclength = {} must be finite and positive",
                self.max_arclength
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectionPoint {
    pub s: f64,
    pub theta: f64,
    pub p_theta: f64,
    /// `|cos ψ − α|` at the refined crossing.
    pub residual: f64,
    pub increasing: bool,
    pub hamiltonian: f64,
    pub integral: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SectionPointSet {
    pub points: Vec<SectionPoint>,
}

impl SectionPointSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn max_residual(&self) -> f64 {
        self.points.iter().map(|p| p.residual).fold(0.0, f64::max)
    }

    /// Largest deviation of `H` and `𝓘` from the given values.
    pub fn max_invariant_error(&self, h: f64, i: f64) -> f64 {
        self.points
            .iter()
            .map(|p| (p.hamiltonian - h).abs().max((p.integral - i).abs()))
            .fold(0.0, f64::max)
    }

    pub fn within(&self, window: &Window) -> Vec<&SectionPoint> {
        self.points.iter().filter(|p| window.contains(p.theta, p.p_theta)).collect()
    }

    pub fn coordinates(&self) -> Vec<(f64, f64)> {
        self.points.iter().map(|p| (p.theta, p.p_theta)).collect()
    }
}

/// Open rectangle in the `(θ, p_θ)` plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub theta: (f64, f64),
    pub p_theta: (f64, f64),
}

impl Window {
    /// `θ ∈ (0, 2.5)`, `p_θ ∈ (−1.5, 1.5)`: the usual plotting window.
    pub const FIGURE: Window = Window {
        theta: (0.0, 2.5),
        p_theta: (-1.5, 1.5),
    };

    pub fn contains(&self, theta: f64, p_theta: f64) -> bool {
        theta > self.theta.0 && theta < self.theta.1 && p_theta > self.p_theta.0 && p_theta < self.p_theta.1
    }
}

/// A flow together with the section function and the section coordinates.
pub trait SectionSystem: Flow + Sync {
    /// `cos ψ − α` evaluated from the raw state.
    fn section_value(&self, y: &[f64], alpha: f64) -> f64;

    /// `(θ, p_θ, cos ψ)` at `y`.
    fn section_coordinates(&self, y: &[f64]) -> Result<(f64, f64, f64)>;

    /// `(H, 𝓘)` at `y`.
    fn invariants(&self, y: &[f64]) -> Result<(f64, f64)>;
}

/// The reduced flow on `(θ, ψ, φ, p_θ, p_ψ, p_φ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedSection(pub ReducedFlow);

impl Flow for ReducedSection {
    fn dim(&self) -> usize {
        6
    }

    fn eval(&self, s: f64, y: &[f64], dy: &mut [f64]) {
        self.0.eval(s, y, dy)
    }
}

impl SectionSystem for ReducedSection {
    fn section_value(&self, y: &[f64], alpha: f64) -> f64 {
        y[1].cos() - alpha
    }

    fn section_coordinates(&self, y: &[f64]) -> Result<(f64, f64, f64)> {
        Ok((y[0], y[3], y[1].cos()))
    }

    fn invariants(&self, y: &[f64]) -> Result<(f64, f64)> {
        let c = CanonicalState::from_array(y);
        Ok((
            reduced_hamiltonian_isotropic(&c, &self.0.cas, &self.0.params)?,
            integral_i(&c, &self.0.cas, &self.0.params)?,
        ))
    }
}

/// The level-2 body flow on a fixed Casimir level set.
#[derive(Debug, Clone, PartialEq)]
pub struct BodySection {
    pub flow: HierarchyFlow,
    pub cas: CasimirTriple,
}

impl BodySection {
    pub fn new(cas: CasimirTriple, params: RodParams) -> Result<Self> {
        params.bending()?;
        Ok(BodySection {
            flow: HierarchyFlow::new(HierarchyLevel::Magnetic, params),
            cas,
        })
    }

    fn state(&self, y: &[f64]) -> Result<FieldState> {
        FieldState::from_slice(HierarchyLevel::Magnetic, y)
    }
}

impl Flow for BodySection {
    fn dim(&self) -> usize {
        9
    }

    fn eval(&self, s: f64, y: &[f64], dy: &mut [f64]) {
        self.flow.eval(s, y, dy)
    }
}

impl SectionSystem for BodySection {
    /// `w·a / |(w·a, w·e)| − α` with `w = n − (C2/C3) B` and `(a, e)` the
    /// frame of the canonical chart.
    fn section_value(&self, y: &[f64], alpha: f64) -> f64 {
        let Ok(x) = self.state(y) else {
            return f64::NAN;
        };
        let b = x.b();
        let root = self.cas.c3.sqrt();
        let cos_theta = (b[2] / root).clamp(-1.0, 1.0);
        let sin_theta = (1.0 - cos_theta * cos_theta).sqrt();
        let (sp, cp) = b[1].atan2(-b[0]).sin_cos();
        let w = x.n() - (self.cas.c2 / self.cas.c3) * b;
        let wa = w[0] * cos_theta * cp - w[1] * cos_theta * sp + w[2] * sin_theta;
        let we = -w[0] * sp - w[1] * cp;
        wa / wa.hypot(we) - alpha
    }

    fn section_coordinates(&self, y: &[f64]) -> Result<(f64, f64, f64)> {
        let c = to_canonical_on(&self.state(y)?, &self.cas)?;
        Ok((c.theta, c.p_theta, c.psi.cos()))
    }

    fn invariants(&self, y: &[f64]) -> Result<(f64, f64)> {
        let x = self.state(y)?;
        Ok((hamiltonian(&x, &self.flow.params), force_moment_integral(&x, &self.flow.params)))
    }
}

/// Refines a bracketed crossing inside one step: bisection on the dense
/// output, then Newton corrections with exact single steps from the step's
/// start.
fn refine_crossing<S: SectionSystem + ?Sized>(sys: &S, step: &DenseStep, alpha: f64, lo: f64, hi: f64) -> (f64, Vec<f64>) {
    let g = |s: f64| sys.section_value(&step.at(s), alpha);
    let mut s_star = bisect(g, lo, hi, BISECTION_STEPS).unwrap_or(0.5 * (lo + hi));
    let mut y = single_step(sys, step.s0, step.start(), s_star - step.s0);
    let mut dy = vec![0.0; y.len()];
    for _ in 0..4 {
        let value = sys.section_value(&y, alpha);
        sys.eval(s_star, &y, &mut dy);
        let eps = 1e-7;
        let plus: Vec<f64> = y.iter().zip(&dy).map(|(a, b)| a + eps * b).collect();
        let minus: Vec<f64> = y.iter().zip(&dy).map(|(a, b)| a - eps * b).collect();
        let slope = (sys.section_value(&plus, alpha) - sys.section_value(&minus, alpha)) / (2.0 * eps);
        if !(slope.is_finite() && slope != 0.0) {
            break;
        }
        let ds = -value / slope;
        if ds.abs() < 1e-15 * (1.0 + s_star.abs()) {
            break;
        }
        s_star += ds;
        y = single_step(sys, step.s0, step.start(), s_star - step.s0);
    }
    (s_star, y)
}

/// All crossings of `spec` inside one accepted step.
pub fn crossings_in_step<S: SectionSystem + ?Sized>(sys: &S, step: &DenseStep, spec: &SectionSpec) -> Vec<SectionPoint> {
    let mut out = Vec::new();
    let nodes: Vec<f64> = (0..=PROBES_PER_STEP)
        .map(|k| step.s0 + step.h * k as f64 / PROBES_PER_STEP as f64)
        .collect();
    let values: Vec<f64> = nodes.iter().map(|&s| sys.section_value(&step.at(s), spec.alpha)).collect();
    for k in 0..PROBES_PER_STEP {
        let (g0, g1) = (values[k], values[k + 1]);
        if !(g0.is_finite() && g1.is_finite()) || g0 == 0.0 || g0.signum() == g1.signum() {
            continue;
        }
        let increasing = (g1 > g0) == (step.h > 0.0);
        if !spec.direction.admits(increasing) {
            continue;
        }
        let (s, y) = refine_crossing(sys, step, spec.alpha, nodes[k], nodes[k + 1]);
        let (Ok((theta, p_theta, cos_psi)), Ok((h, i))) = (sys.section_coordinates(&y), sys.invariants(&y)) else {
            continue;
        };
        out.push(SectionPoint {
            s,
            theta,
            p_theta,
            residual: (cos_psi - spec.alpha).abs(),
            increasing,
            hamiltonian: h,
            integral: i,
        });
    }
    out
}

/// Crossings of a stored trajectory of `sys`.
pub fn find_crossings<S: SectionSystem + ?Sized>(sys: &S, traj: &Trajectory, spec: &SectionSpec) -> SectionPointSet {
    let mut points = Vec::new();
    for step in traj.segments() {
        for p in crossings_in_step(sys, step, spec) {
            if points.len() < spec.max_crossings {
                points.push(p);
            }
        }
    }
    SectionPointSet { points }
}

/// Integrates from `y0` until `spec.max_arclength` or `spec.max_crossings`,
/// collecting crossings on the fly.
pub fn trace_orbit<S: SectionSystem + ?Sized>(sys: &S, y0: &[f64], spec: &SectionSpec, opts: &IntegratorOptions) -> Result<SectionPointSet> {
    spec.validate()?;
    let mut points = Vec::new();
    integrate_with(sys, y0, (0.0, spec.max_arclength), opts, |step| {
        for p in crossings_in_step(sys, step, spec) {
            if points.len() < spec.max_crossings {
                points.push(p);
            }
        }
        if points.len() >= spec.max_crossings {
            Control::Stop
        } else {
            Control::Continue
        }
    })?;
    Ok(SectionPointSet { points })
}

/// Level set `(H, 𝓘)` of the isotropic reduced system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelSetTargets {
    pub hamiltonian: f64,
    pub integral: f64,
    pub casimirs: CasimirTriple,
    pub p_phi: f64,
    pub params: RodParams,
}

/// Tolerance on `H` and `𝓘` for accepted seeds.
pub const SEED_TOL: f64 = 1e-10;

/// Deterministic random search for points on a level set of `(H, 𝓘)`.
///
/// Draws `(θ, ψ)`, then for `p_θ` on a grid solves `𝓘 = I_target` for `p_ψ`
/// (first or second root on the admissible range) and finally solves
/// `H = H_target` for `p_θ`.
pub fn seed_on_level_set(targets: &LevelSetTargets, n_seeds: usize, rng_seed: u64) -> Result<Vec<CanonicalState>> {
    seed_on_level_set_with(targets, n_seeds, rng_seed, 20_000)
}

pub fn seed_on_level_set_with(targets: &LevelSetTargets, n_seeds: usize, rng_seed: u64, attempts: usize) -> Result<Vec<CanonicalState>> {
    targets.params.bending()?;
    let cas = &targets.casimirs;
    let p_psi_max = cas.reduced_energy() / (2.0 * cas.c3.sqrt());
    let p_psi_min = p_psi_max - 8.0;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut out = Vec::new();
    let eval = |theta: f64, psi: f64, p_theta: f64, p_psi: f64| CanonicalState {
        theta,
        psi,
        phi: 0.0,
        p_theta,
        p_psi,
        p_phi: targets.p_phi,
    };
    for _ in 0..attempts {
        let theta = rng.gen_range(0.05..3.0);
        let psi = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
        let p_psi_roots = |p_theta: f64| -> Vec<f64> {
            let f = |p: f64| integral_i(&eval(theta, psi, p_theta, p), cas, &targets.params).map_or(f64::NAN, |v| v - targets.integral);
            let n = 200;
            let grid: Vec<f64> = (0..=n)
                .map(|k| p_psi_min + (p_psi_max - 1e-12 - p_psi_min) * k as f64 / n as f64)
                .collect();
            let vals: Vec<f64> = grid.iter().map(|&p| f(p)).collect();
            (0..n)
                .filter(|&k| vals[k].is_finite() && vals[k + 1].is_finite() && vals[k].signum() != vals[k + 1].signum())
                .filter_map(|k| bracketed_root(f, grid[k], grid[k + 1], 1e-15, 200))
                .collect()
        };
        for root_index in 0..2 {
            let energy = |p_theta: f64| -> f64 {
                match p_psi_roots(p_theta).get(root_index) {
                    Some(&p) => reduced_hamiltonian_isotropic(&eval(theta, psi, p_theta, p), cas, &targets.params)
                        .map_or(f64::NAN, |h| h - targets.hamiltonian),
                    None => f64::NAN,
                }
            };
            let grid: Vec<f64> = (0..=20).map(|k| -1.5 + 0.15 * k as f64).collect();
            let vals: Vec<f64> = grid.iter().map(|&p| energy(p)).collect();
            let Some(k) = (0..20).find(|&k| vals[k].is_finite() && vals[k + 1].is_finite() && vals[k].signum() != vals[k + 1].signum())
            else {
                continue;
            };
            let Some(p_theta) = bracketed_root(energy, grid[k], grid[k + 1], 1e-15, 200) else {
                continue;
            };
            let Some(&p_psi) = p_psi_roots(p_theta).get(root_index) else {
                continue;
            };
            let seed = eval(theta, psi, p_theta, p_psi);
            let h = reduced_hamiltonian_isotropic(&seed, cas, &targets.params)?;
            let i = integral_i(&seed, cas, &targets.params)?;
            if (h - targets.hamiltonian).abs() < SEED_TOL
                && (i - targets.integral).abs() < SEED_TOL
                && cas.radicand(p_psi) > 0.0
            {
                out.push(seed);
                break;
            }
        }
        if out.len() >= n_seeds {
            return Ok(out);
        }
    }
    if out.is_empty() {
        Err(RodError::NoSeedFound { attempts })
    } else {
        Ok(out)
    }
}

/// Which equations carry the orbits of a scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OrbitSystem {
    Reduced,
    Body,
}

/// One orbit's crossings, tagged with its seed index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitSection {
    pub orbit_id: usize,
    pub seed: CanonicalState,
    pub points: SectionPointSet,
}

/// Follows every seed, in parallel, and returns the orbits in seed order.
pub fn scan(
    spec: &SectionSpec,
    targets: &LevelSetTargets,
    seeds: &[CanonicalState],
    system: OrbitSystem,
    opts: &IntegratorOptions,
) -> Result<Vec<OrbitSection>> {
    spec.validate()?;
    seeds
        .par_iter()
        .enumerate()
        .map(|(orbit_id, seed)| {
            let points = match system {
                OrbitSystem::Reduced => {
                    let sys = ReducedSection(ReducedFlow::new(targets.casimirs, targets.params)?);
                    trace_orbit(&sys, &seed.to_array(), spec, opts)?
                }
                OrbitSystem::Body => {
                    let sys = BodySection::new(targets.casimirs, targets.params)?;
                    let y0 = from_canonical(seed, &targets.casimirs)?.as_vec();
                    trace_orbit(&sys, &y0, spec, opts)?
                }
            };
            Ok(OrbitSection {
                orbit_id,
                seed: *seed,
                points,
            })
        })
        .collect()
}

/// CSV with columns `orbit_id, s, theta, p_theta, residual`.
pub fn write_sections_csv<W: Write>(orbits: &[OrbitSection], out: &mut W) -> std::io::Result<()> {
    use crate::integrator::format_real;
    writeln!(out, "orbit_id,s,theta,p_theta,residual")?;
    for orbit in orbits {
        for p in &orbit.points.points {
            writeln!(
                out,
                "{},{},{},{},{}",
                orbit.orbit_id,
                format_real(p.s),
                format_real(p.theta),
                format_real(p.p_theta),
                format_real(p.residual)
            )?;
        }
    }
    Ok(())
}

/// Reproducibility record of a scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanManifest {
    pub targets: LevelSetTargets,
    pub section: SectionSpec,
    pub system: OrbitSystem,
    pub tol: f64,
    pub rng_seed: u64,
    pub seeds: Vec<CanonicalState>,
    pub crossings: Vec<usize>,
}

/// Correlation dimension of a planar point set: the slope of `log C(r)`
/// against `log r`, where `C(r)` is the fraction of pairs closer than `r`,
/// fitted over eight radii from twice the median nearest-neighbour distance
/// to a quarter of the diameter. Close to 1 for points on a curve, close to 2
/// for points filling an area.
pub fn curve_dimension(points: &[(f64, f64)]) -> f64 {
    let n = points.len();
    if n < 16 {
        return f64::NAN;
    }
    let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
    let mut nearest = vec![f64::INFINITY; n];
    for i in 0..n {
        for j in i + 1..n {
            let d = (points[i].0 - points[j].0).hypot(points[i].1 - points[j].1);
            pairs.push(d);
            nearest[i] = nearest[i].min(d);
            nearest[j] = nearest[j].min(d);
        }
    }
    nearest.sort_by(f64::total_cmp);
    pairs.sort_by(f64::total_cmp);
    let median = if n.is_multiple_of(2) {
        0.5 * (nearest[n / 2 - 1] + nearest[n / 2])
    } else {
        nearest[n / 2]
    };
    let diameter = pairs[pairs.len() - 1];
    let r1 = 2.0 * median;
    let r2 = (0.25 * diameter).max(2.0 * r1);
    if !(r1 > 0.0) {
        return f64::NAN;
    }
    let radii = 8;
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for k in 0..radii {
        let r = r1 * (r2 / r1).powf(k as f64 / (radii - 1) as f64);
        let count = pairs.partition_point(|&d| d < r);
        if count > 0 {
            xs.push(r.ln());
            ys.push((count as f64 / pairs.len() as f64).ln());
        }
    }
    if xs.len() < 2 {
        return f64::NAN;
    }
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}
