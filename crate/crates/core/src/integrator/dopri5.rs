//! Dormand-Prince 5(4) with Hairer's step-size control and the standard
//! fourth-order continuous extension.

use crate::error::{Result, RodError};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const BETA: f64 = 0.04;

/// Right-hand side of an autonomous or arclength-dependent first-order system.
pub trait Flow {
    fn dim(&self) -> usize;

    fn eval(&self, s: f64, y: &[f64], dy: &mut [f64]);

    /// Post-step correction applied to every accepted state.
    fn project(&self, _y: &mut [f64]) {}
}

/// Adapter turning a closure into a [`Flow`].
pub struct FnFlow<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(f64, &[f64], &mut [f64])> FnFlow<F> {
    pub fn new(dim: usize, f: F) -> Self {
        FnFlow { dim, f }
    }
}

impl<F: Fn(f64, &[f64], &mut [f64])> Flow for FnFlow<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, s: f64, y: &[f64], dy: &mut [f64]) {
        (self.f)(s, y, dy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorOptions {
    /// Shared relative and absolute local error tolerance.
    pub tol: f64,
    pub initial_step: Option<f64>,
    pub max_step: f64,
    pub max_steps: usize,
    /// Apply [`Flow::project`] after each accepted step.
    pub project: bool,
}

impl IntegratorOptions {
    pub fn with_tol(tol: f64) -> Self {
        IntegratorOptions {
            tol,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1e-13..=1e-3).contains(&self.tol) {
            return Err(RodError::InvalidTolerance { tol: self.tol });
        }
        Ok(())
    }
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        IntegratorOptions {
            tol: 1e-10,
            initial_step: None,
            max_step: f64::INFINITY,
            max_steps: 50_000_000,
            project: false,
        }
    }
}

/// One accepted step together with its continuous extension.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseStep {
    pub s0: f64,
    pub h: f64,
    /// `[y0, y1 − y0, h k1 − (y1 − y0), ...]`, five blocks of `dim`.
    pub coeffs: Vec<f64>,
}

impl DenseStep {
    pub fn dim(&self) -> usize {
        self.coeffs.len() / 5
    }

    pub fn s1(&self) -> f64 {
        self.s0 + self.h
    }

    pub fn start(&self) -> &[f64] {
        &self.coeffs[..self.dim()]
    }

    pub fn end(&self) -> Vec<f64> {
        let n = self.dim();
        (0..n).map(|i| self.coeffs[i] + self.coeffs[n + i]).collect()
    }

    /// Interpolated state at `s ∈ [s0, s0 + h]`.
    pub fn eval(&self, s: f64, out: &mut [f64]) {
        let n = self.dim();
        let theta = (s - self.s0) / self.h;
        let theta1 = 1.0 - theta;
        let c = &self.coeffs;
        for i in 0..n {
            out[i] = c[i]
                + theta * (c[n + i] + theta1 * (c[2 * n + i] + theta * (c[3 * n + i] + theta1 * c[4 * n + i])));
        }
    }

    pub fn at(&self, s: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.eval(s, &mut out);
        out
    }
}

/// What an observer wants after seeing a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

struct Stages {
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
}

impl Stages {
    fn new(n: usize) -> Self {
        Stages {
            k: std::array::from_fn(|_| vec![0.0; n]),
            tmp: vec![0.0; n],
        }
    }
}

/// Computes stages 2..7 given `k[0] = f(s, y)`; writes the 5th-order solution
/// into `y1`. `k[6]` ends up as `f(s + h, y1)`.
fn rk_stages<F: Flow + ?Sized>(flow: &F, s: f64, y: &[f64], h: f64, st: &mut Stages, y1: &mut [f64]) {
    let n = y.len();
    macro_rules! combo {
        ($($c:expr => $j:expr),*) => {
            for i in 0..n {
                st.tmp[i] = y[i] + h * (0.0 $(+ $c * st.k[$j][i])*);
            }
        };
    }
    combo!(A21 => 0);
    flow.eval(s + C2 * h, &st.tmp, &mut st.k[1]);
    combo!(A31 => 0, A32 => 1);
    flow.eval(s + C3 * h, &st.tmp, &mut st.k[2]);
    combo!(A41 => 0, A42 => 1, A43 => 2);
    flow.eval(s + C4 * h, &st.tmp, &mut st.k[3]);
    combo!(A51 => 0, A52 => 1, A53 => 2, A54 => 3);
    flow.eval(s + C5 * h, &st.tmp, &mut st.k[4]);
    combo!(A61 => 0, A62 => 1, A63 => 2, A64 => 3, A65 => 4);
    flow.eval(s + h, &st.tmp, &mut st.k[5]);
    for i in 0..n {
        y1[i] = y[i]
            + h * (A71 * st.k[0][i] + A73 * st.k[2][i] + A74 * st.k[3][i] + A75 * st.k[4][i] + A76 * st.k[5][i]);
    }
    flow.eval(s + h, y1, &mut st.k[6]);
}

/// Largest component of the embedded error estimate relative to
/// `tol max(1, |y|)`.
fn error_norm(y: &[f64], y1: &[f64], st: &Stages, h: f64, tol: f64) -> f64 {
    let k = &st.k;
    let mut worst: f64 = 0.0;
    for i in 0..y.len() {
        let e = h
            * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i] + E7 * k[6][i]);
        let sc = tol * y[i].abs().max(y1[i].abs()).max(1.0);
        worst = worst.max((e / sc).abs());
    }
    worst
}

fn dense_coeffs(y: &[f64], y1: &[f64], st: &Stages, h: f64) -> Vec<f64> {
    let n = y.len();
    let k = &st.k;
    let mut c = vec![0.0; 5 * n];
    for i in 0..n {
        let dy = y1[i] - y[i];
        let bspl = h * k[0][i] - dy;
        c[i] = y[i];
        c[n + i] = dy;
        c[2 * n + i] = bspl;
        c[3 * n + i] = dy - h * k[6][i] - bspl;
        c[4 * n + i] = h
            * (D1 * k[0][i] + D3 * k[2][i] + D4 * k[3][i] + D5 * k[4][i] + D6 * k[5][i] + D7 * k[6][i]);
    }
    c
}

fn check_finite(s: f64, y: &[f64]) -> Result<()> {
    match y.iter().position(|x| !x.is_finite()) {
        Some(component) => Err(RodError::NonFinite { s, component }),
        None => Ok(()),
    }
}

/// Hairer's starting-step heuristic for a fifth-order method.
fn initial_step<F: Flow + ?Sized>(flow: &F, s: f64, y: &[f64], f0: &[f64], dir: f64, opts: &IntegratorOptions) -> f64 {
    let n = y.len();
    let sc: Vec<f64> = y.iter().map(|v| opts.tol * v.abs().max(1.0)).collect();
    let norm = |v: &[f64]| (v.iter().zip(&sc).map(|(a, s)| (a / s).powi(2)).sum::<f64>() / n as f64).sqrt();
    let dnf = norm(f0);
    let dny = norm(y);
    let mut h = if dnf <= 1e-10 || dny <= 1e-10 { 1e-6 } else { 0.01 * dny / dnf };
    h = h.min(opts.max_step);
    let y1: Vec<f64> = y.iter().zip(f0).map(|(a, b)| a + dir * h * b).collect();
    let mut f1 = vec![0.0; n];
    flow.eval(s + dir * h, &y1, &mut f1);
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let der2 = norm(&diff) / h;
    let der12 = der2.max(dnf);
    let h1 = if der12 <= 1e-15 {
        (1e-6f64).max(h * 1e-3)
    } else {
        (0.01 / der12).powf(1.0 / 5.0)
    };
    (100.0 * h).min(h1).min(opts.max_step)
}

/// Adaptive integration over `[s0, s1]` (either direction), handing every
/// accepted step to `observer`. Returns the final `(s, y)`.
pub fn integrate_with<F, O>(
    flow: &F,
    y0: &[f64],
    span: (f64, f64),
    opts: &IntegratorOptions,
    mut observer: O,
) -> Result<(f64, Vec<f64>)>
where
    F: Flow + ?Sized,
    O: FnMut(&DenseStep) -> Control,
{
    opts.validate()?;
    let (s0, s_end) = span;
    if !(s0.is_finite() && s_end.is_finite()) {
        return Err(RodError::InvalidSpan { start: s0, end: s_end });
    }
    let n = flow.dim();
    if y0.len() != n {
        return Err(RodError::DimensionMismatch { expected: n, found: y0.len() });
    }
    check_finite(s0, y0)?;
    let mut y = y0.to_vec();
    if s_end == s0 {
        return Ok((s0, y));
    }
    let dir = (s_end - s0).signum();
    let mut st = Stages::new(n);
    flow.eval(s0, &y, &mut st.k[0]);
    check_finite(s0, &st.k[0])?;
    let mut h = opts
        .initial_step
        .unwrap_or_else(|| initial_step(flow, s0, &y, &st.k[0], dir, opts))
        .abs()
        .min(opts.max_step);
    let mut s = s0;
    let mut y1 = vec![0.0; n];
    let mut fac_old: f64 = 1e-4;
    let mut last_rejected = false;
    let mut steps = 0usize;
    loop {
        if steps >= opts.max_steps {
            return Err(RodError::TooManySteps { s, max_steps: opts.max_steps });
        }
        let remaining = (s_end - s) * dir;
        let last = h >= remaining;
        let h_try = if last { remaining } else { h };
        if h_try < 1e-14 * s.abs().max(1.0) && !last {
            return Err(RodError::StepSizeUnderflow { s, h: h_try });
        }
        let hs = dir * h_try;
        rk_stages(flow, s, &y, hs, &mut st, &mut y1);
        steps += 1;
        let err = error_norm(&y, &y1, &st, hs, opts.tol);
        if !err.is_finite() {
            h = h_try * FAC_MIN;
            last_rejected = true;
            if h < 1e-14 * s.abs().max(1.0) {
                let component = y1.iter().position(|x| !x.is_finite()).unwrap_or(0);
                return Err(RodError::NonFinite { s, component });
            }
            continue;
        }
        let fac11 = err.powf(0.2 - BETA * 0.75);
        let fac = (fac11 / fac_old.powf(BETA) / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
        let h_new = h_try / fac;
        if err <= 1.0 {
            fac_old = err.max(1e-4);
            let mut coeffs = dense_coeffs(&y, &y1, &st, hs);
            let s_next = if last { s_end } else { s + hs };
            if opts.project {
                flow.project(&mut y1);
                // Keep the interpolant continuous with the projected endpoint.
                for i in 0..n {
                    coeffs[n + i] = y1[i] - y[i];
                }
                flow.eval(s_next, &y1, &mut st.k[6]);
            }
            check_finite(s_next, &y1)?;
            let step = DenseStep { s0: s, h: hs, coeffs };
            std::mem::swap(&mut y, &mut y1);
            st.k.swap(0, 6);
            s = s_next;
            let control = observer(&step);
            if last || control == Control::Stop {
                return Ok((s, y));
            }
            h = if last_rejected { h_new.min(h_try) } else { h_new }.min(opts.max_step);
            last_rejected = false;
        } else {
            h = h_try / (fac11 / SAFETY).min(1.0 / FAC_MIN);
            last_rejected = true;
        }
    }
}

/// One Dormand-Prince step of size `h` from `(s, y)` without error control.
pub fn single_step<F: Flow + ?Sized>(flow: &F, s: f64, y: &[f64], h: f64) -> Vec<f64> {
    let n = y.len();
    let mut st = Stages::new(n);
    flow.eval(s, y, &mut st.k[0]);
    let mut y1 = vec![0.0; n];
    if h != 0.0 {
        rk_stages(flow, s, y, h, &mut st, &mut y1);
    } else {
        y1.copy_from_slice(y);
    }
    y1
}

/// Fixed-step integration with the fifth-order solution, for convergence studies.
pub fn integrate_fixed<F: Flow + ?Sized>(flow: &F, y0: &[f64], span: (f64, f64), steps: usize) -> Vec<f64> {
    let h = (span.1 - span.0) / steps as f64;
    let mut y = y0.to_vec();
    for i in 0..steps {
        y = single_step(flow, span.0 + i as f64 * h, &y, h);
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;

    fn oscillator() -> FnFlow<impl Fn(f64, &[f64], &mut [f64])> {
        FnFlow::new(2, |_s, y: &[f64], dy: &mut [f64]| {
            dy[0] = y[1];
            dy[1] = -y[0];
        })
    }

    #[test]
    fn harmonic_oscillator_accuracy() {
        let flow = oscillator();
        let (s, y) = integrate_with(&flow, &[1.0, 0.0], (0.0, 10.0), &IntegratorOptions::with_tol(1e-12), |_| {
            Control::Continue
        })
        .unwrap();
        assert_eq!(s, 10.0);
        assert!((y[0] - 10f64.cos()).abs() < 1e-10);
        assert!((y[1] + 10f64.sin()).abs() < 1e-10);
    }

    #[test]
    fn backward_integration() {
        let flow = oscillator();
        let (_, y) = integrate_with(&flow, &[1.0, 0.0], (0.0, -3.0), &IntegratorOptions::with_tol(1e-12), |_| {
            Control::Continue
        })
        .unwrap();
        assert!((y[0] - 3f64.cos()).abs() < 1e-10);
        assert!((y[1] - 3f64.sin()).abs() < 1e-10);
    }

    #[test]
    fn dense_output_matches_solution() {
        let flow = oscillator();
        let mut worst: f64 = 0.0;
        integrate_with(&flow, &[1.0, 0.0], (0.0, 5.0), &IntegratorOptions::with_tol(1e-10), |step| {
            for k in 0..=10 {
                let s = step.s0 + step.h * k as f64 / 10.0;
                let y = step.at(s);
                worst = worst.max((y[0] - s.cos()).abs());
            }
            Control::Continue
        })
        .unwrap();
        assert!(worst < 1e-8, "{worst}");
    }

    #[test]
    fn observer_can_stop() {
        let flow = oscillator();
        let mut count = 0;
        let (s, _) = integrate_with(&flow, &[1.0, 0.0], (0.0, 100.0), &IntegratorOptions::default(), |_| {
            count += 1;
            if count == 3 {
                Control::Stop
            } else {
                Control::Continue
            }
        })
        .unwrap();
        assert_eq!(count, 3);
        assert!(s < 100.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let flow = oscillator();
        let go = |_: &DenseStep| Control::Continue;
        assert!(matches!(
            integrate_with(&flow, &[1.0, 0.0], (0.0, 1.0), &IntegratorOptions::with_tol(1e-2), go),
            Err(RodError::InvalidTolerance { .. })
        ));
        assert!(matches!(
            integrate_with(&flow, &[1.0, 0.0], (0.0, f64::INFINITY), &IntegratorOptions::default(), go),
            Err(RodError::InvalidSpan { .. })
        ));
        assert!(matches!(
            integrate_with(&flow, &[1.0], (0.0, 1.0), &IntegratorOptions::default(), go),
            Err(RodError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn blow_up_is_reported() {
        // y' = y², y(0) = 1 blows up at s = 1.
        let flow = FnFlow::new(1, |_s, y: &[f64], dy: &mut [f64]| dy[0] = y[0] * y[0]);
        let err = integrate_with(&flow, &[1.0], (0.0, 2.0), &IntegratorOptions::with_tol(1e-8), |_| {
            Control::Continue
        })
        .unwrap_err();
        match err {
            RodError::StepSizeUnderflow { s, .. } | RodError::NonFinite { s, .. } => {
                assert!(s > 0.99 && s < 1.0 + 1e-6, "{s}")
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn deterministic() {
        let flow = oscillator();
        let run = || {
            integrate_with(&flow, &[0.3, 0.1], (0.0, 7.0), &IntegratorOptions::with_tol(1e-9), |_| Control::Continue)
                .unwrap()
                .1
        };
        assert_eq!(run(), run());
    }
}
