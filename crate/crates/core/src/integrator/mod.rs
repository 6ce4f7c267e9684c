//! Adaptive arclength integration with dense output.

pub mod dopri5;
pub mod hierarchy;
pub mod reconstruct;

use std::io::Write;

pub use dopri5::{integrate_fixed, integrate_with, single_step, Control, DenseStep, FnFlow, Flow, IntegratorOptions};
pub use hierarchy::{simulate, DriftSummary, HierarchyFlow, RodTrajectory};
pub use reconstruct::{integrate_framed, reconstruct, FramedCurve};

use crate::error::Result;

/// Accepted steps of one integration, with their continuous extensions.
///
/// The grid is monotone in the direction of integration; `states[k]` is the
/// solution at `grid[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    dim: usize,
    grid: Vec<f64>,
    states: Vec<Vec<f64>>,
    segments: Vec<DenseStep>,
}

impl Trajectory {
    /// Integrates `flow` over `span`.
    pub fn integrate<F: Flow + ?Sized>(flow: &F, y0: &[f64], span: (f64, f64), opts: &IntegratorOptions) -> Result<Self> {
        Self::integrate_until(flow, y0, span, opts, |_| Control::Continue)
    }

    /// As [`Trajectory::integrate`], stopping early when `stop` asks to.
    pub fn integrate_until<F, O>(flow: &F, y0: &[f64], span: (f64, f64), opts: &IntegratorOptions, mut stop: O) -> Result<Self>
    where
        F: Flow + ?Sized,
        O: FnMut(&DenseStep) -> Control,
    {
        let mut traj = Trajectory {
            dim: y0.len(),
            grid: vec![span.0],
            states: vec![y0.to_vec()],
            segments: Vec::new(),
        };
        integrate_with(flow, y0, span, opts, |step| {
            let control = stop(step);
            traj.grid.push(step.s1());
            traj.states.push(step.end());
            traj.segments.push(step.clone());
            control
        })?;
        if let Some(last) = traj.segments.last() {
            // The final step lands on the span end exactly.
            *traj.grid.last_mut().unwrap() = last.s1();
        }
        Ok(traj)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn states(&self) -> &[Vec<f64>] {
        &self.states
    }

    pub fn segments(&self) -> &[DenseStep] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn s_start(&self) -> f64 {
        self.grid[0]
    }

    pub fn s_end(&self) -> f64 {
        *self.grid.last().unwrap()
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().unwrap()
    }

    /// Segment whose closed interval contains `s`.
    pub fn segment_at(&self, s: f64) -> Option<&DenseStep> {
        if self.segments.is_empty() {
            return None;
        }
        let forward = self.s_end() >= self.s_start();
        let (lo, hi) = if forward {
            (self.s_start(), self.s_end())
        } else {
            (self.s_end(), self.s_start())
        };
        if !(lo..=hi).contains(&s) {
            return None;
        }
        let idx = if forward {
            self.grid[1..].partition_point(|&g| g < s)
        } else {
            self.grid[1..].partition_point(|&g| g > s)
        };
        self.segments.get(idx.min(self.segments.len() - 1))
    }

    /// Dense-output state at `s`, `None` outside the integrated range.
    pub fn interpolate(&self, s: f64) -> Option<Vec<f64>> {
        if self.segments.is_empty() {
            return (s == self.grid[0]).then(|| self.states[0].clone());
        }
        self.segment_at(s).map(|seg| seg.at(s))
    }

    /// Writes one CSV row per snapshot: `s`, the state, then `extra(state)`.
    pub fn write_csv<W, E>(&self, out: &mut W, state_names: &[String], extra_names: &[String], extra: E) -> std::io::Result<()>
    where
        W: Write,
        E: Fn(&[f64]) -> Vec<f64>,
    {
        let header: Vec<&str> = std::iter::once("s")
            .chain(state_names.iter().map(String::as_str))
            .chain(extra_names.iter().map(String::as_str))
            .collect();
        writeln!(out, "{}", header.join(","))?;
        for (s, y) in self.grid.iter().zip(&self.states) {
            let mut row = Vec::with_capacity(1 + y.len() + extra_names.len());
            row.push(format_real(*s));
            row.extend(y.iter().map(|v| format_real(*v)));
            row.extend(extra(y).into_iter().map(format_real));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn format_real(x: f64) -> String {
    format!("{x:.16e}")
}
