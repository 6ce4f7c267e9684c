//! Integration of the hierarchy flows with invariant bookkeeping.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{Flow, IntegratorOptions, Trajectory};
use crate::error::Result;
use crate::model::{casimir_gradients, casimirs, rhs, InvariantLedger, RodParams};
use crate::state::{FieldState, HierarchyLevel};

/// `x' = J(x) ∇H(x)` at one level.
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchyFlow {
    pub level: HierarchyLevel,
    pub params: RodParams,
    casimir_targets: Option<Vec<f64>>,
}

impl HierarchyFlow {
    pub fn new(level: HierarchyLevel, params: RodParams) -> Self {
        HierarchyFlow {
            level,
            params,
            casimir_targets: None,
        }
    }

    /// Enables orthogonal projection back onto the Casimir level set `targets`
    /// (used when [`IntegratorOptions::project`] is set).
    pub fn with_casimir_projection(mut self, targets: Vec<f64>) -> Self {
        self.casimir_targets = Some(targets);
        self
    }
}

impl Flow for HierarchyFlow {
    fn dim(&self) -> usize {
        self.level.dim()
    }

    fn eval(&self, _s: f64, y: &[f64], dy: &mut [f64]) {
        match FieldState::from_slice(self.level, y) {
            Ok(state) => rhs(&state, &self.params).write_into(dy),
            Err(_) => dy.fill(f64::NAN),
        }
    }

    fn project(&self, y: &mut [f64]) {
        let Some(targets) = &self.casimir_targets else {
            return;
        };
        for _ in 0..3 {
            let Ok(state) = FieldState::from_slice(self.level, y) else {
                return;
            };
            let residual = DVector::from_iterator(
                targets.len(),
                casimirs(&state).iter().zip(targets).map(|(c, t)| c - t),
            );
            if residual.amax() < 1e-15 {
                return;
            }
            let grads = casimir_gradients(&state);
            let g = DMatrix::from_fn(grads.len(), y.len(), |i, j| grads[i].as_vec()[j]);
            let Some(lambda) = (&g * g.transpose()).lu().solve(&residual) else {
                return;
            };
            let step = g.transpose() * lambda;
            for (yi, di) in y.iter_mut().zip(step.iter()) {
                *yi -= di;
            }
        }
    }
}

/// Largest relative change `|X(s) − X(0)| / max(|X(0)|, 1)` of each ledger column.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftSummary {
    pub columns: Vec<(String, f64)>,
}

impl DriftSummary {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.columns.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn max(&self) -> f64 {
        self.columns.iter().map(|(_, v)| *v).fold(0.0, f64::max)
    }
}

/// Relative drift of a sampled quantity.
pub fn relative_drift(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut it = values.into_iter();
    let Some(x0) = it.next() else {
        return 0.0;
    };
    let scale = x0.abs().max(1.0);
    it.map(|x| (x - x0).abs() / scale).fold(0.0, f64::max)
}

/// A hierarchy trajectory together with the ledger at every snapshot.
#[derive(Debug, Clone)]
pub struct RodTrajectory {
    pub level: HierarchyLevel,
    pub params: RodParams,
    pub trajectory: Trajectory,
    pub ledgers: Vec<InvariantLedger>,
}

impl RodTrajectory {
    pub fn states(&self) -> Vec<FieldState> {
        self.trajectory
            .states()
            .iter()
            .map(|y| FieldState::from_slice(self.level, y).expect("integrated states are finite"))
            .collect()
    }

    pub fn final_state(&self) -> FieldState {
        FieldState::from_slice(self.level, self.trajectory.final_state()).expect("finite")
    }

    pub fn state_at(&self, s: f64) -> Option<FieldState> {
        self.trajectory
            .interpolate(s)
            .and_then(|y| FieldState::from_slice(self.level, &y).ok())
    }

    pub fn drift(&self) -> DriftSummary {
        let names: Vec<String> = self.ledgers[0].columns().into_iter().map(|(n, _)| n).collect();
        let columns = names
            .iter()
            .enumerate()
            .map(|(k, name)| {
                let d = relative_drift(self.ledgers.iter().map(|l| l.columns()[k].1));
                (name.clone(), d)
            })
            .collect();
        DriftSummary { columns }
    }

    /// Maximum of `f` over the snapshots.
    pub fn max_over<F: Fn(&FieldState) -> f64>(&self, f: F) -> f64 {
        self.states().iter().map(f).fold(0.0, f64::max)
    }

    /// CSV with `s`, the packed state and the ledger columns.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        let state_names = state_column_names(self.level);
        let ledger_names: Vec<String> = self.ledgers[0].columns().into_iter().map(|(n, _)| n).collect();
        let level = self.level;
        let params = self.params;
        self.trajectory.write_csv(out, &state_names, &ledger_names, |y| {
            let state = FieldState::from_slice(level, y).expect("finite");
            InvariantLedger::evaluate(&state, &params)
                .columns()
                .into_iter()
                .map(|(_, v)| v)
                .collect()
        })
    }
}

/// `m1, m2, m3, n1, ...` up to the level's top field.
pub fn state_column_names(level: HierarchyLevel) -> Vec<String> {
    ["m", "n", "B", "D"][..level.field_count()]
        .iter()
        .flat_map(|f| (1..=3).map(move |i| format!("{f}{i}")))
        .collect()
}

/// Integrates the hierarchy flow of `state0.level()` and records the ledger.
pub fn simulate(state0: &FieldState, params: &RodParams, span: (f64, f64), opts: &IntegratorOptions) -> Result<RodTrajectory> {
    let mut flow = HierarchyFlow::new(state0.level(), *params);
    if opts.project {
        flow = flow.with_casimir_projection(casimirs(state0));
    }
    let trajectory = Trajectory::integrate(&flow, &state0.as_vec(), span, opts)?;
    let ledgers = trajectory
        .states()
        .iter()
        .map(|y| InvariantLedger::evaluate(&FieldState::from_slice(state0.level(), y).expect("finite"), params))
        .collect();
    Ok(RodTrajectory {
        level: state0.level(),
        params: *params,
        trajectory,
        ledgers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::so3::Triple;

    fn generic_magnetic() -> FieldState {
        FieldState::magnetic(
            Triple::new(0.3, -0.2, 0.5),
            Triple::new(0.1, 0.4, -0.3),
            Triple::new(-0.2, 0.6, 0.7),
        )
    }

    #[test]
    fn aligned_state_is_stationary() {
        let state = FieldState::magnetic(Triple::new(0.0, 0.0, 0.7), Triple::new(0.0, 0.0, 2.0), Triple::new(0.0, 0.0, 1.0));
        let params = RodParams::new(1.0, 1.5, 0.8).unwrap();
        let traj = simulate(&state, &params, (0.0, 10.0), &IntegratorOptions::default()).unwrap();
        assert!(traj.states().iter().all(|s| *s == state));
        assert_eq!(traj.drift().max(), 0.0);
    }

    #[test]
    fn short_run_conserves_ledger() {
        let params = RodParams::isotropic(1.0, 0.75).unwrap();
        let traj = simulate(&generic_magnetic(), &params, (0.0, 20.0), &IntegratorOptions::with_tol(1e-11)).unwrap();
        let drift = traj.drift();
        assert_eq!(
            drift.columns.iter().map(|(n, _)| n.as_str()).collect::<Vec<_>>(),
            ["H", "C1", "C2", "C3", "I1_lagrange", "I2_force_moment"]
        );
        assert!(drift.max() < 1e-9, "{drift:?}");
    }

    #[test]
    fn projection_pins_casimirs() {
        let params = RodParams::new(1.0, 1.3, 0.7).unwrap();
        let state = generic_magnetic();
        let opts = IntegratorOptions {
            project: true,
            ..IntegratorOptions::with_tol(1e-6)
        };
        let traj = simulate(&state, &params, (0.0, 20.0), &opts).unwrap();
        let c0 = casimirs(&state);
        for s in traj.states() {
            for (a, b) in casimirs(&s).iter().zip(&c0) {
                assert!((a - b).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn csv_header_lists_state_and_ledger() {
        let params = RodParams::isotropic(1.0, 0.75).unwrap();
        let traj = simulate(&generic_magnetic(), &params, (0.0, 1.0), &IntegratorOptions::default()).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "s,m1,m2,m3,n1,n2,n3,B1,B2,B3,H,C1,C2,C3,I1_lagrange,I2_force_moment"
        );
        assert_eq!(text.lines().count(), traj.trajectory.len() + 1);
    }

    #[test]
    fn relative_drift_uses_unit_floor() {
        assert_eq!(relative_drift([0.0, 1e-3, -2e-3]), 2e-3);
        assert_eq!(relative_drift([10.0, 10.5]), 0.05);
        assert_eq!(relative_drift(std::iter::empty()), 0.0);
    }
}
