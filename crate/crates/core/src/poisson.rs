//! Block structure matrices and the Lie-Poisson bracket of each hierarchy level.
//!
//! At level `n` the structure matrix is the `3(n+1)`-square matrix whose
//! block `(i, j)` is `hat(field[i + j])` when `i + j ≤ n` and zero otherwise.
//! The bracket is `{f, g} = ∇f · J ∇g`, so that `x' = {x, H} = J ∇H`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, RodError};
use crate::so3::hat;
use crate::state::{FieldState, HierarchyLevel};

/// Dense antisymmetric structure matrix `J(x)` of one hierarchy level.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockStructureMatrix {
    level: HierarchyLevel,
    matrix: DMatrix<f64>,
}

impl BlockStructureMatrix {
    pub fn level(&self) -> HierarchyLevel {
        self.level
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    /// `J v` for a packed gradient `v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        (&self.matrix * DVector::from_column_slice(v)).as_slice().to_vec()
    }

    /// `a · J b`.
    pub fn pair(&self, a: &[f64], b: &[f64]) -> f64 {
        let a = DVector::from_column_slice(a);
        let b = DVector::from_column_slice(b);
        a.dot(&(&self.matrix * b))
    }
}

/// Structure matrix of `level` built from the first `level + 1` fields of `state`.
pub fn structure_matrix(state: &FieldState, level: HierarchyLevel) -> Result<BlockStructureMatrix> {
    if state.level() < level {
        return Err(RodError::LevelMismatch {
            required: level,
            found: state.level(),
        });
    }
    let blocks = level.field_count();
    let mut matrix = DMatrix::zeros(level.dim(), level.dim());
    for i in 0..blocks {
        for j in 0..blocks - i {
            let block = hat(&state.field(i + j)).to_matrix();
            matrix.fixed_view_mut::<3, 3>(3 * i, 3 * j).copy_from(&block);
        }
    }
    Ok(BlockStructureMatrix { level, matrix })
}

/// A smooth function on the packed phase space.
pub trait ScalarField {
    fn value(&self, x: &[f64]) -> f64;

    /// Analytic gradient, when available. `None` selects finite differences.
    fn gradient(&self, _x: &[f64]) -> Option<Vec<f64>> {
        None
    }
}

impl<F: Fn(&[f64]) -> f64> ScalarField for F {
    fn value(&self, x: &[f64]) -> f64 {
        self(x)
    }
}

/// Default step of the central-difference gradient on unit-scaled states.
pub const GRADIENT_STEP: f64 = 1e-5;

/// Fourth-order central-difference gradient.
pub fn central_gradient<F: ScalarField + ?Sized>(f: &F, x: &[f64], step: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let x0 = x[i];
            let mut eval = |offset: f64| {
                probe[i] = x0 + offset;
                let v = f.value(&probe);
                probe[i] = x0;
                v
            };
            let (p2, p1, m1, m2) = (eval(2.0 * step), eval(step), eval(-step), eval(-2.0 * step));
            (-p2 + 8.0 * p1 - 8.0 * m1 + m2) / (12.0 * step)
        })
        .collect()
}

/// Analytic gradient if the field has one, otherwise central differences.
pub fn gradient_of<F: ScalarField + ?Sized>(f: &F, x: &[f64]) -> Vec<f64> {
    f.gradient(x).unwrap_or_else(|| central_gradient(f, x, GRADIENT_STEP))
}

/// Lie-Poisson bracket `{f, g}(x) = ∇f · J(x) ∇g` at `level`.
pub fn lie_poisson_bracket<F, G>(f: &F, g: &G, state: &FieldState, level: HierarchyLevel) -> Result<f64>
where
    F: ScalarField + ?Sized,
    G: ScalarField + ?Sized,
{
    let j = structure_matrix(state, level)?;
    let x = state.with_level(level).as_vec();
    Ok(j.pair(&gradient_of(f, &x), &gradient_of(g, &x)))
}

/// `{f, g}` as a scalar field in its own right, for nested brackets.
pub struct Bracket<'a, F: ?Sized, G: ?Sized> {
    pub f: &'a F,
    pub g: &'a G,
    pub level: HierarchyLevel,
}

impl<F: ScalarField + ?Sized, G: ScalarField + ?Sized> ScalarField for Bracket<'_, F, G> {
    fn value(&self, x: &[f64]) -> f64 {
        let state = FieldState::from_slice(self.level, x).expect("packed state of bracket level");
        lie_poisson_bracket(self.f, self.g, &state, self.level).expect("level matches")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::so3::Triple;

    #[test]
    fn level_zero_is_hat_of_moment() {
        let state = FieldState::force_free(Triple::new(1.0, 2.0, 3.0));
        let j = structure_matrix(&state, HierarchyLevel::ForceFree).unwrap();
        assert_eq!(
            j.matrix().fixed_view::<3, 3>(0, 0).into_owned(),
            hat(&Triple::new(1.0, 2.0, 3.0)).to_matrix()
        );
    }

    #[test]
    fn zero_state_gives_zero_matrix() {
        let j = structure_matrix(&FieldState::zeros(HierarchyLevel::Magnetic), HierarchyLevel::Magnetic).unwrap();
        assert_eq!(j.matrix().shape(), (9, 9));
        assert!(j.matrix().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn level_above_state_is_an_error() {
        let state = FieldState::zeros(HierarchyLevel::Kirchhoff);
        assert_eq!(
            structure_matrix(&state, HierarchyLevel::Magnetic).unwrap_err(),
            RodError::LevelMismatch {
                required: HierarchyLevel::Magnetic,
                found: HierarchyLevel::Kirchhoff
            }
        );
    }

    #[test]
    fn anti_triangular_block_pattern() {
        let state = FieldState::hypermagnetic(
            Triple::new(1.0, 0.0, 0.0),
            Triple::new(0.0, 2.0, 0.0),
            Triple::new(0.0, 0.0, 3.0),
            Triple::new(4.0, 0.0, 0.0),
        );
        let j = structure_matrix(&state, HierarchyLevel::Hypermagnetic).unwrap();
        for i in 0..4 {
            for k in 0..4 {
                let block = j.matrix().fixed_view::<3, 3>(3 * i, 3 * k).into_owned();
                let expected = if i + k <= 3 {
                    hat(&state.field(i + k)).to_matrix()
                } else {
                    nalgebra::Matrix3::zeros()
                };
                assert_eq!(block, expected, "block ({i}, {k})");
            }
        }
        assert_eq!(j.matrix() + j.matrix().transpose(), DMatrix::zeros(12, 12));
    }

    #[test]
    fn central_gradient_of_cubic() {
        let f = |x: &[f64]| x[0] * x[0] * x[1] + x[1].powi(3);
        let g = central_gradient(&f, &[0.3, -0.7], GRADIENT_STEP);
        assert!((g[0] - 2.0 * 0.3 * -0.7).abs() < 1e-10);
        assert!((g[1] - (0.09 + 3.0 * 0.49)).abs() < 1e-10);
    }
}
