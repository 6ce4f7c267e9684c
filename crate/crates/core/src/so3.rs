//! so(3) algebra on body-frame triples.

use nalgebra::{Matrix3, Vector3};

/// Body components of a vector with respect to the director frame.
pub type Triple = Vector3<f64>;

/// Unit tangent `d3` in body components.
pub const D3: Triple = Vector3::new(0.0, 0.0, 1.0);

/// Antisymmetric 3x3 matrix, stored by its axial vector so that `A + Aᵀ = 0`
/// holds exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkewMatrix3 {
    axial: Triple,
}

impl SkewMatrix3 {
    pub fn zero() -> Self {
        SkewMatrix3 { axial: Triple::zeros() }
    }

    /// The vector `v` with `hat(v) = self`.
    pub fn vee(&self) -> Triple {
        self.axial
    }

    pub fn to_matrix(&self) -> Matrix3<f64> {
        let v = &self.axial;
        Matrix3::new(0.0, -v[2], v[1], v[2], 0.0, -v[0], -v[1], v[0], 0.0)
    }

    /// `hat(v) w = v × w`.
    pub fn apply(&self, w: &Triple) -> Triple {
        self.axial.cross(w)
    }

    /// Matrix commutator, closed in so(3): `[hat(a), hat(b)] = hat(a × b)`.
    pub fn commutator(&self, other: &SkewMatrix3) -> SkewMatrix3 {
        SkewMatrix3 {
            axial: self.axial.cross(&other.axial),
        }
    }

    pub fn scale(&self, factor: f64) -> SkewMatrix3 {
        SkewMatrix3 {
            axial: self.axial * factor,
        }
    }

    /// Projects an arbitrary 3x3 matrix onto its antisymmetric part.
    pub fn from_matrix(a: &Matrix3<f64>) -> SkewMatrix3 {
        SkewMatrix3 {
            axial: Triple::new(
                0.5 * (a[(2, 1)] - a[(1, 2)]),
                0.5 * (a[(0, 2)] - a[(2, 0)]),
                0.5 * (a[(1, 0)] - a[(0, 1)]),
            ),
        }
    }
}

impl std::ops::Add for SkewMatrix3 {
    type Output = SkewMatrix3;

    fn add(self, rhs: SkewMatrix3) -> SkewMatrix3 {
        SkewMatrix3 {
            axial: self.axial + rhs.axial,
        }
    }
}

/// The hat isomorphism R³ → so(3).
pub fn hat(v: &Triple) -> SkewMatrix3 {
    SkewMatrix3 { axial: *v }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_triple(rng: &mut ChaCha8Rng) -> Triple {
        Triple::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn hat_of_zero_is_zero() {
        assert_eq!(hat(&Triple::zeros()).to_matrix(), Matrix3::zeros());
    }

    #[test]
    fn hat_entries_follow_structure_matrix_layout() {
        let a = hat(&Triple::new(1.0, 2.0, 3.0)).to_matrix();
        assert_eq!(a[(0, 1)], -3.0);
        assert_eq!(a[(0, 2)], 2.0);
        assert_eq!(a[(1, 2)], -1.0);
        assert_eq!(a + a.transpose(), Matrix3::zeros());
    }

    #[test]
    fn hat_matches_cross_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let v = random_triple(&mut rng);
            let w = random_triple(&mut rng);
            let cross = Triple::new(
                v[1] * w[2] - v[2] * w[1],
                v[2] * w[0] - v[0] * w[2],
                v[0] * w[1] - v[1] * w[0],
            );
            assert!((hat(&v).to_matrix() * w - cross).amax() < 1e-15);
            assert!((hat(&v).apply(&w) - cross).amax() < 1e-15);
        }
    }

    #[test]
    fn commutator_is_cross_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let a = hat(&random_triple(&mut rng));
        let b = hat(&random_triple(&mut rng));
        let dense = a.to_matrix() * b.to_matrix() - b.to_matrix() * a.to_matrix();
        assert!((dense - a.commutator(&b).to_matrix()).amax() < 1e-15);
        assert_eq!(SkewMatrix3::from_matrix(&dense).to_matrix(), dense);
    }
}
