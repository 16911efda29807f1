//! Pointwise vector algebra on grid fields.
//!
//! All nonlinear drift terms reduce to cross products evaluated node by node
//! on the oversampled quadrature grid, followed by a quadrature projection.

use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Result, SllgError};
use crate::spectral::PhysicalField;

/// A vector in the value space R^3.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3(pub [f64; 3]);

impl Vec3 {
    pub const ZERO: Vec3 = Vec3([0.0; 3]);
    pub const X: Vec3 = Vec3([1.0, 0.0, 0.0]);
    pub const Y: Vec3 = Vec3([0.0, 1.0, 0.0]);
    pub const Z: Vec3 = Vec3([0.0, 0.0, 1.0]);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3([x, y, z])
    }

    #[inline]
    pub fn dot(self, o: Vec3) -> f64 {
        self.0[0] * o.0[0] + self.0[1] * o.0[1] + self.0[2] * o.0[2]
    }

    #[inline]
    pub fn cross(self, o: Vec3) -> Vec3 {
        let [a0, a1, a2] = self.0;
        let [b0, b1, b2] = o.0;
        Vec3([a1 * b2 - a2 * b1, a2 * b0 - a0 * b2, a0 * b1 - a1 * b0])
    }

    #[inline]
    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn normalized(self) -> Option<Vec3> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| self * (1.0 / n))
    }

    pub fn is_finite(self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    #[inline]
    fn add(self, o: Vec3) -> Vec3 {
        Vec3([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }
}

impl AddAssign for Vec3 {
    #[inline]
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    #[inline]
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2]])
    }
}

impl SubAssign for Vec3 {
    #[inline]
    fn sub_assign(&mut self, o: Vec3) {
        *self = *self - o;
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    #[inline]
    fn mul(self, s: f64) -> Vec3 {
        Vec3([self.0[0] * s, self.0[1] * s, self.0[2] * s])
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    #[inline]
    fn neg(self) -> Vec3 {
        Vec3([-self.0[0], -self.0[1], -self.0[2]])
    }
}

/// Nodewise cross product `f × g`.
pub fn cross(f: &PhysicalField, g: &PhysicalField) -> Result<PhysicalField> {
    if !f.basis().same_as(g.basis()) {
        return Err(SllgError::BasisMismatch);
    }
    let values = f
        .values()
        .iter()
        .zip(g.values())
        .map(|(a, b)| a.cross(*b))
        .collect();
    Ok(PhysicalField::from_values(f.basis().clone(), values))
}

/// Quadrature L² inner product `Σ_q w_q ⟨f(x_q), g(x_q)⟩`.
pub fn l2_inner(f: &PhysicalField, g: &PhysicalField) -> Result<f64> {
    if !f.basis().same_as(g.basis()) {
        return Err(SllgError::BasisMismatch);
    }
    Ok(quad_inner(f.basis().weights(), f.values(), g.values()))
}

/// Maximum over grid nodes of `| |f(x_q)| - 1 |`.
pub fn sup_deviation_from_sphere(f: &PhysicalField) -> f64 {
    f.values()
        .iter()
        .map(|v| (v.norm() - 1.0).abs())
        .fold(0.0, f64::max)
}

#[inline]
pub(crate) fn quad_inner(weights: &[f64], a: &[Vec3], b: &[Vec3]) -> f64 {
    weights
        .iter()
        .zip(a.iter().zip(b))
        .map(|(w, (x, y))| w * x.dot(*y))
        .sum()
}

#[inline]
pub(crate) fn quad_norm_sq(weights: &[f64], a: &[Vec3]) -> f64 {
    quad_inner(weights, a, a)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::spectral::SpectralBasis;

    fn rand_vec(rng: &mut ChaCha8Rng) -> Vec3 {
        Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        )
    }

    fn random_field(basis: &Arc<SpectralBasis>, rng: &mut ChaCha8Rng) -> PhysicalField {
        let values = (0..basis.n_quad()).map(|_| rand_vec(rng)).collect();
        PhysicalField::from_values(basis.clone(), values)
    }

    #[test]
    fn constant_cross_products() {
        let b = Arc::new(SpectralBasis::new(1.0, 4, 4).unwrap());
        let ex = PhysicalField::constant(b.clone(), Vec3::X);
        let ey = PhysicalField::constant(b.clone(), Vec3::Y);
        let ez = cross(&ex, &ey).unwrap();
        assert!(ez.values().iter().all(|v| *v == Vec3::Z));
        let zero = cross(&ex, &ex).unwrap();
        assert!(zero.values().iter().all(|v| *v == Vec3::ZERO));
    }

    #[test]
    fn cross_is_orthogonal_to_factor() {
        let b = Arc::new(SpectralBasis::new(2.0, 8, 4).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = random_field(&b, &mut rng);
        let g = random_field(&b, &mut rng);
        let fg = cross(&f, &g).unwrap();
        assert!(l2_inner(&fg, &f).unwrap().abs() < 1e-12);
    }

    #[test]
    fn lagrange_and_grassmann_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let (a, b, c) = (rand_vec(&mut rng), rand_vec(&mut rng), rand_vec(&mut rng));
            let lhs = a.cross(b).norm_sq() + a.dot(b).powi(2);
            assert!((lhs - a.norm_sq() * b.norm_sq()).abs() < 1e-12);
            let triple = a.cross(b.cross(c));
            let expansion = b * a.dot(c) - c * a.dot(b);
            assert!((triple - expansion).norm() < 1e-12);
        }
    }

    #[test]
    fn double_cross_pairing() {
        // ⟨u×(u×w), w⟩ = −‖u×w‖²
        let b = Arc::new(SpectralBasis::new(3.0, 8, 4).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = random_field(&b, &mut rng);
        let w = random_field(&b, &mut rng);
        let uw = cross(&u, &w).unwrap();
        let uuw = cross(&u, &uw).unwrap();
        let lhs = l2_inner(&uuw, &w).unwrap();
        let rhs = -l2_inner(&uw, &uw).unwrap();
        assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs());
    }

    #[test]
    fn inner_products_of_modes() {
        let b = Arc::new(SpectralBasis::new(1.5, 6, 4).unwrap());
        let e1 = b.mode_field(1, Vec3::Z);
        let e2 = b.mode_field(2, Vec3::Z);
        assert!((l2_inner(&e1, &e1).unwrap() - 1.0).abs() < 1e-12);
        assert!(l2_inner(&e1, &e2).unwrap().abs() < 1e-12);
    }

    #[test]
    fn sphere_deviation() {
        let b = Arc::new(SpectralBasis::new(1.0, 4, 4).unwrap());
        assert_eq!(
            sup_deviation_from_sphere(&PhysicalField::constant(b.clone(), Vec3::Y)),
            0.0
        );
        let two_z = PhysicalField::constant(b.clone(), Vec3::Z * 2.0);
        assert!((sup_deviation_from_sphere(&two_z) - 1.0).abs() < 1e-15);
        let planar = PhysicalField::from_fn(b.clone(), |x| {
            let theta = 0.7 * (3.0 * x).sin() + x * x;
            Vec3::new(theta.cos(), theta.sin(), 0.0)
        });
        assert!(sup_deviation_from_sphere(&planar) < 1e-12);
    }

    #[test]
    fn mismatched_bases_rejected() {
        let a = Arc::new(SpectralBasis::new(1.0, 4, 4).unwrap());
        let b = Arc::new(SpectralBasis::new(1.0, 5, 4).unwrap());
        let f = PhysicalField::constant(a, Vec3::X);
        let g = PhysicalField::constant(b, Vec3::X);
        assert!(matches!(cross(&f, &g), Err(SllgError::BasisMismatch)));
        assert!(matches!(l2_inner(&f, &g), Err(SllgError::BasisMismatch)));
    }
}
