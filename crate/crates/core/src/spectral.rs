//! Neumann cosine eigenbasis of `A = -d²/dx²` on `[0, L]`.
//!
//! Mode `k` is `e_k(x) = √(2/L) cos(kπx/L)` for `k ≥ 1` and the constant
//! `e_0 = √(1/L)`; its eigenvalue is `λ_k = (kπ/L)²`. Fields are stored as
//! `n_modes` coefficient triples (one per Cartesian spin component).
//!
//! Transforms are dense matrix products against a uniform trapezoidal grid
//! of `oversample · n_modes` nodes including both endpoints. With
//! `oversample ≥ 4` the trapezoidal rule integrates every product of up to
//! four basis modes exactly, which covers the quartic pairings that arise
//! when a cubic nonlinearity is projected back onto the basis.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Result, SllgError};
use crate::field::{quad_norm_sq, Vec3};

/// Minimum ratio of quadrature nodes to modes.
pub const MIN_OVERSAMPLE: usize = 4;

#[derive(Debug)]
pub struct SpectralBasis {
    length: f64,
    n_modes: usize,
    n_quad: usize,
    eigenvalues: Vec<f64>,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    // Row-major `n_quad × n_modes` tables of e_k(x_q) and e_k'(x_q).
    synth: Vec<f64>,
    synth_deriv: Vec<f64>,
}

impl SpectralBasis {
    pub fn new(length: f64, n_modes: usize, oversample: usize) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(SllgError::InvalidBasis(format!(
                "domain length must be positive and finite, got {length}"
            )));
        }
        if n_modes == 0 {
            return Err(SllgError::InvalidBasis("n_modes must be at least 1".into()));
        }
        if oversample < MIN_OVERSAMPLE {
            return Err(SllgError::InvalidBasis(format!(
                "oversample must be at least {MIN_OVERSAMPLE}, got {oversample}"
            )));
        }
        let n_quad = oversample * n_modes;
        let spacing = length / (n_quad - 1) as f64;
        let nodes: Vec<f64> = (0..n_quad).map(|q| q as f64 * spacing).collect();
        let mut weights = vec![spacing; n_quad];
        weights[0] *= 0.5;
        weights[n_quad - 1] *= 0.5;

        let eigenvalues = (0..n_modes)
            .map(|k| wavenumber(k, length).powi(2))
            .collect();

        let mut synth = Vec::with_capacity(n_quad * n_modes);
        let mut synth_deriv = Vec::with_capacity(n_quad * n_modes);
        for &x in &nodes {
            for k in 0..n_modes {
                synth.push(mode_value(k, length, x));
                synth_deriv.push(mode_derivative(k, length, x));
            }
        }

        Ok(Self {
            length,
            n_modes,
            n_quad,
            eigenvalues,
            nodes,
            weights,
            synth,
            synth_deriv,
        })
    }

    pub fn shared(length: f64, n_modes: usize, oversample: usize) -> Result<Arc<Self>> {
        Self::new(length, n_modes, oversample).map(Arc::new)
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn n_quad(&self) -> usize {
        self.n_quad
    }

    pub fn oversample(&self) -> usize {
        self.n_quad / self.n_modes
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Structural identity: same domain, mode count and grid.
    pub fn same_as(&self, other: &SpectralBasis) -> bool {
        std::ptr::eq(self, other)
            || (self.length.to_bits() == other.length.to_bits()
                && self.n_modes == other.n_modes
                && self.n_quad == other.n_quad)
    }

    /// `e_k(x)` evaluated at an arbitrary point.
    pub fn eval_mode(&self, k: usize, x: f64) -> f64 {
        mode_value(k, self.length, x)
    }

    pub fn eval_mode_derivative(&self, k: usize, x: f64) -> f64 {
        mode_derivative(k, self.length, x)
    }

    /// The physical field `e_k(x) · v` on this grid. `k` may exceed the
    /// mode count (useful for aliasing checks).
    pub fn mode_field(self: &Arc<Self>, k: usize, v: Vec3) -> PhysicalField {
        PhysicalField::from_fn(self.clone(), |x| v * mode_value(k, self.length, x))
    }

    fn synthesize(&self, coeffs: &[Vec3], table: &[f64]) -> Vec<Vec3> {
        let n = self.n_modes;
        table
            .chunks_exact(n)
            .map(|row| {
                let mut acc = Vec3::ZERO;
                for (s, c) in row.iter().zip(coeffs) {
                    acc += *c * *s;
                }
                acc
            })
            .collect()
    }

    fn analyze(&self, values: &[Vec3]) -> Vec<Vec3> {
        let n = self.n_modes;
        let mut out = vec![Vec3::ZERO; n];
        for ((row, w), v) in self.synth.chunks_exact(n).zip(&self.weights).zip(values) {
            let wv = *v * *w;
            for (o, s) in out.iter_mut().zip(row) {
                *o += wv * *s;
            }
        }
        out
    }
}

#[inline]
fn wavenumber(k: usize, length: f64) -> f64 {
    k as f64 * PI / length
}

fn mode_value(k: usize, length: f64, x: f64) -> f64 {
    if k == 0 {
        (1.0 / length).sqrt()
    } else {
        (2.0 / length).sqrt() * (wavenumber(k, length) * x).cos()
    }
}

fn mode_derivative(k: usize, length: f64, x: f64) -> f64 {
    if k == 0 {
        0.0
    } else {
        let kw = wavenumber(k, length);
        -(2.0 / length).sqrt() * kw * (kw * x).sin()
    }
}

/// An element of the Galerkin space: `n_modes` coefficient triples.
#[derive(Debug, Clone)]
pub struct FieldCoeffs {
    basis: Arc<SpectralBasis>,
    coeffs: Vec<Vec3>,
}

impl PartialEq for FieldCoeffs {
    fn eq(&self, other: &Self) -> bool {
        self.basis.same_as(&other.basis) && self.coeffs == other.coeffs
    }
}

impl FieldCoeffs {
    pub fn zeros(basis: Arc<SpectralBasis>) -> Self {
        let n = basis.n_modes;
        Self {
            basis,
            coeffs: vec![Vec3::ZERO; n],
        }
    }

    pub fn from_coeffs(basis: Arc<SpectralBasis>, coeffs: Vec<Vec3>) -> Result<Self> {
        if coeffs.len() != basis.n_modes {
            return Err(SllgError::BasisMismatch);
        }
        Ok(Self { basis, coeffs })
    }

    /// The spatially constant field equal to `v` everywhere.
    pub fn constant(basis: Arc<SpectralBasis>, v: Vec3) -> Self {
        let mut u = Self::zeros(basis);
        u.coeffs[0] = v * u.basis.length.sqrt();
        u
    }

    /// `e_k · v`.
    pub fn mode(basis: Arc<SpectralBasis>, k: usize, v: Vec3) -> Result<Self> {
        if k >= basis.n_modes {
            return Err(SllgError::ModeOutOfRange {
                requested: k + 1,
                available: basis.n_modes,
            });
        }
        let mut u = Self::zeros(basis);
        u.coeffs[k] = v;
        Ok(u)
    }

    pub fn basis(&self) -> &Arc<SpectralBasis> {
        &self.basis
    }

    pub fn coeffs(&self) -> &[Vec3] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Vec3] {
        &mut self.coeffs
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    fn check(&self, other: &FieldCoeffs) -> Result<()> {
        if self.basis.same_as(&other.basis) {
            Ok(())
        } else {
            Err(SllgError::BasisMismatch)
        }
    }

    /// Spectral L² inner product (Parseval).
    pub fn inner(&self, other: &FieldCoeffs) -> Result<f64> {
        self.check(other)?;
        Ok(self.inner_unchecked(other))
    }

    pub(crate) fn inner_unchecked(&self, other: &FieldCoeffs) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a.dot(*b))
            .sum()
    }

    pub fn norm_l2_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sq()).sum()
    }

    pub fn norm_l2(&self) -> f64 {
        self.norm_l2_sq().sqrt()
    }

    /// `‖∇u‖² = ⟨Au, u⟩`.
    pub fn grad_norm_sq(&self) -> f64 {
        self.coeffs
            .iter()
            .zip(&self.basis.eigenvalues)
            .map(|(c, l)| l * c.norm_sq())
            .sum()
    }

    /// `Δu = -Au`.
    pub fn apply_laplacian(&self) -> FieldCoeffs {
        self.map_modes(|k, c| c * -self.basis.eigenvalues[k])
    }

    /// `Au`.
    pub fn apply_a(&self) -> FieldCoeffs {
        self.map_modes(|k, c| c * self.basis.eigenvalues[k])
    }

    /// `A₁^β u` with `A₁ = I + A`.
    pub fn apply_a1_power(&self, beta: f64) -> FieldCoeffs {
        self.map_modes(|k, c| c * (1.0 + self.basis.eigenvalues[k]).powf(beta))
    }

    /// `‖A₁^β u‖_{L²}`. `β = ½` is the H¹ norm; negative `β` gives the
    /// dual-scale norms.
    pub fn fractional_norm(&self, beta: f64) -> f64 {
        self.coeffs
            .iter()
            .zip(&self.basis.eigenvalues)
            .map(|(c, l)| (1.0 + l).powf(2.0 * beta) * c.norm_sq())
            .sum::<f64>()
            .sqrt()
    }

    /// Orthogonal projection onto the first `m` modes.
    pub fn project_modes(&self, m: usize) -> Result<FieldCoeffs> {
        if m > self.basis.n_modes {
            return Err(SllgError::ModeOutOfRange {
                requested: m,
                available: self.basis.n_modes,
            });
        }
        Ok(self.map_modes(|k, c| if k < m { c } else { Vec3::ZERO }))
    }

    fn map_modes(&self, f: impl Fn(usize, Vec3) -> Vec3) -> FieldCoeffs {
        FieldCoeffs {
            basis: self.basis.clone(),
            coeffs: self
                .coeffs
                .iter()
                .enumerate()
                .map(|(k, c)| f(k, *c))
                .collect(),
        }
    }

    pub fn scaled(&self, s: f64) -> FieldCoeffs {
        self.map_modes(|_, c| c * s)
    }

    /// `self + s · other`.
    pub fn add_scaled(&self, s: f64, other: &FieldCoeffs) -> Result<FieldCoeffs> {
        self.check(other)?;
        Ok(self.add_scaled_unchecked(s, other))
    }

    pub(crate) fn add_scaled_unchecked(&self, s: f64, other: &FieldCoeffs) -> FieldCoeffs {
        FieldCoeffs {
            basis: self.basis.clone(),
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| *a + *b * s)
                .collect(),
        }
    }

    pub(crate) fn axpy(&mut self, s: f64, other: &FieldCoeffs) {
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += *b * s;
        }
    }

    /// Exact synthesis on the quadrature grid.
    pub fn to_physical(&self) -> PhysicalField {
        PhysicalField {
            basis: self.basis.clone(),
            values: self.basis.synthesize(&self.coeffs, &self.basis.synth),
        }
    }

    /// Spatial derivative `∂ₓu` on the quadrature grid, from the sine series.
    pub fn derivative_physical(&self) -> PhysicalField {
        PhysicalField {
            basis: self.basis.clone(),
            values: self.basis.synthesize(&self.coeffs, &self.basis.synth_deriv),
        }
    }

    /// Series evaluation at an arbitrary point.
    pub fn eval_at(&self, x: f64) -> Vec3 {
        let mut acc = Vec3::ZERO;
        for (k, c) in self.coeffs.iter().enumerate() {
            acc += *c * self.basis.eval_mode(k, x);
        }
        acc
    }

    pub fn eval_derivative_at(&self, x: f64) -> Vec3 {
        let mut acc = Vec3::ZERO;
        for (k, c) in self.coeffs.iter().enumerate() {
            acc += *c * self.basis.eval_mode_derivative(k, x);
        }
        acc
    }
}

/// Field values on the quadrature nodes.
#[derive(Debug, Clone)]
pub struct PhysicalField {
    basis: Arc<SpectralBasis>,
    values: Vec<Vec3>,
}

impl PhysicalField {
    /// Panics if `values.len()` differs from the node count.
    pub fn from_values(basis: Arc<SpectralBasis>, values: Vec<Vec3>) -> Self {
        assert_eq!(values.len(), basis.n_quad, "one value per quadrature node");
        Self { basis, values }
    }

    pub fn from_fn(basis: Arc<SpectralBasis>, f: impl Fn(f64) -> Vec3) -> Self {
        let values = basis.nodes.iter().map(|&x| f(x)).collect();
        Self { basis, values }
    }

    pub fn constant(basis: Arc<SpectralBasis>, v: Vec3) -> Self {
        let n = basis.n_quad;
        Self {
            basis,
            values: vec![v; n],
        }
    }

    pub fn basis(&self) -> &Arc<SpectralBasis> {
        &self.basis
    }

    pub fn values(&self) -> &[Vec3] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Vec3] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Vec3> {
        self.values
    }

    /// Quadrature projection onto the Galerkin space.
    pub fn to_coeffs(&self) -> FieldCoeffs {
        FieldCoeffs {
            basis: self.basis.clone(),
            coeffs: self.basis.analyze(&self.values),
        }
    }

    pub fn norm_l2_sq(&self) -> f64 {
        quad_norm_sq(&self.basis.weights, &self.values)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Quadrature projection of raw nodal values.
pub(crate) fn analyze_values(basis: &Arc<SpectralBasis>, values: &[Vec3]) -> FieldCoeffs {
    FieldCoeffs {
        basis: basis.clone(),
        coeffs: basis.analyze(values),
    }
}

pub(crate) fn synthesize_coeffs(u: &FieldCoeffs) -> Vec<Vec3> {
    u.basis.synthesize(&u.coeffs, &u.basis.synth)
}

pub(crate) fn synthesize_derivative(u: &FieldCoeffs) -> Vec<Vec3> {
    u.basis.synthesize(&u.coeffs, &u.basis.synth_deriv)
}
