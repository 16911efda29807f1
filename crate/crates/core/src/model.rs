//! The Galerkin LLG system: anisotropy, drift maps, noise maps and the
//! energy functional.
//!
//! Conventions. The effective field is `ρ = Δu − π∇φ(u)` and the
//! Stratonovich dynamics read
//!
//! ```text
//! du = λ₁ π(u×ρ) dt − λ₂ π(u×(u×ρ)) dt + Σ_j π(u×h_j) ∘ dW_j
//! ```
//!
//! which in terms of the four drift maps is
//! `λ₁(F¹+F³) − λ₂(F²+F⁴)` with `F¹ = −π(u×Au)`, `F² = −π(u×(u×Au))`,
//! `F³ = −π(u×π∇φ)`, `F⁴ = −π(u×(u×π∇φ))`. The Itô form adds
//! `½ Σ_j G_j² u` with `G_j u = π(u×h_j)`.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SllgError};
use crate::field::{quad_inner, quad_norm_sq, Vec3};
use crate::spectral::{
    analyze_values, synthesize_coeffs, synthesize_derivative, FieldCoeffs, PhysicalField,
    SpectralBasis,
};

/// Pointwise anisotropy energy density `φ: R³ → R`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Anisotropy {
    #[default]
    Zero,
    /// `φ(u) = K(1 − ⟨u,e⟩²)`.
    Uniaxial { axis: Vec3, strength: f64 },
    /// `φ(u) = K(1 − c² tanh(⟨u,e⟩²/c²))`: agrees with the uniaxial density
    /// to leading order for `|⟨u,e⟩| ≪ c` but is bounded with bounded
    /// derivatives on all of R³.
    TruncatedUniaxial { axis: Vec3, strength: f64, cap: f64 },
}

impl Anisotropy {
    pub fn uniaxial(axis: Vec3, strength: f64) -> Self {
        Anisotropy::Uniaxial { axis, strength }
    }

    pub fn validate(&self) -> Result<()> {
        let check_axis = |axis: &Vec3, strength: f64| {
            if !((axis.norm() - 1.0).abs() < 1e-12) {
                return Err(SllgError::InvalidModel(
                    "anisotropy axis must be a unit vector".into(),
                ));
            }
            if !(strength.is_finite() && strength >= 0.0) {
                return Err(SllgError::InvalidModel(
                    "anisotropy strength must be finite and nonnegative".into(),
                ));
            }
            Ok(())
        };
        match self {
            Anisotropy::Zero => Ok(()),
            Anisotropy::Uniaxial { axis, strength } => check_axis(axis, *strength),
            Anisotropy::TruncatedUniaxial {
                axis,
                strength,
                cap,
            } => {
                check_axis(axis, *strength)?;
                if !(cap.is_finite() && *cap > 0.0) {
                    return Err(SllgError::InvalidModel(
                        "anisotropy cap must be positive".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    /// True when `∇φ` is linear in `u`, so that `π∇φ(u) = ∇φ(u)` on the
    /// Galerkin space and no extra projection is needed.
    pub fn has_linear_gradient(&self) -> bool {
        matches!(self, Anisotropy::Zero | Anisotropy::Uniaxial { .. })
    }

    pub fn value(&self, u: Vec3) -> f64 {
        match *self {
            Anisotropy::Zero => 0.0,
            Anisotropy::Uniaxial { axis, strength } => strength * (1.0 - u.dot(axis).powi(2)),
            Anisotropy::TruncatedUniaxial {
                axis,
                strength,
                cap,
            } => {
                let c2 = cap * cap;
                strength * (1.0 - c2 * (u.dot(axis).powi(2) / c2).tanh())
            }
        }
    }

    pub fn gradient(&self, u: Vec3) -> Vec3 {
        match *self {
            Anisotropy::Zero => Vec3::ZERO,
            Anisotropy::Uniaxial { axis, strength } => axis * (-2.0 * strength * u.dot(axis)),
            Anisotropy::TruncatedUniaxial {
                axis,
                strength,
                cap,
            } => {
                let s = u.dot(axis);
                let sech2 = sech_sq(s * s / (cap * cap));
                axis * (-2.0 * strength * s * sech2)
            }
        }
    }

    /// `φ''(u)(g, k)`.
    pub fn hessian(&self, u: Vec3, g: Vec3, k: Vec3) -> f64 {
        match *self {
            Anisotropy::Zero => 0.0,
            Anisotropy::Uniaxial { axis, strength } => -2.0 * strength * g.dot(axis) * k.dot(axis),
            Anisotropy::TruncatedUniaxial {
                axis,
                strength,
                cap,
            } => {
                let s = u.dot(axis);
                let c2 = cap * cap;
                let r = s * s / c2;
                let second = 2.0 * sech_sq(r) * (1.0 - 4.0 * s * s / c2 * r.tanh());
                -strength * second * g.dot(axis) * k.dot(axis)
            }
        }
    }
}

fn sech_sq(r: f64) -> f64 {
    let c = r.cosh();
    1.0 / (c * c)
}

/// Closed-form noise field `h_j(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseChannel {
    Constant {
        vector: Vec3,
    },
    /// `vector · cos(mode·π·x/L)`.
    Cosine {
        vector: Vec3,
        mode: usize,
    },
    /// Samples on a uniform grid spanning `[0, L]` (endpoints included),
    /// linearly interpolated.
    Table {
        values: Vec<Vec3>,
    },
}

impl NoiseChannel {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            NoiseChannel::Constant { vector } | NoiseChannel::Cosine { vector, .. } => {
                vector.is_finite()
            }
            NoiseChannel::Table { values } => {
                values.len() >= 2 && values.iter().all(|v| v.is_finite())
            }
        };
        if ok {
            Ok(())
        } else {
            Err(SllgError::InvalidModel(
                "noise channel must be finite (tables need at least two samples)".into(),
            ))
        }
    }

    pub fn eval(&self, x: f64, length: f64) -> Vec3 {
        match self {
            NoiseChannel::Constant { vector } => *vector,
            NoiseChannel::Cosine { vector, mode } => {
                *vector * (*mode as f64 * PI * x / length).cos()
            }
            NoiseChannel::Table { values } => {
                let (i, t) = table_cell(values.len(), x, length);
                values[i] * (1.0 - t) + values[i + 1] * t
            }
        }
    }

    pub fn derivative(&self, x: f64, length: f64) -> Vec3 {
        match self {
            NoiseChannel::Constant { .. } => Vec3::ZERO,
            NoiseChannel::Cosine { vector, mode } => {
                let kw = *mode as f64 * PI / length;
                *vector * (-kw * (kw * x).sin())
            }
            NoiseChannel::Table { values } => {
                let (i, _) = table_cell(values.len(), x, length);
                let h = length / (values.len() - 1) as f64;
                (values[i + 1] - values[i]) * (1.0 / h)
            }
        }
    }
}

fn table_cell(len: usize, x: f64, length: f64) -> (usize, f64) {
    let cells = (len - 1) as f64;
    let pos = (x / length * cells).clamp(0.0, cells);
    let i = (pos.floor() as usize).min(len - 2);
    (i, pos - i as f64)
}

/// Initial magnetization profile; the Galerkin datum is its projection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialDatum {
    Constant {
        vector: Vec3,
    },
    /// `(sin χ cos θ, sin χ sin θ, cos χ)` with `θ(x) = a·cos(mode·π·x/L)`
    /// and fixed polar angle `χ`; pointwise unit for every parameter choice.
    Twist {
        amplitude: f64,
        mode: usize,
        #[serde(default = "default_polar_angle")]
        polar_angle: f64,
    },
    /// Explicit mode coefficients; missing modes are zero, extra ones dropped.
    Coefficients {
        values: Vec<Vec3>,
    },
}

fn default_polar_angle() -> f64 {
    PI / 2.0
}

impl InitialDatum {
    pub fn eval(&self, x: f64, length: f64) -> Option<Vec3> {
        match *self {
            InitialDatum::Constant { vector } => Some(vector),
            InitialDatum::Twist {
                amplitude,
                mode,
                polar_angle,
            } => {
                let theta = amplitude * (mode as f64 * PI * x / length).cos();
                let s = polar_angle.sin();
                Some(Vec3::new(
                    s * theta.cos(),
                    s * theta.sin(),
                    polar_angle.cos(),
                ))
            }
            InitialDatum::Coefficients { .. } => None,
        }
    }

    pub fn project(&self, basis: &Arc<SpectralBasis>) -> Result<FieldCoeffs> {
        match self {
            InitialDatum::Constant { vector } => Ok(FieldCoeffs::constant(basis.clone(), *vector)),
            InitialDatum::Coefficients { values } => {
                let mut coeffs = vec![Vec3::ZERO; basis.n_modes()];
                for (c, v) in coeffs.iter_mut().zip(values) {
                    *c = *v;
                }
                FieldCoeffs::from_coeffs(basis.clone(), coeffs)
            }
            InitialDatum::Twist { .. } => {
                let len = basis.length();
                Ok(
                    PhysicalField::from_fn(basis.clone(), |x| {
                        self.eval(x, len).unwrap_or_default()
                    })
                    .to_coeffs(),
                )
            }
        }
    }
}

/// Basis-independent model description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub lambda1: f64,
    pub lambda2: f64,
    #[serde(default)]
    pub anisotropy: Anisotropy,
    #[serde(default)]
    pub noise: Vec<NoiseChannel>,
    pub initial: InitialDatum,
}

impl ModelSpec {
    pub fn bind(&self, basis: &Arc<SpectralBasis>) -> Result<ModelParams> {
        for ch in &self.noise {
            ch.validate()?;
        }
        let len = basis.length();
        let channels = self
            .noise
            .iter()
            .map(|ch| PhysicalField::from_fn(basis.clone(), |x| ch.eval(x, len)))
            .collect();
        let derivs = self
            .noise
            .iter()
            .map(|ch| PhysicalField::from_fn(basis.clone(), |x| ch.derivative(x, len)))
            .collect();
        let mut m = ModelParams::new(
            basis.clone(),
            self.lambda1,
            self.lambda2,
            self.anisotropy.clone(),
            channels,
            self.initial.project(basis)?,
        )?;
        m.channel_derivatives = Some(derivs);
        Ok(m)
    }
}

/// A model bound to one spectral basis.
#[derive(Debug, Clone)]
pub struct ModelParams {
    basis: Arc<SpectralBasis>,
    pub lambda1: f64,
    pub lambda2: f64,
    pub anisotropy: Anisotropy,
    channels: Vec<PhysicalField>,
    channel_derivatives: Option<Vec<PhysicalField>>,
    initial: FieldCoeffs,
}

impl ModelParams {
    pub fn new(
        basis: Arc<SpectralBasis>,
        lambda1: f64,
        lambda2: f64,
        anisotropy: Anisotropy,
        channels: Vec<PhysicalField>,
        initial: FieldCoeffs,
    ) -> Result<Self> {
        if !lambda1.is_finite() {
            return Err(SllgError::InvalidModel("lambda1 must be finite".into()));
        }
        if !(lambda2.is_finite() && lambda2 > 0.0) {
            return Err(SllgError::InvalidModel(format!(
                "lambda2 must be > 0, got {lambda2}"
            )));
        }
        anisotropy.validate()?;
        for (j, h) in channels.iter().enumerate() {
            if !h.basis().same_as(&basis) {
                return Err(SllgError::BasisMismatch);
            }
            if !h.is_finite() {
                return Err(SllgError::InvalidModel(format!(
                    "noise channel {} is not finite on the grid",
                    j + 1
                )));
            }
        }
        if !initial.basis().same_as(&basis) {
            return Err(SllgError::BasisMismatch);
        }
        Ok(Self {
            basis,
            lambda1,
            lambda2,
            anisotropy,
            channels,
            channel_derivatives: None,
            initial,
        })
    }

    pub fn basis(&self) -> &Arc<SpectralBasis> {
        &self.basis
    }

    pub fn channels(&self) -> &[PhysicalField] {
        &self.channels
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn initial(&self) -> &FieldCoeffs {
        &self.initial
    }

    /// Spatial derivatives `h_j'` on the grid when the channels came from
    /// closed forms.
    pub fn channel_derivatives(&self) -> Option<&[PhysicalField]> {
        self.channel_derivatives.as_deref()
    }

    pub fn with_initial(mut self, initial: FieldCoeffs) -> Result<Self> {
        if !initial.basis().same_as(&self.basis) {
            return Err(SllgError::BasisMismatch);
        }
        self.initial = initial;
        Ok(self)
    }

    /// Common axis when every channel is a constant field parallel to one
    /// direction, together with the per-channel signed magnitudes.
    pub fn constant_parallel_channels(&self) -> Option<(Vec3, Vec<f64>)> {
        let mut axis: Option<Vec3> = None;
        let mut mags = Vec::with_capacity(self.channels.len());
        for h in &self.channels {
            let v0 = h.values()[0];
            if h.values().iter().any(|v| *v != v0) {
                return None;
            }
            match (axis, v0.normalized()) {
                (_, None) => mags.push(0.0),
                (None, Some(a)) => {
                    axis = Some(a);
                    mags.push(v0.norm());
                }
                (Some(a), Some(b)) => {
                    if a.cross(b).norm() > 1e-14 {
                        return None;
                    }
                    mags.push(v0.dot(a));
                }
            }
        }
        Some((axis.unwrap_or(Vec3::Z), mags))
    }

    // ---- effective field -------------------------------------------------

    /// Nodal values of `∇φ(u(x_q))`.
    fn gradient_values(&self, up: &[Vec3]) -> Vec<Vec3> {
        up.iter().map(|v| self.anisotropy.gradient(*v)).collect()
    }

    /// `π∇φ(u)` in coefficient space.
    pub fn projected_gradient(&self, u: &FieldCoeffs) -> FieldCoeffs {
        let up = synthesize_coeffs(u);
        analyze_values(&self.basis, &self.gradient_values(&up))
    }

    /// Unprojected `∇φ(u)` on the grid.
    pub fn anisotropy_gradient(&self, u: &FieldCoeffs) -> PhysicalField {
        let up = synthesize_coeffs(u);
        PhysicalField::from_values(self.basis.clone(), self.gradient_values(&up))
    }

    /// `ρ = Δu − π∇φ(u)`.
    pub fn effective_field(&self, u: &FieldCoeffs) -> FieldCoeffs {
        u.apply_laplacian()
            .add_scaled_unchecked(-1.0, &self.projected_gradient(u))
    }

    /// Nodal `(u, ρ)` pair, reusing the linear-gradient shortcut.
    pub(crate) fn state_and_field(&self, u: &FieldCoeffs) -> (Vec<Vec3>, Vec<Vec3>) {
        let up = synthesize_coeffs(u);
        let lap = synthesize_coeffs(&u.apply_laplacian());
        let grad = if self.anisotropy.has_linear_gradient() {
            self.gradient_values(&up)
        } else {
            synthesize_coeffs(&analyze_values(&self.basis, &self.gradient_values(&up)))
        };
        let rho = lap.iter().zip(&grad).map(|(l, g)| *l - *g).collect();
        (up, rho)
    }

    // ---- drift maps ------------------------------------------------------

    /// `F¹(u) = −π(u×Au)`.
    pub fn drift_f1(&self, u: &FieldCoeffs) -> FieldCoeffs {
        let up = synthesize_coeffs(u);
        let au = synthesize_coeffs(&u.apply_a());
        self.project(up.iter().zip(&au).map(|(a, b)| -a.cross(*b)))
    }

    /// `F²(u) = −π(u×(u×Au))`.
    pub fn drift_f2(&self, u: &FieldCoeffs) -> FieldCoeffs {
        let up = synthesize_coeffs(u);
        let au = synthesize_coeffs(&u.apply_a());
        self.project(up.iter().zip(&au).map(|(a, b)| -a.cross(a.cross(*b))))
    }

    /// `F³(u) = −π(u×π∇φ(u))`.
    pub fn drift_f3(&self, u: &FieldCoeffs) -> FieldCoeffs {
        let up = synthesize_coeffs(u);
        let pg = synthesize_coeffs(&self.projected_gradient(u));
        self.project(up.iter().zip(&pg).map(|(a, b)| -a.cross(*b)))
    }

    /// `F⁴(u) = −π(u×(u×π∇φ(u)))`.
    pub fn drift_f4(&self, u: &FieldCoeffs) -> FieldCoeffs {
        let up = synthesize_coeffs(u);
        let pg = synthesize_coeffs(&self.projected_gradient(u));
        self.project(up.iter().zip(&pg).map(|(a, b)| -a.cross(a.cross(*b))))
    }

    fn project(&self, values: impl Iterator<Item = Vec3>) -> FieldCoeffs {
        let v: Vec<Vec3> = values.collect();
        analyze_values(&self.basis, &v)
    }

    /// `G_j u = π(u×h_j)`, with `j` counted from 1.
    pub fn noise_g(&self, u: &FieldCoeffs, j: usize) -> Result<FieldCoeffs> {
        let h = self.channel(j)?;
        let up = synthesize_coeffs(u);
        Ok(self.project(up.iter().zip(h.values()).map(|(a, b)| a.cross(*b))))
    }

    fn channel(&self, j: usize) -> Result<&PhysicalField> {
        if j == 0 || j > self.channels.len() {
            return Err(SllgError::ChannelOutOfRange {
                index: j,
                count: self.channels.len(),
            });
        }
        Ok(&self.channels[j - 1])
    }

    /// `½ Σ_j G_j² u`.
    pub fn ito_correction(&self, u: &FieldCoeffs) -> FieldCoeffs {
        let up = synthesize_coeffs(u);
        let mut acc = FieldCoeffs::zeros(self.basis.clone());
        for h in &self.channels {
            let gu = self.project(up.iter().zip(h.values()).map(|(a, b)| a.cross(*b)));
            let gup = synthesize_coeffs(&gu);
            let ggu = self.project(gup.iter().zip(h.values()).map(|(a, b)| a.cross(*b)));
            acc.axpy(0.5, &ggu);
        }
        acc
    }

    /// `λ₁(F¹+F³) − λ₂(F²+F⁴) = π(λ₁ u×ρ − λ₂ u×(u×ρ))`: the drift of the
    /// Stratonovich form.
    pub fn stratonovich_drift(&self, u: &FieldCoeffs) -> FieldCoeffs {
        let (up, rho) = self.state_and_field(u);
        self.project(up.iter().zip(&rho).map(|(a, r)| self.llg_vector(*a, *r)))
    }

    #[inline]
    fn llg_vector(&self, u: Vec3, rho: Vec3) -> Vec3 {
        let ur = u.cross(rho);
        ur * self.lambda1 - u.cross(ur) * self.lambda2
    }

    /// The Itô drift `F̂ = λ₁(F¹+F³) − λ₂(F²+F⁴) + ½ΣG²`.
    pub fn full_drift(&self, u: &FieldCoeffs) -> FieldCoeffs {
        let mut d = self.stratonovich_drift(u);
        d.axpy(1.0, &self.ito_correction(u));
        d
    }

    /// Nodal `H(x) = Σ_j h_j(x)·ΔW_j`; `Σ_j G_j(u)ΔW_j = π(u×H)`.
    pub(crate) fn noise_combination(&self, increments: &[f64]) -> Option<Vec<Vec3>> {
        if self.channels.is_empty() || increments.iter().all(|w| *w == 0.0) {
            return None;
        }
        let mut out = vec![Vec3::ZERO; self.basis.n_quad()];
        for (h, w) in self.channels.iter().zip(increments) {
            for (o, v) in out.iter_mut().zip(h.values()) {
                *o += *v * *w;
            }
        }
        Some(out)
    }

    /// `dt·(Stratonovich drift)(u) + Σ_j G_j(u)ΔW_j` in one projection.
    pub(crate) fn stratonovich_increment(
        &self,
        u: &FieldCoeffs,
        dt: f64,
        noise: Option<&[Vec3]>,
    ) -> FieldCoeffs {
        let (up, rho) = self.state_and_field(u);
        let mut values: Vec<Vec3> = up
            .iter()
            .zip(&rho)
            .map(|(a, r)| self.llg_vector(*a, *r) * dt)
            .collect();
        if let Some(h) = noise {
            for ((v, a), hv) in values.iter_mut().zip(&up).zip(h) {
                *v += a.cross(*hv);
            }
        }
        analyze_values(&self.basis, &values)
    }

    /// `Σ_j G_j(u)ΔW_j`.
    pub(crate) fn noise_increment(&self, u: &FieldCoeffs, noise: &[Vec3]) -> FieldCoeffs {
        let up = synthesize_coeffs(u);
        self.project(up.iter().zip(noise).map(|(a, h)| a.cross(*h)))
    }

    // ---- energy calculus -------------------------------------------------

    /// Exchange part `½‖∇u‖²`.
    pub fn exchange_energy(&self, u: &FieldCoeffs) -> f64 {
        0.5 * u.grad_norm_sq()
    }

    /// Anisotropy part `∫φ(u)` by quadrature.
    pub fn anisotropy_energy(&self, u: &FieldCoeffs) -> f64 {
        if matches!(self.anisotropy, Anisotropy::Zero) {
            return 0.0;
        }
        let up = synthesize_coeffs(u);
        self.anisotropy_energy_values(&up)
    }

    fn anisotropy_energy_values(&self, up: &[Vec3]) -> f64 {
        up.iter()
            .zip(self.basis.weights())
            .map(|(v, w)| w * self.anisotropy.value(*v))
            .sum()
    }

    /// `Φ(u) = ½‖∇u‖² + ∫φ(u)`.
    pub fn energy(&self, u: &FieldCoeffs) -> f64 {
        self.exchange_energy(u) + self.anisotropy_energy(u)
    }

    /// `Φ'(u)(g) = ⟨Au, g⟩ + ∫⟨∇φ(u), g⟩`.
    pub fn energy_gradient_pairing(&self, u: &FieldCoeffs, g: &FieldCoeffs) -> Result<f64> {
        let exch = u.apply_a().inner(g)?;
        let up = synthesize_coeffs(u);
        let gp = synthesize_coeffs(g);
        let aniso = quad_inner(self.basis.weights(), &self.gradient_values(&up), &gp);
        Ok(exch + aniso)
    }

    /// `Φ''(u)(g, k) = ⟨∇g, ∇k⟩ + ∫φ''(u)(g, k)`.
    pub fn energy_hessian_pairing(
        &self,
        u: &FieldCoeffs,
        g: &FieldCoeffs,
        k: &FieldCoeffs,
    ) -> Result<f64> {
        let exch = g.apply_a().inner(k)?;
        u.inner(g)?;
        let up = synthesize_coeffs(u);
        let gp = synthesize_coeffs(g);
        let kp = synthesize_coeffs(k);
        let aniso: f64 = self
            .basis
            .weights()
            .iter()
            .enumerate()
            .map(|(q, w)| w * self.anisotropy.hessian(up[q], gp[q], kp[q]))
            .sum();
        Ok(exch + aniso)
    }

    /// `Φ'(u)[F̂(u)]` evaluated directly.
    pub fn energy_drift_identity_lhs(&self, u: &FieldCoeffs) -> f64 {
        let d = self.full_drift(u);
        self.energy_gradient_pairing(u, &d)
            .expect("drift shares the state basis")
    }

    /// `−λ₂‖u×ρ‖² − ½ Σ_j ⟨ρ, π(u×h_j)×h_j⟩`.
    pub fn energy_drift_identity_rhs(&self, u: &FieldCoeffs) -> f64 {
        let up = synthesize_coeffs(u);
        let rho = synthesize_coeffs(&self.effective_field(u));
        let w = self.basis.weights();
        let ur: Vec<Vec3> = up.iter().zip(&rho).map(|(a, r)| a.cross(*r)).collect();
        let mut total = -self.lambda2 * quad_norm_sq(w, &ur);
        for h in &self.channels {
            let gu = self.project(up.iter().zip(h.values()).map(|(a, b)| a.cross(*b)));
            let gup = synthesize_coeffs(&gu);
            let gh: Vec<Vec3> = gup
                .iter()
                .zip(h.values())
                .map(|(a, b)| a.cross(*b))
                .collect();
            total -= 0.5 * quad_inner(w, &rho, &gh);
        }
        total
    }

    /// `Φ'(u)[G_j u]`.
    pub fn energy_noise_pairing(&self, u: &FieldCoeffs, j: usize) -> Result<f64> {
        let g = self.noise_g(u, j)?;
        self.energy_gradient_pairing(u, &g)
    }

    /// `Φ''(u)[G_j u, G_j u]`.
    pub fn energy_noise_hessian(&self, u: &FieldCoeffs, j: usize) -> Result<f64> {
        let g = self.noise_g(u, j)?;
        self.energy_hessian_pairing(u, &g, &g)
    }

    // ---- diagnostics helpers ----------------------------------------------

    /// Nodal `u×ρ` and `u×(u×ρ)`.
    pub(crate) fn precession_damping_values(&self, u: &FieldCoeffs) -> (Vec<Vec3>, Vec<Vec3>) {
        let (up, rho) = self.state_and_field(u);
        let ur: Vec<Vec3> = up.iter().zip(&rho).map(|(a, r)| a.cross(*r)).collect();
        let uur = up.iter().zip(&ur).map(|(a, b)| a.cross(*b)).collect();
        (ur, uur)
    }

    /// `‖u×ρ‖²_{L²}`.
    pub fn precession_norm_sq(&self, u: &FieldCoeffs) -> f64 {
        let (ur, _) = self.precession_damping_values(u);
        quad_norm_sq(self.basis.weights(), &ur)
    }

    /// `‖∇ G_j u‖²`, from the spectral coefficients of `G_j u`.
    pub fn noise_gradient_norm_sq(&self, u: &FieldCoeffs, j: usize) -> Result<f64> {
        Ok(self.noise_g(u, j)?.grad_norm_sq())
    }

    /// Nodal `u'` on the grid.
    pub(crate) fn derivative_values(u: &FieldCoeffs) -> Vec<Vec3> {
        synthesize_derivative(u)
    }
}
