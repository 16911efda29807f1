//! Trajectory observers: norms, energy, dissipation integrals, sphere
//! deviation, Hölder quotients and the weak-form residual.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SllgError};
use crate::field::{quad_inner, quad_norm_sq, Vec3};
use crate::integrators::{integrate, StepperConfig};
use crate::model::{ModelParams, ModelSpec};
use crate::spectral::{analyze_values, synthesize_coeffs, FieldCoeffs, SpectralBasis};
use crate::wiener::WienerPath;

pub const DEFAULT_BETA: f64 = 0.3;
pub const DEFAULT_ALPHA: f64 = 0.25;

#[derive(Debug, Clone, PartialEq)]
pub struct ObserverConfig {
    /// Diagnostics are recorded every `stride` steps and at the final step.
    pub stride: usize,
    /// Exponent of the dual-scale norm column.
    pub beta: f64,
    /// Keep a state snapshot every `snapshot_stride` steps. `Some(1)` keeps
    /// every state, which the weak residual needs.
    pub snapshot_stride: Option<usize>,
}

impl Default for ObserverConfig {
    fn default() -> Self {
        Self {
            stride: 1,
            beta: DEFAULT_BETA,
            snapshot_stride: None,
        }
    }
}

/// One row of the time series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticRow {
    pub time: f64,
    pub l2: f64,
    /// `‖A₁^{1/2} u‖`.
    pub v_norm: f64,
    pub energy: f64,
    pub exchange: f64,
    pub anisotropy: f64,
    /// `∫₀ᵗ ‖u×ρ‖² ds`, left-endpoint rule over observed times.
    pub cum_dissipation: f64,
    pub sphere_dev: f64,
    /// `‖π(u×(u×ρ))‖_{X^{−β}}`.
    pub xneg_beta: f64,
    /// `∫₀ᵗ ‖u×(u×ρ)‖²_{L^{3/2}} ds`.
    pub cum_damping_l32: f64,
    /// `∫₀ᵗ ‖π(u×(u×ρ))‖²_{X^{−β}} ds`.
    pub cum_damping_xneg: f64,
}

impl DiagnosticRow {
    pub const CSV_HEADER: &'static str =
        "time,l2,v_norm,energy,exchange,anisotropy,cum_dissipation,sphere_dev,xneg_beta";

    pub fn csv_values(&self) -> [f64; 9] {
        [
            self.time,
            self.l2,
            self.v_norm,
            self.energy,
            self.exchange,
            self.anisotropy,
            self.cum_dissipation,
            self.sphere_dev,
            self.xneg_beta,
        ]
    }
}

#[derive(Debug, Clone, Copy)]
struct Integrands {
    time: f64,
    dissipation: f64,
    damping_l32: f64,
    damping_xneg_sq: f64,
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub step: usize,
    pub time: f64,
    pub state: FieldCoeffs,
}

#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    dt: f64,
    steps: usize,
    observer: Option<ObserverConfig>,
    initial: FieldCoeffs,
    final_state: FieldCoeffs,
    rows: Vec<DiagnosticRow>,
    snapshots: Vec<Snapshot>,
    last: Option<Integrands>,
}

/// `(∫|f|^{3/2})^{4/3}` by quadrature: the squared `L^{3/2}` norm.
pub fn l32_norm_sq(weights: &[f64], values: &[Vec3]) -> f64 {
    weights
        .iter()
        .zip(values)
        .map(|(w, v)| w * v.norm().powf(1.5))
        .sum::<f64>()
        .powf(4.0 / 3.0)
}

impl TrajectoryRecord {
    pub fn new(
        initial: FieldCoeffs,
        dt: f64,
        steps: usize,
        observer: Option<ObserverConfig>,
    ) -> Self {
        Self {
            dt,
            steps,
            observer,
            final_state: initial.clone(),
            initial,
            rows: Vec::new(),
            snapshots: Vec::new(),
            last: None,
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn rows(&self) -> &[DiagnosticRow] {
        &self.rows
    }

    pub fn snapshots(&self) -> &[Snapshot] {
        &self.snapshots
    }

    pub fn initial_state(&self) -> &FieldCoeffs {
        &self.initial
    }

    pub fn final_state(&self) -> &FieldCoeffs {
        &self.final_state
    }

    pub(crate) fn finish(&mut self, u: FieldCoeffs) {
        self.final_state = u;
    }

    pub(crate) fn keep_snapshot(&mut self, step: usize, u: &FieldCoeffs) {
        if let Some(stride) = self.observer.as_ref().and_then(|o| o.snapshot_stride) {
            if stride > 0 && step.is_multiple_of(stride) {
                self.snapshots.push(Snapshot {
                    step,
                    time: step as f64 * self.dt,
                    state: u.clone(),
                });
            }
        }
    }

    /// Appends the diagnostics of state `u` at time `t`. Running integrals
    /// advance by the integrand at the previous observed time.
    pub fn observe(&mut self, u: &FieldCoeffs, t: f64, m: &ModelParams) {
        let beta = self.observer.as_ref().map_or(DEFAULT_BETA, |o| o.beta);
        if let Some(prev) = self.rows.last() {
            assert!(t > prev.time, "observation times must increase");
        }
        let w = m.basis().weights();
        let (up, rho) = m.state_and_field(u);
        let ur: Vec<Vec3> = up.iter().zip(&rho).map(|(a, r)| a.cross(*r)).collect();
        let uur: Vec<Vec3> = up.iter().zip(&ur).map(|(a, b)| a.cross(*b)).collect();
        let xneg = analyze_values(m.basis(), &uur).fractional_norm(-beta);
        let now = Integrands {
            time: t,
            dissipation: quad_norm_sq(w, &ur),
            damping_l32: l32_norm_sq(w, &uur),
            damping_xneg_sq: xneg * xneg,
        };

        let (mut diss, mut l32, mut xn) = self.rows.last().map_or((0.0, 0.0, 0.0), |r| {
            (r.cum_dissipation, r.cum_damping_l32, r.cum_damping_xneg)
        });
        if let Some(prev) = self.last {
            let h = t - prev.time;
            diss += h * prev.dissipation;
            l32 += h * prev.damping_l32;
            xn += h * prev.damping_xneg_sq;
        }
        self.last = Some(now);

        let exchange = m.exchange_energy(u);
        let anisotropy: f64 = up
            .iter()
            .zip(w)
            .map(|(v, wq)| wq * m.anisotropy.value(*v))
            .sum();
        let sphere_dev = up
            .iter()
            .map(|v| (v.norm() - 1.0).abs())
            .fold(0.0, f64::max);
        self.rows.push(DiagnosticRow {
            time: t,
            l2: u.norm_l2(),
            v_norm: u.fractional_norm(0.5),
            energy: exchange + anisotropy,
            exchange,
            anisotropy,
            cum_dissipation: diss,
            sphere_dev,
            xneg_beta: xneg,
            cum_damping_l32: l32,
            cum_damping_xneg: xn,
        });
    }

    /// Every state of the trajectory, when snapshots were kept at each step.
    pub fn all_states(&self) -> Result<Vec<FieldCoeffs>> {
        if self.snapshots.len() != self.steps + 1
            || self.snapshots.iter().enumerate().any(|(i, s)| s.step != i)
        {
            return Err(SllgError::Diagnostics(
                "weak residual needs a snapshot at every step".into(),
            ));
        }
        Ok(self.snapshots.iter().map(|s| s.state.clone()).collect())
    }

    pub fn max_sphere_deviation(&self) -> f64 {
        self.rows.iter().map(|r| r.sphere_dev).fold(0.0, f64::max)
    }

    pub fn sup_energy(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.energy)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `max_{s<t} ‖u(t) − u(s)‖_{L²} / |t − s|^α` over stored snapshots.
pub fn holder_quotient(record: &TrajectoryRecord, alpha: f64) -> Result<f64> {
    holder_quotient_of(record.snapshots(), alpha)
}

pub fn holder_quotient_of(snaps: &[Snapshot], alpha: f64) -> Result<f64> {
    if snaps.len() < 2 {
        return Err(SllgError::Diagnostics(format!(
            "Hölder quotient needs at least 2 snapshots, have {}",
            snaps.len()
        )));
    }
    let mut best: f64 = 0.0;
    for (i, a) in snaps.iter().enumerate() {
        for b in &snaps[i + 1..] {
            let d = b.state.add_scaled_unchecked(-1.0, &a.state).norm_l2();
            best = best.max(d / (b.time - a.time).powf(alpha));
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HolderEntry {
    pub lag: f64,
    pub quotient: f64,
}

/// Largest quotient at each dyadic multiple of the snapshot spacing.
pub fn holder_table(record: &TrajectoryRecord, alpha: f64) -> Result<Vec<HolderEntry>> {
    holder_table_of(record.snapshots(), alpha)
}

pub fn holder_table_of(snaps: &[Snapshot], alpha: f64) -> Result<Vec<HolderEntry>> {
    if snaps.len() < 2 {
        return Err(SllgError::Diagnostics(
            "Hölder table needs at least 2 snapshots".into(),
        ));
    }
    let mut out = Vec::new();
    let mut gap = 1;
    while gap < snaps.len() {
        let mut best: f64 = 0.0;
        for i in 0..snaps.len() - gap {
            let (a, b) = (&snaps[i], &snaps[i + gap]);
            let d = b.state.add_scaled_unchecked(-1.0, &a.state).norm_l2();
            best = best.max(d / (b.time - a.time).powf(alpha));
        }
        out.push(HolderEntry {
            lag: snaps[gap].time - snaps[0].time,
            quotient: best,
        });
        gap *= 2;
    }
    Ok(out)
}

/// Test field `ψ(x) = sin(kπx/L)·a`, vanishing at both ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestFunction {
    pub mode: usize,
    pub vector: Vec3,
}

impl TestFunction {
    pub fn new(mode: usize, vector: Vec3) -> Result<Self> {
        let tf = Self { mode, vector };
        tf.validate()?;
        Ok(tf)
    }

    pub fn validate(&self) -> Result<()> {
        if self.mode == 0 {
            return Err(SllgError::Diagnostics(
                "test function mode must be >= 1".into(),
            ));
        }
        if !self.vector.is_finite() {
            return Err(SllgError::Diagnostics(
                "test function vector must be finite".into(),
            ));
        }
        Ok(())
    }

    fn wavenumber(&self, length: f64) -> f64 {
        self.mode as f64 * std::f64::consts::PI / length
    }

    pub fn value(&self, x: f64, length: f64) -> Vec3 {
        self.vector * (self.wavenumber(length) * x).sin()
    }

    pub fn derivative(&self, x: f64, length: f64) -> Vec3 {
        let kw = self.wavenumber(length);
        self.vector * (kw * (kw * x).cos())
    }

    /// Exact L² projection onto the Galerkin space, from the closed-form
    /// integrals `∫₀ᴸ sin(kπx/L) cos(jπx/L) dx`.
    pub fn projected(&self, basis: &Arc<SpectralBasis>) -> FieldCoeffs {
        let len = basis.length();
        let k = self.mode as f64;
        let coeffs = (0..basis.n_modes())
            .map(|j| {
                if (self.mode + j).is_multiple_of(2) {
                    return Vec3::ZERO;
                }
                let jf = j as f64;
                let integral = len / std::f64::consts::PI * 2.0 * k / (k * k - jf * jf);
                let norm = if j == 0 {
                    (1.0 / len).sqrt()
                } else {
                    (2.0 / len).sqrt()
                };
                self.vector * (integral * norm)
            })
            .collect();
        FieldCoeffs::from_coeffs(basis.clone(), coeffs).expect("one coefficient per mode")
    }
}

/// Signed defects of the weak identity at final time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeakResidual {
    /// LHS − RHS with the Stratonovich integral as midpoint sums.
    pub stratonovich: f64,
    /// Same with left-point sums (converges to the Itô integral).
    pub left_point: f64,
    /// `∫ ⟨½ΣG²u, ψ⟩ dt`, the gap the left-point sums should leave.
    pub ito_correction: f64,
}

impl WeakResidual {
    pub fn residual(&self) -> f64 {
        self.stratonovich.abs()
    }
}

/// Evaluates the weak form of the equation against `ψ` along a stored
/// trajectory `states[0..=M]` driven by `path`.
///
/// For Galerkin states `⟨u, ψ⟩ = ⟨u, πψ⟩`, so the pairing uses the exact
/// projection of `ψ`. The exchange terms use the integrated-by-parts forms
/// `⟨u×Δu, v⟩ = ⟨u', u×v'⟩` and `⟨u×(u×Δu), v⟩ = −⟨u', (v×u)'×u⟩`;
/// anisotropy terms use the unprojected `∇φ(u)`. Drift time integrals are
/// left-endpoint sums, like the running integrals of [`TrajectoryRecord`].
pub fn weak_residual(
    states: &[FieldCoeffs],
    path: &WienerPath,
    psi: &TestFunction,
    m: &ModelParams,
) -> Result<WeakResidual> {
    psi.validate()?;
    if states.len() != path.steps() + 1 {
        return Err(SllgError::Diagnostics(format!(
            "need {} states for a {}-step path, got {}",
            path.steps() + 1,
            path.steps(),
            states.len()
        )));
    }
    if path.channels() != m.n_channels() {
        return Err(SllgError::PathMismatch(
            "channel count differs from model".into(),
        ));
    }
    let basis = m.basis();
    let w = basis.weights();
    let v_coeffs = psi.projected(basis);
    let v = synthesize_coeffs(&v_coeffs);
    let dv = ModelParams::derivative_values(&v_coeffs);
    let dt = path.dt();

    let drift_pairing = |u: &FieldCoeffs| -> f64 {
        let up = synthesize_coeffs(u);
        let du = ModelParams::derivative_values(u);
        let mut prec = 0.0;
        let mut damp = 0.0;
        for q in 0..up.len() {
            let (a, da) = (up[q], du[q]);
            let grad = m.anisotropy.gradient(a);
            // ⟨u×Δu, v⟩ and ⟨u×∇φ, v⟩
            prec += w[q] * (da.dot(a.cross(dv[q])) - a.cross(grad).dot(v[q]));
            // ⟨u×(u×Δu), v⟩ and ⟨u×(u×∇φ), v⟩
            let dvu = dv[q].cross(a) + v[q].cross(da);
            damp += w[q] * (-da.dot(dvu.cross(a)) - a.cross(a.cross(grad)).dot(v[q]));
        }
        m.lambda1 * prec - m.lambda2 * damp
    };
    let noise_pairing = |u: &FieldCoeffs, inc: &[f64]| -> f64 {
        match m.noise_combination(inc) {
            None => 0.0,
            Some(h) => {
                let up = synthesize_coeffs(u);
                let uh: Vec<Vec3> = up.iter().zip(&h).map(|(a, b)| a.cross(*b)).collect();
                quad_inner(w, &uh, &v)
            }
        }
    };

    let lhs = states[path.steps()].inner(&v_coeffs)? - states[0].inner(&v_coeffs)?;
    let mut drift = 0.0;
    let mut strat = 0.0;
    let mut left = 0.0;
    let mut correction = 0.0;
    for k in 0..path.steps() {
        drift += dt * drift_pairing(&states[k]);
        let inc = path.increment(k);
        let mid = states[k].add_scaled(1.0, &states[k + 1])?.scaled(0.5);
        strat += noise_pairing(&mid, inc);
        left += noise_pairing(&states[k], inc);
        if m.n_channels() > 0 {
            correction += dt * m.ito_correction(&states[k]).inner(&v_coeffs)?;
        }
    }
    Ok(WeakResidual {
        stratonovich: lhs - drift - strat,
        left_point: lhs - drift - left,
        ito_correction: correction,
    })
}

/// Defect of the discrete Itô energy balance
/// `Φ(u_M) − Φ(u_0) = Σ (Φ'[F̂] + ½ΣΦ''[G_j, G_j]) dt + Σ Φ'[G_j] ΔW_j`
/// with left-point sums. Tends to zero with `dt` for a convergent path.
pub fn ito_energy_balance(
    states: &[FieldCoeffs],
    path: &WienerPath,
    m: &ModelParams,
) -> Result<f64> {
    if states.len() != path.steps() + 1 {
        return Err(SllgError::Diagnostics("need one state per step".into()));
    }
    let dt = path.dt();
    let mut sum = 0.0;
    for (k, u) in states[..path.steps()].iter().enumerate() {
        sum += dt * m.energy_drift_identity_rhs(u);
        for (j, dw) in path.increment(k).iter().enumerate() {
            sum += 0.5 * dt * m.energy_noise_hessian(u, j + 1)?;
            sum += dw * m.energy_noise_pairing(u, j + 1)?;
        }
    }
    Ok(m.energy(&states[path.steps()]) - m.energy(&states[0]) - sum)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereDeviationRow {
    pub n_modes: usize,
    pub max_deviation: f64,
}

/// Max-over-time sphere deviation for each mode count, all runs driven by
/// the same path.
pub fn sphere_deviation_study(
    spec: &ModelSpec,
    length: f64,
    oversample: usize,
    n_list: &[usize],
    cfg: &StepperConfig,
    path: &WienerPath,
) -> Result<Vec<SphereDeviationRow>> {
    if n_list.is_empty() {
        return Err(SllgError::Study("mode list is empty".into()));
    }
    let unit = (0..=64).all(|i| {
        let x = length * i as f64 / 64.0;
        spec.initial
            .eval(x, length)
            .is_some_and(|v| (v.norm() - 1.0).abs() < 1e-12)
    });
    if !unit {
        return Err(SllgError::Study(
            "sphere deviation study needs a pointwise unit initial datum".into(),
        ));
    }
    let observer = ObserverConfig::default();
    n_list
        .iter()
        .map(|&n| {
            let basis = SpectralBasis::shared(length, n, oversample)?;
            let m = spec.bind(&basis)?;
            let rec = integrate(m.initial(), &m, cfg, path, Some(&observer))?;
            Ok(SphereDeviationRow {
                n_modes: n,
                max_deviation: rec.max_sphere_deviation(),
            })
        })
        .collect()
}
