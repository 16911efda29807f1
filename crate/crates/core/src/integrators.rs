//! Time stepping for the Galerkin SDE.
//!
//! * `EulerMaruyamaIto`: explicit Euler on the Itô form (drift includes the
//!   `½ΣG²` correction).
//! * `HeunStratonovich`: predictor-corrector on the Stratonovich vector
//!   fields.
//! * `ImplicitMidpoint`: Stratonovich midpoint rule solved by damped
//!   fixed-point iteration. Every increment is orthogonal to the midpoint, so
//!   the L² norm is conserved up to the solver tolerance.

use serde::{Deserialize, Serialize};

use crate::diagnostics::{ObserverConfig, TrajectoryRecord};
use crate::error::{Result, SllgError};
use crate::model::ModelParams;
use crate::spectral::FieldCoeffs;
use crate::wiener::WienerPath;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    EulerMaruyamaIto,
    HeunStratonovich,
    ImplicitMidpoint,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [
        Scheme::EulerMaruyamaIto,
        Scheme::HeunStratonovich,
        Scheme::ImplicitMidpoint,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::EulerMaruyamaIto => "euler_maruyama_ito",
            Scheme::HeunStratonovich => "heun_stratonovich",
            Scheme::ImplicitMidpoint => "implicit_midpoint",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Scheme::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| format!("unknown scheme `{s}`"))
    }
}

pub const DEFAULT_TOLERANCE: f64 = 1e-13;
pub const DEFAULT_MAX_ITERATIONS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepperConfig {
    pub scheme: Scheme,
    pub dt: f64,
    pub t_final: f64,
    /// Fixed-point stopping threshold on the L² norm of successive iterates.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Relaxation factor in `(0, 1]`.
    pub damping: f64,
}

impl StepperConfig {
    pub fn new(scheme: Scheme, dt: f64, t_final: f64) -> Self {
        Self {
            scheme,
            dt,
            t_final,
            tolerance: DEFAULT_TOLERANCE,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            damping: 1.0,
        }
    }

    pub fn with_scheme(self, scheme: Scheme) -> Self {
        Self { scheme, ..self }
    }

    pub fn with_dt(self, dt: f64) -> Self {
        Self { dt, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(SllgError::InvalidStepper(format!(
                "dt must be > 0, got {}",
                self.dt
            )));
        }
        if !(self.t_final.is_finite() && self.t_final >= 0.0) {
            return Err(SllgError::InvalidStepper("t_final must be >= 0".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(SllgError::InvalidStepper("tolerance must be > 0".into()));
        }
        if self.max_iterations == 0 {
            return Err(SllgError::InvalidStepper(
                "max_iterations must be >= 1".into(),
            ));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(SllgError::InvalidStepper(
                "damping must lie in (0, 1]".into(),
            ));
        }
        self.steps().map(|_| ())
    }

    /// Number of steps `T / dt`; fails unless `dt` divides `T`.
    pub fn steps(&self) -> Result<usize> {
        let ratio = self.t_final / self.dt;
        let steps = ratio.round();
        if (steps * self.dt - self.t_final).abs() > 1e-12 * self.t_final.max(self.dt) {
            return Err(SllgError::InvalidStepper(format!(
                "dt = {} does not divide t_final = {}",
                self.dt, self.t_final
            )));
        }
        Ok(steps as usize)
    }
}

fn finite(u: FieldCoeffs) -> Result<FieldCoeffs> {
    if u.is_finite() {
        Ok(u)
    } else {
        Err(SllgError::NonFinite)
    }
}

/// `u + dt·F̂(u) + Σ_j G_j(u)ΔW_j`.
pub fn step_euler_ito(
    u: &FieldCoeffs,
    increments: &[f64],
    m: &ModelParams,
    cfg: &StepperConfig,
) -> Result<FieldCoeffs> {
    let mut next = u.add_scaled(cfg.dt, &m.full_drift(u))?;
    if let Some(h) = m.noise_combination(increments) {
        next.axpy(1.0, &m.noise_increment(u, &h));
    }
    finite(next)
}

/// Stratonovich Heun: Euler predictor, trapezoidal corrector on both the
/// drift and the noise vector fields.
pub fn step_heun_stratonovich(
    u: &FieldCoeffs,
    increments: &[f64],
    m: &ModelParams,
    cfg: &StepperConfig,
) -> Result<FieldCoeffs> {
    let h = m.noise_combination(increments);
    let first = m.stratonovich_increment(u, cfg.dt, h.as_deref());
    let predictor = finite(u.add_scaled(1.0, &first)?)?;
    let second = m.stratonovich_increment(&predictor, cfg.dt, h.as_deref());
    let mut next = u.clone();
    next.axpy(0.5, &first);
    next.axpy(0.5, &second);
    finite(next)
}

/// Solves `v = u + dt·S((u+v)/2) + Σ_j G_j((u+v)/2)ΔW_j` for `v`.
pub fn step_implicit_midpoint(
    u: &FieldCoeffs,
    increments: &[f64],
    m: &ModelParams,
    cfg: &StepperConfig,
) -> Result<FieldCoeffs> {
    let h = m.noise_combination(increments);
    let mut iterate = u.add_scaled(1.0, &m.stratonovich_increment(u, cfg.dt, h.as_deref()))?;
    let mut last_update = f64::INFINITY;
    for _ in 0..cfg.max_iterations {
        let mut mid = u.add_scaled_unchecked(1.0, &iterate);
        mid = mid.scaled(0.5);
        let candidate =
            u.add_scaled_unchecked(1.0, &m.stratonovich_increment(&mid, cfg.dt, h.as_deref()));
        let next = if cfg.damping == 1.0 {
            candidate
        } else {
            iterate
                .scaled(1.0 - cfg.damping)
                .add_scaled_unchecked(cfg.damping, &candidate)
        };
        if !next.is_finite() {
            return Err(SllgError::NonFinite);
        }
        last_update = next.add_scaled_unchecked(-1.0, &iterate).norm_l2();
        iterate = next;
        if last_update <= cfg.tolerance {
            return Ok(iterate);
        }
    }
    Err(SllgError::NoConvergence {
        iterations: cfg.max_iterations,
        last_update,
    })
}

pub fn step(
    u: &FieldCoeffs,
    increments: &[f64],
    m: &ModelParams,
    cfg: &StepperConfig,
) -> Result<FieldCoeffs> {
    match cfg.scheme {
        Scheme::EulerMaruyamaIto => step_euler_ito(u, increments, m, cfg),
        Scheme::HeunStratonovich => step_heun_stratonovich(u, increments, m, cfg),
        Scheme::ImplicitMidpoint => step_implicit_midpoint(u, increments, m, cfg),
    }
}

/// Runs one trajectory from `u0` over `T / dt` steps driven by `path`.
///
/// With an observer, diagnostics rows are appended every `stride` steps
/// (and at the final step) and snapshots are kept on the configured grid.
/// Without one, the record holds only the initial and final states.
pub fn integrate(
    u0: &FieldCoeffs,
    m: &ModelParams,
    cfg: &StepperConfig,
    path: &WienerPath,
    observer: Option<&ObserverConfig>,
) -> Result<TrajectoryRecord> {
    cfg.validate()?;
    let steps = cfg.steps()?;
    if !u0.basis().same_as(m.basis()) {
        return Err(SllgError::BasisMismatch);
    }
    if path.channels() != m.n_channels() {
        return Err(SllgError::PathMismatch(format!(
            "path has {} channels, model has {}",
            path.channels(),
            m.n_channels()
        )));
    }
    if path.steps() != steps || (path.dt() - cfg.dt).abs() > 1e-15 * cfg.dt {
        return Err(SllgError::PathMismatch(format!(
            "path has {} steps of {}, stepper needs {} steps of {}",
            path.steps(),
            path.dt(),
            steps,
            cfg.dt
        )));
    }

    let mut record = TrajectoryRecord::new(u0.clone(), cfg.dt, steps, observer.cloned());
    if observer.is_some() {
        record.observe(u0, 0.0, m);
        record.keep_snapshot(0, u0);
    }
    let mut u = u0.clone();
    for k in 0..steps {
        u = step(&u, path.increment(k), m, cfg).map_err(|e| SllgError::Step {
            step: k,
            source: Box::new(e),
        })?;
        let n = k + 1;
        if let Some(obs) = observer {
            let t = n as f64 * cfg.dt;
            if n % obs.stride == 0 || n == steps {
                record.observe(&u, t, m);
            }
            record.keep_snapshot(n, &u);
        }
    }
    record.finish(u);
    Ok(record)
}

/// Closed-form solution when every channel is a constant field along one
/// axis, `φ = 0` and `u₀` is spatially constant: the drift vanishes and
/// `u(T) = R_axis(−Σ_j a_j W_j(T)) u₀`. `None` outside that setting.
pub fn rotation_solution(
    u0: &FieldCoeffs,
    m: &ModelParams,
    path: &WienerPath,
) -> Option<FieldCoeffs> {
    if m.anisotropy != crate::model::Anisotropy::Zero || path.channels() != m.n_channels() {
        return None;
    }
    if u0.coeffs()[1..]
        .iter()
        .any(|c| *c != crate::field::Vec3::ZERO)
    {
        return None;
    }
    let (axis, mags) = m.constant_parallel_channels()?;
    let angle = -path
        .totals()
        .iter()
        .zip(&mags)
        .map(|(w, a)| w * a)
        .sum::<f64>();
    let v = u0.coeffs()[0];
    let (s, c) = angle.sin_cos();
    let mut out = u0.clone();
    out.coeffs_mut()[0] = v * c + axis.cross(v) * s + axis * (axis.dot(v) * (1.0 - c));
    Some(out)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::field::Vec3;
    use crate::model::{Anisotropy, InitialDatum, ModelSpec, NoiseChannel};
    use crate::spectral::SpectralBasis;

    fn basis(n: usize) -> Arc<SpectralBasis> {
        SpectralBasis::shared(2.0 * std::f64::consts::PI, n, 4).unwrap()
    }

    fn rotation_model(b: &Arc<SpectralBasis>, h: Vec3) -> ModelParams {
        ModelSpec {
            lambda1: 1.0,
            lambda2: 1.0,
            anisotropy: Anisotropy::Zero,
            noise: vec![NoiseChannel::Constant { vector: h }],
            initial: InitialDatum::Constant {
                vector: Vec3::new(0.6, 0.0, 0.8),
            },
        }
        .bind(b)
        .unwrap()
    }

    fn full_model(b: &Arc<SpectralBasis>) -> ModelParams {
        ModelSpec {
            lambda1: 1.0,
            lambda2: 0.5,
            anisotropy: Anisotropy::uniaxial(Vec3::Z, 0.5),
            noise: vec![
                NoiseChannel::Cosine {
                    vector: Vec3::new(0.3, 0.0, 0.4),
                    mode: 1,
                },
                NoiseChannel::Cosine {
                    vector: Vec3::new(0.0, 0.5, 0.1),
                    mode: 2,
                },
            ],
            initial: InitialDatum::Twist {
                amplitude: 1.2,
                mode: 1,
                polar_angle: 1.2,
            },
        }
        .bind(b)
        .unwrap()
    }

    #[test]
    fn steps_requires_divisibility() {
        assert_eq!(
            StepperConfig::new(Scheme::ImplicitMidpoint, 0.1, 1.0)
                .steps()
                .unwrap(),
            10
        );
        assert_eq!(
            StepperConfig::new(Scheme::ImplicitMidpoint, 1e-3, 1.0)
                .steps()
                .unwrap(),
            1000
        );
        assert!(StepperConfig::new(Scheme::ImplicitMidpoint, 0.3, 1.0)
            .steps()
            .is_err());
        assert_eq!(
            StepperConfig::new(Scheme::ImplicitMidpoint, 0.3, 0.0)
                .steps()
                .unwrap(),
            0
        );
    }

    #[test]
    fn zero_fields_give_identity() {
        let b = basis(6);
        let m = ModelSpec {
            lambda1: 1.0,
            lambda2: 1.0,
            anisotropy: Anisotropy::Zero,
            noise: vec![],
            initial: InitialDatum::Constant { vector: Vec3::X },
        }
        .bind(&b)
        .unwrap();
        let u = m.initial().clone();
        for scheme in Scheme::ALL {
            let cfg = StepperConfig::new(scheme, 0.01, 1.0);
            assert_eq!(step(&u, &[], &m, &cfg).unwrap(), u);
        }
    }

    #[test]
    fn euler_does_not_conserve_norm() {
        // Constant unit state perpendicular to a constant channel: one step
        // gives ‖u₁‖² = ‖u₀‖²((1 − ½|h|²dt)² + |h|²ΔW²).
        let b = basis(4);
        let h = 0.7;
        let m = rotation_model(&b, Vec3::Z * h);
        let u0 = FieldCoeffs::constant(b.clone(), Vec3::X);
        let dt = 0.01;
        let dw = 0.13;
        let cfg = StepperConfig::new(Scheme::EulerMaruyamaIto, dt, dt);
        let u1 = step_euler_ito(&u0, &[dw], &m, &cfg).unwrap();
        let want = u0.norm_l2_sq() * ((1.0 - 0.5 * h * h * dt).powi(2) + h * h * dw * dw);
        assert!((u1.norm_l2_sq() - want).abs() < 1e-13);
        assert!((u1.norm_l2_sq() - u0.norm_l2_sq()).abs() > 1e-4);
    }

    #[test]
    fn deterministic_damping_decreases_energy() {
        let b = basis(8);
        let mut m = full_model(&b);
        m.lambda1 = 0.0;
        m.lambda2 = 1.0;
        m.anisotropy = Anisotropy::Zero;
        let u0 = m.initial().clone();
        let cfg = StepperConfig::new(Scheme::EulerMaruyamaIto, 1e-3, 1e-3);
        let quiet =
            ModelParams::new(b.clone(), 0.0, 1.0, Anisotropy::Zero, vec![], u0.clone()).unwrap();
        let u1 = step_euler_ito(&u0, &[], &quiet, &cfg).unwrap();
        assert!(quiet.energy(&u1) < quiet.energy(&u0));
    }

    fn rotate(v: Vec3, axis: Vec3, angle: f64) -> Vec3 {
        v * angle.cos() + axis.cross(v) * angle.sin() + axis * (axis.dot(v) * (1.0 - angle.cos()))
    }

    #[test]
    fn rotation_oracle_all_schemes() {
        let b = basis(4);
        let m = rotation_model(&b, Vec3::Z);
        let u0 = m.initial().clone();
        let path = WienerPath::generate(17, 0, 1, 1.0 / 256.0, 256);
        let exact = rotate(Vec3::new(0.6, 0.0, 0.8), Vec3::Z, -path.totals()[0]);
        let exact = FieldCoeffs::constant(b.clone(), exact);
        for (scheme, tol) in [
            (Scheme::EulerMaruyamaIto, 0.2),
            (Scheme::HeunStratonovich, 0.02),
            (Scheme::ImplicitMidpoint, 0.02),
        ] {
            let cfg = StepperConfig::new(scheme, 1.0 / 256.0, 1.0);
            let rec = integrate(&u0, &m, &cfg, &path, None).unwrap();
            let err = rec
                .final_state()
                .add_scaled(-1.0, &exact)
                .unwrap()
                .norm_l2();
            assert!(err < tol, "{scheme:?}: {err}");
        }
        let closed = rotation_solution(&u0, &m, &path).unwrap();
        assert!(closed.add_scaled(-1.0, &exact).unwrap().norm_l2() < 1e-14);
        assert!(rotation_solution(&u0, &full_model(&b), &path).is_none());
    }

    #[test]
    fn parallel_channels_match_combined_channel() {
        let b = basis(4);
        let two = ModelSpec {
            lambda1: 1.0,
            lambda2: 1.0,
            anisotropy: Anisotropy::Zero,
            noise: vec![
                NoiseChannel::Constant {
                    vector: Vec3::Z * 0.6,
                },
                NoiseChannel::Constant {
                    vector: Vec3::Z * 0.8,
                },
            ],
            initial: InitialDatum::Constant { vector: Vec3::X },
        }
        .bind(&b)
        .unwrap();
        let one = rotation_model(&b, Vec3::Z)
            .with_initial(two.initial().clone())
            .unwrap();
        let path2 = WienerPath::generate(3, 0, 2, 1.0 / 128.0, 128);
        let combined: Vec<f64> = (0..128)
            .map(|k| 0.6 * path2.increment(k)[0] + 0.8 * path2.increment(k)[1])
            .collect();
        let path1 = WienerPath::from_increments(1, 1.0 / 128.0, combined).unwrap();
        let cfg = StepperConfig::new(Scheme::HeunStratonovich, 1.0 / 128.0, 1.0);
        let a = integrate(two.initial(), &two, &cfg, &path2, None).unwrap();
        let c = integrate(one.initial(), &one, &cfg, &path1, None).unwrap();
        let diff = a
            .final_state()
            .add_scaled(-1.0, c.final_state())
            .unwrap()
            .norm_l2();
        assert!(diff < 1e-12);
    }

    #[test]
    fn midpoint_conserves_norm_full_model() {
        let b = basis(16);
        let m = full_model(&b);
        let cfg = StepperConfig::new(Scheme::ImplicitMidpoint, 1e-3, 1.0);
        let path = WienerPath::generate(5, 0, 2, 1e-3, 1000);
        let rec = integrate(m.initial(), &m, &cfg, &path, None).unwrap();
        let n0 = m.initial().norm_l2();
        let rel = (rec.final_state().norm_l2() - n0).abs() / n0;
        assert!(rel <= 1e-10, "{rel}");
    }

    #[test]
    fn midpoint_reports_non_convergence() {
        let b = SpectralBasis::shared(1.0, 32, 4).unwrap();
        let m = full_model(&b);
        let cfg = StepperConfig {
            max_iterations: 5,
            ..StepperConfig::new(Scheme::ImplicitMidpoint, 0.1, 0.1)
        };
        let path = WienerPath::zero(2, 0.1, 1);
        let err = integrate(m.initial(), &m, &cfg, &path, None).unwrap_err();
        assert_eq!(err.step_index(), Some(0));
    }

    #[test]
    fn explicit_blow_up_is_reported() {
        let b = SpectralBasis::shared(1.0, 16, 4).unwrap();
        let m = full_model(&b);
        let cfg = StepperConfig::new(Scheme::EulerMaruyamaIto, 0.05, 20.0);
        let path = WienerPath::zero(2, 0.05, 400);
        let err = integrate(m.initial(), &m, &cfg, &path, None).unwrap_err();
        assert!(matches!(
            err,
            SllgError::Step { ref source, .. } if matches!(**source, SllgError::NonFinite)
        ));
    }

    #[test]
    fn path_mismatch_rejected() {
        let b = basis(4);
        let m = rotation_model(&b, Vec3::Z);
        let cfg = StepperConfig::new(Scheme::HeunStratonovich, 0.1, 1.0);
        let path = WienerPath::generate(0, 0, 1, 0.1, 5);
        assert!(matches!(
            integrate(m.initial(), &m, &cfg, &path, None),
            Err(SllgError::PathMismatch(_))
        ));
    }

    #[test]
    fn zero_steps_and_unobserved_records() {
        let b = basis(4);
        let m = full_model(&b);
        let cfg = StepperConfig::new(Scheme::ImplicitMidpoint, 0.01, 0.0);
        let path = WienerPath::generate(0, 0, 2, 0.01, 0);
        let obs = ObserverConfig::default();
        let rec = integrate(m.initial(), &m, &cfg, &path, Some(&obs)).unwrap();
        assert_eq!(rec.rows().len(), 1);
        assert_eq!(rec.rows()[0].time, 0.0);

        let cfg = StepperConfig::new(Scheme::ImplicitMidpoint, 0.01, 0.1);
        let path = WienerPath::generate(0, 0, 2, 0.01, 10);
        let rec = integrate(m.initial(), &m, &cfg, &path, None).unwrap();
        assert!(rec.rows().is_empty());
        assert!(rec.snapshots().is_empty());
        assert_eq!(rec.initial_state(), m.initial());
        assert_ne!(rec.final_state(), m.initial());
    }

    #[test]
    fn replay_is_bitwise_identical() {
        let b = basis(8);
        let m = full_model(&b);
        let cfg = StepperConfig::new(Scheme::HeunStratonovich, 1e-3, 0.05);
        let obs = ObserverConfig::default();
        let run = || {
            let path = WienerPath::generate(42, 7, 2, 1e-3, 50);
            integrate(m.initial(), &m, &cfg, &path, Some(&obs)).unwrap()
        };
        let (a, c) = (run(), run());
        assert_eq!(a.final_state(), c.final_state());
        for (ra, rc) in a.rows().iter().zip(c.rows()) {
            assert_eq!(ra.energy.to_bits(), rc.energy.to_bits());
        }
    }
}
