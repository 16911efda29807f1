//! Monte Carlo driver and the convergence studies built on it.
//!
//! Replica `r` is always driven by the Wiener path of stream `(base_seed, r)`,
//! so results do not depend on the number of worker threads or on the order
//! in which replicas finish.

use rayon::prelude::*;

use crate::diagnostics::{holder_quotient, ObserverConfig, TrajectoryRecord, DEFAULT_ALPHA};
use crate::error::{Result, SllgError};
use crate::integrators::{integrate, rotation_solution, Scheme, StepperConfig};
use crate::model::{ModelParams, ModelSpec};
use crate::spectral::SpectralBasis;
use crate::wiener::{SeedDescriptor, WienerPath};

pub const MAX_REFINEMENTS: usize = 2;

#[derive(Debug, Clone)]
pub struct EnsembleSpec {
    pub replicas: usize,
    pub base_seed: u64,
    pub length: f64,
    pub n_modes: usize,
    pub oversample: usize,
    pub model: ModelSpec,
    pub stepper: StepperConfig,
    pub observer: ObserverConfig,
    pub alpha: f64,
    /// Worker threads; `None` uses the rayon default.
    pub threads: Option<usize>,
    /// Rerun failed replicas at `dt/2` (at most [`MAX_REFINEMENTS`] times).
    pub require_complete: bool,
}

impl EnsembleSpec {
    pub fn new(model: ModelSpec, length: f64, n_modes: usize, stepper: StepperConfig) -> Self {
        Self {
            replicas: 1,
            base_seed: 0,
            length,
            n_modes,
            oversample: 4,
            model,
            stepper,
            observer: ObserverConfig::default(),
            alpha: DEFAULT_ALPHA,
            threads: None,
            require_complete: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicas == 0 {
            return Err(SllgError::Study("replica count must be >= 1".into()));
        }
        if self.observer.stride == 0 {
            return Err(SllgError::Study("diagnostics stride must be >= 1".into()));
        }
        self.stepper.validate()
    }

    pub fn bind(&self) -> Result<ModelParams> {
        let basis = SpectralBasis::shared(self.length, self.n_modes, self.oversample)?;
        self.model.bind(&basis)
    }

    pub fn path(&self, replica: u64) -> Result<WienerPath> {
        Ok(WienerPath::generate(
            self.base_seed,
            replica,
            self.model.noise.len(),
            self.stepper.dt,
            self.stepper.steps()?,
        ))
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(t) = self.threads {
            b = b.num_threads(t);
        }
        b.build()
            .map_err(|e| SllgError::Study(format!("thread pool: {e}")))
    }
}

/// Functionals reported per replica, in this order.
pub const FUNCTIONALS: [&str; 8] = [
    "sup_energy",
    "sup_energy_p2",
    "dissipation",
    "dissipation_p2",
    "damping_l32",
    "damping_xneg",
    "holder",
    "final_energy",
];

#[derive(Debug, Clone)]
pub struct ReplicaRun {
    pub replica: u64,
    pub seed: SeedDescriptor,
    /// Number of automatic `dt/2` reruns it took to finish.
    pub refinements: usize,
    pub dt: f64,
    pub record: TrajectoryRecord,
    /// Values in [`FUNCTIONALS`] order; `holder` is NaN without snapshots.
    pub functionals: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicaFailure {
    pub replica: u64,
    pub seed: SeedDescriptor,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stat {
    pub mean: f64,
    pub std_error: f64,
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Stat {
    /// Order-free: values are sorted before summation.
    pub fn from_values(values: &[f64]) -> Option<Stat> {
        let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let std_error = if v.len() > 1 {
            let mut dev: Vec<f64> = v.iter().map(|x| (x - mean) * (x - mean)).collect();
            dev.sort_by(f64::total_cmp);
            (dev.iter().sum::<f64>() / (n - 1.0) / n).sqrt()
        } else {
            0.0
        };
        Some(Stat {
            mean: mean.clamp(v[0], v[v.len() - 1]),
            std_error,
            min: v[0],
            max: v[v.len() - 1],
            count: v.len(),
        })
    }
}

#[derive(Debug, Clone)]
pub struct EnsembleSummary {
    pub n_modes: usize,
    /// `(name, stat)` in [`FUNCTIONALS`] order; absent functionals are skipped.
    pub stats: Vec<(&'static str, Stat)>,
    pub runs: Vec<ReplicaRun>,
    pub failures: Vec<ReplicaFailure>,
}

impl EnsembleSummary {
    pub fn stat(&self, name: &str) -> Option<Stat> {
        self.stats.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
    }
}

fn replica_functionals(rec: &TrajectoryRecord, alpha: f64) -> Vec<f64> {
    let last = rec.rows().last();
    let sup = rec.sup_energy();
    let diss = last.map_or(0.0, |r| r.cum_dissipation);
    vec![
        sup,
        sup * sup,
        diss,
        diss * diss,
        last.map_or(0.0, |r| r.cum_damping_l32),
        last.map_or(0.0, |r| r.cum_damping_xneg),
        holder_quotient(rec, alpha).unwrap_or(f64::NAN),
        last.map_or(f64::NAN, |r| r.energy),
    ]
}

fn is_recoverable(e: &SllgError) -> bool {
    match e {
        SllgError::NonFinite | SllgError::NoConvergence { .. } => true,
        SllgError::Step { source, .. } => is_recoverable(source),
        _ => false,
    }
}

fn run_replica(
    spec: &EnsembleSpec,
    m: &ModelParams,
    replica: u64,
) -> std::result::Result<ReplicaRun, ReplicaFailure> {
    let fail = |seed, e: SllgError| ReplicaFailure {
        replica,
        seed,
        message: e.to_string(),
    };
    let mut path = spec.path(replica).map_err(|e| {
        fail(
            SeedDescriptor {
                base_seed: spec.base_seed,
                replica,
                level: 0,
            },
            e,
        )
    })?;
    let mut cfg = spec.stepper;
    let mut obs = spec.observer.clone();
    let mut refinements = 0;
    loop {
        match integrate(m.initial(), m, &cfg, &path, Some(&obs)) {
            Ok(record) => {
                let functionals = replica_functionals(&record, spec.alpha);
                return Ok(ReplicaRun {
                    replica,
                    seed: path.seed(),
                    refinements,
                    dt: cfg.dt,
                    record,
                    functionals,
                });
            }
            Err(e)
                if spec.require_complete && refinements < MAX_REFINEMENTS && is_recoverable(&e) =>
            {
                path = path.refine();
                cfg.dt *= 0.5;
                obs.stride *= 2;
                obs.snapshot_stride = obs.snapshot_stride.map(|s| 2 * s);
                refinements += 1;
            }
            Err(e) => return Err(fail(path.seed(), e)),
        }
    }
}

/// Runs all replicas and aggregates over the completed ones.
pub fn run_ensemble(spec: &EnsembleSpec) -> Result<EnsembleSummary> {
    spec.validate()?;
    let m = spec.bind()?;
    let outcomes: Vec<_> = spec.pool()?.install(|| {
        (0..spec.replicas as u64)
            .into_par_iter()
            .map(|r| run_replica(spec, &m, r))
            .collect()
    });
    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for o in outcomes {
        match o {
            Ok(r) => runs.push(r),
            Err(f) => failures.push(f),
        }
    }
    if runs.is_empty() {
        return Err(SllgError::AllReplicasFailed(failures.len()));
    }
    let stats = FUNCTIONALS
        .iter()
        .enumerate()
        .filter_map(|(i, name)| {
            let vals: Vec<f64> = runs.iter().map(|r| r.functionals[i]).collect();
            Stat::from_values(&vals).map(|s| (*name, s))
        })
        .collect();
    Ok(EnsembleSummary {
        n_modes: spec.n_modes,
        stats,
        runs,
        failures,
    })
}

#[derive(Debug, Clone)]
pub struct UniformityTable {
    pub summaries: Vec<EnsembleSummary>,
}

impl UniformityTable {
    /// `|mean(n_b) − mean(n_a)| / SE(n_a)` for functional `name` between
    /// rows `a` and `b`. Infinite when the difference is nonzero and the
    /// reference SE vanishes.
    pub fn shift_in_se(&self, name: &str, a: usize, b: usize) -> Option<f64> {
        let sa = self.summaries.get(a)?.stat(name)?;
        let sb = self.summaries.get(b)?.stat(name)?;
        let d = (sb.mean - sa.mean).abs();
        Some(if d == 0.0 { 0.0 } else { d / sa.std_error })
    }
}

/// The same ensemble at each mode count. Channel increments depend only on
/// `(seed, replica, channel)`, so all mode counts see identical paths.
pub fn n_uniformity_study(spec: &EnsembleSpec, n_list: &[usize]) -> Result<UniformityTable> {
    if n_list.is_empty() {
        return Err(SllgError::Study("mode list is empty".into()));
    }
    if n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(SllgError::Study("mode list must be increasing".into()));
    }
    let summaries = n_list
        .iter()
        .map(|&n| {
            run_ensemble(&EnsembleSpec {
                n_modes: n,
                ..spec.clone()
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(UniformityTable { summaries })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderLevel {
    pub dt: f64,
    pub scheme: Scheme,
    pub error: Stat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderStudy {
    pub levels: Vec<OrderLevel>,
    pub slopes: Vec<(Scheme, f64)>,
    /// True when errors were measured against the closed-form rotation.
    pub exact_reference: bool,
}

impl OrderStudy {
    pub fn slope(&self, scheme: Scheme) -> Option<f64> {
        self.slopes
            .iter()
            .find(|(s, _)| *s == scheme)
            .map(|(_, v)| *v)
    }
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

fn check_dyadic(dts: &[f64]) -> Result<Vec<f64>> {
    if dts.len() < 3 {
        return Err(SllgError::Study(format!(
            "order study needs at least 3 step sizes, got {}",
            dts.len()
        )));
    }
    let mut sorted = dts.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    for w in sorted.windows(2) {
        if ((w[0] / w[1]) - 2.0).abs() > 1e-12 {
            return Err(SllgError::Study(
                "step sizes must be successive halvings".into(),
            ));
        }
    }
    Ok(sorted)
}

/// Mean strong error `E‖u_T − u_ref(T)‖_{L²}` for each scheme and step size
/// on Brownian-bridge-coupled paths. The reference is the rotation solution
/// when it applies, otherwise the midpoint scheme at a quarter of the finest
/// step.
pub fn order_study(spec: &EnsembleSpec, dts: &[f64], schemes: &[Scheme]) -> Result<OrderStudy> {
    spec.validate()?;
    let dts = check_dyadic(dts)?;
    let m = spec.bind()?;
    let t_final = spec.stepper.t_final;
    let coarse_cfg = spec.stepper.with_dt(dts[0]);
    let coarse_steps = coarse_cfg.steps()?;
    let exact_reference =
        rotation_solution(m.initial(), &m, &WienerPath::zero(m.n_channels(), 1.0, 1)).is_some();

    let errors: Vec<Vec<Vec<f64>>> = spec.pool()?.install(|| {
        (0..spec.replicas as u64)
            .into_par_iter()
            .map(|r| -> Result<Vec<Vec<f64>>> {
                let coarse =
                    WienerPath::generate(spec.base_seed, r, m.n_channels(), dts[0], coarse_steps);
                let reference = match rotation_solution(m.initial(), &m, &coarse) {
                    Some(u) => u,
                    None => {
                        let fine = coarse.refined(dts.len() + 1);
                        let cfg = StepperConfig {
                            scheme: Scheme::ImplicitMidpoint,
                            dt: fine.dt(),
                            t_final,
                            ..spec.stepper
                        };
                        integrate(m.initial(), &m, &cfg, &fine, None)?
                            .final_state()
                            .clone()
                    }
                };
                let mut per_scheme = Vec::new();
                for &scheme in schemes {
                    let mut errs = Vec::new();
                    let mut path = coarse.clone();
                    for &dt in &dts {
                        let cfg = StepperConfig {
                            scheme,
                            dt,
                            t_final,
                            ..spec.stepper
                        };
                        let rec = integrate(m.initial(), &m, &cfg, &path, None)?;
                        errs.push(rec.final_state().add_scaled(-1.0, &reference)?.norm_l2());
                        path = path.refine();
                    }
                    per_scheme.push(errs);
                }
                Ok(per_scheme)
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mut levels = Vec::new();
    let mut slopes = Vec::new();
    for (si, &scheme) in schemes.iter().enumerate() {
        let mut means = Vec::new();
        for (li, &dt) in dts.iter().enumerate() {
            let vals: Vec<f64> = errors.iter().map(|r| r[si][li]).collect();
            let error = Stat::from_values(&vals).ok_or_else(|| {
                SllgError::Study(format!("{} produced no finite errors", scheme.name()))
            })?;
            means.push(error.mean);
            levels.push(OrderLevel { dt, scheme, error });
        }
        slopes.push((scheme, loglog_slope(&dts, &means)));
    }
    Ok(OrderStudy {
        levels,
        slopes,
        exact_reference,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ItoStratRow {
    pub dt: f64,
    pub euler_energy: Stat,
    pub heun_energy: Stat,
    /// Paired difference `Φ_Euler(u_T) − Φ_Heun(u_T)`.
    pub gap: Stat,
}

impl ItoStratRow {
    /// `|mean gap| / SE`, zero when the gap vanishes identically.
    pub fn gap_in_se(&self) -> f64 {
        if self.gap.mean == 0.0 {
            0.0
        } else {
            self.gap.mean.abs() / self.gap.std_error
        }
    }
}

/// Compares `E Φ(u_T)` from the Itô-corrected Euler scheme and from the
/// Stratonovich Heun scheme on the same coupled paths.
pub fn ito_strat_agreement(spec: &EnsembleSpec, dts: &[f64]) -> Result<Vec<ItoStratRow>> {
    spec.validate()?;
    let dts = check_dyadic(dts)?;
    let m = spec.bind()?;
    let t_final = spec.stepper.t_final;
    let coarse_steps = spec.stepper.with_dt(dts[0]).steps()?;
    let energies: Vec<Vec<(f64, f64)>> = spec.pool()?.install(|| {
        (0..spec.replicas as u64)
            .into_par_iter()
            .map(|r| -> Result<Vec<(f64, f64)>> {
                let mut path =
                    WienerPath::generate(spec.base_seed, r, m.n_channels(), dts[0], coarse_steps);
                let mut out = Vec::new();
                for &dt in &dts {
                    let run = |scheme| -> Result<f64> {
                        let cfg = StepperConfig {
                            scheme,
                            dt,
                            t_final,
                            ..spec.stepper
                        };
                        Ok(m.energy(integrate(m.initial(), &m, &cfg, &path, None)?.final_state()))
                    };
                    out.push((
                        run(Scheme::EulerMaruyamaIto)?,
                        run(Scheme::HeunStratonovich)?,
                    ));
                    path = path.refine();
                }
                Ok(out)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    dts.iter()
        .enumerate()
        .map(|(li, &dt)| {
            let e: Vec<f64> = energies.iter().map(|r| r[li].0).collect();
            let h: Vec<f64> = energies.iter().map(|r| r[li].1).collect();
            let g: Vec<f64> = energies.iter().map(|r| r[li].0 - r[li].1).collect();
            let stat = |v: &[f64]| {
                Stat::from_values(v)
                    .ok_or_else(|| SllgError::Study(format!("non-finite energies at dt = {dt}")))
            };
            Ok(ItoStratRow {
                dt,
                euler_energy: stat(&e)?,
                heun_energy: stat(&h)?,
                gap: stat(&g)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::field::Vec3;
    use crate::model::{Anisotropy, InitialDatum, NoiseChannel};

    fn rotation() -> ModelSpec {
        ModelSpec {
            lambda1: 1.0,
            lambda2: 1.0,
            anisotropy: Anisotropy::Zero,
            noise: vec![NoiseChannel::Constant { vector: Vec3::Z }],
            initial: InitialDatum::Constant {
                vector: Vec3::new(0.6, 0.0, 0.8),
            },
        }
    }

    fn full() -> ModelSpec {
        ModelSpec {
            lambda1: 1.0,
            lambda2: 0.5,
            anisotropy: Anisotropy::uniaxial(Vec3::Z, 0.5),
            noise: vec![
                NoiseChannel::Cosine {
                    vector: Vec3::new(0.3, 0.0, 0.2),
                    mode: 1,
                },
                NoiseChannel::Constant {
                    vector: Vec3::new(0.0, 0.2, 0.1),
                },
            ],
            initial: InitialDatum::Twist {
                amplitude: 1.0,
                mode: 1,
                polar_angle: 1.2,
            },
        }
    }

    fn spec(model: ModelSpec, n: usize, scheme: Scheme, dt: f64, t: f64) -> EnsembleSpec {
        EnsembleSpec::new(model, 2.0 * PI, n, StepperConfig::new(scheme, dt, t))
    }

    #[test]
    fn stat_examples() {
        let s = Stat::from_values(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(s.mean, 2.0);
        assert!((s.std_error - (1.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!((s.min, s.max, s.count), (1.0, 3.0, 3));
        let one = Stat::from_values(&[4.0]).unwrap();
        assert_eq!(one.std_error, 0.0);
        assert!(Stat::from_values(&[f64::NAN]).is_none());
        let a = Stat::from_values(&[0.1, 0.7, 1e-9, 3.3]).unwrap();
        let b = Stat::from_values(&[3.3, 1e-9, 0.1, 0.7]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_replica_matches_trajectory() {
        let mut s = spec(full(), 8, Scheme::ImplicitMidpoint, 1.0 / 64.0, 0.5);
        s.observer.snapshot_stride = Some(8);
        let sum = run_ensemble(&s).unwrap();
        assert_eq!(sum.runs.len(), 1);
        let m = s.bind().unwrap();
        let rec = integrate(
            m.initial(),
            &m,
            &s.stepper,
            &s.path(0).unwrap(),
            Some(&s.observer),
        )
        .unwrap();
        let st = sum.stat("sup_energy").unwrap();
        assert_eq!(st.mean, rec.sup_energy());
        assert_eq!(st.std_error, 0.0);
        assert_eq!(
            sum.stat("holder").unwrap().mean,
            holder_quotient(&rec, 0.25).unwrap()
        );
    }

    #[test]
    fn frozen_dynamics_have_no_spread() {
        let model = ModelSpec {
            noise: vec![],
            initial: InitialDatum::Constant { vector: Vec3::Z },
            ..full()
        };
        let mut s = spec(model, 6, Scheme::HeunStratonovich, 0.05, 0.5);
        s.replicas = 5;
        let sum = run_ensemble(&s).unwrap();
        let m = s.bind().unwrap();
        let st = sum.stat("sup_energy").unwrap();
        assert!((st.mean - m.energy(m.initial())).abs() < 1e-15);
        for (_, stat) in &sum.stats {
            assert_eq!(stat.min, stat.max);
            assert_eq!(stat.std_error, 0.0);
        }
        assert!(sum.stat("holder").is_none());
    }

    #[test]
    fn replay_and_thread_independence() {
        let mut s = spec(full(), 8, Scheme::HeunStratonovich, 1.0 / 64.0, 0.25);
        s.replicas = 12;
        s.base_seed = 42;
        s.threads = Some(1);
        let a = run_ensemble(&s).unwrap();
        s.threads = Some(3);
        let b = run_ensemble(&s).unwrap();
        assert_eq!(a.stats, b.stats);
        for (x, y) in a.runs.iter().zip(&b.runs) {
            assert_eq!(x.replica, y.replica);
            assert_eq!(x.record.rows(), y.record.rows());
        }
        assert!(a
            .stats
            .iter()
            .all(|(_, st)| st.min <= st.mean && st.mean <= st.max));
    }

    #[test]
    fn blow_up_is_reported_or_refined() {
        // Explicit Euler far beyond its stability limit.
        let model = ModelSpec {
            lambda2: 5.0,
            ..full()
        };
        let mut s = spec(model, 16, Scheme::EulerMaruyamaIto, 0.25, 4.0);
        s.replicas = 3;
        assert!(matches!(
            run_ensemble(&s),
            Err(SllgError::AllReplicasFailed(3))
        ));

        let mut s = spec(full(), 16, Scheme::EulerMaruyamaIto, 1.0 / 16.0, 1.0);
        s.replicas = 2;
        s.require_complete = true;
        let sum = run_ensemble(&s).unwrap();
        assert!(sum.failures.is_empty());
        assert!(sum.runs.iter().all(|r| r.refinements <= MAX_REFINEMENTS));
    }

    #[test]
    fn rotation_uniform_in_n() {
        let mut s = spec(rotation(), 4, Scheme::ImplicitMidpoint, 1.0 / 128.0, 0.5);
        s.replicas = 3;
        let table = n_uniformity_study(&s, &[4, 8, 16]).unwrap();
        let base = table.summaries[0].stat("sup_energy").unwrap();
        for sm in &table.summaries {
            assert!((sm.stat("sup_energy").unwrap().mean - base.mean).abs() < 1e-14);
        }
        assert!(n_uniformity_study(&s, &[8, 4]).is_err());
    }

    #[test]
    fn order_study_rotation_slopes() {
        let mut s = spec(rotation(), 4, Scheme::ImplicitMidpoint, 1.0 / 32.0, 1.0);
        s.replicas = 16;
        let dts: Vec<f64> = (5..9).map(|k| 0.5f64.powi(k)).collect();
        let st = order_study(&s, &dts, &Scheme::ALL).unwrap();
        assert!(st.exact_reference);
        assert!(st.slope(Scheme::EulerMaruyamaIto).unwrap() > 0.35);
        assert!(st.slope(Scheme::HeunStratonovich).unwrap() > 0.8);
        assert!(st.slope(Scheme::ImplicitMidpoint).unwrap() > 0.8);
        assert!(order_study(&s, &dts[..2], &Scheme::ALL).is_err());
        assert!(order_study(&s, &[0.25, 0.1, 0.05], &Scheme::ALL).is_err());
    }

    #[test]
    fn deterministic_midpoint_is_second_order() {
        let model = ModelSpec {
            noise: vec![],
            ..full()
        };
        let s = spec(model, 8, Scheme::ImplicitMidpoint, 1.0 / 16.0, 0.5);
        let dts: Vec<f64> = (4..7).map(|k| 0.5f64.powi(k)).collect();
        let st = order_study(&s, &dts, &[Scheme::ImplicitMidpoint]).unwrap();
        assert!(!st.exact_reference);
        let slope = st.slope(Scheme::ImplicitMidpoint).unwrap();
        assert!((slope - 2.0).abs() < 0.2, "{slope}");
    }

    #[test]
    fn ito_strat_gap_examples() {
        let dts: Vec<f64> = (4..7).map(|k| 0.5f64.powi(k)).collect();
        // No noise and a stationary state: both schemes stay put.
        let quiet = ModelSpec {
            noise: vec![],
            initial: InitialDatum::Constant { vector: Vec3::Z },
            ..full()
        };
        let mut s = spec(quiet, 6, Scheme::HeunStratonovich, 1.0 / 16.0, 0.5);
        s.replicas = 2;
        let rows = ito_strat_agreement(&s, &dts).unwrap();
        assert!(rows
            .iter()
            .all(|r| r.gap.mean == 0.0 && r.gap_in_se() == 0.0));

        let mut s = spec(rotation(), 4, Scheme::HeunStratonovich, 1.0 / 16.0, 0.5);
        s.replicas = 32;
        let rows = ito_strat_agreement(&s, &dts).unwrap();
        for r in &rows {
            assert!(r.euler_energy.mean.abs() < 1e-20 && r.heun_energy.mean.abs() < 1e-20);
        }
    }
}
