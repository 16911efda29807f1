//! JSON run configuration. Unknown keys are rejected at every level.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diagnostics::{ObserverConfig, TestFunction, DEFAULT_ALPHA, DEFAULT_BETA};
use crate::ensemble::EnsembleSpec;
use crate::error::{Result, SllgError};
use crate::integrators::{Scheme, StepperConfig, DEFAULT_MAX_ITERATIONS, DEFAULT_TOLERANCE};
use crate::model::ModelSpec;
use crate::spectral::SpectralBasis;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    #[serde(default = "default_length")]
    pub length: f64,
    #[serde(default = "default_n_modes")]
    pub n_modes: usize,
    #[serde(default = "default_oversample")]
    pub oversample: usize,
}

fn default_length() -> f64 {
    PI
}

fn default_n_modes() -> usize {
    16
}

fn default_oversample() -> usize {
    4
}

impl Default for DomainConfig {
    fn default() -> Self {
        Self {
            length: default_length(),
            n_modes: default_n_modes(),
            oversample: default_oversample(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepperSection {
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    pub dt: f64,
    pub t_final: f64,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_damping")]
    pub damping: f64,
}

fn default_scheme() -> Scheme {
    Scheme::ImplicitMidpoint
}

fn default_tolerance() -> f64 {
    DEFAULT_TOLERANCE
}

fn default_max_iterations() -> usize {
    DEFAULT_MAX_ITERATIONS
}

fn default_damping() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSection {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub replicas: usize,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub require_complete: bool,
}

fn one() -> usize {
    1
}

impl Default for EnsembleSection {
    fn default() -> Self {
        Self {
            seed: 0,
            replicas: 1,
            threads: None,
            require_complete: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default = "one")]
    pub diagnostics_stride: usize,
    #[serde(default)]
    pub snapshot_stride: Option<usize>,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            diagnostics_stride: 1,
            snapshot_stride: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StudyConfig {
    #[default]
    Plain,
    NUniformity {
        n_list: Vec<usize>,
    },
    OrderStudy {
        dt_list: Vec<f64>,
        #[serde(default = "all_schemes")]
        schemes: Vec<Scheme>,
    },
    ItoStrat {
        dt_list: Vec<f64>,
    },
    SphereDeviation {
        n_list: Vec<usize>,
    },
}

fn all_schemes() -> Vec<Scheme> {
    Scheme::ALL.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSpec,
    #[serde(default)]
    pub domain: DomainConfig,
    pub stepper: StepperSection,
    #[serde(default)]
    pub ensemble: EnsembleSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub test_functions: Vec<TestFunction>,
    #[serde(default)]
    pub study: StudyConfig,
}

fn default_beta() -> f64 {
    DEFAULT_BETA
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}

/// Command-line values that replace their config counterparts.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub scheme: Option<Scheme>,
    pub dt: Option<f64>,
    pub n_modes: Option<usize>,
}

fn check(ok: bool, path: &str, message: impl Into<String>) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(SllgError::config(path, message))
    }
}

fn check_dyadic(path: &str, dts: &[f64]) -> Result<()> {
    check(dts.len() >= 3, path, "needs at least 3 step sizes")?;
    check(
        dts.iter().all(|d| d.is_finite() && *d > 0.0),
        path,
        "step sizes must be > 0",
    )?;
    let mut sorted = dts.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    check(
        sorted
            .windows(2)
            .all(|w| (w[0] / w[1] - 2.0).abs() <= 1e-12),
        path,
        "step sizes must be successive halvings",
    )
}

fn check_n_list(path: &str, n_list: &[usize]) -> Result<()> {
    check(!n_list.is_empty(), path, "must not be empty")?;
    check(n_list[0] >= 1, path, "mode counts must be >= 1")?;
    check(
        n_list.windows(2).all(|w| w[1] > w[0]),
        path,
        "must be increasing",
    )
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            SllgError::config(path, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(s) = o.seed {
            self.ensemble.seed = s;
        }
        if let Some(d) = &o.out {
            self.output.dir = d.clone();
        }
        if let Some(s) = o.scheme {
            self.stepper.scheme = s;
        }
        if let Some(dt) = o.dt {
            self.stepper.dt = dt;
        }
        if let Some(n) = o.n_modes {
            self.domain.n_modes = n;
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        let m = &self.model;
        check(
            m.lambda1.is_finite(),
            "model.lambda1",
            "must be a finite real number",
        )?;
        check(
            m.lambda2.is_finite() && m.lambda2 > 0.0,
            "model.lambda2",
            format!("λ₂ must be > 0 (damping parameter), got {}", m.lambda2),
        )?;
        m.anisotropy
            .validate()
            .map_err(|e| SllgError::config("model.anisotropy", e.to_string()))?;
        for (i, ch) in m.noise.iter().enumerate() {
            ch.validate()
                .map_err(|e| SllgError::config(format!("model.noise[{i}]"), e.to_string()))?;
        }

        let d = &self.domain;
        SpectralBasis::new(d.length, d.n_modes.max(1), d.oversample)
            .map_err(|e| SllgError::config("domain", e.to_string()))?;
        check(d.n_modes >= 1, "domain.n_modes", "must be >= 1")?;

        self.stepper_config()
            .validate()
            .map_err(|e| SllgError::config("stepper", e.to_string()))?;

        check(
            self.ensemble.replicas >= 1,
            "ensemble.replicas",
            "must be >= 1",
        )?;
        check(
            self.ensemble.threads.is_none_or(|t| t >= 1),
            "ensemble.threads",
            "must be >= 1",
        )?;
        check(
            self.output.diagnostics_stride >= 1,
            "output.diagnostics_stride",
            "must be >= 1",
        )?;
        check(
            self.output.snapshot_stride.is_none_or(|s| s >= 1),
            "output.snapshot_stride",
            "must be >= 1",
        )?;
        check(
            self.beta.is_finite() && self.beta > 0.25,
            "beta",
            format!("β must be > 1/4, got {}", self.beta),
        )?;
        check(
            self.alpha > 0.0 && self.alpha < 0.5,
            "alpha",
            format!("α must lie in (0, 1/2), got {}", self.alpha),
        )?;
        for (i, tf) in self.test_functions.iter().enumerate() {
            tf.validate()
                .map_err(|e| SllgError::config(format!("test_functions[{i}]"), e.to_string()))?;
        }
        match &self.study {
            StudyConfig::Plain => Ok(()),
            StudyConfig::NUniformity { n_list } | StudyConfig::SphereDeviation { n_list } => {
                check_n_list("study.n_list", n_list)
            }
            StudyConfig::OrderStudy { dt_list, schemes } => {
                check(!schemes.is_empty(), "study.schemes", "must not be empty")?;
                check_dyadic("study.dt_list", dt_list)
            }
            StudyConfig::ItoStrat { dt_list } => check_dyadic("study.dt_list", dt_list),
        }
    }

    pub fn stepper_config(&self) -> StepperConfig {
        let s = &self.stepper;
        StepperConfig {
            scheme: s.scheme,
            dt: s.dt,
            t_final: s.t_final,
            tolerance: s.tolerance,
            max_iterations: s.max_iterations,
            damping: s.damping,
        }
    }

    pub fn observer_config(&self) -> ObserverConfig {
        ObserverConfig {
            stride: self.output.diagnostics_stride,
            beta: self.beta,
            snapshot_stride: self.output.snapshot_stride,
        }
    }

    pub fn ensemble_spec(&self) -> EnsembleSpec {
        EnsembleSpec {
            replicas: self.ensemble.replicas,
            base_seed: self.ensemble.seed,
            length: self.domain.length,
            n_modes: self.domain.n_modes,
            oversample: self.domain.oversample,
            model: self.model.clone(),
            stepper: self.stepper_config(),
            observer: self.observer_config(),
            alpha: self.alpha,
            threads: self.ensemble.threads,
            require_complete: self.ensemble.require_complete,
        }
    }
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| SllgError::io(path, e))?;
    RunConfig::from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Anisotropy, InitialDatum};

    const MINIMAL: &str = r#"{
        "model": {"lambda1": 1.0, "lambda2": 0.5, "initial": {"kind": "constant", "vector": [0, 0, 1]}},
        "stepper": {"dt": 0.01, "t_final": 1.0}
    }"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = RunConfig::from_json(MINIMAL).unwrap();
        assert_eq!(c.beta, 0.3);
        assert_eq!(c.alpha, 0.25);
        assert_eq!(c.domain.oversample, 4);
        assert_eq!(c.domain.length, PI);
        assert_eq!(c.stepper.scheme, Scheme::ImplicitMidpoint);
        assert_eq!(c.stepper.tolerance, 1e-13);
        assert_eq!(c.model.anisotropy, Anisotropy::Zero);
        assert_eq!(c.study, StudyConfig::Plain);
        assert_eq!(c.ensemble.replicas, 1);
    }

    #[test]
    fn zero_damping_is_a_range_error() {
        let text = MINIMAL.replace("\"lambda2\": 0.5", "\"lambda2\": 0.0");
        match RunConfig::from_json(&text) {
            Err(SllgError::Config { path, message }) => {
                assert_eq!(path, "model.lambda2");
                assert!(message.contains("λ₂ must be > 0"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected_with_path() {
        let text = MINIMAL.replace("\"lambda1\": 1.0", "\"lambda1\": 1.0, \"lambda3\": 2.0");
        let err = RunConfig::from_json(&text).unwrap_err();
        assert!(err.to_string().contains("lambda3"), "{err}");
        let text = MINIMAL.replace("\"t_final\": 1.0", "\"t_final\": 1.0, \"sheme\": \"x\"");
        match RunConfig::from_json(&text).unwrap_err() {
            SllgError::Config { path, .. } => assert!(path.starts_with("stepper"), "{path}"),
            e => panic!("{e:?}"),
        }
        let text = MINIMAL.replace(
            "\"kind\": \"constant\", \"vector\": [0, 0, 1]",
            "\"kind\": \"constant\", \"vector\": [0, 0, 1], \"extra\": 1",
        );
        assert!(RunConfig::from_json(&text).is_err());
    }

    #[test]
    fn range_checks() {
        let cases = [
            ("\"dt\": 0.01", "\"dt\": 0.03", "stepper"),
            ("\"dt\": 0.01", "\"dt\": -0.01", "stepper"),
        ];
        for (from, to, path) in cases {
            match RunConfig::from_json(&MINIMAL.replace(from, to)).unwrap_err() {
                SllgError::Config { path: p, .. } => assert_eq!(p, path),
                e => panic!("{e:?}"),
            }
        }
        let mut c = RunConfig::from_json(MINIMAL).unwrap();
        c.beta = 0.25;
        assert!(c.validate().is_err());
        c.beta = 0.3;
        c.alpha = 0.5;
        assert!(c.validate().is_err());
        c.alpha = 0.25;
        c.study = StudyConfig::OrderStudy {
            dt_list: vec![0.1, 0.05],
            schemes: all_schemes(),
        };
        assert!(c.validate().is_err());
        c.study = StudyConfig::NUniformity {
            n_list: vec![16, 8],
        };
        assert!(c.validate().is_err());
        c.study = StudyConfig::Plain;
        c.domain.oversample = 2;
        assert!(c.validate().is_err());
    }

    #[test]
    fn overrides_and_round_trip() {
        let mut c = RunConfig::from_json(MINIMAL).unwrap();
        c.model.initial = InitialDatum::Twist {
            amplitude: 0.1 + 0.2,
            mode: 2,
            polar_angle: 1.0 / 3.0,
        };
        c.apply(&Overrides {
            seed: Some(9),
            dt: Some(0.005),
            scheme: Some(Scheme::HeunStratonovich),
            n_modes: Some(8),
            out: Some("elsewhere".into()),
        })
        .unwrap();
        assert_eq!(c.ensemble.seed, 9);
        assert_eq!(c.stepper_config().steps().unwrap(), 200);
        let back = RunConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(back, c);
        assert!(c
            .apply(&Overrides {
                dt: Some(0.3),
                ..Default::default()
            })
            .is_err());
    }

    #[test]
    fn missing_file_is_an_io_error() {
        assert!(matches!(
            parse_config(Path::new("/nonexistent/cfg.json")),
            Err(SllgError::Io { .. })
        ));
    }
}
