//! Run configuration: one TOML document shared by every subcommand.
//!
//! ```toml
//! seed = 7
//!
//! [operator]
//! domain_length = 100.0
//! modes = 4
//! grid_points = 64
//!
//! [kernel]
//! r = 0.5
//! m = 10
//! M_xi = 8e-4
//! plus_integral = 6e-5
//! minus_integral = 1.8e-4
//!
//! [nonlinearity]
//! kind = "nicholson"
//! p = 1.0
//!
//! [problem]
//! N = 1
//! horizon = 5.0
//! ```
//!
//! Unknown keys are rejected and every error carries the dotted key path.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::experiments::{sample_initial, ExperimentConfig, InitialFamily};
use crate::history::HistorySegment;
use crate::kernel::{KernelSpec, KernelVariant};
use crate::nonlinear::NonlinearitySpec;
use crate::solver::{ProblemSpec, DEFAULT_STRIDE};
use crate::spectral::{EigenvalueMode, OperatorSpec};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A configuration problem located at a dotted key path.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    fn at(path: &str, err: impl fmt::Display) -> Self {
        Self {
            path: path.to_string(),
            message: err.to_string(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub operator: OperatorConfig,
    pub kernel: KernelConfig,
    pub nonlinearity: NonlinearityConfig,
    #[serde(default)]
    pub problem: ProblemConfig,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default)]
    pub experiment: ExperimentSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorConfig {
    pub domain_length: f64,
    pub modes: usize,
    pub grid_points: usize,
    #[serde(default)]
    pub eigenvalue_mode: EigenvalueMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    pub r: f64,
    pub m: usize,
    #[serde(rename = "M_xi")]
    pub m_xi: f64,
    pub plus_integral: Option<f64>,
    pub minus_integral: Option<f64>,
    pub xi_plus: Option<Vec<f64>>,
    pub xi_minus: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NonlinearityConfig {
    Nicholson {
        p: f64,
    },
    BoundedCustom {
        table: Vec<[f64; 2]>,
        #[serde(rename = "M_b")]
        m_b: f64,
        #[serde(rename = "L_b")]
        l_b: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(default)]
    pub variant: KernelVariant,
    #[serde(rename = "N", default = "one")]
    pub n: usize,
    pub mu: Option<f64>,
    pub horizon: Option<f64>,
    pub steps: Option<usize>,
    #[serde(default = "default_stride")]
    pub stride: usize,
}

fn one() -> usize {
    1
}

fn default_stride() -> usize {
    DEFAULT_STRIDE
}

impl Default for ProblemConfig {
    fn default() -> Self {
        Self {
            variant: KernelVariant::Full,
            n: 1,
            mu: None,
            horizon: None,
            steps: None,
            stride: DEFAULT_STRIDE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    #[serde(default)]
    pub family: InitialFamily,
    #[serde(default = "unit")]
    pub amplitude: f64,
    #[serde(default = "six")]
    pub fourier_modes: usize,
}

fn unit() -> f64 {
    1.0
}

fn six() -> usize {
    6
}

impl Default for InitialConfig {
    fn default() -> Self {
        Self {
            family: InitialFamily::default(),
            amplitude: 1.0,
            fourier_modes: 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    #[serde(default = "twenty")]
    pub trials: usize,
    /// Defaults to `50 r`.
    pub horizon: Option<f64>,
    pub alpha_min: Option<f64>,
}

fn twenty() -> usize {
    20
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            trials: 20,
            horizon: None,
            alpha_min: None,
        }
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let de = toml::de::Deserializer::parse(text).map_err(|e| ConfigError::at("<document>", e))?;
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let path = if path == "." {
            "<document>".to_string()
        } else {
            path
        };
        ConfigError {
            path,
            message: e.into_inner().message().trim().to_string(),
        }
    })
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::at(&path.display().to_string(), e))?;
    parse_config(&text)
}

fn param(path: &str) -> impl Fn(Error) -> ConfigError + '_ {
    move |e| ConfigError::at(path, e)
}

impl RunConfig {
    pub fn operator_spec(&self) -> Result<OperatorSpec, ConfigError> {
        let o = &self.operator;
        OperatorSpec::new(o.domain_length, o.modes, o.grid_points, o.eigenvalue_mode)
            .map_err(param("operator"))
    }

    pub fn kernel_spec(&self) -> Result<KernelSpec, ConfigError> {
        let k = &self.kernel;
        match (k.plus_integral, k.minus_integral, &k.xi_plus, &k.xi_minus) {
            (Some(p), Some(n), None, None) => {
                KernelSpec::constant(k.r, k.m, p, n, k.m_xi).map_err(param("kernel"))
            }
            (None, None, Some(p), Some(n)) => {
                KernelSpec::new(k.r, k.m, p.clone(), n.clone(), k.m_xi).map_err(param("kernel"))
            }
            _ => Err(ConfigError::at(
                "kernel",
                "give either plus_integral and minus_integral, or xi_plus and xi_minus",
            )),
        }
    }

    /// The nonlinearity with certified constants.
    pub fn nonlinearity_spec(&self) -> Result<NonlinearitySpec, ConfigError> {
        match &self.nonlinearity {
            NonlinearityConfig::Nicholson { p } => {
                NonlinearitySpec::nicholson_certified(*p).map_err(param("nonlinearity.p"))
            }
            NonlinearityConfig::BoundedCustom { table, m_b, l_b } => {
                NonlinearitySpec::bounded_custom(table.clone(), *m_b, *l_b)
                    .map_err(param("nonlinearity"))
            }
        }
    }

    /// Problem with the step count from `[problem]` (horizon or steps), or
    /// ten delay spans when neither is given.
    pub fn problem_spec(&self) -> Result<ProblemSpec, ConfigError> {
        let pb = ProblemSpec::new(
            self.operator_spec()?,
            self.kernel_spec()?,
            self.nonlinearity_spec()?,
            self.problem.variant,
            0,
        )
        .map_err(param("problem"))?
        .with_stride(self.problem.stride.max(1));
        if self.problem.stride == 0 {
            return Err(ConfigError::at("problem.stride", "must be at least 1"));
        }
        let steps = match (self.problem.horizon, self.problem.steps) {
            (Some(_), Some(_)) => {
                return Err(ConfigError::at(
                    "problem",
                    "give horizon or steps, not both",
                ))
            }
            (Some(t), None) => pb.steps_for_horizon(t).map_err(param("problem.horizon"))?,
            (None, Some(s)) => s,
            (None, None) => 10 * pb.m(),
        };
        Ok(pb.with_steps(steps))
    }

    pub fn experiment_config(&self, problem: &ProblemSpec) -> ExperimentConfig {
        ExperimentConfig {
            family: self.initial.family,
            amplitude: self.initial.amplitude,
            fourier_modes: self.initial.fourier_modes,
            alpha_min: self.experiment.alpha_min,
            ..ExperimentConfig::new(
                self.experiment.trials,
                self.seed,
                self.experiment.horizon.unwrap_or(50.0 * problem.delay()),
            )
        }
    }

    /// Initial history drawn from `[initial]` with the run seed.
    pub fn initial_history(&self, problem: &ProblemSpec) -> Result<HistorySegment, ConfigError> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        sample_initial(
            problem,
            self.initial.family,
            self.initial.amplitude,
            self.initial.fourier_modes,
            &mut rng,
        )
        .map_err(param("initial"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADLINE: &str = r#"
seed = 3

[operator]
domain_length = 100.0
modes = 4
grid_points = 32

[kernel]
r = 0.5
m = 5
M_xi = 8e-4
plus_integral = 6e-5
minus_integral = 1.8e-4

[nonlinearity]
kind = "nicholson"
p = 1.0

[problem]
N = 1
horizon = 1.0
"#;

    #[test]
    fn parses_headline() {
        let cfg = parse_config(HEADLINE).unwrap();
        assert_eq!(cfg.seed, 3);
        let pb = cfg.problem_spec().unwrap();
        assert_eq!(pb.steps, 10);
        assert_eq!(pb.kernel.m(), 5);
        assert_eq!(cfg.experiment_config(&pb).horizon, 25.0);
        assert!(cfg.initial_history(&pb).unwrap().min_value() > 0.0);
    }

    #[test]
    fn unknown_key_reports_path() {
        let err =
            parse_config(&HEADLINE.replace("M_xi = 8e-4", "M_xi = 8e-4\nbogus = 1")).unwrap_err();
        assert_eq!(err.path, "kernel.bogus");
        let err = parse_config(&HEADLINE.replace("p = 1.0", "p = 1.0\nq = 2")).unwrap_err();
        assert!(err.path.starts_with("nonlinearity"), "{err}");
    }

    #[test]
    fn wrong_type_reports_path() {
        let err = parse_config(&HEADLINE.replace("modes = 4", "modes = \"four\"")).unwrap_err();
        assert_eq!(err.path, "operator.modes");
        let err = parse_config("seed = ").unwrap_err();
        assert_eq!(err.path, "<document>");
    }

    #[test]
    fn semantic_errors_report_path() {
        let cfg =
            parse_config(&HEADLINE.replace("minus_integral = 1.8e-4", "minus_integral = 1.0"))
                .unwrap();
        assert_eq!(cfg.kernel_spec().unwrap_err().path, "kernel");
        let cfg = parse_config(&HEADLINE.replace("horizon = 1.0", "horizon = 1.03")).unwrap();
        assert_eq!(cfg.problem_spec().unwrap_err().path, "problem.horizon");
        let cfg = parse_config(&HEADLINE.replace("minus_integral = 1.8e-4", "")).unwrap();
        assert_eq!(cfg.kernel_spec().unwrap_err().path, "kernel");
    }

    #[test]
    fn custom_nonlinearity_and_profiles() {
        let text = HEADLINE
            .replace("kind = \"nicholson\"\np = 1.0", "kind = \"bounded_custom\"\ntable = [[0.0, 0.0], [1.0, 0.5]]\nM_b = 0.5\nL_b = 0.5")
            .replace("plus_integral = 6e-5\nminus_integral = 1.8e-4", "xi_plus = [1e-4, 1e-4, 1e-4, 1e-4, 1e-4, 1e-4]\nxi_minus = [0.0, 0.0, 0.0, 0.0, 0.0, -2e-4]");
        let cfg = parse_config(&text).unwrap();
        let pb = cfg.problem_spec().unwrap();
        assert_eq!(pb.nonlinearity.constants().unwrap(), (0.5, 0.5));
        assert_eq!(pb.kernel.xi_minus()[5], -2e-4);
    }
}
