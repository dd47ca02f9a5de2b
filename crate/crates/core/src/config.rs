//! Experiment configuration read by the `mforge` runner.

use rand::Rng;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::convex::{function_from_name, ConvexInvariantFunction};
use crate::error::{Error, Result};
use crate::flow::StepControl;
use crate::lie::c;
use crate::phase::{CVector, PhasePoint, PhaseSpace, SpaceSpec};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Flow,
    Decompose,
    Invariant,
    Extremal,
    Legendre,
    VerifyAll,
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::Flow => "flow",
            Task::Decompose => "decompose",
            Task::Invariant => "invariant",
            Task::Extremal => "extremal",
            Task::Legendre => "legendre",
            Task::VerifyAll => "verify-all",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum PointKeyword {
    /// Drawn from the run's seeded generator.
    Random,
    /// Every component at the first basis vector.
    Coincident,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(untagged)]
pub enum InitialPoint {
    Named(PointKeyword),
    /// One list of `[re, im]` pairs per component.
    Explicit(Vec<Vec<[f64; 2]>>),
}

impl Default for InitialPoint {
    fn default() -> Self {
        InitialPoint::Named(PointKeyword::Random)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Flow convergence threshold on the gradient norm (`--tol` overrides).
    pub grad: f64,
    pub energy_slack: f64,
    pub kn_slack: f64,
    /// Stencil-based check of `d/dt kn = -<mu, df>`.
    pub kn_equality: f64,
    pub moment_equivariance: f64,
    pub moment_fd: f64,
    pub self_adjoint: f64,
    pub eigen: f64,
    pub angle: f64,
    pub constancy: f64,
    /// Lower bound the control deviation must exceed.
    pub control: f64,
    pub extremal: f64,
    pub round_trip: f64,
    pub fenchel_young: f64,
    pub brute: f64,
    pub pair_inverse: f64,
    pub tian_zhu: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            grad: 1e-8,
            energy_slack: 1e-9,
            kn_slack: 1e-6,
            kn_equality: 1e-4,
            moment_equivariance: 1e-10,
            moment_fd: 1e-6,
            self_adjoint: 1e-6,
            eigen: 1e-6,
            angle: 1e-6,
            constancy: 1e-7,
            control: 1e-3,
            extremal: 1e-8,
            round_trip: 1e-10,
            fenchel_young: 1e-9,
            brute: 1e-6,
            pair_inverse: 1e-11,
            tian_zhu: 1e-10,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct Samples {
    pub moment: usize,
    pub identity_trials: usize,
    pub hessian_points: usize,
    pub flow_starts: usize,
    pub constancy: usize,
    pub legendre_trials: usize,
    pub tian_zhu_instances: usize,
}

impl Default for Samples {
    fn default() -> Self {
        Samples {
            moment: 200,
            identity_trials: 50,
            hessian_points: 50,
            flow_starts: 5,
            constancy: 50,
            legendre_trials: 50,
            tian_zhu_instances: 100,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct FlowSettings {
    pub t_max: f64,
    pub step: StepControl,
}

impl Default for FlowSettings {
    fn default() -> Self {
        FlowSettings { t_max: 200.0, step: StepControl::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct MeasureSettings {
    /// Largest point count in random Tian-Zhu instances.
    pub max_points: usize,
    /// Point count of the brute-force Legendre instance.
    pub legendre_points: usize,
    /// Bound on `|zeta|` for sampled group elements `exp(zeta)`.
    pub group_radius: f64,
}

impl Default for MeasureSettings {
    fn default() -> Self {
        MeasureSettings { max_points: 50, legendre_points: 5, group_radius: 2.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    /// Optional; must agree with the task given on the command line.
    #[serde(default)]
    pub task: Option<Task>,
    pub space: SpaceSpec,
    /// `quadratic`, `spectral:power:K`, `spectral:cosh`, `spectral:explin` or `indefinite_split`.
    #[serde(default = "default_function")]
    pub function: String,
    /// Block index where `indefinite_split` changes sign; defaults to the product split.
    #[serde(default)]
    pub split: Option<usize>,
    #[serde(default)]
    pub initial_point: InitialPoint,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub samples: Samples,
    #[serde(default)]
    pub flow: FlowSettings,
    #[serde(default)]
    pub measure: MeasureSettings,
}

fn default_function() -> String {
    "quadratic".into()
}

impl ExperimentConfig {
    pub fn minimal(space: SpaceSpec) -> Self {
        ExperimentConfig {
            version: CONFIG_VERSION,
            task: None,
            space,
            function: default_function(),
            split: None,
            initial_point: InitialPoint::default(),
            seed: 0,
            tolerances: Tolerances::default(),
            samples: Samples::default(),
            flow: FlowSettings::default(),
            measure: MeasureSettings::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        let space = self.build_space()?;
        self.build_function(&space)?;
        if let InitialPoint::Explicit(pairs) = &self.initial_point {
            let z = PhasePoint::from_pairs(pairs).map_err(|e| Error::Config(format!("initial_point: {e}")))?;
            space.check_point(&z).map_err(|e| Error::Config(format!("initial_point: {e}")))?;
        }
        if !(self.flow.t_max.is_finite() && self.flow.t_max > 0.0) {
            return Err(Error::Config("flow.t_max must be positive".into()));
        }
        let s = &self.flow.step;
        if !(s.min_step > 0.0 && s.min_step <= s.initial_step && s.initial_step <= s.max_step && s.local_tol > 0.0) {
            return Err(Error::Config("flow.step needs 0 < min_step <= initial_step <= max_step and local_tol > 0".into()));
        }
        if self.measure.max_points < 3 || self.measure.legendre_points == 0 {
            return Err(Error::Config("measure.max_points must be >= 3 and legendre_points >= 1".into()));
        }
        Ok(())
    }

    pub fn build_space(&self) -> Result<PhaseSpace> {
        PhaseSpace::new(&self.space).map_err(|e| Error::Config(format!("space: {e}")))
    }

    pub fn build_function(&self, space: &PhaseSpace) -> Result<Box<dyn ConvexInvariantFunction>> {
        let split = self.split.unwrap_or_else(|| space.factor_split());
        function_from_name(&self.function, split).map_err(|e| Error::Config(format!("function: {e}")))
    }

    pub fn initial_point<R: Rng + ?Sized>(&self, space: &PhaseSpace, rng: &mut R) -> Result<PhasePoint> {
        match &self.initial_point {
            InitialPoint::Named(PointKeyword::Random) => Ok(space.random_point(rng)),
            InitialPoint::Named(PointKeyword::Coincident) => coincident_point(space),
            InitialPoint::Explicit(pairs) => {
                let z = PhasePoint::from_pairs(pairs)?;
                space.check_point(&z)?;
                Ok(z)
            }
        }
    }
}

/// Every component at the first basis vector.
pub fn coincident_point(space: &PhaseSpace) -> Result<PhasePoint> {
    let comps = space
        .component_dims()
        .into_iter()
        .map(|n| {
            let mut e = CVector::zeros(n);
            e[0] = c(1.0, 0.0);
            e
        })
        .collect();
    space.point(comps)
}
