//! Experiment configuration, read from a TOML document.

use std::path::Path;

use serde::{Deserialize, Serialize};
use shockdefault::construct::{ConstructionMode, ThetaGrid};
use shockdefault::fixtures::{self, RandomOptions};
use shockdefault::pricing::{DiscountMode, SpreadConvention};

use crate::num::Num;
use crate::CliError;

/// Environment variable that may supply the RNG seed; `--seed` wins.
pub const SEED_ENV: &str = "SHOCKDEFAULT_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub model: ModelSpec,
    #[serde(default)]
    pub run: RunSpec,
    /// Checks to run; absent means the default set, empty means none.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checks: Option<Vec<CheckKind>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ladder: Option<LadderSpec>,
    #[serde(default)]
    pub output: OutputSpec,
}

/// Exactly one of `fixture`, `random` and `custom`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixture: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random: Option<RandomSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub custom: Option<CustomSpec>,
    #[serde(default = "default_discount")]
    pub discount: DiscountMode,
}

fn default_discount() -> DiscountMode {
    DiscountMode::DiscreteExact
}

/// Generated model; the seed falls back to the run seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RandomSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_branching: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shock_window: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_shocks: Option<usize>,
    #[serde(default)]
    pub shock_free: bool,
    #[serde(default)]
    pub predictable: bool,
}

impl RandomSpec {
    pub fn options(&self) -> RandomOptions {
        let d = RandomOptions::default();
        RandomOptions {
            horizon: self.horizon.unwrap_or(d.horizon),
            max_branching: self.max_branching.unwrap_or(d.max_branching),
            shock_window: self.shock_window.unwrap_or(d.shock_window),
            max_shocks: self.max_shocks.unwrap_or(d.max_shocks),
            shock_free: self.shock_free,
            predictable: self.predictable,
        }
    }
}

/// A factor tree given path by path, the target `P(τ ≤ n | F_n)` and the
/// shock times, all indexed by path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomSpec {
    pub horizon: usize,
    pub paths: Vec<PathSpec>,
    /// `A_0, ..., A_N` per path.
    pub target: Vec<Vec<Num>>,
    /// Per shock, its time on each path; a negative entry means never.
    #[serde(default)]
    pub shocks: Vec<Vec<i64>>,
    #[serde(default = "default_grid")]
    pub grid: ThetaGrid,
    #[serde(default = "default_construction")]
    pub construction: ConstructionMode,
    pub claim: ClaimSpec,
}

fn default_grid() -> ThetaGrid {
    ThetaGrid::Breakpoints
}

fn default_construction() -> ConstructionMode {
    ConstructionMode::DiscreteExact
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSpec {
    pub moves: Vec<u32>,
    pub prob: Num,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClaimSpec {
    pub maturity: usize,
    /// One promise for every path, or one per path.
    pub promised: OneOrMany,
    /// `C_0, ..., C_N` per path; zero when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recovery: Option<Vec<Vec<Num>>>,
    /// Constant rate per step.
    #[serde(default = "zero")]
    pub rate: Num,
}

fn zero() -> Num {
    Num::Int(0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(Num),
    Many(Vec<Num>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    Exact,
    Mc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Arithmetic {
    Rational,
    Double,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    #[serde(default = "default_backend")]
    pub backend: Backend,
    #[serde(default = "default_arithmetic")]
    pub arithmetic: Arithmetic,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default = "default_paths")]
    pub paths: usize,
    #[serde(default = "one")]
    pub workers: usize,
    #[serde(default = "default_batches")]
    pub batches: usize,
    #[serde(default = "default_spread")]
    pub spread: SpreadConvention,
}

fn default_backend() -> Backend {
    Backend::Exact
}
fn default_arithmetic() -> Arithmetic {
    Arithmetic::Rational
}
fn default_paths() -> usize {
    100_000
}
fn one() -> usize {
    1
}
fn default_batches() -> usize {
    100
}
fn default_spread() -> SpreadConvention {
    SpreadConvention::Exponential
}

impl Default for RunSpec {
    fn default() -> Self {
        RunSpec {
            backend: default_backend(),
            arithmetic: default_arithmetic(),
            seed: None,
            paths: default_paths(),
            workers: 1,
            batches: default_batches(),
            spread: default_spread(),
        }
    }
}

/// Continuous-time refinement ladder on the two-rate exponential target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LadderSpec {
    #[serde(default = "default_steps")]
    pub steps: Vec<usize>,
    /// Constant recovery of the priced claim.
    #[serde(default = "default_ladder_recovery")]
    pub recovery: f64,
    /// Short rate per unit time.
    #[serde(default = "default_ladder_rate")]
    pub rate: f64,
}

fn default_steps() -> Vec<usize> {
    vec![8, 16, 32, 64]
}
fn default_ladder_recovery() -> f64 {
    0.4
}
fn default_ladder_rate() -> f64 {
    0.05
}

impl Default for LadderSpec {
    fn default() -> Self {
        LadderSpec {
            steps: default_steps(),
            recovery: default_ladder_recovery(),
            rate: default_ladder_rate(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    JsonLines,
    Csv,
    Text,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    #[serde(default = "default_format")]
    pub format: Format,
}

fn default_format() -> Format {
    Format::Text
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            dir: None,
            format: default_format(),
        }
    }
}

/// Identity groups a run can report. Each appears once in a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckKind {
    /// Constructed conditional law against the target.
    Law,
    Immersion,
    /// Compensated default indicator is a `G`-martingale.
    GMartingale,
    ShockIdentities,
    /// Pre-default price against the brute-force price before default.
    Masking,
    /// Shock-aware change-of-measure price.
    QtauFormula,
    /// Price with the compensator drift alone; fails when shocks carry
    /// recovery losses.
    NaiveFormula,
    Recovery,
    MeasureChange,
    /// Premium routes, split and residual checks.
    Premium,
    /// Closed form for shock-free models.
    ClosedForm,
    Spread,
    /// Zero-recovery bond has no predictable default part.
    Loss,
    Ladder,
    Mc,
}

impl CheckKind {
    pub fn name(self) -> &'static str {
        match self {
            CheckKind::Law => "law",
            CheckKind::Immersion => "immersion",
            CheckKind::GMartingale => "g-martingale",
            CheckKind::ShockIdentities => "shock-identities",
            CheckKind::Masking => "masking",
            CheckKind::QtauFormula => "qtau-formula",
            CheckKind::NaiveFormula => "naive-formula",
            CheckKind::Recovery => "recovery",
            CheckKind::MeasureChange => "measure-change",
            CheckKind::Premium => "premium",
            CheckKind::ClosedForm => "closed-form",
            CheckKind::Spread => "spread",
            CheckKind::Loss => "loss",
            CheckKind::Ladder => "ladder",
            CheckKind::Mc => "mc",
        }
    }

    /// Default set: everything except the naive formula, with the ladder
    /// and Monte Carlo groups only when configured.
    pub fn defaults(cfg: &Config) -> Vec<CheckKind> {
        use CheckKind::*;
        let mut out = vec![
            Law,
            Immersion,
            GMartingale,
            ShockIdentities,
            Masking,
            QtauFormula,
            Recovery,
            MeasureChange,
            Premium,
            ClosedForm,
            Spread,
            Loss,
        ];
        if cfg.ladder.is_some() {
            out.push(Ladder);
        }
        if cfg.run.backend == Backend::Mc {
            out.push(Mc);
        }
        out
    }
}

/// Command-line overrides.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub backend: Option<Backend>,
    pub paths: Option<usize>,
    pub out: Option<String>,
    pub format: Option<Format>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Config, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Config, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {}", path.display(), e)))?;
        Config::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {}", path.display(), m)),
            other => other,
        })
    }

    /// Applies the environment seed and then the flags, and validates.
    pub fn resolve(mut self, ov: &Overrides, env_seed: Option<&str>) -> Result<Config, CliError> {
        if let Some(s) = env_seed {
            let seed = s
                .trim()
                .parse()
                .map_err(|_| CliError::Config(format!("{} = '{}' is not a u64", SEED_ENV, s)))?;
            self.run.seed = Some(seed);
        }
        if let Some(seed) = ov.seed {
            self.run.seed = Some(seed);
        }
        if let Some(b) = ov.backend {
            self.run.backend = b;
        }
        if let Some(p) = ov.paths {
            self.run.paths = p;
        }
        if let Some(o) = &ov.out {
            self.output.dir = Some(o.clone());
        }
        if let Some(f) = ov.format {
            self.output.format = f;
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        let m = &self.model;
        let given = [m.fixture.is_some(), m.random.is_some(), m.custom.is_some()];
        if given.iter().filter(|g| **g).count() != 1 {
            return bad("model needs exactly one of 'fixture', 'random' and 'custom'".into());
        }
        if let Some(name) = &m.fixture {
            if fixtures::describe(name).is_none() {
                return bad(format!(
                    "unknown fixture '{}' (known: {})",
                    name,
                    fixtures::NAMES.join(", ")
                ));
            }
        }
        if let Some(r) = &m.random {
            if r.seed.is_none() && self.run.seed.is_none() {
                return bad("random model needs model.random.seed or a run seed".into());
            }
            let o = r.options();
            if o.horizon == 0 || o.max_branching == 0 || o.shock_window > o.horizon {
                return bad("random model needs horizon > 0, max_branching > 0, shock_window <= horizon".into());
            }
        }
        if let Some(c) = &m.custom {
            c.validate().map_err(CliError::Config)?;
        }
        let r = &self.run;
        if r.backend == Backend::Mc {
            if r.seed.is_none() {
                return bad(format!("backend 'mc' needs a seed (run.seed, {} or --seed)", SEED_ENV));
            }
            if r.workers == 0 || r.batches < 2 || r.paths < r.batches || !r.paths.is_multiple_of(r.batches) {
                return bad(format!(
                    "mc needs workers > 0 and paths ({}) split into equal batches ({})",
                    r.paths, r.batches
                ));
            }
        }
        if let Some(list) = &self.checks {
            for (i, k) in list.iter().enumerate() {
                if list[..i].contains(k) {
                    return bad(format!("check '{}' listed twice", k.name()));
                }
            }
            if list.contains(&CheckKind::Mc) && r.backend != Backend::Mc {
                return bad("check 'mc' needs backend 'mc'".into());
            }
        }
        if let Some(l) = &self.ladder {
            if l.steps.len() < 2 || l.steps.contains(&0) || l.steps.windows(2).any(|w| w[1] != 2 * w[0]) {
                return bad("ladder.steps needs at least two positive step counts, each double the last".into());
            }
        }
        Ok(())
    }

    pub fn check_list(&self) -> Vec<CheckKind> {
        self.checks.clone().unwrap_or_else(|| CheckKind::defaults(self))
    }
}

impl CustomSpec {
    fn validate(&self) -> Result<(), String> {
        let n = self.paths.len();
        if n == 0 {
            return Err("custom model has no paths".into());
        }
        for (i, p) in self.paths.iter().enumerate() {
            if p.moves.len() != self.horizon {
                return Err(format!("path {} has {} moves, horizon is {}", i, p.moves.len(), self.horizon));
            }
            let prob: f64 = p.prob.to_scalar::<f64>()?;
            if prob <= 0.0 {
                return Err(format!("path {} needs a positive probability", i));
            }
        }
        let rows = |what: &str, v: &Vec<Vec<Num>>| -> Result<(), String> {
            if v.len() != n || v.iter().any(|r| r.len() != self.horizon + 1) {
                return Err(format!("{} needs {} rows of {} values", what, n, self.horizon + 1));
            }
            Ok(())
        };
        rows("target", &self.target)?;
        if let Some(r) = &self.claim.recovery {
            rows("claim.recovery", r)?;
        }
        if let OneOrMany::Many(v) = &self.claim.promised {
            if v.len() != n {
                return Err(format!("claim.promised needs one value or {} values", n));
            }
        }
        if self.claim.maturity > self.horizon {
            return Err("claim.maturity exceeds the horizon".into());
        }
        for (i, s) in self.shocks.iter().enumerate() {
            if s.len() != n || s.iter().any(|t| *t > self.horizon as i64) {
                return Err(format!("shock {} needs {} times, each at most {}", i + 1, n, self.horizon));
            }
        }
        Ok(())
    }
}
