//! The TOML run configuration and its resolution into core types.

use std::path::{Path, PathBuf};

use qgc_core::rate_regions::{AuxiliaryChoice, DscProblem, MacProblem, Scheme};
use qgc_core::{GroupSpec, Pmf, TypicalityParams};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub group: GroupConfig,
    #[serde(default = "all_schemes")]
    pub schemes: Vec<Scheme>,
    pub problem: Option<ProblemConfig>,
    #[serde(default)]
    pub aux: AuxConfig,
    pub simulation: Option<SimulationConfig>,
    pub verify: Option<VerifyConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

fn all_schemes() -> Vec<Scheme> {
    Scheme::ALL.to_vec()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupConfig {
    pub p: u64,
    pub r: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Dsc,
    Mac,
    Ptp,
}

/// Named pmf families over Z_{p^r}.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum PmfSpec {
    /// (0.1δ, 0.9δ, 0.1(1−δ), 0.9(1−δ)) over Z_4.
    Table1 {
        delta: f64,
    },
    Bern {
        rho: f64,
    },
    Uniform,
    Point {
        a: u64,
    },
    Explicit {
        probs: Vec<f64>,
    },
}

impl PmfSpec {
    pub fn resolve(&self, group: GroupSpec) -> qgc_core::Result<Pmf> {
        match self {
            PmfSpec::Table1 { delta } => Pmf::table1(group, *delta),
            PmfSpec::Bern { rho } => Pmf::bernoulli(group, *rho),
            PmfSpec::Uniform => Ok(Pmf::uniform(group)),
            PmfSpec::Point { a } => Pmf::point(group, *a),
            PmfSpec::Explicit { probs } => Pmf::new(group, probs.clone()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub kind: ProblemKind,
    /// Sum noise: X1 + X2 for source coding, the additive noise otherwise.
    pub noise: Option<PmfSpec>,
    /// Explicit p(x1, x2) as a q×q table (source coding only).
    pub joint: Option<Vec<Vec<f64>>>,
    /// Explicit channel rows: q² rows indexed x1·q + x2 for the MAC, q rows
    /// for the point-to-point channel.
    pub channel: Option<Vec<Vec<f64>>>,
    /// Point-to-point input pmf; uniform by default.
    pub input: Option<PmfSpec>,
    /// δ_N grid for the table1 family.
    pub sweep: Option<SweepConfig>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl SweepConfig {
    #[allow(clippy::neg_cmp_op_on_partial_ord)] // rejects NaN too
    pub fn points(&self) -> CliResult<Vec<f64>> {
        if !(self.step > 0.0) || !(self.stop >= self.start) || !self.start.is_finite() || !self.stop.is_finite() {
            return Err(CliError::Config(format!(
                "sweep needs step > 0 and stop >= start, got {:?}",
                self
            )));
        }
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        Ok((0..count)
            .map(|i| {
                let d = self.start + i as f64 * self.step;
                (d * 1e9).round() / 1e9
            })
            .collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase", deny_unknown_fields)]
pub enum AuxConfig {
    /// Trivial Q with W1 = W2 = Bern(rho).
    Reference {
        #[serde(default = "default_rho")]
        rho: f64,
    },
    Explicit {
        #[serde(default)]
        weights: Option<Vec<f64>>,
        w1: Vec<Vec<f64>>,
        /// Defaults to `w1`.
        #[serde(default)]
        w2: Option<Vec<Vec<f64>>>,
    },
    Optimize {
        #[serde(default = "default_budget")]
        budget: usize,
        #[serde(default)]
        seed: u64,
        #[serde(default = "default_grid_step")]
        grid_step: f64,
    },
}

fn default_rho() -> f64 {
    0.05
}

fn default_budget() -> usize {
    200
}

fn default_grid_step() -> f64 {
    0.05
}

impl Default for AuxConfig {
    fn default() -> Self {
        AuxConfig::Reference { rho: default_rho() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub n: Vec<usize>,
    pub trials: u64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub seed: u64,
    /// Codebook seeds seed, seed+1, ..., seed+seeds-1.
    #[serde(default = "default_seeds")]
    pub seeds: u64,
    /// Relative back-off from the rate bounds when sizing codes.
    #[serde(default = "default_margin")]
    pub margin: f64,
    /// Fixed total inner dimension instead of the bound-derived one.
    #[serde(default)]
    pub k: Option<usize>,
    /// Fixed number of shifts per encoder (source coding).
    #[serde(default)]
    pub shifts: Option<u64>,
    /// Every word is a shift, so the encoders never fail.
    #[serde(default)]
    pub full_rate: bool,
}

fn default_epsilon() -> f64 {
    0.1
}

fn default_seeds() -> u64 {
    1
}

fn default_margin() -> f64 {
    0.1
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    #[serde(default)]
    pub phi: Vec<PhiCase>,
    pub phi_suite: Option<PhiSuite>,
    pub sumset: Option<SumsetSuite>,
    pub coset: Option<CosetSuite>,
    #[serde(default)]
    pub codebook_files: Vec<PathBuf>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhiModeConfig {
    #[default]
    Exhaustive,
    MonteCarlo,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhiCase {
    pub n: usize,
    pub u: Vec<u64>,
    #[serde(default)]
    pub mode: PhiModeConfig,
    #[serde(default)]
    pub trials: Option<u64>,
    #[serde(default)]
    pub seed: u64,
}

/// Every u ∈ Z_q^k for k ≤ k_max and every n ≤ n_max, exhaustively.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhiSuite {
    pub k_max: usize,
    pub n_max: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SumsetSuite {
    pub pairs: u64,
    #[serde(default = "default_sumset_n")]
    pub n_max: usize,
    #[serde(default = "default_sumset_k")]
    pub k_max: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_sumset_epsilon")]
    pub epsilon: f64,
}

fn default_sumset_n() -> usize {
    6
}

fn default_sumset_k() -> usize {
    3
}

fn default_sumset_epsilon() -> f64 {
    3.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CosetSuite {
    pub source: PmfSpec,
    pub ks: Vec<usize>,
    pub s: u32,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub format: OutputFormat,
    #[serde(default)]
    pub path: Option<PathBuf>,
}

/// Command-line overrides applied on top of the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub delta: Option<f64>,
}

impl RunConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn apply(&mut self, o: &Overrides) -> CliResult<()> {
        if let Some(seed) = o.seed {
            if let Some(sim) = self.simulation.as_mut() {
                sim.seed = seed;
            }
            if let AuxConfig::Optimize { seed: s, .. } = &mut self.aux {
                *s = seed;
            }
            if let Some(sumset) = self.verify.as_mut().and_then(|v| v.sumset.as_mut()) {
                sumset.seed = seed;
            }
        }
        if let Some(out) = &o.out {
            self.output.path = Some(out.clone());
        }
        if let Some(delta) = o.delta {
            let problem = self
                .problem
                .as_mut()
                .ok_or_else(|| CliError::Config("--delta needs a [problem] section".into()))?;
            match &mut problem.noise {
                Some(PmfSpec::Table1 { delta: d }) => *d = delta,
                _ => return Err(CliError::Config("--delta needs noise family table1".into())),
            }
            problem.sweep = None;
        }
        Ok(())
    }

    pub fn group_spec(&self) -> CliResult<GroupSpec> {
        GroupSpec::new(self.group.p, self.group.r).map_err(CliError::config)
    }

    /// Checks everything that does not need a command; run after overrides.
    pub fn validate(&self) -> CliResult<()> {
        let g = self.group_spec()?;
        if self.schemes.is_empty() {
            return Err(CliError::Config("schemes must not be empty".into()));
        }
        if let Some(p) = &self.problem {
            p.instances(g)?;
        }
        self.aux_choice(g)?;
        if let Some(sim) = &self.simulation {
            sim.validate()?;
        }
        if let Some(v) = &self.verify {
            v.validate(g)?;
        }
        Ok(())
    }

    pub fn problem(&self) -> CliResult<&ProblemConfig> {
        self.problem
            .as_ref()
            .ok_or_else(|| CliError::Config("missing [problem] section".into()))
    }

    /// Explicit and reference choices; `None` when the choice is optimized
    /// per problem instance.
    pub fn aux_choice(&self, g: GroupSpec) -> CliResult<Option<AuxiliaryChoice>> {
        match &self.aux {
            AuxConfig::Reference { rho } => AuxiliaryChoice::bernoulli(g, *rho).map(Some).map_err(CliError::config),
            AuxConfig::Explicit { weights, w1, w2 } => {
                let to_pmfs = |rows: &Vec<Vec<f64>>| {
                    rows.iter()
                        .map(|p| Pmf::new(g, p.clone()))
                        .collect::<qgc_core::Result<Vec<_>>>()
                };
                let p1 = to_pmfs(w1).map_err(CliError::config)?;
                let p2 = match w2 {
                    Some(rows) => to_pmfs(rows).map_err(CliError::config)?,
                    None => p1.clone(),
                };
                let weights = weights
                    .clone()
                    .unwrap_or_else(|| vec![1.0 / p1.len().max(1) as f64; p1.len()]);
                AuxiliaryChoice::new(weights, p1, p2)
                    .map(Some)
                    .map_err(CliError::config)
            }
            AuxConfig::Optimize { budget, grid_step, .. } => {
                if *budget == 0 || !(*grid_step > 0.0 && *grid_step <= 1.0) {
                    return Err(CliError::Config(
                        "optimize needs budget >= 1 and 0 < grid_step <= 1".into(),
                    ));
                }
                Ok(None)
            }
        }
    }

    /// SHA-256 of the canonical JSON form of the resolved config, output
    /// section excluded.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = OutputConfig::default();
        let json = serde_json::to_string(&c).expect("config serializes");
        sha256_hex(json.as_bytes())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

impl SimulationConfig {
    pub fn validate(&self) -> CliResult<()> {
        if self.trials == 0 {
            return Err(CliError::Config("simulation.trials must be at least 1".into()));
        }
        if self.seeds == 0 {
            return Err(CliError::Config("simulation.seeds must be at least 1".into()));
        }
        if self.n.is_empty() || self.n.contains(&0) {
            return Err(CliError::Config("simulation.n must list positive lengths".into()));
        }
        if !(0.0..1.0).contains(&self.margin) {
            return Err(CliError::Config("simulation.margin must lie in [0, 1)".into()));
        }
        if self.full_rate && self.shifts.is_some() {
            return Err(CliError::Config(
                "simulation.shifts and simulation.full_rate are exclusive".into(),
            ));
        }
        self.params()?;
        Ok(())
    }

    pub fn params(&self) -> CliResult<TypicalityParams> {
        TypicalityParams::new(self.epsilon).map_err(CliError::config)
    }
}

impl VerifyConfig {
    fn validate(&self, g: GroupSpec) -> CliResult<()> {
        for case in &self.phi {
            if case.n == 0 || case.u.is_empty() {
                return Err(CliError::Config("phi cases need n >= 1 and a nonempty u".into()));
            }
            if case.mode == PhiModeConfig::MonteCarlo && case.trials.unwrap_or(0) == 0 {
                return Err(CliError::Config("montecarlo phi cases need trials >= 1".into()));
            }
        }
        if let Some(s) = &self.sumset {
            if s.pairs == 0 || s.n_max == 0 || s.k_max == 0 {
                return Err(CliError::Config("sumset needs pairs, n_max and k_max >= 1".into()));
            }
            TypicalityParams::new(s.epsilon).map_err(CliError::config)?;
        }
        if let Some(c) = &self.coset {
            c.source.resolve(g).map_err(CliError::config)?;
            g.check_index(c.s).map_err(CliError::config)?;
            TypicalityParams::new(c.epsilon).map_err(CliError::config)?;
            if c.ks.is_empty() || c.ks.contains(&0) {
                return Err(CliError::Config("coset.ks must list positive lengths".into()));
            }
        }
        Ok(())
    }
}

/// One concrete problem of a (possibly swept) configuration.
#[derive(Clone, Debug)]
pub struct Instance {
    pub delta: Option<f64>,
    pub problem: ResolvedProblem,
}

#[derive(Clone, Debug)]
pub enum ResolvedProblem {
    Dsc(DscProblem),
    Mac(MacProblem),
    Ptp { input: Pmf, channel: Vec<Vec<f64>> },
}

impl ProblemConfig {
    pub fn instances(&self, g: GroupSpec) -> CliResult<Vec<Instance>> {
        let sources = [self.noise.is_some(), self.joint.is_some(), self.channel.is_some()];
        if sources.iter().filter(|&&b| b).count() != 1 {
            return Err(CliError::Config(
                "problem needs exactly one of noise, joint, channel".into(),
            ));
        }
        if self.joint.is_some() && self.kind != ProblemKind::Dsc {
            return Err(CliError::Config("problem.joint is only valid for kind = dsc".into()));
        }
        if self.channel.is_some() && self.kind == ProblemKind::Dsc {
            return Err(CliError::Config("problem.channel is not valid for kind = dsc".into()));
        }
        if self.input.is_some() && self.kind != ProblemKind::Ptp {
            return Err(CliError::Config("problem.input is only valid for kind = ptp".into()));
        }
        let noises: Vec<(Option<f64>, Option<PmfSpec>)> = match (&self.sweep, &self.noise) {
            (Some(sweep), Some(PmfSpec::Table1 { .. })) => sweep
                .points()?
                .into_iter()
                .map(|d| (Some(d), Some(PmfSpec::Table1 { delta: d })))
                .collect(),
            (Some(_), _) => return Err(CliError::Config("sweep needs noise family table1".into())),
            (None, Some(PmfSpec::Table1 { delta })) => vec![(Some(*delta), self.noise.clone())],
            (None, noise) => vec![(None, noise.clone())],
        };
        noises
            .into_iter()
            .map(|(delta, noise)| {
                let noise = noise.map(|n| n.resolve(g)).transpose().map_err(CliError::config)?;
                let problem = self.resolve_one(g, noise.as_ref()).map_err(CliError::config)?;
                Ok(Instance { delta, problem })
            })
            .collect()
    }

    fn resolve_one(&self, g: GroupSpec, noise: Option<&Pmf>) -> qgc_core::Result<ResolvedProblem> {
        let q = g.order() as usize;
        Ok(match self.kind {
            ProblemKind::Dsc => match (noise, &self.joint) {
                (Some(n), _) => ResolvedProblem::Dsc(DscProblem::with_sum_noise(n)?),
                (None, Some(rows)) => {
                    if rows.len() != q || rows.iter().any(|r| r.len() != q) {
                        return Err(qgc_core::Error::Dimension(format!("problem.joint must be {q}×{q}")));
                    }
                    let joint = qgc_core::JointPmf::new(vec![q, q], rows.concat())?;
                    ResolvedProblem::Dsc(DscProblem::new(g, joint)?)
                }
                (None, None) => unreachable!("checked by instances"),
            },
            ProblemKind::Mac => match (noise, &self.channel) {
                (Some(n), _) => ResolvedProblem::Mac(MacProblem::additive(n)?),
                (None, Some(rows)) => ResolvedProblem::Mac(MacProblem::new(g, rows.clone())?),
                (None, None) => unreachable!("checked by instances"),
            },
            ProblemKind::Ptp => {
                let input = match &self.input {
                    Some(spec) => spec.resolve(g)?,
                    None => Pmf::uniform(g),
                };
                let channel = match (noise, &self.channel) {
                    (Some(n), _) => (0..q as u64)
                        .map(|x| (0..q as u64).map(|y| n.prob(g.sub_raw(y, x))).collect())
                        .collect(),
                    (None, Some(rows)) => rows.clone(),
                    (None, None) => unreachable!("checked by instances"),
                };
                qgc_core::rate_regions::ptp_rates(&input, &channel)?;
                ResolvedProblem::Ptp { input, channel }
            }
        })
    }
}
