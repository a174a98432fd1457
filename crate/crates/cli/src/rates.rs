//! The `rates` command: closed-form symmetric rates per scheme and instance.

use qgc_core::rate_regions::{
    baseline_dsc, baseline_mac, optimize_aux, ptp_rates, AuxiliaryChoice, OptimizeOptions, Problem, RateBound, Scheme,
};
use serde::{Deserialize, Serialize};

use crate::config::{AuxConfig, Instance, ResolvedProblem, RunConfig};
use crate::error::{CliError, CliResult};
use crate::output::{fmt6, fmt6_opt, Tabular, TOOL_VERSION};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionRecord {
    pub scheme: Scheme,
    pub delta: Option<f64>,
    pub problem_hash: String,
    /// Symmetric operating point in bits per user.
    pub rate_bits: f64,
    pub rates: [f64; 2],
    pub s_star: Option<u32>,
    pub aux: Option<AuxiliaryChoice>,
    pub aux_desc: String,
    pub tool_version: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RateTable(pub Vec<RegionRecord>);

impl Tabular for RateTable {
    fn csv_header() -> &'static [&'static str] {
        &["scheme", "delta", "rate_bits", "s_star", "aux_desc"]
    }

    fn csv_rows(&self) -> Vec<Vec<String>> {
        self.0
            .iter()
            .map(|r| {
                vec![
                    r.scheme.to_string(),
                    fmt6_opt(r.delta),
                    fmt6(r.rate_bits),
                    r.s_star.map(|s| s.to_string()).unwrap_or_default(),
                    r.aux_desc.clone(),
                ]
            })
            .collect()
    }
}

impl RateTable {
    pub fn find(&self, scheme: Scheme, delta: Option<f64>) -> Option<&RegionRecord> {
        self.0.iter().find(|r| r.scheme == scheme && r.delta == delta)
    }
}

pub fn problem_hash(p: &ResolvedProblem) -> String {
    let json = match p {
        ResolvedProblem::Dsc(d) => serde_json::to_string(&("dsc", d)),
        ResolvedProblem::Mac(m) => serde_json::to_string(&("mac", m)),
        ResolvedProblem::Ptp { input, channel } => serde_json::to_string(&("ptp", input, channel)),
    }
    .expect("problem serializes");
    crate::config::sha256_hex(json.as_bytes())
}

/// The auxiliary choice for one instance: fixed by the config or searched.
pub fn resolve_aux(cfg: &RunConfig, problem: Problem<'_>) -> CliResult<AuxiliaryChoice> {
    if let Some(aux) = cfg.aux_choice(problem.group())? {
        return Ok(aux);
    }
    let AuxConfig::Optimize {
        budget,
        seed,
        grid_step,
    } = &cfg.aux
    else {
        unreachable!("aux_choice returns None only when optimizing");
    };
    let opts = OptimizeOptions {
        budget: *budget,
        seed: *seed,
        grid_step: *grid_step,
        ..OptimizeOptions::default()
    };
    Ok(optimize_aux(problem, &opts)?.0)
}

fn evaluate(cfg: &RunConfig, inst: &Instance, scheme: Scheme) -> CliResult<(RateBound, f64)> {
    Ok(match &inst.problem {
        ResolvedProblem::Dsc(p) => {
            let bound = if scheme == Scheme::Qgc {
                let problem = Problem::Dsc(p);
                let aux = resolve_aux(cfg, problem)?;
                problem.evaluate(&aux)?
            } else {
                baseline_dsc(p, scheme)?
            };
            let sym = bound.rates[0].max(bound.rates[1]);
            (bound, sym)
        }
        ResolvedProblem::Mac(p) => {
            let bound = if scheme == Scheme::Qgc {
                let problem = Problem::Mac(p);
                let aux = resolve_aux(cfg, problem)?;
                problem.evaluate(&aux)?
            } else {
                baseline_mac(p, scheme)?
            };
            let sym = bound.rates[0].min(bound.rates[1]);
            (bound, sym)
        }
        ResolvedProblem::Ptp { input, channel } => match scheme {
            // Both reach I(X;Y) at the given input.
            Scheme::Qgc | Scheme::Unstructured => {
                let r = ptp_rates(input, channel)?.channel_rate;
                let bound = RateBound {
                    scheme,
                    rates: [r, r],
                    s_star: None,
                    aux: None,
                };
                (bound, r)
            }
            other => {
                return Err(CliError::Unsupported(format!(
                    "the {other} baseline has no point-to-point form"
                )))
            }
        },
    })
}

/// One record per (scheme, instance), grouped by scheme in config order and
/// by increasing δ within a scheme.
pub fn compute(cfg: &RunConfig) -> CliResult<RateTable> {
    let g = cfg.group_spec()?;
    let instances = cfg.problem()?.instances(g)?;
    let hashes: Vec<String> = instances.iter().map(|i| problem_hash(&i.problem)).collect();
    let mut out = Vec::with_capacity(cfg.schemes.len() * instances.len());
    for &scheme in &cfg.schemes {
        for (inst, hash) in instances.iter().zip(&hashes) {
            let (bound, sym) = evaluate(cfg, inst, scheme)?;
            let aux_desc = bound.aux.as_ref().map(|a| a.describe()).unwrap_or_default();
            out.push(RegionRecord {
                scheme,
                delta: inst.delta,
                problem_hash: hash.clone(),
                rate_bits: sym,
                rates: bound.rates,
                s_star: bound.s_star,
                aux: bound.aux,
                aux_desc,
                tool_version: TOOL_VERSION.to_string(),
            });
        }
    }
    Ok(RateTable(out))
}

pub fn summary(table: &RateTable) -> String {
    let mut s = String::new();
    for r in &table.0 {
        let delta = r.delta.map(|d| format!(" delta={d:.4}")).unwrap_or_default();
        let star = r.s_star.map(|x| format!(" s*={x}")).unwrap_or_default();
        s.push_str(&format!(
            "{:<13}{delta} rate={:.6}{star}\n",
            r.scheme.name(),
            r.rate_bits
        ));
    }
    s
}
