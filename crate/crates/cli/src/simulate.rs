//! The `simulate` command: one experiment per (instance, n, codebook seed).

use std::time::Duration;

use qgc_core::rate_regions::{dsc_region, Problem};
use qgc_core::simulate::{
    dsc_design, mac_design, run_dsc, run_mac, shift_count, CodeDesign, DscConfig, ExperimentResult, MacConfig,
};
use serde::{Deserialize, Serialize};

use crate::config::{ResolvedProblem, RunConfig};
use crate::error::{CliError, CliResult};
use crate::output::{fmt6, fmt6_opt, Tabular, TOOL_VERSION};
use crate::rates::resolve_aux;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationRecord {
    pub config_hash: String,
    pub tool_version: String,
    pub delta: Option<f64>,
    pub aux_desc: String,
    pub result: ExperimentResult,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SimulationTable(pub Vec<SimulationRecord>);

impl Tabular for SimulationTable {
    fn csv_header() -> &'static [&'static str] {
        &[
            "kind",
            "delta",
            "n",
            "seed",
            "rate_1",
            "rate_2",
            "trials",
            "evaluated",
            "encoder_failure_rate",
            "decoder_error_rate",
            "decoder_error_lo",
            "decoder_error_hi",
            "config_hash",
        ]
    }

    fn csv_rows(&self) -> Vec<Vec<String>> {
        self.0
            .iter()
            .map(|rec| {
                let r = &rec.result;
                let kind = serde_json::to_value(r.kind)
                    .ok()
                    .and_then(|v| v.as_str().map(str::to_string))
                    .unwrap_or_default();
                vec![
                    kind,
                    fmt6_opt(rec.delta),
                    r.n.to_string(),
                    r.seed.to_string(),
                    fmt6(r.rates[0]),
                    fmt6(r.rates[1]),
                    r.trials.to_string(),
                    r.evaluated.to_string(),
                    fmt6(r.encoder_failure_rate),
                    fmt6(r.decoder_error_rate),
                    fmt6(r.decoder_error_ci[0]),
                    fmt6(r.decoder_error_ci[1]),
                    rec.config_hash.clone(),
                ]
            })
            .collect()
    }
}

pub fn compute(cfg: &RunConfig) -> CliResult<SimulationTable> {
    let sim = cfg
        .simulation
        .as_ref()
        .ok_or_else(|| CliError::Config("missing [simulation] section".into()))?;
    sim.validate()?;
    let params = sim.params()?;
    let g = cfg.group_spec()?;
    let hash = cfg.hash();
    let mut out = Vec::new();
    for inst in cfg.problem()?.instances(g)? {
        let problem = match &inst.problem {
            ResolvedProblem::Dsc(p) => Problem::Dsc(p),
            ResolvedProblem::Mac(p) => Problem::Mac(p),
            ResolvedProblem::Ptp { .. } => {
                return Err(CliError::Unsupported(
                    "simulation covers dsc and mac problems only".into(),
                ))
            }
        };
        let aux = resolve_aux(cfg, problem)?;
        let aux_desc = aux.describe();
        for &n in &sim.n {
            for seed in sim.seed..sim.seed + sim.seeds {
                let run = || -> CliResult<ExperimentResult> {
                    Ok(match &inst.problem {
                        ResolvedProblem::Dsc(p) => {
                            let (design, mut shifts) = match sim.k {
                                Some(k) => {
                                    let design = CodeDesign::from_total(n, k, aux.clone(), params)?;
                                    let bound = dsc_region(p, &aux)?;
                                    let shifts = bound
                                        .rates
                                        .map(|r| shift_count(g, n, ((1.0 + sim.margin) * r).min(g.log2_order())));
                                    (design, shifts)
                                }
                                None => dsc_design(p, &aux, n, sim.margin, params)?,
                            };
                            if sim.full_rate {
                                shifts = [shift_count(g, n, g.log2_order()); 2];
                            } else if let Some(l) = sim.shifts {
                                shifts = [l, l];
                            }
                            run_dsc(&DscConfig {
                                problem: p.clone(),
                                design,
                                shifts,
                                trials: sim.trials,
                                seed,
                            })?
                        }
                        ResolvedProblem::Mac(p) => {
                            let design = match sim.k {
                                Some(k) => CodeDesign::from_total(n, k, aux.clone(), params)?,
                                None => mac_design(p, &aux, n, sim.margin, params)?,
                            };
                            run_mac(&MacConfig {
                                problem: p.clone(),
                                design,
                                trials: sim.trials,
                                seed,
                            })?
                        }
                        ResolvedProblem::Ptp { .. } => unreachable!(),
                    })
                };
                let k = sim.k.map(|k| format!(", k = {k}")).unwrap_or_default();
                let result = run().map_err(|e| e.context(&format!("n = {n}{k}, seed = {seed}")))?;
                out.push(SimulationRecord {
                    config_hash: hash.clone(),
                    tool_version: TOOL_VERSION.to_string(),
                    delta: inst.delta,
                    aux_desc: aux_desc.clone(),
                    result,
                });
            }
        }
    }
    Ok(SimulationTable(out))
}

pub fn summary(table: &SimulationTable) -> String {
    let mut s = String::new();
    let mut total = Duration::ZERO;
    for rec in &table.0 {
        let r = &rec.result;
        total += r.wall_clock;
        s.push_str(&format!(
            "n={:<3} seed={:<6} k={:?} evaluated={:<6} enc_fail={:.4} dec_err={:.4} [{:.4}, {:.4}] {:.3}s\n",
            r.n,
            r.seed,
            r.layer_dims,
            r.evaluated,
            r.encoder_failure_rate,
            r.decoder_error_rate,
            r.decoder_error_ci[0],
            r.decoder_error_ci[1],
            r.wall_clock.as_secs_f64()
        ));
    }
    s.push_str(&format!("{} runs in {:.3}s\n", table.0.len(), total.as_secs_f64()));
    s
}
