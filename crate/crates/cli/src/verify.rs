//! The `verify` command: exact checks of the uniformity identity, the sumset
//! bounds, coset counts and stored codebooks.

use std::path::Path;

use qgc_core::codebook::{elementwise_sumset, CodebookDocument, LayerSpec};
use qgc_core::simulate::{verify_coset_counts, verify_phi_distribution, CosetCountRow, CosetSource, PhiMode};
use qgc_core::{GroupSpec, GroupVector, Pmf, QgcCodebook, QgcSpec, TypicalityParams};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{PhiModeConfig, RunConfig, SumsetSuite, VerifyConfig};
use crate::error::{CliError, CliResult};
use crate::output::{fmt6, Tabular, TOOL_VERSION};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhiRow {
    pub k: usize,
    pub n: usize,
    pub u: Vec<u64>,
    pub s: u32,
    pub mode: PhiModeConfig,
    pub samples: u64,
    pub max_deviation: f64,
    pub exact: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SumsetRow {
    pub pair: u64,
    pub n: usize,
    pub layer_dims: Vec<usize>,
    pub a: u64,
    pub size_c1: u64,
    pub size_ac2: u64,
    pub size_sum: u64,
    pub upper_limit: f64,
    pub lower_ok: bool,
    pub upper_ok: bool,
    /// The elementwise sumset equals the materialized sum QGC.
    pub matches_qgc: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CodebookCheck {
    pub path: String,
    pub ok: bool,
    pub detail: String,
    pub design_rate: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub config_hash: String,
    pub tool_version: String,
    pub phi: Vec<PhiRow>,
    pub sumset: Vec<SumsetRow>,
    pub coset: Vec<CosetCountRow>,
    pub codebooks: Vec<CodebookCheck>,
    /// One line per failed exact check; empty on success.
    pub failures: Vec<String>,
}

impl Tabular for VerifyReport {
    fn csv_header() -> &'static [&'static str] {
        &["check", "case", "value", "ok"]
    }

    fn csv_rows(&self) -> Vec<Vec<String>> {
        let mut rows = Vec::new();
        for r in &self.phi {
            rows.push(vec![
                "phi".into(),
                format!("k={} n={} u={:?}", r.k, r.n, r.u),
                fmt6(r.max_deviation),
                (r.mode == PhiModeConfig::MonteCarlo || r.exact).to_string(),
            ]);
        }
        for r in &self.sumset {
            rows.push(vec![
                "sumset".into(),
                format!("pair={} n={} a={}", r.pair, r.n, r.a),
                r.size_sum.to_string(),
                (r.lower_ok && r.upper_ok && r.matches_qgc).to_string(),
            ]);
        }
        for r in &self.coset {
            rows.push(vec![
                "coset".into(),
                format!("k={}", r.k),
                fmt6(r.exponent),
                (r.set_size == 0 || r.count >= 1).to_string(),
            ]);
        }
        for r in &self.codebooks {
            rows.push(vec![
                "codebook".into(),
                r.path.clone(),
                r.detail.clone(),
                r.ok.to_string(),
            ]);
        }
        rows
    }
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

fn all_words(q: u64, k: usize) -> impl Iterator<Item = Vec<u64>> {
    let total = q.pow(k as u32);
    (0..total).map(move |mut i| {
        (0..k)
            .map(|_| {
                let d = i % q;
                i /= q;
                d
            })
            .collect()
    })
}

fn phi_row(
    g: GroupSpec,
    n: usize,
    u: &[u64],
    mode: PhiModeConfig,
    trials: Option<u64>,
    seed: u64,
) -> CliResult<PhiRow> {
    let v = GroupVector::new(g, u.to_vec()).map_err(CliError::config)?;
    let m = match mode {
        PhiModeConfig::Exhaustive => PhiMode::Exhaustive,
        PhiModeConfig::MonteCarlo => PhiMode::MonteCarlo {
            trials: trials.unwrap_or(0),
            seed,
        },
    };
    let rep = verify_phi_distribution(g, n, &v, m)?;
    Ok(PhiRow {
        k: rep.k,
        n: rep.n,
        u: rep.u,
        s: rep.s,
        mode,
        samples: rep.samples,
        max_deviation: rep.max_deviation,
        exact: rep.exact,
    })
}

/// Random pmf: uniform on a random nonempty support.
fn random_pmf(g: GroupSpec, rng: &mut ChaCha8Rng) -> qgc_core::Result<Pmf> {
    let q = g.order();
    let mut letters: Vec<u64> = (0..q).collect();
    letters.shuffle(rng);
    let size = rng.gen_range(1..=q as usize);
    let mut support = letters[..size].to_vec();
    support.sort_unstable();
    Pmf::uniform_on(g, &support)
}

/// A QGC pair with common matrices and independently drawn layer pmfs and
/// translations. Draws that give an empty or oversized domain are redrawn.
pub fn random_pair(g: GroupSpec, suite: &SumsetSuite, rng: &mut ChaCha8Rng) -> CliResult<(QgcCodebook, QgcCodebook)> {
    let params = TypicalityParams::new(suite.epsilon).map_err(CliError::config)?;
    for _ in 0..1000 {
        let n = rng.gen_range(1..=suite.n_max);
        let layers = rng.gen_range(1..=g.r().min(2) as usize);
        let dims: Vec<usize> = (0..layers).map(|_| rng.gen_range(1..=suite.k_max)).collect();
        let p1: Vec<Pmf> = dims
            .iter()
            .map(|_| random_pmf(g, rng))
            .collect::<qgc_core::Result<_>>()?;
        let p2: Vec<Pmf> = dims
            .iter()
            .map(|_| random_pmf(g, rng))
            .collect::<qgc_core::Result<_>>()?;
        let spec_layers = dims
            .iter()
            .zip(&p1)
            .map(|(&k, p)| LayerSpec::new(k, p.clone()))
            .collect();
        let spec = QgcSpec::new(g, n, spec_layers, params)?;
        let seed = rng.gen();
        let c1 = match QgcCodebook::build(spec, seed) {
            Ok(c) => c,
            Err(qgc_core::Error::EmptyTypicalSet { .. } | qgc_core::Error::BudgetExceeded { .. }) => continue,
            Err(e) => return Err(e.into()),
        };
        let b2 = GroupVector::random(g, n, rng);
        match c1.with_layers(p2, b2) {
            Ok(c2) => return Ok((c1, c2)),
            Err(qgc_core::Error::EmptyTypicalSet { .. } | qgc_core::Error::BudgetExceeded { .. }) => continue,
            Err(e) => return Err(e.into()),
        }
    }
    Err(CliError::Config(
        "could not draw a codebook pair with nonempty domains".into(),
    ))
}

fn sumset_rows(g: GroupSpec, suite: &SumsetSuite) -> CliResult<Vec<SumsetRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(suite.seed);
    let mut rows = Vec::new();
    for pair in 0..suite.pairs {
        let (c1, c2) = random_pair(g, suite, &mut rng)?;
        let m1 = c1.materialize()?;
        let m2 = c2.materialize()?;
        for a in 0..g.order() {
            let b = c1.check_sumset_bounds(&c2, a)?;
            let direct = elementwise_sumset(g, &m1, &m2, a);
            let via_qgc = c1.sumset(&c2, a)?.materialize()?.to_set();
            rows.push(SumsetRow {
                pair,
                n: c1.n(),
                layer_dims: c1.spec().layers().iter().map(|l| l.k).collect(),
                a,
                size_c1: b.size_c1,
                size_ac2: b.size_ac2,
                size_sum: b.size_sum,
                upper_limit: b.upper_limit,
                lower_ok: b.lower_ok,
                upper_ok: b.upper_ok,
                matches_qgc: direct == via_qgc,
            });
        }
    }
    Ok(rows)
}

fn check_codebook(path: &Path) -> CodebookCheck {
    let fail = |detail: String| CodebookCheck {
        path: path.display().to_string(),
        ok: false,
        detail,
        design_rate: None,
    };
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => return fail(format!("unreadable: {e}")),
    };
    let doc: CodebookDocument = match serde_json::from_str(&text) {
        Ok(d) => d,
        Err(e) => return fail(format!("malformed: {e}")),
    };
    let cb = match QgcCodebook::from_document(&doc) {
        Ok(c) => c,
        Err(e) => return fail(format!("invalid: {e}")),
    };
    let design_rate = Some(cb.spec().design_rate());
    let (ok, detail) = match doc.seed {
        Some(seed) if cb.matches_seed(seed) => (true, format!("regenerates from seed {seed}")),
        Some(seed) => (false, format!("matrices or translation differ from seed {seed}")),
        None => (true, "no seed recorded; structure valid".to_string()),
    };
    CodebookCheck {
        path: path.display().to_string(),
        ok,
        detail,
        design_rate,
    }
}

pub fn compute(cfg: &RunConfig) -> CliResult<VerifyReport> {
    let default = VerifyConfig::default();
    let v = cfg.verify.as_ref().unwrap_or(&default);
    let g = cfg.group_spec()?;
    let mut report = VerifyReport {
        config_hash: cfg.hash(),
        tool_version: TOOL_VERSION.to_string(),
        ..Default::default()
    };
    for case in &v.phi {
        report
            .phi
            .push(phi_row(g, case.n, &case.u, case.mode, case.trials, case.seed)?);
    }
    if let Some(suite) = &v.phi_suite {
        for k in 1..=suite.k_max {
            for n in 1..=suite.n_max {
                for u in all_words(g.order(), k) {
                    report.phi.push(phi_row(g, n, &u, PhiModeConfig::Exhaustive, None, 0)?);
                }
            }
        }
    }
    for r in &report.phi {
        if r.mode == PhiModeConfig::Exhaustive && !r.exact {
            report.failures.push(format!(
                "phi k={} n={} u={:?}: deviation {:e}",
                r.k, r.n, r.u, r.max_deviation
            ));
        }
    }
    if let Some(suite) = &v.sumset {
        report.sumset = sumset_rows(g, suite)?;
        for r in &report.sumset {
            if !(r.lower_ok && r.upper_ok && r.matches_qgc) {
                report.failures.push(format!(
                    "sumset pair {} a={}: |C1|={} |aC2|={} |sum|={} qgc_match={}",
                    r.pair, r.a, r.size_c1, r.size_ac2, r.size_sum, r.matches_qgc
                ));
            }
        }
    }
    if let Some(c) = &v.coset {
        let pmf = c.source.resolve(g).map_err(CliError::config)?;
        let params = TypicalityParams::new(c.epsilon).map_err(CliError::config)?;
        report.coset = verify_coset_counts(&CosetSource::Marginal(pmf), &c.ks, c.s, params)?;
        for r in &report.coset {
            if r.set_size > 0 && r.count == 0 {
                report
                    .failures
                    .push(format!("coset k={}: anchor missing from its own coset", r.k));
            }
        }
    }
    for path in &v.codebook_files {
        let check = check_codebook(path);
        if !check.ok {
            report
                .failures
                .push(format!("codebook {}: {}", check.path, check.detail));
        }
        report.codebooks.push(check);
    }
    Ok(report)
}

pub fn summary(r: &VerifyReport) -> String {
    let exact = r.phi.iter().filter(|p| p.exact).count();
    let bounds_ok = r
        .sumset
        .iter()
        .filter(|s| s.lower_ok && s.upper_ok && s.matches_qgc)
        .count();
    let mut s = format!(
        "phi: {exact}/{} exact\nsumset: {bounds_ok}/{} cases hold\ncoset rows: {}\ncodebooks: {}/{} ok\n",
        r.phi.len(),
        r.sumset.len(),
        r.coset.len(),
        r.codebooks.iter().filter(|c| c.ok).count(),
        r.codebooks.len()
    );
    for f in &r.failures {
        s.push_str(&format!("FAILED {f}\n"));
    }
    s
}
