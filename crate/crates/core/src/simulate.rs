//! Monte-Carlo runs of the two multi-terminal schemes at small block length,
//! and exact checks of the law of u·G and of typical-set coset counts.

use std::ops::Add;
use std::time::{Duration, Instant};

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codebook::{LayerSpec, QgcCodebook, QgcSpec, WordPacker};
use crate::error::{Error, Result};
use crate::group::{GroupSpec, GroupVector};
use crate::prob::{JointPmf, Pmf};
use crate::rate_regions::{dsc_region, mac_region, AuxiliaryChoice, DscProblem, MacProblem};
use crate::typicality::{JointTypicalityTest, TypicalSet, TypicalityParams, ENUMERATION_CAP};

const STREAM_CODEBOOK: u64 = 1;
const STREAM_TRIAL: u64 = 2;
const STREAM_SHIFTS: u64 = 3;
const STREAM_TRANSLATION: u64 = 4;

/// Counter-based seed derivation (SplitMix64 finalizer over the mixed
/// inputs), so per-trial streams do not depend on scheduling.
pub fn split_seed(master: u64, stream: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Wilson score interval at 95% for `hits` out of `total`.
pub fn wilson_interval(hits: u64, total: u64) -> (f64, f64) {
    if total == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054_f64;
    let n = total as f64;
    let p = hits as f64 / n;
    let denom = 1.0 + z * z / n;
    let centre = (p + z * z / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    let lo = if hits == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if hits == total { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

/// Block length, layer dimensions and the auxiliary pmfs of a pair of codes
/// sharing generator matrices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CodeDesign {
    pub n: usize,
    pub layer_dims: Vec<usize>,
    pub aux: AuxiliaryChoice,
    pub params: TypicalityParams,
}

impl CodeDesign {
    pub fn new(n: usize, layer_dims: Vec<usize>, aux: AuxiliaryChoice, params: TypicalityParams) -> Result<Self> {
        aux.validate()?;
        if layer_dims.len() != aux.weights.len() || layer_dims.contains(&0) {
            return Err(Error::Dimension("one positive dimension per layer".into()));
        }
        if n == 0 {
            return Err(Error::InvalidParameter("block length n must be positive".into()));
        }
        Ok(CodeDesign {
            n,
            layer_dims,
            aux,
            params,
        })
    }

    /// Splits a total dimension k across the layers in proportion to the
    /// weights of Q, each layer getting at least one.
    pub fn from_total(n: usize, k: usize, aux: AuxiliaryChoice, params: TypicalityParams) -> Result<Self> {
        let m = aux.weights.len();
        if k < m {
            return Err(Error::InvalidParameter(format!("k = {k} is smaller than |Q| = {m}")));
        }
        let mut dims: Vec<usize> = aux
            .weights
            .iter()
            .map(|w| ((w * k as f64).round() as usize).max(1))
            .collect();
        let assigned: usize = dims.iter().sum();
        if assigned != k {
            let last = dims.len() - 1;
            dims[last] = (dims[last] + k).saturating_sub(assigned).max(1);
        }
        CodeDesign::new(n, dims, aux, params)
    }

    pub fn group(&self) -> GroupSpec {
        self.aux.group()
    }

    pub fn total_k(&self) -> usize {
        self.layer_dims.iter().sum()
    }

    /// Per-user design rates Σ (k_i/n) H(W_{u,i}).
    pub fn inner_rates(&self) -> [f64; 2] {
        let rate = |pmfs: &[Pmf]| {
            pmfs.iter()
                .zip(&self.layer_dims)
                .map(|(p, &k)| k as f64 / self.n as f64 * p.entropy())
                .sum()
        };
        [rate(&self.aux.w1), rate(&self.aux.w2)]
    }

    /// Two codebooks with common matrices; the second translation is either
    /// the first one or drawn independently.
    pub fn codebooks(&self, seed: u64, shared_translation: bool) -> Result<(QgcCodebook, QgcCodebook)> {
        let g = self.group();
        let layers = self
            .layer_dims
            .iter()
            .zip(&self.aux.w1)
            .map(|(&k, p)| LayerSpec::new(k, p.clone()))
            .collect();
        let c1 = QgcCodebook::build(QgcSpec::new(g, self.n, layers, self.params)?, seed)?;
        let b2 = if shared_translation {
            c1.translation().clone()
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(split_seed(seed, STREAM_TRANSLATION, 0));
            GroupVector::random(g, self.n, &mut rng)
        };
        let c2 = c1.with_layers(self.aux.w2.clone(), b2)?;
        Ok((c1, c2))
    }
}

/// Distributed coding of X1 + X2 with two UQGCs.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DscConfig {
    pub problem: DscProblem,
    pub design: CodeDesign,
    /// Number of shifts l_i per encoder; l_i >= q^n means every word.
    pub shifts: [u64; 2],
    pub trials: u64,
    pub seed: u64,
}

/// Computation of X1 + X2 over a MAC with two QGCs.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MacConfig {
    pub problem: MacProblem,
    pub design: CodeDesign,
    pub trials: u64,
    pub seed: u64,
}

fn check_trials(trials: u64) -> Result<()> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    Ok(())
}

/// Inner dimension `margin` below the packing limit of the sum code and
/// encoder rates `margin` above the source-coding bound.
pub fn dsc_design(
    problem: &DscProblem,
    aux: &AuxiliaryChoice,
    n: usize,
    margin: f64,
    params: TypicalityParams,
) -> Result<(CodeDesign, [u64; 2])> {
    let g = problem.group();
    let z = problem.sum_pmf();
    let w = aux.sum()?;
    let log_p = (g.p() as f64).log2();
    let mut kappa = f64::INFINITY;
    for s in 0..g.r() {
        let den = w.entropy(Some(s))?;
        if den > 1e-12 {
            let deficit = ((g.r() - s) as f64 * log_p - z.cond_entropy_given_quotient(s)?).max(0.0);
            kappa = kappa.min(deficit / den);
        }
    }
    if !kappa.is_finite() {
        kappa = g.log2_order();
    }
    let k = (((1.0 - margin) * kappa * n as f64).floor() as usize).max(aux.weights.len());
    let design = CodeDesign::from_total(n, k, aux.clone(), params)?;
    let bound = dsc_region(problem, aux)?;
    let shifts = bound.rates.map(|r| {
        let rate = ((1.0 + margin) * r).min(g.log2_order());
        shift_count(g, n, rate)
    });
    Ok((design, shifts))
}

/// Number of shifts for a bin rate, saturating at q^n.
pub fn shift_count(group: GroupSpec, n: usize, rate: f64) -> u64 {
    let space = (group.order() as f64).powi(n as i32);
    let l = 2f64.powf(n as f64 * rate).ceil().max(1.0);
    if l >= space {
        space.min(u64::MAX as f64) as u64
    } else {
        l as u64
    }
}

/// Inner dimension chosen so the per-user rate sits `margin` below the
/// computation bound.
pub fn mac_design(
    problem: &MacProblem,
    aux: &AuxiliaryChoice,
    n: usize,
    margin: f64,
    params: TypicalityParams,
) -> Result<CodeDesign> {
    let bound = mac_region(problem, aux)?;
    let target = (1.0 - margin) * bound.rates[0].min(bound.rates[1]);
    let h = aux.layered(0)?.entropy(None)?.max(aux.layered(1)?.entropy(None)?);
    let k = if h > 1e-12 {
        (target * n as f64 / h).floor() as usize
    } else {
        n
    };
    CodeDesign::from_total(n, k.max(aux.weights.len()), aux.clone(), params)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
struct Counts {
    skipped: u64,
    encoder_failures: u64,
    true_atypical: u64,
    ambiguous: u64,
    successes: u64,
}

impl Add for Counts {
    type Output = Counts;

    fn add(self, o: Counts) -> Counts {
        Counts {
            skipped: self.skipped + o.skipped,
            encoder_failures: self.encoder_failures + o.encoder_failures,
            true_atypical: self.true_atypical + o.true_atypical,
            ambiguous: self.ambiguous + o.ambiguous,
            successes: self.successes + o.successes,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Dsc,
    Mac,
}

/// Counts and rates of one (configuration, seed) run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub kind: ExperimentKind,
    pub n: usize,
    pub layer_dims: Vec<usize>,
    pub epsilon: f64,
    pub seed: u64,
    /// Per-user rates in bits: bin rates for source coding, inner design
    /// rates for the MAC.
    pub rates: [f64; 2],
    pub shifts: Option<[u64; 2]>,
    pub sum_codebook_size: u64,
    pub trials: u64,
    /// Source pairs outside the joint typical set; excluded below.
    pub skipped_atypical: u64,
    pub evaluated: u64,
    pub encoder_failures: u64,
    pub decoder_errors: u64,
    /// Decoder errors where the transmitted sum failed the typicality test.
    pub true_word_atypical: u64,
    /// Decoder errors where some other sum word also passed.
    pub ambiguous: u64,
    pub encoder_failure_rate: f64,
    pub encoder_failure_ci: [f64; 2],
    /// Decoder errors over trials the encoders got through.
    pub decoder_error_rate: f64,
    pub decoder_error_ci: [f64; 2],
    #[serde(skip)]
    pub wall_clock: Duration,
}

impl ExperimentResult {
    #[allow(clippy::too_many_arguments)]
    fn from_counts(
        kind: ExperimentKind,
        design: &CodeDesign,
        seed: u64,
        rates: [f64; 2],
        shifts: Option<[u64; 2]>,
        sum_codebook_size: u64,
        trials: u64,
        c: Counts,
        wall_clock: Duration,
    ) -> Self {
        let evaluated = trials - c.skipped;
        let decoded = evaluated - c.encoder_failures;
        let decoder_errors = c.true_atypical + c.ambiguous;
        let rate = |hits: u64, total: u64| if total == 0 { 0.0 } else { hits as f64 / total as f64 };
        let (el, eh) = wilson_interval(c.encoder_failures, evaluated);
        let (dl, dh) = wilson_interval(decoder_errors, decoded);
        ExperimentResult {
            kind,
            n: design.n,
            layer_dims: design.layer_dims.clone(),
            epsilon: design.params.epsilon(),
            seed,
            rates,
            shifts,
            sum_codebook_size,
            trials,
            skipped_atypical: c.skipped,
            evaluated,
            encoder_failures: c.encoder_failures,
            decoder_errors,
            true_word_atypical: c.true_atypical,
            ambiguous: c.ambiguous,
            encoder_failure_rate: rate(c.encoder_failures, evaluated),
            encoder_failure_ci: [el, eh],
            decoder_error_rate: rate(decoder_errors, decoded),
            decoder_error_ci: [dl, dh],
            wall_clock,
        }
    }
}

/// Shift set of one encoder as sorted packed keys.
struct ShiftSet {
    packer: WordPacker,
    /// `None` when every word is a shift.
    keys: Option<Vec<u64>>,
}

impl ShiftSet {
    fn new(group: GroupSpec, n: usize, l: u64, seed: u64) -> Result<Self> {
        let packer = WordPacker::new(group, n)?;
        if l >= packer.space() {
            return Ok(ShiftSet { packer, keys: None });
        }
        if l > ENUMERATION_CAP * 4 {
            return Err(Error::BudgetExceeded {
                what: "shift set".into(),
                needed: l as f64,
                cap: ENUMERATION_CAP * 4,
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut keys: Vec<u64> = (0..l).map(|_| rng.gen_range(0..packer.space())).collect();
        keys.sort_unstable();
        keys.dedup();
        Ok(ShiftSet {
            packer,
            keys: Some(keys),
        })
    }

    fn contains(&self, w: &[u64]) -> bool {
        match &self.keys {
            None => true,
            Some(keys) => keys.binary_search(&self.packer.pack(w)).is_ok(),
        }
    }
}

fn sub_into(g: GroupSpec, a: &[u64], b: &[u64], out: &mut [u64]) {
    for ((o, &x), &y) in out.iter_mut().zip(a).zip(b) {
        *o = g.sub_raw(x, y);
    }
}

fn add_into(g: GroupSpec, a: &[u64], b: &[u64], out: &mut [u64]) {
    for ((o, &x), &y) in out.iter_mut().zip(a).zip(b) {
        *o = g.add_raw(x, y);
    }
}

/// Encoder for one source: the first inner codeword c (in sorted order)
/// with x - c among the shifts; returns the shift.
fn find_cover(g: GroupSpec, x: &[u64], inner: &[&[u64]], shifts: &ShiftSet, scratch: &mut [u64]) -> bool {
    for c in inner {
        sub_into(g, x, c, scratch);
        if shifts.contains(scratch) {
            return true;
        }
    }
    false
}

/// Draws (x1, x2) from the source, covers each with its UQGC and decodes
/// the sum from the two shifts.
pub fn run_dsc(cfg: &DscConfig) -> Result<ExperimentResult> {
    check_trials(cfg.trials)?;
    let start = Instant::now();
    let design = &cfg.design;
    let g = design.group();
    if g != cfg.problem.group() {
        return Err(Error::GroupMismatch {
            left: g.order(),
            right: cfg.problem.group().order(),
        });
    }
    let n = design.n;
    let q = g.order() as usize;
    let (c1, c2) = design.codebooks(split_seed(cfg.seed, STREAM_CODEBOOK, 0), true)?;
    let inner1 = c1.materialize()?;
    let inner2 = c2.materialize()?;
    let sum = c1.sumset(&c2, 1)?.materialize()?;
    let shifts1 = ShiftSet::new(g, n, cfg.shifts[0], split_seed(cfg.seed, STREAM_SHIFTS, 1))?;
    let shifts2 = ShiftSet::new(g, n, cfg.shifts[1], split_seed(cfg.seed, STREAM_SHIFTS, 2))?;
    let inner1: Vec<&[u64]> = inner1.iter().collect();
    let inner2: Vec<&[u64]> = inner2.iter().collect();
    let sum_words: Vec<&[u64]> = sum.iter().collect();

    let joint = cfg.problem.joint();
    let source = WeightedIndex::new(joint.probs()).map_err(|e| Error::InvalidPmf(e.to_string()))?;
    let source_test = JointTypicalityTest::new(joint, n, design.params)?;
    let z_test = JointTypicalityTest::marginal(&cfg.problem.sum_pmf(), n, design.params);

    let counts = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(split_seed(cfg.seed, STREAM_TRIAL, t));
            let mut x1 = vec![0u64; n];
            let mut x2 = vec![0u64; n];
            for i in 0..n {
                let cell = source.sample(&mut rng);
                x1[i] = (cell / q) as u64;
                x2[i] = (cell % q) as u64;
            }
            let mut scratch = vec![0usize; q * q];
            if !source_test.check(&x1, Some(&x2), &mut scratch) {
                return Counts {
                    skipped: 1,
                    ..Counts::default()
                };
            }
            let mut t1 = vec![0u64; n];
            let mut t2 = vec![0u64; n];
            if !find_cover(g, &x1, &inner1, &shifts1, &mut t1) || !find_cover(g, &x2, &inner2, &shifts2, &mut t2) {
                return Counts {
                    encoder_failures: 1,
                    ..Counts::default()
                };
            }
            let mut base = vec![0u64; n];
            add_into(g, &t1, &t2, &mut base);
            let mut z = vec![0u64; n];
            add_into(g, &x1, &x2, &mut z);
            let truth = z_test.check(&z, None, &mut scratch);
            let mut candidate = vec![0u64; n];
            let mut others = 0u64;
            for c in &sum_words {
                add_into(g, c, &base, &mut candidate);
                if candidate != z && z_test.check(&candidate, None, &mut scratch) {
                    others += 1;
                    break;
                }
            }
            if !truth {
                Counts {
                    true_atypical: 1,
                    ..Counts::default()
                }
            } else if others > 0 {
                Counts {
                    ambiguous: 1,
                    ..Counts::default()
                }
            } else {
                Counts {
                    successes: 1,
                    ..Counts::default()
                }
            }
        })
        .reduce(Counts::default, Counts::add);

    let rates = cfg
        .shifts
        .map(|l| (l.min(WordPacker::new(g, n).map(|p| p.space()).unwrap_or(l)) as f64).log2() / n as f64);
    Ok(ExperimentResult::from_counts(
        ExperimentKind::Dsc,
        design,
        cfg.seed,
        rates,
        Some(cfg.shifts),
        sum.len() as u64,
        cfg.trials,
        counts,
        start.elapsed(),
    ))
}

/// Images u·G of every enumerated domain word, per layer.
fn layer_images(cb: &QgcCodebook) -> Result<Vec<Vec<Vec<u64>>>> {
    let n = cb.n();
    cb.domains()
        .iter()
        .zip(cb.matrices())
        .map(|(d, g)| {
            let words = d.words()?;
            if words.is_empty() {
                return Err(Error::EmptyTypicalSet {
                    k: d.len(),
                    epsilon: cb.spec().params().epsilon(),
                });
            }
            Ok(words
                .iter()
                .map(|w| {
                    let mut out = vec![0u64; n];
                    g.accumulate(w, &mut out);
                    out
                })
                .collect())
        })
        .collect()
}

/// Sends uniformly chosen codewords of two QGCs through the channel and
/// decodes their sum from the output.
pub fn run_mac(cfg: &MacConfig) -> Result<ExperimentResult> {
    check_trials(cfg.trials)?;
    let start = Instant::now();
    let design = &cfg.design;
    let g = design.group();
    if g != cfg.problem.group() {
        return Err(Error::GroupMismatch {
            left: g.order(),
            right: cfg.problem.group().order(),
        });
    }
    let n = design.n;
    let (c1, c2) = design.codebooks(split_seed(cfg.seed, STREAM_CODEBOOK, 0), false)?;
    let images1 = layer_images(&c1)?;
    let images2 = layer_images(&c2)?;
    let sum = c1.sumset(&c2, 1)?.materialize()?;
    let sum_words: Vec<&[u64]> = sum.iter().collect();

    let zy = cfg.problem.sum_output_joint();
    let outputs = cfg.problem.outputs();
    let test = JointTypicalityTest::new(&zy, n, design.params)?;
    let rows = cfg
        .problem
        .channel()
        .iter()
        .map(|row| WeightedIndex::new(row).map_err(|e| Error::InvalidPmf(e.to_string())))
        .collect::<Result<Vec<_>>>()?;
    let q = g.order() as usize;

    let encode = |images: &[Vec<Vec<u64>>], b: &[u64], rng: &mut ChaCha8Rng| {
        let mut x = b.to_vec();
        for layer in images {
            let img = &layer[rng.gen_range(0..layer.len())];
            for (o, &v) in x.iter_mut().zip(img) {
                *o = g.add_raw(*o, v);
            }
        }
        x
    };

    let counts = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(split_seed(cfg.seed, STREAM_TRIAL, t));
            let x1 = encode(&images1, c1.translation().entries(), &mut rng);
            let x2 = encode(&images2, c2.translation().entries(), &mut rng);
            let mut z = vec![0u64; n];
            add_into(g, &x1, &x2, &mut z);
            let y: Vec<u64> = x1
                .iter()
                .zip(&x2)
                .map(|(&a, &b)| rows[a as usize * q + b as usize].sample(&mut rng) as u64)
                .collect();
            let mut scratch = vec![0usize; q * outputs];
            let truth = test.check(&z, Some(&y), &mut scratch);
            let mut others = 0u64;
            for c in &sum_words {
                if *c != z.as_slice() && test.check(c, Some(&y), &mut scratch) {
                    others += 1;
                    break;
                }
            }
            if !truth {
                Counts {
                    true_atypical: 1,
                    ..Counts::default()
                }
            } else if others > 0 {
                Counts {
                    ambiguous: 1,
                    ..Counts::default()
                }
            } else {
                Counts {
                    successes: 1,
                    ..Counts::default()
                }
            }
        })
        .reduce(Counts::default, Counts::add);

    Ok(ExperimentResult::from_counts(
        ExperimentKind::Mac,
        design,
        cfg.seed,
        design.inner_rates(),
        None,
        sum.len() as u64,
        cfg.trials,
        counts,
        start.elapsed(),
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode")]
pub enum PhiMode {
    Exhaustive,
    MonteCarlo { trials: u64, seed: u64 },
}

/// Law of u·G over uniformly drawn k×n matrices G against the target
/// p^{-n(r-s)}·1{x ∈ H_s^n}, s the depth of u.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhiReport {
    pub group: GroupSpec,
    pub k: usize,
    pub n: usize,
    pub u: Vec<u64>,
    pub s: u32,
    pub samples: u64,
    /// Indexed by the packed word (entry 0 least significant).
    pub distribution: Vec<f64>,
    pub max_deviation: f64,
    /// Exhaustive mode only: every count equals its target exactly.
    pub exact: bool,
}

pub fn verify_phi_distribution(group: GroupSpec, n: usize, u: &GroupVector, mode: PhiMode) -> Result<PhiReport> {
    if u.spec() != group {
        return Err(Error::GroupMismatch {
            left: group.order(),
            right: u.spec().order(),
        });
    }
    let k = u.len();
    if k == 0 || n == 0 {
        return Err(Error::InvalidParameter("k and n must be positive".into()));
    }
    let packer = WordPacker::new(group, n)?;
    if packer.space() > ENUMERATION_CAP {
        return Err(Error::BudgetExceeded {
            what: format!("distribution over words of length n = {n} over {group}"),
            needed: packer.space() as f64,
            cap: ENUMERATION_CAP,
        });
    }
    let q = group.order();
    let s = u.depth();
    let mut counts = vec![0u64; packer.space() as usize];
    let mut entries = vec![0u64; k * n];
    let mut word = vec![0u64; n];
    let mut image = |entries: &[u64], word: &mut [u64]| {
        word.iter_mut().for_each(|w| *w = 0);
        for (i, &ui) in u.entries().iter().enumerate() {
            for (j, w) in word.iter_mut().enumerate() {
                *w = group.add_raw(*w, group.mul_raw(entries[i * n + j], ui));
            }
        }
        counts[packer.pack(word) as usize] += 1;
    };
    let samples = match mode {
        PhiMode::Exhaustive => {
            let total = u32::try_from(k * n)
                .ok()
                .and_then(|e| q.checked_pow(e))
                .filter(|&t| t <= ENUMERATION_CAP)
                .ok_or_else(|| Error::BudgetExceeded {
                    what: format!("all {k}x{n} matrices over {group}"),
                    needed: (q as f64).powi((k * n) as i32),
                    cap: ENUMERATION_CAP,
                })?;
            for _ in 0..total {
                image(&entries, &mut word);
                for e in entries.iter_mut() {
                    *e += 1;
                    if *e < q {
                        break;
                    }
                    *e = 0;
                }
            }
            total
        }
        PhiMode::MonteCarlo { trials, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..trials {
                entries.iter_mut().for_each(|e| *e = rng.gen_range(0..q));
                image(&entries, &mut word);
            }
            trials
        }
    };
    let log_target = (n as u32) * (group.r() - s);
    let target_den = group.p().pow(log_target);
    let mut exact = matches!(mode, PhiMode::Exhaustive);
    let mut max_deviation: f64 = 0.0;
    let mut w = vec![0u64; n];
    let distribution: Vec<f64> = counts
        .iter()
        .enumerate()
        .map(|(key, &c)| {
            packer.unpack_into(key as u64, &mut w);
            let inside = w.iter().all(|&a| group.valuation(a) >= s);
            let target = if inside { 1.0 / target_den as f64 } else { 0.0 };
            let emp = if samples == 0 { 0.0 } else { c as f64 / samples as f64 };
            max_deviation = max_deviation.max((emp - target).abs());
            let exact_here = if inside {
                c as u128 * target_den as u128 == samples as u128
            } else {
                c == 0
            };
            exact &= exact_here;
            emp
        })
        .collect();
    Ok(PhiReport {
        group,
        k,
        n,
        u: u.entries().to_vec(),
        s,
        samples,
        distribution,
        max_deviation,
        exact,
    })
}

/// Either a marginal pmf over the group or a joint p(x, y) with X on the
/// group, conditioned on a fixed y sequence.
#[derive(Clone, Debug, PartialEq)]
pub enum CosetSource {
    Marginal(Pmf),
    Conditional { group: GroupSpec, joint: JointPmf },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CosetCountRow {
    pub k: usize,
    pub set_size: u64,
    pub anchor: Vec<u64>,
    pub count: u64,
    /// log2(count) / k.
    pub exponent: f64,
    /// H(X|[X]_s), or H(X|Y,[X]_s) for the conditional source.
    pub target: f64,
    pub deviation: f64,
    /// H·ε + 2 log2(k + q) / k.
    pub band: f64,
}

/// A y sequence of length k whose letter counts are the largest-remainder
/// rounding of k·p(y), in nondecreasing letter order.
pub fn rounded_type_sequence(py: &[f64], k: usize) -> Vec<u64> {
    let mut counts: Vec<usize> = py.iter().map(|p| (p * k as f64).floor() as usize).collect();
    let mut rest: Vec<(f64, usize)> = py
        .iter()
        .enumerate()
        .map(|(b, p)| (p * k as f64 - counts[b] as f64, b))
        .collect();
    rest.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut missing = k - counts.iter().sum::<usize>();
    for (_, b) in rest {
        if missing == 0 {
            break;
        }
        if py[b] > 0.0 {
            counts[b] += 1;
            missing -= 1;
        }
    }
    counts
        .iter()
        .enumerate()
        .flat_map(|(b, &c)| std::iter::repeat_n(b as u64, c))
        .collect()
}

pub fn verify_coset_counts(
    source: &CosetSource,
    ks: &[usize],
    s: u32,
    params: TypicalityParams,
) -> Result<Vec<CosetCountRow>> {
    let (group, target) = match source {
        CosetSource::Marginal(p) => (p.group(), p.cond_entropy_given_quotient(s)?),
        CosetSource::Conditional { group, joint } => (*group, joint.joint_cond_entropy(0, &[1], Some((*group, s)))?),
    };
    group.check_index(s)?;
    let q = group.order() as f64;
    ks.iter()
        .map(|&k| {
            let (set, h) = match source {
                CosetSource::Marginal(p) => (TypicalSet::enumerate(p, k, params, ENUMERATION_CAP)?, p.entropy()),
                CosetSource::Conditional { joint, .. } => {
                    let py = joint.marginal(&[1])?;
                    let y = rounded_type_sequence(py.probs(), k);
                    (
                        TypicalSet::conditional(joint, &y, params, ENUMERATION_CAP)?,
                        joint.joint_cond_entropy(0, &[1], None)?,
                    )
                }
            };
            let set_size = set.count()? as u64;
            let (anchor, count) = if set_size == 0 {
                (Vec::new(), 0)
            } else {
                let anchor = set.word(0)?.to_vec();
                let count = set.coset_intersection_count(group, &anchor, s)?;
                (anchor, count)
            };
            let exponent = if count == 0 {
                0.0
            } else {
                (count as f64).log2() / k as f64
            };
            Ok(CosetCountRow {
                k,
                set_size,
                anchor,
                count,
                exponent,
                target,
                deviation: (exponent - target).abs(),
                band: h * params.epsilon() + 2.0 * (k as f64 + q).log2() / k as f64,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z4() -> GroupSpec {
        GroupSpec::z4()
    }

    fn eps(e: f64) -> TypicalityParams {
        TypicalityParams::new(e).unwrap()
    }

    #[test]
    fn seeds_split_apart() {
        let a: Vec<u64> = (0..100).map(|i| split_seed(7, STREAM_TRIAL, i)).collect();
        let mut b = a.clone();
        b.sort_unstable();
        b.dedup();
        assert_eq!(b.len(), 100);
        assert_ne!(split_seed(7, STREAM_TRIAL, 0), split_seed(7, STREAM_CODEBOOK, 0));
        assert_ne!(split_seed(7, STREAM_TRIAL, 0), split_seed(8, STREAM_TRIAL, 0));
    }

    #[test]
    fn wilson_examples() {
        let (lo, hi) = wilson_interval(0, 100);
        assert_eq!(lo, 0.0);
        assert!((hi - 0.036_995).abs() < 1e-5);
        let (lo, hi) = wilson_interval(50, 100);
        assert!((lo - 0.403_832).abs() < 1e-5 && (hi - 0.596_168).abs() < 1e-5);
        assert_eq!(wilson_interval(0, 0), (0.0, 1.0));
    }

    #[test]
    fn phi_examples() {
        let g = z4();
        let r = verify_phi_distribution(g, 1, &GroupVector::new(g, vec![2, 2]).unwrap(), PhiMode::Exhaustive).unwrap();
        assert_eq!(r.s, 1);
        assert_eq!(r.samples, 16);
        assert_eq!(r.distribution, vec![0.5, 0.0, 0.5, 0.0]);
        assert!(r.exact && r.max_deviation == 0.0);

        let r = verify_phi_distribution(g, 1, &GroupVector::new(g, vec![1, 0]).unwrap(), PhiMode::Exhaustive).unwrap();
        assert_eq!(r.s, 0);
        assert_eq!(r.distribution, vec![0.25; 4]);

        let r = verify_phi_distribution(g, 2, &GroupVector::zeros(g, 2), PhiMode::Exhaustive).unwrap();
        assert_eq!(r.s, 2);
        assert_eq!(r.distribution[0], 1.0);
        assert!(r.exact);

        let r = verify_phi_distribution(
            g,
            2,
            &GroupVector::new(g, vec![3, 2]).unwrap(),
            PhiMode::MonteCarlo { trials: 4000, seed: 1 },
        )
        .unwrap();
        assert!(!r.exact);
        assert!(r.max_deviation < 0.03);

        let too_big = GroupVector::zeros(g, 7);
        assert!(matches!(
            verify_phi_distribution(g, 2, &too_big, PhiMode::Exhaustive),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn coset_examples() {
        let g = z4();
        let rows = verify_coset_counts(&CosetSource::Marginal(Pmf::uniform(g)), &[4], 2, eps(0.1)).unwrap();
        assert_eq!(rows[0].count, 1);
        assert_eq!(rows[0].exponent, 0.0);
        assert_eq!(rows[0].target, 0.0);

        let rows = verify_coset_counts(&CosetSource::Marginal(Pmf::point(g, 0).unwrap()), &[5], 1, eps(0.1)).unwrap();
        assert_eq!(rows[0].anchor, vec![0; 5]);
        assert_eq!(rows[0].count, 1);
    }

    #[test]
    fn coset_count_uniform_k8_matches_brute_force() {
        // Brute force over Z_4^8: words with exactly two of each letter and
        // the anchor's parity pattern.
        let g = z4();
        let rows = verify_coset_counts(&CosetSource::Marginal(Pmf::uniform(g)), &[8], 1, eps(0.1)).unwrap();
        let row = &rows[0];
        let mut size = 0u64;
        let mut count = 0u64;
        for key in 0..(1u64 << 16) {
            let w: Vec<u64> = (0..8).map(|i| (key >> (2 * i)) & 3).collect();
            if (0..4).all(|a| w.iter().filter(|&&x| x == a).count() == 2) {
                size += 1;
                if w.iter().zip(&row.anchor).all(|(a, b)| a % 2 == b % 2) {
                    count += 1;
                }
            }
        }
        assert_eq!(row.set_size, size);
        assert_eq!(row.count, count);
        assert_eq!(count, 36);
        assert!((row.exponent - 36f64.log2() / 8.0).abs() < 1e-12);
        assert!((row.target - 1.0).abs() < 1e-12);
    }

    #[test]
    fn conditional_coset_counts() {
        let g = z4();
        let noise = Pmf::table1(g, 0.6).unwrap();
        let mac = MacProblem::additive(&noise).unwrap();
        let joint = mac.sum_output_joint();
        let rows = verify_coset_counts(&CosetSource::Conditional { group: g, joint }, &[6], 0, eps(3.0)).unwrap();
        assert!(rows[0].set_size > 0);
        assert_eq!(rows[0].count, rows[0].set_size);
    }

    #[test]
    fn rounded_types() {
        assert_eq!(rounded_type_sequence(&[0.5, 0.25, 0.25, 0.0], 4), vec![0, 0, 1, 2]);
        assert_eq!(rounded_type_sequence(&[0.1, 0.9], 3), vec![0, 1, 1, 1][1..].to_vec());
    }

    fn full_rate_dsc(n: usize, trials: u64, seed: u64) -> DscConfig {
        let g = z4();
        let problem = DscProblem::table1(0.6).unwrap();
        let aux = AuxiliaryChoice::symmetric(Pmf::point(g, 0).unwrap());
        let design = CodeDesign::from_total(n, 2, aux, eps(3.0)).unwrap();
        let space = 4u64.pow(n as u32);
        DscConfig {
            problem,
            design,
            shifts: [space, space],
            trials,
            seed,
        }
    }

    #[test]
    fn full_rate_dsc_is_error_free() {
        let r = run_dsc(&full_rate_dsc(3, 300, 5)).unwrap();
        assert_eq!(r.encoder_failures, 0);
        assert_eq!(r.decoder_errors, 0);
        assert!(r.evaluated > 0);
        assert!((r.rates[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn zero_sum_source_decodes() {
        let g = z4();
        let problem = DscProblem::with_sum_noise(&Pmf::point(g, 0).unwrap()).unwrap();
        let aux = AuxiliaryChoice::bernoulli(g, 0.25).unwrap();
        let design = CodeDesign::from_total(4, 4, aux, eps(0.5)).unwrap();
        let cfg = DscConfig {
            problem,
            design,
            shifts: [64, 64],
            trials: 400,
            seed: 9,
        };
        let r = run_dsc(&cfg).unwrap();
        assert_eq!(r.decoder_errors, 0);
        assert!(r.evaluated > 0);
    }

    #[test]
    fn noiseless_mac_is_error_free() {
        let g = z4();
        let design = CodeDesign::from_total(5, 4, AuxiliaryChoice::bernoulli(g, 0.3).unwrap(), eps(3.0)).unwrap();
        let cfg = MacConfig {
            problem: MacProblem::noiseless(g).unwrap(),
            design,
            trials: 300,
            seed: 2,
        };
        let r = run_mac(&cfg).unwrap();
        assert_eq!(r.decoder_errors, 0);
        assert_eq!(r.skipped_atypical, 0);
    }

    #[test]
    fn pure_noise_mac_fails_half_the_time() {
        let g = z4();
        let design = CodeDesign::from_total(4, 3, AuxiliaryChoice::bernoulli(g, 0.3).unwrap(), eps(3.0)).unwrap();
        let cfg = MacConfig {
            problem: MacProblem::pure_noise(g).unwrap(),
            design,
            trials: 500,
            seed: 3,
        };
        let r = run_mac(&cfg).unwrap();
        assert!(r.sum_codebook_size >= 2);
        assert!(r.decoder_error_rate >= 0.5);
    }

    #[test]
    fn runs_are_deterministic() {
        let a = run_dsc(&full_rate_dsc(3, 50, 1)).unwrap();
        let b = run_dsc(&full_rate_dsc(3, 50, 1)).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let mut cfg = full_rate_dsc(3, 50, 1);
        cfg.trials = 0;
        assert!(run_dsc(&cfg).is_err());
    }

    #[test]
    fn design_helpers() {
        let g = z4();
        let aux = crate::rate_regions::reference_aux(g);
        let mac = MacProblem::table1(0.6).unwrap();
        let d = mac_design(&mac, &aux, 12, 0.1, eps(1.0)).unwrap();
        let bound = mac_region(&mac, &aux).unwrap().rates[0];
        assert!(d.inner_rates()[0] <= 0.9 * bound + 1e-12);
        assert!(d.total_k() >= 12);

        let dsc = DscProblem::table1(0.6).unwrap();
        let (d, l) = dsc_design(&dsc, &aux, 8, 0.1, eps(1.0)).unwrap();
        assert!(d.total_k() >= 1);
        let bound = dsc_region(&dsc, &aux).unwrap().rates[0];
        assert_eq!(l[0], shift_count(g, 8, 1.1 * bound));
        assert_eq!(shift_count(g, 3, 2.0), 64);
        assert_eq!(shift_count(g, 3, 0.0), 1);

        let split = CodeDesign::from_total(
            4,
            7,
            AuxiliaryChoice::new(vec![0.5, 0.5], vec![Pmf::uniform(g); 2], vec![Pmf::uniform(g); 2]).unwrap(),
            eps(1.0),
        )
        .unwrap();
        assert_eq!(split.total_k(), 7);
    }
}
