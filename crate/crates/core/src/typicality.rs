//! Robust (letter-frequency) typicality.
//!
//! A sequence x of length k is ε-typical for p when every letter a satisfies
//! |N(a|x)/k - p(a)| <= ε·p(a); letters with p(a) = 0 never occur. Joint and
//! conditional typicality apply the same rule to the pair alphabet.
//!
//! The rule only constrains integer counts, so each letter gets an inclusive
//! count window [lo, hi] and everything below is phrased in terms of those
//! windows.

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::GroupSpec;
use crate::prob::{JointPmf, Pmf};

/// Default cap on explicitly stored typical sequences.
pub const ENUMERATION_CAP: u64 = 1 << 24;

/// Draw cap for rejection sampling.
pub const REJECTION_CAP: u64 = 1_000_000;

// Absorbs rounding in k·p(a)(1 ± ε) when the product is an integer.
const COUNT_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TypicalityParams {
    epsilon: f64,
}

impl TypicalityParams {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "typicality epsilon must be positive, got {epsilon}"
            )));
        }
        Ok(TypicalityParams { epsilon })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

impl Default for TypicalityParams {
    fn default() -> Self {
        TypicalityParams { epsilon: 0.1 }
    }
}

/// Inclusive per-letter count windows for length-k sequences.
#[derive(Clone, Debug, PartialEq)]
pub struct CountWindows {
    len: usize,
    lo: Vec<usize>,
    hi: Vec<usize>,
}

impl CountWindows {
    pub fn new(probs: &[f64], len: usize, params: TypicalityParams) -> Self {
        let eps = params.epsilon;
        let k = len as f64;
        let mut lo = Vec::with_capacity(probs.len());
        let mut hi = Vec::with_capacity(probs.len());
        for &p in probs {
            if p <= 0.0 {
                lo.push(0);
                hi.push(0);
                continue;
            }
            let low = (k * p * (1.0 - eps) - COUNT_TOL).ceil().max(0.0);
            let high = (k * p * (1.0 + eps) + COUNT_TOL).floor().min(k);
            lo.push(low as usize);
            hi.push(high as usize);
        }
        CountWindows { len, lo, hi }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn lo(&self) -> &[usize] {
        &self.lo
    }

    pub fn hi(&self) -> &[usize] {
        &self.hi
    }

    pub fn admits(&self, counts: &[usize]) -> bool {
        counts
            .iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(c, (lo, hi))| lo <= c && c <= hi)
    }

    /// Whether some composition of `len` fits inside every window.
    pub fn feasible(&self) -> bool {
        let lo: usize = self.lo.iter().sum();
        let hi: usize = self.hi.iter().sum();
        lo <= self.len && self.len <= hi && self.lo.iter().zip(&self.hi).all(|(l, h)| l <= h)
    }

    /// Number of length-`len` sequences whose composition fits the windows.
    pub fn sequence_count(&self) -> f64 {
        composition_count(&self.lo, &self.hi, self.len)
    }
}

/// Σ over compositions c with lo <= c <= hi and Σc = len of len!/Π c_a!.
fn composition_count(lo: &[usize], hi: &[usize], len: usize) -> f64 {
    // ways[j]: arrangements of j positions using the letters processed so far.
    let mut ways = vec![0.0f64; len + 1];
    ways[0] = 1.0;
    for (l, h) in lo.iter().zip(hi) {
        let mut next = vec![0.0f64; len + 1];
        for (j, &w) in ways.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for c in *l..=(*h).min(len - j) {
                next[j + c] += w * binomial(j + c, c);
            }
        }
        ways = next;
    }
    ways[len]
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64).round()
}

fn letter_counts(x: &[u64], alphabet: usize) -> Option<Vec<usize>> {
    let mut counts = vec![0usize; alphabet];
    for &a in x {
        *counts.get_mut(a as usize)? += 1;
    }
    Some(counts)
}

/// Whether x is ε-typical for p.
pub fn is_typical(x: &[u64], p: &Pmf, params: TypicalityParams) -> bool {
    match letter_counts(x, p.probs().len()) {
        Some(counts) => CountWindows::new(p.probs(), x.len(), params).admits(&counts),
        None => false,
    }
}

/// Whether (x, y) is jointly ε-typical for a two-axis joint p(x, y).
pub fn is_jointly_typical(x: &[u64], y: &[u64], joint: &JointPmf, params: TypicalityParams) -> bool {
    let dims = joint.dims();
    if dims.len() != 2 || x.len() != y.len() {
        return false;
    }
    let mut counts = vec![0usize; dims[0] * dims[1]];
    for (&a, &b) in x.iter().zip(y) {
        if a as usize >= dims[0] || b as usize >= dims[1] {
            return false;
        }
        counts[a as usize * dims[1] + b as usize] += 1;
    }
    CountWindows::new(joint.probs(), x.len(), params).admits(&counts)
}

/// Precomputed joint-typicality test against a fixed pmf and length.
#[derive(Clone, Debug)]
pub struct JointTypicalityTest {
    cols: usize,
    windows: CountWindows,
}

impl JointTypicalityTest {
    pub fn new(joint: &JointPmf, len: usize, params: TypicalityParams) -> Result<Self> {
        if joint.num_axes() != 2 {
            return Err(Error::Dimension("joint typicality needs a two-axis pmf".into()));
        }
        Ok(JointTypicalityTest {
            cols: joint.dims()[1],
            windows: CountWindows::new(joint.probs(), len, params),
        })
    }

    /// Single-sequence test; `joint` is then a one-axis pmf.
    pub fn marginal(p: &Pmf, len: usize, params: TypicalityParams) -> Self {
        JointTypicalityTest {
            cols: 1,
            windows: CountWindows::new(p.probs(), len, params),
        }
    }

    /// `scratch` must have one slot per cell; it is cleared here.
    pub fn check(&self, x: &[u64], y: Option<&[u64]>, scratch: &mut [usize]) -> bool {
        scratch.iter_mut().for_each(|c| *c = 0);
        match y {
            Some(y) => {
                for (&a, &b) in x.iter().zip(y) {
                    scratch[a as usize * self.cols + b as usize] += 1;
                }
            }
            None => {
                for &a in x {
                    scratch[a as usize] += 1;
                }
            }
        }
        self.windows.admits(scratch)
    }

    pub fn cells(&self) -> usize {
        self.windows.lo.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
enum SetKind {
    Marginal(Pmf),
    /// {x : (x, y) jointly typical} for the stored y.
    Conditional {
        joint: JointPmf,
        given: Vec<u64>,
    },
}

/// A typical set of fixed length: either explicitly enumerated (sorted
/// lexicographically, stored flat) or membership-only.
#[derive(Clone, Debug, PartialEq)]
pub struct TypicalSet {
    kind: SetKind,
    len: usize,
    alphabet: usize,
    params: TypicalityParams,
    size: f64,
    words: Option<Vec<u64>>,
}

impl TypicalSet {
    /// Enumerates when the set holds at most [`ENUMERATION_CAP`] sequences,
    /// otherwise returns a membership-only handle.
    pub fn new(p: &Pmf, len: usize, params: TypicalityParams) -> Self {
        let windows = CountWindows::new(p.probs(), len, params);
        let size = windows.sequence_count();
        let alphabet = p.probs().len();
        let words = (size <= ENUMERATION_CAP as f64)
            .then(|| enumerate_words(&[len], &vec![0usize; len], alphabet, &windows.lo, &windows.hi));
        TypicalSet {
            kind: SetKind::Marginal(p.clone()),
            len,
            alphabet,
            params,
            size,
            words,
        }
    }

    /// Explicit enumeration; fails when the set exceeds `cap` sequences.
    pub fn enumerate(p: &Pmf, len: usize, params: TypicalityParams, cap: u64) -> Result<Self> {
        let windows = CountWindows::new(p.probs(), len, params);
        let size = windows.sequence_count();
        if size > cap as f64 {
            return Err(Error::BudgetExceeded {
                what: format!("typical set of length {len} (use sampling instead)"),
                needed: size,
                cap,
            });
        }
        let alphabet = p.probs().len();
        Ok(TypicalSet {
            kind: SetKind::Marginal(p.clone()),
            len,
            alphabet,
            params,
            size,
            words: Some(enumerate_words(
                &[len],
                &vec![0usize; len],
                alphabet,
                &windows.lo,
                &windows.hi,
            )),
        })
    }

    /// The conditional typical set A_ε(X | y) for a two-axis joint p(x, y).
    pub fn conditional(joint: &JointPmf, given: &[u64], params: TypicalityParams, cap: u64) -> Result<Self> {
        let dims = joint.dims();
        if dims.len() != 2 {
            return Err(Error::Dimension("conditional typical sets need a two-axis pmf".into()));
        }
        let (xs, ys) = (dims[0], dims[1]);
        if given.iter().any(|&b| b as usize >= ys) {
            return Err(Error::Dimension("conditioning sequence outside the y alphabet".into()));
        }
        let len = given.len();
        let windows = CountWindows::new(joint.probs(), len, params);
        // Pair counts for different y letters are independent, so the count
        // factorises over the y classes.
        let mut class_len = vec![0usize; ys];
        for &b in given {
            class_len[b as usize] += 1;
        }
        let mut size = 1.0;
        for (b, &nb) in class_len.iter().enumerate() {
            let lo: Vec<usize> = (0..xs).map(|a| windows.lo[a * ys + b]).collect();
            let hi: Vec<usize> = (0..xs).map(|a| windows.hi[a * ys + b]).collect();
            size *= composition_count(&lo, &hi, nb);
        }
        if size > cap as f64 {
            return Err(Error::BudgetExceeded {
                what: format!("conditional typical set of length {len}"),
                needed: size,
                cap,
            });
        }
        let classes: Vec<usize> = given.iter().map(|&b| b as usize).collect();
        // Re-index the pair windows as class-major so the enumerator can
        // address cell (class, letter) as class * xs + letter.
        let mut lo = vec![0; xs * ys];
        let mut hi = vec![0; xs * ys];
        for a in 0..xs {
            for b in 0..ys {
                lo[b * xs + a] = windows.lo[a * ys + b];
                hi[b * xs + a] = windows.hi[a * ys + b];
            }
        }
        let words = enumerate_words(&class_len, &classes, xs, &lo, &hi);
        Ok(TypicalSet {
            kind: SetKind::Conditional {
                joint: joint.clone(),
                given: given.to_vec(),
            },
            len,
            alphabet: xs,
            params,
            size,
            words: Some(words),
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0.0
    }

    pub fn params(&self) -> TypicalityParams {
        self.params
    }

    /// Exact number of sequences in the set.
    pub fn size(&self) -> f64 {
        self.size
    }

    pub fn is_enumerated(&self) -> bool {
        self.words.is_some()
    }

    pub fn pmf(&self) -> Option<&Pmf> {
        match &self.kind {
            SetKind::Marginal(p) => Some(p),
            SetKind::Conditional { .. } => None,
        }
    }

    pub fn contains(&self, x: &[u64]) -> bool {
        if x.len() != self.len {
            return false;
        }
        match &self.kind {
            SetKind::Marginal(p) => is_typical(x, p, self.params),
            SetKind::Conditional { joint, given } => is_jointly_typical(x, given, joint, self.params),
        }
    }

    fn flat(&self) -> Result<&[u64]> {
        self.words.as_deref().ok_or(Error::NotEnumerated(self.size))
    }

    pub fn count(&self) -> Result<usize> {
        Ok(if self.len == 0 {
            self.size as usize
        } else {
            self.flat()?.len() / self.len
        })
    }

    pub fn word(&self, i: usize) -> Result<&[u64]> {
        Ok(&self.flat()?[i * self.len..(i + 1) * self.len])
    }

    /// Enumerated words in lexicographic order.
    pub fn words(&self) -> Result<impl ExactSizeIterator<Item = &[u64]> + '_> {
        let flat = self.flat()?;
        let len = self.len.max(1);
        Ok(flat.chunks_exact(len))
    }

    /// Number of x in the set with x - anchor in H_s^k, i.e. [x]_s = [anchor]_s
    /// entrywise.
    pub fn coset_intersection_count(&self, group: GroupSpec, anchor: &[u64], s: u32) -> Result<u64> {
        if anchor.len() != self.len {
            return Err(Error::Dimension(format!(
                "anchor of length {} for sequences of length {}",
                anchor.len(),
                self.len
            )));
        }
        if group.order() as usize != self.alphabet {
            return Err(Error::GroupMismatch {
                left: group.order(),
                right: self.alphabet as u64,
            });
        }
        let m = group.p_pow(s)?;
        let anchor_q: Vec<u64> = anchor.iter().map(|a| a % m).collect();
        Ok(self
            .words()?
            .filter(|w| w.iter().zip(&anchor_q).all(|(a, t)| a % m == *t))
            .count() as u64)
    }
}

/// Depth-first enumeration in lexicographic order. Position i belongs to class
/// `classes[i]`; cell (class c, letter a) has count window
/// [lo[c·alphabet + a], hi[c·alphabet + a]].
fn enumerate_words(class_len: &[usize], classes: &[usize], alphabet: usize, lo: &[usize], hi: &[usize]) -> Vec<u64> {
    let len = classes.len();
    let n_classes = class_len.len();
    // Quick exit when some class cannot be completed at all.
    for c in 0..n_classes {
        let cell = |a: usize| c * alphabet + a;
        let need: usize = (0..alphabet).map(|a| lo[cell(a)]).sum();
        let room: usize = (0..alphabet).map(|a| hi[cell(a)]).sum();
        if need > class_len[c] || room < class_len[c] {
            return Vec::new();
        }
    }
    struct State<'a> {
        classes: &'a [usize],
        alphabet: usize,
        lo: &'a [usize],
        hi: &'a [usize],
        counts: Vec<usize>,
        remaining: Vec<usize>,
        // Outstanding lower-bound deficit per class.
        deficit: Vec<usize>,
        word: Vec<u64>,
        out: Vec<u64>,
    }
    fn go(st: &mut State<'_>, pos: usize) {
        if pos == st.classes.len() {
            st.out.extend_from_slice(&st.word);
            return;
        }
        let c = st.classes[pos];
        for a in 0..st.alphabet {
            let cell = c * st.alphabet + a;
            if st.counts[cell] >= st.hi[cell] {
                continue;
            }
            let below = st.counts[cell] < st.lo[cell];
            let deficit_after = st.deficit[c] - usize::from(below);
            if deficit_after > st.remaining[c] - 1 {
                continue;
            }
            st.counts[cell] += 1;
            st.remaining[c] -= 1;
            st.deficit[c] = deficit_after;
            st.word[pos] = a as u64;
            go(st, pos + 1);
            st.deficit[c] += usize::from(below);
            st.remaining[c] += 1;
            st.counts[cell] -= 1;
        }
    }
    let deficit = (0..n_classes)
        .map(|c| (0..alphabet).map(|a| lo[c * alphabet + a]).sum())
        .collect();
    let mut st = State {
        classes,
        alphabet,
        lo,
        hi,
        counts: vec![0; n_classes * alphabet],
        remaining: class_len.to_vec(),
        deficit,
        word: vec![0; len],
        out: Vec::new(),
    };
    go(&mut st, 0);
    st.out
}

/// Draws i.i.d. sequences from p until one is typical.
pub fn sample_typical<R: Rng + ?Sized>(p: &Pmf, len: usize, params: TypicalityParams, rng: &mut R) -> Result<Vec<u64>> {
    let windows = CountWindows::new(p.probs(), len, params);
    if !windows.feasible() {
        return Err(Error::EmptyTypicalSet {
            k: len,
            epsilon: params.epsilon,
        });
    }
    let dist = WeightedIndex::new(p.probs()).map_err(|e| Error::InvalidPmf(e.to_string()))?;
    let mut counts = vec![0usize; p.probs().len()];
    let mut word = vec![0u64; len];
    for _ in 0..REJECTION_CAP {
        counts.iter_mut().for_each(|c| *c = 0);
        for w in word.iter_mut() {
            let a = dist.sample(rng);
            counts[a] += 1;
            *w = a as u64;
        }
        if windows.admits(&counts) {
            return Ok(word);
        }
    }
    Err(Error::RejectionCap(REJECTION_CAP))
}
