//! Quasi group codes and their unionized variant.
//!
//! An (n, m, k_1..k_m) QGC is the image
//! { Σ_i u_i·G_i + b : u_i ∈ A_ε^{(k_i)}(U_i) } of a product of typical sets
//! under an affine map. A UQGC is a union of shifts C_in + t(j), j = 1..l, of
//! an inner QGC.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{GroupMatrix, GroupSpec, GroupVector};
use crate::prob::{LayeredVariable, Pmf};
use crate::typicality::{TypicalSet, TypicalityParams, ENUMERATION_CAP};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LayerSpec {
    pub k: usize,
    pub pmf: Pmf,
    /// Per-layer override of the code-wide typicality parameter.
    pub epsilon: Option<f64>,
}

impl LayerSpec {
    pub fn new(k: usize, pmf: Pmf) -> Self {
        LayerSpec { k, pmf, epsilon: None }
    }
}

/// Parameters of an (n, m, k_1, ..., k_m) QGC.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QgcSpec {
    group: GroupSpec,
    n: usize,
    layers: Vec<LayerSpec>,
    params: TypicalityParams,
}

impl QgcSpec {
    pub fn new(group: GroupSpec, n: usize, layers: Vec<LayerSpec>, params: TypicalityParams) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("block length n must be positive".into()));
        }
        if layers.is_empty() {
            return Err(Error::InvalidParameter("a QGC needs at least one layer".into()));
        }
        for (i, layer) in layers.iter().enumerate() {
            if layer.k == 0 {
                return Err(Error::InvalidParameter(format!("layer {i} has k = 0")));
            }
            if layer.pmf.group() != group {
                return Err(Error::GroupMismatch {
                    left: group.order(),
                    right: layer.pmf.group().order(),
                });
            }
            if let Some(e) = layer.epsilon {
                TypicalityParams::new(e)?;
            }
        }
        Ok(QgcSpec {
            group,
            n,
            layers,
            params,
        })
    }

    /// A single-layer spec.
    pub fn single(group: GroupSpec, n: usize, k: usize, pmf: Pmf, params: TypicalityParams) -> Result<Self> {
        QgcSpec::new(group, n, vec![LayerSpec::new(k, pmf)], params)
    }

    pub fn group(&self) -> GroupSpec {
        self.group
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn params(&self) -> TypicalityParams {
        self.params
    }

    pub fn layer_params(&self, i: usize) -> TypicalityParams {
        self.layers[i]
            .epsilon
            .and_then(|e| TypicalityParams::new(e).ok())
            .unwrap_or(self.params)
    }

    /// k = Σ k_i.
    pub fn total_k(&self) -> usize {
        self.layers.iter().map(|l| l.k).sum()
    }

    /// The layered variable (U, Q) with P(Q = i) = k_i / k.
    pub fn layered(&self) -> LayeredVariable {
        LayeredVariable::from_dimensions(&self.layers.iter().map(|l| (l.k, l.pmf.clone())).collect::<Vec<_>>())
            .expect("validated at construction")
    }

    /// Σ (k_i / n) H(U_i) = (k/n) H(U|Q).
    pub fn design_rate(&self) -> f64 {
        self.layers
            .iter()
            .map(|l| l.k as f64 / self.n as f64 * l.pmf.entropy())
            .sum()
    }
}

/// Message set of one layer.
#[derive(Clone, Debug, PartialEq)]
pub enum MessageDomain {
    Typical(TypicalSet),
    /// Sorted, duplicate-free words stored flat.
    Explicit {
        len: usize,
        words: Vec<u64>,
    },
}

impl MessageDomain {
    pub fn len(&self) -> usize {
        match self {
            MessageDomain::Typical(t) => t.len(),
            MessageDomain::Explicit { len, .. } => *len,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.size() == 0.0
    }

    /// Number of words (exact, possibly large).
    pub fn size(&self) -> f64 {
        match self {
            MessageDomain::Typical(t) => t.size(),
            MessageDomain::Explicit { len, words } => (words.len() / (*len).max(1)) as f64,
        }
    }

    pub fn contains(&self, w: &[u64]) -> bool {
        match self {
            MessageDomain::Typical(t) => t.contains(w),
            MessageDomain::Explicit { len, words } => {
                w.len() == *len && {
                    let count = words.len() / (*len).max(1);
                    let (mut lo, mut hi) = (0usize, count);
                    while lo < hi {
                        let mid = (lo + hi) / 2;
                        match words[mid * len..(mid + 1) * len].cmp(w) {
                            std::cmp::Ordering::Less => lo = mid + 1,
                            std::cmp::Ordering::Greater => hi = mid,
                            std::cmp::Ordering::Equal => return true,
                        }
                    }
                    false
                }
            }
        }
    }

    pub fn words(&self) -> Result<Vec<&[u64]>> {
        match self {
            MessageDomain::Typical(t) => Ok(t.words()?.collect()),
            MessageDomain::Explicit { len, words } => Ok(words.chunks_exact((*len).max(1)).collect()),
        }
    }

    fn from_words(len: usize, mut list: Vec<Vec<u64>>) -> Self {
        list.sort_unstable();
        list.dedup();
        MessageDomain::Explicit {
            len,
            words: list.concat(),
        }
    }
}

/// A QGC: generator matrices, translation and per-layer message domains.
#[derive(Clone, Debug, PartialEq)]
pub struct QgcCodebook {
    spec: QgcSpec,
    matrices: Vec<GroupMatrix>,
    translation: GroupVector,
    domains: Vec<MessageDomain>,
    seed: Option<u64>,
}

/// Distinct codewords plus the rate comparison.
#[derive(Clone, Debug, PartialEq)]
pub struct Materialized {
    n: usize,
    /// Sorted, duplicate-free, stored flat.
    words: Vec<u64>,
    pub report: RateReport,
}

impl Materialized {
    pub fn len(&self) -> usize {
        self.words.len() / self.n
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[u64]> + '_ {
        self.words.chunks_exact(self.n)
    }

    pub fn to_set(&self) -> HashSet<Vec<u64>> {
        self.iter().map(<[u64]>::to_vec).collect()
    }

    pub fn contains(&self, w: &[u64]) -> bool {
        let words: Vec<&[u64]> = self.iter().collect();
        words.binary_search(&w).is_ok()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    /// Σ (k_i/n) H(U_i).
    pub design_rate: f64,
    /// (1/n) log2 |distinct codewords|.
    pub measured_rate: f64,
    pub messages: u64,
    pub distinct: u64,
    /// Messages that landed on an already produced codeword.
    pub collision_count: u64,
}

fn random_codebook_parts(spec: &QgcSpec, rng: &mut ChaCha8Rng) -> (Vec<GroupMatrix>, GroupVector) {
    let matrices = spec
        .layers
        .iter()
        .map(|l| GroupMatrix::random(spec.group, l.k, spec.n, rng))
        .collect();
    let translation = GroupVector::random(spec.group, spec.n, rng);
    (matrices, translation)
}

impl QgcCodebook {
    /// Matrices and translation i.i.d. uniform from a seeded generator.
    pub fn build(spec: QgcSpec, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (matrices, translation) = random_codebook_parts(&spec, &mut rng);
        let mut cb = QgcCodebook::from_parts(spec, matrices, translation)?;
        cb.seed = Some(seed);
        Ok(cb)
    }

    /// Shares the matrices of `self` with a fresh translation and layer pmfs;
    /// the layer dimensions must match.
    pub fn with_layers(&self, layers: Vec<Pmf>, translation: GroupVector) -> Result<Self> {
        if layers.len() != self.spec.layers.len() {
            return Err(Error::Dimension("one pmf per layer".into()));
        }
        let new_layers = self
            .spec
            .layers
            .iter()
            .zip(layers)
            .map(|(l, pmf)| LayerSpec {
                k: l.k,
                pmf,
                epsilon: l.epsilon,
            })
            .collect();
        let spec = QgcSpec::new(self.spec.group, self.spec.n, new_layers, self.spec.params)?;
        QgcCodebook::from_parts(spec, self.matrices.clone(), translation)
    }

    pub fn from_parts(spec: QgcSpec, matrices: Vec<GroupMatrix>, translation: GroupVector) -> Result<Self> {
        if matrices.len() != spec.layers.len() {
            return Err(Error::Dimension(format!(
                "{} matrices for {} layers",
                matrices.len(),
                spec.layers.len()
            )));
        }
        for (i, (g, l)) in matrices.iter().zip(&spec.layers).enumerate() {
            if g.spec() != spec.group || g.rows() != l.k || g.cols() != spec.n {
                return Err(Error::Dimension(format!(
                    "matrix {i} is {}x{} over {}, expected {}x{} over {}",
                    g.rows(),
                    g.cols(),
                    g.spec(),
                    l.k,
                    spec.n,
                    spec.group
                )));
            }
        }
        if translation.spec() != spec.group || translation.len() != spec.n {
            return Err(Error::Dimension("translation must have length n".into()));
        }
        let domains = spec
            .layers
            .iter()
            .enumerate()
            .map(|(i, l)| MessageDomain::Typical(TypicalSet::new(&l.pmf, l.k, spec.layer_params(i))))
            .collect();
        Ok(QgcCodebook {
            spec,
            matrices,
            translation,
            domains,
            seed: None,
        })
    }

    pub fn spec(&self) -> &QgcSpec {
        &self.spec
    }

    pub fn group(&self) -> GroupSpec {
        self.spec.group
    }

    pub fn n(&self) -> usize {
        self.spec.n
    }

    pub fn matrices(&self) -> &[GroupMatrix] {
        &self.matrices
    }

    pub fn translation(&self) -> &GroupVector {
        &self.translation
    }

    pub fn domains(&self) -> &[MessageDomain] {
        &self.domains
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Number of message tuples, Π |domain_i|.
    pub fn message_count(&self) -> f64 {
        self.domains.iter().map(MessageDomain::size).product()
    }

    /// Σ u_i·G_i without the translation, written into `out`.
    pub fn phi_into(&self, messages: &[&[u64]], out: &mut [u64]) {
        out.iter_mut().for_each(|o| *o = 0);
        for (u, g) in messages.iter().zip(&self.matrices) {
            g.accumulate(u, out);
        }
    }

    /// Σ u_i·G_i + b for in-domain message words.
    pub fn encode(&self, messages: &[GroupVector]) -> Result<GroupVector> {
        if messages.len() != self.matrices.len() {
            return Err(Error::Dimension(format!(
                "{} message words for {} layers",
                messages.len(),
                self.matrices.len()
            )));
        }
        for (i, (u, d)) in messages.iter().zip(&self.domains).enumerate() {
            if u.spec() != self.spec.group || u.len() != d.len() {
                return Err(Error::Dimension(format!("message word {i} has the wrong shape")));
            }
            if !d.contains(u.entries()) {
                return Err(Error::NotInDomain(i));
            }
        }
        let mut acc = self.translation.clone();
        for (u, g) in messages.iter().zip(&self.matrices) {
            acc = acc.add(&u.vec_mat_mul(g)?)?;
        }
        Ok(acc)
    }

    /// Every codeword, once per message tuple, in mixed-radix message order.
    fn for_each_codeword(&self, cap: u64, mut f: impl FnMut(&[u64])) -> Result<()> {
        let total = self.message_count();
        if total > cap as f64 {
            return Err(Error::BudgetExceeded {
                what: "codebook materialization".into(),
                needed: total,
                cap,
            });
        }
        let n = self.spec.n;
        let q = self.spec.group.order();
        // Precompute u·G for every word of every layer.
        let mut images: Vec<Vec<u64>> = Vec::with_capacity(self.domains.len());
        for (d, g) in self.domains.iter().zip(&self.matrices) {
            let words = d.words()?;
            let mut flat = vec![0u64; words.len() * n];
            for (w, out) in words.iter().zip(flat.chunks_exact_mut(n)) {
                g.accumulate(w, out);
            }
            images.push(flat);
        }
        if images.iter().any(Vec::is_empty) {
            return Ok(());
        }
        let counts: Vec<usize> = images.iter().map(|v| v.len() / n).collect();
        let mut idx = vec![0usize; counts.len()];
        let mut word = vec![0u64; n];
        loop {
            word.copy_from_slice(self.translation.entries());
            for (layer, &i) in idx.iter().enumerate() {
                for (o, &g) in word.iter_mut().zip(&images[layer][i * n..(i + 1) * n]) {
                    *o = (*o + g) % q;
                }
            }
            f(&word);
            let mut layer = counts.len();
            loop {
                if layer == 0 {
                    return Ok(());
                }
                layer -= 1;
                idx[layer] += 1;
                if idx[layer] < counts[layer] {
                    break;
                }
                idx[layer] = 0;
            }
        }
    }

    /// Distinct codewords and the measured-versus-design rate report.
    pub fn materialize(&self) -> Result<Materialized> {
        self.materialize_with_cap(ENUMERATION_CAP)
    }

    pub fn materialize_with_cap(&self, cap: u64) -> Result<Materialized> {
        let n = self.spec.n;
        let mut seen: HashSet<Vec<u64>> = HashSet::new();
        let mut messages = 0u64;
        self.for_each_codeword(cap, |w| {
            messages += 1;
            if !seen.contains(w) {
                seen.insert(w.to_vec());
            }
        })?;
        let mut list: Vec<Vec<u64>> = seen.into_iter().collect();
        list.sort_unstable();
        let distinct = list.len() as u64;
        let measured_rate = if distinct == 0 {
            0.0
        } else {
            (distinct as f64).log2() / n as f64
        };
        Ok(Materialized {
            n,
            words: list.concat(),
            report: RateReport {
                design_rate: self.spec.design_rate(),
                measured_rate,
                messages,
                distinct,
                collision_count: messages - distinct,
            },
        })
    }

    pub fn same_matrices(&self, other: &QgcCodebook) -> bool {
        self.matrices == other.matrices
    }

    /// C + a·C' as a QGC: same matrices, layer variables U_i + a·U'_i,
    /// translation b + a·b', message domains {u + a·u'}.
    pub fn sumset(&self, other: &QgcCodebook, a: u64) -> Result<QgcCodebook> {
        if self.spec.group != other.spec.group {
            return Err(Error::GroupMismatch {
                left: self.spec.group.order(),
                right: other.spec.group.order(),
            });
        }
        if self.spec.n != other.spec.n
            || self.spec.layers.len() != other.spec.layers.len()
            || self.spec.layers.iter().zip(&other.spec.layers).any(|(x, y)| x.k != y.k)
        {
            return Err(Error::Dimension("sumset needs identical n and layer dimensions".into()));
        }
        if !self.same_matrices(other) {
            return Err(Error::MatrixMismatch);
        }
        let g = self.spec.group;
        let mut layers = Vec::with_capacity(self.spec.layers.len());
        let mut domains = Vec::with_capacity(self.spec.layers.len());
        for ((l1, l2), (d1, d2)) in self
            .spec
            .layers
            .iter()
            .zip(&other.spec.layers)
            .zip(self.domains.iter().zip(&other.domains))
        {
            layers.push(LayerSpec {
                k: l1.k,
                pmf: l1.pmf.convolve(&l2.pmf, a)?,
                epsilon: l1.epsilon,
            });
            let need = d1.size() * d2.size();
            if need > ENUMERATION_CAP as f64 {
                return Err(Error::BudgetExceeded {
                    what: "sum of message domains".into(),
                    needed: need,
                    cap: ENUMERATION_CAP,
                });
            }
            let w1 = d1.words()?;
            let w2 = d2.words()?;
            let mut sums: HashSet<Vec<u64>> = HashSet::with_capacity(w1.len() * w2.len());
            for u in &w1 {
                for v in &w2 {
                    sums.insert(
                        u.iter()
                            .zip(v.iter())
                            .map(|(&x, &y)| g.add_raw(x, g.mul_raw(y, a)))
                            .collect(),
                    );
                }
            }
            domains.push(MessageDomain::from_words(l1.k, sums.into_iter().collect()));
        }
        let spec = QgcSpec::new(g, self.spec.n, layers, self.spec.params)?;
        let translation = self.translation.add(&other.translation.scale(a))?;
        Ok(QgcCodebook {
            spec,
            matrices: self.matrices.clone(),
            translation,
            domains,
            seed: None,
        })
    }

    /// Exact sizes behind max{|C|, |aC'|} <= |C + aC'| <= min{p^{rn}, |C|·|aC'|},
    /// computed from the elementwise sumset of the materialized codebooks.
    pub fn check_sumset_bounds(&self, other: &QgcCodebook, a: u64) -> Result<SumsetBounds> {
        let g = self.spec.group;
        let c1 = self.materialize()?;
        let c2 = other.materialize()?;
        let scaled: HashSet<Vec<u64>> = c2
            .iter()
            .map(|w| w.iter().map(|&x| g.mul_raw(x, a)).collect())
            .collect();
        let sum = elementwise_sumset(g, &c1, &c2, a);
        let size_c1 = c1.len() as u64;
        let size_ac2 = scaled.len() as u64;
        let size_sum = sum.len() as u64;
        let ambient = (g.order() as f64).powi(self.spec.n as i32);
        let upper = ambient.min(size_c1 as f64 * size_ac2 as f64);
        Ok(SumsetBounds {
            size_c1,
            size_ac2,
            size_sum,
            upper_limit: upper,
            lower_ok: size_c1.max(size_ac2) <= size_sum,
            upper_ok: size_sum as f64 <= upper,
        })
    }

    /// Whether the stored matrices and translation are the ones `seed`
    /// regenerates.
    pub fn matches_seed(&self, seed: u64) -> bool {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (matrices, translation) = random_codebook_parts(&self.spec, &mut rng);
        matrices == self.matrices && translation == self.translation
    }

    pub fn to_document(&self) -> CodebookDocument {
        CodebookDocument {
            group: self.spec.group,
            n: self.spec.n,
            epsilon: self.spec.params.epsilon(),
            layers: self
                .spec
                .layers
                .iter()
                .map(|l| LayerDocument {
                    k: l.k,
                    probs: l.pmf.probs().to_vec(),
                    epsilon: l.epsilon,
                })
                .collect(),
            matrices: self.matrices.iter().map(|m| m.entries().to_vec()).collect(),
            translation: self.translation.entries().to_vec(),
            seed: self.seed,
        }
    }

    pub fn from_document(doc: &CodebookDocument) -> Result<Self> {
        let group = doc.group;
        let layers = doc
            .layers
            .iter()
            .map(|l| {
                Ok(LayerSpec {
                    k: l.k,
                    pmf: Pmf::new(group, l.probs.clone())?,
                    epsilon: l.epsilon,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let spec = QgcSpec::new(group, doc.n, layers, TypicalityParams::new(doc.epsilon)?)?;
        if doc.matrices.len() != spec.layers.len() {
            return Err(Error::Dimension("one matrix per layer".into()));
        }
        let matrices = doc
            .matrices
            .iter()
            .zip(&spec.layers)
            .map(|(m, l)| GroupMatrix::new(group, l.k, doc.n, m.clone()))
            .collect::<Result<Vec<_>>>()?;
        let translation = GroupVector::new(group, doc.translation.clone())?;
        let mut cb = QgcCodebook::from_parts(spec, matrices, translation)?;
        cb.seed = doc.seed;
        Ok(cb)
    }
}

/// {x + a·y : x ∈ c1, y ∈ c2}.
pub fn elementwise_sumset(g: GroupSpec, c1: &Materialized, c2: &Materialized, a: u64) -> HashSet<Vec<u64>> {
    let mut out = HashSet::with_capacity(c1.len() * c2.len());
    for x in c1.iter() {
        for y in c2.iter() {
            out.insert(x.iter().zip(y).map(|(&u, &v)| g.add_raw(u, g.mul_raw(v, a))).collect());
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SumsetBounds {
    pub size_c1: u64,
    pub size_ac2: u64,
    pub size_sum: u64,
    pub upper_limit: f64,
    pub lower_ok: bool,
    pub upper_ok: bool,
}

/// Serialized form of a QGC. Matrices are row-major integer arrays.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodebookDocument {
    pub group: GroupSpec,
    pub n: usize,
    pub epsilon: f64,
    pub layers: Vec<LayerDocument>,
    pub matrices: Vec<Vec<u64>>,
    pub translation: Vec<u64>,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerDocument {
    pub k: usize,
    pub probs: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

/// Mixed-radix packing of Z_q^n words into a u64 key, entry 0 least
/// significant.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WordPacker {
    q: u64,
    n: usize,
    space: u64,
}

impl WordPacker {
    pub fn new(group: GroupSpec, n: usize) -> Result<Self> {
        let space = u32::try_from(n)
            .ok()
            .and_then(|e| group.order().checked_pow(e))
            .ok_or_else(|| Error::BudgetExceeded {
                what: format!("packing words of length {n} over {group}"),
                needed: (group.order() as f64).powi(n as i32),
                cap: u64::MAX,
            })?;
        Ok(WordPacker {
            q: group.order(),
            n,
            space,
        })
    }

    /// q^n, the number of distinct words.
    pub fn space(&self) -> u64 {
        self.space
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn pack(&self, w: &[u64]) -> u64 {
        w.iter().rev().fold(0, |acc, &a| acc * self.q + a)
    }

    #[inline]
    pub fn unpack_into(&self, mut key: u64, out: &mut [u64]) {
        for o in out.iter_mut() {
            *o = key % self.q;
            key /= self.q;
        }
    }

    pub fn unpack(&self, key: u64) -> Vec<u64> {
        let mut out = vec![0; self.n];
        self.unpack_into(key, &mut out);
        out
    }
}

/// Shift map t: [1:l] -> Z_{p^r}^n, stored as packed keys.
#[derive(Clone, Debug, PartialEq)]
pub struct ShiftMap {
    packer: WordPacker,
    keys: Vec<u64>,
}

impl ShiftMap {
    /// l shifts i.i.d. uniform (with replacement).
    pub fn random(group: GroupSpec, n: usize, l: u64, seed: u64) -> Result<Self> {
        if l == 0 {
            return Err(Error::InvalidParameter("a UQGC needs l >= 1".into()));
        }
        let packer = WordPacker::new(group, n)?;
        if l > ENUMERATION_CAP * 4 {
            return Err(Error::BudgetExceeded {
                what: "shift map".into(),
                needed: l as f64,
                cap: ENUMERATION_CAP * 4,
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let keys = (0..l).map(|_| rng.gen_range(0..packer.space)).collect();
        Ok(ShiftMap { packer, keys })
    }

    /// Every word of Z_{p^r}^n exactly once, l = p^{rn}.
    pub fn exhaustive(group: GroupSpec, n: usize) -> Result<Self> {
        let packer = WordPacker::new(group, n)?;
        if packer.space > ENUMERATION_CAP * 4 {
            return Err(Error::BudgetExceeded {
                what: "exhaustive shift map".into(),
                needed: packer.space as f64,
                cap: ENUMERATION_CAP * 4,
            });
        }
        Ok(ShiftMap {
            packer,
            keys: (0..packer.space).collect(),
        })
    }

    pub fn from_vectors(group: GroupSpec, n: usize, shifts: &[GroupVector]) -> Result<Self> {
        let packer = WordPacker::new(group, n)?;
        if shifts.is_empty() {
            return Err(Error::InvalidParameter("a UQGC needs l >= 1".into()));
        }
        let keys = shifts
            .iter()
            .map(|t| {
                if t.spec() != group || t.len() != n {
                    Err(Error::Dimension("shift vectors must have length n".into()))
                } else {
                    Ok(packer.pack(t.entries()))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ShiftMap { packer, keys })
    }

    pub fn packer(&self) -> WordPacker {
        self.packer
    }

    pub fn l(&self) -> u64 {
        self.keys.len() as u64
    }

    pub fn keys(&self) -> &[u64] {
        &self.keys
    }

    pub fn shift(&self, j: usize) -> Vec<u64> {
        self.packer.unpack(self.keys[j])
    }
}

/// C_out = ∪_j (C_in + t(j)).
#[derive(Clone, Debug, PartialEq)]
pub struct UqgcCodebook {
    inner: QgcCodebook,
    shifts: ShiftMap,
}

impl UqgcCodebook {
    pub fn build(inner: QgcCodebook, l: u64, seed: u64) -> Result<Self> {
        let shifts = ShiftMap::random(inner.group(), inner.n(), l, seed)?;
        Ok(UqgcCodebook { inner, shifts })
    }

    pub fn with_shifts(inner: QgcCodebook, shifts: ShiftMap) -> Result<Self> {
        if shifts.packer.n != inner.n() || WordPacker::new(inner.group(), inner.n())? != shifts.packer {
            return Err(Error::Dimension("shift map does not match the inner code".into()));
        }
        Ok(UqgcCodebook { inner, shifts })
    }

    pub fn inner(&self) -> &QgcCodebook {
        &self.inner
    }

    pub fn shifts(&self) -> &ShiftMap {
        &self.shifts
    }

    pub fn l(&self) -> u64 {
        self.shifts.l()
    }

    /// R_bin = (1/n) log2 l.
    pub fn bin_rate(&self) -> f64 {
        (self.l() as f64).log2() / self.inner.n() as f64
    }

    /// Distinct words of the outer code.
    pub fn materialize(&self) -> Result<HashSet<Vec<u64>>> {
        let inner = self.inner.materialize()?;
        let g = self.inner.group();
        let mut out = HashSet::new();
        for &key in self.shifts.keys() {
            let t = self.shifts.packer.unpack(key);
            for c in inner.iter() {
                out.insert(c.iter().zip(&t).map(|(&a, &b)| g.add_raw(a, b)).collect());
            }
        }
        Ok(out)
    }
}

/// One term of the injectivity condition (k/n) H(U|Q,[U]_s) <= (r - s) log2 p.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InjectivityTerm {
    pub s: u32,
    pub lhs: f64,
    pub rhs: f64,
    pub ok: bool,
}

pub fn injectivity_margin(spec: &QgcSpec) -> Vec<InjectivityTerm> {
    let group = spec.group;
    let u = spec.layered();
    let ratio = spec.total_k() as f64 / spec.n as f64;
    (0..group.r())
        .map(|s| {
            let lhs = ratio * u.entropy(Some(s)).expect("s < r");
            let rhs = (group.r() - s) as f64 * (group.p() as f64).log2();
            InjectivityTerm {
                s,
                lhs,
                rhs,
                ok: lhs <= rhs + 1e-12,
            }
        })
        .collect()
}
