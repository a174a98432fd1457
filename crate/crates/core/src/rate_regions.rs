//! Closed-form rate bounds: packing, covering, point-to-point, distributed
//! source coding of the modulo sum, computation over a two-user MAC, the
//! group/transversal/unstructured baselines, and a search over auxiliaries.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::GroupSpec;
use crate::prob::{entropy_of, JointPmf, LayeredVariable, Pmf, WEIGHT_TOL};

/// Tolerance for "uniform marginal" preconditions.
pub const UNIFORM_TOL: f64 = 1e-9;

/// Entropies below this are treated as zero in ratio denominators.
const ZERO_ENTROPY: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Unstructured,
    Group,
    Transversal,
    /// QGC for the MAC, UQGC for source coding.
    #[serde(alias = "uqgc")]
    Qgc,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Unstructured, Scheme::Group, Scheme::Transversal, Scheme::Qgc];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Unstructured => "unstructured",
            Scheme::Group => "group",
            Scheme::Transversal => "transversal",
            Scheme::Qgc => "qgc",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unstructured" => Ok(Scheme::Unstructured),
            "group" => Ok(Scheme::Group),
            "transversal" => Ok(Scheme::Transversal),
            "qgc" | "uqgc" => Ok(Scheme::Qgc),
            other => Err(Error::InvalidParameter(format!("unknown scheme '{other}'"))),
        }
    }
}

/// Two sources X1, X2 over Z_{p^r} with joint pmf p(x1, x2).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DscProblem {
    group: GroupSpec,
    joint: JointPmf,
}

impl DscProblem {
    pub fn new(group: GroupSpec, joint: JointPmf) -> Result<Self> {
        let q = group.order() as usize;
        if joint.dims() != [q, q] {
            return Err(Error::Dimension(format!(
                "source joint must be {q}x{q}, got {:?}",
                joint.dims()
            )));
        }
        Ok(DscProblem { group, joint })
    }

    /// X1 uniform, X2 = N - X1 with N independent of X1, so X1 + X2 = N.
    pub fn with_sum_noise(noise: &Pmf) -> Result<Self> {
        let g = noise.group();
        let q = g.order() as usize;
        let mut probs = vec![0.0; q * q];
        for x1 in 0..q {
            for x2 in 0..q {
                probs[x1 * q + x2] = noise.prob(g.add_raw(x1 as u64, x2 as u64)) / q as f64;
            }
        }
        DscProblem::new(g, JointPmf::new(vec![q, q], probs)?)
    }

    /// The table1(δ) source over Z_4.
    pub fn table1(delta: f64) -> Result<Self> {
        DscProblem::with_sum_noise(&Pmf::table1(GroupSpec::z4(), delta)?)
    }

    pub fn group(&self) -> GroupSpec {
        self.group
    }

    pub fn joint(&self) -> &JointPmf {
        &self.joint
    }

    /// Law of Z = X1 + X2.
    pub fn sum_pmf(&self) -> Pmf {
        let g = self.group;
        let q = g.order() as usize;
        let mut probs = vec![0.0; q];
        for (cell, &p) in self.joint.probs().iter().enumerate() {
            probs[g.add_raw((cell / q) as u64, (cell % q) as u64) as usize] += p;
        }
        let total: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= total);
        Pmf::new(g, probs).expect("pushforward of a valid joint")
    }

    pub fn marginal(&self, user: usize) -> Pmf {
        let m = self.joint.marginal(&[user]).expect("two axes");
        let total: f64 = m.probs().iter().sum();
        Pmf::new(self.group, m.probs().iter().map(|p| p / total).collect()).expect("valid marginal")
    }
}

/// A two-user MAC with inputs in Z_{p^r} and a finite output alphabet.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MacProblem {
    group: GroupSpec,
    outputs: usize,
    /// Row x1·q + x2 is p(·|x1, x2).
    channel: Vec<Vec<f64>>,
}

impl MacProblem {
    pub fn new(group: GroupSpec, channel: Vec<Vec<f64>>) -> Result<Self> {
        let q = group.order() as usize;
        if channel.len() != q * q {
            return Err(Error::Dimension(format!(
                "{} channel rows, expected {}",
                channel.len(),
                q * q
            )));
        }
        let outputs = channel[0].len();
        if outputs == 0 {
            return Err(Error::Dimension("empty output alphabet".into()));
        }
        for (i, row) in channel.iter().enumerate() {
            if row.len() != outputs {
                return Err(Error::Dimension("ragged channel matrix".into()));
            }
            let total: f64 = row.iter().sum();
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) || (total - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidPmf(format!("channel row {i} is not a distribution")));
            }
        }
        Ok(MacProblem {
            group,
            outputs,
            channel,
        })
    }

    /// Y = X1 + X2 + N.
    pub fn additive(noise: &Pmf) -> Result<Self> {
        let g = noise.group();
        let q = g.order() as usize;
        let mut channel = Vec::with_capacity(q * q);
        for x1 in 0..q as u64 {
            for x2 in 0..q as u64 {
                let z = g.add_raw(x1, x2);
                channel.push((0..q as u64).map(|y| noise.prob(g.sub_raw(y, z))).collect());
            }
        }
        MacProblem::new(g, channel)
    }

    pub fn table1(delta: f64) -> Result<Self> {
        MacProblem::additive(&Pmf::table1(GroupSpec::z4(), delta)?)
    }

    /// Y = X1 + X2.
    pub fn noiseless(group: GroupSpec) -> Result<Self> {
        MacProblem::additive(&Pmf::point(group, 0)?)
    }

    /// Y uniform over Z_{p^r}, independent of the inputs.
    pub fn pure_noise(group: GroupSpec) -> Result<Self> {
        MacProblem::additive(&Pmf::uniform(group))
    }

    pub fn group(&self) -> GroupSpec {
        self.group
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn channel(&self) -> &[Vec<f64>] {
        &self.channel
    }

    pub fn row(&self, x1: u64, x2: u64) -> &[f64] {
        &self.channel[(x1 * self.group.order() + x2) as usize]
    }

    /// P(Z, Y) for independent uniform inputs.
    pub fn sum_output_joint(&self) -> JointPmf {
        let g = self.group;
        let q = g.order() as usize;
        let w = 1.0 / (q * q) as f64;
        let mut probs = vec![0.0; q * self.outputs];
        for x1 in 0..q {
            for x2 in 0..q {
                let z = g.add_raw(x1 as u64, x2 as u64) as usize;
                for (y, &p) in self.channel[x1 * q + x2].iter().enumerate() {
                    probs[z * self.outputs + y] += w * p;
                }
            }
        }
        let total: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= total);
        JointPmf::new(vec![q, self.outputs], probs).expect("valid joint")
    }

    /// I(X1 X2; Y) for independent inputs p1 × p2.
    pub fn sum_rate_mi(&self, p1: &[f64], p2: &[f64]) -> f64 {
        let q = self.group.order() as usize;
        let mut py = vec![0.0; self.outputs];
        let mut cond = 0.0;
        for x1 in 0..q {
            for x2 in 0..q {
                let w = p1[x1] * p2[x2];
                if w == 0.0 {
                    continue;
                }
                let row = &self.channel[x1 * q + x2];
                cond += w * entropy_of(row);
                for (acc, &p) in py.iter_mut().zip(row) {
                    *acc += w * p;
                }
            }
        }
        (entropy_of(&py) - cond).max(0.0)
    }
}

/// Time-sharing weights with one pair of layer pmfs (W1, W2) per atom of Q.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuxiliaryChoice {
    pub weights: Vec<f64>,
    pub w1: Vec<Pmf>,
    pub w2: Vec<Pmf>,
}

impl AuxiliaryChoice {
    pub fn new(weights: Vec<f64>, w1: Vec<Pmf>, w2: Vec<Pmf>) -> Result<Self> {
        let aux = AuxiliaryChoice { weights, w1, w2 };
        aux.validate()?;
        Ok(aux)
    }

    /// Trivial Q with W1 = W2 = `w`.
    pub fn symmetric(w: Pmf) -> Self {
        AuxiliaryChoice {
            weights: vec![1.0],
            w1: vec![w.clone()],
            w2: vec![w],
        }
    }

    pub fn bernoulli(group: GroupSpec, rho: f64) -> Result<Self> {
        Ok(AuxiliaryChoice::symmetric(Pmf::bernoulli(group, rho)?))
    }

    pub fn group(&self) -> GroupSpec {
        self.w1[0].group()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.weights.len();
        if m == 0 || self.w1.len() != m || self.w2.len() != m {
            return Err(Error::Dimension("one W1 and one W2 pmf per atom of Q".into()));
        }
        let group = self.w1[0].group();
        if m > group.r() as usize {
            return Err(Error::InvalidParameter(format!("|Q| = {m} exceeds r = {}", group.r())));
        }
        if self.w1.iter().chain(&self.w2).any(|p| p.group() != group) {
            return Err(Error::GroupMismatch {
                left: group.order(),
                right: self.w2[0].group().order(),
            });
        }
        self.layered(0).map(|_| ())
    }

    /// (W_user, Q) as a layered variable.
    pub fn layered(&self, user: usize) -> Result<LayeredVariable> {
        let pmfs = if user == 0 { &self.w1 } else { &self.w2 };
        LayeredVariable::new(self.weights.iter().copied().zip(pmfs.iter().cloned()).collect())
    }

    /// (W, Q) with W = W1 + W2 layerwise.
    pub fn sum(&self) -> Result<LayeredVariable> {
        self.layered(0)?.convolve(&self.layered(1)?)
    }

    pub fn is_symmetric(&self) -> bool {
        self.w1 == self.w2
    }

    /// Compact human-readable summary.
    pub fn describe(&self) -> String {
        let fmt_pmf = |p: &Pmf| {
            let parts: Vec<String> = p.probs().iter().map(|x| format!("{x:.4}")).collect();
            format!("({})", parts.join(" "))
        };
        let layers: Vec<String> = (0..self.weights.len())
            .map(|i| {
                let w2 = if self.w1[i] == self.w2[i] {
                    "same".to_string()
                } else {
                    fmt_pmf(&self.w2[i])
                };
                format!("q={:.4} W1={} W2={}", self.weights[i], fmt_pmf(&self.w1[i]), w2)
            })
            .collect();
        layers.join("; ")
    }
}

/// One rate evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateBound {
    pub scheme: Scheme,
    /// Per-user rates in bits; equal for symmetric schemes.
    pub rates: [f64; 2],
    /// Index s of the active constraint, when the bound has one.
    pub s_star: Option<u32>,
    pub aux: Option<AuxiliaryChoice>,
}

impl RateBound {
    /// The equal-rate operating point min(R1, R2) for channel coding or
    /// max(R1, R2) for source coding is reported by the callers; this is the
    /// first rate.
    pub fn symmetric_rate(&self) -> f64 {
        self.rates[0]
    }
}

fn clamp_rate(group: GroupSpec, r: f64) -> f64 {
    r.clamp(0.0, group.log2_order())
}

/// H(num)/H(den) with 0/0 = 0 and x/0 = +∞.
fn entropy_ratio(num: f64, den: f64) -> f64 {
    if num <= ZERO_ENTROPY {
        0.0
    } else if den <= ZERO_ENTROPY {
        f64::INFINITY
    } else {
        num / den
    }
}

fn argmin(values: impl IntoIterator<Item = f64>) -> (f64, u32) {
    let mut best = (f64::INFINITY, 0u32);
    for (i, v) in values.into_iter().enumerate() {
        if v < best.0 {
            best = (v, i as u32);
        }
    }
    best
}

fn check_uniform_axis(joint: &JointPmf, axis: usize, group: GroupSpec, name: &'static str) -> Result<()> {
    let q = group.order() as usize;
    if joint.dims()[axis] != q {
        return Err(Error::Dimension(format!(
            "axis {axis} has {} letters, group order is {q}",
            joint.dims()[axis]
        )));
    }
    let m = joint.marginal(&[axis])?;
    if m.probs().iter().any(|p| (p - 1.0 / q as f64).abs() > UNIFORM_TOL) {
        return Err(Error::NonUniform(name));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PackingRate {
    pub rate: f64,
    pub s_star: u32,
}

/// min_{0<=s<r} [H(U|Q)/H(U|Q,[U]_s)]·(log p^{r-s} - H(X|Y,[X]_s)).
///
/// `joint` has X on axis 0 and, optionally, Y on axis 1.
pub fn packing_rate(u: &LayeredVariable, joint: &JointPmf) -> Result<PackingRate> {
    let g = u.group();
    check_uniform_axis(joint, 0, g, "X")?;
    let given: Vec<usize> = (1..joint.num_axes()).collect();
    let h_u = u.entropy(None)?;
    let log_p = (g.p() as f64).log2();
    let mut terms = Vec::with_capacity(g.r() as usize);
    for s in 0..g.r() {
        let deficit = (g.r() - s) as f64 * log_p - joint.joint_cond_entropy(0, &given, Some((g, s)))?;
        let ratio = entropy_ratio(h_u, u.entropy(Some(s))?);
        terms.push(if ratio.is_infinite() {
            f64::INFINITY
        } else {
            ratio * deficit
        });
    }
    let (rate, s_star) = argmin(terms);
    Ok(PackingRate {
        rate: if rate.is_finite() {
            rate.max(0.0)
        } else {
            g.log2_order()
        },
        s_star,
    })
}

/// Smallest R_bin with R_bin + (H([U]_s|Q)/H(U|Q))·R >= log p^s - H([X̂]_s|X)
/// for 1 <= s <= r, floored at 0.
///
/// `joint` has X on axis 0 and X̂ on axis 1.
pub fn covering_constraints(u: &LayeredVariable, joint: &JointPmf, rate: f64) -> Result<f64> {
    let g = u.group();
    if joint.num_axes() != 2 {
        return Err(Error::Dimension("covering needs a joint over (X, X̂)".into()));
    }
    check_uniform_axis(joint, 1, g, "X̂")?;
    let h_u = u.entropy(None)?;
    let h_x = joint.entropy_of_axes(&[0])?;
    let log_p = (g.p() as f64).log2();
    let mut need: f64 = 0.0;
    for s in 1..=g.r() {
        let m = g.p_pow(s)? as usize;
        let reduced = joint.map_axis(1, g.order() as usize, |a| a % m)?;
        let h_q_given_x = (reduced.entropy() - h_x).max(0.0);
        let coeff = if h_u <= ZERO_ENTROPY {
            0.0
        } else {
            u.quotient_entropy(s)? / h_u
        };
        need = need.max(s as f64 * log_p - h_q_given_x - coeff * rate);
    }
    Ok(need.max(0.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PtpRates {
    /// [log q - H(X|Y)] - [log q - H(X)].
    pub channel_rate: f64,
    /// [log q - H(X̂|X)] - [log q - H(X̂)] with the channel read as p(x̂|x).
    pub source_rate: f64,
}

/// Point-to-point rates of a UQGC: the inner code rate sits at
/// log q - H(X), the outer at log q - H(X|Y), and R_bin is the gap.
pub fn ptp_rates(input: &Pmf, channel: &[Vec<f64>]) -> Result<PtpRates> {
    let g = input.group();
    let log_q = g.log2_order();
    let joint = JointPmf::from_input_and_channel(input.probs(), channel)?;
    let r_in = log_q - input.entropy();
    let r_out = log_q - joint.joint_cond_entropy(0, &[1], None)?;
    let source_in = log_q - joint.entropy_of_axes(&[1])?;
    let source_out = log_q - joint.joint_cond_entropy(1, &[0], None)?;
    Ok(PtpRates {
        channel_rate: (r_out - r_in).max(0.0),
        source_rate: (source_out - source_in).max(0.0),
    })
}

/// R_i = log p^r - min_s [H(W_i|Q)/H(W|Q,[W]_s)]·(log p^{r-s} - H(Z|[Z]_s))
/// with Z = X1 + X2 and W = W1 + W2.
pub fn dsc_region(prob: &DscProblem, aux: &AuxiliaryChoice) -> Result<RateBound> {
    aux.validate()?;
    let g = prob.group;
    if aux.group() != g {
        return Err(Error::GroupMismatch {
            left: g.order(),
            right: aux.group().order(),
        });
    }
    let z = prob.sum_pmf();
    let w = aux.sum()?;
    let log_p = (g.p() as f64).log2();
    let mut rates = [0.0; 2];
    let mut stars = [0u32; 2];
    for user in 0..2 {
        let h_wi = aux.layered(user)?.entropy(None)?;
        let mut terms = Vec::with_capacity(g.r() as usize);
        for s in 0..g.r() {
            let deficit = ((g.r() - s) as f64 * log_p - z.cond_entropy_given_quotient(s)?).max(0.0);
            let ratio = entropy_ratio(h_wi, w.entropy(Some(s))?);
            terms.push(if ratio.is_infinite() {
                f64::INFINITY
            } else {
                ratio * deficit
            });
        }
        let (m, s) = argmin(terms);
        rates[user] = clamp_rate(g, g.log2_order() - m);
        stars[user] = s;
    }
    let worse = if rates[1] > rates[0] { 1 } else { 0 };
    Ok(RateBound {
        scheme: Scheme::Qgc,
        rates,
        s_star: Some(stars[worse]),
        aux: Some(aux.clone()),
    })
}

/// I(Z;Y|[Z]_s) for Z = X1 + X2 with independent uniform inputs.
pub fn sum_information(prob: &MacProblem, s: u32) -> Result<f64> {
    let g = prob.group;
    let joint = prob.sum_output_joint();
    let z = joint.marginal(&[0])?;
    let zp = Pmf::new(g, z.probs().to_vec())?;
    let h = zp.cond_entropy_given_quotient(s)?;
    let h_y = joint.joint_cond_entropy(0, &[1], Some((g, s)))?;
    Ok((h - h_y).max(0.0))
}

/// R_i = min_s [H(W_i|Q)/H(W|Q,[W]_s)]·I(Z;Y|[Z]_s).
pub fn mac_region(prob: &MacProblem, aux: &AuxiliaryChoice) -> Result<RateBound> {
    aux.validate()?;
    let g = prob.group;
    if aux.group() != g {
        return Err(Error::GroupMismatch {
            left: g.order(),
            right: aux.group().order(),
        });
    }
    let w = aux.sum()?;
    let info: Vec<f64> = (0..g.r()).map(|s| sum_information(prob, s)).collect::<Result<_>>()?;
    let mut rates = [0.0; 2];
    let mut stars = [0u32; 2];
    for user in 0..2 {
        let h_wi = aux.layered(user)?.entropy(None)?;
        let mut terms = Vec::with_capacity(g.r() as usize);
        for (s, &i_s) in info.iter().enumerate() {
            let ratio = entropy_ratio(h_wi, w.entropy(Some(s as u32))?);
            terms.push(if ratio.is_infinite() {
                f64::INFINITY
            } else {
                ratio * i_s
            });
        }
        let (m, s) = argmin(terms);
        rates[user] = if m.is_finite() {
            clamp_rate(g, m)
        } else {
            g.log2_order()
        };
        stars[user] = s;
    }
    let worse = if rates[1] < rates[0] { 1 } else { 0 };
    Ok(RateBound {
        scheme: Scheme::Qgc,
        rates,
        s_star: Some(stars[worse]),
        aux: Some(aux.clone()),
    })
}

fn require_z4(group: GroupSpec, scheme: Scheme) -> Result<()> {
    if group.p() != 2 || group.r() != 2 {
        return Err(Error::Unsupported(format!(
            "the {scheme} baseline is only defined over Z_4, not {group}"
        )));
    }
    Ok(())
}

/// Symmetric per-user rates of the reference schemes for the sum source.
pub fn baseline_dsc(prob: &DscProblem, scheme: Scheme) -> Result<RateBound> {
    let g = prob.group;
    let (rate, s_star) = match scheme {
        Scheme::Unstructured => (prob.joint.entropy() / 2.0, None),
        Scheme::Group | Scheme::Transversal => {
            require_z4(g, scheme)?;
            let z = prob.sum_pmf();
            let h = z.entropy();
            let h1 = z.cond_entropy_given_quotient(1)?;
            let second = if scheme == Scheme::Group {
                2.0 * h1
            } else {
                h / 2.0 + h1
            };
            if h >= second {
                (h, Some(0))
            } else {
                (second, Some(1))
            }
        }
        Scheme::Qgc => {
            return Err(Error::Unsupported(
                "the structured scheme is evaluated by dsc_region".into(),
            ))
        }
    };
    Ok(RateBound {
        scheme,
        rates: [rate; 2],
        s_star,
        aux: None,
    })
}

/// Product input pmfs maximizing I(X1 X2; Y), with the attained value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductInputOptimum {
    pub p1: Vec<f64>,
    pub p2: Vec<f64>,
    pub sum_rate: f64,
    /// I(X1 X2; Y) at uniform inputs, for comparison.
    pub uniform_sum_rate: f64,
}

fn simplex_grid(dim: usize, steps: usize) -> Vec<Vec<f64>> {
    fn rec(dim: usize, left: usize, steps: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<f64>>) {
        if cur.len() == dim - 1 {
            cur.push(left);
            out.push(cur.iter().map(|&c| c as f64 / steps as f64).collect());
            cur.pop();
            return;
        }
        for c in 0..=left {
            cur.push(c);
            rec(dim, left - c, steps, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(dim, steps, steps, &mut Vec::with_capacity(dim), &mut out);
    out
}

/// Moves `step` mass between pairs of letters while the objective improves,
/// halving the step down to `min_step`.
fn pairwise_refine(p: &mut [f64], mut step: f64, min_step: f64, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
    let mut best = f(p);
    while step >= min_step {
        let mut improved = true;
        while improved {
            improved = false;
            for from in 0..p.len() {
                for to in 0..p.len() {
                    if from == to || p[from] < step {
                        continue;
                    }
                    p[from] -= step;
                    p[to] += step;
                    let v = f(p);
                    if v > best + 1e-15 {
                        best = v;
                        improved = true;
                    } else {
                        p[from] += step;
                        p[to] -= step;
                    }
                }
            }
        }
        step /= 2.0;
    }
    best
}

/// Grid search at step 0.1 over product inputs, then alternating pairwise
/// refinement of each user's pmf.
pub fn optimize_product_inputs(prob: &MacProblem) -> ProductInputOptimum {
    let q = prob.group.order() as usize;
    let uniform = vec![1.0 / q as f64; q];
    let uniform_sum_rate = prob.sum_rate_mi(&uniform, &uniform);
    let grid = if q <= 8 {
        simplex_grid(q, 10)
    } else {
        vec![uniform.clone()]
    };
    let (mut best, mut p1, mut p2) = (uniform_sum_rate, uniform.clone(), uniform);
    let scored: Vec<(f64, usize, usize)> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let mut local = (f64::NEG_INFINITY, i, 0);
            for (j, b) in grid.iter().enumerate() {
                let v = prob.sum_rate_mi(&grid[i], b);
                if v > local.0 {
                    local = (v, i, j);
                }
            }
            local
        })
        .collect();
    for (v, i, j) in scored {
        if v > best + 1e-15 {
            best = v;
            p1 = grid[i].clone();
            p2 = grid[j].clone();
        }
    }
    for _ in 0..20 {
        let before = best;
        let fixed = p2.clone();
        pairwise_refine(&mut p1, 0.05, 1e-4, |p| prob.sum_rate_mi(p, &fixed));
        let fixed = p1.clone();
        best = pairwise_refine(&mut p2, 0.05, 1e-4, |p| prob.sum_rate_mi(&fixed, p));
        if best - before < 1e-12 {
            break;
        }
    }
    ProductInputOptimum {
        p1,
        p2,
        sum_rate: best,
        uniform_sum_rate,
    }
}

/// Symmetric per-user rates of the reference schemes for computing the sum.
pub fn baseline_mac(prob: &MacProblem, scheme: Scheme) -> Result<RateBound> {
    let g = prob.group;
    let (rate, s_star) = match scheme {
        Scheme::Unstructured => (optimize_product_inputs(prob).sum_rate / 2.0, None),
        Scheme::Group | Scheme::Transversal => {
            require_z4(g, scheme)?;
            let i = sum_information(prob, 0)?;
            let i1 = sum_information(prob, 1)?;
            let second = if scheme == Scheme::Group {
                2.0 * i1
            } else {
                i / 2.0 + i1
            };
            if i <= second {
                (i, Some(0))
            } else {
                (second, Some(1))
            }
        }
        Scheme::Qgc => {
            return Err(Error::Unsupported(
                "the structured scheme is evaluated by mac_region".into(),
            ))
        }
    };
    Ok(RateBound {
        scheme,
        rates: [rate; 2],
        s_star,
        aux: None,
    })
}

/// Either problem kind, for the auxiliary search.
#[derive(Clone, Copy, Debug)]
pub enum Problem<'a> {
    Dsc(&'a DscProblem),
    Mac(&'a MacProblem),
}

impl Problem<'_> {
    pub fn group(&self) -> GroupSpec {
        match self {
            Problem::Dsc(p) => p.group,
            Problem::Mac(p) => p.group,
        }
    }

    pub fn evaluate(&self, aux: &AuxiliaryChoice) -> Result<RateBound> {
        match self {
            Problem::Dsc(p) => dsc_region(p, aux),
            Problem::Mac(p) => mac_region(p, aux),
        }
    }

    /// Symmetric operating point: larger of the two source rates, smaller of
    /// the two channel rates.
    pub fn symmetric(&self, bound: &RateBound) -> f64 {
        match self {
            Problem::Dsc(_) => bound.rates[0].max(bound.rates[1]),
            Problem::Mac(_) => bound.rates[0].min(bound.rates[1]),
        }
    }

    /// Higher is better.
    fn score(&self, bound: &RateBound) -> f64 {
        match self {
            Problem::Dsc(_) => -self.symmetric(bound),
            Problem::Mac(_) => self.symmetric(bound),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizeOptions {
    /// Random restarts (and refinement rounds) allowed; at least 1.
    pub budget: usize,
    pub seed: u64,
    /// Per-mass step of the symmetric single-layer simplex grid.
    pub grid_step: f64,
    /// Step of the Bern(ρ) line search.
    pub rho_step: f64,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        OptimizeOptions {
            budget: 200,
            seed: 0,
            grid_step: 0.05,
            rho_step: 0.01,
        }
    }
}

/// The reference point: trivial Q and W1 = W2 = Bern(0.05).
pub fn reference_aux(group: GroupSpec) -> AuxiliaryChoice {
    AuxiliaryChoice::bernoulli(group, 0.05).expect("0.05 is a valid parameter")
}

fn pmf_from(group: GroupSpec, raw: &[f64]) -> Option<Pmf> {
    let total: f64 = raw.iter().sum();
    if total <= 0.0 {
        return None;
    }
    Pmf::new(group, raw.iter().map(|x| (x / total).max(0.0)).collect()).ok()
}

fn random_pmf(group: GroupSpec, rng: &mut ChaCha8Rng) -> Pmf {
    let q = group.order() as usize;
    loop {
        // Exponential spacings give a uniform draw on the simplex; sparse
        // supports are encouraged by zeroing letters at random.
        let raw: Vec<f64> = (0..q)
            .map(|_| {
                if rng.gen_bool(0.3) {
                    0.0
                } else {
                    -(1.0 - rng.gen::<f64>()).ln()
                }
            })
            .collect();
        if let Some(p) = pmf_from(group, &raw) {
            return p;
        }
    }
}

fn random_aux(group: GroupSpec, rng: &mut ChaCha8Rng) -> AuxiliaryChoice {
    let m = rng.gen_range(1..=group.r() as usize);
    let mut weights: Vec<f64> = (0..m).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    let fix = 1.0 - weights.iter().sum::<f64>();
    weights[0] += fix;
    let w1: Vec<Pmf> = (0..m).map(|_| random_pmf(group, rng)).collect();
    let w2 = if rng.gen_bool(0.5) {
        w1.clone()
    } else {
        (0..m).map(|_| random_pmf(group, rng)).collect()
    };
    AuxiliaryChoice { weights, w1, w2 }
}

/// Perturbs every probability of every pmf (and the weights) by ±step,
/// keeping W1 = W2 when the starting point is symmetric.
fn neighbours(aux: &AuxiliaryChoice, step: f64) -> Vec<AuxiliaryChoice> {
    let group = aux.group();
    let q = group.order() as usize;
    let symmetric = aux.is_symmetric();
    let mut out = Vec::new();
    let users: &[usize] = if symmetric { &[0] } else { &[0, 1] };
    for layer in 0..aux.weights.len() {
        for &user in users {
            let base = if user == 0 { &aux.w1[layer] } else { &aux.w2[layer] };
            for from in 0..q {
                for to in 0..q {
                    if from == to || base.probs()[from] < step {
                        continue;
                    }
                    let mut raw = base.probs().to_vec();
                    raw[from] -= step;
                    raw[to] += step;
                    if let Some(p) = pmf_from(group, &raw) {
                        let mut next = aux.clone();
                        if user == 0 {
                            next.w1[layer] = p.clone();
                        }
                        if user == 1 || symmetric {
                            next.w2[layer] = p;
                        }
                        out.push(next);
                    }
                }
            }
        }
    }
    if aux.weights.len() > 1 {
        for from in 0..aux.weights.len() {
            for to in 0..aux.weights.len() {
                if from != to && aux.weights[from] > step + WEIGHT_TOL {
                    let mut next = aux.clone();
                    next.weights[from] -= step;
                    next.weights[to] += step;
                    out.push(next);
                }
            }
        }
    }
    out
}

/// Best (first-found, in a fixed candidate order) among scored candidates.
fn best_of(problem: Problem<'_>, candidates: Vec<AuxiliaryChoice>, incumbent: &mut (f64, RateBound)) {
    let scored: Vec<Option<(f64, RateBound)>> = candidates
        .into_par_iter()
        .map(|aux| problem.evaluate(&aux).ok().map(|b| (problem.score(&b), b)))
        .collect();
    for (score, bound) in scored.into_iter().flatten() {
        if score > incumbent.0 + 1e-12 {
            *incumbent = (score, bound);
        }
    }
}

/// Searches auxiliaries with |Q| <= r: symmetric single-layer simplex grid,
/// the Bern(ρ) line, seeded random restarts, then local refinement.
/// Deterministic given the options; never worse than `reference_aux`.
pub fn optimize_aux(problem: Problem<'_>, opts: &OptimizeOptions) -> Result<(AuxiliaryChoice, RateBound)> {
    if opts.budget == 0 {
        return Err(Error::InvalidParameter("optimizer budget must be at least 1".into()));
    }
    if !(opts.grid_step > 0.0 && opts.grid_step <= 1.0 && opts.rho_step > 0.0 && opts.rho_step < 1.0) {
        return Err(Error::InvalidParameter("grid steps must lie in (0, 1]".into()));
    }
    let group = problem.group();
    let reference = problem.evaluate(&reference_aux(group))?;
    let mut incumbent = (problem.score(&reference), reference);

    let q = group.order() as usize;
    let steps = (1.0 / opts.grid_step).round() as usize;
    let grid: Vec<AuxiliaryChoice> = if q <= 8 {
        simplex_grid(q, steps)
            .into_iter()
            .filter_map(|raw| pmf_from(group, &raw).map(AuxiliaryChoice::symmetric))
            .collect()
    } else {
        Vec::new()
    };
    best_of(problem, grid, &mut incumbent);

    let rho_count = (1.0 / opts.rho_step).round() as usize;
    let line: Vec<AuxiliaryChoice> = (1..rho_count)
        .filter_map(|i| AuxiliaryChoice::bernoulli(group, i as f64 * opts.rho_step).ok())
        .collect();
    best_of(problem, line, &mut incumbent);

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let restarts: Vec<AuxiliaryChoice> = (0..opts.budget).map(|_| random_aux(group, &mut rng)).collect();
    best_of(problem, restarts, &mut incumbent);

    let mut step = opts.grid_step / 2.0;
    let mut rounds = 0;
    while step >= 1e-4 && rounds < opts.budget.max(20) {
        rounds += 1;
        let current = incumbent.1.aux.clone().expect("structured bound carries its aux");
        let before = incumbent.0;
        best_of(problem, neighbours(&current, step), &mut incumbent);
        if incumbent.0 <= before + 1e-12 {
            step /= 2.0;
        }
    }
    let aux = incumbent.1.aux.clone().expect("structured bound carries its aux");
    Ok((aux, incumbent.1))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn z4() -> GroupSpec {
        GroupSpec::z4()
    }

    fn h(probs: &[f64]) -> f64 {
        entropy_of(probs)
    }

    #[test]
    fn packing_examples() {
        let g = z4();
        let noiseless = JointPmf::new(
            vec![4, 4],
            (0..16).map(|c| if c / 4 == c % 4 { 0.25 } else { 0.0 }).collect(),
        )
        .unwrap();
        let half = LayeredVariable::single(Pmf::uniform_on(g, &[0, 1]).unwrap());
        let r = packing_rate(&half, &noiseless).unwrap();
        assert!(close(r.rate, 2.0, 1e-12));
        assert_eq!(r.s_star, 0);

        let uniform = LayeredVariable::single(Pmf::uniform(g));
        let noise = Pmf::table1(g, 0.6).unwrap();
        let mac = MacProblem::additive(&noise).unwrap();
        let joint = mac.sum_output_joint();
        let r = packing_rate(&uniform, &joint).unwrap();
        // Given Y, Z and N determine each other, so H(Z|Y,[Z]_s) = H(N|[N]_s);
        // the s = 1 ratio H(U)/H(U|[U]_1) is 2.
        let hn = noise.entropy();
        let hn1 = noise.cond_entropy_given_quotient(1).unwrap();
        assert!(close(r.rate, (2.0 - hn).min(2.0 * (1.0 - hn1)), 1e-9));
        assert_eq!(r.s_star, 1);

        let skewed = JointPmf::new(vec![4], vec![0.7, 0.1, 0.1, 0.1]).unwrap();
        assert_eq!(packing_rate(&uniform, &skewed), Err(Error::NonUniform("X")));
    }

    #[test]
    fn covering_examples() {
        let g = z4();
        let identity = JointPmf::new(
            vec![4, 4],
            (0..16).map(|c| if c / 4 == c % 4 { 0.25 } else { 0.0 }).collect(),
        )
        .unwrap();
        let uniform = LayeredVariable::single(Pmf::uniform(g));
        assert!(close(
            covering_constraints(&uniform, &identity, 0.0).unwrap(),
            2.0,
            1e-12
        ));
        assert_eq!(covering_constraints(&uniform, &identity, 2.0).unwrap(), 0.0);

        // X̂ = X with a Bern(ρ) inner code reduces to
        // R_bin >= max_s s - (k/n) H([U]_s).
        let u = Pmf::bernoulli(g, 0.05).unwrap();
        let layered = LayeredVariable::single(u.clone());
        let ratio = 0.7;
        let r_in = ratio * u.entropy();
        let direct = (1..=2u32)
            .map(|s| s as f64 - ratio * u.quotient_pushforward(s).unwrap().entropy())
            .fold(0.0f64, f64::max);
        assert!(close(
            covering_constraints(&layered, &identity, r_in).unwrap(),
            direct,
            1e-12
        ));

        let point = LayeredVariable::single(Pmf::point(g, 0).unwrap());
        assert!(close(covering_constraints(&point, &identity, 1.0).unwrap(), 2.0, 1e-12));
    }

    #[test]
    fn ptp_examples() {
        let g = z4();
        let identity: Vec<Vec<f64>> = (0..4)
            .map(|x| (0..4).map(|y| if x == y { 1.0 } else { 0.0 }).collect())
            .collect();
        let r = ptp_rates(&Pmf::uniform(g), &identity).unwrap();
        assert!(close(r.channel_rate, 2.0, 1e-12) && close(r.source_rate, 2.0, 1e-12));
        let useless = vec![vec![0.25; 4]; 4];
        assert!(close(
            ptp_rates(&Pmf::uniform(g), &useless).unwrap().channel_rate,
            0.0,
            1e-12
        ));

        let noise = Pmf::table1(g, 0.6).unwrap();
        let additive: Vec<Vec<f64>> = (0..4u64)
            .map(|x| (0..4u64).map(|y| noise.prob(g.sub_raw(y, x))).collect())
            .collect();
        let r = ptp_rates(&Pmf::uniform(g), &additive).unwrap();
        assert!(close(r.channel_rate, 2.0 - noise.entropy(), 1e-12));
    }

    #[test]
    fn example_one_values() {
        let dsc = DscProblem::table1(0.6).unwrap();
        let un = baseline_dsc(&dsc, Scheme::Unstructured).unwrap().rates[0];
        let gr = baseline_dsc(&dsc, Scheme::Group).unwrap().rates[0];
        let tr = baseline_dsc(&dsc, Scheme::Transversal).unwrap().rates[0];
        let q = dsc_region(&dsc, &reference_aux(z4())).unwrap().rates[0];
        assert!(close(un, 1.72, 0.01), "{un}");
        assert!(close(gr, 1.94, 0.01), "{gr}");
        assert!(close(tr, 1.69, 0.01), "{tr}");
        assert!(close(q, 1.67, 0.01), "{q}");
    }

    #[test]
    fn example_two_values() {
        let mac = MacProblem::table1(0.6).unwrap();
        let un = baseline_mac(&mac, Scheme::Unstructured).unwrap().rates[0];
        let gr = baseline_mac(&mac, Scheme::Group).unwrap().rates[0];
        let tr = baseline_mac(&mac, Scheme::Transversal).unwrap().rates[0];
        let q = mac_region(&mac, &reference_aux(z4())).unwrap().rates[0];
        assert!(close(un, 0.28, 0.01), "{un}");
        assert!(close(gr, 0.06, 0.01), "{gr}");
        assert!(close(tr, 0.31, 0.01), "{tr}");
        assert!(close(q, 0.33, 0.01), "{q}");
    }

    #[test]
    fn first_principles_coefficient() {
        // W = Bern(0.05) + Bern(0.05) = (0.9025, 0.095, 0.0025, 0).
        let aux = reference_aux(z4());
        let w = aux.sum().unwrap();
        let w_probs = [0.9025, 0.095, 0.0025, 0.0];
        let h_w = h(&w_probs);
        // [W]_1 = W mod 2: classes {0,2} and {1,3}.
        let h_w_given_q1 = h_w - h(&[0.9025 + 0.0025, 0.095]);
        assert!(close(w.entropy(None).unwrap(), h_w, 1e-12));
        assert!(close(w.entropy(Some(1)).unwrap(), h_w_given_q1, 1e-12));
        let c1 = h(&[0.95, 0.05]) / h_w_given_q1;
        assert!(close(c1, 11.52, 0.01), "{c1}");
    }

    #[test]
    fn uniform_aux_recovers_group_baselines() {
        let uniform = AuxiliaryChoice::symmetric(Pmf::uniform(z4()));
        for i in 0..=20 {
            let d = i as f64 * 0.05;
            let dsc = DscProblem::table1(d).unwrap();
            let a = dsc_region(&dsc, &uniform).unwrap().rates[0];
            let b = baseline_dsc(&dsc, Scheme::Group).unwrap().rates[0];
            assert!(close(a, b, 1e-9), "dsc δ={d}: {a} vs {b}");
            let mac = MacProblem::table1(d).unwrap();
            let a = mac_region(&mac, &uniform).unwrap().rates[0];
            let b = baseline_mac(&mac, Scheme::Group).unwrap().rates[0];
            assert!(close(a, b, 1e-9), "mac δ={d}: {a} vs {b}");
        }
    }

    #[test]
    fn mac_matches_packing_on_the_sum_code() {
        // The sum code has rate (k/n) H(W|Q); each user's share is the
        // fraction H(W_i|Q)/H(W|Q) of it.
        let mac = MacProblem::table1(0.6).unwrap();
        for rho in [0.05, 0.2, 0.5] {
            let aux = AuxiliaryChoice::bernoulli(z4(), rho).unwrap();
            let w = aux.sum().unwrap();
            let pack = packing_rate(&w, &mac.sum_output_joint()).unwrap();
            let share = aux.layered(0).unwrap().entropy(None).unwrap() / w.entropy(None).unwrap();
            let bound = mac_region(&mac, &aux).unwrap();
            assert!(close(bound.rates[0], pack.rate * share, 1e-9));
        }
    }

    #[test]
    fn degenerate_problems() {
        let g = z4();
        let uniform = AuxiliaryChoice::symmetric(Pmf::uniform(g));
        let noiseless = MacProblem::noiseless(g).unwrap();
        assert!(close(mac_region(&noiseless, &uniform).unwrap().rates[0], 2.0, 1e-12));
        let point = DscProblem::with_sum_noise(&Pmf::point(g, 0).unwrap()).unwrap();
        assert!(close(dsc_region(&point, &uniform).unwrap().rates[0], 0.0, 1e-12));
    }

    #[test]
    fn s_zero_ratio_is_one() {
        let aux = AuxiliaryChoice::bernoulli(z4(), 0.3).unwrap();
        let w = aux.sum().unwrap();
        assert!(close(
            w.entropy(None).unwrap() / w.entropy(Some(0)).unwrap(),
            1.0,
            1e-12
        ));
    }

    #[test]
    fn baselines_need_z4() {
        let g = GroupSpec::new(3, 1).unwrap();
        let dsc = DscProblem::with_sum_noise(&Pmf::uniform(g)).unwrap();
        assert!(matches!(baseline_dsc(&dsc, Scheme::Group), Err(Error::Unsupported(_))));
        assert!(baseline_dsc(&dsc, Scheme::Unstructured).is_ok());
        let mac = MacProblem::noiseless(g).unwrap();
        assert!(matches!(
            baseline_mac(&mac, Scheme::Transversal),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn aux_validation() {
        let g = z4();
        let p = Pmf::uniform(g);
        assert!(AuxiliaryChoice::new(vec![0.3, 0.3, 0.4], vec![p.clone(); 3], vec![p.clone(); 3]).is_err());
        assert!(AuxiliaryChoice::new(vec![0.5, 0.5], vec![p.clone(); 2], vec![p.clone(); 1]).is_err());
        assert!(AuxiliaryChoice::new(vec![0.5, 0.5], vec![p.clone(); 2], vec![p; 2]).is_ok());
    }

    #[test]
    fn scheme_names() {
        assert_eq!("uqgc".parse::<Scheme>().unwrap(), Scheme::Qgc);
        assert_eq!(serde_json::from_str::<Scheme>("\"uqgc\"").unwrap(), Scheme::Qgc);
        assert_eq!(serde_json::to_string(&Scheme::Transversal).unwrap(), "\"transversal\"");
        assert!("lattice".parse::<Scheme>().is_err());
    }
}
