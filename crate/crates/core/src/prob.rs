//! Finite distributions over Z_{p^r} and the information measures used by the
//! rate formulas. All entropies are in bits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::GroupSpec;

/// Normalization tolerance for distributions at construction.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Tolerance used when comparing layer weights.
pub const WEIGHT_TOL: f64 = 1e-9;

fn plogp(p: f64) -> f64 {
    if p > 0.0 {
        -p * p.log2()
    } else {
        0.0
    }
}

/// Entropy in bits of a probability vector; 0·log 0 = 0.
pub fn entropy_of(probs: &[f64]) -> f64 {
    probs.iter().map(|&p| plogp(p)).sum()
}

/// Binary entropy h2(x).
pub fn binary_entropy(x: f64) -> f64 {
    plogp(x) + plogp(1.0 - x)
}

fn validate(probs: &[f64]) -> Result<()> {
    if let Some(bad) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
        return Err(Error::InvalidPmf(format!("entry {bad} is not a probability")));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::InvalidPmf(format!("entries sum to {total}, not 1")));
    }
    Ok(())
}

/// A probability mass function on Z_{p^r}.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Pmf {
    group: GroupSpec,
    probs: Vec<f64>,
}

impl Pmf {
    pub fn new(group: GroupSpec, probs: Vec<f64>) -> Result<Self> {
        if probs.len() as u64 != group.order() {
            return Err(Error::InvalidPmf(format!(
                "{} probabilities for a group of order {}",
                probs.len(),
                group.order()
            )));
        }
        validate(&probs)?;
        Ok(Pmf { group, probs })
    }

    pub fn uniform(group: GroupSpec) -> Self {
        let q = group.order() as usize;
        Pmf {
            group,
            probs: vec![1.0 / q as f64; q],
        }
    }

    pub fn point(group: GroupSpec, a: u64) -> Result<Self> {
        group.element(a)?;
        let mut probs = vec![0.0; group.order() as usize];
        probs[a as usize] = 1.0;
        Ok(Pmf { group, probs })
    }

    /// Uniform over the listed elements (duplicates ignored).
    pub fn uniform_on(group: GroupSpec, support: &[u64]) -> Result<Self> {
        let mut probs = vec![0.0; group.order() as usize];
        for &a in support {
            group.element(a)?;
            probs[a as usize] = 1.0;
        }
        let count = probs.iter().filter(|&&p| p > 0.0).count();
        if count == 0 {
            return Err(Error::InvalidPmf("empty support".into()));
        }
        probs.iter_mut().for_each(|p| *p /= count as f64);
        Ok(Pmf { group, probs })
    }

    /// P(1) = rho, P(0) = 1 - rho, on {0, 1} ⊂ Z_{p^r}.
    pub fn bernoulli(group: GroupSpec, rho: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&rho) {
            return Err(Error::InvalidPmf(format!("rho = {rho} outside [0, 1]")));
        }
        let mut probs = vec![0.0; group.order() as usize];
        probs[0] = 1.0 - rho;
        probs[1] += rho;
        Ok(Pmf { group, probs })
    }

    /// The noise family P_N = (0.1δ, 0.9δ, 0.1(1-δ), 0.9(1-δ)) on Z_4.
    pub fn table1(group: GroupSpec, delta: f64) -> Result<Self> {
        if group != GroupSpec::z4() {
            return Err(Error::Unsupported(format!(
                "the table1 family lives on Z_4, not {group}"
            )));
        }
        if !(0.0..=1.0).contains(&delta) {
            return Err(Error::InvalidPmf(format!("delta = {delta} outside [0, 1]")));
        }
        Pmf::new(
            group,
            vec![0.1 * delta, 0.9 * delta, 0.1 * (1.0 - delta), 0.9 * (1.0 - delta)],
        )
    }

    pub fn group(&self) -> GroupSpec {
        self.group
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, a: u64) -> f64 {
        self.probs[a as usize]
    }

    pub fn support(&self) -> impl Iterator<Item = u64> + '_ {
        self.probs
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(a, _)| a as u64)
    }

    pub fn is_uniform(&self, tol: f64) -> bool {
        let u = 1.0 / self.probs.len() as f64;
        self.probs.iter().all(|p| (p - u).abs() <= tol)
    }

    pub fn entropy(&self) -> f64 {
        entropy_of(&self.probs)
    }

    /// Distribution of [X]_s, kept on Z_{p^r} and supported on T_s.
    pub fn quotient_pushforward(&self, s: u32) -> Result<Pmf> {
        let m = self.group.p_pow(s)? as usize;
        let mut probs = vec![0.0; self.probs.len()];
        for (a, &p) in self.probs.iter().enumerate() {
            probs[a % m] += p;
        }
        Ok(Pmf {
            group: self.group,
            probs,
        })
    }

    /// H(X | [X]_s) = H(X) - H([X]_s).
    pub fn cond_entropy_given_quotient(&self, s: u32) -> Result<f64> {
        let pushed = self.quotient_pushforward(s)?;
        Ok((self.entropy() - pushed.entropy()).max(0.0))
    }

    /// Distribution of U + a·U' for independent U ~ self, U' ~ other.
    pub fn convolve(&self, other: &Pmf, a: u64) -> Result<Pmf> {
        if self.group != other.group {
            return Err(Error::GroupMismatch {
                left: self.group.order(),
                right: other.group.order(),
            });
        }
        let g = self.group;
        let mut probs = vec![0.0; self.probs.len()];
        for (x, &px) in self.probs.iter().enumerate() {
            if px == 0.0 {
                continue;
            }
            for (y, &py) in other.probs.iter().enumerate() {
                probs[g.add_raw(x as u64, g.mul_raw(y as u64, a)) as usize] += px * py;
            }
        }
        Ok(Pmf { group: g, probs })
    }

    /// Distribution of a·U.
    pub fn scale(&self, a: u64) -> Pmf {
        let g = self.group;
        let mut probs = vec![0.0; self.probs.len()];
        for (x, &px) in self.probs.iter().enumerate() {
            probs[g.mul_raw(x as u64, a) as usize] += px;
        }
        Pmf { group: g, probs }
    }
}

/// A joint distribution over a product of finite alphabets, row-major with the
/// last axis fastest.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct JointPmf {
    dims: Vec<usize>,
    probs: Vec<f64>,
}

impl JointPmf {
    pub fn new(dims: Vec<usize>, probs: Vec<f64>) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::InvalidPmf("joint needs at least one nonempty axis".into()));
        }
        let cells: usize = dims.iter().product();
        if probs.len() != cells {
            return Err(Error::InvalidPmf(format!(
                "{} probabilities for {cells} cells",
                probs.len()
            )));
        }
        validate(&probs)?;
        Ok(JointPmf { dims, probs })
    }

    /// p(x) p(y|x); `channel[x]` is the row p(·|x).
    pub fn from_input_and_channel(input: &[f64], channel: &[Vec<f64>]) -> Result<Self> {
        if input.len() != channel.len() {
            return Err(Error::Dimension("one channel row per input letter".into()));
        }
        let outputs = channel.first().map_or(0, Vec::len);
        let mut probs = Vec::with_capacity(input.len() * outputs);
        for (px, row) in input.iter().zip(channel) {
            if row.len() != outputs {
                return Err(Error::Dimension("ragged channel matrix".into()));
            }
            probs.extend(row.iter().map(|pyx| px * pyx));
        }
        JointPmf::new(vec![input.len(), outputs], probs)
    }

    /// The product p(x)·p(y) of two independent marginals.
    pub fn independent(x: &[f64], y: &[f64]) -> Result<Self> {
        let probs = x.iter().flat_map(|px| y.iter().map(move |py| px * py)).collect();
        JointPmf::new(vec![x.len(), y.len()], probs)
    }

    pub fn from_pmf(p: &Pmf) -> Self {
        JointPmf {
            dims: vec![p.probs.len()],
            probs: p.probs.clone(),
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn num_axes(&self) -> usize {
        self.dims.len()
    }

    fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.dims.len()];
        for i in (0..self.dims.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * self.dims[i + 1];
        }
        strides
    }

    fn check_axes(&self, axes: &[usize]) -> Result<()> {
        for (i, &a) in axes.iter().enumerate() {
            if a >= self.dims.len() {
                return Err(Error::Dimension(format!(
                    "axis {a} of a {}-axis joint",
                    self.dims.len()
                )));
            }
            if axes[..i].contains(&a) {
                return Err(Error::Dimension(format!("axis {a} repeated")));
            }
        }
        Ok(())
    }

    /// Marginal over `axes` (in the given order).
    pub fn marginal(&self, axes: &[usize]) -> Result<JointPmf> {
        self.check_axes(axes)?;
        if axes.is_empty() {
            return Ok(JointPmf {
                dims: vec![1],
                probs: vec![1.0],
            });
        }
        let strides = self.strides();
        let dims: Vec<usize> = axes.iter().map(|&a| self.dims[a]).collect();
        let mut out = vec![0.0; dims.iter().product()];
        for (cell, &p) in self.probs.iter().enumerate() {
            let mut idx = 0;
            for &a in axes {
                idx = idx * self.dims[a] + (cell / strides[a]) % self.dims[a];
            }
            out[idx] += p;
        }
        Ok(JointPmf { dims, probs: out })
    }

    /// Relabels one axis through `f`, merging cells that collide.
    pub fn map_axis(&self, axis: usize, new_dim: usize, f: impl Fn(usize) -> usize) -> Result<JointPmf> {
        self.check_axes(&[axis])?;
        let strides = self.strides();
        let mut dims = self.dims.clone();
        dims[axis] = new_dim;
        let mut new_strides = vec![1; dims.len()];
        for i in (0..dims.len().saturating_sub(1)).rev() {
            new_strides[i] = new_strides[i + 1] * dims[i + 1];
        }
        let mut out = vec![0.0; dims.iter().product()];
        for (cell, &p) in self.probs.iter().enumerate() {
            let mut idx = 0;
            for (ax, &stride) in new_strides.iter().enumerate() {
                let mut coord = (cell / strides[ax]) % self.dims[ax];
                if ax == axis {
                    coord = f(coord);
                    if coord >= new_dim {
                        return Err(Error::Dimension(format!(
                            "relabel sends a letter to {coord} >= {new_dim}"
                        )));
                    }
                }
                idx += coord * stride;
            }
            out[idx] += p;
        }
        Ok(JointPmf { dims, probs: out })
    }

    pub fn entropy(&self) -> f64 {
        entropy_of(&self.probs)
    }

    /// H of the marginal on `axes`.
    pub fn entropy_of_axes(&self, axes: &[usize]) -> Result<f64> {
        Ok(self.marginal(axes)?.entropy())
    }

    /// H(target | given, [target]_s).
    ///
    /// With `quotient = Some((group, s))` the target alphabet must be the
    /// group; the result is H(target, given) - H([target]_s, given), which
    /// equals H(X|Y) - H([X]_s|Y).
    pub fn joint_cond_entropy(
        &self,
        target: usize,
        given: &[usize],
        quotient: Option<(GroupSpec, u32)>,
    ) -> Result<f64> {
        self.check_axes(&[target])?;
        self.check_axes(given)?;
        if given.contains(&target) {
            return Ok(0.0);
        }
        let mut with_target = vec![target];
        with_target.extend_from_slice(given);
        let h_joint = self.entropy_of_axes(&with_target)?;
        let h_rest = match quotient {
            None => self.entropy_of_axes(given)?,
            Some((group, s)) => {
                if self.dims[target] as u64 != group.order() {
                    return Err(Error::Dimension(format!(
                        "target axis has {} letters, group order is {}",
                        self.dims[target],
                        group.order()
                    )));
                }
                let m = group.p_pow(s)? as usize;
                let reduced = self.marginal(&with_target)?;
                reduced.map_axis(0, self.dims[target], |a| a % m)?.entropy()
            }
        };
        Ok((h_joint - h_rest).max(0.0))
    }

    /// I(a; b | c) over disjoint axis sets.
    pub fn mutual_information(&self, a: &[usize], b: &[usize], given: &[usize]) -> Result<f64> {
        let h = |axes: Vec<usize>| self.entropy_of_axes(&axes);
        let cat = |xs: &[&[usize]]| xs.concat();
        let i = h(cat(&[a, given]))? + h(cat(&[b, given]))? - h(cat(&[a, b, given]))? - h(given.to_vec())?;
        Ok(i.max(0.0))
    }
}

/// A layered auxiliary variable (U, Q): P(Q = i) = q_i and U | Q = i ~ U_i.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LayeredVariable {
    group: GroupSpec,
    layers: Vec<(f64, Pmf)>,
}

impl LayeredVariable {
    pub fn new(layers: Vec<(f64, Pmf)>) -> Result<Self> {
        let group = layers
            .first()
            .map(|(_, p)| p.group)
            .ok_or_else(|| Error::InvalidPmf("a layered variable needs at least one layer".into()))?;
        for (w, p) in &layers {
            if !(*w > 0.0 && *w <= 1.0 + WEIGHT_TOL) {
                return Err(Error::InvalidPmf(format!("layer weight {w} outside (0, 1]")));
            }
            if p.group != group {
                return Err(Error::GroupMismatch {
                    left: group.order(),
                    right: p.group.order(),
                });
            }
        }
        let total: f64 = layers.iter().map(|(w, _)| w).sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::InvalidPmf(format!("layer weights sum to {total}")));
        }
        Ok(LayeredVariable { group, layers })
    }

    pub fn single(p: Pmf) -> Self {
        LayeredVariable {
            group: p.group,
            layers: vec![(1.0, p)],
        }
    }

    /// Weights k_i / Σk from integer layer dimensions.
    pub fn from_dimensions(layers: &[(usize, Pmf)]) -> Result<Self> {
        let k: usize = layers.iter().map(|(ki, _)| ki).sum();
        if k == 0 || layers.iter().any(|(ki, _)| *ki == 0) {
            return Err(Error::InvalidPmf("layer dimensions must be positive".into()));
        }
        LayeredVariable::new(
            layers
                .iter()
                .map(|(ki, p)| (*ki as f64 / k as f64, p.clone()))
                .collect(),
        )
    }

    pub fn group(&self) -> GroupSpec {
        self.group
    }

    pub fn layers(&self) -> &[(f64, Pmf)] {
        &self.layers
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.layers.iter().map(|(w, _)| *w).collect()
    }

    /// H(U|Q), or H(U|Q, [U]_s) when `quotient` is given.
    pub fn entropy(&self, quotient: Option<u32>) -> Result<f64> {
        let mut h = 0.0;
        for (w, p) in &self.layers {
            h += w * match quotient {
                None => p.entropy(),
                Some(s) => p.cond_entropy_given_quotient(s)?,
            };
        }
        Ok(h)
    }

    /// H([U]_s | Q).
    pub fn quotient_entropy(&self, s: u32) -> Result<f64> {
        let mut h = 0.0;
        for (w, p) in &self.layers {
            h += w * p.quotient_pushforward(s)?.entropy();
        }
        Ok(h)
    }

    /// Layerwise U + V for U ⊥ V given the shared Q.
    pub fn convolve(&self, other: &LayeredVariable) -> Result<LayeredVariable> {
        if self.layers.len() != other.layers.len()
            || self
                .layers
                .iter()
                .zip(&other.layers)
                .any(|((a, _), (b, _))| (a - b).abs() > WEIGHT_TOL)
        {
            return Err(Error::WeightMismatch);
        }
        let layers = self
            .layers
            .iter()
            .zip(&other.layers)
            .map(|((w, p), (_, q))| Ok((*w, p.convolve(q, 1)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(LayeredVariable {
            group: self.group,
            layers,
        })
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPmf {
    group: GroupSpec,
    probs: Vec<f64>,
}

impl<'de> Deserialize<'de> for Pmf {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawPmf::deserialize(d)?;
        Pmf::new(raw.group, raw.probs).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z4() -> GroupSpec {
        GroupSpec::z4()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn entropy_examples() {
        assert!(close(Pmf::uniform(z4()).entropy(), 2.0, 1e-12));
        assert_eq!(Pmf::point(z4(), 2).unwrap().entropy(), 0.0);
        // Direct evaluation of -Σ p log2 p for (0.06, 0.54, 0.04, 0.36).
        let n = Pmf::table1(z4(), 0.6).unwrap();
        let direct =
            -(0.06f64 * 0.06f64.log2() + 0.54 * 0.54f64.log2() + 0.04 * 0.04f64.log2() + 0.36 * 0.36f64.log2());
        assert!(close(n.entropy(), direct, 1e-12));
        assert!(close(n.entropy(), 1.43995, 1e-4));
        // Unstructured symmetric rate of the first worked example.
        assert!(close((2.0 + n.entropy()) / 2.0, 1.72, 0.005));
    }

    #[test]
    fn construction_rejects_bad_input() {
        assert!(Pmf::new(z4(), vec![0.5, 0.5, 0.0]).is_err());
        assert!(Pmf::new(z4(), vec![0.5, 0.5, 0.1, -0.1]).is_err());
        assert!(Pmf::new(z4(), vec![0.5, 0.5, 0.1, 0.0]).is_err());
        assert!(Pmf::new(z4(), vec![0.25; 4]).is_ok());
        assert!(Pmf::table1(GroupSpec::new(3, 1).unwrap(), 0.5).is_err());
        assert!(Pmf::bernoulli(z4(), 1.5).is_err());
    }

    #[test]
    fn quotient_pushforward_examples() {
        let n = Pmf::table1(z4(), 0.6).unwrap();
        let q1 = n.quotient_pushforward(1).unwrap();
        assert!(close(q1.prob(0), 0.10, 1e-12));
        assert!(close(q1.prob(1), 0.90, 1e-12));
        assert_eq!(q1.prob(2), 0.0);
        let q0 = n.quotient_pushforward(0).unwrap();
        assert!(close(q0.prob(0), 1.0, 1e-12));
        assert_eq!(q0.support().collect::<Vec<_>>(), vec![0]);
        assert_eq!(n.quotient_pushforward(2).unwrap(), n);
        assert!(n.quotient_pushforward(3).is_err());
    }

    #[test]
    fn conditional_entropy_given_quotient() {
        let n = Pmf::table1(z4(), 0.6).unwrap();
        let h = n.cond_entropy_given_quotient(1).unwrap();
        assert!(close(h, n.entropy() - binary_entropy(0.9), 1e-12));
        assert!(close(h, 0.97095, 1e-4));
        // Group-code rate of the first worked example, 2 H(Z|[Z]_1) ≈ 1.94.
        assert!(close(2.0 * h, 1.94, 0.005));
        assert!(close(
            Pmf::uniform(z4()).cond_entropy_given_quotient(1).unwrap(),
            1.0,
            1e-12
        ));
        assert!(close(n.cond_entropy_given_quotient(0).unwrap(), n.entropy(), 1e-12));
    }

    /// Brute-force H(A|B) from a list of (a, b, prob) cells.
    fn brute_cond(cells: &[(usize, usize, f64)]) -> f64 {
        let mut hb = std::collections::HashMap::<usize, f64>::new();
        for &(_, b, p) in cells {
            *hb.entry(b).or_default() += p;
        }
        cells
            .iter()
            .filter(|c| c.2 > 0.0)
            .map(|&(_, b, p)| -p * (p / hb[&b]).log2())
            .sum()
    }

    #[test]
    fn joint_conditional_entropy_examples() {
        let g = z4();
        let u = Pmf::uniform(g);
        let identity: Vec<Vec<f64>> = (0..4)
            .map(|x| (0..4).map(|y| if x == y { 1.0 } else { 0.0 }).collect())
            .collect();
        let j = JointPmf::from_input_and_channel(u.probs(), &identity).unwrap();
        assert!(close(j.joint_cond_entropy(0, &[1], None).unwrap(), 0.0, 1e-12));

        let indep = JointPmf::independent(u.probs(), u.probs()).unwrap();
        assert!(close(
            indep.joint_cond_entropy(0, &[1], Some((g, 1))).unwrap(),
            1.0,
            1e-12
        ));

        // Z uniform, Y = Z + N: brute force over the 16 cells.
        let n = Pmf::table1(g, 0.6).unwrap();
        let channel: Vec<Vec<f64>> = (0..4)
            .map(|z| (0..4).map(|y| n.prob(((y + 4 - z) % 4) as u64)).collect())
            .collect();
        let j = JointPmf::from_input_and_channel(u.probs(), &channel).unwrap();
        let cells: Vec<(usize, usize, f64)> = (0..4)
            .flat_map(|z| {
                let row = &channel[z];
                (0..4).map(move |y| (z, y, 0.25 * row[y]))
            })
            .collect();
        let h = j.joint_cond_entropy(0, &[1], None).unwrap();
        assert!(close(h, brute_cond(&cells), 1e-12));
        assert!(close(h, n.entropy(), 1e-12));

        // Conditioning on ([Z]_1, Y): brute force with B = (y, z mod 2).
        let cells_q: Vec<(usize, usize, f64)> = cells.iter().map(|&(z, y, p)| (z, y * 2 + z % 2, p)).collect();
        let hq = j.joint_cond_entropy(0, &[1], Some((g, 1))).unwrap();
        assert!(close(hq, brute_cond(&cells_q), 1e-12));

        assert!(j.joint_cond_entropy(2, &[1], None).is_err());
        assert!(j
            .joint_cond_entropy(0, &[1], Some((GroupSpec::new(3, 1).unwrap(), 1)))
            .is_err());
    }

    #[test]
    fn full_quotient_reveals_target() {
        let g = z4();
        let n = Pmf::table1(g, 0.3).unwrap();
        let j = JointPmf::independent(n.probs(), &[0.3, 0.7]).unwrap();
        assert!(close(j.joint_cond_entropy(0, &[1], Some((g, 2))).unwrap(), 0.0, 1e-12));
    }

    #[test]
    fn convolution_examples() {
        let g = z4();
        let b = Pmf::bernoulli(g, 0.05).unwrap();
        let w = b.convolve(&b, 1).unwrap();
        for (got, want) in w.probs().iter().zip([0.9025, 0.095, 0.0025, 0.0]) {
            assert!(close(*got, want, 1e-12));
        }
        let n = Pmf::table1(g, 0.6).unwrap();
        assert_eq!(Pmf::point(g, 0).unwrap().convolve(&n, 1).unwrap(), n);
        let u = Pmf::uniform(g).convolve(&n, 3).unwrap();
        assert!(u.is_uniform(1e-12));
        let h = GroupSpec::new(3, 1).unwrap();
        assert!(b.convolve(&Pmf::uniform(h), 1).is_err());
    }

    #[test]
    fn layered_entropy_examples() {
        let g = z4();
        let half = LayeredVariable::single(Pmf::uniform_on(g, &[0, 1]).unwrap());
        assert!(close(half.entropy(None).unwrap(), 1.0, 1e-12));
        let b = LayeredVariable::single(Pmf::bernoulli(g, 0.05).unwrap());
        assert!(close(b.entropy(None).unwrap(), binary_entropy(0.05), 1e-12));
        assert!(close(b.entropy(None).unwrap(), 0.2864, 1e-4));
        let two = LayeredVariable::new(vec![(0.5, Pmf::uniform(g)), (0.5, Pmf::point(g, 0).unwrap())]).unwrap();
        assert!(close(two.entropy(None).unwrap(), 1.0, 1e-12));
        assert!(LayeredVariable::new(vec![(0.5, Pmf::uniform(g))]).is_err());
        assert!(LayeredVariable::new(vec![]).is_err());
    }

    #[test]
    fn layered_convolution_examples() {
        let g = z4();
        let b = LayeredVariable::single(Pmf::bernoulli(g, 0.05).unwrap());
        let w = b.convolve(&b).unwrap();
        assert!(close(w.layers()[0].1.prob(1), 0.095, 1e-12));

        let u = LayeredVariable::new(vec![
            (0.25, Pmf::table1(g, 0.2).unwrap()),
            (0.75, Pmf::bernoulli(g, 0.3).unwrap()),
        ])
        .unwrap();
        let zero = LayeredVariable::new(vec![
            (0.25, Pmf::point(g, 0).unwrap()),
            (0.75, Pmf::point(g, 0).unwrap()),
        ])
        .unwrap();
        assert_eq!(u.convolve(&zero).unwrap(), u);

        let unif = LayeredVariable::new(vec![(0.25, Pmf::uniform(g)), (0.75, Pmf::uniform(g))]).unwrap();
        for (_, p) in unif.convolve(&u).unwrap().layers() {
            assert!(p.is_uniform(1e-12));
        }

        let other = LayeredVariable::new(vec![(0.5, Pmf::uniform(g)), (0.5, Pmf::uniform(g))]).unwrap();
        assert_eq!(u.convolve(&other), Err(Error::WeightMismatch));
    }
}
