//! Arithmetic in Z_{p^r}: elements, vectors, matrices and the subgroup chain
//! Z_{p^r} = H_0 ⊃ H_1 ⊃ ... ⊃ H_r = {0}, with H_s = p^s Z_{p^r} and the
//! transversal T_s = {0, ..., p^s - 1}.
//!
//! Every a in Z_{p^r} decomposes uniquely as a = t + h with t in T_s and
//! h in H_s; the map a -> t is written [a]_s and equals a mod p^s.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported group order. Keeps every product of two elements inside
/// a `u64`.
pub const MAX_ORDER: u64 = 1 << 32;

/// The ambient group Z_{p^r}.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawGroupSpec", into = "RawGroupSpec")]
pub struct GroupSpec {
    p: u64,
    r: u32,
    q: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGroupSpec {
    p: u64,
    r: u32,
}

impl TryFrom<RawGroupSpec> for GroupSpec {
    type Error = Error;

    fn try_from(raw: RawGroupSpec) -> Result<Self> {
        GroupSpec::new(raw.p, raw.r)
    }
}

impl From<GroupSpec> for RawGroupSpec {
    fn from(g: GroupSpec) -> Self {
        RawGroupSpec { p: g.p, r: g.r }
    }
}

fn is_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= p {
        if p.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

impl GroupSpec {
    pub fn new(p: u64, r: u32) -> Result<Self> {
        if !is_prime(p) {
            return Err(Error::InvalidGroup(format!("{p} is not prime")));
        }
        if r == 0 {
            return Err(Error::InvalidGroup("exponent r must be at least 1".into()));
        }
        let q = p
            .checked_pow(r)
            .filter(|&q| q <= MAX_ORDER)
            .ok_or_else(|| Error::InvalidGroup(format!("{p}^{r} exceeds 2^32")))?;
        Ok(GroupSpec { p, r, q })
    }

    /// Z_4, the group of every worked example.
    pub fn z4() -> Self {
        GroupSpec { p: 2, r: 2, q: 4 }
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn r(&self) -> u32 {
        self.r
    }

    /// Group order p^r.
    pub fn order(&self) -> u64 {
        self.q
    }

    /// log2 of the group order, r·log2(p).
    pub fn log2_order(&self) -> f64 {
        self.r as f64 * (self.p as f64).log2()
    }

    pub fn check_index(&self, s: u32) -> Result<()> {
        if s > self.r {
            Err(Error::IndexOutOfRange { s, r: self.r })
        } else {
            Ok(())
        }
    }

    /// p^s for 0 <= s <= r.
    pub fn p_pow(&self, s: u32) -> Result<u64> {
        self.check_index(s)?;
        Ok(self.p.pow(s))
    }

    pub fn element(&self, value: u64) -> Result<GroupElement> {
        if value >= self.q {
            return Err(Error::NotAnElement { value, order: self.q });
        }
        Ok(GroupElement { spec: *self, value })
    }

    pub fn zero(&self) -> GroupElement {
        GroupElement { spec: *self, value: 0 }
    }

    pub fn elements(&self) -> impl Iterator<Item = GroupElement> + '_ {
        (0..self.q).map(move |value| GroupElement { spec: *self, value })
    }

    #[inline]
    pub fn add_raw(&self, a: u64, b: u64) -> u64 {
        (a + b) % self.q
    }

    #[inline]
    pub fn sub_raw(&self, a: u64, b: u64) -> u64 {
        (a + self.q - b) % self.q
    }

    #[inline]
    pub fn mul_raw(&self, a: u64, c: u64) -> u64 {
        (a * (c % self.q)) % self.q
    }

    #[inline]
    pub fn neg_raw(&self, a: u64) -> u64 {
        (self.q - a) % self.q
    }

    /// [a]_s on a raw value. Caller guarantees s <= r.
    #[inline]
    pub fn quotient_raw(&self, a: u64, s: u32) -> u64 {
        a % self.p.pow(s)
    }

    /// Largest s with a in H_s; r for the zero element.
    pub fn valuation(&self, a: u64) -> u32 {
        let a = a % self.q;
        if a == 0 {
            return self.r;
        }
        let mut s = 0;
        let mut v = a;
        while v.is_multiple_of(self.p) {
            v /= self.p;
            s += 1;
        }
        s
    }

    /// H_s = {0, p^s, 2p^s, ..., (p^{r-s} - 1) p^s}.
    pub fn subgroup(&self, s: u32) -> Result<Vec<GroupElement>> {
        let step = self.p_pow(s)?;
        Ok((0..self.q / step)
            .map(|j| GroupElement {
                spec: *self,
                value: j * step,
            })
            .collect())
    }

    /// T_s = {0, 1, ..., p^s - 1}.
    pub fn transversal(&self, s: u32) -> Result<Vec<GroupElement>> {
        let size = self.p_pow(s)?;
        Ok((0..size).map(|value| GroupElement { spec: *self, value }).collect())
    }

    fn ensure_same(&self, other: &GroupSpec) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GroupMismatch {
                left: self.q,
                right: other.q,
            })
        }
    }
}

impl fmt::Display for GroupSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Z_{{{}^{}}}", self.p, self.r)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct GroupElement {
    spec: GroupSpec,
    value: u64,
}

impl GroupElement {
    pub fn spec(&self) -> GroupSpec {
        self.spec
    }

    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn add(&self, other: &GroupElement) -> Result<GroupElement> {
        self.spec.ensure_same(&other.spec)?;
        Ok(GroupElement {
            spec: self.spec,
            value: self.spec.add_raw(self.value, other.value),
        })
    }

    pub fn neg(&self) -> GroupElement {
        GroupElement {
            spec: self.spec,
            value: self.spec.neg_raw(self.value),
        }
    }

    /// a added to itself c times.
    pub fn scalar_mul(&self, c: u64) -> GroupElement {
        GroupElement {
            spec: self.spec,
            value: self.spec.mul_raw(self.value, c),
        }
    }

    /// The transversal representative [a]_s in T_s.
    pub fn quotient(&self, s: u32) -> Result<GroupElement> {
        self.spec.check_index(s)?;
        Ok(GroupElement {
            spec: self.spec,
            value: self.spec.quotient_raw(self.value, s),
        })
    }

    pub fn in_subgroup(&self, s: u32) -> Result<bool> {
        let step = self.spec.p_pow(s)?;
        Ok(self.value.is_multiple_of(step))
    }
}

impl fmt::Display for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

/// A vector in Z_{p^r}^n.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GroupVector {
    spec: GroupSpec,
    entries: Vec<u64>,
}

impl GroupVector {
    pub fn new(spec: GroupSpec, entries: Vec<u64>) -> Result<Self> {
        if let Some(&bad) = entries.iter().find(|&&e| e >= spec.q) {
            return Err(Error::NotAnElement {
                value: bad,
                order: spec.q,
            });
        }
        Ok(GroupVector { spec, entries })
    }

    pub fn zeros(spec: GroupSpec, n: usize) -> Self {
        GroupVector {
            spec,
            entries: vec![0; n],
        }
    }

    pub fn random<R: Rng + ?Sized>(spec: GroupSpec, n: usize, rng: &mut R) -> Self {
        GroupVector {
            spec,
            entries: (0..n).map(|_| rng.gen_range(0..spec.q)).collect(),
        }
    }

    pub fn spec(&self) -> GroupSpec {
        self.spec
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[u64] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<u64> {
        self.entries
    }

    pub fn get(&self, i: usize) -> GroupElement {
        GroupElement {
            spec: self.spec,
            value: self.entries[i],
        }
    }

    fn check_compatible(&self, other: &GroupVector) -> Result<()> {
        self.spec.ensure_same(&other.spec)?;
        if self.len() != other.len() {
            return Err(Error::Dimension(format!(
                "vector lengths {} and {}",
                self.len(),
                other.len()
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &GroupVector) -> Result<GroupVector> {
        self.check_compatible(other)?;
        let spec = self.spec;
        Ok(GroupVector {
            spec,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(&a, &b)| spec.add_raw(a, b))
                .collect(),
        })
    }

    pub fn sub(&self, other: &GroupVector) -> Result<GroupVector> {
        self.check_compatible(other)?;
        let spec = self.spec;
        Ok(GroupVector {
            spec,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(&a, &b)| spec.sub_raw(a, b))
                .collect(),
        })
    }

    pub fn scale(&self, c: u64) -> GroupVector {
        let spec = self.spec;
        GroupVector {
            spec,
            entries: self.entries.iter().map(|&a| spec.mul_raw(a, c)).collect(),
        }
    }

    /// Entrywise [x]_s.
    pub fn quotient(&self, s: u32) -> Result<GroupVector> {
        self.spec.check_index(s)?;
        let spec = self.spec;
        Ok(GroupVector {
            spec,
            entries: self.entries.iter().map(|&a| spec.quotient_raw(a, s)).collect(),
        })
    }

    /// Whether x lies in H_s^n.
    pub fn in_subgroup(&self, s: u32) -> Result<bool> {
        let step = self.spec.p_pow(s)?;
        Ok(self.entries.iter().all(|&a| a % step == 0))
    }

    /// Largest s with x in H_s^n (r for the zero vector).
    pub fn depth(&self) -> u32 {
        self.entries
            .iter()
            .map(|&a| self.spec.valuation(a))
            .min()
            .unwrap_or(self.spec.r)
    }

    pub fn vec_mat_mul(&self, g: &GroupMatrix) -> Result<GroupVector> {
        g.left_mul(self)
    }
}

/// A k × n matrix over Z_{p^r}, row-major.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GroupMatrix {
    spec: GroupSpec,
    rows: usize,
    cols: usize,
    entries: Vec<u64>,
}

impl GroupMatrix {
    pub fn new(spec: GroupSpec, rows: usize, cols: usize, entries: Vec<u64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension("matrix dimensions must be positive".into()));
        }
        if entries.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries for a {rows}x{cols} matrix",
                entries.len()
            )));
        }
        if let Some(&bad) = entries.iter().find(|&&e| e >= spec.q) {
            return Err(Error::NotAnElement {
                value: bad,
                order: spec.q,
            });
        }
        Ok(GroupMatrix {
            spec,
            rows,
            cols,
            entries,
        })
    }

    pub fn from_rows(spec: GroupSpec, rows: &[Vec<u64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Dimension("ragged matrix rows".into()));
        }
        GroupMatrix::new(spec, rows.len(), cols, rows.concat())
    }

    /// Entries i.i.d. uniform over Z_{p^r}.
    pub fn random<R: Rng + ?Sized>(spec: GroupSpec, rows: usize, cols: usize, rng: &mut R) -> Self {
        GroupMatrix {
            spec,
            rows,
            cols,
            entries: (0..rows * cols).map(|_| rng.gen_range(0..spec.q)).collect(),
        }
    }

    pub fn spec(&self) -> GroupSpec {
        self.spec
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &[u64] {
        &self.entries
    }

    pub fn row(&self, i: usize) -> &[u64] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<u64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    /// u·G for a vector u of length `rows`.
    pub fn left_mul(&self, u: &GroupVector) -> Result<GroupVector> {
        self.spec.ensure_same(&u.spec)?;
        if u.len() != self.rows {
            return Err(Error::Dimension(format!(
                "vector of length {} times {}x{} matrix",
                u.len(),
                self.rows,
                self.cols
            )));
        }
        let mut out = vec![0u64; self.cols];
        self.accumulate(u.entries(), &mut out);
        Ok(GroupVector {
            spec: self.spec,
            entries: out,
        })
    }

    /// out += u·G on raw slices. Lengths are the caller's responsibility.
    #[inline]
    pub fn accumulate(&self, u: &[u64], out: &mut [u64]) {
        let q = self.spec.q;
        for (i, &c) in u.iter().enumerate() {
            if c == 0 {
                continue;
            }
            for (o, &g) in out.iter_mut().zip(self.row(i)) {
                *o = (*o + c * g) % q;
            }
        }
    }
}
