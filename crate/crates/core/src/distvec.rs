//! Finite probability vectors and the operators the certification bounds are
//! phrased in: max removal, tail truncation, ℓp quasi-norms and Rényi
//! entropies. All entropies are in bits.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Tolerance on `|Σ entries − 1|` for a vector to count as normalized.
pub const NORMALIZATION_TOL: f64 = 1e-9;

/// Relative slack when comparing an accumulated tail weight with `eps`.
const TAIL_REL_SLACK: f64 = 1e-12;

/// Magic prefix of the binary column format.
pub const BINARY_MAGIC: &[u8; 5] = b"PVEC1";

/// Neumaier-compensated summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Compensated sum of an iterator of floats.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<CompensatedSum>().value()
}

/// A finite vector of non-negative reals, optionally a probability
/// distribution.
///
/// The same type carries distributions and the truncated pseudo-distributions
/// derived from them; `is_normalized` tells the two apart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ProbVec {
    entries: Vec<f64>,
    normalized: bool,
}

impl TryFrom<Vec<f64>> for ProbVec {
    type Error = Error;

    fn try_from(entries: Vec<f64>) -> Result<Self> {
        ProbVec::new(entries)
    }
}

impl From<ProbVec> for Vec<f64> {
    fn from(v: ProbVec) -> Self {
        v.entries
    }
}

impl ProbVec {
    /// Validates `entries` (non-empty, finite, non-negative) and records
    /// whether they sum to one.
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::invalid(
                "probability vector must have dimension >= 1",
            ));
        }
        if let Some((i, x)) = entries
            .iter()
            .enumerate()
            .find(|(_, x)| !x.is_finite() || **x < 0.0)
        {
            return Err(Error::invalid(format!(
                "entry {i} = {x} is not a finite non-negative number"
            )));
        }
        let normalized =
            (compensated_sum(entries.iter().copied()) - 1.0).abs() <= NORMALIZATION_TOL;
        Ok(Self {
            entries,
            normalized,
        })
    }

    /// Like [`ProbVec::new`] but fails unless the entries sum to one.
    pub fn distribution(entries: Vec<f64>) -> Result<Self> {
        let v = Self::new(entries)?;
        v.require_normalized()?;
        Ok(v)
    }

    /// Rescales non-negative weights to a distribution.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        let v = Self::new(weights)?;
        v.normalize()
    }

    pub fn uniform(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("uniform distribution needs dim >= 1"));
        }
        Self::new(vec![1.0 / dim as f64; dim])
    }

    pub fn point_mass(dim: usize, at: usize) -> Result<Self> {
        if at >= dim {
            return Err(Error::invalid(format!(
                "point mass index {at} outside dimension {dim}"
            )));
        }
        let mut e = vec![0.0; dim];
        e[at] = 1.0;
        Self::new(e)
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<f64> {
        self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn get(&self, i: usize) -> f64 {
        self.entries[i]
    }

    pub fn total(&self) -> f64 {
        compensated_sum(self.entries.iter().copied())
    }

    pub fn require_normalized(&self) -> Result<()> {
        if self.normalized {
            Ok(())
        } else {
            Err(Error::NotNormalized { sum: self.total() })
        }
    }

    /// Divides by the total weight.
    pub fn normalize(&self) -> Result<Self> {
        let total = self.total();
        if total <= 0.0 {
            return Err(Error::invalid("cannot normalize an all-zero vector"));
        }
        Self::new(self.entries.iter().map(|x| x / total).collect())
    }

    /// `c · v` for `c >= 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c.is_finite() && c >= 0.0) {
            return Err(Error::invalid(format!(
                "scale factor {c} must be finite and >= 0"
            )));
        }
        Self::new(self.entries.iter().map(|x| c * x).collect())
    }

    /// Index of the largest entry; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &x) in self.entries.iter().enumerate().skip(1) {
            if x > self.entries[best] {
                best = i;
            }
        }
        best
    }

    pub fn max_entry(&self) -> f64 {
        self.entries[self.argmax()]
    }

    /// Number of non-zero entries.
    pub fn support_size(&self) -> usize {
        self.entries.iter().filter(|&&x| x != 0.0).count()
    }

    pub fn support(&self) -> Vec<usize> {
        self.entries
            .iter()
            .enumerate()
            .filter(|(_, &x)| x != 0.0)
            .map(|(i, _)| i)
            .collect()
    }

    /// ℓp quasi-norm. `p = 0` counts the support, `p = ∞` is the max norm.
    pub fn lp_quasinorm(&self, p: f64) -> Result<f64> {
        if p.is_nan() || p < 0.0 {
            return Err(Error::invalid(format!(
                "quasi-norm exponent p = {p} must be >= 0"
            )));
        }
        if p == 0.0 {
            return Ok(self.support_size() as f64);
        }
        if p.is_infinite() {
            return Ok(self.max_entry());
        }
        let max = self.max_entry();
        if max == 0.0 {
            return Ok(0.0);
        }
        // Scale by the max entry so that large p cannot underflow.
        let s = compensated_sum(self.entries.iter().map(|&x| (x / max).powf(p)));
        Ok(max * s.powf(1.0 / p))
    }

    /// Copy with exactly one maximal entry (lowest index on ties) set to
    /// zero. The result is never flagged normalized unless it still sums to
    /// one, i.e. the removed entry was zero.
    pub fn remove_max(&self) -> Self {
        let mut entries = self.entries.clone();
        entries[self.argmax()] = 0.0;
        Self::new(entries).expect("zeroing an entry keeps a vector valid")
    }

    /// Zeroes the smallest non-zero entries, ascending by value then index,
    /// while the removed weight stays at most `eps`.
    pub fn truncate_tail(&self, eps: f64) -> Result<Self> {
        Ok(self.tail_partition(eps)?.0)
    }

    /// `truncate_tail` and the indices it zeroed, in removal order.
    pub fn tail_partition(&self, eps: f64) -> Result<(Self, Vec<usize>)> {
        if eps.is_nan() || eps < 0.0 {
            return Err(Error::invalid(format!(
                "tail weight eps = {eps} must be >= 0"
            )));
        }
        let mut order: Vec<usize> = self.support();
        order.sort_by(|&a, &b| {
            self.entries[a]
                .partial_cmp(&self.entries[b])
                .expect("entries are finite")
                .then(a.cmp(&b))
        });
        let budget = eps * (1.0 + TAIL_REL_SLACK);
        let mut removed = CompensatedSum::new();
        let mut entries = self.entries.clone();
        let mut zeroed = Vec::new();
        for i in order {
            let x = self.entries[i];
            if removed.value() + x > budget {
                break;
            }
            removed.add(x);
            entries[i] = 0.0;
            zeroed.push(i);
        }
        Ok((Self::new(entries)?, zeroed))
    }

    /// Max removal followed by tail truncation with weight `eps`.
    pub fn truncated_core(&self, eps: f64) -> Result<Self> {
        self.remove_max().truncate_tail(eps)
    }

    /// Rényi entropy of order `alpha` in bits; `alpha = ∞` is the
    /// min-entropy and `alpha = 0` the log of the support size.
    pub fn renyi_entropy(&self, alpha: f64) -> Result<f64> {
        self.require_normalized()?;
        if alpha.is_nan() || alpha < 0.0 {
            return Err(Error::invalid(format!("Rényi order {alpha} must be >= 0")));
        }
        if alpha == 1.0 {
            return Err(Error::invalid(
                "Rényi order 1 (Shannon entropy) is not supported",
            ));
        }
        if alpha.is_infinite() {
            return self.min_entropy();
        }
        if alpha == 0.0 {
            return Ok((self.support_size() as f64).log2());
        }
        let max = self.max_entry();
        let scaled = compensated_sum(self.entries.iter().map(|&x| (x / max).powf(alpha)));
        let log_norm = max.log2() + scaled.log2() / alpha;
        Ok(alpha / (1.0 - alpha) * log_norm)
    }

    /// `−log₂ max p`.
    pub fn min_entropy(&self) -> Result<f64> {
        self.require_normalized()?;
        let max = self.max_entry();
        if max <= 0.0 {
            return Err(Error::invalid(
                "min-entropy of an all-zero vector is undefined",
            ));
        }
        Ok(-max.log2())
    }

    /// Collision probability `Σ p²`.
    pub fn collision_probability(&self) -> f64 {
        compensated_sum(self.entries.iter().map(|x| x * x))
    }

    /// Weight on a set of outcomes.
    pub fn weight_of(&self, subset: &[usize]) -> Result<f64> {
        let mut acc = CompensatedSum::new();
        for &i in subset {
            acc.add(*self.entries.get(i).ok_or_else(|| {
                Error::invalid(format!("subset index {i} outside dimension {}", self.dim()))
            })?);
        }
        Ok(acc.value())
    }

    /// Restriction to `subset` renormalized by its weight, plus that weight.
    ///
    /// The restricted vector keeps the ambient dimension; entries outside
    /// `subset` are zero. Duplicate indices are ignored.
    pub fn postselect(&self, subset: &[usize]) -> Result<(Self, f64)> {
        if subset.is_empty() {
            return Err(Error::invalid("post-selection subset must be non-empty"));
        }
        let mut keep = vec![false; self.dim()];
        for &i in subset {
            if i >= self.dim() {
                return Err(Error::invalid(format!(
                    "subset index {i} outside dimension {}",
                    self.dim()
                )));
            }
            keep[i] = true;
        }
        let restricted: Vec<f64> = self
            .entries
            .iter()
            .zip(&keep)
            .map(|(&x, &k)| if k { x } else { 0.0 })
            .collect();
        let weight = compensated_sum(restricted.iter().copied());
        if weight <= 0.0 {
            return Err(Error::invalid("post-selection subset has zero probability"));
        }
        Ok((
            Self::new(restricted.into_iter().map(|x| x / weight).collect())?,
            weight,
        ))
    }

    /// Writes the `PVEC1` binary column format: magic, little-endian `u64`
    /// length, then little-endian `f64` entries.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(BINARY_MAGIC)?;
        w.write_all(&(self.entries.len() as u64).to_le_bytes())?;
        for x in &self.entries {
            w.write_all(&x.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 5];
        r.read_exact(&mut magic)?;
        if &magic != BINARY_MAGIC {
            return Err(Error::Format("missing PVEC1 magic".into()));
        }
        let mut len = [0u8; 8];
        r.read_exact(&mut len)?;
        let len = u64::from_le_bytes(len);
        let len =
            usize::try_from(len).map_err(|_| Error::Format(format!("length {len} too large")))?;
        let mut entries = Vec::with_capacity(len.min(1 << 24));
        let mut buf = [0u8; 8];
        for _ in 0..len {
            r.read_exact(&mut buf)?;
            entries.push(f64::from_le_bytes(buf));
        }
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(Error::Format("trailing bytes after PVEC1 payload".into()));
        }
        Self::new(entries)
    }

    pub fn to_binary(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(13 + 8 * self.dim());
        self.write_binary(&mut out)
            .expect("writing to a Vec cannot fail");
        out
    }
}

/// ℓ1 (twice total-variation) distance.
pub fn l1_distance(p: &ProbVec, q: &ProbVec) -> Result<f64> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch {
            left: p.dim(),
            right: q.dim(),
        });
    }
    Ok(compensated_sum(
        p.entries.iter().zip(&q.entries).map(|(a, b)| (a - b).abs()),
    ))
}
