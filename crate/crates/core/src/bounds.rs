//! Closed-form sample-complexity bounds for ε-certification.
//!
//! Every bound is evaluated pre-asymptotically with its universal constant
//! exposed as a parameter. The constants `c1` (upper bound) and `c2` (lower
//! bound) are not known numerically, so every [`BoundReport`] carries a note
//! saying the value holds up to that constant.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::boson;
use crate::distvec::ProbVec;
use crate::{Error, Result};

const TWO_THIRDS: f64 = 2.0 / 3.0;

const CONSTANT_NOTE: &str = "up to unspecified universal constant";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    VvLower,
    VvUpper,
    Lemma1Lower,
    Lemma1Upper,
    Postselected,
    MinEntropyBased,
    Iqp,
    Design,
    BosonA,
    BosonB,
}

/// Which argument of `max{1/ε, ‖·‖₂/₃/ε²}` is larger.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    InverseEps,
    Quasinorm,
}

/// An evaluated bound together with every intermediate quantity used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub kind: BoundKind,
    /// Number of samples.
    pub value: f64,
    /// Named inputs and intermediates, serialized in sorted key order.
    pub inputs: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub branch: Option<Branch>,
    /// Set when the bound degenerates (clamped or post-selection too weak).
    pub trivial: bool,
    pub notes: Vec<String>,
}

impl BoundReport {
    fn new(kind: BoundKind) -> Self {
        Self {
            kind,
            value: 0.0,
            inputs: BTreeMap::new(),
            branch: None,
            trivial: false,
            notes: Vec::new(),
        }
    }

    fn input(mut self, name: &str, value: f64) -> Self {
        self.inputs.insert(name.to_string(), value);
        self
    }

    fn note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.inputs.get(name).copied()
    }
}

fn check_open_unit(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} = {x} must lie in (0, 1)")))
    }
}

fn check_positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} = {x} must be positive")))
    }
}

/// `c · max{1/ε, q/ε²}` and the branch that won.
fn max_branch(c: f64, eps: f64, q: f64) -> (f64, Branch) {
    let inv = 1.0 / eps;
    let quasi = q / (eps * eps);
    if quasi > inv {
        (c * quasi, Branch::Quasinorm)
    } else {
        (c * inv, Branch::InverseEps)
    }
}

fn vv_bound(kind: BoundKind, p: &ProbVec, eps: f64, c: f64, tail: f64) -> Result<BoundReport> {
    p.require_normalized()?;
    check_open_unit("eps", eps)?;
    check_positive("constant", c)?;
    let core = p.truncated_core(tail)?;
    let q = core.lp_quasinorm(TWO_THIRDS)?;
    let (value, branch) = max_branch(c, eps, q);
    let constant_name = if kind == BoundKind::VvUpper {
        "c1"
    } else {
        "c2"
    };
    let mut r = BoundReport::new(kind)
        .input("eps", eps)
        .input(constant_name, c)
        .input("tail_weight", tail)
        .input("norm23", q)
        .input("p0", p.max_entry())
        .input("support", core.support_size() as f64)
        .note(CONSTANT_NOTE);
    r.value = value;
    r.branch = Some(branch);
    Ok(r)
}

/// No ε-certification test exists from fewer than
/// `c2 · max{1/ε, ‖p₋₂ε⁻ᵐᵃˣ‖₂/₃ / ε²}` samples.
pub fn vv_lower_bound(p: &ProbVec, eps: f64, c2: f64) -> Result<BoundReport> {
    vv_bound(BoundKind::VvLower, p, eps, c2, 2.0 * eps)
}

/// An ε-certification test exists from `c1 · max{1/ε, ‖p₋ε/16⁻ᵐᵃˣ‖₂/₃ / ε²}`
/// samples.
pub fn vv_upper_bound(p: &ProbVec, eps: f64, c1: f64) -> Result<BoundReport> {
    vv_bound(BoundKind::VvUpper, p, eps, c1, eps / 16.0)
}

/// Min-entropy sandwich on `‖p₋ε⁻ᵐᵃˣ‖₂/₃`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Norm23Bounds {
    pub lower: f64,
    pub upper: f64,
    pub min_entropy: f64,
    pub eps: f64,
    pub core_support: usize,
}

impl Norm23Bounds {
    pub fn lower_report(&self) -> BoundReport {
        let mut r = self.report(BoundKind::Lemma1Lower);
        r.value = self.lower;
        r.trivial = self.lower == 0.0;
        r
    }

    pub fn upper_report(&self) -> BoundReport {
        let mut r = self.report(BoundKind::Lemma1Upper);
        r.value = self.upper;
        r
    }

    fn report(&self, kind: BoundKind) -> BoundReport {
        BoundReport::new(kind)
            .input("eps", self.eps)
            .input("h_inf", self.min_entropy)
            .input("support", self.core_support as f64)
            .note("bounds on the 2/3 quasi-norm of the truncated core, not a sample count")
    }
}

/// `2^{H∞/2}(1 − ε − 2^{−H∞})^{3/2} ≤ ‖p₋ε⁻ᵐᵃˣ‖₂/₃ ≤ (1 − 2^{−H∞})·√supp`.
///
/// The lower bound is clamped to zero when the bracket is negative.
pub fn norm23_bounds(p: &ProbVec, eps: f64) -> Result<Norm23Bounds> {
    let h = p.min_entropy()?;
    let core = p.truncated_core(eps)?;
    let p_max = h.exp2().recip();
    let bracket = 1.0 - eps - p_max;
    let lower = if bracket > 0.0 {
        (0.5 * h).exp2() * bracket.powf(1.5)
    } else {
        0.0
    };
    let support = core.support_size();
    let upper = (1.0 - p_max) * (support as f64).sqrt();
    Ok(Norm23Bounds {
        lower,
        upper,
        min_entropy: h,
        eps,
        core_support: support,
    })
}

/// Lower bound from post-selecting onto the outcome set `subset`.
pub fn postselected_lower_bound(
    p: &ProbVec,
    subset: &[usize],
    eps: f64,
    c2: f64,
) -> Result<BoundReport> {
    p.require_normalized()?;
    check_open_unit("eps", eps)?;
    check_positive("c2", c2)?;
    let (p_f, weight) = p.postselect(subset)?;
    let tail = 2.0 * eps / weight;
    let q = p_f.truncated_core(tail)?.lp_quasinorm(TWO_THIRDS)?;
    let (value, branch) = max_branch(c2, eps, weight * q);
    let mut r = BoundReport::new(BoundKind::Postselected)
        .input("eps", eps)
        .input("c2", c2)
        .input("subset_weight", weight)
        .input("subset_size", subset.len() as f64)
        .input("tail_weight", tail)
        .input("norm23", q)
        .note(CONSTANT_NOTE);
    r.value = value;
    r.branch = Some(branch);
    if weight <= 2.0 * eps {
        r.trivial = true;
        r = r.note("post-selected weight <= 2 eps: bound is trivial");
    }
    Ok(r)
}

/// `c2 · 2^{h/2}(1 − 2ε − 2^{−h})^{3/2} / ε²`, clamped at zero.
pub fn smin_from_min_entropy(h_inf: f64, eps: f64, c2: f64) -> Result<BoundReport> {
    if !(h_inf >= 0.0) {
        return Err(Error::invalid(format!("min-entropy {h_inf} must be >= 0")));
    }
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::invalid(format!("eps = {eps} must lie in (0, 1/2)")));
    }
    check_positive("c2", c2)?;
    let bracket = 1.0 - 2.0 * eps - (-h_inf).exp2();
    let mut r = BoundReport::new(BoundKind::MinEntropyBased)
        .input("h_inf", h_inf)
        .input("eps", eps)
        .input("c2", c2)
        .note(CONSTANT_NOTE);
    if bracket > 0.0 {
        r.value = c2 / (eps * eps) * (0.5 * h_inf).exp2() * bracket.powf(1.5);
    } else {
        r.trivial = true;
        r = r.note("1 - 2 eps - 2^-h_inf <= 0: clamped to 0");
    }
    Ok(r)
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta <= 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "delta = {delta} must lie in (0, 1]"
        )))
    }
}

fn from_entropy_bound(
    kind: BoundKind,
    n: u32,
    delta: f64,
    h: f64,
    eps: f64,
    c2: f64,
) -> Result<BoundReport> {
    let clamped = h.max(0.0);
    let mut r = smin_from_min_entropy(clamped, eps, c2)?;
    r.kind = kind;
    r.inputs.insert("n".into(), n as f64);
    r.inputs.insert("delta".into(), delta);
    r.inputs.insert("h_inf_unclamped".into(), h);
    r.notes.push(format!(
        "holds with probability >= 1 - delta = {} over the instance",
        1.0 - delta
    ));
    Ok(r)
}

/// IQP: with probability `1 − δ`, `H∞ ≥ ½(n + log₂(δ/3))`.
pub fn smin_iqp(n: u32, delta: f64, eps: f64, c2: f64) -> Result<BoundReport> {
    check_delta(delta)?;
    let h = 0.5 * (n as f64 + (delta / 3.0).log2());
    from_entropy_bound(BoundKind::Iqp, n, delta, h, eps, c2)
}

/// Relative ε̃-approximate 2-designs: `H∞ ≥ ½(n + log₂(δ/(2(1+ε̃))))`.
pub fn smin_design(n: u32, delta: f64, eps: f64, eps_tilde: f64, c2: f64) -> Result<BoundReport> {
    check_delta(delta)?;
    if !(eps_tilde >= 0.0) {
        return Err(Error::invalid(format!(
            "eps_tilde = {eps_tilde} must be >= 0"
        )));
    }
    let h = 0.5 * (n as f64 + (delta / (2.0 * (1.0 + eps_tilde))).log2());
    let mut r = from_entropy_bound(BoundKind::Design, n, delta, h, eps, c2)?;
    r.inputs.insert("eps_tilde".into(), eps_tilde);
    Ok(r)
}

/// Parameters of the post-selected boson-sampling bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BosonBoundParams {
    pub n: u32,
    pub m: u64,
    pub delta: f64,
    pub eps: f64,
    /// Upper bound on the non-collision-free weight.
    pub zeta: f64,
    /// Multiplicative-error constant of the Haar/Gaussian comparison.
    pub big_c: f64,
    pub c2: f64,
}

impl BosonBoundParams {
    pub fn new(n: u32, m: u64, delta: f64, eps: f64) -> Self {
        Self {
            n,
            m,
            delta,
            eps,
            zeta: 0.25,
            big_c: 0.0,
            c2: 1.0,
        }
    }
}

/// Boson sampling post-selected onto collision-free outcomes.
///
/// `2H∞ ≥ 2log₂(1−ζ) + log₂δ − log₂((mⁿ/n!)(1+C)(n!)²(n+1)m^{−2n})`, then
/// `s_min = c2 (1−ζ) 2^{H∞/2} (1−ζ−2ε)^{3/2} / ε²`, valid with probability
/// at least `1 − δ − 2n²/(ζm)`.
pub fn smin_boson(params: &BosonBoundParams) -> Result<BoundReport> {
    let BosonBoundParams {
        n,
        m,
        delta,
        eps,
        zeta,
        big_c,
        c2,
    } = *params;
    if n == 0 || m < n as u64 {
        return Err(Error::invalid(format!(
            "need m >= n >= 1, got n = {n}, m = {m}"
        )));
    }
    check_delta(delta)?;
    check_open_unit("eps", eps)?;
    check_open_unit("zeta", zeta)?;
    check_positive("c2", c2)?;
    if !(big_c >= 0.0) {
        return Err(Error::invalid(format!("C = {big_c} must be >= 0")));
    }
    let nf = n as f64;
    let log2_fact = libm::lgamma(nf + 1.0) / std::f64::consts::LN_2;
    // log₂ of |Φ*| bound times the second moment bound, simplified:
    // (mⁿ/n!)(n!)²(n+1)m^{−2n} = n!(n+1)m^{−n}.
    let log_sum_moments =
        log2_fact + (1.0 + big_c).log2() + (nf + 1.0).log2() - nf * (m as f64).log2();
    let two_h = 2.0 * (1.0 - zeta).log2() + delta.log2() - log_sum_moments;
    let h = (0.5 * two_h).max(0.0);
    let failure = delta + 2.0 * nf * nf / (zeta * m as f64);

    let mut r = BoundReport::new(BoundKind::BosonA)
        .input("n", nf)
        .input("m", m as f64)
        .input("delta", delta)
        .input("eps", eps)
        .input("zeta", zeta)
        .input("C", big_c)
        .input("c2", c2)
        .input("log2_second_moment_sum", log_sum_moments)
        .input("h_inf", h)
        .input("failure_probability", failure)
        .note(CONSTANT_NOTE)
        .note("conditional on the multiplicative-error bound with constant C");
    let bracket = 1.0 - zeta - 2.0 * eps;
    if bracket <= 0.0 {
        r.trivial = true;
        r.value = c2 / eps;
        r.branch = Some(Branch::InverseEps);
        r = r.note("1 - zeta - 2 eps <= 0: only the 1/eps bound survives");
    } else {
        r.value = c2 / (eps * eps) * (1.0 - zeta) * (0.5 * h).exp2() * bracket.powf(1.5);
        r.branch = Some(Branch::Quasinorm);
    }
    Ok(r)
}

/// Boson sampling without post-selection, from the event that every outcome
/// has probability below `2^{−2n}`, i.e. `H∞ ≥ 2n`.
///
/// `c` and `big_c` feed the explicit tail bound on that event; the bound is
/// `+∞` (uninformative) when the geometric-series condition fails.
pub fn smin_boson_flat(
    n: u32,
    m: u64,
    eps: f64,
    c: f64,
    big_c: f64,
    c2: f64,
) -> Result<BoundReport> {
    let tail = boson::bs_flatness_tail_bound(n, m, c, big_c)?;
    let mut r = smin_from_min_entropy(2.0 * n as f64, eps, c2)?;
    r.kind = BoundKind::BosonB;
    r.inputs.insert("n".into(), n as f64);
    r.inputs.insert("m".into(), m as f64);
    r.inputs.insert("c".into(), c);
    r.inputs.insert("C".into(), big_c);
    r.inputs.insert("nu".into(), boson::infer_nu(n, m, c)?);
    r.inputs.insert("failure_probability".into(), tail.min(1.0));
    r.notes.push(
        "failure probability exp(-Omega(n^(nu-2-1/n))) for nu > 3; explicit value above".into(),
    );
    Ok(r)
}
