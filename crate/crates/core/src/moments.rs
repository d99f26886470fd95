//! Monte-Carlo second moments of random-circuit ensembles and the checks
//! built on them: the min-entropy tail bound and anti-concentration via
//! Paley–Zygmund.
//!
//! Instance `i` of every estimate is drawn from RNG stream `(seed, i)` and
//! per-instance results are reduced in index order, so estimates are
//! bit-for-bit reproducible regardless of thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boson::{boson_distribution, BosonInstance, ModeOccupation};
use crate::distvec::{compensated_sum, ProbVec};
use crate::qsim::CircuitEnsemble;
use crate::rng::{derive_seed, stream_rng, StreamRng};
use crate::{Error, Result};

/// A random family of output distributions over a fixed outcome space.
pub trait Ensemble: Sync {
    fn outcome_count(&self) -> usize;

    fn draw(&self, rng: &mut StreamRng) -> Result<ProbVec>;

    fn label(&self) -> String;
}

impl Ensemble for CircuitEnsemble {
    fn outcome_count(&self) -> usize {
        CircuitEnsemble::outcome_count(self)
    }

    fn draw(&self, rng: &mut StreamRng) -> Result<ProbVec> {
        CircuitEnsemble::draw(self, rng)
    }

    fn label(&self) -> String {
        let kind = serde_json::to_value(self.kind).expect("enum serializes");
        let kind = kind.as_str().unwrap_or("circuit");
        match self.kind {
            crate::qsim::EnsembleKind::LocalRandom => {
                format!("{kind}(n={}, depth={})", self.n, self.depth)
            }
            _ => format!("{kind}(n={})", self.n),
        }
    }
}

/// Boson sampling with Haar-random interferometers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BosonEnsemble {
    pub n: usize,
    pub m: usize,
}

impl BosonEnsemble {
    pub fn new(n: usize, m: usize) -> Result<Self> {
        if n == 0 || m < n {
            return Err(Error::invalid(format!(
                "need m >= n >= 1, got n = {n}, m = {m}"
            )));
        }
        Ok(Self { n, m })
    }

    /// Outcome labels in the order [`Ensemble::draw`] uses.
    pub fn outcomes(&self) -> Result<Vec<ModeOccupation>> {
        crate::boson::enumerate_phi(self.m, self.n, false)
    }

    /// Indices of the collision-free outcomes.
    pub fn collision_free_indices(&self) -> Result<Vec<usize>> {
        Ok(self
            .outcomes()?
            .iter()
            .enumerate()
            .filter(|(_, s)| s.is_collision_free())
            .map(|(i, _)| i)
            .collect())
    }
}

impl Ensemble for BosonEnsemble {
    fn outcome_count(&self) -> usize {
        crate::boson::phi_size(self.m, self.n) as usize
    }

    fn draw(&self, rng: &mut StreamRng) -> Result<ProbVec> {
        let inst = BosonInstance::haar_columns(self.n, self.m, rng)?;
        Ok(boson_distribution(&inst)?.0)
    }

    fn label(&self) -> String {
        format!("boson(n={}, m={})", self.n, self.m)
    }
}

/// The same distribution every time.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedDistribution(pub ProbVec);

impl Ensemble for FixedDistribution {
    fn outcome_count(&self) -> usize {
        self.0.dim()
    }

    fn draw(&self, _rng: &mut StreamRng) -> Result<ProbVec> {
        Ok(self.0.clone())
    }

    fn label(&self) -> String {
        format!("fixed(dim={})", self.0.dim())
    }
}

fn draw_all<E: Ensemble + ?Sized>(
    ensemble: &E,
    num_instances: usize,
    seed: u64,
) -> Result<Vec<ProbVec>> {
    (0..num_instances as u64)
        .into_par_iter()
        .map(|i| ensemble.draw(&mut stream_rng(seed, i)))
        .collect()
}

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = compensated_sum(xs.iter().copied()) / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = compensated_sum(xs.iter().map(|x| (x - mean).powi(2))) / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Estimate of `Σ_S E_U[P_U(S)²]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub ensemble: String,
    pub num_instances: usize,
    pub sum_second_moments: f64,
    pub std_error: f64,
    /// `Ê[P_U(S)²]` for every outcome, when requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_outcome: Option<Vec<f64>>,
    /// Outcomes the sum runs over; `None` means all of them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subset: Option<Vec<usize>>,
    pub seed: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MomentOptions {
    pub per_outcome: bool,
    /// Restrict the sum to these outcomes.
    pub subset: Option<Vec<usize>>,
}

pub fn estimate_second_moments<E: Ensemble + ?Sized>(
    ensemble: &E,
    num_instances: usize,
    seed: u64,
) -> Result<MomentEstimate> {
    estimate_second_moments_with(ensemble, num_instances, seed, &MomentOptions::default())
}

/// Per instance computes `Σ_{S} P_U(S)²` (over `subset` if given) and
/// averages; the standard error is the sample s.d. over `√N`.
pub fn estimate_second_moments_with<E: Ensemble + ?Sized>(
    ensemble: &E,
    num_instances: usize,
    seed: u64,
    opts: &MomentOptions,
) -> Result<MomentEstimate> {
    if num_instances < 2 {
        return Err(Error::invalid("need at least two instances"));
    }
    let dim = ensemble.outcome_count();
    if let Some(subset) = &opts.subset {
        if let Some(&bad) = subset.iter().find(|&&i| i >= dim) {
            return Err(Error::invalid(format!(
                "outcome {bad} outside {dim} outcomes"
            )));
        }
    }
    let dists = draw_all(ensemble, num_instances, seed)?;
    let per_instance: Vec<f64> = dists
        .iter()
        .map(|p| match &opts.subset {
            Some(subset) => compensated_sum(subset.iter().map(|&i| p.get(i).powi(2))),
            None => p.collision_probability(),
        })
        .collect();
    let (mean, se) = mean_and_se(&per_instance);
    let per_outcome = opts.per_outcome.then(|| {
        (0..dim)
            .map(|s| compensated_sum(dists.iter().map(|p| p.get(s).powi(2))) / num_instances as f64)
            .collect()
    });
    Ok(MomentEstimate {
        ensemble: ensemble.label(),
        num_instances,
        sum_second_moments: mean,
        std_error: se,
        per_outcome,
        subset: opts.subset.clone(),
        seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentSource {
    /// Supplied by the caller (closed form or a prior estimate).
    Supplied,
    /// Estimated inline from an independent seed stream.
    Estimated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailCheckReport {
    pub ensemble: String,
    pub delta: f64,
    pub second_moment_sum: f64,
    pub second_moment_source: MomentSource,
    /// `½(log₂ δ − log₂ Σ_S E[P_U(S)²])`.
    pub bound: f64,
    pub num_instances: usize,
    pub violations: usize,
    pub violation_fraction: f64,
    /// `√(δ(1−δ)/N)`.
    pub binomial_se: f64,
    /// `violation_fraction <= δ + 4·binomial_se`.
    pub passes: bool,
    pub seed: u64,
}

/// Measures how often `H∞(P_U)` falls below the second-moment bound.
///
/// `second_moment` supplies `Σ_S E[P_U(S)²]`; without it the sum is
/// estimated inline from a seed stream independent of the checked
/// instances.
pub fn min_entropy_tail_check<E: Ensemble + ?Sized>(
    ensemble: &E,
    delta: f64,
    num_instances: usize,
    seed: u64,
    second_moment: Option<f64>,
) -> Result<TailCheckReport> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::invalid(format!(
            "delta = {delta} must lie in (0, 1]"
        )));
    }
    if num_instances == 0 {
        return Err(Error::invalid("need at least one instance"));
    }
    let (sum, source) = match second_moment {
        Some(s) if s > 0.0 => (s, MomentSource::Supplied),
        Some(s) => {
            return Err(Error::invalid(format!(
                "second moment sum {s} must be positive"
            )))
        }
        None => {
            let est =
                estimate_second_moments(ensemble, num_instances.max(2), derive_seed(seed, 1))?;
            (est.sum_second_moments, MomentSource::Estimated)
        }
    };
    let bound = 0.5 * (delta.log2() - sum.log2());
    let entropies = draw_all(ensemble, num_instances, derive_seed(seed, 2))?
        .iter()
        .map(|p| p.min_entropy())
        .collect::<Result<Vec<f64>>>()?;
    let violations = entropies.iter().filter(|&&h| h < bound).count();
    let fraction = violations as f64 / num_instances as f64;
    let se = (delta * (1.0 - delta) / num_instances as f64).sqrt();
    Ok(TailCheckReport {
        ensemble: ensemble.label(),
        delta,
        second_moment_sum: sum,
        second_moment_source: source,
        bound,
        num_instances,
        violations,
        violation_fraction: fraction,
        binomial_se: se,
        passes: fraction <= delta + 4.0 * se,
        seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AntiConcentrationReport {
    pub ensemble: String,
    pub outcome: usize,
    pub alpha: f64,
    /// `E[Z]` used for the threshold and the floor.
    pub mean: f64,
    /// `Ê[Z²]`.
    pub second_moment: f64,
    /// `Pr̂[Z >= α·E[Z]]`.
    pub gamma_hat: f64,
    pub gamma_se: f64,
    /// `(1−α)² E[Z]² / Ê[Z²]`.
    pub floor: f64,
    /// `gamma_hat >= floor − 4·gamma_se`.
    pub passes: bool,
    pub num_instances: usize,
    pub seed: u64,
}

/// Paley–Zygmund check for `Z = P_U(S)` at a fixed outcome.
///
/// `mean` defaults to `1/|E|`, which is exact for ensembles whose outcomes
/// are exchangeable.
pub fn anti_concentration_check<E: Ensemble + ?Sized>(
    ensemble: &E,
    alpha: f64,
    num_instances: usize,
    seed: u64,
    outcome: usize,
    mean: Option<f64>,
) -> Result<AntiConcentrationReport> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!(
            "alpha = {alpha} must lie in (0, 1)"
        )));
    }
    if num_instances < 2 {
        return Err(Error::invalid("need at least two instances"));
    }
    let dim = ensemble.outcome_count();
    if outcome >= dim {
        return Err(Error::invalid(format!(
            "outcome {outcome} outside {dim} outcomes"
        )));
    }
    let mean = mean.unwrap_or(1.0 / dim as f64);
    let zs: Vec<f64> = draw_all(ensemble, num_instances, seed)?
        .iter()
        .map(|p| p.get(outcome))
        .collect();
    let n = num_instances as f64;
    let second = compensated_sum(zs.iter().map(|z| z * z)) / n;
    let hits = zs.iter().filter(|&&z| z >= alpha * mean).count();
    let gamma = hits as f64 / n;
    let se = (gamma * (1.0 - gamma) / n).sqrt();
    let floor = if second > 0.0 {
        (1.0 - alpha).powi(2) * mean * mean / second
    } else {
        0.0
    };
    Ok(AntiConcentrationReport {
        ensemble: ensemble.label(),
        outcome,
        alpha,
        mean,
        second_moment: second,
        gamma_hat: gamma,
        gamma_se: se,
        floor,
        passes: gamma >= floor - 4.0 * se,
        num_instances,
        seed,
    })
}

/// `Σ_S E[P(S)²] = 2/(D+1)` for Haar-random states of dimension `D`.
pub fn porter_thomas_second_moment_sum(dim: usize) -> f64 {
    2.0 / (dim as f64 + 1.0)
}

/// `Σ_S` of the IQP per-outcome bound `E[P(S)²] <= 3·2^{−2n}`.
pub fn iqp_second_moment_sum_bound(n: u32) -> f64 {
    3.0 * (-(n as f64)).exp2()
}

/// `Σ_S` of the relative `ε̃`-approximate 2-design bound.
pub fn design_second_moment_sum_bound(n: u32, eps_tilde: f64) -> f64 {
    (1.0 + eps_tilde) * porter_thomas_second_moment_sum(1usize << n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_distribution_has_zero_error() {
        let p = ProbVec::new(vec![0.5, 0.25, 0.25]).unwrap();
        let est = estimate_second_moments(&FixedDistribution(p.clone()), 10, 1).unwrap();
        assert!((est.sum_second_moments - 0.375).abs() < 1e-15);
        assert_eq!(est.std_error, 0.0);
        assert!(estimate_second_moments(&FixedDistribution(p), 1, 1).is_err());
    }

    #[test]
    fn estimates_are_reproducible() {
        let e = CircuitEnsemble::haar_state(3, 0).unwrap();
        let a = estimate_second_moments(&e, 200, 5).unwrap();
        let b = estimate_second_moments(&e, 200, 5).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, estimate_second_moments(&e, 200, 6).unwrap());
    }

    #[test]
    fn reproducible_across_thread_pools() {
        let e = CircuitEnsemble::iqp(4, 0).unwrap();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| estimate_second_moments(&e, 300, 9).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn per_outcome_sums_to_total() {
        let e = CircuitEnsemble::haar_state(2, 0).unwrap();
        let opts = MomentOptions {
            per_outcome: true,
            subset: None,
        };
        let est = estimate_second_moments_with(&e, 500, 3, &opts).unwrap();
        let total: f64 = est.per_outcome.as_ref().unwrap().iter().sum();
        assert!((total - est.sum_second_moments).abs() < 1e-12);
    }

    #[test]
    fn cauchy_schwarz_floor() {
        for e in [
            CircuitEnsemble::iqp(3, 0).unwrap(),
            CircuitEnsemble::haar_state(3, 0).unwrap(),
        ] {
            let est = estimate_second_moments(&e, 100, 1).unwrap();
            assert!(est.sum_second_moments >= 1.0 / 8.0);
            assert!(est.sum_second_moments <= 1.0);
        }
    }

    #[test]
    fn boson_subset_restriction() {
        let e = BosonEnsemble::new(2, 4).unwrap();
        let cf = e.collision_free_indices().unwrap();
        assert_eq!(cf.len(), 6);
        let opts = MomentOptions {
            per_outcome: false,
            subset: Some(cf),
        };
        let restricted = estimate_second_moments_with(&e, 50, 2, &opts).unwrap();
        let full = estimate_second_moments(&e, 50, 2).unwrap();
        assert!(restricted.sum_second_moments < full.sum_second_moments);
        let bad = MomentOptions {
            per_outcome: false,
            subset: Some(vec![99]),
        };
        assert!(estimate_second_moments_with(&e, 50, 2, &bad).is_err());
    }

    #[test]
    fn tail_check_degenerate_uniform() {
        let u = FixedDistribution(ProbVec::uniform(16).unwrap());
        let r = min_entropy_tail_check(&u, 0.2, 50, 1, None).unwrap();
        assert!((r.second_moment_sum - 1.0 / 16.0).abs() < 1e-15);
        assert!((r.bound - 0.5 * (0.2f64.log2() + 4.0)).abs() < 1e-12);
        assert_eq!(r.violations, 0);
        assert!(r.passes);
    }

    #[test]
    fn tail_check_delta_one() {
        let e = CircuitEnsemble::haar_state(3, 0).unwrap();
        let r = min_entropy_tail_check(&e, 1.0, 100, 1, Some(porter_thomas_second_moment_sum(8)))
            .unwrap();
        assert!((r.bound + 0.5 * (2.0f64 / 9.0).log2()).abs() < 1e-12);
        assert!(r.violation_fraction <= 1.0);
        assert_eq!(r.second_moment_source, MomentSource::Supplied);
        assert!(min_entropy_tail_check(&e, 0.0, 100, 1, None).is_err());
    }

    #[test]
    fn anti_concentration_point_mass() {
        let pm = FixedDistribution(ProbVec::point_mass(16, 0).unwrap());
        let r = anti_concentration_check(&pm, 0.5, 20, 1, 0, None).unwrap();
        assert_eq!(r.gamma_hat, 1.0);
        assert!(r.passes);
        assert!(r.floor < 1.0);
    }

    #[test]
    fn anti_concentration_alpha_near_one() {
        let e = CircuitEnsemble::haar_state(3, 0).unwrap();
        let r = anti_concentration_check(&e, 0.999, 500, 1, 0, None).unwrap();
        assert!(r.floor < 1e-5);
        assert!(r.passes);
        assert!(anti_concentration_check(&e, 1.0, 500, 1, 0, None).is_err());
        assert!(anti_concentration_check(&e, 0.5, 500, 1, 8, None).is_err());
    }

    #[test]
    fn closed_forms() {
        assert!((porter_thomas_second_moment_sum(16) - 2.0 / 17.0).abs() < 1e-15);
        assert!((iqp_second_moment_sum_bound(4) - 0.1875).abs() < 1e-15);
        assert!((design_second_moment_sum_bound(2, 0.1) - 1.1 * 0.4).abs() < 1e-15);
    }
}
