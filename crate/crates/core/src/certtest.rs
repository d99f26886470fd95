//! A calibrated ε-certification (identity) test and a harness that measures
//! how many samples it needs.
//!
//! The statistic mirrors the decomposition of the target `p` into its
//! largest entry, a removed tail of weight at most `ε/16`, and the bulk in
//! between:
//!
//! - bulk: `Σ_{i∈B} ((X_i − s·p_i)² − X_i) / p_i^{2/3}`,
//! - tail: `|X_T − s·p(T)|`, the deviation of the total tail count,
//! - max: `|X_0 − s·p_0|` for the removed maximum,
//!
//! where `X` is the sample histogram. Each component gets its own threshold,
//! calibrated by simulating the statistic under `p` itself so that the
//! whole test accepts samples from `p` with probability at least
//! `2/3 + margin`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distvec::{l1_distance, ProbVec};
use crate::qsim::OutcomeSampler;
use crate::rng::{derive_seed, stream_rng};
use crate::{Error, Result};

/// Completeness level required of an ε-certification test.
pub const COMPLETENESS: f64 = 2.0 / 3.0;

/// Soundness error allowed of an ε-certification test.
pub const SOUNDNESS_ERROR: f64 = 1.0 / 3.0;

pub const DEFAULT_MARGIN: f64 = 0.05;

pub const MIN_CALIBRATION_RUNS: usize = 100;

/// Slack when checking that an adversary is ε-far.
const FAR_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TesterConfig {
    pub eps: f64,
    pub samples: usize,
    pub calibration_runs: usize,
    /// Extra acceptance probability demanded under `p` during calibration.
    #[serde(default = "default_margin")]
    pub margin: f64,
    pub seed: u64,
}

fn default_margin() -> f64 {
    DEFAULT_MARGIN
}

impl TesterConfig {
    pub fn new(eps: f64, samples: usize, seed: u64) -> Self {
        Self {
            eps,
            samples,
            calibration_runs: 1000,
            margin: DEFAULT_MARGIN,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::invalid(format!(
                "eps = {} must lie in (0, 1)",
                self.eps
            )));
        }
        if self.samples == 0 {
            return Err(Error::invalid("need at least one sample"));
        }
        if self.calibration_runs < MIN_CALIBRATION_RUNS {
            return Err(Error::invalid(format!(
                "need at least {MIN_CALIBRATION_RUNS} calibration runs, got {}",
                self.calibration_runs
            )));
        }
        if !(0.0..1.0 - COMPLETENESS).contains(&self.margin) {
            return Err(Error::invalid(format!(
                "margin = {} out of range",
                self.margin
            )));
        }
        Ok(())
    }

    /// Target acceptance probability under the null.
    pub fn calibration_target(&self) -> f64 {
        COMPLETENESS + self.margin
    }
}

/// Values of the three statistic components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Statistic {
    pub bulk: f64,
    pub tail: f64,
    pub max: f64,
}

impl Statistic {
    fn within(&self, t: &Thresholds) -> bool {
        self.bulk <= t.bulk && self.tail <= t.tail && self.max <= t.max
    }
}

pub type Thresholds = Statistic;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestVerdict {
    pub accept: bool,
    pub statistic: Statistic,
    pub threshold: Thresholds,
    pub samples_used: usize,
}

/// Max / tail / bulk split of the outcome space.
#[derive(Debug, Clone, PartialEq)]
struct Partition {
    max_index: usize,
    max_prob: f64,
    tail_weight: f64,
    /// `(index, p_i, p_i^{2/3})` over the bulk.
    bulk: Vec<(usize, f64, f64)>,
    in_tail: Vec<bool>,
}

impl Partition {
    fn new(p: &ProbVec, eps: f64) -> Result<Self> {
        let core = p.truncated_core(eps / 16.0)?;
        let max_index = p.argmax();
        let mut in_tail = vec![true; p.dim()];
        in_tail[max_index] = false;
        let mut bulk = Vec::new();
        for i in core.support() {
            in_tail[i] = false;
            let x = p.get(i);
            bulk.push((i, x, x.powf(2.0 / 3.0)));
        }
        let tail_weight = (0..p.dim()).filter(|&i| in_tail[i]).map(|i| p.get(i)).sum();
        Ok(Self {
            max_index,
            max_prob: p.get(max_index),
            tail_weight,
            bulk,
            in_tail,
        })
    }

    fn statistic(&self, counts: &[u64], s: usize) -> Statistic {
        let s = s as f64;
        let bulk = self
            .bulk
            .iter()
            .map(|&(i, pi, w)| {
                let x = counts[i] as f64;
                ((x - s * pi).powi(2) - x) / w
            })
            .sum();
        let tail_count: u64 = counts
            .iter()
            .zip(&self.in_tail)
            .filter(|(_, &t)| t)
            .map(|(c, _)| c)
            .sum();
        Statistic {
            bulk,
            tail: (tail_count as f64 - s * self.tail_weight).abs(),
            max: (counts[self.max_index] as f64 - s * self.max_prob).abs(),
        }
    }
}

fn simulate_statistics(
    partition: &Partition,
    sampler: &OutcomeSampler,
    s: usize,
    runs: usize,
    seed: u64,
) -> Vec<Statistic> {
    (0..runs as u64)
        .into_par_iter()
        .map(|r| partition.statistic(&sampler.histogram(s, &mut stream_rng(seed, r)), s))
        .collect()
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| a.partial_cmp(b).expect("statistics are finite"));
    v
}

/// Smallest common per-component quantile level whose thresholds accept at
/// least a `target` fraction of the simulated null statistics.
fn thresholds_for_target(stats: &[Statistic], target: f64) -> Thresholds {
    let runs = stats.len();
    let bulk = sorted(stats.iter().map(|s| s.bulk).collect());
    let tail = sorted(stats.iter().map(|s| s.tail).collect());
    let max = sorted(stats.iter().map(|s| s.max).collect());
    let need = (target * runs as f64).ceil() as usize;
    let at = |k: usize| Thresholds {
        bulk: bulk[k - 1],
        tail: tail[k - 1],
        max: max[k - 1],
    };
    for k in need.max(1)..=runs {
        let t = at(k);
        if stats.iter().filter(|s| s.within(&t)).count() >= need {
            return t;
        }
    }
    at(runs)
}

/// Calibrates the three thresholds for `(p, cfg.samples)` under the null.
pub fn calibrate_threshold(p: &ProbVec, cfg: &TesterConfig) -> Result<Thresholds> {
    calibrate_threshold_at(p, cfg, cfg.calibration_target())
}

/// As [`calibrate_threshold`] with an explicit acceptance target.
pub fn calibrate_threshold_at(p: &ProbVec, cfg: &TesterConfig, target: f64) -> Result<Thresholds> {
    cfg.validate()?;
    if !(target > 0.0 && target <= 1.0) {
        return Err(Error::invalid(format!(
            "calibration target {target} must lie in (0, 1]"
        )));
    }
    let partition = Partition::new(p, cfg.eps)?;
    let sampler = OutcomeSampler::new(p)?;
    let stats = simulate_statistics(
        &partition,
        &sampler,
        cfg.samples,
        cfg.calibration_runs,
        derive_seed(cfg.seed, 0xCA1),
    );
    Ok(thresholds_for_target(&stats, target))
}

/// An identity tester calibrated for one target and sample size.
#[derive(Debug, Clone)]
pub struct IdentityTester {
    partition: Partition,
    thresholds: Thresholds,
    config: TesterConfig,
}

impl IdentityTester {
    pub fn calibrate(p: &ProbVec, cfg: &TesterConfig) -> Result<Self> {
        let thresholds = calibrate_threshold(p, cfg)?;
        Self::with_thresholds(p, cfg, thresholds)
    }

    pub fn with_thresholds(
        p: &ProbVec,
        cfg: &TesterConfig,
        thresholds: Thresholds,
    ) -> Result<Self> {
        cfg.validate()?;
        p.require_normalized()?;
        Ok(Self {
            partition: Partition::new(p, cfg.eps)?,
            thresholds,
            config: cfg.clone(),
        })
    }

    pub fn thresholds(&self) -> Thresholds {
        self.thresholds
    }

    pub fn config(&self) -> &TesterConfig {
        &self.config
    }

    /// Number of outcomes in the bulk bucket.
    pub fn bulk_size(&self) -> usize {
        self.partition.bulk.len()
    }

    pub fn dim(&self) -> usize {
        self.partition.in_tail.len()
    }

    pub fn test_histogram(&self, counts: &[u64]) -> Result<TestVerdict> {
        if counts.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                left: counts.len(),
                right: self.dim(),
            });
        }
        let total: u64 = counts.iter().sum();
        if total as usize != self.config.samples {
            return Err(Error::invalid(format!(
                "histogram holds {total} samples, tester is calibrated for {}",
                self.config.samples
            )));
        }
        let statistic = self.partition.statistic(counts, self.config.samples);
        Ok(TestVerdict {
            accept: statistic.within(&self.thresholds),
            statistic,
            threshold: self.thresholds,
            samples_used: self.config.samples,
        })
    }

    pub fn test(&self, samples: &[usize]) -> Result<TestVerdict> {
        let mut counts = vec![0u64; self.dim()];
        for &s in samples {
            *counts.get_mut(s).ok_or_else(|| {
                Error::invalid(format!("sample index {s} outside {} outcomes", self.dim()))
            })? += 1;
        }
        self.test_histogram(&counts)
    }

    /// Fraction of `trials` sample sets drawn from `q` that are accepted.
    pub fn acceptance_rate(&self, q: &ProbVec, trials: usize, seed: u64) -> Result<f64> {
        if q.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                left: q.dim(),
                right: self.dim(),
            });
        }
        let sampler = OutcomeSampler::new(q)?;
        let s = self.config.samples;
        let accepted = (0..trials as u64)
            .into_par_iter()
            .filter(|&t| {
                let counts = sampler.histogram(s, &mut stream_rng(seed, t));
                self.partition
                    .statistic(&counts, s)
                    .within(&self.thresholds)
            })
            .count();
        Ok(accepted as f64 / trials as f64)
    }
}

/// Calibrates for `(p, cfg)` and tests one sample sequence.
pub fn identity_test(p: &ProbVec, samples: &[usize], cfg: &TesterConfig) -> Result<TestVerdict> {
    IdentityTester::calibrate(p, cfg)?.test(samples)
}

/// Canonical ε-far alternatives, one per statistic component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Adversary {
    /// Consecutive support outcomes are paired and mass moves within each
    /// pair, proportional to the smaller entry, totalling `ε/2`.
    PairwiseShift,
    /// The smallest entries are deleted until at least `ε/2` is gone, then
    /// the rest is renormalized.
    TailDeletion,
    /// The largest entry gains `ε/2`, the others shrink proportionally.
    MaxInflation,
}

impl Adversary {
    pub const ALL: [Adversary; 3] = [
        Adversary::PairwiseShift,
        Adversary::TailDeletion,
        Adversary::MaxInflation,
    ];

    /// Builds `Q` with `‖p − Q‖₁ >= eps`.
    pub fn construct(&self, p: &ProbVec, eps: f64) -> Result<ProbVec> {
        p.require_normalized()?;
        if !(eps > 0.0 && eps < 2.0) {
            return Err(Error::invalid(format!("eps = {eps} must lie in (0, 2)")));
        }
        let half = 0.5 * eps;
        let mut q = p.entries().to_vec();
        match self {
            Adversary::PairwiseShift => {
                let support = p.support();
                let pairs: Vec<(usize, usize)> =
                    support.chunks_exact(2).map(|c| (c[0], c[1])).collect();
                let capacity: f64 = pairs.iter().map(|&(a, b)| p.get(a).min(p.get(b))).sum();
                if capacity < half {
                    return Err(Error::invalid(
                        "not enough paired mass for a pairwise shift",
                    ));
                }
                let t = half / capacity;
                for (a, b) in pairs {
                    let shift = t * p.get(a).min(p.get(b));
                    q[a] += shift;
                    q[b] -= shift;
                }
            }
            Adversary::TailDeletion => {
                let mut order = p.support();
                order.sort_by(|&a, &b| {
                    p.get(a)
                        .partial_cmp(&p.get(b))
                        .expect("finite")
                        .then(a.cmp(&b))
                });
                let mut removed = 0.0;
                for i in order {
                    if removed >= half {
                        break;
                    }
                    removed += q[i];
                    q[i] = 0.0;
                }
                if removed >= 1.0 - FAR_TOL {
                    return Err(Error::invalid(
                        "tail deletion would remove the whole distribution",
                    ));
                }
                q.iter_mut().for_each(|x| *x /= 1.0 - removed);
            }
            Adversary::MaxInflation => {
                let i = p.argmax();
                let rest = 1.0 - p.get(i);
                if rest < half {
                    return Err(Error::invalid("maximum cannot absorb eps/2 more mass"));
                }
                let scale = (rest - half) / rest;
                for (j, x) in q.iter_mut().enumerate() {
                    if j == i {
                        *x += half;
                    } else {
                        *x *= scale;
                    }
                }
            }
        }
        let q = ProbVec::new(q.into_iter().map(|x| x.max(0.0)).collect())?.normalize()?;
        ensure_far(p, &q, eps)?;
        Ok(q)
    }
}

fn ensure_far(p: &ProbVec, q: &ProbVec, eps: f64) -> Result<()> {
    let d = l1_distance(p, q)?;
    if d < eps - FAR_TOL {
        return Err(Error::invalid(format!(
            "adversary not eps-far: l1 distance {d} < {eps}"
        )));
    }
    Ok(())
}

/// Search settings for [`empirical_sample_complexity`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexitySearch {
    /// First sample size tried.
    pub start: usize,
    /// Give up above this many samples.
    pub max_samples: usize,
    /// Trials per side (completeness and soundness) at each sample size.
    pub trials: usize,
    /// Bisect between the last failing and first passing doubling step
    /// until the bracket is within this relative width; `None` stops at the
    /// doubling step.
    pub refine_to: Option<f64>,
}

impl Default for ComplexitySearch {
    fn default() -> Self {
        Self {
            start: 4,
            max_samples: 1 << 20,
            trials: 300,
            refine_to: Some(0.1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexityPoint {
    pub samples: usize,
    pub completeness: f64,
    pub soundness_error: f64,
    pub passes: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityResult {
    /// Smallest passing sample size found.
    pub samples: usize,
    pub l1_distance: f64,
    pub history: Vec<ComplexityPoint>,
}

/// Completeness and soundness error of the tester calibrated at `s`
/// samples.
pub fn evaluate_at(
    p: &ProbVec,
    q: &ProbVec,
    cfg: &TesterConfig,
    s: usize,
    trials: usize,
) -> Result<ComplexityPoint> {
    let cfg_s = TesterConfig {
        samples: s,
        seed: derive_seed(cfg.seed, s as u64),
        ..cfg.clone()
    };
    let tester = IdentityTester::calibrate(p, &cfg_s)?;
    let completeness = tester.acceptance_rate(p, trials, derive_seed(cfg_s.seed, 1))?;
    let soundness_error = tester.acceptance_rate(q, trials, derive_seed(cfg_s.seed, 2))?;
    Ok(ComplexityPoint {
        samples: s,
        completeness,
        soundness_error,
        passes: completeness >= COMPLETENESS && soundness_error < SOUNDNESS_ERROR,
    })
}

/// Smallest sample size at which the calibrated tester separates `p` from
/// `q` per the ε-certification definition: doubling search, then optional
/// bisection.
pub fn empirical_sample_complexity(
    p: &ProbVec,
    q: &ProbVec,
    cfg: &TesterConfig,
    search: &ComplexitySearch,
) -> Result<ComplexityResult> {
    cfg.validate()?;
    p.require_normalized()?;
    q.require_normalized()?;
    if search.trials < 300 {
        return Err(Error::invalid(format!(
            "need at least 300 trials, got {}",
            search.trials
        )));
    }
    if search.start == 0 {
        return Err(Error::invalid("search must start at >= 1 sample"));
    }
    let distance = l1_distance(p, q)?;
    ensure_far(p, q, cfg.eps)?;

    let mut history = Vec::new();
    let mut lo = 0usize;
    let mut hi = search.start;
    loop {
        if hi > search.max_samples {
            return Err(Error::Resource(format!(
                "no passing sample size up to {} samples",
                search.max_samples
            )));
        }
        let point = evaluate_at(p, q, cfg, hi, search.trials)?;
        history.push(point);
        if point.passes {
            break;
        }
        lo = hi;
        hi *= 2;
    }
    if let Some(rel) = search.refine_to {
        while hi - lo > 1 && (hi - lo) as f64 > rel * hi as f64 {
            let mid = lo + (hi - lo) / 2;
            let point = evaluate_at(p, q, cfg, mid, search.trials)?;
            history.push(point);
            if point.passes {
                hi = mid;
            } else {
                lo = mid;
            }
        }
    }
    Ok(ComplexityResult {
        samples: hi,
        l1_distance: distance,
        history,
    })
}

/// Largest `c2` for which every measured sample size is at least
/// `c2 · vv_lower_bound(c2 = 1)`; `(p, measured samples)` pairs.
pub fn consistent_lower_constant(points: &[(ProbVec, usize)], eps: f64) -> Result<f64> {
    let mut best = f64::INFINITY;
    for (p, s) in points {
        let unit = crate::bounds::vv_lower_bound(p, eps, 1.0)?.value;
        best = best.min(*s as f64 / unit);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(eps: f64, samples: usize) -> TesterConfig {
        TesterConfig {
            calibration_runs: 400,
            ..TesterConfig::new(eps, samples, 42)
        }
    }

    #[test]
    fn config_validation() {
        assert!(cfg(0.0, 10).validate().is_err());
        assert!(cfg(0.5, 0).validate().is_err());
        assert!(TesterConfig {
            calibration_runs: 50,
            ..cfg(0.5, 10)
        }
        .validate()
        .is_err());
        assert!((cfg(0.5, 10).calibration_target() - (2.0 / 3.0 + 0.05)).abs() < 1e-15);
    }

    #[test]
    fn point_mass_thresholds_are_degenerate() {
        let p = ProbVec::point_mass(8, 2).unwrap();
        let t = calibrate_threshold(&p, &cfg(0.5, 50)).unwrap();
        assert_eq!(
            t,
            Thresholds {
                bulk: 0.0,
                tail: 0.0,
                max: 0.0
            }
        );

        let tester = IdentityTester::calibrate(&p, &cfg(0.5, 50)).unwrap();
        assert_eq!(tester.bulk_size(), 0);
        assert!(tester.test(&[2; 50]).unwrap().accept);
        let mut off = vec![2; 50];
        off[0] = 5;
        let v = tester.test(&off).unwrap();
        assert!(!v.accept);
        assert_eq!(v.statistic.tail, 1.0);
        assert_eq!(v.statistic.max, 1.0);
    }

    #[test]
    fn calibration_is_reproducible_and_monotone() {
        let u = ProbVec::uniform(16).unwrap();
        let c = cfg(0.5, 200);
        assert_eq!(
            calibrate_threshold(&u, &c).unwrap(),
            calibrate_threshold(&u, &c).unwrap()
        );
        let lo = calibrate_threshold_at(&u, &c, 0.6).unwrap();
        let hi = calibrate_threshold_at(&u, &c, 0.9).unwrap();
        assert!(lo.bulk <= hi.bulk && lo.tail <= hi.tail && lo.max <= hi.max);
        assert!(lo.bulk < hi.bulk || lo.max < hi.max);
    }

    #[test]
    fn verdicts_are_deterministic_and_checked() {
        let u = ProbVec::uniform(16).unwrap();
        let c = cfg(0.5, 100);
        let tester = IdentityTester::calibrate(&u, &c).unwrap();
        let samples = crate::qsim::sample_outcomes(&u, 100, 3).unwrap();
        assert_eq!(
            tester.test(&samples).unwrap(),
            tester.test(&samples).unwrap()
        );
        assert_eq!(tester.test(&samples).unwrap().samples_used, 100);
        assert!(tester.test(&samples[..99]).is_err());
        let mut bad = samples.clone();
        bad[0] = 16;
        assert!(tester.test(&bad).is_err());
    }

    #[test]
    fn adversaries_are_eps_far() {
        let targets = [
            ProbVec::uniform(16).unwrap(),
            ProbVec::new(vec![0.3, 0.25, 0.2, 0.1, 0.08, 0.04, 0.03]).unwrap(),
        ];
        for p in &targets {
            for a in Adversary::ALL {
                let q = a.construct(p, 0.5).unwrap();
                assert!(q.is_normalized());
                assert!(l1_distance(p, &q).unwrap() >= 0.5 - 1e-12, "{a:?}");
            }
        }
        // Uniform pairwise shift moves eps/d within each pair.
        let u = ProbVec::uniform(16).unwrap();
        let q = Adversary::PairwiseShift.construct(&u, 0.5).unwrap();
        assert!((q.get(0) - (1.0 / 16.0 + 0.5 / 16.0)).abs() < 1e-15);
        assert!((q.get(1) - (1.0 / 16.0 - 0.5 / 16.0)).abs() < 1e-15);

        assert!(Adversary::MaxInflation
            .construct(&ProbVec::point_mass(4, 0).unwrap(), 0.5)
            .is_err());
        assert!(Adversary::PairwiseShift
            .construct(&ProbVec::point_mass(4, 0).unwrap(), 0.5)
            .is_err());
    }

    #[test]
    fn complexity_rejects_close_adversary() {
        let u = ProbVec::uniform(16).unwrap();
        let err = empirical_sample_complexity(&u, &u, &cfg(0.5, 10), &ComplexitySearch::default())
            .unwrap_err();
        assert!(err.to_string().contains("not eps-far"));
    }

    #[test]
    fn bounded_support_complexity_ignores_ambient_dimension() {
        let search = ComplexitySearch {
            refine_to: None,
            ..ComplexitySearch::default()
        };
        let measure = |dim: usize| {
            let mut e = vec![0.0; dim];
            e[0] = 0.5;
            e[1] = 0.5;
            let p = ProbVec::new(e).unwrap();
            let q = Adversary::PairwiseShift.construct(&p, 0.5).unwrap();
            empirical_sample_complexity(&p, &q, &cfg(0.5, 10), &search)
                .unwrap()
                .samples
        };
        assert_eq!(measure(16), measure(1024));
    }
}
