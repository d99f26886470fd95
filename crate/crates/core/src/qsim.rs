//! Output distributions of the qubit ensembles: IQP circuits, Haar-random
//! states and 1-D local random circuits of two-qubit Haar gates.
//!
//! Outcome `S` is indexed little-endian: bit `i` of the index is the
//! measurement result of qubit `i`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distvec::ProbVec;
use crate::linalg::{complex_gaussian, haar_unitary, CMatrix};
use crate::rng::{stream_rng, StreamRng};
use crate::{Error, Result};

/// Largest qubit count whose statevector we are willing to materialize.
pub const MAX_QUBITS: u32 = 20;

/// Tolerance for matching a weight against the angle set.
const ANGLE_TOL: f64 = 1e-12;

fn check_qubits(n: u32) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid("need at least one qubit"));
    }
    if n > MAX_QUBITS {
        return Err(Error::Resource(format!(
            "{n} qubits exceeds the cap of {MAX_QUBITS}"
        )));
    }
    Ok(())
}

/// `{0, π/8, …, 7π/8}`.
pub fn default_angle_set() -> Vec<f64> {
    (0..8).map(|k| k as f64 * PI / 8.0).collect()
}

/// One IQP instance: a symmetric weight matrix whose diagonal holds vertex
/// weights and whose off-diagonal holds edge weights, all from `angle_set`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "IqpWeightsRepr", into = "IqpWeightsRepr")]
pub struct IqpWeights {
    n: u32,
    angle_set: Vec<f64>,
    w: Vec<f64>,
}

/// JSON layout: `n`, `angle_set` and the row-major upper triangle
/// (diagonal included).
#[derive(Serialize, Deserialize)]
struct IqpWeightsRepr {
    n: u32,
    angle_set: Vec<f64>,
    upper: Vec<f64>,
}

impl TryFrom<IqpWeightsRepr> for IqpWeights {
    type Error = Error;

    fn try_from(r: IqpWeightsRepr) -> Result<Self> {
        IqpWeights::from_upper_triangle(r.n, r.angle_set, &r.upper)
    }
}

impl From<IqpWeights> for IqpWeightsRepr {
    fn from(w: IqpWeights) -> Self {
        let upper = w.upper_triangle();
        IqpWeightsRepr {
            n: w.n,
            angle_set: w.angle_set,
            upper,
        }
    }
}

impl IqpWeights {
    /// Validates a full row-major `n × n` matrix.
    pub fn new(n: u32, angle_set: Vec<f64>, w: Vec<f64>) -> Result<Self> {
        check_qubits(n)?;
        let nu = n as usize;
        if w.len() != nu * nu {
            return Err(Error::DimensionMismatch {
                left: w.len(),
                right: nu * nu,
            });
        }
        if angle_set.is_empty() {
            return Err(Error::invalid("angle set must be non-empty"));
        }
        for i in 0..nu {
            for j in 0..nu {
                let x = w[i * nu + j];
                if x != w[j * nu + i] {
                    return Err(Error::invalid(format!(
                        "weights not symmetric at ({i}, {j})"
                    )));
                }
                if !angle_set.iter().any(|a| (a - x).abs() <= ANGLE_TOL) {
                    return Err(Error::invalid(format!(
                        "weight {x} at ({i}, {j}) not in the angle set"
                    )));
                }
            }
        }
        Ok(Self { n, angle_set, w })
    }

    pub fn from_upper_triangle(n: u32, angle_set: Vec<f64>, upper: &[f64]) -> Result<Self> {
        let nu = n as usize;
        if upper.len() != nu * (nu + 1) / 2 {
            return Err(Error::DimensionMismatch {
                left: upper.len(),
                right: nu * (nu + 1) / 2,
            });
        }
        let mut w = vec![0.0; nu * nu];
        let mut it = upper.iter();
        for i in 0..nu {
            for j in i..nu {
                let x = *it.next().expect("length checked");
                w[i * nu + j] = x;
                w[j * nu + i] = x;
            }
        }
        Self::new(n, angle_set, w)
    }

    /// Draws every vertex and edge weight uniformly from `angle_set`.
    pub fn random<R: Rng + ?Sized>(n: u32, angle_set: Vec<f64>, rng: &mut R) -> Result<Self> {
        check_qubits(n)?;
        if angle_set.is_empty() {
            return Err(Error::invalid("angle set must be non-empty"));
        }
        let nu = n as usize;
        let mut w = vec![0.0; nu * nu];
        for i in 0..nu {
            for j in i..nu {
                let a = angle_set[rng.random_range(0..angle_set.len())];
                w[i * nu + j] = a;
                w[j * nu + i] = a;
            }
        }
        Ok(Self { n, angle_set, w })
    }

    pub fn zeros(n: u32) -> Result<Self> {
        let nu = n as usize;
        Self::new(n, default_angle_set(), vec![0.0; nu * nu])
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn angle_set(&self) -> &[f64] {
        &self.angle_set
    }

    pub fn matrix(&self) -> &[f64] {
        &self.w
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.w[i * self.n as usize + j]
    }

    pub fn upper_triangle(&self) -> Vec<f64> {
        let nu = self.n as usize;
        let mut out = Vec::with_capacity(nu * (nu + 1) / 2);
        for i in 0..nu {
            for j in i..nu {
                out.push(self.w[i * nu + j]);
            }
        }
        out
    }
}

/// In-place unnormalized Walsh–Hadamard transform; `len` must be a power of
/// two.
pub fn fwht(a: &mut [Complex64]) {
    let n = a.len();
    debug_assert!(n.is_power_of_two());
    let mut h = 1;
    while h < n {
        for block in (0..n).step_by(2 * h) {
            for i in block..block + h {
                let (x, y) = (a[i], a[i + h]);
                a[i] = x + y;
                a[i + h] = x - y;
            }
        }
        h *= 2;
    }
}

fn probabilities(amps: &[Complex64]) -> Result<ProbVec> {
    let v = ProbVec::new(amps.iter().map(|z| z.norm_sqr()).collect())?;
    // Unitarity keeps the total at one up to rounding; absorb the rounding.
    if (v.total() - 1.0).abs() > 1e-9 {
        return Err(Error::Format(format!(
            "statevector lost normalization: {}",
            v.total()
        )));
    }
    v.normalize()
}

/// Distribution of `exp[i(Σ_{i<j} w_ij X_iX_j + Σ_i w_ii X_i)]|0ⁿ⟩` for an
/// arbitrary real symmetric row-major weight matrix.
///
/// In the Hadamard basis the circuit is the diagonal phase
/// `e^{iθ(x)}` with `θ(x) = Σ_{i<j} w_ij χ_i χ_j + Σ_i w_ii χ_i` and
/// `χ_i = (−1)^{x_i}`, so the amplitudes are a Walsh–Hadamard transform of
/// the phase vector divided by `2ⁿ`.
pub fn iqp_phase_distribution(n: u32, w: &[f64]) -> Result<ProbVec> {
    check_qubits(n)?;
    let nu = n as usize;
    if w.len() != nu * nu {
        return Err(Error::DimensionMismatch {
            left: w.len(),
            right: nu * nu,
        });
    }
    let dim = 1usize << nu;
    let mut chi = vec![0.0f64; nu];
    let mut amps: Vec<Complex64> = (0..dim)
        .map(|x| {
            for (i, c) in chi.iter_mut().enumerate() {
                *c = if (x >> i) & 1 == 0 { 1.0 } else { -1.0 };
            }
            let mut theta = 0.0;
            for i in 0..nu {
                theta += w[i * nu + i] * chi[i];
                for j in i + 1..nu {
                    theta += w[i * nu + j] * chi[i] * chi[j];
                }
            }
            Complex64::from_polar(1.0, theta)
        })
        .collect();
    fwht(&mut amps);
    let scale = 1.0 / dim as f64;
    amps.iter_mut().for_each(|a| *a *= scale);
    probabilities(&amps)
}

pub fn iqp_output_distribution(w: &IqpWeights) -> Result<ProbVec> {
    iqp_phase_distribution(w.n, &w.w)
}

/// Outcome distribution of a Haar-random state on `n` qubits, drawn as a
/// normalized complex Gaussian vector.
pub fn haar_state_distribution<R: Rng + ?Sized>(n: u32, rng: &mut R) -> Result<ProbVec> {
    check_qubits(n)?;
    let amps: Vec<Complex64> = (0..1usize << n)
        .map(|_| complex_gaussian(rng, 1.0))
        .collect();
    ProbVec::from_weights(amps.iter().map(|z| z.norm_sqr()).collect())
}

/// Applies a 4×4 gate to qubits `(q, q + 1)`; the gate's local basis index
/// is `b_q + 2·b_{q+1}`.
fn apply_two_qubit_gate(state: &mut [Complex64], q: usize, gate: &CMatrix) {
    let (lo, hi) = (1usize << q, 1usize << (q + 1));
    let mut local = [Complex64::new(0.0, 0.0); 4];
    for base in 0..state.len() {
        if base & (lo | hi) != 0 {
            continue;
        }
        let idx = [base, base | lo, base | hi, base | lo | hi];
        for (k, &i) in idx.iter().enumerate() {
            local[k] = state[i];
        }
        for (r, &i) in idx.iter().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (c, amp) in local.iter().enumerate() {
                acc += gate[(r, c)] * amp;
            }
            state[i] = acc;
        }
    }
}

/// `depth` two-qubit Haar gates, each on a uniformly chosen nearest-neighbour
/// pair of a 1-D chain, applied to `|0ⁿ⟩`.
pub fn local_random_circuit_distribution<R: Rng + ?Sized>(
    n: u32,
    depth: usize,
    rng: &mut R,
) -> Result<ProbVec> {
    check_qubits(n)?;
    if depth > 0 && n < 2 {
        return Err(Error::invalid(
            "local random circuits need at least two qubits",
        ));
    }
    let mut state = vec![Complex64::new(0.0, 0.0); 1usize << n];
    state[0] = Complex64::new(1.0, 0.0);
    for _ in 0..depth {
        let q = rng.random_range(0..n as usize - 1);
        let gate = haar_unitary(4, rng)?;
        apply_two_qubit_gate(&mut state, q, &gate);
    }
    probabilities(&state)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleKind {
    Iqp,
    HaarState,
    LocalRandom,
}

/// A family of random qubit circuits; instance `i` is drawn from the RNG
/// stream `(seed, i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitEnsemble {
    pub kind: EnsembleKind,
    pub n: u32,
    /// Gate count, used by `LocalRandom` only.
    #[serde(default)]
    pub depth: usize,
    pub seed: u64,
    /// Angle set for `Iqp`; defaults to multiples of π/8.
    #[serde(default = "default_angle_set")]
    pub angle_set: Vec<f64>,
}

impl CircuitEnsemble {
    pub fn new(kind: EnsembleKind, n: u32, depth: usize, seed: u64) -> Result<Self> {
        check_qubits(n)?;
        Ok(Self {
            kind,
            n,
            depth,
            seed,
            angle_set: default_angle_set(),
        })
    }

    pub fn iqp(n: u32, seed: u64) -> Result<Self> {
        Self::new(EnsembleKind::Iqp, n, 0, seed)
    }

    pub fn haar_state(n: u32, seed: u64) -> Result<Self> {
        Self::new(EnsembleKind::HaarState, n, 0, seed)
    }

    pub fn local_random(n: u32, depth: usize, seed: u64) -> Result<Self> {
        Self::new(EnsembleKind::LocalRandom, n, depth, seed)
    }

    pub fn outcome_count(&self) -> usize {
        1usize << self.n
    }

    /// Draws one output distribution from `rng`.
    pub fn draw(&self, rng: &mut StreamRng) -> Result<ProbVec> {
        match self.kind {
            EnsembleKind::Iqp => {
                iqp_output_distribution(&IqpWeights::random(self.n, self.angle_set.clone(), rng)?)
            }
            EnsembleKind::HaarState => haar_state_distribution(self.n, rng),
            EnsembleKind::LocalRandom => local_random_circuit_distribution(self.n, self.depth, rng),
        }
    }

    /// Instance `index` of the ensemble under its own seed.
    pub fn instance(&self, index: u64) -> Result<ProbVec> {
        self.draw(&mut stream_rng(self.seed, index))
    }
}

/// Inverse-CDF sampler over a fixed distribution.
#[derive(Debug, Clone)]
pub struct OutcomeSampler {
    cdf: Vec<f64>,
}

impl OutcomeSampler {
    pub fn new(p: &ProbVec) -> Result<Self> {
        p.require_normalized()?;
        let mut acc = 0.0;
        let cdf = p
            .entries()
            .iter()
            .map(|&x| {
                acc += x;
                acc
            })
            .collect();
        Ok(Self { cdf })
    }

    pub fn dim(&self) -> usize {
        self.cdf.len()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let total = *self.cdf.last().expect("dimension >= 1");
        let u = rng.random::<f64>() * total;
        // First index whose cumulative weight exceeds u; zero-probability
        // outcomes share their predecessor's cdf value and are never hit.
        self.cdf
            .partition_point(|&c| c <= u)
            .min(self.cdf.len() - 1)
    }

    pub fn sample_many<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<usize> {
        (0..count).map(|_| self.sample(rng)).collect()
    }

    /// Histogram of `count` draws.
    pub fn histogram<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<u64> {
        let mut h = vec![0u64; self.dim()];
        for _ in 0..count {
            h[self.sample(rng)] += 1;
        }
        h
    }
}

/// `count` i.i.d. outcomes from `p`, reproducible given `seed`.
pub fn sample_outcomes(p: &ProbVec, count: usize, seed: u64) -> Result<Vec<usize>> {
    let sampler = OutcomeSampler::new(p)?;
    Ok(sampler.sample_many(count, &mut stream_rng(seed, 0)))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `exp(iH)` for a Hermitian `H` by scaling and squaring a Taylor series.
    fn expm_i(h: &CMatrix) -> CMatrix {
        let d = h.rows();
        let norm: f64 = h.data().iter().map(|z| z.norm()).sum();
        let squarings = (norm.max(1.0).log2().ceil() as u32) + 4;
        let scale = Complex64::new(0.0, 1.0 / (1u64 << squarings) as f64);
        let a = CMatrix::from_fn(d, d, |r, c| h[(r, c)] * scale);
        let mut term = CMatrix::identity(d);
        let mut sum = CMatrix::identity(d);
        for k in 1..30 {
            term = term.matmul(&a).unwrap();
            term = CMatrix::from_fn(d, d, |r, c| term[(r, c)] / k as f64);
            sum = CMatrix::from_fn(d, d, |r, c| sum[(r, c)] + term[(r, c)]);
        }
        for _ in 0..squarings {
            sum = sum.matmul(&sum).unwrap();
        }
        sum
    }

    /// Dense Hamiltonian Σ_{i<j} w_ij X_iX_j + Σ w_ii X_i in the computational
    /// basis: X_i flips bit i.
    fn iqp_hamiltonian(n: usize, w: &[f64]) -> CMatrix {
        let d = 1 << n;
        let mut h = CMatrix::zeros(d, d);
        for x in 0..d {
            for i in 0..n {
                h[(x ^ (1 << i), x)] += w[i * n + i];
                for j in i + 1..n {
                    h[(x ^ (1 << i) ^ (1 << j), x)] += w[i * n + j];
                }
            }
        }
        h
    }

    #[test]
    fn zero_weights_give_point_mass() {
        let p = iqp_output_distribution(&IqpWeights::zeros(4).unwrap()).unwrap();
        assert!((p.get(0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn half_pi_rotation_flips_qubit() {
        let w = IqpWeights::new(1, vec![0.0, PI / 2.0], vec![PI / 2.0]).unwrap();
        let p = iqp_output_distribution(&w).unwrap();
        assert!(p.get(0) < 1e-24);
        assert!((p.get(1) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn iqp_matches_dense_matrix_exponential() {
        for seed in 0..5 {
            let mut rng = stream_rng(seed, 0);
            let w = IqpWeights::random(3, default_angle_set(), &mut rng).unwrap();
            let p = iqp_output_distribution(&w).unwrap();
            let u = expm_i(&iqp_hamiltonian(3, w.matrix()));
            for s in 0..8 {
                assert!(
                    (p.get(s) - u[(s, 0)].norm_sqr()).abs() < 1e-8,
                    "seed {seed} outcome {s}"
                );
            }
        }
    }

    #[test]
    fn iqp_is_2pi_periodic() {
        let mut rng = stream_rng(11, 0);
        let w = IqpWeights::random(4, default_angle_set(), &mut rng).unwrap();
        let base = iqp_output_distribution(&w).unwrap();
        let mut shifted = w.matrix().to_vec();
        shifted[1] += 2.0 * PI;
        shifted[4] += 2.0 * PI;
        shifted[10] += 2.0 * PI;
        let p = iqp_phase_distribution(4, &shifted).unwrap();
        for (a, b) in base.entries().iter().zip(p.entries()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn iqp_weights_validation_and_json() {
        assert!(IqpWeights::new(2, default_angle_set(), vec![0.0, 0.1, 0.1, 0.0]).is_err());
        assert!(IqpWeights::new(2, default_angle_set(), vec![0.0, PI / 8.0, 0.0, 0.0]).is_err());
        assert!(matches!(IqpWeights::zeros(21), Err(Error::Resource(_))));

        let mut rng = stream_rng(12, 0);
        let w = IqpWeights::random(3, default_angle_set(), &mut rng).unwrap();
        let json = serde_json::to_value(&w).unwrap();
        assert_eq!(json["upper"].as_array().unwrap().len(), 6);
        let back: IqpWeights = serde_json::from_value(json).unwrap();
        assert_eq!(back, w);
    }

    #[test]
    fn haar_states_are_normalized() {
        let mut rng = stream_rng(13, 0);
        for n in 1..=6 {
            let p = haar_state_distribution(n, &mut rng).unwrap();
            assert!((p.total() - 1.0).abs() < 1e-9);
            assert_eq!(p.dim(), 1 << n);
        }
    }

    #[test]
    fn single_qubit_haar_second_moment() {
        // E[P(0)²] = 2/(D(D+1)) = 1/3 for D = 2.
        let draws = 100_000;
        let mut rng = stream_rng(14, 0);
        let xs: Vec<f64> = (0..draws)
            .map(|_| haar_state_distribution(1, &mut rng).unwrap().get(0).powi(2))
            .collect();
        let mean = xs.iter().sum::<f64>() / draws as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
        let se = (var / draws as f64).sqrt();
        assert!((mean - 1.0 / 3.0).abs() < 4.0 * se, "{mean} ± {se}");
    }

    #[test]
    fn depth_zero_circuit_is_identity() {
        let mut rng = stream_rng(15, 0);
        let p = local_random_circuit_distribution(5, 0, &mut rng).unwrap();
        assert_eq!(p.get(0), 1.0);
    }

    #[test]
    fn single_gate_matches_first_column() {
        let mut rng = stream_rng(16, 0);
        let p = local_random_circuit_distribution(2, 1, &mut rng).unwrap();
        let mut replay = stream_rng(16, 0);
        assert_eq!(replay.random_range(0..1usize), 0);
        let g = haar_unitary(4, &mut replay).unwrap();
        for s in 0..4 {
            assert!((p.get(s) - g[(s, 0)].norm_sqr()).abs() < 1e-12);
        }
    }

    #[test]
    fn local_circuits_stay_normalized() {
        let mut rng = stream_rng(17, 0);
        let p = local_random_circuit_distribution(6, 100, &mut rng).unwrap();
        assert!((p.total() - 1.0).abs() < 1e-9);
        assert!(local_random_circuit_distribution(1, 3, &mut rng).is_err());
    }

    #[test]
    fn sampler_examples() {
        let pm = ProbVec::point_mass(7, 3).unwrap();
        assert!(sample_outcomes(&pm, 1000, 1)
            .unwrap()
            .iter()
            .all(|&s| s == 3));

        let count = 1_000_000;
        let h = OutcomeSampler::new(&ProbVec::uniform(4).unwrap())
            .unwrap()
            .histogram(count, &mut stream_rng(2, 0));
        let sigma = (count as f64 * 0.25 * 0.75).sqrt();
        for &c in &h {
            assert!((c as f64 - 0.25 * count as f64).abs() < 5.0 * sigma);
        }

        let u = ProbVec::uniform(16).unwrap();
        assert_eq!(
            sample_outcomes(&u, 100, 9).unwrap(),
            sample_outcomes(&u, 100, 9).unwrap()
        );
        assert!(sample_outcomes(&ProbVec::new(vec![0.2, 0.2]).unwrap(), 3, 0).is_err());
    }

    #[test]
    fn sampler_never_hits_zero_entries() {
        let p = ProbVec::new(vec![0.0, 0.5, 0.0, 0.5, 0.0]).unwrap();
        let h = OutcomeSampler::new(&p)
            .unwrap()
            .histogram(10_000, &mut stream_rng(3, 0));
        assert_eq!((h[0], h[2], h[4]), (0, 0, 0));
    }

    #[test]
    fn ensemble_instances_are_reproducible() {
        for e in [
            CircuitEnsemble::iqp(3, 7).unwrap(),
            CircuitEnsemble::haar_state(3, 7).unwrap(),
            CircuitEnsemble::local_random(3, 10, 7).unwrap(),
        ] {
            assert_eq!(e.instance(2).unwrap(), e.instance(2).unwrap());
            assert_ne!(e.instance(2).unwrap(), e.instance(3).unwrap());
        }
    }
}
