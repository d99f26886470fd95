//! Boson sampling at desk scale: Fock-space enumeration, permanents, the
//! collision-free weight, and the Gaussian tail machinery behind the
//! flatness bound.

use std::fmt;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distvec::{compensated_sum, ProbVec};
use crate::linalg::{complex_gaussian, haar_isometry, haar_unitary, CMatrix};
use crate::rng::stream_rng;
use crate::{Error, Result};

/// Default cap on `|Φ_{m,n}|` for full enumeration.
pub const DEFAULT_MAX_OUTCOMES: usize = 1_000_000;

/// Largest matrix the naive permanent accepts.
pub const NAIVE_PERMANENT_MAX: usize = 10;

/// Largest matrix Ryser's formula accepts.
pub const RYSER_PERMANENT_MAX: usize = 24;

const UNITARITY_TOL: f64 = 1e-10;

/// Occupation numbers of `m` modes summing to the photon number.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<u32>", into = "Vec<u32>")]
pub struct ModeOccupation(Vec<u32>);

impl TryFrom<Vec<u32>> for ModeOccupation {
    type Error = Error;

    fn try_from(s: Vec<u32>) -> Result<Self> {
        ModeOccupation::new(s)
    }
}

impl From<ModeOccupation> for Vec<u32> {
    fn from(s: ModeOccupation) -> Self {
        s.0
    }
}

impl ModeOccupation {
    pub fn new(s: Vec<u32>) -> Result<Self> {
        if s.is_empty() {
            return Err(Error::invalid("occupation needs at least one mode"));
        }
        Ok(Self(s))
    }

    /// One photon in each of the first `n` of `m` modes.
    pub fn first_modes(m: usize, n: usize) -> Result<Self> {
        if n > m {
            return Err(Error::invalid(format!(
                "cannot place {n} single photons in {m} modes"
            )));
        }
        Self::new((0..m).map(|j| u32::from(j < n)).collect())
    }

    pub fn modes(&self) -> usize {
        self.0.len()
    }

    pub fn photons(&self) -> usize {
        self.0.iter().map(|&x| x as usize).sum()
    }

    pub fn counts(&self) -> &[u32] {
        &self.0
    }

    pub fn is_collision_free(&self) -> bool {
        self.0.iter().all(|&x| x <= 1)
    }

    /// `Π_j s_j!`.
    pub fn factorial_product(&self) -> f64 {
        self.0.iter().map(|&x| factorial(x as usize)).product()
    }

    /// Row index of every row of `U_S`: mode `j` repeated `s_j` times, in
    /// mode order.
    pub fn row_indices(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .flat_map(|(j, &k)| std::iter::repeat_n(j, k as usize))
            .collect()
    }
}

impl fmt::Display for ModeOccupation {
    /// Semicolon-separated counts, e.g. `1;0;1`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, x) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(";")?;
            }
            write!(f, "{x}")?;
        }
        Ok(())
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

fn ln_factorial(k: usize) -> f64 {
    libm::lgamma(k as f64 + 1.0)
}

/// `|Φ_{m,n}| = C(m+n−1, n)` as a float.
pub fn phi_size(m: usize, n: usize) -> f64 {
    if m == 0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    (1..=n).map(|k| (m - 1 + k) as f64 / k as f64).product()
}

/// `|Φ*_{m,n}| = C(m, n)` as a float.
pub fn phi_collision_free_size(m: usize, n: usize) -> f64 {
    if n > m {
        return 0.0;
    }
    (1..=n).map(|k| (m - n + k) as f64 / k as f64).product()
}

/// All occupations of `m` modes by `n` photons in descending lexicographic
/// order, e.g. `(2,0,0), (1,1,0), …, (0,0,2)`.
pub fn enumerate_phi(m: usize, n: usize, collision_free_only: bool) -> Result<Vec<ModeOccupation>> {
    if m == 0 {
        return Err(Error::invalid("need at least one mode"));
    }
    fn rec(mode: usize, left: u32, cap: u32, cur: &mut Vec<u32>, out: &mut Vec<ModeOccupation>) {
        let m = cur.len();
        if mode == m - 1 {
            if left <= cap {
                cur[mode] = left;
                out.push(ModeOccupation(cur.clone()));
                cur[mode] = 0;
            }
            return;
        }
        for k in (0..=left.min(cap)).rev() {
            cur[mode] = k;
            rec(mode + 1, left - k, cap, cur, out);
        }
        cur[mode] = 0;
    }
    let cap = if collision_free_only { 1 } else { n as u32 };
    let mut out = Vec::new();
    if collision_free_only && n > m {
        return Ok(out);
    }
    rec(0, n as u32, cap, &mut vec![0; m], &mut out);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PermanentMethod {
    /// Sum over all `n!` permutations.
    Naive,
    /// Ryser's inclusion–exclusion with Gray-code subset updates.
    Ryser,
}

pub fn permanent(x: &CMatrix, method: PermanentMethod) -> Result<Complex64> {
    if !x.is_square() {
        return Err(Error::invalid(format!(
            "permanent needs a square matrix, got {}x{}",
            x.rows(),
            x.cols()
        )));
    }
    let n = x.rows();
    if n == 0 {
        return Ok(Complex64::new(1.0, 0.0));
    }
    match method {
        PermanentMethod::Naive if n > NAIVE_PERMANENT_MAX => Err(Error::Resource(format!(
            "naive permanent limited to n <= {NAIVE_PERMANENT_MAX}"
        ))),
        PermanentMethod::Ryser if n > RYSER_PERMANENT_MAX => Err(Error::Resource(format!(
            "Ryser permanent limited to n <= {RYSER_PERMANENT_MAX}"
        ))),
        PermanentMethod::Naive => Ok(permanent_naive(x)),
        PermanentMethod::Ryser => Ok(permanent_ryser(x)),
    }
}

fn permanent_naive(x: &CMatrix) -> Complex64 {
    fn rec(x: &CMatrix, row: usize, used: &mut [bool], acc: Complex64, total: &mut Complex64) {
        let n = x.rows();
        if row == n {
            *total += acc;
            return;
        }
        for col in 0..n {
            if !used[col] {
                used[col] = true;
                rec(x, row + 1, used, acc * x[(row, col)], total);
                used[col] = false;
            }
        }
    }
    let mut total = Complex64::new(0.0, 0.0);
    rec(
        x,
        0,
        &mut vec![false; x.rows()],
        Complex64::new(1.0, 0.0),
        &mut total,
    );
    total
}

/// `Perm(A) = (−1)ⁿ Σ_{S ⊆ [n]} (−1)^{|S|} Π_i Σ_{j∈S} a_ij`, visiting the
/// subsets in Gray-code order so each step adds or removes one column.
fn permanent_ryser(x: &CMatrix) -> Complex64 {
    let n = x.rows();
    let mut row_sums = vec![Complex64::new(0.0, 0.0); n];
    let mut in_set = vec![false; n];
    let mut total = Complex64::new(0.0, 0.0);
    let mut size = 0usize;
    for k in 1u64..(1u64 << n) {
        let j = k.trailing_zeros() as usize;
        let sign = if in_set[j] { -1.0 } else { 1.0 };
        in_set[j] = !in_set[j];
        if in_set[j] {
            size += 1;
        } else {
            size -= 1;
        }
        let mut prod = Complex64::new(1.0, 0.0);
        for (i, s) in row_sums.iter_mut().enumerate() {
            *s += sign * x[(i, j)];
            prod *= *s;
        }
        if size.is_multiple_of(2) {
            total += prod;
        } else {
            total -= prod;
        }
    }
    if n % 2 == 1 {
        -total
    } else {
        total
    }
}

/// `(n!)² (max |x_jk|)^{2n}`, an upper bound on `|Perm(x)|²`.
pub fn trivial_permanent_bound(x: &CMatrix) -> f64 {
    let n = x.rows();
    factorial(n).powi(2) * x.max_abs().powi(2 * n as i32)
}

/// `n` photons in `m` modes, injected into the first `n` modes and evolved
/// by `u`. Only the first `n` columns of `u` enter the distribution, so `u`
/// may be an `m × k` isometry with `k >= n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BosonInstanceRepr", into = "BosonInstanceRepr")]
pub struct BosonInstance {
    n: usize,
    m: usize,
    u: CMatrix,
}

/// JSON layout: `n`, `m` and `u` as interleaved `[re, im, re, im, …]` in
/// row-major order.
#[derive(Serialize, Deserialize)]
struct BosonInstanceRepr {
    n: usize,
    m: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cols: Option<usize>,
    u: Vec<f64>,
}

impl TryFrom<BosonInstanceRepr> for BosonInstance {
    type Error = Error;

    fn try_from(r: BosonInstanceRepr) -> Result<Self> {
        let cols = r.cols.unwrap_or(r.m);
        if r.u.len() != 2 * r.m * cols {
            return Err(Error::DimensionMismatch {
                left: r.u.len(),
                right: 2 * r.m * cols,
            });
        }
        let data =
            r.u.chunks_exact(2)
                .map(|c| Complex64::new(c[0], c[1]))
                .collect();
        BosonInstance::new(r.n, CMatrix::from_rows(r.m, cols, data)?)
    }
}

impl From<BosonInstance> for BosonInstanceRepr {
    fn from(b: BosonInstance) -> Self {
        let cols = b.u.cols();
        BosonInstanceRepr {
            n: b.n,
            m: b.m,
            cols: (cols != b.m).then_some(cols),
            u: b.u.data().iter().flat_map(|z| [z.re, z.im]).collect(),
        }
    }
}

impl BosonInstance {
    pub fn new(n: usize, u: CMatrix) -> Result<Self> {
        let m = u.rows();
        if n == 0 || m < n {
            return Err(Error::invalid(format!(
                "need m >= n >= 1, got n = {n}, m = {m}"
            )));
        }
        if u.cols() < n || u.cols() > m {
            return Err(Error::invalid(format!(
                "unitary has {} columns, need between n = {n} and m = {m}",
                u.cols()
            )));
        }
        let defect = u.isometry_defect();
        if defect > UNITARITY_TOL {
            return Err(Error::invalid(format!(
                "matrix is not unitary (defect {defect:e})"
            )));
        }
        Ok(Self { n, m, u })
    }

    /// Full Haar-random `m × m` unitary.
    pub fn haar<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Result<Self> {
        if m < n {
            return Err(Error::invalid(format!("need m >= n, got n = {n}, m = {m}")));
        }
        Self::new(n, haar_unitary(m, rng)?)
    }

    /// Only the `m × n` block of a Haar unitary that the distribution
    /// depends on; same law as [`BosonInstance::haar`], `O(mn²)` to draw.
    pub fn haar_columns<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Result<Self> {
        if n == 0 || m < n {
            return Err(Error::invalid(format!(
                "need m >= n >= 1, got n = {n}, m = {m}"
            )));
        }
        Self::new(n, haar_isometry(m, n, rng)?)
    }

    pub fn photons(&self) -> usize {
        self.n
    }

    pub fn modes(&self) -> usize {
        self.m
    }

    pub fn unitary(&self) -> &CMatrix {
        &self.u
    }

    /// `U_S`: keep the first `n` columns, then take `s_j` copies of row `j`.
    pub fn submatrix(&self, s: &ModeOccupation) -> Result<CMatrix> {
        if s.modes() != self.m || s.photons() != self.n {
            return Err(Error::invalid(format!(
                "occupation {s} does not describe {} photons in {} modes",
                self.n, self.m
            )));
        }
        let rows = s.row_indices();
        Ok(CMatrix::from_fn(self.n, self.n, |r, c| {
            self.u[(rows[r], c)]
        }))
    }

    /// `|Perm(U_S)|² / Π s_j!`.
    pub fn probability(&self, s: &ModeOccupation) -> Result<f64> {
        let perm = permanent(&self.submatrix(s)?, PermanentMethod::Ryser)?;
        Ok(perm.norm_sqr() / s.factorial_product())
    }
}

/// Full distribution over `Φ_{m,n}` with the outcome labels, enumeration
/// order as in [`enumerate_phi`].
pub fn boson_distribution(inst: &BosonInstance) -> Result<(ProbVec, Vec<ModeOccupation>)> {
    boson_distribution_capped(inst, DEFAULT_MAX_OUTCOMES)
}

pub fn boson_distribution_capped(
    inst: &BosonInstance,
    max_outcomes: usize,
) -> Result<(ProbVec, Vec<ModeOccupation>)> {
    let size = phi_size(inst.m, inst.n);
    if size > max_outcomes as f64 {
        return Err(Error::Resource(format!(
            "|Phi_(m={}, n={})| = {size} exceeds the cap of {max_outcomes}",
            inst.m, inst.n
        )));
    }
    let outcomes = enumerate_phi(inst.m, inst.n, false)?;
    let probs = outcomes
        .iter()
        .map(|s| inst.probability(s))
        .collect::<Result<Vec<f64>>>()?;
    Ok((ProbVec::new(probs)?, outcomes))
}

/// `P_bs,U(Φ \ Φ*)`: probability of at least two photons sharing a mode.
pub fn collision_weight(inst: &BosonInstance) -> Result<f64> {
    let (p, outcomes) = boson_distribution(inst)?;
    Ok(compensated_sum(
        outcomes
            .iter()
            .zip(p.entries())
            .filter(|(s, _)| !s.is_collision_free())
            .map(|(_, &x)| x),
    ))
}

/// CSV with header `occupation,probability`; probabilities use 17
/// significant digits.
pub fn outcome_map_csv(p: &ProbVec, outcomes: &[ModeOccupation]) -> Result<String> {
    if p.dim() != outcomes.len() {
        return Err(Error::DimensionMismatch {
            left: p.dim(),
            right: outcomes.len(),
        });
    }
    let mut out = String::from("occupation,probability\n");
    for (s, x) in outcomes.iter().zip(p.entries()) {
        out.push_str(&format!("{s},{x:.16e}\n"));
    }
    Ok(out)
}

/// One draw of `μ_{G_S(σ)}`: an `n × n` matrix whose distinct rows are
/// i.i.d. complex Gaussian with `E|x|² = σ²`, row `j` of the distinct block
/// repeated `s_j` times (zeros of `s` dropped).
pub fn gaussian_repeated_sample<R: Rng + ?Sized>(
    s: &ModeOccupation,
    sigma: f64,
    rng: &mut R,
) -> Result<CMatrix> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(format!("sigma = {sigma} must be positive")));
    }
    let n = s.photons();
    if n == 0 {
        return Err(Error::invalid("occupation has no photons"));
    }
    let part_sd = sigma * std::f64::consts::FRAC_1_SQRT_2;
    let mut rows = Vec::with_capacity(n * n);
    for &k in s.counts().iter().filter(|&&k| k > 0) {
        let row: Vec<Complex64> = (0..n).map(|_| complex_gaussian(rng, part_sd)).collect();
        for _ in 0..k {
            rows.extend_from_slice(&row);
        }
    }
    CMatrix::from_rows(n, n, rows)
}

/// Complementary error function.
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// `1 − (1 − erfc(ξ/(√2σ)))^{n²}`.
pub fn gaussian_concentration_bound(n: usize, sigma: f64, xi: f64) -> Result<f64> {
    if !(xi >= 0.0) {
        return Err(Error::invalid(format!("xi = {xi} must be >= 0")));
    }
    if !(sigma > 0.0) {
        return Err(Error::invalid(format!("sigma = {sigma} must be positive")));
    }
    let tail = erfc(xi / (std::f64::consts::SQRT_2 * sigma));
    if tail >= 1.0 {
        return Ok(1.0);
    }
    // 1 − (1 − t)^N evaluated without cancellation.
    let n2 = (n * n) as f64;
    Ok(-(n2 * (-tail).ln_1p()).exp_m1())
}

/// `ν` such that `m = c·n^ν`.
pub fn infer_nu(n: u32, m: u64, c: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::invalid("nu is undefined for n < 2"));
    }
    if !(c > 0.0) {
        return Err(Error::invalid(format!("c = {c} must be positive")));
    }
    Ok((m as f64 / c).ln() / (n as f64).ln())
}

/// `ln` of `(2(c+1)e)ⁿ n^{(ν−1)n}`, the bound on `|Φ_{m,n}|` when
/// `m <= c·n^ν`.
pub fn ln_phi_size_bound(n: u32, nu: f64, c: f64) -> f64 {
    let nf = n as f64;
    nf * (2.0 * (c + 1.0) * std::f64::consts::E).ln() + (nu - 1.0) * nf * nf.ln()
}

/// Natural log of the explicit bound on `Pr_U[∃S: P_bs,U(S) >= 2^{−2n}]`,
/// or `None` when `n² e^{−x²+1} > 1/2` and the geometric-series step does
/// not apply.
pub fn ln_bs_flatness_tail_bound(n: u32, m: u64, c: f64, big_c: f64) -> Result<Option<f64>> {
    if (m as f64) < n as f64 {
        return Err(Error::invalid(format!("need m >= n, got n = {n}, m = {m}")));
    }
    if !(big_c >= 0.0) {
        return Err(Error::invalid(format!("C = {big_c} must be >= 0")));
    }
    let nu = infer_nu(n, m, c)?;
    let nf = n as f64;
    // ε = 2^{−2n}, so ε^{1/n} = 1/4.
    let eps_root = 0.25;
    let x2 = 0.5 * c * eps_root * (2.0 - 2.0 / nf).exp() * nf.powf(nu - 2.0 - 1.0 / nf);
    let ln_ratio = 2.0 * nf.ln() - x2 + 1.0;
    if ln_ratio > 0.5f64.ln() {
        return Ok(None);
    }
    Ok(Some(
        big_c.ln_1p() + ln_phi_size_bound(n, nu, c) + std::f64::consts::LN_2 + ln_ratio,
    ))
}

/// `(1+C)(2(c+1)e)ⁿ n^{(ν−1)n} · 2n² e^{−x²+1}` with
/// `x² = (c/2) ε^{1/n} e^{2−2/n} n^{ν−2−1/n}` and `ε = 2^{−2n}`; `+∞` when
/// the convergence condition fails.
pub fn bs_flatness_tail_bound(n: u32, m: u64, c: f64, big_c: f64) -> Result<f64> {
    Ok(ln_bs_flatness_tail_bound(n, m, c, big_c)?.map_or(f64::INFINITY, f64::exp))
}

/// Monte-Carlo `E_U[|Perm(U_S)|⁴]` for the collision-free `S = 1_n` over
/// Haar `U ∈ U(m)`, with its standard error. Draws run in parallel, one RNG
/// stream per draw.
pub fn collision_free_fourth_moment(
    n: usize,
    m: usize,
    draws: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if draws < 2 {
        return Err(Error::invalid("need at least two draws"));
    }
    let values = (0..draws as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i);
            let v = haar_isometry(m, n, &mut rng)?;
            let block = CMatrix::from_fn(n, n, |r, c| v[(r, c)]);
            Ok(permanent(&block, PermanentMethod::Ryser)?
                .norm_sqr()
                .powi(2))
        })
        .collect::<Result<Vec<f64>>>()?;
    let mean = compensated_sum(values.iter().copied()) / draws as f64;
    let var = compensated_sum(values.iter().map(|x| (x - mean).powi(2))) / (draws - 1) as f64;
    Ok((mean, (var / draws as f64).sqrt()))
}

/// `(1+C)(n!)²(n+1)m^{−2n}`.
pub fn fourth_moment_bound(n: usize, m: usize, big_c: f64) -> f64 {
    ((1.0 + big_c).ln() + 2.0 * ln_factorial(n) + ((n + 1) as f64).ln()
        - 2.0 * n as f64 * (m as f64).ln())
    .exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn occ(s: &[u32]) -> ModeOccupation {
        ModeOccupation::new(s.to_vec()).unwrap()
    }

    fn random_matrix(n: usize, seed: u64) -> CMatrix {
        let mut rng = stream_rng(seed, 0);
        CMatrix::from_fn(n, n, |_, _| complex_gaussian(&mut rng, 1.0))
    }

    #[test]
    fn enumeration_examples() {
        let all = enumerate_phi(3, 2, false).unwrap();
        let expected: Vec<ModeOccupation> = [
            [2, 0, 0],
            [1, 1, 0],
            [1, 0, 1],
            [0, 2, 0],
            [0, 1, 1],
            [0, 0, 2],
        ]
        .iter()
        .map(|s| occ(s))
        .collect();
        assert_eq!(all, expected);
        assert_eq!(enumerate_phi(3, 2, true).unwrap().len(), 3);
        assert_eq!(enumerate_phi(6, 3, false).unwrap().len(), 56);
        assert!(enumerate_phi(2, 3, true).unwrap().is_empty());
        assert_eq!(
            enumerate_phi(4, 0, false).unwrap(),
            vec![occ(&[0, 0, 0, 0])]
        );
        for (m, n) in [(5, 3), (8, 3), (7, 4)] {
            assert_eq!(
                enumerate_phi(m, n, false).unwrap().len() as f64,
                phi_size(m, n)
            );
            assert_eq!(
                enumerate_phi(m, n, true).unwrap().len() as f64,
                phi_collision_free_size(m, n)
            );
        }
    }

    #[test]
    fn permanent_examples() {
        for method in [PermanentMethod::Naive, PermanentMethod::Ryser] {
            assert!((permanent(&CMatrix::identity(3), method).unwrap() - 1.0).norm() < 1e-14);
            let ones = CMatrix::from_fn(5, 5, |_, _| Complex64::new(1.0, 0.0));
            assert!((permanent(&ones, method).unwrap() - 120.0).norm() < 1e-10);
            assert!(permanent(&CMatrix::zeros(2, 3), method).is_err());
        }
        let x = random_matrix(6, 1);
        let a = permanent(&x, PermanentMethod::Ryser).unwrap();
        let b = permanent(&x, PermanentMethod::Naive).unwrap();
        assert!((a - b).norm() / b.norm() <= 1e-10);
    }

    #[test]
    fn ryser_matches_naive_up_to_eight() {
        for n in 1..=8 {
            for seed in 0..3 {
                let x = random_matrix(n, 100 * n as u64 + seed);
                let a = permanent(&x, PermanentMethod::Ryser).unwrap();
                let b = permanent(&x, PermanentMethod::Naive).unwrap();
                assert!((a - b).norm() / b.norm() <= 1e-10, "n = {n}");
            }
        }
    }

    #[test]
    fn trivial_bound_examples() {
        let id = CMatrix::identity(2);
        assert_eq!(trivial_permanent_bound(&id), 4.0);
        let ones = CMatrix::from_fn(3, 3, |_, _| Complex64::new(1.0, 0.0));
        let perm = permanent(&ones, PermanentMethod::Ryser).unwrap().norm_sqr();
        assert!((trivial_permanent_bound(&ones) - 36.0).abs() < 1e-12);
        assert!((perm - 36.0).abs() < 1e-10);
        for seed in 0..20 {
            let x = random_matrix(5, seed);
            assert!(
                trivial_permanent_bound(&x)
                    >= permanent(&x, PermanentMethod::Ryser).unwrap().norm_sqr()
            );
        }
    }

    #[test]
    fn single_photon_is_first_column() {
        let mut rng = stream_rng(3, 0);
        let inst = BosonInstance::haar(1, 5, &mut rng).unwrap();
        let (p, outcomes) = boson_distribution(&inst).unwrap();
        for (s, &x) in outcomes.iter().zip(p.entries()) {
            let j = s.counts().iter().position(|&k| k == 1).unwrap();
            assert!((x - inst.unitary()[(j, 0)].norm_sqr()).abs() < 1e-14);
        }
        assert_eq!(collision_weight(&inst).unwrap(), 0.0);
    }

    #[test]
    fn identity_keeps_photons_in_place() {
        let inst = BosonInstance::new(3, CMatrix::identity(5)).unwrap();
        let (p, outcomes) = boson_distribution(&inst).unwrap();
        let i = outcomes
            .iter()
            .position(|s| *s == occ(&[1, 1, 1, 0, 0]))
            .unwrap();
        assert_eq!(p.get(i), 1.0);
        assert_eq!(p.support_size(), 1);
        assert_eq!(collision_weight(&inst).unwrap(), 0.0);
    }

    #[test]
    fn haar_instances_are_normalized() {
        let mut rng = stream_rng(4, 0);
        let inst = BosonInstance::haar(2, 4, &mut rng).unwrap();
        let (p, outcomes) = boson_distribution(&inst).unwrap();
        assert_eq!(outcomes.len(), 10);
        assert!((p.total() - 1.0).abs() <= 1e-8);
    }

    #[test]
    fn isometry_instances_match_full_unitaries() {
        let mut rng = stream_rng(5, 0);
        let full = BosonInstance::haar(2, 5, &mut rng).unwrap();
        let cols = CMatrix::from_fn(5, 2, |r, c| full.unitary()[(r, c)]);
        let thin = BosonInstance::new(2, cols).unwrap();
        assert_eq!(
            boson_distribution(&full).unwrap().0,
            boson_distribution(&thin).unwrap().0
        );
    }

    #[test]
    fn row_permutation_permutes_outcomes() {
        let mut rng = stream_rng(6, 0);
        let inst = BosonInstance::haar(3, 5, &mut rng).unwrap();
        let perm = [3, 0, 4, 1, 2];
        let permuted = BosonInstance::new(3, inst.unitary().permute_rows(&perm)).unwrap();
        let (p, outcomes) = boson_distribution(&inst).unwrap();
        for (s, &x) in outcomes.iter().zip(p.entries()) {
            let moved = occ(&perm.iter().map(|&j| s.counts()[j]).collect::<Vec<_>>());
            assert!((permuted.probability(&moved).unwrap() - x).abs() < 1e-14);
        }
    }

    #[test]
    fn instance_validation_and_json() {
        let bad = CMatrix::from_fn(3, 3, |_, _| Complex64::new(1.0, 0.0));
        assert!(BosonInstance::new(2, bad).is_err());
        assert!(BosonInstance::new(4, CMatrix::identity(3)).is_err());
        let mut rng = stream_rng(7, 0);
        let inst = BosonInstance::haar(2, 3, &mut rng).unwrap();
        let json = serde_json::to_value(&inst).unwrap();
        assert_eq!(json["u"].as_array().unwrap().len(), 18);
        assert!(json.get("cols").is_none());
        let back: BosonInstance = serde_json::from_value(json).unwrap();
        assert_eq!(back, inst);
        assert!(inst.probability(&occ(&[1, 1])).is_err());
    }

    #[test]
    fn resource_cap_is_enforced() {
        let inst = BosonInstance::new(3, CMatrix::identity(30)).unwrap();
        assert!(matches!(
            boson_distribution_capped(&inst, 100),
            Err(Error::Resource(_))
        ));
    }

    #[test]
    fn outcome_csv_layout() {
        let inst = BosonInstance::new(1, CMatrix::identity(2)).unwrap();
        let (p, outcomes) = boson_distribution(&inst).unwrap();
        let csv = outcome_map_csv(&p, &outcomes).unwrap();
        assert_eq!(
            csv,
            "occupation,probability\n1;0,1.0000000000000000e0\n0;1,0.0000000000000000e0\n"
        );
    }

    #[test]
    fn gaussian_rows_repeat_per_occupation() {
        let mut rng = stream_rng(8, 0);
        let x = gaussian_repeated_sample(&occ(&[1, 0, 1, 1]), 0.5, &mut rng).unwrap();
        assert_eq!((x.rows(), x.cols()), (3, 3));
        assert_ne!(x.row(0), x.row(1));
        let y = gaussian_repeated_sample(&occ(&[3, 0, 0]), 0.5, &mut rng).unwrap();
        assert_eq!(y.row(0), y.row(1));
        assert_eq!(y.row(1), y.row(2));
        let z = gaussian_repeated_sample(&occ(&[0, 2, 1]), 0.5, &mut rng).unwrap();
        assert_eq!(z.row(0), z.row(1));
        assert_ne!(z.row(1), z.row(2));
        assert!(gaussian_repeated_sample(&occ(&[1]), 0.0, &mut rng).is_err());
    }

    #[test]
    fn gaussian_entry_variance() {
        // E|x|² = σ², so each real part has variance σ²/2.
        let sigma = 0.7;
        let draws = 100_000;
        let mut rng = stream_rng(9, 0);
        let s = occ(&[1]);
        let xs: Vec<f64> = (0..draws)
            .map(|_| gaussian_repeated_sample(&s, sigma, &mut rng).unwrap()[(0, 0)].re)
            .collect();
        let mean = xs.iter().sum::<f64>() / draws as f64;
        let sq: Vec<f64> = xs.iter().map(|x| (x - mean).powi(2)).collect();
        let var = sq.iter().sum::<f64>() / (draws - 1) as f64;
        let var_of_sq = sq.iter().map(|v| (v - var).powi(2)).sum::<f64>() / (draws - 1) as f64;
        let se = (var_of_sq / draws as f64).sqrt();
        assert!((var - sigma * sigma / 2.0).abs() < 4.0 * se, "{var} ± {se}");
    }

    #[test]
    #[allow(clippy::excessive_precision)]
    fn erfc_reference_values() {
        // 40-digit reference values.
        let cases = [
            (0.0, 1.0),
            (0.1, 0.887_537_083_981_715_1),
            (0.5, 0.479_500_122_186_953_46),
            (1.0, 0.157_299_207_050_285_13),
            (2.0, 0.004_677_734_981_047_265_8),
            (3.0, 2.209_049_699_858_544_1e-5),
            (5.0, 1.537_459_794_428_034_9e-12),
            (8.0, 1.122_429_717_298_292_7e-29),
            (10.0, 2.088_487_583_762_544_8e-45),
        ];
        for (x, want) in cases {
            let got = erfc(x);
            assert!(
                (got - want).abs() <= 1e-12 * want,
                "erfc({x}) = {got}, want {want}"
            );
        }
    }

    #[test]
    fn concentration_bound_examples() {
        assert_eq!(gaussian_concentration_bound(3, 1.0, 0.0).unwrap(), 1.0);
        let b = gaussian_concentration_bound(1, 1.0, std::f64::consts::SQRT_2).unwrap();
        assert!((b - 0.157_299_207_050_285_13).abs() < 1e-15);
        let mut prev = 1.0;
        for k in 1..20 {
            let b = gaussian_concentration_bound(3, 0.5, 0.1 * k as f64).unwrap();
            assert!(b <= prev);
            prev = b;
        }
        for n in 1..6 {
            assert!(
                gaussian_concentration_bound(n + 1, 0.5, 1.0).unwrap()
                    >= gaussian_concentration_bound(n, 0.5, 1.0).unwrap()
            );
        }
        assert!(gaussian_concentration_bound(2, 1.0, -1.0).is_err());
    }

    #[test]
    fn flatness_bound_guard_and_decay() {
        // ν ≈ 2 at small n: the geometric series does not converge.
        assert_eq!(
            bs_flatness_tail_bound(5, 25, 1.0, 0.0).unwrap(),
            f64::INFINITY
        );
        assert!(bs_flatness_tail_bound(5, 3, 1.0, 0.0).is_err());
        assert!(bs_flatness_tail_bound(1, 3, 1.0, 0.0).is_err());

        // ν = 4, c = 1: below one at n = 30 and decreasing afterwards.
        let mut prev = ln_bs_flatness_tail_bound(30, 30u64.pow(4), 1.0, 0.0)
            .unwrap()
            .unwrap();
        assert!(prev < 0.0);
        for n in 31..60u32 {
            let cur = ln_bs_flatness_tail_bound(n, (n as u64).pow(4), 1.0, 0.0)
                .unwrap()
                .unwrap();
            assert!(cur < prev, "n = {n}");
            prev = cur;
        }
        let with_c = ln_bs_flatness_tail_bound(30, 30u64.pow(4), 1.0, 1.0)
            .unwrap()
            .unwrap();
        let without = ln_bs_flatness_tail_bound(30, 30u64.pow(4), 1.0, 0.0)
            .unwrap()
            .unwrap();
        assert!((with_c - without - 2f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn phi_bound_dominates_exact_size() {
        for n in 2..12u32 {
            for nu in [1.0, 1.5, 2.0, 3.0, 4.5] {
                for c in [0.5, 1.0, 3.0] {
                    let m = (c * (n as f64).powf(nu)).floor() as usize;
                    if m < 1 {
                        continue;
                    }
                    // ln C(m+n−1, n) as an exact product of ratios.
                    let ln_exact: f64 = (1..=n as usize)
                        .map(|k| ((m - 1 + k) as f64 / k as f64).ln())
                        .sum();
                    assert!(
                        ln_phi_size_bound(n, nu, c) >= ln_exact,
                        "n={n} nu={nu} c={c}"
                    );
                }
            }
        }
    }

    #[test]
    fn fourth_moment_estimate_is_finite() {
        let (mean, se) = collision_free_fourth_moment(2, 8, 200, 1).unwrap();
        assert!(mean > 0.0 && se >= 0.0);
        assert!(fourth_moment_bound(2, 8, 0.0) > 0.0);
    }
}
