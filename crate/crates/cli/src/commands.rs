use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use certbound::boson::{
    self, bs_flatness_tail_bound, fourth_moment_bound, infer_nu, ln_bs_flatness_tail_bound,
    phi_collision_free_size, phi_size, BosonInstance, DEFAULT_MAX_OUTCOMES,
};
use certbound::bounds::{self, BosonBoundParams, BoundReport};
use certbound::certtest::{
    consistent_lower_constant, empirical_sample_complexity, Adversary, ComplexitySearch,
    IdentityTester, TesterConfig,
};
use certbound::distvec::{ProbVec, BINARY_MAGIC};
use certbound::moments::{
    anti_concentration_check, design_second_moment_sum_bound, estimate_second_moments_with,
    iqp_second_moment_sum_bound, min_entropy_tail_check, BosonEnsemble, Ensemble, MomentOptions,
};
use certbound::qsim::{self, default_angle_set, CircuitEnsemble, IqpWeights};
use certbound::rng::{derive_seed, stream_rng};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::{CliError, CliResult, Outputs};

fn invalid<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Validation(msg.into()))
}

fn required<T: Clone>(v: &Option<T>, flag: &str) -> CliResult<T> {
    v.clone()
        .ok_or_else(|| CliError::Validation(format!("missing --{flag}")))
}

/// 17 significant digits, exact for doubles.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn to_json<T: Serialize>(v: &T) -> CliResult<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| CliError::Validation(e.to_string()))?;
    s.push('\n');
    Ok(s.into_bytes())
}

/// `uniform:d`, `pointmass:d[:i]`, or a JSON / binary distribution file.
pub fn parse_dist(spec: &str) -> CliResult<ProbVec> {
    let builtin = |rest: &str| -> CliResult<Vec<usize>> {
        rest.split(':')
            .map(|t| {
                t.parse()
                    .map_err(|_| CliError::Validation(format!("bad number {t:?} in --dist {spec}")))
            })
            .collect()
    };
    if let Some(rest) = spec.strip_prefix("uniform:") {
        return match builtin(rest)?[..] {
            [d] => Ok(ProbVec::uniform(d)?),
            _ => invalid(format!("expected uniform:d, got {spec}")),
        };
    }
    if let Some(rest) = spec.strip_prefix("pointmass:") {
        return match builtin(rest)?[..] {
            [d] => Ok(ProbVec::point_mass(d, 0)?),
            [d, i] => Ok(ProbVec::point_mass(d, i)?),
            _ => invalid(format!("expected pointmass:d[:i], got {spec}")),
        };
    }
    read_dist_file(Path::new(spec))
}

fn read_dist_file(path: &Path) -> CliResult<ProbVec> {
    let bytes = std::fs::read(path).map_err(|e| {
        CliError::Validation(format!("cannot read distribution {}: {e}", path.display()))
    })?;
    let p = if bytes.starts_with(BINARY_MAGIC) {
        ProbVec::read_binary(&bytes[..])?
    } else {
        serde_json::from_slice(&bytes).map_err(|e| {
            CliError::Validation(format!("bad distribution file {}: {e}", path.display()))
        })?
    };
    p.require_normalized()?;
    Ok(p)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_slice(&bytes)
        .map_err(|e| CliError::Validation(format!("bad file {}: {e}", path.display())))
}

/// A JSON array of outcome indices, or whitespace-separated integers.
pub fn read_samples(path: &Path) -> CliResult<Vec<usize>> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        CliError::Validation(format!("cannot read samples {}: {e}", path.display()))
    })?;
    if text.trim_start().starts_with('[') {
        return serde_json::from_str(&text)
            .map_err(|e| CliError::Validation(format!("bad samples file: {e}")));
    }
    text.split_whitespace()
        .map(|t| {
            t.parse()
                .map_err(|_| CliError::Validation(format!("bad sample {t:?}")))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TextFormat {
    Json,
    Table,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct NormsArgs {
    /// Distribution: uniform:d, pointmass:d[:i] or a file.
    #[arg(long)]
    pub dist: Option<String>,
    /// Tail budget for the truncated core.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Rényi orders to report (`inf` allowed).
    #[arg(long, value_delimiter = ',')]
    #[serde(default)]
    pub alpha: Vec<f64>,
}

pub fn norms(a: &NormsArgs) -> CliResult<Outputs> {
    let p = parse_dist(&required(&a.dist, "dist")?)?;
    let eps = a.eps.unwrap_or(0.0);
    let alphas = if a.alpha.is_empty() {
        vec![0.0, 2.0, f64::INFINITY]
    } else {
        a.alpha.clone()
    };
    let renyi = alphas
        .iter()
        .map(|&al| Ok(json!({ "alpha": al.to_string(), "entropy": p.renyi_entropy(al)? })))
        .collect::<certbound::Result<Vec<_>>>()?;
    let core = p.truncated_core(eps)?;
    let b = bounds::norm23_bounds(&p, eps)?;
    let out = json!({
        "dim": p.dim(),
        "support_size": p.support_size(),
        "argmax": p.argmax(),
        "max": p.max_entry(),
        "min_entropy": p.min_entropy()?,
        "collision_probability": p.collision_probability(),
        "l23": p.lp_quasinorm(2.0 / 3.0)?,
        "eps": eps,
        "core_l23": core.lp_quasinorm(2.0 / 3.0)?,
        "core_support": core.support_size(),
        "core_l23_lower": b.lower,
        "core_l23_upper": b.upper,
        "renyi": renyi,
    });
    Ok(Outputs::new(to_json(&out)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundChoice {
    VvLower,
    VvUpper,
    Lemma1,
    Postselect,
    SminEntropy,
    SminIqp,
    SminDesign,
    SminBoson,
    SminBosonFlat,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct BoundsArgs {
    /// Which bound; defaults to vv-lower.
    #[arg(long, value_enum)]
    pub kind: Option<BoundChoice>,
    #[arg(long)]
    pub dist: Option<String>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub c1: Option<f64>,
    #[arg(long)]
    pub c2: Option<f64>,
    /// Outcome indices kept by post-selection.
    #[arg(long, value_delimiter = ',')]
    #[serde(default)]
    pub subset: Vec<usize>,
    /// Min-entropy in bits, for smin-entropy.
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long)]
    pub n: Option<u32>,
    #[arg(long)]
    pub m: Option<u64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub eps_tilde: Option<f64>,
    #[arg(long)]
    pub zeta: Option<f64>,
    #[arg(long)]
    pub big_c: Option<f64>,
    /// Mode-scaling constant in `m = c nᵛ`, for smin-boson-flat.
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long, value_enum)]
    pub format: Option<TextFormat>,
}

pub fn bounds(a: &BoundsArgs) -> CliResult<Outputs> {
    let eps = required(&a.eps, "eps")?;
    let c1 = a.c1.unwrap_or(1.0);
    let c2 = a.c2.unwrap_or(1.0);
    let dist = || parse_dist(&required(&a.dist, "dist")?);
    let reports: Vec<BoundReport> = match a.kind.unwrap_or(BoundChoice::VvLower) {
        BoundChoice::VvLower => vec![bounds::vv_lower_bound(&dist()?, eps, c2)?],
        BoundChoice::VvUpper => vec![bounds::vv_upper_bound(&dist()?, eps, c1)?],
        BoundChoice::Lemma1 => {
            let b = bounds::norm23_bounds(&dist()?, eps)?;
            vec![b.lower_report(), b.upper_report()]
        }
        BoundChoice::Postselect => {
            if a.subset.is_empty() {
                return invalid("postselect needs --subset");
            }
            vec![bounds::postselected_lower_bound(
                &dist()?,
                &a.subset,
                eps,
                c2,
            )?]
        }
        BoundChoice::SminEntropy => vec![bounds::smin_from_min_entropy(
            required(&a.h, "h")?,
            eps,
            c2,
        )?],
        BoundChoice::SminIqp => vec![bounds::smin_iqp(
            required(&a.n, "n")?,
            required(&a.delta, "delta")?,
            eps,
            c2,
        )?],
        BoundChoice::SminDesign => vec![bounds::smin_design(
            required(&a.n, "n")?,
            required(&a.delta, "delta")?,
            eps,
            a.eps_tilde.unwrap_or(0.0),
            c2,
        )?],
        BoundChoice::SminBoson => {
            let mut p = BosonBoundParams::new(
                required(&a.n, "n")?,
                required(&a.m, "m")?,
                required(&a.delta, "delta")?,
                eps,
            );
            p.c2 = c2;
            if let Some(z) = a.zeta {
                p.zeta = z;
            }
            if let Some(c) = a.big_c {
                p.big_c = c;
            }
            vec![bounds::smin_boson(&p)?]
        }
        BoundChoice::SminBosonFlat => vec![bounds::smin_boson_flat(
            required(&a.n, "n")?,
            required(&a.m, "m")?,
            eps,
            a.c.unwrap_or(1.0),
            a.big_c.unwrap_or(0.0),
            c2,
        )?],
    };
    let bytes = match a.format.unwrap_or(TextFormat::Json) {
        TextFormat::Json if reports.len() == 1 => to_json(&reports[0])?,
        TextFormat::Json => to_json(&reports)?,
        TextFormat::Table => reports
            .iter()
            .map(report_table)
            .collect::<String>()
            .into_bytes(),
    };
    Ok(Outputs::new(bytes))
}

fn report_table(r: &BoundReport) -> String {
    let kind = serde_json::to_value(r.kind)
        .ok()
        .and_then(|v| v.as_str().map(String::from))
        .unwrap_or_default();
    let mut s = String::new();
    let _ = writeln!(s, "{:<22} {kind}", "kind");
    let _ = writeln!(s, "{:<22} {}", "value", num(r.value));
    if let Some(b) = r.branch {
        let _ = writeln!(s, "{:<22} {b:?}", "branch");
    }
    let _ = writeln!(s, "{:<22} {}", "trivial", r.trivial);
    for (k, v) in &r.inputs {
        let _ = writeln!(s, "{:<22} {}", k, num(*v));
    }
    for n in &r.notes {
        let _ = writeln!(s, "{:<22} {n}", "note");
    }
    s.push('\n');
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimKind {
    Iqp,
    Haar,
    Rcs,
    Boson,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistFormat {
    /// Plain JSON array.
    Json,
    /// `PVEC1` binary.
    Bin,
    /// `outcome,probability` rows.
    Csv,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[arg(value_enum)]
    pub kind: SimKind,
    /// Qubits, or photons for boson.
    #[arg(long)]
    pub n: Option<u32>,
    /// Modes (boson).
    #[arg(long)]
    pub m: Option<usize>,
    /// Gate count (rcs).
    #[arg(long)]
    pub depth: Option<usize>,
    /// Instance index within the seeded ensemble.
    #[arg(long)]
    pub index: Option<u64>,
    /// IQP weights JSON instead of a random draw.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Boson instance JSON instead of a random draw.
    #[arg(long)]
    pub unitary: Option<PathBuf>,
    /// Also write the drawn instance (iqp weights or boson unitary) here.
    #[arg(long)]
    pub save_instance: Option<PathBuf>,
    #[arg(long)]
    pub max_outcomes: Option<usize>,
    #[arg(long, value_enum)]
    pub format: Option<DistFormat>,
}

fn check_boson_size(n: usize, m: usize, cap: usize) -> CliResult<()> {
    let size = phi_size(m, n);
    if size > cap as f64 {
        return Err(CliError::Resource(format!(
            "|Phi(m={m}, n={n})| = {size:.0} exceeds {cap} outcomes"
        )));
    }
    Ok(())
}

pub fn simulate(a: &SimulateArgs, seed: u64) -> CliResult<Outputs> {
    let mut rng = stream_rng(seed, a.index.unwrap_or(0));
    let mut extra = Vec::new();
    let mut labels: Option<Vec<String>> = None;
    let p = match a.kind {
        SimKind::Iqp => {
            let w = match &a.weights {
                Some(path) => read_json::<IqpWeights>(path)?,
                None => IqpWeights::random(required(&a.n, "n")?, default_angle_set(), &mut rng)?,
            };
            if let Some(path) = &a.save_instance {
                extra.push((path.clone(), to_json(&w)?));
            }
            qsim::iqp_output_distribution(&w)?
        }
        SimKind::Haar | SimKind::Rcs => {
            if a.save_instance.is_some() {
                return invalid("--save-instance is only supported for iqp and boson");
            }
            let n = required(&a.n, "n")?;
            if a.kind == SimKind::Haar {
                qsim::haar_state_distribution(n, &mut rng)?
            } else {
                qsim::local_random_circuit_distribution(n, required(&a.depth, "depth")?, &mut rng)?
            }
        }
        SimKind::Boson => {
            let cap = a.max_outcomes.unwrap_or(DEFAULT_MAX_OUTCOMES);
            let inst = match &a.unitary {
                Some(path) => read_json::<BosonInstance>(path)?,
                None => {
                    let (n, m) = (required(&a.n, "n")? as usize, required(&a.m, "m")?);
                    check_boson_size(n, m, cap)?;
                    BosonInstance::haar_columns(n, m, &mut rng)?
                }
            };
            if let Some(path) = &a.save_instance {
                extra.push((path.clone(), to_json(&inst)?));
            }
            let (p, outcomes) = boson::boson_distribution_capped(&inst, cap)?;
            labels = Some(outcomes.iter().map(|s| s.to_string()).collect());
            p
        }
    };
    let primary = match a.format.unwrap_or(DistFormat::Json) {
        DistFormat::Json => to_json(&p)?,
        DistFormat::Bin => p.to_binary(),
        DistFormat::Csv => {
            let mut s = String::from("outcome,probability\n");
            for (i, x) in p.entries().iter().enumerate() {
                let label = labels
                    .as_ref()
                    .map_or_else(|| i.to_string(), |l| l[i].clone());
                let _ = writeln!(s, "{label},{}", num(*x));
            }
            s.into_bytes()
        }
    };
    Ok(Outputs { primary, extra })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnsembleChoice {
    Iqp,
    Haar,
    Rcs,
    Boson,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EnsembleArgs {
    #[arg(long, value_enum)]
    pub ensemble: Option<EnsembleChoice>,
    /// Modes (boson).
    #[arg(long)]
    pub m: Option<usize>,
    /// Gate count (rcs); default 200.
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long)]
    pub instances: Option<usize>,
    #[arg(long)]
    pub max_outcomes: Option<usize>,
}

impl EnsembleArgs {
    fn build(&self, n: u32, seed: u64) -> CliResult<Box<dyn Ensemble>> {
        Ok(match required(&self.ensemble, "ensemble")? {
            EnsembleChoice::Iqp => Box::new(CircuitEnsemble::iqp(n, seed)?),
            EnsembleChoice::Haar => Box::new(CircuitEnsemble::haar_state(n, seed)?),
            EnsembleChoice::Rcs => Box::new(CircuitEnsemble::local_random(
                n,
                self.depth.unwrap_or(200),
                seed,
            )?),
            EnsembleChoice::Boson => {
                let m = required(&self.m, "m")?;
                check_boson_size(
                    n as usize,
                    m,
                    self.max_outcomes.unwrap_or(DEFAULT_MAX_OUTCOMES),
                )?;
                Box::new(BosonEnsemble::new(n as usize, m)?)
            }
        })
    }

    fn instances(&self, default: usize) -> usize {
        self.instances.unwrap_or(default)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TableFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct MomentsArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub ensemble: EnsembleArgs,
    /// Qubit (or photon) counts to sweep.
    #[arg(long, value_delimiter = ',')]
    #[serde(default)]
    pub n: Vec<u32>,
    /// Relative design error for the reference column of rcs.
    #[arg(long)]
    pub eps_tilde: Option<f64>,
    #[arg(long)]
    pub big_c: Option<f64>,
    #[arg(long, value_enum)]
    pub format: Option<TableFormat>,
}

pub fn moments(a: &MomentsArgs, seed: u64) -> CliResult<Outputs> {
    if a.n.is_empty() {
        return invalid("missing --n");
    }
    let instances = a.ensemble.instances(1000);
    let mut rows = Vec::new();
    for &n in &a.n {
        let ens = a.ensemble.build(n, seed)?;
        let (opts, reference) = match a.ensemble.ensemble {
            Some(EnsembleChoice::Boson) => {
                let b = BosonEnsemble::new(n as usize, a.ensemble.m.unwrap_or(0))?;
                let m = b.m;
                let opts = MomentOptions {
                    per_outcome: false,
                    subset: Some(b.collision_free_indices()?),
                };
                (
                    opts,
                    phi_collision_free_size(m, n as usize)
                        * fourth_moment_bound(n as usize, m, a.big_c.unwrap_or(0.0)),
                )
            }
            Some(EnsembleChoice::Iqp) => (MomentOptions::default(), iqp_second_moment_sum_bound(n)),
            _ => (
                MomentOptions::default(),
                design_second_moment_sum_bound(n, a.eps_tilde.unwrap_or(0.0)),
            ),
        };
        let est = estimate_second_moments_with(ens.as_ref(), instances, seed, &opts)?;
        rows.push((n, est, reference));
    }
    let bytes = match a.format.unwrap_or(TableFormat::Csv) {
        TableFormat::Csv => {
            let mut s = String::from("n,instances,estimate,std_error,reference\n");
            for (n, e, r) in &rows {
                let _ = writeln!(
                    s,
                    "{n},{},{},{},{}",
                    e.num_instances,
                    num(e.sum_second_moments),
                    num(e.std_error),
                    num(*r)
                );
            }
            s.into_bytes()
        }
        TableFormat::Json => to_json(
            &rows
                .iter()
                .map(|(n, e, r)| json!({ "n": n, "estimate": e, "reference": r }))
                .collect::<Vec<_>>(),
        )?,
    };
    Ok(Outputs::new(bytes))
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct TailCheckArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub ensemble: EnsembleArgs,
    #[arg(long)]
    pub n: Option<u32>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Known `Σ_S E[P(S)²]`; estimated when omitted.
    #[arg(long)]
    pub second_moment: Option<f64>,
}

pub fn tail_check(a: &TailCheckArgs, seed: u64) -> CliResult<Outputs> {
    let ens = a.ensemble.build(required(&a.n, "n")?, seed)?;
    let r = min_entropy_tail_check(
        ens.as_ref(),
        a.delta.unwrap_or(0.1),
        a.ensemble.instances(1000),
        seed,
        a.second_moment,
    )?;
    Ok(Outputs::new(to_json(&r)?))
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct AntiArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub ensemble: EnsembleArgs,
    #[arg(long)]
    pub n: Option<u32>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Outcome index `S`.
    #[arg(long)]
    pub outcome: Option<usize>,
    /// `E[P(S)]`; defaults to one over the number of outcomes.
    #[arg(long)]
    pub mean: Option<f64>,
}

pub fn anticoncentration(a: &AntiArgs, seed: u64) -> CliResult<Outputs> {
    let ens = a.ensemble.build(required(&a.n, "n")?, seed)?;
    let r = anti_concentration_check(
        ens.as_ref(),
        a.alpha.unwrap_or(0.5),
        a.ensemble.instances(1000),
        seed,
        a.outcome.unwrap_or(0),
        a.mean,
    )?;
    Ok(Outputs::new(to_json(&r)?))
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct CertifyArgs {
    /// Target distribution (same forms as --dist).
    #[arg(long)]
    pub target: Option<String>,
    /// Samples file: JSON array or whitespace-separated outcome indices.
    #[arg(long)]
    pub samples: Option<PathBuf>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub calibration_runs: Option<usize>,
    /// Acceptance margin above 2/3 targeted by calibration.
    #[arg(long)]
    pub margin: Option<f64>,
}

pub fn certify(a: &CertifyArgs, seed: u64) -> CliResult<Outputs> {
    let p = parse_dist(&required(&a.target, "target")?)?;
    let samples = read_samples(&required(&a.samples, "samples")?)?;
    let mut cfg = TesterConfig::new(required(&a.eps, "eps")?, samples.len(), seed);
    if let Some(r) = a.calibration_runs {
        cfg.calibration_runs = r;
    }
    if let Some(m) = a.margin {
        cfg.margin = m;
    }
    let verdict = IdentityTester::calibrate(&p, &cfg)?.test(&samples)?;
    Ok(Outputs::new(to_json(&verdict)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdversaryChoice {
    Pairwise,
    Tail,
    Max,
    All,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ComplexityArgs {
    /// Targets to sweep; repeat the flag or separate with commas.
    #[arg(long, value_delimiter = ',')]
    #[serde(default)]
    pub dist: Vec<String>,
    #[arg(long, value_enum, value_delimiter = ',')]
    #[serde(default)]
    pub adversary: Vec<AdversaryChoice>,
    #[arg(long)]
    pub eps: Option<f64>,
    /// Trials per side at each sample size (at least 300).
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub start: Option<usize>,
    #[arg(long)]
    pub max_samples: Option<usize>,
    /// Relative bracket width for bisection; 0 disables it.
    #[arg(long)]
    pub refine_to: Option<f64>,
    #[arg(long)]
    pub calibration_runs: Option<usize>,
}

pub fn complexity(a: &ComplexityArgs, seed: u64) -> CliResult<Outputs> {
    if a.dist.is_empty() {
        return invalid("missing --dist");
    }
    let eps = a.eps.unwrap_or(0.25);
    let mut search = ComplexitySearch::default();
    if let Some(t) = a.trials {
        search.trials = t;
    }
    if let Some(s) = a.start {
        search.start = s;
    }
    if let Some(s) = a.max_samples {
        search.max_samples = s;
    }
    if let Some(r) = a.refine_to {
        search.refine_to = (r > 0.0).then_some(r);
    }
    let mut adversaries = Vec::new();
    for choice in if a.adversary.is_empty() {
        &[AdversaryChoice::Pairwise][..]
    } else {
        &a.adversary[..]
    } {
        match choice {
            AdversaryChoice::Pairwise => adversaries.push(Adversary::PairwiseShift),
            AdversaryChoice::Tail => adversaries.push(Adversary::TailDeletion),
            AdversaryChoice::Max => adversaries.push(Adversary::MaxInflation),
            AdversaryChoice::All => adversaries.extend(Adversary::ALL),
        }
    }

    let mut s = String::from("target,dim,support,adversary,samples,l1_distance,vv_lower_c2_1\n");
    let mut points = Vec::new();
    let mut row = 0u64;
    for spec in &a.dist {
        let p = parse_dist(spec)?;
        for adv in &adversaries {
            let q = adv.construct(&p, eps)?;
            let mut cfg = TesterConfig::new(eps, 1, derive_seed(seed, row));
            if let Some(r) = a.calibration_runs {
                cfg.calibration_runs = r;
            }
            let res = empirical_sample_complexity(&p, &q, &cfg, &search)?;
            let unit = bounds::vv_lower_bound(&p, eps, 1.0)?.value;
            let adv_name = serde_json::to_value(adv)
                .ok()
                .and_then(|v| v.as_str().map(String::from))
                .unwrap_or_default();
            let _ = writeln!(
                s,
                "{spec},{},{},{adv_name},{},{},{}",
                p.dim(),
                p.support_size(),
                res.samples,
                num(res.l1_distance),
                num(unit)
            );
            points.push((p.clone(), res.samples));
            row += 1;
        }
    }
    let _ = writeln!(
        s,
        "# consistent_c2 = {}",
        num(consistent_lower_constant(&points, eps)?)
    );
    Ok(Outputs::new(s))
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct BsTailArgs {
    /// Photon counts to sweep.
    #[arg(long, value_delimiter = ',')]
    #[serde(default)]
    pub n: Vec<u32>,
    /// Fixed mode count; otherwise `m = round(c nᵛ)` from --nu.
    #[arg(long)]
    pub m: Option<u64>,
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub big_c: Option<f64>,
}

pub fn bs_tail(a: &BsTailArgs) -> CliResult<Outputs> {
    if a.n.is_empty() {
        return invalid("missing --n");
    }
    let c = a.c.unwrap_or(1.0);
    let big_c = a.big_c.unwrap_or(0.0);
    let mut s = String::from("n,m,nu,ln_tail_bound,tail_bound\n");
    for &n in &a.n {
        let m = match (a.m, a.nu) {
            (Some(m), None) => m,
            (None, Some(nu)) => (c * (n as f64).powf(nu)).round() as u64,
            _ => return invalid("give exactly one of --m and --nu"),
        };
        let nu = infer_nu(n, m, c)?;
        let ln = ln_bs_flatness_tail_bound(n, m, c, big_c)?;
        let bound = bs_flatness_tail_bound(n, m, c, big_c)?;
        let _ = writeln!(
            s,
            "{n},{m},{},{},{}",
            num(nu),
            ln.map_or_else(|| "inf".to_string(), num),
            num(bound)
        );
    }
    Ok(Outputs::new(s))
}
