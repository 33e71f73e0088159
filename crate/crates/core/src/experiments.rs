//! Config-driven sweeps over perturbation families: continuity of the
//! optimal cost, robustness of mismatched policies, kernel distances,
//! ergodicity certificates and adaptive learning runs.
//!
//! Work items for different `n` (or seeds) run on worker threads; the
//! `AVGCOST_THREADS` environment variable caps their number. Results are
//! always written in `(n, seed)` order, so output files do not depend on
//! scheduling.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::dp::{evaluate_policy, mismatch, solve_acoe, AcoeOptions, Certification};
use crate::error::{Error, Result};
use crate::learning::{
    adaptive_run, write_series_csv, AdaptiveConfig, AdaptiveRow, Estimator, Exploration, Schedule, ShiftDynamics,
};
use crate::mdp::{parse_json, read_file};
use crate::metrics::{check_ergodicity, kernel_distance, kernel_sup_distance, Aggregation, DistanceMode, ErgodicityOptions, KernelDistance};
use crate::perturbations::{ClaimValidation, MixingRate};
use crate::{Distribution, FiniteMdp, PerturbationFamily};

pub const THREADS_ENV: &str = "AVGCOST_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pipeline {
    Continuity,
    Robustness,
    Distances,
    Ergodicity,
    Learning,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyParams {
    /// Largest `n` the family has to support; defaults to the largest grid point.
    pub n_max: Option<usize>,
    /// Base model file for `noise_mixture`.
    pub base: Option<PathBuf>,
    /// Contaminating distribution for `noise_mixture`; uniform by default.
    pub contaminant: Option<Vec<f64>>,
    pub rate: Option<MixingRate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    pub name: String,
    #[serde(default)]
    pub params: FamilyParams,
}

/// A fixed true/design pair used for every `n` of the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelPair {
    #[serde(rename = "true")]
    pub truth: PathBuf,
    pub design: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub anchor: usize,
    /// Refuse to solve models without an ergodicity certificate.
    pub certify: bool,
    pub t_max: usize,
    pub policy_cap: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let acoe = AcoeOptions::default();
        let erg = ErgodicityOptions::default();
        Self {
            tol: acoe.tol,
            max_iter: acoe.max_iter,
            anchor: acoe.anchor,
            certify: true,
            t_max: erg.t_max,
            policy_cap: erg.policy_cap,
        }
    }
}

impl SolverConfig {
    pub fn ergodicity(&self) -> ErgodicityOptions {
        ErgodicityOptions { t_max: self.t_max, policy_cap: self.policy_cap }
    }

    pub fn acoe(&self) -> AcoeOptions {
        AcoeOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            anchor: self.anchor,
            certification: if self.certify { Certification::Require(self.ergodicity()) } else { Certification::Override },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Counts,
    NoiseInversion,
    Truth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearningSpec {
    pub estimator: EstimatorKind,
    /// Required for `noise_inversion`.
    #[serde(default)]
    pub dynamics: Option<ShiftDynamics>,
    pub k_max: usize,
    #[serde(default = "default_schedule")]
    pub schedule: Schedule,
    #[serde(default = "default_exploration")]
    pub exploration: Exploration,
    #[serde(default)]
    pub initial_state: usize,
}

fn default_schedule() -> Schedule {
    Schedule::Factorial
}

fn default_exploration() -> Exploration {
    Exploration::InverseBlock
}

/// JSON experiment description. Relative paths are resolved against the
/// directory holding the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub family: Option<FamilySpec>,
    #[serde(default)]
    pub models: Option<ModelPair>,
    pub n_grid: Vec<usize>,
    pub pipelines: Vec<Pipeline>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub learning: Option<LearningSpec>,
    pub output: PathBuf,
}

impl ExperimentConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let config: Self = parse_json(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.family, &self.models) {
            (None, None) => return Err(Error::validation("family", "either family or models is required")),
            (Some(_), Some(_)) => return Err(Error::validation("models", "give either family or models, not both")),
            _ => {}
        }
        if self.n_grid.is_empty() {
            return Err(Error::validation("n_grid", "must be nonempty"));
        }
        if self.n_grid[0] == 0 {
            return Err(Error::validation("n_grid[0]", "grid points must be positive"));
        }
        if let Some(i) = self.n_grid.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::validation(format!("n_grid[{}]", i + 1), "must be strictly increasing"));
        }
        if self.pipelines.is_empty() {
            return Err(Error::validation("pipelines", "select at least one pipeline"));
        }
        if self.solver.tol.is_nan() || self.solver.tol <= 0.0 {
            return Err(Error::validation("solver.tol", "must be positive"));
        }
        if self.pipelines.contains(&Pipeline::Learning) {
            let Some(spec) = &self.learning else {
                return Err(Error::validation("learning", "required by the learning pipeline"));
            };
            if self.seeds.is_empty() {
                return Err(Error::validation("seeds", "the learning pipeline needs at least one seed"));
            }
            if spec.estimator == EstimatorKind::NoiseInversion && spec.dynamics.is_none() {
                return Err(Error::validation("learning.dynamics", "required by the noise_inversion estimator"));
            }
            spec.schedule.validate(spec.k_max).map_err(|e| match e {
                Error::Validation { path, message } => Error::validation(format!("learning.{path}"), message),
                other => other,
            })?;
        }
        if let Some(i) = self.seeds.iter().enumerate().position(|(i, s)| self.seeds[..i].contains(s)) {
            return Err(Error::validation(format!("seeds[{i}]"), "duplicate seed"));
        }
        Ok(())
    }
}

/// Where members and limits come from.
#[derive(Debug, Clone)]
pub enum Source {
    Family(PerturbationFamily),
    Pair { truth: FiniteMdp, design: FiniteMdp },
}

impl Source {
    pub fn member(&self, n: usize) -> Result<FiniteMdp> {
        match self {
            Source::Family(f) => f.member(n),
            Source::Pair { design, .. } => Ok(design.clone()),
        }
    }

    pub fn limit(&self, n: usize) -> Result<FiniteMdp> {
        match self {
            Source::Family(f) => f.limit(n),
            Source::Pair { truth, .. } => Ok(truth.clone()),
        }
    }

    fn fixture_names(&self) -> &'static [&'static str] {
        match self {
            Source::Family(f) => f.fixture_names(),
            Source::Pair { .. } => &[],
        }
    }
}

/// A validated config with its models loaded.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub source: Source,
    pub output: PathBuf,
    /// Set for families; `None` for model pairs.
    pub claim: Option<ClaimValidation>,
}

impl Experiment {
    pub fn load(path: &Path) -> Result<Self> {
        let config = ExperimentConfig::from_json_str(&read_file(path)?)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::new(config, base)
    }

    /// Resolves relative paths against `base`, builds the source, and checks
    /// the family's convergence claim on the grid.
    pub fn new(config: ExperimentConfig, base: &Path) -> Result<Self> {
        config.validate()?;
        let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
        let n_top = *config.n_grid.last().expect("validated nonempty");
        let source = match (&config.family, &config.models) {
            (Some(spec), _) => Source::Family(build_family(spec, n_top, &resolve)?),
            (None, Some(pair)) => {
                let truth = FiniteMdp::load(&resolve(&pair.truth))?;
                let design = FiniteMdp::load(&resolve(&pair.design))?;
                if !truth.same_shape(&design) {
                    return Err(Error::validation("models", "true and design models differ in shape"));
                }
                Source::Pair { truth, design }
            }
            (None, None) => unreachable!("validated"),
        };
        let claim = match &source {
            Source::Family(f) => {
                let claim = f.validate_claim(&config.n_grid)?;
                if !claim.valid {
                    return Err(Error::Precondition(format!(
                        "family {} does not show its {:?} convergence on the grid: distances {:?}",
                        f.name(),
                        claim.claim,
                        claim.distances
                    )));
                }
                Some(claim)
            }
            Source::Pair { .. } => None,
        };
        let output = resolve(&config.output);
        Ok(Self { config, source, output, claim })
    }
}

fn build_family(spec: &FamilySpec, n_top: usize, resolve: &dyn Fn(&Path) -> PathBuf) -> Result<PerturbationFamily> {
    let params = &spec.params;
    let n_max = params.n_max.unwrap_or(n_top);
    if n_max < n_top {
        return Err(Error::validation("family.params.n_max", "smaller than the largest grid point"));
    }
    if spec.name == "noise_mixture" {
        let Some(base) = &params.base else {
            return Err(Error::validation("family.params.base", "noise_mixture needs a base model"));
        };
        let base = FiniteMdp::load(&resolve(base))?;
        let contaminant = match &params.contaminant {
            Some(w) => Distribution::new(w.clone()).map_err(|e| match e {
                Error::Validation { path, message } => Error::validation(format!("family.params.contaminant{path}"), message),
                other => other,
            })?,
            None => Distribution::uniform(base.n_states()),
        };
        return PerturbationFamily::noise_mixture(base, contaminant, params.rate.unwrap_or_default());
    }
    if params.base.is_some() || params.contaminant.is_some() || params.rate.is_some() {
        return Err(Error::validation("family.params", format!("{} takes only n_max", spec.name)));
    }
    PerturbationFamily::builtin(&spec.name, n_max)
}

fn thread_count() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&t| t > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Order-preserving parallel map.
fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let threads = thread_count().min(items.len());
    if threads <= 1 {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                slots.lock().expect("no worker panicked")[i] = Some(r);
            });
        }
    });
    slots.into_inner().expect("no worker panicked").into_iter().map(|r| r.expect("every slot filled")).collect()
}

fn per_n<R: Send>(exp: &Experiment, f: impl Fn(usize) -> Result<R> + Sync) -> Result<Vec<R>> {
    par_map(&exp.config.n_grid, |&n| f(n).map_err(|e| Error::Member { n, source: Box::new(e) }))
        .into_iter()
        .collect()
}

/// One grid point of a sweep. Fields a pipeline does not compute are left empty.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub tv_sup: Option<f64>,
    pub bl_sup: Option<f64>,
    pub j_star_n: Option<f64>,
    pub j_star_true: Option<f64>,
    pub j_applied: Option<f64>,
    pub gap: Option<f64>,
    /// `sp(T v - v)` of the solve on member `n`.
    pub acoe_residual_n: Option<f64>,
}

/// A hand-built policy of the family evaluated on member `n` and on the limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureRow {
    pub n: usize,
    pub fixture: String,
    pub j_member: f64,
    pub j_limit: f64,
    pub gap: f64,
}

/// `sup_u TV(T_n(.|x,u), T(.|x,u))` for one state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerStateRow {
    pub n: usize,
    pub x: usize,
    pub label: String,
    pub tv_sup_u: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub fixtures: Vec<FixtureRow>,
    pub per_state: Vec<PerStateRow>,
}

fn distances(member: &FiniteMdp, limit: &FiniteMdp) -> Result<(f64, f64)> {
    let coords = member.states().coords();
    Ok((
        kernel_sup_distance(member.kernel(), limit.kernel(), DistanceMode::Tv, coords)?,
        kernel_sup_distance(member.kernel(), limit.kernel(), DistanceMode::Bl, coords)?,
    ))
}

/// Solves member `n` and the limit and records `|j*_n - j*|` next to the
/// kernel distances.
pub fn run_continuity(exp: &Experiment) -> Result<SweepResult> {
    let options = exp.config.solver.acoe();
    let rows = per_n(exp, |n| {
        let member = exp.source.member(n)?;
        let limit = exp.source.limit(n)?;
        let (tv, bl) = distances(&member, &limit)?;
        let sol_n = solve_acoe(&member, &options)?;
        let sol = solve_acoe(&limit, &options)?;
        Ok(SweepRow {
            n,
            tv_sup: Some(tv),
            bl_sup: Some(bl),
            j_star_n: Some(sol_n.j_star),
            j_star_true: Some(sol.j_star),
            j_applied: None,
            gap: Some((sol_n.j_star - sol.j_star).abs()),
            acoe_residual_n: Some(sol_n.residual),
        })
    })?;
    Ok(SweepResult { rows, ..Default::default() })
}

/// Designs on member `n`, applies the design to the limit, and records the
/// excess cost. Fixture policies of the family are evaluated alongside.
pub fn run_robustness(exp: &Experiment) -> Result<SweepResult> {
    let options = exp.config.solver.acoe();
    let tol = exp.config.solver.tol;
    let results = per_n(exp, |n| {
        let member = exp.source.member(n)?;
        let limit = exp.source.limit(n)?;
        let (tv, bl) = distances(&member, &limit)?;
        let record = mismatch(&limit, &member, &options, None)?;
        if record.gap < -tol {
            return Err(Error::Precondition(format!(
                "mismatch gap {} below the solver tolerance; the true solve is inaccurate",
                record.gap
            )));
        }
        let row = SweepRow {
            n,
            tv_sup: Some(tv),
            bl_sup: Some(bl),
            j_star_n: Some(record.j_design_opt),
            j_star_true: Some(record.j_true_opt),
            j_applied: Some(record.j_applied),
            gap: Some(record.gap),
            acoe_residual_n: Some(record.design_residual),
        };
        let mut fixtures = Vec::new();
        if let Source::Family(family) = &exp.source {
            for &name in exp.source.fixture_names() {
                let policy = family.fixture(name, n)?;
                let j_member = evaluate_policy(&member, &policy)?.j;
                let j_limit = evaluate_policy(&limit, &policy)?.j;
                fixtures.push(FixtureRow {
                    n,
                    fixture: name.to_string(),
                    j_member,
                    j_limit,
                    gap: j_limit - record.j_true_opt,
                });
            }
        }
        Ok((row, fixtures))
    })?;
    let mut out = SweepResult::default();
    for (row, fixtures) in results {
        out.rows.push(row);
        out.fixtures.extend(fixtures);
    }
    Ok(out)
}

/// Kernel distances per `n`, including the per-state `sup_u` TV profile.
pub fn run_distances(exp: &Experiment) -> Result<SweepResult> {
    let results = per_n(exp, |n| {
        let member = exp.source.member(n)?;
        let limit = exp.source.limit(n)?;
        let (tv, bl) = distances(&member, &limit)?;
        let KernelDistance::PerState(per_x) = kernel_distance(
            member.kernel(),
            limit.kernel(),
            DistanceMode::Tv,
            Aggregation::SupUPerX,
            member.states().coords(),
        )?
        else {
            unreachable!("per-state aggregation")
        };
        let labels = member.states().labels();
        let per_state = per_x
            .into_iter()
            .enumerate()
            .map(|(x, d)| PerStateRow { n, x, label: labels[x].clone(), tv_sup_u: d })
            .collect::<Vec<_>>();
        Ok((SweepRow { n, tv_sup: Some(tv), bl_sup: Some(bl), ..Default::default() }, per_state))
    })?;
    let mut out = SweepResult::default();
    for (row, per_state) in results {
        out.rows.push(row);
        out.per_state.extend(per_state);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErgodicityRow {
    pub n: usize,
    pub member_conditions: String,
    pub member_beta: f64,
    pub member_t_star: usize,
    pub limit_conditions: String,
    pub limit_beta: f64,
    pub limit_t_star: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErgodicitySweep {
    pub rows: Vec<ErgodicityRow>,
    /// Largest certified `beta` over all members; infinite if some member fails f.
    pub beta_sup: f64,
    /// Every member satisfies f and `beta_sup < 1`.
    pub uniform: bool,
}

/// Certifies every member and limit on the grid. The family-wide bound is
/// the largest member coefficient, each at its own `t*`.
pub fn run_ergodicity(exp: &Experiment) -> Result<ErgodicitySweep> {
    let options = exp.config.solver.ergodicity();
    let rows = per_n(exp, |n| {
        let member = check_ergodicity(&exp.source.member(n)?, &options)?;
        let limit = check_ergodicity(&exp.source.limit(n)?, &options)?;
        Ok(ErgodicityRow {
            n,
            member_conditions: member.condition_labels.join(""),
            member_beta: if member.holds("f") { member.dobrushin_beta } else { f64::INFINITY },
            member_t_star: member.t_star,
            limit_conditions: limit.condition_labels.join(""),
            limit_beta: if limit.holds("f") { limit.dobrushin_beta } else { f64::INFINITY },
            limit_t_star: limit.t_star,
        })
    })?;
    let beta_sup = rows.iter().map(|r| r.member_beta).fold(0.0, f64::max);
    Ok(ErgodicitySweep { uniform: beta_sup < 1.0, beta_sup, rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MedianRow {
    pub k: usize,
    pub n_k: u64,
    pub sup_tv_error: f64,
    pub bl_error: f64,
    pub j_applied_block: f64,
    pub running_average: f64,
    pub unvisited_pairs: f64,
    pub seeds: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearningResult {
    pub j_star_true: f64,
    /// One series per seed, in config order.
    pub series: Vec<(u64, Vec<AdaptiveRow>)>,
    pub median: Vec<MedianRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningSummary {
    pub j_star_true: f64,
    pub final_gaps: BTreeMap<u64, f64>,
    pub median_final_gap: f64,
    /// `k n_k <= (k + 2) T_k` for each block.
    pub schedule_certificate: Vec<bool>,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    }
}

/// The learning target: the limit model at the largest grid point.
fn learning_truth(exp: &Experiment) -> Result<FiniteMdp> {
    exp.source.limit(*exp.config.n_grid.last().expect("validated nonempty"))
}

/// Runs the adaptive controller once per seed on the true model.
pub fn run_learning(exp: &Experiment) -> Result<LearningResult> {
    let spec = exp.config.learning.as_ref().ok_or_else(|| Error::validation("learning", "missing learning section"))?;
    let truth = learning_truth(exp)?;
    let estimator = match spec.estimator {
        EstimatorKind::Counts => Estimator::Counts,
        EstimatorKind::Truth => Estimator::Truth,
        EstimatorKind::NoiseInversion => {
            let d = spec.dynamics.as_ref().ok_or_else(|| Error::validation("learning.dynamics", "missing"))?;
            Estimator::NoiseInversion(ShiftDynamics::new(d.n_states, d.target.clone(), d.noise_grid.clone())?)
        }
    };
    let j_star_true = solve_acoe(&truth, &exp.config.solver.acoe())?.j_star;
    let series = par_map(&exp.config.seeds, |&seed| {
        let config = AdaptiveConfig {
            schedule: spec.schedule.clone(),
            estimator: estimator.clone(),
            exploration: spec.exploration,
            k_max: spec.k_max,
            seed,
            initial_state: spec.initial_state,
            acoe: exp.config.solver.acoe(),
        };
        adaptive_run(&truth, &config).map(|s| (seed, s.rows))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let median = (0..spec.k_max)
        .map(|i| {
            let column = |f: &dyn Fn(&AdaptiveRow) -> f64| {
                let mut v: Vec<f64> = series.iter().map(|(_, rows)| f(&rows[i])).collect();
                median(&mut v)
            };
            MedianRow {
                k: i + 1,
                n_k: series[0].1[i].n_k,
                sup_tv_error: column(&|r| r.sup_tv_error),
                bl_error: column(&|r| r.bl_error),
                j_applied_block: column(&|r| r.j_applied_block),
                running_average: column(&|r| r.running_average),
                unvisited_pairs: column(&|r| r.unvisited_pairs as f64),
                seeds: series.len(),
            }
        })
        .collect();
    Ok(LearningResult { j_star_true, series, median })
}

impl LearningResult {
    pub fn summary(&self, schedule: &Schedule) -> LearningSummary {
        let final_gaps: BTreeMap<u64, f64> = self
            .series
            .iter()
            .map(|(seed, rows)| (*seed, rows.last().map_or(f64::NAN, |r| (r.running_average - self.j_star_true).abs())))
            .collect();
        let mut gaps: Vec<f64> = final_gaps.values().copied().collect();
        LearningSummary {
            j_star_true: self.j_star_true,
            median_final_gap: median(&mut gaps),
            schedule_certificate: (1..=self.median.len()).map(|k| schedule.ratio_certificate(k)).collect(),
            final_gaps,
        }
    }
}

/// What [`run`] wrote.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub output: PathBuf,
    pub files: Vec<String>,
    pub claim: Option<ClaimValidation>,
    pub ergodicity: Option<ErgodicitySummary>,
    pub learning: Option<LearningSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErgodicitySummary {
    pub beta_sup: f64,
    pub uniform: bool,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.display().to_string(), source }
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut writer = csv::Writer::from_writer(file);
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush().map_err(io_err(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("plain data serializes");
    fs::write(path, text + "\n").map_err(io_err(path))
}

/// Runs every selected pipeline and writes its CSV and JSON files into the
/// output directory.
pub fn run(exp: &Experiment) -> Result<RunSummary> {
    fs::create_dir_all(&exp.output).map_err(io_err(&exp.output))?;
    let mut files = Vec::new();
    let mut emit = |name: String| files.push(name);
    let mut pipelines = exp.config.pipelines.clone();
    pipelines.sort();
    pipelines.dedup();
    let mut ergodicity = None;
    let mut learning = None;
    for pipeline in pipelines {
        match pipeline {
            Pipeline::Continuity => {
                write_csv(&exp.output.join("continuity.csv"), &run_continuity(exp)?.rows)?;
                emit("continuity.csv".into());
            }
            Pipeline::Robustness => {
                let sweep = run_robustness(exp)?;
                write_csv(&exp.output.join("robustness.csv"), &sweep.rows)?;
                emit("robustness.csv".into());
                if !sweep.fixtures.is_empty() {
                    write_csv(&exp.output.join("robustness_fixtures.csv"), &sweep.fixtures)?;
                    emit("robustness_fixtures.csv".into());
                }
            }
            Pipeline::Distances => {
                let sweep = run_distances(exp)?;
                write_csv(&exp.output.join("distances.csv"), &sweep.rows)?;
                write_csv(&exp.output.join("distances_per_state.csv"), &sweep.per_state)?;
                emit("distances.csv".into());
                emit("distances_per_state.csv".into());
            }
            Pipeline::Ergodicity => {
                let sweep = run_ergodicity(exp)?;
                write_csv(&exp.output.join("ergodicity.csv"), &sweep.rows)?;
                emit("ergodicity.csv".into());
                ergodicity = Some(ErgodicitySummary { beta_sup: sweep.beta_sup, uniform: sweep.uniform });
            }
            Pipeline::Learning => {
                let result = run_learning(exp)?;
                for (seed, rows) in &result.series {
                    let name = format!("learning_seed_{seed}.csv");
                    let path = exp.output.join(&name);
                    let file = fs::File::create(&path).map_err(io_err(&path))?;
                    write_series_csv(rows, file)?;
                    emit(name);
                }
                write_csv(&exp.output.join("learning_median.csv"), &result.median)?;
                emit("learning_median.csv".into());
                let spec = exp.config.learning.as_ref().expect("validated");
                let summary = result.summary(&spec.schedule);
                write_json(&exp.output.join("learning_summary.json"), &summary)?;
                emit("learning_summary.json".into());
                learning = Some(summary);
            }
        }
    }
    let summary = RunSummary { output: exp.output.clone(), files, claim: exp.claim.clone(), ergodicity, learning };
    write_json(&exp.output.join("summary.json"), &summary)?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(json: &str) -> Result<ExperimentConfig> {
        ExperimentConfig::from_json_str(json)
    }

    #[test]
    fn rejects_bad_grids_with_paths() {
        let err = config(r#"{"family": {"name": "weak_not_tv"}, "n_grid": [1, 3, 3], "pipelines": ["continuity"], "output": "o"}"#)
            .unwrap_err();
        match err {
            Error::Validation { path, .. } => assert_eq!(path, "n_grid[2]"),
            other => panic!("{other:?}"),
        }
        let err = config(r#"{"family": {"name": "weak_not_tv"}, "n_grid": [1], "pipelines": ["continuity"], "output": "o", "extra": 1}"#)
            .unwrap_err();
        assert!(matches!(err, Error::Validation { .. }), "{err:?}");
        let err = config(r#"{"family": {"name": "weak_not_tv"}, "n_grid": [1], "pipelines": ["learning"], "output": "o"}"#)
            .unwrap_err();
        assert!(matches!(err, Error::Validation { ref path, .. } if path == "learning"), "{err:?}");
    }

    #[test]
    fn solver_path_is_reported() {
        let err = config(r#"{"family": {"name": "weak_not_tv"}, "n_grid": [1], "pipelines": ["continuity"], "solver": {"tol": "x"}, "output": "o"}"#)
            .unwrap_err();
        match err {
            Error::Validation { path, .. } => assert_eq!(path, "solver.tol"),
            other => panic!("{other:?}"),
        }
    }

    fn weak_not_tv(pipelines: &str) -> Experiment {
        let text = format!(
            r#"{{"family": {{"name": "weak_not_tv"}}, "n_grid": [1, 2, 3, 4, 5, 6, 7, 8, 9, 10], "pipelines": {pipelines}, "solver": {{"certify": false}}, "output": "out"}}"#
        );
        Experiment::new(config(&text).unwrap(), Path::new("/tmp")).unwrap()
    }

    #[test]
    fn weak_not_tv_continuity() {
        let sweep = run_continuity(&weak_not_tv(r#"["continuity"]"#)).unwrap();
        for row in &sweep.rows {
            assert_eq!(row.tv_sup, Some(2.0));
            assert_eq!(row.gap, Some(1.0 / row.n as f64));
            assert!(row.bl_sup.unwrap() <= 1.0 / row.n as f64 + 1e-12);
        }
    }

    #[test]
    fn per_state_profile_has_every_state() {
        let exp = weak_not_tv(r#"["distances"]"#);
        let sweep = run_distances(&exp).unwrap();
        assert_eq!(sweep.rows.len(), 10);
        let states = exp.source.member(10).unwrap().n_states();
        assert_eq!(sweep.per_state.len(), 10 * states);
    }

    #[test]
    fn medians() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn par_map_keeps_order() {
        let items: Vec<usize> = (0..100).collect();
        assert_eq!(par_map(&items, |&i| i * i), items.iter().map(|i| i * i).collect::<Vec<_>>());
    }
}
