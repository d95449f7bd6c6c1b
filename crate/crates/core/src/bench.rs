//! Benchmark presets: the completion and noisy-data tables, the Dantzig
//! experiment, a sweep over `tau`, and a single rank trajectory.
//!
//! Every preset runs `repetitions` independent instances with seeds
//! `seed, seed + 1, ...` and reports means. Repetitions run in parallel
//! when the `parallel` feature is on; each one is an isolated solve.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SvtError};
use crate::io::{write_json, write_trace};
use crate::par::{map_collect, Execution};
use crate::problem::{generate, mean_abs_observed, relative_error, sigma_for_noise_ratio, ProblemSpec};
use crate::sampled::SampledMatrix;
use crate::solver::{
    svt_complete, svt_dantzig, IterationRecord, SolveReport, SolveStatus, StopRule, SvtConfig,
    COMPLETION_STEP_BOUND, DANTZIG_STEP_BOUND, DEFAULT_NOISE_EPS,
};

pub const RESULTS_CSV_HEADER: &str = "preset,label,n,rank,oversampling,sampling_ratio,noise_ratio,repetitions,\
converged,failed,mean_seconds,mean_iterations,mean_relative_error,max_relative_error,mean_final_rank,\
rank_nondecreasing,multi_growth_iterations,total_iterations,reference_iterations,reference_relative_error";

pub const TAU_SWEEP_CSV_HEADER: &str =
    "tau,tau_factor,status,iterations,rank,nuclear_norm,distance_to_previous,nuclear_change,relative_error";

/// Smallest dimension a preset may be scaled down to.
pub const MIN_SCALED_N: usize = 40;

/// Multiples of `n` visited by the `tau` sweep.
pub const TAU_FACTORS: [f64; 5] = [1.0, 2.0, 5.0, 10.0, 20.0];

/// Instance and solver settings of the `tau` sweep.
pub const TAU_SWEEP_N: usize = 60;
pub const TAU_SWEEP_RANK: usize = 2;
pub const TAU_SWEEP_OVERSAMPLING: f64 = 8.0;
pub const TAU_SWEEP_DELTA: f64 = 1.5;
pub const TAU_SWEEP_EPS: f64 = 1e-8;
pub const TAU_SWEEP_K_MAX: usize = 20_000;

/// Dantzig noise level as a fraction of a typical absolute entry.
pub const DANTZIG_SIGMA_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PresetName {
    Table1,
    Table2,
    Dantzig,
    TauSweep,
    RankTrajectory,
}

impl PresetName {
    pub const ALL: [PresetName; 5] = [
        PresetName::Table1,
        PresetName::Table2,
        PresetName::Dantzig,
        PresetName::TauSweep,
        PresetName::RankTrajectory,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PresetName::Table1 => "table1",
            PresetName::Table2 => "table2",
            PresetName::Dantzig => "dantzig",
            PresetName::TauSweep => "tau_sweep",
            PresetName::RankTrajectory => "rank_trajectory",
        }
    }
}

impl fmt::Display for PresetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PresetName {
    type Err = SvtError;

    fn from_str(s: &str) -> Result<Self> {
        PresetName::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<_> = PresetName::ALL.iter().map(|p| p.as_str()).collect();
                SvtError::InvalidConfig(format!("unknown preset {s:?}; expected one of {}", names.join(", ")))
            })
    }
}

/// Published numbers for one configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRow {
    pub seconds: f64,
    pub iterations: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CaseKind {
    Noiseless,
    /// Gaussian noise at the given noise ratio, stopped by the discrepancy rule.
    Noisy { noise_ratio: f64 },
    /// Noise `sigma = fraction * mean |M_ij|` and tolerances `E_ij = sigma`.
    Dantzig { sigma_fraction: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchCase {
    /// Label of the unscaled configuration, e.g. `1000x1000,r=10`.
    pub label: String,
    pub n: usize,
    pub rank: usize,
    pub oversampling: f64,
    pub kind: CaseKind,
    pub reference: Option<ReferenceRow>,
}

impl BenchCase {
    fn new(n: usize, rank: usize, oversampling: f64, kind: CaseKind, reference: Option<ReferenceRow>) -> Self {
        let dims = format!("{n}x{n},r={rank}");
        let label = match kind {
            CaseKind::Noiseless => dims,
            CaseKind::Noisy { noise_ratio } => format!("noise={noise_ratio:e},{dims}"),
            CaseKind::Dantzig { .. } => format!("dantzig,{dims}"),
        };
        Self {
            label,
            n,
            rank,
            oversampling,
            kind,
            reference,
        }
    }

    /// True when every comma-separated part of `filter` is a part of the label.
    pub fn matches(&self, filter: &str) -> bool {
        let parts: Vec<&str> = self.label.split(',').collect();
        filter.split(',').map(str::trim).all(|f| parts.contains(&f))
    }
}

fn reference(seconds: f64, iterations: f64, relative_error: f64) -> Option<ReferenceRow> {
    Some(ReferenceRow {
        seconds,
        iterations,
        relative_error,
    })
}

/// The noiseless completion experiments.
pub fn table1_cases() -> Vec<BenchCase> {
    let rows = [
        (1000, 10, 6.0, 23.0, 117.0, 1.64e-4),
        (1000, 50, 4.0, 196.0, 114.0, 1.59e-4),
        (1000, 100, 3.0, 501.0, 129.0, 1.68e-4),
        (5000, 10, 6.0, 147.0, 123.0, 1.73e-4),
        (5000, 50, 5.0, 950.0, 108.0, 1.61e-4),
        (5000, 100, 4.0, 3339.0, 123.0, 1.72e-4),
        (10000, 10, 6.0, 281.0, 123.0, 1.73e-4),
        (10000, 50, 5.0, 2096.0, 110.0, 1.65e-4),
        (10000, 100, 4.0, 7059.0, 127.0, 1.79e-4),
        (20000, 10, 6.0, 588.0, 124.0, 1.73e-4),
        (20000, 50, 5.0, 4581.0, 111.0, 1.66e-4),
        (30000, 10, 6.0, 1030.0, 125.0, 1.73e-4),
    ];
    rows.into_iter()
        .map(|(n, r, ov, t, it, err)| BenchCase::new(n, r, ov, CaseKind::Noiseless, reference(t, it, err)))
        .collect()
}

/// The noisy completion experiments.
pub fn table2_cases() -> Vec<BenchCase> {
    let rows = [
        (1e-2, 10, 6.0, 10.8, 51.0, 0.78e-2),
        (1e-2, 50, 4.0, 87.7, 48.0, 0.95e-2),
        (1e-2, 100, 3.0, 216.0, 50.0, 1.13e-2),
        (1e-1, 10, 6.0, 4.0, 19.0, 0.72e-1),
        (1e-1, 50, 4.0, 33.2, 17.0, 0.89e-1),
        (1e-1, 100, 3.0, 85.2, 17.0, 1.01e-1),
        (1.0, 10, 6.0, 0.9, 3.0, 0.52),
        (1.0, 50, 4.0, 7.8, 3.0, 0.63),
        (1.0, 100, 3.0, 34.8, 3.0, 0.69),
    ];
    rows.into_iter()
        .map(|(noise, r, ov, t, it, err)| {
            BenchCase::new(1000, r, ov, CaseKind::Noisy { noise_ratio: noise }, reference(t, it, err))
        })
        .collect()
}

pub fn dantzig_cases() -> Vec<BenchCase> {
    vec![BenchCase::new(
        1000,
        10,
        5.0,
        CaseKind::Dantzig {
            sigma_fraction: DANTZIG_SIGMA_FRACTION,
        },
        None,
    )]
}

pub fn rank_trajectory_cases() -> Vec<BenchCase> {
    vec![BenchCase::new(5000, 10, 6.0, CaseKind::Noiseless, None)]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchPreset {
    pub name: PresetName,
    /// Dimension multiplier in `(0, 1]`; ranks scale with it.
    pub scale: f64,
    pub repetitions: usize,
    pub seed: u64,
    /// Keeps only cases whose label matches (see [`BenchCase::matches`]).
    pub only: Option<String>,
    /// Replaces the dimension of every case.
    pub n: Option<usize>,
    /// Replaces the rank of every case.
    pub r: Option<usize>,
}

impl BenchPreset {
    pub fn new(name: PresetName, seed: u64) -> Self {
        Self {
            name,
            scale: 1.0,
            repetitions: 5,
            seed,
            only: None,
            n: None,
            r: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0 && self.scale <= 1.0) {
            return Err(SvtError::InvalidConfig(format!("scale {} must lie in (0, 1]", self.scale)));
        }
        if self.repetitions == 0 {
            return Err(SvtError::InvalidConfig("repetitions must be at least 1".into()));
        }
        Ok(())
    }

    fn base_cases(&self) -> Vec<BenchCase> {
        match self.name {
            PresetName::Table1 => table1_cases(),
            PresetName::Table2 => table2_cases(),
            PresetName::Dantzig => dantzig_cases(),
            PresetName::RankTrajectory => rank_trajectory_cases(),
            PresetName::TauSweep => vec![BenchCase::new(
                TAU_SWEEP_N,
                TAU_SWEEP_RANK,
                TAU_SWEEP_OVERSAMPLING,
                CaseKind::Noiseless,
                None,
            )],
        }
    }

    /// Cases after filtering, scaling and overrides.
    pub fn cases(&self) -> Result<Vec<BenchCase>> {
        self.validate()?;
        let mut out: Vec<BenchCase> = Vec::new();
        for case in self.base_cases() {
            if let Some(filter) = &self.only {
                if !case.matches(filter) {
                    continue;
                }
            }
            let scaled_n = if self.name == PresetName::TauSweep {
                case.n
            } else {
                (case.n as f64 * self.scale).round() as usize
            };
            let scaled_r = if self.name == PresetName::TauSweep {
                case.rank
            } else {
                ((case.rank as f64 * self.scale).round() as usize).max(1)
            };
            let n = self.n.unwrap_or(scaled_n);
            let r = self.r.unwrap_or(scaled_r);
            if n < MIN_SCALED_N {
                return Err(SvtError::InvalidConfig(format!(
                    "{}: scaled dimension {n} is below {MIN_SCALED_N}",
                    case.label
                )));
            }
            if r == 0 || r > n {
                return Err(SvtError::InvalidConfig(format!("{}: rank {r} with n = {n}", case.label)));
            }
            let mut next = BenchCase { n, rank: r, ..case };
            if self.n.is_some() || self.r.is_some() {
                next = BenchCase::new(n, r, next.oversampling, next.kind, None);
            }
            if !out.iter().any(|c| c.label == next.label && c.n == next.n && c.rank == next.rank) {
                out.push(next);
            }
        }
        if out.is_empty() {
            return Err(SvtError::InvalidConfig(format!(
                "no {} configuration matches {:?}",
                self.name,
                self.only.as_deref().unwrap_or("")
            )));
        }
        Ok(out)
    }
}

/// One repetition of one case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub seed: u64,
    pub status: Option<SolveStatus>,
    pub iterations: usize,
    pub relative_error: f64,
    pub seconds: f64,
    pub final_rank: usize,
    pub rank_nondecreasing: bool,
    pub multi_growth_iterations: usize,
    pub noise_ratio: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub preset: PresetName,
    pub label: String,
    pub n: usize,
    pub rank: usize,
    pub oversampling: f64,
    pub sampling_ratio: f64,
    /// Mean measured noise ratio, 0 for noiseless cases.
    pub noise_ratio: f64,
    pub repetitions: usize,
    pub converged: usize,
    /// Repetitions that produced no report at all.
    pub failed: usize,
    pub mean_seconds: f64,
    pub mean_iterations: f64,
    pub mean_relative_error: f64,
    pub max_relative_error: f64,
    pub mean_final_rank: f64,
    /// Repetitions whose rank trajectory never decreased.
    pub rank_nondecreasing: usize,
    pub multi_growth_iterations: usize,
    pub total_iterations: usize,
    pub reference: Option<ReferenceRow>,
    pub runs: Vec<RunOutcome>,
}

impl BenchRow {
    fn from_runs(preset: PresetName, case: &BenchCase, m: usize, runs: Vec<RunOutcome>) -> Self {
        let ok: Vec<&RunOutcome> = runs.iter().filter(|r| r.status.is_some()).collect();
        let mean = |f: &dyn Fn(&RunOutcome) -> f64| {
            if ok.is_empty() {
                f64::NAN
            } else {
                ok.iter().map(|r| f(r)).sum::<f64>() / ok.len() as f64
            }
        };
        Self {
            preset,
            label: case.label.clone(),
            n: case.n,
            rank: case.rank,
            oversampling: case.oversampling,
            sampling_ratio: m as f64 / (case.n * case.n) as f64,
            noise_ratio: mean(&|r| r.noise_ratio),
            repetitions: runs.len(),
            converged: ok.iter().filter(|r| r.status == Some(SolveStatus::Converged)).count(),
            failed: runs.len() - ok.len(),
            mean_seconds: mean(&|r| r.seconds),
            mean_iterations: mean(&|r| r.iterations as f64),
            mean_relative_error: mean(&|r| r.relative_error),
            max_relative_error: ok.iter().map(|r| r.relative_error).fold(f64::NAN, f64::max),
            mean_final_rank: mean(&|r| r.final_rank as f64),
            rank_nondecreasing: ok.iter().filter(|r| r.rank_nondecreasing).count(),
            multi_growth_iterations: ok.iter().map(|r| r.multi_growth_iterations).sum(),
            total_iterations: ok.iter().map(|r| r.iterations).sum(),
            reference: case.reference,
            runs,
        }
    }

    /// Share of iterations that needed more than one growth round.
    pub fn multi_growth_fraction(&self) -> f64 {
        if self.total_iterations == 0 {
            0.0
        } else {
            self.multi_growth_iterations as f64 / self.total_iterations as f64
        }
    }

    fn csv_line(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        format!(
            "{},{},{},{},{},{:e},{:e},{},{},{},{:.3},{},{:e},{:e},{},{},{},{},{},{}",
            self.preset,
            csv_field(&self.label),
            self.n,
            self.rank,
            self.oversampling,
            self.sampling_ratio,
            self.noise_ratio,
            self.repetitions,
            self.converged,
            self.failed,
            self.mean_seconds,
            self.mean_iterations,
            self.mean_relative_error,
            self.max_relative_error,
            self.mean_final_rank,
            self.rank_nondecreasing,
            self.multi_growth_iterations,
            self.total_iterations,
            opt(self.reference.map(|p| p.iterations)),
            opt(self.reference.map(|p| p.relative_error)),
        )
    }
}

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauSweepRow {
    pub tau: f64,
    pub tau_factor: f64,
    pub status: SolveStatus,
    pub iterations: usize,
    pub rank: usize,
    pub nuclear_norm: f64,
    /// `||X_tau - X_prev||_F` against the previous `tau`.
    pub distance_to_previous: Option<f64>,
    /// `| ||X_tau||_* - ||X_prev||_* | / ||X_tau||_*`.
    pub nuclear_change: Option<f64>,
    pub relative_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchResults {
    pub preset: PresetName,
    pub scale: f64,
    pub seed: u64,
    pub repetitions: usize,
    pub rows: Vec<BenchRow>,
    pub tau_sweep: Vec<TauSweepRow>,
    /// Iteration trace of the first repetition (rank trajectory preset only).
    pub trace: Vec<IterationRecord>,
}

/// Solver settings a case runs with: the recommended defaults plus the
/// stop rule and step matching its kind.
pub fn case_config(case: &BenchCase, m: usize, sigma: f64) -> SvtConfig {
    let cfg = SvtConfig::recommended(case.n, case.n, m);
    match case.kind {
        CaseKind::Noiseless => cfg,
        CaseKind::Noisy { .. } => cfg.with_stop_rule(StopRule::NoisyDiscrepancy {
            sigma,
            noise_eps: DEFAULT_NOISE_EPS,
        }),
        CaseKind::Dantzig { .. } => {
            let mut cfg = cfg.with_stop_rule(StopRule::NoisyDiscrepancy {
                sigma,
                noise_eps: DEFAULT_NOISE_EPS,
            });
            cfg.delta *= DANTZIG_STEP_BOUND / COMPLETION_STEP_BOUND;
            cfg
        }
    }
}

/// Generates and solves one instance of `case`.
pub fn run_instance(case: &BenchCase, seed: u64) -> Result<(SolveReport, f64, f64)> {
    let base = ProblemSpec::square(case.n, case.rank, case.oversampling, seed);
    let sigma = match case.kind {
        CaseKind::Noiseless => 0.0,
        CaseKind::Noisy { noise_ratio } => sigma_for_noise_ratio(&base, noise_ratio)?,
        CaseKind::Dantzig { sigma_fraction } => {
            let clean = generate(&base)?;
            sigma_fraction * mean_abs_observed(&clean.clean)
        }
    };
    let p = generate(&base.clone().with_noise(sigma))?;
    let cfg = case_config(case, base.m, sigma);
    let report = match case.kind {
        CaseKind::Dantzig { .. } => {
            let e = SampledMatrix::new(p.omega.clone(), vec![sigma; base.m])?;
            svt_dantzig(&p.obs, &e, &cfg)?
        }
        _ => svt_complete(&p.obs, &cfg)?,
    };
    let err = relative_error(&report.x, &p.m_true)?;
    let noise = if sigma > 0.0 { p.metrics.noise_ratio } else { 0.0 };
    Ok((report, err, noise))
}

fn outcome(seed: u64, result: Result<(SolveReport, f64, f64)>) -> (RunOutcome, Vec<IterationRecord>) {
    match result {
        Ok((rep, err, noise)) => (
            RunOutcome {
                seed,
                status: Some(rep.status),
                iterations: rep.iterations,
                relative_error: err,
                seconds: rep.wall_seconds,
                final_rank: rep.final_rank(),
                rank_nondecreasing: rep.rank_nondecreasing(),
                multi_growth_iterations: rep.multi_growth_iterations(),
                noise_ratio: noise,
                error: rep.message.clone(),
            },
            rep.trajectory,
        ),
        Err(e) => (
            RunOutcome {
                seed,
                status: None,
                iterations: 0,
                relative_error: f64::NAN,
                seconds: 0.0,
                final_rank: 0,
                rank_nondecreasing: false,
                multi_growth_iterations: 0,
                noise_ratio: f64::NAN,
                error: Some(e.to_string()),
            },
            Vec::new(),
        ),
    }
}

/// Runs every case of the preset. A failing repetition is recorded in its
/// row and does not stop the others.
pub fn bench_run(preset: &BenchPreset) -> Result<BenchResults> {
    let cases = preset.cases()?;
    let mut results = BenchResults {
        preset: preset.name,
        scale: preset.scale,
        seed: preset.seed,
        repetitions: preset.repetitions,
        rows: Vec::new(),
        tau_sweep: Vec::new(),
        trace: Vec::new(),
    };
    if preset.name == PresetName::TauSweep {
        let case = &cases[0];
        results.tau_sweep = tau_sweep(case.n, case.rank, case.oversampling, preset.seed)?;
        return Ok(results);
    }
    for case in &cases {
        log::info!("{}: {} repetitions", case.label, preset.repetitions);
        let m = ProblemSpec::square(case.n, case.rank, case.oversampling, 0).m;
        let mut runs = map_collect(Execution::default(), preset.repetitions, |i| {
            let seed = preset.seed + i as u64;
            outcome(seed, run_instance(case, seed))
        });
        if preset.name == PresetName::RankTrajectory && results.trace.is_empty() {
            results.trace = std::mem::take(&mut runs[0].1);
        }
        let runs = runs.into_iter().map(|(o, _)| o).collect();
        results.rows.push(BenchRow::from_runs(preset.name, case, m, runs));
    }
    Ok(results)
}

/// Solves one instance at `tau = f n` for every factor in [`TAU_FACTORS`].
pub fn tau_sweep(n: usize, rank: usize, oversampling: f64, seed: u64) -> Result<Vec<TauSweepRow>> {
    let p = generate(&ProblemSpec::square(n, rank, oversampling, seed))?;
    let mut rows: Vec<TauSweepRow> = Vec::new();
    let mut prev: Option<SolveReport> = None;
    for f in TAU_FACTORS {
        let tau = f * n as f64;
        let cfg = SvtConfig::new(tau, TAU_SWEEP_DELTA)
            .with_eps(TAU_SWEEP_EPS)
            .with_k_max(TAU_SWEEP_K_MAX);
        let rep = svt_complete(&p.obs, &cfg)?;
        let nuc = rep.x.nuclear_norm();
        let (distance, change) = match &prev {
            Some(q) => (
                Some(rep.x.distance(&q.x)?),
                Some((nuc - q.x.nuclear_norm()).abs() / nuc.max(f64::MIN_POSITIVE)),
            ),
            None => (None, None),
        };
        log::info!("tau = {tau}: {:?} after {} iterations", rep.status, rep.iterations);
        rows.push(TauSweepRow {
            tau,
            tau_factor: f,
            status: rep.status,
            iterations: rep.iterations,
            rank: rep.final_rank(),
            nuclear_norm: nuc,
            distance_to_previous: distance,
            nuclear_change: change,
            relative_error: relative_error(&rep.x, &p.m_true)?,
        });
        prev = Some(rep);
    }
    Ok(rows)
}

impl BenchResults {
    pub fn results_csv(&self) -> String {
        let mut s = String::from(RESULTS_CSV_HEADER);
        s.push('\n');
        for row in &self.rows {
            s.push_str(&row.csv_line());
            s.push('\n');
        }
        s
    }

    pub fn tau_sweep_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        let mut s = String::from(TAU_SWEEP_CSV_HEADER);
        s.push('\n');
        for r in &self.tau_sweep {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{:e},{},{},{:e}",
                r.tau,
                r.tau_factor,
                status_name(Some(r.status)),
                r.iterations,
                r.rank,
                r.nuclear_norm,
                opt(r.distance_to_previous),
                opt(r.nuclear_change),
                r.relative_error
            );
        }
        s
    }

    /// Plain-text table for the terminal.
    pub fn render_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "preset {} (scale {}, {} repetitions, seed {})",
            self.preset, self.scale, self.repetitions, self.seed
        );
        if !self.rows.is_empty() {
            let _ = writeln!(
                s,
                "{:<28} {:>6} {:>4} {:>6} {:>9} {:>8} {:>10} {:>10} {:>6} {:>10} {:>10}",
                "label", "n", "r", "m/n^2", "conv", "time(s)", "iters", "rel.err", "rank", "ref it", "ref err"
            );
            for r in &self.rows {
                let (pi, pe) = match r.reference {
                    Some(p) => (format!("{}", p.iterations), format!("{:.2e}", p.relative_error)),
                    None => ("-".into(), "-".into()),
                };
                let _ = writeln!(
                    s,
                    "{:<28} {:>6} {:>4} {:>6.3} {:>9} {:>8.1} {:>10.1} {:>10.3e} {:>6.1} {:>10} {:>10}",
                    r.label,
                    r.n,
                    r.rank,
                    r.sampling_ratio,
                    format!("{}/{}", r.converged, r.repetitions),
                    r.mean_seconds,
                    r.mean_iterations,
                    r.mean_relative_error,
                    r.mean_final_rank,
                    pi,
                    pe
                );
                for run in r.runs.iter().filter(|run| run.error.is_some()) {
                    let _ = writeln!(
                        s,
                        "  seed {}: {} {}",
                        run.seed,
                        status_name(run.status),
                        run.error.as_deref().unwrap_or("")
                    );
                }
            }
        }
        if !self.tau_sweep.is_empty() {
            let _ = writeln!(
                s,
                "{:>8} {:>12} {:>6} {:>5} {:>16} {:>12} {:>12} {:>10}",
                "tau", "status", "iters", "rank", "nuclear", "dist prev", "nuc change", "rel.err"
            );
            for r in &self.tau_sweep {
                let opt = |v: Option<f64>| v.map(|x| format!("{x:.3e}")).unwrap_or_else(|| "-".into());
                let _ = writeln!(
                    s,
                    "{:>8} {:>12} {:>6} {:>5} {:>16.10} {:>12} {:>12} {:>10.3e}",
                    r.tau,
                    status_name(Some(r.status)),
                    r.iterations,
                    r.rank,
                    r.nuclear_norm,
                    opt(r.distance_to_previous),
                    opt(r.nuclear_change),
                    r.relative_error
                );
            }
        }
        s
    }

    /// Writes `results.csv`, `results.json`, `table.txt`, and `tau_sweep.csv`
    /// or `trace.csv` when the preset produces them.
    pub fn write_outputs(&self, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| SvtError::io(dir, e))?;
        let mut written = Vec::new();
        let mut put = |name: &str, body: String| -> Result<()> {
            let path = dir.join(name);
            fs::write(&path, body).map_err(|e| SvtError::io(&path, e))?;
            written.push(path);
            Ok(())
        };
        put("results.csv", self.results_csv())?;
        put("table.txt", self.render_table())?;
        if !self.tau_sweep.is_empty() {
            put("tau_sweep.csv", self.tau_sweep_csv())?;
        }
        if !self.trace.is_empty() {
            let mut buf = Vec::new();
            write_trace(&mut buf, &self.trace).map_err(|e| SvtError::io(dir.join("trace.csv"), e))?;
            put("trace.csv", String::from_utf8_lossy(&buf).into_owned())?;
        }
        let json = dir.join("results.json");
        write_json(&json, self)?;
        written.push(json);
        Ok(written)
    }
}

fn status_name(status: Option<SolveStatus>) -> &'static str {
    match status {
        Some(SolveStatus::Converged) => "converged",
        Some(SolveStatus::MaxIters) => "max_iters",
        Some(SolveStatus::NumericalFailure) => "numerical_failure",
        Some(SolveStatus::Diverged) => "diverged",
        None => "error",
    }
}
