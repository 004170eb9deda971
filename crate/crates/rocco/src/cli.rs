//! Command-line surface: dataset generation, fitting, benchmark sweeps and
//! scoring. All commands are deterministic given their flags and seeds;
//! wall-clock timings are isolated in dedicated columns so the payload part
//! of every CSV is byte-stable across reruns.

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::assign::{co_cluster_assign, AssignConfig, AssignMethod, CoClustering};
use crate::graph::{attach_small_components, build_mutual_knn, Metric};
use crate::io::{
    load_labels_csv, load_matrix, save_labels_csv, save_matrix_csv, save_pgm, MatrixFormat,
};
use crate::metrics::{ami, ari, nmi};
use crate::optimize::{fit_prebuilt, FitConfig, FitOutcome};
use crate::synth::{make_biclusters, SynthParams};
use crate::{DataMatrix, Error, MatrixAxis, Result};

#[derive(Parser, Debug)]
#[command(
    name = "rocco",
    about = "Robust continuous co-clustering: fit, benchmark and score",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate synthetic bicluster datasets over a (noise, seed) grid.
    Generate(GenerateArgs),
    /// Fit one dataset and write labels, a run record and optional heatmap.
    Fit(FitArgs),
    /// Noise robustness sweep: generate, fit and score per (noise, seed).
    BenchNoise(BenchNoiseArgs),
    /// Scaling benchmark: per-stage wall times over a sample-size grid.
    BenchScale(BenchScaleArgs),
    /// Hyperparameter sensitivity sweep over k and the distance metric.
    Sensitivity(SensitivityArgs),
    /// Score a label file against a truth file (NMI/AMI/ARI).
    Score(ScoreArgs),
}

pub fn run(command: &Command) -> Result<()> {
    match command {
        Command::Generate(a) => cmd_generate(a),
        Command::Fit(a) => cmd_fit(a).map(|_| ()),
        Command::BenchNoise(a) => cmd_bench_noise(a).map(|_| ()),
        Command::BenchScale(a) => cmd_bench_scale(a).map(|_| ()),
        Command::Sensitivity(a) => cmd_sensitivity(a).map(|_| ()),
        Command::Score(a) => cmd_score(a),
    }
}

// ---------------------------------------------------------------------------
// grids

/// Parse "5", "1,2,3", "0..29" or "10..50:10" (both range forms inclusive).
pub fn parse_u64_grid(s: &str) -> Result<Vec<u64>> {
    let bad = |m: &str| Error::Parameter(format!("grid {s:?}: {m}"));
    if let Some((range, step)) = split_range(s) {
        let (lo, hi) = range;
        let step = step.unwrap_or(1);
        if step == 0 {
            return Err(bad("step must be positive"));
        }
        let (lo, hi) = (
            lo.parse::<u64>().map_err(|_| bad("bad range start"))?,
            hi.parse::<u64>().map_err(|_| bad("bad range end"))?,
        );
        let step = step;
        if hi < lo {
            return Err(bad("range end below start"));
        }
        return Ok((lo..=hi).step_by(step as usize).collect());
    }
    s.split(',')
        .map(|t| t.trim().parse::<u64>().map_err(|_| bad("bad value")))
        .collect()
}

/// Same grammar as [`parse_u64_grid`] with real-valued entries.
pub fn parse_f64_grid(s: &str) -> Result<Vec<f64>> {
    let bad = |m: &str| Error::Parameter(format!("grid {s:?}: {m}"));
    if let Some(((lo, hi), step)) = split_range_raw(s) {
        let lo: f64 = lo.parse().map_err(|_| bad("bad range start"))?;
        let hi: f64 = hi.parse().map_err(|_| bad("bad range end"))?;
        let step: f64 = match step {
            Some(t) => t.parse().map_err(|_| bad("bad step"))?,
            None => 1.0,
        };
        if step <= 0.0 {
            return Err(bad("step must be positive"));
        }
        let mut out = Vec::new();
        let mut v = lo;
        while v <= hi + 1e-9 * step {
            out.push(v);
            v += step;
        }
        return Ok(out);
    }
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| bad("bad value")))
        .collect()
}

fn split_range(s: &str) -> Option<((String, String), Option<u64>)> {
    let ((lo, hi), step) = split_range_raw(s)?;
    let step = match step {
        Some(t) => Some(t.parse().ok()?),
        None => None,
    };
    Some(((lo, hi), step))
}

fn split_range_raw(s: &str) -> Option<((String, String), Option<String>)> {
    let (range, step) = match s.split_once(':') {
        Some((r, st)) => (r, Some(st.trim().to_string())),
        None => (s, None),
    };
    let (lo, hi) = range.split_once("..")?;
    Some(((lo.trim().to_string(), hi.trim().to_string()), step))
}

// ---------------------------------------------------------------------------
// shared flags and records

#[derive(Args, Debug, Clone)]
pub struct CommonFitArgs {
    /// Neighbor count for the mutual k-NN graphs.
    #[arg(long, default_value_t = 10)]
    pub k: usize,

    /// Distance metric: euclidean, manhattan or cosine.
    #[arg(long, default_value = "euclidean")]
    pub metric: Metric,

    /// Seed for the k-means assignment branch.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Maximum outer iterations of the alternating optimizer.
    #[arg(long = "max-iters", default_value_t = 100)]
    pub max_iters: usize,

    /// Relative-change convergence tolerance on U.
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,

    /// Sparsity fraction above which assignment switches to k-means.
    #[arg(long = "sparsity-threshold", default_value_t = 0.5)]
    pub sparsity_threshold: f64,

    /// Scale factor on the mean assignment-graph edge distance for the
    /// component cut.
    #[arg(long = "tau-scale", default_value_t = 0.14)]
    pub tau_scale: f64,
}

impl CommonFitArgs {
    pub fn fit_config(&self) -> FitConfig {
        FitConfig {
            k: self.k,
            metric: self.metric,
            max_outer_iterations: self.max_iters,
            convergence_tol: self.tol,
            ..FitConfig::default()
        }
    }

    pub fn assign_config(&self) -> AssignConfig {
        let defaults = AssignConfig::default();
        AssignConfig {
            sparsity_threshold: self.sparsity_threshold,
            tau_scale: self.tau_scale,
            kmeans_seed: self.seed,
            // Inner fits keep the assignment-specific mu floor rather than
            // inheriting the main fit's deeper schedule.
            fit: FitConfig {
                mu_floor_divisor: defaults.fit.mu_floor_divisor,
                ..self.fit_config()
            },
            ..defaults
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct StageTimes {
    pub graph_seconds: f64,
    pub representation_seconds: f64,
    pub assignment_seconds: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct LabelMetrics {
    pub nmi: f64,
    pub ami: f64,
    pub ari: f64,
}

fn score_labels(labels: &[usize], truth: &[usize]) -> Result<LabelMetrics> {
    Ok(LabelMetrics {
        nmi: nmi(labels, truth)?,
        ami: ami(labels, truth)?,
        ari: ari(labels, truth)?,
    })
}

/// One full pipeline run: everything a reader needs to audit the fit.
#[derive(Debug, Serialize)]
pub struct RunRecord {
    pub input: Option<String>,
    pub fit_config: FitConfig,
    pub assign_config: AssignConfig,
    pub stage_seconds: StageTimes,
    pub method_used: AssignMethod,
    pub row_clusters: usize,
    pub col_clusters: usize,
    pub row_metrics: Option<LabelMetrics>,
    pub col_metrics: Option<LabelMetrics>,
    pub outer_iterations: usize,
    pub converged: bool,
    pub objective_trace: Vec<f64>,
    pub solver_residuals: Vec<f64>,
    pub warnings: Vec<String>,
}

pub struct PipelineOutput {
    pub outcome: FitOutcome,
    pub clustering: CoClustering,
    pub times: StageTimes,
}

/// Graph construction, representation learning and assignment, individually
/// timed (the three stages of the runtime breakdown).
pub fn run_pipeline(
    x: &DataMatrix,
    fit_cfg: &FitConfig,
    assign_cfg: &AssignConfig,
) -> Result<PipelineOutput> {
    let t0 = Instant::now();
    let (mut g_rows, row_clamped) =
        build_mutual_knn(x, fit_cfg.k, fit_cfg.metric, MatrixAxis::Rows)?;
    let (mut g_cols, col_clamped) =
        build_mutual_knn(x, fit_cfg.k, fit_cfg.metric, MatrixAxis::Columns)?;
    attach_small_components(x, MatrixAxis::Rows, &mut g_rows, fit_cfg.metric, fit_cfg.k)?;
    attach_small_components(x, MatrixAxis::Columns, &mut g_cols, fit_cfg.metric, fit_cfg.k)?;
    let graph_seconds = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let mut outcome = fit_prebuilt(x, &g_rows, &g_cols, fit_cfg)?;
    if row_clamped {
        outcome
            .report
            .warnings
            .push(format!("k clamped to {} for the row graph", x.nrows() - 1));
    }
    if col_clamped {
        outcome.report.warnings.push(format!(
            "k clamped to {} for the column graph",
            x.ncols() - 1
        ));
    }
    let representation_seconds = t1.elapsed().as_secs_f64();

    let t2 = Instant::now();
    let clustering = co_cluster_assign(x, &outcome.u, assign_cfg)?;
    let assignment_seconds = t2.elapsed().as_secs_f64();

    Ok(PipelineOutput {
        outcome,
        clustering,
        times: StageTimes {
            graph_seconds,
            representation_seconds,
            assignment_seconds,
        },
    })
}

fn cluster_count(labels: &[usize]) -> usize {
    labels.iter().max().map_or(0, |&m| m + 1)
}

fn build_record(
    input: Option<String>,
    fit_cfg: &FitConfig,
    assign_cfg: &AssignConfig,
    out: &PipelineOutput,
    truth_rows: Option<&[usize]>,
    truth_cols: Option<&[usize]>,
) -> Result<RunRecord> {
    let row_metrics = truth_rows
        .map(|t| score_labels(&out.clustering.row_labels, t))
        .transpose()?;
    let col_metrics = truth_cols
        .map(|t| score_labels(&out.clustering.col_labels, t))
        .transpose()?;
    let mut warnings = out.outcome.report.warnings.clone();
    warnings.extend(out.clustering.warnings.clone());
    Ok(RunRecord {
        input,
        fit_config: fit_cfg.clone(),
        assign_config: assign_cfg.clone(),
        stage_seconds: out.times,
        method_used: out.clustering.method_used,
        row_clusters: cluster_count(&out.clustering.row_labels),
        col_clusters: cluster_count(&out.clustering.col_labels),
        row_metrics,
        col_metrics,
        outer_iterations: out.outcome.report.outer_iterations,
        converged: out.outcome.report.converged,
        objective_trace: out.outcome.state.objective_trace.clone(),
        solver_residuals: out
            .outcome
            .report
            .solve_reports
            .iter()
            .map(|r| r.final_relative_residual)
            .collect(),
        warnings,
    })
}

fn ensure_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path)
        .map_err(|e| Error::io(format!("creating directory {}", path.display()), e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => write_text(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn fmt_noise(v: f64) -> String {
    if v.fract() == 0.0 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

// ---------------------------------------------------------------------------
// generate

#[derive(Args, Debug)]
pub struct GenerateArgs {
    /// Sample count.
    #[arg(long, default_value_t = 100)]
    pub n: usize,

    /// Feature count.
    #[arg(long, default_value_t = 100)]
    pub p: usize,

    /// Number of implanted co-clusters.
    #[arg(long = "k-clusters", default_value_t = 5)]
    pub k_clusters: usize,

    /// Noise grid, e.g. "10..50:10" or "25".
    #[arg(long, default_value = "10..50:10")]
    pub noise: String,

    /// Seed grid, e.g. "0..29".
    #[arg(long, default_value = "0..29")]
    pub seeds: String,

    /// Background / minimum block value.
    #[arg(long, default_value_t = 10.0)]
    pub minval: f64,

    /// Maximum block value.
    #[arg(long, default_value_t = 100.0)]
    pub maxval: f64,

    #[arg(long = "out-dir")]
    pub out_dir: PathBuf,
}

pub fn cmd_generate(args: &GenerateArgs) -> Result<()> {
    let noises = parse_f64_grid(&args.noise)?;
    let seeds = parse_u64_grid(&args.seeds)?;
    ensure_dir(&args.out_dir)?;
    for &noise in &noises {
        for &seed in &seeds {
            let params = SynthParams {
                n: args.n,
                p: args.p,
                n_clusters: args.k_clusters,
                noise,
                seed,
                minval: args.minval,
                maxval: args.maxval,
            };
            let ds = make_biclusters(&params)?;
            let dir = args
                .out_dir
                .join(format!("noise{}_seed{}", fmt_noise(noise), seed));
            ensure_dir(&dir)?;
            save_matrix_csv(&dir.join("X.csv"), &ds.x)?;
            save_labels_csv(&dir.join("row_labels.csv"), &ds.true_row_labels)?;
            save_labels_csv(&dir.join("col_labels.csv"), &ds.true_col_labels)?;
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// fit

#[derive(Args, Debug)]
pub struct FitArgs {
    /// Input matrix (.csv, or .mtx/.mm for Matrix Market).
    #[arg(long)]
    pub input: PathBuf,

    /// True row labels (optional; enables row metrics).
    #[arg(long = "truth-rows")]
    pub truth_rows: Option<PathBuf>,

    /// True column labels (optional; enables column metrics).
    #[arg(long = "truth-cols")]
    pub truth_cols: Option<PathBuf>,

    #[arg(long = "out-dir", default_value = ".")]
    pub out_dir: PathBuf,

    /// Also write the cluster-reordered representation as a P5 PGM heatmap.
    #[arg(long)]
    pub heatmap: bool,

    #[command(flatten)]
    pub common: CommonFitArgs,
}

/// Stable permutation grouping indices by label.
fn cluster_permutation(labels: &[usize]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..labels.len()).collect();
    idx.sort_by_key(|&i| (labels[i], i));
    idx
}

pub fn cmd_fit(args: &FitArgs) -> Result<RunRecord> {
    let x = load_matrix(&args.input, MatrixFormat::from_path(&args.input))?;
    let truth_rows = args
        .truth_rows
        .as_deref()
        .map(load_labels_csv)
        .transpose()?;
    let truth_cols = args
        .truth_cols
        .as_deref()
        .map(load_labels_csv)
        .transpose()?;
    let fit_cfg = args.common.fit_config();
    let assign_cfg = args.common.assign_config();
    let out = run_pipeline(&x, &fit_cfg, &assign_cfg)?;

    ensure_dir(&args.out_dir)?;
    save_labels_csv(
        &args.out_dir.join("row_labels.csv"),
        &out.clustering.row_labels,
    )?;
    save_labels_csv(
        &args.out_dir.join("col_labels.csv"),
        &out.clustering.col_labels,
    )?;

    if args.heatmap {
        let rp = cluster_permutation(&out.clustering.row_labels);
        let cp = cluster_permutation(&out.clustering.col_labels);
        let reordered =
            DataMatrix::from_shape_fn(out.outcome.u.raw_dim(), |(i, j)| {
                out.outcome.u[[rp[i], cp[j]]]
            });
        save_pgm(&args.out_dir.join("heatmap.pgm"), &reordered)?;
        save_labels_csv(&args.out_dir.join("row_permutation.csv"), &rp)?;
        save_labels_csv(&args.out_dir.join("col_permutation.csv"), &cp)?;
    }

    let record = build_record(
        Some(args.input.display().to_string()),
        &fit_cfg,
        &assign_cfg,
        &out,
        truth_rows.as_deref(),
        truth_cols.as_deref(),
    )?;
    let json = serde_json::to_string_pretty(&record)
        .map_err(|e| Error::Numerical(format!("serializing run record: {e}")))?;
    write_text(&args.out_dir.join("run_record.json"), &json)?;
    Ok(record)
}

// ---------------------------------------------------------------------------
// bench-noise

#[derive(Args, Debug)]
pub struct BenchNoiseArgs {
    #[arg(long, default_value_t = 100)]
    pub n: usize,

    #[arg(long, default_value_t = 100)]
    pub p: usize,

    #[arg(long = "k-clusters", default_value_t = 5)]
    pub k_clusters: usize,

    #[arg(long, default_value = "10..50:10")]
    pub noise: String,

    #[arg(long, default_value = "0..29")]
    pub seeds: String,

    /// Output CSV path (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,

    #[command(flatten)]
    pub common: CommonFitArgs,
}

#[derive(Debug, Clone)]
pub struct NoiseRow {
    pub noise: f64,
    pub seed: u64,
    pub ok: bool,
    pub row_metrics: Option<LabelMetrics>,
    pub col_metrics: Option<LabelMetrics>,
    pub elapsed_seconds: f64,
}

pub fn cmd_bench_noise(args: &BenchNoiseArgs) -> Result<Vec<NoiseRow>> {
    let noises = parse_f64_grid(&args.noise)?;
    let seeds = parse_u64_grid(&args.seeds)?;
    let fit_cfg = args.common.fit_config();
    let assign_cfg = args.common.assign_config();

    let mut rows = Vec::new();
    for &noise in &noises {
        for &seed in &seeds {
            let started = Instant::now();
            let run = (|| -> Result<(LabelMetrics, LabelMetrics)> {
                let ds = make_biclusters(&SynthParams {
                    n: args.n,
                    p: args.p,
                    n_clusters: args.k_clusters,
                    noise,
                    seed,
                    minval: 10.0,
                    maxval: 100.0,
                })?;
                let out = run_pipeline(&ds.x, &fit_cfg, &assign_cfg)?;
                Ok((
                    score_labels(&out.clustering.row_labels, &ds.true_row_labels)?,
                    score_labels(&out.clustering.col_labels, &ds.true_col_labels)?,
                ))
            })();
            let elapsed = started.elapsed().as_secs_f64();
            match run {
                Ok((rm, cm)) => rows.push(NoiseRow {
                    noise,
                    seed,
                    ok: true,
                    row_metrics: Some(rm),
                    col_metrics: Some(cm),
                    elapsed_seconds: elapsed,
                }),
                Err(_) => rows.push(NoiseRow {
                    noise,
                    seed,
                    ok: false,
                    row_metrics: None,
                    col_metrics: None,
                    elapsed_seconds: elapsed,
                }),
            }
        }
    }
    rows.sort_by(|a, b| {
        a.noise
            .partial_cmp(&b.noise)
            .unwrap()
            .then(a.seed.cmp(&b.seed))
    });

    let mut csv = String::from(
        "noise,seed,status,ari_rows,ari_cols,nmi_rows,nmi_cols,ami_rows,ami_cols,elapsed_seconds\n",
    );
    for r in &rows {
        if let (Some(rm), Some(cm)) = (&r.row_metrics, &r.col_metrics) {
            csv.push_str(&format!(
                "{},{},ok,{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.3}\n",
                fmt_noise(r.noise),
                r.seed,
                rm.ari,
                cm.ari,
                rm.nmi,
                cm.nmi,
                rm.ami,
                cm.ami,
                r.elapsed_seconds
            ));
        } else {
            csv.push_str(&format!(
                "{},{},error,,,,,,,{:.3}\n",
                fmt_noise(r.noise),
                r.seed,
                r.elapsed_seconds
            ));
        }
    }
    for &noise in &noises {
        let ok: Vec<&NoiseRow> = rows
            .iter()
            .filter(|r| r.noise == noise && r.ok)
            .collect();
        if ok.is_empty() {
            continue;
        }
        let m = ok.len() as f64;
        let mean = |f: &dyn Fn(&NoiseRow) -> f64| ok.iter().map(|r| f(r)).sum::<f64>() / m;
        csv.push_str(&format!(
            "{},mean,ok,{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.3}\n",
            fmt_noise(noise),
            mean(&|r| r.row_metrics.unwrap().ari),
            mean(&|r| r.col_metrics.unwrap().ari),
            mean(&|r| r.row_metrics.unwrap().nmi),
            mean(&|r| r.col_metrics.unwrap().nmi),
            mean(&|r| r.row_metrics.unwrap().ami),
            mean(&|r| r.col_metrics.unwrap().ami),
            mean(&|r| r.elapsed_seconds),
        ));
    }
    emit(args.out.as_deref(), &csv)?;
    Ok(rows)
}

// ---------------------------------------------------------------------------
// bench-scale

#[derive(Args, Debug)]
pub struct BenchScaleArgs {
    /// Sample-size grid, e.g. "1000,2000,4000,8000,16000".
    #[arg(long, default_value = "1000,2000,4000,8000,16000")]
    pub sizes: String,

    #[arg(long, default_value_t = 100)]
    pub p: usize,

    #[arg(long = "k-clusters", default_value_t = 5)]
    pub k_clusters: usize,

    #[arg(long, default_value_t = 10.0)]
    pub noise: f64,

    /// Repetitions per size (dataset seed = repetition index).
    #[arg(long, default_value_t = 3)]
    pub reps: usize,

    #[arg(long)]
    pub out: Option<PathBuf>,

    #[command(flatten)]
    pub common: CommonFitArgs,
}

#[derive(Debug, Clone, Copy)]
pub struct ScaleRow {
    pub n: usize,
    pub rep: usize,
    pub times: StageTimes,
}

pub struct ScaleSummary {
    pub rows: Vec<ScaleRow>,
    /// Log-log least-squares slope of mean representation time vs n.
    pub representation_slope: f64,
}

pub fn cmd_bench_scale(args: &BenchScaleArgs) -> Result<ScaleSummary> {
    let sizes: Vec<usize> = parse_u64_grid(&args.sizes)?
        .into_iter()
        .map(|v| v as usize)
        .collect();
    if sizes.is_empty() || args.reps == 0 {
        return Err(Error::Parameter("bench-scale: empty grid".into()));
    }
    let fit_cfg = args.common.fit_config();
    let assign_cfg = args.common.assign_config();

    let mut rows = Vec::new();
    for &n in &sizes {
        for rep in 0..args.reps {
            let ds = make_biclusters(&SynthParams {
                n,
                p: args.p,
                n_clusters: args.k_clusters,
                noise: args.noise,
                seed: rep as u64,
                minval: 10.0,
                maxval: 100.0,
            })?;
            let out = run_pipeline(&ds.x, &fit_cfg, &assign_cfg)?;
            rows.push(ScaleRow {
                n,
                rep,
                times: out.times,
            });
        }
    }

    let mut csv = String::from(
        "record,n,rep,graph_seconds,representation_seconds,assignment_seconds,total_seconds\n",
    );
    let total =
        |t: &StageTimes| t.graph_seconds + t.representation_seconds + t.assignment_seconds;
    for r in &rows {
        csv.push_str(&format!(
            "run,{},{},{:.4},{:.4},{:.4},{:.4}\n",
            r.n,
            r.rep,
            r.times.graph_seconds,
            r.times.representation_seconds,
            r.times.assignment_seconds,
            total(&r.times)
        ));
    }

    let mut mean_repr = Vec::new();
    for &n in &sizes {
        let group: Vec<&ScaleRow> = rows.iter().filter(|r| r.n == n).collect();
        let m = group.len() as f64;
        let mg = group.iter().map(|r| r.times.graph_seconds).sum::<f64>() / m;
        let mr = group
            .iter()
            .map(|r| r.times.representation_seconds)
            .sum::<f64>()
            / m;
        let ma = group
            .iter()
            .map(|r| r.times.assignment_seconds)
            .sum::<f64>()
            / m;
        let var_total = {
            let totals: Vec<f64> = group.iter().map(|r| total(&r.times)).collect();
            let mean = totals.iter().sum::<f64>() / m;
            totals.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / m
        };
        csv.push_str(&format!(
            "mean,{n},,{mg:.4},{mr:.4},{ma:.4},{:.4}\n",
            mg + mr + ma
        ));
        csv.push_str(&format!("variance_total,{n},,,,,{var_total:.6}\n"));
        mean_repr.push((n as f64, mr));
    }

    let representation_slope = log_log_slope(&mean_repr);
    csv.push_str(&format!(
        "slope,,,,{representation_slope:.4},,\n"
    ));
    emit(args.out.as_deref(), &csv)?;
    Ok(ScaleSummary {
        rows,
        representation_slope,
    })
}

/// Least-squares slope of ln(y) against ln(x).
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|&&(x, y)| x > 0.0 && y > 0.0)
        .map(|&(x, y)| (x.ln(), y.ln()))
        .collect();
    let m = pts.len() as f64;
    if pts.len() < 2 {
        return 0.0;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let cov: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let var: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    cov / var
}

// ---------------------------------------------------------------------------
// sensitivity

#[derive(Args, Debug)]
pub struct SensitivityArgs {
    #[arg(long)]
    pub input: PathBuf,

    #[arg(long = "truth-rows")]
    pub truth_rows: PathBuf,

    #[arg(long = "truth-cols")]
    pub truth_cols: PathBuf,

    /// Grid of neighbor counts.
    #[arg(long = "k-grid", default_value = "7..13")]
    pub k_grid: String,

    /// Reference k for the across-metric variance row.
    #[arg(long = "base-k", default_value_t = 10)]
    pub base_k: usize,

    #[arg(long)]
    pub out: Option<PathBuf>,

    #[command(flatten)]
    pub common: CommonFitArgs,
}

#[derive(Debug, Clone)]
pub struct SensitivityRow {
    pub k: usize,
    pub metric: Metric,
    pub ok: bool,
    pub row_metrics: Option<LabelMetrics>,
    pub col_metrics: Option<LabelMetrics>,
}

pub struct SensitivitySummary {
    pub rows: Vec<SensitivityRow>,
    /// Variance of row ARI across the three metrics at base k.
    pub ari_variance_across_metrics: f64,
}

pub fn cmd_sensitivity(args: &SensitivityArgs) -> Result<SensitivitySummary> {
    let x = load_matrix(&args.input, MatrixFormat::from_path(&args.input))?;
    let truth_rows = load_labels_csv(&args.truth_rows)?;
    let truth_cols = load_labels_csv(&args.truth_cols)?;
    let ks: Vec<usize> = parse_u64_grid(&args.k_grid)?
        .into_iter()
        .map(|v| v as usize)
        .collect();

    let mut rows = Vec::new();
    for &k in &ks {
        for metric in Metric::ALL {
            let mut fit_cfg = args.common.fit_config();
            fit_cfg.k = k;
            fit_cfg.metric = metric;
            let mut assign_cfg = args.common.assign_config();
            assign_cfg.fit = fit_cfg.clone();
            let run = run_pipeline(&x, &fit_cfg, &assign_cfg).and_then(|out| {
                Ok((
                    score_labels(&out.clustering.row_labels, &truth_rows)?,
                    score_labels(&out.clustering.col_labels, &truth_cols)?,
                ))
            });
            match run {
                Ok((rm, cm)) => rows.push(SensitivityRow {
                    k,
                    metric,
                    ok: true,
                    row_metrics: Some(rm),
                    col_metrics: Some(cm),
                }),
                Err(_) => rows.push(SensitivityRow {
                    k,
                    metric,
                    ok: false,
                    row_metrics: None,
                    col_metrics: None,
                }),
            }
        }
    }

    let base: Vec<f64> = rows
        .iter()
        .filter(|r| r.k == args.base_k && r.ok)
        .map(|r| r.row_metrics.unwrap().ari)
        .collect();
    let ari_variance_across_metrics = if base.len() >= 2 {
        let m = base.iter().sum::<f64>() / base.len() as f64;
        base.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / base.len() as f64
    } else {
        0.0
    };

    let mut csv =
        String::from("k,metric,status,ari_rows,ari_cols,nmi_rows,nmi_cols,ami_rows,ami_cols\n");
    for r in &rows {
        if let (Some(rm), Some(cm)) = (&r.row_metrics, &r.col_metrics) {
            csv.push_str(&format!(
                "{},{},ok,{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
                r.k,
                r.metric.name(),
                rm.ari,
                cm.ari,
                rm.nmi,
                cm.nmi,
                rm.ami,
                cm.ami
            ));
        } else {
            csv.push_str(&format!("{},{},error,,,,,,\n", r.k, r.metric.name()));
        }
    }
    csv.push_str(&format!(
        "{},variance_across_metrics,ok,{:.2e},,,,,\n",
        args.base_k, ari_variance_across_metrics
    ));
    emit(args.out.as_deref(), &csv)?;
    Ok(SensitivitySummary {
        rows,
        ari_variance_across_metrics,
    })
}

// ---------------------------------------------------------------------------
// score

#[derive(Args, Debug)]
pub struct ScoreArgs {
    /// Predicted labels, one per line.
    #[arg(long)]
    pub labels: PathBuf,

    /// True labels, one per line.
    #[arg(long)]
    pub truth: PathBuf,
}

pub fn cmd_score(args: &ScoreArgs) -> Result<()> {
    let labels = load_labels_csv(&args.labels)?;
    let truth = load_labels_csv(&args.truth)?;
    let m = score_labels(&labels, &truth)?;
    let json = serde_json::to_string_pretty(&m)
        .map_err(|e| Error::Numerical(format!("serializing metrics: {e}")))?;
    println!("{json}");
    Ok(())
}
