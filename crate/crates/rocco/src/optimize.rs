//! The alternating optimizer behind the co-clustering representation.
//!
//! The robust penalty rho(y) = mu y^2 / (mu + y^2) admits a half-quadratic
//! dual with per-edge line-process weights L in (0, 1]. With U fixed the
//! optimal L has a closed form; with L fixed the optimal U solves the
//! Sylvester system AU + UB = 2X. The non-convexity parameter mu is annealed
//! by halving every few iterations (graduated non-convexity), starting from a
//! value large enough that the objective is locally convex.

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::graph::{attach_small_components, build_mutual_knn, Metric, MutualKnnGraph};
use crate::solver::{assemble_sdd, solve_left, solve_right, solve_sylvester, SolveReport};
use crate::{DataMatrix, Error, MatrixAxis, Result};

/// Per-edge auxiliary weights, aligned with a graph's edge list.
/// Every weight lies in (0, 1]; a weight near 0 marks an edge as spurious.
#[derive(Debug, Clone)]
pub struct LineProcess {
    pub weights: Vec<f64>,
}

impl LineProcess {
    pub fn ones(len: usize) -> Self {
        LineProcess {
            weights: vec![1.0; len],
        }
    }
}

/// Geman-McClure penalty: mu y^2 / (mu + y^2). Monotone in y, bounded by mu.
pub fn geman_mcclure(y: f64, mu: f64) -> f64 {
    debug_assert!(y >= 0.0 && mu > 0.0);
    mu * y * y / (mu + y * y)
}

/// Dual penalty on the line process: mu (sqrt(z) - 1)^2. Zero at z = 1.
pub fn psi(z: f64, mu: f64) -> f64 {
    debug_assert!(z >= 0.0 && mu > 0.0);
    let s = z.sqrt() - 1.0;
    mu * s * s
}

/// Squared Euclidean distances between edge-endpoint representations.
/// Representation distances always use the L2 norm regardless of the metric
/// used to build the graph.
fn edge_sq_dists(u: &DataMatrix, g: &MutualKnnGraph, axis: MatrixAxis) -> Vec<f64> {
    match axis {
        MatrixAxis::Rows => g
            .edges
            .iter()
            .map(|e| {
                let d = &u.row(e.i) - &u.row(e.j);
                d.dot(&d)
            })
            .collect(),
        MatrixAxis::Columns => g
            .edges
            .iter()
            .map(|e| {
                let d: Array1<f64> = &u.column(e.i) - &u.column(e.j);
                d.dot(&d)
            })
            .collect(),
    }
}

/// Closed-form line-process update: weight = (mu / (mu + d^2))^2 per edge.
pub fn update_line_process(
    u: &DataMatrix,
    g: &MutualKnnGraph,
    mu: f64,
    axis: MatrixAxis,
) -> LineProcess {
    let weights = edge_sq_dists(u, g, axis)
        .into_iter()
        .map(|d2| {
            let w = mu / (mu + d2);
            w * w
        })
        .collect();
    LineProcess { weights }
}

/// Optimizer configuration. Defaults follow the benchmark protocol:
/// mutual k-NN with k = 10 under Euclidean distance, mu halved every 4
/// iterations down to 1/1024 of its initial value.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitConfig {
    pub k: usize,
    pub metric: Metric,
    pub max_outer_iterations: usize,
    /// Relative Frobenius change of U below which the fit stops (evaluated
    /// only once the mu schedule has reached its floor).
    pub convergence_tol: f64,
    pub mu_halving_period: usize,
    /// mu starts at this factor times the largest squared edge distance.
    pub mu_init_factor: f64,
    /// mu never drops below mu_init / mu_floor_divisor.
    pub mu_floor_divisor: f64,
    pub solver_tol: f64,
    /// Defaults to 10 * (n + p) when unset.
    pub solver_max_iter: Option<usize>,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            k: 10,
            metric: Metric::Euclidean,
            max_outer_iterations: 100,
            convergence_tol: 1e-4,
            mu_halving_period: 4,
            mu_init_factor: 3.0,
            mu_floor_divisor: 1024.0,
            solver_tol: 1e-6,
            solver_max_iter: None,
        }
    }
}

impl FitConfig {
    fn validate(&self) -> Result<()> {
        if self.k == 0
            || self.max_outer_iterations == 0
            || self.convergence_tol <= 0.0
            || self.mu_halving_period == 0
            || self.mu_init_factor <= 0.0
            || self.mu_floor_divisor < 1.0
            || self.solver_tol <= 0.0
        {
            return Err(Error::Parameter("FitConfig: all fields must be positive".into()));
        }
        Ok(())
    }
}

/// Full optimizer state.
#[derive(Debug, Clone)]
pub struct RoccoState {
    pub u: DataMatrix,
    pub l_rows: LineProcess,
    pub l_cols: LineProcess,
    pub alpha: f64,
    pub beta: f64,
    pub mu_rows: f64,
    pub mu_cols: f64,
    pub mu_rows_floor: f64,
    pub mu_cols_floor: f64,
    pub iteration: usize,
    pub objective_trace: Vec<f64>,
}

/// Objective values bracketing one outer iteration, tagged with the
/// graduated-non-convexity phase (phase changes whenever mu or the
/// regularization weights are refreshed).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ObjectiveStep {
    pub phase: usize,
    pub after_line_update: f64,
    pub after_u_update: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct FitReport {
    pub warnings: Vec<String>,
    pub outer_iterations: usize,
    pub converged: bool,
    pub solve_reports: Vec<SolveReport>,
    pub objective_steps: Vec<ObjectiveStep>,
    pub u_relative_changes: Vec<f64>,
}

pub struct FitOutcome {
    pub u: DataMatrix,
    pub state: RoccoState,
    pub report: FitReport,
}

/// Frobenius norm of the weighted Laplacian sum L_e (e_i - e_j)(e_i - e_j)^T,
/// computed straight from the edge list: the diagonal holds the weighted
/// degrees and each off-diagonal -L_e appears twice.
fn laplacian_frobenius(g: &MutualKnnGraph, weights: &[f64]) -> f64 {
    let mut deg = vec![0.0f64; g.node_count];
    let mut off = 0.0;
    for (e, &w) in g.edges.iter().zip(weights) {
        deg[e.i] += w;
        deg[e.j] += w;
        off += 2.0 * w * w;
    }
    (deg.iter().map(|d| d * d).sum::<f64>() + off).sqrt()
}

fn regularizer_weight(
    x_norm: f64,
    g: &MutualKnnGraph,
    l: &LineProcess,
) -> Result<f64> {
    if g.edges.is_empty() {
        return Ok(0.0);
    }
    let norm = laplacian_frobenius(g, &l.weights);
    if norm == 0.0 {
        return Ok(0.0);
    }
    Ok(x_norm / norm)
}

/// mu starts at `factor` times the largest squared L2 edge distance. The L2
/// scale matters even when the graph was built under another metric: the
/// line process compares mu against squared L2 distances in the learned
/// space, so a mu taken from, say, cosine distances (bounded by 2) would
/// zero out every weight on data of any real magnitude.
fn mu_init(x: &DataMatrix, g: &MutualKnnGraph, axis: MatrixAxis, factor: f64) -> f64 {
    let max_d2 = edge_sq_dists(x, g, axis)
        .into_iter()
        .fold(0.0f64, f64::max);
    if max_d2 > 0.0 {
        factor * max_d2
    } else {
        // Degenerate graph (no edges, or all edge distances zero): any mu
        // works since the line process stays at 1.
        1.0
    }
}

/// Initialize the optimizer: U = X, all line-process weights 1, alpha/beta
/// from the Frobenius-norm ratio, mu from the largest squared edge distance.
pub fn init_state(
    x: &DataMatrix,
    g_rows: &MutualKnnGraph,
    g_cols: &MutualKnnGraph,
    cfg: &FitConfig,
) -> Result<(RoccoState, Vec<String>)> {
    let mut warnings = Vec::new();
    let x_norm = x.mapv(|v| v * v).sum().sqrt();
    let l_rows = LineProcess::ones(g_rows.edges.len());
    let l_cols = LineProcess::ones(g_cols.edges.len());
    let alpha = regularizer_weight(x_norm, g_rows, &l_rows)?;
    let beta = regularizer_weight(x_norm, g_cols, &l_cols)?;
    if g_rows.edges.is_empty() {
        warnings.push("row graph has no edges; sample penalty dropped (alpha = 0)".into());
    }
    if g_cols.edges.is_empty() {
        warnings.push("column graph has no edges; feature penalty dropped (beta = 0)".into());
    }
    let mu_rows = mu_init(x, g_rows, MatrixAxis::Rows, cfg.mu_init_factor);
    let mu_cols = mu_init(x, g_cols, MatrixAxis::Columns, cfg.mu_init_factor);
    Ok((
        RoccoState {
            u: x.clone(),
            l_rows,
            l_cols,
            alpha,
            beta,
            mu_rows,
            mu_cols,
            mu_rows_floor: mu_rows / cfg.mu_floor_divisor,
            mu_cols_floor: mu_cols / cfg.mu_floor_divisor,
            iteration: 0,
            objective_trace: Vec::new(),
        },
        warnings,
    ))
}

fn penalty_sum(u: &DataMatrix, g: &MutualKnnGraph, l: &LineProcess, mu: f64, axis: MatrixAxis) -> f64 {
    edge_sq_dists(u, g, axis)
        .iter()
        .zip(&l.weights)
        .map(|(&d2, &w)| w * d2 + psi(w, mu))
        .sum()
}

fn objective_general(
    data_weight: f64,
    x: &DataMatrix,
    u: &DataMatrix,
    l_rows: &LineProcess,
    l_cols: &LineProcess,
    alpha: f64,
    beta: f64,
    mu_rows: f64,
    mu_cols: f64,
    g_rows: &MutualKnnGraph,
    g_cols: &MutualKnnGraph,
) -> f64 {
    let diff = x - u;
    let data: f64 = data_weight * diff.iter().map(|v| v * v).sum::<f64>();
    let rows = if alpha > 0.0 {
        0.5 * alpha * penalty_sum(u, g_rows, l_rows, mu_rows, MatrixAxis::Rows)
    } else {
        0.0
    };
    let cols = if beta > 0.0 {
        0.5 * beta * penalty_sum(u, g_cols, l_cols, mu_cols, MatrixAxis::Columns)
    } else {
        0.0
    };
    data + rows + cols
}

/// The biconvex dual objective:
/// |X - U|_F^2 + (alpha/2) sum(L d^2 + psi(L)) + (beta/2) sum(L d^2 + psi(L)).
#[allow(clippy::too_many_arguments)]
pub fn objective(
    x: &DataMatrix,
    u: &DataMatrix,
    l_rows: &LineProcess,
    l_cols: &LineProcess,
    alpha: f64,
    beta: f64,
    mu_rows: f64,
    mu_cols: f64,
    g_rows: &MutualKnnGraph,
    g_cols: &MutualKnnGraph,
) -> f64 {
    objective_general(
        1.0, x, u, l_rows, l_cols, alpha, beta, mu_rows, mu_cols, g_rows, g_cols,
    )
}

fn check_finite(x: &DataMatrix) -> Result<()> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("input matrix contains non-finite values".into()));
    }
    Ok(())
}

/// Fit on both row and column graphs built from X (the standard two-sided run).
pub fn fit(x: &DataMatrix, cfg: &FitConfig) -> Result<FitOutcome> {
    cfg.validate()?;
    if x.nrows() < 2 || x.ncols() < 2 {
        return Err(Error::Input(format!(
            "fit: need at least a 2x2 matrix, got {}x{}",
            x.nrows(),
            x.ncols()
        )));
    }
    check_finite(x)?;
    let mut warnings = Vec::new();
    let (mut g_rows, row_clamped) = build_mutual_knn(x, cfg.k, cfg.metric, MatrixAxis::Rows)?;
    let (mut g_cols, col_clamped) = build_mutual_knn(x, cfg.k, cfg.metric, MatrixAxis::Columns)?;
    attach_small_components(x, MatrixAxis::Rows, &mut g_rows, cfg.metric, cfg.k)?;
    attach_small_components(x, MatrixAxis::Columns, &mut g_cols, cfg.metric, cfg.k)?;
    if row_clamped {
        warnings.push(format!("k clamped to {} for the row graph", x.nrows() - 1));
    }
    if col_clamped {
        warnings.push(format!("k clamped to {} for the column graph", x.ncols() - 1));
    }
    let mut outcome = fit_with_graphs(x, &g_rows, Some(&g_cols), cfg)?;
    outcome.report.warnings.splice(0..0, warnings);
    Ok(outcome)
}

/// Two-sided fit on prebuilt graphs; lets callers time graph construction
/// separately from representation learning.
pub fn fit_prebuilt(
    x: &DataMatrix,
    g_rows: &MutualKnnGraph,
    g_cols: &MutualKnnGraph,
    cfg: &FitConfig,
) -> Result<FitOutcome> {
    cfg.validate()?;
    check_finite(x)?;
    fit_with_graphs(x, g_rows, Some(g_cols), cfg)
}

/// One-sided fit on a prebuilt row graph: the feature term is disabled and
/// the U-update solves AU = X. Used by the assignment stage.
pub fn fit_one_sided(
    x: &DataMatrix,
    g_rows: &MutualKnnGraph,
    cfg: &FitConfig,
) -> Result<FitOutcome> {
    cfg.validate()?;
    check_finite(x)?;
    fit_with_graphs(x, g_rows, None, cfg)
}

/// Shared loop. With both graphs the U-update solves AU + UB = 2X; with only
/// the row graph it degenerates to the one-sided system AU = X (the
/// least-squares stationarity condition of the one-sided objective).
fn fit_with_graphs(
    x: &DataMatrix,
    g_rows: &MutualKnnGraph,
    g_cols: Option<&MutualKnnGraph>,
    cfg: &FitConfig,
) -> Result<FitOutcome> {
    let (n, p) = (x.nrows(), x.ncols());
    let empty = MutualKnnGraph {
        node_count: p,
        ..Default::default()
    };
    let two_sided = g_cols.is_some();
    let g_cols = g_cols.unwrap_or(&empty);

    let (mut state, mut warnings) = init_state(x, g_rows, g_cols, cfg)?;
    if !two_sided {
        // the feature term is off by design here, not degenerate
        warnings.retain(|w| !w.starts_with("column graph has no edges"));
    }
    let mut report = FitReport {
        warnings,
        ..Default::default()
    };
    let rows_active = state.alpha > 0.0;
    let cols_active = state.beta > 0.0;
    let data_weight = if two_sided { 1.0 } else { 0.5 };
    let solver_max_iter = cfg.solver_max_iter.unwrap_or(10 * (n + p));
    let x_norm = x.mapv(|v| v * v).sum().sqrt();
    let rhs_two_sided = if rows_active && cols_active {
        Some(x * 2.0)
    } else {
        None
    };

    if !rows_active && !cols_active {
        // No penalty at all: U = X is the exact minimizer.
        report.converged = true;
        let u = x.clone();
        state.u = u.clone();
        return Ok(FitOutcome { u, state, report });
    }

    let mut phase = 0usize;
    let mut floor_reached = !(rows_active && state.mu_rows > state.mu_rows_floor)
        && !(cols_active && state.mu_cols > state.mu_cols_floor);

    for iter in 1..=cfg.max_outer_iterations {
        state.iteration = iter;

        // Half-step 1: closed-form line-process update.
        if rows_active {
            state.l_rows = update_line_process(&state.u, g_rows, state.mu_rows, MatrixAxis::Rows);
        }
        if cols_active {
            state.l_cols =
                update_line_process(&state.u, g_cols, state.mu_cols, MatrixAxis::Columns);
        }
        let after_line = objective_general(
            data_weight,
            x,
            &state.u,
            &state.l_rows,
            &state.l_cols,
            state.alpha,
            state.beta,
            state.mu_rows,
            state.mu_cols,
            g_rows,
            g_cols,
        );

        // Half-step 2: representation update through the SDD solve.
        let prev_u = state.u.clone();
        let (u_new, solve_report) = if rows_active && cols_active {
            let a = assemble_sdd(g_rows, &state.l_rows.weights, state.alpha, n)?;
            let b = assemble_sdd(g_cols, &state.l_cols.weights, state.beta, p)?;
            solve_sylvester(
                &a,
                &b,
                rhs_two_sided.as_ref().expect("rhs precomputed"),
                cfg.solver_tol,
                solver_max_iter,
                Some(&state.u),
            )?
        } else if rows_active {
            let a = assemble_sdd(g_rows, &state.l_rows.weights, state.alpha, n)?;
            solve_left(&a, x, cfg.solver_tol, solver_max_iter, Some(&state.u))?
        } else {
            let b = assemble_sdd(g_cols, &state.l_cols.weights, state.beta, p)?;
            solve_right(&b, x, cfg.solver_tol, solver_max_iter, Some(&state.u))?
        };
        if !solve_report.converged {
            return Err(Error::SolverDiverged {
                report: solve_report,
            });
        }
        report.solve_reports.push(solve_report);
        state.u = u_new;

        let after_u = objective_general(
            data_weight,
            x,
            &state.u,
            &state.l_rows,
            &state.l_cols,
            state.alpha,
            state.beta,
            state.mu_rows,
            state.mu_cols,
            g_rows,
            g_cols,
        );
        report.objective_steps.push(ObjectiveStep {
            phase,
            after_line_update: after_line,
            after_u_update: after_u,
        });
        state.objective_trace.push(after_u);

        let prev_norm = prev_u.iter().map(|v| v * v).sum::<f64>().sqrt();
        let delta = (&state.u - &prev_u)
            .iter()
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt();
        let rel_change = if prev_norm > 0.0 { delta / prev_norm } else { 0.0 };
        report.u_relative_changes.push(rel_change);
        report.outer_iterations = iter;

        if floor_reached && rel_change <= cfg.convergence_tol {
            report.converged = true;
            break;
        }

        // Graduated non-convexity: every period, halve mu (floored) and
        // refresh alpha/beta from the current line process.
        if iter % cfg.mu_halving_period == 0 {
            if rows_active && state.mu_rows > state.mu_rows_floor {
                state.mu_rows = (state.mu_rows / 2.0).max(state.mu_rows_floor);
            }
            if cols_active && state.mu_cols > state.mu_cols_floor {
                state.mu_cols = (state.mu_cols / 2.0).max(state.mu_cols_floor);
            }
            if rows_active {
                state.alpha = regularizer_weight(x_norm, g_rows, &state.l_rows)?;
            }
            if cols_active {
                state.beta = regularizer_weight(x_norm, g_cols, &state.l_cols)?;
            }
            floor_reached = !(rows_active && state.mu_rows > state.mu_rows_floor)
                && !(cols_active && state.mu_cols > state.mu_cols_floor);
            phase += 1;
        }
    }

    let u = state.u.clone();
    Ok(FitOutcome { u, state, report })
}
