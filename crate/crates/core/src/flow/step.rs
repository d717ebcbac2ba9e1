//! One minimizing-movement step
//! `f¹ = argmin F(f) + ‖f - f⁰‖²_{H^{-1}} / (2τ)`.
//!
//! The default solver works on the dual variable `g` (one value per edge):
//! `J(g) = τ/2 |∇∇*g|² - ⟨∇f⁰, g⟩ + Σ w σ^#(g)` is minimised by a
//! semismooth Newton method with Armijo backtracking, and the primal
//! solution is recovered as `f = f⁰ - τ (-Δ)∇*g`. A first-order
//! primal-dual iteration is kept as an independent cross-check.

use serde::{Deserialize, Serialize};

use crate::convex::{
    prox_radial, sigma_conj_grad_scalar, sigma_conj_hess_scalar, sigma_conj_radial, sigma_grad_scalar, sigma_radial,
    EnergyDensityParams,
};
use crate::error::{Error, Result};
use crate::linalg::{EnvelopeCholesky, EnvelopeMatrix};

use super::mesh::{Flavor, Mesh};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InnerSolver {
    DualNewton,
    PrimalDual,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub solver: InnerSolver,
}

impl StepOptions {
    pub fn new(tol: f64) -> Self {
        Self { tol, max_iter: 200, solver: InnerSolver::DualNewton }
    }

    pub fn primal_dual(tol: f64) -> Self {
        Self { tol, max_iter: 500_000, solver: InnerSolver::PrimalDual }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepSolution {
    /// Minimiser, one value per node (pinned entry included).
    pub f: Vec<f64>,
    /// Dual field `g ∈ ∂σ(∇f)` on edges.
    pub dual: Vec<f64>,
    /// `Σ w [σ(∇f) + σ^#(g) - g ∇f]`.
    pub gap: f64,
    /// `max |∇σ^#(g) - ∇f|`.
    pub residual: f64,
    pub iterations: usize,
}

/// Smallest `ε` such that residuals below `ε` are indistinguishable from
/// rounding, either in the recovery `f = f⁰ - τ (-Δ)∇*g` or in evaluating
/// `∇σ^#(g)` where it is steep (`p > 2`, `|g|` just above 1).
fn noise_floor(mesh: &Mesh, params: &EnergyDensityParams, tau: f64, g: &[f64], b_sup: f64) -> f64 {
    let (diag, _) = mesh.stiffness();
    let lap = diag.iter().zip(mesh.measures()).map(|(k, m)| 2.0 * k / m).fold(0.0, f64::max);
    let g_sup = g.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let steep = g.iter().map(|&v| sigma_conj_hess_scalar(params, v) * v.abs()).fold(0.0, f64::max);
    10.0 * f64::EPSILON * (tau * lap * lap * g_sup.max(1.0) + b_sup + 1.0 + steep)
}

/// How often the dual Newton loop may hand over to [`DualProblem::graph_newton`].
const MAX_GRAPH_PHASES: usize = 4;

struct Eval {
    f: Vec<f64>,
    df: Vec<f64>,
    r: Vec<f64>,
    objective: f64,
    gap: f64,
    residual: f64,
}

struct DualProblem<'a> {
    mesh: &'a Mesh,
    params: &'a EnergyDensityParams,
    tau: f64,
    f0: &'a [f64],
    b: Vec<f64>,
    weights: Vec<f64>,
    quadratic: EnvelopeMatrix,
}

impl<'a> DualProblem<'a> {
    fn new(mesh: &'a Mesh, params: &'a EnergyDensityParams, tau: f64, f0: &'a [f64]) -> Self {
        let weights: Vec<f64> = mesh.edges().iter().map(|e| e.weight).collect();
        let rows = operator_rows(mesh);
        let pattern = rows.iter().flat_map(|row| {
            row.iter().flat_map(move |&(i, _)| row.iter().map(move |&(j, _)| (i, j)))
        });
        let mut quadratic = EnvelopeMatrix::from_pattern(weights.len(), pattern);
        for (row, w) in rows.iter().zip(&weights) {
            for (a, &(i, bi)) in row.iter().enumerate() {
                for &(j, bj) in &row[..=a] {
                    quadratic.add(i, j, tau * w * bi * bj);
                }
            }
        }
        Self { mesh, params, tau, f0, b: mesh.gradient(f0), weights, quadratic }
    }

    fn eval(&self, g: &[f64]) -> Eval {
        let mesh = self.mesh;
        let bg = mesh.gradient(&mesh.gradient_adjoint(g));
        let lq = mesh.gradient_adjoint(&bg);
        let f: Vec<f64> = self.f0.iter().zip(&lq).map(|(a, l)| a - self.tau * l).collect();
        let df = mesh.gradient(&f);
        let p = self.params;
        let mut objective = 0.0;
        let mut gap = 0.0;
        let mut r = Vec::with_capacity(g.len());
        for e in 0..g.len() {
            let w = self.weights[e];
            let conj = sigma_conj_radial(p, g[e]);
            objective += w * (0.5 * self.tau * bg[e] * bg[e] - self.b[e] * g[e] + conj);
            gap += w * (sigma_radial(p, df[e]) + conj - g[e] * df[e]);
            r.push(sigma_conj_grad_scalar(p, g[e]) - df[e]);
        }
        let residual = r.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        Eval { f, df, r, objective, gap: gap.max(0.0), residual }
    }

    /// Diagonal regularisation and curvature cap relative to `τ ∇∇*∇∇*`.
    fn regularization(&self) -> (f64, f64) {
        let scale = (0..self.weights.len())
            .map(|e| self.quadratic.get(e, e) / self.weights[e])
            .fold(0.0, f64::max)
            .max(1.0);
        (1e-12 * scale, 1e8 * scale)
    }

    /// Solves `(τ B² + diag(c)) d = -r` in the edge-weighted inner product.
    fn solve_shifted(&self, c: impl Fn(usize) -> f64, r: &[f64]) -> Result<Vec<f64>> {
        let mut a = self.quadratic.clone();
        let (reg, cap) = self.regularization();
        for e in 0..r.len() {
            a.add(e, e, self.weights[e] * (c(e).min(cap) + reg));
        }
        let chol: EnvelopeCholesky = a.cholesky()?;
        let rhs: Vec<f64> = r.iter().zip(&self.weights).map(|(ri, w)| -w * ri).collect();
        Ok(chol.solve(&rhs))
    }

    fn newton_direction(&self, g: &[f64], r: &[f64]) -> Result<Vec<f64>> {
        self.solve_shifted(|e| sigma_conj_hess_scalar(self.params, g[e]), r)
    }

    /// Local semismooth Newton on `z = t + g`, with `t = prox_σ(z)` and
    /// `g = z - t ∈ ∂σ(t)`. Every iterate lies on the graph of `∂σ`, so
    /// the steep part of `∇σ^#` near `|g| = 1` (p > 2) never enters the
    /// linearisation. Returns the best point found and its evaluation.
    fn graph_newton(&self, g: &[f64], cur: &Eval, target: f64, max_iter: usize) -> Result<Option<(Vec<f64>, Eval)>> {
        let p = self.params;
        let on_graph = |z: &[f64]| -> Result<(Vec<f64>, Vec<f64>)> {
            let mut t = Vec::with_capacity(z.len());
            for &ze in z {
                t.push(ze.signum() * prox_radial(p, 1.0, ze.abs())?);
            }
            let g = z.iter().zip(&t).map(|(a, b)| a - b).collect();
            Ok((t, g))
        };
        let mismatch = |t: &[f64], ev: &Eval| -> (Vec<f64>, f64) {
            let f: Vec<f64> = t.iter().zip(&ev.df).map(|(a, b)| a - b).collect();
            let m = f.iter().map(|v| v * v).sum::<f64>().sqrt();
            (f, m)
        };
        let mut z: Vec<f64> = g.iter().map(|&ge| ge + sigma_conj_grad_scalar(p, ge)).collect();
        let (mut t, mut gz) = on_graph(&z)?;
        let mut ev = self.eval(&gz);
        let (mut fz, mut fmax) = mismatch(&t, &ev);
        let mut best: Option<(Vec<f64>, Eval)> = None;
        let mut best_residual = cur.residual;
        for _ in 0..max_iter {
            if ev.residual < best_residual {
                best_residual = ev.residual;
                best = Some((gz.clone(), self.eval(&gz)));
            }
            if fmax <= target {
                break;
            }
            let curv: Vec<f64> = t
                .iter()
                .map(|&te| if te == 0.0 { 0.0 } else { 1.0 / (p.mu() * (p.p() - 1.0) * te.abs().powf(p.p() - 2.0)) })
                .collect();
            let dg = self.solve_shifted(|e| curv[e], &fz)?;
            let (_, cap) = self.regularization();
            let dz: Vec<f64> = dg.iter().zip(&curv).map(|(d, c)| d * (1.0 + c.min(cap))).collect();
            let mut alpha = 1.0;
            let mut moved = false;
            for _ in 0..30 {
                let trial: Vec<f64> = z.iter().zip(&dz).map(|(a, d)| a + alpha * d).collect();
                let (tt, gt) = on_graph(&trial)?;
                let et = self.eval(&gt);
                let (ft, mt) = mismatch(&tt, &et);
                if mt <= (1.0 - 1e-4 * alpha) * fmax {
                    (z, t, gz, ev, fz, fmax) = (trial, tt, gt, et, ft, mt);
                    moved = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !moved {
                break;
            }
        }
        if ev.residual < best_residual {
            best = Some((gz, ev));
        }
        Ok(best)
    }
}

/// Sparse rows of `∇∇*` acting on edge fields.
fn operator_rows(mesh: &Mesh) -> Vec<Vec<(usize, f64)>> {
    let edges = mesh.edges();
    let m = mesh.measures();
    let mut node_terms: Vec<Vec<(usize, f64)>> = vec![Vec::new(); mesh.n_free()];
    for (e, edge) in edges.iter().enumerate() {
        let c = edge.weight / edge.length;
        node_terms[edge.tail].push((e, -c / m[edge.tail]));
        if let Some(h) = edge.head {
            node_terms[h].push((e, c / m[h]));
        }
    }
    edges
        .iter()
        .map(|edge| {
            let mut row: Vec<(usize, f64)> = Vec::new();
            let mut push = |node: usize, sign: f64| {
                for &(j, c) in &node_terms[node] {
                    match row.iter_mut().find(|(k, _)| *k == j) {
                        Some(entry) => entry.1 += sign * c / edge.length,
                        None => row.push((j, sign * c / edge.length)),
                    }
                }
            };
            if let Some(h) = edge.head {
                push(h, 1.0);
            }
            push(edge.tail, -1.0);
            row
        })
        .collect()
}

/// Initial dual guess: `σ'(∇f⁰)` where the gradient is nonzero, else 0.
pub fn default_dual_start(mesh: &Mesh, params: &EnergyDensityParams, f0: &[f64]) -> Vec<f64> {
    mesh.gradient(f0)
        .iter()
        .map(|&d| if d == 0.0 { 0.0 } else { sigma_grad_scalar(params, d) })
        .collect()
}

/// Solves one proximal step from `f0`. `dual_start` warm-starts the
/// dual variable.
pub fn solve_step(
    mesh: &Mesh,
    params: &EnergyDensityParams,
    f0: &[f64],
    tau: f64,
    dual_start: Option<&[f64]>,
    options: &StepOptions,
) -> Result<StepSolution> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::InvalidParameter(format!("time step must be positive, got {tau}")));
    }
    if !(options.tol.is_finite() && options.tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {}", options.tol)));
    }
    if f0.len() != mesh.n_values() {
        return Err(Error::DimensionMismatch { expected: mesh.n_values(), found: f0.len() });
    }
    let start = match dual_start {
        Some(g) if g.len() == mesh.edges().len() => g.to_vec(),
        Some(g) => return Err(Error::DimensionMismatch { expected: mesh.edges().len(), found: g.len() }),
        None => default_dual_start(mesh, params, f0),
    };
    let mut sol = match options.solver {
        InnerSolver::DualNewton => dual_newton(mesh, params, f0, tau, start, options)?,
        InnerSolver::PrimalDual => primal_dual(mesh, params, f0, tau, start, options)?,
    };
    if mesh.flavor() == Flavor::Periodic {
        let mean = mesh.mean(&sol.f);
        sol.f.iter_mut().for_each(|v| *v -= mean);
    }
    Ok(sol)
}

fn dual_newton(
    mesh: &Mesh,
    params: &EnergyDensityParams,
    f0: &[f64],
    tau: f64,
    mut g: Vec<f64>,
    options: &StepOptions,
) -> Result<StepSolution> {
    let problem = DualProblem::new(mesh, params, tau, f0);
    let b_sup = problem.b.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let total_weight: f64 = problem.weights.iter().sum();
    let tol = options.tol;
    let mut cur = problem.eval(&g);
    let mut stalled = false;
    let mut graph_phases = 0;
    for it in 0..options.max_iter {
        let floor = noise_floor(mesh, params, tau, &g, b_sup);
        let energy = mesh.energy_of_gradient(&cur.df, params);
        let converged = cur.residual <= tol && cur.gap <= tol * (1.0 + energy);
        let at_floor = stalled && cur.residual <= floor.max(tol) && cur.gap <= floor.max(tol) * (1.0 + energy + total_weight);
        if converged || at_floor {
            return Ok(StepSolution { f: cur.f, dual: g, gap: cur.gap, residual: cur.residual, iterations: it });
        }
        if (it == 0 || stalled) && graph_phases < MAX_GRAPH_PHASES && params.p() > 2.0 {
            graph_phases += 1;
            if let Some((next_g, next)) = problem.graph_newton(&g, &cur, 0.1 * floor.max(tol), options.max_iter)? {
                g = next_g;
                cur = next;
                continue;
            }
        }
        let dir = problem.newton_direction(&g, &cur.r)?;
        let slope: f64 = dir.iter().zip(&cur.r).zip(&problem.weights).map(|((d, r), w)| d * w * r).sum();
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let trial: Vec<f64> = g.iter().zip(&dir).map(|(a, d)| a + alpha * d).collect();
            let next = problem.eval(&trial);
            let armijo = next.objective <= cur.objective + 1e-4 * alpha * slope;
            let roundoff = (next.objective - cur.objective).abs() <= 1e-13 * (1.0 + cur.objective.abs())
                && next.residual < cur.residual;
            if armijo || roundoff {
                accepted = Some((trial, next));
                break;
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((trial, next)) => {
                stalled = next.residual > 0.5 * cur.residual;
                g = trial;
                cur = next;
            }
            None => {
                // no descent left at working precision
                if stalled || cur.residual <= floor.max(tol) {
                    stalled = true;
                    if cur.residual <= floor.max(tol) {
                        continue;
                    }
                }
                return Err(Error::SolverDiverged { what: "dual Newton line search", iterations: it, residual: cur.residual });
            }
        }
    }
    Err(Error::SolverDiverged { what: "dual Newton", iterations: options.max_iter, residual: cur.residual })
}

fn primal_dual(
    mesh: &Mesh,
    params: &EnergyDensityParams,
    f0: &[f64],
    tau: f64,
    mut g: Vec<f64>,
    options: &StepOptions,
) -> Result<StepSolution> {
    let n = mesh.n_free();
    let (diag, off) = mesh.stiffness();
    let m = mesh.measures();
    let lip = diag.iter().zip(m).map(|(k, mi)| 2.0 * k / mi).fold(0.0, f64::max);
    let t = 0.99 / lip.sqrt();
    let s = 0.99 / lip.sqrt();

    // (M/τ + K/t) f = M f⁰/τ + K v/t
    let edges = mesh.edges();
    let mut a = EnvelopeMatrix::from_pattern(
        n,
        edges.iter().filter_map(|e| e.head.map(|h| (e.tail, h))),
    );
    for i in 0..n {
        a.add(i, i, m[i] / tau + diag[i] / t);
    }
    for (e, edge) in edges.iter().enumerate() {
        if let Some(h) = edge.head {
            a.add(edge.tail, h, off[e] / t);
        }
    }
    let chol = a.cholesky()?;
    let stiff_mul = |v: &[f64]| -> Vec<f64> {
        let mut out: Vec<f64> = (0..n).map(|i| diag[i] * v[i]).collect();
        for (e, edge) in edges.iter().enumerate() {
            if let Some(h) = edge.head {
                out[edge.tail] += off[e] * v[h];
                out[h] += off[e] * v[edge.tail];
            }
        }
        out
    };

    let weights: Vec<f64> = edges.iter().map(|e| e.weight).collect();
    let b = mesh.gradient(f0);
    let mut f = f0.to_vec();
    let mut f_bar = f.clone();
    let mut residual = f64::INFINITY;
    for it in 0..options.max_iter {
        let df_bar = mesh.gradient(&f_bar);
        for e in 0..g.len() {
            let y = g[e] + s * df_bar[e];
            g[e] = y - s * y.signum() * prox_radial(params, 1.0 / s, y.abs() / s)?;
        }
        let adj = mesh.gradient_adjoint(&g);
        let v: Vec<f64> = (0..n).map(|i| f[i] - t * adj[i]).collect();
        let kv = stiff_mul(&v);
        let rhs: Vec<f64> = (0..n).map(|i| m[i] * f0[i] / tau + kv[i] / t).collect();
        let mut next = chol.solve(&rhs);
        if mesh.flavor() == Flavor::Radial {
            next.push(0.0);
        }
        f_bar = next.iter().zip(&f).map(|(a, b)| 2.0 * a - b).collect();
        f = next;

        if it % 25 == 24 {
            let df = mesh.gradient(&f);
            let diff: Vec<f64> = f.iter().zip(f0).map(|(a, b)| a - b).collect();
            let primal = mesh.energy_of_gradient(&df, params) + mesh.neg_sobolev_inner_raw(&diff, &diff) / (2.0 * tau);
            let bg = mesh.gradient(&mesh.gradient_adjoint(&g));
            let dual = mesh.edge_inner(&b, &g)
                - 0.5 * tau * mesh.edge_inner(&bg, &bg)
                - g.iter().zip(&weights).map(|(x, w)| w * sigma_conj_radial(params, *x)).sum::<f64>();
            let gap = primal - dual;
            residual = g
                .iter()
                .zip(&df)
                .map(|(x, d)| (sigma_conj_grad_scalar(params, *x) - d).abs())
                .fold(0.0, f64::max);
            if gap <= options.tol * (1.0 + primal.abs()) {
                return Ok(StepSolution { f, dual: g, gap, residual, iterations: it + 1 });
            }
        }
    }
    Err(Error::SolverDiverged { what: "primal-dual iteration", iterations: options.max_iter, residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::mesh::{PeriodicGrid, RadialGrid};
    use std::f64::consts::PI;

    fn sine_mesh(n: usize) -> (Mesh, Vec<f64>) {
        let mesh = Mesh::periodic(PeriodicGrid::new(n, 1.0).unwrap());
        let f = mesh.project(mesh.positions().iter().map(|x| (2.0 * PI * x).sin()).collect()).unwrap();
        (mesh, f.values)
    }

    #[test]
    fn zero_stays_zero() {
        let (mesh, _) = sine_mesh(16);
        let params = EnergyDensityParams::new(1.0, 2.0, 1).unwrap();
        let sol = solve_step(&mesh, &params, &vec![0.0; 16], 0.1, None, &StepOptions::new(1e-10)).unwrap();
        assert!(sol.f.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn newton_matches_primal_dual() {
        let (mesh, f0) = sine_mesh(16);
        for p in [1.5, 2.0, 3.0] {
            let params = EnergyDensityParams::new(1.0, p, 1).unwrap();
            let a = solve_step(&mesh, &params, &f0, 1e-3, None, &StepOptions::new(1e-11)).unwrap();
            let b = solve_step(&mesh, &params, &f0, 1e-3, None, &StepOptions::primal_dual(1e-11)).unwrap();
            let err = a.f.iter().zip(&b.f).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            assert!(err < 1e-5, "p={p}: {err:e}");
        }
    }

    #[test]
    fn radial_step_keeps_pin() {
        let mesh = Mesh::radial(RadialGrid::new(0.5, 1.0, 33, 2).unwrap());
        let f0: Vec<f64> = mesh.positions().iter().map(|s| 1.0 - s * s).collect();
        let params = EnergyDensityParams::new(1.0, 2.0, 2).unwrap();
        let sol = solve_step(&mesh, &params, &f0, 1e-3, None, &StepOptions::new(1e-10)).unwrap();
        assert_eq!(*sol.f.last().unwrap(), 0.0);
        assert!(mesh.energy_raw(&sol.f, &params) <= mesh.energy_raw(&f0, &params));
    }

    #[test]
    fn rejects_bad_tau() {
        let (mesh, f0) = sine_mesh(8);
        let params = EnergyDensityParams::new(1.0, 2.0, 1).unwrap();
        assert!(solve_step(&mesh, &params, &f0, 0.0, None, &StepOptions::new(1e-10)).is_err());
    }

    #[test]
    fn converges_with_dual_just_above_one() {
        // one edge ends at |g| = 1 + 1.2e-9 with ∇f = 4.4e-4
        let raw = [
            -0.3975605074235018, -0.1397871016254262, -0.458885881500876, 0.1557459876155653,
            -0.8460723501020567, 0.5159437585752352, 0.3630459297559553, -0.8067104663592453,
            -0.5317816536585028, 0.08602487343406476, 0.6873233026383752, 0.04912169521087899,
            0.9970065056574157, -0.2526396208804809, 0.7772319704316806, -0.39860902110781493,
        ];
        let mesh = Mesh::periodic(PeriodicGrid::new(16, 1.0).unwrap());
        let f0 = mesh.project(raw.to_vec()).unwrap().values;
        let params = EnergyDensityParams::new(1.0, 3.656736663524173, 1).unwrap();
        let sol = solve_step(&mesh, &params, &f0, 1e-3, None, &StepOptions::new(1e-11)).unwrap();
        assert!(sol.residual <= 1e-11, "residual {}", sol.residual);
        let pd = solve_step(&mesh, &params, &f0, 1e-3, None, &StepOptions::primal_dual(1e-11)).unwrap();
        let diff = sol.f.iter().zip(&pd.f).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff <= 1e-8, "newton vs primal-dual {diff}");
    }
}
