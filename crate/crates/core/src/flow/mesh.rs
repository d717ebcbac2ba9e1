//! One-dimensional meshes shared by the periodic and radial flavors.
//!
//! Values live on nodes, gradients on edges. An edge joins a free node
//! (`tail`) to either another free node or, in the radial flavor, the pinned
//! node at `s = r` where the value is held at zero.

use serde::{Deserialize, Serialize};

use crate::convex::{sigma_radial, EnergyDensityParams};
use crate::error::{Error, Result};
use crate::linalg::solve_tridiagonal;
use crate::radial::unit_ball_volume;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flavor {
    Periodic,
    Radial,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodicGrid {
    pub n: usize,
    pub omega: f64,
}

impl PeriodicGrid {
    pub fn new(n: usize, omega: f64) -> Result<Self> {
        if n < 4 {
            return Err(Error::InvalidParameter(format!("periodic grid needs n >= 4, got {n}")));
        }
        if !(omega.is_finite() && omega > 0.0) {
            return Err(Error::InvalidParameter(format!("period must be positive, got {omega}")));
        }
        Ok(Self { n, omega })
    }

    pub fn spacing(&self) -> f64 {
        self.omega / self.n as f64
    }
}

/// `n` nodes on `[0, r]` with `r0` placed exactly on a node.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    pub r0: f64,
    pub r: f64,
    pub n: usize,
    pub dim: usize,
}

impl RadialGrid {
    pub fn new(r0: f64, r: f64, n: usize, dim: usize) -> Result<Self> {
        if n < 5 {
            return Err(Error::InvalidParameter(format!("radial grid needs n >= 5, got {n}")));
        }
        if !(r0.is_finite() && r.is_finite() && r0 > 0.0 && r > r0) {
            return Err(Error::InvalidParameter(format!("radii must satisfy 0 < r0 < r, got r0={r0}, r={r}")));
        }
        if dim == 0 {
            return Err(Error::InvalidParameter("dim must be at least 1".into()));
        }
        Ok(Self { r0, r, n, dim })
    }

    /// Index of the node at `r0`.
    pub fn facet_node(&self) -> usize {
        let intervals = self.n - 1;
        ((intervals as f64 * self.r0 / self.r).round() as usize).clamp(1, intervals - 1)
    }

    pub fn nodes(&self) -> Vec<f64> {
        let intervals = self.n - 1;
        let k = self.facet_node();
        let mut s: Vec<f64> = (0..k).map(|i| self.r0 * i as f64 / k as f64).collect();
        let outer = intervals - k;
        s.extend((0..outer).map(|i| self.r0 + (self.r - self.r0) * i as f64 / outer as f64));
        s.push(self.r);
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub tail: usize,
    /// `None` for the pinned node.
    pub head: Option<usize>,
    pub length: f64,
    /// Measure of the cell the edge gradient lives on.
    pub weight: f64,
}

/// Values per node of a [`Mesh`]. Periodic functions have zero mean;
/// radial functions vanish at the last node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    pub flavor: Flavor,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// One value per edge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridVectorField {
    pub values: Vec<f64>,
}

impl GridVectorField {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("vector field has non-finite entries".into()));
        }
        Ok(Self { values })
    }
}

#[derive(Clone, Debug)]
pub struct Mesh {
    flavor: Flavor,
    positions: Vec<f64>,
    n_free: usize,
    edges: Vec<Edge>,
    measures: Vec<f64>,
    facet_node: Option<usize>,
    dim: usize,
    stiff_diag: Vec<f64>,
    stiff_off: Vec<f64>,
}

impl Mesh {
    pub fn periodic(grid: PeriodicGrid) -> Self {
        let n = grid.n;
        let h = grid.spacing();
        let edges = (0..n)
            .map(|e| Edge { tail: e, head: Some((e + 1) % n), length: h, weight: h })
            .collect();
        Self::assemble(Flavor::Periodic, (0..n).map(|i| i as f64 * h).collect(), n, edges, vec![h; n], None, 1)
    }

    pub fn radial(grid: RadialGrid) -> Self {
        let s = grid.nodes();
        let d = grid.dim as i32;
        let omega = unit_ball_volume(grid.dim);
        let ball = |t: f64| omega * t.powi(d);
        let n_free = s.len() - 1;
        let edges = (0..n_free)
            .map(|e| Edge {
                tail: e,
                head: (e + 1 < n_free).then_some(e + 1),
                length: s[e + 1] - s[e],
                weight: ball(s[e + 1]) - ball(s[e]),
            })
            .collect();
        let mid = |i: usize| 0.5 * (s[i] + s[i + 1]);
        let measures = (0..n_free)
            .map(|i| {
                let inner = if i == 0 { 0.0 } else { ball(mid(i - 1)) };
                ball(mid(i)) - inner
            })
            .collect();
        Self::assemble(Flavor::Radial, s, n_free, edges, measures, Some(grid.facet_node()), grid.dim)
    }

    fn assemble(
        flavor: Flavor,
        positions: Vec<f64>,
        n_free: usize,
        edges: Vec<Edge>,
        measures: Vec<f64>,
        facet_node: Option<usize>,
        dim: usize,
    ) -> Self {
        let mut stiff_diag = vec![0.0; n_free];
        let mut stiff_off = vec![0.0; edges.len()];
        for (e, edge) in edges.iter().enumerate() {
            let k = edge.weight / (edge.length * edge.length);
            stiff_diag[edge.tail] += k;
            if let Some(h) = edge.head {
                stiff_diag[h] += k;
                stiff_off[e] = -k;
            }
        }
        Self { flavor, positions, n_free, edges, measures, facet_node, dim, stiff_diag, stiff_off }
    }

    pub fn flavor(&self) -> Flavor {
        self.flavor
    }

    /// Node coordinates, including the pinned node in the radial flavor.
    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn n_values(&self) -> usize {
        self.positions.len()
    }

    pub fn n_free(&self) -> usize {
        self.n_free
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Midpoint coordinate of each edge.
    pub fn edge_midpoints(&self) -> Vec<f64> {
        match self.flavor {
            Flavor::Periodic => self.positions.iter().zip(&self.edges).map(|(x, e)| x + 0.5 * e.length).collect(),
            Flavor::Radial => self.positions.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect(),
        }
    }

    pub fn measures(&self) -> &[f64] {
        &self.measures
    }

    pub fn facet_node(&self) -> Option<usize> {
        self.facet_node
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn total_measure(&self) -> f64 {
        self.measures.iter().sum()
    }

    /// Wraps values after checking the flavor invariant.
    pub fn function(&self, values: Vec<f64>) -> Result<GridFunction> {
        if values.len() != self.n_values() {
            return Err(Error::DimensionMismatch { expected: self.n_values(), found: values.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("grid function has non-finite values".into()));
        }
        match self.flavor {
            Flavor::Periodic => {
                let sum: f64 = values.iter().sum();
                let scale = values.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
                if sum.abs() > 1e-12 * self.n_values() as f64 * scale {
                    return Err(Error::InvalidParameter(format!("periodic grid function must have zero mean, sum = {sum:e}")));
                }
            }
            Flavor::Radial => {
                let last = values[values.len() - 1];
                if last != 0.0 {
                    return Err(Error::InvalidParameter(format!("radial grid function must vanish at r, got {last:e}")));
                }
            }
        }
        Ok(GridFunction { flavor: self.flavor, values })
    }

    /// Subtracts the mean (periodic) or zeroes the pinned value (radial).
    pub fn project(&self, mut values: Vec<f64>) -> Result<GridFunction> {
        if values.len() != self.n_values() {
            return Err(Error::DimensionMismatch { expected: self.n_values(), found: values.len() });
        }
        match self.flavor {
            Flavor::Periodic => {
                let mean = self.mean(&values);
                values.iter_mut().for_each(|v| *v -= mean);
            }
            Flavor::Radial => {
                let last = values.len() - 1;
                values[last] = 0.0;
            }
        }
        self.function(values)
    }

    pub fn zero(&self) -> GridFunction {
        GridFunction { flavor: self.flavor, values: vec![0.0; self.n_values()] }
    }

    /// `Σ m_i a_i / Σ m_i` over free nodes.
    pub fn mean(&self, a: &[f64]) -> f64 {
        self.l2_inner(a, &vec![1.0; a.len()]) / self.total_measure()
    }

    pub fn l2_inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.measures.iter().zip(a).zip(b).map(|((m, x), y)| m * x * y).sum()
    }

    fn check_flavor(&self, f: &GridFunction) -> Result<()> {
        if f.flavor != self.flavor {
            return Err(Error::FlavorMismatch(format!("{:?} function on a {:?} grid", f.flavor, self.flavor)));
        }
        if f.values.len() != self.n_values() {
            return Err(Error::DimensionMismatch { expected: self.n_values(), found: f.values.len() });
        }
        Ok(())
    }

    fn value(&self, f: &[f64], node: Option<usize>) -> f64 {
        node.map_or(0.0, |i| f[i])
    }

    /// Edge differences `(f_head - f_tail) / length`.
    pub fn gradient(&self, f: &[f64]) -> Vec<f64> {
        self.edges.iter().map(|e| (self.value(f, e.head) - f[e.tail]) / e.length).collect()
    }

    /// Adjoint of [`Mesh::gradient`] between the edge and node weighted inner
    /// products (minus the discrete divergence). The pinned entry is zero.
    pub fn gradient_adjoint(&self, g: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_values()];
        for (edge, ge) in self.edges.iter().zip(g) {
            let flux = edge.weight * ge / edge.length;
            out[edge.tail] -= flux;
            if let Some(h) = edge.head {
                out[h] += flux;
            }
        }
        for (o, m) in out.iter_mut().zip(&self.measures) {
            *o /= m;
        }
        out
    }

    /// `-Δ f`.
    pub fn laplacian(&self, f: &[f64]) -> Vec<f64> {
        self.gradient_adjoint(&self.gradient(f))
    }

    /// Symmetric stiffness matrix on free nodes as tridiagonal or cyclic
    /// tridiagonal bands: `(diag, off)` with `off[e]` coupling edge `e`'s ends.
    pub fn stiffness(&self) -> (&[f64], &[f64]) {
        (&self.stiff_diag, &self.stiff_off)
    }

    /// `(-Δ)^{-1} a`. In the periodic flavor the mean of `a` is discarded
    /// and the result has zero mean.
    pub fn inverse_laplacian(&self, a: &[f64]) -> Vec<f64> {
        let mut rhs: Vec<f64> = self.measures.iter().zip(a).map(|(m, x)| m * x).collect();
        match self.flavor {
            Flavor::Radial => {
                let n = self.n_free;
                let lower: Vec<f64> = self.stiff_off[..n - 1].to_vec();
                let mut u = solve_tridiagonal(&lower, &self.stiff_diag, &lower, &rhs);
                u.push(0.0);
                u
            }
            Flavor::Periodic => {
                let total: f64 = rhs.iter().sum();
                let mass = self.total_measure();
                for (r, m) in rhs.iter_mut().zip(&self.measures) {
                    *r -= total * m / mass;
                }
                // pin u_0 = 0 and solve the remaining tridiagonal block
                let n = self.n_free;
                let off = &self.stiff_off[1..n - 1];
                let mut u = vec![0.0];
                u.extend(solve_tridiagonal(off, &self.stiff_diag[1..], off, &rhs[1..]));
                let mean = self.mean(&u);
                u.iter_mut().for_each(|v| *v -= mean);
                u
            }
        }
    }

    /// `⟨(-Δ)^{-1} a, b⟩`.
    pub fn neg_sobolev_inner(&self, a: &GridFunction, b: &GridFunction) -> Result<f64> {
        self.check_flavor(a)?;
        self.check_flavor(b)?;
        Ok(self.neg_sobolev_inner_raw(&a.values, &b.values))
    }

    pub(crate) fn neg_sobolev_inner_raw(&self, a: &[f64], b: &[f64]) -> f64 {
        self.l2_inner(&self.inverse_laplacian(a), b)
    }

    pub fn neg_sobolev_norm(&self, a: &GridFunction) -> Result<f64> {
        Ok(self.neg_sobolev_inner(a, a)?.max(0.0).sqrt())
    }

    /// `Σ_e w_e σ(∇f_e)`.
    pub fn discrete_energy(&self, f: &GridFunction, params: &EnergyDensityParams) -> Result<f64> {
        self.check_flavor(f)?;
        Ok(self.energy_raw(&f.values, params))
    }

    pub(crate) fn energy_raw(&self, f: &[f64], params: &EnergyDensityParams) -> f64 {
        self.energy_of_gradient(&self.gradient(f), params)
    }

    pub(crate) fn energy_of_gradient(&self, grad: &[f64], params: &EnergyDensityParams) -> f64 {
        self.edges.iter().zip(grad).map(|(e, g)| e.weight * sigma_radial(params, *g)).sum()
    }

    pub(crate) fn edge_inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.edges.iter().zip(a).zip(b).map(|((e, x), y)| e.weight * x * y).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn radial_mesh(n: usize, dim: usize) -> Mesh {
        Mesh::radial(RadialGrid::new(1.0, 2.0, n, dim).unwrap())
    }

    #[test]
    fn radial_nodes_contain_r0() {
        for n in [5, 16, 33, 257] {
            let g = RadialGrid::new(0.7, 2.0, n, 3).unwrap();
            let s = g.nodes();
            assert_eq!(s.len(), n);
            assert_eq!(s[g.facet_node()], 0.7);
            assert_eq!(s[0], 0.0);
            assert_eq!(s[n - 1], 2.0);
            assert!(s.windows(2).all(|w| w[1] > w[0]));
        }
    }

    #[test]
    fn radial_measures_are_exact_volumes() {
        for d in 1..=4 {
            let m = radial_mesh(41, d);
            let vol = unit_ball_volume(d) * 2f64.powi(d as i32);
            let w: f64 = m.edges().iter().map(|e| e.weight).sum();
            assert_abs_diff_eq!(w, vol, epsilon = 1e-12 * vol);
            let last_half = m.positions()[39] + 0.5 * (2.0 - m.positions()[39]);
            let expected = unit_ball_volume(d) * last_half.powi(d as i32);
            assert_abs_diff_eq!(m.total_measure(), expected, epsilon = 1e-12 * vol);
        }
    }

    #[test]
    fn adjointness() {
        for mesh in [Mesh::periodic(PeriodicGrid::new(12, 3.0).unwrap()), radial_mesh(13, 3)] {
            let f: Vec<f64> = (0..mesh.n_values()).map(|i| ((i * 7 % 5) as f64).sin()).collect();
            let f = mesh.project(f).unwrap().values;
            let g: Vec<f64> = (0..mesh.edges().len()).map(|i| (i as f64 * 1.3).cos()).collect();
            let lhs = mesh.edge_inner(&mesh.gradient(&f), &g);
            let rhs = mesh.l2_inner(&f, &mesh.gradient_adjoint(&g));
            assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-12);
        }
    }

    #[test]
    fn inverse_laplacian_roundtrip() {
        for mesh in [Mesh::periodic(PeriodicGrid::new(64, 2.0).unwrap()), radial_mesh(65, 2)] {
            let a: Vec<f64> = (0..mesh.n_values()).map(|i| (i as f64 * 0.37).sin() + 0.2).collect();
            let a = mesh.project(a).unwrap();
            let u = mesh.inverse_laplacian(&a.values);
            let back = mesh.laplacian(&u);
            for i in 0..mesh.n_free() {
                assert!((back[i] - a.values[i]).abs() <= 1e-10, "node {i}");
            }
        }
    }

    #[test]
    fn periodic_sine_is_eigenfunction() {
        let omega = 2.0;
        let mesh = Mesh::periodic(PeriodicGrid::new(256, omega).unwrap());
        let a = mesh.project(mesh.positions().iter().map(|x| (2.0 * PI * x / omega).sin()).collect()).unwrap();
        let inner = mesh.neg_sobolev_inner(&a, &a).unwrap();
        let l2 = mesh.l2_inner(&a.values, &a.values);
        assert!((inner / ((omega / (2.0 * PI)).powi(2) * l2) - 1.0).abs() < 1e-4);
    }

    #[test]
    fn hat_energy() {
        let omega = 2.0;
        let mesh = Mesh::periodic(PeriodicGrid::new(64, omega).unwrap());
        let hat: Vec<f64> = mesh.positions().iter().map(|&x| 0.5 - (x - 1.0).abs()).collect();
        let f = mesh.project(hat).unwrap();
        let params = EnergyDensityParams::new(1.0, 2.0, 1).unwrap();
        assert_abs_diff_eq!(mesh.discrete_energy(&f, &params).unwrap(), omega * 1.5, epsilon = 1e-12);
        assert_eq!(mesh.discrete_energy(&mesh.zero(), &params).unwrap(), 0.0);
    }

    #[test]
    fn invariants_enforced() {
        let mesh = radial_mesh(9, 2);
        assert!(mesh.function(vec![1.0; 9]).is_err());
        let p = Mesh::periodic(PeriodicGrid::new(8, 1.0).unwrap());
        assert!(p.function(vec![1.0; 8]).is_err());
        assert!(p.neg_sobolev_inner(&mesh.zero(), &p.zero()).is_err());
        assert!(PeriodicGrid::new(3, 1.0).is_err());
    }
}
