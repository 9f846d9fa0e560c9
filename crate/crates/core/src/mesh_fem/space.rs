use faer::c64;
use serde::{Deserialize, Serialize};

use super::mesh::Mesh;
use crate::coefficients::field::Point;
use crate::error::{Error, Result};
use crate::linalg::SparseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpaceKind {
    Scalar,
    /// Scalar with homogeneous Dirichlet data on the whole boundary.
    ScalarDirichlet,
    /// Vector field with `n·ξ = 0` on the boundary.
    VectorNormal,
    VectorFree,
}

impl SpaceKind {
    pub fn is_vector(self) -> bool {
        matches!(self, SpaceKind::VectorNormal | SpaceKind::VectorFree)
    }
}

/// Values and first derivatives of the 1D Lagrange basis on equispaced nodes
/// of `[0, 1]`.
pub fn lagrange_1d(k: usize, t: f64) -> (Vec<f64>, Vec<f64>) {
    let nodes: Vec<f64> = (0..=k).map(|i| i as f64 / k as f64).collect();
    let mut vals = vec![0.0; k + 1];
    let mut ders = vec![0.0; k + 1];
    for a in 0..=k {
        let mut v = 1.0;
        let mut d = 0.0;
        for m in 0..=k {
            if m == a {
                continue;
            }
            let denom = nodes[a] - nodes[m];
            // product rule, accumulated
            d = d * (t - nodes[m]) / denom + v / denom;
            v *= (t - nodes[m]) / denom;
        }
        vals[a] = v;
        ders[a] = d;
    }
    (vals, ders)
}

/// Continuous tensor-product Lagrange space of degree 1 or 2 on a structured
/// mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct FESpace {
    pub mesh: Mesh,
    pub degree: usize,
    pub kind: SpaceKind,
    /// Components per node.
    pub ncomp: usize,
    /// Nodes per axis.
    pub nn: [usize; 2],
    /// `node * ncomp + comp` → dof, `None` when constrained to zero.
    pub node_dof: Vec<Option<usize>>,
    /// dof → `(node, comp)`.
    pub dofs: Vec<(usize, usize)>,
}

impl FESpace {
    pub fn new(mesh: &Mesh, degree: usize, kind: SpaceKind) -> Result<FESpace> {
        if !(1..=2).contains(&degree) {
            return Err(Error::UnsupportedDegree(degree));
        }
        let dim = mesh.dim;
        let ncomp = if kind.is_vector() { dim } else { 1 };
        let nn = if dim == 1 {
            [degree * mesh.n[0] + 1, 1]
        } else {
            [degree * mesh.n[0] + 1, degree * mesh.n[1] + 1]
        };
        let num_nodes = nn[0] * nn[1];
        let mut node_dof = vec![None; num_nodes * ncomp];
        let mut dofs = Vec::new();
        for node in 0..num_nodes {
            let (i, j) = (node % nn[0], node / nn[0]);
            let on_x = i == 0 || i == nn[0] - 1;
            let on_y = dim == 2 && (j == 0 || j == nn[1] - 1);
            for comp in 0..ncomp {
                let constrained = match kind {
                    SpaceKind::Scalar | SpaceKind::VectorFree => false,
                    SpaceKind::ScalarDirichlet => on_x || on_y,
                    SpaceKind::VectorNormal => (comp == 0 && on_x) || (comp == 1 && on_y),
                };
                if !constrained {
                    node_dof[node * ncomp + comp] = Some(dofs.len());
                    dofs.push((node, comp));
                }
            }
        }
        Ok(FESpace {
            mesh: mesh.clone(),
            degree,
            kind,
            ncomp,
            nn,
            node_dof,
            dofs,
        })
    }

    pub fn dim(&self) -> usize {
        self.mesh.dim
    }

    pub fn ndofs(&self) -> usize {
        self.dofs.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.nn[0] * self.nn[1]
    }

    /// Unconstrained Lagrange dof count.
    pub fn full_dofs(&self) -> usize {
        self.num_nodes() * self.ncomp
    }

    pub fn node_coord(&self, node: usize) -> [f64; 2] {
        let (i, j) = (node % self.nn[0], node / self.nn[0]);
        let m = &self.mesh;
        let along = |axis: usize, i: usize| -> f64 {
            let count = self.nn[axis] - 1;
            if i == count {
                m.hi[axis]
            } else {
                m.lo[axis] + (i as f64 / count as f64) * (m.hi[axis] - m.lo[axis])
            }
        };
        if self.dim() == 1 {
            [along(0, i), 0.0]
        } else {
            [along(0, i), along(1, j)]
        }
    }

    pub fn node_point(&self, node: usize) -> Point {
        let c = self.node_coord(node);
        [c[0], c[1], 0.0]
    }

    /// Local nodes per cell.
    pub fn nodes_per_cell(&self) -> usize {
        (self.degree + 1).pow(self.dim() as u32)
    }

    /// Global node ids of a cell, local index `a + (k+1) b`.
    pub fn cell_nodes(&self, cell: usize) -> Vec<usize> {
        let k = self.degree;
        let (ci, cj) = self.mesh.cell_index(cell);
        if self.dim() == 1 {
            return (0..=k).map(|a| k * ci + a).collect();
        }
        let mut out = Vec::with_capacity((k + 1) * (k + 1));
        for b in 0..=k {
            for a in 0..=k {
                out.push((k * ci + a) + self.nn[0] * (k * cj + b));
            }
        }
        out
    }

    /// Reference basis values and reference gradients at `s ∈ [0,1]^dim`.
    pub fn ref_basis(&self, s: &[f64; 2]) -> (Vec<f64>, Vec<[f64; 2]>) {
        let k = self.degree;
        let (vx, dx) = lagrange_1d(k, s[0]);
        if self.dim() == 1 {
            return (vx, dx.iter().map(|&d| [d, 0.0]).collect());
        }
        let (vy, dy) = lagrange_1d(k, s[1]);
        let mut vals = Vec::with_capacity((k + 1) * (k + 1));
        let mut grads = Vec::with_capacity((k + 1) * (k + 1));
        for b in 0..=k {
            for a in 0..=k {
                vals.push(vx[a] * vy[b]);
                grads.push([dx[a] * vy[b], vx[a] * dy[b]]);
            }
        }
        (vals, grads)
    }

    /// Dof of `(node, comp)` if free.
    pub fn dof(&self, node: usize, comp: usize) -> Option<usize> {
        self.node_dof[node * self.ncomp + comp]
    }

    /// Nodal interpolant of a scalar function; constrained nodes are dropped.
    pub fn interpolate_scalar(&self, f: impl Fn(&Point) -> f64) -> Vec<f64> {
        self.dofs.iter().map(|&(node, _)| f(&self.node_point(node))).collect()
    }

    /// Nodal interpolant of a vector function. Constrained components must
    /// vanish at their nodes (relative tolerance 1e-12).
    pub fn interpolate_vector(&self, f: impl Fn(&Point) -> [f64; 3]) -> Result<Vec<f64>> {
        let values: Vec<[f64; 3]> = (0..self.num_nodes()).map(|n| f(&self.node_point(n))).collect();
        let scale = values
            .iter()
            .flat_map(|v| v[..self.ncomp].iter())
            .fold(1.0f64, |m, v| m.max(v.abs()));
        let mut out = vec![0.0; self.ndofs()];
        for (node, v) in values.iter().enumerate() {
            for comp in 0..self.ncomp {
                match self.dof(node, comp) {
                    Some(d) => out[d] = v[comp],
                    None => {
                        if v[comp].abs() > 1e-12 * scale {
                            return Err(Error::NodalConstraintViolation {
                                node,
                                component: comp,
                                value: v[comp],
                            });
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Evaluate a discrete function at a point: components `0..ncomp`.
    pub fn eval_at(&self, coeffs: &[c64], x: &[f64; 2]) -> Vec<c64> {
        let (cell, s) = self.mesh.locate(x);
        let (vals, _) = self.ref_basis(&s);
        let nodes = self.cell_nodes(cell);
        let mut out = vec![c64::new(0.0, 0.0); self.ncomp];
        for (a, &node) in nodes.iter().enumerate() {
            for (comp, o) in out.iter_mut().enumerate() {
                if let Some(d) = self.dof(node, comp) {
                    *o += coeffs[d] * vals[a];
                }
            }
        }
        out
    }

    /// Values at every node, constrained components reported as zero.
    pub fn node_values(&self, coeffs: &[c64]) -> Vec<Vec<c64>> {
        (0..self.num_nodes())
            .map(|node| {
                (0..self.ncomp)
                    .map(|comp| self.dof(node, comp).map_or(c64::new(0.0, 0.0), |d| coeffs[d]))
                    .collect()
            })
            .collect()
    }

    /// Matrix mapping coefficients of `self` to those of `fine` by nodal
    /// evaluation. Exact when `fine` contains `self` (nested meshes, degree
    /// not lower, same kind).
    pub fn prolongation(&self, fine: &FESpace) -> Result<SparseMatrix> {
        if fine.dim() != self.dim() || fine.ncomp != self.ncomp {
            return Err(Error::DimensionMismatch("prolongation between incompatible spaces".into()));
        }
        let mut trip = Vec::new();
        for (row, &(node, comp)) in fine.dofs.iter().enumerate() {
            let x = fine.node_coord(node);
            let (cell, s) = self.mesh.locate(&x);
            let (vals, _) = self.ref_basis(&s);
            for (a, &cn) in self.cell_nodes(cell).iter().enumerate() {
                if vals[a].abs() < 1e-14 {
                    continue;
                }
                if let Some(col) = self.dof(cn, comp) {
                    trip.push((row, col, c64::new(vals[a], 0.0)));
                }
            }
        }
        Ok(SparseMatrix::from_triplets(fine.ndofs(), self.ndofs(), trip))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lagrange_partition_of_unity() {
        for k in 1..=2 {
            for &t in &[0.0, 0.13, 0.5, 0.91, 1.0] {
                let (v, d) = lagrange_1d(k, t);
                assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-15);
                assert!(d.iter().sum::<f64>().abs() < 1e-14);
            }
        }
        let (v, d) = lagrange_1d(2, 0.25);
        // P2 nodes 0, 1/2, 1: (t-1/2)(t-1)/(1/2) etc.
        assert!((v[0] - 0.375).abs() < 1e-15);
        assert!((v[1] - 0.75).abs() < 1e-15);
        assert!((v[2] + 0.125).abs() < 1e-15);
        assert!((d[0] + 2.0).abs() < 1e-14);
    }

    #[test]
    fn dof_counts_in_1d() {
        let m = Mesh::interval(-1.0, 1.0, 5).unwrap();
        assert_eq!(FESpace::new(&m, 1, SpaceKind::Scalar).unwrap().ndofs(), 6);
        assert_eq!(FESpace::new(&m, 1, SpaceKind::VectorNormal).unwrap().ndofs(), 4);
        assert_eq!(FESpace::new(&m, 2, SpaceKind::Scalar).unwrap().ndofs(), 11);
        assert!(matches!(FESpace::new(&m, 3, SpaceKind::Scalar), Err(Error::UnsupportedDegree(3))));
    }

    #[test]
    fn corner_nodes_fully_constrained() {
        // 2×2 unit square, P1: 9 nodes, 18 raw components.
        // x-component fixed on the 6 nodes with x ∈ {0,1}, y-component on the
        // 6 nodes with y ∈ {0,1}; corners lose both: 18 − 12 = 6 free dofs.
        let m = Mesh::rect([0.0, 1.0], [0.0, 1.0], 2, 2).unwrap();
        let s = FESpace::new(&m, 1, SpaceKind::VectorNormal).unwrap();
        assert_eq!(s.ndofs(), 6);
        for corner in [0, 2, 6, 8] {
            assert_eq!(s.dof(corner, 0), None);
            assert_eq!(s.dof(corner, 1), None);
        }
        // edge midpoint of the bottom edge keeps its tangential component
        assert!(s.dof(1, 0).is_some());
        assert!(s.dof(1, 1).is_none());
    }

    #[test]
    fn interpolation_checks_normal_constraint() {
        let m = Mesh::rect([0.0, 1.0], [0.0, 1.0], 4, 4).unwrap();
        let s = FESpace::new(&m, 1, SpaceKind::VectorNormal).unwrap();
        let bad = s.interpolate_vector(|x| [x[1] * (1.0 - x[1]), 0.0, 0.0]);
        assert!(matches!(bad, Err(Error::NodalConstraintViolation { .. })));
        let good = s.interpolate_vector(|x| [x[0] * (1.0 - x[0]), x[1] * (1.0 - x[1]), 0.0]);
        assert!(good.is_ok());
    }

    #[test]
    fn prolongation_reproduces_coarse_functions() {
        let m = Mesh::rect([0.0, 2.0], [0.0, 1.0], 3, 2).unwrap();
        let coarse = FESpace::new(&m, 1, SpaceKind::Scalar).unwrap();
        let fine = FESpace::new(&m.refine(), 2, SpaceKind::Scalar).unwrap();
        let f = |x: &Point| 1.0 + 2.0 * x[0] - x[1] + 0.5 * x[0] * x[1];
        let uc: Vec<c64> = coarse.interpolate_scalar(f).into_iter().map(|v| c64::new(v, 0.0)).collect();
        let uf = coarse.prolongation(&fine).unwrap().matvec(&uc);
        let expected = fine.interpolate_scalar(f);
        for (a, b) in uf.iter().zip(&expected) {
            assert!((a.re - b).abs() < 1e-13);
        }
    }
}
