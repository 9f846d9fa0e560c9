use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Boundary facet: a vertex in 1D, an edge in 2D.
#[derive(Debug, Clone, PartialEq)]
pub struct Facet {
    pub vertices: Vec<usize>,
    /// Outward unit normal, axis aligned.
    pub normal: [f64; 2],
    pub cell: usize,
}

/// Uniform structured mesh of an interval or an axis-aligned rectangle.
/// Cells are segments or quadrilaterals, numbered x-fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub dim: usize,
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    /// Cells per axis; `n[1] == 1` in 1D.
    pub n: [usize; 2],
    pub level: usize,
    pub vertices: Vec<[f64; 2]>,
    pub cells: Vec<Vec<usize>>,
    pub boundary: Vec<Facet>,
}

fn check_range(a: f64, b: f64, n: usize, axis: &str) -> Result<()> {
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(Error::InvalidRange(format!("{axis}-range [{a}, {b}] is empty")));
    }
    if n == 0 {
        return Err(Error::InvalidRange(format!("{axis}-axis needs at least one cell")));
    }
    Ok(())
}

impl Mesh {
    pub fn interval(a: f64, b: f64, n: usize) -> Result<Mesh> {
        check_range(a, b, n, "x")?;
        Ok(Self::build(1, [a, 0.0], [b, 0.0], [n, 1], 0))
    }

    pub fn rect(x: [f64; 2], y: [f64; 2], nx: usize, ny: usize) -> Result<Mesh> {
        check_range(x[0], x[1], nx, "x")?;
        check_range(y[0], y[1], ny, "y")?;
        Ok(Self::build(2, [x[0], y[0]], [x[1], y[1]], [nx, ny], 0))
    }

    fn build(dim: usize, lo: [f64; 2], hi: [f64; 2], n: [usize; 2], level: usize) -> Mesh {
        let mut m = Mesh {
            dim,
            lo,
            hi,
            n,
            level,
            vertices: Vec::new(),
            cells: Vec::new(),
            boundary: Vec::new(),
        };
        let [nx, ny] = n;
        if dim == 1 {
            m.vertices = (0..=nx).map(|i| [m.coord(0, i, nx), 0.0]).collect();
            m.cells = (0..nx).map(|i| vec![i, i + 1]).collect();
            m.boundary = vec![
                Facet { vertices: vec![0], normal: [-1.0, 0.0], cell: 0 },
                Facet { vertices: vec![nx], normal: [1.0, 0.0], cell: nx - 1 },
            ];
            return m;
        }
        let vid = |i: usize, j: usize| i + (nx + 1) * j;
        for j in 0..=ny {
            for i in 0..=nx {
                m.vertices.push([m.coord(0, i, nx), m.coord(1, j, ny)]);
            }
        }
        for j in 0..ny {
            for i in 0..nx {
                m.cells.push(vec![vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)]);
            }
        }
        for i in 0..nx {
            m.boundary.push(Facet { vertices: vec![vid(i, 0), vid(i + 1, 0)], normal: [0.0, -1.0], cell: i });
            m.boundary.push(Facet {
                vertices: vec![vid(i, ny), vid(i + 1, ny)],
                normal: [0.0, 1.0],
                cell: i + nx * (ny - 1),
            });
        }
        for j in 0..ny {
            m.boundary.push(Facet { vertices: vec![vid(0, j), vid(0, j + 1)], normal: [-1.0, 0.0], cell: nx * j });
            m.boundary.push(Facet {
                vertices: vec![vid(nx, j), vid(nx, j + 1)],
                normal: [1.0, 0.0],
                cell: nx - 1 + nx * j,
            });
        }
        m
    }

    /// Coordinate of grid line `i` of `count` cells along `axis`; the end
    /// points are reproduced exactly so that refinement nests vertices.
    fn coord(&self, axis: usize, i: usize, count: usize) -> f64 {
        if i == count {
            return self.hi[axis];
        }
        let t = i as f64 / count as f64;
        self.lo[axis] + t * (self.hi[axis] - self.lo[axis])
    }

    /// Uniform refinement: each cell split in two (1D) or four (2D).
    pub fn refine(&self) -> Mesh {
        let n = if self.dim == 1 { [2 * self.n[0], 1] } else { [2 * self.n[0], 2 * self.n[1]] };
        Self::build(self.dim, self.lo, self.hi, n, self.level + 1)
    }

    pub fn refined(&self, times: usize) -> Mesh {
        (0..times).fold(self.clone(), |m, _| m.refine())
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    /// Cell widths per axis.
    pub fn h(&self) -> [f64; 2] {
        let hx = (self.hi[0] - self.lo[0]) / self.n[0] as f64;
        if self.dim == 1 {
            [hx, 1.0]
        } else {
            [hx, (self.hi[1] - self.lo[1]) / self.n[1] as f64]
        }
    }

    /// Largest cell diameter.
    pub fn h_max(&self) -> f64 {
        let [hx, hy] = self.h();
        if self.dim == 1 {
            hx
        } else {
            hx.hypot(hy)
        }
    }

    /// Structured index `(i, j)` of a cell.
    pub fn cell_index(&self, cell: usize) -> (usize, usize) {
        (cell % self.n[0], cell / self.n[0])
    }

    /// Lower-left corner of a cell.
    pub fn cell_origin(&self, cell: usize) -> [f64; 2] {
        let (i, j) = self.cell_index(cell);
        let [hx, hy] = self.h();
        if self.dim == 1 {
            [self.lo[0] + i as f64 * hx, 0.0]
        } else {
            [self.lo[0] + i as f64 * hx, self.lo[1] + j as f64 * hy]
        }
    }

    pub fn cell_measure(&self, _cell: usize) -> f64 {
        let [hx, hy] = self.h();
        if self.dim == 1 {
            hx
        } else {
            hx * hy
        }
    }

    pub fn measure(&self) -> f64 {
        (0..self.num_cells()).map(|c| self.cell_measure(c)).sum()
    }

    /// Cell containing `x` and the reference coordinates of `x` in it.
    pub fn locate(&self, x: &[f64; 2]) -> (usize, [f64; 2]) {
        let [hx, hy] = self.h();
        let idx = |axis: usize, h: f64| -> (usize, f64) {
            let n = self.n[axis];
            let t = (x[axis] - self.lo[axis]) / h;
            let i = (t.floor().max(0.0) as usize).min(n - 1);
            (i, t - i as f64)
        };
        let (i, s) = idx(0, hx);
        if self.dim == 1 {
            return (i, [s, 0.0]);
        }
        let (j, t) = idx(1, hy);
        (i + self.n[0] * j, [s, t])
    }

    /// Plain-text export: a `#` header followed by one record per line.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# galbrun mesh");
        let _ = writeln!(s, "# dimension {}", self.dim);
        let _ = writeln!(s, "# vertices {}", self.vertices.len());
        let _ = writeln!(s, "# cells {}", self.cells.len());
        let _ = writeln!(s, "# boundary_facets {}", self.boundary.len());
        let _ = writeln!(s, "# level {}", self.level);
        let _ = writeln!(s, "# records: v <coords>; c <vertex ids>; b <vertex ids> n <normal>");
        for v in &self.vertices {
            let _ = writeln!(s, "v {}", join(&v[..self.dim]));
        }
        for c in &self.cells {
            let _ = writeln!(s, "c {}", join_ids(c));
        }
        for f in &self.boundary {
            let _ = writeln!(s, "b {} n {}", join_ids(&f.vertices), join(&f.normal[..self.dim]));
        }
        s
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(" ")
}

fn join_ids(v: &[usize]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}
