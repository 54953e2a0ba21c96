//! Conservative finite-difference assembly of `A y = -sum_ij D_j(a_ij D_i y)`
//! on interior nodes with homogeneous Dirichlet elimination.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::grid::SpatialGrid;
use crate::problem::ProblemSpec;

/// Compressed sparse row matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from per-row sorted `(column, value)` maps.
    fn from_rows(rows: Vec<BTreeMap<usize, f64>>) -> CsrMatrix {
        let n = rows.len();
        let mut indptr = Vec::with_capacity(n + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for row in rows {
            for (c, v) in row {
                indices.push(c);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        CsrMatrix {
            n,
            indptr,
            indices,
            values,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.indptr[i]..self.indptr[i + 1];
        self.indices[r.clone()]
            .iter()
            .copied()
            .zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn matvec(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate().take(self.n) {
            *o = self.row(i).map(|(c, v)| v * x[c]).sum();
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.matvec(x, &mut out);
        out
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut rows = vec![BTreeMap::new(); self.n];
        for i in 0..self.n {
            for (c, v) in self.row(i) {
                rows[c].insert(i, v);
            }
        }
        CsrMatrix::from_rows(rows)
    }

    /// Largest `|i - j|` over stored entries.
    pub fn half_bandwidth(&self) -> usize {
        (0..self.n)
            .flat_map(|i| self.row(i).map(move |(c, _)| c.abs_diff(i)))
            .max()
            .unwrap_or(0)
    }

    pub fn max_row_sum(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (c, v) in self.row(i) {
                m[(i, c)] += v;
            }
        }
        m
    }
}

/// Discrete elliptic operator on interior nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteOperator {
    pub matrix: CsrMatrix,
    /// Assembled from the transposed coefficients (the formal adjoint).
    pub adjoint: bool,
}

/// Assembles `A` (or `A*` when `adjoint`) with a divergence-form stencil.
///
/// Diagonal coefficients use face values `(a(x) + a(x + h e_k)) / 2`; the
/// cross terms `a_12`, `a_21` use centered differences of centered
/// differences. With `a_ij = a_ji` the matrix is symmetric, and for any
/// coefficients the adjoint assembly equals the transpose entrywise.
pub fn assemble_operator(
    spec: &ProblemSpec,
    grid: &SpatialGrid,
    adjoint: bool,
) -> Result<DiscreteOperator> {
    if spec.dim != grid.dim() || spec.extents != grid.extents() {
        return Err(Error::DimensionMismatch(format!(
            "grid extents {:?} do not match problem domain {:?}",
            grid.extents(),
            spec.extents
        )));
    }
    let dim = grid.dim();
    let nodes = grid.nodes();
    let n1 = nodes[0];
    let n2 = if dim == 2 { nodes[1] } else { 1 };
    let h = grid.spacing();

    // nodal coefficient tables over the full grid, transposed for A*
    let mut coef = vec![vec![vec![0.0; n1 * n2]; dim]; dim];
    for i2 in 0..n2 {
        for i1 in 0..n1 {
            let x = grid.coords([i1, i2]);
            for (i, row) in coef.iter_mut().enumerate() {
                for (j, table) in row.iter_mut().enumerate() {
                    let (si, sj) = if adjoint { (j, i) } else { (i, j) };
                    let v = spec.coefficient(si, sj, &x[..dim]);
                    if !v.is_finite() {
                        return Err(Error::Assembly {
                            entry: format!("a{}{}", si + 1, sj + 1),
                            location: format!("x = {:?}", &x[..dim]),
                        });
                    }
                    table[i1 + n1 * i2] = v;
                }
            }
        }
    }
    let full = |p: [usize; 2]| p[0] + n1 * p[1];
    let interior = |p: [isize; 2]| -> Option<usize> {
        let ok1 = p[0] >= 1 && (p[0] as usize) < n1 - 1;
        let ok2 = if dim == 2 {
            p[1] >= 1 && (p[1] as usize) < n2 - 1
        } else {
            p[1] == 0
        };
        if ok1 && ok2 {
            let i2 = if dim == 2 { p[1] as usize - 1 } else { 0 };
            Some(grid.interior_index(p[0] as usize - 1, i2))
        } else {
            None
        }
    };

    let n = grid.n_interior();
    let mut rows: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n];
    for (row, entries) in rows.iter_mut().enumerate() {
        let m = grid.interior_multi(row);
        let p = [m[0] + 1, if dim == 2 { m[1] + 1 } else { 0 }];
        let pi = [p[0] as isize, p[1] as isize];
        let mut add = |q: [isize; 2], v: f64| {
            if let Some(c) = interior(q) {
                *entries.entry(c).or_insert(0.0) += v;
            }
        };
        for k in 0..dim {
            let table = &coef[k][k];
            let mut fwd = p;
            fwd[k] += 1;
            let mut bwd = p;
            bwd[k] -= 1;
            let a_here = table[full(p)];
            let a_plus = 0.5 * (a_here + table[full(fwd)]);
            let a_minus = 0.5 * (a_here + table[full(bwd)]);
            let h2 = h[k] * h[k];
            add(pi, (a_plus + a_minus) / h2);
            let mut q = pi;
            q[k] += 1;
            add(q, -a_plus / h2);
            let mut q = pi;
            q[k] -= 1;
            add(q, -a_minus / h2);
        }
        if dim == 2 {
            // -D_2(a_12 D_1 y) - D_1(a_21 D_2 y)
            let s = 1.0 / (4.0 * h[0] * h[1]);
            let a12 = &coef[0][1];
            let a21 = &coef[1][0];
            let at = |t: &Vec<f64>, d1: isize, d2: isize| {
                t[full([(pi[0] + d1) as usize, (pi[1] + d2) as usize])]
            };
            let (a12_n, a12_s) = (at(a12, 0, 1), at(a12, 0, -1));
            let (a21_e, a21_w) = (at(a21, 1, 0), at(a21, -1, 0));
            add([pi[0] + 1, pi[1] + 1], -(a12_n + a21_e) * s);
            add([pi[0] - 1, pi[1] + 1], (a12_n + a21_w) * s);
            add([pi[0] + 1, pi[1] - 1], (a12_s + a21_e) * s);
            add([pi[0] - 1, pi[1] - 1], -(a12_s + a21_w) * s);
        }
    }
    Ok(DiscreteOperator {
        matrix: CsrMatrix::from_rows(rows),
        adjoint,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{builtin_problem, Map};

    fn spec_with(dim: usize, coeffs: Vec<Vec<&str>>) -> ProblemSpec {
        let mut spec = builtin_problem(if dim == 1 {
            "tracking_box_1d"
        } else {
            "tracking_box_2d"
        })
        .unwrap();
        spec.coefficients = coeffs
            .into_iter()
            .map(|r| r.into_iter().map(|s| Map::parse(s).unwrap()).collect())
            .collect();
        spec
    }

    #[test]
    fn one_d_laplacian_stencil() {
        let mut spec = spec_with(1, vec![vec!["1"]]);
        spec.extents = vec![4.0];
        let grid = SpatialGrid::new(&[4.0], &[5]).unwrap();
        let a = assemble_operator(&spec, &grid, false).unwrap().matrix;
        assert_eq!(a.n(), 3);
        assert_eq!([a.get(1, 0), a.get(1, 1), a.get(1, 2)], [-1.0, 2.0, -1.0]);
        assert_eq!(a.get(0, 2), 0.0);
    }

    #[test]
    fn five_point_stencil_rows_sum_to_zero_inside() {
        let spec = spec_with(2, vec![vec!["1", "0"], vec!["0", "1"]]);
        let grid = SpatialGrid::new(&[1.0, 1.0], &[7, 7]).unwrap();
        let a = assemble_operator(&spec, &grid, false).unwrap().matrix;
        let h2 = grid.spacing()[0].powi(2);
        let row = grid.interior_index(2, 2);
        let entries: Vec<_> = a.row(row).filter(|(_, v)| *v != 0.0).collect();
        assert_eq!(entries.len(), 5);
        let sum: f64 = a.row(row).map(|(_, v)| v).sum();
        assert!(sum.abs() < 1e-9);
        assert!((a.get(row, row) - 4.0 / h2).abs() < 1e-9);
    }

    #[test]
    fn variable_coefficient_operator_is_spd() {
        let spec = spec_with(2, vec![vec!["1 + x1", "0"], vec!["0", "1 + x1"]]);
        let grid = SpatialGrid::new(&[1.0, 1.0], &[10, 10]).unwrap();
        let a = assemble_operator(&spec, &grid, false).unwrap().matrix;
        assert_eq!(a.n(), 64);
        let d = a.to_dense();
        let asym = (&d - d.transpose()).abs().max();
        assert!(asym <= 1e-12 * d.abs().max());
        let eig = d.symmetric_eigenvalues();
        assert!(eig.min() > 0.0);
    }

    #[test]
    fn anisotropic_cross_terms_symmetric_and_positive() {
        let spec = spec_with(
            2,
            vec![
                vec!["2 + x2", "0.5*(1 + x1*x2)"],
                vec!["0.5*(1 + x1*x2)", "1.5 + x1"],
            ],
        );
        let grid = SpatialGrid::new(&[1.0, 1.0], &[12, 12]).unwrap();
        let a = assemble_operator(&spec, &grid, false).unwrap().matrix;
        let d = a.to_dense();
        assert!((&d - d.transpose()).abs().max() <= 1e-12 * d.abs().max());
        assert!(d.symmetric_eigenvalues().min() > 0.0);
    }

    #[test]
    fn adjoint_assembly_is_exact_transpose() {
        let spec = spec_with(
            2,
            vec![vec!["1 + x1", "0.3*x2"], vec!["0.1 + 0.2*x1", "1 + x2^2"]],
        );
        let grid = SpatialGrid::new(&[1.0, 1.0], &[8, 9]).unwrap();
        let a = assemble_operator(&spec, &grid, false).unwrap();
        let at = assemble_operator(&spec, &grid, true).unwrap();
        assert!(at.adjoint);
        assert_eq!(a.matrix.transpose(), at.matrix);
    }

    #[test]
    fn non_finite_coefficient_reports_location() {
        let spec = spec_with(1, vec![vec!["1/(x1 - 0.5)^0"]]);
        let grid = SpatialGrid::new(&[1.0], &[5]).unwrap();
        assert!(assemble_operator(&spec, &grid, false).is_ok());
        let spec = spec_with(1, vec![vec!["1/(x1 - 0.5)"]]);
        match assemble_operator(&spec, &grid, false) {
            Err(Error::Assembly { location, .. }) => assert!(location.contains("0.5")),
            other => panic!("unexpected {other:?}"),
        }
    }
}
