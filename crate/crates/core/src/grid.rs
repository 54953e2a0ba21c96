//! Tensor-product space-time grids, interior-node fields, trapezoidal
//! quadrature and field norms.
//!
//! Fields carry interior nodes only; boundary values are the homogeneous
//! Dirichlet zero. Interior nodes are ordered lexicographically with `x1`
//! fastest, and fields are stored time-major.

use std::ops::{Index, IndexMut};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::problem::ProblemSpec;

#[derive(Clone, Debug, PartialEq)]
pub struct SpatialGrid {
    dim: usize,
    /// Nodes per axis including both boundary nodes.
    nodes: Vec<usize>,
    extents: Vec<f64>,
    spacing: Vec<f64>,
}

impl SpatialGrid {
    pub fn new(extents: &[f64], nodes: &[usize]) -> Result<SpatialGrid> {
        let dim = extents.len();
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidArgument(format!(
                "dim must be 1 or 2, got {dim}"
            )));
        }
        if nodes.len() != dim {
            return Err(Error::DimensionMismatch(format!(
                "{} node counts for a {dim}-d domain",
                nodes.len()
            )));
        }
        if let Some(&n) = nodes.iter().find(|&&n| n < 3) {
            return Err(Error::InvalidArgument(format!(
                "need at least 3 nodes per axis, got {n}"
            )));
        }
        if extents.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::InvalidArgument(format!("bad extents {extents:?}")));
        }
        let spacing = extents
            .iter()
            .zip(nodes)
            .map(|(&l, &n)| l / (n - 1) as f64)
            .collect();
        Ok(SpatialGrid {
            dim,
            nodes: nodes.to_vec(),
            extents: extents.to_vec(),
            spacing,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn extents(&self) -> &[f64] {
        &self.extents
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    /// Interior nodes per axis (`n_k - 2`), padded with 1 in 1-d.
    pub fn interior_shape(&self) -> [usize; 2] {
        [
            self.nodes[0] - 2,
            if self.dim == 2 { self.nodes[1] - 2 } else { 1 },
        ]
    }

    pub fn n_interior(&self) -> usize {
        let s = self.interior_shape();
        s[0] * s[1]
    }

    pub fn n_total(&self) -> usize {
        self.nodes.iter().product()
    }

    /// Interior multi-index of an interior node (0-based among interior
    /// nodes, so full-grid index is this plus one).
    pub fn interior_multi(&self, node: usize) -> [usize; 2] {
        let s = self.interior_shape();
        [node % s[0], node / s[0]]
    }

    pub fn interior_index(&self, i1: usize, i2: usize) -> usize {
        i1 + self.interior_shape()[0] * i2
    }

    /// Coordinates of a full-grid node given its per-axis indices.
    pub fn coords(&self, full: [usize; 2]) -> [f64; 2] {
        let mut x = [0.0; 2];
        for k in 0..self.dim {
            x[k] = if full[k] == self.nodes[k] - 1 {
                self.extents[k]
            } else {
                full[k] as f64 * self.spacing[k]
            };
        }
        x
    }

    pub fn interior_coords(&self, node: usize) -> [f64; 2] {
        let m = self.interior_multi(node);
        self.coords([m[0] + 1, if self.dim == 2 { m[1] + 1 } else { 0 }])
    }

    pub fn is_boundary(&self, full: [usize; 2]) -> bool {
        (0..self.dim).any(|k| full[k] == 0 || full[k] == self.nodes[k] - 1)
    }

    /// Volume element `prod h_k` carried by each interior node.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    pub fn domain_volume(&self) -> f64 {
        self.extents.iter().product()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimeGrid {
    levels: usize,
    horizon: f64,
    step: f64,
}

impl TimeGrid {
    pub fn new(horizon: f64, levels: usize) -> Result<TimeGrid> {
        if levels < 2 {
            return Err(Error::InvalidArgument(format!(
                "need at least 2 time levels, got {levels}"
            )));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidArgument(format!("bad horizon {horizon}")));
        }
        Ok(TimeGrid {
            levels,
            horizon,
            step: horizon / (levels - 1) as f64,
        })
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn time(&self, level: usize) -> f64 {
        if level == self.levels - 1 {
            self.horizon
        } else {
            level as f64 * self.step
        }
    }
}

/// Space-time grid shared by all fields of a computation.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub space: SpatialGrid,
    pub time: TimeGrid,
}

impl Grid {
    pub fn new(space: SpatialGrid, time: TimeGrid) -> Arc<Grid> {
        Arc::new(Grid { space, time })
    }

    /// Grid on the spec's domain and horizon. `nodes` has one entry per axis.
    pub fn for_problem(spec: &ProblemSpec, nodes: &[usize], levels: usize) -> Result<Arc<Grid>> {
        Ok(Grid::new(
            SpatialGrid::new(&spec.extents, nodes)?,
            TimeGrid::new(spec.horizon, levels)?,
        ))
    }

    pub fn n_interior(&self) -> usize {
        self.space.n_interior()
    }

    pub fn levels(&self) -> usize {
        self.time.levels()
    }

    /// Weight `tau * prod h_k` of one interior node on one implicit time
    /// level. This is the weight of the discrete objective and of the
    /// control inner product; level 0 carries weight zero there because
    /// the implicit scheme never reads the control at `t = 0`.
    pub fn slab_weight(&self) -> f64 {
        self.time.step() * self.space.cell_volume()
    }

    /// Discrete `L^2(Q)` inner product on controls: levels `1..nt`,
    /// weight [`Grid::slab_weight`].
    pub fn control_inner(&self, a: &SpaceTimeField, b: &SpaceTimeField) -> f64 {
        let n = self.n_interior();
        let s: f64 = a.data[n..]
            .iter()
            .zip(&b.data[n..])
            .map(|(x, y)| x * y)
            .sum();
        s * self.slab_weight()
    }

    pub fn control_norm(&self, a: &SpaceTimeField) -> f64 {
        self.control_inner(a, a).sqrt()
    }
}

fn same_grid(a: &Arc<Grid>, b: &Arc<Grid>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

/// Scalar function on the interior nodes of every time level.
#[derive(Clone, Debug)]
pub struct SpaceTimeField {
    grid: Arc<Grid>,
    data: Vec<f64>,
}

impl PartialEq for SpaceTimeField {
    fn eq(&self, other: &Self) -> bool {
        same_grid(&self.grid, &other.grid) && self.data == other.data
    }
}

impl SpaceTimeField {
    pub fn zeros(grid: &Arc<Grid>) -> SpaceTimeField {
        SpaceTimeField {
            grid: grid.clone(),
            data: vec![0.0; grid.levels() * grid.n_interior()],
        }
    }

    pub fn constant(grid: &Arc<Grid>, c: f64) -> SpaceTimeField {
        SpaceTimeField {
            grid: grid.clone(),
            data: vec![c; grid.levels() * grid.n_interior()],
        }
    }

    pub fn from_vec(grid: &Arc<Grid>, data: Vec<f64>) -> Result<SpaceTimeField> {
        let want = grid.levels() * grid.n_interior();
        if data.len() != want {
            return Err(Error::DimensionMismatch(format!(
                "field has {} values, grid needs {want}",
                data.len()
            )));
        }
        Ok(SpaceTimeField {
            grid: grid.clone(),
            data,
        })
    }

    /// Samples `f(x, t)` at every interior node and level.
    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(&[f64], f64) -> f64) -> SpaceTimeField {
        let n = grid.n_interior();
        let mut data = Vec::with_capacity(grid.levels() * n);
        for j in 0..grid.levels() {
            let t = grid.time.time(j);
            for i in 0..n {
                let x = grid.space.interior_coords(i);
                data.push(f(&x[..grid.space.dim()], t));
            }
        }
        SpaceTimeField {
            grid: grid.clone(),
            data,
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn levels(&self) -> usize {
        self.grid.levels()
    }

    pub fn nodes(&self) -> usize {
        self.grid.n_interior()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn level(&self, j: usize) -> &[f64] {
        let n = self.nodes();
        &self.data[j * n..(j + 1) * n]
    }

    pub fn level_mut(&mut self, j: usize) -> &mut [f64] {
        let n = self.nodes();
        &mut self.data[j * n..(j + 1) * n]
    }

    pub fn check_aligned(&self, other: &SpaceTimeField, what: &str) -> Result<()> {
        if same_grid(&self.grid, &other.grid) {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!(
                "{what}: fields live on different grids"
            )))
        }
    }

    pub fn check_on(&self, grid: &Arc<Grid>, what: &str) -> Result<()> {
        if same_grid(&self.grid, grid) {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!(
                "{what}: field is not on this grid"
            )))
        }
    }

    pub fn check_finite(&self, what: &str) -> Result<()> {
        if let Some(k) = self.data.iter().position(|v| !v.is_finite()) {
            let n = self.nodes();
            return Err(Error::NonFiniteEntry {
                what: what.to_string(),
                location: format!("level {}, node {}", k / n, k % n),
            });
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> SpaceTimeField {
        SpaceTimeField {
            grid: self.grid.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &SpaceTimeField, f: impl Fn(f64, f64) -> f64) -> SpaceTimeField {
        debug_assert_eq!(self.data.len(), other.data.len());
        SpaceTimeField {
            grid: self.grid.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &SpaceTimeField) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

impl Index<(usize, usize)> for SpaceTimeField {
    type Output = f64;
    fn index(&self, (level, node): (usize, usize)) -> &f64 {
        &self.data[level * self.grid.n_interior() + node]
    }
}

impl IndexMut<(usize, usize)> for SpaceTimeField {
    fn index_mut(&mut self, (level, node): (usize, usize)) -> &mut f64 {
        let n = self.grid.n_interior();
        &mut self.data[level * n + node]
    }
}

/// Tensor trapezoidal weights on the full space-time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureWeights {
    grid: Arc<Grid>,
    /// One weight per full-grid spatial node, `x1` fastest.
    space: Vec<f64>,
    time: Vec<f64>,
}

fn trapezoid_1d(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![h; n];
    w[0] = 0.5 * h;
    w[n - 1] = 0.5 * h;
    w
}

pub fn quadrature_weights(grid: &Arc<Grid>) -> QuadratureWeights {
    let sp = &grid.space;
    let w1 = trapezoid_1d(sp.nodes()[0], sp.spacing()[0]);
    let space = if sp.dim() == 1 {
        w1
    } else {
        let w2 = trapezoid_1d(sp.nodes()[1], sp.spacing()[1]);
        w2.iter()
            .flat_map(|&b| w1.iter().map(move |&a| a * b))
            .collect()
    };
    QuadratureWeights {
        grid: grid.clone(),
        space,
        time: trapezoid_1d(grid.levels(), grid.time.step()),
    }
}

impl QuadratureWeights {
    pub fn total(&self) -> f64 {
        let s: f64 = self.space.iter().sum();
        let t: f64 = self.time.iter().sum();
        s * t
    }

    pub fn time_weights(&self) -> &[f64] {
        &self.time
    }

    pub fn space_weights(&self) -> &[f64] {
        &self.space
    }

    /// Spatial weight of an interior node.
    pub fn interior_space_weight(&self, node: usize) -> f64 {
        let sp = &self.grid.space;
        let m = sp.interior_multi(node);
        let full = if sp.dim() == 1 {
            m[0] + 1
        } else {
            (m[0] + 1) + sp.nodes()[0] * (m[1] + 1)
        };
        self.space[full]
    }

    pub fn weight(&self, level: usize, node: usize) -> f64 {
        self.time[level] * self.interior_space_weight(node)
    }

    /// Integrates `f(x, t)` over the closed cylinder, boundary nodes included.
    pub fn integrate(&self, f: impl Fn(&[f64], f64) -> f64) -> f64 {
        let sp = &self.grid.space;
        let n1 = sp.nodes()[0];
        let mut total = 0.0;
        for (j, wt) in self.time.iter().enumerate() {
            let t = self.grid.time.time(j);
            let mut s = 0.0;
            for (k, ws) in self.space.iter().enumerate() {
                let x = sp.coords([k % n1, k / n1]);
                s += ws * f(&x[..sp.dim()], t);
            }
            total += wt * s;
        }
        total
    }

    /// Integrates a field (zero on the boundary).
    pub fn integrate_field(&self, v: &SpaceTimeField) -> f64 {
        let n = v.nodes();
        let ws: Vec<f64> = (0..n).map(|i| self.interior_space_weight(i)).collect();
        (0..v.levels())
            .map(|j| {
                let s: f64 = v.level(j).iter().zip(&ws).map(|(a, w)| a * w).sum();
                self.time[j] * s
            })
            .sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldNorms {
    pub l2: f64,
    pub linf: f64,
    /// `( int_0^T |v(t)|_{L2(Omega)}^2 dt )^{1/2}`; equal to `l2` for
    /// tensor weights, computed level by level.
    pub l2_time_l2_space: f64,
    /// `max_t |v(t)|_{L2(Omega)}`.
    pub linf_time_l2_space: f64,
}

pub fn field_norms(v: &SpaceTimeField, w: &QuadratureWeights) -> Result<FieldNorms> {
    v.check_on(&w.grid, "field_norms")?;
    let n = v.nodes();
    let ws: Vec<f64> = (0..n).map(|i| w.interior_space_weight(i)).collect();
    let per_level: Vec<f64> = (0..v.levels())
        .map(|j| v.level(j).iter().zip(&ws).map(|(a, w)| w * a * a).sum())
        .collect();
    let l2_sq: f64 = v
        .as_slice()
        .iter()
        .enumerate()
        .map(|(k, a)| w.time[k / n] * ws[k % n] * a * a)
        .sum();
    let lt: f64 = per_level.iter().zip(&w.time).map(|(s, wt)| wt * s).sum();
    Ok(FieldNorms {
        l2: l2_sq.sqrt(),
        linf: v.max_abs(),
        l2_time_l2_space: lt.sqrt(),
        linf_time_l2_space: per_level.iter().fold(0.0f64, |m, s| m.max(s.sqrt())),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid(ext: &[f64], nodes: &[usize], t: f64, nt: usize) -> Arc<Grid> {
        Grid::new(
            SpatialGrid::new(ext, nodes).unwrap(),
            TimeGrid::new(t, nt).unwrap(),
        )
    }

    #[test]
    fn grid_validation() {
        assert!(SpatialGrid::new(&[1.0], &[2]).is_err());
        assert!(SpatialGrid::new(&[1.0, 1.0], &[5]).is_err());
        assert!(SpatialGrid::new(&[-1.0], &[5]).is_err());
        assert!(TimeGrid::new(1.0, 1).is_err());
        let tg = TimeGrid::new(2.0, 5).unwrap();
        assert_eq!(tg.time(0), 0.0);
        assert_eq!(tg.time(4), 2.0);
    }

    #[test]
    fn interior_and_boundary_partition() {
        let sg = SpatialGrid::new(&[1.0, 2.0], &[5, 4]).unwrap();
        let mut interior = 0;
        for i2 in 0..4 {
            for i1 in 0..5 {
                if !sg.is_boundary([i1, i2]) {
                    interior += 1;
                }
            }
        }
        assert_eq!(interior, sg.n_interior());
        assert_eq!(sg.interior_coords(0), [0.25, 2.0 / 3.0]);
        let last = sg.n_interior() - 1;
        assert_eq!(sg.interior_multi(last), [2, 1]);
    }

    #[test]
    fn trapezoid_pattern_small_case() {
        let g = grid(&[1.0], &[3], 1.0, 2);
        let w = quadrature_weights(&g);
        assert_eq!(w.space_weights(), &[0.25, 0.5, 0.25]);
        assert_eq!(w.time_weights(), &[0.5, 0.5]);
        assert_eq!(w.weight(0, 0), 0.25);
    }

    #[test]
    fn total_mass_equals_cylinder_volume() {
        for (ext, nodes, t, nt) in [
            (vec![1.0], vec![7], 1.0, 5),
            (vec![2.5], vec![33], 0.3, 17),
            (vec![1.0, 1.0], vec![5, 9], 1.0, 3),
            (vec![0.7, 3.0], vec![12, 4], 2.0, 11),
        ] {
            let g = grid(&ext, &nodes, t, nt);
            let w = quadrature_weights(&g);
            let vol: f64 = ext.iter().product::<f64>() * t;
            assert!((w.total() - vol).abs() <= 1e-12 * vol);
            assert!((w.integrate(|_, _| 1.0) - vol).abs() <= 1e-12 * vol);
        }
    }

    #[test]
    fn norms_of_simple_fields() {
        let g = grid(&[1.0, 1.0], &[9, 9], 1.0, 5);
        let w = quadrature_weights(&g);
        let z = field_norms(&SpaceTimeField::zeros(&g), &w).unwrap();
        assert_eq!((z.l2, z.linf, z.l2_time_l2_space), (0.0, 0.0, 0.0));
        // constant 2 over the closed cylinder, boundary included
        let l2 = w.integrate(|_, _| 4.0).sqrt();
        assert!((l2 - 2.0).abs() < 1e-12);
        let c = field_norms(&SpaceTimeField::constant(&g, 2.0), &w).unwrap();
        assert_eq!(c.linf, 2.0);
    }

    #[test]
    fn sine_norm_converges_at_second_order() {
        // |sin(pi x)|_{L2(Q)} on [0,1] x [0,1] is sqrt(1/2)
        let exact = 0.5f64.sqrt();
        let mut errs = Vec::new();
        for n in [9, 17, 33, 65] {
            let g = grid(&[1.0], &[n], 1.0, 3);
            let w = quadrature_weights(&g);
            let v = SpaceTimeField::from_fn(&g, |x, _| (PI * x[0]).sin());
            let nrm = field_norms(&v, &w).unwrap();
            assert!((nrm.l2 - nrm.l2_time_l2_space).abs() < 1e-14);
            errs.push((nrm.l2 - exact).abs());
        }
        // the trapezoid rule is spectrally accurate for this periodic-like
        // integrand, so the error is at round-off already
        assert!(errs.iter().all(|&e| e < 1e-12), "{errs:?}");
    }

    #[test]
    fn quadrature_is_second_order_for_smooth_integrands() {
        let exact = (1.0 - (-1.0f64).exp()) * (2.0f64.exp() - 1.0) / 2.0;
        let mut errs = Vec::new();
        for k in 0..4 {
            let n = 4 * (1 << k) + 1;
            let g = grid(&[1.0], &[n], 1.0, n);
            let w = quadrature_weights(&g);
            errs.push((w.integrate(|x, t| (2.0 * x[0]).exp() * (-t).exp()) - exact).abs());
        }
        for pair in errs.windows(2) {
            let order = (pair[0] / pair[1]).log2();
            assert!(order >= 1.9, "order {order} from {errs:?}");
        }
    }

    #[test]
    fn control_inner_skips_initial_level() {
        let g = grid(&[1.0], &[4], 1.0, 3);
        let mut a = SpaceTimeField::zeros(&g);
        a[(0, 0)] = 5.0;
        assert_eq!(g.control_inner(&a, &a), 0.0);
        a[(2, 1)] = 2.0;
        let w = g.slab_weight();
        assert!((g.control_inner(&a, &a) - 4.0 * w).abs() < 1e-15);
    }

    #[test]
    fn alignment_checks() {
        let g1 = grid(&[1.0], &[4], 1.0, 3);
        let g2 = grid(&[1.0], &[5], 1.0, 3);
        let a = SpaceTimeField::zeros(&g1);
        let b = SpaceTimeField::zeros(&g2);
        assert!(a.check_aligned(&b, "x").is_err());
        let g1b = grid(&[1.0], &[4], 1.0, 3);
        assert!(a.check_aligned(&SpaceTimeField::zeros(&g1b), "x").is_ok());
        assert!(SpaceTimeField::from_vec(&g1, vec![0.0; 5]).is_err());
        let mut c = SpaceTimeField::zeros(&g1);
        c[(1, 1)] = f64::NAN;
        assert!(matches!(
            c.check_finite("c"),
            Err(Error::NonFiniteEntry { .. })
        ));
    }
}
