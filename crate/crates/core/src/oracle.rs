//! Dense finite-dimensional reformulation of the discrete control problem
//! and a primal-dual active-set solver for it.
//!
//! Variables are `z = (y_1, ..., y_N, u_1, ..., u_N)` with `N = nt - 1`,
//! each block holding the interior nodes of one implicit level; `y_0` is
//! the fixed interpolated initial state and `u_0` does not enter. Rows of
//! `F` are the implicit Euler residuals of the state solver, rows of `G`
//! are `g` at every node of levels `1..N`, and the objective is the slab
//! weighted sum of `L`.
//!
//! With Lagrangian `J + lambda^T F + mu^T G`, stationarity in `u` reads
//! `w L_u - lambda + mu g_u = 0`, so the field multipliers are
//! `phi = lambda / w` and `e = mu / w` with `w` the slab weight.

use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::field_io::fmt17;
use crate::grid::{Grid, SpaceTimeField};
use crate::kkt::KktPoint;
use crate::operator::{assemble_operator, CsrMatrix};
use crate::problem::ProblemSpec;

/// Largest number of primal variables the dense oracle accepts.
pub const SIZE_GUARD: usize = 2000;
/// Largest number of active-set changes before giving up.
pub const CYCLING_GUARD: usize = 500;

pub struct NlpInstance {
    spec: ProblemSpec,
    grid: Arc<Grid>,
    a: CsrMatrix,
    y0: Vec<f64>,
    coords: Vec<[f64; 2]>,
    /// Interior nodes per level.
    pub n: usize,
    /// Implicit levels.
    pub levels: usize,
    /// Slab weight of every node.
    pub weight: f64,
}

/// Primal and dual pieces of one node of one implicit level.
struct NodeAt<'a> {
    x: &'a [f64],
    t: f64,
    y: f64,
    u: f64,
}

impl NlpInstance {
    /// Number of state (= control = equality = inequality) unknowns.
    pub fn m(&self) -> usize {
        self.n * self.levels
    }

    pub fn n_vars(&self) -> usize {
        2 * self.m()
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// Index of `y` at implicit level `j >= 1`, node `k`.
    pub fn y_index(&self, j: usize, k: usize) -> usize {
        (j - 1) * self.n + k
    }

    pub fn u_index(&self, j: usize, k: usize) -> usize {
        self.m() + self.y_index(j, k)
    }

    fn node(&self, z: &[f64], j: usize, k: usize) -> NodeAt<'_> {
        NodeAt {
            x: &self.coords[k][..self.spec.dim],
            t: self.grid.time.time(j),
            y: z[self.y_index(j, k)],
            u: z[self.u_index(j, k)],
        }
    }

    fn nodes(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (1..=self.levels).flat_map(move |j| (0..self.n).map(move |k| (j, k)))
    }

    /// Packs levels `1..nt` of a state and a control.
    pub fn pack(&self, y: &SpaceTimeField, u: &SpaceTimeField) -> Result<Vec<f64>> {
        y.check_on(&self.grid, "state")?;
        u.check_on(&self.grid, "control")?;
        let m = self.m();
        let mut z = vec![0.0; 2 * m];
        z[..m].copy_from_slice(&y.as_slice()[self.n..]);
        z[m..].copy_from_slice(&u.as_slice()[self.n..]);
        Ok(z)
    }

    /// Unpacks into fields; level 0 holds the initial state and a zero
    /// control.
    pub fn unpack(&self, z: &[f64]) -> (SpaceTimeField, SpaceTimeField) {
        let m = self.m();
        let mut y = SpaceTimeField::zeros(&self.grid);
        let mut u = SpaceTimeField::zeros(&self.grid);
        y.level_mut(0).copy_from_slice(&self.y0);
        y.as_mut_slice()[self.n..].copy_from_slice(&z[..m]);
        u.as_mut_slice()[self.n..].copy_from_slice(&z[m..]);
        (y, u)
    }

    pub fn objective(&self, z: &[f64]) -> f64 {
        let s: f64 = self
            .nodes()
            .map(|(j, k)| {
                let p = self.node(z, j, k);
                self.spec.lagrangian.value.at(p.x, p.t, p.y, p.u)
            })
            .sum();
        s * self.weight
    }

    pub fn objective_gradient(&self, z: &[f64]) -> DVector<f64> {
        let mut g = DVector::zeros(self.n_vars());
        for (j, k) in self.nodes() {
            let p = self.node(z, j, k);
            g[self.y_index(j, k)] = self.weight * self.spec.lagrangian.dy.at(p.x, p.t, p.y, p.u);
            g[self.u_index(j, k)] = self.weight * self.spec.lagrangian.du.at(p.x, p.t, p.y, p.u);
        }
        g
    }

    /// Implicit Euler residuals, one row per node of levels `1..nt`.
    pub fn eval_f(&self, z: &[f64]) -> DVector<f64> {
        let (n, m) = (self.n, self.m());
        let tau = self.grid.time.step();
        let mut out = DVector::zeros(m);
        let mut ay = vec![0.0; n];
        for j in 1..=self.levels {
            let yj = &z[(j - 1) * n..j * n];
            let prev = if j == 1 {
                &self.y0[..]
            } else {
                &z[(j - 2) * n..(j - 1) * n]
            };
            self.a.matvec(yj, &mut ay);
            for k in 0..n {
                out[(j - 1) * n + k] = (yj[k] - prev[k]) / tau + ay[k] + self.spec.f.value(yj[k])
                    - z[m + (j - 1) * n + k];
            }
        }
        out
    }

    pub fn jac_f(&self, z: &[f64]) -> DMatrix<f64> {
        let (n, m) = (self.n, self.m());
        let tau = self.grid.time.step();
        let mut jac = DMatrix::zeros(m, 2 * m);
        for j in 1..=self.levels {
            for k in 0..n {
                let row = (j - 1) * n + k;
                for (c, v) in self.a.row(k) {
                    jac[(row, (j - 1) * n + c)] += v;
                }
                jac[(row, row)] += 1.0 / tau + self.spec.f.slope(z[row]);
                if j > 1 {
                    jac[(row, row - n)] = -1.0 / tau;
                }
                jac[(row, m + row)] = -1.0;
            }
        }
        jac
    }

    pub fn eval_g(&self, z: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.m(),
            self.nodes().map(|(j, k)| {
                let p = self.node(z, j, k);
                self.spec.constraint.value.at(p.x, p.t, p.y, p.u)
            }),
        )
    }

    /// Row `i` of the constraint Jacobian has two entries, `(g_y, g_u)`.
    pub fn jac_g(&self, z: &[f64]) -> Vec<(f64, f64)> {
        self.nodes()
            .map(|(j, k)| {
                let p = self.node(z, j, k);
                (
                    self.spec.constraint.dy.at(p.x, p.t, p.y, p.u),
                    self.spec.constraint.du.at(p.x, p.t, p.y, p.u),
                )
            })
            .collect()
    }

    pub fn jac_g_dense(&self, z: &[f64]) -> DMatrix<f64> {
        let m = self.m();
        let mut jac = DMatrix::zeros(m, 2 * m);
        for (i, (gy, gu)) in self.jac_g(z).into_iter().enumerate() {
            jac[(i, i)] = gy;
            jac[(i, m + i)] = gu;
        }
        jac
    }

    /// Hessian of `J + lambda^T F + mu^T G`.
    pub fn hessian(&self, z: &[f64], lambda: &[f64], mu: &[f64]) -> DMatrix<f64> {
        let m = self.m();
        let w = self.weight;
        let mut h = DMatrix::zeros(2 * m, 2 * m);
        for (i, (j, k)) in self.nodes().enumerate() {
            let p = self.node(z, j, k);
            let l = self.spec.lagrangian.jet(p.x, p.t, p.y, p.u);
            let g = self.spec.constraint.jet(p.x, p.t, p.y, p.u);
            h[(i, i)] = w * l.dyy + lambda[i] * self.spec.f.curvature(p.y) + mu[i] * g.dyy;
            h[(i, m + i)] = w * l.dyu + mu[i] * g.dyu;
            h[(m + i, i)] = h[(i, m + i)];
            h[(m + i, m + i)] = w * l.duu + mu[i] * g.duu;
        }
        h
    }

    /// Largest relative deviation of the analytic Jacobians of `F` and
    /// `G` from central differences at `z`.
    pub fn jacobian_check(&self, z: &[f64]) -> f64 {
        let jf = self.jac_f(z);
        let jg = self.jac_g_dense(z);
        let mut worst = 0.0f64;
        let mut zp = z.to_vec();
        for c in 0..z.len() {
            let s = 1e-6 * z[c].abs().max(1.0);
            zp[c] = z[c] + s;
            let (fp, gp) = (self.eval_f(&zp), self.eval_g(&zp));
            zp[c] = z[c] - s;
            let (fm, gm) = (self.eval_f(&zp), self.eval_g(&zp));
            zp[c] = z[c];
            for r in 0..self.m() {
                let dfd = (fp[r] - fm[r]) / (2.0 * s);
                worst = worst.max((dfd - jf[(r, c)]).abs() / jf[(r, c)].abs().max(1.0));
                let dgd = (gp[r] - gm[r]) / (2.0 * s);
                worst = worst.max((dgd - jg[(r, c)]).abs() / jg[(r, c)].abs().max(1.0));
            }
        }
        worst
    }
}

/// Builds the dense problem on `grid` and checks its Jacobians.
pub fn discretize_to_nlp(spec: &ProblemSpec, grid: &Arc<Grid>) -> Result<NlpInstance> {
    let n = grid.n_interior();
    let levels = grid.levels() - 1;
    let vars = 2 * n * levels;
    if vars > SIZE_GUARD {
        return Err(Error::SizeGuard {
            vars,
            limit: SIZE_GUARD,
        });
    }
    let a = assemble_operator(spec, &grid.space, false)?.matrix;
    let coords: Vec<[f64; 2]> = (0..n).map(|k| grid.space.interior_coords(k)).collect();
    let y0 = coords
        .iter()
        .map(|c| spec.initial_state(&c[..spec.dim]))
        .collect();
    let inst = NlpInstance {
        spec: spec.clone(),
        grid: grid.clone(),
        a,
        y0,
        coords,
        n,
        levels,
        weight: grid.slab_weight(),
    };
    // Jacobian audit at a smooth, nonzero reference point
    let z_ref: Vec<f64> = (0..vars)
        .map(|i| 0.5 * ((i as f64) * 0.7).sin() + 0.1)
        .collect();
    let dev = inst.jacobian_check(&z_ref);
    if !(dev <= 1e-6) {
        return Err(Error::Nlp(format!(
            "Jacobian differs from finite differences by {dev:e}"
        )));
    }
    Ok(inst)
}

#[derive(Clone, Debug)]
pub struct NlpSolution {
    pub z: Vec<f64>,
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
    /// `|grad J + J_F^T lambda + J_G^T mu|_inf / w`.
    pub stationarity: f64,
    pub equality_res: f64,
    pub feasibility: f64,
    /// `max |mu_i G_i| / w`.
    pub complementarity: f64,
    pub iterations: usize,
    pub active_changes: usize,
    pub active: Vec<bool>,
}

fn residuals(inst: &NlpInstance, z: &[f64], lambda: &[f64], mu: &[f64]) -> (f64, f64, f64, f64) {
    let m = inst.m();
    let w = inst.weight;
    let mut grad = inst.objective_gradient(z);
    grad += inst.jac_f(z).transpose() * DVector::from_column_slice(lambda);
    for (i, (gy, gu)) in inst.jac_g(z).into_iter().enumerate() {
        grad[i] += mu[i] * gy;
        grad[m + i] += mu[i] * gu;
    }
    let g = inst.eval_g(z);
    let stat = grad.amax() / w;
    let eq = inst.eval_f(z).amax();
    let feas = g.iter().fold(0.0f64, |a, &v| a.max(v));
    let comp = g
        .iter()
        .zip(mu)
        .fold(0.0f64, |a, (&gv, &mv)| a.max((gv * mv).abs()))
        / w;
    (stat, eq, feas, comp)
}

/// Primal-dual active-set Newton iteration from `start` (primal only;
/// multipliers start at zero with an empty active set).
pub fn solve_nlp_active_set(inst: &NlpInstance, start: &[f64]) -> Result<NlpSolution> {
    let m = inst.m();
    if start.len() != 2 * m {
        return Err(Error::DimensionMismatch(format!(
            "start has {} entries, instance has {} variables",
            start.len(),
            2 * m
        )));
    }
    let w = inst.weight;
    let mut z = start.to_vec();
    let mut lambda = vec![0.0; m];
    let mut mu = vec![0.0; m];
    let mut active = vec![false; m];
    let mut changes = 0;
    for iter in 1..=200 {
        let idx: Vec<usize> = (0..m).filter(|&i| active[i]).collect();
        let na = idx.len();
        let size = 3 * m + na;
        let mut k = DMatrix::zeros(size, size);
        let mut rhs = DVector::zeros(size);
        let h = inst.hessian(&z, &lambda, &mu);
        let jf = inst.jac_f(&z);
        let jg = inst.jac_g(&z);
        k.view_mut((0, 0), (2 * m, 2 * m)).copy_from(&h);
        k.view_mut((0, 2 * m), (2 * m, m))
            .copy_from(&jf.transpose());
        k.view_mut((2 * m, 0), (m, 2 * m)).copy_from(&jf);
        for (a, &i) in idx.iter().enumerate() {
            let (gy, gu) = jg[i];
            let col = 3 * m + a;
            k[(i, col)] = gy;
            k[(m + i, col)] = gu;
            k[(col, i)] = gy;
            k[(col, m + i)] = gu;
        }
        let grad = inst.objective_gradient(&z);
        let f = inst.eval_f(&z);
        let g = inst.eval_g(&z);
        for r in 0..2 * m {
            rhs[r] = -grad[r];
        }
        for r in 0..m {
            rhs[2 * m + r] = -f[r];
        }
        for (a, &i) in idx.iter().enumerate() {
            rhs[3 * m + a] = -g[i];
        }
        let sol = k.clone().lu().solve(&rhs).ok_or_else(|| {
            Error::Nlp(format!(
                "singular KKT matrix at iteration {iter}; active set {:?}",
                idx
            ))
        })?;
        if sol.iter().any(|v| !v.is_finite()) {
            return Err(Error::Nlp(format!(
                "non-finite Newton step at iteration {iter}; active set {idx:?}"
            )));
        }
        let mut step = 0.0f64;
        for r in 0..2 * m {
            z[r] += sol[r];
            step = step.max(sol[r].abs());
        }
        lambda.copy_from_slice(sol.rows(2 * m, m).as_slice());
        mu.fill(0.0);
        for (a, &i) in idx.iter().enumerate() {
            mu[i] = sol[3 * m + a];
        }
        let g_new = inst.eval_g(&z);
        let next: Vec<bool> = (0..m).map(|i| mu[i] / w + g_new[i] > 0.0).collect();
        let flips = next.iter().zip(&active).filter(|(a, b)| a != b).count();
        changes += flips;
        if changes > CYCLING_GUARD {
            return Err(Error::Nlp(format!(
                "active set cycling: {changes} changes after {iter} iterations"
            )));
        }
        active = next;
        let (stat, eq, feas, comp) = residuals(inst, &z, &lambda, &mu);
        let zmax = z.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let dual_ok = mu.iter().all(|&v| v >= 0.0);
        if flips == 0
            && dual_ok
            && stat <= 1e-10
            && eq <= 1e-10
            && feas <= 1e-10
            && (comp <= 1e-10 || step <= 1e-14 * (1.0 + zmax))
        {
            return Ok(NlpSolution {
                z,
                lambda,
                mu,
                stationarity: stat,
                equality_res: eq,
                feasibility: feas,
                complementarity: comp,
                iterations: iter,
                active_changes: changes,
                active,
            });
        }
    }
    Err(Error::Nlp("no convergence in 200 Newton iterations".into()))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MultiplierDiscrepancy {
    pub e_linf: f64,
    pub e_l2: f64,
    pub phi_linf: f64,
    pub phi_l2: f64,
    pub y_linf: f64,
    pub u_linf: f64,
    /// Whether the multipliers were divided by the slab weight.
    pub scaled: bool,
}

impl MultiplierDiscrepancy {
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        for (k, v) in [
            ("e_linf", self.e_linf),
            ("e_l2", self.e_l2),
            ("phi_linf", self.phi_linf),
            ("phi_l2", self.phi_l2),
            ("y_linf", self.y_linf),
            ("u_linf", self.u_linf),
        ] {
            let _ = writeln!(s, "{k} = {}", fmt17(v));
        }
        let _ = writeln!(
            s,
            "scaling = {}",
            if self.scaled { "slab_weight" } else { "none" }
        );
        s
    }
}

/// Oracle multipliers as fields on levels `1..nt` (level 0 is zero).
pub fn oracle_fields(
    inst: &NlpInstance,
    sol: &NlpSolution,
    scaled: bool,
) -> (SpaceTimeField, SpaceTimeField) {
    let n = inst.n;
    let s = if scaled { 1.0 / inst.weight } else { 1.0 };
    let mut phi = SpaceTimeField::zeros(&inst.grid);
    let mut e = SpaceTimeField::zeros(&inst.grid);
    for i in 0..inst.m() {
        phi.as_mut_slice()[n + i] = sol.lambda[i] * s;
        e.as_mut_slice()[n + i] = sol.mu[i] * s;
    }
    (phi, e)
}

/// Compares the oracle solution with a KKT point of the PDE solver on
/// levels `1..nt`. With `scaled = false` the raw multipliers are used,
/// which is wrong by the factor `1 / w` and serves as a negative control.
pub fn compare_multipliers(
    inst: &NlpInstance,
    sol: &NlpSolution,
    point: &KktPoint,
    scaled: bool,
) -> Result<MultiplierDiscrepancy> {
    point.check_aligned()?;
    point.y.check_on(&inst.grid, "KKT point")?;
    let (phi_o, e_o) = oracle_fields(inst, sol, scaled);
    let (y_o, u_o) = inst.unpack(&sol.z);
    let n = inst.n;
    let tail = |a: &SpaceTimeField, b: &SpaceTimeField| -> (f64, f64) {
        let mut linf = 0.0f64;
        let mut sq = 0.0;
        for (p, q) in a.as_slice()[n..].iter().zip(&b.as_slice()[n..]) {
            linf = linf.max((p - q).abs());
            sq += (p - q) * (p - q);
        }
        (linf, (sq * inst.weight).sqrt())
    };
    let (e_linf, e_l2) = tail(&e_o, &point.e);
    let (phi_linf, phi_l2) = tail(&phi_o, &point.phi);
    Ok(MultiplierDiscrepancy {
        e_linf,
        e_l2,
        phi_linf,
        phi_l2,
        y_linf: tail(&y_o, &point.y).0,
        u_linf: tail(&u_o, &point.u).0,
        scaled,
    })
}
