//! Empirical Hölder exponents of space-time fields.
//!
//! Separation vectors are drawn with log-uniformly distributed lengths and
//! random directions in `(x, t)`. Each separation is evaluated at every
//! anchor node and keeps its worst increment, so a sample is the largest
//! increment of the field at that offset. Samples are binned into 16
//! logarithmic distance bins, and the exponent is the least-squares slope
//! of `log(max increment)` against `log(bin upper edge)` over bins holding
//! at least 10 samples.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::field_io::fmt17;
use crate::grid::SpaceTimeField;
use crate::kkt::{active_threshold, KktPoint};
use crate::problem::ProblemSpec;

pub const N_BINS: usize = 16;
pub const MIN_BIN_PAIRS: usize = 10;
/// Relative slack in the fitted bound `|dv| <= H d^alpha (1 + slack)`.
pub const FIT_SLACK: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HolderBin {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
    pub max_increment: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairSample {
    pub distance: f64,
    pub increment: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HolderFit {
    pub alpha_hat: f64,
    pub h_hat: f64,
    pub n_pairs: usize,
    /// Root-mean-square residual of the log-log fit.
    pub fit_residual: f64,
    pub bins: Vec<HolderBin>,
    pub constant_field: bool,
    pub samples: Vec<PairSample>,
}

impl HolderFit {
    /// Checks `|dv| <= H d^alpha (1 + slack)` on every sampled pair.
    pub fn bound_holds(&self) -> bool {
        self.samples.iter().all(|p| {
            p.increment <= self.h_hat * p.distance.powf(self.alpha_hat) * (1.0 + FIT_SLACK)
        })
    }

    pub fn bins_csv(&self) -> String {
        let mut s = String::from("bin_lo,bin_hi,n,max_increment\n");
        for b in &self.bins {
            let _ = writeln!(
                s,
                "{},{},{},{}",
                fmt17(b.lo),
                fmt17(b.hi),
                b.n,
                fmt17(b.max_increment)
            );
        }
        s
    }
}

/// Estimates a Hölder exponent and constant for `field` over the closed
/// space-time grid of interior nodes, with the Euclidean metric in `(x, t)`.
pub fn estimate_holder(field: &SpaceTimeField, n_pairs: usize, seed: u64) -> Result<HolderFit> {
    if n_pairs < 1000 {
        return Err(Error::InvalidArgument(format!(
            "need at least 1000 pairs, got {n_pairs}"
        )));
    }
    field.check_finite("field")?;
    let grid = field.grid();
    let sp = &grid.space;
    let dim = sp.dim();
    let shape = sp.interior_shape();
    let nt = grid.levels();
    let h = sp.spacing();
    let tau = grid.time.step();
    let d_min = h.iter().copied().fold(tau, f64::min);
    let d_max =
        (sp.extents().iter().map(|l| l * l).sum::<f64>() + grid.time.horizon().powi(2)).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(n_pairs);
    while samples.len() < n_pairs {
        let d = (rng.gen_range(d_min.ln()..=d_max.ln())).exp();
        // random direction in (x, t)
        let mut dir = [0.0f64; 3];
        for c in dir.iter_mut().take(dim + 1) {
            *c = rng.gen_range(-1.0..1.0);
        }
        let norm = dir.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let step = |c: f64, spacing: f64| (d * c / norm / spacing).round() as i64;
        let o1 = step(dir[0], h[0]);
        let o2 = if dim == 2 { step(dir[1], h[1]) } else { 0 };
        let ot = step(dir[dim], tau);
        if (o1, o2, ot) == (0, 0, 0)
            || o1.unsigned_abs() as usize >= shape[0]
            || o2.unsigned_abs() as usize >= shape[1]
            || ot.unsigned_abs() as usize >= nt
        {
            continue;
        }
        let mut dist2 = (o1 as f64 * h[0]).powi(2) + (ot as f64 * tau).powi(2);
        if dim == 2 {
            dist2 += (o2 as f64 * h[1]).powi(2);
        }
        samples.push(PairSample {
            distance: dist2.sqrt(),
            increment: worst_increment(field, shape, [o1, o2, ot]),
        });
    }

    let lo = samples
        .iter()
        .map(|p| p.distance)
        .fold(f64::INFINITY, f64::min);
    let hi = samples.iter().map(|p| p.distance).fold(0.0f64, f64::max);
    let (llo, lhi) = (lo.ln(), hi.ln() * (1.0 + 1e-12) + 1e-12);
    let width = (lhi - llo) / N_BINS as f64;
    let mut bins: Vec<HolderBin> = (0..N_BINS)
        .map(|b| HolderBin {
            lo: (llo + b as f64 * width).exp(),
            hi: (llo + (b + 1) as f64 * width).exp(),
            n: 0,
            max_increment: 0.0,
        })
        .collect();
    for p in &samples {
        let b = (((p.distance.ln() - llo) / width) as usize).min(N_BINS - 1);
        bins[b].n += 1;
        bins[b].max_increment = bins[b].max_increment.max(p.increment);
    }

    if samples.iter().all(|p| p.increment == 0.0) {
        return Ok(HolderFit {
            alpha_hat: 1.0,
            h_hat: 0.0,
            n_pairs,
            fit_residual: 0.0,
            bins,
            constant_field: true,
            samples,
        });
    }

    let pts: Vec<(f64, f64)> = bins
        .iter()
        .filter(|b| b.n >= MIN_BIN_PAIRS && b.max_increment > 0.0)
        .map(|b| (b.hi.ln(), b.max_increment.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "only {} populated distance bins; increase n_pairs",
            pts.len()
        )));
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let icept = my - slope * mx;
    let fit_residual = (pts
        .iter()
        .map(|p| (p.1 - icept - slope * p.0).powi(2))
        .sum::<f64>()
        / m)
        .sqrt();
    let alpha_hat = slope.clamp(1e-6, 1.0);
    let h_hat = samples
        .iter()
        .map(|p| p.increment / p.distance.powf(alpha_hat))
        .fold(0.0f64, f64::max)
        / (1.0 + FIT_SLACK)
        // absorbs the rounding of the division so the bound holds exactly
        * (1.0 + 4.0 * f64::EPSILON);
    Ok(HolderFit {
        alpha_hat,
        h_hat,
        n_pairs,
        fit_residual,
        bins,
        constant_field: false,
        samples,
    })
}

/// Largest `|v(z + o) - v(z)|` over all anchors `z` for which both ends
/// are grid nodes.
fn worst_increment(field: &SpaceTimeField, shape: [usize; 2], o: [i64; 3]) -> f64 {
    let grid = field.grid();
    let sp = &grid.space;
    let range = |off: i64, n: usize| {
        if off >= 0 {
            0..n - off as usize
        } else {
            (-off) as usize..n
        }
    };
    let mut worst = 0.0f64;
    for j in range(o[2], grid.levels()) {
        let jt = (j as i64 + o[2]) as usize;
        for i2 in range(o[1], shape[1]) {
            let k2 = (i2 as i64 + o[1]) as usize;
            for i1 in range(o[0], shape[0]) {
                let k1 = (i1 as i64 + o[0]) as usize;
                let a = field[(j, sp.interior_index(i1, i2))];
                let b = field[(jt, sp.interior_index(k1, k2))];
                worst = worst.max((a - b).abs());
            }
        }
    }
    worst
}

/// Largest `|e(a) - e(b)|` over neighboring nodes (in space or time) of
/// which exactly one is strongly active.
pub fn active_boundary_jump(e: &SpaceTimeField) -> f64 {
    let grid = e.grid();
    let sp = &grid.space;
    let shape = sp.interior_shape();
    let eps = active_threshold(e);
    let mut jump = 0.0f64;
    let mut visit = |a: f64, b: f64| {
        if (a > eps) != (b > eps) {
            jump = jump.max((a - b).abs());
        }
    };
    for j in 0..grid.levels() {
        for i2 in 0..shape[1] {
            for i1 in 0..shape[0] {
                let k = sp.interior_index(i1, i2);
                let a = e[(j, k)];
                if i1 + 1 < shape[0] {
                    visit(a, e[(j, sp.interior_index(i1 + 1, i2))]);
                }
                if i2 + 1 < shape[1] {
                    visit(a, e[(j, sp.interior_index(i1, i2 + 1))]);
                }
                if j + 1 < grid.levels() {
                    visit(a, e[(j + 1, k)]);
                }
            }
        }
    }
    jump
}

pub struct ContinuityReport {
    /// Fits for `y`, `u`, `phi`, `e` and `g_u e`, in that order.
    pub fits: Vec<(&'static str, HolderFit)>,
    pub active_boundary_jump: f64,
}

/// Static fact about the domain used by the regularity theory.
pub const DOMAIN_NOTE: &str =
    "domain is a rectangle, hence convex, hence of positive geometric density";

impl ContinuityReport {
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        for (name, fit) in &self.fits {
            let _ = writeln!(s, "{name}.alpha_hat = {}", fmt17(fit.alpha_hat));
            let _ = writeln!(s, "{name}.H_hat = {}", fmt17(fit.h_hat));
            let _ = writeln!(s, "{name}.fit_residual = {}", fmt17(fit.fit_residual));
            let _ = writeln!(s, "{name}.constant_field = {}", fit.constant_field);
        }
        let _ = writeln!(
            s,
            "active_boundary_jump = {}",
            fmt17(self.active_boundary_jump)
        );
        let _ = writeln!(s, "note = {DOMAIN_NOTE}");
        s
    }
}

pub fn multiplier_continuity_report(
    spec: &ProblemSpec,
    point: &KktPoint,
    n_pairs: usize,
    seed: u64,
) -> Result<ContinuityReport> {
    point.check_aligned()?;
    let grid = point.y.grid();
    let mut gu_e = SpaceTimeField::zeros(grid);
    for j in 0..grid.levels() {
        let t = grid.time.time(j);
        for k in 0..grid.n_interior() {
            let xc = grid.space.interior_coords(k);
            gu_e[(j, k)] =
                spec.constraint
                    .du
                    .at(&xc[..spec.dim], t, point.y[(j, k)], point.u[(j, k)])
                    * point.e[(j, k)];
        }
    }
    let fields = [
        ("y", &point.y),
        ("u", &point.u),
        ("phi", &point.phi),
        ("e", &point.e),
        ("gu_e", &gu_e),
    ];
    let mut fits = Vec::new();
    for (i, (name, f)) in fields.into_iter().enumerate() {
        fits.push((
            name,
            estimate_holder(f, n_pairs, seed.wrapping_add(i as u64))?,
        ));
    }
    Ok(ContinuityReport {
        fits,
        active_boundary_jump: active_boundary_jump(&point.e),
    })
}
