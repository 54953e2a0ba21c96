//! Banded LU without pivoting for the implicit step matrices
//! `I/tau + A + diag(c)`.

use crate::operator::CsrMatrix;

/// Elimination order for the banded factorization.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Ordering {
    /// Natural lexicographic node order.
    #[default]
    Natural,
    /// Nodes eliminated last-to-first.
    Reversed,
}

#[derive(Clone, Debug)]
pub struct BandedLu {
    n: usize,
    bw: usize,
    /// Row-major band storage, row `i` holds columns `i - bw ..= i + bw`.
    band: Vec<f64>,
    ordering: Ordering,
}

/// Factorization broke down at a (permuted) row.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZeroPivot {
    pub row: usize,
    pub pivot: f64,
}

impl BandedLu {
    /// Factors `diag_shift * I + diag(diag) + m`.
    pub fn factor(
        m: &CsrMatrix,
        diag_shift: f64,
        diag: &[f64],
        ordering: Ordering,
    ) -> Result<BandedLu, ZeroPivot> {
        let n = m.n();
        let bw = m.half_bandwidth();
        let width = 2 * bw + 1;
        let perm = |i: usize| match ordering {
            Ordering::Natural => i,
            Ordering::Reversed => n - 1 - i,
        };
        let mut band = vec![0.0; n * width];
        let mut scale = 0.0f64;
        for i in 0..n {
            let pi = perm(i);
            for (c, v) in m.row(i) {
                let pc = perm(c);
                band[pi * width + (pc + bw - pi)] += v;
            }
            band[pi * width + bw] += diag_shift + diag[i];
            let rs: f64 = band[pi * width..(pi + 1) * width]
                .iter()
                .map(|v| v.abs())
                .sum();
            scale = scale.max(rs);
        }
        let tiny = 1e-14 * scale.max(f64::MIN_POSITIVE);
        for k in 0..n {
            let pivot = band[k * width + bw];
            if !(pivot.abs() > tiny) || !pivot.is_finite() {
                return Err(ZeroPivot { row: k, pivot });
            }
            let last = (k + bw).min(n - 1);
            for i in k + 1..=last {
                let lik = band[i * width + (k + bw - i)] / pivot;
                if lik == 0.0 {
                    continue;
                }
                band[i * width + (k + bw - i)] = lik;
                for j in k + 1..=(k + bw).min(n - 1) {
                    let ukj = band[k * width + (j + bw - k)];
                    band[i * width + (j + bw - i)] -= lik * ukj;
                }
            }
        }
        Ok(BandedLu {
            n,
            bw,
            band,
            ordering,
        })
    }

    /// Solves in place.
    pub fn solve(&self, rhs: &mut [f64]) {
        let (n, bw) = (self.n, self.bw);
        let width = 2 * bw + 1;
        if self.ordering == Ordering::Reversed {
            rhs.reverse();
        }
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let mut s = rhs[i];
            for k in lo..i {
                s -= self.band[i * width + (k + bw - i)] * rhs[k];
            }
            rhs[i] = s;
        }
        for i in (0..n).rev() {
            let hi = (i + bw).min(n - 1);
            let mut s = rhs[i];
            for j in i + 1..=hi {
                s -= self.band[i * width + (j + bw - i)] * rhs[j];
            }
            rhs[i] = s / self.band[i * width + bw];
        }
        if self.ordering == Ordering::Reversed {
            rhs.reverse();
        }
    }
}
