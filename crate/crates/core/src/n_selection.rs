//! Choosing the bin count.
//!
//! Two routes: an exact one, via the set `I` of pre-change cdf levels at
//! which the continuous cdfs of `f` and `g` agree (a resolution `N`
//! distinguishes the pair iff some level `i/N` falls outside `I`, or an atom
//! mass differs); and a moment-based one for unknown `g`, which grows `N`
//! until the envelope `[m_N, M_N]` on the k-th moment of any
//! indistinguishable `g` fits inside `E_f[X^k] +- eps`.

use alloc::vec::Vec;

use crate::binning::BinPartition;
use crate::distributions::GeneralizedPdf;
use crate::error::{Error, Result};

/// Absolute tolerance for `i/N in I`.
pub const MEMBERSHIP_TOL: f64 = 1e-7;
/// Default grid size for `crossing_set`.
pub const DEFAULT_GRID_POINTS: usize = 4096;
/// Default bisection tolerance (in x) for `crossing_set`.
pub const DEFAULT_CROSSING_TOL: f64 = 1e-10;

// |F_c - G_c| at or below this counts as a zero of the difference
const ZERO_DIFF: f64 = 1e-13;

/// Moment side-information: `|E_g[X^k] - E_f[X^k]| > eps` and both
/// continuous densities bounded by `c * |x|^(-k-1-xi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NSelectionParams {
    pub k: u32,
    pub eps: f64,
    pub c: f64,
    pub xi: f64,
}

impl NSelectionParams {
    pub fn new(k: u32, eps: f64, c: f64, xi: f64) -> Result<Self> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if k == 0 || !positive(eps) || !positive(c) || !positive(xi) {
            return Err(Error::InvalidConfig("k, eps, C and xi must all be positive"));
        }
        Ok(Self { k, eps, c, xi })
    }
}

/// Sorted levels `F_c(x)` where `F_c(x) = G_c(x)`, always including 0 and 1,
/// plus closed level intervals over which the two cdfs coincide.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossingSet {
    values: Vec<f64>,
    intervals: Vec<(f64, f64)>,
    tolerance: f64,
}

impl CrossingSet {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn contains(&self, level: f64) -> bool {
        let tol = self.tolerance;
        self.values.iter().any(|v| libm::fabs(v - level) <= tol)
            || self
                .intervals
                .iter()
                .any(|&(a, b)| level >= a - tol && level <= b + tol)
    }
}

/// Approximates `I` by scanning `F_c - G_c` on a grid spaced evenly in
/// `F_c`-probability, bisecting every sign change down to `tol` in `x`.
/// An isolated grid zero contributes itself; a run of consecutive grid
/// zeros contributes the whole level interval it spans, extended to 0 or 1
/// when the run touches the end of the grid.
pub fn crossing_set(
    f: &GeneralizedPdf,
    g: &GeneralizedPdf,
    grid_points: usize,
    tol: f64,
) -> Result<CrossingSet> {
    let grid_points = grid_points.max(100);
    let diff = |x: f64| f.cdf_continuous(x) - g.cdf_continuous(x);
    let sign = |d: f64| {
        if libm::fabs(d) <= ZERO_DIFF {
            0
        } else if d > 0.0 {
            1
        } else {
            -1
        }
    };
    let mut xs = Vec::with_capacity(grid_points);
    for i in 1..=grid_points {
        let u = i as f64 / (grid_points + 1) as f64;
        xs.push(f.quantile_continuous(u)?);
    }
    xs.dedup();

    let mut roots = Vec::new();
    let mut intervals = Vec::new();
    let mut prev: Option<(f64, i32)> = None;
    // (first index, last index) of the current run of grid zeros
    let mut run: Option<(usize, usize)> = None;
    let close_run = |run: (usize, usize), roots: &mut Vec<f64>, intervals: &mut Vec<(f64, f64)>| {
        let (a, b) = run;
        if a == b {
            roots.push(xs[a]);
        } else {
            let lo = if a == 0 { 0.0 } else { f.cdf_continuous(xs[a]) };
            let hi = if b + 1 == xs.len() { 1.0 } else { f.cdf_continuous(xs[b]) };
            intervals.push((lo, hi));
        }
    };
    for (i, &x) in xs.iter().enumerate() {
        let s = sign(diff(x));
        if s == 0 {
            run = Some(run.map_or((i, i), |(a, _)| (a, i)));
        } else {
            if let Some(r) = run.take() {
                close_run(r, &mut roots, &mut intervals);
            }
            if let Some((px, ps)) = prev {
                if ps != 0 && ps != s {
                    roots.push(bisect_root(&diff, px, x, tol));
                }
            }
        }
        prev = Some((x, s));
    }
    if let Some(r) = run {
        close_run(r, &mut roots, &mut intervals);
    }

    let mut values: Vec<f64> = roots.into_iter().map(|x| f.cdf_continuous(x)).collect();
    values.push(0.0);
    values.push(1.0);
    values.sort_unstable_by(f64::total_cmp);
    let mut deduped: Vec<f64> = Vec::with_capacity(values.len());
    for v in values {
        if deduped.last().map_or(true, |&l| v - l > MEMBERSHIP_TOL) {
            deduped.push(v);
        }
    }
    Ok(CrossingSet {
        values: deduped,
        intervals,
        tolerance: MEMBERSHIP_TOL,
    })
}

fn bisect_root(diff: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let lo_pos = diff(lo) > 0.0;
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if (diff(mid) > 0.0) == lo_pos {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn atom_masses_differ(f: &GeneralizedPdf, g: &GeneralizedPdf) -> bool {
    if libm::fabs(f.p0() - g.p0()) > crate::binning::DISTINGUISH_TOL {
        return true;
    }
    let mass_at = |d: &GeneralizedPdf, theta: f64| {
        d.atoms()
            .iter()
            .find(|a| a.theta == theta)
            .map_or(0.0, |a| a.p)
    };
    f.atoms()
        .iter()
        .chain(g.atoms())
        .any(|a| libm::fabs(mass_at(f, a.theta) - mass_at(g, a.theta)) > crate::binning::DISTINGUISH_TOL)
}

/// Exact characterization of distinguishability at resolution `n`: an atom
/// mass differs, or some level `i/n` (`0 <= i <= n`) is not in `I`.
pub fn check_prop_a1(f: &GeneralizedPdf, g: &GeneralizedPdf, n: usize) -> Result<bool> {
    if atom_masses_differ(f, g) {
        return Ok(true);
    }
    let set = crossing_set(f, g, DEFAULT_GRID_POINTS, DEFAULT_CROSSING_TOL)?;
    Ok(levels_outside(&set, n))
}

/// `{i/n : 0 <= i <= n} \ I` is nonempty.
pub fn levels_outside(set: &CrossingSet, n: usize) -> bool {
    (0..=n).any(|i| !set.contains(i as f64 / n as f64))
}

/// Envelope `(m_N, M_N)` on the k-th moment of any `g` that `N` bins cannot
/// tell apart from `f`.
pub fn mn_bounds(f: &GeneralizedPdf, params: &NSelectionParams, n: usize) -> Result<(f64, f64)> {
    if n < 3 {
        return Err(Error::TooFewBins { n });
    }
    let partition = BinPartition::from_pdf(f, n)?;
    let z = partition.boundaries();
    let k = params.k;
    let kf = f64::from(k);
    let (z_first, z_last) = (z[0], z[n - 2]);
    let even = k % 2 == 0;
    let diverges = if even {
        z_first >= 0.0 || z_last <= 0.0
    } else {
        z_first > 0.0 || z_last <= 0.0
    };
    if diverges {
        return Err(Error::DivergentTail { n });
    }

    let (mut hi_sum, mut lo_sum) = (0.0, 0.0);
    for w in z.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (pa, pb) = (libm::pow(a, kf), libm::pow(b, kf));
        let (mut mx, mut mn) = (pa.max(pb), pa.min(pb));
        if a < 0.0 && b > 0.0 {
            mx = mx.max(0.0);
            mn = mn.min(0.0);
        }
        hi_sum += mx;
        lo_sum += mn;
    }
    let inv_n = 1.0 / n as f64;

    // On the tails C x^k / |x|^(k+1+xi) = +-C |x|^(-1-xi), integrating to
    // C |z|^(-xi) / xi; for odd k only the positive tail counts.
    let (c, xi) = (params.c, params.xi);
    let mut tail = c * libm::pow(z_last, -xi) / xi;
    if even {
        tail += c * libm::pow(libm::fabs(z_first), -xi) / xi;
    }

    let atoms: f64 = f
        .atoms()
        .iter()
        .map(|a| a.p * libm::pow(a.theta, kf))
        .sum();
    let upper = f.p0() * (inv_n * hi_sum + tail) + atoms;
    let lower = f.p0() * (inv_n * lo_sum) + atoms;
    Ok((lower, upper))
}

/// One row of the N sweep; `bounds` is `None` where the tail bound diverges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub n: usize,
    pub bounds: Option<(f64, f64)>,
}

/// Smallest `N >= max(k, 3)` with `M_N <= E_f[X^k] + eps` and
/// `m_N >= E_f[X^k] - eps`, together with the sweep that led to it.
pub fn choose_n_with_sweep(
    f: &GeneralizedPdf,
    params: &NSelectionParams,
    n_max: usize,
) -> Result<(usize, Vec<SweepRow>)> {
    let target = f.moment(params.k);
    let mut sweep = Vec::new();
    let start = (params.k as usize).max(3);
    for n in start..=n_max {
        let bounds = match mn_bounds(f, params, n) {
            Ok(b) => Some(b),
            Err(Error::DivergentTail { .. }) => None,
            Err(e) => return Err(e),
        };
        sweep.push(SweepRow { n, bounds });
        if let Some((lo, hi)) = bounds {
            if hi <= target + params.eps && lo >= target - params.eps {
                return Ok((n, sweep));
            }
        }
    }
    Err(Error::NonTermination { n_max })
}

pub fn choose_n(f: &GeneralizedPdf, params: &NSelectionParams, n_max: usize) -> Result<usize> {
    choose_n_with_sweep(f, params, n_max).map(|(n, _)| n)
}
