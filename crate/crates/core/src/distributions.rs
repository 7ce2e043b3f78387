//! Generalized pdfs: a continuous mixture carrying weight `p0` plus a finite
//! set of point masses.
//!
//! Only the continuous part enters the bin boundaries, so most of the
//! numerical routines here (`cdf_continuous`, `quantile_continuous`) ignore
//! the atoms entirely.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

const SUM_TOL: f64 = 1e-12;
const QUANTILE_MAX_ITER: usize = 200;
const QUANTILE_TOL: f64 = 1e-10;

/// One continuous family in the mixture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Component {
    Gaussian { mean: f64, var: f64 },
    Laplace { loc: f64, scale: f64 },
    Uniform { lo: f64, hi: f64 },
}

impl Component {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Component::Gaussian { mean, var } => mean.is_finite() && var.is_finite() && var > 0.0,
            Component::Laplace { loc, scale } => {
                loc.is_finite() && scale.is_finite() && scale > 0.0
            }
            Component::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo < hi,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidModel("component parameters out of range"))
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            Component::Gaussian { mean, var } => normal_cdf((x - mean) / libm::sqrt(var)),
            Component::Laplace { loc, scale } => {
                let z = (x - loc) / scale;
                if z < 0.0 {
                    0.5 * libm::exp(z)
                } else {
                    1.0 - 0.5 * libm::exp(-z)
                }
            }
            Component::Uniform { lo, hi } => {
                if x <= lo {
                    0.0
                } else if x >= hi {
                    1.0
                } else {
                    (x - lo) / (hi - lo)
                }
            }
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match *self {
            Component::Gaussian { mean, var } => {
                let z = x - mean;
                libm::exp(-0.5 * z * z / var) / libm::sqrt(2.0 * core::f64::consts::PI * var)
            }
            Component::Laplace { loc, scale } => {
                libm::exp(-libm::fabs(x - loc) / scale) / (2.0 * scale)
            }
            Component::Uniform { lo, hi } => {
                if x >= lo && x <= hi {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
        }
    }

    /// Raw moment `E[X^k]` in closed form.
    pub fn moment(&self, k: u32) -> f64 {
        match *self {
            Component::Gaussian { mean, var } => {
                // m_n = mean * m_{n-1} + (n - 1) * var * m_{n-2}
                let (mut prev, mut cur) = (1.0, mean);
                if k == 0 {
                    return 1.0;
                }
                for n in 2..=k {
                    let next = mean * cur + f64::from(n - 1) * var * prev;
                    prev = cur;
                    cur = next;
                }
                cur
            }
            Component::Laplace { loc, scale } => {
                // E[(loc + scale*Y)^k] with E[Y^j] = j! for even j, 0 for odd j.
                let mut total = 0.0;
                let mut binom = 1.0;
                let mut fact = 1.0;
                for j in 0..=k {
                    if j > 0 {
                        binom = binom * f64::from(k - j + 1) / f64::from(j);
                        fact *= f64::from(j);
                    }
                    if j % 2 == 0 {
                        total += binom * libm::pow(loc, f64::from(k - j))
                            * libm::pow(scale, f64::from(j))
                            * fact;
                    }
                }
                total
            }
            Component::Uniform { lo, hi } => {
                let e = f64::from(k + 1);
                (libm::pow(hi, e) - libm::pow(lo, e)) / (e * (hi - lo))
            }
        }
    }

    /// A finite interval that holds essentially all of the mass.
    fn bulk(&self) -> (f64, f64) {
        match *self {
            Component::Gaussian { mean, var } => {
                let sd = libm::sqrt(var);
                (mean - 10.0 * sd, mean + 10.0 * sd)
            }
            Component::Laplace { loc, scale } => (loc - 30.0 * scale, loc + 30.0 * scale),
            Component::Uniform { lo, hi } => (lo, hi),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Component::Gaussian { mean, var } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + libm::sqrt(var) * z
            }
            Component::Laplace { loc, scale } => {
                // inverse cdf on u in (-1/2, 1/2)
                let u: f64 = rng.random::<f64>() - 0.5;
                let mag = -libm::log(1.0 - 2.0 * libm::fabs(u));
                if u < 0.0 {
                    loc - scale * mag
                } else {
                    loc + scale * mag
                }
            }
            Component::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
        }
    }
}

/// Standard normal cdf.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / core::f64::consts::SQRT_2)
}

/// A point mass `p` at `theta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub theta: f64,
    pub p: f64,
}

/// `f = p0 * sum_i w_i f_i + sum_h p_h * delta(theta_h)`.
///
/// Immutable once built; every constructor validates the invariants
/// (weights summing to one, `p0 > 0`, strictly increasing atom locations
/// with positive mass).
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralizedPdf {
    p0: f64,
    continuous: Vec<(f64, Component)>,
    atoms: Vec<Atom>,
}

impl GeneralizedPdf {
    pub fn new(p0: f64, continuous: Vec<(f64, Component)>, atoms: Vec<Atom>) -> Result<Self> {
        if !(p0 > 0.0 && p0 <= 1.0) {
            return Err(Error::InvalidModel("p0 must lie in (0, 1]"));
        }
        if continuous.is_empty() {
            return Err(Error::InvalidModel("continuous part needs at least one component"));
        }
        let mut wsum = 0.0;
        for (w, c) in &continuous {
            if !(w.is_finite() && *w >= 0.0) {
                return Err(Error::InvalidModel("component weights must be nonnegative"));
            }
            c.validate()?;
            wsum += w;
        }
        if libm::fabs(wsum - 1.0) > SUM_TOL {
            return Err(Error::InvalidModel("component weights must sum to 1"));
        }
        let mut total = p0;
        for (i, a) in atoms.iter().enumerate() {
            if !a.theta.is_finite() {
                return Err(Error::InvalidModel("atom location must be finite"));
            }
            if !(a.p > 0.0 && a.p <= 1.0) {
                return Err(Error::InvalidModel("atom mass must lie in (0, 1]"));
            }
            if i > 0 && atoms[i - 1].theta >= a.theta {
                return Err(Error::InvalidModel("atom locations must be strictly increasing"));
            }
            total += a.p;
        }
        if libm::fabs(total - 1.0) > SUM_TOL {
            return Err(Error::InvalidModel("p0 plus atom masses must sum to 1"));
        }
        Ok(Self {
            p0,
            continuous,
            atoms,
        })
    }

    /// Single-component distribution without atoms.
    pub fn single(component: Component) -> Result<Self> {
        Self::new(1.0, alloc::vec![(1.0, component)], Vec::new())
    }

    pub fn gaussian(mean: f64, var: f64) -> Result<Self> {
        Self::single(Component::Gaussian { mean, var })
    }

    pub fn laplace(loc: f64, scale: f64) -> Result<Self> {
        Self::single(Component::Laplace { loc, scale })
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        Self::single(Component::Uniform { lo, hi })
    }

    pub fn standard_normal() -> Self {
        Self {
            p0: 1.0,
            continuous: alloc::vec![(1.0, Component::Gaussian { mean: 0.0, var: 1.0 })],
            atoms: Vec::new(),
        }
    }

    pub fn p0(&self) -> f64 {
        self.p0
    }

    pub fn continuous(&self) -> &[(f64, Component)] {
        &self.continuous
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// Cdf of the continuous part only (atoms excluded).
    pub fn cdf_continuous(&self, x: f64) -> f64 {
        if x == f64::NEG_INFINITY {
            return 0.0;
        }
        if x == f64::INFINITY {
            return 1.0;
        }
        let v: f64 = self.continuous.iter().map(|(w, c)| w * c.cdf(x)).sum();
        v.clamp(0.0, 1.0)
    }

    /// Density of the continuous part only.
    pub fn pdf_continuous(&self, x: f64) -> f64 {
        self.continuous.iter().map(|(w, c)| w * c.pdf(x)).sum()
    }

    /// Inverts `cdf_continuous` by bracketed bisection.
    pub fn quantile_continuous(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::Calibration { u });
        }
        let (mut lo, mut hi) = self
            .continuous
            .iter()
            .filter(|(w, _)| *w > 0.0)
            .map(|(_, c)| c.bulk())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (l, h)| {
                (a.min(l), b.max(h))
            });
        let mut width = (hi - lo).max(1.0);
        let mut expansions = 0;
        while self.cdf_continuous(lo) > u {
            lo -= width;
            width *= 2.0;
            expansions += 1;
            if expansions > 64 {
                return Err(Error::Calibration { u });
            }
        }
        while self.cdf_continuous(hi) < u {
            hi += width;
            width *= 2.0;
            expansions += 1;
            if expansions > 128 {
                return Err(Error::Calibration { u });
            }
        }
        for _ in 0..QUANTILE_MAX_ITER {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.cdf_continuous(mid) < u {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let err_hi = libm::fabs(self.cdf_continuous(hi) - u);
        let err_lo = libm::fabs(self.cdf_continuous(lo) - u);
        let (x, err) = if err_hi <= err_lo { (hi, err_hi) } else { (lo, err_lo) };
        if err <= QUANTILE_TOL {
            Ok(x)
        } else {
            Err(Error::Calibration { u })
        }
    }

    /// `E[X^k] = p0 * E_c[X^k] + sum_h p_h theta_h^k`.
    pub fn moment(&self, k: u32) -> f64 {
        let cont: f64 = self.continuous.iter().map(|(w, c)| w * c.moment(k)).sum();
        let atoms: f64 = self
            .atoms
            .iter()
            .map(|a| a.p * libm::pow(a.theta, f64::from(k)))
            .sum();
        self.p0 * cont + atoms
    }

    /// One draw: atom `h` with probability `p_h`, otherwise the continuous
    /// mixture.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if !self.atoms.is_empty() {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            for a in &self.atoms {
                acc += a.p;
                if u < acc {
                    return a.theta;
                }
            }
        }
        self.draw_continuous(rng)
    }

    /// One draw from the continuous mixture only.
    pub fn draw_continuous<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.continuous.len() == 1 {
            return self.continuous[0].1.sample(rng);
        }
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (w, c) in &self.continuous {
            acc += w;
            if u < acc {
                return c.sample(rng);
            }
        }
        // rounding left a sliver above the last cumulative weight
        let (_, c) = self
            .continuous
            .iter()
            .rev()
            .find(|(w, _)| *w > 0.0)
            .expect("validated mixture has positive weight");
        c.sample(rng)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.draw(rng)).collect()
    }
}

/// Binned KL divergence `sum_j g_j ln(g_j / f_j)` with `0 ln 0 = 0`.
pub fn kl_binned(g_masses: &[f64], f_masses: &[f64]) -> Result<f64> {
    if g_masses.len() != f_masses.len() {
        return Err(Error::LengthMismatch {
            left: g_masses.len(),
            right: f_masses.len(),
        });
    }
    let mut kl = 0.0;
    for (&g, &f) in g_masses.iter().zip(f_masses) {
        if g <= 0.0 {
            continue;
        }
        if f <= 0.0 {
            return Err(Error::AbsoluteContinuity("g puts mass on a bin with zero f mass"));
        }
        kl += g * libm::log(g / f);
    }
    Ok(kl.max(0.0))
}
