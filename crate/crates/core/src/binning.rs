//! Equiprobable bin partitions and distinguishability.
//!
//! A partition at resolution `N` splits the real line into `N` right-closed
//! intervals `(z_{j-1}, z_j]` that each carry `1/N` of the continuous part of
//! the pre-change distribution, followed by one singleton bin per atom. Bin
//! indices are zero-based: continuous bins are `0..N`, atom `h` is bin `N + h`.

use alloc::vec::Vec;

use crate::distributions::GeneralizedPdf;
use crate::error::{Error, Result};

/// Mass differences at or below this are treated as equal.
pub const DISTINGUISH_TOL: f64 = 1e-9;

const MASS_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct BinPartition {
    n_continuous: usize,
    boundaries: Vec<f64>,
    atoms: Vec<f64>,
    f_masses: Vec<f64>,
}

impl BinPartition {
    /// Builds a partition from stored parts, checking every invariant.
    pub fn new(boundaries: Vec<f64>, atoms: Vec<f64>, f_masses: Vec<f64>) -> Result<Self> {
        let n = boundaries.len() + 1;
        if boundaries.iter().any(|z| !z.is_finite()) {
            return Err(Error::InvalidPartition("boundaries must be finite"));
        }
        if boundaries.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidPartition("boundaries must be strictly increasing"));
        }
        if atoms.iter().any(|a| !a.is_finite()) || atoms.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidPartition("atoms must be finite, sorted and distinct"));
        }
        if f_masses.len() != n + atoms.len() {
            return Err(Error::InvalidPartition("f_masses must have N + H entries"));
        }
        if f_masses.iter().any(|&m| !(m > 0.0 && m <= 1.0)) {
            return Err(Error::InvalidPartition("every bin mass must lie in (0, 1]"));
        }
        let total: f64 = f_masses.iter().sum();
        if libm::fabs(total - 1.0) > MASS_SUM_TOL {
            return Err(Error::InvalidPartition("f_masses must sum to 1"));
        }
        let first = f_masses[0];
        if f_masses[..n].iter().any(|&m| libm::fabs(m - first) > MASS_SUM_TOL) {
            return Err(Error::InvalidPartition("continuous bins must carry equal mass"));
        }
        Ok(Self {
            n_continuous: n,
            boundaries,
            atoms,
            f_masses,
        })
    }

    /// Boundaries at the `j/N` quantiles of the continuous part of `f`.
    pub fn from_pdf(f: &GeneralizedPdf, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidPartition("N must be at least 1"));
        }
        let boundaries = (1..n)
            .map(|j| f.quantile_continuous(j as f64 / n as f64))
            .collect::<Result<Vec<_>>>()?;
        let atoms = f.atoms().iter().map(|a| a.theta).collect();
        let f_masses = equal_masses(n, f.p0(), f.atoms().iter().map(|a| a.p));
        Self::new(boundaries, atoms, f_masses)
    }

    /// Boundaries from order statistics of pre-change reference samples:
    /// `z_j = x_(floor(j T / N))` (one-based order statistics).
    ///
    /// `samples` must hold only the continuous part; atoms and their masses
    /// are passed explicitly.
    pub fn from_samples(
        samples: &[f64],
        n: usize,
        atoms: &[f64],
        p0: f64,
        atom_masses: &[f64],
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidPartition("N must be at least 1"));
        }
        if let Some(index) = samples.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFiniteSample { index });
        }
        let t = samples.len();
        if t < n {
            return Err(Error::InsufficientData { needed: n, got: t });
        }
        if atoms.len() != atom_masses.len() {
            return Err(Error::InvalidPartition("one mass per atom required"));
        }
        if !(p0 > 0.0 && p0 <= 1.0) {
            return Err(Error::InvalidPartition("p0 must lie in (0, 1]"));
        }
        let mut sorted = samples.to_vec();
        sorted.sort_unstable_by(f64::total_cmp);
        let boundaries = (1..n).map(|j| sorted[j * t / n - 1]).collect();
        let f_masses = equal_masses(n, p0, atom_masses.iter().copied());
        Self::new(boundaries, atoms.to_vec(), f_masses)
    }

    /// Number of continuous bins `N`.
    pub fn n_continuous(&self) -> usize {
        self.n_continuous
    }

    /// Total number of bins `N + H`.
    pub fn n_bins(&self) -> usize {
        self.f_masses.len()
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn f_masses(&self) -> &[f64] {
        &self.f_masses
    }

    /// Bin of `x`. Atoms win over intervals, so an atom sitting on a
    /// boundary still maps to its own bin.
    #[inline]
    pub fn bin_index(&self, x: f64) -> usize {
        if !self.atoms.is_empty() {
            let h = self.atoms.partition_point(|a| *a < x);
            if h < self.atoms.len() && self.atoms[h] == x {
                return self.n_continuous + h;
            }
        }
        self.boundaries.partition_point(|z| *z < x)
    }

    /// Bin masses of `g` on this partition. `g`'s atoms must be a subset of
    /// the partition's atoms.
    pub fn masses_of(&self, g: &GeneralizedPdf) -> Result<Vec<f64>> {
        let mut masses = Vec::with_capacity(self.n_bins());
        let mut prev = 0.0;
        for j in 0..self.n_continuous {
            let cur = if j + 1 == self.n_continuous {
                1.0
            } else {
                g.cdf_continuous(self.boundaries[j])
            };
            masses.push(g.p0() * (cur - prev).max(0.0));
            prev = cur;
        }
        masses.resize(self.n_bins(), 0.0);
        for atom in g.atoms() {
            let h = self
                .atoms
                .iter()
                .position(|&a| a == atom.theta)
                .ok_or(Error::AbsoluteContinuity("post-change atom missing from partition"))?;
            masses[self.n_continuous + h] = atom.p;
        }
        Ok(masses)
    }
}

fn equal_masses(n: usize, p0: f64, atom_masses: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut masses = alloc::vec![p0 / n as f64; n];
    masses.extend(atom_masses);
    masses
}

/// True iff some bin carries different mass under `f` and `g` at resolution `n`.
pub fn is_distinguishable(f: &GeneralizedPdf, g: &GeneralizedPdf, n: usize) -> Result<bool> {
    let partition = BinPartition::from_pdf(f, n)?;
    let g_masses = partition.masses_of(g)?;
    Ok(g_masses
        .iter()
        .zip(partition.f_masses())
        .any(|(a, b)| libm::fabs(a - b) > DISTINGUISH_TOL))
}

/// Least `N` in `1..=n_max` at which `g` is distinguishable from `f`.
pub fn smallest_distinguishable_n(
    f: &GeneralizedPdf,
    g: &GeneralizedPdf,
    n_max: usize,
) -> Result<Option<usize>> {
    for n in 1..=n_max {
        if is_distinguishable(f, g, n)? {
            return Ok(Some(n));
        }
    }
    Ok(None)
}
