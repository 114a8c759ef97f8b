use std::sync::atomic::{AtomicUsize, Ordering};

use super::quadrature::RealFn;
use crate::error::{DomainError, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interpolation {
    /// Value of the cell containing the point.
    Cell,
    /// Multilinear interpolation between cell centres.
    Multilinear,
}

/// Values on a uniform cell-centred grid.
///
/// The support box is `[origin, origin + counts * spacing)`. Queries outside
/// it (or, for multilinear interpolation, beyond the outermost centres) use
/// constant extension by the nearest boundary sample; such queries are
/// counted in [`SampledFunction::extension_hits`].
#[derive(Debug)]
pub struct SampledFunction {
    values: Vec<f64>,
    origin: Vec<f64>,
    spacing: f64,
    counts: Vec<usize>,
    interpolation: Interpolation,
    extension_hits: AtomicUsize,
}

impl Clone for SampledFunction {
    fn clone(&self) -> Self {
        SampledFunction {
            values: self.values.clone(),
            origin: self.origin.clone(),
            spacing: self.spacing,
            counts: self.counts.clone(),
            interpolation: self.interpolation,
            extension_hits: AtomicUsize::new(self.extension_hits.load(Ordering::Relaxed)),
        }
    }
}

impl SampledFunction {
    /// Wraps precomputed values; axis 0 varies fastest.
    pub fn new(
        values: Vec<f64>,
        origin: Vec<f64>,
        spacing: f64,
        counts: Vec<usize>,
        interpolation: Interpolation,
    ) -> Result<Self> {
        if origin.len() != counts.len() || origin.is_empty() {
            return Err(Error::precondition("origin and counts must have the same positive length"));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::precondition("grid spacing must be positive"));
        }
        if counts.contains(&0) || counts.iter().product::<usize>() != values.len() {
            return Err(Error::precondition("value count does not match grid extent"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::precondition("sampled values must be finite"));
        }
        Ok(SampledFunction {
            values,
            origin,
            spacing,
            counts,
            interpolation,
            extension_hits: AtomicUsize::new(0),
        })
    }

    /// Samples `f` at the cell centres of the grid.
    pub fn from_fn<F: RealFn + ?Sized>(
        f: &F,
        origin: Vec<f64>,
        spacing: f64,
        counts: Vec<usize>,
        interpolation: Interpolation,
    ) -> Result<Self> {
        let dim = origin.len();
        let total: usize = counts.iter().product();
        let mut values = Vec::with_capacity(total);
        let mut x = vec![0.0; dim];
        for idx in 0..total {
            let mut r = idx;
            for k in 0..dim {
                let i = r % counts[k];
                r /= counts[k];
                x[k] = origin[k] + (i as f64 + 0.5) * spacing;
            }
            values.push(f.eval(&x)?);
        }
        SampledFunction::new(values, origin, spacing, counts, interpolation)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// Number of queries answered by the extension rule so far.
    pub fn extension_hits(&self) -> usize {
        self.extension_hits.load(Ordering::Relaxed)
    }

    /// Coordinates of cell centre `idx`.
    pub fn center_of(&self, mut idx: usize) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.origin.len());
        for k in 0..self.origin.len() {
            let i = idx % self.counts[k];
            idx /= self.counts[k];
            x.push(self.origin[k] + (i as f64 + 0.5) * self.spacing);
        }
        x
    }

    fn flat(&self, idx: &[usize]) -> usize {
        let mut flat = 0;
        for k in (0..idx.len()).rev() {
            flat = flat * self.counts[k] + idx[k];
        }
        flat
    }

    fn lookup(&self, x: &[f64]) -> f64 {
        let dim = self.origin.len();
        let mut extended = false;
        let value = match self.interpolation {
            Interpolation::Cell => {
                let mut idx = vec![0usize; dim];
                for k in 0..dim {
                    let u = ((x[k] - self.origin[k]) / self.spacing).floor();
                    let max = (self.counts[k] - 1) as f64;
                    if u < 0.0 || u > max {
                        extended = true;
                    }
                    idx[k] = u.clamp(0.0, max) as usize;
                }
                self.values[self.flat(&idx)]
            }
            Interpolation::Multilinear => {
                let mut base = vec![0usize; dim];
                let mut frac = vec![0.0; dim];
                for k in 0..dim {
                    let u = (x[k] - self.origin[k]) / self.spacing - 0.5;
                    let max = (self.counts[k] - 1) as f64;
                    if u < 0.0 || u > max {
                        extended = true;
                    }
                    let u = u.clamp(0.0, max);
                    let b = (u.floor() as usize).min(self.counts[k].saturating_sub(2));
                    base[k] = b;
                    frac[k] = if self.counts[k] == 1 { 0.0 } else { u - b as f64 };
                }
                let mut acc = 0.0;
                let mut idx = vec![0usize; dim];
                for corner in 0..(1usize << dim) {
                    let mut w = 1.0;
                    for k in 0..dim {
                        let up = (corner >> k) & 1 == 1;
                        if up && self.counts[k] == 1 {
                            w = 0.0;
                            break;
                        }
                        idx[k] = base[k] + usize::from(up);
                        w *= if up { frac[k] } else { 1.0 - frac[k] };
                    }
                    if w != 0.0 {
                        acc += w * self.values[self.flat(&idx)];
                    }
                }
                acc
            }
        };
        if extended {
            self.extension_hits.fetch_add(1, Ordering::Relaxed);
        }
        value
    }
}

impl RealFn for SampledFunction {
    fn dim(&self) -> usize {
        self.origin.len()
    }

    fn eval(&self, x: &[f64]) -> Result<f64, DomainError> {
        if x.len() < self.origin.len() {
            return Err(DomainError::new(crate::error::DomainKind::MissingCoordinate, x));
        }
        Ok(self.lookup(x))
    }

    fn breakpoints(&self, axis: usize) -> Vec<f64> {
        if self.interpolation != Interpolation::Cell {
            return Vec::new();
        }
        (1..self.counts[axis])
            .map(|i| self.origin[axis] + i as f64 * self.spacing)
            .collect()
    }
}
