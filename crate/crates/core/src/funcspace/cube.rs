use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-parallel cube `Q(center, half_side)` with side length `2 * half_side`.
///
/// Membership is half-open, `[lo, hi)` on every axis, so that dyadic tilings
/// are exact partitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cube {
    center: Vec<f64>,
    half_side: f64,
}

impl Cube {
    pub fn new(center: Vec<f64>, half_side: f64) -> Result<Self> {
        if center.is_empty() {
            return Err(Error::precondition("cube dimension must be positive"));
        }
        if !(half_side > 0.0 && half_side.is_finite()) {
            return Err(Error::precondition(format!(
                "cube half-side must be positive and finite, got {half_side}"
            )));
        }
        if center.iter().any(|c| !c.is_finite()) {
            return Err(Error::precondition("cube center must be finite"));
        }
        let side = 2.0 * half_side;
        let vol = side.powi(center.len() as i32);
        if !(vol > 0.0 && vol.is_finite()) {
            return Err(Error::precondition("cube volume is not a positive finite number"));
        }
        Ok(Cube { center, half_side })
    }

    /// The cube `[lo, lo + side)^n` given by its lower corner.
    pub fn from_corner(corner: &[f64], side: f64) -> Result<Self> {
        let h = side / 2.0;
        Cube::new(corner.iter().map(|c| c + h).collect(), h)
    }

    /// Builds a cube from per-axis bounds; all sides must agree.
    pub fn from_bounds(lo: &[f64], hi: &[f64]) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::precondition("cube bounds must have equal, positive length"));
        }
        let side = hi[0] - lo[0];
        for (a, b) in lo.iter().zip(hi) {
            let s = b - a;
            if (s - side).abs() > 1e-12 * side.abs().max(1.0) {
                return Err(Error::precondition(format!(
                    "box with sides {side} and {s} is not a cube"
                )));
            }
        }
        Cube::from_corner(lo, side)
    }

    /// `Q(0, r)`, the origin-centred cube of half-side `r`.
    pub fn centered(dim: usize, r: f64) -> Result<Self> {
        Cube::new(vec![0.0; dim], r)
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn half_side(&self) -> f64 {
        self.half_side
    }

    pub fn side(&self) -> f64 {
        2.0 * self.half_side
    }

    pub fn volume(&self) -> f64 {
        self.side().powi(self.dim() as i32)
    }

    pub fn lo(&self, axis: usize) -> f64 {
        self.center[axis] - self.half_side
    }

    pub fn hi(&self, axis: usize) -> f64 {
        self.center[axis] + self.half_side
    }

    pub fn translate(&self, t: &[f64]) -> Cube {
        assert_eq!(t.len(), self.dim(), "translation dimension mismatch");
        Cube {
            center: self.center.iter().zip(t).map(|(c, s)| c + s).collect(),
            half_side: self.half_side,
        }
    }

    /// Half-open membership test.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && (0..self.dim()).all(|i| self.lo(i) <= x[i] && x[i] < self.hi(i))
    }

    /// Whether this (half-open) cube meets the closed cube `[-r, r]^n`.
    pub fn meets_closed_origin_cube(&self, r: f64) -> bool {
        (0..self.dim()).all(|i| self.hi(i) > -r && self.lo(i) <= r)
    }

    /// Whether the closures of the two cubes intersect.
    pub fn closures_touch(&self, other: &Cube) -> bool {
        let tol = 1e-12 * (self.side() + other.side());
        (0..self.dim()).all(|i| self.lo(i) <= other.hi(i) + tol && other.lo(i) <= self.hi(i) + tol)
    }
}
