//! Structured two-axis parametric grids, fourth-order finite-difference
//! stencils, and quadrature rules.
//!
//! Grids are uniform per axis. A periodic axis covers `[a, b)` with spacing
//! `(b − a)/n` (node `b` identified with `a`); a clamped axis covers `[a, b]`
//! with spacing `(b − a)/(n − 1)` including both endpoints.

use serde::{Deserialize, Serialize};
use std::ops::{Index, IndexMut};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("grid axis {axis} has {n} nodes; at least 8 are required")]
    TooFewNodes { axis: usize, n: usize },
    #[error("grid axis {axis} has empty or inverted coordinate range [{a}, {b}]")]
    BadRange { axis: usize, a: f64, b: f64 },
}

/// A uniform structured grid on `[a1, b1] × [a2, b2]` with independent
/// periodicity per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n1: usize,
    pub n2: usize,
    pub a1: f64,
    pub b1: f64,
    pub a2: f64,
    pub b2: f64,
    pub periodic1: bool,
    pub periodic2: bool,
}

impl GridSpec {
    pub fn new(
        n1: usize,
        n2: usize,
        range1: (f64, f64),
        range2: (f64, f64),
        periodic1: bool,
        periodic2: bool,
    ) -> Result<Self, GridError> {
        for (axis, &n) in [n1, n2].iter().enumerate() {
            if n < 8 {
                return Err(GridError::TooFewNodes { axis: axis + 1, n });
            }
        }
        for (axis, &(a, b)) in [range1, range2].iter().enumerate() {
            if !(b > a) || !a.is_finite() || !b.is_finite() {
                return Err(GridError::BadRange { axis: axis + 1, a, b });
            }
        }
        Ok(Self {
            n1,
            n2,
            a1: range1.0,
            b1: range1.1,
            a2: range2.0,
            b2: range2.1,
            periodic1,
            periodic2,
        })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n1 * self.n2
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.n1 && j < self.n2);
        i * self.n2 + j
    }

    #[inline]
    pub fn n(&self, axis: usize) -> usize {
        if axis == 0 {
            self.n1
        } else {
            self.n2
        }
    }

    #[inline]
    pub fn periodic(&self, axis: usize) -> bool {
        if axis == 0 {
            self.periodic1
        } else {
            self.periodic2
        }
    }

    /// Node spacing along an axis.
    #[inline]
    pub fn h(&self, axis: usize) -> f64 {
        let (a, b, n, p) = if axis == 0 {
            (self.a1, self.b1, self.n1, self.periodic1)
        } else {
            (self.a2, self.b2, self.n2, self.periodic2)
        };
        if p {
            (b - a) / n as f64
        } else {
            (b - a) / (n - 1) as f64
        }
    }

    /// Coordinates of node `(i, j)`.
    #[inline]
    pub fn coord(&self, i: usize, j: usize) -> (f64, f64) {
        (
            self.a1 + i as f64 * self.h(0),
            self.a2 + j as f64 * self.h(1),
        )
    }

    /// Both axes periodic — the discrete surface closes up and integrals of
    /// exact divergences vanish.
    #[inline]
    pub fn closed(&self) -> bool {
        self.periodic1 && self.periodic2
    }

    /// Quadrature weight of one node along `axis`: rectangle rule on periodic
    /// axes (spectrally accurate for smooth periodic data), trapezoid rule on
    /// clamped axes.
    #[inline]
    pub fn axis_weight(&self, axis: usize, i: usize) -> f64 {
        let h = self.h(axis);
        if self.periodic(axis) {
            h
        } else if i == 0 || i + 1 == self.n(axis) {
            0.5 * h
        } else {
            h
        }
    }

    /// Tensor-product quadrature weight of node `(i, j)`.
    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.axis_weight(0, i) * self.axis_weight(1, j)
    }
}

/// A per-node array of values over a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Field<T> {
    pub n1: usize,
    pub n2: usize,
    pub data: Vec<T>,
}

impl<T: Copy> Field<T> {
    pub fn new(grid: &GridSpec, fill: T) -> Self {
        Self {
            n1: grid.n1,
            n2: grid.n2,
            data: vec![fill; grid.len()],
        }
    }

    pub fn from_fn(grid: &GridSpec, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(grid.len());
        for i in 0..grid.n1 {
            for j in 0..grid.n2 {
                data.push(f(i, j));
            }
        }
        Self {
            n1: grid.n1,
            n2: grid.n2,
            data,
        }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> T {
        self.data[i * self.n2 + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.n2 + j] = v;
    }

    pub fn map<U: Copy>(&self, f: impl Fn(T) -> U) -> Field<U> {
        Field {
            n1: self.n1,
            n2: self.n2,
            data: self.data.iter().map(|&t| f(t)).collect(),
        }
    }
}

impl<T> Index<(usize, usize)> for Field<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.n2 + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Field<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.n2 + j]
    }
}

/// Values that finite-difference stencils can combine linearly.
pub trait Linear: Copy {
    fn lin_zero() -> Self;
    /// `self += c · o`.
    fn lin_axpy(&mut self, c: f64, o: &Self);
}

impl Linear for f64 {
    fn lin_zero() -> Self {
        0.0
    }
    fn lin_axpy(&mut self, c: f64, o: &Self) {
        *self += c * o;
    }
}

impl<T: Linear, const N: usize> Linear for [T; N] {
    fn lin_zero() -> Self {
        [T::lin_zero(); N]
    }
    fn lin_axpy(&mut self, c: f64, o: &Self) {
        for k in 0..N {
            self[k].lin_axpy(c, &o[k]);
        }
    }
}

/// Fourth-order one-sided stencil at the first node of a clamped axis
/// (weights divided by 12h; applied at offsets 0..=4).
const EDGE0: [f64; 5] = [-25.0, 48.0, -36.0, 16.0, -3.0];
/// Fourth-order offset-one stencil at the second node (offsets −1..=3).
const EDGE1: [f64; 5] = [-3.0, -10.0, 18.0, -6.0, 1.0];
/// Fourth-order central stencil (offsets −2..=2; the 0-weight is 0).
const CENTRAL: [f64; 5] = [1.0, -8.0, 0.0, 8.0, -1.0];

/// Fourth-order accurate first derivative of a per-node field along one
/// parameter axis. Periodic axes use the five-point central stencil with
/// wraparound; clamped axes switch to one-sided stencils of the same order at
/// the two nodes nearest each boundary.
pub fn d1<T: Linear>(grid: &GridSpec, f: &Field<T>, axis: usize) -> Field<T> {
    let n = grid.n(axis);
    let inv12h = 1.0 / (12.0 * grid.h(axis));
    let periodic = grid.periodic(axis);

    let mut out = Field {
        n1: f.n1,
        n2: f.n2,
        data: vec![T::lin_zero(); f.data.len()],
    };

    let sample = |i: usize, j: usize, off: isize| -> &T {
        let p = if axis == 0 { i as isize + off } else { i as isize };
        let q = if axis == 1 { j as isize + off } else { j as isize };
        let (p, q) = (
            p.rem_euclid(grid.n1 as isize) as usize,
            q.rem_euclid(grid.n2 as isize) as usize,
        );
        &f.data[p * grid.n2 + q]
    };

    for i in 0..grid.n1 {
        for j in 0..grid.n2 {
            let pos = if axis == 0 { i } else { j };
            let (weights, base): (&[f64; 5], isize) = if periodic || (2..n - 2).contains(&pos) {
                (&CENTRAL, -2)
            } else if pos == 0 {
                (&EDGE0, 0)
            } else if pos == 1 {
                (&EDGE1, -1)
            } else if pos == n - 2 {
                (&EDGE1, -1) // mirrored below: offsets negate, weights negate
            } else {
                (&EDGE0, 0) // mirrored below
            };

            let mirrored = !periodic && pos >= n - 2;
            let mut acc = T::lin_zero();
            for (k, &w) in weights.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                let off = if mirrored {
                    -(base + k as isize)
                } else {
                    base + k as isize
                };
                let w = if mirrored { -w } else { w };
                acc.lin_axpy(w * inv12h, sample(i, j, off));
            }
            out.data[i * grid.n2 + j] = acc;
        }
    }
    out
}

/// Quadrature of a per-node scalar over the grid (the integrand must already
/// include any density factor).
pub fn integrate(grid: &GridSpec, f: &Field<f64>) -> f64 {
    let mut acc = 0.0;
    for i in 0..grid.n1 {
        for j in 0..grid.n2 {
            acc += grid.weight(i, j) * f.at(i, j);
        }
    }
    acc
}
