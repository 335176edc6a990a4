//! Truncated bivariate Taylor-jet arithmetic.
//!
//! A jet stores the value and partial derivatives of a smooth function of two
//! parameters `(u, v)` up to a fixed total order. Storage holds *derivative
//! values* `∂^i_u ∂^j_v f`, ordered by total degree `s = i + j`, then by `j`:
//! `index(i, j) = s(s+1)/2 + j`.
//!
//! Arithmetic propagates derivatives exactly — the Leibniz rule with binomial
//! weights for products, truncated Taylor composition for elementary smooth
//! functions — so a pointwise kernel written against the [`Scalar`] trait
//! returns not only its value but the exact parametric derivatives of its
//! value. Running the same kernel with `T = f64` and `T = Jet2` therefore
//! yields bitwise-consistent values, while the jet run additionally delivers
//! machine-exact first and second partials for downstream divergence and
//! Laplacian assembly.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Binomial coefficients up to n = 4 (the maximum jet order).
const BINOM: [[f64; 5]; 5] = [
    [1., 0., 0., 0., 0.],
    [1., 1., 0., 0., 0.],
    [1., 2., 1., 0., 0.],
    [1., 3., 3., 1., 0.],
    [1., 4., 6., 4., 1.],
];

/// Scalar ring shared by plain `f64` evaluation and jet evaluation.
///
/// Every pointwise geometric / energetic kernel in this crate is generic over
/// `Scalar`, which is what lets one implementation serve both the value path
/// and the exact-derivative path.
pub trait Scalar:
    Copy
    + std::fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// Embed a constant (all derivatives zero).
    fn constant(x: f64) -> Self;
    /// The first parameter as a scalar: value `u`, ∂_u = 1.
    fn var_u(u: f64) -> Self;
    /// The second parameter as a scalar: value `v`, ∂_v = 1.
    fn var_v(v: f64) -> Self;
    /// The underlying value (0-th derivative).
    fn value(self) -> f64;
    /// Multiply by a plain constant.
    fn scale(self, s: f64) -> Self;
    fn recip(self) -> Self;
    fn sqrt(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn exp(self) -> Self;

    fn zero() -> Self {
        Self::constant(0.0)
    }
    fn one() -> Self {
        Self::constant(1.0)
    }
    /// Small non-negative integer power by repeated multiplication.
    fn powi(self, n: u32) -> Self {
        let mut acc = Self::one();
        for _ in 0..n {
            acc = acc * self;
        }
        acc
    }
}

impl Scalar for f64 {
    fn constant(x: f64) -> Self {
        x
    }
    fn var_u(u: f64) -> Self {
        u
    }
    fn var_v(v: f64) -> Self {
        v
    }
    fn value(self) -> f64 {
        self
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn recip(self) -> Self {
        1.0 / self
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
}

macro_rules! define_jet {
    ($(#[$meta:meta])* $name:ident, $order:expr, $len:expr) => {
        $(#[$meta])*
        #[derive(Clone, Copy, Debug, PartialEq)]
        pub struct $name {
            /// Derivative values `∂^i_u ∂^j_v f` at `index(i,j) = (i+j)(i+j+1)/2 + j`.
            pub c: [f64; $len],
        }

        impl $name {
            pub const ORDER: usize = $order;
            pub const LEN: usize = $len;

            /// Flat index of the `(i, j)` derivative.
            #[inline]
            pub fn idx(i: usize, j: usize) -> usize {
                let s = i + j;
                s * (s + 1) / 2 + j
            }

            /// Derivative value `∂^i_u ∂^j_v f`.
            #[inline]
            pub fn d(&self, i: usize, j: usize) -> f64 {
                debug_assert!(i + j <= $order);
                self.c[Self::idx(i, j)]
            }

            #[inline]
            pub fn set(&mut self, i: usize, j: usize, x: f64) {
                debug_assert!(i + j <= $order);
                self.c[Self::idx(i, j)] = x;
            }

            /// Truncated Taylor composition `g(f)` given the series
            /// coefficients `a[k] = g^{(k)}(f.value()) / k!`.
            fn compose(self, a: &[f64; $order + 1]) -> Self {
                // Horner evaluation in jet arithmetic on δ = f − f(0).
                let mut delta = self;
                delta.c[0] = 0.0;
                let mut r = Self::constant(a[$order]);
                let mut k = $order;
                while k > 0 {
                    k -= 1;
                    r = r * delta + Self::constant(a[k]);
                }
                r
            }
        }

        impl Add for $name {
            type Output = Self;
            fn add(mut self, rhs: Self) -> Self {
                for k in 0..Self::LEN {
                    self.c[k] += rhs.c[k];
                }
                self
            }
        }

        impl Sub for $name {
            type Output = Self;
            fn sub(mut self, rhs: Self) -> Self {
                for k in 0..Self::LEN {
                    self.c[k] -= rhs.c[k];
                }
                self
            }
        }

        impl Neg for $name {
            type Output = Self;
            fn neg(mut self) -> Self {
                for k in 0..Self::LEN {
                    self.c[k] = -self.c[k];
                }
                self
            }
        }

        impl Mul for $name {
            type Output = Self;
            fn mul(self, rhs: Self) -> Self {
                // Leibniz: (fg)^{(i,j)} = Σ C(i,p) C(j,q) f^{(p,q)} g^{(i−p, j−q)}.
                let mut out = [0.0f64; $len];
                for i in 0..=$order {
                    for j in 0..=($order - i) {
                        let mut acc = 0.0;
                        for p in 0..=i {
                            for q in 0..=j {
                                acc += BINOM[i][p]
                                    * BINOM[j][q]
                                    * self.d(p, q)
                                    * rhs.d(i - p, j - q);
                            }
                        }
                        out[Self::idx(i, j)] = acc;
                    }
                }
                Self { c: out }
            }
        }

        impl Div for $name {
            type Output = Self;
            fn div(self, rhs: Self) -> Self {
                self * rhs.recip()
            }
        }

        impl Scalar for $name {
            fn constant(x: f64) -> Self {
                let mut c = [0.0; $len];
                c[0] = x;
                Self { c }
            }

            fn var_u(u: f64) -> Self {
                let mut j = Self::constant(u);
                j.c[Self::idx(1, 0)] = 1.0;
                j
            }

            fn var_v(v: f64) -> Self {
                let mut j = Self::constant(v);
                j.c[Self::idx(0, 1)] = 1.0;
                j
            }

            fn value(self) -> f64 {
                self.c[0]
            }

            fn scale(mut self, s: f64) -> Self {
                for k in 0..Self::LEN {
                    self.c[k] *= s;
                }
                self
            }

            fn recip(self) -> Self {
                // a_k = (−1)^k / f0^{k+1}
                let f0 = self.c[0];
                let mut a = [0.0f64; $order + 1];
                let mut cur = 1.0 / f0;
                for k in 0..=$order {
                    a[k] = cur;
                    cur = -cur / f0;
                }
                self.compose(&a)
            }

            fn sqrt(self) -> Self {
                // a_0 = √f0, a_k = a_{k−1} (3/2 − k) / (k f0)
                let f0 = self.c[0];
                let mut a = [0.0f64; $order + 1];
                a[0] = f64::sqrt(f0);
                for k in 1..=$order {
                    a[k] = a[k - 1] * (1.5 / k as f64 - 1.0) / f0;
                }
                self.compose(&a)
            }

            fn sin(self) -> Self {
                let (s, c) = f64::sin_cos(self.c[0]);
                let cycle = [s, c, -s, -c];
                let mut a = [0.0f64; $order + 1];
                let mut fact = 1.0;
                for k in 0..=$order {
                    if k > 0 {
                        fact *= k as f64;
                    }
                    a[k] = cycle[k % 4] / fact;
                }
                self.compose(&a)
            }

            fn cos(self) -> Self {
                let (s, c) = f64::sin_cos(self.c[0]);
                let cycle = [c, -s, -c, s];
                let mut a = [0.0f64; $order + 1];
                let mut fact = 1.0;
                for k in 0..=$order {
                    if k > 0 {
                        fact *= k as f64;
                    }
                    a[k] = cycle[k % 4] / fact;
                }
                self.compose(&a)
            }

            fn exp(self) -> Self {
                let e = f64::exp(self.c[0]);
                let mut a = [0.0f64; $order + 1];
                let mut fact = 1.0;
                for k in 0..=$order {
                    if k > 0 {
                        fact *= k as f64;
                    }
                    a[k] = e / fact;
                }
                self.compose(&a)
            }
        }
    };
}

define_jet!(
    /// First-order jet: value and the two first partials.
    Jet1, 1, 3
);
define_jet!(
    /// Second-order jet: value, first and second partials.
    Jet2, 2, 6
);
define_jet!(
    /// Fourth-order jet: all partials through total degree four.
    Jet4, 4, 15
);

impl Jet1 {
    pub fn new(val: f64, d10: f64, d01: f64) -> Self {
        Self { c: [val, d10, d01] }
    }
    #[inline]
    pub fn d10(&self) -> f64 {
        self.c[1]
    }
    #[inline]
    pub fn d01(&self) -> f64 {
        self.c[2]
    }
    /// The ∂-coefficient along a parameter axis (0 → u, 1 → v).
    #[inline]
    pub fn d_axis(&self, axis: usize) -> f64 {
        self.c[1 + axis]
    }
}

impl Jet2 {
    pub fn new(val: f64, d10: f64, d01: f64, d20: f64, d11: f64, d02: f64) -> Self {
        Self { c: [val, d10, d01, d20, d11, d02] }
    }

    /// Forget second-order information.
    pub fn truncate(self) -> Jet1 {
        Jet1 { c: [self.c[0], self.c[1], self.c[2]] }
    }

    /// The derivative of this jet along a parameter axis, as a jet one order
    /// lower: `(∂_a f)` with its own first partials.
    pub fn derive(self, axis: usize) -> Jet1 {
        match axis {
            0 => Jet1 { c: [self.d(1, 0), self.d(2, 0), self.d(1, 1)] },
            1 => Jet1 { c: [self.d(0, 1), self.d(1, 1), self.d(0, 2)] },
            _ => panic!("axis must be 0 or 1"),
        }
    }
}

/// Dot product of 3-vectors with scalar-ring entries.
#[inline]
pub fn dot3<T: Scalar>(a: &[T; 3], b: &[T; 3]) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Cross product of 3-vectors with scalar-ring entries.
#[inline]
pub fn cross3<T: Scalar>(a: &[T; 3], b: &[T; 3]) -> [T; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// `a + c·b` on 3-vectors.
#[inline]
pub fn axpy3<T: Scalar>(a: &[T; 3], c: T, b: &[T; 3]) -> [T; 3] {
    [a[0] + c * b[0], a[1] + c * b[1], a[2] + c * b[2]]
}

/// `c·a` on 3-vectors.
#[inline]
pub fn smul3<T: Scalar>(c: T, a: &[T; 3]) -> [T; 3] {
    [c * a[0], c * a[1], c * a[2]]
}

#[cfg(test)]
mod tests {
    use super::*;

    /// A representative composite expression exercising every elementary
    /// operation; generic so the identical code runs on `f64` and on jets.
    fn sample_expr<T: Scalar>(u: T, v: T) -> T {
        let a = (u * v.scale(0.7)).sin() + (u.scale(0.3) - v).cos();
        let b = (u * u + v * v + T::constant(1.5)).sqrt();
        let c = (u.scale(0.2) + v.scale(-0.1)).exp();
        a * b.recip() + c * a * a - b / (c + T::constant(2.0))
    }

    fn fd4(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
        (-f(x + 2.0 * h) + 8.0 * f(x + h) - 8.0 * f(x - h) + f(x - 2.0 * h)) / (12.0 * h)
    }

    #[test]
    fn jet2_partials_match_finite_differences_of_f64_path() {
        let (u0, v0) = (0.4, -0.65);
        let j = sample_expr(Jet2::var_u(u0), Jet2::var_v(v0));
        let f = |u: f64, v: f64| sample_expr(u, v);
        let h = 2e-3;

        assert!((j.value() - f(u0, v0)).abs() < 1e-14);
        assert!((j.d(1, 0) - fd4(|u| f(u, v0), u0, h)).abs() < 1e-9);
        assert!((j.d(0, 1) - fd4(|v| f(u0, v), v0, h)).abs() < 1e-9);
        assert!((j.d(2, 0) - fd4(|u| fd4(|w| f(w, v0), u, h), u0, h)).abs() < 1e-7);
        assert!((j.d(0, 2) - fd4(|v| fd4(|w| f(u0, w), v, h), v0, h)).abs() < 1e-7);
        assert!((j.d(1, 1) - fd4(|u| fd4(|w| f(u, w), v0, h), u0, h)).abs() < 1e-7);
    }

    #[test]
    fn jet4_high_order_partials_match_finite_differences() {
        let (u0, v0) = (0.31, 0.57);
        let j = sample_expr(Jet4::var_u(u0), Jet4::var_v(v0));
        let f = |u: f64, v: f64| sample_expr(u, v);
        let h = 2e-2;

        // Third partials via nested 4th-order stencils.
        let d30 = fd4(|u| fd4(|a| fd4(|b| f(b, v0), a, h), u, h), u0, h);
        let d21 = fd4(|u| fd4(|a| fd4(|w| f(a, w), v0, h), u, h), u0, h);
        let d12 = fd4(|v| fd4(|w| fd4(|a| f(a, w), u0, h), v, h), v0, h);
        assert!((j.d(3, 0) - d30).abs() < 2e-5, "d30 {} vs {}", j.d(3, 0), d30);
        assert!((j.d(2, 1) - d21).abs() < 2e-5);
        assert!((j.d(1, 2) - d12).abs() < 2e-5);

        // A fourth partial.
        let d22 = fd4(
            |u| fd4(|a| fd4(|v| fd4(|w| f(a, w), v, h), v0, h), u, h),
            u0,
            h,
        );
        assert!((j.d(2, 2) - d22).abs() < 2e-3, "d22 {} vs {}", j.d(2, 2), d22);
    }

    #[test]
    fn algebraic_inverse_identities_hold_componentwise() {
        let j = sample_expr(Jet4::var_u(0.9), Jet4::var_v(0.2)) + Jet4::constant(4.0);
        let sq = j.sqrt();
        let back = sq * sq;
        let inv = j.recip() * j;
        let trig = j.sin() * j.sin() + j.cos() * j.cos();
        for k in 0..Jet4::LEN {
            assert!((back.c[k] - j.c[k]).abs() < 1e-10 * (1.0 + j.c[k].abs()));
            let expect = if k == 0 { 1.0 } else { 0.0 };
            assert!((inv.c[k] - expect).abs() < 1e-10);
            assert!((trig.c[k] - expect).abs() < 1e-10);
        }
    }

    #[test]
    fn derive_obeys_leibniz_rule() {
        let a = sample_expr(Jet2::var_u(0.5), Jet2::var_v(1.1));
        let b = (Jet2::var_u(0.5) * Jet2::var_v(1.1)).cos() + Jet2::constant(0.3);
        for axis in 0..2 {
            let lhs = (a * b).derive(axis);
            let rhs = a.derive(axis) * b.truncate() + a.truncate() * b.derive(axis);
            for k in 0..Jet1::LEN {
                assert!((lhs.c[k] - rhs.c[k]).abs() < 1e-12 * (1.0 + lhs.c[k].abs()));
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn ring_axioms_up_to_roundoff(
            x in -2.0f64..2.0, y in -2.0f64..2.0,
            z in -2.0f64..2.0, w in -2.0f64..2.0
        ) {
            let a = Jet4::var_u(x) * Jet4::var_v(y) + Jet4::constant(z);
            let b = (Jet4::var_u(y).scale(0.5)).sin() + Jet4::constant(w);
            let c = Jet4::var_v(x) * Jet4::constant(0.25) + Jet4::var_u(w);

            let left = (a * b) * c;
            let right = a * (b * c);
            let dist = a * (b + c);
            let dist2 = a * b + a * c;
            for k in 0..Jet4::LEN {
                let scale = 1.0 + left.c[k].abs() + dist.c[k].abs();
                proptest::prop_assert!((left.c[k] - right.c[k]).abs() < 1e-10 * scale);
                proptest::prop_assert!((dist.c[k] - dist2.c[k]).abs() < 1e-10 * scale);
            }
        }
    }
}
