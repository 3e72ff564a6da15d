//! Truncated bivariate Taylor series and the scalar abstraction used to write
//! parametrizations once and evaluate them either pointwise or as jets.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Index of the coefficient of `du^i dv^j` in the packed triangular layout.
#[inline]
pub fn tri_index(i: usize, j: usize) -> usize {
    let n = i + j;
    n * (n + 1) / 2 + j
}

/// Number of coefficients of a series of total degree `deg`.
#[inline]
pub fn tri_len(deg: usize) -> usize {
    (deg + 1) * (deg + 2) / 2
}

/// Polynomial in two variables truncated at total degree `deg`.
/// Coefficients are Taylor coefficients, so `coeff(i, j)` equals
/// the mixed partial divided by `i! j!`.
#[derive(Clone, Debug, PartialEq)]
pub struct Taylor2 {
    deg: usize,
    c: Vec<f64>,
}

impl Taylor2 {
    pub fn zero(deg: usize) -> Self {
        Self { deg, c: vec![0.0; tri_len(deg)] }
    }

    pub fn constant(value: f64, deg: usize) -> Self {
        let mut s = Self::zero(deg);
        s.c[0] = value;
        s
    }

    /// The series of the first variable expanded around `u0`.
    pub fn var_u(u0: f64, deg: usize) -> Self {
        let mut s = Self::constant(u0, deg);
        if deg >= 1 {
            s.c[tri_index(1, 0)] = 1.0;
        }
        s
    }

    /// The series of the second variable expanded around `v0`.
    pub fn var_v(v0: f64, deg: usize) -> Self {
        let mut s = Self::constant(v0, deg);
        if deg >= 1 {
            s.c[tri_index(0, 1)] = 1.0;
        }
        s
    }

    pub fn from_coeffs(deg: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut s = Self::zero(deg);
        for n in 0..=deg {
            for j in 0..=n {
                s.c[tri_index(n - j, j)] = f(n - j, j);
            }
        }
        s
    }

    pub fn deg(&self) -> usize {
        self.deg
    }

    pub fn coeff(&self, i: usize, j: usize) -> f64 {
        if i + j > self.deg {
            0.0
        } else {
            self.c[tri_index(i, j)]
        }
    }

    pub fn set_coeff(&mut self, i: usize, j: usize, value: f64) {
        self.c[tri_index(i, j)] = value;
    }

    /// Mixed partial derivative at the expansion point.
    pub fn partial(&self, i: usize, j: usize) -> f64 {
        self.coeff(i, j) * factorial(i) * factorial(j)
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    pub fn truncate(&self, deg: usize) -> Self {
        let deg = deg.min(self.deg);
        Self::from_coeffs(deg, |i, j| self.coeff(i, j))
    }

    /// Derivative with respect to the first variable (degree drops by one).
    pub fn diff_u(&self) -> Self {
        let deg = self.deg.saturating_sub(1);
        Self::from_coeffs(deg, |i, j| (i + 1) as f64 * self.coeff(i + 1, j))
    }

    pub fn diff_v(&self) -> Self {
        let deg = self.deg.saturating_sub(1);
        Self::from_coeffs(deg, |i, j| (j + 1) as f64 * self.coeff(i, j + 1))
    }

    /// Evaluate the polynomial at displacement `(du, dv)`.
    pub fn eval(&self, du: f64, dv: f64) -> f64 {
        let mut acc = 0.0;
        let mut pu = 1.0;
        for i in 0..=self.deg {
            let mut pv = 1.0;
            for j in 0..=(self.deg - i) {
                acc += self.c[tri_index(i, j)] * pu * pv;
                pv *= dv;
            }
            pu *= du;
        }
        acc
    }

    /// Homogeneous part of total degree `n` as coefficients of `x^(n-j) y^j`.
    pub fn homogeneous(&self, n: usize) -> Vec<f64> {
        (0..=n).map(|j| self.coeff(n - j, j)).collect()
    }

    fn mul_series(&self, o: &Self) -> Self {
        let deg = self.deg.min(o.deg);
        let mut r = Self::zero(deg);
        for n1 in 0..=deg {
            for j1 in 0..=n1 {
                let a = self.c[tri_index(n1 - j1, j1)];
                if a == 0.0 {
                    continue;
                }
                for n2 in 0..=(deg - n1) {
                    for j2 in 0..=n2 {
                        r.c[tri_index(n1 - j1 + n2 - j2, j1 + j2)] += a * o.c[tri_index(n2 - j2, j2)];
                    }
                }
            }
        }
        r
    }

    /// `f(self)` where `derivs[k]` is the k-th derivative of `f` at the constant term.
    pub fn compose_univariate(&self, derivs: &[f64]) -> Self {
        let mut h = self.clone();
        h.c[0] = 0.0;
        let mut r = Self::constant(derivs[0], self.deg);
        let mut hp = Self::constant(1.0, self.deg);
        let mut fact = 1.0;
        for (k, d) in derivs.iter().enumerate().skip(1).take(self.deg) {
            hp = hp.mul_series(&h);
            fact *= k as f64;
            let w = d / fact;
            for (rc, hc) in r.c.iter_mut().zip(&hp.c) {
                *rc += w * hc;
            }
        }
        r
    }

    /// Substitute `u = p`, `v = q` where `p`, `q` are series without constant term
    /// requirements; only their non-constant parts are composed, the constant
    /// terms give the expansion point of `self`.
    pub fn compose(&self, p: &Taylor2, q: &Taylor2) -> Taylor2 {
        let deg = p.deg.min(q.deg);
        let mut hp = p.truncate(deg);
        hp.c[0] = 0.0;
        let mut hq = q.truncate(deg);
        hq.c[0] = 0.0;
        let mut pows_p = vec![Taylor2::constant(1.0, deg)];
        let mut pows_q = vec![Taylor2::constant(1.0, deg)];
        for k in 1..=self.deg.min(deg) {
            pows_p.push(pows_p[k - 1].mul_series(&hp));
            pows_q.push(pows_q[k - 1].mul_series(&hq));
        }
        let mut r = Taylor2::zero(deg);
        for n in 0..=self.deg.min(deg) {
            for j in 0..=n {
                let a = self.coeff(n - j, j);
                if a == 0.0 {
                    continue;
                }
                let t = pows_p[n - j].mul_series(&pows_q[j]);
                for (rc, tc) in r.c.iter_mut().zip(&t.c) {
                    *rc += a * tc;
                }
            }
        }
        r
    }
}

/// Invert a map `(x, y) = (p(u, v), q(u, v))` with `p(0,0) = q(0,0) = 0` and
/// invertible linear part. Returns `(u(x, y), v(x, y))` as series without
/// constant term.
pub fn invert_map(p: &Taylor2, q: &Taylor2) -> Option<(Taylor2, Taylor2)> {
    let deg = p.deg().min(q.deg());
    let (a, b, c, d) = (p.coeff(1, 0), p.coeff(0, 1), q.coeff(1, 0), q.coeff(0, 1));
    let det = a * d - b * c;
    if det.abs() < 1e-300 {
        return None;
    }
    let (ia, ib, ic, id) = (d / det, -b / det, -c / det, a / det);
    let x = Taylor2::var_u(0.0, deg);
    let y = Taylor2::var_v(0.0, deg);
    // Fixed point: w = L^{-1}((x,y) - N(w)) where N is the nonlinear part.
    let mut np = p.clone();
    np.c[0] = 0.0;
    np.c[tri_index(1, 0)] = 0.0;
    np.c[tri_index(0, 1)] = 0.0;
    let mut nq = q.clone();
    nq.c[0] = 0.0;
    nq.c[tri_index(1, 0)] = 0.0;
    nq.c[tri_index(0, 1)] = 0.0;
    let mut u = &x * ia + &y * ib;
    let mut v = &x * ic + &y * id;
    for _ in 0..deg {
        let rp = &x - &np.compose(&u, &v);
        let rq = &y - &nq.compose(&u, &v);
        u = &rp * ia + &rq * ib;
        v = &rp * ic + &rq * id;
    }
    Some((u, v))
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

macro_rules! binop {
    ($tr:ident, $m:ident, $body:expr) => {
        impl $tr<&Taylor2> for &Taylor2 {
            type Output = Taylor2;
            fn $m(self, o: &Taylor2) -> Taylor2 {
                let f: fn(&Taylor2, &Taylor2) -> Taylor2 = $body;
                f(self, o)
            }
        }
        impl $tr<Taylor2> for Taylor2 {
            type Output = Taylor2;
            fn $m(self, o: Taylor2) -> Taylor2 {
                (&self).$m(&o)
            }
        }
        impl $tr<&Taylor2> for Taylor2 {
            type Output = Taylor2;
            fn $m(self, o: &Taylor2) -> Taylor2 {
                (&self).$m(o)
            }
        }
        impl $tr<Taylor2> for &Taylor2 {
            type Output = Taylor2;
            fn $m(self, o: Taylor2) -> Taylor2 {
                self.$m(&o)
            }
        }
    };
}

binop!(Add, add, |a, b| {
    let deg = a.deg.min(b.deg);
    Taylor2::from_coeffs(deg, |i, j| a.coeff(i, j) + b.coeff(i, j))
});
binop!(Sub, sub, |a, b| {
    let deg = a.deg.min(b.deg);
    Taylor2::from_coeffs(deg, |i, j| a.coeff(i, j) - b.coeff(i, j))
});
binop!(Mul, mul, |a, b| a.mul_series(b));
binop!(Div, div, |a, b| a.mul_series(&b.recip_series()));

impl Taylor2 {
    fn recip_series(&self) -> Taylor2 {
        let a0 = self.c[0];
        let mut d = Vec::with_capacity(self.deg + 1);
        let mut f = 1.0 / a0;
        for k in 0..=self.deg {
            d.push(f);
            f *= -((k + 1) as f64) / a0;
        }
        self.compose_univariate(&d)
    }
}

macro_rules! scalarop {
    ($tr:ident, $m:ident, $op:tt) => {
        impl $tr<f64> for &Taylor2 {
            type Output = Taylor2;
            fn $m(self, o: f64) -> Taylor2 {
                let mut r = self.clone();
                scalarop!(@apply r, o, $op);
                r
            }
        }
        impl $tr<f64> for Taylor2 {
            type Output = Taylor2;
            fn $m(self, o: f64) -> Taylor2 {
                (&self).$m(o)
            }
        }
    };
    (@apply $r:ident, $o:ident, +) => { $r.c[0] += $o; };
    (@apply $r:ident, $o:ident, -) => { $r.c[0] -= $o; };
    (@apply $r:ident, $o:ident, *) => { for x in $r.c.iter_mut() { *x *= $o; } };
    (@apply $r:ident, $o:ident, /) => { for x in $r.c.iter_mut() { *x /= $o; } };
}

scalarop!(Add, add, +);
scalarop!(Sub, sub, -);
scalarop!(Mul, mul, *);
scalarop!(Div, div, /);

impl Neg for Taylor2 {
    type Output = Taylor2;
    fn neg(self) -> Taylor2 {
        self * -1.0
    }
}

impl Neg for &Taylor2 {
    type Output = Taylor2;
    fn neg(self) -> Taylor2 {
        self * -1.0
    }
}

/// Scalar type usable inside parametrizations: `f64` for points, [`Taylor2`]
/// for jets. Constants enter through the mixed `f64` operators.
pub trait Real:
    Clone
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    fn value(&self) -> f64;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn sinh(&self) -> Self;
    fn cosh(&self) -> Self;
    fn exp(&self) -> Self;
    fn sqrt(&self) -> Self;
    fn recip(&self) -> Self;
    /// A constant of the same shape as `self`.
    fn lift(&self, c: f64) -> Self;

    fn powi(&self, n: u32) -> Self {
        let mut r = self.lift(1.0);
        for _ in 0..n {
            r = r * self.clone();
        }
        r
    }
}

impl Real for f64 {
    fn value(&self) -> f64 {
        *self
    }
    fn sin(&self) -> Self {
        f64::sin(*self)
    }
    fn cos(&self) -> Self {
        f64::cos(*self)
    }
    fn sinh(&self) -> Self {
        f64::sinh(*self)
    }
    fn cosh(&self) -> Self {
        f64::cosh(*self)
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
    fn recip(&self) -> Self {
        1.0 / *self
    }
    fn lift(&self, c: f64) -> Self {
        c
    }
}

impl Real for Taylor2 {
    fn value(&self) -> f64 {
        self.c[0]
    }
    fn sin(&self) -> Self {
        let (s, c) = self.c[0].sin_cos();
        let d: Vec<f64> = (0..=self.deg).map(|k| [s, c, -s, -c][k % 4]).collect();
        self.compose_univariate(&d)
    }
    fn cos(&self) -> Self {
        let (s, c) = self.c[0].sin_cos();
        let d: Vec<f64> = (0..=self.deg).map(|k| [c, -s, -c, s][k % 4]).collect();
        self.compose_univariate(&d)
    }
    fn sinh(&self) -> Self {
        let (s, c) = (self.c[0].sinh(), self.c[0].cosh());
        let d: Vec<f64> = (0..=self.deg).map(|k| if k % 2 == 0 { s } else { c }).collect();
        self.compose_univariate(&d)
    }
    fn cosh(&self) -> Self {
        let (s, c) = (self.c[0].sinh(), self.c[0].cosh());
        let d: Vec<f64> = (0..=self.deg).map(|k| if k % 2 == 0 { c } else { s }).collect();
        self.compose_univariate(&d)
    }
    fn exp(&self) -> Self {
        let e = self.c[0].exp();
        self.compose_univariate(&vec![e; self.deg + 1])
    }
    fn sqrt(&self) -> Self {
        let a0 = self.c[0];
        let mut d = Vec::with_capacity(self.deg + 1);
        let mut f = a0.sqrt();
        let mut e = 0.5;
        for _ in 0..=self.deg {
            d.push(f);
            f *= e / a0;
            e -= 1.0;
        }
        self.compose_univariate(&d)
    }
    fn recip(&self) -> Self {
        self.recip_series()
    }
    fn lift(&self, c: f64) -> Self {
        Taylor2::constant(c, self.deg)
    }
}
