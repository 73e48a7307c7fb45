//! Truncated Taylor series in one variable.
//!
//! A `Jet` of degree `d` stores the coefficients `c[k] = f^(k)(s0) / k!`
//! for `k = 0..=d`. Arithmetic is closed under truncation, so composing
//! smooth maps along a line `x0 + s v` yields exact directional
//! derivatives up to the chosen degree.

use num_complex::Complex64;
use std::ops::{Add, Mul, Neg, Sub};

#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    pub c: Vec<f64>,
}

impl Jet {
    pub fn constant(v: f64, degree: usize) -> Self {
        let mut c = vec![0.0; degree + 1];
        c[0] = v;
        Jet { c }
    }

    /// The identity jet `s0 + s`, scaled by `slope`.
    pub fn variable(v: f64, slope: f64, degree: usize) -> Self {
        let mut c = vec![0.0; degree + 1];
        c[0] = v;
        if degree >= 1 {
            c[1] = slope;
        }
        Jet { c }
    }

    pub fn degree(&self) -> usize {
        self.c.len() - 1
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    /// k-th derivative at the expansion point.
    pub fn derivative_at(&self, k: usize) -> f64 {
        if k >= self.c.len() {
            return 0.0;
        }
        self.c[k] * factorial(k)
    }

    pub fn scale(&self, a: f64) -> Jet {
        Jet {
            c: self.c.iter().map(|v| v * a).collect(),
        }
    }

    pub fn add_scalar(&self, a: f64) -> Jet {
        let mut out = self.clone();
        out.c[0] += a;
        out
    }

    pub fn powi(&self, n: u32) -> Jet {
        let d = self.degree();
        let mut acc = Jet::constant(1.0, d);
        for _ in 0..n {
            acc = &acc * self;
        }
        acc
    }

    /// Square root; requires a positive constant term.
    pub fn sqrt(&self) -> Jet {
        let d = self.degree();
        let mut r = vec![0.0; d + 1];
        r[0] = self.c[0].sqrt();
        for k in 1..=d {
            let mut s = self.c[k];
            for j in 1..k {
                s -= r[j] * r[k - j];
            }
            r[k] = s / (2.0 * r[0]);
        }
        Jet { c: r }
    }

    pub fn recip(&self) -> Jet {
        let d = self.degree();
        let mut r = vec![0.0; d + 1];
        r[0] = 1.0 / self.c[0];
        for k in 1..=d {
            let mut s = 0.0;
            for j in 1..=k {
                s += self.c[j] * r[k - j];
            }
            r[k] = -s * r[0];
        }
        Jet { c: r }
    }

    /// Horner evaluation of a polynomial with coefficients `coeffs` at this jet.
    pub fn polynomial(&self, coeffs: &[f64]) -> Jet {
        let d = self.degree();
        let mut acc = Jet::constant(0.0, d);
        for &a in coeffs.iter().rev() {
            acc = (&acc * self).add_scalar(a);
        }
        acc
    }

    /// Evaluate the truncated series at offset `s` from the expansion point.
    pub fn eval(&self, s: f64) -> f64 {
        self.c.iter().rev().fold(0.0, |acc, &a| acc * s + a)
    }
}

impl<'a> Add<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        Jet {
            c: self.c.iter().zip(&rhs.c).map(|(a, b)| a + b).collect(),
        }
    }
}

impl<'a> Sub<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        Jet {
            c: self.c.iter().zip(&rhs.c).map(|(a, b)| a - b).collect(),
        }
    }
}

impl<'a> Mul<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        let d = self.degree().min(rhs.degree());
        let mut c = vec![0.0; d + 1];
        for (i, a) in self.c.iter().enumerate().take(d + 1) {
            if *a == 0.0 {
                continue;
            }
            for (j, b) in rhs.c.iter().enumerate().take(d + 1 - i) {
                c[i + j] += a * b;
            }
        }
        Jet { c }
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

pub(crate) fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, i| acc * i as f64)
}

/// Complex truncated Taylor series, used by the WKB recursion.
#[derive(Clone, Debug)]
pub struct CJet {
    pub c: Vec<Complex64>,
}

impl CJet {
    pub fn from_real(j: &Jet) -> Self {
        CJet {
            c: j.c.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        }
    }

    pub fn zero(degree: usize) -> Self {
        CJet {
            c: vec![Complex64::new(0.0, 0.0); degree + 1],
        }
    }

    pub fn degree(&self) -> usize {
        self.c.len() - 1
    }

    pub fn mul(&self, rhs: &CJet) -> CJet {
        let d = self.degree().min(rhs.degree());
        let mut c = vec![Complex64::new(0.0, 0.0); d + 1];
        for i in 0..=d {
            for j in 0..=(d - i) {
                c[i + j] += self.c[i] * rhs.c[j];
            }
        }
        CJet { c }
    }

    /// Derivative; the result has degree one lower.
    pub fn derivative(&self) -> CJet {
        if self.c.len() <= 1 {
            return CJet::zero(0);
        }
        CJet {
            c: (1..self.c.len()).map(|k| self.c[k] * k as f64).collect(),
        }
    }

    pub fn truncate(&self, degree: usize) -> CJet {
        CJet {
            c: self.c.iter().take(degree + 1).cloned().collect(),
        }
    }

    pub fn scale(&self, a: Complex64) -> CJet {
        CJet {
            c: self.c.iter().map(|v| v * a).collect(),
        }
    }

    pub fn add(&self, rhs: &CJet) -> CJet {
        let d = self.degree().min(rhs.degree());
        CJet {
            c: (0..=d).map(|k| self.c[k] + rhs.c[k]).collect(),
        }
    }

    pub fn value(&self) -> Complex64 {
        self.c[0]
    }

    pub fn recip(&self) -> CJet {
        let d = self.degree();
        let mut r = vec![Complex64::new(0.0, 0.0); d + 1];
        r[0] = 1.0 / self.c[0];
        for k in 1..=d {
            let mut s = Complex64::new(0.0, 0.0);
            for j in 1..=k {
                s += self.c[j] * r[k - j];
            }
            r[k] = -s * r[0];
        }
        CJet { c: r }
    }
}
