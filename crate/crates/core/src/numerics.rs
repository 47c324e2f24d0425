//! Complex polynomials, simultaneous root finding, truncated power series and
//! compensated summation.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default residual tolerance for root finding.
pub const DEFAULT_TOL: f64 = 1e-12;
/// Iteration cap of the simultaneous root iteration.
pub const ROOT_ITERATION_CAP: usize = 200;

/// A complex polynomial stored with ascending coefficients.
///
/// The leading coefficient is always nonzero, so `degree() == coeffs.len() - 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Complex64>", into = "Vec<Complex64>")]
pub struct Polynomial {
    coeffs: Vec<Complex64>,
}

impl Polynomial {
    /// Builds a polynomial from ascending coefficients, trimming trailing zeros.
    pub fn new(mut coeffs: Vec<Complex64>) -> Result<Self> {
        while coeffs.len() > 1 && coeffs.last().is_some_and(|c| c.norm() == 0.0) {
            coeffs.pop();
        }
        if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("polynomial needs finite coefficients".into()));
        }
        Ok(Self { coeffs })
    }

    /// Builds a polynomial from real ascending coefficients.
    pub fn from_real(coeffs: &[f64]) -> Result<Self> {
        Self::new(coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect())
    }

    /// The monomial `z`.
    pub fn identity() -> Self {
        Self {
            coeffs: vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
        }
    }

    /// A constant polynomial.
    pub fn constant(c: Complex64) -> Self {
        Self { coeffs: vec![c] }
    }

    /// `c * z + z^2`, the quadratic family with a fixed point of multiplier `c` at 0.
    pub fn quadratic_with_multiplier(c: Complex64) -> Self {
        Self {
            coeffs: vec![Complex64::new(0.0, 0.0), c, Complex64::new(1.0, 0.0)],
        }
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn leading(&self) -> Complex64 {
        self.coeffs[self.degree()]
    }

    /// Largest coefficient modulus, the residual scale used by root finding.
    pub fn scale(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Horner evaluation of `p(z)` together with `p'(z)`.
    pub fn eval(&self, z: Complex64) -> (Complex64, Complex64) {
        let mut value = Complex64::new(0.0, 0.0);
        let mut deriv = Complex64::new(0.0, 0.0);
        for &c in self.coeffs.iter().rev() {
            deriv = deriv * z + value;
            value = value * z + c;
        }
        (value, deriv)
    }

    pub fn value(&self, z: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    pub fn derivative(&self) -> Option<Polynomial> {
        if self.degree() == 0 {
            return None;
        }
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, &c)| c * k as f64)
            .collect();
        Some(Self { coeffs })
    }

    /// `p(z) - w`.
    pub fn shifted(&self, w: Complex64) -> Polynomial {
        let mut coeffs = self.coeffs.clone();
        coeffs[0] -= w;
        Self { coeffs }
    }

    /// `p(z) - z`, whose roots are the fixed points.
    pub fn minus_identity(&self) -> Result<Polynomial> {
        let mut coeffs = self.coeffs.clone();
        if coeffs.len() < 2 {
            coeffs.push(Complex64::new(0.0, 0.0));
        }
        coeffs[1] -= 1.0;
        Polynomial::new(coeffs)
    }

    /// Taylor coefficients of `p` at `center`: `p(center + h) = sum_j c_j h^j`.
    pub fn taylor_at(&self, center: Complex64) -> Vec<Complex64> {
        // repeated synthetic division
        let mut work = self.coeffs.clone();
        let n = work.len();
        let mut out = Vec::with_capacity(n);
        for j in 0..n {
            for k in (j..n - 1).rev() {
                let upper = work[k + 1];
                work[k] += upper * center;
            }
            out.push(work[j]);
        }
        out
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        let mut coeffs = vec![Complex64::new(0.0, 0.0); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in other.coeffs.iter().enumerate() {
                coeffs[i + j] += a * b;
            }
        }
        Polynomial::new(coeffs).unwrap_or_else(|_| Polynomial::constant(Complex64::new(0.0, 0.0)))
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        let len = self.coeffs.len().max(other.coeffs.len());
        let coeffs = (0..len)
            .map(|k| self.coeffs.get(k).copied().unwrap_or_default() + other.coeffs.get(k).copied().unwrap_or_default())
            .collect();
        Polynomial::new(coeffs).unwrap_or_else(|_| Polynomial::constant(Complex64::new(0.0, 0.0)))
    }

    pub fn scaled(&self, c: Complex64) -> Polynomial {
        Polynomial::new(self.coeffs.iter().map(|&a| a * c).collect())
            .unwrap_or_else(|_| Polynomial::constant(Complex64::new(0.0, 0.0)))
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.norm() == 0.0)
    }

    pub fn roots(&self, tol: f64) -> Result<Vec<Complex64>> {
        poly_roots(self, tol)
    }
}

impl TryFrom<Vec<Complex64>> for Polynomial {
    type Error = Error;

    fn try_from(coeffs: Vec<Complex64>) -> Result<Self> {
        Polynomial::new(coeffs)
    }
}

impl From<Polynomial> for Vec<Complex64> {
    fn from(p: Polynomial) -> Self {
        p.coeffs
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (k, c) in self.coeffs.iter().enumerate() {
            if c.norm() == 0.0 && self.degree() > 0 {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({}{:+}i)", c.re, c.im)?;
            match k {
                0 => {}
                1 => write!(f, "*z")?,
                _ => write!(f, "*z^{k}")?,
            }
        }
        Ok(())
    }
}

/// `(p(z), p'(z))`.
pub fn poly_eval(p: &Polynomial, z: Complex64) -> (Complex64, Complex64) {
    p.eval(z)
}

/// Lexicographic (real, imaginary) ordering used for every returned root list.
pub fn lex_cmp(a: &Complex64, b: &Complex64) -> std::cmp::Ordering {
    a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im))
}

/// All roots of `p` (with multiplicity) by Aberth–Ehrlich iteration followed by
/// Newton polishing, sorted lexicographically.
pub fn poly_roots(p: &Polynomial, tol: f64) -> Result<Vec<Complex64>> {
    if !(tol > 0.0) {
        return Err(Error::InvalidInput("root tolerance must be positive".into()));
    }
    let degree = p.degree();
    if degree == 0 {
        return Err(Error::InvalidInput("constant polynomial has no roots".into()));
    }
    let lead = p.leading();
    let c = p.coeffs();
    if degree == 1 {
        return Ok(vec![-c[0] / c[1]]);
    }
    let threshold = tol * p.scale();
    let dp = p.derivative().expect("degree >= 1");

    let max_ratio = c[..degree].iter().map(|a| a.norm()).fold(0.0, f64::max) / lead.norm();
    let radius = 1.0 + max_ratio;
    // offset keeps the starting circle off any symmetry axis of real polynomials
    let offset = 0.4;
    let mut z: Vec<Complex64> = (0..degree)
        .map(|k| {
            let angle = std::f64::consts::TAU * k as f64 / degree as f64 + offset;
            Complex64::from_polar(radius, angle)
        })
        .collect();

    let mut iterations = 0;
    for _ in 0..ROOT_ITERATION_CAP {
        iterations += 1;
        let mut max_step: f64 = 0.0;
        let mut all_small = true;
        for i in 0..degree {
            let (value, deriv) = p.eval(z[i]);
            if value.norm() >= 0.01 * threshold {
                all_small = false;
            }
            if value.norm() == 0.0 {
                continue;
            }
            let ratio = value / deriv;
            let repulsion: Complex64 = (0..degree).filter(|&j| j != i).map(|j| (z[i] - z[j]).inv()).sum();
            let step = ratio / (Complex64::new(1.0, 0.0) - ratio * repulsion);
            if step.is_finite() {
                z[i] -= step;
                max_step = max_step.max(step.norm() / (1.0 + z[i].norm()));
            }
        }
        if all_small || max_step < 1e-15 {
            break;
        }
    }

    // Newton polishing on the plain polynomial
    for root in z.iter_mut() {
        for _ in 0..3 {
            let value = p.value(*root);
            let deriv = dp.value(*root);
            if deriv.norm() == 0.0 || value.norm() == 0.0 {
                break;
            }
            let next = *root - value / deriv;
            if !next.is_finite() || p.value(next).norm() > value.norm() {
                break;
            }
            *root = next;
        }
    }

    let worst = z.iter().map(|&r| p.value(r).norm()).fold(0.0, f64::max);
    if !(worst < threshold) {
        return Err(Error::NonConvergence {
            residual: worst,
            iterations,
        });
    }
    z.sort_by(lex_cmp);
    Ok(z)
}

/// A power series truncated at `truncation_order()`, ascending coefficients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerSeries {
    coeffs: Vec<Complex64>,
}

impl PowerSeries {
    pub fn new(coeffs: Vec<Complex64>) -> Self {
        assert!(!coeffs.is_empty(), "power series needs at least one coefficient");
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn truncation_order(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Value and derivative of the truncated series.
    pub fn eval(&self, z: Complex64) -> (Complex64, Complex64) {
        let mut value = Complex64::new(0.0, 0.0);
        let mut deriv = Complex64::new(0.0, 0.0);
        for &c in self.coeffs.iter().rev() {
            deriv = deriv * z + value;
            value = value * z + c;
        }
        (value, deriv)
    }

    /// Truncated product.
    pub fn mul_truncated(&self, other: &PowerSeries) -> PowerSeries {
        let m = self.truncation_order().min(other.truncation_order());
        let mut out = vec![Complex64::new(0.0, 0.0); m + 1];
        for (i, &a) in self.coeffs.iter().enumerate().take(m + 1) {
            for (j, &b) in other.coeffs.iter().enumerate().take(m + 1 - i) {
                out[i + j] += a * b;
            }
        }
        PowerSeries { coeffs: out }
    }

    /// `p(series)` truncated at the same order, by Horner's scheme in the series ring.
    pub fn compose_into(&self, p: &Polynomial) -> PowerSeries {
        let m = self.truncation_order();
        let mut acc = PowerSeries {
            coeffs: vec![Complex64::new(0.0, 0.0); m + 1],
        };
        for &c in p.coeffs().iter().rev() {
            acc = acc.mul_truncated(self);
            acc.coeffs[0] += c;
        }
        acc
    }

    /// The series of `z -> self(c z)`.
    pub fn rescaled(&self, c: Complex64) -> PowerSeries {
        let mut power = Complex64::new(1.0, 0.0);
        let coeffs = self
            .coeffs
            .iter()
            .map(|&a| {
                let out = a * power;
                power *= c;
                out
            })
            .collect();
        PowerSeries { coeffs }
    }
}

/// Neumaier's variant of Kahan summation for real terms.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl std::ops::AddAssign<f64> for CompensatedSum {
    fn add_assign(&mut self, rhs: f64) {
        self.add(rhs);
    }
}

impl std::iter::FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// Compensated summation of complex terms, componentwise.
#[derive(Clone, Copy, Debug, Default)]
pub struct ComplexCompensatedSum {
    re: CompensatedSum,
    im: CompensatedSum,
}

impl ComplexCompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, z: Complex64) {
        self.re.add(z.re);
        self.im.add(z.im);
    }

    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re.value(), self.im.value())
    }
}

impl std::ops::AddAssign<Complex64> for ComplexCompensatedSum {
    fn add_assign(&mut self, rhs: Complex64) {
        self.add(rhs);
    }
}

/// Ordinary least squares of `y` on `x`: `(slope, intercept, r_squared, rms_residual)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - (intercept + slope * a)).powi(2))
        .sum();
    let r2 = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    (slope, intercept, r2, (ss_res / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn eval_examples() {
        let sq = Polynomial::from_real(&[0.0, 0.0, 1.0]).unwrap();
        assert_eq!(poly_eval(&sq, c(3.0, 0.0)), (c(9.0, 0.0), c(6.0, 0.0)));
        let fam = Polynomial::quadratic_with_multiplier(c(1.5, 0.0));
        assert_eq!(poly_eval(&fam, c(0.0, 0.0)), (c(0.0, 0.0), c(1.5, 0.0)));
        let cheb = Polynomial::from_real(&[-2.0, 0.0, 1.0]).unwrap();
        assert_eq!(poly_eval(&cheb, c(2.0, 0.0)), (c(2.0, 0.0), c(4.0, 0.0)));
    }

    #[test]
    fn roots_of_simple_quadratics() {
        let p = Polynomial::from_real(&[-1.0, 0.0, 1.0]).unwrap();
        let r = poly_roots(&p, DEFAULT_TOL).unwrap();
        assert!((r[0] - c(-1.0, 0.0)).norm() < 1e-12);
        assert!((r[1] - c(1.0, 0.0)).norm() < 1e-12);

        let p = Polynomial::from_real(&[-4.0, 0.0, 1.0]).unwrap();
        let r = poly_roots(&p, DEFAULT_TOL).unwrap();
        assert!((r[0] - c(-2.0, 0.0)).norm() < 1e-12);
        assert!((r[1] - c(2.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn square_roots_of_i() {
        let p = Polynomial::new(vec![c(0.0, -1.0), c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        let r = poly_roots(&p, DEFAULT_TOL).unwrap();
        assert_eq!(r.len(), 2);
        for root in &r {
            assert!((root * root - c(0.0, 1.0)).norm() < 1e-12);
        }
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((r[0] - c(-s, -s)).norm() < 1e-12);
        assert!((r[1] - c(s, s)).norm() < 1e-12);
    }

    #[test]
    fn double_root_is_reported_twice() {
        // (z - 1/2)^2
        let p = Polynomial::from_real(&[0.25, -1.0, 1.0]).unwrap();
        let r = poly_roots(&p, DEFAULT_TOL).unwrap();
        assert_eq!(r.len(), 2);
        for root in r {
            assert!((root - c(0.5, 0.0)).norm() < 1e-5);
        }
    }

    #[test]
    fn rejects_bad_input() {
        let p = Polynomial::from_real(&[1.0, 1.0]).unwrap();
        assert!(poly_roots(&p, 0.0).is_err());
        assert!(Polynomial::new(vec![]).is_err());
        assert!(Polynomial::from_real(&[f64::NAN, 1.0]).is_err());
    }

    #[test]
    fn trailing_zeros_are_trimmed() {
        let p = Polynomial::from_real(&[1.0, 2.0, 0.0, 0.0]).unwrap();
        assert_eq!(p.degree(), 1);
    }

    #[test]
    fn taylor_shift_matches_derivatives() {
        // z^3 - 2z + 1 at 2: p=5, p'=10, p''/2=6, p'''/6=1
        let p = Polynomial::from_real(&[1.0, -2.0, 0.0, 1.0]).unwrap();
        let t = p.taylor_at(c(2.0, 0.0));
        let expected = [5.0, 10.0, 6.0, 1.0];
        for (a, b) in t.iter().zip(expected) {
            assert!((a - c(b, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = CompensatedSum::new();
        s += 1e100;
        s += 1.0;
        s += -1e100;
        assert_eq!(s.value(), 1.0);
        let harmonic: CompensatedSum = (1..=1_000_000).map(|k| 1.0 / k as f64).collect();
        // H_n = ln n + gamma + 1/(2n) - 1/(12n^2)
        let n = 1e6_f64;
        let exact = n.ln() + 0.577_215_664_901_532_9 + 1.0 / (2.0 * n) - 1.0 / (12.0 * n * n);
        assert!((harmonic.value() - exact).abs() < 1e-13);
    }

    #[test]
    fn composition_of_series() {
        // (1 + z)^2 = 1 + 2z + z^2
        let s = PowerSeries::new(vec![c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        let sq = Polynomial::from_real(&[0.0, 0.0, 1.0]).unwrap();
        let out = s.compose_into(&sq);
        let expected = [1.0, 2.0, 1.0, 0.0];
        for (a, b) in out.coeffs().iter().zip(expected) {
            assert!((a - c(b, 0.0)).norm() < 1e-15);
        }
    }

    fn well_separated_roots() -> impl Strategy<Value = Vec<Complex64>> {
        (1usize..=8, any::<u64>()).prop_map(|(n, salt)| {
            // jittered points on a few rings, pairwise separation > 0.3
            (0..n)
                .map(|k| {
                    let ring = 0.5 + (k % 3) as f64 * 0.7;
                    let jitter = ((salt >> (k * 4)) & 0xF) as f64 / 16.0;
                    let angle = std::f64::consts::TAU * (k as f64 + 0.3 * jitter) / n as f64;
                    Complex64::from_polar(ring, angle)
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn reconstruction_from_roots(roots in well_separated_roots(), lead_re in 0.5f64..2.0) {
            let lead = c(lead_re, 0.3);
            let mut p = Polynomial::constant(lead);
            for &r in &roots {
                p = p.mul(&Polynomial::new(vec![-r, c(1.0, 0.0)]).unwrap());
            }
            let found = poly_roots(&p, DEFAULT_TOL).unwrap();
            prop_assert_eq!(found.len(), roots.len());
            for &r in &found {
                prop_assert!(p.value(r).norm() < DEFAULT_TOL * p.scale());
            }
            let mut q = Polynomial::constant(lead);
            for &r in &found {
                q = q.mul(&Polynomial::new(vec![-r, c(1.0, 0.0)]).unwrap());
            }
            for (a, b) in p.coeffs().iter().zip(q.coeffs()) {
                prop_assert!((a - b).norm() <= 10.0 * DEFAULT_TOL * p.scale());
            }
        }

        #[test]
        fn derivative_matches_central_difference(
            coeffs in proptest::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 2..8),
            zr in -2.0f64..2.0, zi in -2.0f64..2.0,
        ) {
            let p = Polynomial::new(coeffs.iter().map(|&(a, b)| c(a, b)).collect()).unwrap();
            let z = c(zr, zi);
            let h = 1e-6 * (1.0 + z.norm());
            let fd = (p.value(z + h) - p.value(z - h)) / (2.0 * h);
            let (_, d) = p.eval(z);
            prop_assert!((fd - d).norm() <= 1e-6 * d.norm().max(1.0));
        }
    }
}
