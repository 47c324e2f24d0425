//! Poincaré functions (linearizers) of polynomials at repelling fixed points.
//!
//! The linearizer `f` solves `f(lambda z) = p(f(z))` with `f(0) = zeta`,
//! `f'(0) = 1`. Near the origin it is evaluated from its Koenigs series; away
//! from the origin the functional equation pulls the argument back into the
//! series patch and pushes the value forward with `p`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{ensure_off_postcritical, expand_level, TreeNode, TreeOptions};
use crate::error::{Error, Result};
use crate::numerics::{linear_fit, Polynomial, PowerSeries};
use crate::region::{distance_to_polyline, winding_number};

/// Default truncation order of the Koenigs series.
pub const DEFAULT_SERIES_ORDER: usize = 64;
/// Multipliers with modulus at or below `1 + REPELLING_MARGIN` are rejected.
pub const REPELLING_MARGIN: f64 = 1e-6;
/// Iterates beyond this modulus abort complex evaluation.
pub const OVERFLOW_LIMIT: f64 = 1e150;
/// Default number of sample points per circle for maximum-modulus estimates.
pub const DEFAULT_CIRCLE_SAMPLES: usize = 1024;

const ETA_CAP: f64 = 0.9;
const ETA_SHRINK: f64 = 0.8;
const ETA_FLOOR: f64 = 1e-6;
const SEEDS_PER_CIRCLE: usize = 32;
const BOUNDARY_POINTS: usize = 512;
/// Where log-modulus evaluation switches to the leading-term recursion.
const LOG_SPACE_SWITCH: f64 = 1e100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoincareMap {
    pub p: Polynomial,
    pub zeta: Complex64,
    pub lambda: Complex64,
    pub series: PowerSeries,
    pub eta: f64,
    pub conv_radius_est: f64,
}

/// Coefficients of the linearizer of `p` at the repelling fixed point `zeta`,
/// with the injectivity radius already determined.
pub fn koenigs_coeffs(p: &Polynomial, zeta: Complex64, order: usize) -> Result<PoincareMap> {
    PoincareMap::new(p, zeta, order)
}

impl PoincareMap {
    pub fn new(p: &Polynomial, zeta: Complex64, order: usize) -> Result<Self> {
        if p.degree() < 2 {
            return Err(Error::InvalidInput("linearizer needs degree >= 2".into()));
        }
        if order < 2 {
            return Err(Error::InvalidInput("series order must be at least 2".into()));
        }
        let (value, lambda) = p.eval(zeta);
        let fixed_tol = 1e-9 * p.scale().max(1.0) * (1.0 + zeta.norm()).powi(p.degree() as i32);
        if (value - zeta).norm() > fixed_tol {
            return Err(Error::InvalidInput(format!(
                "{zeta} is not a fixed point (|p(z) - z| = {:e})",
                (value - zeta).norm()
            )));
        }
        if lambda.norm() <= 1.0 + REPELLING_MARGIN {
            return Err(Error::NotRepelling(lambda.norm()));
        }
        let series = solve_koenigs(p, zeta, lambda, order);
        let conv_radius_est = cauchy_hadamard(&series);
        let mut map = PoincareMap {
            p: p.clone(),
            zeta,
            lambda,
            series,
            eta: 0.0,
            conv_radius_est,
        };
        map.eta = map.injectivity_radius()?;
        Ok(map)
    }

    /// Largest tested `eta <= min(0.9, conv_radius_est / 2)` on which sampled
    /// checks find the series univalent: `|f'|` bounded below on a polar grid,
    /// sampled pairs mapped apart, boundary image winding once around `zeta`,
    /// and a negligible truncation tail. This is a sampling heuristic, not a
    /// certificate.
    pub fn injectivity_radius(&self) -> Result<f64> {
        let mut eta = ETA_CAP.min(0.5 * self.conv_radius_est);
        while eta >= ETA_FLOOR {
            if self.patch_is_univalent(eta) {
                return Ok(eta);
            }
            eta *= ETA_SHRINK;
        }
        Err(Error::DegenerateRadius)
    }

    fn patch_is_univalent(&self, eta: f64) -> bool {
        let a = self.series.coeffs();
        let m = a.len();
        let tail: f64 = (m.saturating_sub(8)..m).map(|k| a[k].norm() * eta.powi(k as i32)).sum();
        if !(tail < 1e-13 * (1.0 + self.zeta.norm())) {
            return false;
        }

        let mut grid = vec![Complex64::new(0.0, 0.0)];
        for ring in 1..=8 {
            let r = eta * ring as f64 / 8.0;
            let count = 16 * ring;
            for k in 0..count {
                let angle = std::f64::consts::TAU * (k as f64 + 0.5 * (ring % 2) as f64) / count as f64;
                grid.push(Complex64::from_polar(r, angle));
            }
        }
        let evals: Vec<(Complex64, Complex64)> = grid.iter().map(|&z| self.series.eval(z)).collect();
        if evals.iter().any(|(_, d)| !(d.norm() >= 0.05)) {
            return false;
        }
        for i in 0..grid.len() {
            for j in i + 1..grid.len() {
                let gap = (evals[i].0 - evals[j].0).norm();
                if !(gap >= 0.02 * (grid[i] - grid[j]).norm()) {
                    return false;
                }
            }
        }
        let boundary = self.patch_circle(eta, BOUNDARY_POINTS);
        winding_number(&boundary, self.zeta) == 1
    }

    /// Images of `BOUNDARY_POINTS` equispaced points of `|z| = r` under the series.
    fn patch_circle(&self, r: f64, count: usize) -> Vec<Complex64> {
        (0..count)
            .map(|k| {
                let z = Complex64::from_polar(r, std::f64::consts::TAU * k as f64 / count as f64);
                self.series.eval(z).0
            })
            .collect()
    }

    pub fn degree(&self) -> usize {
        self.p.degree()
    }

    /// Number of pull-backs needed to bring `z` into the series patch.
    fn pullback_steps(&self, z: Complex64) -> usize {
        let modulus = z.norm();
        if modulus <= self.eta {
            return 0;
        }
        let lam = self.lambda.norm();
        let mut n = ((modulus / self.eta).ln() / lam.ln()).ceil().max(0.0) as usize;
        while n > 0 && modulus / lam.powi(n as i32 - 1) <= self.eta {
            n -= 1;
        }
        while modulus / lam.powi(n as i32) > self.eta {
            n += 1;
        }
        n
    }

    /// `(f(z), f'(z))`.
    pub fn eval(&self, z: Complex64) -> Result<(Complex64, Complex64)> {
        let n = self.pullback_steps(z);
        let mut u = z;
        for _ in 0..n {
            u /= self.lambda;
        }
        self.push_forward(u, n).ok_or(Error::OverflowEscape(z))
    }

    /// `(p^n(f(u)), (p^n o f)'(u) / lambda^n)` for `u` in the patch.
    fn push_forward(&self, u: Complex64, n: usize) -> Option<(Complex64, Complex64)> {
        let (mut v, mut d) = self.series.eval(u);
        for _ in 0..n {
            let (pv, dpv) = self.p.eval(v);
            d = d * dpv / self.lambda;
            v = pv;
            if !(v.norm() <= OVERFLOW_LIMIT) {
                return None;
            }
        }
        Some((v, d))
    }

    /// `ln |f(z)|`, continuing with the leading-term recursion
    /// `ln|p(v)| ~ ln|lead| + D ln|v|` once iterates pass `1e100`, so it stays
    /// finite far beyond the range of `eval`.
    pub fn log_modulus(&self, z: Complex64) -> f64 {
        let n = self.pullback_steps(z);
        let mut u = z;
        for _ in 0..n {
            u /= self.lambda;
        }
        let (mut v, _) = self.series.eval(u);
        let lead = self.p.leading().norm().ln();
        let d = self.p.degree() as f64;
        for step in 0..n {
            if v.norm() > LOG_SPACE_SWITCH {
                let mut log = v.norm().ln();
                for _ in step..n {
                    log = lead + d * log;
                }
                return log;
            }
            v = self.p.value(v);
        }
        v.norm().ln()
    }

    /// Maximum coefficient residual of `series(lambda z) - p(series(z))` up to
    /// the truncation order, computed by direct series composition.
    pub fn functional_equation_residual(&self) -> f64 {
        let lhs = self.series.rescaled(self.lambda);
        let rhs = self.series.compose_into(&self.p);
        lhs.coeffs()
            .iter()
            .zip(rhs.coeffs())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Solves `series(u) = target` by Newton iteration from the given seeds,
    /// best seeds first. Iterates may not leave `|u| <= limit`.
    fn patch_solve(&self, target: Complex64, seeds: &[(Complex64, Complex64)], limit: f64) -> Option<Complex64> {
        let mut order: Vec<usize> = (0..seeds.len()).collect();
        order.sort_by(|&a, &b| (seeds[a].1 - target).norm().total_cmp(&(seeds[b].1 - target).norm()));
        let tol = 1e-12 * (1.0 + target.norm());
        for &idx in order.iter().take(8) {
            let mut u = seeds[idx].0;
            for _ in 0..60 {
                let (v, d) = self.series.eval(u);
                let err = v - target;
                if err.norm() <= 1e-15 * (1.0 + target.norm()) {
                    break;
                }
                let step = err / d;
                if !step.is_finite() {
                    break;
                }
                u -= step;
                if u.norm() > limit || step.norm() <= 1e-17 * (1.0 + u.norm()) {
                    break;
                }
            }
            if u.norm() <= limit && (self.series.eval(u).0 - target).norm() <= tol {
                return Some(u);
            }
        }
        None
    }

    fn annulus_seeds(&self) -> Vec<(Complex64, Complex64)> {
        let inner = self.eta / self.lambda.norm();
        let ratio = self.lambda.norm();
        [inner * ratio.powf(1.0 / 3.0), inner * ratio.powf(2.0 / 3.0)]
            .iter()
            .enumerate()
            .flat_map(|(ring, &r)| {
                (0..SEEDS_PER_CIRCLE).map(move |k| {
                    let angle = std::f64::consts::TAU * (k as f64 + 0.5 * ring as f64) / SEEDS_PER_CIRCLE as f64;
                    Complex64::from_polar(r, angle)
                })
            })
            .map(|u| (u, self.series.eval(u).0))
            .collect()
    }

    fn disc_seeds(&self) -> Vec<(Complex64, Complex64)> {
        let mut seeds = vec![Complex64::new(0.0, 0.0)];
        for ring in 1..=4 {
            let r = self.eta * ring as f64 / 4.0;
            for k in 0..SEEDS_PER_CIRCLE / 2 {
                let angle = std::f64::consts::TAU * k as f64 / (SEEDS_PER_CIRCLE / 2) as f64;
                seeds.push(Complex64::from_polar(r, angle));
            }
        }
        seeds.into_iter().map(|u| (u, self.series.eval(u).0)).collect()
    }

    /// The unique `u` with `|u| <= eta` and `f(u) = w`, if there is one.
    pub fn patch_preimage(&self, w: Complex64) -> Option<Complex64> {
        let boundary = self.patch_circle(self.eta, BOUNDARY_POINTS);
        let margin = 2.0 * max_gap(&boundary);
        if winding_number(&boundary, w) == 0 && distance_to_polyline(&boundary, w) > margin {
            return None;
        }
        self.patch_solve(w, &self.disc_seeds(), 1.25 * self.eta)
            .filter(|u| u.norm() <= self.eta)
    }
}

fn max_gap(curve: &[Complex64]) -> f64 {
    (0..curve.len())
        .map(|i| (curve[(i + 1) % curve.len()] - curve[i]).norm())
        .fold(0.0, f64::max)
}

fn solve_koenigs(p: &Polynomial, zeta: Complex64, lambda: Complex64, order: usize) -> PowerSeries {
    // p(zeta + g) = zeta + lambda g + sum_{j>=2} c_j g^j with g = f - zeta, and
    // powers[j][n] = [z^n] g^j. The coefficient of z^n in g^j (j >= 2) only
    // involves a_1..a_{n-1}, so a_n follows from
    // a_n (lambda^n - lambda) = sum_{j>=2} c_j [z^n] g^j.
    let taylor = p.taylor_at(zeta);
    let d = p.degree();
    let zero = Complex64::new(0.0, 0.0);
    let mut a = vec![zero; order + 1];
    a[0] = zeta;
    a[1] = Complex64::new(1.0, 0.0);
    let mut powers = vec![vec![zero; order + 1]; d + 1];
    powers[1][1] = a[1];
    let mut lambda_n = lambda;
    for n in 2..=order {
        lambda_n *= lambda;
        for j in 2..=d.min(n) {
            let mut acc = zero;
            for m in 1..n {
                acc += a[m] * powers[j - 1][n - m];
            }
            powers[j][n] = acc;
        }
        let rhs: Complex64 = (2..=d.min(n)).map(|j| taylor[j] * powers[j][n]).sum();
        a[n] = rhs / (lambda_n - lambda);
        powers[1][n] = a[n];
    }
    PowerSeries::new(a)
}

/// `min |a_n|^{-1/n}` over the last 16 coefficients, a proxy for the radius of
/// convergence of the truncated series.
fn cauchy_hadamard(series: &PowerSeries) -> f64 {
    let a = series.coeffs();
    let m = a.len() - 1;
    (m.saturating_sub(15).max(1)..=m)
        .filter(|&n| a[n].norm() > 0.0)
        .map(|n| a[n].norm().powf(-1.0 / n as f64))
        .fold(f64::INFINITY, f64::min)
}

/// `(f(z), f'(z))` for a linearizer.
pub fn lin_eval(map: &PoincareMap, z: Complex64) -> Result<(Complex64, Complex64)> {
    map.eval(z)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderMethod {
    ExactFormula,
    GrowthFit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderEstimate {
    pub value: f64,
    pub method: OrderMethod,
    pub fit_residual: Option<f64>,
    /// `(r, ln M(r))` pairs behind a growth fit.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub samples: Vec<(f64, f64)>,
}

/// `ln D / ln |lambda|`.
pub fn order_exact(map: &PoincareMap) -> OrderEstimate {
    OrderEstimate {
        value: (map.degree() as f64).ln() / map.lambda.norm().ln(),
        method: OrderMethod::ExactFormula,
        fit_residual: None,
        samples: Vec::new(),
    }
}

/// Least-squares slope of `ln ln M(r)` against `ln r`, with `M(r)` the largest
/// sampled modulus on `|z| = r`.
pub fn order_empirical(map: &PoincareMap, radii: &[f64], samples_per_circle: usize) -> Result<OrderEstimate> {
    if radii.len() < 4 {
        return Err(Error::InvalidInput("order fit needs at least 4 radii".into()));
    }
    if radii.windows(2).any(|w| !(w[1] > w[0])) || radii.iter().any(|&r| !(r > map.eta)) {
        return Err(Error::InvalidInput(
            "radii must be increasing and larger than the injectivity radius".into(),
        ));
    }
    if samples_per_circle == 0 {
        return Err(Error::InvalidInput("need at least one sample per circle".into()));
    }
    let mut samples = Vec::with_capacity(radii.len());
    for &r in radii {
        let log_max = (0..samples_per_circle)
            .into_par_iter()
            .map(|k| {
                let angle = std::f64::consts::TAU * k as f64 / samples_per_circle as f64;
                map.log_modulus(Complex64::from_polar(r, angle))
            })
            .reduce(|| f64::NEG_INFINITY, f64::max);
        if !(log_max > 0.0) {
            return Err(Error::InsufficientGrowth {
                radius: r,
                max_modulus: log_max.exp(),
            });
        }
        samples.push((r, log_max));
    }
    let x: Vec<f64> = samples.iter().map(|(r, _)| r.ln()).collect();
    let y: Vec<f64> = samples.iter().map(|(_, l)| l.ln()).collect();
    let (slope, _, _, rms) = linear_fit(&x, &y);
    Ok(OrderEstimate {
        value: slope,
        method: OrderMethod::GrowthFit,
        fit_residual: Some(rms),
        samples,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnulusPreimage {
    /// Band index `n`: `|z|` lies in `(eta |lambda|^{n-1}, eta |lambda|^n]`.
    pub level: usize,
    pub z: Complex64,
    pub f_prime: Complex64,
    /// `f(z / lambda^n)`, a point of `p^{-n}(w)` inside `f(A)`.
    pub w_tilde: Complex64,
    /// `(p^n)'(w_tilde)` from the preimage tree.
    pub tree_derivative: Complex64,
    pub zeta_tilde: Complex64,
    /// `|f(z) - w|` with `f(z)` recomputed by `lin_eval`.
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedFailure {
    pub level: usize,
    pub w_tilde: Complex64,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AnnulusPreimages {
    pub points: Vec<AnnulusPreimage>,
    pub failures: Vec<SeedFailure>,
    /// Number of tree nodes tested at each level `1..=n_max`.
    pub candidates_per_level: Vec<usize>,
}

impl AnnulusPreimages {
    pub fn count_at(&self, level: usize) -> usize {
        self.points.iter().filter(|p| p.level == level).count()
    }
}

/// Default bound on `|f(z) - w| / (1 + |w|)` for emitted preimages.
pub const DEFAULT_PREIMAGE_TOL: f64 = 1e-6;

/// Points of `f^{-1}(w)` in the bands `eta |lambda|^{n-1} < |z| <= eta |lambda|^n`
/// for `n = 1..=n_max`, found through `p^{-n}(w) ∩ f(A)` with
/// `A = {eta/|lambda| < |u| <= eta}`.
pub fn preimages_in_annuli(
    map: &PoincareMap,
    w: Complex64,
    n_max: usize,
    opts: TreeOptions,
) -> Result<AnnulusPreimages> {
    preimages_in_annuli_with_tol(map, w, n_max, opts, DEFAULT_PREIMAGE_TOL)
}

pub fn preimages_in_annuli_with_tol(
    map: &PoincareMap,
    w: Complex64,
    n_max: usize,
    opts: TreeOptions,
    residual_tol: f64,
) -> Result<AnnulusPreimages> {
    if n_max == 0 {
        return Err(Error::InvalidInput("n_max must be at least 1".into()));
    }
    let requested = (map.degree() as u128).checked_pow(n_max as u32).unwrap_or(u128::MAX);
    if requested > opts.node_cap as u128 {
        return Err(Error::BudgetExceeded {
            requested,
            cap: opts.node_cap,
        });
    }
    ensure_off_postcritical(&map.p, w)?;

    let lam = map.lambda.norm();
    let inner_r = map.eta / lam;
    let outer = map.patch_circle(map.eta, BOUNDARY_POINTS);
    let inner = map.patch_circle(inner_r, BOUNDARY_POINTS);
    let margin = 2.0 * max_gap(&outer).max(max_gap(&inner));
    let (lo, hi) = bounding_box(&outer, margin);
    let seeds = map.annulus_seeds();
    let limit = 1.25 * map.eta;

    let mut out = AnnulusPreimages::default();
    let mut level = vec![TreeNode {
        z: w,
        cumulative_derivative: Complex64::new(1.0, 0.0),
        parent: 0,
    }];
    let mut lambda_n = Complex64::new(1.0, 0.0);
    for n in 1..=n_max {
        level = expand_level(&map.p, &level, opts.tol)?;
        lambda_n *= map.lambda;
        let found: Vec<(Option<AnnulusPreimage>, Option<SeedFailure>)> = level
            .par_iter()
            .filter(|node| {
                let z = node.z;
                z.re >= lo.re && z.re <= hi.re && z.im >= lo.im && z.im <= hi.im
            })
            .filter_map(|node| {
                let wt = node.z;
                let d_out = distance_to_polyline(&outer, wt);
                let in_out = winding_number(&outer, wt) != 0;
                if !in_out && d_out > margin {
                    return None;
                }
                let d_in = distance_to_polyline(&inner, wt);
                let in_in = winding_number(&inner, wt) != 0;
                if in_in && d_in > margin {
                    return None;
                }
                let clearly_inside = in_out && !in_in && d_out > margin && d_in > margin;
                match map.patch_solve(wt, &seeds, limit) {
                    Some(u) if u.norm() > inner_r && u.norm() <= map.eta => {
                        let (_, fu_prime) = map.series.eval(u);
                        let z = lambda_n * u;
                        let f_prime = node.cumulative_derivative * fu_prime / lambda_n;
                        let residual = match map.eval(z) {
                            Ok((v, _)) => (v - w).norm(),
                            Err(_) => f64::INFINITY,
                        };
                        if residual <= residual_tol * (1.0 + w.norm()) {
                            Some((
                                Some(AnnulusPreimage {
                                    level: n,
                                    z,
                                    f_prime,
                                    w_tilde: wt,
                                    tree_derivative: node.cumulative_derivative,
                                    zeta_tilde: u,
                                    residual,
                                }),
                                None,
                            ))
                        } else {
                            Some((
                                None,
                                Some(SeedFailure {
                                    level: n,
                                    w_tilde: wt,
                                    reason: format!("forward residual {residual:e} above tolerance"),
                                }),
                            ))
                        }
                    }
                    Some(_) => None,
                    None if clearly_inside => Some((
                        None,
                        Some(SeedFailure {
                            level: n,
                            w_tilde: wt,
                            reason: "Newton failed from every seed".into(),
                        }),
                    )),
                    None => None,
                }
            })
            .collect();
        out.candidates_per_level.push(level.len());
        for (point, failure) in found {
            out.points.extend(point);
            out.failures.extend(failure);
        }
    }
    Ok(out)
}

fn bounding_box(curve: &[Complex64], margin: f64) -> (Complex64, Complex64) {
    let (mut lo, mut hi) = (curve[0], curve[0]);
    for z in curve {
        lo.re = lo.re.min(z.re);
        lo.im = lo.im.min(z.im);
        hi.re = hi.re.max(z.re);
        hi.im = hi.im.max(z.im);
    }
    (lo - Complex64::new(margin, margin), hi + Complex64::new(margin, margin))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchwarzianKind {
    /// Entire map with rational nonlinearity `f''/f'` of degree `d` at infinity.
    EntireNonlinearity,
    /// Meromorphic map with rational Schwarzian derivative of degree `d` at infinity.
    MeromorphicSchwarzian,
    /// Finite-type map with `l` logarithmic singularities.
    LogSingularityCount,
}

/// A nonnegative fraction in lowest terms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fraction {
    pub numerator: u64,
    pub denominator: u64,
}

impl Fraction {
    pub fn new(numerator: u64, denominator: u64) -> Self {
        let g = gcd(numerator, denominator).max(1);
        Self {
            numerator: numerator / g,
            denominator: denominator / g,
        }
    }

    pub fn to_f64(self) -> f64 {
        self.numerator as f64 / self.denominator as f64
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Order of growth from the degree data of the nonlinearity or Schwarzian, or
/// from the number of logarithmic singularities.
pub fn schwarzian_order(kind: SchwarzianKind, deg_or_count: u64) -> Fraction {
    match kind {
        SchwarzianKind::EntireNonlinearity => Fraction::new(1 + deg_or_count, 1),
        SchwarzianKind::MeromorphicSchwarzian => Fraction::new(2 + deg_or_count, 2),
        SchwarzianKind::LogSingularityCount => Fraction::new(deg_or_count, 2),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn exp_map() -> PoincareMap {
        koenigs_coeffs(&Polynomial::from_real(&[0.0, 0.0, 1.0]).unwrap(), c(1.0, 0.0), 64).unwrap()
    }

    fn cosh_map() -> PoincareMap {
        koenigs_coeffs(&Polynomial::from_real(&[-2.0, 0.0, 1.0]).unwrap(), c(2.0, 0.0), 64).unwrap()
    }

    fn factorial(n: usize) -> f64 {
        (1..=n).map(|k| k as f64).product()
    }

    #[test]
    fn exp_coefficients() {
        let m = koenigs_coeffs(&Polynomial::from_real(&[0.0, 0.0, 1.0]).unwrap(), c(1.0, 0.0), 30).unwrap();
        for (n, a) in m.series.coeffs().iter().enumerate() {
            assert_relative_eq!(a.re, 1.0 / factorial(n), max_relative = 1e-10);
            assert!(a.im.abs() <= 1e-10 / factorial(n));
        }
    }

    #[test]
    fn cosh_sqrt_coefficients() {
        let m = koenigs_coeffs(&Polynomial::from_real(&[-2.0, 0.0, 1.0]).unwrap(), c(2.0, 0.0), 30).unwrap();
        for (n, a) in m.series.coeffs().iter().enumerate() {
            assert_relative_eq!(a.re, 2.0 / factorial(2 * n), max_relative = 1e-10);
        }
    }

    #[test]
    fn normalization_and_residual() {
        let p = Polynomial::new(vec![c(0.0, 0.0), c(1.2, 0.7), c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        let m = koenigs_coeffs(&p, c(0.0, 0.0), 40).unwrap();
        assert_eq!(m.series.coeffs()[0], c(0.0, 0.0));
        assert_eq!(m.series.coeffs()[1], c(1.0, 0.0));
        assert!(m.functional_equation_residual() < 1e-9 * p.scale());
        assert!(m.eta > 0.0 && m.eta < m.conv_radius_est);
    }

    #[test]
    fn rejects_non_repelling_and_non_fixed() {
        let p = Polynomial::quadratic_with_multiplier(c(0.5, 0.0));
        assert!(matches!(
            koenigs_coeffs(&p, c(0.0, 0.0), 10),
            Err(Error::NotRepelling(_))
        ));
        let sq = Polynomial::from_real(&[0.0, 0.0, 1.0]).unwrap();
        assert!(matches!(
            koenigs_coeffs(&sq, c(2.0, 0.0), 10),
            Err(Error::InvalidInput(_))
        ));
        assert!(koenigs_coeffs(&sq, c(1.0, 0.0), 1).is_err());
    }

    #[test]
    fn injectivity_radii() {
        let e = exp_map();
        assert!(e.eta >= 0.25, "eta = {}", e.eta);
        assert!(e.eta < e.conv_radius_est);
        let ch = cosh_map();
        assert!(ch.eta > 0.0 && ch.eta < ch.conv_radius_est);
        // f'(z) = sinh(sqrt z)/sqrt z vanishes first at -pi^2, far outside the patch
        for k in 0..64 {
            let z = Complex64::from_polar(ch.eta, k as f64 * 0.1);
            assert!(ch.series.eval(z).1.norm() > 0.1);
        }
    }

    #[test]
    fn exp_evaluation() {
        let e = exp_map();
        let (v, d) = lin_eval(&e, c(10.0, 0.0)).unwrap();
        assert_relative_eq!(v.re, 10f64.exp(), max_relative = 1e-8);
        assert_relative_eq!(d.re, 10f64.exp(), max_relative = 1e-8);
        let z = c(-3.0, 7.5);
        let (v, d) = lin_eval(&e, z).unwrap();
        assert!((v - z.exp()).norm() <= 1e-8 * z.exp().norm());
        assert!((d - z.exp()).norm() <= 1e-8 * z.exp().norm());
        assert_eq!(lin_eval(&e, c(0.0, 0.0)).unwrap(), (c(1.0, 0.0), c(1.0, 0.0)));
    }

    #[test]
    fn cosh_critical_point() {
        let ch = cosh_map();
        let pi2 = std::f64::consts::PI.powi(2);
        let (v, d) = lin_eval(&ch, c(-pi2, 0.0)).unwrap();
        assert!((v - c(-2.0, 0.0)).norm() < 1e-9);
        assert!(d.norm() < 1e-9);
        let z = c(30.0, 12.0);
        let s = z.sqrt();
        let (v, d) = lin_eval(&ch, z).unwrap();
        assert!((v - 2.0 * s.cosh()).norm() <= 1e-8 * v.norm());
        assert!((d - s.sinh() / s).norm() <= 1e-8 * d.norm());
    }

    #[test]
    fn overflow_is_reported() {
        let e = exp_map();
        assert!(matches!(lin_eval(&e, c(1000.0, 0.0)), Err(Error::OverflowEscape(_))));
        assert_relative_eq!(e.log_modulus(c(1000.0, 0.0)), 1000.0, max_relative = 1e-9);
        assert_relative_eq!(e.log_modulus(c(1e5, 3.0)), 1e5, max_relative = 1e-9);
    }

    #[test]
    fn exact_orders() {
        assert_relative_eq!(order_exact(&exp_map()).value, 1.0, epsilon = 1e-12);
        let f32 = koenigs_coeffs(&Polynomial::quadratic_with_multiplier(c(1.5, 0.0)), c(0.0, 0.0), 64).unwrap();
        assert_relative_eq!(order_exact(&f32).value, 2f64.ln() / 1.5f64.ln(), epsilon = 1e-12);
        assert_relative_eq!(order_exact(&f32).value, 1.70951, epsilon = 1e-5);
        let f43 = koenigs_coeffs(
            &Polynomial::quadratic_with_multiplier(c(4.0 / 3.0, 0.0)),
            c(0.0, 0.0),
            64,
        )
        .unwrap();
        assert_relative_eq!(order_exact(&f43).value, 2.40942, epsilon = 1e-5);
    }

    #[test]
    fn empirical_order_of_exp_and_cosh() {
        let radii = [1e2, 1e3, 1e4, 1e5];
        let e = order_empirical(&exp_map(), &radii, 1024).unwrap();
        assert!((e.value - 1.0).abs() < 0.05, "{}", e.value);
        let ch = order_empirical(&cosh_map(), &radii, 1024).unwrap();
        assert!((ch.value - 0.5).abs() < 0.05, "{}", ch.value);
        assert!(order_empirical(&exp_map(), &radii[..3], 16).is_err());
        assert!(order_empirical(&exp_map(), &[1e3, 1e2, 1e4, 1e5], 16).is_err());
    }

    #[test]
    fn exp_preimages_are_lattice_points() {
        let e = exp_map();
        let pre = preimages_in_annuli(&e, c(1.0, 0.0), 8, TreeOptions::default()).unwrap();
        assert!(pre.failures.is_empty(), "{:?}", pre.failures);
        assert!(!pre.points.is_empty());
        let tau = std::f64::consts::TAU;
        for pt in &pre.points {
            let k = (pt.z.im / tau).round();
            assert!(pt.z.re.abs() < 1e-9 && (pt.z.im - k * tau).abs() < 1e-9, "{}", pt.z);
            assert!((pt.f_prime - c(1.0, 0.0)).norm() < 1e-9);
        }
        // every 2 pi i k with eta 2^{n-1} < 2 pi |k| <= eta 2^n is found exactly once
        let top = e.eta * 2f64.powi(8);
        let expected = (1..)
            .take_while(|&k| tau * k as f64 <= top)
            .filter(|&k| tau * k as f64 > e.eta)
            .count()
            * 2;
        assert_eq!(pre.points.len(), expected);
    }

    #[test]
    fn cosh_preimages_invert_closed_form() {
        let ch = cosh_map();
        let w = c(10.0, 0.0);
        let pre = preimages_in_annuli(&ch, w, 10, TreeOptions::default()).unwrap();
        assert!(pre.failures.is_empty());
        assert!(!pre.points.is_empty());
        let a = (5.0f64).acosh();
        let tau = std::f64::consts::TAU;
        for pt in &pre.points {
            let s = pt.z.sqrt();
            assert!((2.0 * s.cosh() - w).norm() < 1e-7 * (1.0 + w.norm()));
            let s = if s.re < 0.0 { -s } else { s };
            assert!((s.re - a).abs() < 1e-8);
            let k = s.im / tau;
            assert!((k - k.round()).abs() < 1e-8);
        }
    }

    #[test]
    fn level_counts_match_tree_intersection() {
        let m = koenigs_coeffs(&Polynomial::quadratic_with_multiplier(c(1.5, 0.0)), c(0.0, 0.0), 64).unwrap();
        let pre = preimages_in_annuli(&m, c(3.0, 0.0), 8, TreeOptions::default()).unwrap();
        assert_eq!(pre.candidates_per_level, vec![2, 4, 8, 16, 32, 64, 128, 256]);
        for pt in &pre.points {
            // w_tilde is in f(A) and maps to w after `level` steps
            let mut v = pt.w_tilde;
            for _ in 0..pt.level {
                v = m.p.value(v);
            }
            assert!((v - c(3.0, 0.0)).norm() < 1e-6);
            let r = pt.zeta_tilde.norm();
            assert!(r > m.eta / m.lambda.norm() && r <= m.eta);
        }
    }

    #[test]
    fn schwarzian_orders() {
        assert_eq!(
            schwarzian_order(SchwarzianKind::EntireNonlinearity, 0),
            Fraction::new(1, 1)
        );
        assert_eq!(
            schwarzian_order(SchwarzianKind::EntireNonlinearity, 1),
            Fraction::new(2, 1)
        );
        assert_eq!(
            schwarzian_order(SchwarzianKind::LogSingularityCount, 2),
            Fraction::new(1, 1)
        );
        assert_eq!(
            schwarzian_order(SchwarzianKind::MeromorphicSchwarzian, 1),
            Fraction::new(3, 2)
        );
        assert_eq!(schwarzian_order(SchwarzianKind::LogSingularityCount, 3).to_f64(), 1.5);
    }

    #[test]
    fn order_gap_between_quasiconformally_equivalent_maps() {
        let radii = [1e2, 1e3, 1e4, 1e5];
        let f32 = koenigs_coeffs(&Polynomial::quadratic_with_multiplier(c(1.5, 0.0)), c(0.0, 0.0), 64).unwrap();
        let f43 = koenigs_coeffs(
            &Polynomial::quadratic_with_multiplier(c(4.0 / 3.0, 0.0)),
            c(0.0, 0.0),
            64,
        )
        .unwrap();
        let lo = order_empirical(&f32, &radii, 1024).unwrap().value;
        let hi = order_empirical(&f43, &radii, 1024).unwrap().value;
        assert!((lo - 1.71).abs() <= 0.09, "{lo}");
        assert!((hi - 2.41).abs() <= 0.12, "{hi}");
        assert!(hi - lo > 0.5);
    }

    fn f32_map() -> PoincareMap {
        koenigs_coeffs(&Polynomial::quadratic_with_multiplier(c(1.5, 0.0)), c(0.0, 0.0), 64).unwrap()
    }

    proptest::proptest! {
        #[test]
        fn functional_equation_at_scale(r in 0.0f64..1.0, angle in 0.0f64..std::f64::consts::TAU) {
            for m in [exp_map(), cosh_map()] {
                let z = Complex64::from_polar(r * 10.0 * m.eta * m.lambda.norm().powi(3), angle);
                let (lhs, _) = lin_eval(&m, m.lambda * z).unwrap();
                let rhs = m.p.value(lin_eval(&m, z).unwrap().0);
                proptest::prop_assert!((lhs - rhs).norm() < 1e-7 * (1.0 + lhs.norm()));
            }
        }

        #[test]
        fn derivative_matches_finite_difference(r in 0.0f64..10.0, angle in 0.0f64..std::f64::consts::TAU) {
            for m in [f32_map(), cosh_map()] {
                let z = Complex64::from_polar(r, angle);
                let h = 1e-5;
                let (_, d) = lin_eval(&m, z).unwrap();
                let fd = (lin_eval(&m, z + h).unwrap().0 - lin_eval(&m, z - h).unwrap().0) / (2.0 * h);
                proptest::prop_assert!((fd - d).norm() <= 1e-5 * d.norm().max(1.0), "{} vs {}", fd, d);
            }
        }
    }
}
