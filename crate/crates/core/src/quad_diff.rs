//! Pushforwards of quadratic differentials `q(z) dz^2` under linearizers.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::area::ExplicitMap;
use crate::dynamics::TreeOptions;
use crate::error::{Error, Result};
use crate::linearizer::{preimages_in_annuli, PoincareMap};
use crate::numerics::{linear_fit, ComplexCompensatedSum, Polynomial, DEFAULT_TOL};

/// Preimages closer than `POLE_TOL (1 + |pole|)` to a pole of `q` are rejected.
pub const POLE_TOL: f64 = 1e-10;
/// Samples with `|sigma|` below this cannot enter a log-log fit.
pub const ZERO_SAMPLE: f64 = 1e-300;

/// The coefficient `q = numerator / denominator` of `q(z) dz^2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QDSpec {
    pub numerator: Polynomial,
    pub denominator: Polynomial,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pole {
    pub location: Complex64,
    pub order: usize,
}

impl QDSpec {
    pub fn new(numerator: Polynomial, denominator: Polynomial) -> Result<Self> {
        if denominator.is_zero() {
            return Err(Error::InvalidInput("denominator of q is identically zero".into()));
        }
        Ok(Self { numerator, denominator })
    }

    /// `dz^2 / z^m`.
    pub fn inverse_power(m: usize) -> Self {
        let mut den = vec![Complex64::new(0.0, 0.0); m + 1];
        den[m] = Complex64::new(1.0, 0.0);
        Self {
            numerator: Polynomial::constant(Complex64::new(1.0, 0.0)),
            denominator: Polynomial::new(den).expect("monomial is valid"),
        }
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.numerator.value(z) / self.denominator.value(z)
    }

    /// Roots of the denominator, clustered, with multiplicities.
    pub fn poles(&self) -> Result<Vec<Pole>> {
        if self.denominator.degree() == 0 {
            return Ok(Vec::new());
        }
        let roots = self.denominator.roots(DEFAULT_TOL)?;
        // multiple roots come back as clusters of radius ~ eps^{1/m}
        let cluster = 1e-4 * (1.0 + self.denominator.scale());
        let mut poles: Vec<Pole> = Vec::new();
        for r in roots {
            match poles.iter_mut().find(|p| (p.location - r).norm() <= cluster) {
                Some(p) => {
                    p.location = (p.location * p.order as f64 + r) / (p.order + 1) as f64;
                    p.order += 1;
                }
                None => poles.push(Pole { location: r, order: 1 }),
            }
        }
        for pole in poles.iter_mut().filter(|p| p.order > 1) {
            pole.location = refine_multiple_root(&self.denominator, pole.location, pole.order);
        }
        Ok(poles)
    }
}

/// A root of multiplicity `m` is a simple root of the `(m-1)`-th derivative;
/// Newton there recovers it to full precision from the cluster centroid.
fn refine_multiple_root(p: &Polynomial, start: Complex64, m: usize) -> Complex64 {
    let mut d = p.clone();
    for _ in 1..m {
        match d.derivative() {
            Some(next) => d = next,
            None => return start,
        }
    }
    let mut z = start;
    for _ in 0..50 {
        let (v, dv) = d.eval(z);
        let step = v / dv;
        if !step.is_finite() {
            break;
        }
        z -= step;
        if step.norm() <= 1e-16 * (1.0 + z.norm()) {
            break;
        }
    }
    if (z - start).norm() <= 1e-3 * (1.0 + start.norm()) {
        z
    } else {
        start
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PushforwardSample {
    pub w: Complex64,
    pub sigma: Complex64,
    pub terms_used: usize,
    pub tail_estimate: f64,
}

/// A map whose preimages the pushforward can enumerate.
#[derive(Clone, Copy, Debug)]
pub enum PushforwardMap<'a> {
    Exp,
    Linearizer(&'a PoincareMap),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PushforwardOptions {
    /// Preimages with `|z|` below this radius are left out of the sum.
    pub skip_below: f64,
    pub tree: TreeOptions,
}

impl Default for PushforwardOptions {
    fn default() -> Self {
        Self {
            skip_below: 0.0,
            tree: TreeOptions::default(),
        }
    }
}

fn check_pole(z: Complex64, poles: &[Pole]) -> Result<()> {
    if poles
        .iter()
        .any(|p| (z - p.location).norm() <= POLE_TOL * (1.0 + p.location.norm()))
    {
        return Err(Error::PoleHit(z));
    }
    Ok(())
}

fn finite_term(z: Complex64, term: Complex64) -> Result<Complex64> {
    if term.is_finite() {
        Ok(term)
    } else {
        Err(Error::PoleHit(z))
    }
}

/// `sigma(w) = sum q(z) / f'(z)^2` over preimages `z` of `w`.
///
/// For `exp` the branches `k = 0, ±1, ..., ±depth` are summed with `±k` paired
/// and `tail_estimate = |last pair| * depth`. For a linearizer the preimage in
/// the series patch is followed by the bands `1..=depth`, and `tail_estimate`
/// is the modulus of the last band's contribution.
pub fn pushforward_eval(
    map: PushforwardMap<'_>,
    q: &QDSpec,
    w: Complex64,
    depth: usize,
    opts: PushforwardOptions,
) -> Result<PushforwardSample> {
    if depth == 0 {
        return Err(Error::InvalidInput("depth must be at least 1".into()));
    }
    let poles = q.poles()?;
    let keep = |z: Complex64| z.norm() >= opts.skip_below;
    let mut acc = ComplexCompensatedSum::new();
    let mut terms_used = 0usize;
    match map {
        PushforwardMap::Exp => {
            if w.norm() <= crate::area::SINGULAR_TOL {
                return Err(Error::SingularQuery(w));
            }
            let mut term = |k: i64| -> Result<Complex64> {
                let (z, d) = ExplicitMap::Exp.preimage(w, k);
                if !keep(z) {
                    return Ok(Complex64::new(0.0, 0.0));
                }
                check_pole(z, &poles)?;
                terms_used += 1;
                finite_term(z, q.eval(z) / (d * d))
            };
            acc.add(term(0)?);
            let mut last = Complex64::new(0.0, 0.0);
            for k in 1..=depth as i64 {
                last = term(k)? + term(-k)?;
                acc.add(last);
            }
            if terms_used == 0 {
                return Err(Error::InvalidInput("every preimage was skipped".into()));
            }
            Ok(PushforwardSample {
                w,
                sigma: acc.value(),
                terms_used,
                tail_estimate: last.norm() * depth as f64,
            })
        }
        PushforwardMap::Linearizer(f) => {
            if let Some(u) = f.patch_preimage(w) {
                if keep(u) {
                    check_pole(u, &poles)?;
                    let d = f.series.eval(u).1;
                    acc.add(finite_term(u, q.eval(u) / (d * d))?);
                    terms_used += 1;
                }
            }
            let pre = preimages_in_annuli(f, w, depth, opts.tree)?;
            if let Some(failure) = pre.failures.first() {
                return Err(Error::NonConvergence {
                    residual: f64::NAN,
                    iterations: failure.level,
                });
            }
            let mut last_band = ComplexCompensatedSum::new();
            for level in 1..=depth {
                let mut band = ComplexCompensatedSum::new();
                for pt in pre.points.iter().filter(|pt| pt.level == level && keep(pt.z)) {
                    check_pole(pt.z, &poles)?;
                    band.add(finite_term(pt.z, q.eval(pt.z) / (pt.f_prime * pt.f_prime))?);
                    terms_used += 1;
                }
                acc.add(band.value());
                last_band = band;
            }
            if terms_used == 0 {
                return Err(Error::InvalidInput("no preimages found".into()));
            }
            Ok(PushforwardSample {
                w,
                sigma: acc.value(),
                terms_used,
                tail_estimate: last_band.value().norm(),
            })
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpIdentity {
    pub lhs: Complex64,
    pub rhs: Complex64,
    pub abs_diff: f64,
}

/// `sum_{|k| <= n} 1/(w^2 (log w + 2 pi i k)^2)` against the closed form
/// `1/(w^3 - 2 w^2 + w)`.
pub fn exp_identity(w: Complex64, n: usize) -> Result<ExpIdentity> {
    exp_identity_on_branch(w, n, 0)
}

/// As [`exp_identity`], with `log w` replaced by `log w + 2 pi i branch`.
pub fn exp_identity_on_branch(w: Complex64, n: usize, branch: i64) -> Result<ExpIdentity> {
    let one = Complex64::new(1.0, 0.0);
    if w.norm() <= crate::area::SINGULAR_TOL || (w - one).norm() <= crate::area::SINGULAR_TOL {
        return Err(Error::InvalidInput("w must avoid 0 and 1".into()));
    }
    let log = w.ln() + Complex64::new(0.0, std::f64::consts::TAU * branch as f64);
    let w2 = w * w;
    let term = |k: i64| {
        let z = log + Complex64::new(0.0, std::f64::consts::TAU * k as f64);
        one / (w2 * z * z)
    };
    let mut acc = ComplexCompensatedSum::new();
    acc.add(term(0));
    for k in 1..=n as i64 {
        acc.add(term(k) + term(-k));
    }
    let lhs = acc.value();
    let rhs = exp_identity_rhs(w);
    Ok(ExpIdentity {
        lhs,
        rhs,
        abs_diff: (lhs - rhs).norm(),
    })
}

pub fn exp_identity_rhs(w: Complex64) -> Complex64 {
    Complex64::new(1.0, 0.0) / (w * w * w - 2.0 * w * w + w)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoleFit {
    pub slope: f64,
    /// `slope + 4`: a differential with a pole of order `d` at infinity has
    /// coefficient of size `|w|^{d-4}` in the coordinate `u = 1/w`.
    pub pole_order_at_infinity: f64,
    pub r_squared: f64,
}

/// Least-squares slope of `log |sigma|` against `log |w|`.
pub fn pole_fit(samples: &[PushforwardSample]) -> Result<PoleFit> {
    if samples.len() < 4 {
        return Err(Error::InvalidInput("pole fit needs at least 4 samples".into()));
    }
    if let Some(s) = samples.iter().find(|s| !(s.sigma.norm() >= ZERO_SAMPLE)) {
        return Err(Error::ZeroSample(s.w));
    }
    let x: Vec<f64> = samples.iter().map(|s| s.w.norm().ln()).collect();
    let y: Vec<f64> = samples.iter().map(|s| s.sigma.norm().ln()).collect();
    let (lo, hi) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if hi - lo < 3.0 * std::f64::consts::LN_10 * (1.0 - 1e-9) {
        return Err(Error::InvalidInput(
            "samples must span at least 3 decades of |w|".into(),
        ));
    }
    let (slope, _, r_squared, _) = linear_fit(&x, &y);
    Ok(PoleFit {
        slope,
        pole_order_at_infinity: slope + 4.0,
        r_squared,
    })
}

/// Pushforward samples of `q` under `exp` at `w = r e^{i angle}`, each summed
/// over `terms_per_modulus * r` branch pairs (at least 1000).
pub fn exp_pushforward_samples(
    q: &QDSpec,
    moduli: &[f64],
    angle: f64,
    terms_per_modulus: f64,
) -> Result<Vec<PushforwardSample>> {
    moduli
        .iter()
        .map(|&r| {
            let depth = ((terms_per_modulus * r).ceil() as usize).max(1000);
            pushforward_eval(
                PushforwardMap::Exp,
                q,
                Complex64::from_polar(r, angle),
                depth,
                PushforwardOptions::default(),
            )
        })
        .collect()
}
