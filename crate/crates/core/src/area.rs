//! Area-property sums, cylindrical Monte Carlo areas and growth sequences.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{poincare_series, TreeOptions};
use crate::error::{Error, Result};
use crate::linearizer::{preimages_in_annuli, PoincareMap, SeedFailure};
use crate::numerics::{CompensatedSum, Polynomial};
use crate::region::RegionSpec;
use crate::series::{classify, SeriesEstimate, DEFAULT_RTOL};

/// Points closer than this to a singular value are rejected.
pub const SINGULAR_TOL: f64 = 1e-10;
/// Default number of independent random streams in Monte Carlo runs.
pub const DEFAULT_PARTITIONS: usize = 16;

/// Linearizers with closed-form inverse branches.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExplicitMap {
    /// `e^z`, the linearizer of `z^2` at 1.
    Exp,
    /// `2 cosh(sqrt z)`, the linearizer of `z^2 - 2` at 2.
    CoshSqrt,
}

impl ExplicitMap {
    pub fn eval(self, z: Complex64) -> Result<(Complex64, Complex64)> {
        let (value, deriv) = match self {
            ExplicitMap::Exp => {
                let v = z.exp();
                (v, v)
            }
            ExplicitMap::CoshSqrt => {
                let s = z.sqrt();
                let deriv = if s.norm() < 1e-4 {
                    // sinh(s)/s = 1 + z/6 + z^2/120 + ...
                    Complex64::new(1.0, 0.0) + z / 6.0 + z * z / 120.0
                } else {
                    s.sinh() / s
                };
                (2.0 * s.cosh(), deriv)
            }
        };
        if value.is_finite() && deriv.is_finite() {
            Ok((value, deriv))
        } else {
            Err(Error::OverflowEscape(z))
        }
    }

    /// Singular values: the omitted value 0 for `e^z`, the critical values `±2`
    /// for `2 cosh(sqrt z)`.
    pub fn singular_values(self) -> Vec<Complex64> {
        match self {
            ExplicitMap::Exp => vec![Complex64::new(0.0, 0.0)],
            ExplicitMap::CoshSqrt => vec![Complex64::new(-2.0, 0.0), Complex64::new(2.0, 0.0)],
        }
    }

    /// Multiplier of the underlying polynomial at its fixed point; bands for
    /// growth sequences are powers of this.
    pub fn multiplier(self) -> f64 {
        match self {
            ExplicitMap::Exp => 2.0,
            ExplicitMap::CoshSqrt => 4.0,
        }
    }

    fn check_regular(self, w: Complex64) -> Result<()> {
        if !w.is_finite() {
            return Err(Error::InvalidInput("target must be finite".into()));
        }
        if self.singular_values().iter().any(|&s| (w - s).norm() <= SINGULAR_TOL) {
            return Err(Error::SingularQuery(w));
        }
        Ok(())
    }

    /// The preimage of `w` on branch `k` and the derivative there: `log w + 2 pi i k`
    /// for `e^z`, `(acosh(w/2) + 2 pi i k)^2` for `2 cosh(sqrt z)`.
    pub fn preimage(self, w: Complex64, k: i64) -> (Complex64, Complex64) {
        let shift = Complex64::new(0.0, std::f64::consts::TAU * k as f64);
        match self {
            ExplicitMap::Exp => (w.ln() + shift, w),
            ExplicitMap::CoshSqrt => {
                let a = (w / 2.0).acosh();
                let s = a + shift;
                (s * s, a.sinh() / s)
            }
        }
    }
}

/// A map whose preimages and values the area routines can use.
#[derive(Clone, Copy, Debug)]
pub enum AreaMap<'a> {
    Explicit(ExplicitMap),
    Linearizer(&'a PoincareMap),
}

impl AreaMap<'_> {
    pub fn eval(&self, z: Complex64) -> Result<(Complex64, Complex64)> {
        match self {
            AreaMap::Explicit(m) => m.eval(z),
            AreaMap::Linearizer(f) => f.eval(z),
        }
    }

    pub fn band_ratio(&self) -> f64 {
        match self {
            AreaMap::Explicit(m) => m.multiplier(),
            AreaMap::Linearizer(f) => f.lambda.norm(),
        }
    }
}

/// Shell `n >= 1` holds branch indices `2^{n-1} <= |k| < 2^n`; `k = 0` joins shell 1.
fn shell_of(k: u64) -> usize {
    if k < 2 {
        1
    } else {
        (64 - k.leading_zeros()) as usize
    }
}

/// Number of shells entirely contained in `|k| <= k_max`.
fn complete_shells(k_max: u64) -> usize {
    (1..64).take_while(|&n| (1u64 << n) - 1 <= k_max).count()
}

/// Branch indices in summation order `0, 1, -1, 2, -2, ...`.
fn branch_order(k_max: u64) -> impl Iterator<Item = i64> {
    std::iter::once(0).chain((1..=k_max as i64).flat_map(|k| [k, -k]))
}

/// Sums `term(k)` for `|k| <= k_max` shell by shell. All terms count toward the
/// value; the verdict and tail only look at complete shells so that a truncated
/// last shell does not read as decay.
fn shell_series(exponent: f64, k_max: u64, mut term: impl FnMut(i64) -> Option<f64>) -> SeriesEstimate {
    let shells = shell_of(k_max);
    let mut sums = vec![CompensatedSum::new(); shells];
    for k in branch_order(k_max) {
        if let Some(v) = term(k) {
            sums[shell_of(k.unsigned_abs()) - 1] += v;
        }
    }
    let levels: Vec<f64> = sums.iter().map(|s| s.value()).collect();
    let complete = complete_shells(k_max);
    let mut est = SeriesEstimate::from_levels(exponent, levels);
    let head = SeriesEstimate::from_levels(exponent, est.level_sums[..complete].to_vec());
    est.verdict = classify(&head.level_sums, &head.partial_sums, DEFAULT_RTOL);
    est.tail_bound = head.tail_bound;
    est
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AreaSum {
    pub series: SeriesEstimate,
    /// Candidates the preimage search could not resolve; always empty for
    /// explicit maps.
    pub unresolved: Vec<SeedFailure>,
}

fn check_exponent(t: f64) -> Result<()> {
    if !(t > 0.0 && t <= 4.0) {
        return Err(Error::InvalidInput("exponent t must lie in (0, 4]".into()));
    }
    Ok(())
}

/// `sum 1/(|z| |f'(z)|)^t` over preimages `z` of `w` with `|z| >= 1`.
///
/// For explicit maps `depth` is the largest branch index `k_max` and levels are
/// dyadic shells in `|k|`. For linearizers `depth` is the number of bands
/// `eta |lambda|^{n-1} < |z| <= eta |lambda|^n`, one level per band.
pub fn area_sum(map: AreaMap<'_>, w: Complex64, t: f64, depth: usize, opts: TreeOptions) -> Result<AreaSum> {
    check_exponent(t)?;
    match map {
        AreaMap::Explicit(m) => {
            m.check_regular(w)?;
            let series = shell_series(t, depth as u64, |k| {
                let (z, d) = m.preimage(w, k);
                (z.norm() >= 1.0).then(|| (z.norm() * d.norm()).powf(-t))
            });
            Ok(AreaSum {
                series,
                unresolved: Vec::new(),
            })
        }
        AreaMap::Linearizer(f) => {
            let pre = preimages_in_annuli(f, w, depth, opts)?;
            let mut sums = vec![CompensatedSum::new(); depth];
            for pt in pre.points.iter().filter(|pt| pt.z.norm() >= 1.0) {
                sums[pt.level - 1] += (pt.z.norm() * pt.f_prime.norm()).powf(-t);
            }
            Ok(AreaSum {
                series: SeriesEstimate::from_levels(t, sums.iter().map(|s| s.value()).collect()),
                unresolved: pre.failures,
            })
        }
    }
}

/// `sum 1/(|z| |f'(z)|)^t` over preimages with `1 <= |z| < radius`.
pub fn area_sum_within(map: AreaMap<'_>, w: Complex64, t: f64, radius: f64, opts: TreeOptions) -> Result<f64> {
    check_exponent(t)?;
    let mut acc = CompensatedSum::new();
    match map {
        AreaMap::Explicit(m) => {
            m.check_regular(w)?;
            // |z_k| grows at least linearly in |k| for both maps
            let k_max = (radius / std::f64::consts::TAU).ceil() as i64 + 2;
            for k in branch_order(k_max as u64) {
                let (z, d) = m.preimage(w, k);
                if z.norm() >= 1.0 && z.norm() < radius {
                    acc += (z.norm() * d.norm()).powf(-t);
                }
            }
        }
        AreaMap::Linearizer(f) => {
            let lam = f.lambda.norm();
            let bands = ((radius / f.eta).ln() / lam.ln()).ceil().max(1.0) as usize;
            let pre = preimages_in_annuli(f, w, bands, opts)?;
            for pt in &pre.points {
                if pt.z.norm() >= 1.0 && pt.z.norm() < radius {
                    acc += (pt.z.norm() * pt.f_prime.norm()).powf(-t);
                }
            }
        }
    }
    Ok(acc.value())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AreaEstimate {
    pub value: f64,
    pub std_error: f64,
    pub samples: u64,
    pub seed: u64,
    pub hits: u64,
    /// Samples whose image overflowed; counted as misses.
    pub overflow_misses: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct McOptions {
    pub partitions: usize,
}

impl Default for McOptions {
    fn default() -> Self {
        Self {
            partitions: DEFAULT_PARTITIONS,
        }
    }
}

/// Counts hits in `{inner < |z| < outer}` sampled uniformly in cylindrical
/// measure. Partition `i` draws from the ChaCha stream `stream_base + i`, so
/// the counts depend only on the seed and the partition count.
struct Draw {
    samples: u64,
    seed: u64,
    stream_base: u64,
    partitions: usize,
}

fn sample_annulus(map: AreaMap<'_>, region: &RegionSpec, (inner, outer): (f64, f64), draw: Draw) -> (u64, u64) {
    let Draw {
        samples,
        seed,
        stream_base,
        partitions,
    } = draw;
    let parts = partitions.max(1) as u64;
    let (log_in, log_span) = (inner.ln(), (outer / inner).ln());
    (0..parts)
        .into_par_iter()
        .map(|part| {
            let count = samples / parts + u64::from(part < samples % parts);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(stream_base + part);
            let mut hits = 0u64;
            let mut overflow = 0u64;
            for _ in 0..count {
                let radius = (log_in + log_span * rng.gen::<f64>()).exp();
                let angle = std::f64::consts::TAU * rng.gen::<f64>();
                match map.eval(Complex64::from_polar(radius, angle)) {
                    Ok((v, _)) => hits += u64::from(region.contains(v)),
                    Err(_) => overflow += 1,
                }
            }
            (hits, overflow)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold((0, 0), |(h, o), (dh, dov)| (h + dh, o + dov))
}

fn estimate(hits: u64, overflow: u64, samples: u64, seed: u64, measure: f64) -> AreaEstimate {
    let frac = hits as f64 / samples as f64;
    let value = frac * measure;
    let std_error = if hits == 0 {
        0.0
    } else {
        value * ((1.0 - frac) / (frac * samples as f64)).sqrt()
    };
    AreaEstimate {
        value,
        std_error,
        samples,
        seed,
        hits,
        overflow_misses: overflow,
    }
}

/// Cylindrical area `∫ dx dy / |z|^2` of `f^{-1}(region)` within `1 < |z| < r_max`.
pub fn cylindrical_area_mc(
    map: AreaMap<'_>,
    region: &RegionSpec,
    r_max: f64,
    samples: u64,
    seed: u64,
    opts: McOptions,
) -> Result<AreaEstimate> {
    if !(r_max > 1.0) || !r_max.is_finite() {
        return Err(Error::InvalidInput("r_max must exceed 1".into()));
    }
    if samples < 10_000 {
        return Err(Error::InvalidInput("Monte Carlo needs at least 1e4 samples".into()));
    }
    let draw = Draw {
        samples,
        seed,
        stream_base: 0,
        partitions: opts.partitions,
    };
    let (hits, overflow) = sample_annulus(map, region, (1.0, r_max), draw);
    Ok(estimate(
        hits,
        overflow,
        samples,
        seed,
        std::f64::consts::TAU * r_max.ln(),
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthPoint {
    pub n: usize,
    pub area: f64,
    pub std_error: f64,
}

/// `A_n`, the cylindrical area of `f^{-1}(region)` in `1 <= |z| <= rho^n` with
/// `rho` the band ratio, for `n = 0..=n_max`. Each band `rho^{j-1} <= |z| <= rho^j`
/// gets `samples` points of its own stream; `A_n` accumulates the bands.
pub fn el_growth(
    map: AreaMap<'_>,
    region: &RegionSpec,
    n_max: usize,
    samples: u64,
    seed: u64,
    opts: McOptions,
) -> Result<Vec<GrowthPoint>> {
    if n_max < 2 {
        return Err(Error::InvalidInput("growth sequence needs n_max >= 2".into()));
    }
    if samples == 0 {
        return Err(Error::InvalidInput("need at least one sample per band".into()));
    }
    let ratio = map.band_ratio();
    let band_measure = std::f64::consts::TAU * ratio.ln();
    let mut out = vec![GrowthPoint {
        n: 0,
        area: 0.0,
        std_error: 0.0,
    }];
    let mut area = CompensatedSum::new();
    let mut variance = 0.0;
    for band in 1..=n_max {
        let inner = ratio.powi(band as i32 - 1);
        let draw = Draw {
            samples,
            seed,
            stream_base: (band as u64) << 32,
            partitions: opts.partitions,
        };
        let (hits, overflow) = sample_annulus(map, region, (inner, inner * ratio), draw);
        let est = estimate(hits, overflow, samples, seed, band_measure);
        area += est.value;
        variance += est.std_error * est.std_error;
        out.push(GrowthPoint {
            n: band,
            area: area.value(),
            std_error: variance.sqrt(),
        });
    }
    Ok(out)
}

/// Distance from `z` to the lines `Im z = (2m + 1) pi`, which make up the
/// preimage of the ray `(-inf, 0]` under `e^z`.
fn distance_to_odd_pi_lines(z: Complex64) -> f64 {
    let pi = std::f64::consts::PI;
    let m = ((z.im / pi - 1.0) / 2.0).round();
    (z.im - (2.0 * m + 1.0) * pi).abs()
}

/// `sum dist(z, f^{-1}(K))^2 / |z|^2` over `z = log w + 2 pi i k`, `|k| <= k_max`,
/// `|z| >= 1`, for `f = e^z` and `K` the ray `(-inf, 0]`. Levels are dyadic
/// shells in `|k|`.
pub fn distance_form_sum(map: ExplicitMap, w: Complex64, region: &RegionSpec, k_max: u64) -> Result<SeriesEstimate> {
    if map != ExplicitMap::Exp {
        return Err(Error::InvalidInput(
            "the distance form is only available for the exp map".into(),
        ));
    }
    let is_negative_ray = matches!(region, RegionSpec::HalfLine { anchor, direction }
        if anchor.norm() <= SINGULAR_TOL && (direction + 1.0).norm() <= 1e-12);
    if !is_negative_ray {
        return Err(Error::InvalidInput("the distance form needs K = ray:0:-1".into()));
    }
    map.check_regular(w)?;
    if region.contains(w) {
        return Err(Error::InvalidInput(format!("{w} lies on the ray")));
    }
    Ok(shell_series(2.0, k_max, |k| {
        let (z, _) = map.preimage(w, k);
        (z.norm() >= 1.0).then(|| distance_to_odd_pi_lines(z).powi(2) / z.norm_sqr())
    }))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiegelComparison {
    pub multiplier_at_origin: Complex64,
    pub repelling_fixed_point: Complex64,
    pub repelling_multiplier: Complex64,
    /// First iterate at which the orbit of `w_in` came back within `1e-2`.
    pub return_time: usize,
    pub trace_in: SeriesEstimate,
    pub trace_out: SeriesEstimate,
}

pub const SIEGEL_ORBIT_LENGTH: usize = 10_000;
pub const SIEGEL_RETURN_TOL: f64 = 1e-2;

/// Checks that the orbit of `w` stays within `2|w|` for 1e4 iterations and
/// comes back within `1e-2` of `w`; returns the first return time.
pub fn validate_siegel_point(p: &Polynomial, w: Complex64) -> Result<usize> {
    let bound = 2.0 * w.norm();
    let mut z = w;
    let mut first_return = None;
    for n in 1..=SIEGEL_ORBIT_LENGTH {
        z = p.value(z);
        if !(z.norm() <= bound) {
            return Err(Error::SiegelValidationFailed(
                w,
                format!("orbit left |z| <= {bound} at iteration {n}"),
            ));
        }
        if first_return.is_none() && (z - w).norm() <= SIEGEL_RETURN_TOL {
            first_return = Some(n);
        }
    }
    first_return.ok_or_else(|| Error::SiegelValidationFailed(w, "orbit never returned within 1e-2".into()))
}

/// Poincaré series at `t = 2` of `p(z) = e^{2 pi i theta} z + z^2` at a point
/// validated to lie in the Siegel disc and at an escaping point.
pub fn siegel_compare(
    theta: f64,
    w_in: Complex64,
    w_out: Complex64,
    depth: usize,
    opts: TreeOptions,
) -> Result<SiegelComparison> {
    let lambda = Complex64::from_polar(1.0, std::f64::consts::TAU * theta);
    let p = Polynomial::quadratic_with_multiplier(lambda);
    let return_time = validate_siegel_point(&p, w_in)?;
    let zeta = Complex64::new(1.0, 0.0) - lambda;
    let trace_in = poincare_series(&p, w_in, 2.0, depth, None, opts)?;
    let trace_out = if w_out == w_in {
        trace_in.clone()
    } else {
        poincare_series(&p, w_out, 2.0, depth, None, opts)?
    };
    Ok(SiegelComparison {
        multiplier_at_origin: lambda,
        repelling_fixed_point: zeta,
        repelling_multiplier: p.eval(zeta).1,
        return_time,
        trace_in,
        trace_out,
    })
}
