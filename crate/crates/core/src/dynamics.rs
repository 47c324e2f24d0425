//! Fixed points, critical orbits, backward orbits and Poincaré series of a
//! polynomial.
//!
//! Derivatives in the Poincaré series are Euclidean. For sums restricted to a
//! bounded set this is comparable to the spherical version; unrestricted sums
//! over backward orbits of a bounded Julia set stay bounded as well, but the
//! constants are not tracked.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{lex_cmp, poly_roots, CompensatedSum, Polynomial, DEFAULT_TOL};
use crate::region::RegionSpec;
use crate::series::SeriesEstimate;

/// |multiplier| below this is superattracting, within this of 1 indifferent.
pub const CLASSIFICATION_EPS: f64 = 1e-9;
/// Default cap on the number of nodes at the deepest level of a preimage tree.
pub const DEFAULT_NODE_CAP: usize = 2_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixedPointKind {
    Superattracting,
    Attracting,
    Repelling,
    Indifferent,
}

impl FixedPointKind {
    pub fn classify(multiplier: Complex64) -> Self {
        let m = multiplier.norm();
        if m < CLASSIFICATION_EPS {
            FixedPointKind::Superattracting
        } else if (m - 1.0).abs() < CLASSIFICATION_EPS {
            FixedPointKind::Indifferent
        } else if m < 1.0 {
            FixedPointKind::Attracting
        } else {
            FixedPointKind::Repelling
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedPointInfo {
    pub location: Complex64,
    pub multiplier: Complex64,
    pub classification: FixedPointKind,
}

/// All fixed points of `p` with their multipliers, in root-sort order.
pub fn fixed_points(p: &Polynomial) -> Result<Vec<FixedPointInfo>> {
    if p.degree() < 2 {
        return Err(Error::InvalidInput("fixed points need degree >= 2".into()));
    }
    let roots = poly_roots(&p.minus_identity()?, DEFAULT_TOL)?;
    Ok(roots
        .into_iter()
        .map(|location| {
            let (_, multiplier) = p.eval(location);
            FixedPointInfo {
                location,
                multiplier,
                classification: FixedPointKind::classify(multiplier),
            }
        })
        .collect())
}

/// A radius outside of which every orbit of `p` escapes to infinity.
pub fn escape_radius(p: &Polynomial) -> f64 {
    let c = p.coeffs();
    let d = p.degree();
    let lead = p.leading().norm();
    let lower: f64 = c[..d].iter().map(|a| a.norm()).sum::<f64>() / lead;
    // |z| > r implies |p(z)| > 2|z|
    let growth = (3.0 / lead).powf(1.0 / (d.max(2) - 1) as f64);
    (1.0 + lower).max(growth).max(2.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalOrbits {
    pub critical_points: Vec<Complex64>,
    /// Distinct forward-orbit points `p^k(c)`, `k >= 1`, in discovery order.
    pub postcritical_points: Vec<Complex64>,
    pub connected: bool,
}

/// Iterates every critical point `n_max` times. The Julia set is reported as
/// connected iff no critical orbit leaves the disc of radius `escape_radius`.
pub fn critical_orbit_analysis(p: &Polynomial, n_max: usize, escape_radius: f64) -> Result<CriticalOrbits> {
    if n_max == 0 {
        return Err(Error::InvalidInput("n_max must be at least 1".into()));
    }
    let dp = p
        .derivative()
        .ok_or_else(|| Error::InvalidInput("constant polynomial".into()))?;
    let critical_points = if dp.degree() == 0 {
        Vec::new()
    } else {
        poly_roots(&dp, DEFAULT_TOL)?
    };
    let mut postcritical: Vec<Complex64> = Vec::new();
    let mut connected = true;
    for &c in &critical_points {
        let mut z = c;
        for _ in 0..n_max {
            z = p.value(z);
            if !z.is_finite() || z.norm() > escape_radius {
                connected = false;
                break;
            }
            let dedup_tol = 1e-12 * (1.0 + z.norm());
            if !postcritical.iter().any(|q| (q - z).norm() <= dedup_tol) {
                postcritical.push(z);
            }
        }
    }
    Ok(CriticalOrbits {
        critical_points,
        postcritical_points: postcritical,
        connected,
    })
}

/// Whether the orbit of `z` stays within `escape_radius` for `max_iter` steps.
/// Orbits still undecided at the cap count as inside.
pub fn in_filled_julia(p: &Polynomial, z: Complex64, max_iter: usize, escape_radius: f64) -> bool {
    let r2 = escape_radius * escape_radius;
    let mut z = z;
    for _ in 0..max_iter {
        if !(z.norm_sqr() <= r2) {
            return false;
        }
        z = p.value(z);
    }
    z.norm_sqr() <= r2
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub z: Complex64,
    /// `(p^k)'(z)` for a node at level `k`.
    pub cumulative_derivative: Complex64,
    /// Index of the parent in the previous level; `0` for the root.
    pub parent: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreimageTree {
    pub root: Complex64,
    /// `levels[0]` holds the root itself; `levels[k]` holds `p^{-k}(root)`.
    pub levels: Vec<Vec<TreeNode>>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TreeOptions {
    pub tol: f64,
    pub node_cap: usize,
}

impl Default for TreeOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            node_cap: DEFAULT_NODE_CAP,
        }
    }
}

fn check_budget(p: &Polynomial, depth: usize, cap: usize) -> Result<()> {
    let requested = (p.degree() as u128).checked_pow(depth as u32).unwrap_or(u128::MAX);
    if requested > cap as u128 {
        return Err(Error::BudgetExceeded { requested, cap });
    }
    Ok(())
}

/// Children of every node of `level`, parents in order and siblings in root-sort
/// order. The ordering is independent of how rayon splits the work.
pub fn expand_level(p: &Polynomial, level: &[TreeNode], tol: f64) -> Result<Vec<TreeNode>> {
    let children: Vec<Vec<TreeNode>> = level
        .par_iter()
        .enumerate()
        .map(|(idx, node)| {
            let mut roots = poly_roots(&p.shifted(node.z), tol)?;
            roots.sort_by(lex_cmp);
            Ok(roots
                .into_iter()
                .map(|z| TreeNode {
                    z,
                    cumulative_derivative: p.eval(z).1 * node.cumulative_derivative,
                    parent: idx,
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(children.into_iter().flatten().collect())
}

fn root_level(w: Complex64) -> Vec<TreeNode> {
    vec![TreeNode {
        z: w,
        cumulative_derivative: Complex64::new(1.0, 0.0),
        parent: 0,
    }]
}

pub fn preimage_tree(p: &Polynomial, w: Complex64, depth: usize, opts: TreeOptions) -> Result<PreimageTree> {
    if depth == 0 {
        return Err(Error::InvalidInput("depth must be at least 1".into()));
    }
    check_budget(p, depth, opts.node_cap)?;
    let mut levels = vec![root_level(w)];
    for k in 0..depth {
        let next = expand_level(p, &levels[k], opts.tol)?;
        levels.push(next);
    }
    Ok(PreimageTree { root: w, levels })
}

/// Fails with `PostcriticalQuery` when `w` is within `1e-8 (1 + |w|)` of a
/// computed postcritical point.
pub fn ensure_off_postcritical(p: &Polynomial, w: Complex64) -> Result<()> {
    let orbits = critical_orbit_analysis(p, 256, escape_radius(p))?;
    let tol = 1e-8 * (1.0 + w.norm());
    if orbits.postcritical_points.iter().any(|&q| (q - w).norm() <= tol) {
        return Err(Error::PostcriticalQuery(w));
    }
    Ok(())
}

/// Level sums `L_n = sum |(p^n)'(z)|^{-t}` over `z` in `p^{-n}(w)`, optionally
/// restricted to nodes inside `restrict`, for `n = 1..=depth`.
pub fn poincare_series(
    p: &Polynomial,
    w: Complex64,
    t: f64,
    depth: usize,
    restrict: Option<&RegionSpec>,
    opts: TreeOptions,
) -> Result<SeriesEstimate> {
    if !(t > 0.0) {
        return Err(Error::InvalidInput("exponent t must be positive".into()));
    }
    if depth == 0 {
        return Err(Error::InvalidInput("depth must be at least 1".into()));
    }
    check_budget(p, depth, opts.node_cap)?;
    ensure_off_postcritical(p, w)?;
    let mut level = root_level(w);
    let mut level_sums = Vec::with_capacity(depth);
    for _ in 0..depth {
        level = expand_level(p, &level, opts.tol)?;
        // sequential reduction in node order keeps the sum independent of threading
        let sum: CompensatedSum = level
            .iter()
            .filter(|node| restrict.is_none_or(|r| r.contains(node.z)))
            .map(|node| node.cumulative_derivative.norm().powf(-t))
            .collect();
        level_sums.push(sum.value());
    }
    Ok(SeriesEstimate::from_levels(t, level_sums))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::Verdict;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn square() -> Polynomial {
        Polynomial::from_real(&[0.0, 0.0, 1.0]).unwrap()
    }

    fn basilica() -> Polynomial {
        Polynomial::from_real(&[-1.0, 0.0, 1.0]).unwrap()
    }

    #[test]
    fn fixed_points_of_square() {
        let fps = fixed_points(&square()).unwrap();
        assert_eq!(fps.len(), 2);
        assert!(fps[0].location.norm() < 1e-12);
        assert_eq!(fps[0].classification, FixedPointKind::Superattracting);
        assert!((fps[1].location - c(1.0, 0.0)).norm() < 1e-12);
        assert!((fps[1].multiplier - c(2.0, 0.0)).norm() < 1e-12);
        assert_eq!(fps[1].classification, FixedPointKind::Repelling);
    }

    #[test]
    fn fixed_points_of_multiplier_family() {
        let fps = fixed_points(&Polynomial::quadratic_with_multiplier(c(1.5, 0.0))).unwrap();
        assert!((fps[0].location - c(-0.5, 0.0)).norm() < 1e-12);
        assert!((fps[0].multiplier - c(0.5, 0.0)).norm() < 1e-12);
        assert_eq!(fps[0].classification, FixedPointKind::Attracting);
        assert!(fps[1].location.norm() < 1e-12);
        assert!((fps[1].multiplier - c(1.5, 0.0)).norm() < 1e-12);
        assert_eq!(fps[1].classification, FixedPointKind::Repelling);
    }

    #[test]
    fn golden_mean_fixed_points() {
        let theta = (5f64.sqrt() - 1.0) / 2.0;
        let lambda = Complex64::from_polar(1.0, std::f64::consts::TAU * theta);
        let fps = fixed_points(&Polynomial::quadratic_with_multiplier(lambda)).unwrap();
        let rep = fps
            .iter()
            .find(|f| f.classification == FixedPointKind::Repelling)
            .unwrap();
        assert!((rep.location - (1.0 - lambda)).norm() < 1e-12);
        // |2 - e^{2 pi i theta}| evaluated directly
        let expected = (2.0 - lambda).norm();
        assert_relative_eq!(rep.multiplier.norm(), expected, max_relative = 1e-12);
        assert_relative_eq!(expected, 2.8195, epsilon = 1e-4);
        assert!(fps.iter().any(|f| f.classification == FixedPointKind::Indifferent));
    }

    #[test]
    fn fixed_points_need_degree_two() {
        assert!(fixed_points(&Polynomial::from_real(&[1.0, 2.0]).unwrap()).is_err());
    }

    #[test]
    fn critical_orbits() {
        let o = critical_orbit_analysis(&square(), 10, 10.0).unwrap();
        assert_eq!(o.postcritical_points, vec![c(0.0, 0.0)]);
        assert!(o.connected);

        let o = critical_orbit_analysis(&basilica(), 10, 10.0).unwrap();
        assert_eq!(o.postcritical_points, vec![c(-1.0, 0.0), c(0.0, 0.0)]);
        assert!(o.connected);

        let o = critical_orbit_analysis(&Polynomial::from_real(&[-5.0, 0.0, 1.0]).unwrap(), 10, 10.0).unwrap();
        assert!(!o.connected);
        assert!(critical_orbit_analysis(&square(), 0, 10.0).is_err());
    }

    #[test]
    fn filled_julia_examples() {
        let b = basilica();
        assert!(in_filled_julia(&b, c(0.0, 0.0), 100, 10.0));
        assert!(!in_filled_julia(&b, c(3.0, 0.0), 100, 10.0));
        // rounding off the unit circle doubles in the exponent each step
        for k in 0..16 {
            let z = Complex64::from_polar(1.0, k as f64 * 0.39);
            assert!(in_filled_julia(&square(), z, 40, 10.0));
        }
    }

    #[test]
    fn square_roots_tree() {
        let t = preimage_tree(&square(), c(4.0, 0.0), 1, TreeOptions::default()).unwrap();
        let l1 = &t.levels[1];
        assert_eq!(l1.len(), 2);
        assert!((l1[0].z - c(-2.0, 0.0)).norm() < 1e-12);
        assert!((l1[0].cumulative_derivative - c(-4.0, 0.0)).norm() < 1e-12);
        assert!((l1[1].z - c(2.0, 0.0)).norm() < 1e-12);
        assert!((l1[1].cumulative_derivative - c(4.0, 0.0)).norm() < 1e-12);

        let t = preimage_tree(&square(), c(4.0, 0.0), 2, TreeOptions::default()).unwrap();
        assert_eq!(t.levels[2].len(), 4);
        let s2 = 2f64.sqrt();
        for node in &t.levels[2] {
            assert_relative_eq!(node.z.norm(), s2, max_relative = 1e-12);
            // |(p^2)'| = |4 z^3| = 4 * 2^{3/2}
            assert_relative_eq!(
                node.cumulative_derivative.norm(),
                4.0 * 2f64.powf(1.5),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn tree_budget_is_enforced() {
        let opts = TreeOptions {
            node_cap: 1000,
            ..TreeOptions::default()
        };
        let err = preimage_tree(&square(), c(4.0, 0.0), 10, opts).unwrap_err();
        assert!(matches!(
            err,
            Error::BudgetExceeded {
                requested: 1024,
                cap: 1000
            }
        ));
        assert!(preimage_tree(&square(), c(4.0, 0.0), 0, opts).is_err());
    }

    #[test]
    fn tree_residuals_and_chain_rule() {
        let p = Polynomial::new(vec![c(0.1, 0.2), c(0.3, 0.0), c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        let w = c(0.7, -0.4);
        let t = preimage_tree(&p, w, 4, TreeOptions::default()).unwrap();
        for k in 1..t.levels.len() {
            assert_eq!(t.levels[k].len(), 3usize.pow(k as u32));
            for node in &t.levels[k] {
                let parent = t.levels[k - 1][node.parent];
                assert!((p.value(node.z) - parent.z).norm() < 1e-12 * p.scale().max(1.0) * 10.0);
                // chain rule via forward iteration from the node
                let mut z = node.z;
                let mut d = c(1.0, 0.0);
                for _ in 0..k {
                    let (v, dv) = p.eval(z);
                    d *= dv;
                    z = v;
                }
                assert!((d - node.cumulative_derivative).norm() <= 1e-10 * d.norm());
            }
        }
    }

    #[test]
    fn poincare_series_of_square() {
        let est = poincare_series(&square(), c(4.0, 0.0), 2.0, 2, None, TreeOptions::default()).unwrap();
        assert_relative_eq!(est.level_sums[0], 0.125, max_relative = 1e-12);
        assert_relative_eq!(est.level_sums[1], 0.03125, max_relative = 1e-12);
        assert_relative_eq!(est.value(), 0.15625, max_relative = 1e-12);
    }

    #[test]
    fn square_level_ratio_closed_form() {
        // level n: 2^n nodes with |z| = 4^{2^-n}, |(p^n)'| = 2^n 4 / |z|,
        // so L_{n+1}/L_n = 0.5 * 4^{-2^{-n}}, tending to 1/2.
        let est = poincare_series(&square(), c(4.0, 0.0), 2.0, 11, None, TreeOptions::default()).unwrap();
        for n in 1..=10 {
            let ratio = est.level_sums[n] / est.level_sums[n - 1];
            let expected = 0.5 * 4f64.powf(-(2f64.powi(-(n as i32))));
            assert_relative_eq!(ratio, expected, max_relative = 1e-10);
        }
    }

    #[test]
    fn restriction_never_increases_levels() {
        let b = basilica();
        let full = poincare_series(&b, c(3.0, 0.0), 2.0, 8, None, TreeOptions::default()).unwrap();
        let disc = RegionSpec::disc(c(1.0, 0.0), 0.5).unwrap();
        let part = poincare_series(&b, c(3.0, 0.0), 2.0, 8, Some(&disc), TreeOptions::default()).unwrap();
        for (a, b) in part.level_sums.iter().zip(&full.level_sums) {
            assert!(a <= b);
        }
        assert!(part.value() > 0.0);
        for w in full.partial_sums.windows(2) {
            assert!(w[1] >= w[0]);
        }
    }

    #[test]
    fn postcritical_query_is_rejected() {
        let err = poincare_series(&basilica(), c(-1.0, 0.0), 2.0, 3, None, TreeOptions::default()).unwrap_err();
        assert!(matches!(err, Error::PostcriticalQuery(_)));
        assert!(poincare_series(&basilica(), c(3.0, 0.0), 0.0, 3, None, TreeOptions::default()).is_err());
    }

    #[test]
    fn basilica_series_converges() {
        let est = poincare_series(&basilica(), c(3.0, 0.0), 2.0, 14, None, TreeOptions::default()).unwrap();
        assert_ne!(est.verdict, Verdict::DivergingSuspected);
        for w in est.level_sums.windows(2) {
            assert!(w[1] < w[0]);
        }
    }

    #[test]
    fn threading_does_not_change_sums() {
        let b = basilica();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let single = pool
            .install(|| poincare_series(&b, c(3.0, 0.0), 2.0, 10, None, TreeOptions::default()))
            .unwrap();
        let multi = poincare_series(&b, c(3.0, 0.0), 2.0, 10, None, TreeOptions::default()).unwrap();
        assert_eq!(single, multi);
    }
}
