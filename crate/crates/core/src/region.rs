//! Target sets for area integrals and series restrictions.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::in_filled_julia;
use crate::error::{Error, Result};
use crate::numerics::Polynomial;

/// Points within this distance of a half-line count as lying on it.
const RAY_THICKNESS: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum RegionSpec {
    Disc {
        center: Complex64,
        radius: f64,
    },
    HalfLine {
        anchor: Complex64,
        direction: Complex64,
    },
    Polygon {
        vertices: Vec<Complex64>,
    },
    FilledJulia {
        p: Polynomial,
        max_iter: usize,
        escape_radius: f64,
    },
}

impl RegionSpec {
    pub fn disc(center: Complex64, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !center.is_finite() {
            return Err(Error::InvalidInput("disc radius must be positive".into()));
        }
        Ok(RegionSpec::Disc { center, radius })
    }

    pub fn half_line(anchor: Complex64, direction: Complex64) -> Result<Self> {
        if direction.norm() == 0.0 {
            return Err(Error::InvalidInput("half-line direction must be nonzero".into()));
        }
        Ok(RegionSpec::HalfLine {
            anchor,
            direction: direction / direction.norm(),
        })
    }

    /// A polygon given by its vertices in order; the closing edge is implicit.
    pub fn polygon(vertices: Vec<Complex64>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::InvalidInput("polygon needs at least 3 vertices".into()));
        }
        if !is_simple(&vertices) {
            return Err(Error::InvalidInput("polygon edges intersect".into()));
        }
        Ok(RegionSpec::Polygon { vertices })
    }

    pub fn filled_julia(p: Polynomial, max_iter: usize, escape_radius: f64) -> Result<Self> {
        if p.degree() < 2 || max_iter == 0 || !(escape_radius > 0.0) {
            return Err(Error::InvalidInput(
                "filled Julia set needs degree >= 2, max_iter >= 1 and a positive escape radius".into(),
            ));
        }
        Ok(RegionSpec::FilledJulia {
            p,
            max_iter,
            escape_radius,
        })
    }

    pub fn contains(&self, w: Complex64) -> bool {
        if !w.is_finite() {
            return false;
        }
        match self {
            RegionSpec::Disc { center, radius } => (w - center).norm() < *radius,
            RegionSpec::HalfLine { anchor, direction } => {
                distance_to_half_line(w, *anchor, *direction) <= RAY_THICKNESS
            }
            RegionSpec::Polygon { vertices } => winding_number(vertices, w) != 0,
            RegionSpec::FilledJulia {
                p,
                max_iter,
                escape_radius,
            } => in_filled_julia(p, w, *max_iter, *escape_radius),
        }
    }
}

pub fn distance_to_half_line(w: Complex64, anchor: Complex64, direction: Complex64) -> f64 {
    let d = direction / direction.norm();
    let rel = w - anchor;
    // projection onto the ray parameter
    let s = (rel * d.conj()).re.max(0.0);
    (rel - d * s).norm()
}

/// Winding number of the closed polyline through `vertices` around `w`.
pub fn winding_number(vertices: &[Complex64], w: Complex64) -> i32 {
    let n = vertices.len();
    let mut wn = 0;
    for i in 0..n {
        let a = vertices[i];
        let b = vertices[(i + 1) % n];
        let cross = (b.re - a.re) * (w.im - a.im) - (w.re - a.re) * (b.im - a.im);
        if a.im <= w.im {
            if b.im > w.im && cross > 0.0 {
                wn += 1;
            }
        } else if b.im <= w.im && cross < 0.0 {
            wn -= 1;
        }
    }
    wn
}

/// Euclidean distance from `w` to the closed polyline through `vertices`.
pub fn distance_to_polyline(vertices: &[Complex64], w: Complex64) -> f64 {
    let n = vertices.len();
    (0..n)
        .map(|i| {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            let ab = b - a;
            let len2 = ab.norm_sqr();
            let s = if len2 > 0.0 {
                ((w - a) * ab.conj()).re / len2
            } else {
                0.0
            };
            (w - (a + ab * s.clamp(0.0, 1.0))).norm()
        })
        .fold(f64::INFINITY, f64::min)
}

fn segments_cross(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> bool {
    let orient =
        |p: Complex64, q: Complex64, r: Complex64| (q.re - p.re) * (r.im - p.im) - (q.im - p.im) * (r.re - p.re);
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

fn is_simple(vertices: &[Complex64]) -> bool {
    let n = vertices.len();
    for i in 0..n {
        for j in i + 1..n {
            // adjacent edges share a vertex
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            let (a, b) = (vertices[i], vertices[(i + 1) % n]);
            let (c, d) = (vertices[j], vertices[(j + 1) % n]);
            if segments_cross(a, b, c, d) {
                return false;
            }
        }
    }
    true
}
