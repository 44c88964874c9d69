use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::ScenarioError;

/// One half-plane `α·P + β·Q + δ·S^max ≤ 0` of the inscribed polygon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolygonFacet {
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
    /// `−δ·S^max`, the right-hand side of `α·P + β·Q ≤ rhs`.
    pub rhs: f64,
}

impl PolygonFacet {
    pub fn holds(&self, p: f64, q: f64, tol: f64) -> bool {
        self.alpha * p + self.beta * q <= self.rhs + tol
    }
}

/// Facets of the regular polygon inscribed in the circle of radius `s_max`,
/// with facet normals at angles `(2m+1)π/sides`.
pub fn polygon_coefficients(sides: usize, s_max: f64) -> Result<Vec<PolygonFacet>, ScenarioError> {
    if sides < 4 {
        return Err(ScenarioError::PolygonSides(sides));
    }
    let delta = -(PI / sides as f64).cos();
    Ok((0..sides)
        .map(|m| {
            let theta = (2 * m + 1) as f64 * PI / sides as f64;
            PolygonFacet {
                alpha: theta.cos(),
                beta: theta.sin(),
                delta,
                rhs: -delta * s_max,
            }
        })
        .collect())
}

/// Polygon vertices, at angles `2kπ/sides`.
pub fn polygon_vertices(sides: usize, s_max: f64) -> Vec<(f64, f64)> {
    (0..sides)
        .map(|k| {
            let a = 2.0 * PI * k as f64 / sides as f64;
            (s_max * a.cos(), s_max * a.sin())
        })
        .collect()
}
