use serde::{Deserialize, Serialize};

use super::OptError;

/// `normal · (x, y) ≤ rhs`, with a unit normal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfPlane {
    pub normal: [f64; 2],
    pub rhs: f64,
}

impl HalfPlane {
    pub fn contains(&self, x: f64, y: f64, tol: f64) -> bool {
        self.normal[0] * x + self.normal[1] * y <= self.rhs + tol
    }
}

/// Regular polygon circumscribing the disc of `radius`: `segments` tangent
/// half-planes with normals at angles `2πi/segments`. Its vertices lie at
/// `radius / cos(π/segments)`.
pub fn polygonize_quadratic(radius: f64, segments: usize) -> Result<Vec<HalfPlane>, OptError> {
    if segments < 3 {
        return Err(OptError::Config(format!(
            "polygon needs at least 3 segments, got {segments}"
        )));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(OptError::Config(format!("polygon radius must be positive, got {radius}")));
    }
    Ok(unit_normals(segments)
        .into_iter()
        .map(|normal| HalfPlane { normal, rhs: radius })
        .collect())
}

pub(crate) fn unit_normals(segments: usize) -> Vec<[f64; 2]> {
    (0..segments)
        .map(|i| {
            let a = 2.0 * std::f64::consts::PI * i as f64 / segments as f64;
            [a.cos(), a.sin()]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn square_for_four_segments() {
        let hp = polygonize_quadratic(1.0, 4).unwrap();
        assert_eq!(hp.len(), 4);
        assert!(hp.iter().all(|h| h.contains(1.0, 0.0, 1e-12)));
        assert!(hp.iter().all(|h| h.contains(1.0, 1.0, 1e-12)));
        assert!(!hp.iter().all(|h| h.contains(1.01, 0.0, 0.0)));
    }

    #[test]
    fn circle_points_are_inside() {
        let hp = polygonize_quadratic(1.0, 12).unwrap();
        for k in 0..360 {
            let a = (k as f64).to_radians();
            assert!(hp.iter().all(|h| h.contains(a.cos(), a.sin(), 1e-12)), "angle {k}");
        }
    }

    #[test]
    fn just_beyond_vertex_is_outside() {
        for k in [3, 5, 12] {
            let r = 2.0;
            let hp = polygonize_quadratic(r, k).unwrap();
            // vertices sit halfway between consecutive normals
            let a = PI / k as f64;
            let vr = r / (PI / k as f64).cos();
            let inside = |rho: f64| hp.iter().all(|h| h.contains(rho * a.cos(), rho * a.sin(), 0.0));
            assert!(inside(vr - 1e-9));
            assert!(!inside(vr + 1e-9));
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(polygonize_quadratic(1.0, 2).is_err());
        assert!(polygonize_quadratic(0.0, 8).is_err());
    }
}
