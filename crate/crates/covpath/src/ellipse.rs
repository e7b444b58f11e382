//! Boundary points of the level sets `x'Px = r²`.

use covpath_core::SpdMatrix;

/// `points` boundary points of `{x : x'Px = r²}`, walking a circle scaled by
/// `r/√λ` along each eigenvector.
pub fn ellipse_points(p: &SpdMatrix, r: f64, points: usize) -> Vec<[f64; 2]> {
    assert_eq!(p.dim(), 2, "ellipses need a 2x2 covariance");
    let (values, vectors) = p.eigen();
    let a = r / values[0].sqrt();
    let b = r / values[1].sqrt();
    (0..points)
        .map(|k| {
            let theta = 2.0 * std::f64::consts::PI * k as f64 / points as f64;
            let (c, s) = (a * theta.cos(), b * theta.sin());
            [c * vectors[(0, 0)] + s * vectors[(0, 1)], c * vectors[(1, 0)] + s * vectors[(1, 1)]]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad(p: &SpdMatrix, x: [f64; 2]) -> f64 {
        let m = p.as_mat();
        m[(0, 0)] * x[0] * x[0] + 2.0 * m[(0, 1)] * x[0] * x[1] + m[(1, 1)] * x[1] * x[1]
    }

    #[test]
    fn identity_gives_unit_circle() {
        let pts = ellipse_points(&SpdMatrix::identity(2), 1.0, 64);
        assert_eq!(pts.len(), 64);
        for x in pts {
            assert!((x[0].hypot(x[1]) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn diagonal_semi_axes() {
        let p = SpdMatrix::from_diagonal(&[4.0, 1.0]).unwrap();
        let pts = ellipse_points(&p, 1.0, 64);
        let max_x = pts.iter().map(|x| x[0].abs()).fold(0.0, f64::max);
        let max_y = pts.iter().map(|x| x[1].abs()).fold(0.0, f64::max);
        assert!((max_x - 0.5).abs() < 1e-14);
        assert!((max_y - 1.0).abs() < 1e-14);
    }

    #[test]
    fn points_lie_on_the_level_set() {
        let p = SpdMatrix::from_row_slice(2, &[2.0, 0.7, 0.7, 0.9]).unwrap();
        for x in ellipse_points(&p, 0.5, 37) {
            assert!((quad(&p, x) - 0.25).abs() < 1e-13);
        }
    }
}
