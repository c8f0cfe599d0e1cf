//! Planar geometry helpers. All coordinates are local east/north metres.

use nalgebra::Vector2;

pub type Point = Vector2<f64>;

pub fn pt(x: f64, y: f64) -> Point {
    Point::new(x, y)
}

/// Euclidean distance in 3-D between two ground points at the given heights.
pub fn distance_3d(a: &Point, a_height: f64, b: &Point, b_height: f64) -> f64 {
    let dz = a_height - b_height;
    ((a - b).norm_squared() + dz * dz).sqrt()
}

/// Rotate `p` about the origin by `angle_rad`.
pub fn rotate(p: &Point, angle_rad: f64) -> Point {
    let (s, c) = angle_rad.sin_cos();
    Point::new(c * p.x - s * p.y, s * p.x + c * p.y)
}

/// Wrap an angle in degrees into (-180, 180].
pub fn wrap_deg(a: f64) -> f64 {
    let mut w = a % 360.0;
    if w <= -180.0 {
        w += 360.0;
    } else if w > 180.0 {
        w -= 360.0;
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_keeps_range() {
        assert_eq!(wrap_deg(190.0), -170.0);
        assert_eq!(wrap_deg(-180.0), 180.0);
        assert_eq!(wrap_deg(45.0), 45.0);
        assert_eq!(wrap_deg(720.0 + 10.0), 10.0);
    }

    #[test]
    fn distance_includes_height() {
        let d = distance_3d(&pt(0.0, 0.0), 25.0, &pt(3.0, 4.0), 1.0);
        assert!((d - (25.0f64 + 576.0).sqrt()).abs() < 1e-12);
    }
}
