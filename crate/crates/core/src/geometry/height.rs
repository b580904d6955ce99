use std::fmt::Debug;

use serde::{Deserialize, Serialize};

/// Value and derivatives up to second order of a height function in its
/// native coordinates `(a, b)`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct HeightJet {
    pub f: f64,
    pub fa: f64,
    pub fb: f64,
    pub faa: f64,
    pub fab: f64,
    pub fbb: f64,
}

/// Coordinates in which a height field is parametrised.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GraphCoords {
    /// `(x, y) -> (x, y, f(x, y))`.
    Cartesian,
    /// `(rho, theta) -> (rho cos theta, rho sin theta, f(rho, theta))`.
    Polar,
}

pub trait HeightFn: Send + Sync + Debug {
    fn jet(&self, a: f64, b: f64) -> HeightJet;

    fn value(&self, a: f64, b: f64) -> f64 {
        self.jet(a, b).f
    }
}

/// Converts a polar jet at `(rho, theta)` into Cartesian derivatives.
pub fn polar_to_cartesian(j: &HeightJet, rho: f64, theta: f64) -> HeightJet {
    let (s, c) = theta.sin_cos();
    let r = rho;
    let (fr, ft, frr, frt, ftt) = (j.fa, j.fb, j.faa, j.fab, j.fbb);
    HeightJet {
        f: j.f,
        fa: fr * c - ft * s / r,
        fb: fr * s + ft * c / r,
        faa: frr * c * c - 2.0 * frt * s * c / r
            + ftt * s * s / (r * r)
            + fr * s * s / r
            + 2.0 * ft * s * c / (r * r),
        fab: frr * s * c + frt * (c * c - s * s) / r
            - ftt * s * c / (r * r)
            - fr * s * c / r
            - ft * (c * c - s * s) / (r * r),
        fbb: frr * s * s + 2.0 * frt * s * c / r + ftt * c * c / (r * r) + fr * c * c / r
            - 2.0 * ft * s * c / (r * r),
    }
}

/// Constant height.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Flat {
    pub c: f64,
}

impl HeightFn for Flat {
    fn jet(&self, _: f64, _: f64) -> HeightJet {
        HeightJet {
            f: self.c,
            ..HeightJet::default()
        }
    }
}

/// `f = a x^2 + b x y + c y^2` in Cartesian coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quadratic {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl HeightFn for Quadratic {
    fn jet(&self, x: f64, y: f64) -> HeightJet {
        HeightJet {
            f: self.a * x * x + self.b * x * y + self.c * y * y,
            fa: 2.0 * self.a * x + self.b * y,
            fb: self.b * x + 2.0 * self.c * y,
            faa: 2.0 * self.a,
            fab: self.b,
            fbb: 2.0 * self.c,
        }
    }
}

/// Rotationally symmetric profile `f(rho)` used in polar coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum RadialShape {
    /// `alpha * rho^2`.
    Paraboloid { alpha: f64 },
    /// `R - sqrt(R^2 - rho^2)`: the lower cap of a sphere of radius `R`
    /// tangent to the horizontal plane at the origin.
    SphereCap { radius: f64 },
}

impl RadialShape {
    /// `(f, f', f'')` in `rho`.
    pub fn eval(&self, rho: f64) -> (f64, f64, f64) {
        match *self {
            Self::Paraboloid { alpha } => (alpha * rho * rho, 2.0 * alpha * rho, 2.0 * alpha),
            Self::SphereCap { radius } => {
                let q = (radius * radius - rho * rho).sqrt();
                let f = rho * rho / (radius + q);
                (f, rho / q, radius * radius / (q * q * q))
            }
        }
    }

    /// Largest radius on which the shape is a smooth graph.
    pub fn max_radius(&self) -> f64 {
        match *self {
            Self::Paraboloid { .. } => f64::INFINITY,
            Self::SphereCap { radius } => radius,
        }
    }

    /// Coefficient of `rho^2` at the origin.
    pub fn alpha(&self) -> f64 {
        match *self {
            Self::Paraboloid { alpha } => alpha,
            Self::SphereCap { radius } => 0.5 / radius,
        }
    }
}

/// `f(rho, theta) = sign * shape(rho)` in polar coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadialHeight {
    pub shape: RadialShape,
    pub sign: f64,
}

impl HeightFn for RadialHeight {
    fn jet(&self, rho: f64, _theta: f64) -> HeightJet {
        let (f, d, dd) = self.shape.eval(rho);
        HeightJet {
            f: self.sign * f,
            fa: self.sign * d,
            fb: 0.0,
            faa: self.sign * dd,
            fab: 0.0,
            fbb: 0.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug)]
    struct Wobbly;
    impl HeightFn for Wobbly {
        fn jet(&self, r: f64, t: f64) -> HeightJet {
            // f = r^3 sin(2t)
            HeightJet {
                f: r.powi(3) * (2.0 * t).sin(),
                fa: 3.0 * r * r * (2.0 * t).sin(),
                fb: 2.0 * r.powi(3) * (2.0 * t).cos(),
                faa: 6.0 * r * (2.0 * t).sin(),
                fab: 6.0 * r * r * (2.0 * t).cos(),
                fbb: -4.0 * r.powi(3) * (2.0 * t).sin(),
            }
        }
    }

    #[test]
    fn polar_conversion_matches_cartesian_differences() {
        let f = |x: f64, y: f64| {
            let r = x.hypot(y);
            Wobbly.value(r, y.atan2(x))
        };
        let (x, y): (f64, f64) = (0.4, -0.7);
        let j = polar_to_cartesian(&Wobbly.jet(x.hypot(y), y.atan2(x)), x.hypot(y), y.atan2(x));
        let h = 1e-4;
        let fx = (f(x + h, y) - f(x - h, y)) / (2.0 * h);
        let fy = (f(x, y + h) - f(x, y - h)) / (2.0 * h);
        let fxx = (f(x + h, y) - 2.0 * f(x, y) + f(x - h, y)) / (h * h);
        let fyy = (f(x, y + h) - 2.0 * f(x, y) + f(x, y - h)) / (h * h);
        let fxy =
            (f(x + h, y + h) - f(x + h, y - h) - f(x - h, y + h) + f(x - h, y - h)) / (4.0 * h * h);
        for (a, b) in [
            (j.fa, fx),
            (j.fb, fy),
            (j.faa, fxx),
            (j.fab, fxy),
            (j.fbb, fyy),
        ] {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn sphere_cap_is_stable_near_the_apex() {
        let s = RadialShape::SphereCap { radius: 10.0 };
        let (f, d, dd) = s.eval(1e-9);
        assert!((f - 5e-20).abs() < 1e-30);
        assert!((d - 1e-10).abs() < 1e-20);
        assert!((dd - 0.1).abs() < 1e-15);
    }
}
