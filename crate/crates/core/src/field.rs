//! Smooth ambient vector fields with Jacobians.

use std::fmt::Debug;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{polar_to_cartesian, GraphCoords, HeightFn, Mat3, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Support {
    Everywhere,
    Ball { center: [f64; 3], radius: f64 },
}

impl Support {
    pub fn ball(center: Vec3, radius: f64) -> Self {
        Self::Ball {
            center: center.into(),
            radius,
        }
    }

    pub fn contains(&self, x: &Vec3) -> bool {
        match self {
            Self::Everywhere => true,
            Self::Ball { center, radius } => (x - Vec3::from(*center)).norm() < *radius,
        }
    }
}

/// A smooth vector field `X` on space; `jacobian[(i, j)] = ∂X_i/∂x_j`.
pub trait AmbientField: Send + Sync + Debug {
    fn value(&self, x: &Vec3) -> Vec3;
    fn jacobian(&self, x: &Vec3) -> Mat3;
    fn support(&self) -> Support;
    fn label(&self) -> String;
}

/// Exponent of the polynomial bump `(1 - s^2)^p`.
pub const BUMP_POWER: i32 = 8;

/// `(1 - s^2)^p` with `s = |x - c| / r`, and its gradient.
pub fn bump(x: &Vec3, center: &Vec3, radius: f64) -> (f64, Vec3) {
    let d = (x - center) / radius;
    let q = 1.0 - d.norm_squared();
    if q <= 0.0 {
        return (0.0, Vec3::zeros());
    }
    let b = q.powi(BUMP_POWER);
    let db = -2.0 * BUMP_POWER as f64 * q.powi(BUMP_POWER - 1) / radius * d;
    (b, db)
}

/// `∫_{-1}^{1} (1 - s^2)^p ds` for the bump exponent.
pub fn bump_line_integral() -> f64 {
    // 2 (2p)!! / (2p + 1)!!
    let mut v = 2.0;
    for k in 1..=BUMP_POWER {
        v *= 2.0 * k as f64 / (2.0 * k as f64 + 1.0);
    }
    v
}

/// Quintic smoothstep `S(x) = 6x^5 - 15x^4 + 10x^3` on `[0, 1]`, clamped,
/// with first and second derivatives.
pub fn quintic_step(x: f64) -> (f64, f64, f64) {
    if x <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    if x >= 1.0 {
        return (1.0, 0.0, 0.0);
    }
    let x2 = x * x;
    (
        x2 * x * (10.0 + x * (-15.0 + 6.0 * x)),
        30.0 * x2 * (1.0 - x) * (1.0 - x),
        60.0 * x * (1.0 - x) * (1.0 - 2.0 * x),
    )
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZeroField;

impl AmbientField for ZeroField {
    fn value(&self, _: &Vec3) -> Vec3 {
        Vec3::zeros()
    }
    fn jacobian(&self, _: &Vec3) -> Mat3 {
        Mat3::zeros()
    }
    fn support(&self) -> Support {
        Support::ball(Vec3::zeros(), 0.0)
    }
    fn label(&self) -> String {
        "zero".into()
    }
}

/// `X = scale (x - center)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dilation {
    pub center: Vec3,
    pub scale: f64,
}

impl AmbientField for Dilation {
    fn value(&self, x: &Vec3) -> Vec3 {
        self.scale * (x - self.center)
    }
    fn jacobian(&self, _: &Vec3) -> Mat3 {
        self.scale * Mat3::identity()
    }
    fn support(&self) -> Support {
        Support::Everywhere
    }
    fn label(&self) -> String {
        "dilation".into()
    }
}

/// `X = omega x (x - center)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rotation {
    pub omega: Vec3,
    pub center: Vec3,
}

impl AmbientField for Rotation {
    fn value(&self, x: &Vec3) -> Vec3 {
        self.omega.cross(&(x - self.center))
    }
    fn jacobian(&self, _: &Vec3) -> Mat3 {
        self.omega.cross_matrix()
    }
    fn support(&self) -> Support {
        Support::Everywhere
    }
    fn label(&self) -> String {
        "rotation".into()
    }
}

/// `X = M (x - center)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearField {
    pub matrix: Mat3,
    pub center: Vec3,
}

impl AmbientField for LinearField {
    fn value(&self, x: &Vec3) -> Vec3 {
        self.matrix * (x - self.center)
    }
    fn jacobian(&self, _: &Vec3) -> Mat3 {
        self.matrix
    }
    fn support(&self) -> Support {
        Support::Everywhere
    }
    fn label(&self) -> String {
        "linear".into()
    }
}

/// `X = v`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstantField(pub Vec3);

impl AmbientField for ConstantField {
    fn value(&self, _: &Vec3) -> Vec3 {
        self.0
    }
    fn jacobian(&self, _: &Vec3) -> Mat3 {
        Mat3::zeros()
    }
    fn support(&self) -> Support {
        Support::Everywhere
    }
    fn label(&self) -> String {
        "constant".into()
    }
}

/// A field multiplied by a radial cutoff equal to one on `|x - c| <= r0`
/// and zero on `|x - c| >= r1`.
#[derive(Clone, Debug)]
pub struct CutOff {
    pub inner: Arc<dyn AmbientField>,
    pub center: Vec3,
    pub r0: f64,
    pub r1: f64,
}

impl CutOff {
    fn chi(&self, x: &Vec3) -> (f64, Vec3) {
        let d = x - self.center;
        let r = d.norm();
        let w = self.r1 - self.r0;
        let (s, ds, _) = quintic_step((r - self.r0) / w);
        if ds == 0.0 || r == 0.0 {
            return (1.0 - s, Vec3::zeros());
        }
        (1.0 - s, -ds / w * d / r)
    }
}

impl AmbientField for CutOff {
    fn value(&self, x: &Vec3) -> Vec3 {
        self.chi(x).0 * self.inner.value(x)
    }
    fn jacobian(&self, x: &Vec3) -> Mat3 {
        let (c, dc) = self.chi(x);
        c * self.inner.jacobian(x) + self.inner.value(x) * dc.transpose()
    }
    fn support(&self) -> Support {
        Support::ball(self.center, self.r1)
    }
    fn label(&self) -> String {
        format!("cutoff({})", self.inner.label())
    }
}

/// `X = b(x) d` for a fixed direction `d`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BumpField {
    pub center: Vec3,
    pub radius: f64,
    pub direction: Vec3,
}

impl AmbientField for BumpField {
    fn value(&self, x: &Vec3) -> Vec3 {
        bump(x, &self.center, self.radius).0 * self.direction
    }
    fn jacobian(&self, x: &Vec3) -> Mat3 {
        self.direction * bump(x, &self.center, self.radius).1.transpose()
    }
    fn support(&self) -> Support {
        Support::ball(self.center, self.radius)
    }
    fn label(&self) -> String {
        "bump".into()
    }
}

/// Monomials of degree at most two in `y = (x - c)/r`.
fn quadratic_basis(y: &Vec3, r: f64) -> ([f64; 10], [Vec3; 10]) {
    let (a, b, c) = (y.x, y.y, y.z);
    let e = |v: [f64; 3]| Vec3::from(v) / r;
    (
        [1.0, a, b, c, a * a, a * b, a * c, b * b, b * c, c * c],
        [
            Vec3::zeros(),
            e([1.0, 0.0, 0.0]),
            e([0.0, 1.0, 0.0]),
            e([0.0, 0.0, 1.0]),
            e([2.0 * a, 0.0, 0.0]),
            e([b, a, 0.0]),
            e([c, 0.0, a]),
            e([0.0, 2.0 * b, 0.0]),
            e([0.0, c, b]),
            e([0.0, 0.0, 2.0 * c]),
        ],
    )
}

/// Quadratic polynomial field times the bump.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolyBumpField {
    pub center: [f64; 3],
    pub radius: f64,
    /// Coefficients of the ten quadratic monomials per Cartesian component.
    pub coeffs: [[f64; 10]; 3],
}

impl AmbientField for PolyBumpField {
    fn value(&self, x: &Vec3) -> Vec3 {
        let c = Vec3::from(self.center);
        let (b, _) = bump(x, &c, self.radius);
        if b == 0.0 {
            return Vec3::zeros();
        }
        let (m, _) = quadratic_basis(&((x - c) / self.radius), self.radius);
        Vec3::from_fn(|i, _| {
            b * self.coeffs[i]
                .iter()
                .zip(&m)
                .map(|(a, m)| a * m)
                .sum::<f64>()
        })
    }

    fn jacobian(&self, x: &Vec3) -> Mat3 {
        let c = Vec3::from(self.center);
        let (b, db) = bump(x, &c, self.radius);
        if b == 0.0 {
            return Mat3::zeros();
        }
        let (m, dm) = quadratic_basis(&((x - c) / self.radius), self.radius);
        let mut jac = Mat3::zeros();
        for i in 0..3 {
            let p: f64 = self.coeffs[i].iter().zip(&m).map(|(a, m)| a * m).sum();
            let dp: Vec3 = self.coeffs[i].iter().zip(&dm).map(|(a, d)| *a * d).sum();
            let row = b * dp + p * db;
            for j in 0..3 {
                jac[(i, j)] = row[j];
            }
        }
        jac
    }

    fn support(&self) -> Support {
        Support::Ball {
            center: self.center,
            radius: self.radius,
        }
    }

    fn label(&self) -> String {
        "poly-bump".into()
    }
}

/// Draws a quadratic bump field with coefficients uniform in `[-1, 1]`.
pub fn random_poly_bump(rng: &mut impl Rng, center: Vec3, radius: f64) -> PolyBumpField {
    let mut coeffs = [[0.0; 10]; 3];
    for row in coeffs.iter_mut() {
        for c in row.iter_mut() {
            *c = rng.random_range(-1.0..1.0);
        }
    }
    PolyBumpField {
        center: center.into(),
        radius,
        coeffs,
    }
}

/// Unit normal field extending the normal of a reference surface.
#[derive(Clone, Debug)]
pub enum NormalExtension {
    /// `sign (x - center)/|x - center|`: normals of spheres about `center`.
    Radial { center: Vec3, sign: f64 },
    /// `sign (-∇f, 1)/sqrt(1 + |∇f|^2)` of a height field, evaluated at
    /// the horizontal projection of `x`.
    Graph {
        height: Arc<dyn HeightFn>,
        coords: GraphCoords,
        sign: f64,
    },
}

impl NormalExtension {
    pub fn eval(&self, x: &Vec3) -> (Vec3, Mat3) {
        match self {
            Self::Radial { center, sign } => {
                let d = x - center;
                let r = d.norm();
                let n = d / r;
                (
                    *sign * n,
                    *sign * (Mat3::identity() - n * n.transpose()) / r,
                )
            }
            Self::Graph {
                height,
                coords,
                sign,
            } => {
                let j = match coords {
                    GraphCoords::Cartesian => height.jet(x.x, x.y),
                    GraphCoords::Polar => {
                        let rho = x.x.hypot(x.y);
                        let th = x.y.atan2(x.x);
                        polar_to_cartesian(&height.jet(rho, th), rho, th)
                    }
                };
                let m = Vec3::new(-j.fa, -j.fb, 1.0);
                let w = m.norm();
                let n = m / w;
                // dm/dx and dm/dy; m does not depend on z.
                let mut dm = Mat3::zeros();
                dm[(0, 0)] = -j.faa;
                dm[(0, 1)] = -j.fab;
                dm[(1, 0)] = -j.fab;
                dm[(1, 1)] = -j.fbb;
                let dn = (Mat3::identity() - n * n.transpose()) * dm / w;
                (*sign * n, *sign * dn)
            }
        }
    }
}

/// `X = amplitude b(x) N(x)`: a bump along an extended unit normal.
#[derive(Clone, Debug)]
pub struct NormalBumpField {
    pub center: Vec3,
    pub radius: f64,
    pub amplitude: f64,
    pub normal: NormalExtension,
}

impl AmbientField for NormalBumpField {
    fn value(&self, x: &Vec3) -> Vec3 {
        let (b, _) = bump(x, &self.center, self.radius);
        if b == 0.0 {
            return Vec3::zeros();
        }
        self.amplitude * b * self.normal.eval(x).0
    }
    fn jacobian(&self, x: &Vec3) -> Mat3 {
        let (b, db) = bump(x, &self.center, self.radius);
        if b == 0.0 {
            return Mat3::zeros();
        }
        let (n, dn) = self.normal.eval(x);
        self.amplitude * (b * dn + n * db.transpose())
    }
    fn support(&self) -> Support {
        Support::ball(self.center, self.radius)
    }
    fn label(&self) -> String {
        "normal-bump".into()
    }
}

/// `factor X`.
#[derive(Clone, Debug)]
pub struct Scaled {
    pub inner: Arc<dyn AmbientField>,
    pub factor: f64,
}

impl AmbientField for Scaled {
    fn value(&self, x: &Vec3) -> Vec3 {
        self.factor * self.inner.value(x)
    }
    fn jacobian(&self, x: &Vec3) -> Mat3 {
        self.factor * self.inner.jacobian(x)
    }
    fn support(&self) -> Support {
        self.inner.support()
    }
    fn label(&self) -> String {
        self.inner.label()
    }
}

/// `(DX) X`: the acceleration of the flow lines of `X` at `t = 0`.
#[derive(Clone, Debug)]
pub struct FlowAcceleration {
    pub inner: Arc<dyn AmbientField>,
}

impl AmbientField for FlowAcceleration {
    fn value(&self, x: &Vec3) -> Vec3 {
        self.inner.jacobian(x) * self.inner.value(x)
    }
    fn jacobian(&self, x: &Vec3) -> Mat3 {
        fd_jacobian(self, x, 1e-5)
    }
    fn support(&self) -> Support {
        self.inner.support()
    }
    fn label(&self) -> String {
        format!("flow-acceleration({})", self.inner.label())
    }
}

/// Central-difference Jacobian, for checking analytic ones.
pub fn fd_jacobian(f: &dyn AmbientField, x: &Vec3, h: f64) -> Mat3 {
    let mut m = Mat3::zeros();
    for j in 0..3 {
        let mut e = Vec3::zeros();
        e[j] = h;
        let d = (f.value(&(x + e)) - f.value(&(x - e))) / (2.0 * h);
        for i in 0..3 {
            m[(i, j)] = d[i];
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{RadialHeight, RadialShape};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn check(f: &dyn AmbientField, x: Vec3) {
        let a = f.jacobian(&x);
        let b = fd_jacobian(f, &x, 1e-6);
        assert!(
            (a - b).norm() < 1e-7 * (1.0 + a.norm()),
            "{}: {a} vs {b}",
            f.label()
        );
    }

    #[test]
    fn analytic_jacobians_match_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p = random_poly_bump(&mut rng, Vec3::new(0.1, 0.2, -0.1), 0.8);
        check(&p, Vec3::new(0.3, 0.1, 0.2));
        check(
            &CutOff {
                inner: Arc::new(Rotation {
                    omega: Vec3::new(0.0, 1.0, 2.0),
                    center: Vec3::zeros(),
                }),
                center: Vec3::zeros(),
                r0: 0.5,
                r1: 1.0,
            },
            Vec3::new(0.4, 0.3, 0.3),
        );
        let nb = NormalBumpField {
            center: Vec3::new(0.5, 0.0, 0.0),
            radius: 0.4,
            amplitude: 1.3,
            normal: NormalExtension::Graph {
                height: Arc::new(RadialHeight {
                    shape: RadialShape::SphereCap { radius: 3.0 },
                    sign: -1.0,
                }),
                coords: GraphCoords::Polar,
                sign: 1.0,
            },
        };
        check(&nb, Vec3::new(0.6, 0.1, -0.05));
        let rb = NormalBumpField {
            normal: NormalExtension::Radial {
                center: Vec3::new(0.0, 0.0, -3.0),
                sign: 1.0,
            },
            ..nb
        };
        check(&rb, Vec3::new(0.6, 0.1, -0.05));
    }

    #[test]
    fn bump_line_integral_matches_quadrature() {
        let rule = crate::quadrature::Interval::new(-1.0, 1.0)
            .with_panels(8)
            .rule(&crate::quadrature::Resolution::new(2));
        let q = rule.integrate(|s| bump(&Vec3::new(s, 0.0, 0.0), &Vec3::zeros(), 1.0).0);
        assert!((q - bump_line_integral()).abs() < 1e-14);
    }

    #[test]
    fn quintic_step_derivatives() {
        for x in [0.1, 0.37, 0.5, 0.9] {
            let (_, d, dd) = quintic_step(x);
            let h = 1e-5;
            let fd = (quintic_step(x + h).0 - quintic_step(x - h).0) / (2.0 * h);
            let fdd = (quintic_step(x + h).1 - quintic_step(x - h).1) / (2.0 * h);
            assert!((d - fd).abs() < 1e-8 && (dd - fdd).abs() < 1e-7);
        }
        assert_eq!(quintic_step(0.5).1, 1.875);
    }
}
