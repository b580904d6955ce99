//! Parametrised surface patches and their pointwise differential geometry.
//!
//! Mean curvature is the sum of the principal curvatures, taken with respect
//! to the oriented normal `nu`: the mean curvature vector is `H nu` with
//! `H = g^{ij} <x_ij, nu>`. A round sphere of radius `a` with its outward
//! normal therefore has `H = -2/a`.

mod chart;
mod curve;
mod height;
mod revolution;

use std::sync::Arc;

pub use chart::{Chart, FnChart, MappedChart, SpaceMap};
pub use curve::{BareCurve, BoundaryCurve, ConormalSide, CurveKind, CurvePoint, Edge};
pub use height::{
    polar_to_cartesian, Flat, GraphCoords, HeightFn, HeightJet, Quadratic, RadialHeight,
    RadialShape,
};
pub use revolution::{
    CircleProfile, Frame, LineProfile, Profile, ProfileJet, UnduloidProfile, MIN_NECK_FRACTION,
};

use crate::error::{Error, Result};
use crate::quadrature::{Interval, ParamDomain, QuadratureGrid, Resolution};

pub type Vec3 = nalgebra::Vector3<f64>;
pub type Mat3 = nalgebra::Matrix3<f64>;

/// Position and first derivatives of a parametrisation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet1 {
    pub x: Vec3,
    pub xu: Vec3,
    pub xv: Vec3,
}

/// Position with first and second derivatives.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet2 {
    pub x: Vec3,
    pub xu: Vec3,
    pub xv: Vec3,
    pub xuu: Vec3,
    pub xuv: Vec3,
    pub xvv: Vec3,
}

#[derive(Clone, Debug)]
pub enum PatchKind {
    Graph {
        height: Arc<dyn HeightFn>,
        coords: GraphCoords,
    },
    /// Parameters `(theta, s)`:
    /// `origin + r(s) (cos theta e1 + sin theta e2) + z(s) e3`.
    Revolution {
        profile: Arc<dyn Profile>,
        frame: Frame,
    },
    Explicit(Arc<dyn Chart>),
}

/// The natural normal `x_u x x_v` of each kind is: upward for graphs and
/// away from the axis for surfaces of revolution with `z' > 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Orientation {
    Natural,
    Reversed,
}

impl Orientation {
    pub fn sign(self) -> f64 {
        match self {
            Self::Natural => 1.0,
            Self::Reversed => -1.0,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Self::Natural => Self::Reversed,
            Self::Reversed => Self::Natural,
        }
    }
}

/// A smooth immersed patch with a chosen unit normal.
#[derive(Clone, Debug)]
pub struct SurfacePatch {
    pub name: String,
    pub kind: PatchKind,
    pub domain: ParamDomain,
    pub orientation: Orientation,
}

/// Pointwise geometric data.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointGeom {
    pub position: Vec3,
    pub normal: Vec3,
    pub mean_curvature: f64,
    pub a_norm2: f64,
    pub area_element: f64,
}

/// Everything second-order at a point, in parameter form.
#[derive(Clone, Copy, Debug)]
pub struct LocalFrame {
    pub x: Vec3,
    pub xu: Vec3,
    pub xv: Vec3,
    pub nu: Vec3,
    pub area_element: f64,
    /// Inverse first fundamental form.
    pub ginv: [[f64; 2]; 2],
    /// Shape operator `g^{-1} II` with respect to `nu`.
    pub shape: [[f64; 2]; 2],
    pub nu_u: Vec3,
    pub nu_v: Vec3,
}

impl LocalFrame {
    pub fn mean_curvature(&self) -> f64 {
        self.shape[0][0] + self.shape[1][1]
    }

    pub fn a_norm2(&self) -> f64 {
        let s = &self.shape;
        s[0][0] * s[0][0] + 2.0 * s[0][1] * s[1][0] + s[1][1] * s[1][1]
    }

    /// Tangential gradient from parameter derivatives of a scalar.
    pub fn gradient(&self, du: f64, dv: f64) -> Vec3 {
        let g = &self.ginv;
        (g[0][0] * du + g[0][1] * dv) * self.xu + (g[1][0] * du + g[1][1] * dv) * self.xv
    }

    pub fn tangent_projector(&self) -> Mat3 {
        Mat3::identity() - self.nu * self.nu.transpose()
    }
}

/// Oriented first-order data: `n` is the oriented, unnormalised normal, so
/// `n du dv = nu dA`.
#[derive(Clone, Copy, Debug)]
pub struct Node1 {
    pub x: Vec3,
    pub xu: Vec3,
    pub xv: Vec3,
    pub n: Vec3,
}

impl Node1 {
    pub fn area_element(&self) -> f64 {
        self.n.norm()
    }

    pub fn nu(&self) -> Vec3 {
        self.n / self.n.norm()
    }
}

const IMMERSION_TOL: f64 = 1e-12;

impl SurfacePatch {
    pub fn new(name: impl Into<String>, kind: PatchKind, domain: ParamDomain) -> Self {
        Self {
            name: name.into(),
            kind,
            domain,
            orientation: Orientation::Natural,
        }
    }

    pub fn graph(
        name: impl Into<String>,
        height: Arc<dyn HeightFn>,
        coords: GraphCoords,
        domain: ParamDomain,
    ) -> Self {
        Self::new(name, PatchKind::Graph { height, coords }, domain)
    }

    pub fn revolution(
        name: impl Into<String>,
        profile: Arc<dyn Profile>,
        frame: Frame,
        domain: ParamDomain,
    ) -> Self {
        Self::new(name, PatchKind::Revolution { profile, frame }, domain)
    }

    pub fn explicit(name: impl Into<String>, chart: Arc<dyn Chart>, domain: ParamDomain) -> Self {
        Self::new(name, PatchKind::Explicit(chart), domain)
    }

    pub fn reversed(mut self) -> Self {
        self.orientation = self.orientation.flip();
        self
    }

    pub fn with_orientation(mut self, o: Orientation) -> Self {
        self.orientation = o;
        self
    }

    /// Flips the orientation if needed so that the normal at the domain
    /// centre points away from `inside`.
    pub fn oriented_away_from(self, inside: &Vec3) -> Result<Self> {
        let d = &self.domain;
        let n = self.node1(0.5 * (d.u.lo + d.u.hi), 0.5 * (d.v.lo + d.v.hi))?;
        Ok(if n.n.dot(&(n.x - inside)) < 0.0 {
            self.reversed()
        } else {
            self
        })
    }

    pub fn jet1(&self, u: f64, v: f64) -> Result<Jet1> {
        match &self.kind {
            PatchKind::Graph { height, coords } => {
                let h = height.jet(u, v);
                Ok(graph_jet(&h, *coords, u, v).0)
            }
            PatchKind::Revolution { profile, frame } => {
                Ok(revolution_jet(&profile.jet(v)?, frame, u).0)
            }
            PatchKind::Explicit(c) => c.jet1(u, v),
        }
    }

    pub fn jet2(&self, u: f64, v: f64) -> Result<Jet2> {
        match &self.kind {
            PatchKind::Graph { height, coords } => {
                let h = height.jet(u, v);
                Ok(graph_jet(&h, *coords, u, v).1)
            }
            PatchKind::Revolution { profile, frame } => {
                Ok(revolution_jet(&profile.jet(v)?, frame, u).1)
            }
            PatchKind::Explicit(c) => c.jet2(u, v),
        }
    }

    fn check_domain(&self, u: f64, v: f64) -> Result<()> {
        if self.domain.contains(u, v) {
            Ok(())
        } else {
            Err(Error::OutsideDomain {
                patch: self.name.clone(),
                u,
                v,
            })
        }
    }

    fn immersion_error(&self, u: f64, v: f64, xu: &Vec3, xv: &Vec3, area: f64) -> Result<()> {
        let scale = xu.norm() * xv.norm();
        if !area.is_finite() || area <= IMMERSION_TOL * scale || scale == 0.0 {
            return Err(Error::Immersion {
                patch: self.name.clone(),
                u,
                v,
                area_element: area,
            });
        }
        Ok(())
    }

    /// Oriented first-order data at `(u, v)`.
    pub fn node1(&self, u: f64, v: f64) -> Result<Node1> {
        let j = self.jet1(u, v)?;
        let n = self.orientation.sign() * j.xu.cross(&j.xv);
        self.immersion_error(u, v, &j.xu, &j.xv, n.norm())?;
        Ok(Node1 {
            x: j.x,
            xu: j.xu,
            xv: j.xv,
            n,
        })
    }

    /// Full second-order frame at `(u, v)`.
    pub fn frame(&self, u: f64, v: f64) -> Result<LocalFrame> {
        let j = self.jet2(u, v)?;
        frame_from_jet(&j, self.orientation.sign()).map_err(|area| Error::Immersion {
            patch: self.name.clone(),
            u,
            v,
            area_element: area,
        })
    }

    pub fn grid(&self, res: &Resolution) -> QuadratureGrid {
        self.domain.grid(res)
    }

    /// Integral of `f` over the patch against area.
    pub fn integrate_frames(
        &self,
        res: &Resolution,
        f: impl Fn(&LocalFrame) -> Result<f64> + Sync,
    ) -> Result<f64> {
        self.grid(res).try_integrate(|u, v| {
            let fr = self.frame(u, v)?;
            Ok(fr.area_element * f(&fr)?)
        })
    }
}

fn frame_from_jet(j: &Jet2, sign: f64) -> std::result::Result<LocalFrame, f64> {
    let n = sign * j.xu.cross(&j.xv);
    let area = n.norm();
    let scale = j.xu.norm() * j.xv.norm();
    if !area.is_finite() || area <= IMMERSION_TOL * scale || scale == 0.0 {
        return Err(area);
    }
    let nu = n / area;
    let (e, f, g) = (j.xu.dot(&j.xu), j.xu.dot(&j.xv), j.xv.dot(&j.xv));
    let det = e * g - f * f;
    let ginv = [[g / det, -f / det], [-f / det, e / det]];
    let ii = [
        [j.xuu.dot(&nu), j.xuv.dot(&nu)],
        [j.xuv.dot(&nu), j.xvv.dot(&nu)],
    ];
    let mut shape = [[0.0; 2]; 2];
    for (i, row) in shape.iter_mut().enumerate() {
        for (k, s) in row.iter_mut().enumerate() {
            *s = ginv[i][0] * ii[0][k] + ginv[i][1] * ii[1][k];
        }
    }
    // Weingarten: nu_k = -shape^i_k x_i.
    let nu_u = -(shape[0][0] * j.xu + shape[1][0] * j.xv);
    let nu_v = -(shape[0][1] * j.xu + shape[1][1] * j.xv);
    Ok(LocalFrame {
        x: j.x,
        xu: j.xu,
        xv: j.xv,
        nu,
        area_element: area,
        ginv,
        shape,
        nu_u,
        nu_v,
    })
}

fn graph_jet(h: &HeightJet, coords: GraphCoords, a: f64, b: f64) -> (Jet1, Jet2) {
    match coords {
        GraphCoords::Cartesian => {
            let x = Vec3::new(a, b, h.f);
            let xu = Vec3::new(1.0, 0.0, h.fa);
            let xv = Vec3::new(0.0, 1.0, h.fb);
            (
                Jet1 { x, xu, xv },
                Jet2 {
                    x,
                    xu,
                    xv,
                    xuu: Vec3::new(0.0, 0.0, h.faa),
                    xuv: Vec3::new(0.0, 0.0, h.fab),
                    xvv: Vec3::new(0.0, 0.0, h.fbb),
                },
            )
        }
        GraphCoords::Polar => {
            let (s, c) = b.sin_cos();
            let x = Vec3::new(a * c, a * s, h.f);
            let xu = Vec3::new(c, s, h.fa);
            let xv = Vec3::new(-a * s, a * c, h.fb);
            (
                Jet1 { x, xu, xv },
                Jet2 {
                    x,
                    xu,
                    xv,
                    xuu: Vec3::new(0.0, 0.0, h.faa),
                    xuv: Vec3::new(-s, c, h.fab),
                    xvv: Vec3::new(-a * c, -a * s, h.fbb),
                },
            )
        }
    }
}

fn revolution_jet(p: &ProfileJet, fr: &Frame, theta: f64) -> (Jet1, Jet2) {
    let (s, c) = theta.sin_cos();
    let e = c * fr.e1 + s * fr.e2;
    let ep = -s * fr.e1 + c * fr.e2;
    let x = fr.origin + p.r * e + p.z * fr.e3;
    let xu = p.r * ep;
    let xv = p.dr * e + p.dz * fr.e3;
    (
        Jet1 { x, xu, xv },
        Jet2 {
            x,
            xu,
            xv,
            xuu: -p.r * e,
            xuv: p.dr * ep,
            xvv: p.ddr * e + p.ddz * fr.e3,
        },
    )
}

/// Position, oriented unit normal, mean curvature, `|A|^2` and area element
/// at a parameter point.
pub fn eval_geometry(patch: &SurfacePatch, u: f64, v: f64) -> Result<PointGeom> {
    patch.check_domain(u, v)?;
    let fr = patch.frame(u, v)?;
    Ok(PointGeom {
        position: fr.x,
        normal: fr.nu,
        mean_curvature: fr.mean_curvature(),
        a_norm2: fr.a_norm2(),
        area_element: fr.area_element,
    })
}

pub fn patch_area(patch: &SurfacePatch, grid: &QuadratureGrid) -> Result<f64> {
    grid.try_integrate(|u, v| Ok(patch.node1(u, v)?.area_element()))
}

/// `∫ F · nu dA` over a patch.
pub fn patch_flux(
    patch: &SurfacePatch,
    res: &Resolution,
    f: impl Fn(&Vec3) -> Vec3 + Sync,
) -> Result<f64> {
    patch.grid(res).try_integrate(|u, v| {
        let n = patch.node1(u, v)?;
        Ok(f(&n.x).dot(&n.n))
    })
}

/// `∫ nu dA` over a collection of patches; vanishes for a closed surface.
pub fn normal_flux(patches: &[&SurfacePatch], res: &Resolution) -> Result<Vec3> {
    let mut total = Vec3::zeros();
    for p in patches {
        let v = p.grid(res).try_integrate_n(|u, v| {
            let n = p.node1(u, v)?;
            Ok([n.n.x, n.n.y, n.n.z])
        })?;
        total += Vec3::from(v);
    }
    Ok(total)
}

/// Volume enclosed by closed, outward-oriented patches: `(1/3) ∮ x · nu`.
pub fn enclosed_volume(patches: &[&SurfacePatch], res: &Resolution) -> Result<f64> {
    let mut v = 0.0;
    for p in patches {
        v += patch_flux(p, res, |x| *x / 3.0)?;
    }
    Ok(v)
}

/// Round sphere of the given radius about `center`, outward oriented.
pub fn sphere(name: &str, center: Vec3, radius: f64) -> SurfacePatch {
    let frame = Frame {
        origin: center,
        ..Frame::standard()
    };
    SurfacePatch::revolution(
        name,
        Arc::new(CircleProfile { radius }),
        frame,
        ParamDomain::new(
            Interval::periodic(0.0, std::f64::consts::TAU),
            Interval::new(0.0, std::f64::consts::PI).with_panels(2),
        ),
    )
}

/// Delaunay unduloid with neck radius `neck` and mean curvature `h` over the
/// arclength window `[s_lo, s_hi]`, normal pointing away from the axis.
pub fn delaunay_unduloid(h: f64, neck: f64, s_lo: f64, s_hi: f64) -> Result<SurfacePatch> {
    if s_hi <= s_lo {
        return Err(Error::Invalid(format!(
            "empty arclength window [{s_lo}, {s_hi}]"
        )));
    }
    let profile = UnduloidProfile::new(h, neck, s_lo.abs().max(s_hi.abs()))?;
    let scale = neck.min(1.0 / h);
    let panels = ((s_hi - s_lo) / (0.5 * scale)).ceil().max(1.0) as usize;
    // The bulge sets the angular node spacing.
    let turns = (8.0 * profile.bulge() * h).ceil().max(4.0) as usize;
    Ok(SurfacePatch::revolution(
        "unduloid",
        Arc::new(profile),
        Frame::standard(),
        ParamDomain::new(
            Interval::periodic(0.0, std::f64::consts::TAU).with_panels(turns),
            Interval::new(s_lo, s_hi).with_panels(panels),
        ),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn outward_unit_sphere_has_negative_two_mean_curvature() {
        let s = sphere("s", Vec3::zeros(), 1.0);
        let g = eval_geometry(&s, 0.7, 1.1).unwrap();
        assert_relative_eq!(g.mean_curvature, -2.0, epsilon = 1e-13);
        assert_relative_eq!(g.a_norm2, 2.0, epsilon = 1e-13);
        assert_relative_eq!(g.normal.dot(&g.position), 1.0, epsilon = 1e-13);
        let inward = eval_geometry(&s.clone().reversed(), 0.7, 1.1).unwrap();
        assert_relative_eq!(inward.mean_curvature, 2.0, epsilon = 1e-13);
    }

    #[test]
    fn paraboloid_apex_curvature() {
        let p = SurfacePatch::graph(
            "p",
            Arc::new(Quadratic {
                a: 1.0,
                b: 0.0,
                c: 1.0,
            }),
            GraphCoords::Cartesian,
            ParamDomain::new(Interval::new(-1.0, 1.0), Interval::new(-1.0, 1.0)),
        );
        let g = eval_geometry(&p, 0.0, 0.0).unwrap();
        assert_relative_eq!(g.mean_curvature, 4.0, epsilon = 1e-14);
        assert_relative_eq!(g.a_norm2, 8.0, epsilon = 1e-14);
    }

    #[test]
    fn degenerate_chart_is_rejected() {
        let c = FnChart {
            f: |u: f64, _v: f64| Vec3::new(u, 0.0, 0.0),
            step: 1e-3,
        };
        let p = SurfacePatch::explicit(
            "line",
            Arc::new(c),
            ParamDomain::new(Interval::new(0.0, 1.0), Interval::new(0.0, 1.0)),
        );
        assert!(matches!(
            eval_geometry(&p, 0.5, 0.5),
            Err(Error::Immersion { .. })
        ));
        assert!(matches!(
            eval_geometry(&p, 2.0, 0.5),
            Err(Error::OutsideDomain { .. })
        ));
    }

    #[test]
    fn sphere_area_and_volume() {
        let s = sphere("s", Vec3::new(0.3, -1.0, 2.0), 1.5);
        let res = Resolution::default();
        let area = patch_area(&s, &s.grid(&res)).unwrap();
        assert_relative_eq!(
            area,
            4.0 * std::f64::consts::PI * 2.25,
            max_relative = 1e-12
        );
        let vol = enclosed_volume(&[&s], &res).unwrap();
        assert_relative_eq!(
            vol,
            4.0 / 3.0 * std::f64::consts::PI * 1.5f64.powi(3),
            max_relative = 1e-12
        );
    }
}
