use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{SurfacePatch, Vec3};
use crate::error::{Error, Result};
use crate::quadrature::{Interval, Resolution};

/// Which way a stored conormal points relative to its sheet.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConormalSide {
    IntoSheet,
    AwayFromSheet,
}

/// Parameter edge of a patch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Edge {
    ULo,
    UHi,
    VLo,
    VHi,
}

#[derive(Clone, Debug)]
pub enum CurveKind {
    /// Circle `center + radius (cos t e1 + sin t e2)`; the conormal is
    /// `radial_sign` times the outward radial unit vector.
    Circle {
        center: Vec3,
        radius: f64,
        e1: Vec3,
        e2: Vec3,
        radial_sign: f64,
    },
    /// `a + t (b - a)` for `t` in `[0, 1]` with a fixed conormal.
    Segment { a: Vec3, b: Vec3, conormal: Vec3 },
    /// Edge of a patch; the conormal points into the patch.
    PatchEdge {
        patch: Box<SurfacePatch>,
        edge: Edge,
    },
    /// Bare point curve without conormal information.
    Bare(BareCurve),
}

#[derive(Clone)]
pub struct BareCurve(pub Arc<dyn Fn(f64) -> Vec3 + Send + Sync>);

impl std::fmt::Debug for BareCurve {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("BareCurve")
    }
}

/// Point on a boundary curve with its length element and unit conormal.
#[derive(Clone, Copy, Debug)]
pub struct CurvePoint {
    pub x: Vec3,
    pub speed: f64,
    pub conormal: Option<Vec3>,
}

/// Boundary curve of a sheet with multiplicity; the sheets sharing the
/// curve are counted by `multiplicity`.
#[derive(Clone, Debug)]
pub struct BoundaryCurve {
    pub name: String,
    pub kind: CurveKind,
    pub param: Interval,
    pub multiplicity: f64,
    pub side: ConormalSide,
}

impl BoundaryCurve {
    pub fn circle(
        name: &str,
        center: Vec3,
        radius: f64,
        radial_sign: f64,
        side: ConormalSide,
    ) -> Self {
        Self {
            name: name.into(),
            kind: CurveKind::Circle {
                center,
                radius,
                e1: Vec3::x(),
                e2: Vec3::y(),
                radial_sign,
            },
            param: Interval::periodic(0.0, std::f64::consts::TAU),
            multiplicity: 1.0,
            side,
        }
    }

    pub fn segment(name: &str, a: Vec3, b: Vec3, conormal: Vec3, side: ConormalSide) -> Self {
        Self {
            name: name.into(),
            kind: CurveKind::Segment {
                a,
                b,
                conormal: conormal.normalize(),
            },
            param: Interval::new(0.0, 1.0).with_panels(2),
            multiplicity: 1.0,
            side,
        }
    }

    pub fn patch_edge(name: &str, patch: SurfacePatch, edge: Edge) -> Self {
        let d = &patch.domain;
        let param = match edge {
            Edge::ULo | Edge::UHi => d.v.clone(),
            Edge::VLo | Edge::VHi => d.u.clone(),
        };
        Self {
            name: name.into(),
            kind: CurveKind::PatchEdge {
                patch: Box::new(patch),
                edge,
            },
            param,
            multiplicity: 1.0,
            side: ConormalSide::IntoSheet,
        }
    }

    pub fn with_multiplicity(mut self, m: f64) -> Self {
        self.multiplicity = m;
        self
    }

    pub fn eval(&self, t: f64) -> Result<CurvePoint> {
        match &self.kind {
            CurveKind::Circle {
                center,
                radius,
                e1,
                e2,
                radial_sign,
            } => {
                let (s, c) = t.sin_cos();
                let radial = c * e1 + s * e2;
                Ok(CurvePoint {
                    x: center + *radius * radial,
                    speed: radius.abs(),
                    conormal: Some(*radial_sign * radial),
                })
            }
            CurveKind::Segment { a, b, conormal } => Ok(CurvePoint {
                x: a + t * (b - a),
                speed: (b - a).norm(),
                conormal: Some(*conormal),
            }),
            CurveKind::PatchEdge { patch, edge } => {
                let dom = &patch.domain;
                let (u, v) = match edge {
                    Edge::ULo => (dom.u.lo, t),
                    Edge::UHi => (dom.u.hi, t),
                    Edge::VLo => (t, dom.v.lo),
                    Edge::VHi => (t, dom.v.hi),
                };
                let j = patch.jet1(u, v)?;
                let (tangent, inward) = match edge {
                    Edge::ULo => (j.xv, j.xu),
                    Edge::UHi => (j.xv, -j.xu),
                    Edge::VLo => (j.xu, j.xv),
                    Edge::VHi => (j.xu, -j.xv),
                };
                let speed = tangent.norm();
                let tau = tangent / speed;
                let n = inward - inward.dot(&tau) * tau;
                Ok(CurvePoint {
                    x: j.x,
                    speed,
                    conormal: Some(n.normalize()),
                })
            }
            CurveKind::Bare(BareCurve(f)) => {
                let h = 1e-5;
                let speed = ((f(t + h) - f(t - h)) / (2.0 * h)).norm();
                Ok(CurvePoint {
                    x: f(t),
                    speed,
                    conormal: None,
                })
            }
        }
    }

    /// Conormal at `t` oriented into the sheet.
    pub fn inward_conormal(&self, p: &CurvePoint) -> Result<Vec3> {
        let n = p
            .conormal
            .ok_or_else(|| Error::MissingConormal(self.name.clone()))?;
        Ok(match self.side {
            ConormalSide::IntoSheet => n,
            ConormalSide::AwayFromSheet => -n,
        })
    }

    /// Integral of `f` against arclength.
    pub fn integrate(
        &self,
        res: &Resolution,
        f: impl Fn(&CurvePoint) -> Result<f64>,
    ) -> Result<f64> {
        let rule = self.param.rule(res);
        let vals = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(t, w)| {
                let p = self.eval(*t)?;
                Ok(w * p.speed * f(&p)?)
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(crate::quadrature::pairwise_sum(&vals))
    }

    pub fn length(&self, res: &Resolution) -> Result<f64> {
        self.integrate(res, |_| Ok(1.0))
    }
}
