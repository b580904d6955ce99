use std::fmt::Debug;
use std::sync::Arc;

use super::{Jet1, Jet2, Mat3, SurfacePatch, Vec3};
use crate::error::Result;

/// A parametrisation given only through point evaluation; derivatives
/// default to fourth-order central differences.
pub trait Chart: Send + Sync + Debug {
    fn point(&self, u: f64, v: f64) -> Result<Vec3>;

    /// Finite-difference step in parameter units.
    fn fd_step(&self) -> f64 {
        1e-3
    }

    fn jet1(&self, u: f64, v: f64) -> Result<Jet1> {
        let h = self.fd_step();
        Ok(Jet1 {
            x: self.point(u, v)?,
            xu: d1(|s| self.point(u + s, v), h)?,
            xv: d1(|s| self.point(u, v + s), h)?,
        })
    }

    fn jet2(&self, u: f64, v: f64) -> Result<Jet2> {
        let h = self.fd_step();
        let x = self.point(u, v)?;
        let xu = d1(|s| self.point(u + s, v), h)?;
        let xv = d1(|s| self.point(u, v + s), h)?;
        let xuu = d2(|s| self.point(u + s, v), x, h)?;
        let xvv = d2(|s| self.point(u, v + s), x, h)?;
        let xuv = d1(|s| d1(|r| self.point(u + s, v + r), h), h)?;
        Ok(Jet2 {
            x,
            xu,
            xv,
            xuu,
            xuv,
            xvv,
        })
    }
}

/// Fourth-order central first derivative.
pub(crate) fn d1(f: impl Fn(f64) -> Result<Vec3>, h: f64) -> Result<Vec3> {
    Ok((f(-2.0 * h)? - f(2.0 * h)? + 8.0 * (f(h)? - f(-h)?)) / (12.0 * h))
}

/// Fourth-order central second derivative, given the centre value.
pub(crate) fn d2(f: impl Fn(f64) -> Result<Vec3>, f0: Vec3, h: f64) -> Result<Vec3> {
    Ok((-(f(2.0 * h)? + f(-2.0 * h)?) + 16.0 * (f(h)? + f(-h)?) - 30.0 * f0) / (12.0 * h * h))
}

/// A smooth map of space together with its Jacobian.
pub trait SpaceMap: Send + Sync + Debug {
    fn apply(&self, x: &Vec3) -> Result<(Vec3, Mat3)>;
}

/// Image of a patch under a space map. First derivatives are exact via the
/// chain rule; second derivatives difference the first.
#[derive(Clone, Debug)]
pub struct MappedChart {
    pub base: SurfacePatch,
    pub map: Arc<dyn SpaceMap>,
    pub step: f64,
}

impl MappedChart {
    pub fn new(base: SurfacePatch, map: Arc<dyn SpaceMap>) -> Self {
        let step = 1e-3
            * base
                .domain
                .u
                .length()
                .abs()
                .min(base.domain.v.length().abs())
                .max(1e-12);
        Self { base, map, step }
    }
}

impl Chart for MappedChart {
    fn point(&self, u: f64, v: f64) -> Result<Vec3> {
        let j = self.base.jet1(u, v)?;
        Ok(self.map.apply(&j.x)?.0)
    }

    fn fd_step(&self) -> f64 {
        self.step
    }

    fn jet1(&self, u: f64, v: f64) -> Result<Jet1> {
        let j = self.base.jet1(u, v)?;
        let (x, dm) = self.map.apply(&j.x)?;
        Ok(Jet1 {
            x,
            xu: dm * j.xu,
            xv: dm * j.xv,
        })
    }

    fn jet2(&self, u: f64, v: f64) -> Result<Jet2> {
        let h = self.step;
        let j = self.jet1(u, v)?;
        let du = |s: f64| self.jet1(u + s, v);
        let dv = |s: f64| self.jet1(u, v + s);
        let xuu = d1(|s| du(s).map(|j| j.xu), h)?;
        let xvv = d1(|s| dv(s).map(|j| j.xv), h)?;
        let xuv_a = d1(|s| du(s).map(|j| j.xv), h)?;
        let xuv_b = d1(|s| dv(s).map(|j| j.xu), h)?;
        Ok(Jet2 {
            x: j.x,
            xu: j.xu,
            xv: j.xv,
            xuu,
            xuv: 0.5 * (xuv_a + xuv_b),
            xvv,
        })
    }
}

/// A chart given by a closure, used for ad-hoc parametrisations.
pub struct FnChart<F> {
    pub f: F,
    pub step: f64,
}

impl<F> Debug for FnChart<F> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FnChart").field("step", &self.step).finish()
    }
}

impl<F> Chart for FnChart<F>
where
    F: Fn(f64, f64) -> Vec3 + Send + Sync,
{
    fn point(&self, u: f64, v: f64) -> Result<Vec3> {
        Ok((self.f)(u, v))
    }

    fn fd_step(&self) -> f64 {
        self.step
    }
}
