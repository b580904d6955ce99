//! Free energy `Per_U(E) + ∫_{E ∩ U} g` of a piecewise configuration.
//!
//! The potential integral is turned into a boundary flux with the primitive
//! `G e_3`, `∂_z G = g`, so only the pieces bounding the liquid inside the
//! window are needed.

use std::collections::BTreeMap;
use std::fmt::Debug;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{SurfacePatch, Vec3};
use crate::quadrature::Resolution;

pub type ComponentId = u32;

/// Polynomial in `(x, y, z)` as a list of `(coefficient, [i, j, k])`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Poly3 {
    pub terms: Vec<(f64, [u32; 3])>,
}

fn pw(x: f64, n: u32) -> f64 {
    x.powi(n as i32)
}

impl Poly3 {
    pub fn new(terms: Vec<(f64, [u32; 3])>) -> Self {
        Self { terms }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(vec![(c, [0, 0, 0])])
    }

    /// `c · x`.
    pub fn linear(c: Vec3) -> Self {
        Self::new(vec![(c.x, [1, 0, 0]), (c.y, [0, 1, 0]), (c.z, [0, 0, 1])])
    }

    pub fn eval(&self, p: &Vec3) -> f64 {
        self.terms
            .iter()
            .map(|(c, [i, j, k])| c * pw(p.x, *i) * pw(p.y, *j) * pw(p.z, *k))
            .sum()
    }

    pub fn gradient(&self, p: &Vec3) -> Vec3 {
        let mut g = Vec3::zeros();
        for (c, [i, j, k]) in &self.terms {
            let (x, y, z) = (pw(p.x, *i), pw(p.y, *j), pw(p.z, *k));
            if *i > 0 {
                g.x += c * *i as f64 * pw(p.x, i - 1) * y * z;
            }
            if *j > 0 {
                g.y += c * *j as f64 * x * pw(p.y, j - 1) * z;
            }
            if *k > 0 {
                g.z += c * *k as f64 * x * y * pw(p.z, k - 1);
            }
        }
        g
    }

    /// Antiderivative in `z` vanishing on `z = 0`.
    pub fn z_primitive(&self) -> Self {
        Self::new(
            self.terms
                .iter()
                .map(|(c, [i, j, k])| (c / (*k as f64 + 1.0), [*i, *j, k + 1]))
                .collect(),
        )
    }
}

/// A potential given only pointwise, without a closed-form primitive.
pub trait PointwisePotential: Send + Sync + Debug {
    fn value(&self, x: &Vec3) -> f64;
    fn gradient(&self, x: &Vec3) -> Vec3;
}

/// Bulk potential density `g`.
#[derive(Clone, Debug)]
pub enum Potential {
    Zero,
    Constant(f64),
    /// `g = g0 * rho * (direction · x)`.
    Gravity {
        g0: f64,
        rho: f64,
        direction: Vec3,
    },
    Polynomial(Poly3),
    /// Supported for variations only; energies need a primitive.
    Pointwise(Arc<dyn PointwisePotential>),
}

impl Potential {
    fn as_polynomial(&self) -> Option<Poly3> {
        match self {
            Self::Zero => Some(Poly3::default()),
            Self::Constant(c) => Some(Poly3::constant(*c)),
            Self::Gravity { g0, rho, direction } => Some(Poly3::linear(g0 * rho * direction)),
            Self::Polynomial(p) => Some(p.clone()),
            Self::Pointwise(_) => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Self::Zero)
    }
}

/// Value and gradient of `g` at `x`.
pub fn potential_eval(g: &Potential, x: &Vec3) -> (f64, Vec3) {
    match g {
        Potential::Zero => (0.0, Vec3::zeros()),
        Potential::Constant(c) => (*c, Vec3::zeros()),
        Potential::Gravity { g0, rho, direction } => {
            let d = g0 * rho * direction;
            (d.dot(x), d)
        }
        Potential::Polynomial(p) => (p.eval(x), p.gradient(x)),
        Potential::Pointwise(p) => (p.value(x), p.gradient(x)),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PieceRole {
    /// Liquid-vapour interface; counts towards the perimeter.
    Interface,
    /// Part of the window boundary closing a component; no perimeter.
    WindowCap,
}

/// A patch with its component label. The patch normal is the outer normal
/// of the liquid region, so the liquid lies on the side opposite to `nu`.
#[derive(Clone, Debug)]
pub struct Piece {
    pub patch: SurfacePatch,
    pub component: ComponentId,
    pub role: PieceRole,
}

impl Piece {
    pub fn interface(patch: SurfacePatch, component: ComponentId) -> Self {
        Self {
            patch,
            component,
            role: PieceRole::Interface,
        }
    }

    pub fn cap(patch: SurfacePatch, component: ComponentId) -> Self {
        Self {
            patch,
            component,
            role: PieceRole::WindowCap,
        }
    }

    pub fn is_interface(&self) -> bool {
        self.role == PieceRole::Interface
    }
}

/// Open window `U` in which energies are measured.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Window {
    Everywhere,
    Box {
        min: [f64; 3],
        max: [f64; 3],
    },
    /// `x^2 + y^2 < radius^2`, `z_min < z < z_max`.
    Cylinder {
        radius: f64,
        z_min: f64,
        z_max: f64,
    },
}

impl Window {
    /// Whether the closed ball lies inside the open window.
    pub fn contains_ball(&self, c: &Vec3, r: f64) -> bool {
        match self {
            Self::Everywhere => true,
            Self::Box { min, max } => (0..3).all(|i| c[i] - r > min[i] && c[i] + r < max[i]),
            Self::Cylinder {
                radius,
                z_min,
                z_max,
            } => c.x.hypot(c.y) + r < *radius && c.z - r > *z_min && c.z + r < *z_max,
        }
    }
}

/// A liquid configuration inside a window, assembled from labelled pieces.
#[derive(Clone, Debug)]
pub struct PieceConfig {
    pub name: String,
    pub pieces: Vec<Piece>,
    pub window: Window,
}

impl PieceConfig {
    pub fn new(name: impl Into<String>, pieces: Vec<Piece>, window: Window) -> Self {
        Self {
            name: name.into(),
            pieces,
            window,
        }
    }

    pub fn components(&self) -> Vec<ComponentId> {
        let mut ids: Vec<_> = self.pieces.iter().map(|p| p.component).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    pub fn interfaces(&self) -> impl Iterator<Item = &Piece> {
        self.pieces.iter().filter(|p| p.is_interface())
    }

    pub fn of_component(&self, c: ComponentId) -> impl Iterator<Item = &Piece> {
        self.pieces.iter().filter(move |p| p.component == c)
    }

    /// Sub-configuration with the pieces at the given indices.
    pub fn filtered_indices(&self, idx: &[usize]) -> Self {
        Self {
            name: self.name.clone(),
            pieces: idx.iter().map(|i| self.pieces[*i].clone()).collect(),
            window: self.window,
        }
    }

    /// Sub-configuration with only the pieces passing `keep`.
    pub fn filtered(&self, keep: impl Fn(&Piece) -> bool) -> Self {
        Self {
            name: self.name.clone(),
            pieces: self.pieces.iter().filter(|p| keep(p)).cloned().collect(),
            window: self.window,
        }
    }
}

/// Energy split into its two parts, plus the component volumes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub perimeter: f64,
    pub potential: f64,
    pub total: f64,
    pub volumes: BTreeMap<ComponentId, f64>,
}

/// Perimeter of the interface pieces.
pub fn perimeter(cfg: &PieceConfig, res: &Resolution) -> Result<f64> {
    let mut total = 0.0;
    for p in cfg.interfaces() {
        total += crate::geometry::patch_area(&p.patch, &p.patch.grid(res))?;
    }
    Ok(total)
}

/// `∫ g` over the liquid, as the flux of the primitive through all pieces.
pub fn potential_energy(cfg: &PieceConfig, g: &Potential, res: &Resolution) -> Result<f64> {
    if g.is_zero() {
        return Ok(0.0);
    }
    let prim = g
        .as_polynomial()
        .ok_or_else(|| Error::UnsupportedPotential("pointwise potential has no primitive".into()))?
        .z_primitive();
    let mut total = 0.0;
    for p in &cfg.pieces {
        total += p.patch.grid(res).try_integrate(|u, v| {
            let n = p.patch.node1(u, v)?;
            Ok(prim.eval(&n.x) * n.n.z)
        })?;
    }
    Ok(total)
}

/// Signed flux volumes `(1/3) ∫ x · nu` per component, without closure
/// checks. Differences between two configurations sharing their fixed
/// pieces are volume changes even when the components are open.
pub fn flux_volumes(cfg: &PieceConfig, res: &Resolution) -> Result<BTreeMap<ComponentId, f64>> {
    let mut out: BTreeMap<ComponentId, f64> = BTreeMap::new();
    for p in &cfg.pieces {
        let v = crate::geometry::patch_flux(&p.patch, res, |x| *x / 3.0)?;
        *out.entry(p.component).or_default() += v;
    }
    Ok(out)
}

/// Volumes of closed components; errors on an open component or a
/// non-positive volume.
pub fn component_volumes(
    cfg: &PieceConfig,
    res: &Resolution,
) -> Result<BTreeMap<ComponentId, f64>> {
    let mut out = BTreeMap::new();
    for c in cfg.components() {
        let mut vol = 0.0;
        let mut flux = Vec3::zeros();
        let mut area = 0.0;
        for p in cfg.of_component(c) {
            let [v, fx, fy, fz, a] = p.patch.grid(res).try_integrate_n(|u, w| {
                let n = p.patch.node1(u, w)?;
                Ok([n.x.dot(&n.n) / 3.0, n.n.x, n.n.y, n.n.z, n.n.norm()])
            })?;
            vol += v;
            flux += Vec3::new(fx, fy, fz);
            area += a;
        }
        if flux.norm() > 1e-8 * area.max(f64::MIN_POSITIVE) {
            return Err(Error::OpenComponent {
                component: c,
                defect: flux.norm(),
            });
        }
        if vol <= 0.0 {
            return Err(Error::Orientation {
                component: c,
                volume: vol,
            });
        }
        out.insert(c, vol);
    }
    Ok(out)
}

pub fn free_energy(cfg: &PieceConfig, g: &Potential, res: &Resolution) -> Result<EnergyBreakdown> {
    let perimeter = perimeter(cfg, res)?;
    let potential = potential_energy(cfg, g, res)?;
    let volumes = component_volumes(cfg, res)?;
    Ok(EnergyBreakdown {
        perimeter,
        potential,
        total: perimeter + potential,
        volumes,
    })
}

/// Perimeter plus potential, without closure checks.
pub fn energy_value(cfg: &PieceConfig, g: &Potential, res: &Resolution) -> Result<f64> {
    Ok(perimeter(cfg, res)? + potential_energy(cfg, g, res)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::sphere;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn polynomial_gradient_and_primitive() {
        let p = Poly3::new(vec![(2.0, [1, 2, 0]), (-1.0, [0, 0, 3])]);
        let x = Vec3::new(0.5, -1.5, 2.0);
        assert_relative_eq!(p.eval(&x), 2.0 * 0.5 * 2.25 - 8.0);
        let g = p.gradient(&x);
        assert_relative_eq!(g.x, 2.0 * 2.25);
        assert_relative_eq!(g.y, 2.0 * 0.5 * 2.0 * -1.5);
        assert_relative_eq!(g.z, -12.0);
        let q = p.z_primitive();
        let h = 1e-6;
        let dz = (q.eval(&(x + Vec3::z() * h)) - q.eval(&(x - Vec3::z() * h))) / (2.0 * h);
        assert_relative_eq!(dz, p.eval(&x), epsilon = 1e-7);
    }

    #[test]
    fn unit_sphere_energy_with_unit_potential() {
        let cfg = PieceConfig::new(
            "ball",
            vec![Piece::interface(sphere("s", Vec3::zeros(), 1.0), 0)],
            Window::Everywhere,
        );
        let e = free_energy(&cfg, &Potential::Constant(1.0), &Resolution::default()).unwrap();
        assert_relative_eq!(e.perimeter, 4.0 * PI, max_relative = 1e-12);
        assert_relative_eq!(e.potential, 4.0 * PI / 3.0, max_relative = 1e-12);
        assert_relative_eq!(e.volumes[&0], 4.0 * PI / 3.0, max_relative = 1e-12);
    }

    #[test]
    fn gravity_potential_of_offset_ball() {
        // ∫_B z dV = |B| z_c for a ball centred at z_c.
        let cfg = PieceConfig::new(
            "ball",
            vec![Piece::interface(
                sphere("s", Vec3::new(0.0, 0.0, 2.0), 0.5),
                0,
            )],
            Window::Everywhere,
        );
        let g = Potential::Gravity {
            g0: 9.81,
            rho: 1.0,
            direction: Vec3::z(),
        };
        let e = potential_energy(&cfg, &g, &Resolution::default()).unwrap();
        assert_relative_eq!(e, 9.81 * 2.0 * 4.0 / 3.0 * PI * 0.125, max_relative = 1e-12);
    }

    #[test]
    fn inward_orientation_is_reported() {
        let cfg = PieceConfig::new(
            "ball",
            vec![Piece::interface(
                sphere("s", Vec3::zeros(), 1.0).reversed(),
                3,
            )],
            Window::Everywhere,
        );
        let err = component_volumes(&cfg, &Resolution::default()).unwrap_err();
        assert!(matches!(err, Error::Orientation { component: 3, .. }));
    }
}
