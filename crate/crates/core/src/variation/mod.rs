//! First and second variations of the free energy and of the enclosed
//! volumes, the Lagrange multiplier, and difference-quotient checks.

mod fd;

use std::collections::BTreeMap;
use std::fmt::Debug;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use fd::{fd_derivative, richardson, FdEstimate, Stencil};

use crate::energy::{potential_eval, ComponentId, PieceConfig, Poly3, Potential};
use crate::error::{Error, Result};
use crate::field::{AmbientField, Support};
use crate::geometry::{BoundaryCurve, LocalFrame, Mat3, Vec3};
use crate::quadrature::Resolution;

fn div_s(dx: &Mat3, nu: &Vec3) -> f64 {
    dx.trace() - nu.dot(&(dx * nu))
}

/// Rejects fields whose support is not compactly inside the window.
pub fn check_support(cfg: &PieceConfig, x: &dyn AmbientField) -> Result<()> {
    let ok = match x.support() {
        Support::Everywhere => matches!(cfg.window, crate::energy::Window::Everywhere),
        Support::Ball { center, radius } => cfg.window.contains_ball(&Vec3::from(center), radius),
    };
    if ok {
        Ok(())
    } else {
        Err(Error::SupportEscapes { field: x.label() })
    }
}

/// Integrated first-variation terms of one component under one field.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VariationTerms {
    /// `∫ div_S X` over the interface pieces.
    pub area: f64,
    /// `∫ g X·nu` over all pieces.
    pub potential: f64,
    /// `∫ X·nu` over all pieces.
    pub volume: f64,
    /// `∫ |div_S X|` over the interface pieces.
    pub abs_area: f64,
    /// `∫ |g X·nu|`.
    pub abs_potential: f64,
    /// `∫ |X·nu|`.
    pub abs_volume: f64,
}

impl VariationTerms {
    pub fn energy(&self) -> f64 {
        self.area + self.potential
    }

    fn add(&mut self, o: &Self) {
        self.area += o.area;
        self.potential += o.potential;
        self.volume += o.volume;
        self.abs_area += o.abs_area;
        self.abs_potential += o.abs_potential;
        self.abs_volume += o.abs_volume;
    }
}

/// First-variation terms per component.
pub fn variation_terms(
    cfg: &PieceConfig,
    g: &Potential,
    x: &dyn AmbientField,
    res: &Resolution,
) -> Result<BTreeMap<ComponentId, VariationTerms>> {
    check_support(cfg, x)?;
    let mut out: BTreeMap<ComponentId, VariationTerms> = BTreeMap::new();
    for piece in &cfg.pieces {
        let interface = piece.is_interface();
        let p = &piece.patch;
        let [area, pot, vol, aa, ap, av] = p.grid(res).try_integrate_n(|u, v| {
            let n = p.node1(u, v)?;
            let da = n.area_element();
            let nu = n.n / da;
            let xv = x.value(&n.x);
            let xn = xv.dot(&nu);
            let (gv, _) = potential_eval(g, &n.x);
            let ds = if interface {
                div_s(&x.jacobian(&n.x), &nu)
            } else {
                0.0
            };
            Ok([
                ds * da,
                gv * xn * da,
                xn * da,
                ds.abs() * da,
                (gv * xn).abs() * da,
                xn.abs() * da,
            ])
        })?;
        out.entry(piece.component)
            .or_default()
            .add(&VariationTerms {
                area,
                potential: pot,
                volume: vol,
                abs_area: aa,
                abs_potential: ap,
                abs_volume: av,
            });
    }
    Ok(out)
}

/// `δE(X) = ∫ div_S X + ∫ g X·nu`.
pub fn first_variation_ambient(
    cfg: &PieceConfig,
    g: &Potential,
    x: &dyn AmbientField,
    res: &Resolution,
) -> Result<f64> {
    Ok(variation_terms(cfg, g, x, res)?
        .values()
        .map(VariationTerms::energy)
        .sum())
}

/// `δV(X) = ∫ X·nu` summed over components.
pub fn first_variation_volume(
    cfg: &PieceConfig,
    x: &dyn AmbientField,
    res: &Resolution,
) -> Result<f64> {
    Ok(variation_terms(cfg, &Potential::Zero, x, res)?
        .values()
        .map(|t| t.volume)
        .sum())
}

/// `-m ∫ n·X` along a boundary curve, with `n` the conormal pointing into
/// the sheet.
pub fn boundary_conormal_term(
    curve: &BoundaryCurve,
    x: &dyn AmbientField,
    res: &Resolution,
) -> Result<f64> {
    let v = curve.integrate(res, |p| Ok(curve.inward_conormal(p)?.dot(&x.value(&p.x))))?;
    Ok(-curve.multiplicity * v)
}

/// Multiplier estimate per component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiplierEstimate {
    pub lambda: BTreeMap<ComponentId, f64>,
    /// Largest scaled defect `|δE - λ δV| / ∫(|div_S X| + |λ X·nu| + |g X·nu|)`.
    pub residual: BTreeMap<ComponentId, f64>,
    pub fields_used: BTreeMap<ComponentId, usize>,
}

/// Least-squares multipliers from the first variations of several fields.
///
/// A field may move several components at once, as at a junction where only
/// the sum of the conormal terms cancels, so the fit is joint:
/// `Σ_c δE_c(X) = Σ_c λ_c δV_c(X)` for every field `X`.
pub fn lagrange_multiplier(
    cfg: &PieceConfig,
    g: &Potential,
    fields: &[Arc<dyn AmbientField>],
    res: &Resolution,
) -> Result<MultiplierEstimate> {
    let comps = cfg.components();
    let mut rows: Vec<BTreeMap<ComponentId, VariationTerms>> = Vec::with_capacity(fields.len());
    for f in fields {
        rows.push(variation_terms(cfg, g, f.as_ref(), res)?);
    }
    let usable = |t: &VariationTerms| t.abs_volume > 0.0 && t.volume.abs() > 1e-6 * t.abs_volume;
    let mut fields_used = BTreeMap::new();
    for &c in &comps {
        let n = rows
            .iter()
            .filter(|r| r.get(&c).is_some_and(usable))
            .count();
        if n < 2 {
            return Err(Error::IllPosed {
                component: c,
                reason: format!("{n} field(s) with non-degenerate volume change; need 2"),
            });
        }
        fields_used.insert(c, n);
    }
    let a = nalgebra::DMatrix::from_fn(rows.len(), comps.len(), |i, j| {
        rows[i].get(&comps[j]).map_or(0.0, |t| t.volume)
    });
    let b = nalgebra::DVector::from_fn(rows.len(), |i, _| {
        rows[i].values().map(VariationTerms::energy).sum()
    });
    let x = a
        .clone()
        .svd(true, true)
        .solve(&b, 1e-12 * a.norm())
        .map_err(|e| Error::IllPosed {
            component: comps[0],
            reason: e.to_string(),
        })?;
    let lambda: BTreeMap<ComponentId, f64> =
        comps.iter().zip(x.iter()).map(|(c, l)| (*c, *l)).collect();
    let mut residual: BTreeMap<ComponentId, f64> = comps.iter().map(|c| (*c, 0.0)).collect();
    for row in &rows {
        let d = stationarity_defect(row, &lambda);
        for (c, t) in row {
            if t.abs_volume > 0.0 || t.abs_area > 0.0 {
                let r = residual.get_mut(c).expect("known component");
                *r = r.max(d);
            }
        }
    }
    Ok(MultiplierEstimate {
        lambda,
        residual,
        fields_used,
    })
}

/// `|Σ_c (δE_c - λ_c δV_c)|` scaled by `Σ_c ∫(|div_S X| + |λ_c X·nu| + |g X·nu|)`;
/// NaN when a moved component has no multiplier.
pub fn stationarity_defect(
    terms: &BTreeMap<ComponentId, VariationTerms>,
    lambda: &BTreeMap<ComponentId, f64>,
) -> f64 {
    let (mut defect, mut scale) = (0.0, 0.0);
    for (c, t) in terms {
        let l = lambda.get(c).copied().unwrap_or(f64::NAN);
        defect += t.energy() - l * t.volume;
        scale += t.abs_area + l.abs() * t.abs_volume + t.abs_potential;
    }
    if scale > 0.0 {
        defect.abs() / scale
    } else {
        0.0
    }
}

/// A scalar function on space with its gradient.
pub trait ScalarField: Send + Sync + Debug {
    fn value(&self, x: &Vec3) -> f64;
    fn gradient(&self, x: &Vec3) -> Vec3;
}

impl ScalarField for Poly3 {
    fn value(&self, x: &Vec3) -> f64 {
        self.eval(x)
    }
    fn gradient(&self, x: &Vec3) -> Vec3 {
        Poly3::gradient(self, x)
    }
}

/// Normal speed `zeta` of a perturbation `zeta nu`.
#[derive(Clone, Debug)]
pub enum NormalPerturbation {
    /// Restriction of an ambient scalar.
    Scalar(Arc<dyn ScalarField>),
    /// `X·nu` for an ambient field.
    FieldNormal(Arc<dyn AmbientField>),
    Sum(Vec<(f64, NormalPerturbation)>),
    /// `inner - shift[c]` on component `c`.
    Shifted {
        inner: Box<NormalPerturbation>,
        shifts: BTreeMap<ComponentId, f64>,
    },
}

impl NormalPerturbation {
    /// `(zeta, ∇_S zeta)` at a frame on component `c`.
    pub fn eval(&self, fr: &LocalFrame, c: ComponentId) -> (f64, Vec3) {
        match self {
            Self::Scalar(f) => {
                let g = f.gradient(&fr.x);
                (f.value(&fr.x), g - g.dot(&fr.nu) * fr.nu)
            }
            Self::FieldNormal(x) => {
                let xv = x.value(&fr.x);
                let dx = x.jacobian(&fr.x);
                let zu = (dx * fr.xu).dot(&fr.nu) + xv.dot(&fr.nu_u);
                let zv = (dx * fr.xv).dot(&fr.nu) + xv.dot(&fr.nu_v);
                (xv.dot(&fr.nu), fr.gradient(zu, zv))
            }
            Self::Sum(terms) => terms.iter().fold((0.0, Vec3::zeros()), |(z, g), (a, p)| {
                let (zi, gi) = p.eval(fr, c);
                (z + a * zi, g + *a * gi)
            }),
            Self::Shifted { inner, shifts } => {
                let (z, g) = inner.eval(fr, c);
                (z - shifts.get(&c).copied().unwrap_or(0.0), g)
            }
        }
    }

    /// Subtracts the per-component mean over the interface pieces.
    pub fn mean_free(self, cfg: &PieceConfig, res: &Resolution) -> Result<Self> {
        let mut shifts = BTreeMap::new();
        for c in cfg.components() {
            let (mut int, mut area) = (0.0, 0.0);
            for p in cfg.of_component(c).filter(|p| p.is_interface()) {
                let [a, b] = p.patch.grid(res).try_integrate_n(|u, v| {
                    let fr = p.patch.frame(u, v)?;
                    Ok([self.eval(&fr, c).0 * fr.area_element, fr.area_element])
                })?;
                int += a;
                area += b;
            }
            shifts.insert(c, int / area);
        }
        Ok(Self::Shifted {
            inner: Box::new(self),
            shifts,
        })
    }
}

/// Value of the second-variation form with a stationarity diagnostic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SecondVariation {
    pub value: f64,
    /// `max |H - (g - λ)|` over the interface nodes.
    pub stationarity_residual: f64,
    /// Set when the configuration is visibly not stationary.
    pub warning: bool,
}

/// `Q(zeta) = ∫ (D_nu g - |A|^2) zeta^2 + |∇zeta|^2` over interface pieces.
pub fn second_variation_normal(
    cfg: &PieceConfig,
    g: &Potential,
    zeta: &NormalPerturbation,
    lambda: &BTreeMap<ComponentId, f64>,
    res: &Resolution,
) -> Result<SecondVariation> {
    let mut value = 0.0;
    let mut resid: f64 = 0.0;
    let mut scale: f64 = 1.0;
    for piece in cfg.interfaces() {
        let c = piece.component;
        let lam = lambda.get(&c).copied().unwrap_or(0.0);
        scale = scale.max(lam.abs());
        let p = &piece.patch;
        value += p.grid(res).try_integrate(|u, v| {
            let fr = p.frame(u, v)?;
            let (z, gz) = zeta.eval(&fr, c);
            let (_, dg) = potential_eval(g, &fr.x);
            let integrand = (dg.dot(&fr.nu) - fr.a_norm2()) * z * z + gz.norm_squared();
            Ok(integrand * fr.area_element)
        })?;
        let m = p.grid(res).try_max(|u, v| {
            let fr = p.frame(u, v)?;
            let (gv, _) = potential_eval(g, &fr.x);
            Ok((fr.mean_curvature() - (gv - lam)).abs())
        })?;
        resid = resid.max(m);
    }
    Ok(SecondVariation {
        value,
        stationarity_residual: resid,
        warning: resid > 1e-6 * scale,
    })
}

/// `Q(X·nu) + λ V''(X, Z)` when a volume-correction acceleration `Z` is
/// given, `Q(X·nu)` otherwise.
pub fn second_variation_ambient(
    cfg: &PieceConfig,
    g: &Potential,
    x: Arc<dyn AmbientField>,
    lambda: &BTreeMap<ComponentId, f64>,
    correction: Option<&dyn AmbientField>,
    res: &Resolution,
) -> Result<SecondVariation> {
    check_support(cfg, x.as_ref())?;
    let mut sv = second_variation_normal(
        cfg,
        g,
        &NormalPerturbation::FieldNormal(x.clone()),
        lambda,
        res,
    )?;
    if let Some(z) = correction {
        for (c, v2) in second_order_volume_by_component(cfg, x.as_ref(), Some(z), res)? {
            sv.value += lambda.get(&c).copied().unwrap_or(0.0) * v2;
        }
    }
    Ok(sv)
}

/// `d²/dt² V` at `t = 0` along the path `x + t X + t²/2 Z`, as the
/// boundary integral `∫ (Z + X div X - (DX) X)·nu`. The flow of `X`
/// corresponds to `Z = (DX) X`.
pub fn second_order_volume_by_component(
    cfg: &PieceConfig,
    x: &dyn AmbientField,
    z: Option<&dyn AmbientField>,
    res: &Resolution,
) -> Result<BTreeMap<ComponentId, f64>> {
    let mut out: BTreeMap<ComponentId, f64> = BTreeMap::new();
    for piece in &cfg.pieces {
        let p = &piece.patch;
        let v = p.grid(res).try_integrate(|u, w| {
            let n = p.node1(u, w)?;
            let xv = x.value(&n.x);
            let dx = x.jacobian(&n.x);
            let mut f = xv * dx.trace() - dx * xv;
            if let Some(z) = z {
                f += z.value(&n.x);
            }
            Ok(f.dot(&n.n))
        })?;
        *out.entry(piece.component).or_default() += v;
    }
    Ok(out)
}

pub fn second_order_volume(
    cfg: &PieceConfig,
    x: &dyn AmbientField,
    z: Option<&dyn AmbientField>,
    res: &Resolution,
) -> Result<f64> {
    Ok(second_order_volume_by_component(cfg, x, z, res)?
        .values()
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::{Piece, Window};
    use crate::field::{Dilation, LinearField, Rotation};
    use crate::geometry::sphere;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn ball() -> PieceConfig {
        PieceConfig::new(
            "ball",
            vec![Piece::interface(sphere("s", Vec3::zeros(), 1.0), 0)],
            Window::Everywhere,
        )
    }

    #[test]
    fn dilation_variations_of_unit_sphere() {
        let res = Resolution::default();
        let d = Dilation {
            center: Vec3::zeros(),
            scale: 1.0,
        };
        // d/dt area(e^t S) = 2 * 4π, d/dt vol = 3 * 4π/3.
        assert_relative_eq!(
            first_variation_ambient(&ball(), &Potential::Zero, &d, &res).unwrap(),
            8.0 * PI,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            first_variation_volume(&ball(), &d, &res).unwrap(),
            4.0 * PI,
            max_relative = 1e-12
        );
        // Flow e^t: V(t) = 4π/3 e^{3t}, V'' = 12π.
        assert_relative_eq!(
            second_order_volume(&ball(), &d, None, &res).unwrap(),
            8.0 * PI,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            second_order_volume(&ball(), &d, Some(&d), &res).unwrap(),
            12.0 * PI,
            max_relative = 1e-12
        );
    }

    #[test]
    fn rigid_rotation_preserves_volume_to_second_order() {
        let res = Resolution::default();
        let r = Rotation {
            omega: Vec3::new(0.3, -0.2, 1.0),
            center: Vec3::new(0.1, 0.0, 0.0),
        };
        let w = r.omega.cross_matrix();
        let accel = LinearField {
            matrix: w * w,
            center: r.center,
        };
        // The straight path x + tX is not volume preserving at second order.
        assert_relative_eq!(
            second_order_volume(&ball(), &r, None, &res).unwrap(),
            2.0 * r.omega.norm_squared() * 4.0 * PI / 3.0,
            max_relative = 1e-12
        );
        assert!(
            second_order_volume(&ball(), &r, Some(&accel), &res)
                .unwrap()
                .abs()
                < 1e-12
        );
    }

    #[test]
    fn scalar_second_variation_of_sphere() {
        // Q(1) = -∫|A|^2 = -8π on the unit sphere; Q(x_1) = 0 (translation).
        let res = Resolution::default();
        let lam = BTreeMap::from([(0, 2.0)]);
        let one = NormalPerturbation::Scalar(Arc::new(Poly3::constant(1.0)));
        let q = second_variation_normal(&ball(), &Potential::Zero, &one, &lam, &res).unwrap();
        assert_relative_eq!(q.value, -8.0 * PI, max_relative = 1e-12);
        assert!(!q.warning);
        let x1 = NormalPerturbation::Scalar(Arc::new(Poly3::linear(Vec3::x())));
        let q = second_variation_normal(&ball(), &Potential::Zero, &x1, &lam, &res).unwrap();
        assert!(q.value.abs() < 1e-12);
    }
}
