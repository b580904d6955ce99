//! Coalescence of two sheets touching at a point.
//!
//! The sheets are graphs `u = -f_lo(r)` and `v = f_up(r)` over the disc of
//! radius `3R`. Near the contact point the horizontal flow of `chi(r) ∂_r`
//! opens a hole of radius `t`; each deformed sheet is written as the graph of
//! the pulled-back height `u(Φ_{-t}(ρ))` over `t < ρ < 2 R0`, so the moving
//! part stays an exact graph. The outer annulus `R < r < 3R` carries an
//! ambient correction `x + t W + s(t) Y` that keeps the total volume fixed.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{
    CorrectionGroup, CorrectionSpec, CutoffChi, DeformationPath, PathInfo, RadialFlow, SolveCache,
};
use crate::energy::{
    energy_value, flux_volumes, potential_eval, ComponentId, Piece, PieceConfig, Potential, Window,
};
use crate::error::{Error, Result};
use crate::field::{AmbientField, NormalBumpField, NormalExtension};
use crate::geometry::{
    BoundaryCurve, Edge, Flat, Frame, GraphCoords, HeightFn, HeightJet, LineProfile, Orientation,
    RadialHeight, RadialShape, SurfacePatch, Vec3,
};
use crate::quadrature::{Interval, ParamDomain, Resolution};
use crate::variation::{
    boundary_conormal_term, fd_derivative, lagrange_multiplier, richardson, second_order_volume,
    second_variation_normal, FdEstimate, NormalPerturbation, Stencil,
};

/// Which side of the sheet pair is liquid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CuspSide {
    /// Liquid below the lower sheet and above the upper one: the flow joins
    /// the two bodies through a neck.
    Merge,
    /// Liquid in the gap between the sheets: the flow cuts a hole in it.
    Split,
}

/// Two sheets touching at the origin with a common horizontal tangent plane.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CuspPairConfig {
    pub lower: RadialShape,
    pub upper: RadialShape,
    /// Inner window radius `R`; the sheets are represented out to `3R`.
    pub r_window: f64,
    /// Cutoff radius `R0` of the radial flow.
    pub r0: f64,
    pub side: CuspSide,
    /// Decreasing time steps for one-sided difference quotients.
    pub t_steps: Vec<f64>,
    /// Inner radii, as fractions of `R0`, for the extrapolation of the
    /// first variation at `t = 0`.
    pub rho_fractions: [f64; 3],
}

impl CuspPairConfig {
    /// Mirror-symmetric spherical caps `∓(ρ_s - sqrt(ρ_s² - r²))` with
    /// `ρ_s = 1/(2 alpha)`.
    pub fn spherical_caps(alpha: f64, r_window: f64, r0: f64) -> Self {
        let shape = RadialShape::SphereCap {
            radius: 0.5 / alpha,
        };
        Self::new(shape, shape, r_window, r0)
    }

    pub fn paraboloids(alpha: f64, r_window: f64, r0: f64) -> Self {
        let shape = RadialShape::Paraboloid { alpha };
        Self::new(shape, shape, r_window, r0)
    }

    fn new(lower: RadialShape, upper: RadialShape, r_window: f64, r0: f64) -> Self {
        let h = 1e-2 * r_window;
        Self {
            lower,
            upper,
            r_window,
            r0,
            side: CuspSide::Merge,
            t_steps: vec![h, h / 2.0, h / 4.0, h / 8.0],
            rho_fractions: [1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0],
        }
    }

    pub fn with_side(mut self, side: CuspSide) -> Self {
        self.side = side;
        self
    }

    fn validate(&self) -> Result<()> {
        let r = self.r_window;
        if !(r > 0.0 && self.r0 > 0.0) {
            return Err(Error::Invalid(
                "window and cutoff radii must be positive".into(),
            ));
        }
        if 2.0 * self.r0 >= r {
            return Err(Error::Invalid(format!(
                "cutoff support 2 R0 = {} must lie inside the inner window R = {r}",
                2.0 * self.r0
            )));
        }
        for s in [self.lower, self.upper] {
            if s.max_radius() <= 3.0 * r {
                return Err(Error::Invalid(format!(
                    "sheet {s:?} is not a graph over the disc of radius 3R = {}",
                    3.0 * r
                )));
            }
            if s.eval(3.0 * r).0 >= 0.9 * r {
                return Err(Error::Invalid(format!(
                    "sheet {s:?} leaves the window height R = {r} before radius 3R"
                )));
            }
        }
        if self.t_steps.iter().any(|t| *t > self.r0) {
            return Err(Error::Invalid(format!(
                "time steps must not exceed R0 = {}",
                self.r0
            )));
        }
        Ok(())
    }
}

/// `u(Φ_{-t}(ρ))` for a radial height `u`.
#[derive(Debug)]
struct PulledBack {
    height: RadialHeight,
    flow: RadialFlow,
    t: f64,
}

impl HeightFn for PulledBack {
    fn jet(&self, rho: f64, _theta: f64) -> HeightJet {
        match self.flow.state(rho, -self.t) {
            Ok((r, j, k)) => {
                let h = self.height.jet(r, 0.0);
                HeightJet {
                    f: h.f,
                    fa: h.fa * j,
                    fb: 0.0,
                    faa: h.faa * j * j + h.fa * k,
                    fab: 0.0,
                    fbb: 0.0,
                }
            }
            Err(_) => HeightJet {
                f: f64::NAN,
                ..HeightJet::default()
            },
        }
    }
}

const LOWER_INNER: usize = 0;
const LOWER_OUTER: usize = 2;
const UPPER_INNER: usize = 3;
const INNER: [usize; 2] = [LOWER_INNER, UPPER_INNER];

fn theta_interval(panels: usize) -> Interval {
    Interval::periodic(0.0, std::f64::consts::TAU).with_panels(panels)
}

/// Coalescence family `t -> E_t`, `0 <= t <= R0`.
pub struct CoalescencePath {
    pub config: CuspPairConfig,
    pub flow: RadialFlow,
    base: PieceConfig,
    heights: [RadialHeight; 2],
    orientations: [Orientation; 2],
    /// First-order correction `W = c b N` on the outer lower sheet.
    pub w: Arc<NormalBumpField>,
    /// Second-order correction direction `Y = b N`.
    pub y: Arc<NormalBumpField>,
    pub lambda: f64,
    pub lambda_residual: f64,
    target: f64,
    cache: SolveCache,
}

impl std::fmt::Debug for CoalescencePath {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CoalescencePath")
            .field("config", &self.config)
            .finish()
    }
}

fn polar_sheet(
    name: &str,
    h: Arc<dyn HeightFn>,
    lo: f64,
    hi: f64,
    breaks: Vec<f64>,
    o: Orientation,
) -> SurfacePatch {
    SurfacePatch::graph(
        name,
        h,
        GraphCoords::Polar,
        ParamDomain::new(
            Interval::new(lo, hi).with_breaks(breaks).with_panels(2),
            theta_interval(1),
        ),
    )
    .with_orientation(o)
}

impl CoalescencePath {
    const COMPONENT: ComponentId = 0;

    fn inner_sheet(&self, k: usize, t: f64) -> Result<SurfacePatch> {
        let r0 = self.config.r0;
        let rho_star = self.flow.radius(r0, t)?;
        let h: Arc<dyn HeightFn> = if t == 0.0 {
            Arc::new(self.heights[k])
        } else {
            Arc::new(PulledBack {
                height: self.heights[k],
                flow: self.flow,
                t,
            })
        };
        let name = if k == 0 { "lower-inner" } else { "upper-inner" };
        Ok(polar_sheet(
            name,
            h,
            t,
            2.0 * r0,
            vec![r0, rho_star],
            self.orientations[k],
        ))
    }

    /// Configuration with the radially deformed inner sheets and the outer
    /// annulus still undeformed.
    fn radial_config(&self, t: f64) -> Result<PieceConfig> {
        let mut cfg = self.base.clone();
        cfg.pieces[LOWER_INNER].patch = self.inner_sheet(0, t)?;
        cfg.pieces[UPPER_INNER].patch = self.inner_sheet(1, t)?;
        Ok(cfg)
    }

    fn spec(&self) -> CorrectionSpec {
        CorrectionSpec {
            groups: vec![CorrectionGroup {
                pieces: vec![LOWER_OUTER],
                x: self.w.clone(),
                ys: vec![0],
            }],
            ys: vec![(Self::COMPONENT, self.y.clone() as Arc<dyn AmbientField>)],
        }
    }

    fn check_t(&self, t: f64) -> Result<()> {
        // Up to R0 the hole edge is the image of the axis, the circle r = t.
        if !(0.0..=self.config.r0).contains(&t) {
            return Err(Error::Invalid(format!(
                "coalescence time {t} outside [0, R0 = {}]",
                self.config.r0
            )));
        }
        Ok(())
    }

    /// Volume-correction parameter `s(t)`.
    pub fn s_at(&self, t: f64, res: &Resolution) -> Result<f64> {
        self.check_t(t)?;
        let s = self.cache.get_or(t, || {
            if t == 0.0 {
                return Ok(vec![0.0]);
            }
            let radial = self.radial_config(t)?;
            let targets = BTreeMap::from([(Self::COMPONENT, self.target)]);
            self.spec().solve(&radial, t, &targets, &[0.0], res)
        })?;
        Ok(s[0])
    }

    /// Energy of the moving inner sheets (the `t`-dependent part of the
    /// energy in the inner window).
    pub fn inner_energy(&self, t: f64, g: &Potential, res: &Resolution) -> Result<f64> {
        self.check_t(t)?;
        let cfg = self.radial_config(t)?;
        energy_value(&cfg.filtered_indices(&INNER), g, res)
    }

    /// Volume enclosed by the moving inner sheets, up to a constant.
    pub fn inner_volume(&self, t: f64, res: &Resolution) -> Result<f64> {
        self.check_t(t)?;
        let cfg = self.radial_config(t)?;
        Ok(flux_volumes(&cfg.filtered_indices(&INNER), res)?
            .values()
            .sum())
    }

    /// Energy of the corrected outer lower sheet.
    pub fn outer_energy(&self, t: f64, g: &Potential, res: &Resolution) -> Result<f64> {
        let cfg = self.config_at(t, res)?;
        energy_value(&cfg.filtered_indices(&[LOWER_OUTER]), g, res)
    }

    fn outer_base(&self) -> PieceConfig {
        self.base.filtered_indices(&[LOWER_OUTER])
    }

    /// Sum over both sheets of `∫_{∂S_t} X·n_out` on the inner edge circle.
    pub fn boundary_term(&self, t: f64, res: &Resolution) -> Result<f64> {
        if t == 0.0 {
            return Ok(0.0);
        }
        let x = RadialField { chi: self.flow.chi };
        let mut total = 0.0;
        for k in 0..2 {
            let curve = BoundaryCurve::patch_edge("hole", self.inner_sheet(k, t)?, Edge::ULo);
            total += boundary_conormal_term(&curve, &x, res)?;
        }
        Ok(total)
    }

    fn check_separation(&self, cfg: &PieceConfig, res: &Resolution) -> Result<()> {
        let coarse = Resolution::with_order(0, res.order.min(4));
        let upper_at = |x: &Vec3| -> f64 {
            let r = x.x.hypot(x.y);
            self.heights[1].jet(r, 0.0).f
        };
        let tol = 1e-12 * self.config.r_window;
        for &i in &[LOWER_INNER, LOWER_OUTER] {
            let p = &cfg.pieces[i].patch;
            let grid = p.grid(&coarse);
            for n in &grid.nodes {
                let x = p.jet1(n[0], n[1])?.x;
                let gap = if i == LOWER_INNER {
                    let other = cfg.pieces[UPPER_INNER].patch.jet1(n[0], n[1])?.x;
                    other.z - x.z
                } else {
                    upper_at(&x) - x.z
                };
                if gap < -tol {
                    return Err(Error::SheetCollision {
                        gap,
                        at: [x.x, x.y, x.z],
                    });
                }
            }
        }
        Ok(())
    }
}

/// `chi(r) ∂_r` in the horizontal plane.
#[derive(Clone, Copy, Debug)]
pub(crate) struct RadialField {
    pub chi: CutoffChi,
}

impl AmbientField for RadialField {
    fn value(&self, x: &Vec3) -> Vec3 {
        let r = x.x.hypot(x.y);
        if r == 0.0 {
            return Vec3::zeros();
        }
        let c = self.chi.eval(r).0;
        Vec3::new(c * x.x / r, c * x.y / r, 0.0)
    }

    fn jacobian(&self, x: &Vec3) -> crate::geometry::Mat3 {
        let r = x.x.hypot(x.y);
        let mut m = crate::geometry::Mat3::zeros();
        if r == 0.0 {
            return m;
        }
        let (c, dc, _) = self.chi.eval(r);
        let e = [x.x / r, x.y / r];
        for i in 0..2 {
            for j in 0..2 {
                let delta = if i == j { 1.0 } else { 0.0 };
                m[(i, j)] = dc * e[i] * e[j] + c / r * (delta - e[i] * e[j]);
            }
        }
        m
    }

    fn support(&self) -> crate::field::Support {
        crate::field::Support::Everywhere
    }

    fn label(&self) -> String {
        "radial".into()
    }
}

impl DeformationPath for CoalescencePath {
    fn info(&self) -> PathInfo {
        PathInfo {
            kind: "coalescence".into(),
            one_sided: true,
            t_max: self.config.r0,
            correction: Some("outer annulus: x + tW + s(t)Y, damped Newton".into()),
        }
    }

    fn config_at(&self, t: f64, res: &Resolution) -> Result<PieceConfig> {
        let s = self.s_at(t, res)?;
        let radial = self.radial_config(t)?;
        let cfg = self.spec().apply(&radial, t, &[s]);
        self.check_separation(&cfg, res)?;
        Ok(cfg)
    }
}

fn sheet_heights(config: &CuspPairConfig) -> [RadialHeight; 2] {
    [
        RadialHeight {
            shape: config.lower,
            sign: -1.0,
        },
        RadialHeight {
            shape: config.upper,
            sign: 1.0,
        },
    ]
}

fn sheet_orientations(side: CuspSide) -> [Orientation; 2] {
    match side {
        CuspSide::Merge => [Orientation::Natural, Orientation::Reversed],
        CuspSide::Split => [Orientation::Reversed, Orientation::Natural],
    }
}

/// Undeformed sheets in the window `B_{3R} x (-R, R)`, closed by window
/// caps, as a single component. Piece order: lower inner, mid, outer, then
/// upper inner, mid, outer, then caps.
pub fn cusp_pair_pieces(config: &CuspPairConfig) -> Result<PieceConfig> {
    config.validate()?;
    let r = config.r_window;
    let r0 = config.r0;
    let merge = config.side == CuspSide::Merge;
    let heights = sheet_heights(config);
    let orientations = sheet_orientations(config.side);
    let c = CoalescencePath::COMPONENT;
    let mut pieces = Vec::new();
    for (k, name) in [(0, "lower"), (1, "upper")] {
        let h: Arc<dyn HeightFn> = Arc::new(heights[k]);
        pieces.push(Piece::interface(
            polar_sheet(
                &format!("{name}-inner"),
                h.clone(),
                0.0,
                2.0 * r0,
                vec![r0],
                orientations[k],
            ),
            c,
        ));
        pieces.push(Piece::interface(
            polar_sheet(
                &format!("{name}-mid"),
                h.clone(),
                2.0 * r0,
                r,
                vec![],
                orientations[k],
            ),
            c,
        ));
        let mut outer = polar_sheet(
            &format!("{name}-outer"),
            h,
            r,
            3.0 * r,
            vec![],
            orientations[k],
        );
        outer.domain.v = theta_interval(8);
        outer.domain.u = Interval::new(r, 3.0 * r)
            .with_breaks([2.0 * r])
            .with_panels(4);
        pieces.push(Piece::interface(outer, c));
    }
    let u3 = heights[0].jet(3.0 * r, 0.0).f;
    let v3 = heights[1].jet(3.0 * r, 0.0).f;
    let band = |name: &str, lo: f64, hi: f64| {
        SurfacePatch::revolution(
            name,
            Arc::new(LineProfile { radius: 3.0 * r }),
            Frame::standard(),
            ParamDomain::new(theta_interval(1), Interval::new(lo, hi)),
        )
    };
    let disc = |name: &str, z: f64, o: Orientation| {
        polar_sheet(name, Arc::new(Flat { c: z }), 0.0, 3.0 * r, vec![r], o)
    };
    if merge {
        pieces.push(Piece::cap(disc("bottom", -r, Orientation::Reversed), c));
        pieces.push(Piece::cap(disc("top", r, Orientation::Natural), c));
        pieces.push(Piece::cap(band("lower-band", -r, u3), c));
        pieces.push(Piece::cap(band("upper-band", v3, r), c));
    } else {
        pieces.push(Piece::cap(band("gap-band", u3, v3), c));
    }
    Ok(PieceConfig::new(
        if merge {
            "touching caps"
        } else {
            "touching caps (gap liquid)"
        },
        pieces,
        Window::Cylinder {
            radius: 3.0 * r,
            z_min: -r,
            z_max: r,
        },
    ))
}

/// Builds the coalescence family for a touching sheet pair.
pub fn coalescence_path(
    config: &CuspPairConfig,
    g: &Potential,
    res: &Resolution,
) -> Result<CoalescencePath> {
    let base = cusp_pair_pieces(config)?;
    let r = config.r_window;
    let r0 = config.r0;
    let heights = sheet_heights(config);
    let orientations = sheet_orientations(config.side);
    let c = CoalescencePath::COMPONENT;

    // Correction bumps on the outer lower sheet, clear of the upper sheet.
    let rc = 2.5 * r;
    let zc = heights[0].jet(rc, 0.0).f;
    let b = (0.4 * r).min(0.4 * (heights[1].jet(rc, 0.0).f - zc));
    let normal = NormalExtension::Graph {
        height: Arc::new(heights[0]),
        coords: GraphCoords::Polar,
        sign: orientations[0].sign(),
    };
    let y = Arc::new(NormalBumpField {
        center: Vec3::new(-rc, 0.0, zc),
        radius: b,
        amplitude: 1.0,
        normal: normal.clone(),
    });
    let w_unit = Arc::new(NormalBumpField {
        center: Vec3::new(rc, 0.0, zc),
        radius: b,
        amplitude: 1.0,
        normal,
    });

    let flow = RadialFlow::new(CutoffChi { r0 });
    let mut path = CoalescencePath {
        config: config.clone(),
        flow,
        base,
        heights,
        orientations,
        w: w_unit.clone(),
        y,
        lambda: f64::NAN,
        lambda_residual: f64::NAN,
        target: 0.0,
        cache: SolveCache::default(),
    };
    for f in [&path.w, &path.y] {
        crate::variation::check_support(&path.base, f.as_ref())?;
        if let crate::field::Support::Ball { center, radius } = f.support() {
            if Vec3::from(center).xy().norm() - radius <= r {
                return Err(Error::Invalid(
                    "correction support reaches the inner window".into(),
                ));
            }
        }
    }
    let outer = path.outer_base();
    let unit_flux = crate::variation::first_variation_volume(&outer, w_unit.as_ref(), res)?;
    let v1 = volume_rate(&path, 0.0, res)?;
    path.w = Arc::new(NormalBumpField {
        amplitude: -v1 / unit_flux,
        ..(*w_unit).clone()
    });
    let est = lagrange_multiplier(
        &outer,
        g,
        &[path.w.clone() as Arc<dyn AmbientField>, path.y.clone()],
        res,
    )?;
    path.lambda = est.lambda[&c];
    path.lambda_residual = est.residual[&c];
    path.target = flux_volumes(&path.base, res)?[&c];
    Ok(path)
}

/// `V'(t) = ∫_{M_t ∪ N_t} chi ∂_r · nu` over the moving sheets.
pub fn volume_rate(path: &CoalescencePath, t: f64, res: &Resolution) -> Result<f64> {
    path.check_t(t)?;
    let x = RadialField { chi: path.flow.chi };
    let mut total = 0.0;
    for k in 0..2 {
        let sheet = path.inner_sheet(k, t)?;
        total += crate::geometry::patch_flux(&sheet, res, |p| x.value(p))?;
    }
    Ok(total)
}

/// Per-sheet terms of the first variation in the inner window.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SheetTerms {
    /// `-∫ H⃗ · X`.
    pub curvature: f64,
    /// `∫_{∂S_t} X · n_out`.
    pub boundary: f64,
    /// `∫ g X · nu`.
    pub potential: f64,
}

impl SheetTerms {
    pub fn total(&self) -> f64 {
        self.curvature + self.boundary + self.potential
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoalescenceFirstVariation {
    pub t: f64,
    pub lower: SheetTerms,
    pub upper: SheetTerms,
    /// Sum of the six inner-window terms.
    pub inner_total: f64,
    /// Inner-window total evaluated directly down to the axis (t = 0 only).
    pub inner_direct: Option<f64>,
    /// First variation of the corrected outer sheet (t = 0 only).
    pub outer: Option<f64>,
}

fn sheet_terms(
    path: &CoalescencePath,
    sheet: &SurfacePatch,
    g: &Potential,
    with_boundary: bool,
    res: &Resolution,
) -> Result<SheetTerms> {
    let x = RadialField { chi: path.flow.chi };
    let [curv, pot] = sheet.grid(res).try_integrate_n(|u, v| {
        let fr = sheet.frame(u, v)?;
        let xn = x.value(&fr.x).dot(&fr.nu);
        let (gv, _) = potential_eval(g, &fr.x);
        Ok([
            -fr.mean_curvature() * xn * fr.area_element,
            gv * xn * fr.area_element,
        ])
    })?;
    let boundary = if with_boundary {
        let curve = BoundaryCurve::patch_edge("hole", sheet.clone(), Edge::ULo);
        boundary_conormal_term(&curve, &x, res)?
    } else {
        0.0
    };
    Ok(SheetTerms {
        curvature: curv,
        boundary,
        potential: pot,
    })
}

/// First variation of the energy along the coalescence family at `t`.
///
/// At `t = 0` the interior integrals are evaluated on `ρ > ρ_k` for the
/// configured inner radii and extrapolated to `ρ_k -> 0`.
pub fn first_variation_coalescence(
    path: &CoalescencePath,
    g: &Potential,
    t: f64,
    res: &Resolution,
) -> Result<CoalescenceFirstVariation> {
    path.check_t(t)?;
    let mut terms = [SheetTerms::default(); 2];
    let mut inner_direct = None;
    let mut outer = None;
    if t > 0.0 {
        for (k, term) in terms.iter_mut().enumerate() {
            *term = sheet_terms(path, &path.inner_sheet(k, t)?, g, true, res)?;
        }
    } else {
        let r0 = path.config.r0;
        let radii: Vec<f64> = path.config.rho_fractions.iter().map(|f| f * r0).collect();
        for (k, term) in terms.iter_mut().enumerate() {
            let full = path.inner_sheet(k, 0.0)?;
            let mut curv = Vec::new();
            let mut pot = Vec::new();
            for rho in &radii {
                let mut s = full.clone();
                s.domain.u = Interval::new(*rho, 2.0 * r0)
                    .with_breaks([r0])
                    .with_panels(2);
                let st = sheet_terms(path, &s, g, false, res)?;
                curv.push(st.curvature);
                pot.push(st.potential);
            }
            term.curvature = richardson(&radii, &curv, &[2.0, 3.0]).0;
            term.potential = richardson(&radii, &pot, &[2.0, 3.0]).0;
        }
        let mut direct = 0.0;
        for k in 0..2 {
            direct += sheet_terms(path, &path.inner_sheet(k, 0.0)?, g, false, res)?.total();
        }
        inner_direct = Some(direct);
        outer = Some(crate::variation::first_variation_ambient(
            &path.outer_base(),
            g,
            path.w.as_ref(),
            res,
        )?);
    }
    Ok(CoalescenceFirstVariation {
        t,
        lower: terms[0],
        upper: terms[1],
        inner_total: terms[0].total() + terms[1].total(),
        inner_direct,
        outer,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoalescenceSecondVariation {
    /// Second derivative of the inner-window energy.
    pub inner: FdEstimate,
    /// Derivative of the two edge-circle terms (each sheet gives `-2π`).
    pub boundary: FdEstimate,
    pub boundary_exact: f64,
    /// `inner - boundary_exact`.
    pub inner_remainder: f64,
    /// `Q(W·nu)` on the outer sheet.
    pub q_outer: f64,
    pub lambda: f64,
    pub lambda_residual: f64,
    /// Second derivative of the inner volume.
    pub inner_volume_second: FdEstimate,
    /// `s''(0)` of the correction solve.
    pub s_second: FdEstimate,
    /// `V''` of the outer correction path, `∫(s''Y + W div W - (DW)W)·nu`.
    pub outer_volume_second: f64,
    /// `Q(W·nu) + λ V''_outer`.
    pub outer: f64,
    /// Direct difference quotient of the outer energy, as a cross-check.
    pub outer_fd: FdEstimate,
    pub total: f64,
    pub total_error: f64,
}

/// Second derivative of the energy along the coalescence family at `0+`.
pub fn second_variation_coalescence(
    path: &CoalescencePath,
    g: &Potential,
    res: &Resolution,
) -> Result<CoalescenceSecondVariation> {
    let steps = &path.config.t_steps;
    let inner = fd_derivative(
        |t| path.inner_energy(t, g, res),
        2,
        Stencil::OneSided,
        steps,
    )?;
    if !(inner.error <= PI / 4.0) {
        return Err(Error::Resolution(format!(
            "inner-window second derivative error bar {:e} exceeds pi/4",
            inner.error
        )));
    }
    let boundary = fd_derivative(|t| path.boundary_term(t, res), 1, Stencil::OneSided, steps)?;
    let inner_volume_second =
        fd_derivative(|t| path.inner_volume(t, res), 2, Stencil::OneSided, steps)?;
    let s_second = fd_derivative(|t| path.s_at(t, res), 2, Stencil::OneSided, steps)?;
    let outer_cfg = path.outer_base();
    let lam = BTreeMap::from([(CoalescencePath::COMPONENT, path.lambda)]);
    let q = second_variation_normal(
        &outer_cfg,
        g,
        &NormalPerturbation::FieldNormal(path.w.clone()),
        &lam,
        res,
    )?;
    let accel = crate::field::Scaled {
        inner: path.y.clone(),
        factor: s_second.value,
    };
    let v2 = second_order_volume(&outer_cfg, path.w.as_ref(), Some(&accel), res)?;
    let outer = q.value + path.lambda * v2;
    let outer_fd = fd_derivative(
        |t| path.outer_energy(t, g, res),
        2,
        Stencil::OneSided,
        steps,
    )?;
    let boundary_exact = -4.0 * PI;
    Ok(CoalescenceSecondVariation {
        inner_remainder: inner.value - boundary_exact,
        total: inner.value + outer,
        total_error: inner.error + (outer - outer_fd.value).abs(),
        inner,
        boundary,
        boundary_exact,
        q_outer: q.value,
        lambda: path.lambda,
        lambda_residual: path.lambda_residual,
        inner_volume_second,
        s_second,
        outer_volume_second: v2,
        outer,
        outer_fd,
    })
}
