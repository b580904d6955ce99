//! Break-up of wedges and cusps along a straight tip line.
//!
//! Each wedge is a cylindrical region over a curvilinear triangle in the
//! `xz`-plane: two circular arcs meeting at the tip `T`, closed by a chord
//! and by flat end caps at `y = ±L/2`. The tip line is the `y`-axis through
//! `T`. Wedge `k` is deformed by its own map `x + t X_k + s_k(t) Y_k`, where
//! `X_k` pushes the tip into the wedge and `Y_k` restores the volume.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{CorrectionGroup, CorrectionSpec, DeformationPath, PathInfo, SolveCache};
use crate::energy::{
    energy_value, flux_volumes, ComponentId, Piece, PieceConfig, Potential, Window,
};
use crate::error::{Error, Result};
use crate::field::{bump_line_integral, AmbientField, BumpField, NormalBumpField, NormalExtension};
use crate::geometry::{FnChart, Frame, LineProfile, SurfacePatch, Vec3};
use crate::quadrature::{Interval, ParamDomain, Resolution};
use crate::variation::{fd_derivative, variation_terms, FdEstimate, Stencil};

/// Circular arc `center + a (cos θ e_z + sin θ e_x)` in the `xz`-plane,
/// running from the tip angle to the end angle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArcSpec {
    /// `(x, z)` of the centre.
    pub center: [f64; 2],
    pub radius: f64,
    pub theta_tip: f64,
    pub theta_end: f64,
}

impl ArcSpec {
    fn center3(&self) -> Vec3 {
        Vec3::new(self.center[0], 0.0, self.center[1])
    }

    fn point(&self, theta: f64) -> Vec3 {
        self.center3() + self.radius * Vec3::new(theta.sin(), 0.0, theta.cos())
    }

    /// Unit tangent at the tip pointing along the arc.
    fn tip_tangent(&self) -> Vec3 {
        let th = self.theta_tip;
        let dir = (self.theta_end - self.theta_tip).signum();
        dir * Vec3::new(th.cos(), 0.0, -th.sin())
    }

    fn theta_at(&self, frac: f64) -> f64 {
        self.theta_tip + frac * (self.theta_end - self.theta_tip)
    }

    fn length(&self) -> f64 {
        self.radius * (self.theta_end - self.theta_tip).abs()
    }
}

/// One wedge component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WedgeSpec {
    pub name: String,
    pub arcs: [ArcSpec; 2],
    pub component: ComponentId,
}

impl WedgeSpec {
    fn tip(&self) -> Result<Vec3> {
        let a = self.arcs[0].point(self.arcs[0].theta_tip);
        let b = self.arcs[1].point(self.arcs[1].theta_tip);
        let scale = self.arcs[0].radius.max(self.arcs[1].radius);
        if (a - b).norm() > 1e-10 * scale {
            return Err(Error::Invalid(format!(
                "arcs of wedge {} do not meet at the tip: gap {:e}",
                self.name,
                (a - b).norm()
            )));
        }
        Ok(0.5 * (a + b))
    }

    /// Opening angle at the tip and the unit direction into the wedge.
    fn angle_and_direction(&self) -> Result<(f64, Vec3)> {
        let ta = self.arcs[0].tip_tangent();
        let tb = self.arcs[1].tip_tangent();
        let angle = ta.dot(&tb).clamp(-1.0, 1.0).acos();
        if angle >= std::f64::consts::PI - 1e-12 {
            return Err(Error::Unsupported(format!(
                "wedge {} has angle {angle}: flat or reflex tips have no interior bisector",
                self.name
            )));
        }
        let w = if angle < 1e-9 {
            ta
        } else {
            (ta + tb).normalize()
        };
        Ok((angle, w))
    }

    fn interior_point(&self) -> Vec3 {
        0.5 * (self.arcs[0].point(self.arcs[0].theta_at(0.5))
            + self.arcs[1].point(self.arcs[1].theta_at(0.5)))
    }
}

/// Interface and cap pieces of one wedge of length `2 half_length`.
///
/// `tip_breaks` and `y_breaks` are extra quadrature breakpoints, given as
/// arclength distances from the tip and as `y` values.
pub fn arc_wedge(
    spec: &WedgeSpec,
    half_length: f64,
    tip_breaks: &[f64],
    y_breaks: &[f64],
) -> Result<Vec<Piece>> {
    spec.tip()?;
    spec.angle_and_direction()?;
    let inside = spec.interior_point();
    let c = spec.component;
    let mut pieces = Vec::with_capacity(5);
    let yb: Vec<f64> = y_breaks
        .iter()
        .copied()
        .filter(|y| y.abs() < half_length)
        .collect();
    for (k, arc) in spec.arcs.iter().enumerate() {
        let dir = (arc.theta_end - arc.theta_tip).signum();
        let breaks: Vec<f64> = tip_breaks
            .iter()
            .filter(|d| **d > 0.0 && **d < arc.length())
            .map(|d| arc.theta_tip + dir * d / arc.radius)
            .collect();
        let (lo, hi) = if dir > 0.0 {
            (arc.theta_tip, arc.theta_end)
        } else {
            (arc.theta_end, arc.theta_tip)
        };
        let sheet = SurfacePatch::revolution(
            format!("{}-arc{k}", spec.name),
            Arc::new(LineProfile { radius: arc.radius }),
            Frame::y_axis(arc.center3()),
            ParamDomain::new(
                Interval::new(lo, hi)
                    .with_breaks(breaks)
                    .with_panels(panels_for(arc.length(), arc.radius)),
                Interval::new(-half_length, half_length)
                    .with_breaks(yb.clone())
                    .with_panels(panels_for(2.0 * half_length, arc.radius)),
            ),
        );
        pieces.push(Piece::interface(sheet.oriented_away_from(&inside)?, c));
    }
    let [a, b] = spec.arcs;
    let pa = a.point(a.theta_end);
    let pb = b.point(b.theta_end);
    let chord = SurfacePatch::explicit(
        format!("{}-chord", spec.name),
        Arc::new(FnChart {
            f: move |u: f64, v: f64| pa + u * (pb - pa) + v * Vec3::y(),
            step: 1e-3,
        }),
        ParamDomain::new(
            Interval::new(0.0, 1.0),
            Interval::new(-half_length, half_length),
        ),
    );
    pieces.push(Piece::cap(chord.oriented_away_from(&inside)?, c));
    for (label, y0) in [("end+", half_length), ("end-", -half_length)] {
        let cap = SurfacePatch::explicit(
            format!("{}-{label}", spec.name),
            Arc::new(FnChart {
                f: move |s: f64, tau: f64| {
                    (1.0 - tau) * a.point(a.theta_at(s))
                        + tau * b.point(b.theta_at(s))
                        + y0 * Vec3::y()
                },
                step: 1e-3,
            }),
            ParamDomain::new(
                Interval::new(0.0, 1.0).with_panels(2),
                Interval::new(0.0, 1.0),
            ),
        );
        pieces.push(Piece::cap(cap.oriented_away_from(&inside)?, c));
    }
    Ok(pieces)
}

/// Level-0 panels over `length`, about one per half radius of curvature.
fn panels_for(length: f64, radius: f64) -> usize {
    (2.0 * length / radius).ceil().max(2.0) as usize
}

const PIECES_PER_WEDGE: usize = 5;

/// Per-wedge data of a break-up family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WedgeSummary {
    pub name: String,
    pub component: ComponentId,
    /// Opening angle at the tip; zero for a cusp.
    pub angle: f64,
    pub tip: [f64; 3],
    pub direction: [f64; 3],
    /// Radius of the volume-correction bump.
    pub correction_radius: f64,
}

/// Break-up family `t -> E_t`, `t >= 0`, for a set of wedges sharing or
/// not sharing a tip line.
pub struct WedgeBreakupPath {
    pub base: PieceConfig,
    pub wedges: Vec<WedgeSummary>,
    pub bump_radius: f64,
    pub t_steps: Vec<f64>,
    spec: CorrectionSpec,
    targets: BTreeMap<ComponentId, f64>,
    cache: SolveCache,
}

impl std::fmt::Debug for WedgeBreakupPath {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WedgeBreakupPath")
            .field("wedges", &self.wedges)
            .finish()
    }
}

impl WedgeBreakupPath {
    pub fn s_at(&self, t: f64, res: &Resolution) -> Result<Vec<f64>> {
        if t < 0.0 {
            return Err(Error::Invalid(format!(
                "break-up family is one-sided; got t = {t}"
            )));
        }
        self.cache.get_or(t, || {
            let guess = vec![0.0; self.spec.ys.len()];
            if t == 0.0 {
                return Ok(guess);
            }
            self.spec.solve(&self.base, t, &self.targets, &guess, res)
        })
    }

    /// `∫_T b` along the tip line.
    pub fn tip_bump_integral(&self) -> f64 {
        self.bump_radius * bump_line_integral()
    }

    /// Predicted first variation `-Σ 2 cos(θ_k/2) ∫_T b`.
    pub fn predicted(&self) -> f64 {
        self.wedges
            .iter()
            .map(|w| -2.0 * (0.5 * w.angle).cos() * self.tip_bump_integral())
            .sum()
    }
}

impl DeformationPath for WedgeBreakupPath {
    fn info(&self) -> PathInfo {
        PathInfo {
            kind: "wedge break-up".into(),
            one_sided: true,
            t_max: 0.25 * self.bump_radius,
            correction: Some(format!(
                "{} per-wedge volume correction(s)",
                self.wedges.len()
            )),
        }
    }

    fn config_at(&self, t: f64, res: &Resolution) -> Result<PieceConfig> {
        let s = self.s_at(t, res)?;
        Ok(self.spec.apply(&self.base, t, &s))
    }
}

fn min_node_distance(pieces: &[&Piece], p: &Vec3) -> Result<f64> {
    let coarse = Resolution::with_order(1, 8);
    let mut d = f64::INFINITY;
    for piece in pieces {
        let patch = &piece.patch;
        for n in &patch.grid(&coarse).nodes {
            d = d.min((patch.jet1(n[0], n[1])?.x - p).norm());
        }
    }
    Ok(d)
}

/// Builds the break-up family: `X_k = b(|x - T|/r) w_k` with `r = bump_radius`
/// and a normal bump `Y_k` in the middle of the first arc of wedge `k`.
pub fn wedge_breakup_path(
    specs: &[WedgeSpec],
    half_length: f64,
    bump_radius: f64,
    res: &Resolution,
) -> Result<WedgeBreakupPath> {
    if specs.is_empty() {
        return Err(Error::Invalid("no wedges given".into()));
    }
    if bump_radius >= half_length {
        return Err(Error::Invalid("tip bump reaches the end caps".into()));
    }
    let mut comps: Vec<ComponentId> = specs.iter().map(|s| s.component).collect();
    comps.sort_unstable();
    comps.dedup();
    if comps.len() != specs.len() {
        return Err(Error::Invalid("each wedge needs its own component".into()));
    }
    let mids: Vec<Vec3> = specs
        .iter()
        .map(|s| s.arcs[0].point(s.arcs[0].theta_at(0.5)))
        .collect();
    let build = |y_radii: &[f64]| -> Result<Vec<Piece>> {
        let mut pieces = Vec::new();
        let mut y_breaks = vec![-bump_radius, bump_radius];
        for r in y_radii {
            y_breaks.extend([-r, *r]);
        }
        for (k, s) in specs.iter().enumerate() {
            let mid = 0.5 * s.arcs[0].length();
            let mut tip_breaks = vec![bump_radius, mid];
            if let Some(r) = y_radii.get(k) {
                tip_breaks.extend([mid - r, mid + r]);
            }
            pieces.extend(arc_wedge(s, half_length, &tip_breaks, &y_breaks)?);
        }
        Ok(pieces)
    };
    // Correction bumps: centred mid-arc, clear of the caps and of every
    // other component. They may move both arcs of their own wedge.
    let first = build(&[])?;
    let mut y_radii = Vec::with_capacity(specs.len());
    for (k, s) in specs.iter().enumerate() {
        let own = k * PIECES_PER_WEDGE..(k + 1) * PIECES_PER_WEDGE;
        let blockers: Vec<&Piece> = first
            .iter()
            .enumerate()
            .filter(|(i, _)| !own.contains(i) || *i >= own.start + 2)
            .map(|(_, p)| p)
            .collect();
        let tip = s.tip()?;
        let clearance = min_node_distance(&blockers, &mids[k])?
            .min((mids[k] - tip).norm() - bump_radius)
            .min(half_length);
        let r = (0.45 * clearance).min(0.25 * s.arcs[0].length());
        if !(r > 0.0) {
            return Err(Error::Invalid(format!(
                "no room for a volume correction on wedge {}",
                s.name
            )));
        }
        y_radii.push(r);
    }
    let pieces = build(&y_radii)?;
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in &pieces {
        for n in &p.patch.grid(&Resolution::with_order(0, 4)).nodes {
            let x = p.patch.jet1(n[0], n[1])?.x;
            for i in 0..3 {
                lo[i] = lo[i].min(x[i]);
                hi[i] = hi[i].max(x[i]);
            }
        }
    }
    let pad = bump_radius;
    let window = Window::Box {
        min: [lo[0] - pad, -half_length, lo[2] - pad],
        max: [hi[0] + pad, half_length, hi[2] + pad],
    };
    let base = PieceConfig::new("wedges", pieces, window);

    let mut groups = Vec::new();
    let mut ys: Vec<(ComponentId, Arc<dyn AmbientField>)> = Vec::new();
    let mut wedges = Vec::new();
    for (k, s) in specs.iter().enumerate() {
        let tip = s.tip()?;
        let (angle, w) = s.angle_and_direction()?;
        let own: Vec<usize> = (k * PIECES_PER_WEDGE..(k + 1) * PIECES_PER_WEDGE).collect();
        // The tip bump may only touch the two arcs of its own wedge.
        let caps: Vec<&Piece> = own[2..].iter().map(|i| &base.pieces[*i]).collect();
        if min_node_distance(&caps, &tip)? <= bump_radius {
            return Err(Error::Invalid(format!(
                "tip bump of radius {bump_radius} reaches the caps of wedge {}",
                s.name
            )));
        }
        let x: Arc<dyn AmbientField> = Arc::new(BumpField {
            center: tip,
            radius: bump_radius,
            direction: w,
        });
        let mid = mids[k];
        let radius = y_radii[k];
        let arc_sign = base.pieces[own[0]].patch.orientation.sign();
        ys.push((
            s.component,
            Arc::new(NormalBumpField {
                center: mid,
                radius,
                amplitude: 1.0,
                normal: NormalExtension::Radial {
                    center: s.arcs[0].center3() + mid.y * Vec3::y(),
                    sign: arc_sign,
                },
            }),
        ));
        groups.push(CorrectionGroup {
            pieces: own,
            x,
            ys: vec![k],
        });
        wedges.push(WedgeSummary {
            name: s.name.clone(),
            component: s.component,
            angle,
            tip: [tip.x, tip.y, tip.z],
            direction: [w.x, w.y, w.z],
            correction_radius: radius,
        });
    }
    for g in &groups {
        crate::variation::check_support(&base, g.x.as_ref())?;
    }
    for (_, y) in &ys {
        crate::variation::check_support(&base, y.as_ref())?;
    }
    let targets = flux_volumes(&base, res)?;
    let h = 0.02 * bump_radius;
    Ok(WedgeBreakupPath {
        base,
        wedges,
        bump_radius,
        t_steps: vec![h, h / 2.0, h / 4.0, h / 8.0],
        spec: CorrectionSpec { groups, ys },
        targets,
        cache: SolveCache::default(),
    })
}

/// Per-wedge first-variation terms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WedgeTerm {
    pub component: ComponentId,
    pub angle: f64,
    /// `δE_k(X_k) + s_k'(0) δE_k(Y_k)`.
    pub analytic: f64,
    pub predicted: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WedgeFirstVariation {
    pub analytic: f64,
    pub fd: FdEstimate,
    pub predicted: f64,
    pub wedges: Vec<WedgeTerm>,
}

impl WedgeBreakupPath {
    /// Analytic first variation, its one-sided difference quotient, and the
    /// tip-line prediction.
    pub fn first_variation(&self, g: &Potential, res: &Resolution) -> Result<WedgeFirstVariation> {
        let mut terms = Vec::new();
        for (k, w) in self.wedges.iter().enumerate() {
            let sub = self.base.filtered(|p| p.component == w.component);
            let group = &self.spec.groups[k];
            let tx = variation_terms(&sub, g, group.x.as_ref(), res)?[&w.component];
            let ty = variation_terms(&sub, g, self.spec.ys[k].1.as_ref(), res)?[&w.component];
            if ty.volume.abs() <= 1e-12 * ty.abs_volume.max(1e-300) {
                return Err(Error::IllPosed {
                    component: w.component,
                    reason: "volume correction does not change the volume".into(),
                });
            }
            let s1 = -tx.volume / ty.volume;
            terms.push(WedgeTerm {
                component: w.component,
                angle: w.angle,
                analytic: tx.energy() + s1 * ty.energy(),
                predicted: -2.0 * (0.5 * w.angle).cos() * self.tip_bump_integral(),
            });
        }
        let fd = fd_derivative(
            |t| energy_value(&self.config_at(t, res)?, g, res),
            1,
            Stencil::OneSided,
            &self.t_steps,
        )?;
        Ok(WedgeFirstVariation {
            analytic: terms.iter().map(|w| w.analytic).sum(),
            predicted: terms.iter().map(|w| w.predicted).sum(),
            fd,
            wedges: terms,
        })
    }
}
