//! One-parameter families of configurations: ambient flows, volume-corrected
//! maps, the radial flow used to coalesce touching sheets, and wedge
//! break-up.

mod coalescence;
mod wedge;

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use coalescence::{
    coalescence_path, cusp_pair_pieces, first_variation_coalescence, second_variation_coalescence,
    volume_rate, CoalescenceFirstVariation, CoalescencePath, CoalescenceSecondVariation,
    CuspPairConfig, CuspSide, SheetTerms,
};
pub use wedge::{
    arc_wedge, wedge_breakup_path, ArcSpec, WedgeBreakupPath, WedgeFirstVariation, WedgeSpec,
    WedgeSummary, WedgeTerm,
};

use crate::energy::{flux_volumes, ComponentId, Piece, PieceConfig};
use crate::error::{Error, Result};
use crate::field::{quintic_step, AmbientField, Support};
use crate::geometry::{MappedChart, Mat3, SpaceMap, SurfacePatch, Vec3};
use crate::ode::Dopri5;
use crate::quadrature::Resolution;

/// Radial cutoff `chi(r) = 1 - S((r - R0)/R0)`: one on `[0, R0]`, zero
/// beyond `2 R0`, with `|chi'| <= 1.875/R0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutoffChi {
    pub r0: f64,
}

impl CutoffChi {
    /// `(chi, chi', chi'')`.
    pub fn eval(&self, r: f64) -> (f64, f64, f64) {
        let (s, ds, dds) = quintic_step((r - self.r0) / self.r0);
        (1.0 - s, -ds / self.r0, -dds / (self.r0 * self.r0))
    }

    pub fn max_slope(&self) -> f64 {
        1.875 / self.r0
    }
}

/// Flow of the horizontal field `chi(r) ∂_r`, acting on the horizontal
/// radius only.
#[derive(Clone, Copy, Debug)]
pub struct RadialFlow {
    pub chi: CutoffChi,
    ode: Dopri5,
}

impl RadialFlow {
    pub fn new(chi: CutoffChi) -> Self {
        Self {
            chi,
            ode: Dopri5::with_tolerance(1e-14, 1e-16),
        }
    }

    /// Image radius after time `t` with `dρ/dr` and `d²ρ/dr²`.
    pub fn state(&self, r: f64, t: f64) -> Result<(f64, f64, f64)> {
        let r0 = self.chi.r0;
        if r >= 2.0 * r0 || t == 0.0 {
            return Ok((r, 1.0, 0.0));
        }
        if (t > 0.0 && r + t <= r0) || (t < 0.0 && r <= r0) {
            let rho = r + t;
            if rho < 0.0 {
                return Err(Error::Integrator {
                    start: [r, 0.0, 0.0],
                    reason: format!(
                        "radius {r} reaches the axis under the backward flow for time {t}"
                    ),
                });
            }
            return Ok((rho, 1.0, 0.0));
        }
        let chi = self.chi;
        let y = self
            .ode
            .integrate(
                |_, y: &[f64; 3]| {
                    let (c, dc, ddc) = chi.eval(y[0]);
                    [c, dc * y[1], ddc * y[1] * y[1] + dc * y[2]]
                },
                0.0,
                [r, 1.0, 0.0],
                t,
            )
            .map_err(|reason| Error::Integrator {
                start: [r, 0.0, 0.0],
                reason,
            })?;
        if y[0] <= 0.0 {
            return Err(Error::Integrator {
                start: [r, 0.0, 0.0],
                reason: "trajectory crossed the axis".into(),
            });
        }
        Ok((y[0], y[1], y[2]))
    }

    pub fn radius(&self, r: f64, t: f64) -> Result<f64> {
        Ok(self.state(r, t)?.0)
    }

    /// Applies the flow to a point of space.
    pub fn map(&self, x: &Vec3, t: f64) -> Result<Vec3> {
        let r = x.x.hypot(x.y);
        if r == 0.0 {
            return Err(Error::Invalid(
                "radial flow is undefined on the axis".into(),
            ));
        }
        let rho = self.radius(r, t)?;
        Ok(Vec3::new(x.x * rho / r, x.y * rho / r, x.z))
    }
}

/// Time-`t` flow of an ambient field, with its Jacobian from the
/// variational equation.
#[derive(Clone, Debug)]
pub struct FlowMap {
    pub field: Arc<dyn AmbientField>,
    pub t: f64,
    ode: Dopri5,
}

impl FlowMap {
    pub fn new(field: Arc<dyn AmbientField>, t: f64) -> Self {
        Self {
            field,
            t,
            ode: Dopri5::with_tolerance(1e-13, 1e-15),
        }
    }
}

impl SpaceMap for FlowMap {
    fn apply(&self, x: &Vec3) -> Result<(Vec3, Mat3)> {
        if self.t == 0.0 {
            return Ok((*x, Mat3::identity()));
        }
        if let Support::Ball { center, radius } = self.field.support() {
            // Points outside the closed support are fixed by the flow.
            if (x - Vec3::from(center)).norm() >= radius {
                return Ok((*x, Mat3::identity()));
            }
        }
        let mut y0 = [0.0; 12];
        y0[..3].copy_from_slice(x.as_slice());
        for i in 0..3 {
            y0[3 + 4 * i] = 1.0;
        }
        let f = &self.field;
        let y = self
            .ode
            .integrate(
                |_, y: &[f64; 12]| {
                    let p = Vec3::new(y[0], y[1], y[2]);
                    let v = f.value(&p);
                    let dx = f.jacobian(&p);
                    let j = Mat3::from_row_slice(&y[3..]);
                    let dj = dx * j;
                    let mut out = [0.0; 12];
                    out[..3].copy_from_slice(v.as_slice());
                    for r in 0..3 {
                        for c in 0..3 {
                            out[3 + 3 * r + c] = dj[(r, c)];
                        }
                    }
                    out
                },
                0.0,
                y0,
                self.t,
            )
            .map_err(|reason| Error::Integrator {
                start: [x.x, x.y, x.z],
                reason,
            })?;
        Ok((Vec3::new(y[0], y[1], y[2]), Mat3::from_row_slice(&y[3..])))
    }
}

/// `x + t X(x) + Σ s_l Y_l(x)`.
#[derive(Clone, Debug)]
pub struct AffineMap {
    pub t: f64,
    pub x: Arc<dyn AmbientField>,
    pub ys: Vec<(f64, Arc<dyn AmbientField>)>,
}

impl SpaceMap for AffineMap {
    fn apply(&self, p: &Vec3) -> Result<(Vec3, Mat3)> {
        let mut y = p + self.t * self.x.value(p);
        let mut j = Mat3::identity() + self.t * self.x.jacobian(p);
        for (s, f) in &self.ys {
            if *s != 0.0 {
                y += *s * f.value(p);
                j += *s * f.jacobian(p);
            }
        }
        Ok((y, j))
    }
}

fn mapped(piece: &Piece, map: Arc<dyn SpaceMap>) -> Piece {
    let patch = &piece.patch;
    let chart = MappedChart::new(patch.clone(), map);
    let mut np = SurfacePatch::explicit(patch.name.clone(), Arc::new(chart), patch.domain.clone());
    np.orientation = patch.orientation;
    Piece {
        patch: np,
        component: piece.component,
        role: piece.role,
    }
}

/// Describes a deformation family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathInfo {
    pub kind: String,
    /// Defined for `t >= 0` only.
    pub one_sided: bool,
    pub t_max: f64,
    pub correction: Option<String>,
}

/// A family of configurations `t -> E_t` with `E_0` the base configuration.
pub trait DeformationPath: Send + Sync {
    fn info(&self) -> PathInfo;
    fn config_at(&self, t: f64, res: &Resolution) -> Result<PieceConfig>;
}

/// Image of a configuration under the time-`t` flow of `X`.
pub fn flow_ambient(cfg: &PieceConfig, x: Arc<dyn AmbientField>, t: f64) -> PieceConfig {
    let map: Arc<dyn SpaceMap> = Arc::new(FlowMap::new(x, t));
    PieceConfig {
        name: cfg.name.clone(),
        pieces: cfg.pieces.iter().map(|p| mapped(p, map.clone())).collect(),
        window: cfg.window,
    }
}

/// Family `t -> flow_t(E)` of an ambient field.
pub struct FlowPath {
    pub base: PieceConfig,
    pub field: Arc<dyn AmbientField>,
}

impl DeformationPath for FlowPath {
    fn info(&self) -> PathInfo {
        PathInfo {
            kind: format!("flow of {}", self.field.label()),
            one_sided: false,
            t_max: f64::INFINITY,
            correction: None,
        }
    }

    fn config_at(&self, t: f64, _: &Resolution) -> Result<PieceConfig> {
        Ok(flow_ambient(&self.base, self.field.clone(), t))
    }
}

/// Pieces sharing one deformation `x + t X + Σ s_l Y_l`.
#[derive(Clone, Debug)]
pub struct CorrectionGroup {
    pub pieces: Vec<usize>,
    pub x: Arc<dyn AmbientField>,
    /// Indices into [`CorrectionSpec::ys`] acting on this group.
    pub ys: Vec<usize>,
}

/// Volume-correction fields, one per constrained component, and the
/// groups of pieces they act on.
#[derive(Clone, Debug)]
pub struct CorrectionSpec {
    pub groups: Vec<CorrectionGroup>,
    pub ys: Vec<(ComponentId, Arc<dyn AmbientField>)>,
}

impl CorrectionSpec {
    /// Applies the group maps at `(t, s)` to the matching pieces of `base`.
    pub fn apply(&self, base: &PieceConfig, t: f64, s: &[f64]) -> PieceConfig {
        let mut out = base.clone();
        for g in &self.groups {
            let map: Arc<dyn SpaceMap> = Arc::new(AffineMap {
                t,
                x: g.x.clone(),
                ys: g
                    .ys
                    .iter()
                    .map(|l| (s[*l], self.ys[*l].1.clone()))
                    .collect(),
            });
            for &i in &g.pieces {
                out.pieces[i] = mapped(&base.pieces[i], map.clone());
            }
        }
        out
    }

    /// Volumes after the maps and `∂V_{c_l}/∂s_m`, exact via `∫ Y_m · n`.
    fn volumes_and_jacobian(
        &self,
        base: &PieceConfig,
        t: f64,
        s: &[f64],
        res: &Resolution,
    ) -> Result<(Vec<f64>, DMatrix<f64>)> {
        let cfg = self.apply(base, t, s);
        let vols = flux_volumes(&cfg, res)?;
        let n = self.ys.len();
        let v: Vec<f64> = self
            .ys
            .iter()
            .map(|(c, _)| vols.get(c).copied().unwrap_or(0.0))
            .collect();
        let mut jac = DMatrix::zeros(n, n);
        for g in &self.groups {
            for &i in &g.pieces {
                let piece = &cfg.pieces[i];
                let basep = &base.pieces[i].patch;
                for &m in &g.ys {
                    let y = &self.ys[m].1;
                    let d = piece.patch.grid(res).try_integrate(|u, w| {
                        let p = basep.jet1(u, w)?.x;
                        let nn = piece.patch.node1(u, w)?;
                        Ok(y.value(&p).dot(&nn.n))
                    })?;
                    for (l, (c, _)) in self.ys.iter().enumerate() {
                        if *c == piece.component {
                            jac[(l, m)] += d;
                        }
                    }
                }
            }
        }
        Ok((v, jac))
    }

    /// Solves `V_c(t, s) = target_c` by damped Newton from `guess`.
    pub fn solve(
        &self,
        base: &PieceConfig,
        t: f64,
        targets: &BTreeMap<ComponentId, f64>,
        guess: &[f64],
        res: &Resolution,
    ) -> Result<Vec<f64>> {
        let n = self.ys.len();
        let target: Vec<f64> =
            self.ys
                .iter()
                .map(|(c, _)| {
                    targets.get(c).copied().ok_or_else(|| {
                        Error::Invalid(format!("no volume target for component {c}"))
                    })
                })
                .collect::<Result<_>>()?;
        let scale = target
            .iter()
            .fold(0.0f64, |a, b| a.max(b.abs()))
            .max(1e-300);
        let mut s = guess.to_vec();
        let (mut v, mut jac) = self.volumes_and_jacobian(base, t, &s, res)?;
        let resid = |v: &[f64]| {
            v.iter()
                .zip(&target)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        };
        let mut r = resid(&v);
        for _ in 0..40 {
            if r <= 1e-14 * scale {
                return Ok(s);
            }
            let rhs = DVector::from_iterator(n, v.iter().zip(&target).map(|(a, b)| b - a));
            let step = jac.clone().lu().solve(&rhs).ok_or_else(|| Error::Newton {
                t,
                reason: "singular volume Jacobian: correction fields do not change the volume"
                    .into(),
            })?;
            let mut damp = 1.0;
            loop {
                let trial: Vec<f64> = s
                    .iter()
                    .zip(step.iter())
                    .map(|(a, d)| a + damp * d)
                    .collect();
                let (tv, tj) = self.volumes_and_jacobian(base, t, &trial, res)?;
                let tr = resid(&tv);
                if tr < r || damp < 1e-3 {
                    s = trial;
                    v = tv;
                    jac = tj;
                    r = tr;
                    break;
                }
                damp *= 0.5;
            }
            if step.amax() * damp <= 1e-16 * (1.0 + s.iter().fold(0.0f64, |a, b| a.max(b.abs()))) {
                break;
            }
        }
        if r <= 1e-11 * scale {
            Ok(s)
        } else {
            Err(Error::Newton {
                t,
                reason: format!("volume residual {r:e} after Newton iterations"),
            })
        }
    }
}

/// Cache of solved correction parameters keyed by the bits of `t`.
#[derive(Debug, Default)]
pub(crate) struct SolveCache(Mutex<BTreeMap<u64, Vec<f64>>>);

impl SolveCache {
    pub(crate) fn get_or(&self, t: f64, f: impl FnOnce() -> Result<Vec<f64>>) -> Result<Vec<f64>> {
        if let Some(v) = self.0.lock().expect("cache poisoned").get(&t.to_bits()) {
            return Ok(v.clone());
        }
        let v = f()?;
        self.0
            .lock()
            .expect("cache poisoned")
            .insert(t.to_bits(), v.clone());
        Ok(v)
    }
}

/// `x + t X + Σ s_l(t) Y_l` with `s(t)` keeping every constrained
/// component volume fixed.
pub struct VolumePreservingPath {
    pub base: PieceConfig,
    pub spec: CorrectionSpec,
    pub targets: BTreeMap<ComponentId, f64>,
    cache: SolveCache,
}

impl VolumePreservingPath {
    /// Correction parameters at `t`.
    pub fn s_at(&self, t: f64, res: &Resolution) -> Result<Vec<f64>> {
        self.cache.get_or(t, || {
            let guess = vec![0.0; self.spec.ys.len()];
            if t == 0.0 {
                return Ok(guess);
            }
            self.spec.solve(&self.base, t, &self.targets, &guess, res)
        })
    }

    /// `s'(0) = -(∂V/∂s)^{-1} ∫ X·nu` from the linearised constraint.
    pub fn s_prime_at_zero(&self, res: &Resolution) -> Result<Vec<f64>> {
        let n = self.spec.ys.len();
        let (_, jac) = self
            .spec
            .volumes_and_jacobian(&self.base, 0.0, &vec![0.0; n], res)?;
        let mut dv = DVector::zeros(n);
        for g in &self.spec.groups {
            for &i in &g.pieces {
                let piece = &self.base.pieces[i];
                let d = crate::geometry::patch_flux(&piece.patch, res, |p| g.x.value(p))?;
                for (l, (c, _)) in self.spec.ys.iter().enumerate() {
                    if *c == piece.component {
                        dv[l] += d;
                    }
                }
            }
        }
        let sol = jac.lu().solve(&(-dv)).ok_or_else(|| Error::Newton {
            t: 0.0,
            reason: "singular volume Jacobian".into(),
        })?;
        Ok(sol.iter().copied().collect())
    }
}

impl DeformationPath for VolumePreservingPath {
    fn info(&self) -> PathInfo {
        PathInfo {
            kind: "volume-preserving affine family".into(),
            one_sided: false,
            t_max: f64::INFINITY,
            correction: Some(format!(
                "{} correction field(s), damped Newton",
                self.spec.ys.len()
            )),
        }
    }

    fn config_at(&self, t: f64, res: &Resolution) -> Result<PieceConfig> {
        let s = self.s_at(t, res)?;
        Ok(self.spec.apply(&self.base, t, &s))
    }
}

/// Family `x + t X + Σ s_l(t) Y_l` on all pieces, keeping the volume of
/// each component listed in `ys` fixed.
pub fn make_volume_preserving(
    cfg: &PieceConfig,
    x: Arc<dyn AmbientField>,
    ys: Vec<(ComponentId, Arc<dyn AmbientField>)>,
    res: &Resolution,
) -> Result<VolumePreservingPath> {
    crate::variation::check_support(cfg, x.as_ref())?;
    for (_, y) in &ys {
        crate::variation::check_support(cfg, y.as_ref())?;
    }
    let spec = CorrectionSpec {
        groups: vec![CorrectionGroup {
            pieces: (0..cfg.pieces.len()).collect(),
            x,
            ys: (0..ys.len()).collect(),
        }],
        ys,
    };
    let targets = flux_volumes(cfg, res)?;
    Ok(VolumePreservingPath {
        base: cfg.clone(),
        spec,
        targets,
        cache: SolveCache::default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cutoff_profile() {
        let c = CutoffChi { r0: 0.5 };
        assert_eq!(c.eval(0.3).0, 1.0);
        assert_eq!(c.eval(1.2).0, 0.0);
        assert!((c.eval(0.75).1.abs() - c.max_slope()).abs() < 1e-14);
        assert!(c.max_slope() <= 2.0 / c.r0);
    }

    #[test]
    fn radial_flow_semigroup_and_derivatives() {
        let f = RadialFlow::new(CutoffChi { r0: 0.1 });
        for &(r, s, t) in &[(0.05, 0.03, 0.04), (0.15, 0.02, 0.05), (0.09, 0.01, -0.02)] {
            let a = f.radius(f.radius(r, s).unwrap(), t).unwrap();
            let b = f.radius(r, s + t).unwrap();
            assert!((a - b).abs() < 1e-12, "{a} {b}");
        }
        let (r, t, h) = (0.12, 0.03, 1e-5);
        let (_, j, k) = f.state(r, t).unwrap();
        let jp = f.state(r + h, t).unwrap();
        let jm = f.state(r - h, t).unwrap();
        assert!((j - (jp.0 - jm.0) / (2.0 * h)).abs() < 1e-8);
        assert!((k - (jp.1 - jm.1) / (2.0 * h)).abs() < 1e-6);
    }
}
