//! Canned configurations, each bundled with the checks it is expected to
//! pass, and the check runner.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::deformation::{
    coalescence_path, cusp_pair_pieces, first_variation_coalescence, flow_ambient,
    make_volume_preserving, second_variation_coalescence, volume_rate, wedge_breakup_path, ArcSpec,
    CuspPairConfig, DeformationPath, WedgeSpec,
};
use crate::energy::{
    component_volumes, energy_value, flux_volumes, potential_eval, ComponentId, Piece, PieceConfig,
    Poly3, Potential, Window,
};
use crate::error::{Error, Result};
use crate::field::{random_poly_bump, AmbientField, BumpField, Dilation, FlowAcceleration};
use crate::geometry::{
    delaunay_unduloid, patch_area, sphere, FnChart, Frame, LineProfile, SurfacePatch, Vec3,
};
use crate::quadrature::{Interval, ParamDomain, Resolution};
use crate::variation::{
    fd_derivative, first_variation_ambient, lagrange_multiplier, second_variation_ambient,
    second_variation_normal, stationarity_defect, variation_terms, NormalPerturbation, Stencil,
};

/// Shape of the two touching sheets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapShape {
    /// Spherical caps of radius `1/(2 alpha)`: stationary.
    Sphere,
    /// `∓ alpha r^2`: not stationary, used for the radial-flow asymptotics.
    Paraboloid,
}

/// Scenario family with its parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scenario", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScenarioKind {
    Sphere {
        radius: f64,
    },
    Cylinder {
        radius: f64,
        length: f64,
    },
    /// Two solid cylinders of equal radius touching along a line.
    TouchingHalfCylinders {
        radius: f64,
        length: f64,
    },
    /// Two bodies whose boundaries touch tangentially at one point.
    TouchingCaps {
        alpha: f64,
        r_window: f64,
        shape: CapShape,
        /// Cutoff radii `R0` as fractions of the window radius.
        r0_fractions: Vec<f64>,
    },
    /// Three lens-shaped wedges cut out by three circles through a point.
    TripleWedge {
        radius: f64,
        length: f64,
    },
    TwoBalls {
        r1: f64,
        r2: f64,
        separation: f64,
    },
    DelaunayNeck {
        neck: f64,
        h: f64,
        extent: f64,
    },
}

/// Names accepted by [`ScenarioKind::default_for`].
pub const SCENARIO_NAMES: [&str; 7] = [
    "sphere",
    "cylinder",
    "touching_half_cylinders",
    "touching_caps",
    "triple_wedge",
    "two_balls",
    "delaunay_neck",
];

impl ScenarioKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Sphere { .. } => "sphere",
            Self::Cylinder { .. } => "cylinder",
            Self::TouchingHalfCylinders { .. } => "touching_half_cylinders",
            Self::TouchingCaps { .. } => "touching_caps",
            Self::TripleWedge { .. } => "triple_wedge",
            Self::TwoBalls { .. } => "two_balls",
            Self::DelaunayNeck { .. } => "delaunay_neck",
        }
    }

    /// Documented default parameters.
    pub fn default_for(name: &str) -> Result<Self> {
        Ok(match name {
            "sphere" => Self::Sphere { radius: 1.0 },
            "cylinder" => Self::Cylinder {
                radius: 1.0,
                length: 4.0,
            },
            "touching_half_cylinders" => Self::TouchingHalfCylinders {
                radius: 1.0,
                length: 4.0,
            },
            "touching_caps" => Self::TouchingCaps {
                alpha: 0.05,
                r_window: 1.0,
                shape: CapShape::Sphere,
                r0_fractions: vec![1.0 / 6.0, 1.0 / 12.0, 1.0 / 24.0, 1.0 / 48.0],
            },
            "triple_wedge" => Self::TripleWedge {
                radius: 1.0,
                length: 2.0,
            },
            "two_balls" => Self::TwoBalls {
                r1: 1.0,
                r2: 2.0,
                separation: 1.0,
            },
            "delaunay_neck" => Self::DelaunayNeck {
                neck: 0.5,
                h: 1.0,
                extent: 3.0,
            },
            other => {
                return Err(Error::Invalid(format!(
                    "unknown scenario `{other}`; known: {}",
                    SCENARIO_NAMES.join(", ")
                )))
            }
        })
    }

    /// Positive scalar parameters by name.
    pub fn params(&self) -> BTreeMap<&'static str, f64> {
        match self {
            Self::Sphere { radius } => BTreeMap::from([("radius", *radius)]),
            Self::Cylinder { radius, length }
            | Self::TouchingHalfCylinders { radius, length }
            | Self::TripleWedge { radius, length } => {
                BTreeMap::from([("radius", *radius), ("length", *length)])
            }
            Self::TouchingCaps {
                alpha, r_window, ..
            } => BTreeMap::from([("alpha", *alpha), ("r_window", *r_window)]),
            Self::TwoBalls { r1, r2, separation } => {
                BTreeMap::from([("r1", *r1), ("r2", *r2), ("separation", *separation)])
            }
            Self::DelaunayNeck { neck, h, extent } => {
                BTreeMap::from([("neck", *neck), ("h", *h), ("extent", *extent)])
            }
        }
    }

    /// Rejects non-positive parameters and cutoff fractions outside `(0, 1/2)`.
    pub fn validate(&self) -> Result<()> {
        for (k, v) in self.params() {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Invalid(format!(
                    "{}: parameter `{k}` must be positive, got {v}",
                    self.name()
                )));
            }
        }
        if let Self::TouchingCaps { r0_fractions, .. } = self {
            if r0_fractions.is_empty() || r0_fractions.iter().any(|f| !(*f > 0.0 && *f < 0.5)) {
                return Err(Error::Invalid(
                    "touching_caps: R0 fractions must lie in (0, 1/2)".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Expected behaviour attached to a scenario.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    /// Area, volume and curvatures against closed forms.
    ClosedForm,
    /// Multiplier estimate and `δE - λ δV` over seeded fields.
    Stationarity {
        fields: usize,
    },
    /// Jacobi form on seeded mean-free normal perturbations.
    AmbientStability {
        samples: usize,
    },
    /// Jacobi form on degree-one and degree-two spherical harmonics.
    SphereHarmonics,
    /// Analytic variations against difference quotients along flows.
    FdOracle {
        fields: usize,
    },
    /// One-sided first variation of the wedge break-up family.
    Breakup,
    /// First and second variation of the coalescence family over the `R0` sweep.
    Coalescence,
    MeanCurvatureConstancy,
    CurvatureSupremum,
    WedgeAngles,
    /// Mass transfer between drops under one joint volume constraint.
    JointConstraintControl,
    /// Volume along every volume-preserving family.
    VolumeDrift,
}

impl Check {
    pub fn id(&self) -> &'static str {
        match self {
            Self::ClosedForm => "closed_form",
            Self::Stationarity { .. } => "stationarity",
            Self::AmbientStability { .. } => "stability",
            Self::SphereHarmonics => "sphere_harmonics",
            Self::FdOracle { .. } => "fd_oracle",
            Self::Breakup => "breakup",
            Self::Coalescence => "coalescence",
            Self::MeanCurvatureConstancy => "mean_curvature_constancy",
            Self::CurvatureSupremum => "curvature_supremum",
            Self::WedgeAngles => "wedge_angles",
            Self::JointConstraintControl => "joint_constraint_control",
            Self::VolumeDrift => "volume_drift",
        }
    }
}

/// Tolerances of the checks; every field can be overridden from a run
/// configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub closed_form: f64,
    pub multiplier: f64,
    pub stationarity: f64,
    pub stability: f64,
    pub fd_relative: f64,
    pub fd_order: f64,
    pub breakup_fd: f64,
    pub breakup_prediction: f64,
    pub boundary: f64,
    pub first_variation: f64,
    pub curvature_constancy: f64,
    pub volume_drift: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            closed_form: 1e-8,
            multiplier: 1e-5,
            stationarity: 1e-5,
            stability: 1e-4,
            fd_relative: 1e-4,
            fd_order: 1.9,
            breakup_fd: 0.05,
            breakup_prediction: 1e-6,
            boundary: 1e-8,
            first_variation: 1e-5,
            curvature_constancy: 1e-6,
            volume_drift: 1e-9,
        }
    }
}

/// How a measured value is compared with its expectation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// `|m - e| <= tol |e|`.
    Relative,
    /// `|m - e| <= tol`.
    Absolute,
    /// `m <= e + tol`.
    AtMost,
    /// `m >= e - tol`.
    AtLeast,
    /// `m < e`.
    Below,
    /// Diagnostic value; always passes.
    Report,
}

impl Comparison {
    pub fn holds(self, measured: f64, expected: f64, tol: f64) -> bool {
        if self == Self::Report {
            return true;
        }
        measured.is_finite()
            && match self {
                Self::Relative => (measured - expected).abs() <= tol * expected.abs(),
                Self::Absolute => (measured - expected).abs() <= tol,
                Self::AtMost => measured <= expected + tol,
                Self::AtLeast => measured >= expected - tol,
                Self::Below => measured < expected,
                Self::Report => true,
            }
    }
}

/// Outcome of one check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub check_id: String,
    /// Name and value of the swept parameter this record belongs to.
    pub param: Option<String>,
    pub value: Option<f64>,
    pub measured: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub comparison: Comparison,
    pub pass: bool,
    pub metadata: BTreeMap<String, String>,
}

impl CheckRecord {
    pub fn new(
        check_id: impl Into<String>,
        measured: f64,
        expected: f64,
        tolerance: f64,
        comparison: Comparison,
    ) -> Self {
        Self {
            check_id: check_id.into(),
            param: None,
            value: None,
            measured,
            expected,
            tolerance,
            comparison,
            pass: comparison.holds(measured, expected, tolerance),
            metadata: BTreeMap::new(),
        }
    }

    pub fn at(mut self, param: &str, value: f64) -> Self {
        self.param = Some(param.into());
        self.value = Some(value);
        self
    }

    pub fn meta(mut self, key: &str, value: impl ToString) -> Self {
        self.metadata.insert(key.into(), value.to_string());
        self
    }

    /// Whether the stored pass flag agrees with the stored numbers.
    pub fn is_consistent(&self) -> bool {
        self.pass
            == self
                .comparison
                .holds(self.measured, self.expected, self.tolerance)
    }
}

#[derive(Clone, Debug)]
struct BreakupData {
    wedges: Vec<WedgeSpec>,
    half_length: f64,
    bump_radius: f64,
}

/// A configuration with its potential, expected multipliers and checks.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub config: PieceConfig,
    pub potential: Potential,
    /// Declared multiplier per component.
    pub lambda: BTreeMap<ComponentId, f64>,
    pub checks: Vec<Check>,
    /// Support radius of sampled fields.
    pub field_radius: f64,
    /// Base step of difference quotients; the family default when unset.
    pub t_step: Option<f64>,
    pub tolerances: Tolerances,
    /// Line through the junction, kept out of stability samples.
    tip_line: Option<(Vec3, f64)>,
    breakup: Option<BreakupData>,
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    /// Overrides the declared multiplier of one component.
    pub fn with_lambda(mut self, component: ComponentId, lambda: f64) -> Self {
        self.lambda.insert(component, lambda);
        self
    }

    pub fn with_tolerances(mut self, tol: Tolerances) -> Self {
        self.tolerances = tol;
        self
    }

    pub fn with_t_step(mut self, h: f64) -> Self {
        self.t_step = Some(h);
        self
    }

    pub fn build(kind: &ScenarioKind) -> Result<Self> {
        kind.validate()?;
        match kind {
            ScenarioKind::Sphere { radius } => scenario_sphere(*radius),
            ScenarioKind::Cylinder { radius, length } => scenario_cylinder(*radius, *length),
            ScenarioKind::TouchingHalfCylinders { radius, length } => {
                scenario_touching_half_cylinders(*radius, *length)
            }
            ScenarioKind::TouchingCaps {
                alpha,
                r_window,
                shape,
                r0_fractions,
            } => scenario_touching_caps_with(*alpha, *r_window, *shape, r0_fractions.clone()),
            ScenarioKind::TripleWedge { radius, length } => scenario_triple_wedge(*radius, *length),
            ScenarioKind::TwoBalls { r1, r2, separation } => {
                scenario_two_balls(*r1, *r2, *separation)
            }
            ScenarioKind::DelaunayNeck { neck, h, extent } => {
                scenario_delaunay_neck(*neck, *h, *extent)
            }
        }
    }

    fn new(
        kind: ScenarioKind,
        config: PieceConfig,
        lambda: BTreeMap<ComponentId, f64>,
        field_radius: f64,
    ) -> Self {
        Self {
            kind,
            config,
            potential: Potential::Zero,
            lambda,
            checks: Vec::new(),
            field_radius,
            t_step: None,
            tolerances: Tolerances::default(),
            tip_line: None,
            breakup: None,
        }
    }
}

fn ambient_checks() -> Vec<Check> {
    vec![
        Check::Stationarity { fields: 20 },
        Check::AmbientStability { samples: 50 },
        Check::FdOracle { fields: 2 },
        Check::VolumeDrift,
    ]
}

/// Sphere whose grid is refined so that bumps of radius `field_radius`
/// stay resolved.
fn refined_sphere(name: &str, c: Vec3, radius: f64, field_radius: f64) -> SurfacePatch {
    let mut p = sphere(name, c, radius);
    let k = (radius / field_radius).ceil().max(1.0) as usize;
    p.domain.u.base_panels *= k;
    p.domain.v.base_panels *= k;
    p
}

/// Round ball of radius `r`.
pub fn scenario_sphere(radius: f64) -> Result<Scenario> {
    let kind = ScenarioKind::Sphere { radius };
    kind.validate()?;
    let cfg = PieceConfig::new(
        "sphere",
        vec![Piece::interface(
            refined_sphere("sphere", Vec3::zeros(), radius, 0.5 * radius),
            0,
        )],
        Window::Everywhere,
    );
    let mut s = Scenario::new(kind, cfg, BTreeMap::from([(0, 2.0 / radius)]), 0.5 * radius);
    s.checks = vec![
        Check::ClosedForm,
        Check::CurvatureSupremum,
        Check::MeanCurvatureConstancy,
        Check::SphereHarmonics,
    ];
    s.checks.extend(ambient_checks());
    Ok(s)
}

fn cylinder_sheet(name: &str, radius: f64, frame: Frame, half_length: f64) -> Result<SurfacePatch> {
    SurfacePatch::revolution(
        name,
        Arc::new(LineProfile { radius }),
        frame,
        ParamDomain::new(
            Interval::periodic(0.0, 2.0 * PI),
            Interval::new(-half_length, half_length)
                .with_panels(((2.0 * half_length / radius).ceil() as usize).max(1)),
        ),
    )
    .oriented_away_from(&frame.origin)
}

/// Round cylinder of radius `a` about the `z`-axis, cut by the window at
/// `|z| = L/2`.
pub fn scenario_cylinder(radius: f64, length: f64) -> Result<Scenario> {
    let kind = ScenarioKind::Cylinder { radius, length };
    kind.validate()?;
    let h = 0.5 * length;
    let w = 4.0 * radius;
    let cfg = PieceConfig::new(
        "cylinder",
        vec![Piece::interface(
            cylinder_sheet("cylinder", radius, Frame::standard(), h)?,
            0,
        )],
        Window::Box {
            min: [-w, -w, -h],
            max: [w, w, h],
        },
    );
    let mut s = Scenario::new(
        kind,
        cfg,
        BTreeMap::from([(0, 1.0 / radius)]),
        0.5 * radius.min(h),
    );
    s.checks = vec![Check::ClosedForm, Check::MeanCurvatureConstancy];
    s.checks.extend(ambient_checks());
    Ok(s)
}

/// Flat disc in the plane `y = y0` about `center`, as a window cap.
fn end_disc(name: &str, center: Vec3, radius: f64, y0: f64) -> Result<SurfacePatch> {
    let c = center;
    SurfacePatch::explicit(
        name,
        Arc::new(FnChart {
            f: move |r: f64, th: f64| Vec3::new(c.x + r * th.sin(), y0, c.z + r * th.cos()),
            step: 1e-3 * radius,
        }),
        ParamDomain::new(
            Interval::new(0.0, radius),
            Interval::periodic(0.0, 2.0 * PI).with_panels(1),
        ),
    )
    .oriented_away_from(&Vec3::new(c.x, 0.0, c.z))
}

/// Two solid cylinders of radius `a` along `y`, centred at `z = ±a`, so that
/// they touch along the `y`-axis; the window cuts them at `|y| = L/2`.
pub fn scenario_touching_half_cylinders(radius: f64, length: f64) -> Result<Scenario> {
    let kind = ScenarioKind::TouchingHalfCylinders { radius, length };
    kind.validate()?;
    let a = radius;
    let h = 0.5 * length;
    let mut pieces = Vec::new();
    for (c, z) in [(0u32, -a), (1, a)] {
        let origin = Vec3::new(0.0, 0.0, z);
        pieces.push(Piece::interface(
            cylinder_sheet(&format!("cylinder{c}"), a, Frame::y_axis(origin), h)?,
            c,
        ));
        for y0 in [-h, h] {
            pieces.push(Piece::cap(
                end_disc(&format!("cylinder{c}-end"), origin, a, y0)?,
                c,
            ));
        }
    }
    let cfg = PieceConfig::new(
        "touching half cylinders",
        pieces,
        Window::Box {
            min: [-4.0 * a, -h, -4.0 * a],
            max: [4.0 * a, h, 4.0 * a],
        },
    );
    // The gap between the cylinders has two cusps along the contact line.
    let theta_c = 0.6;
    let cusp = |name: &str, component: ComponentId, sign: f64| WedgeSpec {
        name: name.into(),
        arcs: [
            ArcSpec {
                center: [0.0, -a],
                radius: a,
                theta_tip: 0.0,
                theta_end: sign * theta_c,
            },
            ArcSpec {
                center: [0.0, a],
                radius: a,
                theta_tip: PI,
                theta_end: PI - sign * theta_c,
            },
        ],
        component,
    };
    let mut s = Scenario::new(
        kind,
        cfg,
        BTreeMap::from([(0, 1.0 / a), (1, 1.0 / a)]),
        0.5 * a.min(h),
    );
    s.breakup = Some(BreakupData {
        wedges: vec![cusp("right-cusp", 0, 1.0), cusp("left-cusp", 1, -1.0)],
        half_length: h,
        bump_radius: 0.2 * a.min(h),
    });
    s.checks = vec![Check::WedgeAngles, Check::Breakup];
    s.checks.extend(ambient_checks());
    Ok(s)
}

/// Touching spherical caps with curvature parameter `alpha` in the window
/// of radius `R`, with the default `R0` sweep.
pub fn scenario_touching_caps(alpha: f64, r_window: f64) -> Result<Scenario> {
    scenario_touching_caps_with(
        alpha,
        r_window,
        CapShape::Sphere,
        vec![1.0 / 6.0, 1.0 / 12.0, 1.0 / 24.0, 1.0 / 48.0],
    )
}

fn cusp_config(alpha: f64, r_window: f64, shape: CapShape, r0: f64) -> CuspPairConfig {
    match shape {
        CapShape::Sphere => CuspPairConfig::spherical_caps(alpha, r_window, r0),
        CapShape::Paraboloid => CuspPairConfig::paraboloids(alpha, r_window, r0),
    }
}

fn scenario_touching_caps_with(
    alpha: f64,
    r_window: f64,
    shape: CapShape,
    r0_fractions: Vec<f64>,
) -> Result<Scenario> {
    let kind = ScenarioKind::TouchingCaps {
        alpha,
        r_window,
        shape,
        r0_fractions: r0_fractions.clone(),
    };
    kind.validate()?;
    let smallest = r0_fractions.iter().copied().fold(f64::INFINITY, f64::min) * r_window;
    let mut cfg = cusp_pair_pieces(&cusp_config(alpha, r_window, shape, smallest))?;
    // The coalescence integrands are axisymmetric, ambient test fields are
    // not: refine the sheets in angle for the latter.
    for p in cfg.pieces.iter_mut().filter(|p| p.is_interface()) {
        let k = if p.patch.name.ends_with("mid") { 8 } else { 2 };
        p.patch.domain.v.base_panels *= k;
    }
    let lambda = match shape {
        CapShape::Sphere => 4.0 * alpha,
        CapShape::Paraboloid => f64::NAN,
    };
    let mut s = Scenario::new(kind, cfg, BTreeMap::from([(0, lambda)]), 0.4 * r_window);
    s.checks = match shape {
        CapShape::Sphere => {
            let mut c = ambient_checks();
            c.insert(0, Check::Coalescence);
            c
        }
        CapShape::Paraboloid => vec![Check::Coalescence, Check::VolumeDrift],
    };
    Ok(s)
}

/// Circles of radius `a` centred at the vertices of an equilateral triangle
/// and passing through its centre; the three lenses near the common point,
/// extruded along `y` over length `L`.
pub fn scenario_triple_wedge(radius: f64, length: f64) -> Result<Scenario> {
    let kind = ScenarioKind::TripleWedge { radius, length };
    kind.validate()?;
    let a = radius;
    let h = 0.5 * length;
    let centers: Vec<[f64; 2]> = [90.0f64, 210.0, 330.0]
        .iter()
        .map(|d| [a * d.to_radians().cos(), a * d.to_radians().sin()])
        .collect();
    let tip_angle = |i: usize| (-centers[i][0]).atan2(-centers[i][1]);
    // Arc of circle i inside circle j, from the common point towards the
    // far vertex, cut at 9/10 of its length.
    let arc = |i: usize, j: usize| {
        let t0 = tip_angle(i);
        let far = centers[j][0].atan2(centers[j][1]);
        let d = (far - t0 + PI).rem_euclid(2.0 * PI) - PI;
        ArcSpec {
            center: centers[i],
            radius: a,
            theta_tip: t0,
            theta_end: t0 + 0.9 * d,
        }
    };
    let wedges: Vec<WedgeSpec> = [(0usize, 1usize), (1, 2), (2, 0)]
        .iter()
        .enumerate()
        .map(|(k, (i, j))| WedgeSpec {
            name: format!("lens{k}"),
            arcs: [arc(*i, *j), arc(*j, *i)],
            component: k as ComponentId,
        })
        .collect();
    let mut pieces = Vec::new();
    for w in &wedges {
        pieces.extend(crate::deformation::arc_wedge(w, h, &[], &[])?);
    }
    let half_width = 0.55 * a;
    let window = Window::Box {
        min: [-half_width, -h, -half_width],
        max: [half_width, h, half_width],
    };
    // The chords closing the lenses must stay outside the window.
    let coarse = Resolution::with_order(0, 4);
    for p in pieces.iter().filter(|p| p.patch.name.ends_with("chord")) {
        for n in &p.patch.grid(&coarse).nodes {
            let x = p.patch.jet1(n[0], n[1])?.x;
            if x.x.abs().max(x.z.abs()) < half_width {
                return Err(Error::Invalid("lens chord reaches into the window".into()));
            }
        }
    }
    let cfg = PieceConfig::new("triple wedge", pieces, window);
    let lambda = (0..3).map(|c| (c, 1.0 / a)).collect();
    let mut s = Scenario::new(kind, cfg, lambda, 0.25 * a.min(h));
    s.tip_line = Some((Vec3::zeros(), h));
    s.breakup = Some(BreakupData {
        wedges,
        half_length: h,
        bump_radius: 0.2 * a.min(h),
    });
    s.checks = vec![
        Check::WedgeAngles,
        Check::Stationarity { fields: 20 },
        Check::AmbientStability { samples: 50 },
        Check::Breakup,
        Check::VolumeDrift,
    ];
    Ok(s)
}

/// Two disjoint balls with separate volume constraints.
pub fn scenario_two_balls(r1: f64, r2: f64, separation: f64) -> Result<Scenario> {
    let kind = ScenarioKind::TwoBalls { r1, r2, separation };
    kind.validate()?;
    let c2 = Vec3::new(r1 + separation + r2, 0.0, 0.0);
    // Fields sampled on one ball must not graze the other.
    let r = (0.5 * r1.min(r2)).min(0.45 * separation);
    let ball = |name: &str, c: Vec3, radius: f64| refined_sphere(name, c, radius, r);
    let cfg = PieceConfig::new(
        "two balls",
        vec![
            Piece::interface(ball("ball0", Vec3::zeros(), r1), 0),
            Piece::interface(ball("ball1", c2, r2), 1),
        ],
        Window::Everywhere,
    );
    let mut s = Scenario::new(kind, cfg, BTreeMap::from([(0, 2.0 / r1), (1, 2.0 / r2)]), r);
    s.checks = ambient_checks();
    s.checks.push(Check::JointConstraintControl);
    Ok(s)
}

/// Delaunay unduloid with neck radius `neck` and mean curvature `h`, over
/// the arclength window `|s| < extent` about the neck.
pub fn scenario_delaunay_neck(neck: f64, h: f64, extent: f64) -> Result<Scenario> {
    let kind = ScenarioKind::DelaunayNeck { neck, h, extent };
    kind.validate()?;
    let patch = delaunay_unduloid(h, neck, -extent, extent)?;
    let z_top = patch.jet1(0.0, extent)?.x.z;
    let w = 2.0 / h + 1.0;
    let cfg = PieceConfig::new(
        "delaunay neck",
        vec![Piece::interface(patch, 0)],
        Window::Box {
            min: [-w, -w, -z_top],
            max: [w, w, z_top],
        },
    );
    let mut s = Scenario::new(kind, cfg, BTreeMap::from([(0, h)]), 0.5 * neck.min(z_top));
    s.checks = vec![Check::MeanCurvatureConstancy, Check::CurvatureSupremum];
    // Thin necks only serve the curvature blow-up; fields small enough to
    // fit them would need a far finer grid.
    if neck >= 0.1 / h {
        s.checks.push(Check::Stationarity { fields: 20 });
        s.checks.push(Check::FdOracle { fields: 2 });
    }
    Ok(s)
}

/// Largest `sqrt(|A|^2)` over the interface quadrature nodes inside the
/// window `w`, with the node where it is attained.
pub fn curvature_supremum(cfg: &PieceConfig, w: &Window, res: &Resolution) -> Result<(f64, Vec3)> {
    let mut best = (0.0, Vec3::zeros());
    for piece in cfg.interfaces() {
        let p = &piece.patch;
        for n in &p.grid(res).nodes {
            let fr = p.frame(n[0], n[1])?;
            if !w.contains_ball(&fr.x, 0.0) {
                continue;
            }
            let a = fr.a_norm2().sqrt();
            if a > best.0 {
                best = (a, fr.x);
            }
        }
    }
    Ok(best)
}

/// Seeded source of compactly supported test fields on a scenario.
struct Sampler<'a> {
    s: &'a Scenario,
    rng: ChaCha8Rng,
}

impl<'a> Sampler<'a> {
    fn new(s: &'a Scenario, seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { s, rng }
    }

    /// Random point of an interface piece, with its unit normal.
    fn site(&mut self, component: Option<ComponentId>) -> Result<(Vec3, Vec3)> {
        let cands: Vec<&Piece> = self
            .s
            .config
            .interfaces()
            .filter(|p| component.is_none_or(|c| p.component == c))
            .collect();
        if cands.is_empty() {
            return Err(Error::Invalid(format!(
                "no interface piece for component {component:?}"
            )));
        }
        let p = &cands[self.rng.random_range(0..cands.len())].patch;
        let d = &p.domain;
        let u = d.u.lo + self.rng.random::<f64>() * d.u.length();
        let v = d.v.lo + self.rng.random::<f64>() * d.v.length();
        let n = p.node1(u, v)?;
        Ok((n.x, n.nu()))
    }

    fn tip_distance(&self, x: &Vec3) -> f64 {
        match self.s.tip_line {
            Some((p, _)) => {
                let d = x - p;
                (d - d.dot(&Vec3::y()) * Vec3::y()).norm()
            }
            None => f64::INFINITY,
        }
    }

    /// Largest admissible radius not above the scenario default. Much
    /// smaller bumps would be under-resolved by the fixed quadrature, so the
    /// site is rejected instead.
    fn fit(&self, c: &Vec3, avoid_tip: bool) -> Option<f64> {
        let mut r = self.s.field_radius;
        for _ in 0..2 {
            let clear = !avoid_tip || self.tip_distance(c) > r;
            if clear && self.s.config.window.contains_ball(c, r) {
                return Some(r);
            }
            r *= 0.7;
        }
        None
    }

    /// Random centre and radius; on junction scenarios a quarter of the
    /// centres lie on the junction line unless `avoid_tip` is set.
    fn ball(
        &mut self,
        component: Option<ComponentId>,
        avoid_tip: bool,
    ) -> Result<(Vec3, f64, Vec3)> {
        for _ in 0..200 {
            let (c, n) = match self.s.tip_line {
                Some((p, h))
                    if !avoid_tip && component.is_none() && self.rng.random::<f64>() < 0.25 =>
                {
                    let y = (self.rng.random::<f64>() - 0.5) * h;
                    (p + y * Vec3::y(), Vec3::x())
                }
                _ => self.site(component)?,
            };
            if let Some(r) = self.fit(&c, avoid_tip) {
                return Ok((c, r, n));
            }
        }
        Err(Error::Invalid(format!(
            "{}: could not place a test field in the window",
            self.s.name()
        )))
    }

    fn field(
        &mut self,
        component: Option<ComponentId>,
        avoid_tip: bool,
    ) -> Result<Arc<dyn AmbientField>> {
        let (c, r, _) = self.ball(component, avoid_tip)?;
        Ok(Arc::new(random_poly_bump(&mut self.rng, c, r)))
    }
}

fn step_sequence(h: f64) -> Vec<f64> {
    vec![h, h / 2.0, h / 4.0, h / 8.0]
}

/// Runs every check declared by the scenario.
pub fn run_checks(s: &Scenario, res: &Resolution, seed: u64) -> Result<Vec<CheckRecord>> {
    if res.order == 0 || res.order > 40 {
        return Err(
            Error::Resolution(format!("quadrature order {} outside 1..=40", res.order))
                .context(s.name()),
        );
    }
    let mut out = Vec::new();
    for (k, check) in s.checks.iter().enumerate() {
        let ctx = format!("{}/{}", s.name(), check.id());
        let recs = run_check(s, check, res, seed, k as u64).map_err(|e| e.context(ctx.clone()))?;
        out.extend(recs.into_iter().map(|mut r| {
            r.check_id = format!("{ctx}/{}", r.check_id);
            r
        }));
    }
    Ok(out)
}

fn run_check(
    s: &Scenario,
    check: &Check,
    res: &Resolution,
    seed: u64,
    stream: u64,
) -> Result<Vec<CheckRecord>> {
    match check {
        Check::ClosedForm => closed_form(s, res),
        Check::Stationarity { fields } => {
            stationarity(s, *fields, res, &mut Sampler::new(s, seed, stream))
        }
        Check::AmbientStability { samples } => {
            stability(s, *samples, res, &mut Sampler::new(s, seed, stream))
        }
        Check::FdOracle { fields } => {
            fd_oracle(s, *fields, res, &mut Sampler::new(s, seed, stream))
        }
        Check::SphereHarmonics => sphere_harmonics(s, res),
        Check::Breakup => breakup(s, res),
        Check::Coalescence => coalescence(s, res),
        Check::MeanCurvatureConstancy => mean_curvature_constancy(s, res),
        Check::CurvatureSupremum => supremum(s, res),
        Check::WedgeAngles => wedge_angles(s, res),
        Check::JointConstraintControl => joint_constraint(s, res),
        Check::VolumeDrift => volume_drift(s, res, &mut Sampler::new(s, seed, stream)),
    }
}

fn closed_form(s: &Scenario, res: &Resolution) -> Result<Vec<CheckRecord>> {
    let tol = s.tolerances.closed_form;
    let grid = |p: &SurfacePatch| p.grid(res);
    let mut out = Vec::new();
    let (area, curv, a2, vol) = match s.kind {
        ScenarioKind::Sphere { radius } => (
            4.0 * PI * radius * radius,
            2.0 / radius,
            Some(2.0 / (radius * radius)),
            Some(4.0 / 3.0 * PI * radius.powi(3)),
        ),
        ScenarioKind::Cylinder { radius, length } => {
            (2.0 * PI * radius * length, 1.0 / radius, None, None)
        }
        _ => return Err(Error::Invalid("no closed form for this scenario".into())),
    };
    let p = &s.config.pieces[0].patch;
    out.push(CheckRecord::new(
        "area",
        patch_area(p, &grid(p))?,
        area,
        tol,
        Comparison::Relative,
    ));
    if let Some(v) = vol {
        let vols = component_volumes(&s.config, res)?;
        out.push(CheckRecord::new(
            "volume",
            vols[&0],
            v,
            tol,
            Comparison::Relative,
        ));
    }
    // Worst node, measured against the inward normal.
    let worst = |f: &dyn Fn(&crate::geometry::LocalFrame) -> f64, exact: f64| -> Result<f64> {
        let mut w = exact;
        for n in &grid(p).nodes {
            let v = f(&p.frame(n[0], n[1])?);
            if (v - exact).abs() > (w - exact).abs() {
                w = v;
            }
        }
        Ok(w)
    };
    out.push(CheckRecord::new(
        "mean_curvature_inward",
        worst(&|fr| -fr.mean_curvature(), curv)?,
        curv,
        tol,
        Comparison::Relative,
    ));
    if let Some(a2) = a2 {
        out.push(CheckRecord::new(
            "second_fundamental_form_norm2",
            worst(&|fr| fr.a_norm2(), a2)?,
            a2,
            tol,
            Comparison::Relative,
        ));
    }
    Ok(out)
}

fn stationarity(
    s: &Scenario,
    n: usize,
    res: &Resolution,
    smp: &mut Sampler,
) -> Result<Vec<CheckRecord>> {
    let tol = &s.tolerances;
    let fields: Vec<Arc<dyn AmbientField>> = (0..n)
        .map(|_| smp.field(None, false))
        .collect::<Result<_>>()?;
    let est = lagrange_multiplier(&s.config, &s.potential, &fields, res)?;
    let mut out = Vec::new();
    for (c, lam) in &est.lambda {
        let declared = s.lambda.get(c).copied().unwrap_or(f64::NAN);
        out.push(
            CheckRecord::new(
                format!("lambda/{c}"),
                *lam,
                declared,
                tol.multiplier,
                Comparison::Relative,
            )
            .meta("fields_used", est.fields_used[c]),
        );
        out.push(CheckRecord::new(
            format!("multiplier_residual/{c}"),
            est.residual[c],
            0.0,
            tol.multiplier,
            Comparison::AtMost,
        ));
    }
    let mut worst: f64 = 0.0;
    for f in &fields {
        let terms = variation_terms(&s.config, &s.potential, f.as_ref(), res)?;
        let d = stationarity_defect(&terms, &s.lambda);
        worst = if d.is_nan() { f64::NAN } else { worst.max(d) };
    }
    out.push(
        CheckRecord::new(
            "first_variation_defect",
            worst,
            0.0,
            tol.stationarity,
            Comparison::AtMost,
        )
        .meta("fields", n),
    );
    Ok(out)
}

/// `Q(zeta)` and its scale `∫ |∇zeta|^2 + (|A|^2 + |D_nu g|) zeta^2`.
fn jacobi_form(s: &Scenario, zeta: &NormalPerturbation, res: &Resolution) -> Result<(f64, f64)> {
    let (mut q, mut scale) = (0.0, 0.0);
    for piece in s.config.interfaces() {
        let p = &piece.patch;
        let [a, b] = p.grid(res).try_integrate_n(|u, v| {
            let fr = p.frame(u, v)?;
            let (z, gz) = zeta.eval(&fr, piece.component);
            let (_, dg) = potential_eval(&s.potential, &fr.x);
            let dgn = dg.dot(&fr.nu);
            let a2 = fr.a_norm2();
            let da = fr.area_element;
            Ok([
                ((dgn - a2) * z * z + gz.norm_squared()) * da,
                ((dgn.abs() + a2) * z * z + gz.norm_squared()) * da,
            ])
        })?;
        q += a;
        scale += b;
    }
    Ok((q, scale))
}

fn stability(
    s: &Scenario,
    n: usize,
    res: &Resolution,
    smp: &mut Sampler,
) -> Result<Vec<CheckRecord>> {
    let mut worst = f64::INFINITY;
    for _ in 0..n {
        let x = smp.field(None, true)?;
        let zeta = NormalPerturbation::FieldNormal(x).mean_free(&s.config, res)?;
        let (q, scale) = jacobi_form(s, &zeta, res)?;
        worst = worst.min(q / scale);
    }
    Ok(vec![CheckRecord::new(
        "min_scaled_second_variation",
        worst,
        0.0,
        s.tolerances.stability,
        Comparison::AtLeast,
    )
    .meta("samples", n)
    .meta(
        "perturbations",
        "mean-free normal components of seeded ambient fields",
    )])
}

/// Central quotients from `h0` down. A smooth energy whose leading error
/// term happens to be small is not yet in its asymptotic regime at the
/// default step; the whole sequence is then halved (at most four times)
/// until the orders seen on the coarse and fine quotient triples agree.
fn asymptotic_fd(
    energy: &dyn Fn(f64) -> Result<f64>,
    order: u32,
    h0: f64,
) -> Result<(crate::variation::FdEstimate, usize)> {
    let triple_order = |b: &[f64]| ((b[1] - b[0]) / (b[2] - b[1])).abs().log2();
    let mut h = h0;
    let mut k = 0;
    loop {
        let d = fd_derivative(energy, order, Stencil::Central, &step_sequence(h))?;
        let settled = (triple_order(&d.base[..3]) - triple_order(&d.base[1..])).abs() < 0.25;
        if settled || k == 4 {
            return Ok((d, k));
        }
        h *= 0.5;
        k += 1;
    }
}

fn fd_oracle(
    s: &Scenario,
    n: usize,
    res: &Resolution,
    smp: &mut Sampler,
) -> Result<Vec<CheckRecord>> {
    let tol = &s.tolerances;
    let mut out = Vec::new();
    for k in 0..n {
        let (c, r, _) = smp.ball(None, true)?;
        let x: Arc<dyn AmbientField> = Arc::new(random_poly_bump(&mut smp.rng, c, r));
        let h0 = s.t_step.unwrap_or(0.05 * r);
        let energy =
            |t: f64| energy_value(&flow_ambient(&s.config, x.clone(), t), &s.potential, res);
        let (d1, n1) = asymptotic_fd(&energy, 1, h0)?;
        let (d2, n2) = asymptotic_fd(&energy, 2, h0)?;
        let a1 = first_variation_ambient(&s.config, &s.potential, x.as_ref(), res)?;
        let accel = FlowAcceleration { inner: x.clone() };
        let a2 = second_variation_ambient(
            &s.config,
            &s.potential,
            x.clone(),
            &s.lambda,
            Some(&accel),
            res,
        )?
        .value;
        let id = |what: &str| format!("field{k}/{what}");
        out.push(
            CheckRecord::new(
                id("first"),
                d1.value,
                a1,
                tol.fd_relative,
                Comparison::Relative,
            )
            .meta("fd_error", d1.error)
            .meta("steps", format!("{:?}", d1.steps))
            .meta("refinements", n1),
        );
        out.push(
            CheckRecord::new(
                id("second"),
                d2.value,
                a2,
                tol.fd_relative,
                Comparison::Relative,
            )
            .meta("fd_error", d2.error)
            .meta("steps", format!("{:?}", d2.steps))
            .meta("refinements", n2),
        );
        for (what, d, n) in [("first_order", &d1, n1), ("second_order", &d2, n2)] {
            out.push(
                CheckRecord::new(
                    id(what),
                    d.observed_order.unwrap_or(f64::NAN),
                    tol.fd_order,
                    0.0,
                    Comparison::AtLeast,
                )
                .meta("refinements", n),
            );
        }
    }
    Ok(out)
}

fn sphere_harmonics(s: &Scenario, res: &Resolution) -> Result<Vec<CheckRecord>> {
    let ScenarioKind::Sphere { radius } = s.kind else {
        return Err(Error::Invalid("harmonics need the sphere scenario".into()));
    };
    let tol = &s.tolerances;
    let p = &s.config.pieces[0].patch;
    let mut out = Vec::new();
    // Restrictions of homogeneous harmonic polynomials, centred at the origin.
    let cases = [
        ("degree1", Poly3::new(vec![(1.0, [0, 0, 1])]), 0.0),
        (
            "degree2",
            Poly3::new(vec![(1.0, [2, 0, 0]), (-1.0, [0, 2, 0])]),
            4.0 / (radius * radius),
        ),
    ];
    for (name, poly, eig) in cases {
        let zeta = NormalPerturbation::Scalar(Arc::new(poly));
        let q = second_variation_normal(&s.config, &s.potential, &zeta, &s.lambda, res)?.value;
        let norm2 = p.grid(res).try_integrate(|u, v| {
            let fr = p.frame(u, v)?;
            Ok(zeta.eval(&fr, 0).0.powi(2) * fr.area_element)
        })?;
        let rec = if eig == 0.0 {
            CheckRecord::new(name, q / norm2, 0.0, 1e-6, Comparison::Absolute)
        } else {
            CheckRecord::new(name, q / norm2, eig, tol.stability, Comparison::Relative)
        };
        out.push(rec.meta("zeta_norm2", norm2));
    }
    Ok(out)
}

fn breakup_path(s: &Scenario, res: &Resolution) -> Result<crate::deformation::WedgeBreakupPath> {
    let b = s
        .breakup
        .as_ref()
        .ok_or_else(|| Error::Invalid("scenario has no wedge structure".into()))?;
    let mut path = wedge_breakup_path(&b.wedges, b.half_length, b.bump_radius, res)?;
    if let Some(h) = s.t_step {
        path.t_steps = step_sequence(h);
    }
    Ok(path)
}

fn breakup(s: &Scenario, res: &Resolution) -> Result<Vec<CheckRecord>> {
    let path = breakup_path(s, res)?;
    let fv = path.first_variation(&s.potential, res)?;
    let finest = *fv.fd.base.last().expect("non-empty stencil");
    let tol = &s.tolerances;
    Ok(vec![
        CheckRecord::new(
            "fd_first_variation",
            fv.fd.value,
            0.0,
            0.0,
            Comparison::Below,
        )
        .meta("fd_error", fv.fd.error),
        CheckRecord::new(
            "analytic_vs_tip_prediction",
            fv.analytic,
            fv.predicted,
            tol.breakup_prediction,
            Comparison::Relative,
        )
        .meta("tip_bump_integral", path.tip_bump_integral()),
        CheckRecord::new(
            "finest_quotient_vs_analytic",
            finest,
            fv.analytic,
            tol.breakup_fd,
            Comparison::Relative,
        )
        .meta(
            "finest_step",
            fv.fd.steps.last().copied().unwrap_or(f64::NAN),
        ),
        CheckRecord::new(
            "extrapolated_vs_analytic",
            fv.fd.value,
            fv.analytic,
            tol.fd_relative,
            Comparison::Relative,
        ),
    ])
}

fn wedge_angles(s: &Scenario, res: &Resolution) -> Result<Vec<CheckRecord>> {
    let path = breakup_path(s, res)?;
    let expected = match s.kind {
        ScenarioKind::TripleWedge { .. } => PI / 3.0,
        _ => 0.0,
    };
    Ok(path
        .wedges
        .iter()
        .map(|w| {
            CheckRecord::new(
                format!("angle/{}", w.name),
                w.angle,
                expected,
                1e-9,
                Comparison::Absolute,
            )
            .meta("below_pi", w.angle < PI)
        })
        .collect())
}

fn coalescence(s: &Scenario, res: &Resolution) -> Result<Vec<CheckRecord>> {
    let ScenarioKind::TouchingCaps {
        alpha,
        r_window,
        shape,
        ref r0_fractions,
    } = s.kind
    else {
        return Err(Error::Invalid(
            "coalescence needs the touching-caps scenario".into(),
        ));
    };
    let tol = &s.tolerances;
    let g = &s.potential;
    let r = r_window;
    let mut fracs = r0_fractions.clone();
    fracs.sort_by(|a, b| b.total_cmp(a));
    let mut out = Vec::new();
    let (mut totals, mut rates, mut outers) = (Vec::new(), Vec::new(), Vec::new());
    for f in &fracs {
        let r0 = f * r;
        let mut cfg = cusp_config(alpha, r, shape, r0);
        if let Some(h) = s.t_step {
            cfg.t_steps = step_sequence(h);
        }
        let path = coalescence_path(&cfg, g, res)?;
        let at = |rec: CheckRecord| rec.at("r0", r0);
        for t in [0.01 * r, 0.02 * r].into_iter().filter(|t| *t <= r0) {
            let fv = first_variation_coalescence(&path, g, t, res)?;
            for (sheet, terms) in [("lower", fv.lower), ("upper", fv.upper)] {
                out.push(at(CheckRecord::new(
                    format!("boundary_term/{sheet}/t={t}"),
                    terms.boundary,
                    -2.0 * PI * t,
                    tol.boundary,
                    Comparison::Relative,
                )));
            }
        }
        let fv0 = first_variation_coalescence(&path, g, 0.0, res)?;
        let total0 = fv0.inner_total + fv0.outer.unwrap_or(0.0);
        out.push(at(CheckRecord::new(
            "first_variation_at_zero",
            total0.abs() / r,
            0.0,
            tol.first_variation,
            Comparison::AtMost,
        )
        .meta("inner", fv0.inner_total)
        .meta("inner_direct", fv0.inner_direct.unwrap_or(f64::NAN))
        .meta("outer", fv0.outer.unwrap_or(f64::NAN))));

        // The six-term first variation against the moving-part energy at an
        // interior time.
        let tm = 0.5 * r0;
        let fvm = first_variation_coalescence(&path, g, tm, res)?;
        let hs: Vec<f64> = [8.0, 16.0, 32.0].iter().map(|d| r0 / d).collect();
        let fd = fd_derivative(
            |dt| path.inner_energy(tm + dt, g, res),
            1,
            Stencil::Central,
            &hs,
        )?;
        out.push(at(CheckRecord::new(
            "first_variation_vs_fd",
            fvm.inner_total,
            fd.value,
            tol.fd_relative,
            Comparison::Relative,
        )
        .meta("t", tm)));

        let v1 = volume_rate(&path, 0.0, res)?;
        out.push(at(CheckRecord::new(
            "volume_rate",
            v1,
            0.0,
            0.0,
            Comparison::Report,
        )));
        let sv = second_variation_coalescence(&path, g, res)?;
        out.push(at(CheckRecord::new(
            "boundary_derivative_per_circle",
            0.5 * sv.boundary.value,
            -2.0 * PI,
            tol.boundary,
            Comparison::Relative,
        )));
        out.push(at(CheckRecord::new(
            "inner_contribution",
            sv.inner.value,
            0.0,
            0.0,
            Comparison::Report,
        )
        .meta("fd_error", sv.inner.error)
        .meta("remainder", sv.inner_remainder)));
        out.push(at(CheckRecord::new(
            "outer_contribution",
            sv.outer,
            sv.outer_fd.value,
            1e-2,
            Comparison::Report,
        )
        .meta("q", sv.q_outer)
        .meta("lambda", sv.lambda)
        .meta("s_second", sv.s_second.value)));
        out.push(at(CheckRecord::new(
            "second_variation_total",
            sv.total,
            -3.0 * PI,
            0.0,
            Comparison::Below,
        )
        .meta("error_bar", sv.total_error)));
        totals.push(sv.total);
        rates.push(v1.abs());
        outers.push(sv.outer.abs());
    }
    if fracs.len() >= 2 {
        let max_step = totals
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::NEG_INFINITY, f64::max);
        out.push(CheckRecord::new(
            "sweep/totals_strictly_decreasing",
            max_step,
            0.0,
            0.0,
            Comparison::Below,
        ));
        let first = (totals[0] + 4.0 * PI).abs();
        let last = (totals[totals.len() - 1] + 4.0 * PI).abs();
        out.push(CheckRecord::new(
            "sweep/distance_to_minus_4pi_ratio",
            last / first,
            1.0,
            0.0,
            Comparison::Below,
        ));
        let ratio = |v: &[f64]| {
            v.windows(2)
                .map(|w| w[1] / w[0])
                .fold(f64::NEG_INFINITY, f64::max)
        };
        out.push(CheckRecord::new(
            "sweep/volume_rate_ratio",
            ratio(&rates),
            1.0,
            0.0,
            Comparison::Below,
        ));
        out.push(CheckRecord::new(
            "sweep/outer_contribution_ratio",
            ratio(&outers),
            1.0,
            0.0,
            Comparison::Below,
        ));
    }
    out.push(
        CheckRecord::new(
            "smallest_r0_total",
            *totals.last().expect("sweep"),
            -3.0 * PI,
            0.0,
            Comparison::Below,
        )
        .at("r0", fracs.last().copied().unwrap_or(f64::NAN) * r),
    );
    Ok(out)
}

fn mean_curvature_constancy(s: &Scenario, res: &Resolution) -> Result<Vec<CheckRecord>> {
    let mut worst: f64 = 0.0;
    for piece in s.config.interfaces() {
        let lam = s.lambda.get(&piece.component).copied().unwrap_or(f64::NAN);
        let p = &piece.patch;
        let m = p.grid(res).try_max(|u, v| {
            let fr = p.frame(u, v)?;
            let (g, _) = potential_eval(&s.potential, &fr.x);
            Ok((fr.mean_curvature() - (g - lam)).abs())
        })?;
        worst = worst.max(m);
    }
    Ok(vec![CheckRecord::new(
        "max_deviation",
        worst,
        0.0,
        s.tolerances.curvature_constancy,
        Comparison::AtMost,
    )])
}

fn supremum(s: &Scenario, res: &Resolution) -> Result<Vec<CheckRecord>> {
    let (sup, at) = curvature_supremum(&s.config, &s.config.window, res)?;
    Ok(match s.kind {
        ScenarioKind::Sphere { radius } => vec![CheckRecord::new(
            "sup_second_fundamental_form",
            sup,
            2f64.sqrt() / radius,
            s.tolerances.closed_form,
            Comparison::Relative,
        )],
        ScenarioKind::DelaunayNeck { neck, h, .. } if neck <= 0.1 / h => vec![
            CheckRecord::new(
                "sup_second_fundamental_form",
                sup,
                10.0 * 2f64.sqrt() * h,
                0.0,
                Comparison::AtLeast,
            ),
            CheckRecord::new(
                "sup_location_height",
                at.z.abs(),
                neck,
                0.0,
                Comparison::AtMost,
            ),
        ],
        _ => vec![CheckRecord::new(
            "sup_second_fundamental_form",
            sup,
            0.0,
            0.0,
            Comparison::Report,
        )
        .meta("at", format!("{:.6} {:.6} {:.6}", at.x, at.y, at.z))],
    })
}

fn joint_constraint(s: &Scenario, res: &Resolution) -> Result<Vec<CheckRecord>> {
    let ScenarioKind::TwoBalls { r1, r2, separation } = s.kind else {
        return Err(Error::Invalid(
            "joint-constraint control needs two balls".into(),
        ));
    };
    let centers = [Vec3::zeros(), Vec3::new(r1 + separation + r2, 0.0, 0.0)];
    let mut terms = Vec::new();
    for (c, center) in centers.iter().enumerate() {
        let sub = s.config.filtered(|p| p.component == c as ComponentId);
        let d = Dilation {
            center: *center,
            scale: 1.0,
        };
        let t = variation_terms(&sub, &s.potential, &d, res)?[&(c as ComponentId)];
        terms.push(t);
    }
    // Shrink drop 0 and grow drop 1 so that the total volume is fixed.
    let c0 = -1.0;
    let c1 = -c0 * terms[0].volume / terms[1].volume;
    let de = c0 * terms[0].energy() + c1 * terms[1].energy();
    let dv = c0 * terms[0].volume + c1 * terms[1].volume;
    let cmp = if (r1 - r2).abs() > 1e-12 * r1.max(r2) {
        Comparison::Below
    } else {
        Comparison::Report
    };
    Ok(vec![CheckRecord::new(
        "mass_transfer_first_variation",
        de,
        0.0,
        0.0,
        cmp,
    )
    .meta("total_volume_change", dv)
    .meta("dilation_rates", format!("{c0} {c1}"))])
}

fn volume_drift(s: &Scenario, res: &Resolution, smp: &mut Sampler) -> Result<Vec<CheckRecord>> {
    let tol = s.tolerances.volume_drift;
    let mut out = Vec::new();
    let drift =
        |base: &BTreeMap<ComponentId, f64>, now: &BTreeMap<ComponentId, f64>, scale: f64| {
            base.iter()
                .map(|(c, v)| (now.get(c).copied().unwrap_or(f64::NAN) - v).abs() / scale)
                .fold(0.0, f64::max)
        };
    if let ScenarioKind::TouchingCaps {
        alpha,
        r_window,
        shape,
        r0_fractions,
    } = &s.kind
    {
        let r0 = r0_fractions.iter().copied().fold(f64::INFINITY, f64::min) * r_window;
        let path = coalescence_path(
            &cusp_config(*alpha, *r_window, *shape, r0),
            &s.potential,
            res,
        )?;
        let base = flux_volumes(&path.config_at(0.0, res)?, res)?;
        let scale = r_window.powi(3);
        for t in [0.01 * r_window, 0.02 * r_window]
            .into_iter()
            .filter(|t| *t <= r0)
        {
            let now = flux_volumes(&path.config_at(t, res)?, res)?;
            out.push(
                CheckRecord::new(
                    format!("coalescence/t={t}"),
                    drift(&base, &now, scale),
                    0.0,
                    tol,
                    Comparison::AtMost,
                )
                .at("r0", r0),
            );
        }
        if *shape == CapShape::Paraboloid {
            return Ok(out);
        }
    }
    if s.breakup.is_some() {
        let path = breakup_path(s, res)?;
        let base = flux_volumes(&path.base, res)?;
        let scale = base.values().fold(0.0f64, |a, v| a.max(v.abs()));
        for t in path.t_steps.iter().take(2) {
            let now = flux_volumes(&path.config_at(*t, res)?, res)?;
            out.push(CheckRecord::new(
                format!("breakup/t={t}"),
                drift(&base, &now, scale),
                0.0,
                tol,
                Comparison::AtMost,
            ));
        }
    }
    if s.checks
        .iter()
        .any(|c| matches!(c, Check::Stationarity { .. }))
    {
        let x = smp.field(None, true)?;
        let mut ys: Vec<(ComponentId, Arc<dyn AmbientField>)> = Vec::new();
        for c in s.config.components() {
            if s.config.of_component(c).all(|p| !p.is_interface()) {
                continue;
            }
            let (center, r, n) = smp.ball(Some(c), true)?;
            ys.push((
                c,
                Arc::new(BumpField {
                    center,
                    radius: r,
                    direction: n,
                }),
            ));
        }
        let path = make_volume_preserving(&s.config, x, ys, res)?;
        let base = flux_volumes(&s.config, res)?;
        let mut scale: f64 = 0.0;
        for p in s.config.interfaces() {
            scale = scale.max(patch_area(&p.patch, &p.patch.grid(res))? * s.field_radius);
        }
        for v in base.values() {
            scale = scale.max(v.abs());
        }
        for t in [0.05 * s.field_radius, 0.1 * s.field_radius] {
            let now = flux_volumes(&path.config_at(t, res)?, res)?;
            out.push(CheckRecord::new(
                format!("ambient/t={t}"),
                drift(&base, &now, scale),
                0.0,
                tol,
                Comparison::AtMost,
            ));
        }
    }
    Ok(out)
}
