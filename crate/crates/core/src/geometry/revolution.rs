use std::fmt::Debug;

use super::Vec3;
use crate::error::{Error, Result};
use crate::ode::Dopri5;

/// Right-handed orthonormal frame; `e3` is the axis of revolution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Frame {
    pub origin: Vec3,
    pub e1: Vec3,
    pub e2: Vec3,
    pub e3: Vec3,
}

impl Frame {
    pub fn standard() -> Self {
        Self {
            origin: Vec3::zeros(),
            e1: Vec3::x(),
            e2: Vec3::y(),
            e3: Vec3::z(),
        }
    }

    /// Frame whose axis is the world `y` axis through `origin`; angle zero
    /// points along `z` and angle `pi/2` along `x`.
    pub fn y_axis(origin: Vec3) -> Self {
        Self {
            origin,
            e1: Vec3::z(),
            e2: Vec3::x(),
            e3: Vec3::y(),
        }
    }
}

/// Meridian curve `s -> (r(s), z(s))` with derivatives.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ProfileJet {
    pub r: f64,
    pub z: f64,
    pub dr: f64,
    pub dz: f64,
    pub ddr: f64,
    pub ddz: f64,
}

pub trait Profile: Send + Sync + Debug {
    fn jet(&self, s: f64) -> Result<ProfileJet>;
}

/// Great semicircle `r = a sin s, z = -a cos s`, `s` in `(0, pi)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CircleProfile {
    pub radius: f64,
}

impl Profile for CircleProfile {
    fn jet(&self, s: f64) -> Result<ProfileJet> {
        let a = self.radius;
        let (sn, cs) = s.sin_cos();
        Ok(ProfileJet {
            r: a * sn,
            z: -a * cs,
            dr: a * cs,
            dz: a * sn,
            ddr: -a * sn,
            ddz: a * cs,
        })
    }
}

/// Vertical line `r = a, z = s`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineProfile {
    pub radius: f64,
}

impl Profile for LineProfile {
    fn jet(&self, s: f64) -> Result<ProfileJet> {
        Ok(ProfileJet {
            r: self.radius,
            z: s,
            dr: 0.0,
            dz: 1.0,
            ..ProfileJet::default()
        })
    }
}

/// Meridian of a Delaunay unduloid with neck radius `neck` and constant mean
/// curvature `h` (sum of principal curvatures, measured towards the axis),
/// parametrised by arclength from the neck.
#[derive(Clone, Debug)]
pub struct UnduloidProfile {
    pub h: f64,
    pub neck: f64,
    spacing: f64,
    /// States `(r, z, phi)` at `s = k * spacing`, `k >= 0`.
    checkpoints: Vec<[f64; 3]>,
    ode: Dopri5,
}

/// Smallest neck radius accepted, as a fraction of `1/h`.
pub const MIN_NECK_FRACTION: f64 = 1e-2;

impl UnduloidProfile {
    pub fn new(h: f64, neck: f64, s_max: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Invalid(format!(
                "unduloid mean curvature must be positive, got {h}"
            )));
        }
        if neck > 1.0 / h * (1.0 + 1e-14) || neck <= 0.0 {
            return Err(Error::Invalid(format!(
                "unduloid neck radius {neck} outside (0, 1/H] = (0, {}]",
                1.0 / h
            )));
        }
        if neck < MIN_NECK_FRACTION / h {
            return Err(Error::Invalid(format!(
                "unduloid neck radius {neck} below the supported minimum {}",
                MIN_NECK_FRACTION / h
            )));
        }
        let ode = Dopri5::with_tolerance(1e-13, 1e-15);
        let spacing = 0.05 * neck.min(1.0 / h);
        let n = (s_max.abs() / spacing).ceil() as usize + 1;
        let mut checkpoints = Vec::with_capacity(n + 1);
        let mut state = [neck, 0.0, std::f64::consts::FRAC_PI_2];
        checkpoints.push(state);
        for k in 0..n {
            state = ode
                .integrate(
                    |_, y: &[f64; 3]| meridian_rhs(h, y),
                    k as f64 * spacing,
                    state,
                    (k + 1) as f64 * spacing,
                )
                .map_err(|reason| Error::Integrator {
                    start: [state[0], state[1], state[2]],
                    reason,
                })?;
            checkpoints.push(state);
        }
        Ok(Self {
            h,
            neck,
            spacing,
            checkpoints,
            ode,
        })
    }

    /// Largest profile radius, `2/H - neck`.
    pub fn bulge(&self) -> f64 {
        2.0 / self.h - self.neck
    }

    fn state(&self, s: f64) -> Result<[f64; 3]> {
        let sa = s.abs();
        let k = ((sa / self.spacing).floor() as usize).min(self.checkpoints.len() - 1);
        let s0 = k as f64 * self.spacing;
        let y = self
            .ode
            .integrate(
                |_, y: &[f64; 3]| meridian_rhs(self.h, y),
                s0,
                self.checkpoints[k],
                sa,
            )
            .map_err(|reason| Error::Integrator {
                start: self.checkpoints[k],
                reason,
            })?;
        Ok(if s < 0.0 {
            [y[0], -y[1], std::f64::consts::PI - y[2]]
        } else {
            y
        })
    }
}

fn meridian_rhs(h: f64, y: &[f64; 3]) -> [f64; 3] {
    let (sn, cs) = y[2].sin_cos();
    [cs, sn, h - sn / y[0]]
}

impl Profile for UnduloidProfile {
    fn jet(&self, s: f64) -> Result<ProfileJet> {
        let [r, z, phi] = self.state(s)?;
        let (sn, cs) = phi.sin_cos();
        let dphi = self.h - sn / r;
        Ok(ProfileJet {
            r,
            z,
            dr: cs,
            dz: sn,
            ddr: -sn * dphi,
            ddz: cs * dphi,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unduloid_bulge_radius_matches_first_integral() {
        let p = UnduloidProfile::new(1.0, 0.3, 20.0).unwrap();
        let rmax = (0..2000)
            .map(|i| p.jet(i as f64 * 0.01).unwrap().r)
            .fold(0.0, f64::max);
        assert!((rmax - p.bulge()).abs() < 1e-4, "{rmax} vs {}", p.bulge());
    }

    #[test]
    fn unduloid_is_symmetric_about_the_neck() {
        let p = UnduloidProfile::new(1.0, 0.2, 5.0).unwrap();
        let a = p.jet(1.3).unwrap();
        let b = p.jet(-1.3).unwrap();
        assert!((a.r - b.r).abs() < 1e-13 && (a.z + b.z).abs() < 1e-13);
        assert!((a.dr + b.dr).abs() < 1e-13 && (a.dz - b.dz).abs() < 1e-13);
    }

    #[test]
    fn rejects_neck_outside_range() {
        assert!(UnduloidProfile::new(1.0, 1.5, 1.0).is_err());
        assert!(UnduloidProfile::new(1.0, 1e-3, 1.0).is_err());
        assert!(UnduloidProfile::new(1.0, 1.0, 1.0).is_ok());
    }
}
