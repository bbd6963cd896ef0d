//! Point-density functions on the unit sphere.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ScvtError};
use crate::geometry::{angle_between, SpherePoint, Vec3};

const POLE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DensityKind {
    Constant,
    X3,
    X16,
    X64,
    CustomTanh,
}

impl DensityKind {
    pub fn name(&self) -> &'static str {
        match self {
            DensityKind::Constant => "const",
            DensityKind::X3 => "x3",
            DensityKind::X16 => "x16",
            DensityKind::X64 => "x64",
            DensityKind::CustomTanh => "customtanh",
        }
    }
}

impl std::str::FromStr for DensityKind {
    type Err = ScvtError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "const" | "constant" => Ok(DensityKind::Constant),
            "x3" => Ok(DensityKind::X3),
            "x16" => Ok(DensityKind::X16),
            "x64" => Ok(DensityKind::X64),
            "customtanh" | "custom-tanh" | "tanh" => Ok(DensityKind::CustomTanh),
            other => Err(ScvtError::Config(format!("unknown density preset `{other}`"))),
        }
    }
}

/// Distance from the density center used by the tanh profiles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceKind {
    Geodesic,
    /// Latitude and longitude offsets from the center, scaled by the widths.
    Elliptical,
}

/// A point-density function. `Constant` ignores every parameter, `X3` uses
/// only `gamma`, the tanh variants use all of them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityField {
    pub kind: DensityKind,
    pub gamma: f64,
    pub beta: f64,
    pub alpha: f64,
    center: [f64; 3],
    pub w_lon: f64,
    pub w_lat: f64,
    pub distance: DistanceKind,
}

impl DensityField {
    pub fn constant() -> Self {
        DensityField {
            kind: DensityKind::Constant,
            gamma: 1.0,
            beta: 0.0,
            alpha: 1.0,
            center: [0.0, 0.0, 1.0],
            w_lon: 1.0,
            w_lat: 1.0,
            distance: DistanceKind::Geodesic,
        }
    }

    pub fn x3() -> Self {
        DensityField {
            kind: DensityKind::X3,
            gamma: (1.0f64 / 3.0).powi(4),
            ..Self::constant()
        }
    }

    pub fn x16() -> Self {
        DensityField {
            kind: DensityKind::X16,
            gamma: (1.0f64 / 16.0).powi(4),
            beta: PI / 6.0,
            alpha: 0.3,
            center: [1.0, 0.0, 0.0],
            w_lon: 0.3,
            w_lat: 1.2,
            distance: DistanceKind::Elliptical,
        }
    }

    pub fn x64() -> Self {
        let c = Vec3::new(0.0, -0.866, 0.5).normalize();
        DensityField {
            kind: DensityKind::X64,
            gamma: (1.0f64 / 64.0).powi(4),
            beta: PI / 6.0,
            alpha: 0.15,
            center: [c.x, c.y, c.z],
            w_lon: 1.0,
            w_lat: 1.0,
            distance: DistanceKind::Geodesic,
        }
    }

    /// A tanh profile with explicit parameters and geodesic distance.
    pub fn custom_tanh(center: SpherePoint, beta: f64, alpha: f64, gamma: f64) -> Self {
        DensityField {
            kind: DensityKind::CustomTanh,
            gamma,
            beta,
            alpha,
            center: center.to_array(),
            w_lon: 1.0,
            w_lat: 1.0,
            distance: DistanceKind::Geodesic,
        }
    }

    pub fn preset(kind: DensityKind) -> Self {
        match kind {
            DensityKind::Constant => Self::constant(),
            DensityKind::X3 => Self::x3(),
            DensityKind::X16 => Self::x16(),
            DensityKind::X64 => Self::x64(),
            DensityKind::CustomTanh => Self::custom_tanh(SpherePoint::new(0.0, 0.0, 1.0), PI / 6.0, 0.3, 1e-2),
        }
    }

    pub fn center(&self) -> SpherePoint {
        SpherePoint::new(self.center[0], self.center[1], self.center[2])
    }

    /// Sets the center, renormalizing it to the unit sphere.
    pub fn set_center(&mut self, c: [f64; 3]) {
        self.center = SpherePoint::new(c[0], c[1], c[2]).to_array();
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(ScvtError::Config(format!("density parameter {what}")));
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return bad("gamma must be positive");
        }
        if self.kind == DensityKind::X3 && self.gamma > 1.0 {
            return bad("gamma must not exceed 1 for x3");
        }
        if self.is_tanh() {
            if !(self.alpha > 0.0 && self.alpha.is_finite()) {
                return bad("alpha must be positive");
            }
            if !(self.w_lon > 0.0 && self.w_lat > 0.0) {
                return bad("widths must be positive");
            }
            let n = Vec3::from(self.center).norm();
            if !(n > 0.0 && n.is_finite()) {
                return bad("center must be a nonzero vector");
            }
            if self.gamma >= 1.0 {
                return bad("gamma must be below 1 for tanh profiles");
            }
        }
        Ok(())
    }

    fn is_tanh(&self) -> bool {
        matches!(self.kind, DensityKind::X16 | DensityKind::X64 | DensityKind::CustomTanh)
    }

    fn tanh_profile(&self, d: f64) -> f64 {
        (((self.beta - d) / self.alpha).tanh() + 1.0) / (2.0 * (1.0 - self.gamma)) + self.gamma
    }

    /// ρ at the radial projection of `x`.
    #[inline]
    pub fn eval(&self, x: &Vec3) -> f64 {
        match self.kind {
            DensityKind::Constant => 1.0,
            DensityKind::X3 => {
                let z = x.z / x.norm();
                (1.0 - self.gamma) * z.powi(4) + self.gamma
            }
            _ => {
                let u = x / x.norm();
                let d = match self.distance {
                    DistanceKind::Geodesic => angle_between(&u, &Vec3::from(self.center)),
                    DistanceKind::Elliptical => elliptical(&u, &Vec3::from(self.center), self.w_lon, self.w_lat),
                };
                self.tanh_profile(d)
            }
        }
    }

    /// Points where ρ is continuous but not differentiable: the cone tip of
    /// the distance at the center (and its antipode for geodesic distance),
    /// and the poles, where the elliptical distance depends on direction.
    /// Integration splits pieces at these points.
    pub fn kinks(&self) -> Vec<Vec3> {
        let c = Vec3::from(self.center);
        match (self.kind, self.distance) {
            (DensityKind::Constant | DensityKind::X3, _) => Vec::new(),
            (_, DistanceKind::Geodesic) => vec![c, -c],
            (_, DistanceKind::Elliptical) => vec![c, Vec3::z(), -Vec3::z()],
        }
    }

    /// Largest value of ρ over the sphere.
    pub fn max_value(&self) -> f64 {
        match self.kind {
            DensityKind::Constant => 1.0,
            DensityKind::X3 => 1.0f64.max(self.gamma),
            _ => self.tanh_profile(0.0),
        }
    }

    /// A lower bound on ρ over the sphere, attained for the presets up to
    /// rounding.
    pub fn min_value(&self) -> f64 {
        match self.kind {
            DensityKind::Constant => 1.0,
            DensityKind::X3 => self.gamma.min(1.0),
            _ => {
                let far = match self.distance {
                    DistanceKind::Geodesic => PI,
                    DistanceKind::Elliptical => ((PI / self.w_lon).powi(2) + (PI / self.w_lat).powi(2)).sqrt(),
                };
                self.tanh_profile(far)
            }
        }
    }
}

impl Default for DensityField {
    fn default() -> Self {
        Self::constant()
    }
}

/// ρ(x) for a sphere point.
pub fn eval_density(field: &DensityField, x: &SpherePoint) -> f64 {
    field.eval(x.vec())
}

fn near_pole(v: &Vec3) -> bool {
    v.x.hypot(v.y) < POLE_TOLERANCE
}

fn elliptical(x: &Vec3, c: &Vec3, w_lon: f64, w_lat: f64) -> f64 {
    let px = SpherePoint::from_unit(*x);
    let pc = SpherePoint::from_unit(*c);
    let (lat_x, lon_x) = (px.latitude(), px.longitude());
    let (lat_c, lon_c) = (pc.latitude(), pc.longitude());
    let x_ic = SpherePoint::from_lat_lon(lat_x, lon_c);
    let x_ci = SpherePoint::from_lat_lon(lat_c, lon_x);
    let d_lon = angle_between(x, x_ic.vec());
    let d_lat = angle_between(x, x_ci.vec());
    ((d_lon / w_lon).powi(2) + (d_lat / w_lat).powi(2)).sqrt()
}

/// Elliptical distance of `x` from the field center: the geodesic offset to
/// the point at `x`'s latitude and the center's longitude, scaled by `w_lon`,
/// combined with the offset to the point at the center's latitude and `x`'s
/// longitude, scaled by `w_lat`.
pub fn elliptical_distance(x: &SpherePoint, field: &DensityField) -> Result<f64> {
    let c = Vec3::from(field.center);
    if near_pole(x.vec()) || near_pole(&c) {
        return Err(ScvtError::PoleAmbiguity);
    }
    Ok(elliptical(x.vec(), &c, field.w_lon, field.w_lat))
}

/// Draws `k` points by rejection sampling: uniform proposals on the sphere,
/// accepted with probability ρ/max ρ.
pub fn sample_by_density(field: &DensityField, k: usize, seed: u64) -> Vec<SpherePoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bound = field.max_value();
    let mut out = Vec::with_capacity(k);
    while out.len() < k {
        let z: f64 = rng.gen_range(-1.0..=1.0);
        let phi: f64 = rng.gen_range(0.0..2.0 * PI);
        let r = (1.0 - z * z).max(0.0).sqrt();
        let p = Vec3::new(r * phi.cos(), r * phi.sin(), z);
        let u: f64 = rng.gen();
        if u * bound < field.eval(&p) {
            out.push(SpherePoint::from_vec(p));
        }
    }
    out
}

/// Latitude band helper used by diagnostics: `true` within `band` radians of
/// either pole.
pub fn is_polar(x: &SpherePoint, band: f64) -> bool {
    x.latitude().abs() > FRAC_PI_2 - band
}
