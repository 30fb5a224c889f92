//! Quasistatic contact between a planar taxel array and union-of-spheres
//! objects.
//!
//! Each taxel is a sphere hanging from the substrate on a normal spring. At
//! a given substrate pose every taxel is pushed up by the smallest
//! displacement that clears both the object and the support plane `z = 0`;
//! its force is `spring_k * displacement`, clipped to [`FORCE_MAX`].
//!
//! Lengths are in millimetres, forces in newtons, angles in degrees.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{add_sensor_noise, SensorNoiseModel, TactileFrame, FORCE_MAX};
use crate::learning::ObservationDataset;
use crate::{par, rng};

pub const DEFAULT_EXTENT_MM: f64 = 256.0;
pub const DEFAULT_FILL_SPACING_MM: f64 = 2.0;
pub const DEFAULT_DESCENT_DEPTH_MM: f64 = 1.5;
pub const DEFAULT_TRANSLATE_MM: f64 = 40.0;
pub const DEFAULT_STEPS: usize = 4200;
pub const DEFAULT_CLEARANCE_MM: f64 = 2.0;
pub const DEFAULT_DESCENT_FRACTION: f64 = 0.25;

const MAX_SPHERES: usize = 5_000_000;

/// An object modelled as equal-radius spheres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphereUnionObject {
    pub label: String,
    pub radius: f64,
    pub centers: Vec<[f64; 3]>,
}

impl SphereUnionObject {
    pub fn new(label: impl Into<String>, radius: f64, centers: Vec<[f64; 3]>) -> Result<Self> {
        let obj = Self {
            label: label.into(),
            radius,
            centers,
        };
        obj.validate()?;
        Ok(obj)
    }

    pub fn validate(&self) -> Result<()> {
        if self.centers.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "object {:?} has no spheres",
                self.label
            )));
        }
        if !(self.radius > 0.0) || !self.radius.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "object {:?} sphere radius must be > 0, got {}",
                self.label, self.radius
            )));
        }
        if self.centers.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(())
    }

    /// Highest point of the union.
    pub fn top(&self) -> f64 {
        self.centers.iter().map(|c| c[2]).fold(f64::NEG_INFINITY, f64::max) + self.radius
    }

    /// Lowest point of the union.
    pub fn bottom(&self) -> f64 {
        self.centers.iter().map(|c| c[2]).fold(f64::INFINITY, f64::min) - self.radius
    }

    pub fn translated(mut self, dx: f64, dy: f64, dz: f64) -> Self {
        for c in &mut self.centers {
            c[0] += dx;
            c[1] += dy;
            c[2] += dz;
        }
        self
    }

    /// Put the lowest point on `z = 0` and center the sphere centers
    /// horizontally on the origin.
    pub fn resting_on_plane(self) -> Self {
        let (x0, x1, y0, y1) = self.horizontal_bounds();
        let dz = -self.bottom();
        self.translated(-(x0 + x1) / 2.0, -(y0 + y1) / 2.0, dz)
    }

    /// `(xmin, xmax, ymin, ymax)` of the sphere centers.
    pub fn horizontal_bounds(&self) -> (f64, f64, f64, f64) {
        self.centers.iter().fold(
            (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
            |(a, b, c, d), p| (a.min(p[0]), b.max(p[0]), c.min(p[1]), d.max(p[1])),
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let obj: Self = serde_json::from_str(s)?;
        obj.validate()?;
        Ok(obj)
    }
}

fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Spheres at the given vertices with radius twice the mean
/// nearest-neighbour distance.
pub fn union_from_vertices(vertices: &[[f64; 3]], label: impl Into<String>) -> Result<SphereUnionObject> {
    if vertices.len() < 2 {
        return Err(Error::RadiusUndefined(vertices.len()));
    }
    let nearest = par::map_range(vertices.len(), |i| {
        vertices
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, v)| dist(&vertices[i], v))
            .fold(f64::INFINITY, f64::min)
    });
    let radius = 2.0 * nearest.iter().sum::<f64>() / vertices.len() as f64;
    SphereUnionObject::new(label, radius, vertices.to_vec())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    X,
    Y,
    Z,
}

/// Solid primitives whose surfaces are sampled into sphere unions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Primitive {
    Sphere { radius: f64 },
    Box { x: f64, y: f64, z: f64 },
    Cylinder { radius: f64, height: f64, axis: Axis },
    Ellipsoid { a: f64, b: f64, c: f64 },
}

impl Primitive {
    fn dims(&self) -> Vec<f64> {
        match *self {
            Primitive::Sphere { radius } => vec![radius],
            Primitive::Box { x, y, z } => vec![x, y, z],
            Primitive::Cylinder { radius, height, .. } => vec![radius, height],
            Primitive::Ellipsoid { a, b, c } => vec![a, b, c],
        }
    }
}

/// Sample the surface of a primitive centered on the origin at no more than
/// `fill_spacing` between neighbours; the sphere radius is `fill_spacing`.
pub fn primitive_object(
    label: impl Into<String>,
    primitive: Primitive,
    fill_spacing: f64,
) -> Result<SphereUnionObject> {
    if !(fill_spacing > 0.0) || !fill_spacing.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "fill spacing must be > 0, got {fill_spacing}"
        )));
    }
    if primitive.dims().iter().any(|&d| !(d > 0.0) || !d.is_finite()) {
        return Err(Error::InvalidParameter(format!("degenerate primitive {primitive:?}")));
    }
    let s = fill_spacing;
    let estimate = match primitive {
        Primitive::Sphere { radius } => sphere_count(radius, s),
        Primitive::Ellipsoid { a, b, c } => sphere_count(a.max(b).max(c), s),
        Primitive::Box { x, y, z } => {
            let (a, b, c) = (cells(x, s) + 1, cells(y, s) + 1, cells(z, s) + 1);
            2 * (a * b + a * c + b * c)
        }
        Primitive::Cylinder { radius, height, .. } => {
            (cells(height, s) + 1) * ring_count(radius, s) + 2 * cells(radius, s) * ring_count(radius, s)
        }
    };
    if estimate > MAX_SPHERES {
        return Err(Error::TooLarge {
            size: estimate,
            limit: MAX_SPHERES,
        });
    }
    let centers = match primitive {
        Primitive::Sphere { radius } => fibonacci_sphere(sphere_count(radius, s))
            .into_iter()
            .map(|p| [radius * p[0], radius * p[1], radius * p[2]])
            .collect(),
        Primitive::Ellipsoid { a, b, c } => fibonacci_sphere(sphere_count(a.max(b).max(c), s))
            .into_iter()
            .map(|p| [a * p[0], b * p[1], c * p[2]])
            .collect(),
        Primitive::Box { x, y, z } => box_surface(x, y, z, s),
        Primitive::Cylinder { radius, height, axis } => cylinder_surface(radius, height, s, true, true)
            .into_iter()
            .map(|p| orient(p, axis))
            .collect(),
    };
    SphereUnionObject::new(label, s, centers)
}

fn cells(len: f64, s: f64) -> usize {
    ((len / s).ceil() as usize).max(1)
}

// Fibonacci points have nearest-neighbour spacing close to
// sqrt(area / count); 0.7 s^2 per point keeps it below s.
fn sphere_count(radius: f64, s: f64) -> usize {
    ((4.0 * std::f64::consts::PI * radius * radius / (0.7 * s * s)).ceil() as usize).max(2)
}

fn fibonacci_sphere(n: usize) -> Vec<[f64; 3]> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let th = golden * i as f64;
            [r * th.cos(), r * th.sin(), z]
        })
        .collect()
}

fn box_surface(x: f64, y: f64, z: f64, s: f64) -> Vec<[f64; 3]> {
    let axis = |len: f64| -> Vec<f64> {
        let n = cells(len, s);
        (0..=n).map(|i| -len / 2.0 + len * i as f64 / n as f64).collect()
    };
    let (xs, ys, zs) = (axis(x), axis(y), axis(z));
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    let mut push = |p: [f64; 3]| {
        if seen.insert(p.map(f64::to_bits)) {
            out.push(p);
        }
    };
    for &zv in [zs[0], zs[zs.len() - 1]].iter() {
        for &xv in &xs {
            for &yv in &ys {
                push([xv, yv, zv]);
            }
        }
    }
    for &yv in [ys[0], ys[ys.len() - 1]].iter() {
        for &xv in &xs {
            for &zv in &zs {
                push([xv, yv, zv]);
            }
        }
    }
    for &xv in [xs[0], xs[xs.len() - 1]].iter() {
        for &yv in &ys {
            for &zv in &zs {
                push([xv, yv, zv]);
            }
        }
    }
    out
}

// Points per ring, a multiple of 4 so the ring reaches its extremes on both
// horizontal axes.
fn ring_count(radius: f64, s: f64) -> usize {
    let n = (2.0 * std::f64::consts::PI * radius / s).ceil() as usize;
    n.div_ceil(4).max(1) * 4
}

fn ring(radius: f64, z: f64, n: usize) -> impl Iterator<Item = [f64; 3]> {
    (0..n).map(move |k| {
        let (sn, cs) = sin_cos_deg(360.0 * k as f64 / n as f64);
        [radius * cs, radius * sn, z]
    })
}

fn disc(radius: f64, z: f64, s: f64) -> Vec<[f64; 3]> {
    let nr = cells(radius, s);
    let mut out = vec![[0.0, 0.0, z]];
    for k in 1..nr {
        let r = radius * k as f64 / nr as f64;
        out.extend(ring(r, z, ring_count(r, s)));
    }
    out
}

/// Upright cylinder surface centered on the origin.
fn cylinder_surface(radius: f64, height: f64, s: f64, top: bool, bottom: bool) -> Vec<[f64; 3]> {
    let nz = cells(height, s);
    let na = ring_count(radius, s);
    let mut out = Vec::new();
    for i in 0..=nz {
        out.extend(ring(radius, -height / 2.0 + height * i as f64 / nz as f64, na));
    }
    if top {
        out.extend(disc(radius, height / 2.0, s));
    }
    if bottom {
        out.extend(disc(radius, -height / 2.0, s));
    }
    out
}

fn orient(p: [f64; 3], axis: Axis) -> [f64; 3] {
    match axis {
        Axis::Z => p,
        Axis::X => [p[2], p[1], p[0]],
        Axis::Y => [p[0], p[2], p[1]],
    }
}

/// `(sin, cos)` of an angle in degrees, exact at multiples of 90.
pub fn sin_cos_deg(deg: f64) -> (f64, f64) {
    let r = deg.rem_euclid(360.0);
    if r == 0.0 {
        (0.0, 1.0)
    } else if r == 90.0 {
        (1.0, 0.0)
    } else if r == 180.0 {
        (0.0, -1.0)
    } else if r == 270.0 {
        (-1.0, 0.0)
    } else {
        r.to_radians().sin_cos()
    }
}

/// Vertex clouds for objects that are not single primitives.
mod shapes {
    use super::*;

    /// Surface of a tube of radius `r` swept along a horizontal polyline
    /// `path` (points in the `z = 0` plane).
    pub fn tube(path: &[[f64; 2]], r: f64, s: f64) -> Vec<[f64; 3]> {
        let mut out = Vec::new();
        let na = ring_count(r, s);
        for w in path.windows(2) {
            let (a, b) = (w[0], w[1]);
            let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
            let (tx, ty) = ((b[0] - a[0]) / len, (b[1] - a[1]) / len);
            let steps = cells(len, s);
            for i in 0..steps {
                let f = i as f64 / steps as f64;
                let (cx, cy) = (a[0] + f * (b[0] - a[0]), a[1] + f * (b[1] - a[1]));
                for k in 0..na {
                    let (sn, cs) = sin_cos_deg(360.0 * k as f64 / na as f64);
                    // ring in the plane spanned by the horizontal normal and z
                    out.push([cx - ty * r * cs, cy + tx * r * cs, r * sn]);
                }
            }
        }
        out
    }

    pub fn arc(radius: f64, start_deg: f64, span_deg: f64, s: f64) -> Vec<[f64; 2]> {
        let n = cells(radius * span_deg.to_radians(), s);
        (0..=n)
            .map(|i| {
                let (sn, cs) = sin_cos_deg(start_deg + span_deg * i as f64 / n as f64);
                [radius * cs, radius * sn]
            })
            .collect()
    }

    pub fn banana(s: f64) -> Vec<[f64; 3]> {
        tube(&arc(110.0, 220.0, 100.0, s), 18.0, s)
    }

    /// Open-topped cup: wall and bottom, no lid.
    pub fn cup(s: f64) -> Vec<[f64; 3]> {
        cylinder_surface(40.0, 95.0, s, false, true)
    }

    /// C-shaped clamp body with a straight handle.
    pub fn clamp(s: f64) -> Vec<[f64; 3]> {
        let mut path = arc(45.0, 45.0, 270.0, s);
        let last = *path.last().unwrap();
        path.push([last[0] + 70.0, last[1]]);
        tube(&path, 10.0, s)
    }

    /// Bottle on its side: elongated body and a short nozzle.
    pub fn mustard_side(s: f64) -> Vec<[f64; 3]> {
        let body = fibonacci_sphere(sphere_count(95.0, s))
            .into_iter()
            .map(|p| [95.0 * p[0], 35.0 * p[1], 28.0 * p[2]]);
        let nozzle = cylinder_surface(9.0, 25.0, s, true, false)
            .into_iter()
            .map(|p| orient(p, Axis::X))
            .map(|p| [p[0] + 105.0, p[1], p[2]]);
        body.chain(nozzle).collect()
    }

    /// Upright bottle: elliptical body, tapered shoulder, nozzle.
    pub fn mustard_upright(s: f64) -> Vec<[f64; 3]> {
        let mut out = Vec::new();
        let (a, b, h) = (35.0, 28.0, 150.0);
        let nz = cells(h, s);
        let na = ring_count(a, s);
        for i in 0..=nz {
            let z = h * i as f64 / nz as f64;
            // shoulder narrows the last 30 mm towards the nozzle
            let taper = if z > h - 30.0 {
                1.0 - 0.75 * (z - (h - 30.0)) / 30.0
            } else {
                1.0
            };
            for p in ring(1.0, z, na) {
                out.push([a * taper * p[0], b * taper * p[1], z]);
            }
        }
        out.extend(
            cylinder_surface(8.0, 25.0, s, true, false)
                .into_iter()
                .map(|p| [p[0], p[1], p[2] + h + 12.5]),
        );
        out.extend(disc(a, 0.0, s).into_iter().map(|p| [p[0], p[1] * b / a, 0.0]));
        out
    }
}

/// Object names of the built-in catalog, in class order.
pub const CATALOG: [&str; 16] = [
    "golf_ball",
    "racquetball",
    "volleyball",
    "basketball",
    "cracker_box",
    "cereal_box",
    "jello_box",
    "granola_box",
    "gravy_can",
    "tuna_can",
    "salmon_can",
    "banana",
    "cup",
    "clamp",
    "mustard_side",
    "mustard_upright",
];

/// Build one catalog object by name, resting on the plane.
pub fn catalog_object(name: &str, fill_spacing: f64) -> Result<SphereUnionObject> {
    use Primitive as P;
    let s = fill_spacing;
    let prim = |p| primitive_object(name, p, s);
    let cloud = |v: Vec<[f64; 3]>| union_from_vertices(&v, name);
    let obj = match name {
        "golf_ball" => prim(P::Sphere { radius: 21.35 }),
        "racquetball" => prim(P::Sphere { radius: 28.5 }),
        "volleyball" => prim(P::Sphere { radius: 105.0 }),
        "basketball" => prim(P::Sphere { radius: 120.0 }),
        "cracker_box" => prim(P::Box {
            x: 210.0,
            y: 158.0,
            z: 60.0,
        }),
        "cereal_box" => prim(P::Box {
            x: 180.0,
            y: 120.0,
            z: 45.0,
        }),
        "jello_box" => prim(P::Box {
            x: 110.0,
            y: 89.0,
            z: 35.0,
        }),
        "granola_box" => prim(P::Box {
            x: 150.0,
            y: 95.0,
            z: 40.0,
        }),
        "gravy_can" => prim(P::Cylinder {
            radius: 30.0,
            height: 100.0,
            axis: Axis::Z,
        }),
        "tuna_can" => prim(P::Cylinder {
            radius: 43.0,
            height: 33.0,
            axis: Axis::Z,
        }),
        "salmon_can" => prim(P::Cylinder {
            radius: 33.0,
            height: 95.0,
            axis: Axis::X,
        }),
        "banana" => cloud(shapes::banana(1.5 * s)),
        "cup" => cloud(shapes::cup(1.5 * s)),
        "clamp" => cloud(shapes::clamp(1.5 * s)),
        "mustard_side" => cloud(shapes::mustard_side(1.5 * s)),
        "mustard_upright" => cloud(shapes::mustard_upright(1.5 * s)),
        other => return Err(Error::InvalidParameter(format!("unknown catalog object {other:?}"))),
    }?;
    Ok(obj.resting_on_plane())
}

/// All catalog objects in class order.
pub fn catalog(fill_spacing: f64) -> Result<Vec<SphereUnionObject>> {
    par::try_map_range(CATALOG.len(), |i| catalog_object(CATALOG[i], fill_spacing))
}

/// Rigid planar pose of the substrate: lateral offset of the array center,
/// yaw about the array center, and height of the taxel bottoms at rest.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SubstratePose {
    pub x_mm: f64,
    pub y_mm: f64,
    pub yaw_deg: f64,
    pub z_mm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaxelArraySpec {
    pub side: usize,
    pub extent_mm: f64,
    pub taxel_radius_mm: f64,
    /// N per mm of compression.
    pub spring_k: f64,
    pub pose: SubstratePose,
}

impl TaxelArraySpec {
    /// Default calibration: taxel radius half the pitch, and a spring that
    /// saturates at half-pitch compression.
    pub fn new(side: usize, extent_mm: f64) -> Result<Self> {
        if side == 0 {
            return Err(Error::InvalidParameter("array side must be >= 1".into()));
        }
        let pitch = extent_mm / side as f64;
        let spec = Self {
            side,
            extent_mm,
            taxel_radius_mm: pitch / 2.0,
            spring_k: FORCE_MAX / (pitch / 2.0),
            pose: SubstratePose::default(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_default_extent(side: usize) -> Result<Self> {
        Self::new(side, DEFAULT_EXTENT_MM)
    }

    pub fn pitch(&self) -> f64 {
        self.extent_mm / self.side as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.side == 0 {
            return Err(Error::InvalidParameter("array side must be >= 1".into()));
        }
        let pitch = self.pitch();
        if !(pitch > 0.0) || !pitch.is_finite() {
            return Err(Error::InvalidParameter(format!("array pitch must be > 0, got {pitch}")));
        }
        if !(self.taxel_radius_mm > 0.0) || self.taxel_radius_mm > pitch / 2.0 {
            return Err(Error::InvalidParameter(format!(
                "taxel radius must lie in (0, pitch/2 = {}], got {}",
                pitch / 2.0,
                self.taxel_radius_mm
            )));
        }
        if !(self.spring_k > 0.0) || !self.spring_k.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "spring_k must be > 0, got {}",
                self.spring_k
            )));
        }
        let p = &self.pose;
        if ![p.x_mm, p.y_mm, p.yaw_deg, p.z_mm].iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(())
    }

    /// Taxel `(row, col)` position relative to the array center, before yaw.
    /// Columns run along x and rows along y.
    pub fn taxel_local(&self, row: usize, col: usize) -> (f64, f64) {
        let p = self.pitch();
        let half = self.extent_mm / 2.0;
        ((col as f64 + 0.5) * p - half, (row as f64 + 0.5) * p - half)
    }

    pub fn taxel_world(&self, row: usize, col: usize, pose: &SubstratePose) -> (f64, f64) {
        let (u, v) = self.taxel_local(row, col);
        let (s, c) = sin_cos_deg(pose.yaw_deg);
        (pose.x_mm + c * u - s * v, pose.y_mm + s * u + c * v)
    }
}

/// Spatial index of an object's spheres for a given taxel radius.
///
/// Spheres are bucketed on a horizontal grid whose cell equals the contact
/// reach `object radius + taxel radius`, each bucket sorted from the highest
/// center down so a query can stop once no lower sphere can reach.
#[derive(Debug, Clone)]
pub struct ContactIndex {
    reach: f64,
    object_radius: f64,
    taxel_radius: f64,
    x0: f64,
    y0: f64,
    nx: usize,
    ny: usize,
    starts: Vec<usize>,
    spheres: Vec<[f64; 3]>,
}

impl ContactIndex {
    pub fn new(object: &SphereUnionObject, taxel_radius: f64) -> Result<Self> {
        object.validate()?;
        let reach = object.radius + taxel_radius;
        let (xa, xb, ya, yb) = object.horizontal_bounds();
        let nx = ((xb - xa) / reach).floor() as usize + 1;
        let ny = ((yb - ya) / reach).floor() as usize + 1;
        let cell_of = |c: &[f64; 3]| {
            let i = (((c[0] - xa) / reach) as usize).min(nx - 1);
            let j = (((c[1] - ya) / reach) as usize).min(ny - 1);
            j * nx + i
        };
        let mut keyed: Vec<(usize, [f64; 3])> = object.centers.iter().map(|c| (cell_of(c), *c)).collect();
        keyed.sort_by(|a, b| a.0.cmp(&b.0).then(b.1[2].total_cmp(&a.1[2])));
        let mut starts = vec![0usize; nx * ny + 1];
        for (cell, _) in &keyed {
            starts[cell + 1] += 1;
        }
        for k in 0..nx * ny {
            starts[k + 1] += starts[k];
        }
        Ok(Self {
            reach,
            object_radius: object.radius,
            taxel_radius,
            x0: xa,
            y0: ya,
            nx,
            ny,
            starts,
            spheres: keyed.into_iter().map(|(_, c)| c).collect(),
        })
    }

    pub fn taxel_radius(&self) -> f64 {
        self.taxel_radius
    }

    /// Upward displacement of a taxel sphere at `(px, py)` whose resting
    /// bottom is at height `z`.
    pub fn displacement(&self, px: f64, py: f64, z: f64) -> f64 {
        let center_z = z + self.taxel_radius;
        let reach2 = self.reach * self.reach;
        let mut best = (-z).max(0.0);
        let fi = ((px - self.x0) / self.reach).floor();
        let fj = ((py - self.y0) / self.reach).floor();
        for dj in -1..=1 {
            let j = fj + dj as f64;
            if j < 0.0 || j >= self.ny as f64 {
                continue;
            }
            for di in -1..=1 {
                let i = fi + di as f64;
                if i < 0.0 || i >= self.nx as f64 {
                    continue;
                }
                let cell = j as usize * self.nx + i as usize;
                for c in &self.spheres[self.starts[cell]..self.starts[cell + 1]] {
                    if c[2] + self.reach - center_z <= best {
                        break;
                    }
                    let d2 = (c[0] - px).powi(2) + (c[1] - py).powi(2);
                    if d2 < reach2 {
                        let lift = c[2] + (reach2 - d2).sqrt() - center_z;
                        if lift > best {
                            best = lift;
                        }
                    }
                }
            }
        }
        best
    }

    /// Force frame for `array` at `pose`.
    pub fn frame(&self, array: &TaxelArraySpec, pose: &SubstratePose, timestamp_ms: u64) -> Result<TactileFrame> {
        if array.taxel_radius_mm != self.taxel_radius {
            return Err(Error::InvalidParameter(
                "contact index was built for a different taxel radius".into(),
            ));
        }
        let pitch = array.pitch();
        let side = array.side;
        let forces = par::try_map_range(side * side, |t| {
            let (x, y) = array.taxel_world(t / side, t % side, pose);
            let d = self.displacement(x, y, pose.z_mm);
            if d > pitch {
                return Err(Error::OverCompression {
                    taxel: t,
                    displacement_mm: d,
                    pitch_mm: pitch,
                });
            }
            Ok((array.spring_k * d).min(FORCE_MAX))
        })?;
        TactileFrame::new(side, forces, timestamp_ms)
    }

    pub fn object_radius(&self) -> f64 {
        self.object_radius
    }
}

/// One quasistatic frame of `object` under `array` at `pose`.
pub fn quasistatic_frame(
    array: &TaxelArraySpec,
    object: &SphereUnionObject,
    pose: &SubstratePose,
) -> Result<TactileFrame> {
    array.validate()?;
    ContactIndex::new(object, array.taxel_radius_mm)?.frame(array, pose, 0)
}

/// Press-then-slide motion of the substrate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrajectorySpec {
    /// Final depth of the taxel bottoms below the object top.
    pub descent_depth_mm: f64,
    pub translate_distance_mm: f64,
    pub steps: usize,
    pub dt_ms: u64,
    /// Starting height of the taxel bottoms above the object top.
    pub clearance_mm: f64,
    /// Share of the steps spent descending.
    pub descent_fraction: f64,
}

impl Default for TrajectorySpec {
    fn default() -> Self {
        Self {
            descent_depth_mm: DEFAULT_DESCENT_DEPTH_MM,
            translate_distance_mm: DEFAULT_TRANSLATE_MM,
            steps: DEFAULT_STEPS,
            dt_ms: 1,
            clearance_mm: DEFAULT_CLEARANCE_MM,
            descent_fraction: DEFAULT_DESCENT_FRACTION,
        }
    }
}

impl TrajectorySpec {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::InvalidParameter("trajectory needs at least one step".into()));
        }
        if !(self.descent_fraction > 0.0 && self.descent_fraction <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "descent fraction must lie in (0, 1], got {}",
                self.descent_fraction
            )));
        }
        let lens = [self.descent_depth_mm, self.translate_distance_mm, self.clearance_mm];
        if lens.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "trajectory lengths must be finite and >= 0".into(),
            ));
        }
        if self.dt_ms == 0 {
            return Err(Error::InvalidParameter("dt must be >= 1 ms".into()));
        }
        Ok(())
    }

    /// Number of descent frames; the last one is the observation frame.
    pub fn descent_steps(&self) -> usize {
        ((self.steps as f64 * self.descent_fraction).ceil() as usize).clamp(1, self.steps)
    }

    /// Substrate poses for every step, starting from `start` laterally.
    pub fn poses(&self, start: &SubstratePose, object_top: f64) -> Vec<SubstratePose> {
        let nd = self.descent_steps();
        let z0 = object_top + self.clearance_mm;
        let z1 = object_top - self.descent_depth_mm;
        let nt = self.steps - nd;
        (0..self.steps)
            .map(|t| {
                let mut p = *start;
                if t < nd {
                    p.z_mm = z0 + (z1 - z0) * (t + 1) as f64 / nd as f64;
                } else {
                    p.z_mm = z1;
                    p.x_mm += self.translate_distance_mm * (t - nd + 1) as f64 / nt as f64;
                }
                p
            })
            .collect()
    }

    /// Pose at the last step before the lateral translation.
    pub fn descent_end_pose(&self, start: &SubstratePose, object_top: f64) -> SubstratePose {
        SubstratePose {
            z_mm: object_top - self.descent_depth_mm,
            ..*start
        }
    }
}

/// Frames for a full trajectory, one per step at `dt_ms` spacing.
pub fn run_trajectory(
    array: &TaxelArraySpec,
    object: &SphereUnionObject,
    traj: &TrajectorySpec,
) -> Result<Vec<TactileFrame>> {
    array.validate()?;
    traj.validate()?;
    let index = ContactIndex::new(object, array.taxel_radius_mm)?;
    let poses = traj.poses(&array.pose, object.top());
    par::try_map_range(poses.len(), |t| index.frame(array, &poses[t], t as u64 * traj.dt_ms))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub row_offset_mm: f64,
    pub col_offset_mm: f64,
    pub yaw_deg: f64,
}

impl Perturbation {
    pub fn apply(&self, pose: &SubstratePose) -> SubstratePose {
        SubstratePose {
            x_mm: pose.x_mm + self.col_offset_mm,
            y_mm: pose.y_mm + self.row_offset_mm,
            yaw_deg: pose.yaw_deg + self.yaw_deg,
            z_mm: pose.z_mm,
        }
    }
}

/// Systematic starting offsets and yaws of the array relative to an object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PerturbationGrid {
    pub row_offsets_mm: Vec<f64>,
    pub col_offsets_mm: Vec<f64>,
    pub yaw_deg: Vec<f64>,
}

impl Default for PerturbationGrid {
    /// Offsets 0..=10 mm in 2 mm steps on both axes, yaw 0..=45 in 5 degree
    /// steps: 360 perturbations.
    fn default() -> Self {
        let offsets: Vec<f64> = (0..6).map(|i| 2.0 * i as f64).collect();
        Self {
            row_offsets_mm: offsets.clone(),
            col_offsets_mm: offsets,
            yaw_deg: (0..10).map(|i| 5.0 * i as f64).collect(),
        }
    }
}

impl PerturbationGrid {
    pub fn single() -> Self {
        Self {
            row_offsets_mm: vec![0.0],
            col_offsets_mm: vec![0.0],
            yaw_deg: vec![0.0],
        }
    }

    pub fn len(&self) -> usize {
        self.row_offsets_mm.len() * self.col_offsets_mm.len() * self.yaw_deg.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Perturbation `k` in row-major order over (row offset, col offset, yaw).
    pub fn get(&self, k: usize) -> Perturbation {
        let ny = self.yaw_deg.len();
        let nc = self.col_offsets_mm.len();
        Perturbation {
            row_offset_mm: self.row_offsets_mm[k / (nc * ny)],
            col_offset_mm: self.col_offsets_mm[(k / ny) % nc],
            yaw_deg: self.yaw_deg[k % ny],
        }
    }
}

/// One noisy observation per (object, perturbation): the sensor frame at
/// the end of the descent. Class labels follow the order of `objects`.
///
/// Noise for each observation is seeded from `(noise.seed, object,
/// perturbation, array side)`, so results do not depend on evaluation order.
pub fn generate_observations(
    array: &TaxelArraySpec,
    objects: &[SphereUnionObject],
    grid: &PerturbationGrid,
    traj: &TrajectorySpec,
    noise: &SensorNoiseModel,
) -> Result<ObservationDataset> {
    array.validate()?;
    traj.validate()?;
    noise.validate()?;
    if grid.is_empty() {
        return Err(Error::InvalidParameter("perturbation grid is empty".into()));
    }
    if objects.is_empty() {
        return Err(Error::InvalidParameter("no objects".into()));
    }
    let observe_ts = (traj.descent_steps() as u64 - 1) * traj.dt_ms;
    let mut dataset = ObservationDataset::new(
        objects.iter().map(|o| o.label.clone()).collect(),
        array.side * array.side,
    )?;
    for (oi, object) in objects.iter().enumerate() {
        let index = ContactIndex::new(object, array.taxel_radius_mm)?;
        let top = object.top();
        let frames = par::try_map_range(grid.len(), |k| {
            let start = grid.get(k).apply(&array.pose);
            let pose = traj.descent_end_pose(&start, top);
            let truth = index
                .frame(array, &pose, observe_ts)
                .map_err(|e| Error::InvalidParameter(format!("object {:?}, perturbation {k}: {e}", object.label)))?;
            let model = SensorNoiseModel {
                seed: rng::derive_seed(noise.seed, &[oi as u64, k as u64, array.side as u64]),
                ..*noise
            };
            Ok::<_, Error>(add_sensor_noise(&truth, &model))
        })?;
        for (k, f) in frames.into_iter().enumerate() {
            dataset.push(f.into_forces(), oi, k)?;
        }
    }
    Ok(dataset)
}
