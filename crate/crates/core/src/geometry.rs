//! Path presets and the two loop invariants: signed solid angle on S² and
//! planar winding number around the origin.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauge::winding_number_u1;
use crate::linalg::C64;
use crate::models::ParameterPoint;
use crate::path::{ParameterPath, Piece};

const TAU: f64 = 2.0 * PI;

pub type Vec3 = [f64; 3];

pub(crate) fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub(crate) fn norm3(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn scale3(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

fn normalize(a: Vec3) -> Option<Vec3> {
    let n = norm3(a);
    (n > 0.0 && n.is_finite()).then(|| scale3(a, 1.0 / n))
}

/// Closed loop of unit vectors; the repeated closing node is dropped.
#[derive(Clone, Debug, PartialEq)]
pub struct SphericalLoop {
    nodes: Vec<Vec3>,
}

impl SphericalLoop {
    pub fn new(mut nodes: Vec<Vec3>) -> Result<Self> {
        if nodes.len() >= 2 && dist(nodes[0], *nodes.last().unwrap()) <= 1e-12 {
            nodes.pop();
        }
        if nodes.len() < 3 {
            return Err(Error::InvalidLoop("a spherical loop needs at least 3 distinct nodes".into()));
        }
        for (i, v) in nodes.iter().enumerate() {
            if (norm3(*v) - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidLoop(format!("node {i} is not a unit vector")));
            }
        }
        for i in 0..nodes.len() {
            let (a, b) = (nodes[i], nodes[(i + 1) % nodes.len()]);
            if dot(a, b) <= 0.0 {
                return Err(Error::InvalidLoop(format!("angular step at node {i} is not below pi/2")));
            }
        }
        Ok(Self { nodes })
    }

    /// Radial projection of nonzero points.
    pub fn from_points(points: &[Vec3]) -> Result<Self> {
        let nodes = points
            .iter()
            .enumerate()
            .map(|(i, p)| normalize(*p).ok_or_else(|| Error::InvalidLoop(format!("node {i} is at the origin"))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(nodes)
    }

    pub fn nodes(&self) -> &[Vec3] {
        &self.nodes
    }

    pub fn reversed(&self) -> Self {
        let mut nodes = self.nodes.clone();
        nodes.reverse();
        Self { nodes }
    }

    pub fn centroid(&self) -> Vec3 {
        let mut c = [0.0; 3];
        for v in &self.nodes {
            for k in 0..3 {
                c[k] += v[k];
            }
        }
        scale3(c, 1.0 / self.nodes.len() as f64)
    }
}

fn dist(a: Vec3, b: Vec3) -> f64 {
    norm3([a[0] - b[0], a[1] - b[1], a[2] - b[2]])
}

/// Signed solid angle of the region bounded by `lp` that contains the
/// reference axis (the centroid axis when `axis` is `None`), positive for
/// counterclockwise traversal about it, reported in (−2π, 2π].
///
/// The loop is read as a geodesic polygon and fanned into triangles with
/// apex on the axis, each measured with the Van Oosterom–Strackee formula.
pub fn solid_angle(lp: &SphericalLoop, axis: Option<Vec3>) -> Result<f64> {
    let a = match axis {
        Some(v) => normalize(v).ok_or_else(|| Error::DegenerateLoop("reference axis is zero".into()))?,
        None => {
            let c = lp.centroid();
            if norm3(c) < 1e-9 {
                return Err(Error::DegenerateLoop("centroid axis undefined; supply a reference axis".into()));
            }
            normalize(c).unwrap()
        }
    };
    let n = lp.nodes.len();
    let mut total = 0.0;
    for i in 0..n {
        let (u, v) = (lp.nodes[i], lp.nodes[(i + 1) % n]);
        if dot(u, a) <= -1.0 + 1e-9 {
            return Err(Error::DegenerateLoop(format!("node {i} is antipodal to the reference axis")));
        }
        let num = dot(a, cross(u, v));
        let den = 1.0 + dot(a, u) + dot(u, v) + dot(v, a);
        total += 2.0 * num.atan2(den);
    }
    Ok(reduce_4pi(total))
}

fn reduce_4pi(x: f64) -> f64 {
    let period = 2.0 * TAU;
    let mut r = x - period * (x / period).round();
    if r <= -TAU {
        r += period;
    }
    if r > TAU {
        r -= period;
    }
    r
}

/// Closed loop in the punctured plane.
#[derive(Clone, Debug, PartialEq)]
pub struct PlanarLoop {
    nodes: Vec<[f64; 2]>,
}

impl PlanarLoop {
    pub fn new(mut nodes: Vec<[f64; 2]>) -> Result<Self> {
        if nodes.len() >= 2 {
            let (f, l) = (nodes[0], *nodes.last().unwrap());
            if (f[0] - l[0]).hypot(f[1] - l[1]) <= 1e-12 {
                nodes.pop();
            }
        }
        if let Some(i) = nodes.iter().position(|p| p[0] == 0.0 && p[1] == 0.0) {
            return Err(Error::InvalidLoop(format!("node {i} is at the origin")));
        }
        Ok(Self { nodes })
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn reversed(&self) -> Self {
        let mut nodes = self.nodes.clone();
        nodes.reverse();
        Self { nodes }
    }
}

/// Number of counterclockwise turns around the origin.
pub fn planar_winding(lp: &PlanarLoop) -> Result<i64> {
    let samples: Vec<C64> = lp.nodes.iter().map(|p| C64::new(p[0], p[1])).collect();
    Ok(winding_number_u1(&samples)?.winding)
}

fn default_one() -> f64 {
    1.0
}
fn default_turns() -> i32 {
    1
}
fn default_nodes() -> usize {
    256
}
fn default_edge_nodes() -> usize {
    128
}
fn default_z() -> Vec3 {
    [0.0, 0.0, 1.0]
}

/// Named path constructors, addressable from scenario files as
/// `{"preset": name, "params": {...}}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", content = "params", rename_all = "snake_case", deny_unknown_fields)]
pub enum PathPreset {
    /// Ellipse `center + (rx cos φ, ry sin φ)`, `φ = phase + 2π·turns·t`.
    Circle {
        #[serde(default)]
        center: [f64; 2],
        #[serde(default = "default_one")]
        radius: f64,
        #[serde(default)]
        radius_y: Option<f64>,
        #[serde(default = "default_turns")]
        turns: i32,
        #[serde(default)]
        phase: f64,
        #[serde(default = "default_nodes")]
        nodes: usize,
    },
    /// Circle of polar angle `theta` about `axis`, counterclockwise for positive turns.
    SphericalCap {
        theta: f64,
        #[serde(default = "default_one")]
        radius: f64,
        #[serde(default = "default_z")]
        axis: Vec3,
        #[serde(default = "default_turns")]
        turns: i32,
        #[serde(default = "default_nodes")]
        nodes: usize,
    },
    /// Great-circle arcs through the vertices, closed back to the first.
    GeodesicPolygon {
        vertices: Vec<Vec3>,
        #[serde(default = "default_one")]
        radius: f64,
        #[serde(default = "default_edge_nodes")]
        nodes_per_edge: usize,
    },
    /// Open arc of constant azimuth `phi` from polar angle `theta_start` to `theta_end`.
    Meridian {
        #[serde(default)]
        theta_start: f64,
        theta_end: f64,
        #[serde(default)]
        phi: f64,
        #[serde(default = "default_one")]
        radius: f64,
        #[serde(default = "default_nodes")]
        nodes: usize,
    },
    /// Counterclockwise square of side `side` around `center` in the
    /// coordinate plane `plane`.
    Square {
        center: Vec<f64>,
        plane: [usize; 2],
        side: f64,
    },
    /// `center + Σ_k cos[k]·cos(2π(k+1)t) + sin[k]·sin(2π(k+1)t)`.
    Fourier {
        center: Vec<f64>,
        #[serde(default)]
        cos: Vec<Vec<f64>>,
        #[serde(default)]
        sin: Vec<Vec<f64>>,
        #[serde(default = "default_nodes")]
        nodes: usize,
    },
    Custom {
        nodes: Vec<Vec<f64>>,
    },
}

fn bad(msg: impl Into<String>) -> Error {
    Error::BadPresetParams(msg.into())
}

fn check_nodes(n: usize) -> Result<()> {
    if n < 8 {
        return Err(bad(format!("node count {n} is below 8")));
    }
    Ok(())
}

fn check_radius(r: f64) -> Result<()> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(bad(format!("radius must be positive, got {r}")));
    }
    Ok(())
}

/// Orthonormal `(e1, e2)` with `e1 × e2 = a`.
pub(crate) fn tangent_basis(a: Vec3) -> (Vec3, Vec3) {
    let helper = if a[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let e1 = normalize(cross(cross(a, helper), a)).unwrap();
    (e1, cross(a, e1))
}

pub fn make_path(preset: &PathPreset) -> Result<ParameterPath> {
    match preset {
        PathPreset::Circle { center, radius, radius_y, turns, phase, nodes } => {
            let (rx, ry) = (*radius, radius_y.unwrap_or(*radius));
            check_radius(rx)?;
            check_radius(ry)?;
            check_nodes(*nodes)?;
            if *turns == 0 {
                return Err(bad("turns must be nonzero"));
            }
            let (c, ph, w) = (*center, *phase, TAU * *turns as f64);
            let piece = Piece::Smooth(Arc::new(move |t: f64| {
                let (s, co) = (ph + w * t).sin_cos();
                (vec![c[0] + rx * co, c[1] + ry * s], vec![-rx * s * w, ry * co * w])
            }));
            ParameterPath::from_pieces(2, vec![piece], *nodes * turns.unsigned_abs() as usize)
        }
        PathPreset::SphericalCap { theta, radius, axis, turns, nodes } => {
            check_radius(*radius)?;
            check_nodes(*nodes)?;
            if !(*theta > 0.0 && *theta < PI) {
                return Err(bad(format!("polar angle must lie in (0, pi), got {theta}")));
            }
            if *turns == 0 {
                return Err(bad("turns must be nonzero"));
            }
            let a = normalize(*axis).ok_or_else(|| bad("axis must be nonzero"))?;
            let (e1, e2) = tangent_basis(a);
            let (r, w) = (*radius, TAU * *turns as f64);
            let (st, ct) = theta.sin_cos();
            let piece = Piece::Smooth(Arc::new(move |t: f64| {
                let (s, c) = (w * t).sin_cos();
                let p = (0..3).map(|k| r * (ct * a[k] + st * (c * e1[k] + s * e2[k]))).collect();
                let v = (0..3).map(|k| r * st * w * (-s * e1[k] + c * e2[k])).collect();
                (p, v)
            }));
            ParameterPath::from_pieces(3, vec![piece], *nodes * turns.unsigned_abs() as usize)
        }
        PathPreset::GeodesicPolygon { vertices, radius, nodes_per_edge } => {
            check_radius(*radius)?;
            check_nodes(*nodes_per_edge)?;
            if vertices.len() < 3 {
                return Err(bad("a polygon needs at least 3 vertices"));
            }
            let units =
                vertices.iter().map(|v| normalize(*v).ok_or_else(|| bad("zero vertex"))).collect::<Result<Vec<_>>>()?;
            let mut pieces = Vec::with_capacity(units.len());
            for i in 0..units.len() {
                let (a, b) = (units[i], units[(i + 1) % units.len()]);
                let omega = dot(a, b).clamp(-1.0, 1.0).acos();
                if !(omega > 1e-12 && omega < PI - 1e-9) {
                    return Err(bad(format!("edge {i} is degenerate or antipodal")));
                }
                let (r, so) = (*radius, omega.sin());
                pieces.push(Piece::Smooth(Arc::new(move |t: f64| {
                    let (ca, cb) = (((1.0 - t) * omega).sin() / so, (t * omega).sin() / so);
                    let (da, db) = (-omega * ((1.0 - t) * omega).cos() / so, omega * (t * omega).cos() / so);
                    let p = (0..3).map(|k| r * (ca * a[k] + cb * b[k])).collect();
                    let v = (0..3).map(|k| r * (da * a[k] + db * b[k])).collect();
                    (p, v)
                })));
            }
            ParameterPath::from_pieces(3, pieces, *nodes_per_edge)
        }
        PathPreset::Meridian { theta_start, theta_end, phi, radius, nodes } => {
            check_radius(*radius)?;
            check_nodes(*nodes)?;
            let ok = |t: f64| (0.0..=PI).contains(&t);
            if !ok(*theta_start) || !ok(*theta_end) || theta_start == theta_end {
                return Err(bad("meridian polar angles must be distinct and lie in [0, pi]"));
            }
            let (t0, dt, r) = (*theta_start, theta_end - theta_start, *radius);
            let (sp, cp) = phi.sin_cos();
            let piece = Piece::Smooth(Arc::new(move |t: f64| {
                let (s, c) = (t0 + dt * t).sin_cos();
                (vec![r * s * cp, r * s * sp, r * c], vec![r * c * cp * dt, r * c * sp * dt, -r * s * dt])
            }));
            ParameterPath::from_pieces(3, vec![piece], *nodes)
        }
        PathPreset::Square { center, plane, side } => {
            let d = center.len();
            if plane[0] == plane[1] || plane[0] >= d || plane[1] >= d {
                return Err(bad("square plane must name two distinct coordinates"));
            }
            if !(*side > 0.0 && side.is_finite()) {
                return Err(bad("square side must be positive"));
            }
            let h = side / 2.0;
            let corner = |u: f64, v: f64| {
                let mut p = center.clone();
                p[plane[0]] += u * h;
                p[plane[1]] += v * h;
                ParameterPoint(p)
            };
            ParameterPath::from_nodes(vec![
                corner(-1.0, -1.0),
                corner(1.0, -1.0),
                corner(1.0, 1.0),
                corner(-1.0, 1.0),
                corner(-1.0, -1.0),
            ])
        }
        PathPreset::Fourier { center, cos, sin, nodes } => {
            check_nodes(*nodes)?;
            let d = center.len();
            if d == 0 || cos.iter().chain(sin.iter()).any(|c| c.len() != d) {
                return Err(bad("fourier coefficients must match the center's dimension"));
            }
            if cos.is_empty() && sin.is_empty() {
                return Err(bad("fourier loop needs at least one coefficient"));
            }
            let (c0, ca, sa) = (center.clone(), cos.clone(), sin.clone());
            let piece = Piece::Smooth(Arc::new(move |t: f64| {
                let mut p = c0.clone();
                let mut v = vec![0.0; c0.len()];
                for (k, coeffs) in ca.iter().enumerate() {
                    let w = TAU * (k + 1) as f64;
                    let (s, c) = (w * t).sin_cos();
                    for j in 0..p.len() {
                        p[j] += coeffs[j] * c;
                        v[j] -= coeffs[j] * w * s;
                    }
                }
                for (k, coeffs) in sa.iter().enumerate() {
                    let w = TAU * (k + 1) as f64;
                    let (s, c) = (w * t).sin_cos();
                    for j in 0..p.len() {
                        p[j] += coeffs[j] * s;
                        v[j] += coeffs[j] * w * c;
                    }
                }
                (p, v)
            }));
            ParameterPath::from_pieces(d, vec![piece], *nodes)
        }
        PathPreset::Custom { nodes } => ParameterPath::from_nodes(nodes.iter().cloned().map(ParameterPoint).collect()),
    }
}

/// Nodes of a 3-parameter path as a spherical loop.
pub fn spherical_loop(path: &ParameterPath) -> Result<SphericalLoop> {
    if path.dim() != 3 {
        return Err(Error::InvalidLoop(format!("expected a 3-parameter path, got dimension {}", path.dim())));
    }
    if !path.is_closed() {
        return Err(Error::PathNotClosed);
    }
    let pts: Vec<Vec3> = path.nodes().iter().map(|p| [p.0[0], p.0[1], p.0[2]]).collect();
    SphericalLoop::from_points(&pts)
}

/// Nodes of a 2-parameter path as a planar loop.
pub fn planar_loop(path: &ParameterPath) -> Result<PlanarLoop> {
    if path.dim() != 2 {
        return Err(Error::InvalidLoop(format!("expected a 2-parameter path, got dimension {}", path.dim())));
    }
    if !path.is_closed() {
        return Err(Error::PathNotClosed);
    }
    PlanarLoop::new(path.nodes().iter().map(|p| [p.0[0], p.0[1]]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cap(theta: f64, nodes: usize) -> SphericalLoop {
        let p =
            make_path(&PathPreset::SphericalCap { theta, radius: 1.0, axis: default_z(), turns: 1, nodes }).unwrap();
        spherical_loop(&p).unwrap()
    }

    #[test]
    fn equator_is_a_hemisphere() {
        let lp = cap(PI / 2.0, 256);
        assert!(matches!(solid_angle(&lp, None), Err(Error::DegenerateLoop(_))));
        assert!((solid_angle(&lp, Some([0.0, 0.0, 1.0])).unwrap() - TAU).abs() < 1e-12);
    }

    #[test]
    fn octant_triangle() {
        let p = make_path(&PathPreset::GeodesicPolygon {
            vertices: vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            radius: 1.0,
            nodes_per_edge: 128,
        })
        .unwrap();
        let om = solid_angle(&spherical_loop(&p).unwrap(), None).unwrap();
        assert!((om - PI / 2.0).abs() < 1e-6);
    }

    #[test]
    fn cap_area_converges_quadratically() {
        let exact = TAU * (1.0 - (PI / 3.0).cos());
        let e1 = (solid_angle(&cap(PI / 3.0, 64), None).unwrap() - exact).abs();
        let e2 = (solid_angle(&cap(PI / 3.0, 128), None).unwrap() - exact).abs();
        assert!((solid_angle(&cap(PI / 3.0, 4096), None).unwrap() - PI).abs() < 1e-5);
        let order = (e1 / e2).log2();
        assert!((order - 2.0).abs() < 0.05, "order {order}");
    }

    #[test]
    fn lower_cap_reduces_into_range() {
        // region around −z has area 2π(1 − cos π/3) = π, traversed clockwise about it
        let om = solid_angle(&cap(2.0 * PI / 3.0, 4096), None).unwrap();
        assert!((om + PI).abs() < 1e-5);
    }

    #[test]
    fn planar_examples() {
        let circle = |radius_y: Option<f64>, turns: i32| {
            let p = make_path(&PathPreset::Circle {
                center: [0.0, 0.0],
                radius: 1.0,
                radius_y,
                turns,
                phase: 0.0,
                nodes: 256,
            })
            .unwrap();
            planar_winding(&planar_loop(&p).unwrap()).unwrap()
        };
        assert_eq!(circle(None, 1), 1);
        assert_eq!(circle(None, 2), 2);
        assert_eq!(circle(Some(0.3), -1), -1);
    }

    #[test]
    fn preset_validation() {
        assert!(make_path(&PathPreset::SphericalCap {
            theta: 0.0,
            radius: 1.0,
            axis: default_z(),
            turns: 1,
            nodes: 64
        })
        .is_err());
        assert!(make_path(&PathPreset::Circle {
            center: [0.0, 0.0],
            radius: -1.0,
            radius_y: None,
            turns: 1,
            phase: 0.0,
            nodes: 64
        })
        .is_err());
        assert!(make_path(&PathPreset::Meridian { theta_start: 0.0, theta_end: 1.0, phi: 0.0, radius: 1.0, nodes: 4 })
            .is_err());
        let sq = make_path(&PathPreset::Square { center: vec![1.0, 2.0], plane: [0, 1], side: 0.5 }).unwrap();
        assert!(sq.is_closed());
        assert_eq!(sq.nodes()[2].coords(), &[1.25, 2.25]);
    }

    #[test]
    fn preset_json_shape() {
        let p: PathPreset = serde_json::from_str(r#"{"preset": "spherical_cap", "params": {"theta": 1.0}}"#).unwrap();
        assert_eq!(p, PathPreset::SphericalCap { theta: 1.0, radius: 1.0, axis: default_z(), turns: 1, nodes: 256 });
    }

    #[test]
    fn smooth_presets_have_consistent_velocity() {
        let presets = [
            PathPreset::SphericalCap { theta: 0.7, radius: 2.0, axis: [1.0, 2.0, -0.5], turns: 1, nodes: 64 },
            PathPreset::Meridian { theta_start: 0.1, theta_end: 2.0, phi: 0.4, radius: 1.5, nodes: 64 },
            PathPreset::GeodesicPolygon {
                vertices: vec![[1.0, 0.2, 0.1], [0.1, 1.0, 0.3], [0.2, 0.1, 1.0]],
                radius: 1.0,
                nodes_per_edge: 16,
            },
            PathPreset::Fourier {
                center: vec![0.1, 0.2],
                cos: vec![vec![1.0, 0.0], vec![0.1, 0.2]],
                sin: vec![vec![0.0, 1.0]],
                nodes: 64,
            },
        ];
        for preset in &presets {
            let path = make_path(preset).unwrap();
            for piece in path.pieces() {
                for &t in &[0.1, 0.5, 0.9] {
                    let h = 1e-6;
                    let (_, v) = piece.eval(t);
                    let (p1, _) = piece.eval(t + h);
                    let (p0, _) = piece.eval(t - h);
                    for k in 0..v.len() {
                        assert!(((p1[k] - p0[k]) / (2.0 * h) - v[k]).abs() < 1e-6, "{preset:?}");
                    }
                }
            }
        }
    }

    proptest! {
        #[test]
        fn reversal_negates_invariants(theta in 0.2f64..2.9, tilt in 0.0f64..1.0, turns in 1i32..3) {
            let axis = [tilt, 0.3 * tilt, 1.0];
            let p = make_path(&PathPreset::SphericalCap { theta, radius: 1.0, axis, turns: 1, nodes: 128 }).unwrap();
            let lp = spherical_loop(&p).unwrap();
            let a = solid_angle(&lp, Some(axis)).unwrap();
            let b = solid_angle(&lp.reversed(), Some(axis)).unwrap();
            prop_assert!((reduce_4pi(a + b)).abs() < 1e-9);

            let c = make_path(&PathPreset::Circle { center: [0.1, -0.2], radius: 1.0, radius_y: Some(0.6), turns, phase: 0.3, nodes: 64 }).unwrap();
            let pl = planar_loop(&c).unwrap();
            prop_assert_eq!(planar_winding(&pl).unwrap(), turns as i64);
            prop_assert_eq!(planar_winding(&pl.reversed()).unwrap(), -(turns as i64));
        }
    }
}
