//! Local sections, transition functions and the topological class of an
//! eigenbundle.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigenbundle::{branch_sample, gauge_fix, Frame, SpectralTolerances};
use crate::error::{Error, Result};
use crate::geometry::{cross, dot, norm3, scale3, Vec3};
use crate::linalg::{exp_antihermitian, overlap, ComplexMatrix, UnitaryMatrix, C64, I};
use crate::models::{
    BaseTopology, BranchDescriptor, HamiltonianFamily, ParameterPoint, RotationCovariance, SharedModel,
};
use crate::path::{ParameterPath, Piece};
use crate::transport::transport_frame;

pub type FrameFn = Arc<dyn Fn(&ParameterPoint) -> Result<ComplexMatrix> + Send + Sync>;
pub type DomainFn = Arc<dyn Fn(&ParameterPoint) -> bool + Send + Sync>;

/// A smooth frame of one branch over a patch of parameter space.
#[derive(Clone)]
pub struct LocalSection {
    patch: String,
    branch: BranchDescriptor,
    domain: DomainFn,
    frame: FrameFn,
}

impl fmt::Debug for LocalSection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LocalSection({:?}, branch {:?})", self.patch, self.branch.label)
    }
}

impl LocalSection {
    pub fn new(patch: impl Into<String>, branch: BranchDescriptor, domain: DomainFn, frame: FrameFn) -> Self {
        Self { patch: patch.into(), branch, domain, frame }
    }

    pub fn patch(&self) -> &str {
        &self.patch
    }

    pub fn branch(&self) -> &BranchDescriptor {
        &self.branch
    }

    pub fn contains(&self, b: &ParameterPoint) -> bool {
        (self.domain)(b)
    }

    pub fn frame_at(&self, b: &ParameterPoint) -> Result<Frame> {
        if !self.contains(b) {
            return Err(Error::OutOfPatch { patch: self.patch.clone(), point: b.0.clone() });
        }
        Ok(Frame { point: b.clone(), matrix: (self.frame)(b)? })
    }

    /// The section `b ↦ frame(b)·g(b)`.
    pub fn regauged(&self, g: Arc<dyn Fn(&ParameterPoint) -> ComplexMatrix + Send + Sync>) -> LocalSection {
        let frame = Arc::clone(&self.frame);
        LocalSection {
            patch: self.patch.clone(),
            branch: self.branch.clone(),
            domain: Arc::clone(&self.domain),
            frame: Arc::new(move |b| Ok(&frame(b)? * &g(b))),
        }
    }
}

/// Patch of the sphere around one pole; it excludes the opposite pole.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pole {
    #[serde(rename = "+")]
    North,
    #[serde(rename = "-")]
    South,
}

impl Pole {
    pub fn label(self) -> &'static str {
        match self {
            Pole::North => "+",
            Pole::South => "-",
        }
    }

    pub fn parse(s: &str) -> Option<Pole> {
        match s {
            "+" | "north" => Some(Pole::North),
            "-" | "−" | "south" => Some(Pole::South),
            _ => None,
        }
    }

    pub fn direction(self) -> Vec3 {
        match self {
            Pole::North => [0.0, 0.0, 1.0],
            Pole::South => [0.0, 0.0, -1.0],
        }
    }
}

fn rotation_of(model: &dyn HamiltonianFamily) -> Result<&RotationCovariance> {
    model.rotation().ok_or_else(|| Error::NotRotationCovariant(model.name().to_string()))
}

/// Frame of `branch` at the unit point in direction `pole`: the model's
/// declared pole frame when it spans the fibre, else the gauge-fixed eigenframe.
pub fn pole_frame(
    model: &dyn HamiltonianFamily,
    branch: &BranchDescriptor,
    pole: Pole,
    tol: &SpectralTolerances,
) -> Result<ComplexMatrix> {
    let rot = rotation_of(model)?;
    let sample = branch_sample(model, &rot.from_geometric(pole.direction()), branch, tol)?;
    if let Some(f) = rot.pole_frame(&branch.label) {
        if f.shape() == sample.basis.shape() && (sample.projector.matrix() * f).max_abs_diff(f) <= 1e-10 {
            return Ok(f.clone());
        }
    }
    Ok(gauge_fix(&sample.basis))
}

/// `exp(−iθ(b)·axis(b)·G)` applied to the pole frame, with `axis = pole × b̂`
/// normalized and `θ` the angle from the pole to `b̂`.
fn rotated_frame(
    rot: &RotationCovariance,
    pole: Pole,
    pole_frame: &ComplexMatrix,
    b: &ParameterPoint,
) -> Result<ComplexMatrix> {
    let g = rot.to_geometric(b);
    let r = norm3(g);
    if !(r > 0.0) {
        return Err(Error::OutOfDomain(b.0.clone()));
    }
    let u = scale3(g, 1.0 / r);
    let p = pole.direction();
    if norm3([u[0] + p[0], u[1] + p[1], u[2] + p[2]]) < 1e-9 {
        return Err(Error::AtAntipode(pole.label().to_string()));
    }
    let c = cross(p, u);
    let sn = norm3(c);
    if sn == 0.0 {
        return Ok(pole_frame.clone());
    }
    let theta = sn.atan2(dot(p, u));
    let generator = rot.generator_along(scale3(c, theta / sn));
    let rotation = exp_antihermitian(&generator.scale(-I))?;
    Ok(rotation.matrix() * pole_frame)
}

pub fn rotate_to_pole_frame(
    model: &dyn HamiltonianFamily,
    branch: &BranchDescriptor,
    pole: Pole,
    b: &ParameterPoint,
    tol: &SpectralTolerances,
) -> Result<Frame> {
    let rot = rotation_of(model)?;
    let f0 = pole_frame(model, branch, pole, tol)?;
    Ok(Frame { point: b.clone(), matrix: rotated_frame(rot, pole, &f0, b)? })
}

fn away_from_antipode(rot: &RotationCovariance, pole: Pole, b: &ParameterPoint) -> bool {
    let g = rot.to_geometric(b);
    let r = norm3(g);
    let p = pole.direction();
    r > 0.0 && norm3([g[0] / r + p[0], g[1] / r + p[1], g[2] / r + p[2]]) >= 1e-9
}

/// Rotate-to-pole section over the sphere minus the opposite pole.
pub fn rotate_to_pole_section(
    model: SharedModel,
    branch: &BranchDescriptor,
    pole: Pole,
    tol: &SpectralTolerances,
) -> Result<LocalSection> {
    let rot = rotation_of(model.as_ref())?.clone();
    let f0 = pole_frame(model.as_ref(), branch, pole, tol)?;
    let dom_rot = rot.clone();
    let dom_model = Arc::clone(&model);
    Ok(LocalSection::new(
        pole.label(),
        branch.clone(),
        Arc::new(move |b| b.dim() == 3 && dom_model.in_domain(b) && away_from_antipode(&dom_rot, pole, b)),
        Arc::new(move |b| rotated_frame(&rot, pole, &f0, b)),
    ))
}

/// Global section `e^{i·rate·φ} exp(−iJφG) w₀` of a planar-covariant model.
pub fn planar_section(model: SharedModel, branch: &BranchDescriptor, tol: &SpectralTolerances) -> Result<LocalSection> {
    let pc = model
        .planar()
        .ok_or_else(|| Error::InvalidModel(format!("model `{}` has no planar covariance", model.name())))?
        .clone();
    let w0 = gauge_fix(&branch_sample(model.as_ref(), &ParameterPoint(vec![1.0, 0.0]), branch, tol)?.basis);
    let dom_model = Arc::clone(&model);
    Ok(LocalSection::new(
        "planar",
        branch.clone(),
        Arc::new(move |b| b.dim() == 2 && dom_model.in_domain(b)),
        Arc::new(move |b| {
            let phi = b.0[1].atan2(b.0[0]);
            let rot = exp_antihermitian(&pc.generator.scale(-I * (pc.winding as f64 * phi)))?;
            Ok((rot.matrix() * &w0).scale(C64::from_polar(1.0, pc.phase_rate * phi)))
        }),
    ))
}

/// Gauge-fixed eigenframe at every point; smooth wherever the pivot row of
/// each column stays put.
pub fn eigenframe_section(model: SharedModel, branch: &BranchDescriptor, tol: &SpectralTolerances) -> LocalSection {
    let (m1, m2, tol) = (Arc::clone(&model), model, *tol);
    let br = branch.clone();
    LocalSection::new(
        "eigenframe",
        branch.clone(),
        Arc::new(move |b| b.dim() == m1.param_dim() && m1.in_domain(b)),
        Arc::new(move |b| Ok(gauge_fix(&branch_sample(m2.as_ref(), b, &br, &tol)?.basis))),
    )
}

fn geometric_map(model: &dyn HamiltonianFamily) -> (impl Fn(&ParameterPoint) -> Vec3, impl Fn(Vec3) -> ParameterPoint) {
    let rot = model.rotation().cloned();
    let rot2 = rot.clone();
    (
        move |b: &ParameterPoint| match &rot {
            Some(r) => r.to_geometric(b),
            None => [b.0[0], b.0[1], b.0[2]],
        },
        move |g: Vec3| match &rot2 {
            Some(r) => r.from_geometric(g),
            None => ParameterPoint(g.to_vec()),
        },
    )
}

/// Section obtained by parallel transport of the pole frame along the great
/// circle from the pole to `b̂` (at radius ‖b‖). Needs no symmetry.
pub fn meridian_transport_section(
    model: SharedModel,
    branch: &BranchDescriptor,
    pole: Pole,
    steps: usize,
    tol: &SpectralTolerances,
) -> Result<LocalSection> {
    if model.param_dim() != 3 {
        return Err(Error::InvalidModel("meridian sections need a 3-parameter model".into()));
    }
    let p = pole.direction();
    let dom_model = Arc::clone(&model);
    let br = branch.clone();
    let tol = *tol;
    Ok(LocalSection::new(
        pole.label(),
        branch.clone(),
        Arc::new(move |b| {
            let (to_g, _) = geometric_map(dom_model.as_ref());
            let g = to_g(b);
            let r = norm3(g);
            b.dim() == 3
                && dom_model.in_domain(b)
                && r > 0.0
                && norm3([g[0] / r + p[0], g[1] / r + p[1], g[2] / r + p[2]]) >= 1e-9
        }),
        Arc::new(move |b| {
            let (to_g, from_g) = geometric_map(model.as_ref());
            let g = to_g(b);
            let r = norm3(g);
            let u = scale3(g, 1.0 / r);
            let start = from_g(scale3(p, r));
            let f0 = gauge_fix(&branch_sample(model.as_ref(), &start, &br, &tol)?.basis);
            let omega = dot(p, u).clamp(-1.0, 1.0).acos();
            if omega < 1e-12 {
                return Ok(f0);
            }
            let so = omega.sin();
            let (_, from_g) = geometric_map(model.as_ref());
            let arc = Piece::Smooth(Arc::new(move |t: f64| {
                let (ca, cb) = (((1.0 - t) * omega).sin() / so, (t * omega).sin() / so);
                let (da, db) = (-omega * ((1.0 - t) * omega).cos() / so, omega * (t * omega).cos() / so);
                let pt = from_g([0, 1, 2].map(|k| r * (ca * p[k] + cb * u[k])));
                let vt = from_g([0, 1, 2].map(|k| r * (da * p[k] + db * u[k])));
                (pt.0, vt.0)
            }));
            let path = ParameterPath::from_pieces(3, vec![arc], 1)?;
            Ok(transport_frame(model.as_ref(), &path, &br, steps, &tol, Some(&f0))?.matrix)
        }),
    ))
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransitionSample {
    pub point: ParameterPoint,
    pub matrix: UnitaryMatrix,
}

/// `ψ_{αβ}(b)` with entry (j, i) = ⟨w_β^j(b) | w_α^i(b)⟩.
pub fn transition_function(a: &LocalSection, b: &LocalSection, point: &ParameterPoint) -> Result<TransitionSample> {
    let fa = a.frame_at(point)?;
    let fb = b.frame_at(point)?;
    let matrix = UnitaryMatrix::new(overlap(&fa.matrix, &fb.matrix)?)?;
    Ok(TransitionSample { point: point.clone(), matrix })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct U1Winding {
    pub winding: i64,
    pub residual: f64,
}

/// Winding of a closed loop of nonzero complex numbers (the last sample
/// connects back to the first).
pub fn winding_number_u1(samples: &[C64]) -> Result<U1Winding> {
    if samples.len() < 8 {
        return Err(Error::TooFewSamples(samples.len()));
    }
    if let Some(i) = samples.iter().position(|z| !(z.norm() > 0.0) || !z.is_finite()) {
        return Err(Error::ZeroSample(i));
    }
    let mut total = 0.0;
    for k in 0..samples.len() {
        let step = (samples[(k + 1) % samples.len()] / samples[k]).arg();
        if step.abs() >= PI - 1e-9 {
            return Err(Error::AliasedSampling { index: k, step });
        }
        total += step;
    }
    let turns = total / (2.0 * PI);
    let winding = turns.round();
    let residual = (turns - winding).abs();
    if residual >= 0.01 {
        return Err(Error::NonIntegerWinding(residual));
    }
    Ok(U1Winding { winding: winding as i64, residual })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rationale {
    /// K = 1 over S²: the class is the winding of the transition function.
    AbelianWinding,
    /// Zero det winding over S²: the bundle is orientable, hence trivial.
    OrientableSphere,
    /// Nonzero det winding over S²: first Chern number obstructs a global frame.
    DetWindingObstruction,
    /// Every bundle over a base homotopic to a circle is trivial.
    CircleBase,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopologyReport {
    pub branch: String,
    pub det_winding: i64,
    pub trivializable: bool,
    pub rationale: Rationale,
    pub samples_used: usize,
    pub rounding_residual: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifyOptions {
    pub samples: usize,
    pub radius: f64,
    /// RK4 steps per section evaluation for models without rotation covariance.
    pub transport_steps: usize,
    pub spectral: SpectralTolerances,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self { samples: 256, radius: 1.0, transport_steps: 64, spectral: SpectralTolerances::default() }
    }
}

/// The two polar sections used for classification: rotate-to-pole when the
/// model is rotation covariant, meridian transport otherwise.
pub fn polar_sections(
    model: &SharedModel,
    branch: &BranchDescriptor,
    opts: &ClassifyOptions,
) -> Result<(LocalSection, LocalSection)> {
    if model.rotation().is_some() {
        Ok((
            rotate_to_pole_section(Arc::clone(model), branch, Pole::North, &opts.spectral)?,
            rotate_to_pole_section(Arc::clone(model), branch, Pole::South, &opts.spectral)?,
        ))
    } else {
        Ok((
            meridian_transport_section(Arc::clone(model), branch, Pole::North, opts.transport_steps, &opts.spectral)?,
            meridian_transport_section(Arc::clone(model), branch, Pole::South, opts.transport_steps, &opts.spectral)?,
        ))
    }
}

/// `(φ, ψ_{+−})` at `samples` equator points, uniform in azimuth.
pub fn equator_transitions(
    model: &SharedModel,
    branch: &BranchDescriptor,
    opts: &ClassifyOptions,
) -> Result<Vec<(f64, TransitionSample)>> {
    let (plus, minus) = polar_sections(model, branch, opts)?;
    let (_, from_g) = geometric_map(model.as_ref());
    (0..opts.samples)
        .into_par_iter()
        .map(|k| {
            let phi = 2.0 * PI * k as f64 / opts.samples as f64;
            let b = from_g([opts.radius * phi.cos(), opts.radius * phi.sin(), 0.0]);
            Ok((phi, transition_function(&plus, &minus, &b)?))
        })
        .collect()
}

pub fn classify_bundle(
    model: &SharedModel,
    branch: &BranchDescriptor,
    opts: &ClassifyOptions,
) -> Result<TopologyReport> {
    match model.base_topology() {
        BaseTopology::Circle1 => Ok(TopologyReport {
            branch: branch.label.clone(),
            det_winding: 0,
            trivializable: true,
            rationale: Rationale::CircleBase,
            samples_used: 0,
            rounding_residual: 0.0,
        }),
        BaseTopology::Sphere2 => {
            let dets: Vec<C64> = equator_transitions(model, branch, opts)?
                .iter()
                .map(|(_, t)| t.matrix.matrix().determinant())
                .collect();
            let w = winding_number_u1(&dets)?;
            let rationale = match (branch.degeneracy, w.winding) {
                (1, _) => Rationale::AbelianWinding,
                (_, 0) => Rationale::OrientableSphere,
                _ => Rationale::DetWindingObstruction,
            };
            Ok(TopologyReport {
                branch: branch.label.clone(),
                det_winding: w.winding,
                trivializable: w.winding == 0,
                rationale,
                samples_used: dets.len(),
                rounding_residual: w.residual,
            })
        }
        BaseTopology::Other => {
            Err(Error::InvalidModel(format!("model `{}` declares no base homotopy type", model.name())))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ONE;
    use crate::models::{make_lambda_system, make_planar_spin, make_spin_dipole, Spin};

    fn dipole(s: f64) -> SharedModel {
        Arc::new(make_spin_dipole(Spin::new(s).unwrap()))
    }

    #[test]
    fn rotate_to_pole_examples() {
        let m = dipole(0.5);
        let br = m.branch("+1/2").unwrap();
        let tol = SpectralTolerances::default();
        let at_pole = rotate_to_pole_frame(m.as_ref(), &br, Pole::North, &[0.0, 0.0, 3.0].into(), &tol).unwrap();
        assert_eq!(at_pole.matrix, pole_frame(m.as_ref(), &br, Pole::North, &tol).unwrap());
        let eq = rotate_to_pole_frame(m.as_ref(), &br, Pole::North, &[1.0, 0.0, 0.0].into(), &tol).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((eq.matrix[(0, 0)] - C64::new(s, 0.0)).norm() < 1e-14);
        assert!((eq.matrix[(1, 0)] - C64::new(s, 0.0)).norm() < 1e-14);
        let err = rotate_to_pole_frame(m.as_ref(), &br, Pole::North, &[0.0, 0.0, -2.0].into(), &tol).unwrap_err();
        assert_eq!(err, Error::AtAntipode("+".into()));
    }

    #[test]
    fn winding_examples() {
        let phis: Vec<f64> = (0..64).map(|k| 2.0 * PI * k as f64 / 64.0).collect();
        let w = |f: &dyn Fn(f64) -> C64| {
            winding_number_u1(&phis.iter().map(|&p| f(p)).collect::<Vec<_>>()).unwrap().winding
        };
        assert_eq!(w(&|_| C64::new(0.3, 0.1)), 0);
        assert_eq!(w(&|p| C64::from_polar(1.0, 2.0 * p)), 2);
        assert_eq!(w(&|p| C64::from_polar(2.0, -p)), -1);
        assert!(matches!(winding_number_u1(&[ONE; 4]), Err(Error::TooFewSamples(4))));
        let mut zs: Vec<C64> = phis.iter().map(|&p| C64::from_polar(1.0, p)).collect();
        zs[3] = C64::new(0.0, 0.0);
        assert!(matches!(winding_number_u1(&zs), Err(Error::ZeroSample(3))));
        let fast: Vec<C64> = phis.iter().map(|&p| C64::from_polar(1.0, 32.0 * p)).collect();
        assert!(matches!(winding_number_u1(&fast), Err(Error::AliasedSampling { .. })));
    }

    #[test]
    fn winding_doubles_under_self_concatenation() {
        let zs: Vec<C64> =
            (0..40).map(|k| C64::from_polar(1.0 + 0.3 * (k as f64).sin(), -3.0 * 2.0 * PI * k as f64 / 40.0)).collect();
        let twice: Vec<C64> = zs.iter().chain(zs.iter()).cloned().collect();
        assert_eq!(winding_number_u1(&twice).unwrap().winding, 2 * winding_number_u1(&zs).unwrap().winding);
    }

    #[test]
    fn spin_transition_is_a_pure_winding_phase() {
        for s in [0.5, 1.0, 1.5] {
            let m = dipole(s);
            for br in m.branches().to_vec() {
                let mval: f64 = br.label.parse::<f64>().unwrap_or_else(|_| {
                    let (n, d) = br.label.split_once('/').unwrap();
                    n.parse::<f64>().unwrap() / d.parse::<f64>().unwrap()
                });
                let tr = equator_transitions(&m, &br, &ClassifyOptions { samples: 16, ..Default::default() }).unwrap();
                let c = tr[0].1.matrix.matrix()[(0, 0)];
                for (phi, t) in &tr {
                    let expected = C64::from_polar(1.0, 2.0 * mval * phi) * c;
                    assert!((t.matrix.matrix()[(0, 0)] - expected).norm() < 1e-10, "s={s} m={mval}");
                }
            }
        }
    }

    #[test]
    fn spin_classes() {
        let tol = ClassifyOptions::default();
        let half = dipole(0.5);
        let r = classify_bundle(&half, &half.branch("+1/2").unwrap(), &tol).unwrap();
        assert_eq!((r.det_winding, r.trivializable, r.rationale), (1, false, Rationale::AbelianWinding));
        let one = dipole(1.0);
        assert_eq!(classify_bundle(&one, &one.branch("1").unwrap(), &tol).unwrap().det_winding, 2);
    }

    #[test]
    fn lambda_dark_transition_matrix() {
        let m: SharedModel = Arc::new(make_lambda_system());
        let br = m.branch("dark").unwrap();
        let tr = equator_transitions(&m, &br, &ClassifyOptions { samples: 32, ..Default::default() }).unwrap();
        for (alpha, t) in &tr {
            let (s2, c2) = (2.0 * alpha).sin_cos();
            let expected = ComplexMatrix::from_real_rows(&[vec![-c2, -s2], vec![-s2, c2]]).unwrap();
            assert!(t.matrix.matrix().max_abs_diff(&expected) < 1e-12, "alpha {alpha}");
        }
        let r = classify_bundle(&m, &br, &ClassifyOptions::default()).unwrap();
        assert_eq!((r.det_winding, r.trivializable, r.rationale), (0, true, Rationale::OrientableSphere));
    }

    #[test]
    fn planar_section_is_single_valued() {
        let m: SharedModel = Arc::new(make_planar_spin(Spin::new(1.5).unwrap(), 1, 1.0).unwrap());
        for br in m.branches().to_vec() {
            let sec = planar_section(Arc::clone(&m), &br, &Default::default()).unwrap();
            let a = sec.frame_at(&[-1.0, 1e-13].into()).unwrap().matrix;
            let b = sec.frame_at(&[-1.0, -1e-13].into()).unwrap().matrix;
            assert!(a.max_abs_diff(&b) < 1e-10);
            let s = branch_sample(m.as_ref(), &[0.3, -0.7].into(), &br, &Default::default()).unwrap();
            assert!(sec.frame_at(&[0.3, -0.7].into()).unwrap().fibre_residual(&s) < 1e-10);
        }
        let r = classify_bundle(&m, &m.branches()[0], &Default::default()).unwrap();
        assert!(r.trivializable);
        assert_eq!(r.rationale, Rationale::CircleBase);
    }

    #[test]
    fn meridian_sections_agree_on_class() {
        let m = dipole(1.0);
        let br = m.branch("1").unwrap();
        let plus = meridian_transport_section(Arc::clone(&m), &br, Pole::North, 48, &Default::default()).unwrap();
        let minus = meridian_transport_section(Arc::clone(&m), &br, Pole::South, 48, &Default::default()).unwrap();
        let dets: Vec<C64> = (0..64)
            .map(|k| {
                let phi = 2.0 * PI * k as f64 / 64.0;
                let b: ParameterPoint = [phi.cos(), phi.sin(), 0.0].into();
                transition_function(&plus, &minus, &b).unwrap().matrix.matrix().determinant()
            })
            .collect();
        assert_eq!(winding_number_u1(&dets).unwrap().winding, 2);
        let s = branch_sample(m.as_ref(), &[0.3, -0.2, 0.5].into(), &br, &Default::default()).unwrap();
        assert!(plus.frame_at(&[0.3, -0.2, 0.5].into()).unwrap().fibre_residual(&s) < 1e-10);
    }

    #[test]
    fn cocycle_identity_and_out_of_patch() {
        let m = dipole(1.0);
        let br = m.branch("0").unwrap();
        let tol = SpectralTolerances::default();
        let plus = rotate_to_pole_section(Arc::clone(&m), &br, Pole::North, &tol).unwrap();
        let minus = rotate_to_pole_section(Arc::clone(&m), &br, Pole::South, &tol).unwrap();
        let b: ParameterPoint = [0.4, -0.3, 0.2].into();
        let ab = transition_function(&plus, &minus, &b).unwrap();
        let ba = transition_function(&minus, &plus, &b).unwrap();
        assert!((ab.matrix.matrix() * ba.matrix.matrix()).max_abs_diff(&ComplexMatrix::identity(1)) < 1e-10);
        assert!(matches!(transition_function(&plus, &minus, &[0.0, 0.0, -1.0].into()), Err(Error::OutOfPatch { .. })));
    }
}
