//! Parameter-dependent Hamiltonians.
//!
//! A [`HamiltonianFamily`] maps parameter points to Hermitian operators and
//! declares which points are admissible (the allowed parameter space, where
//! every declared energy branch keeps its degeneracy). Three concrete families
//! ship with the crate: a spin in a magnetic field, the four-level Λ/tripod
//! system with a degenerate dark pair, and a spin coupled to a planar field
//! direction with winding `J`. User models come in either as a closure
//! ([`CallbackModel`]) or as a tabulated grid ([`TabulatedModel`]).

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, HermitianOperator, C64, I, ONE, ZERO};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParameterPoint(pub Vec<f64>);

impl ParameterPoint {
    pub fn new(coords: impl Into<Vec<f64>>) -> Self {
        Self(coords.into())
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn offset(&self, k: usize, h: f64) -> ParameterPoint {
        let mut c = self.0.clone();
        c[k] += h;
        ParameterPoint(c)
    }

    pub fn distance(&self, other: &ParameterPoint) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    }
}

impl From<Vec<f64>> for ParameterPoint {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl<const N: usize> From<[f64; N]> for ParameterPoint {
    fn from(v: [f64; N]) -> Self {
        Self(v.to_vec())
    }
}

/// An energy branch: a label, its degeneracy and the index of its first
/// eigenvalue in the ascending spectrum at a reference point.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchDescriptor {
    pub label: String,
    pub degeneracy: usize,
    pub first_index: usize,
}

impl BranchDescriptor {
    pub fn new(label: impl Into<String>, degeneracy: usize, first_index: usize) -> Self {
        Self { label: label.into(), degeneracy, first_index }
    }

    pub fn index_range(&self) -> std::ops::Range<usize> {
        self.first_index..self.first_index + self.degeneracy
    }
}

/// Homotopy type of the allowed parameter space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseTopology {
    Sphere2,
    Circle1,
    Other,
}

/// `H(R·b) = exp(−iθ n·G) H(b) exp(iθ n·G)` for every rotation `R = R(n, θ)`
/// acting on the geometric vector `axes · b`.
#[derive(Clone, Debug)]
pub struct RotationCovariance {
    pub generators: [ComplexMatrix; 3],
    /// Orthogonal map from parameter coordinates to the geometric vector.
    pub axes: [[f64; 3]; 3],
    /// Fixed frames at the poles for selected branches (label, n×K frame).
    pub pole_frames: Vec<(String, ComplexMatrix)>,
}

impl RotationCovariance {
    pub fn to_geometric(&self, b: &ParameterPoint) -> [f64; 3] {
        let c = b.coords();
        let mut out = [0.0; 3];
        for (i, row) in self.axes.iter().enumerate() {
            out[i] = row[0] * c[0] + row[1] * c[1] + row[2] * c[2];
        }
        out
    }

    pub fn from_geometric(&self, g: [f64; 3]) -> ParameterPoint {
        let mut out = vec![0.0; 3];
        for (i, row) in self.axes.iter().enumerate() {
            for j in 0..3 {
                out[j] += row[j] * g[i];
            }
        }
        ParameterPoint(out)
    }

    /// `v·G` for a geometric vector `v`.
    pub fn generator_along(&self, v: [f64; 3]) -> ComplexMatrix {
        let [gx, gy, gz] = &self.generators;
        &(&gx.scale_real(v[0]) + &gy.scale_real(v[1])) + &gz.scale_real(v[2])
    }

    pub fn pole_frame(&self, label: &str) -> Option<&ComplexMatrix> {
        self.pole_frames.iter().find(|(l, _)| l == label).map(|(_, m)| m)
    }
}

/// `H(b)` depends on the planar angle φ_b only through
/// `exp(−iJφG) H(φ=0) exp(iJφG)`; the frame
/// `e^{i·phase_rate·φ} exp(−iJφG) w₀` is then a global single-valued section.
#[derive(Clone, Debug)]
pub struct PlanarCovariance {
    pub generator: ComplexMatrix,
    pub winding: i64,
    pub phase_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub name: String,
    pub param_dim: usize,
    pub hilbert_dim: usize,
    pub params: serde_json::Value,
    pub base: BaseTopology,
    pub branches: Vec<BranchDescriptor>,
    pub description: String,
}

pub trait HamiltonianFamily: Send + Sync {
    fn name(&self) -> &str;
    fn param_dim(&self) -> usize;
    fn hilbert_dim(&self) -> usize;
    /// `H(b)`; only checks the dimension of `b`, not membership in the domain.
    fn evaluate(&self, b: &ParameterPoint) -> Result<HermitianOperator>;
    fn in_domain(&self, b: &ParameterPoint) -> bool;
    fn branches(&self) -> &[BranchDescriptor];

    /// `∂H/∂b_k`. The default is a fourth-order central difference.
    fn partial_derivative(&self, b: &ParameterPoint, k: usize) -> Result<ComplexMatrix> {
        let h = 1e-3 * (1.0 + b.norm());
        let f = |d: f64| self.evaluate(&b.offset(k, d)).map(HermitianOperator::into_matrix);
        let (p2, p1, m1, m2) = (f(2.0 * h)?, f(h)?, f(-h)?, f(-2.0 * h)?);
        let num = &(&(&p1 - &m1).scale_real(8.0) - &p2) + &m2;
        Ok(num.scale_real(1.0 / (12.0 * h)))
    }

    fn rotation(&self) -> Option<&RotationCovariance> {
        None
    }

    fn planar(&self) -> Option<&PlanarCovariance> {
        None
    }

    fn base_topology(&self) -> BaseTopology {
        BaseTopology::Other
    }

    fn params_json(&self) -> serde_json::Value {
        serde_json::Value::Null
    }

    fn description(&self) -> String {
        String::new()
    }

    fn branch(&self, label: &str) -> Result<BranchDescriptor> {
        find_branch(self.branches(), label).cloned().ok_or_else(|| Error::UnknownBranch(label.to_string()))
    }

    fn info(&self) -> ModelInfo {
        ModelInfo {
            name: self.name().to_string(),
            param_dim: self.param_dim(),
            hilbert_dim: self.hilbert_dim(),
            params: self.params_json(),
            base: self.base_topology(),
            branches: self.branches().to_vec(),
            description: self.description(),
        }
    }
}

impl fmt::Debug for dyn HamiltonianFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "HamiltonianFamily({})", self.name())
    }
}

pub type SharedModel = Arc<dyn HamiltonianFamily>;

fn check_dim(model: &dyn HamiltonianFamily, b: &ParameterPoint) -> Result<()> {
    if b.dim() != model.param_dim() {
        return Err(Error::ShapeMismatch(format!(
            "model `{}` takes {} parameters, got {}",
            model.name(),
            model.param_dim(),
            b.dim()
        )));
    }
    if b.coords().iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(())
}

/// Parses "1/2", "-3/2", "+1", "0.5".
fn parse_label_value(s: &str) -> Option<f64> {
    let s = s.trim().trim_start_matches('+');
    if let Some((n, d)) = s.split_once('/') {
        let n: f64 = n.trim().parse().ok()?;
        let d: f64 = d.trim().parse().ok()?;
        (d != 0.0).then(|| n / d)
    } else {
        s.parse().ok()
    }
}

fn find_branch<'a>(branches: &'a [BranchDescriptor], label: &str) -> Option<&'a BranchDescriptor> {
    branches.iter().find(|b| b.label == label).or_else(|| {
        let want = parse_label_value(label)?;
        branches.iter().find(|b| parse_label_value(&b.label).is_some_and(|v| (v - want).abs() < 1e-12))
    })
}

/// Label for the projection `m = twice_m / 2`.
pub fn projection_label(twice_m: i64) -> String {
    if twice_m % 2 == 0 {
        (twice_m / 2).to_string()
    } else {
        format!("{twice_m}/2")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Spin {
    twice: u32,
}

impl Spin {
    pub fn new(s: f64) -> Result<Self> {
        let t = 2.0 * s;
        if !t.is_finite() || t < 1.0 || (t - t.round()).abs() > 1e-9 {
            return Err(Error::InvalidSpin(t));
        }
        Ok(Self { twice: t.round() as u32 })
    }

    pub fn from_twice(twice: u32) -> Result<Self> {
        if twice == 0 {
            return Err(Error::InvalidSpin(0.0));
        }
        Ok(Self { twice })
    }

    pub fn twice(&self) -> u32 {
        self.twice
    }

    pub fn value(&self) -> f64 {
        f64::from(self.twice) / 2.0
    }

    pub fn dim(&self) -> usize {
        self.twice as usize + 1
    }

    /// `2m` for m = −s, …, s.
    pub fn twice_projections(&self) -> impl Iterator<Item = i64> {
        let t = i64::from(self.twice);
        (0..=t).map(move |k| -t + 2 * k)
    }
}

#[derive(Clone, Debug)]
pub struct SpinMatrices {
    pub x: HermitianOperator,
    pub y: HermitianOperator,
    pub z: HermitianOperator,
}

/// Spin operators in the basis m = s, s−1, …, −s.
pub fn spin_matrices(spin: Spin) -> SpinMatrices {
    let n = spin.dim();
    let s = spin.value();
    let mut raise = ComplexMatrix::zeros(n, n);
    for i in 1..n {
        let m = s - i as f64;
        raise[(i - 1, i)] = C64::new((s * (s + 1.0) - m * (m + 1.0)).sqrt(), 0.0);
    }
    let lower = raise.adjoint();
    let x = (&raise + &lower).scale_real(0.5);
    let y = (&raise - &lower).scale(-I * 0.5);
    let z = ComplexMatrix::diag_real(&(0..n).map(|i| s - i as f64).collect::<Vec<_>>());
    SpinMatrices {
        x: HermitianOperator::hermitize(&x),
        y: HermitianOperator::hermitize(&y),
        z: HermitianOperator::new(z).expect("diagonal real matrix"),
    }
}

fn projection_branches(spin: Spin, ascending_with_m: bool) -> Vec<BranchDescriptor> {
    let t = i64::from(spin.twice());
    spin.twice_projections()
        .map(|tm| {
            let index = if ascending_with_m { (tm + t) / 2 } else { (t - tm) / 2 };
            BranchDescriptor::new(projection_label(tm), 1, index as usize)
        })
        .collect()
}

/// `H(b) = b·Ŝ` on the spin-s multiplet (coupling set to 1).
#[derive(Clone, Debug)]
pub struct SpinDipole {
    spin: Spin,
    matrices: SpinMatrices,
    branches: Vec<BranchDescriptor>,
    rotation: RotationCovariance,
}

pub fn make_spin_dipole(spin: Spin) -> SpinDipole {
    let matrices = spin_matrices(spin);
    let rotation = RotationCovariance {
        generators: [matrices.x.matrix().clone(), matrices.y.matrix().clone(), matrices.z.matrix().clone()],
        axes: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        pole_frames: Vec::new(),
    };
    SpinDipole { spin, branches: projection_branches(spin, true), matrices, rotation }
}

impl SpinDipole {
    pub fn spin(&self) -> Spin {
        self.spin
    }
}

impl HamiltonianFamily for SpinDipole {
    fn name(&self) -> &str {
        "spin_dipole"
    }
    fn param_dim(&self) -> usize {
        3
    }
    fn hilbert_dim(&self) -> usize {
        self.spin.dim()
    }
    fn evaluate(&self, b: &ParameterPoint) -> Result<HermitianOperator> {
        check_dim(self, b)?;
        let h = self.rotation.generator_along([b.0[0], b.0[1], b.0[2]]);
        Ok(HermitianOperator::hermitize(&h))
    }
    fn in_domain(&self, b: &ParameterPoint) -> bool {
        b.dim() == 3 && b.norm() > 0.0
    }
    fn branches(&self) -> &[BranchDescriptor] {
        &self.branches
    }
    fn partial_derivative(&self, b: &ParameterPoint, k: usize) -> Result<ComplexMatrix> {
        check_dim(self, b)?;
        let m = [&self.matrices.x, &self.matrices.y, &self.matrices.z];
        Ok(m[k].matrix().clone())
    }
    fn rotation(&self) -> Option<&RotationCovariance> {
        Some(&self.rotation)
    }
    fn base_topology(&self) -> BaseTopology {
        BaseTopology::Sphere2
    }
    fn params_json(&self) -> serde_json::Value {
        serde_json::json!({ "s": self.spin.value() })
    }
    fn description(&self) -> String {
        "spin s in a magnetic field, H(b) = b.S; params: s (half-integer); branches m = -s..s".into()
    }
}

/// Four-level system `|e⟩(Ω₀⟨0| + Ω₁⟨1| + Ω_a⟨a|) + h.c.` in the ordered basis
/// (|0⟩, |1⟩, |a⟩, |e⟩), with parameters (Ω₀, Ω₁, Ω_a).
///
/// Geometric axes: x ≡ |1⟩, y ≡ |0⟩, z ≡ |a⟩.
#[derive(Clone, Debug)]
pub struct LambdaSystem {
    branches: Vec<BranchDescriptor>,
    rotation: RotationCovariance,
}

pub const LAMBDA_EXCITED: usize = 3;
/// Hilbert index of each geometric axis.
const LAMBDA_AXIS_STATE: [usize; 3] = [1, 0, 2];

pub fn make_lambda_system() -> LambdaSystem {
    let mut generators = [ComplexMatrix::zeros(4, 4), ComplexMatrix::zeros(4, 4), ComplexMatrix::zeros(4, 4)];
    // (L_k)_{ij} = −i ε_{kij} on the geometric triple
    for (k, g) in generators.iter_mut().enumerate() {
        for i in 0..3 {
            for j in 0..3 {
                let eps = levi_civita(k, i, j);
                if eps != 0.0 {
                    g[(LAMBDA_AXIS_STATE[i], LAMBDA_AXIS_STATE[j])] = -I * eps;
                }
            }
        }
    }
    // pole frame (x̂, ŷ) = (|1⟩, |0⟩) for the dark pair
    let dark_pole = ComplexMatrix::from_fn(4, 2, |r, c| if r == LAMBDA_AXIS_STATE[c] { ONE } else { ZERO });
    LambdaSystem {
        branches: vec![
            BranchDescriptor::new("minus", 1, 0),
            BranchDescriptor::new("dark", 2, 1),
            BranchDescriptor::new("plus", 1, 3),
        ],
        rotation: RotationCovariance {
            generators,
            axes: [[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]],
            pole_frames: vec![("dark".into(), dark_pole)],
        },
    }
}

fn levi_civita(i: usize, j: usize, k: usize) -> f64 {
    match (i, j, k) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

impl HamiltonianFamily for LambdaSystem {
    fn name(&self) -> &str {
        "lambda_system"
    }
    fn param_dim(&self) -> usize {
        3
    }
    fn hilbert_dim(&self) -> usize {
        4
    }
    fn evaluate(&self, b: &ParameterPoint) -> Result<HermitianOperator> {
        check_dim(self, b)?;
        let mut h = ComplexMatrix::zeros(4, 4);
        for c in 0..3 {
            h[(LAMBDA_EXCITED, c)] = C64::new(b.0[c], 0.0);
            h[(c, LAMBDA_EXCITED)] = C64::new(b.0[c], 0.0);
        }
        HermitianOperator::new(h)
    }
    fn in_domain(&self, b: &ParameterPoint) -> bool {
        b.dim() == 3 && b.norm() > 0.0
    }
    fn branches(&self) -> &[BranchDescriptor] {
        &self.branches
    }
    fn partial_derivative(&self, b: &ParameterPoint, k: usize) -> Result<ComplexMatrix> {
        check_dim(self, b)?;
        let mut d = ComplexMatrix::zeros(4, 4);
        d[(LAMBDA_EXCITED, k)] = ONE;
        d[(k, LAMBDA_EXCITED)] = ONE;
        Ok(d)
    }
    fn rotation(&self) -> Option<&RotationCovariance> {
        Some(&self.rotation)
    }
    fn base_topology(&self) -> BaseTopology {
        BaseTopology::Sphere2
    }
    fn params_json(&self) -> serde_json::Value {
        serde_json::json!({ "basis": ["0", "1", "a", "e"], "axes": { "x": "1", "y": "0", "z": "a" } })
    }
    fn description(&self) -> String {
        "four-level system with coupling |e>(W0<0| + W1<1| + Wa<a|) + h.c.; params (W0, W1, Wa); branches minus, dark (K=2), plus".into()
    }
}

/// `H_J(b) = ε Ŝ·ň`, `ň = −(cos Jφ_b, sin Jφ_b)` on the punctured plane.
#[derive(Clone, Debug)]
pub struct PlanarSpin {
    spin: Spin,
    j: i64,
    eps: f64,
    matrices: SpinMatrices,
    branches: Vec<BranchDescriptor>,
    planar: PlanarCovariance,
}

pub fn make_planar_spin(spin: Spin, j: i64, eps: f64) -> Result<PlanarSpin> {
    if !(j == 1 || j == 2) {
        return Err(Error::InvalidJ(j));
    }
    if !(eps.is_finite() && eps != 0.0) {
        return Err(Error::InvalidModel(format!("coupling eps must be finite and nonzero, got {eps}")));
    }
    let matrices = spin_matrices(spin);
    let planar =
        PlanarCovariance { generator: matrices.z.matrix().clone(), winding: j, phase_rate: j as f64 * spin.value() };
    Ok(PlanarSpin { spin, j, eps, branches: projection_branches(spin, eps > 0.0), matrices, planar })
}

impl PlanarSpin {
    pub fn spin(&self) -> Spin {
        self.spin
    }
    pub fn j(&self) -> i64 {
        self.j
    }
    pub fn eps(&self) -> f64 {
        self.eps
    }

    fn direction_operator(&self, angle: f64) -> ComplexMatrix {
        let (s, c) = angle.sin_cos();
        &self.matrices.x.matrix().scale_real(c) + &self.matrices.y.matrix().scale_real(s)
    }
}

impl HamiltonianFamily for PlanarSpin {
    fn name(&self) -> &str {
        "planar_spin"
    }
    fn param_dim(&self) -> usize {
        2
    }
    fn hilbert_dim(&self) -> usize {
        self.spin.dim()
    }
    fn evaluate(&self, b: &ParameterPoint) -> Result<HermitianOperator> {
        check_dim(self, b)?;
        let phi = b.0[1].atan2(b.0[0]);
        let h = self.direction_operator(self.j as f64 * phi).scale_real(-self.eps);
        Ok(HermitianOperator::hermitize(&h))
    }
    fn in_domain(&self, b: &ParameterPoint) -> bool {
        b.dim() == 2 && b.norm() > 0.0
    }
    fn branches(&self) -> &[BranchDescriptor] {
        &self.branches
    }
    fn partial_derivative(&self, b: &ParameterPoint, k: usize) -> Result<ComplexMatrix> {
        check_dim(self, b)?;
        let (x, y) = (b.0[0], b.0[1]);
        let r2 = x * x + y * y;
        let phi = y.atan2(x);
        let dphi = if k == 0 { -y / r2 } else { x / r2 };
        // d/dφ of −ε(cos Jφ Sx + sin Jφ Sy)
        let jf = self.j as f64;
        let tangent = self.direction_operator(jf * phi + std::f64::consts::FRAC_PI_2);
        Ok(tangent.scale_real(-self.eps * jf * dphi))
    }
    fn planar(&self) -> Option<&PlanarCovariance> {
        Some(&self.planar)
    }
    fn base_topology(&self) -> BaseTopology {
        BaseTopology::Circle1
    }
    fn params_json(&self) -> serde_json::Value {
        serde_json::json!({ "s": self.spin.value(), "J": self.j, "eps": self.eps })
    }
    fn description(&self) -> String {
        "spin coupled to a planar direction with winding J, H = eps S.n, n = -(cos J phi, sin J phi); params s, J (1|2), eps (default 1); branches m = -s..s".into()
    }
}

type EvalFn = dyn Fn(&ParameterPoint) -> Result<ComplexMatrix> + Send + Sync;
type DomainFn = dyn Fn(&ParameterPoint) -> bool + Send + Sync;

/// A model defined by user closures.
pub struct CallbackModel {
    name: String,
    param_dim: usize,
    hilbert_dim: usize,
    branches: Vec<BranchDescriptor>,
    base: BaseTopology,
    eval: Box<EvalFn>,
    domain: Box<DomainFn>,
}

impl CallbackModel {
    pub fn new(
        name: impl Into<String>,
        param_dim: usize,
        hilbert_dim: usize,
        branches: Vec<BranchDescriptor>,
        eval: impl Fn(&ParameterPoint) -> Result<ComplexMatrix> + Send + Sync + 'static,
        domain: impl Fn(&ParameterPoint) -> bool + Send + Sync + 'static,
    ) -> Result<Self> {
        validate_branches(&branches, hilbert_dim)?;
        Ok(Self {
            name: name.into(),
            param_dim,
            hilbert_dim,
            branches,
            base: BaseTopology::Other,
            eval: Box::new(eval),
            domain: Box::new(domain),
        })
    }

    pub fn with_base(mut self, base: BaseTopology) -> Self {
        self.base = base;
        self
    }
}

fn validate_branches(branches: &[BranchDescriptor], hilbert_dim: usize) -> Result<()> {
    for b in branches {
        if b.degeneracy == 0 || b.first_index + b.degeneracy > hilbert_dim {
            return Err(Error::InvalidModel(format!(
                "branch `{}` (first index {}, degeneracy {}) does not fit a {}-dimensional space",
                b.label, b.first_index, b.degeneracy, hilbert_dim
            )));
        }
    }
    Ok(())
}

impl HamiltonianFamily for CallbackModel {
    fn name(&self) -> &str {
        &self.name
    }
    fn param_dim(&self) -> usize {
        self.param_dim
    }
    fn hilbert_dim(&self) -> usize {
        self.hilbert_dim
    }
    fn evaluate(&self, b: &ParameterPoint) -> Result<HermitianOperator> {
        check_dim(self, b)?;
        let m = (self.eval)(b)?;
        if m.shape() != (self.hilbert_dim, self.hilbert_dim) {
            return Err(Error::ShapeMismatch(format!("callback returned {:?}", m.shape())));
        }
        HermitianOperator::new(m)
    }
    fn in_domain(&self, b: &ParameterPoint) -> bool {
        b.dim() == self.param_dim && (self.domain)(b)
    }
    fn branches(&self) -> &[BranchDescriptor] {
        &self.branches
    }
    fn base_topology(&self) -> BaseTopology {
        self.base
    }
}

/// Excluded ball around a singular point of a tabulated model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub center: Vec<f64>,
    pub radius: f64,
}

/// On-disk/inline description of a tabulated model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TabulatedSpec {
    #[serde(default = "default_tabulated_name")]
    pub name: String,
    /// Grid coordinates per parameter axis, strictly increasing.
    pub axes: Vec<Vec<f64>>,
    pub hilbert_dim: usize,
    /// One matrix per grid node (last axis fastest); each matrix is row-major
    /// `[re, im]` pairs.
    pub matrices: Vec<Vec<[f64; 2]>>,
    pub branches: Vec<BranchDescriptor>,
    #[serde(default)]
    pub exclude: Vec<Exclusion>,
    #[serde(default)]
    pub base: Option<BaseTopology>,
}

fn default_tabulated_name() -> String {
    "tabulated".into()
}

/// Multilinear per-entry interpolation of Hamiltonians tabulated on a grid.
///
/// Interpolating entries does not interpolate spectra: between grid nodes the
/// declared degeneracies can split, so branch validation may fail away from
/// the nodes even when it holds on them.
#[derive(Clone, Debug)]
pub struct TabulatedModel {
    spec: TabulatedSpec,
    matrices: Vec<ComplexMatrix>,
    strides: Vec<usize>,
}

impl TabulatedModel {
    pub fn new(spec: TabulatedSpec) -> Result<Self> {
        let n = spec.hilbert_dim;
        if spec.axes.is_empty() || spec.axes.iter().any(|a| a.len() < 2) {
            return Err(Error::InvalidModel("each tabulated axis needs at least 2 grid values".into()));
        }
        if spec.axes.iter().any(|a| a.windows(2).any(|w| !(w[1] > w[0]))) {
            return Err(Error::InvalidModel("tabulated axes must be strictly increasing".into()));
        }
        let nodes: usize = spec.axes.iter().map(Vec::len).product();
        if spec.matrices.len() != nodes {
            return Err(Error::InvalidModel(format!("expected {} matrices, got {}", nodes, spec.matrices.len())));
        }
        validate_branches(&spec.branches, n)?;
        let matrices = spec
            .matrices
            .iter()
            .map(|m| {
                let data = m.iter().map(|&[re, im]| C64::new(re, im)).collect();
                let m = ComplexMatrix::from_row_major(n, n, data)?;
                HermitianOperator::new(m).map(HermitianOperator::into_matrix)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut strides = vec![1; spec.axes.len()];
        for d in (0..spec.axes.len().saturating_sub(1)).rev() {
            strides[d] = strides[d + 1] * spec.axes[d + 1].len();
        }
        Ok(Self { spec, matrices, strides })
    }

    pub fn spec(&self) -> &TabulatedSpec {
        &self.spec
    }

    fn inside_box(&self, b: &ParameterPoint) -> bool {
        b.coords().iter().zip(&self.spec.axes).all(|(x, a)| *x >= a[0] && *x <= a[a.len() - 1])
    }
}

impl HamiltonianFamily for TabulatedModel {
    fn name(&self) -> &str {
        &self.spec.name
    }
    fn param_dim(&self) -> usize {
        self.spec.axes.len()
    }
    fn hilbert_dim(&self) -> usize {
        self.spec.hilbert_dim
    }
    fn evaluate(&self, b: &ParameterPoint) -> Result<HermitianOperator> {
        check_dim(self, b)?;
        // locate the cell and the fractional position in each axis (clamped)
        let mut cell = Vec::with_capacity(self.param_dim());
        for (x, axis) in b.coords().iter().zip(&self.spec.axes) {
            let last = axis.len() - 2;
            let i = axis.partition_point(|v| v <= x).saturating_sub(1).min(last);
            let t = ((x - axis[i]) / (axis[i + 1] - axis[i])).clamp(0.0, 1.0);
            cell.push((i, t));
        }
        let n = self.spec.hilbert_dim;
        let mut out = ComplexMatrix::zeros(n, n);
        for corner in 0..(1usize << cell.len()) {
            let mut weight = 1.0;
            let mut offset = 0;
            for (d, &(i, t)) in cell.iter().enumerate() {
                let upper = (corner >> d) & 1 == 1;
                weight *= if upper { t } else { 1.0 - t };
                offset += (i + usize::from(upper)) * self.strides[d];
            }
            if weight != 0.0 {
                out = &out + &self.matrices[offset].scale_real(weight);
            }
        }
        Ok(HermitianOperator::hermitize(&out))
    }
    fn in_domain(&self, b: &ParameterPoint) -> bool {
        b.dim() == self.param_dim()
            && self.inside_box(b)
            && self
                .spec
                .exclude
                .iter()
                .all(|e| e.center.len() == b.dim() && b.distance(&ParameterPoint(e.center.clone())) > e.radius)
    }
    fn branches(&self) -> &[BranchDescriptor] {
        &self.spec.branches
    }
    fn base_topology(&self) -> BaseTopology {
        self.spec.base.unwrap_or(BaseTopology::Other)
    }
    fn params_json(&self) -> serde_json::Value {
        serde_json::json!({ "axes": self.spec.axes.iter().map(Vec::len).collect::<Vec<_>>() })
    }
    fn description(&self) -> String {
        "tabulated Hamiltonian grid with multilinear per-entry interpolation".into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{eig_hermitian, exp_antihermitian};
    use crate::random::{random_direction, seeded};
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn spectrum(model: &dyn HamiltonianFamily, b: impl Into<ParameterPoint>) -> Vec<f64> {
        eig_hermitian(&model.evaluate(&b.into()).unwrap()).unwrap().values
    }

    fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
        &(a * b) - &(b * a)
    }

    #[test]
    fn spin_half_matrices() {
        let m = spin_matrices(Spin::new(0.5).unwrap());
        assert_eq!(m.z.matrix(), &ComplexMatrix::diag_real(&[0.5, -0.5]));
        assert_abs_diff_eq!(m.x.matrix()[(0, 1)].re, 0.5);
        assert_abs_diff_eq!(m.y.matrix()[(0, 1)].im, -0.5);
    }

    #[test]
    fn spin_one_commutator() {
        let m = spin_matrices(Spin::new(1.0).unwrap());
        assert_eq!(m.z.matrix(), &ComplexMatrix::diag_real(&[1.0, 0.0, -1.0]));
        let c = commutator(m.x.matrix(), m.y.matrix());
        assert!(c.max_abs_diff(&m.z.matrix().scale(I)) <= 1e-12);
        let c = commutator(m.y.matrix(), m.z.matrix());
        assert!(c.max_abs_diff(&m.x.matrix().scale(I)) <= 1e-12);
    }

    #[test]
    fn casimir_spin_three_halves() {
        let m = spin_matrices(Spin::new(1.5).unwrap());
        let sq = |a: &HermitianOperator| a.matrix() * a.matrix();
        let s2 = &(&sq(&m.x) + &sq(&m.y)) + &sq(&m.z);
        assert!(s2.max_abs_diff(&ComplexMatrix::identity(4).scale_real(3.75)) < 1e-12);
    }

    #[test]
    fn invalid_spin() {
        assert!(matches!(Spin::new(0.3), Err(Error::InvalidSpin(_))));
        assert!(matches!(Spin::new(0.0), Err(Error::InvalidSpin(_))));
        assert!(Spin::new(2.5).is_ok());
    }

    #[test]
    fn dipole_spectra() {
        let half = make_spin_dipole(Spin::new(0.5).unwrap());
        let v = spectrum(&half, [0.0, 0.0, 1.0]);
        assert_abs_diff_eq!(v[0], -0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(v[1], 0.5, epsilon = 1e-14);
        let v = spectrum(&half, [0.0, 0.0, 2.0]);
        assert_abs_diff_eq!(v[0], -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(v[1], 1.0, epsilon = 1e-14);
        assert!(!half.in_domain(&[0.0, 0.0, 0.0].into()));

        let one = make_spin_dipole(Spin::new(1.0).unwrap());
        let v = spectrum(&one, [1.0, 0.0, 0.0]);
        for (got, want) in v.iter().zip([-1.0, 0.0, 1.0]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-13);
        }
    }

    #[test]
    fn dipole_isotropy() {
        let model = make_spin_dipole(Spin::new(1.5).unwrap());
        let mut rng = seeded(1);
        for _ in 0..20 {
            let r: f64 = rng.gen_range(0.1..5.0);
            let d = random_direction(&mut rng);
            let v = spectrum(&model, [r * d[0], r * d[1], r * d[2]]);
            let w = spectrum(&model, [0.0, 0.0, r]);
            for (a, b) in v.iter().zip(&w) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn lambda_spectra_and_dark_space() {
        let model = make_lambda_system();
        let v = spectrum(&model, [3.0, 0.0, 4.0]);
        for (got, want) in v.iter().zip([-5.0, 0.0, 0.0, 5.0]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-13);
        }
        let v = spectrum(&model, [1.0, 0.0, 0.0]);
        for (got, want) in v.iter().zip([-1.0, 0.0, 0.0, 1.0]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-14);
        }
        let e = eig_hermitian(&model.evaluate(&[0.0, 0.0, 5.0].into()).unwrap()).unwrap();
        let p = e.projector(1, 2);
        let expected = ComplexMatrix::diag_real(&[1.0, 1.0, 0.0, 0.0]);
        assert!(p.max_abs_diff(&expected) < 1e-14);
        assert!(!model.in_domain(&[0.0, 0.0, 0.0].into()));
    }

    #[test]
    fn lambda_dark_space_excludes_excited_state() {
        let model = make_lambda_system();
        let mut rng = seeded(2);
        for _ in 0..100 {
            let b: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let e = eig_hermitian(&model.evaluate(&b.into()).unwrap()).unwrap();
            let p = e.projector(1, 2);
            for r in 0..4 {
                assert!(p[(r, LAMBDA_EXCITED)].norm() < 1e-10);
            }
        }
    }

    #[test]
    fn rotation_covariance_holds() {
        let mut rng = seeded(9);
        let models: Vec<Box<dyn HamiltonianFamily>> =
            vec![Box::new(make_spin_dipole(Spin::new(1.0).unwrap())), Box::new(make_lambda_system())];
        for model in &models {
            let rot = model.rotation().unwrap();
            for _ in 0..10 {
                let n = random_direction(&mut rng);
                let theta: f64 = rng.gen_range(0.0..3.0);
                let b = random_direction(&mut rng);
                let u = exp_antihermitian(&rot.generator_along(n).scale(-I * theta)).unwrap();
                let h = model.evaluate(&rot.from_geometric(b)).unwrap();
                let lhs = &(u.matrix() * h.matrix()) * &u.matrix().adjoint();
                let rb = rotate_vector(n, theta, b);
                let rhs = model.evaluate(&rot.from_geometric(rb)).unwrap();
                assert!(lhs.max_abs_diff(rhs.matrix()) < 1e-12, "{}", model.name());
            }
        }
    }

    fn rotate_vector(n: [f64; 3], theta: f64, v: [f64; 3]) -> [f64; 3] {
        let (s, c) = theta.sin_cos();
        let dot = n[0] * v[0] + n[1] * v[1] + n[2] * v[2];
        let cross = [n[1] * v[2] - n[2] * v[1], n[2] * v[0] - n[0] * v[2], n[0] * v[1] - n[1] * v[0]];
        [0, 1, 2].map(|i| v[i] * c + cross[i] * s + n[i] * dot * (1.0 - c))
    }

    #[test]
    fn planar_examples() {
        let half = Spin::new(0.5).unwrap();
        let model = make_planar_spin(half, 1, 1.0).unwrap();
        let h = model.evaluate(&[2.0, 0.0].into()).unwrap();
        let sx = spin_matrices(half).x;
        assert!(h.matrix().max_abs_diff(&sx.matrix().scale_real(-1.0)) < 1e-15);
        assert!(!model.in_domain(&[0.0, 0.0].into()));
        let a = spectrum(&model, [1.0, 0.0]);
        let b = spectrum(&model, [1.3f64.cos(), 1.3f64.sin()]);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!(matches!(make_planar_spin(half, 3, 1.0), Err(Error::InvalidJ(3))));
        assert!(make_planar_spin(half, 1, 0.0).is_err());
    }

    #[test]
    fn planar_conjugation_identity() {
        let mut rng = seeded(4);
        for j in [1, 2] {
            let spin = Spin::new(1.5).unwrap();
            let model = make_planar_spin(spin, j, 0.7).unwrap();
            let sz = spin_matrices(spin).z;
            for _ in 0..10 {
                let r: f64 = rng.gen_range(0.2..3.0);
                let phi: f64 = rng.gen_range(-3.1..3.1);
                let u = exp_antihermitian(&sz.matrix().scale(-I * (j as f64) * phi)).unwrap();
                let h0 = model.evaluate(&[r, 0.0].into()).unwrap();
                let lhs = &(u.matrix() * h0.matrix()) * &u.matrix().adjoint();
                let rhs = model.evaluate(&[r * phi.cos(), r * phi.sin()].into()).unwrap();
                assert!(lhs.max_abs_diff(rhs.matrix()) < 1e-10);
            }
        }
    }

    #[test]
    fn negative_eps_reverses_branch_indices() {
        let model = make_planar_spin(Spin::new(1.0).unwrap(), 1, -2.0).unwrap();
        assert_eq!(model.branch("1").unwrap().first_index, 0);
        assert_eq!(model.branch("-1").unwrap().first_index, 2);
    }

    #[test]
    fn analytic_derivatives_match_finite_differences() {
        struct Fd<'a>(&'a dyn HamiltonianFamily);
        impl HamiltonianFamily for Fd<'_> {
            fn name(&self) -> &str {
                "fd"
            }
            fn param_dim(&self) -> usize {
                self.0.param_dim()
            }
            fn hilbert_dim(&self) -> usize {
                self.0.hilbert_dim()
            }
            fn evaluate(&self, b: &ParameterPoint) -> Result<HermitianOperator> {
                self.0.evaluate(b)
            }
            fn in_domain(&self, b: &ParameterPoint) -> bool {
                self.0.in_domain(b)
            }
            fn branches(&self) -> &[BranchDescriptor] {
                self.0.branches()
            }
        }
        let models: Vec<Box<dyn HamiltonianFamily>> = vec![
            Box::new(make_spin_dipole(Spin::new(1.0).unwrap())),
            Box::new(make_lambda_system()),
            Box::new(make_planar_spin(Spin::new(0.5).unwrap(), 2, 1.3).unwrap()),
        ];
        for m in &models {
            let b: ParameterPoint = if m.param_dim() == 3 { [0.3, -0.8, 1.1].into() } else { [0.6, -0.9].into() };
            for k in 0..m.param_dim() {
                let exact = m.partial_derivative(&b, k).unwrap();
                let fd = Fd(m.as_ref()).partial_derivative(&b, k).unwrap();
                assert!(exact.max_abs_diff(&fd) < 1e-9, "{} k={k}", m.name());
            }
        }
    }

    #[test]
    fn branch_lookup_accepts_numeric_forms() {
        let model = make_spin_dipole(Spin::new(1.5).unwrap());
        assert_eq!(model.branch("3/2").unwrap().first_index, 3);
        assert_eq!(model.branch("+1/2").unwrap().first_index, 2);
        assert_eq!(model.branch("-1.5").unwrap().first_index, 0);
        assert!(matches!(model.branch("5/2"), Err(Error::UnknownBranch(_))));
    }

    #[test]
    fn tabulated_interpolates_linearly() {
        // H(x) = x σ_z on a 3-node grid
        let spec = TabulatedSpec {
            name: "line".into(),
            axes: vec![vec![-1.0, 0.0, 1.0]],
            hilbert_dim: 2,
            matrices: [-1.0, 0.0, 1.0].iter().map(|&x| vec![[x, 0.0], [0.0, 0.0], [0.0, 0.0], [-x, 0.0]]).collect(),
            branches: vec![BranchDescriptor::new("low", 1, 0)],
            exclude: vec![Exclusion { center: vec![0.0], radius: 0.1 }],
            base: None,
        };
        let model = TabulatedModel::new(spec).unwrap();
        let h = model.evaluate(&[0.25].into()).unwrap();
        assert_abs_diff_eq!(h.matrix()[(0, 0)].re, 0.25, epsilon = 1e-15);
        assert!(model.in_domain(&[0.5].into()));
        assert!(!model.in_domain(&[0.05].into()));
        assert!(!model.in_domain(&[1.5].into()));
    }

    #[test]
    fn tabulated_rejects_bad_grids() {
        let spec = TabulatedSpec {
            name: "bad".into(),
            axes: vec![vec![0.0, 1.0]],
            hilbert_dim: 2,
            matrices: vec![vec![[0.0, 0.0]; 4]],
            branches: vec![],
            exclude: vec![],
            base: None,
        };
        assert!(TabulatedModel::new(spec).is_err());
    }
}
