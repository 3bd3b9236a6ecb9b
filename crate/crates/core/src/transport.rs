//! Berry connection, parallel transport along paths, holonomy and plaquette
//! curvature.
//!
//! Transport integrates the horizontal frame equation `F' = P'(t)·F` with
//! classical RK4, where `P' = R·H'·P + P·H'·R` and
//! `R = Σ_{j∉branch} |j⟩⟨j| / (ε − λ_j)`. Expressed in the starting frame this
//! is `dU/dt = −A_t U`.

use std::f64::consts::PI;

use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};

use crate::eigenbundle::{
    branch_sample, branch_sample_following, continue_frame, gauge_fix, EigenspaceSample, Frame, SpectralTolerances,
    CONTINUATION_MIN_SINGULAR,
};
use crate::error::{Error, Result};
use crate::gauge::LocalSection;
use crate::geometry::{make_path, PathPreset};
use crate::linalg::{log_unitary, overlap, polar_factor, unitarize, ComplexMatrix, UnitaryMatrix, C64};
use crate::models::{BranchDescriptor, HamiltonianFamily, ParameterPoint};
use crate::path::ParameterPath;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Ode,
    Wilson,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub unitarity_residual: f64,
    pub min_gap: f64,
    pub steps: usize,
    pub richardson_error_estimate: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HolonomyResult {
    pub branch: String,
    pub method: Method,
    /// Expressed in the initial frame of the start fibre.
    pub unitary: UnitaryMatrix,
    /// `arg U` in (−π, π] when K = 1.
    pub abelian_phase: Option<f64>,
    pub diagnostics: Diagnostics,
}

impl HolonomyResult {
    pub fn k(&self) -> usize {
        self.unitary.dim()
    }
}

impl Serialize for HolonomyResult {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let entries: Vec<[f64; 2]> = self.unitary.matrix().as_slice().iter().map(|z| [z.re, z.im]).collect();
        let mut st = s.serialize_struct("HolonomyResult", 6)?;
        st.serialize_field("branch", &self.branch)?;
        st.serialize_field("method", &self.method)?;
        st.serialize_field("K", &self.k())?;
        st.serialize_field("unitary", &entries)?;
        st.serialize_field("abelian_phase", &self.abelian_phase)?;
        st.serialize_field("diagnostics", &self.diagnostics)?;
        st.end()
    }
}

/// Phase of a unit complex number in (−π, π].
pub fn principal_phase(z: C64) -> f64 {
    let a = z.arg();
    if a <= -PI {
        a + 2.0 * PI
    } else {
        a
    }
}

/// Result of transporting a frame along a path.
#[derive(Clone, Debug)]
pub struct Transported {
    /// `W_end† F_end`, re-unitarized; `W_end` is the starting frame on closed
    /// paths and the gauge-fixed eigenframe of the end fibre otherwise.
    pub unitary: UnitaryMatrix,
    pub start_frame: ComplexMatrix,
    pub end_frame: Frame,
    pub min_gap: f64,
    pub steps: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransportOptions {
    pub steps: usize,
    pub richardson_tol: f64,
    pub max_refinements: usize,
    pub spectral: SpectralTolerances,
}

impl Default for TransportOptions {
    fn default() -> Self {
        Self { steps: 1024, richardson_tol: 1e-6, max_refinements: 4, spectral: SpectralTolerances::default() }
    }
}

fn per_piece(path: &ParameterPath, total: usize) -> usize {
    total.div_ceil(path.pieces().len()).max(1)
}

fn at_node(err: Error, node: usize, b: &ParameterPoint) -> Error {
    match err {
        Error::OutOfDomain(_) | Error::DegeneracyViolation { .. } => Error::GapCollapse { node, point: b.0.clone() },
        Error::SingularInput { .. } => Error::SubspaceJump { node: node.saturating_sub(1) },
        other => other,
    }
}

fn start_frame(
    model: &dyn HamiltonianFamily,
    path: &ParameterPath,
    branch: &BranchDescriptor,
    tol: &SpectralTolerances,
    initial: Option<&ComplexMatrix>,
) -> Result<(EigenspaceSample, ComplexMatrix)> {
    let b0 = path.start();
    let s0 = branch_sample(model, &b0, branch, tol).map_err(|e| at_node(e, 0, &b0))?;
    let w0 = match initial {
        None => gauge_fix(&s0.basis),
        Some(f) => {
            if f.shape() != s0.basis.shape() {
                return Err(Error::ShapeMismatch(format!("initial frame has shape {:?}", f.shape())));
            }
            let frame = Frame::new(b0.clone(), f.clone())?;
            if frame.fibre_residual(&s0) > 1e-8 {
                return Err(Error::ShapeMismatch("initial frame does not lie in the start fibre".into()));
            }
            f.clone()
        }
    };
    Ok((s0, w0))
}

#[allow(clippy::too_many_arguments)]
fn finish(
    model: &dyn HamiltonianFamily,
    path: &ParameterPath,
    branch: &BranchDescriptor,
    tol: &SpectralTolerances,
    w0: ComplexMatrix,
    end: Frame,
    min_gap: f64,
    steps: usize,
) -> Result<Transported> {
    let reference = if path.is_closed() {
        w0.clone()
    } else {
        gauge_fix(&branch_sample_following(model, &end.point, branch, &end.matrix, tol)?.basis)
    };
    let unitary = unitarize(&overlap(&end.matrix, &reference)?)?;
    Ok(Transported { unitary, start_frame: w0, end_frame: end, min_gap, steps })
}

fn velocity_hamiltonian(model: &dyn HamiltonianFamily, b: &ParameterPoint, v: &[f64]) -> Result<ComplexMatrix> {
    let n = model.hilbert_dim();
    let mut hdot = ComplexMatrix::zeros(n, n);
    for (k, &vk) in v.iter().enumerate() {
        if vk != 0.0 {
            hdot = &hdot + &model.partial_derivative(b, k)?.scale_real(vk);
        }
    }
    Ok(hdot)
}

/// `dP/dt` from first-order perturbation theory.
fn projector_rate(model: &dyn HamiltonianFamily, s: &EigenspaceSample, v: &[f64]) -> Result<ComplexMatrix> {
    let hdot = velocity_hamiltonian(model, &s.point, v)?;
    let n = model.hilbert_dim();
    let k = s.degeneracy();
    let vecs = &s.spectrum.vectors;
    let mut resolvent = ComplexMatrix::zeros(n, n);
    for j in (0..n).filter(|&j| j < s.start || j >= s.start + k) {
        let w = 1.0 / (s.energy - s.spectrum.values[j]);
        for a in 0..n {
            for b in 0..n {
                resolvent[(a, b)] += vecs[(a, j)] * vecs[(b, j)].conj() * w;
            }
        }
    }
    let x = &(&resolvent * &hdot) * s.projector.matrix();
    Ok(&x + &x.adjoint())
}

fn axpy(f: &ComplexMatrix, h: f64, k: &ComplexMatrix) -> ComplexMatrix {
    f + &k.scale_real(h)
}

/// RK4 transport with `steps_per_piece` steps on every piece of the path.
pub fn transport_rk4(
    model: &dyn HamiltonianFamily,
    path: &ParameterPath,
    branch: &BranchDescriptor,
    steps_per_piece: usize,
    tol: &SpectralTolerances,
    initial: Option<&ComplexMatrix>,
) -> Result<Transported> {
    if steps_per_piece == 0 {
        return Err(Error::InvalidModel("transport needs at least one step per piece".into()));
    }
    let (s0, w0) = start_frame(model, path, branch, tol, initial)?;
    let mut min_gap = s0.gap;
    let mut f = w0.clone();
    let mut sample = s0;
    let h = 1.0 / steps_per_piece as f64;
    let mut node = 0;
    for piece in path.pieces() {
        for i in 0..steps_per_piece {
            node += 1;
            let t = i as f64 * h;
            let follow = |s: f64, reference: &ComplexMatrix| -> Result<(EigenspaceSample, Vec<f64>)> {
                let (p, v) = piece.eval(s);
                let b = ParameterPoint(p);
                let smp =
                    branch_sample_following(model, &b, branch, reference, tol).map_err(|e| at_node(e, node, &b))?;
                Ok((smp, v))
            };
            let v0 = piece.eval(t).1;
            let k1 = &projector_rate(model, &sample, &v0)? * &f;
            let (mid, vm) = follow(t + 0.5 * h, &f)?;
            let rate_mid = projector_rate(model, &mid, &vm)?;
            let k2 = &rate_mid * &axpy(&f, 0.5 * h, &k1);
            let k3 = &rate_mid * &axpy(&f, 0.5 * h, &k2);
            let (end, ve) = follow(t + h, &f)?;
            let k4 = &projector_rate(model, &end, &ve)? * &axpy(&f, h, &k3);
            let incr = &(&(&k1 + &k2.scale_real(2.0)) + &k3.scale_real(2.0)) + &k4;
            let stepped = axpy(&f, h / 6.0, &incr);
            f = polar_factor(&(end.projector.matrix() * &stepped), CONTINUATION_MIN_SINGULAR)
                .map_err(|_| Error::SubspaceJump { node: node - 1 })?;
            min_gap = min_gap.min(mid.gap).min(end.gap);
            sample = end;
        }
    }
    let end = Frame { point: sample.point.clone(), matrix: f };
    finish(model, path, branch, tol, w0, end, min_gap, steps_per_piece * path.pieces().len())
}

/// Frame at the end of `path` after RK4 transport of `initial` (or of the
/// gauge-fixed start frame).
pub fn transport_frame(
    model: &dyn HamiltonianFamily,
    path: &ParameterPath,
    branch: &BranchDescriptor,
    steps: usize,
    tol: &SpectralTolerances,
    initial: Option<&ComplexMatrix>,
) -> Result<Frame> {
    Ok(transport_rk4(model, path, branch, per_piece(path, steps), tol, initial)?.end_frame)
}

fn holonomy_result(
    branch: &BranchDescriptor,
    method: Method,
    t: &Transported,
    richardson_error_estimate: f64,
) -> HolonomyResult {
    let u = t.unitary.clone();
    let abelian_phase = (u.dim() == 1).then(|| principal_phase(u.matrix()[(0, 0)]));
    HolonomyResult {
        branch: branch.label.clone(),
        method,
        diagnostics: Diagnostics {
            unitarity_residual: u.residual(),
            min_gap: t.min_gap,
            steps: t.steps,
            richardson_error_estimate,
        },
        unitary: u,
        abelian_phase,
    }
}

/// RK4 transport refined by step doubling until the Richardson estimate
/// `‖U_n − U_{n/2}‖/15` meets `opts.richardson_tol`.
pub fn transport_ode(
    model: &dyn HamiltonianFamily,
    path: &ParameterPath,
    branch: &BranchDescriptor,
    opts: &TransportOptions,
    initial: Option<&ComplexMatrix>,
) -> Result<HolonomyResult> {
    if opts.steps < 2 {
        return Err(Error::InvalidModel("transport needs at least 2 steps".into()));
    }
    let mut coarse_pp = per_piece(path, opts.steps.div_ceil(2));
    let mut coarse = transport_rk4(model, path, branch, coarse_pp, &opts.spectral, initial)?;
    let mut estimate = f64::INFINITY;
    for _ in 0..=opts.max_refinements {
        let fine = transport_rk4(model, path, branch, 2 * coarse_pp, &opts.spectral, initial)?;
        estimate = fine.unitary.matrix().max_abs_diff(coarse.unitary.matrix()) / 15.0;
        if estimate <= opts.richardson_tol {
            return Ok(holonomy_result(branch, Method::Ode, &fine, estimate));
        }
        coarse = fine;
        coarse_pp *= 2;
    }
    Err(Error::NonConvergent { estimate, tolerance: opts.richardson_tol })
}

/// Discrete transport by successive polar projections onto the fibres at
/// `n` points per piece.
pub fn wilson_transport(
    model: &dyn HamiltonianFamily,
    path: &ParameterPath,
    branch: &BranchDescriptor,
    n: usize,
    tol: &SpectralTolerances,
    initial: Option<&ComplexMatrix>,
) -> Result<Transported> {
    let per = per_piece(path, n);
    let (s0, w0) = start_frame(model, path, branch, tol, initial)?;
    let mut min_gap = s0.gap;
    let mut frame = Frame { point: s0.point.clone(), matrix: w0.clone() };
    let mut node = 0;
    for piece in path.pieces() {
        for i in 1..=per {
            node += 1;
            let b = ParameterPoint(piece.eval(i as f64 / per as f64).0);
            let s = branch_sample_following(model, &b, branch, &frame.matrix, tol).map_err(|e| at_node(e, node, &b))?;
            frame = continue_frame(&frame, &s)?;
            min_gap = min_gap.min(s.gap);
        }
    }
    finish(model, path, branch, tol, w0, frame, min_gap, per * path.pieces().len())
}

/// Wilson-line holonomy with `n` projections; the error estimate is the
/// change from `n/2` projections.
pub fn wilson_line_oracle(
    model: &dyn HamiltonianFamily,
    path: &ParameterPath,
    branch: &BranchDescriptor,
    n: usize,
    tol: &SpectralTolerances,
    initial: Option<&ComplexMatrix>,
) -> Result<HolonomyResult> {
    if n < 2 {
        return Err(Error::InvalidModel("the Wilson line needs at least 2 points".into()));
    }
    let fine = wilson_transport(model, path, branch, n, tol, initial)?;
    let coarse = wilson_transport(model, path, branch, n / 2, tol, initial)?;
    let estimate = fine.unitary.matrix().max_abs_diff(coarse.unitary.matrix());
    Ok(holonomy_result(branch, Method::Wilson, &fine, estimate))
}

/// Holonomy of a closed path.
pub fn holonomy(
    model: &dyn HamiltonianFamily,
    path: &ParameterPath,
    branch: &BranchDescriptor,
    method: Method,
    opts: &TransportOptions,
) -> Result<HolonomyResult> {
    if !path.is_closed() {
        return Err(Error::PathNotClosed);
    }
    match method {
        Method::Ode => transport_ode(model, path, branch, opts, None),
        Method::Wilson => wilson_line_oracle(model, path, branch, opts.steps, &opts.spectral, None),
    }
}

/// `A_k` with entries ⟨w^j|∂_k w^i⟩ of a section at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct ConnectionSample {
    pub point: ParameterPoint,
    pub components: Vec<ComplexMatrix>,
    /// Largest Hermitian part removed by anti-Hermitization.
    pub hermitian_discard: f64,
}

impl ConnectionSample {
    /// `Σ_k v_k A_k`.
    pub fn along(&self, v: &[f64]) -> ComplexMatrix {
        let k = self.components[0].rows();
        self.components.iter().zip(v).fold(ComplexMatrix::zeros(k, k), |acc, (a, &vk)| &acc + &a.scale_real(vk))
    }
}

pub fn default_fd_step(b: &ParameterPoint) -> f64 {
    1e-5 * (1.0 + b.norm())
}

/// Central-difference connection of `section` at `b`.
pub fn connection_at(section: &LocalSection, b: &ParameterPoint, h: Option<f64>) -> Result<ConnectionSample> {
    let h = h.unwrap_or_else(|| default_fd_step(b));
    let f = section.frame_at(b)?.matrix;
    let boundary = |e: Error| match e {
        Error::OutOfPatch { .. } => Error::PatchBoundary(section.patch().to_string()),
        other => other,
    };
    let mut components = Vec::with_capacity(b.dim());
    let mut discard: f64 = 0.0;
    let mut norm: f64 = 0.0;
    for k in 0..b.dim() {
        let fp = section.frame_at(&b.offset(k, h)).map_err(boundary)?.matrix;
        let fm = section.frame_at(&b.offset(k, -h)).map_err(boundary)?.matrix;
        let df = (&fp - &fm).scale_real(0.5 / h);
        let raw = overlap(&df, &f)?;
        let a = raw.antihermitian_part();
        discard = discard.max(raw.hermitian_part().max_norm());
        norm = norm.max(a.max_norm());
        components.push(a);
    }
    if discard > 0.1 * norm && discard > 1e-8 {
        return Err(Error::StepTooLarge { discard, norm });
    }
    Ok(ConnectionSample { point: b.clone(), components, hermitian_discard: discard })
}

/// Rows `b0,..,k,re_00,..,im_00,..` (entries row-major).
pub fn connection_csv(samples: &[ConnectionSample]) -> String {
    let mut out = String::new();
    if let Some(first) = samples.first() {
        let kk = first.components[0].rows();
        let mut header: Vec<String> = (0..first.point.dim()).map(|i| format!("b{i}")).collect();
        header.push("direction".into());
        for part in ["re", "im"] {
            for j in 0..kk {
                for i in 0..kk {
                    header.push(format!("{part}_{j}{i}"));
                }
            }
        }
        out.push_str(&header.join(","));
        out.push('\n');
    }
    for s in samples {
        for (k, a) in s.components.iter().enumerate() {
            let mut row: Vec<String> = s.point.coords().iter().map(|x| format!("{x:.17e}")).collect();
            row.push(k.to_string());
            row.extend(a.as_slice().iter().map(|z| format!("{:.17e}", z.re)));
            row.extend(a.as_slice().iter().map(|z| format!("{:.17e}", z.im)));
            out.push_str(&row.join(","));
            out.push('\n');
        }
    }
    out
}

/// `∮ A` of a section along a path, composite Simpson per piece.
pub fn section_loop_integral(
    section: &LocalSection,
    path: &ParameterPath,
    subdivisions: usize,
) -> Result<ComplexMatrix> {
    let m = subdivisions.max(2).next_multiple_of(2);
    let k = section.branch().degeneracy;
    let mut total = ComplexMatrix::zeros(k, k);
    for piece in path.pieces() {
        for i in 0..=m {
            let w = if i == 0 || i == m {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let (p, v) = piece.eval(i as f64 / m as f64);
            let a = connection_at(section, &ParameterPoint(p), None)?.along(&v);
            total = &total + &a.scale_real(w / (3.0 * m as f64));
        }
    }
    Ok(total)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CurvatureSample {
    pub point: ParameterPoint,
    pub plane: [usize; 2],
    pub delta: f64,
    /// `−log(Hol(square))/δ²`, anti-Hermitian.
    pub matrix: ComplexMatrix,
}

impl CurvatureSample {
    pub fn norm(&self) -> f64 {
        self.matrix.frobenius_norm()
    }
}

pub fn curvature_plaquette(
    model: &dyn HamiltonianFamily,
    branch: &BranchDescriptor,
    b: &ParameterPoint,
    plane: [usize; 2],
    delta: f64,
    opts: &TransportOptions,
) -> Result<CurvatureSample> {
    let path = make_path(&PathPreset::Square { center: b.0.clone(), plane, side: delta })?;
    for piece in path.pieces() {
        for i in 0..16 {
            let p = ParameterPoint(piece.eval(i as f64 / 16.0).0);
            if !model.in_domain(&p) {
                return Err(Error::OutOfDomain(p.0));
            }
        }
    }
    let hol = holonomy(model, &path, branch, Method::Ode, opts)?;
    let log = log_unitary(&hol.unitary)?;
    let matrix = log.scale_real(-1.0 / (delta * delta)).antihermitian_part();
    Ok(CurvatureSample { point: b.clone(), plane, delta, matrix })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlatnessReport {
    pub deltas: Vec<f64>,
    pub norms: Vec<f64>,
    pub flat: bool,
}

/// Flat when the plaquette curvature stays below `flatness_tol` at every size.
pub fn flatness_check(
    model: &dyn HamiltonianFamily,
    branch: &BranchDescriptor,
    b: &ParameterPoint,
    plane: [usize; 2],
    deltas: &[f64],
    flatness_tol: f64,
    opts: &TransportOptions,
) -> Result<FlatnessReport> {
    let norms = deltas
        .iter()
        .map(|&d| Ok(curvature_plaquette(model, branch, b, plane, d, opts)?.norm()))
        .collect::<Result<Vec<_>>>()?;
    let flat = norms.iter().all(|&n| n <= flatness_tol);
    Ok(FlatnessReport { deltas: deltas.to_vec(), norms, flat })
}
