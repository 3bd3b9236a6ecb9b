//! Eigenspace bundles of a Hamiltonian family: branch projectors, degeneracy
//! checks and continuous frame tracking along paths.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    eig_hermitian, hermitian_spectral_norm, polar_factor, ComplexMatrix, Eigen, HermitianOperator, C64,
};
use crate::models::{BranchDescriptor, HamiltonianFamily, ParameterPoint};
use crate::path::ParameterPath;

/// Thresholds for accepting a point as part of the bundle's base.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpectralTolerances {
    /// Gap must exceed `gap_rel · ‖H‖_max`.
    pub gap_rel: f64,
    /// Branch eigenvalues must agree to `degeneracy_rel · ‖H‖_max`.
    pub degeneracy_rel: f64,
}

impl Default for SpectralTolerances {
    fn default() -> Self {
        Self { gap_rel: 1e-8, degeneracy_rel: 1e-8 }
    }
}

/// Smallest singular value accepted by [`continue_frame`].
pub const CONTINUATION_MIN_SINGULAR: f64 = 1e-6;
const JUMP_THRESHOLD: f64 = 1.0 - 1e-6;

#[derive(Clone, Debug)]
pub struct EigenspaceSample {
    pub point: ParameterPoint,
    pub branch: BranchDescriptor,
    pub energy: f64,
    pub projector: HermitianOperator,
    pub gap: f64,
    /// Orthonormal eigenvectors spanning the branch, as returned by the eigensolver.
    pub basis: ComplexMatrix,
    /// Index of the first branch eigenvalue in this point's ascending spectrum.
    pub start: usize,
    pub spectrum: Eigen,
    pub h_norm: f64,
}

impl EigenspaceSample {
    pub fn degeneracy(&self) -> usize {
        self.branch.degeneracy
    }
}

/// Orthonormal n×K frame of a fibre.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pub point: ParameterPoint,
    pub matrix: ComplexMatrix,
}

impl Frame {
    pub fn new(point: ParameterPoint, matrix: ComplexMatrix) -> Result<Self> {
        let residual = matrix.unitarity_residual();
        if residual > 1e-10 {
            return Err(Error::NonUnitary { residual });
        }
        Ok(Self { point, matrix })
    }

    /// `‖P·F − F‖_max`, zero when the columns lie in the sample's fibre.
    pub fn fibre_residual(&self, sample: &EigenspaceSample) -> f64 {
        (sample.projector.matrix() * &self.matrix).max_abs_diff(&self.matrix)
    }
}

fn sample_window(
    model: &dyn HamiltonianFamily,
    b: &ParameterPoint,
    branch: &BranchDescriptor,
    eig: Eigen,
    start: usize,
    h_norm: f64,
    tol: &SpectralTolerances,
) -> Result<EigenspaceSample> {
    let k = branch.degeneracy;
    let n = model.hilbert_dim();
    let window = &eig.values[start..start + k];
    let spread = window.iter().cloned().fold(f64::MIN, f64::max) - window.iter().cloned().fold(f64::MAX, f64::min);
    if spread > tol.degeneracy_rel * h_norm {
        return Err(Error::DegeneracyViolation {
            point: b.0.clone(),
            reason: format!("branch `{}` eigenvalues spread by {spread:e}", branch.label),
        });
    }
    let energy = window.iter().sum::<f64>() / k as f64;
    let gap = eig
        .values
        .iter()
        .enumerate()
        .filter(|(i, _)| *i < start || *i >= start + k)
        .map(|(_, &l)| (l - energy).abs())
        .fold(f64::INFINITY, f64::min);
    let gap = if n == k { f64::INFINITY } else { gap };
    if !(gap > tol.gap_rel * h_norm) {
        return Err(Error::DegeneracyViolation {
            point: b.0.clone(),
            reason: format!("gap {gap:e} of branch `{}` at or below tolerance", branch.label),
        });
    }
    let basis = eig.vectors.column_block(start, k);
    let projector = HermitianOperator::hermitize(&(&basis * &basis.adjoint()));
    Ok(EigenspaceSample {
        point: b.clone(),
        branch: branch.clone(),
        energy,
        projector,
        gap,
        basis,
        start,
        spectrum: eig,
        h_norm,
    })
}

fn spectrum(model: &dyn HamiltonianFamily, b: &ParameterPoint) -> Result<(Eigen, f64)> {
    if !model.in_domain(b) {
        return Err(Error::OutOfDomain(b.0.clone()));
    }
    let h = model.evaluate(b)?;
    let norm = h.matrix().max_norm();
    Ok((eig_hermitian(&h)?, norm))
}

fn check_branch(model: &dyn HamiltonianFamily, branch: &BranchDescriptor) -> Result<()> {
    if branch.degeneracy == 0 || branch.first_index + branch.degeneracy > model.hilbert_dim() {
        return Err(Error::UnknownBranch(branch.label.clone()));
    }
    Ok(())
}

/// Fibre of `branch` at `b`, selected by spectral index.
pub fn branch_sample(
    model: &dyn HamiltonianFamily,
    b: &ParameterPoint,
    branch: &BranchDescriptor,
    tol: &SpectralTolerances,
) -> Result<EigenspaceSample> {
    check_branch(model, branch)?;
    let (eig, norm) = spectrum(model, b)?;
    sample_window(model, b, branch, eig, branch.first_index, norm, tol)
}

/// Fibre of `branch` at `b`, selected as the K-window of the spectrum with
/// maximal overlap `‖V†F‖²_F` with the reference frame.
pub fn branch_sample_following(
    model: &dyn HamiltonianFamily,
    b: &ParameterPoint,
    branch: &BranchDescriptor,
    reference: &ComplexMatrix,
    tol: &SpectralTolerances,
) -> Result<EigenspaceSample> {
    check_branch(model, branch)?;
    let (eig, norm) = spectrum(model, b)?;
    let k = branch.degeneracy;
    let n = model.hilbert_dim();
    let mut best = (branch.first_index, f64::NEG_INFINITY);
    for start in 0..=n - k {
        let v = eig.vectors.column_block(start, k);
        let score = (&v.adjoint() * reference).frobenius_norm();
        if score > best.1 + 1e-12 {
            best = (start, score);
        }
    }
    sample_window(model, b, branch, eig, best.0, norm, tol)
}

/// Canonical frame of the span of `m`, independent of which orthonormal
/// basis of that span is passed in.
///
/// Pivot rows are picked by pivoted Cholesky of the projector `m m†` (lowest
/// row on ties); the frame is rotated so that its pivot block is Hermitian
/// positive. For one column this makes the largest entry real and positive.
pub fn gauge_fix(m: &ComplexMatrix) -> ComplexMatrix {
    let (n, k) = m.shape();
    if k == 0 {
        return m.clone();
    }
    let rows = pivot_rows(m);
    if k == 1 {
        let c = m[(rows[0], 0)];
        if c.norm() == 0.0 {
            return m.clone();
        }
        let mut out = m.scale(c.conj() / c.norm());
        out[(rows[0], 0)] = C64::new(c.norm(), 0.0);
        return out;
    }
    let block = ComplexMatrix::from_fn(k, k, |i, j| m[(rows[i], j)]);
    match polar_factor(&block, 0.0) {
        Ok(q) => {
            let out = m * &q.adjoint();
            debug_assert_eq!(out.shape(), (n, k));
            out
        }
        Err(_) => m.clone(),
    }
}

fn pivot_rows(m: &ComplexMatrix) -> Vec<usize> {
    let (n, k) = m.shape();
    let p = m * &m.adjoint();
    let mut diag: Vec<f64> = (0..n).map(|i| p[(i, i)].re).collect();
    let mut cols: Vec<Vec<C64>> = Vec::with_capacity(k);
    let mut rows = Vec::with_capacity(k);
    for _ in 0..k {
        let max = (0..n).filter(|i| !rows.contains(i)).map(|i| diag[i]).fold(f64::NEG_INFINITY, f64::max);
        let piv = (0..n).find(|&i| !rows.contains(&i) && diag[i] >= max * (1.0 - 1e-12)).unwrap_or(0);
        let d = diag[piv].max(0.0).sqrt();
        let col: Vec<C64> = (0..n)
            .map(|i| {
                let mut v = p[(i, piv)];
                for l in &cols {
                    v -= l[i] * l[piv].conj();
                }
                if d > 0.0 {
                    v / d
                } else {
                    C64::new(0.0, 0.0)
                }
            })
            .collect();
        for i in 0..n {
            diag[i] -= col[i].norm_sqr();
        }
        cols.push(col);
        rows.push(piv);
    }
    rows.sort_unstable();
    rows
}

/// Deterministic frame of a fibre.
pub fn initial_frame(sample: &EigenspaceSample) -> Frame {
    Frame { point: sample.point.clone(), matrix: gauge_fix(&sample.basis) }
}

/// One discrete transport step: the frame of the next fibre closest to `prev`.
pub fn continue_frame(prev: &Frame, next: &EigenspaceSample) -> Result<Frame> {
    let projected = next.projector.matrix() * &prev.matrix;
    let matrix = polar_factor(&projected, CONTINUATION_MIN_SINGULAR)?;
    Ok(Frame { point: next.point.clone(), matrix })
}

#[derive(Clone, Debug)]
pub struct BranchTrack {
    pub path: ParameterPath,
    pub samples: Vec<EigenspaceSample>,
    pub frames: Vec<Frame>,
    pub min_gap: f64,
}

impl BranchTrack {
    pub fn final_frame(&self) -> &Frame {
        self.frames.last().expect("tracks have at least two nodes")
    }

    /// `node,b0,..,energy,gap` rows.
    pub fn to_csv(&self) -> String {
        let dim = self.path.dim();
        let mut out = String::from("node");
        for k in 0..dim {
            out.push_str(&format!(",b{k}"));
        }
        out.push_str(",energy,gap\n");
        for (i, s) in self.samples.iter().enumerate() {
            out.push_str(&i.to_string());
            for x in s.point.coords() {
                out.push_str(&format!(",{x:.17e}"));
            }
            out.push_str(&format!(",{:.17e},{:.17e}\n", s.energy, s.gap));
        }
        out
    }
}

fn node_error(err: Error, node: usize, b: &ParameterPoint) -> Error {
    match err {
        Error::OutOfDomain(_) | Error::DegeneracyViolation { .. } => Error::GapCollapse { node, point: b.0.clone() },
        other => other,
    }
}

/// Samples and parallel-transported frames at every node of `path`.
pub fn track_branch(
    model: &dyn HamiltonianFamily,
    path: &ParameterPath,
    branch: &BranchDescriptor,
    tol: &SpectralTolerances,
) -> Result<BranchTrack> {
    let nodes = path.nodes();
    let first = branch_sample(model, &nodes[0], branch, tol).map_err(|e| node_error(e, 0, &nodes[0]))?;
    let mut frames = vec![initial_frame(&first)];
    let mut min_gap = first.gap;
    let mut samples = vec![first];
    for (k, b) in nodes.iter().enumerate().skip(1) {
        let prev = frames.last().unwrap();
        let sample = branch_sample_following(model, b, branch, &prev.matrix, tol).map_err(|e| node_error(e, k, b))?;
        let jump = hermitian_spectral_norm(&(sample.projector.matrix() - samples[k - 1].projector.matrix()))?;
        if jump >= JUMP_THRESHOLD {
            return Err(Error::SubspaceJump { node: k - 1 });
        }
        let frame = continue_frame(prev, &sample).map_err(|_| Error::SubspaceJump { node: k - 1 })?;
        min_gap = min_gap.min(sample.gap);
        frames.push(frame);
        samples.push(sample);
    }
    Ok(BranchTrack { path: path.clone(), samples, frames, min_gap })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{overlap, ONE};
    use crate::models::{make_lambda_system, make_planar_spin, make_spin_dipole, Spin};
    use crate::random::{random_unitary, seeded};

    fn half() -> crate::models::SpinDipole {
        make_spin_dipole(Spin::new(0.5).unwrap())
    }

    #[test]
    fn spin_half_pole_sample() {
        let m = half();
        let br = m.branch("+1/2").unwrap();
        let s = branch_sample(&m, &[0.0, 0.0, 1.0].into(), &br, &Default::default()).unwrap();
        assert!((s.energy - 0.5).abs() < 1e-14);
        assert!((s.gap - 1.0).abs() < 1e-14);
        let expected = ComplexMatrix::diag_real(&[1.0, 0.0]);
        assert!(s.projector.matrix().max_abs_diff(&expected) < 1e-14);
    }

    #[test]
    fn lambda_dark_sample() {
        let m = make_lambda_system();
        let br = m.branch("dark").unwrap();
        let s = branch_sample(&m, &[0.0, 0.0, 1.0].into(), &br, &Default::default()).unwrap();
        assert!(s.energy.abs() < 1e-14);
        assert!((s.projector.matrix().trace().re - 2.0).abs() < 1e-12);
        assert!((s.gap - 1.0).abs() < 1e-12);
    }

    #[test]
    fn origin_is_out_of_domain() {
        let m = half();
        let br = m.branch("+1/2").unwrap();
        let err = branch_sample(&m, &[0.0, 0.0, 0.0].into(), &br, &Default::default()).unwrap_err();
        assert!(matches!(err, Error::OutOfDomain(_)));
    }

    #[test]
    fn gauge_fix_makes_pivot_positive() {
        let m = ComplexMatrix::from_columns(&[vec![C64::new(0.0, 0.6), C64::new(0.0, -0.8)]]).unwrap();
        let g = gauge_fix(&m);
        assert!((g[(1, 0)] - C64::new(0.8, 0.0)).norm() < 1e-15);
        assert!((g[(0, 0)] - C64::new(-0.6, 0.0)).norm() < 1e-15);
        // tie resolved by the lowest row
        let t = ComplexMatrix::from_columns(&[vec![C64::new(0.0, 1.0), -ONE]]).unwrap();
        assert_eq!(gauge_fix(&t)[(0, 0)], ONE);
    }

    #[test]
    fn gauge_fix_ignores_basis_choice() {
        let mut rng = seeded(77);
        for k in 1..=3 {
            for _ in 0..20 {
                let v = random_unitary(&mut rng, 5).matrix().column_block(0, k);
                let g = random_unitary(&mut rng, k);
                let a = gauge_fix(&v);
                assert!(gauge_fix(&(&v * g.matrix())).max_abs_diff(&a) < 1e-12);
                assert!(overlap(&a, &v).unwrap().unitarity_residual() < 1e-12);
            }
        }
    }

    #[test]
    fn continue_frame_is_identity_on_same_fibre() {
        let m = make_lambda_system();
        let br = m.branch("dark").unwrap();
        let s = branch_sample(&m, &[0.3, -0.4, 0.5].into(), &br, &Default::default()).unwrap();
        let f = initial_frame(&s);
        let g = continue_frame(&f, &s).unwrap();
        assert!(g.matrix.max_abs_diff(&f.matrix) < 1e-12);
    }

    #[test]
    fn continue_frame_kills_first_order_drift() {
        let m = half();
        let br = m.branch("+1/2").unwrap();
        let tol = SpectralTolerances::default();
        let base = branch_sample(&m, &[0.3, 0.2, 0.9].into(), &br, &tol).unwrap();
        let f = initial_frame(&base);
        let mut prev = f64::NAN;
        for delta in [1e-2, 5e-3] {
            let next = branch_sample(&m, &[0.3 + delta, 0.2 - delta, 0.9].into(), &br, &tol).unwrap();
            let g = continue_frame(&f, &next).unwrap();
            let dev = ((&f.matrix.adjoint() * &g.matrix)[(0, 0)] - ONE).norm();
            assert!(dev < delta * delta);
            if prev.is_finite() {
                // quadratic in delta
                assert!((prev / dev - 4.0).abs() < 0.2);
            }
            prev = dev;
        }
    }

    #[test]
    fn continue_frame_rejects_orthogonal_fibre() {
        let m = half();
        let up = branch_sample(&m, &[0.0, 0.0, 1.0].into(), &m.branch("+1/2").unwrap(), &Default::default()).unwrap();
        let down = branch_sample(&m, &[0.0, 0.0, 1.0].into(), &m.branch("-1/2").unwrap(), &Default::default()).unwrap();
        let f = initial_frame(&up);
        assert!(matches!(continue_frame(&f, &down), Err(Error::SingularInput { .. })));
    }

    #[test]
    fn continuation_is_gauge_equivariant() {
        let m = make_lambda_system();
        let br = m.branch("dark").unwrap();
        let tol = SpectralTolerances::default();
        let mut rng = seeded(7);
        let a = branch_sample(&m, &[0.3, -0.4, 0.5].into(), &br, &tol).unwrap();
        let b = branch_sample(&m, &[0.35, -0.3, 0.55].into(), &br, &tol).unwrap();
        let f = initial_frame(&a);
        let g = random_unitary(&mut rng, 2);
        let fg = Frame { point: f.point.clone(), matrix: &f.matrix * g.matrix() };
        let lhs = continue_frame(&fg, &b).unwrap().matrix;
        let rhs = &continue_frame(&f, &b).unwrap().matrix * g.matrix();
        assert!(lhs.max_abs_diff(&rhs) < 1e-10);
    }

    #[test]
    fn constant_path_track() {
        let m = half();
        let br = m.branch("+1/2").unwrap();
        let b: ParameterPoint = [0.1, 0.2, 0.3].into();
        let path = ParameterPath::from_nodes(vec![b.clone(); 5]).unwrap();
        let t = track_branch(&m, &path, &br, &Default::default()).unwrap();
        for f in &t.frames {
            assert!(f.matrix.max_abs_diff(&t.frames[0].matrix) < 1e-12);
        }
    }

    #[test]
    fn planar_track_through_origin_collapses() {
        let m = make_planar_spin(Spin::new(0.5).unwrap(), 1, 1.0).unwrap();
        let br = m.branch("+1/2").unwrap();
        let nodes: Vec<ParameterPoint> = (0..5).map(|k| [-1.0 + 0.5 * k as f64, 0.0].into()).collect();
        let path = ParameterPath::from_nodes(nodes).unwrap();
        let err = track_branch(&m, &path, &br, &Default::default()).unwrap_err();
        assert_eq!(err, Error::GapCollapse { node: 2, point: vec![0.0, 0.0] });
    }

    #[test]
    fn meridian_track_ends_on_equator_eigenvector() {
        let m = half();
        let br = m.branch("+1/2").unwrap();
        let nodes: Vec<ParameterPoint> = (0..=100)
            .map(|k| {
                let t = std::f64::consts::FRAC_PI_2 * k as f64 / 100.0;
                [t.sin(), 0.0, t.cos()].into()
            })
            .collect();
        let path = ParameterPath::from_nodes(nodes).unwrap();
        let t = track_branch(&m, &path, &br, &Default::default()).unwrap();
        assert!((t.min_gap - 1.0).abs() < 1e-12);
        let f = &t.final_frame().matrix;
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let overlap = f[(0, 0)].conj() * s + f[(1, 0)].conj() * s;
        assert!((overlap.norm() - 1.0).abs() < 1e-12);
        assert_eq!(t.to_csv().lines().count(), 102);
    }
}
