//! Parameter-space curves `b(t)`.
//!
//! A [`ParameterPath`] is a chain of pieces, each either a straight segment or
//! a smooth closure `s ↦ (b(s), db/ds)` on `s ∈ [0, 1]`. Integrators step
//! inside one piece at a time so kinks at piece boundaries never land inside
//! a Runge–Kutta step. The path also carries a node discretization, used for
//! tracking, export and the geometric invariants.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::models::ParameterPoint;

pub type PieceFn = Arc<dyn Fn(f64) -> (Vec<f64>, Vec<f64>) + Send + Sync>;

#[derive(Clone)]
pub enum Piece {
    Segment(Vec<f64>, Vec<f64>),
    Smooth(PieceFn),
}

impl Piece {
    /// Point and derivative at local parameter `s ∈ [0, 1]`.
    pub fn eval(&self, s: f64) -> (Vec<f64>, Vec<f64>) {
        match self {
            Piece::Segment(a, b) => {
                let p = a.iter().zip(b).map(|(x, y)| x + s * (y - x)).collect();
                let v = a.iter().zip(b).map(|(x, y)| y - x).collect();
                (p, v)
            }
            Piece::Smooth(f) => f(s),
        }
    }

    fn reversed(&self) -> Piece {
        match self {
            Piece::Segment(a, b) => Piece::Segment(b.clone(), a.clone()),
            Piece::Smooth(f) => {
                let f = Arc::clone(f);
                Piece::Smooth(Arc::new(move |s| {
                    let (p, v) = f(1.0 - s);
                    (p, v.into_iter().map(|x| -x).collect())
                }))
            }
        }
    }
}

impl fmt::Debug for Piece {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Piece::Segment(a, b) => write!(f, "Segment({a:?} -> {b:?})"),
            Piece::Smooth(_) => write!(f, "Smooth(..)"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ParameterPath {
    dim: usize,
    pieces: Vec<Piece>,
    nodes: Vec<ParameterPoint>,
    closed: bool,
}

const CLOSURE_TOL: f64 = 1e-12;

impl ParameterPath {
    /// Polyline through `nodes`.
    pub fn from_nodes(nodes: Vec<ParameterPoint>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::BadPresetParams("a path needs at least 2 nodes".into()));
        }
        let dim = nodes[0].dim();
        if dim == 0 || nodes.iter().any(|n| n.dim() != dim) {
            return Err(Error::BadPresetParams("path nodes must share one nonzero dimension".into()));
        }
        if nodes.iter().any(|n| n.coords().iter().any(|x| !x.is_finite())) {
            return Err(Error::NonFinite);
        }
        let constant = nodes.iter().all(|n| n.distance(&nodes[0]) == 0.0);
        if !constant && nodes.windows(2).any(|w| w[0].distance(&w[1]) == 0.0) {
            return Err(Error::BadPresetParams("consecutive path nodes must be distinct".into()));
        }
        let pieces = nodes.windows(2).map(|w| Piece::Segment(w[0].0.clone(), w[1].0.clone())).collect();
        let closed = nodes[0].distance(nodes.last().unwrap()) <= CLOSURE_TOL;
        Ok(Self { dim, pieces, nodes, closed })
    }

    /// Smooth pieces, each discretized with `nodes_per_piece` intervals.
    pub fn from_pieces(dim: usize, pieces: Vec<Piece>, nodes_per_piece: usize) -> Result<Self> {
        if pieces.is_empty() || nodes_per_piece == 0 {
            return Err(Error::BadPresetParams("empty path".into()));
        }
        let mut nodes = Vec::with_capacity(pieces.len() * nodes_per_piece + 1);
        for (i, piece) in pieces.iter().enumerate() {
            let start = if i == 0 { 0 } else { 1 };
            for k in start..=nodes_per_piece {
                let (p, _) = piece.eval(k as f64 / nodes_per_piece as f64);
                if p.len() != dim {
                    return Err(Error::BadPresetParams("piece dimension mismatch".into()));
                }
                nodes.push(ParameterPoint(p));
            }
        }
        let closed = nodes[0].distance(nodes.last().unwrap()) <= CLOSURE_TOL;
        if closed {
            // make the closure exact
            let first = nodes[0].clone();
            *nodes.last_mut().unwrap() = first;
        }
        Ok(Self { dim, pieces, nodes, closed })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn nodes(&self) -> &[ParameterPoint] {
        &self.nodes
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn start(&self) -> ParameterPoint {
        ParameterPoint(self.pieces[0].eval(0.0).0)
    }

    pub fn end(&self) -> ParameterPoint {
        ParameterPoint(self.pieces[self.pieces.len() - 1].eval(1.0).0)
    }

    /// Point at global parameter `u ∈ [0, 1]`, pieces sharing the range evenly.
    pub fn point_at(&self, u: f64) -> ParameterPoint {
        let n = self.pieces.len();
        let x = (u.clamp(0.0, 1.0) * n as f64).min(n as f64);
        let i = (x.floor() as usize).min(n - 1);
        ParameterPoint(self.pieces[i].eval(x - i as f64).0)
    }

    pub fn reversed(&self) -> ParameterPath {
        let pieces = self.pieces.iter().rev().map(Piece::reversed).collect();
        let mut nodes = self.nodes.clone();
        nodes.reverse();
        Self { dim: self.dim, pieces, nodes, closed: self.closed }
    }

    /// `self` followed by `next`; `next` must start where `self` ends.
    pub fn then(&self, next: &ParameterPath) -> Result<ParameterPath> {
        if self.dim != next.dim || self.end().distance(&next.start()) > 1e-12 {
            return Err(Error::BadPresetParams("paths do not join".into()));
        }
        let mut pieces = self.pieces.clone();
        pieces.extend(next.pieces.iter().cloned());
        let mut nodes = self.nodes.clone();
        nodes.extend(next.nodes.iter().skip(1).cloned());
        let closed = nodes[0].distance(nodes.last().unwrap()) <= CLOSURE_TOL;
        Ok(Self { dim: self.dim, pieces, nodes, closed })
    }

    /// Same pieces with a different node discretization.
    pub fn with_nodes_per_piece(&self, nodes_per_piece: usize) -> Result<ParameterPath> {
        Self::from_pieces(self.dim, self.pieces.clone(), nodes_per_piece)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polyline_basics() {
        let p = ParameterPath::from_nodes(vec![[0.0, 0.0].into(), [1.0, 0.0].into(), [0.0, 0.0].into()]).unwrap();
        assert!(p.is_closed());
        assert_eq!(p.pieces().len(), 2);
        assert_eq!(p.point_at(0.25).coords(), &[0.5, 0.0]);
        let r = p.reversed();
        assert_eq!(r.point_at(0.25).coords(), &[0.5, 0.0]);
        assert!(ParameterPath::from_nodes(vec![[0.0].into()]).is_err());
        assert!(ParameterPath::from_nodes(vec![[0.0].into(), [0.0].into(), [1.0].into()]).is_err());
        // a constant path is allowed
        assert!(ParameterPath::from_nodes(vec![[1.0].into(), [1.0].into()]).unwrap().is_closed());
    }

    #[test]
    fn smooth_reversal_negates_velocity() {
        let piece = Piece::Smooth(Arc::new(|s: f64| (vec![s * s], vec![2.0 * s])));
        let p = ParameterPath::from_pieces(1, vec![piece], 4).unwrap();
        let r = p.reversed();
        let (x, v) = r.pieces()[0].eval(0.25);
        assert_eq!(x, vec![0.5625]);
        assert_eq!(v, vec![-1.5]);
        assert_eq!(p.nodes().len(), 5);
    }
}
