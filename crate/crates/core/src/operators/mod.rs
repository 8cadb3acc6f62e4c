//! Coboundaries, Laplacians, grounding morphisms and mapping cones.

pub mod channels;
pub mod cone;
pub mod grounding;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat, Vector};
use crate::sheaf::CellSheaf;

pub use channels::{block_decomposition, channel_set, total_cone_laplacian, BlockDecompositionReport, ChannelSet};
pub use cone::{
    algebraic_cone, geometric_cone_sheaf, translated_cone, verify_cone_equivalence, verify_long_exact_sequence,
    ConeEquivalenceReport, LesReport, MappingCone,
};
pub use grounding::{incidence_defect, GroundingMode, GroundingMorphism, IncidenceDefect, TargetSheaf};

/// Where an operator came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Base,
    GeometricCone,
    AlgebraicCone,
    Channel,
}

/// Outcome of a verification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckStatus {
    Pass,
    Fail,
    HypothesisNotMet,
}

/// The coboundary `d^j : C^j -> C^{j+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Coboundary {
    pub degree: usize,
    pub matrix: Mat,
}

/// A symmetric positive semidefinite operator on one cochain space.
#[derive(Debug, Clone, PartialEq)]
pub struct SheafLaplacian {
    pub degree: i32,
    pub matrix: Mat,
    pub provenance: Provenance,
}

impl SheafLaplacian {
    /// Wraps a square matrix, rejecting asymmetry above `1e-10` (relative).
    pub fn new(degree: i32, matrix: Mat, provenance: Provenance) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::Shape(format!("operator of shape {:?} is not square", matrix.shape())));
        }
        let asym = linalg::max_asymmetry(&matrix);
        if asym > linalg::ABS_ZERO * linalg::max_abs(&matrix).max(1.0) {
            return Err(Error::Asymmetric(asym));
        }
        Ok(SheafLaplacian { degree, matrix, provenance })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Coboundary matrix in any integer degree; degrees without cells give
/// correctly shaped zero maps.
pub fn coboundary_matrix(sheaf: &CellSheaf, j: i32) -> Mat {
    let dim = |k: i32| if (0..=2).contains(&k) { sheaf.cochain_dim(k as usize) } else { 0 };
    let rows = dim(j + 1);
    let cols = dim(j);
    let mut d = Mat::zeros(rows, cols);
    let cx = sheaf.complex();
    match j {
        0 => {
            let (ro, co) = (sheaf.offsets(1), sheaf.offsets(0));
            for (e, &row) in ro.iter().take(cx.cell_count(1)).enumerate() {
                for (slot, &(v, sign)) in cx.edge_faces(e).iter().enumerate() {
                    let r = sheaf.edge_restriction(e, slot);
                    d.view_mut((row, co[v]), r.shape()).copy_from(&(r * sign));
                }
            }
        }
        1 => {
            let (ro, co) = (sheaf.offsets(2), sheaf.offsets(1));
            for (t, &row) in ro.iter().take(cx.cell_count(2)).enumerate() {
                for (slot, &(e, sign)) in cx.triangle_faces(t).iter().enumerate() {
                    let r = sheaf.triangle_restriction(t, slot);
                    d.view_mut((row, co[e]), r.shape()).copy_from(&(r * sign));
                }
            }
        }
        _ => {}
    }
    d
}

/// Assembles `d^j` for `j` in `{0, 1}`.
pub fn coboundary(sheaf: &CellSheaf, j: usize) -> Result<Coboundary> {
    if j > 1 {
        return Err(Error::DegreeOutOfRange(j as i32));
    }
    Ok(Coboundary { degree: j, matrix: coboundary_matrix(sheaf, j as i32) })
}

/// `d_prev d_prev^T + d_next^T d_next`.
pub fn hodge_laplacian(d_prev: &Mat, d_next: &Mat) -> Mat {
    let l = d_prev * d_prev.transpose() + d_next.transpose() * d_next;
    (&l + l.transpose()) * 0.5
}

/// The Hodge Laplacian `L_j` for `j` in `{0, 1, 2}`.
pub fn laplacian(sheaf: &CellSheaf, j: usize) -> Result<SheafLaplacian> {
    if j > 2 {
        return Err(Error::DegreeOutOfRange(j as i32));
    }
    let j = j as i32;
    let l = hodge_laplacian(&coboundary_matrix(sheaf, j - 1), &coboundary_matrix(sheaf, j));
    SheafLaplacian::new(j, l, Provenance::Base)
}

/// Betti number by rank-nullity: `dim C^j - rank d^j - rank d^{j-1}`.
pub fn betti_rank_nullity(sheaf: &CellSheaf, j: usize) -> usize {
    let j = j as i32;
    let dim = if j <= 2 { sheaf.cochain_dim(j as usize) } else { 0 };
    let r_next = linalg::numerical_rank(&coboundary_matrix(sheaf, j), linalg::RANK_TOL);
    let r_prev = linalg::numerical_rank(&coboundary_matrix(sheaf, j - 1), linalg::RANK_TOL);
    dim - r_next - r_prev
}

/// `E(x) = <x, L x>`.
pub fn consistency_energy(l: &SheafLaplacian, x: &Vector) -> Result<f64> {
    if x.len() != l.dim() {
        return Err(Error::DimensionMismatch { expected: l.dim(), got: x.len() });
    }
    Ok(x.dot(&(&l.matrix * x)).max(0.0))
}

/// Whether `E(x) <= delta`.
pub fn is_delta_feasible(l: &SheafLaplacian, x: &Vector, delta: f64) -> Result<bool> {
    if delta.is_nan() || delta < 0.0 {
        return Err(Error::NegativeDelta(delta));
    }
    Ok(consistency_energy(l, x)? <= delta)
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::complex::{CliqueComplex, Graph};
    use crate::sheaf::{self, Gauge};

    fn single_edge() -> CellSheaf {
        CellSheaf::constant(CliqueComplex::from_graph(&Graph::new(2, &[(0, 1)]).unwrap()), 1)
    }

    #[test]
    fn single_edge_operators() {
        let s = single_edge();
        let d0 = coboundary(&s, 0).unwrap().matrix;
        assert_eq!(d0, Mat::from_row_slice(1, 2, &[-1.0, 1.0]));
        let l0 = laplacian(&s, 0).unwrap();
        assert_eq!(l0.matrix, Mat::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]));
        assert!(matches!(coboundary(&s, 2), Err(Error::DegreeOutOfRange(2))));
    }

    #[test]
    fn cycle_coboundary_rows() {
        let s = sheaf::trivial_bundle(10, 1).unwrap();
        let d0 = coboundary(&s, 0).unwrap().matrix;
        assert_eq!(d0.shape(), (10, 10));
        for r in 0..10 {
            let row: Vec<f64> = d0.row(r).iter().copied().filter(|x| *x != 0.0).collect();
            assert_eq!(row, vec![-1.0, 1.0]);
        }
    }

    #[test]
    fn k3_identity() {
        let s = CellSheaf::constant(CliqueComplex::from_graph(&Graph::complete(3).unwrap()), 1);
        let d0 = coboundary(&s, 0).unwrap().matrix;
        let d1 = coboundary(&s, 1).unwrap().matrix;
        assert_eq!(linalg::max_abs(&(&d1 * &d0)), 0.0);
        let l0 = laplacian(&s, 0).unwrap().matrix;
        // oracle: the graph Laplacian of K3 is 3I - J, eigenvalues 0, 3, 3
        let oracle = Mat::from_fn(3, 3, |i, j| if i == j { 2.0 } else { -1.0 });
        assert_eq!(l0, oracle);
        let (vals, _) = linalg::sym_eigen(&l0);
        assert!(vals[0].abs() < 1e-12 && (vals[1] - 3.0).abs() < 1e-12 && (vals[2] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn mobius_gap() {
        let s = sheaf::mobius_bundle(10, 1).unwrap();
        let (vals, _) = linalg::sym_eigen(&laplacian(&s, 0).unwrap().matrix);
        let closed = 2.0 * (1.0 - (std::f64::consts::PI / 10.0).cos());
        assert!((vals[0] - closed).abs() < 1e-12);
    }

    #[test]
    fn energy_matches_coboundary_norm() {
        let s = sheaf::trivial_bundle(10, 1).unwrap();
        let l0 = laplacian(&s, 0).unwrap();
        let x = Vector::from_fn(10, |i, _| ((i * 7 + 3) % 5) as f64 - 2.0);
        let d0 = coboundary(&s, 0).unwrap().matrix;
        let direct = (&d0 * &x).norm_squared();
        assert!((consistency_energy(&l0, &x).unwrap() - direct).abs() < 1e-10);
        assert!(consistency_energy(&l0, &Vector::zeros(3)).is_err());
    }

    #[test]
    fn feasibility_is_inclusive() {
        let l0 = laplacian(&single_edge(), 0).unwrap();
        let k = Vector::from_vec(vec![1.0, 1.0]);
        let top = Vector::from_vec(vec![-1.0, 1.0]) / 2f64.sqrt();
        assert!(is_delta_feasible(&l0, &k, 0.0).unwrap());
        assert!(!is_delta_feasible(&l0, &top, 1.0).unwrap());
        assert!(is_delta_feasible(&l0, &top, 2.0 + 1e-12).unwrap());
        assert!(is_delta_feasible(&l0, &top, -1.0).is_err());
    }

    #[test]
    fn d_squared_vanishes_on_gauged_k4() {
        let cx = CliqueComplex::from_graph(&Graph::complete(4).unwrap());
        let s = Gauge::random(&cx, 2, 5).apply(cx, 2).unwrap();
        let d0 = coboundary(&s, 0).unwrap().matrix;
        let d1 = coboundary(&s, 1).unwrap().matrix;
        assert!(linalg::max_abs(&(&d1 * &d0)) < 1e-12);
        for j in 0..3 {
            let (vals, _) = linalg::sym_eigen(&laplacian(&s, j).unwrap().matrix);
            let thr = linalg::zero_threshold(*vals.last().unwrap());
            let kernel = vals.iter().filter(|&&l| l <= thr).count();
            assert_eq!(kernel, betti_rank_nullity(&s, j), "degree {j}");
        }
    }

    #[test]
    fn bundle_kernels() {
        let s = sheaf::make_line_bundle(6, 2, &BTreeMap::new()).unwrap();
        assert_eq!(betti_rank_nullity(&s, 0), 2);
        assert_eq!(betti_rank_nullity(&s, 1), 2);
    }
}
