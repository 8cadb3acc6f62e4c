//! The four diagnostic operators and the block structure of the cone
//! Laplacian for a grounding on `C^1`.

use serde::{Deserialize, Serialize};

use super::grounding::GroundingMorphism;
use super::{coboundary_matrix, laplacian, Provenance, SheafLaplacian};
use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::sheaf::CellSheaf;

/// Coupling norms below this count as zero.
pub const COUPLING_TOL: f64 = 1e-10;
/// Spectral agreement required when the coupling vanishes.
pub const BLOCK_SPECTRUM_TOL: f64 = 1e-8;

/// `L0`, `L1`, the relative channel `L1 + eps^T eps`, and the ground
/// utilization `eps eps^T` (an auxiliary Gram operator, not a Laplacian).
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    pub l0: SheafLaplacian,
    pub l1: SheafLaplacian,
    pub relative: SheafLaplacian,
    pub utilization: SheafLaplacian,
    /// `eps^T eps`, the term added to `L1`.
    pub gram: Mat,
}

/// Builds the channel set; the grounding must be stored on `C^1`.
pub fn channel_set(sheaf: &CellSheaf, g: &GroundingMorphism) -> Result<ChannelSet> {
    let GroundingMorphism::CochainC1 { map: eps, .. } = g else {
        return Err(Error::ModeMismatch("channel set needs a grounding on C^1; convert with to_cochain_c1".into()));
    };
    if eps.ncols() != sheaf.cochain_dim(1) {
        return Err(Error::DimensionMismatch { expected: sheaf.cochain_dim(1), got: eps.ncols() });
    }
    let l0 = laplacian(sheaf, 0)?;
    let l1 = laplacian(sheaf, 1)?;
    let gram = eps.transpose() * eps;
    let gram = (&gram + gram.transpose()) * 0.5;
    let relative = SheafLaplacian::new(1, &l1.matrix + &gram, Provenance::Channel)?;
    let util = eps * eps.transpose();
    let utilization = SheafLaplacian::new(0, (&util + util.transpose()) * 0.5, Provenance::Channel)?;
    Ok(ChannelSet { l0, l1, relative, utilization, gram })
}

/// Cone Laplacian on the total space `C^0 + C^1 + C^2 + W` for a grounding
/// `eps : C^1 -> W` into the degree-zero target. With
/// `D = [[-d_F, 0], [-eps, 0]]` it equals `D D^T + D^T D`, i.e.
/// `[[L_F + eps^T eps, d_F eps^T], [eps d_F^T, eps eps^T]]` with
/// `L_F = diag(L0, L1, L2)`. Returns the operator and the coupling norm
/// `||d_F eps^T||`.
pub fn total_cone_laplacian(sheaf: &CellSheaf, eps: &Mat) -> Result<(Mat, f64)> {
    let (n0, n1, n2) = (sheaf.cochain_dim(0), sheaf.cochain_dim(1), sheaf.cochain_dim(2));
    if eps.ncols() != n1 {
        return Err(Error::DimensionMismatch { expected: n1, got: eps.ncols() });
    }
    let w = eps.nrows();
    let ls: Vec<Mat> = (0..3).map(|j| laplacian(sheaf, j).map(|l| l.matrix)).collect::<Result<_>>()?;
    let mut top = linalg::block_diag(&ls);
    let gram = eps.transpose() * eps;
    for r in 0..n1 {
        for c in 0..n1 {
            top[(n0 + r, n0 + c)] += gram[(r, c)];
        }
    }
    // d_F eps^T lands in C^2 only, since eps^T lands in C^1
    let coupling_c2 = coboundary_matrix(sheaf, 1) * eps.transpose();
    let mut coupling = Mat::zeros(n0 + n1 + n2, w);
    coupling.view_mut((n0 + n1, 0), (n2, w)).copy_from(&coupling_c2);
    let l = linalg::block2(&top, &coupling, &coupling.transpose(), &(eps * eps.transpose()));
    let l = (&l + l.transpose()) * 0.5;
    Ok((l, linalg::spectral_norm(&coupling_c2)))
}

/// Outcome of the block-decomposition check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockDecompositionReport {
    pub coupling_norm: f64,
    /// Whether the coupling vanished, so that equality was asserted.
    pub asserted: bool,
    /// Distance between the compression to `C^1 + W` and
    /// `spec(L1 + eps^T eps) + spec(eps eps^T)`.
    pub compressed_distance: Option<f64>,
    /// Distance between the full total spectrum and
    /// `spec(L0) + spec(L1 + eps^T eps) + spec(L2) + spec(eps eps^T)`.
    pub total_distance: Option<f64>,
    pub holds: Option<bool>,
}

/// Checks that the cone Laplacian splits into `L1 + eps^T eps` and
/// `eps eps^T` when the coupling term vanishes; otherwise reports it.
pub fn block_decomposition(sheaf: &CellSheaf, g: &GroundingMorphism) -> Result<BlockDecompositionReport> {
    let ch = channel_set(sheaf, g)?;
    let GroundingMorphism::CochainC1 { map: eps, .. } = g else { unreachable!("checked by channel_set") };
    let (total, coupling_norm) = total_cone_laplacian(sheaf, eps)?;
    if coupling_norm >= COUPLING_TOL {
        return Ok(BlockDecompositionReport {
            coupling_norm,
            asserted: false,
            compressed_distance: None,
            total_distance: None,
            holds: None,
        });
    }
    let (n0, n1) = (sheaf.cochain_dim(0), sheaf.cochain_dim(1));
    let n2 = sheaf.cochain_dim(2);
    let w = eps.nrows();
    let spec = |m: &Mat| linalg::sym_eigen(m).0;
    let rel = spec(&ch.relative.matrix);
    let util = spec(&ch.utilization.matrix);

    // compression onto C^1 + W
    let mut idx: Vec<usize> = (n0..n0 + n1).collect();
    idx.extend(n0 + n1 + n2..n0 + n1 + n2 + w);
    let comp = Mat::from_fn(idx.len(), idx.len(), |r, c| total[(idx[r], idx[c])]);
    let expected_comp: Vec<f64> = rel.iter().chain(&util).copied().collect();
    let compressed_distance = linalg::spectrum_distance(&spec(&comp), &expected_comp);

    let mut expected_total = spec(&ch.l0.matrix);
    expected_total.extend(&rel);
    expected_total.extend(spec(&laplacian(sheaf, 2)?.matrix));
    expected_total.extend(&util);
    let total_distance = linalg::spectrum_distance(&spec(&total), &expected_total);
    let ok = |d: Option<f64>| d.is_some_and(|x| x < BLOCK_SPECTRUM_TOL);
    let holds = Some(ok(compressed_distance) && ok(total_distance));
    Ok(BlockDecompositionReport { coupling_norm, asserted: true, compressed_distance, total_distance, holds })
}
