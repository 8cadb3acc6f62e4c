//! Grounding morphisms into an ambient space `W`, target-sheaf
//! descriptions, and the incidence-level defect.

use serde::{Deserialize, Serialize};

use crate::complex::CliqueComplex;
use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::sheaf::{CellSheaf, Gauge};

/// How a grounding is stored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroundingMode {
    /// One map `eps_s : F(s) -> W` per cell.
    VertexLevel,
    /// A single map `eps : C^1(F) -> W`.
    CochainC1,
}

/// The sheaf `W` a grounding is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetSheaf {
    /// `W` on every cell with identity restrictions.
    Constant,
    /// The constant sheaf with an extra degree `-1` copy of `W` mapped
    /// diagonally into `C^0`. This is the target whose cone is realized by
    /// the geometric cone with its apex.
    AugmentedConstant,
    /// `W` in degree zero only, with vanishing differential.
    DegreeZero,
}

impl TargetSheaf {
    /// Dimension of `C^j(W)` for `j` in `-1..=3`.
    pub fn cochain_dim(self, complex: &CliqueComplex, w: usize, j: i32) -> usize {
        match (self, j) {
            (TargetSheaf::AugmentedConstant, -1) => w,
            (TargetSheaf::Constant | TargetSheaf::AugmentedConstant, 0..=2) => w * complex.cell_count(j as usize),
            (TargetSheaf::DegreeZero, 0) => w,
            _ => 0,
        }
    }

    /// `d_W^j : C^j(W) -> C^{j+1}(W)`.
    pub fn coboundary(self, complex: &CliqueComplex, w: usize, j: i32) -> Mat {
        let rows = self.cochain_dim(complex, w, j + 1);
        let cols = self.cochain_dim(complex, w, j);
        let mut d = Mat::zeros(rows, cols);
        if self == TargetSheaf::DegreeZero {
            return d;
        }
        let id = Mat::identity(w, w);
        match j {
            -1 if self == TargetSheaf::AugmentedConstant => {
                for v in 0..complex.cell_count(0) {
                    d.view_mut((v * w, 0), (w, w)).copy_from(&id);
                }
            }
            0 => {
                for e in 0..complex.cell_count(1) {
                    for &(v, s) in complex.edge_faces(e) {
                        d.view_mut((e * w, v * w), (w, w)).copy_from(&(&id * s));
                    }
                }
            }
            1 => {
                for t in 0..complex.cell_count(2) {
                    for &(e, s) in complex.triangle_faces(t) {
                        d.view_mut((t * w, e * w), (w, w)).copy_from(&(&id * s));
                    }
                }
            }
            _ => {}
        }
        d
    }
}

/// A family of linear maps from the stalks of a sheaf into `W`.
#[derive(Debug, Clone, PartialEq)]
pub enum GroundingMorphism {
    VertexLevel { target_dim: usize, maps: [Vec<Mat>; 3] },
    CochainC1 { target_dim: usize, map: Mat },
}

impl GroundingMorphism {
    /// Per-cell maps, checked against the sheaf's stalk dimensions.
    pub fn vertex_level(sheaf: &CellSheaf, target_dim: usize, maps: [Vec<Mat>; 3]) -> Result<Self> {
        for (d, cell_maps) in maps.iter().enumerate() {
            if cell_maps.len() != sheaf.complex().cell_count(d) {
                return Err(Error::DimensionMismatch { expected: sheaf.complex().cell_count(d), got: cell_maps.len() });
            }
            for (i, m) in cell_maps.iter().enumerate() {
                let want = (target_dim, sheaf.stalk_dim(d, i));
                if m.shape() != want {
                    return Err(Error::Shape(format!(
                        "grounding map on {d}-cell {i} has shape {:?}, expected {:?}",
                        m.shape(),
                        want
                    )));
                }
            }
        }
        Ok(GroundingMorphism::VertexLevel { target_dim, maps })
    }

    /// A single map on `C^1`.
    pub fn cochain_c1(sheaf: &CellSheaf, map: Mat) -> Result<Self> {
        if map.ncols() != sheaf.cochain_dim(1) {
            return Err(Error::DimensionMismatch { expected: sheaf.cochain_dim(1), got: map.ncols() });
        }
        Ok(GroundingMorphism::CochainC1 { target_dim: map.nrows(), map })
    }

    pub fn target_dim(&self) -> usize {
        match self {
            GroundingMorphism::VertexLevel { target_dim, .. } | GroundingMorphism::CochainC1 { target_dim, .. } => {
                *target_dim
            }
        }
    }

    pub fn mode(&self) -> GroundingMode {
        match self {
            GroundingMorphism::VertexLevel { .. } => GroundingMode::VertexLevel,
            GroundingMorphism::CochainC1 { .. } => GroundingMode::CochainC1,
        }
    }

    /// Per-cell maps; fails for cochain-level groundings.
    pub fn cell_maps(&self) -> Result<&[Vec<Mat>; 3]> {
        match self {
            GroundingMorphism::VertexLevel { maps, .. } => Ok(maps),
            GroundingMorphism::CochainC1 { .. } => {
                Err(Error::ModeMismatch("operation needs a vertex-level grounding".into()))
            }
        }
    }

    /// The map `C^1(F) -> W`: either stored directly or assembled from the
    /// per-edge maps as `[eps_e1 | eps_e2 | ...]`.
    pub fn c1_matrix(&self) -> Mat {
        match self {
            GroundingMorphism::CochainC1 { map, .. } => map.clone(),
            GroundingMorphism::VertexLevel { target_dim, maps } => linalg::hstack(*target_dim, &maps[1]),
        }
    }

    /// Converts to cochain-level mode on `C^1`.
    pub fn to_cochain_c1(&self) -> GroundingMorphism {
        GroundingMorphism::CochainC1 { target_dim: self.target_dim(), map: self.c1_matrix() }
    }

    /// Zero padding: `W = R^{D_max}` and every map embeds the stalk basis.
    pub fn from_padding(sheaf: &CellSheaf, mode: GroundingMode) -> Self {
        let w = sheaf.max_ambient_dim();
        let pad = |b: &Mat| {
            let mut out = Mat::zeros(w, b.ncols());
            out.view_mut((0, 0), b.shape()).copy_from(b);
            out
        };
        let maps = [0, 1, 2].map(|d| sheaf.stalks(d).iter().map(|s| pad(s.basis())).collect());
        let g = GroundingMorphism::VertexLevel { target_dim: w, maps };
        match mode {
            GroundingMode::VertexLevel => g,
            GroundingMode::CochainC1 => g.to_cochain_c1(),
        }
    }

    /// The zero morphism into `R^target_dim`.
    pub fn zero(sheaf: &CellSheaf, target_dim: usize, mode: GroundingMode) -> Self {
        match mode {
            GroundingMode::VertexLevel => {
                let maps = [0, 1, 2].map(|d| sheaf.stalks(d).iter().map(|s| Mat::zeros(target_dim, s.dim())).collect());
                GroundingMorphism::VertexLevel { target_dim, maps }
            }
            GroundingMode::CochainC1 => {
                GroundingMorphism::CochainC1 { target_dim, map: Mat::zeros(target_dim, sheaf.cochain_dim(1)) }
            }
        }
    }

    /// The same map `e` on every cell (stalks must all have dimension `e.ncols()`).
    pub fn uniform(sheaf: &CellSheaf, e: &Mat) -> Result<Self> {
        let maps = [0, 1, 2].map(|d| vec![e.clone(); sheaf.complex().cell_count(d)]);
        Self::vertex_level(sheaf, e.nrows(), maps)
    }

    /// `eps_s = e G_s^T`, a cochain map from the gauged constant sheaf into
    /// the constant sheaf `W`.
    pub fn gauge_compatible(sheaf: &CellSheaf, gauge: &Gauge, e: &Mat) -> Result<Self> {
        let maps = [0, 1, 2].map(|d| gauge.cells[d].iter().map(|g| e * g.transpose()).collect());
        Self::vertex_level(sheaf, e.nrows(), maps)
    }

    /// `eps = I` on `C^1`.
    pub fn full_rank_c1(sheaf: &CellSheaf) -> Self {
        let m = sheaf.cochain_dim(1);
        GroundingMorphism::CochainC1 { target_dim: m, map: Mat::identity(m, m) }
    }

    /// `eps = I - H H^T` on `C^1`, where `H` spans the harmonic 1-cochains.
    /// Every harmonic 1-cochain is annihilated and the complement is kept.
    pub fn deficient_c1(sheaf: &CellSheaf) -> Self {
        let m = sheaf.cochain_dim(1);
        let h = linalg::joint_null_space(
            &super::coboundary_matrix(sheaf, 1),
            &super::coboundary_matrix(sheaf, 0).transpose(),
            linalg::RANK_TOL,
        );
        let map = Mat::identity(m, m) - linalg::projector(&h);
        GroundingMorphism::CochainC1 { target_dim: m, map }
    }

    /// `eps^j : C^j(F) -> C^j(W)` for the given target description.
    pub fn cochain_map(&self, sheaf: &CellSheaf, target: TargetSheaf, j: i32) -> Result<Mat> {
        let maps = self.cell_maps()?;
        let w = self.target_dim();
        let cx = sheaf.complex();
        let f_dim = if (0..=2).contains(&j) { sheaf.cochain_dim(j as usize) } else { 0 };
        let w_dim = target.cochain_dim(cx, w, j);
        Ok(match (target, j) {
            (TargetSheaf::Constant | TargetSheaf::AugmentedConstant, 0..=2) => linalg::block_diag(&maps[j as usize]),
            (TargetSheaf::DegreeZero, 0) => linalg::hstack(w, &maps[0]),
            _ => Mat::zeros(w_dim, f_dim),
        })
    }
}

/// Defect of one incidence `face -> coface`.
#[derive(Debug, Clone, PartialEq)]
pub struct DefectEntry {
    pub face_dim: usize,
    pub face: usize,
    pub coface: usize,
    pub matrix: Mat,
}

/// Per-incidence failure of the grounding to commute with coboundaries.
#[derive(Debug, Clone, PartialEq)]
pub struct IncidenceDefect {
    pub entries: Vec<DefectEntry>,
    pub total_norm: f64,
}

impl IncidenceDefect {
    pub fn max_entry(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, e| m.max(linalg::max_abs(&e.matrix)))
    }
}

/// `Delta_{s->t} = [t:s] eps_t rho_{s->t} - d_W(t, s) eps_s`, where the
/// target block `d_W(t, s)` is `[t:s] I` for the constant targets and zero
/// for the degree-zero target.
pub fn incidence_defect(sheaf: &CellSheaf, g: &GroundingMorphism, target: TargetSheaf) -> Result<IncidenceDefect> {
    let maps = g.cell_maps()?;
    let cx = sheaf.complex();
    let constant = target != TargetSheaf::DegreeZero;
    let mut entries = Vec::new();
    let mut push = |face_dim: usize, face: usize, coface: usize, sign: f64, rho: &Mat| {
        let upper = &maps[face_dim + 1][coface] * rho * sign;
        let matrix = if constant { upper - &maps[face_dim][face] * sign } else { upper };
        entries.push(DefectEntry { face_dim, face, coface, matrix });
    };
    for e in 0..cx.cell_count(1) {
        for (slot, &(v, s)) in cx.edge_faces(e).iter().enumerate() {
            push(0, v, e, s, sheaf.edge_restriction(e, slot));
        }
    }
    for t in 0..cx.cell_count(2) {
        for (slot, &(e, s)) in cx.triangle_faces(t).iter().enumerate() {
            push(1, e, t, s, sheaf.triangle_restriction(t, slot));
        }
    }
    let total_norm = entries.iter().map(|e| linalg::frobenius(&e.matrix).powi(2)).sum::<f64>().sqrt();
    Ok(IncidenceDefect { entries, total_norm })
}

/// Tolerance below which a defect counts as zero.
pub(crate) fn defect_tolerance(g: &GroundingMorphism) -> f64 {
    let scale = match g {
        GroundingMorphism::VertexLevel { maps, .. } => {
            maps.iter().flatten().fold(0.0f64, |m, x| m.max(linalg::max_abs(x)))
        }
        GroundingMorphism::CochainC1 { map, .. } => linalg::max_abs(map),
    };
    1e-9 * scale.max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::Graph;
    use crate::operators::coboundary_matrix;
    use crate::sheaf;

    #[test]
    fn uniform_grounding_of_constant_sheaf_is_compatible() {
        let cx = CliqueComplex::from_graph(&Graph::complete(4).unwrap());
        let s = CellSheaf::constant(cx, 2);
        let e = Mat::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.5, 0.5]);
        let g = GroundingMorphism::uniform(&s, &e).unwrap();
        assert_eq!(incidence_defect(&s, &g, TargetSheaf::Constant).unwrap().total_norm, 0.0);
    }

    #[test]
    fn non_constant_scalar_grounding_has_defect() {
        let cx = CliqueComplex::from_graph(&Graph::new(2, &[(0, 1)]).unwrap());
        let s = CellSheaf::constant(cx, 1);
        let one = Mat::from_element(1, 1, 1.0);
        let maps = [vec![one.clone(), Mat::from_element(1, 1, 2.0)], vec![one], vec![]];
        let g = GroundingMorphism::vertex_level(&s, 1, maps).unwrap();
        assert!(incidence_defect(&s, &g, TargetSheaf::DegreeZero).unwrap().total_norm > 0.0);
        assert!(incidence_defect(&s, &g, TargetSheaf::Constant).unwrap().total_norm > 0.0);
    }

    #[test]
    fn defect_matches_assembled_commutator() {
        let cx = CliqueComplex::from_graph(&Graph::complete(4).unwrap());
        let gauge = Gauge::random(&cx, 2, 9);
        let s = gauge.apply(cx.clone(), 2).unwrap();
        // a random (incompatible) grounding from another gauge
        let other = Gauge::random(&cx, 2, 10);
        let e = Mat::from_row_slice(3, 2, &[1.0, 2.0, -1.0, 0.5, 0.0, 1.0]);
        let g = GroundingMorphism::gauge_compatible(&s, &other, &e).unwrap();
        for target in [TargetSheaf::Constant, TargetSheaf::DegreeZero] {
            let def = incidence_defect(&s, &g, target).unwrap();
            for j in 0..2 {
                let maps = g.cell_maps().unwrap();
                // oracle: E^{j+1} d_F - D_W E^j with D_W the kron of incidences
                let upper = linalg::block_diag(&maps[j + 1]);
                let lower = linalg::block_diag(&maps[j]);
                let dw = if target == TargetSheaf::Constant {
                    TargetSheaf::Constant.coboundary(&cx, 3, j as i32)
                } else {
                    Mat::zeros(upper.nrows(), lower.nrows())
                };
                let full = upper * coboundary_matrix(&s, j as i32) - dw * lower;
                for entry in def.entries.iter().filter(|x| x.face_dim == j) {
                    let block = full.view((entry.coface * 3, entry.face * 2), (3, 2)).clone_owned();
                    assert!(linalg::max_abs(&(block - &entry.matrix)) < 1e-12);
                }
            }
        }
        let compatible = GroundingMorphism::gauge_compatible(&s, &gauge, &e).unwrap();
        assert!(incidence_defect(&s, &compatible, TargetSheaf::Constant).unwrap().total_norm < 1e-12);
    }

    #[test]
    fn padding_grounding() {
        let g = Graph::new(2, &[(0, 1)]).unwrap();
        let feats = vec![
            Mat::from_row_slice(3, 1, &[1.0, 0.0, 0.0]),
            Mat::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]),
        ];
        let s = sheaf::build_sheaf_from_features(&g, &feats, &Default::default()).unwrap();
        let gr = GroundingMorphism::from_padding(&s, GroundingMode::VertexLevel);
        let maps = gr.cell_maps().unwrap();
        assert_eq!(gr.target_dim(), 3);
        assert_eq!(maps[0][0].shape(), (3, 1));
        assert!((maps[0][0].norm() - 1.0).abs() < 1e-12);
        // oracle: rank of each padded map equals its stalk dimension
        for (d, cell_maps) in maps.iter().enumerate() {
            for (i, m) in cell_maps.iter().enumerate() {
                assert_eq!(linalg::numerical_rank(m, linalg::RANK_TOL), s.stalk_dim(d, i));
            }
        }
        let c1 = GroundingMorphism::from_padding(&s, GroundingMode::CochainC1);
        assert_eq!(c1.mode(), GroundingMode::CochainC1);
        assert!(c1.cell_maps().is_err());
    }

    #[test]
    fn deficient_grounding_kills_harmonic_cochain() {
        let s = sheaf::trivial_bundle(10, 1).unwrap();
        let g = GroundingMorphism::deficient_c1(&s);
        let m = g.c1_matrix();
        assert_eq!(linalg::numerical_rank(&m, linalg::RANK_TOL), 9);
        // the harmonic 1-cochain circulates once: -1 on the closing edge (0, 9)
        let mut h = crate::linalg::Vector::from_element(10, 1.0);
        h[s.complex().edge_index(0, 9).unwrap()] = -1.0;
        assert!((coboundary_matrix(&s, 0).transpose() * &h).norm() < 1e-12);
        assert!((m * h).norm() < 1e-12);
    }

    #[test]
    fn augmented_target_is_a_complex() {
        let cx = CliqueComplex::from_graph(&Graph::complete(4).unwrap());
        for j in -1..1 {
            let a = TargetSheaf::AugmentedConstant.coboundary(&cx, 2, j);
            let b = TargetSheaf::AugmentedConstant.coboundary(&cx, 2, j + 1);
            assert_eq!(linalg::max_abs(&(b * a)), 0.0);
        }
    }
}
