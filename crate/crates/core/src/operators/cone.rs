//! Algebraic mapping cones of a grounding, the geometric cone sheaf, and
//! the homological checks relating them.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::grounding::{defect_tolerance, incidence_defect, GroundingMorphism, TargetSheaf};
use super::{coboundary_matrix, CheckStatus};
use crate::complex::CliqueComplex;
use crate::error::Result;
use crate::linalg::{self, Mat};
use crate::sheaf::{CellSheaf, Stalk};

/// Entry tolerance for the geometric/algebraic comparison.
pub const CONE_EQUIVALENCE_TOL: f64 = 1e-12;

/// Differentials of a mapping cone, keyed by degree.
#[derive(Debug, Clone, PartialEq)]
pub struct MappingCone {
    pub translated: bool,
    pub target: TargetSheaf,
    /// `dims[n] = dim Cone^n`.
    pub dims: BTreeMap<i32, usize>,
    /// `differentials[n] : Cone^n -> Cone^{n+1}`.
    pub differentials: BTreeMap<i32, Mat>,
    /// Largest entry of any `d^{n+1} d^n`.
    pub square_residual: f64,
    /// False when the grounding is not a cochain map, in which case the
    /// differentials need not square to zero.
    pub is_complex: bool,
}

impl MappingCone {
    pub fn differential(&self, n: i32) -> Mat {
        self.differentials.get(&n).cloned().unwrap_or_else(|| {
            let rows = self.dims.get(&(n + 1)).copied().unwrap_or(0);
            let cols = self.dims.get(&n).copied().unwrap_or(0);
            Mat::zeros(rows, cols)
        })
    }

    /// Betti number of the cone in degree `n` by rank-nullity.
    pub fn betti(&self, n: i32) -> usize {
        let dim = self.dims.get(&n).copied().unwrap_or(0);
        let r = |m: &Mat| linalg::numerical_rank(m, linalg::RANK_TOL);
        dim - r(&self.differential(n)) - r(&self.differential(n - 1))
    }

    /// Harmonic representatives of the cone cohomology in degree `n`.
    pub fn harmonic(&self, n: i32) -> Mat {
        linalg::joint_null_space(&self.differential(n), &self.differential(n - 1).transpose(), linalg::RANK_TOL)
    }

    /// Hodge Laplacian of the cone in degree `n`.
    pub fn laplacian(&self, n: i32) -> Mat {
        super::hodge_laplacian(&self.differential(n - 1), &self.differential(n))
    }
}

fn f_dim(sheaf: &CellSheaf, j: i32) -> usize {
    if (0..=2).contains(&j) {
        sheaf.cochain_dim(j as usize)
    } else {
        0
    }
}

fn finish(
    translated: bool,
    target: TargetSheaf,
    dims: BTreeMap<i32, usize>,
    differentials: BTreeMap<i32, Mat>,
) -> MappingCone {
    let scale = differentials.values().fold(0.0f64, |m, d| m.max(linalg::max_abs(d))).max(1.0);
    let mut square_residual = 0.0f64;
    for (n, d) in &differentials {
        if let Some(next) = differentials.get(&(n + 1)) {
            square_residual = square_residual.max(linalg::max_abs(&(next * d)));
        }
    }
    let is_complex = square_residual <= 1e-10 * scale * scale;
    MappingCone { translated, target, dims, differentials, square_residual, is_complex }
}

/// `Cone^n = C^{n+1}(F) + C^n(W)` with `d(a, b) = (-d_F a, -eps a + d_W b)`,
/// for `n` in `-1..=2`.
pub fn algebraic_cone(sheaf: &CellSheaf, g: &GroundingMorphism, target: TargetSheaf) -> Result<MappingCone> {
    let cx = sheaf.complex();
    let w = g.target_dim();
    let mut dims = BTreeMap::new();
    let mut diffs = BTreeMap::new();
    for n in -2..=3 {
        dims.insert(n, f_dim(sheaf, n + 1) + target.cochain_dim(cx, w, n));
    }
    for n in -1..=2 {
        let df = coboundary_matrix(sheaf, n + 1);
        let eps = g.cochain_map(sheaf, target, n + 1)?;
        let dw = target.coboundary(cx, w, n);
        let zero = Mat::zeros(df.nrows(), dw.ncols());
        diffs.insert(n, linalg::block2(&(-df), &zero, &(-eps), &dw));
    }
    Ok(finish(false, target, dims, diffs))
}

/// `Cone[1]^n = C^n(F) + C^{n-1}(W)` with `d(x, y) = (d_F x, eps x - d_W y)`,
/// for `n` in `0..=2`.
pub fn translated_cone(sheaf: &CellSheaf, g: &GroundingMorphism, target: TargetSheaf) -> Result<MappingCone> {
    let cx = sheaf.complex();
    let w = g.target_dim();
    let mut dims = BTreeMap::new();
    let mut diffs = BTreeMap::new();
    for n in -1..=4 {
        dims.insert(n, f_dim(sheaf, n) + target.cochain_dim(cx, w, n - 1));
    }
    for n in 0..=2 {
        let df = coboundary_matrix(sheaf, n);
        let eps = g.cochain_map(sheaf, target, n)?;
        let dw = target.coboundary(cx, w, n - 1);
        let zero = Mat::zeros(df.nrows(), dw.ncols());
        diffs.insert(n, linalg::block2(&df, &zero, &eps, &(-dw)));
    }
    Ok(finish(true, target, dims, diffs))
}

/// Which translated-cone summand a cell of the geometric cone belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ConeCell {
    /// A base cell of the same dimension.
    Base(usize),
    /// The cone over a base cell one dimension lower; the apex is the cone
    /// over the empty cell and carries index 0.
    Over(usize),
}

fn classify(cone: &CliqueComplex, base: &CliqueComplex, dim: usize, idx: usize) -> ConeCell {
    let apex = cone.apex().expect("coned complex");
    match dim {
        0 if idx == apex => ConeCell::Over(0),
        0 => ConeCell::Base(idx),
        1 => {
            let [a, b] = cone.edges()[idx];
            if b == apex {
                ConeCell::Over(a)
            } else {
                ConeCell::Base(base.edge_index(a, b).expect("base edge"))
            }
        }
        _ => {
            let [a, b, c] = cone.triangles()[idx];
            if c == apex {
                ConeCell::Over(base.edge_index(a, b).expect("base edge"))
            } else {
                ConeCell::Base(base.triangle_index([a, b, c]).expect("base triangle"))
            }
        }
    }
}

/// Sheaf on the geometric cone: base stalks and restrictions are kept, the
/// apex and every cone cell carry `W`, a cone cell `*s` receives `eps_s`
/// from `s` and the identity from other cone cells.
pub fn geometric_cone_sheaf(sheaf: &CellSheaf, g: &GroundingMorphism) -> Result<CellSheaf> {
    let maps = g.cell_maps()?;
    let w = g.target_dim();
    let base = sheaf.complex();
    let cone = base.cone()?;
    let id = Mat::identity(w, w);
    let stalks = [0, 1, 2].map(|d| {
        (0..cone.cell_count(d))
            .map(|i| match classify(&cone, base, d, i) {
                ConeCell::Base(b) => sheaf.stalk(d, b).clone(),
                ConeCell::Over(_) => Stalk::standard(w),
            })
            .collect::<Vec<_>>()
    });
    let mut edge_r = Vec::with_capacity(cone.cell_count(1));
    for e in 0..cone.cell_count(1) {
        let faces = cone.edge_faces(e);
        let r = match classify(&cone, base, 1, e) {
            ConeCell::Base(be) => faces.map(|(v, _)| sheaf.vertex_to_edge(v, be).expect("incident").clone()),
            ConeCell::Over(v) => faces.map(|(f, _)| if f == v { maps[0][v].clone() } else { id.clone() }),
        };
        edge_r.push(r);
    }
    let mut tri_r = Vec::with_capacity(cone.cell_count(2));
    for t in 0..cone.cell_count(2) {
        let faces = cone.triangle_faces(t);
        let r = match classify(&cone, base, 2, t) {
            ConeCell::Base(bt) => faces.map(|(e, _)| match classify(&cone, base, 1, e) {
                ConeCell::Base(be) => sheaf.edge_to_triangle(be, bt).expect("incident").clone(),
                ConeCell::Over(_) => unreachable!("base triangles have only base edges"),
            }),
            ConeCell::Over(be) => faces.map(|(e, _)| match classify(&cone, base, 1, e) {
                ConeCell::Base(f) if f == be => maps[1][be].clone(),
                _ => id.clone(),
            }),
        };
        tri_r.push(r);
    }
    CellSheaf::new(cone, stalks, edge_r, tri_r)
}

/// Result of comparing the geometric cone with the translated cone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeEquivalenceReport {
    pub status: CheckStatus,
    pub defect_norm: f64,
    /// Largest entrywise difference per degree, when computed.
    pub residuals: Vec<f64>,
    pub max_residual: Option<f64>,
}

/// Position of every geometric-cone cochain coordinate inside
/// `C^j(F) + C^{j-1}(W)`.
fn coordinate_map(cone_sheaf: &CellSheaf, sheaf: &CellSheaf, w: usize, j: usize) -> Vec<usize> {
    let cone = cone_sheaf.complex();
    let base = sheaf.complex();
    let f_off = sheaf.offsets(j);
    let f_total = sheaf.cochain_dim(j);
    let mut out = Vec::with_capacity(cone_sheaf.cochain_dim(j));
    for i in 0..cone.cell_count(j) {
        match classify(cone, base, j, i) {
            ConeCell::Base(b) => out.extend(f_off[b]..f_off[b + 1]),
            ConeCell::Over(b) => out.extend(f_total + b * w..f_total + (b + 1) * w),
        }
    }
    out
}

/// Compares geometric-cone coboundaries with the translated algebraic cone
/// over the augmented constant target, entry by entry, in degrees 0 and 1.
pub fn verify_cone_equivalence(sheaf: &CellSheaf, g: &GroundingMorphism) -> Result<ConeEquivalenceReport> {
    let defect = incidence_defect(sheaf, g, TargetSheaf::Constant)?;
    if defect.total_norm > defect_tolerance(g) {
        return Ok(ConeEquivalenceReport {
            status: CheckStatus::HypothesisNotMet,
            defect_norm: defect.total_norm,
            residuals: Vec::new(),
            max_residual: None,
        });
    }
    let w = g.target_dim();
    let cone_sheaf = geometric_cone_sheaf(sheaf, g)?;
    let algebraic = translated_cone(sheaf, g, TargetSheaf::AugmentedConstant)?;
    let mut residuals = Vec::new();
    for j in 0..2 {
        let geo = coboundary_matrix(&cone_sheaf, j as i32);
        let alg = algebraic.differential(j as i32);
        let rows = coordinate_map(&cone_sheaf, sheaf, w, j + 1);
        let cols = coordinate_map(&cone_sheaf, sheaf, w, j);
        let mut permuted = Mat::zeros(alg.nrows(), alg.ncols());
        if permuted.shape() != geo.shape() {
            residuals.push(f64::INFINITY);
            continue;
        }
        for r in 0..geo.nrows() {
            for c in 0..geo.ncols() {
                permuted[(rows[r], cols[c])] = geo[(r, c)];
            }
        }
        residuals.push(linalg::max_abs(&(permuted - alg)));
    }
    let max_residual = residuals.iter().cloned().fold(0.0, f64::max);
    let status = if max_residual < CONE_EQUIVALENCE_TOL { CheckStatus::Pass } else { CheckStatus::Fail };
    Ok(ConeEquivalenceReport { status, defect_norm: defect.total_norm, residuals, max_residual: Some(max_residual) })
}

/// One node of the long exact sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LesNode {
    pub label: String,
    pub dim: usize,
    pub rank_in: usize,
    pub rank_out: usize,
    /// Largest entry of the composite of the two maps through this node.
    pub composite_residual: f64,
    pub exact: bool,
}

/// Exactness of `... -> H^n(F) -> H^n(W) -> H^n(Cone) -> H^{n+1}(F) -> ...`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LesReport {
    pub status: CheckStatus,
    pub defect_norm: f64,
    pub nodes: Vec<LesNode>,
    pub betti_source: BTreeMap<i32, usize>,
    pub betti_target: BTreeMap<i32, usize>,
    pub betti_cone: BTreeMap<i32, usize>,
}

/// Verifies rank exactness of the long exact sequence of the cone, with
/// maps induced on harmonic representatives: `eps*`, `i(c) = (0, c)` and
/// `q(b, c) = -b`.
pub fn verify_long_exact_sequence(sheaf: &CellSheaf, g: &GroundingMorphism, target: TargetSheaf) -> Result<LesReport> {
    let defect = incidence_defect(sheaf, g, target)?;
    if defect.total_norm > defect_tolerance(g) {
        return Ok(LesReport {
            status: CheckStatus::HypothesisNotMet,
            defect_norm: defect.total_norm,
            nodes: Vec::new(),
            betti_source: BTreeMap::new(),
            betti_target: BTreeMap::new(),
            betti_cone: BTreeMap::new(),
        });
    }
    let cx = sheaf.complex();
    let w = g.target_dim();
    let cone = algebraic_cone(sheaf, g, target)?;
    let tol = linalg::RANK_TOL;
    let h_f = |j: i32| {
        let dim = f_dim(sheaf, j);
        if dim == 0 {
            return Mat::zeros(0, 0);
        }
        linalg::joint_null_space(&coboundary_matrix(sheaf, j), &coboundary_matrix(sheaf, j - 1).transpose(), tol)
    };
    let h_w = |j: i32| {
        let dim = target.cochain_dim(cx, w, j);
        if dim == 0 {
            return Mat::zeros(0, 0);
        }
        linalg::joint_null_space(&target.coboundary(cx, w, j), &target.coboundary(cx, w, j - 1).transpose(), tol)
    };
    let h_c = |n: i32| {
        if cone.dims.get(&n).copied().unwrap_or(0) == 0 {
            return Mat::zeros(0, 0);
        }
        cone.harmonic(n)
    };

    // (label, harmonic basis) per node, and induced matrices between them
    let mut labels = Vec::new();
    let mut bases: Vec<Mat> = Vec::new();
    let mut maps: Vec<Mat> = Vec::new();
    let mut betti_source = BTreeMap::new();
    let mut betti_target = BTreeMap::new();
    let mut betti_cone = BTreeMap::new();
    for n in -1..=2 {
        let (hf, hw, hc) = (h_f(n), h_w(n), h_c(n));
        betti_source.insert(n, hf.ncols());
        betti_target.insert(n, hw.ncols());
        betti_cone.insert(n, hc.ncols());
        if n > -1 {
            // q from the previous cone node into H^n(F)
            let prev_c = bases.last().expect("previous cone node");
            let fd = f_dim(sheaf, n);
            let cone_dim = cone.dims[&(n - 1)];
            let mut q = Mat::zeros(fd, cone_dim);
            q.view_mut((0, 0), (fd, fd)).copy_from(&(-Mat::identity(fd, fd)));
            maps.push(restrict(&hf, &q, prev_c));
        }
        let eps = g.cochain_map(sheaf, target, n)?;
        maps.push(restrict(&hw, &eps, &hf));
        let fd_next = f_dim(sheaf, n + 1);
        let wd = target.cochain_dim(cx, w, n);
        let mut inc = Mat::zeros(fd_next + wd, wd);
        inc.view_mut((fd_next, 0), (wd, wd)).copy_from(&Mat::identity(wd, wd));
        maps.push(restrict(&hc, &inc, &hw));
        labels.extend([format!("H^{n}(F)"), format!("H^{n}(W)"), format!("H^{n}(Cone)")]);
        bases.extend([hf, hw, hc]);
    }
    // trailing q into H^3(F) = 0
    let last = bases.last().expect("nodes").ncols();
    maps.push(Mat::zeros(0, last));
    // leading map from H^{-2}(Cone) = 0 into H^{-1}(F) = 0
    maps.insert(0, Mat::zeros(bases[0].ncols(), 0));

    let mut nodes = Vec::with_capacity(bases.len());
    for (k, basis) in bases.iter().enumerate() {
        let incoming = &maps[k];
        let outgoing = &maps[k + 1];
        let rank_in = linalg::numerical_rank(incoming, tol);
        let rank_out = linalg::numerical_rank(outgoing, tol);
        let composite_residual = linalg::max_abs(&(outgoing * incoming));
        let dim = basis.ncols();
        let exact = rank_in + rank_out == dim && composite_residual < 1e-8;
        nodes.push(LesNode { label: labels[k].clone(), dim, rank_in, rank_out, composite_residual, exact });
    }
    let status = if nodes.iter().all(|n| n.exact) { CheckStatus::Pass } else { CheckStatus::Fail };
    Ok(LesReport { status, defect_norm: defect.total_norm, nodes, betti_source, betti_target, betti_cone })
}

/// Matrix of `map` from span(`src`) to span(`dst`) in the given bases.
fn restrict(dst: &Mat, map: &Mat, src: &Mat) -> Mat {
    if dst.ncols() == 0 || src.ncols() == 0 {
        return Mat::zeros(dst.ncols(), src.ncols());
    }
    dst.transpose() * map * src
}
