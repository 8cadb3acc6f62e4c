//! Cellular sheaves on clique complexes.
//!
//! A sheaf stores one orthonormal stalk basis per cell and one restriction
//! matrix per codimension-1 incidence. Restrictions are indexed by the face
//! slot of the incidence as reported by [`CliqueComplex::edge_faces`] and
//! [`CliqueComplex::triangle_faces`], so coboundary assembly never has to
//! search.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::complex::{CliqueComplex, Graph};
use crate::error::{Error, Result};
use crate::linalg::{self, Mat};

/// Tolerance used when checking that a basis or twist is orthogonal.
const ORTHO_TOL: f64 = 1e-10;

/// A stalk, represented by an orthonormal basis in some ambient space.
#[derive(Debug, Clone, PartialEq)]
pub struct Stalk {
    basis: Mat,
}

impl Stalk {
    pub fn new(basis: Mat) -> Result<Self> {
        if basis.ncols() > basis.nrows() {
            return Err(Error::Shape(format!(
                "stalk basis has {} columns in ambient dimension {}",
                basis.ncols(),
                basis.nrows()
            )));
        }
        let defect = linalg::orthonormality_defect(&basis);
        if defect > ORTHO_TOL {
            return Err(Error::Shape(format!("stalk basis is not orthonormal (defect {defect:e})")));
        }
        Ok(Stalk { basis })
    }

    /// The standard basis of `R^dim`.
    pub fn standard(dim: usize) -> Self {
        Stalk { basis: Mat::identity(dim, dim) }
    }

    pub fn basis(&self) -> &Mat {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn projector(&self) -> Mat {
        linalg::projector(&self.basis)
    }
}

/// Tolerances of the feature-to-sheaf pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeaturePipelineConfig {
    /// Relative singular-value cutoff for node stalks.
    pub svd_tol: f64,
    /// Minimum singular value of `Bu^T Bv` for a shared edge direction.
    pub edge_align_tol: f64,
    /// Minimum (exponentiated) eigenvalue of the triangle alignment operator.
    pub tri_eig_tol: f64,
    pub tri_exponent: f64,
}

impl Default for FeaturePipelineConfig {
    fn default() -> Self {
        FeaturePipelineConfig { svd_tol: 1e-8, edge_align_tol: 0.9, tri_eig_tol: 0.5, tri_exponent: 1.0 }
    }
}

impl FeaturePipelineConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in
            [("svd_tol", self.svd_tol), ("edge_align_tol", self.edge_align_tol), ("tri_eig_tol", self.tri_eig_tol)]
        {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::InvalidConfig(format!("{name} must lie in (0, 1], got {v}")));
            }
        }
        if !(self.tri_exponent > 0.0 && self.tri_exponent.is_finite()) {
            return Err(Error::InvalidConfig(format!("tri_exponent must be positive, got {}", self.tri_exponent)));
        }
        Ok(())
    }
}

/// A cellular sheaf on a 2-truncated clique complex.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSheaf {
    complex: CliqueComplex,
    stalks: [Vec<Stalk>; 3],
    edge_restrictions: Vec<[Mat; 2]>,
    tri_restrictions: Vec<[Mat; 3]>,
}

impl CellSheaf {
    /// Assembles a sheaf, checking every restriction shape.
    ///
    /// `edge_restrictions[e][s]` maps the stalk of face slot `s` of edge `e`
    /// into the edge stalk; likewise for triangles.
    pub fn new(
        complex: CliqueComplex,
        stalks: [Vec<Stalk>; 3],
        edge_restrictions: Vec<[Mat; 2]>,
        tri_restrictions: Vec<[Mat; 3]>,
    ) -> Result<Self> {
        for (d, cells) in stalks.iter().enumerate() {
            if cells.len() != complex.cell_count(d) {
                return Err(Error::DimensionMismatch { expected: complex.cell_count(d), got: cells.len() });
            }
        }
        if edge_restrictions.len() != complex.cell_count(1) {
            return Err(Error::DimensionMismatch { expected: complex.cell_count(1), got: edge_restrictions.len() });
        }
        if tri_restrictions.len() != complex.cell_count(2) {
            return Err(Error::DimensionMismatch { expected: complex.cell_count(2), got: tri_restrictions.len() });
        }
        let sheaf = CellSheaf { complex, stalks, edge_restrictions, tri_restrictions };
        for e in 0..sheaf.complex.cell_count(1) {
            for s in 0..2 {
                sheaf.check_shape(1, e, s, &sheaf.edge_restrictions[e][s])?;
            }
        }
        for t in 0..sheaf.complex.cell_count(2) {
            for s in 0..3 {
                sheaf.check_shape(2, t, s, &sheaf.tri_restrictions[t][s])?;
            }
        }
        Ok(sheaf)
    }

    fn face_of(&self, dim: usize, cell: usize, slot: usize) -> usize {
        if dim == 1 {
            self.complex.edge_faces(cell)[slot].0
        } else {
            self.complex.triangle_faces(cell)[slot].0
        }
    }

    fn check_shape(&self, dim: usize, cell: usize, slot: usize, m: &Mat) -> Result<()> {
        let face = self.face_of(dim, cell, slot);
        let want = (self.stalks[dim][cell].dim(), self.stalks[dim - 1][face].dim());
        if m.shape() != want {
            return Err(Error::Shape(format!(
                "restriction into {}-cell {cell} from face slot {slot} has shape {:?}, expected {:?}",
                dim,
                m.shape(),
                want
            )));
        }
        Ok(())
    }

    /// The constant sheaf `R^dim` with identity restrictions.
    pub fn constant(complex: CliqueComplex, dim: usize) -> Self {
        let stalks = [0, 1, 2].map(|d| vec![Stalk::standard(dim); complex.cell_count(d)]);
        let id = Mat::identity(dim, dim);
        let edge_restrictions = vec![[id.clone(), id.clone()]; complex.cell_count(1)];
        let tri_restrictions = vec![[id.clone(), id.clone(), id]; complex.cell_count(2)];
        CellSheaf { complex, stalks, edge_restrictions, tri_restrictions }
    }

    pub fn complex(&self) -> &CliqueComplex {
        &self.complex
    }

    pub fn stalks(&self, dim: usize) -> &[Stalk] {
        &self.stalks[dim]
    }

    pub fn stalk(&self, dim: usize, cell: usize) -> &Stalk {
        &self.stalks[dim][cell]
    }

    pub fn stalk_dim(&self, dim: usize, cell: usize) -> usize {
        self.stalks[dim][cell].dim()
    }

    /// Restriction from face slot `slot` of edge `e` into the edge stalk.
    pub fn edge_restriction(&self, e: usize, slot: usize) -> &Mat {
        &self.edge_restrictions[e][slot]
    }

    pub fn triangle_restriction(&self, t: usize, slot: usize) -> &Mat {
        &self.tri_restrictions[t][slot]
    }

    pub fn set_edge_restriction(&mut self, e: usize, slot: usize, m: Mat) -> Result<()> {
        self.check_shape(1, e, slot, &m)?;
        self.edge_restrictions[e][slot] = m;
        Ok(())
    }

    pub fn set_triangle_restriction(&mut self, t: usize, slot: usize, m: Mat) -> Result<()> {
        self.check_shape(2, t, slot, &m)?;
        self.tri_restrictions[t][slot] = m;
        Ok(())
    }

    /// Restriction `v -> e`, if `v` is a vertex of `e`.
    pub fn vertex_to_edge(&self, v: usize, e: usize) -> Option<&Mat> {
        let slot = self.complex.edge_faces(e).iter().position(|&(f, _)| f == v)?;
        Some(&self.edge_restrictions[e][slot])
    }

    /// Restriction `e -> t`, if `e` is an edge of `t`.
    pub fn edge_to_triangle(&self, e: usize, t: usize) -> Option<&Mat> {
        let slot = self.complex.triangle_faces(t).iter().position(|&(f, _)| f == e)?;
        Some(&self.tri_restrictions[t][slot])
    }

    /// Total dimension of the cochain space `C^j`.
    pub fn cochain_dim(&self, j: usize) -> usize {
        if j > 2 {
            return 0;
        }
        self.stalks[j].iter().map(Stalk::dim).sum()
    }

    /// Offsets of each cell's block inside `C^j`; has one trailing entry
    /// equal to the total dimension.
    pub fn offsets(&self, j: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.stalks[j].len() + 1);
        let mut acc = 0;
        out.push(0);
        for s in &self.stalks[j] {
            acc += s.dim();
            out.push(acc);
        }
        out
    }

    /// Largest ambient dimension over all stalks.
    pub fn max_ambient_dim(&self) -> usize {
        self.stalks.iter().flatten().map(Stalk::ambient_dim).max().unwrap_or(0)
    }

    /// Largest stalk dimension over all cells.
    pub fn max_stalk_dim(&self) -> usize {
        self.stalks.iter().flatten().map(Stalk::dim).max().unwrap_or(0)
    }
}

/// Zero-pads rows of `m` up to `rows`.
fn pad_rows(m: &Mat, rows: usize) -> Mat {
    let mut out = Mat::zeros(rows, m.ncols());
    out.view_mut((0, 0), m.shape()).copy_from(m);
    out
}

/// Node stalks from feature matrices (one per vertex, rows = ambient).
/// Matrices with fewer rows are zero-padded to the largest row count.
pub fn node_stalks_from_features(features: &[Mat], cfg: &FeaturePipelineConfig) -> Result<Vec<Stalk>> {
    cfg.validate()?;
    for (v, f) in features.iter().enumerate() {
        if f.nrows() == 0 || f.ncols() == 0 {
            return Err(Error::EmptyFeatures(v));
        }
        if f.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteFeatures(v));
        }
    }
    let d_max = features.iter().map(Mat::nrows).max().unwrap_or(0);
    features
        .iter()
        .map(|f| {
            let (u, s, _) = linalg::svd_sorted(&pad_rows(f, d_max));
            let cut = cfg.svd_tol * s.first().copied().unwrap_or(0.0);
            let keep: Vec<usize> = (0..s.len()).filter(|&i| s[i] > cut).collect();
            Ok(Stalk { basis: linalg::select_columns(&u, &keep) })
        })
        .collect()
}

/// Intersects two node stalks. Returns the edge stalk together with the
/// restrictions from `bu` and from `bv`.
///
/// Each kept singular pair `(u_i, v_i, s_i)` of `Bu^T Bv` contributes the
/// normalized bisector `(Bu u_i + Bv v_i) / sqrt(2 + 2 s_i)`, which is
/// orthonormal across `i` and does not depend on argument order.
pub fn edge_stalk_intersection(bu: &Stalk, bv: &Stalk, cfg: &FeaturePipelineConfig) -> Result<(Stalk, Mat, Mat)> {
    if bu.ambient_dim() != bv.ambient_dim() {
        return Err(Error::AmbientMismatch(bu.ambient_dim(), bv.ambient_dim()));
    }
    let m = bu.basis().transpose() * bv.basis();
    let (uu, s, vv) = linalg::svd_sorted(&m);
    let keep: Vec<usize> = (0..s.len()).filter(|&i| s[i] > cfg.edge_align_tol).collect();
    let mut basis = Mat::zeros(bu.ambient_dim(), keep.len());
    for (j, &i) in keep.iter().enumerate() {
        let col = (bu.basis() * uu.column(i) + bv.basis() * vv.column(i)) / (2.0 + 2.0 * s[i]).sqrt();
        basis.set_column(j, &col);
    }
    let mut cols: Vec<Vec<f64>> = (0..basis.ncols()).map(|j| basis.column(j).iter().copied().collect()).collect();
    cols.iter_mut().for_each(|c| linalg::canonical_sign(c));
    for (j, c) in cols.into_iter().enumerate() {
        basis.set_column(j, &linalg::Vector::from_vec(c));
    }
    let ru = basis.transpose() * bu.basis();
    let rv = basis.transpose() * bv.basis();
    Ok((Stalk { basis }, ru, rv))
}

/// Soft intersection of three edge stalks through the alignment operator
/// `T = A^T A`, `A = P_uv P_vw P_uw`. Restrictions come back in argument order.
pub fn triangle_stalk_soft_intersection(
    b_uv: &Stalk,
    b_vw: &Stalk,
    b_uw: &Stalk,
    cfg: &FeaturePipelineConfig,
) -> Result<(Stalk, [Mat; 3])> {
    let d = b_uv.ambient_dim();
    for b in [b_vw, b_uw] {
        if b.ambient_dim() != d {
            return Err(Error::AmbientMismatch(d, b.ambient_dim()));
        }
    }
    let a = b_uv.projector() * b_vw.projector() * b_uw.projector();
    let t = a.transpose() * a;
    let (vals, vecs) = linalg::sym_eigen(&t);
    // Descending order so the dominant shared directions come first.
    let keep: Vec<usize> =
        (0..vals.len()).rev().filter(|&i| vals[i].max(0.0).powf(cfg.tri_exponent) > cfg.tri_eig_tol).collect();
    let basis = linalg::select_columns(&vecs, &keep);
    let r = [b_uv, b_vw, b_uw].map(|b| basis.transpose() * b.basis());
    Ok((Stalk { basis }, r))
}

/// Runs the full feature pipeline over the clique complex of `g`.
///
/// The returned sheaf is not guaranteed to be functorial for arbitrary
/// features; callers should inspect [`validate_sheaf`].
pub fn build_sheaf_from_features(g: &Graph, features: &[Mat], cfg: &FeaturePipelineConfig) -> Result<CellSheaf> {
    if features.len() < g.vertex_count() {
        return Err(Error::MissingFeatures(features.len()));
    }
    if features.len() > g.vertex_count() {
        return Err(Error::DimensionMismatch { expected: g.vertex_count(), got: features.len() });
    }
    let complex = CliqueComplex::from_graph(g);
    let vstalks = node_stalks_from_features(features, cfg)?;
    let edge_parts: Vec<(Stalk, [Mat; 2])> = complex
        .edges()
        .par_iter()
        .enumerate()
        .map(|(e, _)| {
            let [(a, _), (b, _)] = *complex.edge_faces(e);
            let (st, ra, rb) = edge_stalk_intersection(&vstalks[a], &vstalks[b], cfg)?;
            Ok((st, [ra, rb]))
        })
        .collect::<Result<_>>()?;
    let estalks: Vec<Stalk> = edge_parts.iter().map(|p| p.0.clone()).collect();
    let tri_parts: Vec<(Stalk, [Mat; 3])> = (0..complex.cell_count(2))
        .into_par_iter()
        .map(|t| {
            let f = complex.triangle_faces(t);
            triangle_stalk_soft_intersection(&estalks[f[0].0], &estalks[f[1].0], &estalks[f[2].0], cfg)
        })
        .collect::<Result<_>>()?;
    let (tstalks, tri_r): (Vec<_>, Vec<_>) = tri_parts.into_iter().unzip();
    let edge_r = edge_parts.into_iter().map(|p| p.1).collect();
    CellSheaf::new(complex, [vstalks, estalks, tstalks], edge_r, tri_r)
}

fn check_orthogonal(m: &Mat, dim: usize, u: usize, v: usize) -> Result<()> {
    if m.shape() != (dim, dim) || linalg::orthonormality_defect(m) > ORTHO_TOL {
        return Err(Error::NonOrthogonalTwist(u, v));
    }
    Ok(())
}

/// Rank-`stalk_dim` bundle on an arbitrary graph: restriction from the lower
/// endpoint of each edge is the identity, from the upper endpoint it is the
/// edge's twist (identity when absent). Graphs with triangles only accept
/// identity twists.
pub fn bundle_on_graph(g: &Graph, stalk_dim: usize, twists: &BTreeMap<(usize, usize), Mat>) -> Result<CellSheaf> {
    let complex = CliqueComplex::from_graph(g);
    let mut sheaf = CellSheaf::constant(complex, stalk_dim);
    for (&(a, b), m) in twists {
        let e = sheaf
            .complex
            .edge_index(a, b)
            .ok_or_else(|| Error::InvalidConfig(format!("twist on non-edge ({a}, {b})")))?;
        check_orthogonal(m, stalk_dim, a, b)?;
        if sheaf.complex.cell_count(2) > 0 && linalg::max_abs(&(m - Mat::identity(stalk_dim, stalk_dim))) > 0.0 {
            return Err(Error::InvalidConfig("non-identity twists need a triangle-free graph".into()));
        }
        // slot 0 is the upper endpoint
        sheaf.edge_restrictions[e][0] = m.clone();
    }
    Ok(sheaf)
}

/// Bundle on the `n`-cycle with the given per-edge twists.
pub fn make_line_bundle(n: usize, stalk_dim: usize, twists: &BTreeMap<(usize, usize), Mat>) -> Result<CellSheaf> {
    bundle_on_graph(&Graph::cycle(n)?, stalk_dim, twists)
}

/// Trivial rank-`stalk_dim` bundle on the `n`-cycle.
pub fn trivial_bundle(n: usize, stalk_dim: usize) -> Result<CellSheaf> {
    make_line_bundle(n, stalk_dim, &BTreeMap::new())
}

/// Möbius bundle: a single `-I` twist on the closing edge `(0, n-1)`.
pub fn mobius_bundle(n: usize, stalk_dim: usize) -> Result<CellSheaf> {
    let mut tw = BTreeMap::new();
    tw.insert((0, n - 1), -Mat::identity(stalk_dim, stalk_dim));
    make_line_bundle(n, stalk_dim, &tw)
}

/// Edge carrying the hidden twist on the prism of size `n`.
pub fn hidden_twist_edge(n: usize) -> (usize, usize) {
    (0, n)
}

/// Rank-2 bundle on the prism over the `n`-cycle with a single rotation by
/// `tau` on the rung `(0, n)`. On a bare cycle a single twist is gauge
/// equivalent to one spread over every edge, so the prism's extra cycles are
/// what make the defect locatable.
pub fn hidden_twist_bundle(n: usize, tau: f64) -> Result<CellSheaf> {
    let mut tw = BTreeMap::new();
    tw.insert(hidden_twist_edge(n), linalg::rotation2(tau));
    bundle_on_graph(&Graph::prism(n)?, 2, &tw)
}

/// Rank-2 trivial bundle on the prism with i.i.d. rotation noise on all edges.
pub fn noisy_trivial_bundle(n: usize, sigma: f64, seed: u64) -> Result<CellSheaf> {
    let base = bundle_on_graph(&Graph::prism(n)?, 2, &BTreeMap::new())?;
    add_restriction_noise(&base, sigma, seed)
}

/// Composes the upper-endpoint restriction of every edge with a rotation.
///
/// Angles are drawn from `N(0, sigma^2)` by a ChaCha8 stream seeded with
/// `seed`, one angle per rotation plane `(0,1), (2,3), ...` of the edge stalk,
/// edges visited in canonical order. One-dimensional stalks admit no small
/// rotation and are left unchanged.
pub fn add_restriction_noise(sheaf: &CellSheaf, sigma: f64, seed: u64) -> Result<CellSheaf> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidConfig(format!("sigma must be non-negative, got {sigma}")));
    }
    let mut out = sheaf.clone();
    if sigma == 0.0 {
        return Ok(out);
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for e in 0..out.complex.cell_count(1) {
        let d = out.stalk_dim(1, e);
        let mut rot = Mat::identity(d, d);
        for p in 0..d / 2 {
            let theta: f64 = normal.sample(&mut rng);
            rot.view_mut((2 * p, 2 * p), (2, 2)).copy_from(&linalg::rotation2(theta));
        }
        let noisy = &rot * &out.edge_restrictions[e][0];
        out.edge_restrictions[e][0] = noisy;
    }
    Ok(out)
}

/// Haar-distributed random orthogonal matrix.
pub fn random_orthogonal<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Mat {
    if dim == 0 {
        return Mat::zeros(0, 0);
    }
    let g = Mat::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..dim {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// A change of basis on every stalk of a constant sheaf.
#[derive(Debug, Clone, PartialEq)]
pub struct Gauge {
    pub cells: [Vec<Mat>; 3],
}

impl Gauge {
    /// Independent random orthogonal gauges of size `dim` for every cell.
    pub fn random(complex: &CliqueComplex, dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cells = [0, 1, 2].map(|d| (0..complex.cell_count(d)).map(|_| random_orthogonal(dim, &mut rng)).collect());
        Gauge { cells }
    }

    /// The constant sheaf rewritten in the gauge: `rho_{s->t} = G_t G_s^T`.
    /// It is isomorphic to the constant sheaf and therefore functorial.
    pub fn apply(&self, complex: CliqueComplex, dim: usize) -> Result<CellSheaf> {
        let mut sheaf = CellSheaf::constant(complex, dim);
        for e in 0..sheaf.complex.cell_count(1) {
            for s in 0..2 {
                let v = sheaf.complex.edge_faces(e)[s].0;
                sheaf.edge_restrictions[e][s] = &self.cells[1][e] * self.cells[0][v].transpose();
            }
        }
        for t in 0..sheaf.complex.cell_count(2) {
            for s in 0..3 {
                let e = sheaf.complex.triangle_faces(t)[s].0;
                sheaf.tri_restrictions[t][s] = &self.cells[2][t] * self.cells[1][e].transpose();
            }
        }
        Ok(sheaf)
    }
}

/// Features whose column spaces are spanned by random subsets of one fixed
/// orthonormal frame of `R^ambient`, mixed by random invertible coefficients.
/// Stalk overlaps are then exact subspaces, so the pipeline yields a
/// functorial sheaf.
pub fn frame_features(vertex_count: usize, ambient: usize, rank: usize, seed: u64) -> Vec<Mat> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let frame = random_orthogonal(ambient, &mut rng);
    let rank = rank.min(ambient);
    (0..vertex_count)
        .map(|_| {
            let mut idx: Vec<usize> = (0..ambient).collect();
            for i in 0..rank {
                let j = rng.random_range(i..ambient);
                idx.swap(i, j);
            }
            let mut chosen = idx[..rank].to_vec();
            chosen.sort();
            let span = linalg::select_columns(&frame, &chosen);
            let cols = rank + 1;
            let coeffs = Mat::from_fn(rank, cols, |_, _| rng.sample::<f64, _>(StandardNormal));
            span * coeffs
        })
        .collect()
}

/// A functoriality violation at vertex `vertex` of triangle `triangle`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctorialityViolation {
    pub triangle: usize,
    pub vertex: usize,
    pub defect: f64,
}

/// Two-path composite differences for every (triangle, vertex) pair.
pub fn functoriality_defects(sheaf: &CellSheaf) -> Vec<FunctorialityViolation> {
    let cx = sheaf.complex();
    let mut out = Vec::new();
    for (t, tri) in cx.triangles().iter().enumerate() {
        for &v in tri {
            let paths: Vec<Mat> = cx
                .triangle_faces(t)
                .iter()
                .filter(|&&(e, _)| cx.edges()[e].contains(&v))
                .map(|&(e, _)| {
                    let to_t = sheaf.edge_to_triangle(e, t).expect("face of triangle");
                    let to_e = sheaf.vertex_to_edge(v, e).expect("face of edge");
                    to_t * to_e
                })
                .collect();
            let defect = linalg::frobenius(&(&paths[0] - &paths[1]));
            out.push(FunctorialityViolation { triangle: t, vertex: v, defect });
        }
    }
    out
}

/// Functoriality violations above `tol`.
pub fn validate_sheaf(sheaf: &CellSheaf, tol: f64) -> Vec<FunctorialityViolation> {
    functoriality_defects(sheaf).into_iter().filter(|v| v.defect > tol).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> FeaturePipelineConfig {
        FeaturePipelineConfig::default()
    }

    #[test]
    fn node_stalk_ranks() {
        let f = Mat::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        assert_eq!(node_stalks_from_features(std::slice::from_ref(&f), &cfg()).unwrap()[0].dim(), 2);
        let dup = Mat::from_row_slice(3, 3, &[1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 1.0, 1.0]);
        assert_eq!(node_stalks_from_features(&[dup], &cfg()).unwrap()[0].dim(), 2);
        assert_eq!(node_stalks_from_features(&[Mat::zeros(0, 2)], &cfg()), Err(Error::EmptyFeatures(0)));
        let mut nan = f.clone();
        nan[(0, 0)] = f64::NAN;
        assert_eq!(node_stalks_from_features(&[f, nan], &cfg()), Err(Error::NonFiniteFeatures(1)));
    }

    #[test]
    fn features_are_padded() {
        let a = Mat::from_row_slice(2, 1, &[1.0, 0.0]);
        let b = Mat::from_row_slice(3, 1, &[0.0, 0.0, 1.0]);
        let st = node_stalks_from_features(&[a, b], &cfg()).unwrap();
        assert_eq!(st[0].ambient_dim(), 3);
        assert_eq!(st[0].basis()[(2, 0)], 0.0);
    }

    #[test]
    fn edge_intersection_of_planes() {
        let e = |i: usize| {
            let mut m = Mat::zeros(3, 1);
            m[(i, 0)] = 1.0;
            m
        };
        let same = Stalk::new(linalg::hstack(3, &[e(0), e(1)])).unwrap();
        assert_eq!(edge_stalk_intersection(&same, &same, &cfg()).unwrap().0.dim(), 2);
        let (st, _, _) =
            edge_stalk_intersection(&Stalk::new(e(0)).unwrap(), &Stalk::new(e(1)).unwrap(), &cfg()).unwrap();
        assert_eq!(st.dim(), 0);
        // xy-plane against a plane tilted by 60 degrees about the x axis
        let (c, s) = (0.5f64, 0.75f64.sqrt());
        let tilted = Stalk::new(Mat::from_row_slice(3, 2, &[1.0, 0.0, 0.0, c, 0.0, s])).unwrap();
        let (st, ru, rv) = edge_stalk_intersection(&same, &tilted, &cfg()).unwrap();
        assert_eq!(st.dim(), 1);
        // oracle: the line of intersection is the cross product of the normals
        let n1 = nalgebra::Vector3::new(0.0, 0.0, 1.0);
        let n2 = nalgebra::Vector3::new(0.0, -s, c);
        let line = n1.cross(&n2).normalize();
        let dot: f64 = (0..3).map(|i| line[i] * st.basis()[(i, 0)]).sum();
        assert!((dot.abs() - 1.0).abs() < 1e-12);
        assert_eq!(ru.shape(), (1, 2));
        assert_eq!(rv.shape(), (1, 2));
        let a = Stalk::new(Mat::from_row_slice(3, 2, &[0.8, 0.0, 0.6, 0.0, 0.0, 1.0])).unwrap();
        let (p, _, _) = edge_stalk_intersection(&a, &tilted, &cfg()).unwrap();
        let (q, _, _) = edge_stalk_intersection(&tilted, &a, &cfg()).unwrap();
        assert!(linalg::max_abs(&(p.projector() - q.projector())) < 1e-10);
    }

    #[test]
    fn triangle_intersections() {
        let plane = Stalk::new(Mat::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0])).unwrap();
        let (st, _) = triangle_stalk_soft_intersection(&plane, &plane, &plane, &cfg()).unwrap();
        assert!(linalg::max_abs(&(st.projector() - plane.projector())) < 1e-12);
        let axis = |i: usize| {
            let mut m = Mat::zeros(3, 1);
            m[(i, 0)] = 1.0;
            Stalk::new(m).unwrap()
        };
        let (st, _) = triangle_stalk_soft_intersection(&axis(0), &axis(1), &axis(2), &cfg()).unwrap();
        assert_eq!(st.dim(), 0);
        assert!(triangle_stalk_soft_intersection(&axis(0), &Stalk::standard(2), &axis(1), &cfg()).is_err());
    }

    #[test]
    fn triangle_planes_sharing_a_line() {
        let r2 = 0.5f64.sqrt();
        let p1 = Stalk::new(Mat::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0])).unwrap();
        let p2 = Stalk::new(Mat::from_row_slice(3, 2, &[1.0, 0.0, 0.0, r2, 0.0, r2])).unwrap();
        let p3 = Stalk::new(Mat::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0])).unwrap();
        let (st, r) = triangle_stalk_soft_intersection(&p1, &p2, &p3, &cfg()).unwrap();
        // oracle: eigen-decompose T built here, count eigenvalues above 0.5
        let a = p1.projector() * p2.projector() * p3.projector();
        let t = a.transpose() * &a;
        let eig = nalgebra::SymmetricEigen::new(t);
        let count = eig.eigenvalues.iter().filter(|&&l| l > 0.5).count();
        assert_eq!(st.dim(), count);
        assert_eq!(st.dim(), 1);
        assert_eq!(r[0].shape(), (1, 2));
    }

    #[test]
    fn constant_features_give_constant_sheaf() {
        let g = Graph::complete(3).unwrap();
        let f = Mat::from_row_slice(3, 2, &[1.0, 2.0, 0.0, 1.0, 0.0, 0.0]);
        let sheaf = build_sheaf_from_features(&g, &[f.clone(), f.clone(), f], &cfg()).unwrap();
        for d in 0..3 {
            assert!(sheaf.stalks(d).iter().all(|s| s.dim() == 2));
        }
        assert!(validate_sheaf(&sheaf, 1e-10).is_empty());
    }

    #[test]
    fn orthogonal_vertex_kills_edges() {
        let g = Graph::new(3, &[(0, 1), (1, 2)]).unwrap();
        let x = Mat::from_row_slice(2, 1, &[1.0, 0.0]);
        let y = Mat::from_row_slice(2, 1, &[0.0, 1.0]);
        let sheaf = build_sheaf_from_features(&g, &[x.clone(), y, x], &cfg()).unwrap();
        assert!(sheaf.stalks(1).iter().all(|s| s.dim() == 0));
    }

    #[test]
    fn frame_feature_sheaves_are_functorial() {
        for seed in 0..5 {
            let g = Graph::complete(5).unwrap();
            let f = frame_features(5, 6, 4, seed);
            let sheaf = build_sheaf_from_features(&g, &f, &cfg()).unwrap();
            let worst = functoriality_defects(&sheaf).iter().fold(0.0f64, |m, v| m.max(v.defect));
            assert!(worst < 1e-8, "seed {seed}: {worst}");
        }
    }

    #[test]
    fn validate_flags_perturbed_map() {
        let cx = CliqueComplex::from_graph(&Graph::complete(3).unwrap());
        let mut sheaf = CellSheaf::constant(cx, 1);
        assert!(validate_sheaf(&sheaf, 1e-12).is_empty());
        // slot 0 of the triangle is edge (1,2), which touches vertices 1 and 2
        sheaf.set_triangle_restriction(0, 0, Mat::from_element(1, 1, 1.5)).unwrap();
        let bad = validate_sheaf(&sheaf, 1e-12);
        let verts: Vec<usize> = bad.iter().map(|v| v.vertex).collect();
        assert_eq!(verts, vec![1, 2]);
        assert!(sheaf.set_triangle_restriction(0, 0, Mat::zeros(2, 1)).is_err());
    }

    #[test]
    fn twists_must_be_orthogonal() {
        let mut tw = BTreeMap::new();
        tw.insert((0, 9), Mat::from_element(1, 1, 2.0));
        assert_eq!(make_line_bundle(10, 1, &tw), Err(Error::NonOrthogonalTwist(0, 9)));
        assert!(matches!(make_line_bundle(2, 1, &BTreeMap::new()), Err(Error::TooSmall { .. })));
    }

    #[test]
    fn noise_is_seeded() {
        let base = bundle_on_graph(&Graph::prism(6).unwrap(), 2, &BTreeMap::new()).unwrap();
        assert_eq!(add_restriction_noise(&base, 0.0, 3).unwrap(), base);
        let a = add_restriction_noise(&base, 0.1, 3).unwrap();
        let b = add_restriction_noise(&base, 0.1, 3).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, add_restriction_noise(&base, 0.1, 4).unwrap());
    }

    #[test]
    fn gauge_sheaf_is_functorial() {
        let cx = CliqueComplex::from_graph(&Graph::complete(4).unwrap());
        let gauge = Gauge::random(&cx, 3, 11);
        let sheaf = gauge.apply(cx, 3).unwrap();
        assert!(validate_sheaf(&sheaf, 1e-12).is_empty());
    }
}
