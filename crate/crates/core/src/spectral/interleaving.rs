//! Interleaving of δ-harmonic filtrations and the cone reduction check.

use serde::{Deserialize, Serialize};

use super::{eigendecompose_matrix, Spectrum};
use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::operators::{coboundary_matrix, CheckStatus, Provenance};
use crate::sheaf::CellSheaf;

/// Residual below which a containment of subspaces counts as exact.
pub const CONTAINMENT_TOL: f64 = 1e-8;
/// Hypothesis residuals below this count as satisfied.
pub const HYPOTHESIS_TOL: f64 = 1e-8;
/// Slack allowed when comparing a measured shift with a bound.
pub const BOUND_SLACK: f64 = 1e-9;

/// What an interleaving compares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InterleavingMode {
    /// Subspace comparison when both operators act on the same space,
    /// dimension profiles otherwise.
    Auto,
    /// Containment of the δ-harmonic subspaces; needs a shared ambient space.
    Subspace,
    /// Dominance of the dimension profiles `dim H_delta`.
    Profile,
}

/// Smallest shift at which the two filtrations interleave.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterleavingResult {
    /// `None` when no finite shift works (profiles of different total
    /// dimension).
    pub eta: Option<f64>,
    pub mode: InterleavingMode,
    pub candidates: usize,
}

/// Eigenvalues with the numerical kernel flattened to zero.
fn effective(s: &Spectrum) -> Vec<f64> {
    (0..s.len()).map(|i| if s.is_zero(i) { 0.0 } else { s.values()[i] }).collect()
}

fn distinct(mut v: Vec<f64>) -> Vec<f64> {
    v.dedup();
    v
}

/// `H_delta(a) ⊆ H_{delta+eta}(b)` at every jump of `a`, checked either on
/// subspaces or on dimensions.
fn contained(a: &Spectrum, levels: &[(f64, Mat)], b: &Spectrum, eta: f64, subspace: bool) -> Result<bool> {
    for (level, qa) in levels {
        let cut = level + eta;
        let cut = cut + 4.0 * f64::EPSILON * cut.max(1.0);
        if subspace {
            let qb = b.harmonic_space(cut)?;
            let resid = qa - &qb * (qb.transpose() * qa);
            if linalg::spectral_norm(&resid) >= CONTAINMENT_TOL {
                return Ok(false);
            }
        } else if a.harmonic_dim(*level) > b.harmonic_dim(cut) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Minimal `eta` with `H_delta(a) ⊆ H_{delta+eta}(b)` and
/// `H_delta(b) ⊆ H_{delta+eta}(a)` for all `delta`.
///
/// Both filtrations only change at eigenvalues, so the minimum lies among
/// the pairwise differences of effective eigenvalues; the predicate is
/// monotone in `eta` and is searched by bisection over those candidates.
pub fn interleaving_shift(a: &Spectrum, b: &Spectrum, mode: InterleavingMode) -> Result<InterleavingResult> {
    let same_space = a.len() == b.len();
    let mode = match mode {
        InterleavingMode::Auto if same_space => InterleavingMode::Subspace,
        InterleavingMode::Auto => InterleavingMode::Profile,
        InterleavingMode::Subspace if !same_space => {
            return Err(Error::ModeMismatch(format!(
                "subspace interleaving needs a shared ambient space, got dimensions {} and {}",
                a.len(),
                b.len()
            )))
        }
        m => m,
    };
    let subspace = mode == InterleavingMode::Subspace;
    let (ea, eb) = (effective(a), effective(b));

    let mut candidates = vec![0.0];
    for x in &ea {
        for y in &eb {
            candidates.push((y - x).max(0.0));
            candidates.push((x - y).max(0.0));
        }
    }
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();

    let levels = |s: &Spectrum, e: &[f64]| -> Result<Vec<(f64, Mat)>> {
        distinct(e.to_vec())
            .into_iter()
            .map(|l| Ok((l, if subspace { s.harmonic_space(l)? } else { Mat::zeros(0, 0) })))
            .collect()
    };
    let (la, lb) = (levels(a, &ea)?, levels(b, &eb)?);
    let holds =
        |eta: f64| -> Result<bool> { Ok(contained(a, &la, b, eta, subspace)? && contained(b, &lb, a, eta, subspace)?) };

    let n = candidates.len();
    if !holds(candidates[n - 1])? {
        return Ok(InterleavingResult { eta: None, mode, candidates: n });
    }
    let (mut lo, mut hi) = (0usize, n - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if holds(candidates[mid])? {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(InterleavingResult { eta: Some(candidates[lo]), mode, candidates: n })
}

/// A grounded pair on formal square total operators: `d_f` on the source
/// total space, `d_w` on the target, and `eps` from source to target.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundedOperators {
    pub d_f: Mat,
    pub d_w: Mat,
    pub eps: Mat,
}

impl GroundedOperators {
    pub fn new(d_f: Mat, d_w: Mat, eps: Mat) -> Result<Self> {
        if !d_f.is_square() || !d_w.is_square() {
            return Err(Error::Shape("total differentials must be square".into()));
        }
        if eps.shape() != (d_w.nrows(), d_f.nrows()) {
            return Err(Error::Shape(format!(
                "grounding of shape {:?} between spaces of dimension {} and {}",
                eps.shape(),
                d_f.nrows(),
                d_w.nrows()
            )));
        }
        Ok(GroundedOperators { d_f, d_w, eps })
    }

    /// Total coboundary of a sheaf on `C^0 + C^1 + C^2` with a grounding
    /// `C^1 -> W` into a target whose differential vanishes.
    pub fn from_sheaf(sheaf: &CellSheaf, eps_c1: &Mat) -> Result<Self> {
        let n = [sheaf.cochain_dim(0), sheaf.cochain_dim(1), sheaf.cochain_dim(2)];
        if eps_c1.ncols() != n[1] {
            return Err(Error::DimensionMismatch { expected: n[1], got: eps_c1.ncols() });
        }
        let total = n[0] + n[1] + n[2];
        let mut d_f = Mat::zeros(total, total);
        d_f.view_mut((n[0], 0), (n[1], n[0])).copy_from(&coboundary_matrix(sheaf, 0));
        d_f.view_mut((n[0] + n[1], n[0]), (n[2], n[1])).copy_from(&coboundary_matrix(sheaf, 1));
        let w = eps_c1.nrows();
        let mut eps = Mat::zeros(w, total);
        eps.view_mut((0, n[0]), (w, n[1])).copy_from(eps_c1);
        GroundedOperators::new(d_f, Mat::zeros(w, w), eps)
    }

    pub fn laplacian_f(&self) -> Mat {
        hodge(&self.d_f)
    }

    pub fn laplacian_w(&self) -> Mat {
        hodge(&self.d_w)
    }

    /// Cone differential `[[-d_f, 0], [-eps, d_w]]`.
    pub fn cone_differential(&self) -> Mat {
        linalg::block2(&(-&self.d_f), &Mat::zeros(self.d_f.nrows(), self.d_w.ncols()), &(-&self.eps), &self.d_w)
    }

    pub fn cone_laplacian(&self) -> Mat {
        hodge(&self.cone_differential())
    }

    /// `||d_w^T eps - eps d_f^T||`.
    pub fn intertwining_residual(&self) -> f64 {
        linalg::spectral_norm(&(self.d_w.transpose() * &self.eps - &self.eps * self.d_f.transpose()))
    }

    /// Largest of `||[L_f, eps^T eps]||` and `||[L_w, eps eps^T]||`.
    pub fn commutator_residual(&self) -> f64 {
        let comm = |a: &Mat, b: &Mat| linalg::spectral_norm(&(a * b - b * a));
        let gf = self.eps.transpose() * &self.eps;
        let gw = &self.eps * self.eps.transpose();
        comm(&self.laplacian_f(), &gf).max(comm(&self.laplacian_w(), &gw))
    }
}

fn hodge(d: &Mat) -> Mat {
    let l = d * d.transpose() + d.transpose() * d;
    (&l + l.transpose()) * 0.5
}

fn spectrum(m: &Mat) -> Result<Spectrum> {
    eigendecompose_matrix(m, Provenance::AlgebraicCone)
}

/// Outcome of the cone reduction check for two grounded pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeReductionReport {
    pub status: CheckStatus,
    pub intertwining_residual: f64,
    pub commutator_residual: f64,
    /// Interleaving of the base filtrations (sources and targets).
    pub eta: Option<f64>,
    /// Largest gap between any eigenvalue of one Gramian and any of the other.
    pub v: Option<f64>,
    /// Interleaving of the Gramian filtrations.
    pub theta: Option<f64>,
    /// Measured interleaving of the two cone filtrations.
    pub eta_cone: Option<f64>,
    pub within_v_bound: Option<bool>,
    pub within_theta_bound: Option<bool>,
}

fn max_pair_gap(a: &[f64], b: &[f64]) -> f64 {
    let mut v: f64 = 0.0;
    for x in a {
        for y in b {
            v = v.max((x - y).abs());
        }
    }
    v
}

fn eta_of(a: &Mat, b: &Mat) -> Result<Option<f64>> {
    Ok(interleaving_shift(&spectrum(a)?, &spectrum(b)?, InterleavingMode::Auto)?.eta)
}

/// Checks the commuting hypotheses on both pairs and, when they hold,
/// compares the measured cone interleaving with `eta + v` and `eta + theta`.
pub fn verify_cone_reduction(a: &GroundedOperators, b: &GroundedOperators) -> Result<ConeReductionReport> {
    if a.d_f.shape() != b.d_f.shape() || a.d_w.shape() != b.d_w.shape() {
        return Err(Error::Shape("grounded pairs must live on the same spaces".into()));
    }
    let intertwining_residual = a.intertwining_residual().max(b.intertwining_residual());
    let commutator_residual = a.commutator_residual().max(b.commutator_residual());
    let mut report = ConeReductionReport {
        status: CheckStatus::HypothesisNotMet,
        intertwining_residual,
        commutator_residual,
        eta: None,
        v: None,
        theta: None,
        eta_cone: None,
        within_v_bound: None,
        within_theta_bound: None,
    };
    if intertwining_residual >= HYPOTHESIS_TOL || commutator_residual >= HYPOTHESIS_TOL {
        return Ok(report);
    }

    let eta_f = eta_of(&a.laplacian_f(), &b.laplacian_f())?;
    let eta_w = eta_of(&a.laplacian_w(), &b.laplacian_w())?;
    let eta = eta_f.zip(eta_w).map(|(x, y)| x.max(y));

    let (gfa, gfb) = (a.eps.transpose() * &a.eps, b.eps.transpose() * &b.eps);
    let (gwa, gwb) = (&a.eps * a.eps.transpose(), &b.eps * b.eps.transpose());
    let vals = |m: &Mat| Ok::<_, Error>(spectrum(m)?.values().to_vec());
    let v = max_pair_gap(&vals(&gfa)?, &vals(&gfb)?).max(max_pair_gap(&vals(&gwa)?, &vals(&gwb)?));
    let theta = eta_of(&gfa, &gfb)?.zip(eta_of(&gwa, &gwb)?).map(|(x, y)| x.max(y));
    let eta_cone = eta_of(&a.cone_laplacian(), &b.cone_laplacian())?;

    let within = |bound: Option<f64>| match (eta_cone, bound) {
        (Some(c), Some(b)) => Some(c <= b + BOUND_SLACK),
        _ => None,
    };
    report.within_v_bound = within(eta.map(|e| e + v));
    report.within_theta_bound = within(eta.zip(theta).map(|(e, t)| e + t));
    report.status = if report.within_v_bound == Some(true) && report.within_theta_bound != Some(false) {
        CheckStatus::Pass
    } else {
        CheckStatus::Fail
    };
    report.eta = eta;
    report.v = Some(v);
    report.theta = theta;
    report.eta_cone = eta_cone;
    Ok(report)
}
