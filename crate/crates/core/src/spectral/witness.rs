//! Global and local spectral witnesses.

use serde::{Deserialize, Serialize};

use super::{eigendecompose, eigendecompose_matrix, Spectrum};
use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::operators::{coboundary_matrix, laplacian, Provenance};
use crate::sheaf::CellSheaf;

/// Spectral weight `w(lambda)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Weight {
    Uniform,
    Inverse,
    Heat {
        t: f64,
    },
    /// Only the lowest positive mode counts, with weight one.
    GapIndicator,
}

impl Weight {
    fn eval(self, lambda: f64) -> f64 {
        match self {
            Weight::Uniform | Weight::GapIndicator => 1.0,
            Weight::Inverse => 1.0 / lambda,
            Weight::Heat { t } => (-t * lambda).exp(),
        }
    }
}

/// Slack window `(delta0, delta1]` and weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WitnessConfig {
    pub delta0: f64,
    pub delta1: f64,
    pub weight: Weight,
}

impl WitnessConfig {
    pub fn new(delta0: f64, delta1: f64, weight: Weight) -> Result<Self> {
        let cfg = WitnessConfig { delta0, delta1, weight };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.delta0.is_nan() || self.delta0 < 0.0 {
            return Err(Error::NegativeDelta(self.delta0));
        }
        if self.delta1.is_nan() || self.delta0 >= self.delta1 {
            return Err(Error::InvalidWindow(self.delta0, self.delta1));
        }
        if let Weight::Heat { t } = self.weight {
            if t.is_nan() || t <= 0.0 {
                return Err(Error::InvalidConfig(format!("heat time must be positive, got {t}")));
            }
        }
        Ok(())
    }

    /// Default window for a spectrum: `delta0 = 0`, `delta1` twice the
    /// spectral gap (1 when there is no positive eigenvalue), gap weight.
    pub fn default_for(s: &Spectrum) -> Self {
        let gap = s.spectral_gap();
        let delta1 = if gap.is_finite() { 2.0 * gap } else { 1.0 };
        WitnessConfig { delta0: 0.0, delta1, weight: Weight::GapIndicator }
    }
}

/// `sum over lambda in (0, delta1] of (delta1 - max(delta0, lambda)) w(lambda)`.
/// With the gap weight only `lambda_min^+` contributes.
pub fn global_witness(s: &Spectrum, cfg: &WitnessConfig) -> Result<f64> {
    cfg.validate()?;
    if cfg.weight == Weight::GapIndicator {
        let gap = s.spectral_gap();
        return Ok(if gap <= cfg.delta1 { cfg.delta1 - cfg.delta0.max(gap) } else { 0.0 });
    }
    let mut total = 0.0;
    for &l in s.values() {
        if l > s.threshold() && l <= cfg.delta1 {
            total += (cfg.delta1 - cfg.delta0.max(l)) * cfg.weight.eval(l);
        }
    }
    Ok(total)
}

/// Positive eigenvalue clusters, as index ranges, in ascending order.
/// Consecutive eigenvalues closer than `1e-8 * lambda_max` share a cluster.
fn positive_clusters(s: &Spectrum) -> Vec<std::ops::Range<usize>> {
    let spread = linalg::REL_ZERO * s.lambda_max().max(0.0);
    let first = s.kernel_dim();
    let mut out: Vec<std::ops::Range<usize>> = Vec::new();
    for i in first..s.len() {
        match out.last_mut() {
            Some(r) if s.values()[i] - s.values()[i - 1] <= spread => r.end = i + 1,
            _ => out.push(i..i + 1),
        }
    }
    out
}

/// Modes admitted by a local witness at `cfg.delta1`, with their weights.
/// The kernel is never admitted; degenerate clusters enter or leave
/// together, a cluster being admitted when its lowest member is.
pub fn admitted_modes(s: &Spectrum, cfg: &WitnessConfig) -> Vec<(usize, f64)> {
    let mut out = Vec::new();
    for cluster in positive_clusters(s) {
        if s.values()[cluster.start] > cfg.delta1 {
            break;
        }
        out.extend(cluster.clone().map(|i| (i, cfg.weight.eval(s.values()[i]))));
        if cfg.weight == Weight::GapIndicator {
            break;
        }
    }
    out
}

/// Per-cell scores of a local witness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalWitnessMap {
    pub degree: usize,
    pub delta: f64,
    pub scores: Vec<f64>,
}

impl LocalWitnessMap {
    /// Index of the largest score (lowest index on ties), `None` if empty.
    pub fn argmax(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, &s) in self.scores.iter().enumerate() {
            if best.is_none_or(|b| s > self.scores[b]) {
                best = Some(i);
            }
        }
        best
    }
}

/// `(sum s)^2 / sum s^2`; zero for an all-zero map.
pub fn participation_ratio(scores: &[f64]) -> f64 {
    let sum: f64 = scores.iter().sum();
    let sq: f64 = scores.iter().map(|s| s * s).sum();
    if sq == 0.0 {
        0.0
    } else {
        sum * sum / sq
    }
}

/// Squared norms of the per-cell blocks of `x`.
fn block_energies(x: &linalg::Vector, offsets: &[usize]) -> Vec<f64> {
    offsets.windows(2).map(|w| x.rows(w[0], w[1] - w[0]).norm_squared()).collect()
}

/// Weighted energy of the admitted modes on each `(j+1)`-cell:
/// `sum_l w_l ||(d_j v_l)[c]||^2`.
pub fn coface_energy_map(sheaf: &CellSheaf, j: usize, s: &Spectrum, cfg: &WitnessConfig) -> Result<Vec<f64>> {
    let d = coboundary_matrix(sheaf, j as i32);
    check_dim(s, d.ncols())?;
    let offsets = if j < 2 { sheaf.offsets(j + 1) } else { vec![0] };
    let mut out = vec![0.0; offsets.len() - 1];
    for (i, w) in admitted_modes(s, cfg) {
        let e = block_energies(&(&d * s.vectors().column(i)), &offsets);
        out.iter_mut().zip(e).for_each(|(o, x)| *o += w * x);
    }
    Ok(out)
}

fn check_dim(s: &Spectrum, n: usize) -> Result<()> {
    if s.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: s.len() });
    }
    Ok(())
}

/// Local witness on `j`-cells from a given spectrum of an operator on
/// `C^j`. `extra`, when given, is a map out of `C^j` whose column blocks add
/// `||extra[:, block(sigma)] x_sigma||^2` to each cell.
pub fn local_witness_for(
    sheaf: &CellSheaf,
    j: usize,
    s: &Spectrum,
    cfg: &WitnessConfig,
    extra: Option<&Mat>,
) -> Result<LocalWitnessMap> {
    cfg.validate()?;
    if j > 2 {
        return Err(Error::DegreeOutOfRange(j as i32));
    }
    let cx = sheaf.complex();
    let n_cells = cx.cell_count(j);
    check_dim(s, sheaf.cochain_dim(j))?;
    let d_up = coboundary_matrix(sheaf, j as i32);
    let d_down = coboundary_matrix(sheaf, j as i32 - 1);
    let up_off = if j < 2 { sheaf.offsets(j + 1) } else { vec![0] };
    let down_off = if j > 0 { sheaf.offsets(j - 1) } else { vec![0] };
    let own_off = sheaf.offsets(j);
    let cofaces = |c: usize| -> Vec<usize> {
        match j {
            0 => cx.vertex_cofaces(c).to_vec(),
            1 => cx.edge_cofaces(c).to_vec(),
            _ => Vec::new(),
        }
    };
    let faces = |c: usize| -> Vec<usize> {
        match j {
            1 => cx.edge_faces(c).iter().map(|f| f.0).collect(),
            2 => cx.triangle_faces(c).iter().map(|f| f.0).collect(),
            _ => Vec::new(),
        }
    };
    let mut scores = vec![0.0; n_cells];
    for (i, w) in admitted_modes(s, cfg) {
        let v = s.vectors().column(i).clone_owned();
        let up = block_energies(&(&d_up * &v), &up_off);
        let down = block_energies(&(d_down.transpose() * &v), &down_off);
        for (c, score) in scores.iter_mut().enumerate() {
            let mut local: f64 = cofaces(c).iter().map(|&k| up[k]).sum::<f64>();
            local += faces(c).iter().map(|&k| down[k]).sum::<f64>();
            if let Some(eps) = extra {
                let block = eps.columns(own_off[c], own_off[c + 1] - own_off[c]);
                local += (block * v.rows(own_off[c], own_off[c + 1] - own_off[c])).norm_squared();
            }
            *score += w * local;
        }
    }
    Ok(LocalWitnessMap { degree: j, delta: cfg.delta1, scores })
}

/// Local witness of the base Laplacian `L_j`.
pub fn local_witness(sheaf: &CellSheaf, j: usize, cfg: &WitnessConfig) -> Result<LocalWitnessMap> {
    let s = eigendecompose(&laplacian(sheaf, j)?)?;
    local_witness_for(sheaf, j, &s, cfg, None)
}

/// Local witness of the relative channel `L1 + eps^T eps` on edges; the
/// grounding contributes its per-edge term.
pub fn relative_local_witness(sheaf: &CellSheaf, eps: &Mat, cfg: &WitnessConfig) -> Result<LocalWitnessMap> {
    let l1 = laplacian(sheaf, 1)?;
    let s = eigendecompose_matrix(&(&l1.matrix + eps.transpose() * eps), Provenance::Channel)?;
    local_witness_for(sheaf, 1, &s, cfg, Some(eps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::{CliqueComplex, Graph};
    use crate::sheaf;

    fn diag_spectrum(vals: &[f64]) -> Spectrum {
        let n = vals.len();
        Spectrum::from_parts(vals.to_vec(), Mat::identity(n, n), Provenance::Base).unwrap()
    }

    #[test]
    fn global_formula_examples() {
        let s = diag_spectrum(&[0.0, 0.5, 2.0]);
        let w = global_witness(&s, &WitnessConfig::new(0.0, 1.0, Weight::Uniform).unwrap()).unwrap();
        assert_eq!(w, 0.5);
        let s = diag_spectrum(&[0.0, 0.5, 0.8]);
        let w = global_witness(&s, &WitnessConfig::new(0.6, 1.0, Weight::Uniform).unwrap()).unwrap();
        assert!((w - 0.6).abs() < 1e-15);
        let s = diag_spectrum(&[0.0, 3.0]);
        assert_eq!(global_witness(&s, &WitnessConfig::new(0.0, 1.0, Weight::Inverse).unwrap()).unwrap(), 0.0);
        assert!(WitnessConfig::new(1.0, 1.0, Weight::Uniform).is_err());
        assert!(WitnessConfig::new(0.0, 1.0, Weight::Heat { t: 0.0 }).is_err());
    }

    #[test]
    fn gap_indicator_formula() {
        let s = diag_spectrum(&[0.0, 0.25, 0.5]);
        let cfg = WitnessConfig::new(0.125, 1.0, Weight::GapIndicator).unwrap();
        assert_eq!(global_witness(&s, &cfg).unwrap(), 1.0 - 0.25);
        let cfg = WitnessConfig::new(0.375, 1.0, Weight::GapIndicator).unwrap();
        assert_eq!(global_witness(&s, &cfg).unwrap(), 1.0 - 0.375);
    }

    #[test]
    fn clusters_enter_together() {
        let s = diag_spectrum(&[0.0, 1.0, 1.0, 2.0]);
        let cfg = WitnessConfig::new(0.0, 1.5, Weight::GapIndicator).unwrap();
        let idx: Vec<usize> = admitted_modes(&s, &cfg).iter().map(|m| m.0).collect();
        assert_eq!(idx, vec![1, 2]);
        let cfg = WitnessConfig::new(0.0, 0.5, Weight::Uniform).unwrap();
        assert!(admitted_modes(&s, &cfg).is_empty());
    }

    #[test]
    fn mobius_vertex_scores_are_uniform() {
        let m = sheaf::mobius_bundle(10, 1).unwrap();
        let s = eigendecompose(&laplacian(&m, 0).unwrap()).unwrap();
        let cfg = WitnessConfig::default_for(&s);
        let map = local_witness_for(&m, 0, &s, &cfg, None).unwrap();
        let first = map.scores[0];
        assert!(first > 0.0);
        assert!(map.scores.iter().all(|x| (x - first).abs() < 1e-8));
    }

    #[test]
    fn below_spectrum_is_zero() {
        let t = sheaf::trivial_bundle(10, 1).unwrap();
        let cfg = WitnessConfig::new(0.0, 0.1, Weight::Uniform).unwrap();
        let map = local_witness(&t, 0, &cfg).unwrap();
        assert!(map.scores.iter().all(|&x| x == 0.0));
        assert_eq!(participation_ratio(&map.scores), 0.0);
    }

    #[test]
    fn accounting_identity_on_k4() {
        // In K4 every vertex lies on 3 edges and every edge on 2 triangles,
        // so the summed scores reduce to multiples of whole-cochain norms.
        let cx = CliqueComplex::from_graph(&Graph::complete(4).unwrap());
        let s = crate::sheaf::Gauge::random(&cx, 2, 4).apply(cx, 2).unwrap();
        for j in 0..2 {
            let spec = eigendecompose(&laplacian(&s, j).unwrap()).unwrap();
            let cfg = WitnessConfig::new(0.0, spec.lambda_max(), Weight::Heat { t: 1.0 }).unwrap();
            let map = local_witness_for(&s, j, &spec, &cfg, None).unwrap();
            let energy = coface_energy_map(&s, j, &spec, &cfg).unwrap();
            let faces_per_coface = (j + 2) as f64;
            let mut expected: f64 = energy.iter().map(|e| e * faces_per_coface).sum();
            if j == 1 {
                let d0 = coboundary_matrix(&s, 0);
                for (i, w) in admitted_modes(&spec, &cfg) {
                    expected += w * 3.0 * (d0.transpose() * spec.vectors().column(i)).norm_squared();
                }
            }
            let total: f64 = map.scores.iter().sum();
            assert!((total - expected).abs() < 1e-9 * expected.max(1.0), "degree {j}: {total} vs {expected}");
        }
    }
}
