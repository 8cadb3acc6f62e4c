//! Four-channel diagnostics reports, the intrinsic/relative separation check,
//! and the experiment harnesses.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::operators::{
    channel_set, coboundary_matrix, incidence_defect, GroundingMode, GroundingMorphism, SheafLaplacian, TargetSheaf,
};
use crate::sheaf::{self, CellSheaf};
use crate::spectral::{
    coface_energy_map, eigendecompose, global_witness, local_witness_for, participation_ratio, Spectrum, Weight,
    WitnessConfig,
};

/// Named choice of a cochain-level grounding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroundingKind {
    /// Identity on `C^1`.
    FullRank,
    /// Identity on the orthogonal complement of the harmonic 1-cochains.
    Deficient,
    /// Zero padding of the stalk bases into the largest ambient space.
    Padding,
    /// The zero map into the largest ambient space.
    Zero,
}

impl GroundingKind {
    pub fn build(self, sheaf: &CellSheaf) -> GroundingMorphism {
        match self {
            GroundingKind::FullRank => GroundingMorphism::full_rank_c1(sheaf),
            GroundingKind::Deficient => GroundingMorphism::deficient_c1(sheaf),
            GroundingKind::Padding => GroundingMorphism::from_padding(sheaf, GroundingMode::CochainC1),
            GroundingKind::Zero => GroundingMorphism::zero(sheaf, sheaf.max_ambient_dim(), GroundingMode::CochainC1),
        }
    }
}

/// Shared settings for the spectral channels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsConfig {
    /// Scale each operator to trace/rank = 1 before reading gaps and witnesses.
    pub normalize: bool,
    pub delta0: f64,
    /// Upper end of the witness window; `None` uses twice the gap of each
    /// channel's spectrum (after normalization when enabled).
    pub delta1: Option<f64>,
    pub weight: Weight,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        DiagnosticsConfig { normalize: false, delta0: 0.0, delta1: None, weight: Weight::GapIndicator }
    }
}

impl DiagnosticsConfig {
    /// The witness window for one channel's spectrum.
    pub fn witness_for(&self, s: &Spectrum) -> Result<WitnessConfig> {
        let delta1 = self.delta1.unwrap_or_else(|| WitnessConfig::default_for(s).delta1);
        WitnessConfig::new(self.delta0, delta1, self.weight)
    }
}

/// Diagnostic channel in the taxonomy of inconsistency mechanisms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Channel {
    /// `L0`.
    LocalFeasibility,
    /// `L1`.
    IntrinsicObstruction,
    /// `L1 + eps^T eps`.
    GroundingInducedObstruction,
    /// `eps eps^T`, an auxiliary Gram operator rather than a sheaf Laplacian.
    GroundUtilization,
}

impl Channel {
    pub const ALL: [Channel; 4] = [
        Channel::LocalFeasibility,
        Channel::IntrinsicObstruction,
        Channel::GroundingInducedObstruction,
        Channel::GroundUtilization,
    ];

    pub fn operator(self) -> &'static str {
        match self {
            Channel::LocalFeasibility => "L0",
            Channel::IntrinsicObstruction => "L1",
            Channel::GroundingInducedObstruction => "L1 + eps^T eps",
            Channel::GroundUtilization => "eps eps^T",
        }
    }

    pub fn is_auxiliary(self) -> bool {
        self == Channel::GroundUtilization
    }
}

/// Spectral summary of one channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSummary {
    pub channel: Channel,
    pub operator: String,
    /// Set for the utilization channel, which is not a sheaf Laplacian.
    pub auxiliary: bool,
    pub dim: usize,
    pub kernel_dim: usize,
    pub lambda_min: f64,
    /// Smallest positive eigenvalue after the normalization policy;
    /// `None` when every eigenvalue is zero.
    pub spectral_gap: Option<f64>,
    pub raw_gap: Option<f64>,
    pub normalized: bool,
    pub scale: f64,
    pub witness: WitnessConfig,
    pub global_witness: f64,
    /// Ascending spectrum after normalization.
    pub eigenvalues: Vec<f64>,
}

/// The four-channel report for a sheaf and a grounding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub channels: Vec<ChannelSummary>,
    /// `||Delta||`: the incidence defect for per-cell groundings against
    /// the constant target, `||eps d0||` for groundings stored on `C^1`.
    pub defect_norm: f64,
    /// Edge-attributed energy of the admitted `L0` modes.
    pub localization: Vec<f64>,
    pub localization_argmax: Option<usize>,
    pub participation_ratio: f64,
}

impl DiagnosticsReport {
    pub fn channel(&self, c: Channel) -> &ChannelSummary {
        self.channels.iter().find(|s| s.channel == c).expect("all four channels are present")
    }
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

/// A spectrum under the normalization policy, with its scale.
fn policy_spectrum(s: &Spectrum, normalize: bool) -> (Spectrum, f64, bool) {
    if normalize {
        s.normalized()
    } else {
        (s.clone(), 1.0, false)
    }
}

fn summarize(
    channel: Channel,
    raw: &Spectrum,
    cfg: &DiagnosticsConfig,
) -> Result<(ChannelSummary, Spectrum, WitnessConfig)> {
    let (s, scale, normalized) = policy_spectrum(raw, cfg.normalize);
    let witness = cfg.witness_for(&s)?;
    let summary = ChannelSummary {
        channel,
        operator: channel.operator().to_string(),
        auxiliary: channel.is_auxiliary(),
        dim: s.len(),
        kernel_dim: s.kernel_dim(),
        lambda_min: s.lambda_min(),
        spectral_gap: finite(s.spectral_gap()),
        raw_gap: finite(raw.spectral_gap()),
        normalized,
        scale,
        witness,
        global_witness: global_witness(&s, &witness)?,
        eigenvalues: s.values().to_vec(),
    };
    Ok((summary, s, witness))
}

/// Defect of a grounding as reported in diagnostics.
pub fn grounding_defect_norm(sheaf: &CellSheaf, g: &GroundingMorphism) -> Result<f64> {
    match g {
        GroundingMorphism::VertexLevel { .. } => Ok(incidence_defect(sheaf, g, TargetSheaf::Constant)?.total_norm),
        GroundingMorphism::CochainC1 { map, .. } => Ok(linalg::frobenius(&(map * coboundary_matrix(sheaf, 0)))),
    }
}

/// All four channels for `sheaf` and `g`. Per-cell groundings are first
/// assembled into their map on `C^1`.
pub fn run_diagnostics(sheaf: &CellSheaf, g: &GroundingMorphism, cfg: &DiagnosticsConfig) -> Result<DiagnosticsReport> {
    let c1 = g.to_cochain_c1();
    let ch = channel_set(sheaf, &c1)?;
    let ops: [&SheafLaplacian; 4] = [&ch.l0, &ch.l1, &ch.relative, &ch.utilization];
    let spectra: Vec<Spectrum> = ops.par_iter().map(|l| eigendecompose(l)).collect::<Result<_>>()?;
    let mut channels = Vec::with_capacity(4);
    let mut l0 = None;
    for (c, raw) in Channel::ALL.into_iter().zip(&spectra) {
        let (summary, s, w) = summarize(c, raw, cfg)?;
        if c == Channel::LocalFeasibility {
            l0 = Some((s, w));
        }
        channels.push(summary);
    }
    let (s0, w0) = l0.expect("L0 is the first channel");
    let localization = coface_energy_map(sheaf, 0, &s0, &w0)?;
    let participation = participation_ratio(&localization);
    let argmax = argmax(&localization);
    Ok(DiagnosticsReport {
        channels,
        defect_norm: grounding_defect_norm(sheaf, g)?,
        localization,
        localization_argmax: argmax,
        participation_ratio: participation,
    })
}

/// Index of the largest entry (lowest index on ties), `None` if every entry
/// is zero.
pub fn argmax(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        if s > 0.0 && best.is_none_or(|b| s > scores[b]) {
            best = Some(i);
        }
    }
    best
}

/// The equivalences between a relative kernel and the grounding killing an
/// intrinsic harmonic mode, checked by explicit ranks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationVerdict {
    /// `dim ker L1`.
    pub intrinsic_dim: usize,
    /// `dim ker(L1 + eps^T eps)`.
    pub relative_kernel_dim: usize,
    /// `dim ker(eps restricted to ker L1)`.
    pub restricted_kernel_dim: usize,
    /// `dim (ker(L1 + eps^T eps) ∩ ker L1)`.
    pub intersection_dim: usize,
    /// The relative channel has a kernel.
    pub a: bool,
    /// Some intrinsic harmonic mode is annihilated by the grounding.
    pub b: bool,
    /// The relative kernel meets the intrinsic harmonic space.
    pub c: bool,
    pub equivalent: bool,
    /// Gap of the relative channel when the grounding is injective on
    /// `ker L1`.
    pub gamma: Option<f64>,
}

/// Checks that (a), (b) and (c) agree for a cochain-level grounding.
pub fn separation_check(sheaf: &CellSheaf, g: &GroundingMorphism) -> Result<SeparationVerdict> {
    let ch = channel_set(sheaf, g)?;
    let GroundingMorphism::CochainC1 { map: eps, .. } = g else { unreachable!("checked by channel_set") };
    let l1 = eigendecompose(&ch.l1)?;
    let rel = eigendecompose(&ch.relative)?;
    let h = l1.harmonic_space(0.0)?;
    let k = rel.harmonic_space(0.0)?;
    let eps_h = eps * &h;
    let restricted_kernel_dim =
        h.ncols() - linalg::numerical_rank(&eps_h, linalg::RANK_TOL * linalg::max_abs(eps).max(1.0));
    // principal angles: cosines equal to one mark shared directions
    let intersection_dim = if h.ncols() == 0 || k.ncols() == 0 {
        0
    } else {
        let (_, cos, _) = linalg::svd_sorted(&(h.transpose() * &k));
        cos.iter().filter(|&&c| c > 1.0 - 1e-8).count()
    };
    let (a, b, c) = (rel.kernel_dim() > 0, restricted_kernel_dim > 0, intersection_dim > 0);
    Ok(SeparationVerdict {
        intrinsic_dim: h.ncols(),
        relative_kernel_dim: rel.kernel_dim(),
        restricted_kernel_dim,
        intersection_dim,
        a,
        b,
        c,
        equivalent: a == b && b == c,
        gamma: if b { None } else { finite(rel.spectral_gap()) },
    })
}

/// The four experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Existence,
    Magnitude,
    Localization,
    Relativity,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 4] = [
        ExperimentKind::Existence,
        ExperimentKind::Magnitude,
        ExperimentKind::Localization,
        ExperimentKind::Relativity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Existence => "existence",
            ExperimentKind::Magnitude => "magnitude",
            ExperimentKind::Localization => "localization",
            ExperimentKind::Relativity => "relativity",
        }
    }
}

/// Fixture parameters shared by the experiments. Unused fields are ignored
/// by experiments that do not need them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentParams {
    /// Cycle length (existence, relativity) or prism size (magnitude,
    /// localization).
    pub n: usize,
    pub stalk_dim: usize,
    pub tau: f64,
    pub sigma: f64,
    pub seed: u64,
    /// Grounding for the relative channel in the localization experiment.
    pub grounding: GroundingKind,
    pub diagnostics: DiagnosticsConfig,
}

impl Default for ExperimentParams {
    fn default() -> Self {
        ExperimentParams {
            n: 10,
            stalk_dim: 1,
            tau: 0.3,
            sigma: 0.25,
            seed: 0,
            grounding: GroundingKind::FullRank,
            diagnostics: DiagnosticsConfig::default(),
        }
    }
}

/// One row of an experiment table.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TableRow {
    pub label: String,
    pub kernel_dim: usize,
    pub lambda_min: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectral_gap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_gap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub global_witness: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub participation_ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub argmax: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grounding_rank: Option<usize>,
}

/// Per-cell scores of one panel of the localization figure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub fixture: String,
    pub channel: String,
    pub degree: usize,
    pub delta: f64,
    pub scores: Vec<f64>,
}

/// Named boolean checks; `holds` is `None` when the experiment's premise
/// does not apply (for example a twist with a kernel in the magnitude table).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub holds: Option<bool>,
    pub checks: BTreeMap<String, bool>,
}

impl Verdict {
    fn from_checks(checks: BTreeMap<String, bool>) -> Self {
        Verdict { holds: Some(checks.values().all(|&b| b)), checks }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub experiment: ExperimentKind,
    pub params: ExperimentParams,
    pub rows: Vec<TableRow>,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub heatmaps: Vec<Heatmap>,
}

impl ExperimentResult {
    pub fn row(&self, label: &str) -> Option<&TableRow> {
        self.rows.iter().find(|r| r.label == label)
    }
}

pub fn run_experiment(kind: ExperimentKind, params: &ExperimentParams) -> Result<ExperimentResult> {
    match kind {
        ExperimentKind::Existence => experiment_existence(params),
        ExperimentKind::Magnitude => experiment_magnitude(params),
        ExperimentKind::Localization => experiment_localization(params),
        ExperimentKind::Relativity => experiment_relativity(params),
    }
}

fn l0_spectrum(s: &CellSheaf) -> Result<Spectrum> {
    eigendecompose(&crate::operators::laplacian(s, 0)?)
}

/// Trivial versus Möbius bundle on the `n`-cycle: `(lambda_min, dim ker L0)`.
pub fn experiment_existence(p: &ExperimentParams) -> Result<ExperimentResult> {
    let fixtures =
        [("trivial", sheaf::trivial_bundle(p.n, p.stalk_dim)?), ("mobius", sheaf::mobius_bundle(p.n, p.stalk_dim)?)];
    let mut rows = Vec::new();
    for (label, s) in &fixtures {
        let spec = l0_spectrum(s)?;
        rows.push(TableRow {
            label: label.to_string(),
            kernel_dim: spec.kernel_dim(),
            lambda_min: spec.lambda_min().max(0.0),
            spectral_gap: finite(spec.spectral_gap()),
            ..TableRow::default()
        });
    }
    let mut checks = BTreeMap::new();
    checks.insert("trivial_has_global_section".into(), rows[0].kernel_dim == p.stalk_dim);
    checks.insert("mobius_has_no_global_section".into(), rows[1].kernel_dim == 0);
    Ok(ExperimentResult {
        experiment: ExperimentKind::Existence,
        params: *p,
        rows,
        verdict: Verdict::from_checks(checks),
        heatmaps: Vec::new(),
    })
}

fn twist_fixtures(p: &ExperimentParams) -> Result<[(&'static str, CellSheaf); 2]> {
    Ok([
        ("hidden-twist", sheaf::hidden_twist_bundle(p.n, p.tau)?),
        ("noisy-trivial", sheaf::noisy_trivial_bundle(p.n, p.sigma, p.seed)?),
    ])
}

/// Hidden twist versus noisy trivial bundle: gap and gap-based witness of `L0`.
pub fn experiment_magnitude(p: &ExperimentParams) -> Result<ExperimentResult> {
    let mut rows = Vec::new();
    for (label, s) in twist_fixtures(p)? {
        let raw = l0_spectrum(&s)?;
        let (summary, _, _) = summarize(Channel::LocalFeasibility, &raw, &p.diagnostics)?;
        rows.push(TableRow {
            label: label.to_string(),
            kernel_dim: summary.kernel_dim,
            lambda_min: summary.lambda_min.max(0.0),
            spectral_gap: summary.spectral_gap,
            raw_gap: summary.raw_gap,
            global_witness: Some(summary.global_witness),
            ..TableRow::default()
        });
    }
    let mut checks = BTreeMap::new();
    let ordered = matches!((rows[0].spectral_gap, rows[1].spectral_gap), (Some(a), Some(b)) if a < b);
    checks.insert("twist_gap_below_noise_gap".into(), ordered);
    // a twist that leaves a global section is not a magnitude comparison
    let applicable = rows[0].kernel_dim == 0;
    let holds = applicable.then_some(ordered);
    Ok(ExperimentResult {
        experiment: ExperimentKind::Magnitude,
        params: *p,
        rows,
        verdict: Verdict { holds, checks },
        heatmaps: Vec::new(),
    })
}

/// Local witness maps of `L0`, `L1` and the relative channel for both
/// twist fixtures, with the edge-attributed `L0` energy used for the
/// localization verdict.
pub fn experiment_localization(p: &ExperimentParams) -> Result<ExperimentResult> {
    let cfg = &p.diagnostics;
    let mut rows = Vec::new();
    let mut heatmaps = Vec::new();
    for (label, s) in twist_fixtures(p)? {
        let eps = p.grounding.build(&s).c1_matrix();
        let ch = channel_set(&s, &GroundingMorphism::CochainC1 { target_dim: eps.nrows(), map: eps.clone() })?;
        let mut panel =
            |channel: &str, j: usize, l: &SheafLaplacian, extra: Option<&Mat>| -> Result<(Spectrum, WitnessConfig)> {
                let (spec, _, _) = policy_spectrum(&eigendecompose(l)?, cfg.normalize);
                let w = cfg.witness_for(&spec)?;
                let map = local_witness_for(&s, j, &spec, &w, extra)?;
                heatmaps.push(Heatmap {
                    fixture: label.into(),
                    channel: channel.into(),
                    degree: j,
                    delta: w.delta1,
                    scores: map.scores,
                });
                Ok((spec, w))
            };
        let (s0, w0) = panel("L0", 0, &ch.l0, None)?;
        panel("L1", 1, &ch.l1, None)?;
        panel("relative", 1, &ch.relative, Some(&eps))?;
        let energy = coface_energy_map(&s, 0, &s0, &w0)?;
        heatmaps.push(Heatmap {
            fixture: label.into(),
            channel: "L0-edge-energy".into(),
            degree: 1,
            delta: w0.delta1,
            scores: energy.clone(),
        });
        rows.push(TableRow {
            label: label.to_string(),
            kernel_dim: s0.kernel_dim(),
            lambda_min: s0.lambda_min().max(0.0),
            spectral_gap: finite(s0.spectral_gap()),
            participation_ratio: Some(participation_ratio(&energy)),
            argmax: argmax(&energy),
            ..TableRow::default()
        });
    }
    let defect = hidden_defect_index(p.n)?;
    let mut checks = BTreeMap::new();
    checks.insert("twist_argmax_is_defect".into(), rows[0].argmax == Some(defect));
    let pr = (rows[0].participation_ratio.unwrap_or(0.0), rows[1].participation_ratio.unwrap_or(0.0));
    checks.insert("twist_more_localized".into(), pr.0 > 0.0 && pr.0 < pr.1);
    Ok(ExperimentResult {
        experiment: ExperimentKind::Localization,
        params: *p,
        rows,
        verdict: Verdict::from_checks(checks),
        heatmaps,
    })
}

/// Edge index of the hidden twist on the prism of size `n`.
pub fn hidden_defect_index(n: usize) -> Result<usize> {
    let (u, v) = sheaf::hidden_twist_edge(n);
    let cx = crate::complex::CliqueComplex::from_graph(&crate::complex::Graph::prism(n)?);
    cx.edge_index(u, v).ok_or_else(|| Error::InvalidConfig(format!("no rung ({u}, {v})")))
}

/// Full-rank versus rank-deficient grounding of the trivial bundle: the
/// relative channel differs while `L0` and `L1` are the same matrices.
pub fn experiment_relativity(p: &ExperimentParams) -> Result<ExperimentResult> {
    let s = sheaf::trivial_bundle(p.n, p.stalk_dim)?;
    let groundings = [("full-rank", GroundingKind::FullRank), ("rank-deficient", GroundingKind::Deficient)];
    let mut rows = Vec::new();
    let mut bases = Vec::new();
    for (label, kind) in groundings {
        let g = kind.build(&s);
        let ch = channel_set(&s, &g)?;
        let spec = eigendecompose(&ch.relative)?;
        let eps = g.c1_matrix();
        rows.push(TableRow {
            label: label.to_string(),
            kernel_dim: spec.kernel_dim(),
            lambda_min: spec.lambda_min().max(0.0),
            spectral_gap: finite(spec.spectral_gap()),
            grounding_rank: Some(linalg::numerical_rank(&eps, linalg::RANK_TOL * linalg::max_abs(&eps).max(1.0))),
            ..TableRow::default()
        });
        bases.push((ch.l0.matrix, ch.l1.matrix));
    }
    let intrinsic = crate::operators::betti_rank_nullity(&s, 1);
    let mut checks = BTreeMap::new();
    checks.insert("base_channels_identical".into(), bases[0] == bases[1]);
    checks.insert("full_rank_has_no_relative_kernel".into(), rows[0].kernel_dim == 0);
    checks.insert("deficient_kills_intrinsic_modes".into(), rows[1].kernel_dim == intrinsic);
    Ok(ExperimentResult {
        experiment: ExperimentKind::Relativity,
        params: *p,
        rows,
        verdict: Verdict::from_checks(checks),
        heatmaps: Vec::new(),
    })
}

/// Tallies of the localization experiment over many seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub runs: usize,
    /// Seeds where the twist gap is below the noisy gap.
    pub gap_wins: usize,
    /// Seeds where the twist's edge energy peaks on the defect edge.
    pub argmax_hits: usize,
    /// Seeds where the twist map has the smaller participation ratio.
    pub pr_wins: usize,
}

/// Runs the localization experiment for each seed in parallel.
pub fn localization_ensemble(p: &ExperimentParams, seeds: &[u64]) -> Result<EnsembleSummary> {
    let results: Vec<ExperimentResult> = seeds
        .par_iter()
        .map(|&seed| experiment_localization(&ExperimentParams { seed, ..*p }))
        .collect::<Result<_>>()?;
    let count = |name: &str| results.iter().filter(|r| r.verdict.checks.get(name) == Some(&true)).count();
    let gap_wins = results
        .iter()
        .filter(|r| matches!((r.rows[0].spectral_gap, r.rows[1].spectral_gap), (Some(a), Some(b)) if a < b))
        .count();
    Ok(EnsembleSummary {
        runs: results.len(),
        gap_wins,
        argmax_hits: count("twist_argmax_is_defect"),
        pr_wins: count("twist_more_localized"),
    })
}
