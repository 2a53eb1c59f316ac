//! The GT / NC / SICER comparison protocol and its CSV outputs.
//!
//! * GT: filters designed on IRs simulated at the true speed.
//! * NC: filters designed on IRs at the design speed, no correction.
//! * SICER: filters designed on the design-speed IRs corrected to the true speed.
//!
//! All three are scored against the true-speed IRs.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ir::IrGrid;
use crate::metrics::{self, EvaluationReport, MetricsError};
use crate::par;
use crate::room::{self, Preset, RoomError};
use crate::sicer::{self, Antialias, SicerError};
use crate::vast::signal::desired_per_mic;
use crate::vast::{ControlFilterBank, Design, DesignConfig, VastError};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid experiment config: {0}")]
    InvalidConfig(String),
    #[error("simulation: {0}")]
    Room(#[from] RoomError),
    #[error("SICER correction: {0}")]
    Sicer(#[from] SicerError),
    #[error("design ({case}): {source}")]
    Design { case: Case, source: VastError },
    #[error("evaluation: {0}")]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("preset file: {0}")]
    PresetFile(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Case {
    #[serde(rename = "GT")]
    GroundTruth,
    #[serde(rename = "NC")]
    NoCorrection,
    #[serde(rename = "SICER")]
    Sicer,
}

impl Case {
    pub const ALL: [Case; 3] = [Case::GroundTruth, Case::NoCorrection, Case::Sicer];
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Case::GroundTruth => "GT",
            Case::NoCorrection => "NC",
            Case::Sicer => "SICER",
        })
    }
}

/// Explicit ranks or `sweep:<count>`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Ranks {
    List(Vec<usize>),
    Sweep(usize),
}

impl Default for Ranks {
    fn default() -> Self {
        Ranks::Sweep(100)
    }
}

impl FromStr for Ranks {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        if let Some(n) = s.strip_prefix("sweep:") {
            let n: usize = n.parse().map_err(|_| format!("bad sweep count in {s:?}"))?;
            if n == 0 {
                return Err("sweep count must be >= 1".into());
            }
            return Ok(Ranks::Sweep(n));
        }
        let list = s
            .split(',')
            .map(|t| t.trim().parse::<usize>().map_err(|_| format!("bad rank {t:?}")))
            .collect::<Result<Vec<_>, _>>()?;
        if list.is_empty() {
            return Err("empty rank list".into());
        }
        Ok(Ranks::List(list))
    }
}

impl TryFrom<String> for Ranks {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<Ranks> for String {
    fn from(r: Ranks) -> String {
        match r {
            Ranks::Sweep(n) => format!("sweep:{n}"),
            Ranks::List(v) => v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","),
        }
    }
}

/// `round(linspace(1, lj, count))` with duplicates removed.
pub fn rank_sweep(lj: usize, count: usize) -> Vec<usize> {
    if count <= 1 || lj <= 1 {
        return vec![1];
    }
    let step = (lj - 1) as f64 / (count - 1) as f64;
    let mut out: Vec<usize> = (0..count).map(|i| (1.0 + step * i as f64).round() as usize).collect();
    out.dedup();
    out
}

impl Ranks {
    /// Sorted, deduplicated ranks in `1..=lj`.
    pub fn resolve(&self, lj: usize) -> Result<Vec<usize>, ExperimentError> {
        let mut v = match self {
            Ranks::Sweep(n) => rank_sweep(lj, *n),
            Ranks::List(v) => v.clone(),
        };
        v.sort_unstable();
        v.dedup();
        if let Some(&bad) = v.iter().find(|&&r| r == 0 || r > lj) {
            return Err(ExperimentError::InvalidConfig(format!("rank {bad} outside 1..={lj}")));
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "path")]
pub enum PresetChoice {
    Paper,
    Desk,
    Custom(PathBuf),
}

impl FromStr for PresetChoice {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "paper" => Ok(PresetChoice::Paper),
            "desk" => Ok(PresetChoice::Desk),
            "" => Err("empty preset".into()),
            path => Ok(PresetChoice::Custom(path.into())),
        }
    }
}

impl PresetChoice {
    pub fn load(&self) -> Result<Preset, ExperimentError> {
        match self {
            PresetChoice::Paper => Ok(room::paper_preset()),
            PresetChoice::Desk => Ok(room::desk_preset()),
            PresetChoice::Custom(path) => {
                let text = std::fs::read_to_string(path)?;
                serde_json::from_str(&text)
                    .map_err(|e| ExperimentError::PresetFile(format!("{}: {e}", path.display())))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub preset: PresetChoice,
    pub c_design: f64,
    pub c_true: f64,
    /// Defaults to the preset's value.
    pub mu: Option<f64>,
    /// Defaults to the preset's value.
    pub j: Option<usize>,
    pub ranks: Ranks,
    pub antialias: Antialias,
    pub out_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn desk(c_true: f64, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            preset: PresetChoice::Desk,
            c_design: 343.0,
            c_true,
            mu: None,
            j: None,
            ranks: Ranks::default(),
            antialias: Antialias::Auto,
            out_dir: out_dir.into(),
        }
    }

    fn validate(&self) -> Result<(), ExperimentError> {
        for (name, c) in [("c_design", self.c_design), ("c_true", self.c_true)] {
            if !(c > 0.0 && c.is_finite()) {
                return Err(ExperimentError::InvalidConfig(format!("{name} must be > 0, got {c}")));
            }
        }
        Ok(())
    }
}

/// Simulated grids of one scenario.
#[derive(Debug, Clone)]
pub struct ScenarioGrids {
    pub design: (IrGrid, IrGrid),
    pub truth: (IrGrid, IrGrid),
    pub corrected: (IrGrid, IrGrid),
}

pub fn simulate_scenario(
    preset: &Preset,
    c_design: f64,
    c_true: f64,
    antialias: Antialias,
) -> Result<ScenarioGrids, ExperimentError> {
    let design = room::simulate_array(&preset.room.with_sound_speed(c_design), &preset.array)?;
    let truth = if c_true == c_design {
        design.clone()
    } else {
        room::simulate_array(&preset.room.with_sound_speed(c_true), &preset.array)?
    };
    let corrected = (
        sicer::sicer_grid(&design.0, c_true, antialias)?,
        sicer::sicer_grid(&design.1, c_true, antialias)?,
    );
    Ok(ScenarioGrids { design, truth, corrected })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TdPoint {
    pub case: Case,
    pub rank: usize,
    pub ac_db: f64,
    pub nsdp_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioReport {
    pub lj: usize,
    pub ranks: Vec<usize>,
    /// Sorted by (case, rank).
    pub td: Vec<TdPoint>,
    /// Panel rank → per-case full report, sorted by (rank, case).
    pub fd: Vec<(usize, Case, EvaluationReport)>,
}

impl ScenarioReport {
    pub fn td(&self, case: Case, rank: usize) -> Option<&TdPoint> {
        self.td.iter().find(|p| p.case == case && p.rank == rank)
    }
}

/// Ranks shown in the frequency-domain panels: `1`, `LJ/4`, `LJ`.
pub fn panel_ranks(lj: usize) -> Vec<usize> {
    let mut v = vec![1, (lj / 4).max(1), lj];
    v.dedup();
    v
}

fn td_only(
    bright: &IrGrid,
    dark: &IrGrid,
    bank: &ControlFilterBank,
    d: &[Vec<f64>],
) -> Result<(f64, f64), MetricsError> {
    let y_bz = metrics::reproduce_zone(bright, bank, None)?;
    let y_dz = metrics::reproduce_zone(dark, bank, None)?;
    metrics::td_metrics(&y_bz, &y_dz, d)
}

/// Designs the three filter families on already simulated grids and scores them.
pub fn evaluate_scenario(
    grids: &ScenarioGrids,
    cfg: &DesignConfig,
    ranks: &[usize],
) -> Result<ScenarioReport, ExperimentError> {
    let (bt, dt) = (&grids.truth.0, &grids.truth.1);
    let d = desired_per_mic(bt, cfg).map_err(|source| ExperimentError::Design {
        case: Case::GroundTruth,
        source,
    })?;
    let lj = bt.num_speakers() * cfg.filter_len_j;
    let panels = panel_ranks(lj);
    let mut all_ranks: Vec<usize> = ranks.iter().chain(&panels).copied().collect();
    all_ranks.sort_unstable();
    all_ranks.dedup();

    let mut td = Vec::new();
    let mut fd = Vec::new();
    for case in Case::ALL {
        let (b, dk) = match case {
            Case::GroundTruth => (&grids.truth.0, &grids.truth.1),
            Case::NoCorrection => (&grids.design.0, &grids.design.1),
            Case::Sicer => (&grids.corrected.0, &grids.corrected.1),
        };
        log::info!("designing {case} filters");
        let design =
            Design::new(b, dk, cfg).map_err(|source| ExperimentError::Design { case, source })?;
        let banks = design
            .filters(&all_ranks)
            .map_err(|source| ExperimentError::Design { case, source })?;
        let scores = par::map_slice(&banks, |bank| td_only(bt, dt, bank, &d));
        for (bank, score) in banks.iter().zip(scores) {
            let rank = bank.provenance.rank_v;
            if ranks.binary_search(&rank).is_ok() {
                let (ac_db, nsdp_db) = score?;
                td.push(TdPoint { case, rank, ac_db, nsdp_db });
            }
            if panels.contains(&rank) {
                fd.push((rank, case, metrics::evaluate(bt, dt, bank, None, None)?));
            }
        }
    }
    td.sort_by_key(|p| (p.case, p.rank));
    fd.sort_by_key(|(r, c, _)| (*r, *c));
    Ok(ScenarioReport { lj, ranks: ranks.to_vec(), td, fd })
}

pub fn run_scenario(cfg: &ExperimentConfig) -> Result<ScenarioReport, ExperimentError> {
    cfg.validate()?;
    let preset = cfg.preset.load()?;
    let j = cfg.j.unwrap_or(preset.filter_len_j);
    let mu = cfg.mu.unwrap_or(preset.mu);
    let design_cfg = DesignConfig::new(j, mu, 1, preset.virtual_source_index());
    let lj = preset.array.speaker_positions.len() * j;
    let ranks = cfg.ranks.resolve(lj)?;
    design_cfg
        .validate(preset.array.speaker_positions.len())
        .map_err(|e| ExperimentError::InvalidConfig(e.to_string()))?;
    log::info!(
        "scenario {}: c {} -> {} m/s, LJ = {lj}, {} ranks",
        preset.name,
        cfg.c_design,
        cfg.c_true,
        ranks.len()
    );
    let grids = simulate_scenario(&preset, cfg.c_design, cfg.c_true, cfg.antialias)?;
    evaluate_scenario(&grids, &design_cfg, &ranks)
}

fn fmt_db(x: f64) -> String {
    format!("{x:.9}")
}

/// `scenario.csv`: `case,rank,metric,value_db`.
pub fn scenario_csv(report: &ScenarioReport) -> String {
    let mut s = String::from("case,rank,metric,value_db\n");
    for p in &report.td {
        s += &format!("{},{},td_ac,{}\n", p.case, p.rank, fmt_db(p.ac_db));
        s += &format!("{},{},td_nsdp,{}\n", p.case, p.rank, fmt_db(p.nsdp_db));
    }
    s
}

/// `td_vs_rank.csv`: `rank,case,ac_db,nsdp_db`.
pub fn td_vs_rank_csv(report: &ScenarioReport) -> String {
    let mut s = String::from("rank,case,ac_db,nsdp_db\n");
    for p in &report.td {
        s += &format!("{},{},{},{}\n", p.rank, p.case, fmt_db(p.ac_db), fmt_db(p.nsdp_db));
    }
    s
}

/// `fd_rank_<V>.csv` contents: `freq_hz,case,ac_db,nsdp_db`, sorted by (case, freq).
pub fn fd_csvs(report: &ScenarioReport) -> Vec<(usize, String)> {
    let mut ranks: Vec<usize> = report.fd.iter().map(|(r, _, _)| *r).collect();
    ranks.dedup();
    ranks
        .into_iter()
        .map(|rank| {
            let mut s = String::from("freq_hz,case,ac_db,nsdp_db\n");
            for (_, case, ev) in report.fd.iter().filter(|(r, _, _)| *r == rank) {
                for ((f, ac), nsdp) in ev.freqs_hz.iter().zip(&ev.fd_ac_db).zip(&ev.fd_nsdp_db) {
                    s += &format!("{f:.6},{case},{},{}\n", fmt_db(*ac), fmt_db(*nsdp));
                }
            }
            (rank, s)
        })
        .collect()
}

/// Writes `scenario.csv`, `td_vs_rank.csv` and the `fd_rank_<V>.csv` panels.
/// Returns the paths written.
pub fn emit_plot_data(report: &ScenarioReport, dir: &Path) -> Result<Vec<PathBuf>, ExperimentError> {
    std::fs::create_dir_all(dir)?;
    let mut files = vec![
        (dir.join("scenario.csv"), scenario_csv(report)),
        (dir.join("td_vs_rank.csv"), td_vs_rank_csv(report)),
    ];
    for (rank, body) in fd_csvs(report) {
        files.push((dir.join(format!("fd_rank_{rank}.csv")), body));
    }
    for (path, body) in &files {
        std::fs::write(path, body)?;
    }
    Ok(files.into_iter().map(|(p, _)| p).collect())
}
