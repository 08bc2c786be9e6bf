//! Tidy CSV series for each figure, computed from result bundles.
//!
//! Every file starts with `dataset,model,a` and then:
//! - `fig2_sweep`: rate_exponent, social_cost, total_privacy, total_bandwidth, is_argmin
//! - `fig3_so_hist`, `fig4to7_ne_hist`: init_label, rate_exponent, node_count
//! - `fig8_bc_stack`: init_label, rate_exponent, node_count, bc_sum
//! - `fig9_cost_comp`: regime, init_label, social_cost, privacy_share, bandwidth_share
//! - `fig10_poa_pos`: ne_count, best_ne_cost, worst_ne_cost, so_cost, poa, pos
//! - `fig11_bc_cdf`: init_label, prefix_fraction, node_id, cumulative_bc, cumulative_share
//!
//! `rate_exponent` is the base-2 exponent and empty for the zero rate.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Result};
use fmd_core::{bc_contribution_cdf, poa_pos, RunObjective};
use serde::Serialize;

use crate::experiment::{read_sweep, Bundle, RunSummary};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Figure {
    Sweep,
    SoHist,
    NeHist,
    BcStack,
    CostComp,
    PoaPos,
    BcCdf,
}

impl Figure {
    pub const ALL: [Figure; 7] = [
        Figure::Sweep,
        Figure::SoHist,
        Figure::NeHist,
        Figure::BcStack,
        Figure::CostComp,
        Figure::PoaPos,
        Figure::BcCdf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Figure::Sweep => "fig2_sweep",
            Figure::SoHist => "fig3_so_hist",
            Figure::NeHist => "fig4to7_ne_hist",
            Figure::BcStack => "fig8_bc_stack",
            Figure::CostComp => "fig9_cost_comp",
            Figure::PoaPos => "fig10_poa_pos",
            Figure::BcCdf => "fig11_bc_cdf",
        }
    }
}

impl FromStr for Figure {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Figure::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| format!("unknown figure {s:?}"))
    }
}

/// A figure needs a run the bundle does not contain.
#[derive(Debug)]
pub struct MissingRun {
    pub bundle: PathBuf,
    pub init: String,
    pub objective: String,
}

impl fmt::Display for MissingRun {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} has no run for ({}, {})",
            self.bundle.display(),
            self.init,
            self.objective
        )
    }
}

impl std::error::Error for MissingRun {}

fn missing(b: &Bundle, init: Option<&str>, objective: &str) -> anyhow::Error {
    MissingRun {
        bundle: b.dir.clone(),
        init: init.unwrap_or("any").to_string(),
        objective: objective.to_string(),
    }
    .into()
}

/// Runs of `objective`, restricted to `init` when given. Errors when empty.
fn select<'a>(b: &'a Bundle, objective: RunObjective, init: Option<&str>) -> Result<Vec<&'a RunSummary>> {
    let runs: Vec<&RunSummary> = b
        .manifest
        .runs_for(objective)
        .filter(|r| init.is_none_or(|i| r.init_label == i))
        .collect();
    if runs.is_empty() {
        return Err(missing(b, init, objective.label()));
    }
    Ok(runs)
}

fn cheapest<'a>(runs: &[&'a RunSummary]) -> &'a RunSummary {
    runs.iter()
        .copied()
        .reduce(|best, r| if r.social_cost < best.social_cost { r } else { best })
        .expect("non-empty")
}

#[derive(Serialize)]
struct SweepOut {
    dataset: String,
    model: String,
    a: f64,
    rate_exponent: Option<i32>,
    social_cost: f64,
    total_privacy: f64,
    total_bandwidth: f64,
    is_argmin: bool,
}

#[derive(Serialize)]
struct HistOut {
    dataset: String,
    model: String,
    a: f64,
    init_label: String,
    rate_exponent: Option<i32>,
    node_count: usize,
}

#[derive(Serialize)]
struct StackOut {
    dataset: String,
    model: String,
    a: f64,
    init_label: String,
    rate_exponent: Option<i32>,
    node_count: usize,
    bc_sum: f64,
}

#[derive(Serialize)]
struct CostOut {
    dataset: String,
    model: String,
    a: f64,
    regime: String,
    init_label: String,
    social_cost: f64,
    privacy_share: f64,
    bandwidth_share: f64,
}

#[derive(Serialize)]
struct RatioOut {
    dataset: String,
    model: String,
    a: f64,
    ne_count: usize,
    best_ne_cost: f64,
    worst_ne_cost: f64,
    so_cost: f64,
    poa: f64,
    pos: f64,
}

#[derive(Serialize)]
struct CdfOut {
    dataset: String,
    model: String,
    a: f64,
    init_label: String,
    prefix_fraction: f64,
    node_id: usize,
    cumulative_bc: f64,
    cumulative_share: f64,
}

/// Writes `{figure}.csv` under `out_dir` from all bundles, in bundle order.
/// `init` restricts per-run figures to one init label.
pub fn emit_plot_data(
    bundles: &[Bundle],
    figure: Figure,
    init: Option<&str>,
    out_dir: &Path,
) -> Result<PathBuf> {
    std::fs::create_dir_all(out_dir)?;
    let path = out_dir.join(format!("{}.csv", figure.name()));
    // Buffered so an error leaves no partial file behind.
    let mut w = Rows::default();
    for b in bundles {
        match figure {
            Figure::Sweep => sweep_rows(b, &mut w)?,
            Figure::SoHist => hist_rows(b, RunObjective::Social, init, &mut w)?,
            Figure::NeHist => hist_rows(b, RunObjective::Nash, init, &mut w)?,
            Figure::BcStack => stack_rows(b, init, &mut w)?,
            Figure::CostComp => cost_rows(b, init, &mut w)?,
            Figure::PoaPos => ratio_rows(b, &mut w)?,
            Figure::BcCdf => cdf_rows(b, init, &mut w)?,
        }
    }
    w.write(&path)?;
    Ok(path)
}

/// Rows serialized to CSV in memory.
#[derive(Default)]
struct Rows {
    buf: Option<csv::Writer<Vec<u8>>>,
}

impl Rows {
    fn push<T: Serialize>(&mut self, row: T) -> Result<()> {
        self.buf
            .get_or_insert_with(|| csv::Writer::from_writer(Vec::new()))
            .serialize(row)?;
        Ok(())
    }

    fn write(self, path: &Path) -> Result<()> {
        let bytes = match self.buf {
            Some(w) => w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?,
            None => Vec::new(),
        };
        std::fs::write(path, bytes)?;
        Ok(())
    }
}

fn sweep_rows(b: &Bundle, w: &mut Rows) -> Result<()> {
    if !b.manifest.sweep {
        return Err(missing(b, Some("uniform"), "uniform_sweep"));
    }
    for r in read_sweep(&b.dir.join("sweep.csv"))? {
        w.push(SweepOut {
            dataset: b.manifest.dataset_tag(),
            model: b.manifest.model.clone(),
            a: b.manifest.a,
            rate_exponent: r.rate_exponent,
            social_cost: r.social_cost,
            total_privacy: r.total_privacy,
            total_bandwidth: r.total_bandwidth,
            is_argmin: r.is_argmin,
        })?;
    }
    Ok(())
}

fn hist_rows(b: &Bundle, objective: RunObjective, init: Option<&str>, w: &mut Rows) -> Result<()> {
    for run in select(b, objective, init)? {
        for level in b.report(run)?.histogram {
            w.push(HistOut {
                dataset: b.manifest.dataset_tag(),
                model: b.manifest.model.clone(),
                a: b.manifest.a,
                init_label: run.init_label.clone(),
                rate_exponent: level.rate.exponent(),
                node_count: level.count,
            })?;
        }
    }
    Ok(())
}

fn stack_rows(b: &Bundle, init: Option<&str>, w: &mut Rows) -> Result<()> {
    let bc = b.bc()?;
    let ladder = b.params_ladder()?;
    for run in select(b, RunObjective::Nash, init)? {
        let profile = b.record(run)?.terminal;
        if profile.len() != bc.len() {
            bail!("{}: profile and bc.csv disagree on node count", b.dir.display());
        }
        let mut sums = vec![(0usize, 0.0f64); ladder.len()];
        for (u, &idx) in profile.indices().iter().enumerate() {
            sums[idx].0 += 1;
            sums[idx].1 += bc.values[u];
        }
        for (idx, (count, bc_sum)) in sums.into_iter().enumerate() {
            w.push(StackOut {
                dataset: b.manifest.dataset_tag(),
                model: b.manifest.model.clone(),
                a: b.manifest.a,
                init_label: run.init_label.clone(),
                rate_exponent: ladder.rate(idx).exponent(),
                node_count: count,
                bc_sum,
            })?;
        }
    }
    Ok(())
}

fn cost_rows(b: &Bundle, init: Option<&str>, w: &mut Rows) -> Result<()> {
    let social = select(b, RunObjective::Social, None)?;
    let nash = select(b, RunObjective::Nash, init)?;
    if b.manifest.sweep {
        let rows = read_sweep(&b.dir.join("sweep.csv"))?;
        if let Some(best) = rows.iter().find(|r| r.is_argmin) {
            let label = best
                .rate_exponent
                .map_or("uniform_zero".to_string(), |e| format!("uniform_{e}"));
            let privacy_share = if best.social_cost > 0.0 {
                best.total_privacy / best.social_cost
            } else {
                0.0
            };
            w.push(CostOut {
                dataset: b.manifest.dataset_tag(),
                model: b.manifest.model.clone(),
                a: b.manifest.a,
                regime: "uniform".into(),
                init_label: label,
                social_cost: best.social_cost,
                privacy_share,
                bandwidth_share: 1.0 - privacy_share,
            })?;
        }
    }
    let so = cheapest(&social);
    for (regime, run) in std::iter::once(("social", so)).chain(nash.into_iter().map(|r| ("nash", r))) {
        let report = b.report(run)?;
        let share = report.privacy_share;
        let total = report.breakdown.social_cost;
        w.push(CostOut {
            dataset: b.manifest.dataset_tag(),
            model: b.manifest.model.clone(),
            a: b.manifest.a,
            regime: regime.into(),
            init_label: run.init_label.clone(),
            social_cost: total,
            privacy_share: share,
            bandwidth_share: if total > 0.0 { 1.0 - share } else { 0.0 },
        })?;
    }
    Ok(())
}

fn ratio_rows(b: &Bundle, w: &mut Rows) -> Result<()> {
    let nash = select(b, RunObjective::Nash, None)?;
    let social = select(b, RunObjective::Social, None)?;
    let ne_costs: Vec<f64> = nash.iter().map(|r| r.social_cost).collect();
    let so_cost = cheapest(&social).social_cost;
    let ratios = poa_pos(&ne_costs, so_cost)?;
    w.push(RatioOut {
        dataset: b.manifest.dataset_tag(),
        model: b.manifest.model.clone(),
        a: b.manifest.a,
        ne_count: ne_costs.len(),
        best_ne_cost: ne_costs.iter().copied().fold(f64::INFINITY, f64::min),
        worst_ne_cost: ne_costs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        so_cost,
        poa: ratios.poa,
        pos: ratios.pos,
    })
}

fn cdf_rows(b: &Bundle, init: Option<&str>, w: &mut Rows) -> Result<()> {
    let bc = b.bc()?;
    for run in select(b, RunObjective::Nash, init)? {
        let cdf = bc_contribution_cdf(&b.record(run)?.terminal, &bc)?;
        let n = cdf.order.len() as f64;
        for (i, &u) in cdf.order.iter().enumerate() {
            w.push(CdfOut {
                dataset: b.manifest.dataset_tag(),
                model: b.manifest.model.clone(),
                a: b.manifest.a,
                init_label: run.init_label.clone(),
                prefix_fraction: (i + 1) as f64 / n,
                node_id: u,
                cumulative_bc: cdf.cumulative[i],
                cumulative_share: cdf.share[i],
            })?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn figure_names_round_trip() {
        for f in Figure::ALL {
            assert_eq!(f.name().parse::<Figure>().unwrap(), f);
        }
        assert!("fig1".parse::<Figure>().is_err());
    }
}
