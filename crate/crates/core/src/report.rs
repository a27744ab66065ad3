//! JSON cost reports.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bound::{theorem_bound, unrounded_bound, BoundKind, BoundParams};
use crate::engine::{JobResult, Mode};
use crate::error::Result;
use crate::ledger::{Channel, ChannelCosts, CostLedger};
use crate::model::CostModel;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelReport {
    pub metadata: u64,
    pub data: u64,
    pub total: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundReport {
    pub label: String,
    pub total: u64,
    pub channels: BTreeMap<String, ChannelReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportParams {
    pub n: u64,
    pub c: u64,
    pub w: u64,
    pub h: u64,
    pub r: f64,
    pub k: u64,
    pub p: u64,
    pub m: u64,
    pub q: u64,
    pub deliveries: u64,
    pub schema_replication: f64,
    pub digest_bits: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub kind: BoundKind,
    pub bound: f64,
    pub bound_unrounded: f64,
    /// Ledger amount the bound is compared with.
    pub measured: u64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub mode: Mode,
    pub unit: String,
    pub channels: BTreeMap<String, ChannelReport>,
    pub rounds: Vec<RoundReport>,
    pub total: u64,
    pub metadata_total: u64,
    pub data_total: u64,
    pub theorem_relevant: u64,
    pub map_to_reduce_participating: u64,
    /// Metadata moved, as counts; in unit-cost runs this is the constant left out of the totals.
    pub metadata_records: u64,
    pub signals: u64,
    pub params: ReportParams,
    pub bounds: Vec<BoundReport>,
    pub classic_total: Option<u64>,
    pub savings: Option<i64>,
    pub rehash_count: u32,
    pub discarded_attempts: usize,
    pub discarded_total: u64,
    pub rounds_executed: usize,
    pub outputs: u64,
    pub fetched: u64,
}

/// What a report needs beyond the run itself.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ReportContext {
    pub q: u64,
    pub cost: CostModel,
    pub bounds: Vec<BoundKind>,
    /// Total of the same job in classic mode, for the savings line.
    pub classic_total: Option<u64>,
}

fn channels(costs: &ChannelCosts) -> BTreeMap<String, ChannelReport> {
    Channel::ALL
        .iter()
        .map(|&c| {
            (
                c.name().to_string(),
                ChannelReport {
                    metadata: costs.metadata(c),
                    data: costs.data(c),
                    total: costs.channel(c),
                },
            )
        })
        .collect()
}

/// Amount a bound of `kind` is compared with: everything for the classic
/// column, the bound-relevant part for the metadata column.
pub fn measured_for(kind: BoundKind, ledger: &CostLedger) -> u64 {
    if kind.is_classic() {
        ledger.total()
    } else {
        ledger.theorem_relevant()
    }
}

pub fn build_report(result: &JobResult, mode: Mode, ctx: &ReportContext) -> Result<CostReport> {
    let l = &result.ledger;
    let s = &result.stats;
    let mut bounds = Vec::new();
    for &kind in &ctx.bounds {
        let mut params = BoundParams::from_stats(s);
        match kind {
            BoundKind::ClassicSkew => params.r = Some(s.schema_replication),
            // a multi-round job ships a joining tuple's record once per round it reaches
            BoundKind::Multiway => params.h = Some(s.deliveries),
            _ => {}
        }
        let bound = theorem_bound(kind, &params)?;
        let measured = measured_for(kind, l);
        bounds.push(BoundReport {
            kind,
            bound,
            bound_unrounded: unrounded_bound(kind, &params)?,
            measured,
            holds: measured as f64 <= bound * (1.0 + 1e-12),
        });
    }
    Ok(CostReport {
        mode,
        unit: ctx.cost.unit_name().to_string(),
        channels: channels(l.costs()),
        rounds: l
            .rounds()
            .iter()
            .map(|r| RoundReport {
                label: r.label.clone(),
                total: r.costs.total(),
                channels: channels(&r.costs),
            })
            .collect(),
        total: l.total(),
        metadata_total: l.metadata_total(),
        data_total: l.data_total(),
        theorem_relevant: l.theorem_relevant(),
        map_to_reduce_participating: l.map_to_reduce_participating(),
        metadata_records: l.metadata_records(),
        signals: l.signals(),
        params: ReportParams {
            n: s.n,
            c: s.c,
            w: s.w,
            h: s.h,
            r: s.replication,
            k: s.k,
            p: s.p,
            m: s.m,
            q: ctx.q,
            deliveries: s.deliveries,
            schema_replication: s.schema_replication,
            digest_bits: s.digest_bits,
        },
        bounds,
        classic_total: ctx.classic_total,
        savings: ctx.classic_total.map(|c| c as i64 - l.total() as i64),
        rehash_count: result.rehash_count,
        discarded_attempts: result.discarded.len(),
        discarded_total: result.discarded.iter().map(CostLedger::total).sum(),
        rounds_executed: result.rounds_executed,
        outputs: result.outputs.len() as u64,
        fetched: result.fetched.len() as u64,
    })
}

pub fn report_json(report: &CostReport) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report)?;
    s.push('\n');
    Ok(s)
}

/// Builds the report and, given a path, writes it as JSON.
pub fn emit_report(
    result: &JobResult,
    mode: Mode,
    ctx: &ReportContext,
    path: Option<&Path>,
) -> Result<CostReport> {
    let report = build_report(result, mode, ctx)?;
    if let Some(p) = path {
        fs::write(p, report_json(&report)?)?;
    }
    Ok(report)
}
