//! The four pipeline stages and their shared inputs.
//!
//! Outputs land in the configured directory:
//!
//! | stage        | files |
//! |--------------|-------|
//! | `partition`  | `partition.csv`, `microgrids.csv`, `enumerated.csv` (when enumerating) |
//! | `resilience` | `resilience.csv`, `curves/<block>_<variant>.csv` |
//! | `trade`      | `bills.csv`, `bills_without_der.csv`, `allocation.csv`, `ledger.csv`, `savings_houses.csv`, `savings_stats.csv`, `savings_monthly.csv`, `grid_import.csv` |
//! | `compare`    | `compare.csv`, `curves/grid_<scenario>.csv` |

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context};
use chrono::NaiveDate;
use gridshare_core::billing::{bill_without_der, cost_with_der, write_bills_csv, DailyBill};
use gridshare_core::coalition::{
    allocate_days, grid_import, match_trades, write_allocation_csv, write_ledger_csv, Allocation, DayTrades, GridMode,
};
use gridshare_core::feeder::{
    enumerate_partitions, is_self_sufficient, load_switch_config, partition, read_house_map, EnergyBalance,
    FeederTopology, Partition,
};
use gridshare_core::graphs::{correlation_network, visibility_graph};
use gridshare_core::percolation::{percolation_curve, percolation_threshold, PercolationCurve};
use gridshare_core::profiles::{
    aggregate_daily, group_by_date, house_series, ingest_csv, synthesize_profiles, HouseSeries,
};
use gridshare_core::{HouseAssets, HouseDay, IntervalRecord};
use log::{info, warn};

use crate::config::{GridSeries, InputSource, RunConfig};
use crate::report::{read_grid_csv, write_atomic, write_grid_csv, DailyCosts, GridPoint, SavingsReport, ScenarioCosts};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Partition,
    Resilience,
    Trade,
    Compare,
    All,
}

/// Power series used to build a block's correlation network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Load minus solar.
    WithDer,
    /// Load only.
    WithoutDer,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::WithDer => "with_der",
            Variant::WithoutDer => "without_der",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResilienceEntry {
    pub block: usize,
    pub variant: Variant,
    pub houses: usize,
    pub vertices: usize,
    pub edges: usize,
    /// Threshold, or why there is none.
    pub rho_c: Result<f64, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TradeOutcome {
    pub block: usize,
    pub house_ids: Vec<String>,
    pub report: SavingsReport,
    pub grid: Vec<GridPoint>,
    /// Largest gap between a house's trade-ledger payment and its share, ¢.
    pub max_ledger_gap: f64,
    pub days: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub scenario: &'static str,
    pub grid_import_kwh: f64,
    pub rho_c: Result<f64, String>,
}

/// Everything a run produced, for callers that inspect results directly.
#[derive(Debug, Default)]
pub struct RunSummary {
    pub partition: Option<Partition>,
    pub resilience: Option<Vec<ResilienceEntry>>,
    pub selected_block: Option<usize>,
    pub trade: Option<TradeOutcome>,
    pub compare: Option<Vec<CompareRow>>,
}

struct Dataset {
    records: Vec<IntervalRecord>,
    days: Vec<HouseDay>,
}

struct FeederData {
    topology: FeederTopology,
    partition: Partition,
    /// house id -> node id
    houses: BTreeMap<String, String>,
}

/// Lazily loaded inputs shared between stages of one run.
pub struct Session {
    cfg: RunConfig,
    dataset: Option<Dataset>,
    feeder: Option<FeederData>,
    summary: RunSummary,
}

impl Session {
    pub fn new(cfg: RunConfig) -> Self {
        Self {
            cfg,
            dataset: None,
            feeder: None,
            summary: RunSummary::default(),
        }
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    fn out(&self, name: &str) -> PathBuf {
        self.cfg.output_dir.join(name)
    }

    fn dataset(&mut self) -> anyhow::Result<&Dataset> {
        if self.dataset.is_none() {
            let (records, assets): (Vec<IntervalRecord>, Vec<HouseAssets>) = match &self.cfg.input {
                InputSource::Synthetic { n_houses, days, params } => {
                    info!("synthesizing {n_houses} houses over {days} days");
                    synthesize_profiles(*n_houses, *days, self.cfg.seed, params)?
                }
                InputSource::Csv { intervals, assets } => {
                    info!("reading {}", intervals.display());
                    ingest_csv(intervals, assets)?
                }
            };
            let days = aggregate_daily(&records, &assets, &self.cfg.period_spec()?)?;
            self.dataset = Some(Dataset { records, days });
        }
        Ok(self.dataset.as_ref().unwrap())
    }

    fn feeder(&mut self) -> anyhow::Result<&FeederData> {
        if self.feeder.is_none() {
            let dir = &self.cfg.feeder.asset_dir;
            let topology = FeederTopology::load_dir(dir)?;
            let states = load_switch_config(dir, &self.cfg.feeder.switch_config)?;
            let partition = partition(&topology, &states)?;
            let house_path = dir.join("houses.csv");
            let houses = if house_path.is_file() {
                read_house_map(&house_path, &topology)?
            } else {
                BTreeMap::new()
            };
            self.feeder = Some(FeederData {
                topology,
                partition,
                houses,
            });
        }
        Ok(self.feeder.as_ref().unwrap())
    }

    /// House ids attached to each block, restricted to houses with data.
    fn block_houses(&mut self) -> anyhow::Result<Vec<Vec<String>>> {
        self.dataset()?;
        self.feeder()?;
        let data = self.dataset.as_ref().unwrap();
        let feeder = self.feeder.as_ref().unwrap();
        let known: std::collections::BTreeSet<&str> = data.days.iter().map(|d| d.house_id.as_str()).collect();
        let mut out = vec![Vec::new(); feeder.partition.len()];
        let mut missing = 0;
        for (house, node) in &feeder.houses {
            if !known.contains(house.as_str()) {
                missing += 1;
                continue;
            }
            if let Some(b) = feeder.partition.block_of(node) {
                out[b].push(house.clone());
            }
        }
        if missing > 0 {
            warn!("{missing} mapped houses have no profile data and are ignored");
        }
        Ok(out)
    }

    pub fn run(mut self, cmd: Command) -> anyhow::Result<RunSummary> {
        std::fs::create_dir_all(&self.cfg.output_dir)
            .with_context(|| format!("creating {}", self.cfg.output_dir.display()))?;
        match cmd {
            Command::Partition => self.cmd_partition()?,
            Command::Resilience => self.cmd_resilience()?,
            Command::Trade => self.cmd_trade()?,
            Command::Compare => self.cmd_compare()?,
            Command::All => {
                self.cmd_partition()?;
                self.cmd_resilience()?;
                self.cmd_trade()?;
                self.cmd_compare()?;
            }
        }
        Ok(self.summary)
    }

    pub fn cmd_partition(&mut self) -> anyhow::Result<()> {
        let block_houses = if self.feeder()?.houses.is_empty() {
            None
        } else {
            Some(self.block_houses()?)
        };
        let feeder = self.feeder.as_ref().unwrap();
        let p = feeder.partition.clone();
        info!("partition has {} blocks", p.len());
        write_atomic(&self.out("partition.csv"), |w| Ok(p.write_csv(w)?))?;
        write_atomic(&self.out("microgrids.csv"), |w| {
            let mut w = csv::Writer::from_writer(w);
            w.write_record(["block", "nodes", "houses", "first_node"])?;
            for (i, b) in p.blocks.iter().enumerate() {
                let houses = block_houses.as_ref().map_or(0, |h| h[i].len());
                w.write_record([Partition::label(i), b.len().to_string(), houses.to_string(), b[0].clone()])?;
            }
            w.flush()?;
            Ok(())
        })?;

        if let Some(limit) = self.cfg.feeder.enumerate {
            let all = enumerate_partitions(&feeder.topology, limit)?;
            info!("enumerated {} distinct partitions", all.len());
            let sufficiency = match self.cfg.feeder.self_sufficiency_fraction {
                Some(f) => {
                    let house_nodes = self.feeder.as_ref().unwrap().houses.clone();
                    let mut energy: BTreeMap<String, EnergyBalance> = BTreeMap::new();
                    for r in &self.dataset()?.records {
                        let e = energy.entry(r.house_id.clone()).or_default();
                        e.generation += r.solar_kwh;
                        e.consumption += r.load_kwh;
                    }
                    Some(all.iter().map(|p| is_self_sufficient(p, &house_nodes, &energy, f)).collect::<Vec<_>>())
                }
                None => None,
            };
            write_atomic(&self.out("enumerated.csv"), |w| {
                let mut w = csv::Writer::from_writer(w);
                w.write_record(["index", "blocks", "closed_switches", "self_sufficient"])?;
                for (i, p) in all.iter().enumerate() {
                    let closed: Vec<&str> = p
                        .provenance
                        .iter()
                        .filter(|(_, s)| *s == gridshare_core::SwitchState::Closed)
                        .map(|(l, _)| l.as_str())
                        .collect();
                    let ss = sufficiency.as_ref().map_or(String::new(), |v| v[i].to_string());
                    w.write_record([i.to_string(), p.len().to_string(), closed.join(";"), ss])?;
                }
                w.flush()?;
                Ok(())
            })?;
        }
        self.summary.partition = Some(p);
        Ok(())
    }

    fn resilience_entries(&mut self) -> anyhow::Result<(Vec<ResilienceEntry>, Vec<(String, PercolationCurve)>)> {
        let block_houses = self.block_houses()?;
        let series: BTreeMap<String, HouseSeries> = house_series(&self.dataset()?.records);
        let pcfg = self.cfg.percolation_config()?;
        let corr = self.cfg.correlation;
        let mut entries = Vec::new();
        let mut curves = Vec::new();
        for (b, houses) in block_houses.iter().enumerate() {
            for variant in [Variant::WithDer, Variant::WithoutDer] {
                let mut entry = ResilienceEntry {
                    block: b,
                    variant,
                    houses: houses.len(),
                    vertices: houses.len(),
                    edges: 0,
                    rho_c: Err(String::new()),
                };
                if houses.len() < 2 {
                    warn!("{} has {} houses; skipped", Partition::label(b), houses.len());
                    entry.rho_c = Err(format!("skipped: {} houses", houses.len()));
                    entries.push(entry);
                    continue;
                }
                let rows: Vec<Vec<f64>> = houses
                    .iter()
                    .map(|h| match variant {
                        Variant::WithDer => series[h].net(),
                        Variant::WithoutDer => series[h].load.clone(),
                    })
                    .collect();
                let g = correlation_network(&rows, corr.threshold, corr.abs_correlation)?;
                entry.edges = g.edge_count();
                entry.rho_c = match percolation_curve(&g, &pcfg) {
                    Ok(curve) => {
                        let r = percolation_threshold(&curve).map_err(|e| format!("failed: {e}"));
                        curves.push((format!("{}_{}", Partition::label(b), variant.as_str()), curve));
                        r
                    }
                    Err(e) => Err(format!("failed: {e}")),
                };
                info!("{} {}: {:?}", Partition::label(b), variant.as_str(), entry.rho_c);
                entries.push(entry);
            }
        }
        Ok((entries, curves))
    }

    pub fn cmd_resilience(&mut self) -> anyhow::Result<()> {
        let (entries, curves) = self.resilience_entries()?;
        let best = most_resilient(&entries);
        for (name, curve) in &curves {
            write_atomic(&self.out(&format!("curves/{name}.csv")), |w| Ok(curve.write_csv(w)?))?;
        }
        write_atomic(&self.out("resilience.csv"), |w| {
            let mut w = csv::Writer::from_writer(w);
            w.write_record(["block", "variant", "houses", "V", "E", "rho_c", "most_resilient"])?;
            for e in &entries {
                let flag = e.variant == Variant::WithDer && Some(e.block) == best;
                w.write_record([
                    Partition::label(e.block),
                    e.variant.as_str().to_string(),
                    e.houses.to_string(),
                    e.vertices.to_string(),
                    e.edges.to_string(),
                    match &e.rho_c {
                        Ok(r) => format!("{r:.5}"),
                        Err(m) => m.clone(),
                    },
                    if flag { "yes" } else { "" }.to_string(),
                ])?;
            }
            w.flush()?;
            Ok(())
        })?;
        self.summary.resilience = Some(entries);
        Ok(())
    }

    fn selected_block(&mut self) -> anyhow::Result<usize> {
        let sel = self.cfg.selected_microgrid.clone();
        let blocks = self.feeder()?.partition.len();
        let b = if sel == "auto" {
            if self.summary.resilience.is_none() {
                self.summary.resilience = Some(self.resilience_entries()?.0);
            }
            most_resilient(self.summary.resilience.as_ref().unwrap())
                .ok_or_else(|| anyhow!("no block has a percolation threshold to select by"))?
        } else {
            let n: usize = sel.trim_start_matches("MG-").parse()?;
            if n == 0 || n > blocks {
                return Err(crate::ValidationError(format!("{sel} does not exist; the partition has {blocks} blocks")).into());
            }
            n - 1
        };
        self.summary.selected_block = Some(b);
        Ok(b)
    }

    pub fn cmd_trade(&mut self) -> anyhow::Result<()> {
        let block = self.selected_block()?;
        let house_ids = self.block_houses()?[block].clone();
        if house_ids.is_empty() {
            bail!("{} has no houses with profile data", Partition::label(block));
        }
        info!("trading in {} with {} houses", Partition::label(block), house_ids.len());
        let tariff = self.cfg.tariff()?;
        let amort = self.cfg.include_amortization;
        let members: std::collections::BTreeSet<&str> = house_ids.iter().map(String::as_str).collect();
        let selected: Vec<HouseDay> = self
            .dataset()?
            .days
            .iter()
            .filter(|d| members.contains(d.house_id.as_str()))
            .cloned()
            .collect();
        let by_date: Vec<(NaiveDate, Vec<HouseDay>)> = group_by_date(&selected).into_iter().collect();
        if by_date.is_empty() {
            bail!("no complete days of data for the selected microgrid");
        }

        let allocations: Vec<Allocation> = allocate_days(&by_date, &tariff, amort)?;
        let mut bills: Vec<DailyBill> = Vec::new();
        let mut bills_without_der: Vec<DailyBill> = Vec::new();
        let mut entries = Vec::new();
        let mut trades: Vec<DayTrades> = Vec::new();
        let mut grid = Vec::new();
        let mut max_gap: f64 = 0.0;
        for ((date, houses), alloc) in by_date.iter().zip(&allocations) {
            let day_trades = match_trades(houses, &tariff)?;
            let payments = day_trades.payments();
            for (i, h) in houses.iter().enumerate() {
                let without = bill_without_der(h, &tariff);
                let with = cost_with_der(h, &tariff, amort);
                let amort_i = if amort {
                    tariff.amortization_cost(&h.house_id, h.storage, h.panel_area)
                } else {
                    0.0
                };
                max_gap = max_gap.max((payments[i] + amort_i - alloc.xi[i].as_f64()).abs());
                entries.push(DailyCosts {
                    house_id: h.house_id.clone(),
                    date: *date,
                    costs: ScenarioCosts {
                        without_der: without.cost,
                        without_sharing: with.cost,
                        with_sharing: alloc.xi[i],
                    },
                });
                bills_without_der.push(without);
                bills.push(with);
            }
            trades.push(day_trades);
            let ind = grid_import(houses, GridMode::Individual);
            let coa = grid_import(houses, GridMode::Coalition);
            match self.cfg.grid_series {
                GridSeries::Period => {
                    grid.push(GridPoint { date: *date, period: "peak".into(), individual: ind.peak, coalition: coa.peak });
                    grid.push(GridPoint {
                        date: *date,
                        period: "off_peak".into(),
                        individual: ind.off_peak,
                        coalition: coa.off_peak,
                    });
                }
                GridSeries::Daily => grid.push(GridPoint {
                    date: *date,
                    period: "day".into(),
                    individual: ind.total(),
                    coalition: coa.total(),
                }),
            }
        }
        if max_gap > 1.0 {
            warn!("trade ledger deviates from shares by up to {max_gap:.4} cents");
        }
        let report = SavingsReport::build(&entries, self.cfg.savings_denominator);
        for p in report.consistency_problems() {
            warn!("savings report: {p}");
        }
        let total = report.total();
        info!(
            "totals: without DER {}, without sharing {}, with sharing {} ({:.2}% savings)",
            total.without_der.dollars_string(),
            total.without_sharing.dollars_string(),
            total.with_sharing.dollars_string(),
            total.savings_pct(self.cfg.savings_denominator)
        );

        write_atomic(&self.out("bills.csv"), |w| Ok(write_bills_csv(w, &bills)?))?;
        write_atomic(&self.out("bills_without_der.csv"), |w| Ok(write_bills_csv(w, &bills_without_der)?))?;
        write_atomic(&self.out("allocation.csv"), |w| Ok(write_allocation_csv(w, &allocations)?))?;
        write_atomic(&self.out("ledger.csv"), |w| Ok(write_ledger_csv(w, &trades)?))?;
        write_atomic(&self.out("savings_houses.csv"), |w| report.write_houses_csv(w))?;
        write_atomic(&self.out("savings_stats.csv"), |w| report.write_stats_csv(w))?;
        write_atomic(&self.out("savings_monthly.csv"), |w| report.write_monthly_csv(w))?;
        write_atomic(&self.out("grid_import.csv"), |w| write_grid_csv(w, &grid))?;

        self.summary.trade = Some(TradeOutcome {
            block,
            house_ids,
            report,
            grid,
            max_ledger_gap: max_gap,
            days: by_date.len(),
        });
        Ok(())
    }

    pub fn cmd_compare(&mut self) -> anyhow::Result<()> {
        let path = self.out("grid_import.csv");
        if !path.is_file() {
            bail!("{} not found; run `trade` first", path.display());
        }
        let points = read_grid_csv(&path)?;
        if points.len() < 2 {
            bail!("grid-import series needs at least 2 points");
        }
        let pcfg = self.cfg.percolation_config()?;
        let mut rows = Vec::new();
        for (scenario, series) in [
            ("without_p2p", points.iter().map(|p| p.individual).collect::<Vec<f64>>()),
            ("with_p2p", points.iter().map(|p| p.coalition).collect()),
        ] {
            let total: f64 = series.iter().sum();
            let rho_c = if series.iter().all(|&v| v == series[0]) {
                warn!("{scenario} grid-import series is constant");
                Err("degenerate: constant series".to_string())
            } else {
                let g = visibility_graph(&series, None)?;
                match percolation_curve(&g, &pcfg) {
                    Ok(curve) => {
                        write_atomic(&self.out(&format!("curves/grid_{scenario}.csv")), |w| Ok(curve.write_csv(w)?))?;
                        percolation_threshold(&curve).map_err(|e| format!("failed: {e}"))
                    }
                    Err(e) => Err(format!("failed: {e}")),
                }
            };
            info!("{scenario}: import {total:.3} kWh, rho_c {rho_c:?}");
            rows.push(CompareRow {
                scenario,
                grid_import_kwh: total,
                rho_c,
            });
        }
        write_atomic(&self.out("compare.csv"), |w| {
            let mut w = csv::Writer::from_writer(w);
            w.write_record(["scenario", "grid_import_kwh", "rho_c"])?;
            let fmt_rho = |r: &Result<f64, String>| match r {
                Ok(v) => format!("{v:.5}"),
                Err(m) => m.clone(),
            };
            for r in &rows {
                w.write_record([r.scenario.to_string(), format!("{:.3}", r.grid_import_kwh), fmt_rho(&r.rho_c)])?;
            }
            let (a, b) = (&rows[0], &rows[1]);
            let rel = |x: f64, y: f64| if x == 0.0 { "".to_string() } else { format!("{:.2}", 100.0 * (y - x) / x) };
            let (rho_delta, rho_pct) = match (&a.rho_c, &b.rho_c) {
                (Ok(x), Ok(y)) => (format!("{:.5}", y - x), rel(*x, *y)),
                _ => (String::new(), String::new()),
            };
            w.write_record([
                "delta".to_string(),
                format!("{:.3}", b.grid_import_kwh - a.grid_import_kwh),
                rho_delta,
            ])?;
            w.write_record([
                "change_pct".to_string(),
                rel(a.grid_import_kwh, b.grid_import_kwh),
                rho_pct,
            ])?;
            w.flush()?;
            Ok(())
        })?;
        self.summary.compare = Some(rows);
        Ok(())
    }
}

/// Block whose with-DER network has the highest threshold; ties go to the
/// lower block index.
pub fn most_resilient(entries: &[ResilienceEntry]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for e in entries.iter().filter(|e| e.variant == Variant::WithDer) {
        if let Ok(r) = e.rho_c {
            if best.is_none_or(|(_, b)| r > b) {
                best = Some((e.block, r));
            }
        }
    }
    best.map(|(b, _)| b)
}

/// Runs one command with the given configuration.
pub fn run(cmd: Command, cfg: RunConfig) -> anyhow::Result<RunSummary> {
    Session::new(cfg).run(cmd)
}

