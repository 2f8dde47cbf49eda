//! Savings and grid-import reports, and atomic file output.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use anyhow::Context;
use chrono::{Datelike, NaiveDate};
use gridshare_core::Cents;

use crate::config::SavingsDenominator;

/// Writes a file through a temporary sibling and renames it into place, so
/// readers never observe a partial file.
pub fn write_atomic<F>(path: &Path, write: F) -> anyhow::Result<()>
where
    F: FnOnce(&mut dyn Write) -> anyhow::Result<()>,
{
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("temp file in {}", dir.display()))?;
    {
        let mut buf = std::io::BufWriter::new(tmp.as_file_mut());
        write(&mut buf)?;
        buf.flush()?;
    }
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Costs of one house (or a total) under the three scenarios.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScenarioCosts {
    pub without_der: Cents,
    pub without_sharing: Cents,
    pub with_sharing: Cents,
}

impl ScenarioCosts {
    pub fn savings(&self) -> Cents {
        self.without_sharing - self.with_sharing
    }

    /// Savings as a percentage of the magnitude of the chosen baseline;
    /// zero when the baseline is zero.
    pub fn savings_pct(&self, denominator: SavingsDenominator) -> f64 {
        let base = match denominator {
            SavingsDenominator::WithoutSharing => self.without_sharing,
            SavingsDenominator::WithoutDer => self.without_der,
        };
        if base == Cents::ZERO {
            0.0
        } else {
            100.0 * self.savings().as_f64() / base.abs().as_f64()
        }
    }

    fn add(&mut self, o: &ScenarioCosts) {
        self.without_der += o.without_der;
        self.without_sharing += o.without_sharing;
        self.with_sharing += o.with_sharing;
    }
}

/// One house-day entry feeding the savings report.
#[derive(Debug, Clone)]
pub struct DailyCosts {
    pub house_id: String,
    pub date: NaiveDate,
    pub costs: ScenarioCosts,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SavingsReport {
    pub denominator: SavingsDenominator,
    /// Yearly totals per house, by house id.
    pub houses: BTreeMap<String, ScenarioCosts>,
    /// Microgrid totals per calendar month (`YYYY-MM`).
    pub months: BTreeMap<String, ScenarioCosts>,
}

impl SavingsReport {
    pub fn build(entries: &[DailyCosts], denominator: SavingsDenominator) -> Self {
        let mut houses: BTreeMap<String, ScenarioCosts> = BTreeMap::new();
        let mut months: BTreeMap<String, ScenarioCosts> = BTreeMap::new();
        for e in entries {
            houses.entry(e.house_id.clone()).or_default().add(&e.costs);
            let month = format!("{:04}-{:02}", e.date.year(), e.date.month());
            months.entry(month).or_default().add(&e.costs);
        }
        Self {
            denominator,
            houses,
            months,
        }
    }

    pub fn total(&self) -> ScenarioCosts {
        let mut t = ScenarioCosts::default();
        for c in self.houses.values() {
            t.add(c);
        }
        t
    }

    /// Internal consistency problems; empty when the report is sound.
    pub fn consistency_problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        let total = self.total();
        let mut monthly = ScenarioCosts::default();
        for c in self.months.values() {
            monthly.add(c);
        }
        if monthly != total {
            out.push(format!("monthly totals {monthly:?} differ from house totals {total:?}"));
        }
        let savings: Cents = self.houses.values().map(ScenarioCosts::savings).sum();
        if savings != total.savings() {
            out.push(format!("house savings sum {savings} differs from total savings {}", total.savings()));
        }
        out
    }

    /// `house_id,without_der,without_sharing,with_sharing,savings,savings_pct,savings_pct_without_sharing,savings_pct_without_der`
    /// in dollars and percent.
    pub fn write_houses_csv(&self, w: &mut dyn Write) -> anyhow::Result<()> {
        let mut w = csv::Writer::from_writer(w);
        w.write_record([
            "house_id",
            "without_der",
            "without_sharing",
            "with_sharing",
            "savings",
            "savings_pct",
            "savings_pct_without_sharing",
            "savings_pct_without_der",
        ])?;
        let total = self.total();
        for (id, c) in self.houses.iter().chain([(&"Total".to_string(), &total)]) {
            w.write_record([
                id.clone(),
                c.without_der.dollars_string(),
                c.without_sharing.dollars_string(),
                c.with_sharing.dollars_string(),
                c.savings().dollars_string(),
                pct(c.savings_pct(self.denominator)),
                pct(c.savings_pct(SavingsDenominator::WithoutSharing)),
                pct(c.savings_pct(SavingsDenominator::WithoutDer)),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Descriptive statistics over houses: mean, min, quartiles, max.
    pub fn write_stats_csv(&self, w: &mut dyn Write) -> anyhow::Result<()> {
        let col = |f: &dyn Fn(&ScenarioCosts) -> f64| -> Vec<f64> { self.houses.values().map(f).collect() };
        let columns = [
            col(&|c| c.without_der.as_dollars()),
            col(&|c| c.without_sharing.as_dollars()),
            col(&|c| c.with_sharing.as_dollars()),
            col(&|c| c.savings().as_dollars()),
            col(&|c| c.savings_pct(self.denominator)),
        ];
        let mut w = csv::Writer::from_writer(w);
        w.write_record(["statistic", "without_der", "without_sharing", "with_sharing", "savings", "savings_pct"])?;
        for stat in ["mean", "min", "q1", "median", "q3", "max"] {
            let mut row = vec![stat.to_string()];
            row.extend(columns.iter().map(|v| format!("{:.2}", describe(v, stat))));
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Monthly microgrid totals in dollars plus a `Total` row. Negative
    /// values are net credits.
    pub fn write_monthly_csv(&self, w: &mut dyn Write) -> anyhow::Result<()> {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(["month", "without_der", "without_sharing", "with_sharing", "savings", "savings_pct"])?;
        let total = self.total();
        for (m, c) in self.months.iter().chain([(&"Total".to_string(), &total)]) {
            w.write_record([
                m.clone(),
                c.without_der.dollars_string(),
                c.without_sharing.dollars_string(),
                c.with_sharing.dollars_string(),
                c.savings().dollars_string(),
                pct(c.savings_pct(self.denominator)),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn pct(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

/// Summary statistic over `values`; quartiles interpolate linearly between
/// order statistics. Empty input gives 0.
pub fn describe(values: &[f64], stat: &str) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let h = p * (v.len() - 1) as f64;
        let lo = h.floor() as usize;
        let hi = h.ceil() as usize;
        v[lo] + (h - lo as f64) * (v[hi] - v[lo])
    };
    match stat {
        "mean" => v.iter().sum::<f64>() / v.len() as f64,
        "min" => v[0],
        "q1" => q(0.25),
        "median" => q(0.5),
        "q3" => q(0.75),
        "max" => v[v.len() - 1],
        other => panic!("unknown statistic {other}"),
    }
}

/// Grid import of the selected microgrid at one point of the series, kWh.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub date: NaiveDate,
    /// `peak`, `off_peak` or `day`.
    pub period: String,
    pub individual: f64,
    pub coalition: f64,
}

pub const GRID_IMPORT_HEADER: [&str; 4] = ["date", "period", "individual_kwh", "coalition_kwh"];

pub fn write_grid_csv(w: &mut dyn Write, points: &[GridPoint]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(GRID_IMPORT_HEADER)?;
    for p in points {
        w.write_record([
            p.date.to_string(),
            p.period.clone(),
            format!("{:.6}", p.individual),
            format!("{:.6}", p.coalition),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_grid_csv(path: &Path) -> anyhow::Result<Vec<GridPoint>> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    anyhow::ensure!(header == GRID_IMPORT_HEADER, "{}: unexpected header {}", path.display(), header.join(","));
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let ctx = || format!("{} row {}", path.display(), i + 2);
        out.push(GridPoint {
            date: rec[0].parse().with_context(ctx)?,
            period: rec[1].to_string(),
            individual: rec[2].parse().with_context(ctx)?,
            coalition: rec[3].parse().with_context(ctx)?,
        });
    }
    Ok(out)
}
