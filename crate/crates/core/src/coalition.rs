//! Cooperative energy sharing: coalition cost, closed-form cost allocation,
//! internal trade prices, explicit peer-to-peer trade flows and executable
//! checks of the game's properties.
//!
//! A coalition behaves like one large house whose loads, generation and
//! storage are the member sums. Each member's share is its own net position
//! priced at the grand coalition's prices, so shares always add up to the
//! coalition cost.

use std::collections::BTreeSet;
use std::fmt;
use std::io::Write;

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::billing::{individual_cost, CaseLabel, EnergyTotals, Tariff};
use crate::money::{apportion, Cents};
use crate::profiles::HouseDay;

/// Absolute slack, in cents, for inequalities between real-valued costs.
pub const COST_TOLERANCE: f64 = 1e-6;

/// Largest grand coalition `check_core` will enumerate.
pub const MAX_CORE_HOUSES: usize = 12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoalitionError {
    #[error("a coalition needs at least one member")]
    Empty,
    #[error("house {0} appears more than once")]
    DuplicateMember(String),
    #[error("house {house_id} is dated {found}, expected {expected}")]
    MixedDates {
        house_id: String,
        expected: NaiveDate,
        found: NaiveDate,
    },
    #[error("houses do not match the coalition members")]
    Membership,
    #[error("core check enumerates 2^N coalitions; N = {0} exceeds {MAX_CORE_HOUSES}")]
    TooLarge(usize),
    #[error("scale factor must be positive and finite, got {0}")]
    BadScale(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Member {
    pub house_id: String,
    pub storage: f64,
    pub panel_area: f64,
}

/// One day of a coalition: its members and their aggregated energy totals.
#[derive(Debug, Clone, PartialEq)]
pub struct CoalitionDay {
    pub date: NaiveDate,
    pub members: Vec<Member>,
    pub totals: EnergyTotals,
    /// a_S, m².
    pub panel_area: f64,
}

impl CoalitionDay {
    /// Aggregates same-day houses. Members keep the input order.
    pub fn from_houses(houses: &[HouseDay]) -> Result<Self, CoalitionError> {
        let first = houses.first().ok_or(CoalitionError::Empty)?;
        let mut seen = BTreeSet::new();
        for h in houses {
            if !seen.insert(h.house_id.as_str()) {
                return Err(CoalitionError::DuplicateMember(h.house_id.clone()));
            }
            if h.date != first.date {
                return Err(CoalitionError::MixedDates {
                    house_id: h.house_id.clone(),
                    expected: first.date,
                    found: h.date,
                });
            }
        }
        Ok(Self {
            date: first.date,
            members: houses
                .iter()
                .map(|h| Member {
                    house_id: h.house_id.clone(),
                    storage: h.storage,
                    panel_area: h.panel_area,
                })
                .collect(),
            totals: EnergyTotals::sum(houses),
            panel_area: houses.iter().map(|h| h.panel_area).sum(),
        })
    }

    /// The same coalition with every energy aggregate and storage scaled by
    /// `alpha`. Member records are left untouched.
    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            totals: self.totals.scaled(alpha),
            ..self.clone()
        }
    }

    pub fn case(&self) -> CaseLabel {
        self.totals.case()
    }

    fn amortization(&self, t: &Tariff) -> f64 {
        self.members
            .iter()
            .map(|m| t.amortization_cost(&m.house_id, m.storage, m.panel_area))
            .sum()
    }
}

/// Daily coalition cost C(S) in real-valued cents, from the positive-part
/// net-metering form on the aggregates.
pub fn coalition_cost(c: &CoalitionDay, t: &Tariff, include_amortization: bool) -> f64 {
    let energy = c.totals.net_metering_cost(t);
    if include_amortization {
        energy + c.amortization(t)
    } else {
        energy
    }
}

/// Internal trade prices: the buy price of a period in which the coalition
/// as a whole is short (or exactly balanced), otherwise the sell price.
pub fn sharing_prices(c: &CoalitionDay, t: &Tariff) -> (f64, f64) {
    let case = c.case();
    (case.peak_price(t), case.off_peak_price(t))
}

/// Grand-coalition cost split for one day.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    pub date: NaiveDate,
    pub house_ids: Vec<String>,
    /// Shares in fixed-point cents; they sum to `grand_cost` exactly.
    pub xi: Vec<Cents>,
    /// Shares before rounding.
    pub xi_real: Vec<f64>,
    pub case: CaseLabel,
    pub grand_cost: Cents,
    pub grand_cost_real: f64,
    pub pi_h: f64,
    pub pi_l: f64,
}

impl Allocation {
    pub fn share_of(&self, house_id: &str) -> Option<Cents> {
        self.house_ids.iter().position(|h| h == house_id).map(|i| self.xi[i])
    }
}

/// Splits the grand-coalition cost: each house pays its own peak and
/// off-peak net positions at the coalition's internal prices, plus its own
/// amortization.
pub fn allocate(
    c: &CoalitionDay,
    houses: &[HouseDay],
    t: &Tariff,
    include_amortization: bool,
) -> Result<Allocation, CoalitionError> {
    let same_members = houses.len() == c.members.len()
        && houses
            .iter()
            .zip(&c.members)
            .all(|(h, m)| h.house_id == m.house_id && h.date == c.date);
    if !same_members {
        return Err(CoalitionError::Membership);
    }
    let case = c.case();
    let (pi_h, pi_l) = sharing_prices(c, t);
    let xi_real: Vec<f64> = houses
        .iter()
        .map(|h| {
            let amort = if include_amortization {
                t.amortization_cost(&h.house_id, h.storage, h.panel_area)
            } else {
                0.0
            };
            pi_h * h.peak_deficit() + pi_l * h.off_peak_deficit() + amort
        })
        .collect();
    let grand_cost_real = coalition_cost(c, t, include_amortization);
    let grand_cost = Cents::from_f64(grand_cost_real);
    Ok(Allocation {
        date: c.date,
        house_ids: houses.iter().map(|h| h.house_id.clone()).collect(),
        xi: apportion(&xi_real, grand_cost),
        xi_real,
        case,
        grand_cost,
        grand_cost_real,
        pi_h,
        pi_l,
    })
}

/// Allocates every day independently. Output is in date order.
pub fn allocate_days(
    days: &[(NaiveDate, Vec<HouseDay>)],
    t: &Tariff,
    include_amortization: bool,
) -> Result<Vec<Allocation>, CoalitionError> {
    days.par_iter()
        .map(|(_, houses)| {
            let c = CoalitionDay::from_houses(houses)?;
            allocate(&c, houses, t, include_amortization)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Period {
    Peak,
    OffPeak,
}

impl Period {
    pub fn as_str(self) -> &'static str {
        match self {
            Period::Peak => "peak",
            Period::OffPeak => "off_peak",
        }
    }
}

impl fmt::Display for Period {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trade {
    pub seller: String,
    pub buyer: String,
    pub kwh: f64,
    /// ¢/kWh.
    pub price: f64,
}

/// A house's leftover exchange with the grid after internal trades.
#[derive(Debug, Clone, PartialEq)]
pub struct GridResidual {
    pub house_id: String,
    pub purchase_kwh: f64,
    pub sale_kwh: f64,
}

/// Internal trades and grid residuals of one period of one day.
#[derive(Debug, Clone, PartialEq)]
pub struct TradeLedger {
    pub date: NaiveDate,
    pub period: Period,
    pub price: f64,
    pub grid_buy_price: f64,
    pub grid_sell_price: f64,
    pub trades: Vec<Trade>,
    /// One entry per house, in input order.
    pub residuals: Vec<GridResidual>,
}

impl TradeLedger {
    /// Net payment of each house in this period, in input order.
    pub fn payments(&self) -> Vec<f64> {
        let index = |id: &str| self.residuals.iter().position(|r| r.house_id == id).unwrap();
        let mut pay: Vec<f64> = self
            .residuals
            .iter()
            .map(|r| self.grid_buy_price * r.purchase_kwh - self.grid_sell_price * r.sale_kwh)
            .collect();
        for tr in &self.trades {
            pay[index(&tr.buyer)] += tr.kwh * tr.price;
            pay[index(&tr.seller)] -= tr.kwh * tr.price;
        }
        pay
    }

    pub fn traded_kwh(&self) -> f64 {
        self.trades.iter().map(|t| t.kwh).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DayTrades {
    pub peak: TradeLedger,
    pub off_peak: TradeLedger,
}

impl DayTrades {
    /// Net energy payment of each house over the day, in input order.
    pub fn payments(&self) -> Vec<f64> {
        self.peak
            .payments()
            .into_iter()
            .zip(self.off_peak.payments())
            .map(|(a, b)| a + b)
            .collect()
    }
}

fn match_period(
    date: NaiveDate,
    period: Period,
    houses: &[HouseDay],
    deficits: &[f64],
    price: f64,
    grid_buy_price: f64,
    grid_sell_price: f64,
) -> TradeLedger {
    let supply: f64 = deficits.iter().filter(|&&d| d < 0.0).map(|d| -d).sum();
    let demand: f64 = deficits.iter().filter(|&&d| d > 0.0).sum();
    let traded = supply.min(demand);
    let mut trades = Vec::new();
    if traded > 0.0 {
        for (j, &dj) in deficits.iter().enumerate().filter(|(_, &d)| d < 0.0) {
            for (i, &di) in deficits.iter().enumerate().filter(|(_, &d)| d > 0.0) {
                let kwh = traded * (-dj / supply) * (di / demand);
                if kwh > 0.0 {
                    trades.push(Trade {
                        seller: houses[j].house_id.clone(),
                        buyer: houses[i].house_id.clone(),
                        kwh,
                        price,
                    });
                }
            }
        }
    }
    let residuals = houses
        .iter()
        .zip(deficits)
        .map(|(h, &d)| {
            let (purchase_kwh, sale_kwh) = if d > 0.0 {
                (d - traded * d / demand, 0.0)
            } else if d < 0.0 {
                (0.0, -d - traded * -d / supply)
            } else {
                (0.0, 0.0)
            };
            GridResidual {
                house_id: h.house_id.clone(),
                purchase_kwh: purchase_kwh.max(0.0),
                sale_kwh: sale_kwh.max(0.0),
            }
        })
        .collect();
    TradeLedger {
        date,
        period,
        price,
        grid_buy_price,
        grid_sell_price,
        trades,
        residuals,
    }
}

/// Realizes the sharing as explicit flows. In each period the traded volume
/// is the smaller of total surplus and total deficit; every seller-buyer pair
/// exchanges that volume times the seller's share of supply times the
/// buyer's share of demand, at the coalition's internal price. What is left
/// settles with the grid.
pub fn match_trades(houses: &[HouseDay], t: &Tariff) -> Result<DayTrades, CoalitionError> {
    let c = CoalitionDay::from_houses(houses)?;
    let (pi_h, pi_l) = sharing_prices(&c, t);
    let peak: Vec<f64> = houses.iter().map(HouseDay::peak_deficit).collect();
    let off_peak: Vec<f64> = houses.iter().map(HouseDay::off_peak_deficit).collect();
    Ok(DayTrades {
        peak: match_period(c.date, Period::Peak, houses, &peak, pi_h, t.lambda_h(), t.mu_h()),
        off_peak: match_period(c.date, Period::OffPeak, houses, &off_peak, pi_l, t.lambda_l(), t.mu_l()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridMode {
    /// Every house settles with the grid on its own.
    Individual,
    /// The houses settle with the grid as one coalition.
    Coalition,
}

/// Energy bought from the grid, kWh.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GridImport {
    pub peak: f64,
    pub off_peak: f64,
}

impl GridImport {
    pub fn total(&self) -> f64 {
        self.peak + self.off_peak
    }
}

pub fn grid_import(houses: &[HouseDay], mode: GridMode) -> GridImport {
    match mode {
        GridMode::Individual => GridImport {
            peak: houses.iter().map(|h| h.peak_deficit().max(0.0)).sum(),
            off_peak: houses.iter().map(|h| h.off_peak_deficit().max(0.0)).sum(),
        },
        GridMode::Coalition => {
            let s = EnergyTotals::sum(houses);
            GridImport {
                peak: s.peak_deficit().max(0.0),
                off_peak: s.off_peak_deficit().max(0.0),
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub property: &'static str,
    pub detail: String,
    /// How far the inequality missed, in cents.
    pub excess: f64,
}

/// Outcome of a property check: how many inequalities were evaluated and
/// which failed.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PropertyReport {
    pub checked: usize,
    pub violations: Vec<Violation>,
}

impl PropertyReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn merge(&mut self, other: PropertyReport) {
        self.checked += other.checked;
        self.violations.extend(other.violations);
    }

    /// Records `lhs <= rhs + tolerance`.
    fn check_le(&mut self, property: &'static str, lhs: f64, rhs: f64, tolerance: f64, detail: impl FnOnce() -> String) {
        self.checked += 1;
        if !(lhs <= rhs + tolerance) {
            self.violations.push(Violation {
                property,
                detail: detail(),
                excess: lhs - rhs,
            });
        }
    }
}

/// Seeded source of random same-day households for property checks.
///
/// Loads, generation and storage are drawn so that every case label and
/// exact zero positions occur with useful frequency.
#[derive(Debug, Clone)]
pub struct InstanceSampler {
    rng: ChaCha8Rng,
    date: NaiveDate,
    next_id: usize,
}

impl InstanceSampler {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            date: NaiveDate::from_ymd_opt(2021, 1, 1).unwrap(),
            next_id: 0,
        }
    }

    fn energy(&mut self, max: f64) -> f64 {
        if self.rng.gen_bool(0.1) {
            0.0
        } else {
            self.rng.gen_range(0.0..max)
        }
    }

    pub fn house(&mut self) -> HouseDay {
        let id = self.next_id;
        self.next_id += 1;
        HouseDay {
            house_id: format!("S{id:06}"),
            date: self.date,
            peak_load: self.energy(20.0),
            off_peak_load: self.energy(12.0),
            peak_solar: self.energy(16.0),
            off_peak_solar: self.energy(6.0),
            storage: self.energy(13.5),
            panel_area: self.energy(40.0),
        }
    }

    pub fn houses(&mut self, n: usize) -> Vec<HouseDay> {
        (0..n).map(|_| self.house()).collect()
    }

    pub fn gen_range(&mut self, lo: usize, hi_inclusive: usize) -> usize {
        self.rng.gen_range(lo..=hi_inclusive)
    }

    pub fn gen_bool(&mut self, p: f64) -> bool {
        self.rng.gen_bool(p)
    }
}

fn cost_of(houses: &[&HouseDay], t: &Tariff) -> f64 {
    let owned: Vec<HouseDay> = houses.iter().map(|&h| h.clone()).collect();
    let c = CoalitionDay::from_houses(&owned).expect("sampled houses are distinct and same-day");
    coalition_cost(&c, t, false)
}

/// Draws `trials` random disjoint non-empty coalitions S and T of at most
/// `max_size` houses each and checks `C(S ∪ T) <= C(S) + C(T)`.
pub fn check_subadditivity(sampler: &mut InstanceSampler, t: &Tariff, trials: usize, max_size: usize) -> PropertyReport {
    let mut report = PropertyReport::default();
    let max_size = max_size.max(1);
    for trial in 0..trials {
        let s_len = sampler.gen_range(1, max_size);
        let t_len = sampler.gen_range(1, max_size);
        let pool = sampler.houses(s_len + t_len);
        let (s, rest) = pool.split_at(s_len);
        let s_refs: Vec<&HouseDay> = s.iter().collect();
        let t_refs: Vec<&HouseDay> = rest.iter().collect();
        let all_refs: Vec<&HouseDay> = pool.iter().collect();
        let (cs, ct, cu) = (cost_of(&s_refs, t), cost_of(&t_refs, t), cost_of(&all_refs, t));
        report.check_le("subadditivity", cu, cs + ct, COST_TOLERANCE, || {
            format!("trial {trial}: C(S)={cs}, C(T)={ct}, C(S+T)={cu}, |S|={s_len}, |T|={t_len}")
        });
    }
    report
}

/// Checks efficiency, individual rationality and every core inequality of
/// the grand-coalition allocation by enumerating all 2^N - 1 coalitions.
pub fn check_core(houses: &[HouseDay], t: &Tariff, include_amortization: bool) -> Result<PropertyReport, CoalitionError> {
    let n = houses.len();
    if n > MAX_CORE_HOUSES {
        return Err(CoalitionError::TooLarge(n));
    }
    let grand = CoalitionDay::from_houses(houses)?;
    let alloc = allocate(&grand, houses, t, include_amortization)?;
    let mut report = PropertyReport::default();

    report.checked += 1;
    let total: Cents = alloc.xi.iter().copied().sum();
    if total != alloc.grand_cost {
        report.violations.push(Violation {
            property: "efficiency",
            detail: format!("sum of shares {total} != grand cost {}", alloc.grand_cost),
            excess: (total - alloc.grand_cost).as_f64(),
        });
    }
    let real_total: f64 = alloc.xi_real.iter().sum();
    report.check_le("efficiency", (real_total - alloc.grand_cost_real).abs(), 0.0, COST_TOLERANCE, || {
        format!("real shares {real_total} vs grand cost {}", alloc.grand_cost_real)
    });

    for (i, h) in houses.iter().enumerate() {
        let alone = individual_cost(h, t, include_amortization);
        report.check_le("individual_rationality", alloc.xi_real[i], alone, COST_TOLERANCE, || {
            format!("{}: share {} > stand-alone {alone}", h.house_id, alloc.xi_real[i])
        });
    }

    for mask in 1u32..(1u32 << n) {
        let members: Vec<HouseDay> = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| houses[i].clone()).collect();
        let share: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| alloc.xi_real[i]).sum();
        let c = CoalitionDay::from_houses(&members)?;
        let cost = coalition_cost(&c, t, include_amortization);
        report.check_le("core", share, cost, COST_TOLERANCE, || {
            format!("coalition mask {mask:#b}: shares {share} > cost {cost}")
        });
    }
    Ok(report)
}

/// Checks `C(alpha S) = alpha C(S)` to 1e-9 relative, amortization excluded.
pub fn check_homogeneity(c: &CoalitionDay, t: &Tariff, alpha: f64) -> Result<PropertyReport, CoalitionError> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(CoalitionError::BadScale(alpha));
    }
    let scaled = coalition_cost(&c.scaled(alpha), t, false);
    let expected = alpha * coalition_cost(c, t, false);
    let scale = scaled.abs().max(expected.abs()).max(1.0);
    let mut report = PropertyReport::default();
    report.check_le("homogeneity", (scaled - expected).abs(), 0.0, 1e-9 * scale, || {
        format!("alpha={alpha}: C(alpha S)={scaled}, alpha C(S)={expected}")
    });
    Ok(report)
}

/// Writes `date,house_id,xi_cents,case,pi_h,pi_l` rows.
pub fn write_allocation_csv<W: Write>(w: W, allocations: &[Allocation]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(["date", "house_id", "xi_cents", "case", "pi_h", "pi_l"])?;
    for a in allocations {
        for (id, xi) in a.house_ids.iter().zip(&a.xi) {
            w.write_record([
                a.date.to_string(),
                id.clone(),
                xi.cents_string(),
                a.case.to_string(),
                format!("{:.2}", a.pi_h),
                format!("{:.2}", a.pi_l),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes `date,period,seller,buyer,kwh,price` rows.
pub fn write_ledger_csv<W: Write>(w: W, days: &[DayTrades]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(["date", "period", "seller", "buyer", "kwh", "price"])?;
    for d in days {
        for ledger in [&d.peak, &d.off_peak] {
            for tr in &ledger.trades {
                w.write_record([
                    ledger.date.to_string(),
                    ledger.period.to_string(),
                    tr.seller.clone(),
                    tr.buyer.clone(),
                    format!("{:.9}", tr.kwh),
                    format!("{:.2}", tr.price),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
