//! Net-metering tariff with time-of-use prices and individual household bills.
//!
//! A house first covers its peak consumption from storage and solar, buying
//! any deficit at `lambda_h` and selling any excess at `mu_h`. Off-peak it
//! recharges the full storage capacity and covers consumption from solar,
//! buying at `lambda_l` and selling at `mu_l`. Storage is ideal and fully
//! cycled once per day.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::money::Cents;
use crate::profiles::HouseDay;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TariffError {
    #[error("{name} = {value} must be finite and non-negative")]
    BadPrice { name: &'static str, value: f64 },
    #[error("pricing condition violated: {0}")]
    Condition(&'static str),
}

/// A price in hundredths of a cent per unit (kWh, kWh-day or m²-day).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Price(i64);

impl Price {
    pub fn from_cents(name: &'static str, cents: f64) -> Result<Self, TariffError> {
        if !cents.is_finite() || cents < 0.0 {
            return Err(TariffError::BadPrice { name, value: cents });
        }
        Ok(Price((cents * 100.0).round() as i64))
    }

    pub fn cents(self) -> f64 {
        self.0 as f64 / 100.0
    }
}

/// Daily amortization prices for storage (¢ per kWh-day) and panels
/// (¢ per m²-day).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Amortization {
    pub storage: Price,
    pub panel: Price,
}

/// Plain-number view of a tariff, as it appears in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TariffRates {
    pub lambda_h: f64,
    pub lambda_l: f64,
    pub mu_h: f64,
    pub mu_l: f64,
    #[serde(default)]
    pub lambda_b: f64,
    #[serde(default)]
    pub lambda_a: f64,
}

impl Default for TariffRates {
    /// 54/22 ¢/kWh to buy and 30/13 ¢/kWh to sell, no amortization.
    fn default() -> Self {
        Self {
            lambda_h: 54.0,
            lambda_l: 22.0,
            mu_h: 30.0,
            mu_l: 13.0,
            lambda_b: 0.0,
            lambda_a: 0.0,
        }
    }
}

/// Grid buy (`lambda`) and sell (`mu`) prices for the peak (`h`) and
/// off-peak (`l`) periods, plus amortization prices.
#[derive(Debug, Clone, PartialEq)]
pub struct Tariff {
    lambda_h: Price,
    lambda_l: Price,
    mu_h: Price,
    mu_l: Price,
    amortization: Amortization,
    overrides: BTreeMap<String, Amortization>,
}

impl Tariff {
    /// Builds a tariff and enforces `lambda_h >= mu_h`, `lambda_l >= mu_l`
    /// and `mu_h >= lambda_l`.
    pub fn new(lambda_h: f64, lambda_l: f64, mu_h: f64, mu_l: f64) -> Result<Self, TariffError> {
        let t = Self::unchecked(lambda_h, lambda_l, mu_h, mu_l)?;
        t.check_conditions()?;
        Ok(t)
    }

    /// Builds a tariff without the pricing conditions; prices must still be
    /// finite and non-negative. Meant for probing what the conditions buy.
    pub fn unchecked(lambda_h: f64, lambda_l: f64, mu_h: f64, mu_l: f64) -> Result<Self, TariffError> {
        Ok(Self {
            lambda_h: Price::from_cents("lambda_h", lambda_h)?,
            lambda_l: Price::from_cents("lambda_l", lambda_l)?,
            mu_h: Price::from_cents("mu_h", mu_h)?,
            mu_l: Price::from_cents("mu_l", mu_l)?,
            amortization: Amortization::default(),
            overrides: BTreeMap::new(),
        })
    }

    pub fn check_conditions(&self) -> Result<(), TariffError> {
        if self.lambda_h < self.mu_h {
            return Err(TariffError::Condition("lambda_h >= mu_h"));
        }
        if self.lambda_l < self.mu_l {
            return Err(TariffError::Condition("lambda_l >= mu_l"));
        }
        if self.mu_h < self.lambda_l {
            return Err(TariffError::Condition("mu_h >= lambda_l"));
        }
        Ok(())
    }

    pub fn with_amortization(mut self, storage_cents: f64, panel_cents: f64) -> Result<Self, TariffError> {
        self.amortization = Amortization {
            storage: Price::from_cents("lambda_b", storage_cents)?,
            panel: Price::from_cents("lambda_a", panel_cents)?,
        };
        Ok(self)
    }

    /// Per-house amortization prices replacing the uniform ones.
    pub fn with_house_amortization(
        mut self,
        house_id: impl Into<String>,
        storage_cents: f64,
        panel_cents: f64,
    ) -> Result<Self, TariffError> {
        self.overrides.insert(
            house_id.into(),
            Amortization {
                storage: Price::from_cents("lambda_b", storage_cents)?,
                panel: Price::from_cents("lambda_a", panel_cents)?,
            },
        );
        Ok(self)
    }

    pub fn lambda_h(&self) -> f64 {
        self.lambda_h.cents()
    }

    pub fn lambda_l(&self) -> f64 {
        self.lambda_l.cents()
    }

    pub fn mu_h(&self) -> f64 {
        self.mu_h.cents()
    }

    pub fn mu_l(&self) -> f64 {
        self.mu_l.cents()
    }

    pub fn amortization_for(&self, house_id: &str) -> Amortization {
        self.overrides.get(house_id).copied().unwrap_or(self.amortization)
    }

    /// Daily amortization charge `lambda_b * B + lambda_a * a` for one house.
    pub fn amortization_cost(&self, house_id: &str, storage_kwh: f64, panel_area_m2: f64) -> f64 {
        let a = self.amortization_for(house_id);
        a.storage.cents() * storage_kwh + a.panel.cents() * panel_area_m2
    }

    pub fn rates(&self) -> TariffRates {
        TariffRates {
            lambda_h: self.lambda_h(),
            lambda_l: self.lambda_l(),
            mu_h: self.mu_h(),
            mu_l: self.mu_l(),
            lambda_b: self.amortization.storage.cents(),
            lambda_a: self.amortization.panel.cents(),
        }
    }
}

impl TryFrom<TariffRates> for Tariff {
    type Error = TariffError;

    fn try_from(r: TariffRates) -> Result<Self, TariffError> {
        Tariff::new(r.lambda_h, r.lambda_l, r.mu_h, r.mu_l)?.with_amortization(r.lambda_b, r.lambda_a)
    }
}

/// Which side of the meter each period ends on.
///
/// | label | peak    | off-peak |
/// |-------|---------|----------|
/// | K     | deficit | deficit  |
/// | L     | surplus | deficit  |
/// | M     | deficit | surplus  |
/// | N     | surplus | surplus  |
///
/// An exactly balanced period counts as deficit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CaseLabel {
    K,
    L,
    M,
    N,
}

impl CaseLabel {
    pub fn from_deficits(peak_deficit: bool, off_peak_deficit: bool) -> Self {
        match (peak_deficit, off_peak_deficit) {
            (true, true) => CaseLabel::K,
            (false, true) => CaseLabel::L,
            (true, false) => CaseLabel::M,
            (false, false) => CaseLabel::N,
        }
    }

    pub fn peak_deficit(self) -> bool {
        matches!(self, CaseLabel::K | CaseLabel::M)
    }

    pub fn off_peak_deficit(self) -> bool {
        matches!(self, CaseLabel::K | CaseLabel::L)
    }

    /// Per-kWh price applied to the peak net position under this case.
    pub fn peak_price(self, t: &Tariff) -> f64 {
        if self.peak_deficit() {
            t.lambda_h()
        } else {
            t.mu_h()
        }
    }

    pub fn off_peak_price(self, t: &Tariff) -> f64 {
        if self.off_peak_deficit() {
            t.lambda_l()
        } else {
            t.mu_l()
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CaseLabel::K => "K",
            CaseLabel::L => "L",
            CaseLabel::M => "M",
            CaseLabel::N => "N",
        }
    }
}

impl fmt::Display for CaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Daily energy totals of a house or a group of houses.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EnergyTotals {
    pub peak_load: f64,
    pub off_peak_load: f64,
    pub peak_solar: f64,
    pub off_peak_solar: f64,
    pub storage: f64,
}

impl EnergyTotals {
    pub fn of(h: &HouseDay) -> Self {
        Self {
            peak_load: h.peak_load,
            off_peak_load: h.off_peak_load,
            peak_solar: h.peak_solar,
            off_peak_solar: h.off_peak_solar,
            storage: h.storage,
        }
    }

    pub fn sum<'a>(houses: impl IntoIterator<Item = &'a HouseDay>) -> Self {
        houses.into_iter().fold(Self::default(), |acc, h| acc + Self::of(h))
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            peak_load: alpha * self.peak_load,
            off_peak_load: alpha * self.off_peak_load,
            peak_solar: alpha * self.peak_solar,
            off_peak_solar: alpha * self.off_peak_solar,
            storage: alpha * self.storage,
        }
    }

    /// `H_h - B - G_h`; positive means energy is bought in the peak period.
    pub fn peak_deficit(&self) -> f64 {
        self.peak_load - self.storage - self.peak_solar
    }

    /// `H_l + B - G_l`; positive means energy is bought off-peak.
    pub fn off_peak_deficit(&self) -> f64 {
        self.off_peak_load + self.storage - self.off_peak_solar
    }

    /// Case from the guards `H_h >= B + G_h` and `H_l + B >= G_l`.
    pub fn case(&self) -> CaseLabel {
        CaseLabel::from_deficits(
            self.peak_load >= self.storage + self.peak_solar,
            self.off_peak_load + self.storage >= self.off_peak_solar,
        )
    }

    /// Energy cost when both periods are settled at the prices of `case`.
    pub fn settle(&self, case: CaseLabel, t: &Tariff) -> f64 {
        case.peak_price(t) * self.peak_deficit() + case.off_peak_price(t) * self.off_peak_deficit()
    }

    /// Net-metering energy cost written with positive parts:
    /// `lambda_h (H_h-B-G_h)+ - mu_h (B+G_h-H_h)+ + lambda_l (H_l+B-G_l)+ - mu_l (G_l-H_l-B)+`.
    pub fn net_metering_cost(&self, t: &Tariff) -> f64 {
        let pos = |x: f64| x.max(0.0);
        t.lambda_h() * pos(self.peak_load - self.storage - self.peak_solar)
            - t.mu_h() * pos(self.storage + self.peak_solar - self.peak_load)
            + t.lambda_l() * pos(self.off_peak_load + self.storage - self.off_peak_solar)
            - t.mu_l() * pos(self.off_peak_solar - self.off_peak_load - self.storage)
    }

    /// Energy cost settled at the prices of the totals' own case.
    pub fn cost(&self, t: &Tariff) -> f64 {
        self.settle(self.case(), t)
    }
}

impl std::ops::Add for EnergyTotals {
    type Output = EnergyTotals;
    fn add(self, o: EnergyTotals) -> EnergyTotals {
        EnergyTotals {
            peak_load: self.peak_load + o.peak_load,
            off_peak_load: self.off_peak_load + o.off_peak_load,
            peak_solar: self.peak_solar + o.peak_solar,
            off_peak_solar: self.off_peak_solar + o.off_peak_solar,
            storage: self.storage + o.storage,
        }
    }
}

/// One house's bill for one day.
#[derive(Debug, Clone, PartialEq)]
pub struct DailyBill {
    pub house_id: String,
    pub date: NaiveDate,
    /// Negative values are net credits.
    pub cost: Cents,
    pub case: Option<CaseLabel>,
}

/// Daily cost of a house with no solar or storage: `lambda_h H_h + lambda_l H_l`.
pub fn cost_without_der(h: &HouseDay, t: &Tariff) -> f64 {
    t.lambda_h() * h.peak_load + t.lambda_l() * h.off_peak_load
}

/// Daily cost of a house trading only with the grid, in real-valued cents.
pub fn individual_cost(h: &HouseDay, t: &Tariff, include_amortization: bool) -> f64 {
    let energy = EnergyTotals::of(h).cost(t);
    if include_amortization {
        energy + t.amortization_cost(&h.house_id, h.storage, h.panel_area)
    } else {
        energy
    }
}

pub fn bill_without_der(h: &HouseDay, t: &Tariff) -> DailyBill {
    DailyBill {
        house_id: h.house_id.clone(),
        date: h.date,
        cost: Cents::from_f64(cost_without_der(h, t)),
        case: None,
    }
}

/// Bill of a house with solar and storage that trades only with the grid.
pub fn cost_with_der(h: &HouseDay, t: &Tariff, include_amortization: bool) -> DailyBill {
    DailyBill {
        house_id: h.house_id.clone(),
        date: h.date,
        cost: Cents::from_f64(individual_cost(h, t, include_amortization)),
        case: Some(EnergyTotals::of(h).case()),
    }
}

/// Writes `house_id,date,cost_cents,case` rows; `case` is empty for bills
/// without DERs.
pub fn write_bills_csv<W: Write>(w: W, bills: &[DailyBill]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(["house_id", "date", "cost_cents", "case"])?;
    for b in bills {
        w.write_record([
            b.house_id.clone(),
            b.date.to_string(),
            b.cost.cents_string(),
            b.case.map(|c| c.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
