//! Household energy time-series: ingestion, synthesis and peak/off-peak
//! aggregation.
//!
//! Raw data arrives in 4-hour intervals starting at 00, 04, .., 20 h. The
//! billing and coalition models work on daily aggregates split into a peak
//! and an off-peak period ([`HouseDay`]). An interval is assigned to the peak
//! period iff its start hour lies in the peak window.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, Timelike};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const INTERVAL_HOURS: u8 = 4;
pub const INTERVALS_PER_DAY: usize = 6;
pub const INTERVAL_CSV_HEADER: [&str; 4] = ["house_id", "timestamp", "load_kwh", "solar_kwh"];
pub const ASSETS_CSV_HEADER: [&str; 3] = ["house_id", "storage_kwh", "panel_area_m2"];

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error("line {line}: negative {field} value {value}")]
    NegativeEnergy { line: u64, field: &'static str, value: f64 },
    #[error("duplicate interval for house {house_id} at {date}T{hour:02}:00")]
    DuplicateInterval { house_id: String, date: NaiveDate, hour: u8 },
    #[error("house {house_id} has no assets row")]
    MissingAssets { house_id: String },
    #[error("line {line}: duplicate assets row for house {house_id}")]
    DuplicateAssets { line: u64, house_id: String },
    #[error("house {house_id} is missing the {hour:02}:00 interval on {date}")]
    MissingInterval { house_id: String, date: NaiveDate, hour: u8 },
    #[error("unknown house {0}")]
    UnknownHouse(String),
    #[error("invalid interval record for house {house_id}: {message}")]
    InvalidRecord { house_id: String, message: String },
    #[error("invalid generator parameters: {0}")]
    InvalidParams(String),
    #[error("invalid period specification: {0}")]
    InvalidPeriod(String),
}

/// Energy drawn and generated by one house over one 4-hour interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalRecord {
    pub house_id: String,
    pub date: NaiveDate,
    /// Interval start hour, one of 0, 4, 8, 12, 16, 20.
    pub start_hour: u8,
    pub load_kwh: f64,
    pub solar_kwh: f64,
}

impl IntervalRecord {
    pub fn timestamp_string(&self) -> String {
        format!("{}T{:02}:00", self.date.format("%Y-%m-%d"), self.start_hour)
    }

    fn validate(&self) -> Result<(), ProfileError> {
        let bad = |message: String| ProfileError::InvalidRecord {
            house_id: self.house_id.clone(),
            message,
        };
        if self.start_hour % INTERVAL_HOURS != 0 || self.start_hour >= 24 {
            return Err(bad(format!("start hour {} is not an interval boundary", self.start_hour)));
        }
        for (name, v) in [("load", self.load_kwh), ("solar", self.solar_kwh)] {
            if !v.is_finite() || v < 0.0 {
                return Err(bad(format!("{name} energy {v} must be finite and non-negative")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HouseAssets {
    pub house_id: String,
    /// Storage capacity B in kWh.
    pub storage_kwh: f64,
    /// Solar panel area a in m².
    pub panel_area_m2: f64,
}

/// One household's daily aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HouseDay {
    pub house_id: String,
    pub date: NaiveDate,
    /// H_h: consumption during the peak period, kWh.
    pub peak_load: f64,
    /// H_l: consumption during the off-peak period, kWh.
    pub off_peak_load: f64,
    /// G_h: solar generation during the peak period, kWh.
    pub peak_solar: f64,
    /// G_l: solar generation during the off-peak period, kWh.
    pub off_peak_solar: f64,
    /// B: storage capacity, kWh.
    pub storage: f64,
    /// a: panel area, m².
    pub panel_area: f64,
}

impl HouseDay {
    /// Net energy bought in the peak period: H_h - B - G_h (negative = surplus).
    pub fn peak_deficit(&self) -> f64 {
        self.peak_load - self.storage - self.peak_solar
    }

    /// Net energy bought in the off-peak period: H_l + B - G_l (negative = surplus).
    pub fn off_peak_deficit(&self) -> f64 {
        self.off_peak_load + self.storage - self.off_peak_solar
    }
}

/// Peak window `[peak_start_hour, peak_end_hour)`; wraps past midnight when
/// start > end.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodSpec {
    peak_start_hour: u8,
    peak_end_hour: u8,
}

impl PeriodSpec {
    pub fn new(peak_start_hour: u8, peak_end_hour: u8) -> Result<Self, ProfileError> {
        for h in [peak_start_hour, peak_end_hour] {
            if h >= 24 {
                return Err(ProfileError::InvalidPeriod(format!("hour {h} outside [0,24)")));
            }
            if h % INTERVAL_HOURS != 0 {
                return Err(ProfileError::InvalidPeriod(format!(
                    "hour {h} is not aligned to {INTERVAL_HOURS}-hour intervals"
                )));
            }
        }
        if peak_start_hour == peak_end_hour {
            return Err(ProfileError::InvalidPeriod("peak window is empty".into()));
        }
        Ok(Self {
            peak_start_hour,
            peak_end_hour,
        })
    }

    pub fn peak_start_hour(&self) -> u8 {
        self.peak_start_hour
    }

    pub fn peak_end_hour(&self) -> u8 {
        self.peak_end_hour
    }

    pub fn is_peak(&self, start_hour: u8) -> bool {
        if self.peak_start_hour < self.peak_end_hour {
            (self.peak_start_hour..self.peak_end_hour).contains(&start_hour)
        } else {
            start_hour >= self.peak_start_hour || start_hour < self.peak_end_hour
        }
    }
}

impl Default for PeriodSpec {
    /// Peak 08-20 h, off-peak 20-08 h.
    fn default() -> Self {
        Self {
            peak_start_hour: 8,
            peak_end_hour: 20,
        }
    }
}

#[derive(Debug, Deserialize)]
struct IntervalRow {
    house_id: String,
    timestamp: String,
    load_kwh: f64,
    solar_kwh: f64,
}

#[derive(Debug, Deserialize)]
struct AssetsRow {
    house_id: String,
    storage_kwh: f64,
    panel_area_m2: f64,
}

fn open(path: &Path) -> Result<File, ProfileError> {
    File::open(path).map_err(|source| ProfileError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn csv_error(err: csv::Error) -> ProfileError {
    let line = err.position().map(|p| p.line()).unwrap_or(0);
    ProfileError::Malformed {
        line,
        message: err.to_string(),
    }
}

fn check_header<R: Read>(rdr: &mut csv::Reader<R>, expected: &[&str]) -> Result<(), ProfileError> {
    let headers = rdr.headers().map_err(csv_error)?;
    let got: Vec<&str> = headers.iter().map(str::trim).collect();
    if got != expected {
        return Err(ProfileError::Malformed {
            line: 1,
            message: format!("expected header `{}`, found `{}`", expected.join(","), got.join(",")),
        });
    }
    Ok(())
}

/// Parses `YYYY-MM-DDTHH:00` with HH on an interval boundary.
pub fn parse_timestamp(s: &str) -> Result<(NaiveDate, u8), String> {
    let dt = NaiveDateTime::parse_from_str(s.trim(), "%Y-%m-%dT%H:%M")
        .map_err(|e| format!("bad timestamp `{s}`: {e}"))?;
    if dt.minute() != 0 {
        return Err(format!("timestamp `{s}` is not on the hour"));
    }
    let hour = dt.hour() as u8;
    if hour % INTERVAL_HOURS != 0 {
        return Err(format!("timestamp `{s}` does not start a 4-hour interval"));
    }
    Ok((dt.date(), hour))
}

fn non_negative(line: u64, field: &'static str, value: f64) -> Result<f64, ProfileError> {
    if !value.is_finite() {
        return Err(ProfileError::Malformed {
            line,
            message: format!("{field} is not finite"),
        });
    }
    if value < 0.0 {
        return Err(ProfileError::NegativeEnergy { line, field, value });
    }
    Ok(value)
}

/// Reads interval records from CSV. Records come back sorted by
/// `(house_id, date, start_hour)`.
pub fn read_intervals<R: Read>(reader: R) -> Result<Vec<IntervalRecord>, ProfileError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    check_header(&mut rdr, &INTERVAL_CSV_HEADER)?;
    let headers = rdr.headers().map_err(csv_error)?.clone();
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for result in rdr.records() {
        let record = result.map_err(csv_error)?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let row: IntervalRow = record.deserialize(Some(&headers)).map_err(|e| ProfileError::Malformed {
            line,
            message: e.to_string(),
        })?;
        let (date, hour) = parse_timestamp(&row.timestamp).map_err(|message| ProfileError::Malformed { line, message })?;
        let load_kwh = non_negative(line, "load_kwh", row.load_kwh)?;
        let solar_kwh = non_negative(line, "solar_kwh", row.solar_kwh)?;
        if !seen.insert((row.house_id.clone(), date, hour)) {
            return Err(ProfileError::DuplicateInterval {
                house_id: row.house_id,
                date,
                hour,
            });
        }
        out.push(IntervalRecord {
            house_id: row.house_id,
            date,
            start_hour: hour,
            load_kwh,
            solar_kwh,
        });
    }
    sort_records(&mut out);
    Ok(out)
}

pub fn read_assets<R: Read>(reader: R) -> Result<Vec<HouseAssets>, ProfileError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    check_header(&mut rdr, &ASSETS_CSV_HEADER)?;
    let headers = rdr.headers().map_err(csv_error)?.clone();
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for result in rdr.records() {
        let record = result.map_err(csv_error)?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let row: AssetsRow = record.deserialize(Some(&headers)).map_err(|e| ProfileError::Malformed {
            line,
            message: e.to_string(),
        })?;
        let storage_kwh = non_negative(line, "storage_kwh", row.storage_kwh)?;
        let panel_area_m2 = non_negative(line, "panel_area_m2", row.panel_area_m2)?;
        if !seen.insert(row.house_id.clone()) {
            return Err(ProfileError::DuplicateAssets {
                line,
                house_id: row.house_id,
            });
        }
        out.push(HouseAssets {
            house_id: row.house_id,
            storage_kwh,
            panel_area_m2,
        });
    }
    out.sort_by(|a, b| a.house_id.cmp(&b.house_id));
    Ok(out)
}

/// Loads the interval and assets CSV files and checks that every house with
/// interval data has exactly one assets row.
pub fn ingest_csv(path: &Path, assets_path: &Path) -> Result<(Vec<IntervalRecord>, Vec<HouseAssets>), ProfileError> {
    let records = read_intervals(open(path)?)?;
    let assets = read_assets(open(assets_path)?)?;
    let known: BTreeSet<&str> = assets.iter().map(|a| a.house_id.as_str()).collect();
    if let Some(r) = records.iter().find(|r| !known.contains(r.house_id.as_str())) {
        return Err(ProfileError::MissingAssets {
            house_id: r.house_id.clone(),
        });
    }
    Ok((records, assets))
}

fn sort_records(records: &mut [IntervalRecord]) {
    records.sort_by(|a, b| {
        a.house_id
            .cmp(&b.house_id)
            .then(a.date.cmp(&b.date))
            .then(a.start_hour.cmp(&b.start_hour))
    });
}

pub fn write_intervals<W: Write>(writer: W, records: &[IntervalRecord]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(INTERVAL_CSV_HEADER)?;
    for r in records {
        w.write_record([
            r.house_id.clone(),
            r.timestamp_string(),
            format!("{:.6}", r.load_kwh),
            format!("{:.6}", r.solar_kwh),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_assets<W: Write>(writer: W, assets: &[HouseAssets]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(ASSETS_CSV_HEADER)?;
    for a in assets {
        w.write_record([
            a.house_id.clone(),
            format!("{:.6}", a.storage_kwh),
            format!("{:.6}", a.panel_area_m2),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Settings for the synthetic household generator.
///
/// Load per interval is `4 h x (base + evening x shape[k]) x season x noise`;
/// solar is a sine bell between sunrise and sunset scaled by panel area,
/// panel efficiency and a daily clearness factor shared by all houses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorParams {
    pub start_date: NaiveDate,
    /// Floor area range (m²) from which each house draws uniformly.
    pub floor_area_m2: [f64; 2],
    /// Panel area as a fraction of floor area.
    pub panel_area_fraction: f64,
    /// Storage capacity range (kWh).
    pub storage_kwh: [f64; 2],
    /// Always-on load range (kW).
    pub base_load_kw: [f64; 2],
    /// Amplitude range (kW) of the diurnal, evening-weighted activity bump.
    pub activity_kw: [f64; 2],
    /// Relative activity per interval (00, 04, .., 20 h).
    pub diurnal_shape: [f64; 6],
    /// Extra summer (cooling) load relative to the base.
    pub summer_load_boost: f64,
    /// Extra winter (heating) load relative to the base.
    pub winter_load_boost: f64,
    /// Half-width of the uniform multiplicative load noise.
    pub load_noise: f64,
    /// Clear-sky irradiance at solar noon (kW/m²).
    pub peak_irradiance_kw_m2: f64,
    pub panel_efficiency: f64,
    /// Mean day length (h) and its seasonal amplitude (h).
    pub day_length_hours: f64,
    pub day_length_amplitude_hours: f64,
    /// Largest fraction of clear-sky yield lost to clouds on a given day.
    pub max_cloud_loss: f64,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        Self {
            start_date: NaiveDate::from_ymd_opt(2021, 1, 1).expect("valid date"),
            floor_area_m2: [90.0, 320.0],
            panel_area_fraction: 0.10,
            storage_kwh: [0.0, 13.5],
            base_load_kw: [0.2, 0.6],
            activity_kw: [0.4, 1.6],
            diurnal_shape: [0.15, 0.45, 0.5, 0.55, 1.0, 0.75],
            summer_load_boost: 0.8,
            winter_load_boost: 0.3,
            load_noise: 0.35,
            peak_irradiance_kw_m2: 1.0,
            panel_efficiency: 0.2,
            day_length_hours: 12.0,
            day_length_amplitude_hours: 2.0,
            max_cloud_loss: 0.75,
        }
    }
}

impl GeneratorParams {
    pub fn validate(&self) -> Result<(), ProfileError> {
        let bad = |m: String| Err(ProfileError::InvalidParams(m));
        for (name, [lo, hi]) in [
            ("floor_area_m2", self.floor_area_m2),
            ("storage_kwh", self.storage_kwh),
            ("base_load_kw", self.base_load_kw),
            ("activity_kw", self.activity_kw),
        ] {
            if !(lo.is_finite() && hi.is_finite()) || lo < 0.0 || lo > hi {
                return bad(format!("{name} range [{lo}, {hi}] must satisfy 0 <= min <= max"));
            }
        }
        for (name, v) in [
            ("panel_area_fraction", self.panel_area_fraction),
            ("summer_load_boost", self.summer_load_boost),
            ("winter_load_boost", self.winter_load_boost),
            ("peak_irradiance_kw_m2", self.peak_irradiance_kw_m2),
            ("panel_efficiency", self.panel_efficiency),
        ] {
            if !v.is_finite() || v < 0.0 {
                return bad(format!("{name} = {v} must be finite and non-negative"));
            }
        }
        if self.diurnal_shape.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return bad("diurnal_shape entries must be finite and non-negative".into());
        }
        if !(0.0..1.0).contains(&self.load_noise) {
            return bad(format!("load_noise = {} must lie in [0, 1)", self.load_noise));
        }
        if !(0.0..=1.0).contains(&self.max_cloud_loss) {
            return bad(format!("max_cloud_loss = {} must lie in [0, 1]", self.max_cloud_loss));
        }
        let longest = self.day_length_hours + self.day_length_amplitude_hours.abs();
        let shortest = self.day_length_hours - self.day_length_amplitude_hours.abs();
        // Sunlight must stay inside [04, 20) so the night intervals are dark.
        if shortest <= 0.0 || longest > 16.0 {
            return bad(format!("day length must stay within (0, 16] h, got [{shortest}, {longest}]"));
        }
        Ok(())
    }
}

fn uniform(rng: &mut ChaCha8Rng, [lo, hi]: [f64; 2]) -> f64 {
    if hi > lo {
        rng.gen_range(lo..hi)
    } else {
        lo
    }
}

/// Clear-sky energy (kWh/m²) of a sine bell between sunrise and sunset over
/// the interval `[start, end)` hours.
fn bell_energy(start: f64, end: f64, sunrise: f64, sunset: f64, peak_kw: f64) -> f64 {
    let a = start.max(sunrise);
    let b = end.min(sunset);
    if b <= a {
        return 0.0;
    }
    let d = sunset - sunrise;
    peak_kw * d / PI * ((PI * (a - sunrise) / d).cos() - (PI * (b - sunrise) / d).cos())
}

/// Generates `n_houses` synthetic households over `days` consecutive days.
///
/// Output is a pure function of the arguments. House ids are `H0001`,
/// `H0002`, .. and records are sorted by `(house_id, date, start_hour)`.
pub fn synthesize_profiles(
    n_houses: usize,
    days: usize,
    seed: u64,
    params: &GeneratorParams,
) -> Result<(Vec<IntervalRecord>, Vec<HouseAssets>), ProfileError> {
    if n_houses == 0 || days == 0 {
        return Err(ProfileError::InvalidParams("n_houses and days must be at least 1".into()));
    }
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let width = n_houses.to_string().len().max(4);

    struct Profile {
        base_kw: f64,
        activity_kw: f64,
        assets: HouseAssets,
    }
    let houses: Vec<Profile> = (0..n_houses)
        .map(|i| {
            let floor = uniform(&mut rng, params.floor_area_m2);
            let storage = uniform(&mut rng, params.storage_kwh);
            // Larger houses draw more power.
            let size = floor / params.floor_area_m2[1].max(1.0);
            Profile {
                base_kw: uniform(&mut rng, params.base_load_kw) * (0.5 + size),
                activity_kw: uniform(&mut rng, params.activity_kw) * (0.5 + size),
                assets: HouseAssets {
                    house_id: format!("H{:0width$}", i + 1),
                    storage_kwh: storage,
                    panel_area_m2: floor * params.panel_area_fraction,
                },
            }
        })
        .collect();

    struct Sky {
        date: NaiveDate,
        season_load: f64,
        // Clear-sky kWh/m² per interval, already scaled by clearness.
        insolation: [f64; INTERVALS_PER_DAY],
    }
    let skies: Vec<Sky> = (0..days)
        .map(|d| {
            let date = params.start_date + Duration::days(d as i64);
            let doy = date.ordinal0() as f64;
            let summer = (2.0 * PI * (doy - 200.0) / 365.0).cos().max(0.0);
            let winter = (2.0 * PI * (doy - 15.0) / 365.0).cos().max(0.0);
            let season_load = 1.0 + params.summer_load_boost * summer * summer + params.winter_load_boost * winter * winter;
            let day_length =
                params.day_length_hours + params.day_length_amplitude_hours * (2.0 * PI * (doy - 172.0) / 365.0).cos();
            let sunrise = 12.0 - day_length / 2.0;
            let sunset = 12.0 + day_length / 2.0;
            let u: f64 = rng.gen();
            let clearness = 1.0 - params.max_cloud_loss * u * u;
            let mut insolation = [0.0; INTERVALS_PER_DAY];
            for (k, slot) in insolation.iter_mut().enumerate() {
                let start = (k * INTERVAL_HOURS as usize) as f64;
                *slot = clearness
                    * bell_energy(start, start + INTERVAL_HOURS as f64, sunrise, sunset, params.peak_irradiance_kw_m2);
            }
            Sky {
                date,
                season_load,
                insolation,
            }
        })
        .collect();

    let mut records = Vec::with_capacity(n_houses * days * INTERVALS_PER_DAY);
    for house in &houses {
        for sky in &skies {
            for k in 0..INTERVALS_PER_DAY {
                let noise = 1.0 + params.load_noise * rng.gen_range(-1.0..1.0);
                let kw = (house.base_kw + house.activity_kw * params.diurnal_shape[k]) * sky.season_load * noise;
                let load_kwh = (kw * INTERVAL_HOURS as f64).max(0.0);
                let solar_kwh = sky.insolation[k] * house.assets.panel_area_m2 * params.panel_efficiency;
                records.push(IntervalRecord {
                    house_id: house.assets.house_id.clone(),
                    date: sky.date,
                    start_hour: (k as u8) * INTERVAL_HOURS,
                    load_kwh,
                    solar_kwh,
                });
            }
        }
    }
    Ok((records, houses.into_iter().map(|h| h.assets).collect()))
}

/// Collapses interval records into one [`HouseDay`] per `(house, date)`.
///
/// Every covered day must have all six intervals. Output is sorted by
/// `(house_id, date)` and does not depend on input order.
pub fn aggregate_daily(
    records: &[IntervalRecord],
    assets: &[HouseAssets],
    spec: &PeriodSpec,
) -> Result<Vec<HouseDay>, ProfileError> {
    let by_house: BTreeMap<&str, &HouseAssets> = assets.iter().map(|a| (a.house_id.as_str(), a)).collect();
    let mut days: BTreeMap<(&str, NaiveDate), [Option<(f64, f64)>; INTERVALS_PER_DAY]> = BTreeMap::new();
    for r in records {
        r.validate()?;
        if !by_house.contains_key(r.house_id.as_str()) {
            return Err(ProfileError::UnknownHouse(r.house_id.clone()));
        }
        let slots = days.entry((r.house_id.as_str(), r.date)).or_default();
        let slot = &mut slots[(r.start_hour / INTERVAL_HOURS) as usize];
        if slot.is_some() {
            return Err(ProfileError::DuplicateInterval {
                house_id: r.house_id.clone(),
                date: r.date,
                hour: r.start_hour,
            });
        }
        *slot = Some((r.load_kwh, r.solar_kwh));
    }

    let mut out = Vec::with_capacity(days.len());
    for ((house_id, date), slots) in days {
        let a = by_house[house_id];
        let mut day = HouseDay {
            house_id: house_id.to_string(),
            date,
            peak_load: 0.0,
            off_peak_load: 0.0,
            peak_solar: 0.0,
            off_peak_solar: 0.0,
            storage: a.storage_kwh,
            panel_area: a.panel_area_m2,
        };
        for (k, slot) in slots.iter().enumerate() {
            let hour = k as u8 * INTERVAL_HOURS;
            let (load, solar) = slot.ok_or_else(|| ProfileError::MissingInterval {
                house_id: house_id.to_string(),
                date,
                hour,
            })?;
            if spec.is_peak(hour) {
                day.peak_load += load;
                day.peak_solar += solar;
            } else {
                day.off_peak_load += load;
                day.off_peak_solar += solar;
            }
        }
        out.push(day);
    }
    Ok(out)
}

/// Per-house interval series in chronological order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct HouseSeries {
    pub load: Vec<f64>,
    pub solar: Vec<f64>,
}

impl HouseSeries {
    /// Net power drawn from the network per interval (load minus solar), kWh.
    pub fn net(&self) -> Vec<f64> {
        self.load.iter().zip(&self.solar).map(|(l, s)| l - s).collect()
    }
}

pub fn house_series(records: &[IntervalRecord]) -> BTreeMap<String, HouseSeries> {
    let mut sorted: Vec<&IntervalRecord> = records.iter().collect();
    sorted.sort_by(|a, b| {
        a.house_id
            .cmp(&b.house_id)
            .then(a.date.cmp(&b.date))
            .then(a.start_hour.cmp(&b.start_hour))
    });
    let mut out: BTreeMap<String, HouseSeries> = BTreeMap::new();
    for r in sorted {
        let s = out.entry(r.house_id.clone()).or_default();
        s.load.push(r.load_kwh);
        s.solar.push(r.solar_kwh);
    }
    out
}

/// Groups house-days by date; each group keeps house_id order.
pub fn group_by_date(days: &[HouseDay]) -> BTreeMap<NaiveDate, Vec<HouseDay>> {
    let mut out: BTreeMap<NaiveDate, Vec<HouseDay>> = BTreeMap::new();
    for d in days {
        out.entry(d.date).or_default().push(d.clone());
    }
    for v in out.values_mut() {
        v.sort_by(|a, b| a.house_id.cmp(&b.house_id));
    }
    out
}
