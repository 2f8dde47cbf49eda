//! Microgrid resilience and peer-to-peer energy sharing toolkit.
//!
//! The crate has two halves:
//!
//! * resilience: complex networks built from power time-series
//!   ([`graphs`]) are attacked by random edge removal and the removed-edge
//!   fraction at which the susceptibility peaks is reported as the
//!   percolation threshold ([`percolation`]);
//! * economics: households with rooftop solar and storage are billed under
//!   net metering with time-of-use prices ([`billing`]) and may pool their
//!   resources in a cooperative game whose grand-coalition cost is split by
//!   a closed-form allocation that lies in the core ([`coalition`]).
//!
//! [`profiles`] ingests or synthesizes the household time-series and
//! [`feeder`] partitions a distribution feeder into candidate microgrids.

pub mod billing;
pub mod coalition;
pub mod feeder;
pub mod graphs;
pub mod money;
pub mod percolation;
pub mod profiles;
mod unionfind;

pub use billing::{CaseLabel, DailyBill, Tariff, TariffError};
pub use coalition::{Allocation, CoalitionDay, PropertyReport};
pub use feeder::{FeederTopology, Partition, SwitchState};
pub use graphs::Graph;
pub use money::Cents;
pub use percolation::{PercolationConfig, PercolationCurve};
pub use profiles::{HouseAssets, HouseDay, IntervalRecord, PeriodSpec};
