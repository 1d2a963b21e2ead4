//! Half-hourly input series, the time-of-use tariff, a Markov-chain demand
//! synthesizer and synthetic weather/PV generators.

mod markov;
mod series;
mod synthetic;
mod tariff;

pub use markov::{fit_markov_chain, sample_profile, DemandMarkovModel};
pub use series::{load_series, SeriesSummary, TimeSeries, Units, TIMESTAMP_FORMAT};
pub use synthetic::{
    city_preset, scale_to_total, synth_demand_source, synth_pv, synth_weather, ClimatePreset,
    CITIES,
};
pub use tariff::{TariffSchedule, TariffWindow};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("row {row}: {detail}")]
    Parse { row: usize, detail: String },
    #[error("row {row}: missing slot {timestamp}")]
    Gap { row: usize, timestamp: String },
    #[error("row {row}: duplicate or out-of-order timestamp {timestamp}")]
    Duplicate { row: usize, timestamp: String },
    #[error("expected units {expected}, file declares {found}")]
    Units { expected: String, found: String },
    #[error("invalid data: {0}")]
    Invalid(String),
}
