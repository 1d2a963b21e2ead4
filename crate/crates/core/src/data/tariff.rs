use chrono::{NaiveDateTime, NaiveTime, Timelike};
use serde::{Deserialize, Serialize};

use super::DataError;

/// A daily price window running from `start` until the next window starts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TariffWindow {
    #[serde(with = "hhmm")]
    pub start: NaiveTime,
    pub label: String,
    /// Import price, $/kWh.
    pub price: f64,
}

/// Time-of-use import prices and a flat feed-in credit. The windows are
/// ordered by start time; the last one wraps past midnight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TariffSchedule {
    pub windows: Vec<TariffWindow>,
    /// Feed-in credit, $/kWh.
    pub feed_in: f64,
}

impl Default for TariffSchedule {
    fn default() -> Self {
        let w = |h, m, label: &str, price| TariffWindow {
            start: NaiveTime::from_hms_opt(h, m, 0).unwrap(),
            label: label.into(),
            price,
        };
        Self {
            windows: vec![
                w(7, 30, "shoulder", 0.25),
                w(14, 30, "peak", 0.50),
                w(20, 30, "shoulder", 0.25),
                w(22, 30, "off-peak", 0.15),
            ],
            feed_in: 0.09,
        }
    }
}

impl TariffSchedule {
    pub fn validate(&self) -> Result<(), DataError> {
        if self.windows.is_empty() {
            return Err(DataError::Invalid("tariff needs at least one window".into()));
        }
        if !(self.feed_in > 0.0 && self.feed_in.is_finite()) {
            return Err(DataError::Invalid(format!("feed-in price must be positive, got {}", self.feed_in)));
        }
        for pair in self.windows.windows(2) {
            if pair[0].start >= pair[1].start {
                return Err(DataError::Invalid(format!(
                    "tariff windows must have strictly increasing starts ({} then {})",
                    pair[0].start, pair[1].start
                )));
            }
        }
        for w in &self.windows {
            if !(w.price.is_finite() && w.price > self.feed_in) {
                return Err(DataError::Invalid(format!(
                    "import price {} of window `{}` must exceed the feed-in price {}",
                    w.price, w.label, self.feed_in
                )));
            }
        }
        Ok(())
    }

    /// Index of the window containing `time`; a boundary belongs to the
    /// window that starts there.
    pub fn window_index(&self, time: NaiveTime) -> usize {
        match self.windows.iter().rposition(|w| w.start <= time) {
            Some(i) => i,
            None => self.windows.len() - 1,
        }
    }

    pub fn price_at(&self, at: NaiveDateTime) -> f64 {
        self.windows[self.window_index(at.time())].price
    }

    /// Window start times as `HH:MM` with their labels.
    pub fn boundaries(&self) -> Vec<(String, &str)> {
        self.windows
            .iter()
            .map(|w| (format!("{:02}:{:02}", w.start.hour(), w.start.minute()), w.label.as_str()))
            .collect()
    }
}

mod hhmm {
    use chrono::NaiveTime;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &NaiveTime, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&t.format("%H:%M").to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<NaiveTime, D::Error> {
        let s = String::deserialize(d)?;
        NaiveTime::parse_from_str(&s, "%H:%M")
            .or_else(|_| NaiveTime::parse_from_str(&s, "%H:%M:%S"))
            .map_err(serde::de::Error::custom)
    }
}
