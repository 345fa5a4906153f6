use std::collections::BTreeSet;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::EconError;
use crate::ingest::MarketBar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub dates: Vec<NaiveDate>,
    pub values: Vec<f64>,
}

impl Series {
    pub fn new(name: impl Into<String>, dates: Vec<NaiveDate>, values: Vec<f64>) -> Result<Self, EconError> {
        let name = name.into();
        if dates.len() != values.len() {
            return Err(EconError::Shape(format!(
                "series {name}: {} dates but {} values",
                dates.len(),
                values.len()
            )));
        }
        if dates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(EconError::Shape(format!("series {name}: dates not strictly increasing")));
        }
        Ok(Self { name, dates, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// The first `n` points.
    pub fn head(&self, n: usize) -> Self {
        Self {
            name: self.name.clone(),
            dates: self.dates[..n].to_vec(),
            values: self.values[..n].to_vec(),
        }
    }

    fn restrict(&self, keep: &BTreeSet<NaiveDate>) -> Self {
        let (dates, values) = self
            .dates
            .iter()
            .zip(&self.values)
            .filter(|(d, _)| keep.contains(d))
            .map(|(d, v)| (*d, *v))
            .unzip();
        Self {
            name: self.name.clone(),
            dates,
            values,
        }
    }
}

pub fn close_series(bars: &[MarketBar]) -> Series {
    Series {
        name: "close".into(),
        dates: bars.iter().map(|b| b.date).collect(),
        values: bars.iter().map(|b| b.close).collect(),
    }
}

/// (close_i − close_{i−1}) / close_{i−1}, dated at i.
pub fn daily_return(close: &Series) -> Result<Series, EconError> {
    if close.len() < 2 {
        return Err(EconError::TooShort {
            what: "daily return".into(),
            need: 2,
            got: close.len(),
        });
    }
    if let Some(v) = close.values.iter().find(|v| !(**v > 0.0)) {
        return Err(EconError::Shape(format!("non-positive close {v}")));
    }
    Ok(Series {
        name: "return".into(),
        dates: close.dates[1..].to_vec(),
        values: close.values.windows(2).map(|w| (w[1] - w[0]) / w[0]).collect(),
    })
}

/// Restricts all series to their common dates.
pub fn align(series: &[Series]) -> Vec<Series> {
    let Some(first) = series.first() else { return Vec::new() };
    let mut common: BTreeSet<NaiveDate> = first.dates.iter().copied().collect();
    for s in &series[1..] {
        let d: BTreeSet<NaiveDate> = s.dates.iter().copied().collect();
        common = common.intersection(&d).copied().collect();
    }
    series.iter().map(|s| s.restrict(&common)).collect()
}
