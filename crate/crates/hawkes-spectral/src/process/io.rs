//! Event-series persistence: a `component,time` CSV plus a JSON sidecar
//! holding the observation window and dimension (which the CSV alone cannot
//! carry when components are empty or the window extends past the last
//! event). Floats are written in shortest round-trip form, so a
//! write/read cycle reproduces the series exactly.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::EventSeries;
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
struct EventRow {
    component: usize,
    time: f64,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    dim: usize,
    window: (f64, f64),
    counts: Vec<usize>,
}

fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

/// Writes `events.csv` and its `events.json` sidecar; returns the CSV path.
pub fn write_events_csv(series: &EventSeries, csv_path: &Path) -> Result<PathBuf> {
    let mut w = csv::Writer::from_path(csv_path)?;
    for (i, comp) in series.times.iter().enumerate() {
        for &t in comp {
            w.serialize(EventRow { component: i, time: t })?;
        }
    }
    w.flush()?;
    let meta = Sidecar {
        dim: series.dim(),
        window: series.window,
        counts: series.counts(),
    };
    std::fs::write(sidecar_path(csv_path), serde_json::to_string_pretty(&meta)?)?;
    Ok(csv_path.to_path_buf())
}

/// Reads a series written by [`write_events_csv`]; validates invariants.
pub fn read_events_csv(csv_path: &Path) -> Result<EventSeries> {
    let side = sidecar_path(csv_path);
    let meta: Sidecar = serde_json::from_str(&std::fs::read_to_string(&side).map_err(|e| {
        Error::InvalidInput(format!("missing sidecar {}: {e}", side.display()))
    })?)?;
    let mut times: Vec<Vec<f64>> = vec![Vec::new(); meta.dim];
    let mut r = csv::Reader::from_path(csv_path)?;
    for row in r.deserialize() {
        let row: EventRow = row?;
        if row.component >= meta.dim {
            return Err(Error::InvalidInput(format!(
                "component {} out of range (dim {})",
                row.component, meta.dim
            )));
        }
        times[row.component].push(row.time);
    }
    let series = EventSeries::new(meta.window, times)?;
    if series.counts() != meta.counts {
        return Err(Error::InvalidInput(
            "event counts disagree with sidecar".into(),
        ));
    }
    Ok(series)
}
