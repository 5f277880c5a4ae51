use std::collections::HashMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::perception::StructuredEvent;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WindowError {
    #[error("no events to aggregate")]
    NoEvents,
    #[error("window length and stride must be positive")]
    BadWindow,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WindowConfig {
    pub window_len_ms: i64,
    /// Defaults to the window length (tumbling windows).
    pub stride_ms: Option<i64>,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self { window_len_ms: 60_000, stride_ms: None }
    }
}

/// Windows x event-types counts with a frozen column order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventMatrix {
    pub counts: Vec<Vec<u32>>,
    pub event_order: Vec<String>,
    pub window_start_ms: Vec<i64>,
    pub window_len_ms: i64,
}

impl EventMatrix {
    pub fn rows(&self) -> usize {
        self.counts.len()
    }

    pub fn dim(&self) -> usize {
        self.event_order.len()
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows(), self.dim(), |u, j| f64::from(self.counts[u][j]))
    }
}

/// Counts template occurrences per window. Columns follow first appearance.
pub fn aggregate_windows(events: &[StructuredEvent], cfg: &WindowConfig) -> Result<EventMatrix, WindowError> {
    let len = cfg.window_len_ms;
    let stride = cfg.stride_ms.unwrap_or(len);
    if len <= 0 || stride <= 0 {
        return Err(WindowError::BadWindow);
    }
    let first = events.first().ok_or(WindowError::NoEvents)?;
    let mut order: Vec<String> = Vec::new();
    let mut column: HashMap<&str, usize> = HashMap::new();
    for e in events {
        if !column.contains_key(e.template_id.as_str()) {
            column.insert(&e.template_id, order.len());
            order.push(e.template_id.clone());
        }
    }
    let (mut lo, mut hi) = (first.timestamp_ms, first.timestamp_ms);
    for e in events {
        lo = lo.min(e.timestamp_ms);
        hi = hi.max(e.timestamp_ms);
    }
    let rows = ((hi - lo) / stride + 1) as usize;
    let mut counts = vec![vec![0u32; order.len()]; rows];
    for e in events {
        let offset = e.timestamp_ms - lo;
        let j = column[e.template_id.as_str()];
        // every window u with start <= offset < start + len
        let last = (offset / stride) as usize;
        let mut u = last as i64;
        while u >= 0 && offset < u * stride + len {
            counts[u as usize][j] += 1;
            u -= 1;
        }
    }
    Ok(EventMatrix {
        counts,
        event_order: order,
        window_start_ms: (0..rows as i64).map(|u| lo + u * stride).collect(),
        window_len_ms: len,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perception::Tier;

    fn ev(id: &str, ts: i64) -> StructuredEvent {
        StructuredEvent {
            template_id: id.into(),
            template_text: id.into(),
            timestamp_ms: ts,
            source_id: "s".into(),
            tier: Tier::L1,
        }
    }

    #[test]
    fn single_cell() {
        let m = aggregate_windows(&[ev("a", 0), ev("a", 10_000), ev("a", 59_000)], &WindowConfig::default()).unwrap();
        assert_eq!(m.counts, vec![vec![3]]);
    }

    #[test]
    fn boundary_rows() {
        let m = aggregate_windows(&[ev("a", 0), ev("a", 90_000)], &WindowConfig::default()).unwrap();
        assert_eq!(m.rows(), 2);
        assert_eq!(m.window_start_ms, vec![0, 60_000]);
    }

    #[test]
    fn same_timestamp_is_one_row() {
        let m = aggregate_windows(&[ev("a", 5), ev("b", 5)], &WindowConfig::default()).unwrap();
        assert_eq!(m.counts, vec![vec![1, 1]]);
    }

    #[test]
    fn hand_tallied_four_minutes() {
        // minute: 0      1        2       3
        // a:      2      0        1       1
        // b:      1      2        0       1
        // c:      0      1        2       1
        let s = 60_000;
        let events = vec![
            ev("a", 0),
            ev("b", 1_000),
            ev("a", 30_000),
            ev("b", s + 5),
            ev("c", s + 10),
            ev("b", s + 59_999),
            ev("c", 2 * s),
            ev("a", 2 * s + 1),
            ev("c", 2 * s + 2),
            ev("a", 3 * s),
            ev("b", 3 * s + 1),
            ev("c", 3 * s + 2),
        ];
        let m = aggregate_windows(&events, &WindowConfig::default()).unwrap();
        assert_eq!(m.event_order, vec!["a", "b", "c"]);
        assert_eq!(m.counts, vec![vec![2, 1, 0], vec![0, 2, 1], vec![1, 0, 2], vec![1, 1, 1]]);
    }

    #[test]
    fn overlapping_stride_counts_each_covering_window() {
        let cfg = WindowConfig { window_len_ms: 60_000, stride_ms: Some(30_000) };
        let m = aggregate_windows(&[ev("a", 0), ev("a", 45_000)], &cfg).unwrap();
        assert_eq!(m.counts, vec![vec![2], vec![1]]);
    }

    #[test]
    fn errors() {
        assert_eq!(aggregate_windows(&[], &WindowConfig::default()), Err(WindowError::NoEvents));
        let bad = WindowConfig { window_len_ms: 0, stride_ms: None };
        assert_eq!(aggregate_windows(&[ev("a", 0)], &bad), Err(WindowError::BadWindow));
    }
}
