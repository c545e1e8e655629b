//! Basic Safety Message CSV ingestion.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const BSM_HEADER: [&str; 8] =
    ["device_id", "timestamp_s", "lat", "lon", "speed_mph", "heading_deg", "yaw_rate_deg_s", "confidence_pct"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BsmRecord {
    pub device_id: u64,
    pub timestamp_s: f64,
    pub lat: f64,
    pub lon: f64,
    pub speed_mph: f64,
    pub heading_deg: f64,
    pub yaw_rate_deg_s: f64,
    pub confidence_pct: f64,
}

impl BsmRecord {
    fn violation(&self) -> Option<&'static str> {
        let fields = [
            self.timestamp_s,
            self.lat,
            self.lon,
            self.speed_mph,
            self.heading_deg,
            self.yaw_rate_deg_s,
            self.confidence_pct,
        ];
        if fields.iter().any(|v| !v.is_finite()) {
            Some("non-finite value")
        } else if self.speed_mph < 0.0 {
            Some("negative speed")
        } else if !(-360.0..=360.0).contains(&self.yaw_rate_deg_s) {
            Some("yaw rate outside [-360, 360]")
        } else if !(0.0..=100.0).contains(&self.confidence_pct) {
            Some("confidence outside [0, 100]")
        } else {
            None
        }
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: {msg}")]
    Schema { line: u64, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IngestOptions {
    /// Nominal sample period.
    pub period_s: f64,
    /// A gap longer than this many periods starts a new trip.
    pub gap_factor: f64,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self { period_s: 0.1, gap_factor: 2.0 }
    }
}

/// A gap-free run of one device's records.
#[derive(Debug, Clone, PartialEq)]
pub struct Trip {
    pub device_id: u64,
    pub records: Vec<BsmRecord>,
}

impl Trip {
    pub fn speeds(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.speed_mph).collect()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rejection {
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct IngestReport {
    pub trips: Vec<Trip>,
    pub rows_read: usize,
    pub rejected: Vec<Rejection>,
}

pub fn ingest_bsm(path: &Path, opts: &IngestOptions) -> Result<IngestReport, IngestError> {
    let file = std::fs::File::open(path).map_err(|source| IngestError::Io { path: path.display().to_string(), source })?;
    ingest_bsm_reader(file, opts)
}

/// Reads BSM rows, rejecting (and counting) rows that fail to parse or
/// violate record invariants, and splits each device's rows into trips.
/// Rows of one device whose timestamp does not advance are rejected.
pub fn ingest_bsm_reader<R: Read>(reader: R, opts: &IngestOptions) -> Result<IngestReport, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(|e| IngestError::Schema { line: 1, msg: e.to_string() })?.clone();
    let names: Vec<&str> = header.iter().collect();
    if names != BSM_HEADER {
        return Err(IngestError::Schema { line: 1, msg: format!("expected header `{}`, found `{}`", BSM_HEADER.join(","), names.join(",")) });
    }

    let mut report = IngestReport::default();
    let mut by_device: std::collections::BTreeMap<u64, Vec<BsmRecord>> = Default::default();
    for row in rdr.records() {
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                match e.kind() {
                    csv::ErrorKind::UnequalLengths { .. } => {
                        report.rows_read += 1;
                        report.rejected.push(Rejection { line, reason: "wrong number of fields".into() });
                        continue;
                    }
                    _ => return Err(IngestError::Schema { line, msg: e.to_string() }),
                }
            }
        };
        report.rows_read += 1;
        let line = row.position().map_or(0, |p| p.line());
        let rec: BsmRecord = match row.deserialize(Some(&header)) {
            Ok(r) => r,
            Err(e) => {
                report.rejected.push(Rejection { line, reason: format!("unparsable: {e}") });
                continue;
            }
        };
        if let Some(why) = rec.violation() {
            report.rejected.push(Rejection { line, reason: why.into() });
            continue;
        }
        let rows = by_device.entry(rec.device_id).or_default();
        if rows.last().is_some_and(|p| rec.timestamp_s <= p.timestamp_s) {
            report.rejected.push(Rejection { line, reason: "timestamp does not advance".into() });
            continue;
        }
        rows.push(rec);
    }

    let max_gap = opts.gap_factor * opts.period_s;
    for (device_id, rows) in by_device {
        let mut trip: Vec<BsmRecord> = Vec::new();
        for r in rows {
            if trip.last().is_some_and(|p| r.timestamp_s - p.timestamp_s > max_gap + 1e-9) {
                report.trips.push(Trip { device_id, records: std::mem::take(&mut trip) });
            }
            trip.push(r);
        }
        if !trip.is_empty() {
            report.trips.push(Trip { device_id, records: trip });
        }
    }
    Ok(report)
}

pub fn write_bsm_csv<W: std::io::Write>(w: W, records: &[BsmRecord]) -> std::io::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(BSM_HEADER)?;
    for r in records {
        out.write_record([
            r.device_id.to_string(),
            format!("{:.1}", r.timestamp_s),
            format!("{:.7}", r.lat),
            format!("{:.7}", r.lon),
            format!("{:.4}", r.speed_mph),
            format!("{:.3}", r.heading_deg),
            format!("{:.4}", r.yaw_rate_deg_s),
            format!("{:.2}", r.confidence_pct),
        ])?;
    }
    out.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(device: u64, times: impl Iterator<Item = f64>) -> String {
        times.map(|t| format!("{device},{t:.1},42.3,-83.7,30.0,90.0,0.5,95\n")).collect()
    }

    fn ingest(body: &str) -> IngestReport {
        let text = format!("{}\n{body}", BSM_HEADER.join(","));
        ingest_bsm_reader(text.as_bytes(), &IngestOptions::default()).unwrap()
    }

    #[test]
    fn contiguous_rows_make_one_trip() {
        let r = ingest(&rows(1, (0..100).map(|k| k as f64 * 0.1)));
        assert_eq!(r.trips.len(), 1);
        assert_eq!(r.trips[0].len(), 100);
        assert!(r.rejected.is_empty());
    }

    #[test]
    fn long_gap_splits_trip() {
        let body = rows(1, (0..50).map(|k| k as f64 * 0.1)) + &rows(1, (0..50).map(|k| 10.0 + k as f64 * 0.1));
        let r = ingest(&body);
        assert_eq!(r.trips.iter().map(Trip::len).collect::<Vec<_>>(), vec![50, 50]);
    }

    #[test]
    fn devices_are_separated() {
        let body = rows(2, (0..5).map(|k| k as f64 * 0.1)) + &rows(1, (0..7).map(|k| k as f64 * 0.1));
        let r = ingest(&body);
        let ids: Vec<(u64, usize)> = r.trips.iter().map(|t| (t.device_id, t.len())).collect();
        assert_eq!(ids, vec![(1, 7), (2, 5)]);
    }

    #[test]
    fn negative_speed_is_rejected_with_line() {
        let body = rows(1, [0.0, 0.1].into_iter()) + "1,0.2,42.3,-83.7,-3,90.0,0.5,95\n" + "1,0.3,42.3,-83.7,abc,90,0,95\n";
        let r = ingest(&body);
        assert_eq!(r.rows_read, 4);
        assert_eq!(r.rejected.len(), 2);
        assert_eq!(r.rejected[0], Rejection { line: 4, reason: "negative speed".into() });
        assert_eq!(r.rejected[1].line, 5);
        assert_eq!(r.trips[0].len(), 2);
    }

    #[test]
    fn ragged_row_is_counted() {
        let r = ingest(&(rows(1, [0.0].into_iter()) + "1,0.1,42.3\n"));
        assert_eq!(r.rejected.len(), 1);
        assert_eq!(r.rejected[0].line, 3);
    }

    #[test]
    fn wrong_header_is_a_schema_error() {
        let err = ingest_bsm_reader("id,t,speed\n1,0,3\n".as_bytes(), &IngestOptions::default()).unwrap_err();
        assert!(matches!(err, IngestError::Schema { line: 1, .. }));
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = ingest_bsm(Path::new("/nonexistent/bsm.csv"), &IngestOptions::default()).unwrap_err();
        assert!(matches!(err, IngestError::Io { .. }));
    }

    #[test]
    fn write_then_read() {
        let recs: Vec<BsmRecord> = (0..20)
            .map(|k| BsmRecord {
                device_id: 4,
                timestamp_s: k as f64 * 0.1,
                lat: 42.0,
                lon: -83.0,
                speed_mph: 20.0 + k as f64,
                heading_deg: 10.0,
                yaw_rate_deg_s: -2.0,
                confidence_pct: 90.0,
            })
            .collect();
        let mut buf = Vec::new();
        write_bsm_csv(&mut buf, &recs).unwrap();
        let r = ingest_bsm_reader(buf.as_slice(), &IngestOptions::default()).unwrap();
        assert_eq!(r.trips.len(), 1);
        assert_eq!(r.trips[0].speeds(), recs.iter().map(|r| r.speed_mph).collect::<Vec<_>>());
    }
}
