//! Evaluation report as a text table and as CSV.

use std::fmt::Write as _;

use radodom_core::evaluation::OdometryErrorReport;

/// Headline `label: XX / YY` followed by a per-length table.
pub fn format_report(label: &str, r: &OdometryErrorReport) -> String {
    let mut s = format!("{label}: {r}\n");
    if let Some(d) = &r.diagnostic {
        let _ = writeln!(s, "  note: {d}");
    }
    if !r.per_length.is_empty() {
        let _ = writeln!(s, "  {:>8} {:>10} {:>14} {:>9}", "length_m", "trans_%", "rot_deg/100m", "segments");
        for l in &r.per_length {
            let _ = writeln!(
                s,
                "  {:>8} {:>10.4} {:>14.4} {:>9}",
                l.length, l.translation_error, l.rotation_error, l.segments
            );
        }
    }
    s
}

pub const REPORT_CSV_HEADER: &str = "frame,length_m,translation_pct,rotation_deg_per_100m,segments\n";

/// CSV rows for one frame; the `all` row carries the segment-weighted mean.
pub fn report_csv_rows(frame: &str, r: &OdometryErrorReport) -> String {
    let mut s = format!("{frame},all,{},{},{}\n", r.translation_error, r.rotation_error, r.segments);
    for l in &r.per_length {
        let _ = writeln!(s, "{frame},{},{},{},{}", l.length, l.translation_error, l.rotation_error, l.segments);
    }
    s
}
