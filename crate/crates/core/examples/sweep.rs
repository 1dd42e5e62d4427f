//! Runs the full identity sweep and prints one summary line per record.

use std::time::Instant;

use phibbp::catalog::verify::{verify_all, SweepConfig};
use phibbp::catalog::Catalog;

fn main() {
    let start = Instant::now();
    let report = verify_all(Catalog::builtin(), &SweepConfig::default());
    for summary in report.summaries() {
        println!("{summary}");
    }
    for row in report.failures() {
        println!("FAIL {row}");
    }
    println!("{} checks, all pass: {}, {:.2?}", report.rows.len(), report.all_pass(), start.elapsed());
}
