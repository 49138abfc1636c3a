//! Runs a preset through the harness and prints the aggregate trace.
//!
//! `cargo run --release --example harness_run -- sge-desk /tmp/sge-desk`

use std::path::PathBuf;

use sgex::harness::{self, read_aggregate_csv, OutputFormat};

fn main() -> sgex::Result<()> {
    let mut args = std::env::args().skip(1);
    let preset = args.next().unwrap_or_else(|| "noiseless-1d".into());
    let out: PathBuf = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join(format!("sgex-{preset}")));
    let spec = harness::load_spec(&preset)?;
    for cell in harness::execute(&spec, &out, OutputFormat::Csv, None)? {
        println!("{} -> {} ({} failed trials)", cell.label, cell.dir.display(), cell.failures.len());
        let agg = read_aggregate_csv(&cell.dir.join("aggregate.csv"))?;
        let step = (agg.rows.len() / 10).max(1);
        for r in agg.rows.iter().step_by(step) {
            println!("  calls = {:>10}  median = {:.3e}  [{:.3e}, {:.3e}]", r.oracle_calls, r.median_l2, r.decile10_l2, r.decile90_l2);
        }
    }
    Ok(())
}
