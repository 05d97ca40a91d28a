//! Runs one experiment and writes its series as CSV.
//!
//! cargo run --release --example reproduce_figure -- fig6 /tmp/fig6
use std::path::PathBuf;

use hybrid_v2v::experiments::{default_surrogate, run_figure, ExperimentOptions, Figure};

fn main() -> hybrid_v2v::Result<()> {
    let mut args = std::env::args().skip(1);
    let fig: Figure = args.next().unwrap_or_else(|| "fig6".into()).parse()?;
    let dir = PathBuf::from(args.next().unwrap_or_else(|| format!("out/{fig}")));
    let opts = ExperimentOptions::default();
    let surrogate = if fig.needs_surrogate() { Some(default_surrogate(opts.seed)?) } else { None };
    let report = run_figure(fig, &opts, surrogate.as_ref())?;
    std::fs::create_dir_all(&dir)?;
    for s in &report.series {
        let path = dir.join(format!("{}.csv", s.name));
        s.write_csv(std::fs::File::create(&path)?)?;
        println!("wrote {}", path.display());
    }
    for c in &report.checks {
        println!("{} {}: {}", if c.passed { "ok  " } else { "FAIL" }, c.name, c.detail);
    }
    Ok(())
}
