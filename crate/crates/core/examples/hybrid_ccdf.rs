//! Splitting traffic between the two channels.
use hybrid_v2v::hybrid::{average_delay, Channel, ChannelBound, HybridConfig};
use hybrid_v2v::presets::per_slot;

fn main() -> hybrid_v2v::Result<()> {
    let cfg = HybridConfig::default().with_lambda(per_slot(0.1)).with_n(6);
    let channels = [Channel::Cellular, Channel::Mmwave, Channel::Hybrid];
    let bounds = channels.map(|c| ChannelBound::new(&cfg, c));
    println!("{:>10} {:>12} {:>12} {:>12}", "x", "cellular", "mmwave", "hybrid");
    for x in [1e2, 1e3, 1e4, 3e4, 1e5] {
        print!("{x:>10}");
        for b in &bounds {
            match b {
                Ok(b) => print!(" {:>12.3e}", b.ccdf(x)?.probability),
                Err(e) => print!(" {:>12}", e.kind()),
            }
        }
        println!();
    }
    for split in [0.2, 0.5, 0.8] {
        let m = average_delay(&cfg.clone().with_split(split), Channel::Hybrid)?;
        println!("split {split}: mean delay bound {:.1} slots", m.mean);
    }
    Ok(())
}
