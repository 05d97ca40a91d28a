//! Relay chain: the 1% delay quantile as the number of hops grows, at 0.1
//! packets per 100 slots.
use hybrid_v2v::experiments::mmwave_quantiles;

fn main() -> hybrid_v2v::Result<()> {
    let ns = [5, 10, 20];
    let q = mmwave_quantiles(&ns, 0.1)?;
    for (n, d) in ns.iter().zip(&q) {
        println!("n = {n:>2}: P(delay > {d:.0} slots) <= 0.01");
    }
    println!("growth 5->10: {:.2}, 10->20: {:.2}", q[1] / q[0], q[2] / q[1]);
    Ok(())
}
