//! Min-plus algebra and a stochastic delay bound for a single Poisson flow.
use hybrid_v2v::snc::{delay_bound, horizontal_deviation, minplus_convolve, Curve, StochasticArrival, TailBound};

fn main() -> hybrid_v2v::Result<()> {
    let alpha = Curve::affine(3.0, 0.5);
    let beta = minplus_convolve(&Curve::rate_latency(2.0, 1.0), &Curve::rate_latency(1.0, 2.0));
    println!("end-to-end service curve: {:?}", beta.points());
    println!("deterministic delay bound: {:.3}", horizontal_deviation(&alpha, &beta, 0.0)?);

    let flow = StochasticArrival::poisson(0.4, 1.0, 0.5)?;
    println!("poisson flow: rho {:.4} sigma {:.4}", flow.rho(), flow.sigma());
    let alpha = Curve::linear(flow.rho());
    let beta = Curve::rate_latency(1.0, 2.0);
    let f = TailBound::exponential(0.5);
    let g = TailBound::exponential(1.0);
    for d in [4.0, 8.0, 16.0, 32.0] {
        println!("P(delay > {d:>4}) <= {:.3e}", delay_bound(&alpha, &beta, &f, &g, d)?);
    }
    Ok(())
}
