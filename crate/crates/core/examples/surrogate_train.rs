//! Labels a small grid with the hybrid bound and fits the delay surrogate.
use hybrid_v2v::presets::per_slot;
use hybrid_v2v::surrogate::{generate_dataset, predict_delay, relative_error, train_mlp, DelayQuery, GridSpec, SurrogateHyper};

fn main() -> hybrid_v2v::Result<()> {
    let spec = GridSpec {
        lambda: [0.05, 0.1, 0.2].map(per_slot).to_vec(),
        n: vec![4, 6, 8],
        ..Default::default()
    };
    let ds = generate_dataset(&spec);
    println!("{} labelled points, {} skipped", ds.rows.len(), ds.skipped.len());
    let (model, report) = train_mlp(&ds.rows, &SurrogateHyper::default())?;
    println!("trained for {} epochs, held-out error {:.2}%", report.epochs, 100.0 * model.report.holdout_rel_error);
    let worst = ds.rows.iter().map(|r| relative_error(&model, r)).fold(0.0, f64::max);
    println!("worst relative error on the grid: {:.2}%", 100.0 * worst);
    let q = DelayQuery { p: 0.01, lambda: per_slot(0.15), n: 5, noise_level: 1.0, split: 0.5 };
    println!("{q:?} -> {:.1} slots", predict_delay(&model, &q).delay_slots);
    Ok(())
}
