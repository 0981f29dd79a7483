//! Variance-threshold selection: the eleven candidate thresholds and the
//! columns each one keeps.

use embedkit::reducers::{candidate_thresholds, Model, VarSelector};
use embedkit::{EmbeddingMatrix, FittedReducer, ReducerSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (n, d) = (500, 40);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    // column j is uniform on [0, 1] with a fraction of its rows squashed
    let values: Vec<f64> = (0..n * d)
        .map(|i| {
            let j = i % d;
            let v: f64 = rng.random();
            if rng.random::<f64>() < j as f64 / d as f64 {
                0.5
            } else {
                v
            }
        })
        .collect();
    let m = EmbeddingMatrix::from_f64((0..n).map(|i| i.to_string()).collect(), d, &values)?;

    for sel in VarSelector::all() {
        match FittedReducer::fit(&ReducerSpec::varthresh(sel), &m) {
            Ok(r) => {
                let Model::VarThresh(v) = &r.model else {
                    unreachable!()
                };
                println!(
                    "{sel:>8}: t = {:.5}, keeps {:>2} of {d}",
                    v.threshold,
                    v.selected.len()
                );
                if sel == VarSelector::MIN {
                    let t = candidate_thresholds(&v.variances);
                    println!("          candidates {:.4?}", t);
                }
            }
            Err(e) => println!("{sel:>8}: {e}"),
        }
    }
    Ok(())
}
