//! Language-balanced subsampling of a synthetic 16-language training set.

use std::collections::BTreeSet;

use embedkit::pipeline::stratified_subsample;
use embedkit::pipeline::synthetic::{latent_corpus, SyntheticOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let c = latent_corpus(&SyntheticOptions {
        train_pairs: 1000,
        test_pairs: 1,
        dim: 4,
        latent_dim: 2,
        ..SyntheticOptions::default()
    })?;
    let s = stratified_subsample(&c.train, 100, 42)?;
    let covered: BTreeSet<usize> = s.pairs().into_iter().map(|(_, i)| i).collect();
    println!("{} pairs, {} distinct source pairs", s.len(), covered.len());
    for (lang, idx) in s.per_language.iter().take(3) {
        println!("{lang}: {} pairs, first {:?}", idx.len(), &idx[..5]);
    }
    let rows = s.rows(&c.train)?;
    println!(
        "fit matrix: {} × {}, first id {}",
        rows.n_rows(),
        rows.dim(),
        rows.ids()[0]
    );
    Ok(())
}
