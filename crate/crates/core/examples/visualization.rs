//! 2-D coordinates with gold-bin labels, ready for a scatter plot.

use embedkit::pipeline::synthetic::{latent_corpus, SyntheticOptions};
use embedkit::pipeline::{evaluate_reduced, export_visualization, fit_rows, gold_bin_labels};
use embedkit::{FittedReducer, ReducerSpec, Technique};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let c = latent_corpus(&SyntheticOptions {
        languages: 2,
        train_pairs: 150,
        test_pairs: 40,
        dim: 16,
        latent_dim: 4,
        ..SyntheticOptions::default()
    })?;
    let rows = fit_rows(&c.train, Technique::Ipca, None, 0)?;
    let r = FittedReducer::fit(&ReducerSpec::ipca(2), &rows)?;
    let labels = gold_bin_labels(&c.test, "l00");
    let tsv = export_visualization(&r, &c.test.matrices()["l00"], &labels)?;
    for line in tsv.lines().take(6) {
        println!("{line}");
    }
    println!("… {} rows", tsv.lines().count());
    println!(
        "avg_r in 2-D: {:.4}",
        evaluate_reduced(&r, &c.test)?.aggregate.avg_r
    );
    Ok(())
}
