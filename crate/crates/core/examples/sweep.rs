//! A small technique × dimension sweep on a synthetic corpus, printed as
//! the TSV table plus retention rows.

use embedkit::pipeline::synthetic::{latent_corpus, SyntheticOptions};
use embedkit::pipeline::{run_sweep, SweepConfig};
use embedkit::{Kernel, ReducerSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let c = latent_corpus(&SyntheticOptions {
        languages: 4,
        train_pairs: 200,
        test_pairs: 80,
        dim: 32,
        latent_dim: 8,
        ..SyntheticOptions::default()
    })?;
    let cfg = SweepConfig::from_toml(
        r#"
        grid = [4, 8, 16]
        fit_budget = 1200
        seed = 3

        [[techniques]]
        technique = "ipca"

        [[techniques]]
        technique = "ica"
        "#,
    )?;
    let mut cfg = cfg;
    cfg.techniques.push(ReducerSpec::kpca(0, Kernel::Cosine));

    let table = run_sweep(&cfg, &c.train, &c.test, 0)?;
    if let Some(b) = &table.baseline {
        println!("baseline avg_r = {:.4}", b.aggregate.avg_r);
    }
    print!("{}", table.to_tsv());
    print!("{}", table.retention_tsv());
    println!("config sha256 {}", table.provenance.config_sha256);
    Ok(())
}
