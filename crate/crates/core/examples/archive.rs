//! Saving and loading fitted reducers; transforms agree bit for bit.

use embedkit::reducers::{load_reducer, save_reducer, ReducerError, VarSelector};
use embedkit::{EmbeddingMatrix, FittedReducer, Kernel, ReducerSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (n, d) = (80, 6);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let values: Vec<f64> = (0..n * d)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let m = EmbeddingMatrix::from_f64((0..n).map(|i| i.to_string()).collect(), d, &values)?;

    let mut umap = ReducerSpec::umap(2, 8);
    umap.n_epochs = 50;
    let specs = [
        ReducerSpec::ipca(3),
        ReducerSpec::ica(3),
        ReducerSpec::kpca(3, Kernel::Poly),
        ReducerSpec::varthresh(VarSelector::decile(5).unwrap()),
        umap,
    ];
    for spec in specs {
        let r = FittedReducer::fit(&spec, &m)?;
        let bytes = save_reducer(&r);
        let back = load_reducer(&bytes)?;
        let same = back.transform(&m)? == r.transform(&m)?;
        println!(
            "{:<17} {:>6} bytes, identical transform: {same}",
            spec.label(),
            bytes.len()
        );
    }

    let mut bytes = save_reducer(&FittedReducer::fit(&ReducerSpec::ipca(2), &m)?);
    bytes[4] = 9;
    match load_reducer(&bytes) {
        Err(ReducerError::VersionMismatch { found, expected }) => {
            println!("version {found} rejected (want {expected})")
        }
        other => println!("unexpected: {other:?}"),
    }
    Ok(())
}
