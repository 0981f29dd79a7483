//! Incremental PCA over batches, compared with a one-shot fit.

use embedkit::reducers::{fit_ipca, IncrementalPca, Model};
use embedkit::EmbeddingMatrix;
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (n, d, k) = (2000, 32, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let values: Vec<f64> = (0..n * d)
        .map(|i| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z * (1.0 + 4.0 * (-((i % d) as f64) / 3.0).exp())
        })
        .collect();
    let m = EmbeddingMatrix::from_f64((0..n).map(|i| i.to_string()).collect(), d, &values)?;

    let whole = fit_ipca(&m, k, Some(n))?;
    let batched = fit_ipca(&m, k, Some(256))?;
    let (Model::Ipca(a), Model::Ipca(b)) = (&whole.model, &batched.model) else {
        unreachable!()
    };
    println!("one batch : {:.4?}", a.explained_variance_ratio());
    println!("256 / step: {:.4?}", b.explained_variance_ratio());

    // the streaming interface, fed by hand
    let x = m.to_dmatrix();
    let mut ipca = IncrementalPca::new(k, d)?;
    for start in (0..n).step_by(500) {
        let rows: DMatrix<f64> = x.rows(start, 500).into_owned();
        ipca.partial_fit(&rows)?;
    }
    println!("fed {} rows by hand", ipca.samples_seen());
    let model = ipca.finish()?;
    println!("singular values: {:.2?}", model.singular_values);

    let y = whole.transform(&m)?;
    println!("{} × {} after transform", y.n_rows(), y.dim());
    Ok(())
}
