//! UMAP on three blobs: fit, embed new points, check where they land.

use embedkit::reducers::Model;
use embedkit::{EmbeddingMatrix, FittedReducer, ReducerSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn blobs(per: usize, seed: u64) -> EmbeddingMatrix {
    let d = 9;
    let noise = Normal::new(0.0, 0.7).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::new();
    for b in 0..3 {
        for _ in 0..per {
            for j in 0..d {
                values.push(if j / 3 == b { 4.0 } else { 0.0 } + noise.sample(&mut rng));
            }
        }
    }
    EmbeddingMatrix::from_f64(
        (0..3 * per).map(|i| format!("b{}-{i}", i / per)).collect(),
        d,
        &values,
    )
    .unwrap()
}

fn centroid(y: &EmbeddingMatrix, rows: std::ops::Range<usize>) -> [f64; 2] {
    let n = rows.len() as f64;
    let mut c = [0.0; 2];
    for i in rows {
        c[0] += f64::from(y.row(i)[0]) / n;
        c[1] += f64::from(y.row(i)[1]) / n;
    }
    c
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let train = blobs(60, 1);
    let spec = ReducerSpec::umap(2, 10).with_seed(7);
    let r = FittedReducer::fit(&spec, &train)?;
    let Model::Umap(u) = &r.model else {
        unreachable!()
    };
    println!(
        "curve a = {:.4}, b = {:.4}; spectral init: {}",
        u.a, u.b, u.spectral_init
    );

    let y = r.transform(&train)?;
    let fresh = r.transform(&blobs(10, 2))?;
    for b in 0..3 {
        let c = centroid(&y, b * 60..(b + 1) * 60);
        let f = centroid(&fresh, b * 10..(b + 1) * 10);
        println!(
            "blob {b}: train centroid ({:6.2}, {:6.2}), new points ({:6.2}, {:6.2})",
            c[0], c[1], f[0], f[1]
        );
    }
    Ok(())
}
