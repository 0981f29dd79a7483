//! FastICA unmixing two linearly mixed non-Gaussian signals.

use embedkit::reducers::fit_ica;
use embedkit::EmbeddingMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn corr(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n = 4000;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let s1: Vec<f64> = (0..n).map(|i| ((i as f64) * 0.05).sin().signum()).collect();
    let s2: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut values = Vec::with_capacity(2 * n);
    for i in 0..n {
        values.push(0.8 * s1[i] + 0.6 * s2[i]);
        values.push(0.3 * s1[i] - 0.9 * s2[i]);
    }
    let x = EmbeddingMatrix::from_f64((0..n).map(|i| i.to_string()).collect(), 2, &values)?;

    let r = fit_ica(&x, 2, 200, 1e-6, 0)?;
    let y = r.transform(&x)?;
    for c in 0..2 {
        let comp: Vec<f64> = y.rows().map(|row| f64::from(row[c])).collect();
        println!(
            "component {c}: |corr| with square wave {:.3}, with uniform noise {:.3}",
            corr(&comp, &s1).abs(),
            corr(&comp, &s2).abs()
        );
    }
    Ok(())
}
