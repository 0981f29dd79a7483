//! Kernel PCA with each kernel on two concentric rings, plus the dense
//! spectrum of the centered Gram matrix it decomposes.

use embedkit::reducers::kpca::{center_gram, gram_matrix, KernelParams};
use embedkit::reducers::Model;
use embedkit::{EmbeddingMatrix, FittedReducer, Kernel, ReducerSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n = 120;
    let mut values = Vec::new();
    for i in 0..n {
        let t = i as f64 / n as f64 * std::f64::consts::TAU;
        let r = if i % 2 == 0 { 1.0 } else { 3.0 };
        values.extend([r * t.cos(), r * t.sin(), 0.1 * (3.0 * t).sin()]);
    }
    let m = EmbeddingMatrix::from_f64((0..n).map(|i| i.to_string()).collect(), 3, &values)?;

    for kernel in Kernel::ALL {
        let r = FittedReducer::fit(&ReducerSpec::kpca(3, kernel), &m)?;
        let Model::Kpca(k) = &r.model else {
            unreachable!()
        };
        let y = r.transform(&m)?;
        println!(
            "{kernel:>7}: eigenvalues {:.3?}, first row {:.3?}",
            k.eigenvalues,
            y.row(0)
        );
    }

    // raw rows here, so these differ from the fitted (standard-scaled) model
    let (centered, _, _) = center_gram(&gram_matrix(&m, &KernelParams::new(Kernel::Rbf, 3)));
    let eig = embedkit::linalg::symmetric_eigen_desc(centered);
    println!(
        "rbf centered Gram, top eigenvalues: {:.3?}",
        &eig.values[..5]
    );
    Ok(())
}
