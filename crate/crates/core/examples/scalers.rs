//! The scaler bound to each technique, fitted and inverted on a tiny matrix.

use embedkit::preprocess::{fit_scaler, scaler_for};
use embedkit::{EmbeddingMatrix, Technique};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let m = EmbeddingMatrix::new(
        (0..4).map(|i| format!("r{i}")).collect(),
        3,
        vec![
            1.0, 10.0, 5.0, 2.0, 20.0, 5.0, 3.0, 30.0, 5.0, 4.0, 40.0, 5.0,
        ],
    )?;
    for t in Technique::ALL {
        let kind = scaler_for(t);
        let s = fit_scaler(kind, &m)?;
        let y = s.apply(&m)?;
        let back = s.invert(&y)?;
        let err = back
            .values()
            .iter()
            .zip(m.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f32, f32::max);
        println!(
            "{t:>9} -> {kind:?}: first row {:?}, round-trip error {err:.1e}",
            y.row(0)
        );
    }
    // the constant third column maps to 0 under both real scalers
    Ok(())
}
