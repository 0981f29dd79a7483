//! Scoring statistics on small fixtures: per-task Spearman,
//! Fisher-z averaging, paired t-test, reduction bookkeeping, retention.

use std::collections::BTreeMap;

use embedkit::stats::{
    aggregate_mean_std, fisher_average, paired_t_test, reduction_percentage, retention_analysis,
    spearman, DEFAULT_RETENTION_FLOOR,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let gold = [0.0, 1.2, 2.5, 2.5, 4.8, 5.0];
    let pred = [0.1, 0.3, 0.2, 0.5, 0.7, 0.9];
    println!("spearman = {:.4}", spearman(&pred, &gold)?);

    let agg = fisher_average(&[0.5, 0.9])?;
    println!(
        "fisher average of 0.5, 0.9 = {:.7} (z = {:.5})",
        agg.avg_r, agg.fisher_z_mean
    );

    let before = [0.4342, 0.4531, 0.3274, 0.2855, 0.7096];
    let after = [0.5019, 0.5230, 0.5269, 0.5392, 0.7488];
    let t = paired_t_test(&before, &after)?;
    println!("paired t = {:.4}, df = {}, p = {:.4}", t.t, t.df, t.p);

    let dims = [(768, 89), (768, 49), (768, 49), (1024, 63), (768, 89)];
    let pcts: Vec<f64> = dims
        .iter()
        .map(|&(d, k)| reduction_percentage(d, k))
        .collect::<Result<_, _>>()?;
    let (m, s) = aggregate_mean_std(&pcts)?;
    println!("reductions {:.2?} -> {m:.2} ± {s:.2}", pcts);

    let curve = BTreeMap::from([(10, 0.31), (49, 0.40), (89, 0.4779), (129, 0.45)]);
    let grid: Vec<usize> = curve.keys().copied().collect();
    let row = retention_analysis("ica", 768, 0.4342, &curve, &grid, DEFAULT_RETENTION_FLOOR)?;
    println!(
        "retention: {}% of baseline at {} dims ({:.0}% reduction), score {:.4}",
        row.threshold_retained, row.dims, row.reduction_pct, row.score
    );
    Ok(())
}
