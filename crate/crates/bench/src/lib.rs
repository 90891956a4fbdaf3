//! Synthetic inputs shared by the benchmarks.

use censusboost::rng::DetRng;
use censusboost::{Dataset, FeatureMatrix, LabelVector};

/// `n` rows shaped loosely like the encoded census matrix: a few continuous
/// columns followed by 0/1 indicators.
pub fn census_like(n: usize, seed: u64) -> Dataset {
    let mut rng = DetRng::new(seed, 0);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let age = 17.0 + rng.below(74) as f64;
        let hours = 1.0 + rng.below(99) as f64;
        let gain = if rng.below(10) == 0 { rng.below(20_000) as f64 } else { 0.0 };
        let group = rng.below(8) as usize;
        let mut row = vec![age, hours, gain];
        row.extend((0..8).map(|g| f64::from(u8::from(g == group))));
        let score = age / 90.0 + hours / 100.0 + f64::from(u8::from(gain > 5_000.0)) + group as f64 * 0.05;
        labels.push(score + 0.3 * rng.unit_f64() > 1.2);
        rows.push(row);
    }
    Dataset::new(FeatureMatrix::from_rows(&rows).unwrap(), LabelVector::new(labels)).unwrap()
}
