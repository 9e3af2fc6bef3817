//! Seeded synthetic datasets for benchmarks and examples.

use crate::data::{Column, Dataset};
use crate::error::Result;
use crate::shapley::sample_rng;
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone)]
pub struct PlantedBinary {
    pub dataset: Dataset,
    /// Features carrying the additive signal, ascending.
    pub planted: Vec<usize>,
}

/// `n x d` Bernoulli(`density`) fingerprints with response
/// `y = sum_{j in planted} x_j + noise_sd * N(0, 1)`.
pub fn planted_binary(
    n: usize,
    d: usize,
    density: f64,
    signal: usize,
    noise_sd: f64,
    seed: u64,
) -> Result<PlantedBinary> {
    let mut rng = sample_rng(seed, 0);
    let mut planted = sample(&mut rng, d, signal.min(d)).into_vec();
    planted.sort_unstable();
    let columns: Vec<Column> = (0..d)
        .map(|_| Column::Numeric((0..n).map(|_| if rng.gen::<f64>() < density { 1.0 } else { 0.0 }).collect()))
        .collect();
    let responses = (0..n)
        .map(|i| {
            let signal: f64 = planted
                .iter()
                .map(|&j| match &columns[j] {
                    Column::Numeric(v) => v[i],
                    Column::Categorical { .. } => unreachable!(),
                })
                .sum();
            let noise: f64 = rng.sample(StandardNormal);
            signal + noise_sd * noise
        })
        .collect();
    let names = (0..d).map(|j| format!("bit{j}")).collect();
    Ok(PlantedBinary { dataset: Dataset::new(columns, names, responses)?, planted })
}

/// `n x d` standard Gaussian features with a random linear-plus-interaction response.
pub fn gaussian(n: usize, d: usize, seed: u64) -> Result<Dataset> {
    let mut rng = sample_rng(seed, 0);
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.sample(StandardNormal)).collect()).collect();
    let coef: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let responses = rows
        .iter()
        .map(|r| {
            let linear: f64 = r.iter().zip(&coef).map(|(x, b)| x * b).sum();
            linear + if d > 1 { 0.5 * r[0] * r[1] } else { 0.0 }
        })
        .collect();
    Dataset::from_rows(&rows, responses)
}
