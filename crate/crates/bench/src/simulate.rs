//! Synthetic data generators and the bundled attitude survey.

use pmest_core::{derive_rng, preprocess, Dataset, PreprocessConfig, Preprocessed, RawTable};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::config::LinearDesign;
use crate::BenchError;

/// Coefficients of the logistic simulation, intercept first.
pub const LOGISTIC_BETA: [f64; 7] = [0.0, -1.0, -0.5, -0.25, 0.0, 0.75, 1.5];

/// Chatterjee-Price attitude survey, 30 departments by 7 percentage columns.
pub const ATTITUDE_CSV: &str = include_str!("../data/attitude.csv");

fn design_row<R: Rng + ?Sized>(p: usize, rng: &mut R) -> Vec<f64> {
    let mut row = Vec::with_capacity(p);
    row.push(1.0);
    row.extend((1..p).map(|_| rng.random_range(-1.0..=1.0)));
    row
}

/// `n` draws with `x = (1, U[-1, 1]^6)` and `y ~ Bernoulli(eta(x' beta))`.
pub fn simulate_logistic(n: usize, seed: u64) -> Dataset {
    let mut rng = derive_rng(seed, &[]);
    let p = LOGISTIC_BETA.len();
    let mut x = Vec::with_capacity(n * p);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let row = design_row(p, &mut rng);
        let u: f64 = row.iter().zip(LOGISTIC_BETA).map(|(a, b)| a * b).sum();
        let prob = pmest_core::score::logistic(u);
        y.push(if rng.random::<f64>() < prob { 1.0 } else { 0.0 });
        x.extend(row);
    }
    Dataset::new(p, x, y).expect("consistent shapes")
}

/// Linear data `y = x' beta + N(0, sd^2)`.
///
/// With `design.clamp = Some(c)` the response is clipped to `[-t, t]` with
/// `t = c * sd(y)` and divided by `t`, which puts it in `[-1, 1]`. The second
/// return value is the coefficient vector on the scale of the returned
/// response (`beta / t`, exact only where no clipping happened).
pub fn simulate_linear(n: usize, design: &LinearDesign, seed: u64) -> (Dataset, Vec<f64>) {
    let mut rng = derive_rng(seed, &[]);
    let p = design.p;
    let beta = design.beta();
    let mut x = Vec::with_capacity(n * p);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let row = design_row(p, &mut rng);
        let z: f64 = rng.sample(StandardNormal);
        y.push(row.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>() + design.noise_sd * z);
        x.extend(row);
    }
    let beta_scaled = match design.clamp {
        Some(c) => {
            let slope_var: f64 = beta.iter().skip(1).map(|b| b * b / 3.0).sum();
            let t = c * (slope_var + design.noise_sd * design.noise_sd).sqrt();
            y.iter_mut().for_each(|v| *v = v.clamp(-t, t) / t);
            beta.iter().map(|b| b / t).collect()
        }
        None => beta,
    };
    (Dataset::new(p, x, y).expect("consistent shapes"), beta_scaled)
}

pub fn attitude_table() -> RawTable {
    RawTable::from_csv(ATTITUDE_CSV.as_bytes()).expect("bundled attitude data parses")
}

/// Preprocessing used for the attitude data: `rating` is the response, the
/// other six columns are covariates, no log transforms.
pub fn attitude_preprocess() -> PreprocessConfig {
    PreprocessConfig { response: "rating".into(), ..Default::default() }
}

/// Loads `path` (or the bundled attitude data) and preprocesses it.
pub fn load_csv_dataset(
    path: Option<&std::path::Path>,
    config: Option<&PreprocessConfig>,
) -> Result<Preprocessed, BenchError> {
    let table = match path {
        Some(p) => RawTable::from_csv(std::fs::File::open(p)?)?,
        None => attitude_table(),
    };
    let default = attitude_preprocess();
    Ok(preprocess(&table, config.unwrap_or(&default))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use pmest_core::least_squares;

    #[test]
    fn logistic_simulation_is_seeded() {
        assert_eq!(simulate_logistic(50, 3), simulate_logistic(50, 3));
        assert_ne!(simulate_logistic(50, 3), simulate_logistic(50, 4));
        let d = simulate_logistic(10, 1);
        assert_eq!(d.p(), 7);
        assert!(d.rows().all(|(x, y)| x[0] == 1.0 && x.iter().all(|v| v.abs() <= 1.0) && (y == 0.0 || y == 1.0)));
    }

    #[test]
    fn logistic_frequency_matches_link() {
        // Monte Carlo oracle for E[eta(x' beta)] from an independent stream.
        let n = 100_000;
        let d = simulate_logistic(n, 7);
        let ybar = d.y().iter().sum::<f64>() / n as f64;
        let mut rng = derive_rng(99, &[]);
        let mc = (0..n)
            .map(|_| {
                let row = design_row(7, &mut rng);
                pmest_core::score::logistic(row.iter().zip(LOGISTIC_BETA).map(|(a, b)| a * b).sum())
            })
            .sum::<f64>()
            / n as f64;
        assert!((ybar - mc).abs() < 0.01, "{ybar} vs {mc}");
    }

    #[test]
    fn noiseless_linear_recovers_beta() {
        let design = LinearDesign { p: 4, noise_sd: 0.0, beta: Some(vec![0.3, -0.2, 0.1, 0.05]), clamp: None };
        let (d, beta) = simulate_linear(40, &design, 2);
        let ls = least_squares(&d).unwrap();
        for (a, b) in ls.iter().zip(&beta) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn clamped_response_is_bounded() {
        let design = LinearDesign { p: 3, noise_sd: 2.0, beta: None, clamp: Some(1.0) };
        let (d, _) = simulate_linear(500, &design, 5);
        assert!(d.y().iter().all(|y| y.abs() <= 1.0));
        assert!(d.y().iter().any(|y| y.abs() == 1.0));
        assert_eq!(simulate_linear(20, &design, 5), simulate_linear(20, &design, 5));
    }

    #[test]
    fn attitude_has_thirty_rows_and_seven_columns() {
        let t = attitude_table();
        assert_eq!(t.rows.len(), 30);
        assert_eq!(t.headers.len(), 7);
        let pre = load_csv_dataset(None, None).unwrap();
        assert_eq!(pre.data.n(), 30);
        assert_eq!(pre.data.p(), 7);
        assert_eq!(pre.covariate_names.len(), 6);
    }
}
