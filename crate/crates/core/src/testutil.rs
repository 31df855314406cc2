//! Seeded synthetic data for unit tests: three gaussian features with a
//! planted affine target.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::datapipe::{Dataset, FeatureRole, Scaler};
use crate::regress::LinearModel;

#[derive(Debug, Clone, Copy)]
pub struct PlantedSpec {
    pub n: usize,
    pub seed: u64,
    pub noise: f64,
    pub slopes: [f64; 3],
    pub intercept: f64,
    pub means: [f64; 3],
    pub stds: [f64; 3],
}

impl Default for PlantedSpec {
    fn default() -> Self {
        Self {
            n: 100,
            seed: 42,
            noise: 0.1,
            slopes: [3.0, 0.5, -2.0],
            intercept: 1.0,
            means: [2.0, 25.0, 1005.0],
            stds: [0.5, 5.0, 5.0],
        }
    }
}

impl PlantedSpec {
    pub fn roles() -> Vec<FeatureRole> {
        vec![
            FeatureRole::Co,
            FeatureRole::Temperature,
            FeatureRole::Pressure,
        ]
    }

    /// The generating model itself, as a raw-unit [`LinearModel`].
    pub fn true_model(&self) -> LinearModel {
        LinearModel::new(
            self.slopes.to_vec(),
            self.intercept,
            Scaler::new(vec![0.0; 3], vec![1.0; 3]).unwrap(),
            Self::roles(),
        )
        .unwrap()
    }
}

/// Draws `n` rows of `x_j ~ Normal(mean_j, std_j)` with target
/// `intercept + sum_j slope_j * x_j + Normal(0, noise)`.
pub fn planted(spec: &PlantedSpec) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut x = Vec::with_capacity(spec.n * 3);
    let mut y = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let mut target = spec.intercept;
        for j in 0..3 {
            let eps: f64 = StandardNormal.sample(&mut rng);
            let v = spec.means[j] + spec.stds[j] * eps;
            x.push(v);
            target += spec.slopes[j] * v;
        }
        let eps: f64 = StandardNormal.sample(&mut rng);
        y.push(target + spec.noise * eps);
    }
    Dataset::new(x, y, PlantedSpec::roles()).unwrap()
}
