use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    FkWave,
    FkHeat,
    Chaos,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::FkWave => "fk-wave",
            Method::FkHeat => "fk-heat",
            Method::Chaos => "chaos",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One stratum of the stratified Poisson estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct Stratum {
    pub k: usize,
    /// t^{2k}/k!
    pub poisson_weight: f64,
    pub mean: f64,
    pub stderr: f64,
    pub n_configs: usize,
    pub n_theta: usize,
}

impl Stratum {
    pub const CSV_HEADER: &'static str = "k,poisson_weight,stratum_mean,stratum_stderr,n_configs,n_theta";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{:?},{:?},{:?},{},{}",
            self.k, self.poisson_weight, self.mean, self.stderr, self.n_configs, self.n_theta
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentEstimate {
    pub value: f64,
    pub stderr: f64,
    pub method: Method,
    pub seed: u64,
    /// Total number of Monte-Carlo evaluations behind the value.
    pub samples: u64,
    pub strata: Vec<Stratum>,
}

impl MomentEstimate {
    /// Assemble value and stderr from strata: Σ w_k m_k and sqrt(Σ w_k² s_k²).
    pub fn from_strata(method: Method, seed: u64, strata: Vec<Stratum>) -> Self {
        let value = crate::stats::neumaier_sum(strata.iter().map(|s| s.poisson_weight * s.mean));
        let var = crate::stats::neumaier_sum(
            strata
                .iter()
                .map(|s| (s.poisson_weight * s.stderr).powi(2)),
        );
        let samples = strata
            .iter()
            .map(|s| (s.n_configs * s.n_theta.max(1)) as u64)
            .sum();
        Self {
            value,
            stderr: var.sqrt(),
            method,
            seed,
            samples,
            strata,
        }
    }

    /// |a - b| / sqrt(se_a² + se_b²); infinite when both errors vanish and values differ.
    pub fn z_score(&self, other: &MomentEstimate) -> f64 {
        let d = (self.value - other.value).abs();
        let s = (self.stderr.powi(2) + other.stderr.powi(2)).sqrt();
        if s == 0.0 {
            if d == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            d / s
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strata_combine() {
        let strata = vec![
            Stratum { k: 0, poisson_weight: 1.0, mean: 1.0, stderr: 0.0, n_configs: 0, n_theta: 0 },
            Stratum { k: 1, poisson_weight: 0.25, mean: 2.0, stderr: 0.4, n_configs: 10, n_theta: 4 },
        ];
        let e = MomentEstimate::from_strata(Method::FkWave, 1, strata);
        assert_eq!(e.value, 1.5);
        assert!((e.stderr - 0.1).abs() < 1e-15);
        assert_eq!(e.samples, 40);
    }
}
