//! Published estimates used as simulation truth and as replication targets.

use crate::frontier::FrontierParams;
use crate::panel_data::INDICATORS;

/// One column of the published SFA coefficient table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PublishedColumn {
    pub indicator: &'static str,
    pub alpha: f64,
    /// PDI, IDV, MAS, UAI, LTO, IVR.
    pub beta: [f64; 6],
    pub gamma: f64,
    pub sigma2: f64,
    pub theta: f64,
    pub mu: f64,
    /// Standard errors in the order α, β.., γ, σ², θ.
    pub se: [f64; 10],
}

impl PublishedColumn {
    pub fn params(&self) -> FrontierParams {
        FrontierParams {
            alpha: self.alpha,
            beta: self.beta.to_vec(),
            gamma: vec![self.gamma],
            sigma2: self.sigma2,
            theta: self.theta,
            mu: self.mu,
            eta: 0.0,
        }
    }

    pub fn beta_se(&self) -> [f64; 6] {
        let mut out = [0.0; 6];
        out.copy_from_slice(&self.se[1..7]);
        out
    }

    pub fn gamma_se(&self) -> f64 {
        self.se[7]
    }
}

// 0.318 is an estimate that happens to sit near 1/π
#[allow(clippy::approx_constant)]
pub const PUBLISHED: [PublishedColumn; 6] = [
    PublishedColumn {
        indicator: "VA",
        alpha: 0.882,
        beta: [-1.559, 1.261, -0.130, 0.484, 0.686, 0.895],
        gamma: 0.076,
        sigma2: 0.371,
        theta: 0.922,
        mu: 1.065,
        se: [0.485, 0.393, 0.458, 0.251, 0.229, 0.290, 0.262, 0.016, 0.063, 0.013],
    },
    PublishedColumn {
        indicator: "PV",
        alpha: 1.366,
        beta: [-0.173, 0.207, -0.912, -0.585, 0.566, 0.215],
        gamma: 0.397,
        sigma2: 0.488,
        theta: 0.804,
        mu: 0.912,
        se: [0.582, 0.487, 0.502, 0.223, 0.219, 0.298, 0.251, 0.026, 0.111, 0.044],
    },
    PublishedColumn {
        indicator: "GE",
        alpha: 1.632,
        beta: [-1.168, 0.557, -0.240, -0.701, 0.879, 0.482],
        gamma: 0.318,
        sigma2: 0.233,
        theta: 0.862,
        mu: 0.896,
        se: [0.277, 0.191, 0.287, 0.229, 0.108, 0.176, 0.144, 0.017, 0.032, 0.017],
    },
    PublishedColumn {
        indicator: "RQ",
        alpha: 2.008,
        beta: [-1.511, 0.017, -0.179, -0.372, 0.780, 0.326],
        gamma: 0.346,
        sigma2: 0.276,
        theta: 0.862,
        mu: 0.976,
        se: [0.263, 0.400, 0.374, 0.338, 0.200, 0.251, 0.211, 0.018, 0.050, 0.023],
    },
    PublishedColumn {
        indicator: "RL",
        alpha: 2.007,
        beta: [-1.717, 0.621, -0.587, -0.436, 0.770, 0.415],
        gamma: 0.281,
        sigma2: 0.258,
        theta: 0.887,
        mu: 0.958,
        se: [0.314, 0.505, 0.531, 0.324, 0.245, 0.222, 0.270, 0.016, 0.066, 0.027],
    },
    PublishedColumn {
        indicator: "CC",
        alpha: 2.574,
        beta: [-1.967, 0.544, -0.784, -0.753, 0.815, 0.568],
        gamma: 0.264,
        sigma2: 0.329,
        theta: 0.901,
        mu: 1.089,
        se: [0.355, 0.382, 0.347, 0.241, 0.124, 0.219, 0.180, 0.016, 0.035, 0.009],
    },
];

/// Published standard error of μ per indicator.
pub const PUBLISHED_MU_SE: [f64; 6] = [0.115, 0.213, 0.101, 0.090, 0.319, 0.074];

pub fn published(indicator: &str) -> Option<&'static PublishedColumn> {
    PUBLISHED.iter().find(|c| c.indicator.eq_ignore_ascii_case(indicator))
}

/// Default simulation truth (GE column).
pub fn default_truth() -> FrontierParams {
    PUBLISHED[2].params()
}

/// Sample years: 1996 to 2019 without 1997, 1999 and 2001.
pub fn sample_years() -> Vec<i32> {
    (1996..=2019).filter(|y| !matches!(y, 1997 | 1999 | 2001)).collect()
}

pub const SAMPLE_COUNTRIES: usize = 94;
pub const SAMPLE_OBSERVATIONS: usize = 1961;

/// OLS skewness range across indicators.
pub const SKEWNESS_BAND: (f64, f64) = (-0.993, -0.027);
/// OLS R² range across indicators.
pub const R_SQUARED_BAND: (f64, f64) = (0.545, 0.813);
/// Mean efficiency range across indicators.
pub const MEAN_TE_BAND: (f64, f64) = (0.357, 0.423);
pub const TOP_FIVE: [&str; 5] = ["PRT", "CHL", "SVK", "HKG", "GHA"];
pub const BOTTOM_FIVE: [&str; 5] = ["LBY", "VEN", "IRN", "AGO", "RUS"];

pub fn indicator_position(name: &str) -> Option<usize> {
    INDICATORS.iter().position(|i| i.eq_ignore_ascii_case(name))
}
