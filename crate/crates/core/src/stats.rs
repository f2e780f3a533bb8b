//! Order statistics over draws.

use statrs::statistics::{Data, OrderStatistics};

/// Sample quantile (statrs's median-unbiased definition); NaN for empty input.
pub fn quantile(values: &[f64], tau: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    if tau == 0.5 {
        return Data::new(values.to_vec()).median();
    }
    Data::new(values.to_vec()).quantile(tau)
}
