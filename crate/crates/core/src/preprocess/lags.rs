use crate::error::{Error, Result};

pub const SUPPORTED_HORIZONS: [u32; 5] = [0, 1, 3, 6, 12];

/// Predictor lags for one forecast horizon, in months before the forecast
/// origin. The shortest lag is always the two-month publication delay.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LagStructure {
    pub horizon: u32,
    pub lags: Vec<u32>,
}

impl LagStructure {
    /// Lags measured from the target month (`lag + horizon`).
    pub fn target_lags(&self) -> Vec<u32> {
        self.lags.iter().map(|l| l + self.horizon).collect()
    }

    pub fn max_lag(&self) -> u32 {
        *self.lags.last().expect("lag structures are never empty")
    }
}

pub fn lag_spec(horizon: u32) -> Result<LagStructure> {
    let lags = match horizon {
        0 => vec![2, 3, 6, 12],
        1 => vec![2, 5, 11],
        3 => vec![2, 3, 9],
        6 => vec![2, 6],
        12 => vec![2],
        h => return Err(Error::UnsupportedHorizon(h)),
    };
    Ok(LagStructure { horizon, lags })
}
