//! Raw vintage series to a stationary, complete, standardized design matrix.

mod aggregate;
mod design;
mod knn;
mod lags;
mod spline;
mod standardize;
mod transform;

pub use aggregate::aggregate_to_monthly;
pub use design::{
    build_design, build_design_with, monthly_levels, transformed_monthly, write_design_csv,
    ColumnId, Design, DesignMatrix, DesignOptions,
};
pub use knn::knn_impute;
pub use lags::{lag_spec, LagStructure, SUPPORTED_HORIZONS};
pub use spline::{spline_interpolate_quarterly, NaturalCubicSpline};
pub use standardize::{fit_standardizer, Standardizer};
pub use transform::{transform_knots, transform_monthly, transform_series};

use crate::month::Month;

/// Contiguous monthly series; `None` marks a gap.
#[derive(Debug, Clone, PartialEq)]
pub struct MonthlySeries {
    pub start: Month,
    pub values: Vec<Option<f64>>,
}

impl MonthlySeries {
    pub fn empty() -> Self {
        MonthlySeries {
            start: Month::from_index(0),
            values: Vec::new(),
        }
    }

    pub fn from_pairs(pairs: &[(Month, f64)]) -> Self {
        let (Some(first), Some(last)) = (pairs.first(), pairs.last()) else {
            return Self::empty();
        };
        let mut values = vec![None; (last.0 - first.0 + 1) as usize];
        for &(m, v) in pairs {
            values[(m - first.0) as usize] = Some(v);
        }
        MonthlySeries {
            start: first.0,
            values,
        }
    }

    /// One past the last month covered.
    pub fn end(&self) -> Month {
        self.start + self.values.len() as i32
    }

    pub fn get(&self, m: Month) -> Option<f64> {
        let i = m - self.start;
        if i < 0 {
            return None;
        }
        self.values.get(i as usize).copied().flatten()
    }

    /// First month holding a value.
    pub fn first_observed(&self) -> Option<Month> {
        self.values
            .iter()
            .position(Option::is_some)
            .map(|i| self.start + i as i32)
    }
}
