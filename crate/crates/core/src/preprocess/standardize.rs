use crate::error::{Error, Result};

/// Per-column training means and population standard deviations.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

pub fn fit_standardizer(rows: &[Vec<f64>], names: &[String]) -> Result<Standardizer> {
    if rows.is_empty() {
        return Err(Error::InsufficientData("no rows to standardize".into()));
    }
    let n = rows.len() as f64;
    let p = names.len();
    let mut means = vec![0.0; p];
    let mut stds = vec![0.0; p];
    for j in 0..p {
        let mean = rows.iter().map(|r| r[j]).sum::<f64>() / n;
        let var = rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt();
        if !(sd > 1e-12 * (1.0 + mean.abs())) {
            return Err(Error::DegenerateColumn(names[j].clone()));
        }
        means[j] = mean;
        stds[j] = sd;
    }
    Ok(Standardizer { means, stds })
}

impl Standardizer {
    pub fn apply_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn apply(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| self.apply_row(r)).collect()
    }
}
