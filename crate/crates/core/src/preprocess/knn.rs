use crate::error::{Error, Result};

/// Fills every missing cell with the mean of that column over the `k` nearest
/// rows that observe it.
///
/// Distances are Euclidean over the columns both rows observe, after z-scoring
/// each column on its observed cells. Equal distances favor the earlier row.
/// Observed cells are never modified.
pub fn knn_impute(rows: &[Vec<Option<f64>>], k: usize, names: &[String]) -> Result<Vec<Vec<f64>>> {
    if k == 0 {
        return Err(Error::Validation("kNN imputation needs k >= 1".into()));
    }
    let n = rows.len();
    let p = names.len();
    if rows.iter().any(|r| r.len() != p) {
        return Err(Error::Dimension("rows of unequal width".into()));
    }

    let mut center = vec![0.0; p];
    let mut scale = vec![1.0; p];
    for j in 0..p {
        let observed: Vec<f64> = rows.iter().filter_map(|r| r[j]).collect();
        if observed.is_empty() {
            return Err(Error::Unimputable(names[j].clone()));
        }
        let mean = observed.iter().sum::<f64>() / observed.len() as f64;
        let var = observed.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / observed.len() as f64;
        center[j] = mean;
        if var > 0.0 {
            scale[j] = var.sqrt();
        }
    }
    let z: Vec<Vec<Option<f64>>> = rows
        .iter()
        .map(|r| {
            r.iter()
                .enumerate()
                .map(|(j, v)| v.map(|v| (v - center[j]) / scale[j]))
                .collect()
        })
        .collect();

    let mut out: Vec<Vec<f64>> = Vec::with_capacity(n);
    for (i, row) in rows.iter().enumerate() {
        if row.iter().all(Option::is_some) {
            out.push(row.iter().map(|v| v.unwrap()).collect());
            continue;
        }
        if row.iter().all(Option::is_none) {
            return Err(Error::Validation(format!("row {i} has no observed values")));
        }
        let dist: Vec<f64> = (0..n)
            .map(|r| {
                if r == i {
                    return f64::INFINITY;
                }
                let mut s = 0.0;
                let mut shared = 0;
                for j in 0..p {
                    if let (Some(a), Some(b)) = (z[i][j], z[r][j]) {
                        s += (a - b) * (a - b);
                        shared += 1;
                    }
                }
                if shared == 0 {
                    f64::INFINITY
                } else {
                    s.sqrt()
                }
            })
            .collect();
        let mut filled = Vec::with_capacity(p);
        for j in 0..p {
            if let Some(v) = row[j] {
                filled.push(v);
                continue;
            }
            let mut donors: Vec<usize> = (0..n).filter(|&r| r != i && rows[r][j].is_some()).collect();
            // stable sort keeps earlier rows first among equal distances
            donors.sort_by(|&a, &b| dist[a].total_cmp(&dist[b]));
            donors.truncate(k);
            let mean = donors.iter().map(|&r| rows[r][j].unwrap()).sum::<f64>() / donors.len() as f64;
            filled.push(mean);
        }
        out.push(filled);
    }
    Ok(out)
}
