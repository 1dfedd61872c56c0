use std::collections::BTreeMap;

use crate::data_io::Stamp;
use crate::month::Month;

use super::MonthlySeries;

/// Arithmetic mean of each calendar month's observations. Months without any
/// observation between the first and last observed month become gaps.
pub fn aggregate_to_monthly(observations: &[(Stamp, f64)]) -> MonthlySeries {
    let mut sums: BTreeMap<Month, (f64, usize)> = BTreeMap::new();
    for &(stamp, value) in observations {
        let e = sums.entry(stamp.month).or_insert((0.0, 0));
        e.0 += value;
        e.1 += 1;
    }
    let (Some((&first, _)), Some((&last, _))) = (sums.first_key_value(), sums.last_key_value())
    else {
        return MonthlySeries::empty();
    };
    let values = first
        .through(last)
        .map(|m| sums.get(&m).map(|&(s, n)| s / n as f64))
        .collect();
    MonthlySeries {
        start: first,
        values,
    }
}
