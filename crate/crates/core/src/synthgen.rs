//! Synthetic vintage datasets with known ground truth.
//!
//! A semi-Markov regime chain alternates expansions and recessions. Ten
//! informative series respond to the regime with different leads (a
//! term-spread-like leading series, four coincident activity levels, and a
//! mix of monthly, daily and quarterly indicators). Pure-noise series load on
//! a few shared persistent factors, so they are collinear within groups. Each vintage
//! publishes what was known at the start of its month, with recent
//! observations revised, and the recession indicator reflects announcements
//! that lag the turning points.

use std::path::Path;

use chrono::{Datelike, NaiveDate, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::data_io::{
    build_indicator_vintage, write_announcements, write_csv, write_vintage, Announcement,
    AnnouncementLog, BinarySeries, Category, Frequency, Stamp, Transform, TurningKind, Variable,
    VariableMeta, VintageSnapshot, ANNOUNCEMENTS_FILE, TRUTH_INDICATOR_ID,
};
use crate::error::{Error, Result};
use crate::month::Month;
use crate::numfmt::format_value;

/// Ids of the coincident activity levels, the natural input to dating.
pub const COINCIDENT_IDS: [&str; 4] = ["ip", "employment", "income", "sales"];
/// Id of the planted leading series.
pub const LEADING_ID: &str = "spread";
pub const TRUTH_FILE: &str = "truth.csv";

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub seed: u64,
    pub start: Month,
    /// Months of ground truth, starting at `start`.
    pub months: usize,
    /// Vintages are written for the last `vintages` as-of months whose
    /// 12-month-ahead target still lies inside the sample.
    pub vintages: usize,
    /// Months by which the leading series anticipates the regime.
    pub lead: usize,
    pub noise_variables: usize,
    pub noise_groups: usize,
    /// Weight of the shared factor in each noise series; the rest is
    /// idiosyncratic, so within-group correlation is roughly its square.
    pub noise_loading: f64,
    /// AR(1) coefficient of the shared noise factors.
    pub noise_persistence: f64,
    /// Extra copies of the leading series with small added noise, for
    /// provoking separation on purpose.
    pub duplicates: usize,
    pub duplicate_noise: f64,
    pub expansion_months: (usize, usize),
    pub recession_months: (usize, usize),
    /// Stationary standard deviation of the leading series' noise.
    pub leading_noise: f64,
    /// Multiplies the noise of the coincident series.
    pub coincident_noise: f64,
    /// Multiplies the noise of the remaining informative series.
    pub signal_noise: f64,
    /// Revision noise in units of each series' innovation scale.
    pub revision_scale: f64,
    /// Observations at most this many months past first release are revised.
    pub revision_window: usize,
    pub peak_announcement_lag: (usize, usize),
    pub trough_announcement_lag: (usize, usize),
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        ScenarioSpec {
            seed: 42,
            start: Month::new(1980, 1).expect("valid month"),
            months: 480,
            vintages: 60,
            lead: 12,
            noise_variables: 15,
            noise_groups: 3,
            noise_loading: 0.7,
            noise_persistence: 0.9,
            duplicates: 0,
            duplicate_noise: 0.05,
            expansion_months: (36, 120),
            recession_months: (6, 18),
            leading_noise: 0.8,
            coincident_noise: 1.2,
            signal_noise: 2.0,
            revision_scale: 0.1,
            revision_window: 3,
            peak_announcement_lag: (6, 12),
            trough_announcement_lag: (12, 20),
        }
    }
}

const MAX_HORIZON: usize = 12;

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        let range_ok = |(a, b): (usize, usize)| a >= 1 && a <= b;
        let mut problems = Vec::new();
        if self.months < 60 {
            problems.push(format!("months {} below 60", self.months));
        }
        if self.vintages == 0 || self.vintages + MAX_HORIZON + 24 > self.months {
            problems.push(format!(
                "vintages must be positive and leave at least {} months of history",
                MAX_HORIZON + 24
            ));
        }
        if self.noise_variables > 0 && self.noise_groups == 0 {
            problems.push("noise_groups must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.noise_loading) {
            problems.push(format!("noise_loading {} outside [0, 1]", self.noise_loading));
        }
        if !(0.0..1.0).contains(&self.noise_persistence) {
            problems.push(format!("noise_persistence {} outside [0, 1)", self.noise_persistence));
        }
        for (name, r) in [
            ("expansion_months", self.expansion_months),
            ("recession_months", self.recession_months),
            ("peak_announcement_lag", self.peak_announcement_lag),
            ("trough_announcement_lag", self.trough_announcement_lag),
        ] {
            if !range_ok(r) {
                problems.push(format!("{name} range {:?} is empty or starts at 0", r));
            }
        }
        for (name, v) in [
            ("duplicate_noise", self.duplicate_noise),
            ("leading_noise", self.leading_noise),
            ("coincident_noise", self.coincident_noise),
            ("signal_noise", self.signal_noise),
            ("revision_scale", self.revision_scale),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                problems.push(format!("{name} {v} must be finite and non-negative"));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems.join("; ")))
        }
    }

    pub fn end(&self) -> Month {
        self.start + (self.months as i32 - 1)
    }

    pub fn last_as_of(&self) -> Month {
        self.end() - MAX_HORIZON as i32
    }

    pub fn first_as_of(&self) -> Month {
        self.last_as_of() - (self.vintages as i32 - 1)
    }
}

/// How a series is revised between vintages.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Revision {
    /// Multiplied by `exp(scale * e)`.
    Multiplicative(f64),
    /// Shifted by `scale * e`.
    Additive(f64),
    None,
}

#[derive(Debug, Clone, PartialEq)]
struct Series {
    meta: VariableMeta,
    observations: Vec<(Stamp, f64)>,
    revision: Revision,
}

/// Ground truth of a scenario, from which vintages are cut.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub spec: ScenarioSpec,
    /// True recession indicator over `start..=end`.
    pub indicator: BinarySeries,
    pub turning_points: Vec<(Month, TurningKind)>,
    pub announcements: AnnouncementLog,
    series: Vec<Series>,
}

fn normal(r: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(r)
}

/// Regime path of length `n`, 1 in recession. Starts part-way into an
/// expansion.
fn regimes(r: &mut ChaCha8Rng, spec: &ScenarioSpec, n: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(n);
    let (elo, ehi) = spec.expansion_months;
    let (rlo, rhi) = spec.recession_months;
    let first = r.random_range(elo..=ehi);
    let mut remaining = r.random_range(1..=first);
    let mut state = 0u8;
    while out.len() < n {
        out.extend(std::iter::repeat_n(state, remaining.min(n - out.len())));
        state = 1 - state;
        remaining = if state == 1 {
            r.random_range(rlo..=rhi)
        } else {
            r.random_range(elo..=ehi)
        };
    }
    out
}

fn meta(id: &str, category: Category, transform: Transform, frequency: Frequency) -> VariableMeta {
    VariableMeta {
        id: id.to_string(),
        category,
        transform,
        frequency,
    }
}

fn weekdays(m: Month) -> Vec<u8> {
    (1..=31u32)
        .filter_map(|d| NaiveDate::from_ymd_opt(m.year(), m.month(), d))
        .filter(|d| !matches!(d.weekday(), Weekday::Sat | Weekday::Sun))
        .map(|d| d.day() as u8)
        .collect()
}

pub fn simulate(spec: &ScenarioSpec) -> Result<Simulation> {
    spec.validate()?;
    let mut r = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.months;
    let margin = spec.lead.max(6) + 1;
    let regime = regimes(&mut r, spec, n + margin);
    // regime at month index t + shift, clamped to the simulated range
    let at = |t: usize, shift: i64| -> f64 {
        let i = (t as i64 + shift).clamp(0, regime.len() as i64 - 1) as usize;
        f64::from(regime[i])
    };
    let month = |t: usize| spec.start + t as i32;

    let mut series = Vec::new();

    // Leading spread: AR(1) noise around a regime-shifted mean.
    let phi: f64 = 0.6;
    let mut u = spec.leading_noise * normal(&mut r);
    let spread: Vec<f64> = (0..n)
        .map(|t| {
            u = phi * u + spec.leading_noise * (1.0 - phi * phi).sqrt() * normal(&mut r);
            1.5 - 2.0 * at(t, spec.lead as i64) + u
        })
        .collect();
    series.push(Series {
        meta: meta(LEADING_ID, Category::Financial, Transform::None, Frequency::Monthly),
        observations: spread.iter().enumerate().map(|(t, &v)| (Stamp::month(month(t)), v)).collect(),
        revision: Revision::None,
    });

    // Monthly log-level series: (id, category, drift, regime effect, shift, noise).
    let levels: [(&str, Category, Transform, f64, f64, i64, f64); 7] = [
        ("ip", Category::Output, Transform::LogGrowth, 0.0025, 0.012, 0, 0.004),
        ("employment", Category::Labor, Transform::LogGrowth, 0.0015, 0.006, 0, 0.002),
        ("income", Category::Income, Transform::LogGrowth, 0.002, 0.007, 0, 0.004),
        ("sales", Category::Output, Transform::LogGrowth, 0.0025, 0.012, 0, 0.006),
        ("housing_starts", Category::Housing, Transform::LogGrowth, 0.002, 0.03, 6, 0.02),
        ("cpi", Category::Prices, Transform::PercentChange, 0.0025, 0.0015, -3, 0.0015),
        ("credit", Category::MoneyCredit, Transform::FirstDifference, 1.0, 1.5, 3, 1.0),
    ];
    for (id, category, transform, drift, effect, shift, sd) in levels {
        let sd = sd * if COINCIDENT_IDS.contains(&id) { spec.coincident_noise } else { spec.signal_noise };
        let mut level = 0.0;
        let obs = (0..n)
            .map(|t| {
                level += drift - effect * at(t, shift) + sd * normal(&mut r);
                let v = if transform == Transform::FirstDifference {
                    500.0 + level
                } else {
                    100.0 * level.exp()
                };
                (Stamp::month(month(t)), v)
            })
            .collect();
        let revision = if transform == Transform::FirstDifference {
            Revision::Additive(sd)
        } else {
            Revision::Multiplicative(sd)
        };
        series.push(Series {
            meta: meta(id, category, transform, Frequency::Monthly),
            observations: obs,
            revision,
        });
    }

    // Daily stock index: monthly log level with a 4-month lead, daily
    // interpolation plus noise, weekdays only.
    let mut log_level = vec![0.0; n + 1];
    for t in 0..n {
        log_level[t + 1] = log_level[t] + 0.007 - 0.05 * at(t, 4) + 0.04 * spec.signal_noise * normal(&mut r);
    }
    let mut daily = Vec::new();
    for t in 0..n {
        let days = weekdays(month(t));
        let k = days.len() as f64;
        for (i, &d) in days.iter().enumerate() {
            let frac = (i + 1) as f64 / k;
            let v = log_level[t] + (log_level[t + 1] - log_level[t]) * frac + 0.005 * normal(&mut r);
            daily.push((Stamp::day(month(t), d), 1000.0 * v.exp()));
        }
    }
    series.push(Series {
        meta: meta("stock_index", Category::Financial, Transform::LogGrowth, Frequency::Daily),
        observations: daily,
        revision: Revision::None,
    });

    // Quarterly output: average of a coincident monthly level over each
    // complete quarter, stamped at the quarter-end month.
    let mut g = 0.0;
    let gdp_monthly: Vec<f64> = (0..n)
        .map(|t| {
            g += 0.0022 - 0.009 * at(t, 0) + 0.003 * spec.signal_noise * normal(&mut r);
            100.0 * g.exp()
        })
        .collect();
    let gdp = (2..n)
        .filter(|&t| month(t).is_quarter_end())
        .map(|t| (Stamp::month(month(t)), (gdp_monthly[t - 2] + gdp_monthly[t - 1] + gdp_monthly[t]) / 3.0))
        .collect();
    series.push(Series {
        meta: meta("gdp", Category::Output, Transform::LogGrowth, Frequency::Quarterly),
        observations: gdp,
        revision: Revision::Multiplicative(0.003 * spec.signal_noise),
    });

    // Collinear noise: AR(1) latent factors shared within groups.
    let groups = spec.noise_groups.max(1);
    let mut factors = vec![vec![0.0; n]; groups];
    let rho = spec.noise_persistence;
    for f in &mut factors {
        let mut v = normal(&mut r);
        for slot in f.iter_mut() {
            v = rho * v + (1.0 - rho * rho).sqrt() * normal(&mut r);
            *slot = v;
        }
    }
    const CATEGORIES: [Category; 7] = [
        Category::Output,
        Category::Income,
        Category::Prices,
        Category::Labor,
        Category::Housing,
        Category::MoneyCredit,
        Category::Financial,
    ];
    let idio = (1.0 - spec.noise_loading * spec.noise_loading).sqrt();
    for i in 0..spec.noise_variables {
        let f = &factors[i % groups];
        let obs = (0..n)
            .map(|t| (Stamp::month(month(t)), spec.noise_loading * f[t] + idio * normal(&mut r)))
            .collect();
        series.push(Series {
            meta: meta(&format!("noise{:02}", i + 1), CATEGORIES[i % CATEGORIES.len()], Transform::None, Frequency::Monthly),
            observations: obs,
            revision: Revision::Additive(idio),
        });
    }
    for j in 0..spec.duplicates {
        let obs = spread
            .iter()
            .enumerate()
            .map(|(t, &v)| (Stamp::month(month(t)), v + spec.duplicate_noise * normal(&mut r)))
            .collect();
        series.push(Series {
            meta: meta(&format!("{LEADING_ID}_dup{:02}", j + 1), Category::Financial, Transform::None, Frequency::Monthly),
            observations: obs,
            revision: Revision::None,
        });
    }

    // Turning points inside the sample and their announcements.
    let indicator = BinarySeries::new(spec.start, regime[..n].to_vec())?;
    let mut turning_points = Vec::new();
    let mut announcements = Vec::new();
    for t in 1..n {
        if regime[t] == regime[t - 1] {
            continue;
        }
        // a recession spans (peak, trough]
        let (tp, kind, lag) = if regime[t] == 1 {
            (month(t - 1), TurningKind::Peak, spec.peak_announcement_lag)
        } else {
            (month(t - 1), TurningKind::Trough, spec.trough_announcement_lag)
        };
        turning_points.push((tp, kind));
        let delay = r.random_range(lag.0..=lag.1) as i32;
        announcements.push(Announcement {
            turning_point: tp,
            kind,
            announced: tp + delay,
        });
    }
    // A trough is never announced before the peak it closes.
    for i in 1..announcements.len() {
        if announcements[i].announced <= announcements[i - 1].announced {
            announcements[i].announced = announcements[i - 1].announced + 1;
        }
    }

    Ok(Simulation {
        spec: spec.clone(),
        indicator,
        turning_points,
        announcements: AnnouncementLog::new(announcements)?,
        series,
    })
}

impl Simulation {
    pub fn metas(&self) -> Vec<VariableMeta> {
        self.series.iter().map(|s| s.meta.clone()).collect()
    }

    /// Unrevised observations of every series.
    pub fn truth_variables(&self) -> Vec<Variable> {
        self.series
            .iter()
            .map(|s| Variable {
                meta: s.meta.clone(),
                observations: s.observations.clone(),
            })
            .collect()
    }

    /// Snapshot published at the start of `as_of`: monthly data through
    /// `as_of - 2`, daily data through `as_of - 1`, quarterly data for
    /// quarters ending by `as_of - 2`, recent values revised, and the
    /// indicator as announced so far.
    pub fn vintage(&self, as_of: Month) -> Result<VintageSnapshot> {
        let spec = &self.spec;
        let mut r = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x9e37_79b9_7f4a_7c15);
        r.set_stream(as_of.index() as u64);
        let variables = self
            .series
            .iter()
            .map(|s| {
                let cutoff = match s.meta.frequency {
                    Frequency::Daily => as_of - 1,
                    _ => as_of - 2,
                };
                let observations = s
                    .observations
                    .iter()
                    .filter(|(st, _)| st.month <= cutoff)
                    .map(|&(st, v)| {
                        let age = (as_of - st.month) as usize;
                        if spec.revision_scale == 0.0 || age > spec.revision_window + 1 {
                            return (st, v);
                        }
                        let v = match s.revision {
                            Revision::Multiplicative(sd) => v * (spec.revision_scale * sd * normal(&mut r)).exp(),
                            Revision::Additive(sd) => v + spec.revision_scale * sd * normal(&mut r),
                            Revision::None => v,
                        };
                        (st, v)
                    })
                    .collect();
                Variable {
                    meta: s.meta.clone(),
                    observations,
                }
            })
            .collect();
        let snapshot = VintageSnapshot {
            as_of,
            variables,
            indicator: build_indicator_vintage(&self.announcements, as_of, spec.start)?,
        };
        snapshot.validate()?;
        Ok(snapshot)
    }

    /// Everything with no revisions and the true indicator, as if seen just
    /// after the sample ends.
    pub fn truth_snapshot(&self) -> VintageSnapshot {
        VintageSnapshot {
            as_of: self.spec.end() + 1,
            variables: self.truth_variables(),
            indicator: self.indicator.clone(),
        }
    }

    pub fn as_of_months(&self) -> impl Iterator<Item = Month> {
        self.spec.first_as_of().through(self.spec.last_as_of())
    }
}

/// Simulates the scenario and writes its vintage tree, announcement log and
/// `truth.csv` (long format, the true indicator under `recession`) to `root`.
pub fn generate(spec: &ScenarioSpec, root: &Path) -> Result<Simulation> {
    let sim = simulate(spec)?;
    std::fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    let months: Vec<Month> = sim.as_of_months().collect();
    months
        .par_iter()
        .try_for_each(|&m| write_vintage(root, &sim.vintage(m)?))?;
    write_announcements(&root.join(ANNOUNCEMENTS_FILE), &sim.announcements)?;
    let rows = sim
        .series
        .iter()
        .flat_map(|s| {
            s.observations
                .iter()
                .map(move |(st, v)| vec![s.meta.id.clone(), st.to_string(), format_value(*v)])
        })
        .chain(
            sim.indicator
                .iter()
                .map(|(m, v)| vec![TRUTH_INDICATOR_ID.to_string(), m.to_string(), v.to_string()]),
        );
    write_csv(&root.join(TRUTH_FILE), &["variable_id", "month", "value"], rows)?;
    Ok(sim)
}
