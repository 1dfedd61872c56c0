//! On-disk vintage store and output writers.
//!
//! A vintage root holds one directory per as-of month (`YYYY-MM`), each with
//! `meta.csv`, `series.csv` and `indicator.csv`, plus an optional
//! `announcements.csv` at the root. All files are comma-delimited UTF-8 with
//! LF line endings and a mandatory header row.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::month::Month;
use crate::numfmt::format_value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Category {
    Output,
    Income,
    Prices,
    Labor,
    Housing,
    MoneyCredit,
    Financial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Transform {
    LogGrowth,
    FirstDifference,
    PercentChange,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Frequency {
    Daily,
    Monthly,
    Quarterly,
}

macro_rules! text_enum {
    ($ty:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        impl $ty {
            pub fn as_str(self) -> &'static str {
                match self { $($ty::$variant => $text),+ }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($text => Ok($ty::$variant),)+
                    other => Err(Error::Validation(format!(
                        "unknown {} `{}`", stringify!($ty).to_lowercase(), other
                    ))),
                }
            }
        }
    };
}

text_enum!(Category {
    Output => "output",
    Income => "income",
    Prices => "prices",
    Labor => "labor",
    Housing => "housing",
    MoneyCredit => "money-credit",
    Financial => "financial",
});

text_enum!(Transform {
    LogGrowth => "log-growth",
    FirstDifference => "first-difference",
    PercentChange => "percent-change",
    None => "none",
});

text_enum!(Frequency {
    Daily => "daily",
    Monthly => "monthly",
    Quarterly => "quarterly",
});

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariableMeta {
    pub id: String,
    pub category: Category,
    pub transform: Transform,
    pub frequency: Frequency,
}

/// Observation date. `day` is 0 for monthly and quarterly data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Stamp {
    pub month: Month,
    pub day: u8,
}

impl Stamp {
    pub fn month(month: Month) -> Self {
        Stamp { month, day: 0 }
    }

    pub fn day(month: Month, day: u8) -> Self {
        Stamp { month, day }
    }
}

impl fmt::Display for Stamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.day == 0 {
            write!(f, "{}", self.month)
        } else {
            write!(f, "{}-{:02}", self.month, self.day)
        }
    }
}

impl FromStr for Stamp {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.len() {
            7 => Ok(Stamp::month(s.parse()?)),
            10 => {
                let month: Month = s[..7].parse()?;
                let day: u8 = s[8..]
                    .parse()
                    .map_err(|_| Error::Validation(format!("invalid date `{s}`")))?;
                if &s[7..8] != "-"
                    || chrono::NaiveDate::from_ymd_opt(month.year(), month.month(), day as u32)
                        .is_none()
                {
                    return Err(Error::Validation(format!("invalid date `{s}`")));
                }
                Ok(Stamp::day(month, day))
            }
            _ => Err(Error::Validation(format!(
                "invalid date `{s}`, expected YYYY-MM or YYYY-MM-DD"
            ))),
        }
    }
}

/// One variable's raw observations at its native frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub meta: VariableMeta,
    pub observations: Vec<(Stamp, f64)>,
}

/// Contiguous monthly 0/1 series.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinarySeries {
    pub start: Month,
    pub values: Vec<u8>,
}

impl BinarySeries {
    pub fn new(start: Month, values: Vec<u8>) -> Result<Self> {
        if let Some(bad) = values.iter().find(|&&v| v > 1) {
            return Err(Error::Validation(format!(
                "indicator value {bad} is not 0 or 1"
            )));
        }
        Ok(BinarySeries { start, values })
    }

    pub fn zeros(start: Month, len: usize) -> Self {
        BinarySeries {
            start,
            values: vec![0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// One past the last month covered.
    pub fn end(&self) -> Month {
        self.start + self.values.len() as i32
    }

    pub fn get(&self, m: Month) -> Option<u8> {
        let i = m - self.start;
        if i < 0 {
            return None;
        }
        self.values.get(i as usize).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Month, u8)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(|(i, &v)| (self.start + i as i32, v))
    }
}

/// Everything known on the first day of `as_of`.
#[derive(Debug, Clone, PartialEq)]
pub struct VintageSnapshot {
    pub as_of: Month,
    pub variables: Vec<Variable>,
    pub indicator: BinarySeries,
}

impl VintageSnapshot {
    pub fn variable(&self, id: &str) -> Option<&Variable> {
        self.variables.iter().find(|v| v.meta.id == id)
    }

    pub fn metas(&self) -> Vec<VariableMeta> {
        self.variables.iter().map(|v| v.meta.clone()).collect()
    }

    /// Enforces the snapshot invariants: strictly increasing stamps, quarterly
    /// data on quarter-end months, finite values, and nothing dated at or after
    /// `as_of`.
    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for var in &self.variables {
            let id = &var.meta.id;
            if !seen.insert(id.as_str()) {
                return Err(Error::Validation(format!("variable `{id}` declared twice")));
            }
            for w in var.observations.windows(2) {
                if w[1].0 <= w[0].0 {
                    return Err(Error::Validation(format!(
                        "`{id}`: observation {} does not follow {}",
                        w[1].0, w[0].0
                    )));
                }
            }
            for &(stamp, value) in &var.observations {
                if stamp.month >= self.as_of {
                    return Err(Error::Validation(format!(
                        "`{id}`: observation {stamp} is not before as-of {} (lookahead)",
                        self.as_of
                    )));
                }
                if !value.is_finite() {
                    return Err(Error::Validation(format!("`{id}`: non-finite value at {stamp}")));
                }
                match var.meta.frequency {
                    Frequency::Daily if stamp.day == 0 => {
                        return Err(Error::Validation(format!(
                            "`{id}`: daily series needs YYYY-MM-DD dates, got {stamp}"
                        )))
                    }
                    Frequency::Monthly | Frequency::Quarterly if stamp.day != 0 => {
                        return Err(Error::Validation(format!(
                            "`{id}`: {} series needs YYYY-MM dates, got {stamp}",
                            var.meta.frequency
                        )))
                    }
                    Frequency::Quarterly if !stamp.month.is_quarter_end() => {
                        return Err(Error::Validation(format!(
                            "`{id}`: quarterly observation {stamp} is not a quarter-end month"
                        )))
                    }
                    _ => {}
                }
            }
        }
        if let Some(bad) = self.indicator.values.iter().find(|&&v| v > 1) {
            return Err(Error::Validation(format!("indicator value {bad} is not 0 or 1")));
        }
        if !self.indicator.is_empty() && self.indicator.end() > self.as_of {
            return Err(Error::Validation(format!(
                "indicator extends to {} which is not before as-of {} (lookahead)",
                self.indicator.end() - 1,
                self.as_of
            )));
        }
        Ok(())
    }
}

pub fn vintage_dir(root: &Path, as_of: Month) -> PathBuf {
    root.join(as_of.to_string())
}

/// As-of months of the `YYYY-MM` directories under `root`, ascending.
pub fn list_vintages(root: &Path) -> Result<Vec<Month>> {
    let entries = fs::read_dir(root).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::NotFound(root.to_path_buf())
        } else {
            Error::io(root, e)
        }
    })?;
    let mut months = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(root, e))?;
        if !entry.path().is_dir() {
            continue;
        }
        if let Some(m) = entry.file_name().to_str().and_then(|n| n.parse::<Month>().ok()) {
            months.push(m);
        }
    }
    months.sort();
    Ok(months)
}

fn open_csv(path: &Path, header: &[&str]) -> Result<csv::Reader<fs::File>> {
    let file = fs::File::open(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::NotFound(path.to_path_buf())
        } else {
            Error::io(path, e)
        }
    })?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let found = reader
        .headers()
        .map_err(|e| Error::parse(path, 1, e.to_string()))?
        .clone();
    if found.iter().map(str::trim).ne(header.iter().copied()) {
        return Err(Error::parse(
            path,
            1,
            format!("expected header `{}`", header.join(",")),
        ));
    }
    Ok(reader)
}

pub(crate) fn for_each_row(
    path: &Path,
    header: &[&str],
    mut f: impl FnMut(&csv::StringRecord) -> Result<()>,
) -> Result<()> {
    let mut reader = open_csv(path, header)?;
    let mut record = csv::StringRecord::new();
    loop {
        let line = reader.position().line();
        match reader.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {
                let line = record.position().map(|p| p.line()).unwrap_or(line);
                if record.len() != header.len() {
                    return Err(Error::parse(
                        path,
                        line,
                        format!("expected {} fields, found {}", header.len(), record.len()),
                    ));
                }
                f(&record).map_err(|e| match e {
                    Error::Validation(msg) | Error::Domain(msg) => Error::parse(path, line, msg),
                    other => other,
                })?;
            }
            Err(e) => return Err(Error::parse(path, line + 1, e.to_string())),
        }
    }
    Ok(())
}

pub(crate) fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::Validation(format!("invalid number `{s}`")))
}

/// Loads and validates the snapshot stored under `root/<as_of>/`.
pub fn load_vintage(root: &Path, as_of: Month) -> Result<VintageSnapshot> {
    let dir = vintage_dir(root, as_of);
    if !dir.is_dir() {
        return Err(Error::NotFound(dir));
    }

    let mut variables: Vec<Variable> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for_each_row(
        &dir.join("meta.csv"),
        &["id", "category", "transform", "frequency"],
        |r| {
            let id = r[0].trim().to_string();
            if id.is_empty() {
                return Err(Error::Validation("empty variable id".into()));
            }
            if index.insert(id.clone(), variables.len()).is_some() {
                return Err(Error::Validation(format!("variable `{id}` declared twice")));
            }
            variables.push(Variable {
                meta: VariableMeta {
                    id,
                    category: r[1].trim().parse()?,
                    transform: r[2].trim().parse()?,
                    frequency: r[3].trim().parse()?,
                },
                observations: Vec::new(),
            });
            Ok(())
        },
    )?;

    for_each_row(
        &dir.join("series.csv"),
        &["variable_id", "month", "value"],
        |r| {
            let id = r[0].trim();
            let &slot = index
                .get(id)
                .ok_or_else(|| Error::Validation(format!("variable `{id}` not declared in meta.csv")))?;
            let stamp: Stamp = r[1].trim().parse()?;
            let value = parse_f64(&r[2])?;
            variables[slot].observations.push((stamp, value));
            Ok(())
        },
    )?;

    let mut start = None;
    let mut values = Vec::new();
    for_each_row(&dir.join("indicator.csv"), &["month", "value"], |r| {
        let month: Month = r[0].trim().parse()?;
        let value: u8 = match r[1].trim() {
            "0" => 0,
            "1" => 1,
            other => {
                return Err(Error::Validation(format!(
                    "indicator value `{other}` is not 0 or 1"
                )))
            }
        };
        let expected = *start.get_or_insert(month) + values.len() as i32;
        if month != expected {
            return Err(Error::Validation(format!(
                "indicator month {month} breaks the monthly sequence (expected {expected})"
            )));
        }
        values.push(value);
        Ok(())
    })?;

    let snapshot = VintageSnapshot {
        as_of,
        variables,
        indicator: BinarySeries {
            start: start.unwrap_or(as_of),
            values,
        },
    };
    snapshot.validate()?;
    Ok(snapshot)
}

/// Writes a snapshot in the layout `load_vintage` reads.
pub fn write_vintage(root: &Path, snapshot: &VintageSnapshot) -> Result<()> {
    let dir = vintage_dir(root, snapshot.as_of);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;

    write_csv(
        &dir.join("meta.csv"),
        &["id", "category", "transform", "frequency"],
        snapshot.variables.iter().map(|v| {
            vec![
                v.meta.id.clone(),
                v.meta.category.to_string(),
                v.meta.transform.to_string(),
                v.meta.frequency.to_string(),
            ]
        }),
    )?;
    write_csv(
        &dir.join("series.csv"),
        &["variable_id", "month", "value"],
        snapshot.variables.iter().flat_map(|v| {
            v.observations
                .iter()
                .map(move |(s, x)| vec![v.meta.id.clone(), s.to_string(), format_value(*x)])
        }),
    )?;
    write_indicator(&dir.join("indicator.csv"), &snapshot.indicator)
}

pub fn write_indicator(path: &Path, series: &BinarySeries) -> Result<()> {
    write_csv(
        path,
        &["month", "value"],
        series.iter().map(|(m, v)| vec![m.to_string(), v.to_string()]),
    )
}

/// Reads a `month,value` 0/1 file, or the `recession` rows of a long-format
/// `variable_id,month,value` file such as `truth.csv`.
pub fn load_labels(path: &Path) -> Result<BinarySeries> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(io) if io.kind() == std::io::ErrorKind::NotFound => {
                Error::NotFound(path.to_path_buf())
            }
            _ => Error::parse(path, 1, e.to_string()),
        })?;
    let headers = reader
        .headers()
        .map_err(|e| Error::parse(path, 1, e.to_string()))?
        .clone();
    let long = match headers.iter().collect::<Vec<_>>().as_slice() {
        ["month", "value"] => false,
        ["variable_id", "month", "value"] => true,
        _ => {
            return Err(Error::parse(
                path,
                1,
                "expected header `month,value` or `variable_id,month,value`",
            ))
        }
    };
    drop(reader);
    let mut pairs: Vec<(Month, u8)> = Vec::new();
    let header: &[&str] = if long {
        &["variable_id", "month", "value"]
    } else {
        &["month", "value"]
    };
    for_each_row(path, header, |r| {
        let (m, v) = if long {
            if r[0].trim() != TRUTH_INDICATOR_ID {
                return Ok(());
            }
            (&r[1], &r[2])
        } else {
            (&r[0], &r[1])
        };
        let month: Month = m.trim().parse()?;
        let value = parse_f64(v)?;
        let bit = if value == 0.0 {
            0
        } else if value == 1.0 {
            1
        } else {
            return Err(Error::Validation(format!("label value `{v}` is not 0 or 1")));
        };
        pairs.push((month, bit));
        Ok(())
    })?;
    let Some(&(start, _)) = pairs.first() else {
        return Ok(BinarySeries::zeros(Month::from_index(0), 0));
    };
    for (i, &(m, _)) in pairs.iter().enumerate() {
        if m != start + i as i32 {
            return Err(Error::Validation(format!(
                "{}: label month {m} breaks the monthly sequence",
                path.display()
            )));
        }
    }
    BinarySeries::new(start, pairs.into_iter().map(|(_, v)| v).collect())
}

/// Variable id under which `truth.csv` stores the true recession indicator.
pub const TRUTH_INDICATOR_ID: &str = "recession";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TurningKind {
    Peak,
    Trough,
}

text_enum!(TurningKind {
    Peak => "peak",
    Trough => "trough",
});

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Announcement {
    pub turning_point: Month,
    pub kind: TurningKind,
    pub announced: Month,
}

/// Dated business-cycle turning points with their announcement months.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AnnouncementLog {
    entries: Vec<Announcement>,
}

impl AnnouncementLog {
    /// Sorts by turning-point month and checks that announcements come after
    /// the turning point and that peaks and troughs alternate.
    pub fn new(mut entries: Vec<Announcement>) -> Result<Self> {
        entries.sort_by_key(|a| a.turning_point);
        for a in &entries {
            if a.announced <= a.turning_point {
                return Err(Error::Validation(format!(
                    "{} at {} announced at {}, not after it",
                    a.kind, a.turning_point, a.announced
                )));
            }
        }
        for w in entries.windows(2) {
            if w[0].kind == w[1].kind {
                return Err(Error::Validation(format!(
                    "turning points {} and {} are both {}s",
                    w[0].turning_point, w[1].turning_point, w[0].kind
                )));
            }
        }
        Ok(AnnouncementLog { entries })
    }

    pub fn entries(&self) -> &[Announcement] {
        &self.entries
    }

    /// Entries a forecaster standing at the start of `as_of` can see.
    /// An announcement made during month `m` is first usable in `m + 1`.
    pub fn visible(&self, as_of: Month) -> impl Iterator<Item = &Announcement> {
        self.entries.iter().filter(move |a| a.announced < as_of)
    }
}

pub const ANNOUNCEMENTS_FILE: &str = "announcements.csv";

pub fn load_announcements(path: &Path) -> Result<AnnouncementLog> {
    let mut entries = Vec::new();
    for_each_row(path, &["turning_point", "type", "announced"], |r| {
        entries.push(Announcement {
            turning_point: r[0].trim().parse()?,
            kind: r[1].trim().parse()?,
            announced: r[2].trim().parse()?,
        });
        Ok(())
    })?;
    AnnouncementLog::new(entries)
}

pub fn write_announcements(path: &Path, log: &AnnouncementLog) -> Result<()> {
    write_csv(
        path,
        &["turning_point", "type", "announced"],
        log.entries.iter().map(|a| {
            vec![
                a.turning_point.to_string(),
                a.kind.to_string(),
                a.announced.to_string(),
            ]
        }),
    )
}

/// Recession indicator as it would have been published on the first day of
/// `as_of`, covering `start..as_of`.
///
/// A month is in recession when the most recent visible turning point
/// strictly before it is a peak, so recessions run from the month after the
/// peak through the trough. Until a new turning point is announced the
/// previous state carries forward.
pub fn build_indicator_vintage(
    log: &AnnouncementLog,
    as_of: Month,
    start: Month,
) -> Result<BinarySeries> {
    if start > as_of {
        return Err(Error::Validation(format!(
            "indicator start {start} is after as-of {as_of}"
        )));
    }
    let visible: Vec<&Announcement> = log.visible(as_of).collect();
    let mut values = Vec::with_capacity((as_of - start) as usize);
    let mut next = 0;
    let mut state = 0u8;
    for m in start.through(as_of - 1) {
        while next < visible.len() && visible[next].turning_point < m {
            state = match visible[next].kind {
                TurningKind::Peak => 1,
                TurningKind::Trough => 0,
            };
            next += 1;
        }
        values.push(state);
    }
    Ok(BinarySeries { start, values })
}

/// Writes `rows` under `header` to `path` atomically: the data goes to a
/// sibling temp file which is then renamed over the target.
pub fn write_csv<I>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut body = String::new();
    body.push_str(&header.join(","));
    body.push('\n');
    for row in rows {
        debug_assert_eq!(row.len(), header.len());
        body.push_str(&row.join(","));
        body.push('\n');
    }
    write_atomic(path, body.as_bytes())
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::Validation(format!("{} is not a file path", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", file_name.to_string_lossy()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    result.map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}
