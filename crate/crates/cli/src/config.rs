//! Flat `key = value` run configuration.
//!
//! Values are layered: built-in default, then the config file, then
//! environment variables (path keys only), then command-line overrides.
//! Unknown keys and malformed values are collected and reported together.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use recession_core::backtest::{LabelSource, Strategy};
use recession_core::cv::{CostSpec, SelectionMetric};
use recession_core::dating::BbParams;
use recession_core::glm::ModelKind;
use recession_core::metrics::PrIntegration;
use recession_core::preprocess::lag_spec;
use recession_core::synthgen::ScenarioSpec;
use recession_core::Month;

pub struct KeySpec {
    pub name: &'static str,
    pub default: &'static str,
    /// Environment variable that may override the value; set for paths only.
    pub env: Option<&'static str>,
    pub help: &'static str,
}

const fn key(name: &'static str, default: &'static str, help: &'static str) -> KeySpec {
    KeySpec {
        name,
        default,
        env: None,
        help,
    }
}

const fn path_key(name: &'static str, default: &'static str, env: &'static str, help: &'static str) -> KeySpec {
    KeySpec {
        name,
        default,
        env: Some(env),
        help,
    }
}

/// Every recognised key with its default.
pub const KEYS: &[KeySpec] = &[
    path_key("vintages", "data", "RECESSION_VINTAGES", "vintage tree root (generate writes here)"),
    path_key("output", "out", "RECESSION_OUTPUT", "directory for backtest, evaluate and date outputs"),
    path_key("labels", "", "RECESSION_LABELS", "label file for evaluate; empty means <vintages>/truth.csv"),
    path_key("forecasts", "", "RECESSION_FORECASTS", "forecast file for evaluate; empty means <output>/forecasts.csv"),
    key("first", "", "first as-of month (YYYY-MM); empty means the earliest vintage"),
    key("last", "", "last as-of month; empty means the latest vintage"),
    key("as_of", "", "vintage dated by the date command; empty means the latest"),
    key("horizons", "0,1,3,6,12", "forecast horizons in months"),
    key("models", "logit,wlogit,lasso,ridge,enet", "models to backtest"),
    key("strategy", "standard", "standard or freeze"),
    key("label_source", "nber", "nber (published indicator) or alternative (dated factor)"),
    key("lambda_count", "0", "lambda grid size; 0 keeps each model's default"),
    key("enet_alphas", "0.25,0.5,0.75", "Elastic Net mixing weights"),
    key("block_len", "288", "cross-validation block length in months"),
    key("block_step", "12", "offset between consecutive blocks"),
    key("train_fraction", "5/6", "share of each block used for training"),
    key("selection", "cost", "cost or logloss"),
    key("cost_fn", "auto", "cost of a missed recession; auto uses class weights"),
    key("cost_fp", "auto", "cost of a false alarm; auto uses class weights"),
    key("knn_k", "5", "neighbours for missing-value imputation"),
    key("retune_every", "1", "re-run the grid search every this many months"),
    key("workers", "0", "worker threads; 0 uses every available core"),
    key("pr_integration", "step", "step or trapezoid"),
    key("coincident", "ip,employment,income,sales", "series behind the dated factor"),
    key("bb_window", "5", "turning-point window half-width"),
    key("bb_min_phase", "5", "minimum expansion or recession length"),
    key("bb_min_cycle", "15", "minimum peak-to-peak or trough-to-trough length"),
    key("seed", "42", "synthetic scenario seed"),
    key("scenario_start", "1980-01", "first simulated month"),
    key("months", "480", "simulated months"),
    key("vintage_count", "60", "vintages written, ending 12 months before the sample end"),
    key("lead", "12", "months by which the planted leading series leads"),
    key("noise_variables", "15", "pure-noise predictors"),
    key("duplicates", "0", "near-copies of the leading series"),
];

fn spec(name: &str) -> Option<&'static KeySpec> {
    KEYS.iter().find(|k| k.name == name)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub problems: Vec<String>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid configuration")?;
        for p in &self.problems {
            write!(f, "\n  {p}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub vintages: PathBuf,
    pub output: PathBuf,
    pub labels: Option<PathBuf>,
    pub forecasts: Option<PathBuf>,
    pub first: Option<Month>,
    pub last: Option<Month>,
    pub as_of: Option<Month>,
    pub horizons: Vec<u32>,
    pub models: Vec<ModelKind>,
    pub strategy: Strategy,
    pub label_source: LabelSource,
    pub lambda_count: Option<usize>,
    pub enet_alphas: Vec<f64>,
    pub block_len: usize,
    pub block_step: usize,
    pub train_fraction: f64,
    pub selection: SelectionMetric,
    pub costs: Option<CostSpec>,
    pub knn_k: usize,
    pub retune_every: usize,
    pub workers: usize,
    pub pr_integration: PrIntegration,
    pub coincident: Vec<String>,
    pub dating: BbParams,
    pub scenario: ScenarioSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::resolve(None, |_| None, &[]).expect("built-in defaults parse")
    }
}

/// Where a layer's text came from, for diagnostics.
pub struct ConfigFile<'a> {
    pub name: &'a Path,
    pub text: &'a str,
}

impl RunConfig {
    /// Layers the file, environment and overrides over the defaults.
    /// `env` looks up an environment variable by name.
    pub fn resolve(
        file: Option<ConfigFile<'_>>,
        env: impl Fn(&str) -> Option<String>,
        overrides: &[(String, String)],
    ) -> Result<RunConfig, ConfigError> {
        let mut values: BTreeMap<&'static str, String> =
            KEYS.iter().map(|k| (k.name, k.default.to_string())).collect();
        let mut problems = Vec::new();

        if let Some(f) = file {
            let mut seen = BTreeMap::new();
            for (i, raw) in f.text.lines().enumerate() {
                let line = raw.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let at = format!("{}:{}", f.name.display(), i + 1);
                let Some((k, v)) = line.split_once('=') else {
                    problems.push(format!("{at}: expected `key = value`, found `{line}`"));
                    continue;
                };
                let k = k.trim();
                match spec(k) {
                    None => problems.push(format!("{at}: unknown key `{k}`")),
                    Some(s) => {
                        if let Some(prev) = seen.insert(s.name, i + 1) {
                            problems.push(format!("{at}: key `{k}` already set on line {prev}"));
                        }
                        values.insert(s.name, v.trim().to_string());
                    }
                }
            }
        }
        for k in KEYS {
            if let Some(v) = k.env.and_then(&env) {
                values.insert(k.name, v);
            }
        }
        for (k, v) in overrides {
            match spec(k.trim()) {
                None => problems.push(format!("override: unknown key `{}`", k.trim())),
                Some(s) => {
                    values.insert(s.name, v.trim().to_string());
                }
            }
        }

        let mut p = Parser {
            values: &values,
            problems: &mut problems,
        };
        let config = p.build();
        if problems.is_empty() {
            Ok(config)
        } else {
            Err(ConfigError { problems })
        }
    }
}

struct Parser<'a> {
    values: &'a BTreeMap<&'static str, String>,
    problems: &'a mut Vec<String>,
}

impl Parser<'_> {
    fn raw(&self, k: &str) -> &str {
        self.values.get(k).map(String::as_str).expect("every key has a value")
    }

    fn field<T>(&mut self, k: &str, fallback: T, parse: impl FnOnce(&str) -> Result<T, String>) -> T {
        match parse(self.raw(k)) {
            Ok(v) => v,
            Err(msg) => {
                self.problems.push(format!("key `{k}`: {msg}"));
                fallback
            }
        }
    }

    fn num<T: std::str::FromStr>(&mut self, k: &str, fallback: T) -> T {
        self.field(k, fallback, |s| s.parse().map_err(|_| format!("`{s}` is not a valid number")))
    }

    fn month_opt(&mut self, k: &str) -> Option<Month> {
        self.field(k, None, |s| {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|e| format!("{e}"))
            }
        })
    }

    fn path_opt(&self, k: &str) -> Option<PathBuf> {
        let s = self.raw(k);
        (!s.is_empty()).then(|| PathBuf::from(s))
    }

    fn list<T>(&mut self, k: &str, parse: impl Fn(&str) -> Result<T, String>) -> Vec<T> {
        let items: Vec<&str> = self.raw(k).split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
        let mut out = Vec::with_capacity(items.len());
        let mut bad = Vec::new();
        for item in items {
            match parse(item) {
                Ok(v) => out.push(v),
                Err(msg) => bad.push(msg),
            }
        }
        for msg in bad {
            self.problems.push(format!("key `{k}`: {msg}"));
        }
        out
    }

    fn cost(&mut self, k: &str) -> Option<f64> {
        self.field(k, None, |s| {
            if s == "auto" {
                return Ok(None);
            }
            match s.parse::<f64>() {
                Ok(v) if v > 0.0 && v.is_finite() => Ok(Some(v)),
                _ => Err(format!("`{s}` is neither `auto` nor a positive number")),
            }
        })
    }

    fn build(&mut self) -> RunConfig {
        let defaults = ScenarioSpec::default();
        let horizons = self.list("horizons", |s| {
            let h: u32 = s.parse().map_err(|_| format!("`{s}` is not a horizon"))?;
            lag_spec(h).map_err(|e| e.to_string())?;
            Ok(h)
        });
        let models = self.list("models", |s| s.parse::<ModelKind>().map_err(|e| e.to_string()));
        let strategy = self.field("strategy", Strategy::Standard, |s| s.parse().map_err(|e| format!("{e}")));
        let label_source =
            self.field("label_source", LabelSource::NberVintage, |s| s.parse().map_err(|e| format!("{e}")));
        let lambda_count = match self.num::<usize>("lambda_count", 0) {
            0 => None,
            n => Some(n),
        };
        let enet_alphas = self.list("enet_alphas", |s| match s.parse::<f64>() {
            Ok(a) if a > 0.0 && a < 1.0 => Ok(a),
            _ => Err(format!("`{s}` is not a mixing weight strictly between 0 and 1")),
        });
        let train_fraction = self.field("train_fraction", 5.0 / 6.0, |s| {
            let v = match s.split_once('/') {
                Some((a, b)) => match (a.trim().parse::<f64>(), b.trim().parse::<f64>()) {
                    (Ok(a), Ok(b)) if b != 0.0 => a / b,
                    _ => f64::NAN,
                },
                None => s.parse().unwrap_or(f64::NAN),
            };
            if v > 0.0 && v < 1.0 {
                Ok(v)
            } else {
                Err(format!("`{s}` is not a fraction strictly between 0 and 1"))
            }
        });
        let selection = self.field("selection", SelectionMetric::Cost, |s| match s {
            "cost" => Ok(SelectionMetric::Cost),
            "logloss" => Ok(SelectionMetric::LogLoss),
            _ => Err(format!("`{s}` is neither `cost` nor `logloss`")),
        });
        let costs = match (self.cost("cost_fn"), self.cost("cost_fp")) {
            (Some(a), Some(b)) => match CostSpec::new(a, b) {
                Ok(c) => Some(c),
                Err(e) => {
                    self.problems.push(format!("keys `cost_fn`, `cost_fp`: {e}"));
                    None
                }
            },
            (None, None) => None,
            _ => {
                if self.raw("cost_fn") == "auto" || self.raw("cost_fp") == "auto" {
                    self.problems
                        .push("keys `cost_fn`, `cost_fp`: set both or leave both at `auto`".into());
                }
                None
            }
        };
        let pr_integration = self.field("pr_integration", PrIntegration::Step, |s| match s {
            "step" => Ok(PrIntegration::Step),
            "trapezoid" => Ok(PrIntegration::Trapezoid),
            _ => Err(format!("`{s}` is neither `step` nor `trapezoid`")),
        });
        let coincident = self.list("coincident", |s| Ok(s.to_string()));

        let mut scenario = defaults.clone();
        scenario.seed = self.num("seed", defaults.seed);
        scenario.start = self.field("scenario_start", defaults.start, |s| s.parse().map_err(|e| format!("{e}")));
        scenario.months = self.num("months", defaults.months);
        scenario.vintages = self.num("vintage_count", defaults.vintages);
        scenario.lead = self.num("lead", defaults.lead);
        scenario.noise_variables = self.num("noise_variables", defaults.noise_variables);
        scenario.duplicates = self.num("duplicates", defaults.duplicates);

        let knn_k = self.num("knn_k", 5);
        if knn_k == 0 {
            self.problems.push("key `knn_k`: must be at least 1".into());
        }
        let retune_every = self.num("retune_every", 1);
        if retune_every == 0 {
            self.problems.push("key `retune_every`: must be at least 1".into());
        }
        let first = self.month_opt("first");
        let last = self.month_opt("last");
        if let (Some(a), Some(b)) = (first, last) {
            if b < a {
                self.problems.push(format!("keys `first`, `last`: {a} is after {b}"));
            }
        }

        RunConfig {
            vintages: PathBuf::from(self.raw("vintages")),
            output: PathBuf::from(self.raw("output")),
            labels: self.path_opt("labels"),
            forecasts: self.path_opt("forecasts"),
            first,
            last,
            as_of: self.month_opt("as_of"),
            horizons,
            models,
            strategy,
            label_source,
            lambda_count,
            enet_alphas,
            block_len: self.num("block_len", 288),
            block_step: self.num("block_step", 12),
            train_fraction,
            selection,
            costs,
            knn_k,
            retune_every,
            workers: self.num("workers", 0),
            pr_integration,
            coincident,
            dating: BbParams {
                window: self.num("bb_window", 5),
                min_phase: self.num("bb_min_phase", 5),
                min_cycle: self.num("bb_min_cycle", 15),
            },
            scenario,
        }
    }
}
