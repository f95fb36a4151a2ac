//! Run configuration: flat `key = value` text with `[section]` headers.
//!
//! Relative paths are resolved against the directory holding the file.
//! Every problem found is reported, not only the first.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ini::Ini;

use crate::error::{Error, Result};
use crate::mcmc::ChainConfig;
use crate::models::{AuxUpdate, Family, HyperPrior, Hyperparameter, PriorDensity, PriorTarget};
use crate::PriorKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Fit,
    Cv,
    Simulate,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Fit => "fit",
            Self::Cv => "cv",
            Self::Simulate => "simulate",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SupportConfig {
    Graph {
        adjacency: PathBuf,
        n_nodes: Option<usize>,
        order: u32,
    },
    Mesh {
        path: PathBuf,
        alpha: u32,
    },
}

/// Where each record sits, by column name.
#[derive(Debug, Clone, PartialEq)]
pub enum LocationColumns {
    /// Integer node index, counted from `base`.
    Node { column: String, base: usize },
    Coordinates { x: String, y: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataConfig {
    pub path: PathBuf,
    pub response: String,
    pub covariates: Vec<String>,
    /// Prepend a column of ones named `intercept`.
    pub intercept: bool,
    pub locations: LocationColumns,
    pub offset: Option<String>,
    /// Records sharing a value of this column form one cross-validation group.
    pub group: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub family: Family,
    pub prior: PriorKind,
    pub nugget: bool,
    pub beta_variance: f64,
    pub aux_update: AuxUpdate,
    pub aux_init: Option<f64>,
    pub retry_cap: usize,
    pub priors: Vec<HyperPrior>,
    pub fixed: BTreeMap<Hyperparameter, f64>,
    pub init: BTreeMap<Hyperparameter, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CvConfig {
    pub folds: usize,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub output: PathBuf,
    pub data: Option<DataConfig>,
    pub support: SupportConfig,
    pub model: ModelConfig,
    pub mcmc: ChainConfig,
    pub chains: usize,
    pub cv: CvConfig,
    /// Prior field draws written by `simulate`.
    pub draws: usize,
}

const KNOWN: &[(&str, &[&str])] = &[
    ("run", &["output", "seed"]),
    ("mcmc", &["burn_in", "n_store", "thin", "chains"]),
    ("data", &["path", "response", "covariates", "intercept", "node", "node_base", "x", "y", "offset", "group"]),
    ("support", &["kind", "adjacency", "nodes", "order", "mesh", "alpha"]),
    ("model", &["family", "prior", "nugget", "beta_variance", "aux_update", "aux_init", "retry_cap"]),
    ("priors", &[]),
    ("fixed", &[]),
    ("init", &[]),
    ("cv", &["folds"]),
    ("simulate", &["draws"]),
];

/// Section reader that records problems instead of stopping at them.
struct Reader<'a> {
    ini: &'a Ini,
    base: &'a Path,
    problems: Vec<String>,
}

impl Reader<'_> {
    fn raw(&self, section: &str, key: &str) -> Option<&str> {
        self.ini.get_from(Some(section), key).map(str::trim).filter(|v| !v.is_empty())
    }

    fn parse<T: FromStr>(&mut self, section: &str, key: &str) -> Option<T>
    where
        T::Err: fmt::Display,
    {
        let v = self.raw(section, key)?;
        match v.parse() {
            Ok(t) => Some(t),
            Err(e) => {
                self.problems.push(format!("[{section}] {key}: cannot parse `{v}` ({e})"));
                None
            }
        }
    }

    fn or<T: FromStr>(&mut self, section: &str, key: &str, default: T) -> T
    where
        T::Err: fmt::Display,
    {
        self.parse(section, key).unwrap_or(default)
    }

    fn required<T: FromStr>(&mut self, section: &str, key: &str) -> Option<T>
    where
        T::Err: fmt::Display,
    {
        if self.raw(section, key).is_none() {
            self.problems.push(format!("[{section}] {key}: required"));
            return None;
        }
        self.parse(section, key)
    }

    fn path(&mut self, section: &str, key: &str, must_exist: bool) -> Option<PathBuf> {
        let p = self.base.join(self.required::<String>(section, key)?);
        if must_exist && !p.is_file() {
            self.problems.push(format!("[{section}] {key}: file `{}` not found", p.display()));
        }
        Some(p)
    }

    fn positive(&mut self, section: &str, key: &str, v: f64) -> f64 {
        if !(v > 0.0) || !v.is_finite() {
            self.problems.push(format!("[{section}] {key}: must be positive, got {v}"));
        }
        v
    }

    fn at_least_one(&mut self, section: &str, key: &str, v: usize) -> usize {
        if v == 0 {
            self.problems.push(format!("[{section}] {key}: must be at least 1"));
        }
        v
    }

    fn hyper_values(&mut self, section: &str) -> BTreeMap<Hyperparameter, f64> {
        let mut out = BTreeMap::new();
        let Some(props) = self.ini.section(Some(section)) else { return out };
        for (k, v) in props.iter() {
            match (k.parse::<Hyperparameter>(), v.trim().parse::<f64>()) {
                (Ok(h), Ok(x)) => {
                    self.positive(section, k, x);
                    out.insert(h, x);
                }
                (Err(e), _) => self.problems.push(format!("[{section}] {k}: {e}")),
                (_, Err(_)) => self.problems.push(format!("[{section}] {k}: cannot parse `{v}` as a number")),
            }
        }
        out
    }
}

fn bool_value(s: &str) -> std::result::Result<bool, String> {
    match s.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err("expected true or false".into()),
    }
}

#[derive(Debug, Clone, Copy)]
struct Flag(bool);

impl FromStr for Flag {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        bool_value(s).map(Flag)
    }
}

#[derive(Debug, Clone, Copy)]
struct Prior(PriorKind);

impl FromStr for Prior {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "grf" => Ok(Self(PriorKind::Grf)),
            "lma" => Ok(Self(PriorKind::Lma)),
            _ => Err("expected grf or lma".into()),
        }
    }
}

/// Reads and validates a configuration file.
pub fn parse_config(path: &Path, command: Command) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config_str(&text, base, command).map_err(|e| match e {
        Error::Config(mut problems) => {
            for p in &mut problems {
                *p = format!("{}: {p}", path.display());
            }
            Error::Config(problems)
        }
        other => other,
    })
}

/// Parses configuration text; relative paths are taken from `base`.
pub fn parse_config_str(text: &str, base: &Path, command: Command) -> Result<RunConfig> {
    let ini = Ini::load_from_str_noescape(text)
        .map_err(|e| Error::Config(vec![format!("line {}: {}", e.line, e.msg)]))?;
    let mut r = Reader {
        ini: &ini,
        base,
        problems: Vec::new(),
    };

    for (section, props) in ini.iter() {
        let Some(section) = section else {
            if let Some((k, _)) = props.iter().next() {
                r.problems.push(format!("{k}: key outside any section"));
            }
            continue;
        };
        match KNOWN.iter().find(|(s, _)| *s == section) {
            None => r.problems.push(format!("[{section}]: unknown section")),
            Some((_, keys)) if !keys.is_empty() => {
                for (k, _) in props.iter() {
                    if !keys.contains(&k) {
                        r.problems.push(format!("[{section}] {k}: unknown key"));
                    }
                }
            }
            _ => {}
        }
    }

    let output = base.join(r.or::<String>("run", "output", "output".into()));
    let seed = r.or("run", "seed", 1u64);
    let defaults = ChainConfig::default();
    let n_store = r.or("mcmc", "n_store", defaults.n_store);
    let thin = r.or("mcmc", "thin", 1usize);
    let chains = r.or("mcmc", "chains", 1usize);
    let mcmc = ChainConfig {
        burn_in: r.or("mcmc", "burn_in", defaults.burn_in),
        n_store: r.at_least_one("mcmc", "n_store", n_store),
        thin: r.at_least_one("mcmc", "thin", thin),
        seed,
        stream: 0,
    };
    let chains = r.at_least_one("mcmc", "chains", chains);

    let family = r.or("model", "family", Family::Gaussian);
    let prior = r.or("model", "prior", Prior(PriorKind::Grf)).0;
    let kind = r.required::<String>("support", "kind");
    let support = match kind.as_deref() {
        Some("graph") => {
            let adjacency = r.path("support", "adjacency", true);
            let n_nodes = r.parse("support", "nodes");
            let order = r.or("support", "order", 0u32);
            adjacency.map(|adjacency| SupportConfig::Graph { adjacency, n_nodes, order })
        }
        Some("mesh") => {
            let path = r.path("support", "mesh", true);
            let alpha = r.or("support", "alpha", 2u32);
            if alpha < 2 {
                r.problems.push(format!("[support] alpha: need alpha >= 2, got {alpha}"));
            } else if prior == PriorKind::Lma && alpha % 2 == 1 {
                r.problems.push(format!(
                    "[support] alpha: {alpha} is odd; the Laplace moving average prior needs an even alpha"
                ));
            }
            path.map(|path| SupportConfig::Mesh { path, alpha })
        }
        Some(other) => {
            r.problems.push(format!("[support] kind: expected graph or mesh, got `{other}`"));
            None
        }
        None => None,
    };

    let data = if command == Command::Simulate && ini.section(Some("data")).is_none() {
        None
    } else {
        read_data(&mut r, family, kind.as_deref())
    };

    let beta_variance = r.or("model", "beta_variance", 1000.0);
    let mut priors = Vec::new();
    if let Some(props) = ini.section(Some("priors")) {
        let mut seen: BTreeMap<Hyperparameter, &str> = BTreeMap::new();
        for (k, v) in props.iter() {
            let parsed = k.parse::<PriorTarget>().and_then(|t| Ok((t, v.parse::<PriorDensity>()?)));
            match parsed {
                Ok((t, d)) => {
                    if let Some(prev) = seen.insert(t.parameter(), k) {
                        r.problems.push(format!("[priors] {k}: `{prev}` already sets a prior on `{}`", t.parameter().name()));
                    }
                    priors.push(HyperPrior { target: t, density: d });
                }
                Err(e) => r.problems.push(format!("[priors] {k}: {e}")),
            }
        }
    }
    let aux_init = r.parse("model", "aux_init").map(|v| r.positive("model", "aux_init", v));
    let model = ModelConfig {
        family,
        prior,
        nugget: r.or("model", "nugget", Flag(false)).0,
        beta_variance: r.positive("model", "beta_variance", beta_variance),
        aux_update: r.or("model", "aux_update", AuxUpdate::Metropolis),
        aux_init,
        retry_cap: r.or("model", "retry_cap", crate::mcmc::DEFAULT_RETRY_CAP),
        priors,
        fixed: r.hyper_values("fixed"),
        init: r.hyper_values("init"),
    };

    let folds = r.or("cv", "folds", 10usize);
    if folds < 2 {
        r.problems.push(format!("[cv] folds: need at least 2, got {folds}"));
    }
    let draws = r.or("simulate", "draws", 100usize);
    let draws = r.at_least_one("simulate", "draws", draws);

    if !r.problems.is_empty() {
        return Err(Error::Config(r.problems));
    }
    Ok(RunConfig {
        command,
        output,
        data,
        support: support.expect("support errors are reported above"),
        model,
        mcmc,
        chains,
        cv: CvConfig { folds },
        draws,
    })
}

fn read_data(r: &mut Reader<'_>, family: Family, kind: Option<&str>) -> Option<DataConfig> {
    let path = r.path("data", "path", true);
    let response = r.required::<String>("data", "response");
    let covariates: Vec<String> = r
        .raw("data", "covariates")
        .map(|v| v.split(',').map(|c| c.trim().to_string()).filter(|c| !c.is_empty()).collect())
        .unwrap_or_default();
    let intercept = r.or("data", "intercept", Flag(true)).0;
    if covariates.is_empty() && !intercept {
        r.problems.push("[data] covariates: the model needs at least one covariate or an intercept".into());
    }
    let locations = match kind {
        Some("graph") => r.required::<String>("data", "node").map(|column| LocationColumns::Node {
            column,
            base: 0,
        }),
        Some("mesh") => {
            let x = r.required::<String>("data", "x");
            let y = r.required::<String>("data", "y");
            x.zip(y).map(|(x, y)| LocationColumns::Coordinates { x, y })
        }
        _ => None,
    };
    let locations = locations.map(|l| match l {
        LocationColumns::Node { column, .. } => LocationColumns::Node {
            column,
            base: r.or("data", "node_base", 0usize),
        },
        other => other,
    });
    let offset = r.parse::<String>("data", "offset");
    if offset.is_some() && family != Family::Poisson {
        r.problems.push("[data] offset: only Poisson models take an offset".into());
    }
    Some(DataConfig {
        path: path?,
        response: response?,
        covariates,
        intercept,
        locations: locations?,
        offset,
        group: r.parse("data", "group"),
    })
}
