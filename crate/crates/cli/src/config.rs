//! Flat `key = value` experiment configuration with dotted keys.
//!
//! Lines starting with `#` and blank lines are ignored. Unknown keys, keys that
//! do not apply to the selected kinds, and duplicates are errors. [`ExperimentConfig::echo`]
//! writes a canonical form that parses back to an identical value.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use absorb_core::C64;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("config: line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("config: line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("config: line {line}: duplicate key `{key}`")]
    Duplicate { line: usize, key: String },
    #[error("config: key `{key}`: cannot parse `{value}` as {expected}")]
    BadValue { key: String, value: String, expected: &'static str },
    #[error("config: missing required key `{0}`")]
    Missing(&'static str),
    #[error("config: key `{key}` does not apply when {context}")]
    NotApplicable { key: String, context: String },
    #[error("config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum DomainConfig {
    Line { a: f64, b: f64, n: usize },
    Rectangle { lx: f64, ly: f64, nx: usize, ny: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub enum PotentialConfig {
    Zero,
    Constant(f64),
    Well { depth: f64, lower: Vec<f64>, upper: Vec<f64> },
    Table(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Left, Side::Right, Side::Bottom, Side::Top];

    pub fn name(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
            Side::Bottom => "bottom",
            Side::Top => "top",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryConfig {
    Dirichlet,
    Neumann,
    Periodic,
    /// `β` everywhere unless overridden per side.
    Robin { beta: C64, sides: BTreeMap<Side, C64> },
    /// One `β` per boundary node in grid order.
    RobinTable(Vec<C64>),
    /// Sampled `min(1/|x − y|, 1/h)` around boundary node `y`.
    Hardy { y_node: usize },
    PhiFile(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PacketConfig {
    pub center: Vec<f64>,
    pub sigma: f64,
    pub momentum: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub timeseries: String,
    /// Per-node flux CSV; disabled when `None`.
    pub flux: Option<String>,
    pub summary: String,
    pub decimate: usize,
    pub normalize_density: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            timeseries: "timeseries.csv".into(),
            flux: None,
            summary: "summary.json".into(),
            decimate: 1,
            normalize_density: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub domain: DomainConfig,
    /// `None` selects `h²/2`.
    pub dt: Option<f64>,
    pub t_final: f64,
    pub potential: PotentialConfig,
    pub boundary: BoundaryConfig,
    pub packet: PacketConfig,
    pub output: OutputConfig,
    pub seed: u64,
    /// Spectral parameter for `dtn`; `None` selects η automatically.
    pub lambda: Option<f64>,
    /// Split time for `povm`; `None` selects `t_final / 2`.
    pub t_split: Option<f64>,
}

const KEYS: &[&str] = &[
    "domain.kind",
    "domain.a",
    "domain.b",
    "domain.n",
    "domain.lx",
    "domain.ly",
    "domain.nx",
    "domain.ny",
    "time.dt",
    "time.t_final",
    "potential.kind",
    "potential.value",
    "potential.depth",
    "potential.lower",
    "potential.upper",
    "potential.values",
    "boundary.kind",
    "boundary.beta",
    "boundary.beta.left",
    "boundary.beta.right",
    "boundary.beta.bottom",
    "boundary.beta.top",
    "boundary.beta.nodes",
    "boundary.hardy.y",
    "boundary.phi.file",
    "packet.center",
    "packet.sigma",
    "packet.momentum",
    "output.timeseries",
    "output.flux",
    "output.summary",
    "output.decimate",
    "output.normalize_density",
    "run.seed",
    "dtn.lambda",
    "povm.t_split",
];

/// Parsed key/value pairs with the set of keys consumed so far.
struct Entries {
    map: BTreeMap<String, String>,
    used: std::collections::BTreeSet<String>,
}

impl Entries {
    fn take(&mut self, key: &str) -> Option<String> {
        let v = self.map.get(key).cloned();
        if v.is_some() {
            self.used.insert(key.to_string());
        }
        v
    }

    fn required(&mut self, key: &'static str) -> Result<String, ConfigError> {
        self.take(key).ok_or(ConfigError::Missing(key))
    }

    fn leftover(&self, context: impl Fn(&str) -> String) -> Result<(), ConfigError> {
        match self.map.keys().find(|k| !self.used.contains(*k)) {
            Some(k) => Err(ConfigError::NotApplicable { key: k.clone(), context: context(k) }),
            None => Ok(()),
        }
    }
}

fn bad(key: &str, value: &str, expected: &'static str) -> ConfigError {
    ConfigError::BadValue { key: key.into(), value: value.into(), expected }
}

fn real(key: &str, value: &str) -> Result<f64, ConfigError> {
    value.trim().parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| bad(key, value, "a finite real number"))
}

fn count(key: &str, value: &str) -> Result<usize, ConfigError> {
    value.trim().parse::<usize>().map_err(|_| bad(key, value, "a non-negative integer"))
}

fn boolean(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value.trim() {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(bad(key, value, "true or false")),
    }
}

fn reals(key: &str, value: &str) -> Result<Vec<f64>, ConfigError> {
    value.split(',').map(|s| real(key, s)).collect()
}

/// Parse `1.5`, `2i`, `-i`, `0.5-1e-3i`.
pub fn parse_complex(text: &str) -> Option<C64> {
    let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    if s.is_empty() {
        return None;
    }
    let finite = |z: C64| Some(z).filter(|z| z.is_finite());
    let Some(body) = s.strip_suffix('i') else {
        return finite(C64::new(s.parse().ok()?, 0.0));
    };
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&p| (bytes[p] == b'+' || bytes[p] == b'-') && !matches!(bytes[p - 1], b'e' | b'E'));
    let imag = |t: &str| -> Option<f64> {
        match t {
            "" | "+" => Some(1.0),
            "-" => Some(-1.0),
            _ => t.parse().ok(),
        }
    };
    match split {
        Some(p) => finite(C64::new(body[..p].parse().ok()?, imag(&body[p..])?)),
        None => finite(C64::new(0.0, imag(body)?)),
    }
}

fn complex(key: &str, value: &str) -> Result<C64, ConfigError> {
    parse_complex(value).ok_or_else(|| bad(key, value, "a complex number such as 1, 2i or 0.5-1i"))
}

pub fn format_complex(z: C64) -> String {
    if z.im.is_sign_negative() {
        format!("{}-{}i", z.re, -z.im)
    } else {
        format!("{}+{}i", z.re, z.im)
    }
}

fn join<T>(items: &[T], f: impl Fn(&T) -> String) -> String {
    items.iter().map(f).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut map = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.trim();
            if content.is_empty() || content.starts_with('#') {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or(ConfigError::Syntax { line })?;
            let key = key.trim();
            if !KEYS.contains(&key) {
                return Err(ConfigError::UnknownKey { line, key: key.to_string() });
            }
            if map.insert(key.to_string(), value.trim().to_string()).is_some() {
                return Err(ConfigError::Duplicate { line, key: key.to_string() });
            }
        }
        let mut e = Entries { map, used: Default::default() };
        let cfg = Self::from_entries(&mut e)?;
        e.leftover(|k| {
            let section = k.split('.').next().unwrap_or("");
            match section {
                "domain" => format!("domain.kind = {}", cfg.domain_kind()),
                "potential" => format!("potential.kind = {}", cfg.potential_kind()),
                "boundary" => format!("boundary.kind = {}", cfg.boundary_kind()),
                _ => "this configuration is used".into(),
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn from_entries(e: &mut Entries) -> Result<Self, ConfigError> {
        let kind = e.required("domain.kind")?;
        let domain = match kind.as_str() {
            "1d" => DomainConfig::Line {
                a: real("domain.a", &e.required("domain.a")?)?,
                b: real("domain.b", &e.required("domain.b")?)?,
                n: count("domain.n", &e.required("domain.n")?)?,
            },
            "2d" => DomainConfig::Rectangle {
                lx: real("domain.lx", &e.required("domain.lx")?)?,
                ly: real("domain.ly", &e.required("domain.ly")?)?,
                nx: count("domain.nx", &e.required("domain.nx")?)?,
                ny: count("domain.ny", &e.required("domain.ny")?)?,
            },
            _ => return Err(bad("domain.kind", &kind, "1d or 2d")),
        };
        let dt = e.take("time.dt").map(|v| real("time.dt", &v)).transpose()?;
        let t_final = real("time.t_final", &e.required("time.t_final")?)?;

        let pk = e.take("potential.kind").unwrap_or_else(|| "zero".into());
        let potential = match pk.as_str() {
            "zero" => PotentialConfig::Zero,
            "constant" => PotentialConfig::Constant(real("potential.value", &e.required("potential.value")?)?),
            "well" => PotentialConfig::Well {
                depth: real("potential.depth", &e.required("potential.depth")?)?,
                lower: reals("potential.lower", &e.required("potential.lower")?)?,
                upper: reals("potential.upper", &e.required("potential.upper")?)?,
            },
            "table" => PotentialConfig::Table(reals("potential.values", &e.required("potential.values")?)?),
            _ => return Err(bad("potential.kind", &pk, "zero, constant, well or table")),
        };

        let bk = e.required("boundary.kind")?;
        let boundary = match bk.as_str() {
            "dirichlet" => BoundaryConfig::Dirichlet,
            "neumann" => BoundaryConfig::Neumann,
            "periodic" => BoundaryConfig::Periodic,
            "robin" => {
                let beta = e.take("boundary.beta").map(|v| complex("boundary.beta", &v)).transpose()?.unwrap_or_default();
                let mut sides = BTreeMap::new();
                for side in Side::ALL {
                    let key = format!("boundary.beta.{}", side.name());
                    if let Some(v) = e.take(&key) {
                        sides.insert(side, complex(&key, &v)?);
                    }
                }
                BoundaryConfig::Robin { beta, sides }
            }
            "robin-table" => {
                let v = e.required("boundary.beta.nodes")?;
                BoundaryConfig::RobinTable(v.split(',').map(|s| complex("boundary.beta.nodes", s)).collect::<Result<_, _>>()?)
            }
            "hardy" => BoundaryConfig::Hardy { y_node: count("boundary.hardy.y", &e.required("boundary.hardy.y")?)? },
            "phi-file" => BoundaryConfig::PhiFile(PathBuf::from(e.required("boundary.phi.file")?)),
            _ => {
                return Err(bad(
                    "boundary.kind",
                    &bk,
                    "dirichlet, neumann, periodic, robin, robin-table, hardy or phi-file",
                ))
            }
        };

        let packet = PacketConfig {
            center: reals("packet.center", &e.required("packet.center")?)?,
            sigma: real("packet.sigma", &e.required("packet.sigma")?)?,
            momentum: reals("packet.momentum", &e.required("packet.momentum")?)?,
        };

        let mut output = OutputConfig::default();
        if let Some(v) = e.take("output.timeseries") {
            output.timeseries = v;
        }
        output.flux = e.take("output.flux").filter(|v| !v.is_empty());
        if let Some(v) = e.take("output.summary") {
            output.summary = v;
        }
        if let Some(v) = e.take("output.decimate") {
            output.decimate = count("output.decimate", &v)?;
        }
        if let Some(v) = e.take("output.normalize_density") {
            output.normalize_density = boolean("output.normalize_density", &v)?;
        }

        let seed = e.take("run.seed").map(|v| v.parse::<u64>().map_err(|_| bad("run.seed", &v, "an unsigned integer"))).transpose()?.unwrap_or(0);
        let lambda = match e.take("dtn.lambda") {
            None => None,
            Some(v) if v == "auto" => None,
            Some(v) => Some(real("dtn.lambda", &v)?),
        };
        let t_split = e.take("povm.t_split").map(|v| real("povm.t_split", &v)).transpose()?;
        Ok(Self { domain, dt, t_final, potential, boundary, packet, output, seed, lambda, t_split })
    }

    /// Checks that do not need a grid.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let dim = self.dim();
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if !(self.t_final > 0.0) {
            return invalid(format!("time.t_final must be positive, got {}", self.t_final));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0) {
                return invalid(format!("time.dt must be positive, got {dt}"));
            }
        }
        if self.packet.center.len() != dim || self.packet.momentum.len() != dim {
            return invalid(format!("packet.center and packet.momentum need {dim} components"));
        }
        if let PotentialConfig::Well { lower, upper, .. } = &self.potential {
            if lower.len() != dim || upper.len() != dim {
                return invalid(format!("potential.lower and potential.upper need {dim} components"));
            }
        }
        if self.output.decimate == 0 {
            return invalid("output.decimate must be at least 1".into());
        }
        if let BoundaryConfig::Robin { sides, .. } = &self.boundary {
            if dim == 1 {
                if let Some(s) = sides.keys().find(|s| matches!(s, Side::Bottom | Side::Top)) {
                    return Err(ConfigError::NotApplicable {
                        key: format!("boundary.beta.{}", s.name()),
                        context: "domain.kind = 1d".into(),
                    });
                }
            }
        }
        if let Some(ts) = self.t_split {
            if !(ts >= 0.0 && ts <= self.t_final) {
                return invalid(format!("povm.t_split must lie in [0, t_final], got {ts}"));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self.domain {
            DomainConfig::Line { .. } => 1,
            DomainConfig::Rectangle { .. } => 2,
        }
    }

    fn domain_kind(&self) -> &'static str {
        match self.domain {
            DomainConfig::Line { .. } => "1d",
            DomainConfig::Rectangle { .. } => "2d",
        }
    }

    fn potential_kind(&self) -> &'static str {
        match self.potential {
            PotentialConfig::Zero => "zero",
            PotentialConfig::Constant(_) => "constant",
            PotentialConfig::Well { .. } => "well",
            PotentialConfig::Table(_) => "table",
        }
    }

    fn boundary_kind(&self) -> &'static str {
        match self.boundary {
            BoundaryConfig::Dirichlet => "dirichlet",
            BoundaryConfig::Neumann => "neumann",
            BoundaryConfig::Periodic => "periodic",
            BoundaryConfig::Robin { .. } => "robin",
            BoundaryConfig::RobinTable(_) => "robin-table",
            BoundaryConfig::Hardy { .. } => "hardy",
            BoundaryConfig::PhiFile(_) => "phi-file",
        }
    }

    /// Canonical text form; `parse(echo(c)) == c`.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("domain.kind", self.domain_kind().into());
        match &self.domain {
            DomainConfig::Line { a, b, n } => {
                kv("domain.a", a.to_string());
                kv("domain.b", b.to_string());
                kv("domain.n", n.to_string());
            }
            DomainConfig::Rectangle { lx, ly, nx, ny } => {
                kv("domain.lx", lx.to_string());
                kv("domain.ly", ly.to_string());
                kv("domain.nx", nx.to_string());
                kv("domain.ny", ny.to_string());
            }
        }
        if let Some(dt) = self.dt {
            kv("time.dt", dt.to_string());
        }
        kv("time.t_final", self.t_final.to_string());
        kv("potential.kind", self.potential_kind().into());
        match &self.potential {
            PotentialConfig::Zero => {}
            PotentialConfig::Constant(v) => kv("potential.value", v.to_string()),
            PotentialConfig::Well { depth, lower, upper } => {
                kv("potential.depth", depth.to_string());
                kv("potential.lower", join(lower, f64::to_string));
                kv("potential.upper", join(upper, f64::to_string));
            }
            PotentialConfig::Table(v) => kv("potential.values", join(v, f64::to_string)),
        }
        kv("boundary.kind", self.boundary_kind().into());
        match &self.boundary {
            BoundaryConfig::Robin { beta, sides } => {
                kv("boundary.beta", format_complex(*beta));
                for (side, b) in sides {
                    kv(&format!("boundary.beta.{}", side.name()), format_complex(*b));
                }
            }
            BoundaryConfig::RobinTable(v) => kv("boundary.beta.nodes", join(v, |z| format_complex(*z))),
            BoundaryConfig::Hardy { y_node } => kv("boundary.hardy.y", y_node.to_string()),
            BoundaryConfig::PhiFile(p) => kv("boundary.phi.file", p.display().to_string()),
            _ => {}
        }
        kv("packet.center", join(&self.packet.center, f64::to_string));
        kv("packet.sigma", self.packet.sigma.to_string());
        kv("packet.momentum", join(&self.packet.momentum, f64::to_string));
        kv("output.timeseries", self.output.timeseries.clone());
        if let Some(f) = &self.output.flux {
            kv("output.flux", f.clone());
        }
        kv("output.summary", self.output.summary.clone());
        kv("output.decimate", self.output.decimate.to_string());
        kv("output.normalize_density", self.output.normalize_density.to_string());
        kv("run.seed", self.seed.to_string());
        kv("dtn.lambda", self.lambda.map_or_else(|| "auto".into(), |l| l.to_string()));
        if let Some(ts) = self.t_split {
            kv("povm.t_split", ts.to_string());
        }
        s
    }
}
