use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use blockprec::block::{read_system, BlockMatrix};
use blockprec::krylov::GmresConfig;
use blockprec::precond::PrecondSpec;
use blockprec::problems::{generate, ProblemSpec};
use serde::Deserialize;
use serde_json::{Map, Value};

/// Run configuration as read from JSON. The preconditioner stays raw until
/// the system is known, so presets can be expanded and overridden.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub problem: Option<ProblemSpec>,
    #[serde(default)]
    pub manifest: Option<PathBuf>,
    #[serde(default)]
    pub preconditioner: Option<Value>,
    #[serde(default)]
    pub gmres: GmresConfig,
    /// Report path; stdout when absent.
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Optional `iteration,relres` history file.
    #[serde(default)]
    pub csv: Option<PathBuf>,
    #[serde(default = "one")]
    pub repeat: usize,
}

fn one() -> usize {
    1
}

/// A `path=value` override. Values are parsed as JSON when possible and
/// taken as strings otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct Override {
    pub path: String,
    pub value: Value,
}

impl Override {
    pub fn new(path: impl Into<String>, value: Value) -> Self {
        Self {
            path: path.into(),
            value,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let (path, raw) = s
            .split_once('=')
            .ok_or_else(|| anyhow!("override '{s}' is not of the form path=value"))?;
        let path = path.trim();
        if path.is_empty() {
            bail!("override '{s}' has an empty path");
        }
        Ok(Self::new(path, parse_value(raw)))
    }

    fn targets_preconditioner_subtree(&self) -> bool {
        self.path.starts_with("preconditioner.") || self.path.starts_with("preconditioner[")
    }
}

pub fn parse_value(raw: &str) -> Value {
    serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.to_string()))
}

enum Segment {
    Key(String),
    Index(usize),
}

fn segments(path: &str) -> Result<Vec<Segment>> {
    let mut out = Vec::new();
    for part in path.split('.') {
        let (key, mut rest) = match part.find('[') {
            Some(k) => (&part[..k], &part[k..]),
            None => (part, ""),
        };
        if key.is_empty() && out.is_empty() {
            bail!("path '{path}' must start with a key");
        }
        if !key.is_empty() {
            out.push(Segment::Key(key.to_string()));
        }
        while !rest.is_empty() {
            let close = rest
                .find(']')
                .filter(|_| rest.starts_with('['))
                .ok_or_else(|| anyhow!("malformed index in path '{path}'"))?;
            let idx = rest[1..close]
                .parse()
                .map_err(|_| anyhow!("malformed index in path '{path}'"))?;
            out.push(Segment::Index(idx));
            rest = &rest[close + 1..];
        }
    }
    Ok(out)
}

/// Sets `path` (dotted keys with optional `[i]` indices) inside `root`,
/// creating missing objects along the way.
pub fn set_path(root: &mut Value, path: &str, value: Value) -> Result<()> {
    let segs = segments(path)?;
    let mut cur = root;
    for (k, seg) in segs.iter().enumerate() {
        let last = k + 1 == segs.len();
        let shown = || path_prefix(&segs[..=k]);
        cur = match seg {
            Segment::Key(key) => {
                if cur.is_null() {
                    *cur = Value::Object(Map::new());
                }
                let obj = cur.as_object_mut().ok_or_else(|| {
                    anyhow!(
                        "cannot set '{path}': '{}' is not an object",
                        path_prefix(&segs[..k])
                    )
                })?;
                obj.entry(key.clone()).or_insert(Value::Null)
            }
            Segment::Index(i) => {
                let arr = cur.as_array_mut().ok_or_else(|| {
                    anyhow!(
                        "cannot set '{path}': '{}' is not an array",
                        path_prefix(&segs[..k])
                    )
                })?;
                if *i == arr.len() {
                    arr.push(Value::Null);
                }
                arr.get_mut(*i).ok_or_else(|| {
                    anyhow!("cannot set '{path}': index out of range at '{}'", shown())
                })?
            }
        };
        if last {
            *cur = value;
            return Ok(());
        }
    }
    unreachable!("segments() never returns an empty path")
}

fn path_prefix(segs: &[Segment]) -> String {
    let mut s = String::new();
    for seg in segs {
        match seg {
            Segment::Key(k) if s.is_empty() => s.push_str(k),
            Segment::Key(k) => {
                s.push('.');
                s.push_str(k);
            }
            Segment::Index(i) => s.push_str(&format!("[{i}]")),
        }
    }
    s
}

/// Raw configuration plus overrides that wait for preset expansion.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: RunConfig,
    deferred: Vec<Override>,
}

/// Reads the config file (or starts from `{}`), applies overrides in order
/// and deserializes. Overrides below `preconditioner` are held back until
/// [`Loaded::preconditioner`] runs.
pub fn load(path: Option<&Path>, overrides: &[Override]) -> Result<Loaded> {
    let mut root = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("reading config {}", p.display()))?;
            serde_json::from_str(&text)
                .with_context(|| format!("parsing config {}", p.display()))?
        }
        None => Value::Object(Map::new()),
    };
    if !root.is_object() {
        bail!("config must be a JSON object");
    }
    let mut deferred = Vec::new();
    for o in overrides {
        if o.targets_preconditioner_subtree() {
            deferred.push(o.clone());
        } else {
            set_path(&mut root, &o.path, o.value.clone())?;
        }
    }
    let config: RunConfig = deserialize(root, "")?;
    match (&config.problem, &config.manifest) {
        (Some(_), Some(_)) => {
            bail!("config sets both 'problem' and 'manifest'; exactly one is allowed")
        }
        (None, None) => bail!("config needs exactly one of 'problem' or 'manifest'"),
        _ => {}
    }
    if let Some(p) = &config.problem {
        p.validate().context("config key 'problem'")?;
    }
    config.gmres.validate().context("config key 'gmres'")?;
    if config.repeat == 0 {
        bail!("config key 'repeat': must be >= 1");
    }
    Ok(Loaded { config, deferred })
}

/// Deserializes with the failing key path in the error message.
fn deserialize<T: serde::de::DeserializeOwned>(v: Value, prefix: &str) -> Result<T> {
    serde_path_to_error::deserialize(v).map_err(|e| {
        let inner = e.path().to_string();
        let key = match (prefix.is_empty(), inner.as_str()) {
            (true, _) => inner.clone(),
            (false, ".") => prefix.to_string(),
            (false, p) if p.starts_with('[') => format!("{prefix}{p}"),
            (false, p) => format!("{prefix}.{p}"),
        };
        anyhow!("config key '{key}': {}", e.into_inner())
    })
}

impl Loaded {
    /// Generates or reads the block system. A manifest without right-hand
    /// side files gets `b = A·1`.
    pub fn system(&self) -> Result<(BlockMatrix, Vec<f64>)> {
        if let Some(spec) = &self.config.problem {
            let (a, b) = generate(spec)?;
            return Ok((a, b.scatter()));
        }
        let path = self.config.manifest.as_ref().expect("checked in load");
        let (a, b) =
            read_system(path).with_context(|| format!("reading manifest {}", path.display()))?;
        let b = match b {
            Some(b) => b.scatter(),
            None => {
                let ones = vec![1.0; a.row_layout().total()];
                let mut b = vec![0.0; ones.len()];
                a.apply_flat(&ones, &mut b);
                b
            }
        };
        Ok((a, b))
    }

    /// Resolves the preconditioner tree for `a`: a string names a preset,
    /// anything else is parsed as a spec, after the deferred overrides.
    pub fn preconditioner(&self, a: &BlockMatrix) -> Result<PrecondSpec> {
        let raw = self.config.preconditioner.clone().ok_or_else(|| {
            anyhow!("config key 'preconditioner': missing (use --prec or a config file)")
        })?;
        let mut root = Value::Object(Map::new());
        let tree = match raw {
            Value::String(name) => serde_json::to_value(
                PrecondSpec::preset(&name, a).context("config key 'preconditioner'")?,
            )?,
            other => other,
        };
        root["preconditioner"] = tree;
        for o in &self.deferred {
            set_path(&mut root, &o.path, o.value.clone())?;
        }
        parse_spec(root["preconditioner"].take(), "preconditioner")
    }
}

/// Parses a preconditioner tree. Tagged enums hide the failing key from
/// serde, so on error the tree is walked to the innermost failing node and
/// that node's fields are deserialized on their own.
pub fn parse_spec(v: Value, path: &str) -> Result<PrecondSpec> {
    match serde_json::from_value(v.clone()) {
        Ok(spec) => Ok(spec),
        Err(e) => Err(locate(&v, path).unwrap_or_else(|| anyhow!("config key '{path}': {e}"))),
    }
}

fn locate(v: &Value, path: &str) -> Option<anyhow::Error> {
    let obj = v.as_object()?;
    let is_node = |c: &Value| c.get("type").is_some_and(Value::is_string);
    for (key, child) in obj {
        let candidates: Vec<(String, &Value)> = match child {
            Value::Array(items) => items
                .iter()
                .enumerate()
                .map(|(i, c)| (format!("{path}.{key}[{i}]"), c))
                .collect(),
            c => vec![(format!("{path}.{key}"), c)],
        };
        for (child_path, c) in candidates {
            if is_node(c)
                && key != "level_smoother"
                && serde_json::from_value::<PrecondSpec>(c.clone()).is_err()
            {
                return locate(c, &child_path);
            }
        }
    }
    let kind = obj.get("type")?.as_str()?;
    let mut fields = obj.clone();
    fields.remove("type");
    let fields = Value::Object(fields);
    let check = |r: Result<()>| r.err();
    match kind {
        "bgs" => check(deserialize::<blockprec::precond::BgsSpec>(fields, path).map(drop)),
        "simple" => check(deserialize::<blockprec::precond::SimpleSpec>(fields, path).map(drop)),
        "amg" => check(deserialize::<blockprec::amg::AmgConfig>(fields, path).map(drop)),
        "monolithic_amg" => {
            check(deserialize::<blockprec::precond::MonolithicAmgSpec>(fields, path).map(drop))
        }
        "smoother" => check(deserialize::<blockprec::smoother::SmootherConfig>(fields, path).map(drop)),
        "direct" => fields
            .as_object()
            .and_then(|f| f.keys().next())
            .map(|k| anyhow!("config key '{path}.{k}': unknown field for type 'direct'")),
        other => Some(anyhow!(
            "config key '{path}.type': unknown preconditioner type '{other}' (expected bgs, simple, amg, monolithic_amg, smoother or direct)"
        )),
    }
}

/// Sample of `start:stop:count`, endpoints included.
pub fn linspace(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let [a, b, k] = parts[..] else {
        bail!("sweep range '{spec}' is not start:stop:count");
    };
    let a: f64 = a
        .trim()
        .parse()
        .with_context(|| format!("sweep start '{a}'"))?;
    let b: f64 = b
        .trim()
        .parse()
        .with_context(|| format!("sweep stop '{b}'"))?;
    let k: usize = k
        .trim()
        .parse()
        .with_context(|| format!("sweep count '{k}'"))?;
    Ok(match k {
        0 => bail!("sweep count must be >= 1"),
        1 => vec![a],
        _ => (0..k)
            .map(|i| a + (b - a) * i as f64 / (k - 1) as f64)
            .collect(),
    })
}

/// Expands the sweep shorthands `coupling`, `n` and `seed` to their
/// `problem.` paths.
pub fn sweep_path(name: &str) -> String {
    match name {
        "coupling" | "n" | "seed" | "kind" => format!("problem.{name}"),
        other => other.to_string(),
    }
}

/// JSON number for a sweep value, integral when it has no fraction.
pub fn sweep_value(v: f64) -> Value {
    if v.fract() == 0.0 && v.abs() < 9.0e15 {
        Value::from(v as i64)
    } else {
        Value::from(v)
    }
}
