//! Run configuration: a flat document of namespaced keys loaded from a
//! JSON file and overridden by command-line flags. Unknown keys are
//! rejected, and every run writes its fully resolved configuration next to
//! its outputs so it can be replayed exactly.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde_json::Value;

/// CLI failure with the exit code it maps to.
#[derive(Debug)]
pub enum CliError {
    /// Bad invocation or configuration: exit code 1.
    Usage(String),
    /// Missing or unusable data and I/O failures: exit code 2.
    Data(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Data(m) => write!(f, "{m}"),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

impl From<wdaep::Error> for CliError {
    fn from(e: wdaep::Error) -> Self {
        use wdaep::Error::*;
        match e {
            Config(_) | UnsupportedWavelet(_) | UnsupportedDimension(_) => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Data(e.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KeyKind {
    Str,
    F64,
    U64,
    Usize,
}

pub struct KeyDef {
    pub name: &'static str,
    pub kind: KeyKind,
}

macro_rules! keys {
    ($(($name:literal, $kind:ident)),* $(,)?) => {
        &[$(KeyDef { name: $name, kind: KeyKind::$kind }),*]
    };
}

/// Every key any command understands, namespaced per module.
pub const REGISTRY: &[KeyDef] = keys![
    ("wavelet.name", Str),
    ("mask.pattern", Str),
    ("mask.dims", Str),
    ("mask.target_r", F64),
    ("mask.center_fraction", F64),
    ("mask.decay_power", F64),
    ("mask.seed", U64),
    ("maskgen.out", Str),
    ("phantom.dims", Str),
    ("phantom.ellipses", Usize),
    ("phantom.seed", U64),
    ("phantom.out", Str),
    ("phantom.pgm", Str),
    ("phantom.mask", Str),
    ("phantom.kspace_out", Str),
    ("phantom.noise_std", F64),
    ("phantom.noise_seed", U64),
    ("prior.width", Usize),
    ("prior.blocks", Usize),
    ("prior.convs_per_block", Usize),
    ("prior.head_layers", Usize),
    ("prior.sigma_eta", F64),
    ("train.patch_size", Usize),
    ("train.batch_size", Usize),
    ("train.epochs", Usize),
    ("train.learning_rate", F64),
    ("train.seed", U64),
    ("train.images", Usize),
    ("train.image_dims", Str),
    ("train.image_seed", U64),
    ("train.ellipses", Usize),
    ("train.stride", Usize),
    ("train.max_patches", Usize),
    ("train.data", Str),
    ("train.out", Str),
    ("recon.lambda", F64),
    ("recon.beta", F64),
    ("recon.iterations", Usize),
    ("recon.sigma_eta", F64),
    ("recon.noise_mode", Str),
    ("recon.seed", U64),
    ("recon.stop_tol", F64),
    ("reconstruct.kspace", Str),
    ("reconstruct.mask", Str),
    ("reconstruct.ckpt", Str),
    ("reconstruct.out", Str),
    ("reconstruct.ref", Str),
    ("reconstruct.trace", Str),
    ("reconstruct.pgm", Str),
    ("metrics.img", Str),
    ("metrics.ref", Str),
    ("metrics.out", Str),
    ("sweep.axis", Str),
    ("sweep.values", Str),
    ("sweep.phantom", Str),
    ("sweep.mask", Str),
    ("sweep.ckpt", Str),
    ("sweep.ckpts", Str),
    ("sweep.out", Str),
    ("inspect.ckpt", Str),
    ("inspect.layer", Usize),
    ("inspect.out", Str),
];

fn lookup(name: &str) -> CliResult<&'static KeyDef> {
    REGISTRY
        .iter()
        .find(|k| k.name == name)
        .ok_or_else(|| CliError::Usage(format!("unknown configuration key '{name}'")))
}

fn kind_matches(kind: KeyKind, value: &Value) -> bool {
    match kind {
        KeyKind::Str => value.is_string(),
        KeyKind::F64 => value.is_number(),
        KeyKind::U64 | KeyKind::Usize => value.is_u64(),
    }
}

/// The resolved configuration of one run.
#[derive(Debug, Clone, Default)]
pub struct RunConfig {
    values: BTreeMap<String, Value>,
}

impl RunConfig {
    pub fn new() -> RunConfig {
        RunConfig::default()
    }

    /// Load a JSON configuration document, rejecting unknown keys.
    pub fn load(path: &Path) -> CliResult<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let doc: Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let obj = doc
            .as_object()
            .ok_or_else(|| CliError::Usage(format!("{}: expected a JSON object", path.display())))?;
        let mut cfg = RunConfig::new();
        for (key, value) in obj {
            let def = lookup(key)?;
            if !kind_matches(def.kind, value) {
                return Err(CliError::Usage(format!(
                    "key '{key}' has the wrong type in {}",
                    path.display()
                )));
            }
            cfg.values.insert(key.clone(), value.clone());
        }
        Ok(cfg)
    }

    /// Set a key from its command-line string form.
    pub fn set_from_str(&mut self, key: &str, raw: &str) -> CliResult<()> {
        let def = lookup(key)?;
        let value = match def.kind {
            KeyKind::Str => Value::String(raw.to_string()),
            KeyKind::F64 => {
                let v: f64 = raw
                    .parse()
                    .map_err(|_| CliError::Usage(format!("key '{key}': '{raw}' is not a number")))?;
                serde_json::Number::from_f64(v)
                    .map(Value::Number)
                    .ok_or_else(|| {
                        CliError::Usage(format!("key '{key}': '{raw}' is not finite"))
                    })?
            }
            KeyKind::U64 | KeyKind::Usize => {
                let v: u64 = raw.parse().map_err(|_| {
                    CliError::Usage(format!("key '{key}': '{raw}' is not a nonnegative integer"))
                })?;
                Value::Number(v.into())
            }
        };
        self.values.insert(key.to_string(), value);
        Ok(())
    }

    pub fn set_f64(&mut self, key: &str, v: f64) {
        self.values.insert(
            key.to_string(),
            Value::Number(serde_json::Number::from_f64(v).expect("finite")),
        );
    }

    pub fn set_str_value(&mut self, key: &str, v: &str) {
        self.values
            .insert(key.to_string(), Value::String(v.to_string()));
    }

    pub fn set_usize(&mut self, key: &str, v: usize) {
        self.values
            .insert(key.to_string(), Value::Number((v as u64).into()));
    }

    pub fn contains(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    /// Insert a default when the key is absent.
    pub fn default_str(&mut self, key: &str, v: &str) {
        if !self.contains(key) {
            self.set_str_value(key, v);
        }
    }

    pub fn default_f64(&mut self, key: &str, v: f64) {
        if !self.contains(key) {
            self.set_f64(key, v);
        }
    }

    pub fn default_usize(&mut self, key: &str, v: usize) {
        if !self.contains(key) {
            self.set_usize(key, v);
        }
    }

    pub fn default_u64(&mut self, key: &str, v: u64) {
        if !self.contains(key) {
            self.values.insert(key.to_string(), Value::Number(v.into()));
        }
    }

    pub fn str(&self, key: &str) -> Option<&str> {
        self.values.get(key).and_then(|v| v.as_str())
    }

    pub fn f64(&self, key: &str) -> Option<f64> {
        self.values.get(key).and_then(|v| v.as_f64())
    }

    pub fn u64(&self, key: &str) -> Option<u64> {
        self.values.get(key).and_then(|v| v.as_u64())
    }

    pub fn usize(&self, key: &str) -> Option<usize> {
        self.u64(key).map(|v| v as usize)
    }

    pub fn require_str(&self, key: &str) -> CliResult<&str> {
        self.str(key)
            .ok_or_else(|| CliError::Usage(format!("missing required key '{key}'")))
    }

    pub fn require_f64(&self, key: &str) -> CliResult<f64> {
        self.f64(key)
            .ok_or_else(|| CliError::Usage(format!("missing required key '{key}'")))
    }

    pub fn require_usize(&self, key: &str) -> CliResult<usize> {
        self.usize(key)
            .ok_or_else(|| CliError::Usage(format!("missing required key '{key}'")))
    }

    /// Pretty JSON with sorted keys; reloading it reproduces the run.
    pub fn to_json(&self) -> String {
        let map: serde_json::Map<String, Value> = self
            .values
            .iter()
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        serde_json::to_string_pretty(&Value::Object(map)).expect("serializable")
    }

    /// Write the resolved configuration next to an output.
    pub fn write_sidecar(&self, path: &Path) -> CliResult<()> {
        let mut bytes = self.to_json().into_bytes();
        bytes.push(b'\n');
        wdaep::data::container::atomic_write(path, &bytes).map_err(CliError::from)
    }
}

/// Parse a `HxW` dimension string.
pub fn parse_dims(raw: &str) -> CliResult<(usize, usize)> {
    let parts: Vec<&str> = raw.split('x').collect();
    if parts.len() != 2 {
        return Err(CliError::Usage(format!(
            "dims '{raw}' must look like 64x64"
        )));
    }
    let h = parts[0]
        .parse()
        .map_err(|_| CliError::Usage(format!("bad height in dims '{raw}'")))?;
    let w = parts[1]
        .parse()
        .map_err(|_| CliError::Usage(format!("bad width in dims '{raw}'")))?;
    if h == 0 || w == 0 {
        return Err(CliError::Usage(format!("dims '{raw}' must be positive")));
    }
    Ok((h, w))
}
