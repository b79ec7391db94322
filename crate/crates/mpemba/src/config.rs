//! Flat `key=value` run configuration.
//!
//! Values come from built-in defaults, then the `--config` file, then each
//! `--set key=value`, then the dedicated `--seed` / `--out` flags. Lists are
//! comma separated. `#` starts a comment.

use crate::error::{FieldError, HarnessError, Result};
use mpemba_core::asymmetry_exact::SiteRange;
use mpemba_core::qudit_sim::{Boundary, ChainSpec, ProductKind, ProductStateSpec, DEFAULT_MEMORY_CAP_LOG2};
use mpemba_core::replica_tn::TruncationPolicy;
use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::path::{Path, PathBuf};
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    Exact,
    Tn,
    Ssep,
    Mft,
    Opspread,
}

impl Engine {
    pub fn as_str(self) -> &'static str {
        match self {
            Engine::Exact => "exact",
            Engine::Tn => "tn",
            Engine::Ssep => "ssep",
            Engine::Mft => "mft",
            Engine::Opspread => "opspread",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "exact" => Engine::Exact,
            "tn" => Engine::Tn,
            "ssep" => Engine::Ssep,
            "mft" => Engine::Mft,
            "opspread" => Engine::Opspread,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Modes {
    Quenched,
    Annealed,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplusEstimator {
    Tn,
    Exact,
}

/// Every accepted key with its default.
pub const DEFAULTS: &[(&str, &str)] = &[
    ("a_start", "center"),
    ("alpha", "none"),
    ("boundary", "open"),
    ("cutoff", "1e-15"),
    ("diffusion", "none"),
    ("estimator", "tn"),
    ("max_bond", "none"),
    ("mode", "both"),
    ("n", "12"),
    ("n_a", "3"),
    ("order", "6"),
    ("out", "out"),
    ("profile_width", "0"),
    ("q", "1"),
    ("realizations", "1000"),
    ("renyi", "2"),
    ("seed", "0"),
    ("site", "center"),
    ("state", "ferro"),
    ("stride", "0"),
    ("t_max", "10"),
    ("theta", "0.5,1.0"),
    ("trajectories", "10000"),
    ("transient", "2"),
];

#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub file: Option<PathBuf>,
    pub sets: Vec<String>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub engine: Engine,
    pub n: usize,
    pub q: usize,
    pub boundary: Boundary,
    pub state: ProductKind,
    pub thetas: Vec<f64>,
    pub n_a: Vec<usize>,
    pub a_start: Option<usize>,
    pub t_max: usize,
    pub renyi: f64,
    pub seed: u64,
    pub realizations: usize,
    pub mode: Modes,
    pub cutoff: f64,
    pub max_bond: Option<usize>,
    pub site: Option<usize>,
    pub estimator: SplusEstimator,
    pub transient: usize,
    pub trajectories: usize,
    pub stride: usize,
    pub profile_width: usize,
    pub order: u32,
    pub alpha: Option<f64>,
    pub diffusion: Option<f64>,
    pub out: PathBuf,
    raw: BTreeMap<String, String>,
}

/// Reads `key=value` lines.
pub fn parse_flat(text: &str, origin: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        out.push(split_pair(line).ok_or_else(|| HarnessError::field(format!("{origin}:{}", k + 1), format!("expected key=value, got `{line}`")))?);
    }
    Ok(out)
}

fn split_pair(s: &str) -> Option<(String, String)> {
    let (k, v) = s.split_once('=')?;
    let k = k.trim();
    if k.is_empty() {
        return None;
    }
    Some((k.to_string(), v.trim().to_string()))
}

struct Collector<'a> {
    raw: &'a BTreeMap<String, String>,
    errors: Vec<FieldError>,
}

impl Collector<'_> {
    fn fail(&mut self, field: &str, reason: impl Into<String>) {
        self.errors.push(FieldError { field: field.to_string(), reason: reason.into() });
    }

    fn get<T: FromStr>(&mut self, key: &str) -> Option<T> {
        let v = &self.raw[key];
        match v.parse() {
            Ok(x) => Some(x),
            Err(_) => {
                self.fail(key, format!("cannot parse `{v}`"));
                None
            }
        }
    }

    fn optional<T: FromStr>(&mut self, key: &str, none: &str) -> Option<Option<T>> {
        if self.raw[key] == none {
            return Some(None);
        }
        self.get(key).map(Some)
    }

    fn list<T: FromStr>(&mut self, key: &str) -> Option<Vec<T>> {
        let v = self.raw[key].clone();
        let items: Vec<&str> = v.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
        if items.is_empty() {
            self.fail(key, "empty list");
            return None;
        }
        let mut out = Vec::with_capacity(items.len());
        for it in items {
            match it.parse() {
                Ok(x) => out.push(x),
                Err(_) => {
                    self.fail(key, format!("cannot parse list item `{it}`"));
                    return None;
                }
            }
        }
        Some(out)
    }
}

impl ExperimentConfig {
    pub fn load(engine: Engine, ov: &Overrides) -> Result<Self> {
        let mut pairs = Vec::new();
        if let Some(path) = &ov.file {
            let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Usage(format!("cannot read config {}: {e}", path.display())))?;
            pairs.extend(parse_flat(&text, &path.display().to_string())?);
        }
        for s in &ov.sets {
            pairs.push(split_pair(s).ok_or_else(|| HarnessError::field("--set", format!("expected key=value, got `{s}`")))?);
        }
        if let Some(seed) = ov.seed {
            pairs.push(("seed".into(), seed.to_string()));
        }
        if let Some(out) = &ov.out {
            pairs.push(("out".into(), out.display().to_string()));
        }
        Self::from_pairs(engine, &pairs)
    }

    pub fn from_pairs(engine: Engine, pairs: &[(String, String)]) -> Result<Self> {
        let mut raw: BTreeMap<String, String> = DEFAULTS.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        let mut errors = Vec::new();
        for (k, v) in pairs {
            if k == "engine" {
                if Engine::parse(v) != Some(engine) {
                    errors.push(FieldError { field: "engine".into(), reason: format!("config is for `{v}` but the subcommand is `{}`", engine.as_str()) });
                }
                continue;
            }
            if !raw.contains_key(k) {
                errors.push(FieldError { field: k.clone(), reason: "unknown key".into() });
                continue;
            }
            raw.insert(k.clone(), v.clone());
        }
        let mut c = Collector { raw: &raw, errors };
        let boundary = match raw["boundary"].as_str() {
            "open" => Some(Boundary::Open),
            "periodic" => Some(Boundary::Periodic),
            other => {
                c.fail("boundary", format!("expected open or periodic, got `{other}`"));
                None
            }
        };
        let state = ProductKind::parse(&raw["state"]);
        if state.is_none() {
            c.fail("state", format!("expected ferro or antiferro, got `{}`", raw["state"]));
        }
        let mode = match raw["mode"].as_str() {
            "quenched" => Some(Modes::Quenched),
            "annealed" => Some(Modes::Annealed),
            "both" => Some(Modes::Both),
            other => {
                c.fail("mode", format!("expected quenched, annealed or both, got `{other}`"));
                None
            }
        };
        let estimator = match raw["estimator"].as_str() {
            "tn" => Some(SplusEstimator::Tn),
            "exact" => Some(SplusEstimator::Exact),
            other => {
                c.fail("estimator", format!("expected tn or exact, got `{other}`"));
                None
            }
        };
        let n = c.get("n");
        let q = c.get("q");
        let thetas = c.list("theta");
        let n_a = c.list("n_a");
        let a_start = c.optional("a_start", "center");
        let t_max = c.get("t_max");
        let renyi = c.get("renyi");
        let seed = c.get("seed");
        let realizations = c.get("realizations");
        let cutoff = c.get("cutoff");
        let max_bond = c.optional("max_bond", "none");
        let site = c.optional("site", "center");
        let transient = c.get("transient");
        let trajectories = c.get("trajectories");
        let stride = c.get("stride");
        let profile_width = c.get("profile_width");
        let order = c.get("order");
        let alpha = c.optional("alpha", "none");
        let diffusion = c.optional("diffusion", "none");
        let mut errors = c.errors;
        let built = (|| {
            Some(ExperimentConfig {
                engine,
                n: n?,
                q: q?,
                boundary: boundary?,
                state: state?,
                thetas: thetas?,
                n_a: n_a?,
                a_start: a_start?,
                t_max: t_max?,
                renyi: renyi?,
                seed: seed?,
                realizations: realizations?,
                mode: mode?,
                cutoff: cutoff?,
                max_bond: max_bond?,
                site: site?,
                estimator: estimator?,
                transient: transient?,
                trajectories: trajectories?,
                stride: stride?,
                profile_width: profile_width?,
                order: order?,
                alpha: alpha?,
                diffusion: diffusion?,
                out: PathBuf::from(&raw["out"]),
                raw: raw.clone(),
            })
        })();
        match built {
            Some(cfg) => {
                errors.extend(cfg.consistency_errors());
                if errors.is_empty() {
                    Ok(cfg)
                } else {
                    Err(HarnessError::Validation(errors))
                }
            }
            None => Err(HarnessError::Validation(errors)),
        }
    }

    fn uses_exact_state(&self) -> bool {
        self.engine == Engine::Exact || (self.engine == Engine::Opspread && self.estimator == SplusEstimator::Exact)
    }

    fn uses_tn(&self) -> bool {
        self.engine == Engine::Tn || (self.engine == Engine::Opspread && self.estimator == SplusEstimator::Tn)
    }

    fn consistency_errors(&self) -> Vec<FieldError> {
        let mut e = Vec::new();
        let mut fail = |f: &str, r: String| e.push(FieldError { field: f.into(), reason: r });
        let lattice = !matches!(self.engine, Engine::Mft);
        if self.q == 0 {
            fail("q", "must be at least 1".into());
        }
        if lattice && self.n < 2 {
            fail("n", format!("need at least 2 sites, got {}", self.n));
        }
        for &th in &self.thetas {
            if !(0.0..=PI).contains(&th) {
                fail("theta", format!("{th} outside [0, pi]"));
            }
            if matches!(self.engine, Engine::Ssep) && th >= FRAC_PI_2 {
                fail("theta", format!("{th}: the purity rate needs cos(theta) > 0"));
            }
        }
        if matches!(self.engine, Engine::Exact | Engine::Tn | Engine::Mft) {
            for &na in &self.n_a {
                if na == 0 {
                    fail("n_a", "subsystem must be non-empty".into());
                } else if self.engine != Engine::Mft {
                    let start = self.a_start.unwrap_or((self.n.saturating_sub(na)) / 2);
                    if start + na > self.n {
                        fail("n_a", format!("sites {start}..{} do not fit in n={}", start + na, self.n));
                    }
                }
            }
        }
        if self.state == ProductKind::TiltedAntiferro && self.n % 2 == 1 && matches!(self.engine, Engine::Exact | Engine::Tn | Engine::Opspread) {
            fail("state", format!("antiferro needs an even number of sites, got n={}", self.n));
        }
        if self.uses_exact_state() {
            let need = self.n as f64 * ((2 * self.q.max(1)) as f64).log2();
            if need > DEFAULT_MEMORY_CAP_LOG2 {
                fail("n", format!("exact state needs 2^{need:.1} amplitudes, cap is 2^{DEFAULT_MEMORY_CAP_LOG2}"));
            }
            if self.realizations < 2 {
                fail("realizations", format!("need at least 2, got {}", self.realizations));
            }
        }
        if self.engine == Engine::Exact && !(self.renyi > 0.0 && self.renyi.is_finite()) {
            fail("renyi", format!("must be positive and finite, got {}", self.renyi));
        }
        if self.uses_tn() {
            if self.renyi != 2.0 {
                fail("renyi", format!("the replica network computes n=2 only, got {}", self.renyi));
            }
            if self.boundary != Boundary::Open {
                fail("boundary", "the replica network supports open chains only".into());
            }
            if !(self.cutoff >= 0.0 && self.cutoff < 1.0) {
                fail("cutoff", format!("must lie in [0, 1), got {}", self.cutoff));
            }
            if self.max_bond == Some(0) {
                fail("max_bond", "must be positive".into());
            }
        }
        if self.engine == Engine::Opspread {
            if let Some(s) = self.site {
                if s >= self.n {
                    fail("site", format!("{s} outside a chain of {}", self.n));
                }
            }
        }
        if self.engine == Engine::Ssep {
            if self.n < 4 {
                fail("n", format!("need at least 4 sites, got {}", self.n));
            }
            if self.t_max == 0 {
                fail("t_max", "must be positive".into());
            }
            if self.trajectories < 2 {
                fail("trajectories", format!("need at least 2, got {}", self.trajectories));
            }
            if self.stride > self.t_max {
                fail("stride", format!("{} exceeds t_max={}", self.stride, self.t_max));
            }
            if 2 * self.profile_width > self.n {
                fail("profile_width", format!("{} exceeds n/2", self.profile_width));
            }
        }
        if self.engine == Engine::Mft {
            if !matches!(self.order, 2 | 4 | 6) {
                fail("order", format!("must be 2, 4 or 6, got {}", self.order));
            }
            match (self.alpha, self.diffusion) {
                (Some(a), Some(d)) if !(a > 0.0 && d > 0.0) => fail("alpha", "alpha and diffusion must be positive".into()),
                (Some(_), None) => fail("diffusion", "needed together with alpha".into()),
                (None, Some(_)) => fail("alpha", "needed together with diffusion".into()),
                _ => {}
            }
        }
        e
    }

    /// Every key with its resolved value, sorted.
    pub fn entries(&self) -> Vec<(String, String)> {
        self.raw.iter().map(|(k, v)| (k.clone(), v.clone())).collect()
    }

    pub fn chain(&self) -> Result<ChainSpec> {
        Ok(ChainSpec::new(self.n, self.q, self.boundary, self.t_max, self.seed)?)
    }

    pub fn product(&self, theta: f64) -> ProductStateSpec {
        ProductStateSpec { kind: self.state, theta }
    }

    pub fn subsystem(&self, n_a: usize) -> SiteRange {
        match self.a_start {
            Some(s) => SiteRange::new(s, n_a),
            None => SiteRange::centered(self.n, n_a),
        }
    }

    pub fn policy(&self) -> TruncationPolicy {
        TruncationPolicy { max_bond: self.max_bond, ..TruncationPolicy::with_cutoff(self.cutoff) }
    }

    pub fn splus_site(&self) -> usize {
        self.site.unwrap_or(self.n / 2)
    }

    pub fn out_dir(&self) -> &Path {
        &self.out
    }
}
