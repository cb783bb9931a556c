//! Line-oriented `key = value` configuration with `[section]` headers.
//!
//! ```text
//! # dimension sweep
//! [experiment]
//! activation = tanh
//! d = 3, 5, 7
//! k = 2
//! n = 500, 1000, 2000
//! trials = 20
//!
//! [train]
//! eta = 0.05
//! iters = 2000
//! ```
//!
//! `#` starts a comment. Unknown sections and keys are errors so that
//! a typo never silently falls back to a default.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use sgda_core::model::{ActivationKind, ActivationSpec};
use sgda_core::optimizer::{Init, Stage, TrainConfig};
use sgda_core::Mat;

use crate::error::{HarnessError, Result};

/// Raw `section -> key -> (value, line)` map.
#[derive(Debug, Clone, Default)]
pub struct IniDoc {
    path: PathBuf,
    sections: BTreeMap<String, BTreeMap<String, (String, usize)>>,
}

impl IniDoc {
    pub fn parse(text: &str, path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        let mut doc = IniDoc { path: path.clone(), sections: BTreeMap::new() };
        let mut current: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = strip_comment(raw).trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| HarnessError::Parse { path: path.clone(), line: line_no, message };
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| err("unterminated section header".into()))?.trim();
                if name.is_empty() {
                    return Err(err("empty section name".into()));
                }
                doc.sections.entry(name.to_string()).or_default();
                current = Some(name.to_string());
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| err(format!("expected `key = value`, got `{line}`")))?;
            let section = current.clone().ok_or_else(|| err("key outside of any section".into()))?;
            let key = key.trim();
            if key.is_empty() {
                return Err(err("empty key".into()));
            }
            let entries = doc.sections.entry(section).or_default();
            if entries.insert(key.to_string(), (value.trim().to_string(), line_no)).is_some() {
                return Err(err(format!("duplicate key `{key}`")));
            }
        }
        Ok(doc)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn section_names(&self) -> impl Iterator<Item = &str> {
        self.sections.keys().map(String::as_str)
    }

    fn section(&self, name: &str) -> Section<'_> {
        Section { doc: self, name: name.to_string(), entries: self.sections.get(name) }
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

struct Section<'a> {
    doc: &'a IniDoc,
    name: String,
    entries: Option<&'a BTreeMap<String, (String, usize)>>,
}

impl Section<'_> {
    fn raw(&self, key: &str) -> Option<&(String, usize)> {
        self.entries.and_then(|e| e.get(key))
    }

    fn err(&self, line: usize, message: String) -> HarnessError {
        HarnessError::Parse { path: self.doc.path.clone(), line, message }
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some((v, line)) => v
                .parse()
                .map(Some)
                .map_err(|_| self.err(*line, format!("[{}] {key}: cannot parse `{v}`", self.name))),
        }
    }

    fn list<T: std::str::FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        match self.raw(key) {
            None => Ok(None),
            Some((v, line)) => v
                .split(',')
                .map(|s| s.trim().parse().map_err(|_| self.err(*line, format!("[{}] {key}: bad entry `{}`", self.name, s.trim()))))
                .collect::<Result<Vec<T>>>()
                .map(Some),
        }
    }

    fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        for (key, (_, line)) in self.entries.into_iter().flatten() {
            if !allowed.contains(&key.as_str()) {
                return Err(self.err(*line, format!("unknown key `{key}` in [{}]", self.name)));
            }
        }
        Ok(())
    }
}

/// How the ground-truth generator is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum TruthMode {
    /// `A*` with rows uniform on the unit sphere of `R^{k0}`, seeded per cell.
    RandomUnitRows,
    /// A fixed `A*` (its row count is the only `d`).
    Explicit(Mat),
}

/// Whether trials in a cell share one observed sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataMode {
    /// Fresh ground truth and observations per trial.
    PerTrial,
    /// One ground truth and observation set per cell; trials differ only in
    /// initialization and batches.
    Shared,
}

/// Settings of the `kernel-check` diagnostic.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelCheckConfig {
    pub activations: Vec<ActivationSpec>,
    pub rhos: Vec<f64>,
    pub scales: Vec<(f64, f64)>,
    pub samples: usize,
    /// Accepted deviation in Monte Carlo standard errors.
    pub tolerance_se: f64,
}

impl Default for KernelCheckConfig {
    fn default() -> Self {
        KernelCheckConfig {
            activations: vec![
                ActivationSpec::tanh(),
                ActivationSpec::sigmoid(),
                ActivationSpec::leaky_relu(0.2).expect("valid leakage"),
            ],
            rhos: (0..9).map(|i| -1.0 + 0.25 * i as f64).collect(),
            scales: vec![(1.0, 1.0), (1.3, 0.7), (0.6, 1.5)],
            samples: 1_000_000,
            tolerance_se: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub activation: ActivationSpec,
    /// Output dimensions swept over.
    pub dims: Vec<usize>,
    /// Generator latent dimension.
    pub k: usize,
    /// Latent dimension of the ground truth.
    pub k0: usize,
    pub n_grid: Vec<usize>,
    pub trials: usize,
    /// Per-run training settings; `n` is overwritten per cell.
    pub train: TrainConfig,
    /// Use the whole observed sample as the generator batch (`m = n`).
    pub batch_matches_n: bool,
    pub truth: TruthMode,
    pub data: DataMode,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Hermite truncation degree used by certificates.
    pub degree: usize,
    pub kernel_check: KernelCheckConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            activation: ActivationSpec::tanh(),
            dims: vec![3],
            k: 2,
            k0: 2,
            n_grid: vec![1000],
            trials: 1,
            train: TrainConfig { k: Some(2), ..TrainConfig::default() },
            batch_matches_n: false,
            truth: TruthMode::RandomUnitRows,
            data: DataMode::PerTrial,
            seed: 0,
            out_dir: PathBuf::from("out"),
            degree: sgda_core::hermite::DEFAULT_DEGREE,
            kernel_check: KernelCheckConfig::default(),
        }
    }
}

const EXPERIMENT_KEYS: &[&str] = &[
    "activation", "leaky_alpha", "d", "k", "k0", "n", "trials", "truth", "truth_matrix", "data", "seed", "out", "degree",
];
const TRAIN_KEYS: &[&str] = &[
    "eta", "iters", "m", "stage", "project", "init", "init_scale", "noise_scale", "stop_tol", "record_every",
    "marginal_eta", "marginal_iters", "marginal_batch", "marginal_tol",
];
const KERNEL_KEYS: &[&str] = &["activations", "rho", "scales", "samples", "tolerance_se"];

pub fn parse_activation(name: &str, leaky_alpha: f64) -> std::result::Result<ActivationSpec, String> {
    let kind = match name {
        "identity" => ActivationKind::Identity,
        "tanh" => ActivationKind::Tanh,
        "sigmoid" => ActivationKind::Sigmoid,
        "relu" => ActivationKind::Relu,
        "leaky_relu" => ActivationKind::LeakyRelu(leaky_alpha),
        other => return Err(format!("unknown activation `{other}`")),
    };
    ActivationSpec::new(kind).map_err(|e| e.to_string())
}

/// Parses `"1, 1; 0.5, -2"` into a matrix, rows separated by `;`.
pub fn parse_matrix(text: &str) -> std::result::Result<Mat, String> {
    let rows: Vec<Vec<f64>> = text
        .split(';')
        .map(|r| r.split(',').map(|v| v.trim().parse::<f64>().map_err(|_| format!("bad matrix entry `{}`", v.trim()))).collect())
        .collect::<std::result::Result<_, _>>()?;
    let cols = rows.first().map_or(0, Vec::len);
    if cols == 0 || rows.iter().any(|r| r.len() != cols) {
        return Err("matrix rows must be nonempty and of equal length".into());
    }
    let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
    Mat::from_rows(&refs).map_err(|e| e.to_string())
}

impl ExperimentConfig {
    pub fn from_doc(doc: &IniDoc) -> Result<Self> {
        for name in doc.section_names() {
            if !["experiment", "train", "kernel_check"].contains(&name) {
                return Err(HarnessError::Config(format!("unknown section [{name}]")));
            }
        }
        let mut cfg = ExperimentConfig::default();
        let ex = doc.section("experiment");
        ex.check_keys(EXPERIMENT_KEYS)?;
        let alpha = ex.get::<f64>("leaky_alpha")?.unwrap_or(0.2);
        if let Some((name, line)) = ex.raw("activation") {
            cfg.activation = parse_activation(name, alpha).map_err(|m| ex.err(*line, m))?;
        }
        if let Some(d) = ex.list("d")? {
            cfg.dims = d;
        }
        if let Some(k) = ex.get("k")? {
            cfg.k = k;
        }
        cfg.k0 = ex.get("k0")?.unwrap_or(cfg.k);
        if let Some(n) = ex.list("n")? {
            cfg.n_grid = n;
        }
        if let Some(t) = ex.get("trials")? {
            cfg.trials = t;
        }
        if let Some(s) = ex.get("seed")? {
            cfg.seed = s;
        }
        if let Some(o) = ex.get::<String>("out")? {
            cfg.out_dir = PathBuf::from(o);
        }
        if let Some(deg) = ex.get("degree")? {
            cfg.degree = deg;
        }
        if let Some((mode, line)) = ex.raw("data") {
            cfg.data = match mode.as_str() {
                "per_trial" => DataMode::PerTrial,
                "shared" => DataMode::Shared,
                other => return Err(ex.err(*line, format!("unknown data mode `{other}`"))),
            };
        }
        match ex.raw("truth").map(|(v, l)| (v.as_str(), *l)) {
            None | Some(("random_unit_rows", _)) => {
                if ex.raw("truth_matrix").is_some() {
                    return Err(HarnessError::Config("truth_matrix given without truth = explicit".into()));
                }
            }
            Some(("explicit", line)) => {
                let (text, mline) = ex.raw("truth_matrix").ok_or_else(|| ex.err(line, "truth = explicit needs truth_matrix".into()))?;
                let m = parse_matrix(text).map_err(|msg| ex.err(*mline, msg))?;
                if ex.raw("d").is_some() && cfg.dims != [m.rows()] {
                    return Err(ex.err(*mline, "d disagrees with truth_matrix".into()));
                }
                cfg.dims = vec![m.rows()];
                if ex.raw("k0").is_none() {
                    cfg.k0 = m.cols();
                }
                cfg.truth = TruthMode::Explicit(m);
            }
            Some((other, line)) => return Err(ex.err(line, format!("unknown truth mode `{other}`"))),
        }

        let tr = doc.section("train");
        tr.check_keys(TRAIN_KEYS)?;
        let t = &mut cfg.train;
        t.k = Some(cfg.k);
        if let Some(v) = tr.get("eta")? {
            t.eta = v;
        }
        if let Some(v) = tr.get("iters")? {
            t.iters = v;
        }
        if let Some((m, line)) = tr.raw("m") {
            if m == "n" {
                cfg.batch_matches_n = true;
            } else {
                t.m = m.parse().map_err(|_| tr.err(*line, format!("[train] m: cannot parse `{m}`")))?;
            }
        }
        if let Some((s, line)) = tr.raw("stage") {
            t.stage = match s.as_str() {
                "marginal" => Stage::Marginal,
                "joint" => Stage::Joint,
                "both" => Stage::Both,
                other => return Err(tr.err(*line, format!("unknown stage `{other}`"))),
            };
        }
        if let Some(v) = tr.get("project")? {
            t.project = v;
        }
        let scale = tr.get::<f64>("init_scale")?;
        match tr.raw("init").map(|(v, l)| (v.as_str(), *l)) {
            None | Some(("sphere", _)) => {
                if scale.is_some() {
                    return Err(HarnessError::Config("init_scale needs init = gaussian".into()));
                }
            }
            Some(("gaussian", _)) => t.init = Init::Gaussian { scale: scale.unwrap_or(1.0) },
            Some((other, line)) => return Err(tr.err(line, format!("unknown init `{other}`"))),
        }
        if let Some(v) = tr.get("noise_scale")? {
            t.noise_scale = Some(v);
        }
        if let Some(v) = tr.get("stop_tol")? {
            t.stop_tol = v;
        }
        if let Some(v) = tr.get("record_every")? {
            t.record_every = v;
        }
        if let Some(v) = tr.get("marginal_eta")? {
            t.marginal_eta = Some(v);
        }
        if let Some(v) = tr.get("marginal_iters")? {
            t.marginal_iters = v;
        }
        if let Some(v) = tr.get("marginal_batch")? {
            t.marginal_batch = v;
        }
        if let Some(v) = tr.get("marginal_tol")? {
            t.marginal_tol = v;
        }

        let kc = doc.section("kernel_check");
        kc.check_keys(KERNEL_KEYS)?;
        let k = &mut cfg.kernel_check;
        if let Some((names, line)) = kc.raw("activations") {
            k.activations = names
                .split(',')
                .map(|n| parse_activation(n.trim(), alpha))
                .collect::<std::result::Result<_, _>>()
                .map_err(|m| kc.err(*line, m))?;
        }
        if let Some(r) = kc.list("rho")? {
            k.rhos = r;
        }
        if let Some((pairs, line)) = kc.raw("scales") {
            k.scales = pairs
                .split(',')
                .map(|p| {
                    let (a, b) = p.trim().split_once(':').ok_or("scale pairs are written `alpha:beta`")?;
                    Ok((a.trim().parse().map_err(|_| "bad scale")?, b.trim().parse().map_err(|_| "bad scale")?))
                })
                .collect::<std::result::Result<_, &str>>()
                .map_err(|m| kc.err(*line, m.to_string()))?;
        }
        if let Some(s) = kc.get("samples")? {
            k.samples = s;
        }
        if let Some(s) = kc.get("tolerance_se")? {
            k.tolerance_se = s;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_doc(&IniDoc::load(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(HarnessError::Config(m.to_string()));
        if self.trials == 0 {
            return bad("trials must be at least 1");
        }
        if self.n_grid.is_empty() || self.n_grid.windows(2).any(|w| w[0] >= w[1]) || self.n_grid[0] == 0 {
            return bad("n grid must be nonempty, positive and strictly increasing");
        }
        if self.dims.is_empty() || self.dims.contains(&0) {
            return bad("d must list positive dimensions");
        }
        if self.k == 0 || self.k0 == 0 {
            return bad("k and k0 must be at least 1");
        }
        if let TruthMode::Explicit(m) = &self.truth {
            if m.cols() != self.k0 {
                return bad("truth_matrix column count must equal k0");
            }
        }
        let k = &self.kernel_check;
        if k.samples < 2 || k.rhos.iter().any(|r| !(-1.0..=1.0).contains(r)) || k.scales.iter().any(|&(a, b)| !(a > 0.0 && b > 0.0)) {
            return bad("kernel_check needs samples >= 2, rho in [-1, 1] and positive scales");
        }
        self.train.validate()?;
        Ok(())
    }

    /// Training settings for one cell.
    pub fn train_for(&self, n: usize) -> TrainConfig {
        let mut t = self.train.clone();
        t.n = n;
        t.k = Some(self.k);
        if self.batch_matches_n {
            t.m = n;
        }
        t
    }
}
