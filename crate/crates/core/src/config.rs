//! Text configuration for studies, problems and observations.
//!
//! The format is a flat list of `key = value` pairs grouped under
//! `[problem]`, `[sampler]` and `[study]` headers. `#` starts a comment.
//! Matrices are written as a bracketed block of whitespace-separated rows:
//!
//! ```text
//! [problem]
//! K = [
//!   1 0
//!   0 1
//! ]
//! sigma = identity
//! constraints = orthant
//! h = 1 -1
//! ```
//!
//! Any matrix or vector value may instead be `@path`, read relative to the
//! config file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::experiments::{scenario_by_name, Scenario};
use crate::geometry::Polytope;
use crate::intervals::{CalibrationConfig, Method, QuantileMethod, SamplerKind};
use crate::model::LinearGaussianProblem;
use crate::quantiles::{default_grid, GbtParams};

/// Upper bound on matrix entries accepted from text, to keep parsers cheap.
pub const MAX_ENTRIES: usize = 1 << 20;

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

fn parse_number(tok: &str) -> Result<f64> {
    let v: f64 = tok
        .parse()
        .map_err(|_| Error::Config(format!("'{tok}' is not a number")))?;
    if !v.is_finite() {
        return Err(Error::Config(format!("'{tok}' is not finite")));
    }
    Ok(v)
}

fn tokens(line: &str) -> impl Iterator<Item = &str> {
    line.split(|c: char| c.is_whitespace() || c == ',').filter(|t| !t.is_empty())
}

/// Parses a dense matrix: one row per line (or per `;`), entries separated
/// by whitespace or commas. Surrounding brackets are ignored.
pub fn parse_matrix(text: &str) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut count = 0usize;
    for line in text.lines() {
        let line = strip_comment(line);
        for chunk in line.split(';') {
            let chunk = chunk.trim().trim_start_matches('[').trim_end_matches(']');
            let row = tokens(chunk).map(parse_number).collect::<Result<Vec<f64>>>()?;
            if row.is_empty() {
                continue;
            }
            count += row.len();
            if count > MAX_ENTRIES {
                return Err(Error::Config(format!("matrix exceeds {MAX_ENTRIES} entries")));
            }
            if let Some(first) = rows.first() {
                if first.len() != row.len() {
                    return Err(Error::Config(format!(
                        "matrix row {} has {} entries, expected {}",
                        rows.len() + 1,
                        row.len(),
                        first.len()
                    )));
                }
            }
            rows.push(row);
        }
    }
    if rows.is_empty() {
        return Err(Error::Config("empty matrix".into()));
    }
    let (r, c) = (rows.len(), rows[0].len());
    Ok(DMatrix::from_row_iterator(r, c, rows.into_iter().flatten()))
}

/// Parses a vector written on one or more lines.
pub fn parse_vector(text: &str) -> Result<DVector<f64>> {
    let mut out = Vec::new();
    for line in text.lines() {
        let line = strip_comment(line).replace(['[', ']', ';'], " ");
        for t in tokens(&line) {
            out.push(parse_number(t)?);
            if out.len() > MAX_ENTRIES {
                return Err(Error::Config(format!("vector exceeds {MAX_ENTRIES} entries")));
            }
        }
    }
    if out.is_empty() {
        return Err(Error::Config("empty vector".into()));
    }
    Ok(DVector::from_vec(out))
}

/// Parses an observation `y`, optionally prefixed by `y =`.
pub fn parse_observation(text: &str) -> Result<DVector<f64>> {
    let trimmed = text.trim_start();
    let body = match trimmed.strip_prefix('y') {
        Some(rest) if rest.trim_start().starts_with('=') => rest.trim_start()[1..].to_string(),
        _ => text.to_string(),
    };
    parse_vector(&body)
}

/// Raw `key = value` pairs per section, with block values joined.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    pub sections: BTreeMap<String, BTreeMap<String, String>>,
}

const SECTIONS: [&str; 3] = ["problem", "sampler", "study"];

/// Splits config text into sections and entries without interpreting values.
pub fn parse_raw(text: &str) -> Result<RawConfig> {
    let mut raw = RawConfig::default();
    let mut section: Option<String> = None;
    let mut lines = text.lines().enumerate();
    while let Some((no, line)) = lines.next() {
        let line = strip_comment(line).trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('[') && line.ends_with(']') && !line.contains('=') {
            let name = line[1..line.len() - 1].trim().to_ascii_lowercase();
            if !SECTIONS.contains(&name.as_str()) {
                return Err(Error::Config(format!("line {}: unknown section [{name}]", no + 1)));
            }
            section = Some(name);
            continue;
        }
        let Some(sec) = section.clone() else {
            return Err(Error::Config(format!("line {}: entry before any section header", no + 1)));
        };
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Config(format!("line {}: expected 'key = value'", no + 1)));
        };
        let key = key.trim().to_ascii_lowercase();
        if key.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", no + 1)));
        }
        let mut value = value.trim().to_string();
        if value.starts_with('[') && !value.contains(']') {
            let start = no + 1;
            loop {
                let Some((_, next)) = lines.next() else {
                    return Err(Error::Config(format!("line {start}: unterminated block for '{key}'")));
                };
                let next = strip_comment(next);
                value.push('\n');
                value.push_str(next);
                if next.contains(']') {
                    break;
                }
            }
        }
        let entries = raw.sections.entry(sec).or_default();
        if entries.insert(key.clone(), value).is_some() {
            return Err(Error::Config(format!("line {}: duplicate key '{key}'", no + 1)));
        }
    }
    Ok(raw)
}

#[derive(Debug, Clone, PartialEq)]
pub enum NoiseSpec {
    Identity,
    Matrix(DMatrix<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConstraintSpec {
    Orthant,
    Unconstrained,
    HalfSpaces { a: DMatrix<f64>, b: DVector<f64> },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProblemSpec {
    pub k: Option<DMatrix<f64>>,
    pub sigma: Option<NoiseSpec>,
    pub constraints: Option<ConstraintSpec>,
    pub h: Option<DVector<f64>>,
    pub x_true: Option<DVector<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SamplerSpec {
    pub kind: Option<SamplerKind>,
    pub m: Option<usize>,
    pub quantile: Option<String>,
    pub n: Option<usize>,
    pub m_train: Option<usize>,
    pub cv_folds: Option<usize>,
    pub grid: Option<Vec<GbtParams>>,
    pub chains: Option<usize>,
    pub radius: Option<f64>,
    pub n_random: Option<usize>,
    pub gamma_p: Option<f64>,
    pub q_norm: Option<f64>,
    pub window: Option<usize>,
    pub reject_cap: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StudySpec {
    pub alpha: Option<f64>,
    pub eta: Option<f64>,
    pub methods: Option<Vec<Method>>,
    pub replications: Option<usize>,
    pub master_seed: Option<u64>,
    pub rows_csv: Option<PathBuf>,
    pub summary_json: Option<PathBuf>,
    pub samples_csv: Option<PathBuf>,
    pub full_scale: bool,
}

/// A parsed configuration: a built-in scenario name and/or inline problem,
/// plus overrides.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StudyConfig {
    pub scenario: Option<String>,
    pub problem: ProblemSpec,
    pub sampler: SamplerSpec,
    pub study: StudySpec,
}

struct Values<'a> {
    section: &'static str,
    map: BTreeMap<String, String>,
    base: Option<&'a Path>,
}

impl<'a> Values<'a> {
    fn take(&mut self, key: &str) -> Option<String> {
        self.map.remove(key)
    }

    fn err(&self, key: &str, msg: impl std::fmt::Display) -> Error {
        Error::Config(format!("[{}] {key}: {msg}", self.section))
    }

    fn resolve(&self, key: &str, v: String) -> Result<String> {
        let Some(rel) = v.strip_prefix('@') else {
            return Ok(v);
        };
        let rel = rel.trim();
        let path = match self.base {
            Some(b) => b.join(rel),
            None => PathBuf::from(rel),
        };
        std::fs::read_to_string(&path).map_err(|e| self.err(key, format!("cannot read {}: {e}", path.display())))
    }

    fn parsed<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.take(key) {
            None => Ok(None),
            Some(v) => v.trim().parse::<T>().map(Some).map_err(|e| self.err(key, e)),
        }
    }

    fn real(&mut self, key: &str) -> Result<Option<f64>> {
        match self.take(key) {
            None => Ok(None),
            Some(v) => parse_number(v.trim()).map(Some).map_err(|e| self.err(key, e)),
        }
    }

    fn matrix(&mut self, key: &str) -> Result<Option<DMatrix<f64>>> {
        match self.take(key) {
            None => Ok(None),
            Some(v) => {
                let text = self.resolve(key, v)?;
                parse_matrix(&text).map(Some).map_err(|e| self.err(key, e))
            }
        }
    }

    fn vector(&mut self, key: &str) -> Result<Option<DVector<f64>>> {
        match self.take(key) {
            None => Ok(None),
            Some(v) => {
                let text = self.resolve(key, v)?;
                parse_vector(&text).map(Some).map_err(|e| self.err(key, e))
            }
        }
    }

    fn finish(self) -> Result<()> {
        match self.map.keys().next() {
            Some(k) => Err(self.err(k, "unknown key")),
            None => Ok(()),
        }
    }
}

fn parse_bool(s: &str) -> Result<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        other => Err(Error::Config(format!("'{other}' is not a boolean"))),
    }
}

fn parse_grid(s: &str) -> Result<Vec<GbtParams>> {
    let s = s.trim().to_ascii_lowercase();
    match s.as_str() {
        "default" | "search" => Ok(default_grid()),
        "fixed" => Ok(vec![GbtParams::default()]),
        _ => {
            // depth,learning_rate,stages,min_leaf,min_split
            let v: Vec<&str> = tokens(&s).collect();
            if v.len() != 5 {
                return Err(Error::Config(format!(
                    "grid must be 'default', 'fixed' or five numbers, got '{s}'"
                )));
            }
            let int = |t: &str| t.parse::<usize>().map_err(|_| Error::Config(format!("'{t}' is not an integer")));
            let p = GbtParams {
                max_depth: int(v[0])?,
                learning_rate: parse_number(v[1])?,
                n_stages: int(v[2])?,
                min_leaf: int(v[3])?,
                min_split: int(v[4])?,
            };
            if p.max_depth == 0 || p.n_stages == 0 || p.min_leaf == 0 || !(p.learning_rate > 0.0) {
                return Err(Error::Config("grid parameters must be positive".into()));
            }
            Ok(vec![p])
        }
    }
}

/// Parses config text. `@path` references resolve against `base`.
pub fn parse_config(text: &str, base: Option<&Path>) -> Result<StudyConfig> {
    let mut raw = parse_raw(text)?;
    let mut cfg = StudyConfig::default();
    let mut section = |name: &'static str| Values {
        section: name,
        map: raw.sections.remove(name).unwrap_or_default(),
        base,
    };

    let mut p = section("problem");
    cfg.scenario = p.take("scenario").map(|s| s.trim().to_string());
    cfg.problem.k = p.matrix("k")?;
    cfg.problem.sigma = match p.take("sigma") {
        None => None,
        Some(v) if v.trim().eq_ignore_ascii_case("identity") => Some(NoiseSpec::Identity),
        Some(v) => {
            let text = p.resolve("sigma", v)?;
            Some(NoiseSpec::Matrix(parse_matrix(&text).map_err(|e| p.err("sigma", e))?))
        }
    };
    let kind = p.take("constraints");
    let a = p.matrix("a")?;
    let b = p.vector("b")?;
    cfg.problem.constraints = match (kind.as_deref().map(|s| s.trim().to_ascii_lowercase()), a, b) {
        (None, None, None) => None,
        (Some(k), None, None) if k == "orthant" || k == "nonnegative" => Some(ConstraintSpec::Orthant),
        (Some(k), None, None) if k == "none" || k == "unconstrained" => Some(ConstraintSpec::Unconstrained),
        (None | Some(_), Some(a), Some(b)) if kind.as_deref().is_none_or(|k| k.trim().eq_ignore_ascii_case("halfspaces")) => {
            if a.nrows() != b.len() {
                return Err(p.err("b", format!("has {} entries, A has {} rows", b.len(), a.nrows())));
            }
            Some(ConstraintSpec::HalfSpaces { a, b })
        }
        _ => return Err(p.err("constraints", "use 'orthant', 'none', or A and b together")),
    };
    cfg.problem.h = p.vector("h")?;
    cfg.problem.x_true = p.vector("x_true")?;
    p.finish()?;

    let mut s = section("sampler");
    cfg.sampler.kind = s.parsed("kind")?;
    cfg.sampler.m = s.parsed("m")?;
    cfg.sampler.quantile = match s.take("quantile") {
        None => None,
        Some(q) => {
            let q = q.trim().to_ascii_lowercase();
            if q != "regression" && q != "mc" {
                return Err(s.err("quantile", format!("'{q}' is neither 'regression' nor 'mc'")));
            }
            Some(q)
        }
    };
    cfg.sampler.n = s.parsed("n")?;
    cfg.sampler.m_train = s.parsed("m_train")?;
    cfg.sampler.cv_folds = s.parsed("cv_folds")?;
    cfg.sampler.grid = match s.take("grid") {
        None => None,
        Some(g) => Some(parse_grid(&g).map_err(|e| s.err("grid", e))?),
    };
    cfg.sampler.chains = s.parsed("chains")?;
    cfg.sampler.radius = s.real("radius")?;
    cfg.sampler.n_random = s.parsed("n_random")?;
    cfg.sampler.gamma_p = s.real("gamma_p")?;
    cfg.sampler.q_norm = s.real("q_norm")?;
    cfg.sampler.window = s.parsed("window")?;
    cfg.sampler.reject_cap = s.parsed("reject_cap")?;
    s.finish()?;

    let mut t = section("study");
    cfg.study.alpha = t.real("alpha")?;
    cfg.study.eta = t.real("eta")?;
    cfg.study.methods = match t.take("methods") {
        None => None,
        Some(v) => {
            let ms = tokens(&v).map(|m| m.parse::<Method>()).collect::<Result<Vec<_>>>().map_err(|e| t.err("methods", e))?;
            if ms.is_empty() {
                return Err(t.err("methods", "empty list"));
            }
            Some(ms)
        }
    };
    cfg.study.replications = t.parsed("replications")?;
    cfg.study.master_seed = t.parsed("master_seed")?;
    cfg.study.rows_csv = t.take("rows_csv").map(|v| PathBuf::from(v.trim()));
    cfg.study.summary_json = t.take("summary_json").map(|v| PathBuf::from(v.trim()));
    cfg.study.samples_csv = t.take("samples_csv").map(|v| PathBuf::from(v.trim()));
    cfg.study.full_scale = match t.take("full_scale") {
        None => false,
        Some(v) => parse_bool(&v).map_err(|e| t.err("full_scale", e))?,
    };
    t.finish()?;

    if let (Some(a), Some(e)) = (cfg.study.alpha, cfg.study.eta) {
        if !(e > 0.0 && e < a && a < 1.0) {
            return Err(Error::Config(format!("need 0 < eta < alpha < 1, got eta = {e}, alpha = {a}")));
        }
    }
    if cfg.scenario.is_none() && cfg.problem.k.is_none() {
        return Err(Error::Config("[problem] needs either 'scenario' or 'K'".into()));
    }
    Ok(cfg)
}

/// Reads and parses a config file. Errors name the path.
pub fn load_config(path: &Path) -> Result<StudyConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text, path.parent()).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

impl StudyConfig {
    fn inline_problem(&self) -> Result<(LinearGaussianProblem, DVector<f64>)> {
        let k = self.problem.k.clone().ok_or_else(|| Error::Config("[problem] K is required".into()))?;
        let (n, p) = k.shape();
        let sigma = match &self.problem.sigma {
            None | Some(NoiseSpec::Identity) => DMatrix::identity(n, n),
            Some(NoiseSpec::Matrix(s)) => s.clone(),
        };
        let constraints = match &self.problem.constraints {
            None | Some(ConstraintSpec::Unconstrained) => Polytope::unconstrained(p),
            Some(ConstraintSpec::Orthant) => Polytope::nonnegative_orthant(p),
            Some(ConstraintSpec::HalfSpaces { a, b }) => Polytope::new(a.clone(), b.clone())?,
        };
        let h = self.problem.h.clone().ok_or_else(|| Error::Config("[problem] h is required".into()))?;
        let x = self.problem.x_true.clone().unwrap_or_else(|| DVector::zeros(p));
        let problem = LinearGaussianProblem::new(k, sigma, constraints, h).map_err(|e| Error::Config(e.to_string()))?;
        Ok((problem, x))
    }

    /// Builds the scenario, applying every override. `full` forces paper
    /// scale for built-in scenarios that have one.
    pub fn scenario(&self, full: bool) -> Result<Scenario> {
        let full = full || self.study.full_scale;
        let mut s = match &self.scenario {
            Some(name) => scenario_by_name(name, full)?,
            None => {
                let (problem, x_true) = self.inline_problem()?;
                Scenario {
                    name: "custom".into(),
                    problem,
                    x_true,
                    alpha: 0.32,
                    eta: 0.01,
                    calibration: CalibrationConfig::default(),
                    methods: Method::ALL.to_vec(),
                    replications: 100,
                    master_seed: 1,
                }
            }
        };
        if self.scenario.is_some() && self.problem != ProblemSpec::default() {
            if self.problem.k.is_some() {
                let (problem, x_true) = self.inline_problem()?;
                s.problem = problem;
                s.x_true = x_true;
                s.name = format!("{}_custom", s.name);
            } else if let Some(x) = &self.problem.x_true {
                s.x_true = x.clone();
            }
            if self.problem.k.is_none() && (self.problem.h.is_some() || self.problem.sigma.is_some() || self.problem.constraints.is_some()) {
                return Err(Error::Config("overriding h, sigma or constraints requires K".into()));
            }
        }
        let sp = &self.sampler;
        let c = &mut s.calibration;
        if let Some(k) = sp.kind {
            c.sampler = k;
        }
        if let Some(m) = sp.m {
            c.m = m;
        }
        let (mut m_train, mut folds, mut grid, mut n) = match &c.quantile {
            QuantileMethod::Regression { m_train, grid, cv_folds } => (*m_train, *cv_folds, grid.clone(), 200),
            QuantileMethod::MonteCarlo { n } => (c.m, 5, default_grid(), *n),
        };
        let mut use_mc = matches!(c.quantile, QuantileMethod::MonteCarlo { .. });
        if let Some(q) = &sp.quantile {
            use_mc = q == "mc";
        }
        m_train = sp.m_train.unwrap_or(m_train);
        folds = sp.cv_folds.unwrap_or(folds);
        if let Some(g) = &sp.grid {
            grid = g.clone();
        }
        n = sp.n.unwrap_or(n);
        c.quantile = if use_mc {
            QuantileMethod::MonteCarlo { n }
        } else {
            QuantileMethod::Regression { m_train, grid, cv_folds: folds }
        };
        if let Some(v) = sp.chains {
            c.chains = v;
        }
        if let Some(v) = sp.radius {
            c.radius = v;
        }
        if sp.n_random.is_some() {
            c.n_random = sp.n_random;
        }
        if let Some(v) = sp.gamma_p {
            c.gamma_p = v;
        }
        if let Some(v) = sp.q_norm {
            c.q_norm = v;
        }
        if sp.window.is_some() {
            c.window = sp.window;
        }
        if let Some(v) = sp.reject_cap {
            c.reject_cap = v;
        }
        let st = &self.study;
        if let Some(a) = st.alpha {
            s.alpha = a;
        }
        if let Some(e) = st.eta {
            s.eta = e;
        }
        if let Some(m) = &st.methods {
            s.methods = m.clone();
        }
        if let Some(r) = st.replications {
            s.replications = r;
        }
        if let Some(seed) = st.master_seed {
            s.master_seed = seed;
        }
        if c.m == 0 || c.chains == 0 {
            return Err(Error::Config("sampler sizes must be positive".into()));
        }
        s.validate()?;
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_blocks() {
        let m = parse_matrix("[\n 1 2\n 3, 4 # c\n]").unwrap();
        assert_eq!(m, DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]));
        let m = parse_matrix("1 0; 0 1").unwrap();
        assert_eq!(m, DMatrix::identity(2, 2));
        assert!(parse_matrix("1 2\n3").is_err());
        assert!(parse_matrix("").is_err());
        assert!(parse_matrix("1 nan").is_err());
    }

    #[test]
    fn observations() {
        assert_eq!(parse_observation("0.5 0.5").unwrap().as_slice(), &[0.5, 0.5]);
        assert_eq!(parse_observation("y = [1, -2]\n").unwrap().as_slice(), &[1.0, -2.0]);
        assert!(parse_observation("y =").is_err());
        assert!(parse_observation("1 x").is_err());
    }

    #[test]
    fn full_inline_config() {
        let text = "
# 2D toy
[problem]
K = [
  1 0
  0 1
]
sigma = identity
constraints = orthant
h = 1 -1
x_true = 0.5 0.5

[sampler]
kind = vgs
m = 400
quantile = mc
n = 80

[study]
alpha = 0.32
eta = 0.01
methods = osb, global_optimized
replications = 5
master_seed = 9
";
        let cfg = parse_config(text, None).unwrap();
        let s = cfg.scenario(false).unwrap();
        assert_eq!(s.problem.p(), 2);
        assert_eq!(s.methods, vec![Method::Osb, Method::GlobalOptimized]);
        assert_eq!(s.replications, 5);
        assert_eq!(s.master_seed, 9);
        assert_eq!(s.calibration.quantile, QuantileMethod::MonteCarlo { n: 80 });
        assert_eq!(s.calibration.sampler, SamplerKind::Vgs);
    }

    #[test]
    fn scenario_with_overrides() {
        let cfg = parse_config("[problem]\nscenario = gaussian3d\n[study]\nreplications = 7\n[sampler]\ngrid = fixed\n", None).unwrap();
        let s = cfg.scenario(false).unwrap();
        assert_eq!(s.name, "gaussian3d");
        assert_eq!(s.replications, 7);
        match s.calibration.quantile {
            QuantileMethod::Regression { grid, .. } => assert_eq!(grid, vec![GbtParams::default()]),
            _ => panic!(),
        }
    }

    #[test]
    fn config_errors() {
        assert!(parse_config("k = 1", None).is_err());
        assert!(parse_config("[nope]\n", None).is_err());
        assert!(parse_config("[problem]\nscenario = gaussian2d\nbogus = 1\n", None).is_err());
        assert!(parse_config("[problem]\nscenario = gaussian2d\n[study]\nmethods = osb, wat\n", None).is_err());
        assert!(parse_config("[problem]\nscenario = gaussian2d\n[study]\nalpha = 0.1\neta = 0.2\n", None).is_err());
        assert!(parse_config("[problem]\nK = [\n1 0\n", None).is_err());
        assert!(parse_config("[problem]\nK = @/definitely/not/here.txt\n", None).is_err());
        assert!(parse_config("[problem]\nscenario = gaussian2d\nscenario = gaussian3d\n", None).is_err());
        let cfg = parse_config("[problem]\nscenario = mars\n", None).unwrap();
        assert!(cfg.scenario(false).is_err());
    }

    #[test]
    fn file_references() {
        let dir = std::env::temp_dir().join(format!("bbci-config-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        std::fs::write(dir.join("k.txt"), "2 0\n0 2\n").unwrap();
        std::fs::write(dir.join("study.cfg"), "[problem]\nK = @k.txt\nh = 1 1\nconstraints = none\n").unwrap();
        let cfg = load_config(&dir.join("study.cfg")).unwrap();
        assert_eq!(cfg.problem.k.unwrap()[(0, 0)], 2.0);
        let err = load_config(&dir.join("missing.cfg")).unwrap_err().to_string();
        assert!(err.contains("missing.cfg"));
        std::fs::remove_dir_all(&dir).ok();
    }
}
