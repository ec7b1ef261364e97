//! JSON scenario files: strict decoding, validation and resolution into a
//! runnable [`Scenario`].

use std::fmt;
use std::path::{Path, PathBuf};

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::analysis::FixedPointOptions;
use crate::dynamics::{RegimeId, RegimeSystem};
use crate::error::Error;
use crate::expr::ParseError;
use crate::jsr::JsrOptions;
use crate::linalg::{matrix_from_rows, MatrixNorm};
use crate::operator::{CollateralParams, ExpressionMap, RegimeOperator, Side};
use crate::signal::SwitchingSignal;
use crate::state::StateVector;
use crate::structure::SamplingPlan;

/// Top-level scenario document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// State dimension n.
    pub dimension: usize,
    pub regimes: Vec<RegimeSpec>,
    /// Simulation start. Defaults to the common fixed point when one was
    /// found, otherwise the origin.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<Vec<f64>>,
    /// Added to the initial state before simulating.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_perturbation: Option<Vec<f64>>,
    /// Required when `simulate` is requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signal: Option<SignalSpec>,
    /// Number of simulated steps T.
    #[serde(default)]
    pub horizon: usize,
    /// Analyses to run; all of them when omitted.
    #[serde(default = "AnalysisKind::all")]
    pub analyses: Vec<AnalysisKind>,
    #[serde(default)]
    pub jsr: JsrSpec,
    #[serde(default)]
    pub sampler: SamplerSpec,
    /// Relative tolerance for structural diagnostics.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default)]
    pub fixed_point: FixedPointSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSpec>,
}

fn default_tolerance() -> f64 {
    crate::structure::DEFAULT_TOL
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct RegimeSpec {
    /// Unique, non-empty name used by signals and reports.
    pub label: String,
    pub operator: OperatorSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum OperatorSpec {
    /// `x ↦ A x + c`.
    Affine(AffineSpec),
    /// The built-in two-dimensional collateral model.
    Collateral(CollateralSpec),
    /// One expression per output component, in the variables x0 … x{n-1}.
    Expression(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct AffineSpec {
    /// Row-major n×n matrix.
    pub matrix: Vec<Vec<f64>>,
    /// Length-n offset; zero when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct CollateralSpec {
    pub alpha: f64,
    pub beta: f64,
    pub mu: f64,
    pub nu: f64,
    pub q_bar: f64,
    pub b_bar: f64,
    pub side: Side,
}

impl CollateralSpec {
    pub fn params(&self) -> CollateralParams {
        CollateralParams {
            alpha: self.alpha,
            beta: self.beta,
            mu: self.mu,
            nu: self.nu,
            q_bar: self.q_bar,
            b_bar: self.b_bar,
        }
    }
}

/// Regimes are referenced by label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum SignalSpec {
    /// Exactly this sequence; must be at least `horizon` long.
    Explicit(Vec<String>),
    /// Repeated indefinitely.
    Periodic(Vec<String>),
    Iid(IidSpec),
    Markov(MarkovSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct IidSpec {
    /// One probability per regime, in declaration order.
    pub weights: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct MarkovSpec {
    /// Row i holds the probabilities of moving from regime i to each regime.
    pub transition: Vec<Vec<f64>>,
    /// Label of the regime applied at t = 0.
    pub initial: String,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "kebab-case")]
pub enum AnalysisKind {
    Simulate,
    FixedPoint,
    Linearize,
    Jsr,
    Commute,
    Irreducibility,
    Topology,
}

impl AnalysisKind {
    pub const ALL: [AnalysisKind; 7] = [
        AnalysisKind::FixedPoint,
        AnalysisKind::Linearize,
        AnalysisKind::Jsr,
        AnalysisKind::Commute,
        AnalysisKind::Irreducibility,
        AnalysisKind::Topology,
        AnalysisKind::Simulate,
    ];

    pub fn all() -> Vec<AnalysisKind> {
        Self::ALL.to_vec()
    }

    pub fn name(self) -> &'static str {
        match self {
            AnalysisKind::Simulate => "simulate",
            AnalysisKind::FixedPoint => "fixed-point",
            AnalysisKind::Linearize => "linearize",
            AnalysisKind::Jsr => "jsr",
            AnalysisKind::Commute => "commute",
            AnalysisKind::Irreducibility => "irreducibility",
            AnalysisKind::Topology => "topology",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct JsrSpec {
    /// Maximum word length L.
    pub depth: usize,
    /// Stop once `upper − lower` is at most this.
    pub gap: f64,
    /// Maximum number of products evaluated.
    pub budget: usize,
    pub norm: MatrixNorm,
}

impl Default for JsrSpec {
    fn default() -> Self {
        let o = JsrOptions::default();
        JsrSpec {
            depth: o.max_depth,
            gap: o.target_gap,
            budget: o.budget,
            norm: o.norm,
        }
    }
}

impl JsrSpec {
    pub fn options(&self) -> JsrOptions {
        JsrOptions {
            target_gap: self.gap,
            max_depth: self.depth,
            budget: self.budget,
            norm: self.norm,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerSpec {
    /// `[lo, hi]`, applied to every axis.
    #[serde(rename = "box")]
    pub bounds: [f64; 2],
    /// Grid points per axis (reduced automatically in high dimension).
    pub grid_points: usize,
    pub random_points: usize,
    pub seed: u64,
}

impl Default for SamplerSpec {
    fn default() -> Self {
        SamplerSpec {
            bounds: [crate::structure::DEFAULT_BOX.0, crate::structure::DEFAULT_BOX.1],
            grid_points: crate::structure::DEFAULT_GRID_POINTS,
            random_points: crate::structure::DEFAULT_RANDOM_POINTS,
            seed: 0,
        }
    }
}

impl SamplerSpec {
    pub fn plan(&self, dimension: usize) -> SamplingPlan {
        SamplingPlan {
            bounds: vec![(self.bounds[0], self.bounds[1]); dimension],
            grid_points: self.grid_points,
            random_points: self.random_points,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct FixedPointSpec {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FixedPointSpec {
    fn default() -> Self {
        let o = FixedPointOptions::default();
        FixedPointSpec {
            tol: o.tol,
            max_iter: o.max_iter,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Output directory, relative to the scenario file.
    pub dir: String,
}

/// Command-line style overrides applied before resolution.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub analyses: Option<Vec<AnalysisKind>>,
    /// Replaces both the signal seed and the sampler seed.
    pub seed: Option<u64>,
    pub depth: Option<usize>,
    pub gap: Option<f64>,
    pub tolerance: Option<f64>,
}

impl ScenarioFile {
    pub fn apply(&mut self, o: &Overrides) {
        if let Some(a) = &o.analyses {
            self.analyses = a.clone();
        }
        if let Some(seed) = o.seed {
            self.sampler.seed = seed;
            match &mut self.signal {
                Some(SignalSpec::Iid(s)) => s.seed = seed,
                Some(SignalSpec::Markov(s)) => s.seed = seed,
                _ => {}
            }
        }
        if let Some(depth) = o.depth {
            self.jsr.depth = depth;
        }
        if let Some(gap) = o.gap {
            self.jsr.gap = gap;
        }
        if let Some(tol) = o.tolerance {
            self.tolerance = tol;
        }
    }

    pub fn wants(&self, kind: AnalysisKind) -> bool {
        self.analyses.contains(&kind)
    }
}

/// A scenario problem with the place it was found.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{location}: {message}")]
pub struct ScenarioError {
    /// `file[:line[:column]]` optionally followed by a field path.
    pub location: String,
    pub message: String,
}

/// A validated scenario ready to run.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub file: ScenarioFile,
    pub source: Option<PathBuf>,
    pub system: RegimeSystem,
    pub signal: Option<SwitchingSignal>,
}

impl Scenario {
    /// Validate an in-memory scenario; `name` labels error locations.
    pub fn from_file(file: ScenarioFile, name: &str) -> Result<Scenario, ScenarioError> {
        resolve(file, name, None)
    }

    pub fn name(&self) -> String {
        self.file
            .name
            .clone()
            .or_else(|| {
                self.source
                    .as_ref()
                    .and_then(|p| p.file_stem())
                    .map(|s| s.to_string_lossy().into_owned())
            })
            .unwrap_or_else(|| "scenario".to_string())
    }

    pub fn fixed_point_options(&self) -> FixedPointOptions {
        FixedPointOptions {
            tol: self.file.fixed_point.tol,
            max_iter: self.file.fixed_point.max_iter,
        }
    }

    pub fn sampling_plan(&self) -> SamplingPlan {
        self.file.sampler.plan(self.file.dimension)
    }

    /// Output directory from the file, resolved against its location.
    pub fn output_dir(&self) -> Option<PathBuf> {
        let dir = Path::new(&self.file.output.as_ref()?.dir);
        Some(match self.source.as_ref().and_then(|p| p.parent()) {
            Some(base) if dir.is_relative() => base.join(dir),
            _ => dir.to_path_buf(),
        })
    }

    /// Re-validate after changing `file`.
    pub fn with_overrides(self, o: &Overrides) -> Result<Scenario, ScenarioError> {
        let mut file = self.file;
        file.apply(o);
        let name = self
            .source
            .as_ref()
            .map_or_else(|| "<scenario>".to_string(), |p| p.display().to_string());
        let mut s = resolve(file, &name, None)?;
        s.source = self.source;
        Ok(s)
    }
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let name = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| ScenarioError {
        location: name.clone(),
        message: format!("cannot read scenario: {e}"),
    })?;
    let mut s = parse_scenario(&text, &name)?;
    s.source = Some(path.to_path_buf());
    Ok(s)
}

/// Decode and validate scenario text; `name` labels error locations.
pub fn parse_scenario(text: &str, name: &str) -> Result<Scenario, ScenarioError> {
    let file: ScenarioFile = serde_json::from_str(text).map_err(|e| ScenarioError {
        location: if e.line() > 0 {
            format!("{name}:{}:{}", e.line(), e.column())
        } else {
            name.to_string()
        },
        message: with_suggestion(&strip_position(&e.to_string())),
    })?;
    resolve(file, name, Some(text))
}

fn strip_position(msg: &str) -> String {
    match msg.rfind(" at line ") {
        Some(i) => msg[..i].to_string(),
        None => msg.to_string(),
    }
}

/// Append a "did you mean" hint to serde's unknown field/variant messages.
fn with_suggestion(msg: &str) -> String {
    let Some(rest) = msg
        .strip_prefix("unknown field `")
        .or_else(|| msg.strip_prefix("unknown variant `"))
    else {
        return msg.to_string();
    };
    let Some(end) = rest.find('`') else {
        return msg.to_string();
    };
    let given = &rest[..end];
    let candidates = rest[end + 1..].split('`').skip(1).step_by(2);
    let best = candidates
        .map(|c| (strsim::jaro_winkler(given, c), c))
        .filter(|(score, _)| *score >= 0.8)
        .max_by(|a, b| a.0.total_cmp(&b.0));
    match best {
        Some((_, c)) => format!("{msg}; did you mean `{c}`?"),
        None => msg.to_string(),
    }
}

struct Ctx<'a> {
    name: &'a str,
    text: Option<&'a str>,
}

impl Ctx<'_> {
    fn err(&self, path: impl fmt::Display, message: impl Into<String>) -> ScenarioError {
        ScenarioError {
            location: format!("{}: {path}", self.name),
            message: message.into(),
        }
    }
}

/// Line of the `nth` occurrence (from `cursor`) of `needle` in the raw text.
fn locate(text: &str, needle: &str, cursor: &mut usize) -> Option<usize> {
    let found = text[*cursor..].find(needle)? + *cursor;
    *cursor = found + needle.len();
    Some(text[..found].matches('\n').count() + 1)
}

fn resolve(file: ScenarioFile, name: &str, text: Option<&str>) -> Result<Scenario, ScenarioError> {
    let ctx = Ctx { name, text };
    let n = file.dimension;
    if n == 0 {
        return Err(ctx.err("dimension", "must be at least 1"));
    }
    if file.regimes.is_empty() {
        return Err(ctx.err("regimes", "at least one regime is required"));
    }
    let mut cursor = 0;
    let mut regimes = Vec::with_capacity(file.regimes.len());
    for (i, r) in file.regimes.iter().enumerate() {
        let path = format!("regimes[{i}]");
        if r.label.trim().is_empty() {
            return Err(ctx.err(format!("{path}.label"), "must be non-empty"));
        }
        if let Some(j) = file.regimes[..i].iter().position(|o| o.label == r.label) {
            return Err(ctx.err(
                format!("{path}.label"),
                format!("duplicate label `{}` (also regimes[{j}])", r.label),
            ));
        }
        let op = build_operator(&ctx, &r.operator, n, &format!("{path}.operator"), &mut cursor)?;
        regimes.push((r.label.clone(), op));
    }
    let system = RegimeSystem::new(regimes).map_err(|e| ctx.err("regimes", e.to_string()))?;

    for (field, v) in [
        ("initial_state", &file.initial_state),
        ("initial_perturbation", &file.initial_perturbation),
    ] {
        if let Some(v) = v {
            if v.len() != n {
                return Err(ctx.err(field, format!("has {} entries, expected {n}", v.len())));
            }
            StateVector::new(v.clone()).map_err(|e| ctx.err(field, e.to_string()))?;
        }
    }

    let signal = match &file.signal {
        Some(spec) => Some(build_signal(&ctx, spec, &system)?),
        None => None,
    };
    if file.wants(AnalysisKind::Simulate) && signal.is_none() {
        return Err(ctx.err("signal", "required when `simulate` is requested"));
    }
    if let Some(SwitchingSignal::Explicit(word)) = &signal {
        if word.len() < file.horizon {
            return Err(ctx.err(
                "signal.explicit",
                format!("has {} regimes but horizon is {}", word.len(), file.horizon),
            ));
        }
    }

    if file.analyses.is_empty() {
        return Err(ctx.err("analyses", "at least one analysis is required"));
    }
    if !(file.tolerance > 0.0 && file.tolerance.is_finite()) {
        return Err(ctx.err("tolerance", "must be positive and finite"));
    }
    let jsr = &file.jsr;
    if jsr.depth == 0 {
        return Err(ctx.err("jsr.depth", "must be at least 1"));
    }
    if !(jsr.gap >= 0.0 && jsr.gap.is_finite()) {
        return Err(ctx.err("jsr.gap", "must be non-negative and finite"));
    }
    if jsr.budget == 0 {
        return Err(ctx.err("jsr.budget", "must be at least 1"));
    }
    let [lo, hi] = file.sampler.bounds;
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(ctx.err("sampler.box", format!("[{lo}, {hi}] must be finite with lo <= hi")));
    }
    if file.sampler.grid_points == 0 && file.sampler.random_points == 0 {
        return Err(ctx.err("sampler", "grid_points and random_points cannot both be zero"));
    }
    let fp = &file.fixed_point;
    if !(fp.tol > 0.0 && fp.tol.is_finite()) {
        return Err(ctx.err("fixed_point.tol", "must be positive and finite"));
    }
    if fp.max_iter == 0 {
        return Err(ctx.err("fixed_point.max_iter", "must be at least 1"));
    }
    if let Some(out) = &file.output {
        if out.dir.is_empty() {
            return Err(ctx.err("output.dir", "must be non-empty"));
        }
    }
    Ok(Scenario {
        file,
        source: None,
        system,
        signal,
    })
}

fn build_operator(
    ctx: &Ctx,
    spec: &OperatorSpec,
    n: usize,
    path: &str,
    cursor: &mut usize,
) -> Result<RegimeOperator, ScenarioError> {
    match spec {
        OperatorSpec::Affine(a) => {
            if a.matrix.len() != n || a.matrix.iter().any(|r| r.len() != n) {
                return Err(ctx.err(format!("{path}.affine.matrix"), format!("must be {n}x{n}")));
            }
            let offset = a.offset.clone().unwrap_or_else(|| vec![0.0; n]);
            if offset.len() != n {
                return Err(ctx.err(
                    format!("{path}.affine.offset"),
                    format!("has {} entries, expected {n}", offset.len()),
                ));
            }
            let m = matrix_from_rows(&a.matrix).map_err(|e| ctx.err(format!("{path}.affine.matrix"), e.to_string()))?;
            RegimeOperator::affine(m, offset).map_err(|e| ctx.err(format!("{path}.affine"), e.to_string()))
        }
        OperatorSpec::Collateral(c) => {
            if n != 2 {
                return Err(ctx.err(
                    format!("{path}.collateral"),
                    format!("the collateral model is two-dimensional, scenario dimension is {n}"),
                ));
            }
            RegimeOperator::collateral(c.params(), c.side)
                .map_err(|e| ctx.err(format!("{path}.collateral"), e.to_string()))
        }
        OperatorSpec::Expression(components) => {
            if components.len() != n {
                return Err(ctx.err(
                    format!("{path}.expression"),
                    format!("has {} components, expected {n}", components.len()),
                ));
            }
            for (j, src) in components.iter().enumerate() {
                let encoded = serde_json::to_string(src).unwrap_or_default();
                let line = ctx.text.and_then(|t| locate(t, &encoded, cursor));
                let here = format!("{path}.expression[{j}]");
                crate::expr::parse_expression(src, n).map_err(|e| {
                    let location = match line {
                        Some(l) => format!("{}:{l}: {here}", ctx.name),
                        None => format!("{}: {here}", ctx.name),
                    };
                    ScenarioError {
                        location,
                        message: describe_expr_error(&e, src),
                    }
                })?;
            }
            let map =
                ExpressionMap::parse(components).map_err(|e| ctx.err(format!("{path}.expression"), e.to_string()))?;
            Ok(RegimeOperator::Expression(map))
        }
    }
}

fn describe_expr_error(e: &Error, src: &str) -> String {
    match e {
        Error::Parse(ParseError { offset, .. }) => {
            format!(
                "{e}\n    {src}\n    {}^",
                " ".repeat(src[..*offset.min(&src.len())].chars().count())
            )
        }
        _ => e.to_string(),
    }
}

fn build_signal(ctx: &Ctx, spec: &SignalSpec, system: &RegimeSystem) -> Result<SwitchingSignal, ScenarioError> {
    let resolve_word = |field: &str, labels: &[String]| {
        labels
            .iter()
            .enumerate()
            .map(|(i, l)| resolve_label(ctx, system, &format!("signal.{field}[{i}]"), l))
            .collect::<Result<Vec<RegimeId>, _>>()
    };
    let (signal, field) = match spec {
        SignalSpec::Explicit(w) => (SwitchingSignal::Explicit(resolve_word("explicit", w)?), "explicit"),
        SignalSpec::Periodic(w) => {
            if w.is_empty() {
                return Err(ctx.err("signal.periodic", "word must be non-empty"));
            }
            (SwitchingSignal::Periodic(resolve_word("periodic", w)?), "periodic")
        }
        SignalSpec::Iid(s) => (
            SwitchingSignal::Iid {
                weights: s.weights.clone(),
                seed: s.seed,
            },
            "iid",
        ),
        SignalSpec::Markov(s) => (
            SwitchingSignal::Markov {
                transition: s.transition.clone(),
                initial: resolve_label(ctx, system, "signal.markov.initial", &s.initial)?,
                seed: s.seed,
            },
            "markov",
        ),
    };
    signal
        .validate(system.regime_count())
        .map_err(|e| ctx.err(format!("signal.{field}"), e.to_string()))?;
    Ok(signal)
}

fn resolve_label(ctx: &Ctx, system: &RegimeSystem, path: &str, label: &str) -> Result<RegimeId, ScenarioError> {
    system.id_of(label).ok_or_else(|| {
        let hint = system
            .labels()
            .iter()
            .map(|l| (strsim::jaro_winkler(label, l), l))
            .filter(|(s, _)| *s >= 0.8)
            .max_by(|a, b| a.0.total_cmp(&b.0))
            .map(|(_, l)| format!("; did you mean `{l}`?"))
            .unwrap_or_default();
        ctx.err(
            path,
            format!(
                "unknown regime label `{label}` (known: {}){hint}",
                system.labels().join(", ")
            ),
        )
    })
}

/// JSON schema of [`ScenarioFile`].
pub fn scenario_schema() -> String {
    let schema = schemars::schema_for!(ScenarioFile);
    serde_json::to_string_pretty(&schema).expect("schema serializes") + "\n"
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "dimension": 1,
        "regimes": [{"label": "a", "operator": {"affine": {"matrix": [[0.5]], "offset": [1.0]}}}],
        "signal": {"periodic": ["a"]},
        "horizon": 3,
        "analyses": ["simulate"]
    }"#;

    fn err(text: &str) -> ScenarioError {
        parse_scenario(text, "s.json").unwrap_err()
    }

    #[test]
    fn minimal_scenario_loads() {
        let s = parse_scenario(MINIMAL, "s.json").unwrap();
        assert_eq!(s.system.regime_count(), 1);
        assert_eq!(s.file.jsr, JsrSpec::default());
        assert_eq!(s.signal, Some(SwitchingSignal::Periodic(vec![RegimeId(0)])));
    }

    #[test]
    fn unknown_field_is_rejected_with_suggestion() {
        let e = err(&MINIMAL.replace("\"horizon\"", "\"horizn\""));
        assert!(e.location.starts_with("s.json:5:"), "{e}");
        assert!(e.message.contains("did you mean `horizon`"), "{e}");
        let e = err(&MINIMAL.replace("\"affine\"", "\"afine\""));
        assert!(e.message.contains("did you mean `affine`"), "{e}");
    }

    #[test]
    fn probability_row_error_names_row() {
        let text = r#"{
            "dimension": 1,
            "regimes": [
                {"label": "a", "operator": {"affine": {"matrix": [[0.5]]}}},
                {"label": "b", "operator": {"affine": {"matrix": [[2.0]]}}}
            ],
            "signal": {"markov": {"transition": [[0.5, 0.5], [0.6, 0.3]], "initial": "a"}},
            "analyses": ["simulate"]
        }"#;
        let e = err(text);
        assert!(e.to_string().contains("row 1"), "{e}");
        assert!(e.location.contains("signal.markov"), "{e}");
    }

    #[test]
    fn dangling_label() {
        let e = err(&MINIMAL.replace(r#"{"periodic": ["a"]}"#, r#"{"periodic": ["a", "A"]}"#));
        assert!(e.location.ends_with("signal.periodic[1]"), "{e}");
        assert!(e.message.contains("unknown regime label `A`"), "{e}");
    }

    #[test]
    fn expression_error_reports_line_and_offset() {
        let text = r#"{
  "dimension": 2,
  "regimes": [
    {"label": "e", "operator": {"expression": [
      "0.8*x0 + 0.2",
      "0.8*x1 + * 0.2"
    ]}}
  ],
  "analyses": ["topology"]
}"#;
        let e = err(text);
        assert_eq!(e.location, "s.json:6: regimes[0].operator.expression[1]");
        assert!(e.message.contains("byte 9"), "{e}");

        let e = err(&text.replace("0.8*x0 + 0.2", "x2"));
        assert!(e.location.starts_with("s.json:5:"), "{e}");
    }

    #[test]
    fn semantic_checks() {
        let e = err(&MINIMAL.replace("[[0.5]]", "[[0.5, 1.0]]"));
        assert!(e.location.ends_with("regimes[0].operator.affine.matrix"), "{e}");
        let e = err(&MINIMAL.replace(r#""signal": {"periodic": ["a"]},"#, ""));
        assert!(e.location.ends_with("signal"), "{e}");
        let e = err(&MINIMAL.replace(r#""horizon": 3"#, r#""horizon": 3, "tolerance": 0"#));
        assert!(e.location.ends_with("tolerance"), "{e}");
        let text = r#"{"dimension": 1, "regimes": [
            {"label": "q", "operator": {"collateral": {"alpha": 0.8, "beta": 0.8, "mu": 1.6, "nu": 1.6, "q_bar": 0.2, "b_bar": 0.2, "side": "N"}}}
        ], "analyses": ["topology"]}"#;
        assert!(err(text).message.contains("two-dimensional"));
        assert!(err("not json").location.starts_with("s.json:1:"));
    }

    #[test]
    fn overrides() {
        let text = r#"{
            "dimension": 1,
            "regimes": [{"label": "a", "operator": {"affine": {"matrix": [[0.5]]}}}],
            "signal": {"iid": {"weights": [1.0], "seed": 3}}
        }"#;
        let s = parse_scenario(text, "s.json").unwrap();
        assert_eq!(s.file.analyses, AnalysisKind::all());
        let s = s
            .with_overrides(&Overrides {
                analyses: Some(vec![AnalysisKind::Jsr]),
                seed: Some(11),
                depth: Some(4),
                gap: Some(0.5),
                tolerance: Some(1e-6),
            })
            .unwrap();
        assert_eq!(s.signal.as_ref().unwrap().seed(), Some(11));
        assert_eq!(s.file.analyses, vec![AnalysisKind::Jsr]);
        assert_eq!(
            (s.file.sampler.seed, s.file.jsr.depth, s.file.jsr.gap, s.file.tolerance),
            (11, 4, 0.5, 1e-6)
        );
    }

    #[test]
    fn file_round_trips() {
        let s = parse_scenario(MINIMAL, "s.json").unwrap();
        let text = serde_json::to_string(&s.file).unwrap();
        assert_eq!(parse_scenario(&text, "echo").unwrap().file, s.file);
    }
}
