//! Running a scenario end to end and writing its results.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::analysis::{common_fixed_point, linearize, FixedPointResult, LocalLinearization};
use crate::dynamics::{RegimeId, Trajectory};
use crate::error::{Error, Result};
use crate::jsr::{exponential_envelope_fit, jsr_bounds, stability_verdict, Envelope, StabilityVerdict};
use crate::linalg::{eigenvalues, matrix_to_rows, Matrix, Spectrum};
use crate::scenario::{AnalysisKind, Scenario, ScenarioFile};
use crate::state::StateVector;
use crate::structure::{
    invariant_law_verdict, irreducibility_check, topology_report, IrreducibilityReport, RepresentabilityVerdict,
    TopologyReport,
};

/// Result of one analysis: its output or the reason it failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Block<T> {
    Ok(T),
    Error(String),
}

impl<T> Block<T> {
    pub fn ok(&self) -> Option<&T> {
        match self {
            Block::Ok(v) => Some(v),
            Block::Error(_) => None,
        }
    }

    pub fn is_ok(&self) -> bool {
        matches!(self, Block::Ok(_))
    }

    fn from_result(r: Result<T>) -> Self {
        match r {
            Ok(v) => Block::Ok(v),
            Err(e) => Block::Error(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolInfo {
    pub name: String,
    pub version: String,
}

impl ToolInfo {
    pub fn current() -> Self {
        ToolInfo {
            name: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Eigenvalue {
    pub re: f64,
    pub im: f64,
}

fn eigen_list(s: &Spectrum) -> Vec<Eigenvalue> {
    s.eigenvalues
        .iter()
        .map(|z| Eigenvalue { re: z.re, im: z.im })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeLinearization {
    pub label: String,
    pub jacobian: Vec<Vec<f64>>,
    pub eigenvalues: Vec<Eigenvalue>,
    pub spectral_radius: f64,
    pub nonsmooth: bool,
}

/// Linearized product of a two-letter word.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordProduct {
    /// Application order: `word[0]` acts first.
    pub word: Vec<RegimeId>,
    pub labels: Vec<String>,
    /// `A_{word[1]} · A_{word[0]}`.
    pub product: Vec<Vec<f64>>,
    pub trace: f64,
    pub determinant: f64,
    pub eigenvalues: Vec<Eigenvalue>,
    pub spectral_radius: f64,
    /// `ρ(product)^(1/2)`.
    pub growth_factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearizationReport {
    pub point: StateVector,
    pub regimes: Vec<RegimeLinearization>,
    pub products: Vec<WordProduct>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsrReport {
    pub verdict: StabilityVerdict,
    pub witness_labels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub initial_state: StateVector,
    pub trajectory: Trajectory,
    /// Common fixed point used for deviations, if one was found.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_point: Option<StateVector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deviations: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub envelope: Option<Block<Envelope>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub tool: ToolInfo,
    /// The scenario as run, after overrides and defaults.
    pub scenario: ScenarioFile,
    pub regimes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_point: Option<Block<FixedPointResult>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linearization: Option<Block<LinearizationReport>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jsr: Option<Block<JsrReport>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub representability: Option<Block<RepresentabilityVerdict>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub irreducibility: Option<Block<IrreducibilityReport>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topology: Option<Block<TopologyReport>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<Block<SimulationReport>>,
    /// Wall-clock seconds per analysis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings: Option<BTreeMap<String, f64>>,
}

impl AnalysisReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    /// Non-finite numbers serialize as `null`; a finite report has none.
    pub fn is_finite(&self) -> bool {
        fn walk(v: &serde_json::Value) -> bool {
            match v {
                serde_json::Value::Null => false,
                serde_json::Value::Array(a) => a.iter().all(walk),
                serde_json::Value::Object(o) => o.values().all(walk),
                _ => true,
            }
        }
        walk(&serde_json::to_value(self).expect("report serializes"))
    }

    /// Error messages of failed blocks, keyed by analysis.
    pub fn failures(&self) -> Vec<(&'static str, &str)> {
        let mut out = Vec::new();
        macro_rules! check {
            ($field:ident, $name:literal) => {
                if let Some(Block::Error(e)) = &self.$field {
                    out.push(($name, e.as_str()));
                }
            };
        }
        check!(fixed_point, "fixed-point");
        check!(linearization, "linearize");
        check!(jsr, "jsr");
        check!(representability, "commute");
        check!(irreducibility, "irreducibility");
        check!(topology, "topology");
        check!(simulation, "simulate");
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub timings: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { timings: true }
    }
}

struct Timer {
    enabled: bool,
    map: BTreeMap<String, f64>,
}

impl Timer {
    fn time<T>(&mut self, name: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        if self.enabled {
            *self.map.entry(name.to_string()).or_insert(0.0) += start.elapsed().as_secs_f64();
        }
        out
    }
}

fn linearization_report(lin: &LocalLinearization, labels: &[String]) -> Result<LinearizationReport> {
    let regimes = lin
        .matrices
        .iter()
        .zip(&lin.spectra)
        .zip(&lin.nonsmooth)
        .zip(labels)
        .map(|(((m, s), &nonsmooth), label)| RegimeLinearization {
            label: label.clone(),
            jacobian: matrix_to_rows(m),
            eigenvalues: eigen_list(s),
            spectral_radius: s.spectral_radius,
            nonsmooth,
        })
        .collect();
    let k = lin.matrices.len();
    let mut products = Vec::new();
    for a in 0..k {
        for b in 0..k {
            if a == b {
                continue;
            }
            let word = vec![RegimeId(a), RegimeId(b)];
            let p: Matrix = lin.word_product(&word)?;
            let spectrum = eigenvalues(&p)?;
            products.push(WordProduct {
                labels: vec![labels[a].clone(), labels[b].clone()],
                word,
                trace: p.trace(),
                determinant: p.determinant(),
                eigenvalues: eigen_list(&spectrum),
                spectral_radius: spectrum.spectral_radius,
                growth_factor: spectrum.spectral_radius.sqrt(),
                product: matrix_to_rows(&p),
            });
        }
    }
    Ok(LinearizationReport {
        point: lin.point.clone(),
        regimes,
        products,
    })
}

/// Run the requested analyses in the order fixed point, linearization,
/// JSR, structure, simulation.
///
/// Failing analyses produce error blocks; the call itself fails only when
/// every requested analysis failed.
pub fn run_scenario(scenario: &Scenario, options: RunOptions) -> Result<AnalysisReport> {
    let file = &scenario.file;
    let system = &scenario.system;
    let labels = system.labels().to_vec();
    let wants = |k| file.wants(k);
    let mut timer = Timer {
        enabled: options.timings,
        map: BTreeMap::new(),
    };
    let total = Instant::now();
    let n = system.dimension();

    let needs_point = wants(AnalysisKind::FixedPoint)
        || wants(AnalysisKind::Linearize)
        || wants(AnalysisKind::Jsr)
        || wants(AnalysisKind::Simulate);
    let fixed = needs_point.then(|| {
        timer.time("fixed-point", || {
            let start = match &file.initial_state {
                Some(v) => StateVector::new(v.clone())?,
                None => StateVector::zeros(n),
            };
            common_fixed_point(system, &start, scenario.fixed_point_options())
        })
    });
    let point: Result<StateVector> = match &fixed {
        Some(Ok(r)) if r.converged => Ok(r.point.clone()),
        // Affine Jacobians do not depend on the point.
        Some(Ok(r)) if system.operators().iter().all(|op| op.is_affine()) => Ok(r.point.clone()),
        Some(Ok(r)) => Err(Error::invalid(
            "linearization point",
            format!("no common fixed point found (residual {:e})", r.residual),
        )),
        Some(Err(e)) => Err(e.clone()),
        None => Err(Error::invalid("linearization point", "fixed point not computed")),
    };

    let needs_lin = wants(AnalysisKind::Linearize) || wants(AnalysisKind::Jsr) || wants(AnalysisKind::Commute);
    let lin: Option<Result<LocalLinearization>> = needs_lin.then(|| {
        timer.time("linearize", || {
            let p = point.clone()?;
            linearize(system, &p)
        })
    });
    let lin_report = if wants(AnalysisKind::Linearize) {
        let r = lin.as_ref().expect("computed when requested");
        Some(timer.time("linearize", || {
            Block::from_result(r.clone().and_then(|l| linearization_report(&l, &labels)))
        }))
    } else {
        None
    };

    let jsr = wants(AnalysisKind::Jsr).then(|| {
        timer.time("jsr", || {
            let r = lin.as_ref().expect("computed when requested").clone().and_then(|l| {
                let bounds = jsr_bounds(&l.matrices, &file.jsr.options())?;
                let witness_labels = bounds.witness_word.iter().map(|id| labels[id.0].clone()).collect();
                Ok(JsrReport {
                    verdict: stability_verdict(&bounds),
                    witness_labels,
                })
            });
            Block::from_result(r)
        })
    });

    let plan = scenario.sampling_plan();
    let representability = wants(AnalysisKind::Commute).then(|| {
        timer.time("commute", || {
            let r = invariant_law_verdict(system, &plan, file.tolerance).and_then(|v| match lin.as_ref() {
                Some(Ok(l)) => v.with_linearization(&l.matrices),
                _ => Ok(v),
            });
            Block::from_result(r)
        })
    });
    let irreducibility = wants(AnalysisKind::Irreducibility).then(|| {
        timer.time("irreducibility", || {
            Block::from_result(irreducibility_check(system, &plan, file.tolerance))
        })
    });
    let topology = wants(AnalysisKind::Topology).then(|| Block::Ok(topology_report(system)));

    let simulation = wants(AnalysisKind::Simulate).then(|| {
        timer.time("simulate", || {
            let common = match &fixed {
                Some(Ok(r)) if r.converged => Some(&r.point),
                _ => None,
            };
            Block::from_result(simulate(scenario, common))
        })
    });

    let fixed_point =
        wants(AnalysisKind::FixedPoint).then(|| Block::from_result(fixed.clone().expect("computed when requested")));

    let report = AnalysisReport {
        tool: ToolInfo::current(),
        scenario: file.clone(),
        regimes: labels,
        fixed_point,
        linearization: lin_report,
        jsr,
        representability,
        irreducibility,
        topology,
        simulation,
        timings: options.timings.then(|| {
            let mut m = timer.map;
            m.insert("total".to_string(), total.elapsed().as_secs_f64());
            m
        }),
    };
    let failures = report.failures();
    let requested = file.analyses.iter().collect::<std::collections::BTreeSet<_>>().len();
    if failures.len() == requested {
        return Err(Error::AllAnalysesFailed(
            failures.iter().map(|(k, e)| format!("{k}: {e}")).collect(),
        ));
    }
    Ok(report)
}

fn simulate(scenario: &Scenario, fixed_point: Option<&StateVector>) -> Result<SimulationReport> {
    let file = &scenario.file;
    let n = scenario.system.dimension();
    let mut x0 = match (&file.initial_state, fixed_point) {
        (Some(v), _) => v.clone(),
        (None, Some(p)) => p.to_vec(),
        (None, None) => vec![0.0; n],
    };
    if let Some(d) = &file.initial_perturbation {
        for (x, dx) in x0.iter_mut().zip(d) {
            *x += dx;
        }
    }
    let x0 = StateVector::new(x0)?;
    let signal = scenario
        .signal
        .as_ref()
        .ok_or_else(|| Error::invalid("scenario", "simulation needs a signal"))?;
    let trajectory = scenario.system.simulate(signal, &x0, file.horizon)?;
    let deviations = fixed_point.map(|p| trajectory.deviations(p));
    let envelope = fixed_point.map(|p| Block::from_result(exponential_envelope_fit(&trajectory, p)));
    Ok(SimulationReport {
        initial_state: x0,
        trajectory,
        reference_point: fixed_point.cloned(),
        deviations,
        envelope,
    })
}

/// `t,regime,x0,…` with the regime that produced row t (blank at t = 0).
pub fn trajectory_csv(trajectory: &Trajectory, labels: &[String]) -> String {
    let n = trajectory.states.first().map_or(0, |s| s.len());
    let mut out = String::from("t,regime");
    for i in 0..n {
        let _ = write!(out, ",x{i}");
    }
    out.push('\n');
    for (t, state) in trajectory.states.iter().enumerate() {
        let _ = write!(out, "{t},");
        if t > 0 {
            let id = trajectory.regimes[t - 1];
            out.push_str(labels.get(id.0).map_or("", String::as_str));
        }
        for v in state.iter() {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

pub fn deviations_csv(deviations: &[f64]) -> String {
    let mut out = String::from("t,deviation\n");
    for (t, d) in deviations.iter().enumerate() {
        let _ = writeln!(out, "{t},{d}");
    }
    out
}

/// Write `report.json`, plus `trajectory.csv` and `deviations.csv` when a
/// simulation produced them. Returns the paths written.
pub fn emit_report(report: &AnalysisReport, out_dir: &Path) -> io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    let mut put = |name: &str, body: String| -> io::Result<()> {
        let path = out_dir.join(name);
        std::fs::write(&path, body)?;
        written.push(path);
        Ok(())
    };
    put("report.json", report.to_json())?;
    if let Some(Block::Ok(sim)) = &report.simulation {
        put("trajectory.csv", trajectory_csv(&sim.trajectory, &report.regimes))?;
        if let Some(d) = &sim.deviations {
            put("deviations.csv", deviations_csv(d))?;
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::parse_scenario;

    const COLLATERAL: &str = r#"{
        "dimension": 2,
        "regimes": [
            {"label": "N", "operator": {"collateral": {"alpha": 0.8, "beta": 0.8, "mu": 1.6, "nu": 1.6, "q_bar": 0.2, "b_bar": 0.2, "side": "N"}}},
            {"label": "C", "operator": {"collateral": {"alpha": 0.8, "beta": 0.8, "mu": 1.6, "nu": 1.6, "q_bar": 0.2, "b_bar": 0.2, "side": "C"}}}
        ],
        "initial_state": [1.0, 1.0],
        "signal": {"periodic": ["N", "C"]},
        "horizon": 6,
        "sampler": {"random_points": 100}
    }"#;

    fn run(text: &str) -> AnalysisReport {
        let s = parse_scenario(text, "t.json").unwrap();
        run_scenario(&s, RunOptions { timings: false }).unwrap()
    }

    #[test]
    fn collateral_full_run() {
        let r = run(COLLATERAL);
        let fp = r.fixed_point.as_ref().unwrap().ok().unwrap();
        assert!(fp.point.distance_inf(&[1.0, 1.0]) <= 1e-15);
        let lin = r.linearization.as_ref().unwrap().ok().unwrap();
        let nc = &lin.products[0];
        assert_eq!(nc.labels, ["N", "C"]);
        assert!((nc.spectral_radius - 1.0498).abs() < 5e-4);
        let jsr = r.jsr.as_ref().unwrap().ok().unwrap();
        assert_eq!(jsr.verdict.status, crate::jsr::StabilityStatus::UnstableCertified);
        let rep = r.representability.as_ref().unwrap().ok().unwrap();
        assert_eq!(rep.status, crate::structure::RepresentabilityStatus::RuledOut);
        assert!(r.timings.is_none());
        assert!(r.is_finite());
        assert!(r.failures().is_empty());
    }

    #[test]
    fn report_round_trips() {
        let r = run(COLLATERAL);
        assert_eq!(AnalysisReport::from_json(&r.to_json()).unwrap(), r);
    }

    #[test]
    fn csv_layout() {
        let r = run(COLLATERAL);
        let sim = r.simulation.as_ref().unwrap().ok().unwrap();
        let csv = trajectory_csv(&sim.trajectory, &r.regimes);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("t,regime,x0,x1"));
        assert_eq!(lines.next(), Some("0,,1,1"));
        assert!(lines.next().unwrap().starts_with("1,N,"));
        assert!(lines.next().unwrap().starts_with("2,C,"));
        assert_eq!(csv.lines().count(), 8);
        assert!(!csv.contains('\r'));
        assert_eq!(deviations_csv(&[0.0, 1.5e-7]), "t,deviation\n0,0\n1,0.00000015\n");
    }

    #[test]
    fn zero_horizon_simulation_only() {
        let text = r#"{
            "dimension": 1,
            "regimes": [{"label": "a", "operator": {"affine": {"matrix": [[0.5]], "offset": [1.0]}}}],
            "initial_state": [3.0],
            "signal": {"periodic": ["a"]},
            "analyses": ["simulate"]
        }"#;
        let r = run(text);
        let sim = r.simulation.as_ref().unwrap().ok().unwrap();
        assert_eq!(sim.trajectory.states.len(), 1);
        assert!(r.fixed_point.is_none() && r.jsr.is_none());
        // x* = 2 is still used for deviations.
        assert_eq!(sim.deviations.as_deref(), Some(&[1.0][..]));
    }

    #[test]
    fn partial_failure_is_reported_in_block() {
        // x ↦ x + 1 has no fixed point, so linearization and JSR fail but
        // topology succeeds.
        let text = r#"{
            "dimension": 1,
            "regimes": [{"label": "a", "operator": {"affine": {"matrix": [[1.0]], "offset": [1.0]}}}],
            "analyses": ["jsr", "topology"]
        }"#;
        let r = run(text);
        assert!(matches!(r.jsr, Some(Block::Error(_))));
        assert!(r.topology.as_ref().unwrap().is_ok());

        let only_jsr = text.replace(r#"["jsr", "topology"]"#, r#"["jsr"]"#);
        let s = parse_scenario(&only_jsr, "t.json").unwrap();
        assert!(matches!(
            run_scenario(&s, RunOptions::default()),
            Err(Error::AllAnalysesFailed(_))
        ));
    }

    #[test]
    fn single_regime_jsr_is_spectral_radius_at_depth_one() {
        let text = r#"{
            "dimension": 2,
            "regimes": [{"label": "a", "operator": {"affine": {"matrix": [[0.5, 0.3], [0.1, 0.4]]}}}],
            "analyses": ["jsr"]
        }"#;
        let r = run(text);
        let b = &r.jsr.as_ref().unwrap().ok().unwrap().verdict.bounds;
        // Eigenvalues of [[0.5,0.3],[0.1,0.4]]: 0.45 ± sqrt(0.0025 + 0.03).
        let rho = 0.45 + 0.0325f64.sqrt();
        assert!((b.lower - rho).abs() < 1e-12);
        assert_eq!(b.witness_word, vec![RegimeId(0)]);
    }

    #[test]
    fn emit_writes_files() {
        let r = run(COLLATERAL);
        let dir = tempfile::tempdir().unwrap();
        let files = emit_report(&r, dir.path()).unwrap();
        assert_eq!(files.len(), 3);
        let back = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
        assert_eq!(AnalysisReport::from_json(&back).unwrap(), r);
    }
}
