//! Point evaluation, parallel sweeps and table output.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use heralded_core::fockrep::{
    conditional_fock_weights, conditional_k_max, p_click_pulsed, wigner_fock_mixture,
    CONDITIONAL_TAIL,
};
use heralded_core::gaussian::{condition_on_click, log_negativity_gaussian};
use heralded_core::io::fmt_f64;
use heralded_core::negativity::{negativity_grid, negativity_radial};
use heralded_core::params::{check_regime, HierarchyStatus, Protocol};
use heralded_core::pulsed::{lossless_cm_for_r, squeeze_rate, thermal_output_cm};
use heralded_core::steady::{filtered_output_cm_with, FilteredOutput, SpectralConfig};
use heralded_core::{
    ConditionalWigner, CovarianceState, FilterShape, NegativityResult, RadialFockMixture,
    RegimeReport,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::CliError;
use crate::scenario::{
    ConfigDocument, Grid, OutputKind, Point, ProtocolKind, Scenario, WignerWindow,
};

type Outcome<T> = Result<T, String>;

/// Heralded mechanical state in whichever representation the protocol uses.
#[derive(Debug, Clone)]
pub enum HeraldedState {
    Fock(RadialFockMixture),
    Gaussian(ConditionalWigner),
}

impl HeraldedState {
    pub fn wigner(&self, x: f64, p: f64) -> f64 {
        match self {
            HeraldedState::Fock(mix) => wigner_fock_mixture(mix, x, p),
            HeraldedState::Gaussian(cw) => cw.wigner(x, p),
        }
    }

    pub fn negativity(&self) -> NegativityResult {
        match self {
            HeraldedState::Fock(mix) => negativity_radial(mix),
            HeraldedState::Gaussian(cw) => negativity_grid(cw),
        }
    }
}

/// Everything computed at one grid point; `None` for outputs not requested.
#[derive(Debug, Clone, Default)]
pub struct PointOutcome {
    pub log_negativity: Option<Outcome<f64>>,
    pub p_click: Option<Outcome<f64>>,
    pub negativity: Option<Outcome<NegativityResult>>,
    pub wigner_grid: Option<Outcome<Vec<f64>>>,
    pub regime: Option<Outcome<RegimeReport>>,
    /// Numerically integrated filter norm (continuous drive only).
    pub calibration: Option<f64>,
}

impl PointOutcome {
    /// First error among the requested outputs.
    pub fn first_error(&self) -> Option<&str> {
        fn err<T>(o: &Option<Outcome<T>>) -> Option<&str> {
            o.as_ref()
                .and_then(|r| r.as_ref().err())
                .map(String::as_str)
        }
        err(&self.log_negativity)
            .or_else(|| err(&self.p_click))
            .or_else(|| err(&self.negativity))
            .or_else(|| err(&self.wigner_grid))
            .or_else(|| err(&self.regime))
    }
}

fn regime_duration(protocol: ProtocolKind, pt: &Point) -> Outcome<f64> {
    match protocol {
        ProtocolKind::Pulsed | ProtocolKind::PulsedThermal => {
            pt.tau.ok_or_else(|| "missing tau".to_string())
        }
        ProtocolKind::Cw => match pt.filter.map(|f| f.shape) {
            Some(FilterShape::RectWindow { tau_m }) => Ok(tau_m),
            Some(FilterShape::Exponential { gamma_f }) => Ok(1.0 / gamma_f),
            None => Err("missing filter".to_string()),
        },
    }
}

/// Regime diagnostics of one point.
pub fn regime_at(protocol: ProtocolKind, pt: &Point) -> Outcome<RegimeReport> {
    let kind = match protocol {
        ProtocolKind::Pulsed | ProtocolKind::PulsedThermal => Protocol::Pulsed,
        ProtocolKind::Cw => Protocol::Cw,
    };
    check_regime(&pt.params, kind, regime_duration(protocol, pt)?).map_err(|e| e.to_string())
}

fn filtered_state(pt: &Point) -> Outcome<FilteredOutput> {
    let filt = pt.filter.ok_or("missing filter")?;
    filtered_output_cm_with(&pt.params, &filt, &SpectralConfig::default())
        .map_err(|e| e.to_string())
}

fn herald_gaussian(st: &CovarianceState, pt: &Point) -> Result<(f64, HeraldedState), String> {
    let det = pt.detector.ok_or("missing detector")?;
    let cw = condition_on_click(st, &det).map_err(|e| e.to_string())?;
    Ok((cw.p_click, HeraldedState::Gaussian(cw)))
}

fn herald_with(
    protocol: ProtocolKind,
    pt: &Point,
    filtered: Option<&Outcome<FilteredOutput>>,
) -> Result<(f64, HeraldedState), String> {
    let det = pt.detector.ok_or("missing detector")?;
    let tau = pt.tau.unwrap_or(0.0);
    let text = |e: heralded_core::Error| e.to_string();
    match protocol {
        ProtocolKind::Pulsed => {
            let r = squeeze_rate(&pt.params, tau).map_err(text)?.r;
            let n0 = pt.params.n0;
            let k = conditional_k_max(&det, n0, r, CONDITIONAL_TAIL * 1e-3);
            let mix = conditional_fock_weights(&det, n0, r, k).map_err(text)?;
            Ok((p_click_pulsed(&det, n0, r), HeraldedState::Fock(mix)))
        }
        ProtocolKind::PulsedThermal => {
            let st = thermal_output_cm(&pt.params, tau, pt.params.n0).map_err(text)?;
            herald_gaussian(&st, pt)
        }
        ProtocolKind::Cw => match filtered {
            Some(f) => herald_gaussian(&f.as_ref().map_err(Clone::clone)?.state, pt),
            None => herald_gaussian(&filtered_state(pt)?.state, pt),
        },
    }
}

/// Heralded state of one point together with the click probability.
pub fn herald_at(protocol: ProtocolKind, pt: &Point) -> Result<(f64, HeraldedState), String> {
    herald_with(protocol, pt, None)
}

fn wigner_values(state: &HeraldedState, window: &WignerWindow) -> Vec<f64> {
    let n = window.points;
    let h = 2.0 * window.half_width / (n - 1) as f64;
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        let x = -window.half_width + i as f64 * h;
        for j in 0..n {
            out.push(state.wigner(x, -window.half_width + j as f64 * h));
        }
    }
    out
}

/// Evaluates every requested output at one grid point.
pub fn evaluate_point(s: &Scenario, pt: &Point) -> PointOutcome {
    let wants = |o: OutputKind| s.outputs.contains(&o);
    let text = |e: heralded_core::Error| e.to_string();
    let mut out = PointOutcome::default();

    let needs_herald = wants(OutputKind::PClick)
        || wants(OutputKind::WignerNegativity)
        || wants(OutputKind::WignerGrid);
    let filtered = (s.protocol == ProtocolKind::Cw
        && (needs_herald || wants(OutputKind::LogNegativity)))
    .then(|| filtered_state(pt));
    out.calibration = filtered
        .as_ref()
        .and_then(|f| f.as_ref().ok())
        .map(|f| f.calibration);

    if wants(OutputKind::LogNegativity) {
        let tau = pt.tau.unwrap_or(0.0);
        out.log_negativity = Some(match (s.protocol, &filtered) {
            (ProtocolKind::Pulsed, _) => squeeze_rate(&pt.params, tau)
                .and_then(|m| log_negativity_gaussian(&lossless_cm_for_r(m.r, pt.params.n0)))
                .map_err(text),
            (ProtocolKind::PulsedThermal, _) => thermal_output_cm(&pt.params, tau, pt.params.n0)
                .and_then(|st| log_negativity_gaussian(&st))
                .map_err(text),
            (ProtocolKind::Cw, Some(f)) => f
                .as_ref()
                .map_err(Clone::clone)
                .and_then(|f| log_negativity_gaussian(&f.state).map_err(text)),
            (ProtocolKind::Cw, None) => Err("missing filter".into()),
        });
    }

    if needs_herald {
        let heralded = herald_with(s.protocol, pt, filtered.as_ref());
        if wants(OutputKind::PClick) {
            out.p_click = Some(match (&heralded, s.protocol, pt.detector) {
                // The closed form stays defined when conditioning is impossible.
                (Err(_), ProtocolKind::Pulsed, Some(det)) => {
                    squeeze_rate(&pt.params, pt.tau.unwrap_or(0.0))
                        .map(|m| p_click_pulsed(&det, pt.params.n0, m.r))
                        .map_err(text)
                }
                (r, _, _) => r.as_ref().map(|(p, _)| *p).map_err(Clone::clone),
            });
        }
        if wants(OutputKind::WignerNegativity) {
            out.negativity = Some(
                heralded
                    .as_ref()
                    .map(|(_, st)| st.negativity())
                    .map_err(Clone::clone),
            );
        }
        if wants(OutputKind::WignerGrid) {
            out.wigner_grid = Some(
                heralded
                    .as_ref()
                    .map(|(_, st)| wigner_values(st, &s.wigner))
                    .map_err(Clone::clone),
            );
        }
    }

    if wants(OutputKind::RegimeReport) {
        out.regime = Some(regime_at(s.protocol, pt));
    }
    out
}

/// Evaluates all points of a grid on `jobs` worker threads; results come back
/// in grid order regardless of completion order.
pub fn evaluate_grid(
    s: &Scenario,
    grid: &Grid,
    jobs: usize,
) -> Result<Vec<PointOutcome>, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Output(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| {
        grid.points
            .par_iter()
            .map(|pt| evaluate_point(s, pt))
            .collect()
    }))
}

fn bool_str(b: bool) -> String {
    b.to_string()
}

fn hierarchy_str(h: HierarchyStatus) -> String {
    match h {
        HierarchyStatus::Satisfied => "satisfied",
        HierarchyStatus::Marginal => "marginal",
        HierarchyStatus::Violated => "violated",
    }
    .to_string()
}

/// Column names and cells of one regime report; empty cells with the error on failure.
pub fn regime_columns() -> Vec<&'static str> {
    vec![
        "kappa_over_omega",
        "sideband_resolved",
        "g_over_kappa",
        "weak_coupling",
        "hierarchy",
        "omega_tau",
        "rwa_lower_ok",
        "rwa_upper",
        "inside_rwa_window",
        "thermal_decoherence",
        "thermal_decoherence_ok",
        "valid",
    ]
}

pub fn regime_cells(r: &Outcome<RegimeReport>) -> (Vec<String>, String) {
    match r {
        Ok(r) => (
            vec![
                fmt_f64(r.sideband_resolved.margin),
                bool_str(r.sideband_resolved.ok),
                fmt_f64(r.weak_coupling.margin),
                bool_str(r.weak_coupling.ok),
                hierarchy_str(r.hierarchy),
                fmt_f64(r.rwa_lower.margin),
                bool_str(r.rwa_lower.ok),
                fmt_f64(r.rwa_upper),
                bool_str(r.inside_rwa_window),
                fmt_f64(r.thermal_decoherence),
                bool_str(r.thermal_decoherence_ok),
                bool_str(r.is_valid()),
            ],
            String::new(),
        ),
        Err(e) => (vec![String::new(); regime_columns().len()], e.clone()),
    }
}

fn write_table(
    path: &Path,
    header: &[String],
    rows: impl Iterator<Item = Vec<String>>,
) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn axis_header(grid: &Grid) -> Vec<String> {
    grid.axes
        .iter()
        .map(|(n, _)| n.as_str().to_string())
        .collect()
}

fn with_coords(coords: &[f64], rest: Vec<String>) -> Vec<String> {
    coords.iter().map(|c| fmt_f64(*c)).chain(rest).collect()
}

fn scalar_cells(o: &Option<Outcome<f64>>) -> Vec<String> {
    match o {
        Some(Ok(v)) => vec![fmt_f64(*v), String::new()],
        Some(Err(e)) => vec![String::new(), e.clone()],
        None => vec![String::new(), "not computed".into()],
    }
}

/// Writes the table for `kind` and returns its path.
fn write_output(
    dir: &Path,
    s: &Scenario,
    grid: &Grid,
    outcomes: &[PointOutcome],
    kind: OutputKind,
) -> Result<PathBuf, CliError> {
    let path = dir.join(format!("{}.csv", kind.file_stem()));
    let mut header = axis_header(grid);
    let rows = grid.coords.iter().zip(outcomes);
    match kind {
        OutputKind::LogNegativity | OutputKind::PClick => {
            header.extend([kind.file_stem().to_string(), "error".to_string()]);
            write_table(
                &path,
                &header,
                rows.map(|(c, o)| {
                    let cell = if kind == OutputKind::PClick {
                        &o.p_click
                    } else {
                        &o.log_negativity
                    };
                    with_coords(c, scalar_cells(cell))
                }),
            )?;
        }
        OutputKind::WignerNegativity => {
            header.extend(["N_W", "estimated_error", "warning", "error"].map(String::from));
            write_table(
                &path,
                &header,
                rows.map(|(c, o)| {
                    let cells = match &o.negativity {
                        Some(Ok(n)) => vec![
                            fmt_f64(n.n_w),
                            fmt_f64(n.estimated_error),
                            n.warning.clone().unwrap_or_default(),
                            String::new(),
                        ],
                        Some(Err(e)) => {
                            vec![String::new(), String::new(), String::new(), e.clone()]
                        }
                        None => vec![
                            String::new(),
                            String::new(),
                            String::new(),
                            "not computed".into(),
                        ],
                    };
                    with_coords(c, cells)
                }),
            )?;
        }
        OutputKind::WignerGrid => {
            header.extend(["x", "p", "W", "error"].map(String::from));
            let window = s.wigner;
            let n = window.points;
            let h = 2.0 * window.half_width / (n - 1) as f64;
            let mut table = Vec::new();
            for (c, o) in rows {
                match &o.wigner_grid {
                    Some(Ok(values)) => {
                        for (idx, w) in values.iter().enumerate() {
                            let x = -window.half_width + (idx / n) as f64 * h;
                            let p = -window.half_width + (idx % n) as f64 * h;
                            table.push(with_coords(
                                c,
                                vec![fmt_f64(x), fmt_f64(p), fmt_f64(*w), String::new()],
                            ));
                        }
                    }
                    Some(Err(e)) => table.push(with_coords(
                        c,
                        vec![String::new(), String::new(), String::new(), e.clone()],
                    )),
                    None => {}
                }
            }
            write_table(&path, &header, table.into_iter())?;
        }
        OutputKind::RegimeReport => {
            header.extend(regime_columns().into_iter().map(String::from));
            header.push("error".into());
            write_table(
                &path,
                &header,
                rows.map(|(c, o)| {
                    let (mut cells, err) = match &o.regime {
                        Some(r) => regime_cells(r),
                        None => (
                            vec![String::new(); regime_columns().len()],
                            "not computed".into(),
                        ),
                    };
                    cells.push(err);
                    with_coords(c, cells)
                }),
            )?;
        }
    }
    Ok(path)
}

#[derive(Debug, Clone, Serialize)]
struct Calibration {
    min: f64,
    max: f64,
}

#[derive(Debug, Clone, Serialize)]
struct Manifest<'a> {
    schema_version: u32,
    code_version: &'static str,
    created_unix_seconds: u64,
    scenario: &'a Scenario,
    points: usize,
    failed_points: usize,
    axes: Vec<(&'static str, &'a [f64])>,
    files: Vec<String>,
    /// Range of the integrated filter norm over the sweep (continuous drive).
    normalization_calibration: Option<Calibration>,
    worker_threads: usize,
}

/// Summary of one executed scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub scenario: String,
    pub dir: PathBuf,
    pub points: usize,
    pub failed_points: usize,
    pub files: Vec<PathBuf>,
}

/// Runs one scenario into `out/<name>/`: a CSV per requested output plus
/// `manifest.json`.
pub fn run_scenario(s: &Scenario, out: &Path, jobs: usize) -> Result<RunSummary, CliError> {
    let grid = s
        .grid()
        .map_err(|m| CliError::Config(format!("in scenario `{}`: {m}", s.name)))?;
    let outcomes = evaluate_grid(s, &grid, jobs)?;
    let dir = out.join(&s.name);
    fs::create_dir_all(&dir)
        .map_err(|e| CliError::Output(format!("cannot create {}: {e}", dir.display())))?;

    let mut files = Vec::new();
    for kind in &s.outputs {
        files.push(write_output(&dir, s, &grid, &outcomes, *kind)?);
    }
    let failed: Vec<&str> = outcomes
        .iter()
        .filter_map(PointOutcome::first_error)
        .collect();
    let calib: Vec<f64> = outcomes.iter().filter_map(|o| o.calibration).collect();
    let manifest = Manifest {
        schema_version: crate::scenario::SCHEMA_VERSION,
        code_version: env!("CARGO_PKG_VERSION"),
        created_unix_seconds: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs()),
        scenario: s,
        points: grid.points.len(),
        failed_points: failed.len(),
        axes: grid
            .axes
            .iter()
            .map(|(n, v)| (n.as_str(), v.as_slice()))
            .collect(),
        files: files
            .iter()
            .filter_map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned()))
            .collect(),
        normalization_calibration: (!calib.is_empty()).then(|| Calibration {
            min: calib.iter().copied().fold(f64::INFINITY, f64::min),
            max: calib.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }),
        worker_threads: jobs.max(1),
    };
    let manifest_path = dir.join("manifest.json");
    fs::write(
        &manifest_path,
        serde_json::to_string_pretty(&manifest)? + "\n",
    )?;

    if !grid.points.is_empty() && failed.len() == grid.points.len() {
        return Err(CliError::AllPointsFailed {
            scenario: s.name.clone(),
            points: grid.points.len(),
            first: failed[0].to_string(),
        });
    }
    files.push(manifest_path);
    Ok(RunSummary {
        scenario: s.name.clone(),
        dir,
        points: grid.points.len(),
        failed_points: failed.len(),
        files,
    })
}

/// Runs every scenario of a document.
pub fn run_document(
    doc: &ConfigDocument,
    out: &Path,
    jobs: usize,
) -> Result<Vec<RunSummary>, CliError> {
    doc.scenarios
        .iter()
        .map(|s| run_scenario(s, out, jobs))
        .collect()
}

/// Regime diagnostics for every point of every scenario, without running the physics.
#[derive(Debug, Clone)]
pub struct ValidationTable {
    pub scenario: String,
    pub grid: Grid,
    pub reports: Vec<Outcome<RegimeReport>>,
}

impl ValidationTable {
    /// Points whose regime report is valid.
    pub fn valid_points(&self) -> usize {
        self.reports
            .iter()
            .filter(|r| r.as_ref().is_ok_and(RegimeReport::is_valid))
            .count()
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = axis_header(&self.grid);
        header.extend(regime_columns().into_iter().map(String::from));
        header.push("error".into());
        w.write_record(&header)?;
        for (c, r) in self.grid.coords.iter().zip(&self.reports) {
            let (mut cells, err) = regime_cells(r);
            cells.push(err);
            w.write_record(with_coords(c, cells))?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn validate_document(doc: &ConfigDocument) -> Result<Vec<ValidationTable>, CliError> {
    doc.scenarios
        .iter()
        .map(|s| {
            let grid = s
                .grid()
                .map_err(|m| CliError::Config(format!("in scenario `{}`: {m}", s.name)))?;
            let reports = grid
                .points
                .iter()
                .map(|pt| regime_at(s.protocol, pt))
                .collect();
            Ok(ValidationTable {
                scenario: s.name.clone(),
                grid,
                reports,
            })
        })
        .collect()
}

/// Dense Wigner grid of the heralded state at grid point `index`.
pub fn wigner_at<W: std::io::Write>(
    s: &Scenario,
    index: usize,
    window: &WignerWindow,
    out: W,
) -> Result<f64, CliError> {
    let grid = s
        .grid()
        .map_err(|m| CliError::Config(format!("in scenario `{}`: {m}", s.name)))?;
    let pt = grid.points.get(index).ok_or_else(|| {
        CliError::Config(format!(
            "point index {index} out of range (scenario `{}` has {} points)",
            s.name,
            grid.points.len()
        ))
    })?;
    if pt.detector.is_none() {
        return Err(CliError::Config(format!(
            "scenario `{}` has no `detector` to herald with",
            s.name
        )));
    }
    let (p_click, state) =
        herald_at(s.protocol, pt).map_err(|first| CliError::AllPointsFailed {
            scenario: s.name.clone(),
            points: 1,
            first,
        })?;
    heralded_core::negativity::write_wigner_grid(
        |x, p| state.wigner(x, p),
        window.half_width,
        window.points,
        out,
    )?;
    Ok(p_click)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::ConfigDocument;

    fn doc(body: &str) -> ConfigDocument {
        ConfigDocument::parse(&format!(
            r#"{{"schema_version": 1, "scenarios": [{body}]}}"#
        ))
        .unwrap()
    }

    #[test]
    fn pulsed_point_reproduces_closed_forms() {
        let d = doc(
            r#"{"name": "p", "protocol": "pulsed", "params": {"kappa": 0.3, "g": 0.09, "delta": -1, "n0": 0.1, "tau": 10},
               "detector": {"eta": 0.6}, "outputs": ["E_N", "p_click", "N_W", "regime_report"]}"#,
        );
        let s = &d.scenarios[0];
        let grid = s.grid().unwrap();
        let o = evaluate_point(s, &grid.points[0]);
        let p = o.p_click.unwrap().unwrap();
        assert!((p - 0.0871).abs() < 5e-4, "{p}");
        assert!(o.log_negativity.unwrap().unwrap() > 0.0);
        assert!(o.negativity.unwrap().unwrap().n_w < 0.0);
        assert!(o.regime.unwrap().unwrap().inside_rwa_window);
    }

    #[test]
    fn zero_duration_reports_error_but_keeps_closed_form() {
        let d = doc(
            r#"{"name": "p", "protocol": "pulsed", "params": {"kappa": 0.3, "g": 0.09, "delta": -1, "n0": 0.0, "tau": 0},
               "detector": {"eta": 0.6}, "outputs": ["p_click", "N_W"]}"#,
        );
        let s = &d.scenarios[0];
        let o = evaluate_point(s, &s.grid().unwrap().points[0]);
        assert_eq!(o.p_click.unwrap().unwrap(), 0.0);
        assert!(o.negativity.unwrap().is_err());
    }

    #[test]
    fn uncoupled_config_is_always_valid() {
        let d = doc(
            r#"{"name": "p", "protocol": "pulsed", "params": {"kappa": 0.05, "g": 0, "delta": -1, "tau": 1000},
               "outputs": ["regime_report"]}"#,
        );
        let t = validate_document(&d).unwrap();
        let r = t[0].reports[0].as_ref().unwrap();
        assert!(r.inside_rwa_window);
        assert!(r.rwa_upper.is_infinite());
    }
}
