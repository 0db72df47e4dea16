//! Runs validated experiments and writes their outputs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use ptssh_core::dynamics::{front_speed, reflection_signal_with, run_quenches, LightCone, QuenchProtocol};
use ptssh_core::exec::{self, Execution};
use ptssh_core::lattice::{build_hamiltonian, pt_symmetry_check, HybridChainSpec};
use ptssh_core::scatter::{reflection_sweep, PotentialStack, StackSpec};
use ptssh_core::spectral::{band_sweep, decompose, edge_overlap_with, find_edge_states_with, EdgeSide, Side};

use crate::config::{BatchConfig, Command, EdgeParams, ExperimentConfig, Plan, QuenchParams};
use crate::export::{num, Axis, Emitter, FileRecord, Svg, PALETTE};
use crate::ExperimentError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Failed,
}

/// Contents of an experiment's `manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub tool: String,
    pub version: String,
    pub name: String,
    pub command: Command,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub files: Vec<FileRecord>,
    pub summary: Value,
}

fn computation(e: impl std::fmt::Display) -> ExperimentError {
    ExperimentError::Computation(e.to_string())
}

fn provenance(config: &ExperimentConfig) -> String {
    let mut clean = config.clone();
    clean.output_dir = None;
    clean.emit = None;
    json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "config": clean,
    })
    .to_string()
}

fn side_name(side: Side) -> &'static str {
    match side {
        Side::Left => "left",
        Side::Right => "right",
    }
}

/// Validates `config`, runs it and writes its files plus `manifest.json`
/// into `out_dir`. Nothing is written when validation fails; a failed
/// computation still leaves a manifest with status `failed`.
pub fn run_experiment(config: &ExperimentConfig, out_dir: &Path) -> Result<ExperimentReport, ExperimentError> {
    let plan = config.plan()?;
    let command = config.command.expect("plan() requires a command");
    let mut emitter = Emitter::new(out_dir.to_path_buf(), config.emit_set(), provenance(config));
    let outcome = execute(&plan, &mut emitter);
    let mut report = ExperimentReport {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        name: config.dir_name(),
        command,
        status: Status::Ok,
        error: None,
        files: Vec::new(),
        summary: Value::Null,
    };
    let outcome = outcome.and_then(|summary| {
        emitter.json("summary.json", &summary)?;
        Ok(summary)
    });
    match &outcome {
        Ok(summary) => report.summary = summary.clone(),
        Err(e) => {
            report.status = Status::Failed;
            report.error = Some(e.to_string());
        }
    }
    report.files = emitter.files.clone();
    emitter.manifest(&report)?;
    outcome.map(|_| report)
}

fn execute(plan: &Plan, out: &mut Emitter) -> Result<Value, ExperimentError> {
    match plan {
        Plan::Spectrum(chain) => spectrum(chain, out),
        Plan::EdgeStates(chain, params) => edge_states(chain, params, out),
        Plan::BandSweep(chain, vs) => bands(chain, vs, out),
        Plan::Quench { protocols, params } => quench(protocols, params, out),
        Plan::ScatterSweep { spec, stack, energies } => scatter(spec, stack, energies, out),
    }
}

fn spectrum(chain: &HybridChainSpec, out: &mut Emitter) -> Result<Value, ExperimentError> {
    let h = build_hamiltonian(chain).map_err(computation)?;
    let dec = decompose(&h, false).map_err(computation)?;
    out.csv(
        "spectrum.csv",
        None,
        &["re_E".into(), "im_E".into()],
        dec.eigenvalues.iter().map(|e| vec![num(e.re), num(e.im)]),
    )?;
    let pts: Vec<(f64, f64)> = dec.eigenvalues.iter().map(|e| (e.re, e.im)).collect();
    let mut svg = Svg::new(
        &format!("Spectrum, v = {}, w = {}", chain.v, chain.w),
        "Re E",
        "Im E",
        Axis::fit(pts.iter().map(|p| p.0)),
        Axis::fit(pts.iter().map(|p| p.1).chain([0.0])),
    );
    svg.points(&pts, PALETTE[0], 2.5);
    out.svg("spectrum.svg", None, svg)?;
    Ok(json!({
        "n_sites": chain.n_sites,
        "pt_symmetric": pt_symmetry_check(&h, chain),
        "max_abs_im": dec.max_abs_im(),
        "min_abs_re": dec.min_abs_re(),
        "defective": dec.defective.len(),
    }))
}

fn edge_states(chain: &HybridChainSpec, params: &EdgeParams, out: &mut Emitter) -> Result<Value, ExperimentError> {
    let criteria = params.criteria();
    let dec = decompose(&build_hamiltonian(chain).map_err(computation)?, false).map_err(computation)?;
    let reports = find_edge_states_with(&dec, &criteria);

    let mut overlaps = serde_json::Map::new();
    if params.compare_plain {
        let plain = decompose(&build_hamiltonian(&chain.plain()).map_err(computation)?, false).map_err(computation)?;
        for side in [Side::Left, Side::Right] {
            let value = match edge_overlap_with(&dec, &plain, side, &criteria) {
                Ok(o) => json!(o),
                Err(e) => json!({ "error": e.to_string() }),
            };
            overlaps.insert(side_name(side).into(), value);
        }
    }

    let labels: Vec<String> = reports
        .iter()
        .enumerate()
        .map(|(k, r)| {
            let side = match r.side {
                EdgeSide::Left => "left",
                EdgeSide::Right => "right",
                EdgeSide::Delocalized => "delocalized",
            };
            format!("edge_state_{}_{side}", k + 1)
        })
        .collect();
    for (r, label) in reports.iter().zip(&labels) {
        let extra = json!({ "index": r.index, "energy": [r.energy.re, r.energy.im], "side": r.side });
        out.csv(
            &format!("{label}.csv"),
            Some(&extra),
            &["site".into(), "re_psi".into(), "im_psi".into()],
            r.amplitudes
                .iter()
                .enumerate()
                .map(|(i, z)| vec![(i + 1).to_string(), num(z.re), num(z.im)]),
        )?;
    }

    if out.wants(crate::Format::Svg) {
        let mut svg = Svg::new(
            &format!("Edge states, v = {}, w = {}", chain.v, chain.w),
            "site",
            "|psi|^2",
            Axis::linear(1.0, chain.n_sites as f64),
            Axis::fit(
                reports
                    .iter()
                    .flat_map(|r| r.amplitudes.iter().map(|z| z.norm_sqr()))
                    .chain([0.0]),
            ),
        );
        let mut legend = Vec::new();
        for (k, r) in reports.iter().enumerate() {
            let color = PALETTE[k % PALETTE.len()];
            let pts: Vec<(f64, f64)> = r
                .amplitudes
                .iter()
                .enumerate()
                .map(|(i, z)| ((i + 1) as f64, z.norm_sqr()))
                .collect();
            svg.polyline(&pts, color);
            legend.push((labels[k].as_str(), color));
        }
        svg.legend(&legend);
        out.svg("edge_profiles.svg", None, svg)?;
    }

    Ok(json!({
        "n_edge_states": reports.len(),
        "states": reports,
        "overlap_with_plain": overlaps,
    }))
}

fn bands(chain: &HybridChainSpec, vs: &[f64], out: &mut Emitter) -> Result<Value, ExperimentError> {
    let table = band_sweep(chain, vs).map_err(computation)?;
    out.csv(
        "band_sweep.csv",
        None,
        &["v".into(), "re_E".into(), "im_E".into()],
        table.rows.iter().flat_map(|row| {
            row.eigenvalues
                .iter()
                .map(move |e| vec![num(row.v), num(e.re), num(e.im)])
        }),
    )?;
    out.json("band_sweep.json", &table)?;
    out.csv(
        "band_summary.csv",
        None,
        &["v".into(), "min_abs_re".into(), "max_abs_im".into()],
        table
            .rows
            .iter()
            .map(|r| vec![num(r.v), num(r.min_abs_re()), num(r.max_abs_im())]),
    )?;
    if out.wants(crate::Format::Svg) {
        let v_axis = Axis::fit(table.rows.iter().map(|r| r.v));
        for (name, title, part) in [
            (
                "band_re.svg",
                "Re E",
                (|e: &ptssh_core::linalg::C64| e.re) as fn(&_) -> f64,
            ),
            ("band_im.svg", "Im E", |e| e.im),
        ] {
            let pts: Vec<(f64, f64)> = table
                .rows
                .iter()
                .flat_map(|r| r.eigenvalues.iter().map(move |e| (r.v, part(e))))
                .collect();
            let mut svg = Svg::new(
                &format!("{title} vs v, w = {}", chain.w),
                "v",
                title,
                v_axis,
                Axis::fit(pts.iter().map(|p| p.1).chain([0.0])),
            );
            svg.points(&pts, PALETTE[0], 1.5);
            out.svg(name, None, svg)?;
        }
    }
    let peak = table
        .rows
        .iter()
        .max_by(|a, b| a.max_abs_im().total_cmp(&b.max_abs_im()))
        .expect("sweep has rows");
    Ok(json!({
        "rows": table.rows.iter().map(|r| json!({
            "v": r.v,
            "min_abs_re": r.min_abs_re(),
            "max_abs_im": r.max_abs_im(),
        })).collect::<Vec<_>>(),
        "max_abs_im_peak_v": peak.v,
    }))
}

fn quench_outputs(cone: &LightCone, params: &QuenchParams, out: &mut Emitter) -> Result<Value, ExperimentError> {
    let protocol = &cone.protocol;
    let side = side_name(protocol.initial_side);
    let extra = json!({ "protocol": protocol });
    let n = cone.n_sites();

    let data = if params.renormalize_csv {
        cone.renormalized()
    } else {
        cone.density.clone()
    };
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|s| s.to_string()));
    out.csv(
        &format!("lightcone_{side}.csv"),
        Some(&extra),
        &header,
        cone.times.iter().zip(&data).map(|(t, row)| {
            let mut r = vec![num(*t)];
            r.extend(row.iter().map(|p| num(*p)));
            r
        }),
    )?;
    if out.wants(crate::Format::Svg) {
        let heat = if params.renormalize_heatmap {
            cone.renormalized()
        } else {
            cone.density.clone()
        };
        let mut svg = Svg::new(
            &format!(
                "Quench v: {} -> {}, {side} edge",
                protocol.pre_spec.v, protocol.post_spec.v
            ),
            "site",
            "t",
            Axis::linear(0.5, n as f64 + 0.5),
            Axis::reversed(0.0, protocol.t_max),
        );
        svg.heatmap(&heat);
        out.svg(&format!("lightcone_{side}.svg"), Some(&extra), svg)?;
    }

    let site = protocol.origin_site();
    let signal = reflection_signal_with(cone, site, params.dip_fraction).map_err(computation)?;
    out.csv(
        &format!("reflection_{side}.csv"),
        Some(&extra),
        &["t".into(), format!("P_{site}")],
        signal.series.iter().map(|(t, p)| vec![num(*t), num(*p)]),
    )?;
    if out.wants(crate::Format::Svg) {
        let mut svg = Svg::new(
            &format!("Probability at site {site}"),
            "t",
            &format!("P({site}, t)"),
            Axis::linear(0.0, protocol.t_max),
            Axis::fit(signal.series.iter().map(|s| s.1).chain([0.0])),
        );
        svg.polyline(&signal.series, PALETTE[0]);
        out.svg(&format!("reflection_{side}.svg"), Some(&extra), svg)?;
    }

    let speed = match front_speed(cone) {
        Ok(v) => json!(v),
        Err(e) => json!({ "error": e.to_string() }),
    };
    Ok(json!({
        "initial_side": side,
        "origin_site": site,
        "t_max": protocol.t_max,
        "n_time_steps": protocol.n_time_steps,
        "reemergence_peak": signal.reemergence_peak,
        "dip_interval": [signal.dip_interval.0, signal.dip_interval.1],
        "dip_threshold": signal.threshold,
        "final_norm": cone.norm_series.last(),
        "max_norm": cone.norm_series.iter().copied().fold(0.0, f64::max),
        "front_speed": speed,
    }))
}

fn quench(protocols: &[QuenchProtocol], params: &QuenchParams, out: &mut Emitter) -> Result<Value, ExperimentError> {
    let mut runs = Vec::new();
    let mut peaks = Vec::new();
    for result in run_quenches(protocols, Execution::default()) {
        let cone = result.map_err(computation)?;
        let summary = quench_outputs(&cone, params, out)?;
        peaks.push((
            cone.protocol.initial_side,
            summary["reemergence_peak"].as_f64().unwrap_or(f64::NAN),
        ));
        runs.push(summary);
    }
    let mut summary = json!({ "runs": runs });
    let peak = |s| peaks.iter().find(|p| p.0 == s).map(|p| p.1);
    if let (Some(l), Some(r)) = (peak(Side::Left), peak(Side::Right)) {
        summary["asymmetry_ratio_right_over_left"] = json!(r / l);
    }
    Ok(summary)
}

fn scatter(
    spec: &StackSpec,
    stack: &PotentialStack,
    energies: &[f64],
    out: &mut Emitter,
) -> Result<Value, ExperimentError> {
    let sweep = reflection_sweep(stack, energies);
    if sweep.results.is_empty() {
        return Err(computation(format!(
            "every energy failed; first: {}",
            sweep.failures.first().map_or("none", |f| f.message.as_str())
        )));
    }
    out.csv(
        "scatter.csv",
        None,
        &[
            "E".into(),
            "r_left".into(),
            "r_right".into(),
            "transmission".into(),
            "abs_r_left_minus_r_right".into(),
        ],
        sweep.results.iter().map(|r| {
            vec![
                num(r.energy),
                num(r.r_left),
                num(r.r_right),
                num(r.transmission),
                num(r.asymmetry()),
            ]
        }),
    )?;
    if out.wants(crate::Format::Svg) {
        let left: Vec<(f64, f64)> = sweep.results.iter().map(|r| (r.energy, r.r_left)).collect();
        let right: Vec<(f64, f64)> = sweep.results.iter().map(|r| (r.energy, r.r_right)).collect();
        let (lo, hi) = (left[0].0, left[left.len() - 1].0);
        let x = if lo > 0.0 && hi / lo > 10.0 {
            Axis::log(lo, hi)
        } else {
            Axis::fit(left.iter().map(|p| p.0))
        };
        let mut svg = Svg::new(
            &format!("Reflection, u = {} -/+ {}i", spec.u_re, spec.u_im),
            "E",
            "R",
            x,
            Axis::fit(left.iter().chain(&right).map(|p| p.1).chain([0.0])),
        );
        svg.polyline(&left, PALETTE[0]);
        svg.polyline(&right, PALETTE[1]);
        svg.legend(&[("R_L", PALETTE[0]), ("R_R", PALETTE[1])]);
        out.svg("scatter.svg", None, svg)?;
    }
    let worst = sweep.max_asymmetry().expect("non-empty");
    let flux = sweep
        .results
        .iter()
        .map(|r| (r.r_left + r.transmission - 1.0).abs())
        .fold(0.0, f64::max);
    Ok(json!({
        "n_energies": energies.len(),
        "max_abs_r_left_minus_r_right": worst.asymmetry(),
        "at_energy": worst.energy,
        "max_flux_deviation": flux,
        "failures": sweep.failures,
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchEntry {
    pub name: String,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub experiments: Vec<BatchEntry>,
    #[serde(skip)]
    pub exit_code: i32,
}

/// Runs every experiment of `batch` in its own subdirectory of `out_root`.
pub fn run_batch(batch: &BatchConfig, out_root: &Path, exec: Execution) -> Result<BatchReport, ExperimentError> {
    batch.validate()?;
    let dirs: Vec<(PathBuf, &ExperimentConfig)> = batch
        .experiment
        .iter()
        .map(|e| (out_root.join(e.dir_name()), e))
        .collect();
    let results = exec::map(&dirs, exec, |(dir, cfg)| run_experiment(cfg, dir));
    let mut exit_code = 0;
    let experiments = batch
        .experiment
        .iter()
        .zip(results)
        .map(|(cfg, r)| {
            let (status, error) = match r {
                Ok(_) => (Status::Ok, None),
                Err(e) => {
                    exit_code = exit_code.max(e.exit_code());
                    (Status::Failed, Some(e.to_string()))
                }
            };
            BatchEntry {
                name: cfg.dir_name(),
                status,
                error,
            }
        })
        .collect();
    let report = BatchReport { experiments, exit_code };
    let emitter = Emitter::new(out_root.to_path_buf(), Default::default(), String::new());
    emitter.manifest(&report)?;
    Ok(report)
}
