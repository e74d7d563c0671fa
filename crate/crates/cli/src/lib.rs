//! Sweep commands behind the `kerrcat` binary.

pub mod config;
pub mod output;

use std::f64::consts::PI;
use std::path::PathBuf;

use kerrcat::catspace::CatModel;
use kerrcat::dynamics::{self, FidelityColumn, FullMethod, InitialState};
use kerrcat::exceptional::{self, EpPoint, Lep2Options};
use kerrcat::fock::{self, Parity};
use kerrcat::linalg::{self, C64};
use kerrcat::liouville;
use kerrcat::winding::{self, Contour, WindingOptions};
use kerrcat::ModelParams;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use config::{ContourSpec, RunConfig, WignerState};
use output::{Run, Table};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl From<kerrcat::Error> for CliError {
    fn from(e: kerrcat::Error) -> Self {
        use kerrcat::Error as E;
        match e {
            E::Domain(_) | E::DimensionMismatch { .. } | E::Truncation { .. } => CliError::Config(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Spectrum,
    EpMap,
    Lep3,
    Winding,
    Fidelity,
    Wigner,
    SteadyState,
}

/// Runs `command` and returns the path of its `summary.json`.
pub fn run(command: Command, config: &RunConfig) -> Result<PathBuf, CliError> {
    config.validate()?;
    // parallelism comes from the sweep jobs only, keeping outputs bitwise
    // independent of the worker count
    linalg::use_sequential_kernels();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| CliError::Config(format!("worker pool: {e}")))?;
    pool.install(|| match command {
        Command::Spectrum => cmd_spectrum(config),
        Command::EpMap => cmd_ep_map(config),
        Command::Lep3 => cmd_lep3(config),
        Command::Winding => cmd_winding(config),
        Command::Fidelity => cmd_fidelity(config),
        Command::Wigner => cmd_wigner(config),
        Command::SteadyState => cmd_steady_state(config),
    })
}

fn model_of(config: &RunConfig) -> Result<(ModelParams, CatModel), CliError> {
    let params = config.model.params()?;
    Ok((params, CatModel::from_params(&params)))
}

/// Orders `numeric` to sit closest to `reference`, minimizing the largest distance.
fn match_to(reference: &[C64; 4], numeric: &[C64]) -> ([C64; 4], f64) {
    let mut best = ([C64::new(f64::NAN, f64::NAN); 4], f64::INFINITY);
    let mut idx = [0usize, 1, 2, 3];
    permute(&mut idx, 0, &mut |p| {
        let d = (0..4).map(|k| (reference[k] - numeric[p[k]]).norm()).fold(0.0, f64::max);
        if d < best.1 {
            best = ([numeric[p[0]], numeric[p[1]], numeric[p[2]], numeric[p[3]]], d);
        }
    });
    best
}

fn permute(idx: &mut [usize; 4], k: usize, f: &mut impl FnMut(&[usize; 4])) {
    if k == idx.len() {
        f(idx);
        return;
    }
    for i in k..idx.len() {
        idx.swap(k, i);
        permute(idx, k + 1, f);
        idx.swap(k, i);
    }
}

pub fn cmd_spectrum(config: &RunConfig) -> Result<PathBuf, CliError> {
    let (_, model) = model_of(config)?;
    let sc = &config.spectrum;
    let eps = sc.eps.values("spectrum.eps")?;
    let delta = sc.delta.values("spectrum.delta")?;
    let points: Vec<(f64, f64)> = eps.iter().flat_map(|&e| delta.iter().map(move |&d| (e, d))).collect();
    let rows: Vec<(Vec<f64>, f64)> = points
        .par_iter()
        .map(|&(e, d)| {
            let inv = model.invariants(e, d);
            let s = inv.spectrum();
            let mut row = vec![e, d];
            for z in [s.e2, s.e3, s.e4] {
                row.extend([z.re, z.im]);
            }
            row.extend([inv.q, inv.m]);
            let mut diff = 0.0;
            if sc.numeric {
                let num = model.reduced(e, d).numeric_eigenvalues()?;
                let (matched, d) = match_to(&s.as_array(), &num);
                diff = d;
                for z in &matched[1..] {
                    row.extend([z.re, z.im]);
                }
            }
            Ok((row, diff))
        })
        .collect::<Result<_, CliError>>()?;
    let mut columns = vec!["eps", "delta", "re_E2", "im_E2", "re_E3", "im_E3", "re_E4", "im_E4", "q", "m"];
    if sc.numeric {
        columns.extend(["re_N2", "im_N2", "re_N3", "im_N3", "re_N4", "im_N4"]);
    }
    let mut table = Table::new(&columns);
    let mut max_diff: f64 = 0.0;
    for (row, d) in rows {
        max_diff = max_diff.max(d);
        table.push(row);
    }
    table.sort_by_keys(2);
    let mut run = Run::new("spectrum", config)?;
    run.result("rows", table.len());
    run.write_table("spectrum.csv", &table)?;
    if sc.numeric {
        let tol = config.tolerances.spectral;
        run.result("max_closed_minus_numeric", max_diff);
        run.check("closed_vs_numeric", max_diff, tol, max_diff < tol);
    }
    run.finish()
}

fn ep_row(p: &EpPoint) -> Vec<f64> {
    vec![p.eps, p.delta, p.order as f64, p.disc_residual, p.q, p.m, p.coalescence]
}

const EP_COLUMNS: [&str; 7] = ["eps", "delta", "order", "disc_residual", "q", "m", "coalescence"];

pub fn cmd_ep_map(config: &RunConfig) -> Result<PathBuf, CliError> {
    let (_, model) = model_of(config)?;
    let ec = &config.ep_map;
    if ec.eps.points == 0 {
        ec.eps.values("ep_map.eps")?;
    }
    if ec.n_delta < 2 {
        return Err(CliError::Config("ep_map.n_delta must be at least 2".into()));
    }
    let opts = Lep2Options {
        n_delta: ec.n_delta,
        delta_max: ec.delta_max,
        refine: true,
    };
    let trace = exceptional::lep2_trace(&model, (ec.eps.start, ec.eps.stop), ec.eps.points, &opts)?;
    let lep3 = exceptional::lep3_closed_form(&model)?;
    let mut table = Table::new(&EP_COLUMNS);
    for p in trace.points().chain(lep3.iter()) {
        table.push(ep_row(p));
    }
    table.sort_by_keys(3);
    let mut run = Run::new("ep-map", config)?;
    run.result("lep2_points", trace.points().count());
    run.result("curves", trace.curves.len());
    run.result("terminations", &trace.terminations);
    run.result("lep3", &lep3);
    run.check("lep3_images", lep3.len() as f64, 4.0, lep3.len() == 4);
    run.write_table("ep_map.csv", &table)?;
    run.finish()
}

pub fn cmd_lep3(config: &RunConfig) -> Result<PathBuf, CliError> {
    let (_, model) = model_of(config)?;
    let closed = exceptional::lep3_closed_form(&model)?;
    let scale = model.rate_scale();
    let refined: Vec<(EpPoint, EpPoint)> = closed
        .par_iter()
        .map(|p| Ok((*p, exceptional::lep3_numeric(&model, (1.05 * p.eps, 0.95 * p.delta))?)))
        .collect::<Result<_, CliError>>()?;
    let mut table = Table::new(&EP_COLUMNS);
    let mut worst_rel: f64 = 0.0;
    let mut worst_spread: f64 = 0.0;
    let mut worst_coal: f64 = 1.0;
    let mut report = Vec::new();
    for (c, n) in &refined {
        table.push(ep_row(c));
        let rel = ((n.eps - c.eps) / c.eps).abs().max(((n.delta - c.delta) / c.delta).abs());
        let spread = model.spectrum(c.eps, c.delta).max_spread() / scale;
        worst_rel = worst_rel.max(rel);
        worst_spread = worst_spread.max(spread);
        worst_coal = worst_coal.min(c.coalescence);
        report.push(json!({
            "closed_form": c, "newton": n, "relative_difference": rel, "relative_spread": spread,
        }));
    }
    table.sort_by_keys(2);
    let mut run = Run::new("lep3", config)?;
    run.result("points", report);
    run.check("newton_vs_closed_form", worst_rel, 1e-8, worst_rel < 1e-8);
    run.check("eigenvalue_spread", worst_spread, 1e-8, worst_spread < 1e-8);
    run.check("coalescence", worst_coal, 1.0 - 1e-3, worst_coal > 1.0 - 1e-3);
    run.write_table("lep3.csv", &table)?;
    run.finish()
}

#[derive(Debug, Clone, Serialize)]
struct WindingReport {
    index: usize,
    spec: ContourSpec,
    center: Option<(f64, f64)>,
    radius: Option<f64>,
    samples: usize,
    raw: f64,
    #[serde(rename = "W")]
    w: i64,
    bisections: usize,
    min_norm: f64,
}

fn contour_of(spec: &ContourSpec, model: &CatModel) -> Result<(Contour, Option<(f64, f64)>, Option<f64>), CliError> {
    let circle = |center: (f64, f64), radius: f64| -> Result<_, CliError> {
        Ok((Contour::circle(center, radius)?, Some(center), Some(radius)))
    };
    match spec {
        ContourSpec::Circle { center, radius } => circle(*center, *radius),
        ContourSpec::Polyline { vertices } => Ok((Contour::polyline(vertices.clone())?, None, None)),
        ContourSpec::Scaled { center, radius } => {
            let (e3, d3) = exceptional::lep3_magnitudes(model)?;
            circle((center.0 * e3, center.1 * d3), radius * e3)
        }
        ContourSpec::Lep2 { radius } => {
            let (e3, _) = exceptional::lep3_magnitudes(model)?;
            circle((0.0, exceptional::lep2_delta_at_zero_drive(model)), radius * e3)
        }
    }
}

pub fn cmd_winding(config: &RunConfig) -> Result<PathBuf, CliError> {
    let (_, model) = model_of(config)?;
    let wc = &config.winding;
    if wc.contours.is_empty() {
        return Err(CliError::Config("winding.contours is empty; add at least one contour".into()));
    }
    if wc.samples < 8 {
        return Err(CliError::Config("winding.samples must be at least 8".into()));
    }
    let oracle = winding::resultant_identity_error(1000, config.seed)?;
    let opts = WindingOptions {
        route: wc.route,
        ..Default::default()
    };
    let results: Vec<(WindingReport, Table)> = wc
        .contours
        .par_iter()
        .enumerate()
        .map(|(index, spec)| {
            let (contour, center, radius) = contour_of(spec, &model)?;
            let contour = contour.with_samples(wc.samples);
            let res = winding::winding_number(&contour, &model, &opts)?;
            let mut table = Table::new(&["phi", "r1_norm", "r2_norm"]);
            for p in winding::winding_trajectory(&contour, &model, wc.route)? {
                table.push(vec![p.phi, p.r1_norm, p.r2_norm]);
            }
            let report = WindingReport {
                index,
                spec: spec.clone(),
                center,
                radius,
                samples: res.samples,
                raw: res.raw,
                w: res.winding,
                bisections: res.bisections,
                min_norm: res.min_norm,
            };
            Ok((report, table))
        })
        .collect::<Result<_, CliError>>()?;
    let mut run = Run::new("winding", config)?;
    run.check("resultant_identity", oracle, winding::IDENTITY_TOL, oracle < winding::IDENTITY_TOL);
    let tol = config.tolerances.winding_quantization;
    let mut reports = Vec::new();
    for (report, mut table) in results {
        let dev = (report.raw - report.w as f64).abs();
        run.check(&format!("quantized_{}", report.index), dev, tol, dev < tol);
        table.sort_by_keys(1);
        run.write_table(&format!("winding_{}.csv", report.index), &table)?;
        reports.push(report);
    }
    run.write_json("winding.json", &reports)?;
    run.result("windings", &reports);
    run.finish()
}

#[derive(Debug, Clone, Copy, Serialize)]
struct MapSummary {
    initial: InitialState,
    drive_on: bool,
    min_fidelity: f64,
    min_final_fidelity: f64,
    max_leakage: f64,
    max_trace_drift: f64,
    max_hermiticity: f64,
    min_eigenvalue: f64,
    reduced_expm_columns: usize,
}

pub fn cmd_fidelity(config: &RunConfig) -> Result<PathBuf, CliError> {
    let (base, _) = model_of(config)?;
    let fc = &config.fidelity;
    let deltas = fc.delta_mhz.values("fidelity.delta_mhz")?;
    let times = fc.t_us.values("fidelity.t_us")?;
    if fc.initial.is_empty() || fc.drive_on.is_empty() {
        return Err(CliError::Config("fidelity.initial and fidelity.drive_on must be non-empty".into()));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(CliError::Config("fidelity.t_us must be increasing".into()));
    }
    let jobs: Vec<(bool, f64)> = fc
        .drive_on
        .iter()
        .flat_map(|&on| deltas.iter().map(move |&d| (on, d)))
        .collect();
    let dim = config.dim;
    let columns: Vec<(bool, Vec<FidelityColumn>)> = jobs
        .par_iter()
        .map(|&(on, d_mhz)| {
            let params = dynamics::sweep_params(&base, 2.0 * PI * d_mhz, on);
            log::info!("fidelity column delta = {d_mhz} MHz, drive {}", if on { "on" } else { "off" });
            let cols = dynamics::fidelity_columns(&fc.initial, &params, &times, dim, FullMethod::Auto)?;
            Ok((on, cols))
        })
        .collect::<Result<_, CliError>>()?;

    let mut run = Run::new("fidelity", config)?;
    let mut summaries = Vec::new();
    for &on in &fc.drive_on {
        for &init in &fc.initial {
            let mut table = Table::new(&["delta_MHz", "t_us", "fidelity", "leakage"]);
            let mut s = MapSummary {
                initial: init,
                drive_on: on,
                min_fidelity: f64::INFINITY,
                min_final_fidelity: f64::INFINITY,
                max_leakage: f64::NEG_INFINITY,
                max_trace_drift: 0.0,
                max_hermiticity: 0.0,
                min_eigenvalue: f64::INFINITY,
                reduced_expm_columns: 0,
            };
            for col in columns.iter().filter(|c| c.0 == on).flat_map(|c| &c.1).filter(|c| c.initial == init) {
                let d_mhz = col.delta / (2.0 * PI);
                for (k, &t) in col.times.iter().enumerate() {
                    table.push(vec![d_mhz, t, col.fidelity[k], col.leakage[k]]);
                    s.min_fidelity = s.min_fidelity.min(col.fidelity[k]);
                    s.max_leakage = s.max_leakage.max(col.leakage[k]);
                }
                s.min_final_fidelity = s.min_final_fidelity.min(*col.fidelity.last().expect("non-empty grid"));
                s.max_trace_drift = s.max_trace_drift.max(col.full.max_trace_drift);
                s.max_hermiticity = s.max_hermiticity.max(col.full.max_hermiticity);
                s.min_eigenvalue = s.min_eigenvalue.min(col.full.min_eigenvalue);
                if col.reduced.method == dynamics::Method::MatrixExponential {
                    s.reduced_expm_columns += 1;
                }
            }
            table.sort_by_keys(2);
            let tag = format!("{}_{}", init.name(), if on { "eps-on" } else { "eps-off" });
            let tol = &config.tolerances;
            run.check(&format!("min_fidelity_{tag}"), s.min_fidelity, tol.fidelity_min, s.min_fidelity > tol.fidelity_min);
            run.check(
                &format!("final_fidelity_{tag}"),
                s.min_final_fidelity,
                tol.fidelity_final,
                s.min_final_fidelity > tol.fidelity_final,
            );
            run.check(&format!("trace_drift_{tag}"), s.max_trace_drift, 1e-8, s.max_trace_drift < 1e-8);
            run.check(&format!("hermiticity_{tag}"), s.max_hermiticity, 1e-10, s.max_hermiticity < 1e-10);
            run.check(&format!("min_eigenvalue_{tag}"), s.min_eigenvalue, -1e-8, s.min_eigenvalue >= -1e-8);
            run.write_table(&format!("fidelity_{tag}.csv"), &table)?;
            summaries.push(s);
        }
    }
    run.result("maps", &summaries);
    run.finish()
}

fn full_state(config: &RunConfig, which: WignerState) -> Result<(ModelParams, linalg::ComplexMatrix), CliError> {
    let params = config.model.params()?;
    let dim = config.dim;
    let alpha = params.alpha();
    let rho = match which {
        WignerState::SteadyState => {
            let l = liouville::kerr_cat_liouvillian(&params, dim)?;
            liouville::steady_state(&l)?.into_matrix()
        }
        WignerState::CatPlus => fock::cat_state(alpha, Parity::Even, dim)?.projector(),
        WignerState::CatMinus => fock::cat_state(alpha, Parity::Odd, dim)?.projector(),
        WignerState::Coherent => fock::coherent_state(alpha, dim)?.projector(),
    };
    Ok((params, rho))
}

pub fn cmd_wigner(config: &RunConfig) -> Result<PathBuf, CliError> {
    let wc = &config.wigner;
    let xs = wc.x.values("wigner.x")?;
    let ps = wc.p.values("wigner.p")?;
    let (_, rho) = full_state(config, wc.state)?;
    let rows: Vec<Vec<f64>> = xs
        .par_iter()
        .map(|&x| Ok(fock::wigner(&rho, &[x], &ps)?.remove(0)))
        .collect::<Result<_, CliError>>()?;
    let mut table = Table::new(&["x", "p", "w"]);
    let mut integral = 0.0;
    for (x, row) in xs.iter().zip(&rows) {
        for (p, w) in ps.iter().zip(row) {
            table.push(vec![*x, *p, *w]);
            integral += w;
        }
    }
    let cell = if xs.len() > 1 && ps.len() > 1 {
        (xs[1] - xs[0]) * (ps[1] - ps[0])
    } else {
        f64::NAN
    };
    table.sort_by_keys(2);
    let mut run = Run::new("wigner", config)?;
    run.result("state", wc.state);
    run.result("integral", integral * cell);
    run.write_table("wigner.csv", &table)?;
    run.finish()
}

pub fn cmd_steady_state(config: &RunConfig) -> Result<PathBuf, CliError> {
    let params = config.model.params()?;
    let dim = config.dim;
    let l = liouville::kerr_cat_liouvillian(&params, dim)?;
    let ss = liouville::steady_state(&l)?;
    let m = ss.matrix();
    let mut table = Table::new(&["row", "col", "re", "im"]);
    for i in 0..dim {
        for j in 0..dim {
            table.push(vec![i as f64, j as f64, m[(i, j)].re, m[(i, j)].im]);
        }
    }
    let n: f64 = (0..dim).map(|k| k as f64 * m[(k, k)].re).sum();
    let parity: f64 = (0..dim).map(|k| if k % 2 == 0 { m[(k, k)].re } else { -m[(k, k)].re }).sum();
    let cat = dynamics::CatBasis::new(params.alpha(), dim)?.project(m)?;
    let mut run = Run::new("steady-state", config)?;
    run.result("photon_number", n);
    run.result("photon_number_over_alpha_sq", n / params.alpha_sq());
    run.result("parity", parity);
    run.result("purity", ss.purity());
    run.result("cat_projection", cat.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>());
    run.write_table("steady_state.csv", &table)?;
    if config.steady_state.spectrum {
        let values = liouville::eigenvalues(&l)?;
        let mut spec = Table::new(&["re_E", "im_E", "index"]);
        for (k, z) in values.iter().enumerate() {
            spec.push(vec![z.re, z.im, k as f64]);
        }
        run.result("slowest_nonzero", values.get(1).map(|z| [z.re, z.im]));
        run.write_table("liouvillian_spectrum.csv", &spec)?;
    }
    run.finish()
}
