use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde_json::json;
use werner_core::analysis::{
    chsh_from_counts, chsh_schedule, fit_werner, linear_entropy, tangle, ChshAngles, ChshReport, MetricsReport,
};
use werner_core::decoherence::{decoherence_curve, write_curve_csv, Spectrum};
use werner_core::polarimetry::{
    simulate_counts, tomographic_settings, AnalyzerSetting, CoincidenceRecord, CountsFile, Measurements,
};
use werner_core::states::{
    bell_state, source_state, werner_phi_minus, werner_singlet, BellKind, DensityMatrix, SourceConfig,
};
use werner_core::tomography::{
    bootstrap_errors, likelihood_cost, linear_reconstruct, mle_reconstruct, BootstrapErrors, Method, MleObjective,
    MleOptions, ReconstructionReport, Resample,
};

use crate::cli::*;
use crate::io::{matrix_json, read_counts, read_manifest, read_state, sibling, to_json, CliResult, Failure, Outputs};

pub fn run(mut command: Command) -> CliResult<()> {
    if let Command::Rerun(a) = &command {
        let m = read_manifest(&a.manifest)?;
        if matches!(m.command, Command::Rerun(_)) {
            return Err(Failure::Input("a manifest cannot replay a rerun".into()));
        }
        return run(m.command);
    }
    command.absolutize();
    match &command {
        Command::GenState(a) => gen_state(a, &command),
        Command::Simulate(a) => simulate(a, &command),
        Command::Reconstruct(a) => reconstruct(a, &command),
        Command::Metrics(a) => metrics(a, &command),
        Command::Chsh(a) => chsh(a, &command),
        Command::FitWerner(a) => fit(a, &command),
        Command::DecohereCurve(a) => curve(a, &command),
        Command::Pipeline(a) => pipeline(a, &command),
        Command::Rerun(_) => unreachable!("handled above"),
    }
}

fn manifest_path(out: &Path) -> PathBuf {
    sibling(out, "manifest.json")
}

fn parse_param(p: &str) -> CliResult<f64> {
    p.parse().map_err(|e| Failure::input(format!("parameter {p:?}"), e))
}

fn gen_state(a: &GenStateArgs, cmd: &Command) -> CliResult<()> {
    let rho = match a.kind {
        StateKind::WernerSinglet => werner_singlet(parse_param(&a.param)?)?,
        StateKind::WernerPhiMinus => werner_phi_minus(parse_param(&a.param)?)?,
        StateKind::Bell => bell_state(a.param.parse::<BellKind>()?).density(),
        StateKind::Source => source_state(&SourceConfig { mix_x: parse_param(&a.param)?, ..Default::default() })?,
    };
    let mut out = Outputs::default();
    out.add(&a.out, to_json(&rho));
    out.commit_with_manifest(manifest_path(&a.out), cmd, json!({ "kind": a.kind, "param": a.param }), vec![])
}

fn source_config(s: &SourceArgs, mix_x: f64) -> CliResult<SourceConfig> {
    let c =
        SourceConfig { mix_x, pair_rate: s.rate, accidental_rate: s.accidentals, duration: s.duration, seed: s.seed };
    c.validate()?;
    Ok(c)
}

fn schedule_settings(schedule: Schedule, angles: &ChshAngles) -> Vec<AnalyzerSetting> {
    match schedule {
        Schedule::Tomo => tomographic_settings(),
        Schedule::Chsh => chsh_schedule(angles),
    }
}

fn simulate(a: &SimulateArgs, cmd: &Command) -> CliResult<()> {
    let rho = read_state(&a.state)?;
    let config = source_config(&a.source, SourceConfig::default().mix_x)?;
    let settings = schedule_settings(a.schedule, &a.angles);
    let records = if a.noise_free {
        // Expected counts rounded to the nearest integer.
        let m = Measurements::expected(&rho, &settings, &config)?;
        m.settings
            .iter()
            .zip(&m.counts)
            .map(|(s, c)| CoincidenceRecord { setting: *s, duration_s: config.duration, count: c.round() as u64 })
            .collect()
    } else {
        simulate_counts(&rho, &settings, &config)?
    };
    let mut out = Outputs::default();
    out.add(&a.out, to_json(&CountsFile::from_records(&records)?));
    let params = json!({
        "schedule": a.schedule,
        "pair_rate": config.pair_rate,
        "accidental_rate": config.accidental_rate,
        "duration_s": config.duration,
        "seed": config.seed,
        "angles_deg": a.angles.as_array(),
        "noise_free": a.noise_free,
    });
    out.commit_with_manifest(manifest_path(&a.out), cmd, params, vec![a.state.clone()])
}

struct Reconstructed {
    /// Physical state, when the method produced one.
    rho: Option<DensityMatrix>,
    state_json: Vec<u8>,
    report: ReconstructionReport,
}

fn reconstruct_data(data: &Measurements, method: MethodArg, strict: bool) -> CliResult<Reconstructed> {
    match method {
        MethodArg::Linear => {
            let lin = linear_reconstruct(data)?;
            if !lin.is_physical() {
                eprintln!(
                    "warning: linear inversion is not positive semidefinite (min eigenvalue {:.6})",
                    lin.min_eigenvalue
                );
            }
            let cost = likelihood_cost(data, &lin.matrix, MleObjective::Gaussian)?;
            let rho = DensityMatrix::new(lin.matrix.clone()).ok();
            Ok(Reconstructed {
                rho,
                state_json: matrix_json(&lin.matrix),
                report: ReconstructionReport {
                    method: Method::Linear,
                    min_eigenvalue: lin.min_eigenvalue,
                    cost,
                    iterations: 0,
                    converged: true,
                },
            })
        }
        MethodArg::Mle => {
            let r = mle_reconstruct(data, None, &MleOptions::default())?;
            if !r.converged {
                let msg =
                    format!("maximum-likelihood search stopped after {} evaluations without converging", r.evaluations);
                if strict {
                    return Err(Failure::Numerical(msg));
                }
                eprintln!("warning: {msg}");
            }
            let min_eigenvalue = r.rho.eigen().min_eigenvalue();
            Ok(Reconstructed {
                state_json: to_json(&r.rho),
                report: ReconstructionReport {
                    method: Method::Mle,
                    min_eigenvalue,
                    cost: r.cost,
                    iterations: r.iterations,
                    converged: r.converged,
                },
                rho: Some(r.rho),
            })
        }
    }
}

fn run_bootstrap(
    data: &Measurements,
    n: usize,
    seed: u64,
    target: BellKind,
    angles: &ChshAngles,
) -> CliResult<Option<BootstrapErrors>> {
    if n == 0 {
        return Ok(None);
    }
    Ok(Some(bootstrap_errors(data, n, seed, Resample::Poisson, target, angles, &MleOptions::default())?))
}

fn reconstruct(a: &ReconstructArgs, cmd: &Command) -> CliResult<()> {
    let data = Measurements::from_records(&read_counts(&a.counts)?)?;
    let rec = reconstruct_data(&data, a.method, a.strict)?;
    let boot = run_bootstrap(&data, a.bootstrap, a.seed, a.target, &a.angles)?;
    let mut out = Outputs::default();
    out.add(&a.out, rec.state_json);
    out.add(sibling(&a.out, "report.json"), to_json(&json!({ "reconstruction": rec.report, "bootstrap": boot })));
    let params = json!({
        "method": a.method,
        "bootstrap": a.bootstrap,
        "seed": a.seed,
        "target": a.target,
        "angles_deg": a.angles.as_array(),
    });
    out.commit_with_manifest(manifest_path(&a.out), cmd, params, vec![a.counts.clone()])
}

/// Writes `bytes` to `out` with a manifest, or prints them when no path is
/// given.
fn emit(
    bytes: Vec<u8>,
    out: Option<&PathBuf>,
    cmd: &Command,
    params: serde_json::Value,
    inputs: Vec<PathBuf>,
) -> CliResult<()> {
    match out {
        Some(path) => {
            let mut o = Outputs::default();
            o.add(path, bytes);
            o.commit_with_manifest(manifest_path(path), cmd, params, inputs)
        }
        None => {
            print!("{}", String::from_utf8(bytes).expect("JSON output is UTF-8"));
            Ok(())
        }
    }
}

fn metrics(a: &MetricsArgs, cmd: &Command) -> CliResult<()> {
    let rho = read_state(&a.state)?;
    let report = MetricsReport::from_state(&rho, a.target, &a.angles)?;
    let params = json!({ "target": a.target, "angles_deg": a.angles.as_array() });
    emit(to_json(&report), a.out.as_ref(), cmd, params, vec![a.state.clone()])
}

fn chsh(a: &ChshArgs, cmd: &Command) -> CliResult<()> {
    let est = chsh_from_counts(&read_counts(&a.counts)?)?;
    let body = json!({
        "S": est.s,
        "sigma": est.sigma,
        "angles_deg": est.angles.as_array(),
        "violates": est.violates(),
    });
    emit(to_json(&body), a.out.as_ref(), cmd, json!({}), vec![a.counts.clone()])
}

fn fit(a: &FitWernerArgs, cmd: &Command) -> CliResult<()> {
    let rho = read_state(&a.state)?;
    let f = fit_werner(&rho, a.target)?;
    emit(to_json(&f), a.out.as_ref(), cmd, json!({ "target": a.target }), vec![a.state.clone()])
}

fn parse_grid(spec: &str) -> CliResult<Vec<f64>> {
    let bad = |m: &str| Failure::Input(format!("grid {spec:?}: {m}"));
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| bad(&e.to_string()));
    let grid = if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        let [start, stop, step] = parts[..] else {
            return Err(bad("expected start:stop:step"));
        };
        let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
        if step.is_nan() || step <= 0.0 || stop.is_nan() || start.is_nan() || stop < start {
            return Err(bad("need step > 0 and stop >= start"));
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        if n > 10_000_000 {
            return Err(bad("too many points"));
        }
        (0..=n).map(|i| start + i as f64 * step).collect()
    } else {
        spec.split(',').map(num).collect::<CliResult<Vec<f64>>>()?
    };
    if grid.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
        return Err(bad("values must be finite and >= 0"));
    }
    Ok(grid)
}

fn curve(a: &CurveArgs, cmd: &Command) -> CliResult<()> {
    let spectrum = Spectrum::rectangular(a.lambda0, a.fwhm)?;
    let grid = parse_grid(&a.grid)?;
    let points = decoherence_curve(&spectrum, &grid)?;
    let mut csv = Vec::new();
    write_curve_csv(&points, &mut csv).expect("writing to memory");
    let mut out = Outputs::default();
    out.add(&a.out, csv);
    let params = json!({
        "spectrum": spectrum,
        "grid": a.grid,
        "first_zero_opd_over_lambda0": spectrum.first_zero_opd_nm() / spectrum.center_wavelength_nm,
    });
    out.commit_with_manifest(manifest_path(&a.out), cmd, params, vec![])
}

fn pipeline(a: &PipelineArgs, cmd: &Command) -> CliResult<()> {
    let config = source_config(&a.source, a.mix)?;
    let chsh_config = SourceConfig { seed: config.seed.wrapping_add(1), ..config };
    let truth = source_state(&config)?;

    let tomo = simulate_counts(&truth, &tomographic_settings(), &config)?;
    let chsh_records = simulate_counts(&truth, &chsh_schedule(&a.angles), &chsh_config)?;
    let data = Measurements::from_records(&tomo)?;
    let rec = reconstruct_data(&data, a.method, a.strict)?;
    let rho = rec.rho.as_ref().ok_or_else(|| {
        Failure::Numerical(format!(
            "linear inversion is not a physical state (min eigenvalue {:.6}); use --method mle",
            rec.report.min_eigenvalue
        ))
    })?;
    let boot = run_bootstrap(&data, a.bootstrap, config.seed, a.target, &a.angles)?;
    let chsh = chsh_from_counts(&chsh_records)?;
    let fit = fit_werner(rho, a.target)?;
    let report = MetricsReport {
        x: fit.x,
        x_err: boot.map(|b| b.x),
        fidelity: fit.fidelity,
        linear_entropy: linear_entropy(rho),
        tangle: tangle(rho)?,
        chsh: ChshReport { s: chsh.s, sigma: Some(chsh.sigma), angles_deg: chsh.angles.as_array() },
    };

    std::fs::create_dir_all(&a.out).map_err(|e| Failure::input(a.out.display(), e))?;
    let mut out = Outputs::default();
    out.add(a.out.join("source_state.json"), to_json(&truth));
    out.add(a.out.join("tomography_counts.json"), to_json(&CountsFile::from_records(&tomo)?));
    out.add(a.out.join("chsh_counts.json"), to_json(&CountsFile::from_records(&chsh_records)?));
    out.add(a.out.join("reconstructed_state.json"), rec.state_json);
    out.add(
        a.out.join("reconstruction_report.json"),
        to_json(&json!({ "reconstruction": rec.report, "bootstrap": boot })),
    );
    out.add(a.out.join("metrics.json"), to_json(&report));
    let params = json!({
        "source": config,
        "chsh_seed": chsh_config.seed,
        "method": a.method,
        "bootstrap": a.bootstrap,
        "target": a.target,
        "angles_deg": a.angles.as_array(),
    });
    let mut summary = String::new();
    let _ = writeln!(
        summary,
        "x = {:.4}, F = {:.4}, P = {:.4}, T = {:.4}",
        report.x, report.fidelity, report.linear_entropy, report.tangle
    );
    let _ = writeln!(summary, "S = {:.4} ± {:.4}", report.chsh.s, chsh.sigma);
    out.commit_with_manifest(a.out.join("manifest.json"), cmd, params, vec![])?;
    eprint!("{summary}");
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_forms() {
        assert_eq!(parse_grid("0:3:1").unwrap(), vec![0.0, 1.0, 2.0, 3.0]);
        assert_eq!(parse_grid("0").unwrap(), vec![0.0]);
        assert_eq!(parse_grid("1.5, 2").unwrap(), vec![1.5, 2.0]);
        assert_eq!(parse_grid("0:300:1").unwrap().len(), 301);
        for bad in ["0:1", "3:1:1", "0:1:0", "-1", "a"] {
            assert!(parse_grid(bad).is_err(), "{bad}");
        }
    }
}
