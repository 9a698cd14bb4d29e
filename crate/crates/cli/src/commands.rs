use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use jpa_core::chain::{simulate_coherent_sweep, simulate_planck_sweep, SweepDataset, SweepKind};
use jpa_core::fit::{
    extract_efficiency, fit_coherent_weighted, fit_planck_weighted, EfficiencyMode, EfficiencyPoint, FitResult, Weighting,
};
use jpa_core::limit::{limit_curve, limit_curve_with_oracle, nql_closed_form, LimitCurve, LimitQuery};
use jpa_core::physics::quantum_efficiency;
use jpa_core::pipeline::{self, linspace, logspace};
use jpa_core::AmplifierParams;
use serde::Serialize;

use crate::config::{Format, Hz, RunConfig, RunInfo, Spacing};
use crate::{CliError, FitArgs, LimitArgs, SimulateArgs};

/// Writes through a temporary file in the target directory and renames it
/// into place, so readers never see a partial file.
fn write_atomic(path: &Path, body: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<(), CliError> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    {
        let mut w = BufWriter::new(tmp.as_file_mut());
        body(&mut w).and_then(|_| w.flush()).map_err(|e| CliError::io(path, e))?;
    }
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)
    })
}

/// The resolved configuration, re-readable with `--config`.
fn write_sidecar(path: &Path, cfg: &RunConfig, command: &str) -> Result<(), CliError> {
    let unix_time = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let cfg = RunConfig {
        run: Some(RunInfo {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            unix_time,
        }),
        ..cfg.clone()
    };
    write_json(path, &cfg)
}

fn write_dataset(path: &Path, ds: &SweepDataset, format: Format) -> Result<(), CliError> {
    match format {
        Format::Csv => write_atomic(path, |w| ds.write_csv(w)),
        Format::Json => write_json(path, ds),
    }
}

fn read_dataset(path: &Path) -> Result<SweepDataset, CliError> {
    let file = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let reader = io::BufReader::new(file);
    let ds = if path.extension().is_some_and(|e| e == "json") {
        let ds: SweepDataset = serde_json::from_reader(reader)
            .map_err(|e| CliError::Config(format!("{}: line {}: {e}", path.display(), e.line())))?;
        ds.validate()?;
        ds
    } else {
        SweepDataset::read_csv(reader)?
    };
    Ok(ds)
}

fn b_s_grid(cfg: &RunConfig, args: &LimitArgs, amps: &[AmplifierParams]) -> Result<Vec<f64>, CliError> {
    let l = &cfg.limit;
    let points = args.points.unwrap_or(l.points);
    let lo = args.b_s_min.or(l.b_s_min).map_or_else(
        || amps.iter().map(|a| a.b_meas() / 100.0).fold(f64::INFINITY, f64::min),
        |h| h.0,
    );
    let hi = args.b_s_max.or(l.b_s_max).map_or_else(
        || amps.iter().map(|a| 4.0 * (2.0 * a.delta() + a.b_meas())).fold(0.0, f64::max),
        |h| h.0,
    );
    if points == 0 {
        return Err(CliError::Usage("the bandwidth grid is empty (points = 0)".into()));
    }
    if !(lo > 0.0 && hi > lo) {
        return Err(CliError::Usage(format!(
            "bandwidth grid needs 0 < b_s_min < b_s_max, got {lo} and {hi}"
        )));
    }
    Ok(match args.spacing.unwrap_or(l.spacing) {
        Spacing::Log => logspace(lo, hi, points),
        Spacing::Linear => linspace(lo, hi, points),
    })
}

fn flag_or_config(flag: &[Hz], config: &[Hz]) -> Vec<f64> {
    let list = if flag.is_empty() { config } else { flag };
    list.iter().map(|h| h.0).collect()
}

pub fn limit(cfg: RunConfig, args: &LimitArgs) -> Result<(), CliError> {
    let base = cfg.amplifier()?;
    let deltas = flag_or_config(&args.delta, &cfg.limit.deltas);
    let widths = flag_or_config(&args.b_meas, &cfg.limit.b_meas);
    let single = deltas.is_empty() && widths.is_empty();
    let deltas = if deltas.is_empty() { vec![base.delta()] } else { deltas };
    let widths = if widths.is_empty() { vec![base.b_meas()] } else { widths };
    let mut amps = Vec::new();
    for &b in &widths {
        for &d in &deltas {
            amps.push(base.with_b_meas(b)?.with_delta(d)?);
        }
    }
    let grid = b_s_grid(&cfg, args, &amps)?;
    let oracle = args.oracle || cfg.limit.oracle;
    let format = cfg.output.format;
    let dir = &cfg.output.dir;

    for amp in &amps {
        let curve = if oracle {
            limit_curve_with_oracle(amp, &grid)?
        } else {
            limit_curve(amp, &grid)?
        };
        let name = if single {
            format!("limit.{}", format.extension())
        } else {
            format!("limit_delta{}_b{}.{}", amp.delta(), amp.b_meas(), format.extension())
        };
        let path = dir.join(name);
        write_curve(&path, &curve, format)?;
        print!("{}: {} points, b2 = {} Hz", path.display(), curve.len(), curve.thresholds.b2);
        if let Some(dev) = curve.max_oracle_deviation() {
            print!(", max |closed form - quadrature| = {dev:.3e}");
        }
        println!();
    }
    if cfg.signal.b_s.0 > 0.0 {
        let q = LimitQuery::new(base, cfg.signal.b_s.0)?;
        let n = nql_closed_form(&q);
        println!(
            "signal b_s = {} Hz: n_ql = {n:.6}, eta_ql = {:.6}",
            q.b_s,
            quantum_efficiency(n)?
        );
    }
    write_sidecar(&dir.join("limit.config.json"), &cfg, "limit")
}

fn write_curve(path: &Path, curve: &LimitCurve, format: Format) -> Result<(), CliError> {
    match format {
        Format::Csv => write_atomic(path, |w| curve.write_csv(w)),
        Format::Json => write_json(path, curve),
    }
}

pub fn simulate(cfg: RunConfig, args: &SimulateArgs) -> Result<(), CliError> {
    let chain = cfg.chain()?;
    let g_n = args.gain.unwrap_or(cfg.amplifier.signal_gain).0;
    let ds = match args.kind {
        SweepKind::Planck => simulate_planck_sweep(&chain, &cfg.temperatures(), g_n)?,
        SweepKind::Coherent => simulate_coherent_sweep(&chain, &cfg.sweep.input_photons, g_n)?,
    };
    let format = cfg.output.format;
    let stem = format!("{}_sweep", args.kind.as_str());
    let path = cfg.output.dir.join(format!("{stem}.{}", format.extension()));
    write_dataset(&path, &ds, format)?;
    write_sidecar(&cfg.output.dir.join(format!("{stem}.config.json")), &cfg, "simulate")?;
    println!("{}: {} points at G_n = {g_n}", path.display(), ds.len());
    Ok(())
}

#[derive(Debug, Serialize)]
struct FitReport<'a> {
    dataset: String,
    weighting: Weighting,
    fit: &'a FitResult,
    efficiency: Option<EfficiencyPoint>,
}

fn mode_of(kind: SweepKind) -> EfficiencyMode {
    match kind {
        SweepKind::Planck => EfficiencyMode::Broadband,
        SweepKind::Coherent => EfficiencyMode::Narrowband,
    }
}

pub fn fit(cfg: RunConfig, args: &FitArgs) -> Result<(), CliError> {
    let ds = read_dataset(&args.dataset)?;
    if ds.kind != args.model {
        return Err(CliError::Usage(format!(
            "{} holds a {} sweep but the {} model was requested",
            args.dataset.display(),
            ds.kind.as_str(),
            args.model.as_str()
        )));
    }
    let weighting = args.weighting.map_or(cfg.sweep.weighting, Weighting::from);
    let sigma = weighting.sigma(&ds.y)?;
    let result = match args.model {
        SweepKind::Planck => {
            let f = args.f_signal.unwrap_or(cfg.amplifier.signal_frequency).0;
            fit_planck_weighted(&ds, f, sigma.as_deref())?
        }
        SweepKind::Coherent => fit_coherent_weighted(&ds, sigma.as_deref())?,
    };
    let efficiency = if result.converged {
        Some(extract_efficiency(&result, mode_of(args.model))?)
    } else {
        None
    };
    let report = FitReport {
        dataset: args.dataset.display().to_string(),
        weighting,
        fit: &result,
        efficiency,
    };
    let stem = args
        .dataset
        .file_stem()
        .map_or("dataset".into(), |s| s.to_string_lossy().into_owned());
    let path = cfg.output.dir.join(format!("{stem}.fit.json"));
    write_json(&path, &report)?;
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    match efficiency {
        Some(p) => {
            println!(
                "{}: eta = {:.6} +/- {:.6} at G = {}",
                path.display(),
                p.eta,
                p.sigma_eta,
                p.gain
            );
            Ok(())
        }
        None => Err(jpa_core::Error::NotConverged.into()),
    }
}

#[derive(Debug, Serialize)]
struct PointReport<'a> {
    gain_db: f64,
    fit: &'a FitResult,
    efficiency: &'a EfficiencyPoint,
}

pub fn pipeline(cfg: RunConfig) -> Result<(), CliError> {
    let out = pipeline::run(&cfg.pipeline()?)?;
    let format = cfg.output.format;
    let dir: &PathBuf = &cfg.output.dir;
    let ext = format.extension();
    for (i, p) in out.points.iter().enumerate() {
        let sub = dir.join(format!("gain_{i:02}_{:.2}dB", p.gain_db));
        write_dataset(&sub.join(format!("planck_sweep.{ext}")), &p.planck, format)?;
        write_dataset(&sub.join(format!("coherent_sweep.{ext}")), &p.coherent, format)?;
        let report = |fit, efficiency| PointReport {
            gain_db: p.gain_db,
            fit,
            efficiency,
        };
        write_json(&sub.join("planck_fit.json"), &report(&p.planck_fit, &p.broadband))?;
        write_json(&sub.join("coherent_fit.json"), &report(&p.coherent_fit, &p.narrowband))?;
    }
    write_atomic(&dir.join("eta_curve.csv"), |w| out.write_table_csv(w))?;
    if format == Format::Json {
        write_json(&dir.join("eta_curve.json"), &out.table)?;
    }
    write_json(&dir.join("summary.json"), &out.summary)?;
    write_sidecar(&dir.join("config.json"), &cfg, "pipeline")?;
    let s = &out.summary;
    println!(
        "{}: {} gain points, max broadband eta = {:.4} +/- {:.4} at {:.2} dB, {} broadband points above the narrowband bound",
        dir.display(),
        out.points.len(),
        s.max_broadband_eta,
        s.max_broadband_sigma_eta,
        s.max_broadband_gain_db,
        s.broadband_points_above_sql
    );
    Ok(())
}
