//! Implementations of the six subcommands. Every number a command prints
//! is produced by a library call; the CLI only formats.

use crate::config::{resolve_f64, resolve_u64, ConfigMap};
use crate::error::{CliError, CliResult};
use crate::format::{fmt_g, json_num, json_opt};
use crate::scan::{write_scan, OutFormat, RangeSpec, ScanSpec};
use serde_json::{Map, Value};
use std::io::Write;
use std::path::{Path, PathBuf};
use twinbeam::{
    auto_cutoff, build_covariance, estimate_gammas_seeded, gamma_report, gamma_with_loss,
    gammas_from_moments, joint_pmf, lossy_moments, multimode_moments, multimode_snl_violation,
    multimode_witness, output_moments, ppt_check, thin_counts, thresholds, BlockUnitary,
    CountRecord, CountSampler, Error, GammaReport, LossModel, MultimodeParams, PdcParams, Region,
};

/// Oracle pass/fail tolerances (exit code 2 when exceeded).
const ORACLE_MOMENT_RTOL: f64 = 1e-6;
const ORACLE_GAMMA_TOL: f64 = 1e-5;
const ORACLE_UNITARITY_TOL: f64 = 1e-8;
const ORACLE_PPT_BAND: f64 = 1e-9;

/// Salt separating the thinning and bootstrap streams from the sampler's.
const THIN_SEED_SALT: u64 = 0x7468696e;
const BOOT_SEED_SALT: u64 = 0x626f6f74;

fn params_from(mu1: f64, mu2: f64, muk: f64) -> CliResult<PdcParams> {
    PdcParams::new(mu1, mu2, muk, 0.0).map_err(|e| CliError::Usage(e.to_string()))
}

fn loss_from(tau: f64) -> CliResult<LossModel> {
    LossModel::new(tau).map_err(|e| CliError::Usage(e.to_string()))
}

fn print_summary(summary: &Value) -> CliResult<()> {
    let mut stdout = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut stdout, summary)?;
    writeln!(stdout)?;
    Ok(())
}

fn report_values(report: Option<&GammaReport>) -> (Value, Value, Value, Value) {
    match report {
        Some(r) => (
            json_num(r.gamma_c),
            json_num(r.gamma_n),
            json_num(r.gamma_e),
            Value::String(r.region.to_string()),
        ),
        None => (Value::Null, Value::Null, Value::Null, Value::String(Region::Undefined.to_string())),
    }
}

/// Gamma evaluation honoring the loss factor; `None` at the undefined
/// origin (or full loss).
fn gamma_at(p: &PdcParams, loss: &LossModel) -> CliResult<Option<GammaReport>> {
    let result = if loss.tau() == 1.0 { gamma_report(p) } else { gamma_with_loss(p, loss) };
    match result {
        Ok(r) => Ok(Some(r)),
        Err(Error::UndefinedPoint) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

pub fn cmd_gamma(
    mu1: Option<f64>,
    mu2: Option<f64>,
    muk: Option<f64>,
    tau: Option<f64>,
    config: Option<&Path>,
) -> CliResult<()> {
    let cfg = ConfigMap::load(config)?;
    let mu1 = resolve_f64(mu1, cfg.get_f64("mu1"), None, "mu1")?;
    let mu2 = resolve_f64(mu2, cfg.get_f64("mu2"), None, "mu2")?;
    let muk = resolve_f64(muk, cfg.get_f64("muk"), None, "muk")?;
    let tau = resolve_f64(tau, cfg.get_f64("tau"), Some(1.0), "tau")?;
    let p = params_from(mu1, mu2, muk)?;
    let loss = loss_from(tau)?;

    let report = gamma_at(&p, &loss)?;
    let th = thresholds(mu1, mu2).map_err(|e| CliError::Usage(e.to_string()))?;

    let (gc, gn, ge, region) = report_values(report.as_ref());
    let mut obj = Map::new();
    obj.insert("mu1".into(), json_num(mu1));
    obj.insert("mu2".into(), json_num(mu2));
    obj.insert("muk".into(), json_num(muk));
    obj.insert("tau".into(), json_num(tau));
    obj.insert("gamma_c".into(), gc);
    obj.insert("gamma_n".into(), gn);
    obj.insert("gamma_e".into(), ge);
    obj.insert("region".into(), region);
    let mut th_obj = Map::new();
    th_obj.insert("muk_n".into(), json_num(th.muk_n));
    th_obj.insert("muk_c".into(), json_num(th.muk_c));
    th_obj.insert("muk_e".into(), json_num(th.muk_e));
    obj.insert("thresholds".into(), Value::Object(th_obj));
    print_summary(&Value::Object(obj))
}

pub fn cmd_thresholds(mu1: Option<f64>, mu2: Option<f64>, config: Option<&Path>) -> CliResult<()> {
    let cfg = ConfigMap::load(config)?;
    let mu1 = resolve_f64(mu1, cfg.get_f64("mu1"), None, "mu1")?;
    let mu2 = resolve_f64(mu2, cfg.get_f64("mu2"), None, "mu2")?;
    let th = thresholds(mu1, mu2).map_err(|e| CliError::Usage(e.to_string()))?;
    let mut obj = Map::new();
    obj.insert("mu1".into(), json_num(mu1));
    obj.insert("mu2".into(), json_num(mu2));
    obj.insert("muk_n".into(), json_num(th.muk_n));
    obj.insert("muk_c".into(), json_num(th.muk_c));
    obj.insert("muk_e".into(), json_num(th.muk_e));
    print_summary(&Value::Object(obj))
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_scan(
    mu1: Option<RangeSpec>,
    mu2: Option<RangeSpec>,
    muk: Option<RangeSpec>,
    tau: Option<f64>,
    modes: Option<u64>,
    format: Option<OutFormat>,
    out: Option<PathBuf>,
    allow_large: bool,
    config: Option<&Path>,
) -> CliResult<()> {
    let cfg = ConfigMap::load(config)?;
    let range = |flag: Option<RangeSpec>, key: &str| -> CliResult<RangeSpec> {
        if let Some(r) = flag {
            return Ok(r);
        }
        if let Some(s) = cfg.get_string(key) {
            return s.parse();
        }
        Err(CliError::Usage(format!("missing required range --{key}")))
    };
    let spec = ScanSpec {
        mu1: range(mu1, "mu1")?,
        mu2: range(mu2, "mu2")?,
        muk: range(muk, "muk")?,
        tau: resolve_f64(tau, cfg.get_f64("tau"), Some(1.0), "tau")?,
        n_modes: resolve_u64(modes, cfg.get_u64("modes"), Some(1), "modes")?,
        format: match format {
            Some(f) => f,
            None => match cfg.get_string("format") {
                Some(s) => s.parse()?,
                None => OutFormat::Csv,
            },
        },
        allow_large,
    };
    let out = out.or_else(|| cfg.get_string("out").map(PathBuf::from));
    match out {
        Some(path) => {
            let file = std::fs::File::create(&path)
                .map_err(|e| CliError::Io(format!("cannot create {}: {e}", path.display())))?;
            let mut w = std::io::BufWriter::new(file);
            let rows = write_scan(&spec, &mut w)?;
            w.flush()?;
            eprintln!("scan: wrote {rows} rows to {}", path.display());
        }
        None => {
            let stdout = std::io::stdout().lock();
            let mut w = std::io::BufWriter::new(stdout);
            write_scan(&spec, &mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_simulate(
    mu1: Option<f64>,
    mu2: Option<f64>,
    muk: Option<f64>,
    tau: Option<f64>,
    trials: Option<u64>,
    seed: Option<u64>,
    modes: Option<u64>,
    out: Option<PathBuf>,
    config: Option<&Path>,
) -> CliResult<()> {
    let cfg = ConfigMap::load(config)?;
    let mu1 = resolve_f64(mu1, cfg.get_f64("mu1"), None, "mu1")?;
    let mu2 = resolve_f64(mu2, cfg.get_f64("mu2"), None, "mu2")?;
    let muk = resolve_f64(muk, cfg.get_f64("muk"), None, "muk")?;
    let tau = resolve_f64(tau, cfg.get_f64("tau"), Some(1.0), "tau")?;
    let trials = resolve_u64(trials, cfg.get_u64("trials"), Some(100_000), "trials")?;
    // No default seed: silent nondeterminism is forbidden.
    let seed = resolve_u64(seed, cfg.get_u64("seed"), None, "seed")?;
    let modes = resolve_u64(modes, cfg.get_u64("modes"), Some(1), "modes")?;
    let out = out.or_else(|| cfg.get_string("out").map(PathBuf::from));

    let p = params_from(mu1, mu2, muk)?;
    let loss = loss_from(tau)?;
    if modes == 0 {
        return Err(CliError::Usage("modes must be >= 1".into()));
    }

    let started = std::time::Instant::now();
    let mut sampler = CountSampler::new(&p);
    let ideal = sampler.sample(trials, seed)?;
    let events =
        if loss.tau() < 1.0 { thin_counts(&ideal, &loss, seed ^ THIN_SEED_SALT) } else { ideal };

    let events_path = match &out {
        Some(path) => {
            let mut w = std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| {
                CliError::Io(format!("cannot create {}: {e}", path.display()))
            })?);
            writeln!(w, "k,l")?;
            for &(k, l) in &events {
                writeln!(w, "{k},{l}")?;
            }
            w.flush()?;
            Value::String(path.display().to_string())
        }
        None => Value::Null,
    };

    let rec = CountRecord::from_events(&events);
    let estimate = match estimate_gammas_seeded(&rec, modes as u32, 200, seed ^ BOOT_SEED_SALT) {
        Ok(est) => Some(est),
        Err(Error::UndefinedPoint) => None,
        Err(e) => return Err(e.into()),
    };
    let analytic = gamma_at(&p, &loss)?;
    let elapsed = started.elapsed();

    let mut obj = Map::new();
    obj.insert("mu1".into(), json_num(mu1));
    obj.insert("mu2".into(), json_num(mu2));
    obj.insert("muk".into(), json_num(muk));
    obj.insert("tau".into(), json_num(tau));
    obj.insert("modes".into(), Value::from(modes));
    obj.insert("trials".into(), Value::from(trials));
    obj.insert("seed".into(), Value::from(seed));
    match &estimate {
        Some(est) => {
            obj.insert("gamma_c".into(), json_num(est.gammas.gamma_c));
            obj.insert("gamma_n".into(), json_num(est.gammas.gamma_n));
            obj.insert("gamma_e".into(), json_num(est.gammas.gamma_e));
            obj.insert("stderr_gamma_c".into(), json_num(est.stderr_gamma_c));
            obj.insert("stderr_gamma_n".into(), json_num(est.stderr_gamma_n));
            obj.insert("stderr_gamma_e".into(), json_num(est.stderr_gamma_e));
            obj.insert("region".into(), Value::String(est.gammas.region.to_string()));
            obj.insert("mean_diff".into(), json_num(est.mean_diff));
            obj.insert("stderr_mean_diff".into(), json_num(est.stderr_mean_diff));
        }
        None => {
            for key in [
                "gamma_c",
                "gamma_n",
                "gamma_e",
                "stderr_gamma_c",
                "stderr_gamma_n",
                "stderr_gamma_e",
            ] {
                obj.insert(key.into(), Value::Null);
            }
            obj.insert("region".into(), Value::String(Region::Undefined.to_string()));
            obj.insert("mean_diff".into(), Value::Null);
            obj.insert("stderr_mean_diff".into(), Value::Null);
        }
    }
    let (agc, agn, age, aregion) = report_values(analytic.as_ref());
    obj.insert("gamma_c_analytic".into(), agc);
    obj.insert("gamma_n_analytic".into(), agn);
    obj.insert("gamma_e_analytic".into(), age);
    obj.insert("region_analytic".into(), aregion);
    obj.insert(
        "mean_diff_analytic".into(),
        json_num(loss.tau() * (p.mu1() - p.mu2())),
    );
    obj.insert("events".into(), events_path);
    print_summary(&Value::Object(obj))?;
    // Timing stays off stdout so summaries are byte-identical per seed.
    eprintln!("simulate: {trials} trials in {:.0} ms", elapsed.as_secs_f64() * 1e3);
    Ok(())
}

pub fn cmd_oracle(
    mu1: Option<f64>,
    mu2: Option<f64>,
    muk: Option<f64>,
    cutoff: Option<u64>,
    config: Option<&Path>,
) -> CliResult<()> {
    let cfg = ConfigMap::load(config)?;
    let mu1 = resolve_f64(mu1, cfg.get_f64("mu1"), None, "mu1")?;
    let mu2 = resolve_f64(mu2, cfg.get_f64("mu2"), None, "mu2")?;
    let muk = resolve_f64(muk, cfg.get_f64("muk"), None, "muk")?;
    let p = params_from(mu1, mu2, muk)?;
    let cutoff = match (cutoff, cfg.get_u64("cutoff")?) {
        (Some(c), _) => c as usize,
        (None, Some(c)) => c as usize,
        (None, None) => auto_cutoff(&p),
    };

    let pmf = joint_pmf(&p, cutoff)?;
    let fock_m = pmf.moments();
    let analytic_m = output_moments(&p);

    let rel = |a: f64, f: f64| (a - f).abs() / a.abs().max(1e-9);
    let moment_deltas = [
        rel(analytic_m.n1, fock_m.n1),
        rel(analytic_m.n2, fock_m.n2),
        rel(analytic_m.var1, fock_m.var1),
        rel(analytic_m.var2, fock_m.var2),
        rel(analytic_m.var_diff, fock_m.var_diff),
    ];
    let max_moment_delta = moment_deltas.iter().cloned().fold(0.0f64, f64::max);

    let analytic_g = match gamma_report(&p) {
        Ok(r) => Some(r),
        Err(Error::UndefinedPoint) => None,
        Err(e) => return Err(e.into()),
    };
    let fock_g = gammas_from_moments(&fock_m).ok();
    let gamma_delta = match (&analytic_g, &fock_g) {
        (Some(a), Some((gc, gn, ge))) => Some(
            (a.gamma_c - gc)
                .abs()
                .max((a.gamma_n - gn).abs())
                .max((a.gamma_e - ge).abs()),
        ),
        _ => None,
    };

    // Unitarity diagnostic on the zero-difference block, at a bounded depth
    // so the check stays cheap for large cutoffs.
    let defect_depth = cutoff.clamp(8, 128);
    let unitarity_defect =
        BlockUnitary::new(p.squeeze_magnitude(), p.phi(), 0, defect_depth)?.unitarity_defect();

    let ppt = ppt_check(&build_covariance(&p))?;
    let ge_sign = analytic_g.map(|r| r.gamma_e);
    let ppt_agrees = match ge_sign {
        Some(ge) if ge > ORACLE_PPT_BAND => ppt.entangled,
        Some(ge) if ge < -ORACLE_PPT_BAND => !ppt.entangled,
        _ => true,
    };

    let pass = max_moment_delta <= ORACLE_MOMENT_RTOL
        && pmf.trace_defect() <= twinbeam::fock::TRACE_DEFECT_TOL
        && gamma_delta.map_or(true, |d| d <= ORACLE_GAMMA_TOL)
        && unitarity_defect <= ORACLE_UNITARITY_TOL
        && ppt_agrees;

    let mut obj = Map::new();
    obj.insert("mu1".into(), json_num(mu1));
    obj.insert("mu2".into(), json_num(mu2));
    obj.insert("muk".into(), json_num(muk));
    obj.insert("cutoff".into(), Value::from(cutoff as u64));
    obj.insert("trace_defect".into(), json_num(pmf.trace_defect()));
    obj.insert("unitarity_defect".into(), json_num(unitarity_defect));
    obj.insert("max_rel_moment_delta".into(), json_num(max_moment_delta));
    obj.insert("max_gamma_delta".into(), json_opt(gamma_delta));
    let (agc, agn, age, aregion) = report_values(analytic_g.as_ref());
    obj.insert("gamma_c_analytic".into(), agc);
    obj.insert("gamma_n_analytic".into(), agn);
    obj.insert("gamma_e_analytic".into(), age);
    obj.insert("region".into(), aregion);
    obj.insert("gamma_c_fock".into(), json_opt(fock_g.map(|g| g.0)));
    obj.insert("gamma_n_fock".into(), json_opt(fock_g.map(|g| g.1)));
    obj.insert("gamma_e_fock".into(), json_opt(fock_g.map(|g| g.2)));
    obj.insert("nu_minus".into(), json_num(ppt.nu_minus));
    obj.insert("ppt_entangled".into(), Value::Bool(ppt.entangled));
    obj.insert("ppt_agrees_gamma_e".into(), Value::Bool(ppt_agrees));
    obj.insert("pass".into(), Value::Bool(pass));
    print_summary(&Value::Object(obj))?;

    if pass {
        Ok(())
    } else {
        Err(CliError::Numerical(format!(
            "oracle tolerances exceeded (max moment delta {}, trace defect {})",
            fmt_g(max_moment_delta),
            fmt_g(pmf.trace_defect())
        )))
    }
}

pub fn cmd_multimode(
    modes: Option<u64>,
    mu1: Option<f64>,
    mu2: Option<f64>,
    muk: Option<f64>,
    tau: Option<f64>,
    config: Option<&Path>,
) -> CliResult<()> {
    let cfg = ConfigMap::load(config)?;
    let modes = resolve_u64(modes, cfg.get_u64("modes"), Some(1), "modes")?;
    let mu1 = resolve_f64(mu1, cfg.get_f64("mu1"), None, "mu1")?;
    let mu2 = resolve_f64(mu2, cfg.get_f64("mu2"), None, "mu2")?;
    let muk = resolve_f64(muk, cfg.get_f64("muk"), None, "muk")?;
    let tau = resolve_f64(tau, cfg.get_f64("tau"), Some(1.0), "tau")?;
    let p = params_from(mu1, mu2, muk)?;
    let loss = loss_from(tau)?;
    if modes == 0 {
        return Err(CliError::Usage("modes must be >= 1".into()));
    }

    let witness_for = |n: usize| -> CliResult<Option<twinbeam::WitnessCheck>> {
        let mp = MultimodeParams::homogeneous(n, p).map_err(|e| CliError::Usage(e.to_string()))?;
        let m = lossy_moments(&multimode_moments(&mp), &loss);
        match multimode_witness(&m, n) {
            Ok(w) => Ok(Some(w)),
            Err(Error::UndefinedPoint) => Ok(None),
            Err(e) => Err(e.into()),
        }
    };
    let witness = witness_for(modes as usize)?;
    let single = witness_for(1)?;
    let snl = {
        let mp = MultimodeParams::homogeneous(modes as usize, p)
            .map_err(|e| CliError::Usage(e.to_string()))?;
        let m = lossy_moments(&multimode_moments(&mp), &loss);
        // The lossy margin; loss rescales it but cannot flip the verdict.
        let snl_margin = gammas_from_moments(&m).ok().map(|(gc, _, _)| gc);
        match multimode_snl_violation(&mp) {
            Ok(check) => snl_margin.map(|margin| (margin, check.violated)),
            Err(Error::UndefinedPoint) => None,
            Err(e) => return Err(e.into()),
        }
    };

    let invariance_delta = match (&witness, &single) {
        (Some(w), Some(s)) => Some((w.margin - s.margin).abs()),
        _ => None,
    };

    let mut obj = Map::new();
    obj.insert("modes".into(), Value::from(modes));
    obj.insert("mu1".into(), json_num(mu1));
    obj.insert("mu2".into(), json_num(mu2));
    obj.insert("muk".into(), json_num(muk));
    obj.insert("tau".into(), json_num(tau));
    obj.insert("witness_margin".into(), json_opt(witness.as_ref().map(|w| w.margin)));
    obj.insert(
        "entangled".into(),
        witness.as_ref().map(|w| Value::Bool(w.entangled)).unwrap_or(Value::Null),
    );
    obj.insert("snl_margin".into(), json_opt(snl.as_ref().map(|s| s.0)));
    obj.insert(
        "snl_violated".into(),
        snl.as_ref().map(|s| Value::Bool(s.1)).unwrap_or(Value::Null),
    );
    obj.insert(
        "witness_margin_single_pair".into(),
        json_opt(single.as_ref().map(|s| s.margin)),
    );
    obj.insert("n_invariance_delta".into(), json_opt(invariance_delta));
    print_summary(&Value::Object(obj))
}
