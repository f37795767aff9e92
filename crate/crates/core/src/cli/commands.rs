//! Subcommand implementations. Each takes a fully resolved [`RunConfig`].

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use super::config::{get, get_list, get_opt, RunConfig};
use super::format::{read_samples, write_records, write_samples, Draws, Estimate, ResultRecord, SampleFile};
use super::CliError;
use crate::barycenter::{sgd_gaussian_mixture, sgd_quotient, BarycenterReport, SgdConfig, StepSchedule};
use crate::baselines::{boundary_index, pivot_relabel, pivot_select, PivotChoice};
use crate::bures::{GaussianComponent, GaussianManifold};
use crate::group::{quotient_distance, GroupKind, GroupSpec};
use crate::manifold::{Euclidean, Point, ProductPoint};
use crate::metrics::{covariance_error, matched_mean_errors, matched_point_errors};
use crate::samplers::{
    default_template, ellipse_scenario, gmm5_scenario, line_scenario, mra_generate, mra_reconstruct,
    relative_error, sigma_for_snr, snr, EmpiricalStream, GmmScenario, MraGibbs, MraScenario,
};

const GEN: &[(&str, &str)] = &[
    ("scenario", "gmm5"),
    ("n", "2000"),
    ("seed", ""),
    ("out", ""),
    ("group", ""),
    ("k", "5"),
    ("jitter_mean", ""),
    ("jitter_cov", ""),
    ("snr", ""),
    ("sigma", ""),
    ("template", ""),
];

const BARYCENTER: &[(&str, &str)] = &[
    ("input", ""),
    ("truth", ""),
    ("seed", "0"),
    ("out", ""),
    ("iters", "5000"),
    ("group", "sym"),
    ("eval_samples", "256"),
    ("trace_every", ""),
    ("step_scale", "1"),
    ("step_offset", "0"),
    ("tail_average", ""),
];

const PIVOT: &[(&str, &str)] = &[
    ("input", ""),
    ("truth", ""),
    ("seed", "0"),
    ("out", ""),
    ("group", "sym"),
    ("pivot", "map"),
    ("relabeled", ""),
];

const COMPARE: &[(&str, &str)] = &[
    ("scenario", "ellipse"),
    ("methods", "sgd,pivot"),
    ("grid", "250,500,1000,2000"),
    ("pivot", "boundary"),
    ("iters", "4000"),
    ("seed", ""),
    ("out", ""),
    ("group", ""),
    ("jitter_mean", ""),
    ("jitter_cov", ""),
];

const MRA: &[(&str, &str)] = &[
    ("snr_grid", ""),
    ("sigma_grid", ""),
    ("template", ""),
    ("observations", "200"),
    ("sweeps", "2000"),
    ("burn_in", "100"),
    ("iters", ""),
    ("seed", "0"),
    ("out", ""),
    ("group", "cyc"),
];

const DEFAULT_SNR_GRID: [f64; 4] = [0.5, 1.0, 2.0, 4.0];

/// Every key a command reads, with its default.
pub fn defaults(command: &str) -> &'static [(&'static str, &'static str)] {
    match command {
        "gen" => GEN,
        "barycenter" => BARYCENTER,
        "pivot" => PIVOT,
        "compare" => COMPARE,
        "mra" => MRA,
        _ => &[],
    }
}

pub fn dispatch(command: &str, cfg: RunConfig) -> Result<Option<ResultRecord>, CliError> {
    let record = match command {
        "gen" => return gen(&cfg).map(|_| None),
        "barycenter" => barycenter(cfg)?,
        "pivot" => pivot(cfg)?,
        "compare" => compare(cfg)?,
        "mra" => mra(cfg)?,
        other => return Err(CliError::Validation(format!("unknown command `{other}`"))),
    };
    record.check_finite()?;
    emit(&record)?;
    Ok(Some(record))
}

fn out_path(cfg: &RunConfig) -> Option<PathBuf> {
    cfg.get("out").filter(|s| !s.is_empty()).map(PathBuf::from)
}

fn emit(record: &ResultRecord) -> Result<(), CliError> {
    match out_path(&record.config) {
        Some(p) => write_records(&p, std::slice::from_ref(record)),
        None => writeln!(std::io::stdout(), "{}", record.to_line())
            .map_err(|e| CliError::Io(format!("stdout: {e}"))),
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

fn group_for(cfg: &RunConfig, degree: usize, default: GroupKind) -> Result<GroupSpec, CliError> {
    let kind = match cfg.get("group").map(|s| s.trim()).unwrap_or("") {
        "" => default,
        raw => raw
            .parse()
            .map_err(|e: crate::Error| invalid(format!("invalid value for `group`: {e}")))?,
    };
    Ok(GroupSpec::new(kind, degree)?)
}

fn required_path(cfg: &RunConfig, key: &str) -> Result<PathBuf, CliError> {
    match cfg.get(key).map(|s| s.trim()) {
        None | Some("") => Err(invalid(format!("missing value for `{key}`"))),
        Some(p) => Ok(PathBuf::from(p)),
    }
}

fn named_gmm(name: &str, cfg: &RunConfig) -> Result<GmmScenario, CliError> {
    let mut s = match name {
        "gmm5" => gmm5_scenario(0),
        "ellipse" => ellipse_scenario(),
        other => return Err(invalid(format!("invalid value for `scenario`: unknown scenario `{other}`"))),
    };
    if let Some(seed) = get_opt(cfg, "seed")? {
        s.seed = seed;
    }
    if let Some(j) = get_opt(cfg, "jitter_mean")? {
        s.jitter_mean_std = j;
    }
    if let Some(j) = get_opt(cfg, "jitter_cov")? {
        s.jitter_cov_log_std = j;
    }
    s.group = group_for(cfg, s.true_components.len(), s.group.kind)?;
    s.validate()?;
    Ok(s)
}

fn mra_template(cfg: &RunConfig) -> Result<Vec<f64>, CliError> {
    let t: Vec<f64> = get_list(cfg, "template")?;
    Ok(if t.is_empty() { default_template() } else { t })
}

fn gen(cfg: &RunConfig) -> Result<(), CliError> {
    let n: usize = get(cfg, "n")?;
    if n == 0 {
        return Err(invalid("invalid value for `n`: must be at least 1"));
    }
    let scenario = cfg["scenario"].trim();
    let file = match scenario {
        "gmm5" | "ellipse" => {
            let mut sampler = named_gmm(scenario, cfg)?.sampler()?;
            let (draws, lp) = (0..n)
                .map(|_| {
                    let d = sampler.next_labeled();
                    (d.draw, d.log_density)
                })
                .unzip();
            SampleFile {
                draws: Draws::Gaussians(draws),
                log_density: Some(lp),
            }
        }
        "line" => {
            let k: usize = get(cfg, "k")?;
            if k < 2 {
                return Err(invalid("invalid value for `k`: need at least 2 components"));
            }
            let mut s = line_scenario(k, get_opt(cfg, "seed")?.unwrap_or(0))?;
            if let Some(j) = get_opt(cfg, "jitter_mean")? {
                s.jitter_std = j;
            }
            s.group = group_for(cfg, k, GroupKind::Symmetric)?;
            SampleFile {
                draws: Draws::Points(s.sampler()?.take(n).collect()),
                log_density: None,
            }
        }
        "mra" => {
            let template = mra_template(cfg)?;
            let sigma = match (get_opt::<f64>(cfg, "sigma")?, get_opt::<f64>(cfg, "snr")?) {
                (Some(_), Some(_)) => return Err(invalid("set only one of `sigma` and `snr`")),
                (Some(s), None) => s,
                (None, Some(r)) => sigma_for_snr(&template, r)?,
                (None, None) => sigma_for_snr(&template, 1.0)?,
            };
            let s = MraScenario {
                template,
                noise_std: sigma,
                num_observations: n,
                seed: get_opt(cfg, "seed")?.unwrap_or(0),
            };
            let obs = mra_generate(&s)?;
            SampleFile {
                draws: Draws::Points(
                    obs.iter()
                        .map(|y| ProductPoint::from_scalars(y))
                        .collect::<crate::Result<_>>()?,
                ),
                log_density: None,
            }
        }
        other => return Err(invalid(format!("invalid value for `scenario`: unknown scenario `{other}`"))),
    };
    match out_path(cfg) {
        Some(p) => write_samples(&p, &file),
        None => Err(invalid("missing value for `out`")),
    }
}

/// A single tuple of either kind.
enum Tuple {
    Points(ProductPoint<Point>),
    Gaussians(ProductPoint<GaussianComponent>),
}

fn load_truth(cfg: &RunConfig) -> Result<Option<Tuple>, CliError> {
    let raw = cfg.get("truth").map(|s| s.trim()).unwrap_or("");
    Ok(match raw {
        "" => None,
        "gmm5" => Some(Tuple::Gaussians(gmm5_scenario(0).true_components)),
        "ellipse" => Some(Tuple::Gaussians(ellipse_scenario().true_components)),
        path => Some(match read_samples(Path::new(path))?.draws {
            Draws::Points(mut d) => Tuple::Points(d.swap_remove(0)),
            Draws::Gaussians(mut d) => Tuple::Gaussians(d.swap_remove(0)),
        }),
    })
}

fn truth_metrics(
    estimate: &Tuple,
    truth: &Tuple,
    group: &GroupSpec,
    prefix: &str,
    metrics: &mut BTreeMap<String, f64>,
) -> Result<(), CliError> {
    let (distance, errors, cov) = match (estimate, truth) {
        (Tuple::Points(e), Tuple::Points(t)) => {
            let space = Euclidean::new(e.factors()[0].dim());
            (quotient_distance(&space, e, t, group)?, matched_point_errors(e, t)?, None)
        }
        (Tuple::Gaussians(e), Tuple::Gaussians(t)) => {
            let space = GaussianManifold::new(e.factors()[0].dim());
            (
                quotient_distance(&space, e, t, group)?,
                matched_mean_errors(e, t)?,
                Some(covariance_error(e, t)?),
            )
        }
        _ => return Err(invalid("`truth` and the draws are of different kinds")),
    };
    metrics.insert(format!("{prefix}distance_to_truth"), distance);
    metrics.insert(
        format!("{prefix}mean_error_max"),
        errors.iter().cloned().fold(0.0, f64::max),
    );
    for (i, e) in errors.iter().enumerate() {
        metrics.insert(format!("{prefix}mean_error_{i}"), *e);
    }
    if let Some(c) = cov {
        metrics.insert(format!("{prefix}covariance_error"), c);
    }
    Ok(())
}

fn estimate_of(t: &Tuple) -> Estimate {
    match t {
        Tuple::Points(p) => Estimate::from_points(p),
        Tuple::Gaussians(p) => Estimate::from_gaussians(p),
    }
}

fn sgd_config(cfg: &RunConfig) -> Result<SgdConfig, CliError> {
    let iterations: usize = get(cfg, "iters")?;
    let mut sgd = SgdConfig::new(iterations);
    sgd.seed = get(cfg, "seed")?;
    sgd.eval_samples = get(cfg, "eval_samples")?;
    if let Some(every) = get_opt(cfg, "trace_every")? {
        sgd.trace_every = every;
    }
    let scale: f64 = get(cfg, "step_scale")?;
    let offset: u64 = get(cfg, "step_offset")?;
    sgd.schedule = if offset == 0 {
        StepSchedule {
            scale,
            ..StepSchedule::default()
        }
    } else {
        StepSchedule::shifted(scale, offset)
    };
    sgd.tail_average = get_opt(cfg, "tail_average")?;
    sgd.validate()?;
    Ok(sgd)
}

fn record_report<P>(record: &mut ResultRecord, report: &BarycenterReport<P>) {
    let trace = &report.objective_trace;
    if let (Some(first), Some(last)) = (trace.first(), trace.last()) {
        record.metrics.insert("objective_initial".into(), first.objective);
        record.metrics.insert("objective_final".into(), last.objective);
        if let Some(t) = report.trailing_objective(0.1) {
            record.metrics.insert("objective_trailing".into(), t);
        }
    }
    record
        .metrics
        .insert("halved_steps".into(), report.halved_steps as f64);
    record.traces.insert(
        "objective".into(),
        BTreeMap::from([
            ("iteration".into(), trace.iter().map(|t| t.iteration as f64).collect()),
            ("objective".into(), trace.iter().map(|t| t.objective).collect()),
        ]),
    );
    record.timings.insert("wall_time".into(), vec![report.wall_time]);
}

fn barycenter(cfg: RunConfig) -> Result<ResultRecord, CliError> {
    let input = required_path(&cfg, "input")?;
    let sgd = sgd_config(&cfg)?;
    let truth = load_truth(&cfg)?;
    let file = read_samples(&input)?;
    let group = group_for(&cfg, file.draws.k(), GroupKind::Symmetric)?;
    let mut record = ResultRecord::new("barycenter", cfg);
    let estimate = match file.draws {
        Draws::Points(draws) => {
            let space = Euclidean::new(draws[0].factors()[0].dim());
            let report = sgd_quotient(EmpiricalStream::new(draws, sgd.seed)?, &space, &group, &sgd)?;
            record_report(&mut record, &report);
            Tuple::Points(report.estimate)
        }
        Draws::Gaussians(draws) => {
            let report = sgd_gaussian_mixture(EmpiricalStream::new(draws, sgd.seed)?, &group, &sgd)?;
            record_report(&mut record, &report);
            Tuple::Gaussians(report.estimate)
        }
    };
    if let Some(t) = &truth {
        truth_metrics(&estimate, t, &group, "", &mut record.metrics)?;
    }
    record.estimate = Some(estimate_of(&estimate));
    Ok(record)
}

fn pivot_choice(raw: &str, log_density: Option<&Vec<f64>>) -> Result<Option<PivotChoice>, CliError> {
    Ok(match raw.trim() {
        "map" => Some(PivotChoice::MapSample {
            log_density: log_density
                .cloned()
                .ok_or_else(|| invalid("`pivot = map` needs an `lp` column in the samples"))?,
        }),
        "boundary" => None,
        other => Some(PivotChoice::Index(other.parse().map_err(|_| {
            invalid(format!(
                "invalid value for `pivot` ({other:?}): expected map, boundary or a row index"
            ))
        })?)),
    })
}

fn pivot(cfg: RunConfig) -> Result<ResultRecord, CliError> {
    let input = required_path(&cfg, "input")?;
    let truth = load_truth(&cfg)?;
    let file = read_samples(&input)?;
    let group = group_for(&cfg, file.draws.k(), GroupKind::Symmetric)?;
    let choice = pivot_choice(&cfg["pivot"], file.log_density.as_ref())?;
    let relabeled_path = cfg.get("relabeled").filter(|s| !s.is_empty()).map(PathBuf::from);
    let mut record = ResultRecord::new("pivot", cfg);
    let clock = Instant::now();
    let (index, estimate, relabeled) = match file.draws {
        Draws::Points(draws) => {
            let index = match &choice {
                Some(c) => pivot_select(&draws, c)?,
                None => boundary_index(&draws)?,
            };
            let (relabeled, mean) = pivot_relabel(&draws, index, &group)?;
            (index, Tuple::Points(mean), Draws::Points(relabeled))
        }
        Draws::Gaussians(draws) => {
            let index = match &choice {
                Some(c) => pivot_select(&draws, c)?,
                None => boundary_index(&draws)?,
            };
            let (relabeled, mean) = pivot_relabel(&draws, index, &group)?;
            (index, Tuple::Gaussians(mean), Draws::Gaussians(relabeled))
        }
    };
    record
        .timings
        .insert("wall_time".into(), vec![clock.elapsed().as_secs_f64()]);
    record.metrics.insert("pivot_index".into(), index as f64);
    if let Some(t) = &truth {
        truth_metrics(&estimate, t, &group, "", &mut record.metrics)?;
    }
    record.estimate = Some(estimate_of(&estimate));
    if let Some(p) = relabeled_path {
        write_samples(
            &p,
            &SampleFile {
                draws: relabeled,
                log_density: file.log_density,
            },
        )?;
    }
    Ok(record)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Method {
    Sgd,
    Pivot,
}

fn parse_methods(cfg: &RunConfig) -> Result<Vec<Method>, CliError> {
    let names: Vec<String> = get_list(cfg, "methods")?;
    if names.is_empty() {
        return Err(invalid("invalid value for `methods`: empty"));
    }
    let mut out = Vec::new();
    for name in names {
        let m = match name.as_str() {
            "sgd" => Method::Sgd,
            "pivot" => Method::Pivot,
            "stephens" => return Err(invalid("method `stephens` is unavailable: out of scope")),
            other => return Err(invalid(format!("invalid value for `methods`: unknown method `{other}`"))),
        };
        if out.contains(&m) {
            return Err(invalid(format!("invalid value for `methods`: `{name}` listed twice")));
        }
        out.push(m);
    }
    Ok(out)
}

fn compare(mut cfg: RunConfig) -> Result<ResultRecord, CliError> {
    let methods = parse_methods(&cfg)?;
    let grid: Vec<usize> = get_list(&cfg, "grid")?;
    if grid.is_empty() || grid.contains(&0) {
        return Err(invalid("invalid value for `grid`: need positive sample counts"));
    }
    let iters: usize = get(&cfg, "iters")?;
    let scenario = named_gmm(cfg["scenario"].trim(), &cfg)?;
    cfg.insert("seed".into(), scenario.seed.to_string());
    let pivot_raw = cfg["pivot"].clone();

    let max_n = *grid.iter().max().expect("nonempty grid");
    let mut sampler = scenario.sampler()?;
    let (draws, lps): (Vec<_>, Vec<_>) = (0..max_n)
        .map(|_| {
            let d = sampler.next_labeled();
            (d.draw, d.log_density)
        })
        .unzip();
    let truth = Tuple::Gaussians(scenario.true_components.clone());
    let mut sgd = SgdConfig::new(iters);
    sgd.seed = scenario.seed;
    sgd.eval_samples = 0;
    sgd.validate()?;

    let mut record = ResultRecord::new("compare", cfg);
    for method in methods {
        let name = match method {
            Method::Sgd => "sgd",
            Method::Pivot => "pivot",
        };
        let mut columns: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        let mut times = Vec::new();
        let mut last = BTreeMap::new();
        for &n in &grid {
            let subset = &draws[..n];
            let (estimate, seconds) = match method {
                Method::Sgd => {
                    let stream = EmpiricalStream::new(subset.to_vec(), sgd.seed)?;
                    let report = sgd_gaussian_mixture(stream, &scenario.group, &sgd)?;
                    (report.estimate, report.wall_time)
                }
                Method::Pivot => {
                    let lp = lps[..n].to_vec();
                    let clock = Instant::now();
                    let index = match pivot_choice(&pivot_raw, Some(&lp))? {
                        Some(c) => pivot_select(subset, &c)?,
                        None => boundary_index(subset)?,
                    };
                    let (_, mean) = pivot_relabel(subset, index, &scenario.group)?;
                    (mean, clock.elapsed().as_secs_f64())
                }
            };
            last.clear();
            truth_metrics(&Tuple::Gaussians(estimate), &truth, &scenario.group, "", &mut last)?;
            columns.entry("n".into()).or_default().push(n as f64);
            for key in ["covariance_error", "mean_error_max", "distance_to_truth"] {
                columns.entry(key.into()).or_default().push(last[key]);
            }
            times.push(seconds);
        }
        for key in ["covariance_error", "mean_error_max", "distance_to_truth"] {
            record.metrics.insert(format!("{name}.{key}"), last[key]);
        }
        record.traces.insert(name.into(), columns);
        record.timings.insert(name.into(), times);
    }
    Ok(record)
}

fn mra(cfg: RunConfig) -> Result<ResultRecord, CliError> {
    if cfg["group"].trim() != "cyc" {
        return Err(invalid("invalid value for `group`: mra only supports cyc"));
    }
    let template = mra_template(&cfg)?;
    let sigma_grid: Vec<f64> = get_list(&cfg, "sigma_grid")?;
    let snr_grid: Vec<f64> = get_list(&cfg, "snr_grid")?;
    let sigmas = match (sigma_grid.is_empty(), snr_grid.is_empty()) {
        (false, false) => return Err(invalid("set only one of `snr_grid` and `sigma_grid`")),
        (false, true) => {
            if let Some(bad) = sigma_grid.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
                return Err(invalid(format!("invalid value for `sigma_grid`: {bad} is not positive")));
            }
            sigma_grid
        }
        (true, snr_empty) => {
            let grid = if snr_empty { DEFAULT_SNR_GRID.to_vec() } else { snr_grid };
            if let Some(bad) = grid.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
                return Err(invalid(format!("invalid value for `snr_grid`: {bad} is not positive")));
            }
            grid.iter()
                .map(|&r| sigma_for_snr(&template, r))
                .collect::<crate::Result<_>>()?
        }
    };
    let observations: usize = get(&cfg, "observations")?;
    let sweeps: usize = get(&cfg, "sweeps")?;
    let burn_in: usize = get(&cfg, "burn_in")?;
    let seed: u64 = get(&cfg, "seed")?;
    let iters: usize = get_opt(&cfg, "iters")?.unwrap_or(sweeps);
    let mut sgd = SgdConfig::new(iters);
    sgd.seed = seed.wrapping_add(2);
    sgd.eval_samples = 0;
    sgd.validate()?;
    let group = GroupSpec::cyclic(template.len())?;

    let mut record = ResultRecord::new("mra", cfg);
    let mut columns: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut times = Vec::new();
    for (i, &sigma) in sigmas.iter().enumerate() {
        let scenario = MraScenario {
            template: template.clone(),
            noise_std: sigma,
            num_observations: observations,
            seed,
        };
        let obs = mra_generate(&scenario)?;
        let clock = Instant::now();
        let draws: Vec<Vec<f64>> =
            MraGibbs::new(obs, sigma, sweeps, burn_in, seed.wrapping_add(1))?.collect();
        let reconstruction = mra_reconstruct(&draws, &sgd)?;
        times.push(clock.elapsed().as_secs_f64());
        let err = relative_error(&reconstruction, &template, &group)?;
        let ratio = snr(&template, sigma)?;
        columns.entry("snr".into()).or_default().push(ratio);
        columns.entry("sigma".into()).or_default().push(sigma);
        columns.entry("relative_error".into()).or_default().push(err);
        record.metrics.insert(format!("relative_error_{i}"), err);
        record.metrics.insert(format!("snr_{i}"), ratio);
    }
    record.traces.insert("errors".into(), columns);
    record.timings.insert("wall_time".into(), times);
    Ok(record)
}
