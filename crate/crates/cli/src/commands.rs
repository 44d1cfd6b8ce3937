use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use morbo::acquisition::Sampler;
use morbo::engine::{self, RunConfig, RunRecord};
use morbo::Error;

use crate::{ExportArgs, Overrides, ReplicateArgs, ReportArgs, RunArgs, OUT_DIR_ENV};

type CmdResult = Result<ExitCode, Error>;

fn load_config(path: &Option<PathBuf>) -> Result<RunConfig, Error> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn parse_sampler(text: &str) -> Result<Sampler, Error> {
    if text == "exact" {
        return Ok(Sampler::Exact);
    }
    if let Some(n) = text.strip_prefix("rff:") {
        let num_features = n
            .parse::<usize>()
            .map_err(|_| Error::InvalidConfig(format!("bad sampler spec `{text}`")))?;
        return Ok(Sampler::Rff { num_features });
    }
    Err(Error::InvalidConfig(format!(
        "unknown sampler `{text}` (expected `exact` or `rff:<num_features>`)"
    )))
}

fn apply_overrides(config: &mut RunConfig, o: &Overrides) -> Result<(), Error> {
    if let Some(seed) = o.seed {
        config.run.seed = seed;
    }
    if let Some(nf) = o.budget {
        config.budget.nf = nf;
    }
    if let Some(q) = o.batch {
        config.budget.q = q;
    }
    if let Some(problem) = &o.problem {
        config.problem.name = problem.clone();
    }
    if let Some(sampler) = &o.sampler {
        config.sampler = parse_sampler(sampler)?;
    }
    if let Some(n_tr) = o.n_tr {
        config.trust_region.n_tr = n_tr;
    }
    if let Some(tau_fail) = o.tau_fail {
        config.trust_region.tau_fail = Some(tau_fail);
    }
    if let Some(dir) = &o.out_dir {
        config.run.out_dir = Some(dir.clone());
    }
    Ok(())
}

fn out_dir(config: &RunConfig) -> PathBuf {
    config
        .run
        .out_dir
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("morbo-out"))
}

fn run_one(config: &RunConfig, method: &str) -> Result<RunRecord, Error> {
    let problem = config.problem.instantiate()?;
    match method {
        "morbo" => engine::run(problem.as_ref(), config),
        "sobol" => engine::run_sobol_baseline(problem.as_ref(), config),
        other => Err(Error::InvalidConfig(format!(
            "unknown method `{other}` (expected `morbo` or `sobol`)"
        ))),
    }
}

fn record_dir(base: &Path, config: &RunConfig, method: &str) -> PathBuf {
    base.join(format!("{}-{}-s{}", config.problem.name, method, config.run.seed))
}

fn print_run_summary(record: &RunRecord, dir: &Path) {
    println!(
        "{} {} seed {}: {} evaluations, {} iterations, final hypervolume {}, front size {}",
        record.config.problem.name,
        record.method,
        record.seed(),
        record.observations.len(),
        record.hv_trace.len().saturating_sub(1),
        record.final_hypervolume(),
        record.final_front.len()
    );
    println!("record written to {}", dir.display());
}

pub fn run(args: RunArgs) -> CmdResult {
    let mut config = load_config(&args.config)?;
    apply_overrides(&mut config, &args.overrides)?;
    config.validate()?;
    let record = run_one(&config, &args.method)?;
    let dir = record_dir(&out_dir(&config), &config, &record.method);
    record.save(&dir)?;
    print_run_summary(&record, &dir);
    if record.incomplete {
        eprintln!(
            "run aborted: {}",
            record.abort_reason.as_deref().unwrap_or("unknown evaluation failure")
        );
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

pub fn replicate(args: ReplicateArgs) -> CmdResult {
    let seeds = parse_seeds(&args.seeds)?;
    let mut config = load_config(&args.config)?;
    apply_overrides(&mut config, &args.overrides)?;
    config.validate()?;
    let base = out_dir(&config);
    let mut records = Vec::new();
    let mut any_incomplete = false;
    for &seed in &seeds {
        let mut cfg = config.clone();
        cfg.run.seed = seed;
        let record = run_one(&cfg, &args.method)?;
        let dir = record_dir(&base, &cfg, &record.method);
        record.save(&dir)?;
        print_run_summary(&record, &dir);
        any_incomplete |= record.incomplete;
        records.push(record);
    }
    let table = median_table(&records)?;
    let path = base.join(format!(
        "{}-{}-aggregate.tsv",
        config.problem.name, args.method
    ));
    std::fs::write(&path, &table)?;
    println!("aggregate written to {}", path.display());
    print!("{table}");
    Ok(if any_incomplete { ExitCode::from(1) } else { ExitCode::SUCCESS })
}

fn parse_seeds(text: &str) -> Result<Vec<u64>, Error> {
    let bad = || Error::InvalidConfig(format!("bad --seeds `{text}` (use `a..b` or `a,b,c`)"));
    if let Some((a, b)) = text.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().parse().map_err(|_| bad())?;
        if b < a {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    let seeds: Vec<u64> = text
        .split(',')
        .map(|t| t.trim().parse::<u64>())
        .collect::<Result<_, _>>()
        .map_err(|_| bad())?;
    if seeds.is_empty() {
        return Err(bad());
    }
    Ok(seeds)
}

/// Linear-interpolation percentile over a sorted slice.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    if sorted.len() == 1 {
        return sorted[0];
    }
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Per-method median and quartile hypervolume at each batch boundary.
fn median_table(records: &[RunRecord]) -> Result<String, Error> {
    if records.is_empty() {
        return Err(Error::InvalidArgument("no records".into()));
    }
    let problem = &records[0].config.problem.name;
    if records.iter().any(|r| &r.config.problem.name != problem) {
        return Err(Error::InvalidArgument(
            "records mix different problems; report them separately".into(),
        ));
    }
    let mut methods: Vec<String> = Vec::new();
    for r in records {
        if !methods.contains(&r.method) {
            methods.push(r.method.clone());
        }
    }
    let boundaries: Vec<usize> = records[0].hv_trace.iter().map(|p| p.evaluations).collect();
    for r in records {
        let this: Vec<usize> = r.hv_trace.iter().map(|p| p.evaluations).collect();
        if this != boundaries {
            return Err(Error::InvalidArgument(
                "records have differing hypervolume-trace shapes".into(),
            ));
        }
    }
    let mut table = String::new();
    table.push_str("evaluations");
    for m in &methods {
        let _ = write!(table, "\t{m}_median\t{m}_q25\t{m}_q75");
    }
    table.push('\n');
    for (row, &evals) in boundaries.iter().enumerate() {
        let _ = write!(table, "{evals}");
        for m in &methods {
            let mut values: Vec<f64> = records
                .iter()
                .filter(|r| &r.method == m)
                .map(|r| r.hv_trace[row].hypervolume)
                .collect();
            values.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let _ = write!(
                table,
                "\t{}\t{}\t{}",
                percentile(&values, 0.5),
                percentile(&values, 0.25),
                percentile(&values, 0.75)
            );
        }
        table.push('\n');
    }
    Ok(table)
}

pub fn report(args: ReportArgs) -> CmdResult {
    let records: Vec<RunRecord> = args
        .records
        .iter()
        .map(|dir| RunRecord::load(dir))
        .collect::<Result<_, _>>()?;
    let table = median_table(&records)?;
    match &args.out {
        Some(path) => std::fs::write(path, &table)?,
        None => print!("{table}"),
    }
    Ok(ExitCode::SUCCESS)
}

pub fn export_pareto(args: ExportArgs) -> CmdResult {
    let record = RunRecord::load(&args.record)?;
    let mut text = String::new();
    text.push_str("# x[dim] objectives[m]\n");
    for row in &record.final_front {
        let mut parts: Vec<String> = row.x.iter().map(|v| v.to_string()).collect();
        parts.extend(row.objectives.iter().map(|v| v.to_string()));
        text.push_str(&parts.join(" "));
        text.push('\n');
    }
    match &args.out {
        Some(path) => std::fs::write(path, &text)?,
        None => print!("{text}"),
    }
    Ok(ExitCode::SUCCESS)
}
