use std::collections::HashMap;
use std::path::{Path, PathBuf};

use custmix::pipeline::{
    estimate_pipeline, generate_log, group_baskets, ingest_path, run_validation, segment_period, split_periods,
    write_records_csv, Basket, IngestOptions, IngestSummary, Periodization, RunConfig, SyntheticSpec,
};
use custmix::simulation::{
    run_scenario, run_sweep, scenario_catalog, write_summary_json, write_sweep, write_scenario_table, ScenarioConfig,
    DEFAULT_REPLICATIONS,
};
use custmix::{Error, Result};
use serde::Serialize;

use crate::output::{create, create_dir, read_text, write_json};
use crate::{GenerateArgs, PipelineArgs, SimulateArgs, ValidateArgs};

fn run_config(args: &PipelineArgs) -> Result<RunConfig> {
    let mut config = match &args.config {
        Some(path) => RunConfig::from_toml(&read_text(path)?)?,
        None => RunConfig::default(),
    };
    if let Some(v) = args.seed {
        config.seed = v;
    }
    if let Some(v) = args.period {
        config.period = v;
    }
    if let Some(v) = args.estimator {
        config.estimator = v;
    }
    if let Some(v) = &args.n_baskets {
        config.n_baskets = v.clone();
    }
    if let Some(v) = &args.m_segments {
        config.m_segments = v.clone();
    }
    if let Some(v) = args.frequency_cap {
        config.frequency_cap = v;
    }
    if let Some(v) = &args.prior_gamma {
        config.prior_gamma = Some(v.clone());
    }
    if let Some(v) = args.delimiter {
        config.delimiter = v;
    }
    if let Some(v) = &args.out {
        config.output_dir = Some(v.clone());
    }
    config.validate()?;
    Ok(config)
}

fn output_dir(config: &RunConfig) -> Result<PathBuf> {
    let dir = config.output_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    create_dir(&dir)?;
    Ok(dir)
}

fn load(args: &PipelineArgs, config: &RunConfig) -> Result<(Vec<Basket>, IngestSummary)> {
    let ingested = ingest_path(&args.input, &IngestOptions { delimiter: config.delimiter as u8 })?;
    for r in &ingested.summary.rejected {
        log::warn!("{}:{}: rejected row: {}", args.input.display(), r.line, r.reason);
    }
    let baskets = group_baskets(&ingested.records)?;
    let baskets = baskets.into_iter().filter(|b| config.in_range(b.date)).collect::<Vec<_>>();
    if baskets.is_empty() {
        return Err(Error::EmptySample("no receipts in the configured date range".into()));
    }
    Ok((baskets, ingested.summary))
}

#[derive(Serialize)]
struct EstimateOutput<'a> {
    config: &'a RunConfig,
    ingestion: &'a IngestSummary,
    reports: &'a [custmix::pipeline::Report],
}

pub fn estimate(args: &PipelineArgs) -> Result<()> {
    let config = run_config(args)?;
    let dir = output_dir(&config)?;
    let (baskets, summary) = load(args, &config)?;
    let reports = split_periods(baskets, config.period)?
        .iter()
        .map(|(label, part)| estimate_pipeline(part, &config, label))
        .collect::<Result<Vec<_>>>()?;
    write_json(&dir.join("report.json"), &EstimateOutput { config: &config, ingestion: &summary, reports: &reports })?;

    let path = dir.join("segments.csv");
    let mut w = csv::Writer::from_writer(create(&path)?);
    let rows = reports.iter().flat_map(|rep| {
        rep.segments.iter().map(move |s| {
            vec![
                rep.period.clone(),
                s.segment.clone(),
                s.q0_hat.to_string(),
                s.q_hat.to_string(),
                s.f0_hat.to_string(),
                s.monitored_customers.to_string(),
                s.estimated_customers.to_string(),
                s.naive_customers.to_string(),
                s.penetration.to_string(),
                s.center.iter().map(|c| format!("{c:.6}")).collect::<Vec<_>>().join(" "),
            ]
        })
    });
    let header = [
        "period",
        "segment",
        "q0_hat",
        "q_hat",
        "f0_hat",
        "monitored_customers",
        "estimated_customers",
        "naive_customers",
        "penetration",
        "center",
    ];
    write_rows(&mut w, &path, header.iter().map(|s| s.to_string()).collect(), rows)?;
    for rep in &reports {
        println!(
            "{}: a0={} a={} monitored={} estimated={:.1} naive={:.1}",
            rep.period,
            rep.a0,
            rep.a,
            rep.totals.monitored_customers,
            rep.totals.estimated_customers,
            rep.totals.naive_customers
        );
    }
    Ok(())
}

fn write_rows<W: std::io::Write>(
    w: &mut csv::Writer<W>,
    path: &Path,
    header: Vec<String>,
    rows: impl Iterator<Item = Vec<String>>,
) -> Result<()> {
    let err = |e: csv::Error| Error::Io {
        path: path.display().to_string(),
        source: std::io::Error::other(e.to_string()),
    };
    w.write_record(&header).map_err(err)?;
    for row in rows {
        w.write_record(&row).map_err(err)?;
    }
    w.flush().map_err(|source| Error::Io { path: path.display().to_string(), source })
}

fn read_flags(path: &Path) -> Result<HashMap<String, bool>> {
    let text = read_text(path)?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut flags = HashMap::new();
    for (k, row) in rdr.records().enumerate() {
        let line = k + 2;
        let row = row.map_err(|e| Error::Parse { line, message: e.to_string() })?;
        let (Some(id), Some(flag)) = (row.get(0), row.get(1)) else {
            return Err(Error::Parse { line, message: "expected customer_id,flag".into() });
        };
        let flag = match flag.to_ascii_lowercase().as_str() {
            "1" | "true" | "yes" => true,
            "0" | "false" | "no" => false,
            other => return Err(Error::Parse { line, message: format!("flag `{other}` is not a boolean") }),
        };
        flags.insert(id.to_string(), flag);
    }
    Ok(flags)
}

pub fn validate(args: &ValidateArgs) -> Result<()> {
    let config = run_config(&args.pipeline)?;
    let dir = output_dir(&config)?;
    let (baskets, _) = load(&args.pipeline, &config)?;
    let flags = read_flags(&args.flags)?;
    let table = run_validation(&baskets, &flags, &config, &args.periods)?;
    write_json(&dir.join("validation.json"), &table)?;

    let path = dir.join("validation.csv");
    let mut w = csv::Writer::from_writer(create(&path)?);
    let header = ["periodization", "period", "true_customers", "estimated_customers", "naive_customers", "ape", "naive_ape"];
    let rows = table.rows.iter().map(|r| {
        vec![
            r.periodization.name().to_string(),
            r.period.clone(),
            r.true_customers.to_string(),
            r.estimated_customers.to_string(),
            r.naive_customers.to_string(),
            format!("{:.4}", r.ape),
            format!("{:.4}", r.naive_ape),
        ]
    });
    write_rows(&mut w, &path, header.iter().map(|s| s.to_string()).collect(), rows)?;

    let path = dir.join("validation_summary.csv");
    let mut w = csv::Writer::from_writer(create(&path)?);
    let header = ["period", "obs", "naive_M", "naive_SD", "naive_WC", "proposed_M", "proposed_SD", "proposed_WC"];
    let rows = table.summary.iter().map(|s| {
        let mut row = vec![s.periodization.name().to_string(), s.obs.to_string()];
        for e in [s.naive, s.proposed] {
            row.extend([e.mean, e.sd, e.worst].map(|v| format!("{v:.2}")));
        }
        row
    });
    write_rows(&mut w, &path, header.iter().map(|s| s.to_string()).collect(), rows)?;
    for s in &table.summary {
        println!(
            "{}: obs={} naive M={:.2} proposed M={:.2}",
            s.periodization.name(),
            s.obs,
            s.naive.mean,
            s.proposed.mean
        );
    }
    Ok(())
}

fn scenarios(args: &SimulateArgs) -> Result<Vec<ScenarioConfig>> {
    if let Some(path) = &args.scenario_file {
        let config: ScenarioConfig =
            toml::from_str(&read_text(path)?).map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
        return Ok(vec![config]);
    }
    let catalog = scenario_catalog();
    match args.scenario.as_deref() {
        None | Some("all") if args.sweep.is_none() => Ok(catalog),
        None | Some("all") => Ok(catalog.into_iter().filter(|c| c.label == "ii").collect()),
        Some(label) => {
            let found: Vec<ScenarioConfig> = catalog.into_iter().filter(|c| c.label == label).collect();
            if found.is_empty() {
                return Err(Error::Input(format!("unknown scenario `{label}`; expected i to ix or all")));
            }
            Ok(found)
        }
    }
}

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    create_dir(&args.out)?;
    let mut configs = scenarios(args)?;
    for c in &mut configs {
        if let Some(nu) = args.nu {
            c.replications = nu;
        } else if args.scenario_file.is_none() {
            c.replications = DEFAULT_REPLICATIONS;
        }
        if let Some(seed) = args.seed {
            c.master_seed = seed;
        }
        c.extra_estimators.extend(args.extra.iter().copied());
        c.validate()?;
    }
    match args.sweep {
        Some(axis) => {
            let base = &configs[0];
            let grid = args.grid.clone().unwrap_or_else(|| axis.default_grid());
            let sweep = run_sweep(axis, &grid, base, base.replications)?;
            let path = args.out.join(format!("sweep_{}.csv", axis.name()));
            write_sweep(&sweep, create(&path)?)?;
            for row in sweep.rows() {
                println!(
                    "{}={} {}: mean APE {:.3} ± {:.3}",
                    axis.name(),
                    row.value,
                    row.estimator,
                    row.mean_ape,
                    row.ci_half_width
                );
            }
        }
        None => {
            let results = configs.iter().map(run_scenario).collect::<Result<Vec<_>>>()?;
            write_scenario_table(&results, create(&args.out.join("scenarios.csv"))?)?;
            write_summary_json(&results, create(&args.out.join("summary.json"))?)?;
            for res in &results {
                let cols: Vec<String> = res
                    .summaries
                    .iter()
                    .map(|s| format!("{} M={:.2} SD={:.2} q95={:.2}", s.estimator, s.ape.mean, s.ape.sd, s.ape.q95))
                    .collect();
                println!("({}) {}: {}", res.label, res.description, cols.join(", "));
            }
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct PeriodClusters {
    period: String,
    n_baskets: usize,
    m_segments: usize,
    basket_db_index: Option<f64>,
    segment_db_index: Option<f64>,
    basket_centers: Vec<Vec<f64>>,
    segment_centers: Vec<Vec<f64>>,
    basket_sizes: Vec<usize>,
    segment_sizes: Vec<usize>,
}

pub fn cluster_only(args: &PipelineArgs) -> Result<()> {
    let config = run_config(args)?;
    let dir = output_dir(&config)?;
    let (baskets, _) = load(args, &config)?;
    let basket_path = dir.join("baskets.csv");
    let customer_path = dir.join("customers.csv");
    let mut basket_rows = Vec::new();
    let mut customer_rows = Vec::new();
    let mut summary = Vec::new();
    for (label, part) in split_periods(baskets, config.period)? {
        let seg = segment_period(&part, &config, &label)?;
        for (b, t) in seg.baskets.iter().zip(&seg.types.assignments) {
            basket_rows.push(vec![label.clone(), b.basket_id.clone(), t.to_string()]);
        }
        for (((id, _), s), v) in seg.customers.iter().zip(&seg.segments.assignments).zip(&seg.visits) {
            customer_rows.push(vec![label.clone(), id.clone(), s.to_string(), v.to_string()]);
        }
        println!(
            "{label}: {} basket types, {} customer segments",
            seg.types.k, seg.segments.k
        );
        summary.push(PeriodClusters {
            period: label,
            n_baskets: seg.types.k,
            m_segments: seg.segments.k,
            basket_db_index: seg.types.db_index,
            segment_db_index: seg.segments.db_index,
            basket_sizes: seg.types.cluster_sizes(),
            segment_sizes: seg.segments.cluster_sizes(),
            basket_centers: seg.types.centers,
            segment_centers: seg.segments.centers,
        });
    }
    let mut w = csv::Writer::from_writer(create(&basket_path)?);
    let header = ["period", "basket_id", "basket_type"].map(String::from).to_vec();
    write_rows(&mut w, &basket_path, header, basket_rows.into_iter())?;
    let mut w = csv::Writer::from_writer(create(&customer_path)?);
    let header = ["period", "customer_id", "segment", "visits"].map(String::from).to_vec();
    write_rows(&mut w, &customer_path, header, customer_rows.into_iter())?;
    write_json(&dir.join("clusters.json"), &summary)
}

pub fn generate(args: &GenerateArgs) -> Result<()> {
    let spec = SyntheticSpec::three_segment(args.scale, args.months);
    let log = generate_log(&spec, args.seed)?;
    write_records_csv(&log.records, create(&args.out)?)?;
    if let Some(path) = &args.flags_out {
        let mut flags: Vec<(&String, &bool)> = log.flags.iter().collect();
        flags.sort();
        let mut w = csv::Writer::from_writer(create(path)?);
        let rows = flags.into_iter().map(|(id, f)| vec![id.clone(), (if *f { "1" } else { "0" }).to_string()]);
        write_rows(&mut w, path, vec!["customer_id".into(), "flag".into()], rows)?;
    }
    if let Some(path) = &args.truth_out {
        let mut truth = log.true_unmonitored(Periodization::Month);
        truth.extend(log.true_unmonitored(Periodization::All));
        write_json(path, &truth)?;
    }
    println!("wrote {} product lines to {}", log.records.len(), args.out.display());
    Ok(())
}
