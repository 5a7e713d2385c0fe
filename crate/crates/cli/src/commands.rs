//! Command implementations. Each command is reproducible: the manifest (or
//! flags) plus the seed fully determine every output byte.

use std::collections::HashMap;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};

use webmine_core::enrich::{self, Task};
use webmine_core::eval::{evaluate_split, SplitSpec};
use webmine_core::farmsim::{self, SimConfig};
use webmine_core::fingerprint::{fingerprint_pageviews, fingerprint_sessions};
use webmine_core::iforest::{self, DetectParams, IForestParams, Thresholding};
use webmine_core::ingest::{self, CsvSchema, Diagnostic};
use webmine_core::learn::{self, GridSearchSpec, ModelKind, ModelSpec, Scoring, TrainedModel};
use webmine_core::timefmt::TimestampFormat;
use webmine_core::types::{PageviewRecord, SessionRecord};
use webmine_core::viz;

use crate::kvfile;
use crate::{DetectArgs, EnrichArgs, EvaluateArgs, GenerateArgs, TrainArgs, UsageError};

fn warn_diagnostics(label: &str, diagnostics: &[Diagnostic]) {
    if diagnostics.is_empty() {
        return;
    }
    eprintln!("warning: {} {label} row(s) excluded:", diagnostics.len());
    for d in diagnostics.iter().take(5) {
        eprintln!("  {d}");
    }
    if diagnostics.len() > 5 {
        eprintln!("  ... and {} more", diagnostics.len() - 5);
    }
}

fn read_sessions(path: &Path) -> Result<Vec<SessionRecord>> {
    let schema = CsvSchema::sessions(TimestampFormat::Paper);
    let outcome = ingest::read_sessions(path, &schema)
        .with_context(|| format!("reading sessions from {}", path.display()))?;
    warn_diagnostics("session", &outcome.diagnostics);
    if outcome.records.is_empty() {
        bail!("no usable session rows in {}", path.display());
    }
    Ok(outcome.records)
}

fn read_pageviews(path: &Path, fmt: TimestampFormat) -> Result<(Vec<PageviewRecord>, usize)> {
    let schema = CsvSchema::pageviews(fmt);
    let outcome = ingest::read_pageviews(path, &schema)
        .with_context(|| format!("reading pageviews from {}", path.display()))?;
    warn_diagnostics("pageview", &outcome.diagnostics);
    if outcome.records.is_empty() {
        bail!("no usable pageview rows in {}", path.display());
    }
    let excluded = outcome.diagnostics.len();
    Ok((outcome.records, excluded))
}

fn write_text(path: &Path, content: &str) -> Result<()> {
    std::fs::write(path, content).with_context(|| format!("writing {}", path.display()))
}

fn apply_config_entry(config: &mut SimConfig, key: &str, value: &str) -> Result<()> {
    let parse = |what: &str, v: &str| -> Result<f64> {
        v.parse::<f64>()
            .map_err(|_| anyhow!("config key {what}: invalid number {v:?}"))
    };
    match key {
        "users" => config.user_count = parse(key, value)? as u32,
        "days" => config.day_count = parse(key, value)? as u32,
        "servers" => *config = config.clone().with_server_count(parse(key, value)? as u8),
        "seed" => config.seed = parse(key, value)? as u64,
        "noise" | "label_noise" => config.label_noise = parse(key, value)?,
        "sessions_per_user_day" => config.sessions_per_user_day = parse(key, value)?,
        "login_prob" => config.login_prob = parse(key, value)?,
        other => bail!(
            "unknown config key {other:?}; known keys: users, days, servers, seed, noise, sessions_per_user_day, login_prob"
        ),
    }
    Ok(())
}

pub fn generate(args: GenerateArgs) -> Result<()> {
    // Precedence: flags > config file > preset.
    let file_entries = match &args.config {
        Some(path) => kvfile::read(path)?,
        None => Vec::new(),
    };
    let file_value = |key: &str| -> Option<&str> {
        file_entries
            .iter()
            .rev()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    };
    let file_u32 = |key: &str| -> Result<Option<u32>> {
        file_value(key)
            .map(|v| v.parse::<u32>().map_err(|_| anyhow!("config key {key}: invalid integer {v:?}")))
            .transpose()
    };
    let users = match args.users {
        Some(u) => Some(u),
        None => file_u32("users")?,
    };
    let days = match args.days {
        Some(d) => Some(d),
        None => file_u32("days")?,
    };
    let mut config = match (&args.preset, users, days) {
        (Some(preset), _, _) => {
            let mut c = farmsim::scale_preset(preset)?;
            if let Some(u) = users {
                c.user_count = u;
            }
            if let Some(d) = days {
                c.day_count = d;
            }
            c
        }
        (None, Some(users), Some(days)) => SimConfig::new(users, days),
        (None, None, None) => {
            return Err(UsageError("either --preset or --users/--days is required".into()).into())
        }
        _ => return Err(UsageError("--users and --days must be given together".into()).into()),
    };
    for (key, value) in &file_entries {
        if key != "users" && key != "days" {
            apply_config_entry(&mut config, key, value)?;
        }
    }
    if let Some(servers) = args.servers {
        config = config.with_server_count(servers);
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(noise) = args.noise {
        config.label_noise = noise;
    }

    let out = farmsim::generate(&config)?;
    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let schema_pv = CsvSchema::pageviews(TimestampFormat::Paper);
    let schema_sess = CsvSchema::sessions(TimestampFormat::Paper);
    ingest::write_pageviews(args.out.join("pageviews.csv"), &out.pageviews, &schema_pv)?;
    ingest::write_sessions(args.out.join("sessions.csv"), &out.sessions, &schema_sess)?;
    ingest::write_pairs(
        args.out.join("ground_truth.csv"),
        ["Detail_ID", "Anomaly_Flag"],
        out.pageviews
            .iter()
            .zip(&out.truth.anomaly_flags)
            .map(|(p, &f)| (p.detail_id, i64::from(f))),
    )?;
    ingest::write_pairs(
        args.out.join("exits.csv"),
        ["Session_ID", "Exit_Method"],
        out.sessions.iter().map(|s| (s.session_id, s.exit_method)),
    )?;

    let fp_pageviews = fingerprint_pageviews(&out.pageviews);
    let fp_sessions = fingerprint_sessions(&out.sessions);
    let anomalies: usize = out.truth.anomaly_flags.iter().map(|&f| usize::from(f)).sum();
    let mut manifest: Vec<(String, String)> = vec![("command".into(), "generate".into())];
    if let Some(preset) = &args.preset {
        manifest.push(("preset".into(), preset.clone()));
    }
    manifest.extend([
        ("seed".into(), config.seed.to_string()),
        ("users".into(), config.user_count.to_string()),
        ("days".into(), config.day_count.to_string()),
        ("servers".into(), config.server_count.to_string()),
        ("sessions_per_user_day".into(), config.sessions_per_user_day.to_string()),
        ("login_prob".into(), config.login_prob.to_string()),
        ("label_noise".into(), config.label_noise.to_string()),
        ("pageview_count".into(), out.pageviews.len().to_string()),
        ("session_count".into(), out.sessions.len().to_string()),
        ("anomaly_count".into(), anomalies.to_string()),
        ("fingerprint_pageviews".into(), format!("{fp_pageviews:#018x}")),
        ("fingerprint_sessions".into(), format!("{fp_sessions:#018x}")),
    ]);
    write_text(&args.out.join("manifest.txt"), &kvfile::render(&manifest))?;

    println!(
        "generated {} pageviews / {} sessions over {} day(s), {} servers (seed {})",
        out.pageviews.len(),
        out.sessions.len(),
        config.day_count,
        config.server_count,
        config.seed
    );
    println!("fingerprints: pageviews {fp_pageviews:#018x}, sessions {fp_sessions:#018x}");
    Ok(())
}

pub fn enrich(args: EnrichArgs) -> Result<()> {
    let fmt = if args.iso { TimestampFormat::Iso8601 } else { TimestampFormat::Paper };
    let (pageviews, excluded) = read_pageviews(&args.pageviews, fmt)?;
    let exits: Option<HashMap<i64, i64>> = match &args.exits {
        Some(path) => Some(
            ingest::read_pairs(path, ["Session_ID", "Exit_Method"])?
                .into_iter()
                .collect(),
        ),
        None => None,
    };
    let outcome = enrich::sessionize(&pageviews, exits.as_ref());
    for d in &outcome.diagnostics {
        eprintln!("warning: session {} skipped: {}", d.session_id, d.reason);
    }
    let skipped_pageviews: usize = outcome
        .diagnostics
        .iter()
        .map(|d| pageviews.iter().filter(|p| p.session_id == d.session_id).count())
        .sum();

    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    let written = ingest::write_sessions(&args.out, &outcome.sessions, &CsvSchema::sessions(fmt))?;

    let total_pages: i64 = outcome.sessions.iter().map(|s| s.page_count).sum();
    let expected = pageviews.len() - skipped_pageviews;
    println!(
        "mass conservation: Σ page_count = {total_pages} over {written} sessions; input rows used = {expected} ({excluded} malformed excluded, {skipped_pageviews} in skipped sessions) → {}",
        if total_pages == expected as i64 { "OK" } else { "MISMATCH" }
    );
    Ok(())
}

fn model_kind(flag: &str) -> ModelKind {
    match flag {
        "cart" => ModelKind::Cart,
        "rf" => ModelKind::RandomForest,
        "gb" => ModelKind::GradientBoosting,
        "lr" => ModelKind::LogisticRegression,
        "svm" => ModelKind::SvmRbf,
        other => unreachable!("clap filters model kinds, got {other}"),
    }
}

fn task_of(args: &TrainArgs) -> Result<Task> {
    Ok(match args.task.as_str() {
        "exit-method" => Task::ExitMethod,
        "last-service" => Task::LastService,
        "service-access" => Task::ServiceAccess(args.service.clone()),
        other => unreachable!("clap filters tasks, got {other}"),
    })
}

fn hyperparameter_lines(model: &TrainedModel) -> Vec<(String, String)> {
    model
        .hyperparameters
        .iter()
        .map(|(k, v)| (format!("param_{k}"), v.clone()))
        .collect()
}

pub fn train(args: TrainArgs) -> Result<()> {
    let sessions = read_sessions(&args.sessions)?;
    let task = task_of(&args)?;
    let matrix = task.features(&sessions)?;
    let base = ModelSpec::default_for(model_kind(&args.model), args.seed);

    let mut report: Vec<(String, String)> = vec![
        ("command".into(), "train".into()),
        ("task".into(), task.tag()),
        ("model".into(), base.kind().as_str().into()),
        ("seed".into(), args.seed.to_string()),
        ("rows".into(), matrix.n_rows().to_string()),
        ("features".into(), matrix.n_cols().to_string()),
        ("classes".into(), matrix.class_names.join("|")),
    ];

    let model = if let Some(grid_path) = &args.grid {
        let axes = kvfile::read(grid_path)?;
        if axes.is_empty() {
            bail!("grid file {} has no axes", grid_path.display());
        }
        let grid: Vec<(String, Vec<f64>)> = axes
            .into_iter()
            .map(|(name, values)| Ok((name, kvfile::parse_number_list(&values)?)))
            .collect::<Result<_>>()?;
        let spec = GridSearchSpec {
            grid,
            k: 5,
            stratified: true,
            scoring: Scoring::Accuracy,
            seed: args.seed,
        };
        let (result, model) = learn::grid_search_and_train(&matrix, &base, &spec)?;
        report.push(("cv_folds".into(), spec.k.to_string()));
        for (i, point) in result.table.iter().enumerate() {
            let assignments: Vec<String> = point
                .assignments
                .iter()
                .map(|(name, value)| format!("{name}={value}"))
                .collect();
            let folds: Vec<String> = point.fold_scores.iter().map(|s| format!("{s:.6}")).collect();
            report.push((
                format!("cv_combo_{i}"),
                format!(
                    "{} | folds: {} | mean: {:.6}",
                    assignments.join(", "),
                    folds.join(", "),
                    point.mean_score
                ),
            ));
        }
        report.push(("cv_best_index".into(), result.best_index.to_string()));
        report.push(("cv_best_score".into(), format!("{:.6}", result.best().mean_score)));
        println!(
            "grid search: {} combinations × {} folds; best mean CV score {:.4}",
            result.table.len(),
            spec.k,
            result.best().mean_score
        );
        model
    } else {
        base.train(&matrix, args.seed)?
    };

    let model = model.with_provenance(fingerprint_sessions(&sessions), 0, Some(task.tag()));
    if let Some(sub) = model.hyperparameters.get("subsampled_from") {
        eprintln!(
            "warning: input of {sub} rows exceeded the kernel workspace cap; trained on {} rows",
            model.hyperparameters["training_rows_used"]
        );
    }
    report.extend(hyperparameter_lines(&model));
    report.push((
        "dataset_fingerprint".into(),
        format!("{:#018x}", model.meta.dataset_fingerprint),
    ));

    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    learn::save_model(&model, &args.out)?;
    let report_path = args.out.with_extension("report.txt");
    write_text(&report_path, &kvfile::render(&report))?;
    println!(
        "trained {} on {} rows → {} (report: {})",
        model.kind.as_str(),
        matrix.n_rows(),
        args.out.display(),
        report_path.display()
    );
    Ok(())
}

pub fn evaluate(args: EvaluateArgs) -> Result<()> {
    if !(args.split > 0.0 && args.split < 1.0) {
        return Err(UsageError("--split must be in (0, 1)".into()).into());
    }
    let model = learn::load_model(&args.model)?;
    let task_tag = model
        .meta
        .task
        .clone()
        .ok_or_else(|| anyhow!("model file has no task tag; retrain with this tool"))?;
    let task = Task::parse(&task_tag)?;
    let spec = model.spec()?;

    let sessions = read_sessions(&args.sessions)?;
    let matrix = task.features(&sessions)?;
    println!(
        "evaluating {} on task {task_tag}: retraining on {:.0}% and reporting on the held-out {:.0}%",
        model.kind.as_str(),
        (1.0 - args.split) * 100.0,
        args.split * 100.0
    );
    let split = SplitSpec {
        train_fraction: 1.0 - args.split,
        stratified: true,
        seed: args.seed,
    };
    let eval = evaluate_split(&spec, &matrix, &split)?;

    print!("{}", eval.report.to_table());
    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    write_text(&args.out.join("report.csv"), &eval.report.to_csv())?;

    if matches!(
        model.kind,
        ModelKind::Cart | ModelKind::RandomForest | ModelKind::GradientBoosting
    ) {
        let importance = eval.model.feature_importance()?;
        let mut csv = String::from("Feature,Importance\n");
        for (name, value) in &importance {
            csv.push_str(&format!("{name},{value:.6}\n"));
        }
        write_text(&args.out.join("feature_importance.csv"), &csv)?;
        let svg = viz::bar_svg("Feature importance", &importance);
        write_text(&args.out.join("feature_importance.svg"), &svg)?;
    }
    Ok(())
}

pub fn detect(args: DetectArgs) -> Result<()> {
    let (pageviews, _) = read_pageviews(&args.pageviews, TimestampFormat::Paper)?;
    let params = DetectParams {
        forest: IForestParams {
            n_trees: args.trees,
            subsample_size: args.subsample,
            seed: args.seed,
        },
        thresholding: Thresholding::Contamination(args.contamination),
        baseline: args.baseline,
        ..DetectParams::default()
    };
    let report = iforest::detect_per_server(&pageviews, &params)?;
    for (server, reason) in &report.skipped {
        eprintln!("warning: server {server} skipped: {reason}");
    }

    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let file = std::fs::File::create(args.out.join("anomaly_report.csv"))
        .with_context(|| "creating anomaly_report.csv")?;
    iforest::write_report_csv(&report, file)?;

    for server in &report.servers {
        let points: Vec<viz::ScatterPoint> = server
            .points
            .iter()
            .map(|p| viz::ScatterPoint {
                x: p.index as f64,
                y: p.page_load_time,
                anomaly: p.iforest_flag,
            })
            .collect();
        let svg = viz::scatter_svg(
            &format!("Server {}", server.server_id),
            "Index",
            "Page Load Time (s)",
            &points,
        );
        write_text(&args.out.join(format!("server_{}.svg", server.server_id)), &svg)?;
        match server.baseline_anomalies {
            Some(baseline) => println!(
                "server {}: {} pageviews, {} iforest anomalies (score ≥ {:.4}), {} baseline anomalies (mean {:.3} ± sd {:.3})",
                server.server_id,
                server.points.len(),
                server.iforest_anomalies,
                server.score_threshold,
                baseline,
                server.mean_load_time,
                server.sd_load_time
            ),
            None => println!(
                "server {}: {} pageviews, {} iforest anomalies (score ≥ {:.4})",
                server.server_id,
                server.points.len(),
                server.iforest_anomalies,
                server.score_threshold
            ),
        }
    }
    println!("total anomalies: {}", report.total_anomalies());
    Ok(())
}
