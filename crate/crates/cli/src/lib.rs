//! Command-line front end for the `itsa` library.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use indexmap::IndexMap;
use serde::Deserialize;
use serde_json::{json, Value};

use itsa::arx::{predict_arx, select_baseline, ArxSpec, BaselineSelection};
use itsa::dataset::parse_csv_detailed;
use itsa::design::{INTERCEPT, INTERVENTION, TIME_AFTER};
use itsa::diagnostics::{durbin_watson_test, DiagnosticsReport};
use itsa::effect::{counterfactual_series, effect_at, effect_series, write_plot_csv, LinearPredictor};
use itsa::{
    acf, build_design, fit_arx, fit_ols, likelihood_ratio_test, ljung_box, ArxFit, DesignMatrix,
    InterventionSpec, LrtResult, OlsFit, TimeCoding, TimeSeriesDataset,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_MODEL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug)]
enum CliError {
    Usage(String),
    Model(String),
}

impl From<itsa::Error> for CliError {
    fn from(e: itsa::Error) -> Self {
        CliError::Model(e.to_string())
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Model(e.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "itsa", version, about = "Interrupted time series analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Dataset checks.
    Data {
        #[command(subcommand)]
        action: DataAction,
    },
    /// Segmented OLS with confounders.
    Fit {
        #[command(flatten)]
        common: CommonArgs,
        /// Print `week,observed,fitted` instead of the coefficient table.
        #[arg(long)]
        predictions: bool,
    },
    /// Durbin-Watson, ACF and Ljung-Box on the OLS residuals.
    Diagnose {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 10)]
        lags: usize,
    },
    /// ARX baseline selection and likelihood-ratio tests.
    Arx {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        arx: ArxArgs,
    },
    /// Fitted versus counterfactual outcome.
    Effect {
        #[command(flatten)]
        common: CommonArgs,
        /// Report a single week instead of the post-intervention series.
        #[arg(long)]
        week: Option<u32>,
        /// Use the ARX full model instead of segmented OLS.
        #[arg(long)]
        arx: bool,
        #[command(flatten)]
        arx_args: ArxArgs,
    },
    /// Plot-ready CSV: week,observed,fitted,counterfactual[,arx_fitted].
    Export {
        #[command(flatten)]
        common: CommonArgs,
        /// Add one-step-ahead ARX predictions.
        #[arg(long)]
        arx: bool,
        #[command(flatten)]
        arx_args: ArxArgs,
        /// Destination file (stdout when absent).
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
enum DataAction {
    /// Parse and validate the input.
    Validate {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Outcome statistics overall and around the intervention.
    Summary {
        #[command(flatten)]
        common: CommonArgs,
    },
}

#[derive(Args, Debug, Clone, Default)]
struct CommonArgs {
    /// Input CSV.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Use the embedded OR-holds series.
    #[arg(long)]
    builtin_case_study: bool,
    /// JSON configuration; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    outcome: Option<String>,
    #[arg(long)]
    intervention_week: Option<u32>,
    #[arg(long)]
    lag: Option<u32>,
    /// Comma-separated covariate names (default: all covariates).
    #[arg(long, value_delimiter = ',')]
    confounders: Option<Vec<String>>,
    #[arg(long)]
    arx_max_order: Option<usize>,
    #[arg(long)]
    ci_level: Option<f64>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args, Debug, Clone, Default)]
struct ArxArgs {
    /// Baseline candidate sets, `;`-separated lists of comma-separated columns.
    #[arg(long)]
    candidates: Option<String>,
}

#[derive(ValueEnum, Deserialize, Debug, Clone, Copy, PartialEq, Eq, Default)]
#[serde(rename_all = "lowercase")]
enum Format {
    #[default]
    Table,
    Json,
    Csv,
}

#[derive(Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    data_path: Option<PathBuf>,
    builtin_case_study: Option<bool>,
    outcome_column: Option<String>,
    intervention_week: Option<u32>,
    lag: Option<u32>,
    confounders: Option<Vec<String>>,
    arx_max_order: Option<usize>,
    ci_level: Option<f64>,
    output_format: Option<Format>,
}

#[derive(Debug, Clone)]
enum Source {
    Builtin,
    Path(PathBuf),
}

/// Resolved analysis settings.
#[derive(Debug, Clone)]
struct AnalysisConfig {
    source: Source,
    outcome_column: Option<String>,
    intervention_week: Option<u32>,
    lag: u32,
    confounders: Option<Vec<String>>,
    arx_max_order: usize,
    ci_level: f64,
    output_format: Format,
}

impl AnalysisConfig {
    fn resolve(args: &CommonArgs) -> CliResult<Self> {
        let file = match &args.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
                serde_json::from_str::<ConfigFile>(&text)
                    .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))?
            }
            None => ConfigFile::default(),
        };
        let source = if args.builtin_case_study {
            if args.data.is_some() {
                return Err(CliError::Usage("--data and --builtin-case-study are exclusive".into()));
            }
            Source::Builtin
        } else if let Some(p) = &args.data {
            Source::Path(p.clone())
        } else if file.builtin_case_study == Some(true) {
            Source::Builtin
        } else if let Some(p) = file.data_path {
            Source::Path(p)
        } else {
            return Err(CliError::Usage("no input: pass --data PATH or --builtin-case-study".into()));
        };
        let cfg = AnalysisConfig {
            source,
            outcome_column: args.outcome.clone().or(file.outcome_column),
            intervention_week: args.intervention_week.or(file.intervention_week),
            lag: args.lag.or(file.lag).unwrap_or(0),
            confounders: args.confounders.clone().or(file.confounders),
            arx_max_order: args.arx_max_order.or(file.arx_max_order).unwrap_or(3),
            ci_level: args.ci_level.or(file.ci_level).unwrap_or(0.95),
            output_format: args.format.or(file.output_format).unwrap_or_default(),
        };
        if !(cfg.ci_level > 0.0 && cfg.ci_level < 1.0) {
            return Err(CliError::Usage(format!("--ci-level must lie in (0, 1), got {}", cfg.ci_level)));
        }
        if cfg.intervention_week == Some(0) {
            return Err(CliError::Usage("--intervention-week must be at least 1".into()));
        }
        Ok(cfg)
    }

    fn week(&self) -> CliResult<u32> {
        self.intervention_week
            .ok_or_else(|| CliError::Usage("--intervention-week is required".into()))
    }
}

struct Loaded {
    dataset: TimeSeriesDataset,
    warnings: Vec<String>,
    recorded: itsa::dataset::RecordedDesignColumns<f64>,
}

fn load(cfg: &AnalysisConfig) -> CliResult<Loaded> {
    let parsed = match &cfg.source {
        Source::Builtin => parse_csv_detailed(itsa::dataset::case_study_csv().as_bytes())?,
        Source::Path(p) => {
            let f = File::open(p).map_err(|e| CliError::Model(format!("cannot open {}: {e}", p.display())))?;
            parse_csv_detailed(f)?
        }
    };
    let dataset = match &cfg.outcome_column {
        Some(name) => parsed.dataset.with_outcome(name)?,
        None => parsed.dataset,
    };
    Ok(Loaded {
        dataset,
        warnings: parsed.warnings,
        recorded: parsed.recorded_design,
    })
}

fn confounders(cfg: &AnalysisConfig, ds: &TimeSeriesDataset) -> Vec<String> {
    match &cfg.confounders {
        Some(list) => list.iter().map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect(),
        None => ds.covariate_names().to_vec(),
    }
}

fn design(cfg: &AnalysisConfig, ds: &TimeSeriesDataset) -> CliResult<DesignMatrix> {
    let spec = InterventionSpec::new(cfg.week()?).with_lag(cfg.lag);
    let names = confounders(cfg, ds);
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    Ok(build_design(ds, spec, &refs, TimeCoding::SeriesStart)?)
}

/// Right-aligns every column but the first.
fn render_table(headers: &[&str], rows: &[Vec<String>]) -> String {
    let cols = headers.len();
    let mut width: Vec<usize> = headers.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (j, cell) in row.iter().enumerate() {
            width[j] = width[j].max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let mut line = |cells: Vec<&str>| {
        let mut s = String::new();
        for (j, cell) in cells.iter().enumerate() {
            if j > 0 {
                s.push_str("  ");
            }
            if j == 0 {
                let _ = write!(s, "{cell:<w$}", w = width[j]);
            } else {
                let _ = write!(s, "{cell:>w$}", w = width[j]);
            }
        }
        out.push_str(s.trim_end());
        out.push('\n');
    };
    line(headers.to_vec());
    line(width.iter().take(cols).map(|_| "").collect());
    for row in rows {
        line(row.iter().map(String::as_str).collect());
    }
    // The separator line is blank after trimming; replace it with dashes.
    let total: usize = width.iter().sum::<usize>() + 2 * (cols - 1);
    out.replacen("\n\n", &format!("\n{}\n", "-".repeat(total)), 1)
}

fn csv_rows(headers: &[&str], rows: &[Vec<String>]) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(headers).map_err(|e| CliError::Model(e.to_string()))?;
    for r in rows {
        w.write_record(r).map_err(|e| CliError::Model(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Model(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

fn coef(v: f64) -> String {
    format!("{v:.4}")
}

fn pval(p: f64) -> String {
    if p < 0.001 {
        "<0.001".into()
    } else {
        format!("{p:.3}")
    }
}

fn opt(v: Option<f64>, digits: usize) -> String {
    v.map(|x| format!("{x:.digits$}")).unwrap_or_else(|| "-".into())
}

fn json_text(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values serialize");
    s.push('\n');
    s
}

fn data_validate(cfg: &AnalysisConfig) -> CliResult<String> {
    let loaded = load(cfg)?;
    let ds = &loaded.dataset;
    let mut warnings = loaded.warnings.clone();
    if cfg.intervention_week.is_some() && !loaded.recorded.is_empty() {
        warnings.extend(design(cfg, ds)?.check_recorded(&loaded.recorded));
    }
    Ok(match cfg.output_format {
        Format::Json => json_text(&json!({
            "valid": true,
            "rows": ds.len(),
            "first_week": ds.first_week(),
            "last_week": ds.last_week(),
            "outcome": ds.outcome_name(),
            "covariates": ds.covariate_names(),
            "warnings": warnings,
        })),
        Format::Csv => csv_rows(
            &["field", "value"],
            &[
                vec!["valid".into(), "true".into()],
                vec!["rows".into(), ds.len().to_string()],
                vec!["first_week".into(), ds.first_week().to_string()],
                vec!["last_week".into(), ds.last_week().to_string()],
                vec!["outcome".into(), ds.outcome_name().into()],
                vec!["covariates".into(), ds.covariate_names().join(";")],
                vec!["warnings".into(), warnings.len().to_string()],
            ],
        )?,
        Format::Table => {
            let mut s = format!(
                "valid: {} weeks ({}-{}), outcome {}, covariates {}\n",
                ds.len(),
                ds.first_week(),
                ds.last_week(),
                ds.outcome_name(),
                ds.covariate_names().join(", ")
            );
            for w in &warnings {
                let _ = writeln!(s, "warning: {w}");
            }
            s
        }
    })
}

fn data_summary(cfg: &AnalysisConfig) -> CliResult<String> {
    let ds = load(cfg)?.dataset;
    let split = cfg.intervention_week.unwrap_or(ds.first_week());
    let s = ds.summarize(split)?;
    let mut segments = vec![("overall", &s.overall)];
    if cfg.intervention_week.is_some() {
        if let Some(b) = &s.before {
            segments.push(("before", b));
        }
        segments.push(("after", &s.after));
    }
    let rows: Vec<Vec<String>> = segments
        .iter()
        .map(|(name, st)| {
            vec![
                name.to_string(),
                st.count.to_string(),
                format!("{:.3}", st.mean),
                format!("{}", st.min),
                format!("{}", st.max),
            ]
        })
        .collect();
    let headers = ["segment", "count", "mean", "min", "max"];
    Ok(match cfg.output_format {
        Format::Json => {
            let mut m = IndexMap::new();
            m.insert("outcome".to_string(), json!(ds.outcome_name()));
            if let Some(w) = cfg.intervention_week {
                m.insert("split_week".into(), json!(w));
            }
            for (name, st) in &segments {
                m.insert(name.to_string(), json!(st));
            }
            json_text(&json!(m))
        }
        Format::Csv => csv_rows(&headers, &rows)?,
        Format::Table => render_table(&headers, &rows),
    })
}

fn fit_command(cfg: &AnalysisConfig, predictions: bool) -> CliResult<String> {
    let ds = load(cfg)?.dataset;
    let d = design(cfg, &ds)?;
    let fit = fit_ols(&d)?;
    if predictions {
        let rows: Vec<Vec<String>> = d
            .weeks()
            .iter()
            .zip(d.outcome())
            .zip(&fit.fitted)
            .map(|((w, y), f)| vec![w.to_string(), y.to_string(), f.to_string()])
            .collect();
        return csv_rows(&["week", "observed", "fitted"], &rows);
    }
    let report = fit.report();
    let rows: Vec<Vec<String>> = report
        .coefficients
        .iter()
        .map(|(name, r)| vec![name.clone(), coef(r.estimate), coef(r.se), format!("{:.3}", r.t), pval(r.p)])
        .collect();
    let headers = ["term", "estimate", "se", "t", "p"];
    Ok(match cfg.output_format {
        Format::Json => json_text(&json!({
            "model": "segmented-ols",
            "outcome": ds.outcome_name(),
            "intervention_week": cfg.intervention_week,
            "lag": cfg.lag,
            "coefficients": report.coefficients,
            "rss": report.rss,
            "deviance": report.deviance,
            "n": report.n,
            "k": report.k,
        })),
        Format::Csv => csv_rows(&headers, &rows)?,
        Format::Table => {
            let mut s = render_table(&headers, &rows);
            let _ = writeln!(
                s,
                "\nn = {}, k = {}, RSS = {:.4}, deviance = {}",
                report.n,
                report.k,
                report.rss,
                opt(report.deviance, 4)
            );
            s
        }
    })
}

fn diagnose_command(cfg: &AnalysisConfig, lags: usize) -> CliResult<String> {
    let ds = load(cfg)?.dataset;
    let d = design(cfg, &ds)?;
    let fit = fit_ols(&d)?;
    let dw = durbin_watson_test(&fit.residuals, &d)?;
    let residual_acf = acf(&fit.residuals, lags)?;
    let outcome_acf = acf(d.outcome(), lags)?;
    let lb = ljung_box(&fit.residuals, lags, 0)?;
    let report = DiagnosticsReport::new(&dw, &residual_acf, &lb);
    Ok(match cfg.output_format {
        Format::Json => json_text(&json!({
            "dw": report.dw,
            "dw_method": dw.method,
            "dw_null_mean": dw.null_mean,
            "acf": report.acf,
            "acf_band": report.acf_band,
            "outcome_acf": outcome_acf.correlations,
            "ljung_box": report.ljung_box,
        })),
        Format::Csv => {
            let mut rows = vec![
                vec!["durbin_watson".into(), String::new(), dw.statistic.to_string()],
                vec!["durbin_watson_p".into(), String::new(), dw.p_value.value().to_string()],
                vec!["ljung_box_q".into(), lags.to_string(), lb.statistic.to_string()],
                vec!["ljung_box_p".into(), lags.to_string(), lb.p_value.value().to_string()],
                vec!["acf_band".into(), String::new(), residual_acf.band.to_string()],
            ];
            for (l, (r, o)) in residual_acf.lags.iter().zip(residual_acf.correlations.iter().zip(&outcome_acf.correlations)) {
                rows.push(vec!["residual_acf".into(), l.to_string(), r.to_string()]);
                rows.push(vec!["outcome_acf".into(), l.to_string(), o.to_string()]);
            }
            csv_rows(&["measure", "lag", "value"], &rows)?
        }
        Format::Table => {
            let mut s = format!(
                "Durbin-Watson {:.4}, p = {} ({})\nLjung-Box Q({}) = {:.4}, p = {}\n\n",
                dw.statistic,
                pval(dw.p_value.value()),
                dw.method,
                lb.df,
                lb.statistic,
                pval(lb.p_value.value())
            );
            let band = residual_acf.band;
            let rows: Vec<Vec<String>> = residual_acf
                .lags
                .iter()
                .zip(residual_acf.correlations.iter().zip(&outcome_acf.correlations))
                .map(|(l, (r, o))| {
                    let mark = |v: f64| if v.abs() > band { "*" } else { "" };
                    vec![
                        l.to_string(),
                        format!("{r:.4}{}", mark(*r)),
                        format!("{o:.4}{}", mark(*o)),
                    ]
                })
                .collect();
            s.push_str(&render_table(&["lag", "residual acf", "outcome acf"], &rows));
            let _ = writeln!(s, "\n* outside the ±{band:.4} band ({:.0}%)", 100.0 * residual_acf.band_level);
            s
        }
    })
}

fn candidate_sets(arx: &ArxArgs, cfg: &AnalysisConfig, ds: &TimeSeriesDataset) -> Vec<Vec<String>> {
    if let Some(text) = &arx.candidates {
        return text
            .split(';')
            .map(|set| set.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect::<Vec<_>>())
            .filter(|set| !set.is_empty())
            .collect();
    }
    let conf = confounders(cfg, ds);
    let mut sets = vec![vec![INTERCEPT.to_string()]];
    for c in &conf {
        sets.push(vec![INTERCEPT.to_string(), c.clone()]);
    }
    if conf.len() > 1 {
        let mut all = vec![INTERCEPT.to_string()];
        all.extend(conf.iter().cloned());
        sets.push(all);
    }
    sets
}

struct ArxAnalysis {
    selection: BaselineSelection<f64>,
    baseline: ArxFit,
    full: ArxFit,
    trend: ArxFit,
    level_test: LrtResult,
    trend_test: LrtResult,
}

fn arx_analysis(cfg: &AnalysisConfig, arx: &ArxArgs, ds: &TimeSeriesDataset, d: &DesignMatrix) -> CliResult<ArxAnalysis> {
    let sets = candidate_sets(arx, cfg, ds);
    let selection = select_baseline(d, cfg.arx_max_order, &sets)?;
    let baseline = selection.best()?.clone();
    let mut exog: Vec<&str> = baseline.exogenous.iter().map(String::as_str).collect();
    exog.push(INTERVENTION);
    let full = fit_arx(d, &ArxSpec::new(baseline.order, &exog).with_label("full"))?;
    exog.push(TIME_AFTER);
    let trend = fit_arx(d, &ArxSpec::new(baseline.order, &exog).with_label("full+trend"))?;
    let level_test = likelihood_ratio_test(&baseline, &full)?;
    let trend_test = likelihood_ratio_test(&full, &trend)?;
    Ok(ArxAnalysis {
        selection,
        baseline: baseline.with_label("baseline"),
        full,
        trend,
        level_test,
        trend_test,
    })
}

trait Relabel {
    fn with_label(self, label: &str) -> Self;
}

impl Relabel for ArxFit {
    fn with_label(mut self, label: &str) -> Self {
        self.label = label.to_string();
        self
    }
}

fn model_rows(fit: &ArxFit) -> Vec<Vec<String>> {
    fit.param_names
        .iter()
        .zip(fit.beta.iter().chain(&fit.phi))
        .zip(&fit.standard_errors)
        .map(|((name, v), se)| vec![format!("{}:{name}", fit.label), coef(*v), coef(*se)])
        .collect()
}

fn lrt_row(name: &str, t: &LrtResult) -> Vec<String> {
    vec![
        name.to_string(),
        coef(t.deviance_baseline),
        coef(t.deviance_full),
        coef(t.lambda),
        t.df.to_string(),
        coef(t.critical_value),
        pval(t.p_value.value()),
        if t.significant { "yes" } else { "no" }.into(),
    ]
}

fn arx_command(cfg: &AnalysisConfig, arx: &ArxArgs) -> CliResult<String> {
    let ds = load(cfg)?.dataset;
    let d = design(cfg, &ds)?;
    let a = arx_analysis(cfg, arx, &ds, &d)?;
    let trace_rows: Vec<Vec<String>> = a
        .selection
        .trace
        .iter()
        .map(|c| {
            vec![
                c.order.to_string(),
                c.exogenous.join("+"),
                opt(c.deviance, 4),
                opt(c.bic, 4),
                c.ljung_box_p.map(pval).unwrap_or_else(|| "-".into()),
                if c.admissible { "yes" } else { "no" }.into(),
            ]
        })
        .collect();
    let trace_headers = ["order", "exogenous", "deviance", "bic", "ljung_box_p", "admissible"];
    Ok(match cfg.output_format {
        Format::Json => json_text(&json!({
            "selection": {
                "max_order": cfg.arx_max_order,
                "aligned_start": a.selection.aligned_start,
                "trace": a.selection.trace,
            },
            "baseline": a.baseline.report(),
            "full": a.full.report(),
            "full_with_trend": a.trend.report(),
            "level_change_test": a.level_test.report(),
            "trend_change_test": a.trend_test.report(),
        })),
        Format::Csv => csv_rows(&trace_headers, &trace_rows)?,
        Format::Table => {
            let mut s = String::from("Baseline selection (ranked by BIC)\n");
            s.push_str(&render_table(&trace_headers, &trace_rows));
            let _ = writeln!(s, "\nSelected: ARX({}) with {}\n", a.baseline.order, a.baseline.exogenous.join(", "));
            let mut rows = model_rows(&a.baseline);
            rows.extend(model_rows(&a.full));
            s.push_str(&render_table(&["parameter", "estimate", "se"], &rows));
            s.push('\n');
            s.push_str(&render_table(
                &["test", "D_baseline", "D_full", "lambda", "df", "critical", "p", "significant"],
                &[lrt_row("level change", &a.level_test), lrt_row("trend change", &a.trend_test)],
            ));
            s
        }
    })
}

fn estimate_rows(estimates: &[itsa::EffectEstimate]) -> Vec<Vec<String>> {
    estimates
        .iter()
        .map(|e| {
            vec![
                e.week.to_string(),
                format!("{}", e.observed),
                coef(e.fitted),
                coef(e.counterfactual),
                coef(e.absolute_change),
                opt(e.relative_change, 2),
                opt(e.ci_lower, 2),
                opt(e.ci_upper, 2),
            ]
        })
        .collect()
}

fn effect_report<M: LinearPredictor<f64>>(model: &M, d: &DesignMatrix, cfg: &AnalysisConfig, week: Option<u32>) -> CliResult<String> {
    let headers = ["week", "observed", "fitted", "counterfactual", "absolute", "relative_%", "ci_lower_%", "ci_upper_%"];
    if let Some(w) = week {
        let e = effect_at(model, d, w, cfg.ci_level)?;
        return Ok(match cfg.output_format {
            Format::Json => json_text(&json!(e)),
            Format::Csv => csv_rows(&headers, &estimate_rows(std::slice::from_ref(&e)))?,
            Format::Table => render_table(&headers, &estimate_rows(std::slice::from_ref(&e))),
        });
    }
    let series = effect_series(model, d, cfg.ci_level)?;
    let rows = estimate_rows(&series.estimates);
    Ok(match cfg.output_format {
        Format::Json => json_text(&json!({"estimates": series.estimates, "summary": series.summary})),
        Format::Csv => csv_rows(&headers, &rows)?,
        Format::Table => {
            let mut s = render_table(&headers, &rows);
            let sm = &series.summary;
            let _ = writeln!(
                s,
                "\npost-intervention weeks {}, mean absolute change {:.4}, mean relative change {}%, stable from post week {}",
                sm.post_weeks,
                sm.mean_absolute_change,
                opt(sm.mean_relative_change, 2),
                sm.weeks_to_stabilization.map_or("-".to_string(), |w| w.to_string())
            );
            s
        }
    })
}

fn effect_command(cfg: &AnalysisConfig, week: Option<u32>, use_arx: bool, arx: &ArxArgs) -> CliResult<String> {
    let ds = load(cfg)?.dataset;
    let d = design(cfg, &ds)?;
    if use_arx {
        let a = arx_analysis(cfg, arx, &ds, &d)?;
        effect_report(&a.full, &d, cfg, week)
    } else {
        effect_report(&fit_ols(&d)?, &d, cfg, week)
    }
}

fn export_command(cfg: &AnalysisConfig, use_arx: bool, arx: &ArxArgs, output: Option<&Path>, out: &mut dyn Write) -> CliResult<usize> {
    let ds = load(cfg)?.dataset;
    let d = design(cfg, &ds)?;
    let fit: OlsFit = fit_ols(&d)?;
    let cf = counterfactual_series(&fit, &d)?;
    let arx_pred = if use_arx {
        Some(predict_arx(&arx_analysis(cfg, arx, &ds, &d)?.full, &d)?)
    } else {
        None
    };
    let write = |w: &mut dyn Write| write_plot_csv(d.weeks(), d.outcome(), &fit.fitted, &cf, arx_pred.as_deref(), w);
    match output {
        Some(path) => {
            let file = File::create(path).map_err(|e| CliError::Model(format!("cannot write {}: {e}", path.display())))?;
            let mut w = BufWriter::new(file);
            let n = write(&mut w)?;
            w.flush()?;
            Ok(n)
        }
        None => Ok(write(out)?),
    }
}

fn dispatch(cli: Cli, out: &mut dyn Write) -> CliResult<()> {
    let text = match cli.command {
        Command::Data { action } => match action {
            DataAction::Validate { common } => data_validate(&AnalysisConfig::resolve(&common)?)?,
            DataAction::Summary { common } => data_summary(&AnalysisConfig::resolve(&common)?)?,
        },
        Command::Fit { common, predictions } => fit_command(&AnalysisConfig::resolve(&common)?, predictions)?,
        Command::Diagnose { common, lags } => diagnose_command(&AnalysisConfig::resolve(&common)?, lags)?,
        Command::Arx { common, arx } => arx_command(&AnalysisConfig::resolve(&common)?, &arx)?,
        Command::Effect { common, week, arx, arx_args } => {
            effect_command(&AnalysisConfig::resolve(&common)?, week, arx, &arx_args)?
        }
        Command::Export { common, arx, arx_args, output } => {
            let cfg = AnalysisConfig::resolve(&common)?;
            let n = export_command(&cfg, arx, &arx_args, output.as_deref(), out)?;
            if let Some(path) = output {
                format!("wrote {n} rows to {}\n", path.display())
            } else {
                String::new()
            }
        }
    };
    out.write_all(text.as_bytes())?;
    out.flush()?;
    Ok(())
}

/// Runs one invocation; `argv[0]` is the program name.
pub fn run_with(argv: &[String], out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            let sink: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = sink.write_all(rendered.as_bytes());
            return code;
        }
    };
    match dispatch(cli, out) {
        Ok(()) => EXIT_OK,
        Err(CliError::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}\n\nFor more information, try '--help'.");
            EXIT_USAGE
        }
        Err(CliError::Model(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_MODEL
        }
    }
}

pub fn run(argv: &[String]) -> i32 {
    let stdout = io::stdout();
    let stderr = io::stderr();
    run_with(argv, &mut stdout.lock(), &mut stderr.lock())
}
