//! Report files, rendered in memory so they can be written as one set.

use lagcorr_core::backtest::{BacktestOutput, BacktestReport};
use lagcorr_core::fields::CorrelationReport;
use lagcorr_core::{CorrelationEstimate, Date, DayRange, FieldEngine, PanelData};
use serde::Serialize;
use serde_json::json;

use crate::error::{Error, Result};

pub type OutputFile = (String, Vec<u8>);

fn csv_file(name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<OutputFile> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::Config(format!("{name}: {e}"));
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(&r).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(format!("{name}: {e}")))?;
    Ok((name.to_string(), bytes))
}

fn json_file(name: &str, value: &impl Serialize) -> Result<OutputFile> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::Config(format!("{name}: {e}")))?;
    bytes.push(b'\n');
    Ok((name.to_string(), bytes))
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

#[derive(Serialize)]
struct WindowInfo {
    first_day: usize,
    end_day: usize,
    first_date: Date,
    last_date: Date,
}

fn window_info(panel: &PanelData, w: DayRange) -> WindowInfo {
    WindowInfo {
        first_day: w.start,
        end_day: w.end,
        first_date: panel.calendar().date(w.start),
        last_date: panel.calendar().date(w.end - 1),
    }
}

fn study_rows(report: &CorrelationReport, lagged: bool) -> Vec<Vec<String>> {
    let leg = if lagged { "lagged" } else { "contemporary" };
    report
        .rows
        .iter()
        .map(|r| {
            let e: &CorrelationEstimate = if lagged { &r.lagged } else { &r.contemporary };
            vec![
                r.field.to_string(),
                leg.to_string(),
                e.rho.to_string(),
                e.ci_low.to_string(),
                e.ci_high.to_string(),
                e.n.to_string(),
            ]
        })
        .collect()
}

const STUDY_HEADER: [&str; 6] = ["field", "leg", "rho", "ci_low", "ci_high", "n"];

/// Factor indexes as `date,name,close` rows, each starting at 1.0.
fn factor_rows(panel: &PanelData, engine: &FieldEngine<'_>) -> Vec<Vec<String>> {
    let dates = panel.calendar().dates();
    let mut rows = Vec::new();
    for f in engine.factor_indexes() {
        let mut level = 1.0;
        rows.push(vec![dates[0].to_string(), f.name.as_str().to_string(), level.to_string()]);
        for (t, r) in f.returns.iter().enumerate() {
            level *= 1.0 + r;
            rows.push(vec![dates[t + 1].to_string(), f.name.as_str().to_string(), level.to_string()]);
        }
    }
    rows
}

fn panel_diagnostics(panel: &PanelData, engine: &FieldEngine<'_>) -> serde_json::Value {
    json!({
        "assets": panel.n_assets(),
        "days": panel.n_days(),
        "first_date": panel.calendar().date(0),
        "last_date": panel.calendar().date(panel.n_days() - 1),
        "load": panel.diagnostics(),
        "unavailable_benchmarks": engine.unavailable_benchmarks().iter()
            .map(|(b, why)| (b.as_str().to_string(), why.clone()))
            .collect::<std::collections::BTreeMap<_, _>>(),
    })
}

pub fn study_files(panel: &PanelData, engine: &FieldEngine<'_>, report: &CorrelationReport) -> Result<Vec<OutputFile>> {
    let dropped_assets: Vec<_> = report
        .dropped_assets
        .iter()
        .map(|d| json!({ "asset_id": panel.asset_id(d.asset), "field": d.field, "reason": d.reason }))
        .collect();
    let doc = json!({
        "window_a": window_info(panel, report.window_a),
        "window_b": window_info(panel, report.window_b),
        "rows": report.rows,
        "dropped_fields": report.dropped_fields,
        "dropped_assets": dropped_assets,
    });
    Ok(vec![
        csv_file("study_contemporary.csv", &STUDY_HEADER, study_rows(report, false))?,
        csv_file("study_lagged.csv", &STUDY_HEADER, study_rows(report, true))?,
        json_file("study.json", &doc)?,
        csv_file("factors.csv", &["date", "name", "close"], factor_rows(panel, engine))?,
        json_file("diagnostics.json", &panel_diagnostics(panel, engine))?,
    ])
}

const REPORT_HEADER: [&str; 10] = [
    "strategy",
    "months",
    "terminal_value",
    "annualized_return",
    "sharpe",
    "max_up",
    "max_dd",
    "months_plus",
    "fidelity",
    "max_peak_trough_dd",
];

pub fn backtest_files(
    panel: &PanelData,
    engine: &FieldEngine<'_>,
    output: &BacktestOutput,
    report: &BacktestReport,
) -> Result<Vec<OutputFile>> {
    let curves = output.curves.iter().flat_map(|c| {
        c.dates.iter().zip(&c.period_returns).zip(&c.values).map(move |((d, r), v)| {
            vec![d.to_string(), c.strategy.to_string(), r.to_string(), v.to_string()]
        })
    });
    let table = report.rows.iter().map(|r| {
        vec![
            r.strategy.to_string(),
            r.months.to_string(),
            r.terminal_value.to_string(),
            opt(r.annualized_return),
            opt(r.sharpe),
            opt(r.max_up),
            opt(r.max_dd),
            opt(r.months_plus),
            opt(r.fidelity),
            r.max_peak_trough_dd.to_string(),
        ]
    });
    let weights = output.months.iter().flat_map(|m| {
        m.weights.iter().flat_map(move |w| {
            w.weights.iter().enumerate().map(move |(a, x)| {
                vec![m.date.to_string(), w.strategy.to_string(), panel.asset_id(a).to_string(), x.to_string()]
            })
        })
    });
    let months: Vec<_> = output
        .months
        .iter()
        .map(|m| {
            json!({
                "date": m.date,
                "frontier": m.frontier,
                "adaptive": m.adaptive,
                "r_squared": m.model.as_ref().map(|x| x.r_squared),
                "dropped_assets": m.dropped_assets.iter().map(|&a| panel.asset_id(a)).collect::<Vec<_>>(),
                "dropped_fields": m.dropped_fields,
            })
        })
        .collect();
    let notes: std::collections::BTreeMap<String, &Vec<String>> =
        report.rows.iter().map(|r| (r.strategy.to_string(), &r.notes)).collect();
    let diagnostics = json!({
        "panel": panel_diagnostics(panel, engine),
        "notes": notes,
        "months": months,
    });
    let models: Vec<_> = output
        .months
        .iter()
        .filter_map(|m| m.model.as_ref().map(|model| json!({ "date": m.date, "model": model })))
        .collect();
    let mut files = vec![
        csv_file("curves.csv", &["date", "strategy", "period_return", "compounded_value"], curves)?,
        csv_file("report.csv", &REPORT_HEADER, table)?,
        json_file("report.json", report)?,
        json_file("diagnostics.json", &diagnostics)?,
        csv_file("weights.csv", &["date", "strategy", "asset_id", "weight"], weights)?,
    ];
    if !models.is_empty() {
        files.push(json_file("models.json", &models)?);
    }
    Ok(files)
}
