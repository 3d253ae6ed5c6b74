//! CSV panel ingestion and export.
//!
//! The trading calendar is the intersection of the dates carrying any price,
//! the risk-free dates and (when present) the benchmark dates. Short gaps in
//! a series are forward-filled; assets with too many gaps are rejected with a
//! diagnostic instead of failing the load.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::Write;
use std::path::Path;

use lagcorr_core::panel::{
    fill_gaps, AssetFundamentals, BenchmarkName, BenchmarkSet, FundamentalField, FundamentalSeries, MissingPolicy,
    PriceSeries,
};
use lagcorr_core::{Date, PanelData, TradingCalendar};

use crate::error::{Error, Result};

pub const PRICES_HEADER: [&str; 3] = ["date", "asset_id", "close"];
pub const FUNDAMENTALS_HEADER: [&str; 7] = ["date", "asset_id", "cap", "mtb", "ev", "div_yield", "ebitda"];
pub const BENCHMARKS_HEADER: [&str; 3] = ["date", "name", "close"];
pub const RISKFREE_HEADER: [&str; 2] = ["date", "annual_yield"];

/// Input files of a panel; fundamentals and benchmarks are optional.
#[derive(Debug, Clone, Copy)]
pub struct PanelFiles<'a> {
    pub prices: &'a Path,
    pub fundamentals: Option<&'a Path>,
    pub benchmarks: Option<&'a Path>,
    pub riskfree: &'a Path,
}

fn open(path: &Path, header: &[&str]) -> Result<csv::Reader<File>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::read(path, e))?;
    let got = reader.headers().map_err(|e| Error::read(path, e))?;
    if got.iter().ne(header.iter().copied()) {
        return Err(Error::read(path, format!("expected header `{}`, got `{}`", header.join(","), got.iter().collect::<Vec<_>>().join(","))));
    }
    Ok(reader)
}

struct Rows {
    path: String,
    reader: csv::Reader<File>,
    record: csv::StringRecord,
}

impl Rows {
    fn new(path: &Path, header: &[&str]) -> Result<Self> {
        Ok(Self { path: path.display().to_string(), reader: open(path, header)?, record: csv::StringRecord::new() })
    }

    /// Advance to the next record; `None` at end of file.
    fn next(&mut self) -> Result<Option<&csv::StringRecord>> {
        match self.reader.read_record(&mut self.record) {
            Ok(true) => Ok(Some(&self.record)),
            Ok(false) => Ok(None),
            Err(e) => Err(Error::Data(format!("{}: {e}", self.path))),
        }
    }

    fn line(&self) -> u64 {
        self.record.position().map_or(0, |p| p.line())
    }

    fn date(&self, cell: &str) -> Result<Date> {
        cell.parse().map_err(|e| Error::Data(format!("{} line {}: date `{cell}`: {e}", self.path, self.line())))
    }

    fn number(&self, cell: &str) -> Result<Option<f64>> {
        if cell.is_empty() {
            return Ok(None);
        }
        let v: f64 = cell
            .parse()
            .map_err(|e| Error::Data(format!("{} line {}: value `{cell}`: {e}", self.path, self.line())))?;
        if !v.is_finite() {
            return Err(Error::Data(format!("{} line {}: non-finite value `{cell}`", self.path, self.line())));
        }
        Ok(Some(v))
    }
}

/// `key -> date -> value`, with keys kept in first-appearance order.
struct Keyed {
    order: Vec<String>,
    values: BTreeMap<String, BTreeMap<Date, f64>>,
}

fn read_keyed(path: &Path, header: &[&str], positive: bool) -> Result<Keyed> {
    let mut rows = Rows::new(path, header)?;
    let mut out = Keyed { order: Vec::new(), values: BTreeMap::new() };
    while let Some(rec) = rows.next()? {
        let (d, key, v) = (rec[0].to_string(), rec[1].to_string(), rec[2].to_string());
        let date = rows.date(&d)?;
        let Some(value) = rows.number(&v)? else { continue };
        if positive && value <= 0.0 {
            return Err(Error::Data(format!("{}: asset {key}: non-positive price {value} on {date}", path.display())));
        }
        let series = out.values.entry(key.clone()).or_insert_with(|| {
            out.order.push(key.clone());
            BTreeMap::new()
        });
        if series.insert(date, value).is_some() {
            return Err(Error::Data(format!("{}: duplicate row for {key} on {date}", path.display())));
        }
    }
    Ok(out)
}

fn on_calendar(series: &BTreeMap<Date, f64>, dates: &[Date]) -> Vec<Option<f64>> {
    dates.iter().map(|d| series.get(d).copied()).collect()
}

pub fn load_panel(files: PanelFiles<'_>, policy: MissingPolicy) -> Result<PanelData> {
    let prices = read_keyed(files.prices, &PRICES_HEADER, true)?;
    let mut riskfree = BTreeMap::new();
    let mut rows = Rows::new(files.riskfree, &RISKFREE_HEADER)?;
    while let Some(rec) = rows.next()? {
        let (d, v) = (rec[0].to_string(), rec[1].to_string());
        let date = rows.date(&d)?;
        if let Some(y) = rows.number(&v)? {
            if riskfree.insert(date, y).is_some() {
                return Err(Error::Data(format!("{}: duplicate date {date}", files.riskfree.display())));
            }
        }
    }
    let benchmarks = match files.benchmarks {
        Some(path) => {
            let b = read_keyed(path, &BENCHMARKS_HEADER, false)?;
            for name in &b.order {
                name.parse::<BenchmarkName>().map_err(|e| Error::read(path, e))?;
            }
            Some(b)
        }
        None => None,
    };

    let mut dates: BTreeSet<Date> = prices.values.values().flat_map(|s| s.keys().copied()).collect();
    dates.retain(|d| riskfree.contains_key(d));
    if let Some(b) = &benchmarks {
        let any: BTreeSet<Date> = b.values.values().flat_map(|s| s.keys().copied()).collect();
        dates.retain(|d| any.contains(d));
    }
    if dates.len() < 2 {
        return Err(Error::Data(format!(
            "calendars cannot be aligned: {} common dates across prices, risk-free and benchmarks",
            dates.len()
        )));
    }
    let dates: Vec<Date> = dates.into_iter().collect();
    let mut diagnostics = Vec::new();

    let mut series = Vec::new();
    for id in &prices.order {
        match fill_gaps(&on_calendar(&prices.values[id], &dates), policy) {
            Ok((values, filled)) => {
                if filled > 0 {
                    diagnostics.push(format!("asset {id}: forward-filled {filled} missing prices"));
                }
                series.push(PriceSeries { asset_id: id.clone(), values });
            }
            Err(why) => diagnostics.push(format!("asset {id} rejected: {why}")),
        }
    }

    let mut set = BenchmarkSet::new();
    if let Some(b) = &benchmarks {
        for name in &b.order {
            let bn: BenchmarkName = name.parse().map_err(Error::data)?;
            match fill_gaps(&on_calendar(&b.values[name], &dates), policy) {
                Ok((levels, filled)) => {
                    if filled > 0 {
                        diagnostics.push(format!("benchmark {name}: forward-filled {filled} missing levels"));
                    }
                    set.insert(bn, levels);
                }
                Err(why) => diagnostics.push(format!("benchmark {name} dropped: {why}")),
            }
        }
    }
    let rf: Vec<f64> = dates.iter().map(|d| riskfree[d]).collect();

    let fundamentals = match files.fundamentals {
        Some(path) => read_fundamentals(path, &dates, &series, &mut diagnostics)?,
        None => Vec::new(),
    };

    let calendar = TradingCalendar::new(dates).map_err(Error::data)?;
    PanelData::new(calendar, series, fundamentals, set, rf)
        .map(|p| p.with_diagnostics(diagnostics))
        .map_err(Error::data)
}

/// Reports take effect on the first trading day on or after their date.
fn read_fundamentals(
    path: &Path,
    dates: &[Date],
    assets: &[PriceSeries],
    diagnostics: &mut Vec<String>,
) -> Result<Vec<AssetFundamentals>> {
    let t = dates.len();
    let index: BTreeMap<&str, usize> = assets.iter().enumerate().map(|(i, p)| (p.asset_id.as_str(), i)).collect();
    let mut reports: Vec<Vec<Vec<Option<f64>>>> = vec![vec![vec![None; t]; FundamentalField::ALL.len()]; assets.len()];
    let mut reported: Vec<Vec<Vec<Option<Date>>>> = vec![vec![vec![None; t]; FundamentalField::ALL.len()]; assets.len()];
    let mut unknown = BTreeSet::new();
    let mut rows = Rows::new(path, &FUNDAMENTALS_HEADER)?;
    while let Some(rec) = rows.next()? {
        let rec = rec.clone();
        let date = rows.date(&rec[0])?;
        let Some(&a) = index.get(&rec[1]) else {
            unknown.insert(rec[1].to_string());
            continue;
        };
        let day = dates.partition_point(|d| *d < date);
        if day == t {
            continue;
        }
        for (f, field) in FundamentalField::ALL.iter().enumerate() {
            let Some(v) = rows.number(&rec[2 + f])? else { continue };
            // The latest report mapped onto a trading day wins.
            if reported[a][f][day].is_some_and(|prev| prev > date) {
                continue;
            }
            if reported[a][f][day] == Some(date) {
                return Err(Error::Data(format!(
                    "{}: duplicate {field} report for {} on {date}",
                    path.display(),
                    &rec[1]
                )));
            }
            reported[a][f][day] = Some(date);
            reports[a][f][day] = Some(v);
        }
    }
    for id in unknown {
        diagnostics.push(format!("fundamentals for {id} ignored: no price series"));
    }
    Ok(reports
        .into_iter()
        .map(|fields| {
            let mut af = AssetFundamentals::empty(t);
            for (field, r) in FundamentalField::ALL.iter().zip(fields) {
                af.set(*field, FundamentalSeries::from_reports(&r));
            }
            af
        })
        .collect())
}

fn render(name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(String, Vec<u8>)> {
    let err = |e: csv::Error| Error::Config(format!("{name}: {e}"));
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(&r).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(format!("{name}: {e}")))?;
    Ok((name.to_string(), bytes))
}

/// The four input files of `panel`, rendered in memory. Fundamentals are
/// written only on the days they were reported.
pub fn panel_files(panel: &PanelData) -> Result<Vec<(String, Vec<u8>)>> {
    let dates = panel.calendar().dates();
    let prices = dates.iter().enumerate().flat_map(|(t, date)| {
        panel.prices().iter().map(move |s| vec![date.to_string(), s.asset_id.clone(), s.values[t].to_string()])
    });
    let fundamentals = dates.iter().enumerate().flat_map(|(t, date)| {
        panel.prices().iter().enumerate().filter_map(move |(a, s)| {
            let f = panel.fundamentals(a);
            let cells: Vec<String> = FundamentalField::ALL
                .iter()
                .map(|&field| {
                    let series = f.get(field);
                    match series.at(t) {
                        Some(v) if !series.is_stale(t) => v.to_string(),
                        _ => String::new(),
                    }
                })
                .collect();
            if cells.iter().all(String::is_empty) {
                return None;
            }
            let mut record = vec![date.to_string(), s.asset_id.clone()];
            record.extend(cells);
            Some(record)
        })
    });
    let names: Vec<BenchmarkName> = panel.benchmarks().names().collect();
    let benchmarks = dates.iter().enumerate().flat_map(|(t, date)| {
        names.iter().map(move |&name| {
            let level = panel.benchmarks().levels(name).expect("listed")[t];
            vec![date.to_string(), name.as_str().to_string(), level.to_string()]
        })
    });
    let riskfree = dates.iter().zip(panel.riskfree()).map(|(d, y)| vec![d.to_string(), y.to_string()]);
    Ok(vec![
        render("prices.csv", &PRICES_HEADER, prices)?,
        render("fundamentals.csv", &FUNDAMENTALS_HEADER, fundamentals)?,
        render("benchmarks.csv", &BENCHMARKS_HEADER, benchmarks)?,
        render("riskfree.csv", &RISKFREE_HEADER, riskfree)?,
    ])
}

/// Write the four input files of `panel` into `dir`.
pub fn write_panel(panel: &PanelData, dir: &Path) -> Result<()> {
    write_atomically(dir, &panel_files(panel)?)
}

/// Stage `files` next to `dir` and move them in once all are written, so a
/// failed run never leaves a partial report set behind.
pub fn write_atomically(dir: &Path, files: &[(String, Vec<u8>)]) -> Result<()> {
    let cfg = |e: std::io::Error| Error::Config(format!("{}: {e}", dir.display()));
    std::fs::create_dir_all(dir).map_err(cfg)?;
    let staging = dir.join(format!(".staging-{}", std::process::id()));
    if staging.exists() {
        std::fs::remove_dir_all(&staging).map_err(cfg)?;
    }
    std::fs::create_dir(&staging).map_err(cfg)?;
    let staged = (|| {
        for (name, bytes) in files {
            let mut f = File::create(staging.join(name))?;
            f.write_all(bytes)?;
            f.sync_all()?;
        }
        for (name, _) in files {
            std::fs::rename(staging.join(name), dir.join(name))?;
        }
        Ok(())
    })();
    let cleanup = std::fs::remove_dir_all(&staging);
    staged.map_err(cfg)?;
    cleanup.map_err(cfg)
}
