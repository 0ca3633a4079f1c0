//! Text formats: snapshot and dynamic-series CSV, life cycles, neighbor-pair
//! dumps and pattern reports.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use csv::{ReaderBuilder, StringRecord, Trim, WriterBuilder};

use crate::error::{Error, Result};
use crate::model::{BaseFeature, DynamicFeature, FeatureUniverse, Kind, LifeCycles};
use crate::neighborhood::NeighborPair;
use crate::scalar::{dist_sq, Scalar};
use crate::size2::TableInstance;
use crate::snapshot::{DynamicDatasetSeries, SeriesRecord, Snapshot};
use crate::verify::PatternResult;

pub const SNAPSHOT_HEADER: [&str; 5] = ["t_point", "feature", "instance_id", "x", "y"];
pub const SERIES_HEADER: [&str; 6] = ["t_index", "feature", "kind", "ordinal", "x", "y"];
pub const LIFECYCLE_HEADER: [&str; 2] = ["feature", "life_cycle"];
pub const PAIRS_HEADER: [&str; 7] = [
    "feature_a",
    "ordinal_a",
    "t_a",
    "feature_b",
    "ordinal_b",
    "t_b",
    "distance",
];
pub const SIZE2_HEADER: [&str; 3] = ["pattern", "dpi", "rows"];
pub const REPORT_HEADER: &str = "pattern;size;dpi;rows;maximal";

/// Which kind of CSV a file holds, judged by its header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputKind {
    Snapshots,
    Series,
}

/// Looks at the first line only.
pub fn sniff(text: &str) -> Option<InputKind> {
    let first = text.lines().next()?;
    let fields: Vec<&str> = first.split(',').map(str::trim).collect();
    if fields == SNAPSHOT_HEADER {
        Some(InputKind::Snapshots)
    } else if fields == SERIES_HEADER {
        Some(InputKind::Series)
    } else {
        None
    }
}

struct Rows<R> {
    inner: csv::Reader<R>,
    record: StringRecord,
}

impl<R: Read> Rows<R> {
    /// Opens a CSV source and checks its header.
    fn open(reader: R, header: &[&str]) -> Result<Self> {
        let mut inner = ReaderBuilder::new()
            .has_headers(false)
            .trim(Trim::All)
            .flexible(true)
            .from_reader(reader);
        let mut record = StringRecord::new();
        let found = inner.read_record(&mut record)?;
        if !found || record.iter().ne(header.iter().copied()) {
            return Err(Error::format(
                Some(1),
                format!("missing header: expected `{}`", header.join(",")),
            ));
        }
        Ok(Self { inner, record })
    }

    /// The next data row and its line number.
    fn next(&mut self, width: usize) -> Result<Option<(u64, &StringRecord)>> {
        loop {
            if !self.inner.read_record(&mut self.record)? {
                return Ok(None);
            }
            let line = self.record.position().map_or(0, |p| p.line());
            if self.record.len() == 1 && self.record[0].is_empty() {
                continue;
            }
            if self.record.len() != width {
                return Err(Error::format(
                    Some(line),
                    format!("expected {width} fields, found {}", self.record.len()),
                ));
            }
            return Ok(Some((line, &self.record)));
        }
    }
}

fn field<V: std::str::FromStr>(rec: &StringRecord, i: usize, name: &str, line: u64) -> Result<V> {
    rec[i]
        .parse()
        .map_err(|_| Error::format(Some(line), format!("invalid {name} `{}`", &rec[i])))
}

fn non_empty<'r>(rec: &'r StringRecord, i: usize, name: &str, line: u64) -> Result<&'r str> {
    match &rec[i] {
        "" => Err(Error::format(Some(line), format!("empty {name}"))),
        s => Ok(s),
    }
}

/// Reads `t_point,feature,instance_id,x,y` rows into snapshots ordered by
/// time point.
pub fn read_snapshots<T: Scalar>(reader: impl Read) -> Result<Vec<Snapshot<T>>> {
    let mut rows = Rows::open(reader, &SNAPSHOT_HEADER)?;
    let mut by_t: BTreeMap<u32, Snapshot<T>> = BTreeMap::new();
    while let Some((line, rec)) = rows.next(5)? {
        let t: u32 = field(rec, 0, "t_point", line)?;
        let feature = non_empty(rec, 1, "feature", line)?.to_owned();
        let id = non_empty(rec, 2, "instance_id", line)?.to_owned();
        let x: T = field(rec, 3, "x", line)?;
        let y: T = field(rec, 4, "y", line)?;
        by_t.entry(t)
            .or_insert_with(|| Snapshot::new(t))
            .push(feature, id, x, y);
    }
    Ok(by_t.into_values().collect())
}

pub fn write_snapshots<T: Scalar>(snapshots: &[Snapshot<T>], writer: impl Write) -> Result<()> {
    let mut w = WriterBuilder::new().from_writer(writer);
    w.write_record(SNAPSHOT_HEADER)?;
    for s in snapshots {
        for r in &s.records {
            w.write_record([
                s.t_point.to_string(),
                r.feature.clone(),
                r.instance_id.clone(),
                r.x.to_string(),
                r.y.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads `t_index,feature,kind,ordinal,x,y` rows. The window count is one
/// past the largest `t_index` (one for an empty file).
pub fn read_series<T: Scalar>(reader: impl Read) -> Result<DynamicDatasetSeries<T>> {
    let mut rows = Rows::open(reader, &SERIES_HEADER)?;
    let mut records = Vec::new();
    while let Some((line, rec)) = rows.next(6)? {
        let t_index: u32 = field(rec, 0, "t_index", line)?;
        let base = non_empty(rec, 1, "feature", line)?;
        let kind: Kind = field(rec, 2, "kind", line)?;
        let ordinal: u32 = field(rec, 3, "ordinal", line)?;
        if ordinal == 0 {
            return Err(Error::format(Some(line), "ordinals start at 1"));
        }
        records.push(SeriesRecord {
            feature: DynamicFeature::new(base, kind),
            ordinal,
            x: field(rec, 4, "x", line)?,
            y: field(rec, 5, "y", line)?,
            t_index,
        });
    }
    let n_windows = records.iter().map(|r| r.t_index as usize + 1).max().unwrap_or(1);
    DynamicDatasetSeries::from_records(n_windows, records)
}

/// Rows ordered by window, then feature, then ordinal.
pub fn write_series<T: Scalar>(series: &DynamicDatasetSeries<T>, writer: impl Write) -> Result<()> {
    let mut w = WriterBuilder::new().from_writer(writer);
    w.write_record(SERIES_HEADER)?;
    let mut order: Vec<_> = series.ids().collect();
    order.sort_by_key(|&id| (series.get(id).t_index, id));
    for id in order {
        let inst = series.get(id);
        let f = series.universe().get(inst.feature);
        w.write_record([
            inst.t_index.to_string(),
            f.base.to_string(),
            f.kind.to_string(),
            inst.ordinal.to_string(),
            inst.x.to_string(),
            inst.y.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_life_cycles(reader: impl Read) -> Result<LifeCycles> {
    let mut rows = Rows::open(reader, &LIFECYCLE_HEADER)?;
    let mut features = Vec::new();
    while let Some((line, rec)) = rows.next(2)? {
        features.push(BaseFeature {
            id: non_empty(rec, 0, "feature", line)?.to_owned(),
            life_cycle: field(rec, 1, "life_cycle", line)?,
        });
    }
    LifeCycles::new(features)
}

pub fn write_life_cycles(life_cycles: &LifeCycles, writer: impl Write) -> Result<()> {
    let mut w = WriterBuilder::new().from_writer(writer);
    w.write_record(LIFECYCLE_HEADER)?;
    for f in life_cycles.iter() {
        w.write_record([f.id, f.life_cycle.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Fails when `life_cycles` names a base feature the series does not have.
pub fn check_life_cycles<T: Scalar>(
    life_cycles: &LifeCycles,
    series: &DynamicDatasetSeries<T>,
) -> Result<()> {
    let known = series.universe().base_ids();
    for f in life_cycles.iter() {
        if !known.contains(&f.id.as_str()) {
            return Err(Error::config(format!(
                "life cycle given for unknown feature {}",
                f.id
            )));
        }
    }
    Ok(())
}

pub fn write_pairs<T: Scalar>(
    series: &DynamicDatasetSeries<T>,
    pairs: &[NeighborPair],
    writer: impl Write,
) -> Result<()> {
    let mut w = WriterBuilder::new().from_writer(writer);
    w.write_record(PAIRS_HEADER)?;
    for p in pairs {
        let (a, b) = (series.get(p.a), series.get(p.b));
        let d = dist_sq(a.position(), b.position()).to_f64_lossy().sqrt();
        w.write_record([
            series.universe().get(a.feature).to_string(),
            a.ordinal.to_string(),
            a.t_index.to_string(),
            series.universe().get(b.feature).to_string(),
            b.ordinal.to_string(),
            b.t_index.to_string(),
            d.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_size2<'a>(
    universe: &FeatureUniverse,
    tables: impl IntoIterator<Item = (&'a TableInstance, f64)>,
    writer: impl Write,
) -> Result<()> {
    let mut w = WriterBuilder::new().from_writer(writer);
    w.write_record(SIZE2_HEADER)?;
    for (t, dpi) in tables {
        w.write_record([
            universe.display(&t.pattern),
            dpi.to_string(),
            t.len().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One `pattern;size;dpi;rows;maximal` line per result, after an optional
/// block of `# key: value` lines and the header.
pub fn write_report(
    universe: &FeatureUniverse,
    preamble: &[(String, String)],
    results: &[PatternResult],
    mut writer: impl Write,
) -> Result<()> {
    for (k, v) in preamble {
        writeln!(writer, "# {k}: {v}")?;
    }
    writeln!(writer, "{REPORT_HEADER}")?;
    for r in results {
        writeln!(
            writer,
            "{};{};{};{};{}",
            universe.display(&r.pattern),
            r.pattern.len(),
            r.dpi,
            r.row_count,
            r.maximal
        )?;
    }
    writer.flush()?;
    Ok(())
}

/// A parsed report line, by name rather than feature index.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportLine {
    pub pattern: String,
    pub size: usize,
    pub dpi: f64,
    pub rows: usize,
    pub maximal: bool,
}

pub fn read_report(text: &str) -> Result<Vec<ReportLine>> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i as u64 + 1, l))
        .filter(|(_, l)| !l.starts_with('#') && !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim() == REPORT_HEADER => {}
        other => {
            return Err(Error::format(
                other.map(|(n, _)| n),
                format!("missing header: expected `{REPORT_HEADER}`"),
            ))
        }
    }
    lines
        .map(|(n, l)| {
            let parts: Vec<&str> = l.split(';').collect();
            if parts.len() != 5 {
                return Err(Error::format(Some(n), "expected 5 `;`-separated fields"));
            }
            let bad = |what: &str| Error::format(Some(n), format!("invalid {what}"));
            Ok(ReportLine {
                pattern: parts[0].to_owned(),
                size: parts[1].parse().map_err(|_| bad("size"))?,
                dpi: parts[2].parse().map_err(|_| bad("dpi"))?,
                rows: parts[3].parse().map_err(|_| bad("rows"))?,
                maximal: parts[4].parse().map_err(|_| bad("maximal flag"))?,
            })
        })
        .collect()
}
