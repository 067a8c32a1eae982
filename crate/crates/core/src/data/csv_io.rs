//! Comma-separated matrix files: one series per row, one time point per
//! column. Missing entries are empty cells or the literal `NaN`. An optional
//! header row whose first cell is `id` switches on a leading id column.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::series::ObservedSeries;

/// Column aggregation applied after parsing (e.g. 15-minute readings to
/// hourly totals). An aggregated cell is observed only if every cell in its
/// block is; a trailing partial block is dropped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Aggregate {
    #[default]
    None,
    Sum(usize),
    Mean(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct CsvData {
    pub series: ObservedSeries,
    pub ids: Option<Vec<String>>,
    pub time_labels: Option<Vec<String>>,
}

pub fn load_csv(path: impl AsRef<Path>, aggregate: Aggregate) -> Result<CsvData> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, aggregate)
}

pub fn read_csv<R: Read>(reader: R, aggregate: Aggregate) -> Result<CsvData> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut ids: Option<Vec<String>> = None;
    let mut time_labels = None;
    let mut cells: Vec<Option<f64>> = Vec::new();
    let mut width: Option<usize> = None;
    let mut n = 0;

    for (row_idx, record) in rdr.records().enumerate() {
        let row = row_idx + 1;
        let record = record.map_err(|e| Error::Parse {
            row,
            col: 0,
            msg: e.to_string(),
        })?;
        if row_idx == 0 && record.get(0) == Some("id") {
            time_labels = Some(record.iter().skip(1).map(str::to_string).collect::<Vec<_>>());
            ids = Some(Vec::new());
            width = Some(record.len() - 1);
            continue;
        }
        let mut fields = record.iter();
        let skip = if let Some(ids) = ids.as_mut() {
            ids.push(fields.next().unwrap_or_default().to_string());
            1
        } else {
            0
        };
        let values: Vec<&str> = fields.collect();
        match width {
            None => width = Some(values.len()),
            Some(w) if w != values.len() => {
                return Err(Error::RaggedRows {
                    row,
                    got: values.len(),
                    expected: w,
                })
            }
            _ => {}
        }
        for (c, field) in values.iter().enumerate() {
            cells.push(parse_cell(field).ok_or_else(|| Error::Parse {
                row,
                col: c + 1 + skip,
                msg: format!("not a number: {field:?}"),
            })?);
        }
        n += 1;
    }
    let t_count = width.unwrap_or(0);
    if n == 0 || t_count == 0 {
        return Err(Error::Parse {
            row: 1,
            col: 1,
            msg: "no data".into(),
        });
    }
    let (cells, t_count) = aggregate_columns(&cells, n, t_count, aggregate)?;
    Ok(CsvData {
        series: ObservedSeries::from_cells(n, t_count, &cells)?,
        ids,
        time_labels: if aggregate == Aggregate::None { time_labels } else { None },
    })
}

fn parse_cell(field: &str) -> Option<Option<f64>> {
    if field.is_empty() || field.eq_ignore_ascii_case("nan") {
        return Some(None);
    }
    let v: f64 = field.parse().ok()?;
    v.is_finite().then_some(Some(v))
}

fn aggregate_columns(
    cells: &[Option<f64>],
    n: usize,
    t_count: usize,
    aggregate: Aggregate,
) -> Result<(Vec<Option<f64>>, usize)> {
    let (block, mean) = match aggregate {
        Aggregate::None => return Ok((cells.to_vec(), t_count)),
        Aggregate::Sum(b) => (b, false),
        Aggregate::Mean(b) => (b, true),
    };
    if block == 0 || block > t_count {
        return Err(Error::InvalidArgument(format!(
            "aggregation block {block} for {t_count} columns"
        )));
    }
    let out_t = t_count / block;
    let mut out = Vec::with_capacity(n * out_t);
    for i in 0..n {
        let row = &cells[i * t_count..(i + 1) * t_count];
        for chunk in row.chunks_exact(block) {
            let total: Option<f64> = chunk.iter().copied().sum();
            out.push(total.map(|s| if mean { s / block as f64 } else { s }));
        }
    }
    Ok((out, out_t))
}

pub fn save_csv(path: impl AsRef<Path>, series: &ObservedSeries, ids: Option<&[String]>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_csv(&mut out, series, ids).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

/// Writes values with round-trip float formatting; missing cells are empty.
pub fn write_csv<W: Write>(out: W, series: &ObservedSeries, ids: Option<&[String]>) -> std::io::Result<()> {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
    if ids.is_some() {
        let header = std::iter::once("id".to_string()).chain((0..series.t_count()).map(|t| t.to_string()));
        w.write_record(header)?;
    }
    for i in 0..series.n() {
        let cells = (0..series.t_count()).map(|t| series.get(i, t).map_or_else(String::new, |v| v.to_string()));
        match ids {
            Some(ids) => w.write_record(std::iter::once(ids[i].clone()).chain(cells))?,
            None => w.write_record(cells)?,
        }
    }
    w.flush()
}
