//! CSV formats for samples and scored validation records.
//!
//! Labels are written `1` / `-1`. A missing `weight` column means unit
//! weights. Samples carry either a `cell_id` column or feature columns
//! `f1, f2, ...`.

use std::io::{Read, Write};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::learner::{Record, WeightedSample};
use crate::population::CellId;
use crate::surrogate::Label;
use crate::threshold::ScoredRecord;

fn parse_label(field: &str) -> Result<Label> {
    let v: i64 = field.trim().parse().map_err(|_| Error::Input(format!("label {field:?} is not -1 or 1")))?;
    Label::from_value(v)
}

fn label_str(y: Label) -> &'static str {
    match y {
        Label::Positive => "1",
        Label::Negative => "-1",
    }
}

fn parse_f64(field: &str, column: &str) -> Result<f64> {
    field.trim().parse().map_err(|_| Error::Input(format!("column {column}: {field:?} is not a number")))
}

struct Columns {
    y: usize,
    weight: Option<usize>,
    cell_id: Option<usize>,
    features: Vec<usize>,
}

fn columns(headers: &csv::StringRecord) -> Result<Columns> {
    let find = |name: &str| headers.iter().position(|h| h.trim() == name);
    let y = find("y").ok_or_else(|| Error::Input("missing column y".into()))?;
    let mut features: Vec<(usize, usize)> = headers
        .iter()
        .enumerate()
        .filter_map(|(i, h)| {
            let k = h.trim().strip_prefix('f')?.parse::<usize>().ok()?;
            Some((k, i))
        })
        .collect();
    features.sort();
    if features.iter().enumerate().any(|(j, &(k, _))| k != j + 1) {
        return Err(Error::Input("feature columns must be f1, f2, ... without gaps".into()));
    }
    Ok(Columns {
        y,
        weight: find("weight"),
        cell_id: find("cell_id"),
        features: features.into_iter().map(|(_, i)| i).collect(),
    })
}

fn read_records<R: Read, T>(
    input: R,
    x_of: impl Fn(&Columns, &csv::StringRecord) -> Result<T>,
    check: impl Fn(&Columns) -> Result<()>,
) -> Result<WeightedSample<T>> {
    let mut reader = csv::Reader::from_reader(input);
    let cols = columns(reader.headers()?)?;
    check(&cols)?;
    let mut records = Vec::new();
    for row in reader.records() {
        let row = row?;
        let weight = match cols.weight {
            Some(i) => parse_f64(&row[i], "weight")?,
            None => 1.0,
        };
        records.push(Record { x: x_of(&cols, &row)?, y: parse_label(&row[cols.y])?, weight });
    }
    WeightedSample::new(records)
}

/// Reads a sample with columns `y`, `cell_id` and optionally `weight`.
pub fn read_cell_sample<R: Read>(input: R) -> Result<WeightedSample<CellId>> {
    read_records(
        input,
        |cols, row| {
            let field = &row[cols.cell_id.expect("checked")];
            field.trim().parse().map_err(|_| Error::Input(format!("cell_id {field:?} is not an integer")))
        },
        |cols| match cols.cell_id {
            Some(_) => Ok(()),
            None => Err(Error::Input("missing column cell_id".into())),
        },
    )
}

/// Reads a sample with columns `y`, `f1..fk` and optionally `weight`.
pub fn read_feature_sample<R: Read>(input: R) -> Result<WeightedSample<Vec<f64>>> {
    read_records(
        input,
        |cols, row| {
            cols.features
                .iter()
                .enumerate()
                .map(|(j, &i)| parse_f64(&row[i], &format!("f{}", j + 1)))
                .collect()
        },
        |cols| {
            if cols.features.is_empty() {
                Err(Error::Input("no feature columns f1, f2, ...".into()))
            } else {
                Ok(())
            }
        },
    )
}

/// True when the CSV header has a `cell_id` column.
pub fn has_cell_ids(header_line: &str) -> bool {
    header_line.split(',').any(|h| h.trim() == "cell_id")
}

pub fn write_cell_sample<W: Write>(out: W, sample: &WeightedSample<CellId>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["y", "weight", "cell_id"])?;
    for r in sample.records() {
        w.write_record([label_str(r.y), &r.weight.to_string(), &r.x.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Deserialize)]
struct ScoredRow {
    score: f64,
    y: String,
    weight: Option<f64>,
}

/// Reads scored validation records with columns `score`, `y`, `weight`.
pub fn read_scored<R: Read>(input: R) -> Result<Vec<ScoredRecord>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    reader
        .deserialize::<ScoredRow>()
        .map(|row| {
            let row = row?;
            Ok(ScoredRecord { score: row.score, y: parse_label(&row.y)?, weight: row.weight.unwrap_or(1.0) })
        })
        .collect()
}

pub fn write_scored<W: Write>(out: W, records: &[ScoredRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["score", "y", "weight"])?;
    for r in records {
        w.write_record([&r.score.to_string(), label_str(r.y), &r.weight.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_sample_round_trip() {
        let sample = WeightedSample::new(vec![
            Record { x: 3, y: Label::Positive, weight: 1.0 },
            Record { x: 7, y: Label::Negative, weight: 2.5 },
        ])
        .unwrap();
        let mut buf = Vec::new();
        write_cell_sample(&mut buf, &sample).unwrap();
        assert_eq!(read_cell_sample(buf.as_slice()).unwrap(), sample);
    }

    #[test]
    fn feature_sample_orders_columns_and_defaults_weight() {
        let text = "f2,y,f1\n0.5,1,-1\n2,-1,3\n";
        let s = read_feature_sample(text.as_bytes()).unwrap();
        assert_eq!(s.records()[0].x, vec![-1.0, 0.5]);
        assert_eq!(s.records()[1].x, vec![3.0, 2.0]);
        assert_eq!(s.records()[1].y, Label::Negative);
        assert_eq!(s.total_weight(), 2.0);
    }

    #[test]
    fn scored_round_trip_and_errors() {
        let recs = vec![
            ScoredRecord { score: 0.25, y: Label::Positive, weight: 1.0 },
            ScoredRecord { score: -3.0, y: Label::Negative, weight: 0.5 },
        ];
        let mut buf = Vec::new();
        write_scored(&mut buf, &recs).unwrap();
        assert_eq!(read_scored(buf.as_slice()).unwrap(), recs);
        assert!(read_scored("score,y,weight\n1,0,1\n".as_bytes()).is_err());
        assert!(read_cell_sample("y,weight\n1,1\n".as_bytes()).is_err());
        assert!(read_feature_sample("y,f1,f3\n1,1,1\n".as_bytes()).is_err());
    }
}
