//! Per-tick metric series as CSV.
//!
//! Columns are fixed and listed in [`COLUMNS`]. Reals are written with four
//! decimals, counts as integers, and `stop` holds the stop label on the row
//! of the tick that ended the run (empty elsewhere).

use std::io::{Read, Write};

use convicta_core::metrics::{EventCounts, SliceMetrics, TickMetrics};
use convicta_core::StopReason;
use thiserror::Error;

pub const COLUMNS: [&str; 33] = [
    "tick",
    "count_all",
    "count_p",
    "count_m",
    "mean_c1_all",
    "mean_c2_all",
    "mean_c1_p",
    "mean_c2_p",
    "mean_c1_m",
    "mean_c2_m",
    "pct_potential_perpetrators_all",
    "pct_potential_perpetrators_p",
    "pct_potential_perpetrators_m",
    "pct_positive_reactors_all",
    "pct_positive_reactors_p",
    "pct_positive_reactors_m",
    "pct_negative_reactors_all",
    "pct_negative_reactors_p",
    "pct_negative_reactors_m",
    "pct_neutral_reactors_all",
    "pct_neutral_reactors_p",
    "pct_neutral_reactors_m",
    "marginalized_share_of_perpetrators",
    "interactions",
    "actions",
    "positive_reactions",
    "neutral_reactions",
    "negative_reactions",
    "accepts",
    "rejects",
    "stop",
    "stop_kind",
    "stop_tick",
];

#[derive(Debug, Error)]
pub enum CsvError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("unexpected header: {0}")]
    Header(String),
    #[error("row {row}, column `{column}`: cannot parse `{value}`")]
    Field { row: usize, column: &'static str, value: String },
}

fn real(x: f64) -> String {
    format!("{x:.4}")
}

fn row(m: &TickMetrics) -> Vec<String> {
    let slices = [&m.all, &m.p, &m.m];
    let mut r = vec![m.tick.to_string()];
    r.extend(slices.iter().map(|s| s.count.to_string()));
    for s in slices {
        r.push(real(s.mean_c1));
        r.push(real(s.mean_c2));
    }
    let per_slice: [fn(&SliceMetrics) -> f64; 4] = [
        |s| s.pct_potential_perpetrators,
        |s| s.pct_positive_reactors,
        |s| s.pct_negative_reactors,
        |s| s.pct_neutral_reactors,
    ];
    for f in per_slice {
        r.extend(slices.iter().map(|s| real(f(s))));
    }
    r.push(real(m.marginalized_share_of_perpetrators));
    let e = &m.events;
    r.extend(
        [e.interactions, e.actions, e.positive, e.neutral, e.negative, e.accepts, e.rejects]
            .iter()
            .map(u32::to_string),
    );
    match m.stop {
        Some(reason) => {
            r.push(reason.label().to_owned());
            r.push(reason.id().to_owned());
            r.push(m.tick.to_string());
        }
        None => r.extend([String::new(), String::new(), String::new()]),
    }
    r
}

pub fn write_csv<W: Write>(series: &[TickMetrics], sink: W) -> Result<(), CsvError> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(COLUMNS)?;
    for m in series {
        w.write_record(row(m))?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn csv_string(series: &[TickMetrics]) -> String {
    let mut buf = Vec::new();
    write_csv(series, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("csv output is utf-8")
}

/// Parse a series written by [`write_csv`].
pub fn read_csv<R: Read>(source: R) -> Result<Vec<TickMetrics>, CsvError> {
    let mut r = csv::Reader::from_reader(source);
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header != COLUMNS {
        return Err(CsvError::Header(header.join(",")));
    }
    let mut out = Vec::new();
    for (i, record) in r.records().enumerate() {
        let record = record?;
        let row = i + 1;
        let mut col = 0usize;
        let mut next = || {
            let c = col;
            col += 1;
            (COLUMNS[c], record.get(c).unwrap_or(""))
        };
        fn num<T: std::str::FromStr>(row: usize, (column, value): (&'static str, &str)) -> Result<T, CsvError> {
            value.parse().map_err(|_| CsvError::Field { row, column, value: value.to_owned() })
        }
        let tick: u64 = num(row, next())?;
        let mut slices = [SliceMetrics::default(); 3];
        for s in &mut slices {
            s.count = num(row, next())?;
        }
        for s in &mut slices {
            s.mean_c1 = num(row, next())?;
            s.mean_c2 = num(row, next())?;
        }
        for s in &mut slices {
            s.pct_potential_perpetrators = num(row, next())?;
        }
        for s in &mut slices {
            s.pct_positive_reactors = num(row, next())?;
        }
        for s in &mut slices {
            s.pct_negative_reactors = num(row, next())?;
        }
        for s in &mut slices {
            s.pct_neutral_reactors = num(row, next())?;
        }
        let share: f64 = num(row, next())?;
        let events = EventCounts {
            interactions: num(row, next())?,
            actions: num(row, next())?,
            positive: num(row, next())?,
            neutral: num(row, next())?,
            negative: num(row, next())?,
            accepts: num(row, next())?,
            rejects: num(row, next())?,
        };
        let (column, label) = next();
        let stop = if label.is_empty() {
            None
        } else {
            Some(StopReason::from_label(label).ok_or_else(|| CsvError::Field {
                row,
                column,
                value: label.to_owned(),
            })?)
        };
        let [all, p, m] = slices;
        out.push(TickMetrics {
            tick,
            all,
            p,
            m,
            marginalized_share_of_perpetrators: share,
            events,
            stop,
        });
    }
    Ok(out)
}
