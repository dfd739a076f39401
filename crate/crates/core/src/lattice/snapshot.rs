//! NDJSON snapshots of height fields.
//!
//! The first line is a header with the domain and windings; every further
//! line is one row `{"y":..,"anchor":..,"steps":[[x,"K"|"A"],..]}`. Step
//! positions are written with 17 significant digits, which round-trips the
//! tick grid exactly.

use super::{DomainSpec, HeightField, Row, Step, StepKind, Winding};
use crate::error::{Error, Result};
use crate::ticks::{self, fmt17};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    domain: DomainSpec,
    winding: Option<Winding>,
    rows: usize,
}

#[derive(Deserialize)]
struct RowLine {
    y: i64,
    anchor: i64,
    steps: Vec<(f64, String)>,
}

const FORMAT: &str = "gwflow-field-v1";

pub fn write_field<W: Write>(field: &HeightField, mut out: W) -> Result<()> {
    let header = Header {
        format: FORMAT.into(),
        domain: *field.domain(),
        winding: field.winding(),
        rows: field.rows().len(),
    };
    writeln!(out, "{}", serde_json::to_string(&header)?)?;
    let y0 = field.y_min();
    for (i, row) in field.rows().iter().enumerate() {
        write!(
            out,
            "{{\"y\":{},\"anchor\":{},\"steps\":[",
            y0 + i as i64,
            row.anchor()
        )?;
        for (j, s) in row.steps().iter().enumerate() {
            if j > 0 {
                write!(out, ",")?;
            }
            write!(out, "[{},\"{}\"]", fmt17(ticks::to_f64(s.x)), s.kind.tag())?;
        }
        writeln!(out, "]}}")?;
    }
    Ok(())
}

pub fn read_field<R: BufRead>(input: R) -> Result<HeightField> {
    let mut lines = input.lines();
    let first = lines
        .next()
        .ok_or_else(|| Error::InvalidField("empty snapshot".into()))??;
    let header: Header = serde_json::from_str(&first)?;
    if header.format != FORMAT {
        return Err(Error::InvalidField(format!(
            "unknown snapshot format {}",
            header.format
        )));
    }
    let mut rows = Vec::with_capacity(header.rows);
    let mut expect = header.domain.y_range().0;
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let r: RowLine = serde_json::from_str(&line)?;
        if r.y != expect {
            return Err(Error::InvalidField(format!(
                "row {} out of order, expected {expect}",
                r.y
            )));
        }
        expect += 1;
        let steps = r
            .steps
            .into_iter()
            .map(|(x, k)| {
                let kind = match k.as_str() {
                    "K" => StepKind::Kink,
                    "A" => StepKind::Antikink,
                    other => return Err(Error::InvalidField(format!("unknown step tag {other}"))),
                };
                Ok(Step {
                    x: ticks::to_ticks(x),
                    kind,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(Row::new(steps, r.anchor));
    }
    HeightField::new(header.domain, header.winding, rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::linear_field;

    #[test]
    fn round_trip_is_exact() {
        let f = linear_field([0.37, -0.3], 1, (7, 5)).unwrap().field;
        let mut buf = Vec::new();
        write_field(&f, &mut buf).unwrap();
        let g = read_field(&buf[..]).unwrap();
        assert_eq!(f, g);
    }
}
