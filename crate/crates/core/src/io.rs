//! Text formats: coefficient files and dataset CSVs.
//!
//! A coefficient file holds one `key = value` pair per line for the eight
//! coefficients; `#` starts a comment. The optional line `symmetry: true`
//! (or `symmetry = true`) ties `cf1 = cf2 = cb`, `lambda1 = lambda2` and
//! `mu1 = mu2`; a tied group may then be given by any one of its keys.
//!
//! ```text
//! # shared rate, capacity factors, heterogeneity penalty
//! symmetry: true
//! cb = 1.45
//! lambda1 = 0.87
//! mu1 = 0.69
//! nu = 1
//! ```
//!
//! A dataset file is a CSV with header `k,q1,q2,xf1,xb1,xf2,xb2,total_demand_vph`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::calibration::DataPoint;
use crate::error::{Error, Result};
use crate::model::{CostCoefficients, DemandConfig, FlowDistribution, COEFFICIENT_NAMES, FEASIBILITY_TOL};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoefficientsFile {
    pub coefficients: CostCoefficients,
    pub symmetry: bool,
}

const SYMMETRY_GROUPS: [&[usize]; 3] = [&[0, 1, 2], &[3, 4], &[5, 6]];

fn parse_error(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, column, message: message.into() }
}

pub fn parse_coefficients(text: &str) -> Result<CoefficientsFile> {
    let mut values: [Option<(f64, usize)>; 8] = [None; 8];
    let mut symmetry = false;
    for (ln, raw) in text.lines().enumerate() {
        let line_no = ln + 1;
        let content = raw.split('#').next().unwrap_or("");
        if content.trim().is_empty() {
            continue;
        }
        let Some(sep) = content.find(['=', ':']) else {
            let col = content.len() - content.trim_start().len() + 1;
            return Err(parse_error(line_no, col, "expected `key = value`"));
        };
        let (key_part, value_part) = (&content[..sep], &content[sep + 1..]);
        let key = key_part.trim();
        let key_col = key_part.len() - key_part.trim_start().len() + 1;
        let value = value_part.trim();
        let value_col = sep + 2 + (value_part.len() - value_part.trim_start().len());
        if value.is_empty() {
            return Err(parse_error(line_no, sep + 2, format!("missing value for `{key}`")));
        }
        if key == "symmetry" {
            symmetry = match value {
                "true" => true,
                "false" => false,
                _ => return Err(parse_error(line_no, value_col, format!("expected true or false, got `{value}`"))),
            };
            continue;
        }
        let Some(idx) = COEFFICIENT_NAMES.iter().position(|&n| n == key) else {
            return Err(parse_error(line_no, key_col, format!("unknown key `{key}`")));
        };
        let v: f64 = value
            .parse()
            .map_err(|_| parse_error(line_no, value_col, format!("`{value}` is not a number")))?;
        if values[idx].is_some() {
            return Err(parse_error(line_no, key_col, format!("duplicate key `{key}`")));
        }
        values[idx] = Some((v, line_no));
    }

    if symmetry {
        for group in SYMMETRY_GROUPS {
            let given: Vec<(usize, f64, usize)> =
                group.iter().filter_map(|&k| values[k].map(|(v, l)| (k, v, l))).collect();
            if let Some(&(k0, v0, _)) = given.first() {
                if let Some(&(k, v, line)) = given.iter().find(|g| g.1 != v0) {
                    return Err(parse_error(
                        line,
                        1,
                        format!(
                            "symmetry requires {} = {}, got {v} and {v0}",
                            COEFFICIENT_NAMES[k], COEFFICIENT_NAMES[k0]
                        ),
                    ));
                }
                for &k in group {
                    values[k].get_or_insert((v0, 0));
                }
            }
        }
    }
    let missing: Vec<&str> =
        COEFFICIENT_NAMES.iter().zip(&values).filter(|(_, v)| v.is_none()).map(|(n, _)| *n).collect();
    if !missing.is_empty() {
        return Err(Error::Coefficients(format!("missing key(s): {}", missing.join(", "))));
    }
    let coefficients = CostCoefficients::from_array(values.map(|v| v.map_or(0.0, |(x, _)| x)));
    coefficients.validate()?;
    Ok(CoefficientsFile { coefficients, symmetry })
}

/// Writes all eight keys; values use the shortest representation that
/// parses back to the same `f64`.
pub fn format_coefficients(file: &CoefficientsFile) -> String {
    let mut out = String::new();
    if file.symmetry {
        out.push_str("symmetry: true\n");
    }
    for (name, v) in COEFFICIENT_NAMES.iter().zip(file.coefficients.to_array()) {
        out.push_str(&format!("{name} = {v}\n"));
    }
    out
}

#[derive(Debug, Serialize, Deserialize)]
struct DatasetRecord {
    k: usize,
    q1: f64,
    q2: f64,
    xf1: f64,
    xb1: f64,
    xf2: f64,
    xb2: f64,
    total_demand_vph: f64,
}

pub const DATASET_HEADER: [&str; 8] = ["k", "q1", "q2", "xf1", "xb1", "xf2", "xb2", "total_demand_vph"];

pub fn read_dataset<R: Read>(reader: R) -> Result<Vec<DataPoint>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    if headers.iter().ne(DATASET_HEADER.iter().copied()) {
        return Err(parse_error(1, 1, format!("expected header `{}`", DATASET_HEADER.join(","))));
    }
    let mut data = Vec::new();
    for (row, rec) in rdr.deserialize::<DatasetRecord>().enumerate() {
        let rec = rec.map_err(csv_error)?;
        let point = (|| {
            let demand = DemandConfig::new(rec.q1, rec.q2)?;
            let flow = FlowDistribution::new(&demand, rec.xf1, rec.xb1, rec.xf2, rec.xb2)?;
            flow.check_feasible(&demand, FEASIBILITY_TOL)?;
            Ok::<_, Error>(DataPoint { demand, flow, total_demand_vph: rec.total_demand_vph })
        })()
        .map_err(|e| Error::DataPoint { index: row + 1, reason: e.to_string() })?;
        data.push(point);
    }
    Ok(data)
}

pub fn write_dataset<W: Write>(writer: W, data: &[DataPoint]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    for (k, p) in data.iter().enumerate() {
        wtr.serialize(DatasetRecord {
            k: k + 1,
            q1: p.demand.q1(),
            q2: p.demand.q2(),
            xf1: p.flow.xf1(),
            xb1: p.flow.xb1(),
            xf2: p.flow.xf2(),
            xb2: p.flow.xb2(),
            total_demand_vph: p.total_demand_vph,
        })
        .map_err(csv_error)?;
    }
    if data.is_empty() {
        wtr.write_record(DATASET_HEADER).map_err(csv_error)?;
    }
    wtr.flush()?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    match e.position() {
        Some(pos) => parse_error(pos.line() as usize, 1, e.to_string()),
        None => match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::from(io),
            other => Error::Io(format!("{other:?}")),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const REFERENCE: &str = "# validation values\nsymmetry: true\ncb = 1.45\nlambda1 = 0.87\nmu1 = 0.69\nnu = 1\n";

    #[test]
    fn symmetric_file_fills_counterparts() {
        let f = parse_coefficients(REFERENCE).unwrap();
        assert!(f.symmetry);
        assert_eq!(f.coefficients, CostCoefficients::symmetric(1.45, 0.87, 0.69, 1.0).unwrap());
    }

    #[test]
    fn full_file_parses() {
        let text = "cf1 = 1\ncf2=2\ncb = 3 # shared\nlambda1 = .5\nlambda2 = 0.25\nmu1 = 0.1\nmu2 = 1e-1\nnu = 4\n";
        let c = parse_coefficients(text).unwrap().coefficients;
        assert_eq!(c.to_array(), [1.0, 2.0, 3.0, 0.5, 0.25, 0.1, 0.1, 4.0]);
    }

    #[test]
    fn missing_key_is_named() {
        let text = "cf1 = 1\ncf2 = 1\ncb = 1\nlambda1 = .5\nlambda2 = .5\nmu1 = .5\nmu2 = .5\n";
        let err = parse_coefficients(text).unwrap_err();
        assert!(err.to_string().contains("nu"), "{err}");
    }

    #[test]
    fn parse_errors_carry_position() {
        match parse_coefficients("cf1 = 1\n  cf2 = abc\n").unwrap_err() {
            Error::Parse { line, column, .. } => assert_eq!((line, column), (2, 9)),
            e => panic!("{e}"),
        }
        match parse_coefficients("cf1 = 1\n\n   bogus = 2\n").unwrap_err() {
            Error::Parse { line, column, .. } => assert_eq!((line, column), (3, 4)),
            e => panic!("{e}"),
        }
        assert!(matches!(parse_coefficients("cf1 = 1\ncf1 = 2\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_coefficients("just words\n"), Err(Error::Parse { line: 1, .. })));
        let conflict = "symmetry: true\ncf1 = 1\ncb = 2\nlambda1 = .5\nmu1 = .5\nnu = 1\n";
        assert!(matches!(parse_coefficients(conflict), Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn invalid_values_rejected() {
        let text = "symmetry: true\ncb = 1\nlambda1 = 1.5\nmu1 = .5\nnu = 1\n";
        assert!(matches!(parse_coefficients(text), Err(Error::Coefficients(_))));
    }

    #[test]
    fn dataset_rejects_bad_rows() {
        let header = DATASET_HEADER.join(",");
        let bad = format!("{header}\n1,0.5,0.5,0.3,0.3,0.3,0.2,3000\n");
        assert!(matches!(read_dataset(bad.as_bytes()), Err(Error::DataPoint { index: 1, .. })));
        let wrong_header = "a,b\n1,2\n";
        assert!(matches!(read_dataset(wrong_header.as_bytes()), Err(Error::Parse { line: 1, .. })));
        let not_number = format!("{header}\n1,0.5,0.5,x,0.3,0.3,0.2,3000\n");
        assert!(matches!(read_dataset(not_number.as_bytes()), Err(Error::Parse { line: 2, .. })));
        let empty = format!("{header}\n");
        assert!(read_dataset(empty.as_bytes()).unwrap().is_empty());
    }

    proptest! {
        #[test]
        fn coefficients_round_trip(
            rates in prop::array::uniform4(1e-3f64..1e3),
            factors in prop::array::uniform4(1e-9f64..=1.0),
            symmetry in any::<bool>(),
        ) {
            let c = if symmetry {
                CostCoefficients::symmetric(rates[0], factors[0], factors[1], rates[1]).unwrap()
            } else {
                CostCoefficients::new(rates[0], rates[1], rates[2], factors[0], factors[1], factors[2], factors[3], rates[3]).unwrap()
            };
            let file = CoefficientsFile { coefficients: c, symmetry };
            prop_assert_eq!(parse_coefficients(&format_coefficients(&file)).unwrap(), file);
        }

        #[test]
        fn dataset_round_trip(points in prop::collection::vec((0.0f64..=1.0, 0.0f64..=1.0, 0.0f64..=1.0, 1.0f64..1e4), 0..20)) {
            let data: Vec<DataPoint> = points
                .iter()
                .map(|&(q1, s1, s2, d)| {
                    let demand = DemandConfig::from_q1(q1).unwrap();
                    let flow = FlowDistribution::from_bifurcating(&demand, s1 * demand.q1(), s2 * demand.q2()).unwrap();
                    DataPoint::new(demand, flow, d).unwrap()
                })
                .collect();
            let mut buf = Vec::new();
            write_dataset(&mut buf, &data).unwrap();
            prop_assert_eq!(read_dataset(buf.as_slice()).unwrap(), data);
        }
    }
}
