//! File formats: JSON for complexes, metrics, signals and components; CSV
//! for plain vectors and matrices.
//!
//! Floats are written in the shortest decimal form that parses back to the
//! same value, so every format round-trips exactly.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::complex::{Edge, SimplicialComplex2, Triangle};
use crate::error::{Error, Result};
use crate::hodge::{HodgeComponents, MetricTensor, SimplicialSignal};
use crate::metric_learning::SnapshotMatrix;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ComplexRepr {
    n_vertices: usize,
    #[serde(default)]
    edges: Vec<Edge>,
    #[serde(default)]
    triangles: Vec<Triangle>,
}

fn parse_error(field: &str, e: &serde_json::Error) -> Error {
    // serde_json reports the message with the position appended; keep only
    // the message since line and column have their own fields
    let msg = e.to_string();
    let message = match msg.rfind(" at line ") {
        Some(i) => msg[..i].to_string(),
        None => msg,
    };
    Error::Parse {
        field: field.into(),
        line: e.line(),
        column: e.column(),
        message,
    }
}

/// Parses JSON text into `T`, reporting failures against `field`.
pub fn from_json<T: DeserializeOwned>(text: &str, field: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| parse_error(field, &e))
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serialises");
    s.push('\n');
    s
}

/// Reads a complex, sorting every simplex and both lists, then validates it.
pub fn parse_complex(text: &str) -> Result<SimplicialComplex2> {
    let r: ComplexRepr = from_json(text, "complex")?;
    SimplicialComplex2::new(r.n_vertices, r.edges, r.triangles)
}

/// Reads a complex without validating it, so that every violation can be
/// reported.
pub fn parse_complex_unchecked(text: &str) -> Result<SimplicialComplex2> {
    let r: ComplexRepr = from_json(text, "complex")?;
    Ok(SimplicialComplex2::from_parts_unchecked(
        r.n_vertices,
        r.edges,
        r.triangles,
    ))
}

pub fn complex_to_json(c: &SimplicialComplex2) -> String {
    to_json(&ComplexRepr {
        n_vertices: c.n_vertices(),
        edges: c.edges().to_vec(),
        triangles: c.triangles().to_vec(),
    })
}

fn order_name(k: usize) -> &'static str {
    match k {
        0 => "vertex",
        1 => "edge",
        _ => "triangle",
    }
}

/// Checks that a metric fits order `k` of `complex`.
pub fn check_metric_for(g: &MetricTensor, k: usize, complex: &SimplicialComplex2) -> Result<()> {
    let n = complex.count(k)?;
    if g.order() != k {
        return Err(Error::InvalidArgument(format!(
            "expected a metric of order {k}, got order {}",
            g.order()
        )));
    }
    if g.len() != n {
        return Err(Error::dims(
            format!("{} metric (n_{k})", order_name(k)),
            n,
            g.len(),
        ));
    }
    Ok(())
}

/// Checks that a signal fits order `k` of `complex`.
pub fn check_signal_for(x: &SimplicialSignal, k: usize, complex: &SimplicialComplex2) -> Result<()> {
    let n = complex.count(k)?;
    if x.order != k {
        return Err(Error::InvalidArgument(format!(
            "expected a signal of order {k}, got order {}",
            x.order
        )));
    }
    if x.len() != n {
        return Err(Error::dims(
            format!("{} signal (n_{k})", order_name(k)),
            n,
            x.len(),
        ));
    }
    Ok(())
}

fn csv_reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes())
}

/// Rows of a numeric CSV file; every row must have the same width.
fn parse_rows(text: &str, field: &str) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    let mut width = None;
    for rec in csv_reader(text).records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::Parse {
                field: field.into(),
                line,
                column: 0,
                message: e.to_string(),
            }
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.iter().all(|c| c.is_empty()) {
            continue;
        }
        let row = rec
            .iter()
            .enumerate()
            .map(|(j, cell)| {
                cell.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Parse {
                        field: field.into(),
                        line,
                        column: j + 1,
                        message: format!("expected a finite number, found `{cell}`"),
                    })
            })
            .collect::<Result<Vec<f64>>>()?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(Error::Parse {
                    field: field.into(),
                    line,
                    column: 0,
                    message: format!("expected {w} values, found {}", row.len()),
                })
            }
            _ => {}
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Matrix CSV: one row per line, comma separated.
pub fn parse_matrix_csv(text: &str, field: &str) -> Result<DMatrix<f64>> {
    let rows = parse_rows(text, field)?;
    let ncols = rows.first().map_or(0, Vec::len);
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

/// Vector CSV: one value per line.
pub fn parse_vector_csv(text: &str, field: &str) -> Result<DVector<f64>> {
    let m = parse_matrix_csv(text, field)?;
    if m.ncols() > 1 {
        return Err(Error::Parse {
            field: field.into(),
            line: 1,
            column: 2,
            message: "expected one value per line".into(),
        });
    }
    Ok(DVector::from_iterator(m.nrows(), m.iter().copied()))
}

fn push_float(out: &mut String, v: f64) {
    let _ = write!(out, "{v:?}");
}

pub fn matrix_to_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for row in m.row_iter() {
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            push_float(&mut out, *v);
        }
        out.push('\n');
    }
    out
}

pub fn integer_matrix_to_csv(m: &DMatrix<i32>) -> String {
    let mut out = String::new();
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn vector_to_csv(v: &DVector<f64>) -> String {
    let mut out = String::new();
    for x in v.iter() {
        push_float(&mut out, *x);
        out.push('\n');
    }
    out
}

/// A metric in JSON, or in CSV (one weight per line) with the order supplied.
pub fn parse_metric(text: &str, csv_order: Option<usize>) -> Result<MetricTensor> {
    match csv_order {
        Some(k) => MetricTensor::new(k, parse_vector_csv(text, "metric")?.as_slice().to_vec()),
        None => from_json(text, "metric"),
    }
}

/// A signal in JSON, or in CSV (one value per line) with the order supplied.
pub fn parse_signal(text: &str, csv_order: Option<usize>) -> Result<SimplicialSignal> {
    match csv_order {
        Some(k) => Ok(SimplicialSignal::new(k, parse_vector_csv(text, "signal")?)),
        None => from_json(text, "signal"),
    }
}

/// Edge-signal snapshots: CSV with one row per edge, or JSON as a list of
/// snapshot vectors.
pub fn parse_snapshots(text: &str, csv: bool) -> Result<SnapshotMatrix> {
    if csv {
        return SnapshotMatrix::new(parse_matrix_csv(text, "snapshots")?);
    }
    let cols: Vec<Vec<f64>> = from_json(text, "snapshots")?;
    let cols: Vec<DVector<f64>> = cols.into_iter().map(DVector::from_vec).collect();
    SnapshotMatrix::from_columns(&cols)
}

pub fn parse_components(text: &str) -> Result<HodgeComponents> {
    from_json(text, "components")
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: &str = r#"{"n_vertices": 3, "edges": [[0,1],[0,2],[1,2]], "triangles": [[0,1,2]]}"#;

    #[test]
    fn complex_round_trip() {
        let c = parse_complex(FULL).unwrap();
        let text = complex_to_json(&c);
        assert_eq!(parse_complex(&text).unwrap(), c);
        // unsorted input is canonicalised
        let shuffled = r#"{"n_vertices": 3, "edges": [[2,1],[0,2],[1,0]], "triangles": [[2,0,1]]}"#;
        assert_eq!(parse_complex(shuffled).unwrap(), c);
    }

    #[test]
    fn complex_errors() {
        match parse_complex(r#"{"n_vertices": 3, "edges": [[0,1],[0,2]], "triangles": [[0,1,2]]}"#) {
            Err(Error::InvalidComplex(r)) => assert!(r.to_string().contains("missing face (1,2)")),
            other => panic!("{other:?}"),
        }
        match parse_complex("{\n  \"n_vertices\": 3,\n  \"edges\": [[0,\"a\"]]\n}") {
            Err(Error::Parse { field, line, .. }) => {
                assert_eq!(field, "complex");
                assert_eq!(line, 3);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn metric_zero_weight_is_rejected() {
        let err = parse_metric(r#"{"order": 1, "weights": [1.0, 0.0]}"#, None).unwrap_err();
        assert!(err.to_string().contains("weights must be positive"), "{err}");
        let err = parse_metric("1.0\n0.0\n", Some(1)).unwrap_err();
        assert!(err.to_string().contains("weights must be positive"), "{err}");
    }

    #[test]
    fn signal_length_is_cross_checked() {
        let c = parse_complex(FULL).unwrap();
        let x = parse_signal(r#"{"order": 1, "values": [1.0, 2.0]}"#, None).unwrap();
        let err = check_signal_for(&x, 1, &c).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("n_1") && msg.contains("expected 3"), "{msg}");
        let g = MetricTensor::identity(2, 2);
        assert!(check_metric_for(&g, 2, &c).unwrap_err().to_string().contains("n_2"));
    }

    #[test]
    fn floats_round_trip() {
        let v = DVector::from_column_slice(&[0.1, 1.0 / 3.0, -2.5e-300, 12345.678901234567]);
        let back = parse_vector_csv(&vector_to_csv(&v), "signal").unwrap();
        assert_eq!(back, v);
        let m = DMatrix::from_row_slice(2, 2, &[std::f64::consts::PI, 1e-17, -0.0, 7.0]);
        assert_eq!(parse_matrix_csv(&matrix_to_csv(&m), "matrix").unwrap(), m);
        let g = MetricTensor::new(1, vec![0.1, 1.0 / 3.0]).unwrap();
        assert_eq!(from_json::<MetricTensor>(&to_json(&g), "metric").unwrap(), g);
    }

    #[test]
    fn csv_errors_carry_position() {
        match parse_matrix_csv("1,2\n3,x\n", "snapshots") {
            Err(Error::Parse { line, column, .. }) => assert_eq!((line, column), (2, 2)),
            other => panic!("{other:?}"),
        }
        match parse_matrix_csv("1,2\n3\n", "snapshots") {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 2);
                assert!(message.contains("expected 2 values"));
            }
            other => panic!("{other:?}"),
        }
    }
}
