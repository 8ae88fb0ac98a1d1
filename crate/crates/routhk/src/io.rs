//! CSV and JSON formats.
//!
//! CSV reals use the shortest decimal that round-trips; JSON reals use 17
//! significant digits.

use std::io::Write;
use std::path::Path;

use routhk_core::numerics::Grid;
use routhk_core::routh::RouthSystem;
use routhk_core::symmetry::DeviationField;
use routhk_core::{FieldSample, LieAlgebraModel, ResidualGrid};
use serde_json::{Map, Number, Value};

use crate::certificates::Report;
use crate::descriptor::LieAlgebraDescriptor;
use crate::error::{AppError, AppResult};

/// Shortest round-trip decimal.
pub fn csv_real(x: f64) -> String {
    format!("{x:?}")
}

/// `%.17g`: 17 significant digits, trailing zeros removed.
pub fn json_real_text(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let negative = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    let sign = if negative { "-" } else { "" };
    if !(-5..17).contains(&exp) {
        let d = digits.trim_end_matches('0');
        let (head, tail) = d.split_at(1);
        let frac = if tail.is_empty() {
            String::new()
        } else {
            format!(".{tail}")
        };
        return format!("{sign}{head}{frac}e{exp}");
    }
    let (int, frac) = if exp >= 0 {
        let cut = exp as usize + 1;
        (digits[..cut].to_string(), digits[cut..].to_string())
    } else {
        (
            "0".to_string(),
            format!("{}{}", "0".repeat((-exp - 1) as usize), digits),
        )
    };
    let frac = frac.trim_end_matches('0');
    if frac.is_empty() {
        format!("{sign}{int}")
    } else {
        format!("{sign}{int}.{frac}")
    }
}

/// A JSON number with 17 significant digits; `null` when not finite.
pub fn json_real(x: f64) -> Value {
    if !x.is_finite() {
        return Value::Null;
    }
    Value::Number(
        json_real_text(x)
            .parse::<Number>()
            .expect("valid JSON number"),
    )
}

fn json_reals(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| json_real(x)).collect())
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

fn csv_err(e: csv::Error) -> AppError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => AppError::io("csv", io),
        other => AppError::Descriptor(format!("{other:?}")),
    }
}

fn header(prefix: &str, count: usize) -> impl Iterator<Item = String> + '_ {
    (1..=count).map(move |i| format!("{prefix}{i}"))
}

/// `t1..tk,phi1..phin`, one row per node in grid order.
pub fn write_field_csv<W: Write>(field: &FieldSample, w: W) -> AppResult<()> {
    let grid = field.grid();
    let mut out = csv_writer(w);
    out.write_record(header("t", grid.k()).chain(header("phi", field.n())))
        .map_err(csv_err)?;
    for l in 0..grid.len() {
        let rec: Vec<String> = grid
            .point(l)
            .iter()
            .chain(field.node_values(l))
            .map(|&x| csv_real(x))
            .collect();
        out.write_record(&rec).map_err(csv_err)?;
    }
    out.flush().map_err(|e| AppError::io("csv", e))
}

/// Reads the field CSV back; the grid is recovered from the distinct
/// coordinates along each axis.
pub fn read_field_csv(text: &str) -> AppResult<FieldSample> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(csv_err)?.clone();
    let k = headers.iter().filter(|h| h.starts_with('t')).count();
    let n = headers.len() - k;
    if k == 0 || n == 0 {
        return Err(AppError::Descriptor(
            "field CSV needs t and phi columns".into(),
        ));
    }
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let row = rec
            .iter()
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| AppError::Descriptor(format!("bad number `{s}`")))
            })
            .collect::<AppResult<Vec<f64>>>()?;
        if row.len() != k + n {
            return Err(AppError::Descriptor("ragged field CSV".into()));
        }
        rows.push(row);
    }
    let mut lo = Vec::with_capacity(k);
    let mut hi = Vec::with_capacity(k);
    let mut counts = Vec::with_capacity(k);
    for a in 0..k {
        let mut axis: Vec<f64> = rows.iter().map(|r| r[a]).collect();
        axis.sort_by(f64::total_cmp);
        axis.dedup();
        lo.push(axis[0]);
        hi.push(*axis.last().expect("nonempty"));
        counts.push(axis.len());
    }
    let grid = Grid::new(lo, hi, counts)?;
    if grid.len() != rows.len() {
        return Err(AppError::Descriptor(
            "field CSV does not cover a full grid".into(),
        ));
    }
    let values: Vec<f64> = rows.iter().flat_map(|r| r[k..].to_vec()).collect();
    Ok(FieldSample::from_values(grid, n, values)?)
}

/// `t1..tk,r1..rn` at the nodes the residual was evaluated on.
pub fn write_residual_csv<W: Write>(res: &ResidualGrid, w: W) -> AppResult<()> {
    let mut out = csv_writer(w);
    out.write_record(header("t", res.grid().k()).chain(header("r", res.components())))
        .map_err(csv_err)?;
    for (t, r) in res.rows() {
        let rec: Vec<String> = t.iter().chain(r).map(|&x| csv_real(x)).collect();
        out.write_record(&rec).map_err(csv_err)?;
    }
    out.flush().map_err(|e| AppError::io("csv", e))
}

/// `beta,a,max_abs_deviation` with 1-based indices.
pub fn write_deviation_csv<W: Write>(
    dev: &DeviationField,
    m: usize,
    k: usize,
    w: W,
) -> AppResult<()> {
    let worst = dev.max_per_component();
    let mut out = csv_writer(w);
    out.write_record(["beta", "a", "max_abs_deviation"])
        .map_err(csv_err)?;
    for b in 0..m {
        for a in 0..k {
            out.write_record([
                (b + 1).to_string(),
                (a + 1).to_string(),
                csv_real(worst.get(b, a)),
            ])
            .map_err(csv_err)?;
        }
    }
    out.flush().map_err(|e| AppError::io("csv", e))
}

/// `solution,check,max_residual,expected,passed`.
pub fn write_report_csv<W: Write>(report: &Report, w: W) -> AppResult<()> {
    let mut out = csv_writer(w);
    out.write_record(["solution", "check", "max_residual", "expected", "passed"])
        .map_err(csv_err)?;
    for r in &report.rows {
        out.write_record([
            r.solution.clone(),
            r.check.to_string(),
            csv_real(r.max_residual),
            r.expected.clone(),
            r.passed.to_string(),
        ])
        .map_err(csv_err)?;
    }
    out.flush().map_err(|e| AppError::io("csv", e))
}

/// Writes to a file, or to stdout when `path` is `-`.
pub fn write_to(path: &Path, f: impl FnOnce(&mut dyn Write) -> AppResult<()>) -> AppResult<()> {
    if path.as_os_str() == "-" {
        let stdout = std::io::stdout();
        let mut lock = stdout.lock();
        return f(&mut lock);
    }
    let file =
        std::fs::File::create(path).map_err(|e| AppError::io(path.display().to_string(), e))?;
    let mut buf = std::io::BufWriter::new(file);
    f(&mut buf)?;
    buf.flush()
        .map_err(|e| AppError::io(path.display().to_string(), e))
}

/// Monomial coefficients of the reduced Routhian around `w = 0` at a base point.
///
/// Velocities are named `v{i}_{a}` after the full field coordinate `i` they sit
/// on and the parameter direction `a` (both 1-based). Entries below `1e-12`
/// relative to the largest coefficient are dropped; `const` is always present.
pub fn reduced_coefficients(
    rsys: &RouthSystem,
    base: &[usize],
    qb: &[f64],
) -> AppResult<Map<String, Value>> {
    let e = rsys.expansion(qb)?;
    let bn = rsys.base_n;
    let name = |r: usize| format!("v{}_{}", base[r % bn] + 1, r / bn + 1);
    let mut terms: Vec<(String, f64)> = vec![("const".into(), e.constant)];
    let dim = bn * rsys.k;
    for r in 0..dim {
        terms.push((name(r), e.linear[r]));
    }
    for r in 0..dim {
        terms.push((format!("{}^2", name(r)), 0.5 * e.quadratic[(r, r)]));
        for s in r + 1..dim {
            terms.push((format!("{}*{}", name(r), name(s)), e.quadratic[(r, s)]));
        }
    }
    let scale = terms
        .iter()
        .map(|(_, c)| c.abs())
        .fold(0.0, f64::max)
        .max(1.0);
    let mut map = Map::new();
    for (i, (key, c)) in terms.into_iter().enumerate() {
        if i == 0 || c.abs() > 1e-12 * scale {
            map.insert(key, json_real(c));
        }
    }
    Ok(map)
}

/// `{label, base_n, k, mu, coefficients, magnetic, base_point}`.
pub fn reduced_json(rsys: &RouthSystem, base: &[usize], qb: &[f64]) -> AppResult<Value> {
    let mut obj = Map::new();
    obj.insert("label".into(), Value::String(rsys.label.clone()));
    obj.insert("base_n".into(), Value::from(rsys.base_n));
    obj.insert("k".into(), Value::from(rsys.k));
    obj.insert("mu".into(), json_reals(rsys.mu.as_slice()));
    obj.insert(
        "coefficients".into(),
        Value::Object(reduced_coefficients(rsys, base, qb)?),
    );
    let magnetic: Vec<Value> = rsys
        .magnetic_at(qb)?
        .iter()
        .map(|b| {
            Value::Array(
                (0..b.rows())
                    .map(|i| json_reals(&(0..b.cols()).map(|j| b[(i, j)]).collect::<Vec<_>>()))
                    .collect(),
            )
        })
        .collect();
    obj.insert("magnetic".into(), Value::Array(magnetic));
    obj.insert("base_point".into(), json_reals(qb));
    Ok(Value::Object(obj))
}

/// Pretty JSON text; numbers keep their 17-digit form.
pub fn json_text(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("values serialize");
    s.push('\n');
    s
}

pub fn algebra_descriptor(alg: &LieAlgebraModel) -> LieAlgebraDescriptor {
    LieAlgebraDescriptor {
        m: alg.m(),
        structure: alg.nonzero_brackets(),
        labels: alg.labels().to_vec(),
    }
}

/// Lie-algebra JSON: `{m, structure, labels}`.
pub fn algebra_json(alg: &LieAlgebraModel) -> Value {
    let d = algebra_descriptor(alg);
    let structure = d
        .structure
        .iter()
        .map(|&(a, b, g, c)| Value::Array(vec![a.into(), b.into(), g.into(), json_real(c)]))
        .collect();
    let mut obj = Map::new();
    obj.insert("m".into(), d.m.into());
    obj.insert("structure".into(), Value::Array(structure));
    obj.insert(
        "labels".into(),
        Value::Array(d.labels.into_iter().map(Value::String).collect()),
    );
    Value::Object(obj)
}

pub fn algebra_from_json(text: &str) -> AppResult<LieAlgebraModel> {
    let d: LieAlgebraDescriptor = serde_json::from_str(text)?;
    let labels = if d.labels.is_empty() {
        (1..=d.m).map(|i| format!("e{i}")).collect()
    } else {
        d.labels
    };
    Ok(LieAlgebraModel::from_brackets(d.m, &d.structure, labels)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digit_reals() {
        assert_eq!(json_real_text(0.5), "0.5");
        assert_eq!(json_real_text(0.1), "0.10000000000000001");
        assert_eq!(json_real_text(-0.625), "-0.625");
        assert_eq!(json_real_text(7.0 / 8.0), "0.875");
        assert_eq!(json_real_text(1e-7), "9.9999999999999995e-8");
        assert_eq!(json_real_text(1e20), "1e20");
        assert_eq!(json_real_text(123456.0), "123456");
        assert_eq!(json_real_text(2.0_f64.sqrt()), "1.4142135623730951");
        for x in [0.1, 1.0 / 3.0, -2.5e-9, 6.02e23, 1e-300] {
            assert_eq!(json_real_text(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn csv_reals_round_trip() {
        for x in [0.1, -1.0 / 3.0, 1e-7, 2.0, 1e300] {
            assert_eq!(csv_real(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(csv_real(0.5), "0.5");
    }
}
