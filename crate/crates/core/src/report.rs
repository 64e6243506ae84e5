//! Residual reports, invariant-current tables, spectra, and their
//! serialization: JSON with 17-significant-digit numbers and deterministic
//! key order, per-point fields as CSV (columns x, re, im).

use crate::error::Result;
use crate::grid::{Field1, Grid1D, IndexRange};
use crate::C64;
use serde_json::Value;
use std::io::Write;
use std::path::Path;

/// 17 significant digits, locale-free.
pub fn format_g17(v: f64) -> String {
    if v == 0.0 && v.is_sign_negative() {
        return format!("{:.16e}", 0.0);
    }
    format!("{v:.16e}")
}

/// Serialize a JSON value with 17-significant-digit floats and sorted keys
/// (serde_json's default map is ordered), so identical inputs give
/// byte-identical files.
pub fn to_json_g17(value: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, value, 0);
    out.push('\n');
    out
}

fn write_value(out: &mut String, value: &Value, indent: usize) {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                out.push_str(&i.to_string());
            } else if let Some(u) = n.as_u64() {
                out.push_str(&u.to_string());
            } else {
                out.push_str(&format_g17(n.as_f64().unwrap_or(f64::NAN)));
            }
        }
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("string")),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push('[');
            for (k, item) in items.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                out.push('\n');
                out.push_str(&"  ".repeat(indent + 1));
                write_value(out, item, indent + 1);
            }
            out.push('\n');
            out.push_str(&"  ".repeat(indent));
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push('{');
            for (k, (key, item)) in map.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                out.push('\n');
                out.push_str(&"  ".repeat(indent + 1));
                out.push_str(&serde_json::to_string(key).expect("key"));
                out.push_str(": ");
                write_value(out, item, indent + 1);
            }
            out.push('\n');
            out.push_str(&"  ".repeat(indent));
            out.push('}');
        }
    }
}

pub fn json_f64(v: f64) -> Value {
    serde_json::Number::from_f64(v).map(Value::Number).unwrap_or(Value::Null)
}

pub fn json_complex(v: C64) -> Value {
    Value::Array(vec![json_f64(v.re), json_f64(v.im)])
}

/// log2(coarse / fine): the observed convergence order under one halving.
pub fn convergence_slope(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

#[derive(Clone, Debug, PartialEq)]
pub enum ResidualStatus {
    Evaluated,
    Skipped(String),
}

/// Per-point and norm-aggregated residual of one equation of motion.
#[derive(Clone, Debug)]
pub struct ResidualReport {
    /// Check id, e.g. "canonical_total".
    pub equation: String,
    pub map: Option<String>,
    pub status: ResidualStatus,
    pub max_norm: f64,
    pub l2_norm: f64,
    pub dx: f64,
    pub dt: Option<f64>,
    /// log2 residual ratio under simultaneous (dx, dt) halving, when a
    /// refinement pair was run.
    pub slope: Option<f64>,
    /// Summed population weight of orbitals dropped from orbital sums.
    pub truncation: Option<f64>,
    pub skipped_pairs: Vec<(usize, usize)>,
    pub notes: Vec<String>,
    /// Per-point residual values on `range` (empty for scalar checks).
    pub grid: Grid1D,
    pub range: IndexRange,
    pub values: Vec<C64>,
}

impl ResidualReport {
    pub fn from_field(
        equation: &str,
        map: Option<String>,
        grid: Grid1D,
        range: IndexRange,
        values: Vec<C64>,
        dt: Option<f64>,
    ) -> ResidualReport {
        let max_norm = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let l2_norm =
            (values.iter().map(|v| v.norm_sqr()).sum::<f64>() * grid.dx()).sqrt();
        ResidualReport {
            equation: equation.to_string(),
            map,
            status: ResidualStatus::Evaluated,
            max_norm,
            l2_norm,
            dx: grid.dx(),
            dt,
            slope: None,
            truncation: None,
            skipped_pairs: Vec::new(),
            notes: Vec::new(),
            grid,
            range,
            values,
        }
    }

    pub fn skipped(equation: &str, map: Option<String>, grid: Grid1D, reason: String) -> Self {
        ResidualReport {
            equation: equation.to_string(),
            map,
            status: ResidualStatus::Skipped(reason),
            max_norm: 0.0,
            l2_norm: 0.0,
            dx: grid.dx(),
            dt: None,
            slope: None,
            truncation: None,
            skipped_pairs: Vec::new(),
            notes: Vec::new(),
            grid,
            range: IndexRange::empty(),
            values: Vec::new(),
        }
    }

    pub fn is_skipped(&self) -> bool {
        matches!(self.status, ResidualStatus::Skipped(_))
    }

    /// Summary (no per-point data) as a JSON value.
    pub fn summary_json(&self) -> Value {
        let mut obj = serde_json::Map::new();
        obj.insert("equation".into(), Value::String(self.equation.clone()));
        if let Some(m) = &self.map {
            obj.insert("map".into(), Value::String(m.clone()));
        }
        match &self.status {
            ResidualStatus::Evaluated => {
                obj.insert("status".into(), Value::String("evaluated".into()));
                obj.insert("max_norm".into(), json_f64(self.max_norm));
                obj.insert("l2_norm".into(), json_f64(self.l2_norm));
            }
            ResidualStatus::Skipped(reason) => {
                obj.insert("status".into(), Value::String("skipped".into()));
                obj.insert("skip_reason".into(), Value::String(reason.clone()));
            }
        }
        obj.insert("dx".into(), json_f64(self.dx));
        if let Some(dt) = self.dt {
            obj.insert("dt".into(), json_f64(dt));
        }
        if let Some(s) = self.slope {
            obj.insert("slope".into(), json_f64(s));
        }
        if let Some(t) = self.truncation {
            obj.insert("truncation".into(), json_f64(t));
        }
        if !self.skipped_pairs.is_empty() {
            obj.insert(
                "skipped_pairs".into(),
                Value::Array(
                    self.skipped_pairs
                        .iter()
                        .map(|(a, b)| {
                            Value::Array(vec![Value::from(*a as u64), Value::from(*b as u64)])
                        })
                        .collect(),
                ),
            );
        }
        if !self.notes.is_empty() {
            obj.insert(
                "notes".into(),
                Value::Array(self.notes.iter().map(|n| Value::String(n.clone())).collect()),
            );
        }
        Value::Object(obj)
    }

    /// Per-point residual as CSV (x, re, im).
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        writeln!(f, "x,re,im")?;
        for (k, i) in self.range.iter().enumerate() {
            let v = self.values[k];
            writeln!(f, "{},{},{}", format_g17(self.grid.x(i)), format_g17(v.re), format_g17(v.im))?;
        }
        Ok(())
    }
}

/// Write a complex field as CSV with columns x, re, im.
pub fn write_field_csv(path: &Path, field: &Field1, range: IndexRange) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "x,re,im")?;
    for i in range.iter() {
        let v = field.values[i];
        writeln!(
            f,
            "{},{},{}",
            format_g17(field.grid.x(i)),
            format_g17(v.re),
            format_g17(v.im)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g17_has_17_significant_digits() {
        let s = format_g17(std::f64::consts::PI);
        assert_eq!(s, "3.1415926535897931e0");
        let s = format_g17(-1.0 / 3.0);
        assert!(s.starts_with("-3.3333333333333331e-1"), "{s}");
    }

    #[test]
    fn json_output_is_deterministic_and_roundtrips() {
        let mut obj = serde_json::Map::new();
        obj.insert("zeta".into(), json_f64(0.1));
        obj.insert("alpha".into(), json_f64(2.0));
        obj.insert("list".into(), Value::Array(vec![json_f64(1.5), Value::from(3u64)]));
        let v = Value::Object(obj);
        let s1 = to_json_g17(&v);
        let s2 = to_json_g17(&v);
        assert_eq!(s1, s2);
        // keys sorted by the underlying map
        let alpha_pos = s1.find("alpha").unwrap();
        let zeta_pos = s1.find("zeta").unwrap();
        assert!(alpha_pos < zeta_pos);
        let back: Value = serde_json::from_str(&s1).unwrap();
        assert_eq!(back["alpha"], Value::from(2.0));
    }

    #[test]
    fn slope_of_second_order_pair_is_two() {
        assert!((convergence_slope(4.0e-4, 1.0e-4) - 2.0).abs() < 1e-12);
    }
}
