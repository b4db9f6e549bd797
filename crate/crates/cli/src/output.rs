use std::fs;
use std::io::Write;
use std::path::Path;

use serde_json::{Number, Value};

pub const SIGNIFICANT_DIGITS: usize = 12;

/// Rounds `x` to [`SIGNIFICANT_DIGITS`] significant digits.
pub fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x)
        .parse()
        .unwrap_or(x)
}

/// Rounds every float in `v`; integers are left alone.
pub fn round_floats(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => n
            .as_f64()
            .and_then(|x| Number::from_f64(round_sig(x)))
            .map_or(Value::Null, Value::Number),
        Value::Array(items) => Value::Array(items.into_iter().map(round_floats).collect()),
        Value::Object(map) => {
            Value::Object(map.into_iter().map(|(k, v)| (k, round_floats(v))).collect())
        }
        other => other,
    }
}

/// A float for CSV cells, with the same rounding as JSON output.
pub fn csv_num(x: f64) -> String {
    Number::from_f64(round_sig(x)).map_or_else(|| x.to_string(), |n| n.to_string())
}

pub fn json_text(v: Value) -> String {
    let mut s = serde_json::to_string_pretty(&round_floats(v)).expect("JSON values serialize");
    s.push('\n');
    s
}

pub fn emit(out: Option<&Path>, text: &str) -> std::io::Result<()> {
    match out {
        Some(path) => fs::write(path, text),
        None => std::io::stdout().lock().write_all(text.as_bytes()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(round_sig(1.0 / 3.0), 0.333333333333);
        assert_eq!(round_sig(123456.7890123456), 123456.789012);
        assert_eq!(round_sig(0.0), 0.0);
        assert_eq!(round_sig(-2.0e-20 / 3.0), -6.66666666667e-21);
    }

    #[test]
    fn csv_numbers_are_compact() {
        assert_eq!(csv_num(0.5000000000000003), "0.5");
        assert_eq!(csv_num(-5.635929603145942e-18), "-5.63592960315e-18");
        assert_eq!(csv_num(2.0), "2.0");
    }

    #[test]
    fn integers_untouched() {
        let v = round_floats(json!({"k": 13, "x": [0.1, 2.0000000000001], "s": "a"}));
        assert_eq!(v, json!({"k": 13, "x": [0.1, 2.0], "s": "a"}));
    }
}
