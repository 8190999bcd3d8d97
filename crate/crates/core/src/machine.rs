//! Machine-readable report format: pretty-printed JSON with object keys in
//! byte order, two-space indentation and a trailing newline. Dates are
//! `YYYY-MM-DD` strings, absent optional values are `null`, shares are
//! fractions in [0, 1].

use serde::Serialize;

pub fn to_machine<T: Serialize>(value: &T) -> Result<String, serde_json::Error> {
    // Going through Value sorts struct fields as well as map keys.
    let value = serde_json::to_value(value)?;
    let mut out = serde_json::to_string_pretty(&value)?;
    out.push('\n');
    Ok(out)
}
