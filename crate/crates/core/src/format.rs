//! Fixed text formatting for data files: 17 significant digits, `.` decimal
//! separator, `,` field separator, LF line endings.

use std::io::{self, Write};

/// Scientific notation with 17 significant digits. Non-finite values print as
/// `nan`, `inf` or `-inf`.
pub fn float(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        // normalise −0 so files do not depend on rounding paths
        let x = if x == 0.0 { 0.0 } else { x };
        format!("{x:.16e}")
    }
}

/// Writes one comma-separated line terminated by `\n`.
pub fn write_row<W: Write, S: AsRef<str>>(out: &mut W, fields: &[S]) -> io::Result<()> {
    let mut first = true;
    for f in fields {
        if !first {
            out.write_all(b",")?;
        }
        first = false;
        out.write_all(f.as_ref().as_bytes())?;
    }
    out.write_all(b"\n")
}
