//! Exact text format for expansions.
//!
//! ```text
//! amite-expansion 1
//! kind tanh
//! terms 3
//! vmax 2
//! digits 60
//! kernel_bound 2.0734...
//! coefficients 4
//! 0.99...
//! ...
//! ```
//!
//! Every real number is a decimal string carrying enough digits to
//! reproduce the in-memory binary value exactly.

use std::fs;
use std::path::Path;

use super::{ActivationKind, AmiteExpansion};
use crate::mpcore::Real;
use crate::{Error, Result};

const MAGIC: &str = "amite-expansion";
const VERSION: u32 = 1;

pub fn to_text(expansion: &AmiteExpansion) -> String {
    let mut out = String::new();
    out.push_str(&format!("{MAGIC} {VERSION}\n"));
    out.push_str(&format!("kind {}\n", expansion.kind()));
    out.push_str(&format!("terms {}\n", expansion.terms()));
    out.push_str(&format!("vmax {:?}\n", expansion.vmax()));
    out.push_str(&format!("digits {}\n", expansion.digits()));
    out.push_str(&format!(
        "kernel_bound {}\n",
        expansion.kernel_bound().to_decimal_string()
    ));
    out.push_str(&format!("coefficients {}\n", expansion.coefficients().len()));
    for c in expansion.coefficients() {
        out.push_str(&c.to_decimal_string());
        out.push('\n');
    }
    out
}

fn schema(line: usize, message: impl Into<String>) -> Error {
    Error::Schema {
        location: format!("line {line}"),
        message: message.into(),
    }
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<(usize, &'a str)> {
        for (i, l) in self.inner.by_ref() {
            self.last = i + 1;
            let l = l.trim();
            if !l.is_empty() && !l.starts_with('#') {
                return Ok((i + 1, l));
            }
        }
        Err(schema(self.last + 1, "unexpected end of file"))
    }

    fn field(&mut self, key: &str) -> Result<(usize, &'a str)> {
        let (n, l) = self.next()?;
        let mut parts = l.splitn(2, char::is_whitespace);
        let k = parts.next().unwrap_or_default();
        if k != key {
            return Err(schema(n, format!("expected field `{key}`, found `{k}`")));
        }
        let v = parts.next().map(str::trim).unwrap_or_default();
        if v.is_empty() {
            return Err(schema(n, format!("field `{key}` has no value")));
        }
        Ok((n, v))
    }
}

fn parse_num<T: std::str::FromStr>(n: usize, key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| schema(n, format!("field `{key}` has invalid value `{v}`")))
}

pub fn from_text(text: &str) -> Result<AmiteExpansion> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        last: 0,
    };
    let (n, version) = lines.field(MAGIC)?;
    if parse_num::<u32>(n, MAGIC, version)? != VERSION {
        return Err(schema(n, format!("unsupported format version {version}")));
    }
    let (n, kind) = lines.field("kind")?;
    let kind: ActivationKind = kind.parse().map_err(|e: Error| schema(n, e.to_string()))?;
    let (n, terms) = lines.field("terms")?;
    let terms: u32 = parse_num(n, "terms", terms)?;
    let (n, vmax) = lines.field("vmax")?;
    let vmax: f64 = parse_num(n, "vmax", vmax)?;
    let (n, digits) = lines.field("digits")?;
    let digits: u32 = parse_num(n, "digits", digits)?;
    if digits == 0 {
        return Err(schema(n, "digits must be positive"));
    }
    let (n, kb) = lines.field("kernel_bound")?;
    let kernel_bound = Real::parse(kb, digits).map_err(|e| schema(n, e.to_string()))?;
    let (n, count) = lines.field("coefficients")?;
    let count: usize = parse_num(n, "coefficients", count)?;
    if count != terms as usize + 1 {
        return Err(schema(
            n,
            format!("expected {} coefficients, header says {count}", terms + 1),
        ));
    }
    let mut coefficients = Vec::with_capacity(count);
    for _ in 0..count {
        let (n, l) = lines.next()?;
        coefficients.push(Real::parse(l, digits).map_err(|e| schema(n, e.to_string()))?);
    }
    AmiteExpansion::from_parts(kind, terms, vmax, digits, kernel_bound, coefficients)
}

pub fn save_expansion(expansion: &AmiteExpansion, path: &Path) -> Result<()> {
    fs::write(path, to_text(expansion))?;
    Ok(())
}

pub fn load_expansion(path: &Path) -> Result<AmiteExpansion> {
    from_text(&fs::read_to_string(path)?)
}
