//! Small helpers shared by the text parsers.

use std::str::FromStr;

use crate::error::{Error, Result};

/// Strips one pair of enclosing delimiters.
pub(crate) fn strip_delims(s: &str, open: char, close: char) -> Result<&str> {
    s.trim()
        .strip_prefix(open)
        .and_then(|t| t.strip_suffix(close))
        .ok_or_else(|| Error::Parse(format!("expected '{open}...{close}', got '{s}'")))
}

/// Splits on `sep` outside of any bracket pair.
pub(crate) fn split_top_level(s: &str, sep: char) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in s.char_indices() {
        match c {
            '(' | '[' | '{' => depth += 1,
            ')' | ']' | '}' => depth -= 1,
            c if c == sep && depth == 0 => {
                out.push(&s[start..i]);
                start = i + c.len_utf8();
            }
            _ => {}
        }
    }
    out.push(&s[start..]);
    out
}

pub(crate) fn parse_int<T: FromStr>(s: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    s.trim()
        .parse::<T>()
        .map_err(|e| Error::Parse(format!("bad integer '{}': {e}", s.trim())))
}
