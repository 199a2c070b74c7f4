//! Line-oriented `tag,value,value,...` reader shared by the model formats.

use crate::error::{Error, Result};

pub(crate) struct Lines<'a> {
    iter: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
    line: usize,
}

impl<'a> Lines<'a> {
    pub(crate) fn new(text: &'a str) -> Self {
        Self {
            iter: text.lines().enumerate().peekable(),
            line: 0,
        }
    }

    pub(crate) fn error(&self, msg: &str) -> Error {
        Error::Model(format!("line {}: {msg}", self.line))
    }

    pub(crate) fn peek_tag(&mut self) -> Option<&'a str> {
        while let Some((_, l)) = self.iter.peek() {
            if l.trim().is_empty() {
                self.iter.next();
                continue;
            }
            return l.split(',').next();
        }
        None
    }

    /// Next non-empty row with the given tag; returns the remaining fields.
    pub(crate) fn next_row(&mut self, tag: &str) -> Result<Vec<&'a str>> {
        loop {
            let (i, l) = self
                .iter
                .next()
                .ok_or_else(|| Error::Model(format!("unexpected end of file, expected '{tag}'")))?;
            self.line = i + 1;
            if l.trim().is_empty() {
                continue;
            }
            let mut fields = l.split(',');
            let found = fields.next().unwrap_or("");
            if found != tag {
                return Err(self.error(&format!("expected '{tag}', found '{found}'")));
            }
            return Ok(fields.collect());
        }
    }

    pub(crate) fn expect_tag(&mut self, tag: &str) -> Result<()> {
        let row = self.next_row(tag)?;
        match row.as_slice() {
            ["1"] => Ok(()),
            _ => Err(self.error("unsupported format version")),
        }
    }

    pub(crate) fn parse_f64(&self, s: &str) -> Result<f64> {
        s.trim()
            .parse::<f64>()
            .map_err(|_| self.error(&format!("bad number '{s}'")))
    }

    pub(crate) fn parse_usize(&self, s: &str) -> Result<usize> {
        s.trim()
            .parse::<usize>()
            .map_err(|_| self.error(&format!("bad count '{s}'")))
    }

    pub(crate) fn expect_usize(&mut self, tag: &str) -> Result<usize> {
        let row = self.next_row(tag)?;
        if row.len() != 1 {
            return Err(self.error(&format!("'{tag}' takes one value")));
        }
        self.parse_usize(row[0])
    }

    /// Row of floats; with `Some(n)` the length must match exactly.
    pub(crate) fn expect_f64s(&mut self, tag: &str, len: Option<usize>) -> Result<Vec<f64>> {
        let row = self.next_row(tag)?;
        if let Some(n) = len {
            if row.len() != n {
                return Err(self.error(&format!("'{tag}' has {} values, expected {n}", row.len())));
            }
        }
        row.iter().map(|s| self.parse_f64(s)).collect()
    }

    pub(crate) fn expect_end(&mut self) -> Result<()> {
        match self.peek_tag() {
            None => Ok(()),
            Some(tag) => Err(Error::Model(format!("trailing data starting with '{tag}'"))),
        }
    }
}
