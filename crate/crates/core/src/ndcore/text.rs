//! Line-oriented text codec for parameter vectors and the documents built on
//! them. Floats are written with enough significant digits (17 for `f64`) that
//! parsing them back is value-exact.

use std::fmt::Write as _;
use std::str::FromStr;
use std::sync::Arc;

use super::manifest::{Activation, ShapeManifest};
use super::params::ParamVector;
use crate::error::{Error, Result};
use crate::scalar::{format_exact, Scalar};

const FLOATS_PER_LINE: usize = 6;
const PARAMS_HEADER: &str = "cosml-params 1";

#[derive(Debug, Default)]
pub struct TextWriter {
    buf: String,
}

impl TextWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn line(&mut self, text: impl AsRef<str>) {
        self.buf.push_str(text.as_ref());
        self.buf.push('\n');
    }

    pub fn floats<T: Scalar>(&mut self, values: &[T]) {
        for chunk in values.chunks(FLOATS_PER_LINE) {
            let line: Vec<String> = chunk.iter().map(|&v| format_exact(v)).collect();
            self.line(line.join(" "));
        }
    }

    pub fn manifest(&mut self, m: &ShapeManifest) {
        let mut s = format!("manifest {} {}", m.activation(), m.split_index());
        for (i, o) in m.layer_dims() {
            let _ = write!(s, " {i}x{o}");
        }
        self.line(s);
    }

    pub fn params<T: Scalar>(&mut self, p: &ParamVector<T>) {
        self.manifest(p.manifest());
        let layers = p.layers();
        self.line(format!(
            "params {} {} {}",
            layers.start,
            layers.end,
            p.len()
        ));
        self.floats(p.as_slice());
    }

    pub fn finish(self) -> String {
        self.buf
    }
}

/// Cursor over the non-empty lines of a document, tracking 1-based line numbers.
pub struct TextReader<'a> {
    lines: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> TextReader<'a> {
    pub fn new(text: &'a str) -> Self {
        let lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty())
            .collect();
        Self { lines, pos: 0 }
    }

    pub fn line_no(&self) -> usize {
        self.lines
            .get(self.pos)
            .map_or_else(|| self.lines.last().map_or(1, |l| l.0 + 1), |l| l.0)
    }

    pub fn error(&self, msg: impl Into<String>) -> Error {
        Error::Parse {
            line: self.line_no(),
            msg: msg.into(),
        }
    }

    pub fn is_done(&self) -> bool {
        self.pos >= self.lines.len()
    }

    pub fn peek_keyword(&self) -> Option<&'a str> {
        self.lines
            .get(self.pos)
            .and_then(|(_, l)| l.split_whitespace().next())
    }

    /// Consumes a line starting with `keyword` and returns the raw remainder.
    pub fn expect_raw(&mut self, keyword: &str) -> Result<&'a str> {
        let (_, line) = *self
            .lines
            .get(self.pos)
            .ok_or_else(|| self.error(format!("expected `{keyword}`, found end of document")))?;
        let rest = line
            .strip_prefix(keyword)
            .filter(|r| r.is_empty() || r.starts_with(char::is_whitespace))
            .ok_or_else(|| self.error(format!("expected `{keyword}`")))?;
        self.pos += 1;
        Ok(rest.trim())
    }

    /// Consumes a line starting with `keyword` and returns its remaining tokens.
    pub fn expect(&mut self, keyword: &str) -> Result<Vec<&'a str>> {
        Ok(self.expect_raw(keyword)?.split_whitespace().collect())
    }

    pub fn parse_token<V: FromStr>(&self, token: Option<&&str>, what: &str) -> Result<V> {
        let line = self
            .lines
            .get(self.pos.saturating_sub(1))
            .map_or(1, |l| l.0);
        token
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::Parse {
                line,
                msg: format!("bad or missing {what}"),
            })
    }

    pub fn floats<T: Scalar>(&mut self, count: usize) -> Result<Vec<T>> {
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let (line_no, line) = *self.lines.get(self.pos).ok_or_else(|| {
                self.error(format!("expected {count} values, found {}", out.len()))
            })?;
            for tok in line.split_whitespace() {
                let v: T = tok.parse().map_err(|_| Error::Parse {
                    line: line_no,
                    msg: format!("bad number `{tok}`"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse {
                        line: line_no,
                        msg: format!("non-finite value `{tok}`"),
                    });
                }
                out.push(v);
            }
            self.pos += 1;
            if out.len() > count {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("more than {count} values"),
                });
            }
        }
        Ok(out)
    }

    pub fn manifest(&mut self) -> Result<ShapeManifest> {
        let toks = self.expect("manifest")?;
        let activation: Activation = self.parse_token(toks.first(), "activation")?;
        let split: usize = self.parse_token(toks.get(1), "split index")?;
        let mut dims = Vec::new();
        for tok in toks.iter().skip(2) {
            let (i, o) = tok
                .split_once('x')
                .ok_or_else(|| self.error(format!("bad layer `{tok}`")))?;
            let pair = (i.parse().ok(), o.parse().ok());
            match pair {
                (Some(i), Some(o)) => dims.push((i, o)),
                _ => return Err(self.error(format!("bad layer `{tok}`"))),
            }
        }
        ShapeManifest::new(dims, activation, split).map_err(|e| self.error(e.to_string()))
    }

    /// Reads a manifest + params block. Reuses `shared` when it describes the same network.
    pub fn params<T: Scalar>(
        &mut self,
        shared: Option<&Arc<ShapeManifest>>,
    ) -> Result<ParamVector<T>> {
        let manifest = self.manifest()?;
        let manifest = match shared {
            Some(m) if **m == manifest => m.clone(),
            _ => Arc::new(manifest),
        };
        let toks = self.expect("params")?;
        let start: usize = self.parse_token(toks.first(), "first layer")?;
        let end: usize = self.parse_token(toks.get(1), "end layer")?;
        let count: usize = self.parse_token(toks.get(2), "value count")?;
        let values = self.floats(count)?;
        ParamVector::from_values(manifest, start..end, values)
            .map_err(|e| self.error(e.to_string()))
    }
}

/// Standalone document holding one parameter vector.
pub fn params_to_text<T: Scalar>(p: &ParamVector<T>) -> String {
    let mut w = TextWriter::new();
    w.line(PARAMS_HEADER);
    w.params(p);
    w.finish()
}

pub fn params_from_text<T: Scalar>(text: &str) -> Result<ParamVector<T>> {
    let mut r = TextReader::new(text);
    let header = r.expect_raw("cosml-params")?;
    if header != "1" {
        return Err(r.error(format!("unsupported version `{header}`")));
    }
    let p = r.params(None)?;
    if !r.is_done() {
        return Err(r.error("trailing content"));
    }
    Ok(p)
}
