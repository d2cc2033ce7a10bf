//! Line-oriented text format for input streams.
//!
//! Records are whitespace separated: `E u v`, `Q u v`, `COUNT`, `MAX`,
//! `SMALL l`, `TREE`, `DUMP`, `AGE t`, `AUTOAGE c` and `NOP` for an idle
//! tick. Lines starting with `#` and blank lines are skipped.

use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use thiserror::Error;

use crate::aging::AgingPredicate;
use crate::model::{StreamItem, Timestamp, VertexId};

#[derive(Debug, Error)]
pub enum StreamError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn num<T: std::str::FromStr>(tok: Option<&str>, what: &str) -> Result<T, String> {
    let tok = tok.ok_or_else(|| format!("missing {what}"))?;
    tok.parse().map_err(|_| format!("bad {what} `{tok}`"))
}

/// Parse one record; `Ok(None)` for comments and blank lines.
pub fn parse_line(line: &str) -> Result<Option<StreamItem>, String> {
    let line = line.trim();
    if line.is_empty() || line.starts_with('#') {
        return Ok(None);
    }
    let mut it = line.split_whitespace();
    let tag = it.next().expect("non-empty line");
    let item = match tag {
        "E" => StreamItem::Edge(VertexId(num(it.next(), "u")?), VertexId(num(it.next(), "v")?)),
        "Q" => StreamItem::Conn(VertexId(num(it.next(), "u")?), VertexId(num(it.next(), "v")?)),
        "COUNT" => StreamItem::EdgeCount,
        "MAX" => StreamItem::MaxComponent,
        "SMALL" => StreamItem::SmallComponents(num(it.next(), "lambda")?),
        "TREE" => StreamItem::SpanningTree,
        "DUMP" => StreamItem::Dump,
        "AGE" => StreamItem::Age(AgingPredicate::Threshold(Timestamp(num(it.next(), "threshold")?))),
        "AUTOAGE" => {
            let c: f64 = num(it.next(), "target")?;
            if !(0.0..1.0).contains(&c) {
                return Err(format!("target {c} outside [0, 1)"));
            }
            StreamItem::AutoAge(c)
        }
        "NOP" => StreamItem::Empty,
        other => return Err(format!("unknown record `{other}`")),
    };
    if let Some(extra) = it.next() {
        return Err(format!("trailing token `{extra}`"));
    }
    Ok(Some(item))
}

/// Render one item; custom aging predicates render by name and do not parse back.
pub fn render_item(item: &StreamItem) -> String {
    match item {
        StreamItem::Empty => "NOP".into(),
        StreamItem::Edge(u, v) => format!("E {u} {v}"),
        StreamItem::Conn(u, v) => format!("Q {u} {v}"),
        StreamItem::EdgeCount => "COUNT".into(),
        StreamItem::MaxComponent => "MAX".into(),
        StreamItem::SmallComponents(l) => format!("SMALL {l}"),
        StreamItem::SpanningTree => "TREE".into(),
        StreamItem::Dump => "DUMP".into(),
        StreamItem::Age(AgingPredicate::Threshold(t)) => format!("AGE {t}"),
        StreamItem::Age(AgingPredicate::Custom { name, .. }) => format!("AGE {name}"),
        StreamItem::AutoAge(c) => format!("AUTOAGE {c}"),
    }
}

pub fn render(items: &[StreamItem]) -> String {
    items.iter().map(|i| render_item(i) + "\n").collect()
}

pub fn parse_str(text: &str) -> Result<Vec<StreamItem>, StreamError> {
    parse_reader(text.as_bytes())
}

pub fn parse_reader<R: Read>(r: R) -> Result<Vec<StreamItem>, StreamError> {
    let mut items = Vec::new();
    for (i, line) in BufReader::new(r).lines().enumerate() {
        let line = line?;
        match parse_line(&line) {
            Ok(Some(item)) => items.push(item),
            Ok(None) => {}
            Err(msg) => return Err(StreamError::Parse { line: i + 1, msg }),
        }
    }
    Ok(items)
}

pub fn parse_stream_file(path: impl AsRef<Path>) -> Result<Vec<StreamItem>, StreamError> {
    parse_reader(File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_records() {
        assert_eq!(parse_line("E 1 2"), Ok(Some(StreamItem::edge(1, 2))));
        assert_eq!(parse_line("Q 1 2"), Ok(Some(StreamItem::conn(1, 2))));
        assert_eq!(
            parse_line("AGE 500"),
            Ok(Some(StreamItem::Age(AgingPredicate::Threshold(Timestamp(500)))))
        );
        assert_eq!(parse_line("  # note"), Ok(None));
    }

    #[test]
    fn malformed_line_reports_number() {
        let err = parse_str("E 1 2\nE 1\n").unwrap_err();
        assert!(matches!(err, StreamError::Parse { line: 2, .. }), "{err}");
        assert!(parse_line("E 1 2 3").is_err());
        assert!(parse_line("AUTOAGE 1.5").is_err());
    }
}
