use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::Sensation;
use crate::layout::{col_members, row_members, ElementId, COLS, ELEMENT_COUNT, ROWS};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "index", rename_all = "snake_case")]
pub enum Selector {
    /// Explicit element list, kept as written.
    Elems(Vec<u8>),
    All,
    Row(u8),
    Col(u8),
}

impl Selector {
    pub fn members(&self) -> BTreeSet<ElementId> {
        match self {
            Selector::Elems(ids) => ids.iter().filter_map(|&i| ElementId::new(i)).collect(),
            Selector::All => ElementId::all().collect(),
            Selector::Row(r) => row_members(*r as usize).into_iter().collect(),
            Selector::Col(c) => col_members(*c as usize).into_iter().collect(),
        }
    }
}

impl fmt::Display for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Selector::Elems(ids) => {
                f.write_str("elem ")?;
                for (i, id) in ids.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{id}")?;
                }
                Ok(())
            }
            Selector::All => f.write_str("all"),
            Selector::Row(r) => write!(f, "row {r}"),
            Selector::Col(c) => write!(f, "col {c}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    pub selector: Selector,
    pub sensation: Sensation,
    /// 1-based source line.
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternScript {
    /// Sorted by time; events at equal times keep their file order.
    pub events: Vec<Event>,
    pub duration: f64,
    /// Whether `duration` came from a `duration` line rather than the last event time.
    pub explicit_duration: bool,
}

impl PatternScript {
    pub fn empty() -> Self {
        Self {
            events: Vec::new(),
            duration: 0.0,
            explicit_duration: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    UnexpectedChar(char),
    BadNumber(String),
    Expected { expected: String, found: String },
    ElementOutOfRange(String),
    RowOutOfRange(String),
    ColOutOfRange(String),
    NegativeTime(String),
    DuplicateDuration,
    DurationTooShort { duration: String, last_event: String },
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseErrorKind::UnexpectedChar(c) => write!(f, "unexpected character '{}'", c.escape_default()),
            ParseErrorKind::BadNumber(s) => write!(f, "malformed number '{s}'"),
            ParseErrorKind::Expected { expected, found } => write!(f, "expected {expected}, found {found}"),
            ParseErrorKind::ElementOutOfRange(s) => {
                write!(f, "element id {s} out of range 0..{}", ELEMENT_COUNT - 1)
            }
            ParseErrorKind::RowOutOfRange(s) => write!(f, "row {s} out of range 0..{}", ROWS - 1),
            ParseErrorKind::ColOutOfRange(s) => write!(f, "column {s} out of range 0..{}", COLS - 1),
            ParseErrorKind::NegativeTime(s) => write!(f, "negative time {s}"),
            ParseErrorKind::DuplicateDuration => f.write_str("duration given more than once"),
            ParseErrorKind::DurationTooShort { duration, last_event } => {
                write!(f, "duration {duration}s ends before the last event at {last_event}s")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {column}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok<'a> {
    Word(&'a str),
    Num(&'a str),
    Comma,
}

impl fmt::Display for Tok<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Word(w) => write!(f, "'{w}'"),
            Tok::Num(n) => write!(f, "number {n}"),
            Tok::Comma => f.write_str("','"),
        }
    }
}

/// Tokens of one line with their 1-based columns.
fn lex(line: &str, line_no: usize) -> Result<Vec<(Tok<'_>, usize)>, ParseError> {
    let mut out = Vec::new();
    let chars: Vec<(usize, char)> = line.char_indices().collect();
    let mut i = 0;
    let err = |i: usize, kind| ParseError {
        line: line_no,
        column: i + 1,
        kind,
    };
    while i < chars.len() {
        let (byte, c) = chars[i];
        let col = i + 1;
        if c == '#' {
            break;
        } else if c.is_whitespace() {
            i += 1;
        } else if c == ',' {
            out.push((Tok::Comma, col));
            i += 1;
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].1.is_ascii_alphanumeric() || chars[i].1 == '_') {
                i += 1;
            }
            let end = chars.get(i).map_or(line.len(), |&(b, _)| b);
            out.push((Tok::Word(&line[chars[start].0..end]), col));
        } else if c.is_ascii_digit() || c == '-' || c == '+' || c == '.' {
            let start = i;
            i += 1;
            while i < chars.len() && (chars[i].1.is_ascii_digit() || chars[i].1 == '.') {
                i += 1;
            }
            let end = chars.get(i).map_or(line.len(), |&(b, _)| b);
            let text = &line[byte..end];
            let digits = text.trim_start_matches(['-', '+']);
            let well_formed = !digits.is_empty()
                && digits.matches('.').count() <= 1
                && !digits.starts_with('.')
                && !digits.ends_with('.');
            if !well_formed {
                return Err(err(start, ParseErrorKind::BadNumber(text.to_owned())));
            }
            out.push((Tok::Num(text), col));
        } else {
            return Err(err(i, ParseErrorKind::UnexpectedChar(c)));
        }
    }
    Ok(out)
}

struct LineParser<'a> {
    toks: Vec<(Tok<'a>, usize)>,
    pos: usize,
    line: usize,
    end_col: usize,
}

impl<'a> LineParser<'a> {
    fn err(&self, column: usize, kind: ParseErrorKind) -> ParseError {
        ParseError {
            line: self.line,
            column,
            kind,
        }
    }

    fn here(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end_col, |t| t.1)
    }

    fn found(&self) -> String {
        self.toks
            .get(self.pos)
            .map_or_else(|| "end of line".to_owned(), |t| t.0.to_string())
    }

    fn expected(&self, what: &str) -> ParseError {
        self.err(
            self.here(),
            ParseErrorKind::Expected {
                expected: what.to_owned(),
                found: self.found(),
            },
        )
    }

    fn word(&mut self, what: &str) -> Result<(&'a str, usize), ParseError> {
        match self.toks.get(self.pos) {
            Some(&(Tok::Word(w), col)) => {
                self.pos += 1;
                Ok((w, col))
            }
            _ => Err(self.expected(what)),
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        match self.toks.get(self.pos) {
            Some((Tok::Word(w), _)) if *w == kw => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.expected(&format!("'{kw}'"))),
        }
    }

    fn seconds(&mut self) -> Result<f64, ParseError> {
        let (text, col) = match self.toks.get(self.pos) {
            Some(&(Tok::Num(n), col)) => (n, col),
            _ => return Err(self.expected("a time in seconds")),
        };
        self.pos += 1;
        let v: f64 = text
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| self.err(col, ParseErrorKind::BadNumber(text.to_owned())))?;
        if v < 0.0 {
            return Err(self.err(col, ParseErrorKind::NegativeTime(text.to_owned())));
        }
        self.keyword("s")?;
        // "-0" parses as negative zero; normalise so printing stays canonical
        Ok(v + 0.0)
    }

    fn index(&mut self, limit: usize, out_of_range: fn(String) -> ParseErrorKind) -> Result<u8, ParseError> {
        let (text, col) = match self.toks.get(self.pos) {
            Some(&(Tok::Num(n), col)) => (n, col),
            _ => return Err(self.expected("an index")),
        };
        if !text.bytes().all(|b| b.is_ascii_digit()) {
            if text.starts_with('-') && text[1..].bytes().all(|b| b.is_ascii_digit()) {
                return Err(self.err(col, out_of_range(text.to_owned())));
            }
            return Err(self.expected("a non-negative integer index"));
        }
        self.pos += 1;
        match text.parse::<usize>() {
            Ok(v) if v < limit => Ok(v as u8),
            _ => Err(self.err(col, out_of_range(text.to_owned()))),
        }
    }

    fn selector(&mut self) -> Result<Selector, ParseError> {
        let (w, col) = self.word("a selector (elem, all, row, col)")?;
        match w {
            "all" => Ok(Selector::All),
            "row" => Ok(Selector::Row(self.index(ROWS, ParseErrorKind::RowOutOfRange)?)),
            "col" => Ok(Selector::Col(self.index(COLS, ParseErrorKind::ColOutOfRange)?)),
            "elem" => {
                let mut ids = vec![self.index(ELEMENT_COUNT, ParseErrorKind::ElementOutOfRange)?];
                while let Some((Tok::Comma, _)) = self.toks.get(self.pos) {
                    self.pos += 1;
                    ids.push(self.index(ELEMENT_COUNT, ParseErrorKind::ElementOutOfRange)?);
                }
                Ok(Selector::Elems(ids))
            }
            other => Err(self.err(
                col,
                ParseErrorKind::Expected {
                    expected: "a selector (elem, all, row, col)".into(),
                    found: format!("'{other}'"),
                },
            )),
        }
    }

    fn sensation(&mut self) -> Result<Sensation, ParseError> {
        let (w, col) = self.word("a sensation (warm, cool, neutral)")?;
        match w {
            "warm" => Ok(Sensation::Warm),
            "cool" => Ok(Sensation::Cool),
            "neutral" => Ok(Sensation::Neutral),
            other => Err(self.err(
                col,
                ParseErrorKind::Expected {
                    expected: "a sensation (warm, cool, neutral)".into(),
                    found: format!("'{other}'"),
                },
            )),
        }
    }

    fn end(&self) -> Result<(), ParseError> {
        if self.pos < self.toks.len() {
            return Err(self.expected("end of line"));
        }
        Ok(())
    }
}

/// Parses the pattern language:
///
/// ```text
/// script    := line*
/// line      := "at" FLOAT "s" selector sensation | "duration" FLOAT "s" | comment | blank
/// selector  := "elem" INT ("," INT)* | "all" | "row" INT | "col" INT
/// sensation := "warm" | "cool" | "neutral"
/// ```
///
/// Without a `duration` line the script lasts until its last event.
pub fn parse_pattern(text: &str) -> Result<PatternScript, ParseError> {
    let mut events = Vec::new();
    let mut duration: Option<(f64, usize)> = None;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let toks = lex(raw, line_no)?;
        if toks.is_empty() {
            continue;
        }
        let mut p = LineParser {
            toks,
            pos: 0,
            line: line_no,
            end_col: raw.chars().count() + 1,
        };
        let (head, head_col) = p.word("'at' or 'duration'")?;
        match head {
            "at" => {
                let time = p.seconds()?;
                let selector = p.selector()?;
                let sensation = p.sensation()?;
                p.end()?;
                events.push(Event {
                    time,
                    selector,
                    sensation,
                    line: line_no,
                });
            }
            "duration" => {
                if duration.is_some() {
                    return Err(p.err(head_col, ParseErrorKind::DuplicateDuration));
                }
                let d = p.seconds()?;
                p.end()?;
                duration = Some((d, line_no));
            }
            other => {
                return Err(p.err(
                    head_col,
                    ParseErrorKind::Expected {
                        expected: "'at' or 'duration'".into(),
                        found: format!("'{other}'"),
                    },
                ))
            }
        }
    }
    events.sort_by(|a, b| a.time.total_cmp(&b.time));
    let last = events.last().map_or(0.0, |e| e.time);
    let (duration, explicit_duration) = match duration {
        Some((d, line)) if d < last => {
            return Err(ParseError {
                line,
                column: 1,
                kind: ParseErrorKind::DurationTooShort {
                    duration: format_seconds(d),
                    last_event: format_seconds(last),
                },
            })
        }
        Some((d, _)) => (d, true),
        None => (last, false),
    };
    Ok(PatternScript {
        events,
        duration,
        explicit_duration,
    })
}

/// Shortest decimal that reads back to the same value, always with a fractional part.
pub fn format_seconds(v: f64) -> String {
    let s = format!("{v}");
    if s.contains('.') {
        s
    } else {
        format!("{s}.0")
    }
}

/// Canonical text: optional `duration` line, then one line per event in time order.
pub fn print_pattern(script: &PatternScript) -> String {
    let mut out = String::new();
    if script.explicit_duration {
        out.push_str(&format!("duration {}s\n", format_seconds(script.duration)));
    }
    for e in &script.events {
        out.push_str(&format!(
            "at {}s {} {}\n",
            format_seconds(e.time),
            e.selector,
            e.sensation.as_str().to_ascii_lowercase()
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(s: &Selector) -> Vec<u8> {
        s.members().into_iter().map(|e| e.get()).collect()
    }

    #[test]
    fn empty_text() {
        let s = parse_pattern("").unwrap();
        assert!(s.events.is_empty());
        assert_eq!(s.duration, 0.0);
        assert_eq!(parse_pattern("\n  # nothing\n\n").unwrap(), PatternScript::empty());
    }

    #[test]
    fn two_events() {
        let s = parse_pattern("at 0.0s all warm\nat 2.5s elem 3 cool").unwrap();
        assert_eq!(s.events.len(), 2);
        assert_eq!(ids(&s.events[1].selector), vec![3]);
        assert_eq!(s.events[1].sensation, Sensation::Cool);
        assert_eq!((s.duration, s.explicit_duration), (2.5, false));
    }

    #[test]
    fn row_selector() {
        let s = parse_pattern("at 1.0s row 0 warm").unwrap();
        assert_eq!(ids(&s.events[0].selector), vec![0, 1, 2, 3]);
        assert_eq!(
            ids(&parse_pattern("at 1s col 1 warm").unwrap().events[0].selector),
            vec![1, 5]
        );
    }

    #[test]
    fn events_sort_stably() {
        let s = parse_pattern("at 2s elem 0 warm\nat 1s elem 1 warm\nat 1s elem 2 cool # same time\n").unwrap();
        let lines: Vec<usize> = s.events.iter().map(|e| e.line).collect();
        assert_eq!(lines, vec![2, 3, 1]);
    }

    #[test]
    fn flexible_spacing() {
        let a = parse_pattern("at 1.5 s elem 1 , 2,3 neutral").unwrap();
        let b = parse_pattern("  at 1.5s elem 1,2,3 neutral   # c").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn duration_directive() {
        let s = parse_pattern("duration 10s\nat 1s all warm").unwrap();
        assert_eq!((s.duration, s.explicit_duration), (10.0, true));
        let e = parse_pattern("duration 1s\nat 2s all warm").unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::DurationTooShort { .. }));
        let e = parse_pattern("duration 1s\nduration 2s").unwrap_err();
        assert_eq!((e.line, e.kind), (2, ParseErrorKind::DuplicateDuration));
    }

    #[test]
    fn errors_carry_positions() {
        let e = parse_pattern("at 0s all warm\nat 1s elem 8 cool").unwrap_err();
        assert_eq!((e.line, e.column), (2, 12));
        assert_eq!(e.kind, ParseErrorKind::ElementOutOfRange("8".into()));

        let e = parse_pattern("at -1.0s all warm").unwrap_err();
        assert_eq!(
            (e.line, e.column, e.kind),
            (1, 4, ParseErrorKind::NegativeTime("-1.0".into()))
        );

        let e = parse_pattern("at 1s all w@rm").unwrap_err();
        assert_eq!((e.column, e.kind), (12, ParseErrorKind::UnexpectedChar('@')));

        let e = parse_pattern("at 1s row 2 warm").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::RowOutOfRange("2".into()));
        let e = parse_pattern("at 1s col 4 warm").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::ColOutOfRange("4".into()));
        let e = parse_pattern("at 1s elem -1 warm").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::ElementOutOfRange("-1".into()));

        let e = parse_pattern("at 1s all").unwrap_err();
        assert_eq!(e.column, 10);
        assert!(e.to_string().starts_with("line 1, column 10: expected a sensation"));

        let e = parse_pattern("at 1 all warm").unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::Expected { .. }));
        let e = parse_pattern("at 1.2.3s all warm").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::BadNumber("1.2.3".into()));
        let e = parse_pattern("at 1s all warm extra").unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::Expected { .. }));
        let e = parse_pattern("At 1s all warm").unwrap_err();
        assert_eq!(e.column, 1);
        let e = parse_pattern("at 1s elem 1.5 warm").unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::Expected { .. }));
    }

    #[test]
    fn unicode_columns_count_characters() {
        let e = parse_pattern("at 1s all warm # ok\nat 1s élem 1 warm").unwrap_err();
        assert_eq!((e.line, e.column, e.kind), (2, 7, ParseErrorKind::UnexpectedChar('é')));
    }

    #[test]
    fn canonical_print_round_trip() {
        let text =
            "duration 12.0s\nat 0.0s all warm\nat 0.25s elem 7,1,1 cool\nat 3.0s row 1 neutral\nat 3.0s col 2 warm\n";
        let s = parse_pattern(text).unwrap();
        assert_eq!(print_pattern(&s), text);
        assert_eq!(parse_pattern(&print_pattern(&s)).unwrap(), s);
    }

    #[test]
    fn negative_zero_is_normalised() {
        let s = parse_pattern("at -0.0s all warm").unwrap();
        assert_eq!(print_pattern(&s), "at 0.0s all warm\n");
    }
}
