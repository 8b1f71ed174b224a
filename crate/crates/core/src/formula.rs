//! Reference extraction from formula text.
//!
//! This is a tokenizer, not an expression parser: it walks the formula,
//! skips string literals, numbers and function names, and collects every
//! literal A1 reference together with its `$` markers.

use thiserror::Error;

use crate::cellspace::{parse_cell, CellAddr, CellError, Range};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormulaError {
    #[error("formula must start with '='")]
    NotAFormula,
    #[error("at byte {offset}: {reason}")]
    Syntax { offset: usize, reason: String },
    #[error("at byte {offset}: {source}")]
    Reference {
        offset: usize,
        #[source]
        source: CellError,
    },
}

/// `$` markers of a referenced range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct FixednessHints {
    pub head_col: bool,
    pub head_row: bool,
    pub tail_col: bool,
    pub tail_row: bool,
}

impl FixednessHints {
    pub fn new(head_col: bool, head_row: bool, tail_col: bool, tail_row: bool) -> Self {
        Self {
            head_col,
            head_row,
            tail_col,
            tail_row,
        }
    }

    /// A corner counts as fixed only when both its column and row are
    /// anchored.
    pub fn head_fixed(&self) -> bool {
        self.head_col && self.head_row
    }

    pub fn tail_fixed(&self) -> bool {
        self.tail_col && self.tail_row
    }
}

/// One uncompressed edge: `prec` is referenced by the formula at `dep`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dependency {
    pub prec: Range,
    pub dep: CellAddr,
    pub hints: FixednessHints,
}

impl Dependency {
    pub fn new(prec: Range, dep: CellAddr) -> Self {
        Self {
            prec,
            dep,
            hints: FixednessHints::default(),
        }
    }

    pub fn with_hints(mut self, hints: FixednessHints) -> Self {
        self.hints = hints;
        self
    }

    pub fn is_self_reference(&self) -> bool {
        self.prec.contains_cell(self.dep)
    }
}

/// Functions whose arguments are computed references.
const COMPUTED_REFERENCE_FUNCTIONS: &[&str] = &["INDIRECT", "OFFSET"];

/// Extracts the references of `formula` (placed at `at`) as dependencies,
/// one per distinct range in order of first appearance.
pub fn extract_refs(formula: &str, at: CellAddr) -> Result<Vec<Dependency>, FormulaError> {
    let body = formula.strip_prefix('=').ok_or(FormulaError::NotAFormula)?;
    let base = 1;
    let bytes = body.as_bytes();
    let mut out: Vec<Dependency> = Vec::new();
    let mut depth: usize = 0;
    let mut pos = 0;

    let syntax = |offset: usize, reason: &str| FormulaError::Syntax {
        offset: offset + base,
        reason: reason.to_string(),
    };

    while pos < bytes.len() {
        let b = bytes[pos];
        match b {
            b'"' => {
                pos += 1;
                loop {
                    match bytes.get(pos) {
                        None => return Err(syntax(pos, "unterminated string literal")),
                        Some(b'"') if bytes.get(pos + 1) == Some(&b'"') => pos += 2,
                        Some(b'"') => {
                            pos += 1;
                            break;
                        }
                        Some(_) => pos += 1,
                    }
                }
            }
            b'(' => {
                depth += 1;
                pos += 1;
            }
            b')' => {
                if depth == 0 {
                    return Err(syntax(pos, "unbalanced ')'"));
                }
                depth -= 1;
                pos += 1;
            }
            b'0'..=b'9' | b'.' => pos = skip_number(bytes, pos),
            b'#' => {
                // error literals such as #N/A, #DIV/0!, #REF!
                pos += 1;
                while pos < bytes.len() && (bytes[pos].is_ascii_alphanumeric() || bytes[pos] == b'/') {
                    pos += 1;
                }
                if matches!(bytes.get(pos), Some(b'!') | Some(b'?')) {
                    pos += 1;
                }
            }
            b'!' => return Err(syntax(pos, "cross-sheet references are not supported")),
            b'[' | b']' | b'{' | b'}' => {
                return Err(syntax(pos, "structured or array references are not supported"))
            }
            b'\'' => return Err(syntax(pos, "quoted sheet names are not supported")),
            b if is_ident_start(b) => {
                let start = pos;
                while pos < bytes.len() && is_ident_char(bytes[pos]) {
                    pos += 1;
                }
                let word = &body[start..pos];
                let next = skip_spaces(bytes, pos);
                if bytes.get(next) == Some(&b'(') {
                    let upper = word.to_ascii_uppercase();
                    if COMPUTED_REFERENCE_FUNCTIONS.contains(&upper.as_str()) {
                        return Err(syntax(start, &format!("{upper} computes references and is not supported")));
                    }
                    continue;
                }
                match bytes.get(pos) {
                    Some(b'!') => return Err(syntax(pos, "cross-sheet references are not supported")),
                    Some(b'[') => return Err(syntax(pos, "structured references are not supported")),
                    _ => {}
                }
                if !looks_like_cell(word) {
                    let upper = word.to_ascii_uppercase();
                    if upper == "TRUE" || upper == "FALSE" {
                        continue;
                    }
                    return Err(syntax(start, &format!("unsupported name {word:?}")));
                }
                let (head, head_col, head_row) = cell_token(word, start + base)?;
                let mut range = Range::cell(head);
                let mut hints = FixednessHints::new(head_col, head_row, head_col, head_row);
                if bytes.get(pos) == Some(&b':') {
                    let tail_start = pos + 1;
                    let mut end = tail_start;
                    while end < bytes.len() && is_ident_char(bytes[end]) {
                        end += 1;
                    }
                    let tail_word = &body[tail_start..end];
                    if !looks_like_cell(tail_word) {
                        return Err(syntax(tail_start, "range end is not a cell reference"));
                    }
                    let (tail, tail_col, tail_row) = cell_token(tail_word, tail_start + base)?;
                    if bytes.get(end) == Some(&b'!') {
                        return Err(syntax(end, "cross-sheet references are not supported"));
                    }
                    range = Range::new(head, tail);
                    // Corners written in reverse order still name the same
                    // rectangle; the markers follow the written corners.
                    hints.tail_col = tail_col;
                    hints.tail_row = tail_row;
                    pos = end;
                }
                if !out.iter().any(|d| d.prec == range) {
                    out.push(Dependency {
                        prec: range,
                        dep: at,
                        hints,
                    });
                }
            }
            _ => pos += 1,
        }
    }
    if depth != 0 {
        return Err(syntax(bytes.len(), "unbalanced '('"));
    }
    Ok(out)
}

fn is_ident_start(b: u8) -> bool {
    b.is_ascii_alphabetic() || b == b'_' || b == b'$'
}

fn is_ident_char(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_' || b == b'$' || b == b'.'
}

fn skip_spaces(bytes: &[u8], mut pos: usize) -> usize {
    while bytes.get(pos).is_some_and(|b| b.is_ascii_whitespace()) {
        pos += 1;
    }
    pos
}

fn skip_number(bytes: &[u8], mut pos: usize) -> usize {
    while pos < bytes.len() && (bytes[pos].is_ascii_digit() || bytes[pos] == b'.') {
        pos += 1;
    }
    if matches!(bytes.get(pos), Some(b'e') | Some(b'E')) {
        let mut p = pos + 1;
        if matches!(bytes.get(p), Some(b'+') | Some(b'-')) {
            p += 1;
        }
        if bytes.get(p).is_some_and(u8::is_ascii_digit) {
            pos = p;
            while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
                pos += 1;
            }
        }
    }
    pos
}

/// `$?letters$?digits` and nothing else.
fn looks_like_cell(word: &str) -> bool {
    let b = word.as_bytes();
    let mut i = 0;
    if b.get(i) == Some(&b'$') {
        i += 1;
    }
    let letters = i;
    while b.get(i).is_some_and(u8::is_ascii_alphabetic) {
        i += 1;
    }
    if i == letters {
        return false;
    }
    if b.get(i) == Some(&b'$') {
        i += 1;
    }
    let digits = i;
    while b.get(i).is_some_and(u8::is_ascii_digit) {
        i += 1;
    }
    i > digits && i == b.len()
}

fn cell_token(word: &str, offset: usize) -> Result<(CellAddr, bool, bool), FormulaError> {
    let col_fixed = word.starts_with('$');
    let row_fixed = word[1..].contains('$');
    let cell = parse_cell(word).map_err(|source| FormulaError::Reference { offset, source })?;
    Ok((cell, col_fixed, row_fixed))
}
