use std::collections::HashSet;

use crate::sva::{tokenize, Token, TokenKind};
use crate::tree::AnswerContent;

/// Splits model output into fenced code and surrounding prose. An
/// unterminated final fence runs to the end of the text.
fn split_fences(text: &str) -> (Vec<String>, String) {
    let mut blocks = Vec::new();
    let mut prose = Vec::new();
    let mut current: Option<Vec<&str>> = None;
    for line in text.lines() {
        if line.trim_start().starts_with("```") {
            match current.take() {
                Some(code) => blocks.push(code.join("\n")),
                None => current = Some(Vec::new()),
            }
        } else if let Some(code) = current.as_mut() {
            code.push(line);
        } else {
            prose.push(line);
        }
    }
    if let Some(code) = current {
        blocks.push(code.join("\n"));
    }
    (blocks, prose.join("\n").trim().to_string())
}

fn is_verb(t: &Token) -> bool {
    t.is_kw("assert") || t.is_kw("assume") || t.is_kw("cover")
}

/// Index of the verb if a statement (optionally labelled) starts at `i`.
fn stmt_verb(toks: &[Token], i: usize) -> Option<usize> {
    let t = toks.get(i)?;
    if is_verb(t) && toks.get(i + 1).is_some_and(|n| n.is_kw("property")) {
        return Some(i);
    }
    if t.kind == TokenKind::Ident
        && toks.get(i + 1).is_some_and(|n| n.is_punct(":"))
        && toks.get(i + 2).is_some_and(is_verb)
        && toks.get(i + 3).is_some_and(|n| n.is_kw("property"))
    {
        return Some(i + 2);
    }
    None
}

/// Index of the last token of the statement whose verb is at `verb`.
fn stmt_end(toks: &[Token], verb: usize) -> usize {
    let mut depth = 0i32;
    let mut j = verb + 2;
    let mut last = verb + 1;
    while j < toks.len() {
        let t = &toks[j];
        if depth == 0 && (t.is_kw("property") || t.is_kw("endproperty") || stmt_verb(toks, j).is_some()) {
            return last;
        }
        match t.lexeme.as_str() {
            "(" | "[" | "{" if t.kind == TokenKind::Punct => depth += 1,
            ")" | "]" | "}" if t.kind == TokenKind::Punct => depth -= 1,
            ";" if t.kind == TokenKind::Punct && depth <= 0 => {
                if toks.get(j + 1).is_some_and(|n| n.is_kw("else")) {
                    depth = 0;
                } else {
                    return j;
                }
            }
            _ => {}
        }
        last = j;
        j += 1;
    }
    last
}

/// Splits one code block into assertion units: a property declaration with
/// the statement asserting it, or a standalone statement. Other code is
/// skipped.
pub fn split_units(code: &str) -> Vec<String> {
    let toks = tokenize(code);
    let mut units = Vec::new();
    let mut i = 0;
    while i < toks.len() {
        if toks[i].is_kw("property") {
            let start = i;
            let mut j = i + 1;
            while j < toks.len()
                && !toks[j].is_kw("endproperty")
                && !toks[j].is_kw("property")
                && stmt_verb(&toks, j).is_none()
            {
                j += 1;
            }
            let mut end = j.saturating_sub(1).max(start);
            if j < toks.len() && toks[j].is_kw("endproperty") {
                end = j;
                if toks.get(j + 1).is_some_and(|t| t.is_punct(":"))
                    && toks.get(j + 2).is_some_and(|t| t.kind == TokenKind::Ident)
                {
                    end = j + 2;
                }
                let name = toks.get(start + 1).filter(|t| t.kind == TokenKind::Ident).map(|t| t.lexeme.as_str());
                if let Some(v) = stmt_verb(&toks, end + 1) {
                    let refs_this = toks.get(v + 2).is_some_and(|t| t.is_punct("("))
                        && toks.get(v + 3).map(|t| t.lexeme.as_str()) == name
                        && toks.get(v + 4).is_some_and(|t| t.is_punct(")"));
                    if refs_this {
                        end = stmt_end(&toks, v);
                    }
                }
            }
            units.push(code[toks[start].start..toks[end].end].to_string());
            i = end + 1;
        } else if let Some(v) = stmt_verb(&toks, i) {
            let end = stmt_end(&toks, v);
            units.push(code[toks[i].start..toks[end].end].to_string());
            i = end + 1;
        } else {
            i += 1;
        }
    }
    units
}

/// Assertion units from every fenced block, in order.
pub fn extract_assertions(text: &str) -> Vec<String> {
    split_fences(text).0.iter().flat_map(|b| split_units(b)).collect()
}

/// Assertions plus the prose outside the fences.
pub fn extract_answer(text: &str) -> AnswerContent {
    let (blocks, prose) = split_fences(text);
    let assertions = blocks.iter().flat_map(|b| split_units(b)).collect();
    AnswerContent::new(assertions, prose)
}

/// Comment-free, whitespace-collapsed form used for equality: token lexemes
/// joined by single spaces, with repeated trailing semicolons folded.
pub fn normalize_assertion(text: &str) -> String {
    let lexemes: Vec<String> = tokenize(text).into_iter().map(|t| t.lexeme).collect();
    let mut end = lexemes.len();
    while end >= 2 && lexemes[end - 1] == ";" && lexemes[end - 2] == ";" {
        end -= 1;
    }
    lexemes[..end].join(" ")
}

/// Drops later texts whose normalized form was already seen. Keeps the
/// original text of the first occurrence.
pub fn normalize_pool<I, T>(pool: I) -> Vec<String>
where
    I: IntoIterator<Item = T>,
    T: AsRef<str>,
{
    let mut seen = HashSet::new();
    pool.into_iter()
        .filter(|t| seen.insert(normalize_assertion(t.as_ref())))
        .map(|t| t.as_ref().to_string())
        .collect()
}
