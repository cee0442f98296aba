#![allow(dead_code)]

use std::path::PathBuf;

use vrtl_core::syntax::{lex, Tok};

pub fn corpus(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../corpus")
        .join(rel)
}

pub fn read(rel: &str) -> String {
    std::fs::read_to_string(corpus(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

pub fn fixture(rel: &str) -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(rel);
    std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn tokens(text: &str) -> Vec<Tok> {
    lex(text, true)
        .expect("lexable vunit")
        .into_iter()
        .map(|t| t.tok)
        .collect()
}

/// Compares two vunit texts token by token, ignoring layout and comments,
/// after renaming `got`'s property names to `want`'s in declaration order.
/// Returns the first difference.
pub fn template_diff(got: &str, want: &str) -> Option<String> {
    let (g, w) = (tokens(got), tokens(want));
    let decls = |ts: &[Tok]| -> Vec<String> {
        ts.windows(2)
            .filter_map(|p| match p {
                [Tok::Ident(k), Tok::Ident(n)] if k == "property" => Some(n.clone()),
                _ => None,
            })
            .collect()
    };
    let (gn, wn) = (decls(&g), decls(&w));
    if gn.len() != wn.len() {
        return Some(format!("{} properties, expected {}", gn.len(), wn.len()));
    }
    let g: Vec<Tok> = g
        .into_iter()
        .map(|t| match &t {
            Tok::Ident(s) => match gn.iter().position(|n| n == s) {
                Some(i) => Tok::Ident(wn[i].clone()),
                None => t,
            },
            _ => t,
        })
        .collect();
    if g.len() != w.len() {
        return Some(format!("{} tokens, expected {}", g.len(), w.len()));
    }
    g.iter()
        .zip(&w)
        .position(|(a, b)| a != b)
        .map(|i| format!("token {i}: got {}, expected {}", g[i], w[i]))
}

/// Whitespace-normalized text: runs of blanks collapse, blank lines drop.
pub fn normalize(text: &str) -> String {
    text.lines()
        .map(|l| l.split_whitespace().collect::<Vec<_>>().join(" "))
        .filter(|l| !l.is_empty())
        .collect::<Vec<_>>()
        .join("\n")
}
pub mod flow;
pub mod oracle;
