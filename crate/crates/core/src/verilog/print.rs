use std::fmt::Write as _;

use super::ast::*;
use crate::syntax::SExpr;

pub fn print(file: &SourceFile) -> String {
    let mut out = String::new();
    for (i, m) in file.modules.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        print_module(&mut out, m);
    }
    out
}

pub fn ident(name: &str) -> String {
    SExpr::Ident(name.to_string()).to_string()
}

fn range(r: Option<(u32, u32)>) -> String {
    r.map_or(String::new(), |(m, l)| format!(" [{m}:{l}]"))
}

fn decl_text(d: &Decl) -> String {
    let names: Vec<String> = d.names.iter().map(|n| ident(n)).collect();
    let mut s = format!(
        "{}{} {}",
        d.kind.keyword(),
        range(d.range),
        names.join(", ")
    );
    if let Some(e) = &d.init {
        write!(s, " = {e}").unwrap();
    }
    s
}

pub fn print_module(out: &mut String, m: &ModuleDecl) {
    write!(out, "module {}", ident(&m.name)).unwrap();
    if !m.ports.is_empty() {
        let ports: Vec<String> = m
            .ports
            .iter()
            .map(|p| match p {
                PortItem::Name(n) => ident(n),
                PortItem::Decl(d) => decl_text(d),
                PortItem::Elided => "...".into(),
            })
            .collect();
        write!(out, " ({})", ports.join(", ")).unwrap();
    }
    out.push_str(";\n");
    for item in &m.items {
        print_item(out, item);
    }
    out.push_str("endmodule\n");
}

fn print_item(out: &mut String, item: &Item) {
    match item {
        Item::Decl(d) => writeln!(out, "  {};", decl_text(d)).unwrap(),
        Item::Assign { lhs, rhs, .. } => writeln!(out, "  assign {} = {rhs};", ident(lhs)).unwrap(),
        Item::Always { sens, body, .. } => {
            match sens {
                Sensitivity::Star => out.push_str("  always @(*)\n"),
                Sensitivity::Edges(es) => {
                    let parts: Vec<String> = es
                        .iter()
                        .map(|(e, n)| {
                            let kw = match e {
                                Edge::Pos => "posedge",
                                Edge::Neg => "negedge",
                            };
                            format!("{kw} {}", ident(n))
                        })
                        .collect();
                    writeln!(out, "  always @({})", parts.join(" or ")).unwrap();
                }
            }
            print_stmt(out, body, 2);
        }
        Item::Instance(inst) => {
            writeln!(out, "  {} {} (", ident(&inst.module), ident(&inst.name)).unwrap();
            let conns: Vec<String> = inst
                .conns
                .iter()
                .map(|c| match c {
                    Conn::Named { port, expr } => match expr {
                        Some(e) => format!("    .{}({e})", ident(port)),
                        None => format!("    .{}()", ident(port)),
                    },
                    Conn::Elided => "    ...".into(),
                })
                .collect();
            out.push_str(&conns.join(",\n"));
            out.push_str("\n  );\n");
        }
        Item::Elided(_) => out.push_str("  ...\n"),
    }
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("  ");
    }
}

fn print_stmt(out: &mut String, s: &Stmt, depth: usize) {
    indent(out, depth);
    print_unindented(out, s, depth);
}

fn print_unindented(out: &mut String, s: &Stmt, depth: usize) {
    match s {
        Stmt::Empty => out.push_str(";\n"),
        Stmt::Block(body) => {
            out.push_str("begin\n");
            for b in body {
                print_stmt(out, b, depth + 1);
            }
            indent(out, depth);
            out.push_str("end\n");
        }
        Stmt::Assign {
            lhs, rhs, blocking, ..
        } => {
            let op = if *blocking { "=" } else { "<=" };
            writeln!(out, "{} {op} {rhs};", ident(lhs)).unwrap();
        }
        Stmt::If {
            cond,
            then,
            otherwise,
            ..
        } => {
            writeln!(out, "if ({cond})").unwrap();
            // a dangling else binds to the inner if, so nested ifs without
            // an else are wrapped in a block
            let then_needs_block = otherwise.is_some() && dangling(then);
            if then_needs_block {
                print_stmt(out, &Stmt::Block(vec![(**then).clone()]), depth + 1);
            } else {
                print_stmt(out, then, depth + 1);
            }
            if let Some(e) = otherwise {
                indent(out, depth);
                if matches!(**e, Stmt::If { .. }) {
                    out.push_str("else ");
                    print_unindented(out, e, depth);
                } else {
                    out.push_str("else\n");
                    print_stmt(out, e, depth + 1);
                }
            }
        }
        Stmt::Case {
            sel,
            items,
            default,
            ..
        } => {
            writeln!(out, "case ({sel})").unwrap();
            for it in items {
                indent(out, depth + 1);
                let labels: Vec<String> = it.labels.iter().map(|l| l.to_string()).collect();
                writeln!(out, "{}:", labels.join(", ")).unwrap();
                print_stmt(out, &it.body, depth + 2);
            }
            indent(out, depth + 1);
            out.push_str("default:\n");
            print_stmt(out, default, depth + 2);
            indent(out, depth);
            out.push_str("endcase\n");
        }
    }
}

fn dangling(s: &Stmt) -> bool {
    match s {
        Stmt::If {
            otherwise: None, ..
        } => true,
        Stmt::If {
            otherwise: Some(e), ..
        } => dangling(e),
        _ => false,
    }
}
