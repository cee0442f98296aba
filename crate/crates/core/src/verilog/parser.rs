use super::ast::*;
use crate::syntax::{lex, Parser, SyntaxError, Tok};

/// Keywords outside the accepted subset; each is rejected by name.
const UNSUPPORTED: &[&str] = &[
    "initial",
    "generate",
    "endgenerate",
    "genvar",
    "parameter",
    "localparam",
    "defparam",
    "function",
    "task",
    "integer",
    "real",
    "time",
    "forever",
    "repeat",
    "while",
    "for",
    "fork",
    "casez",
    "casex",
    "tri",
    "inout",
    "supply0",
    "supply1",
    "specify",
    "primitive",
    "signed",
];

fn unsupported(p: &Parser, what: &str) -> SyntaxError {
    SyntaxError::new(
        p.here(),
        "unsupported-construct",
        format!("`{what}` is outside the supported Verilog subset"),
    )
}

fn check_keyword(p: &Parser) -> Result<(), SyntaxError> {
    if let Tok::Ident(s) = p.peek() {
        if UNSUPPORTED.contains(&s.as_str()) {
            return Err(unsupported(p, s));
        }
    }
    if p.at_punct("#") {
        return Err(SyntaxError::new(
            p.here(),
            "unsupported-construct",
            "delays and parameter overrides (`#`) are not supported",
        ));
    }
    Ok(())
}

pub fn parse(text: &str) -> Result<SourceFile, SyntaxError> {
    let mut p = Parser::new(lex(text, false)?, false);
    let mut file = SourceFile::default();
    while *p.peek() != Tok::Eof {
        check_keyword(&p)?;
        if !p.at_keyword("module") {
            return Err(p.unexpected("`module`"));
        }
        file.modules.push(module(&mut p)?);
    }
    Ok(file)
}

fn loc(p: &Parser) -> Loc {
    Loc(p.here())
}

fn module(p: &mut Parser) -> Result<ModuleDecl, SyntaxError> {
    let at = loc(p);
    p.expect_keyword("module")?;
    let name = p.expect_ident()?;
    check_keyword(p)?;
    let mut ports = Vec::new();
    if p.eat_punct("(") {
        if !p.at_punct(")") {
            loop {
                ports.push(port_item(p, ports.last())?);
                if !p.eat_punct(",") {
                    break;
                }
            }
        }
        p.expect_punct(")")?;
    }
    p.expect_punct(";")?;
    let mut items = Vec::new();
    while !p.eat_keyword("endmodule") {
        if *p.peek() == Tok::Eof {
            return Err(p.unexpected("`endmodule`"));
        }
        items.push(item(p)?);
    }
    Ok(ModuleDecl {
        name,
        ports,
        items,
        loc: at,
    })
}

fn port_item(p: &mut Parser, prev: Option<&PortItem>) -> Result<PortItem, SyntaxError> {
    if p.eat_punct("...") {
        return Ok(PortItem::Elided);
    }
    check_keyword(p)?;
    if p.at_keyword("input") || p.at_keyword("output") {
        let at = loc(p);
        let (kind, range) = decl_head(p)?;
        let name = p.expect_ident()?;
        return Ok(PortItem::Decl(Decl {
            kind,
            range,
            names: vec![name],
            init: None,
            loc: at,
        }));
    }
    let name = p.expect_ident()?;
    // an ANSI list continues the previous direction for bare names
    if let Some(PortItem::Decl(d)) = prev {
        return Ok(PortItem::Decl(Decl {
            kind: d.kind,
            range: d.range,
            names: vec![name],
            init: None,
            loc: loc(p),
        }));
    }
    Ok(PortItem::Name(name))
}

fn range(p: &mut Parser) -> Result<Option<(u32, u32)>, SyntaxError> {
    if !p.eat_punct("[") {
        return Ok(None);
    }
    let m = p.expect_uint()?;
    p.expect_punct(":")?;
    let l = p.expect_uint()?;
    p.expect_punct("]")?;
    if l != 0 {
        return Err(SyntaxError::new(
            p.here(),
            "unsupported-construct",
            format!("only [msb:0] ranges are supported, found [{m}:{l}]"),
        ));
    }
    if m + 1 > crate::ir::MAX_WIDTH {
        return Err(SyntaxError::new(
            p.here(),
            "unsupported-construct",
            format!("vector wider than {} bits", crate::ir::MAX_WIDTH),
        ));
    }
    Ok(Some((m, l)))
}

fn decl_head(p: &mut Parser) -> Result<(DeclKind, Option<(u32, u32)>), SyntaxError> {
    let kind = match p.expect_ident()?.as_str() {
        "input" => {
            p.eat_keyword("wire");
            DeclKind::Input
        }
        "output" => {
            if p.eat_keyword("reg") {
                DeclKind::OutputReg
            } else {
                p.eat_keyword("wire");
                DeclKind::Output
            }
        }
        "wire" => DeclKind::Wire,
        "reg" => DeclKind::Reg,
        other => unreachable!("decl_head on `{other}`"),
    };
    check_keyword(p)?;
    Ok((kind, range(p)?))
}

fn item(p: &mut Parser) -> Result<Item, SyntaxError> {
    check_keyword(p)?;
    let at = loc(p);
    if p.eat_punct("...") {
        return Ok(Item::Elided(at));
    }
    let Tok::Ident(word) = p.peek().clone() else {
        return Err(p.unexpected("module item"));
    };
    match word.as_str() {
        "input" | "output" | "wire" | "reg" => {
            let (kind, range) = decl_head(p)?;
            let mut names = vec![p.expect_ident()?];
            let mut init = None;
            if p.eat_punct("=") {
                if kind != DeclKind::Wire {
                    return Err(SyntaxError::new(
                        p.here(),
                        "unsupported-construct",
                        "declaration initializers are only allowed on wires",
                    ));
                }
                init = Some(p.expr()?);
            } else {
                while p.eat_punct(",") {
                    names.push(p.expect_ident()?);
                }
            }
            p.expect_punct(";")?;
            Ok(Item::Decl(Decl {
                kind,
                range,
                names,
                init,
                loc: at,
            }))
        }
        "assign" => {
            p.bump();
            check_keyword(p)?;
            let lhs = lvalue(p)?;
            p.expect_punct("=")?;
            let rhs = p.expr()?;
            p.expect_punct(";")?;
            Ok(Item::Assign { lhs, rhs, loc: at })
        }
        "always" => {
            p.bump();
            p.expect_punct("@")?;
            let sens = if p.eat_punct("*") {
                Sensitivity::Star
            } else {
                p.expect_punct("(")?;
                let s = if p.eat_punct("*") {
                    Sensitivity::Star
                } else {
                    let mut edges = Vec::new();
                    loop {
                        let edge = if p.eat_keyword("posedge") {
                            Edge::Pos
                        } else if p.eat_keyword("negedge") {
                            Edge::Neg
                        } else {
                            return Err(SyntaxError::new(
                                p.here(),
                                "unsupported-construct",
                                "only `*` or edge-triggered sensitivity lists are supported",
                            ));
                        };
                        edges.push((edge, p.expect_ident()?));
                        if !(p.eat_keyword("or") || p.eat_punct(",")) {
                            break;
                        }
                    }
                    Sensitivity::Edges(edges)
                };
                p.expect_punct(")")?;
                s
            };
            let body = stmt(p)?;
            Ok(Item::Always {
                sens,
                body,
                loc: at,
            })
        }
        _ => {
            let module = p.expect_ident()?;
            check_keyword(p)?;
            let name = p.expect_ident()?;
            p.expect_punct("(")?;
            let mut conns = Vec::new();
            while !p.at_punct(")") {
                if p.eat_punct("...") {
                    conns.push(Conn::Elided);
                    p.eat_punct(",");
                    continue;
                } else if p.eat_punct(".") {
                    let port = p.expect_ident()?;
                    p.expect_punct("(")?;
                    let expr = if p.at_punct(")") {
                        None
                    } else {
                        Some(p.expr()?)
                    };
                    p.expect_punct(")")?;
                    conns.push(Conn::Named { port, expr });
                } else {
                    return Err(SyntaxError::new(
                        p.here(),
                        "unsupported-construct",
                        "only named port connections are supported",
                    ));
                }
                if !p.eat_punct(",") {
                    break;
                }
            }
            p.expect_punct(")")?;
            p.expect_punct(";")?;
            Ok(Item::Instance(Instance {
                module,
                name,
                conns,
                loc: at,
            }))
        }
    }
}

fn lvalue(p: &mut Parser) -> Result<String, SyntaxError> {
    let name = p.expect_ident()?;
    if p.at_punct("[") || p.at_punct("{") {
        return Err(SyntaxError::new(
            p.here(),
            "unsupported-construct",
            "assignments must target whole signals",
        ));
    }
    Ok(name)
}

fn stmt(p: &mut Parser) -> Result<Stmt, SyntaxError> {
    check_keyword(p)?;
    let at = loc(p);
    if p.eat_punct(";") {
        return Ok(Stmt::Empty);
    }
    if p.eat_keyword("begin") {
        if p.eat_punct(":") {
            p.expect_ident()?;
        }
        let mut body = Vec::new();
        while !p.eat_keyword("end") {
            if *p.peek() == Tok::Eof {
                return Err(p.unexpected("`end`"));
            }
            body.push(stmt(p)?);
        }
        return Ok(Stmt::Block(body));
    }
    if p.eat_keyword("if") {
        p.expect_punct("(")?;
        let cond = p.expr()?;
        p.expect_punct(")")?;
        let then = Box::new(stmt(p)?);
        let otherwise = if p.eat_keyword("else") {
            Some(Box::new(stmt(p)?))
        } else {
            None
        };
        return Ok(Stmt::If {
            cond,
            then,
            otherwise,
            loc: at,
        });
    }
    if p.eat_keyword("case") {
        p.expect_punct("(")?;
        let sel = p.expr()?;
        p.expect_punct(")")?;
        let mut items = Vec::new();
        let mut default = None;
        while !p.eat_keyword("endcase") {
            if *p.peek() == Tok::Eof {
                return Err(p.unexpected("`endcase`"));
            }
            if p.eat_keyword("default") {
                p.eat_punct(":");
                if default.is_some() {
                    return Err(SyntaxError::syntax(p.here(), "duplicate `default` arm"));
                }
                default = Some(Box::new(stmt(p)?));
                continue;
            }
            let mut labels = vec![p.expr()?];
            while p.eat_punct(",") {
                labels.push(p.expr()?);
            }
            p.expect_punct(":")?;
            items.push(CaseItem {
                labels,
                body: stmt(p)?,
            });
        }
        let default = default.ok_or_else(|| {
            SyntaxError::new(
                at.0,
                "missing-default",
                "case statement requires a `default` arm",
            )
        })?;
        return Ok(Stmt::Case {
            sel,
            items,
            default,
            loc: at,
        });
    }
    let lhs = lvalue(p)?;
    let blocking = if p.eat_punct("<=") {
        false
    } else if p.eat_punct("=") {
        true
    } else {
        return Err(p.unexpected("`=` or `<=`"));
    };
    if p.at_punct("#") {
        check_keyword(p)?;
    }
    let rhs = p.expr()?;
    p.expect_punct(";")?;
    Ok(Stmt::Assign {
        lhs,
        rhs,
        blocking,
        loc: at,
    })
}
