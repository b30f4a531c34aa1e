// Copyright 2026 The hilbert-mfg Authors
// SPDX-License-Identifier: Apache-2.0

//! Tiny arithmetic interpreter: `+ - * / ^`, parentheses, unary minus,
//! `exp(..)`, `sqrt(..)` and named variables. Used to re-evaluate closed
//! forms from their written text, independently of the library code.

use std::collections::HashMap;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

fn lex(src: &str) -> Vec<Tok> {
    let mut out = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            out.push(Tok::Num(chars[start..i].iter().collect::<String>().parse().unwrap()));
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Tok::Ident(chars[start..i].iter().collect()));
        } else if c == '(' {
            out.push(Tok::LParen);
            i += 1;
        } else if c == ')' {
            out.push(Tok::RParen);
            i += 1;
        } else {
            assert!("+-*/^".contains(c), "unexpected character {c:?}");
            out.push(Tok::Op(c));
            i += 1;
        }
    }
    out
}

struct Parser<'a> {
    toks: Vec<Tok>,
    pos: usize,
    vars: &'a HashMap<&'a str, f64>,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Tok {
        self.pos += 1;
        self.toks[self.pos - 1].clone()
    }

    fn binding(op: char) -> (u8, u8) {
        match op {
            '+' | '-' => (1, 2),
            '*' | '/' => (3, 4),
            '^' => (6, 5),
            _ => unreachable!(),
        }
    }

    fn expr(&mut self, min_bp: u8) -> f64 {
        let mut lhs = match self.next() {
            Tok::Num(x) => x,
            Tok::Op('-') => -self.expr(5),
            Tok::LParen => {
                let v = self.expr(0);
                assert_eq!(self.next(), Tok::RParen);
                v
            }
            Tok::Ident(name) => {
                if self.peek() == Some(&Tok::LParen) {
                    self.next();
                    let arg = self.expr(0);
                    assert_eq!(self.next(), Tok::RParen);
                    match name.as_str() {
                        "exp" => arg.exp(),
                        "sqrt" => arg.sqrt(),
                        other => panic!("unknown function {other}"),
                    }
                } else {
                    *self.vars.get(name.as_str()).unwrap_or_else(|| panic!("unbound {name}"))
                }
            }
            t => panic!("unexpected token {t:?}"),
        };
        while let Some(Tok::Op(op)) = self.peek().cloned() {
            let (l, r) = Self::binding(op);
            if l < min_bp {
                break;
            }
            self.next();
            let rhs = self.expr(r);
            lhs = match op {
                '+' => lhs + rhs,
                '-' => lhs - rhs,
                '*' => lhs * rhs,
                '/' => lhs / rhs,
                '^' => lhs.powf(rhs),
                _ => unreachable!(),
            };
        }
        lhs
    }
}

pub fn eval(src: &str, vars: &HashMap<&str, f64>) -> f64 {
    let mut p = Parser {
        toks: lex(src),
        pos: 0,
        vars,
    };
    let v = p.expr(0);
    assert_eq!(p.pos, p.toks.len(), "trailing tokens in {src}");
    v
}

#[allow(dead_code)]
pub fn self_check() {
    let vars = HashMap::from([("x", 2.0), ("y", 3.0)]);
    assert_eq!(eval("1 + 2 * 3", &vars), 7.0);
    assert_eq!(eval("2 ^ 3 ^ 2", &vars), 512.0);
    assert_eq!(eval("-x ^ 2", &vars), -4.0);
    assert_eq!(eval("(x + y) * exp(0) / 5", &vars), 1.0);
    assert_eq!(eval("sqrt(y * y) - x", &vars), 1.0);
}
