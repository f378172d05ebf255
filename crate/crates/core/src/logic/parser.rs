//! Reader for the logic program text format: clauses `head.` or
//! `head :- a1, ..., an.`, lists `[a,b|T]`, `%` line comments.

use rustc_hash::FxHashMap;

use super::error::LogicError;
use super::symbol::Symbol;
use super::term::{Atom, Clause, Term, Var};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Name(String),
    Var(String),
    Int(i64),
    Punct(&'static str),
    End,
}

#[derive(Clone, Debug)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn err(line: usize, col: usize, msg: impl Into<String>) -> LogicError {
    LogicError::Parse {
        line,
        col,
        msg: msg.into(),
    }
}

fn lex(text: &str) -> Result<Vec<Spanned>, LogicError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let advance = |i: &mut usize, line: &mut usize, col: &mut usize, c: char| {
        *i += 1;
        if c == '\n' {
            *line += 1;
            *col = 1;
        } else {
            *col += 1;
        }
    };
    while i < chars.len() {
        let c = chars[i];
        let (sl, sc) = (line, col);
        if c.is_whitespace() {
            advance(&mut i, &mut line, &mut col, c);
            continue;
        }
        if c == '%' {
            while i < chars.len() && chars[i] != '\n' {
                let ch = chars[i];
                advance(&mut i, &mut line, &mut col, ch);
            }
            continue;
        }
        let push = |out: &mut Vec<Spanned>, tok| {
            out.push(Spanned {
                tok,
                line: sl,
                col: sc,
            })
        };
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                let ch = chars[i];
                advance(&mut i, &mut line, &mut col, ch);
            }
            let word: String = chars[start..i].iter().collect();
            if c.is_ascii_lowercase() {
                push(&mut out, Tok::Name(word));
            } else {
                push(&mut out, Tok::Var(word));
            }
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                let ch = chars[i];
                advance(&mut i, &mut line, &mut col, ch);
            }
            let digits: String = chars[start..i].iter().collect();
            let v = digits
                .parse::<i64>()
                .map_err(|_| err(sl, sc, "integer literal out of range"))?;
            push(&mut out, Tok::Int(v));
            continue;
        }
        if c == '\'' {
            advance(&mut i, &mut line, &mut col, c);
            let mut name = String::new();
            loop {
                let Some(&d) = chars.get(i) else {
                    return Err(err(sl, sc, "unterminated quoted atom"));
                };
                advance(&mut i, &mut line, &mut col, d);
                match d {
                    '\'' => break,
                    '\\' => {
                        let Some(&e) = chars.get(i) else {
                            return Err(err(sl, sc, "unterminated quoted atom"));
                        };
                        advance(&mut i, &mut line, &mut col, e);
                        name.push(match e {
                            'n' => '\n',
                            't' => '\t',
                            other => other,
                        });
                    }
                    other => name.push(other),
                }
            }
            push(&mut out, Tok::Name(name));
            continue;
        }
        if c == ':' && chars.get(i + 1) == Some(&'-') {
            advance(&mut i, &mut line, &mut col, c);
            advance(&mut i, &mut line, &mut col, '-');
            push(&mut out, Tok::Punct(":-"));
            continue;
        }
        let p = match c {
            '(' => "(",
            ')' => ")",
            '[' => "[",
            ']' => "]",
            ',' => ",",
            '|' => "|",
            '.' => ".",
            '-' => "-",
            _ => return Err(err(sl, sc, format!("unexpected character '{c}'"))),
        };
        advance(&mut i, &mut line, &mut col, c);
        push(&mut out, Tok::Punct(p));
    }
    out.push(Spanned {
        tok: Tok::End,
        line,
        col,
    });
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    /// Named variables of the clause being read.
    scope: FxHashMap<String, Var>,
}

impl Parser {
    fn peek(&self) -> &Spanned {
        &self.toks[self.pos]
    }

    fn next(&mut self) -> Spanned {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, p: &'static str) -> Result<(), LogicError> {
        let t = self.next();
        if t.tok == Tok::Punct(p) {
            Ok(())
        } else {
            Err(err(
                t.line,
                t.col,
                format!("expected '{p}', found {}", describe(&t.tok)),
            ))
        }
    }

    fn variable(&mut self, name: &str) -> Term {
        if name == "_" {
            return Term::var();
        }
        if let Some(id) = name.strip_prefix("_G").and_then(|d| d.parse::<u64>().ok()) {
            return Term::Var(Var::reserve(id));
        }
        Term::Var(*self.scope.entry(name.to_owned()).or_insert_with(Var::fresh))
    }

    fn term(&mut self) -> Result<Term, LogicError> {
        let t = self.next();
        match t.tok {
            Tok::Var(name) => Ok(self.variable(&name)),
            Tok::Int(v) => Ok(Term::Int(v)),
            Tok::Punct("-") => match self.next() {
                Spanned {
                    tok: Tok::Int(v), ..
                } => Ok(Term::Int(-v)),
                s => Err(err(s.line, s.col, "expected integer after '-'")),
            },
            Tok::Name(name) => {
                let functor = Symbol::intern(&name);
                if self.peek().tok == Tok::Punct("(") {
                    self.next();
                    let args = self.arglist(")")?;
                    Ok(Term::compound(functor, args))
                } else {
                    Ok(Term::Sym(functor))
                }
            }
            Tok::Punct("[") => {
                if self.peek().tok == Tok::Punct("]") {
                    self.next();
                    return Ok(Term::nil());
                }
                let mut items = vec![self.term()?];
                loop {
                    let s = self.next();
                    match s.tok {
                        Tok::Punct(",") => items.push(self.term()?),
                        Tok::Punct("|") => {
                            let tail = self.term()?;
                            self.expect("]")?;
                            return Ok(Term::list_with_tail(items, tail));
                        }
                        Tok::Punct("]") => return Ok(Term::list(items)),
                        other => {
                            return Err(err(
                                s.line,
                                s.col,
                                format!("expected ',', '|' or ']', found {}", describe(&other)),
                            ))
                        }
                    }
                }
            }
            other => Err(err(
                t.line,
                t.col,
                format!("expected a term, found {}", describe(&other)),
            )),
        }
    }

    fn arglist(&mut self, close: &'static str) -> Result<Vec<Term>, LogicError> {
        let mut args = vec![self.term()?];
        loop {
            let s = self.next();
            match s.tok {
                Tok::Punct(",") => args.push(self.term()?),
                Tok::Punct(p) if p == close => return Ok(args),
                other => {
                    return Err(err(
                        s.line,
                        s.col,
                        format!("expected ',' or '{close}', found {}", describe(&other)),
                    ))
                }
            }
        }
    }

    fn atom(&mut self) -> Result<Atom, LogicError> {
        let (line, col) = (self.peek().line, self.peek().col);
        let t = self.term()?;
        match t {
            Term::Sym(_) | Term::Compound(..) if t.as_cons().is_none() && t != Term::nil() => {
                Ok(Atom::from_term(&t).unwrap())
            }
            other => Err(err(line, col, format!("'{other}' is not callable"))),
        }
    }

    fn clause(&mut self) -> Result<(Clause, usize), LogicError> {
        self.scope.clear();
        let line = self.peek().line;
        let head = self.atom()?;
        let mut body = Vec::new();
        let s = self.next();
        match s.tok {
            Tok::Punct(".") => {}
            Tok::Punct(":-") => {
                body.push(self.atom()?);
                loop {
                    let s = self.next();
                    match s.tok {
                        Tok::Punct(",") => body.push(self.atom()?),
                        Tok::Punct(".") => break,
                        other => {
                            return Err(err(
                                s.line,
                                s.col,
                                format!("expected ',' or '.', found {}", describe(&other)),
                            ))
                        }
                    }
                }
            }
            other => {
                return Err(err(
                    s.line,
                    s.col,
                    format!("expected ':-' or '.', found {}", describe(&other)),
                ))
            }
        }
        Ok((Clause { head, body }, line))
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Name(n) => format!("'{n}'"),
        Tok::Var(v) => format!("variable {v}"),
        Tok::Int(i) => format!("integer {i}"),
        Tok::Punct(p) => format!("'{p}'"),
        Tok::End => "end of input".to_owned(),
    }
}

/// Read every clause in `text`, paired with the line it starts on.
pub fn parse_clauses(text: &str) -> Result<Vec<(Clause, usize)>, LogicError> {
    let mut p = Parser {
        toks: lex(text)?,
        pos: 0,
        scope: FxHashMap::default(),
    };
    let mut out = Vec::new();
    while p.peek().tok != Tok::End {
        out.push(p.clause()?);
    }
    Ok(out)
}

/// Read a single term, e.g. a goal typed on the command line.
pub fn parse_term(text: &str) -> Result<Term, LogicError> {
    let mut p = Parser {
        toks: lex(text)?,
        pos: 0,
        scope: FxHashMap::default(),
    };
    let t = p.term()?;
    let s = p.next();
    if s.tok != Tok::End && s.tok != Tok::Punct(".") {
        return Err(err(
            s.line,
            s.col,
            format!("trailing input {}", describe(&s.tok)),
        ));
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_list_fact() {
        let cls = parse_clauses("head([H|_],H).").unwrap();
        assert_eq!(cls.len(), 1);
        let c = &cls[0].0;
        assert!(c.body.is_empty());
        assert!(c.head.args[0].as_cons().is_some());
        assert_eq!(c.head.args[0].as_cons().unwrap().0, &c.head.args[1]);
    }

    #[test]
    fn reads_rule_with_comments() {
        let cls = parse_clauses("% comment\nf(X) :- g(X), h(X). % trailing\n").unwrap();
        assert_eq!(cls[0].0.body.len(), 2);
        assert_eq!(cls[0].1, 2);
    }

    #[test]
    fn empty_text() {
        assert!(parse_clauses("").unwrap().is_empty());
        assert!(parse_clauses("  % only a comment").unwrap().is_empty());
    }

    #[test]
    fn error_positions() {
        match parse_clauses("p(a).\nq(b :- c.") {
            Err(LogicError::Parse { line, col, .. }) => assert_eq!((line, col), (2, 5)),
            other => panic!("{other:?}"),
        }
        assert!(parse_clauses("p(a)").is_err());
        assert!(parse_clauses("X :- p.").is_err());
        assert!(parse_clauses("'abc").is_err());
    }

    #[test]
    fn raw_variables_round_trip() {
        let t = parse_term("f(_G900000, [1,-2|_G900001])").unwrap();
        assert_eq!(parse_term(&t.to_string()).unwrap(), t);
        assert!(Var::fresh().0 > 900001);
    }

    #[test]
    fn quoted_atoms() {
        let t = parse_term("'$x'(2)").unwrap();
        assert_eq!(t.as_item(), Some(2));
        assert_eq!(parse_term("'a b'").unwrap(), Term::sym("a b"));
    }
}
