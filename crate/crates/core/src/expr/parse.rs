//! Recursive-descent parser for the expression language.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := ('-' | '+') factor | power
//! power  := atom ('^' factor)?
//! atom   := number | ident | func '(' expr ')' | '(' expr ')'
//! ```
//!
//! A `-` written directly in front of a number literal that is not raised to
//! a power is read as a negative constant.

use super::{Expr, Var};
use thiserror::Error;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum ParseError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unknown identifier `{name}` at line {line}, column {column}")]
    UnknownIdentifier {
        name: String,
        line: usize,
        column: usize,
    },
}

impl ParseError {
    pub fn position(&self) -> (usize, usize) {
        match self {
            ParseError::Syntax { line, column, .. }
            | ParseError::UnknownIdentifier { line, column, .. } => (*line, *column),
        }
    }
}

/// Which identifiers an expression may use.
#[derive(Clone, Copy, Debug)]
pub struct ParseContext {
    /// Number of momentum coordinates; `p1..p{dim}` are accepted.
    pub dim: usize,
    pub allow_x: bool,
    pub allow_theta: bool,
}

impl ParseContext {
    pub fn momentum(dim: usize) -> Self {
        ParseContext {
            dim,
            allow_x: false,
            allow_theta: false,
        }
    }

    pub fn with_theta(mut self) -> Self {
        self.allow_theta = true;
        self
    }

    pub fn with_x(mut self) -> Self {
        self.allow_x = true;
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    End,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut line, mut column) = (1usize, 1usize);
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, column);
        if c == '\n' {
            line += 1;
            column = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            column += 1;
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()))
        {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let text: String = chars[start..i].iter().collect();
            let value: f64 = text.parse().map_err(|_| ParseError::Syntax {
                line: tl,
                column: tc,
                message: format!("malformed number `{text}`"),
            })?;
            column += i - start;
            out.push(Token {
                tok: Tok::Num(value),
                line: tl,
                column: tc,
            });
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            column += i - start;
            out.push(Token {
                tok: Tok::Ident(chars[start..i].iter().collect()),
                line: tl,
                column: tc,
            });
            continue;
        }
        if "+-*/^()".contains(c) {
            out.push(Token {
                tok: Tok::Op(c),
                line: tl,
                column: tc,
            });
            i += 1;
            column += 1;
            continue;
        }
        return Err(ParseError::Syntax {
            line: tl,
            column: tc,
            message: format!("unexpected character `{c}`"),
        });
    }
    out.push(Token {
        tok: Tok::End,
        line,
        column,
    });
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<Token>,
    pos: usize,
    ctx: &'a ParseContext,
}

impl Parser<'_> {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn peek_at(&self, offset: usize) -> &Tok {
        let at = (self.pos + offset).min(self.toks.len() - 1);
        &self.toks[at].tok
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, message: impl Into<String>) -> ParseError {
        let t = self.peek();
        ParseError::Syntax {
            line: t.line,
            column: t.column,
            message: message.into(),
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ParseError> {
        if self.peek().tok == Tok::Op(c) {
            self.bump();
            Ok(())
        } else {
            Err(self.error(format!("expected `{c}`")))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek().tok {
                Tok::Op('+') => {
                    self.bump();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Tok::Op('-') => {
                    self.bump();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek().tok {
                Tok::Op('*') => {
                    self.bump();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
                }
                Tok::Op('/') => {
                    self.bump();
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.factor()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        match self.peek().tok {
            Tok::Op('-') => {
                self.bump();
                if let Tok::Num(v) = *self.peek_at(0) {
                    if *self.peek_at(1) != Tok::Op('^') {
                        self.bump();
                        return Ok(Expr::Const(-v));
                    }
                }
                Ok(Expr::Neg(Box::new(self.factor()?)))
            }
            Tok::Op('+') => {
                self.bump();
                self.factor()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.peek().tok == Tok::Op('^') {
            self.bump();
            let exponent = self.factor()?;
            Ok(Expr::Pow(Box::new(base), Box::new(exponent)))
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let t = self.peek().clone();
        match t.tok {
            Tok::Num(v) => {
                self.bump();
                Ok(Expr::Const(v))
            }
            Tok::Op('(') => {
                self.bump();
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.bump();
                if self.peek().tok == Tok::Op('(') {
                    let wrap: fn(Box<Expr>) -> Expr = match name.as_str() {
                        "sqrt" => Expr::Sqrt,
                        "exp" => Expr::Exp,
                        "log" | "ln" => Expr::Log,
                        "sin" => Expr::Sin,
                        "cos" => Expr::Cos,
                        _ => {
                            return Err(ParseError::UnknownIdentifier {
                                name,
                                line: t.line,
                                column: t.column,
                            })
                        }
                    };
                    self.bump();
                    let arg = self.expr()?;
                    self.expect(')')?;
                    return Ok(wrap(Box::new(arg)));
                }
                self.resolve(&name, t.line, t.column)
            }
            Tok::End => Err(self.error("unexpected end of input")),
            Tok::Op(c) => Err(self.error(format!("unexpected `{c}`"))),
        }
    }

    fn resolve(&self, name: &str, line: usize, column: usize) -> Result<Expr, ParseError> {
        let unknown = || ParseError::UnknownIdentifier {
            name: name.to_string(),
            line,
            column,
        };
        match name {
            "pi" => Ok(Expr::Const(std::f64::consts::PI)),
            "x" if self.ctx.allow_x => Ok(Expr::Var(Var::X)),
            "theta" if self.ctx.allow_theta => Ok(Expr::Var(Var::Theta)),
            "p" if self.ctx.dim == 1 => Ok(Expr::Var(Var::P(0))),
            _ => {
                let idx: usize = name
                    .strip_prefix('p')
                    .filter(|d| !d.is_empty() && !d.starts_with('0'))
                    .and_then(|d| d.parse().ok())
                    .ok_or_else(unknown)?;
                if idx >= 1 && idx <= self.ctx.dim {
                    Ok(Expr::Var(Var::P(idx - 1)))
                } else {
                    Err(unknown())
                }
            }
        }
    }
}

/// Parse `src` into an expression tree, accepting the identifiers `ctx` allows.
pub fn parse_expr(src: &str, ctx: &ParseContext) -> Result<Expr, ParseError> {
    let toks = tokenize(src)?;
    let mut parser = Parser { toks, pos: 0, ctx };
    let e = parser.expr()?;
    if parser.peek().tok != Tok::End {
        return Err(parser.error("unexpected trailing input"));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn test_error_positions() {
        let ctx = ParseContext::momentum(2);
        let err = parse_expr("p1 +\n  * p2", &ctx).unwrap_err();
        assert_eq!(err.position(), (2, 3));
        let err = parse_expr("p1 + q7", &ctx).unwrap_err();
        assert!(
            matches!(err, ParseError::UnknownIdentifier { ref name, line: 1, column: 6 } if name == "q7")
        );
        let err = parse_expr("p3", &ctx).unwrap_err();
        assert!(matches!(err, ParseError::UnknownIdentifier { .. }));
        let err = parse_expr("tan(p1)", &ctx).unwrap_err();
        assert!(matches!(err, ParseError::UnknownIdentifier { ref name, .. } if name == "tan"));
        assert!(parse_expr("(p1", &ctx).is_err());
        assert!(parse_expr("p1 p2", &ctx).is_err());
        assert!(parse_expr("theta", &ctx).is_err());
        assert!(parse_expr("x", &ctx).is_err());
    }

    #[test]
    fn test_numbers() {
        let ctx = ParseContext::momentum(1);
        for (src, v) in [
            ("1.5e-3", 1.5e-3),
            (".25", 0.25),
            ("2E2", 200.0),
            ("-3", -3.0),
        ] {
            assert_eq!(parse_expr(src, &ctx).unwrap(), Expr::Const(v));
        }
        assert_eq!(parse_expr("p", &ctx).unwrap(), Expr::Var(Var::P(0)));
    }
}
