//! Recursive-descent parser for the expression grammar.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' unary)?          -- right-associative
//! atom   := number | func '(' expr ')' | var | '(' expr ')'
//! func   := 'sin' | 'cos' | 'exp' | 'log' | 'sqrt' | 'atan'
//! var    := 'x1' | 'x2' | 'x3' | 'x4'
//! ```
//!
//! Error positions are 1-based byte offsets into the source.

use thiserror::Error;

use super::{Expression, Func};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at position {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("unknown identifier `{name}` at position {position}")]
    UnknownIdentifier { position: usize, name: String },
}

impl ParseError {
    pub fn position(&self) -> usize {
        match self {
            ParseError::Syntax { position, .. } => *position,
            ParseError::UnknownIdentifier { position, .. } => *position,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(_) => "number".to_string(),
            Tok::Ident(s) => format!("identifier `{}`", s),
            Tok::Plus => "`+`".to_string(),
            Tok::Minus => "`-`".to_string(),
            Tok::Star => "`*`".to_string(),
            Tok::Slash => "`/`".to_string(),
            Tok::Caret => "`^`".to_string(),
            Tok::LParen => "`(`".to_string(),
            Tok::RParen => "`)`".to_string(),
            Tok::Eof => "end of input".to_string(),
        }
    }
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize, // 0-based byte index
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src: src.as_bytes(),
            pos: 0,
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    /// Next token plus its 1-based start position.
    fn next(&mut self) -> Result<(Tok, usize), ParseError> {
        self.skip_ws();
        let start = self.pos + 1;
        if self.pos >= self.src.len() {
            return Ok((Tok::Eof, start));
        }
        let c = self.src[self.pos];
        let simple = match c {
            b'+' => Some(Tok::Plus),
            b'-' => Some(Tok::Minus),
            b'*' => Some(Tok::Star),
            b'/' => Some(Tok::Slash),
            b'^' => Some(Tok::Caret),
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            _ => None,
        };
        if let Some(t) = simple {
            self.pos += 1;
            return Ok((t, start));
        }
        if c.is_ascii_digit() || c == b'.' {
            return self.lex_number(start);
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            let begin = self.pos;
            while self.pos < self.src.len()
                && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
            {
                self.pos += 1;
            }
            let name = std::str::from_utf8(&self.src[begin..self.pos])
                .expect("identifier bytes are ASCII")
                .to_string();
            return Ok((Tok::Ident(name), start));
        }
        Err(ParseError::Syntax {
            position: start,
            message: format!("unexpected character `{}`", c as char),
        })
    }

    fn lex_number(&mut self, start: usize) -> Result<(Tok, usize), ParseError> {
        let begin = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos < self.src.len() && self.src[self.pos] == b'.' {
            self.pos += 1;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
        }
        if self.pos < self.src.len() && (self.src[self.pos] | 0x20) == b'e' {
            let mark = self.pos;
            self.pos += 1;
            if self.pos < self.src.len()
                && (self.src[self.pos] == b'+' || self.src[self.pos] == b'-')
            {
                self.pos += 1;
            }
            if self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            } else {
                // not an exponent after all ("2e" could start an identifier elsewhere)
                self.pos = mark;
            }
        }
        let text = std::str::from_utf8(&self.src[begin..self.pos]).expect("number bytes are ASCII");
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok((Tok::Num(v), start)),
            _ => Err(ParseError::Syntax {
                position: start,
                message: format!("invalid number literal `{}`", text),
            }),
        }
    }
}

struct Parser {
    tokens: Vec<(Tok, usize)>,
    index: usize,
}

impl Parser {
    fn peek(&self) -> &(Tok, usize) {
        &self.tokens[self.index]
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.tokens[self.index].clone();
        if self.index + 1 < self.tokens.len() {
            self.index += 1;
        }
        t
    }

    fn expect(&mut self, want: &Tok, context: &str) -> Result<(), ParseError> {
        let (tok, pos) = self.peek().clone();
        if &tok == want {
            self.bump();
            Ok(())
        } else {
            Err(ParseError::Syntax {
                position: pos,
                message: format!(
                    "expected {} {}, found {}",
                    want.describe(),
                    context,
                    tok.describe()
                ),
            })
        }
    }

    fn expr(&mut self) -> Result<Expression, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek().0 {
                Tok::Plus => {
                    self.bump();
                    let rhs = self.term()?;
                    lhs = Expression(std::sync::Arc::new(super::Node::Add(lhs, rhs)));
                }
                Tok::Minus => {
                    self.bump();
                    let rhs = self.term()?;
                    lhs = Expression(std::sync::Arc::new(super::Node::Sub(lhs, rhs)));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expression, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek().0 {
                Tok::Star => {
                    self.bump();
                    let rhs = self.unary()?;
                    lhs = Expression(std::sync::Arc::new(super::Node::Mul(lhs, rhs)));
                }
                Tok::Slash => {
                    self.bump();
                    let rhs = self.unary()?;
                    lhs = Expression(std::sync::Arc::new(super::Node::Div(lhs, rhs)));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expression, ParseError> {
        if self.peek().0 == Tok::Minus {
            self.bump();
            let inner = self.unary()?;
            return Ok(Expression(std::sync::Arc::new(super::Node::Neg(inner))));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expression, ParseError> {
        let base = self.atom()?;
        if self.peek().0 == Tok::Caret {
            self.bump();
            // exponent may carry a unary minus: x^-2
            let exponent = self.unary()?;
            return Ok(Expression(std::sync::Arc::new(super::Node::Pow(
                base, exponent,
            ))));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expression, ParseError> {
        let (tok, pos) = self.bump();
        match tok {
            Tok::Num(v) => Ok(Expression::constant(v)),
            Tok::LParen => {
                let inner = self.expr()?;
                self.expect(&Tok::RParen, "to close group")?;
                Ok(inner)
            }
            Tok::Ident(name) => self.ident(name, pos),
            other => Err(ParseError::Syntax {
                position: pos,
                message: format!("expected expression, found {}", other.describe()),
            }),
        }
    }

    fn ident(&mut self, name: String, pos: usize) -> Result<Expression, ParseError> {
        if let Some(rest) = name.strip_prefix('x') {
            if let Ok(i) = rest.parse::<usize>() {
                if (1..=4).contains(&i) {
                    return Ok(Expression::var(i - 1));
                }
            }
        }
        let func = match name.as_str() {
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "exp" => Some(Func::Exp),
            "log" => Some(Func::Log),
            "sqrt" => Some(Func::Sqrt),
            "atan" => Some(Func::Atan),
            _ => None,
        };
        match func {
            Some(f) => {
                self.expect(&Tok::LParen, "after function name")?;
                let arg = self.expr()?;
                self.expect(&Tok::RParen, "to close function argument")?;
                Ok(Expression::call(f, arg))
            }
            None => Err(ParseError::UnknownIdentifier {
                position: pos,
                name,
            }),
        }
    }
}

/// Parses a source string into an [`Expression`].
pub fn parse(source: &str) -> Result<Expression, ParseError> {
    let mut lexer = Lexer::new(source);
    let mut tokens = Vec::new();
    loop {
        let (tok, pos) = lexer.next()?;
        let eof = tok == Tok::Eof;
        tokens.push((tok, pos));
        if eof {
            break;
        }
    }
    let mut parser = Parser { tokens, index: 0 };
    let e = parser.expr()?;
    let (trailing, pos) = parser.peek().clone();
    if trailing != Tok::Eof {
        return Err(ParseError::Syntax {
            position: pos,
            message: format!("expected end of input, found {}", trailing.describe()),
        });
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unbalanced_paren_position() {
        let err = parse("sin(").unwrap_err();
        assert_eq!(err.position(), 5);
    }

    #[test]
    fn unknown_identifier() {
        let err = parse("x1 + foo(x2)").unwrap_err();
        match err {
            ParseError::UnknownIdentifier { position, name } => {
                assert_eq!(position, 6);
                assert_eq!(name, "foo");
            }
            other => panic!("expected UnknownIdentifier, got {other:?}"),
        }
    }

    #[test]
    fn function_requires_parentheses() {
        let err = parse("sin x1").unwrap_err();
        assert_eq!(err.position(), 5);
    }

    #[test]
    fn variable_out_of_range_is_unknown() {
        assert!(matches!(
            parse("x5"),
            Err(ParseError::UnknownIdentifier { .. })
        ));
    }

    #[test]
    fn trailing_garbage() {
        let err = parse("x1 )").unwrap_err();
        assert_eq!(err.position(), 4);
    }

    #[test]
    fn number_formats() {
        for (src, want) in [
            ("2", 2.0),
            ("2.5", 2.5),
            ("0.125", 0.125),
            ("1e3", 1000.0),
            ("2.5e-2", 0.025),
            (".5", 0.5),
        ] {
            let v = parse(src).unwrap().eval(&[0.0; 4]).unwrap();
            assert_eq!(v, want, "{src}");
        }
    }
}
