//! Pratt parser for scalar expressions.
//!
//! Grammar (EBNF):
//!
//! ```text
//! expr    = operand { infix operand } ;
//! infix   = "+" | "-" | "*" | "/" | "^" ;
//! operand = { "-" | "+" } primary ;
//! primary = number | "x" | "y" | "z" | "t" | "pi"
//!         | func "(" expr ")" | "(" expr ")" ;
//! func    = "sin" | "cos" | "tan" | "exp" | "log" | "sqrt" ;
//! number  = digits [ "." digits ] [ ("e" | "E") [ "+" | "-" ] digits ]
//!         | "." digits [ exponent ] ;
//! ```
//!
//! Binding strength, loosest first: `+ -`, `* /`, prefix `-`, `^`.
//! `^` is right-associative and binds tighter than prefix minus, so `-x^2`
//! is `-(x^2)` while `2^-x` is `2^(-x)`.

use thiserror::Error;

use super::{BinaryOp, Expr, UnaryOp, Var};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("syntax error at byte {offset}: {message}")]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Number(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn tokenize(src: &'a str) -> Result<Vec<(Token, usize)>, ParseError> {
        let mut lexer = Lexer { src, pos: 0 };
        let mut out = Vec::new();
        loop {
            let (tok, at) = lexer.next_token()?;
            let done = tok == Token::End;
            out.push((tok, at));
            if done {
                return Ok(out);
            }
        }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn next_token(&mut self) -> Result<(Token, usize), ParseError> {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
        let start = self.pos;
        let Some(c) = self.peek() else {
            return Ok((Token::End, start));
        };
        if c.is_ascii_digit() || c == '.' {
            return self.number(start);
        }
        if c.is_ascii_alphabetic() || c == '_' {
            while let Some(c) = self.peek() {
                if c.is_ascii_alphanumeric() || c == '_' {
                    self.pos += 1;
                } else {
                    break;
                }
            }
            return Ok((Token::Ident(self.src[start..self.pos].to_string()), start));
        }
        self.pos += c.len_utf8();
        let tok = match c {
            '+' | '-' | '*' | '/' | '^' => Token::Op(c),
            '(' => Token::LParen,
            ')' => Token::RParen,
            other => {
                return Err(ParseError {
                    offset: start,
                    message: format!("unexpected character '{other}'"),
                })
            }
        };
        Ok((tok, start))
    }

    fn digits(&mut self) -> usize {
        let from = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
        }
        self.pos - from
    }

    fn number(&mut self, start: usize) -> Result<(Token, usize), ParseError> {
        let mut mantissa = self.digits();
        if self.peek() == Some('.') {
            self.pos += 1;
            mantissa += self.digits();
        }
        if mantissa == 0 {
            return Err(ParseError {
                offset: start,
                message: "malformed number".into(),
            });
        }
        if matches!(self.peek(), Some('e' | 'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.peek(), Some('+' | '-')) {
                self.pos += 1;
            }
            if self.digits() == 0 {
                return Err(ParseError {
                    offset: save,
                    message: "malformed exponent".into(),
                });
            }
        }
        let text = &self.src[start..self.pos];
        text.parse::<f64>()
            .map(|v| (Token::Number(v), start))
            .map_err(|_| ParseError {
                offset: start,
                message: format!("malformed number '{text}'"),
            })
    }
}

struct Parser {
    tokens: Vec<(Token, usize)>,
    index: usize,
}

const PREFIX_NEG_BP: u8 = 5;

fn infix_binding_power(op: char) -> Option<(u8, u8, BinaryOp)> {
    match op {
        '+' => Some((1, 2, BinaryOp::Add)),
        '-' => Some((1, 2, BinaryOp::Sub)),
        '*' => Some((3, 4, BinaryOp::Mul)),
        '/' => Some((3, 4, BinaryOp::Div)),
        // right-associative
        '^' => Some((8, 7, BinaryOp::Pow)),
        _ => None,
    }
}

impl Parser {
    fn peek(&self) -> &(Token, usize) {
        &self.tokens[self.index]
    }

    fn bump(&mut self) -> (Token, usize) {
        let t = self.tokens[self.index].clone();
        if self.index + 1 < self.tokens.len() {
            self.index += 1;
        }
        t
    }

    fn expr(&mut self, min_bp: u8) -> Result<Expr, ParseError> {
        let mut lhs = self.operand()?;
        loop {
            let (tok, _) = self.peek();
            let op = match tok {
                Token::Op(c) => *c,
                Token::End | Token::RParen => break,
                _ => {
                    let (tok, at) = self.peek().clone();
                    return Err(ParseError {
                        offset: at,
                        message: format!("expected an operator, found {}", describe(&tok)),
                    });
                }
            };
            let (l_bp, r_bp, bin) = infix_binding_power(op).expect("lexer only emits known ops");
            if l_bp < min_bp {
                break;
            }
            self.bump();
            let rhs = self.expr(r_bp)?;
            lhs = Expr::binary(bin, lhs, rhs);
        }
        Ok(lhs)
    }

    fn operand(&mut self) -> Result<Expr, ParseError> {
        let (tok, at) = self.bump();
        match tok {
            Token::Number(v) => Ok(Expr::constant(v)),
            Token::Op('-') => {
                let arg = self.expr(PREFIX_NEG_BP)?;
                Ok(Expr::unary(UnaryOp::Neg, arg))
            }
            Token::Op('+') => self.expr(PREFIX_NEG_BP),
            Token::LParen => {
                let inner = self.expr(0)?;
                self.expect_rparen(at)?;
                Ok(inner)
            }
            Token::Ident(name) => {
                if let Some(v) = Var::from_name(&name) {
                    return Ok(Expr::var(v));
                }
                if name == "pi" {
                    return Ok(Expr::constant(std::f64::consts::PI));
                }
                if let Some(op) = UnaryOp::from_function_name(&name) {
                    let (next, next_at) = self.bump();
                    if next != Token::LParen {
                        return Err(ParseError {
                            offset: next_at,
                            message: format!("expected '(' after function '{name}'"),
                        });
                    }
                    let arg = self.expr(0)?;
                    self.expect_rparen(next_at)?;
                    return Ok(Expr::unary(op, arg));
                }
                Err(ParseError {
                    offset: at,
                    message: format!("unknown identifier '{name}'"),
                })
            }
            other => Err(ParseError {
                offset: at,
                message: format!("expected an operand, found {}", describe(&other)),
            }),
        }
    }

    fn expect_rparen(&mut self, open_at: usize) -> Result<(), ParseError> {
        let (tok, at) = self.bump();
        match tok {
            Token::RParen => Ok(()),
            Token::End => Err(ParseError {
                offset: open_at,
                message: "unbalanced '('".into(),
            }),
            other => Err(ParseError {
                offset: at,
                message: format!("expected ')', found {}", describe(&other)),
            }),
        }
    }
}

fn describe(tok: &Token) -> String {
    match tok {
        Token::Number(v) => format!("number {v}"),
        Token::Ident(s) => format!("identifier '{s}'"),
        Token::Op(c) => format!("'{c}'"),
        Token::LParen => "'('".into(),
        Token::RParen => "')'".into(),
        Token::End => "end of input".into(),
    }
}

/// Parses an expression in `x, y, z, t`.
pub fn parse(text: &str) -> Result<Expr, ParseError> {
    let tokens = Lexer::tokenize(text)?;
    let mut parser = Parser { tokens, index: 0 };
    let e = parser.expr(0)?;
    let (tok, at) = parser.peek().clone();
    match tok {
        Token::End => Ok(e),
        Token::RParen => Err(ParseError {
            offset: at,
            message: "unbalanced ')'".into(),
        }),
        other => Err(ParseError {
            offset: at,
            message: format!("unexpected {}", describe(&other)),
        }),
    }
}

impl std::str::FromStr for Expr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}
