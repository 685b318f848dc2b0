use super::{AttributeSchema, Filter, Query, QueryError, StatFunction};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(f64),
    Gt,
    Eq,
    LParen,
    RParen,
    EmptySet,
    End,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    /// Character offset of the token start.
    pos: usize,
}

fn syntax(position: usize, message: impl Into<String>) -> QueryError {
    QueryError::Syntax {
        position,
        message: message.into(),
    }
}

fn lex(text: &str) -> Result<Vec<Token>, QueryError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let start = i;
        let tok = match c {
            c if c.is_whitespace() => {
                i += 1;
                continue;
            }
            '>' => {
                i += 1;
                Tok::Gt
            }
            '=' => {
                i += 1;
                Tok::Eq
            }
            '(' => {
                i += 1;
                Tok::LParen
            }
            ')' => {
                i += 1;
                Tok::RParen
            }
            '∅' => {
                i += 1;
                Tok::EmptySet
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                Tok::Ident(chars[start..i].iter().collect())
            }
            c if c.is_ascii_digit() || c == '-' || c == '+' || c == '.' => {
                i += 1;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    let mut j = i + 1;
                    if j < chars.len() && (chars[j] == '-' || chars[j] == '+') {
                        j += 1;
                    }
                    if j < chars.len() && chars[j].is_ascii_digit() {
                        i = j;
                        while i < chars.len() && chars[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let s: String = chars[start..i].iter().collect();
                match s.parse::<f64>() {
                    Ok(v) if v.is_finite() => Tok::Number(v),
                    _ => return Err(syntax(start, format!("invalid number `{s}`"))),
                }
            }
            other => return Err(syntax(start, format!("unexpected character `{other}`"))),
        };
        out.push(Token { tok, pos: start });
    }
    out.push(Token {
        tok: Tok::End,
        pos: chars.len(),
    });
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<Token>,
    at: usize,
    schema: &'a AttributeSchema,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Token {
        &self.toks[self.at]
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.at].clone();
        if t.tok != Tok::End {
            self.at += 1;
        }
        t
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(s) if s.eq_ignore_ascii_case(kw))
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), QueryError> {
        if self.is_keyword(kw) {
            self.bump();
            Ok(())
        } else {
            Err(syntax(self.peek().pos, format!("expected `{kw}`")))
        }
    }

    fn ident(&mut self, what: &str) -> Result<(String, usize), QueryError> {
        let t = self.bump();
        match t.tok {
            Tok::Ident(s) => Ok((s, t.pos)),
            _ => Err(syntax(t.pos, format!("expected {what}"))),
        }
    }

    fn attribute(&mut self) -> Result<String, QueryError> {
        let (name, _) = self.ident("attribute name")?;
        self.schema.require(&name)?;
        Ok(name)
    }

    fn filter(&mut self) -> Result<Filter, QueryError> {
        let mut lhs = self.unary()?;
        while self.is_keyword("and") {
            self.bump();
            let rhs = self.unary()?;
            lhs = Filter::and(lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Filter, QueryError> {
        if self.is_keyword("not") {
            self.bump();
            return Ok(Filter::not(self.unary()?));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Filter, QueryError> {
        if self.is_keyword("true") {
            self.bump();
            return Ok(Filter::Empty);
        }
        match self.peek().tok {
            Tok::EmptySet => {
                self.bump();
                Ok(Filter::Empty)
            }
            Tok::LParen => {
                self.bump();
                let inner = self.filter()?;
                let t = self.bump();
                if t.tok != Tok::RParen {
                    return Err(syntax(t.pos, "expected `)`"));
                }
                Ok(inner)
            }
            Tok::Ident(_) => {
                let attr = self.attribute()?;
                let op = self.bump();
                let value = self.bump();
                let value = match value.tok {
                    Tok::Number(v) => v,
                    _ => return Err(syntax(value.pos, "expected a number")),
                };
                match op.tok {
                    Tok::Gt => Ok(Filter::Gt(attr, value)),
                    Tok::Eq => Ok(Filter::Eq(attr, value)),
                    _ => Err(syntax(op.pos, "expected `>` or `=`")),
                }
            }
            _ => Err(syntax(self.peek().pos, "expected a filter")),
        }
    }

    fn finish(&mut self) -> Result<(), QueryError> {
        let t = self.peek();
        if t.tok == Tok::End {
            Ok(())
        } else {
            Err(syntax(t.pos, "unexpected trailing input"))
        }
    }
}

/// Parses `function of attribute with filter`.
pub fn parse_query(text: &str, schema: &AttributeSchema) -> Result<Query, QueryError> {
    let mut p = Parser {
        toks: lex(text)?,
        at: 0,
        schema,
    };
    if p.peek().tok == Tok::End {
        return Err(syntax(0, "empty query"));
    }
    let (fname, _) = p.ident("function name")?;
    let function: StatFunction = fname.parse()?;
    p.expect_keyword("of")?;
    let attribute = p.attribute()?;
    p.expect_keyword("with")?;
    let filter = p.filter()?;
    p.finish()?;
    Ok(Query {
        function,
        attribute,
        filter,
    })
}

/// Parses a bare filter expression.
pub fn parse_filter(text: &str, schema: &AttributeSchema) -> Result<Filter, QueryError> {
    let mut p = Parser {
        toks: lex(text)?,
        at: 0,
        schema,
    };
    let f = p.filter()?;
    p.finish()?;
    Ok(f)
}
