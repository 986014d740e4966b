use super::{Formula, Smooth, Term, DEFAULT_LAMBDA, DEFAULT_N_BASIS};
use crate::error::{Error, Result};

/// Parses an S-style formula such as `~ 1 + x + s(z,k=8,lambda=0.5) + dm(x)`.
///
/// Grammar:
///
/// ```text
/// formula := "~" term ("+" term)*
/// term    := "1" | ident | "s(" ident [",k=" int] [",lambda=" real] ")"
///          | "lasso(" ident ",lambda=" real ")" | ident "(" ident ("," ident)* ")"
/// ```
///
/// Whitespace between tokens is ignored. Any other call-style term is a deep
/// term whose name must match a declared network at assembly time.
pub fn parse_formula(text: &str) -> Result<Formula> {
    let mut p = Parser { src: text.as_bytes(), pos: 0 };
    p.skip_ws();
    p.expect(b'~')?;
    let mut terms = vec![p.term()?];
    loop {
        p.skip_ws();
        if p.at_end() {
            break;
        }
        p.expect(b'+')?;
        terms.push(p.term()?);
    }
    Formula::new(terms)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn at_end(&self) -> bool {
        self.pos >= self.src.len()
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_ascii_whitespace()) {
            self.pos += 1;
        }
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Parse { position: self.pos, message: message.into() })
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        self.skip_ws();
        match self.peek() {
            Some(got) if got == c => {
                self.pos += 1;
                Ok(())
            }
            Some(got) => self.error(format!("expected `{}`, found `{}`", c as char, got as char)),
            None => self.error(format!("expected `{}`, found end of input", c as char)),
        }
    }

    fn try_consume(&mut self, c: u8) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> Result<String> {
        self.skip_ws();
        let start = self.pos;
        match self.peek() {
            Some(c) if c.is_ascii_alphabetic() || c == b'_' || c == b'.' => self.pos += 1,
            Some(c) => return self.error(format!("expected identifier, found `{}`", c as char)),
            None => return self.error("expected identifier, found end of input"),
        }
        while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == b'_' || c == b'.')
        {
            self.pos += 1;
        }
        Ok(String::from_utf8_lossy(&self.src[start..self.pos]).into_owned())
    }

    fn number_text(&mut self) -> Result<(usize, String)> {
        self.skip_ws();
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit() || matches!(c, b'.' | b'e' | b'E' | b'+' | b'-'))
        {
            // a '+' only belongs to the number right after an exponent marker
            if self.peek() == Some(b'+')
                && !matches!(self.src.get(self.pos.wrapping_sub(1)), Some(b'e' | b'E'))
            {
                break;
            }
            self.pos += 1;
        }
        if start == self.pos {
            return self.error("expected a number");
        }
        Ok((start, String::from_utf8_lossy(&self.src[start..self.pos]).into_owned()))
    }

    fn real(&mut self) -> Result<f64> {
        let (start, text) = self.number_text()?;
        text.parse::<f64>()
            .map_err(|_| Error::Parse { position: start, message: format!("invalid number `{text}`") })
    }

    fn int(&mut self) -> Result<usize> {
        let (start, text) = self.number_text()?;
        text.parse::<usize>()
            .map_err(|_| Error::Parse { position: start, message: format!("invalid integer `{text}`") })
    }

    /// Consumes `name` followed by `=`.
    fn keyword(&mut self, name: &str) -> Result<()> {
        let at = self.pos;
        let got = self.ident()?;
        if got != name {
            self.pos = at;
            self.skip_ws();
            return self.error(format!("expected `{name}=`, found `{got}`"));
        }
        self.expect(b'=')
    }

    fn term(&mut self) -> Result<Term> {
        self.skip_ws();
        let start = self.pos;
        if self.peek() == Some(b'1') {
            self.pos += 1;
            if matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == b'.') {
                self.pos = start;
                return self.error("only `1` is allowed as a constant term");
            }
            return Ok(Term::Intercept);
        }
        let name = self.ident()?;
        if !self.try_consume(b'(') {
            return Ok(Term::Linear(name));
        }
        match name.as_str() {
            "s" => {
                let var = self.ident()?;
                let mut n_basis = DEFAULT_N_BASIS;
                let mut lambda = DEFAULT_LAMBDA;
                let mut seen_k = false;
                let mut seen_lambda = false;
                while self.try_consume(b',') {
                    self.skip_ws();
                    let at = self.pos;
                    let key = self.ident()?;
                    self.expect(b'=')?;
                    match key.as_str() {
                        "k" if !seen_k && !seen_lambda => {
                            n_basis = self.int()?;
                            seen_k = true;
                        }
                        "lambda" if !seen_lambda => {
                            lambda = self.real()?;
                            seen_lambda = true;
                        }
                        _ => {
                            self.pos = at;
                            return self.error(format!("unexpected smooth argument `{key}`"));
                        }
                    }
                }
                self.expect(b')')?;
                Ok(Term::Smooth(Smooth::new(var, n_basis, lambda)))
            }
            "lasso" => {
                let var = self.ident()?;
                self.expect(b',')?;
                self.keyword("lambda")?;
                let lambda = self.real()?;
                self.expect(b')')?;
                Ok(Term::L1Linear { var, lambda })
            }
            _ => {
                let mut vars = vec![self.ident()?];
                while self.try_consume(b',') {
                    vars.push(self.ident()?);
                }
                self.expect(b')')?;
                Ok(Term::Deep { net: name, vars })
            }
        }
    }
}
