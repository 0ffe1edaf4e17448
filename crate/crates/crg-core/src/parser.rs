//! Recursive-descent parsers for the expression DSL and the ODE DSL.
//!
//! Expression grammar (whitespace insensitive):
//!
//! ```text
//! expr     := ("+"|"-")? term (("+"|"-") term)*
//! term     := factor (("*"|"/") factor)*      -- "/" only by constants
//! factor   := atom ("^" uint)?
//! atom     := rational | rational "i" | "i" | "z" | "(" expr ")"
//!           | func "(" expr ")"
//! func     := "exp" | "sin" | "cos" | "sinh" | "cosh"
//! rational := int ("/" uint)?
//! ```
//!
//! Trig/hyperbolic sugar expands to exponentials at parse time and is
//! never re-synthesized on printing.
//!
//! ODE grammar: a sum of `coeff * f`, `coeff * f'`, ..., `f^(k)` terms
//! with an optional `= 0` suffix; primes cover orders 1-4, `f^(k)` any.

use crate::exact::ExactComplex;
use crate::exppoly::ExpPoly;
use crate::poly::Poly;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("parse error at byte {pos}: {msg}")]
pub struct ParseError {
    pub pos: usize,
    pub msg: String,
}

fn err<T>(pos: usize, msg: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError {
        pos,
        msg: msg.into(),
    })
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Int(BigInt),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Prime,
    Equals,
}

struct Lexer {
    toks: Vec<(Tok, usize)>,
    idx: usize,
    end_pos: usize,
}

impl Lexer {
    fn new(text: &str) -> Result<Lexer, ParseError> {
        let bytes = text.as_bytes();
        let mut toks = Vec::new();
        let mut i = 0;
        while i < bytes.len() {
            let c = bytes[i] as char;
            match c {
                ' ' | '\t' | '\n' | '\r' => i += 1,
                '+' => {
                    toks.push((Tok::Plus, i));
                    i += 1;
                }
                '-' => {
                    toks.push((Tok::Minus, i));
                    i += 1;
                }
                '*' => {
                    toks.push((Tok::Star, i));
                    i += 1;
                }
                '/' => {
                    toks.push((Tok::Slash, i));
                    i += 1;
                }
                '^' => {
                    toks.push((Tok::Caret, i));
                    i += 1;
                }
                '(' => {
                    toks.push((Tok::LParen, i));
                    i += 1;
                }
                ')' => {
                    toks.push((Tok::RParen, i));
                    i += 1;
                }
                '\'' => {
                    toks.push((Tok::Prime, i));
                    i += 1;
                }
                '=' => {
                    toks.push((Tok::Equals, i));
                    i += 1;
                }
                '0'..='9' => {
                    let start = i;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                    let n = BigInt::parse_bytes(&bytes[start..i], 10)
                        .expect("digit run parses as integer");
                    toks.push((Tok::Int(n), start));
                }
                'a'..='z' | 'A'..='Z' => {
                    let start = i;
                    while i < bytes.len() && bytes[i].is_ascii_alphabetic() {
                        i += 1;
                    }
                    toks.push((Tok::Ident(text[start..i].to_string()), start));
                }
                _ => return err(i, format!("unexpected character '{}'", c)),
            }
        }
        Ok(Lexer {
            toks,
            idx: 0,
            end_pos: bytes.len(),
        })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.idx).map(|(t, _)| t)
    }

    fn peek2(&self) -> Option<&Tok> {
        self.toks.get(self.idx + 1).map(|(t, _)| t)
    }

    fn pos(&self) -> usize {
        self.toks
            .get(self.idx)
            .map(|(_, p)| *p)
            .unwrap_or(self.end_pos)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.idx).map(|(t, _)| t.clone());
        self.idx += 1;
        t
    }

    fn eat(&mut self, want: &Tok, what: &str) -> Result<(), ParseError> {
        if self.peek() == Some(want) {
            self.idx += 1;
            Ok(())
        } else {
            err(self.pos(), format!("expected {}", what))
        }
    }
}

const FUNCS: [&str; 5] = ["exp", "sin", "cos", "sinh", "cosh"];

/// Parse the expression DSL into a canonical exponential polynomial.
pub fn parse_exppoly(text: &str) -> Result<ExpPoly, ParseError> {
    let mut lx = Lexer::new(text)?;
    let e = parse_expr(&mut lx)?;
    if lx.peek().is_some() {
        return err(lx.pos(), "trailing input after expression");
    }
    Ok(e)
}

fn parse_expr(lx: &mut Lexer) -> Result<ExpPoly, ParseError> {
    let mut negate = false;
    match lx.peek() {
        Some(Tok::Plus) => {
            lx.bump();
        }
        Some(Tok::Minus) => {
            lx.bump();
            negate = true;
        }
        _ => {}
    }
    let mut acc = parse_term(lx)?;
    if negate {
        acc = acc.neg();
    }
    loop {
        match lx.peek() {
            Some(Tok::Plus) => {
                lx.bump();
                let t = parse_term(lx)?;
                acc = acc.add(&t);
            }
            Some(Tok::Minus) => {
                lx.bump();
                let t = parse_term(lx)?;
                acc = acc.sub(&t);
            }
            _ => return Ok(acc),
        }
    }
}

fn parse_term(lx: &mut Lexer) -> Result<ExpPoly, ParseError> {
    let mut acc = parse_factor(lx)?;
    loop {
        match lx.peek() {
            Some(Tok::Star) => {
                lx.bump();
                let f = parse_factor(lx)?;
                acc = acc.mul(&f);
            }
            Some(Tok::Slash) => {
                let pos = lx.pos();
                lx.bump();
                let f = parse_factor(lx)?;
                let c = f
                    .as_poly()
                    .and_then(|p| if p.is_constant() { Some(p.coeff(0)) } else { None });
                match c {
                    Some(c) if !c.is_zero() => acc = acc.scale(&c.inv()),
                    Some(_) => return err(pos, "division by zero"),
                    None => return err(pos, "division by a non-constant"),
                }
            }
            _ => return Ok(acc),
        }
    }
}

fn parse_factor(lx: &mut Lexer) -> Result<ExpPoly, ParseError> {
    let a = parse_atom(lx)?;
    if lx.peek() == Some(&Tok::Caret) {
        lx.bump();
        let pos = lx.pos();
        match lx.bump() {
            Some(Tok::Int(n)) => {
                let e: u32 = n
                    .try_into()
                    .map_err(|_| ParseError {
                        pos,
                        msg: "exponent too large".into(),
                    })?;
                Ok(a.pow(e))
            }
            _ => err(pos, "expected integer exponent after '^'"),
        }
    } else {
        Ok(a)
    }
}

fn parse_atom(lx: &mut Lexer) -> Result<ExpPoly, ParseError> {
    let pos = lx.pos();
    match lx.bump() {
        Some(Tok::Int(n)) => {
            let mut r = BigRational::from_integer(n);
            // rational := int ("/" uint)? -- only when a digit follows,
            // otherwise "/" is treated as scalar division at term level.
            if lx.peek() == Some(&Tok::Slash) {
                if let Some(Tok::Int(_)) = lx.peek2() {
                    lx.bump();
                    if let Some(Tok::Int(d)) = lx.bump() {
                        if d.is_zero() {
                            return err(pos, "zero denominator");
                        }
                        r /= BigRational::from_integer(d);
                    }
                }
            }
            // "2i" / "3/4i": imaginary literal.
            if let Some(Tok::Ident(id)) = lx.peek() {
                if id == "i" {
                    lx.bump();
                    return Ok(ExpPoly::constant(ExactComplex::new(
                        BigRational::zero(),
                        r,
                    )));
                }
            }
            Ok(ExpPoly::constant(ExactComplex::new(r, BigRational::zero())))
        }
        Some(Tok::Ident(id)) => match id.as_str() {
            "i" => Ok(ExpPoly::constant(ExactComplex::i())),
            "z" => Ok(ExpPoly::var()),
            name if FUNCS.contains(&name) => {
                lx.eat(&Tok::LParen, "'(' after function name")?;
                let arg_pos = lx.pos();
                let arg = parse_expr(lx)?;
                lx.eat(&Tok::RParen, "closing ')'")?;
                let p = arg.as_poly().ok_or(ParseError {
                    pos: arg_pos,
                    msg: format!("non-polynomial {} argument", name),
                })?;
                Ok(expand_func(name, p))
            }
            other => err(pos, format!("unknown identifier '{}'", other)),
        },
        Some(Tok::LParen) => {
            let e = parse_expr(lx)?;
            lx.eat(&Tok::RParen, "closing ')'")?;
            Ok(e)
        }
        Some(t) => err(pos, format!("unexpected token {:?}", t)),
        None => err(pos, "unexpected end of input"),
    }
}

fn expand_func(name: &str, p: Poly) -> ExpPoly {
    let half = ExactComplex::from_ratio(1, 2);
    let i_half = ExactComplex::from_parts(0, 1, 1, 2);
    match name {
        "exp" => ExpPoly::exp_of(p),
        "cos" => {
            // cos w = (e^{iw} + e^{-iw}) / 2
            let ip = p.scale(&ExactComplex::i());
            ExpPoly::exp_of(ip.clone())
                .scale(&half)
                .add(&ExpPoly::exp_of(ip.neg()).scale(&half))
        }
        "sin" => {
            // sin w = (e^{iw} - e^{-iw}) / (2i) = -i/2 e^{iw} + i/2 e^{-iw}
            let ip = p.scale(&ExactComplex::i());
            ExpPoly::exp_of(ip.clone())
                .scale(&-&i_half)
                .add(&ExpPoly::exp_of(ip.neg()).scale(&i_half))
        }
        "cosh" => ExpPoly::exp_of(p.clone())
            .scale(&half)
            .add(&ExpPoly::exp_of(p.neg()).scale(&half)),
        "sinh" => ExpPoly::exp_of(p.clone())
            .scale(&half)
            .sub(&ExpPoly::exp_of(p.neg()).scale(&half)),
        _ => unreachable!("FUNCS gate"),
    }
}

/// One parsed ODE term: coefficient times the `deriv`-th derivative of f.
struct OdeTerm {
    coeff: ExpPoly,
    deriv: usize,
}

/// Parse the ODE DSL. Returns coefficients indexed by derivative order
/// (index n is the leading coefficient).
pub fn parse_ode_coeffs(text: &str) -> Result<Vec<ExpPoly>, ParseError> {
    let mut lx = Lexer::new(text)?;
    let mut terms: Vec<OdeTerm> = Vec::new();
    let mut sign_neg = match lx.peek() {
        Some(Tok::Minus) => {
            lx.bump();
            true
        }
        Some(Tok::Plus) => {
            lx.bump();
            false
        }
        _ => false,
    };
    loop {
        let t = parse_ode_term(&mut lx)?;
        let t = if sign_neg {
            OdeTerm {
                coeff: t.coeff.neg(),
                deriv: t.deriv,
            }
        } else {
            t
        };
        terms.push(t);
        match lx.peek() {
            Some(Tok::Plus) => {
                lx.bump();
                sign_neg = false;
            }
            Some(Tok::Minus) => {
                lx.bump();
                sign_neg = true;
            }
            Some(Tok::Equals) => {
                lx.bump();
                let pos = lx.pos();
                match lx.bump() {
                    Some(Tok::Int(n)) if n.is_zero() => {}
                    _ => return err(pos, "expected 0 after '='"),
                }
                if lx.peek().is_some() {
                    return err(lx.pos(), "trailing input after '= 0'");
                }
                break;
            }
            None => break,
            _ => return err(lx.pos(), "expected '+', '-' or end of equation"),
        }
    }
    let order = terms.iter().map(|t| t.deriv).max().unwrap_or(0);
    let mut coeffs = vec![ExpPoly::zero(); order + 1];
    for t in terms {
        coeffs[t.deriv] = coeffs[t.deriv].add(&t.coeff);
    }
    Ok(coeffs)
}

fn parse_ode_term(lx: &mut Lexer) -> Result<OdeTerm, ParseError> {
    let mut coeff = ExpPoly::one();
    let mut deriv: Option<usize> = None;
    loop {
        // f-factor?
        if let Some(Tok::Ident(id)) = lx.peek() {
            if id == "f" {
                let fpos = lx.pos();
                if deriv.is_some() {
                    return err(fpos, "nonlinear term: more than one f factor");
                }
                lx.bump();
                let mut order = 0usize;
                if lx.peek() == Some(&Tok::Caret) {
                    lx.bump();
                    lx.eat(&Tok::LParen, "'(' in f^(k)")?;
                    let pos = lx.pos();
                    match lx.bump() {
                        Some(Tok::Int(n)) => {
                            order = (&n).try_into().map_err(|_| ParseError {
                                pos,
                                msg: "derivative order too large".into(),
                            })?;
                        }
                        _ => return err(pos, "expected derivative order in f^(k)"),
                    }
                    lx.eat(&Tok::RParen, "closing ')' in f^(k)")?;
                } else {
                    while lx.peek() == Some(&Tok::Prime) {
                        lx.bump();
                        order += 1;
                    }
                    if order > 4 {
                        return err(fpos, "use f^(k) beyond four primes");
                    }
                }
                deriv = Some(order);
            } else {
                let f = parse_factor(lx)?;
                coeff = coeff.mul(&f);
            }
        } else {
            let f = parse_factor(lx)?;
            coeff = coeff.mul(&f);
        }
        match lx.peek() {
            Some(Tok::Star) => {
                lx.bump();
            }
            Some(Tok::Slash) => {
                let pos = lx.pos();
                lx.bump();
                let f = parse_factor(lx)?;
                let c = f
                    .as_poly()
                    .and_then(|p| if p.is_constant() { Some(p.coeff(0)) } else { None });
                match c {
                    Some(c) if !c.is_zero() => coeff = coeff.scale(&c.inv()),
                    Some(_) => return err(pos, "division by zero"),
                    None => return err(pos, "division by a non-constant"),
                }
            }
            _ => break,
        }
    }
    match deriv {
        Some(d) => Ok(OdeTerm { coeff, deriv: d }),
        None => err(lx.pos(), "equation term lacks an f factor"),
    }
}
