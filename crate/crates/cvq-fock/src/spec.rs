//! The test-state mini grammar.
//!
//! ```text
//! spec      := atom | composite
//! atom      := "fock:" nat | "coherent:" num "," num | "thermal:" num
//!            | "tmsv:" num | "squeezed:" num
//! composite := "mix(" num "*" spec ("," num "*" spec)* ")"
//!            | "loss(" num "," spec ")"
//!            | "dephase(" num "," spec ")"
//!            | "photonsub(" spec ")"
//! ```
//!
//! The grammar is LL(1): the head identifier decides the production. Errors
//! carry the byte position of the offending token. `loss`, `dephase` and
//! `photonsub` act on the last mode of a two-mode inner state (the
//! transmitted half) and on the only mode of a single-mode one. See
//! `docs/state-spec.md` for the full description.

use std::fmt;

use crate::error::FockError;

/// Parsed state expression.
#[derive(Debug, Clone, PartialEq)]
pub enum StateSpec {
    Fock(u32),
    Coherent { re: f64, im: f64 },
    Thermal { nbar: f64 },
    Tmsv { v: f64 },
    Squeezed { r: f64 },
    Mix(Vec<(f64, StateSpec)>),
    Loss { t: f64, inner: Box<StateSpec> },
    Dephase { p: f64, inner: Box<StateSpec> },
    PhotonSub(Box<StateSpec>),
}

impl StateSpec {
    /// Number of modes the realized state will have.
    pub fn modes(&self) -> Result<usize, FockError> {
        match self {
            StateSpec::Fock(_)
            | StateSpec::Coherent { .. }
            | StateSpec::Thermal { .. }
            | StateSpec::Squeezed { .. } => Ok(1),
            StateSpec::Tmsv { .. } => Ok(2),
            StateSpec::Mix(branches) => {
                let first = branches[0].1.modes()?;
                for (_, b) in branches.iter().skip(1) {
                    if b.modes()? != first {
                        return Err(FockError::ModeMismatch {
                            context: format!("mixture branches span {first} and {} modes", b.modes()?),
                        });
                    }
                }
                Ok(first)
            }
            StateSpec::Loss { inner, .. }
            | StateSpec::Dephase { inner, .. }
            | StateSpec::PhotonSub(inner) => inner.modes(),
        }
    }
}

impl fmt::Display for StateSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateSpec::Fock(n) => write!(f, "fock:{n}"),
            StateSpec::Coherent { re, im } => write!(f, "coherent:{re},{im}"),
            StateSpec::Thermal { nbar } => write!(f, "thermal:{nbar}"),
            StateSpec::Tmsv { v } => write!(f, "tmsv:{v}"),
            StateSpec::Squeezed { r } => write!(f, "squeezed:{r}"),
            StateSpec::Mix(branches) => {
                write!(f, "mix(")?;
                for (k, (w, s)) in branches.iter().enumerate() {
                    if k > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{w}*{s}")?;
                }
                write!(f, ")")
            }
            StateSpec::Loss { t, inner } => write!(f, "loss({t}, {inner})"),
            StateSpec::Dephase { p, inner } => write!(f, "dephase({p}, {inner})"),
            StateSpec::PhotonSub(inner) => write!(f, "photonsub({inner})"),
        }
    }
}

struct Cursor<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn err(&self, message: impl Into<String>) -> FockError {
        FockError::Parse {
            position: self.pos,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.text[self.pos..].starts_with([' ', '\t', '\n', '\r']) {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.text[self.pos..].chars().next()
    }

    fn expect(&mut self, ch: char) -> Result<(), FockError> {
        self.skip_ws();
        if self.text[self.pos..].starts_with(ch) {
            self.pos += ch.len_utf8();
            Ok(())
        } else {
            Err(self.err(format!("expected '{ch}'")))
        }
    }

    fn ident(&mut self) -> Result<(usize, &'a str), FockError> {
        self.skip_ws();
        let start = self.pos;
        let rest = &self.text[start..];
        let len = rest
            .char_indices()
            .find(|(_, c)| !c.is_ascii_alphabetic())
            .map_or(rest.len(), |(i, _)| i);
        if len == 0 {
            return Err(self.err("expected a state name"));
        }
        self.pos += len;
        Ok((start, &rest[..len]))
    }

    fn number(&mut self) -> Result<f64, FockError> {
        self.skip_ws();
        let start = self.pos;
        let bytes = self.text.as_bytes();
        let mut end = start;
        if end < bytes.len() && (bytes[end] == b'+' || bytes[end] == b'-') {
            end += 1;
        }
        let mut seen_digit = false;
        while end < bytes.len() && (bytes[end].is_ascii_digit() || bytes[end] == b'.') {
            seen_digit |= bytes[end].is_ascii_digit();
            end += 1;
        }
        if end < bytes.len() && (bytes[end] == b'e' || bytes[end] == b'E') && seen_digit {
            end += 1;
            if end < bytes.len() && (bytes[end] == b'+' || bytes[end] == b'-') {
                end += 1;
            }
            while end < bytes.len() && bytes[end].is_ascii_digit() {
                end += 1;
            }
        }
        if !seen_digit {
            return Err(self.err("expected a number"));
        }
        let token = &self.text[start..end];
        let value: f64 = token
            .parse()
            .map_err(|_| self.err(format!("malformed number '{token}'")))?;
        self.pos = end;
        Ok(value)
    }

    fn spec(&mut self) -> Result<StateSpec, FockError> {
        let (at, name) = self.ident()?;
        match name {
            "fock" => {
                self.expect(':')?;
                let n = self.number()?;
                if n < 0.0 || n.fract() != 0.0 {
                    return Err(FockError::Parse {
                        position: at,
                        message: format!("fock level must be a nonnegative integer, got {n}"),
                    });
                }
                Ok(StateSpec::Fock(n as u32))
            }
            "coherent" => {
                self.expect(':')?;
                let re = self.number()?;
                self.expect(',')?;
                let im = self.number()?;
                Ok(StateSpec::Coherent { re, im })
            }
            "thermal" => {
                self.expect(':')?;
                let nbar = self.number()?;
                if nbar < 0.0 {
                    return Err(FockError::Parse {
                        position: at,
                        message: format!("thermal occupation must be >= 0, got {nbar}"),
                    });
                }
                Ok(StateSpec::Thermal { nbar })
            }
            "tmsv" => {
                self.expect(':')?;
                let v = self.number()?;
                if v < 1.0 {
                    return Err(FockError::Parse {
                        position: at,
                        message: format!("tmsv variance must be >= 1, got {v}"),
                    });
                }
                Ok(StateSpec::Tmsv { v })
            }
            "squeezed" => {
                self.expect(':')?;
                let r = self.number()?;
                Ok(StateSpec::Squeezed { r })
            }
            "mix" => {
                self.expect('(')?;
                let mut branches = Vec::new();
                loop {
                    let w_at = {
                        self.skip_ws();
                        self.pos
                    };
                    let w = self.number()?;
                    if w <= 0.0 {
                        return Err(FockError::Parse {
                            position: w_at,
                            message: format!("mixture weight must be positive, got {w}"),
                        });
                    }
                    self.expect('*')?;
                    let s = self.spec()?;
                    branches.push((w, s));
                    match self.peek() {
                        Some(',') => {
                            self.expect(',')?;
                        }
                        Some(')') => {
                            self.expect(')')?;
                            break;
                        }
                        _ => return Err(self.err("expected ',' or ')' in mix")),
                    }
                }
                let total: f64 = branches.iter().map(|(w, _)| w).sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(FockError::Parse {
                        position: at,
                        message: format!("mixture weights sum to {total}, expected 1"),
                    });
                }
                let spec = StateSpec::Mix(branches);
                spec.modes()?;
                Ok(spec)
            }
            "loss" => {
                self.expect('(')?;
                let t_at = {
                    self.skip_ws();
                    self.pos
                };
                let t = self.number()?;
                if !(0.0..=1.0).contains(&t) || t == 0.0 {
                    return Err(FockError::Parse {
                        position: t_at,
                        message: format!("loss transmittance must lie in (0, 1], got {t}"),
                    });
                }
                self.expect(',')?;
                let inner = self.spec()?;
                self.expect(')')?;
                Ok(StateSpec::Loss {
                    t,
                    inner: Box::new(inner),
                })
            }
            "dephase" => {
                self.expect('(')?;
                let p_at = {
                    self.skip_ws();
                    self.pos
                };
                let p = self.number()?;
                if !(0.0..=1.0).contains(&p) {
                    return Err(FockError::Parse {
                        position: p_at,
                        message: format!("dephasing probability must lie in [0, 1], got {p}"),
                    });
                }
                self.expect(',')?;
                let inner = self.spec()?;
                self.expect(')')?;
                Ok(StateSpec::Dephase {
                    p,
                    inner: Box::new(inner),
                })
            }
            "photonsub" => {
                self.expect('(')?;
                let inner = self.spec()?;
                self.expect(')')?;
                Ok(StateSpec::PhotonSub(Box::new(inner)))
            }
            other => Err(FockError::Parse {
                position: at,
                message: format!("unknown state '{other}'"),
            }),
        }
    }
}

/// Parse a state expression, or fail with a position-annotated error.
pub fn parse_state_spec(text: &str) -> Result<StateSpec, FockError> {
    let mut cur = Cursor { text, pos: 0 };
    let spec = cur.spec()?;
    cur.skip_ws();
    if cur.pos != text.len() {
        return Err(cur.err("trailing input after state expression"));
    }
    Ok(spec)
}
