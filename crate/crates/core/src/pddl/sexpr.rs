use std::fmt;

use super::PddlError;

/// 1-based source position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Sexp {
    Atom(String, Pos),
    List(Vec<Sexp>, Pos),
}

impl Sexp {
    pub fn pos(&self) -> Pos {
        match self {
            Sexp::Atom(_, p) | Sexp::List(_, p) => *p,
        }
    }

    pub fn as_atom(&self) -> Option<&str> {
        match self {
            Sexp::Atom(s, _) => Some(s),
            Sexp::List(..) => None,
        }
    }

    pub fn as_list(&self) -> Option<&[Sexp]> {
        match self {
            Sexp::List(items, _) => Some(items),
            Sexp::Atom(..) => None,
        }
    }

    /// Head keyword of a list, if it starts with an atom.
    pub fn head(&self) -> Option<&str> {
        self.as_list().and_then(|l| l.first()).and_then(Sexp::as_atom)
    }
}

/// Reads exactly one s-expression document. Identifiers are lowercased and
/// `;` starts a comment running to end of line.
pub fn read_document(text: &str) -> Result<Sexp, PddlError> {
    let mut reader = Reader::new(text);
    reader.skip_trivia();
    let doc = match reader.peek() {
        None => return Err(reader.error("empty document")),
        Some(_) => reader.read()?,
    };
    reader.skip_trivia();
    if reader.peek().is_some() {
        return Err(reader.error("trailing content after document"));
    }
    Ok(doc)
}

struct Reader<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    col: usize,
}

impl<'a> Reader<'a> {
    fn new(text: &'a str) -> Self {
        Reader { chars: text.chars().peekable(), line: 1, col: 1 }
    }

    fn pos(&self) -> Pos {
        Pos { line: self.line, col: self.col }
    }

    fn error(&self, msg: &str) -> PddlError {
        PddlError::Syntax { pos: self.pos(), msg: msg.to_string() }
    }

    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn skip_trivia(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.bump();
            } else if c == ';' {
                while let Some(c) = self.bump() {
                    if c == '\n' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    fn read(&mut self) -> Result<Sexp, PddlError> {
        let start = self.pos();
        match self.peek() {
            Some('(') => {
                self.bump();
                let mut items = Vec::new();
                loop {
                    self.skip_trivia();
                    match self.peek() {
                        None => {
                            return Err(PddlError::Syntax {
                                pos: start,
                                msg: "unclosed parenthesis".into(),
                            })
                        }
                        Some(')') => {
                            self.bump();
                            return Ok(Sexp::List(items, start));
                        }
                        Some(_) => items.push(self.read()?),
                    }
                }
            }
            Some(')') => Err(self.error("unexpected ')'")),
            Some(_) => {
                let mut tok = String::new();
                while let Some(c) = self.peek() {
                    if c.is_whitespace() || c == '(' || c == ')' || c == ';' {
                        break;
                    }
                    tok.extend(c.to_lowercase());
                    self.bump();
                }
                Ok(Sexp::Atom(tok, start))
            }
            None => Err(self.error("unexpected end of input")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_nested_lists_lowercased() {
        let doc = read_document("(Define (DOMAIN x) ; comment\n (:a))").unwrap();
        let items = doc.as_list().unwrap();
        assert_eq!(items[0].as_atom(), Some("define"));
        assert_eq!(items[1].head(), Some("domain"));
        assert_eq!(items[2].pos(), Pos { line: 2, col: 2 });
    }

    #[test]
    fn reports_unbalanced_parens_with_position() {
        match read_document("(a\n (b)") {
            Err(PddlError::Syntax { pos, .. }) => assert_eq!(pos, Pos { line: 1, col: 1 }),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(read_document("(a))"), Err(PddlError::Syntax { .. })));
        assert!(matches!(read_document("   "), Err(PddlError::Syntax { .. })));
    }
}
