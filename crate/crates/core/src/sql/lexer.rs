use super::SqlError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    /// Identifier or keyword, possibly dotted (`T1.name`).
    Word,
    Number,
    /// Single- or double-quoted literal; the text keeps its quotes.
    Str,
    Symbol,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    /// Lowercased text for words and symbols; source text otherwise.
    pub norm: String,
    pub offset: usize,
}

impl Token {
    pub fn is(&self, norm: &str) -> bool {
        self.kind != TokenKind::Str && self.norm == norm
    }
}

const SYMBOLS: [&str; 16] = [
    "!=", "<>", "<=", ">=", "==", "(", ")", ",", ";", "*", "+", "-", "/", "=", "<", ">",
];

pub fn tokenize(sql: &str) -> Result<Vec<Token>, SqlError> {
    let bytes = sql.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c == b'\'' || c == b'"' {
            i += 1;
            loop {
                match bytes.get(i) {
                    None => {
                        return Err(SqlError::UnsupportedSyntax {
                            token: sql[start..].to_string(),
                            offset: start,
                        })
                    }
                    Some(&q) if q == c => {
                        // a doubled quote is an escaped quote
                        if bytes.get(i + 1) == Some(&c) {
                            i += 2;
                        } else {
                            i += 1;
                            break;
                        }
                    }
                    Some(_) => i += 1,
                }
            }
            let text = sql[start..i].to_string();
            out.push(Token {
                kind: TokenKind::Str,
                norm: text.clone(),
                text,
                offset: start,
            });
            continue;
        }
        if c.is_ascii_digit() || (c == b'.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            // exponent
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            // `1st`-style words are identifiers
            if i < bytes.len() && is_word_byte(bytes[i]) {
                while i < bytes.len() && (is_word_byte(bytes[i]) || bytes[i] == b'.') {
                    i += 1;
                }
                push_word(&mut out, &sql[start..i], start);
            } else {
                let text = sql[start..i].to_string();
                out.push(Token {
                    kind: TokenKind::Number,
                    norm: text.clone(),
                    text,
                    offset: start,
                });
            }
            continue;
        }
        if is_word_byte(c) {
            while i < bytes.len() && (is_word_byte(bytes[i]) || bytes[i] == b'.') {
                i += 1;
            }
            push_word(&mut out, &sql[start..i], start);
            continue;
        }
        if c == b'`' || c == b'[' {
            let close = if c == b'`' { b'`' } else { b']' };
            let end = sql[start + 1..]
                .bytes()
                .position(|b| b == close)
                .ok_or_else(|| SqlError::UnsupportedSyntax {
                    token: sql[start..].to_string(),
                    offset: start,
                })?;
            let inner = &sql[start + 1..start + 1 + end];
            i = start + end + 2;
            push_word(&mut out, inner, start);
            continue;
        }
        if let Some(sym) = SYMBOLS.iter().find(|s| sql[i..].starts_with(**s)) {
            i += sym.len();
            let norm = match *sym {
                "<>" => "!=",
                "==" => "=",
                s => s,
            };
            out.push(Token {
                kind: TokenKind::Symbol,
                text: sym.to_string(),
                norm: norm.to_string(),
                offset: start,
            });
            continue;
        }
        let ch = sql[i..].chars().next().unwrap();
        return Err(SqlError::UnsupportedSyntax {
            token: ch.to_string(),
            offset: start,
        });
    }
    Ok(out)
}

fn is_word_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_' || b >= 0x80
}

fn push_word(out: &mut Vec<Token>, text: &str, offset: usize) {
    out.push(Token {
        kind: TokenKind::Word,
        text: text.to_string(),
        norm: text.to_lowercase(),
        offset,
    });
}
