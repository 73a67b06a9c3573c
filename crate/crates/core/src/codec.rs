//! Name normalization and fixed-shape one-hot encoding.
//!
//! A name becomes a 30×28 matrix: one row per character position, one
//! channel per symbol. Channels 0–25 hold the letters `a`–`z`, channel 26
//! the whitespace between name parts and channel 27 the padding that fills
//! the rows after the end of the name.

use std::fmt;

use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

/// Number of rows (character positions) in an encoded name.
pub const MAX_LEN: usize = 30;
/// Number of one-hot channels per row.
pub const CHANNELS: usize = 28;
/// Channel index of the whitespace symbol.
pub const SPACE_CHANNEL: usize = 26;
/// Channel index of the padding symbol.
pub const PAD_CHANNEL: usize = 27;

/// One symbol of the 28-channel alphabet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Symbol {
    Letter(u8),
    Space,
    Pad,
}

/// The fixed 28-symbol alphabet: `a`–`z`, whitespace, padding.
#[derive(Debug, Clone, Copy, Default)]
pub struct Alphabet;

impl Alphabet {
    pub fn len(&self) -> usize {
        CHANNELS
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn symbols(&self) -> impl Iterator<Item = Symbol> + use<> {
        (0..CHANNELS).map(|c| Alphabet.symbol(c).expect("channel in range"))
    }

    pub fn channel(&self, symbol: Symbol) -> Option<usize> {
        match symbol {
            Symbol::Letter(b @ b'a'..=b'z') => Some((b - b'a') as usize),
            Symbol::Letter(_) => None,
            Symbol::Space => Some(SPACE_CHANNEL),
            Symbol::Pad => Some(PAD_CHANNEL),
        }
    }

    pub fn symbol(&self, channel: usize) -> Option<Symbol> {
        match channel {
            0..=25 => Some(Symbol::Letter(b'a' + channel as u8)),
            SPACE_CHANNEL => Some(Symbol::Space),
            PAD_CHANNEL => Some(Symbol::Pad),
            _ => None,
        }
    }

    /// Channel label as written in reports: the letter, `" "` or `"<pad>"`.
    pub fn label(&self, channel: usize) -> Option<String> {
        self.symbol(channel).map(|s| match s {
            Symbol::Letter(b) => (b as char).to_string(),
            Symbol::Space => " ".to_string(),
            Symbol::Pad => "<pad>".to_string(),
        })
    }
}

/// A cleaned name: lowercase `a`–`z` and single internal spaces, at most
/// [`MAX_LEN`] symbols, never empty.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NormalizedName(String);

impl NormalizedName {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Number of symbols (bytes, since the text is ASCII).
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_string(self) -> String {
        self.0
    }
}

impl fmt::Display for NormalizedName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Letters that survive canonical decomposition unchanged and need an
/// explicit Latin counterpart.
fn transliterate(c: char) -> Option<&'static str> {
    Some(match c {
        'ß' | 'ẞ' => "ss",
        'ø' => "o",
        'æ' => "ae",
        'œ' => "oe",
        'đ' => "d",
        'ł' => "l",
        'þ' => "th",
        'ð' => "d",
        'ı' => "i",
        _ => return None,
    })
}

fn is_separator(c: char) -> bool {
    c.is_whitespace()
        || matches!(
            c,
            '-' | '\'' | '\u{2010}' | '\u{2011}' | '\u{2012}' | '\u{2013}' | '\u{2014}' | '\u{2019}' | '\u{02BC}' | '`' | '\u{00B4}'
        )
}

/// Cleans a raw name into the 27-symbol text the encoder accepts.
///
/// Diacritics are stripped via canonical decomposition, a handful of
/// non-decomposable letters are transliterated, hyphens and apostrophes
/// separate name parts, every other non-letter is dropped. Runs of
/// whitespace collapse to one space before the result is cut at 30 symbols.
pub fn normalize(raw: &str) -> Result<NormalizedName> {
    let mut out = String::with_capacity(raw.len().min(64));
    // true when the previous emitted symbol was a space (or nothing yet)
    let mut pending_space = false;
    let push_letter = |out: &mut String, b: char, pending: &mut bool| {
        if *pending && !out.is_empty() {
            out.push(' ');
        }
        *pending = false;
        out.push(b);
    };

    for decomposed in raw.nfd() {
        if is_combining_mark(decomposed) {
            continue;
        }
        for c in decomposed.to_lowercase() {
            if is_combining_mark(c) {
                continue;
            }
            if c.is_ascii_lowercase() {
                push_letter(&mut out, c, &mut pending_space);
            } else if let Some(latin) = transliterate(c) {
                for l in latin.chars() {
                    push_letter(&mut out, l, &mut pending_space);
                }
            } else if is_separator(c) {
                pending_space = true;
            }
        }
    }

    if out.len() > MAX_LEN {
        out.truncate(MAX_LEN);
        while out.ends_with(' ') {
            out.pop();
        }
    }
    if out.is_empty() {
        return Err(Error::EmptyAfterNormalization);
    }
    Ok(NormalizedName(out))
}

/// A name as a 30×28 one-hot matrix.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct EncodedName {
    rows: Box<[[u8; CHANNELS]; MAX_LEN]>,
}

impl fmt::Debug for EncodedName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match decode(self) {
            Ok(name) => write!(f, "EncodedName({:?})", name.as_str()),
            Err(_) => write!(f, "EncodedName(<malformed>)"),
        }
    }
}

impl EncodedName {
    /// Wraps a raw 0/1 matrix without validation; [`decode`] checks it.
    pub fn from_rows(rows: [[u8; CHANNELS]; MAX_LEN]) -> Self {
        EncodedName {
            rows: Box::new(rows),
        }
    }

    pub fn rows(&self) -> &[[u8; CHANNELS]; MAX_LEN] {
        &self.rows
    }

    /// Writes the matrix as row-major `f64` values into `out`
    /// (length `MAX_LEN * CHANNELS`).
    pub fn write_f64(&self, out: &mut [f64]) {
        debug_assert_eq!(out.len(), MAX_LEN * CHANNELS);
        for (dst, src) in out.chunks_exact_mut(CHANNELS).zip(self.rows.iter()) {
            for (d, &s) in dst.iter_mut().zip(src) {
                *d = s as f64;
            }
        }
    }

    pub fn total(&self) -> u32 {
        self.rows.iter().flatten().map(|&v| v as u32).sum()
    }
}

/// One-hot encodes a normalized name, padding rows after its end.
pub fn encode(name: &NormalizedName) -> EncodedName {
    let alphabet = Alphabet;
    let mut rows = [[0u8; CHANNELS]; MAX_LEN];
    let bytes = name.as_str().as_bytes();
    for (r, row) in rows.iter_mut().enumerate() {
        let symbol = match bytes.get(r) {
            Some(b' ') => Symbol::Space,
            Some(&b) => Symbol::Letter(b),
            None => Symbol::Pad,
        };
        let channel = alphabet
            .channel(symbol)
            .expect("normalized names contain only alphabet symbols");
        row[channel] = 1;
    }
    EncodedName::from_rows(rows)
}

/// Normalizes and encodes in one step.
pub fn encode_raw(raw: &str) -> Result<EncodedName> {
    normalize(raw).map(|n| encode(&n))
}

/// Recovers the name from its one-hot matrix.
pub fn decode(encoded: &EncodedName) -> Result<NormalizedName> {
    let alphabet = Alphabet;
    let mut text = String::with_capacity(MAX_LEN);
    let mut in_padding = false;
    for (r, row) in encoded.rows.iter().enumerate() {
        let mut hot = None;
        for (c, &v) in row.iter().enumerate() {
            match v {
                0 => {}
                1 if hot.is_none() => hot = Some(c),
                1 => {
                    return Err(Error::MalformedEncoding {
                        row: r,
                        reason: "more than one active channel",
                    })
                }
                _ => {
                    return Err(Error::MalformedEncoding {
                        row: r,
                        reason: "entry is not 0 or 1",
                    })
                }
            }
        }
        let channel = hot.ok_or(Error::MalformedEncoding {
            row: r,
            reason: "no active channel",
        })?;
        match alphabet.symbol(channel).expect("channel in range") {
            Symbol::Pad => in_padding = true,
            _ if in_padding => {
                return Err(Error::MalformedEncoding {
                    row: r,
                    reason: "symbol after padding",
                })
            }
            Symbol::Space => text.push(' '),
            Symbol::Letter(b) => text.push(b as char),
        }
    }
    if text.is_empty() {
        return Err(Error::EmptyAfterNormalization);
    }
    if text.starts_with(' ') || text.ends_with(' ') || text.contains("  ") {
        return Err(Error::MalformedEncoding {
            row: 0,
            reason: "leading, trailing or repeated whitespace",
        });
    }
    Ok(NormalizedName(text))
}
