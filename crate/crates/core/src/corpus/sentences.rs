//! Rule-based sentence segmentation.
//!
//! A sentence ends at a run of `.`, `!` or `?` followed by whitespace (or the
//! end of the text), unless the whitespace-delimited word carrying the
//! terminator is a known abbreviation. Closing quotes and brackets directly
//! after the terminator stay with the sentence.

/// Abbreviations that never end a sentence. Matching is case-sensitive on
/// the whole whitespace-delimited word, leading opening quotes/brackets
/// stripped.
pub const DEFAULT_ABBREVIATIONS: &[&str] = &[
    "Mr.", "Mrs.", "Ms.", "Dr.", "Prof.", "Sr.", "Jr.", "St.", "Rev.", "Gen.", "Gov.", "Sen.", "Rep.", "Lt.", "Col.",
    "Sgt.", "Capt.", "Cmdr.", "Adm.", "Pres.", "U.S.", "U.K.", "U.N.", "E.U.", "D.C.", "Inc.", "Co.", "Corp.", "Ltd.",
    "vs.", "etc.", "No.", "Jan.", "Feb.", "Mar.", "Apr.", "Aug.", "Sept.", "Sep.", "Oct.", "Nov.", "Dec.", "Mt.",
    "Ft.",
];

#[derive(Debug, Clone)]
pub struct SentenceSplitter {
    abbreviations: Vec<String>,
}

impl Default for SentenceSplitter {
    fn default() -> Self {
        Self::new(DEFAULT_ABBREVIATIONS.iter().copied())
    }
}

impl SentenceSplitter {
    pub fn new<I, S>(abbreviations: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self { abbreviations: abbreviations.into_iter().map(Into::into).collect() }
    }

    /// Splits `text` into trimmed sentences. Joining the result with spaces
    /// reproduces the text up to whitespace normalization.
    pub fn split<'a>(&self, text: &'a str) -> Vec<&'a str> {
        let mut out = Vec::new();
        let chars: Vec<(usize, char)> = text.char_indices().collect();
        let mut start = 0usize;
        let mut i = 0usize;
        while i < chars.len() {
            let (_, c) = chars[i];
            if !is_terminator(c) {
                i += 1;
                continue;
            }
            let mut j = i;
            while j + 1 < chars.len() && is_terminator(chars[j + 1].1) {
                j += 1;
            }
            while j + 1 < chars.len() && is_closer(chars[j + 1].1) {
                j += 1;
            }
            let end = chars.get(j + 1).map_or(text.len(), |&(b, _)| b);
            let at_boundary = chars.get(j + 1).is_none_or(|&(_, n)| n.is_whitespace());
            if at_boundary && !self.is_abbreviation(&text[start..end]) {
                let s = text[start..end].trim();
                if !s.is_empty() {
                    out.push(s);
                }
                start = end;
            }
            i = j + 1;
        }
        let tail = text[start..].trim();
        if !tail.is_empty() {
            out.push(tail);
        }
        out
    }

    fn is_abbreviation(&self, upto_terminator: &str) -> bool {
        let word = upto_terminator
            .rsplit(char::is_whitespace)
            .next()
            .unwrap_or("")
            .trim_start_matches(['"', '\'', '(', '[', '“', '‘']);
        self.abbreviations.iter().any(|a| a == word)
    }
}

fn is_terminator(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

fn is_closer(c: char) -> bool {
    matches!(c, '"' | '\'' | ')' | ']' | '”' | '’')
}

/// Splits with the default abbreviation list.
pub fn split_sentences(text: &str) -> Vec<&str> {
    SentenceSplitter::default().split(text)
}
