//! Rule-based tokenization and sentence splitting.
//!
//! Used whenever a document arrives without pre-segmented sentences. Words are
//! maximal runs of alphanumeric characters, with inner apostrophes and hyphens
//! kept (`don't`, `well-known`); every other non-space character run becomes a
//! punctuation token.

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric()
}

fn is_joiner(c: char) -> bool {
    matches!(c, '\'' | '’' | '-')
}

/// Split text into word and punctuation tokens, preserving case.
pub fn tokenize(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if is_word_char(c) {
            let start = i;
            i += 1;
            while i < chars.len() {
                if is_word_char(chars[i]) {
                    i += 1;
                } else if is_joiner(chars[i]) && i + 1 < chars.len() && is_word_char(chars[i + 1]) {
                    i += 2;
                } else {
                    break;
                }
            }
            tokens.push(chars[start..i].iter().collect());
        } else {
            let start = i;
            i += 1;
            // Runs of the same punctuation mark stay together ("...", "!!").
            while i < chars.len() && chars[i] == c {
                i += 1;
            }
            tokens.push(chars[start..i].iter().collect());
        }
    }
    tokens
}

/// True when the token carries at least one alphanumeric character.
pub fn is_word(token: &str) -> bool {
    token.chars().any(char::is_alphanumeric)
}

fn is_terminal(token: &str) -> bool {
    !token.is_empty() && token.chars().all(|c| matches!(c, '.' | '!' | '?'))
}

/// Tokenize and group tokens into sentences, breaking after terminal
/// punctuation (`.`, `!`, `?`).
pub fn split_sentences(text: &str) -> Vec<Vec<String>> {
    let mut sentences = Vec::new();
    let mut current = Vec::new();
    for token in tokenize(text) {
        let terminal = is_terminal(&token);
        current.push(token);
        if terminal {
            sentences.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        sentences.push(current);
    }
    sentences
}

/// Lowercased tokens used for n-gram overlap metrics.
pub fn normalize_tokens(text: &str) -> Vec<String> {
    tokenize(text).into_iter().map(|t| t.to_lowercase()).collect()
}
