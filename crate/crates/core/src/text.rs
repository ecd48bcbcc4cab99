//! Shared text primitives: tokenization, sentence splitting, and the
//! date/number detectors used by the salience scorer and the fact
//! fingerprinter.
//!
//! Tokenization is Unicode-aware lowercase word segmentation on
//! non-alphanumeric boundaries. No stemming, no stopword removal.

/// Lowercased alphanumeric tokens in order of appearance.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            for lc in ch.to_lowercase() {
                current.push(lc);
            }
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Words split on whitespace with leading/trailing punctuation stripped,
/// original case preserved. Internal apostrophes survive, so possessives
/// like `Alice's` stay in one piece. Used by the rule-based extractors.
pub fn words(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric() && c != '\'' && c != '\u{2019}'))
        .filter(|w| !w.is_empty())
        .map(|w| w.to_string())
        .collect()
}

/// Splits text into sentences on `.`, `!`, `?`, and `;`. Empty fragments
/// are dropped.
pub fn sentences(text: &str) -> Vec<&str> {
    text.split(['.', '!', '?', ';'])
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect()
}

const MONTHS: [&str; 12] = [
    "january",
    "february",
    "march",
    "april",
    "may",
    "june",
    "july",
    "august",
    "september",
    "october",
    "november",
    "december",
];

const MONTH_ABBREVS: [&str; 12] = [
    "jan", "feb", "mar", "apr", "may", "jun", "jul", "aug", "sep", "oct", "nov", "dec",
];

const WEEKDAYS: [&str; 7] = [
    "monday",
    "tuesday",
    "wednesday",
    "thursday",
    "friday",
    "saturday",
    "sunday",
];

pub fn is_month_word(token: &str) -> bool {
    MONTHS.contains(&token) || MONTH_ABBREVS.contains(&token)
}

pub fn is_weekday_word(token: &str) -> bool {
    WEEKDAYS.contains(&token)
}

fn is_numeric_date_shape(word: &str) -> bool {
    // Shapes like 2024-05-12, 12/05/2024, 3/7. Digit groups joined by / or -.
    let mut groups = 0usize;
    let mut current_digits = 0usize;
    let mut seen_separator = false;
    for ch in word.chars() {
        if ch.is_ascii_digit() {
            current_digits += 1;
            if current_digits > 4 {
                return false;
            }
        } else if ch == '/' || ch == '-' {
            if current_digits == 0 {
                return false;
            }
            groups += 1;
            current_digits = 0;
            seen_separator = true;
        } else {
            return false;
        }
    }
    if current_digits > 0 {
        groups += 1;
    }
    seen_separator && groups >= 2
}

/// True when the text contains a date expression: a month name, a weekday
/// name, or a numeric date shape such as `2024-05-12` or `12/05/2024`.
pub fn contains_date(text: &str) -> bool {
    !date_mentions(text).is_empty()
}

/// All date expressions found in the text, lowercased. A month name
/// followed by a day number is folded into one mention ("march 3").
pub fn date_mentions(text: &str) -> Vec<String> {
    let mut mentions = Vec::new();
    let raw: Vec<String> = text
        .split_whitespace()
        .map(|w| {
            w.trim_matches(|c: char| !c.is_alphanumeric() && c != '/' && c != '-')
                .to_lowercase()
        })
        .filter(|w| !w.is_empty())
        .collect();
    let mut i = 0;
    while i < raw.len() {
        let w = &raw[i];
        if is_month_word(w) {
            if i + 1 < raw.len() && raw[i + 1].chars().all(|c| c.is_ascii_digit()) {
                mentions.push(format!("{} {}", w, raw[i + 1]));
                i += 2;
                continue;
            }
            mentions.push(w.clone());
        } else if is_weekday_word(w) || is_numeric_date_shape(w) {
            mentions.push(w.clone());
        }
        i += 1;
    }
    mentions
}

/// Tokens (per [`tokenize`]) that contain at least one digit.
pub fn numeric_tokens(text: &str) -> Vec<String> {
    tokenize(text)
        .into_iter()
        .filter(|t| t.chars().any(|c| c.is_ascii_digit()))
        .collect()
}

/// Word-boundary containment check for a lowercase phrase in lowercase
/// text. Multi-word phrases match as a token subsequence.
pub fn contains_phrase(text_lower: &str, phrase: &str) -> bool {
    let text_tokens = tokenize(text_lower);
    let phrase_tokens = tokenize(phrase);
    if phrase_tokens.is_empty() || text_tokens.len() < phrase_tokens.len() {
        return false;
    }
    text_tokens
        .windows(phrase_tokens.len())
        .any(|w| w == phrase_tokens.as_slice())
}

/// True when the word begins with an uppercase character.
pub fn starts_uppercase(word: &str) -> bool {
    word.chars().next().is_some_and(|c| c.is_uppercase())
}
