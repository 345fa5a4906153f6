//! Character- and word-level normalization of forum text.

/// Zero-width non-joiner, the Persian half-space.
pub const ZWNJ: char = '\u{200C}';
/// Substituted for any run of `+`.
pub const POSITIVE_WORD: &str = "مثبت";
/// Substituted for any run of `-`.
pub const NEGATIVE_WORD: &str = "منفی";

const CONTINUOUS_PREFIXES: [&str; 2] = ["نمی", "می"];

/// Words that merely begin with «می» and must not receive a half-space.
/// Checked against the part of the word before its first half-space.
const MI_EXCEPTIONS: &[&str] = &[
    "میز", "میزان", "میزبان", "میل", "میلی", "میلیون", "میلیونی", "میلیارد", "میلیاردی",
    "میان", "میانه", "میانگین", "میوه", "میدان", "میهن", "میراث", "میش", "میخ", "میمون",
    "مینا", "میلاد", "میسر", "میثاق", "میعاد", "میر", "میرزا", "میکرو", "میکروب", "مینی",
    "میگو", "میهمان", "میخک", "نمین",
];

/// Maps a character to its unified form, or drops it.
fn unify_char(ch: char) -> Option<char> {
    Some(match ch {
        'ي' | 'ى' => 'ی',
        'ك' => 'ک',
        '\u{0660}'..='\u{0669}' => char::from(b'0' + (ch as u32 - 0x0660) as u8),
        '\u{06F0}'..='\u{06F9}' => char::from(b'0' + (ch as u32 - 0x06F0) as u8),
        '\u{2212}' | '\u{FF0D}' | '\u{FE63}' => '-',
        '\u{FF0B}' | '\u{FE62}' => '+',
        '\u{FF20}' => '@',
        '\u{FF03}' => '#',
        // Harakat, superscript alef and tatweel carry no lexical information here.
        '\u{064B}'..='\u{0652}' | '\u{0670}' | '\u{0640}' => return None,
        '\u{200B}' | '\u{FEFF}' => ' ',
        '\u{200F}' | '\u{200E}' => return None,
        other => other,
    })
}

fn is_arabic_letter(ch: char) -> bool {
    matches!(ch, '\u{0621}'..='\u{064A}' | '\u{0671}'..='\u{06D3}' | '\u{06FA}'..='\u{06FF}')
}

/// Collapses every run of three or more identical characters to two.
fn collapse_repeats(word: &str) -> String {
    let mut out = String::with_capacity(word.len());
    let mut prev = None;
    let mut run = 0;
    for ch in word.chars() {
        if Some(ch) == prev {
            run += 1;
        } else {
            prev = Some(ch);
            run = 1;
        }
        if run <= 2 {
            out.push(ch);
        }
    }
    out
}

/// Single half-spaces only, and none at word edges.
fn tidy_half_spaces(word: &str) -> String {
    let mut out = String::with_capacity(word.len());
    for ch in word.chars() {
        if ch == ZWNJ && (out.is_empty() || out.ends_with(ZWNJ)) {
            continue;
        }
        out.push(ch);
    }
    while out.ends_with(ZWNJ) {
        out.pop();
    }
    out
}

/// Inserts the half-space after a joined continuous prefix («میرود» → «می‌رود»).
fn join_prefix(word: &str) -> String {
    let head = word.split(ZWNJ).next().unwrap_or(word);
    if MI_EXCEPTIONS.contains(&head) {
        return word.to_string();
    }
    for prefix in CONTINUOUS_PREFIXES {
        if let Some(rest) = word.strip_prefix(prefix) {
            let mut chars = rest.chars();
            let starts_with_letter = chars.next().is_some_and(is_arabic_letter);
            if starts_with_letter && rest.chars().count() >= 2 {
                return format!("{prefix}{ZWNJ}{rest}");
            }
            return word.to_string();
        }
    }
    word.to_string()
}

/// Normalizes raw comment text.
///
/// Character forms are unified first, then sign runs become words, mentions
/// and hashtags are dropped, repeated letters are collapsed, and the
/// continuous verb prefix is attached with a half-space. The result has
/// single spaces between words. Idempotent.
pub fn normalize(text: &str) -> String {
    let unified: String = text.chars().filter_map(unify_char).collect();

    let mut signs = String::with_capacity(unified.len() + 16);
    let mut prev = None;
    for ch in unified.chars() {
        match ch {
            '+' | '-' if prev == Some(ch) => {}
            '+' => {
                signs.push(' ');
                signs.push_str(POSITIVE_WORD);
                signs.push(' ');
            }
            '-' => {
                signs.push(' ');
                signs.push_str(NEGATIVE_WORD);
                signs.push(' ');
            }
            other => signs.push(other),
        }
        prev = Some(ch);
    }

    let words: Vec<String> = signs
        .split_whitespace()
        .map(|w| collapse_repeats(&tidy_half_spaces(w)))
        .filter(|w| !w.is_empty() && !w.starts_with('@') && !w.starts_with('#'))
        .collect();

    let mut out: Vec<String> = Vec::with_capacity(words.len());
    let mut i = 0;
    while i < words.len() {
        let w = &words[i];
        let standalone_prefix = CONTINUOUS_PREFIXES.contains(&w.as_str());
        match words.get(i + 1) {
            Some(next) if standalone_prefix && next.chars().next().is_some_and(is_arabic_letter) => {
                out.push(format!("{w}{ZWNJ}{next}"));
                i += 2;
            }
            _ => {
                out.push(if standalone_prefix { w.clone() } else { join_prefix(w) });
                i += 1;
            }
        }
    }
    out.join(" ")
}
