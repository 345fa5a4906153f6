//! Rewrites of colloquial Persian word forms into formal candidates.
//!
//! Rules are tried in a fixed order, most frequent in forum text first:
//! plural «ا», object marker «و», colloquial possessives, then the
//! person/number verb endings.

use super::normalize::ZWNJ;

/// Which words a rule may touch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Applicability {
    Any,
    /// Present simple/subjunctive forms: word carries «می»/«نمی»/«ب»/«ن».
    PresentVerb,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TransformRule {
    /// Rule group 1–4; group 4 is the verb-ending table.
    pub rule_id: u8,
    /// Row within the group.
    pub row: u8,
    pub suffix: &'static str,
    pub replacement: &'static str,
    pub applicability: Applicability,
    pub tags: &'static str,
}

const fn rule(
    rule_id: u8,
    row: u8,
    suffix: &'static str,
    replacement: &'static str,
    applicability: Applicability,
    tags: &'static str,
) -> TransformRule {
    TransformRule {
        rule_id,
        row,
        suffix,
        replacement,
        applicability,
        tags,
    }
}

use Applicability::{Any, PresentVerb};

pub const TRANSFORM_RULES: &[TransformRule] = &[
    rule(1, 1, "ا", "", Any, "colloquial plural"),
    rule(2, 1, "و", "", Any, "object marker"),
    rule(3, 1, "مون", "مان", Any, "possessive 1st plural"),
    rule(3, 2, "تون", "تان", Any, "possessive 2nd plural"),
    rule(3, 3, "شون", "شان", Any, "possessive 3rd plural"),
    rule(3, 4, "مون", "", Any, "possessive 1st plural, stripped"),
    rule(3, 5, "تون", "", Any, "possessive 2nd plural, stripped"),
    rule(3, 6, "شون", "", Any, "possessive 3rd plural, stripped"),
    rule(4, 1, "ین", "ید", Any, "past simple/continuous/perfect, 2nd plural"),
    rule(4, 2, "ن", "ند", Any, "past simple/continuous/perfect, 3rd plural"),
    rule(4, 3, "ین", "ید", PresentVerb, "present simple/subjunctive, 2nd plural"),
    rule(4, 4, "ن", "ند", PresentVerb, "present simple/subjunctive, 3rd plural"),
    rule(4, 5, "ه", "د", PresentVerb, "present simple/subjunctive, 3rd singular"),
];

/// Shortest base (in characters) a rewrite may leave behind.
const MIN_BASE_CHARS: usize = 2;

fn has_present_prefix(word: &str) -> bool {
    ["می", "نمی", "ب", "ن"].iter().any(|p| {
        word.strip_prefix(p)
            .is_some_and(|rest| rest.chars().filter(|&c| c != ZWNJ).count() >= 2)
    })
}

impl TransformRule {
    pub fn apply(&self, word: &str) -> Option<String> {
        if self.applicability == PresentVerb && !has_present_prefix(word) {
            return None;
        }
        let base = word.strip_suffix(self.suffix)?;
        let base = base.trim_end_matches(ZWNJ);
        if base.chars().count() < MIN_BASE_CHARS {
            return None;
        }
        Some(format!("{base}{}", self.replacement))
    }
}

/// Candidate formal forms in rule order, ending with `word` itself.
pub fn colloquial_to_formal(word: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for r in TRANSFORM_RULES {
        if let Some(c) = r.apply(word) {
            if c != word && !out.contains(&c) {
                out.push(c);
            }
        }
    }
    out.push(word.to_string());
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn past_second_plural() {
        assert!(colloquial_to_formal("رفتین").contains(&"رفتید".to_string()));
    }

    #[test]
    fn past_third_plural() {
        assert!(colloquial_to_formal("رفتن").contains(&"رفتند".to_string()));
    }

    #[test]
    fn present_forms() {
        let w = format!("می{ZWNJ}خوره");
        assert!(colloquial_to_formal(&w).contains(&format!("می{ZWNJ}خورد")));
        let w = format!("می{ZWNJ}خورن");
        assert!(colloquial_to_formal(&w).contains(&format!("می{ZWNJ}خورند")));
        let w = format!("می{ZWNJ}خورین");
        assert!(colloquial_to_formal(&w).contains(&format!("می{ZWNJ}خورید")));
    }

    #[test]
    fn third_singular_needs_verb_prefix() {
        assert!(!colloquial_to_formal("خانه").contains(&"خاند".to_string()));
    }

    #[test]
    fn no_rule_gives_identity() {
        assert_eq!(colloquial_to_formal("کتاب"), vec!["کتاب".to_string()]);
    }

    #[test]
    fn plural_object_and_possessive() {
        assert_eq!(colloquial_to_formal("سهما")[0], "سهم");
        assert_eq!(colloquial_to_formal("سهمو")[0], "سهم");
        let c = colloquial_to_formal("سهممون");
        assert_eq!(c[0], "سهممان");
        assert!(c.contains(&"سهم".to_string()));
    }

    #[test]
    fn rules_in_documented_order() {
        let ids: Vec<_> = TRANSFORM_RULES.iter().map(|r| (r.rule_id, r.row)).collect();
        let mut sorted = ids.clone();
        sorted.sort();
        assert_eq!(ids, sorted);
    }

    #[test]
    fn input_always_last() {
        for w in ["", "ا", "رفتین", "سهمو", "xyz"] {
            assert_eq!(colloquial_to_formal(w).last().unwrap(), w);
        }
    }
}
