//! Word-level text rules shared by the generative clients and the metrics.
//!
//! A word is a whitespace-separated token with leading and trailing
//! punctuation trimmed; tokens that are pure punctuation do not count.

fn trim_token(token: &str) -> &str {
    token.trim_matches(|c: char| !c.is_alphanumeric())
}

pub fn words(text: &str) -> impl Iterator<Item = &str> {
    text.split_whitespace().map(trim_token).filter(|w| !w.is_empty())
}

pub fn word_count(text: &str) -> usize {
    words(text).count()
}

/// Keeps the first `max` words, preserving their original spelling and
/// inner punctuation.
pub fn truncate_words(text: &str, max: usize) -> String {
    let mut kept = Vec::new();
    for token in text.split_whitespace() {
        if kept.len() == max {
            break;
        }
        if !trim_token(token).is_empty() {
            kept.push(token);
        }
    }
    let mut out = kept.join(" ");
    if word_count(text) > max {
        out = out.trim_end_matches([',', ';', ':']).to_string();
    }
    out
}

/// True if `word` names `noun`, allowing a plain English plural.
fn same_noun(word: &str, noun: &str) -> bool {
    word == noun
        || word.strip_suffix('s') == Some(noun)
        || word.strip_suffix("es") == Some(noun)
}

fn pieces(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|p| !p.is_empty())
        .map(str::to_lowercase)
}

/// Forbidden words present in `text`, in the order given by `forbidden`.
pub fn forbidden_hits(text: &str, forbidden: &[&str]) -> Vec<String> {
    forbidden
        .iter()
        .filter(|f| pieces(text).any(|p| same_noun(&p, &f.to_lowercase())))
        .map(|f| f.to_string())
        .collect()
}

/// Drops every token containing a forbidden word.
pub fn strip_forbidden(text: &str, forbidden: &[&str]) -> String {
    text.split_whitespace()
        .filter(|token| forbidden_hits(token, forbidden).is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

/// True if `text` mentions `noun` as a word (case-insensitive, plural allowed).
pub fn mentions(text: &str, noun: &str) -> bool {
    let noun = noun.to_lowercase();
    pieces(text).any(|p| same_noun(&p, &noun))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn counts_words_after_trimming_punctuation() {
        assert_eq!(word_count("A grey smiling koala"), 4);
        assert_eq!(word_count("  Hello, world! -- ok. "), 3);
        assert_eq!(word_count(""), 0);
        assert_eq!(word_count("... !!"), 0);
    }

    #[test]
    fn truncation_keeps_leading_words() {
        assert_eq!(truncate_words("one two three four", 2), "one two");
        assert_eq!(truncate_words("one, two, three", 2), "one, two");
        assert_eq!(truncate_words("short", 10), "short");
    }

    #[test]
    fn forbidden_words_match_whole_words_and_plurals() {
        let f = ["cartoon", "cardbox", "sticker"];
        assert_eq!(forbidden_hits("The Sticker shows a koala", &f), ["sticker"]);
        assert_eq!(forbidden_hits("two cardboxes and cartoons", &f), ["cartoon", "cardbox"]);
        assert!(forbidden_hits("stickery fun in a cartoonish land", &f).is_empty());
        assert_eq!(strip_forbidden("a sticker-like koala on a sticker", &f), "a koala on a");
    }

    #[test]
    fn mentions_head_nouns() {
        assert!(mentions("Two Koalas play", "koala"));
        assert!(mentions("a mushroom house with red roof", "house"));
        assert!(!mentions("a lighthouse", "house"));
    }

    proptest! {
        #[test]
        fn truncation_bounds_word_count(text in "[a-z ,.!]{0,120}", max in 0usize..20) {
            let out = truncate_words(&text, max);
            prop_assert!(word_count(&out) <= max);
            prop_assert_eq!(word_count(&out), word_count(&text).min(max));
        }

        #[test]
        fn stripping_removes_every_forbidden_word(text in "(sticker|koala|cartoons|a|Sticker!| )*") {
            let f = ["cartoon", "sticker"];
            prop_assert!(forbidden_hits(&strip_forbidden(&text, &f), &f).is_empty());
        }
    }
}
