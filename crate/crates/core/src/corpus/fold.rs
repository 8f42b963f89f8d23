//! Folding of the Maltese graphemes whose diacritics are commonly dropped online.
//!
//! Every mapping is one code point to one code point, so folded text has the
//! same length in `char`s as its input. The digraph `għ` needs no special case:
//! folding `ħ` alone already yields `gh`.

/// Maps a single character to its undotted/unbarred form.
#[inline]
pub fn fold_char(c: char) -> char {
    match c {
        'ċ' => 'c',
        'Ċ' => 'C',
        'ġ' => 'g',
        'Ġ' => 'G',
        'ħ' => 'h',
        'Ħ' => 'H',
        'ż' => 'z',
        'Ż' => 'Z',
        other => other,
    }
}

/// Applies the Maltese folding table (ċ→c, ġ→g, għ→gh, ħ→h, ż→z and the
/// uppercase variants). All other code points are left untouched.
pub fn fold_diacritics(text: &str) -> String {
    text.chars().map(fold_char).collect()
}

/// Key used for case- and diacritic-insensitive matching: trimmed, internal
/// whitespace collapsed to single spaces, folded, lowercased.
pub fn match_key(text: &str) -> String {
    let folded = fold_diacritics(text).to_lowercase();
    folded.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn folds_table_entries() {
        assert_eq!(fold_diacritics("ħobż"), "hobz");
        assert_eq!(fold_diacritics("Għarb"), "Gharb");
        assert_eq!(fold_diacritics("GĦARB"), "GHARB");
        assert_eq!(fold_diacritics("ċaqċiq ġenna Żebbuġ"), "caqciq genna Zebbug");
    }

    #[test]
    fn leaves_other_code_points_alone() {
        assert_eq!(fold_diacritics("café naïve"), "café naïve");
        assert_eq!(fold_diacritics(""), "");
    }

    #[test]
    fn match_key_normalizes() {
        assert_eq!(match_key("  Refuġjati   Ħżiena "), "refugjati hziena");
    }

    const MALTESE: &[&str] = &[
        "a", "b", "ċ", "d", "e", "f", "ġ", "g", "għ", "h", "ħ", "i", "ie", "j", "k", "l", "m",
        "n", "o", "p", "q", "r", "s", "t", "u", "v", "w", "x", "ż", "z", "A", "Ċ", "Ġ", "GĦ",
        "Għ", "Ħ", "Ż", " ", "'",
    ];

    fn maltese_string() -> impl Strategy<Value = String> {
        prop::collection::vec(prop::sample::select(MALTESE), 0..40).prop_map(|v| v.concat())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn idempotent_on_maltese_text(s in maltese_string()) {
            let once = fold_diacritics(&s);
            prop_assert_eq!(fold_diacritics(&once), once.clone());
        }

        #[test]
        fn preserves_char_length(s in any::<String>()) {
            prop_assert_eq!(fold_diacritics(&s).chars().count(), s.chars().count());
        }
    }
}
