//! Vowel-group syllable heuristic.

fn is_vowel(c: char) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u' | 'y')
}

/// Count syllables as maximal runs of vowel letters (`aeiouy`), minus a
/// word-final silent `e` when that lone `e` is not the only run.
///
/// Non-letter characters are ignored; tokens without vowel letters count 0.
pub fn count_syllables(word: &str) -> usize {
    let letters: Vec<char> = word.chars().filter(|c| c.is_alphabetic()).flat_map(char::to_lowercase).collect();
    let mut groups = 0;
    let mut in_group = false;
    for &c in &letters {
        let v = is_vowel(c);
        if v && !in_group {
            groups += 1;
        }
        in_group = v;
    }
    let n = letters.len();
    let silent_e = n >= 2 && letters[n - 1] == 'e' && !is_vowel(letters[n - 2]);
    if silent_e && groups > 1 {
        groups -= 1;
    }
    groups
}

#[cfg(test)]
mod tests {
    use super::count_syllables;

    #[test]
    fn hand_counted_words() {
        assert_eq!(count_syllables("cat"), 1);
        assert_eq!(count_syllables("banana"), 3);
        assert_eq!(count_syllables("queue"), 1);
        assert_eq!(count_syllables("cake"), 1);
        assert_eq!(count_syllables("the"), 1);
        assert_eq!(count_syllables("agree"), 2);
        assert_eq!(count_syllables("Rhythm"), 1);
        assert_eq!(count_syllables("beautiful"), 3);
    }

    #[test]
    fn symbols_have_no_syllables() {
        assert_eq!(count_syllables("--"), 0);
        assert_eq!(count_syllables("42"), 0);
        assert_eq!(count_syllables("tsk"), 0);
    }
}
