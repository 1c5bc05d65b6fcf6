//! Stems for a few thousand English words, generated with NLTK's
//! `PorterStemmer(mode=MARTIN_EXTENSIONS)`, which follows the reference C
//! implementation.

use wvset::textproc::stem;

#[test]
fn matches_reference_stemmer() {
    let table = include_str!("fixtures/porter_reference.tsv");
    let mut mismatches = Vec::new();
    let mut n = 0;
    for line in table.lines() {
        let (word, expected) = line.split_once('\t').unwrap();
        n += 1;
        let got = stem(word);
        if got != expected {
            mismatches.push(format!("{word}: {got} != {expected}"));
        }
    }
    assert!(n > 5000);
    assert!(mismatches.is_empty(), "{} mismatches:\n{}", mismatches.len(), mismatches.join("\n"));
}

/// Porter is not idempotent (`agreed -> agre -> agr`). The table contains
/// every stem as an input too, so the words whose stem re-stems differently
/// must be exactly the reference implementation's.
#[test]
fn non_idempotent_words_match_reference() {
    let table: std::collections::HashMap<&str, &str> = include_str!("fixtures/porter_reference.tsv")
        .lines()
        .map(|l| l.split_once('\t').unwrap())
        .collect();
    // words whose stem is itself in the table
    let closed: Vec<(&str, &str)> = table.iter().filter(|(_, s)| table.contains_key(*s)).map(|(w, s)| (*w, *s)).collect();
    let reference = closed.iter().filter(|(_, s)| table[s] != *s).count();
    let ours = closed.iter().filter(|(w, _)| stem(&stem(w)) != stem(w)).count();
    assert_eq!(ours, reference);
    assert_eq!(reference, 237);
}
