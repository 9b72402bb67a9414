//! Porter suffix-stripping stemmer.
//!
//! This is the widely deployed "extended" Porter variant: the 1980 rule set
//! plus the later step-2 additions (`bli`, `logi`, `fulli`, recursive `alli`),
//! the consonant-preceded `y -> i` rule, the short-`ies`/`ied` handling and a
//! small table of irregular forms. It agrees with the NLTK default stemmer.
//!
//! Input is expected to be lowercase ASCII letters; other bytes are treated
//! as consonants.

const IRREGULAR: &[(&str, &str)] = &[
    ("sky", "sky"),
    ("skies", "sky"),
    ("dying", "die"),
    ("lying", "lie"),
    ("tying", "tie"),
    ("news", "news"),
    ("innings", "inning"),
    ("inning", "inning"),
    ("outings", "outing"),
    ("outing", "outing"),
    ("cannings", "canning"),
    ("canning", "canning"),
    ("howe", "howe"),
    ("proceed", "proceed"),
    ("exceed", "exceed"),
    ("succeed", "succeed"),
];

/// Stems a lowercase alphabetic word.
pub fn stem(word: &str) -> String {
    if let Some((_, s)) = IRREGULAR.iter().find(|(w, _)| *w == word) {
        return (*s).to_string();
    }
    if word.len() <= 2 {
        return word.to_string();
    }
    let mut w = word.as_bytes().to_vec();
    step1a(&mut w);
    step1b(&mut w);
    step1c(&mut w);
    step2(&mut w);
    step3(&mut w);
    step4(&mut w);
    step5a(&mut w);
    step5b(&mut w);
    // only ASCII bytes are ever written
    String::from_utf8(w).expect("stemmer output is ASCII")
}

fn is_vowel(c: u8) -> bool {
    matches!(c, b'a' | b'e' | b'i' | b'o' | b'u')
}

/// `true` at position i when w[i] is a consonant. A `y` is a consonant iff
/// it starts the word or follows a vowel.
fn consonant_flags(w: &[u8]) -> Vec<bool> {
    let mut flags: Vec<bool> = Vec::with_capacity(w.len());
    for (i, &c) in w.iter().enumerate() {
        let f = if is_vowel(c) {
            false
        } else if c == b'y' {
            i == 0 || !flags[i - 1]
        } else {
            true
        };
        flags.push(f);
    }
    flags
}

fn is_consonant(w: &[u8], i: usize) -> bool {
    consonant_flags(&w[..=i])[i]
}

/// Number of VC sequences in `[C](VC)^m[V]`.
fn measure(stem: &[u8]) -> usize {
    let flags = consonant_flags(stem);
    flags.windows(2).filter(|p| !p[0] && p[1]).count()
}

fn contains_vowel(stem: &[u8]) -> bool {
    consonant_flags(stem).iter().any(|c| !c)
}

fn ends_double_consonant(w: &[u8]) -> bool {
    let n = w.len();
    n >= 2 && w[n - 1] == w[n - 2] && is_consonant(w, n - 1)
}

/// `*o`: stem ends consonant-vowel-consonant, last not w/x/y. Two-letter
/// vowel-consonant stems also qualify.
fn ends_cvc(w: &[u8]) -> bool {
    let n = w.len();
    if n >= 3 {
        let f = consonant_flags(w);
        if f[n - 3] && !f[n - 2] && f[n - 1] && !matches!(w[n - 1], b'w' | b'x' | b'y') {
            return true;
        }
    }
    n == 2 && !is_consonant(w, 0) && is_consonant(w, 1)
}

fn ends_with(w: &[u8], suffix: &str) -> bool {
    w.ends_with(suffix.as_bytes())
}

fn replace_suffix(w: &mut Vec<u8>, suffix_len: usize, replacement: &str) {
    let keep = w.len() - suffix_len;
    w.truncate(keep);
    w.extend_from_slice(replacement.as_bytes());
}

type Condition = fn(&[u8]) -> bool;

fn positive_measure(stem: &[u8]) -> bool {
    measure(stem) > 0
}

fn measure_gt_1(stem: &[u8]) -> bool {
    measure(stem) > 1
}

/// Applies the first rule whose suffix matches; if its condition fails the
/// word is left unchanged and no later rule is tried.
fn apply_rules(w: &mut Vec<u8>, rules: &[(&str, &str, Condition)]) {
    for &(suffix, replacement, cond) in rules {
        if ends_with(w, suffix) {
            let stem_len = w.len() - suffix.len();
            if cond(&w[..stem_len]) {
                replace_suffix(w, suffix.len(), replacement);
            }
            return;
        }
    }
}

fn step1a(w: &mut Vec<u8>) {
    if ends_with(w, "ies") && w.len() == 4 {
        replace_suffix(w, 3, "ie");
        return;
    }
    if ends_with(w, "sses") {
        replace_suffix(w, 4, "ss");
    } else if ends_with(w, "ies") {
        replace_suffix(w, 3, "i");
    } else if ends_with(w, "ss") {
    } else if ends_with(w, "s") {
        replace_suffix(w, 1, "");
    }
}

fn step1b(w: &mut Vec<u8>) {
    if ends_with(w, "ied") {
        let rep = if w.len() == 4 { "ie" } else { "i" };
        replace_suffix(w, 3, rep);
        return;
    }
    if ends_with(w, "eed") {
        if measure(&w[..w.len() - 3]) > 0 {
            replace_suffix(w, 3, "ee");
        }
        return;
    }
    let mut stripped = false;
    for suffix in ["ed", "ing"] {
        if ends_with(w, suffix) && contains_vowel(&w[..w.len() - suffix.len()]) {
            let n = w.len() - suffix.len();
            w.truncate(n);
            stripped = true;
            break;
        }
    }
    if !stripped {
        return;
    }
    if ends_with(w, "at") || ends_with(w, "bl") || ends_with(w, "iz") {
        w.push(b'e');
    } else if ends_double_consonant(w) {
        if !matches!(w[w.len() - 1], b'l' | b's' | b'z') {
            w.pop();
        }
    } else if measure(w) == 1 && ends_cvc(w) {
        w.push(b'e');
    }
}

fn step1c(w: &mut [u8]) {
    let n = w.len();
    if n >= 1 && w[n - 1] == b'y' {
        let stem = &w[..n - 1];
        if stem.len() > 1 && is_consonant(stem, stem.len() - 1) {
            w[n - 1] = b'i';
        }
    }
}

fn step2(w: &mut Vec<u8>) {
    if ends_with(w, "alli") && positive_measure(&w[..w.len() - 4]) {
        replace_suffix(w, 4, "al");
        step2(w);
        return;
    }
    const RULES: &[(&str, &str, Condition)] = &[
        ("ational", "ate", positive_measure),
        ("tional", "tion", positive_measure),
        ("enci", "ence", positive_measure),
        ("anci", "ance", positive_measure),
        ("izer", "ize", positive_measure),
        ("bli", "ble", positive_measure),
        ("alli", "al", positive_measure),
        ("entli", "ent", positive_measure),
        ("eli", "e", positive_measure),
        ("ousli", "ous", positive_measure),
        ("ization", "ize", positive_measure),
        ("ation", "ate", positive_measure),
        ("ator", "ate", positive_measure),
        ("alism", "al", positive_measure),
        ("iveness", "ive", positive_measure),
        ("fulness", "ful", positive_measure),
        ("ousness", "ous", positive_measure),
        ("aliti", "al", positive_measure),
        ("iviti", "ive", positive_measure),
        ("biliti", "ble", positive_measure),
        ("fulli", "ful", positive_measure),
    ];
    for &(suffix, replacement, cond) in RULES {
        if ends_with(w, suffix) {
            if cond(&w[..w.len() - suffix.len()]) {
                replace_suffix(w, suffix.len(), replacement);
            }
            return;
        }
    }
    // `logi` measures the stem with the `l` kept
    if ends_with(w, "logi") && positive_measure(&w[..w.len() - 3]) {
        replace_suffix(w, 4, "log");
    }
}

fn step3(w: &mut Vec<u8>) {
    apply_rules(
        w,
        &[
            ("icate", "ic", positive_measure),
            ("ative", "", positive_measure),
            ("alize", "al", positive_measure),
            ("iciti", "ic", positive_measure),
            ("ical", "ic", positive_measure),
            ("ful", "", positive_measure),
            ("ness", "", positive_measure),
        ],
    );
}

fn ion_condition(stem: &[u8]) -> bool {
    measure(stem) > 1 && matches!(stem.last(), Some(b's') | Some(b't'))
}

fn step4(w: &mut Vec<u8>) {
    apply_rules(
        w,
        &[
            ("al", "", measure_gt_1),
            ("ance", "", measure_gt_1),
            ("ence", "", measure_gt_1),
            ("er", "", measure_gt_1),
            ("ic", "", measure_gt_1),
            ("able", "", measure_gt_1),
            ("ible", "", measure_gt_1),
            ("ant", "", measure_gt_1),
            ("ement", "", measure_gt_1),
            ("ment", "", measure_gt_1),
            ("ent", "", measure_gt_1),
            ("ion", "", ion_condition),
            ("ou", "", measure_gt_1),
            ("ism", "", measure_gt_1),
            ("ate", "", measure_gt_1),
            ("iti", "", measure_gt_1),
            ("ous", "", measure_gt_1),
            ("ive", "", measure_gt_1),
            ("ize", "", measure_gt_1),
        ],
    );
}

fn step5a(w: &mut Vec<u8>) {
    if ends_with(w, "e") {
        let stem = &w[..w.len() - 1];
        let m = measure(stem);
        if m > 1 || (m == 1 && !ends_cvc(stem)) {
            w.pop();
        }
    }
}

fn step5b(w: &mut Vec<u8>) {
    if ends_with(w, "ll") && measure(&w[..w.len() - 1]) > 1 {
        w.pop();
    }
}
