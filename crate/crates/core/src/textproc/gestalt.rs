//! Ratcliff/Obershelp ("gestalt") similarity.
//!
//! The matched-character count `M` is found by taking the longest common
//! substring, then recursing on the unmatched text to its left and to its
//! right. When several longest substrings exist, the one starting earliest in
//! the first string wins, then earliest in the second. That tie rule depends
//! on argument order, so the pair is put in lexicographic order first, which
//! keeps the similarity symmetric. The similarity is `2M / (|a| + |b|)`,
//! counted in Unicode scalar values.

/// Longest common substring of `a` and `b` as `(start_a, start_b, len)`.
fn longest_common(a: &[char], b: &[char], row: &mut Vec<usize>) -> (usize, usize, usize) {
    // row[j + 1] = length of the common suffix ending at a[i], b[j]
    row.clear();
    row.resize(b.len() + 1, 0);
    let mut best = (0, 0, 0);
    for (i, ca) in a.iter().enumerate() {
        let mut diag = 0;
        for (j, cb) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if ca == cb { diag + 1 } else { 0 };
            diag = up;
            let len = row[j + 1];
            if len > 0 {
                let (sa, sb) = (i + 1 - len, j + 1 - len);
                if len > best.2 || (len == best.2 && (sa, sb) < (best.0, best.1)) {
                    best = (sa, sb, len);
                }
            }
        }
    }
    best
}

/// Total characters matched by the recursive longest-substring procedure.
pub fn matched_chars(a: &[char], b: &[char]) -> usize {
    let mut row = Vec::new();
    let mut total = 0;
    let mut stack = vec![(0..a.len(), 0..b.len())];
    while let Some((ra, rb)) = stack.pop() {
        if ra.is_empty() || rb.is_empty() {
            continue;
        }
        let (sa, sb, len) = longest_common(&a[ra.clone()], &b[rb.clone()], &mut row);
        if len == 0 {
            continue;
        }
        total += len;
        let (sa, sb) = (ra.start + sa, rb.start + sb);
        stack.push((ra.start..sa, rb.start..sb));
        stack.push((sa + len..ra.end, sb + len..rb.end));
    }
    total
}

pub fn gestalt_similarity(a: &str, b: &str) -> f64 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let m = if a <= b { matched_chars(&a, &b) } else { matched_chars(&b, &a) };
    2.0 * m as f64 / (a.len() + b.len()) as f64
}
