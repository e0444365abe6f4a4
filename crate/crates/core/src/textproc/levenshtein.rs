//! Character-level Levenshtein distance with unit costs.

/// Edit distance between `a` and `b`, counted in Unicode scalar values.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let (a, b) = trim_common(&a, &b);
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    // Keep the shorter string in the inner loop.
    let (long, short) = if a.len() >= b.len() { (a, b) } else { (b, a) };

    let mut row: Vec<usize> = (0..=short.len()).collect();
    for (i, &lc) in long.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, &sc) in short.iter().enumerate() {
            let sub = diag + usize::from(lc != sc);
            diag = row[j + 1];
            row[j + 1] = sub.min(row[j] + 1).min(diag + 1);
        }
    }
    row[short.len()]
}

/// Edit distance if it is at most `limit`, otherwise `None`.
///
/// Runs a banded DP in `O(limit · n)`, which is what makes the
/// distance-threshold filter affordable on article-length texts.
pub fn levenshtein_within(a: &str, b: &str, limit: usize) -> Option<usize> {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let (a, b) = trim_common(&a, &b);
    let (long, short) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    if long.len() - short.len() > limit {
        return None;
    }
    if short.is_empty() {
        return Some(long.len());
    }

    // Cells outside the band |i - j| <= limit are treated as limit + 1.
    let cap = limit + 1;
    let n = short.len();
    let mut prev: Vec<usize> = (0..=n).map(|j| j.min(cap)).collect();
    let mut cur = vec![cap; n + 1];
    for i in 1..=long.len() {
        let lo = i.saturating_sub(limit).max(1);
        let hi = (i + limit).min(n);
        cur.fill(cap);
        cur[0] = i.min(cap);
        let mut row_min = cur[0];
        for j in lo..=hi {
            let sub = prev[j - 1] + usize::from(long[i - 1] != short[j - 1]);
            let v = sub.min(prev[j] + 1).min(cur[j - 1] + 1).min(cap);
            cur[j] = v;
            row_min = row_min.min(v);
        }
        if row_min >= cap {
            return None;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let d = prev[n];
    (d <= limit).then_some(d)
}

fn trim_common<'a>(a: &'a [char], b: &'a [char]) -> (&'a [char], &'a [char]) {
    let prefix = a.iter().zip(b).take_while(|(x, y)| x == y).count();
    let (a, b) = (&a[prefix..], &b[prefix..]);
    let suffix = a.iter().rev().zip(b.iter().rev()).take_while(|(x, y)| x == y).count();
    (&a[..a.len() - suffix], &b[..b.len() - suffix])
}
