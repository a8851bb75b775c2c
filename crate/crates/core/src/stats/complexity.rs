//! Lempel-Ziv (1976) phrase counting for binary sequences.
//!
//! Each phrase is the longest prefix of the unparsed remainder that also
//! starts at an earlier position (overlap allowed), plus one new symbol.
//! The longest previous match is found from the suffix array: among suffixes
//! starting before `i`, the best match with suffix `i` is one of its nearest
//! neighbours in suffix order.

use crate::error::{LabError, Result};

pub const MIN_COMPLEXITY_LEN: usize = 64;

const NONE: u32 = u32::MAX;

/// Prefix-doubling suffix array.
fn suffix_array(s: &[u8]) -> Vec<u32> {
    let n = s.len();
    let mut sa: Vec<u32> = (0..n as u32).collect();
    if n <= 1 {
        return sa;
    }
    let mut rank: Vec<u32> = s.iter().map(|&b| u32::from(b)).collect();
    let mut next = vec![0u32; n];
    let mut k = 1usize;
    loop {
        let key = |i: u32, rank: &[u32]| {
            let i = i as usize;
            let second = if i + k < n { rank[i + k] + 1 } else { 0 };
            (rank[i], second)
        };
        sa.sort_unstable_by_key(|&i| key(i, &rank));
        next[sa[0] as usize] = 0;
        for j in 1..n {
            let bump = u32::from(key(sa[j - 1], &rank) < key(sa[j], &rank));
            next[sa[j] as usize] = next[sa[j - 1] as usize] + bump;
        }
        std::mem::swap(&mut rank, &mut next);
        if rank[sa[n - 1] as usize] as usize == n - 1 || k >= n {
            break;
        }
        k *= 2;
    }
    sa
}

/// For each suffix-array slot, the nearest slot on the given side whose
/// suffix starts earlier in the text.
fn nearest_earlier(sa: &[u32], forward: bool) -> Vec<u32> {
    let n = sa.len();
    let mut out = vec![NONE; n];
    let mut stack: Vec<u32> = Vec::new();
    let order: Box<dyn Iterator<Item = usize>> = if forward {
        Box::new(0..n)
    } else {
        Box::new((0..n).rev())
    };
    for r in order {
        while let Some(&top) = stack.last() {
            if top > sa[r] {
                stack.pop();
            } else {
                break;
            }
        }
        out[r] = stack.last().copied().unwrap_or(NONE);
        stack.push(sa[r]);
    }
    out
}

/// Number of phrases in the Lempel-Ziv (1976) parse of `bits`.
pub fn lz76_phrase_count(bits: &[bool]) -> usize {
    let s: Vec<u8> = bits.iter().map(|&b| u8::from(b)).collect();
    let n = s.len();
    if n == 0 {
        return 0;
    }
    let sa = suffix_array(&s);
    let mut rank = vec![0u32; n];
    for (r, &i) in sa.iter().enumerate() {
        rank[i as usize] = r as u32;
    }
    let left = nearest_earlier(&sa, true);
    let right = nearest_earlier(&sa, false);

    let lcp = |a: usize, b: usize| {
        let mut l = 0;
        while b + l < n && s[a + l] == s[b + l] {
            l += 1;
        }
        l
    };

    let mut phrases = 0;
    let mut i = 0;
    while i < n {
        let r = rank[i] as usize;
        let best = [left[r], right[r]]
            .into_iter()
            .filter(|&c| c != NONE)
            .map(|c| lcp(c as usize, i))
            .max()
            .unwrap_or(0);
        phrases += 1;
        i += best + 1;
    }
    phrases
}

/// Phrase count normalized by `n / log2(n)`, the asymptotic count for a fair
/// coin, clipped to `[0, 1]`.
pub fn complexity_score(bits: &[bool]) -> Result<f64> {
    let n = bits.len();
    if n < MIN_COMPLEXITY_LEN {
        return Err(LabError::TooShort {
            len: n,
            needed: MIN_COMPLEXITY_LEN,
        });
    }
    let c = lz76_phrase_count(bits) as f64;
    let nf = n as f64;
    Ok((c * nf.log2() / nf).clamp(0.0, 1.0))
}
