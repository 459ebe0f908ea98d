//! Words over the alphabet {0, 1} and their algebra: enumeration, weighted
//! length, shuffle products, and the reduction of signature coordinates onto
//! the basis of words ending in 1.
//!
//! Letter 0 indexes time integration (dt), letter 1 space integration (dx).
//! Words are ordered graded-lexicographically with 0 < 1, which also gives
//! the rank used for flat signature storage.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::Zero;

use crate::error::{Error, Result};

/// Maximum number of letters a packed word can hold.
pub const MAX_WORD_LEN: usize = 63;

/// A word over {0, 1}, packed into a u64 with the first letter as the most
/// significant bit of the `len`-bit payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Word {
    len: u8,
    bits: u64,
}

impl Word {
    /// The empty word.
    pub const EMPTY: Word = Word { len: 0, bits: 0 };

    /// Builds a word from letters (each 0 or 1).
    pub fn from_letters(letters: &[u8]) -> Self {
        assert!(letters.len() <= MAX_WORD_LEN, "word too long");
        let mut bits = 0u64;
        for &l in letters {
            debug_assert!(l <= 1);
            bits = (bits << 1) | u64::from(l);
        }
        Word { len: letters.len() as u8, bits }
    }

    /// The word `0...0` of length k.
    pub fn zeros(k: usize) -> Self {
        Word::from_letters(&vec![0u8; k])
    }

    /// The word `1...1` of length k.
    pub fn ones(k: usize) -> Self {
        Word::from_letters(&vec![1u8; k])
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Letter at position `i` (0-based from the left).
    pub fn letter(&self, i: usize) -> u8 {
        debug_assert!(i < self.len());
        ((self.bits >> (self.len() - 1 - i)) & 1) as u8
    }

    pub fn letters(&self) -> impl Iterator<Item = u8> + '_ {
        (0..self.len()).map(move |i| self.letter(i))
    }

    /// Number of 0 letters.
    pub fn count0(&self) -> usize {
        self.len() - self.count1()
    }

    /// Number of 1 letters.
    pub fn count1(&self) -> usize {
        self.bits.count_ones() as usize
    }

    /// Weighted length `2 |a|_0 + |a|_1` (Brownian-scaling grading).
    pub fn weighted_len(&self) -> usize {
        2 * self.count0() + self.count1()
    }

    /// Number of occurrences of the factor `01`.
    pub fn count01(&self) -> usize {
        (1..self.len())
            .filter(|&i| self.letter(i - 1) == 0 && self.letter(i) == 1)
            .count()
    }

    pub fn first(&self) -> Option<u8> {
        (!self.is_empty()).then(|| self.letter(0))
    }

    pub fn last(&self) -> Option<u8> {
        (!self.is_empty()).then(|| (self.bits & 1) as u8)
    }

    /// Appends a letter on the right.
    pub fn push(&self, letter: u8) -> Word {
        assert!(self.len() < MAX_WORD_LEN);
        Word { len: self.len + 1, bits: (self.bits << 1) | u64::from(letter) }
    }

    /// Drops the last `j` letters (`a - j` in suffix-removal notation).
    pub fn drop_last(&self, j: usize) -> Word {
        assert!(j <= self.len());
        Word { len: self.len - j as u8, bits: self.bits >> j }
    }

    /// Drops the first letter.
    pub fn drop_first(&self) -> Word {
        assert!(!self.is_empty());
        let len = self.len - 1;
        Word { len, bits: self.bits & ((1u64 << len) - 1) }
    }

    /// Concatenates two words.
    pub fn concat(&self, other: &Word) -> Word {
        assert!(self.len() + other.len() <= MAX_WORD_LEN);
        Word {
            len: self.len + other.len,
            bits: (self.bits << other.len) | other.bits,
        }
    }

    /// Splits into (prefix of length k, suffix).
    pub fn split(&self, k: usize) -> (Word, Word) {
        assert!(k <= self.len());
        let suffix_len = self.len() - k;
        let suffix_bits = self.bits & if suffix_len == 0 { 0 } else { (1u64 << suffix_len) - 1 };
        (
            Word { len: k as u8, bits: self.bits >> suffix_len },
            Word { len: suffix_len as u8, bits: suffix_bits },
        )
    }

    /// Inserts a letter at position `i` (0 <= i <= len).
    pub fn insert(&self, i: usize, letter: u8) -> Word {
        let (pre, post) = self.split(i);
        pre.push(letter).concat(&post)
    }

    /// Graded-lexicographic rank: the index of this word among all words
    /// sorted by (length, letters) with 0 < 1. The empty word has rank 0.
    pub fn rank(&self) -> usize {
        ((1u64 << self.len()) - 1 + self.bits) as usize
    }

    /// Inverse of [`Word::rank`].
    pub fn from_rank(rank: usize) -> Word {
        let len = (usize::BITS - (rank + 1).leading_zeros() - 1) as usize;
        let bits = (rank + 1) as u64 - (1u64 << len);
        Word { len: len as u8, bits }
    }

    /// Decomposition `a = 0^{g0} 1 0^{g1} 1 ... 1 0^{gk}` into runs of zeros
    /// separated by the `k = |a|_1` ones.
    pub fn zero_runs(&self) -> Vec<usize> {
        let mut runs = vec![0usize];
        for l in self.letters() {
            if l == 0 {
                *runs.last_mut().unwrap() += 1;
            } else {
                runs.push(0);
            }
        }
        runs
    }
}

impl Ord for Word {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.rank().cmp(&other.rank())
    }
}

impl PartialOrd for Word {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return write!(f, "e");
        }
        for l in self.letters() {
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

impl FromStr for Word {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "e" {
            return Ok(Word::EMPTY);
        }
        if s.is_empty() || s.len() > MAX_WORD_LEN {
            return Err(Error::Parse(format!("bad word `{s}`")));
        }
        let mut letters = Vec::with_capacity(s.len());
        for c in s.chars() {
            match c {
                '0' => letters.push(0),
                '1' => letters.push(1),
                _ => return Err(Error::Parse(format!("bad letter `{c}` in word `{s}`"))),
            }
        }
        Ok(Word::from_letters(&letters))
    }
}

/// All `2^(K+1) - 1` words of length <= `max_len` in graded-lex order.
pub fn enumerate_words(max_len: usize) -> Vec<Word> {
    (0..word_count(max_len)).map(Word::from_rank).collect()
}

/// Number of words of length <= `max_len`.
pub fn word_count(max_len: usize) -> usize {
    (1usize << (max_len + 1)) - 1
}

/// All words with weighted length `||a|| = k` (the level set A_k).
pub fn words_with_weight(k: usize) -> Vec<Word> {
    enumerate_words(k)
        .into_iter()
        .filter(|w| w.weighted_len() == k)
        .collect()
}

/// Polynomial in the horizon symbol T with rational coefficients,
/// stored as a power -> coefficient map.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TPoly(BTreeMap<u32, Ratio<i64>>);

impl TPoly {
    pub fn zero() -> Self {
        TPoly(BTreeMap::new())
    }

    pub fn constant(c: Ratio<i64>) -> Self {
        let mut m = BTreeMap::new();
        if !c.is_zero() {
            m.insert(0, c);
        }
        TPoly(m)
    }

    pub fn one() -> Self {
        Self::constant(Ratio::from_integer(1))
    }

    /// The monomial `c T^p`.
    pub fn monomial(p: u32, c: Ratio<i64>) -> Self {
        let mut m = BTreeMap::new();
        if !c.is_zero() {
            m.insert(p, c);
        }
        TPoly(m)
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn add_assign(&mut self, other: &TPoly) {
        for (&p, &c) in &other.0 {
            let entry = self.0.entry(p).or_insert_with(|| Ratio::from_integer(0));
            *entry += c;
            if entry.is_zero() {
                self.0.remove(&p);
            }
        }
    }

    pub fn scaled(&self, c: Ratio<i64>) -> TPoly {
        if c.is_zero() {
            return TPoly::zero();
        }
        TPoly(self.0.iter().map(|(&p, &v)| (p, v * c)).collect())
    }

    pub fn monomials(&self) -> impl Iterator<Item = (u32, Ratio<i64>)> + '_ {
        self.0.iter().map(|(&p, &c)| (p, c))
    }

    /// Evaluates at a concrete horizon.
    pub fn eval(&self, horizon: f64) -> f64 {
        self.0
            .iter()
            .map(|(&p, &c)| ratio_to_f64(c) * horizon.powi(p as i32))
            .sum()
    }
}

fn ratio_to_f64(r: Ratio<i64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

impl fmt::Display for TPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (&p, &c) in &self.0 {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match p {
                0 => write!(f, "{c}")?,
                1 => write!(f, "{c}*T")?,
                _ => write!(f, "{c}*T^{p}")?,
            }
        }
        Ok(())
    }
}

/// Formal linear combination of words with [`TPoly`] coefficients: the
/// carrier for shuffle products and basis reductions.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WordPoly {
    terms: BTreeMap<Word, TPoly>,
}

impl WordPoly {
    pub fn zero() -> Self {
        WordPoly { terms: BTreeMap::new() }
    }

    /// The single word `w` with coefficient 1.
    pub fn word(w: Word) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(w, TPoly::one());
        WordPoly { terms }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Word, &TPoly)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, w: &Word) -> TPoly {
        self.terms.get(w).cloned().unwrap_or_else(TPoly::zero)
    }

    pub fn add_term(&mut self, w: Word, c: TPoly) {
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry(w).or_insert_with(TPoly::zero);
        entry.add_assign(&c);
        if entry.is_zero() {
            self.terms.remove(&w);
        }
    }

    pub fn add_assign(&mut self, other: &WordPoly) {
        for (w, c) in &other.terms {
            self.add_term(*w, c.clone());
        }
    }

    pub fn scaled(&self, c: Ratio<i64>) -> WordPoly {
        let mut out = WordPoly::zero();
        for (w, t) in &self.terms {
            out.add_term(*w, t.scaled(c));
        }
        out
    }

    /// Sum of all coefficients evaluated at T = 1 (used for counting checks).
    pub fn coefficient_sum(&self) -> f64 {
        self.terms.values().map(|c| c.eval(1.0)).sum()
    }

    /// Bilinear extension of the word shuffle.
    pub fn shuffle(&self, other: &WordPoly) -> WordPoly {
        let mut out = WordPoly::zero();
        for (u, cu) in &self.terms {
            for (v, cv) in &other.terms {
                let base = shuffle(u, v);
                for (w, m) in &base.terms {
                    // word-shuffle coefficients are integer constants
                    let mut c = TPoly::zero();
                    for (p_u, a_u) in cu.monomials() {
                        for (p_v, a_v) in cv.monomials() {
                            for (p_m, a_m) in m.monomials() {
                                c.add_assign(&TPoly::monomial(p_u + p_v + p_m, a_u * a_v * a_m));
                            }
                        }
                    }
                    out.add_term(*w, c);
                }
            }
        }
        out
    }
}

impl fmt::Display for WordPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (w, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({c})*{w}")?;
        }
        Ok(())
    }
}

/// Shuffle product of two words: the sum over all interleavings, with
/// integer multiplicities.
pub fn shuffle(u: &Word, v: &Word) -> WordPoly {
    if u.is_empty() {
        return WordPoly::word(*v);
    }
    if v.is_empty() {
        return WordPoly::word(*u);
    }
    // (ua) sh (vb) = ((u sh vb)) a + ((ua sh v)) b
    let (u_head, a) = (u.drop_last(1), u.last().unwrap());
    let (v_head, b) = (v.drop_last(1), v.last().unwrap());
    let mut out = WordPoly::zero();
    for (w, c) in shuffle(&u_head, v).terms {
        out.add_term(w.push(a), c);
    }
    for (w, c) in shuffle(u, &v_head).terms {
        out.add_term(w.push(b), c);
    }
    out
}

/// Expresses the signature coordinate of `a` on paths of length exactly T as
/// a combination of basis coordinates: words ending in 1, plus the empty
/// word, with polynomial coefficients in T.
///
/// The recursion peels a trailing 0. With `S_b(X_T) = sum_g c_g(T) S_{g1}(X_T)`
/// already reduced, Fubini on `S_{b0}(X_T) = int_0^T S_b(X_t) dt` gives per
/// monomial `c T^p`:
///
/// ```text
/// int_0^T T'^p S_{g1}(X_T') dT'  =  T^{p+1}/(p+1) S_{g1}(X_T)
///                                   - p! * sum_{d in 0^{p+1} sh g} S_{d1}(X_T)
/// ```
///
/// using `s^{p+1} = (p+1)! S_{0...0}(X_s)` and the shuffle identity.
pub fn basis_reduce(alpha: &Word) -> WordPoly {
    match alpha.last() {
        None | Some(1) => WordPoly::word(*alpha),
        Some(_) => {
            let beta = alpha.drop_last(1);
            let reduced = basis_reduce(&beta);
            let mut out = WordPoly::zero();
            for (w, coeff) in reduced.terms() {
                for (p, a) in coeff.monomials() {
                    let integrated = a / Ratio::from_integer(i64::from(p) + 1);
                    if w.is_empty() {
                        // constant term integrates to a * T^{p+1}/(p+1)
                        out.add_term(Word::EMPTY, TPoly::monomial(p + 1, integrated));
                        continue;
                    }
                    let gamma = w.drop_last(1);
                    out.add_term(*w, TPoly::monomial(p + 1, integrated));
                    let p_factorial: i64 = (1..=i64::from(p)).product();
                    let scale = a * Ratio::from_integer(p_factorial);
                    for (delta, mult) in shuffle(&Word::zeros(p as usize + 1), &gamma).terms() {
                        out.add_term(delta.push(1), mult.scaled(-scale));
                    }
                }
            }
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str) -> Word {
        s.parse().unwrap()
    }

    #[test]
    fn enumeration_counts_and_order() {
        assert_eq!(enumerate_words(0), vec![Word::EMPTY]);
        assert_eq!(enumerate_words(1), vec![Word::EMPTY, w("0"), w("1")]);
        assert_eq!(enumerate_words(2).len(), 7);
        let all = enumerate_words(3);
        for (i, word) in all.iter().enumerate() {
            assert_eq!(word.rank(), i);
            assert_eq!(Word::from_rank(i), *word);
        }
        // graded lex: 00 < 01 < 10 < 11
        assert!(w("00") < w("01") && w("01") < w("10") && w("10") < w("11"));
    }

    #[test]
    fn weighted_length_level_sets() {
        assert_eq!(words_with_weight(0), vec![Word::EMPTY]);
        assert_eq!(words_with_weight(2), vec![w("0"), w("11")]);
        assert_eq!(words_with_weight(3), vec![w("01"), w("10"), w("111")]);
        // |A_k| follows the Fibonacci recursion
        let mut sizes = vec![];
        for k in 0..=12 {
            sizes.push(words_with_weight(k).len());
        }
        assert_eq!(sizes[0], 1);
        assert_eq!(sizes[1], 1);
        for k in 2..=12 {
            assert_eq!(sizes[k], sizes[k - 1] + sizes[k - 2], "at k = {k}");
        }
    }

    #[test]
    fn word_accessors() {
        let a = w("0110");
        assert_eq!(a.len(), 4);
        assert_eq!(a.count0(), 2);
        assert_eq!(a.count1(), 2);
        assert_eq!(a.weighted_len(), 6);
        assert_eq!(a.count01(), 1);
        assert_eq!(w("0101").count01(), 2);
        assert_eq!(a.drop_last(2), w("01"));
        assert_eq!(a.drop_first(), w("110"));
        assert_eq!(a.to_string(), "0110");
        assert_eq!(Word::EMPTY.to_string(), "e");
        assert_eq!(w("e"), Word::EMPTY);
        assert_eq!(a.zero_runs(), vec![1, 0, 1]);
        assert_eq!(w("10").zero_runs(), vec![0, 1]);
        assert_eq!(w("01").zero_runs(), vec![1, 0]);
        assert_eq!(Word::ones(3).zero_runs(), vec![0, 0, 0, 0]);
    }

    /// Brute-force shuffle: enumerates every interleaving by choosing the
    /// positions of `u` among |u| + |v| slots. Independent oracle for the
    /// recursive implementation.
    fn brute_shuffle(u: &Word, v: &Word) -> WordPoly {
        let n = u.len() + v.len();
        let mut out = WordPoly::zero();
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize != u.len() {
                continue;
            }
            let mut letters = Vec::with_capacity(n);
            let (mut iu, mut iv) = (0, 0);
            for pos in 0..n {
                if mask >> pos & 1 == 1 {
                    letters.push(u.letter(iu));
                    iu += 1;
                } else {
                    letters.push(v.letter(iv));
                    iv += 1;
                }
            }
            out.add_term(Word::from_letters(&letters), TPoly::one());
        }
        out
    }

    #[test]
    fn shuffle_examples() {
        let s = shuffle(&w("0"), &w("1"));
        let mut expect = WordPoly::word(w("01"));
        expect.add_assign(&WordPoly::word(w("10")));
        assert_eq!(s, expect);
        assert_eq!(shuffle(&Word::EMPTY, &w("011")), WordPoly::word(w("011")));
        let s11 = shuffle(&w("1"), &w("1"));
        assert_eq!(s11.coefficient(&w("11")), TPoly::constant(Ratio::from_integer(2)));
    }

    #[test]
    fn shuffle_matches_brute_force() {
        let words: Vec<Word> = enumerate_words(3);
        for u in &words {
            for v in &words {
                assert_eq!(shuffle(u, v), brute_shuffle(u, v), "u={u} v={v}");
            }
        }
    }

    #[test]
    fn shuffle_commutative_associative() {
        let words = enumerate_words(3);
        for u in &words {
            for v in &words {
                assert_eq!(shuffle(u, v), shuffle(v, u));
            }
        }
        // associativity over length <= 2 triples of nonempty words
        let small: Vec<Word> = enumerate_words(2);
        for u in &small {
            for v in &small {
                for t in &small {
                    let left = shuffle(u, v).shuffle(&WordPoly::word(*t));
                    let right = WordPoly::word(*u).shuffle(&shuffle(v, t));
                    assert_eq!(left, right, "u={u} v={v} t={t}");
                }
            }
        }
    }

    #[test]
    fn shuffle_coefficient_sum_is_binomial() {
        let words = enumerate_words(3);
        for u in &words {
            for v in &words {
                let total = shuffle(u, v).coefficient_sum();
                assert_eq!(total, crate::util::binomial(u.len() + v.len(), u.len()));
            }
        }
    }

    #[test]
    fn basis_reduce_examples() {
        // S_0(X_T) = T
        let r = basis_reduce(&w("0"));
        assert_eq!(r.num_terms(), 1);
        assert_eq!(r.coefficient(&Word::EMPTY), TPoly::monomial(1, Ratio::from_integer(1)));
        // S_00(X_T) = T^2/2
        let r = basis_reduce(&w("00"));
        assert_eq!(r.coefficient(&Word::EMPTY), TPoly::monomial(2, Ratio::new(1, 2)));
        // words ending in 1 are fixed points
        assert_eq!(basis_reduce(&w("011")), WordPoly::word(w("011")));
        // S_10 = T S_1 - S_01
        let r = basis_reduce(&w("10"));
        assert_eq!(r.coefficient(&w("1")), TPoly::monomial(1, Ratio::from_integer(1)));
        assert_eq!(r.coefficient(&w("01")), TPoly::constant(Ratio::from_integer(-1)));
        assert_eq!(r.num_terms(), 2);
    }

    #[test]
    fn basis_reduce_support_ends_in_one() {
        for word in enumerate_words(5) {
            let r = basis_reduce(&word);
            for (supp, _) in r.terms() {
                assert!(
                    supp.is_empty() || supp.last() == Some(1),
                    "reduction of {word} contains {supp}"
                );
            }
        }
    }

    #[test]
    fn word_parse_rejects_garbage() {
        assert!("01x".parse::<Word>().is_err());
        assert!("".parse::<Word>().is_err());
    }
}
