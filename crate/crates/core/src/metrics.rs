//! Deviation functions, simulation lower bounds and the exhaustive error oracle.

use std::fmt;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::aig::AigNetwork;
use crate::error::{Error, Result};

/// Which deviation function bounds the error.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    /// Absolute difference of the outputs read as unsigned integers, `pos[0]` least significant.
    MaxEd,
    /// Number of differing output bits.
    MaxHd,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::MaxEd => "maxed",
            Metric::MaxHd => "maxhd",
        })
    }
}

/// A metric together with the largest tolerated deviation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorSpec {
    pub metric: Metric,
    #[serde(with = "biguint_string")]
    pub bound: BigUint,
}

impl ErrorSpec {
    pub fn new(metric: Metric, bound: impl Into<BigUint>) -> Self {
        ErrorSpec {
            metric,
            bound: bound.into(),
        }
    }

    pub fn max_ed(bound: u64) -> Self {
        Self::new(Metric::MaxEd, bound)
    }

    pub fn max_hd(bound: u64) -> Self {
        Self::new(Metric::MaxHd, bound)
    }

    /// True when the deviation breaks the bound.
    pub fn violated_by(&self, deviation: &BigUint) -> bool {
        deviation > &self.bound
    }

    /// Largest deviation the metric can produce over `num_pos` outputs.
    pub fn max_possible(&self, num_pos: usize) -> BigUint {
        match self.metric {
            Metric::MaxEd => (BigUint::one() << num_pos) - 1u32,
            Metric::MaxHd => BigUint::from(num_pos),
        }
    }
}

/// Serializes big integers as decimal strings so JSON consumers never lose precision.
pub mod biguint_string {
    use num_bigint::BigUint;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &BigUint, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_str_radix(10))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigUint, D::Error> {
        let s = String::deserialize(d)?;
        BigUint::parse_bytes(s.as_bytes(), 10).ok_or_else(|| D::Error::custom("bad integer"))
    }
}

/// Deviation between two output words.
pub fn deviation(spec: &ErrorSpec, y: &[bool], yhat: &[bool]) -> Result<BigUint> {
    if y.len() != yhat.len() {
        return Err(Error::WidthMismatch(y.len(), yhat.len()));
    }
    Ok(match spec.metric {
        Metric::MaxEd => {
            let a = word_to_int(y);
            let b = word_to_int(yhat);
            if a >= b {
                a - b
            } else {
                b - a
            }
        }
        Metric::MaxHd => BigUint::from(y.iter().zip(yhat).filter(|(a, b)| a != b).count()),
    })
}

/// `sum_k 2^k * bits[k]`.
pub fn word_to_int(bits: &[bool]) -> BigUint {
    let mut v = BigUint::zero();
    for (k, &b) in bits.iter().enumerate() {
        if b {
            v.set_bit(k as u64, true);
        }
    }
    v
}

/// Maximum deviation over the pattern columns selected by `care`.
///
/// `golden` and `approx` hold one packed bitvector per PO; `care` has one mask
/// word per packed word.
pub fn lb_max_error(
    golden: &[Vec<u64>],
    approx: &[Vec<u64>],
    spec: &ErrorSpec,
    care: &[u64],
) -> BigUint {
    assert_eq!(golden.len(), approx.len(), "PO count mismatch");
    let o = golden.len();
    if o == 0 {
        return BigUint::zero();
    }
    match spec.metric {
        Metric::MaxHd => {
            let mut best = 0usize;
            for_each_differing_column(golden, approx, care, |w, bit| {
                let mut hd = 0;
                for k in 0..o {
                    hd += ((golden[k][w] ^ approx[k][w]) >> bit & 1) as usize;
                }
                best = best.max(hd);
            });
            BigUint::from(best)
        }
        Metric::MaxEd if o <= 127 => {
            let mut best = 0u128;
            for_each_differing_column(golden, approx, care, |w, bit| {
                let (mut a, mut b) = (0u128, 0u128);
                for k in 0..o {
                    a |= ((golden[k][w] >> bit & 1) as u128) << k;
                    b |= ((approx[k][w] >> bit & 1) as u128) << k;
                }
                best = best.max(a.abs_diff(b));
            });
            BigUint::from(best)
        }
        Metric::MaxEd => {
            let mut best = BigUint::zero();
            for_each_differing_column(golden, approx, care, |w, bit| {
                let y: Vec<bool> = (0..o).map(|k| golden[k][w] >> bit & 1 == 1).collect();
                let yh: Vec<bool> = (0..o).map(|k| approx[k][w] >> bit & 1 == 1).collect();
                let d = deviation(spec, &y, &yh).expect("equal widths");
                if d > best {
                    best = d;
                }
            });
            best
        }
    }
}

fn for_each_differing_column(
    golden: &[Vec<u64>],
    approx: &[Vec<u64>],
    care: &[u64],
    mut f: impl FnMut(usize, u32),
) {
    for (w, &mask) in care.iter().enumerate() {
        if mask == 0 {
            continue;
        }
        let mut diff = 0u64;
        for (g, a) in golden.iter().zip(approx) {
            diff |= g[w] ^ a[w];
        }
        diff &= mask;
        while diff != 0 {
            let bit = diff.trailing_zeros();
            f(w, bit);
            diff &= diff - 1;
        }
    }
}

/// Default limit on PI count for exhaustive enumeration.
pub const DEFAULT_EXHAUSTIVE_LIMIT: usize = 20;

/// Exact maximum error by enumerating every input pattern with scalar evaluation.
pub fn brute_force_max_error(
    golden: &AigNetwork,
    approx: &AigNetwork,
    spec: &ErrorSpec,
    limit: usize,
) -> Result<BigUint> {
    check_interfaces(golden, approx)?;
    let n = golden.num_pis();
    if n > limit {
        return Err(Error::ExhaustiveLimit { num_pis: n, limit });
    }
    let mut best = BigUint::zero();
    let mut bits = vec![false; n];
    for x in 0..1u64 << n {
        for (i, b) in bits.iter_mut().enumerate() {
            *b = x >> i & 1 == 1;
        }
        let d = deviation(spec, &golden.eval(&bits), &approx.eval(&bits))?;
        if d > best {
            best = d;
        }
    }
    Ok(best)
}

pub(crate) fn check_interfaces(golden: &AigNetwork, approx: &AigNetwork) -> Result<()> {
    if golden.num_pis() != approx.num_pis() {
        return Err(Error::PiMismatch {
            expected: golden.num_pis(),
            found: approx.num_pis(),
        });
    }
    if golden.num_pos() != approx.num_pos() {
        return Err(Error::PoMismatch {
            expected: golden.num_pos(),
            found: approx.num_pos(),
        });
    }
    Ok(())
}

/// Parses a bound given in decimal or scientific notation (`7131`, `5.8E+07`).
/// The value must be a nonnegative integer.
pub fn parse_bound(text: &str) -> Result<BigUint> {
    let bad = || Error::Bound(text.to_string());
    let s = text.trim();
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(p) => {
            let e = &s[p + 1..];
            let e = e.strip_prefix('+').unwrap_or(e);
            (&s[..p], e.parse::<i64>().map_err(|_| bad())?)
        }
        None => (s, 0),
    };
    let mantissa = mantissa.strip_prefix('+').unwrap_or(mantissa);
    let (int_part, frac_part) = match mantissa.split_once('.') {
        Some((a, b)) => (a, b),
        None => (mantissa, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let digits = format!("{int_part}{frac_part}");
    let scale = exp - frac_part.len() as i64;
    let mut value = BigUint::parse_bytes(digits.as_bytes(), 10).ok_or_else(bad)?;
    if scale >= 0 {
        value *= BigUint::from(10u32).pow(scale as u32);
    } else {
        let div = BigUint::from(10u32).pow((-scale) as u32);
        if !(&value % &div).is_zero() {
            return Err(bad());
        }
        value /= div;
    }
    Ok(value)
}

/// `floor(2^(num_pos / divisor))`, computed exactly as an integer root.
pub fn frac_bound(num_pos: usize, divisor: u32) -> BigUint {
    assert!(divisor > 0);
    (BigUint::one() << num_pos).nth_root(divisor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aig::{apply_lac, Literal};
    use crate::lac::{Lac, Replacement, Target};
    use crate::testbench;

    fn b(v: u64) -> BigUint {
        BigUint::from(v)
    }

    #[test]
    fn deviation_examples() {
        let ed = ErrorSpec::max_ed(0);
        // y = (y0=0, y1=1) is 2; y' = (1, 1) is 3
        assert_eq!(deviation(&ed, &[false, true], &[true, true]).unwrap(), b(1));
        assert_eq!(deviation(&ed, &[true, false, true], &[true, false, true]).unwrap(), b(0));
        let hd = ErrorSpec::max_hd(0);
        assert_eq!(deviation(&hd, &[true, false, true], &[false, true, false]).unwrap(), b(3));
        assert!(matches!(
            deviation(&hd, &[true], &[true, false]),
            Err(Error::WidthMismatch(1, 2))
        ));
    }

    #[test]
    fn wide_words_do_not_overflow() {
        let ed = ErrorSpec::max_ed(0);
        let mut y = vec![false; 200];
        y[199] = true;
        let d = deviation(&ed, &y, &vec![false; 200]).unwrap();
        assert_eq!(d, BigUint::one() << 199);
    }

    fn pack(cols: &[u64]) -> Vec<Vec<u64>> {
        // cols[k] bits, one word
        cols.iter().map(|&c| vec![c]).collect()
    }

    #[test]
    fn lb_examples() {
        let ed = ErrorSpec::max_ed(0);
        let g = pack(&[0b0110, 0b1000]);
        assert_eq!(lb_max_error(&g, &g, &ed, &[0b1111]), b(0));
        // half adder vs constant-zero carry output, columns 00,10,01,11
        let a = pack(&[0b0110, 0b0000]);
        assert_eq!(lb_max_error(&g, &a, &ed, &[0b1111]), b(2));
        assert_eq!(lb_max_error(&g, &a, &ed, &[0b0111]), b(0));
        let hd = ErrorSpec::max_hd(0);
        let a = pack(&[0b1001, 0b0001]);
        assert_eq!(lb_max_error(&g, &a, &hd, &[0b1111]), b(2));
    }

    #[test]
    fn lb_wide_path_matches_narrow() {
        let ed = ErrorSpec::max_ed(0);
        let g: Vec<Vec<u64>> = (0..130).map(|k| vec![if k == 129 { 1 } else { 0 }]).collect();
        let a: Vec<Vec<u64>> = vec![vec![0]; 130];
        assert_eq!(lb_max_error(&g, &a, &ed, &[1]), BigUint::one() << 129);
    }

    #[test]
    fn brute_force_examples() {
        let ha = testbench::half_adder().network;
        let ed = ErrorSpec::max_ed(0);
        assert_eq!(brute_force_max_error(&ha, &ha, &ed, 20).unwrap(), b(0));
        let zero = AigNetwork::new(2, vec![], vec![Literal::FALSE, Literal::FALSE]).unwrap();
        assert_eq!(brute_force_max_error(&ha, &zero, &ed, 20).unwrap(), b(2));
        let sum0 = apply_lac(&ha, &Lac::new(Target::Po(0), Replacement::Const0)).unwrap();
        assert_eq!(brute_force_max_error(&ha, &sum0, &ed, 20).unwrap(), b(1));
        assert!(matches!(
            brute_force_max_error(&ha, &ha, &ed, 1),
            Err(Error::ExhaustiveLimit { .. })
        ));
    }

    #[test]
    fn bound_parsing() {
        assert_eq!(parse_bound("7131").unwrap(), b(7131));
        assert_eq!(parse_bound("5.8E+07").unwrap(), b(58_000_000));
        assert_eq!(parse_bound("1e3").unwrap(), b(1000));
        assert_eq!(parse_bound("0").unwrap(), b(0));
        assert!(parse_bound("1.5").is_err());
        assert!(parse_bound("-3").is_err());
        assert!(parse_bound("abc").is_err());
        assert!(parse_bound("").is_err());
    }

    #[test]
    fn fractional_bounds() {
        // add8 has 9 outputs: bounds 1 and 3
        assert_eq!(frac_bound(9, 10), b(1));
        assert_eq!(frac_bound(9, 5), b(3));
        // mult8 has 16 outputs: 2^1.6 = 3.03, 2^3.2 = 9.19
        assert_eq!(frac_bound(16, 10), b(3));
        assert_eq!(frac_bound(16, 5), b(9));
        // mult32: 2^6.4 = 84.4, 2^12.8 = 7131.6
        assert_eq!(frac_bound(64, 10), b(84));
        assert_eq!(frac_bound(64, 5), b(7131));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn symmetric_and_zero_iff_equal(y in proptest::collection::vec(any::<bool>(), 1..80),
                                            flips in proptest::collection::vec(any::<bool>(), 80)) {
                let yh: Vec<bool> = y.iter().zip(&flips).map(|(a, f)| a ^ f).collect();
                for spec in [ErrorSpec::max_ed(0), ErrorSpec::max_hd(0)] {
                    let d1 = deviation(&spec, &y, &yh).unwrap();
                    let d2 = deviation(&spec, &yh, &y).unwrap();
                    prop_assert_eq!(&d1, &d2);
                    prop_assert_eq!(d1.is_zero(), y == yh);
                }
            }

            #[test]
            fn ed_triangle(a in proptest::collection::vec(any::<bool>(), 70),
                           b_ in proptest::collection::vec(any::<bool>(), 70),
                           c in proptest::collection::vec(any::<bool>(), 70)) {
                let ed = ErrorSpec::max_ed(0);
                let ac = deviation(&ed, &a, &c).unwrap();
                let ab = deviation(&ed, &a, &b_).unwrap();
                let bc = deviation(&ed, &b_, &c).unwrap();
                prop_assert!(ac <= ab + bc);
            }
        }
    }
}
