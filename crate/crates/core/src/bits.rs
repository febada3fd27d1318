//! Bit-string helpers. Strings list bit 0 first: `"001"` means `b0=0, b1=0, b2=1`.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BitsError {
    #[error("invalid character `{0}` in bit string")]
    BadChar(char),
    #[error("hex value `{0}` does not fit in {1} bits")]
    TooWide(String, usize),
}

pub fn parse_bits(s: &str) -> Result<Vec<bool>, BitsError> {
    s.chars()
        .filter(|c| !c.is_whitespace() && *c != '_')
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            other => Err(BitsError::BadChar(other)),
        })
        .collect()
}

/// Accepts either a bit string or `0x`-prefixed hex, where hex bit `i` of the
/// integer value becomes element `i`.
pub fn parse_bits_or_hex(s: &str, width: usize) -> Result<Vec<bool>, BitsError> {
    let s = s.trim();
    let Some(hex) = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) else {
        return parse_bits(s);
    };
    let mut out = vec![false; width];
    for (nibble_idx, c) in hex.chars().rev().filter(|c| *c != '_').enumerate() {
        let v = c.to_digit(16).ok_or(BitsError::BadChar(c))?;
        for b in 0..4 {
            if v >> b & 1 == 1 {
                let pos = nibble_idx * 4 + b;
                if pos >= width {
                    return Err(BitsError::TooWide(s.to_string(), width));
                }
                out[pos] = true;
            }
        }
    }
    Ok(out)
}

pub fn format_bits(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

/// Bit `i` of `value` becomes element `i`.
pub fn bits_of(value: u64, width: usize) -> Vec<bool> {
    (0..width).map(|i| value >> i & 1 == 1).collect()
}

pub fn value_of(bits: &[bool]) -> u64 {
    bits.iter()
        .enumerate()
        .fold(0, |acc, (i, &b)| acc | (u64::from(b) << i))
}

/// Lane patterns for exhaustive enumeration: word `i` holds bit `i` of the
/// lane index offset by `base`, for the 64 consecutive values starting at `base`.
pub fn enumeration_words(width: usize, base: u64) -> Vec<u64> {
    (0..width)
        .map(|i| {
            (0..64u64).fold(0u64, |acc, lane| acc | (((base + lane) >> i & 1) << lane))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bit_strings() {
        assert_eq!(parse_bits("0 1_1").unwrap(), vec![false, true, true]);
        assert_eq!(format_bits(&[true, false]), "10");
        assert!(parse_bits("012").is_err());
        assert_eq!(bits_of(0b100, 3), vec![false, false, true]);
        assert_eq!(value_of(&[false, false, true]), 4);
    }

    #[test]
    fn hex_is_little_endian_by_value() {
        assert_eq!(parse_bits_or_hex("0x4", 3).unwrap(), vec![false, false, true]);
        assert!(parse_bits_or_hex("0x1", 8).unwrap()[0]);
        assert!(parse_bits_or_hex("0x10", 3).is_err());
        assert_eq!(parse_bits_or_hex("101", 3).unwrap(), vec![true, false, true]);
    }

    #[test]
    fn enumeration_lanes() {
        let w = enumeration_words(3, 0);
        for lane in 0..8u64 {
            let v: u64 = (0..3).map(|i| (w[i] >> lane & 1) << i).sum();
            assert_eq!(v, lane);
        }
    }
}
