use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Number of decimal digits in a barcode key.
pub const BARCODE_LEN: usize = 14;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BarcodeError {
    #[error("barcode must be exactly {BARCODE_LEN} digits, got {0} characters")]
    Length(usize),
    #[error("barcode contains non-digit byte {byte:#04x} at position {position}")]
    NonDigit { position: usize, byte: u8 },
}

/// A 14-digit numeric barcode key.
///
/// Digits 1-4 form the location and digits 7-14 the destination; both are
/// views into the same key.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Barcode([u8; BARCODE_LEN]);

impl Barcode {
    pub fn parse(s: &str) -> Result<Self, BarcodeError> {
        Self::from_bytes(s.as_bytes())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, BarcodeError> {
        if bytes.len() != BARCODE_LEN {
            return Err(BarcodeError::Length(bytes.len()));
        }
        let mut digits = [0u8; BARCODE_LEN];
        for (position, &byte) in bytes.iter().enumerate() {
            if !byte.is_ascii_digit() {
                return Err(BarcodeError::NonDigit { position, byte });
            }
            digits[position] = byte;
        }
        Ok(Barcode(digits))
    }

    /// Builds a key from its numeric value; values above 10^14 - 1 wrap.
    pub fn from_u64(value: u64) -> Self {
        let mut digits = [b'0'; BARCODE_LEN];
        let mut v = value % 100_000_000_000_000;
        for slot in digits.iter_mut().rev() {
            *slot = b'0' + (v % 10) as u8;
            v /= 10;
        }
        Barcode(digits)
    }

    pub fn as_str(&self) -> &str {
        // Only ASCII digits are ever stored.
        std::str::from_utf8(&self.0).expect("barcode digits are ASCII")
    }

    pub fn location(&self) -> &str {
        &self.as_str()[0..4]
    }

    pub fn destination(&self) -> &str {
        &self.as_str()[6..14]
    }
}

impl fmt::Display for Barcode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Debug for Barcode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Barcode({})", self.as_str())
    }
}

impl FromStr for Barcode {
    type Err = BarcodeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Barcode::parse(s)
    }
}

impl Serialize for Barcode {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Barcode {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Barcode::parse(&s).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subfields_follow_positions() {
        let b = Barcode::parse("12345678901234").unwrap();
        assert_eq!(b.location(), "1234");
        assert_eq!(b.destination(), "78901234");
    }

    #[test]
    fn rejects_malformed_keys() {
        assert_eq!(Barcode::parse("123"), Err(BarcodeError::Length(3)));
        assert_eq!(
            Barcode::parse("1234567890123x"),
            Err(BarcodeError::NonDigit {
                position: 13,
                byte: b'x'
            })
        );
        assert!(Barcode::parse("").is_err());
    }

    #[test]
    fn from_u64_zero_pads() {
        assert_eq!(Barcode::from_u64(42).as_str(), "00000000000042");
        assert_eq!(
            Barcode::from_u64(99_999_999_999_999).as_str(),
            "99999999999999"
        );
    }
}
