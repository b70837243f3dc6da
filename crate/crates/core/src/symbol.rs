//! Fixed-length binary payloads with XOR composition.
//!
//! Every symbol in a session has the same byte length; the only arithmetic
//! the protocol ever needs is element-wise XOR over those payloads. One
//! symbol-XOR is the unit in which all operation counts are reported.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SymbolError {
    #[error("symbol length mismatch: {left} vs {right} bytes")]
    LengthMismatch { left: usize, right: usize },
}

/// A fixed-length block of octets, the unit transmitted over the channel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Symbol(Vec<u8>);

impl Symbol {
    pub fn from_bytes(bytes: impl Into<Vec<u8>>) -> Self {
        Symbol(bytes.into())
    }

    /// The all-zero symbol of the given length (the XOR identity).
    pub fn zero(len: usize) -> Self {
        Symbol(vec![0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&b| b == 0)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }
}

/// Element-wise XOR of two equal-length symbols.
pub fn xor(a: &Symbol, b: &Symbol) -> Result<Symbol, SymbolError> {
    check_lengths(a, b)?;
    let bytes = a
        .as_bytes()
        .iter()
        .zip(b.as_bytes())
        .map(|(x, y)| x ^ y)
        .collect();
    Ok(Symbol(bytes))
}

/// `target ^= source`, charging exactly one symbol-XOR to `counter`.
///
/// All protocol code funnels payload work through this so that operation
/// counts are unambiguous: one call, one counted symbol-XOR.
pub fn xor_accumulate(
    target: &mut Symbol,
    source: &Symbol,
    counter: &mut u64,
) -> Result<(), SymbolError> {
    check_lengths(target, source)?;
    for (t, s) in target.0.iter_mut().zip(source.as_bytes()) {
        *t ^= s;
    }
    *counter += 1;
    Ok(())
}

fn check_lengths(a: &Symbol, b: &Symbol) -> Result<(), SymbolError> {
    if a.len() != b.len() {
        return Err(SymbolError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn xor_with_zero_is_identity() {
        let s = Symbol::from_bytes([0xde, 0xad]);
        assert_eq!(xor(&Symbol::zero(2), &s).unwrap(), s);
    }

    #[test]
    fn xor_with_self_is_zero() {
        let s = Symbol::from_bytes([0xde, 0xad]);
        assert_eq!(xor(&s, &s).unwrap(), Symbol::zero(2));
    }

    #[test]
    fn xor_single_byte_truth_table_case() {
        let a = Symbol::from_bytes([0xa5]);
        let b = Symbol::from_bytes([0x5a]);
        assert_eq!(xor(&a, &b).unwrap(), Symbol::from_bytes([0xff]));
    }

    #[test]
    fn xor_rejects_length_mismatch() {
        let a = Symbol::from_bytes([0x00]);
        let b = Symbol::from_bytes([0x00, 0x01]);
        assert_eq!(
            xor(&a, &b),
            Err(SymbolError::LengthMismatch { left: 1, right: 2 })
        );
    }

    #[test]
    fn accumulate_zero_keeps_symbol_and_counts_once() {
        let mut s = Symbol::from_bytes([0x42]);
        let mut counter = 0;
        xor_accumulate(&mut s, &Symbol::zero(1), &mut counter).unwrap();
        assert_eq!(s, Symbol::from_bytes([0x42]));
        assert_eq!(counter, 1);
    }

    #[test]
    fn accumulate_self_zeroes_and_counts_once() {
        let mut s = Symbol::from_bytes([0x42]);
        let src = s.clone();
        let mut counter = 0;
        xor_accumulate(&mut s, &src, &mut counter).unwrap();
        assert!(s.is_zero());
        assert_eq!(counter, 1);
    }

    #[test]
    fn counter_is_linear_in_accumulations() {
        let mut s = Symbol::zero(4);
        let src = Symbol::from_bytes([1, 2, 3, 4]);
        let mut counter = 0;
        for _ in 0..3 {
            xor_accumulate(&mut s, &src, &mut counter).unwrap();
        }
        assert_eq!(counter, 3);
    }

    #[test]
    fn accumulate_rejects_length_mismatch() {
        let mut s = Symbol::zero(2);
        let mut counter = 0;
        let err = xor_accumulate(&mut s, &Symbol::zero(3), &mut counter).unwrap_err();
        assert_eq!(err, SymbolError::LengthMismatch { left: 2, right: 3 });
        assert_eq!(counter, 0);
    }

    proptest! {
        #[test]
        fn xor_commutes(a in proptest::collection::vec(any::<u8>(), 8),
                        b in proptest::collection::vec(any::<u8>(), 8)) {
            let a = Symbol::from_bytes(a);
            let b = Symbol::from_bytes(b);
            prop_assert_eq!(xor(&a, &b).unwrap(), xor(&b, &a).unwrap());
        }

        #[test]
        fn xor_associates(a in proptest::collection::vec(any::<u8>(), 8),
                          b in proptest::collection::vec(any::<u8>(), 8),
                          c in proptest::collection::vec(any::<u8>(), 8)) {
            let a = Symbol::from_bytes(a);
            let b = Symbol::from_bytes(b);
            let c = Symbol::from_bytes(c);
            let left = xor(&xor(&a, &b).unwrap(), &c).unwrap();
            let right = xor(&a, &xor(&b, &c).unwrap()).unwrap();
            prop_assert_eq!(left, right);
        }

        #[test]
        fn xor_self_inverse(a in proptest::collection::vec(any::<u8>(), 8)) {
            let a = Symbol::from_bytes(a);
            prop_assert!(xor(&a, &a).unwrap().is_zero());
        }
    }
}
