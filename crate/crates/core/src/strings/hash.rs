//! Character-set hash bitmaps: the fallback encoding for strings that have
//! no dictionary entry.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// FNV-1a over the UTF-8 bytes of one character.
pub fn char_hash(c: char) -> u64 {
    let mut buf = [0u8; 4];
    c.encode_utf8(&mut buf)
        .bytes()
        .fold(FNV_OFFSET, |h, b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

/// Sets bit `hash(c) % len` for every character `c` of `s`.
///
/// The result depends only on the set of characters, not their order or
/// multiplicity.
pub fn hash_bitmap(s: &str, len: usize) -> Vec<f32> {
    assert!(len >= 1, "bitmap length must be positive");
    let mut bits = vec![0.0; len];
    for c in s.chars() {
        bits[(char_hash(c) % len as u64) as usize] = 1.0;
    }
    bits
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_string_is_zero() {
        assert!(hash_bitmap("", 64).iter().all(|&b| b == 0.0));
    }

    #[test]
    fn order_and_multiplicity_free() {
        assert_eq!(hash_bitmap("ab", 64), hash_bitmap("ba", 64));
        assert_eq!(hash_bitmap("ab", 64), hash_bitmap("aab", 64));
    }

    #[test]
    fn single_bit_width() {
        assert_eq!(hash_bitmap("anything", 1), vec![1.0]);
    }

    proptest! {
        #[test]
        fn monotone_in_character_set(a in "[a-zA-Z0-9 ()-]{0,12}", b in "[a-zA-Z0-9 ()-]{0,12}") {
            let sup = format!("{a}{b}");
            let small = hash_bitmap(&a, 61);
            let big = hash_bitmap(&sup, 61);
            for (x, y) in small.iter().zip(&big) {
                // bitmap(s1) AND bitmap(s2) == bitmap(s1)
                prop_assert_eq!(x * y, *x);
            }
        }
    }
}
