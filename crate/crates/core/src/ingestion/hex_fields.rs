//! Serde helpers for the fixture format's 0x-prefixed hex fields.
//!
//! Every numeric field in fixture records travels as a `"0x..."` string, never
//! as a JSON number, so 256-bit-era magnitudes round-trip without precision
//! loss in any JSON tooling. Parsers reject values that overflow the target
//! width rather than truncating.

use serde::{Deserialize, Deserializer, Serializer};

fn strip_prefix<E: serde::de::Error>(s: &str) -> Result<&str, E> {
    let body = s
        .strip_prefix("0x")
        .ok_or_else(|| E::custom(format!("expected 0x-prefixed hex, got {s:?}")))?;
    if body.is_empty() {
        return Err(E::custom("empty hex value"));
    }
    Ok(body)
}

macro_rules! hex_uint_module {
    ($name:ident, $ty:ty) => {
        pub mod $name {
            use super::*;

            pub fn serialize<S: Serializer>(v: &$ty, ser: S) -> Result<S::Ok, S::Error> {
                ser.collect_str(&format_args!("0x{v:x}"))
            }

            pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<$ty, D::Error> {
                let s = String::deserialize(de)?;
                let body = strip_prefix::<D::Error>(&s)?;
                <$ty>::from_str_radix(body, 16)
                    .map_err(|e| serde::de::Error::custom(format!("bad hex number {s:?}: {e}")))
            }
        }
    };
}

hex_uint_module!(hex_u32, u32);
hex_uint_module!(hex_u64, u64);
hex_uint_module!(hex_u128, u128);

/// `Vec<u8>` as `"0x..."`; the empty byte string is `"0x"`.
pub mod hex_bytes {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[u8], ser: S) -> Result<S::Ok, S::Error> {
        ser.collect_str(&format_args!("0x{}", hex::encode(v)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(de)?;
        let body = s.strip_prefix("0x").ok_or_else(|| {
            serde::de::Error::custom(format!("expected 0x-prefixed hex, got {s:?}"))
        })?;
        hex::decode(body).map_err(|e| serde::de::Error::custom(format!("bad hex bytes {s:?}: {e}")))
    }
}

/// `Vec<[u8; 32]>` as a list of 64-digit hex strings (log topics).
pub mod hex_words {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[[u8; 32]], ser: S) -> Result<S::Ok, S::Error> {
        ser.collect_seq(v.iter().map(|w| format!("0x{}", hex::encode(w))))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Vec<[u8; 32]>, D::Error> {
        let raw: Vec<String> = Vec::deserialize(de)?;
        raw.into_iter()
            .map(|s| {
                let body = s.strip_prefix("0x").ok_or_else(|| {
                    serde::de::Error::custom(format!("expected 0x-prefixed topic, got {s:?}"))
                })?;
                let mut word = [0u8; 32];
                if body.len() != 64 {
                    return Err(serde::de::Error::custom(format!(
                        "topic must be 32 bytes, got {s:?}"
                    )));
                }
                hex::decode_to_slice(body, &mut word)
                    .map_err(|e| serde::de::Error::custom(format!("bad topic {s:?}: {e}")))?;
                Ok(word)
            })
            .collect()
    }
}
