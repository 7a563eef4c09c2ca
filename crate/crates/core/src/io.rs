//! File-format helpers shared by every module: lossless hex-float encoding,
//! the `"neg_inf"` coordinate sentinel, JSONL streams, atomic writes and
//! content digests.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::{DeserializeOwned, Error as DeError};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::Vec3;

/// Encodes an `f64` as `0x` followed by the 16 hex digits of its IEEE-754 bits.
pub fn f64_to_hex(v: f64) -> String {
    format!("0x{:016x}", v.to_bits())
}

pub fn f64_from_hex(s: &str) -> Result<f64, String> {
    let digits = s
        .strip_prefix("0x")
        .ok_or_else(|| format!("hex float must start with 0x: {s:?}"))?;
    u64::from_str_radix(digits, 16)
        .map(f64::from_bits)
        .map_err(|e| format!("bad hex float {s:?}: {e}"))
}

/// A vector of reals stored as hex-encoded bit patterns, so that JSON
/// round trips are bit-exact.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct HexVec(pub Vec<f64>);

impl Serialize for HexVec {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(self.0.iter().map(|v| f64_to_hex(*v)))
    }
}

impl<'de> Deserialize<'de> for HexVec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = Vec::<String>::deserialize(d)?;
        raw.iter()
            .map(|s| f64_from_hex(s).map_err(D::Error::custom))
            .collect::<Result<Vec<_>, _>>()
            .map(HexVec)
    }
}

/// Named hex vectors, used for normalization statistics stored next to a
/// model's parameters.
pub type HexMap = BTreeMap<String, HexVec>;

/// `#[serde(with = "hex_f64")]` for a single bit-exact real.
pub mod hex_f64 {
    use super::*;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&f64_to_hex(*v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        let raw = String::deserialize(d)?;
        f64_from_hex(&raw).map_err(D::Error::custom)
    }
}

/// A coordinate that is either a finite number or the string `"neg_inf"`.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum Coord {
    Num(f64),
    Tag(String),
}

impl Coord {
    fn from_f64(v: f64) -> Coord {
        if v == f64::NEG_INFINITY {
            Coord::Tag("neg_inf".into())
        } else {
            Coord::Num(v)
        }
    }

    fn into_f64(self) -> Result<f64, String> {
        match self {
            Coord::Num(v) => Ok(v),
            Coord::Tag(t) if t == "neg_inf" => Ok(f64::NEG_INFINITY),
            Coord::Tag(t) => Err(format!("unknown coordinate tag {t:?}")),
        }
    }
}

/// `#[serde(with = "sentinel_vec3")]`: a 3-vector whose components may be
/// minus infinity (the "no object" location), written as `"neg_inf"`.
pub mod sentinel_vec3 {
    use super::*;

    pub fn serialize<S: Serializer>(v: &Vec3, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|c| Coord::from_f64(*c)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec3, D::Error> {
        let raw = <[Coord; 3]>::deserialize(d)?;
        let mut out = [0.0; 3];
        for (o, c) in out.iter_mut().zip(raw) {
            *o = c.into_f64().map_err(D::Error::custom)?;
        }
        Ok(Vec3::new(out[0], out[1], out[2]))
    }
}

/// Writes `bytes` to `path` through a temporary sibling and a rename, so
/// readers never observe a half-written file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_digest(path: &Path) -> std::io::Result<String> {
    Ok(sha256_hex(&fs::read(path)?))
}

/// Writes a header record followed by one record per line.
pub fn write_jsonl<H: Serialize, R: Serialize>(
    path: &Path,
    header: &H,
    records: &[R],
) -> Result<(), serde_json::Error> {
    let mut buf = Vec::new();
    {
        let mut w = BufWriter::new(&mut buf);
        serde_json::to_writer(&mut w, header)?;
        w.write_all(b"\n").map_err(serde_json::Error::io)?;
        for r in records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n").map_err(serde_json::Error::io)?;
        }
        w.flush().map_err(serde_json::Error::io)?;
    }
    write_atomic(path, &buf).map_err(serde_json::Error::io)
}

/// Reads a header-then-records JSONL file. Blank lines are skipped.
pub fn read_jsonl<H: DeserializeOwned, R: DeserializeOwned>(
    path: &Path,
) -> Result<(H, Vec<R>), serde_json::Error> {
    let file = fs::File::open(path).map_err(serde_json::Error::io)?;
    let mut lines = BufReader::new(file).lines();
    let header_line = loop {
        match lines.next() {
            Some(line) => {
                let line = line.map_err(serde_json::Error::io)?;
                if !line.trim().is_empty() {
                    break line;
                }
            }
            None => return Err(serde_json::Error::custom("empty JSONL file")),
        }
    };
    let header = serde_json::from_str(&header_line)?;
    let mut records = Vec::new();
    for line in lines {
        let line = line.map_err(serde_json::Error::io)?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(&line)?);
    }
    Ok((header, records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn hex_round_trip_is_bit_exact(bits in any::<u64>()) {
            let v = f64::from_bits(bits);
            let back = f64_from_hex(&f64_to_hex(v)).unwrap();
            prop_assert_eq!(back.to_bits(), bits);
        }
    }

    #[test]
    fn sentinel_serializes_as_string() {
        #[derive(Serialize, Deserialize)]
        struct P {
            #[serde(with = "sentinel_vec3")]
            p: Vec3,
        }
        let p = P { p: Vec3::repeat(f64::NEG_INFINITY) };
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, r#"{"p":["neg_inf","neg_inf","neg_inf"]}"#);
        let back: P = serde_json::from_str(&s).unwrap();
        assert!(back.p.iter().all(|c| *c == f64::NEG_INFINITY));
        let finite: P = serde_json::from_str(r#"{"p":[1.5,2,-3]}"#).unwrap();
        assert_eq!(finite.p, Vec3::new(1.5, 2.0, -3.0));
        assert!(serde_json::from_str::<P>(r#"{"p":["inf",0,0]}"#).is_err());
    }

    #[test]
    fn rejects_malformed_hex() {
        assert!(f64_from_hex("3ff0000000000000").is_err());
        assert!(f64_from_hex("0xzz").is_err());
    }
}
