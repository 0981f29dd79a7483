use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{Map, Value};

use super::{CorpusError, EmbeddingMatrix};

pub const EMB1_MAGIC: &[u8; 4] = b"EMB1";
pub const EMB1_HEADER_LEN: usize = 16;
const FORMAT_VERSION: u8 = 0x01;
const DTYPE_F32: u8 = 0x01;

/// `<dir>/<stem>.meta.json` next to an embedding file.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}.meta.json"))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Parses the header and payload of an `EMB1` byte buffer.
pub(crate) fn decode(bytes: &[u8]) -> Result<(usize, usize, Vec<f32>), CorpusError> {
    if bytes.len() < 4 || &bytes[..4] != EMB1_MAGIC {
        return Err(CorpusError::BadMagic);
    }
    if bytes.len() < EMB1_HEADER_LEN {
        return Err(CorpusError::TruncatedPayload {
            expected: EMB1_HEADER_LEN as u64,
            found: bytes.len() as u64,
        });
    }
    if bytes[4] != FORMAT_VERSION {
        return Err(CorpusError::UnsupportedFormat {
            field: "version",
            value: bytes[4],
        });
    }
    if bytes[5] != DTYPE_F32 {
        return Err(CorpusError::UnsupportedFormat {
            field: "dtype",
            value: bytes[5],
        });
    }
    for &b in &bytes[6..8] {
        if b != 0 {
            return Err(CorpusError::UnsupportedFormat {
                field: "padding",
                value: b,
            });
        }
    }
    let rows = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let dim = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let payload = &bytes[EMB1_HEADER_LEN..];
    let expected = rows as u64 * dim as u64 * 4;
    if payload.len() as u64 != expected {
        return Err(CorpusError::TruncatedPayload {
            expected,
            found: payload.len() as u64,
        });
    }
    if dim == 0 {
        return Err(CorpusError::ZeroDim);
    }
    let values = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((rows, dim, values))
}

pub(crate) fn encode(m: &EmbeddingMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(EMB1_HEADER_LEN + m.values().len() * 4);
    out.extend_from_slice(EMB1_MAGIC);
    out.extend_from_slice(&[FORMAT_VERSION, DTYPE_F32, 0, 0]);
    out.extend_from_slice(&(m.n_rows() as u32).to_le_bytes());
    out.extend_from_slice(&(m.dim() as u32).to_le_bytes());
    for v in m.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub(crate) fn encode_sidecar(m: &EmbeddingMatrix) -> Vec<u8> {
    let mut obj = Map::new();
    for (k, v) in m.meta() {
        obj.insert(k.clone(), v.clone());
    }
    obj.insert(
        "ids".into(),
        Value::Array(m.ids().iter().cloned().map(Value::String).collect()),
    );
    let mut bytes = serde_json::to_vec(&Value::Object(obj)).expect("json map serializes");
    bytes.push(b'\n');
    bytes
}

fn parse_sidecar(
    path: &Path,
    bytes: &[u8],
    rows: usize,
) -> Result<(Vec<String>, BTreeMap<String, Value>), CorpusError> {
    let bad = |reason: String| CorpusError::BadSidecar {
        path: path.to_path_buf(),
        reason,
    };
    let value: Value = serde_json::from_slice(bytes).map_err(|e| bad(e.to_string()))?;
    let Value::Object(mut obj) = value else {
        return Err(bad("top level is not an object".into()));
    };
    let ids = match obj.remove("ids") {
        Some(Value::Array(items)) => items
            .into_iter()
            .map(|v| match v {
                Value::String(s) => Ok(s),
                other => Err(bad(format!("non-string id {other}"))),
            })
            .collect::<Result<Vec<_>, _>>()?,
        Some(_) => return Err(bad("\"ids\" is not an array".into())),
        None => return Err(bad("missing \"ids\"".into())),
    };
    if ids.len() != rows {
        return Err(bad(format!("{} ids for {rows} rows", ids.len())));
    }
    Ok((ids, obj.into_iter().collect()))
}

/// Reads an `EMB1` file and its sidecar. Without a sidecar, rows are named
/// by their position (`"0"`, `"1"`, …) and a warning is logged.
pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingMatrix, CorpusError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(io_err(path))?;
    let (rows, dim, values) = decode(&bytes)?;
    let meta_path = sidecar_path(path);
    let (ids, meta) = match fs::read(&meta_path) {
        Ok(meta_bytes) => parse_sidecar(&meta_path, &meta_bytes, rows)?,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            log::warn!(
                "no metadata sidecar at {}; using positional row ids",
                meta_path.display()
            );
            ((0..rows).map(|i| i.to_string()).collect(), BTreeMap::new())
        }
        Err(e) => return Err(io_err(&meta_path)(e)),
    };
    Ok(EmbeddingMatrix::new(ids, dim, values)?.with_meta(meta))
}

/// Writes `path` (EMB1) and its `.meta.json` sidecar. Output bytes depend
/// only on the matrix contents.
pub fn save_embeddings(m: &EmbeddingMatrix, path: impl AsRef<Path>) -> Result<(), CorpusError> {
    let path = path.as_ref();
    fs::write(path, encode(m)).map_err(io_err(path))?;
    let meta_path = sidecar_path(path);
    fs::write(&meta_path, encode_sidecar(m)).map_err(io_err(&meta_path))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn header(rows: u32, dim: u32) -> Vec<u8> {
        let mut h = b"EMB1".to_vec();
        h.extend_from_slice(&[1, 1, 0, 0]);
        h.extend_from_slice(&rows.to_le_bytes());
        h.extend_from_slice(&dim.to_le_bytes());
        h
    }

    #[test]
    fn smallest_well_formed_file() {
        let mut bytes = header(2, 3);
        bytes.extend(std::iter::repeat(0u8).take(24));
        let (rows, dim, values) = decode(&bytes).unwrap();
        assert_eq!((rows, dim, values.len()), (2, 3, 6));
    }

    #[test]
    fn short_payload_is_truncated() {
        let mut bytes = header(2, 3);
        bytes.extend(std::iter::repeat(0u8).take(20));
        assert!(matches!(
            decode(&bytes),
            Err(CorpusError::TruncatedPayload {
                expected: 24,
                found: 20
            })
        ));
    }

    #[test]
    fn single_value_file_is_twenty_bytes() {
        let m = EmbeddingMatrix::new(vec!["a".into()], 1, vec![0.0]).unwrap();
        assert_eq!(encode(&m).len(), 20);
    }

    #[test]
    fn bad_magic() {
        let mut bytes = header(0, 1);
        bytes[0] = b'X';
        assert!(matches!(decode(&bytes), Err(CorpusError::BadMagic)));
        assert!(matches!(decode(b"EM"), Err(CorpusError::BadMagic)));
    }

    #[test]
    fn missing_sidecar_uses_positional_ids() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.emb");
        let mut bytes = header(2, 1);
        bytes.extend_from_slice(&1.0f32.to_le_bytes());
        bytes.extend_from_slice(&2.0f32.to_le_bytes());
        fs::write(&path, bytes).unwrap();
        let m = load_embeddings(&path).unwrap();
        assert_eq!(m.ids(), &["0".to_string(), "1".to_string()]);
    }

    #[test]
    fn sidecar_id_count_must_match() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.emb");
        let mut bytes = header(1, 1);
        bytes.extend_from_slice(&1.0f32.to_le_bytes());
        fs::write(&path, bytes).unwrap();
        fs::write(dir.path().join("x.meta.json"), br#"{"ids":["a","b"]}"#).unwrap();
        assert!(matches!(
            load_embeddings(&path),
            Err(CorpusError::BadSidecar { .. })
        ));
    }

    fn arb_matrix() -> impl Strategy<Value = EmbeddingMatrix> {
        (0usize..6, 1usize..5).prop_flat_map(|(rows, dim)| {
            prop::collection::vec(-1e6f32..1e6, rows * dim).prop_map(move |values| {
                let ids = (0..rows).map(|i| format!("en/{i}/l")).collect();
                let mut m = EmbeddingMatrix::new(ids, dim, values).unwrap();
                m.set_meta("model", Value::String("test".into()));
                m
            })
        })
    }

    proptest! {
        #[test]
        fn save_load_is_identity_and_deterministic(m in arb_matrix()) {
            let dir = tempfile::tempdir().unwrap();
            let p1 = dir.path().join("a.emb");
            let p2 = dir.path().join("b.emb");
            save_embeddings(&m, &p1).unwrap();
            let back = load_embeddings(&p1).unwrap();
            prop_assert_eq!(&back, &m);
            save_embeddings(&back, &p2).unwrap();
            prop_assert_eq!(fs::read(&p1).unwrap(), fs::read(&p2).unwrap());
            prop_assert_eq!(
                fs::read(sidecar_path(&p1)).unwrap(),
                fs::read(sidecar_path(&p2)).unwrap()
            );
        }

        #[test]
        fn flipped_header_byte_never_decodes(byte in 0usize..16, mask in 1u8..=255, rows in 1u32..4, dim in 1u32..4) {
            let m = EmbeddingMatrix::new(
                (0..rows).map(|i| i.to_string()).collect(),
                dim as usize,
                vec![0.5; (rows * dim) as usize],
            ).unwrap();
            let mut bytes = encode(&m);
            bytes[byte] ^= mask;
            match decode(&bytes) {
                Err(CorpusError::BadMagic)
                | Err(CorpusError::TruncatedPayload { .. })
                | Err(CorpusError::UnsupportedFormat { .. }) => {}
                Err(CorpusError::ZeroDim) => prop_assert!(false, "zero dim cannot arise from a single flip of a valid size"),
                other => prop_assert!(false, "unexpected {:?}", other.map(|r| (r.0, r.1))),
            }
        }
    }
}
