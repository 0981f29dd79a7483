//! Writes an EMB1 file with its sidecar, reads it back, and shows what the
//! header looks like on disk.

use std::collections::BTreeMap;

use embedkit::corpus::{decode_emb1, encode_emb1, load_embeddings, save_embeddings, sidecar_path};
use embedkit::EmbeddingMatrix;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let m = EmbeddingMatrix::new(
        vec!["s1".into(), "s2".into(), "s3".into()],
        4,
        vec![0.1, 0.2, 0.3, 0.4, -1.0, 0.0, 1.0, 2.0, 9.5, 8.5, 7.5, 6.5],
    )?
    .with_meta(BTreeMap::from([("model".into(), "toy-encoder".into())]));

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("toy.emb");
    save_embeddings(&m, &path)?;

    let bytes = encode_emb1(&m);
    println!("header: {:02x?}", &bytes[..16]);
    let (rows, dim, _) = decode_emb1(&bytes)?;
    println!("{rows} rows × {dim} dims, {} bytes", bytes.len());
    println!("sidecar: {}", std::fs::read_to_string(sidecar_path(&path))?);

    let back = load_embeddings(&path)?;
    assert_eq!(back, m);
    println!("row s2 = {:?}", back.row(back.row_of("s2").unwrap()));
    Ok(())
}
