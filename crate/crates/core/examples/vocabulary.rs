//! Builds a synthetic frozen vocabulary with a hierarchy and synonyms,
//! inspects its geometry and round-trips it through both file formats.
//!
//! ```text
//! cargo run -p lseg-core --example vocabulary
//! ```

use lseg_core::embeddings::{
    load_table_auto, save_table, save_table_text, synth_vocab, Concept, SyntheticVocabulary,
};

fn main() -> lseg_core::Result<()> {
    let spec = SyntheticVocabulary {
        concepts: vec![
            Concept::root("other"),
            Concept::root("animal"),
            Concept::child("dog", "animal"),
            Concept::child("cat", "animal"),
            Concept::root("vehicle"),
            Concept::child("car", "vehicle"),
            Concept::synonym("puppy", "dog"),
            Concept::synonym("automobile", "car"),
        ],
        seed: 7,
        dimension: 32,
        synonym_noise: 0.05,
    };
    let table = synth_vocab(&spec)?;
    for (a, b) in [("dog", "cat"), ("dog", "car"), ("dog", "puppy"), ("car", "automobile"), ("other", "animal")] {
        println!("cos({a}, {b}) = {:+.3}", table.cosine(a, b)?);
    }

    let dir = tempfile::tempdir().map_err(|e| lseg_core::Error::io("tempdir", e))?;
    let binary = dir.path().join("vocab.bin");
    let text = dir.path().join("vocab.txt");
    save_table(&table, &binary)?;
    save_table_text(&table, &text)?;
    let digest = table.digest()?;
    println!("digest            {digest}");
    println!("binary round trip {}", load_table_auto(&binary)?.digest()? == digest);
    println!("text round trip   {}", load_table_auto(&text)?.digest()? == digest);
    Ok(())
}
