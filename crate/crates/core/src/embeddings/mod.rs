//! Frozen label embeddings: the text side of the model.
//!
//! The table is never modified by training; [`EmbeddingTable::digest`] makes
//! that checkable.

mod io;
mod labels;
mod synth;
mod table;

pub use io::{
    decode_binary, decode_text, encode_binary, encode_text, load_table, load_table_auto,
    load_table_text, load_table_with_dimension, save_table, save_table_text, MAGIC,
};
pub use labels::{LabelSet, OTHER_LABEL};
pub use synth::{
    low_rank_vocab, synonym_angle_bound, synth_vocab, Concept, Relation, SyntheticVocabulary, CHILD_OWN_WEIGHT,
    CHILD_PARENT_WEIGHT,
};
pub use table::{cosine, EmbeddingTable, UNIT_NORM_TOLERANCE};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Error;
    use proptest::prelude::*;

    fn table() -> EmbeddingTable {
        synth_vocab(&SyntheticVocabulary::roots(["a", "b", "c"], 8, 5)).unwrap()
    }

    #[test]
    fn embed_labels_rows_follow_label_order() {
        let t = table();
        let ab = t.embed_labels::<f32>(&LabelSet::parse("a,b").unwrap()).unwrap();
        let ba = t.embed_labels::<f32>(&LabelSet::parse("b,a").unwrap()).unwrap();
        assert_eq!(ab.dims().width, 2);
        assert_eq!(ab.pixel(0, 0), ba.pixel(0, 1));
        assert_eq!(ab.pixel(0, 1), ba.pixel(0, 0));
        assert_eq!(ab.pixel(0, 0), t.get("a").unwrap());
    }

    #[test]
    fn single_label_gives_one_row() {
        let t = table();
        let m = t.embed_labels::<f64>(&LabelSet::parse("c").unwrap()).unwrap();
        assert_eq!((m.height(), m.width(), m.channels()), (1, 1, 8));
        let stored: Vec<f64> = t.get("c").unwrap().iter().map(|&x| x as f64).collect();
        assert_eq!(m.values(), stored.as_slice());
    }

    #[test]
    fn unknown_label_is_named() {
        let err = table().embed_labels::<f32>(&LabelSet::parse("a,zebra").unwrap()).unwrap_err();
        assert!(matches!(&err, Error::UnknownLabel(l) if l == "zebra"));
        assert!(err.to_string().contains("zebra"));
    }

    #[test]
    fn file_round_trip_reproduces_embedded_rows() {
        let t = table();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.lemb");
        save_table(&t, &path).unwrap();
        let back = load_table(&path).unwrap();
        let labels = LabelSet::parse("c,a").unwrap();
        assert_eq!(
            t.embed_labels::<f32>(&labels).unwrap(),
            back.embed_labels::<f32>(&labels).unwrap()
        );
        assert_eq!(t.digest().unwrap(), back.digest().unwrap());
    }

    proptest! {
        #[test]
        fn permuting_labels_permutes_rows(perm in Just(vec![0usize, 1, 2]).prop_shuffle()) {
            let t = table();
            let labels = LabelSet::parse("a,b,c").unwrap();
            let base = t.embed_labels::<f32>(&labels).unwrap();
            let permuted = t.embed_labels::<f32>(&labels.permuted(&perm).unwrap()).unwrap();
            for (k, &p) in perm.iter().enumerate() {
                prop_assert_eq!(permuted.pixel(0, k), base.pixel(0, p));
            }
        }
    }
}
