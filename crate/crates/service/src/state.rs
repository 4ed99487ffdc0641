use std::path::Path;

use lseg_core::embeddings::{load_table_auto, EmbeddingTable};
use lseg_core::model::{checkpoint_digest, load_checkpoint, ModelParameters};
use lseg_core::Result;

/// Everything a request handler reads. Immutable once built.
#[derive(Debug)]
pub struct ServiceState {
    params: ModelParameters<f32>,
    table: EmbeddingTable,
    checkpoint_digest: String,
    table_digest: String,
    /// Temperature of the reported score summaries unless overridden.
    pub default_temperature: f64,
}

impl ServiceState {
    pub fn new(params: ModelParameters<f32>, table: EmbeddingTable) -> Result<Self> {
        if table.dimension() != params.config().encoder.embed_dim {
            return Err(lseg_core::Error::DimensionMismatch {
                expected: params.config().encoder.embed_dim,
                found: table.dimension(),
            });
        }
        Ok(Self {
            checkpoint_digest: checkpoint_digest(&params),
            table_digest: table.digest()?,
            params,
            table,
            default_temperature: 0.07,
        })
    }

    pub fn load(checkpoint: impl AsRef<Path>, table: impl AsRef<Path>) -> Result<Self> {
        Self::new(load_checkpoint(checkpoint)?, load_table_auto(table)?)
    }

    pub fn params(&self) -> &ModelParameters<f32> {
        &self.params
    }

    pub fn table(&self) -> &EmbeddingTable {
        &self.table
    }

    pub fn checkpoint_digest(&self) -> &str {
        &self.checkpoint_digest
    }

    pub fn table_digest(&self) -> &str {
        &self.table_digest
    }
}
