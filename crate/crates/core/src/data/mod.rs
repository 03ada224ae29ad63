//! Input pipelines: synthetic tasks, embedding tables and corpus loaders.

mod corpora;
mod embeddings;
mod encode;
mod sample;
mod synthetic;

pub use corpora::{
    load_imdb, load_snli, ImdbSplits, LoaderOptions, SnliSplits, IMDB_SEQ_LEN, SNLI_LABELS, SNLI_SEQ_LEN,
};
pub use embeddings::{load_embeddings, EmbeddingFormat, EmbeddingTable};
pub use encode::{encode, tokenize};
pub use sample::{stratified_indices, Dataset, SequenceSample};
pub use synthetic::{synthetic_cluster_task, synthetic_cluster_task_with, ClusterTask, ClusterTaskConfig};
