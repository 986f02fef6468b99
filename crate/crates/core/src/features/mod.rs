//! Node text and cached LLM outputs turned into per-node embedding sources.

mod bundle;
mod documents;
mod encode;
mod llm;
pub mod matrix;

pub use bundle::{build_bundle, BundleOptions, EmbeddingBundle, Source};
pub use documents::{
    load_class_names, load_documents, write_class_names, write_documents, NodeDocument,
};
pub use encode::{encode_predictions, encode_text, token_hash, tokenize};
pub use llm::{
    format_prompt, load_llm_records, stub_llm_provider, write_llm_records, LlmCache, LlmRecord,
    PROMPT_PLACEHOLDERS, PROMPT_TEMPLATE,
};
