//! Windowed chunking of a paper, hashed embeddings and top-k retrieval.
//!
//! ```text
//! cargo run --example chunk_and_retrieve
//! ```

use focused_feedback::backend::HashEmbedder;
use focused_feedback::investigator::{reassemble, top_k_chunks, Corpus, RetrievalParams};

fn main() -> anyhow::Result<()> {
    let text = "We train a linear scorer over plan features. \
        The features include rule violations and paragraph overlap. \
        Training uses a pairwise logistic loss with Adam. \
        Evaluation reports recall at one against a random baseline. \
        Each paragraph has one gold plan and three negatives.";
    let params = RetrievalParams { chunk_chars: 80, overlap_chars: 16, top_k: 3, ..Default::default() };
    let embedder = HashEmbedder::default();
    let index = Corpus::single("paper", text).index(&embedder, &params)?;
    println!("{} chunks of {} chars, overlap {}", index.len(), params.chunk_chars, params.overlap_chars);
    assert_eq!(reassemble(&index.chunks), text);

    let query = "how is the scorer trained?";
    for (chunk, score) in top_k_chunks(&embedder, query, &index.chunks, params.top_k)? {
        println!("{score:.3}  [{}] {}", chunk.start, chunk.text);
    }
    Ok(())
}
