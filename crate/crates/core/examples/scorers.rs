//! Unigram BLEU and ROUGE-1 on a few candidate/reference pairs.
//!
//!     cargo run --example scorers

use mess_plus::metrics::{rouge1_scores, tokenize, Scorer};

fn main() {
    let reference = "the cat sat on the mat";
    for candidate in [
        "the cat sat on the mat",
        "the cat sat",
        "the the the the the the",
        "a dog lay on a rug",
        "",
    ] {
        let r = rouge1_scores(&tokenize(candidate), &tokenize(reference));
        println!(
            "{candidate:<26} bleu1 {:.3}  rouge1 p {:.3} r {:.3} f {:.3}",
            Scorer::Bleu1.score(candidate, reference),
            r.precision,
            r.recall,
            r.f1
        );
    }
}
