//! Sentence segmentation used for engagement judging.

use tutor_eval::judge::segment_sentences;

fn main() {
    let text = std::env::args().nth(1).unwrap_or_else(|| {
        "Your loop stops early, e.g. when the list is empty. Check `x.append(y)` first. Then rerun test 3!".into()
    });
    match segment_sentences(&text) {
        Ok(sentences) => {
            for (i, s) in sentences.iter().enumerate() {
                println!("[{i}] {s}");
            }
        }
        Err(e) => eprintln!("cannot segment: {e}"),
    }
}
