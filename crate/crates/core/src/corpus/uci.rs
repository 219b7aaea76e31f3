//! UCI bag-of-words format.
//!
//! `docword` holds three header lines `D`, `W`, `NNZ` followed by `NNZ`
//! lines `docID wordID count` with 1-based ids. `vocab` holds `W` terms, one
//! per line. Token order inside a document follows entry order, each entry
//! expanded into `count` consecutive tokens.

use std::io::{BufRead, Write};

use super::{Corpus, CorpusError, Document, Vocabulary};

pub fn load_uci_bow<D: BufRead, V: BufRead>(docword: D, vocab: V) -> Result<Corpus, CorpusError> {
    let mut lines = docword
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| l.as_ref().map_or(true, |s| !s.trim().is_empty()));

    let mut header = [0usize; 3];
    let names = ["D", "W", "NNZ"];
    for (slot, name) in header.iter_mut().zip(names) {
        let (line, text) = lines.next().ok_or(CorpusError::Malformed {
            line: 0,
            message: format!("missing header line {name}"),
        })?;
        let text = text?;
        *slot = text.trim().parse().map_err(|_| CorpusError::Malformed {
            line,
            message: format!("header {name} must be a nonnegative integer, got {:?}", text.trim()),
        })?;
    }
    let [num_docs, vocab_size, nnz] = header;
    if num_docs == 0 {
        return Err(CorpusError::Empty);
    }

    let mut tokens: Vec<Vec<usize>> = vec![Vec::new(); num_docs];
    let mut entries = 0usize;
    for (line, text) in lines {
        let text = text?;
        let fields: Vec<&str> = text.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(CorpusError::Malformed {
                line,
                message: format!("expected \"docID wordID count\", got {:?}", text.trim()),
            });
        }
        let parse = |s: &str, what: &str| -> Result<i64, CorpusError> {
            s.parse().map_err(|_| CorpusError::Malformed {
                line,
                message: format!("{what} is not an integer: {s:?}"),
            })
        };
        let doc_id = parse(fields[0], "docID")?;
        let word_id = parse(fields[1], "wordID")?;
        let count = parse(fields[2], "count")?;
        if doc_id < 1 || doc_id as usize > num_docs {
            return Err(CorpusError::DocIdOutOfRange {
                line,
                id: doc_id.max(0) as usize,
                documents: num_docs,
            });
        }
        if word_id < 1 || word_id as usize > vocab_size {
            return Err(CorpusError::WordIdOutOfRange {
                line,
                id: word_id.max(0) as usize,
                vocab_size,
            });
        }
        if count <= 0 {
            return Err(CorpusError::NonPositiveCount { line, count });
        }
        let doc = &mut tokens[doc_id as usize - 1];
        doc.extend(std::iter::repeat_n(word_id as usize - 1, count as usize));
        entries += 1;
    }
    if entries != nnz {
        return Err(CorpusError::EntryCountMismatch {
            declared: nnz,
            found: entries,
        });
    }

    let mut terms = Vec::with_capacity(vocab_size);
    for line in vocab.lines() {
        terms.push(line?.trim_end_matches(['\r', '\n']).to_string());
    }
    while terms.last().is_some_and(|t| t.trim().is_empty()) {
        terms.pop();
    }
    if terms.len() != vocab_size {
        return Err(CorpusError::VocabSizeMismatch {
            declared: vocab_size,
            found: terms.len(),
        });
    }
    let vocabulary = Vocabulary::new(terms)?;
    Corpus::new(tokens.into_iter().map(Document::from_tokens).collect(), vocabulary)
}

/// Writes `corpus` in UCI format, one entry per (document, word type).
pub fn write_uci_bow<D: Write, V: Write>(corpus: &Corpus, mut docword: D, mut vocab: V) -> Result<(), CorpusError> {
    let nnz: usize = corpus.documents().iter().map(|d| d.type_counts().len()).sum();
    writeln!(docword, "{}", corpus.num_documents())?;
    writeln!(docword, "{}", corpus.vocab_size())?;
    writeln!(docword, "{nnz}")?;
    for (d, doc) in corpus.documents().iter().enumerate() {
        for &(w, c) in doc.type_counts() {
            writeln!(docword, "{} {} {}", d + 1, w + 1, c)?;
        }
    }
    for term in corpus.vocabulary().terms() {
        writeln!(vocab, "{term}")?;
    }
    docword.flush()?;
    vocab.flush()?;
    Ok(())
}
