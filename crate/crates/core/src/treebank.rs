//! CoNLL-X / CoNLL-U treebank reading and writing, vocabularies and
//! punctuation classification.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tree::DepTree;

/// Column layout of a treebank file.
#[derive(Clone, Copy, Debug, Eq, PartialEq, Serialize, Deserialize)]
pub enum Format {
    /// ID FORM LEMMA CPOSTAG POSTAG FEATS HEAD DEPREL PHEAD PDEPREL
    Conllx,
    /// ID FORM LEMMA UPOS XPOS FEATS HEAD DEPREL DEPS MISC
    Conllu,
}

impl Format {
    /// Guess the format from a file extension, defaulting to CoNLL-U.
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some("conll") | Some("conllx") => Format::Conllx,
            _ => Format::Conllu,
        }
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "conllx" | "conll" => Ok(Format::Conllx),
            "conllu" => Ok(Format::Conllu),
            other => Err(Error::Config(format!(
                "unknown treebank format `{}`",
                other
            ))),
        }
    }
}

/// Punctuation convention used to exclude tokens from attachment scores.
#[derive(Clone, Copy, Debug, Eq, PartialEq, Serialize, Deserialize)]
pub enum Convention {
    /// Universal Dependencies: UPOS == PUNCT.
    Ud,
    /// Penn Treebank: XPOS in {`` '' : , .}.
    Ptb,
}

impl FromStr for Convention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ud" => Ok(Convention::Ud),
            "ptb" => Ok(Convention::Ptb),
            other => Err(Error::Config(format!("unknown convention `{}`", other))),
        }
    }
}

const PTB_PUNCT: [&str; 5] = ["``", "''", ":", ",", "."];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    /// 1-based position in the sentence.
    pub index: usize,
    pub form: String,
    pub lemma: String,
    pub upos: String,
    pub xpos: String,
    pub feats: String,
    /// Head position, 0 is the artificial root.
    pub gold_head: usize,
    pub gold_label: String,
    /// PHEAD/PDEPREL (CoNLL-X) or DEPS/MISC (CoNLL-U), kept verbatim.
    pub extra: [String; 2],
}

impl Token {
    pub fn new(index: usize, form: &str, upos: &str, gold_head: usize, gold_label: &str) -> Self {
        Token {
            index,
            form: form.to_owned(),
            lemma: String::new(),
            upos: upos.to_owned(),
            xpos: String::new(),
            feats: String::new(),
            gold_head,
            gold_label: gold_label.to_owned(),
            extra: [String::new(), String::new()],
        }
    }

    pub fn with_xpos(mut self, xpos: &str) -> Self {
        self.xpos = xpos.to_owned();
        self
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sentence {
    pub tokens: Vec<Token>,
    pub source_id: String,
    /// Comment lines without trailing newline, including the leading `#`.
    pub comments: Vec<String>,
}

impl Sentence {
    pub fn new(source_id: impl Into<String>, tokens: Vec<Token>) -> Self {
        Sentence {
            tokens,
            source_id: source_id.into(),
            comments: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// The gold annotation as a tree. Validity is not checked.
    pub fn gold_tree(&self) -> DepTree {
        DepTree {
            heads: self.tokens.iter().map(|t| t.gold_head).collect(),
            labels: Some(self.tokens.iter().map(|t| t.gold_label.clone()).collect()),
        }
    }
}

fn field(raw: &str) -> String {
    if raw == "_" {
        String::new()
    } else {
        raw.to_owned()
    }
}

fn blank(value: &str) -> &str {
    if value.is_empty() {
        "_"
    } else {
        value
    }
}

/// Read all sentences from a treebank file.
pub fn read_conll(path: impl AsRef<Path>, format: Format) -> Result<Vec<Sentence>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_conll_from(BufReader::new(file), format).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

/// Read sentences from any buffered reader.
pub fn read_conll_from<R: BufRead>(reader: R, format: Format) -> Result<Vec<Sentence>> {
    let mut sentences = Vec::new();
    let mut tokens = Vec::new();
    let mut lines = Vec::new();
    let mut comments = Vec::new();

    for (line_idx, line) in reader.lines().enumerate() {
        let line_no = line_idx + 1;
        let line = line.map_err(|e| Error::io("<reader>", e))?;
        let line = line.trim_end_matches('\r');

        if line.trim().is_empty() {
            finish_sentence(&mut sentences, &mut tokens, &mut lines, &mut comments)?;
            continue;
        }
        if line.starts_with('#') {
            comments.push(line.to_owned());
            continue;
        }

        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 10 {
            return Err(Error::format(
                line_no,
                format!("expected 10 tab-separated columns, found {}", cols.len()),
            ));
        }

        let id = cols[0];
        if format == Format::Conllu && (id.contains('-') || id.contains('.')) {
            // Multiword ranges and empty nodes.
            continue;
        }
        let index: usize = id
            .parse()
            .map_err(|_| Error::format(line_no, format!("invalid token id `{}`", id)))?;
        if index != tokens.len() + 1 {
            return Err(Error::format(
                line_no,
                format!(
                    "token id {} out of sequence, expected {}",
                    index,
                    tokens.len() + 1
                ),
            ));
        }
        let gold_head: usize = cols[6]
            .parse()
            .map_err(|_| Error::format(line_no, format!("non-integer HEAD `{}`", cols[6])))?;
        if gold_head == index {
            return Err(Error::format(line_no, "token is its own head"));
        }
        if cols[1].is_empty() {
            return Err(Error::format(line_no, "empty FORM"));
        }

        tokens.push(Token {
            index,
            form: cols[1].to_owned(),
            lemma: field(cols[2]),
            upos: field(cols[3]),
            xpos: field(cols[4]),
            feats: field(cols[5]),
            gold_head,
            gold_label: field(cols[7]),
            extra: [field(cols[8]), field(cols[9])],
        });
        lines.push(line_no);
    }
    finish_sentence(&mut sentences, &mut tokens, &mut lines, &mut comments)?;

    Ok(sentences)
}

fn finish_sentence(
    sentences: &mut Vec<Sentence>,
    tokens: &mut Vec<Token>,
    lines: &mut Vec<usize>,
    comments: &mut Vec<String>,
) -> Result<()> {
    if tokens.is_empty() {
        comments.clear();
        return Ok(());
    }
    // Head range can only be checked once the sentence length is known.
    let n = tokens.len();
    if let Some((t, line)) = tokens
        .iter()
        .zip(lines.iter())
        .find(|(t, _)| t.gold_head > n)
    {
        return Err(Error::format(
            *line,
            format!("head {} outside [0, {}]", t.gold_head, n),
        ));
    }
    let source_id = comments
        .iter()
        .find_map(|c| {
            c.strip_prefix('#')
                .map(str::trim)
                .and_then(|c| c.strip_prefix("sent_id"))
                .and_then(|c| c.trim_start().strip_prefix('='))
                .map(|id| id.trim().to_owned())
        })
        .unwrap_or_else(|| (sentences.len() + 1).to_string());
    sentences.push(Sentence {
        tokens: std::mem::take(tokens),
        source_id,
        comments: std::mem::take(comments),
    });
    lines.clear();
    Ok(())
}

/// Write sentences with predicted heads (and labels, when present).
pub fn write_conll(
    sentences: &[Sentence],
    predicted: &[DepTree],
    path: impl AsRef<Path>,
    format: Format,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = BufWriter::new(file);
    write_conll_to(&mut writer, sentences, predicted, format)?;
    writer.flush().map_err(|e| Error::io(path, e))
}

pub fn write_conll_to<W: Write>(
    writer: &mut W,
    sentences: &[Sentence],
    predicted: &[DepTree],
    _format: Format,
) -> Result<()> {
    if sentences.len() != predicted.len() {
        return Err(Error::Argument(format!(
            "{} sentences but {} predicted trees",
            sentences.len(),
            predicted.len()
        )));
    }
    for (sentence, tree) in sentences.iter().zip(predicted) {
        if sentence.len() != tree.len() {
            return Err(Error::Argument(format!(
                "sentence {} has {} tokens but predicted tree has {} words",
                sentence.source_id,
                sentence.len(),
                tree.len()
            )));
        }
    }

    let io_err = |e| Error::io("<writer>", e);
    for (sentence, tree) in sentences.iter().zip(predicted) {
        for comment in &sentence.comments {
            writeln!(writer, "{}", comment).map_err(io_err)?;
        }
        for (i, token) in sentence.tokens.iter().enumerate() {
            let label = match &tree.labels {
                Some(labels) => labels[i].as_str(),
                None => "",
            };
            writeln!(
                writer,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                token.index,
                token.form,
                blank(&token.lemma),
                blank(&token.upos),
                blank(&token.xpos),
                blank(&token.feats),
                tree.heads[i],
                blank(label),
                blank(&token.extra[0]),
                blank(&token.extra[1]),
            )
            .map_err(io_err)?;
        }
        writeln!(writer).map_err(io_err)?;
    }
    Ok(())
}

pub fn is_punctuation(token: &Token, convention: Convention) -> bool {
    match convention {
        Convention::Ud => token.upos == "PUNCT",
        Convention::Ptb => PTB_PUNCT.contains(&token.xpos.as_str()),
    }
}

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const PAD_SYMBOL: &str = "<pad>";
pub const UNK_SYMBOL: &str = "<unk>";

/// A dense symbol-to-id table.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolTable {
    names: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
    /// Whether ids 0 and 1 are reserved for padding and unknowns.
    specials: bool,
}

impl SymbolTable {
    fn with_specials() -> Self {
        let mut table = SymbolTable {
            specials: true,
            ..Default::default()
        };
        table.push(PAD_SYMBOL);
        table.push(UNK_SYMBOL);
        table
    }

    fn push(&mut self, name: &str) -> usize {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = self.names.len();
        self.names.push(name.to_owned());
        self.index.insert(name.to_owned(), id);
        id
    }

    /// Add symbols in order of decreasing frequency, ties broken lexicographically.
    fn extend_by_frequency(&mut self, counts: HashMap<String, usize>, min_freq: usize) {
        let mut counts: Vec<_> = counts.into_iter().filter(|(_, c)| *c >= min_freq).collect();
        counts.sort_by(|(a, ca), (b, cb)| cb.cmp(ca).then_with(|| a.cmp(b)));
        for (name, _) in counts {
            self.push(&name);
        }
    }

    /// Look up a symbol; unknown symbols map to UNK when the table has specials.
    pub fn id(&self, name: &str) -> Option<usize> {
        match self.index.get(name) {
            Some(&id) => Some(id),
            None if self.specials => Some(UNK),
            None => None,
        }
    }

    pub fn exact_id(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: usize) -> &str {
        &self.names[id]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub(crate) fn rebuild_index(&mut self) {
        self.index = self
            .names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i))
            .collect();
    }

    /// FNV-1a over the symbol list, used to detect vocabulary mismatches.
    pub fn fingerprint(&self) -> u64 {
        let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
        for name in &self.names {
            for byte in name.bytes().chain(std::iter::once(0xff)) {
                hash ^= u64::from(byte);
                hash = hash.wrapping_mul(0x0100_0000_01b3);
            }
        }
        hash
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocab {
    pub words: SymbolTable,
    pub pos: SymbolTable,
    pub chars: SymbolTable,
    pub labels: SymbolTable,
    pub min_word_freq: usize,
}

impl Vocab {
    pub fn word_id(&self, form: &str) -> usize {
        self.words.id(form).unwrap_or(UNK)
    }

    pub fn pos_id(&self, pos: &str) -> usize {
        self.pos.id(pos).unwrap_or(UNK)
    }

    pub fn char_ids(&self, form: &str) -> Vec<usize> {
        let mut buf = [0u8; 4];
        form.chars()
            .map(|c| self.chars.id(c.encode_utf8(&mut buf)).unwrap_or(UNK))
            .collect()
    }

    pub fn label_id(&self, label: &str) -> Option<usize> {
        self.labels.exact_id(label)
    }

    pub(crate) fn rebuild_indices(&mut self) {
        self.words.rebuild_index();
        self.pos.rebuild_index();
        self.chars.rebuild_index();
        self.labels.rebuild_index();
    }
}

/// Build vocabularies from a training corpus.
pub fn build_vocab(sentences: &[Sentence], min_word_freq: usize) -> Result<Vocab> {
    if sentences.is_empty() {
        return Err(Error::Argument(
            "cannot build a vocabulary from no sentences".into(),
        ));
    }

    let mut words = HashMap::new();
    let mut pos = HashMap::new();
    let mut chars = HashMap::new();
    let mut labels = HashMap::new();
    for token in sentences.iter().flat_map(|s| &s.tokens) {
        *words.entry(token.form.clone()).or_insert(0) += 1;
        *pos.entry(token.upos.clone()).or_insert(0) += 1;
        *labels.entry(token.gold_label.clone()).or_insert(0) += 1;
        for c in token.form.chars() {
            *chars.entry(c.to_string()).or_insert(0) += 1;
        }
    }

    let mut vocab = Vocab {
        words: SymbolTable::with_specials(),
        pos: SymbolTable::with_specials(),
        chars: SymbolTable::with_specials(),
        labels: SymbolTable::default(),
        min_word_freq,
    };
    vocab.words.extend_by_frequency(words, min_word_freq.max(1));
    vocab.pos.extend_by_frequency(pos, 1);
    vocab.chars.extend_by_frequency(chars, 1);
    vocab.labels.extend_by_frequency(labels, 1);
    Ok(vocab)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_TOKENS: &str =
        "1\tHe\t_\tPRON\tPRP\t_\t2\tnsubj\t_\t_\n2\tran\t_\tVERB\tVBD\t_\t0\troot\t_\t_\n";

    fn read_str(s: &str, format: Format) -> Result<Vec<Sentence>> {
        read_conll_from(s.as_bytes(), format)
    }

    #[test]
    fn reads_two_token_block() {
        let sentences = read_str(TWO_TOKENS, Format::Conllx).unwrap();
        assert_eq!(sentences.len(), 1);
        let s = &sentences[0];
        assert_eq!(s.len(), 2);
        assert_eq!(s.gold_tree().heads, vec![2, 0]);
        assert_eq!(s.tokens[0].gold_label, "nsubj");
        assert_eq!(s.tokens[1].xpos, "VBD");
    }

    #[test]
    fn empty_input_gives_no_sentences() {
        assert!(read_str("", Format::Conllu).unwrap().is_empty());
        assert!(read_str("\n\n", Format::Conllu).unwrap().is_empty());
    }

    #[test]
    fn skips_ranges_and_empty_nodes() {
        let data = "# sent_id = s7\n\
                    1\tVamos\t_\tVERB\t_\t_\t0\troot\t_\t_\n\
                    2-3\tnos\t_\t_\t_\t_\t_\t_\t_\t_\n\
                    2\tnos\t_\tPRON\t_\t_\t1\tobj\t_\t_\n\
                    3\tos\t_\tPRON\t_\t_\t1\tiobj\t_\t_\n\
                    3.1\tx\t_\t_\t_\t_\t_\t_\t_\t_\n\n";
        let sentences = read_str(data, Format::Conllu).unwrap();
        assert_eq!(sentences[0].len(), 3);
        assert_eq!(sentences[0].source_id, "s7");
        assert_eq!(sentences[0].gold_tree().heads, vec![0, 1, 1]);
    }

    #[test]
    fn column_count_error_reports_line() {
        let data = "1\tHe\t_\tPRON\n";
        match read_str(data, Format::Conllx) {
            Err(Error::Format { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected format error, got {:?}", other),
        }
    }

    #[test]
    fn non_integer_head_is_format_error() {
        let data = "# c\n1\tHe\t_\tPRON\t_\t_\tx\tnsubj\t_\t_\n";
        match read_str(data, Format::Conllx) {
            Err(Error::Format { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected format error, got {:?}", other),
        }
    }

    #[test]
    fn cyclic_annotation_is_accepted_at_read_time() {
        let data = "1\ta\t_\tX\t_\t_\t2\tdep\t_\t_\n2\tb\t_\tX\t_\t_\t1\tdep\t_\t_\n";
        let s = read_str(data, Format::Conllx).unwrap();
        assert_eq!(s[0].gold_tree().heads, vec![2, 1]);
    }

    #[test]
    fn writes_predicted_heads() {
        let sentences = read_str(TWO_TOKENS, Format::Conllx).unwrap();
        let mut out = Vec::new();
        let tree = DepTree::unlabeled(vec![2, 0]);
        write_conll_to(&mut out, &sentences, &[tree], Format::Conllx).unwrap();
        let text = String::from_utf8(out).unwrap();
        let heads: Vec<&str> = text
            .lines()
            .filter(|l| !l.is_empty())
            .map(|l| l.split('\t').nth(6).unwrap())
            .collect();
        assert_eq!(heads, vec!["2", "0"]);
    }

    #[test]
    fn write_rejects_length_mismatch() {
        let sentences = read_str(TWO_TOKENS, Format::Conllx).unwrap();
        let mut out = Vec::new();
        let err = write_conll_to(
            &mut out,
            &sentences,
            &[DepTree::unlabeled(vec![0])],
            Format::Conllx,
        );
        assert!(matches!(err, Err(Error::Argument(_))));
        assert!(matches!(
            write_conll_to(&mut out, &sentences, &[], Format::Conllx),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn writing_nothing_gives_empty_output() {
        let mut out = Vec::new();
        write_conll_to(&mut out, &[], &[], Format::Conllu).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn round_trip_single_sentence() {
        let data = "# text = He ran\n1\tHe\the\tPRON\tPRP\tCase=Nom\t2\tnsubj\t_\tSpaceAfter=No\n2\tran\trun\tVERB\tVBD\t_\t0\troot\t_\t_\n";
        let sentences = read_str(data, Format::Conllu).unwrap();
        let trees: Vec<_> = sentences.iter().map(Sentence::gold_tree).collect();
        let mut out = Vec::new();
        write_conll_to(&mut out, &sentences, &trees, Format::Conllu).unwrap();
        let again = read_conll_from(out.as_slice(), Format::Conllu).unwrap();
        assert_eq!(sentences, again);
    }

    fn corpus(words: &[&str]) -> Vec<Sentence> {
        let tokens = words
            .iter()
            .enumerate()
            .map(|(i, w)| Token::new(i + 1, w, "X", if i == 0 { 0 } else { 1 }, "dep"))
            .collect();
        vec![Sentence::new("1", tokens)]
    }

    #[test]
    fn vocab_frequency_cutoff() {
        let vocab = build_vocab(&corpus(&["a", "b", "a", "a"]), 2).unwrap();
        assert_eq!(vocab.words.names(), &[PAD_SYMBOL, UNK_SYMBOL, "a"]);
        assert_eq!(vocab.word_id("b"), UNK);
        assert_eq!(vocab.word_id("a"), 2);

        let vocab = build_vocab(&corpus(&["a", "b", "a", "a"]), 1).unwrap();
        assert_eq!(vocab.words.len(), 4);
        assert_ne!(vocab.word_id("b"), UNK);
    }

    #[test]
    fn vocab_labels_have_no_specials() {
        let mut s = corpus(&["the", "dog", "barks"]);
        s[0].tokens[0].gold_label = "root".into();
        s[0].tokens[1].gold_label = "det".into();
        s[0].tokens[2].gold_label = "nsubj".into();
        let vocab = build_vocab(&s, 1).unwrap();
        assert_eq!(vocab.labels.len(), 3);
        assert_eq!(vocab.label_id("unseen"), None);
    }

    #[test]
    fn vocab_requires_sentences() {
        assert!(build_vocab(&[], 2).is_err());
    }

    #[test]
    fn vocab_is_deterministic() {
        let c = corpus(&["z", "y", "x", "y", "w", "z"]);
        let a = build_vocab(&c, 1).unwrap();
        let b = build_vocab(&c, 1).unwrap();
        assert_eq!(a, b);
        // freq 2: y, z (lexicographic), then freq 1: w, x
        assert_eq!(&a.words.names()[2..], &["y", "z", "w", "x"]);
    }

    #[test]
    fn punctuation_conventions() {
        let t = Token::new(1, ".", "PUNCT", 0, "punct").with_xpos(".");
        assert!(is_punctuation(&t, Convention::Ud));
        assert!(is_punctuation(&t, Convention::Ptb));
        let n = Token::new(1, "dog", "NOUN", 0, "root").with_xpos("NN");
        assert!(!is_punctuation(&n, Convention::Ud));
        assert!(!is_punctuation(&n, Convention::Ptb));
        let quote = Token::new(1, "``", "PUNCT", 0, "punct").with_xpos("``");
        assert!(is_punctuation(&quote, Convention::Ptb));
        let dollar = Token::new(1, "$", "SYM", 0, "dep").with_xpos("$");
        assert!(!is_punctuation(&dollar, Convention::Ptb));
    }
}
