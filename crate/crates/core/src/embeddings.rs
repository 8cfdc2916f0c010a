//! Fixed external word vectors.
//!
//! File format: a header line whose last field is the vector dimension,
//! followed by one `form<TAB>v1 v2 ... vk` line per word.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use ndarray::{Array2, ArrayView1};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct ExternalEmbeddings {
    forms: Vec<String>,
    index: HashMap<String, usize>,
    vectors: Array2<f64>,
}

impl ExternalEmbeddings {
    pub fn new(forms: Vec<String>, vectors: Array2<f64>) -> Result<Self> {
        if forms.len() != vectors.nrows() {
            return Err(Error::Argument(format!(
                "{} forms for {} vectors",
                forms.len(),
                vectors.nrows()
            )));
        }
        let mut index = HashMap::with_capacity(forms.len());
        for (i, form) in forms.iter().enumerate() {
            if index.insert(form.clone(), i).is_some() {
                return Err(Error::Argument(format!("duplicate form `{}`", form)));
            }
        }
        Ok(ExternalEmbeddings {
            forms,
            index,
            vectors,
        })
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn len(&self) -> usize {
        self.forms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forms.is_empty()
    }

    pub fn forms(&self) -> &[String] {
        &self.forms
    }

    pub fn vectors(&self) -> &Array2<f64> {
        &self.vectors
    }

    /// Vector for `form`, falling back to its lowercase spelling.
    pub fn lookup(&self, form: &str) -> Option<ArrayView1<'_, f64>> {
        self.index
            .get(form)
            .or_else(|| self.index.get(&form.to_lowercase()))
            .map(|&i| self.vectors.row(i))
    }
}

pub fn read_embeddings(path: impl AsRef<Path>) -> Result<ExternalEmbeddings> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_embeddings_from(BufReader::new(file))
}

pub fn read_embeddings_from<R: BufRead>(reader: R) -> Result<ExternalEmbeddings> {
    let mut lines = reader.lines().enumerate();
    let dim = match lines.next() {
        Some((_, line)) => {
            let line = line.map_err(|e| Error::format(1, e.to_string()))?;
            line.split_whitespace()
                .last()
                .and_then(|f| f.parse::<usize>().ok())
                .filter(|&d| d > 0)
                .ok_or_else(|| Error::format(1, "header must end with the vector dimension"))?
        }
        None => return Err(Error::format(1, "missing header line")),
    };

    let mut forms = Vec::new();
    let mut values = Vec::new();
    for (i, line) in lines {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::format(line_no, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let (form, rest) = line
            .split_once('\t')
            .ok_or_else(|| Error::format(line_no, "expected form<TAB>values"))?;
        let before = values.len();
        for field in rest.split_whitespace() {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::format(line_no, format!("bad number `{}`", field)))?;
            values.push(v);
        }
        if values.len() - before != dim {
            return Err(Error::format(
                line_no,
                format!("expected {} values, found {}", dim, values.len() - before),
            ));
        }
        forms.push(form.to_owned());
    }
    let vectors = Array2::from_shape_vec((forms.len(), dim), values)
        .map_err(|e| Error::Argument(e.to_string()))?;
    ExternalEmbeddings::new(forms, vectors)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_vectors_and_falls_back_to_lowercase() {
        let text = "2 3\nthe\t0.1 0.2 0.3\nDog\t1 2 3\n";
        let emb = read_embeddings_from(text.as_bytes()).unwrap();
        assert_eq!(emb.dim(), 3);
        assert_eq!(emb.len(), 2);
        assert_eq!(emb.lookup("The").unwrap()[2], 0.3);
        assert_eq!(emb.lookup("Dog").unwrap()[0], 1.0);
        assert!(emb.lookup("dog").is_none());
    }

    #[test]
    fn wrong_width_reports_line() {
        let text = "3\na\t1 2 3\nb\t1 2\n";
        match read_embeddings_from(text.as_bytes()) {
            Err(Error::Format { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {:?}", other),
        }
    }

    #[test]
    fn header_is_required() {
        assert!(read_embeddings_from("".as_bytes()).is_err());
        assert!(read_embeddings_from("dim\n".as_bytes()).is_err());
    }
}
