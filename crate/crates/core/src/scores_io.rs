//! Text interchange format for score sets. The grammar is documented in
//! `docs/score-format.md`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::{Array2, Array3};

use crate::error::{Error, Result};
use crate::scores::{sigmoid, ScoreSet, ORDER_CLASSES};

fn write_row<'a, W: Write>(
    out: &mut W,
    values: impl Iterator<Item = &'a f64>,
) -> std::io::Result<()> {
    let mut first = true;
    for v in values {
        if !first {
            out.write_all(b" ")?;
        }
        write!(out, "{}", v)?;
        first = false;
    }
    out.write_all(b"\n")
}

/// Whether `arc_prob` is exactly the logistic squash of `arc` off the diagonal.
fn prob_is_implied(s: &ScoreSet) -> bool {
    s.arc
        .indexed_iter()
        .all(|((h, d), &v)| h == d || s.arc_prob[[h, d]] == sigmoid(v))
}

pub fn write_scores_to<W: Write>(mut out: W, items: &[(String, ScoreSet)]) -> Result<()> {
    let io = |e: std::io::Error| Error::Argument(format!("writing scores: {}", e));
    for (id, s) in items {
        let n = s.n();
        let labels = s.num_labels();
        writeln!(out, "sentence {}", id).map_err(io)?;
        writeln!(out, "n {}", n).map_err(io)?;
        writeln!(out, "labels {}", labels).map_err(io)?;
        writeln!(out, "arc").map_err(io)?;
        for row in s.arc.rows() {
            write_row(&mut out, row.iter()).map_err(io)?;
        }
        if !prob_is_implied(s) {
            writeln!(out, "arc_prob").map_err(io)?;
            for row in s.arc_prob.rows() {
                write_row(&mut out, row.iter()).map_err(io)?;
            }
        }
        writeln!(out, "order").map_err(io)?;
        for row in s.order_logits.rows() {
            write_row(&mut out, row.iter()).map_err(io)?;
        }
        if let Some(label) = &s.label {
            writeln!(out, "label").map_err(io)?;
            for h in 0..=n {
                for d in 0..n {
                    write_row(&mut out, label.slice(ndarray::s![h, d, ..]).iter()).map_err(io)?;
                }
            }
        }
        writeln!(out, "end").map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn write_scores(path: impl AsRef<Path>, items: &[(String, ScoreSet)]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_scores_to(BufWriter::new(file), items)
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    line: usize,
}

impl<R: BufRead> Lines<R> {
    fn next(&mut self) -> Result<Option<String>> {
        match self.inner.next() {
            None => Ok(None),
            Some(l) => {
                self.line += 1;
                l.map(Some)
                    .map_err(|e| Error::format(self.line, e.to_string()))
            }
        }
    }

    fn expect(&mut self, what: &str) -> Result<String> {
        self.next()?.ok_or_else(|| {
            Error::format(
                self.line + 1,
                format!("unexpected end of file, expected {}", what),
            )
        })
    }

    fn keyword(&mut self, word: &str) -> Result<()> {
        let l = self.expect(word)?;
        if l.trim() != word {
            return Err(Error::format(
                self.line,
                format!("expected `{}`, found `{}`", word, l),
            ));
        }
        Ok(())
    }

    fn count(&mut self, key: &str) -> Result<usize> {
        let l = self.expect(key)?;
        l.strip_prefix(key)
            .and_then(|rest| rest.trim().parse().ok())
            .ok_or_else(|| Error::format(self.line, format!("expected `{} <count>`", key)))
    }

    fn row(&mut self, width: usize) -> Result<Vec<f64>> {
        let l = self.expect("a row of numbers")?;
        let values = l
            .split_whitespace()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| Error::format(self.line, format!("bad number `{}`", f)))
            })
            .collect::<Result<Vec<_>>>()?;
        if values.len() != width {
            return Err(Error::format(
                self.line,
                format!("expected {} numbers, found {}", width, values.len()),
            ));
        }
        Ok(values)
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<Array2<f64>> {
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            data.extend(self.row(cols)?);
        }
        Ok(Array2::from_shape_vec((rows, cols), data).expect("row widths checked"))
    }
}

pub fn read_scores_from<R: BufRead>(reader: R) -> Result<Vec<(String, ScoreSet)>> {
    let mut lines = Lines {
        inner: reader.lines(),
        line: 0,
    };
    let mut items = Vec::new();
    while let Some(l) = lines.next()? {
        if l.trim().is_empty() {
            continue;
        }
        let id = l
            .strip_prefix("sentence ")
            .ok_or_else(|| {
                Error::format(
                    lines.line,
                    format!("expected `sentence <id>`, found `{}`", l),
                )
            })?
            .to_owned();
        let n = lines.count("n")?;
        if n == 0 {
            return Err(Error::format(
                lines.line,
                "sentence length must be positive",
            ));
        }
        let labels = lines.count("labels")?;
        lines.keyword("arc")?;
        let arc = lines.matrix(n + 1, n + 1)?;

        let mut section = lines.expect("`arc_prob` or `order`")?;
        let arc_prob = if section.trim() == "arc_prob" {
            let p = lines.matrix(n + 1, n + 1)?;
            section = lines.expect("`order`")?;
            Some(p)
        } else {
            None
        };
        if section.trim() != "order" {
            return Err(Error::format(
                lines.line,
                format!("expected `order`, found `{}`", section),
            ));
        }
        let order = lines.matrix(n, ORDER_CLASSES)?;

        let label = if labels > 0 {
            lines.keyword("label")?;
            let flat = lines.matrix((n + 1) * n, labels)?;
            Some(
                Array3::from_shape_vec((n + 1, n, labels), flat.into_raw_vec_and_offset().0)
                    .expect("sizes match"),
            )
        } else {
            None
        };
        lines.keyword("end")?;

        let mut scores = ScoreSet::from_raw(arc, order, label)
            .map_err(|e| Error::format(lines.line, e.to_string()))?;
        if let Some(mut p) = arc_prob {
            p.diag_mut().fill(0.0);
            scores.arc_prob = p;
        }
        items.push((id, scores));
    }
    Ok(items)
}

pub fn read_scores(path: impl AsRef<Path>) -> Result<Vec<(String, ScoreSet)>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_scores_from(BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::random_scores;
    use crate::tree::{oracle_scores_labeled, DepTree};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn round_trip(items: &[(String, ScoreSet)]) -> Vec<(String, ScoreSet)> {
        let mut buf = Vec::new();
        write_scores_to(&mut buf, items).unwrap();
        read_scores_from(buf.as_slice()).unwrap()
    }

    #[test]
    fn random_scores_round_trip_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let items: Vec<_> = (1..5)
            .map(|n| (format!("s {}", n), random_scores(n, 3, &mut rng)))
            .collect();
        assert_eq!(round_trip(&items), items);
    }

    #[test]
    fn oracle_scores_keep_explicit_probabilities() {
        let s = oracle_scores_labeled(&DepTree::unlabeled(vec![2, 0]), &[0, 1], 2).unwrap();
        let back = round_trip(&[("o".into(), s.clone())]);
        assert_eq!(back[0].1, s);
    }

    #[test]
    fn unlabeled_and_full_precision() {
        let mut arc = Array2::zeros((2, 2));
        arc[[0, 1]] = 0.1 + 0.2;
        let s = ScoreSet::from_raw(arc, Array2::zeros((1, ORDER_CLASSES)), None).unwrap();
        let back = round_trip(&[("x".into(), s.clone())]);
        assert_eq!(back[0].1.arc[[0, 1]], 0.1 + 0.2);
        assert!(back[0].1.label.is_none());
    }

    #[test]
    fn errors_report_lines() {
        let text = "sentence a\nn 1\nlabels 0\narc\n0 1\n0 0 0\n";
        match read_scores_from(text.as_bytes()) {
            Err(Error::Format { line, .. }) => assert_eq!(line, 6),
            other => panic!("unexpected {:?}", other),
        }
        assert!(read_scores_from("garbage\n".as_bytes()).is_err());
        assert!(read_scores_from("".as_bytes()).unwrap().is_empty());
    }
}
