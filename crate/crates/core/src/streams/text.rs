//  Copyright 2026 The nigp-cms Authors
//
//  Licensed under the Apache License, Version 2.0 (the "License");
//  you may not use this file except in compliance with the License.
//  You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
//  Unless required by applicable law or agreed to in writing, software
//  distributed under the License is distributed on an "AS IS" BASIS,
//  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
//  See the License for the specific language governing permissions and
//  limitations under the License.

use std::collections::VecDeque;
use std::fs::File;
use std::io::{BufRead, BufReader, Lines};
use std::path::Path;

use crate::error::{Error, Result};

/// Input file layouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TextFormat {
    /// UTF-8 text, lowercased and split on runs of non-alphanumeric characters.
    Plain,
    /// Three header lines D, W, NNZ, then "docID wordID count" triples; each
    /// triple emits wordID `count` times.
    UciBagOfWords,
}

/// Lazily tokenizes any buffered reader.
pub struct TextStream<R> {
    lines: Lines<R>,
    format: TextFormat,
    line_no: usize,
    pending: VecDeque<String>,
    repeat: Option<(String, u64)>,
    header: Vec<u64>,
    triples: u64,
    failed: bool,
}

pub fn text_stream(path: impl AsRef<Path>, format: TextFormat) -> Result<TextStream<BufReader<File>>> {
    Ok(TextStream::new(BufReader::new(File::open(path)?), format))
}

fn parse_error(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

impl<R: BufRead> TextStream<R> {
    pub fn new(reader: R, format: TextFormat) -> Self {
        TextStream {
            lines: reader.lines(),
            format,
            line_no: 0,
            pending: VecDeque::new(),
            repeat: None,
            header: Vec::with_capacity(3),
            triples: 0,
            failed: false,
        }
    }

    fn next_line(&mut self) -> Option<Result<String>> {
        let line = self.lines.next()?;
        self.line_no += 1;
        Some(line.map_err(Error::from))
    }

    fn next_plain(&mut self) -> Option<Result<String>> {
        loop {
            if let Some(t) = self.pending.pop_front() {
                return Some(Ok(t));
            }
            let line = match self.next_line()? {
                Ok(l) => l,
                Err(e) => return Some(Err(e)),
            };
            self.pending
                .extend(line.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()).map(str::to_lowercase));
        }
    }

    fn next_uci(&mut self) -> Option<Result<String>> {
        loop {
            if let Some((token, left)) = &mut self.repeat {
                if *left > 0 {
                    *left -= 1;
                    return Some(Ok(token.clone()));
                }
                self.repeat = None;
            }
            let line = match self.next_line() {
                Some(Ok(l)) => l,
                Some(Err(e)) => return Some(Err(e)),
                None => return self.finish_uci(),
            };
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            let n = self.line_no;
            if self.header.len() < 3 {
                match trimmed.parse::<u64>() {
                    Ok(v) => self.header.push(v),
                    Err(_) => {
                        return Some(Err(parse_error(n, format!("expected a header integer, found {trimmed:?}"))))
                    }
                }
                continue;
            }
            let fields: Vec<&str> = trimmed.split_whitespace().collect();
            if fields.len() != 3 {
                return Some(Err(parse_error(
                    n,
                    format!("expected \"docID wordID count\", found {} fields", fields.len()),
                )));
            }
            let mut nums = [0u64; 3];
            for (slot, f) in nums.iter_mut().zip(&fields) {
                match f.parse::<u64>() {
                    Ok(v) => *slot = v,
                    Err(_) => return Some(Err(parse_error(n, format!("not a non-negative integer: {f:?}")))),
                }
            }
            let [doc, word, count] = nums;
            if doc == 0 || doc > self.header[0] {
                return Some(Err(parse_error(n, format!("docID {doc} outside 1..={}", self.header[0]))));
            }
            if word == 0 || word > self.header[1] {
                return Some(Err(parse_error(n, format!("wordID {word} outside 1..={}", self.header[1]))));
            }
            self.triples += 1;
            if self.triples > self.header[2] {
                return Some(Err(parse_error(n, format!("more than NNZ = {} triples", self.header[2]))));
            }
            self.repeat = Some((word.to_string(), count));
        }
    }

    fn finish_uci(&mut self) -> Option<Result<String>> {
        if self.header.len() < 3 {
            return Some(Err(parse_error(self.line_no, "file ends inside the D/W/NNZ header")));
        }
        if self.triples != self.header[2] {
            return Some(Err(parse_error(
                self.line_no,
                format!("header declares NNZ = {} but file has {} triples", self.header[2], self.triples),
            )));
        }
        None
    }
}

impl<R: BufRead> Iterator for TextStream<R> {
    type Item = Result<String>;

    fn next(&mut self) -> Option<Result<String>> {
        if self.failed {
            return None;
        }
        let item = match self.format {
            TextFormat::Plain => self.next_plain(),
            TextFormat::UciBagOfWords => self.next_uci(),
        };
        if matches!(item, Some(Err(_))) {
            self.failed = true;
        }
        item
    }
}
