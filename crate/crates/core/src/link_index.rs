//! Immutable bidirectional link graph over article titles.
//!
//! Titles are interned to dense [`ArticleId`]s in first-seen order. Both
//! adjacency directions ("is linking" and "is linked by") are kept as sorted
//! id lists so iteration order is deterministic and set intersections are
//! linear merges.
//!
//! The persisted form is documented in `docs/index-format.md`.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

/// Magic bytes opening every persisted index.
pub const MAGIC: &[u8; 6] = b"CLIDX1";
/// Layout version written after the magic.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ArticleId(pub u32);

impl ArticleId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ArticleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum IndexError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("empty article title")]
    EmptyTitle,
    #[error("not an index file")]
    NotAnIndex,
    #[error("truncated index")]
    Truncated,
    #[error("unsupported index version {found} (expected {FORMAT_VERSION})")]
    UnsupportedVersion { found: u32 },
    #[error("corrupt index: {0}")]
    Corrupt(String),
    #[error("too many articles for 32-bit ids")]
    TooLarge,
}

/// Accumulates edges and interns titles; [`LinkIndexBuilder::build`] freezes
/// the result into a [`LinkIndex`].
#[derive(Debug, Default)]
pub struct LinkIndexBuilder {
    titles: Vec<String>,
    ids: HashMap<String, ArticleId>,
    edges: Vec<(u32, u32)>,
}

impl LinkIndexBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    fn intern(&mut self, title: &str) -> Result<ArticleId, IndexError> {
        let title = title.trim();
        if title.is_empty() {
            return Err(IndexError::EmptyTitle);
        }
        if let Some(&id) = self.ids.get(title) {
            return Ok(id);
        }
        let raw = u32::try_from(self.titles.len()).map_err(|_| IndexError::TooLarge)?;
        let id = ArticleId(raw);
        self.titles.push(title.to_string());
        self.ids.insert(title.to_string(), id);
        Ok(id)
    }

    /// Registers a title without any edge. It still counts toward |W|.
    pub fn add_title(&mut self, title: &str) -> Result<ArticleId, IndexError> {
        self.intern(title)
    }

    /// Adds `source -> target`. Both titles count toward |W|; self-loops are dropped.
    pub fn add_edge(&mut self, source: &str, target: &str) -> Result<(), IndexError> {
        let s = self.intern(source)?;
        let t = self.intern(target)?;
        if s != t {
            self.edges.push((s.0, t.0));
        }
        Ok(())
    }

    pub fn build(mut self) -> LinkIndex {
        self.edges.sort_unstable();
        self.edges.dedup();
        let n = self.titles.len();
        let mut outlinks = vec![Vec::new(); n];
        let mut inlinks = vec![Vec::new(); n];
        // Edges are sorted by (source, target), so outlink lists come out
        // sorted; inlink lists receive sources in ascending order too.
        for &(s, t) in &self.edges {
            outlinks[s as usize].push(ArticleId(t));
            inlinks[t as usize].push(ArticleId(s));
        }
        LinkIndex {
            titles: self.titles,
            ids: self.ids,
            outlinks,
            inlinks,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkIndex {
    titles: Vec<String>,
    ids: HashMap<String, ArticleId>,
    outlinks: Vec<Vec<ArticleId>>,
    inlinks: Vec<Vec<ArticleId>>,
}

impl LinkIndex {
    /// Builds an index from in-memory `(source, target)` title pairs.
    pub fn from_edges<I, S, T>(edges: I) -> Result<LinkIndex, IndexError>
    where
        I: IntoIterator<Item = (S, T)>,
        S: AsRef<str>,
        T: AsRef<str>,
    {
        let mut builder = LinkIndexBuilder::new();
        for (s, t) in edges {
            builder.add_edge(s.as_ref(), t.as_ref())?;
        }
        Ok(builder.build())
    }

    /// Reads `source<TAB>target` lines. Blank lines and `#` comments are skipped.
    pub fn from_tsv<R: BufRead>(reader: R) -> Result<LinkIndex, IndexError> {
        let mut builder = LinkIndexBuilder::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = lineno + 1;
            let content = line.trim_end_matches(['\r', '\n']);
            if content.trim().is_empty() || content.trim_start().starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = content.split('\t').collect();
            if fields.len() != 2 {
                return Err(IndexError::Parse {
                    line: lineno,
                    message: format!("expected 2 tab-separated fields, found {}", fields.len()),
                });
            }
            builder
                .add_edge(fields[0], fields[1])
                .map_err(|e| match e {
                    IndexError::EmptyTitle => IndexError::Parse {
                        line: lineno,
                        message: "empty title".to_string(),
                    },
                    other => other,
                })?;
        }
        Ok(builder.build())
    }

    pub fn from_tsv_path(path: impl AsRef<Path>) -> Result<LinkIndex, IndexError> {
        let file = File::open(path)?;
        Self::from_tsv(io::BufReader::new(file))
    }

    /// |W|: every distinct title seen, whether or not it has links.
    pub fn total_articles(&self) -> usize {
        self.titles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.titles.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.outlinks.iter().map(Vec::len).sum()
    }

    pub fn id(&self, title: &str) -> Option<ArticleId> {
        self.ids.get(title.trim()).copied()
    }

    pub fn title(&self, id: ArticleId) -> Option<&str> {
        self.titles.get(id.index()).map(String::as_str)
    }

    pub fn titles(&self) -> impl Iterator<Item = (ArticleId, &str)> {
        self.titles
            .iter()
            .enumerate()
            .map(|(i, t)| (ArticleId(i as u32), t.as_str()))
    }

    /// Articles `id` links to, sorted by id.
    pub fn outlinks_of(&self, id: ArticleId) -> &[ArticleId] {
        self.outlinks.get(id.index()).map_or(&[], Vec::as_slice)
    }

    /// Articles linking to `id`, sorted by id.
    pub fn inlinks_of(&self, id: ArticleId) -> &[ArticleId] {
        self.inlinks.get(id.index()).map_or(&[], Vec::as_slice)
    }

    /// Titles of the articles linking to `title`, sorted alphabetically.
    /// Unknown titles have no inlinks.
    pub fn inlinks(&self, title: &str) -> Vec<&str> {
        self.titles_of(self.id(title).map_or(&[], |id| self.inlinks_of(id)))
    }

    /// Titles `title` links to, sorted alphabetically.
    pub fn outlinks(&self, title: &str) -> Vec<&str> {
        self.titles_of(self.id(title).map_or(&[], |id| self.outlinks_of(id)))
    }

    fn titles_of(&self, ids: &[ArticleId]) -> Vec<&str> {
        let mut out: Vec<&str> = ids.iter().map(|&i| self.titles[i.index()].as_str()).collect();
        out.sort_unstable();
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), IndexError> {
        let mut out = BufWriter::new(File::create(path)?);
        self.write_to(&mut out)?;
        out.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<LinkIndex, IndexError> {
        let mut buf = Vec::new();
        File::open(path)?.read_to_end(&mut buf)?;
        Self::from_bytes(&buf)
    }

    pub fn write_to<W: Write>(&self, out: &mut W) -> Result<(), IndexError> {
        let n = u32::try_from(self.titles.len()).map_err(|_| IndexError::TooLarge)?;
        out.write_all(MAGIC)?;
        out.write_all(&FORMAT_VERSION.to_le_bytes())?;
        out.write_all(&n.to_le_bytes())?;
        for title in &self.titles {
            let len = u32::try_from(title.len()).map_err(|_| IndexError::TooLarge)?;
            out.write_all(&len.to_le_bytes())?;
            out.write_all(title.as_bytes())?;
        }
        for lists in [&self.outlinks, &self.inlinks] {
            for list in lists {
                out.write_all(&(list.len() as u32).to_le_bytes())?;
                for id in list {
                    out.write_all(&id.0.to_le_bytes())?;
                }
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<LinkIndex, IndexError> {
        if bytes.len() < MAGIC.len() {
            return if MAGIC.starts_with(bytes) {
                Err(IndexError::Truncated)
            } else {
                Err(IndexError::NotAnIndex)
            };
        }
        if &bytes[..MAGIC.len()] != MAGIC {
            return Err(IndexError::NotAnIndex);
        }
        let mut cur = Cursor {
            bytes,
            pos: MAGIC.len(),
        };
        let version = cur.u32()?;
        if version != FORMAT_VERSION {
            return Err(IndexError::UnsupportedVersion { found: version });
        }
        let n = cur.u32()? as usize;
        let mut titles = Vec::with_capacity(n.min(1 << 20));
        let mut ids = HashMap::with_capacity(n.min(1 << 20));
        for i in 0..n {
            let len = cur.u32()? as usize;
            let raw = cur.take(len)?;
            let title = std::str::from_utf8(raw)
                .map_err(|_| IndexError::Corrupt(format!("title {i} is not valid UTF-8")))?
                .to_string();
            if title.is_empty() {
                return Err(IndexError::Corrupt(format!("title {i} is empty")));
            }
            if ids.insert(title.clone(), ArticleId(i as u32)).is_some() {
                return Err(IndexError::Corrupt(format!("duplicate title {title:?}")));
            }
            titles.push(title);
        }
        let outlinks = cur.adjacency(n)?;
        let inlinks = cur.adjacency(n)?;
        if cur.pos != bytes.len() {
            return Err(IndexError::Corrupt("trailing bytes after adjacency".to_string()));
        }
        let index = LinkIndex {
            titles,
            ids,
            outlinks,
            inlinks,
        };
        index.check_consistency()?;
        Ok(index)
    }

    fn check_consistency(&self) -> Result<(), IndexError> {
        for (a, outs) in self.outlinks.iter().enumerate() {
            for b in outs {
                if b.index() == a {
                    return Err(IndexError::Corrupt(format!("self-loop on id {a}")));
                }
                if self.inlinks[b.index()].binary_search(&ArticleId(a as u32)).is_err() {
                    return Err(IndexError::Corrupt(format!(
                        "edge {a}->{} missing from inlinks",
                        b.0
                    )));
                }
            }
        }
        let forward = self.edge_count();
        let backward: usize = self.inlinks.iter().map(Vec::len).sum();
        if forward != backward {
            return Err(IndexError::Corrupt(format!(
                "{forward} outlinks but {backward} inlinks"
            )));
        }
        Ok(())
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8], IndexError> {
        let end = self.pos.checked_add(len).ok_or(IndexError::Truncated)?;
        let slice = self.bytes.get(self.pos..end).ok_or(IndexError::Truncated)?;
        self.pos = end;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32, IndexError> {
        let raw = self.take(4)?;
        Ok(u32::from_le_bytes(raw.try_into().expect("4 bytes")))
    }

    fn adjacency(&mut self, n: usize) -> Result<Vec<Vec<ArticleId>>, IndexError> {
        let mut lists = Vec::with_capacity(n.min(1 << 20));
        for node in 0..n {
            let count = self.u32()? as usize;
            let mut list = Vec::with_capacity(count.min(1 << 16));
            for _ in 0..count {
                let id = self.u32()?;
                if id as usize >= n {
                    return Err(IndexError::Corrupt(format!(
                        "id {id} out of range in list of {node}"
                    )));
                }
                if list.last().is_some_and(|prev: &ArticleId| prev.0 >= id) {
                    return Err(IndexError::Corrupt(format!(
                        "adjacency of {node} is not strictly sorted"
                    )));
                }
                list.push(ArticleId(id));
            }
            lists.push(list);
        }
        Ok(lists)
    }
}

/// Size of the intersection of two sorted id lists.
pub fn sorted_intersection_len(a: &[ArticleId], b: &[ArticleId]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}
