use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use super::vocab::{TokenId, Vocabulary};
use super::DecodeError;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct TrieNode {
    children: BTreeMap<TokenId, usize>,
    terminal: bool,
}

/// Prefix tree over the token sequences of schema names. Node 0 is the root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenTrie {
    nodes: Vec<TrieNode>,
    items: BTreeSet<String>,
}

impl Default for TokenTrie {
    fn default() -> Self {
        TokenTrie { nodes: vec![TrieNode::default()], items: BTreeSet::new() }
    }
}

impl TokenTrie {
    pub const ROOT: usize = 0;

    pub fn build<'a>(items: impl IntoIterator<Item = &'a str>, vocab: &Vocabulary) -> Result<Self, DecodeError> {
        let mut trie = TokenTrie::default();
        for item in items {
            trie.insert(item, vocab)?;
        }
        Ok(trie)
    }

    pub fn insert(&mut self, item: &str, vocab: &Vocabulary) -> Result<(), DecodeError> {
        let ids = vocab.encode_schema_name(item)?;
        self.insert_ids(&ids);
        self.items.insert(item.to_string());
        Ok(())
    }

    fn insert_ids(&mut self, ids: &[TokenId]) {
        let mut node = Self::ROOT;
        for &t in ids {
            node = match self.nodes[node].children.get(&t) {
                Some(&n) => n,
                None => {
                    self.nodes.push(TrieNode::default());
                    let n = self.nodes.len() - 1;
                    self.nodes[node].children.insert(t, n);
                    n
                }
            };
        }
        self.nodes[node].terminal = true;
    }

    pub fn child(&self, node: usize, token: TokenId) -> Option<usize> {
        self.nodes[node].children.get(&token).copied()
    }

    pub fn children(&self, node: usize) -> impl Iterator<Item = TokenId> + '_ {
        self.nodes[node].children.keys().copied()
    }

    pub fn is_terminal(&self, node: usize) -> bool {
        self.nodes[node].terminal
    }

    /// Node reached by following `ids` from the root.
    pub fn walk(&self, ids: &[TokenId]) -> Option<usize> {
        ids.iter().try_fold(Self::ROOT, |n, &t| self.child(n, t))
    }

    pub fn contains(&self, ids: &[TokenId]) -> bool {
        self.walk(ids).is_some_and(|n| self.is_terminal(n))
    }

    pub fn items(&self) -> &BTreeSet<String> {
        &self.items
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Fewest tokens from each node to a terminal; `usize::MAX` when none.
    pub fn min_depths(&self) -> Vec<usize> {
        // children always come after their parent in the arena
        let mut out = vec![usize::MAX; self.nodes.len()];
        for n in (0..self.nodes.len()).rev() {
            out[n] = if self.nodes[n].terminal {
                0
            } else {
                self.nodes[n].children.values().map(|&c| out[c].saturating_add(1)).min().unwrap_or(usize::MAX)
            };
        }
        out
    }

    /// Every root-to-terminal token path, in token order.
    pub fn paths(&self) -> Vec<Vec<TokenId>> {
        let mut out = Vec::new();
        let mut stack = vec![(Self::ROOT, Vec::new())];
        while let Some((node, path)) = stack.pop() {
            if self.nodes[node].terminal {
                out.push(path.clone());
            }
            for (&t, &child) in self.nodes[node].children.iter().rev() {
                let mut p = path.clone();
                p.push(t);
                stack.push((child, p));
            }
        }
        out
    }

    /// One item per line.
    pub fn dump<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for item in &self.items {
            writeln!(w, "{item}")?;
        }
        Ok(())
    }

    pub fn load<R: BufRead>(r: R, vocab: &Vocabulary) -> Result<Self, DecodeError> {
        let mut trie = TokenTrie::default();
        for line in r.lines() {
            let line = line.map_err(|e| DecodeError::Data(e.to_string()))?;
            if !line.is_empty() {
                trie.insert(&line, vocab)?;
            }
        }
        Ok(trie)
    }
}
