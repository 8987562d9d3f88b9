//! Deterministic graph families. Vertex ids follow BFS order from the
//! natural root so that lowest-id tie-breaks are reproducible.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{MetricGraph, Vertex};
use crate::error::{CoreError, Result};

pub fn path(n: usize) -> MetricGraph {
    assert!(n >= 1);
    if n == 1 {
        return MetricGraph::singleton();
    }
    let edges: Vec<_> = (0..n as Vertex - 1).map(|i| (i, i + 1)).collect();
    MetricGraph::from_edges(n, &edges).expect("path is connected")
}

pub fn cycle(n: usize) -> MetricGraph {
    assert!(n >= 3, "cycle needs at least 3 vertices");
    let edges: Vec<_> = (0..n as Vertex)
        .map(|i| (i, (i + 1) % n as Vertex))
        .collect();
    MetricGraph::from_edges(n, &edges).expect("cycle is connected")
}

pub fn star(leaves: usize) -> MetricGraph {
    assert!(leaves >= 1);
    let edges: Vec<_> = (1..=leaves as Vertex).map(|i| (0, i)).collect();
    MetricGraph::from_edges(leaves + 1, &edges).expect("star is connected")
}

pub fn grid(width: usize, height: usize) -> MetricGraph {
    assert!(width >= 1 && height >= 1);
    let id = |x: usize, y: usize| (y * width + x) as Vertex;
    let mut edges = Vec::new();
    for y in 0..height {
        for x in 0..width {
            if x + 1 < width {
                edges.push((id(x, y), id(x + 1, y)));
            }
            if y + 1 < height {
                edges.push((id(x, y), id(x, y + 1)));
            }
        }
    }
    if edges.is_empty() {
        return MetricGraph::singleton();
    }
    MetricGraph::from_edges(width * height, &edges).expect("grid is connected")
}

/// Rooted `valence`-regular tree truncated at `depth`: the root and every
/// internal vertex have `valence` neighbors, leaves sit at distance `depth`.
pub fn regular_tree(valence: usize, depth: usize) -> MetricGraph {
    assert!(valence >= 2, "valence must be at least 2");
    if depth == 0 {
        return MetricGraph::singleton();
    }
    let mut edges = Vec::new();
    let mut frontier: Vec<Vertex> = vec![0];
    let mut next_id: Vertex = 1;
    for level in 0..depth {
        let children = if level == 0 { valence } else { valence - 1 };
        let mut next = Vec::with_capacity(frontier.len() * children);
        for &parent in &frontier {
            for _ in 0..children {
                edges.push((parent, next_id));
                next.push(next_id);
                next_id += 1;
            }
        }
        frontier = next;
    }
    MetricGraph::from_edges(next_id as usize, &edges).expect("tree is connected")
}

/// A letter of a free group: generator `g` (1-based) with sign.
pub type Letter = i8;

/// Ball of reduced words in the free group of the given rank, with its
/// Cayley graph over the standard generators.
#[derive(Clone, Debug)]
pub struct FreeGroupBall {
    pub rank: usize,
    pub radius: usize,
    pub graph: MetricGraph,
    pub words: Vec<Vec<Letter>>,
    index: HashMap<Vec<Letter>, Vertex>,
}

impl FreeGroupBall {
    pub fn new(rank: usize, radius: usize) -> Self {
        assert!((1..=26).contains(&rank), "rank out of range");
        // letter order: a, a^-1, b, b^-1, ...
        let alphabet: Vec<Letter> = (1..=rank as Letter).flat_map(|g| [g, -g]).collect();
        let mut words: Vec<Vec<Letter>> = vec![Vec::new()];
        let mut index = HashMap::new();
        index.insert(Vec::new(), 0);
        let mut edges = Vec::new();
        let mut frontier: Vec<Vertex> = vec![0];
        for _ in 0..radius {
            let mut next = Vec::new();
            for &w in &frontier {
                let last = words[w as usize].last().copied();
                for &l in &alphabet {
                    if last == Some(-l) {
                        continue;
                    }
                    let mut word = words[w as usize].clone();
                    word.push(l);
                    let id = words.len() as Vertex;
                    index.insert(word.clone(), id);
                    words.push(word);
                    edges.push((w, id));
                    next.push(id);
                }
            }
            frontier = next;
        }
        let graph = if edges.is_empty() {
            MetricGraph::singleton()
        } else {
            MetricGraph::from_edges(words.len(), &edges).expect("ball is connected")
        };
        FreeGroupBall {
            rank,
            radius,
            graph,
            words,
            index,
        }
    }

    pub fn vertex_of(&self, word: &[Letter]) -> Option<Vertex> {
        self.index.get(word).copied()
    }

    pub fn word_string(&self, v: Vertex) -> String {
        word_to_string(&self.words[v as usize])
    }
}

pub fn free_group_ball(rank: usize, radius: usize) -> MetricGraph {
    FreeGroupBall::new(rank, radius).graph
}

/// Freely reduce a word.
pub fn reduce(word: &[Letter]) -> Vec<Letter> {
    let mut out: Vec<Letter> = Vec::with_capacity(word.len());
    for &l in word {
        if out.last() == Some(&-l) {
            out.pop();
        } else {
            out.push(l);
        }
    }
    out
}

/// Parse `"ab"`, `"aB"` (capital = inverse) into letters.
pub fn parse_word(s: &str) -> Result<Vec<Letter>> {
    s.chars()
        .map(|c| {
            if c.is_ascii_lowercase() {
                Ok((c as u8 - b'a' + 1) as Letter)
            } else if c.is_ascii_uppercase() {
                Ok(-((c as u8 - b'A' + 1) as Letter))
            } else {
                Err(CoreError::InvalidParams(format!(
                    "bad letter {c:?} in word {s:?}"
                )))
            }
        })
        .collect()
}

pub fn word_to_string(word: &[Letter]) -> String {
    if word.is_empty() {
        return "1".into();
    }
    word.iter()
        .map(|&l| {
            if l > 0 {
                (b'a' + l as u8 - 1) as char
            } else {
                (b'A' + (-l) as u8 - 1) as char
            }
        })
        .collect()
}

/// Serializable description of a generated graph.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GraphSpec {
    Path { n: usize },
    Cycle { n: usize },
    Star { leaves: usize },
    Grid { width: usize, height: usize },
    RegularTree { valence: usize, depth: usize },
    FreeGroupBall { rank: usize, radius: usize },
    EdgeList { path: String },
}

impl GraphSpec {
    pub fn build(&self) -> Result<MetricGraph> {
        match *self {
            GraphSpec::Path { n } if n >= 1 => Ok(path(n)),
            GraphSpec::Cycle { n } if n >= 3 => Ok(cycle(n)),
            GraphSpec::Star { leaves } if leaves >= 1 => Ok(star(leaves)),
            GraphSpec::Grid { width, height } if width >= 1 && height >= 1 => {
                Ok(grid(width, height))
            }
            GraphSpec::RegularTree { valence, depth } if valence >= 2 => {
                Ok(regular_tree(valence, depth))
            }
            GraphSpec::FreeGroupBall { rank, radius } if rank >= 2 && radius >= 1 => {
                Ok(free_group_ball(rank, radius))
            }
            GraphSpec::EdgeList { ref path } => super::io::read_edge_list_file(path),
            ref other => Err(CoreError::InvalidParams(format!("{other:?}"))),
        }
    }

    pub fn label(&self) -> String {
        match self {
            GraphSpec::Path { n } => format!("P{n}"),
            GraphSpec::Cycle { n } => format!("C{n}"),
            GraphSpec::Star { leaves } => format!("K1,{leaves}"),
            GraphSpec::Grid { width, height } => format!("grid{width}x{height}"),
            GraphSpec::RegularTree { valence, depth } => format!("T{valence}-depth-{depth}"),
            GraphSpec::FreeGroupBall { rank, radius } => format!("F{rank}-ball-{radius}"),
            GraphSpec::EdgeList { path } => path.clone(),
        }
    }
}
