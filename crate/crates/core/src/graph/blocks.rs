use super::{MetricGraph, Vertex, UNREACHABLE};

/// Vertex sets of the biconnected components (blocks), each sorted, listed
/// in the order the DFS closes them. Bridges form two-vertex blocks.
pub fn biconnected_blocks(g: &MetricGraph) -> Vec<Vec<Vertex>> {
    let n = g.vertex_count();
    if n == 1 {
        return vec![vec![0]];
    }
    let mut disc = vec![UNREACHABLE; n];
    let mut low = vec![0u32; n];
    let mut time = 0u32;
    let mut edge_stack: Vec<(Vertex, Vertex)> = Vec::new();
    let mut blocks = Vec::new();
    // frame: (vertex, parent, next neighbor index)
    let mut frames: Vec<(Vertex, Vertex, usize)> = Vec::new();

    for root in 0..n as Vertex {
        if disc[root as usize] != UNREACHABLE {
            continue;
        }
        disc[root as usize] = time;
        low[root as usize] = time;
        time += 1;
        frames.push((root, UNREACHABLE, 0));
        while let Some(frame) = frames.last_mut() {
            let (v, parent, idx) = *frame;
            let nbrs = g.neighbors(v);
            if idx < nbrs.len() {
                frame.2 += 1;
                let w = nbrs[idx];
                if disc[w as usize] == UNREACHABLE {
                    edge_stack.push((v, w));
                    disc[w as usize] = time;
                    low[w as usize] = time;
                    time += 1;
                    frames.push((w, v, 0));
                } else if w != parent && disc[w as usize] < disc[v as usize] {
                    edge_stack.push((v, w));
                    low[v as usize] = low[v as usize].min(disc[w as usize]);
                }
            } else {
                frames.pop();
                if parent != UNREACHABLE {
                    low[parent as usize] = low[parent as usize].min(low[v as usize]);
                    if low[v as usize] >= disc[parent as usize] {
                        let mut block = Vec::new();
                        while let Some((a, b)) = edge_stack.pop() {
                            block.push(a);
                            block.push(b);
                            if (a, b) == (parent, v) {
                                break;
                            }
                        }
                        block.sort_unstable();
                        block.dedup();
                        blocks.push(block);
                    }
                }
            }
        }
    }
    blocks
}
