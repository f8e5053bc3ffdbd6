use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use super::CsrMatrix;

/// Reverse Cuthill–McKee ordering of the symmetrized pattern of `a`.
///
/// Rows whose symmetrized degree exceeds `dense_threshold` (the multiplier
/// rows of mean-value constraints, typically) are left out of the search and
/// appended at the end in their original order. Returns `perm` with
/// `perm[new] = old`.
pub fn reverse_cuthill_mckee(a: &CsrMatrix, dense_threshold: usize) -> Vec<usize> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "RCM needs a square matrix");
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for (j, _) in a.row(i) {
            if i != j {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    for l in adj.iter_mut() {
        l.sort_unstable();
        l.dedup();
    }
    let dense: Vec<bool> = adj.iter().map(|l| l.len() > dense_threshold).collect();
    let degree: Vec<usize> = adj
        .iter()
        .map(|l| l.iter().filter(|&&j| !dense[j]).count())
        .collect();

    let mut visited = dense.clone();
    let mut order = Vec::with_capacity(n);
    let mut queue = VecDeque::new();
    while let Some(start) = (0..n).filter(|&i| !visited[i]).min_by_key(|&i| degree[i]) {
        let root = pseudo_peripheral(start, &adj, &dense, &degree);
        visited[root] = true;
        queue.push_back(root);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nbrs: Vec<usize> = adj[v].iter().copied().filter(|&j| !visited[j]).collect();
            nbrs.sort_by_key(|&j| degree[j]);
            for j in nbrs {
                visited[j] = true;
                queue.push_back(j);
            }
        }
    }
    order.reverse();
    order.extend((0..n).filter(|&i| dense[i]));
    order
}

fn bfs_levels(root: usize, adj: &[Vec<usize>], dense: &[bool]) -> (Vec<usize>, usize) {
    let mut level = vec![usize::MAX; adj.len()];
    level[root] = 0;
    let mut queue = VecDeque::from([root]);
    let mut last = Vec::new();
    let mut depth = 0;
    while let Some(v) = queue.pop_front() {
        if level[v] > depth {
            depth = level[v];
            last.clear();
        }
        last.push(v);
        for &j in &adj[v] {
            if !dense[j] && level[j] == usize::MAX {
                level[j] = level[v] + 1;
                queue.push_back(j);
            }
        }
    }
    (last, depth)
}

fn pseudo_peripheral(start: usize, adj: &[Vec<usize>], dense: &[bool], degree: &[usize]) -> usize {
    let mut root = start;
    let (mut last, mut depth) = bfs_levels(root, adj, dense);
    for _ in 0..8 {
        let cand = *last.iter().min_by_key(|&&v| degree[v]).unwrap();
        let (l2, d2) = bfs_levels(cand, adj, dense);
        if d2 <= depth {
            break;
        }
        root = cand;
        last = l2;
        depth = d2;
    }
    root
}
