//! Tree shapes used by tests, the fuzzer and the benchmarks.
//!
//! Every generator returns `n - 1` edges over vertices `0..n`.

use rand::Rng;

/// Decodes a Prüfer sequence of length `n - 2` into the edges of a
/// labeled tree on `n` vertices.
pub fn prufer_decode(seq: &[u32], n: usize) -> Vec<(u32, u32)> {
    if n < 2 {
        return Vec::new();
    }
    assert_eq!(seq.len(), n - 2, "sequence length must be n - 2");
    let mut degree = vec![1u32; n];
    for &x in seq {
        degree[x as usize] += 1;
    }
    let mut edges = Vec::with_capacity(n - 1);
    // Linear-time decode: `ptr` scans for the next leaf, `leaf` is the
    // current smallest one.
    let mut ptr = degree.iter().position(|&d| d == 1).expect("a leaf exists");
    let mut leaf = ptr;
    for &x in seq {
        let x = x as usize;
        edges.push((leaf as u32, x as u32));
        degree[x] -= 1;
        if degree[x] == 1 && x < ptr {
            leaf = x;
        } else {
            ptr += 1;
            while degree[ptr] != 1 {
                ptr += 1;
            }
            leaf = ptr;
        }
    }
    edges.push((leaf as u32, (n - 1) as u32));
    edges
}

/// Uniformly random labeled tree.
pub fn random_tree<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<(u32, u32)> {
    if n < 2 {
        return Vec::new();
    }
    let seq: Vec<u32> = (0..n - 2).map(|_| rng.gen_range(0..n as u32)).collect();
    prufer_decode(&seq, n)
}

pub fn path(n: usize) -> Vec<(u32, u32)> {
    (1..n as u32).map(|i| (i - 1, i)).collect()
}

pub fn star(n: usize) -> Vec<(u32, u32)> {
    (1..n as u32).map(|i| (0, i)).collect()
}

/// A spine over the even vertices with one leg per spine vertex.
pub fn caterpillar(n: usize) -> Vec<(u32, u32)> {
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    for v in 1..n as u32 {
        if v % 2 == 0 {
            edges.push((v - 2, v));
        } else {
            edges.push((v - 1, v));
        }
    }
    edges
}
