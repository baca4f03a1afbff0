//! Deterministic random workloads over a fixed tree shape.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use treematch::trees;

use crate::script::{Command, CommandScript};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, clap::ValueEnum)]
pub enum WorkloadKind {
    Path,
    Star,
    Caterpillar,
    Random,
}

impl WorkloadKind {
    pub const ALL: [WorkloadKind; 4] = [WorkloadKind::Path, WorkloadKind::Star, WorkloadKind::Caterpillar, WorkloadKind::Random];

    pub fn name(self) -> &'static str {
        match self {
            WorkloadKind::Path => "path",
            WorkloadKind::Star => "star",
            WorkloadKind::Caterpillar => "caterpillar",
            WorkloadKind::Random => "random",
        }
    }

    /// The `n`-vertex tree of this shape; only `Random` consumes `rng`.
    pub fn tree(self, n: usize, rng: &mut ChaCha8Rng) -> Vec<(u32, u32)> {
        match self {
            WorkloadKind::Path => trees::path(n),
            WorkloadKind::Star => trees::star(n),
            WorkloadKind::Caterpillar => trees::caterpillar(n),
            WorkloadKind::Random => trees::random_tree(n, rng),
        }
    }
}

impl fmt::Display for WorkloadKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for WorkloadKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        WorkloadKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| format!("unknown workload kind `{s}`"))
    }
}

/// Relative weights of the operations after the build phase.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OpMix {
    pub link: u32,
    pub cut: u32,
    pub query: u32,
    pub ops: usize,
}

impl Default for OpMix {
    fn default() -> Self {
        OpMix { link: 2, cut: 2, query: 1, ops: 0 }
    }
}

/// Links the tree, then runs `mix.ops` operations. Cuts always hit a
/// present edge and links always restore a removed tree edge, so both
/// are legal.
pub fn gen_workload(kind: WorkloadKind, n: usize, seed: u64, mix: &OpMix) -> CommandScript {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let edges = kind.tree(n.max(1), &mut rng);
    let mut commands: Vec<Command> = edges.iter().map(|&(u, v)| Command::Link { u, v, weight: None }).collect();
    let mut present: Vec<(u32, u32)> = edges;
    let mut removed: Vec<(u32, u32)> = Vec::new();
    let total = mix.link + mix.cut + mix.query;
    for _ in 0..mix.ops {
        if total == 0 {
            break;
        }
        let pick = rng.gen_range(0..total);
        if pick < mix.query {
            commands.push(Command::Card { v: rng.gen_range(0..n.max(1) as u32) });
            continue;
        }
        let want_link = pick < mix.query + mix.link;
        if (want_link && !removed.is_empty()) || present.is_empty() {
            if removed.is_empty() {
                continue;
            }
            let i = rng.gen_range(0..removed.len());
            let (u, v) = removed.swap_remove(i);
            present.push((u, v));
            commands.push(Command::Link { u, v, weight: None });
        } else {
            let i = rng.gen_range(0..present.len());
            let (u, v) = present.swap_remove(i);
            removed.push((u, v));
            commands.push(Command::Cut { u, v });
        }
    }
    CommandScript::from_commands(commands)
}
