//! Line-oriented command scripts.
//!
//! ```text
//! link 0 2          # edge with weight 1
//! link 2 3 7        # explicit weight
//! cut 0 2
//! card 3            # matching value of 3's component
//! total
//! matched 2 3       # yes | no
//! matchedif (0 2 m; 3 4 u) 2 3
//! check             # ok | fail <invariant>: <detail>
//! dump
//! ```

use std::collections::HashSet;
use std::fmt;

use treematch::oracle::{exhaustive_tables, greedy_leaf_matching, weighted_dp_matching, TreeEdge, EXHAUSTIVE_LIMIT};
use treematch::{EdgeConstraint, EdgeStatus, Matching, MatchingForest, VertexId};

pub const MAX_CONSTRAINTS: usize = 8;
/// Scripts address vertices directly, so keep the id space bounded.
pub const MAX_VERTEX: u32 = 1 << 24;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Command {
    Link { u: u32, v: u32, weight: Option<u64> },
    Cut { u: u32, v: u32 },
    Card { v: u32 },
    Total,
    Matched { u: u32, v: u32 },
    MatchedIf { given: Vec<(u32, u32, EdgeStatus)>, u: u32, v: u32 },
    Check,
    Dump,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Command::Link { u, v, weight: None } => write!(f, "link {u} {v}"),
            Command::Link { u, v, weight: Some(w) } => write!(f, "link {u} {v} {w}"),
            Command::Cut { u, v } => write!(f, "cut {u} {v}"),
            Command::Card { v } => write!(f, "card {v}"),
            Command::Total => f.write_str("total"),
            Command::Matched { u, v } => write!(f, "matched {u} {v}"),
            Command::MatchedIf { given, u, v } => {
                f.write_str("matchedif (")?;
                for (i, (a, b, s)) in given.iter().enumerate() {
                    if i > 0 {
                        f.write_str("; ")?;
                    }
                    let s = if *s == EdgeStatus::Matched { 'm' } else { 'u' };
                    write!(f, "{a} {b} {s}")?;
                }
                write!(f, ") {u} {v}")
            }
            Command::Check => f.write_str("check"),
            Command::Dump => f.write_str("dump"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScriptLine {
    /// 1-based line in the source text.
    pub line: usize,
    /// A parse failure keeps its error code.
    pub command: Result<Command, &'static str>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CommandScript {
    pub lines: Vec<ScriptLine>,
}

impl CommandScript {
    /// Blank lines and `#` comments are skipped but still counted.
    pub fn parse(text: &str) -> Self {
        let lines = text
            .lines()
            .enumerate()
            .filter_map(|(i, raw)| {
                let body = raw.split('#').next().unwrap_or("").trim();
                (!body.is_empty()).then(|| ScriptLine { line: i + 1, command: parse_command(body) })
            })
            .collect();
        CommandScript { lines }
    }

    pub fn from_commands(commands: impl IntoIterator<Item = Command>) -> Self {
        let lines = commands.into_iter().enumerate().map(|(i, c)| ScriptLine { line: i + 1, command: Ok(c) }).collect();
        CommandScript { lines }
    }

    pub fn commands(&self) -> impl Iterator<Item = &Command> {
        self.lines.iter().filter_map(|l| l.command.as_ref().ok())
    }
}

impl fmt::Display for CommandScript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in self.commands() {
            writeln!(f, "{c}")?;
        }
        Ok(())
    }
}

fn vertex(tok: Option<&str>) -> Result<u32, &'static str> {
    let v: u32 = tok.ok_or("ParseError")?.parse().map_err(|_| "ParseError")?;
    if v >= MAX_VERTEX {
        return Err("VertexOutOfRange");
    }
    Ok(v)
}

fn parse_command(body: &str) -> Result<Command, &'static str> {
    if let Some(rest) = body.strip_prefix("matchedif") {
        return parse_matchedif(rest);
    }
    let mut toks = body.split_whitespace();
    let name = toks.next().ok_or("ParseError")?;
    let cmd = match name {
        "link" => {
            let (u, v) = (vertex(toks.next())?, vertex(toks.next())?);
            let weight = match toks.next() {
                Some(w) => Some(w.parse().map_err(|_| "ParseError")?),
                None => None,
            };
            Command::Link { u, v, weight }
        }
        "cut" => Command::Cut { u: vertex(toks.next())?, v: vertex(toks.next())? },
        "card" => Command::Card { v: vertex(toks.next())? },
        "total" => Command::Total,
        "matched" => Command::Matched { u: vertex(toks.next())?, v: vertex(toks.next())? },
        "check" => Command::Check,
        "dump" => Command::Dump,
        _ => return Err("UnknownCommand"),
    };
    if toks.next().is_some() {
        return Err("ParseError");
    }
    Ok(cmd)
}

fn parse_matchedif(rest: &str) -> Result<Command, &'static str> {
    let rest = rest.trim_start();
    let inner_start = rest.strip_prefix('(').ok_or("ParseError")?;
    let close = inner_start.find(')').ok_or("ParseError")?;
    let (inner, tail) = (&inner_start[..close], &inner_start[close + 1..]);
    let mut given = Vec::new();
    for part in inner.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let mut t = part.split_whitespace();
        let (a, b) = (vertex(t.next())?, vertex(t.next())?);
        let s = match t.next() {
            Some("m") => EdgeStatus::Matched,
            Some("u") => EdgeStatus::Unmatched,
            _ => return Err("ParseError"),
        };
        if t.next().is_some() {
            return Err("ParseError");
        }
        given.push((a, b, s));
    }
    if given.len() > MAX_CONSTRAINTS {
        return Err("TooManyConstraints");
    }
    let mut t = tail.split_whitespace();
    let (u, v) = (vertex(t.next())?, vertex(t.next())?);
    if t.next().is_some() {
        return Err("ParseError");
    }
    Ok(Command::MatchedIf { given, u, v })
}

/// A structure plus the state needed to execute commands against it.
pub struct Session {
    pub forest: MatchingForest,
}

impl Session {
    pub fn new(weighted: bool) -> Self {
        let ann = if weighted { Matching::weighted() } else { Matching::unweighted() };
        Session { forest: MatchingForest::new(ann) }
    }

    /// Output text for queries, `None` for successful mutations.
    pub fn execute(&mut self, cmd: &Command) -> Result<Option<String>, &'static str> {
        let tf = &mut self.forest;
        let edge = |tf: &MatchingForest, u: u32, v: u32| tf.forest().find_edge(VertexId(u), VertexId(v)).ok_or("NoSuchEdge");
        Ok(match cmd {
            Command::Link { u, v, weight } => {
                tf.link(VertexId(*u), VertexId(*v), weight.unwrap_or(1)).map_err(|e| e.code())?;
                None
            }
            Command::Cut { u, v } => {
                tf.cut(VertexId(*u), VertexId(*v)).map_err(|e| e.code())?;
                None
            }
            Command::Card { v } => Some(tf.matching_cardinality(VertexId(*v)).to_string()),
            Command::Total => Some(tf.total_cardinality().to_string()),
            Command::Matched { u, v } => {
                let e = edge(tf, *u, *v)?;
                let yes = tf.edge_in_some_maximum(e).map_err(|e| e.code())?;
                Some(if yes { "yes" } else { "no" }.to_string())
            }
            Command::MatchedIf { given, u, v } => {
                let e = edge(tf, *u, *v)?;
                let mut cons = Vec::with_capacity(given.len());
                for &(a, b, status) in given {
                    cons.push(EdgeConstraint { edge: edge(tf, a, b)?, status });
                }
                Some(tf.edge_matched_given(&cons, e).map_err(|e| e.code())?.to_string())
            }
            Command::Check => Some(match check(tf) {
                Ok(()) => "ok".to_string(),
                Err(msg) => format!("fail {msg}"),
            }),
            Command::Dump => Some(tf.dump().trim_end().to_string()),
        })
    }
}

/// Structural audit, then every component against the reference answers.
pub fn check(tf: &MatchingForest) -> Result<(), String> {
    tf.audit().map_err(|v| v.to_string())?;
    let weighted = tf.annotation().weighted;
    let labels = tf.forest().component_labels();
    let mut seen = HashSet::new();
    for v in tf.forest().vertices() {
        if tf.forest().degree(v) == 0 || !seen.insert(labels[v.index()]) {
            continue;
        }
        let tree: Vec<TreeEdge> =
            tf.forest().component_edges(v).iter().map(|e| TreeEdge { u: e.endpoints.0, v: e.endpoints.1, weight: e.weight }).collect();
        let expect = if weighted { weighted_dp_matching(&tree) } else { greedy_leaf_matching(&tree) };
        let got = tf.matching_cardinality(v).get();
        if got != Some(expect) {
            return Err(format!("oracle: component of {v} has value {got:?}, expected {expect}"));
        }
    }
    for c in tf.clusters() {
        if c.edge_count > EXHAUSTIVE_LIMIT {
            continue;
        }
        let ids = tf.cluster_edges(c.id).expect("live cluster");
        let edges: Vec<TreeEdge> = ids
            .iter()
            .map(|&e| {
                let e = tf.forest().edge(e).expect("live edge");
                TreeEdge { u: e.endpoints.0, v: e.endpoints.1, weight: e.weight }
            })
            .collect();
        let expect = exhaustive_tables(&edges, c.boundary.0, c.boundary.1, weighted).expect("small cluster");
        if expect != c.table {
            return Err(format!("oracle: {} stores {}, enumeration gives {}", c.id, c.table, expect));
        }
    }
    Ok(())
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ScriptOutput {
    pub text: String,
    /// Some line errored or a check failed.
    pub failed: bool,
}

pub fn run_script(input: &str, weighted: bool) -> ScriptOutput {
    run_parsed(&CommandScript::parse(input), weighted)
}

pub fn run_parsed(script: &CommandScript, weighted: bool) -> ScriptOutput {
    let mut session = Session::new(weighted);
    let mut out = ScriptOutput::default();
    for line in &script.lines {
        let result = match &line.command {
            Ok(c) => session.execute(c),
            Err(code) => Err(*code),
        };
        match result {
            Ok(Some(text)) => {
                if text.starts_with("fail ") {
                    out.failed = true;
                }
                out.text.push_str(&text);
                out.text.push('\n');
            }
            Ok(None) => {}
            Err(code) => {
                out.failed = true;
                out.text.push_str(&format!("error {} {}\n", line.line, code));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "link 0 2\nlink 1 2\nlink 2 3\nlink 3 4\n";

    #[test]
    fn sample_script() {
        let out = run_script(&format!("{SAMPLE}card 3\n"), false);
        assert_eq!(out.text, "2\n");
        assert!(!out.failed);
        let out = run_script(&format!("{SAMPLE}link 3 5\ncard 0\ncut 3 5\ncard 0\ncheck\n"), false);
        assert_eq!(out.text, "2\n2\nok\n");
    }

    #[test]
    fn duplicate_link_reports_line() {
        let out = run_script("link 0 1\nlink 0 1\ntotal\n", false);
        assert_eq!(out.text, "error 2 DuplicateEdge\n1\n");
        assert!(out.failed);
    }

    #[test]
    fn error_codes() {
        let out = run_script("link 0 1\nlink 1 2\nlink 0 2\ncut 5 6\nmatched 0 2\nfrob\nlink 0\ncard 99999999\n", false);
        assert_eq!(
            out.text,
            "error 3 WouldCreateCycle\nerror 4 NoSuchEdge\nerror 5 NoSuchEdge\nerror 6 UnknownCommand\nerror 7 ParseError\nerror 8 VertexOutOfRange\n"
        );
    }

    #[test]
    fn matched_queries() {
        let out = run_script(
            &format!("{SAMPLE}matched 3 4\nmatched 2 3\nmatchedif (0 2 m) 3 4\nmatchedif (0 2 m; 1 2 m) 3 4\nmatchedif () 2 3\n"),
            false,
        );
        assert_eq!(out.text, "yes\nno\nyes\ninfeasible\nno\n");
    }

    #[test]
    fn cross_component_constraint() {
        let out = run_script("link 0 1\nlink 5 6\nmatchedif (5 6 m) 0 1\n", false);
        assert_eq!(out.text, "error 3 CrossComponent\n");
    }

    #[test]
    fn too_many_constraints() {
        let given: Vec<String> = (0..9).map(|i| format!("{} {} u", i, i + 1)).collect();
        let out = run_script(&format!("matchedif ({}) 0 1\n", given.join("; ")), false);
        assert_eq!(out.text, "error 1 TooManyConstraints\n");
    }

    #[test]
    fn weighted_values() {
        let out = run_script("link 0 1 1\nlink 1 2 10\nlink 2 3 1\ncard 0\ncheck\n", true);
        assert_eq!(out.text, "10\nok\n");
    }

    #[test]
    fn comments_and_round_trip() {
        let text = "# header\nlink 0 1 4\n\nmatchedif (0 1 m; 1 2 u) 0 1  # trailing\ntotal\n";
        let script = CommandScript::parse(text);
        assert_eq!(script.lines.iter().map(|l| l.line).collect::<Vec<_>>(), vec![2, 4, 5]);
        let again = CommandScript::parse(&script.to_string());
        assert_eq!(again.commands().collect::<Vec<_>>(), script.commands().collect::<Vec<_>>());
    }

    #[test]
    fn replay_is_identical() {
        let text = format!("{SAMPLE}dump\nlink 3 5\ndump\nmatched 3 5\n");
        assert_eq!(run_script(&text, false), run_script(&text, false));
    }
}
