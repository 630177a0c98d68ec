//! Jump graph over a loop's SPaths and its SCC-contracted acyclic form.
//!
//! A jump `sp1 -> sp2` means some pre-state runs `sp1`, re-enters the loop,
//! and selects `sp2`. Contracting each strongly connected component of the
//! jump graph yields an acyclic graph whose node order (member count, plus
//! self-loop presence for singletons) drives the summarization strategy.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fmt::Write;

use crate::solver::{SolveResult, Solver};
use crate::spath::{LoopPaths, SPath};
use crate::sym::{not, SymExpr};

/// Node of the jump graph: the synthetic entry/exit nodes, or one SPath
/// identified by its index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Node {
    Start,
    Path(usize),
    End,
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Start => write!(f, "start"),
            Node::Path(i) => write!(f, "P{i}"),
            Node::End => write!(f, "end"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Feasibility {
    Yes,
    No,
    /// Solver could not decide; the edge is kept so no behavior is lost.
    Assumed,
}

#[derive(Debug, Clone)]
pub struct JumpGraph {
    /// Start, the unpruned SPaths in index order, End.
    pub nodes: Vec<Node>,
    pub edges: BTreeSet<(Node, Node)>,
    /// Edges present only because the solver answered unknown.
    pub assumed: BTreeSet<(Node, Node)>,
}

impl JumpGraph {
    pub fn has_edge(&self, from: Node, to: Node) -> bool {
        self.edges.contains(&(from, to))
    }

    pub fn succs(&self, from: Node) -> impl Iterator<Item = Node> + '_ {
        self.edges
            .range((from, Node::Start)..=(from, Node::End))
            .map(|&(_, to)| to)
    }
}

/// Conjunction deciding whether running `sp1` can be followed by `sp2` in
/// the next iteration: `sp1` is taken, and `sp2`'s condition (which carries
/// the loop guard) holds on `sp1`'s post-state.
fn jump_atoms(sp1: &SPath, sp2: &SPath) -> Vec<SymExpr> {
    let mut atoms = sp1.cond.clone();
    atoms.extend(sp2.cond.iter().map(|c| c.subst_pre(&sp1.op)));
    atoms
}

pub fn jump_feasible(sp1: &SPath, sp2: &SPath, solver: &mut Solver) -> Feasibility {
    decide(&jump_atoms(sp1, sp2), solver)
}

fn decide(atoms: &[SymExpr], solver: &mut Solver) -> Feasibility {
    match solver.check(atoms) {
        SolveResult::Sat(_) => Feasibility::Yes,
        SolveResult::Unsat => Feasibility::No,
        SolveResult::Unknown(_) => Feasibility::Assumed,
    }
}

/// Computes every pairwise jump, entry edges (guard and path condition hold
/// on some initial state), exit edges (the guard fails after the path), and
/// the skip edge (the guard fails outright).
pub fn build_jump_graph(paths: &LoopPaths, solver: &mut Solver) -> JumpGraph {
    let valid: Vec<&SPath> = paths.live().collect();
    let mut nodes = vec![Node::Start];
    nodes.extend(valid.iter().map(|p| Node::Path(p.id)));
    nodes.push(Node::End);

    let mut g = JumpGraph {
        nodes,
        edges: BTreeSet::new(),
        assumed: BTreeSet::new(),
    };
    let record = |g: &mut JumpGraph, from: Node, to: Node, f: Feasibility| match f {
        Feasibility::Yes => {
            g.edges.insert((from, to));
        }
        Feasibility::Assumed => {
            g.edges.insert((from, to));
            g.assumed.insert((from, to));
        }
        Feasibility::No => {}
    };

    let skip = decide(&[not(paths.guard.clone())], solver);
    record(&mut g, Node::Start, Node::End, skip);

    for sp in &valid {
        let entry = decide(&sp.cond, solver);
        record(&mut g, Node::Start, Node::Path(sp.id), entry);

        let mut exit_atoms = sp.cond.clone();
        exit_atoms.push(not(paths.guard.subst_pre(&sp.op)));
        let exit = decide(&exit_atoms, solver);
        record(&mut g, Node::Path(sp.id), Node::End, exit);

        for sp2 in &valid {
            let jump = jump_feasible(sp, sp2, solver);
            record(&mut g, Node::Path(sp.id), Node::Path(sp2.id), jump);
        }
    }
    g
}

/// Non-trivial cyclic structure of one contracted node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SccKind {
    /// Single SPath, no self-jump: runs at most once.
    Zero,
    /// Single SPath jumping to itself: a plain recurrence.
    One,
    /// Two or more SPaths cycling through each other.
    High,
}

#[derive(Debug, Clone)]
pub struct Scc {
    pub id: usize,
    /// Sorted member nodes.
    pub members: Vec<Node>,
    pub kind: SccKind,
}

impl Scc {
    pub fn is_synthetic(&self) -> bool {
        matches!(self.members[0], Node::Start | Node::End)
    }

    pub fn path_ids(&self) -> Vec<usize> {
        self.members
            .iter()
            .filter_map(|n| match n {
                Node::Path(i) => Some(*i),
                _ => None,
            })
            .collect()
    }
}

/// Acyclic contraction of a jump graph. Components and edges that lie on no
/// start-to-end route are dropped (recorded in `dropped`); ids are assigned
/// by smallest member node.
#[derive(Debug, Clone)]
pub struct Csg {
    pub sccs: Vec<Scc>,
    pub edges: BTreeSet<(usize, usize)>,
    pub start: usize,
    pub end: usize,
    /// Nodes eliminated by route pruning.
    pub dropped: Vec<Node>,
}

impl Csg {
    pub fn scc_of(&self, n: Node) -> Option<usize> {
        self.sccs
            .iter()
            .find(|s| s.members.binary_search(&n).is_ok())
            .map(|s| s.id)
    }

    pub fn succs(&self, id: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges
            .range((id, 0)..(id + 1, 0))
            .map(|&(_, to)| to)
    }

    /// Deterministic topological order (smallest ready id first). The graph
    /// is acyclic by construction, so every component is emitted.
    pub fn topo_order(&self) -> Vec<usize> {
        let n = self.sccs.len();
        let mut indegree = vec![0usize; n];
        for &(_, to) in &self.edges {
            indegree[to] += 1;
        }
        let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(&next) = ready.iter().next() {
            ready.remove(&next);
            order.push(next);
            for to in self.succs(next) {
                indegree[to] -= 1;
                if indegree[to] == 0 {
                    ready.insert(to);
                }
            }
        }
        debug_assert_eq!(order.len(), n, "contracted graph must be acyclic");
        order
    }
}

struct TarjanState<'a> {
    adj: &'a [Vec<usize>],
    index: usize,
    indices: Vec<Option<usize>>,
    lowlinks: Vec<usize>,
    on_stack: Vec<bool>,
    stack: Vec<usize>,
    sccs: Vec<Vec<usize>>,
}

impl TarjanState<'_> {
    fn strongconnect(&mut self, v: usize) {
        self.indices[v] = Some(self.index);
        self.lowlinks[v] = self.index;
        self.index += 1;
        self.stack.push(v);
        self.on_stack[v] = true;

        for i in 0..self.adj[v].len() {
            let w = self.adj[v][i];
            if self.indices[w].is_none() {
                self.strongconnect(w);
                self.lowlinks[v] = self.lowlinks[v].min(self.lowlinks[w]);
            } else if self.on_stack[w] {
                self.lowlinks[v] = self.lowlinks[v].min(self.indices[w].unwrap());
            }
        }

        if self.lowlinks[v] == self.indices[v].unwrap() {
            let mut scc = Vec::new();
            loop {
                let w = self.stack.pop().unwrap();
                self.on_stack[w] = false;
                scc.push(w);
                if w == v {
                    break;
                }
            }
            self.sccs.push(scc);
        }
    }
}

/// Strongly connected components, returned sinks-first.
fn tarjan_scc(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let n = adj.len();
    let mut state = TarjanState {
        adj,
        index: 0,
        indices: vec![None; n],
        lowlinks: vec![0; n],
        on_stack: vec![false; n],
        stack: Vec::new(),
        sccs: Vec::new(),
    };
    for v in 0..n {
        if state.indices[v].is_none() {
            state.strongconnect(v);
        }
    }
    state.sccs
}

pub fn contract(g: &JumpGraph) -> Csg {
    let index: BTreeMap<Node, usize> = g
        .nodes
        .iter()
        .enumerate()
        .map(|(i, &n)| (n, i))
        .collect();
    let mut adj = vec![Vec::new(); g.nodes.len()];
    for &(from, to) in &g.edges {
        adj[index[&from]].push(index[&to]);
    }

    let components = tarjan_scc(&adj);
    let mut comp_of = vec![0usize; g.nodes.len()];
    for (c, members) in components.iter().enumerate() {
        for &v in members {
            comp_of[v] = c;
        }
    }

    let mut groups: Vec<Vec<Node>> = components
        .iter()
        .map(|members| {
            let mut nodes: Vec<Node> = members.iter().map(|&v| g.nodes[v]).collect();
            nodes.sort();
            nodes
        })
        .collect();
    // Deterministic ids: order components by their smallest member.
    let mut order: Vec<usize> = (0..groups.len()).collect();
    order.sort_by_key(|&c| groups[c][0]);
    let rank: BTreeMap<usize, usize> = order.iter().enumerate().map(|(r, &c)| (c, r)).collect();
    groups = order.iter().map(|&c| std::mem::take(&mut groups[c])).collect();

    let mut edges: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut self_edge = vec![false; groups.len()];
    for &(from, to) in &g.edges {
        let a = rank[&comp_of[index[&from]]];
        let b = rank[&comp_of[index[&to]]];
        if a == b {
            self_edge[a] = true;
        } else {
            edges.insert((a, b));
        }
    }

    let start = groups
        .iter()
        .position(|m| m.contains(&Node::Start))
        .expect("start node present");
    let end = groups
        .iter()
        .position(|m| m.contains(&Node::End))
        .expect("end node present");

    // Route pruning: keep only components on some start-to-end path. The
    // synthetic endpoints always stay so an empty interior is representable.
    let fwd = reach(groups.len(), &edges, start, false);
    let bwd = reach(groups.len(), &edges, end, true);
    let mut keep: Vec<bool> = (0..groups.len()).map(|c| fwd[c] && bwd[c]).collect();
    keep[start] = true;
    keep[end] = true;

    let mut dropped: Vec<Node> = Vec::new();
    let mut new_id = vec![usize::MAX; groups.len()];
    let mut sccs = Vec::new();
    for (c, members) in groups.into_iter().enumerate() {
        if !keep[c] {
            dropped.extend(members);
            continue;
        }
        let id = sccs.len();
        new_id[c] = id;
        let kind = if members.len() >= 2 {
            SccKind::High
        } else if self_edge[c] {
            SccKind::One
        } else {
            SccKind::Zero
        };
        sccs.push(Scc { id, members, kind });
    }
    dropped.sort();

    let edges = edges
        .into_iter()
        .filter(|&(a, b)| keep[a] && keep[b] && fwd[a] && bwd[b])
        .map(|(a, b)| (new_id[a], new_id[b]))
        .collect();

    Csg {
        start: new_id[start],
        end: new_id[end],
        sccs,
        edges,
        dropped,
    }
}

fn reach(n: usize, edges: &BTreeSet<(usize, usize)>, from: usize, reverse: bool) -> Vec<bool> {
    let mut seen = vec![false; n];
    seen[from] = true;
    let mut work = vec![from];
    while let Some(u) = work.pop() {
        for &(a, b) in edges {
            let (src, dst) = if reverse { (b, a) } else { (a, b) };
            if src == u && !seen[dst] {
                seen[dst] = true;
                work.push(dst);
            }
        }
    }
    seen
}

pub fn jump_graph_to_dot(g: &JumpGraph, name: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "digraph \"{name}\" {{");
    let _ = writeln!(out, "  node [shape=circle, fontname=\"monospace\"];");
    for n in &g.nodes {
        let shape = match n {
            Node::Start | Node::End => ", shape=oval",
            Node::Path(_) => "",
        };
        let _ = writeln!(out, "  \"{n}\" [label=\"{n}\"{shape}];");
    }
    for (from, to) in &g.edges {
        let attr = if g.assumed.contains(&(*from, *to)) {
            " [style=dashed, label=\"assumed\"]"
        } else {
            ""
        };
        let _ = writeln!(out, "  \"{from}\" -> \"{to}\"{attr};");
    }
    out.push_str("}\n");
    out
}

pub fn csg_to_dot(csg: &Csg, name: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "digraph \"{name}\" {{");
    let _ = writeln!(out, "  node [shape=box, fontname=\"monospace\"];");
    for scc in &csg.sccs {
        let members: Vec<String> = scc.members.iter().map(Node::to_string).collect();
        let label = if scc.is_synthetic() {
            members.join(", ")
        } else {
            let kind = match scc.kind {
                SccKind::Zero => "0-order",
                SccKind::One => "1-order",
                SccKind::High => "high-order",
            };
            format!("{{{}}} {kind}", members.join(", "))
        };
        let shape = if scc.is_synthetic() { ", shape=oval" } else { "" };
        let _ = writeln!(out, "  s{} [label=\"{label}\"{shape}];", scc.id);
    }
    for (a, b) in &csg.edges {
        let _ = writeln!(out, "  s{a} -> s{b};");
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse;
    use crate::solver::{Solver, SolverConfig};
    use crate::spath::{enumerate_spaths, prune_paths, DEFAULT_MAX_PATHS};
    use crate::sym::{cmp, int, pre, CmpOp, SymVar};
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    fn analyzed(src: &str) -> (LoopPaths, JumpGraph, Solver) {
        let program = parse(src).expect("test program parses");
        let mut lp = enumerate_spaths(
            &program,
            crate::frontend::ast::LoopId(0),
            DEFAULT_MAX_PATHS,
        )
        .expect("enumeration fits");
        let mut solver = Solver::new(SolverConfig::default());
        prune_paths(&mut lp, &mut |conds| solver.is_definitely_unsat(conds));
        let g = build_jump_graph(&lp, &mut solver);
        (lp, g, solver)
    }

    fn edge_set(pairs: &[(Node, Node)]) -> BTreeSet<(Node, Node)> {
        pairs.iter().copied().collect()
    }

    const FIG3: &str = "// input x in [-50, 50]\n// input i in [0, 99]\nproc main {\n\
         while (i < 100) {\n\
           if (x < 0) { x = x + 2; i = i + 3; }\n\
           else { x = x + 7; if (x < 5) { x = x + 3; i = i + 1; } else { x = x - 12; i = i + 2; } }\n\
         }\n}";

    #[test]
    fn three_branch_loop_jumps() {
        let (lp, g, _) = analyzed(FIG3);
        assert!(lp.paths[1].pruned, "middle branch is contradictory");
        use Node::*;
        // The descending branch P2 can hand values below zero back to P0
        // (x0 = 3 runs P2, leaving x = -2), and values >= 5 to itself, so
        // the two live paths form a single cycle family. The unconstrained
        // entry state also permits skipping the loop.
        let expected = edge_set(&[
            (Start, Path(0)),
            (Start, Path(2)),
            (Start, End),
            (Path(0), Path(0)),
            (Path(0), Path(2)),
            (Path(0), End),
            (Path(2), Path(0)),
            (Path(2), Path(2)),
            (Path(2), End),
        ]);
        assert_eq!(g.edges, expected);
        assert!(g.assumed.is_empty());
    }

    #[test]
    fn three_branch_loop_contracts_to_one_cycle() {
        let (_, g, _) = analyzed(FIG3);
        let csg = contract(&g);
        assert_eq!(csg.sccs.len(), 3);
        assert_eq!(csg.sccs[csg.start].members, vec![Node::Start]);
        assert_eq!(csg.sccs[csg.end].members, vec![Node::End]);
        let interior = &csg.sccs[1];
        assert_eq!(interior.members, vec![Node::Path(0), Node::Path(2)]);
        assert_eq!(interior.kind, SccKind::High);
        assert_eq!(csg.topo_order(), vec![0, 1, 2]);
        assert!(csg.dropped.is_empty());
    }

    #[test]
    fn alternating_branches_jump_both_ways() {
        // Decrement above 1, increment at or below it: values 1 and 2
        // bounce between the two branches.
        let src = "// input x in [-50, 50]\n// input i in [0, 99]\nproc main {\n\
             while (i < 100) {\n\
               if (x > 1) { x = x - 1; i = i + 3; }\n\
               else { if (x < -1) { x = x + 1; i = i + 5; } else { x = x + 1; i = i + 7; } }\n\
             }\n}";
        let (lp, g, _) = analyzed(src);
        use Node::*;
        assert!(g.has_edge(Path(0), Path(2)));
        assert!(g.has_edge(Path(2), Path(0)));

        // Same answers by brute force over a grid of pre-states.
        let vals: Vec<i128> = (-50..=50).collect();
        for sp1 in lp.live() {
            for sp2 in lp.live() {
                let brute = vals.iter().any(|&x| {
                    vals.iter().any(|&i| {
                        let mut env = BTreeMap::new();
                        env.insert(SymVar::pre("x"), x);
                        env.insert(SymVar::pre("i"), i);
                        let taken = sp1.cond.iter().all(|c| c.eval_bool(&env).unwrap());
                        taken
                            && sp2
                                .cond
                                .iter()
                                .all(|c| c.subst_pre(&sp1.op).eval_bool(&env).unwrap())
                    })
                });
                assert_eq!(
                    g.has_edge(Path(sp1.id), Path(sp2.id)),
                    brute,
                    "{} -> {}",
                    sp1.name(),
                    sp2.name()
                );
            }
        }
        // The alternating pair contracts together; the strictly increasing
        // negative branch feeds it without ever being re-entered.
        let csg = contract(&g);
        let interior: Vec<&Scc> = csg.sccs.iter().filter(|s| !s.is_synthetic()).collect();
        assert_eq!(interior.len(), 2);
        assert_eq!(interior[0].members, vec![Path(0), Path(2)]);
        assert_eq!(interior[0].kind, SccKind::High);
        assert_eq!(interior[1].members, vec![Path(1)]);
        assert_eq!(interior[1].kind, SccKind::One);
        assert!(csg.edges.contains(&(interior[1].id, interior[0].id)));
    }

    #[test]
    fn single_pass_loop_is_a_chain() {
        let (_, g, _) = analyzed(
            "// input x in [-5, 5]\nproc main { while (x == 0) { x = x + 1; } }",
        );
        use Node::*;
        let expected = edge_set(&[(Start, Path(0)), (Path(0), End), (Start, End)]);
        assert_eq!(g.edges, expected);
        let csg = contract(&g);
        let interior: Vec<&Scc> = csg.sccs.iter().filter(|s| !s.is_synthetic()).collect();
        assert_eq!(interior[0].kind, SccKind::Zero);
    }

    #[test]
    fn self_jump_makes_first_order_component() {
        let (_, g, _) =
            analyzed("// input x in [-50, 50]\nproc main { while (x < 10) { x = x + 1; } }");
        use Node::*;
        assert!(g.has_edge(Path(0), Path(0)));
        let csg = contract(&g);
        let interior: Vec<&Scc> = csg.sccs.iter().filter(|s| !s.is_synthetic()).collect();
        assert_eq!(interior[0].kind, SccKind::One);
    }

    #[test]
    fn contradictory_condition_is_never_a_target() {
        let mut solver = Solver::new(SolverConfig::default());
        let x = pre("x");
        let sp1 = SPath {
            id: 0,
            cond: vec![cmp(CmpOp::Lt, x.clone(), int(10))],
            op: BTreeMap::new(),
            asserts: Vec::new(),
            pruned: false,
        };
        let sp2 = SPath {
            id: 1,
            cond: vec![cmp(CmpOp::Lt, x.clone(), x.clone())],
            op: BTreeMap::new(),
            asserts: Vec::new(),
            pruned: false,
        };
        assert_eq!(jump_feasible(&sp1, &sp2, &mut solver), Feasibility::No);
    }

    #[test]
    fn undecidable_jump_is_assumed_and_flagged() {
        // A variable divisor is outside the solver fragment, so the edge
        // must be kept and marked rather than silently decided.
        let mut solver = Solver::new(SolverConfig::default());
        let sp = SPath {
            id: 0,
            cond: vec![cmp(
                CmpOp::Eq,
                SymExpr::div(pre("x"), pre("y")),
                int(1),
            )],
            op: BTreeMap::new(),
            asserts: Vec::new(),
            pruned: false,
        };
        assert_eq!(jump_feasible(&sp, &sp, &mut solver), Feasibility::Assumed);

        let lp = LoopPaths {
            loop_id: crate::frontend::ast::LoopId(0),
            guard: cmp(CmpOp::Eq, SymExpr::div(pre("x"), pre("y")), int(1)),
            paths: vec![sp],
            vars: ["x", "y"].iter().map(|s| s.to_string()).collect(),
        };
        let g = build_jump_graph(&lp, &mut solver);
        assert!(g.assumed.contains(&(Node::Path(0), Node::Path(0))));
    }

    #[test]
    fn off_route_components_are_dropped() {
        use Node::*;
        // P1 is reachable but never exits; P3 feeds the route but nothing
        // reaches it. Both are off every start-to-end path.
        let g = JumpGraph {
            nodes: vec![Start, Path(0), Path(1), Path(3), End],
            edges: edge_set(&[
                (Start, Path(0)),
                (Path(0), End),
                (Start, Path(1)),
                (Path(1), Path(1)),
                (Path(3), Path(0)),
            ]),
            assumed: BTreeSet::new(),
        };
        let csg = contract(&g);
        assert_eq!(csg.dropped, vec![Path(1), Path(3)]);
        assert_eq!(csg.sccs.len(), 3);
        for (a, b) in &csg.edges {
            assert!(*a < csg.sccs.len() && *b < csg.sccs.len());
        }
    }

    #[test]
    fn unentered_loop_keeps_endpoints() {
        use Node::*;
        // No interior at all: the skip edge is the only route.
        let g = JumpGraph {
            nodes: vec![Start, End],
            edges: edge_set(&[(Start, End)]),
            assumed: BTreeSet::new(),
        };
        let csg = contract(&g);
        assert_eq!(csg.sccs.len(), 2);
        assert_eq!(csg.start, 0);
        assert_eq!(csg.end, 1);
        assert_eq!(csg.topo_order(), vec![0, 1]);
    }

    #[test]
    fn dot_output_is_deterministic() {
        let (_, g, _) = analyzed(FIG3);
        let csg = contract(&g);
        let a = format!("{}{}", jump_graph_to_dot(&g, "t"), csg_to_dot(&csg, "t"));
        let b = format!("{}{}", jump_graph_to_dot(&g, "t"), csg_to_dot(&csg, "t"));
        assert_eq!(a, b);
        assert!(a.contains("high-order"));
    }

    /// Reference partition: reachability-based equivalence classes.
    fn brute_sccs(adj: &[Vec<usize>]) -> Vec<BTreeSet<usize>> {
        let n = adj.len();
        let mut reach = vec![vec![false; n]; n];
        for (v, row) in adj.iter().enumerate() {
            for &w in row {
                reach[v][w] = true;
            }
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    reach[i][j] |= reach[i][k] && reach[k][j];
                }
            }
        }
        let mut out: Vec<BTreeSet<usize>> = Vec::new();
        let mut seen = vec![false; n];
        for v in 0..n {
            if seen[v] {
                continue;
            }
            let mut class = BTreeSet::new();
            class.insert(v);
            for w in 0..n {
                if reach[v][w] && reach[w][v] {
                    class.insert(w);
                }
            }
            for &w in &class {
                seen[w] = true;
            }
            out.push(class);
        }
        out.sort_by(|a, b| a.iter().next().cmp(&b.iter().next()));
        out
    }

    proptest! {
        #[test]
        fn partition_matches_brute_force(bits in proptest::collection::vec(any::<bool>(), 144)) {
            let n = 12;
            let adj: Vec<Vec<usize>> = (0..n)
                .map(|v| (0..n).filter(|&w| bits[v * n + w]).collect())
                .collect();
            let mut mine: Vec<BTreeSet<usize>> = tarjan_scc(&adj)
                .into_iter()
                .map(|c| c.into_iter().collect())
                .collect();
            mine.sort_by(|a, b| a.iter().next().cmp(&b.iter().next()));
            prop_assert_eq!(mine, brute_sccs(&adj));
        }

        #[test]
        fn contraction_is_acyclic_and_preserves_reachability(
            bits in proptest::collection::vec(any::<bool>(), 36),
        ) {
            use Node::*;
            let n = 6;
            let mut edges: BTreeSet<(Node, Node)> = BTreeSet::new();
            for v in 0..n {
                edges.insert((Start, Path(v)));
                edges.insert((Path(v), End));
                for w in 0..n {
                    if bits[v * n + w] {
                        edges.insert((Path(v), Path(w)));
                    }
                }
            }
            let mut nodes = vec![Start];
            nodes.extend((0..n).map(Path));
            nodes.push(End);
            let g = JumpGraph { nodes, edges: edges.clone(), assumed: BTreeSet::new() };
            let csg = contract(&g);

            // Topological order exists and respects every edge.
            let order = csg.topo_order();
            prop_assert_eq!(order.len(), csg.sccs.len());
            let position: BTreeMap<usize, usize> =
                order.iter().enumerate().map(|(i, &s)| (s, i)).collect();
            for &(a, b) in &csg.edges {
                prop_assert!(position[&a] < position[&b]);
            }

            // Cross-component jumps survive contraction; everything stays
            // on-route here because each path node touches both endpoints.
            for &(from, to) in &edges {
                let (a, b) = (csg.scc_of(from).unwrap(), csg.scc_of(to).unwrap());
                prop_assert!(a == b || csg.edges.contains(&(a, b)));
            }
        }
    }
}
