//! Control-flow graph construction, dominators, natural-loop detection, and
//! the `break`-elimination pass that canonicalizes loops before analysis.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::frontend::{print_expr, BinOp, Expr, LoopId, Program, Span, Stmt};

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CfgNode {
    Entry,
    Exit,
    Assign { target: String, text: String },
    Assert { text: String },
    Branch { text: String },
    LoopHead { id: LoopId, text: String },
}

impl CfgNode {
    fn label(&self) -> String {
        match self {
            CfgNode::Entry => "entry".to_string(),
            CfgNode::Exit => "exit".to_string(),
            CfgNode::Assign { target, text } => format!("{target} = {text}"),
            CfgNode::Assert { text } => format!("assert({text})"),
            CfgNode::Branch { text } => format!("if ({text})"),
            CfgNode::LoopHead { id, text } => format!("{id}: while ({text})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum EdgeLabel {
    Seq,
    True,
    False,
}

#[derive(Debug, Clone)]
pub struct Cfg {
    pub nodes: Vec<CfgNode>,
    pub succs: Vec<Vec<(NodeId, EdgeLabel)>>,
    pub preds: Vec<Vec<NodeId>>,
    pub entry: NodeId,
    pub exit: NodeId,
    /// Immediate dominator per reachable node; `idom[entry] == entry`,
    /// unreachable nodes map to `usize::MAX`.
    pub idom: Vec<NodeId>,
    pub loops: Vec<NaturalLoop>,
}

#[derive(Debug, Clone)]
pub struct NaturalLoop {
    pub header: NodeId,
    /// Syntactic loop the header came from.
    pub id: LoopId,
    pub back_edges: Vec<NodeId>,
    pub body: BTreeSet<NodeId>,
}

struct Builder {
    nodes: Vec<CfgNode>,
    succs: Vec<Vec<(NodeId, EdgeLabel)>>,
}

impl Builder {
    fn add(&mut self, node: CfgNode) -> NodeId {
        self.nodes.push(node);
        self.succs.push(Vec::new());
        self.nodes.len() - 1
    }

    fn wire(&mut self, frontier: &[(NodeId, EdgeLabel)], to: NodeId) {
        for &(from, label) in frontier {
            self.succs[from].push((to, label));
        }
    }

    fn block(
        &mut self,
        stmts: &[Stmt],
        mut frontier: Vec<(NodeId, EdgeLabel)>,
        breaks: &mut Vec<(NodeId, EdgeLabel)>,
    ) -> Vec<(NodeId, EdgeLabel)> {
        for s in stmts {
            match s {
                Stmt::Assign { target, value, .. } => {
                    let n = self.add(CfgNode::Assign {
                        target: target.clone(),
                        text: print_expr(value),
                    });
                    self.wire(&frontier, n);
                    frontier = vec![(n, EdgeLabel::Seq)];
                }
                Stmt::Assert { cond, .. } => {
                    let n = self.add(CfgNode::Assert { text: print_expr(cond) });
                    self.wire(&frontier, n);
                    frontier = vec![(n, EdgeLabel::Seq)];
                }
                Stmt::If {
                    cond,
                    then_branch,
                    else_branch,
                    ..
                } => {
                    let c = self.add(CfgNode::Branch { text: print_expr(cond) });
                    self.wire(&frontier, c);
                    let mut out = self.block(then_branch, vec![(c, EdgeLabel::True)], breaks);
                    out.extend(self.block(else_branch, vec![(c, EdgeLabel::False)], breaks));
                    frontier = out;
                }
                Stmt::While { id, cond, body, .. } => {
                    let h = self.add(CfgNode::LoopHead {
                        id: *id,
                        text: print_expr(cond),
                    });
                    self.wire(&frontier, h);
                    let mut inner_breaks = Vec::new();
                    let body_end = self.block(body, vec![(h, EdgeLabel::True)], &mut inner_breaks);
                    self.wire(&body_end, h);
                    frontier = vec![(h, EdgeLabel::False)];
                    frontier.extend(inner_breaks);
                }
                Stmt::Break { .. } => {
                    breaks.extend(frontier.drain(..));
                    // Anything after a break in the same block is dead; it
                    // still gets nodes so dumps show it, just unreachable.
                }
            }
        }
        frontier
    }
}

pub fn build_cfg(program: &Program) -> Cfg {
    let mut b = Builder {
        nodes: Vec::new(),
        succs: Vec::new(),
    };
    let entry = b.add(CfgNode::Entry);
    let mut stray_breaks = Vec::new();
    let frontier = b.block(
        &program.body,
        vec![(entry, EdgeLabel::Seq)],
        &mut stray_breaks,
    );
    let exit = b.add(CfgNode::Exit);
    b.wire(&frontier, exit);
    b.wire(&stray_breaks, exit);

    let n = b.nodes.len();
    let mut preds = vec![Vec::new(); n];
    for (u, outs) in b.succs.iter().enumerate() {
        for &(v, _) in outs {
            preds[v].push(u);
        }
    }
    for p in &mut preds {
        p.sort_unstable();
        p.dedup();
    }

    let idom = dominators(n, entry, &b.succs, &preds);
    let loops = natural_loops(&b.nodes, &b.succs, &idom);

    Cfg {
        nodes: b.nodes,
        succs: b.succs,
        preds,
        entry,
        exit,
        idom,
        loops,
    }
}

/// Iterative dominator computation over a reverse postorder.
fn dominators(
    n: usize,
    entry: NodeId,
    succs: &[Vec<(NodeId, EdgeLabel)>],
    preds: &[Vec<NodeId>],
) -> Vec<NodeId> {
    const UNDEF: usize = usize::MAX;
    // Reverse postorder over reachable nodes (iterative DFS).
    let mut order = Vec::with_capacity(n);
    let mut state = vec![0u8; n];
    let mut stack = vec![(entry, 0usize)];
    state[entry] = 1;
    while let Some(&mut (u, ref mut i)) = stack.last_mut() {
        if *i < succs[u].len() {
            let v = succs[u][*i].0;
            *i += 1;
            if state[v] == 0 {
                state[v] = 1;
                stack.push((v, 0));
            }
        } else {
            order.push(u);
            stack.pop();
        }
    }
    order.reverse();

    let mut rpo_index = vec![UNDEF; n];
    for (i, &u) in order.iter().enumerate() {
        rpo_index[u] = i;
    }

    let mut idom = vec![UNDEF; n];
    idom[entry] = entry;
    let intersect = |idom: &[usize], mut a: usize, mut b: usize| {
        while a != b {
            while rpo_index[a] > rpo_index[b] {
                a = idom[a];
            }
            while rpo_index[b] > rpo_index[a] {
                b = idom[b];
            }
        }
        a
    };
    let mut changed = true;
    while changed {
        changed = false;
        for &u in order.iter().skip(1) {
            let mut new_idom = UNDEF;
            for &p in &preds[u] {
                if idom[p] == UNDEF {
                    continue;
                }
                new_idom = if new_idom == UNDEF {
                    p
                } else {
                    intersect(&idom, new_idom, p)
                };
            }
            if new_idom != UNDEF && idom[u] != new_idom {
                idom[u] = new_idom;
                changed = true;
            }
        }
    }
    idom
}

fn dominates(idom: &[NodeId], a: NodeId, b: NodeId) -> bool {
    let mut cur = b;
    loop {
        if cur == a {
            return true;
        }
        if cur == usize::MAX || idom[cur] == cur || idom[cur] == usize::MAX {
            return false;
        }
        cur = idom[cur];
    }
}

fn natural_loops(
    nodes: &[CfgNode],
    succs: &[Vec<(NodeId, EdgeLabel)>],
    idom: &[NodeId],
) -> Vec<NaturalLoop> {
    let n = nodes.len();
    let mut preds = vec![Vec::new(); n];
    for (u, outs) in succs.iter().enumerate() {
        for &(v, _) in outs {
            preds[v].push(u);
        }
    }
    let mut loops: Vec<NaturalLoop> = Vec::new();
    for u in 0..n {
        for &(v, _) in &succs[u] {
            if idom[u] != usize::MAX && dominates(idom, v, u) {
                // Back edge u -> v: collect the natural loop of v.
                let mut body: BTreeSet<NodeId> = [v, u].into_iter().collect();
                let mut work = vec![u];
                while let Some(x) = work.pop() {
                    if x == v {
                        continue;
                    }
                    for &p in &preds[x] {
                        if body.insert(p) {
                            work.push(p);
                        }
                    }
                }
                if let Some(existing) = loops.iter_mut().find(|l| l.header == v) {
                    existing.back_edges.push(u);
                    existing.body.extend(body);
                } else {
                    let id = match &nodes[v] {
                        CfgNode::LoopHead { id, .. } => *id,
                        other => unreachable!(
                            "structured programs only loop at loop headers, found {other:?}"
                        ),
                    };
                    loops.push(NaturalLoop {
                        header: v,
                        id,
                        back_edges: vec![u],
                        body,
                    });
                }
            }
        }
    }
    loops.sort_by_key(|l| l.header);
    loops
}

/// Renders the graph in DOT form, deterministically.
pub fn cfg_to_dot(cfg: &Cfg, name: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "digraph \"{name}\" {{");
    let _ = writeln!(out, "  node [shape=box, fontname=\"monospace\"];");
    for (i, node) in cfg.nodes.iter().enumerate() {
        let shape = match node {
            CfgNode::Entry | CfgNode::Exit => ", shape=oval",
            CfgNode::LoopHead { .. } => ", shape=hexagon",
            _ => "",
        };
        let _ = writeln!(
            out,
            "  n{i} [label=\"{}\"{shape}];",
            node.label().replace('"', "\\\"")
        );
    }
    for (u, outs) in cfg.succs.iter().enumerate() {
        for &(v, label) in outs {
            let attr = match label {
                EdgeLabel::Seq => String::new(),
                EdgeLabel::True => " [label=\"T\"]".to_string(),
                EdgeLabel::False => " [label=\"F\"]".to_string(),
            };
            let _ = writeln!(out, "  n{u} -> n{v}{attr};");
        }
    }
    for l in &cfg.loops {
        let members: Vec<String> = l.body.iter().map(|x| format!("n{x}")).collect();
        let _ = writeln!(
            out,
            "  // loop {} header=n{} body={{{}}}",
            l.id,
            l.header,
            members.join(",")
        );
    }
    out.push_str("}\n");
    out
}

/// True when any loop body contains a `break` that targets it.
pub fn has_breaks(program: &Program) -> bool {
    fn block_has_direct_break(stmts: &[Stmt]) -> bool {
        stmts.iter().any(|s| match s {
            Stmt::Break { .. } => true,
            Stmt::If {
                then_branch,
                else_branch,
                ..
            } => block_has_direct_break(then_branch) || block_has_direct_break(else_branch),
            _ => false,
        })
    }
    fn walk(stmts: &[Stmt]) -> bool {
        stmts.iter().any(|s| match s {
            Stmt::While { body, .. } => block_has_direct_break(body) || walk(body),
            Stmt::If {
                then_branch,
                else_branch,
                ..
            } => walk(then_branch) || walk(else_branch),
            _ => false,
        })
    }
    walk(&program.body)
}

/// Rewrites every loop that contains `break` into an equivalent break-free
/// loop guarded by a fresh flag: the guard becomes `__brkK == 0 && (cond)`,
/// `break` becomes `__brkK = 1;`, and statements that follow a potential
/// break point are wrapped in `if (__brkK == 0)`.
pub fn canonicalize(program: &Program) -> Program {
    let mut out = program.clone();
    out.body = desugar_block_outside(&program.body);
    out
}

fn flag_name(id: LoopId) -> String {
    format!("__brk{}", id.0)
}

fn flag_is_clear(name: &str) -> Expr {
    Expr::Bin(
        BinOp::Eq,
        Box::new(Expr::Var(name.to_string(), Span::default())),
        Box::new(Expr::Int(0)),
    )
}

/// Desugars statements outside any loop: loops are rewritten, breaks cannot
/// occur here.
fn desugar_block_outside(stmts: &[Stmt]) -> Vec<Stmt> {
    stmts
        .iter()
        .map(|s| match s {
            Stmt::If {
                cond,
                then_branch,
                else_branch,
                span,
            } => Stmt::If {
                cond: cond.clone(),
                then_branch: desugar_block_outside(then_branch),
                else_branch: desugar_block_outside(else_branch),
                span: *span,
            },
            other => other.clone(),
        })
        .flat_map(|s| match s {
            Stmt::While { .. } => desugar_loop(&s),
            other => vec![other],
        })
        .collect()
}

/// Rewrites one loop; when it contains breaks the result is a flag reset
/// followed by the guarded loop, otherwise just the loop.
fn desugar_loop(s: &Stmt) -> Vec<Stmt> {
    let Stmt::While { id, cond, body, span } = s else {
        unreachable!("desugar_loop is only called on while statements")
    };
    let body_has_break = {
        fn direct(stmts: &[Stmt]) -> bool {
            stmts.iter().any(|s| match s {
                Stmt::Break { .. } => true,
                Stmt::If {
                    then_branch,
                    else_branch,
                    ..
                } => direct(then_branch) || direct(else_branch),
                _ => false,
            })
        }
        direct(body)
    };
    if !body_has_break {
        return vec![Stmt::While {
            id: *id,
            cond: cond.clone(),
            body: desugar_block_outside(body),
            span: *span,
        }];
    }
    let flag = flag_name(*id);
    let new_body = desugar_block_inside(body, &flag);
    vec![
        Stmt::Assign {
            target: flag.clone(),
            value: Expr::Int(0),
            synthetic: true,
            span: *span,
        },
        Stmt::While {
            id: *id,
            cond: Expr::Bin(
                BinOp::And,
                Box::new(flag_is_clear(&flag)),
                Box::new(cond.clone()),
            ),
            body: new_body,
            span: *span,
        },
    ]
}

/// True when executing `s` may set the enclosing loop's break flag.
fn may_break(s: &Stmt) -> bool {
    match s {
        Stmt::Break { .. } => true,
        Stmt::If {
            then_branch,
            else_branch,
            ..
        } => {
            then_branch.iter().any(may_break) || else_branch.iter().any(may_break)
        }
        // A nested loop consumes its own breaks.
        _ => false,
    }
}

fn desugar_block_inside(stmts: &[Stmt], flag: &str) -> Vec<Stmt> {
    let mut out = Vec::new();
    for (i, s) in stmts.iter().enumerate() {
        match s {
            Stmt::Break { span } => out.push(Stmt::Assign {
                target: flag.to_string(),
                value: Expr::Int(1),
                synthetic: true,
                span: *span,
            }),
            Stmt::If {
                cond,
                then_branch,
                else_branch,
                span,
            } => out.push(Stmt::If {
                cond: cond.clone(),
                then_branch: desugar_block_inside(then_branch, flag),
                else_branch: desugar_block_inside(else_branch, flag),
                span: *span,
            }),
            Stmt::While { .. } => out.extend(desugar_loop(s)),
            other => out.push(other.clone()),
        }
        if may_break(s) && i + 1 < stmts.len() {
            let rest = desugar_block_inside(&stmts[i + 1..], flag);
            out.push(Stmt::If {
                cond: flag_is_clear(flag),
                then_branch: rest,
                else_branch: Vec::new(),
                span: s.span(),
            });
            return out;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse;
    use crate::oracle::{interpret, sample_inputs, OracleConfig};

    fn cfg_of(src: &str) -> Cfg {
        build_cfg(&parse(src).expect("test program parses"))
    }

    #[test]
    fn straight_line_shape() {
        let cfg = cfg_of("proc p { x = 1; y = 2; }");
        assert_eq!(cfg.nodes.len(), 4);
        assert_eq!(cfg.succs[cfg.entry].len(), 1);
        assert!(cfg.loops.is_empty());
    }

    #[test]
    fn loop_header_dominates_body() {
        let cfg = cfg_of(
            "// input x in [0, 10]\nproc p { while (x < 10) { if (x < 5) { x = x + 1; } else { x = x + 2; } } }",
        );
        assert_eq!(cfg.loops.len(), 1);
        let l = &cfg.loops[0];
        assert_eq!(l.id, LoopId(0));
        for &n in &l.body {
            assert!(dominates(&cfg.idom, l.header, n), "header must dominate n{n}");
        }
        assert!(matches!(cfg.nodes[l.header], CfgNode::LoopHead { .. }));
    }

    #[test]
    fn nested_loops_detected_with_distinct_headers() {
        let cfg = cfg_of(
            "// input i in [0, 3]\nproc p { while (i < 3) { j = 0; while (j < 2) { j = j + 1; } i = i + 1; } }",
        );
        assert_eq!(cfg.loops.len(), 2);
        let outer = cfg.loops.iter().find(|l| l.id == LoopId(0)).unwrap();
        let inner = cfg.loops.iter().find(|l| l.id == LoopId(1)).unwrap();
        assert!(outer.body.contains(&inner.header));
        assert!(!inner.body.contains(&outer.header));
        assert!(inner.body.is_subset(&outer.body));
    }

    #[test]
    fn every_back_edge_targets_its_dominator() {
        // Retreating edges in structured programs are always true back
        // edges, so loop detection never reports irreducible flow.
        for src in [
            "proc p { x = 0; while (x < 5) { x = x + 1; } }",
            "proc p { x = 0; while (x < 5) { while (x < 3) { x = x + 1; } x = x + 1; } }",
            "proc p { x = 0; while (x < 9) { if (x > 2) { x = x + 2; } else { x = x + 1; } } }",
        ] {
            let cfg = cfg_of(src);
            for l in &cfg.loops {
                for &u in &l.back_edges {
                    assert!(dominates(&cfg.idom, l.header, u));
                }
            }
        }
    }

    #[test]
    fn dot_output_is_stable() {
        let src = "proc p { x = 0; while (x < 5) { x = x + 1; } }";
        let a = cfg_to_dot(&cfg_of(src), "p");
        let b = cfg_to_dot(&cfg_of(src), "p");
        assert_eq!(a, b);
        assert!(a.contains("digraph"));
        assert!(a.contains("hexagon"));
    }

    #[test]
    fn canonicalize_leaves_breakless_programs_alone() {
        let p = parse("proc p { x = 0; while (x < 5) { x = x + 1; } }").unwrap();
        let c = canonicalize(&p);
        assert_eq!(crate::frontend::print_program(&p), crate::frontend::print_program(&c));
    }

    #[test]
    fn canonicalize_removes_breaks() {
        let p = parse(
            "// input x in [0, 20]\nproc p { while (x < 100) { x = x + 3; if (x > 10) { break; } x = x + 1; } }",
        )
        .unwrap();
        let c = canonicalize(&p);
        let mut breaks = 0;
        crate::frontend::ast::visit_stmts(&c.body, &mut |s| {
            if matches!(s, Stmt::Break { .. }) {
                breaks += 1;
            }
        });
        assert_eq!(breaks, 0);
        let printed = crate::frontend::print_program(&c);
        assert!(printed.contains("__brk0 == 0"), "{printed}");
    }

    fn assert_equivalent(src: &str) {
        let p = parse(src).unwrap();
        let c = canonicalize(&p);
        let original_vars = p.all_vars();
        for (i, inputs) in sample_inputs(&p, 60, 7).into_iter().enumerate() {
            let cfg = OracleConfig::default();
            let a = interpret(&p, &inputs, &cfg);
            let b = interpret(&c, &inputs, &cfg);
            assert_eq!(a.status, b.status, "case {i}: {inputs:?}");
            for v in &original_vars {
                assert_eq!(a.state.get(v), b.state.get(v), "case {i}, var {v}: {inputs:?}");
            }
            assert_eq!(a.loop_counts, b.loop_counts, "case {i}: {inputs:?}");
        }
    }

    #[test]
    fn canonicalized_programs_behave_identically() {
        assert_equivalent(
            "// input x in [0, 30]\nproc p { while (x < 100) { x = x + 3; if (x > 10) { break; } x = x + 1; } }",
        );
        assert_equivalent(
            "// input x in [-10, 10]\n// input y in [0, 5]\nproc p {\n\
             while (x < 50) {\n\
               if (x == y) { y = y - 1; break; }\n\
               x = x + 2;\n\
               if (x > 20) { if (y > 2) { break; } y = y + 1; }\n\
               x = x + 1;\n\
             }\n}",
        );
        assert_equivalent(
            "// input i in [0, 4]\nproc p {\n\
             s = 0;\n\
             while (i < 4) {\n\
               j = 0;\n\
               while (j < 10) { j = j + 1; if (j == 3) { break; } s = s + 1; }\n\
               i = i + 1;\n\
               if (s > 5) { break; }\n\
             }\n}",
        );
    }

    #[test]
    fn break_iteration_still_counts() {
        let p = parse("proc p { x = 0; while (x < 100) { x = x + 1; if (x == 3) { break; } } }")
            .unwrap();
        let c = canonicalize(&p);
        let r = interpret(&c, &Default::default(), &OracleConfig::default());
        assert_eq!(r.state["x"], 3);
        assert_eq!(r.loop_counts[&LoopId(0)], 3);
    }
}
