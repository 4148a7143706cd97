use std::collections::HashMap;
use std::fmt;

/// Modal parameter `S` built from `id`, the hop predicates `e_i` and the
/// set operations.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ModalParam {
    Id,
    /// `e_i`, nodes at shortest-path distance exactly `i` (1-based).
    Edge(usize),
    Not(Box<ModalParam>),
    Union(Box<ModalParam>, Box<ModalParam>),
    Inter(Box<ModalParam>, Box<ModalParam>),
}

/// The eight parameter shapes the compiler understands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModalKind {
    /// `id`
    Id,
    /// `e_i`
    Edge(usize),
    /// `!e_i & !id`
    NeitherEdgeNorId(usize),
    /// `id | e_i`
    IdOrEdge(usize),
    /// `!id`
    NotId,
    /// `!e_i`
    NotEdge(usize),
    /// `e_i | !e_i`, every node
    All(usize),
    /// `e_i & !e_i`, no node
    Empty(usize),
}

impl ModalParam {
    pub fn edge_indices(&self, out: &mut Vec<usize>) {
        match self {
            ModalParam::Id => {}
            ModalParam::Edge(i) => out.push(*i),
            ModalParam::Not(p) => p.edge_indices(out),
            ModalParam::Union(a, b) | ModalParam::Inter(a, b) => {
                a.edge_indices(out);
                b.edge_indices(out);
            }
        }
    }

    /// Matches the parameter against the eight supported shapes, up to
    /// operand order.
    pub fn kind(&self) -> Option<ModalKind> {
        use ModalParam::*;
        let not_edge = |p: &ModalParam| match p {
            Not(inner) => match **inner {
                Edge(i) => Some(i),
                _ => None,
            },
            _ => None,
        };
        let edge = |p: &ModalParam| match p {
            Edge(i) => Some(*i),
            _ => None,
        };
        let is_not_id = |p: &ModalParam| matches!(p, Not(inner) if **inner == Id);
        match self {
            Id => Some(ModalKind::Id),
            Edge(i) => Some(ModalKind::Edge(*i)),
            Not(inner) => match **inner {
                Id => Some(ModalKind::NotId),
                Edge(i) => Some(ModalKind::NotEdge(i)),
                _ => None,
            },
            Inter(a, b) => {
                for (x, y) in [(a, b), (b, a)] {
                    if let (Some(i), true) = (not_edge(x), is_not_id(y)) {
                        return Some(ModalKind::NeitherEdgeNorId(i));
                    }
                    if let (Some(i), Some(j)) = (edge(x), not_edge(y)) {
                        if i == j {
                            return Some(ModalKind::Empty(i));
                        }
                    }
                }
                None
            }
            Union(a, b) => {
                for (x, y) in [(a, b), (b, a)] {
                    if let (true, Some(i)) = (**x == Id, edge(y)) {
                        return Some(ModalKind::IdOrEdge(i));
                    }
                    if let (Some(i), Some(j)) = (edge(x), not_edge(y)) {
                        if i == j {
                            return Some(ModalKind::All(i));
                        }
                    }
                }
                None
            }
        }
    }
}

impl ModalKind {
    pub fn to_param(self) -> ModalParam {
        use ModalParam::*;
        let b = Box::new;
        match self {
            ModalKind::Id => Id,
            ModalKind::Edge(i) => Edge(i),
            ModalKind::NeitherEdgeNorId(i) => Inter(b(Not(b(Edge(i)))), b(Not(b(Id)))),
            ModalKind::IdOrEdge(i) => Union(b(Id), b(Edge(i))),
            ModalKind::NotId => Not(b(Id)),
            ModalKind::NotEdge(i) => Not(b(Edge(i))),
            ModalKind::All(i) => Union(b(Edge(i)), b(Not(b(Edge(i))))),
            ModalKind::Empty(i) => Inter(b(Edge(i)), b(Not(b(Edge(i))))),
        }
    }
}

/// A node classifier with one free variable `x`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Formula {
    True,
    /// `Name(x)`: the node has color `color`.
    Atom { name: String, color: usize },
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    /// `<S>^>=count body`: at least `count` nodes of `S(x)` satisfy `body`.
    Modal {
        param: ModalParam,
        count: usize,
        body: Box<Formula>,
    },
}

impl Formula {
    pub fn atom(name: &str, color: usize) -> Self {
        Formula::Atom {
            name: name.to_string(),
            color,
        }
    }

    pub fn not(f: Formula) -> Self {
        Formula::Not(Box::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Self {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Self {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn modal(param: ModalParam, count: usize, body: Formula) -> Self {
        Formula::Modal {
            param,
            count,
            body: Box::new(body),
        }
    }

    /// Maximum nesting of counting modalities.
    pub fn quantifier_depth(&self) -> usize {
        match self {
            Formula::True | Formula::Atom { .. } => 0,
            Formula::Not(f) => f.quantifier_depth(),
            Formula::And(a, b) | Formula::Or(a, b) => a.quantifier_depth().max(b.quantifier_depth()),
            Formula::Modal { body, .. } => 1 + body.quantifier_depth(),
        }
    }

    /// Longest chain of operators above a leaf.
    pub fn height(&self) -> usize {
        match self {
            Formula::True | Formula::Atom { .. } => 0,
            Formula::Not(f) => 1 + f.height(),
            Formula::Modal { body, .. } => 1 + body.height(),
            Formula::And(a, b) | Formula::Or(a, b) => 1 + a.height().max(b.height()),
        }
    }

    pub fn max_edge_index(&self) -> usize {
        match self {
            Formula::True | Formula::Atom { .. } => 0,
            Formula::Not(f) => f.max_edge_index(),
            Formula::And(a, b) | Formula::Or(a, b) => a.max_edge_index().max(b.max_edge_index()),
            Formula::Modal { param, body, .. } => {
                let mut idx = Vec::new();
                param.edge_indices(&mut idx);
                idx.into_iter().max().unwrap_or(0).max(body.max_edge_index())
            }
        }
    }

    fn children(&self) -> Vec<&Formula> {
        match self {
            Formula::True | Formula::Atom { .. } => vec![],
            Formula::Not(f) | Formula::Modal { body: f, .. } => vec![f],
            Formula::And(a, b) | Formula::Or(a, b) => vec![a, b],
        }
    }
}

/// A formula with its distinct subformulas numbered in post-order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FormulaAst {
    root: Formula,
    subformulas: Vec<Formula>,
    index: HashMap<Formula, usize>,
}

impl FormulaAst {
    pub fn new(root: Formula) -> Self {
        let mut subformulas = Vec::new();
        let mut index = HashMap::new();
        fn walk(f: &Formula, subs: &mut Vec<Formula>, index: &mut HashMap<Formula, usize>) {
            for c in f.children() {
                walk(c, subs, index);
            }
            if !index.contains_key(f) {
                index.insert(f.clone(), subs.len());
                subs.push(f.clone());
            }
        }
        walk(&root, &mut subformulas, &mut index);
        Self {
            root,
            subformulas,
            index,
        }
    }

    pub fn root(&self) -> &Formula {
        &self.root
    }

    pub fn subformulas(&self) -> &[Formula] {
        &self.subformulas
    }

    pub fn len(&self) -> usize {
        self.subformulas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subformulas.is_empty()
    }

    /// Position of a subformula in post-order numbering.
    pub fn position(&self, f: &Formula) -> Option<usize> {
        self.index.get(f).copied()
    }

    pub fn root_position(&self) -> usize {
        self.subformulas.len() - 1
    }

    pub fn quantifier_depth(&self) -> usize {
        self.root.quantifier_depth()
    }
}

impl fmt::Display for ModalParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModalParam::Id => write!(f, "id"),
            ModalParam::Edge(i) => write!(f, "e{i}"),
            ModalParam::Not(p) => write!(f, "!{p}"),
            ModalParam::Union(a, b) => write!(f, "({a} | {b})"),
            ModalParam::Inter(a, b) => write!(f, "({a} & {b})"),
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::True => write!(f, "True"),
            Formula::Atom { name, .. } => write!(f, "{name}(x)"),
            Formula::Not(g) => write!(f, "!{g}"),
            Formula::And(a, b) => write!(f, "({a} & {b})"),
            Formula::Or(a, b) => write!(f, "({a} | {b})"),
            Formula::Modal { param, count, body } => write!(f, "<{param}>^>={count} {body}"),
        }
    }
}
