//! Intermediate concepts: named groups of basic features, possibly nested.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::space::FeatureSpace;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConceptNode {
    /// Leaf concept over feature indices.
    Features(BTreeSet<usize>),
    /// Concept composed of other concepts.
    Children(BTreeSet<String>),
}

/// A validated, acyclic concept hierarchy over a feature space.
///
/// Concepts may overlap: a feature can contribute to several concepts.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ConceptTree {
    concepts: BTreeMap<String, ConceptNode>,
    roots: Vec<String>,
}

impl ConceptTree {
    pub fn new(space: &FeatureSpace, concepts: BTreeMap<String, ConceptNode>) -> Result<Self> {
        for (name, node) in &concepts {
            if space.index_of(name).is_some() {
                return Err(Error::InvalidConcept {
                    name: name.clone(),
                    reason: "concept name clashes with a feature name".into(),
                });
            }
            match node {
                ConceptNode::Features(indices) => {
                    if indices.is_empty() {
                        return Err(Error::InvalidConcept {
                            name: name.clone(),
                            reason: "no features".into(),
                        });
                    }
                    if let Some(bad) = indices.iter().find(|&&i| i >= space.len()) {
                        return Err(Error::InvalidConcept {
                            name: name.clone(),
                            reason: format!("feature index {bad} out of range"),
                        });
                    }
                }
                ConceptNode::Children(children) => {
                    if children.is_empty() {
                        return Err(Error::InvalidConcept {
                            name: name.clone(),
                            reason: "no children".into(),
                        });
                    }
                    if let Some(missing) = children.iter().find(|c| !concepts.contains_key(*c)) {
                        return Err(Error::InvalidConcept {
                            name: name.clone(),
                            reason: format!("child concept '{missing}' does not exist"),
                        });
                    }
                }
            }
        }
        if let Some(cycle) = find_cycle(&concepts) {
            return Err(Error::ConceptCycle(cycle));
        }
        let referenced: BTreeSet<&String> = concepts
            .values()
            .filter_map(|node| match node {
                ConceptNode::Children(c) => Some(c.iter()),
                ConceptNode::Features(_) => None,
            })
            .flatten()
            .collect();
        let roots = concepts
            .keys()
            .filter(|name| !referenced.contains(name))
            .cloned()
            .collect();
        Ok(Self { concepts, roots })
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.concepts.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.concepts.keys().map(String::as_str)
    }

    /// Concepts that are not a child of any other concept, sorted by name.
    pub fn roots(&self) -> &[String] {
        &self.roots
    }

    pub fn node(&self, name: &str) -> Option<&ConceptNode> {
        self.concepts.get(name)
    }

    /// Union of all feature indices reachable from `name`.
    pub fn resolve(&self, name: &str) -> Result<BTreeSet<usize>> {
        if !self.concepts.contains_key(name) {
            return Err(Error::UnknownConcept(name.to_string()));
        }
        let mut out = BTreeSet::new();
        let mut visited = BTreeSet::new();
        let mut stack = vec![name];
        while let Some(current) = stack.pop() {
            if !visited.insert(current) {
                continue;
            }
            match &self.concepts[current] {
                ConceptNode::Features(indices) => out.extend(indices),
                ConceptNode::Children(children) => stack.extend(children.iter().map(String::as_str)),
            }
        }
        debug_assert!(!out.is_empty());
        Ok(out)
    }
}

/// Returns one cycle as a closed path of names, if any exists.
fn find_cycle(concepts: &BTreeMap<String, ConceptNode>) -> Option<Vec<String>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Unvisited,
        Active,
        Done,
    }
    fn visit<'a>(
        name: &'a str,
        concepts: &'a BTreeMap<String, ConceptNode>,
        marks: &mut BTreeMap<&'a str, Mark>,
        path: &mut Vec<&'a str>,
    ) -> Option<Vec<String>> {
        match marks.get(name).copied().unwrap_or(Mark::Unvisited) {
            Mark::Done => return None,
            Mark::Active => {
                let start = path.iter().position(|n| *n == name).unwrap_or(0);
                let mut cycle: Vec<String> = path[start..].iter().map(|s| s.to_string()).collect();
                cycle.push(name.to_string());
                return Some(cycle);
            }
            Mark::Unvisited => {}
        }
        marks.insert(name, Mark::Active);
        path.push(name);
        if let Some(ConceptNode::Children(children)) = concepts.get(name) {
            for child in children {
                if let Some(cycle) = visit(child, concepts, marks, path) {
                    return Some(cycle);
                }
            }
        }
        path.pop();
        marks.insert(name, Mark::Done);
        None
    }

    let mut marks = BTreeMap::new();
    for name in concepts.keys() {
        let mut path = Vec::new();
        if let Some(cycle) = visit(name, concepts, &mut marks, &mut path) {
            return Some(cycle);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::FeatureDescriptor;

    fn space(n: usize) -> FeatureSpace {
        FeatureSpace::new(
            (0..n)
                .map(|i| FeatureDescriptor::continuous(format!("f{i}"), 0.0, 1.0).unwrap())
                .collect(),
        )
        .unwrap()
    }

    fn leaf(ix: &[usize]) -> ConceptNode {
        ConceptNode::Features(ix.iter().copied().collect())
    }

    fn parent(children: &[&str]) -> ConceptNode {
        ConceptNode::Children(children.iter().map(|s| s.to_string()).collect())
    }

    #[test]
    fn ball_concept_resolves_to_its_features() {
        let space = FeatureSpace::new(vec![
            FeatureDescriptor::continuous("size", 0.0, 1.0).unwrap(),
            FeatureDescriptor::continuous("psi", 8.0, 16.0).unwrap(),
            FeatureDescriptor::continuous("grip", 0.0, 1.0).unwrap(),
            FeatureDescriptor::continuous("color", 0.0, 1.0).unwrap(),
        ])
        .unwrap();
        let tree = ConceptTree::new(
            &space,
            BTreeMap::from([("throwability".to_string(), leaf(&[0, 1, 2]))]),
        )
        .unwrap();
        assert_eq!(
            tree.resolve("throwability").unwrap(),
            BTreeSet::from([0, 1, 2])
        );
    }

    #[test]
    fn single_leaf() {
        let tree = ConceptTree::new(&space(1), BTreeMap::from([("A".into(), leaf(&[0]))])).unwrap();
        assert_eq!(tree.resolve("A").unwrap(), BTreeSet::from([0]));
        assert_eq!(tree.roots(), ["A".to_string()]);
    }

    #[test]
    fn overlapping_children_are_deduplicated() {
        let tree = ConceptTree::new(
            &space(3),
            BTreeMap::from([
                ("A".into(), parent(&["B", "C"])),
                ("B".into(), leaf(&[0, 1])),
                ("C".into(), leaf(&[1, 2])),
            ]),
        )
        .unwrap();
        assert_eq!(tree.resolve("A").unwrap(), BTreeSet::from([0, 1, 2]));
        assert_eq!(tree.roots(), ["A".to_string()]);
    }

    #[test]
    fn unknown_concept() {
        let tree = ConceptTree::new(&space(1), BTreeMap::from([("A".into(), leaf(&[0]))])).unwrap();
        assert!(matches!(tree.resolve("Z"), Err(Error::UnknownConcept(_))));
    }

    #[test]
    fn cycle_is_rejected_with_path() {
        let err = ConceptTree::new(
            &space(1),
            BTreeMap::from([
                ("A".into(), parent(&["B"])),
                ("B".into(), parent(&["C"])),
                ("C".into(), parent(&["A"])),
            ]),
        )
        .unwrap_err();
        match err {
            Error::ConceptCycle(path) => {
                assert_eq!(path.first(), path.last());
                assert_eq!(path.len(), 4);
            }
            other => panic!("unexpected {other:?}"),
        }
        let self_loop = ConceptTree::new(
            &space(1),
            BTreeMap::from([("A".into(), parent(&["A"]))]),
        );
        assert!(matches!(self_loop, Err(Error::ConceptCycle(_))));
    }

    #[test]
    fn structural_errors() {
        let s = space(2);
        assert!(ConceptTree::new(&s, BTreeMap::from([("A".into(), leaf(&[5]))])).is_err());
        assert!(ConceptTree::new(&s, BTreeMap::from([("A".into(), leaf(&[]))])).is_err());
        assert!(ConceptTree::new(&s, BTreeMap::from([("A".into(), parent(&["B"]))])).is_err());
        assert!(ConceptTree::new(&s, BTreeMap::from([("f0".into(), leaf(&[1]))])).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        /// Random DAG: concept k may only reference concepts with larger index.
        fn dag() -> impl Strategy<Value = Vec<(Vec<usize>, Vec<usize>)>> {
            proptest::collection::vec(
                (
                    proptest::collection::vec(0usize..6, 0..3),
                    proptest::collection::vec(0usize..8, 0..3),
                ),
                1..8,
            )
        }

        fn build(spec: &[(Vec<usize>, Vec<usize>)], reverse_children: bool) -> BTreeMap<String, ConceptNode> {
            let n = spec.len();
            spec.iter()
                .enumerate()
                .map(|(k, (features, children))| {
                    let mut kids: Vec<String> = children
                        .iter()
                        .map(|c| k + 1 + c)
                        .filter(|&c| c < n)
                        .map(|c| format!("c{c}"))
                        .collect();
                    if reverse_children {
                        kids.reverse();
                    }
                    let node = if kids.is_empty() {
                        let mut f: BTreeSet<usize> = features.iter().copied().collect();
                        if f.is_empty() {
                            f.insert(k % 6);
                        }
                        ConceptNode::Features(f)
                    } else {
                        ConceptNode::Children(kids.into_iter().collect())
                    };
                    (format!("c{k}"), node)
                })
                .collect()
        }

        proptest! {
            #[test]
            fn resolution_is_valid_and_order_independent(spec in dag()) {
                let s = space(6);
                let a = ConceptTree::new(&s, build(&spec, false)).unwrap();
                let b = ConceptTree::new(&s, build(&spec, true)).unwrap();
                for name in a.names() {
                    let ra = a.resolve(name).unwrap();
                    prop_assert!(!ra.is_empty());
                    prop_assert!(ra.iter().all(|&i| i < s.len()));
                    prop_assert_eq!(ra, b.resolve(name).unwrap());
                }
            }
        }
    }
}
