use super::{ProblemGraph, RowKind};

/// Where one directed-edge dual slot comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SlotInfo {
    /// Node that holds this slot (`i` in `z_{i|j}`).
    pub owner: usize,
    /// The other endpoint (`j` in `z_{i|j}`).
    pub neighbour: usize,
    /// Index into the graph's edge list.
    pub edge: usize,
    /// Row within that edge block.
    pub row: usize,
    pub kind: RowKind,
}

/// Canonical ordering of the `2m` lifted dual slots.
///
/// Edge rows are sorted by `(min(i, j), max(i, j), row)`. Slot `r < m` is
/// `(lo | hi, r)` and slot `r + m` is its mirror `(hi | lo, r)`, so the
/// partner map is `s ↦ (s + m) mod 2m`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DirectedEdgeLayout {
    rows: usize,
    slots: Vec<SlotInfo>,
    by_owner: Vec<Vec<usize>>,
}

impl DirectedEdgeLayout {
    /// Builds the layout from the graph's edge blocks. Node constraint blocks
    /// are ignored, so lower them first.
    pub fn new(graph: &ProblemGraph) -> Self {
        let mut order: Vec<usize> = (0..graph.edges().len()).collect();
        order.sort_by_key(|&e| {
            let edge = &graph.edges()[e];
            (edge.i.min(edge.j), edge.i.max(edge.j))
        });

        let mut forward = Vec::new();
        for e in order {
            let edge = &graph.edges()[e];
            let (lo, hi) = (edge.i.min(edge.j), edge.i.max(edge.j));
            for (row, &kind) in edge.kinds.iter().enumerate() {
                forward.push(SlotInfo {
                    owner: lo,
                    neighbour: hi,
                    edge: e,
                    row,
                    kind,
                });
            }
        }
        let rows = forward.len();
        let mirror: Vec<SlotInfo> = forward
            .iter()
            .map(|s| SlotInfo {
                owner: s.neighbour,
                neighbour: s.owner,
                ..*s
            })
            .collect();
        let slots: Vec<SlotInfo> = forward.into_iter().chain(mirror).collect();

        let mut by_owner = vec![Vec::new(); graph.num_nodes()];
        for (s, info) in slots.iter().enumerate() {
            by_owner[info.owner].push(s);
        }
        DirectedEdgeLayout { rows, slots, by_owner }
    }

    /// Number of undirected constraint rows `m`.
    pub fn num_rows(&self) -> usize {
        self.rows
    }

    /// `2m`.
    pub fn num_slots(&self) -> usize {
        self.slots.len()
    }

    pub fn partner(&self, slot: usize) -> usize {
        let m = self.rows;
        if slot < m {
            slot + m
        } else {
            slot - m
        }
    }

    pub fn slot(&self, slot: usize) -> &SlotInfo {
        &self.slots[slot]
    }

    pub fn slots(&self) -> &[SlotInfo] {
        &self.slots
    }

    pub fn kind(&self, slot: usize) -> RowKind {
        self.slots[slot].kind
    }

    /// Slots `z_{i|·}` held by node `i`, in increasing slot order.
    pub fn owned_by(&self, node: usize) -> &[usize] {
        &self.by_owner[node]
    }

    /// Slot index of `(owner | neighbour, row)`.
    pub fn find(&self, owner: usize, neighbour: usize, row: usize) -> Option<usize> {
        self.by_owner.get(owner)?.iter().copied().find(|&s| {
            let info = &self.slots[s];
            info.neighbour == neighbour && info.row == row
        })
    }
}

#[cfg(test)]
mod tests {
    use nalgebra::{DMatrix, DVector};

    use super::*;
    use crate::problem::{EdgeConstraintBlock, LocalObjective, Node};

    fn two_rows_single_edge(i: usize, j: usize) -> ProblemGraph {
        let node = || Node::new(LocalObjective::squared_distance(&DVector::zeros(1)));
        ProblemGraph::new(
            vec![node(), node()],
            vec![EdgeConstraintBlock {
                i,
                j,
                a_ij: DMatrix::from_column_slice(2, 1, &[1.0, 2.0]),
                a_ji: DMatrix::from_column_slice(2, 1, &[-1.0, 3.0]),
                b: DVector::from_column_slice(&[0.0, 1.0]),
                kinds: vec![RowKind::Equality, RowKind::Inequality],
            }],
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn single_edge_two_rows() {
        let layout = two_rows_single_edge(0, 1).layout();
        assert_eq!(layout.num_slots(), 4);
        assert_eq!(layout.partner(0), 2);
        assert_eq!(layout.partner(3), 1);
        assert_eq!(layout.slot(0).owner, 0);
        assert_eq!(layout.slot(2).owner, 1);
        assert_eq!(layout.kind(1), RowKind::Inequality);
        assert_eq!(layout.kind(3), RowKind::Inequality);
        assert_eq!(layout.owned_by(1), &[2, 3]);
        assert_eq!(layout.find(1, 0, 1), Some(3));
        assert_eq!(layout.find(0, 0, 0), None);
    }

    #[test]
    fn reversed_edge_orientation_gives_same_order() {
        let a = two_rows_single_edge(0, 1).layout();
        let b = two_rows_single_edge(1, 0).layout();
        for s in 0..4 {
            assert_eq!(a.slot(s).owner, b.slot(s).owner);
            assert_eq!(a.slot(s).row, b.slot(s).row);
        }
    }

    #[test]
    fn partner_is_fixed_point_free_involution() {
        let layout = two_rows_single_edge(0, 1).layout();
        for s in 0..layout.num_slots() {
            let p = layout.partner(s);
            assert_ne!(p, s);
            assert_eq!(layout.partner(p), s);
            assert_eq!(layout.slot(p).owner, layout.slot(s).neighbour);
            assert_eq!(layout.slot(p).row, layout.slot(s).row);
        }
    }
}
