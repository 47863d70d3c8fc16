//! Keypoint graphs: edges, rest lengths and anchor slots.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::point::Point3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ObjectClass {
    /// Curve-like: ropes, wires, branched harnesses.
    OneDim,
    /// Surface-like: cloth.
    TwoDim,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum AnchorRole {
    Leaf,
    Junction,
    Contour,
}

/// A keypoint index held fixed to a detected anchor position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AnchorSlot {
    pub index: usize,
    pub role: AnchorRole,
}

/// Edge set, rest lengths and anchors over `num_keypoints` keypoints.
///
/// Edges are stored as `(i, j)` with `i < j`, sorted ascending; the solver
/// visits them in this order. `edge_groups[e]` names the branch (1D) or grid
/// direction (2D, 0 = along a row, 1 = along a column) that edge `e`
/// belongs to; rest lengths are uniform within a group.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Topology {
    pub object_class: ObjectClass,
    pub num_keypoints: usize,
    pub edges: Vec<(usize, usize)>,
    pub rest_lengths: Vec<f64>,
    pub edge_groups: Vec<usize>,
    pub anchors: Vec<AnchorSlot>,
    pub grid_shape: Option<(usize, usize)>,
}

impl Topology {
    /// Builds a topology, normalising edge orientation and order. Rest
    /// lengths start at zero; see [`crate::init::compute_rest_lengths`].
    pub fn new(
        object_class: ObjectClass,
        num_keypoints: usize,
        edges: impl IntoIterator<Item = ((usize, usize), usize)>,
        anchors: Vec<AnchorSlot>,
        grid_shape: Option<(usize, usize)>,
    ) -> Result<Self> {
        let mut tagged: Vec<((usize, usize), usize)> =
            edges.into_iter().map(|((i, j), g)| ((i.min(j), i.max(j)), g)).collect();
        tagged.sort_by_key(|(e, _)| *e);
        let edges: Vec<(usize, usize)> = tagged.iter().map(|(e, _)| *e).collect();
        let edge_groups = tagged.iter().map(|(_, g)| *g).collect();
        let topo = Topology {
            object_class,
            num_keypoints,
            rest_lengths: vec![0.0; edges.len()],
            edges,
            edge_groups,
            anchors,
            grid_shape,
        };
        topo.validate_structure()?;
        Ok(topo)
    }

    /// Chain `0 - 1 - ... - (n-1)` with leaf anchors at both ends.
    pub fn chain(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidInput("a chain needs at least two keypoints".into()));
        }
        Topology::new(
            ObjectClass::OneDim,
            n,
            (0..n - 1).map(|i| ((i, i + 1), 0)),
            vec![
                AnchorSlot { index: 0, role: AnchorRole::Leaf },
                AnchorSlot { index: n - 1, role: AnchorRole::Leaf },
            ],
            None,
        )
    }

    /// Checks edge validity, uniqueness, connectivity, the tree property for
    /// 1D objects and the 4-neighbor grid for 2D objects with a grid shape.
    pub fn validate_structure(&self) -> Result<()> {
        let n = self.num_keypoints;
        if n == 0 {
            return Err(Error::TopologyFailed("no keypoints".into()));
        }
        for w in self.edges.windows(2) {
            if w[0] == w[1] {
                return Err(Error::TopologyFailed(format!("duplicate edge {:?}", w[0])));
            }
        }
        for &(i, j) in &self.edges {
            if i == j || i >= n || j >= n {
                return Err(Error::TopologyFailed(format!("invalid edge ({i}, {j}) for {n} keypoints")));
            }
        }
        if self.edge_groups.len() != self.edges.len() || self.rest_lengths.len() != self.edges.len() {
            return Err(Error::TopologyFailed("per-edge arrays disagree in length".into()));
        }
        for a in &self.anchors {
            if a.index >= n {
                return Err(Error::TopologyFailed(format!("anchor index {} out of range", a.index)));
            }
        }
        if self.connected_components() != 1 {
            return Err(Error::TopologyFailed("keypoint graph is disconnected".into()));
        }
        match self.object_class {
            ObjectClass::OneDim => {
                if self.edges.len() + 1 != n {
                    return Err(Error::TopologyFailed(format!(
                        "1D topology must be a tree: {} edges for {} keypoints",
                        self.edges.len(),
                        n
                    )));
                }
            }
            ObjectClass::TwoDim => {
                if let Some((rows, cols)) = self.grid_shape {
                    if rows * cols != n {
                        return Err(Error::TopologyFailed("grid shape does not match keypoint count".into()));
                    }
                    let mut expected = grid_edges(rows, cols);
                    expected.sort_by_key(|(e, _)| *e);
                    if expected.iter().map(|(e, _)| *e).ne(self.edges.iter().copied()) {
                        return Err(Error::TopologyFailed("edges do not form the 4-neighbor grid".into()));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn connected_components(&self) -> usize {
        let mut uf = crate::anchors::UnionFind::new(self.num_keypoints);
        for &(i, j) in &self.edges {
            uf.union(i, j);
        }
        uf.count()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.num_keypoints];
        for &(i, j) in &self.edges {
            deg[i] += 1;
            deg[j] += 1;
        }
        deg
    }

    pub fn is_anchor(&self, index: usize) -> bool {
        self.anchors.iter().any(|a| a.index == index)
    }

    /// Per-keypoint anchor flags.
    pub fn anchor_mask(&self) -> Vec<bool> {
        let mut m = vec![false; self.num_keypoints];
        for a in &self.anchors {
            m[a.index] = true;
        }
        m
    }

    pub fn anchor_indices(&self) -> Vec<usize> {
        self.anchors.iter().map(|a| a.index).collect()
    }

    /// Edge sets are equal (rest lengths ignored).
    pub fn same_graph(&self, other: &Topology) -> bool {
        self.num_keypoints == other.num_keypoints && self.edges == other.edges
    }
}

/// 4-neighbor grid edges over `rows × cols` keypoints indexed `r * cols + c`,
/// tagged 0 for row-direction and 1 for column-direction edges.
pub fn grid_edges(rows: usize, cols: usize) -> Vec<((usize, usize), usize)> {
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let i = r * cols + c;
            if c + 1 < cols {
                edges.push(((i, i + 1), 0));
            }
            if r + 1 < rows {
                edges.push(((i, i + cols), 1));
            }
        }
    }
    edges
}

/// N keypoint positions for one frame, in keypoint-index order.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KeypointSet {
    pub positions: Vec<Point3>,
    pub frame_index: usize,
}

impl KeypointSet {
    pub fn new(positions: Vec<Point3>, frame_index: usize) -> Self {
        Self { positions, frame_index }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn check(&self, topology: &Topology) -> Result<()> {
        if self.positions.len() != topology.num_keypoints {
            return Err(Error::InvalidInput(format!(
                "{} keypoints but topology has {}",
                self.positions.len(),
                topology.num_keypoints
            )));
        }
        if !self.positions.iter().all(Point3::is_finite) {
            return Err(Error::InvalidInput("non-finite keypoint".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_is_a_path() {
        let t = Topology::chain(10).unwrap();
        assert_eq!(t.edges.len(), 9);
        let deg = t.degrees();
        assert_eq!(deg.iter().filter(|d| **d == 1).count(), 2);
        assert_eq!(deg.iter().filter(|d| **d == 2).count(), 8);
    }

    #[test]
    fn rejects_cycles_and_duplicates_for_1d() {
        let cyc = Topology::new(ObjectClass::OneDim, 3, [((0, 1), 0), ((1, 2), 0), ((2, 0), 0)], vec![], None);
        assert!(matches!(cyc, Err(Error::TopologyFailed(_))));
        let dup = Topology::new(ObjectClass::OneDim, 3, [((0, 1), 0), ((1, 0), 0)], vec![], None);
        assert!(matches!(dup, Err(Error::TopologyFailed(_))));
        let disconnected = Topology::new(ObjectClass::TwoDim, 4, [((0, 1), 0), ((2, 3), 0)], vec![], None);
        assert!(matches!(disconnected, Err(Error::TopologyFailed(_))));
    }

    #[test]
    fn grid_validation() {
        let t = Topology::new(ObjectClass::TwoDim, 6, grid_edges(2, 3), vec![], Some((2, 3))).unwrap();
        assert_eq!(t.edges.len(), 7);
        assert!(Topology::new(ObjectClass::TwoDim, 6, grid_edges(3, 2), vec![], Some((2, 3))).is_err());
    }
}
