//! Oriented simplicial complexes of order two and their incidence matrices.
//!
//! Simplices are stored as sorted vertex tuples and listed in lexicographic
//! order; that order is the row/column index of every matrix and signal in
//! the crate. Edges are oriented `i -> j` with `i < j`, triangles `i -> j -> k`
//! with `i < j < k`.

use std::fmt;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub type Edge = [usize; 2];
pub type Triangle = [usize; 3];

/// A single reason a complex fails validation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    VertexOutOfRange { vertex: usize },
    DegenerateEdge(Edge),
    DegenerateTriangle(Triangle),
    DuplicateEdge(Edge),
    DuplicateTriangle(Triangle),
    UnsortedEdges,
    UnsortedTriangles,
    MissingFace { face: Edge, triangle: Triangle },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::VertexOutOfRange { vertex } => write!(f, "vertex {vertex} out of range"),
            Violation::DegenerateEdge(e) => write!(f, "edge ({},{}) is not increasing", e[0], e[1]),
            Violation::DegenerateTriangle(t) => {
                write!(f, "triangle ({},{},{}) is not increasing", t[0], t[1], t[2])
            }
            Violation::DuplicateEdge(e) => write!(f, "duplicate edge ({},{})", e[0], e[1]),
            Violation::DuplicateTriangle(t) => {
                write!(f, "duplicate triangle ({},{},{})", t[0], t[1], t[2])
            }
            Violation::UnsortedEdges => write!(f, "edges are not in lexicographic order"),
            Violation::UnsortedTriangles => write!(f, "triangles are not in lexicographic order"),
            Violation::MissingFace { face, triangle } => write!(
                f,
                "missing face ({},{}) of triangle ({},{},{})",
                face[0], face[1], triangle[0], triangle[1], triangle[2]
            ),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", parts.join("; "))
    }
}

impl std::error::Error for ValidationReport {}

/// Vertex, edge and triangle sets of a complex of order at most two.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimplicialComplex2 {
    n_vertices: usize,
    edges: Vec<Edge>,
    triangles: Vec<Triangle>,
}

impl SimplicialComplex2 {
    /// Canonicalises (sorts every tuple and both lists) and validates.
    pub fn new(n_vertices: usize, edges: Vec<Edge>, triangles: Vec<Triangle>) -> Result<Self> {
        let mut edges: Vec<Edge> = edges
            .into_iter()
            .map(|mut e| {
                e.sort_unstable();
                e
            })
            .collect();
        let mut triangles: Vec<Triangle> = triangles
            .into_iter()
            .map(|mut t| {
                t.sort_unstable();
                t
            })
            .collect();
        edges.sort_unstable();
        triangles.sort_unstable();
        let complex = Self::from_parts_unchecked(n_vertices, edges, triangles);
        complex.validate().map_err(Error::InvalidComplex)?;
        Ok(complex)
    }

    /// Stores the lists as given. Use [`validate`](Self::validate) before
    /// handing the result to any matrix builder.
    pub fn from_parts_unchecked(
        n_vertices: usize,
        edges: Vec<Edge>,
        triangles: Vec<Triangle>,
    ) -> Self {
        Self {
            n_vertices,
            edges,
            triangles,
        }
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Number of simplices of order `k` (0, 1 or 2).
    pub fn count(&self, k: usize) -> Result<usize> {
        match k {
            0 => Ok(self.n_vertices),
            1 => Ok(self.edges.len()),
            2 => Ok(self.triangles.len()),
            _ => Err(Error::InvalidArgument(format!(
                "simplex order {k} is not supported (expected 0, 1 or 2)"
            ))),
        }
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    /// Canonical index of an edge, if present.
    pub fn edge_index(&self, a: usize, b: usize) -> Option<usize> {
        let key = if a < b { [a, b] } else { [b, a] };
        self.edges.binary_search(&key).ok()
    }

    /// Checks every structural invariant and reports each violation found.
    pub fn validate(&self) -> std::result::Result<(), ValidationReport> {
        let mut report = ValidationReport::default();
        let mut out_of_range = Vec::new();
        let note_vertex = |v: usize, list: &mut Vec<usize>| {
            if v >= self.n_vertices && !list.contains(&v) {
                list.push(v);
            }
        };
        for e in &self.edges {
            for &v in e {
                note_vertex(v, &mut out_of_range);
            }
        }
        for t in &self.triangles {
            for &v in t {
                note_vertex(v, &mut out_of_range);
            }
        }
        report.violations.extend(
            out_of_range
                .into_iter()
                .map(|vertex| Violation::VertexOutOfRange { vertex }),
        );

        for e in &self.edges {
            if e[0] >= e[1] {
                report.violations.push(Violation::DegenerateEdge(*e));
            }
        }
        for t in &self.triangles {
            if !(t[0] < t[1] && t[1] < t[2]) {
                report.violations.push(Violation::DegenerateTriangle(*t));
            }
        }
        let mut unsorted = false;
        for w in self.edges.windows(2) {
            if w[0] == w[1] {
                report.violations.push(Violation::DuplicateEdge(w[0]));
            } else if w[0] > w[1] {
                unsorted = true;
            }
        }
        if unsorted {
            report.violations.push(Violation::UnsortedEdges);
        }
        let mut unsorted = false;
        for w in self.triangles.windows(2) {
            if w[0] == w[1] {
                report.violations.push(Violation::DuplicateTriangle(w[0]));
            } else if w[0] > w[1] {
                unsorted = true;
            }
        }
        if unsorted {
            report.violations.push(Violation::UnsortedTriangles);
        }

        // Face lookup must not depend on sortedness, the list may be broken.
        let mut sorted_edges = self.edges.clone();
        sorted_edges.sort_unstable();
        for t in &self.triangles {
            let mut tv = *t;
            tv.sort_unstable();
            for face in [[tv[0], tv[1]], [tv[0], tv[2]], [tv[1], tv[2]]] {
                if sorted_edges.binary_search(&face).is_err() {
                    report.violations.push(Violation::MissingFace {
                        face,
                        triangle: *t,
                    });
                }
            }
        }

        if report.is_ok() {
            Ok(())
        } else {
            Err(report)
        }
    }

    fn require_valid(&self) -> Result<()> {
        self.validate().map_err(Error::InvalidComplex)
    }

    /// Node-to-edge incidence `B1` (`n0 x n1`): column `(i,j)` holds -1 at
    /// row `i` and +1 at row `j`.
    pub fn incidence_b1(&self) -> Result<IncidenceMatrix> {
        self.require_valid()?;
        let mut m = DMatrix::<i32>::zeros(self.n_vertices, self.edges.len());
        for (c, e) in self.edges.iter().enumerate() {
            m[(e[0], c)] = -1;
            m[(e[1], c)] = 1;
        }
        Ok(IncidenceMatrix { order: 1, entries: m })
    }

    /// Edge-to-triangle incidence `B2` (`n1 x n2`): triangle `(i,j,k)` gets +1
    /// at `(i,j)`, +1 at `(j,k)` and -1 at `(i,k)`.
    pub fn incidence_b2(&self) -> Result<IncidenceMatrix> {
        self.require_valid()?;
        let mut m = DMatrix::<i32>::zeros(self.edges.len(), self.triangles.len());
        for (c, t) in self.triangles.iter().enumerate() {
            let [i, j, k] = *t;
            // validated: all three faces exist
            let ij = self.edge_index(i, j).expect("face (i,j)");
            let jk = self.edge_index(j, k).expect("face (j,k)");
            let ik = self.edge_index(i, k).expect("face (i,k)");
            m[(ij, c)] = 1;
            m[(jk, c)] = 1;
            m[(ik, c)] = -1;
        }
        Ok(IncidenceMatrix { order: 2, entries: m })
    }

    /// Upper or lower adjacency between simplices of order `k`.
    pub fn adjacency(&self, k: usize, mode: Adjacency) -> Result<DMatrix<bool>> {
        self.require_valid()?;
        let n = self.count(k)?;
        let mut adj = DMatrix::from_element(n, n, false);
        let mut link = |a: usize, b: usize| {
            if a != b {
                adj[(a, b)] = true;
                adj[(b, a)] = true;
            }
        };
        match (k, mode) {
            (0, Adjacency::Upper) => {
                for e in &self.edges {
                    link(e[0], e[1]);
                }
            }
            (1, Adjacency::Upper) => {
                for t in &self.triangles {
                    let ids = self.triangle_edge_ids(t);
                    for a in 0..3 {
                        for b in a + 1..3 {
                            link(ids[a], ids[b]);
                        }
                    }
                }
            }
            (1, Adjacency::Lower) => {
                for a in 0..self.edges.len() {
                    for b in a + 1..self.edges.len() {
                        let (ea, eb) = (self.edges[a], self.edges[b]);
                        if ea.iter().any(|v| eb.contains(v)) {
                            link(a, b);
                        }
                    }
                }
            }
            (2, Adjacency::Lower) => {
                let ids: Vec<[usize; 3]> =
                    self.triangles.iter().map(|t| self.triangle_edge_ids(t)).collect();
                for a in 0..ids.len() {
                    for b in a + 1..ids.len() {
                        if ids[a].iter().any(|e| ids[b].contains(e)) {
                            link(a, b);
                        }
                    }
                }
            }
            (0, Adjacency::Lower) => {
                return Err(Error::InvalidArgument(
                    "vertices have no faces, lower adjacency is undefined at order 0".into(),
                ))
            }
            (2, Adjacency::Upper) => {
                return Err(Error::InvalidArgument(
                    "no simplices of order 3, upper adjacency is undefined at order 2".into(),
                ))
            }
            _ => unreachable!("count() rejected k"),
        }
        Ok(adj)
    }

    fn triangle_edge_ids(&self, t: &Triangle) -> [usize; 3] {
        let [i, j, k] = *t;
        [
            self.edge_index(i, j).expect("face"),
            self.edge_index(i, k).expect("face"),
            self.edge_index(j, k).expect("face"),
        ]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Adjacency {
    Upper,
    Lower,
}

/// Signed incidence between simplices of order `order - 1` and `order`.
/// Entries are exact integers in {-1, 0, 1}.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IncidenceMatrix {
    order: usize,
    entries: DMatrix<i32>,
}

impl IncidenceMatrix {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn rows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn cols(&self) -> usize {
        self.entries.ncols()
    }

    pub fn entries(&self) -> &DMatrix<i32> {
        &self.entries
    }

    pub fn to_f64(&self) -> DMatrix<f64> {
        self.entries.map(f64::from)
    }

    /// Exact integer product.
    pub fn mul(&self, rhs: &IncidenceMatrix) -> Result<DMatrix<i32>> {
        if self.cols() != rhs.rows() {
            return Err(Error::dims("incidence product", self.cols(), rhs.rows()));
        }
        Ok(&self.entries * &rhs.entries)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn full_triangle() -> SimplicialComplex2 {
        SimplicialComplex2::new(3, vec![[0, 1], [0, 2], [1, 2]], vec![[0, 1, 2]]).unwrap()
    }

    #[test]
    fn full_triangle_is_valid() {
        assert!(full_triangle().validate().is_ok());
    }

    #[test]
    fn missing_face_is_reported() {
        let c = SimplicialComplex2::from_parts_unchecked(3, vec![[0, 1], [0, 2]], vec![[0, 1, 2]]);
        let report = c.validate().unwrap_err();
        assert_eq!(report.violations.len(), 1);
        assert!(report.to_string().contains("missing face (1,2)"));
    }

    #[test]
    fn out_of_range_vertex_is_reported() {
        let c = SimplicialComplex2::from_parts_unchecked(2, vec![[0, 2]], vec![]);
        let report = c.validate().unwrap_err();
        assert!(report.to_string().contains("vertex 2 out of range"));
    }

    #[test]
    fn duplicates_and_order_are_reported() {
        let c = SimplicialComplex2::from_parts_unchecked(3, vec![[1, 2], [0, 1], [0, 1]], vec![]);
        let v = c.validate().unwrap_err().violations;
        assert!(v.contains(&Violation::DuplicateEdge([0, 1])));
        assert!(v.contains(&Violation::UnsortedEdges));
    }

    #[test]
    fn new_canonicalises() {
        let c = SimplicialComplex2::new(3, vec![[2, 1], [1, 0], [0, 2]], vec![[2, 0, 1]]).unwrap();
        assert_eq!(c.edges(), &[[0, 1], [0, 2], [1, 2]]);
        assert_eq!(c.triangles(), &[[0, 1, 2]]);
        assert!(SimplicialComplex2::new(3, vec![[0, 1], [1, 0]], vec![]).is_err());
    }

    #[test]
    fn b1_full_triangle() {
        let b1 = full_triangle().incidence_b1().unwrap();
        let expected = DMatrix::from_row_slice(3, 3, &[-1, -1, 0, 1, 0, -1, 0, 1, 1]);
        assert_eq!(b1.entries(), &expected);
    }

    #[test]
    fn b1_single_edge_and_path() {
        let edge = SimplicialComplex2::new(2, vec![[0, 1]], vec![]).unwrap();
        assert_eq!(
            edge.incidence_b1().unwrap().entries(),
            &DMatrix::from_row_slice(2, 1, &[-1, 1])
        );
        let path = SimplicialComplex2::new(3, vec![[0, 1], [1, 2]], vec![]).unwrap();
        assert_eq!(
            path.incidence_b1().unwrap().entries(),
            &DMatrix::from_row_slice(3, 2, &[-1, 0, 1, -1, 0, 1])
        );
    }

    #[test]
    fn b2_full_triangle_and_empty() {
        let b2 = full_triangle().incidence_b2().unwrap();
        assert_eq!(b2.entries(), &DMatrix::from_row_slice(3, 1, &[1, -1, 1]));
        let hollow = SimplicialComplex2::new(3, vec![[0, 1], [0, 2], [1, 2]], vec![]).unwrap();
        let b2 = hollow.incidence_b2().unwrap();
        assert_eq!((b2.rows(), b2.cols()), (3, 0));
    }

    #[test]
    fn two_triangles_boundary_of_boundary_vanishes() {
        let c = SimplicialComplex2::new(
            4,
            vec![[0, 1], [0, 2], [1, 2], [1, 3], [2, 3]],
            vec![[0, 1, 2], [1, 2, 3]],
        )
        .unwrap();
        let b1 = c.incidence_b1().unwrap();
        let b2 = c.incidence_b2().unwrap();
        // elementwise product by hand
        for r in 0..b1.rows() {
            for col in 0..b2.cols() {
                let s: i32 = (0..b1.cols())
                    .map(|e| b1.entries()[(r, e)] * b2.entries()[(e, col)])
                    .sum();
                assert_eq!(s, 0);
            }
        }
        assert!(b1.mul(&b2).unwrap().iter().all(|&v| v == 0));
    }

    #[test]
    fn invalid_complex_rejected_by_builders() {
        let c = SimplicialComplex2::from_parts_unchecked(3, vec![[0, 1], [0, 2]], vec![[0, 1, 2]]);
        assert!(matches!(c.incidence_b1(), Err(Error::InvalidComplex(_))));
        assert!(matches!(c.incidence_b2(), Err(Error::InvalidComplex(_))));
    }

    #[test]
    fn adjacency_cases() {
        let tri = full_triangle();
        let up = tri.adjacency(1, Adjacency::Upper).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                assert_eq!(up[(a, b)], a != b);
            }
        }
        let path = SimplicialComplex2::new(3, vec![[0, 1], [1, 2]], vec![]).unwrap();
        let low = path.adjacency(1, Adjacency::Lower).unwrap();
        assert!(low[(0, 1)] && low[(1, 0)] && !low[(0, 0)]);
        assert!(tri.adjacency(2, Adjacency::Upper).is_err());
        assert!(tri.adjacency(0, Adjacency::Lower).is_err());
        assert!(tri.adjacency(3, Adjacency::Lower).is_err());
    }

    #[test]
    fn triangle_adjacency_through_shared_edge() {
        let c = SimplicialComplex2::new(
            5,
            vec![[0, 1], [0, 2], [1, 2], [1, 3], [2, 3], [3, 4]],
            vec![[0, 1, 2], [1, 2, 3]],
        )
        .unwrap();
        let low = c.adjacency(2, Adjacency::Lower).unwrap();
        assert!(low[(0, 1)]);
        let v = c.adjacency(0, Adjacency::Upper).unwrap();
        assert!(v[(3, 4)] && !v[(0, 4)]);
    }
}
