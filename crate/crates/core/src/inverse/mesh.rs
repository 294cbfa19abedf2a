//! Uniform triangulation of the unit square.

use super::InverseError;

/// P1 mesh: `n x n` cells, each split into two right triangles along
/// the (i,j)-(i+1,j+1) diagonal. Dirichlet nodes are the top and bottom
/// edges (`z2` in {0, 1}); left and right edges carry the natural
/// zero-flux condition and stay in the free set.
#[derive(Debug, Clone)]
pub struct Mesh {
    n: usize,
    coords: Vec<(f64, f64)>,
    triangles: Vec<[usize; 3]>,
    free_index: Vec<Option<usize>>,
    free_nodes: Vec<usize>,
}

impl Mesh {
    /// `n` must be a positive multiple of 4 so that the inclusion
    /// corners (0.25, 0.75) and the observation points are mesh nodes.
    pub fn unit_square(n: usize) -> Result<Mesh, InverseError> {
        if n == 0 || n % 4 != 0 {
            return Err(InverseError::Mesh(format!(
                "subdivision count must be a positive multiple of 4, got {n}"
            )));
        }
        let nodes_per_side = n + 1;
        let h = 1.0 / n as f64;
        let mut coords = Vec::with_capacity(nodes_per_side * nodes_per_side);
        for j in 0..nodes_per_side {
            for i in 0..nodes_per_side {
                coords.push((i as f64 * h, j as f64 * h));
            }
        }
        let id = |i: usize, j: usize| j * nodes_per_side + i;

        let mut triangles = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                triangles.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
                triangles.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
            }
        }

        let mut free_index = vec![None; coords.len()];
        let mut free_nodes = Vec::new();
        for (node, &(_, y)) in coords.iter().enumerate() {
            if y != 0.0 && y != 1.0 {
                free_index[node] = Some(free_nodes.len());
                free_nodes.push(node);
            }
        }
        debug_assert_eq!(
            free_nodes.len(),
            nodes_per_side * nodes_per_side - 2 * nodes_per_side
        );

        Ok(Mesh { n, coords, triangles, free_index, free_nodes })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn num_nodes(&self) -> usize {
        self.coords.len()
    }

    /// Number of free degrees of freedom, `(n+1)² - 2(n+1)`.
    pub fn num_free(&self) -> usize {
        self.free_nodes.len()
    }

    pub fn node_coord(&self, node: usize) -> (f64, f64) {
        self.coords[node]
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn is_dirichlet(&self, node: usize) -> bool {
        self.free_index[node].is_none()
    }

    pub fn free_index_of(&self, node: usize) -> Option<usize> {
        self.free_index[node]
    }

    /// Node id of the free dof `k`.
    pub fn free_node(&self, k: usize) -> usize {
        self.free_nodes[k]
    }

    /// Exact node lookup for coordinates that are multiples of `h`.
    pub fn node_at(&self, x: f64, y: f64) -> Option<usize> {
        let n = self.n as f64;
        let i = x * n;
        let j = y * n;
        if (i - i.round()).abs() > 1e-9 || (j - j.round()).abs() > 1e-9 {
            return None;
        }
        let (i, j) = (i.round() as usize, j.round() as usize);
        if i > self.n || j > self.n {
            return None;
        }
        Some(j * (self.n + 1) + i)
    }

    pub fn centroid(&self, tri: &[usize; 3]) -> (f64, f64) {
        let (x0, y0) = self.coords[tri[0]];
        let (x1, y1) = self.coords[tri[1]];
        let (x2, y2) = self.coords[tri[2]];
        ((x0 + x1 + x2) / 3.0, (y0 + y1 + y2) / 3.0)
    }
}
