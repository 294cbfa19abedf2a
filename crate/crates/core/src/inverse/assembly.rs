//! P1 stiffness assembly for `-div(k grad u) = 0` with Dirichlet data on
//! the top and bottom edges lifted into the right-hand side.

use super::mesh::Mesh;
use super::model::{boundary_value, Porosity};
use super::InverseError;
use crate::matrix::SpdMatrix;

/// Assembles the free-node stiffness matrix `A_theta` (sparse, SPD) and
/// the lifted right-hand side for the porosity field `k(z; theta)`.
///
/// The coefficient is evaluated at element centroids; since the mesh
/// aligns with the inclusion boundary (n divisible by 4) no element
/// straddles it. Elements touching Dirichlet nodes must lie outside the
/// inclusion — that is what makes the right-hand side independent of
/// theta, and it is asserted rather than assumed.
pub fn assemble(mesh: &Mesh, theta: f64) -> Result<(SpdMatrix, Vec<f64>), InverseError> {
    let porosity = Porosity { theta };
    let d = mesh.num_free();
    let mut triplets: Vec<(usize, usize, f64)> = Vec::with_capacity(9 * mesh.triangles().len());
    let mut rhs = vec![0.0; d];

    for tri in mesh.triangles() {
        let (cx, cy) = mesh.centroid(tri);
        let k_elem = porosity.value(cx, cy);
        let touches_dirichlet = tri.iter().any(|&node| mesh.is_dirichlet(node));
        if touches_dirichlet && porosity.contains(cx, cy) {
            return Err(InverseError::Mesh(
                "inclusion reaches a Dirichlet element; right-hand side would depend on theta".into(),
            ));
        }

        let p: Vec<(f64, f64)> = tri.iter().map(|&n| mesh.node_coord(n)).collect();
        // hat-function gradients: grad phi_i = (b_i, c_i) / (2 area)
        let b = [p[1].1 - p[2].1, p[2].1 - p[0].1, p[0].1 - p[1].1];
        let c = [p[2].0 - p[1].0, p[0].0 - p[2].0, p[1].0 - p[0].0];
        let area = 0.5 * ((p[1].0 - p[0].0) * (p[2].1 - p[0].1) - (p[2].0 - p[0].0) * (p[1].1 - p[0].1));
        debug_assert!(area > 0.0);

        for i in 0..3 {
            let row = match mesh.free_index_of(tri[i]) {
                Some(r) => r,
                None => continue,
            };
            for j in 0..3 {
                let k_ij = k_elem * (b[i] * b[j] + c[i] * c[j]) / (4.0 * area);
                match mesh.free_index_of(tri[j]) {
                    Some(col) => triplets.push((row, col, k_ij)),
                    None => {
                        let (x, y) = mesh.node_coord(tri[j]);
                        rhs[row] -= k_ij * boundary_value(x, y);
                    }
                }
            }
        }
    }

    let a = SpdMatrix::from_triplets(d, &triplets)?;
    Ok((a, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{direct_solve, SpdFactor};

    /// Independent assembly oracle: hat-function plane coefficients from
    /// a 3x3 solve per vertex, one-point quadrature at the centroid, and
    /// assembly over the full node set with Dirichlet rows restricted
    /// afterwards.
    fn oracle_assemble(mesh: &Mesh, theta: f64) -> (Vec<Vec<f64>>, Vec<f64>) {
        let porosity = Porosity { theta };
        let nn = mesh.num_nodes();
        let mut full = vec![vec![0.0; nn]; nn];
        for tri in mesh.triangles() {
            let (cx, cy) = mesh.centroid(tri);
            let k_elem = porosity.value(cx, cy);
            let p: Vec<(f64, f64)> = tri.iter().map(|&n| mesh.node_coord(n)).collect();
            // vandermonde for the plane a + b x + c y through the vertices
            let v = nalgebra::Matrix3::new(
                1.0, p[0].0, p[0].1,
                1.0, p[1].0, p[1].1,
                1.0, p[2].0, p[2].1,
            );
            let vinv = v.try_inverse().unwrap();
            let area = 0.5 * ((p[1].0 - p[0].0) * (p[2].1 - p[0].1)
                - (p[2].0 - p[0].0) * (p[1].1 - p[0].1));
            let grads: Vec<(f64, f64)> = (0..3)
                .map(|i| {
                    let mut e = nalgebra::Vector3::zeros();
                    e[i] = 1.0;
                    let coef = vinv * e;
                    (coef[1], coef[2])
                })
                .collect();
            for i in 0..3 {
                for j in 0..3 {
                    let integrand = grads[i].0 * grads[j].0 + grads[i].1 * grads[j].1;
                    full[tri[i]][tri[j]] += k_elem * integrand * area;
                }
            }
        }
        let d = mesh.num_free();
        let mut a = vec![vec![0.0; d]; d];
        let mut rhs = vec![0.0; d];
        for row_node in 0..nn {
            let Some(r) = mesh.free_index_of(row_node) else { continue };
            for col_node in 0..nn {
                match mesh.free_index_of(col_node) {
                    Some(c) => a[r][c] = full[row_node][col_node],
                    None => {
                        let (x, y) = mesh.node_coord(col_node);
                        rhs[r] -= full[row_node][col_node] * boundary_value(x, y);
                    }
                }
            }
        }
        (a, rhs)
    }

    #[test]
    fn matches_hand_assembly_oracle_on_tiny_mesh() {
        let mesh = Mesh::unit_square(4).unwrap();
        for theta in [0.0, 2.0] {
            let (a, rhs) = assemble(&mesh, theta).unwrap();
            let (a_oracle, rhs_oracle) = oracle_assemble(&mesh, theta);
            let d = mesh.num_free();
            for i in 0..d {
                for j in 0..d {
                    assert!(
                        (a.entry(i, j) - a_oracle[i][j]).abs() <= 1e-12,
                        "entry ({i},{j}) theta={theta}: {} vs {}",
                        a.entry(i, j),
                        a_oracle[i][j]
                    );
                }
                assert!((rhs[i] - rhs_oracle[i]).abs() <= 1e-12, "rhs {i}");
            }
        }
    }

    #[test]
    fn stiffness_is_exactly_symmetric_and_spd() {
        let mesh = Mesh::unit_square(8).unwrap();
        for theta in [-40.0, 0.0, 2.0, 5.0] {
            let (a, _) = assemble(&mesh, theta).unwrap();
            assert_eq!(a.symmetry_defect(), 0.0);
            assert!(SpdFactor::new(&a).is_ok(), "not SPD at theta={theta}");
        }
    }

    #[test]
    fn rhs_is_independent_of_theta() {
        let mesh = Mesh::unit_square(8).unwrap();
        let (_, rhs_a) = assemble(&mesh, -3.0).unwrap();
        let (_, rhs_b) = assemble(&mesh, 4.0).unwrap();
        assert_eq!(rhs_a, rhs_b);
    }

    #[test]
    fn very_negative_theta_reduces_to_unit_coefficient() {
        // exp(-40) underflows against 1.0, so k == 1 everywhere
        let mesh = Mesh::unit_square(8).unwrap();
        let (a_neg, _) = assemble(&mesh, -40.0).unwrap();
        let mesh2 = Mesh::unit_square(8).unwrap();
        let (a_unit, _) = {
            // porosity with the inclusion term removed entirely: theta so
            // negative the addend vanishes in f64
            assemble(&mesh2, -800.0).unwrap()
        };
        for i in 0..a_neg.dim() {
            for j in 0..a_neg.dim() {
                assert!((a_neg.entry(i, j) - a_unit.entry(i, j)).abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn centre_value_is_half_by_symmetry() {
        let mesh = Mesh::unit_square(8).unwrap();
        for theta in [-40.0, 2.0] {
            let (a, rhs) = assemble(&mesh, theta).unwrap();
            let x = direct_solve(&a, &rhs).unwrap();
            let centre = mesh.free_index_of(mesh.node_at(0.5, 0.5).unwrap()).unwrap();
            assert!(
                (x[centre] - 0.5).abs() <= 1e-10,
                "u(0.5,0.5) = {} at theta={theta}",
                x[centre]
            );
        }
    }

    #[test]
    fn discrete_maximum_principle() {
        // f = 0 and boundary data in [0,1]: all nodal values stay inside
        let mesh = Mesh::unit_square(12).unwrap();
        for theta in [-40.0, 0.0, 2.0] {
            let (a, rhs) = assemble(&mesh, theta).unwrap();
            let x = direct_solve(&a, &rhs).unwrap();
            for v in &x {
                assert!(*v >= -1e-10 && *v <= 1.0 + 1e-10, "value {v} outside [0,1]");
            }
        }
    }

    #[test]
    fn observables_converge_at_second_order() {
        // successive mesh halvings shrink observation errors ~4x
        let observables = |n: usize| -> Vec<f64> {
            let mesh = Mesh::unit_square(n).unwrap();
            let (a, rhs) = assemble(&mesh, 0.0).unwrap();
            let x = direct_solve(&a, &rhs).unwrap();
            super::super::model::OBSERVATION_POINTS
                .iter()
                .map(|&(ox, oy)| {
                    let node = mesh.node_at(ox, oy).unwrap();
                    x[mesh.free_index_of(node).unwrap()]
                })
                .collect()
        };
        let y8 = observables(8);
        let y16 = observables(16);
        let y32 = observables(32);
        let d1: f64 = y8.iter().zip(&y16).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let d2: f64 = y16.iter().zip(&y32).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let ratio = d1 / d2;
        assert!((3.0..=5.0).contains(&ratio), "refinement ratio {ratio}");
    }
}
