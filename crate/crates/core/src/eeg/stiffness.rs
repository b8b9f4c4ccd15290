use crate::element::ElementGeometry;
use crate::mesh::Mesh;
use crate::parallel::{map_range, Execution};
use crate::quadrature::{rule, Domain};
use crate::sparse::CsrMatrix;

const BLOCK: usize = 1 << 16;

fn element_matrix(mesh: &Mesh, e: usize) -> [[f64; 8]; 8] {
    let geom = ElementGeometry::of(mesh, e);
    let sigma = mesh.conductivity(e);
    let n = geom.n();
    let mut k = [[0.0; 8]; 8];
    match &geom {
        ElementGeometry::Tet { grads, det, .. } => {
            let vol = det / 6.0;
            for i in 0..4 {
                let sg = sigma * grads[i];
                for j in 0..4 {
                    k[i][j] = vol * sg.dot(&grads[j]);
                }
            }
        }
        ElementGeometry::Hex { .. } => {
            let q = rule(Domain::Hexahedron, 3).expect("order 3 is always available");
            let det = geom.det();
            for (xi, w) in q.iter() {
                let g = geom.grads(xi);
                for i in 0..n {
                    let sg = sigma * g[i] * (w * det);
                    for j in 0..n {
                        k[i][j] += sg.dot(&g[j]);
                    }
                }
            }
        }
    }
    k
}

/// Sparsity pattern: vertices sharing an element.
fn pattern(mesh: &Mesh, exec: Execution) -> Vec<Vec<u32>> {
    map_range(exec, mesh.num_vertices(), |v| {
        let mut cols: Vec<u32> = mesh
            .vertex_elements(v)
            .iter()
            .flat_map(|&e| mesh.element(e).iter().map(|&c| c as u32))
            .collect();
        cols.sort_unstable();
        cols.dedup();
        cols
    })
}

/// Stiffness matrix `K_ij = ∫ <σ ∇φ_j, ∇φ_i>` of the nodal basis.
pub fn assemble_stiffness(mesh: &Mesh, exec: Execution) -> CsrMatrix {
    let mut k = CsrMatrix::with_pattern(pattern(mesh, exec));
    let ne = mesh.num_elements();
    let nv = mesh.kind().vertices();
    let mut start = 0;
    while start < ne {
        let end = (start + BLOCK).min(ne);
        let mats = map_range(exec, end - start, |i| element_matrix(mesh, start + i));
        for (i, m) in mats.iter().enumerate() {
            let el = mesh.element(start + i);
            for a in 0..nv {
                for b in 0..nv {
                    k.add(el[a], el[b], m[a][b]);
                }
            }
        }
        start = end;
    }
    k
}
