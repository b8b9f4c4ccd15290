use nalgebra::Vector3;

use super::{Mesh, CONTAINMENT_TOL};

/// Uniform bin grid over the mesh bounding box for point location.
#[derive(Debug)]
pub struct Locator {
    lo: Vector3<f64>,
    cell: f64,
    dims: [usize; 3],
    offsets: Vec<usize>,
    items: Vec<u32>,
}

impl Locator {
    pub fn new(mesh: &Mesh) -> Self {
        let (lo, hi) = mesh.bounding_box();
        let ne = mesh.num_elements().max(1);
        let ext = (hi - lo).sup(&Vector3::repeat(1e-300));
        // roughly one element per bin
        let cell = (ext.product() / ne as f64).cbrt().max(ext.max() / 512.0);
        let dims = [0, 1, 2].map(|i| ((ext[i] / cell).ceil() as usize).max(1));
        let nbins = dims[0] * dims[1] * dims[2];
        let pad = CONTAINMENT_TOL;
        let ranges: Vec<[[usize; 2]; 3]> = (0..mesh.num_elements())
            .map(|e| {
                let mut a = Vector3::repeat(f64::INFINITY);
                let mut b = Vector3::repeat(f64::NEG_INFINITY);
                for p in mesh.element_points(e) {
                    a = a.inf(p);
                    b = b.sup(p);
                }
                [0, 1, 2].map(|i| {
                    let clamp = |t: f64| ((t / cell).floor().max(0.0) as usize).min(dims[i] - 1);
                    [clamp(a[i] - pad - lo[i]), clamp(b[i] + pad - lo[i])]
                })
            })
            .collect();
        let bin = |i: usize, j: usize, k: usize| i + dims[0] * (j + dims[1] * k);
        let mut counts = vec![0usize; nbins + 1];
        for r in &ranges {
            for k in r[2][0]..=r[2][1] {
                for j in r[1][0]..=r[1][1] {
                    for i in r[0][0]..=r[0][1] {
                        counts[bin(i, j, k) + 1] += 1;
                    }
                }
            }
        }
        for b in 0..nbins {
            counts[b + 1] += counts[b];
        }
        let mut fill = counts.clone();
        let mut items = vec![0u32; counts[nbins]];
        for (e, r) in ranges.iter().enumerate() {
            for k in r[2][0]..=r[2][1] {
                for j in r[1][0]..=r[1][1] {
                    for i in r[0][0]..=r[0][1] {
                        let b = bin(i, j, k);
                        items[fill[b]] = e as u32;
                        fill[b] += 1;
                    }
                }
            }
        }
        Self {
            lo,
            cell,
            dims,
            offsets: counts,
            items,
        }
    }

    /// Candidate elements whose bounding boxes overlap the bin of `x`, in increasing id order.
    pub fn candidates(&self, x: &Vector3<f64>) -> &[u32] {
        let mut idx = [0usize; 3];
        for i in 0..3 {
            let t = (x[i] - self.lo[i]) / self.cell;
            let limit = self.dims[i] as f64;
            if !(t >= -CONTAINMENT_TOL / self.cell && t <= limit + CONTAINMENT_TOL / self.cell) {
                return &[];
            }
            idx[i] = (t.floor().max(0.0) as usize).min(self.dims[i] - 1);
        }
        let b = idx[0] + self.dims[0] * (idx[1] + self.dims[1] * idx[2]);
        &self.items[self.offsets[b]..self.offsets[b + 1]]
    }

    pub fn locate(&self, mesh: &Mesh, x: &Vector3<f64>) -> Option<usize> {
        self.candidates(x)
            .iter()
            .map(|&e| e as usize)
            .find(|&e| mesh.contains(e, x, CONTAINMENT_TOL))
    }
}
