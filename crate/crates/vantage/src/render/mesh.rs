//! Toy object meshes. Every kind has a visually unambiguous front marker
//! that lives strictly in the +x half, and each mesh is normalized so the
//! largest bounding-box dimension is exactly 1 (the object diameter).

use crate::error::{Error, Result};
use crate::scalar::Real;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectKind {
    ArrowCar,
    ChevronBird,
    WedgeChair,
    BlockDog,
}

impl ObjectKind {
    pub const ALL: [ObjectKind; 4] = [
        ObjectKind::ArrowCar,
        ObjectKind::ChevronBird,
        ObjectKind::WedgeChair,
        ObjectKind::BlockDog,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ObjectKind::ArrowCar => "arrowcar",
            ObjectKind::ChevronBird => "chevronbird",
            ObjectKind::WedgeChair => "wedgechair",
            ObjectKind::BlockDog => "blockdog",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == name)
            .ok_or_else(|| Error::config(format!("unknown object kind {name:?}")))
    }
}

/// Named body colors available to the toy caption grammar.
pub const COLOR_NAMES: [(&str, [u8; 3]); 8] = [
    ("red", [200, 40, 40]),
    ("green", [40, 180, 60]),
    ("blue", [50, 80, 220]),
    ("yellow", [230, 200, 40]),
    ("purple", [150, 60, 200]),
    ("cyan", [40, 200, 200]),
    ("orange", [240, 130, 30]),
    ("white", [235, 235, 235]),
];

pub fn color_by_name(name: &str) -> Result<[u8; 3]> {
    COLOR_NAMES
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, c)| *c)
        .ok_or_else(|| Error::config(format!("unknown color {name:?}")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Body,
    /// Front-distinguishing geometry, rendered in the accent color.
    Marker,
}

#[derive(Debug, Clone)]
pub struct Mesh<R: Real> {
    pub vertices: Vec<[R; 3]>,
    /// (vertex indices, region) per triangle, outward winding.
    pub triangles: Vec<([u32; 3], Region)>,
}

impl<R: Real> Mesh<R> {
    fn push_box(&mut self, min: [f64; 3], max: [f64; 3], region: Region) {
        let base = self.vertices.len() as u32;
        let corner = |mask: usize| -> [R; 3] {
            [
                R::of(if mask & 1 == 0 { min[0] } else { max[0] }),
                R::of(if mask & 2 == 0 { min[1] } else { max[1] }),
                R::of(if mask & 4 == 0 { min[2] } else { max[2] }),
            ]
        };
        for mask in 0..8 {
            self.vertices.push(corner(mask));
        }
        // Each face as two triangles, wound so normals point outward.
        const FACES: [[u32; 4]; 6] = [
            [1, 3, 7, 5], // +x
            [0, 4, 6, 2], // -x
            [2, 6, 7, 3], // +y
            [0, 1, 5, 4], // -y
            [4, 5, 7, 6], // +z
            [0, 2, 3, 1], // -z
        ];
        for f in FACES {
            self.triangles
                .push(([base + f[0], base + f[1], base + f[2]], region));
            self.triangles
                .push(([base + f[0], base + f[2], base + f[3]], region));
        }
    }

    /// Pyramid with a rectangular base in the plane x = base_x (pointing +x
    /// towards `apex`). The base quad is included so the shape stays closed.
    fn push_pyramid_x(
        &mut self,
        base_x: f64,
        y: (f64, f64),
        z: (f64, f64),
        apex: [f64; 3],
        region: Region,
    ) {
        let base = self.vertices.len() as u32;
        let quad = [
            [base_x, y.0, z.0],
            [base_x, y.1, z.0],
            [base_x, y.1, z.1],
            [base_x, y.0, z.1],
        ];
        for v in quad {
            self.vertices.push([R::of(v[0]), R::of(v[1]), R::of(v[2])]);
        }
        self.vertices
            .push([R::of(apex[0]), R::of(apex[1]), R::of(apex[2])]);
        let a = base + 4;
        // Sides wound outward for an apex in +x.
        self.triangles.push(([base, base + 1, a], region));
        self.triangles.push(([base + 1, base + 2, a], region));
        self.triangles.push(([base + 2, base + 3, a], region));
        self.triangles.push(([base + 3, base, a], region));
        // Base facing -x.
        self.triangles.push(([base, base + 3, base + 2], region));
        self.triangles.push(([base, base + 2, base + 1], region));
    }

    pub fn bbox(&self) -> ([R; 3], [R; 3]) {
        let mut lo = [R::infinity(); 3];
        let mut hi = [R::neg_infinity(); 3];
        for v in &self.vertices {
            for a in 0..3 {
                lo[a] = lo[a].min(v[a]);
                hi[a] = hi[a].max(v[a]);
            }
        }
        (lo, hi)
    }

    /// Centers the bounding box at the origin and scales the largest
    /// dimension to exactly 1.
    fn normalize(&mut self) {
        let (lo, hi) = self.bbox();
        let half = R::of(0.5);
        let center = [
            (lo[0] + hi[0]) * half,
            (lo[1] + hi[1]) * half,
            (lo[2] + hi[2]) * half,
        ];
        let mut max_dim = R::zero();
        for a in 0..3 {
            max_dim = max_dim.max(hi[a] - lo[a]);
        }
        let scale = R::one() / max_dim;
        for v in &mut self.vertices {
            for a in 0..3 {
                v[a] = (v[a] - center[a]) * scale;
            }
        }
    }

    /// Vertex centroid of the triangles in `region`.
    pub fn region_centroid(&self, region: Region) -> [R; 3] {
        let mut acc = [R::zero(); 3];
        let mut n = 0usize;
        for (idx, r) in &self.triangles {
            if *r == region {
                for &i in idx {
                    let v = self.vertices[i as usize];
                    for a in 0..3 {
                        acc[a] = acc[a] + v[a];
                    }
                    n += 1;
                }
            }
        }
        let inv = R::one() / R::of(n.max(1) as f64);
        [acc[0] * inv, acc[1] * inv, acc[2] * inv]
    }

    /// Copy containing only the triangles of one region.
    pub fn region_only(&self, region: Region) -> Mesh<R> {
        Mesh {
            vertices: self.vertices.clone(),
            triangles: self
                .triangles
                .iter()
                .filter(|(_, r)| *r == region)
                .cloned()
                .collect(),
        }
    }
}

/// A colored toy object in its canonical frame.
#[derive(Debug, Clone)]
pub struct ToyObject<R: Real> {
    pub kind: ObjectKind,
    pub color: [u8; 3],
    pub mesh: Mesh<R>,
}

impl<R: Real> ToyObject<R> {
    /// Accent color for the front marker: channel inversion of the body
    /// color, which contrasts with every palette entry.
    pub fn accent(&self) -> [u8; 3] {
        [
            255 - self.color[0],
            255 - self.color[1],
            255 - self.color[2],
        ]
    }
}

/// Builds the canonical mesh for a kind. Deterministic per (kind, color).
pub fn make_object<R: Real>(kind: ObjectKind, color: [u8; 3]) -> ToyObject<R> {
    let mut mesh = Mesh {
        vertices: Vec::new(),
        triangles: Vec::new(),
    };
    match kind {
        ObjectKind::ArrowCar => {
            mesh.push_box([-0.50, -0.28, -0.18], [0.15, 0.28, 0.12], Region::Body);
            mesh.push_box([-0.42, -0.20, 0.12], [-0.05, 0.20, 0.38], Region::Body);
            // Nose pyramid; base inset into the body so faces never coincide.
            mesh.push_pyramid_x(
                0.14,
                (-0.28, 0.28),
                (-0.18, 0.12),
                [0.50, 0.0, -0.03],
                Region::Marker,
            );
        }
        ObjectKind::ChevronBird => {
            mesh.push_box([-0.35, -0.15, -0.10], [0.25, 0.15, 0.15], Region::Body);
            mesh.push_box([-0.50, -0.04, 0.05], [-0.35, 0.04, 0.40], Region::Body);
            mesh.push_box([-0.15, -0.50, 0.02], [0.10, 0.50, 0.08], Region::Body);
            mesh.push_pyramid_x(
                0.24,
                (-0.12, 0.12),
                (-0.05, 0.10),
                [0.50, 0.0, 0.02],
                Region::Marker,
            );
        }
        ObjectKind::WedgeChair => {
            mesh.push_box([-0.20, -0.30, -0.05], [0.30, 0.30, 0.05], Region::Body);
            mesh.push_box([-0.30, -0.30, 0.05], [-0.20, 0.30, 0.50], Region::Body);
            for (cx, cy) in [(-0.16, -0.26), (0.22, -0.26), (-0.16, 0.26), (0.22, 0.26)] {
                mesh.push_box(
                    [cx - 0.04, cy - 0.04, -0.50],
                    [cx + 0.04, cy + 0.04, -0.05],
                    Region::Body,
                );
            }
            mesh.push_box([0.30, -0.12, -0.04], [0.44, 0.12, 0.04], Region::Marker);
        }
        ObjectKind::BlockDog => {
            mesh.push_box([-0.40, -0.16, -0.10], [0.25, 0.16, 0.14], Region::Body);
            mesh.push_box([0.20, -0.13, 0.10], [0.45, 0.13, 0.36], Region::Body);
            mesh.push_box([-0.52, -0.03, 0.10], [-0.40, 0.03, 0.30], Region::Body);
            for (cx, cy) in [(-0.32, -0.11), (0.17, -0.11), (-0.32, 0.11), (0.17, 0.11)] {
                mesh.push_box(
                    [cx - 0.05, cy - 0.05, -0.38],
                    [cx + 0.05, cy + 0.05, -0.10],
                    Region::Body,
                );
            }
            mesh.push_box([0.45, -0.07, 0.12], [0.58, 0.07, 0.24], Region::Marker);
        }
    }
    mesh.normalize();
    ToyObject { kind, color, mesh }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn marker_centroid_is_in_positive_x_half() {
        for kind in ObjectKind::ALL {
            let obj = make_object::<f64>(kind, [200, 40, 40]);
            let c = obj.mesh.region_centroid(Region::Marker);
            assert!(c[0] > 0.0, "{kind:?} marker centroid x = {}", c[0]);
            // Front marker vertices stay strictly in the +x half.
            for (idx, r) in &obj.mesh.triangles {
                if *r == Region::Marker {
                    for &i in idx {
                        assert!(
                            obj.mesh.vertices[i as usize][0] > 0.0,
                            "{kind:?} marker vertex in -x half"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn construction_is_deterministic() {
        let a = make_object::<f64>(ObjectKind::ArrowCar, [1, 2, 3]);
        let b = make_object::<f64>(ObjectKind::ArrowCar, [1, 2, 3]);
        assert_eq!(a.mesh.vertices, b.mesh.vertices);
        assert_eq!(
            a.mesh.triangles.iter().map(|(t, _)| *t).collect::<Vec<_>>(),
            b.mesh.triangles.iter().map(|(t, _)| *t).collect::<Vec<_>>()
        );
    }

    #[test]
    fn bbox_max_dimension_is_one() {
        for kind in ObjectKind::ALL {
            let obj = make_object::<f64>(kind, [0, 0, 0]);
            let (lo, hi) = obj.mesh.bbox();
            let dims = [hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]];
            let max = dims.iter().cloned().fold(f64::MIN, f64::max);
            assert!((max - 1.0).abs() < 1e-6, "{kind:?} max dim {max}");
            // Bounding box is centered at the origin.
            for a in 0..3 {
                assert!((lo[a] + hi[a]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn meshes_are_left_right_symmetric() {
        // Every kind is built symmetric about y = 0 so silhouettes mirror.
        for kind in ObjectKind::ALL {
            let obj = make_object::<f64>(kind, [0, 0, 0]);
            for v in &obj.mesh.vertices {
                let mirrored = [v[0], -v[1], v[2]];
                let found = obj
                    .mesh
                    .vertices
                    .iter()
                    .any(|u| (u[0] - mirrored[0]).abs() < 1e-9
                        && (u[1] - mirrored[1]).abs() < 1e-9
                        && (u[2] - mirrored[2]).abs() < 1e-9);
                assert!(found, "{kind:?} vertex {v:?} has no mirror");
            }
        }
    }

    #[test]
    fn unknown_names_are_errors() {
        assert!(ObjectKind::from_name("teapot").is_err());
        assert!(color_by_name("mauve").is_err());
    }
}
