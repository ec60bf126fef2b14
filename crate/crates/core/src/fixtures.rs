//! Synthetic furniture meshes built from boxes. They stand in for scanned
//! models in tests, benchmarks and demos, and can be referenced from a job
//! request as `fixture:<name>`.

use crate::geometry::{Mesh, MeshBuilder};

pub const FIXTURE_PREFIX: &str = "fixture:";

/// Names of every fixture, in a stable order.
pub const NAMES: [&str; 20] = [
    "flat_desk",
    "desk_with_shelf",
    "coffee_table",
    "side_table",
    "console_table",
    "dining_table",
    "bookcase",
    "tv_stand",
    "l_desk",
    "u_desk",
    "nightstand",
    "dresser",
    "kitchen_island",
    "octagon_table",
    "two_tier_side_table",
    "floating_shelves",
    "bench",
    "workbench_with_riser",
    "corner_desk",
    "rugged_lip_table",
];

/// Tabletop slab of thickness 3 cm whose top is at `h`, on four 5 cm legs.
fn table(b: &mut MeshBuilder, x0: f64, y0: f64, w: f64, d: f64, h: f64) {
    b.add_box([x0, y0, h - 3.0], [x0 + w, y0 + d, h]);
    for (x, y) in [(x0, y0), (x0 + w - 5.0, y0), (x0, y0 + d - 5.0), (x0 + w - 5.0, y0 + d - 5.0)] {
        b.add_box([x, y, 0.0], [x + 5.0, y + 5.0, h - 3.0]);
    }
}

fn built(b: &MeshBuilder) -> Mesh {
    b.build().expect("fixture mesh is valid")
}

fn simple_table(w: f64, d: f64, h: f64) -> Mesh {
    let mut b = MeshBuilder::new();
    table(&mut b, 0.0, 0.0, w, d, h);
    built(&b)
}

pub fn flat_desk() -> Mesh {
    simple_table(120.0, 60.0, 75.0)
}

/// 120×60 desk at 75 cm with an 80×20 shelf at 110 cm over its back edge.
/// The shelf posts stand behind the desk.
pub fn desk_with_shelf() -> Mesh {
    let mut b = MeshBuilder::new();
    table(&mut b, 0.0, 0.0, 120.0, 60.0, 75.0);
    b.add_box([20.0, 45.0, 107.0], [100.0, 65.0, 110.0]);
    b.add_box([20.0, 60.0, 0.0], [25.0, 65.0, 107.0]);
    b.add_box([95.0, 60.0, 0.0], [100.0, 65.0, 107.0]);
    built(&b)
}

/// 100×60 tabletop at 75 cm whose back 4 cm form a lip raised by
/// `relief_cm`, built from three abutting segments.
pub fn rugged_lip(relief_cm: f64) -> Mesh {
    let mut b = MeshBuilder::new();
    b.add_top_quad([0.0, 0.0], [100.0, 56.0], 75.0);
    for (x0, x1) in [(0.0, 34.0), (34.0, 67.0), (67.0, 100.0)] {
        b.add_top_quad([x0, 56.0], [x1, 60.0], 75.0 + relief_cm);
    }
    built(&b)
}

fn bookcase() -> Mesh {
    let mut b = MeshBuilder::new();
    b.add_box([0.0, 0.0, 0.0], [2.0, 30.0, 158.0]);
    b.add_box([78.0, 0.0, 0.0], [80.0, 30.0, 158.0]);
    for z in [38.0, 78.0, 118.0] {
        b.add_box([2.0, 0.0, z], [78.0, 30.0, z + 2.0]);
    }
    b.add_box([0.0, 0.0, 158.0], [80.0, 30.0, 160.0]);
    built(&b)
}

fn tv_stand() -> Mesh {
    let mut b = MeshBuilder::new();
    b.add_box([0.0, 0.0, 47.0], [150.0, 40.0, 50.0]);
    b.add_box([0.0, 0.0, 0.0], [2.0, 40.0, 47.0]);
    b.add_box([148.0, 0.0, 0.0], [150.0, 40.0, 47.0]);
    b.add_box([2.0, 2.0, 13.0], [148.0, 38.0, 15.0]);
    built(&b)
}

fn l_desk() -> Mesh {
    let mut b = MeshBuilder::new();
    b.add_box([0.0, 0.0, 72.0], [150.0, 60.0, 75.0]);
    b.add_box([0.0, 60.0, 72.0], [60.0, 150.0, 75.0]);
    for (x, y) in [(0.0, 0.0), (145.0, 0.0), (145.0, 55.0), (0.0, 145.0), (55.0, 145.0)] {
        b.add_box([x, y, 0.0], [x + 5.0, y + 5.0, 72.0]);
    }
    built(&b)
}

fn u_desk() -> Mesh {
    let mut b = MeshBuilder::new();
    b.add_box([0.0, 0.0, 72.0], [40.0, 100.0, 75.0]);
    b.add_box([40.0, 40.0, 72.0], [120.0, 100.0, 75.0]);
    b.add_box([120.0, 0.0, 72.0], [160.0, 100.0, 75.0]);
    for (x, y) in [(0.0, 0.0), (35.0, 0.0), (120.0, 0.0), (155.0, 0.0), (0.0, 95.0), (155.0, 95.0)] {
        b.add_box([x, y, 0.0], [x + 5.0, y + 5.0, 72.0]);
    }
    built(&b)
}

fn octagon_table() -> Mesh {
    let r = 50.0;
    let mut vertices = vec![[0.0, 0.0, 74.0]];
    for k in 0..8 {
        let a = std::f64::consts::PI / 8.0 + f64::from(k) * std::f64::consts::PI / 4.0;
        vertices.push([r * a.cos(), r * a.sin(), 74.0]);
    }
    let mut triangles: Vec<[usize; 3]> = (0..8).map(|k| [0, 1 + k, 1 + (k + 1) % 8]).collect();
    // Pedestal.
    let base = vertices.len();
    let mut b = MeshBuilder::new();
    b.add_box([-6.0, -6.0, 0.0], [6.0, 6.0, 72.0]);
    let ped = b.build().expect("pedestal");
    vertices.extend_from_slice(ped.vertices());
    triangles.extend(ped.triangles().iter().map(|t| [t[0] + base, t[1] + base, t[2] + base]));
    Mesh::new(vertices, triangles).expect("octagon mesh is valid")
}

fn two_tier_side_table() -> Mesh {
    let mut b = MeshBuilder::new();
    table(&mut b, 0.0, 0.0, 50.0, 50.0, 60.0);
    b.add_box([5.0, 5.0, 28.0], [45.0, 45.0, 30.0]);
    built(&b)
}

fn floating_shelves() -> Mesh {
    let mut b = MeshBuilder::new();
    b.add_box([0.0, 0.0, 98.0], [90.0, 25.0, 100.0]);
    b.add_box([30.0, 0.0, 128.0], [120.0, 25.0, 130.0]);
    b.add_box([0.0, 0.0, 158.0], [90.0, 25.0, 160.0]);
    built(&b)
}

/// Workbench whose back strip carries a 30 cm riser; the bench slab only
/// covers the part in front of the riser.
fn workbench_with_riser() -> Mesh {
    let mut b = MeshBuilder::new();
    b.add_box([0.0, 0.0, 87.0], [160.0, 45.0, 90.0]);
    b.add_box([0.0, 45.0, 87.0], [160.0, 70.0, 120.0]);
    for (x, y) in [(0.0, 0.0), (155.0, 0.0), (0.0, 65.0), (155.0, 65.0)] {
        b.add_box([x, y, 0.0], [x + 5.0, y + 5.0, 87.0]);
    }
    built(&b)
}

fn corner_desk() -> Mesh {
    let pts = [[0.0, 0.0], [120.0, 0.0], [120.0, 40.0], [40.0, 120.0], [0.0, 120.0]];
    let mut vertices: Vec<[f64; 3]> = pts.iter().map(|p| [p[0], p[1], 75.0]).collect();
    let mut triangles: Vec<[usize; 3]> = (1..pts.len() - 1).map(|k| [0, k, k + 1]).collect();
    let base = vertices.len();
    let mut b = MeshBuilder::new();
    for (x, y) in [(0.0, 0.0), (115.0, 0.0), (0.0, 115.0)] {
        b.add_box([x, y, 0.0], [x + 5.0, y + 5.0, 74.0]);
    }
    let legs = b.build().expect("legs");
    vertices.extend_from_slice(legs.vertices());
    triangles.extend(legs.triangles().iter().map(|t| [t[0] + base, t[1] + base, t[2] + base]));
    Mesh::new(vertices, triangles).expect("corner desk mesh is valid")
}

/// Looks a fixture up by name.
pub fn by_name(name: &str) -> Option<Mesh> {
    let m = match name {
        "flat_desk" => flat_desk(),
        "desk_with_shelf" => desk_with_shelf(),
        "coffee_table" => simple_table(100.0, 50.0, 45.0),
        "side_table" => simple_table(45.0, 45.0, 55.0),
        "console_table" => simple_table(140.0, 35.0, 80.0),
        "dining_table" => simple_table(180.0, 90.0, 75.0),
        "bookcase" => bookcase(),
        "tv_stand" => tv_stand(),
        "l_desk" => l_desk(),
        "u_desk" => u_desk(),
        "nightstand" => simple_table(45.0, 40.0, 60.0),
        "dresser" => simple_table(120.0, 50.0, 90.0),
        "kitchen_island" => simple_table(200.0, 100.0, 90.0),
        "octagon_table" => octagon_table(),
        "two_tier_side_table" => two_tier_side_table(),
        "floating_shelves" => floating_shelves(),
        "bench" => simple_table(150.0, 40.0, 45.0),
        "workbench_with_riser" => workbench_with_riser(),
        "corner_desk" => corner_desk(),
        "rugged_lip_table" => rugged_lip(1.5),
        _ => return None,
    };
    Some(m)
}

/// Every fixture with its name.
pub fn all() -> Vec<(&'static str, Mesh)> {
    NAMES.iter().map(|&n| (n, by_name(n).expect("listed fixture exists"))).collect()
}
