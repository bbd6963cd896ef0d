//! Incremental Bowyer–Watson triangulation with ghost triangles.
//!
//! A ghost triangle `[x, y, GHOST]` covers the outside of hull edge `x → y`
//! (the unbounded region on its left). Neighbor `n[i]` is the triangle across
//! the edge opposite `v[i]`.

use super::hilbert::hilbert_order;
use super::predicates::Kernel;
use crate::error::{Result, ScvtError};

pub(crate) const GHOST: u32 = u32::MAX;
pub(crate) const NONE: u32 = u32::MAX;

#[derive(Debug, Clone, Copy)]
struct Tri {
    v: [u32; 3],
    n: [u32; 3],
}

impl Tri {
    #[inline]
    fn is_ghost(&self) -> bool {
        self.v[2] == GHOST
    }
}

/// Finite triangles (counterclockwise, local vertex indices), their
/// neighbors (`NONE` across hull edges) and the hull edges `x → y`, each with
/// the outside on its left.
#[derive(Debug, Clone, Default)]
pub(crate) struct Mesh {
    pub triangles: Vec<[u32; 3]>,
    pub neighbors: Vec<[u32; 3]>,
    pub hull: Vec<[u32; 2]>,
}

struct Builder<'k, K: Kernel> {
    kernel: &'k K,
    tris: Vec<Tri>,
    dead: Vec<bool>,
    free: Vec<u32>,
    in_cavity: Vec<u32>,
    rejected: Vec<u32>,
    stamp: u32,
    last: u32,
    walk_start: usize,
}

/// Triangulates every point of the kernel.
pub(crate) fn triangulate<K: Kernel>(kernel: &K) -> Result<Mesh> {
    let n = kernel.len();
    if n < 3 {
        return Err(ScvtError::InsufficientPoints { count: n });
    }
    check_duplicates(kernel)?;
    let planes: Vec<[f64; 2]> = (0..n as u32).map(|i| kernel.plane(i)).collect();
    let mut order = hilbert_order(&planes, |i| kernel.priority(i as u32));

    let (a, mut b) = (order[0], order[1]);
    let third = (2..n)
        .find(|&j| kernel.orient(a, b, order[j]) != 0.0)
        .ok_or(ScvtError::CollinearInput)?;
    let mut c = order.remove(third);
    order.insert(2, c);
    if kernel.orient(a, b, c) < 0.0 {
        std::mem::swap(&mut b, &mut c);
    }

    let mut builder = Builder::new(kernel, n);
    builder.seed(a, b, c);
    for &p in &order[3..] {
        builder.insert(p)?;
    }
    Ok(builder.finish())
}

fn check_duplicates<K: Kernel>(kernel: &K) -> Result<()> {
    let n = kernel.len() as u32;
    let mut idx: Vec<u32> = (0..n).collect();
    let key = |i: u32| kernel.plane(i);
    idx.sort_unstable_by(|&i, &j| {
        let (p, q) = (key(i), key(j));
        p[0].total_cmp(&q[0]).then(p[1].total_cmp(&q[1]))
    });
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && key(idx[end]) == key(idx[start]) {
            end += 1;
        }
        for i in start..end {
            for j in (i + 1)..end {
                if kernel.same(idx[i], idx[j]) {
                    let (x, y) = (kernel.priority(idx[i]), kernel.priority(idx[j]));
                    return Err(ScvtError::DuplicatePoint { first: x.min(y), second: x.max(y) });
                }
            }
        }
        start = end;
    }
    Ok(())
}

impl<'k, K: Kernel> Builder<'k, K> {
    fn new(kernel: &'k K, n: usize) -> Self {
        let cap = 2 * n + 8;
        Builder {
            kernel,
            tris: Vec::with_capacity(cap),
            dead: Vec::with_capacity(cap),
            free: Vec::new(),
            in_cavity: Vec::with_capacity(cap),
            rejected: Vec::with_capacity(cap),
            stamp: 0,
            last: 0,
            walk_start: 0,
        }
    }

    fn push(&mut self, t: Tri) -> u32 {
        if let Some(slot) = self.free.pop() {
            self.tris[slot as usize] = t;
            self.dead[slot as usize] = false;
            slot
        } else {
            self.tris.push(t);
            self.dead.push(false);
            self.in_cavity.push(0);
            self.rejected.push(0);
            (self.tris.len() - 1) as u32
        }
    }

    fn seed(&mut self, a: u32, b: u32, c: u32) {
        // Slots: 0 finite, 1 = [c,b,G], 2 = [a,c,G], 3 = [b,a,G].
        self.push(Tri { v: [a, b, c], n: [1, 2, 3] });
        self.push(Tri { v: [c, b, GHOST], n: [3, 2, 0] });
        self.push(Tri { v: [a, c, GHOST], n: [1, 3, 0] });
        self.push(Tri { v: [b, a, GHOST], n: [2, 1, 0] });
        self.last = 0;
    }

    fn conflict(&self, t: u32, p: u32) -> bool {
        let tri = &self.tris[t as usize];
        let k = self.kernel;
        if tri.is_ghost() {
            if let Some(c) = k.in_ghost(tri.v[0], tri.v[1], p) {
                return c;
            }
            let o = k.orient(tri.v[0], tri.v[1], p);
            if o != 0.0 {
                return o > 0.0;
            }
            // On the hull line: the ghost goes with its solid neighbor.
            let s = &self.tris[tri.n[2] as usize];
            k.in_circle(s.v[0], s.v[1], s.v[2], p)
        } else {
            k.in_circle(tri.v[0], tri.v[1], tri.v[2], p)
        }
    }

    /// Walks toward `p` from the last created triangle.
    fn walk(&mut self, p: u32) -> Option<u32> {
        let mut t = self.last;
        if self.tris[t as usize].is_ghost() {
            t = self.tris[t as usize].n[2];
        }
        let limit = 4 * self.tris.len() + 16;
        for _ in 0..limit {
            let tri = self.tris[t as usize];
            if tri.is_ghost() {
                return Some(t);
            }
            self.walk_start = (self.walk_start + 1) % 3;
            let mut next = None;
            for e in 0..3 {
                let i = (e + self.walk_start) % 3;
                let (u, v) = (tri.v[(i + 1) % 3], tri.v[(i + 2) % 3]);
                if self.kernel.orient(u, v, p) < 0.0 {
                    next = Some(tri.n[i]);
                    break;
                }
            }
            match next {
                Some(nb) => t = nb,
                None => return Some(t),
            }
        }
        None
    }

    fn locate(&mut self, p: u32) -> Result<u32> {
        if let Some(t) = self.walk(p) {
            if self.conflict(t, p) {
                return Ok(t);
            }
        }
        (0..self.tris.len() as u32)
            .find(|&t| !self.dead[t as usize] && self.conflict(t, p))
            .ok_or(ScvtError::DegenerateTriangle)
    }

    fn insert(&mut self, p: u32) -> Result<()> {
        let seed = self.locate(p)?;
        self.stamp += 1;
        let stamp = self.stamp;
        let mut cavity = vec![seed];
        self.in_cavity[seed as usize] = stamp;
        // (u, v, outside): cavity edge u → v with the kept triangle beyond.
        let mut boundary: Vec<(u32, u32, u32)> = Vec::new();
        let mut i = 0;
        while i < cavity.len() {
            let c = self.tris[cavity[i] as usize];
            for j in 0..3 {
                let nb = c.n[j];
                let nbu = nb as usize;
                if self.in_cavity[nbu] == stamp {
                    continue;
                }
                if self.rejected[nbu] != stamp && self.conflict(nb, p) {
                    self.in_cavity[nbu] = stamp;
                    cavity.push(nb);
                } else {
                    self.rejected[nbu] = stamp;
                    boundary.push((c.v[(j + 1) % 3], c.v[(j + 2) % 3], nb));
                }
            }
            i += 1;
        }

        for &t in &cavity {
            self.dead[t as usize] = true;
            self.free.push(t);
        }
        // Lower slots first keeps the layout stable.
        self.free.sort_unstable_by(|a, b| b.cmp(a));

        let mut created: Vec<u32> = Vec::with_capacity(boundary.len());
        for &(u, v, out) in &boundary {
            created.push(self.push(Tri { v: [u, v, p], n: [NONE, NONE, out] }));
        }
        for (e, &(u, v, _)) in boundary.iter().enumerate() {
            let starts_at_v = boundary.iter().position(|&(x, _, _)| x == v).expect("closed cavity boundary");
            let ends_at_u = boundary.iter().position(|&(_, y, _)| y == u).expect("closed cavity boundary");
            let t = &mut self.tris[created[e] as usize];
            t.n[0] = created[starts_at_v];
            t.n[1] = created[ends_at_u];
        }
        for (e, &(u, v, out)) in boundary.iter().enumerate() {
            let slot = created[e];
            let o = &mut self.tris[out as usize];
            let j = (0..3).find(|&j| o.v[j] != u && o.v[j] != v).expect("outside triangle shares the edge");
            o.n[j] = slot;
            let t = &mut self.tris[slot as usize];
            if u == GHOST {
                t.v.rotate_left(1);
                t.n.rotate_left(1);
            } else if v == GHOST {
                t.v.rotate_left(2);
                t.n.rotate_left(2);
            } else {
                self.last = slot;
            }
        }
        Ok(())
    }

    fn finish(self) -> Mesh {
        let mut index = vec![NONE; self.tris.len()];
        let mut mesh = Mesh::default();
        for (t, tri) in self.tris.iter().enumerate() {
            if self.dead[t] {
                continue;
            }
            if tri.is_ghost() {
                mesh.hull.push([tri.v[0], tri.v[1]]);
            } else {
                index[t] = mesh.triangles.len() as u32;
                mesh.triangles.push(tri.v);
            }
        }
        for (t, tri) in self.tris.iter().enumerate() {
            if index[t] != NONE {
                mesh.neighbors.push(tri.n.map(|nb| index[nb as usize]));
            }
        }
        mesh
    }
}
