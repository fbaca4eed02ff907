use super::mesh::Aabb;
use super::{closest_point_on_triangle, ray_triangle, Ray, Vec3};

const LEAF_SIZE: usize = 4;

#[derive(Clone, Debug)]
struct Node {
    bbox: Aabb,
    /// Leaf: first index into `order`.
    start: u32,
    /// Leaf: number of triangles. Interior: 0.
    count: u32,
    /// Interior only; the left child always directly follows its parent.
    right: u32,
}

/// Median-split bounding-volume hierarchy over mesh triangles.
#[derive(Clone, Debug)]
pub struct Bvh {
    nodes: Vec<Node>,
    order: Vec<u32>,
}

/// Result of a closest-point query.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Nearest {
    pub triangle: usize,
    pub point: Vec3,
    pub distance: f64,
}

impl Bvh {
    pub fn build(vertices: &[Vec3], triangles: &[[u32; 3]]) -> Bvh {
        let boxes: Vec<Aabb> = triangles
            .iter()
            .map(|t| Aabb::from_points(t.iter().map(|&i| &vertices[i as usize])))
            .collect();
        let centroids: Vec<Vec3> = boxes.iter().map(Aabb::center).collect();
        let mut order: Vec<u32> = (0..triangles.len() as u32).collect();
        let mut nodes = Vec::with_capacity(2 * triangles.len() / LEAF_SIZE + 1);
        if !triangles.is_empty() {
            build_node(&mut nodes, &mut order, 0, &boxes, &centroids);
        }
        Bvh { nodes, order }
    }

    fn leaf(&self, node: &Node) -> &[u32] {
        &self.order[node.start as usize..(node.start + node.count) as usize]
    }

    /// Calls `visit(triangle, t)` for every intersection along the ray.
    pub fn visit_hits(
        &self,
        vertices: &[Vec3],
        triangles: &[[u32; 3]],
        ray: &Ray,
        visit: &mut dyn FnMut(usize, f64),
    ) {
        if self.nodes.is_empty() {
            return;
        }
        let inv = ray.direction.map(|d| 1.0 / d);
        let mut stack = vec![0u32];
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni as usize];
            if node
                .bbox
                .ray_interval(&ray.origin, &inv, f64::INFINITY)
                .is_none()
            {
                continue;
            }
            if node.count > 0 {
                for &ti in self.leaf(node) {
                    let [a, b, c] = triangles[ti as usize].map(|i| vertices[i as usize]);
                    if let Some(t) = ray_triangle(&ray.origin, &ray.direction, &a, &b, &c) {
                        visit(ti as usize, t);
                    }
                }
            } else {
                stack.push(ni + 1);
                stack.push(node.right);
            }
        }
    }

    pub fn first_hit(
        &self,
        vertices: &[Vec3],
        triangles: &[[u32; 3]],
        ray: &Ray,
    ) -> Option<(usize, f64)> {
        if self.nodes.is_empty() {
            return None;
        }
        let inv = ray.direction.map(|d| 1.0 / d);
        let mut best: Option<(usize, f64)> = None;
        let mut stack: Vec<(u32, f64)> = vec![(0, 0.0)];
        while let Some((ni, t_enter)) = stack.pop() {
            let limit = best.map_or(f64::INFINITY, |b| b.1);
            if t_enter > limit {
                continue;
            }
            let node = &self.nodes[ni as usize];
            if node.count > 0 {
                for &ti in self.leaf(node) {
                    let [a, b, c] = triangles[ti as usize].map(|i| vertices[i as usize]);
                    if let Some(t) = ray_triangle(&ray.origin, &ray.direction, &a, &b, &c) {
                        // ties resolve to the lowest triangle index
                        let better = match best {
                            None => true,
                            Some((bt, bd)) => t < bd || (t == bd && (ti as usize) < bt),
                        };
                        if better {
                            best = Some((ti as usize, t));
                        }
                    }
                }
                continue;
            }
            let limit = best.map_or(f64::INFINITY, |b| b.1);
            let l = ni + 1;
            let r = node.right;
            let hl = self.nodes[l as usize]
                .bbox
                .ray_interval(&ray.origin, &inv, limit);
            let hr = self.nodes[r as usize]
                .bbox
                .ray_interval(&ray.origin, &inv, limit);
            match (hl, hr) {
                (Some(a), Some(b)) => {
                    // visit the nearer child first
                    if a.0 <= b.0 {
                        stack.push((r, b.0));
                        stack.push((l, a.0));
                    } else {
                        stack.push((l, a.0));
                        stack.push((r, b.0));
                    }
                }
                (Some(a), None) => stack.push((l, a.0)),
                (None, Some(b)) => stack.push((r, b.0)),
                (None, None) => {}
            }
        }
        best
    }

    pub fn farthest_hit(
        &self,
        vertices: &[Vec3],
        triangles: &[[u32; 3]],
        ray: &Ray,
    ) -> Option<(usize, f64)> {
        if self.nodes.is_empty() {
            return None;
        }
        let inv = ray.direction.map(|d| 1.0 / d);
        let mut best: Option<(usize, f64)> = None;
        let mut stack = vec![0u32];
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni as usize];
            let Some((_, t_exit)) = node.bbox.ray_interval(&ray.origin, &inv, f64::INFINITY) else {
                continue;
            };
            if best.is_some_and(|b| t_exit < b.1) {
                continue;
            }
            if node.count > 0 {
                for &ti in self.leaf(node) {
                    let [a, b, c] = triangles[ti as usize].map(|i| vertices[i as usize]);
                    if let Some(t) = ray_triangle(&ray.origin, &ray.direction, &a, &b, &c) {
                        let better = match best {
                            None => true,
                            Some((bt, bd)) => t > bd || (t == bd && (ti as usize) < bt),
                        };
                        if better {
                            best = Some((ti as usize, t));
                        }
                    }
                }
            } else {
                stack.push(ni + 1);
                stack.push(node.right);
            }
        }
        best
    }

    /// Closest point on the surface to `p` within `max_dist`.
    pub fn nearest(
        &self,
        vertices: &[Vec3],
        triangles: &[[u32; 3]],
        p: &Vec3,
        max_dist: f64,
    ) -> Option<Nearest> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best_sq = if max_dist.is_finite() {
            max_dist * max_dist
        } else {
            f64::INFINITY
        };
        let mut best: Option<(usize, Vec3)> = None;
        let mut stack: Vec<(u32, f64)> = vec![(0, self.nodes[0].bbox.distance_sq(p))];
        while let Some((ni, d_sq)) = stack.pop() {
            if d_sq > best_sq {
                continue;
            }
            let node = &self.nodes[ni as usize];
            if node.count > 0 {
                for &ti in self.leaf(node) {
                    let [a, b, c] = triangles[ti as usize].map(|i| vertices[i as usize]);
                    let q = closest_point_on_triangle(p, &a, &b, &c);
                    let dq = (q - p).norm_squared();
                    let better = dq < best_sq
                        || (dq == best_sq && best.is_some_and(|(bt, _)| (ti as usize) < bt));
                    if better {
                        best_sq = dq;
                        best = Some((ti as usize, q));
                    }
                }
                continue;
            }
            let l = ni + 1;
            let r = node.right;
            let dl = self.nodes[l as usize].bbox.distance_sq(p);
            let dr = self.nodes[r as usize].bbox.distance_sq(p);
            if dl <= dr {
                stack.push((r, dr));
                stack.push((l, dl));
            } else {
                stack.push((l, dl));
                stack.push((r, dr));
            }
        }
        best.map(|(triangle, point)| Nearest {
            triangle,
            point,
            distance: best_sq.sqrt(),
        })
    }
}

fn build_node(
    nodes: &mut Vec<Node>,
    order: &mut [u32],
    offset: usize,
    boxes: &[Aabb],
    centroids: &[Vec3],
) -> u32 {
    let idx = nodes.len() as u32;
    let bbox = order
        .iter()
        .fold(Aabb::empty(), |acc, &i| acc.merge(&boxes[i as usize]));
    nodes.push(Node {
        bbox,
        start: offset as u32,
        count: order.len() as u32,
        right: 0,
    });
    if order.len() <= LEAF_SIZE {
        return idx;
    }
    let cb = Aabb::from_points(order.iter().map(|&i| &centroids[i as usize]));
    let ext = cb.max - cb.min;
    let axis = if ext.x >= ext.y && ext.x >= ext.z {
        0
    } else if ext.y >= ext.z {
        1
    } else {
        2
    };
    if ext[axis] <= 0.0 {
        return idx;
    }
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        centroids[a as usize][axis]
            .total_cmp(&centroids[b as usize][axis])
            .then(a.cmp(&b))
    });
    let (lo, hi) = order.split_at_mut(mid);
    nodes[idx as usize].count = 0;
    build_node(nodes, lo, offset, boxes, centroids);
    let right = build_node(nodes, hi, offset + mid, boxes, centroids);
    nodes[idx as usize].right = right;
    idx
}
