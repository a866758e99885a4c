//! Static 2D tree over `(x, z)` with predicate-filtered nearest search.
//!
//! Ties are broken by the caller-supplied record id, so the result is the
//! unique minimum of `(squared distance, id)` over eligible items.

const LEAF_SIZE: usize = 12;

#[derive(Debug, Clone, Copy)]
struct Item {
    x: f64,
    z: f64,
    slot: u32,
}

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: u32, end: u32 },
    Split { axis: u8, value: f64, left: u32, right: u32 },
}

#[derive(Debug, Clone)]
pub(crate) struct KdTree {
    items: Vec<Item>,
    nodes: Vec<Node>,
}

/// Running best match: squared distance, record id, slot.
pub(crate) type Best = Option<(f64, u64, u32)>;

#[inline]
fn coord(item: &Item, axis: u8) -> f64 {
    if axis == 0 {
        item.x
    } else {
        item.z
    }
}

#[inline]
pub(crate) fn better(d2: f64, id: u64, best: &Best) -> bool {
    match best {
        None => true,
        Some((bd, bid, _)) => d2 < *bd || (d2 == *bd && id < *bid),
    }
}

impl KdTree {
    /// Builds over `(x, z, slot)` triples. Deterministic for a given input order.
    pub(crate) fn build(points: impl IntoIterator<Item = (f64, f64, u32)>) -> Self {
        let mut items: Vec<Item> = points
            .into_iter()
            .map(|(x, z, slot)| Item { x, z, slot })
            .collect();
        let mut nodes = Vec::new();
        if !items.is_empty() {
            let n = items.len();
            build_rec(&mut items, 0, n, &mut nodes);
        }
        Self { items, nodes }
    }

    #[cfg(test)]
    pub(crate) fn len(&self) -> usize {
        self.items.len()
    }

    /// Updates `best` with the nearest eligible item. `eligible(slot)` returns
    /// the record id when the item passes the filter.
    pub(crate) fn nearest_filtered<F>(&self, qx: f64, qz: f64, best: &mut Best, eligible: &F)
    where
        F: Fn(u32) -> Option<u64>,
    {
        if !self.nodes.is_empty() {
            self.search(0, qx, qz, best, eligible);
        }
    }

    fn search<F>(&self, node: usize, qx: f64, qz: f64, best: &mut Best, eligible: &F)
    where
        F: Fn(u32) -> Option<u64>,
    {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for item in &self.items[start as usize..end as usize] {
                    let dx = item.x - qx;
                    let dz = item.z - qz;
                    let d2 = dx * dx + dz * dz;
                    if best.is_some_and(|(bd, _, _)| d2 > bd) {
                        continue;
                    }
                    if let Some(id) = eligible(item.slot) {
                        if better(d2, id, best) {
                            *best = Some((d2, id, item.slot));
                        }
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let q = if axis == 0 { qx } else { qz };
                let diff = q - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near as usize, qx, qz, best, eligible);
                // Equal distances must still be visited for the id tie-break.
                if best.is_none_or(|(bd, _, _)| diff * diff <= bd) {
                    self.search(far as usize, qx, qz, best, eligible);
                }
            }
        }
    }
}

fn build_rec(items: &mut [Item], start: usize, end: usize, nodes: &mut Vec<Node>) -> u32 {
    let id = nodes.len() as u32;
    if end - start <= LEAF_SIZE {
        nodes.push(Node::Leaf {
            start: start as u32,
            end: end as u32,
        });
        return id;
    }
    let slice = &mut items[start..end];
    let (mut lo_x, mut hi_x, mut lo_z, mut hi_z) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for it in slice.iter() {
        lo_x = lo_x.min(it.x);
        hi_x = hi_x.max(it.x);
        lo_z = lo_z.min(it.z);
        hi_z = hi_z.max(it.z);
    }
    let axis = if hi_x - lo_x >= hi_z - lo_z { 0u8 } else { 1u8 };
    let mid = slice.len() / 2;
    slice.select_nth_unstable_by(mid, |a, b| {
        coord(a, axis)
            .total_cmp(&coord(b, axis))
            .then(a.slot.cmp(&b.slot))
    });
    let value = coord(&slice[mid], axis);
    // Placeholder, patched once both children exist.
    nodes.push(Node::Leaf { start: 0, end: 0 });
    let left = build_rec(items, start, start + mid, nodes);
    let right = build_rec(items, start + mid, end, nodes);
    nodes[id as usize] = Node::Split {
        axis,
        value,
        left,
        right,
    };
    id
}
