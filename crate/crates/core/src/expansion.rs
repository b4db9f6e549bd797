//! Decomposition of a capacitated graph into unit-capacity parallel edges.
//!
//! Capacities are first multiplied by the least common multiple of their
//! denominators (the oblivious ratio does not change under a global scaling
//! of capacities), then every edge of capacity `c` becomes `c` parallel unit
//! edges. Loop capacities are scaled the same way.

use num_integer::Integer;
use num_traits::{ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::graph::{Capacity, Graph};

#[derive(Debug, Clone)]
pub struct Expansion {
    pub graph: Graph,
    /// Edge index in the expanded graph -> edge index in the original graph.
    pub projection: Vec<usize>,
    /// Factor every capacity was multiplied by.
    pub scale: i64,
}

/// Refuses expansions larger than this many unit edges.
pub const MAX_UNIT_EDGES: i64 = 1_000_000;

pub fn unit_capacity_expansion(g: &Graph) -> Result<Expansion> {
    let overflow = |u: usize, v: usize| Error::InvalidCapacity {
        u,
        v,
        reason: "capacity cannot be scaled to an integer within i64".into(),
    };
    let mut scale: i64 = 1;
    for e in g.edges() {
        scale = scale.lcm(e.capacity.denom());
    }
    for x in 0..g.n() {
        scale = scale.lcm(g.self_loop(x).denom());
    }
    if scale <= 0 {
        return Err(overflow(0, 0));
    }
    let factor = Capacity::from_integer(scale);
    let one = Capacity::from_integer(1);

    let mut triples = Vec::new();
    let mut projection = Vec::new();
    for (idx, e) in g.edges().iter().enumerate() {
        let scaled = e.capacity.numer().checked_mul(scale / e.capacity.denom());
        let copies = scaled.ok_or_else(|| overflow(e.u, e.v))?;
        if copies > MAX_UNIT_EDGES || (triples.len() as i64) + copies > MAX_UNIT_EDGES {
            return Err(Error::InvalidParameter(format!(
                "expansion exceeds {MAX_UNIT_EDGES} unit edges"
            )));
        }
        for _ in 0..copies {
            triples.push((e.u, e.v, one));
            projection.push(idx);
        }
    }
    let loops = (0..g.n())
        .map(|x| {
            let c = g.self_loop(x);
            if c.is_zero() {
                Ok(Capacity::zero())
            } else {
                (c * factor)
                    .to_integer()
                    .to_i64()
                    .map(Capacity::from_integer)
                    .ok_or_else(|| overflow(x, x))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let graph = Graph::new(g.n(), &triples)?.with_self_loops(loops)?;
    Ok(Expansion {
        graph,
        projection,
        scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::cycle;
    use crate::graph::build_graph;

    #[test]
    fn capacity_three_becomes_three_parallel_edges() {
        let g = build_graph(&[(0, 1, Capacity::from_integer(3))]).unwrap();
        let ex = unit_capacity_expansion(&g).unwrap();
        assert_eq!(ex.graph.edges().len(), 3);
        assert_eq!(ex.projection, vec![0, 0, 0]);
        assert_eq!(ex.scale, 1);
        assert_eq!(ex.graph.link_count(), 1);
        assert_eq!(ex.graph.degrees(), g.degrees());
    }

    #[test]
    fn unit_graph_is_fixed_point() {
        let g = cycle(5).unwrap();
        let ex = unit_capacity_expansion(&g).unwrap();
        assert_eq!(ex.graph.edges(), g.edges());
        assert_eq!(ex.projection, (0..5).collect::<Vec<_>>());
    }

    #[test]
    fn half_capacity_is_scaled() {
        let g = build_graph(&[(0, 1, Capacity::new(1, 2))]).unwrap();
        let ex = unit_capacity_expansion(&g).unwrap();
        assert_eq!(ex.scale, 2);
        assert_eq!(ex.graph.edges().len(), 1);
        assert_eq!(ex.graph.edges()[0].capacity, Capacity::from_integer(1));
    }

    #[test]
    fn mixed_denominators_and_loops() {
        let g = build_graph(&[(0, 1, Capacity::new(1, 2)), (1, 2, Capacity::new(2, 3))])
            .unwrap()
            .lazy()
            .unwrap();
        let ex = unit_capacity_expansion(&g).unwrap();
        assert_eq!(ex.scale, 6);
        // 1/2 -> 3 copies, 2/3 -> 4 copies.
        assert_eq!(ex.graph.edges().len(), 7);
        for x in 0..3 {
            assert_eq!(ex.graph.degree(x), 6.0 * g.degree(x));
            assert_eq!(ex.graph.self_loop_f64(x), 6.0 * g.self_loop_f64(x));
        }
    }
}
