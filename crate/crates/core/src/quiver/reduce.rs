use std::collections::BTreeMap;

use nalgebra::DMatrix;

use super::{Arrow, BipartiteQuiver, DimVector, QuiverDatum, Representation, Weight};
use crate::error::{Error, Result};

pub const DEFAULT_PATH_CAP: usize = 1_000_000;

/// An arbitrary (not necessarily bipartite) quiver.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AcyclicQuiver {
    pub vertices: Vec<String>,
    pub arrows: Vec<Arrow>,
}

#[derive(Clone, Copy, Debug)]
pub struct ReduceOptions {
    pub path_cap: usize,
}

impl Default for ReduceOptions {
    fn default() -> Self {
        Self {
            path_cap: DEFAULT_PATH_CAP,
        }
    }
}

/// Collapse an acyclic quiver onto the bipartite quiver `Q^±` whose
/// sources are the positive-weight vertices and whose sinks are the
/// negative-weight vertices. Every oriented path `p` from a source to a
/// sink becomes one arrow carrying the product of the matrices along `p`.
/// Single-arrow paths keep their original id; longer ones are named by
/// joining the arrow ids with `.`.
pub fn bipartite_reduce(
    quiver: &AcyclicQuiver,
    dims: &DimVector,
    weight: &Weight,
    rep: &Representation,
    opts: ReduceOptions,
) -> Result<QuiverDatum> {
    let index: BTreeMap<&str, usize> = quiver
        .vertices
        .iter()
        .enumerate()
        .map(|(k, v)| (v.as_str(), k))
        .collect();
    for k in weight.0.keys() {
        if !index.contains_key(k.as_str()) {
            return Err(Error::WeightSign(format!("weight given for unknown vertex {k}")));
        }
    }
    let mut outgoing: Vec<Vec<usize>> = vec![Vec::new(); quiver.vertices.len()];
    for (k, a) in quiver.arrows.iter().enumerate() {
        let t = *index
            .get(a.tail.as_str())
            .ok_or_else(|| Error::Shape(format!("arrow {} has unknown tail {}", a.id, a.tail)))?;
        if !index.contains_key(a.head.as_str()) {
            return Err(Error::Shape(format!("arrow {} has unknown head {}", a.id, a.head)));
        }
        outgoing[t].push(k);
    }
    check_acyclic(quiver, &index, &outgoing)?;

    let sources: Vec<String> = quiver
        .vertices
        .iter()
        .filter(|v| weight.get(v) > 0)
        .cloned()
        .collect();
    let sinks: Vec<String> = quiver
        .vertices
        .iter()
        .filter(|v| weight.get(v) < 0)
        .cloned()
        .collect();
    if sources.is_empty() || sinks.is_empty() {
        return Err(Error::WeightSign(
            "weight must be positive on at least one vertex and negative on at least one".into(),
        ));
    }

    let mut paths: Vec<Vec<usize>> = Vec::new();
    for v in &sources {
        let mut stack: Vec<(usize, Vec<usize>)> = vec![(index[v.as_str()], Vec::new())];
        while let Some((at, path)) = stack.pop() {
            for &k in outgoing[at].iter().rev() {
                let head = index[quiver.arrows[k].head.as_str()];
                let mut next = path.clone();
                next.push(k);
                if weight.get(&quiver.arrows[k].head) < 0 {
                    paths.push(next.clone());
                    if paths.len() > opts.path_cap {
                        return Err(Error::PathCap(opts.path_cap));
                    }
                }
                stack.push((head, next));
            }
        }
    }
    paths.sort();

    let mut arrows = Vec::with_capacity(paths.len());
    let mut out_rep = Representation::default();
    for p in &paths {
        let first = &quiver.arrows[p[0]];
        let last = &quiver.arrows[*p.last().expect("nonempty path")];
        let id = p
            .iter()
            .map(|&k| quiver.arrows[k].id.as_str())
            .collect::<Vec<_>>()
            .join(".");
        let mut m: DMatrix<f64> = DMatrix::identity(dims.get(&first.tail), dims.get(&first.tail));
        for &k in p {
            let a = &quiver.arrows[k];
            let v = rep
                .get(&a.id)
                .ok_or_else(|| Error::Shape(format!("no matrix for arrow {}", a.id)))?;
            if v.ncols() != m.nrows() {
                return Err(Error::Shape(format!("matrix for arrow {} does not compose along path {id}", a.id)));
            }
            m = v * m;
        }
        out_rep.insert(&id, m);
        arrows.push(Arrow::new(&id, &first.tail, &last.head));
    }

    let keep = |v: &String| weight.get(v) != 0;
    Ok(QuiverDatum {
        quiver: BipartiteQuiver {
            sources,
            sinks,
            arrows,
        },
        dims: DimVector(dims.0.iter().filter(|(k, _)| keep(k)).map(|(k, v)| (k.clone(), *v)).collect()),
        weight: Weight(weight.0.iter().filter(|(k, _)| keep(k)).map(|(k, v)| (k.clone(), *v)).collect()),
        rep: out_rep,
    })
}

fn check_acyclic(quiver: &AcyclicQuiver, index: &BTreeMap<&str, usize>, outgoing: &[Vec<usize>]) -> Result<()> {
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut state = vec![0u8; quiver.vertices.len()];
    for start in 0..quiver.vertices.len() {
        if state[start] != 0 {
            continue;
        }
        let mut stack = vec![(start, 0usize)];
        state[start] = 1;
        while let Some(&mut (v, ref mut next)) = stack.last_mut() {
            if *next < outgoing[v].len() {
                let k = outgoing[v][*next];
                *next += 1;
                let h = index[quiver.arrows[k].head.as_str()];
                match state[h] {
                    0 => {
                        state[h] = 1;
                        stack.push((h, 0));
                    }
                    1 => return Err(Error::Cycle(quiver.vertices[h].clone())),
                    _ => {}
                }
            } else {
                state[v] = 2;
                stack.pop();
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quiver::validate_datum;

    fn mat(x: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, x)
    }

    fn quiver(vertices: &[&str], arrows: &[(&str, &str, &str)]) -> AcyclicQuiver {
        AcyclicQuiver {
            vertices: vertices.iter().map(|s| s.to_string()).collect(),
            arrows: arrows.iter().map(|(i, t, h)| Arrow::new(i, t, h)).collect(),
        }
    }

    #[test]
    fn path_composes() {
        let q = quiver(&["v", "u", "w"], &[("a1", "v", "u"), ("a2", "u", "w")]);
        let dims = DimVector::from_pairs(&[("v", 1), ("u", 1), ("w", 1)]);
        let weight = Weight::from_pairs(&[("v", 1), ("u", 0), ("w", -1)]);
        let mut rep = Representation::default();
        rep.insert("a1", mat(2.0));
        rep.insert("a2", mat(3.0));
        let d = bipartite_reduce(&q, &dims, &weight, &rep, ReduceOptions::default()).unwrap();
        assert_eq!(d.quiver.arrows, vec![Arrow::new("a1.a2", "v", "w")]);
        assert_eq!(d.rep.get("a1.a2").unwrap()[(0, 0)], 6.0);
        assert!(validate_datum(&d).is_valid());
    }

    #[test]
    fn two_middle_vertices_give_parallel_arrows() {
        let q = quiver(
            &["v", "u1", "u2", "w"],
            &[("a", "v", "u1"), ("b", "v", "u2"), ("c", "u1", "w"), ("d", "u2", "w")],
        );
        let dims = DimVector::from_pairs(&[("v", 1), ("u1", 1), ("u2", 1), ("w", 1)]);
        let weight = Weight::from_pairs(&[("v", 1), ("w", -1)]);
        let mut rep = Representation::default();
        for (k, x) in [("a", 1.0), ("b", 2.0), ("c", 3.0), ("d", 4.0)] {
            rep.insert(k, mat(x));
        }
        let d = bipartite_reduce(&q, &dims, &weight, &rep, ReduceOptions::default()).unwrap();
        assert_eq!(d.quiver.arrows.len(), 2);
        assert_eq!(d.rep.get("a.c").unwrap()[(0, 0)], 3.0);
        assert_eq!(d.rep.get("b.d").unwrap()[(0, 0)], 8.0);
        assert!(d.quiver.arrows.iter().all(|a| a.tail == "v" && a.head == "w"));
    }

    #[test]
    fn bipartite_input_is_copied() {
        let q = quiver(&["v1", "v2", "w"], &[("b", "v2", "w"), ("a", "v1", "w"), ("c", "v1", "w")]);
        let dims = DimVector::from_pairs(&[("v1", 1), ("v2", 1), ("w", 2)]);
        let weight = Weight::from_pairs(&[("v1", 1), ("v2", 1), ("w", -1)]);
        let mut rep = Representation::default();
        rep.insert("a", DMatrix::from_row_slice(2, 1, &[1.0, 2.0]));
        rep.insert("b", DMatrix::from_row_slice(2, 1, &[3.0, 4.0]));
        rep.insert("c", DMatrix::from_row_slice(2, 1, &[5.0, 6.0]));
        let d = bipartite_reduce(&q, &dims, &weight, &rep, ReduceOptions::default()).unwrap();
        assert_eq!(d.rep, rep);
        let ids: Vec<&str> = d.quiver.arrows.iter().map(|a| a.id.as_str()).collect();
        assert_eq!(ids, ["b", "a", "c"]);
        assert_eq!(d.quiver.sources, ["v1", "v2"]);
    }

    #[test]
    fn cycle_is_rejected() {
        let q = quiver(&["v", "u", "w"], &[("a", "v", "u"), ("b", "u", "v"), ("c", "u", "w")]);
        let dims = DimVector::from_pairs(&[("v", 1), ("u", 1), ("w", 1)]);
        let weight = Weight::from_pairs(&[("v", 1), ("w", -1)]);
        let rep = Representation::default();
        assert!(matches!(
            bipartite_reduce(&q, &dims, &weight, &rep, ReduceOptions::default()),
            Err(Error::Cycle(_))
        ));
    }

    #[test]
    fn sign_pattern_and_cap() {
        let q = quiver(&["v", "w"], &[("a", "v", "w")]);
        let dims = DimVector::from_pairs(&[("v", 1), ("w", 1)]);
        let mut rep = Representation::default();
        rep.insert("a", mat(1.0));
        let weight = Weight::from_pairs(&[("v", 1), ("w", 1)]);
        assert!(matches!(
            bipartite_reduce(&q, &dims, &weight, &rep, ReduceOptions::default()),
            Err(Error::WeightSign(_))
        ));
        let weight = Weight::from_pairs(&[("v", 1), ("w", -1)]);
        assert!(matches!(
            bipartite_reduce(&q, &dims, &weight, &rep, ReduceOptions { path_cap: 0 }),
            Err(Error::PathCap(0))
        ));
    }
}
