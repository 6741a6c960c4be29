use std::collections::HashMap;

use crate::config_space::{CoreClass, Space};

/// Partial order over configurations: one step narrower in a single
/// section (within the same core class), or one cache option smaller.
///
/// `order` is a topological order (narrowest first); `preds[i]` lists the
/// immediate predecessors of `i`.
#[derive(Debug, Clone)]
pub struct Lattice {
    pub order: Vec<usize>,
    pub preds: Vec<Vec<usize>>,
}

impl Lattice {
    /// Over every configuration index, including the cache dimension.
    pub fn full(space: &Space) -> Self {
        Self::build(space, space.cache_count())
    }

    /// Over core configurations only.
    pub fn cores(space: &Space) -> Self {
        Self::build(space, 1)
    }

    fn build(space: &Space, cache_count: usize) -> Self {
        let m = space.core_count();
        let mut lookup: HashMap<(CoreClass, [usize; 3]), usize> = HashMap::with_capacity(m);
        let mut codes = Vec::with_capacity(m);
        for j in 0..m {
            let (class, _, code) = space.describe_core(j).expect("core index in range");
            lookup.insert((class, code), j);
            codes.push((class, code));
        }
        let n = m * cache_count;
        let mut preds = vec![Vec::new(); n];
        let mut rank = vec![0usize; n];
        for j in 0..m {
            let (class, code) = codes[j];
            for k in 0..cache_count {
                let i = j * cache_count + k;
                rank[i] = code.iter().sum::<usize>() + k;
                for s in 0..3 {
                    if code[s] > 0 {
                        let mut c = code;
                        c[s] -= 1;
                        preds[i].push(lookup[&(class, c)] * cache_count + k);
                    }
                }
                if k > 0 {
                    preds[i].push(i - 1);
                }
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&i| (rank[i], i));
        Lattice { order, preds }
    }

    /// Raises each value to at least the maximum of its predecessors.
    pub fn envelope(&self, values: &mut [f64]) {
        for &i in &self.order {
            let floor = self.preds[i].iter().map(|&p| values[p]).fold(f64::MIN, f64::max);
            if values[i] < floor {
                values[i] = floor;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn widest_config_dominates_everything() {
        let space = Space::default();
        let lat = Lattice::full(&space);
        assert_eq!(*lat.order.last().unwrap(), 3); // {6,6,6} with the largest cache
        assert_eq!(lat.order[0], 104); // {2,2,2} with the smallest cache
        assert!(lat.preds[104].is_empty());
        assert_eq!(lat.preds[3].len(), 4);
    }

    #[test]
    fn envelope_enforces_order() {
        let space = Space::default();
        let lat = Lattice::full(&space);
        let mut v: Vec<f64> = (0..space.len()).map(|i| ((i * 37) % 11) as f64).collect();
        lat.envelope(&mut v);
        for (i, ps) in lat.preds.iter().enumerate() {
            for &p in ps {
                assert!(v[p] <= v[i]);
            }
        }
    }

    #[test]
    fn hetero_classes_are_not_linked() {
        let space = Space::Hetero(Default::default());
        let lat = Lattice::cores(&space);
        for i in 0..8 {
            assert!(lat.preds[i].iter().all(|&p| p < 8));
        }
        for i in 8..35 {
            assert!(lat.preds[i].iter().all(|&p| p >= 8));
        }
    }
}
