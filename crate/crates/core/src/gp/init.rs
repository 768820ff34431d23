//! Terminal set and random tree construction (full, grow, ramped
//! half-and-half).

use rand::Rng;

use super::tree::{ExpressionTree, Node, Op, Terminal};
use super::EvolutionConfig;

/// One variable per modality followed by `n_constants` constants evenly
/// spaced over `[0, 1]`.
pub fn terminal_set(modality_count: usize, n_constants: usize) -> Vec<Terminal> {
    let step = (n_constants.max(2) - 1) as f64;
    (0..modality_count)
        .map(Terminal::Var)
        .chain((0..n_constants).map(|j| Terminal::Const(j as f64 / step)))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Full,
    Grow,
}

/// Shared state for random node construction.
#[derive(Clone, Debug)]
pub struct Builder<'a> {
    pub terminals: &'a [Terminal],
    pub functions: &'a [Op],
}

impl<'a> Builder<'a> {
    pub fn new(terminals: &'a [Terminal]) -> Self {
        Self { terminals, functions: &Op::ALL }
    }

    fn terminal<R: Rng>(&self, rng: &mut R) -> Node {
        self.terminals[rng.random_range(0..self.terminals.len())].into()
    }

    fn function<R: Rng>(&self, rng: &mut R) -> Op {
        self.functions[rng.random_range(0..self.functions.len())]
    }

    /// Builds a subtree whose leaves sit at depth `target` (full) or at most
    /// `target` (grow). Nodes shallower than `min_function_depth` are always
    /// functions; grow picks a terminal elsewhere with probability
    /// `|T| / (|T| + |F|)`.
    pub fn build<R: Rng>(&self, method: Method, target: usize, min_function_depth: usize, rng: &mut R) -> Node {
        self.build_at(method, 0, target, min_function_depth, rng)
    }

    fn build_at<R: Rng>(&self, method: Method, depth: usize, target: usize, min_fn: usize, rng: &mut R) -> Node {
        if depth >= target {
            return self.terminal(rng);
        }
        let pick_terminal = match method {
            Method::Full => false,
            Method::Grow if depth < min_fn => false,
            Method::Grow => {
                let t = self.terminals.len();
                rng.random_range(0..t + self.functions.len()) < t
            }
        };
        if pick_terminal {
            return self.terminal(rng);
        }
        let op = self.function(rng);
        let left = self.build_at(method, depth + 1, target, min_fn, rng);
        let right = self.build_at(method, depth + 1, target, min_fn, rng);
        Node::func(op, left, right)
    }
}

/// Depth targets cycle over `init_depth_min..=init_depth_max`; consecutive
/// pairs share a target, the first built with full and the second with grow.
/// Nodes above depth 2 are forced to functions so every tree reaches it.
pub fn ramped_half_and_half<R: Rng>(cfg: &EvolutionConfig, terminals: &[Terminal], rng: &mut R) -> Vec<ExpressionTree> {
    let builder = Builder::new(terminals);
    let lo = cfg.init_depth_min.max(1);
    let hi = cfg.init_depth_max.max(lo);
    let span = hi - lo + 1;
    (0..cfg.population_size)
        .map(|i| {
            let target = lo + (i / 2) % span;
            let method = if i % 2 == 0 { Method::Full } else { Method::Grow };
            let root = builder.build(method, target, lo.min(2), rng);
            ExpressionTree::from_function(root)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::rng_stream;

    #[test]
    fn terminal_counts() {
        let t = terminal_set(4, 50);
        assert_eq!(t.len(), 54);
        assert_eq!(&t[..4], &[Terminal::Var(0), Terminal::Var(1), Terminal::Var(2), Terminal::Var(3)]);
        assert_eq!(t[4], Terminal::Const(0.0));
        assert_eq!(t[5], Terminal::Const(1.0 / 49.0));
        assert_eq!(t[53], Terminal::Const(1.0));
        let consts: Vec<f64> = t[4..]
            .iter()
            .map(|t| match t {
                Terminal::Const(c) => *c,
                Terminal::Var(_) => unreachable!(),
            })
            .collect();
        for w in consts.windows(2) {
            assert!(w[1] > w[0]);
            assert!((w[1] - w[0] - 1.0 / 49.0).abs() < 1e-12);
        }
    }

    #[test]
    fn endpoint_terminals() {
        assert_eq!(
            terminal_set(2, 2),
            vec![Terminal::Var(0), Terminal::Var(1), Terminal::Const(0.0), Terminal::Const(1.0)]
        );
    }

    #[test]
    fn ramped_population_bounds() {
        let cfg = EvolutionConfig::default();
        let terms = terminal_set(4, 50);
        let pop = ramped_half_and_half(&cfg, &terms, &mut rng_stream(3, 0));
        assert_eq!(pop.len(), 500);
        for (i, tree) in pop.iter().enumerate() {
            assert!(tree.root().is_function());
            assert!((2..=8).contains(&tree.depth()), "depth {}", tree.depth());
            let target = 2 + (i / 2) % 7;
            if i % 2 == 0 {
                assert!(tree.root().leaf_depths().iter().all(|&d| d == target));
            } else {
                assert!(tree.depth() <= target);
            }
        }
        // every depth cohort present
        for d in 2..=8 {
            assert!(pop.iter().any(|t| t.depth() == d));
        }
    }

    #[test]
    fn ramped_is_deterministic() {
        let cfg = EvolutionConfig::default();
        let terms = terminal_set(4, 50);
        let a = ramped_half_and_half(&cfg, &terms, &mut rng_stream(11, 0));
        let b = ramped_half_and_half(&cfg, &terms, &mut rng_stream(11, 0));
        assert_eq!(a, b);
    }

    #[test]
    fn zero_target_is_terminal() {
        let terms = terminal_set(2, 3);
        let n = Builder::new(&terms).build(Method::Grow, 0, 0, &mut rng_stream(0, 0));
        assert!(!n.is_function());
    }
}
