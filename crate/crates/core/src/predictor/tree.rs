use crate::telemetry::FEATURE_COUNT;

pub type Row = [f64; FEATURE_COUNT];

#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    Split {
        feature_index: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        value: f64,
    },
}

impl TreeNode {
    /// Rows with `x[feature] <= threshold` go left.
    pub fn predict(&self, x: &Row) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split {
                    feature_index,
                    threshold,
                    left,
                    right,
                } => {
                    node = if x[*feature_index] <= *threshold { left } else { right };
                }
            }
        }
    }

    /// Edges on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.leaf_count() + right.leaf_count(),
        }
    }
}

pub(crate) struct TreeBuilder<'a> {
    pub x: &'a [Row],
    pub target: &'a [f64],
    pub max_depth: usize,
    pub min_samples_leaf: usize,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl TreeBuilder<'_> {
    /// `sorted[f]` lists all rows sorted by feature `f` (ties by row index).
    pub fn presort(x: &[Row]) -> Vec<Vec<usize>> {
        (0..FEATURE_COUNT)
            .map(|f| {
                let mut idx: Vec<usize> = (0..x.len()).collect();
                idx.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]).then(a.cmp(&b)));
                idx
            })
            .collect()
    }

    pub fn build(&self, sorted: Vec<Vec<usize>>) -> TreeNode {
        self.grow(sorted, 0)
    }

    fn grow(&self, sorted: Vec<Vec<usize>>, depth: usize) -> TreeNode {
        let rows = &sorted[0];
        let n = rows.len();
        let sum: f64 = rows.iter().map(|&i| self.target[i]).sum();
        let leaf = TreeNode::Leaf {
            value: if n == 0 { 0.0 } else { sum / n as f64 },
        };
        if depth >= self.max_depth || n < 2 * self.min_samples_leaf {
            return leaf;
        }
        let Some(best) = self.best_split(&sorted, sum) else {
            return leaf;
        };
        let (f, t) = (best.feature, best.threshold);
        let (mut l, mut r) = (Vec::with_capacity(FEATURE_COUNT), Vec::with_capacity(FEATURE_COUNT));
        for list in sorted {
            let (a, b): (Vec<usize>, Vec<usize>) = list.into_iter().partition(|&i| self.x[i][f] <= t);
            l.push(a);
            r.push(b);
        }
        TreeNode::Split {
            feature_index: f,
            threshold: t,
            left: Box::new(self.grow(l, depth + 1)),
            right: Box::new(self.grow(r, depth + 1)),
        }
    }

    /// Exact search over midpoints of adjacent distinct values. The split
    /// maximises SL²/nL + SR²/nR (equivalently minimises child SSE); only
    /// strictly better candidates replace the incumbent, so ties resolve to
    /// the lowest feature index, then the lowest threshold.
    fn best_split(&self, sorted: &[Vec<usize>], sum: f64) -> Option<BestSplit> {
        let n = sorted[0].len();
        let sum_sq: f64 = sorted[0].iter().map(|&i| self.target[i] * self.target[i]).sum();
        let parent = sum * sum / n as f64;
        let tolerance = f64::EPSILON * sum_sq.max(f64::MIN_POSITIVE) * n as f64;
        let mut best: Option<BestSplit> = None;
        for (f, order) in sorted.iter().enumerate() {
            let mut left_sum = 0.0;
            for k in 1..n {
                left_sum += self.target[order[k - 1]];
                let (a, b) = (self.x[order[k - 1]][f], self.x[order[k]][f]);
                if k < self.min_samples_leaf || n - k < self.min_samples_leaf || !(a < b) {
                    continue;
                }
                let right_sum = sum - left_sum;
                let score = left_sum * left_sum / k as f64 + right_sum * right_sum / (n - k) as f64;
                let gain = score - parent;
                if gain > tolerance && best.as_ref().is_none_or(|bst| gain > bst.gain) {
                    best = Some(BestSplit {
                        feature: f,
                        threshold: a + (b - a) / 2.0,
                        gain,
                    });
                }
            }
        }
        best
    }
}
