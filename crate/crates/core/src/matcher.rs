//! Exact one-to-one set matching: a rectangular Hungarian solver plus the
//! query-to-ground-truth cost matrix used by set-prediction detectors.

use std::cell::Cell;

use crate::error::{Error, Result};
use crate::geometry::{giou, BBox, CenterBox};

/// Rectangular cost matrix: rows are queries, columns ground-truth objects.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidInput(
                "cost matrix needs at least one row and one column".into(),
            ));
        }
        if data.len() != rows * cols {
            return Err(Error::InvalidInput(format!(
                "cost matrix {rows}x{cols} does not match {} entries",
                data.len()
            )));
        }
        if data.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput(
                "cost matrix entries must be finite".into(),
            ));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self::new(rows, cols, data)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }
}

/// Optimal one-to-one pairing. `pairs` is sorted by query index and holds
/// min(rows, cols) entries with distinct queries and distinct ground truths.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub pairs: Vec<(usize, usize)>,
    pub total_cost: f64,
}

impl MatchResult {
    /// Query matched to each ground truth, None when the gt went unmatched
    /// (only possible with fewer queries than ground truths).
    pub fn gt_to_query(&self, num_gts: usize) -> Vec<Option<usize>> {
        let mut out = vec![None; num_gts];
        for &(q, g) in &self.pairs {
            out[g] = Some(q);
        }
        out
    }
}

thread_local! {
    static SOLVE_COUNT: Cell<u64> = const { Cell::new(0) };
}

/// Number of Hungarian solves performed on the current thread. Lets callers
/// verify that matching-free code paths (the pre-bound auxiliary query
/// groups) really never invoke the solver.
pub fn solve_invocations() -> u64 {
    SOLVE_COUNT.with(|c| c.get())
}

/// Dense O(n^3) shortest-augmenting-path assignment on an n x n matrix.
/// Returns (row matched to each column, row duals, column duals).
fn solve_square(n: usize, cost: &impl Fn(usize, usize) -> f64) -> (Vec<usize>, Vec<f64>, Vec<f64>) {
    const UNSET: usize = usize::MAX;
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    // row_of[j] = row currently assigned to column j; slot n is the virtual
    // starting column of each augmentation.
    let mut row_of = vec![UNSET; n + 1];
    let mut way = vec![0usize; n + 1];

    for i in 0..n {
        row_of[n] = i;
        let mut j0 = n;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = n;
            for j in 0..n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0, j) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    if row_of[j] != UNSET {
                        u[row_of[j]] += delta;
                    }
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == UNSET {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == n {
                break;
            }
        }
    }
    row_of.truncate(n);
    u.truncate(n);
    v.truncate(n);
    (row_of, u, v)
}

/// Kuhn augmenting search: can `row` be matched within the zero-edge graph,
/// given current column owners? `adj[row]` lists admissible columns.
fn try_kuhn(
    row: usize,
    adj: &[Vec<usize>],
    owner: &mut [Option<usize>],
    visited: &mut [bool],
) -> bool {
    for &col in &adj[row] {
        if visited[col] {
            continue;
        }
        visited[col] = true;
        if owner[col].is_none() || try_kuhn(owner[col].unwrap(), adj, owner, visited) {
            owner[col] = Some(row);
            return true;
        }
    }
    false
}

/// True when every row in `rows` can be simultaneously matched in the
/// zero-edge graph restricted to unused columns.
fn perfect_matching_exists(
    n: usize,
    rows: &[usize],
    adj: &[Vec<usize>],
    col_banned: &[bool],
) -> bool {
    let filtered: Vec<Vec<usize>> = (0..n)
        .map(|r| adj[r].iter().copied().filter(|&c| !col_banned[c]).collect())
        .collect();
    let mut owner: Vec<Option<usize>> = vec![None; n];
    for &r in rows {
        let mut visited = vec![false; n];
        if !try_kuhn(r, &filtered, &mut owner, &mut visited) {
            return false;
        }
    }
    true
}

/// Globally optimal assignment with deterministic tie-breaking: among all
/// minimum-cost pairings, the lexicographically smallest pair list (sorted
/// by query index) is returned.
///
/// The matrix is padded to a square with zero-cost dummy entries, solved by
/// shortest augmenting paths, and the tie-break is resolved greedily inside
/// the zero-reduced-cost graph the optimal duals induce.
pub fn hungarian_solve(matrix: &CostMatrix) -> Result<MatchResult> {
    SOLVE_COUNT.with(|c| c.set(c.get() + 1));

    let rows = matrix.rows;
    let cols = matrix.cols;
    let n = rows.max(cols);
    let cost = |i: usize, j: usize| -> f64 {
        if i < rows && j < cols {
            matrix.get(i, j)
        } else {
            0.0
        }
    };
    let (row_of_col, u, v) = solve_square(n, &cost);

    // Every minimum-cost assignment lies inside the graph of (near-)zero
    // reduced costs for these duals, and every perfect matching of that
    // graph attains the optimum. Columns are listed in ascending order, so
    // greedy fixing yields the lexicographically smallest optimal pair list.
    let scale = matrix
        .data
        .iter()
        .fold(1.0f64, |acc, c| acc.max(c.abs()));
    let tol = 1e-9 * scale;
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| (cost(i, j) - u[i] - v[j]).abs() <= tol)
                .collect()
        })
        .collect();

    let mut col_banned = vec![false; n];
    let mut remaining: Vec<usize> = (0..n).collect();
    let mut pairs = Vec::with_capacity(rows.min(cols));
    let mut consistent = true;
    'queries: for q in 0..rows {
        remaining.retain(|&r| r != q);
        let open: Vec<usize> = adj[q].iter().copied().filter(|&g| !col_banned[g]).collect();
        // A single admissible column is forced; otherwise fix the first
        // candidate that still leaves a perfect completion.
        let chosen = if open.len() == 1 {
            Some(open[0])
        } else {
            let mut found = None;
            for &g in &open {
                col_banned[g] = true;
                if perfect_matching_exists(n, &remaining, &adj, &col_banned) {
                    found = Some(g);
                    break;
                }
                col_banned[g] = false;
            }
            found
        };
        match chosen {
            Some(g) if g < cols => {
                col_banned[g] = true;
                pairs.push((q, g));
            }
            Some(g) => col_banned[g] = true, // q absorbed by a dummy column
            None => {
                consistent = false;
                break 'queries;
            }
        }
    }

    if !consistent || pairs.len() != rows.min(cols) {
        // Duals too noisy to trust the zero graph; fall back to the raw
        // augmenting-path assignment, which is still optimal.
        pairs.clear();
        for (col, &row) in row_of_col.iter().enumerate() {
            if row < rows && col < cols {
                pairs.push((row, col));
            }
        }
        pairs.sort_unstable();
    }

    let total_cost = pairs.iter().map(|&(q, g)| matrix.get(q, g)).sum();
    Ok(MatchResult { pairs, total_cost })
}

/// One decoder query's class probabilities plus its normalized box.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryPrediction {
    pub class_scores: Vec<f64>,
    pub bbox: CenterBox,
}

impl QueryPrediction {
    /// Validates probabilities and clamps the box into the unit square.
    pub fn new(class_scores: Vec<f64>, bbox: CenterBox) -> Result<Self> {
        if class_scores.is_empty() {
            return Err(Error::InvalidInput(
                "query prediction needs at least one class score".into(),
            ));
        }
        if class_scores
            .iter()
            .any(|p| !p.is_finite() || *p < 0.0 || *p > 1.0)
        {
            return Err(Error::InvalidInput(
                "class scores must be probabilities in [0, 1]".into(),
            ));
        }
        let corner = bbox.to_corner().clamp_to(1.0, 1.0);
        Ok(Self {
            class_scores,
            bbox: corner.to_center(),
        })
    }
}

/// Weights and classification-cost shape for the matching cost matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatcherWeights {
    pub class_weight: f64,
    pub l1_weight: f64,
    pub giou_weight: f64,
    pub focal_alpha: f64,
    pub focal_gamma: f64,
}

impl Default for MatcherWeights {
    fn default() -> Self {
        Self {
            class_weight: 2.0,
            l1_weight: 5.0,
            giou_weight: 2.0,
            focal_alpha: 0.25,
            focal_gamma: 2.0,
        }
    }
}

/// Focal-style classification cost of predicting probability `p` for the
/// target class: pos_cost(p) - neg_cost(p), stabilized with a small epsilon.
fn focal_class_cost(p: f64, alpha: f64, gamma: f64) -> f64 {
    const EPS: f64 = 1e-8;
    let pos = alpha * (1.0 - p).powf(gamma) * (-(p + EPS).ln());
    let neg = (1.0 - alpha) * p.powf(gamma) * (-(1.0 - p + EPS).ln());
    pos - neg
}

/// Builds the query-by-gt matching cost: focal classification cost plus
/// weighted L1 distance in normalized (cx, cy, w, h) plus negated GIoU.
/// Ground-truth boxes are corner-form, normalized to the unit square.
pub fn build_detr_cost(
    preds: &[QueryPrediction],
    gts: &[(usize, BBox)],
    weights: &MatcherWeights,
) -> Result<CostMatrix> {
    if gts.is_empty() {
        return Err(Error::InvalidInput(
            "cost construction requires at least one ground truth".into(),
        ));
    }
    if preds.is_empty() {
        return Err(Error::InvalidInput(
            "cost construction requires at least one query prediction".into(),
        ));
    }
    let num_classes = preds[0].class_scores.len();
    for (label, _) in gts {
        if *label >= num_classes {
            return Err(Error::InvalidInput(format!(
                "gt label {label} outside category range 0..{num_classes}"
            )));
        }
    }
    CostMatrix::from_fn(preds.len(), gts.len(), |i, j| {
        let pred = &preds[i];
        let (label, gt_box) = &gts[j];
        let p = pred.class_scores[*label];
        let cls = focal_class_cost(p, weights.focal_alpha, weights.focal_gamma);
        let gc = gt_box.to_center();
        let l1 = (pred.bbox.cx - gc.cx).abs()
            + (pred.bbox.cy - gc.cy).abs()
            + (pred.bbox.w - gc.w).abs()
            + (pred.bbox.h - gc.h).abs();
        let g = giou(&pred.bbox.to_corner(), gt_box);
        weights.class_weight * cls + weights.l1_weight * l1 + weights.giou_weight * (-g)
    })
}

/// Cost construction followed by the Hungarian solve. With at least as many
/// queries as ground truths, every ground truth is matched exactly once.
pub fn match_one_to_one(
    preds: &[QueryPrediction],
    gts: &[(usize, BBox)],
    weights: &MatcherWeights,
) -> Result<MatchResult> {
    hungarian_solve(&build_detr_cost(preds, gts, weights)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: usize, cols: usize, data: &[f64]) -> CostMatrix {
        CostMatrix::new(rows, cols, data.to_vec()).unwrap()
    }

    #[test]
    fn rejects_bad_matrices() {
        assert!(CostMatrix::new(0, 1, vec![]).is_err());
        assert!(CostMatrix::new(1, 1, vec![f64::NAN]).is_err());
        assert!(CostMatrix::new(1, 1, vec![f64::INFINITY]).is_err());
        assert!(CostMatrix::new(2, 2, vec![0.0; 3]).is_err());
    }

    #[test]
    fn solves_known_matrices() {
        let r = hungarian_solve(&mat(1, 1, &[0.0])).unwrap();
        assert_eq!(r.pairs, vec![(0, 0)]);
        assert_eq!(r.total_cost, 0.0);

        let r = hungarian_solve(&mat(2, 2, &[1.0, 2.0, 2.0, 1.0])).unwrap();
        assert_eq!(r.pairs, vec![(0, 0), (1, 1)]);
        assert_eq!(r.total_cost, 2.0);

        // rectangular: two rows, one column
        let r = hungarian_solve(&mat(2, 1, &[3.0, 1.0])).unwrap();
        assert_eq!(r.pairs, vec![(1, 0)]);
        assert_eq!(r.total_cost, 1.0);
    }

    #[test]
    fn tie_break_is_lexicographic() {
        let r = hungarian_solve(&mat(2, 2, &[1.0, 1.0, 1.0, 1.0])).unwrap();
        assert_eq!(r.pairs, vec![(0, 0), (1, 1)]);

        let r = hungarian_solve(&mat(1, 2, &[0.0, 0.0])).unwrap();
        assert_eq!(r.pairs, vec![(0, 0)]);

        let r = hungarian_solve(&mat(3, 2, &[5.0, 5.0, 5.0, 5.0, 5.0, 5.0])).unwrap();
        assert_eq!(r.pairs, vec![(0, 0), (1, 1)]);

        // mixed: query 0 must take column 1 for optimality, query 1 free
        let r = hungarian_solve(&mat(2, 2, &[2.0, 0.0, 1.0, 1.0])).unwrap();
        assert_eq!(r.pairs, vec![(0, 1), (1, 0)]);
    }

    #[test]
    fn solve_counter_increments() {
        let before = solve_invocations();
        hungarian_solve(&mat(1, 1, &[4.0])).unwrap();
        assert_eq!(solve_invocations(), before + 1);
    }

    #[test]
    fn gt_to_query_inverts_pairs() {
        let r = hungarian_solve(&mat(3, 2, &[9.0, 1.0, 1.0, 9.0, 5.0, 5.0])).unwrap();
        assert_eq!(r.pairs, vec![(0, 1), (1, 0)]);
        assert_eq!(r.gt_to_query(3), vec![Some(1), Some(0), None]);
    }

    fn brute_force_min_cost(m: &CostMatrix) -> f64 {
        // enumerate all injections of the smaller side into the larger;
        // each candidate is summed in row order to mirror the solver
        fn rec(
            m: &CostMatrix,
            k: usize,
            used: &mut Vec<bool>,
            chosen: &mut Vec<(usize, usize)>,
            best: &mut f64,
            rows_small: bool,
        ) {
            let small = if rows_small { m.rows() } else { m.cols() };
            let large = if rows_small { m.cols() } else { m.rows() };
            if k == small {
                let mut pairs = chosen.clone();
                pairs.sort_unstable();
                let cost: f64 = pairs.iter().map(|&(r, c)| m.get(r, c)).sum();
                if cost < *best {
                    *best = cost;
                }
                return;
            }
            for j in 0..large {
                if used[j] {
                    continue;
                }
                used[j] = true;
                chosen.push(if rows_small { (k, j) } else { (j, k) });
                rec(m, k + 1, used, chosen, best, rows_small);
                chosen.pop();
                used[j] = false;
            }
        }
        let rows_small = m.rows() <= m.cols();
        let large = m.rows().max(m.cols());
        let mut best = f64::INFINITY;
        rec(m, 0, &mut vec![false; large], &mut Vec::new(), &mut best, rows_small);
        best
    }

    #[test]
    fn matches_brute_force_on_random_matrices() {
        use rand::rngs::StdRng;
        use rand::{Rng, SeedableRng};
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..200 {
            let rows = rng.random_range(1..=5);
            let cols = rng.random_range(1..=5);
            let data: Vec<f64> = (0..rows * cols).map(|_| rng.random_range(-10.0..10.0)).collect();
            let m = CostMatrix::new(rows, cols, data).unwrap();
            let solved = hungarian_solve(&m).unwrap();
            let expect = brute_force_min_cost(&m);
            assert_eq!(
                solved.total_cost, expect,
                "rows={rows} cols={cols}: {:?}",
                solved.pairs
            );
            assert_eq!(solved.pairs.len(), rows.min(cols));
        }
    }

    fn brute_force_lex_optimum(m: &CostMatrix) -> Vec<(usize, usize)> {
        // enumerate every maximal assignment, keep the minimum-cost ones,
        // and of those the lexicographically smallest pair list
        fn rec(
            m: &CostMatrix,
            k: usize,
            used: &mut Vec<bool>,
            chosen: &mut Vec<(usize, usize)>,
            out: &mut Vec<(f64, Vec<(usize, usize)>)>,
            rows_small: bool,
        ) {
            let small = if rows_small { m.rows() } else { m.cols() };
            let large = if rows_small { m.cols() } else { m.rows() };
            if k == small {
                let mut pairs = chosen.clone();
                pairs.sort_unstable();
                let cost: f64 = pairs.iter().map(|&(r, c)| m.get(r, c)).sum();
                out.push((cost, pairs));
                return;
            }
            for j in 0..large {
                if used[j] {
                    continue;
                }
                used[j] = true;
                chosen.push(if rows_small { (k, j) } else { (j, k) });
                rec(m, k + 1, used, chosen, out, rows_small);
                chosen.pop();
                used[j] = false;
            }
        }
        let rows_small = m.rows() <= m.cols();
        let large = m.rows().max(m.cols());
        let mut all = Vec::new();
        rec(m, 0, &mut vec![false; large], &mut Vec::new(), &mut all, rows_small);
        let best = all.iter().map(|(c, _)| *c).fold(f64::INFINITY, f64::min);
        all.into_iter()
            .filter(|(c, _)| *c == best)
            .map(|(_, p)| p)
            .min()
            .unwrap()
    }

    #[test]
    fn tie_break_matches_enumerated_lex_optimum() {
        // small integer alphabets force many co-optimal assignments
        use rand::rngs::StdRng;
        use rand::{Rng, SeedableRng};
        let mut rng = StdRng::seed_from_u64(29);
        for case in 0..300 {
            let rows = rng.random_range(1..=5);
            let cols = rng.random_range(1..=5);
            let alphabet = rng.random_range(1..=3);
            let data: Vec<f64> = (0..rows * cols)
                .map(|_| rng.random_range(0..alphabet) as f64)
                .collect();
            let m = CostMatrix::new(rows, cols, data).unwrap();
            let solved = hungarian_solve(&m).unwrap();
            let expect = brute_force_lex_optimum(&m);
            assert_eq!(solved.pairs, expect, "case {case} ({rows}x{cols})");
        }
    }

    #[test]
    fn eight_by_eight_matches_brute_force() {
        use rand::rngs::StdRng;
        use rand::{Rng, SeedableRng};
        let mut rng = StdRng::seed_from_u64(23);
        for _ in 0..20 {
            let data: Vec<f64> = (0..64).map(|_| rng.random_range(-50.0..50.0)).collect();
            let m = CostMatrix::new(8, 8, data).unwrap();
            let solved = hungarian_solve(&m).unwrap();
            assert_eq!(solved.total_cost, brute_force_min_cost(&m));
        }
    }

    #[test]
    fn constant_shift_keeps_pairs() {
        // integer-valued entries keep the shifted sums exact
        let data: Vec<f64> = vec![3.0, 7.0, 1.0, 4.0, 2.0, 9.0, 5.0, 8.0, 6.0];
        let m = mat(3, 3, &data);
        let shifted = mat(3, 3, &data.iter().map(|c| c + 11.0).collect::<Vec<_>>());
        assert_eq!(
            hungarian_solve(&m).unwrap().pairs,
            hungarian_solve(&shifted).unwrap().pairs
        );
    }

    #[test]
    fn row_permutation_permutes_queries() {
        use rand::rngs::StdRng;
        use rand::{Rng, SeedableRng};
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..50 {
            let rows = rng.random_range(2..=5);
            let cols = rng.random_range(1..=5);
            let data: Vec<f64> = (0..rows * cols).map(|_| rng.random_range(0.0..100.0)).collect();
            let m = CostMatrix::new(rows, cols, data.clone()).unwrap();

            // rotate rows by one
            let mut rot = Vec::with_capacity(data.len());
            for r in 0..rows {
                let src = (r + 1) % rows;
                rot.extend_from_slice(&data[src * cols..(src + 1) * cols]);
            }
            let mr = CostMatrix::new(rows, cols, rot).unwrap();

            let base = hungarian_solve(&m).unwrap();
            let rotated = hungarian_solve(&mr).unwrap();
            let mut expect: Vec<(usize, usize)> = base
                .pairs
                .iter()
                .map(|&(q, g)| ((q + rows - 1) % rows, g))
                .collect();
            expect.sort_unstable();
            assert_eq!(rotated.pairs, expect);
        }
    }

    #[test]
    fn dominated_row_is_never_used() {
        // a row worse than every existing row in every column cannot enter
        // an optimum while queries already outnumber ground truths
        use rand::rngs::StdRng;
        use rand::{Rng, SeedableRng};
        let mut rng = StdRng::seed_from_u64(13);
        for _ in 0..50 {
            let rows = rng.random_range(3..=6);
            let cols = rng.random_range(1..rows);
            let data: Vec<f64> = (0..rows * cols).map(|_| rng.random_range(0.0..10.0)).collect();
            let m = CostMatrix::new(rows, cols, data.clone()).unwrap();
            let base = hungarian_solve(&m).unwrap();

            let mut extended = data.clone();
            for c in 0..cols {
                let col_max = (0..rows).map(|r| data[r * cols + c]).fold(0.0, f64::max);
                extended.push(col_max + 1.0);
            }
            let me = CostMatrix::new(rows + 1, cols, extended).unwrap();
            let with_row = hungarian_solve(&me).unwrap();
            assert_eq!(with_row.total_cost, base.total_cost);
            assert_eq!(with_row.pairs, base.pairs);
        }
    }

    fn unit_pred(scores: Vec<f64>, cx: f64, cy: f64, w: f64, h: f64) -> QueryPrediction {
        QueryPrediction::new(scores, CenterBox { cx, cy, w, h }).unwrap()
    }

    #[test]
    fn detr_cost_hand_case() {
        let w = MatcherWeights {
            class_weight: 1.0,
            l1_weight: 1.0,
            giou_weight: 1.0,
            ..MatcherWeights::default()
        };
        let gt_box = BBox::new(0.25, 0.25, 0.75, 0.75).unwrap();
        let perfect = unit_pred(vec![0.0, 1.0], 0.5, 0.5, 0.5, 0.5);
        let off = unit_pred(vec![0.5, 0.1], 0.2, 0.2, 0.2, 0.2);
        let gts = vec![(1usize, gt_box)];
        let m = build_detr_cost(&[perfect.clone(), off.clone()], &gts, &w).unwrap();

        // perfect prediction: cls_cost(1) + 0 - 1
        let expect_cls = focal_class_cost(1.0, 0.25, 2.0);
        assert!((m.get(0, 0) - (expect_cls - 1.0)).abs() < 1e-12);
        assert!(m.get(0, 0) < m.get(1, 0), "perfect entry is the column minimum");

        // hand-computed second row
        let p = 0.1f64;
        let cls = 0.25 * (1.0 - p).powi(2) * (-(p + 1e-8).ln())
            - 0.75 * p.powi(2) * (-(1.0 - p + 1e-8).ln());
        let l1 = (0.5f64 - 0.2).abs() * 2.0 + (0.5f64 - 0.2).abs() * 2.0;
        let g = giou(
            &BBox::new(0.1, 0.1, 0.3, 0.3).unwrap(),
            &gt_box,
        );
        assert!((m.get(1, 0) - (cls + l1 - g)).abs() < 1e-12);

        // identical predictions give identical rows
        let m2 = build_detr_cost(&[off.clone(), off], &gts, &w).unwrap();
        assert_eq!(m2.get(0, 0), m2.get(1, 0));
    }

    #[test]
    fn detr_cost_validation() {
        let w = MatcherWeights::default();
        let pred = unit_pred(vec![0.5, 0.5], 0.5, 0.5, 0.2, 0.2);
        let gt_box = BBox::new(0.0, 0.0, 1.0, 1.0).unwrap();
        assert!(build_detr_cost(std::slice::from_ref(&pred), &[], &w).is_err());
        assert!(build_detr_cost(&[pred], &[(7, gt_box)], &w).is_err());
        assert!(QueryPrediction::new(vec![1.5], CenterBox { cx: 0.5, cy: 0.5, w: 0.1, h: 0.1 }).is_err());
    }

    #[test]
    fn one_to_one_matches_expected_query() {
        let w = MatcherWeights::default();
        let gt_box = BBox::new(0.4, 0.4, 0.6, 0.6).unwrap();
        let on_target = unit_pred(vec![0.05, 0.95], 0.5, 0.5, 0.2, 0.2);
        let elsewhere = unit_pred(vec![0.9, 0.1], 0.1, 0.1, 0.1, 0.1);
        let r = match_one_to_one(&[on_target, elsewhere], &[(1, gt_box)], &w).unwrap();
        assert_eq!(r.pairs, vec![(0, 0)]);

        let single = match_one_to_one(
            &[unit_pred(vec![1.0], 0.5, 0.5, 0.1, 0.1)],
            &[(0, gt_box)],
            &w,
        )
        .unwrap();
        assert_eq!(single.pairs.len(), 1);
    }

    #[test]
    fn cardinality_contract() {
        use rand::rngs::StdRng;
        use rand::{Rng, SeedableRng};
        let mut rng = StdRng::seed_from_u64(3);
        let w = MatcherWeights::default();
        let preds: Vec<QueryPrediction> = (0..5)
            .map(|_| {
                let cx = rng.random_range(0.2..0.8);
                let cy = rng.random_range(0.2..0.8);
                unit_pred(
                    vec![rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)],
                    cx,
                    cy,
                    0.1,
                    0.1,
                )
            })
            .collect();
        let gts: Vec<(usize, BBox)> = (0..3)
            .map(|_| {
                let x = rng.random_range(0.0..0.7);
                let y = rng.random_range(0.0..0.7);
                (
                    rng.random_range(0..2usize),
                    BBox::new(x, y, x + 0.2, y + 0.2).unwrap(),
                )
            })
            .collect();
        let r = match_one_to_one(&preds, &gts, &w).unwrap();
        assert_eq!(r.pairs.len(), 3);
        let mut gs: Vec<usize> = r.pairs.iter().map(|p| p.1).collect();
        gs.sort_unstable();
        gs.dedup();
        assert_eq!(gs.len(), 3);
    }
}
