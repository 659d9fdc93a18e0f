//! Bipartite assignment between existing tracks (rows) and incoming
//! tracklets (columns): an exact Kuhn-Munkres solver and the greedy matcher
//! used by the frame-by-frame baseline.

use std::cmp::Ordering;
use std::ops::{Add, AddAssign, Sub, SubAssign};

/// Entry that no solver may select.
pub const GATED: Option<f64> = None;

#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Option<f64>>,
}

impl CostMatrix {
    /// A `rows x cols` matrix with every entry gated.
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![GATED; rows * cols],
        }
    }

    /// # Panics
    /// If the rows have different lengths or an entry is not finite.
    pub fn from_rows(rows: Vec<Vec<Option<f64>>>) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut m = Self::new(rows.len(), cols);
        for (i, row) in rows.into_iter().enumerate() {
            assert_eq!(row.len(), cols, "ragged cost matrix");
            for (j, c) in row.into_iter().enumerate() {
                if let Some(c) = c {
                    m.set(i, j, c);
                }
            }
        }
        m
    }

    /// Dense matrix without gated entries.
    pub fn dense(rows: &[Vec<f64>]) -> Self {
        Self::from_rows(rows.iter().map(|r| r.iter().map(|&c| Some(c)).collect()).collect())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        self.data[row * self.cols + col]
    }

    /// # Panics
    /// If `cost` is not finite.
    pub fn set(&mut self, row: usize, col: usize, cost: f64) {
        assert!(cost.is_finite(), "cost must be finite");
        self.data[row * self.cols + col] = Some(cost);
    }

    pub fn gate(&mut self, row: usize, col: usize) {
        self.data[row * self.cols + col] = GATED;
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Assignment {
    /// Matched `(row, col)` pairs, sorted by row.
    pub pairs: Vec<(usize, usize)>,
    pub cost: f64,
}

impl Assignment {
    fn from_pairs(mut pairs: Vec<(usize, usize)>, c: &CostMatrix) -> Self {
        pairs.sort_unstable();
        let cost = pairs
            .iter()
            .map(|&(i, j)| c.get(i, j).expect("assigned a gated entry"))
            .sum();
        Self { pairs, cost }
    }

    pub fn col_for_row(&self, row: usize) -> Option<usize> {
        self.pairs.iter().find(|p| p.0 == row).map(|p| p.1)
    }

    pub fn row_for_col(&self, col: usize) -> Option<usize> {
        self.pairs.iter().find(|p| p.1 == col).map(|p| p.0)
    }
}

/// Weight ordered first by how many gated (or padding) cells are used, then
/// by real cost. Minimizing it yields a maximum-cardinality matching over
/// allowed entries with the least cost among those.
#[derive(Debug, Clone, Copy)]
struct Lex {
    gated: i64,
    cost: f64,
}

impl Lex {
    const ZERO: Lex = Lex { gated: 0, cost: 0.0 };
    const INF: Lex = Lex {
        gated: i64::MAX / 4,
        cost: 0.0,
    };
}

impl PartialEq for Lex {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Lex {}

impl PartialOrd for Lex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Lex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.gated.cmp(&other.gated).then(self.cost.total_cmp(&other.cost))
    }
}

impl Add for Lex {
    type Output = Lex;
    fn add(self, rhs: Lex) -> Lex {
        Lex {
            gated: self.gated + rhs.gated,
            cost: self.cost + rhs.cost,
        }
    }
}

impl Sub for Lex {
    type Output = Lex;
    fn sub(self, rhs: Lex) -> Lex {
        Lex {
            gated: self.gated - rhs.gated,
            cost: self.cost - rhs.cost,
        }
    }
}

impl AddAssign for Lex {
    fn add_assign(&mut self, rhs: Lex) {
        *self = *self + rhs;
    }
}

impl SubAssign for Lex {
    fn sub_assign(&mut self, rhs: Lex) {
        *self = *self - rhs;
    }
}

/// Kuhn-Munkres with row/column potentials, O(n³) on an `n x n` matrix.
/// Returns the column assigned to each row.
fn kuhn_munkres(a: &[Vec<Lex>]) -> Vec<usize> {
    let n = a.len();
    // 1-based; index 0 is the virtual column used while growing a path
    let mut u = vec![Lex::ZERO; n + 1];
    let mut v = vec![Lex::ZERO; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![Lex::INF; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = Lex::INF;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = a[i0 - 1][j - 1] - u[i0] - v[j];
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
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![0usize; n];
    for j in 1..=n {
        row_to_col[p[j] - 1] = j - 1;
    }
    row_to_col
}

/// Minimum-cost matching of maximum cardinality over non-gated entries.
/// Rows or columns left with only gated options stay unmatched.
pub fn hungarian_solve(c: &CostMatrix) -> Assignment {
    if c.rows == 0 || c.cols == 0 {
        return Assignment::default();
    }
    let n = c.rows.max(c.cols);
    let padded: Vec<Vec<Lex>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| match (i < c.rows && j < c.cols).then(|| c.get(i, j)).flatten() {
                    Some(cost) => Lex { gated: 0, cost },
                    None => Lex { gated: 1, cost: 0.0 },
                })
                .collect()
        })
        .collect();
    let pairs = kuhn_munkres(&padded)
        .into_iter()
        .enumerate()
        .filter(|&(i, j)| i < c.rows && j < c.cols && c.get(i, j).is_some())
        .collect();
    Assignment::from_pairs(pairs, c)
}

/// Repeatedly takes the globally cheapest remaining entry, ties going to the
/// lowest `(row, col)`, until no allowed entry is left.
pub fn greedy_match(c: &CostMatrix) -> Assignment {
    let mut entries: Vec<(f64, usize, usize)> = (0..c.rows)
        .flat_map(|i| (0..c.cols).filter_map(move |j| c.get(i, j).map(|v| (v, i, j))))
        .collect();
    entries.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2))));
    let mut row_used = vec![false; c.rows];
    let mut col_used = vec![false; c.cols];
    let mut pairs = Vec::new();
    for (_, i, j) in entries {
        if !row_used[i] && !col_used[j] {
            row_used[i] = true;
            col_used[j] = true;
            pairs.push((i, j));
        }
    }
    Assignment::from_pairs(pairs, c)
}
