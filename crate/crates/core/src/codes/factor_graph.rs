use num_complex::Complex64;

use crate::error::{Error, Result};

/// Node budget for the Latin phase-rotation search.
pub const LATIN_NODE_BUDGET: u64 = 1_000_000;

/// Node budget for the balanced column selection.
const GRAPH_NODE_BUDGET: u64 = 1_000_000;

/// Binary resource-by-device incidence matrix (`K x N`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactorGraph {
    k: usize,
    n: usize,
    /// Row-major.
    bits: Vec<u8>,
}

impl FactorGraph {
    /// Wrap an explicit matrix given as rows. Entries must be 0 or 1; weight
    /// constraints are checked separately by [`validate`](Self::validate).
    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let k = rows.len();
        if k == 0 {
            return Err(Error::invalid("factor graph needs at least one row"));
        }
        let n = rows[0].len();
        let mut bits = Vec::with_capacity(k * n);
        for r in rows {
            if r.len() != n {
                return Err(Error::mismatch("factor graph row length", n, r.len()));
            }
            if r.iter().any(|&b| b > 1) {
                return Err(Error::invalid("factor graph entries must be 0 or 1"));
            }
            bits.extend_from_slice(r);
        }
        Ok(Self { k, n, bits })
    }

    fn from_supports(k: usize, supports: &[Vec<usize>]) -> Self {
        let n = supports.len();
        let mut bits = vec![0u8; k * n];
        for (c, s) in supports.iter().enumerate() {
            for &r in s {
                bits[r * n + c] = 1;
            }
        }
        Self { k, n, bits }
    }

    pub fn resources(&self) -> usize {
        self.k
    }

    pub fn devices(&self) -> usize {
        self.n
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.n + col] == 1
    }

    pub fn column_weight(&self, col: usize) -> usize {
        (0..self.k).filter(|&r| self.get(r, col)).count()
    }

    pub fn row_weight(&self, row: usize) -> usize {
        self.bits[row * self.n..(row + 1) * self.n]
            .iter()
            .filter(|&&b| b == 1)
            .count()
    }

    /// Resource indices occupied by device `col`, ascending.
    pub fn support(&self, col: usize) -> Vec<usize> {
        (0..self.k).filter(|&r| self.get(r, col)).collect()
    }

    /// Common column weight `U`, if all columns agree.
    pub fn column_degree(&self) -> Option<usize> {
        let u = self.column_weight(0);
        (1..self.n).all(|c| self.column_weight(c) == u).then_some(u)
    }

    /// Common row weight `d_f`, if all rows agree.
    pub fn row_degree(&self) -> Option<usize> {
        let d = self.row_weight(0);
        (1..self.k).all(|r| self.row_weight(r) == d).then_some(d)
    }

    /// Check that every column has weight `u` and every row `N*U/K`.
    pub fn validate(&self, u: usize) -> Result<()> {
        for c in 0..self.n {
            let w = self.column_weight(c);
            if w != u {
                return Err(Error::Infeasible(format!(
                    "column {c} has weight {w}, expected {u}"
                )));
            }
        }
        if (self.n * u) % self.k != 0 {
            return Err(Error::Infeasible(format!(
                "N*U = {} is not divisible by K = {}",
                self.n * u,
                self.k
            )));
        }
        let df = self.n * u / self.k;
        for r in 0..self.k {
            let w = self.row_weight(r);
            if w != df {
                return Err(Error::Infeasible(format!(
                    "row {r} has weight {w}, expected {df}"
                )));
            }
        }
        Ok(())
    }

    /// True when no two devices share the same resource pattern.
    pub fn columns_distinct(&self) -> bool {
        let mut seen: Vec<Vec<usize>> = (0..self.n).map(|c| self.support(c)).collect();
        seen.sort();
        seen.windows(2).all(|w| w[0] != w[1])
    }
}

fn binomial_u128(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    acc
}

struct GraphSearch {
    k: usize,
    u: usize,
    n: usize,
    cap: Vec<usize>,
    used: std::collections::HashSet<u128>,
    chosen: Vec<Vec<usize>>,
    nodes: u64,
}

impl GraphSearch {
    fn run(&mut self) -> Result<bool> {
        if self.chosen.len() == self.n {
            return Ok(true);
        }
        self.nodes += 1;
        if self.nodes > GRAPH_NODE_BUDGET {
            return Err(Error::SearchBudget {
                what: "balanced factor-graph selection",
                budget: GRAPH_NODE_BUDGET,
            });
        }
        let left = self.n - self.chosen.len();
        if self.cap.iter().any(|&c| c > left) {
            return Ok(false);
        }
        let forced: Vec<usize> = (0..self.k).filter(|&r| self.cap[r] == left).collect();
        if forced.len() > self.u {
            return Ok(false);
        }
        // most remaining capacity first, then lowest index
        let mut free: Vec<usize> = (0..self.k)
            .filter(|&r| self.cap[r] > 0 && self.cap[r] < left)
            .collect();
        free.sort_by(|&a, &b| self.cap[b].cmp(&self.cap[a]).then(a.cmp(&b)));
        let need = self.u - forced.len();
        if free.len() < need {
            return Ok(false);
        }
        let mut idx: Vec<usize> = (0..need).collect();
        loop {
            let mut rows: Vec<usize> = forced.clone();
            rows.extend(idx.iter().map(|&i| free[i]));
            rows.sort_unstable();
            let mask = rows.iter().fold(0u128, |m, &r| m | (1u128 << r));
            if !self.used.contains(&mask) {
                self.used.insert(mask);
                for &r in &rows {
                    self.cap[r] -= 1;
                }
                self.chosen.push(rows.clone());
                if self.run()? {
                    return Ok(true);
                }
                self.chosen.pop();
                for &r in &rows {
                    self.cap[r] += 1;
                }
                self.used.remove(&mask);
            }
            if !next_combination(&mut idx, free.len()) {
                return Ok(false);
            }
        }
    }
}

/// Advance `idx` (strictly increasing indices into `0..n`) to the next
/// combination in lexicographic order.
fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    if k == 0 {
        return false;
    }
    let mut i = k;
    while i > 0 {
        i -= 1;
        if idx[i] < n - k + i {
            idx[i] += 1;
            for j in (i + 1)..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Balanced selection of `n` distinct `u`-subsets of `k` resources such that
/// every resource is used by exactly `n*u/k` devices.
pub fn build_factor_graph(k: usize, n: usize, u: usize) -> Result<FactorGraph> {
    if k == 0 || n == 0 || u == 0 || u > k {
        return Err(Error::invalid(format!("invalid factor graph shape K={k}, N={n}, U={u}")));
    }
    if k > 128 {
        return Err(Error::invalid("at most 128 resources are supported"));
    }
    if (n * u) % k != 0 {
        return Err(Error::Infeasible(format!(
            "N*U = {} is not divisible by K = {k}",
            n * u
        )));
    }
    if (n as u128) > binomial_u128(k, u) {
        return Err(Error::Infeasible(format!(
            "N = {n} exceeds the {} distinct {u}-subsets of {k} resources",
            binomial_u128(k, u)
        )));
    }
    let df = n * u / k;
    let mut search = GraphSearch {
        k,
        u,
        n,
        cap: vec![df; k],
        used: Default::default(),
        chosen: Vec::with_capacity(n),
        nodes: 0,
    };
    if !search.run()? {
        return Err(Error::Infeasible(format!(
            "no balanced factor graph exists for K={k}, N={n}, U={u}"
        )));
    }
    Ok(FactorGraph::from_supports(k, &search.chosen))
}

/// `exp(j 2 pi (i-1) / (R d_f))` for the 1-based rotation index `i`.
pub fn phase_rotation(i: usize, r: usize, df: usize) -> Complex64 {
    let angle = 2.0 * std::f64::consts::PI * (i as f64 - 1.0) / (r * df) as f64;
    Complex64::from_polar(1.0, angle)
}

/// Factor graph whose nonzeros carry phase-rotation indices.
#[derive(Debug, Clone, PartialEq)]
pub struct RotatedFactorGraph {
    graph: FactorGraph,
    r: usize,
    df: usize,
    /// Row-major; 0 for empty cells, otherwise the 1-based rotation index.
    symbols: Vec<usize>,
}

impl RotatedFactorGraph {
    /// Wrap an explicit symbol pattern (0 = empty cell, `i` = rotation
    /// `i`), checking only shapes; use [`validate`](Self::validate) for the
    /// Latin property.
    pub fn from_symbols(rows: &[Vec<usize>], r: usize) -> Result<Self> {
        let bits: Vec<Vec<u8>> = rows
            .iter()
            .map(|row| row.iter().map(|&s| u8::from(s != 0)).collect())
            .collect();
        let graph = FactorGraph::from_rows(&bits)?;
        let df = graph.row_weight(0);
        Ok(Self {
            graph,
            r,
            df,
            symbols: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn graph(&self) -> &FactorGraph {
        &self.graph
    }

    pub fn row_degree(&self) -> usize {
        self.df
    }

    pub fn points(&self) -> usize {
        self.r
    }

    /// 1-based rotation index at a cell, or 0 if empty.
    pub fn symbol(&self, row: usize, col: usize) -> usize {
        self.symbols[row * self.graph.n + col]
    }

    pub fn value(&self, row: usize, col: usize) -> Complex64 {
        match self.symbol(row, col) {
            0 => Complex64::new(0.0, 0.0),
            s => phase_rotation(s, self.r, self.df),
        }
    }

    /// Nonzero rotations of column `col`, top to bottom.
    pub fn column_rotations(&self, col: usize) -> Vec<Complex64> {
        self.graph
            .support(col)
            .into_iter()
            .map(|r| self.value(r, col))
            .collect()
    }

    /// Check that the support matches the factor graph, every symbol is in
    /// `1..=d_f`, and no symbol repeats within a row or column.
    pub fn validate(&self) -> Result<()> {
        let (k, n) = (self.graph.k, self.graph.n);
        for r in 0..k {
            for c in 0..n {
                let s = self.symbol(r, c);
                if (s != 0) != self.graph.get(r, c) {
                    return Err(Error::Infeasible(format!("support mismatch at ({r}, {c})")));
                }
                if s > self.df {
                    return Err(Error::Infeasible(format!(
                        "rotation index {s} at ({r}, {c}) exceeds d_f = {}",
                        self.df
                    )));
                }
            }
        }
        for r in 0..k {
            let mut seen = vec![false; self.df + 1];
            for c in 0..n {
                let s = self.symbol(r, c);
                if s != 0 {
                    if seen[s] {
                        return Err(Error::Infeasible(format!("rotation {s} repeats in row {r}")));
                    }
                    seen[s] = true;
                }
            }
        }
        for c in 0..n {
            let mut seen = vec![false; self.df + 1];
            for r in 0..k {
                let s = self.symbol(r, c);
                if s != 0 {
                    if seen[s] {
                        return Err(Error::Infeasible(format!(
                            "rotation {s} repeats in column {c}"
                        )));
                    }
                    seen[s] = true;
                }
            }
        }
        Ok(())
    }
}

struct LatinSearch<'a> {
    graph: &'a FactorGraph,
    cells: Vec<(usize, usize)>,
    df: usize,
    row_used: Vec<u64>,
    col_used: Vec<u64>,
    symbols: Vec<usize>,
    nodes: u64,
    budget: u64,
}

impl LatinSearch<'_> {
    fn run(&mut self, pos: usize) -> Result<bool> {
        if pos == self.cells.len() {
            return Ok(true);
        }
        self.nodes += 1;
        if self.nodes > self.budget {
            return Err(Error::SearchBudget {
                what: "Latin phase-rotation assignment",
                budget: self.budget,
            });
        }
        let (r, c) = self.cells[pos];
        let blocked = self.row_used[r] | self.col_used[c];
        for s in 1..=self.df {
            let bit = 1u64 << s;
            if blocked & bit != 0 {
                continue;
            }
            self.row_used[r] |= bit;
            self.col_used[c] |= bit;
            self.symbols[r * self.graph.n + c] = s;
            if self.run(pos + 1)? {
                return Ok(true);
            }
            self.row_used[r] &= !bit;
            self.col_used[c] &= !bit;
            self.symbols[r * self.graph.n + c] = 0;
        }
        Ok(false)
    }
}

/// Assign rotation indices to the nonzeros of `graph` so that none repeats
/// within a row or column, by row-by-row backtracking.
pub fn assign_phase_rotations(graph: &FactorGraph, r: usize) -> Result<RotatedFactorGraph> {
    assign_phase_rotations_with_budget(graph, r, LATIN_NODE_BUDGET)
}

pub fn assign_phase_rotations_with_budget(
    graph: &FactorGraph,
    r: usize,
    budget: u64,
) -> Result<RotatedFactorGraph> {
    let df = graph
        .row_degree()
        .ok_or_else(|| Error::Infeasible("factor graph rows have unequal weight".into()))?;
    let u = graph
        .column_degree()
        .ok_or_else(|| Error::Infeasible("factor graph columns have unequal weight".into()))?;
    if u > df {
        return Err(Error::Infeasible(format!(
            "column weight {u} exceeds the {df} available rotations"
        )));
    }
    if df >= 63 {
        return Err(Error::invalid("row weight must be below 63"));
    }
    let mut cells = Vec::new();
    for row in 0..graph.k {
        for col in 0..graph.n {
            if graph.get(row, col) {
                cells.push((row, col));
            }
        }
    }
    let mut search = LatinSearch {
        graph,
        cells,
        df,
        row_used: vec![0; graph.k],
        col_used: vec![0; graph.n],
        symbols: vec![0; graph.k * graph.n],
        nodes: 0,
        budget,
    };
    if !search.run(0)? {
        return Err(Error::Infeasible("no Latin rotation assignment exists".into()));
    }
    Ok(RotatedFactorGraph {
        graph: graph.clone(),
        r,
        df,
        symbols: search.symbols,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn example_graph() -> Vec<Vec<u8>> {
        vec![
            vec![1, 1, 1, 1, 0, 0, 0, 0],
            vec![0, 0, 0, 0, 1, 1, 1, 1],
            vec![0, 1, 0, 0, 0, 1, 1, 1],
            vec![1, 0, 1, 1, 1, 0, 0, 0],
            vec![0, 1, 0, 0, 0, 1, 1, 1],
            vec![1, 0, 1, 1, 1, 0, 0, 0],
        ]
    }

    #[test]
    fn example_graph_meets_weights_but_repeats_columns() {
        let g = FactorGraph::from_rows(&example_graph()).unwrap();
        g.validate(3).unwrap();
        assert_eq!(g.row_degree(), Some(4));
        assert!(!g.columns_distinct());
    }

    #[test]
    fn example_rotation_pattern_is_latin() {
        let rows = vec![
            vec![1, 2, 3, 4, 0, 0, 0, 0],
            vec![0, 0, 0, 0, 1, 2, 3, 4],
            vec![0, 3, 0, 0, 0, 4, 1, 2],
            vec![4, 0, 1, 2, 3, 0, 0, 0],
            vec![0, 4, 0, 0, 0, 1, 2, 3],
            vec![3, 0, 4, 1, 2, 0, 0, 0],
        ];
        let f = RotatedFactorGraph::from_symbols(&rows, 4).unwrap();
        f.validate().unwrap();
        let mut bad = rows.clone();
        bad[3][0] = 1;
        bad[3][2] = 4;
        let f = RotatedFactorGraph::from_symbols(&bad, 4).unwrap();
        assert!(f.validate().is_err());
    }

    #[test]
    fn balanced_graph_small() {
        let g = build_factor_graph(6, 8, 3).unwrap();
        g.validate(3).unwrap();
        assert!(g.columns_distinct());
        assert_eq!(g.row_degree(), Some(4));
    }

    #[test]
    fn full_enumeration_when_n_is_binomial() {
        let g = build_factor_graph(6, 20, 3).unwrap();
        g.validate(3).unwrap();
        assert!(g.columns_distinct());
        assert_eq!(g.row_degree(), Some(10));
        let mut all: Vec<Vec<usize>> = (0..20).map(|c| g.support(c)).collect();
        all.sort();
        let mut oracle = Vec::new();
        for a in 0..6 {
            for b in (a + 1)..6 {
                for c in (b + 1)..6 {
                    oracle.push(vec![a, b, c]);
                }
            }
        }
        assert_eq!(all, oracle);
    }

    #[test]
    fn rejects_infeasible_shapes() {
        assert!(matches!(build_factor_graph(6, 7, 3), Err(Error::Infeasible(_))));
        assert!(matches!(build_factor_graph(6, 22, 3), Err(Error::Infeasible(_))));
    }

    #[test]
    fn rotation_values() {
        assert_eq!(phase_rotation(1, 4, 4), Complex64::new(1.0, 0.0));
        let r2 = phase_rotation(2, 4, 4);
        assert!((r2.re - 0.923_879_532_511_286_7).abs() < 1e-12);
        assert!((r2.im - 0.382_683_432_365_089_8).abs() < 1e-12);
    }

    #[test]
    fn latin_assignment_for_example_and_large_preset() {
        let g = FactorGraph::from_rows(&example_graph()).unwrap();
        assign_phase_rotations(&g, 4).unwrap().validate().unwrap();
        let g = build_factor_graph(30, 90, 3).unwrap();
        let f = assign_phase_rotations(&g, 4).unwrap();
        f.validate().unwrap();
        assert_eq!(f.row_degree(), 9);
    }

    #[test]
    fn latin_assignment_requires_enough_rotations() {
        // K = 3, N = 1, U = 3: each row holds a single device, d_f = 1 < U
        let g = FactorGraph::from_rows(&[vec![1], vec![1], vec![1]]).unwrap();
        assert!(matches!(assign_phase_rotations(&g, 4), Err(Error::Infeasible(_))));
    }
}
