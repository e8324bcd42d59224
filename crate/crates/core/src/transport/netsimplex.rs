//! Primal network simplex for uncapacitated min-cost flow with integer
//! supplies and integer costs.
//!
//! The spanning tree is stored with parent/thread/successor arrays and an
//! artificial root joined to every node, and entering arcs are chosen by
//! block search. Arcs can be appended after a solve and the solve resumed
//! from the previous basis.

use crate::error::{Error, Result};

const NONE: usize = usize::MAX;
const INF: i64 = i64::MAX;
const STATE_TREE: i8 = 0;
const STATE_LOWER: i8 = 1;
const DIR_UP: i64 = 1;
const DIR_DOWN: i64 = -1;

#[derive(Debug, Clone)]
pub struct NetworkSimplex {
    node_num: usize,
    supply: Vec<i64>,
    art_cost: i64,
    max_cost: i64,
    source: Vec<usize>,
    target: Vec<usize>,
    cost: Vec<i64>,
    flow: Vec<i64>,
    state: Vec<i8>,
    pi: Vec<i64>,
    parent: Vec<usize>,
    pred: Vec<usize>,
    thread: Vec<usize>,
    rev_thread: Vec<usize>,
    succ_num: Vec<usize>,
    last_succ: Vec<usize>,
    pred_dir: Vec<i64>,
    dirty_revs: Vec<usize>,
    initialized: bool,
    next_arc: usize,
    pivots: u64,
    // Pivot scratch state.
    in_arc: usize,
    join: usize,
    u_in: usize,
    v_in: usize,
    u_out: usize,
    delta: i64,
}

impl NetworkSimplex {
    /// Nodes `0..supply.len()`; positive supply is a source. Supplies must
    /// sum to zero and every arc cost must lie in `[0, max_cost]`.
    pub fn new(supply: Vec<i64>, max_cost: i64) -> Result<Self> {
        if supply.iter().sum::<i64>() != 0 {
            return Err(Error::InvalidParameter("supplies must sum to zero".into()));
        }
        let n = supply.len();
        let art_cost = (max_cost + 1)
            .checked_mul(n as i64 + 1)
            .filter(|v| *v < INF / 8)
            .ok_or_else(|| Error::InvalidParameter("cost range too large".into()))?;
        Ok(Self {
            node_num: n,
            supply,
            art_cost,
            max_cost,
            source: vec![0; n],
            target: vec![0; n],
            cost: vec![0; n],
            flow: vec![0; n],
            state: vec![STATE_TREE; n],
            pi: vec![0; n + 1],
            parent: vec![NONE; n + 1],
            pred: vec![NONE; n + 1],
            thread: vec![0; n + 1],
            rev_thread: vec![0; n + 1],
            succ_num: vec![0; n + 1],
            last_succ: vec![0; n + 1],
            pred_dir: vec![0; n + 1],
            dirty_revs: Vec::new(),
            initialized: false,
            next_arc: n,
            pivots: 0,
            in_arc: NONE,
            join: NONE,
            u_in: NONE,
            v_in: NONE,
            u_out: NONE,
            delta: 0,
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_num
    }

    pub fn arc_count(&self) -> usize {
        self.source.len() - self.node_num
    }

    pub fn pivots(&self) -> u64 {
        self.pivots
    }

    /// Adds the arc u → v and returns its index.
    pub fn add_arc(&mut self, u: usize, v: usize, cost: i64) -> usize {
        assert!(u < self.node_num && v < self.node_num && (0..=self.max_cost).contains(&cost));
        self.source.push(u);
        self.target.push(v);
        self.cost.push(cost);
        self.flow.push(0);
        self.state.push(STATE_LOWER);
        self.source.len() - 1 - self.node_num
    }

    pub fn arc(&self, a: usize) -> (usize, usize, i64) {
        let e = a + self.node_num;
        (self.source[e], self.target[e], self.cost[e])
    }

    pub fn flow(&self, a: usize) -> i64 {
        self.flow[a + self.node_num]
    }

    /// Node potential π; at optimum c(u,v) + π(u) − π(v) ≥ 0 on every arc.
    pub fn potential(&self, u: usize) -> i64 {
        self.pi[u]
    }

    pub fn reduced_cost(&self, u: usize, v: usize, cost: i64) -> i64 {
        cost + self.pi[u] - self.pi[v]
    }

    /// Flow still routed through the artificial root; positive when the
    /// current arc set cannot carry all supply.
    pub fn artificial_flow(&self) -> i64 {
        self.flow[..self.node_num].iter().sum()
    }

    pub fn total_cost(&self) -> i128 {
        (self.node_num..self.source.len()).map(|e| self.flow[e] as i128 * self.cost[e] as i128).sum()
    }

    fn init(&mut self) {
        let n = self.node_num;
        let root = n;
        for u in 0..n {
            let e = u;
            self.parent[u] = root;
            self.pred[u] = e;
            self.thread[u] = u + 1;
            self.rev_thread[u + 1] = u;
            self.succ_num[u] = 1;
            self.last_succ[u] = u;
            self.state[e] = STATE_TREE;
            if self.supply[u] >= 0 {
                self.pred_dir[u] = DIR_UP;
                self.pi[u] = 0;
                self.source[e] = u;
                self.target[e] = root;
                self.flow[e] = self.supply[u];
                self.cost[e] = 0;
            } else {
                self.pred_dir[u] = DIR_DOWN;
                self.pi[u] = self.art_cost;
                self.source[e] = root;
                self.target[e] = u;
                self.flow[e] = -self.supply[u];
                self.cost[e] = self.art_cost;
            }
        }
        self.parent[root] = NONE;
        self.pred[root] = NONE;
        self.thread[root] = 0;
        self.rev_thread[0] = root;
        self.succ_num[root] = n + 1;
        self.last_succ[root] = if n == 0 { root } else { root - 1 };
        self.pi[root] = 0;
        self.initialized = true;
    }

    /// Runs pivots until no arc has negative reduced cost.
    pub fn solve(&mut self) -> Result<()> {
        if !self.initialized {
            self.init();
        }
        let real = self.source.len() - self.node_num;
        let block = ((real as f64).sqrt() as usize).max(10);
        while self.find_entering_arc(block) {
            self.find_join_node();
            if !self.find_leaving_arc() {
                return Err(Error::Unsupported("unbounded flow problem".into()));
            }
            self.change_flow();
            self.update_tree_structure();
            self.update_potential();
            self.pivots += 1;
        }
        Ok(())
    }

    fn find_entering_arc(&mut self, block: usize) -> bool {
        let m0 = self.node_num;
        let m = self.source.len();
        if m == m0 {
            return false;
        }
        if self.next_arc < m0 || self.next_arc >= m {
            self.next_arc = m0;
        }
        let mut cnt = block;
        let mut min = 0i64;
        let mut e = self.next_arc;
        for _ in 0..(m - m0) {
            let c = self.state[e] as i64 * (self.cost[e] + self.pi[self.source[e]] - self.pi[self.target[e]]);
            if c < min {
                min = c;
                self.in_arc = e;
            }
            e += 1;
            if e == m {
                e = m0;
            }
            cnt -= 1;
            if cnt == 0 {
                if min < 0 {
                    self.next_arc = e;
                    return true;
                }
                cnt = block;
            }
        }
        if min < 0 {
            self.next_arc = e;
            return true;
        }
        false
    }

    fn find_join_node(&mut self) {
        let mut u = self.source[self.in_arc];
        let mut v = self.target[self.in_arc];
        while u != v {
            if self.succ_num[u] < self.succ_num[v] {
                u = self.parent[u];
            } else {
                v = self.parent[v];
            }
        }
        self.join = u;
    }

    fn find_leaving_arc(&mut self) -> bool {
        let (first, second) = (self.source[self.in_arc], self.target[self.in_arc]);
        let mut delta = INF;
        let mut result = 0;
        let mut u = first;
        while u != self.join {
            let e = self.pred[u];
            let d = if self.pred_dir[u] == DIR_DOWN { INF } else { self.flow[e] };
            if d < delta {
                delta = d;
                self.u_out = u;
                result = 1;
            }
            u = self.parent[u];
        }
        let mut u = second;
        while u != self.join {
            let e = self.pred[u];
            let d = if self.pred_dir[u] == DIR_UP { INF } else { self.flow[e] };
            if d <= delta {
                delta = d;
                self.u_out = u;
                result = 2;
            }
            u = self.parent[u];
        }
        if result == 1 {
            self.u_in = first;
            self.v_in = second;
        } else {
            self.u_in = second;
            self.v_in = first;
        }
        self.delta = delta;
        result != 0 && delta < INF
    }

    fn change_flow(&mut self) {
        let delta = self.delta;
        if delta > 0 {
            let val = delta;
            let in_arc = self.in_arc;
            self.flow[in_arc] += val;
            let mut u = self.source[in_arc];
            while u != self.join {
                let e = self.pred[u];
                self.flow[e] -= self.pred_dir[u] * val;
                u = self.parent[u];
            }
            let mut u = self.target[in_arc];
            while u != self.join {
                let e = self.pred[u];
                self.flow[e] += self.pred_dir[u] * val;
                u = self.parent[u];
            }
        }
        self.state[self.in_arc] = STATE_TREE;
        let out = self.pred[self.u_out];
        debug_assert_eq!(self.flow[out], 0);
        self.state[out] = STATE_LOWER;
    }

    fn update_tree_structure(&mut self) {
        let (u_in, v_in, u_out, join, in_arc) = (self.u_in, self.v_in, self.u_out, self.join, self.in_arc);
        let old_rev_thread = self.rev_thread[u_out];
        let old_succ_num = self.succ_num[u_out];
        let old_last_succ = self.last_succ[u_out];
        let v_out = self.parent[u_out];

        if u_in == u_out {
            self.parent[u_in] = v_in;
            self.pred[u_in] = in_arc;
            self.pred_dir[u_in] = if u_in == self.source[in_arc] { DIR_UP } else { DIR_DOWN };
            if self.thread[v_in] != u_out {
                let mut after = self.thread[old_last_succ];
                self.thread[old_rev_thread] = after;
                self.rev_thread[after] = old_rev_thread;
                after = self.thread[v_in];
                self.thread[v_in] = u_out;
                self.rev_thread[u_out] = v_in;
                self.thread[old_last_succ] = after;
                self.rev_thread[after] = old_last_succ;
            }
        } else {
            let thread_continue = if old_rev_thread == v_in {
                self.thread[old_last_succ]
            } else {
                self.thread[v_in]
            };
            let mut stem = u_in;
            let mut par_stem = v_in;
            let mut last = self.last_succ[u_in];
            let mut after = self.thread[last];
            self.thread[v_in] = u_in;
            self.dirty_revs.clear();
            self.dirty_revs.push(v_in);
            while stem != u_out {
                let next_stem = self.parent[stem];
                self.thread[last] = next_stem;
                self.dirty_revs.push(last);

                let before = self.rev_thread[stem];
                self.thread[before] = after;
                self.rev_thread[after] = before;

                self.parent[stem] = par_stem;
                par_stem = stem;
                stem = next_stem;

                last = if self.last_succ[stem] == self.last_succ[par_stem] {
                    self.rev_thread[par_stem]
                } else {
                    self.last_succ[stem]
                };
                after = self.thread[last];
            }
            self.parent[u_out] = par_stem;
            self.thread[last] = thread_continue;
            self.rev_thread[thread_continue] = last;
            self.last_succ[u_out] = last;

            if old_rev_thread != v_in {
                self.thread[old_rev_thread] = after;
                self.rev_thread[after] = old_rev_thread;
            }

            for i in 0..self.dirty_revs.len() {
                let u = self.dirty_revs[i];
                let t = self.thread[u];
                self.rev_thread[t] = u;
            }

            let mut tmp_sc = 0usize;
            let tmp_ls = self.last_succ[u_out];
            let mut u = u_out;
            while u != u_in {
                let p = self.parent[u];
                self.pred[u] = self.pred[p];
                self.pred_dir[u] = -self.pred_dir[p];
                tmp_sc = tmp_sc + self.succ_num[u] - self.succ_num[p];
                self.succ_num[u] = tmp_sc;
                self.last_succ[p] = tmp_ls;
                u = p;
            }
            self.pred[u_in] = in_arc;
            self.pred_dir[u_in] = if u_in == self.source[in_arc] { DIR_UP } else { DIR_DOWN };
            self.succ_num[u_in] = old_succ_num;
        }

        let up_limit_out = if self.last_succ[join] == v_in { join } else { NONE };
        let last_succ_out = self.last_succ[u_out];
        let mut u = v_in;
        while u != NONE && self.last_succ[u] == v_in {
            self.last_succ[u] = last_succ_out;
            u = self.parent[u];
        }

        if join != old_rev_thread && v_in != old_rev_thread {
            let mut u = v_out;
            while u != up_limit_out && u != NONE && self.last_succ[u] == old_last_succ {
                self.last_succ[u] = old_rev_thread;
                u = self.parent[u];
            }
        } else if last_succ_out != old_last_succ {
            let mut u = v_out;
            while u != up_limit_out && u != NONE && self.last_succ[u] == old_last_succ {
                self.last_succ[u] = last_succ_out;
                u = self.parent[u];
            }
        }

        let mut u = v_in;
        while u != join {
            self.succ_num[u] += old_succ_num;
            u = self.parent[u];
        }
        let mut u = v_out;
        while u != join {
            self.succ_num[u] -= old_succ_num;
            u = self.parent[u];
        }
    }

    fn update_potential(&mut self) {
        let u_in = self.u_in;
        let sigma = self.pi[self.v_in] - self.pi[u_in] - self.pred_dir[u_in] * self.cost[self.in_arc];
        let end = self.thread[self.last_succ[u_in]];
        let mut u = u_in;
        while u != end {
            self.pi[u] += sigma;
            u = self.thread[u];
        }
    }

    /// Checks the spanning-tree bookkeeping and optimality conditions;
    /// used by the test suite.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let n = self.node_num;
        let root = n;
        // Thread visits every node once starting from the root.
        let mut seen = vec![false; n + 1];
        let mut u = root;
        for _ in 0..=n {
            if seen[u] {
                return Err("thread revisits a node".into());
            }
            seen[u] = true;
            if self.rev_thread[self.thread[u]] != u {
                return Err("rev_thread inconsistent".into());
            }
            u = self.thread[u];
        }
        if u != root {
            return Err("thread is not a cycle".into());
        }
        // Subtree sizes from parents.
        let mut size = vec![1usize; n + 1];
        let mut order = Vec::with_capacity(n + 1);
        let mut u = root;
        for _ in 0..=n {
            order.push(u);
            u = self.thread[u];
        }
        for &u in order.iter().rev() {
            if u != root {
                size[self.parent[u]] += size[u];
            }
        }
        for u in 0..=n {
            if size[u] != self.succ_num[u] {
                return Err(format!("succ_num wrong at {u}"));
            }
        }
        for u in 0..n {
            let e = self.pred[u];
            let (s, t) = (self.source[e], self.target[e]);
            let ok = (self.pred_dir[u] == DIR_UP && s == u && t == self.parent[u])
                || (self.pred_dir[u] == DIR_DOWN && t == u && s == self.parent[u]);
            if !ok || self.state[e] != STATE_TREE {
                return Err(format!("pred arc wrong at {u}"));
            }
            if self.cost[e] + self.pi[s] - self.pi[t] != 0 {
                return Err(format!("tree arc with nonzero reduced cost at {u}"));
            }
        }
        let mut balance = self.supply.clone();
        balance.push(0);
        for e in 0..self.source.len() {
            if self.flow[e] < 0 {
                return Err("negative flow".into());
            }
            balance[self.source[e]] -= self.flow[e];
            balance[self.target[e]] += self.flow[e];
            if self.state[e] == STATE_LOWER && self.flow[e] != 0 {
                return Err("nonbasic arc carries flow".into());
            }
            if e >= n && self.state[e] == STATE_LOWER && self.cost[e] + self.pi[self.source[e]] - self.pi[self.target[e]] < 0 {
                return Err("negative reduced cost remains".into());
            }
        }
        if balance.iter().any(|&b| b != 0) {
            return Err("flow conservation violated".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::lsap;
    use rand::Rng;

    #[test]
    fn tiny_transport() {
        // Two sources (3, 1), two sinks (2, 2); optimum is 3·… by hand.
        let mut ns = NetworkSimplex::new(vec![3, 1, -2, -2], 10).unwrap();
        ns.add_arc(0, 2, 1);
        ns.add_arc(0, 3, 4);
        ns.add_arc(1, 2, 2);
        ns.add_arc(1, 3, 3);
        ns.solve().unwrap();
        ns.check_invariants().unwrap();
        // 0→2: 2 (cost 2), 0→3: 1 (cost 4), 1→3: 1 (cost 3) = 9.
        assert_eq!(ns.total_cost(), 9);
        assert_eq!(ns.artificial_flow(), 0);
    }

    #[test]
    fn matches_assignment_on_expanded_instances() {
        // A transportation problem equals an assignment problem after
        // replicating every node by its supply.
        let mut rng = crate::rng::stream(11);
        for _ in 0..300 {
            let ns_src = rng.random_range(1..5usize);
            let ns_dst = rng.random_range(1..5usize);
            let mut supply: Vec<i64> = (0..ns_src).map(|_| rng.random_range(1..4)).collect();
            let total: i64 = supply.iter().sum();
            // Random composition of `total` into ns_dst positive-or-zero parts.
            let mut demand = vec![0i64; ns_dst];
            for _ in 0..total {
                demand[rng.random_range(0..ns_dst)] += 1;
            }
            let costs: Vec<i64> = (0..ns_src * ns_dst).map(|_| rng.random_range(0..50)).collect();
            let mut all = supply.clone();
            all.extend(demand.iter().map(|d| -d));
            let mut ns = NetworkSimplex::new(all, 50).unwrap();
            // Add arcs in two batches to exercise warm restarts.
            let order: Vec<(usize, usize)> = (0..ns_src).flat_map(|i| (0..ns_dst).map(move |j| (i, j))).collect();
            let half = order.len() / 2;
            for &(i, j) in &order[..half] {
                ns.add_arc(i, ns_src + j, costs[i * ns_dst + j]);
            }
            ns.solve().unwrap();
            ns.check_invariants().unwrap();
            for &(i, j) in &order[half..] {
                ns.add_arc(i, ns_src + j, costs[i * ns_dst + j]);
            }
            ns.solve().unwrap();
            ns.check_invariants().unwrap();
            assert_eq!(ns.artificial_flow(), 0);

            let rows: Vec<usize> = (0..ns_src).flat_map(|i| std::iter::repeat(i).take(supply[i] as usize)).collect();
            let cols: Vec<usize> = (0..ns_dst).flat_map(|j| std::iter::repeat(j).take(demand[j] as usize)).collect();
            let m: Vec<f64> = rows.iter().flat_map(|&i| cols.iter().map(move |&j| (i, j))).map(|(i, j)| costs[i * ns_dst + j] as f64).collect();
            let sol = lsap(&m, rows.len(), cols.len()).unwrap();
            let best: f64 = sol.iter().enumerate().map(|(r, &c)| m[r * cols.len() + c]).sum();
            assert_eq!(ns.total_cost() as f64, best);
            supply.clear();
        }
    }

    #[test]
    fn sparse_infeasible_reports_artificial_flow() {
        let mut ns = NetworkSimplex::new(vec![1, 1, -1, -1], 5).unwrap();
        ns.add_arc(0, 2, 1);
        ns.add_arc(1, 2, 1);
        ns.solve().unwrap();
        assert!(ns.artificial_flow() > 0);
        ns.add_arc(1, 3, 2);
        ns.solve().unwrap();
        assert_eq!(ns.artificial_flow(), 0);
        assert_eq!(ns.total_cost(), 3);
    }
}
