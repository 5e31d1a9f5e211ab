//! Exact min-cost bipartite transportation by network simplex with
//! implicit Euclidean costs. Supports the desk-scale instances produced by
//! coarsened 2D joint grids (a few thousand atoms per side).

use crate::error::{Error, Result};

/// A weighted point mass in the plane.
#[derive(Debug, Clone, Copy)]
pub struct Atom {
    pub pos: [f64; 2],
    pub mass: f64,
}

impl Atom {
    pub fn new(x: f64, y: f64, mass: f64) -> Self {
        Atom { pos: [x, y], mass }
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    (dx * dx + dy * dy).sqrt()
}

/// Optimal coupling between two atom lists with equal total mass.
#[derive(Debug, Clone)]
pub struct TransportPlan {
    /// (source index, target index, mass) triples of the optimal coupling.
    pub pairs: Vec<(usize, usize, f64)>,
    pub cost: f64,
}

impl TransportPlan {
    pub fn write_csv(&self, out: &mut impl std::io::Write) -> std::io::Result<()> {
        writeln!(out, "source,target,mass")?;
        for &(i, j, m) in &self.pairs {
            writeln!(out, "{i},{j},{m:.17e}")?;
        }
        Ok(())
    }
}

const MAX_ATOMS: usize = 5000;

/// Exact W1 between discrete measures. Atoms at bit-identical positions
/// are cancelled first (mass in common transports to itself at zero cost),
/// then the remainder is solved by network simplex.
pub fn w1_discrete(source: &[Atom], target: &[Atom]) -> Result<TransportPlan> {
    let live = |atoms: &[Atom]| atoms.iter().filter(|a| a.mass > 0.0).count();
    if live(source) > MAX_ATOMS || live(target) > MAX_ATOMS {
        return Err(Error::InstanceTooLarge(format!(
            "{} x {} atoms exceed the {MAX_ATOMS} limit; coarsen the grids first",
            live(source),
            live(target)
        )));
    }
    let ms: f64 = source.iter().map(|a| a.mass).sum();
    let mt: f64 = target.iter().map(|a| a.mass).sum();
    if (ms - mt).abs() > 1e-9 * ms.max(mt).max(1.0) {
        return Err(Error::Precondition(format!(
            "total masses differ: {ms} vs {mt}"
        )));
    }

    // cancel collocated mass
    let key = |p: [f64; 2]| (p[0].to_bits(), p[1].to_bits());
    let mut by_pos: std::collections::HashMap<(u64, u64), usize> = std::collections::HashMap::new();
    for (j, t) in target.iter().enumerate() {
        if t.mass > 0.0 {
            by_pos.insert(key(t.pos), j);
        }
    }
    let mut pairs: Vec<(usize, usize, f64)> = Vec::new();
    let mut s_rem: Vec<(usize, Atom)> = Vec::new();
    let mut t_used = vec![0.0; target.len()];
    for (i, s) in source.iter().enumerate() {
        if s.mass <= 0.0 {
            continue;
        }
        if let Some(&j) = by_pos.get(&key(s.pos)) {
            let common = s.mass.min(target[j].mass - t_used[j]);
            if common > 0.0 {
                pairs.push((i, j, common));
                t_used[j] += common;
                if s.mass > common {
                    s_rem.push((i, Atom { pos: s.pos, mass: s.mass - common }));
                }
                continue;
            }
        }
        s_rem.push((i, *s));
    }
    let t_rem: Vec<(usize, Atom)> = target
        .iter()
        .enumerate()
        .filter(|(j, t)| t.mass - t_used[*j] > 0.0)
        .map(|(j, t)| (j, Atom { pos: t.pos, mass: t.mass - t_used[j] }))
        .collect();

    if s_rem.is_empty() || t_rem.is_empty() {
        return Ok(TransportPlan { pairs, cost: 0.0 });
    }

    let supplies: Vec<f64> = s_rem.iter().map(|(_, a)| a.mass).collect();
    let demands: Vec<f64> = t_rem.iter().map(|(_, a)| a.mass).collect();
    let spos: Vec<[f64; 2]> = s_rem.iter().map(|(_, a)| a.pos).collect();
    let tpos: Vec<[f64; 2]> = t_rem.iter().map(|(_, a)| a.pos).collect();
    let (flows, cost) = network_simplex(&spos, &supplies, &tpos, &demands)?;
    for (i, j, f) in flows {
        pairs.push((s_rem[i].0, t_rem[j].0, f));
    }
    Ok(TransportPlan { pairs, cost })
}

/// Network simplex for the balanced transportation problem with Euclidean
/// costs. Returns the nonzero flows and the optimal cost.
pub fn network_simplex(
    spos: &[[f64; 2]],
    supplies: &[f64],
    tpos: &[[f64; 2]],
    demands: &[f64],
) -> Result<(Vec<(usize, usize, f64)>, f64)> {
    let ns = supplies.len();
    let nt = demands.len();
    let n = ns + nt;
    let total: f64 = supplies.iter().sum();

    // lexicographic-style perturbation to avoid degenerate cycling
    let eta = 1e-12 * total / ns as f64;
    let s: Vec<f64> = supplies.iter().map(|&v| v + eta).collect();
    let mut d: Vec<f64> = demands.iter().map(|&v| v + eta * ns as f64 / nt as f64).collect();
    // restore exact balance multiplicatively: rounding in the two mass sums
    // can exceed any single tiny demand, so no atom may absorb it alone
    let ssum: f64 = s.iter().sum();
    let dsum: f64 = d.iter().sum();
    let rescale = ssum / dsum;
    for dj in d.iter_mut() {
        *dj *= rescale;
    }

    let cost = |i: usize, j: usize| dist(spos[i], tpos[j]);
    let cost_scale = {
        let mut m = 0.0_f64;
        for i in 0..ns.min(64) {
            for j in 0..nt.min(64) {
                m = m.max(cost(i, j));
            }
        }
        m.max(1e-9)
    };
    let tol = 1e-12 * cost_scale;

    // node indexing: 0..ns sources, ns..n sinks
    let mut parent: Vec<usize> = vec![usize::MAX; n];
    let mut pflow: Vec<f64> = vec![0.0; n];
    let mut depth: Vec<u32> = vec![0; n];
    let mut pi: Vec<f64> = vec![0.0; n];

    // northwest-corner initial spanning tree; each basic cell hangs the
    // exhausted node off the other, the final cell leaves the last sink as
    // the root
    {
        let mut srem = s.clone();
        let mut drem = d.clone();
        let mut i = 0;
        let mut j = 0;
        loop {
            let f = srem[i].min(drem[j]).max(0.0);
            srem[i] -= f;
            drem[j] -= f;
            if i == ns - 1 && j == nt - 1 {
                parent[i] = ns + j;
                pflow[i] = f;
                break;
            }
            if j == nt - 1 || (i < ns - 1 && srem[i] <= drem[j]) {
                parent[i] = ns + j;
                pflow[i] = f;
                i += 1;
            } else {
                parent[ns + j] = i;
                pflow[ns + j] = f;
                j += 1;
            }
        }
    }
    let root = ns + nt - 1;
    debug_assert!(parent[root] == usize::MAX);

    let mut children: Vec<Vec<u32>> = vec![Vec::new(); n];
    let mut stack: Vec<usize> = Vec::with_capacity(n);
    let update_tree = |parent: &[usize],
                           children: &mut Vec<Vec<u32>>,
                           depth: &mut [u32],
                           pi: &mut [f64],
                           stack: &mut Vec<usize>| {
        for c in children.iter_mut() {
            c.clear();
        }
        for v in 0..n {
            if v != root {
                children[parent[v]].push(v as u32);
            }
        }
        depth[root] = 0;
        pi[root] = 0.0;
        stack.clear();
        stack.push(root);
        while let Some(v) = stack.pop() {
            for &cu in &children[v] {
                let c = cu as usize;
                depth[c] = depth[v] + 1;
                let (si, tj) = if c < ns { (c, v - ns) } else { (v, c - ns) };
                pi[c] = cost(si, tj) - pi[v];
                stack.push(c);
            }
        }
    };
    update_tree(&parent, &mut children, &mut depth, &mut pi, &mut stack);

    let n_arcs = ns * nt;
    let block = 8192.min(n_arcs);
    let mut cursor = 0usize;
    let max_pivots = 200 * n + 200_000;
    let mut pivots = 0usize;

    loop {
        // block pricing: most negative reduced cost within a block,
        // sweeping blocks until one yields a candidate
        let mut best_arc = None;
        let mut best_rc = -tol;
        let mut scanned = 0;
        while scanned < n_arcs {
            let end = (cursor + block).min(n_arcs);
            for a in cursor..end {
                let i = a / nt;
                let j = a % nt;
                let rc = cost(i, j) - pi[i] - pi[ns + j];
                if rc < best_rc {
                    best_rc = rc;
                    best_arc = Some((i, j));
                }
            }
            scanned += end - cursor;
            cursor = if end == n_arcs { 0 } else { end };
            if best_arc.is_some() {
                break;
            }
        }
        let Some((ei, ej)) = best_arc else { break };
        pivots += 1;
        if pivots > max_pivots {
            return Err(Error::SolverFailure(format!(
                "network simplex exceeded {max_pivots} pivots"
            )));
        }

        // cycle: tree path between the entering arc's endpoints
        let (mut a, mut b) = (ei, ns + ej);
        let mut path_a: Vec<usize> = Vec::new(); // nodes climbing from source side
        let mut path_b: Vec<usize> = Vec::new();
        while depth[a] > depth[b] {
            path_a.push(a);
            a = parent[a];
        }
        while depth[b] > depth[a] {
            path_b.push(b);
            b = parent[b];
        }
        while a != b {
            path_a.push(a);
            a = parent[a];
            path_b.push(b);
            b = parent[b];
        }
        // theta flows ei -> ej on the entering arc and returns along the
        // tree path ej -> apex -> ei. A tree arc with child c changes by
        // +theta when the cycle traverses it source-endpoint ->
        // sink-endpoint, by -theta otherwise; the cycle runs child->parent
        // on the ej-side climb and parent->child on the ei side.
        let mut theta = f64::INFINITY;
        let mut leaving: Option<usize> = None; // child node of the leaving arc
        let arc_delta = |child: usize, on_source_side: bool| -> f64 {
            // cycle traverses child->parent on the sink side,
            // parent->child on the source side
            let child_is_source = child < ns;
            let trav_child_to_parent = !on_source_side;
            // arc direction is from its source endpoint to its sink
            // endpoint; child and parent are in opposite classes
            let along_direction = trav_child_to_parent == child_is_source;
            if along_direction {
                1.0
            } else {
                -1.0
            }
        };
        for &v in &path_a {
            if arc_delta(v, true) < 0.0 && pflow[v] < theta {
                theta = pflow[v];
                leaving = Some(v);
            }
        }
        for &v in &path_b {
            if arc_delta(v, false) < 0.0 && pflow[v] < theta {
                theta = pflow[v];
                leaving = Some(v);
            }
        }
        let Some(leave) = leaving else {
            return Err(Error::SolverFailure("unbounded pivot in network simplex".into()));
        };
        for &v in &path_a {
            pflow[v] += arc_delta(v, true) * theta;
        }
        for &v in &path_b {
            pflow[v] += arc_delta(v, false) * theta;
        }

        // re-root the cut subtree at the entering arc's endpoint inside it
        let on_a_side = path_a.contains(&leave);
        let (sub_end, attach_to) = if on_a_side { (ei, ns + ej) } else { (ns + ej, ei) };
        // reverse parent pointers from sub_end up to `leave`
        let mut v = sub_end;
        let mut prev = attach_to;
        let mut prev_flow = theta;
        loop {
            let next = parent[v];
            let next_flow = pflow[v];
            parent[v] = prev;
            pflow[v] = prev_flow;
            if v == leave {
                break;
            }
            prev = v;
            prev_flow = next_flow;
            v = next;
        }
        update_tree(&parent, &mut children, &mut depth, &mut pi, &mut stack);
    }

    // read off flows on tree arcs, removing the perturbation haze
    let mut flows = Vec::new();
    let mut cost_total = 0.0;
    let floor = 10.0 * eta * (n as f64);
    for v in 0..n {
        if v == root {
            continue;
        }
        let p = parent[v];
        let (si, tj) = if v < ns { (v, p - ns) } else { (p, v - ns) };
        let f = pflow[v];
        if f > floor {
            cost_total += f * cost(si, tj);
            flows.push((si, tj, f));
        }
    }
    Ok((flows, cost_total))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// 1D discrete W1 oracle: int |F_a - F_b| over the sorted support.
    fn w1_line_oracle(source: &[Atom], target: &[Atom]) -> f64 {
        let mut events: Vec<(f64, f64)> = source
            .iter()
            .map(|a| (a.pos[0], a.mass))
            .chain(target.iter().map(|a| (a.pos[0], -a.mass)))
            .collect();
        events.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut acc = 0.0_f64;
        let mut cdf_diff = 0.0_f64;
        let mut last_x = events[0].0;
        for (x, dm) in events {
            acc += cdf_diff.abs() * (x - last_x);
            cdf_diff += dm;
            last_x = x;
        }
        acc
    }

    /// Assignment oracle for n equal-mass atoms on each side: min over all
    /// permutations.
    fn assignment_oracle(spos: &[[f64; 2]], tpos: &[[f64; 2]]) -> f64 {
        let n = spos.len();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut best = f64::INFINITY;
        // Heap's algorithm
        fn heaps(k: usize, perm: &mut Vec<usize>, spos: &[[f64; 2]], tpos: &[[f64; 2]], best: &mut f64) {
            if k == 1 {
                let n = spos.len();
                let c: f64 = (0..n).map(|i| super::dist(spos[i], tpos[perm[i]])).sum();
                *best = best.min(c / n as f64);
                return;
            }
            for i in 0..k {
                heaps(k - 1, perm, spos, tpos, best);
                if k % 2 == 0 {
                    perm.swap(i, k - 1);
                } else {
                    perm.swap(0, k - 1);
                }
            }
        }
        heaps(n, &mut perm, spos, tpos, &mut best);
        best
    }

    #[test]
    fn identical_clouds_cost_zero() {
        let atoms = vec![Atom::new(0.3, -0.2, 0.5), Atom::new(-1.0, 2.0, 0.5)];
        let plan = w1_discrete(&atoms, &atoms).unwrap();
        assert_eq!(plan.cost, 0.0);
    }

    #[test]
    fn single_pair_is_mass_times_distance() {
        let s = vec![Atom::new(0.0, 0.0, 1.0)];
        let t = vec![Atom::new(3.0, 4.0, 1.0)];
        let plan = w1_discrete(&s, &t).unwrap();
        assert!((plan.cost - 5.0).abs() < 1e-9);
        assert_eq!(plan.pairs.len(), 1);
    }

    #[test]
    fn hand_checked_two_by_two() {
        // two sources at x = 0 and x = 2, one unit target at x = 1:
        // everything moves distance 1
        let s = vec![Atom::new(0.0, 0.0, 0.5), Atom::new(2.0, 0.0, 0.5)];
        let t = vec![Atom::new(1.0, 0.0, 1.0)];
        let plan = w1_discrete(&s, &t).unwrap();
        assert!((plan.cost - 1.0).abs() < 1e-10);
    }

    #[test]
    fn mass_mismatch_rejected() {
        let s = vec![Atom::new(0.0, 0.0, 1.0)];
        let t = vec![Atom::new(1.0, 0.0, 0.5)];
        assert!(w1_discrete(&s, &t).is_err());
    }

    #[test]
    fn symmetric_in_arguments() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cloud = |rng: &mut ChaCha8Rng, n: usize| -> Vec<Atom> {
            let mut atoms: Vec<Atom> = (0..n)
                .map(|_| Atom::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(0.1..1.0)))
                .collect();
            let tot: f64 = atoms.iter().map(|a| a.mass).sum();
            atoms.iter_mut().for_each(|a| a.mass /= tot);
            atoms
        };
        for _ in 0..10 {
            let a = cloud(&mut rng, 7);
            let b = cloud(&mut rng, 9);
            let ab = w1_discrete(&a, &b).unwrap().cost;
            let ba = w1_discrete(&b, &a).unwrap().cost;
            assert!((ab - ba).abs() < 1e-9, "{ab} vs {ba}");
        }
    }

    #[test]
    fn matches_line_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for trial in 0..50 {
            let n = rng.gen_range(2..12);
            let m = rng.gen_range(2..12);
            let cloud = |rng: &mut ChaCha8Rng, k: usize| -> Vec<Atom> {
                let mut atoms: Vec<Atom> = (0..k)
                    .map(|_| Atom::new(rng.gen_range(-3.0..3.0), 0.0, rng.gen_range(0.1..1.0)))
                    .collect();
                let tot: f64 = atoms.iter().map(|a| a.mass).sum();
                atoms.iter_mut().for_each(|a| a.mass /= tot);
                atoms
            };
            let a = cloud(&mut rng, n);
            let b = cloud(&mut rng, m);
            let got = w1_discrete(&a, &b).unwrap().cost;
            let want = w1_line_oracle(&a, &b);
            assert!((got - want).abs() < 1e-8, "trial {trial}: {got} vs oracle {want}");
        }
    }

    #[test]
    fn matches_assignment_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for trial in 0..40 {
            let n = rng.gen_range(2..6);
            let point = |rng: &mut ChaCha8Rng| [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            let spos: Vec<[f64; 2]> = (0..n).map(|_| point(&mut rng)).collect();
            let tpos: Vec<[f64; 2]> = (0..n).map(|_| point(&mut rng)).collect();
            let mass = 1.0 / n as f64;
            let s: Vec<Atom> = spos.iter().map(|&p| Atom { pos: p, mass }).collect();
            let t: Vec<Atom> = tpos.iter().map(|&p| Atom { pos: p, mass }).collect();
            let got = w1_discrete(&s, &t).unwrap().cost;
            let want = assignment_oracle(&spos, &tpos);
            // the assignment is only an upper bound in general, but with
            // atoms in general position and equal masses it is optimal
            assert!(got <= want + 1e-8, "trial {trial}: {got} > oracle {want}");
            assert!(got >= want - 1e-8, "trial {trial}: {got} < oracle {want}");
        }
    }

    #[test]
    fn plan_is_a_valid_coupling() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let cloud = |rng: &mut ChaCha8Rng, k: usize| -> Vec<Atom> {
            let mut atoms: Vec<Atom> = (0..k)
                .map(|_| Atom::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(0.1..1.0)))
                .collect();
            let tot: f64 = atoms.iter().map(|a| a.mass).sum();
            atoms.iter_mut().for_each(|a| a.mass /= tot);
            atoms
        };
        let a = cloud(&mut rng, 15);
        let b = cloud(&mut rng, 11);
        let plan = w1_discrete(&a, &b).unwrap();
        let mut row = vec![0.0; a.len()];
        let mut col = vec![0.0; b.len()];
        for &(i, j, m) in &plan.pairs {
            row[i] += m;
            col[j] += m;
        }
        for (i, atom) in a.iter().enumerate() {
            assert!((row[i] - atom.mass).abs() < 1e-7, "row {i}: {} vs {}", row[i], atom.mass);
        }
        for (j, atom) in b.iter().enumerate() {
            assert!((col[j] - atom.mass).abs() < 1e-7);
        }
        let recost: f64 = plan.pairs.iter().map(|&(i, j, m)| m * super::dist(a[i].pos, b[j].pos)).sum();
        assert!((recost - plan.cost).abs() < 1e-10);
    }
}
