/// Prim's algorithm over the complete graph on `k` components.
///
/// `edge(i, j)` is evaluated for an unvisited component `i` and a visited
/// component `j`; it returns the connection cost and whatever payload
/// describes the connection. Each pair is evaluated at most once. The tree is
/// grown from component 0; on equal costs the earliest candidate in
/// (unvisited index, visit order) wins.
///
/// Returns the chosen `(unvisited, visited, cost, payload)` edges in the order
/// they were added.
pub fn prim<P, E>(k: usize, mut edge: E) -> Vec<(usize, usize, f64, P)>
where
    P: Clone,
    E: FnMut(usize, usize) -> (f64, P),
{
    if k <= 1 {
        return Vec::new();
    }
    let mut visited = vec![false; k];
    visited[0] = true;
    // Best known connection of each unvisited component into the tree.
    let mut best: Vec<Option<(f64, usize, P)>> = vec![None; k];
    let mut last = 0;
    let mut tree = Vec::with_capacity(k - 1);
    for _ in 1..k {
        for i in 0..k {
            if visited[i] {
                continue;
            }
            let (c, p) = edge(i, last);
            match &best[i] {
                Some((bc, _, _)) if !(c < *bc) => {}
                _ => best[i] = Some((c, last, p)),
            }
        }
        let mut pick: Option<usize> = None;
        for i in 0..k {
            if visited[i] {
                continue;
            }
            let ci = best[i].as_ref().map(|b| b.0).unwrap_or(f64::INFINITY);
            match pick {
                Some(p) if !(ci < best[p].as_ref().map(|b| b.0).unwrap_or(f64::INFINITY)) => {}
                _ => pick = Some(i),
            }
        }
        let i = pick.expect("an unvisited component remains");
        let (c, j, p) = best[i].take().expect("every unvisited component has a candidate");
        visited[i] = true;
        last = i;
        tree.push((i, j, c, p));
    }
    tree
}
