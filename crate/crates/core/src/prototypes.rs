//! Per-group learnable prototypes: within-group matching, the clustering
//! loss with its mean-normalized gradient, cross-group alignment, and the
//! diversity regularizer that keeps prototypes from collapsing.
//!
//! Conventions fixed here and relied on elsewhere:
//! - the clustering loss is per-cluster mean-normalized, so its prototype
//!   gradient is exactly (2/|S|) sum (mu - phi) and the representation pull
//!   is (2/|S|) (phi - mu);
//! - assignment ties break toward the smallest prototype index;
//! - the diversity sum runs over ordered pairs i != j;
//! - alignment pairs treated prototype k with control prototype pairing[k].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lap::min_cost_assignment;
use crate::matrix::{pairwise_sq_dist, sq_dist, Matrix};
use crate::rng::RngStream;

/// K learnable centroids for each treatment group, in representation space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrototypeSet {
    pub k: usize,
    /// `mu[t]` is a K x d_h matrix; row k is prototype k of group t.
    pub mu: [Matrix; 2],
}

impl PrototypeSet {
    pub fn new(mu_control: Matrix, mu_treated: Matrix) -> Result<Self> {
        if mu_control.shape() != mu_treated.shape() {
            return Err(Error::shape(
                "prototype_set",
                format!("{:?} vs {:?}", mu_control.shape(), mu_treated.shape()),
            ));
        }
        let k = mu_control.rows();
        if k == 0 {
            return Err(Error::Config("need at least one prototype per group".to_string()));
        }
        if !mu_control.is_finite() || !mu_treated.is_finite() {
            return Err(Error::Numeric("prototypes must be finite".to_string()));
        }
        Ok(PrototypeSet {
            k,
            mu: [mu_control, mu_treated],
        })
    }

    pub fn dim(&self) -> usize {
        self.mu[0].cols()
    }

    pub fn group(&self, t: u8) -> &Matrix {
        &self.mu[t as usize]
    }

    pub fn is_finite(&self) -> bool {
        self.mu[0].is_finite() && self.mu[1].is_finite()
    }
}

/// Nearest-prototype bookkeeping for one batch of representations.
#[derive(Clone, Debug, PartialEq)]
pub struct AssignmentTable {
    /// Assigned prototype index per sample (within the sample's own group).
    pub assigned: Vec<usize>,
    /// `members[t][k]` lists the sample indices of group t assigned to k.
    pub members: [Vec<Vec<usize>>; 2],
}

impl AssignmentTable {
    pub fn counts(&self) -> [Vec<usize>; 2] {
        [
            self.members[0].iter().map(Vec::len).collect(),
            self.members[1].iter().map(Vec::len).collect(),
        ]
    }

    pub fn has_empty_cluster(&self) -> bool {
        self.members
            .iter()
            .any(|group| group.iter().any(|m| m.is_empty()))
    }
}

/// Assigns every representation to its nearest same-group prototype by
/// squared Euclidean distance; ties break toward the smallest index.
pub fn assign(phi: &Matrix, t: &[u8], protos: &PrototypeSet) -> AssignmentTable {
    debug_assert_eq!(phi.rows(), t.len());
    debug_assert_eq!(phi.cols(), protos.dim());
    let mut assigned = Vec::with_capacity(phi.rows());
    let mut members = [
        vec![Vec::new(); protos.k],
        vec![Vec::new(); protos.k],
    ];
    for i in 0..phi.rows() {
        let group = protos.group(t[i]);
        let row = phi.row(i);
        let mut best = 0;
        let mut best_dist = sq_dist(row, group.row(0));
        for k in 1..protos.k {
            let d = sq_dist(row, group.row(k));
            if d < best_dist {
                best_dist = d;
                best = k;
            }
        }
        assigned.push(best);
        members[t[i] as usize][best].push(i);
    }
    AssignmentTable { assigned, members }
}

/// Per-cluster mean-normalized clustering loss:
/// sum over groups and clusters of (1/|S|) sum_{i in S} ||phi_i - mu||^2,
/// with empty clusters contributing zero.
pub fn cluster_loss(phi: &Matrix, table: &AssignmentTable, protos: &PrototypeSet) -> f64 {
    let mut total = 0.0;
    for (t, group) in table.members.iter().enumerate() {
        let mu = &protos.mu[t];
        for (k, members) in group.iter().enumerate() {
            if members.is_empty() {
                continue;
            }
            let mut acc = 0.0;
            for &i in members {
                acc += sq_dist(phi.row(i), mu.row(k));
            }
            total += acc / members.len() as f64;
        }
    }
    total
}

/// Gradient of [`cluster_loss`] with respect to each prototype:
/// (2/|S|) sum_{i in S} (mu - phi_i); zero rows for empty clusters.
pub fn cluster_loss_grad_mu(
    phi: &Matrix,
    table: &AssignmentTable,
    protos: &PrototypeSet,
) -> [Matrix; 2] {
    let d = protos.dim();
    let mut grads = [Matrix::zeros(protos.k, d), Matrix::zeros(protos.k, d)];
    for t in 0..2 {
        for (k, members) in table.members[t].iter().enumerate() {
            if members.is_empty() {
                continue;
            }
            let scale = 2.0 / members.len() as f64;
            let mu_row = protos.mu[t].row(k).to_vec();
            let grad_row = grads[t].row_mut(k);
            for &i in members {
                for ((g, &m), &p) in grad_row.iter_mut().zip(mu_row.iter()).zip(phi.row(i)) {
                    *g += scale * (m - p);
                }
            }
        }
    }
    grads
}

/// Gradient of [`cluster_loss`] with respect to each representation row:
/// (2/|S|) (phi_i - mu) for sample i's own cluster. This is the pull the
/// trainer injects into encoder backpropagation.
pub fn cluster_loss_grad_phi(
    phi: &Matrix,
    table: &AssignmentTable,
    protos: &PrototypeSet,
) -> Matrix {
    let mut grad = Matrix::zeros(phi.rows(), phi.cols());
    for t in 0..2 {
        for (k, members) in table.members[t].iter().enumerate() {
            if members.is_empty() {
                continue;
            }
            let scale = 2.0 / members.len() as f64;
            let mu_row = protos.mu[t].row(k).to_vec();
            for &i in members {
                let phi_row = phi.row(i).to_vec();
                for ((g, &p), &m) in grad.row_mut(i).iter_mut().zip(phi_row.iter()).zip(mu_row.iter())
                {
                    *g += scale * (p - m);
                }
            }
        }
    }
    grad
}

/// Mean squared distance between matched prototype pairs:
/// (1/K) sum_k ||mu_treated[k] - mu_control[pairing[k]]||^2.
pub fn align_loss(protos: &PrototypeSet, pairing: &[usize]) -> f64 {
    debug_assert_eq!(pairing.len(), protos.k);
    let mut acc = 0.0;
    for (k, &j) in pairing.iter().enumerate() {
        acc += sq_dist(protos.mu[1].row(k), protos.mu[0].row(j));
    }
    acc / protos.k as f64
}

/// Gradient of [`align_loss`]; both sides of each pair receive gradients.
pub fn align_loss_grad_mu(protos: &PrototypeSet, pairing: &[usize]) -> [Matrix; 2] {
    let d = protos.dim();
    let mut grads = [Matrix::zeros(protos.k, d), Matrix::zeros(protos.k, d)];
    let scale = 2.0 / protos.k as f64;
    for (k, &j) in pairing.iter().enumerate() {
        let treated = protos.mu[1].row(k).to_vec();
        let control = protos.mu[0].row(j).to_vec();
        for (idx, (&a, &b)) in treated.iter().zip(control.iter()).enumerate() {
            let diff = scale * (a - b);
            grads[1].set(k, idx, grads[1].get(k, idx) + diff);
            grads[0].set(j, idx, grads[0].get(j, idx) - diff);
        }
    }
    grads
}

/// Negative mean squared pairwise distance within each group, over ordered
/// pairs i != j. Zero by definition for K = 1 (empty pair sum).
pub fn diversity_loss(protos: &PrototypeSet) -> f64 {
    let k = protos.k;
    if k < 2 {
        return 0.0;
    }
    let mut acc = 0.0;
    for mu in &protos.mu {
        for i in 0..k {
            for j in 0..k {
                if i != j {
                    acc += sq_dist(mu.row(i), mu.row(j));
                }
            }
        }
    }
    -acc / (k * (k - 1)) as f64
}

/// Gradient of [`diversity_loss`].
pub fn diversity_loss_grad_mu(protos: &PrototypeSet) -> [Matrix; 2] {
    let k = protos.k;
    let d = protos.dim();
    let mut grads = [Matrix::zeros(k, d), Matrix::zeros(k, d)];
    if k < 2 {
        return grads;
    }
    // d/d mu_a of -(1/(K(K-1))) sum_{i != j} ||mu_i - mu_j||^2
    //   = -(4/(K(K-1))) sum_{j != a} (mu_a - mu_j)
    let scale = -4.0 / (k * (k - 1)) as f64;
    for t in 0..2 {
        for a in 0..k {
            let mu_a = protos.mu[t].row(a).to_vec();
            let row = grads[t].row_mut(a);
            for j in 0..k {
                if j == a {
                    continue;
                }
                for ((g, &ma), &mj) in row.iter_mut().zip(mu_a.iter()).zip(protos.mu[t].row(j)) {
                    *g += scale * (ma - mj);
                }
            }
        }
    }
    grads
}

/// The three prototype-loss components and their weighted combination.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtoLoss {
    pub cluster: f64,
    pub align: f64,
    pub diversity: f64,
    pub total: f64,
}

/// Combined prototype objective: cluster + beta * align + gamma * diversity.
pub fn proto_loss(
    phi: &Matrix,
    table: &AssignmentTable,
    protos: &PrototypeSet,
    pairing: &[usize],
    beta: f64,
    gamma_div: f64,
) -> ProtoLoss {
    debug_assert!(beta >= 0.0 && gamma_div >= 0.0);
    let cluster = cluster_loss(phi, table, protos);
    let align = align_loss(protos, pairing);
    let diversity = diversity_loss(protos);
    ProtoLoss {
        cluster,
        align,
        diversity,
        total: cluster + beta * align + gamma_div * diversity,
    }
}

/// Gradient of the combined prototype objective with respect to prototypes.
pub fn proto_loss_grad_mu(
    phi: &Matrix,
    table: &AssignmentTable,
    protos: &PrototypeSet,
    pairing: &[usize],
    beta: f64,
    gamma_div: f64,
) -> [Matrix; 2] {
    let mut grads = cluster_loss_grad_mu(phi, table, protos);
    let align = align_loss_grad_mu(protos, pairing);
    let div = diversity_loss_grad_mu(protos);
    for t in 0..2 {
        grads[t].add_assign_scaled(&align[t], beta).unwrap();
        grads[t].add_assign_scaled(&div[t], gamma_div).unwrap();
    }
    grads
}

/// How treated and control prototypes are put in correspondence before the
/// alignment loss is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RematchStrategy {
    /// Pair by index, k with k.
    Index,
    /// Repeatedly match the globally closest unmatched pair.
    Greedy,
    /// Exact minimum-cost assignment.
    Optimal,
}

/// Returns the control-side permutation: treated prototype k is paired with
/// control prototype `pairing[k]`.
pub fn rematch_prototypes(protos: &PrototypeSet, strategy: RematchStrategy) -> Result<Vec<usize>> {
    let k = protos.k;
    match strategy {
        RematchStrategy::Index => Ok((0..k).collect()),
        RematchStrategy::Greedy => {
            let cost = pairwise_sq_dist(&protos.mu[1], &protos.mu[0])?;
            let mut pairing = vec![usize::MAX; k];
            let mut used_row = vec![false; k];
            let mut used_col = vec![false; k];
            for _ in 0..k {
                let mut best = (f64::INFINITY, 0, 0);
                for i in 0..k {
                    if used_row[i] {
                        continue;
                    }
                    for j in 0..k {
                        if used_col[j] {
                            continue;
                        }
                        if cost.get(i, j) < best.0 {
                            best = (cost.get(i, j), i, j);
                        }
                    }
                }
                pairing[best.1] = best.2;
                used_row[best.1] = true;
                used_col[best.2] = true;
            }
            Ok(pairing)
        }
        RematchStrategy::Optimal => {
            let cost = pairwise_sq_dist(&protos.mu[1], &protos.mu[0])?;
            min_cost_assignment(&cost)
        }
    }
}

/// One Lloyd iteration: assign, then move every non-empty prototype to the
/// exact centroid of its members. Used for warm-up inside
/// [`init_prototypes`]; training proper updates prototypes by gradient.
pub fn lloyd_step(phi: &Matrix, t: &[u8], protos: &PrototypeSet) -> (PrototypeSet, AssignmentTable) {
    let table = assign(phi, t, protos);
    let mut next = protos.clone();
    for group in 0..2 {
        for (k, members) in table.members[group].iter().enumerate() {
            if members.is_empty() {
                continue;
            }
            let row = next.mu[group].row_mut(k);
            row.fill(0.0);
            for &i in members {
                for (r, &v) in row.iter_mut().zip(phi.row(i)) {
                    *r += v;
                }
            }
            let inv = 1.0 / members.len() as f64;
            for r in row.iter_mut() {
                *r *= inv;
            }
        }
    }
    (next, table)
}

/// Per-group k-means++ seeding on the current representations followed by a
/// fixed number of Lloyd iterations.
pub fn init_prototypes(
    phi: &Matrix,
    t: &[u8],
    k: usize,
    rng: &mut RngStream,
) -> Result<PrototypeSet> {
    if k == 0 {
        return Err(Error::Config("need at least one prototype per group".to_string()));
    }
    let d = phi.cols();
    let mut mus: Vec<Matrix> = Vec::with_capacity(2);
    for group in 0..2u8 {
        let rows: Vec<usize> = (0..phi.rows()).filter(|&i| t[i] == group).collect();
        if rows.len() < k {
            return Err(Error::Config(format!(
                "group {} has {} samples, fewer than K={}",
                group,
                rows.len(),
                k
            )));
        }
        // k-means++ seeding.
        let mut centers: Vec<usize> = vec![rows[rng.below(rows.len())]];
        let mut dist2: Vec<f64> = rows
            .iter()
            .map(|&i| sq_dist(phi.row(i), phi.row(centers[0])))
            .collect();
        while centers.len() < k {
            let choice = rng.weighted_index(&dist2);
            let next = rows[choice];
            centers.push(next);
            for (slot, &i) in dist2.iter_mut().zip(rows.iter()) {
                let d2 = sq_dist(phi.row(i), phi.row(next));
                if d2 < *slot {
                    *slot = d2;
                }
            }
        }
        let mut mu = Matrix::zeros(k, d);
        for (slot, &i) in centers.iter().enumerate() {
            mu.row_mut(slot).copy_from_slice(phi.row(i));
        }
        mus.push(mu);
    }

    let mut protos = PrototypeSet::new(mus.remove(0), mus.remove(0))?;
    for _ in 0..10 {
        let (next, _) = lloyd_step(phi, t, &protos);
        if next == protos {
            break;
        }
        protos = next;
    }
    Ok(protos)
}

/// Relocates every empty prototype to the group sample farthest from its
/// currently assigned prototype, then recomputes assignments. Repeats until
/// no cluster is empty or every prototype has been touched once.
pub fn handle_empty_cluster(
    protos: &PrototypeSet,
    table: &AssignmentTable,
    phi: &Matrix,
    t: &[u8],
) -> (PrototypeSet, AssignmentTable) {
    let mut protos = protos.clone();
    let mut table = table.clone();
    for _round in 0..2 * protos.k {
        let mut relocated = false;
        for group in 0..2usize {
            let empty_k = match table.members[group].iter().position(Vec::is_empty) {
                Some(k) => k,
                None => continue,
            };
            // Farthest sample of this group from its own assigned prototype.
            let mut far: Option<(usize, f64)> = None;
            for i in 0..phi.rows() {
                if t[i] as usize != group {
                    continue;
                }
                let cur = table.assigned[i];
                let d = sq_dist(phi.row(i), protos.mu[group].row(cur));
                if far.is_none_or(|(_, best)| d > best) {
                    far = Some((i, d));
                }
            }
            if let Some((i, _)) = far {
                let row = phi.row(i).to_vec();
                protos.mu[group].row_mut(empty_k).copy_from_slice(&row);
                relocated = true;
            }
        }
        if !relocated {
            break;
        }
        table = assign(phi, t, &protos);
        if !table.has_empty_cluster() {
            break;
        }
    }
    (protos, table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lap::assignment_cost;

    fn proto_fixture(mu0: &[Vec<f64>], mu1: &[Vec<f64>]) -> PrototypeSet {
        PrototypeSet::new(
            Matrix::from_rows(mu0).unwrap(),
            Matrix::from_rows(mu1).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn assign_exact_match_and_tiebreak() {
        let protos = proto_fixture(
            &[vec![0.0, 0.0], vec![2.0, 0.0], vec![4.0, 0.0]],
            &[vec![0.0, 0.0], vec![2.0, 0.0], vec![4.0, 0.0]],
        );
        // Exactly on prototype 2 (index 1 in 0-based terms is (2,0); use (4,0)).
        let phi = Matrix::from_rows(&[vec![4.0, 0.0], vec![2.0, 0.0]]).unwrap();
        let table = assign(&phi, &[1, 0], &protos);
        assert_eq!(table.assigned, vec![2, 1]);
        // Equidistant between prototypes 0 and 2 -> smallest index wins.
        let phi = Matrix::from_rows(&[vec![2.0, 5.0]]).unwrap();
        let lopsided = proto_fixture(
            &[vec![0.0, 5.0], vec![9.0, 9.0], vec![4.0, 5.0]],
            &[vec![0.0, 5.0], vec![9.0, 9.0], vec![4.0, 5.0]],
        );
        let table = assign(&phi, &[0], &lopsided);
        assert_eq!(table.assigned, vec![0]);
    }

    #[test]
    fn assign_matches_brute_force_scan() {
        let mut rng = RngStream::new(23);
        for _ in 0..10 {
            let k = 2 + rng.below(4);
            let protos = PrototypeSet::new(
                Matrix::from_fn(k, 3, |_, _| rng.normal()),
                Matrix::from_fn(k, 3, |_, _| rng.normal()),
            )
            .unwrap();
            let phi = Matrix::from_fn(20, 3, |_, _| rng.normal());
            let t: Vec<u8> = (0..20).map(|_| u8::from(rng.next_f64() < 0.5)).collect();
            let table = assign(&phi, &t, &protos);
            let dists = [
                pairwise_sq_dist(&phi, &protos.mu[0]).unwrap(),
                pairwise_sq_dist(&phi, &protos.mu[1]).unwrap(),
            ];
            for i in 0..20 {
                let d = &dists[t[i] as usize];
                let mut best = 0;
                for kk in 1..k {
                    if d.get(i, kk) < d.get(i, best) {
                        best = kk;
                    }
                }
                assert_eq!(table.assigned[i], best);
            }
        }
    }

    #[test]
    fn cluster_loss_hand_values() {
        let protos = proto_fixture(&[vec![1.0, 0.0]], &[vec![5.0, 5.0]]);
        let phi = Matrix::from_rows(&[vec![0.0, 0.0], vec![2.0, 0.0], vec![5.0, 5.0]]).unwrap();
        let t = vec![0, 0, 1];
        let table = assign(&phi, &t, &protos);
        // Control cluster: (1 + 1)/2 = 1; treated cluster sits on its prototype.
        assert!((cluster_loss(&phi, &table, &protos) - 1.0).abs() < 1e-15);

        // Perfect clustering is zero loss.
        let phi2 = Matrix::from_rows(&[vec![1.0, 0.0], vec![5.0, 5.0]]).unwrap();
        let table2 = assign(&phi2, &[0, 1], &protos);
        assert_eq!(cluster_loss(&phi2, &table2, &protos), 0.0);
    }

    #[test]
    fn cluster_loss_invariant_to_sample_order() {
        let mut rng = RngStream::new(31);
        let protos = PrototypeSet::new(
            Matrix::from_fn(3, 2, |_, _| rng.normal()),
            Matrix::from_fn(3, 2, |_, _| rng.normal()),
        )
        .unwrap();
        let phi = Matrix::from_fn(12, 2, |_, _| rng.normal());
        let t: Vec<u8> = (0..12).map(|i| (i % 2) as u8).collect();
        let loss = cluster_loss(&phi, &assign(&phi, &t, &protos), &protos);

        let perm: Vec<usize> = vec![5, 2, 9, 0, 11, 7, 1, 8, 3, 10, 6, 4];
        let phi_p = phi.gather_rows(&perm);
        let t_p: Vec<u8> = perm.iter().map(|&i| t[i]).collect();
        let loss_p = cluster_loss(&phi_p, &assign(&phi_p, &t_p, &protos), &protos);
        assert!((loss - loss_p).abs() < 1e-12);
    }

    #[test]
    fn cluster_grad_centroid_is_stationary() {
        let protos = proto_fixture(&[vec![1.0, 0.0]], &[vec![0.0, 0.0]]);
        let phi = Matrix::from_rows(&[vec![0.0, 0.0], vec![2.0, 0.0], vec![0.0, 0.0]]).unwrap();
        let table = assign(&phi, &[0, 0, 1], &protos);
        let grads = cluster_loss_grad_mu(&phi, &table, &protos);
        assert_eq!(grads[0].row(0), &[0.0, 0.0]);
        assert_eq!(grads[1].row(0), &[0.0, 0.0]);
    }

    #[test]
    fn cluster_grads_match_finite_differences() {
        use crate::gradcheck::{finite_diff_grad, max_rel_err};
        let mut rng = RngStream::new(77);
        for _ in 0..5 {
            let k = 2 + rng.below(2);
            let protos = PrototypeSet::new(
                Matrix::from_fn(k, 3, |_, _| rng.normal()),
                Matrix::from_fn(k, 3, |_, _| rng.normal()),
            )
            .unwrap();
            let phi = Matrix::from_fn(14, 3, |_, _| rng.normal());
            let t: Vec<u8> = (0..14).map(|_| u8::from(rng.next_f64() < 0.5)).collect();
            let table = assign(&phi, &t, &protos);

            // Quadratic loss: central differences are exact up to rounding,
            // so a moderate step keeps cancellation noise below the bound.
            let analytic_mu = cluster_loss_grad_mu(&phi, &table, &protos);
            for grp in 0..2usize {
                let numeric = finite_diff_grad(
                    |mu| {
                        let mut p = protos.clone();
                        p.mu[grp] = mu.clone();
                        cluster_loss(&phi, &table, &p)
                    },
                    &protos.mu[grp],
                    1e-3,
                )
                .unwrap();
                assert!(max_rel_err(&analytic_mu[grp], &numeric) < 1e-8);
            }

            let analytic_phi = cluster_loss_grad_phi(&phi, &table, &protos);
            let numeric_phi = finite_diff_grad(
                |p| cluster_loss(p, &table, &protos),
                &phi,
                1e-3,
            )
            .unwrap();
            assert!(max_rel_err(&analytic_phi, &numeric_phi) < 1e-8);
        }
    }

    #[test]
    fn align_loss_hand_value_and_zero() {
        let protos = proto_fixture(
            &[vec![1.0, 0.0], vec![2.0, 0.0]],
            &[vec![0.0, 0.0], vec![2.0, 2.0]],
        );
        let pairing = vec![0, 1];
        assert!((align_loss(&protos, &pairing) - 2.5).abs() < 1e-15);

        let same = proto_fixture(&[vec![3.0, 4.0]], &[vec![3.0, 4.0]]);
        assert_eq!(align_loss(&same, &[0]), 0.0);
    }

    #[test]
    fn align_loss_decreases_along_connecting_segment() {
        let control = vec![vec![4.0, 0.0]];
        let mut prev = f64::INFINITY;
        for step in 0..5 {
            let lam = step as f64 * 0.2;
            let treated = vec![vec![lam * 4.0, 0.0]];
            let protos = proto_fixture(&control, &treated);
            let loss = align_loss(&protos, &[0]);
            assert!(loss < prev);
            prev = loss;
        }
    }

    #[test]
    fn diversity_hand_values() {
        let protos = proto_fixture(
            &[vec![0.0, 0.0], vec![3.0, 4.0]],
            &[vec![0.0, 0.0], vec![3.0, 4.0]],
        );
        assert!((diversity_loss(&protos) + 50.0).abs() < 1e-12);

        let collapsed = proto_fixture(
            &[vec![1.0, 1.0], vec![1.0, 1.0]],
            &[vec![2.0, 2.0], vec![2.0, 2.0]],
        );
        assert_eq!(diversity_loss(&collapsed), 0.0);

        // Homogeneity: scaling prototypes by c scales the loss by c^2.
        let scaled = proto_fixture(
            &[vec![0.0, 0.0], vec![9.0, 12.0]],
            &[vec![0.0, 0.0], vec![9.0, 12.0]],
        );
        assert!((diversity_loss(&scaled) - 9.0 * diversity_loss(&protos)).abs() < 1e-9);

        let single = proto_fixture(&[vec![1.0]], &[vec![2.0]]);
        assert_eq!(diversity_loss(&single), 0.0);
    }

    #[test]
    fn align_and_diversity_grads_match_finite_differences() {
        use crate::gradcheck::{finite_diff_grad, max_rel_err};
        let mut rng = RngStream::new(41);
        let protos = PrototypeSet::new(
            Matrix::from_fn(3, 4, |_, _| rng.normal()),
            Matrix::from_fn(3, 4, |_, _| rng.normal()),
        )
        .unwrap();
        let pairing = vec![2, 0, 1];
        let an_align = align_loss_grad_mu(&protos, &pairing);
        let an_div = diversity_loss_grad_mu(&protos);
        for grp in 0..2usize {
            let num_align = finite_diff_grad(
                |mu| {
                    let mut p = protos.clone();
                    p.mu[grp] = mu.clone();
                    align_loss(&p, &pairing)
                },
                &protos.mu[grp],
                1e-3,
            )
            .unwrap();
            assert!(max_rel_err(&an_align[grp], &num_align) < 1e-8);

            let num_div = finite_diff_grad(
                |mu| {
                    let mut p = protos.clone();
                    p.mu[grp] = mu.clone();
                    diversity_loss(&p)
                },
                &protos.mu[grp],
                1e-3,
            )
            .unwrap();
            assert!(max_rel_err(&an_div[grp], &num_div) < 1e-8);
        }
    }

    #[test]
    fn proto_loss_combines_linearly() {
        let protos = proto_fixture(
            &[vec![1.0, 0.0], vec![2.0, 0.0]],
            &[vec![0.0, 0.0], vec![2.0, 2.0]],
        );
        let phi = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap();
        let t = vec![0, 1];
        let table = assign(&phi, &t, &protos);
        let pairing = vec![0, 1];

        let zero_weights = proto_loss(&phi, &table, &protos, &pairing, 0.0, 0.0);
        assert_eq!(zero_weights.total, zero_weights.cluster);

        let combined = proto_loss(&phi, &table, &protos, &pairing, 1.0, 0.1);
        let expect = combined.cluster + 1.0 * combined.align + 0.1 * combined.diversity;
        assert!((combined.total - expect).abs() < 1e-12);
        assert!((combined.align - 2.5).abs() < 1e-12);
    }

    #[test]
    fn rematch_optimal_and_greedy() {
        // Already-optimal pairing stays the identity.
        let aligned = proto_fixture(
            &[vec![0.0, 0.0], vec![10.0, 10.0]],
            &[vec![0.1, 0.0], vec![10.0, 10.1]],
        );
        assert_eq!(
            rematch_prototypes(&aligned, RematchStrategy::Optimal).unwrap(),
            vec![0, 1]
        );
        // Crossed pairs swap.
        let crossed = proto_fixture(
            &[vec![10.0, 10.0], vec![0.0, 0.0]],
            &[vec![0.0, 0.0], vec![10.0, 10.0]],
        );
        assert_eq!(
            rematch_prototypes(&crossed, RematchStrategy::Optimal).unwrap(),
            vec![1, 0]
        );
        assert_eq!(
            rematch_prototypes(&crossed, RematchStrategy::Index).unwrap(),
            vec![0, 1]
        );
    }

    #[test]
    fn optimal_rematch_never_worse_than_index() {
        let mut rng = RngStream::new(53);
        for _ in 0..20 {
            let k = 2 + rng.below(5);
            let protos = PrototypeSet::new(
                Matrix::from_fn(k, 3, |_, _| rng.normal()),
                Matrix::from_fn(k, 3, |_, _| rng.normal()),
            )
            .unwrap();
            let identity = rematch_prototypes(&protos, RematchStrategy::Index).unwrap();
            let optimal = rematch_prototypes(&protos, RematchStrategy::Optimal).unwrap();
            let greedy = rematch_prototypes(&protos, RematchStrategy::Greedy).unwrap();
            let cost = pairwise_sq_dist(&protos.mu[1], &protos.mu[0]).unwrap();
            let c_opt = assignment_cost(&cost, &optimal);
            assert!(c_opt <= assignment_cost(&cost, &identity) + 1e-12);
            assert!(c_opt <= assignment_cost(&cost, &greedy) + 1e-12);
        }
    }

    #[test]
    fn init_single_prototype_is_group_mean() {
        let mut rng = RngStream::new(61);
        let phi = Matrix::from_fn(30, 2, |_, _| rng.normal());
        let t: Vec<u8> = (0..30).map(|i| (i % 2) as u8).collect();
        let mut seed_rng = RngStream::new(5);
        let protos = init_prototypes(&phi, &t, 1, &mut seed_rng).unwrap();
        for group in 0..2u8 {
            let rows: Vec<usize> = (0..30).filter(|&i| t[i] == group).collect();
            for j in 0..2 {
                let mean: f64 =
                    rows.iter().map(|&i| phi.get(i, j)).sum::<f64>() / rows.len() as f64;
                assert!((protos.group(group).get(0, j) - mean).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn init_separated_clouds_get_one_prototype_each() {
        // Two tight clouds per group, far apart.
        let offsets = [0.0, 100.0];
        let mut rows = Vec::new();
        let mut t = Vec::new();
        for group in 0..2u8 {
            for (ci, &off) in offsets.iter().enumerate() {
                for s in 0..4 {
                    rows.push(vec![off + 0.1 * s as f64, group as f64]);
                    t.push(group);
                    let _ = ci;
                }
            }
        }
        let phi = Matrix::from_rows(&rows).unwrap();
        let mut rng = RngStream::new(3);
        let protos = init_prototypes(&phi, &t, 2, &mut rng).unwrap();
        for group in 0..2u8 {
            let mu = protos.group(group);
            let mut near_low = 0;
            let mut near_high = 0;
            for k in 0..2 {
                if mu.get(k, 0) < 50.0 {
                    near_low += 1;
                } else {
                    near_high += 1;
                }
            }
            assert_eq!((near_low, near_high), (1, 1));
        }
        // K=2 fit beats the single-prototype loss.
        let table2 = assign(&phi, &t, &protos);
        let loss2 = cluster_loss(&phi, &table2, &protos);
        let mut rng1 = RngStream::new(3);
        let protos1 = init_prototypes(&phi, &t, 1, &mut rng1).unwrap();
        let table1 = assign(&phi, &t, &protos1);
        assert!(loss2 < cluster_loss(&phi, &table1, &protos1));
    }

    #[test]
    fn init_is_deterministic_and_checks_group_size() {
        let mut rng = RngStream::new(71);
        let phi = Matrix::from_fn(20, 2, |_, _| rng.normal());
        let t: Vec<u8> = (0..20).map(|i| (i % 2) as u8).collect();
        let a = init_prototypes(&phi, &t, 3, &mut RngStream::new(4)).unwrap();
        let b = init_prototypes(&phi, &t, 3, &mut RngStream::new(4)).unwrap();
        assert_eq!(a, b);
        assert!(matches!(
            init_prototypes(&phi, &t, 11, &mut RngStream::new(4)),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn empty_cluster_relocation() {
        // All samples near the first prototype; the second starts far away
        // and empty.
        let phi = Matrix::from_rows(&[
            vec![0.0, 0.0],
            vec![0.2, 0.0],
            vec![0.0, 0.2],
            vec![5.0, 5.0],
            vec![0.1, 0.1],
            vec![0.3, 0.1],
        ])
        .unwrap();
        let t = vec![0, 0, 0, 0, 1, 1];
        let protos = proto_fixture(
            &[vec![0.0, 0.0], vec![100.0, 100.0]],
            &[vec![0.2, 0.1], vec![200.0, 200.0]],
        );
        let table = assign(&phi, &t, &protos);
        assert!(table.has_empty_cluster());
        let before = cluster_loss(&phi, &table, &protos);
        let (protos2, table2) = handle_empty_cluster(&protos, &table, &phi, &t);
        // Control group's relocated prototype lands on (5,5), the farthest
        // sample, and now owns it.
        assert!(!table2.members[0][1].is_empty());
        let after = cluster_loss(&phi, &table2, &protos2);
        assert!(after <= before + 1e-12, "{after} vs {before}");

        // No-op when nothing is empty.
        let (protos3, table3) = handle_empty_cluster(&protos2, &table2, &phi, &t);
        assert_eq!(protos3, protos2);
        assert_eq!(table3, table2);
    }

    #[test]
    fn lloyd_iterations_do_not_increase_cluster_loss() {
        let mut rng = RngStream::new(83);
        for _ in 0..5 {
            let phi = Matrix::from_fn(40, 3, |_, _| rng.normal());
            let t: Vec<u8> = (0..40).map(|_| u8::from(rng.next_f64() < 0.5)).collect();
            let mut protos = init_prototypes(&phi, &t, 3, &mut rng).unwrap();
            let mut prev = {
                let table = assign(&phi, &t, &protos);
                cluster_loss(&phi, &table, &protos)
            };
            for _ in 0..20 {
                let (next, _) = lloyd_step(&phi, &t, &protos);
                let table = assign(&phi, &t, &next);
                let loss = cluster_loss(&phi, &table, &next);
                assert!(loss <= prev + 1e-12, "{loss} vs {prev}");
                prev = loss;
                protos = next;
            }
        }
    }
}
