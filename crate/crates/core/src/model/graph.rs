//! Oriented-graph incidence matrix for the oscillator network.

use super::ModelError;
use crate::numerics::Matrix;
use crate::Scalar;

/// Incidence matrix 𝓑 ∈ ℝ^{n×m} of a connected oriented graph.
///
/// Edges are ordered pairs of 1-based node indices (source, sink); per
/// column the source row carries −1 and the sink row +1, so δ = 𝓑ᵀθ holds
/// the angle differences θ_sink − θ_source.
pub fn incidence_matrix<T: Scalar>(
    edges: &[(usize, usize)],
    n: usize,
) -> Result<Matrix<T>, ModelError> {
    for &(a, b) in edges {
        for idx in [a, b] {
            if idx == 0 || idx > n {
                return Err(ModelError::NodeIndex { index: idx, n });
            }
        }
        if a == b {
            return Err(ModelError::Dimension {
                context: format!("self-loop at node {a}"),
            });
        }
    }

    // Connectivity by BFS from node 1 over the undirected edge set.
    let mut adjacency = vec![Vec::new(); n + 1];
    for &(a, b) in edges {
        adjacency[a].push(b);
        adjacency[b].push(a);
    }
    let mut seen = vec![false; n + 1];
    let mut queue = std::collections::VecDeque::from([1usize]);
    seen[1] = true;
    let mut reachable = 1usize;
    while let Some(v) = queue.pop_front() {
        for &next in &adjacency[v] {
            if !seen[next] {
                seen[next] = true;
                reachable += 1;
                queue.push_back(next);
            }
        }
    }
    if reachable != n {
        return Err(ModelError::Disconnected { reachable, n });
    }

    let mut b_mat = Matrix::zeros(n, edges.len());
    for (col, &(source, sink)) in edges.iter().enumerate() {
        b_mat[(source - 1, col)] = -T::one();
        b_mat[(sink - 1, col)] = T::one();
    }
    Ok(b_mat)
}
