#pragma once

#include "physarum/problem.hpp"
#include "physarum/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <utility>
#include <vector>

namespace physarum {

/// Random dense compressed-sensing instance: n x m standard-normal matrix
/// with unit-norm rows, a k-sparse ground truth, f = A x_true, unit weights.
struct RandomBpSpec {
    Index n = 0;
    Index m = 0;
    Index k = 0;
    std::uint64_t seed = 0;
    std::pair<double, double> value_range{-10.0, 10.0};

    void validate() const {
        if (n < 1 || m < n) throw InputError("RandomBpSpec: need m >= n >= 1");
        if (k < 1 || k > m) throw InputError("RandomBpSpec: need 1 <= k <= m");
        if (!(value_range.first < value_range.second))
            throw InputError("RandomBpSpec: empty value range");
    }
};

struct GraphEdge {
    Index tail = 0;
    Index head = 0;
    double length = 1.0;
};

/// Transshipment instance on a graph: incidence-matrix constraints, edge
/// lengths as weights, balanced supplies as the right-hand side.
struct GraphSpec {
    Index num_nodes = 0;
    std::vector<GraphEdge> edges;
    Vector supplies;

    void validate() const {
        if (num_nodes < 2) throw InputError("GraphSpec: need at least 2 nodes");
        if (supplies.size() != num_nodes) throw InputError("GraphSpec: supply length != nodes");
        if (edges.empty()) throw InputError("GraphSpec: need at least one edge");
        for (const GraphEdge& e : edges) {
            if (e.tail < 0 || e.tail >= num_nodes || e.head < 0 || e.head >= num_nodes ||
                e.tail == e.head)
                throw InputError("GraphSpec: bad edge endpoints");
            if (!(e.length > 0.0)) throw InputError("GraphSpec: edge lengths must be positive");
        }
    }
};

/// Deterministic construction; the full draw order is documented in the
/// README so instances can be regenerated in other languages:
///   1. matrix entries, row-major, one normal draw each
///   2. row normalization by the Euclidean norm
///   3. support: k partial Fisher-Yates swaps over [0, m), then sorted
///   4. ground-truth values, one uniform draw per support position
/// f is accumulated column-by-column over the sorted support.
inline BasisPursuitProblem generate_random_bp(const RandomBpSpec& spec) {
    spec.validate();
    CounterRng rng(spec.seed);
    DenseMatrix a(spec.n, spec.m);
    for (Index i = 0; i < spec.n; ++i)
        for (Index j = 0; j < spec.m; ++j) a(i, j) = rng.normal();
    for (Index i = 0; i < spec.n; ++i) {
        double sq = 0.0;
        for (Index j = 0; j < spec.m; ++j) sq += a(i, j) * a(i, j);
        const double norm = std::sqrt(sq);
        for (Index j = 0; j < spec.m; ++j) a(i, j) /= norm;
    }

    std::vector<Index> pool(static_cast<std::size_t>(spec.m));
    std::iota(pool.begin(), pool.end(), Index{0});
    for (Index i = 0; i < spec.k; ++i) {
        const Index j =
            i + static_cast<Index>(rng.uniform_below(static_cast<std::uint64_t>(spec.m - i)));
        std::swap(pool[i], pool[j]);
    }
    std::vector<Index> support(pool.begin(), pool.begin() + spec.k);
    std::sort(support.begin(), support.end());

    Vector x_true = Vector::Zero(spec.m);
    for (Index j : support) x_true[j] = rng.uniform(spec.value_range.first, spec.value_range.second);

    Vector f = Vector::Zero(spec.n);
    for (Index j : support) f += x_true[j] * a.col(j);

    return BasisPursuitProblem(ConstraintMatrix(std::move(a)), Vector::Ones(spec.m), std::move(f),
                               std::move(x_true));
}

/// Signed incidence matrix: column e carries +1 at the tail and -1 at the
/// head of edge e, so A v = f is the divergence constraint.
inline BasisPursuitProblem generate_graph_problem(const GraphSpec& spec) {
    spec.validate();
    const Index m = static_cast<Index>(spec.edges.size());
    SparseMatrix a(spec.num_nodes, m);
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<std::size_t>(2 * m));
    Vector w(m);
    for (Index e = 0; e < m; ++e) {
        triplets.emplace_back(spec.edges[e].tail, e, 1.0);
        triplets.emplace_back(spec.edges[e].head, e, -1.0);
        w[e] = spec.edges[e].length;
    }
    a.setFromTriplets(triplets.begin(), triplets.end());
    return BasisPursuitProblem(ConstraintMatrix(std::move(a)), std::move(w), spec.supplies);
}

/// Path graph on `nodes` nodes with unit lengths and a unit supply from the
/// first node to the last.
inline GraphSpec path_graph_spec(Index nodes) {
    if (nodes < 2) throw InputError("path_graph_spec: need at least 2 nodes");
    GraphSpec spec;
    spec.num_nodes = nodes;
    for (Index i = 0; i + 1 < nodes; ++i) spec.edges.push_back({i, i + 1, 1.0});
    spec.supplies = Vector::Zero(nodes);
    spec.supplies[0] = 1.0;
    spec.supplies[nodes - 1] = -1.0;
    return spec;
}

/// The benchmark sequence (n, m, k) = (250, 25000, 5) * 2^(i-1), i = 1..4,
/// with seed i.
inline RandomBpSpec paper_suite(int i) {
    if (i < 1 || i > 4) throw InputError("paper_suite: index must be in 1..4");
    const Index scale = Index{1} << (i - 1);
    RandomBpSpec spec;
    spec.n = 250 * scale;
    spec.m = 25000 * scale;
    spec.k = 5 * scale;
    spec.seed = static_cast<std::uint64_t>(i);
    return spec;
}

}  // namespace physarum
