#pragma once

// Discrete architectures and their derivation from architecture
// parameters. A cell has `nodes` intermediate nodes; node i receives i+2
// candidate edges, one from each of the two cell inputs (sources 0 and 1)
// and one from every earlier intermediate (source j+2 for intermediate j).
// Edges are numbered linearly: node0's edges first, then node1's, ...

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "spikenas/error.hpp"

namespace spikenas {

enum class CandidateOp : int {
    sep_conv_3x3 = 0,
    sep_conv_5x5 = 1,
    dil_conv_3x3 = 2,
    dil_conv_5x5 = 3,
    max_pool_3x3 = 4,
    avg_pool_3x3 = 5,
    none = 6,
    skip_connect = 7,
};

inline constexpr int kNumCandidates = 8;

const char* candidate_name(CandidateOp op);
CandidateOp candidate_from_name(const std::string& name);

struct EdgeRef {
    int node;  // intermediate node index
    int src;   // source: 0,1 cell inputs; j+2 = intermediate j
};

inline int cell_edge_count(int nodes) { return nodes * (nodes + 3) / 2; }

// Linear edge order: for node i, sources 0..i+1 in ascending order.
std::vector<EdgeRef> cell_edge_list(int nodes);

struct GenotypeEdge {
    int src = 0;
    CandidateOp op = CandidateOp::sep_conv_3x3;
    bool operator==(const GenotypeEdge& o) const { return src == o.src && op == o.op; }
};

using GenotypeNode = std::array<GenotypeEdge, 2>;  // ordered by source index

struct Genotype {
    int nodes = 4;
    std::vector<GenotypeNode> normal;
    std::vector<GenotypeNode> reduction;
    // recorded for reproducibility
    std::int64_t channels = 0;
    std::int64_t layers = 0;
    std::string attention = "off";

    void validate() const;
    bool operator==(const Genotype& o) const {
        return nodes == o.nodes && normal == o.normal && reduction == o.reduction;
    }

    std::string to_text() const;
    static Genotype from_text(const std::string& text);
    std::string to_dot() const;
};

// Alpha rows in linear edge order, one row of kNumCandidates logits per
// edge. Selection: per node, score each incoming edge by its best
// non-none softmax weight, keep the top two edges, and give each kept
// edge its best non-none op. Ties break toward the lower edge index,
// then the lower op index.
using AlphaMatrix = std::vector<std::array<double, kNumCandidates>>;

Genotype derive_genotype(const AlphaMatrix& alpha_normal, const AlphaMatrix& alpha_reduction,
                         int nodes = 4);

// Softmax over one alpha row (helper shared with the derivation oracle).
std::array<double, kNumCandidates> alpha_row_softmax(const std::array<double, kNumCandidates>& row);

}  // namespace spikenas
