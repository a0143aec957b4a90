#include "spikenas/genotype.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace spikenas {

namespace {

const char* kCandidateNames[kNumCandidates] = {
    "sep_conv_3x3", "sep_conv_5x5", "dil_conv_3x3", "dil_conv_5x5",
    "max_pool_3x3", "avg_pool_3x3", "none",         "skip_connect",
};

}  // namespace

const char* candidate_name(CandidateOp op) { return kCandidateNames[int(op)]; }

CandidateOp candidate_from_name(const std::string& name) {
    for (int i = 0; i < kNumCandidates; ++i)
        if (name == kCandidateNames[i]) return CandidateOp(i);
    throw IoError("unknown candidate operation: " + name);
}

std::vector<EdgeRef> cell_edge_list(int nodes) {
    std::vector<EdgeRef> edges;
    edges.reserve(std::size_t(cell_edge_count(nodes)));
    for (int node = 0; node < nodes; ++node)
        for (int src = 0; src < node + 2; ++src) edges.push_back({node, src});
    return edges;
}

void Genotype::validate() const {
    check_shape(nodes >= 1, "genotype: nodes must be >= 1");
    auto check_cells = [&](const std::vector<GenotypeNode>& cells, const char* kind) {
        check_shape(int(cells.size()) == nodes,
                    std::string("genotype: ") + kind + " has " + std::to_string(cells.size()) +
                        " nodes, expected " + std::to_string(nodes));
        for (int i = 0; i < nodes; ++i) {
            const GenotypeNode& nd = cells[std::size_t(i)];
            for (const GenotypeEdge& e : nd) {
                check_shape(e.op != CandidateOp::none,
                            std::string("genotype: ") + kind + " node " + std::to_string(i) +
                                " selects the none op");
                check_shape(e.src >= 0 && e.src < i + 2,
                            std::string("genotype: ") + kind + " node " + std::to_string(i) +
                                " has out-of-range source " + std::to_string(e.src));
            }
            check_shape(nd[0].src != nd[1].src,
                        std::string("genotype: ") + kind + " node " + std::to_string(i) +
                            " uses the same source twice");
        }
    };
    check_cells(normal, "normal");
    check_cells(reduction, "reduction");
}

std::string Genotype::to_text() const {
    std::ostringstream os;
    os << "spikenas-genotype v1\n";
    os << "nodes " << nodes << "\n";
    os << "channels " << channels << "\n";
    os << "layers " << layers << "\n";
    os << "attention " << attention << "\n";
    auto emit = [&](const std::vector<GenotypeNode>& cells, const char* kind) {
        for (int i = 0; i < int(cells.size()); ++i) {
            const GenotypeNode& nd = cells[std::size_t(i)];
            os << kind << " " << i << " " << nd[0].src << " " << candidate_name(nd[0].op) << " "
               << nd[1].src << " " << candidate_name(nd[1].op) << "\n";
        }
    };
    emit(normal, "normal");
    emit(reduction, "reduction");
    return os.str();
}

Genotype Genotype::from_text(const std::string& text) {
    std::istringstream is(text);
    std::string header;
    std::getline(is, header);
    if (header != "spikenas-genotype v1")
        throw IoError("genotype: bad header line: '" + header + "'");
    Genotype g;
    g.normal.clear();
    g.reduction.clear();
    std::string key;
    while (is >> key) {
        if (key == "nodes") {
            is >> g.nodes;
        } else if (key == "channels") {
            is >> g.channels;
        } else if (key == "layers") {
            is >> g.layers;
        } else if (key == "attention") {
            is >> g.attention;
        } else if (key == "normal" || key == "reduction") {
            int node;
            GenotypeNode nd;
            std::string op_a, op_b;
            if (!(is >> node >> nd[0].src >> op_a >> nd[1].src >> op_b))
                throw IoError("genotype: malformed " + key + " line");
            nd[0].op = candidate_from_name(op_a);
            nd[1].op = candidate_from_name(op_b);
            auto& vec = (key == "normal") ? g.normal : g.reduction;
            if (node != int(vec.size()))
                throw IoError("genotype: " + key + " nodes out of order at node " +
                              std::to_string(node));
            vec.push_back(nd);
        } else {
            throw IoError("genotype: unknown key '" + key + "'");
        }
    }
    g.validate();
    return g;
}

std::string Genotype::to_dot() const {
    std::ostringstream os;
    os << "digraph genotype {\n  rankdir=LR;\n";
    auto emit = [&](const std::vector<GenotypeNode>& cells, const std::string& kind) {
        os << "  subgraph cluster_" << kind << " {\n    label=\"" << kind << "\";\n";
        auto name = [&](int src) {
            if (src == 0) return kind + "_in0";
            if (src == 1) return kind + "_in1";
            return kind + "_n" + std::to_string(src - 2);
        };
        for (int i = 0; i < int(cells.size()); ++i) {
            for (const GenotypeEdge& e : cells[std::size_t(i)])
                os << "    " << name(e.src) << " -> " << name(i + 2) << " [label=\""
                   << candidate_name(e.op) << "\"];\n";
            os << "    " << name(i + 2) << " -> " << kind << "_out;\n";
        }
        os << "  }\n";
    };
    emit(normal, "normal");
    emit(reduction, "reduction");
    os << "}\n";
    return os.str();
}

std::array<double, kNumCandidates> alpha_row_softmax(const std::array<double, kNumCandidates>& row) {
    double m = row[0];
    for (double v : row) m = std::max(m, v);
    std::array<double, kNumCandidates> out{};
    double s = 0;
    for (int i = 0; i < kNumCandidates; ++i) {
        out[std::size_t(i)] = std::exp(row[std::size_t(i)] - m);
        s += out[std::size_t(i)];
    }
    for (auto& v : out) v /= s;
    return out;
}

namespace {

std::vector<GenotypeNode> derive_cells(const AlphaMatrix& alpha, int nodes) {
    check_shape(int(alpha.size()) == cell_edge_count(nodes),
                "derive_genotype: alpha has " + std::to_string(alpha.size()) + " rows, expected " +
                    std::to_string(cell_edge_count(nodes)));
    std::vector<GenotypeNode> cells;
    int edge_base = 0;
    for (int node = 0; node < nodes; ++node) {
        const int in_edges = node + 2;
        // best non-none op and its weight, per incoming edge
        std::vector<double> score(static_cast<std::size_t>(in_edges));
        std::vector<CandidateOp> best_op(static_cast<std::size_t>(in_edges));
        for (int e = 0; e < in_edges; ++e) {
            auto w = alpha_row_softmax(alpha[std::size_t(edge_base + e)]);
            double best = -1;
            int op = -1;
            for (int o = 0; o < kNumCandidates; ++o) {
                if (CandidateOp(o) == CandidateOp::none) continue;
                if (w[std::size_t(o)] > best) {
                    best = w[std::size_t(o)];
                    op = o;
                }
            }
            score[std::size_t(e)] = best;
            best_op[std::size_t(e)] = CandidateOp(op);
        }
        // top-2 edges, ties toward the lower edge index
        int e1 = -1, e2 = -1;
        for (int e = 0; e < in_edges; ++e) {
            if (e1 < 0 || score[std::size_t(e)] > score[std::size_t(e1)]) {
                e2 = e1;
                e1 = e;
            } else if (e2 < 0 || score[std::size_t(e)] > score[std::size_t(e2)]) {
                e2 = e;
            }
        }
        GenotypeNode nd;
        const int lo = std::min(e1, e2), hi = std::max(e1, e2);
        nd[0] = GenotypeEdge{lo, best_op[std::size_t(lo)]};
        nd[1] = GenotypeEdge{hi, best_op[std::size_t(hi)]};
        cells.push_back(nd);
        edge_base += in_edges;
    }
    return cells;
}

}  // namespace

Genotype derive_genotype(const AlphaMatrix& alpha_normal, const AlphaMatrix& alpha_reduction,
                         int nodes) {
    Genotype g;
    g.nodes = nodes;
    g.normal = derive_cells(alpha_normal, nodes);
    g.reduction = derive_cells(alpha_reduction, nodes);
    g.validate();
    return g;
}

}  // namespace spikenas
