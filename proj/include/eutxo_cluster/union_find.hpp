#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace eutxo_cluster {

// Disjoint-set forest over dense ordinals. Path compression plus union by size;
// the size array doubles as the per-cluster member count. Mutation is
// single-threaded; after finalize() concurrent read-only root_of() calls are safe.
class DisjointSetForest {
public:
    DisjointSetForest() = default;
    explicit DisjointSetForest(std::uint32_t n) { grow(n); }

    // Appends singleton elements until the forest holds n_total of them.
    void grow(std::uint32_t n_total) {
        while (parent_.size() < n_total) {
            parent_.push_back(static_cast<std::uint32_t>(parent_.size()));
            size_.push_back(1);
            ++components_;
        }
    }

    std::uint32_t size() const { return static_cast<std::uint32_t>(parent_.size()); }
    std::uint32_t component_count() const { return components_; }

    // Root of x's set, compressing every node on the walk to point at the root.
    std::uint32_t find(std::uint32_t x) {
        check(x);
        std::uint32_t root = x;
        while (parent_[root] != root) root = parent_[root];
        while (parent_[x] != root) {
            const std::uint32_t next = parent_[x];
            parent_[x] = root;
            x = next;
        }
        return root;
    }

    // Read-only root lookup; O(1) once paths are compressed (finalize()).
    std::uint32_t root_of(std::uint32_t x) const {
        check(x);
        while (parent_[x] != x) x = parent_[x];
        return x;
    }

    // Merges the sets of a and b; the smaller set attaches under the larger,
    // ties break toward the smaller ordinal root. Returns the surviving root.
    std::uint32_t unite(std::uint32_t a, std::uint32_t b) {
        std::uint32_t ra = find(a);
        std::uint32_t rb = find(b);
        if (ra == rb) return ra;
        if (size_[ra] < size_[rb] || (size_[ra] == size_[rb] && rb < ra)) std::swap(ra, rb);
        parent_[rb] = ra;
        size_[ra] += size_[rb];
        --components_;
        return ra;
    }

    bool connected(std::uint32_t a, std::uint32_t b) { return find(a) == find(b); }

    // Member count of the set containing x.
    std::uint32_t set_size(std::uint32_t x) { return size_[find(x)]; }

    bool is_root(std::uint32_t x) const {
        check(x);
        return parent_[x] == x;
    }

    // Member count stored at x; meaningful only when is_root(x).
    std::uint32_t size_at_root(std::uint32_t x) const {
        check(x);
        return size_[x];
    }

    // Points every element directly at its root.
    void finalize() {
        for (std::uint32_t i = 0; i < parent_.size(); ++i) parent_[i] = find(i);
    }

    // One (root, member count) entry per set, ascending by root ordinal.
    // Compresses paths as a side effect; membership is unchanged.
    std::vector<std::pair<std::uint32_t, std::uint32_t>> components() {
        finalize();
        std::vector<std::pair<std::uint32_t, std::uint32_t>> out;
        out.reserve(components_);
        for (std::uint32_t i = 0; i < parent_.size(); ++i)
            if (parent_[i] == i) out.emplace_back(i, size_[i]);
        return out;
    }

    // Snapshot as CSV "ordinal,root_ordinal" rows, fully compressed.
    void write_snapshot(std::ostream& out) {
        finalize();
        out << "ordinal,root_ordinal\n";
        for (std::uint32_t i = 0; i < parent_.size(); ++i) out << i << ',' << parent_[i] << '\n';
    }

    static DisjointSetForest load_snapshot(std::istream& in) {
        DisjointSetForest forest;
        std::string line;
        std::uint64_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line_no == 1 && line == "ordinal,root_ordinal") continue;
            const std::size_t comma = line.find(',');
            if (comma == std::string::npos)
                throw std::invalid_argument("snapshot line " + std::to_string(line_no) +
                                            ": expected 'ordinal,root_ordinal'");
            const auto ordinal = static_cast<std::uint32_t>(std::stoul(line.substr(0, comma)));
            const auto root = static_cast<std::uint32_t>(std::stoul(line.substr(comma + 1)));
            if (ordinal != forest.parent_.size())
                throw std::invalid_argument("snapshot ordinals must be dense and ascending");
            forest.parent_.push_back(root);
            forest.size_.push_back(0);
        }
        const auto n = static_cast<std::uint32_t>(forest.parent_.size());
        for (std::uint32_t i = 0; i < n; ++i) {
            const std::uint32_t r = forest.parent_[i];
            if (r >= n || forest.parent_[r] != r)
                throw std::invalid_argument("snapshot parents must point at self-parented roots");
            ++forest.size_[r];
        }
        forest.components_ = 0;
        for (std::uint32_t i = 0; i < n; ++i)
            if (forest.parent_[i] == i) ++forest.components_;
        return forest;
    }

private:
    void check(std::uint32_t x) const {
        if (x >= parent_.size())
            throw std::out_of_range("element " + std::to_string(x) + " outside forest of " +
                                    std::to_string(parent_.size()));
    }

    std::vector<std::uint32_t> parent_;
    std::vector<std::uint32_t> size_; // valid at roots
    std::uint32_t components_ = 0;
};

} // namespace eutxo_cluster
