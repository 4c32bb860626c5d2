#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

namespace mgfn {

// Final item embeddings: dense matrix plus an id index.
struct EmbeddingTable {
    std::vector<std::string> ids;
    Eigen::MatrixXd vectors;  // ids.size() x dim
    std::unordered_map<std::string, std::size_t> index;

    std::size_t size() const { return ids.size(); }
    Eigen::Index dim() const { return vectors.cols(); }
    const std::string& id_of(std::size_t row) const { return ids[row]; }
    int row_of(const std::string& id) const {
        auto it = index.find(id);
        return it == index.end() ? -1 : static_cast<int>(it->second);
    }
    void rebuild_index();
    void validate() const;  // unique ids, finite vectors
};

// TSV rows: item_id followed by the vector entries at 9 significant digits.
// '#'-prefixed preamble lines carry the producing config.
void write_embeddings_tsv(std::ostream& out, const EmbeddingTable& table);
EmbeddingTable read_embeddings_tsv(std::istream& in);
EmbeddingTable read_embeddings_file(const std::string& path);

}  // namespace mgfn
