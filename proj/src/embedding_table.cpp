#include "mgfn/embedding_table.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace mgfn {

void EmbeddingTable::rebuild_index() {
    index.clear();
    index.reserve(ids.size() * 2);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (!index.emplace(ids[i], i).second)
            throw std::invalid_argument("embedding table: duplicate item id " + ids[i]);
    }
}

void EmbeddingTable::validate() const {
    if (static_cast<std::size_t>(vectors.rows()) != ids.size())
        throw std::invalid_argument("embedding table: id/vector row mismatch");
    if (!vectors.allFinite())
        throw std::invalid_argument("embedding table: non-finite vector entries");
    if (index.size() != ids.size())
        throw std::invalid_argument("embedding table: stale index");
}

void write_embeddings_tsv(std::ostream& out, const EmbeddingTable& table) {
    char buf[32];
    for (std::size_t i = 0; i < table.ids.size(); ++i) {
        out << table.ids[i];
        for (Eigen::Index j = 0; j < table.vectors.cols(); ++j) {
            std::snprintf(buf, sizeof(buf), "%.9g", table.vectors(static_cast<Eigen::Index>(i), j));
            out << '\t' << buf;
        }
        out << '\n';
    }
}

EmbeddingTable read_embeddings_tsv(std::istream& in) {
    std::vector<std::string> ids;
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    Eigen::Index dim = -1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        std::string id;
        if (!std::getline(ss, id, '\t') || id.empty())
            throw std::runtime_error("embedding tsv line " + std::to_string(line_no) +
                                     ": missing item id");
        std::vector<double> v;
        std::string field;
        while (std::getline(ss, field, '\t')) {
            try {
                std::size_t used = 0;
                v.push_back(std::stod(field, &used));
                if (used != field.size()) throw std::invalid_argument("trailing");
            } catch (const std::exception&) {
                throw std::runtime_error("embedding tsv line " + std::to_string(line_no) +
                                         ": bad value '" + field + "'");
            }
        }
        if (v.empty())
            throw std::runtime_error("embedding tsv line " + std::to_string(line_no) +
                                     ": no vector entries");
        if (dim < 0) dim = static_cast<Eigen::Index>(v.size());
        if (static_cast<Eigen::Index>(v.size()) != dim)
            throw std::runtime_error("embedding tsv line " + std::to_string(line_no) +
                                     ": inconsistent vector width");
        ids.push_back(std::move(id));
        rows.push_back(std::move(v));
    }
    EmbeddingTable table;
    table.ids = std::move(ids);
    table.vectors.resize(static_cast<Eigen::Index>(rows.size()), dim < 0 ? 0 : dim);
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (Eigen::Index j = 0; j < dim; ++j)
            table.vectors(static_cast<Eigen::Index>(i), j) = rows[i][static_cast<std::size_t>(j)];
    table.rebuild_index();
    table.validate();
    return table;
}

EmbeddingTable read_embeddings_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open embeddings file: " + path);
    return read_embeddings_tsv(in);
}

}  // namespace mgfn
