#include "qagent/corpus.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include <json.hpp>

#include "qagent/error.hpp"
#include "qagent/log.hpp"
#include "qagent/text.hpp"

namespace qagent {

Corpus::Corpus(std::vector<Document> documents) : documents_(std::move(documents)) {
    by_id_.reserve(documents_.size());
    for (std::size_t i = 0; i < documents_.size(); ++i) {
        const Document& doc = documents_[i];
        if (doc.id.empty()) {
            throw InvalidArgument("document " + std::to_string(i) + " has an empty id");
        }
        if (text::trim(doc.text).empty()) {
            throw InvalidArgument("document " + doc.id + " has empty text");
        }
        if (!by_id_.emplace(doc.id, i).second) {
            throw IntegrityError("duplicate id " + doc.id);
        }
    }
}

const Document* Corpus::find(std::string_view id) const {
    const auto it = by_id_.find(std::string(id));
    return it == by_id_.end() ? nullptr : &documents_[it->second];
}

std::size_t Corpus::ordinal_of(std::string_view id) const {
    const auto it = by_id_.find(std::string(id));
    return it == by_id_.end() ? documents_.size() : it->second;
}

namespace {

std::string required_string(const nlohmann::json& record, const char* field, std::size_t line) {
    const auto it = record.find(field);
    if (it == record.end() || !it->is_string()) {
        throw ParseError("line " + std::to_string(line) + ": missing string field \"" + field + "\"",
                         line);
    }
    return it->get<std::string>();
}

}  // namespace

Corpus read_corpus(std::istream& in) {
    std::vector<Document> docs;
    std::unordered_map<std::string, std::size_t> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;

        nlohmann::json record;
        try {
            record = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError("line " + std::to_string(line_no) + ": " + e.what(), line_no);
        }
        if (!record.is_object()) {
            throw ParseError("line " + std::to_string(line_no) + ": record is not an object", line_no);
        }

        Document doc{required_string(record, "id", line_no), required_string(record, "title", line_no),
                     required_string(record, "text", line_no)};
        if (doc.id.empty()) {
            throw ParseError("line " + std::to_string(line_no) + ": empty id", line_no);
        }
        if (text::trim(doc.text).empty()) {
            throw ParseError("line " + std::to_string(line_no) + ": empty text", line_no);
        }
        for (const auto& [key, _] : record.items()) {
            if (key != "id" && key != "title" && key != "text") {
                log::warn("corpus line " + std::to_string(line_no) + ": ignoring field \"" + key + "\"");
            }
        }
        if (!seen.emplace(doc.id, line_no).second) {
            throw IntegrityError("duplicate id " + doc.id);
        }
        docs.push_back(std::move(doc));
    }
    return Corpus(std::move(docs));
}

Corpus load_corpus(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open corpus file " + path.string());
    return read_corpus(in);
}

void write_corpus(const Corpus& corpus, std::ostream& out) {
    for (const Document& doc : corpus.documents()) {
        nlohmann::ordered_json record{{"id", doc.id}, {"title", doc.title}, {"text", doc.text}};
        out << record.dump() << '\n';
    }
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write corpus file " + path.string());
    write_corpus(corpus, out);
    if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace qagent
