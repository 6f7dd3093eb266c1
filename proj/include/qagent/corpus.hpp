#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace qagent {

struct Document {
    std::string id;
    std::string title;
    std::string text;

    bool operator==(const Document&) const = default;
};

/// In-memory passage collection. Immutable once built, so concurrent reads
/// need no locking.
class Corpus {
public:
    Corpus() = default;

    /// Throws IntegrityError on a duplicate id and InvalidArgument when a
    /// document has an empty id or blank text.
    explicit Corpus(std::vector<Document> documents);

    std::size_t size() const noexcept { return documents_.size(); }
    bool empty() const noexcept { return documents_.empty(); }

    const Document& operator[](std::size_t ordinal) const { return documents_[ordinal]; }
    std::span<const Document> documents() const noexcept { return documents_; }

    /// nullptr when no document has this id.
    const Document* find(std::string_view id) const;

    /// Ordinal of `id`, or size() when absent.
    std::size_t ordinal_of(std::string_view id) const;

private:
    std::vector<Document> documents_;
    std::unordered_map<std::string, std::size_t> by_id_;
};

/// Reads a JSON-lines corpus: one {"id","title","text"} object per line.
/// Blank lines are skipped; unknown fields produce a warning.
Corpus load_corpus(const std::filesystem::path& path);
Corpus read_corpus(std::istream& in);

void write_corpus(const Corpus& corpus, std::ostream& out);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

}  // namespace qagent
