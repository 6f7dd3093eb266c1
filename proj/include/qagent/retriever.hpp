#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "qagent/corpus.hpp"
#include "qagent/error.hpp"
#include "qagent/http.hpp"
#include "qagent/passage.hpp"

namespace qagent {

/// Lowercased alphanumeric runs; everything else separates tokens.
std::vector<std::string> tokenize(std::string_view text);

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;

    /// Throws InvalidArgument unless k1 >= 0 and 0 <= b <= 1.
    void validate() const;
};

struct Posting {
    std::uint32_t doc;
    std::uint32_t tf;

    bool operator==(const Posting&) const = default;
};

/// Selects the serial reference loop or the OpenMP kernel. Both produce
/// identical results.
enum class Execution { serial, parallel };

class Bm25Index {
public:
    std::size_t doc_count() const noexcept { return doc_lengths_.size(); }
    double avg_doc_length() const noexcept { return avg_doc_length_; }
    const Bm25Params& params() const noexcept { return params_; }
    std::span<const std::uint32_t> doc_lengths() const noexcept { return doc_lengths_; }
    const std::vector<std::string>& doc_ids() const noexcept { return doc_ids_; }
    std::size_t term_count() const noexcept { return postings_.size(); }

    /// Postings of `term` ordered by document ordinal; empty when unseen.
    std::span<const Posting> postings(std::string_view term) const;

    /// ln(1 + (N - df + 0.5) / (df + 0.5)); positive for every df <= N.
    double idf(std::string_view term) const;

    /// Contribution of one query-term occurrence with frequency `tf` in a
    /// document of `doc_length` tokens.
    double term_weight(double idf, std::uint32_t tf, std::uint32_t doc_length) const;

    /// Sorted vocabulary, used for serialization.
    std::vector<std::string_view> sorted_terms() const;

private:
    friend Bm25Index build_index(const Corpus&, Bm25Params, Execution);
    friend Bm25Index read_index(std::istream&);
    void finalize();

    std::unordered_map<std::string, std::vector<Posting>> postings_;
    std::vector<std::uint32_t> doc_lengths_;
    std::vector<std::string> doc_ids_;
    double avg_doc_length_ = 0.0;
    Bm25Params params_;
};

/// Throws InvalidArgument("cannot index empty corpus") when the corpus is empty.
Bm25Index build_index(const Corpus& corpus, Bm25Params params = {},
                      Execution execution = Execution::parallel);

/// Okapi BM25 of one document; duplicate query tokens each contribute.
double score(const Bm25Index& index, std::span<const std::string> query_tokens,
             std::size_t doc_ordinal);

struct RankedHit {
    std::string doc_id;
    std::size_t ordinal = 0;
    double score = 0.0;
    std::size_t rank = 0;  // 1-based
};

/// Top-k documents with positive score, best first, ties by ordinal.
std::vector<RankedHit> retrieve(const Bm25Index& index, std::string_view query, std::size_t k);

std::vector<std::vector<RankedHit>> retrieve_batch(const Bm25Index& index,
                                                   std::span<const std::string> queries,
                                                   std::size_t k,
                                                   Execution execution = Execution::parallel);

inline constexpr std::uint32_t kIndexFormatVersion = 1;

void write_index(const Bm25Index& index, std::ostream& out);
Bm25Index read_index(std::istream& in);
void save_index(const Bm25Index& index, const std::filesystem::path& path);
Bm25Index load_index(const std::filesystem::path& path);

/// Raised when a retriever call fails; names the query that failed.
class RetrievalError : public Error {
public:
    RetrievalError(const std::string& what, std::string query)
        : Error(what), query_(std::move(query)) {}
    const std::string& query() const noexcept { return query_; }

private:
    std::string query_;
};

/// The retrieval function seen by the rollout engine.
class Retriever {
public:
    virtual ~Retriever() = default;
    virtual std::vector<Passage> search(std::string_view query, std::size_t k) const = 0;
};

class Bm25Retriever final : public Retriever {
public:
    /// Throws IntegrityError if the index was not built from this corpus.
    Bm25Retriever(std::shared_ptr<const Corpus> corpus, std::shared_ptr<const Bm25Index> index);

    std::vector<Passage> search(std::string_view query, std::size_t k) const override;

    const Bm25Index& index() const noexcept { return *index_; }

private:
    std::shared_ptr<const Corpus> corpus_;
    std::shared_ptr<const Bm25Index> index_;
};

/// Speaks {query, topk} -> {hits: [{id, title, text, score}]} over HTTP POST.
class RemoteRetriever final : public Retriever {
public:
    RemoteRetriever(std::string url, http::RetryPolicy retry = {});

    std::vector<Passage> search(std::string_view query, std::size_t k) const override;

private:
    http::Endpoint endpoint_;
    http::RetryPolicy retry_;
};

}  // namespace qagent
