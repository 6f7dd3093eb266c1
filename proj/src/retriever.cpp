#include "qagent/retriever.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "qagent/text.hpp"

namespace qagent {

std::vector<std::string> tokenize(std::string_view input) {
    std::vector<std::string> tokens;
    std::string current;
    std::size_t pos = 0;
    while (pos < input.size()) {
        const char32_t cp = text::next_codepoint(input, pos);
        if (text::is_alnum(cp)) {
            text::append_utf8(current, text::fold_case(cp));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

void Bm25Params::validate() const {
    if (!(k1 >= 0.0) || !std::isfinite(k1)) {
        throw InvalidArgument("bm25 k1 must be a finite non-negative number");
    }
    if (!(b >= 0.0 && b <= 1.0)) throw InvalidArgument("bm25 b must lie in [0, 1]");
}

std::span<const Posting> Bm25Index::postings(std::string_view term) const {
    const auto it = postings_.find(std::string(term));
    if (it == postings_.end()) return {};
    return it->second;
}

double Bm25Index::idf(std::string_view term) const {
    const double n = static_cast<double>(doc_count());
    const double df = static_cast<double>(postings(term).size());
    return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
}

double Bm25Index::term_weight(double idf, std::uint32_t tf, std::uint32_t doc_length) const {
    const double f = tf;
    const double len = doc_length;
    const double k1 = params_.k1;
    const double b = params_.b;
    return idf * f * (k1 + 1.0) / (f + k1 * (1.0 - b + b * len / avg_doc_length_));
}

std::vector<std::string_view> Bm25Index::sorted_terms() const {
    std::vector<std::string_view> terms;
    terms.reserve(postings_.size());
    for (const auto& [term, _] : postings_) terms.emplace_back(term);
    std::sort(terms.begin(), terms.end());
    return terms;
}

void Bm25Index::finalize() {
    double total = 0.0;
    for (auto len : doc_lengths_) total += len;
    avg_doc_length_ = doc_lengths_.empty() ? 0.0 : total / static_cast<double>(doc_lengths_.size());
}

namespace {

using TermCounts = std::vector<std::pair<std::string, std::uint32_t>>;

TermCounts count_terms(const Document& doc, std::uint32_t& length) {
    // title and text are indexed together
    auto tokens = tokenize(doc.title);
    auto body = tokenize(doc.text);
    tokens.insert(tokens.end(), std::make_move_iterator(body.begin()),
                  std::make_move_iterator(body.end()));
    length = static_cast<std::uint32_t>(tokens.size());

    std::sort(tokens.begin(), tokens.end());
    TermCounts counts;
    for (auto& token : tokens) {
        if (!counts.empty() && counts.back().first == token) {
            ++counts.back().second;
        } else {
            counts.emplace_back(std::move(token), 1);
        }
    }
    return counts;
}

}  // namespace

Bm25Index build_index(const Corpus& corpus, Bm25Params params, Execution execution) {
    params.validate();
    if (corpus.empty()) throw InvalidArgument("cannot index empty corpus");

    const auto n = static_cast<std::int64_t>(corpus.size());
    std::vector<TermCounts> per_doc(corpus.size());
    std::vector<std::uint32_t> lengths(corpus.size());

    // Tokenization is independent per document; the merge below is serial
    // and in ordinal order so both paths yield the same index.
    if (execution == Execution::parallel) {
#pragma omp parallel for schedule(dynamic, 64)
        for (std::int64_t i = 0; i < n; ++i) {
            per_doc[i] = count_terms(corpus[i], lengths[i]);
        }
    } else {
        for (std::int64_t i = 0; i < n; ++i) {
            per_doc[i] = count_terms(corpus[i], lengths[i]);
        }
    }

    Bm25Index index;
    index.params_ = params;
    index.doc_lengths_ = std::move(lengths);
    index.doc_ids_.reserve(corpus.size());
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        index.doc_ids_.push_back(corpus[i].id);
        for (auto& [term, tf] : per_doc[i]) {
            index.postings_[std::move(term)].push_back({static_cast<std::uint32_t>(i), tf});
        }
    }
    index.finalize();
    return index;
}

double score(const Bm25Index& index, std::span<const std::string> query_tokens,
             std::size_t doc_ordinal) {
    if (doc_ordinal >= index.doc_count()) {
        throw InvalidArgument("document ordinal " + std::to_string(doc_ordinal) +
                              " out of range (" + std::to_string(index.doc_count()) + " documents)");
    }
    const auto ordinal = static_cast<std::uint32_t>(doc_ordinal);
    double total = 0.0;
    for (const auto& token : query_tokens) {
        const auto list = index.postings(token);
        const auto it = std::lower_bound(list.begin(), list.end(), ordinal,
                                         [](const Posting& p, std::uint32_t d) { return p.doc < d; });
        if (it == list.end() || it->doc != ordinal) continue;
        total += index.term_weight(index.idf(token), it->tf, index.doc_lengths()[doc_ordinal]);
    }
    return total;
}

std::vector<RankedHit> retrieve(const Bm25Index& index, std::string_view query, std::size_t k) {
    if (k == 0) throw InvalidArgument("retrieve: k must be at least 1");
    const auto tokens = tokenize(query);

    // term-at-a-time accumulation in query-token order
    std::vector<double> accumulators(index.doc_count(), 0.0);
    for (const auto& token : tokens) {
        const auto list = index.postings(token);
        if (list.empty()) continue;
        const double idf = index.idf(token);
        for (const Posting& p : list) {
            accumulators[p.doc] += index.term_weight(idf, p.tf, index.doc_lengths()[p.doc]);
        }
    }

    std::vector<std::uint32_t> candidates;
    for (std::uint32_t d = 0; d < accumulators.size(); ++d) {
        if (accumulators[d] > 0.0) candidates.push_back(d);
    }
    const auto better = [&](std::uint32_t a, std::uint32_t b) {
        if (accumulators[a] != accumulators[b]) return accumulators[a] > accumulators[b];
        return a < b;
    };
    const std::size_t take = std::min(k, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(take),
                      candidates.end(), better);

    std::vector<RankedHit> hits;
    hits.reserve(take);
    for (std::size_t i = 0; i < take; ++i) {
        const auto d = candidates[i];
        hits.push_back({index.doc_ids()[d], d, accumulators[d], i + 1});
    }
    return hits;
}

std::vector<std::vector<RankedHit>> retrieve_batch(const Bm25Index& index,
                                                   std::span<const std::string> queries,
                                                   std::size_t k, Execution execution) {
    if (k == 0) throw InvalidArgument("retrieve: k must be at least 1");
    std::vector<std::vector<RankedHit>> results(queries.size());
    const auto n = static_cast<std::int64_t>(queries.size());
    if (execution == Execution::parallel) {
#pragma omp parallel for schedule(dynamic, 8)
        for (std::int64_t i = 0; i < n; ++i) results[i] = retrieve(index, queries[i], k);
    } else {
        for (std::int64_t i = 0; i < n; ++i) results[i] = retrieve(index, queries[i], k);
    }
    return results;
}

// Index file layout, little-endian:
//   magic "QAGBM25\n" | u32 version | f64 k1 | f64 b | u64 N
//   N x (str id, u32 length) | u64 T
//   T x (str term, u32 P, P x (u32 doc, u32 tf))   terms in byte order
//   u64 FNV-1a of everything above
// where str is u32 byte count followed by the bytes.
namespace {

constexpr char kMagic[8] = {'Q', 'A', 'G', 'B', 'M', '2', '5', '\n'};

std::uint64_t fnv1a(std::string_view bytes) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

class Writer {
public:
    void u32(std::uint32_t v) { le(v, 4); }
    void u64(std::uint64_t v) { le(v, 8); }
    void f64(double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        le(bits, 8);
    }
    void str(std::string_view s) {
        u32(static_cast<std::uint32_t>(s.size()));
        buf_.append(s);
    }
    void raw(std::string_view s) { buf_.append(s); }
    std::string& buffer() { return buf_; }

private:
    void le(std::uint64_t v, int bytes) {
        for (int i = 0; i < bytes; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
    std::string buf_;
};

class Reader {
public:
    explicit Reader(std::string_view data) : data_(data) {}

    std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
    std::uint64_t u64() { return le(8); }
    double f64() {
        const std::uint64_t bits = le(8);
        double v;
        std::memcpy(&v, &bits, sizeof v);
        return v;
    }
    std::string str() {
        const auto n = u32();
        return std::string(take(n));
    }
    std::string_view take(std::size_t n) {
        if (data_.size() - pos_ < n) throw IndexFormatError("index file is truncated");
        auto out = data_.substr(pos_, n);
        pos_ += n;
        return out;
    }
    std::size_t remaining() const { return data_.size() - pos_; }

private:
    std::uint64_t le(int bytes) {
        const auto chunk = take(static_cast<std::size_t>(bytes));
        std::uint64_t v = 0;
        for (int i = bytes - 1; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(chunk[i]);
        return v;
    }
    std::string_view data_;
    std::size_t pos_ = 0;
};

}  // namespace

void write_index(const Bm25Index& index, std::ostream& out) {
    Writer w;
    w.raw(std::string_view(kMagic, sizeof kMagic));
    w.u32(kIndexFormatVersion);
    w.f64(index.params().k1);
    w.f64(index.params().b);
    w.u64(index.doc_count());
    for (std::size_t i = 0; i < index.doc_count(); ++i) {
        w.str(index.doc_ids()[i]);
        w.u32(index.doc_lengths()[i]);
    }
    const auto terms = index.sorted_terms();
    w.u64(terms.size());
    for (const auto term : terms) {
        w.str(term);
        const auto list = index.postings(term);
        w.u32(static_cast<std::uint32_t>(list.size()));
        for (const Posting& p : list) {
            w.u32(p.doc);
            w.u32(p.tf);
        }
    }
    const auto checksum = fnv1a(w.buffer());
    w.u64(checksum);
    out.write(w.buffer().data(), static_cast<std::streamsize>(w.buffer().size()));
}

Bm25Index read_index(std::istream& in) {
    std::ostringstream slurp;
    slurp << in.rdbuf();
    const std::string data = std::move(slurp).str();
    Reader r(data);

    const auto magic = r.take(sizeof kMagic);
    if (magic != std::string_view(kMagic, sizeof kMagic)) {
        throw IndexFormatError("not an index file (bad magic)");
    }
    const auto version = r.u32();
    if (version != kIndexFormatVersion) {
        throw IndexFormatError("unsupported index version " + std::to_string(version) +
                               " (expected " + std::to_string(kIndexFormatVersion) + ")");
    }
    if (data.size() < 8 + sizeof kMagic + 4) throw IndexFormatError("index file is truncated");
    const std::string_view body(data.data(), data.size() - 8);
    Reader tail(std::string_view(data).substr(data.size() - 8));
    if (fnv1a(body) != tail.u64()) {
        throw IndexFormatError("index file is truncated or corrupted (checksum mismatch)");
    }

    Bm25Index index;
    index.params_.k1 = r.f64();
    index.params_.b = r.f64();
    try {
        index.params_.validate();
    } catch (const InvalidArgument& e) {
        throw IndexFormatError(std::string("index file is corrupted: ") + e.what());
    }
    const auto n = r.u64();
    if (n == 0 || n > r.remaining()) throw IndexFormatError("index file is corrupted: bad document count");
    index.doc_ids_.reserve(n);
    index.doc_lengths_.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        index.doc_ids_.push_back(r.str());
        index.doc_lengths_.push_back(r.u32());
    }
    const auto term_count = r.u64();
    if (term_count > r.remaining()) throw IndexFormatError("index file is corrupted: bad term count");
    std::string previous;
    for (std::uint64_t t = 0; t < term_count; ++t) {
        std::string term = r.str();
        if (t > 0 && term <= previous) throw IndexFormatError("index file is corrupted: terms out of order");
        const auto count = r.u32();
        if (count == 0 || count > n) throw IndexFormatError("index file is corrupted: bad posting count");
        std::vector<Posting> list;
        list.reserve(count);
        for (std::uint32_t j = 0; j < count; ++j) {
            const Posting p{r.u32(), r.u32()};
            if (p.doc >= n || p.tf == 0 || (!list.empty() && p.doc <= list.back().doc)) {
                throw IndexFormatError("index file is corrupted: invalid posting for term " + term);
            }
            list.push_back(p);
        }
        previous = term;
        index.postings_.emplace(std::move(term), std::move(list));
    }
    if (r.remaining() != 8) throw IndexFormatError("index file is corrupted: trailing bytes");
    index.finalize();
    return index;
}

void save_index(const Bm25Index& index, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write index file " + path.string());
    write_index(index, out);
    out.flush();
    if (!out) throw IoError("write failed for index file " + path.string());
}

Bm25Index load_index(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open index file " + path.string());
    return read_index(in);
}

Bm25Retriever::Bm25Retriever(std::shared_ptr<const Corpus> corpus,
                             std::shared_ptr<const Bm25Index> index)
    : corpus_(std::move(corpus)), index_(std::move(index)) {
    if (!corpus_ || !index_) throw InvalidArgument("Bm25Retriever needs a corpus and an index");
    if (corpus_->size() != index_->doc_count()) {
        throw IntegrityError("index covers " + std::to_string(index_->doc_count()) +
                             " documents but corpus has " + std::to_string(corpus_->size()));
    }
    for (std::size_t i = 0; i < corpus_->size(); ++i) {
        if ((*corpus_)[i].id != index_->doc_ids()[i]) {
            throw IntegrityError("index document " + std::to_string(i) + " is " +
                                 index_->doc_ids()[i] + " but corpus has " + (*corpus_)[i].id);
        }
    }
}

std::vector<Passage> Bm25Retriever::search(std::string_view query, std::size_t k) const {
    std::vector<Passage> passages;
    for (const RankedHit& hit : retrieve(*index_, query, k)) {
        const Document& doc = (*corpus_)[hit.ordinal];
        passages.push_back({doc.id, doc.title, doc.text, hit.score});
    }
    return passages;
}

RemoteRetriever::RemoteRetriever(std::string url, http::RetryPolicy retry)
    : endpoint_(http::parse_url(url)), retry_(retry) {}

std::vector<Passage> RemoteRetriever::search(std::string_view query, std::size_t k) const {
    const nlohmann::json request{{"query", query}, {"topk", k}};
    const std::string body = http::post_json(endpoint_, request.dump(), {}, retry_);

    std::vector<Passage> passages;
    try {
        const auto response = nlohmann::json::parse(body);
        for (const auto& hit : response.at("hits")) {
            passages.push_back({hit.at("id").get<std::string>(), hit.value("title", std::string{}),
                                hit.at("text").get<std::string>(), hit.value("score", 0.0)});
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("malformed retriever response: ") + e.what());
    }
    if (passages.size() > k) passages.resize(k);
    return passages;
}

}  // namespace qagent
