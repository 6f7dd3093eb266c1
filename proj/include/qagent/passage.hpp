#pragma once

#include <string>

namespace qagent {

/// A retrieved passage as it travels through the rollout: the document
/// fields plus the retriever's score for the query that surfaced it.
struct Passage {
    std::string doc_id;
    std::string title;
    std::string text;
    double score = 0.0;
};

}  // namespace qagent
