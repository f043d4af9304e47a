#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace resume_judge {

/// Seeded generator of raw (pre-ingest) resume lines. Each line mimics a
/// scraped record: an original filename id, the applied position, a list of
/// question/answer items (some of them short boilerplate that ingestion
/// filters out) and a few extra fields that ingestion discards.
std::vector<std::string> generate_synthetic_corpus(std::size_t n_records, std::uint64_t seed);

}  // namespace resume_judge
