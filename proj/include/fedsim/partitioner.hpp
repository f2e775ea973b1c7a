#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "fedsim/core.hpp"

namespace fedsim {

/// One source dataset: its documents, how many questions each carries, and
/// how many clients it is split across.
struct DatasetDescriptor {
  std::string name;
  std::vector<std::string> document_ids;
  std::vector<int> question_counts;  // parallel to document_ids
  int assigned_clients = 0;          // k_doc

  std::int64_t total_questions() const;
};

/// One client's slice of a single dataset. Documents are disjoint across
/// shards and shard sizes within a dataset differ by at most one.
struct ClientShardPlan {
  int client_id = -1;
  std::string dataset;
  std::vector<std::string> document_ids;
  std::vector<int> question_counts;

  std::int64_t document_count() const {
    return static_cast<std::int64_t>(document_ids.size());
  }
  std::int64_t question_count() const;
  std::int64_t sample_count(CountMode mode) const;
};

// Shuffles each dataset's documents deterministically (one stream per
// dataset position) and deals them into assigned_clients contiguous chunks;
// the earliest shards receive any remainder. Client ids run over datasets in
// input order, then shard order.
std::vector<ClientShardPlan> partition(
    const std::vector<DatasetDescriptor>& descriptors, std::uint64_t seed);

// The studied client allocations over (WTQ, DocVQA, TabFact).
std::array<int, 3> scenario_allocation(int total_clients);

// Descriptors named WTQ/DocVQA/TabFact carrying the allocation for
// K in {3, 10, 30}; document lists start empty and are filled from a
// manifest. Other K values are rejected: custom splits go through
// partition() with hand-built descriptors.
std::vector<DatasetDescriptor> scenario(int total_clients);

// Copies document lists into `descriptors` from same-named manifest entries.
void fill_documents(std::vector<DatasetDescriptor>& descriptors,
                    const std::vector<DatasetDescriptor>& manifest);

// Synthetic manifest with the benchmark's train-split cardinalities
// (documents / questions): WTQ 1346/14152, DocVQA 10194/39463,
// TabFact 13163/91835, scaled by `scale`. Questions are spread as evenly as
// possible over the documents.
std::vector<DatasetDescriptor> synthetic_manifest(double scale = 1.0);

// Newline-delimited manifest records: dataset_name,doc_id,question_count
std::vector<DatasetDescriptor> read_manifest(std::istream& in);
void write_manifest(std::ostream& out,
                    const std::vector<DatasetDescriptor>& descriptors);

// JSON list of shards, one object per client.
std::string plan_to_json(const std::vector<ClientShardPlan>& plans);

}  // namespace fedsim
