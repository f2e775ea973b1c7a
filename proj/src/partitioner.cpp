#include "fedsim/partitioner.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "fedsim/rng.hpp"

namespace fedsim {

std::int64_t DatasetDescriptor::total_questions() const {
  std::int64_t total = 0;
  for (int q : question_counts) total += q;
  return total;
}

std::int64_t ClientShardPlan::question_count() const {
  std::int64_t total = 0;
  for (int q : question_counts) total += q;
  return total;
}

std::int64_t ClientShardPlan::sample_count(CountMode mode) const {
  return mode == CountMode::questions ? question_count() : document_count();
}

std::vector<ClientShardPlan> partition(
    const std::vector<DatasetDescriptor>& descriptors, std::uint64_t seed) {
  std::vector<ClientShardPlan> plans;
  int client_id = 0;
  for (std::size_t d = 0; d < descriptors.size(); ++d) {
    const DatasetDescriptor& desc = descriptors[d];
    std::size_t n = desc.document_ids.size();
    if (desc.question_counts.size() != n) {
      throw DimensionError("partition: dataset '" + desc.name +
                           "' has mismatched document/question lists");
    }
    int k = desc.assigned_clients;
    if (k < 1 || static_cast<std::size_t>(k) > n) {
      throw DomainError("partition: dataset '" + desc.name + "' assigns " +
                        std::to_string(k) + " clients for " +
                        std::to_string(n) + " documents");
    }

    std::vector<std::uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0u);
    Rng rng = stream_rng(seed, {stream_tag::partition, d});
    rng.shuffle(std::span<std::uint32_t>(order));

    // Chunks of size ceil(n/k) for the first n%k shards, floor(n/k) after.
    std::size_t base = n / static_cast<std::size_t>(k);
    std::size_t extra = n % static_cast<std::size_t>(k);
    std::size_t cursor = 0;
    for (int shard = 0; shard < k; ++shard) {
      std::size_t size = base + (static_cast<std::size_t>(shard) < extra ? 1 : 0);
      ClientShardPlan plan;
      plan.client_id = client_id++;
      plan.dataset = desc.name;
      plan.document_ids.reserve(size);
      plan.question_counts.reserve(size);
      for (std::size_t i = 0; i < size; ++i) {
        std::uint32_t doc = order[cursor++];
        plan.document_ids.push_back(desc.document_ids[doc]);
        plan.question_counts.push_back(desc.question_counts[doc]);
      }
      plans.push_back(std::move(plan));
    }
  }
  return plans;
}

std::array<int, 3> scenario_allocation(int total_clients) {
  switch (total_clients) {
    case 3: return {1, 1, 1};
    case 10: return {1, 4, 5};
    case 30: return {2, 13, 15};
    default:
      throw DomainError("scenario: only K in {3, 10, 30} has a preset split");
  }
}

std::vector<DatasetDescriptor> scenario(int total_clients) {
  std::array<int, 3> alloc = scenario_allocation(total_clients);
  const char* names[3] = {"WTQ", "DocVQA", "TabFact"};
  std::vector<DatasetDescriptor> out(3);
  for (int i = 0; i < 3; ++i) {
    out[i].name = names[i];
    out[i].assigned_clients = alloc[i];
  }
  return out;
}

void fill_documents(std::vector<DatasetDescriptor>& descriptors,
                    const std::vector<DatasetDescriptor>& manifest) {
  for (DatasetDescriptor& desc : descriptors) {
    const DatasetDescriptor* found = nullptr;
    for (const DatasetDescriptor& m : manifest) {
      if (m.name == desc.name) {
        found = &m;
        break;
      }
    }
    if (found == nullptr) {
      throw DomainError("fill_documents: manifest has no dataset '" +
                        desc.name + "'");
    }
    desc.document_ids = found->document_ids;
    desc.question_counts = found->question_counts;
  }
}

std::vector<DatasetDescriptor> synthetic_manifest(double scale) {
  if (!(scale > 0.0)) {
    throw DomainError("synthetic_manifest: scale must be positive");
  }
  struct Source {
    const char* name;
    std::int64_t documents;
    std::int64_t questions;
  };
  const Source sources[3] = {
      {"WTQ", 1346, 14152},
      {"DocVQA", 10194, 39463},
      {"TabFact", 13163, 91835},
  };
  std::vector<DatasetDescriptor> out;
  for (const Source& src : sources) {
    std::int64_t docs = std::max<std::int64_t>(
        1, std::llround(static_cast<double>(src.documents) * scale));
    std::int64_t questions = std::max<std::int64_t>(
        docs, std::llround(static_cast<double>(src.questions) * scale));
    DatasetDescriptor desc;
    desc.name = src.name;
    desc.document_ids.reserve(docs);
    desc.question_counts.reserve(docs);
    std::int64_t base = questions / docs;
    std::int64_t extra = questions % docs;
    for (std::int64_t i = 0; i < docs; ++i) {
      std::ostringstream id;
      id << src.name << "-" << i;
      desc.document_ids.push_back(id.str());
      desc.question_counts.push_back(
          static_cast<int>(base + (i < extra ? 1 : 0)));
    }
    out.push_back(std::move(desc));
  }
  return out;
}

std::vector<DatasetDescriptor> read_manifest(std::istream& in) {
  std::vector<DatasetDescriptor> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::size_t c1 = line.find(',');
    std::size_t c2 = c1 == std::string::npos ? std::string::npos
                                             : line.find(',', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos) {
      throw ParseError("manifest line " + std::to_string(line_no) +
                       ": expected dataset,doc_id,question_count");
    }
    std::string dataset = line.substr(0, c1);
    std::string doc_id = line.substr(c1 + 1, c2 - c1 - 1);
    int questions = 0;
    try {
      questions = std::stoi(line.substr(c2 + 1));
    } catch (const std::exception&) {
      throw ParseError("manifest line " + std::to_string(line_no) +
                       ": bad question count");
    }
    if (questions < 0) {
      throw ParseError("manifest line " + std::to_string(line_no) +
                       ": negative question count");
    }
    DatasetDescriptor* desc = nullptr;
    for (DatasetDescriptor& d : out) {
      if (d.name == dataset) {
        desc = &d;
        break;
      }
    }
    if (desc == nullptr) {
      out.emplace_back();
      desc = &out.back();
      desc->name = dataset;
    }
    desc->document_ids.push_back(doc_id);
    desc->question_counts.push_back(questions);
  }
  return out;
}

void write_manifest(std::ostream& out,
                    const std::vector<DatasetDescriptor>& descriptors) {
  for (const DatasetDescriptor& desc : descriptors) {
    for (std::size_t i = 0; i < desc.document_ids.size(); ++i) {
      out << desc.name << ',' << desc.document_ids[i] << ','
          << desc.question_counts[i] << '\n';
    }
  }
}

std::string plan_to_json(const std::vector<ClientShardPlan>& plans) {
  nlohmann::json arr = nlohmann::json::array();
  for (const ClientShardPlan& plan : plans) {
    nlohmann::json obj;
    obj["client_id"] = plan.client_id;
    obj["dataset"] = plan.dataset;
    obj["documents"] = plan.document_ids;
    obj["document_count"] = plan.document_count();
    obj["question_count"] = plan.question_count();
    arr.push_back(std::move(obj));
  }
  return arr.dump(2);
}

}  // namespace fedsim
