#pragma once

#include <cstddef>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sensalign/embedding_store.hpp"
#include "sensalign/kernel.hpp"

namespace sensalign {

struct ItemOverlap {
  std::size_t item = 0;
  std::size_t overlap = 0;
};

// |N_llm(i) ∩ N_ref(i)| for every item i.
std::vector<ItemOverlap> overlap_per_item(const NeighborIndex& llm, const NeighborIndex& ref);

struct OverlapRecord {
  std::size_t index = 0;
  std::string item_id;
  std::string caption;
  std::size_t overlap_a = 0;
  std::size_t overlap_b = 0;
  long delta = 0;  // overlap_b - overlap_a
  std::vector<std::string> neighbors_a;
  std::vector<std::string> neighbors_b;
  std::vector<std::string> neighbors_ref;
};

// Items ranked by the gain in shared reference neighbors when moving from
// condition a to condition b (descending delta, ties by ascending index),
// truncated to top_m.
std::vector<OverlapRecord> overlap_delta_ranking(const NeighborIndex& cond_a,
                                                 const NeighborIndex& cond_b,
                                                 const NeighborIndex& ref, std::size_t top_m,
                                                 const DatasetManifest& manifest);

nlohmann::json record_to_json(const OverlapRecord& record);
// One JSON object per line.
void write_jsonl(std::ostream& out, const std::vector<OverlapRecord>& records);

}  // namespace sensalign
