#include "sensalign/neighbor_report.hpp"

#include <algorithm>
#include <string>

#include "sensalign/error.hpp"

namespace sensalign {

namespace {

void check_same_shape(const NeighborIndex& a, const NeighborIndex& b) {
  if (a.n() != b.n() || a.k() != b.k()) {
    fail("shape mismatch: (n=" + std::to_string(a.n()) + ", k=" + std::to_string(a.k()) +
         ") vs (n=" + std::to_string(b.n()) + ", k=" + std::to_string(b.k()) + ")");
  }
}

std::vector<std::string> resolve(std::span<const std::uint32_t> ids,
                                 const DatasetManifest& manifest) {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (auto id : ids) out.push_back(manifest.item(id).item_id);
  return out;
}

}  // namespace

std::vector<ItemOverlap> overlap_per_item(const NeighborIndex& llm, const NeighborIndex& ref) {
  check_same_shape(llm, ref);
  std::vector<ItemOverlap> out(llm.n());
  for (std::size_t i = 0; i < llm.n(); ++i) {
    out[i] = {i, intersection_size(llm.neighbors(i), ref.neighbors(i))};
  }
  return out;
}

std::vector<OverlapRecord> overlap_delta_ranking(const NeighborIndex& cond_a,
                                                 const NeighborIndex& cond_b,
                                                 const NeighborIndex& ref, std::size_t top_m,
                                                 const DatasetManifest& manifest) {
  check_same_shape(cond_a, ref);
  check_same_shape(cond_b, ref);
  if (manifest.n_items() != ref.n()) {
    fail("row count mismatch (" + std::to_string(ref.n()) + "≠" +
         std::to_string(manifest.n_items()) + ")");
  }
  if (top_m > ref.n()) {
    fail("top_m=" + std::to_string(top_m) + " exceeds n=" + std::to_string(ref.n()));
  }

  const auto over_a = overlap_per_item(cond_a, ref);
  const auto over_b = overlap_per_item(cond_b, ref);

  std::vector<std::size_t> order(ref.n());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  auto delta = [&](std::size_t i) {
    return static_cast<long>(over_b[i].overlap) - static_cast<long>(over_a[i].overlap);
  };
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return delta(x) > delta(y); });
  order.resize(top_m);

  std::vector<OverlapRecord> records;
  records.reserve(top_m);
  for (auto i : order) {
    OverlapRecord r;
    r.index = i;
    r.item_id = manifest.item(i).item_id;
    r.caption = manifest.item(i).caption;
    r.overlap_a = over_a[i].overlap;
    r.overlap_b = over_b[i].overlap;
    r.delta = delta(i);
    r.neighbors_a = resolve(cond_a.neighbors(i), manifest);
    r.neighbors_b = resolve(cond_b.neighbors(i), manifest);
    r.neighbors_ref = resolve(ref.neighbors(i), manifest);
    records.push_back(std::move(r));
  }
  return records;
}

nlohmann::json record_to_json(const OverlapRecord& r) {
  return {{"index", r.index},
          {"item_id", r.item_id},
          {"caption", r.caption},
          {"overlap_a", r.overlap_a},
          {"overlap_b", r.overlap_b},
          {"delta", r.delta},
          {"neighbors_a", r.neighbors_a},
          {"neighbors_b", r.neighbors_b},
          {"neighbors_ref", r.neighbors_ref}};
}

void write_jsonl(std::ostream& out, const std::vector<OverlapRecord>& records) {
  for (const auto& r : records) out << record_to_json(r).dump() << '\n';
}

}  // namespace sensalign
